use gop_forge::g2p::{decode, train, G2pConfig, Graphone, GraphoneModel, UNBOUNDED_BEAM};
use gop_forge::lexicon::{parse_lexicon, SpecialWords};
use proptest::prelude::*;

/// Best graphone sequence spelling `word`, by enumerating every sequence
/// over the inventory.
fn exhaustive_best(model: &GraphoneModel, word: &str) -> Option<(f64, Vec<String>)> {
    fn go(model: &GraphoneModel, rest: &str, after_ins: bool, seq: &mut Vec<u32>, best: &mut Option<(f64, Vec<u32>)>) {
        if rest.is_empty() {
            let lp = model.log_prob(seq);
            if best.as_ref().is_none_or(|(b, _)| lp > *b) {
                *best = Some((lp, seq.clone()));
            }
        }
        for (id, g) in model.graphones() {
            if (g.is_insertion() && after_ins) || !rest.starts_with(g.letters.as_str()) {
                continue;
            }
            if g.is_insertion() && rest.is_empty() && after_ins {
                continue;
            }
            seq.push(id);
            go(model, &rest[g.letters.len()..], g.is_insertion(), seq, best);
            seq.pop();
        }
    }
    let mut best = None;
    go(model, word, false, &mut Vec::new(), &mut best);
    best.map(|(lp, seq)| {
        let pron = seq
            .iter()
            .flat_map(|&t| model.graphone(t).unwrap().phones.clone())
            .collect();
        (lp, pron)
    })
}

fn small_model(text: &str, order: usize) -> GraphoneModel {
    let cfg = G2pConfig {
        order,
        max_letters: 1,
        max_phones: 1,
        ..Default::default()
    };
    train(&parse_lexicon(text).unwrap(), &SpecialWords::default(), &cfg)
        .unwrap()
        .0
}

#[test]
fn single_pair_model_is_near_certain() {
    let cfg = G2pConfig {
        order: 2,
        max_letters: 1,
        max_phones: 1,
        ..Default::default()
    };
    let (model, _) = train(&parse_lexicon("A AH").unwrap(), &SpecialWords::default(), &cfg).unwrap();
    let a = model.id(&Graphone::new("A", &["AH"])).unwrap();
    assert!(model.prob(&[gop_forge::g2p::BOS], a) > 0.99);
    let h = decode(&model, "A", UNBOUNDED_BEAM, 1).unwrap();
    assert_eq!(h[0].pron, vec!["AH".to_string()]);
    assert!(h[0].log_prob.abs() < 1e-2, "{}", h[0].log_prob);
}

#[test]
fn unbounded_beam_matches_exhaustive_search() {
    let model = small_model("AB AH B\nBA B AH\nCAB K AH B\nAC AH K\nBC B K", 2);
    for word in ["AB", "CAB", "BAC", "CCA", "ABBA", "BACA"] {
        let want = exhaustive_best(&model, word).unwrap();
        let got = decode(&model, word, UNBOUNDED_BEAM, 1).unwrap();
        assert!(
            (got[0].log_prob - want.0).abs() < 1e-9,
            "{word}: {} vs {}",
            got[0].log_prob,
            want.0
        );
        assert_eq!(got[0].pron, want.1, "{word}");
    }
}

#[test]
fn nbest_is_sorted_distinct_and_exactly_scored() {
    let model = small_model("AB AH B\nBA B AH\nCAB K AH B\nAC AH K\nBC B K", 3);
    for beam in [1, 4, UNBOUNDED_BEAM] {
        let hyps = decode(&model, "CAB", beam, 5).unwrap();
        assert!(!hyps.is_empty());
        for w in hyps.windows(2) {
            assert!(w[0].log_prob >= w[1].log_prob);
            assert_ne!(w[0].pron, w[1].pron);
        }
        for h in &hyps {
            let ids: Vec<u32> = h.graphones.iter().map(|g| model.id(g).unwrap()).collect();
            assert!((model.log_prob(&ids) - h.log_prob).abs() < 1e-12);
            assert_eq!(
                h.graphones.iter().map(|g| g.letters.as_str()).collect::<String>(),
                "CAB"
            );
        }
    }
}

#[test]
fn decode_errors() {
    let model = small_model("AB AH B", 2);
    assert!(matches!(
        decode(&model, "AZ", UNBOUNDED_BEAM, 1),
        Err(gop_forge::g2p::G2pError::UnknownGrapheme { letter: 'Z', .. })
    ));
    assert!(train(
        &parse_lexicon("<UNK> SPN").unwrap(),
        &SpecialWords::default(),
        &G2pConfig::default()
    )
    .is_err());
}

#[test]
fn model_text_roundtrip_preserves_decoding() {
    let mut model = small_model("AB AH B\nBA B AH\nCAB K AH B", 3);
    model.set_discounts(&[0.3, 0.3, 0.3]).unwrap();
    let back = GraphoneModel::parse(&model.serialize()).unwrap();
    assert_eq!(back.serialize(), model.serialize());
    assert_eq!(
        decode(&back, "ABC", UNBOUNDED_BEAM, 3).unwrap(),
        decode(&model, "ABC", UNBOUNDED_BEAM, 3).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_lexicons_are_normalized_and_monotone(
        words in proptest::collection::btree_set("[abc]{1,4}", 2..6),
        order in 1usize..=3,
    ) {
        let phone = |c: char| match c { 'a' => "AA", 'b' => "B", _ => "K" };
        let text: String = words
            .iter()
            .map(|w| format!("{w} {}\n", w.chars().map(phone).collect::<Vec<_>>().join(" ")))
            .collect();
        let lex = parse_lexicon(&text).unwrap();
        let cfg = G2pConfig { order, ..Default::default() };
        let (model, report) = train(&lex, &SpecialWords::default(), &cfg).unwrap();
        for w in report.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10);
        }
        for h in model.histories() {
            prop_assert!((model.mass(&h) - 1.0).abs() < 1e-9);
        }
        for e in lex.entries() {
            let hyps = decode(&model, &e.word, UNBOUNDED_BEAM, 2).unwrap();
            for h in hyps {
                prop_assert_eq!(h.graphones.iter().map(|g| g.letters.as_str()).collect::<String>(), e.word.clone());
            }
        }
    }
}
