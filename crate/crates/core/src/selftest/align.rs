//! Alignment checks: exhaustive best state sequence on tiny instances and
//! boundary recovery on synthetic two-phone utterances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::acoustic::{AcousticModel, FeatureMatrix, Gmm, Matrix};
use crate::align::{compile_utterance_graph, force_align, frame_costs, DEFAULT_BEAM};
use crate::lexicon::{derive_inventory, parse_lexicon, SpecialWords};

use super::Check;

fn features(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    FeatureMatrix {
        data: Matrix::from_rows(rows),
        frame_shift: 0.01,
        frame_length: 0.025,
    }
}

/// Cost of a senone sequence under the graph's scoring, or `None` if the
/// sequence does not spell `SIL? (A SIL?)^words` with 2-state phones.
/// Independent of the transducer machinery: phone blocks are parsed by
/// hand and the costs are added from the model and the 0.5 silence prior.
fn sequence_cost(am: &AcousticModel, costs: &[Vec<f64>], seq: &[usize], words: usize) -> Option<f64> {
    let k = am.states_per_phone;
    let sil = am.phone_index("SIL").unwrap();
    let a = am.phone_index("A").unwrap();
    let mut blocks: Vec<usize> = Vec::new();
    let mut cost = 0.0;
    for (t, &s) in seq.iter().enumerate() {
        cost += costs[t][s];
        let (p, j) = am.split_senone(s);
        if p != sil && p != a {
            return None;
        }
        let new_block = t == 0 || {
            let (pp, pj) = am.split_senone(seq[t - 1]);
            pp != p || j < pj
        };
        if new_block {
            if t > 0 {
                let (_, pj) = am.split_senone(seq[t - 1]);
                if pj != k - 1 {
                    return None;
                }
                cost -= am.forward_prob(seq[t - 1]).ln();
            }
            if j != 0 {
                return None;
            }
            blocks.push(p);
        } else {
            let prev = seq[t - 1];
            let (_, pj) = am.split_senone(prev);
            if j == pj {
                cost -= am.self_loop[prev].ln();
            } else if j == pj + 1 {
                cost -= am.forward_prob(prev).ln();
            } else {
                return None;
            }
        }
    }
    let last = *seq.last()?;
    if am.split_senone(last).1 != k - 1 {
        return None;
    }
    cost -= am.forward_prob(last).ln();
    // SIL? (A SIL?)^words
    let mut i = usize::from(blocks.first() == Some(&sil));
    for _ in 0..words {
        if blocks.get(i) != Some(&a) {
            return None;
        }
        i += 1;
        if blocks.get(i) == Some(&sil) {
            i += 1;
        }
    }
    if i != blocks.len() {
        return None;
    }
    // one silence decision at the start and one after every word
    Some(cost + (words + 1) as f64 * 2f64.ln())
}

pub fn alignment_oracle(seed: u64, instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = parse_lexicon("X A").unwrap();
    let inv = derive_inventory(&lex, &SpecialWords::default());
    let name = "align: full-beam alignment equals the exhaustive best path";
    let mut failure = None;
    for i in 0..instances {
        let phones = inv.phones();
        let n = phones.len() * 2;
        let am = AcousticModel {
            phones,
            states_per_phone: 2,
            gmms: (0..n)
                .map(|_| Gmm::single(vec![rng.gen_range(-2.0..2.0)], vec![rng.gen_range(0.5..2.0)]))
                .collect(),
            self_loop: (0..n).map(|_| rng.gen_range(0.2..0.8)).collect(),
            transition_floor: 1e-10,
        };
        let words = rng.gen_range(1..=2);
        let transcript = vec!["X".to_string(); words];
        let t_len = rng.gen_range(2 * words..=6);
        let f = features((0..t_len).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect());
        let costs = frame_costs(&am, &f).unwrap();
        let usable: Vec<usize> = ["SIL", "A"]
            .iter()
            .flat_map(|p| {
                let pi = am.phone_index(p).unwrap();
                [am.senone(pi, 0), am.senone(pi, 1)]
            })
            .collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for code in 0..usable.len().pow(t_len as u32) {
            let seq: Vec<usize> = (0..t_len)
                .map(|t| usable[code / usable.len().pow(t as u32) % usable.len()])
                .collect();
            if let Some(c) = sequence_cost(&am, &costs, &seq, words) {
                if best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, seq));
                }
            }
        }
        let (want_cost, want) = best.expect("every instance has a valid sequence");
        let got = compile_utterance_graph(&transcript, &lex, &inv, &am)
            .map_err(|e| e.to_string())
            .and_then(|g| force_align("x", &g, &f, &am, 100_000).map_err(|e| e.to_string()));
        match got {
            Ok(a) if a.senones == want && (a.cost - want_cost).abs() < 1e-9 => {}
            Ok(a) => {
                failure = Some(format!(
                    "instance {i}: aligned {:?} (cost {}), oracle {:?} (cost {})",
                    a.senones, a.cost, want, want_cost
                ));
                break;
            }
            Err(e) => {
                failure = Some(format!("instance {i}: {e}"));
                break;
            }
        }
    }
    Check::new(
        name,
        failure,
        format!("{instances} instances, 4 senones, up to 6 frames"),
    )
}

/// Two phones with overlapping Gaussians, boundary at a known frame.
pub fn boundary_recovery(seed: u64, trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = parse_lexicon("AB A B").unwrap();
    let inv = derive_inventory(&lex, &SpecialWords::default());
    let phones = inv.phones();
    let k = 3;
    let dim = 3;
    let phone_mean = |p: &str| match p {
        "A" => 0.0,
        "B" => 1.5,
        "SIL" => -8.0,
        _ => 8.0,
    };
    let am = AcousticModel {
        gmms: phones
            .iter()
            .flat_map(|p| std::iter::repeat_n(Gmm::single(vec![phone_mean(p); dim], vec![1.0; dim]), k))
            .collect(),
        self_loop: vec![0.8; phones.len() * k],
        phones,
        states_per_phone: k,
        transition_floor: 1e-10,
    };
    let transcript = vec!["AB".to_string()];
    let graph = match compile_utterance_graph(&transcript, &lex, &inv, &am) {
        Ok(g) => g,
        Err(e) => return Check::new("align: boundary recovery", Some(e.to_string()), String::new()),
    };
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut hits = 0;
    for _ in 0..trials {
        let n1 = rng.gen_range(8..=20);
        let n2 = rng.gen_range(8..=20);
        let rows: Vec<Vec<f64>> = (0..n1 + n2)
            .map(|t| {
                let m = if t < n1 { 0.0 } else { 1.5 };
                (0..dim).map(|_| m + noise.sample(&mut rng)).collect()
            })
            .collect();
        if let Ok(a) = force_align("b", &graph, &features(rows), &am, DEFAULT_BEAM) {
            let found = a.phone_segments.iter().find(|s| s.phone == "B").map(|s| s.start);
            if found.is_some_and(|b| b.abs_diff(n1) <= 2) {
                hits += 1;
            }
        }
    }
    let failure = (hits * 100 < 95 * trials).then(|| format!("{hits}/{trials} within ±2 frames"));
    Check::new(
        "align: two-phone boundary within ±2 frames in at least 95% of trials",
        failure,
        format!("{hits}/{trials} within ±2 frames"),
    )
}
