use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use gop_forge::g2p::GraphoneModel;
use gop_forge::lexicon::{derive_inventory, parse_lexicon, Lexicon, SpecialWords, Vocabulary};
use gop_forge::pipeline::*;
use gop_forge::synth::{self, Workspace};

fn workspace() -> &'static (tempfile::TempDir, Workspace) {
    static WS: OnceLock<(tempfile::TempDir, Workspace)> = OnceLock::new();
    WS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let ws = synth::prepare_workspace(dir.path(), 0).unwrap();
        (dir, ws)
    })
}

fn manifest(path: &Path) -> Vec<ManifestEntry> {
    let ws = &workspace().1;
    parse_manifest(&std::fs::read_to_string(path).unwrap(), &ws.root).unwrap()
}

fn config(mode: Mode, out: &Path) -> PipelineConfig {
    let ws = &workspace().1;
    let mut cfg = PipelineConfig::load(&ws.config).unwrap();
    cfg.mode = mode;
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn run(mode: Mode, manifest_path: &Path, edit: impl FnOnce(&mut PipelineConfig)) -> (tempfile::TempDir, Summary) {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(mode, out.path());
    edit(&mut cfg);
    let summary = run_batch(&cfg, &manifest(manifest_path)).unwrap();
    (out, summary)
}

fn read_lexicon(out: &Path) -> Lexicon {
    parse_lexicon(&std::fs::read_to_string(out.join("lexicon.txt")).unwrap()).unwrap()
}

fn l0() -> Lexicon {
    load_lexicons(&workspace().1.lexicons).unwrap()
}

fn entries(l: &Lexicon) -> BTreeSet<String> {
    l.serialize().lines().map(str::to_string).collect()
}

#[test]
fn every_mode_scores_planted_oovs_without_spoken_noise() {
    let ws = &workspace().1;
    for mode in [Mode::Offline, Mode::Online, Mode::Hybrid] {
        let (out, s) = run(mode, &ws.manifest, |_| {});
        assert_eq!(s.succeeded, 10, "{mode:?}: {:?}", s.failures);
        assert_eq!(s.unique_oov, 3);
        assert_eq!(s.oov_tokens, 4);
        for entry in std::fs::read_dir(out.path().join("reports")).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "gop") {
                let text = std::fs::read_to_string(&p).unwrap();
                assert!(
                    !text.contains(" SPN ") && !text.contains("<UNK>"),
                    "{mode:?} {}",
                    p.display()
                );
            }
        }
    }
}

#[test]
fn control_run_maps_oovs_to_spoken_noise() {
    let ws = &workspace().1;
    let (out, s) = run(Mode::Hybrid, &ws.manifest, |c| c.resolve_oov = false);
    assert_eq!(s.succeeded, 10);
    assert_eq!(s.persisted_g2p, 0);
    let report = std::fs::read_to_string(out.path().join("reports/utt01.gop")).unwrap();
    assert!(report.contains("SPN <UNK>"), "{report}");
}

#[test]
fn online_leaves_the_starting_lexicon_untouched() {
    let ws = &workspace().1;
    let (out, s) = run(Mode::Online, &ws.manifest, |_| {});
    assert_eq!(
        std::fs::read_to_string(out.path().join("lexicon.txt")).unwrap(),
        l0().serialize()
    );
    assert_eq!(s.persisted_g2p, 0);
    assert_eq!(s.transient_g2p, 4);
}

#[test]
fn hybrid_grows_to_the_offline_lexicon() {
    let ws = &workspace().1;
    let (off, _) = run(Mode::Offline, &ws.manifest, |_| {});
    let (hyb, s) = run(Mode::Hybrid, &ws.manifest, |_| {});
    let start = entries(&l0());
    let end = entries(&read_lexicon(hyb.path()));
    assert!(start.is_subset(&end));
    assert_eq!(end, entries(&read_lexicon(off.path())));
    assert_eq!(s.persisted_g2p, 3);
}

#[test]
fn hybrid_lexicon_grows_monotonically_per_utterance() {
    let ws = &workspace().1;
    let (primary, secondary) = synth::lexicons(&SpecialWords::default());
    let l0 = gop_forge::lexicon::merge_lexicons(&primary, &secondary).unwrap();
    let am = gop_forge::acoustic::AcousticModel::parse(&std::fs::read_to_string(&ws.acoustic_model).unwrap()).unwrap();
    let g2p = GraphoneModel::parse(&std::fs::read_to_string(&ws.g2p_model).unwrap()).unwrap();
    let models = Models {
        am,
        g2p: Some(g2p),
        features: Default::default(),
    };
    let mut p = Pipeline::new(Mode::Hybrid, l0, models, PipelineOptions::default()).unwrap();
    let mut prev = entries(&p.state().lexicon);
    for m in manifest(&ws.manifest) {
        p.resolve(&m.utt_id, &m.transcript).unwrap();
        let now = entries(&p.state().lexicon);
        assert!(prev.is_subset(&now));
        prev = now;
    }
    assert_eq!(p.counters().recompilations(), 3);
}

#[test]
fn recompilations_follow_unique_oovs() {
    let ws = &workspace().1;
    let expect = [(Mode::Online, 4), (Mode::Hybrid, 1), (Mode::Offline, 0)];
    for (mode, n) in expect {
        let (_, s) = run(mode, &ws.repeat_manifest, |_| {});
        assert_eq!(s.recompilations, n, "{mode:?}");
        assert_eq!(s.unique_oov, 1);
        assert_eq!(s.oov_tokens, 4);
    }
}

#[test]
fn disk_cache_is_reused_across_runs() {
    let ws = &workspace().1;
    let cache = tempfile::tempdir().unwrap();
    let dir: PathBuf = cache.path().to_path_buf();
    let (_, first) = run(Mode::Hybrid, &ws.repeat_manifest, |c| c.cache_dir = Some(dir.clone()));
    let (_, second) = run(Mode::Hybrid, &ws.repeat_manifest, |c| c.cache_dir = Some(dir.clone()));
    assert_eq!(first.compilations, 2);
    assert_eq!(second.compilations, 0);
    assert_eq!(second.recompilations, 1);
}

#[test]
fn vocabulary_expansion_matches_lexicon_expansion() {
    let ws = &workspace().1;
    let (a, sa) = run(Mode::Online, &ws.manifest, |c| c.expansion = Expansion::Lexicon);
    let (b, sb) = run(Mode::Online, &ws.manifest, |c| c.expansion = Expansion::Vocabulary);
    assert_eq!(sa.succeeded, sb.succeeded);
    for utt in ["utt01", "utt04", "utt07"] {
        let f = |d: &Path| std::fs::read_to_string(d.join("reports").join(format!("{utt}.gop"))).unwrap();
        assert_eq!(f(a.path()), f(b.path()));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let ws = &workspace().1;
    let tree = |d: &Path| {
        let mut files = Vec::new();
        let mut stack = vec![d.to_path_buf()];
        while let Some(p) = stack.pop() {
            for e in std::fs::read_dir(&p).unwrap() {
                let path = e.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(d).unwrap().to_path_buf();
                    files.push((rel, std::fs::read(&path).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    let (a, _) = run(Mode::Hybrid, &ws.manifest, |c| c.jobs = 1);
    let (b, _) = run(Mode::Hybrid, &ws.manifest, |c| c.jobs = 3);
    assert_eq!(tree(a.path()), tree(b.path()));
}

#[test]
fn empty_manifest_writes_a_zero_summary() {
    let out = tempfile::tempdir().unwrap();
    let cfg = config(Mode::Online, out.path());
    let s = run_batch(&cfg, &[]).unwrap();
    assert_eq!((s.utterances, s.compilations, s.recompilations), (0, 0, 0));
    let text = std::fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(text.contains("utterances = 0"));
}

#[test]
fn strict_mode_stops_at_the_first_failure() {
    let ws = &workspace().1;
    let mut m = manifest(&ws.manifest);
    m[2].audio = ws.root.join("missing.wav");
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(Mode::Hybrid, out.path());
    cfg.strict = true;
    let s = run_batch(&cfg, &m).unwrap();
    assert_eq!((s.utterances, s.failed()), (3, 1));
    assert!(s.stopped_early);
    cfg.strict = false;
    let s = run_batch(&cfg, &m).unwrap();
    assert_eq!((s.utterances, s.failed()), (10, 1));
    assert!(!s.stopped_early);
}

#[test]
fn missing_g2p_model_reports_every_word() {
    let ws = &workspace().1;
    let (_, s) = run(Mode::Online, &ws.manifest, |c| c.g2p_model = None);
    assert_eq!(s.failed(), 4);
    assert!(s.failures.iter().all(|(_, e)| e.contains("no G2P model")));
}

#[test]
fn offline_rejects_words_outside_the_prepared_set() {
    let ws = &workspace().1;
    let (primary, secondary) = synth::lexicons(&SpecialWords::default());
    let l0 = gop_forge::lexicon::merge_lexicons(&primary, &secondary).unwrap();
    let am = gop_forge::acoustic::AcousticModel::parse(&std::fs::read_to_string(&ws.acoustic_model).unwrap()).unwrap();
    let g2p = GraphoneModel::parse(&std::fs::read_to_string(&ws.g2p_model).unwrap()).unwrap();
    let models = Models {
        am,
        g2p: Some(g2p),
        features: Default::default(),
    };
    let mut p = Pipeline::new(Mode::Offline, l0, models, PipelineOptions::default()).unwrap();
    let words = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    assert!(matches!(p.resolve("x", &words("BAD")), Err(PipelineError::NotPrepared)));
    p.prepare_offline([words("BAD DUNK").as_slice()]).unwrap();
    assert!(p.resolve("x", &words("DUNK BAD")).is_ok());
    match p.resolve("y", &words("MASK")) {
        Err(PipelineError::OovAtRuntime { words, .. }) => assert_eq!(words, vec!["MASK".to_string()]),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn generated_entries_use_speech_phones() {
    let ws = &workspace().1;
    let g2p = GraphoneModel::parse(&std::fs::read_to_string(&ws.g2p_model).unwrap()).unwrap();
    let l0 = l0();
    let inv = derive_inventory(&l0, &SpecialWords::default());
    let oov = Vocabulary {
        words: synth::OOV_WORDS.iter().map(|w| w.to_string()).collect(),
    };
    let lex = generate_oov_lexicon(&oov, Some(&g2p), 64, &inv).unwrap();
    for w in synth::OOV_WORDS {
        let prons: Vec<&[String]> = lex.prons(w).collect();
        assert_eq!(prons, vec![synth::pronounce(w).as_slice()], "{w}");
    }
    assert!(matches!(
        generate_oov_lexicon(&oov, None, 64, &inv),
        Err(PipelineError::G2pFailure(f)) if f.len() == 3
    ));
}
