use std::ffi::OsStr;
use std::fmt::Debug;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gop-forge"))
}

fn run<S: AsRef<OsStr> + Debug>(args: &[S], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn ok<S: AsRef<OsStr> + Debug>(args: &[S], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> &'static Path {
    static WS: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &WS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        ok(&["synth", "--out", "ws"], dir.path());
        let root = dir.path().to_path_buf();
        (dir, root)
    })
    .1
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = run(&["lexicon", "oov", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run::<&str>(&[], dir.path()).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.lex"), "A\n").unwrap();
    std::fs::write(dir.path().join("t.txt"), "A\n").unwrap();
    let out = run(
        &["lexicon", "oov", "--transcript", "t.txt", "--lexicon", "bad.lex"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
}

#[test]
fn version_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(&["--version"], dir.path()).starts_with("gop-forge "));
    assert!(ok(&["pipeline", "run", "--help"], dir.path()).contains("--mode"));
}

#[test]
fn covered_transcript_has_no_oov() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("l.txt"), "CAT K AE T\nDOG D AO G\n").unwrap();
    std::fs::write(dir.path().join("t.txt"), "cat dog\nDOG\n").unwrap();
    let out = ok(
        &["lexicon", "oov", "--transcript", "t.txt", "--lexicon", "l.txt"],
        dir.path(),
    );
    assert_eq!(out, "");
    std::fs::write(dir.path().join("t.txt"), "cat bird\n").unwrap();
    let out = ok(
        &["lexicon", "oov", "--transcript", "t.txt", "--lexicon", "l.txt"],
        dir.path(),
    );
    assert_eq!(out, "BIRD\n");
}

#[test]
fn lexicon_merge_and_prepare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.txt"), "CAT K AE T\n").unwrap();
    std::fs::write(d.join("b.txt"), "DOG D AO G\nCAT K AE T\n").unwrap();
    ok(
        &[
            "lexicon",
            "merge",
            "--base",
            "a.txt",
            "--addition",
            "b.txt",
            "--out",
            "m.txt",
        ],
        d,
    );
    assert_eq!(
        std::fs::read_to_string(d.join("m.txt")).unwrap(),
        "CAT K AE T\nDOG D AO G\n"
    );
    // no special words
    assert_eq!(
        run(&["lexicon", "prepare", "--lexicon", "m.txt", "--out", "lang"], d)
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn stage_by_stage_scoring() {
    let ws = workspace();
    let with = |head: &[&str], tail: &[&str]| -> Vec<String> {
        let lex = ["--lexicon", "ws/primary.lex", "--lexicon", "ws/secondary.lex"];
        head.iter()
            .chain(lex.iter())
            .chain(tail)
            .map(|a| a.to_string())
            .collect()
    };
    let scratch = tempfile::tempdir_in(ws).unwrap();
    let s = scratch.path().file_name().unwrap().to_str().unwrap().to_string();
    let p = |f: &str| format!("{s}/{f}");

    ok(&with(&["lexicon", "prepare"], &["--out", &p("lang")]), ws);
    assert!(ws.join(p("lang/nonsilence_phones.txt")).exists());

    let known: String = std::fs::read_to_string(ws.join("ws/manifest.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !["DUNK", "MASK", "SKIM"].iter().any(|w| l.contains(w)))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(ws.join("ws/known.tsv"), known).unwrap();

    let hcl = p("hcl.fst");
    ok(
        &with(&["graph", "compile-hcl"], &["--model", "ws/am.txt", "--out", &hcl]),
        ws,
    );
    let info = ok(&["graph", "info", "--fst", &hcl], ws);
    assert!(info.starts_with("states\t"));
    ok(&with(&["graph", "compile-l"], &["--out", &p("l.fst")]), ws);

    ok(
        &["am", "extract", "--manifest", "ws/known.tsv", "--out", &p("f.ark")],
        ws,
    );
    ok(
        &[
            "am",
            "posteriors",
            "--model",
            "ws/am.txt",
            "--features",
            &p("f.ark"),
            "--out",
            &p("p.ark"),
        ],
        ws,
    );
    ok(
        &with(
            &["align", "run", "--manifest", "ws/known.tsv"],
            &["--model", "ws/am.txt", "--out", &p("a.txt")],
        ),
        ws,
    );
    let ctm = ok(&["align", "ctm", "--alignments", &p("a.txt"), "--level", "word"], ws);
    assert!(ctm.lines().all(|l| l.split(' ').count() == 5));
    let report = ok(
        &[
            "gop",
            "score",
            "--alignments",
            &p("a.txt"),
            "--posteriors",
            &p("p.ark"),
            "--model",
            "ws/am.txt",
            "--posterior-map",
            &p("map.ark"),
        ],
        ws,
    );
    assert!(report.lines().count() > 10);
    assert!(!report.contains("SPN"));
    assert!(ws.join(p("map.ark")).exists());

    ok(
        &with(
            &["am", "train", "--manifest", "ws/known.tsv"],
            &["--states", "2", "--iterations", "2", "--out", &p("am2.txt")],
        ),
        ws,
    );
    std::fs::write(ws.join(p("w.txt")), "mask\n").unwrap();
    let g2p = ok(
        &[
            "g2p",
            "apply",
            "--model",
            "ws/g2p.txt",
            "--words",
            &p("w.txt"),
            "--nbest",
            "2",
        ],
        ws,
    );
    assert_eq!(g2p.lines().count(), 2);
    assert!(g2p.starts_with("MASK\t"));
    assert!(g2p.lines().next().unwrap().ends_with("\tM AA S K"));
}

#[test]
fn g2p_train_writes_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("l.txt"), "AB A B\nBA B A\nAA A A\n").unwrap();
    ok(
        &[
            "g2p",
            "train",
            "--lexicon",
            "l.txt",
            "--order",
            "2",
            "--max-letters",
            "1",
            "--max-phones",
            "1",
            "--out",
            "m.txt",
        ],
        d,
    );
    std::fs::write(d.join("w.txt"), "ABA\n").unwrap();
    assert_eq!(
        ok(&["g2p", "apply", "--model", "m.txt", "--words", "w.txt"], d)
            .split('\t')
            .nth(2),
        Some("A B A\n")
    );
}

#[test]
fn pipeline_run_writes_reports_and_summary() {
    let ws = workspace();
    let out = ok(
        &[
            "pipeline",
            "run",
            "--mode",
            "hybrid",
            "--manifest",
            "ws/manifest.tsv",
            "--config",
            "ws/pipeline.cfg",
            "--output",
            "cli_hybrid",
        ],
        ws,
    );
    assert!(out.contains("mode = hybrid"));
    assert!(out.contains("failed = 0"));
    let dir = ws.join("cli_hybrid");
    assert!(dir.join("summary.txt").exists());
    assert!(dir.join("reports/utt01.gop").exists());

    let control = ok(
        &[
            "pipeline",
            "run",
            "--manifest",
            "ws/manifest.tsv",
            "--config",
            "ws/pipeline.cfg",
            "--output",
            "cli_control",
            "--no-resolve-oov",
        ],
        ws,
    );
    assert!(control.contains("persisted_g2p_entries = 0"));
    let report = std::fs::read_to_string(ws.join("cli_control/reports/utt01.gop")).unwrap();
    assert!(report.contains("SPN <UNK>"));
}

#[test]
fn strict_failure_exits_1() {
    let ws = workspace();
    let manifest = std::fs::read_to_string(ws.join("ws/manifest.tsv")).unwrap();
    std::fs::write(ws.join("ws/broken.tsv"), format!("{manifest}zz\tmissing.wav\tBAD\n")).unwrap();
    let args = [
        "pipeline",
        "run",
        "--manifest",
        "ws/broken.tsv",
        "--config",
        "ws/pipeline.cfg",
        "--output",
        "cli_strict",
    ];
    assert_eq!(run(&args, ws).status.code(), Some(0));
    let strict: Vec<&str> = args.iter().copied().chain(["--strict"]).collect();
    let out = run(&strict, ws);
    assert_eq!(out.status.code(), Some(1));
}
