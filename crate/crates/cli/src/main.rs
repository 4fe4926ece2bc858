use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "gop-forge",
    version,
    about = "Pronunciation scoring with automatic OOV lexicon expansion"
)]
pub struct Cli {
    /// Seed for every random choice (dither, synthetic data).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `pipeline run`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output on stderr; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pronunciation dictionaries.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Grapheme-to-phoneme model.
    #[command(subcommand)]
    G2p(G2pCmd),
    /// Decoding graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Features and acoustic model.
    #[command(subcommand)]
    Am(AmCmd),
    /// Forced alignment.
    #[command(subcommand)]
    Align(AlignCmd),
    /// Goodness of pronunciation.
    #[command(subcommand)]
    Gop(GopCmd),
    /// Batch scoring.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Run the brute-force oracle checks.
    Selftest,
    /// Write a synthetic corpus with trained models and a pipeline config.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum LexiconCmd {
    /// Merge, validate and write a lexicon with its phone lists.
    Prepare {
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Union of two lexicons.
    Merge {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        addition: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print transcript words missing from every lexicon.
    Oov {
        /// One transcript per line.
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum G2pCmd {
    Train {
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 2)]
        max_letters: usize,
        #[arg(long, default_value_t = 2)]
        max_phones: usize,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `word <tab> log-prob <tab> pronunciation` for each hypothesis.
    Apply {
        #[arg(long)]
        model: PathBuf,
        /// One word per line.
        #[arg(long)]
        words: PathBuf,
        #[arg(long, default_value_t = 1)]
        nbest: usize,
        #[arg(long, default_value_t = 64)]
        beam: usize,
    },
}

#[derive(Args, Debug)]
pub struct FstOut {
    /// Transducer text; symbol tables go to `<out>.isyms` and `<out>.osyms`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum GraphCmd {
    /// Lexicon transducer.
    CompileL {
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        #[arg(long)]
        no_disambig: bool,
        #[command(flatten)]
        out: FstOut,
    },
    /// Optimized H∘C∘L for an acoustic model.
    CompileHcl {
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: FstOut,
    },
    /// State and arc counts.
    Info {
        #[arg(long)]
        fst: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum AmCmd {
    /// Feature archive for every manifest entry.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        binary: bool,
    },
    /// Train on manifest audio with transcripts spelled by the lexicon.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        gaussians: usize,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Senone posteriors for a feature archive.
    Posteriors {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Level {
    Phone,
    Word,
}

#[derive(Subcommand, Debug)]
pub enum AlignCmd {
    /// Force-align every manifest entry.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "lexicon", required = true)]
        lexicons: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 200)]
        beam: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// CTM rows from an alignment file.
    Ctm {
        #[arg(long)]
        alignments: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Phone)]
        level: Level,
        #[arg(long, default_value_t = 0.01)]
        frame_shift: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum GopCmd {
    /// Per-phone scores from alignments and posteriors.
    Score {
        #[arg(long)]
        alignments: PathBuf,
        #[arg(long)]
        posteriors: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        frame_shift: f64,
        /// Leave out the transition into the first frame of each phone.
        #[arg(long)]
        skip_entry: bool,
        /// Also write per-phone posterior blocks here.
        #[arg(long)]
        posterior_map: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Offline,
    Online,
    Hybrid,
}

#[derive(Subcommand, Debug)]
pub enum PipelineCmd {
    Run {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        /// Map OOV words to the unknown word instead of generating entries.
        #[arg(long)]
        no_resolve_oov: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::Cli;

    /// Library operation and the subcommand that reaches it.
    const OPERATIONS: &[(&str, &[&str])] = &[
        ("lexicon::parse_lexicon", &["lexicon", "merge"]),
        ("lexicon::find_oov", &["lexicon", "oov"]),
        ("lexicon::merge_lexicons", &["lexicon", "merge"]),
        ("lexicon::derive_inventory", &["lexicon", "prepare"]),
        ("g2p::train", &["g2p", "train"]),
        ("g2p::GraphoneModel::prob", &["g2p", "apply"]),
        ("g2p::decode", &["g2p", "apply"]),
        ("wfst::compose", &["graph", "compile-hcl"]),
        ("wfst::determinize", &["graph", "compile-hcl"]),
        ("wfst::minimize", &["graph", "compile-hcl"]),
        ("wfst::build_l", &["graph", "compile-l"]),
        ("wfst::build_c", &["graph", "compile-hcl"]),
        ("wfst::build_h", &["graph", "compile-hcl"]),
        ("wfst::compile_hcl", &["graph", "compile-hcl"]),
        ("wfst::shortest_path_beam", &["align", "run"]),
        ("wfst::io::info", &["graph", "info"]),
        ("acoustic::extract_features", &["am", "extract"]),
        ("acoustic::train_am", &["am", "train"]),
        ("acoustic::AcousticModel::posteriors", &["am", "posteriors"]),
        ("acoustic::AcousticModel::transition_logprob", &["gop", "score"]),
        ("align::compile_utterance_graph", &["align", "run"]),
        ("align::force_align", &["align", "run"]),
        ("align::emit_ctm", &["align", "ctm"]),
        ("gop::score_phone", &["gop", "score"]),
        ("gop::score_utterance", &["gop", "score"]),
        ("gop::export_posterior_map", &["gop", "score"]),
        ("pipeline::generate_oov_lexicon", &["pipeline", "run"]),
        ("pipeline::Pipeline::prepare_offline", &["pipeline", "run"]),
        ("pipeline::Pipeline::run_utterance", &["pipeline", "run"]),
        ("pipeline::run_batch", &["pipeline", "run"]),
        ("selftest::run_all", &["selftest"]),
    ];

    fn leaf_paths(cmd: &clap::Command, prefix: Vec<String>, out: &mut Vec<Vec<String>>) {
        let subs: Vec<_> = cmd.get_subcommands().filter(|s| s.get_name() != "help").collect();
        if subs.is_empty() {
            out.push(prefix);
            return;
        }
        for s in subs {
            let mut p = prefix.clone();
            p.push(s.get_name().to_string());
            leaf_paths(s, p, out);
        }
    }

    #[test]
    fn command_tree_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_operation_has_a_subcommand() {
        let mut leaves = Vec::new();
        leaf_paths(&Cli::command(), Vec::new(), &mut leaves);
        for (op, path) in OPERATIONS {
            assert!(leaves.iter().any(|l| l == path), "{op}: no subcommand {path:?}");
        }
        for required in [
            "lexicon prepare",
            "lexicon merge",
            "lexicon oov",
            "g2p train",
            "g2p apply",
            "graph compile-l",
            "graph compile-hcl",
            "graph info",
            "am extract",
            "am train",
            "am posteriors",
            "align run",
            "align ctm",
            "gop score",
            "pipeline run",
            "selftest",
        ] {
            assert!(leaves.iter().any(|l| l.join(" ") == required), "missing {required}");
        }
    }

    #[test]
    fn help_on_every_subcommand() {
        let mut leaves = Vec::new();
        leaf_paths(&Cli::command(), Vec::new(), &mut leaves);
        for leaf in leaves {
            let argv = std::iter::once("gop-forge".to_string())
                .chain(leaf.iter().cloned())
                .chain(["--help".to_string()]);
            let err = Cli::command().try_get_matches_from(argv).unwrap_err();
            assert_eq!(err.kind(), clap::error::ErrorKind::DisplayHelp, "{leaf:?}");
        }
    }
}
