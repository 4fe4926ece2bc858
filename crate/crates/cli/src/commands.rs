use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use gop_forge::acoustic::{
    archive, extract_features, wav, AcousticModel, FeatureConfig, FeatureMatrix, Matrix, PosteriorMatrix,
};
use gop_forge::acoustic::{train_am, TrainConfig};
use gop_forge::align::{
    compile_lexicon_graph, emit_ctm, force_align, format_ctm, read_alignments, restrict_to_transcript,
    write_alignments, CtmLevel,
};
use gop_forge::g2p::{self, G2pConfig, GraphoneModel};
use gop_forge::gop::{export_posterior_map, score_utterance, EntryTransition};
use gop_forge::lexicon::{derive_inventory, find_oov, merge_lexicons, parse_lexicon, tokenize, Lexicon, SpecialWords};
use gop_forge::pipeline::{load_lexicons, parse_manifest, run_batch, ManifestEntry, Mode, PipelineConfig};
use gop_forge::wfst::io as fst_io;
use gop_forge::wfst::{build_l, Fst, LexiconGraphOptions};
use gop_forge::{selftest, synth};

use crate::{AlignCmd, AmCmd, Cli, Command, G2pCmd, GopCmd, GraphCmd, Level, LexiconCmd, ModeArg, PipelineCmd};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, data).with_context(|| format!("cannot write {}", path.display()))
}

fn stdout(text: &str) -> Result<()> {
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".{ext}"));
    PathBuf::from(s)
}

fn write_fst(path: &Path, fst: &Fst) -> Result<()> {
    write(path, fst_io::write_text(fst))?;
    write(&sibling(path, "isyms"), fst_io::write_symbols(fst.isyms()))?;
    write(&sibling(path, "osyms"), fst_io::write_symbols(fst.osyms()))
}

fn read_fst(path: &Path) -> Result<Fst> {
    let isyms = Arc::new(fst_io::read_symbols(&read(&sibling(path, "isyms"))?)?);
    let osyms = Arc::new(fst_io::read_symbols(&read(&sibling(path, "osyms"))?)?);
    Ok(fst_io::read_text(&read(path)?, isyms, osyms)?)
}

fn read_am(path: &Path) -> Result<AcousticModel> {
    AcousticModel::parse(&read(path)?).with_context(|| format!("bad acoustic model {}", path.display()))
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&read(path)?, base)?)
}

fn read_archive(path: &Path) -> Result<Vec<(String, Matrix)>> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(archive::read_any(&bytes)?)
}

fn features_for(entry: &ManifestEntry, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let (samples, sr) = wav::read_wav(&entry.audio).with_context(|| format!("{}", entry.audio.display()))?;
    Ok(extract_features(&samples, sr, cfg)?)
}

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    let features = FeatureConfig {
        seed,
        ..Default::default()
    };
    let specials = SpecialWords::default();
    match &cli.command {
        Command::Lexicon(cmd) => lexicon(cmd, &specials)?,
        Command::G2p(cmd) => g2p_cmd(cmd, &specials)?,
        Command::Graph(cmd) => graph(cmd, &specials)?,
        Command::Am(cmd) => am(cmd, &features, &specials)?,
        Command::Align(cmd) => align(cmd, &features, &specials)?,
        Command::Gop(cmd) => gop(cmd)?,
        Command::Pipeline(cmd) => return pipeline(cmd, cli),
        Command::Selftest => {
            let checks = selftest::run_all(seed);
            let mut out = String::new();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                out.push_str(&format!("{tag} {} ({})\n", c.name, c.detail));
            }
            stdout(&out)?;
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Synth { out } => {
            let ws = synth::prepare_workspace(out, seed).map_err(|e| anyhow!(e))?;
            stdout(&format!(
                "config\t{}\nmanifest\t{}\nrepeat-manifest\t{}\n",
                ws.config.display(),
                ws.manifest.display(),
                ws.repeat_manifest.display()
            ))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn lexicon(cmd: &LexiconCmd, specials: &SpecialWords) -> Result<()> {
    match cmd {
        LexiconCmd::Prepare { lexicons, out } => {
            let lex = load_lexicons(lexicons)?;
            lex.check_specials(specials)?;
            let inv = derive_inventory(&lex, specials);
            lex.validate(&inv)?;
            write(&out.join("lexicon.txt"), lex.serialize())?;
            write(&out.join("silence_phones.txt"), inv.silence_text())?;
            write(&out.join("nonsilence_phones.txt"), inv.nonsilence_text())?;
        }
        LexiconCmd::Merge { base, addition, out } => {
            let merged = merge_lexicons(&parse_lexicon(&read(base)?)?, &parse_lexicon(&read(addition)?)?)?;
            write(out, merged.serialize())?;
        }
        LexiconCmd::Oov { transcript, lexicons } => {
            let lexs: Vec<Lexicon> = lexicons
                .iter()
                .map(|p| Ok(parse_lexicon(&read(p)?)?))
                .collect::<Result<_>>()?;
            let refs: Vec<&Lexicon> = lexs.iter().collect();
            let words: Vec<String> = read(transcript)?.lines().flat_map(tokenize).collect();
            let mut oov = find_oov(&words, &refs);
            oov.words.retain(|w| !specials.contains(w));
            stdout(&oov.serialize())?;
        }
    }
    Ok(())
}

fn g2p_cmd(cmd: &G2pCmd, specials: &SpecialWords) -> Result<()> {
    match cmd {
        G2pCmd::Train {
            lexicons,
            order,
            max_letters,
            max_phones,
            iterations,
            out,
        } => {
            let cfg = G2pConfig {
                order: *order,
                max_letters: *max_letters,
                max_phones: *max_phones,
                max_iterations: *iterations,
                ..Default::default()
            };
            let (model, report) = g2p::train(&load_lexicons(lexicons)?, specials, &cfg)?;
            log::info!(
                "{} EM iterations, discounts {:?}",
                report.log_likelihoods.len(),
                report.discounts
            );
            write(out, model.serialize())?;
        }
        G2pCmd::Apply {
            model,
            words,
            nbest,
            beam,
        } => {
            let model = GraphoneModel::parse(&read(model)?)?;
            let mut out = String::new();
            for w in read(words)?.lines().flat_map(tokenize) {
                for h in g2p::decode(&model, &w, *beam, *nbest)? {
                    out.push_str(&format!("{w}\t{:.4}\t{}\n", h.log_prob, h.pron.join(" ")));
                }
            }
            stdout(&out)?;
        }
    }
    Ok(())
}

fn graph(cmd: &GraphCmd, specials: &SpecialWords) -> Result<()> {
    match cmd {
        GraphCmd::CompileL {
            lexicons,
            no_disambig,
            out,
        } => {
            let lex = load_lexicons(lexicons)?;
            let inv = derive_inventory(&lex, specials);
            let opts = LexiconGraphOptions {
                with_disambig: !no_disambig,
                ..Default::default()
            };
            write_fst(&out.out, &build_l(&lex, &inv, opts)?.fst)?;
        }
        GraphCmd::CompileHcl { lexicons, model, out } => {
            let lex = load_lexicons(lexicons)?;
            let inv = derive_inventory(&lex, specials);
            write_fst(&out.out, &compile_lexicon_graph(&lex, &inv, &read_am(model)?)?)?;
        }
        GraphCmd::Info { fst } => stdout(&fst_io::info(&read_fst(fst)?))?,
    }
    Ok(())
}

/// Each word's first pronunciation, between silences.
fn phone_transcript(words: &[String], lex: &Lexicon, specials: &SpecialWords) -> Result<Vec<String>> {
    let sil = specials.entries()[0].1.to_string();
    let mut phones = vec![sil.clone()];
    for w in words {
        let pron = lex
            .prons(w)
            .next()
            .ok_or_else(|| anyhow!("word {w} is not in the lexicon"))?;
        phones.extend(pron.iter().cloned());
    }
    phones.push(sil);
    Ok(phones)
}

fn am(cmd: &AmCmd, features: &FeatureConfig, specials: &SpecialWords) -> Result<()> {
    match cmd {
        AmCmd::Extract { manifest, out, binary } => {
            let mut entries = Vec::new();
            for m in read_manifest(manifest)? {
                entries.push((m.utt_id.clone(), features_for(&m, features)?.data));
            }
            if *binary {
                write(out, archive::write_binary(&entries))?;
            } else {
                write(out, archive::write_text(&entries))?;
            }
        }
        AmCmd::Train {
            manifest,
            lexicons,
            states,
            gaussians,
            iterations,
            out,
        } => {
            let lex = load_lexicons(lexicons)?;
            let inv = derive_inventory(&lex, specials);
            let mut feats = Vec::new();
            let mut phones = Vec::new();
            for m in read_manifest(manifest)? {
                phones.push(phone_transcript(&m.transcript, &lex, specials).with_context(|| m.utt_id.clone())?);
                feats.push(features_for(&m, features)?);
            }
            let cfg = TrainConfig {
                states_per_phone: *states,
                max_gaussians: *gaussians,
                iterations: *iterations,
                ..Default::default()
            };
            let (model, report) = train_am(&feats, &phones, &inv.phones(), &cfg)?;
            if !report.unseen_senones.is_empty() {
                log::warn!("{} senones received no frames", report.unseen_senones.len());
            }
            write(out, model.serialize())?;
        }
        AmCmd::Posteriors {
            model,
            features: path,
            out,
        } => {
            let am = read_am(model)?;
            let mut entries = Vec::new();
            for (key, data) in read_archive(path)? {
                let p = am.posteriors(&FeatureMatrix::new(data, features))?;
                entries.push((key, p.data));
            }
            write(out, archive::write_text(&entries))?;
        }
    }
    Ok(())
}

fn align(cmd: &AlignCmd, features: &FeatureConfig, specials: &SpecialWords) -> Result<()> {
    match cmd {
        AlignCmd::Run {
            manifest,
            lexicons,
            model,
            beam,
            out,
        } => {
            let lex = load_lexicons(lexicons)?;
            let inv = derive_inventory(&lex, specials);
            let am = read_am(model)?;
            let hcl = compile_lexicon_graph(&lex, &inv, &am)?;
            let mut alignments = Vec::new();
            for m in read_manifest(manifest)? {
                let graph = restrict_to_transcript(&hcl, &m.transcript, &lex).with_context(|| m.utt_id.clone())?;
                let f = features_for(&m, features)?;
                alignments.push(force_align(&m.utt_id, &graph, &f, &am, *beam).with_context(|| m.utt_id.clone())?);
            }
            write(out, write_alignments(&alignments))?;
        }
        AlignCmd::Ctm {
            alignments,
            level,
            frame_shift,
        } => {
            let level = match level {
                Level::Phone => CtmLevel::Phone,
                Level::Word => CtmLevel::Word,
            };
            let mut out = String::new();
            for a in read_alignments(&read(alignments)?)? {
                out.push_str(&format_ctm(&emit_ctm(&a, *frame_shift, level)));
            }
            stdout(&out)?;
        }
    }
    Ok(())
}

fn gop(cmd: &GopCmd) -> Result<()> {
    let GopCmd::Score {
        alignments,
        posteriors,
        model,
        frame_shift,
        skip_entry,
        posterior_map,
    } = cmd;
    let am = read_am(model)?;
    let posts: std::collections::HashMap<String, Matrix> = read_archive(posteriors)?.into_iter().collect();
    let entry = if *skip_entry {
        EntryTransition::Skip
    } else {
        EntryTransition::Uniform
    };
    let mut out = String::new();
    let mut blocks = Vec::new();
    for a in read_alignments(&read(alignments)?)? {
        let data = posts
            .get(&a.utt_id)
            .ok_or_else(|| anyhow!("no posteriors for {}", a.utt_id))?;
        let p = PosteriorMatrix { data: data.clone() };
        let report = score_utterance(&a, &p, &am, *frame_shift, entry).with_context(|| a.utt_id.clone())?;
        out.push_str(&report.format_lines());
        if posterior_map.is_some() {
            blocks.extend(export_posterior_map(&a, &p));
        }
    }
    if let Some(path) = posterior_map {
        write(path, archive::write_text(&blocks))?;
    }
    stdout(&out)
}

fn pipeline(cmd: &PipelineCmd, cli: &Cli) -> Result<ExitCode> {
    let PipelineCmd::Run {
        mode,
        manifest,
        config,
        output,
        strict,
        no_resolve_oov,
    } = cmd;
    let mut cfg = PipelineConfig::load(config)?;
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::Offline => Mode::Offline,
            ModeArg::Online => Mode::Online,
            ModeArg::Hybrid => Mode::Hybrid,
        };
    }
    if let Some(o) = output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.strict |= *strict;
    cfg.resolve_oov &= !*no_resolve_oov;
    let summary = run_batch(&cfg, &read_manifest(manifest)?)?;
    stdout(&summary.serialize())?;
    if cfg.strict && summary.failed() > 0 {
        bail!("{} of {} utterances failed", summary.failed(), summary.utterances);
    }
    Ok(ExitCode::SUCCESS)
}
