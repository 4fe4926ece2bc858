use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::engine::Resolved;
use super::{Counters, ManifestEntry, Mode, Models, Pipeline, PipelineConfig, PipelineError, PipelineOptions};
use crate::acoustic::wav::read_wav;
use crate::acoustic::{archive, AcousticModel, FeatureConfig};
use crate::align::{emit_ctm, format_ctm, CtmLevel};
use crate::g2p::GraphoneModel;
use crate::gop::export_posterior_map;
use crate::lexicon::{merge_lexicons, parse_lexicon, Lexicon};

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mode: Mode,
    pub utterances: usize,
    pub succeeded: usize,
    pub oov_tokens: usize,
    pub unique_oov: usize,
    pub compilations: usize,
    pub recompilations: usize,
    pub cache_hits: usize,
    pub lexicon_entries: usize,
    pub persisted_g2p: usize,
    pub transient_g2p: usize,
    pub stopped_early: bool,
    pub failures: Vec<(String, String)>,
}

impl Summary {
    fn empty(mode: Mode) -> Self {
        Self {
            mode,
            utterances: 0,
            succeeded: 0,
            oov_tokens: 0,
            unique_oov: 0,
            compilations: 0,
            recompilations: 0,
            cache_hits: 0,
            lexicon_entries: 0,
            persisted_g2p: 0,
            transient_g2p: 0,
            stopped_early: false,
            failures: Vec::new(),
        }
    }

    pub fn failed(&self) -> usize {
        self.failures.len()
    }

    /// `key = value` lines, then one `failure = utt: message` per failure.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "mode = {}\nutterances = {}\nsucceeded = {}\nfailed = {}\noov_tokens = {}\nunique_oov = {}\n\
             graph_compilations = {}\nrecompilations = {}\ncache_hits = {}\nlexicon_entries = {}\n\
             persisted_g2p_entries = {}\ntransient_g2p_entries = {}\nstopped_early = {}\n",
            self.mode.as_str(),
            self.utterances,
            self.succeeded,
            self.failed(),
            self.oov_tokens,
            self.unique_oov,
            self.compilations,
            self.recompilations,
            self.cache_hits,
            self.lexicon_entries,
            self.persisted_g2p,
            self.transient_g2p,
            self.stopped_early
        );
        for (u, e) in &self.failures {
            let _ = writeln!(s, "failure = {u}: {}", e.replace('\n', " "));
        }
        s
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

fn model_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Model {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Union of the lookup lexicons.
pub fn load_lexicons(paths: &[impl AsRef<Path>]) -> Result<Lexicon, PipelineError> {
    let mut l0 = Lexicon::default();
    for p in paths {
        l0 = merge_lexicons(&l0, &parse_lexicon(&read(p.as_ref())?)?)?;
    }
    Ok(l0)
}

/// Scores every manifest entry and writes the report tree under
/// `config.output_dir`:
///
/// ```text
/// reports/<utt>.gop  reports/<utt>.phone.ctm  reports/<utt>.word.ctm
/// posteriors/<utt>.ark  gop_vectors.txt  lexicon.txt  summary.txt
/// ```
///
/// Utterance failures are recorded and the batch continues, unless
/// `strict` is set.
pub fn run_batch(config: &PipelineConfig, manifest: &[ManifestEntry]) -> Result<Summary, PipelineError> {
    let l0 = load_lexicons(&config.lexicons)?;
    let am_path = &config.acoustic_model;
    let am = AcousticModel::parse(&read(am_path)?).map_err(|e| model_err(am_path, e))?;
    let g2p = match &config.g2p_model {
        Some(p) => Some(GraphoneModel::parse(&read(p)?).map_err(|e| model_err(p, e))?),
        None => None,
    };
    let out = &config.output_dir;
    for d in [out.clone(), out.join("reports"), out.join("posteriors")] {
        std::fs::create_dir_all(&d).map_err(|e| PipelineError::io(&d, e))?;
    }
    let lexicon_path = out.join("lexicon.txt");
    if manifest.is_empty() {
        let summary = Summary::empty(config.mode);
        write(&out.join("gop_vectors.txt"), "")?;
        write(&lexicon_path, &l0.serialize())?;
        write(&out.join("summary.txt"), &summary.serialize())?;
        return Ok(summary);
    }
    let models = Models {
        am,
        g2p,
        features: FeatureConfig {
            seed: config.seed,
            ..Default::default()
        },
    };
    let options = PipelineOptions {
        beam: config.beam,
        g2p_beam: config.g2p_beam,
        resolve_oov: config.resolve_oov,
        expansion: config.expansion,
        max_lexicon_factor: config.max_lexicon_factor,
        cache_dir: config.cache_dir.clone(),
        persist_path: (config.mode == Mode::Hybrid).then(|| lexicon_path.clone()),
        ..Default::default()
    };
    let mut pipeline = Pipeline::new(config.mode, l0, models, options)?;
    if config.mode == Mode::Offline {
        pipeline.prepare_offline(manifest.iter().map(|m| m.transcript.as_slice()))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let mut summary = Summary::empty(config.mode);
    let mut vectors = String::new();
    let chunk = if config.strict { 1 } else { config.jobs.max(1) * 4 };
    'outer: for batch in manifest.chunks(chunk) {
        let resolved: Vec<Result<Resolved, PipelineError>> = batch
            .iter()
            .map(|m| pipeline.resolve(&m.utt_id, &m.transcript))
            .collect();
        let scored: Vec<_> = pool.install(|| {
            batch
                .par_iter()
                .zip(resolved)
                .map(|(m, r)| {
                    let r = r?;
                    let (samples, sr) = read_wav(&m.audio)?;
                    pipeline.score(&r, &samples, sr)
                })
                .collect()
        });
        for (m, result) in batch.iter().zip(scored) {
            summary.utterances += 1;
            match result {
                Ok(r) => {
                    summary.succeeded += 1;
                    let report = |ext: &str| out.join("reports").join(format!("{}.{ext}", m.utt_id));
                    write(&report("gop"), &r.report.format_lines())?;
                    for (level, ext) in [(CtmLevel::Phone, "phone.ctm"), (CtmLevel::Word, "word.ctm")] {
                        write(&report(ext), &format_ctm(&emit_ctm(&r.alignment, r.frame_shift, level)))?;
                    }
                    let blocks = export_posterior_map(&r.alignment, &r.posteriors);
                    write(
                        &out.join("posteriors").join(format!("{}.ark", m.utt_id)),
                        &archive::write_text(&blocks),
                    )?;
                    vectors.push_str(&r.report.format_vector());
                }
                Err(e) => {
                    log::warn!("{}: {e}", m.utt_id);
                    summary.failures.push((m.utt_id.clone(), e.to_string()));
                    if config.strict {
                        summary.stopped_early = summary.utterances < manifest.len();
                        break 'outer;
                    }
                }
            }
        }
    }
    let c: Counters = pipeline.counters();
    let state = pipeline.state();
    summary.oov_tokens = c.oov_tokens;
    summary.unique_oov = pipeline.unique_oov().len();
    summary.compilations = c.compilations;
    summary.recompilations = c.recompilations();
    summary.cache_hits = c.cache_hits;
    summary.lexicon_entries = state.lexicon.len();
    summary.persisted_g2p = state.persisted_g2p;
    summary.transient_g2p = state.transient_g2p;
    write(&out.join("gop_vectors.txt"), &vectors)?;
    write(&lexicon_path, &state.lexicon.serialize())?;
    write(&out.join("summary.txt"), &summary.serialize())?;
    Ok(summary)
}
