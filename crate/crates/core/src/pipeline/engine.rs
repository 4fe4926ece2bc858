use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{Expansion, Mode, PipelineError};
use crate::acoustic::{extract_features, AcousticModel, FeatureConfig, PosteriorMatrix};
use crate::align::{compile_lexicon_graph, force_align, restrict_to_transcript, Alignment, UtteranceGraph};
use crate::g2p::{decode, GraphoneModel};
use crate::gop::{score_utterance, EntryTransition, GopReport};
use crate::lexicon::{
    derive_inventory, find_oov, merge_lexicons, Entry, Lexicon, PhoneInventory, Source, SpecialWords, Vocabulary,
};
use crate::wfst::io::{read_symbols, read_text, write_symbols, write_text};
use crate::wfst::Fst;

pub struct Models {
    pub am: AcousticModel,
    pub g2p: Option<GraphoneModel>,
    pub features: FeatureConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub beam: usize,
    pub g2p_beam: usize,
    pub resolve_oov: bool,
    pub expansion: Expansion,
    pub max_lexicon_factor: usize,
    pub specials: SpecialWords,
    pub cache_dir: Option<PathBuf>,
    /// Hybrid writes the grown lexicon here before scoring.
    pub persist_path: Option<PathBuf>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            beam: crate::align::DEFAULT_BEAM,
            g2p_beam: 64,
            resolve_oov: true,
            expansion: Expansion::Lexicon,
            max_lexicon_factor: 10,
            specials: SpecialWords::default(),
            cache_dir: None,
            persist_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconState {
    pub lexicon: Lexicon,
    pub base_entries: usize,
    pub persisted_g2p: usize,
    /// Cumulative count of entries generated and discarded.
    pub transient_g2p: usize,
    /// Graph cache key of `lexicon`.
    pub key: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Graphs built from a lexicon.
    pub compilations: usize,
    /// Graphs read back from the cache directory.
    pub loads: usize,
    pub cache_hits: usize,
    /// OOV occurrences against the starting lexicon.
    pub oov_tokens: usize,
}

impl Counters {
    /// Graphs obtained after the first one.
    pub fn recompilations(&self) -> usize {
        (self.compilations + self.loads).saturating_sub(1)
    }
}

/// Graph and transcript for one utterance, fixed before scoring.
pub struct Resolved {
    pub utt_id: String,
    pub graph: UtteranceGraph,
    /// Words absent from the starting lexicon.
    pub oov: Vocabulary,
}

#[derive(Debug, Clone)]
pub struct UtteranceResult {
    pub report: GopReport,
    pub alignment: Alignment,
    pub posteriors: PosteriorMatrix,
    pub frame_shift: f64,
    pub oov: Vocabulary,
}

/// One 1-best pronunciation per word, tagged as generated. Every failing
/// word is reported; nothing falls back to the unknown word.
pub fn generate_oov_lexicon(
    oov: &Vocabulary,
    g2p: Option<&GraphoneModel>,
    beam: usize,
    inventory: &PhoneInventory,
) -> Result<Lexicon, PipelineError> {
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for w in oov.iter() {
        let Some(model) = g2p else {
            failures.push((w.to_string(), "no G2P model configured".to_string()));
            continue;
        };
        match decode(model, w, beam, 1) {
            Ok(h) => {
                let pron = &h[0].pron;
                if let Some(p) = pron.iter().find(|p| !inventory.contains(p) || inventory.is_silence(p)) {
                    failures.push((
                        w.to_string(),
                        format!("phone {p} is not a speech phone of the inventory"),
                    ));
                } else if pron.is_empty() {
                    failures.push((w.to_string(), "empty pronunciation".to_string()));
                } else {
                    let mut e = Entry::new(w, &[]);
                    e.pron = pron.clone();
                    e.source = Source::G2p;
                    entries.push(e);
                }
            }
            Err(e) => failures.push((w.to_string(), e.to_string())),
        }
    }
    if failures.is_empty() {
        Ok(Lexicon::from_entries(entries))
    } else {
        Err(PipelineError::G2pFailure(failures))
    }
}

pub struct Pipeline {
    mode: Mode,
    models: Models,
    options: PipelineOptions,
    inventory: PhoneInventory,
    l0: Lexicon,
    state: LexiconState,
    prepared: bool,
    cache: BTreeMap<String, Arc<Fst>>,
    counters: Counters,
    unique_oov: BTreeSet<String>,
}

impl Pipeline {
    /// Online and Hybrid compile the starting graph here; Offline waits
    /// for [`Pipeline::prepare_offline`].
    pub fn new(mode: Mode, l0: Lexicon, models: Models, options: PipelineOptions) -> Result<Self, PipelineError> {
        l0.check_specials(&options.specials)?;
        let inventory = derive_inventory(&l0, &options.specials);
        if models.am.phones != inventory.phones() {
            return Err(PipelineError::ModelMismatch(format!(
                "model phones {} vs lexicon phones {}",
                models.am.phones.join(" "),
                inventory.phones().join(" ")
            )));
        }
        let key = String::new();
        let mut p = Self {
            mode,
            state: LexiconState {
                lexicon: l0.clone(),
                base_entries: l0.len(),
                persisted_g2p: 0,
                transient_g2p: 0,
                key,
            },
            l0,
            models,
            options,
            inventory,
            prepared: false,
            cache: BTreeMap::new(),
            counters: Counters::default(),
            unique_oov: BTreeSet::new(),
        };
        p.state.key = p.cache_key(&p.state.lexicon);
        if mode != Mode::Offline {
            p.graph_for(&p.state.lexicon.clone())?;
        }
        Ok(p)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn l0(&self) -> &Lexicon {
        &self.l0
    }

    pub fn state(&self) -> &LexiconState {
        &self.state
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn unique_oov(&self) -> &BTreeSet<String> {
        &self.unique_oov
    }

    pub fn inventory(&self) -> &PhoneInventory {
        &self.inventory
    }

    fn cache_key(&self, lexicon: &Lexicon) -> String {
        let mut h = Sha256::new();
        h.update(lexicon.serialize().as_bytes());
        h.update(b"\n");
        h.update(self.models.am.version().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn compile(&mut self, lexicon: &Lexicon) -> Result<Fst, PipelineError> {
        log::info!("compiling graph for {} entries", lexicon.len());
        self.counters.compilations += 1;
        Ok(compile_lexicon_graph(lexicon, &self.inventory, &self.models.am)?)
    }

    fn load_cached(dir: &Path, key: &str) -> Option<Fst> {
        let read = |ext: &str| std::fs::read_to_string(dir.join(format!("{key}.{ext}"))).ok();
        let isyms = Arc::new(read_symbols(&read("isyms")?).ok()?);
        let osyms = Arc::new(read_symbols(&read("osyms")?).ok()?);
        read_text(&read("fst")?, isyms, osyms).ok()
    }

    fn store_cached(dir: &Path, key: &str, fst: &Fst) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        for (ext, text) in [
            ("isyms", write_symbols(fst.isyms())),
            ("osyms", write_symbols(fst.osyms())),
            ("fst", write_text(fst)),
        ] {
            let path = dir.join(format!("{key}.{ext}"));
            std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
        }
        Ok(())
    }

    /// Lexicon graph through the in-memory cache, then the cache directory.
    fn graph_for(&mut self, lexicon: &Lexicon) -> Result<Arc<Fst>, PipelineError> {
        let key = self.cache_key(lexicon);
        if let Some(g) = self.cache.get(&key) {
            self.counters.cache_hits += 1;
            return Ok(g.clone());
        }
        let dir = self.options.cache_dir.clone();
        let fst = match dir.as_deref().and_then(|d| Self::load_cached(d, &key)) {
            Some(f) => {
                self.counters.loads += 1;
                f
            }
            None => {
                let f = self.compile(lexicon)?;
                if let Some(d) = &dir {
                    Self::store_cached(d, &key, &f)?;
                }
                f
            }
        };
        let g = Arc::new(fst);
        self.cache.insert(key, g.clone());
        Ok(g)
    }

    fn check_growth(&self, lexicon: &Lexicon) -> Result<(), PipelineError> {
        let limit = self.options.max_lexicon_factor.saturating_mul(self.l0.len());
        if lexicon.len() > limit {
            return Err(PipelineError::LexiconTooLarge {
                entries: lexicon.len(),
                limit,
            });
        }
        Ok(())
    }

    fn generate(&self, oov: &Vocabulary) -> Result<Lexicon, PipelineError> {
        generate_oov_lexicon(oov, self.models.g2p.as_ref(), self.options.g2p_beam, &self.inventory)
    }

    /// Builds `L_Offline` from every transcript of the corpus and compiles
    /// its graph once.
    pub fn prepare_offline<'a>(
        &mut self,
        transcripts: impl IntoIterator<Item = &'a [String]>,
    ) -> Result<(), PipelineError> {
        let words: Vec<String> = transcripts.into_iter().flatten().cloned().collect();
        let mut oov = find_oov(&words, &[&self.l0]);
        oov.words.retain(|w| !self.options.specials.contains(w));
        let lexicon = if self.options.resolve_oov && !oov.is_empty() {
            let merged = merge_lexicons(&self.l0, &self.generate(&oov)?)?;
            self.check_growth(&merged)?;
            merged
        } else {
            self.l0.clone()
        };
        self.state.persisted_g2p = lexicon.len() - self.l0.len();
        self.state.key = self.cache_key(&lexicon);
        self.state.lexicon = lexicon.clone();
        self.graph_for(&lexicon)?;
        self.prepared = true;
        Ok(())
    }

    /// Online lexicon for one utterance.
    fn transient_lexicon(&self, transcript: &[String], generated: &Lexicon) -> Result<Lexicon, PipelineError> {
        Ok(match self.options.expansion {
            Expansion::Lexicon => merge_lexicons(&self.l0, generated)?,
            Expansion::Vocabulary => {
                let mut vocab = self.l0.words();
                vocab.words.extend(transcript.iter().cloned());
                let known = self.l0.restrict(vocab.iter());
                let fresh = generated.restrict(vocab.iter().filter(|w| !self.l0.contains_word(w)));
                merge_lexicons(&known, &fresh)?
            }
        })
    }

    /// Lexicon work for one utterance: OOV lookup, expansion and graph.
    pub fn resolve(&mut self, utt_id: &str, transcript: &[String]) -> Result<Resolved, PipelineError> {
        let specials = self.options.specials.clone();
        let mut oov0 = find_oov(transcript, &[&self.l0]);
        oov0.words.retain(|w| !specials.contains(w));
        self.counters.oov_tokens += transcript.iter().filter(|w| oov0.contains(w)).count();
        self.unique_oov.extend(oov0.words.iter().cloned());

        let mut oov = find_oov(transcript, &[&self.state.lexicon]);
        oov.words.retain(|w| !specials.contains(w));
        let align_err = |source| PipelineError::Align {
            utt: utt_id.to_string(),
            source,
        };

        if !self.options.resolve_oov {
            let words: Vec<String> = transcript
                .iter()
                .map(|w| {
                    if oov.contains(w) {
                        specials.unknown.clone()
                    } else {
                        w.clone()
                    }
                })
                .collect();
            if self.mode == Mode::Offline && !self.prepared {
                return Err(PipelineError::NotPrepared);
            }
            let lexicon = self.state.lexicon.clone();
            let hcl = self.graph_for(&lexicon)?;
            let graph = restrict_to_transcript(&hcl, &words, &lexicon).map_err(align_err)?;
            return Ok(Resolved {
                utt_id: utt_id.to_string(),
                graph,
                oov: oov0,
            });
        }

        let (lexicon, hcl) = match self.mode {
            Mode::Offline => {
                if !self.prepared {
                    return Err(PipelineError::NotPrepared);
                }
                if !oov.is_empty() {
                    return Err(PipelineError::OovAtRuntime {
                        utt: utt_id.to_string(),
                        words: oov.words.into_iter().collect(),
                    });
                }
                let lexicon = self.state.lexicon.clone();
                let hcl = self.graph_for(&lexicon)?;
                (lexicon, hcl)
            }
            Mode::Online if oov.is_empty() => {
                let lexicon = self.l0.clone();
                let hcl = self.graph_for(&lexicon)?;
                (lexicon, hcl)
            }
            Mode::Online => {
                let generated = self.generate(&oov)?;
                let lexicon = self.transient_lexicon(transcript, &generated)?;
                self.check_growth(&lexicon)?;
                self.state.transient_g2p += generated.len();
                // discarded after this utterance, so never cached
                let hcl = Arc::new(self.compile(&lexicon)?);
                (lexicon, hcl)
            }
            Mode::Hybrid => {
                if !oov.is_empty() {
                    let generated = self.generate(&oov)?;
                    let merged = merge_lexicons(&self.state.lexicon, &generated)?;
                    self.check_growth(&merged)?;
                    if let Some(path) = &self.options.persist_path {
                        std::fs::write(path, merged.serialize()).map_err(|e| PipelineError::io(path, e))?;
                    }
                    self.state.persisted_g2p += merged.len() - self.state.lexicon.len();
                    self.state.key = self.cache_key(&merged);
                    self.state.lexicon = merged;
                }
                let lexicon = self.state.lexicon.clone();
                let hcl = self.graph_for(&lexicon)?;
                (lexicon, hcl)
            }
        };
        let graph = restrict_to_transcript(&hcl, transcript, &lexicon).map_err(align_err)?;
        Ok(Resolved {
            utt_id: utt_id.to_string(),
            graph,
            oov: oov0,
        })
    }

    /// Features, posteriors, alignment and GoP; touches no shared state.
    pub fn score(
        &self,
        resolved: &Resolved,
        samples: &[f64],
        sample_rate: u32,
    ) -> Result<UtteranceResult, PipelineError> {
        let utt = resolved.utt_id.clone();
        let features = extract_features(samples, sample_rate, &self.models.features)?;
        let posteriors = self.models.am.posteriors(&features)?;
        let alignment =
            force_align(&utt, &resolved.graph, &features, &self.models.am, self.options.beam).map_err(|source| {
                PipelineError::Align {
                    utt: utt.clone(),
                    source,
                }
            })?;
        let report = score_utterance(
            &alignment,
            &posteriors,
            &self.models.am,
            features.frame_shift,
            EntryTransition::Uniform,
        )
        .map_err(|source| PipelineError::Gop { utt, source })?;
        Ok(UtteranceResult {
            report,
            alignment,
            posteriors,
            frame_shift: features.frame_shift,
            oov: resolved.oov.clone(),
        })
    }

    pub fn run_utterance(
        &mut self,
        utt_id: &str,
        transcript: &[String],
        samples: &[f64],
        sample_rate: u32,
    ) -> Result<UtteranceResult, PipelineError> {
        let r = self.resolve(utt_id, transcript)?;
        self.score(&r, samples, sample_rate)
    }
}
