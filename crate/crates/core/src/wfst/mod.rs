//! Weighted finite-state transducers over the tropical semiring.
//!
//! [`Fst`] is a mutable vector-of-states representation with input and
//! output symbol tables (label 0 is always epsilon). The optimization
//! operations live in [`compose`], [`determinize`] and [`minimize`]; the
//! lexicon, context and HMM graph builders in [`builders`]; and the
//! time-synchronous decoder in [`search`].

pub mod builders;
pub mod compose;
pub mod determinize;
pub mod io;
pub mod minimize;
pub mod ops;
pub mod search;
pub mod semiring;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc as Shared;

use thiserror::Error;

pub use builders::{build_c, build_h, build_l, compile_hcl, HmmTopologyView, LexiconGraph, LexiconGraphOptions};
pub use compose::compose;
pub use determinize::{determinize, determinize_with_limits, DeterminizeLimits};
pub use minimize::minimize;
pub use search::{shortest_path_beam, BestPath, FrameStep};
pub use semiring::{Weight, ONE, ZERO};

pub type Label = u32;
pub type StateId = usize;

pub const EPS: Label = 0;
pub const EPS_SYMBOL: &str = "<eps>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WfstError {
    #[error("output alphabet of the left machine does not match the input alphabet of the right machine")]
    AlphabetMismatch,
    #[error("machine is not functional or not determinizable: {0}")]
    NonFunctional(String),
    #[error("machine is not deterministic: state {state} has several arcs with input label {label}")]
    NotDeterministic { state: StateId, label: Label },
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("no hypothesis survived the beam at frame {frame}; try doubling the beam (currently {beam})")]
    BeamCollapse { frame: usize, beam: usize },
    #[error("frame scores do not cover input label {0}")]
    LabelOutOfRange(Label),
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Bidirectional label ↔ symbol map; id 0 is `<eps>`.
#[derive(Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    ids: HashMap<String, Label>,
}

impl fmt::Debug for SymbolTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolTable({} symbols)", self.symbols.len())
    }
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut t = Self {
            symbols: Vec::new(),
            ids: HashMap::new(),
        };
        t.add(EPS_SYMBOL);
        t
    }

    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut t = Self::new();
        for s in symbols {
            t.add(s.as_ref());
        }
        t
    }

    /// Adds `symbol` if missing and returns its label.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.ids.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as Label;
        self.symbols.push(symbol.to_string());
        self.ids.insert(symbol.to_string(), id);
        id
    }

    pub fn find(&self, symbol: &str) -> Option<Label> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, label: Label) -> Option<&str> {
        self.symbols.get(label as usize).map(String::as_str)
    }

    /// Number of symbols including epsilon.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }

    /// `(symbol, label)` pairs in label order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.symbols.iter().enumerate().map(|(i, s)| (s.as_str(), i as Label))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: Weight,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: Weight, nextstate: StateId) -> Self {
        Self {
            ilabel,
            olabel,
            weight,
            nextstate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct State {
    arcs: Vec<Arc>,
    final_weight: Weight,
}

/// A weighted transducer. A machine without a start state is empty.
#[derive(Debug, Clone)]
pub struct Fst {
    states: Vec<State>,
    start: Option<StateId>,
    isyms: Shared<SymbolTable>,
    osyms: Shared<SymbolTable>,
}

impl Fst {
    pub fn new(isyms: Shared<SymbolTable>, osyms: Shared<SymbolTable>) -> Self {
        Self {
            states: Vec::new(),
            start: None,
            isyms,
            osyms,
        }
    }

    /// Empty machine sharing the symbol tables of `self`.
    pub fn empty_like(&self) -> Self {
        Self::new(self.isyms.clone(), self.osyms.clone())
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(State {
            arcs: Vec::new(),
            final_weight: ZERO,
        });
        self.states.len() - 1
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!(s < self.states.len(), "start state {s} does not exist");
        self.start = Some(s);
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn set_final(&mut self, s: StateId, w: Weight) {
        self.states[s].final_weight = w;
    }

    pub fn final_weight(&self, s: StateId) -> Weight {
        self.states[s].final_weight
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.states[s].final_weight != ZERO
    }

    pub fn add_arc(&mut self, s: StateId, arc: Arc) {
        debug_assert!(!arc.weight.is_nan());
        self.states[s].arcs.push(arc);
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.states[s].arcs
    }

    pub fn arcs_mut(&mut self, s: StateId) -> &mut Vec<Arc> {
        &mut self.states[s].arcs
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|s| s.arcs.len()).sum()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.states.len()
    }

    pub fn isyms(&self) -> &SymbolTable {
        &self.isyms
    }

    pub fn osyms(&self) -> &SymbolTable {
        &self.osyms
    }

    pub fn isyms_shared(&self) -> Shared<SymbolTable> {
        self.isyms.clone()
    }

    pub fn osyms_shared(&self) -> Shared<SymbolTable> {
        self.osyms.clone()
    }

    pub fn set_isyms(&mut self, syms: Shared<SymbolTable>) {
        self.isyms = syms;
    }

    pub fn set_osyms(&mut self, syms: Shared<SymbolTable>) {
        self.osyms = syms;
    }

    /// At most one arc per `(state, ilabel)`, epsilon included.
    pub fn is_deterministic(&self) -> bool {
        self.first_nondeterminism().is_none()
    }

    pub(crate) fn first_nondeterminism(&self) -> Option<(StateId, Label)> {
        for s in self.states() {
            let mut labels: Vec<Label> = self.arcs(s).iter().map(|a| a.ilabel).collect();
            labels.sort_unstable();
            if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
                return Some((s, w[0]));
            }
        }
        None
    }

    /// Checks structural invariants: start and arc endpoints exist, labels
    /// are in the symbol tables and weights are not NaN.
    pub fn check(&self) -> Result<(), WfstError> {
        if let Some(s) = self.start {
            if s >= self.states.len() {
                return Err(WfstError::Invalid(format!("start state {s} out of range")));
            }
        }
        for (i, st) in self.states.iter().enumerate() {
            if st.final_weight.is_nan() {
                return Err(WfstError::Invalid(format!("state {i} has a NaN final weight")));
            }
            for a in &st.arcs {
                if a.nextstate >= self.states.len() {
                    return Err(WfstError::Invalid(format!(
                        "arc from {i} targets missing state {}",
                        a.nextstate
                    )));
                }
                if a.weight.is_nan() {
                    return Err(WfstError::Invalid(format!("arc from {i} has a NaN weight")));
                }
                if a.ilabel as usize >= self.isyms.len() || a.olabel as usize >= self.osyms.len() {
                    return Err(WfstError::Invalid(format!(
                        "arc from {i} uses a label missing from the symbol tables"
                    )));
                }
            }
        }
        Ok(())
    }
}
