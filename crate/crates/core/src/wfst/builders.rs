//! Lexicon (L), context (C) and HMM (H) transducers and the HCL cascade.
//!
//! Symbol layout shared by all builders: the phone table is `<eps>`, the
//! inventory phones (silence first), then the disambiguation symbols
//! `#0..#n-1`. The senone table is `<eps>`, one `PHONE_k` symbol per HMM
//! state in model order, then the same disambiguation symbols. Senone `i`
//! therefore has label `i + 1`.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc as Shared;

use super::ops::{relabel_input_to_eps, remove_input_arcs, rm_epsilon};
use super::{compose, determinize, minimize, Arc, Fst, Label, SymbolTable, WfstError, EPS};
use crate::lexicon::{Lexicon, PhoneInventory, SIL_PHONE};

/// What the H builder needs from an acoustic model.
pub trait HmmTopologyView {
    fn phones(&self) -> &[String];
    fn states_per_phone(&self) -> usize;
    /// Self-loop probability of senone `senone`; the forward probability is
    /// its complement.
    fn self_loop_prob(&self, senone: usize) -> f64;

    fn num_senones(&self) -> usize {
        self.phones().len() * self.states_per_phone()
    }
}

pub fn disambig_symbol(i: usize) -> String {
    format!("#{i}")
}

pub fn is_disambig_symbol(s: &str) -> bool {
    s.len() > 1 && s.starts_with('#') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

pub fn phone_symbols(phones: &[String], num_disambig: usize) -> SymbolTable {
    let mut t = SymbolTable::from_symbols(phones);
    for i in 0..num_disambig {
        t.add(&disambig_symbol(i));
    }
    t
}

pub fn senone_symbol(phone: &str, state: usize) -> String {
    format!("{phone}_{state}")
}

pub fn senone_symbols(topo: &dyn HmmTopologyView, num_disambig: usize) -> SymbolTable {
    let mut t = SymbolTable::new();
    for p in topo.phones() {
        for k in 0..topo.states_per_phone() {
            t.add(&senone_symbol(p, k));
        }
    }
    for i in 0..num_disambig {
        t.add(&disambig_symbol(i));
    }
    t
}

/// Labels of every `#k` symbol in `syms`.
pub fn disambig_labels(syms: &SymbolTable) -> Vec<Label> {
    syms.iter()
        .filter(|(s, _)| is_disambig_symbol(s))
        .map(|(_, l)| l)
        .collect()
}

fn cost(p: f64) -> f64 {
    -p.ln()
}

#[derive(Debug, Clone, Copy)]
pub struct LexiconGraphOptions {
    pub with_disambig: bool,
    /// Probability of optional silence after each word and at the start.
    pub silence_prob: f64,
}

impl Default for LexiconGraphOptions {
    fn default() -> Self {
        Self {
            with_disambig: true,
            silence_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LexiconGraph {
    pub fst: Fst,
    /// Number of `#k` symbols in the phone table, `#0` included.
    pub num_disambig: usize,
}

impl LexiconGraph {
    pub fn phone_syms(&self) -> &SymbolTable {
        self.fst.isyms()
    }

    pub fn word_syms(&self) -> &SymbolTable {
        self.fst.osyms()
    }
}

/// Assigns `#1, #2, ...` to homophones and `#1` to pronunciations that are a
/// proper prefix of another one; returns per-entry indices (0 = none).
fn assign_disambig(lexicon: &Lexicon) -> Vec<usize> {
    let mut groups: BTreeMap<&[String], usize> = BTreeMap::new();
    for e in lexicon.entries() {
        *groups.entry(&e.pron).or_default() += 1;
    }
    let prefixes: HashSet<&[String]> = lexicon
        .entries()
        .iter()
        .flat_map(|e| (1..e.pron.len()).map(move |n| &e.pron[..n]))
        .collect();
    let mut seen: BTreeMap<&[String], usize> = BTreeMap::new();
    lexicon
        .entries()
        .iter()
        .map(|e| {
            let pron = e.pron.as_slice();
            if groups[pron] > 1 {
                let k = seen.entry(pron).or_default();
                *k += 1;
                *k
            } else if prefixes.contains(pron) {
                1
            } else {
                0
            }
        })
        .collect()
}

/// Lexicon transducer from phone sequences to words with optional silence
/// between words and at the start.
pub fn build_l(
    lexicon: &Lexicon,
    inventory: &PhoneInventory,
    opts: LexiconGraphOptions,
) -> Result<LexiconGraph, WfstError> {
    if lexicon.is_empty() {
        return Err(WfstError::EmptyLexicon);
    }
    lexicon
        .validate(inventory)
        .map_err(|e| WfstError::Invalid(e.to_string()))?;
    let phones = inventory.phones();
    let disambig = if opts.with_disambig {
        assign_disambig(lexicon)
    } else {
        vec![0; lexicon.len()]
    };
    let max_k = disambig.iter().copied().max().unwrap_or(0);
    // #0, #1..#max_k, then one for optional silence
    let num_disambig = if opts.with_disambig { max_k + 2 } else { 0 };
    let sil_disambig = num_disambig.checked_sub(1);

    let isyms = phone_symbols(&phones, num_disambig);
    let mut osyms = SymbolTable::new();
    for e in lexicon.entries() {
        osyms.add(&e.word);
    }
    if opts.with_disambig {
        osyms.add(&disambig_symbol(0));
    }
    let sil = isyms
        .find(SIL_PHONE)
        .ok_or_else(|| WfstError::Invalid(format!("inventory lacks the {SIL_PHONE} phone")))?;
    let sil_cost = cost(opts.silence_prob);
    let nosil_cost = cost(1.0 - opts.silence_prob);

    let mut fst = Fst::new(Shared::new(isyms.clone()), Shared::new(osyms.clone()));
    let start = fst.add_state();
    let word_loop = fst.add_state();
    let sil_state = fst.add_state();
    fst.set_start(start);
    fst.set_final(start, 0.0);
    fst.set_final(word_loop, 0.0);
    let after_sil = match sil_disambig {
        Some(k) => {
            let s = fst.add_state();
            let label = isyms.find(&disambig_symbol(k)).unwrap();
            fst.add_arc(s, Arc::new(label, EPS, 0.0, word_loop));
            s
        }
        None => word_loop,
    };
    fst.add_arc(start, Arc::new(sil, EPS, sil_cost, after_sil));
    fst.add_arc(sil_state, Arc::new(sil, EPS, 0.0, after_sil));

    for (entry, &k) in lexicon.entries().iter().zip(&disambig) {
        let word = osyms.find(&entry.word).unwrap();
        let mut labels: Vec<Label> = entry.pron.iter().map(|p| isyms.find(p).unwrap()).collect();
        if k > 0 {
            labels.push(isyms.find(&disambig_symbol(k)).unwrap());
        }
        let m = labels.len();
        let chain: Vec<_> = (0..m - 1).map(|_| fst.add_state()).collect();
        for (origin, extra) in [(start, nosil_cost), (word_loop, 0.0)] {
            if m == 1 {
                fst.add_arc(origin, Arc::new(labels[0], word, extra + nosil_cost, word_loop));
                fst.add_arc(origin, Arc::new(labels[0], word, extra + sil_cost, sil_state));
            } else {
                fst.add_arc(origin, Arc::new(labels[0], word, extra, chain[0]));
            }
        }
        for i in 1..m {
            let from = chain[i - 1];
            if i + 1 < m {
                fst.add_arc(from, Arc::new(labels[i], EPS, 0.0, chain[i]));
            } else {
                fst.add_arc(from, Arc::new(labels[i], EPS, nosil_cost, word_loop));
                fst.add_arc(from, Arc::new(labels[i], EPS, sil_cost, sil_state));
            }
        }
    }
    if opts.with_disambig {
        let d0 = isyms.find(&disambig_symbol(0)).unwrap();
        let w0 = osyms.find(&disambig_symbol(0)).unwrap();
        fst.add_arc(word_loop, Arc::new(d0, w0, 0.0, word_loop));
    }
    Ok(LexiconGraph { fst, num_disambig })
}

/// Context transducer. With monophone models this is the identity over the
/// phone table, disambiguation symbols included.
pub fn build_c(inventory: &PhoneInventory, num_disambig: usize) -> Fst {
    let syms = Shared::new(phone_symbols(&inventory.phones(), num_disambig));
    let mut fst = Fst::new(syms.clone(), syms.clone());
    let s = fst.add_state();
    fst.set_start(s);
    fst.set_final(s, 0.0);
    for (_, l) in syms.iter().skip(1) {
        fst.add_arc(s, Arc::new(l, l, 0.0, s));
    }
    fst
}

/// HMM transducer from senone sequences to phones. Each phone is a
/// left-to-right chain whose first arc emits the phone; the last state of
/// every phone can move on to any phone's first state or end. Self-loops
/// are added after the forward structure.
pub fn build_h(topo: &dyn HmmTopologyView, num_disambig: usize, with_self_loops: bool) -> Fst {
    let phones = topo.phones();
    let k = topo.states_per_phone();
    let isyms = senone_symbols(topo, num_disambig);
    let osyms = phone_symbols(phones, num_disambig);
    let disambig: Vec<Label> = (0..num_disambig)
        .map(|i| isyms.find(&disambig_symbol(i)).unwrap())
        .collect();
    let disambig_out: Vec<Label> = (0..num_disambig)
        .map(|i| osyms.find(&disambig_symbol(i)).unwrap())
        .collect();
    let mut fst = Fst::new(Shared::new(isyms), Shared::new(osyms));
    let hub = fst.add_state();
    fst.set_start(hub);
    fst.set_final(hub, 0.0);
    // states[p][j]: inside state j of phone p
    let states: Vec<Vec<usize>> = (0..phones.len())
        .map(|_| (0..k).map(|_| fst.add_state()).collect())
        .collect();
    let senone = |p: usize, j: usize| p * k + j;
    let forward_cost = |s: usize| cost(1.0 - topo.self_loop_prob(s));

    let mut exits = vec![(hub, 0.0)];
    for p in 0..phones.len() {
        let last = senone(p, k - 1);
        exits.push((states[p][k - 1], forward_cost(last)));
        fst.set_final(states[p][k - 1], forward_cost(last));
    }
    for &(from, w) in &exits {
        for p in 0..phones.len() {
            let out = (p + 1) as Label;
            fst.add_arc(from, Arc::new(senone(p, 0) as Label + 1, out, w, states[p][0]));
        }
        for (&d, &dout) in disambig.iter().zip(&disambig_out) {
            fst.add_arc(from, Arc::new(d, dout, 0.0, from));
        }
    }
    for p in 0..phones.len() {
        for j in 1..k {
            let s = senone(p, j);
            fst.add_arc(
                states[p][j - 1],
                Arc::new(s as Label + 1, EPS, forward_cost(senone(p, j - 1)), states[p][j]),
            );
        }
    }
    if with_self_loops {
        for p in 0..phones.len() {
            for j in 0..k {
                let s = senone(p, j);
                fst.add_arc(
                    states[p][j],
                    Arc::new(s as Label + 1, EPS, cost(topo.self_loop_prob(s)), states[p][j]),
                );
            }
        }
    }
    fst
}

/// `min(det(H ∘ min(det(C ∘ L))))`, then disambiguation symbols are mapped
/// to epsilon and removed. The `#0` grammar loop of L is dropped first since
/// no grammar is composed.
pub fn compile_hcl(h: &Fst, c: &Fst, l: &LexiconGraph) -> Result<Fst, WfstError> {
    let mut lex = l.fst.clone();
    if let Some(d0) = lex.isyms().find(&disambig_symbol(0)) {
        remove_input_arcs(&mut lex, &[d0]);
    }
    let cl = minimize(&determinize(&compose(c, &lex)?)?)?;
    let hcl = minimize(&determinize(&compose(h, &cl)?)?)?;
    let mut hcl = hcl;
    let labels = disambig_labels(hcl.isyms());
    relabel_input_to_eps(&mut hcl, &labels);
    Ok(rm_epsilon(&hcl))
}
