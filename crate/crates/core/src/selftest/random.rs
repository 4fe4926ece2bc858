//! Random machines for the oracle checks.

use std::sync::Arc as Shared;

use rand::Rng;

use crate::wfst::{Arc, Fst, Label, SymbolTable, EPS};

pub fn input_symbols() -> Shared<SymbolTable> {
    Shared::new(SymbolTable::from_symbols(["a", "b", "c"]))
}

pub fn output_symbols() -> Shared<SymbolTable> {
    Shared::new(SymbolTable::from_symbols(["x", "y", "z"]))
}

/// Weights on a quarter grid so that equal suffixes actually occur.
fn weight<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(0..8) as f64 * 0.25
}

fn label<R: Rng>(rng: &mut R) -> Label {
    rng.gen_range(1..=3)
}

fn with_states<R: Rng>(rng: &mut R, n: usize, isyms: Shared<SymbolTable>, osyms: Shared<SymbolTable>) -> Fst {
    let mut f = Fst::new(isyms, osyms);
    for _ in 0..n {
        f.add_state();
    }
    f.set_start(0);
    for s in 0..n {
        if s + 1 == n || rng.gen_bool(0.35) {
            f.set_final(s, weight(rng));
        }
    }
    f
}

/// General transducer with epsilons on both sides. Epsilon-input arcs only
/// move forward, so there are no epsilon cycles.
pub fn transducer<R: Rng>(rng: &mut R, n: usize, isyms: Shared<SymbolTable>, osyms: Shared<SymbolTable>) -> Fst {
    let mut f = with_states(rng, n, isyms, osyms);
    for s in 0..n {
        for _ in 0..rng.gen_range(1..=3) {
            let t = rng.gen_range(0..n);
            let il = if t > s && rng.gen_bool(0.2) { EPS } else { label(rng) };
            let ol = if rng.gen_bool(0.25) { EPS } else { label(rng) };
            f.add_arc(s, Arc::new(il, ol, weight(rng), t));
        }
    }
    f
}

/// Nondeterministic functional transducer: forward arcs, zero-weight
/// self-loops and outputs fixed by the input label (`c` maps to epsilon).
/// Such machines always satisfy the twins property.
pub fn functional<R: Rng>(rng: &mut R, n: usize) -> Fst {
    let out_of = |l: Label| if l == 3 { EPS } else { l };
    let mut f = with_states(rng, n, input_symbols(), output_symbols());
    for s in 0..n {
        for _ in 0..rng.gen_range(1..=3) {
            if s + 1 < n && rng.gen_bool(0.8) {
                let t = rng.gen_range(s + 1..n);
                let il = if rng.gen_bool(0.15) { EPS } else { label(rng) };
                f.add_arc(s, Arc::new(il, out_of(il), weight(rng), t));
            } else {
                let il = label(rng);
                f.add_arc(s, Arc::new(il, out_of(il), 0.0, s));
            }
        }
    }
    f
}

/// Deterministic transducer with arbitrary cycles.
pub fn deterministic<R: Rng>(rng: &mut R, n: usize) -> Fst {
    let mut f = with_states(rng, n, input_symbols(), output_symbols());
    for s in 0..n {
        for il in 1..=3 {
            if rng.gen_bool(0.5) {
                let ol = if rng.gen_bool(0.3) { EPS } else { label(rng) };
                f.add_arc(s, Arc::new(il, ol, weight(rng), rng.gen_range(0..n)));
            }
        }
    }
    f
}
