//! Minimization of deterministic weighted transducers.
//!
//! Weights are pushed toward the start state first so equivalent suffixes
//! carry identical weights; arcs are then treated as encoded
//! `(ilabel, olabel, weight)` symbols and states are merged by partition
//! refinement.

use std::collections::HashMap;

use super::ops::{connect, distance_to_final};
use super::semiring::{divide, quantize, times};
use super::{Arc, Fst, Label, StateId, Weight, WfstError};

const WEIGHT_DELTA: f64 = 1e-10;

pub fn minimize(fst: &Fst) -> Result<Fst, WfstError> {
    if let Some((state, label)) = fst.first_nondeterminism() {
        return Err(WfstError::NotDeterministic { state, label });
    }
    let trimmed = connect(fst);
    if trimmed.start().is_none() {
        return Ok(trimmed);
    }
    let pushed = push_weights(&trimmed);
    Ok(refine(&pushed))
}

/// Reweights with potentials `d(s) - d(start)`, where `d` is the shortest
/// distance to a final state. Path weights are unchanged and equivalent
/// suffixes end up with identical weights.
pub fn push_weights(fst: &Fst) -> Fst {
    let mut f = connect(fst);
    let Some(start) = f.start() else {
        return f;
    };
    let d = distance_to_final(&f);
    let potential: Vec<Weight> = d.iter().map(|&x| x - d[start]).collect();
    for s in f.states() {
        for a in f.arcs_mut(s) {
            a.weight = divide(times(a.weight, potential[a.nextstate]), potential[s]);
        }
        let fw = f.final_weight(s);
        f.set_final(s, divide(fw, potential[s]));
    }
    f
}

type ArcKey = (Label, Label, i64);

fn refine(f: &Fst) -> Fst {
    let n = f.num_states();
    let final_key: Vec<i64> = f.states().map(|s| quantize(f.final_weight(s), WEIGHT_DELTA)).collect();
    let arc_keys: Vec<Vec<(ArcKey, StateId)>> = f
        .states()
        .map(|s| {
            let mut v: Vec<_> = f
                .arcs(s)
                .iter()
                .map(|a| ((a.ilabel, a.olabel, quantize(a.weight, WEIGHT_DELTA)), a.nextstate))
                .collect();
            v.sort();
            v
        })
        .collect();

    let mut block: Vec<usize> = vec![0; n];
    let mut num_blocks = 0;
    loop {
        let mut sigs: HashMap<(usize, i64, Vec<(ArcKey, usize)>), usize> = HashMap::new();
        let mut next_block = vec![0; n];
        for s in 0..n {
            let sig = (
                block[s],
                final_key[s],
                arc_keys[s].iter().map(|&(k, t)| (k, block[t])).collect::<Vec<_>>(),
            );
            let len = sigs.len();
            next_block[s] = *sigs.entry(sig).or_insert(len);
        }
        let count = sigs.len();
        block = next_block;
        if count == num_blocks {
            break;
        }
        num_blocks = count;
    }

    let start = f.start().unwrap();
    // number blocks by first appearance so the start block is 0
    let mut renumber: HashMap<usize, StateId> = HashMap::new();
    let mut order: Vec<StateId> = Vec::new();
    let mut stack = vec![start];
    let mut seen = vec![false; n];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        if !renumber.contains_key(&block[s]) {
            renumber.insert(block[s], order.len());
            order.push(s);
        }
        for a in f.arcs(s).iter().rev() {
            if !seen[a.nextstate] {
                seen[a.nextstate] = true;
                stack.push(a.nextstate);
            }
        }
    }
    let mut out = f.empty_like();
    for _ in 0..order.len() {
        out.add_state();
    }
    for (i, &rep) in order.iter().enumerate() {
        out.set_final(i, f.final_weight(rep));
        for a in f.arcs(rep) {
            out.add_arc(
                i,
                Arc {
                    nextstate: renumber[&block[a.nextstate]],
                    ..*a
                },
            );
        }
    }
    out.set_start(0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfst::SymbolTable;
    use std::sync::Arc as Shared;

    fn syms() -> Shared<SymbolTable> {
        Shared::new(SymbolTable::from_symbols(["a", "b"]))
    }

    #[test]
    fn equivalent_final_states_merge() {
        let s = syms();
        let mut f = Fst::new(s.clone(), s);
        for _ in 0..3 {
            f.add_state();
        }
        f.set_start(0);
        f.add_arc(0, Arc::new(1, 1, 1.0, 1));
        f.add_arc(0, Arc::new(2, 2, 2.0, 2));
        f.set_final(1, 0.5);
        f.set_final(2, 0.5);
        let m = minimize(&f).unwrap();
        assert_eq!(m.num_states(), 2);
    }

    #[test]
    fn pushing_makes_suffixes_comparable() {
        // two branches that differ only by where the weight sits
        let s = syms();
        let mut f = Fst::new(s.clone(), s);
        for _ in 0..5 {
            f.add_state();
        }
        f.set_start(0);
        f.add_arc(0, Arc::new(1, 1, 0.0, 1));
        f.add_arc(1, Arc::new(1, 1, 3.0, 2));
        f.add_arc(0, Arc::new(2, 2, 3.0, 3));
        f.add_arc(3, Arc::new(1, 1, 0.0, 4));
        f.set_final(2, 0.0);
        f.set_final(4, 0.0);
        let m = minimize(&f).unwrap();
        assert_eq!(m.num_states(), 3);
    }

    #[test]
    fn nondeterministic_input_is_rejected() {
        let s = syms();
        let mut f = Fst::new(s.clone(), s);
        f.add_state();
        f.add_state();
        f.set_start(0);
        f.add_arc(0, Arc::new(1, 1, 0.0, 1));
        f.add_arc(0, Arc::new(1, 2, 0.0, 0));
        assert!(matches!(
            minimize(&f),
            Err(WfstError::NotDeterministic { state: 0, label: 1 })
        ));
    }
}
