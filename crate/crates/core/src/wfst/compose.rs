//! Composition with the epsilon-sequencing filter.
//!
//! The filter state is 0 until the right machine takes an epsilon move on
//! its own, after which the left machine may not move alone until both
//! match a real label. This admits exactly one interleaving of epsilon
//! moves per pair of paths.

use std::collections::{HashMap, VecDeque};

use super::ops::connect;
use super::semiring::times;
use super::{Arc, Fst, Label, StateId, WfstError, EPS};

pub fn compose(a: &Fst, b: &Fst) -> Result<Fst, WfstError> {
    if a.osyms() != b.isyms() {
        return Err(WfstError::AlphabetMismatch);
    }
    let mut out = Fst::new(a.isyms_shared(), b.osyms_shared());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(out);
    };

    // right-machine arcs indexed by input label
    let index: Vec<HashMap<Label, Vec<usize>>> = b
        .states()
        .map(|s| {
            let mut m: HashMap<Label, Vec<usize>> = HashMap::new();
            for (i, arc) in b.arcs(s).iter().enumerate() {
                m.entry(arc.ilabel).or_default().push(i);
            }
            m
        })
        .collect();

    let mut ids: HashMap<(StateId, StateId, u8), StateId> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut get = |key: (StateId, StateId, u8), out: &mut Fst, queue: &mut VecDeque<_>| {
        *ids.entry(key).or_insert_with(|| {
            queue.push_back(key);
            out.add_state()
        })
    };
    let start = get((sa, sb, 0), &mut out, &mut queue);
    out.set_start(start);

    while let Some((qa, qb, filter)) = queue.pop_front() {
        let src = get((qa, qb, filter), &mut out, &mut queue);
        out.set_final(src, times(a.final_weight(qa), b.final_weight(qb)));

        for arc_a in a.arcs(qa) {
            if arc_a.olabel == EPS {
                if filter == 0 {
                    let dst = get((arc_a.nextstate, qb, 0), &mut out, &mut queue);
                    out.add_arc(src, Arc::new(arc_a.ilabel, EPS, arc_a.weight, dst));
                }
                continue;
            }
            if let Some(matches) = index[qb].get(&arc_a.olabel) {
                for &i in matches {
                    let arc_b = &b.arcs(qb)[i];
                    let dst = get((arc_a.nextstate, arc_b.nextstate, 0), &mut out, &mut queue);
                    out.add_arc(
                        src,
                        Arc::new(arc_a.ilabel, arc_b.olabel, times(arc_a.weight, arc_b.weight), dst),
                    );
                }
            }
        }
        if let Some(eps_moves) = index[qb].get(&EPS) {
            for &i in eps_moves {
                let arc_b = &b.arcs(qb)[i];
                let dst = get((qa, arc_b.nextstate, 1), &mut out, &mut queue);
                out.add_arc(src, Arc::new(EPS, arc_b.olabel, arc_b.weight, dst));
            }
        }
    }
    Ok(connect(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfst::ops::linear_acceptor;
    use crate::wfst::SymbolTable;
    use std::sync::Arc as Shared;

    fn syms() -> Shared<SymbolTable> {
        Shared::new(SymbolTable::from_symbols(["K", "AE", "T"]))
    }

    #[test]
    fn mismatched_alphabets_are_rejected() {
        let a = linear_acceptor(&[1], syms());
        let b = linear_acceptor(&[1], Shared::new(SymbolTable::from_symbols(["x"])));
        assert_eq!(compose(&a, &b).unwrap_err(), WfstError::AlphabetMismatch);
    }

    #[test]
    fn composing_with_empty_machine_is_empty() {
        let a = linear_acceptor(&[1, 2], syms());
        let b = Fst::new(syms(), syms());
        let c = compose(&a, &b).unwrap();
        assert!(c.start().is_none());
        assert_eq!(c.num_states(), 0);
    }

    #[test]
    fn epsilon_interleavings_are_not_duplicated() {
        // a: K:eps then eps-output; b: eps:T then K:K
        let s = syms();
        let mut a = Fst::new(s.clone(), s.clone());
        for _ in 0..2 {
            a.add_state();
        }
        a.set_start(0);
        a.add_arc(0, Arc::new(1, EPS, 1.0, 1));
        a.set_final(1, 0.0);
        let mut b = Fst::new(s.clone(), s);
        for _ in 0..2 {
            b.add_state();
        }
        b.set_start(0);
        b.add_arc(0, Arc::new(EPS, 3, 2.0, 1));
        b.set_final(1, 0.0);
        let c = compose(&a, &b).unwrap();
        // exactly one successful path K:T with weight 3
        let finals: Vec<_> = c.states().filter(|&q| c.is_final(q)).collect();
        assert_eq!(finals.len(), 1);
        assert_eq!(c.num_arcs(), 2);
    }
}
