//! Weighted determinization of functional transducers.
//!
//! Subset states hold `(state, residual output, residual weight)` triples.
//! Each output arc carries the minimum weight of its candidates and at most
//! one output label, the first label shared by every candidate residual.
//! Residual outputs left at a final subset are emitted on a chain of
//! epsilon-input arcs. A machine that is not functional makes residuals or
//! the subset count grow without bound; both are capped and reported as
//! [`WfstError::NonFunctional`].

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::semiring::{quantize, times, ZERO};
use super::{Arc, Fst, Label, StateId, Weight, WfstError, EPS};

#[derive(Debug, Clone, Copy)]
pub struct DeterminizeLimits {
    pub max_states: usize,
    pub max_residual: usize,
}

impl Default for DeterminizeLimits {
    fn default() -> Self {
        Self {
            max_states: 500_000,
            max_residual: 32,
        }
    }
}

const WEIGHT_DELTA: f64 = 1e-10;

#[derive(Debug, Clone)]
struct Element {
    state: StateId,
    residual: Vec<Label>,
    weight: Weight,
}

type SubsetKey = Vec<(StateId, Vec<Label>, i64)>;

fn key_of(subset: &[Element]) -> SubsetKey {
    subset
        .iter()
        .map(|e| (e.state, e.residual.clone(), quantize(e.weight, WEIGHT_DELTA)))
        .collect()
}

pub fn determinize(fst: &Fst) -> Result<Fst, WfstError> {
    determinize_with_limits(fst, DeterminizeLimits::default())
}

pub fn determinize_with_limits(fst: &Fst, limits: DeterminizeLimits) -> Result<Fst, WfstError> {
    let mut out = fst.empty_like();
    let Some(start) = fst.start() else {
        return Ok(out);
    };
    let mut ids: HashMap<SubsetKey, StateId> = HashMap::new();
    let mut queue: VecDeque<(StateId, Vec<Element>)> = VecDeque::new();

    let initial = closure(
        fst,
        vec![Element {
            state: start,
            residual: Vec::new(),
            weight: 0.0,
        }],
        limits,
    )?;
    let s0 = out.add_state();
    out.set_start(s0);
    ids.insert(key_of(&initial), s0);
    queue.push_back((s0, initial));

    while let Some((src, subset)) = queue.pop_front() {
        emit_final(fst, &mut out, src, &subset)?;

        let mut by_label: BTreeMap<Label, Vec<Element>> = BTreeMap::new();
        for e in &subset {
            for a in fst.arcs(e.state) {
                if a.ilabel == EPS {
                    continue;
                }
                let mut residual = e.residual.clone();
                if a.olabel != EPS {
                    residual.push(a.olabel);
                }
                by_label.entry(a.ilabel).or_default().push(Element {
                    state: a.nextstate,
                    residual,
                    weight: times(e.weight, a.weight),
                });
            }
        }

        for (label, candidates) in by_label {
            let mut next = closure(fst, candidates, limits)?;
            let w = next.iter().map(|e| e.weight).fold(ZERO, f64::min);
            let first = next[0].residual.first().copied();
            let shared = first.filter(|l| next.iter().all(|e| e.residual.first() == Some(l)));
            for e in &mut next {
                e.weight -= w;
                if shared.is_some() {
                    e.residual.remove(0);
                }
            }
            let key = key_of(&next);
            let dst = match ids.get(&key) {
                Some(&d) => d,
                None => {
                    if out.num_states() >= limits.max_states {
                        return Err(WfstError::NonFunctional(format!(
                            "determinization exceeded {} states",
                            limits.max_states
                        )));
                    }
                    let d = out.add_state();
                    ids.insert(key, d);
                    queue.push_back((d, next));
                    d
                }
            };
            out.add_arc(src, Arc::new(label, shared.unwrap_or(EPS), w, dst));
        }
    }
    Ok(out)
}

/// Epsilon-input closure, merging duplicates of `(state, residual)` by min
/// weight. The result is sorted by `(state, residual)`.
fn closure(fst: &Fst, seeds: Vec<Element>, limits: DeterminizeLimits) -> Result<Vec<Element>, WfstError> {
    let mut best: BTreeMap<(StateId, Vec<Label>), Weight> = BTreeMap::new();
    let mut queue: VecDeque<Element> = VecDeque::new();
    for e in seeds {
        push(&mut best, &mut queue, e, limits)?;
    }
    while let Some(e) = queue.pop_front() {
        if best[&(e.state, e.residual.clone())] < e.weight {
            continue;
        }
        for a in fst.arcs(e.state) {
            if a.ilabel != EPS {
                continue;
            }
            let mut residual = e.residual.clone();
            if a.olabel != EPS {
                residual.push(a.olabel);
            }
            push(
                &mut best,
                &mut queue,
                Element {
                    state: a.nextstate,
                    residual,
                    weight: times(e.weight, a.weight),
                },
                limits,
            )?;
        }
    }
    Ok(best
        .into_iter()
        .map(|((state, residual), weight)| Element {
            state,
            residual,
            weight,
        })
        .collect())
}

fn push(
    best: &mut BTreeMap<(StateId, Vec<Label>), Weight>,
    queue: &mut VecDeque<Element>,
    e: Element,
    limits: DeterminizeLimits,
) -> Result<(), WfstError> {
    if e.residual.len() > limits.max_residual {
        return Err(WfstError::NonFunctional(format!(
            "pending output grew beyond {} labels (missing disambiguation symbols?)",
            limits.max_residual
        )));
    }
    let key = (e.state, e.residual.clone());
    if best.get(&key).is_none_or(|&w| e.weight < w) {
        best.insert(key, e.weight);
        queue.push_back(e);
    }
    Ok(())
}

fn emit_final(fst: &Fst, out: &mut Fst, src: StateId, subset: &[Element]) -> Result<(), WfstError> {
    let mut best: Option<(Weight, &[Label])> = None;
    for e in subset.iter().filter(|e| fst.is_final(e.state)) {
        let w = times(e.weight, fst.final_weight(e.state));
        if let Some((_, r)) = best {
            if r != e.residual.as_slice() {
                return Err(WfstError::NonFunctional(
                    "one input string maps to several output strings".into(),
                ));
            }
        }
        if best.is_none_or(|(bw, _)| w < bw) {
            best = Some((w, &e.residual));
        }
    }
    let Some((w, residual)) = best else {
        return Ok(());
    };
    if residual.is_empty() {
        out.set_final(src, w);
        return Ok(());
    }
    let mut cur = src;
    for &l in residual {
        let next = out.add_state();
        out.add_arc(cur, Arc::new(EPS, l, 0.0, next));
        cur = next;
    }
    out.set_final(cur, w);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfst::SymbolTable;
    use std::sync::Arc as Shared;

    fn syms() -> Shared<SymbolTable> {
        Shared::new(SymbolTable::from_symbols(["a", "b", "x", "y"]))
    }

    #[test]
    fn deterministic_input_is_a_fixpoint() {
        let s = syms();
        let mut f = Fst::new(s.clone(), s);
        f.add_state();
        f.add_state();
        f.set_start(0);
        f.add_arc(0, Arc::new(1, 3, 0.5, 1));
        f.add_arc(1, Arc::new(2, 4, 0.25, 0));
        f.set_final(1, 1.0);
        let d = determinize(&f).unwrap();
        assert_eq!(d.num_states(), 2);
        assert_eq!(d.num_arcs(), 2);
        assert_eq!(d.arcs(0)[0], Arc::new(1, 3, 0.5, 1));
        assert_eq!(d.final_weight(1), 1.0);
    }

    #[test]
    fn delayed_output_is_resolved() {
        // a b -> x, a a -> y: output is delayed until the second symbol
        let s = syms();
        let mut f = Fst::new(s.clone(), s);
        for _ in 0..5 {
            f.add_state();
        }
        f.set_start(0);
        f.add_arc(0, Arc::new(1, 3, 1.0, 1));
        f.add_arc(1, Arc::new(2, EPS, 0.0, 2));
        f.add_arc(0, Arc::new(1, 4, 2.0, 3));
        f.add_arc(3, Arc::new(1, EPS, 0.0, 4));
        f.set_final(2, 0.0);
        f.set_final(4, 0.0);
        let d = determinize(&f).unwrap();
        assert!(d.is_deterministic());
        let s0 = d.start().unwrap();
        assert_eq!(d.arcs(s0).len(), 1);
        assert_eq!(d.arcs(s0)[0].olabel, EPS);
        assert_eq!(d.arcs(s0)[0].weight, 1.0);
    }

    #[test]
    fn ambiguous_output_is_non_functional() {
        let s = syms();
        let mut f = Fst::new(s.clone(), s);
        for _ in 0..3 {
            f.add_state();
        }
        f.set_start(0);
        f.add_arc(0, Arc::new(1, 3, 0.0, 1));
        f.add_arc(0, Arc::new(1, 4, 0.0, 2));
        f.set_final(1, 0.0);
        f.set_final(2, 0.0);
        assert!(matches!(determinize(&f), Err(WfstError::NonFunctional(_))));
    }
}
