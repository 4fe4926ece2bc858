//! Time-synchronous Viterbi search with histogram pruning.
//!
//! Every non-epsilon arc consumes one frame; its cost is the arc weight plus
//! `frame_costs[t][ilabel - 1]`. Epsilon-input arcs are followed between
//! frames. At most `beam` tokens survive each frame.

use std::collections::{BTreeMap, VecDeque};

use super::{Fst, Label, StateId, Weight, WfstError, EPS};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStep {
    pub frame: usize,
    pub ilabel: Label,
    pub olabel: Label,
    pub src: StateId,
    pub dst: StateId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestPath {
    pub cost: Weight,
    /// One step per frame, in order.
    pub steps: Vec<FrameStep>,
    /// Non-epsilon output labels along the path.
    pub olabels: Vec<Label>,
}

struct Trace {
    prev: Option<usize>,
    ilabel: Label,
    olabel: Label,
    src: StateId,
    dst: StateId,
}

#[derive(Clone, Copy)]
struct Token {
    cost: Weight,
    trace: Option<usize>,
}

type Tokens = BTreeMap<StateId, Token>;

fn relax(tokens: &mut Tokens, s: StateId, tok: Token) -> bool {
    match tokens.get(&s) {
        Some(old) if old.cost <= tok.cost => false,
        _ => {
            tokens.insert(s, tok);
            true
        }
    }
}

fn epsilon_closure(fst: &Fst, tokens: &mut Tokens, arena: &mut Vec<Trace>) {
    let mut queue: VecDeque<StateId> = tokens.keys().copied().collect();
    while let Some(s) = queue.pop_front() {
        let tok = tokens[&s];
        for a in fst.arcs(s) {
            if a.ilabel != EPS {
                continue;
            }
            let cost = tok.cost + a.weight;
            if tokens.get(&a.nextstate).is_some_and(|t| t.cost <= cost) {
                continue;
            }
            arena.push(Trace {
                prev: tok.trace,
                ilabel: EPS,
                olabel: a.olabel,
                src: s,
                dst: a.nextstate,
            });
            let t = Token {
                cost,
                trace: Some(arena.len() - 1),
            };
            if relax(tokens, a.nextstate, t) {
                queue.push_back(a.nextstate);
            }
        }
    }
}

fn prune(tokens: &mut Tokens, beam: usize) {
    if tokens.len() <= beam {
        return;
    }
    let mut ranked: Vec<(Weight, StateId)> = tokens.iter().map(|(&s, t)| (t.cost, s)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, s) in &ranked[beam..] {
        tokens.remove(&s);
    }
}

pub fn shortest_path_beam(fst: &Fst, frame_costs: &[Vec<f64>], beam: usize) -> Result<BestPath, WfstError> {
    let beam = beam.max(1);
    let start = fst.start().ok_or(WfstError::BeamCollapse { frame: 0, beam })?;
    let mut arena: Vec<Trace> = Vec::new();
    let mut tokens = Tokens::new();
    tokens.insert(start, Token { cost: 0.0, trace: None });
    epsilon_closure(fst, &mut tokens, &mut arena);

    for (t, costs) in frame_costs.iter().enumerate() {
        let mut next = Tokens::new();
        for (&s, tok) in &tokens {
            for a in fst.arcs(s) {
                if a.ilabel == EPS {
                    continue;
                }
                let acoustic = *costs
                    .get(a.ilabel as usize - 1)
                    .ok_or(WfstError::LabelOutOfRange(a.ilabel))?;
                let cost = tok.cost + a.weight + acoustic;
                if !cost.is_finite() || next.get(&a.nextstate).is_some_and(|n| n.cost <= cost) {
                    continue;
                }
                arena.push(Trace {
                    prev: tok.trace,
                    ilabel: a.ilabel,
                    olabel: a.olabel,
                    src: s,
                    dst: a.nextstate,
                });
                relax(
                    &mut next,
                    a.nextstate,
                    Token {
                        cost,
                        trace: Some(arena.len() - 1),
                    },
                );
            }
        }
        epsilon_closure(fst, &mut next, &mut arena);
        prune(&mut next, beam);
        if next.is_empty() {
            return Err(WfstError::BeamCollapse { frame: t, beam });
        }
        tokens = next;
    }

    let best = tokens
        .iter()
        .filter(|(&s, _)| fst.is_final(s))
        .map(|(&s, t)| (t.cost + fst.final_weight(s), t.trace))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(WfstError::BeamCollapse {
            frame: frame_costs.len(),
            beam,
        })?;

    let mut steps = Vec::with_capacity(frame_costs.len());
    let mut olabels = Vec::new();
    let mut cur = best.1;
    while let Some(i) = cur {
        let tr = &arena[i];
        if tr.olabel != EPS {
            olabels.push(tr.olabel);
        }
        if tr.ilabel != EPS {
            steps.push(FrameStep {
                frame: 0,
                ilabel: tr.ilabel,
                olabel: tr.olabel,
                src: tr.src,
                dst: tr.dst,
            });
        }
        cur = tr.prev;
    }
    steps.reverse();
    olabels.reverse();
    for (t, step) in steps.iter_mut().enumerate() {
        step.frame = t;
    }
    Ok(BestPath {
        cost: best.0,
        steps,
        olabels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfst::{Arc, SymbolTable};
    use std::sync::Arc as Shared;

    fn chain() -> Fst {
        // a+ b+ with an epsilon-input word arc in between
        let s = Shared::new(SymbolTable::from_symbols(["a", "b"]));
        let w = Shared::new(SymbolTable::from_symbols(["W"]));
        let mut f = Fst::new(s, w);
        for _ in 0..3 {
            f.add_state();
        }
        f.set_start(0);
        f.add_arc(0, Arc::new(1, EPS, 0.0, 0));
        f.add_arc(0, Arc::new(EPS, 1, 0.0, 1));
        f.add_arc(1, Arc::new(2, EPS, 0.0, 2));
        f.add_arc(2, Arc::new(2, EPS, 0.0, 2));
        f.set_final(2, 0.0);
        f
    }

    #[test]
    fn picks_the_cheapest_segmentation() {
        let costs = vec![vec![0.0, 5.0], vec![0.0, 5.0], vec![5.0, 0.0], vec![5.0, 0.0]];
        let p = shortest_path_beam(&chain(), &costs, 10).unwrap();
        assert_eq!(p.cost, 0.0);
        let labels: Vec<_> = p.steps.iter().map(|s| s.ilabel).collect();
        assert_eq!(labels, vec![1, 1, 2, 2]);
        assert_eq!(p.olabels, vec![1]);
    }

    #[test]
    fn unreachable_final_reports_collapse() {
        let costs = vec![vec![0.0, f64::INFINITY]];
        assert!(matches!(
            shortest_path_beam(&chain(), &costs, 10),
            Err(WfstError::BeamCollapse { frame: 1, .. })
        ));
    }

    #[test]
    fn short_score_vectors_are_rejected() {
        let costs = vec![vec![0.0]];
        assert_eq!(
            shortest_path_beam(&chain(), &costs, 10).unwrap_err(),
            WfstError::LabelOutOfRange(2)
        );
    }
}
