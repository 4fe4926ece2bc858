//! Structural utilities: trimming, epsilon removal, relabeling, and
//! single-source shortest distances.

use std::collections::{BTreeMap, VecDeque};

use super::semiring::{plus, times, ZERO};
use super::{Arc, Fst, Label, StateId, Weight, EPS};

/// Removes states that are not both accessible and coaccessible. State ids
/// are renumbered in increasing order of the surviving ids.
pub fn connect(fst: &Fst) -> Fst {
    let Some(start) = fst.start() else {
        return fst.empty_like();
    };
    let n = fst.num_states();
    let mut access = vec![false; n];
    let mut stack = vec![start];
    access[start] = true;
    while let Some(s) = stack.pop() {
        for a in fst.arcs(s) {
            if !access[a.nextstate] {
                access[a.nextstate] = true;
                stack.push(a.nextstate);
            }
        }
    }
    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in fst.states() {
        for a in fst.arcs(s) {
            reverse[a.nextstate].push(s);
        }
    }
    let mut coaccess = vec![false; n];
    let mut stack: Vec<StateId> = fst.states().filter(|&s| fst.is_final(s)).collect();
    for &s in &stack {
        coaccess[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &reverse[s] {
            if !coaccess[p] {
                coaccess[p] = true;
                stack.push(p);
            }
        }
    }
    let mut out = fst.empty_like();
    if !(access[start] && coaccess[start]) {
        return out;
    }
    let mut map = vec![usize::MAX; n];
    for s in 0..n {
        if access[s] && coaccess[s] {
            map[s] = out.add_state();
        }
    }
    for s in 0..n {
        if map[s] == usize::MAX {
            continue;
        }
        out.set_final(map[s], fst.final_weight(s));
        for a in fst.arcs(s) {
            if map[a.nextstate] != usize::MAX {
                out.add_arc(
                    map[s],
                    Arc {
                        nextstate: map[a.nextstate],
                        ..*a
                    },
                );
            }
        }
    }
    out.set_start(map[start]);
    out
}

/// Shortest distance from every state to a final state (final weights
/// included). Unreachable states get `0̄`.
pub fn distance_to_final(fst: &Fst) -> Vec<Weight> {
    let n = fst.num_states();
    let mut reverse: Vec<Vec<(StateId, Weight)>> = vec![Vec::new(); n];
    for s in fst.states() {
        for a in fst.arcs(s) {
            reverse[a.nextstate].push((s, a.weight));
        }
    }
    let mut dist = vec![ZERO; n];
    let mut queue = VecDeque::new();
    let mut queued = vec![false; n];
    for s in fst.states() {
        if fst.is_final(s) {
            dist[s] = fst.final_weight(s);
            queue.push_back(s);
            queued[s] = true;
        }
    }
    relax(&reverse, &mut dist, &mut queue, &mut queued);
    dist
}

/// Shortest distance from the start state to every state.
pub fn distance_from_start(fst: &Fst) -> Vec<Weight> {
    let n = fst.num_states();
    let mut forward: Vec<Vec<(StateId, Weight)>> = vec![Vec::new(); n];
    for s in fst.states() {
        for a in fst.arcs(s) {
            forward[s].push((a.nextstate, a.weight));
        }
    }
    let mut dist = vec![ZERO; n];
    let mut queue = VecDeque::new();
    let mut queued = vec![false; n];
    if let Some(s) = fst.start() {
        dist[s] = 0.0;
        queue.push_back(s);
        queued[s] = true;
    }
    relax(&forward, &mut dist, &mut queue, &mut queued);
    dist
}

// Label-correcting relaxation; assumes no negative cycles.
fn relax(adj: &[Vec<(StateId, Weight)>], dist: &mut [Weight], queue: &mut VecDeque<StateId>, queued: &mut [bool]) {
    while let Some(s) = queue.pop_front() {
        queued[s] = false;
        for &(t, w) in &adj[s] {
            let d = times(dist[s], w);
            if d < dist[t] {
                dist[t] = d;
                if !queued[t] {
                    queued[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
}

/// Replaces every input label in `labels` by epsilon.
pub fn relabel_input_to_eps(fst: &mut Fst, labels: &[Label]) {
    for s in fst.states() {
        for a in fst.arcs_mut(s) {
            if labels.contains(&a.ilabel) {
                a.ilabel = EPS;
            }
        }
    }
}

/// Deletes arcs whose input label is in `labels`.
pub fn remove_input_arcs(fst: &mut Fst, labels: &[Label]) {
    for s in fst.states() {
        fst.arcs_mut(s).retain(|a| !labels.contains(&a.ilabel));
    }
}

/// Epsilon removal for `ε:ε` arcs.
pub fn rm_epsilon(fst: &Fst) -> Fst {
    let mut out = fst.clone();
    for s in fst.states() {
        // epsilon closure of s with shortest distances
        let mut closure: BTreeMap<StateId, Weight> = BTreeMap::new();
        let mut queue = VecDeque::from([(s, 0.0)]);
        closure.insert(s, 0.0);
        while let Some((q, d)) = queue.pop_front() {
            if closure.get(&q).is_some_and(|&best| best < d) {
                continue;
            }
            for a in fst.arcs(q) {
                if a.ilabel == EPS && a.olabel == EPS {
                    let nd = times(d, a.weight);
                    let better = closure.get(&a.nextstate).is_none_or(|&old| nd < old);
                    if better {
                        closure.insert(a.nextstate, nd);
                        queue.push_back((a.nextstate, nd));
                    }
                }
            }
        }
        let mut arcs = Vec::new();
        let mut final_weight = ZERO;
        for (&q, &d) in &closure {
            final_weight = plus(final_weight, times(d, fst.final_weight(q)));
            for a in fst.arcs(q) {
                if !(a.ilabel == EPS && a.olabel == EPS) {
                    arcs.push(Arc {
                        weight: times(d, a.weight),
                        ..*a
                    });
                }
            }
        }
        *out.arcs_mut(s) = merge_parallel(arcs);
        out.set_final(s, final_weight);
    }
    connect(&out)
}

/// Collapses arcs with identical `(ilabel, olabel, nextstate)` keeping the
/// minimum weight, preserving first-occurrence order.
pub fn merge_parallel(arcs: Vec<Arc>) -> Vec<Arc> {
    let mut index: BTreeMap<(Label, Label, StateId), usize> = BTreeMap::new();
    let mut out: Vec<Arc> = Vec::with_capacity(arcs.len());
    for a in arcs {
        match index.get(&(a.ilabel, a.olabel, a.nextstate)) {
            Some(&i) => out[i].weight = plus(out[i].weight, a.weight),
            None => {
                index.insert((a.ilabel, a.olabel, a.nextstate), out.len());
                out.push(a);
            }
        }
    }
    out
}

/// Linear acceptor over `labels` using `syms` on both sides.
pub fn linear_acceptor(labels: &[Label], syms: std::sync::Arc<super::SymbolTable>) -> Fst {
    let mut fst = Fst::new(syms.clone(), syms);
    let mut cur = fst.add_state();
    fst.set_start(cur);
    for &l in labels {
        let next = fst.add_state();
        fst.add_arc(cur, Arc::new(l, l, 0.0, next));
        cur = next;
    }
    fst.set_final(cur, 0.0);
    fst
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
    fn connect_drops_dead_and_unreachable_states() {
        let mut f = Fst::new(syms(), syms());
        let s0 = f.add_state();
        let s1 = f.add_state();
        let dead = f.add_state();
        let _unreachable = f.add_state();
        f.set_start(s0);
        f.set_final(s1, 0.5);
        f.add_arc(s0, Arc::new(1, 1, 1.0, s1));
        f.add_arc(s0, Arc::new(2, 2, 1.0, dead));
        let c = connect(&f);
        assert_eq!(c.num_states(), 2);
        assert_eq!(c.num_arcs(), 1);
    }

    #[test]
    fn rm_epsilon_keeps_path_weights() {
        let mut f = Fst::new(syms(), syms());
        for _ in 0..3 {
            f.add_state();
        }
        f.set_start(0);
        f.add_arc(0, Arc::new(EPS, EPS, 0.25, 1));
        f.add_arc(1, Arc::new(1, 2, 1.0, 2));
        f.set_final(2, 0.5);
        f.set_final(1, 3.0);
        let r = rm_epsilon(&f);
        assert!(r.arcs(r.start().unwrap()).iter().all(|a| a.ilabel != EPS));
        assert_eq!(r.final_weight(r.start().unwrap()), 3.25);
        assert_eq!(r.arcs(r.start().unwrap())[0].weight, 1.25);
    }

    #[test]
    fn distances() {
        let f = linear_acceptor(&[1, 2, 1], syms());
        assert_eq!(distance_to_final(&f)[0], 0.0);
        assert_eq!(distance_from_start(&f)[3], 0.0);
    }
}
