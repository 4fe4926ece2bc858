//! Exhaustive path enumeration. Slow and simple on purpose: these functions
//! share no code with the algorithms they check.

use std::collections::{BTreeMap, BTreeSet};

use crate::wfst::{Fst, Label, StateId, Weight, EPS};

/// Input string and output string of a path.
pub type StringPair = (Vec<Label>, Vec<Label>);

/// Min path weight for every (input, output) pair whose input has at most
/// `max_len` labels. Runs of epsilon-input arcs are cut at
/// `num_states + 1` arcs, which loses nothing when epsilon cycles have
/// nonnegative weight and no outputs.
pub fn relation(fst: &Fst, max_len: usize) -> BTreeMap<StringPair, Weight> {
    relation_where(fst, |input| input.len() <= max_len)
}

/// Like [`relation`], restricted to inputs whose every prefix satisfies
/// `keep`.
pub fn relation_where(fst: &Fst, keep: impl Fn(&[Label]) -> bool) -> BTreeMap<StringPair, Weight> {
    let mut out = BTreeMap::new();
    let Some(start) = fst.start() else {
        return out;
    };
    let eps_limit = fst.num_states() + 1;
    let mut stack: Vec<(StateId, Vec<Label>, Vec<Label>, Weight, usize)> =
        vec![(start, Vec::new(), Vec::new(), 0.0, 0)];
    while let Some((s, input, output, w, eps_run)) = stack.pop() {
        if fst.is_final(s) {
            let total = w + fst.final_weight(s);
            let e = out.entry((input.clone(), output.clone())).or_insert(f64::INFINITY);
            if total < *e {
                *e = total;
            }
        }
        for a in fst.arcs(s) {
            let mut o = output.clone();
            if a.olabel != EPS {
                o.push(a.olabel);
            }
            if a.ilabel == EPS {
                if eps_run < eps_limit {
                    stack.push((a.nextstate, input.clone(), o, w + a.weight, eps_run + 1));
                }
            } else {
                let mut i = input.clone();
                i.push(a.ilabel);
                if keep(&i) {
                    stack.push((a.nextstate, i, o, w + a.weight, 0));
                }
            }
        }
    }
    out
}

/// Relation of the composition computed by joining the two relations on the
/// middle string.
pub fn joined_relation(a: &Fst, b: &Fst, max_len: usize) -> BTreeMap<StringPair, Weight> {
    let ra = relation(a, max_len);
    let prefixes: BTreeSet<&[Label]> = ra
        .keys()
        .flat_map(|(_, y)| (0..=y.len()).map(move |n| &y[..n]))
        .collect();
    let rb = relation_where(b, |y| prefixes.contains(y));
    let mut by_input: BTreeMap<&[Label], Vec<(&[Label], Weight)>> = BTreeMap::new();
    for ((y, z), &w) in &rb {
        by_input.entry(y.as_slice()).or_default().push((z, w));
    }
    let mut out: BTreeMap<StringPair, Weight> = BTreeMap::new();
    for ((x, y), &w1) in &ra {
        for &(z, w2) in by_input.get(y.as_slice()).into_iter().flatten() {
            let e = out.entry((x.clone(), z.to_vec())).or_insert(f64::INFINITY);
            *e = e.min(w1 + w2);
        }
    }
    out
}

/// First difference between two relations, if any.
pub fn compare_relations(
    expected: &BTreeMap<StringPair, Weight>,
    actual: &BTreeMap<StringPair, Weight>,
    tol: f64,
) -> Option<String> {
    for (k, &w) in expected {
        match actual.get(k) {
            None => return Some(format!("missing pair {k:?} (weight {w})")),
            Some(&v) if (v - w).abs() > tol => return Some(format!("pair {k:?}: expected {w}, got {v}")),
            _ => {}
        }
    }
    actual
        .keys()
        .find(|k| !expected.contains_key(*k))
        .map(|k| format!("unexpected pair {k:?}"))
}

/// Best path consuming exactly one frame per non-epsilon arc: returns the
/// cost and the input label sequence. Every path is enumerated.
pub fn best_path(fst: &Fst, frame_costs: &[Vec<f64>]) -> Option<(Weight, Vec<Label>)> {
    let start = fst.start()?;
    let eps_limit = fst.num_states() + 1;
    let mut best: Option<(Weight, Vec<Label>)> = None;
    let mut stack = vec![(start, Vec::<Label>::new(), 0.0, 0usize)];
    while let Some((s, labels, w, eps_run)) = stack.pop() {
        let t = labels.len();
        if t == frame_costs.len() && fst.is_final(s) {
            let total = w + fst.final_weight(s);
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, labels.clone()));
            }
        }
        for a in fst.arcs(s) {
            if a.ilabel == EPS {
                if eps_run < eps_limit {
                    stack.push((a.nextstate, labels.clone(), w + a.weight, eps_run + 1));
                }
            } else if t < frame_costs.len() {
                let c = frame_costs[t][a.ilabel as usize - 1];
                let mut l = labels.clone();
                l.push(a.ilabel);
                stack.push((a.nextstate, l, w + a.weight + c, 0));
            }
        }
    }
    best.filter(|(w, _)| w.is_finite())
}

/// Structural equality of two deterministic machines up to state
/// renumbering, with weights compared within `tol`.
pub fn isomorphic(a: &Fst, b: &Fst, tol: f64) -> bool {
    if a.num_states() != b.num_states() || a.num_arcs() != b.num_arcs() {
        return false;
    }
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return a.start().is_none() && b.start().is_none();
    };
    let mut map: BTreeMap<StateId, StateId> = BTreeMap::from([(sa, sb)]);
    let mut stack = vec![(sa, sb)];
    let close = |x: f64, y: f64| x == y || (x - y).abs() <= tol;
    while let Some((p, q)) = stack.pop() {
        if !close(a.final_weight(p), b.final_weight(q)) {
            return false;
        }
        let mut ap: Vec<_> = a.arcs(p).to_vec();
        let mut bq: Vec<_> = b.arcs(q).to_vec();
        if ap.len() != bq.len() {
            return false;
        }
        ap.sort_by_key(|x| (x.ilabel, x.olabel));
        bq.sort_by_key(|x| (x.ilabel, x.olabel));
        for (x, y) in ap.iter().zip(&bq) {
            if x.ilabel != y.ilabel || x.olabel != y.olabel || !close(x.weight, y.weight) {
                return false;
            }
            match map.get(&x.nextstate) {
                Some(&m) if m != y.nextstate => return false,
                Some(_) => {}
                None => {
                    map.insert(x.nextstate, y.nextstate);
                    stack.push((x.nextstate, y.nextstate));
                }
            }
        }
    }
    true
}
