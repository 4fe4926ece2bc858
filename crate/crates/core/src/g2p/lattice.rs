//! Segmentation lattices of (word, pronunciation) pairs.

use std::collections::{BTreeMap, HashMap};

use super::model::{CountTable, GraphoneModel, EOS};
use super::{G2pError, Graphone};
use crate::acoustic::model::log_sum_exp;

/// Position in a pair: letters consumed, phones consumed, last graphone
/// was an insertion.
type Node = (usize, usize, bool);

/// Graphone steps `(a, b)` leaving `node`. No two insertions in a row.
fn steps(node: Node, n: usize, m: usize, lg: usize, lp: usize) -> impl Iterator<Item = (usize, usize)> {
    let (i, j, ins) = node;
    (0..=lg.min(n - i))
        .flat_map(move |a| (0..=lp.min(m - j)).map(move |b| (a, b)))
        .filter(move |&(a, b)| (a, b) != (0, 0) && !(a == 0 && ins))
}

/// Nodes from which `(n, m, _)` is reachable.
fn coaccessible(n: usize, m: usize, lg: usize, lp: usize) -> Vec<Node> {
    let mut good = vec![(n, m, false), (n, m, true)];
    // every step increases i + j, so a descending sweep settles each node once
    for sum in (0..n + m).rev() {
        for i in (0..=n.min(sum)).rev() {
            let j = sum - i;
            if j > m {
                continue;
            }
            for ins in [false, true] {
                let node = (i, j, ins);
                if steps(node, n, m, lg, lp).any(|(a, b)| good.contains(&(i + a, j + b, a == 0))) {
                    good.push(node);
                }
            }
        }
    }
    good
}

/// Graphones on some complete segmentation of the pair.
pub(crate) fn pair_graphones(letters: &[char], phones: &[String], lg: usize, lp: usize) -> Vec<Graphone> {
    let (n, m) = (letters.len(), phones.len());
    let good = coaccessible(n, m, lg, lp);
    let mut out = Vec::new();
    let mut reached = vec![(0, 0, false)];
    let mut k = 0;
    while k < reached.len() {
        let node = reached[k];
        k += 1;
        if !good.contains(&node) {
            continue;
        }
        let (i, j, _) = node;
        for (a, b) in steps(node, n, m, lg, lp) {
            let next = (i + a, j + b, a == 0);
            if good.contains(&next) {
                out.push(Graphone {
                    letters: letters[i..i + a].iter().collect(),
                    phones: phones[j..j + b].to_vec(),
                });
                if !reached.contains(&next) {
                    reached.push(next);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone)]
struct Arc {
    from: usize,
    to: usize,
    token: u32,
}

/// Segmentations of one pair expanded with M-gram histories. State 0 is
/// the start, `final_state` follows the `EOS` arcs; arcs are in
/// topological order of their source.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    histories: Vec<Vec<u32>>,
    arcs: Vec<Arc>,
    final_state: usize,
}

impl Lattice {
    pub fn build(model: &GraphoneModel, word: &str, pron: &[String]) -> Result<Self, G2pError> {
        let letters: Vec<char> = word.chars().collect();
        let (n, m) = (letters.len(), pron.len());
        let (lg, lp) = (model.max_letters(), model.max_phones());
        let good = coaccessible(n, m, lg, lp);
        if !good.contains(&(0, 0, false)) {
            return Err(G2pError::NoValidSegmentation { word: word.to_string() });
        }
        let mut ids: HashMap<(Node, Vec<u32>), usize> = HashMap::new();
        let mut queue: BTreeMap<(usize, Node, Vec<u32>), usize> = BTreeMap::new();
        let mut histories = vec![model.initial_history()];
        queue.insert((0, (0, 0, false), histories[0].clone()), 0);
        ids.insert(((0, 0, false), histories[0].clone()), 0);
        let mut arcs = Vec::new();
        let mut finals = Vec::new();
        while let Some(((_, node, hist), from)) = queue.pop_first() {
            let (i, j, _) = node;
            if (i, j) == (n, m) {
                finals.push(from);
            }
            for (a, b) in steps(node, n, m, lg, lp) {
                let next = (i + a, j + b, a == 0);
                if !good.contains(&next) {
                    continue;
                }
                let g = Graphone {
                    letters: letters[i..i + a].iter().collect(),
                    phones: pron[j..j + b].to_vec(),
                };
                let Some(token) = model.id(&g) else { continue };
                let h = model.next_history(&hist, token);
                let to = *ids.entry((next, h.clone())).or_insert_with(|| {
                    histories.push(h.clone());
                    queue.insert((i + a + j + b, next, h), histories.len() - 1);
                    histories.len() - 1
                });
                arcs.push(Arc { from, to, token });
            }
        }
        if finals.is_empty() {
            return Err(G2pError::NoValidSegmentation { word: word.to_string() });
        }
        let final_state = histories.len();
        arcs.extend(finals.into_iter().map(|from| Arc {
            from,
            to: final_state,
            token: EOS,
        }));
        Ok(Self {
            histories,
            arcs,
            final_state,
        })
    }

    fn arc_logprobs(&self, model: &GraphoneModel) -> Vec<f64> {
        self.arcs
            .iter()
            .map(|a| model.prob(&self.histories[a.from], a.token).ln())
            .collect()
    }

    fn forward(&self, lps: &[f64]) -> Vec<f64> {
        let mut alpha = vec![f64::NEG_INFINITY; self.final_state + 1];
        alpha[0] = 0.0;
        for (a, lp) in self.arcs.iter().zip(lps) {
            alpha[a.to] = log_sum_exp(&[alpha[a.to], alpha[a.from] + lp]);
        }
        alpha
    }

    /// `ln sum over segmentations of P(segmentation)`.
    pub fn log_likelihood(&self, model: &GraphoneModel) -> f64 {
        self.forward(&self.arc_logprobs(model))[self.final_state]
    }

    /// Adds posterior graphone counts to `counts` at every history length
    /// and returns the log-likelihood.
    pub fn accumulate(&self, model: &GraphoneModel, counts: &mut CountTable) -> f64 {
        let lps = self.arc_logprobs(model);
        let alpha = self.forward(&lps);
        let mut beta = vec![f64::NEG_INFINITY; self.final_state + 1];
        beta[self.final_state] = 0.0;
        for (a, lp) in self.arcs.iter().zip(&lps).rev() {
            beta[a.from] = log_sum_exp(&[beta[a.from], beta[a.to] + lp]);
        }
        let z = alpha[self.final_state];
        if z == f64::NEG_INFINITY {
            return z;
        }
        for (a, lp) in self.arcs.iter().zip(&lps) {
            let gamma = (alpha[a.from] + lp + beta[a.to] - z).exp();
            if gamma <= 0.0 {
                continue;
            }
            let h = &self.histories[a.from];
            for l in 0..=h.len() {
                *counts[l]
                    .entry(h[h.len() - l..].to_vec())
                    .or_default()
                    .next
                    .entry(a.token)
                    .or_default() += gamma;
            }
        }
        z
    }
}

/// Expected counts of all pairs under `model` and the total
/// log-likelihood.
pub(crate) fn expected_counts(model: &GraphoneModel, lattices: &[Lattice]) -> (CountTable, f64) {
    let mut counts: CountTable = vec![HashMap::new(); model.order()];
    let ll = lattices.iter().map(|l| l.accumulate(model, &mut counts)).sum();
    (counts, ll)
}
