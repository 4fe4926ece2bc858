use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use super::model::{GraphoneModel, EOS};
use super::{G2pError, Graphone};

/// Beam width that disables pruning.
pub const UNBOUNDED_BEAM: usize = usize::MAX;

const MAX_EXPANSIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub pron: Vec<String>,
    pub graphones: Vec<Graphone>,
    /// Natural-log model probability of the best segmentation.
    pub log_prob: f64,
}

struct Node {
    pos: usize,
    insertion: bool,
    history: Vec<u32>,
    score: f64,
    arcs: Vec<(usize, u32, f64)>,
}

struct SearchGraph {
    nodes: Vec<Node>,
    index: HashMap<(usize, bool, Vec<u32>), usize>,
}

impl SearchGraph {
    fn node(&mut self, pos: usize, insertion: bool, history: Vec<u32>) -> usize {
        let n = self.nodes.len();
        *self.index.entry((pos, insertion, history.clone())).or_insert_with(|| {
            self.nodes.push(Node {
                pos,
                insertion,
                history,
                score: f64::NEG_INFINITY,
                arcs: Vec::new(),
            });
            n
        })
    }

    fn arc(&mut self, from: usize, to: usize, token: u32, lp: f64) {
        self.nodes[from].arcs.push((to, token, lp));
        let s = self.nodes[from].score + lp;
        if s > self.nodes[to].score {
            self.nodes[to].score = s;
        }
    }

    /// The `beam` best of `ids` by forward score.
    fn best(&self, mut ids: Vec<usize>, beam: usize) -> Vec<usize> {
        ids.sort_unstable();
        ids.dedup();
        ids.sort_by(|&a, &b| self.nodes[b].score.total_cmp(&self.nodes[a].score).then(a.cmp(&b)));
        ids.truncate(beam);
        ids
    }
}

struct Entry {
    f: f64,
    seq: usize,
    node: usize,
    g: f64,
    path: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f.total_cmp(&other.f).then(other.seq.cmp(&self.seq))
    }
}

/// Up to `nbest` distinct pronunciations of `word`, best first.
///
/// A beam search over letter positions keeps at most `beam` partial
/// hypotheses per position; the surviving search graph is then searched
/// best-first with exact completion costs, and each result is rescored
/// with the model.
pub fn decode(model: &GraphoneModel, word: &str, beam: usize, nbest: usize) -> Result<Vec<Hypothesis>, G2pError> {
    let letters: Vec<char> = word.chars().collect();
    let alphabet = model.alphabet();
    if let Some(&letter) = letters.iter().find(|c| !alphabet.contains(c)) {
        return Err(G2pError::UnknownGrapheme {
            word: word.to_string(),
            letter,
        });
    }
    let none = || G2pError::NoHypothesis { word: word.to_string() };
    if letters.is_empty() || nbest == 0 || beam == 0 {
        return Err(none());
    }
    let mut by_letters: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (id, g) in model.graphones() {
        by_letters.entry(g.letters.as_str()).or_default().push(id);
    }
    let insertions = by_letters.get("").cloned().unwrap_or_default();

    let mut cache: HashMap<Vec<u32>, Rc<Vec<f64>>> = HashMap::new();
    let mut logprobs = |h: &[u32]| -> Rc<Vec<f64>> {
        cache
            .entry(h.to_vec())
            .or_insert_with(|| Rc::new(model.distribution(h).into_iter().map(f64::ln).collect()))
            .clone()
    };
    let n = letters.len();
    let mut graph = SearchGraph {
        nodes: Vec::new(),
        index: HashMap::new(),
    };
    let start = graph.node(0, false, model.initial_history());
    graph.nodes[start].score = 0.0;
    let final_node = graph.node(n + 1, false, Vec::new());
    let mut arriving: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    arriving[0].push(start);
    for pos in 0..=n {
        let plain = graph.best(std::mem::take(&mut arriving[pos]), beam);
        let mut here = plain.clone();
        for &from in &plain {
            let lps = logprobs(&graph.nodes[from].history);
            for &g in &insertions {
                let lp = lps[g as usize];
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let h = model.next_history(&graph.nodes[from].history, g);
                let to = graph.node(pos, true, h);
                here.push(to);
                graph.arc(from, to, g, lp);
            }
        }
        for from in graph.best(here, beam) {
            let hist = graph.nodes[from].history.clone();
            let lps = logprobs(&hist);
            if pos == n {
                graph.arc(from, final_node, EOS, lps[EOS as usize]);
                continue;
            }
            for a in 1..=model.max_letters().min(n - pos) {
                let key: String = letters[pos..pos + a].iter().collect();
                for &g in by_letters.get(key.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
                    if lps[g as usize] == f64::NEG_INFINITY {
                        continue;
                    }
                    let to = graph.node(pos + a, false, model.next_history(&hist, g));
                    arriving[pos + a].push(to);
                    graph.arc(from, to, g, lps[g as usize]);
                }
            }
        }
    }

    // exact best completion: positions descending, insertion nodes first
    let mut order: Vec<usize> = (0..graph.nodes.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(graph.nodes[i].pos), !graph.nodes[i].insertion));
    let mut rest = vec![f64::NEG_INFINITY; graph.nodes.len()];
    rest[final_node] = 0.0;
    for &i in &order {
        for &(to, _, lp) in &graph.nodes[i].arcs {
            rest[i] = rest[i].max(lp + rest[to]);
        }
    }
    if rest[start] == f64::NEG_INFINITY {
        return Err(none());
    }

    let mut paths: Vec<(usize, u32)> = vec![(usize::MAX, EOS)];
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        f: rest[start],
        seq: 0,
        node: start,
        g: 0.0,
        path: 0,
    });
    let mut seq = 1;
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut out = Vec::new();
    let mut expansions = 0;
    while let Some(e) = heap.pop() {
        if e.node == final_node {
            let mut tokens = Vec::new();
            let mut p = e.path;
            while p != 0 {
                tokens.push(paths[p].1);
                p = paths[p].0;
            }
            tokens.reverse();
            tokens.pop(); // EOS
            let graphones: Vec<Graphone> = tokens.iter().filter_map(|&t| model.graphone(t).cloned()).collect();
            let pron: Vec<String> = graphones.iter().flat_map(|g| g.phones.iter().cloned()).collect();
            if seen.insert(pron.clone()) {
                out.push(Hypothesis {
                    pron,
                    graphones,
                    log_prob: model.log_prob(&tokens),
                });
                if out.len() == nbest {
                    break;
                }
            }
            continue;
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            break;
        }
        for &(to, token, lp) in &graph.nodes[e.node].arcs {
            if rest[to] == f64::NEG_INFINITY {
                continue;
            }
            paths.push((e.path, token));
            heap.push(Entry {
                f: e.g + lp + rest[to],
                seq,
                node: to,
                g: e.g + lp,
                path: paths.len() - 1,
            });
            seq += 1;
        }
    }
    out.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
    Ok(out)
}
