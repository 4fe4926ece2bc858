use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use super::{G2pError, Graphone};

/// Sentence-begin token; only ever appears in histories.
pub const BOS: u32 = 0;
/// Sentence-end token; predicted after the last graphone.
pub const EOS: u32 = 1;

const HEADER: &str = "gop-forge-g2p 1";

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct HistoryCounts {
    pub total: f64,
    pub next: BTreeMap<u32, f64>,
}

/// Graphone counts per history length, `counts[l][history]` with `l < order`.
pub(crate) type CountTable = Vec<HashMap<Vec<u32>, HistoryCounts>>;

/// M-gram over graphones with absolute discounting and interpolated
/// backoff down to a uniform distribution over the inventory plus `EOS`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphoneModel {
    order: usize,
    max_letters: usize,
    max_phones: usize,
    graphones: Vec<Graphone>,
    index: HashMap<Graphone, u32>,
    counts: CountTable,
    discounts: Vec<f64>,
    backoff: Vec<HashMap<Vec<u32>, f64>>,
}

impl GraphoneModel {
    /// A model with no counts: every distribution is uniform.
    pub fn new(
        order: usize,
        max_letters: usize,
        max_phones: usize,
        inventory: impl IntoIterator<Item = Graphone>,
    ) -> Self {
        let graphones: Vec<Graphone> = inventory.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = graphones
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32 + 2))
            .collect();
        Self {
            order,
            max_letters,
            max_phones,
            graphones,
            index,
            counts: vec![HashMap::new(); order],
            discounts: vec![0.0; order],
            backoff: vec![HashMap::new(); order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max_letters(&self) -> usize {
        self.max_letters
    }

    pub fn max_phones(&self) -> usize {
        self.max_phones
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    /// Size of the predicted set: the inventory plus `EOS`.
    pub fn vocab_size(&self) -> usize {
        self.graphones.len() + 1
    }

    pub fn id(&self, g: &Graphone) -> Option<u32> {
        self.index.get(g).copied()
    }

    pub fn graphone(&self, id: u32) -> Option<&Graphone> {
        self.graphones.get((id as usize).checked_sub(2)?)
    }

    pub fn graphones(&self) -> impl Iterator<Item = (u32, &Graphone)> {
        self.graphones.iter().enumerate().map(|(i, g)| (i as u32 + 2, g))
    }

    /// Every token that can be predicted.
    pub fn predicted(&self) -> impl Iterator<Item = u32> {
        std::iter::once(EOS).chain(2..self.graphones.len() as u32 + 2)
    }

    pub fn alphabet(&self) -> BTreeSet<char> {
        self.graphones.iter().flat_map(|g| g.letters.chars()).collect()
    }

    pub fn initial_history(&self) -> Vec<u32> {
        self.next_history(&[], BOS)
    }

    /// `history` extended by `g`, keeping the last `order - 1` tokens.
    pub fn next_history(&self, history: &[u32], g: u32) -> Vec<u32> {
        let keep = self.order - 1;
        let mut h: Vec<u32> = history.iter().copied().chain([g]).collect();
        if h.len() > keep {
            h.drain(..h.len() - keep);
        }
        h
    }

    pub(crate) fn set_counts(&mut self, mut counts: CountTable) {
        for table in &mut counts {
            table.retain(|_, hc| !hc.next.is_empty());
            for hc in table.values_mut() {
                hc.total = hc.next.values().sum();
            }
        }
        self.counts = counts;
        self.update_backoff();
    }

    #[cfg(test)]
    pub(crate) fn counts(&self) -> &CountTable {
        &self.counts
    }

    /// Largest single count among histories of length `order - 1`.
    pub fn max_count(&self, order: usize) -> f64 {
        self.counts[order - 1]
            .values()
            .flat_map(|hc| hc.next.values().copied())
            .fold(0.0, f64::max)
    }

    /// Sets `d_1..d_M`, clamped into `[0, max count]` per order.
    pub fn set_discounts(&mut self, discounts: &[f64]) -> Result<(), G2pError> {
        if discounts.len() != self.order {
            return Err(G2pError::Config(format!(
                "{} discounts for an order-{} model",
                discounts.len(),
                self.order
            )));
        }
        self.discounts = discounts
            .iter()
            .enumerate()
            .map(|(l, &d)| d.clamp(0.0, self.max_count(l + 1)))
            .collect();
        self.update_backoff();
        Ok(())
    }

    fn update_backoff(&mut self) {
        self.backoff = self
            .counts
            .iter()
            .zip(&self.discounts)
            .map(|(table, &d)| {
                table
                    .iter()
                    .map(|(h, hc)| (h.clone(), hc.next.values().map(|c| c.min(d)).sum::<f64>() / hc.total))
                    .collect()
            })
            .collect();
    }

    /// Smoothed `p(g | history)`; only the last `order - 1` history tokens
    /// are used.
    pub fn prob(&self, history: &[u32], g: u32) -> f64 {
        let h = &history[history.len().saturating_sub(self.order - 1)..];
        self.prob_exact(h, g)
    }

    fn prob_exact(&self, h: &[u32], g: u32) -> f64 {
        let lower = match h.split_first() {
            None => 1.0 / self.vocab_size() as f64,
            Some((_, rest)) => self.prob_exact(rest, g),
        };
        let l = h.len();
        match self.counts[l].get(h) {
            Some(hc) => {
                let c = hc.next.get(&g).copied().unwrap_or(0.0);
                (c - self.discounts[l]).max(0.0) / hc.total + self.backoff[l][h] * lower
            }
            None => lower,
        }
    }

    /// Copy without the graphones whose total count is below `min_count`;
    /// counts involving them are dropped and discounts kept.
    pub fn pruned(&self, min_count: f64) -> Self {
        let unigram = self.counts[0].get(&Vec::new());
        let keep: Vec<Graphone> = self
            .graphones()
            .filter(|(id, _)| unigram.and_then(|u| u.next.get(id)).is_some_and(|&c| c >= min_count))
            .map(|(_, g)| g.clone())
            .collect();
        let mut out = Self::new(self.order, self.max_letters, self.max_phones, keep);
        let map = |t: u32| match t {
            BOS | EOS => Some(t),
            _ => out.id(self.graphone(t)?),
        };
        let counts: CountTable = self
            .counts
            .iter()
            .map(|table| {
                table
                    .iter()
                    .filter_map(|(h, hc)| {
                        let h: Vec<u32> = h.iter().map(|&t| map(t)).collect::<Option<_>>()?;
                        let next = hc.next.iter().filter_map(|(&g, &c)| Some((map(g)?, c))).collect();
                        Some((h, HistoryCounts { total: 0.0, next }))
                    })
                    .collect()
            })
            .collect();
        out.set_counts(counts);
        out.set_discounts(&self.discounts).expect("same order");
        out
    }

    /// `p(. | history)` indexed by token id; the `BOS` slot is 0.
    pub fn distribution(&self, history: &[u32]) -> Vec<f64> {
        let h = &history[history.len().saturating_sub(self.order - 1)..];
        let mut p = vec![1.0 / self.vocab_size() as f64; self.graphones.len() + 2];
        p[BOS as usize] = 0.0;
        for l in 0..=h.len() {
            let suffix = &h[h.len() - l..];
            if let Some(hc) = self.counts[l].get(suffix) {
                let beta = self.backoff[l][suffix];
                p.iter_mut().for_each(|x| *x *= beta);
                for (&g, &c) in &hc.next {
                    p[g as usize] += (c - self.discounts[l]).max(0.0) / hc.total;
                }
            }
        }
        p
    }

    /// Natural-log probability of a graphone sequence, including `EOS`.
    pub fn log_prob(&self, sequence: &[u32]) -> f64 {
        let mut h = self.initial_history();
        let mut lp = 0.0;
        for &g in sequence.iter().chain([&EOS]) {
            lp += self.prob(&h, g).ln();
            h = self.next_history(&h, g);
        }
        lp
    }

    /// Every history with counts, at every order.
    pub fn histories(&self) -> Vec<Vec<u32>> {
        let mut hs: Vec<Vec<u32>> = self.counts.iter().flat_map(|t| t.keys().cloned()).collect();
        hs.sort();
        hs
    }

    /// `sum_g p(g | history)` over the predicted set.
    pub fn mass(&self, history: &[u32]) -> f64 {
        self.predicted().map(|g| self.prob(history, g)).sum()
    }

    fn token_text(&self, id: u32) -> String {
        match id {
            BOS => "<s>".to_string(),
            EOS => "</s>".to_string(),
            _ => self.graphone(id).map(|g| g.to_string()).unwrap_or_default(),
        }
    }

    pub fn serialize(&self) -> String {
        let mut out = format!(
            "{HEADER}\norder {}\nlengths {} {}\ndiscounts",
            self.order, self.max_letters, self.max_phones
        );
        for d in &self.discounts {
            let _ = write!(out, " {d}");
        }
        let _ = writeln!(out, "\ngraphones {}", self.graphones.len());
        for g in &self.graphones {
            let _ = writeln!(out, "{g}");
        }
        for table in &self.counts {
            let mut hs: Vec<&Vec<u32>> = table.keys().collect();
            hs.sort();
            for h in hs {
                let ht = if h.is_empty() {
                    "-".to_string()
                } else {
                    h.iter().map(|&t| self.token_text(t)).collect::<Vec<_>>().join(" ")
                };
                for (&g, c) in &table[h].next {
                    let _ = writeln!(out, "{ht}\t{}\t{c}", self.token_text(g));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, G2pError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: &str| G2pError::Parse {
            line,
            message: message.to_string(),
        };
        let mut field = |key: &str| -> Result<(usize, Vec<String>), G2pError> {
            let (n, l) = lines.next().ok_or_else(|| err(0, "unexpected end of model"))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(err(n, &format!("expected {key}")));
            }
            Ok((n, parts.map(str::to_string).collect()))
        };
        let num = |n: usize, s: &str| s.parse::<f64>().map_err(|_| err(n, "bad number"));
        let (_, version) = field("gop-forge-g2p")?;
        if version != ["1"] {
            return Err(err(1, "unsupported model version"));
        }
        let (n, v) = field("order")?;
        let order = match v.as_slice() {
            [o] => num(n, o)? as usize,
            _ => return Err(err(n, "bad order")),
        };
        if order == 0 {
            return Err(err(n, "order must be positive"));
        }
        let (n, v) = field("lengths")?;
        let (max_letters, max_phones) = match v.as_slice() {
            [a, b] => (num(n, a)? as usize, num(n, b)? as usize),
            _ => return Err(err(n, "bad lengths")),
        };
        let (n, v) = field("discounts")?;
        let discounts = v.iter().map(|d| num(n, d)).collect::<Result<Vec<_>, _>>()?;
        let (n, v) = field("graphones")?;
        let count = match v.as_slice() {
            [c] => num(n, c)? as usize,
            _ => return Err(err(n, "bad graphone count")),
        };
        let mut inventory = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, l) = lines.next().ok_or_else(|| err(0, "unexpected end of model"))?;
            inventory.push(Graphone::parse(l).ok_or_else(|| err(n, "bad graphone"))?);
        }
        let mut model = Self::new(order, max_letters, max_phones, inventory);
        let token = |n: usize, s: &str| match s {
            "<s>" => Ok(BOS),
            "</s>" => Ok(EOS),
            _ => Graphone::parse(s)
                .and_then(|g| model.id(&g))
                .ok_or_else(|| err(n, &format!("unknown token {s}"))),
        };
        let mut counts: CountTable = vec![HashMap::new(); order];
        for (n, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').collect();
            let [h, g, c] = cols.as_slice() else {
                return Err(err(n, "expected history<TAB>graphone<TAB>count"));
            };
            let h = if *h == "-" {
                Vec::new()
            } else {
                h.split(' ').map(|t| token(n, t)).collect::<Result<Vec<_>, _>>()?
            };
            if h.len() >= order {
                return Err(err(n, "history longer than the order allows"));
            }
            let g = token(n, g)?;
            counts[h.len()].entry(h).or_default().next.insert(g, num(n, c)?);
        }
        model.set_counts(counts);
        model.set_discounts(&discounts)?;
        Ok(model)
    }
}
