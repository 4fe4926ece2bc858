use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::lattice::{expected_counts, pair_graphones, Lattice};
use super::model::GraphoneModel;
use super::G2pError;
use crate::lexicon::{Lexicon, SpecialWords, SIL_PHONE, SPN_PHONE};

#[derive(Debug, Clone, PartialEq)]
pub struct G2pConfig {
    pub order: usize,
    pub max_letters: usize,
    pub max_phones: usize,
    pub max_iterations: usize,
    /// Stop when the per-entry log-likelihood gain falls below this.
    pub tolerance: f64,
    /// Estimate discounts on a held-out tenth of the entries.
    pub estimate_discounts: bool,
    /// Graphones whose final expected count is below this are dropped.
    pub min_count: f64,
}

impl Default for G2pConfig {
    fn default() -> Self {
        Self {
            order: 3,
            max_letters: 2,
            max_phones: 2,
            max_iterations: 50,
            tolerance: 1e-9,
            estimate_discounts: true,
            min_count: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Training-set log-likelihood before each M-step of the final EM run.
    pub log_likelihoods: Vec<f64>,
    pub heldout_entries: usize,
    pub discounts: Vec<f64>,
}

/// Held-out membership from a hash of the entry index.
fn is_heldout(index: usize) -> bool {
    Sha256::digest((index as u64).to_le_bytes())[0] % 10 == 0
}

/// EM from the uniform model; returns the trained model and the
/// likelihood before each update.
fn run_em(template: &GraphoneModel, lattices: &[Lattice], cfg: &G2pConfig) -> (GraphoneModel, Vec<f64>) {
    let mut model = template.clone();
    let mut lls: Vec<f64> = Vec::new();
    for _ in 0..cfg.max_iterations.max(1) {
        let (counts, ll) = expected_counts(&model, lattices);
        model.set_counts(counts);
        let converged = lls
            .last()
            .is_some_and(|&prev| ll - prev <= cfg.tolerance * lattices.len() as f64);
        lls.push(ll);
        if converged {
            break;
        }
    }
    (model, lls)
}

/// Maximizes `f` on `[lo, hi]` by golden-section search.
fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)]
        .into_iter()
        .fold((lo, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
        .0
}

fn estimate_discounts(model: &GraphoneModel, heldout: &[Lattice]) -> Vec<f64> {
    // start inside the interval: with any d_m = 0 unseen events get no mass
    let hi: Vec<f64> = (1..=model.order()).map(|m| model.max_count(m).min(1.0)).collect();
    let mut d: Vec<f64> = hi.iter().map(|h| h / 2.0).collect();
    let mut trial = model.clone();
    for _sweep in 0..2 {
        for m in 0..model.order() {
            let ll = |x: f64| {
                let mut dd = d.clone();
                dd[m] = x;
                trial.set_discounts(&dd).expect("one discount per order");
                heldout.iter().map(|l| l.log_likelihood(&trial)).sum::<f64>()
            };
            d[m] = golden_max(ll, 0.0, hi[m]);
        }
    }
    d
}

/// Trains on the regular entries of `lexicon`; special words and entries
/// using silence phones are skipped.
pub fn train(
    lexicon: &Lexicon,
    specials: &SpecialWords,
    cfg: &G2pConfig,
) -> Result<(GraphoneModel, TrainReport), G2pError> {
    if cfg.order == 0 || cfg.max_letters == 0 || cfg.max_phones == 0 {
        return Err(G2pError::Config("order and graphone lengths must be positive".into()));
    }
    let pairs: BTreeSet<(&str, &[String])> = lexicon
        .entries()
        .iter()
        .filter(|e| !specials.contains(&e.word) && !e.word.is_empty())
        .filter(|e| !e.pron.iter().any(|p| p == SIL_PHONE || p == SPN_PHONE))
        .map(|e| (e.word.as_str(), e.pron.as_slice()))
        .collect();
    if pairs.is_empty() {
        return Err(G2pError::EmptyTrainingSet);
    }
    let mut inventory = Vec::new();
    for &(w, p) in &pairs {
        let letters: Vec<char> = w.chars().collect();
        let gs = pair_graphones(&letters, p, cfg.max_letters, cfg.max_phones);
        if gs.is_empty() {
            return Err(G2pError::NoValidSegmentation { word: w.to_string() });
        }
        inventory.extend(gs);
    }
    let template = GraphoneModel::new(cfg.order, cfg.max_letters, cfg.max_phones, inventory);
    let lattices = pairs
        .iter()
        .map(|&(w, p)| Lattice::build(&template, w, p))
        .collect::<Result<Vec<_>, _>>()?;

    let (train_idx, heldout_idx): (Vec<usize>, Vec<usize>) = (0..lattices.len()).partition(|&i| !is_heldout(i));
    let (discounts, heldout_entries) = if cfg.estimate_discounts && !train_idx.is_empty() && !heldout_idx.is_empty() {
        let pick = |idx: &[usize]| idx.iter().map(|&i| lattices[i].clone()).collect::<Vec<_>>();
        let (partial, _) = run_em(&template, &pick(&train_idx), cfg);
        (estimate_discounts(&partial, &pick(&heldout_idx)), heldout_idx.len())
    } else {
        (vec![0.0; cfg.order], 0)
    };
    let (mut model, log_likelihoods) = run_em(&template, &lattices, cfg);
    model.set_discounts(&discounts)?;
    let model = model.pruned(cfg.min_count);
    let report = TrainReport {
        log_likelihoods,
        heldout_entries,
        discounts: model.discounts().to_vec(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_the_peak() {
        let x = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-6);
        assert_eq!(golden_max(|x| x, 0.0, 1.0), 1.0);
    }

    #[test]
    fn split_is_deterministic_and_about_a_tenth() {
        let held = (0..1000).filter(|&i| is_heldout(i)).count();
        assert!((60..=140).contains(&held), "{held}");
        assert_eq!(is_heldout(17), is_heldout(17));
    }
}
