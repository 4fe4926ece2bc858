//! Synthetic HMM data with known parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acoustic::{train_am, FeatureMatrix, Matrix, TrainConfig};

use super::Check;

pub struct SyntheticCorpus {
    pub phones: Vec<String>,
    pub states_per_phone: usize,
    pub means: Vec<Vec<f64>>,
    pub self_loop: Vec<f64>,
    pub features: Vec<FeatureMatrix>,
    pub transcripts: Vec<Vec<String>>,
}

/// Two phones, three states each, unit-variance Gaussians six standard
/// deviations apart, durations drawn from the self-loop probabilities.
pub fn two_phone_corpus(seed: u64, utterances: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phones = vec!["A".to_string(), "B".to_string()];
    let k = 3;
    let means: Vec<Vec<f64>> = (0..6).map(|s| vec![6.0 * s as f64, -3.0 * s as f64]).collect();
    let self_loop = vec![0.6, 0.7, 0.8, 0.5, 0.65, 0.75];
    let mut features = Vec::new();
    let mut transcripts = Vec::new();
    for _ in 0..utterances {
        let len = rng.gen_range(3..=6);
        let tr: Vec<usize> = (0..len).map(|_| rng.gen_range(0..2)).collect();
        let mut rows = Vec::new();
        for &p in &tr {
            for j in 0..k {
                let s = p * k + j;
                loop {
                    let row: Vec<f64> = means[s]
                        .iter()
                        .map(|m| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            m + z
                        })
                        .collect();
                    rows.push(row);
                    if !rng.gen_bool(self_loop[s]) {
                        break;
                    }
                }
            }
        }
        features.push(FeatureMatrix {
            data: Matrix::from_rows(rows),
            frame_shift: 0.01,
            frame_length: 0.025,
        });
        transcripts.push(tr.iter().map(|&p| phones[p].clone()).collect());
    }
    SyntheticCorpus {
        phones,
        states_per_phone: k,
        means,
        self_loop,
        features,
        transcripts,
    }
}

/// Trains on the synthetic corpus and compares with the generating model.
pub fn parameter_recovery(seed: u64) -> Check {
    let c = two_phone_corpus(seed, 300);
    let cfg = TrainConfig {
        states_per_phone: c.states_per_phone,
        iterations: 8,
        ..Default::default()
    };
    let name = "acoustic: parameter recovery (means 0.1, self-loops 0.05), monotone likelihood, normalized posteriors";
    let (model, report) = match train_am(&c.features, &c.transcripts, &c.phones, &cfg) {
        Ok(x) => x,
        Err(e) => return Check::new(name, Some(e.to_string()), String::new()),
    };
    let mut worst_mean: f64 = 0.0;
    let mut worst_loop: f64 = 0.0;
    for s in 0..c.means.len() {
        for (a, b) in model.gmms[s].means[0].iter().zip(&c.means[s]) {
            worst_mean = worst_mean.max((a - b).abs());
        }
        worst_loop = worst_loop.max((model.self_loop[s] - c.self_loop[s]).abs());
    }
    let drop = report
        .log_likelihoods
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut worst_row: f64 = 0.0;
    for f in &c.features[..20] {
        let p = model.posteriors(f).expect("dimension matches");
        for row in p.data.iter_rows() {
            worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let failure = if worst_mean > 0.1 {
        Some(format!("mean error {worst_mean:.4} exceeds 0.1"))
    } else if worst_loop > 0.05 {
        Some(format!("self-loop error {worst_loop:.4} exceeds 0.05"))
    } else if drop > 1e-8 {
        Some(format!("training likelihood dropped by {drop:e}"))
    } else if worst_row > 1e-6 {
        Some(format!("posterior row sum off by {worst_row:e}"))
    } else {
        None
    };
    Check::new(
        name,
        failure,
        format!(
            "max mean error {worst_mean:.4}, max self-loop error {worst_loop:.4}, max row-sum error {worst_row:.1e}"
        ),
    )
}
