//! Flat-start Viterbi training of the monophone model.
//!
//! Every utterance is a linear chain of senones given by its phone
//! transcript. The flat start estimates from a uniform segmentation, a few
//! forward-backward passes move the states apart, and Viterbi iterations
//! follow. Each Viterbi iteration realigns, records the alignment
//! log-likelihood (emissions plus transitions, including the final exit)
//! and re-estimates; the recorded sequence cannot decrease between mixture
//! splits.

use super::features::FeatureMatrix;
use super::model::{log_sum_exp, AcousticModel, Gmm, DEFAULT_TRANSITION_FLOOR};
use super::AcousticError;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub states_per_phone: usize,
    pub iterations: usize,
    /// Components per senone reached by splitting; 1 disables splitting.
    pub max_gaussians: usize,
    pub variance_floor: f64,
    /// Forward-backward iterations between the flat start and Viterbi
    /// training.
    pub soft_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            states_per_phone: 3,
            iterations: 10,
            max_gaussians: 1,
            variance_floor: 1e-3,
            soft_iterations: 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Alignment log-likelihood after each realignment.
    pub log_likelihoods: Vec<f64>,
    /// Indices into `log_likelihoods` measured right after a mixture split.
    pub split_points: Vec<usize>,
    /// Senones that received no frames and kept their initial parameters.
    pub unseen_senones: Vec<usize>,
}

const MIN_PROB: f64 = 1e-3;

/// Uniform segmentation: frame `t` of `frames` goes to state
/// `floor(t * states / frames)`.
pub fn uniform_segmentation(frames: usize, states: usize) -> Vec<usize> {
    (0..frames).map(|t| t * states / frames).collect()
}

/// Best left-to-right path through `chain` (senone ids); returns the
/// per-frame chain position and the path log-likelihood.
pub fn viterbi_chain(model: &AcousticModel, loglik: &super::Matrix, chain: &[usize]) -> Option<(Vec<usize>, f64)> {
    let t_len = loglik.rows();
    let m = chain.len();
    if m == 0 || t_len < m {
        return None;
    }
    let ln_self: Vec<f64> = chain.iter().map(|&s| model.self_loop[s].ln()).collect();
    let ln_fwd: Vec<f64> = chain.iter().map(|&s| model.forward_prob(s).ln()).collect();
    let mut delta = vec![f64::NEG_INFINITY; m];
    let mut back = vec![vec![0u8; m]; t_len];
    delta[0] = loglik.get(0, chain[0]);
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; m];
        // position i is reachable at frame t only if i <= t and the rest fits
        let lo = (m + t).saturating_sub(t_len);
        for i in lo..m.min(t + 1) {
            let stay = delta[i] + ln_self[i];
            let moved = if i > 0 {
                delta[i - 1] + ln_fwd[i - 1]
            } else {
                f64::NEG_INFINITY
            };
            let (best, from) = if moved > stay { (moved, 1) } else { (stay, 0) };
            next[i] = best + loglik.get(t, chain[i]);
            back[t][i] = from;
        }
        delta = next;
    }
    let score = delta[m - 1] + ln_fwd[m - 1];
    if !score.is_finite() {
        return None;
    }
    let mut path = vec![0; t_len];
    let mut i = m - 1;
    for t in (0..t_len).rev() {
        path[t] = i;
        if t > 0 && back[t][i] == 1 {
            i -= 1;
        }
    }
    Some((path, score))
}

/// Log-likelihood of a fixed alignment of `chain` positions.
pub fn alignment_loglik(model: &AcousticModel, loglik: &super::Matrix, chain: &[usize], path: &[usize]) -> f64 {
    let mut total = 0.0;
    for (t, &i) in path.iter().enumerate() {
        total += loglik.get(t, chain[i]);
        if t + 1 < path.len() {
            let s = chain[i];
            total += if path[t + 1] == i {
                model.self_loop[s].ln()
            } else {
                model.forward_prob(s).ln()
            };
        }
    }
    total + model.forward_prob(chain[*path.last().unwrap()]).ln()
}

/// Sufficient statistics per senone and component.
struct Accumulator {
    occ: Vec<Vec<f64>>,
    sum: Vec<Vec<Vec<f64>>>,
    sq: Vec<Vec<Vec<f64>>>,
    self_count: Vec<f64>,
    fwd_count: Vec<f64>,
}

impl Accumulator {
    fn new(model: &AcousticModel) -> Self {
        let dim = model.dim();
        let comps = |g: &Gmm| g.num_components();
        Self {
            occ: model.gmms.iter().map(|g| vec![0.0; comps(g)]).collect(),
            sum: model.gmms.iter().map(|g| vec![vec![0.0; dim]; comps(g)]).collect(),
            sq: model.gmms.iter().map(|g| vec![vec![0.0; dim]; comps(g)]).collect(),
            self_count: vec![0.0; model.num_senones()],
            fwd_count: vec![0.0; model.num_senones()],
        }
    }

    /// Adds frame `x` to senone `s` with occupancy `gamma`, split over the
    /// mixture components by their posteriors.
    fn add_frame(&mut self, model: &AcousticModel, s: usize, x: &[f64], gamma: f64) {
        let g = &model.gmms[s];
        let resp: Vec<f64> = if g.num_components() == 1 {
            vec![1.0]
        } else {
            let terms: Vec<f64> = (0..g.num_components())
                .map(|c| g.weights[c].ln() + g.component_log_density(c, x))
                .collect();
            let norm = log_sum_exp(&terms);
            terms.iter().map(|t| (t - norm).exp()).collect()
        };
        for (c, r) in resp.into_iter().enumerate() {
            let w = gamma * r;
            self.occ[s][c] += w;
            for (d, v) in x.iter().enumerate() {
                self.sum[s][c][d] += w * v;
                self.sq[s][c][d] += w * v * v;
            }
        }
    }

    fn add_hard(&mut self, model: &AcousticModel, f: &FeatureMatrix, chain: &[usize], path: &[usize]) {
        for (t, &i) in path.iter().enumerate() {
            let s = chain[i];
            self.add_frame(model, s, f.data.row(t), 1.0);
            if t + 1 < path.len() && path[t + 1] == i {
                self.self_count[s] += 1.0;
            } else {
                self.fwd_count[s] += 1.0;
            }
        }
    }

    /// Forward-backward over the chain.
    fn add_soft(&mut self, model: &AcousticModel, f: &FeatureMatrix, chain: &[usize]) -> Result<(), AcousticError> {
        let ll = model.log_likelihoods(f)?;
        let (t_len, m) = (ll.rows(), chain.len());
        let ln_self: Vec<f64> = chain.iter().map(|&s| model.self_loop[s].ln()).collect();
        let ln_fwd: Vec<f64> = chain.iter().map(|&s| model.forward_prob(s).ln()).collect();
        let ninf = f64::NEG_INFINITY;
        let mut alpha = vec![vec![ninf; m]; t_len];
        alpha[0][0] = ll.get(0, chain[0]);
        for t in 1..t_len {
            for i in 0..m {
                let stay = alpha[t - 1][i] + ln_self[i];
                let moved = if i > 0 {
                    alpha[t - 1][i - 1] + ln_fwd[i - 1]
                } else {
                    ninf
                };
                alpha[t][i] = log_sum_exp(&[stay, moved]) + ll.get(t, chain[i]);
            }
        }
        let mut beta = vec![vec![ninf; m]; t_len];
        beta[t_len - 1][m - 1] = ln_fwd[m - 1];
        for t in (0..t_len - 1).rev() {
            for i in 0..m {
                let stay = ln_self[i] + ll.get(t + 1, chain[i]) + beta[t + 1][i];
                let moved = if i + 1 < m {
                    ln_fwd[i] + ll.get(t + 1, chain[i + 1]) + beta[t + 1][i + 1]
                } else {
                    ninf
                };
                beta[t][i] = log_sum_exp(&[stay, moved]);
            }
        }
        let total = alpha[t_len - 1][m - 1] + ln_fwd[m - 1];
        if !total.is_finite() {
            return Err(AcousticError::InsufficientData("utterance has zero likelihood".into()));
        }
        for t in 0..t_len {
            for i in 0..m {
                let gamma = (alpha[t][i] + beta[t][i] - total).exp();
                if gamma < 1e-12 {
                    continue;
                }
                let s = chain[i];
                self.add_frame(model, s, f.data.row(t), gamma);
                if t + 1 < t_len {
                    let stay = alpha[t][i] + ln_self[i] + ll.get(t + 1, chain[i]) + beta[t + 1][i] - total;
                    self.self_count[s] += stay.exp();
                    if i + 1 < m {
                        let moved = alpha[t][i] + ln_fwd[i] + ll.get(t + 1, chain[i + 1]) + beta[t + 1][i + 1] - total;
                        self.fwd_count[s] += moved.exp();
                    }
                }
            }
        }
        self.fwd_count[chain[m - 1]] += 1.0;
        Ok(())
    }

    /// Maximum-likelihood update; senones without data keep their
    /// parameters. Returns the unseen senones.
    fn update(&self, model: &mut AcousticModel, floor: &[f64]) -> Vec<usize> {
        let mut unseen = Vec::new();
        for s in 0..model.num_senones() {
            let total: f64 = self.occ[s].iter().sum();
            if total < 1e-9 {
                unseen.push(s);
                continue;
            }
            let g = &mut model.gmms[s];
            for c in 0..g.num_components() {
                let occ = self.occ[s][c];
                if occ < 1e-9 {
                    continue;
                }
                g.weights[c] = occ / total;
                for d in 0..floor.len() {
                    let mean = self.sum[s][c][d] / occ;
                    g.means[c][d] = mean;
                    g.vars[c][d] = (self.sq[s][c][d] / occ - mean * mean).max(floor[d]);
                }
            }
            let norm: f64 = g.weights.iter().sum();
            g.weights.iter_mut().for_each(|w| *w /= norm);
            let p = self.self_count[s] / (self.self_count[s] + self.fwd_count[s]);
            model.self_loop[s] = p.clamp(MIN_PROB, 1.0 - MIN_PROB);
        }
        unseen
    }
}

/// Splits the heaviest component, perturbing the means by ±0.2 standard
/// deviations.
fn split(g: &Gmm) -> Gmm {
    let mut g = g.clone();
    let c = (0..g.num_components())
        .max_by(|&a, &b| g.weights[a].total_cmp(&g.weights[b]))
        .unwrap();
    let w = g.weights[c] / 2.0;
    g.weights[c] = w;
    let sd: Vec<f64> = g.vars[c].iter().map(|v| 0.2 * v.sqrt()).collect();
    let mut up = g.means[c].clone();
    up.iter_mut().zip(&sd).for_each(|(m, s)| *m += s);
    g.means[c].iter_mut().zip(&sd).for_each(|(m, s)| *m -= s);
    g.weights.push(w);
    g.means.push(up);
    g.vars.push(g.vars[c].clone());
    g
}

pub fn train_am(
    features: &[FeatureMatrix],
    transcripts: &[Vec<String>],
    phones: &[String],
    config: &TrainConfig,
) -> Result<(AcousticModel, TrainReport), AcousticError> {
    let k = config.states_per_phone;
    if k == 0 {
        return Err(AcousticError::InsufficientData(
            "states_per_phone must be positive".into(),
        ));
    }
    if features.is_empty() || features.len() != transcripts.len() {
        return Err(AcousticError::InsufficientData(format!(
            "{} feature matrices for {} transcripts",
            features.len(),
            transcripts.len()
        )));
    }
    let dim = features[0].dim();
    let mut chains = Vec::with_capacity(features.len());
    for (i, (f, tr)) in features.iter().zip(transcripts).enumerate() {
        if f.dim() != dim {
            return Err(AcousticError::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
        let mut chain = Vec::new();
        for p in tr {
            let pi = phones
                .iter()
                .position(|q| q == p)
                .ok_or_else(|| AcousticError::UnknownPhone(p.clone()))?;
            chain.extend((0..k).map(|j| pi * k + j));
        }
        if chain.is_empty() || f.num_frames() < chain.len() {
            return Err(AcousticError::InsufficientData(format!(
                "utterance {i} has {} frames for {} HMM states",
                f.num_frames(),
                chain.len()
            )));
        }
        chains.push(chain);
    }

    let all: Vec<&[f64]> = features.iter().flat_map(|f| f.data.iter_rows()).collect();
    let n = all.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in &all {
        mean.iter_mut().zip(*x).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; dim];
    for x in &all {
        var.iter_mut()
            .zip(x.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
    }
    let floor: Vec<f64> = var.iter().map(|v| (v * config.variance_floor).max(1e-12)).collect();
    let global_var: Vec<f64> = var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();

    let num_senones = phones.len() * k;
    let mut model = AcousticModel {
        phones: phones.to_vec(),
        states_per_phone: k,
        gmms: vec![Gmm::single(mean, global_var); num_senones],
        self_loop: vec![0.5; num_senones],
        transition_floor: DEFAULT_TRANSITION_FLOOR,
    };
    let mut report = TrainReport::default();

    let mut acc = Accumulator::new(&model);
    for (f, chain) in features.iter().zip(&chains) {
        acc.add_hard(&model, f, chain, &uniform_segmentation(f.num_frames(), chain.len()));
    }
    report.unseen_senones = acc.update(&mut model, &floor);
    for _ in 0..config.soft_iterations {
        let mut acc = Accumulator::new(&model);
        for (f, chain) in features.iter().zip(&chains) {
            acc.add_soft(&model, f, chain)?;
        }
        acc.update(&mut model, &floor);
    }

    let split_start = config.iterations / 2;
    for iter in 0..config.iterations {
        let mut acc = Accumulator::new(&model);
        let mut total = 0.0;
        for (i, (f, chain)) in features.iter().zip(&chains).enumerate() {
            let ll = model.log_likelihoods(f)?;
            let (path, score) = viterbi_chain(&model, &ll, chain)
                .ok_or_else(|| AcousticError::InsufficientData(format!("utterance {i} cannot be aligned")))?;
            acc.add_hard(&model, f, chain, &path);
            total += score;
        }
        report.log_likelihoods.push(total);
        acc.update(&mut model, &floor);
        if iter >= split_start && iter + 1 < config.iterations {
            let mut did_split = false;
            for s in 0..num_senones {
                if model.gmms[s].num_components() < config.max_gaussians && !report.unseen_senones.contains(&s) {
                    model.gmms[s] = split(&model.gmms[s]);
                    did_split = true;
                }
            }
            if did_split {
                report.split_points.push(iter + 1);
            }
        }
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::Matrix;

    fn feats(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix {
            data: Matrix::from_rows(rows),
            frame_shift: 0.01,
            frame_length: 0.025,
        }
    }

    #[test]
    fn flat_start_splits_evenly() {
        assert_eq!(uniform_segmentation(9, 3), vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn viterbi_chain_matches_exhaustive_search() {
        let m = crate::acoustic::model::tests::two_phone_model();
        let f = feats(vec![
            vec![0.1, 0.0],
            vec![9.0, 0.5],
            vec![10.0, -0.2],
            vec![0.0, 9.0],
            vec![10.0, 10.0],
        ]);
        let ll = m.log_likelihoods(&f).unwrap();
        let chain = [0, 1, 2, 3];
        let (path, score) = viterbi_chain(&m, &ll, &chain).unwrap();
        // every monotone path that visits each position
        let mut best = f64::NEG_INFINITY;
        for cut in 0..4u32.pow(5) {
            let p: Vec<usize> = (0..5).map(|t| (cut / 4u32.pow(t)) as usize % 4).collect();
            let ok = p[0] == 0 && p[4] == 3 && p.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1);
            if ok {
                best = best.max(alignment_loglik(&m, &ll, &chain, &p));
            }
        }
        assert!((score - best).abs() < 1e-9);
        assert!((alignment_loglik(&m, &ll, &chain, &path) - score).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_utterances_and_unknown_phones() {
        let phones = vec!["A".to_string()];
        let f = vec![feats(vec![vec![0.0]; 2])];
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_am(&f, &[vec!["A".into()]], &phones, &cfg),
            Err(AcousticError::InsufficientData(_))
        ));
        assert!(matches!(
            train_am(&f, &[vec!["B".into()]], &phones, &cfg),
            Err(AcousticError::UnknownPhone(_))
        ));
    }

    #[test]
    fn splitting_reaches_the_requested_size() {
        let rows: Vec<Vec<f64>> = (0..60).map(|t| vec![(t % 7) as f64, (t % 3) as f64]).collect();
        let cfg = TrainConfig {
            states_per_phone: 1,
            iterations: 8,
            max_gaussians: 3,
            ..Default::default()
        };
        let (m, r) = train_am(&[feats(rows)], &[vec!["A".into()]], &["A".into()], &cfg).unwrap();
        assert_eq!(m.gmms[0].num_components(), 3);
        assert_eq!(r.split_points.len(), 2);
        let w: f64 = m.gmms[0].weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }
}
