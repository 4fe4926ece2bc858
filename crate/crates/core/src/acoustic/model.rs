use std::f64::consts::PI;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::features::FeatureMatrix;
use super::{AcousticError, Matrix};
use crate::wfst::HmmTopologyView;

pub const MODEL_HEADER: &str = "gop-forge-am 1";
pub const DEFAULT_TRANSITION_FLOOR: f64 = 1e-10;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl Gmm {
    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Self {
        Self {
            weights: vec![1.0],
            means: vec![mean],
            vars: vec![var],
        }
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn component_log_density(&self, c: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xi, m), v) in x.iter().zip(&self.means[c]).zip(&self.vars[c]) {
            acc += (2.0 * PI * v).ln() + (xi - m).powi(2) / v;
        }
        -0.5 * acc
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        if self.weights.len() == 1 {
            return self.component_log_density(0, x);
        }
        let terms: Vec<f64> = (0..self.weights.len())
            .map(|c| self.weights[c].ln() + self.component_log_density(c, x))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Rows are `P(s | o_t)` over all senones.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    pub data: Matrix,
}

impl PosteriorMatrix {
    pub fn num_frames(&self) -> usize {
        self.data.rows()
    }

    pub fn get(&self, t: usize, senone: usize) -> f64 {
        self.data.get(t, senone)
    }
}

/// Monophone left-to-right GMM-HMM. Senone `p * k + j` is state `j` of
/// phone `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticModel {
    pub phones: Vec<String>,
    pub states_per_phone: usize,
    pub gmms: Vec<Gmm>,
    /// Self-loop probability per senone; the forward probability is the
    /// complement.
    pub self_loop: Vec<f64>,
    /// Probability used for transitions outside the topology.
    pub transition_floor: f64,
}

impl AcousticModel {
    pub fn num_senones(&self) -> usize {
        self.phones.len() * self.states_per_phone
    }

    pub fn dim(&self) -> usize {
        self.gmms.first().map_or(0, Gmm::dim)
    }

    pub fn phone_index(&self, phone: &str) -> Option<usize> {
        self.phones.iter().position(|p| p == phone)
    }

    pub fn senone(&self, phone: usize, state: usize) -> usize {
        phone * self.states_per_phone + state
    }

    /// `(phone index, state index)` of a senone.
    pub fn split_senone(&self, senone: usize) -> (usize, usize) {
        (senone / self.states_per_phone, senone % self.states_per_phone)
    }

    pub fn senone_name(&self, senone: usize) -> String {
        let (p, j) = self.split_senone(senone);
        crate::wfst::builders::senone_symbol(&self.phones[p], j)
    }

    pub fn forward_prob(&self, senone: usize) -> f64 {
        1.0 - self.self_loop[senone]
    }

    fn check_dim(&self, features: &FeatureMatrix) -> Result<(), AcousticError> {
        if features.dim() != self.dim() {
            return Err(AcousticError::DimensionMismatch {
                expected: self.dim(),
                found: features.dim(),
            });
        }
        Ok(())
    }

    /// `T x N` matrix of `log p(o_t | s)`.
    pub fn log_likelihoods(&self, features: &FeatureMatrix) -> Result<Matrix, AcousticError> {
        self.check_dim(features)?;
        let mut out = Matrix::zeros(features.num_frames(), self.num_senones());
        for (t, x) in features.data.iter_rows().enumerate() {
            for (s, g) in self.gmms.iter().enumerate() {
                out.set(t, s, g.log_likelihood(x));
            }
        }
        Ok(out)
    }

    /// Posteriors under a uniform senone prior.
    pub fn posteriors(&self, features: &FeatureMatrix) -> Result<PosteriorMatrix, AcousticError> {
        let mut ll = self.log_likelihoods(features)?;
        for t in 0..ll.rows() {
            let row = ll.row_mut(t);
            let norm = log_sum_exp(row);
            row.iter_mut().for_each(|v| *v = (*v - norm).exp());
        }
        Ok(PosteriorMatrix { data: ll })
    }

    /// Log-probability of moving from `from` to `to` in one frame. Within a
    /// phone: self-loop or forward to the next state. From the last state
    /// of a phone to the first state of any phone: the forward probability
    /// spread uniformly over the phones. Anything else gets the floor.
    pub fn transition_logprob(&self, from: usize, to: usize) -> Result<f64, AcousticError> {
        let n = self.num_senones();
        for s in [from, to] {
            if s >= n {
                return Err(AcousticError::UnknownSenone(s));
            }
        }
        let k = self.states_per_phone;
        let (pf, jf) = self.split_senone(from);
        let (pt, jt) = self.split_senone(to);
        let p = if from == to {
            self.self_loop[from]
        } else if pf == pt && jt == jf + 1 {
            self.forward_prob(from)
        } else if jf == k - 1 && jt == 0 {
            self.forward_prob(from) * self.entry_prob()
        } else {
            self.transition_floor
        };
        Ok(p.max(self.transition_floor).ln())
    }

    /// Probability of entering any given phone: uniform.
    pub fn entry_prob(&self) -> f64 {
        1.0 / self.phones.len() as f64
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "phones {}", self.phones.join(" "));
        let _ = writeln!(out, "states-per-phone {}", self.states_per_phone);
        let _ = writeln!(out, "dim {}", self.dim());
        let _ = writeln!(out, "transition-floor {}", self.transition_floor);
        for (s, g) in self.gmms.iter().enumerate() {
            let _ = writeln!(
                out,
                "senone {} {} self-loop {} components {}",
                s,
                self.senone_name(s),
                self.self_loop[s],
                g.num_components()
            );
            for c in 0..g.num_components() {
                let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
                let _ = writeln!(
                    out,
                    "{} [ {} ] [ {} ]",
                    g.weights[c],
                    join(&g.means[c]),
                    join(&g.vars[c])
                );
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AcousticError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: &str| AcousticError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(usize::MAX - 1, &format!("missing {what}")))
        };
        let (i, header) = next("header")?;
        if header.trim() != MODEL_HEADER {
            return Err(err(i, "not a gop-forge acoustic model"));
        }
        let mut field = |name: &str| -> Result<(usize, String), AcousticError> {
            let (i, l) = next(name)?;
            l.strip_prefix(name)
                .map(|v| (i, v.trim().to_string()))
                .ok_or_else(|| err(i, &format!("expected `{name}`")))
        };
        let (_, phones) = field("phones")?;
        let phones: Vec<String> = phones.split_whitespace().map(String::from).collect();
        let num = |(i, v): (usize, String)| v.parse::<f64>().map_err(|_| err(i, "bad number"));
        let k = num(field("states-per-phone")?)? as usize;
        let dim = num(field("dim")?)? as usize;
        let floor = num(field("transition-floor")?)?;
        let mut gmms = Vec::new();
        let mut self_loop = Vec::new();
        for s in 0..phones.len() * k {
            let (i, line) = next("senone")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 || f[0] != "senone" || f[1] != s.to_string() {
                return Err(err(i, &format!("expected senone {s}")));
            }
            self_loop.push(f[4].parse::<f64>().map_err(|_| err(i, "bad self-loop"))?);
            let comps: usize = f[6].parse().map_err(|_| err(i, "bad component count"))?;
            let mut g = Gmm {
                weights: vec![],
                means: vec![],
                vars: vec![],
            };
            for _ in 0..comps {
                let (i, line) = next("component")?;
                let parts: Vec<&str> = line.split(['[', ']']).map(str::trim).collect();
                if parts.len() != 5 {
                    return Err(err(i, "expected `weight [ mean ] [ var ]`"));
                }
                let vec = |s: &str| {
                    s.split_whitespace()
                        .map(|v| v.parse::<f64>().map_err(|_| err(i, "bad number")))
                        .collect::<Result<Vec<_>, _>>()
                };
                g.weights.push(parts[0].parse().map_err(|_| err(i, "bad weight"))?);
                let (m, v) = (vec(parts[1])?, vec(parts[3])?);
                if m.len() != dim || v.len() != dim {
                    return Err(err(i, "vector length does not match dim"));
                }
                g.means.push(m);
                g.vars.push(v);
            }
            gmms.push(g);
        }
        Ok(Self {
            phones,
            states_per_phone: k,
            gmms,
            self_loop,
            transition_floor: floor,
        })
    }

    /// Content hash, used to key compiled graphs.
    pub fn version(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

impl HmmTopologyView for AcousticModel {
    fn phones(&self) -> &[String] {
        &self.phones
    }

    fn states_per_phone(&self) -> usize {
        self.states_per_phone
    }

    fn self_loop_prob(&self, senone: usize) -> f64 {
        self.self_loop[senone]
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_phone_model() -> AcousticModel {
        AcousticModel {
            phones: vec!["A".into(), "B".into()],
            states_per_phone: 2,
            gmms: vec![
                Gmm::single(vec![0.0, 0.0], vec![1.0, 1.0]),
                Gmm::single(vec![10.0, 0.0], vec![1.0, 1.0]),
                Gmm::single(vec![0.0, 10.0], vec![1.0, 1.0]),
                Gmm {
                    weights: vec![0.25, 0.75],
                    means: vec![vec![10.0, 10.0], vec![-10.0, -10.0]],
                    vars: vec![vec![1.0, 2.0], vec![0.5, 1.0]],
                },
            ],
            self_loop: vec![0.5, 0.6, 0.7, 0.8],
            transition_floor: DEFAULT_TRANSITION_FLOOR,
        }
    }

    #[test]
    fn log_density_matches_formula() {
        let g = Gmm::single(vec![1.0, -1.0], vec![2.0, 0.5]);
        let x = [2.0, 0.0];
        // -0.5 * (ln(2 pi 2) + 1/2 + ln(2 pi 0.5) + 1/0.5)
        let expected = -0.5 * ((4.0 * PI).ln() + 0.5 + PI.ln() + 2.0);
        assert!((g.log_likelihood(&x) - expected).abs() < 1e-9);
    }

    #[test]
    fn posteriors_are_normalized_and_peaked() {
        let m = two_phone_model();
        let f = FeatureMatrix {
            data: Matrix::from_rows(vec![vec![0.0, 0.0], vec![3.0, -7.0], vec![10.0, 0.0]]),
            frame_shift: 0.01,
            frame_length: 0.025,
        };
        let p = m.posteriors(&f).unwrap();
        for t in 0..3 {
            let sum: f64 = p.data.row(t).iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
        assert!(p.get(0, 0) > 0.99);
        assert!(p.get(2, 1) > 0.99);
    }

    #[test]
    fn single_senone_posterior_is_one() {
        let m = AcousticModel {
            phones: vec!["A".into()],
            states_per_phone: 1,
            gmms: vec![Gmm::single(vec![0.0], vec![1.0])],
            self_loop: vec![0.5],
            transition_floor: DEFAULT_TRANSITION_FLOOR,
        };
        let f = FeatureMatrix {
            data: Matrix::from_rows(vec![vec![123.0], vec![-4.0]]),
            frame_shift: 0.01,
            frame_length: 0.025,
        };
        let p = m.posteriors(&f).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(1, 0), 1.0);
    }

    #[test]
    fn transitions() {
        let m = two_phone_model();
        assert!((m.transition_logprob(0, 0).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        assert!((m.transition_logprob(0, 1).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        // last state of A into first state of B: forward 0.4 over 2 phones
        assert!((m.transition_logprob(1, 2).unwrap() - 0.2f64.ln()).abs() < 1e-12);
        assert!((m.transition_logprob(0, 3).unwrap() - 1e-10f64.ln()).abs() < 1e-9);
        assert!(matches!(
            m.transition_logprob(0, 4),
            Err(AcousticError::UnknownSenone(4))
        ));
        for s in 0..4 {
            let sum = m.transition_logprob(s, s).unwrap().exp() + m.forward_prob(s);
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let m = two_phone_model();
        let text = m.serialize();
        assert_eq!(AcousticModel::parse(&text).unwrap(), m);
        assert_eq!(m.version().len(), 16);
    }

    #[test]
    fn dimension_mismatch() {
        let m = two_phone_model();
        let f = FeatureMatrix {
            data: Matrix::from_rows(vec![vec![0.0]]),
            frame_shift: 0.01,
            frame_length: 0.025,
        };
        assert!(matches!(
            m.posteriors(&f),
            Err(AcousticError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
