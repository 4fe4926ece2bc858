//! Graphone model checks on a 20-entry toy lexicon.

use crate::g2p::{decode, phone_error_rate, train, G2pConfig, UNBOUNDED_BEAM};
use crate::lexicon::{parse_lexicon, SpecialWords};

use super::Check;

pub const TOY_G2P_LEXICON: &str = "\
BAT B AE T
BET B EH T
BIN B IH N
BIT B IH T
CAB K AE B
CAT K AE T
HAT HH AE T
HEN HH EH N
HIT HH IH T
MAT M AE T
MEN M EH N
NET N EH T
SAT S AE T
SET S EH T
SIN S IH N
SIT S IH T
STAB S T AE B
TAB T AE B
TEN T EH N
TIN T IH N
";

/// Normalization of every history, EM monotonicity, and 1-best phone
/// error rate on the training words.
pub fn toy_lexicon(cfg: &G2pConfig) -> Vec<Check> {
    let names = [
        "g2p: smoothed distributions sum to 1 within 1e-9",
        "g2p: EM log-likelihood is non-decreasing within 1e-10",
        "g2p: training-set 1-best phone error rate is 0 with an unbounded beam",
    ];
    let lex = parse_lexicon(TOY_G2P_LEXICON).expect("toy lexicon parses");
    let (model, report) = match train(&lex, &SpecialWords::default(), cfg) {
        Ok(x) => x,
        Err(e) => {
            return names
                .iter()
                .map(|n| Check::new(n, Some(e.to_string()), String::new()))
                .collect()
        }
    };

    let mut histories = model.histories();
    histories.push(vec![u32::MAX - 1; cfg.order.saturating_sub(1)]);
    let worst = histories
        .iter()
        .map(|h| (model.mass(h) - 1.0).abs())
        .fold(0.0, f64::max);
    let norm = Check::new(
        names[0],
        (worst > 1e-9).then(|| format!("worst deviation {worst:e}")),
        format!("{} histories, worst deviation {worst:.1e}", histories.len()),
    );

    let lls = &report.log_likelihoods;
    let drop = lls.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let mono = Check::new(
        names[1],
        (drop > 1e-10).then(|| format!("likelihood dropped by {drop:e}")),
        format!(
            "{} iterations, {:.4} -> {:.4}",
            lls.len(),
            lls.first().copied().unwrap_or(0.0),
            lls.last().copied().unwrap_or(0.0)
        ),
    );

    let mut pairs = Vec::new();
    let mut failure = None;
    for e in lex.entries() {
        match decode(&model, &e.word, UNBOUNDED_BEAM, 1) {
            Ok(h) => pairs.push((h[0].pron.clone(), e.pron.clone())),
            Err(err) => {
                failure = Some(err.to_string());
                break;
            }
        }
    }
    let per = phone_error_rate(pairs.iter().map(|(h, r)| (h.as_slice(), r.as_slice())));
    let per_check = Check::new(
        names[2],
        failure.or_else(|| (per > 0.0).then(|| format!("PER {:.2}%", per * 100.0))),
        format!("PER {:.2}% over {} words", per * 100.0, pairs.len()),
    );
    vec![norm, mono, per_check]
}

#[cfg(test)]
mod tests {
    #[test]
    fn toy_lexicon_passes() {
        for c in super::toy_lexicon(&Default::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
            eprintln!("{}: {}", c.name, c.detail);
        }
    }
}
