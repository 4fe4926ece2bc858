//! Matched versus mismatched phone labels on synthetic frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acoustic::{AcousticModel, FeatureMatrix, Gmm, Matrix};
use crate::gop::{score_phone, EntryTransition};

use super::Check;

pub fn matched_below_mismatched(seed: u64, trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (phones, k, dim) = (5, 3, 3);
    let name = "gop: matched labels score lower than mismatched in at least 95% of trials";
    let mut wins = 0;
    for _ in 0..trials {
        let am = AcousticModel {
            phones: (0..phones).map(|p| format!("P{p}")).collect(),
            states_per_phone: k,
            gmms: (0..phones * k)
                .map(|_| Gmm::single((0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect(), vec![1.0; dim]))
                .collect(),
            self_loop: vec![0.6; phones * k],
            transition_floor: 1e-10,
        };
        let p = rng.gen_range(0..phones);
        let q = (p + rng.gen_range(1..phones)) % phones;
        let mut rows = Vec::new();
        let mut states = Vec::new();
        for j in 0..k {
            let s = am.senone(p, j);
            for _ in 0..rng.gen_range(2..=5) {
                rows.push(
                    am.gmms[s].means[0]
                        .iter()
                        .map(|m| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            m + z
                        })
                        .collect(),
                );
                states.push(j);
            }
        }
        let features = FeatureMatrix {
            data: Matrix::from_rows(rows),
            frame_shift: 0.01,
            frame_length: 0.025,
        };
        let post = match am.posteriors(&features) {
            Ok(x) => x,
            Err(e) => return Check::new(name, Some(e.to_string()), String::new()),
        };
        let label = |phone: usize| states.iter().map(|&j| am.senone(phone, j)).collect::<Vec<_>>();
        let matched = score_phone(&label(p), 0, &post, &am, EntryTransition::Uniform);
        let mismatched = score_phone(&label(q), 0, &post, &am, EntryTransition::Uniform);
        match (matched, mismatched) {
            (Ok(m), Ok(w)) if m < w => wins += 1,
            (Ok(_), Ok(_)) => {}
            (Err(e), _) | (_, Err(e)) => return Check::new(name, Some(e.to_string()), String::new()),
        }
    }
    let detail = format!("matched lower in {wins}/{trials} trials");
    Check::new(name, (wins * 100 < 95 * trials).then(|| detail.clone()), detail)
}
