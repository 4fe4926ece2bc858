//! Brute-force oracle checks, shared by the test suites and the `selftest`
//! command.

pub mod align;
pub mod am;
pub mod g2p;
pub mod gop;
pub mod oracle;
pub mod random;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lexicon::{derive_inventory, parse_lexicon, SpecialWords};
use crate::wfst::builders::disambig_labels;
use crate::wfst::ops::{relabel_input_to_eps, remove_input_arcs};
use crate::wfst::{
    build_c, build_h, build_l, compile_hcl, compose, determinize, minimize, Fst, HmmTopologyView, LexiconGraphOptions,
    SymbolTable,
};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, failure: Option<String>, ok_detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: failure.is_none(),
            detail: failure.unwrap_or(ok_detail),
        }
    }
}

/// HMM topology with a per-senone self-loop probability, for graph tests.
#[derive(Debug, Clone)]
pub struct ToyTopology {
    pub phones: Vec<String>,
    pub states_per_phone: usize,
}

impl HmmTopologyView for ToyTopology {
    fn phones(&self) -> &[String] {
        &self.phones
    }
    fn states_per_phone(&self) -> usize {
        self.states_per_phone
    }
    fn self_loop_prob(&self, senone: usize) -> f64 {
        0.3 + 0.1 * (senone % 4) as f64
    }
}

pub const RELATION_TOL: f64 = 1e-9;

/// compose, determinize and minimize against string enumeration on
/// `count` random machines of at most 10 states.
pub fn wfst_random_machines(seed: u64, count: usize, max_len: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let third = std::sync::Arc::new(SymbolTable::from_symbols(["p", "q", "r"]));
    let failure = (0..count).find_map(|i| {
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=10);
        let a = random::transducer(&mut rng, n, random::input_symbols(), random::output_symbols());
        let b = random::transducer(&mut rng, m, random::output_symbols(), third.clone());
        let composed = match compose(&a, &b) {
            Ok(c) => c,
            Err(e) => return Some(format!("machine {i}: compose failed: {e}")),
        };
        if let Some(d) = oracle::compare_relations(
            &oracle::joined_relation(&a, &b, max_len),
            &oracle::relation(&composed, max_len),
            RELATION_TOL,
        ) {
            return Some(format!("machine {i}: compose: {d}"));
        }

        let f = random::functional(&mut rng, n);
        let det = match determinize(&f) {
            Ok(d) => d,
            Err(e) => return Some(format!("machine {i}: determinize failed: {e}")),
        };
        if !det.is_deterministic() {
            return Some(format!("machine {i}: determinize output is not deterministic"));
        }
        if let Some(d) = oracle::compare_relations(
            &oracle::relation(&f, max_len),
            &oracle::relation(&det, max_len),
            RELATION_TOL,
        ) {
            return Some(format!("machine {i}: determinize: {d}"));
        }

        for (kind, g) in [("random", random::deterministic(&mut rng, n)), ("determinized", det)] {
            let min = match minimize(&g) {
                Ok(x) => x,
                Err(e) => return Some(format!("machine {i}: minimize failed: {e}")),
            };
            if min.num_states() > g.num_states() {
                return Some(format!("machine {i}: minimize grew the {kind} machine"));
            }
            if let Some(d) = oracle::compare_relations(
                &oracle::relation(&g, max_len),
                &oracle::relation(&min, max_len),
                RELATION_TOL,
            ) {
                return Some(format!("machine {i}: minimize ({kind}): {d}"));
            }
            match minimize(&min) {
                Ok(again) if oracle::isomorphic(&min, &again, RELATION_TOL) => {}
                _ => return Some(format!("machine {i}: minimize is not idempotent")),
            }
        }
        None
    });
    Check::new(
        "wfst: compose/determinize/minimize preserve the weighted relation",
        failure,
        format!("{count} random machines, strings up to length {max_len}"),
    )
}

pub const TOY_LEXICONS: [&str; 3] = [
    "CAT K",
    "CAT K AE T\nAT AE T\nTA T AE",
    "RED R EH D\nREAD R EH D\nRE R EH",
];

/// The unoptimized cascade with disambiguation symbols mapped to epsilon.
pub fn raw_hcl(h: &Fst, c: &Fst, l: &Fst) -> Result<Fst, crate::wfst::WfstError> {
    let mut l = l.clone();
    if let Some(d0) = l.isyms().find("#0") {
        remove_input_arcs(&mut l, &[d0]);
    }
    let mut raw = compose(h, &compose(c, &l)?)?;
    let labels = disambig_labels(raw.isyms());
    relabel_input_to_eps(&mut raw, &labels);
    Ok(raw)
}

/// compile_hcl against the unoptimized composition on the toy lexicons.
pub fn hcl_toy_lexicons(max_len: usize) -> Check {
    let failure = TOY_LEXICONS.iter().enumerate().find_map(|(i, text)| {
        let run = || -> Result<Option<String>, String> {
            let lex = parse_lexicon(text).map_err(|e| e.to_string())?;
            let inv = derive_inventory(&lex, &SpecialWords::default());
            let l = build_l(&lex, &inv, LexiconGraphOptions::default()).map_err(|e| e.to_string())?;
            let topo = ToyTopology {
                phones: inv.phones(),
                states_per_phone: if i == 0 { 3 } else { 2 },
            };
            let h = build_h(&topo, l.num_disambig, true);
            let c = build_c(&inv, l.num_disambig);
            let hcl = compile_hcl(&h, &c, &l).map_err(|e| e.to_string())?;
            let raw = raw_hcl(&h, &c, &l.fst).map_err(|e| e.to_string())?;
            if hcl.num_states() > raw.num_states() {
                return Ok(Some(format!(
                    "HCL has {} states, raw composition {}",
                    hcl.num_states(),
                    raw.num_states()
                )));
            }
            Ok(oracle::compare_relations(
                &oracle::relation(&raw, max_len),
                &oracle::relation(&hcl, max_len),
                RELATION_TOL,
            ))
        };
        match run() {
            Ok(None) => None,
            Ok(Some(d)) | Err(d) => Some(format!("toy lexicon {i}: {d}")),
        }
    });
    Check::new(
        "wfst: compile_hcl equals the unoptimized H∘C∘L",
        failure,
        format!(
            "{} toy lexicons, senone strings up to length {max_len}",
            TOY_LEXICONS.len()
        ),
    )
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        wfst_random_machines(seed, 50, 6),
        hcl_toy_lexicons(8),
        align::alignment_oracle(seed, 100),
        align::boundary_recovery(seed, 100),
        am::parameter_recovery(seed),
        gop::matched_below_mismatched(seed, 100),
    ]
    .into_iter()
    .chain(g2p::toy_lexicon(&Default::default()))
    .collect()
}
