use gop_forge::selftest;

#[test]
fn random_machines_match_enumeration() {
    let c = selftest::wfst_random_machines(7, 50, 6);
    assert!(c.passed, "{}", c.detail);
}

#[test]
fn hcl_matches_unoptimized_cascade() {
    let c = selftest::hcl_toy_lexicons(8);
    assert!(c.passed, "{}", c.detail);
}
