use mzi_bench::{fig2_all_factors, fig2_wide, LARGE_CASES};

#[test]
fn fixtures_build() {
    let small = fig2_all_factors().unwrap();
    assert_eq!(small.detectors().count(), 8);
    let wide = fig2_wide().unwrap();
    assert_eq!(wide.loops().count(), 7);
}

#[test]
fn large_cases_are_in_range() {
    for (target, n) in LARGE_CASES {
        assert!(n >= 2 && n <= target.isqrt() + 1, "{target}/{n}");
        assert!(target <= 10_000_000);
    }
}
