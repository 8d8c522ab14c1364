//! Fixtures shared by the benchmarks.

use mzi::{build_fig2, CascadeSpec, DelayRule, Result};

/// `(N, n)` pairs near the coherence limit of a 500 nm, 5 m source: a prime
/// with its largest candidate, and two factor cases.
pub const LARGE_CASES: [(u64, u64); 3] =
    [(9_999_991, 3_162), (9_988_751, 823), (10_000_000, 3_125)];

/// Seven-loop network with every loop a divisor of `N = 840`.
pub fn fig2_all_factors() -> Result<CascadeSpec> {
    build_fig2(840, [2, 3, 4, 5, 6, 7, 8], DelayRule::DarkPort)
}

/// Seven-loop network with large, mostly non-dividing loops.
pub fn fig2_wide() -> Result<CascadeSpec> {
    build_fig2(
        2 * 3 * 31 * 41,
        [2, 3, 31, 33, 35, 41, 43],
        DelayRule::DarkPort,
    )
}
