//! Numerical kernels shared by the models and the evaluation code.

mod cca;
mod gaussian;
mod rank_tests;
mod transition;

pub use cca::{cca, cca_with_ridge, DEFAULT_RIDGE};
pub use gaussian::{kl_gaussian, sym_kl_gaussian, GaussianParams};
pub use rank_tests::{
    dunn_pairs, dunn_sidak_pairs, kruskal_wallis, sidak_level, KruskalWallis, PairComparison,
};
pub use transition::{linf_distance, TransitionMatrix};

/// `ln(sum(exp(xs)))` without overflow; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
