//! Rank statistics and text metrics.

mod correlation;
mod text;

pub use correlation::{
    average_ranks, kendall_tau, kendall_tau_b, krippendorff_alpha, pearson_r, spearman_rho,
    spearman_rho_values, AlphaLevel, Ranking,
};
pub use text::{
    coverage_density, extractive_fragments, intrinsic_scu_eval, lcs_len, rouge_l, rouge_mean_f1,
    rouge_n, Extractiveness, IntrinsicScore, RougeOrder, RougeScore,
};
