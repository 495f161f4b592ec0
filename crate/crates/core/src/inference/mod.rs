//! Maximum likelihood fitting and AIC-driven tree search.
//!
//! The log-likelihood of a tree model splits into one term for the sum law
//! and one per internal node, so each piece is fitted on its own and the AIC
//! of the whole model is the sum of the parts.

mod fit;
mod node;
mod search;
mod sumlaw;

pub use fit::{fit_tree, fit_tree_with, AicTable, NodeAic, SplitChoice, TreeFit};
pub use node::{fit_node_dm, fit_node_multinomial, select_node_split, NodeData};
pub use search::{search_tree, SearchConfig, SearchMove, SearchResult, TraceEntry};
pub use sumlaw::{fit_sum_law, fit_sum_law_with};

use alloc::vec::Vec;

/// Iteration controls shared by the numerical fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Gradient sup-norm at which an iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-8, max_iter: 200 }
    }
}

/// Outcome of one maximum likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<P> {
    pub params: P,
    /// Full log-likelihood, including multinomial coefficients and `ln y!` terms.
    pub log_lik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    /// The Dirichlet-multinomial estimate ran off to the multinomial limit and
    /// the multinomial fit was substituted.
    pub divergence_flag: bool,
}

pub(crate) fn aic(n_params: usize, log_lik: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * log_lik
}

/// `S[j] = #{values > j}` for `j = 0..max`.
pub(crate) fn survival(values: impl IntoIterator<Item = u64>) -> Vec<f64> {
    let mut hist: Vec<u64> = Vec::new();
    for v in values {
        let v = v as usize;
        if v >= hist.len() {
            hist.resize(v + 1, 0);
        }
        hist[v] += 1;
    }
    let mut out = alloc::vec![0.0; hist.len().saturating_sub(1)];
    let mut above = 0u64;
    for j in (0..out.len()).rev() {
        above += hist[j + 1];
        out[j] = above as f64;
    }
    out
}

/// `sum ln(v!)` over the values, accumulated by histogram.
pub(crate) fn sum_ln_factorial(values: impl IntoIterator<Item = u64>) -> f64 {
    let s = survival(values);
    // ln v! = sum_{j<v} ln(j+1), so the total is sum_j S[j] ln(j+1)
    s.iter().enumerate().map(|(j, &w)| w * libm::log(j as f64 + 1.0)).sum()
}
