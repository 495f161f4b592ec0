//! Per-node fits: multinomial, Dirichlet-multinomial, and the choice between them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{aic, survival, sum_ln_factorial, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::polya::{SplitKind, SplitSpec};

const SCALE_MAX: f64 = 1e8;

/// Child totals at one node, one row per site.
///
/// Rows are stored sorted so that every fit is exactly independent of the
/// order in which sites were given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeData {
    rows: Vec<Vec<u64>>,
    arity: usize,
}

impl NodeData {
    pub fn new(mut rows: Vec<Vec<u64>>) -> Result<Self> {
        let arity = rows.first().map_or(0, Vec::len);
        if arity < 2 {
            return Err(Error::usage("node data needs at least two columns"));
        }
        if rows.iter().any(|r| r.len() != arity) {
            return Err(Error::usage("node data rows have different lengths"));
        }
        rows.sort_unstable();
        Ok(NodeData { rows, arity })
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.arity).map(|c| self.rows.iter().map(|r| r[c]).sum()).collect()
    }

    pub fn row_totals(&self) -> impl Iterator<Item = u64> + '_ {
        self.rows.iter().map(|r| r.iter().sum())
    }

    /// `sum_rows ln(n! / prod y_c!)`, the part of every node log-likelihood
    /// that does not depend on the parameters.
    pub fn multinomial_constant(&self) -> f64 {
        sum_ln_factorial(self.row_totals()) - sum_ln_factorial(self.rows.iter().flatten().copied())
    }
}

/// Multinomial fit with `pi_c` proportional to the column totals.
pub fn fit_node_multinomial(data: &NodeData) -> Result<FitResult<SplitSpec>> {
    let totals = data.column_totals();
    let grand: u64 = totals.iter().sum();
    if grand == 0 {
        return Err(Error::DegenerateFit("node has no counts".into()));
    }
    let g = grand as f64;
    let pi: Vec<f64> = totals.iter().map(|&t| t as f64 / g).collect();
    let kernel: f64 = totals.iter().zip(&pi).filter(|(&t, _)| t > 0).map(|(&t, &p)| t as f64 * libm::log(p)).sum();
    let log_lik = kernel + data.multinomial_constant();
    let k = data.arity() - 1;
    Ok(FitResult {
        params: SplitSpec::new(SplitKind::Multinomial, pi)?,
        log_lik,
        aic: aic(k, log_lik),
        n_params: k,
        converged: true,
        iterations: 0,
        divergence_flag: false,
    })
}

struct DmStats {
    cols: Vec<Vec<f64>>,
    total: Vec<f64>,
}

struct DmEval {
    ll: f64,
    grad: Vec<f64>,
    diag: Vec<f64>,
    rank_one: f64,
}

impl DmStats {
    fn new(data: &NodeData) -> Self {
        DmStats {
            cols: (0..data.arity()).map(|c| survival(data.rows().iter().map(|r| r[c]))).collect(),
            total: survival(data.row_totals()),
        }
    }

    // Log-likelihood without the multinomial constant, gradient, and the
    // Hessian as diag(diag) + rank_one * 1 1^T.
    fn eval(&self, theta: &[f64]) -> DmEval {
        let mut ll = 0.0;
        let mut grad = vec![0.0; theta.len()];
        let mut diag = vec![0.0; theta.len()];
        for (c, s) in self.cols.iter().enumerate() {
            let t = theta[c];
            for (j, &w) in s.iter().enumerate() {
                let x = t + j as f64;
                ll += w * libm::log(x);
                grad[c] += w / x;
                diag[c] -= w / (x * x);
            }
        }
        let sum: f64 = theta.iter().sum();
        let (mut common, mut rank_one) = (0.0, 0.0);
        for (j, &w) in self.total.iter().enumerate() {
            let x = sum + j as f64;
            ll -= w * libm::log(x);
            common += w / x;
            rank_one += w / (x * x);
        }
        grad.iter_mut().for_each(|g| *g -= common);
        DmEval { ll, grad, diag, rank_one }
    }

    fn ll(&self, theta: &[f64]) -> f64 {
        self.eval(theta).ll
    }

    // Moment estimate of the precision |theta| from the pooled Pearson statistic.
    fn initial(&self, data: &NodeData) -> Vec<f64> {
        let totals = data.column_totals();
        let grand: u64 = totals.iter().sum();
        let pi: Vec<f64> = totals.iter().map(|&t| t as f64 / grand as f64).collect();
        let (mut q, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for row in data.rows() {
            let n: u64 = row.iter().sum();
            let nf = n as f64;
            s1 += nf;
            s2 += nf * nf;
            for (&y, &p) in row.iter().zip(&pi) {
                let d = y as f64 - nf * p;
                q += d * d / p;
            }
        }
        let q = q / (data.arity() - 1) as f64;
        let scale = if q <= s1 * (1.0 + 1e-9) {
            1e4
        } else if q >= s2 {
            0.1
        } else {
            ((s2 - q) / (q - s1)).clamp(1e-3, 1e6)
        };
        pi.iter().map(|p| p * scale).collect()
    }
}

fn newton_direction(e: &DmEval) -> Option<Vec<f64>> {
    // (D + s 1 1^T) d = -g with D < 0, s > 0: negative definite iff 1 + s sum 1/D > 0.
    if e.diag.iter().any(|&d| !(d < 0.0)) {
        return None;
    }
    let inv_sum: f64 = e.diag.iter().map(|d| 1.0 / d).sum();
    let denom = 1.0 + e.rank_one * inv_sum;
    if !(denom > 1e-12) {
        return None;
    }
    let v: Vec<f64> = e.grad.iter().zip(&e.diag).map(|(g, d)| -g / d).collect();
    let shift = e.rank_one * v.iter().sum::<f64>() / denom;
    Some(v.iter().zip(&e.diag).map(|(vi, d)| vi - shift / d).collect())
}

// Fixed-point update theta_c <- theta_c * sum S_c/(theta_c+j) / sum S/(|theta|+j); never lowers the likelihood.
fn fixed_point(stats: &DmStats, theta: &[f64]) -> Vec<f64> {
    let sum: f64 = theta.iter().sum();
    let den: f64 = stats.total.iter().enumerate().map(|(j, &w)| w / (sum + j as f64)).sum();
    theta
        .iter()
        .zip(&stats.cols)
        .map(|(&t, s)| {
            let num: f64 = s.iter().enumerate().map(|(j, &w)| w / (t + j as f64)).sum();
            t * num / den
        })
        .collect()
}

enum DmOutcome {
    Converged { theta: Vec<f64>, ll: f64, iterations: usize },
    Diverged { iterations: usize },
}

fn run_dm(stats: &DmStats, theta0: Vec<f64>, opts: &FitOptions) -> Result<DmOutcome> {
    let mut theta = theta0;
    let mut e = stats.eval(&theta);
    for it in 1..=opts.max_iter {
        let g_inf = e.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if g_inf < opts.tol {
            return Ok(DmOutcome::Converged { theta, ll: e.ll, iterations: it - 1 });
        }
        let mut moved = false;
        if let Some(d) = newton_direction(&e) {
            let ascent: f64 = d.iter().zip(&e.grad).map(|(a, b)| a * b).sum();
            if ascent > 0.0 {
                // keep every component above a tenth of its current value
                let mut t = 1.0f64;
                for (&di, &ti) in d.iter().zip(&theta) {
                    if di < 0.0 {
                        t = t.min(0.9 * ti / -di);
                    }
                }
                for _ in 0..50 {
                    let cand: Vec<f64> = theta.iter().zip(&d).map(|(x, y)| x + t * y).collect();
                    let ll = stats.ll(&cand);
                    if ll >= e.ll - 1e-13 * e.ll.abs().max(1.0) {
                        theta = cand;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        if !moved {
            let cand = fixed_point(stats, &theta);
            if stats.ll(&cand) >= e.ll - 1e-13 * e.ll.abs().max(1.0) && cand != theta {
                theta = cand;
            } else if g_inf < 1e3 * opts.tol {
                return Ok(DmOutcome::Converged { theta, ll: e.ll, iterations: it });
            } else {
                return Err(Error::Convergence("Dirichlet-multinomial line search failed".into()));
            }
        }
        if theta.iter().sum::<f64>() > SCALE_MAX {
            return Ok(DmOutcome::Diverged { iterations: it });
        }
        e = stats.eval(&theta);
    }
    let g_inf = e.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if g_inf < opts.tol {
        return Ok(DmOutcome::Converged { theta, ll: e.ll, iterations: opts.max_iter });
    }
    Err(Error::Convergence(format!("Dirichlet-multinomial fit did not converge in {} iterations", opts.max_iter)))
}

/// Dirichlet-multinomial fit by safeguarded Newton iteration.
///
/// When the estimate runs off toward the multinomial limit (the precision
/// exceeds 1e8, the data cannot identify it, or the best finite point is no
/// better than the limit) the multinomial fit is returned with
/// `divergence_flag` set.
pub fn fit_node_dm(data: &NodeData, tol: f64, max_iter: usize) -> Result<FitResult<SplitSpec>> {
    let multinomial = fit_node_multinomial(data)?;
    let diverged = |iterations: usize| {
        let mut m = multinomial.clone();
        m.divergence_flag = true;
        m.iterations = iterations;
        m.converged = false;
        Ok(m)
    };
    // A zero column has its optimum on the boundary; rows with n <= 1 carry no
    // information about the precision.
    if data.column_totals().contains(&0) || data.row_totals().all(|n| n <= 1) {
        return diverged(0);
    }
    let stats = DmStats::new(data);
    let opts = FitOptions { tol, max_iter };
    match run_dm(&stats, stats.initial(data), &opts)? {
        DmOutcome::Diverged { iterations } => diverged(iterations),
        DmOutcome::Converged { theta, ll, iterations } => {
            let log_lik = ll + data.multinomial_constant();
            if !(log_lik > multinomial.log_lik + 1e-10 * multinomial.log_lik.abs().max(1.0)) {
                return diverged(iterations);
            }
            let k = data.arity();
            Ok(FitResult {
                params: SplitSpec::new(SplitKind::DirichletMultinomial, theta)?,
                log_lik,
                aic: aic(k, log_lik),
                n_params: k,
                converged: true,
                iterations,
                divergence_flag: false,
            })
        }
    }
}

/// Fit both kinds and keep the lower AIC. A diverging or non-converging
/// Dirichlet-multinomial fit falls back to the multinomial.
pub fn select_node_split(data: &NodeData, opts: &FitOptions) -> Result<FitResult<SplitSpec>> {
    let multinomial = fit_node_multinomial(data)?;
    match fit_node_dm(data, opts.tol, opts.max_iter) {
        Ok(dm) if !dm.divergence_flag && dm.aic < multinomial.aic => Ok(dm),
        Ok(dm) if dm.divergence_flag => Ok(dm),
        Ok(_) => Ok(multinomial),
        Err(Error::Convergence(_)) => {
            let mut m = multinomial;
            m.divergence_flag = true;
            Ok(m)
        }
        Err(e) => Err(e),
    }
}
