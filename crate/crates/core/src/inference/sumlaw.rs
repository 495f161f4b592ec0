//! Fits of the law of the row totals.

use alloc::format;

use super::{aic, survival, sum_ln_factorial, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::polya::{SumLaw, SumLawFamily};
use crate::special::ln_choose;

const ALPHA_MAX: f64 = 1e8;

/// Fit `family` to the totals with default options.
pub fn fit_sum_law(totals: &[u64], family: SumLawFamily) -> Result<FitResult<SumLaw>> {
    fit_sum_law_with(totals, family, &FitOptions::default())
}

/// Fit `family` to the totals.
///
/// The negative binomial is fitted by Newton steps on the profile likelihood
/// in `ln alpha`, with `p` set from the mean. The other families have closed
/// forms; the binomial takes the largest total as its number of trials.
pub fn fit_sum_law_with(totals: &[u64], family: SumLawFamily, opts: &FitOptions) -> Result<FitResult<SumLaw>> {
    if totals.is_empty() {
        return Err(Error::usage("no totals to fit"));
    }
    // sorted so that floating-point sums do not depend on row order
    let mut sorted = totals.to_vec();
    sorted.sort_unstable();
    let totals = sorted.as_slice();
    let n = totals.len() as f64;
    let sum: u64 = totals.iter().sum();
    let mean = sum as f64 / n;
    let ln_fact = sum_ln_factorial(totals.iter().copied());
    let closed = |law: SumLaw, log_lik: f64| {
        let k = law.n_params();
        Ok(FitResult { params: law, log_lik, aic: aic(k, log_lik), n_params: k, converged: true, iterations: 0, divergence_flag: false })
    };
    match family {
        SumLawFamily::Dirac => {
            let m = totals[0];
            if totals.iter().any(|&t| t != m) {
                return Err(Error::DegenerateFit("a point mass needs identical totals".into()));
            }
            closed(SumLaw::dirac(m), 0.0)
        }
        SumLawFamily::Poisson => {
            if sum == 0 {
                return Err(Error::DegenerateFit("all totals are zero".into()));
            }
            let ll = sum as f64 * libm::log(mean) - n * mean - ln_fact;
            closed(SumLaw::poisson(mean)?, ll)
        }
        SumLawFamily::Binomial => {
            let trials = *totals.iter().max().expect("nonempty");
            if trials == 0 {
                return Err(Error::DegenerateFit("all totals are zero".into()));
            }
            let p = mean / trials as f64;
            let ll: f64 = totals
                .iter()
                .map(|&y| {
                    let s = if y == 0 { 0.0 } else { y as f64 * libm::log(p) };
                    let f = if y == trials { 0.0 } else { (trials - y) as f64 * libm::log1p(-p) };
                    ln_choose(trials, y) + s + f
                })
                .sum();
            closed(SumLaw::binomial(trials, p)?, ll)
        }
        SumLawFamily::NegativeBinomial => fit_negative_binomial(totals, mean, ln_fact, opts),
    }
}

struct Profile<'a> {
    surv: &'a [f64],
    n: f64,
    mean: f64,
}

impl Profile<'_> {
    // Profile log-likelihood without the ln y! constant, and its first two
    // derivatives in u = ln(alpha).
    fn eval(&self, alpha: f64) -> (f64, f64, f64) {
        let (mut ll, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (j, &w) in self.surv.iter().enumerate() {
            let x = alpha + j as f64;
            ll += w * libm::log(x);
            d1 += w / x;
            d2 -= w / (x * x);
        }
        let p = self.mean / (alpha + self.mean);
        let total = self.n * self.mean;
        ll += total * libm::log(p) + self.n * alpha * libm::log1p(-p);
        d1 += self.n * libm::log(alpha / (alpha + self.mean));
        d2 += self.n * self.mean / (alpha * (alpha + self.mean));
        (ll, alpha * d1, alpha * alpha * d2 + alpha * d1)
    }
}

fn fit_negative_binomial(totals: &[u64], mean: f64, ln_fact: f64, opts: &FitOptions) -> Result<FitResult<SumLaw>> {
    if mean == 0.0 {
        return Err(Error::DegenerateFit("all totals are zero".into()));
    }
    let n = totals.len() as f64;
    let var = totals.iter().map(|&y| (y as f64 - mean) * (y as f64 - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateFit("totals have zero variance".into()));
    }
    let surv = survival(totals.iter().copied());
    let prof = Profile { surv: &surv, n, mean };
    let alpha0 = (mean * mean / (var - mean).max(1e-3 * mean)).clamp(1e-4, 1e6);
    let mut u = libm::log(alpha0);
    let (mut ll, mut g, mut h) = prof.eval(alpha0);
    for it in 1..=opts.max_iter {
        if g.abs() < opts.tol {
            return nb_result(prof.mean, libm::exp(u), ll - ln_fact, it - 1);
        }
        // Newton when concave, otherwise a unit gradient step; then backtrack.
        let mut step = if h < 0.0 { -g / h } else { g.signum() };
        step = step.clamp(-5.0, 5.0);
        let mut accepted = false;
        for _ in 0..50 {
            let alpha = libm::exp(u + step);
            let (l2, g2, h2) = prof.eval(alpha);
            if l2 >= ll - 1e-13 * ll.abs().max(1.0) {
                u += step;
                (ll, g, h) = (l2, g2, h2);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if libm::exp(u) > ALPHA_MAX {
            return Err(Error::Convergence(format!(
                "negative binomial size exceeded {ALPHA_MAX:e}: totals show no overdispersion"
            )));
        }
        if !accepted {
            if g.abs() < 1e3 * opts.tol {
                return nb_result(prof.mean, libm::exp(u), ll - ln_fact, it);
            }
            return Err(Error::Convergence("line search failed in the negative binomial fit".into()));
        }
    }
    if g.abs() < opts.tol {
        return nb_result(prof.mean, libm::exp(u), ll - ln_fact, opts.max_iter);
    }
    Err(Error::Convergence(format!("negative binomial fit did not converge in {} iterations", opts.max_iter)))
}

fn nb_result(mean: f64, alpha: f64, log_lik: f64, iterations: usize) -> Result<FitResult<SumLaw>> {
    let law = SumLaw::negative_binomial(alpha, mean / (alpha + mean))?;
    Ok(FitResult { params: law, log_lik, aic: aic(2, log_lik), n_params: 2, converged: true, iterations, divergence_flag: false })
}
