//! Pólya splits over the discrete simplex, univariate sum laws, and exact samplers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Hypergeometric, Poisson};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gen_factorial, LogValue};

/// Kind of Pólya split, indexed by the generalized-factorial step `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitKind {
    /// `c = -1`, multivariate hypergeometric.
    Hypergeometric,
    /// `c = 0`, multinomial.
    Multinomial,
    /// `c = 1`, Dirichlet-multinomial.
    DirichletMultinomial,
}

impl SplitKind {
    pub fn c(self) -> i32 {
        match self {
            SplitKind::Hypergeometric => -1,
            SplitKind::Multinomial => 0,
            SplitKind::DirichletMultinomial => 1,
        }
    }

    pub fn from_c(c: i64) -> Result<Self> {
        match c {
            -1 => Ok(SplitKind::Hypergeometric),
            0 => Ok(SplitKind::Multinomial),
            1 => Ok(SplitKind::DirichletMultinomial),
            _ => Err(Error::usage(format!("split step must be -1, 0 or 1, got {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Hypergeometric => "hypergeometric",
            SplitKind::Multinomial => "multinomial",
            SplitKind::DirichletMultinomial => "dirichlet-multinomial",
        }
    }
}

/// A Pólya split: kind plus one parameter per child.
///
/// Multinomial parameters are taken relative to their sum, so zero entries are
/// allowed as long as the sum is positive. Dirichlet-multinomial parameters are
/// positive reals; hypergeometric ones are positive integers (urn contents).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    kind: SplitKind,
    theta: Vec<f64>,
}

impl SplitSpec {
    pub fn new(kind: SplitKind, theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::domain("a split needs at least two components"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("split parameters must be finite"));
        }
        match kind {
            SplitKind::Multinomial => {
                if theta.iter().any(|&t| t < 0.0) || !(theta.iter().sum::<f64>() > 0.0) {
                    return Err(Error::domain("multinomial weights must be nonnegative with positive sum"));
                }
            }
            SplitKind::DirichletMultinomial => {
                if theta.iter().any(|&t| !(t > 0.0)) {
                    return Err(Error::domain("Dirichlet-multinomial parameters must be positive"));
                }
            }
            SplitKind::Hypergeometric => {
                if theta.iter().any(|&t| !(t >= 1.0) || libm::trunc(t) != t || t > 9.0e15) {
                    return Err(Error::domain("hypergeometric parameters must be positive integers"));
                }
            }
        }
        Ok(SplitSpec { kind, theta })
    }

    pub fn multinomial(pi: Vec<f64>) -> Result<Self> {
        Self::new(SplitKind::Multinomial, pi)
    }

    pub fn dirichlet_multinomial(theta: Vec<f64>) -> Result<Self> {
        Self::new(SplitKind::DirichletMultinomial, theta)
    }

    pub fn hypergeometric(counts: Vec<u64>) -> Result<Self> {
        Self::new(SplitKind::Hypergeometric, counts.into_iter().map(|c| c as f64).collect())
    }

    pub fn kind(&self) -> SplitKind {
        self.kind
    }

    pub fn c(&self) -> i32 {
        self.kind.c()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn arity(&self) -> usize {
        self.theta.len()
    }

    pub fn theta_sum(&self) -> f64 {
        self.theta.iter().sum()
    }

    /// Number of free parameters: `J - 1` for multinomial, `J` otherwise.
    pub fn n_params(&self) -> usize {
        match self.kind {
            SplitKind::Multinomial => self.arity() - 1,
            _ => self.arity(),
        }
    }
}

/// Pólya probability of the vector `y` given its total.
pub fn polya_pmf(y: &[u64], spec: &SplitSpec) -> Result<LogValue> {
    if y.len() != spec.arity() {
        return Err(Error::usage(format!(
            "count vector has {} entries, split has {}",
            y.len(),
            spec.arity()
        )));
    }
    ln_polya(y, spec.theta(), spec.c())
}

fn ln_polya(y: &[u64], theta: &[f64], c: i32) -> Result<LogValue> {
    let n: u64 = y.iter().sum();
    let mut ln = ln_factorial(n);
    for (&yj, &tj) in y.iter().zip(theta) {
        let f = ln_gen_factorial(tj, yj, c)?;
        if f.is_zero() {
            return Ok(LogValue::ZERO);
        }
        ln += f.ln() - ln_factorial(yj);
    }
    let den = ln_gen_factorial(theta.iter().sum(), n, c)?;
    if den.is_zero() {
        return Err(Error::domain("split normalizer vanishes"));
    }
    Ok(LogValue::from_ln(ln - den.ln()))
}

/// Two-component Pólya probability of `y` out of `n`, weights `theta` and `tau`.
pub fn polya_uni_pmf(y: u64, n: u64, theta: f64, tau: f64, kind: SplitKind) -> Result<LogValue> {
    if y > n {
        return Ok(LogValue::ZERO);
    }
    ln_polya(&[y, n - y], &[theta, tau], kind.c())
}

/// Exact draw of the split of `n` according to `spec`.
pub fn polya_sample<R: Rng + ?Sized>(n: u64, spec: &SplitSpec, rng: &mut R) -> Result<Vec<u64>> {
    let theta = spec.theta();
    match spec.kind() {
        SplitKind::Multinomial => Ok(multinomial_sample(n, theta, rng)),
        SplitKind::DirichletMultinomial => {
            let mut g = Vec::with_capacity(theta.len());
            for &t in theta {
                let d = Gamma::new(t, 1.0).map_err(|e| Error::domain(format!("{e}")))?;
                g.push(d.sample(rng));
            }
            if g.iter().sum::<f64>() > 0.0 {
                Ok(multinomial_sample(n, &g, rng))
            } else {
                Ok(urn_sample(n, theta, rng))
            }
        }
        SplitKind::Hypergeometric => {
            let mut pop = spec.theta_sum() as u64;
            if n > pop {
                return Err(Error::domain(format!("cannot draw {n} from an urn of {pop}")));
            }
            let mut left = n;
            let mut out = vec![0; theta.len()];
            for (j, &t) in theta.iter().enumerate() {
                let k = t as u64;
                if j + 1 == theta.len() {
                    out[j] = left;
                    break;
                }
                let y = if left == 0 {
                    0
                } else {
                    Hypergeometric::new(pop, k, left).map_err(|e| Error::domain(format!("{e}")))?.sample(rng)
                };
                out[j] = y;
                left -= y;
                pop -= k;
            }
            Ok(out)
        }
    }
}

// Sequential binomial splitting with conditional probabilities from suffix sums.
fn multinomial_sample<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut suffix = vec![0.0; weights.len() + 1];
    for j in (0..weights.len()).rev() {
        suffix[j] = suffix[j + 1] + weights[j];
    }
    let mut left = n;
    let mut out = vec![0; weights.len()];
    for j in 0..weights.len() {
        if left == 0 {
            break;
        }
        if j + 1 == weights.len() || suffix[j + 1] == 0.0 {
            out[j] = left;
            break;
        }
        let p = (weights[j] / suffix[j]).clamp(0.0, 1.0);
        let y = Binomial::new(left, p).map(|b| b.sample(rng)).unwrap_or(0);
        out[j] = y;
        left -= y;
    }
    out
}

// Pólya urn, used only when every gamma variate underflows.
fn urn_sample<R: Rng + ?Sized>(n: u64, theta: &[f64], rng: &mut R) -> Vec<u64> {
    let mut w = theta.to_vec();
    let mut out = vec![0; theta.len()];
    for _ in 0..n {
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = w.len() - 1;
        for (j, &wj) in w.iter().enumerate() {
            if u < wj {
                pick = j;
                break;
            }
            u -= wj;
        }
        out[pick] += 1;
        w[pick] += 1.0;
    }
    out
}

/// Family tag of a [`SumLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SumLawFamily {
    Dirac,
    Binomial,
    Poisson,
    NegativeBinomial,
}

impl SumLawFamily {
    pub fn name(self) -> &'static str {
        match self {
            SumLawFamily::Dirac => "dirac",
            SumLawFamily::Binomial => "binomial",
            SumLawFamily::Poisson => "poisson",
            SumLawFamily::NegativeBinomial => "negative_binomial",
        }
    }
}

/// Law of the total count `|Y|`.
///
/// `Binomial { trials, p }` uses a success probability; a success-odds
/// parameter `a` maps to `p = a / (1 + a)`. `NegativeBinomial { alpha, p }` has
/// p.m.f. `(alpha)_n / n! p^n (1-p)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SumLaw {
    Dirac { m: u64 },
    Binomial { trials: u64, p: f64 },
    Poisson { lambda: f64 },
    NegativeBinomial { alpha: f64, p: f64 },
}

/// Tail mass left out when enumerating an unbounded sum law.
pub const TAIL_MASS: f64 = 1e-14;

impl SumLaw {
    pub fn dirac(m: u64) -> Self {
        SumLaw::Dirac { m }
    }

    pub fn binomial(trials: u64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("binomial probability {p} outside [0, 1]")));
        }
        Ok(SumLaw::Binomial { trials, p })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("Poisson rate {lambda} must be positive")));
        }
        Ok(SumLaw::Poisson { lambda })
    }

    pub fn negative_binomial(alpha: f64, p: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("negative binomial size {alpha} must be positive")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("negative binomial probability {p} outside (0, 1)")));
        }
        Ok(SumLaw::NegativeBinomial { alpha, p })
    }

    /// Re-run the constructor checks, e.g. after deserializing.
    pub fn validated(self) -> Result<Self> {
        match self {
            SumLaw::Dirac { m } => Ok(Self::dirac(m)),
            SumLaw::Binomial { trials, p } => Self::binomial(trials, p),
            SumLaw::Poisson { lambda } => Self::poisson(lambda),
            SumLaw::NegativeBinomial { alpha, p } => Self::negative_binomial(alpha, p),
        }
    }

    pub fn family(&self) -> SumLawFamily {
        match self {
            SumLaw::Dirac { .. } => SumLawFamily::Dirac,
            SumLaw::Binomial { .. } => SumLawFamily::Binomial,
            SumLaw::Poisson { .. } => SumLawFamily::Poisson,
            SumLaw::NegativeBinomial { .. } => SumLawFamily::NegativeBinomial,
        }
    }

    /// Free parameters counted in the AIC.
    pub fn n_params(&self) -> usize {
        match self {
            SumLaw::Dirac { .. } | SumLaw::Binomial { .. } | SumLaw::Poisson { .. } => 1,
            SumLaw::NegativeBinomial { .. } => 2,
        }
    }

    /// Largest total with positive probability, `None` if unbounded.
    pub fn support_max(&self) -> Option<u64> {
        match *self {
            SumLaw::Dirac { m } => Some(m),
            SumLaw::Binomial { trials, .. } => Some(trials),
            _ => None,
        }
    }

    /// `P(|Y| = n)`.
    pub fn pmf(&self, n: u64) -> LogValue {
        match *self {
            SumLaw::Dirac { m } => {
                if n == m {
                    LogValue::ONE
                } else {
                    LogValue::ZERO
                }
            }
            SumLaw::Binomial { trials, p } => {
                if n > trials {
                    return LogValue::ZERO;
                }
                let k = n as f64;
                let rest = (trials - n) as f64;
                let lp = if n == 0 { 0.0 } else { k * libm::log(p) };
                let lq = if n == trials { 0.0 } else { rest * libm::log1p(-p) };
                LogValue::from_ln(
                    ln_factorial(trials) - ln_factorial(n) - ln_factorial(trials - n) + lp + lq,
                )
            }
            SumLaw::Poisson { lambda } => {
                LogValue::from_ln(n as f64 * libm::log(lambda) - lambda - ln_factorial(n))
            }
            SumLaw::NegativeBinomial { alpha, p } => {
                let rising = ln_gen_factorial(alpha, n, 1).map(|v| v.ln()).unwrap_or(f64::NAN);
                LogValue::from_ln(
                    rising - ln_factorial(n) + n as f64 * libm::log(p) + alpha * libm::log1p(-p),
                )
            }
        }
    }

    /// Factorial moment `E[(N)_(r)]` in log space.
    pub fn ln_factorial_moment(&self, r: u64) -> LogValue {
        let r_f = r as f64;
        match *self {
            SumLaw::Dirac { m } => ln_gen_factorial(m as f64, r, -1).unwrap_or(LogValue::ZERO),
            SumLaw::Binomial { trials, p } => {
                let f = ln_gen_factorial(trials as f64, r, -1).unwrap_or(LogValue::ZERO);
                f * LogValue::from_f64(p).powi(r as i32)
            }
            SumLaw::Poisson { lambda } => LogValue::from_ln(r_f * libm::log(lambda)),
            SumLaw::NegativeBinomial { alpha, p } => {
                let f = ln_gen_factorial(alpha, r, 1).unwrap_or(LogValue::ZERO);
                f * LogValue::from_ln(r_f * (libm::log(p) - libm::log1p(-p)))
            }
        }
    }

    pub fn factorial_moment(&self, r: u64) -> f64 {
        self.ln_factorial_moment(r).exp()
    }

    pub fn mean(&self) -> f64 {
        self.factorial_moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.factorial_moment(1);
        self.factorial_moment(2) + m1 * (1.0 - m1)
    }

    /// Smallest `t` with `P(N > t) < eps`; the support maximum when bounded.
    pub fn truncation_point(&self, eps: f64) -> u64 {
        if let Some(m) = self.support_max() {
            return m;
        }
        // Past the mode the term ratio is bounded by max(current ratio, its limit),
        // which turns the next term into a geometric tail bound.
        let (limit, mode) = match *self {
            SumLaw::Poisson { lambda } => (0.0, libm::floor(lambda) as u64),
            SumLaw::NegativeBinomial { alpha, p } => {
                (p, if alpha > 1.0 { libm::floor(p * (alpha - 1.0) / (1.0 - p)) as u64 } else { 0 })
            }
            _ => unreachable!(),
        };
        let mut n = mode;
        loop {
            let next = self.pmf(n + 1).exp();
            let ratio = match *self {
                SumLaw::Poisson { lambda } => lambda / (n as f64 + 2.0),
                SumLaw::NegativeBinomial { alpha, p } => p * (alpha + n as f64 + 1.0) / (n as f64 + 2.0),
                _ => unreachable!(),
            };
            let rho = ratio.max(limit);
            if rho < 1.0 && next / (1.0 - rho) < eps {
                return n;
            }
            n += 1;
        }
    }

    /// Exact draw of the total.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            SumLaw::Dirac { m } => m,
            SumLaw::Binomial { trials, p } => Binomial::new(trials, p).map(|b| b.sample(rng)).unwrap_or(0),
            SumLaw::Poisson { lambda } => poisson_draw(lambda, rng),
            SumLaw::NegativeBinomial { alpha, p } => {
                let rate = Gamma::new(alpha, p / (1.0 - p)).map(|g| g.sample(rng)).unwrap_or(0.0);
                poisson_draw(rate, rng)
            }
        }
    }
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(u64::MAX)
}
