//! Log-space special functions: generalized factorials, digamma, and
//! generalized hypergeometric series.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::{Div, Mul};

use crate::error::{Error, Result};

/// A real number stored as `sign * exp(log_magnitude)`.
///
/// `sign == 0` is an exact zero; the magnitude is then ignored. The log is
/// carried as a double-length pair so that values converted from `f64`
/// survive the round trip at full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    sign: i8,
    hi: f64,
    lo: f64,
}

// Error-free sum of two floats.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { sign: 0, hi: f64::NEG_INFINITY, lo: 0.0 };
    pub const ONE: LogValue = LogValue { sign: 1, hi: 0.0, lo: 0.0 };

    fn pair(sign: i8, hi: f64, lo: f64) -> Self {
        if sign == 0 {
            return Self::ZERO;
        }
        if !hi.is_finite() {
            return LogValue { sign: sign.signum(), hi, lo: 0.0 };
        }
        let (hi, lo) = two_sum(hi, lo);
        LogValue { sign: sign.signum(), hi, lo }
    }

    /// Positive value `exp(ln)`. `ln == -inf` gives zero.
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { sign: 1, hi: ln, lo: 0.0 }
        }
    }

    pub fn from_parts(sign: i8, log_magnitude: f64) -> Self {
        Self::pair(sign, log_magnitude, 0.0)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self::ZERO;
        }
        let sign = if x > 0.0 { 1 } else { -1 };
        let ax = x.abs();
        let hi = libm::log(ax);
        if !hi.is_finite() {
            return LogValue { sign, hi, lo: 0.0 };
        }
        let e = libm::exp(hi);
        LogValue { sign, hi, lo: (ax - e) / e }
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn log_magnitude(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Natural log of the value; `-inf` for zero, NaN for negatives.
    pub fn ln(self) -> f64 {
        match self.sign {
            0 => f64::NEG_INFINITY,
            1 => self.hi + self.lo,
            _ => f64::NAN,
        }
    }

    pub fn exp(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * (libm::exp(self.hi) * (1.0 + self.lo)),
        }
    }

    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        let sign = if self.sign < 0 && k % 2 != 0 { -1 } else { self.sign.abs() };
        let kf = f64::from(k);
        let p = self.hi * kf;
        let err = libm::fma(self.hi, kf, -p);
        Self::pair(sign, p, err + self.lo * kf)
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        let (hi, err) = two_sum(self.hi, rhs.hi);
        LogValue::pair(self.sign * rhs.sign, hi, err + self.lo + rhs.lo)
    }
}

impl Div for LogValue {
    type Output = LogValue;
    /// Division by zero yields NaN magnitude with the numerator's sign.
    fn div(self, rhs: LogValue) -> LogValue {
        if rhs.sign == 0 {
            return LogValue { sign: self.sign, hi: f64::NAN, lo: 0.0 };
        }
        let (hi, err) = two_sum(self.hi, -rhs.hi);
        LogValue::pair(self.sign * rhs.sign, hi, err + self.lo - rhs.lo)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `ln(sum(exp(xs)))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: CompensatedSum = xs.iter().map(|&x| libm::exp(x - max)).collect();
    max + libm::log(s.value())
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

// Products up to this length are multiplied out; longer ones go through lgamma.
const DIRECT_MAX: u64 = 64;
const DIRECT_CAP: u64 = 1_000_000;

/// `ln((x)_n)` for the rising factorial, `x > 0`.
pub(crate) fn ln_rising(x: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n <= DIRECT_MAX || (x > 16.0 * n as f64 && n <= DIRECT_CAP) {
        ln_product(x, n)
    } else {
        ln_gamma(x + n as f64) - ln_gamma(x)
    }
}

fn ln_product(x: f64, n: u64) -> f64 {
    let mut acc = 1.0f64;
    let mut ln = 0.0;
    for j in 0..n {
        acc *= x + j as f64;
        if !(1e-280..=1e280).contains(&acc) {
            ln += libm::log(acc);
            acc = 1.0;
        }
    }
    ln + libm::log(acc)
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_rising(1.0, n)
}

/// `ln(C(n, k))`, `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    ln_rising((n - k + 1) as f64, k) - ln_factorial(k)
}

/// Generalized factorial `(theta)_(n,c) = prod_{j<n} (theta + j c)` in log space.
///
/// `c = 1` is the rising factorial, `c = -1` the falling one and `c = 0` gives
/// `theta^n`. A zero factor yields [`LogValue::ZERO`].
pub fn ln_gen_factorial(theta: f64, n: u64, c: i32) -> Result<LogValue> {
    if !theta.is_finite() {
        return Err(Error::domain(format!("generalized factorial of non-finite {theta}")));
    }
    if !(-1..=1).contains(&c) {
        return Err(Error::usage(format!("step c must be -1, 0 or 1, got {c}")));
    }
    if theta < 0.0 {
        return Err(Error::domain(format!("negative factor {theta} in generalized factorial")));
    }
    if n == 0 {
        return Ok(LogValue::ONE);
    }
    match c {
        0 => {
            if theta == 0.0 {
                Ok(LogValue::ZERO)
            } else {
                Ok(LogValue::from_ln(n as f64 * libm::log(theta)))
            }
        }
        1 => {
            if theta == 0.0 {
                Ok(LogValue::ZERO)
            } else {
                Ok(LogValue::from_ln(ln_rising(theta, n)))
            }
        }
        _ => {
            if libm::trunc(theta) != theta {
                return Err(Error::domain(format!(
                    "falling factorial needs an integer argument, got {theta}"
                )));
            }
            if n as f64 > theta {
                Ok(LogValue::ZERO)
            } else {
                Ok(LogValue::from_ln(ln_rising(theta - n as f64 + 1.0, n)))
            }
        }
    }
}

/// Digamma function for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut r = 0.0;
    while x < 10.0 {
        r -= 1.0 / x;
        x += 1.0;
    }
    let f = 1.0 / (x * x);
    let tail = f
        * (1.0 / 12.0
            - f * (1.0 / 120.0
                - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f * (1.0 / 132.0 - f * (691.0 / 32760.0))))));
    r + libm::log(x) - 0.5 / x - tail
}

/// Trigamma function for `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut r = 0.0;
    while x < 10.0 {
        r += 1.0 / (x * x);
        x += 1.0;
    }
    let f = 1.0 / (x * x);
    let tail = f
        * (1.0 / 6.0
            - f * (1.0 / 30.0 - f * (1.0 / 42.0 - f * (1.0 / 30.0 - f * (5.0 / 66.0 - f * (691.0 / 2730.0))))));
    r + 1.0 / x + 0.5 * f + tail / x
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && libm::trunc(x) == x
}

/// Terminating series `pFq(a; b; z)` where some `a_i` is a nonpositive integer.
///
/// Sums `(a)_k / (b)_k z^k / k!` for `k = 0..=M`, `M = min(-a_i)`.
pub fn pfq_terminating(a: &[f64], b: &[f64], z: f64) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::usage("terminating series needs at least one upper parameter"));
    }
    let order = a
        .iter()
        .filter(|&&x| is_nonpositive_integer(x))
        .map(|&x| -x)
        .min_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .ok_or_else(|| Error::usage("no upper parameter is a nonpositive integer"))?;
    if let Some(bad) = b.iter().find(|&&x| is_nonpositive_integer(x) && -x < order) {
        return Err(Error::domain(format!("lower parameter {bad} vanishes before termination")));
    }
    let order = order as u64;
    let mut term = 1.0;
    let mut sum = CompensatedSum::new();
    sum.add(term);
    for k in 0..order {
        let kf = k as f64;
        let num: f64 = a.iter().map(|&x| x + kf).product();
        let den: f64 = b.iter().map(|&x| x + kf).product();
        term *= num / den * z / (kf + 1.0);
        sum.add(term);
    }
    Ok(sum.value())
}

/// Default tolerance of [`pfq_convergent`].
pub const PFQ_TOL: f64 = 1e-12;
const PFQ_TERM_CAP: usize = 1_000_000;

/// Convergent series `pFq(a; b; z)` for `|z| < 1` and `p <= q + 1`.
///
/// Stops when a rigorous ratio bound on the remaining tail is below `tol`.
pub fn pfq_convergent(a: &[f64], b: &[f64], z: f64, tol: f64) -> Result<f64> {
    pfq_series(a, b, z, tol).map(|s| s.sum)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SeriesSum {
    pub sum: f64,
    /// Sum of absolute term values, for conditioning checks.
    pub abs_sum: f64,
}

pub(crate) fn pfq_series(a: &[f64], b: &[f64], z: f64, tol: f64) -> Result<SeriesSum> {
    if !(z.abs() < 1.0) {
        return Err(Error::domain(format!("series argument |z| = {} must be below 1", z.abs())));
    }
    if a.len() > b.len() + 1 {
        return Err(Error::usage(format!(
            "{}F{} diverges for every nonzero argument",
            a.len(),
            b.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    if let Some(bad) = b.iter().find(|&&x| is_nonpositive_integer(x)) {
        return Err(Error::domain(format!("lower parameter {bad} is a nonpositive integer")));
    }
    // k! enters as the extra lower parameter 1.
    let lower: Vec<f64> = b.iter().copied().chain(core::iter::once(1.0)).collect();
    let k_min = libm::ceil(a.iter().chain(lower.iter()).map(|x| x.abs()).fold(0.0f64, f64::max)) as usize + 1;

    let mut sum = CompensatedSum::new();
    let mut abs_sum = 1.0;
    let mut term = 1.0f64;
    sum.add(term);
    for k in 0..PFQ_TERM_CAP {
        let kf = k as f64;
        let num: f64 = a.iter().map(|&x| x + kf).product();
        let den: f64 = lower.iter().map(|&x| x + kf).product();
        term *= num / den * z;
        if term == 0.0 {
            return Ok(SeriesSum { sum: sum.value(), abs_sum });
        }
        sum.add(term);
        abs_sum += term.abs();
        if k + 1 >= k_min {
            let rho = tail_ratio_bound(a, &lower, z, (k + 1) as f64);
            if rho < 1.0 && term.abs() * rho / (1.0 - rho) < tol {
                return Ok(SeriesSum { sum: sum.value(), abs_sum });
            }
        }
    }
    Err(Error::Convergence(format!("series did not converge within {PFQ_TERM_CAP} terms")))
}

// Upper bound on |t_{j+1}/t_j| for all j >= k once every parameter shift is positive.
// Paired factors (a+j)/(b+j) are monotone toward 1; unpaired 1/(b+j) decrease.
fn tail_ratio_bound(a: &[f64], lower: &[f64], z: f64, k: f64) -> f64 {
    let mut rho = z.abs();
    for (i, &bl) in lower.iter().enumerate() {
        match a.get(i) {
            Some(&al) => rho *= ((al + k) / (bl + k)).max(1.0),
            None => rho /= bl + k,
        }
    }
    rho
}

/// `(K+1)F_K(-m, a_1..a_K; a_1+b_1..a_K+b_K; z)` for every `m = 0..=m_max`.
///
/// For `a, b > 0` and `z` in `[0, 1]` this equals `E[(1 - z X)^m]` with `X` a
/// product of independent `Beta(a_k, b_k)` variables. Evaluating it by
/// repeated beta-binomial mixing keeps every term positive, which avoids the
/// cancellation of the alternating series.
pub fn pfq_beta_mixture(m_max: usize, a: &[f64], b: &[f64], z: f64) -> Result<Vec<f64>> {
    Ok(ln_beta_mixture(m_max, a, b, z)?.into_iter().map(libm::exp).collect())
}

/// Natural logs of [`pfq_beta_mixture`], without underflow.
pub(crate) fn ln_beta_mixture(m_max: usize, a: &[f64], b: &[f64], z: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::usage("parameter lists must have equal length"));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!("mixture argument {z} outside [0, 1]")));
    }
    if a.iter().chain(b).any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::domain("mixture parameters must be positive and finite"));
    }
    let step = libm::log1p(-z);
    let mut g: Vec<f64> = (0..=m_max).map(|i| if i == 0 { 0.0 } else { i as f64 * step }).collect();
    let mut next = vec![0.0; m_max + 1];
    for (&ak, &bk) in a.iter().zip(b) {
        beta_binomial_mix(&g, &mut next, ak, bk);
        core::mem::swap(&mut g, &mut next);
    }
    Ok(g)
}

// Log-space out[m] = ln sum_i BetaBinomial(m; a, b)(i) * exp(lg[i]), where lg
// is nonincreasing.
fn beta_binomial_mix(lg: &[f64], out: &mut [f64], a: f64, b: f64) {
    let point_mass = lg.iter().skip(1).all(|&x| x == f64::NEG_INFINITY);
    let mut ln_w0 = 0.0; // ln P(i = 0 | m) = ln (b)_m - ln (a+b)_m
    for m in 0..lg.len() {
        let fm = m as f64;
        if m > 0 {
            ln_w0 += libm::log((b + fm - 1.0) / (a + b + fm - 1.0));
        }
        if point_mass {
            out[m] = ln_w0 + lg[0];
            continue;
        }
        // Past the weight mode both factors shrink, so the walk stops once a
        // term can no longer matter even summed over every remaining index.
        let cutoff = 38.0 + libm::log(fm + 1.0);
        let mut lw = ln_w0;
        let mut top = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for i in 0..=m {
            let t = lw + lg[i];
            if t > top {
                acc = acc * libm::exp(top - t) + 1.0;
                top = t;
            } else if t > f64::NEG_INFINITY {
                acc += libm::exp(t - top);
            }
            if i == m {
                break;
            }
            let fi = i as f64;
            let ratio = (fm - fi) * (a + fi) / ((fi + 1.0) * (b + fm - fi - 1.0));
            if ratio < 1.0 && t < top - cutoff {
                break;
            }
            lw += libm::log(ratio);
        }
        out[m] = top + libm::log(acc);
    }
}
