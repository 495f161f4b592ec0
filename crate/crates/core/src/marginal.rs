//! Marginal laws of single nodes as chains of univariate Pólya thinnings.
//!
//! The count below a node is obtained from the total by thinning once per edge
//! on its root path. With a negative binomial total, binomial stages fold into
//! the terminal law; the remaining beta-binomial stages give a hypergeometric
//! closed form. A Dirac total has a terminating closed form. Anything else is
//! summed directly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::TreePolyaModel;
use crate::polya::{polya_uni_pmf, SplitKind, SumLaw, TAIL_MASS};
use crate::special::{ln_beta_mixture, ln_choose, ln_factorial, ln_rising, log_sum_exp, pfq_series, CompensatedSum};
use crate::tree::NodeId;

/// One thinning step: keep a `Polya(theta_num, theta_rest)` share of the count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStage {
    pub kind: SplitKind,
    pub theta_num: f64,
    pub theta_rest: f64,
}

impl ChainStage {
    /// Keep probability of a binomial stage.
    pub fn probability(&self) -> f64 {
        self.theta_num / (self.theta_num + self.theta_rest)
    }
}

/// Stages ordered from the node up to the root, then the law of the total.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalChain {
    pub stages: Vec<ChainStage>,
    pub terminal: SumLaw,
}

/// Directly summed marginal p.m.f. and the total count where the terminal law
/// was cut off.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedPmf {
    pub values: Vec<f64>,
    pub truncation: u64,
}

impl TreePolyaModel {
    /// Chain describing the law of `|Y_node|`. Empty at the root.
    pub fn marginal_chain(&self, node: NodeId) -> MarginalChain {
        let path = self.tree().path_to_root(node);
        let stages = path
            .windows(2)
            .map(|w| {
                let spec = self.split(w[1]).expect("parent is internal");
                let theta_num = self.theta(w[0]).expect("has parent");
                ChainStage { kind: spec.kind(), theta_num, theta_rest: spec.theta_sum() - theta_num }
            })
            .collect();
        MarginalChain { stages, terminal: *self.sum_law() }
    }

    /// Chain of leaf `j`.
    pub fn leaf_marginal_chain(&self, j: usize) -> MarginalChain {
        self.marginal_chain(self.tree().leaf(j))
    }
}

impl MarginalChain {
    fn has_hypergeometric(&self) -> bool {
        self.stages.iter().any(|s| s.kind == SplitKind::Hypergeometric)
    }

    /// Product of the binomial stage probabilities.
    pub fn binomial_gamma(&self) -> f64 {
        self.stages.iter().filter(|s| s.kind == SplitKind::Multinomial).map(ChainStage::probability).product()
    }

    /// Fold every binomial stage into a negative binomial terminal.
    pub fn absorb_binomials(&self) -> Result<MarginalChain> {
        let SumLaw::NegativeBinomial { alpha, p } = self.terminal else {
            return Err(Error::UnsupportedChain("absorption needs a negative binomial total".into()));
        };
        if self.has_hypergeometric() {
            return Err(Error::UnsupportedChain("absorption needs stages with c in {0, 1}".into()));
        }
        let gamma = self.binomial_gamma();
        if gamma == 1.0 {
            return Ok(self.clone());
        }
        if gamma == 0.0 {
            return Err(Error::UnsupportedChain("a binomial stage keeps nothing; the marginal is degenerate at 0".into()));
        }
        let stages = self.stages.iter().copied().filter(|s| s.kind == SplitKind::DirichletMultinomial).collect();
        let p_new = p * gamma / (1.0 - p * (1.0 - gamma));
        Ok(MarginalChain { stages, terminal: SumLaw::negative_binomial(alpha, p_new)? })
    }

    /// `P(|Y_node| = n)`.
    pub fn pmf(&self, n: u64) -> Result<f64> {
        match self.terminal {
            _ if self.has_hypergeometric() => self.nested_at(n),
            SumLaw::NegativeBinomial { .. } => {
                if self.binomial_gamma() == 0.0 {
                    return Ok(if n == 0 { 1.0 } else { 0.0 });
                }
                let chain = self.absorb_binomials()?;
                let SumLaw::NegativeBinomial { alpha, p } = chain.terminal else { unreachable!() };
                nb_closed_form(&chain.stages, alpha, p, n)
            }
            SumLaw::Dirac { m } => dirac_closed_form(&self.stages, m, n),
            _ => self.nested_at(n),
        }
    }

    /// `P(|Y_node| = n)` for `n = 0..=n_max`.
    pub fn pmf_range(&self, n_max: u64) -> Result<Vec<f64>> {
        match self.terminal {
            SumLaw::NegativeBinomial { .. } | SumLaw::Dirac { .. } if !self.has_hypergeometric() => {
                (0..=n_max).map(|n| self.pmf(n)).collect()
            }
            _ => Ok(self.pmf_nested(n_max)?.values),
        }
    }

    fn nested_at(&self, n: u64) -> Result<f64> {
        Ok(self.pmf_nested(n)?.values[n as usize])
    }

    /// Marginal p.m.f. by direct nested summation over the totals, root side
    /// first. Unbounded totals are cut where the remaining mass is below 1e-14.
    pub fn pmf_nested(&self, n_max: u64) -> Result<NestedPmf> {
        let top = self.terminal.truncation_point(TAIL_MASS);
        let len = top as usize + 1;
        let mut dist: Vec<f64> = (0..=top).map(|n| self.terminal.pmf(n).exp()).collect();
        for stage in self.stages.iter().rev() {
            let mut next = vec![CompensatedSum::new(); len];
            for (total, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let row = uni_row(total as u64, stage)?;
                for (y, &q) in row.iter().enumerate() {
                    next[y].add(w * q);
                }
            }
            dist = next.iter().map(CompensatedSum::value).collect();
        }
        let mut values = vec![0.0; n_max as usize + 1];
        for (v, d) in values.iter_mut().zip(&dist) {
            *v = *d;
        }
        Ok(NestedPmf { values, truncation: top })
    }
}

/// `P(y | n)` for `y = 0..=n` under one stage.
pub(crate) fn uni_row(n: u64, stage: &ChainStage) -> Result<Vec<f64>> {
    let (t, u) = (stage.theta_num, stage.theta_rest);
    let len = n as usize + 1;
    match stage.kind {
        SplitKind::Hypergeometric => {
            (0..=n).map(|y| polya_uni_pmf(y, n, t, u, stage.kind).map(|v| v.exp())).collect()
        }
        SplitKind::Multinomial => {
            let p = stage.probability();
            let mut row = vec![0.0; len];
            if p <= 0.0 {
                row[0] = 1.0;
            } else if p >= 1.0 {
                row[len - 1] = 1.0;
            } else {
                let step = libm::log(p) - libm::log1p(-p);
                let mut lw = n as f64 * libm::log1p(-p);
                for y in 0..len {
                    row[y] = libm::exp(lw);
                    let yf = y as f64;
                    lw += libm::log((n as f64 - yf) / (yf + 1.0)) + step;
                }
            }
            Ok(row)
        }
        SplitKind::DirichletMultinomial => {
            let mut row = vec![0.0; len];
            let mut lw = ln_rising(u, n) - ln_rising(t + u, n);
            for y in 0..len {
                row[y] = libm::exp(lw);
                if y + 1 < len {
                    let yf = y as f64;
                    let nf = n as f64;
                    lw += libm::log((nf - yf) * (t + yf) / ((yf + 1.0) * (u + nf - yf - 1.0)));
                }
            }
            Ok(row)
        }
    }
}

// Beta-binomial stages over NB(alpha, p).
fn nb_closed_form(stages: &[ChainStage], alpha: f64, p: f64, n: u64) -> Result<f64> {
    let nf = n as f64;
    let a: Vec<f64> = stages.iter().map(|s| s.theta_num + nf).collect();
    let b: Vec<f64> = stages.iter().map(|s| s.theta_rest).collect();
    let ln_pre = stages
        .iter()
        .map(|s| ln_rising(s.theta_num, n) - ln_rising(s.theta_num + s.theta_rest, n))
        .sum::<f64>()
        + ln_rising(alpha, n)
        - ln_factorial(n)
        + nf * (libm::log(p) - libm::log1p(-p));
    if stages.is_empty() {
        return Ok(libm::exp(ln_pre + (alpha + nf) * libm::log1p(-p)));
    }
    if p < 0.5 {
        let mut upper = vec![alpha + nf];
        upper.extend_from_slice(&a);
        let lower: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        if let Ok(s) = pfq_series(&upper, &lower, p / (p - 1.0), 1e-16) {
            // accept only when cancellation cost at most three digits
            if s.sum > 0.0 && s.abs_sum <= 1e3 * s.sum {
                return Ok(libm::exp(ln_pre + libm::log(s.sum)));
            }
        }
    }
    let outer = SumLaw::negative_binomial(alpha + nf, p)?;
    let m_max = outer.truncation_point(TAIL_MASS);
    let lg = ln_beta_mixture(m_max as usize, &a, &b, 1.0)?;
    let terms: Vec<f64> = lg.iter().enumerate().map(|(m, &l)| outer.pmf(m as u64).ln() + l).collect();
    Ok(libm::exp(ln_pre + log_sum_exp(&terms)))
}

// Binomial and beta-binomial stages over Dirac(m).
fn dirac_closed_form(stages: &[ChainStage], m: u64, n: u64) -> Result<f64> {
    if n > m {
        return Ok(0.0);
    }
    let gamma: f64 = stages.iter().filter(|s| s.kind == SplitKind::Multinomial).map(ChainStage::probability).product();
    if gamma == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let beta: Vec<&ChainStage> = stages.iter().filter(|s| s.kind == SplitKind::DirichletMultinomial).collect();
    if beta.len() + stages.iter().filter(|s| s.kind == SplitKind::Multinomial).count() != stages.len() {
        return Err(Error::UnsupportedChain(format!("unexpected stage kinds in {stages:?}")));
    }
    let nf = n as f64;
    let a: Vec<f64> = beta.iter().map(|s| s.theta_num + nf).collect();
    let b: Vec<f64> = beta.iter().map(|s| s.theta_rest).collect();
    let ln_pre = ln_choose(m, n)
        + beta.iter().map(|s| ln_rising(s.theta_num, n) - ln_rising(s.theta_num + s.theta_rest, n)).sum::<f64>()
        + if n == 0 { 0.0 } else { nf * libm::log(gamma) };
    let lg = ln_beta_mixture((m - n) as usize, &a, &b, gamma)?;
    Ok(libm::exp(ln_pre + lg[(m - n) as usize]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::{running_example_nb, y6_chain};
    use crate::polya::SplitSpec;
    use crate::tree::{PartitionTree, Shape};
    use crate::special::pfq_convergent;

    #[test]
    fn y6_chain_structure() {
        let m = running_example_nb();
        let chain = m.leaf_marginal_chain(5);
        let kinds: Vec<SplitKind> = chain.stages.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SplitKind::DirichletMultinomial, SplitKind::DirichletMultinomial, SplitKind::Multinomial]);
        assert_eq!((chain.stages[0].theta_num, chain.stages[0].theta_rest), (0.8, 1.0));
        assert_eq!((chain.stages[1].theta_num, chain.stages[1].theta_rest), (3.5, 6.5));
        assert!((chain.stages[2].probability() - 0.6).abs() < 1e-15);

        let absorbed = chain.absorb_binomials().unwrap();
        assert_eq!(absorbed.stages.len(), 2);
        let q = 0.95 * 0.6 / (1.0 - 0.95 * 0.4);
        let SumLaw::NegativeBinomial { alpha, p } = absorbed.terminal else { panic!() };
        assert_eq!(alpha, 10.0);
        assert!((p - q).abs() < 1e-15);

        assert!(m.marginal_chain(m.tree().root()).stages.is_empty());
        assert_eq!(m.leaf_marginal_chain(2).stages.len(), 1);
    }

    #[test]
    fn absorption_edge_cases() {
        let only_binomial = MarginalChain {
            stages: vec![
                ChainStage { kind: SplitKind::Multinomial, theta_num: 0.2, theta_rest: 0.8 },
                ChainStage { kind: SplitKind::Multinomial, theta_num: 1.0, theta_rest: 1.0 },
            ],
            terminal: SumLaw::negative_binomial(3.0, 0.7).unwrap(),
        };
        let a = only_binomial.absorb_binomials().unwrap();
        assert!(a.stages.is_empty());
        let SumLaw::NegativeBinomial { p, .. } = a.terminal else { panic!() };
        assert!((p - 0.7 * 0.1 / (1.0 - 0.7 * 0.9)).abs() < 1e-15);
        for n in 0..30 {
            let (got, want) = (only_binomial.pmf(n).unwrap(), a.terminal.pmf(n).exp());
            assert!((got - want).abs() <= 1e-14 * want.max(1e-300), "n = {n}: {got} vs {want}");
        }

        let no_binomial = y6_chain(3.0, 1.0, 1.0, 2.0, 1.0, 5.0, 0.25);
        let mut c = no_binomial.clone();
        c.stages.pop();
        assert_eq!(c.absorb_binomials().unwrap(), c);

        let mut d = c.clone();
        d.terminal = SumLaw::dirac(3);
        assert_eq!(d.absorb_binomials().unwrap_err().category(), "unsupported-chain");
    }

    #[test]
    fn gauss_form_at_zero() {
        let (a, b, alpha, p) = (1.7, 0.6, 2.5, 0.3);
        let chain = MarginalChain {
            stages: vec![ChainStage { kind: SplitKind::DirichletMultinomial, theta_num: a, theta_rest: b }],
            terminal: SumLaw::negative_binomial(alpha, p).unwrap(),
        };
        let f = pfq_convergent(&[alpha, b], &[a + b], p, 1e-15).unwrap();
        let expect = libm::pow(1.0 - p, alpha) * f;
        assert!((chain.pmf(0).unwrap() - expect).abs() < 1e-13);
        let mut hi = chain.clone();
        hi.terminal = SumLaw::negative_binomial(alpha, 0.8).unwrap();
        let f = pfq_convergent(&[alpha, b], &[a + b], 0.8, 1e-15).unwrap();
        assert!((hi.pmf(0).unwrap() - libm::pow(0.2, alpha) * f).abs() < 1e-12);
    }

    #[test]
    fn dirac_without_thinning() {
        let chain = MarginalChain { stages: vec![], terminal: SumLaw::dirac(6) };
        assert_eq!(chain.pmf(6).unwrap(), 1.0);
        assert_eq!(chain.pmf(5).unwrap(), 0.0);
        assert_eq!(chain.pmf(9).unwrap(), 0.0);
    }

    #[test]
    fn both_nb_branches_agree() {
        let c = y6_chain(3.0, 1.0, 1.0, 2.0, 0.75, 5.0, 0.45);
        let absorbed = c.absorb_binomials().unwrap();
        let SumLaw::NegativeBinomial { alpha, p } = absorbed.terminal else { panic!() };
        assert!(p < 0.5);
        for n in 0..30 {
            let series = nb_closed_form(&absorbed.stages, alpha, p, n).unwrap();
            let nested = c.pmf_nested(n).unwrap().values[n as usize];
            assert!((series - nested).abs() < 1e-12, "n={n}: {series} vs {nested}");
        }
    }

    #[test]
    fn closed_forms_normalize() {
        for chain in [
            y6_chain(3.0, 1.0, 1.0, 2.0, 0.75, 20.0, 0.45),
            y6_chain(0.8, 1.0, 3.5, 6.5, 0.9, 10.0, 0.6),
        ] {
            let top = chain.absorb_binomials().unwrap().terminal.truncation_point(1e-15);
            let mass: f64 = chain.pmf_range(top).unwrap().iter().sum();
            assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        }
    }

    #[test]
    fn hypergeometric_chain_is_summed() {
        let tree = PartitionTree::from_shape(3, &Shape::node([Shape::leaf(0), Shape::node([Shape::leaf(1), Shape::leaf(2)])])).unwrap();
        let splits = vec![SplitSpec::hypergeometric(vec![4, 6]).unwrap(), SplitSpec::dirichlet_multinomial(vec![1.0, 2.0]).unwrap()];
        let m = TreePolyaModel::new(tree, splits, SumLaw::binomial(8, 0.4).unwrap()).unwrap();
        let chain = m.leaf_marginal_chain(1);
        let pmf = chain.pmf_range(8).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert_eq!(chain.absorb_binomials().unwrap_err().category(), "unsupported-chain");
    }
}
