//! Factorial moments, covariances, correlations and dispersion of a model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::TreePolyaModel;
use crate::polya::{SplitSpec, SumLaw};
use crate::special::{ln_gen_factorial, LogValue};
use crate::tree::NodeId;

/// Root-path products for a node: `gamma = prod theta_child / |theta_parent|`
/// and `delta = prod (theta_child + c) / (|theta_parent| + c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConstants {
    pub gamma: f64,
    pub delta: f64,
}

/// Sign of `Var - E` for a count law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispersion {
    Under,
    Null,
    Over,
}

impl Dispersion {
    /// Classify from the factorial moments; `|mu2 - mu1^2|` within a few ulps is null.
    pub fn classify(mu1: f64, mu2: f64) -> Self {
        let d = mu2 - mu1 * mu1;
        if d.abs() <= 64.0 * f64::EPSILON * mu2.abs().max(mu1 * mu1) {
            Dispersion::Null
        } else if d > 0.0 {
            Dispersion::Over
        } else {
            Dispersion::Under
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dispersion::Under => "under",
            Dispersion::Null => "null",
            Dispersion::Over => "over",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDispersion {
    pub node: NodeId,
    pub mean: f64,
    pub variance: f64,
    pub class: Dispersion,
    /// Class forced by the parent's class and split kind, when it is forced.
    pub implied: Option<Dispersion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionReport {
    pub sum_law: Dispersion,
    /// One entry per node in preorder, root first.
    pub nodes: Vec<NodeDispersion>,
}

/// Both covariances of a sibling-ratio check and the ratios themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceRatio {
    /// `theta_first / theta_second`.
    pub ratio: f64,
    pub cov_first: f64,
    pub cov_second: f64,
    /// `E|Y_first| / E|Y_second|`.
    pub mean_ratio: f64,
}

fn implied_class(parent: Dispersion, c: i32) -> Option<Dispersion> {
    match (c, parent) {
        (0, d) => Some(d),
        (1, Dispersion::Null | Dispersion::Over) => Some(Dispersion::Over),
        (-1, Dispersion::Null | Dispersion::Under) => Some(Dispersion::Under),
        _ => None,
    }
}

// Difference of two nonnegative quantities, exactly zero when they agree to a few ulps.
fn snapped_difference(x: f64, y: f64) -> f64 {
    if (x - y).abs() <= 64.0 * f64::EPSILON * x.abs().max(y.abs()) {
        0.0
    } else {
        x - y
    }
}

impl TreePolyaModel {
    pub fn path_constants(&self, node: NodeId) -> PathConstants {
        let mut gamma = 1.0;
        let mut delta = 1.0;
        for w in self.tree().path_to_root(node).windows(2) {
            let spec = self.split(w[1]).expect("internal");
            let t = self.theta(w[0]).expect("non-root");
            let c = f64::from(spec.c());
            let s = spec.theta_sum();
            gamma *= t / s;
            delta *= (t + c) / (s + c);
        }
        PathConstants { gamma, delta }
    }

    /// `E[prod_j (Y_j)_(r_j)]` for a vector of orders, one per leaf.
    pub fn factorial_moment(&self, r: &[u64]) -> Result<f64> {
        let orders = self.node_totals(r)?;
        let mut acc = self.sum_law().ln_factorial_moment(orders[0]);
        for &a in self.tree().internal_nodes() {
            if acc.is_zero() {
                return Ok(0.0);
            }
            let spec = self.split(a).expect("internal");
            let c = spec.c();
            let mut num = LogValue::ONE;
            for (&child, &t) in self.tree().children(a).iter().zip(spec.theta()) {
                num = num * ln_gen_factorial(t, orders[child.index()], c)?;
            }
            if num.is_zero() {
                return Ok(0.0);
            }
            acc = acc * num / ln_gen_factorial(spec.theta_sum(), orders[a.index()], c)?;
        }
        Ok(acc.exp())
    }

    /// `E[(|Y_node|)_(r)]` along the root path of `node`.
    pub fn node_factorial_moment(&self, node: NodeId, r: u64) -> f64 {
        let mut acc = self.sum_law().ln_factorial_moment(r);
        for w in self.tree().path_to_root(node).windows(2) {
            if acc.is_zero() {
                return 0.0;
            }
            let spec = self.split(w[1]).expect("internal");
            let t = self.theta(w[0]).expect("non-root");
            let num = ln_gen_factorial(t, r, spec.c()).unwrap_or(LogValue::ZERO);
            if num.is_zero() {
                return 0.0;
            }
            acc = acc * num / ln_gen_factorial(spec.theta_sum(), r, spec.c()).unwrap_or(LogValue::ZERO);
        }
        acc.exp()
    }

    pub fn node_mean(&self, node: NodeId) -> f64 {
        self.node_factorial_moment(node, 1)
    }

    /// `Var = E[(Y)_(2)] + E[Y](1 - E[Y])`.
    pub fn node_variance(&self, node: NodeId) -> f64 {
        let m1 = self.node_factorial_moment(node, 1);
        let m2 = self.node_factorial_moment(node, 2);
        m2 + m1 * (1.0 - m1)
    }

    /// Covariance of leaves `i` and `j`; the variance when `i == j`.
    pub fn covariance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.leaf_count();
        if i >= n || j >= n {
            return Err(Error::usage(format!("leaf index out of range for {n} leaves")));
        }
        self.node_covariance(self.tree().leaf(i), self.tree().leaf(j))
    }

    /// Covariance of `|Y_a|` and `|Y_b|` for equal or disjoint nodes.
    pub fn node_covariance(&self, a: NodeId, b: NodeId) -> Result<f64> {
        if a == b {
            return Ok(self.node_variance(a));
        }
        let (s, _, _) = self.tree().common_ancestor(a, b)?;
        let (mu1, mu2) = (self.sum_law().factorial_moment(1), self.sum_law().factorial_moment(2));
        let ga = self.path_constants(a).gamma;
        let gb = self.path_constants(b).gamma;
        let ps = self.path_constants(s);
        let spec = self.split(s).expect("internal");
        let ts = spec.theta_sum();
        let c = f64::from(spec.c());
        let first = ts / (ts + c) * ps.delta / ps.gamma * mu2;
        Ok(ga * gb * snapped_difference(first, mu1 * mu1))
    }

    /// Pearson correlation matrix of the leaves.
    pub fn correlation_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.leaf_count();
        let var: Vec<f64> = (0..n).map(|j| self.node_variance(self.tree().leaf(j))).collect();
        if let Some(j) = var.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::UndefinedCorrelation(format!("leaf {} has zero variance", j + 1)));
        }
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            out[i][i] = 1.0;
            for j in 0..i {
                let r = (self.covariance(i, j)? / libm::sqrt(var[i] * var[j])).clamp(-1.0, 1.0);
                out[i][j] = r;
                out[j][i] = r;
            }
        }
        Ok(out)
    }

    /// `Cov(|Y_first|, |Y_b|) / Cov(|Y_second|, |Y_b|)` for sibling nodes
    /// `first` and `second` and a node `b` disjoint from both.
    pub fn covariance_ratio(&self, first: NodeId, second: NodeId, b: NodeId) -> Result<CovarianceRatio> {
        let tree = self.tree();
        let parent = tree.parent(first);
        if first == second || parent.is_none() || parent != tree.parent(second) {
            return Err(Error::usage("the first two nodes must be distinct siblings"));
        }
        for x in [first, second] {
            if tree.contains(x, b) || tree.contains(b, x) {
                return Err(Error::usage("the third node must be disjoint from both siblings"));
            }
        }
        let cov_first = self.node_covariance(first, b)?;
        let cov_second = self.node_covariance(second, b)?;
        Ok(CovarianceRatio {
            ratio: self.theta(first).expect("non-root") / self.theta(second).expect("non-root"),
            cov_first,
            cov_second,
            mean_ratio: self.node_mean(first) / self.node_mean(second),
        })
    }

    /// Dispersion class of the total and of every node.
    pub fn dispersion_report(&self) -> DispersionReport {
        let law = self.sum_law();
        let sum_law = Dispersion::classify(law.factorial_moment(1), law.factorial_moment(2));
        let mut nodes: Vec<NodeDispersion> = Vec::with_capacity(self.tree().node_count());
        for node in self.tree().node_ids() {
            let m1 = self.node_factorial_moment(node, 1);
            let m2 = self.node_factorial_moment(node, 2);
            let implied = match self.tree().parent(node) {
                None => Some(sum_law),
                Some(p) => implied_class(nodes[p.index()].class, self.split(p).expect("internal").c()),
            };
            nodes.push(NodeDispersion {
                node,
                mean: m1,
                variance: m2 + m1 * (1.0 - m1),
                class: Dispersion::classify(m1, m2),
                implied,
            });
        }
        DispersionReport { sum_law, nodes }
    }
}

/// Correlation of components `i` and `j` of a single split of a total with
/// factorial moments `mu1`, `mu2`, written through the ratios `M_k`.
pub fn flat_split_correlation(spec: &SplitSpec, law: &SumLaw, i: usize, j: usize) -> f64 {
    let (mu1, mu2) = (law.factorial_moment(1), law.factorial_moment(2));
    let s = spec.theta_sum();
    let c = f64::from(spec.c());
    let (ti, tj) = (spec.theta()[i], spec.theta()[j]);
    let m = |t: f64| mu1 * (1.0 + c * mu1 / s) / (mu2 * (t + c) / (s + c) + mu1 * (1.0 - mu1 * t / s));
    let (mi, mj) = (m(ti), m(tj));
    let bracket = snapped_difference(s * mu2 / (s + c), mu1 * mu1);
    if bracket == 0.0 {
        return 0.0;
    }
    let mag = libm::sqrt(ti * tj / ((ti + c) * (tj + c)) * (1.0 - mi) * (1.0 - mj));
    if 1.0 - mi > 0.0 {
        mag
    } else {
        -mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::{running_example, running_example_nb};
    use crate::polya::tests::simplex;
    use crate::polya::SplitKind;
    use crate::tree::PartitionTree;

    #[test]
    fn flat_correlation_matches_matrix_and_bound() {
        let tree = PartitionTree::flat(2).unwrap();
        let spec = SplitSpec::dirichlet_multinomial(vec![1.0, 1.0]).unwrap();
        for (a, p) in [(0.5, 0.3), (5.0, 0.9), (50.0, 0.99)] {
            let law = SumLaw::negative_binomial(a, p).unwrap();
            let m = TreePolyaModel::new(tree.clone(), vec![spec.clone()], law).unwrap();
            let r = m.correlation_matrix().unwrap()[0][1];
            assert!(r < 0.5);
            assert!((r - flat_split_correlation(&spec, &law, 0, 1)).abs() < 1e-12);
        }
        let law = SumLaw::dirac(9);
        let spec = SplitSpec::new(SplitKind::Multinomial, vec![0.2, 0.3, 0.5]).unwrap();
        let m = TreePolyaModel::new(PartitionTree::flat(3).unwrap(), vec![spec.clone()], law).unwrap();
        let r = m.correlation_matrix().unwrap();
        assert!((r[0][2] - flat_split_correlation(&spec, &law, 0, 2)).abs() < 1e-12);
    }

    #[test]
    fn example_independence_point() {
        let m = running_example_nb();
        assert_eq!(m.covariance(5, 8).unwrap(), 0.0);
        assert_eq!(m.correlation_matrix().unwrap()[5][8], 0.0);
        let q = |a: f64| {
            let m = running_example(SumLaw::negative_binomial(a, 0.95).unwrap());
            let g6 = m.path_constants(m.tree().leaf(5)).gamma;
            let g9 = m.path_constants(m.tree().leaf(8)).gamma;
            let odds: f64 = 0.95 / 0.05;
            let expect = a * odds * odds * (10.0 - a) / 11.0 * g6 * g9;
            (m.covariance(5, 8).unwrap(), expect)
        };
        for a in [2.0, 9.0, 11.0, 30.0] {
            let (cov, expect) = q(a);
            assert!((cov - expect).abs() < 1e-10 * expect.abs(), "{cov} {expect}");
        }
        assert!(q(9.0).0 > 0.0 && q(11.0).0 < 0.0);
    }

    #[test]
    fn y6_moments_follow_path_formula() {
        let m = running_example_nb();
        let (alpha, odds) = (10.0, 0.95 / 0.05);
        for r in 1..=3u64 {
            let rf = |x: f64| ln_gen_factorial(x, r, 1).unwrap().exp();
            let mu = rf(alpha) * libm::pow(odds, r as f64);
            let expect = mu * libm::pow(0.6, r as f64) * rf(3.5) / rf(10.0) * rf(0.8) / rf(1.8);
            let got = m.node_factorial_moment(m.tree().leaf(5), r);
            assert!((got - expect).abs() < 1e-12 * expect);
        }
        assert_eq!(m.node_factorial_moment(m.tree().root(), 2), m.sum_law().factorial_moment(2));
    }

    #[test]
    fn flat_product_moment() {
        let m = TreePolyaModel::new(
            PartitionTree::flat(3).unwrap(),
            vec![SplitSpec::dirichlet_multinomial(vec![1.0, 1.0, 1.0]).unwrap()],
            SumLaw::dirac(4),
        )
        .unwrap();
        let closed = m.factorial_moment(&[1, 1, 0]).unwrap();
        assert!((closed - 12.0 / 12.0).abs() < 1e-14);
        let enumerated: f64 = simplex(4, 3)
            .iter()
            .map(|y| (y[0] * y[1]) as f64 * m.joint_log_pmf(y).unwrap().exp())
            .sum();
        assert!((closed - enumerated).abs() < 1e-12);
        assert_eq!(m.factorial_moment(&[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn dispersion_classes() {
        let nb = running_example_nb().dispersion_report();
        assert_eq!(nb.sum_law, Dispersion::Over);
        assert!(nb.nodes.iter().all(|d| d.class == Dispersion::Over));

        let tree = crate::example::running_example_tree();
        let splits = tree
            .internal_nodes()
            .iter()
            .map(|&a| SplitSpec::multinomial(vec![1.0; tree.children(a).len()]).unwrap())
            .collect();
        let po = TreePolyaModel::new(tree, splits, SumLaw::poisson(4.0).unwrap()).unwrap().dispersion_report();
        assert!(po.nodes.iter().all(|d| d.class == Dispersion::Null && d.implied == Some(Dispersion::Null)));

        let d = TreePolyaModel::new(
            PartitionTree::flat(2).unwrap(),
            vec![SplitSpec::dirichlet_multinomial(vec![0.5, 4.0]).unwrap()],
            SumLaw::dirac(20),
        )
        .unwrap()
        .dispersion_report();
        assert_eq!(d.sum_law, Dispersion::Under);
        assert_eq!(d.nodes[1].implied, None);
        assert!(d.nodes.iter().all(|x| x.implied.is_none_or(|i| i == x.class)));
    }

    #[test]
    fn undefined_correlation() {
        let m = TreePolyaModel::new(
            PartitionTree::flat(2).unwrap(),
            vec![SplitSpec::dirichlet_multinomial(vec![1.0, 1.0]).unwrap()],
            SumLaw::dirac(0),
        )
        .unwrap();
        assert_eq!(m.correlation_matrix().unwrap_err().category(), "undefined-correlation");
    }
}
