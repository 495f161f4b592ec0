//! The Tree Pólya Splitting distribution: joint p.m.f. and exact sampling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::polya::{polya_pmf, polya_sample, SplitKind, SplitSpec, SumLaw};
use crate::special::LogValue;
use crate::tree::{NodeId, PartitionTree};

/// A partition tree, one split per internal node, and the law of the total.
///
/// `splits[k]` belongs to `tree.internal_nodes()[k]`, with its parameters in
/// the node's child order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePolyaModel {
    tree: PartitionTree,
    splits: Vec<SplitSpec>,
    sum_law: SumLaw,
}

impl TreePolyaModel {
    pub fn new(tree: PartitionTree, splits: Vec<SplitSpec>, sum_law: SumLaw) -> Result<Self> {
        let internal = tree.internal_nodes();
        if splits.len() != internal.len() {
            return Err(Error::usage(format!(
                "tree has {} internal nodes but {} splits were given",
                internal.len(),
                splits.len()
            )));
        }
        for (k, (&node, spec)) in internal.iter().zip(&splits).enumerate() {
            if spec.arity() != tree.children(node).len() {
                return Err(Error::usage(format!(
                    "split {k} has {} parameters, node has {} children",
                    spec.arity(),
                    tree.children(node).len()
                )));
            }
        }
        let model = TreePolyaModel { tree, splits, sum_law: sum_law.validated()? };
        model.check_hypergeometric_bounds()?;
        Ok(model)
    }

    // A hypergeometric node must hold at least as many balls as it can ever be
    // asked to draw: the sum-law maximum, tightened by hypergeometric ancestors.
    fn check_hypergeometric_bounds(&self) -> Result<()> {
        for (k, &node) in self.tree.internal_nodes().iter().enumerate() {
            let spec = &self.splits[k];
            if spec.kind() != SplitKind::Hypergeometric {
                continue;
            }
            let bound = self.max_total(node).ok_or_else(|| {
                Error::domain(format!(
                    "hypergeometric split at node {} needs a bounded sum law",
                    node.index()
                ))
            })?;
            if spec.theta_sum() < bound as f64 {
                return Err(Error::domain(format!(
                    "hypergeometric split at node {} holds {} but may receive {bound}",
                    node.index(),
                    spec.theta_sum()
                )));
            }
        }
        Ok(())
    }

    /// Upper bound on the total reaching `node`, `None` if unbounded.
    pub fn max_total(&self, node: NodeId) -> Option<u64> {
        let mut bound = self.sum_law.support_max();
        for &a in self.tree.path_to_root(node).iter() {
            if let Some(parent) = self.tree.parent(a) {
                let spec = self.split(parent).expect("internal");
                if spec.kind() == SplitKind::Hypergeometric {
                    let cap = self.theta(a).expect("non-root") as u64;
                    bound = Some(bound.map_or(cap, |b| b.min(cap)));
                }
            }
        }
        bound
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    pub fn splits(&self) -> &[SplitSpec] {
        &self.splits
    }

    pub fn sum_law(&self) -> &SumLaw {
        &self.sum_law
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.leaf_count()
    }

    /// Split at an internal node, `None` for leaves.
    pub fn split(&self, node: NodeId) -> Option<&SplitSpec> {
        self.tree.internal_index(node).map(|k| &self.splits[k])
    }

    /// Parameter attached to `node` in its parent's split, `None` at the root.
    pub fn theta(&self, node: NodeId) -> Option<f64> {
        let parent = self.tree.parent(node)?;
        let pos = self.tree.child_position(node)?;
        Some(self.split(parent)?.theta()[pos])
    }

    /// Same model with another sum law.
    pub fn with_sum_law(&self, sum_law: SumLaw) -> Result<Self> {
        Self::new(self.tree.clone(), self.splits.clone(), sum_law)
    }

    /// Free parameters: sum law plus every split.
    pub fn n_params(&self) -> usize {
        self.sum_law.n_params() + self.splits.iter().map(SplitSpec::n_params).sum::<usize>()
    }

    /// Total count below every node, indexed by node id.
    pub fn node_totals(&self, y: &[u64]) -> Result<Vec<u64>> {
        if y.len() != self.leaf_count() {
            return Err(Error::usage(format!(
                "observation has {} entries, model has {} leaves",
                y.len(),
                self.leaf_count()
            )));
        }
        let mut totals = vec![0u64; self.tree.node_count()];
        // Preorder ids: children always come after their parent.
        for id in self.tree.node_ids().collect::<Vec<_>>().into_iter().rev() {
            totals[id.index()] = match self.tree.leaf_index(id) {
                Some(j) => y[j],
                None => self.tree.children(id).iter().map(|c| totals[c.index()]).sum(),
            };
        }
        Ok(totals)
    }

    /// Joint probability of the leaf counts `y`.
    pub fn joint_log_pmf(&self, y: &[u64]) -> Result<LogValue> {
        let totals = self.node_totals(y)?;
        let mut p = self.sum_law.pmf(totals[0]);
        for (k, &node) in self.tree.internal_nodes().iter().enumerate() {
            if p.is_zero() {
                break;
            }
            let parts: Vec<u64> = self.tree.children(node).iter().map(|c| totals[c.index()]).collect();
            let n_node = totals[node.index()];
            let spec = &self.splits[k];
            if spec.kind() == SplitKind::Hypergeometric && n_node as f64 > spec.theta_sum() {
                return Ok(LogValue::ZERO);
            }
            p = p * polya_pmf(&parts, spec)?;
        }
        Ok(p)
    }

    /// Exact draw: the total first, then top-down splits.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<u64>> {
        let mut totals = vec![0u64; self.tree.node_count()];
        totals[0] = self.sum_law.sample(rng);
        for (k, &node) in self.tree.internal_nodes().iter().enumerate() {
            let parts = polya_sample(totals[node.index()], &self.splits[k], rng)?;
            for (&c, v) in self.tree.children(node).iter().zip(parts) {
                totals[c.index()] = v;
            }
        }
        Ok((0..self.leaf_count()).map(|j| totals[self.tree.leaf(j).index()]).collect())
    }
}
