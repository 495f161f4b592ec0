//! Fitting a model on a fixed tree.

use alloc::format;
use alloc::vec::Vec;

use super::node::{fit_node_dm, fit_node_multinomial, select_node_split, NodeData};
use super::sumlaw::fit_sum_law_with;
use super::{FitOptions, FitResult};
use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::model::TreePolyaModel;
use crate::polya::{SplitKind, SumLaw, SumLawFamily};
use crate::tree::{NodeId, PartitionTree};

/// Which split kind to fit at every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitChoice {
    /// Lower AIC of multinomial and Dirichlet-multinomial.
    #[default]
    Select,
    Multinomial,
    /// Dirichlet-multinomial, falling back to multinomial on divergence.
    DirichletMultinomial,
}

/// AIC contribution of one internal node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAic {
    pub node: NodeId,
    /// Leaves below the node, 0-based.
    pub subset: Vec<usize>,
    pub kind: SplitKind,
    pub n_params: usize,
    pub log_lik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub divergence_flag: bool,
}

/// Sum-law fit, node fits, and their totals.
#[derive(Debug, Clone, PartialEq)]
pub struct AicTable {
    pub sum_law: FitResult<SumLaw>,
    pub nodes: Vec<NodeAic>,
    pub total_log_lik: f64,
    pub total_params: usize,
    pub total_aic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeFit {
    pub model: TreePolyaModel,
    pub table: AicTable,
}

/// Child-subsum data of `node`.
pub(crate) fn node_data(data: &CountMatrix, tree: &PartitionTree, node: NodeId) -> Result<NodeData> {
    let groups: Vec<&[usize]> = tree.children(node).iter().map(|&c| tree.subset(c)).collect();
    NodeData::new(data.group_sums(&groups))
}

pub(crate) fn fit_split(data: &NodeData, choice: SplitChoice, opts: &FitOptions) -> Result<FitResult<crate::polya::SplitSpec>> {
    match choice {
        SplitChoice::Select => select_node_split(data, opts),
        SplitChoice::Multinomial => fit_node_multinomial(data),
        SplitChoice::DirichletMultinomial => match fit_node_dm(data, opts.tol, opts.max_iter) {
            Err(Error::Convergence(_)) => {
                let mut m = fit_node_multinomial(data)?;
                m.divergence_flag = true;
                Ok(m)
            }
            r => r,
        },
    }
}

/// Fit the sum law on the row totals and pick a split at every node.
pub fn fit_tree(tree: &PartitionTree, data: &CountMatrix, family: SumLawFamily, opts: &FitOptions) -> Result<TreeFit> {
    fit_tree_with(tree, data, family, opts, SplitChoice::Select)
}

pub fn fit_tree_with(
    tree: &PartitionTree,
    data: &CountMatrix,
    family: SumLawFamily,
    opts: &FitOptions,
    choice: SplitChoice,
) -> Result<TreeFit> {
    if tree.leaf_count() != data.n_cols() {
        return Err(Error::usage(format!(
            "tree has {} leaves but the data has {} columns",
            tree.leaf_count(),
            data.n_cols()
        )));
    }
    let sum_law = fit_sum_law_with(&data.totals(), family, opts)?;
    let mut nodes = Vec::with_capacity(tree.internal_nodes().len());
    let mut splits = Vec::with_capacity(tree.internal_nodes().len());
    for &node in tree.internal_nodes() {
        let nd = node_data(data, tree, node)?;
        let fit = fit_split(&nd, choice, opts).map_err(|e| annotate(e, tree, node))?;
        nodes.push(NodeAic {
            node,
            subset: tree.subset(node).to_vec(),
            kind: fit.params.kind(),
            n_params: fit.n_params,
            log_lik: fit.log_lik,
            aic: fit.aic,
            converged: fit.converged,
            iterations: fit.iterations,
            divergence_flag: fit.divergence_flag,
        });
        splits.push(fit.params);
    }
    let model = TreePolyaModel::new(tree.clone(), splits, sum_law.params)?;
    let table = AicTable::new(sum_law, nodes);
    Ok(TreeFit { model, table })
}

impl AicTable {
    pub(crate) fn new(sum_law: FitResult<SumLaw>, nodes: Vec<NodeAic>) -> Self {
        let total_log_lik = sum_law.log_lik + nodes.iter().map(|n| n.log_lik).sum::<f64>();
        let total_params = sum_law.n_params + nodes.iter().map(|n| n.n_params).sum::<usize>();
        let total_aic = sum_law.aic + nodes.iter().map(|n| n.aic).sum::<f64>();
        AicTable { sum_law, nodes, total_log_lik, total_params, total_aic }
    }
}

fn annotate(e: Error, tree: &PartitionTree, node: NodeId) -> Error {
    let leaves: Vec<usize> = tree.subset(node).iter().map(|j| j + 1).collect();
    let at = format!("node {} (leaves {leaves:?})", node.index());
    match e {
        Error::Convergence(m) => Error::Convergence(format!("{at}: {m}")),
        Error::DegenerateFit(m) => Error::DegenerateFit(format!("{at}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{at}: {m}")),
        Error::Usage(m) => Error::Usage(format!("{at}: {m}")),
        other => other,
    }
}
