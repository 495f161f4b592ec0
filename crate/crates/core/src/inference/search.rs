//! Greedy AIC search over partition trees.
//!
//! Starting from a flat Dirichlet-multinomial, the search repeatedly groups
//! two leaf children of a node into a new child node, then moves single leaf
//! children into that new node while the AIC keeps dropping. It then descends
//! into every node it created. A final pass swaps in a multinomial wherever
//! that lowers the AIC.
//!
//! Node AICs only depend on how a node's leaves are grouped among its
//! children, so every fit is cached by that grouping.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::fit::{fit_split, AicTable, NodeAic, SplitChoice};
use super::node::{fit_node_multinomial, NodeData};
use super::sumlaw::fit_sum_law_with;
use super::{FitOptions, FitResult};
use crate::data::CountMatrix;
use crate::error::{Error, Result};
use crate::model::TreePolyaModel;
use crate::polya::{SplitSpec, SumLawFamily};
use crate::tree::{PartitionTree, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Cap on accepted moves.
    pub max_iterations: usize,
    /// Smallest AIC decrease that counts as an improvement.
    pub aic_epsilon: f64,
    /// Leaf order used to enumerate candidates; ties go to the earliest pair
    /// or leaf in this order. `None` means `0..J`.
    pub seed_order: Option<Vec<usize>>,
    pub fit: FitOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_iterations: 10_000, aic_epsilon: 1e-6, seed_order: None, fit: FitOptions::default() }
    }
}

/// One accepted step. Leaf sets are 0-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchMove {
    /// The flat Dirichlet-multinomial start.
    Initial,
    /// Leaves `pair` of node `parent` grouped into a new node.
    CreateNode { parent: Vec<usize>, pair: (usize, usize) },
    /// `leaf` moved into its sibling node, which now covers `into`.
    TransferLeaf { leaf: usize, into: Vec<usize> },
    /// The split at `node` replaced by a multinomial.
    UseMultinomial { node: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub action: SearchMove,
    /// Total AIC after the move.
    pub aic: f64,
    pub n_params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub model: TreePolyaModel,
    pub table: AicTable,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Child {
    Leaf(usize),
    Node(usize),
}

type Grouping = Vec<Vec<usize>>;

struct Search<'a> {
    data: &'a CountMatrix,
    opts: FitOptions,
    eps: f64,
    rank: Vec<usize>,
    arena: Vec<Vec<Child>>,
    cache: BTreeMap<Grouping, FitResult<SplitSpec>>,
    trace: Vec<TraceEntry>,
    total_aic: f64,
    total_params: usize,
    moves_left: usize,
}

impl Search<'_> {
    fn leaves_of(&self, child: Child) -> Vec<usize> {
        match child {
            Child::Leaf(j) => vec![j],
            Child::Node(k) => {
                let mut out: Vec<usize> = self.arena[k].iter().flat_map(|&c| self.leaves_of(c)).collect();
                out.sort_unstable();
                out
            }
        }
    }

    fn grouping(&self, children: &[Child]) -> Grouping {
        let mut g: Grouping = children.iter().map(|&c| self.leaves_of(c)).collect();
        g.sort();
        g
    }

    fn fit(&mut self, grouping: &Grouping) -> Result<&FitResult<SplitSpec>> {
        if !self.cache.contains_key(grouping) {
            let groups: Vec<&[usize]> = grouping.iter().map(Vec::as_slice).collect();
            let nd = NodeData::new(self.data.group_sums(&groups))?;
            let fit = fit_split(&nd, SplitChoice::DirichletMultinomial, &self.opts)?;
            self.cache.insert(grouping.clone(), fit);
        }
        Ok(&self.cache[grouping])
    }

    fn cost(&mut self, grouping: &Grouping) -> Result<(f64, usize)> {
        let f = self.fit(grouping)?;
        Ok((f.aic, f.n_params))
    }

    fn record(&mut self, action: SearchMove, delta: f64, dparams: isize) {
        self.total_aic += delta;
        self.total_params = (self.total_params as isize + dparams) as usize;
        self.moves_left -= 1;
        let iteration = self.trace.len();
        self.trace.push(TraceEntry { iteration, action, aic: self.total_aic, n_params: self.total_params });
    }

    fn leaf_children(&self, node: usize) -> Vec<usize> {
        let mut leaves: Vec<usize> =
            self.arena[node].iter().filter_map(|c| if let Child::Leaf(j) = c { Some(*j) } else { None }).collect();
        leaves.sort_by_key(|&j| self.rank[j]);
        leaves
    }

    fn grow(&mut self, node: usize) -> Result<()> {
        let mut created = Vec::new();
        while self.moves_left > 0 && self.arena[node].len() >= 3 {
            let leaves = self.leaf_children(node);
            let current = self.grouping(&self.arena[node].clone());
            let (cur_aic, cur_k) = self.cost(&current)?;
            let mut best: Option<(f64, isize, usize, usize)> = None;
            for a in 0..leaves.len() {
                for b in a + 1..leaves.len() {
                    let (i, j) = (leaves[a], leaves[b]);
                    let parent = merged_grouping(&current, &[i], &[j]);
                    let pair = vec![vec![i], vec![j]];
                    let (pa, pk) = self.cost(&parent)?;
                    let (na, nk) = self.cost(&pair)?;
                    let delta = pa + na - cur_aic;
                    if best.is_none_or(|b| delta < b.0) {
                        best = Some((delta, (pk + nk) as isize - cur_k as isize, i, j));
                    }
                }
            }
            let Some((delta, dk, i, j)) = best else { break };
            if !(delta < -self.eps) {
                break;
            }
            let new = self.arena.len();
            self.arena.push(vec![Child::Leaf(i), Child::Leaf(j)]);
            let pos = self.arena[node].iter().position(|&c| c == Child::Leaf(i) || c == Child::Leaf(j)).expect("present");
            self.arena[node].retain(|&c| c != Child::Leaf(i) && c != Child::Leaf(j));
            self.arena[node].insert(pos, Child::Node(new));
            let parent_set = current.concat().into_iter().collect::<alloc::collections::BTreeSet<_>>().into_iter().collect();
            let (pi, pj) = if i < j { (i, j) } else { (j, i) };
            self.record(SearchMove::CreateNode { parent: parent_set, pair: (pi, pj) }, delta, dk);
            created.push(new);
            self.transfer_into(node, new)?;
        }
        for c in created {
            self.grow(c)?;
        }
        Ok(())
    }

    fn transfer_into(&mut self, node: usize, target: usize) -> Result<()> {
        while self.moves_left > 0 && self.arena[node].len() >= 3 {
            let leaves = self.leaf_children(node);
            let parent = self.grouping(&self.arena[node].clone());
            let inner = self.grouping(&self.arena[target].clone());
            let target_set = self.leaves_of(Child::Node(target));
            let (pa, pk) = self.cost(&parent)?;
            let (ta, tk) = self.cost(&inner)?;
            let mut best: Option<(f64, isize, usize)> = None;
            for &k in &leaves {
                let mut grown = target_set.clone();
                grown.push(k);
                grown.sort_unstable();
                let mut p2: Grouping = parent.iter().filter(|g| **g != [k] && **g != target_set).cloned().collect();
                p2.push(grown);
                p2.sort();
                let mut t2 = inner.clone();
                t2.push(vec![k]);
                t2.sort();
                let (pa2, pk2) = self.cost(&p2)?;
                let (ta2, tk2) = self.cost(&t2)?;
                let delta = pa2 + ta2 - pa - ta;
                if best.is_none_or(|b| delta < b.0) {
                    best = Some((delta, (pk2 + tk2) as isize - (pk + tk) as isize, k));
                }
            }
            let Some((delta, dk, k)) = best else { break };
            if !(delta < -self.eps) {
                break;
            }
            self.arena[node].retain(|&c| c != Child::Leaf(k));
            self.arena[target].push(Child::Leaf(k));
            let into = self.leaves_of(Child::Node(target));
            self.record(SearchMove::TransferLeaf { leaf: k, into }, delta, dk);
        }
        Ok(())
    }

    fn shape(&self, node: usize) -> Shape {
        Shape::Node(
            self.arena[node]
                .iter()
                .map(|&c| match c {
                    Child::Leaf(j) => Shape::Leaf(j),
                    Child::Node(k) => self.shape(k),
                })
                .collect(),
        )
    }
}

fn merged_grouping(g: &Grouping, a: &[usize], b: &[usize]) -> Grouping {
    let mut out: Grouping = g.iter().filter(|x| x.as_slice() != a && x.as_slice() != b).cloned().collect();
    let mut m: Vec<usize> = a.iter().chain(b).copied().collect();
    m.sort_unstable();
    out.push(m);
    out.sort();
    out
}

/// Greedy search for a partition tree minimizing the AIC.
pub fn search_tree(data: &CountMatrix, family: SumLawFamily, config: &SearchConfig) -> Result<SearchResult> {
    let j = data.n_cols();
    if j < 2 {
        return Err(Error::usage("tree search needs at least two columns"));
    }
    if !(config.aic_epsilon > 0.0) {
        return Err(Error::usage("aic_epsilon must be positive"));
    }
    let order: Vec<usize> = config.seed_order.clone().unwrap_or_else(|| (0..j).collect());
    let mut rank = vec![usize::MAX; j];
    for (pos, &leaf) in order.iter().enumerate() {
        if leaf >= j || rank[leaf] != usize::MAX {
            return Err(Error::usage("seed_order must be a permutation of the columns"));
        }
        rank[leaf] = pos;
    }
    if order.len() != j {
        return Err(Error::usage("seed_order must be a permutation of the columns"));
    }

    let sum_law = fit_sum_law_with(&data.totals(), family, &config.fit)?;
    let mut s = Search {
        data,
        opts: config.fit,
        eps: config.aic_epsilon,
        rank,
        arena: vec![order.iter().map(|&l| Child::Leaf(l)).collect()],
        cache: BTreeMap::new(),
        trace: Vec::new(),
        total_aic: 0.0,
        total_params: 0,
        moves_left: config.max_iterations,
    };
    // keep the root's children in column order
    s.arena[0].sort_by_key(|c| if let Child::Leaf(l) = c { *l } else { 0 });
    let flat = s.grouping(&s.arena[0].clone());
    let (a0, k0) = s.cost(&flat)?;
    s.total_aic = sum_law.aic + a0;
    s.total_params = sum_law.n_params + k0;
    s.trace.push(TraceEntry { iteration: 0, action: SearchMove::Initial, aic: s.total_aic, n_params: s.total_params });
    s.grow(0)?;

    let tree = PartitionTree::from_shape(j, &s.shape(0))?;
    let mut splits = Vec::new();
    let mut nodes = Vec::new();
    for &node in tree.internal_nodes() {
        let grouping: Grouping = {
            let mut g: Grouping = tree.children(node).iter().map(|&c| tree.subset(c).to_vec()).collect();
            g.sort();
            g
        };
        let dm = s.fit(&grouping)?.clone();
        let mut chosen = dm.clone();
        if !dm.divergence_flag {
            let groups: Vec<&[usize]> = grouping.iter().map(Vec::as_slice).collect();
            let m = fit_node_multinomial(&NodeData::new(data.group_sums(&groups))?)?;
            if m.aic < dm.aic - s.eps && s.moves_left > 0 {
                let delta = m.aic - dm.aic;
                let dk = m.n_params as isize - dm.n_params as isize;
                s.record(SearchMove::UseMultinomial { node: tree.subset(node).to_vec() }, delta, dk);
                chosen = m;
            }
        }
        // parameters follow the tree's child order, not the sorted grouping
        let by_group: Vec<f64> = tree
            .children(node)
            .iter()
            .map(|&c| chosen.params.theta()[grouping.iter().position(|g| g == tree.subset(c)).expect("child")])
            .collect();
        nodes.push(NodeAic {
            node,
            subset: tree.subset(node).to_vec(),
            kind: chosen.params.kind(),
            n_params: chosen.n_params,
            log_lik: chosen.log_lik,
            aic: chosen.aic,
            converged: chosen.converged,
            iterations: chosen.iterations,
            divergence_flag: chosen.divergence_flag,
        });
        splits.push(SplitSpec::new(chosen.params.kind(), by_group)?);
    }
    let model = TreePolyaModel::new(tree, splits, sum_law.params)?;
    let table = AicTable::new(sum_law, nodes);
    Ok(SearchResult { model, table, trace: s.trace })
}
