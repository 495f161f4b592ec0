//! Properties of the public API across modules.

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treepolya_core::example::running_example;
use treepolya_core::inference::{
    fit_node_dm, fit_node_multinomial, search_tree, NodeData, SearchConfig, SearchMove,
};
use treepolya_core::special::pfq_convergent;
use treepolya_core::{
    CountMatrix, NodeId, PartitionTree, Shape, SplitKind, SplitSpec, SumLaw, SumLawFamily, TreePolyaModel,
};

fn random_shape(leaves: &[usize], rng: &mut ChaCha8Rng) -> Shape {
    if leaves.len() == 1 {
        return Shape::leaf(leaves[0]);
    }
    let k = rng.random_range(2..=leaves.len().min(3));
    let mut children = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let left = k - i - 1;
        let size = if left == 0 { leaves.len() - start } else { rng.random_range(1..=leaves.len() - start - left) };
        children.push(random_shape(&leaves[start..start + size], rng));
        start += size;
    }
    Shape::node(children)
}

fn random_model(leaves: usize, law: SumLaw, rng: &mut ChaCha8Rng) -> TreePolyaModel {
    let order: Vec<usize> = (0..leaves).collect();
    let tree = PartitionTree::from_shape(leaves, &random_shape(&order, rng)).unwrap();
    let splits = tree
        .internal_nodes()
        .iter()
        .map(|&a| {
            let k = tree.children(a).len();
            if rng.random_bool(0.5) {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = w.iter().sum();
                SplitSpec::multinomial(w.iter().map(|x| x / s).collect()).unwrap()
            } else {
                SplitSpec::dirichlet_multinomial((0..k).map(|_| rng.random_range(0.3..4.0)).collect()).unwrap()
            }
        })
        .collect();
    TreePolyaModel::new(tree, splits, law).unwrap()
}

/// `prod (theta)(theta + c) / (|theta|)(|theta| + c)` along the root path.
fn second_order_path_product(model: &TreePolyaModel, node: NodeId) -> f64 {
    let path = model.tree().path_to_root(node);
    path.windows(2)
        .map(|w| {
            let spec = model.split(w[1]).unwrap();
            let c = f64::from(spec.c());
            let t = model.theta(w[0]).unwrap();
            let s = spec.theta_sum();
            t * (t + c) / (s * (s + c))
        })
        .product()
}

#[test]
fn gauss_series_matches_extended_precision_sum() {
    // Partial sums of 2F1(2, 1.5; 3; z) at the double nearest -0.3, carried
    // out in 50-digit arithmetic until the terms fell below 1e-45.
    let oracle = 0.765_930_862_496_319_7;
    let v = pfq_convergent(&[2.0, 1.5], &[3.0], -0.3, 1e-15).unwrap();
    assert!((v - oracle).abs() <= 1e-12, "{v} vs {oracle}");
}

#[test]
fn depth_decay_on_a_cascade() {
    let split = || SplitSpec::dirichlet_multinomial(vec![1.0, 1.0]).unwrap();
    let law = SumLaw::negative_binomial(2.0, 0.9).unwrap();
    let mut last_gamma = 1.0;
    for depth in 1..=20usize {
        let order: Vec<usize> = (0..=depth).collect();
        let tree = PartitionTree::cascade(&order).unwrap();
        let model = TreePolyaModel::new(tree, vec![split(); depth], law).unwrap();
        let deepest = model.tree().leaf(depth);
        let gamma = model.path_constants(deepest).gamma;
        assert!(gamma < last_gamma, "depth {depth}");
        last_gamma = gamma;
        if depth == 20 {
            let r = model.correlation_matrix().unwrap()[0][depth];
            assert!(r.abs() < 1e-2, "{r}");
        }
    }
}

#[test]
fn independent_columns_mostly_stay_flat() {
    // Columns drawn as independent negative binomials. A nested
    // Dirichlet-multinomial still contains this law, so AIC keeps a small
    // chance of accepting a pair at any sample size.
    let theta = [1.0, 2.0, 3.0];
    let spec = SplitSpec::dirichlet_multinomial(theta.to_vec()).unwrap();
    let law = SumLaw::negative_binomial(6.0, 0.8).unwrap();
    let model = TreePolyaModel::new(PartitionTree::flat(3).unwrap(), vec![spec], law).unwrap();
    let mut flat = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..2000).map(|_| model.sample(&mut rng).unwrap()).collect();
        let data = CountMatrix::unnamed(rows).unwrap();
        let result = search_tree(&data, SumLawFamily::NegativeBinomial, &SearchConfig::default()).unwrap();
        if !result.trace.iter().any(|t| matches!(t.action, SearchMove::CreateNode { .. })) {
            flat += 1;
        }
    }
    assert!(flat >= 14, "{flat} of 20 searches stayed flat");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_gap_between_nb_and_dirac_totals(m in 1u64..60, p in 0.05f64..0.95, seed in any::<u64>()) {
        let alpha = m as f64 * (1.0 - p) / p;
        let nb = running_example(SumLaw::negative_binomial(alpha, p).unwrap());
        let dirac = nb.with_sum_law(SumLaw::dirac(m)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = rng.random_range(0..10);
        let leaf = nb.tree().leaf(j);
        let gap = nb.node_variance(leaf) - dirac.node_variance(leaf);
        let want = m as f64 / (1.0 - p) * second_order_path_product(&nb, leaf);
        prop_assert!(gap > 0.0);
        prop_assert!((gap - want).abs() <= 1e-10 * want.max(1.0), "{gap} vs {want}");
    }

    #[test]
    fn covariance_sign_depends_only_on_the_ancestor(seed in any::<u64>(), dirac in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = if dirac {
            SumLaw::dirac(rng.random_range(1..50))
        } else {
            SumLaw::negative_binomial(rng.random_range(0.5..20.0), rng.random_range(0.1..0.95)).unwrap()
        };
        let model = random_model(rng.random_range(3..=8), law, &mut rng);
        let tree = model.tree();
        let n = model.leaf_count();
        let mut signs: Vec<(NodeId, f64)> = Vec::new();
        for i in 0..n {
            for j in 0..i {
                let (s, _, _) = tree.common_ancestor(tree.leaf(i), tree.leaf(j)).unwrap();
                let cov = model.covariance(i, j).unwrap();
                if cov.abs() < 1e-12 * model.node_variance(tree.leaf(i)).max(1.0) {
                    continue;
                }
                match signs.iter().find(|(a, _)| *a == s) {
                    Some(&(_, sign)) => prop_assert_eq!(sign, cov.signum(), "ancestor {:?}", s),
                    None => signs.push((s, cov.signum())),
                }
            }
        }
    }

    #[test]
    fn dm_fit_never_loses_to_multinomial(seed in any::<u64>(), arity in 2usize..5, dispersed in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = if dispersed {
            SplitSpec::dirichlet_multinomial((0..arity).map(|_| rng.random_range(0.5..5.0)).collect()).unwrap()
        } else {
            SplitSpec::multinomial(vec![1.0 / arity as f64; arity]).unwrap()
        };
        let tree = PartitionTree::flat(arity).unwrap();
        let model = TreePolyaModel::new(tree, vec![spec], SumLaw::poisson(20.0).unwrap()).unwrap();
        let rows: Vec<Vec<u64>> = (0..200).map(|_| model.sample(&mut rng).unwrap()).collect();
        let data = NodeData::new(rows).unwrap();
        let m = fit_node_multinomial(&data).unwrap();
        let dm = fit_node_dm(&data, 1e-8, 200).unwrap();
        prop_assert_eq!(dm.divergence_flag, dm.params.kind() == SplitKind::Multinomial);
        prop_assert!(dm.log_lik >= m.log_lik - 1e-6, "{} < {}", dm.log_lik, m.log_lik);
    }
}
