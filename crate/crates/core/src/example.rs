//! The ten-leaf worked example used in the documentation and tests.
//!
//! Leaves `0..10` stand for `Y1..Y10`. The tree is
//!
//! ```text
//! root            multinomial (0.3, 0.1, 0.6)
//! ├── {0,1}       Dirichlet-multinomial (1.5, 1.5)
//! ├── {2}
//! └── {3..9}      Dirichlet-multinomial (3, 3.5, 3.5)
//!     ├── {3,4}   multinomial (0.5, 0.5)
//!     ├── {5,6}   Dirichlet-multinomial (0.8, 1)
//!     └── {7,8,9} Dirichlet-multinomial (1, 2.5)
//!         ├── {7}
//!         └── {8,9} multinomial (0.3, 0.7)
//! ```
//!
//! With `NB(10, 0.95)` on the total, `alpha` equals `|theta|` at `{3..9}`,
//! so leaves on different sides of that node are uncorrelated.
//!
//! ```
//! use treepolya_core::example::running_example_nb;
//!
//! let model = running_example_nb();
//! let cov = model.covariance(5, 8).unwrap();
//! assert_eq!(cov, 0.0);
//! ```

use alloc::vec;

use crate::marginal::{ChainStage, MarginalChain};
use crate::model::TreePolyaModel;
use crate::polya::{SplitKind, SplitSpec, SumLaw};
use crate::tree::{example_shape, PartitionTree};

pub fn running_example_tree() -> PartitionTree {
    PartitionTree::from_shape(10, &example_shape()).expect("valid example tree")
}

/// The example splits over an arbitrary sum law.
pub fn running_example(sum_law: SumLaw) -> TreePolyaModel {
    let m = |v: &[f64]| SplitSpec::multinomial(v.to_vec()).expect("valid");
    let dm = |v: &[f64]| SplitSpec::dirichlet_multinomial(v.to_vec()).expect("valid");
    let splits = vec![
        m(&[0.3, 0.1, 0.6]),
        dm(&[1.5, 1.5]),
        dm(&[3.0, 3.5, 3.5]),
        m(&[0.5, 0.5]),
        dm(&[0.8, 1.0]),
        dm(&[1.0, 2.5]),
        m(&[0.3, 0.7]),
    ];
    TreePolyaModel::new(running_example_tree(), splits, sum_law).expect("valid example model")
}

/// The example with `NB(alpha = 10, p = 0.95)` on the total.
pub fn running_example_nb() -> TreePolyaModel {
    running_example(SumLaw::negative_binomial(10.0, 0.95).expect("valid"))
}

/// Marginal chain of `Y6` with free stage parameters: a beta-binomial split
/// `(theta6, theta7)`, a beta-binomial split `(theta67, theta_rest)`, a
/// binomial split with probability `pi`, and `NB(alpha, p)` on the total.
pub fn y6_chain(theta6: f64, theta7: f64, theta67: f64, theta_rest: f64, pi: f64, alpha: f64, p: f64) -> MarginalChain {
    MarginalChain {
        stages: vec![
            ChainStage { kind: SplitKind::DirichletMultinomial, theta_num: theta6, theta_rest: theta7 },
            ChainStage { kind: SplitKind::DirichletMultinomial, theta_num: theta67, theta_rest },
            ChainStage { kind: SplitKind::Multinomial, theta_num: pi, theta_rest: 1.0 - pi },
        ],
        terminal: SumLaw::negative_binomial(alpha, p).expect("valid"),
    }
}
