//! Tree Pólya Splitting distributions for multivariate count data.
//!
//! A Tree Pólya Splitting model draws a total `N` from a univariate sum law and
//! then splits it recursively down a partition tree, applying one Pólya split
//! (hypergeometric, multinomial or Dirichlet-multinomial) at each internal node.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`special`]: log-space generalized factorials and hypergeometric series,
//! * [`tree`]: partition tree construction, validation and traversal,
//! * [`polya`]: Pólya kernels, sum laws and their samplers,
//! * [`model`], [`marginal`], [`moments`]: the tree distribution itself,
//! * [`inference`]: maximum likelihood fitting and greedy tree search.
//!
//! ```
//! use treepolya_core::{PartitionTree, Shape, SplitKind, SplitSpec, SumLaw, TreePolyaModel};
//!
//! let tree = PartitionTree::from_shape(3, &Shape::node([
//!     Shape::leaf(0),
//!     Shape::node([Shape::leaf(1), Shape::leaf(2)]),
//! ])).unwrap();
//! let splits = vec![
//!     SplitSpec::new(SplitKind::Multinomial, vec![0.4, 0.6]).unwrap(),
//!     SplitSpec::new(SplitKind::DirichletMultinomial, vec![1.0, 2.0]).unwrap(),
//! ];
//! let model = TreePolyaModel::new(tree, splits, SumLaw::poisson(3.0).unwrap()).unwrap();
//! let p = model.joint_log_pmf(&[1, 0, 2]).unwrap().exp();
//! assert!(p > 0.0 && p < 1.0);
//! ```
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]
// Checks like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod example;
pub mod inference;
pub mod marginal;
pub mod model;
pub mod moments;
pub mod polya;
pub mod special;
pub mod tree;

pub use data::CountMatrix;
pub use error::{Error, Result, TreeViolation, ViolationKind};
pub use marginal::{ChainStage, MarginalChain};
pub use model::TreePolyaModel;
pub use moments::{CovarianceRatio, Dispersion, DispersionReport, PathConstants};
pub use polya::{SplitKind, SplitSpec, SumLaw, SumLawFamily};
pub use special::LogValue;
pub use tree::{NodeId, PartitionTree, RawNode, Shape};
