//! Error type shared by every module.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Library error. [`Error::category`] gives a stable machine-readable tag.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid partition tree: {}", ViolationList(.0))]
    InvalidTree(Vec<TreeViolation>),
    #[error("relationship error: {0}")]
    Relationship(String),
    #[error("unsupported chain: {0}")]
    UnsupportedChain(String),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
}

impl Error {
    /// Short stable tag, e.g. `"domain"` or `"invalid-tree"`.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Usage(_) => "usage",
            Error::Convergence(_) => "convergence",
            Error::DegenerateFit(_) => "degenerate-fit",
            Error::InvalidTree(_) => "invalid-tree",
            Error::Relationship(_) => "relationship",
            Error::UnsupportedChain(_) => "unsupported-chain",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

/// One failed partition-tree invariant. `node` indexes the raw node table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeViolation {
    pub node: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// Root subset is not `{0, .., J-1}`.
    BadRoot,
    /// Internal node with fewer than two children.
    TrivialPartition,
    /// Two children share a leaf.
    Overlap { leaf: usize },
    /// Children do not cover the parent subset.
    Uncovered { leaf: usize },
    /// Child contains a leaf its parent does not.
    Foreign { leaf: usize },
    /// A leaf index has no singleton node.
    MissingLeaf { leaf: usize },
    /// A childless node that is not a singleton.
    NonSingletonLeaf,
    /// Leaf index at or beyond the leaf count.
    OutOfRange { leaf: usize },
    /// Node unreachable from the root.
    Unreachable,
    /// Node reached twice (shared child or cycle).
    MultipleParents,
    /// Child index outside the node table.
    DanglingChild { child: usize },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.node;
        match &self.kind {
            ViolationKind::BadRoot => write!(f, "node {n}: root subset is not the full leaf set"),
            ViolationKind::TrivialPartition => {
                write!(f, "node {n}: internal node needs at least two children")
            }
            ViolationKind::Overlap { leaf } => {
                write!(f, "node {n}: leaf {} appears in two children", leaf + 1)
            }
            ViolationKind::Uncovered { leaf } => {
                write!(f, "node {n}: leaf {} not covered by any child", leaf + 1)
            }
            ViolationKind::Foreign { leaf } => {
                write!(f, "node {n}: child holds leaf {} outside the parent", leaf + 1)
            }
            ViolationKind::MissingLeaf { leaf } => write!(f, "leaf {} has no singleton node", leaf + 1),
            ViolationKind::NonSingletonLeaf => write!(f, "node {n}: childless node is not a singleton"),
            ViolationKind::OutOfRange { leaf } => write!(f, "node {n}: leaf index {leaf} out of range"),
            ViolationKind::Unreachable => write!(f, "node {n}: unreachable from the root"),
            ViolationKind::MultipleParents => write!(f, "node {n}: reached more than once"),
            ViolationKind::DanglingChild { child } => {
                write!(f, "node {n}: child index {child} does not exist")
            }
        }
    }
}

struct ViolationList<'a>(&'a [TreeViolation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
