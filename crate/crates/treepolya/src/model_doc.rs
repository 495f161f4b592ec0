//! JSON documents for models and bare trees.
//!
//! A model document looks like
//!
//! ```json
//! {
//!   "columns": ["a", "b", "c"],
//!   "schema_version": "1",
//!   "sum_law": {"family": "poisson", "params": {"lambda": 3.0}},
//!   "tree": {
//!     "children": [{"leaf": "a"}, {"leaf": "b"}, {"leaf": "c"}],
//!     "split": {"c": 1, "theta": [1.0, 2.0, 0.5]}
//!   }
//! }
//! ```
//!
//! `columns` fixes the leaf order: leaf `j` of the model is column `j` of the
//! data. A tree document has the same shape without `sum_law`, and its nodes
//! may omit `split`. Keys are written in sorted order so that serialization
//! is reproducible byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use treepolya_core::{NodeId, PartitionTree, Shape, SplitKind, SplitSpec, SumLaw, TreePolyaModel};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: String,
    pub columns: Vec<String>,
    pub tree: NodeDoc,
    pub sum_law: SumLawDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub schema_version: String,
    pub columns: Vec<String>,
    pub tree: NodeDoc,
}

/// A leaf (`leaf` set) or an internal node (`children` set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitDoc {
    pub c: i64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum SumLawDoc {
    Dirac { m: u64 },
    Binomial { trials: u64, p: f64 },
    Poisson { lambda: f64 },
    NegativeBinomial { alpha: f64, p: f64 },
}

impl From<&SumLaw> for SumLawDoc {
    fn from(law: &SumLaw) -> Self {
        match *law {
            SumLaw::Dirac { m } => SumLawDoc::Dirac { m },
            SumLaw::Binomial { trials, p } => SumLawDoc::Binomial { trials, p },
            SumLaw::Poisson { lambda } => SumLawDoc::Poisson { lambda },
            SumLaw::NegativeBinomial { alpha, p } => SumLawDoc::NegativeBinomial { alpha, p },
        }
    }
}

impl SumLawDoc {
    pub fn to_sum_law(&self) -> Result<SumLaw> {
        Ok(match *self {
            SumLawDoc::Dirac { m } => SumLaw::dirac(m),
            SumLawDoc::Binomial { trials, p } => SumLaw::binomial(trials, p)?,
            SumLawDoc::Poisson { lambda } => SumLaw::poisson(lambda)?,
            SumLawDoc::NegativeBinomial { alpha, p } => SumLaw::negative_binomial(alpha, p)?,
        })
    }
}

/// A model together with the names of its leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedModel {
    pub columns: Vec<String>,
    pub model: TreePolyaModel,
}

/// A tree together with the names of its leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTree {
    pub columns: Vec<String>,
    pub tree: PartitionTree,
}

impl ModelDocument {
    pub fn from_model(model: &TreePolyaModel, columns: &[String]) -> Result<Self> {
        check_columns(columns, model.leaf_count())?;
        let tree = node_doc(model.tree(), model.tree().root(), columns, Some(model));
        Ok(ModelDocument {
            schema_version: SCHEMA_VERSION.into(),
            columns: columns.to_vec(),
            tree,
            sum_law: model.sum_law().into(),
        })
    }

    pub fn to_model(&self) -> Result<NamedModel> {
        check_version(&self.schema_version)?;
        let built = build(&self.columns, &self.tree, true)?;
        let mut splits = Vec::with_capacity(built.tree.internal_nodes().len());
        for &node in built.tree.internal_nodes() {
            let spec = built.splits.get(built.tree.subset(node)).cloned().expect("every internal node has a split");
            splits.push(spec);
        }
        let model = TreePolyaModel::new(built.tree, splits, self.sum_law.to_sum_law()?)?;
        Ok(NamedModel { columns: self.columns.clone(), model })
    }
}

impl TreeDocument {
    pub fn from_tree(tree: &PartitionTree, columns: &[String]) -> Result<Self> {
        check_columns(columns, tree.leaf_count())?;
        Ok(TreeDocument {
            schema_version: SCHEMA_VERSION.into(),
            columns: columns.to_vec(),
            tree: node_doc(tree, tree.root(), columns, None),
        })
    }

    pub fn to_tree(&self) -> Result<NamedTree> {
        check_version(&self.schema_version)?;
        let built = build(&self.columns, &self.tree, false)?;
        Ok(NamedTree { columns: self.columns.clone(), tree: built.tree })
    }
}

fn check_version(v: &str) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CliError::Document(format!("unsupported schema_version '{v}', expected '{SCHEMA_VERSION}'")))
    }
}

fn check_columns(columns: &[String], leaves: usize) -> Result<()> {
    if columns.len() != leaves {
        return Err(CliError::Usage(format!("{} column names for {leaves} leaves", columns.len())));
    }
    Ok(())
}

fn node_doc(tree: &PartitionTree, node: NodeId, columns: &[String], model: Option<&TreePolyaModel>) -> NodeDoc {
    if let Some(j) = tree.leaf_index(node) {
        return NodeDoc { leaf: Some(columns[j].clone()), split: None, children: Vec::new() };
    }
    let split = model.and_then(|m| m.split(node)).map(|s| SplitDoc { c: i64::from(s.c()), theta: s.theta().to_vec() });
    let children = tree.children(node).iter().map(|&c| node_doc(tree, c, columns, model)).collect();
    NodeDoc { leaf: None, split, children }
}

struct Built {
    tree: PartitionTree,
    splits: BTreeMap<Vec<usize>, SplitSpec>,
}

fn build(columns: &[String], root: &NodeDoc, need_splits: bool) -> Result<Built> {
    let mut index = BTreeMap::new();
    for (j, name) in columns.iter().enumerate() {
        if index.insert(name.as_str(), j).is_some() {
            return Err(CliError::Document(format!("duplicate column '{name}'")));
        }
    }
    let mut splits = BTreeMap::new();
    let shape = to_shape(root, "root", &index, columns, need_splits, &mut splits)?;
    let tree = PartitionTree::from_shape(columns.len(), &shape)?;
    Ok(Built { tree, splits })
}

// `at` names the node by its child positions from the root, e.g. "root/2/1".
fn to_shape(
    doc: &NodeDoc,
    at: &str,
    index: &BTreeMap<&str, usize>,
    columns: &[String],
    need_splits: bool,
    splits: &mut BTreeMap<Vec<usize>, SplitSpec>,
) -> Result<Shape> {
    match (&doc.leaf, doc.children.is_empty()) {
        (Some(name), true) => {
            if doc.split.is_some() {
                return Err(CliError::Document(format!("leaf node {at} ('{name}') has a split")));
            }
            let j = index
                .get(name.as_str())
                .ok_or_else(|| CliError::Document(format!("leaf node {at} names unknown column '{name}'")))?;
            Ok(Shape::Leaf(*j))
        }
        (Some(_), false) => Err(CliError::Document(format!("node {at} has both a leaf name and children"))),
        (None, true) => Err(CliError::Document(format!("node {at} has neither a leaf name nor children"))),
        (None, false) => {
            let children = doc
                .children
                .iter()
                .enumerate()
                .map(|(k, c)| to_shape(c, &format!("{at}/{}", k + 1), index, columns, need_splits, splits))
                .collect::<Result<Vec<Shape>>>()?;
            let shape = Shape::Node(children);
            let mut leaves = shape.leaves();
            leaves.sort_unstable();
            let describe = || {
                let names: Vec<&str> = leaves.iter().filter_map(|&j| columns.get(j).map(String::as_str)).collect();
                format!("node {at} (leaves {})", names.join(", "))
            };
            match &doc.split {
                Some(s) => {
                    let kind = SplitKind::from_c(s.c).map_err(|e| CliError::Document(format!("{}: {e}", describe())))?;
                    if s.theta.len() != doc.children.len() {
                        return Err(CliError::Document(format!(
                            "{}: split has {} parameters for {} children",
                            describe(),
                            s.theta.len(),
                            doc.children.len()
                        )));
                    }
                    let spec = SplitSpec::new(kind, s.theta.clone())
                        .map_err(|e| CliError::Document(format!("{}: {e}", describe())))?;
                    splits.insert(leaves.clone(), spec);
                }
                None if need_splits => return Err(CliError::Document(format!("{} has no split", describe()))),
                None => {}
            }
            Ok(shape)
        }
    }
}

fn canonical_json<T: Serialize>(doc: &T) -> Result<String> {
    // serde_json's map type is ordered, so going through a Value sorts keys.
    let value = serde_json::to_value(doc).map_err(|e| CliError::Document(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Document(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Canonical JSON text of a model.
pub fn serialize_model(model: &TreePolyaModel, columns: &[String]) -> Result<String> {
    canonical_json(&ModelDocument::from_model(model, columns)?)
}

/// Parse and validate a model document.
pub fn parse_model(text: &str) -> Result<NamedModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| CliError::Document(format!("model document: {e}")))?;
    doc.to_model()
}

/// Canonical JSON text of a bare tree.
pub fn serialize_tree(tree: &PartitionTree, columns: &[String]) -> Result<String> {
    canonical_json(&TreeDocument::from_tree(tree, columns)?)
}

/// Parse a tree document, or take the tree of a model document.
pub fn parse_tree(text: &str) -> Result<NamedTree> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Document(format!("tree document: {e}")))?;
    if value.get("sum_law").is_some() {
        let named = parse_model(text)?;
        return Ok(NamedTree { columns: named.columns, tree: named.model.tree().clone() });
    }
    let doc: TreeDocument =
        serde_json::from_value(value).map_err(|e| CliError::Document(format!("tree document: {e}")))?;
    doc.to_tree()
}
