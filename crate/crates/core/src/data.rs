//! Observation matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sites by species count matrix with column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    names: Vec<String>,
    n_rows: usize,
    counts: Vec<u64>,
}

impl CountMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<u64>>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::usage("count matrix needs at least one column"));
        }
        if rows.is_empty() {
            return Err(Error::usage("count matrix needs at least one row"));
        }
        if let Some(dup) = names.iter().enumerate().find(|(i, n)| names[..*i].contains(n)) {
            return Err(Error::usage(format!("duplicate column name '{}'", dup.1)));
        }
        let mut counts = Vec::with_capacity(rows.len() * names.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::usage(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    names.len()
                )));
            }
            counts.extend_from_slice(row);
        }
        Ok(CountMatrix { names, n_rows: rows.len(), counts })
    }

    /// Matrix with columns named `Y1..YJ`.
    pub fn unnamed(rows: Vec<Vec<u64>>) -> Result<Self> {
        let j = rows.first().map_or(0, Vec::len);
        Self::new((1..=j).map(|k| format!("Y{k}")).collect(), rows)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let j = self.n_cols();
        &self.counts[i * j..(i + 1) * j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> + '_ {
        self.counts.chunks(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Row totals.
    pub fn totals(&self) -> Vec<u64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Per row, the sum of each group of columns.
    pub fn group_sums(&self, groups: &[&[usize]]) -> Vec<Vec<u64>> {
        self.rows().map(|r| groups.iter().map(|g| g.iter().map(|&j| r[j]).sum()).collect()).collect()
    }

    /// Same data with rows reordered: row `k` of the result is row `order[k]`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_rows {
            return Err(Error::usage("row permutation has the wrong length"));
        }
        Self::new(self.names.clone(), order.iter().map(|&i| self.row(i).to_vec()).collect())
    }
}
