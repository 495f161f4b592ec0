//! Tables and text renderings of fits and models.

use std::fmt::Write as _;
use std::io::Write;

use treepolya_core::inference::{AicTable, SearchMove, TraceEntry};
use treepolya_core::{NodeId, SumLaw, TreePolyaModel};

use crate::csv_io::write_error;
use crate::error::Result;

fn leaf_names(columns: &[String], leaves: &[usize]) -> String {
    leaves.iter().map(|&j| columns[j].as_str()).collect::<Vec<_>>().join(" ")
}

/// Per-node AIC table: one row for the sum law, one per internal node and a total.
pub fn write_aic_table<W: Write>(out: W, table: &AicTable, columns: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "leaves", "kind", "n_params", "log_lik", "aic", "converged", "iterations", "divergence_flag"])
        .map_err(write_error)?;
    let s = &table.sum_law;
    w.write_record([
        "sum_law".to_string(),
        String::new(),
        s.params.family().name().to_string(),
        s.n_params.to_string(),
        s.log_lik.to_string(),
        s.aic.to_string(),
        s.converged.to_string(),
        s.iterations.to_string(),
        s.divergence_flag.to_string(),
    ])
    .map_err(write_error)?;
    for n in &table.nodes {
        w.write_record([
            n.node.index().to_string(),
            leaf_names(columns, &n.subset),
            n.kind.name().to_string(),
            n.n_params.to_string(),
            n.log_lik.to_string(),
            n.aic.to_string(),
            n.converged.to_string(),
            n.iterations.to_string(),
            n.divergence_flag.to_string(),
        ])
        .map_err(write_error)?;
    }
    w.write_record([
        "total".to_string(),
        String::new(),
        String::new(),
        table.total_params.to_string(),
        table.total_log_lik.to_string(),
        table.total_aic.to_string(),
        String::new(),
        String::new(),
        String::new(),
    ])
    .map_err(write_error)?;
    w.flush()?;
    Ok(())
}

/// Search trace, one row per accepted move.
pub fn write_trace<W: Write>(out: W, trace: &[TraceEntry], columns: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "action", "detail", "aic", "n_params"]).map_err(write_error)?;
    for t in trace {
        let (action, detail) = match &t.action {
            SearchMove::Initial => ("initial", String::new()),
            SearchMove::CreateNode { parent, pair } => (
                "create_node",
                format!("{} under {}", leaf_names(columns, &[pair.0, pair.1]), leaf_names(columns, parent)),
            ),
            SearchMove::TransferLeaf { leaf, into } => {
                ("transfer_leaf", format!("{} into {}", columns[*leaf], leaf_names(columns, into)))
            }
            SearchMove::UseMultinomial { node } => ("use_multinomial", leaf_names(columns, node)),
        };
        w.write_record([t.iteration.to_string(), action.to_string(), detail, t.aic.to_string(), t.n_params.to_string()])
            .map_err(write_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean, variance and dispersion of the total and every node.
pub fn write_moments<W: Write>(out: W, model: &TreePolyaModel, columns: &[String]) -> Result<()> {
    let report = model.dispersion_report();
    let law = model.sum_law();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "leaves", "mean", "variance", "dispersion", "implied"]).map_err(write_error)?;
    w.write_record([
        "total".to_string(),
        String::new(),
        law.mean().to_string(),
        law.variance().to_string(),
        report.sum_law.name().to_string(),
        String::new(),
    ])
    .map_err(write_error)?;
    for n in &report.nodes {
        let label = match model.tree().leaf_index(n.node) {
            Some(j) => columns[j].clone(),
            None => n.node.index().to_string(),
        };
        w.write_record([
            label,
            leaf_names(columns, model.tree().subset(n.node)),
            n.mean.to_string(),
            n.variance.to_string(),
            n.class.name().to_string(),
            n.implied.map_or(String::new(), |d| d.name().to_string()),
        ])
        .map_err(write_error)?;
    }
    w.flush()?;
    Ok(())
}

fn law_text(law: &SumLaw) -> String {
    match *law {
        SumLaw::Dirac { m } => format!("dirac(m={m})"),
        SumLaw::Binomial { trials, p } => format!("binomial(trials={trials}, p={p})"),
        SumLaw::Poisson { lambda } => format!("poisson(lambda={lambda})"),
        SumLaw::NegativeBinomial { alpha, p } => format!("negative_binomial(alpha={alpha}, p={p})"),
    }
}

/// Indented text rendering of the tree with split kinds and parameter counts.
pub fn describe(model: &TreePolyaModel, columns: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "leaves: {}", model.leaf_count());
    let _ = writeln!(s, "internal nodes: {}", model.tree().internal_nodes().len());
    let _ = writeln!(s, "parameters: {}", model.n_params());
    let law = model.sum_law();
    let _ = writeln!(s, "sum law: {} [{} parameters]", law_text(law), law.n_params());
    render(model, model.tree().root(), columns, 0, &mut s);
    s
}

fn render(model: &TreePolyaModel, node: NodeId, columns: &[String], depth: usize, s: &mut String) {
    let pad = "  ".repeat(depth);
    if let Some(j) = model.tree().leaf_index(node) {
        let _ = writeln!(s, "{pad}{}", columns[j]);
        return;
    }
    let spec = model.split(node).expect("internal");
    let theta: Vec<String> = spec.theta().iter().map(f64::to_string).collect();
    let _ = writeln!(
        s,
        "{pad}{} theta=[{}] [{} parameters]",
        spec.kind().name(),
        theta.join(", "),
        spec.n_params()
    );
    for &c in model.tree().children(node) {
        render(model, c, columns, depth + 1, s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use treepolya_core::example::running_example_nb;

    #[test]
    fn describe_lists_every_node() {
        let m = running_example_nb();
        let names: Vec<String> = (1..=10).map(|j| format!("Y{j}")).collect();
        let text = describe(&m, &names);
        assert!(text.contains("parameters: 15"), "{text}");
        assert_eq!(text.lines().filter(|l| l.contains("theta=")).count(), 7);
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with('Y')).count(), 10);
    }

    #[test]
    fn moments_table_has_one_row_per_node() {
        let m = running_example_nb();
        let names: Vec<String> = (1..=10).map(|j| format!("Y{j}")).collect();
        let mut buf = Vec::new();
        write_moments(&mut buf, &m, &names).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + m.tree().node_count());
        assert!(text.lines().all(|l| !l.contains("under")));
    }
}
