//! End-to-end runs of every subcommand on temporary files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use treepolya::cli::run;
use treepolya::csv_io::write_counts;
use treepolya::{parse_model, read_counts, serialize_model, serialize_tree, CliError};
use treepolya_core::example::running_example_nb;
use treepolya_core::{PartitionTree, Shape, SplitSpec, SumLaw, TreePolyaModel};

fn names(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("Y{j}")).collect()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn running_example(&self) -> PathBuf {
        self.write("model.json", &serialize_model(&running_example_nb(), &names(10)).unwrap())
    }
}

fn run_ok(args: &[&str]) -> String {
    let mut out = Vec::new();
    let mut argv = vec!["treepolya"];
    argv.extend_from_slice(args);
    run(argv, &mut out).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    String::from_utf8(out).unwrap()
}

fn run_err(args: &[&str]) -> CliError {
    let mut argv = vec!["treepolya"];
    argv.extend_from_slice(args);
    run(argv, &mut Vec::new()).unwrap_err()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_is_reproducible() {
    let ws = Workspace::new();
    let model = ws.running_example();
    let (a, b) = (ws.path("a.csv"), ws.path("b.csv"));
    run_ok(&["sample", "--model", s(&model), "--n", "50", "--seed", "7", "--out", s(&a)]);
    run_ok(&["sample", "--model", s(&model), "--n", "50", "--seed", "7", "--out", s(&b)]);
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    let data = read_counts(a.as_slice()).unwrap();
    assert_eq!(data.n_rows(), 50);
    assert_eq!(data.names(), names(10));
    let other = run_ok(&["sample", "--model", s(&model), "--n", "50", "--seed", "8"]);
    assert_ne!(other.as_bytes(), a.as_slice());
}

#[test]
fn corr_matches_the_library() {
    let ws = Workspace::new();
    let model = ws.running_example();
    let out = ws.path("corr.csv");
    run_ok(&["corr", "--model", s(&model), "--out", s(&out)]);
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], ",Y1,Y2,Y3,Y4,Y5,Y6,Y7,Y8,Y9,Y10");
    let want = running_example_nb().correlation_matrix().unwrap();
    for (line, row) in lines[1..].iter().zip(&want) {
        let got: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(&got, row);
    }
}

#[test]
fn pmf_matches_the_library() {
    let ws = Workspace::new();
    let model = ws.running_example();
    let obs = ws.write("obs.csv", "Y10,Y9,Y8,Y7,Y6,Y5,Y4,Y3,Y2,Y1\n0,1,2,3,4,5,6,7,8,9\n0,0,0,0,0,0,0,0,0,0\n");
    let text = run_ok(&["pmf", "--model", s(&model), "--obs", s(&obs)]);
    let m = running_example_nb();
    let want = [
        m.joint_log_pmf(&[9, 8, 7, 6, 5, 4, 3, 2, 1, 0]).unwrap().ln(),
        m.joint_log_pmf(&[0; 10]).unwrap().ln(),
    ];
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row,log_pmf");
    for (k, line) in lines[1..].iter().enumerate() {
        let (row, v) = line.split_once(',').unwrap();
        assert_eq!(row, (k + 1).to_string());
        assert_eq!(v.parse::<f64>().unwrap(), want[k]);
    }
}

#[test]
fn moments_and_describe() {
    let ws = Workspace::new();
    let model = ws.running_example();
    let table = run_ok(&["moments", "--model", s(&model)]);
    assert_eq!(table.lines().count(), 2 + running_example_nb().tree().node_count());
    let one = run_ok(&["moments", "--model", s(&model), "--leaf", "Y6", "--order", "2"]);
    let m = running_example_nb();
    let want = m.node_factorial_moment(m.tree().leaf(5), 2);
    assert_eq!(one, format!("leaf,order,factorial_moment\nY6,2,{want}\n"));
    let text = run_ok(&["describe", "--model", s(&model)]);
    assert!(text.contains("parameters: 15"), "{text}");
}

fn simulated(ws: &Workspace) -> (PathBuf, PathBuf) {
    let m = running_example_nb();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<u64>> = (0..400).map(|_| m.sample(&mut rng).unwrap()).collect();
    let mut csv = Vec::new();
    write_counts(&mut csv, &names(10), rows.iter().map(Vec::as_slice)).unwrap();
    let data = ws.write("data.csv", std::str::from_utf8(&csv).unwrap());
    let tree = ws.write("tree.json", &serialize_tree(m.tree(), &names(10)).unwrap());
    (data, tree)
}

#[test]
fn fit_writes_model_and_report() {
    let ws = Workspace::new();
    let (data, tree) = simulated(&ws);
    let out = ws.path("fit.json");
    let report = run_ok(&["fit", "--data", s(&data), "--tree", s(&tree), "--sum-law", "nb", "--out", s(&out)]);
    let fitted = parse_model(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(fitted.columns, names(10));
    assert_eq!(fitted.model.tree(), running_example_nb().tree());
    let lines: Vec<&str> = report.lines().collect();
    assert!(lines[0].starts_with("node,leaves,kind,n_params,log_lik,aic"));
    assert_eq!(lines.len(), 1 + 1 + 7 + 1);
    let total: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(total[0], "total");
    assert_eq!(total[3], fitted.model.n_params().to_string());

    // A model document works as a tree document.
    let again = ws.path("again.json");
    run_ok(&["fit", "--data", s(&data), "--tree", s(&out), "--sum-law", "poisson", "--split", "multinomial", "--out", s(&again)]);
    let m = parse_model(&fs::read_to_string(again).unwrap()).unwrap();
    assert_eq!(m.model.sum_law().family().name(), "poisson");
}

#[test]
fn search_writes_model_trace_and_report() {
    let ws = Workspace::new();
    let (data, _) = simulated(&ws);
    let (out, trace, report) = (ws.path("search.json"), ws.path("trace.csv"), ws.path("report.csv"));
    let stdout = run_ok(&[
        "search", "--data", s(&data), "--sum-law", "nb", "--epsilon", "1e-6", "--out", s(&out), "--trace", s(&trace),
        "--report", s(&report),
    ]);
    assert!(stdout.is_empty());
    parse_model(&fs::read_to_string(&out).unwrap()).unwrap();
    let trace = fs::read_to_string(trace).unwrap();
    let aics: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(trace.lines().nth(1).unwrap().starts_with("0,initial"));
    assert!(aics.windows(2).all(|w| w[1] <= w[0] - 1e-6));
    assert!(fs::read_to_string(report).unwrap().contains("total"));
}

#[test]
fn errors_carry_categories() {
    let ws = Workspace::new();
    let model = ws.running_example();
    assert_eq!(run_err(&["corr", "--model", s(&ws.path("missing.json"))]).category(), "io");
    let bad = ws.write("bad.csv", "Y1,Y2\n1,-1\n");
    let tree = ws.write("tree.json", &serialize_tree(&PartitionTree::flat(2).unwrap(), &names(2)).unwrap());
    let e = run_err(&["fit", "--data", s(&bad), "--tree", s(&tree), "--sum-law", "nb", "--out", s(&ws.path("o.json"))]);
    assert_eq!(e.category(), "parse");
    assert!(e.to_string().contains("'Y2'"), "{e}");
    assert_eq!(run_err(&["sample", "--model", s(&model), "--n", "3"]).category(), "usage");
    assert_eq!(run_err(&["moments", "--model", s(&model), "--leaf", "Y99", "--order", "1"]).category(), "usage");
    let junk = ws.write("junk.json", "{\"schema_version\": \"1\", \"extra\": 1}");
    assert_eq!(run_err(&["describe", "--model", s(&junk)]).category(), "document");
    let help = run_ok(&["--help"]);
    assert!(help.contains("search"));
}

#[test]
fn binary_exit_status() {
    let ws = Workspace::new();
    let model = ws.running_example();
    let bin = env!("CARGO_BIN_EXE_treepolya");
    let ok = Command::new(bin).args(["describe", "--model", s(&model)]).output().unwrap();
    assert!(ok.status.success());
    assert!(ok.stderr.is_empty());
    let missing = Command::new(bin).args(["describe", "--model", s(&ws.path("none.json"))]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error[io]"));
    let usage = Command::new(bin).args(["describe"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).starts_with("error[usage]"));
}

fn random_shape(leaves: &[usize], rng: &mut ChaCha8Rng) -> Shape {
    if leaves.len() == 1 {
        return Shape::leaf(leaves[0]);
    }
    let k = rng.random_range(2..=leaves.len().min(4));
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

fn random_model(seed: u64) -> TreePolyaModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = rng.random_range(2..=9);
    let mut order: Vec<usize> = (0..leaves).collect();
    for i in (1..leaves).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let tree = PartitionTree::from_shape(leaves, &random_shape(&order, &mut rng)).unwrap();
    let splits = tree
        .internal_nodes()
        .iter()
        .map(|&a| {
            let k = tree.children(a).len();
            if rng.random_bool(0.5) {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                let total: f64 = w.iter().sum();
                SplitSpec::multinomial(w.iter().map(|x| x / total).collect()).unwrap()
            } else {
                SplitSpec::dirichlet_multinomial((0..k).map(|_| rng.random_range(1e-3..1e3)).collect()).unwrap()
            }
        })
        .collect();
    let law = match rng.random_range(0..4) {
        0 => SumLaw::dirac(rng.random_range(0..1000)),
        1 => SumLaw::binomial(rng.random_range(1..1000), rng.random_range(0.01..0.99)).unwrap(),
        2 => SumLaw::poisson(rng.random_range(0.01..1e4)).unwrap(),
        _ => SumLaw::negative_binomial(rng.random_range(0.01..100.0), rng.random_range(0.01..0.99)).unwrap(),
    };
    TreePolyaModel::new(tree, splits, law).unwrap()
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>()) {
        let model = random_model(seed);
        let columns: Vec<String> = (0..model.leaf_count()).map(|j| format!("c{j}")).collect();
        let text = serialize_model(&model, &columns).unwrap();
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back.columns, &columns);
        prop_assert_eq!(&back.model, &model);
        prop_assert_eq!(serialize_model(&back.model, &back.columns).unwrap(), text);
    }
}
