//! Command-line interface.
//!
//! [`run`] parses arguments and writes to the given stream, so every command
//! can be driven from tests without spawning a process.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treepolya_core::inference::{fit_tree_with, search_tree, FitOptions, SearchConfig, SplitChoice};
use treepolya_core::{CountMatrix, SumLawFamily};

use crate::csv_io::{load_counts_csv, write_counts, write_error, write_matrix};
use crate::error::{CliError, Result};
use crate::model_doc::{parse_model, parse_tree, serialize_model, NamedModel};
use crate::report::{describe, write_aic_table, write_moments, write_trace};

#[derive(Debug, Parser)]
#[command(name = "treepolya", version, about = "Fit, search, evaluate and sample Tree Pólya Splitting models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a fixed partition tree.
    Fit(FitArgs),
    /// Search for a partition tree by greedy AIC moves, then fit it.
    Search(SearchArgs),
    /// Joint log-p.m.f. of every row of an observation file.
    Pmf(PmfArgs),
    /// Draw exact samples.
    Sample(SampleArgs),
    /// Means, variances and dispersion classes, or one factorial moment.
    Moments(MomentsArgs),
    /// Correlation matrix of the leaves.
    Corr(CorrArgs),
    /// Print the tree with its splits and parameter counts.
    Describe(DescribeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawArg {
    Nb,
    Poisson,
    Dirac,
    Binomial,
}

impl From<LawArg> for SumLawFamily {
    fn from(a: LawArg) -> Self {
        match a {
            LawArg::Nb => SumLawFamily::NegativeBinomial,
            LawArg::Poisson => SumLawFamily::Poisson,
            LawArg::Dirac => SumLawFamily::Dirac,
            LawArg::Binomial => SumLawFamily::Binomial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    /// Lower AIC of multinomial and Dirichlet-multinomial.
    Select,
    Multinomial,
    /// Dirichlet-multinomial, multinomial where it diverges.
    Dm,
}

impl From<SplitArg> for SplitChoice {
    fn from(a: SplitArg) -> Self {
        match a {
            SplitArg::Select => SplitChoice::Select,
            SplitArg::Multinomial => SplitChoice::Multinomial,
            SplitArg::Dm => SplitChoice::DirichletMultinomial,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Count matrix CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Tree or model JSON; only the tree is used.
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long, value_enum)]
    pub sum_law: LawArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Select)]
    pub split: SplitArg,
    /// Fitted model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// AIC table CSV; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LawArg::Nb)]
    pub sum_law: LawArg,
    /// Smallest AIC decrease accepted as an improvement.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Column names in tie-breaking order, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seed_order: Option<Vec<String>>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// AIC trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// AIC table CSV; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Observations CSV with the model's column names.
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Number of rows to draw.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Report the factorial moment of one leaf instead of the table.
    #[arg(long, requires = "order")]
    pub leaf: Option<String>,
    #[arg(long, requires = "leaf")]
    pub order: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Parse `args` (program name first) and run the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{}", e.render())?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    match cli.command {
        Command::Fit(a) => fit(a, stdout),
        Command::Search(a) => search(a, stdout),
        Command::Pmf(a) => pmf(a, stdout),
        Command::Sample(a) => sample(a, stdout),
        Command::Moments(a) => moments(a, stdout),
        Command::Corr(a) => corr(a, stdout),
        Command::Describe(a) => {
            let m = load_model(&a.model)?;
            write!(stdout, "{}", describe(&m.model, &m.columns))?;
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_model(path: &Path) -> Result<NamedModel> {
    parse_model(&read_text(path)?).map_err(|e| match e {
        CliError::Document(m) => CliError::Document(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Send `f`'s output to `path`, or to `stdout` when there is no path.
fn emit(path: Option<&Path>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| CliError::io(p, e))
        }
        None => f(stdout),
    }
}

/// Reorder the data columns to match `columns`, by name.
fn align(data: CountMatrix, columns: &[String]) -> Result<CountMatrix> {
    if data.names() == columns {
        return Ok(data);
    }
    let index: Vec<usize> = columns
        .iter()
        .map(|c| {
            data.names()
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| CliError::Usage(format!("data has no column '{c}'")))
        })
        .collect::<Result<_>>()?;
    if data.n_cols() != columns.len() {
        let extra: Vec<&str> = data.names().iter().filter(|n| !columns.contains(n)).map(String::as_str).collect();
        return Err(CliError::Usage(format!("data has columns not in the model: {}", extra.join(", "))));
    }
    let rows = data.rows().map(|r| index.iter().map(|&j| r[j]).collect()).collect();
    Ok(CountMatrix::new(columns.to_vec(), rows)?)
}

fn fit(a: FitArgs, stdout: &mut dyn Write) -> Result<()> {
    let named = parse_tree(&read_text(&a.tree)?)?;
    let data = align(load_counts_csv(&a.data)?, &named.columns)?;
    let opts = FitOptions { tol: a.tol, max_iter: a.max_iter };
    let fitted = fit_tree_with(&named.tree, &data, a.sum_law.into(), &opts, a.split.into())?;
    write_file(&a.out, serialize_model(&fitted.model, &named.columns)?.as_bytes())?;
    emit(a.report.as_deref(), stdout, |w| write_aic_table(w, &fitted.table, &named.columns))
}

fn search(a: SearchArgs, stdout: &mut dyn Write) -> Result<()> {
    let data = load_counts_csv(&a.data)?;
    let seed_order = a
        .seed_order
        .map(|names| {
            names
                .iter()
                .map(|n| {
                    data.names()
                        .iter()
                        .position(|c| c == n)
                        .ok_or_else(|| CliError::Usage(format!("seed order names unknown column '{n}'")))
                })
                .collect::<Result<Vec<usize>>>()
        })
        .transpose()?;
    let config = SearchConfig {
        max_iterations: a.max_iterations,
        aic_epsilon: a.epsilon,
        seed_order,
        fit: FitOptions { tol: a.tol, max_iter: a.max_iter },
    };
    let result = search_tree(&data, a.sum_law.into(), &config)?;
    let columns = data.names();
    write_file(&a.out, serialize_model(&result.model, columns)?.as_bytes())?;
    if let Some(path) = &a.trace {
        emit(Some(path), stdout, |w| write_trace(w, &result.trace, columns))?;
    }
    emit(a.report.as_deref(), stdout, |w| write_aic_table(w, &result.table, columns))
}

fn pmf(a: PmfArgs, stdout: &mut dyn Write) -> Result<()> {
    let m = load_model(&a.model)?;
    let obs = align(load_counts_csv(&a.obs)?, &m.columns)?;
    let values = obs.rows().map(|r| m.model.joint_log_pmf(r).map(|v| v.ln())).collect::<Result<Vec<f64>, _>>()?;
    emit(a.out.as_deref(), stdout, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["row", "log_pmf"]).map_err(write_error)?;
        for (i, v) in values.iter().enumerate() {
            csv.write_record([(i + 1).to_string(), v.to_string()]).map_err(write_error)?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn sample(a: SampleArgs, stdout: &mut dyn Write) -> Result<()> {
    let m = load_model(&a.model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rows = (0..a.n).map(|_| m.model.sample(&mut rng)).collect::<Result<Vec<Vec<u64>>, _>>()?;
    emit(a.out.as_deref(), stdout, |w| write_counts(w, &m.columns, rows.iter().map(Vec::as_slice)))
}

fn moments(a: MomentsArgs, stdout: &mut dyn Write) -> Result<()> {
    let m = load_model(&a.model)?;
    match (a.leaf, a.order) {
        (Some(leaf), Some(order)) => {
            let j = m
                .columns
                .iter()
                .position(|c| *c == leaf)
                .ok_or_else(|| CliError::Usage(format!("model has no leaf '{leaf}'")))?;
            let value = m.model.node_factorial_moment(m.model.tree().leaf(j), order);
            writeln!(stdout, "leaf,order,factorial_moment")?;
            writeln!(stdout, "{leaf},{order},{value}")?;
            Ok(())
        }
        _ => write_moments(stdout, &m.model, &m.columns),
    }
}

fn corr(a: CorrArgs, stdout: &mut dyn Write) -> Result<()> {
    let m = load_model(&a.model)?;
    let matrix = m.model.correlation_matrix()?;
    emit(a.out.as_deref(), stdout, |w| write_matrix(w, &m.columns, &matrix))
}
