//! Command-line front end. Every command is a pure function of its arguments
//! and input files; output is rendered in memory and written only after the
//! whole command has succeeded.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::distributions::gumbel_quantile;
use crate::error::{Error, Result};
use crate::hilbert::OperatorMatrix;
use crate::ingest::{self, BasisSpec, Format};
use crate::model::{far1_inverse_filters, innovation_cov, residuals, CoefSeries, ComponentRule, FarModel};
use crate::simulate::{gen_far1, monte_carlo, DgpSpec, InnovationSource, McResult, PeriodSpec, SignalSpec};
use crate::spectral::fundamental_frequencies;
use crate::test::{mv_filtered_test, mv_iid_test, tn_test, NoiseModel, SpectrumRow, TestOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ftsperiod", version, about = "Tests for hidden periodicity in functional time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the periodicity test on one series.
    Test(TestArgs),
    /// Emit the per-frequency statistics with critical values.
    Spectrum(TestArgs),
    /// Monte Carlo rejection rates over a grid of DGP settings.
    Simulate(SimulateArgs),
    /// Multivariate test with iid or known FAR(1) noise.
    Mvtest(MvArgs),
    /// Write one simulated coefficient series as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Iid,
    Far1,
}

impl From<NoiseArg> for NoiseModel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Iid => NoiseModel::Iid,
            NoiseArg::Far1 => NoiseModel::Far1,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Coefficient CSV, or grid CSV when --basis-size is given.
    #[arg(long)]
    pub input: PathBuf,
    /// Fit curves sampled on a grid onto a Fourier basis of this (odd) size.
    #[arg(long)]
    pub basis_size: Option<usize>,
    /// Square-root transform grid values before fitting.
    #[arg(long, requires = "basis_size")]
    pub sqrt_transform: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StatArgs {
    #[arg(long, value_enum, default_value = "far1")]
    pub noise_model: NoiseArg,
    /// Cumulative variance share selecting the number of components for ρ̂.
    #[arg(long, default_value_t = 0.99)]
    pub var_threshold: f64,
    #[arg(long, default_value_t = 0.01)]
    pub an_threshold: f64,
    /// Significance level; repeat for several levels.
    #[arg(long = "alpha")]
    pub alphas: Vec<f64>,
}

impl StatArgs {
    fn alphas(&self) -> Vec<f64> {
        if self.alphas.is_empty() {
            vec![0.05]
        } else {
            self.alphas.clone()
        }
    }

    pub fn options(&self) -> Result<TestOptions> {
        if !(self.var_threshold > 0.0 && self.var_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "--var-threshold {} outside (0, 1]",
                self.var_threshold
            )));
        }
        Ok(TestOptions {
            components: ComponentRule::VarianceThreshold(self.var_threshold),
            a_n_threshold: self.an_threshold,
            alpha: self.alphas()[0],
            noise_model: self.noise_model.into(),
            center_mean: true,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub stat: StatArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// `iid` whitens with the sample covariance; `far1` filters with the
    /// operator given by --rho-diag or --rho-file.
    #[arg(long, value_enum, default_value = "iid")]
    pub noise_model: NoiseArg,
    #[command(flatten)]
    pub rho: RhoArgs,
    #[arg(long = "alpha")]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RhoArgs {
    /// Diagonal of the autoregressive operator, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "rho_file")]
    pub rho_diag: Option<Vec<f64>>,
    /// Square CSV matrix for the autoregressive operator.
    #[arg(long)]
    pub rho_file: Option<PathBuf>,
}

impl RhoArgs {
    fn operator(&self) -> Result<Option<OperatorMatrix>> {
        if let Some(diag) = &self.rho_diag {
            if diag.is_empty() {
                return Err(Error::InvalidArgument("--rho-diag is empty".into()));
            }
            return Ok(Some(OperatorMatrix::from_diagonal(diag)));
        }
        if let Some(path) = &self.rho_file {
            let m = ingest::read_coef_csv(path)?.into_matrix();
            if m.nrows() != m.ncols() {
                return Err(Error::InvalidArgument(format!(
                    "{}: operator matrix is {}x{}, expected square",
                    path.display(),
                    m.nrows(),
                    m.ncols()
                )));
            }
            return Ok(Some(OperatorMatrix(m)));
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DgpArgs {
    #[command(flatten)]
    pub rho: RhoArgs,
    /// Dimension when no operator or pool fixes it.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Gaussian innovation variances r^k, k = 1..p.
    #[arg(long, default_value_t = 0.5, conflicts_with = "pool")]
    pub eigen_decay: f64,
    /// Coefficient CSV whose rows are resampled as innovations.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DgpArgs {
    fn template(&self, n: usize) -> Result<DgpSpec> {
        let pool = self.pool.as_ref().map(ingest::read_coef_csv).transpose()?;
        let rho = self.rho.operator()?;
        let p = rho
            .as_ref()
            .map(OperatorMatrix::dim)
            .or(pool.as_ref().map(CoefSeries::p))
            .or(self.dim)
            .unwrap_or(1);
        if let Some(d) = self.dim {
            if d != p {
                return Err(Error::InvalidArgument(format!(
                    "--dim {d} disagrees with the operator or pool dimension {p}"
                )));
            }
        }
        let innovations = match pool {
            Some(pool) => InnovationSource::Bootstrap { pool },
            None => {
                if !(self.eigen_decay > 0.0 && self.eigen_decay < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "--eigen-decay {} outside (0, 1)",
                        self.eigen_decay
                    )));
                }
                InnovationSource::Gaussian {
                    eigenvalues: (1..=p).map(|k| self.eigen_decay.powi(k as i32)).collect(),
                }
            }
        };
        Ok(DgpSpec {
            n,
            rho: rho.unwrap_or_else(|| OperatorMatrix::zeros(p)),
            innovations,
            signal: None,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[command(flatten)]
    pub stat: StatArgs,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    /// Sample sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    /// Signal amplitudes, comma separated.
    #[arg(long = "amplitude", value_delimiter = ',', default_value = "0")]
    pub amplitudes: Vec<f64>,
    /// Fixed signal periods, comma separated.
    #[arg(long = "period", value_delimiter = ',', conflicts_with = "poisson_lambdas")]
    pub periods: Vec<usize>,
    /// Rates λ for periods 2 + Poisson(λ), comma separated.
    #[arg(long = "poisson-lambda", value_delimiter = ',')]
    pub poisson_lambdas: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[arg(long = "n")]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub amplitude: f64,
    #[arg(long, conflicts_with = "poisson_lambda")]
    pub period: Option<usize>,
    #[arg(long)]
    pub poisson_lambda: Option<f64>,
    /// Coefficient CSV destination; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalValue {
    pub alpha: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumOutput {
    pub n: usize,
    pub q: usize,
    pub t_n: f64,
    pub argmax_j: usize,
    pub critical_values: Vec<CriticalValue>,
    pub rows: Vec<SpectrumRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationCell {
    pub n: usize,
    pub amplitude: f64,
    pub period: Option<usize>,
    pub poisson_lambda: Option<f64>,
    pub result: McResult,
}

/// Reads the input series, fitting the basis first for grid input.
pub fn load_series(input: &InputArgs) -> Result<CoefSeries> {
    match input.basis_size {
        Some(size) => {
            let basis = BasisSpec::fourier(size)?;
            let mut grid = ingest::read_grid_csv(&input.input)?;
            if input.sqrt_transform {
                grid = grid.sqrt_transform()?;
            }
            ingest::fit_basis(&grid, basis)
        }
        None => ingest::read_coef_csv(&input.input),
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("--alpha {a} outside (0, 1)")));
        }
    }
    Ok(())
}

pub fn cmd_test(args: &TestArgs) -> Result<Vec<u8>> {
    check_alphas(&args.stat.alphas())?;
    let series = load_series(&args.input)?;
    let report = tn_test(&series, &args.stat.options()?)?;
    ingest::render_report(&report, args.output.format.into())
}

pub fn cmd_spectrum(args: &TestArgs) -> Result<Vec<u8>> {
    let alphas = args.stat.alphas();
    check_alphas(&alphas)?;
    let series = load_series(&args.input)?;
    let report = tn_test(&series, &args.stat.options()?)?;
    match args.output.format {
        FormatArg::Csv => ingest::render_spectrum_csv(&report, &alphas),
        FormatArg::Json => {
            let critical_values = alphas
                .iter()
                .map(|&alpha| Ok(CriticalValue { alpha, value: gumbel_quantile(1.0 - alpha)? }))
                .collect::<Result<Vec<_>>>()?;
            ingest::render_json(&SpectrumOutput {
                n: report.n,
                q: report.q,
                t_n: report.t_n,
                argmax_j: report.argmax_j,
                critical_values,
                rows: report.spectrum(),
            })
        }
    }
}

pub fn cmd_mvtest(args: &MvArgs) -> Result<Vec<u8>> {
    let alphas = if args.alphas.is_empty() { vec![0.05] } else { args.alphas.clone() };
    check_alphas(&alphas)?;
    let series = load_series(&args.input)?;
    let report = match args.noise_model {
        NoiseArg::Iid => mv_iid_test(&series, alphas[0])?,
        NoiseArg::Far1 => {
            let rho = args.rho.operator()?.ok_or_else(|| {
                Error::InvalidArgument("--noise-model far1 needs --rho-diag or --rho-file".into())
            })?;
            if rho.dim() != series.p() {
                return Err(Error::DimensionMismatch {
                    expected: series.p(),
                    found: rho.dim(),
                });
            }
            let model = FarModel {
                rho_hat: rho.clone(),
                ..FarModel::white_noise(series.mean())
            };
            let sigma = innovation_cov(&residuals(&series, &model)?)?.sigma_hat;
            let grid = fundamental_frequencies(series.n())?;
            let filters = far1_inverse_filters(&rho, &grid);
            mv_filtered_test(&series, &filters, &sigma, alphas[0])?
        }
    };
    ingest::render_report(&report, args.output.format.into())
}

fn period_specs(periods: &[usize], lambdas: &[f64]) -> Vec<PeriodSpec> {
    if !periods.is_empty() {
        periods.iter().map(|&d| PeriodSpec::Fixed(d)).collect()
    } else {
        lambdas.iter().map(|&l| PeriodSpec::Poisson(l)).collect()
    }
}

pub fn run_simulation(args: &SimulateArgs) -> Result<Vec<SimulationCell>> {
    let alphas = args.stat.alphas();
    check_alphas(&alphas)?;
    let opts = args.stat.options()?;
    let periods = period_specs(&args.periods, &args.poisson_lambdas);
    let mut cells = Vec::new();
    for &n in &args.ns {
        let template = args.dgp.template(n)?;
        for &amplitude in &args.amplitudes {
            let signals: Vec<Option<PeriodSpec>> = if amplitude == 0.0 {
                vec![None]
            } else if periods.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "amplitude {amplitude} needs --period or --poisson-lambda"
                )));
            } else {
                periods.iter().copied().map(Some).collect()
            };
            for period in signals {
                let spec = DgpSpec {
                    signal: period.map(|period| SignalSpec {
                        amplitude,
                        period,
                        direction: None,
                    }),
                    ..template.clone()
                };
                let result = monte_carlo(&spec, &opts, args.reps, &alphas)?;
                cells.push(SimulationCell {
                    n,
                    amplitude,
                    period: match period {
                        Some(PeriodSpec::Fixed(d)) => Some(d),
                        _ => None,
                    },
                    poisson_lambda: match period {
                        Some(PeriodSpec::Poisson(l)) => Some(l),
                        _ => None,
                    },
                    result,
                });
            }
        }
    }
    Ok(cells)
}

fn opt_field<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<u8>> {
    let cells = run_simulation(args)?;
    match args.output.format {
        FormatArg::Json => ingest::render_json(&cells),
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["n", "amplitude", "period", "poisson_lambda", "mean_period"];
            header.extend(ingest::MC_CSV_HEADER);
            w.write_record(&header)?;
            for cell in &cells {
                for a in &cell.result.per_alpha {
                    let mut rec = vec![
                        cell.n.to_string(),
                        format!("{:?}", cell.amplitude),
                        opt_field(cell.period),
                        opt_field(cell.poisson_lambda),
                        opt_field(cell.result.mean_period),
                    ];
                    rec.extend(ingest::mc_csv_fields(&cell.result, a));
                    w.write_record(&rec)?;
                }
            }
            w.into_inner()
                .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
        }
    }
}

pub fn generate_series(args: &GenerateArgs) -> Result<CoefSeries> {
    let mut spec = args.dgp.template(args.n)?;
    if args.amplitude != 0.0 {
        let period = match (args.period, args.poisson_lambda) {
            (Some(d), _) => PeriodSpec::Fixed(d),
            (None, Some(l)) => PeriodSpec::Poisson(l),
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "a nonzero amplitude needs --period or --poisson-lambda".into(),
                ))
            }
        };
        spec.signal = Some(SignalSpec {
            amplitude: args.amplitude,
            period,
            direction: None,
        });
    }
    Ok(gen_far1(&spec)?.series)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Vec<u8>> {
    Ok(ingest::render_coef_csv(&generate_series(args)?).into_bytes())
}

fn emit(bytes: &[u8], output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let (bytes, output) = match &cli.command {
        Command::Test(a) => (cmd_test(a)?, a.output.output.as_deref()),
        Command::Spectrum(a) => (cmd_spectrum(a)?, a.output.output.as_deref()),
        Command::Simulate(a) => (cmd_simulate(a)?, a.output.output.as_deref()),
        Command::Mvtest(a) => (cmd_mvtest(a)?, a.output.output.as_deref()),
        Command::Generate(a) => (cmd_generate(a)?, a.output.as_deref()),
    };
    emit(&bytes, output)
}

fn stage(cli: &Cli) -> &'static str {
    match cli.command {
        Command::Test(_) => "test",
        Command::Spectrum(_) => "spectrum",
        Command::Simulate(_) => "simulate",
        Command::Mvtest(_) => "mvtest",
        Command::Generate(_) => "generate",
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_DATA } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("ftsperiod {}: {e}", stage(&cli));
            exit_code(&e)
        }
    }
}
