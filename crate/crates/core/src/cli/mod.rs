//! Command-line front end: calibration, ARL and CED evaluation, the study
//! batteries and Monte-Carlo validation, written as CSV or JSON tables.
//!
//! Exit status: 0 success, 1 I/O failure, 2 bad flags or parameters,
//! 3 numerical failure, 4 `validate --strict` found a breach.

mod output;
mod range;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

pub use output::{format_num, round_sig, Cell, Format, Table};
pub use range::{IntRange, RealRange, DEFAULT_REAL_STEP};

use crate::calib::{self, CalibrationTarget};
use crate::chart::{ChartSpec, FreeParam, Measure, ShiftModel};
use crate::classic::{CusumSpec, EwmaSpec, LimitStyle, ShewhartSpec};
use crate::error::Error;
use crate::oracle;
use crate::study::{self, SlackRule, Study};
use crate::synth::{SyntheticSpec, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_BREACH: i32 = 4;

/// Caps the worker threads when set to a positive integer.
pub const THREADS_ENV: &str = "RL_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rl-lab", version, about = "Run-length analysis of synthetic-type and classic control charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the chart's free parameter at a target in-control ARL.
    Calibrate(CalibrateArgs),
    /// Zero-state or steady-state ARL over a grid of shifts.
    Arl(ArlArgs),
    /// Conditional expected delay D_tau profiles and their limits.
    Ced(CedArgs),
    /// Pointwise best ARL over H for the #4 charts, with an EWMA reference.
    Envelope(EnvelopeArgs),
    /// EQL score of a chart, or of a bundle of Shewhart-synthetic combos.
    Eql(EqlArgs),
    /// Probability of the no-pending-signal state given survival.
    Worstcase(WorstcaseArgs),
    /// Compare analytic values with a Monte-Carlo simulation.
    Validate(ValidateArgs),
    /// Smallest H within a slack of the minimal out-of-control ARL.
    OptimalH(OptimalHArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChartKind {
    Synth,
    Ewma,
    Cusum,
    Shewhart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitsArg {
    Exact,
    Fixed,
}

impl From<LimitsArg> for LimitStyle {
    fn from(l: LimitsArg) -> Self {
        match l {
            LimitsArg::Exact => LimitStyle::Exact,
            LimitsArg::Fixed => LimitStyle::Fixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    Zero,
    Steady,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Zero => Measure::ZeroState,
            MeasureArg::Steady => Measure::SteadyState,
        }
    }
}

/// Chart design flags. A missing free parameter (`--k1`, `--c`, `--h`,
/// `--k`) is calibrated to `--arl0`.
#[derive(Debug, Clone, Args)]
struct ChartArgs {
    #[arg(long, value_enum, default_value = "synth")]
    chart: ChartKind,
    /// Synthetic rule 1-4.
    #[arg(long)]
    variant: Option<u8>,
    /// Start the synthetic chart with a pending signal (S charts).
    #[arg(long)]
    head_start: bool,
    /// Synthetic window length: `3` or a range `1..25`.
    #[arg(long = "H", value_name = "H")]
    big_h: Option<IntRange>,
    /// Synthetic warning limit.
    #[arg(long)]
    k1: Option<f64>,
    /// Outer Shewhart limit of a combo.
    #[arg(long)]
    k2: Option<f64>,
    /// EWMA smoothing constant.
    #[arg(long)]
    lambda: Option<f64>,
    /// EWMA limit factor.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    limits: LimitsArg,
    /// EWMA or CUSUM discretization size.
    #[arg(long)]
    grid: Option<usize>,
    /// CUSUM reference value.
    #[arg(long)]
    kref: Option<f64>,
    /// CUSUM decision interval.
    #[arg(long)]
    h: Option<f64>,
    /// Shewhart limit.
    #[arg(long)]
    k: Option<f64>,
    /// Target in-control zero-state ARL for calibration.
    #[arg(long, default_value_t = study::DEFAULT_ARL0)]
    arl0: f64,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    chart: ChartArgs,
    #[arg(long, value_enum, default_value = "zero")]
    measure: MeasureArg,
}

#[derive(Debug, Args)]
struct ArlArgs {
    #[command(flatten)]
    chart: ChartArgs,
    /// Shift or grid `a..b[:step]`.
    #[arg(long, default_value = "0")]
    delta: RealRange,
    #[arg(long, value_enum, default_value = "zero")]
    measure: MeasureArg,
}

#[derive(Debug, Args)]
struct CedArgs {
    #[command(flatten)]
    chart: ChartArgs,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = study::DEFAULT_TAU_MAX)]
    tau_max: usize,
    /// Add calibrated EWMA profiles for these smoothing constants.
    #[arg(long, value_delimiter = ',')]
    ewma: Vec<f64>,
}

#[derive(Debug, Args)]
struct EnvelopeArgs {
    #[arg(long, default_value_t = 4)]
    variant: u8,
    /// Only the head-start chart.
    #[arg(long, conflicts_with = "no_head_start")]
    head_start: bool,
    /// Only the chart without head start.
    #[arg(long)]
    no_head_start: bool,
    #[arg(long, default_value = "0.05..5:0.05")]
    delta: RealRange,
    #[arg(long, value_enum, default_value = "steady")]
    measure: MeasureArg,
    #[arg(long, default_value_t = study::DEFAULT_H_MAX)]
    h_max: usize,
    /// Smoothing constant of the EWMA reference.
    #[arg(long, default_value_t = 0.25)]
    reference_lambda: f64,
    #[arg(long, value_enum, default_value = "exact")]
    reference_limits: LimitsArg,
    #[arg(long)]
    no_reference: bool,
    #[arg(long, default_value_t = study::DEFAULT_ARL0)]
    arl0: f64,
}

#[derive(Debug, Args)]
struct EqlArgs {
    #[command(flatten)]
    chart: ChartArgs,
    #[arg(long, value_enum, default_value = "zero")]
    measure: MeasureArg,
    #[arg(long, default_value_t = study::DEFAULT_DELTA_MAX)]
    delta_max: f64,
    #[arg(long, default_value_t = study::DEFAULT_EQL_STEP)]
    step: f64,
    /// Scan Shewhart-synthetic combos over this `k2` grid.
    #[arg(long, conflicts_with = "k2")]
    k2_grid: Option<RealRange>,
}

#[derive(Debug, Args)]
struct WorstcaseArgs {
    #[arg(long)]
    variant: u8,
    #[arg(long = "H", value_name = "H")]
    big_h: IntRange,
    /// Profile length.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = study::DEFAULT_ARL0)]
    arl0: f64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    chart: ChartArgs,
    #[arg(long, default_value = "0")]
    delta: RealRange,
    /// Change point; 1 compares with the zero-state ARL, larger values with D_tau.
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    #[arg(long, default_value_t = oracle::DEFAULT_SEED)]
    seed: u64,
    /// Exit with status 4 if any |z| exceeds `--z-max`.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 3.0)]
    z_max: f64,
}

#[derive(Debug, Args)]
struct OptimalHArgs {
    #[arg(long)]
    variant: u8,
    #[arg(long)]
    head_start: bool,
    #[arg(long, default_value = "0.25..5:0.25")]
    delta: RealRange,
    #[arg(long, value_enum, default_value = "zero")]
    measure: MeasureArg,
    #[arg(long, default_value_t = study::DEFAULT_H_MAX)]
    h_max: usize,
    #[arg(long, default_value_t = study::DEFAULT_SLACK)]
    slack: f64,
    /// Apply the slack only when the exact minimizer is larger than this.
    #[arg(long, default_value_t = study::DEFAULT_REPLACE_ABOVE)]
    replace_above: usize,
    #[arg(long, default_value_t = study::DEFAULT_ARL0)]
    arl0: f64,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs the command line `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let mut notes = Vec::new();
    let result = execute(&cli.command, &mut notes).and_then(|(table, status)| {
        match &cli.output {
            Some(path) => table.write(cli.format, std::io::BufWriter::new(std::fs::File::create(path)?))?,
            None => table.write(cli.format, std::io::stdout().lock())?,
        }
        Ok(status)
    });
    let mut err = std::io::stderr().lock();
    for n in &notes {
        let _ = writeln!(err, "# {n}");
    }
    match result {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
    // A pool that already exists (repeated calls in one process) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(cmd: &Command, notes: &mut Vec<String>) -> CliResult<(Table, i32)> {
    match cmd {
        Command::Calibrate(a) => cmd_calibrate(a).map(|t| (t, EXIT_OK)),
        Command::Arl(a) => cmd_arl(a).map(|t| (t, EXIT_OK)),
        Command::Ced(a) => cmd_ced(a, notes).map(|t| (t, EXIT_OK)),
        Command::Envelope(a) => cmd_envelope(a).map(|t| (t, EXIT_OK)),
        Command::Eql(a) => cmd_eql(a, notes).map(|t| (t, EXIT_OK)),
        Command::Worstcase(a) => cmd_worstcase(a).map(|t| (t, EXIT_OK)),
        Command::Validate(a) => cmd_validate(a, notes),
        Command::OptimalH(a) => cmd_optimal_h(a).map(|t| (t, EXIT_OK)),
    }
}

fn variant(n: u8) -> CliResult<Variant> {
    Variant::from_number(n).map_err(|_| CliError::usage(format!("--variant must be 1, 2, 3 or 4, got {n}")))
}

/// One chart design; `h` is set for synthetic charts.
#[derive(Debug, Clone)]
struct Design {
    h: Option<usize>,
    spec: ChartSpec,
}

impl Design {
    fn param(&self) -> (FreeParam, f64) {
        let p = self.spec.default_free_param();
        (p, self.spec.parameter(p).expect("default parameter exists"))
    }

    fn label(&self) -> String {
        match self.h {
            Some(h) => format!("{}(H={h})", self.spec.label()),
            None => self.spec.label(),
        }
    }
}

impl ChartArgs {
    /// Rejects flags that do not belong to the selected chart.
    fn check(&self) -> CliResult<()> {
        let synth_only = [
            ("--variant", self.variant.is_some()),
            ("--head-start", self.head_start),
            ("--H", self.big_h.is_some()),
            ("--k1", self.k1.is_some()),
        ];
        let ewma_only = [("--lambda", self.lambda.is_some()), ("--c", self.c.is_some())];
        let cusum_only = [("--kref", self.kref.is_some()), ("--h", self.h.is_some())];
        let shewhart_only = [("--k", self.k.is_some())];
        let foreign: Vec<&[(&str, bool)]> = match self.chart {
            ChartKind::Synth => vec![&ewma_only, &cusum_only, &shewhart_only],
            ChartKind::Ewma => vec![&synth_only, &cusum_only, &shewhart_only],
            ChartKind::Cusum => vec![&synth_only, &ewma_only, &shewhart_only],
            ChartKind::Shewhart => vec![&synth_only, &ewma_only, &cusum_only],
        };
        if let Some((flag, _)) = foreign.iter().flat_map(|g| g.iter()).find(|(_, set)| *set) {
            return Err(CliError::usage(format!("{flag} does not apply to --chart {}", self.chart_name())));
        }
        if self.chart == ChartKind::Shewhart && self.k2.is_some() {
            return Err(CliError::usage("--k2 does not apply to --chart shewhart"));
        }
        if self.grid.is_some() && !matches!(self.chart, ChartKind::Ewma | ChartKind::Cusum) {
            return Err(CliError::usage("--grid applies to EWMA and CUSUM charts only"));
        }
        if !(self.arl0 > 1.0) {
            return Err(CliError::usage("--arl0 must exceed 1"));
        }
        Ok(())
    }

    fn chart_name(&self) -> &'static str {
        match self.chart {
            ChartKind::Synth => "synth",
            ChartKind::Ewma => "ewma",
            ChartKind::Cusum => "cusum",
            ChartKind::Shewhart => "shewhart",
        }
    }

    /// Chart templates (one per `H`) and whether the free parameter was given.
    fn templates(&self) -> CliResult<(Vec<Design>, bool)> {
        self.check()?;
        let out = match self.chart {
            ChartKind::Synth => {
                let v = variant(self.variant.ok_or_else(|| CliError::usage("--chart synth needs --variant"))?)?;
                let hs = self.big_h.as_ref().ok_or_else(|| CliError::usage("--chart synth needs --H"))?;
                let designs = hs
                    .0
                    .iter()
                    .map(|&h| {
                        let mut s = SyntheticSpec::new(v, self.head_start, h, self.k1.unwrap_or(2.0));
                        s.k2 = self.k2;
                        Design {
                            h: Some(h),
                            spec: ChartSpec::Synthetic(s),
                        }
                    })
                    .collect();
                (designs, self.k1.is_some())
            }
            ChartKind::Ewma => {
                let lambda = self.lambda.ok_or_else(|| CliError::usage("--chart ewma needs --lambda"))?;
                let mut s = EwmaSpec::new(lambda, self.c.unwrap_or(3.0), self.limits.into());
                s.k2 = self.k2;
                if let Some(g) = self.grid {
                    s.n_grid = g;
                }
                (vec![Design { h: None, spec: ChartSpec::Ewma(s) }], self.c.is_some())
            }
            ChartKind::Cusum => {
                let kref = self.kref.ok_or_else(|| CliError::usage("--chart cusum needs --kref"))?;
                let mut s = CusumSpec::new(kref, self.h.unwrap_or(3.0));
                s.k2 = self.k2;
                if let Some(g) = self.grid {
                    s.n_grid = g;
                }
                (vec![Design { h: None, spec: ChartSpec::Cusum(s) }], self.h.is_some())
            }
            ChartKind::Shewhart => (
                vec![Design {
                    h: None,
                    spec: ChartSpec::Shewhart(ShewhartSpec::new(self.k.unwrap_or(3.0))),
                }],
                self.k.is_some(),
            ),
        };
        for d in &out.0 {
            d.spec.validate()?;
        }
        Ok(out)
    }

    /// Designs with the free parameter calibrated when it was not given.
    fn designs(&self, study: &Study) -> CliResult<Vec<Design>> {
        let (templates, given) = self.templates()?;
        if given {
            return Ok(templates);
        }
        templates
            .into_par_iter()
            .map(|d| {
                let spec = match d.spec {
                    ChartSpec::Synthetic(s) => ChartSpec::Synthetic(study.cell_with(s.variant, s.head_start, s.h, s.k2)?.spec),
                    other => {
                        let c = calib::calibrate(&other, &CalibrationTarget::zero_state(self.arl0))?;
                        other.with_parameter(c.param, c.value)?
                    }
                };
                Ok(Design { spec, ..d })
            })
            .collect::<crate::Result<Vec<_>>>()
            .map_err(CliError::from)
    }
}

fn cmd_calibrate(a: &CalibrateArgs) -> CliResult<Table> {
    let (templates, given) = a.chart.templates()?;
    if given {
        return Err(CliError::usage("calibrate solves for the free parameter; do not pass it"));
    }
    let target = CalibrationTarget::zero_state(a.chart.arl0).with_measure(a.measure.into());
    let results: Vec<_> = templates
        .par_iter()
        .map(|d| calib::calibrate(&d.spec, &target).map(|c| (d, c)))
        .collect::<crate::Result<_>>()?;
    let mut t = Table::new(&["chart", "H", "param", "value", "arl", "measure", "evaluations"]);
    for (d, c) in results {
        t.push(vec![
            d.spec.label().into(),
            d.h.into(),
            c.param.name().into(),
            c.value.into(),
            c.arl.into(),
            Measure::from(a.measure).name().into(),
            c.evaluations.into(),
        ]);
    }
    Ok(t)
}

fn cmd_arl(a: &ArlArgs) -> CliResult<Table> {
    let study = Study::new(a.chart.arl0);
    let designs = a.chart.designs(&study)?;
    let measure: Measure = a.measure.into();
    let values: Vec<Vec<f64>> = designs
        .par_iter()
        .map(|d| a.delta.0.iter().map(|&x| d.spec.arl(x, measure)).collect())
        .collect::<crate::Result<_>>()?;
    let mut t = Table::new(&["chart", "H", "param", "value", "delta", "measure", "arl"]);
    for (d, row) in designs.iter().zip(values) {
        let (p, v) = d.param();
        for (&delta, arl) in a.delta.0.iter().zip(row) {
            t.push(vec![d.spec.label().into(), d.h.into(), p.name().into(), v.into(), delta.into(), measure.name().into(), arl.into()]);
        }
    }
    Ok(t)
}

fn cmd_ced(a: &CedArgs, notes: &mut Vec<String>) -> CliResult<Table> {
    if a.tau_max == 0 {
        return Err(CliError::usage("--tau-max must be at least 1"));
    }
    let study = Study::new(a.chart.arl0);
    let designs = a.chart.designs(&study)?;
    let profiles: Vec<_> = designs
        .par_iter()
        .map(|d| d.spec.ced(a.delta, a.tau_max))
        .collect::<crate::Result<_>>()?;
    let ewma: Vec<_> = a
        .ewma
        .par_iter()
        .map(|&lambda| {
            let s = study::calibrated_ewma(lambda, a.chart.limits.into(), a.chart.arl0)?;
            Ok((s, ChartSpec::Ewma(s).ced(a.delta, a.tau_max)?))
        })
        .collect::<crate::Result<_>>()?;

    let mut t = Table::new(&["tau", "H_or_lambda", "chart", "D_tau"]);
    let mut emit = |key: Cell, chart: String, p: &crate::chain::CedProfile| {
        for (i, &v) in p.values.iter().enumerate() {
            t.push(vec![(i + 1).into(), key.clone(), chart.clone().into(), v.into()]);
        }
        t.push(vec!["inf".into(), key, chart.into(), p.limit.into()]);
    };
    for (d, p) in designs.iter().zip(&profiles) {
        let key = match (d.h, d.spec) {
            (Some(h), _) => Cell::from(h),
            (None, ChartSpec::Ewma(s)) => Cell::from(s.lambda),
            _ => Cell::Empty,
        };
        emit(key, d.spec.label(), p);
    }
    for (s, p) in &ewma {
        emit(Cell::from(s.lambda), ChartSpec::Ewma(*s).label(), p);
    }
    for (d, p) in designs.iter().zip(&profiles) {
        if let Some(u) = p.underflow_at {
            notes.push(format!("{}: in-control survival underflowed at tau = {u}", d.label()));
        }
    }
    if designs.len() > 1 {
        let best = |f: &dyn Fn(&crate::chain::CedProfile) -> f64| {
            designs
                .iter()
                .zip(&profiles)
                .min_by(|x, y| f(x.1).total_cmp(&f(y.1)))
                .map(|(d, _)| d.h.map_or_else(|| d.label(), |h| h.to_string()))
                .unwrap_or_default()
        };
        notes.push(format!("zero-state optimal H = {}", best(&|p| p.values[0])));
        notes.push(format!("steady-state optimal H = {}", best(&|p| p.limit)));
    }
    Ok(t)
}

fn cmd_envelope(a: &EnvelopeArgs) -> CliResult<Table> {
    let v = variant(a.variant)?;
    if a.h_max == 0 {
        return Err(CliError::usage("--h-max must be at least 1"));
    }
    let flags: Vec<bool> = match (a.head_start, a.no_head_start) {
        (true, _) => vec![true],
        (_, true) => vec![false],
        _ => vec![false, true],
    };
    let measure: Measure = a.measure.into();
    let study = Study::new(a.arl0);
    let reference = if a.no_reference {
        None
    } else {
        Some(ChartSpec::Ewma(study::calibrated_ewma(a.reference_lambda, a.reference_limits.into(), a.arl0)?))
    };
    let mut t = Table::new(&["delta", "chart", "best_H", "arl"]);
    let mut ref_rows = None;
    let mut envs = Vec::new();
    for (i, &hs) in flags.iter().enumerate() {
        let r = if i == 0 { reference.as_ref() } else { None };
        let env = study.envelope(v, hs, &a.delta.0, measure, a.h_max, r)?;
        if let Some(rv) = &env.reference {
            ref_rows = Some(rv.clone());
        }
        envs.push(env);
    }
    for (j, &delta) in a.delta.0.iter().enumerate() {
        for env in &envs {
            t.push(vec![delta.into(), env.chart.clone().into(), env.best_h[j].into(), env.best_arl[j].into()]);
        }
        if let (Some(rv), Some(spec)) = (&ref_rows, &reference) {
            t.push(vec![delta.into(), spec.label().into(), Cell::Empty, rv[j].into()]);
        }
    }
    Ok(t)
}

fn cmd_eql(a: &EqlArgs, notes: &mut Vec<String>) -> CliResult<Table> {
    let measure: Measure = a.measure.into();
    let study = Study::new(a.chart.arl0);
    let mut t = Table::new(&["chart", "H", "param", "value", "k2", "measure", "eql"]);
    let rows: Vec<(Design, f64)> = match &a.k2_grid {
        Some(grid) => {
            if a.chart.chart != ChartKind::Synth || a.chart.k1.is_some() {
                return Err(CliError::usage("--k2-grid scans calibrated synthetic combos (no --k1)"));
            }
            let (templates, _) = a.chart.templates()?;
            let mut rows = Vec::new();
            for d in templates {
                let ChartSpec::Synthetic(s) = d.spec else { unreachable!() };
                let cells = study.combo_bundle(s.variant, s.head_start, s.h, &grid.0)?;
                if cells.is_empty() {
                    return Err(CliError::from(Error::Infeasible("no k2 on the grid admits a calibrated combo".into())));
                }
                let (scores, best) = study::eql_scan(&cells, measure, a.delta_max, a.step)?;
                notes.push(format!(
                    "{}(H={}): EQL-optimal k2 = {}",
                    cells[best].spec.label(),
                    s.h,
                    format_num(cells[best].spec.k2.unwrap_or(f64::NAN))
                ));
                rows.extend(cells.iter().zip(scores).map(|(c, e)| {
                    (
                        Design {
                            h: Some(s.h),
                            spec: ChartSpec::Synthetic(c.spec),
                        },
                        e,
                    )
                }));
            }
            rows
        }
        None => {
            let designs = a.chart.designs(&study)?;
            designs
                .into_par_iter()
                .map(|d| {
                    let e = study::eql(|x| d.spec.arl(x, measure), a.delta_max, a.step)?;
                    Ok((d, e.value))
                })
                .collect::<crate::Result<_>>()?
        }
    };
    for (d, e) in rows {
        let (p, v) = d.param();
        let k2 = match d.spec {
            ChartSpec::Synthetic(s) => s.k2,
            ChartSpec::Ewma(s) => s.k2,
            ChartSpec::Cusum(s) => s.k2,
            ChartSpec::Shewhart(_) => None,
        };
        t.push(vec![d.spec.label().into(), d.h.into(), p.name().into(), v.into(), k2.into(), measure.name().into(), e.into()]);
    }
    Ok(t)
}

fn cmd_worstcase(a: &WorstcaseArgs) -> CliResult<Table> {
    let v = variant(a.variant)?;
    if a.big_h.0.contains(&0) || a.n == 0 {
        return Err(CliError::usage("--H and --n must be at least 1"));
    }
    let study = Study::new(a.arl0);
    let profiles = study.worst_case_study(v, &a.big_h.0, a.n)?;
    let mut t = Table::new(&["i", "H", "prob", "asymptote"]);
    for p in &profiles {
        for (i, &prob) in p.probs.iter().enumerate().take(a.n) {
            t.push(vec![(i + 1).into(), p.h.into(), prob.into(), p.asymptote.into()]);
        }
    }
    Ok(t)
}

fn cmd_validate(a: &ValidateArgs, notes: &mut Vec<String>) -> CliResult<(Table, i32)> {
    if a.tau == 0 || a.runs == 0 {
        return Err(CliError::usage("--tau and --runs must be at least 1"));
    }
    let study = Study::new(a.chart.arl0);
    let designs = a.chart.designs(&study)?;
    let mut t = Table::new(&["chart", "delta", "analytic", "simulated", "std_err", "z_score"]);
    let mut breach = false;
    for d in &designs {
        for &delta in &a.delta.0 {
            let analytic = if a.tau == 1 {
                d.spec.arl(delta, Measure::ZeroState)?
            } else {
                d.spec.ced(delta, a.tau)?.at(a.tau).ok_or(Error::SurvivalUnderflow { tau: a.tau })?
            };
            let sim = oracle::simulate_run_length(&d.spec, ShiftModel::at(delta, a.tau), a.runs, a.seed)?;
            let z = sim.z_score(analytic);
            if !(z.abs() <= a.z_max) {
                breach = true;
                notes.push(format!("{} at delta = {}: |z| = {} exceeds {}", d.label(), format_num(delta), format_num(z.abs()), a.z_max));
            }
            t.push(vec![d.label().into(), delta.into(), analytic.into(), sim.mean_rl.into(), sim.std_err.into(), z.into()]);
        }
    }
    let status = if a.strict && breach { EXIT_BREACH } else { EXIT_OK };
    Ok((t, status))
}

fn cmd_optimal_h(a: &OptimalHArgs) -> CliResult<Table> {
    let v = variant(a.variant)?;
    if a.h_max == 0 || !(a.slack >= 0.0) {
        return Err(CliError::usage("--h-max must be at least 1 and --slack non-negative"));
    }
    let rule = SlackRule {
        h_max: a.h_max,
        slack: a.slack,
        replace_above: a.replace_above,
    };
    let measure: Measure = a.measure.into();
    let study = Study::new(a.arl0);
    let table = study.optimal_h_table(v, a.head_start, &a.delta.0, measure, &rule)?;
    let mut t = Table::new(&["chart", "delta", "measure", "H", "arl", "best_H", "best_arl"]);
    for (&delta, o) in a.delta.0.iter().zip(table) {
        t.push(vec![
            v.label(a.head_start).into(),
            delta.into(),
            measure.name().into(),
            o.h.into(),
            o.arl.into(),
            o.best_h.into(),
            o.best_arl.into(),
        ]);
    }
    Ok(t)
}
