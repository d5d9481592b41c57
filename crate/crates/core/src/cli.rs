//! Command-line front end: argument parsing, the run configuration and
//! CSV/JSON table output.

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{extract_constant, synthetic_sequence, AsymptoticModel, SequenceKind, MIN_ENTRIES};
use crate::error::Error;
use crate::numerics::PrecisionContext;
use crate::psi::{log_psi, psi_eval, tau_bundle, PsiRoute};
use crate::spectral::{r_tilde_table, SpectralTable};
use crate::theta::{critical_points, real_zeros, theta_eval, CriticalKind, ThetaQuery};
use crate::verify::{run_suite, Suite};

/// Significant digits for residuals, tail bounds and margins.
const RESIDUAL_DIGITS: usize = 6;

#[derive(Debug, Parser)]
#[command(name = "ptheta", version, about = "Partial theta function: values, zeros, spectrum and asymptotics")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Working precision in decimal digits.
    #[arg(long, global = true, env = "THETA_PRECISION", value_name = "DIGITS")]
    pub precision: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Write the table here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, value_name = "N")]
    pub parallelism: Option<NonZeroUsize>,
    /// Omit the leading provenance line (timestamp and run configuration).
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// θ(q, x) with its tail bound.
    Eval {
        #[arg(long)]
        q: String,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Real zeros ξ_1 … ξ_count.
    Zeros {
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 6)]
        count: usize,
    },
    /// Local minima t_s and maxima w_s for s in the range.
    Critical {
        #[arg(long)]
        q: String,
        #[arg(long, default_value = "1..3")]
        s: IndexRange,
    },
    /// ψ, log ψ, τ, h and K_est at one q or on a grid of midpoints in (0, 1).
    PsiTable {
        #[arg(long, conflicts_with = "points")]
        q: Option<String>,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// r̃_s and z_s.
    Rtilde {
        #[arg(long, default_value = "1..10")]
        s: IndexRange,
    },
    /// Spectral values q̃_j and double zeros y_j.
    Spectral {
        #[arg(long, default_value = "1..5")]
        j: IndexRange,
    },
    /// Asymptotic constant of a computed or planted sequence.
    Fit {
        /// qtilde, y, rtilde or z.
        kind: SequenceKind,
        #[arg(long, visible_alias = "s")]
        j: Option<IndexRange>,
        /// Fit a sequence generated from the model with this constant, e.g. b=2.0.
        #[arg(long, value_name = "NAME=VALUE")]
        synthetic: Option<Planted>,
    },
    /// Property suites; exits 1 if any row fails.
    Verify {
        /// theta, psi, spectral, asymptotics or all.
        suite: Suite,
        #[arg(long, default_value_t = 20)]
        j_max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Inclusive index range written `a` or `a..b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexRange {
    pub start: usize,
    pub end: usize,
}

impl IndexRange {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl fmt::Display for IndexRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for IndexRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{t}` is not a positive integer"))
        };
        let (start, end) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if start == 0 {
            return Err("indices start at 1".into());
        }
        if end < start {
            return Err(format!("empty range {start}..{end}"));
        }
        Ok(Self { start, end })
    }
}

/// A planted constant `name=value` for synthetic fits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Planted {
    pub name: String,
    pub value: String,
}

impl FromStr for Planted {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
        let name = name.trim();
        if !["b", "b*", "alpha", "alpha*"].contains(&name) {
            return Err(format!("unknown constant `{name}` (expected b, b*, alpha or alpha*)"));
        }
        value
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("`{value}` is not a number"))?;
        Ok(Self {
            name: name.to_string(),
            value: value.trim().to_string(),
        })
    }
}

impl fmt::Display for Planted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.name, self.value)
    }
}

/// Everything that determines a run's output, in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub precision_digits: u32,
    pub j_max: usize,
    /// The subcommand and its grid, e.g. `spectral j=1..5`.
    pub grid_spec: String,
    pub output_format: OutputFormat,
    pub output_path: Option<String>,
    pub parallelism: usize,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Self {
        let c = &cli.common;
        let (grid_spec, j_max) = match &cli.command {
            Command::Eval { q, x } => (format!("eval q={q} x={x}"), 1),
            Command::Zeros { q, count } => (format!("zeros q={q} count={count}"), count.div_ceil(2).max(1)),
            Command::Critical { q, s } => (format!("critical q={q} s={s}"), s.end),
            Command::PsiTable { q: Some(q), .. } => (format!("psi-table q={q}"), 1),
            Command::PsiTable { q: None, points } => (format!("psi-table points={points}"), 1),
            Command::Rtilde { s } => (format!("rtilde s={s}"), s.end),
            Command::Spectral { j } => (format!("spectral j={j}"), j.end),
            Command::Fit { kind, j, synthetic } => {
                let range = j.unwrap_or_else(|| default_fit_range(*kind));
                let mut spec = format!("fit {kind} j={range}");
                if let Some(p) = synthetic {
                    spec.push_str(&format!(" synthetic={p}"));
                }
                (spec, range.end)
            }
            Command::Verify { suite, j_max } => (format!("verify {suite} j_max={j_max}"), (*j_max).max(1)),
        };
        Self {
            precision_digits: c.precision.unwrap_or(PrecisionContext::DEFAULT_DIGITS),
            j_max,
            grid_spec,
            output_format: c.format,
            output_path: c.out.as_ref().map(|p| p.display().to_string()),
            parallelism: c
                .parallelism
                .or_else(|| std::thread::available_parallelism().ok())
                .map_or(1, NonZeroUsize::get),
        }
    }

    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_canonical(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn default_fit_range(kind: SequenceKind) -> IndexRange {
    let end = if matches!(kind, SequenceKind::RTilde | SequenceKind::Z) { 400 } else { 200 };
    IndexRange { start: 50, end }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    VerifyFailure,
    Usage,
    Numeric,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::VerifyFailure => 1,
            Self::Usage => 2,
            Self::Numeric => 3,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(msg) | Error::InvalidContext(msg) => Self::Usage(msg),
            other => Self::Numeric(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Num(String),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Num(v) | Self::Text(v) => v.clone(),
            Self::Bool(v) => v.to_string(),
            Self::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            Self::Int(v) => Value::from(*v),
            Self::Num(v) | Self::Text(v) => Value::from(v.as_str()),
            Self::Bool(v) => Value::from(*v),
            Self::Empty => Value::Null,
        }
    }
}

/// A table with fixed column names; numbers are kept as decimal text so no
/// digits are lost in JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W, provenance: Option<&str>) -> io::Result<()> {
        let mut out = out;
        if let Some(line) = provenance {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()
    }

    pub fn write_json<W: Write>(&self, mut out: W, provenance: Option<(&str, &RunConfig)>) -> io::Result<()> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let map = self.columns.iter().zip(row).map(|(k, v)| ((*k).to_string(), v.json())).collect();
                serde_json::Value::Object(map)
            })
            .collect();
        let mut doc = serde_json::Map::new();
        if let Some((stamp, config)) = provenance {
            doc.insert("generated".into(), stamp.into());
            doc.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
        }
        doc.insert("columns".into(), self.columns.clone().into());
        doc.insert("rows".into(), rows.into());
        serde_json::to_writer_pretty(&mut out, &serde_json::Value::Object(doc))?;
        writeln!(out)
    }
}

/// `digits` significant digits; rug reads the format precision that way.
fn num(v: &Float, digits: usize) -> Cell {
    Cell::Num(format!("{:.*e}", digits.max(1), v))
}

fn num_f64(v: f64) -> Cell {
    Cell::Num(format!("{v:e}"))
}

fn err_cell(e: &Error) -> Cell {
    Cell::Text(e.to_string())
}

/// Runs a parsed command line on a worker pool of the configured size.
pub fn execute(cli: &Cli) -> Status {
    let config = RunConfig::from_cli(cli);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.parallelism).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return Status::Usage;
        }
    };
    match pool.install(|| run(cli, &config)) {
        Ok(status) => status,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            Status::Usage
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            Status::Numeric
        }
    }
}

fn run(cli: &Cli, config: &RunConfig) -> Result<Status, Failure> {
    let ctx = PrecisionContext::with_digits(config.precision_digits)?;
    let digits = config.precision_digits as usize;
    let (table, status) = match &cli.command {
        Command::Eval { q, x } => (eval_table(q, x, &ctx, digits)?, Status::Success),
        Command::Zeros { q, count } => rows_or_fail(zeros_table(q, *count, &ctx, digits)?),
        Command::Critical { q, s } => rows_or_fail(critical_table(q, *s, &ctx, digits)?),
        Command::PsiTable { q, points } => rows_or_fail(psi_table(q.as_deref(), *points, &ctx, digits)?),
        Command::Rtilde { s } => rows_or_fail(rtilde_table(*s, &ctx, digits)),
        Command::Spectral { j } => rows_or_fail(spectral_rows(*j, &ctx, digits)?),
        Command::Fit { kind, j, synthetic } => {
            let range = j.unwrap_or_else(|| default_fit_range(*kind));
            (fit_table(*kind, range, synthetic.as_ref(), &ctx)?, Status::Success)
        }
        Command::Verify { suite, j_max } => verify_table(*suite, *j_max, &ctx)?,
    };
    emit(&table, cli, config)?;
    Ok(status)
}

/// Tables whose rows carry their own error column: the run fails only when
/// every row failed.
fn rows_or_fail((table, failed): (Table, usize)) -> (Table, Status) {
    let status = if !table.rows.is_empty() && failed == table.rows.len() {
        eprintln!("error: every row failed");
        Status::Numeric
    } else {
        Status::Success
    };
    (table, status)
}

fn emit(table: &Table, cli: &Cli, config: &RunConfig) -> Result<(), Failure> {
    let stamp = (!cli.common.no_timestamp).then(|| {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!("generated at unix time {secs}")
    });
    let sink: Box<dyn Write> = match &cli.common.out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    };
    match config.output_format {
        OutputFormat::Csv => {
            let line = stamp.map(|s| format!("{s}; config {}", config.to_canonical()));
            table.write_csv(sink, line.as_deref())?;
        }
        OutputFormat::Json => table.write_json(sink, stamp.as_deref().map(|s| (s, config)))?,
    }
    Ok(())
}

fn eval_table(q: &str, x: &str, ctx: &PrecisionContext, digits: usize) -> Result<Table, Failure> {
    let query = ThetaQuery::new(ctx.parse(q)?, ctx.parse(x)?)?;
    let r = theta_eval(&query, ctx)?;
    let mut t = Table::new(&["q", "x", "value", "tail_bound", "terms_used"]);
    t.push(vec![
        Cell::Text(q.to_string()),
        Cell::Text(x.to_string()),
        num(&r.value, digits),
        num(&r.tail_bound, RESIDUAL_DIGITS),
        Cell::Int(r.terms_used),
    ]);
    Ok(t)
}

fn zeros_table(q: &str, count: usize, ctx: &PrecisionContext, digits: usize) -> Result<(Table, usize), Failure> {
    if count == 0 {
        return Err(Failure::Usage("--count must be positive".into()));
    }
    let records = real_zeros(&ctx.parse(q)?, count, ctx)?;
    let mut t = Table::new(&["index", "location", "residual", "coalesced", "error"]);
    let mut failed = 0;
    for (i, r) in records.iter().enumerate() {
        t.push(match r {
            Ok(z) => vec![
                Cell::Int(z.index),
                num(&z.location, digits),
                num(&z.residual, RESIDUAL_DIGITS),
                Cell::Bool(z.coalesced),
                Cell::Empty,
            ],
            Err(e) => {
                failed += 1;
                vec![Cell::Int(i + 1), Cell::Empty, Cell::Empty, Cell::Empty, err_cell(e)]
            }
        });
    }
    Ok((t, failed))
}

fn critical_table(q: &str, s: IndexRange, ctx: &PrecisionContext, digits: usize) -> Result<(Table, usize), Failure> {
    let records = critical_points(&ctx.parse(q)?, s.end, ctx)?;
    let mut t = Table::new(&["s", "kind", "location", "theta_value", "second_derivative", "error"]);
    let mut failed = 0;
    for (i, r) in records.iter().enumerate() {
        let (index, kind) = (i / 2 + 1, if i % 2 == 0 { "minimum" } else { "maximum" });
        if index < s.start {
            continue;
        }
        t.push(match r {
            Ok(c) => vec![
                Cell::Int(c.index),
                Cell::Text(match c.kind {
                    CriticalKind::Minimum => "minimum".into(),
                    CriticalKind::Maximum => "maximum".into(),
                }),
                num(&c.location, digits),
                num(&c.theta_value, digits),
                num(&c.second_derivative, digits),
                Cell::Empty,
            ],
            Err(e) => {
                failed += 1;
                vec![
                    Cell::Int(index),
                    Cell::Text(kind.into()),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    err_cell(e),
                ]
            }
        });
    }
    Ok((t, failed))
}

fn psi_table(q: Option<&str>, points: usize, ctx: &PrecisionContext, digits: usize) -> Result<(Table, usize), Failure> {
    let qs: Vec<(String, Float)> = match q {
        Some(q) => vec![(q.to_string(), ctx.parse(q)?)],
        None => {
            if points == 0 {
                return Err(Failure::Usage("--points must be positive".into()));
            }
            (0..points)
                .map(|i| {
                    let v = Float::with_val(ctx.bits(), 2 * i + 1) / (2 * points) as u64;
                    (format!("{:.6}", v.to_f64()), v)
                })
                .collect()
        }
    };
    let mut t = Table::new(&["q", "psi", "tail_bound", "log_psi", "tau", "h", "k_est", "error"]);
    let mut failed = 0;
    for (label, q) in qs {
        let row = (|| -> crate::Result<Vec<Cell>> {
            let psi = psi_eval(&q, PsiRoute::Series, ctx)?;
            let log = log_psi(&q, ctx)?;
            let b = tau_bundle(&q, ctx)?;
            Ok(vec![
                num(&psi.psi, digits),
                num(&psi.tail_bound, RESIDUAL_DIGITS),
                num(&log, digits),
                num(&b.tau, digits),
                num(&b.h, digits),
                num(&b.k_est, digits),
                Cell::Empty,
            ])
        })();
        let mut cells = vec![Cell::Text(label)];
        match row {
            Ok(r) => cells.extend(r),
            Err(e) => {
                failed += 1;
                cells.extend(std::iter::repeat_n(Cell::Empty, 6));
                cells.push(err_cell(&e));
            }
        }
        t.push(cells);
    }
    Ok((t, failed))
}

fn rtilde_table(s: IndexRange, ctx: &PrecisionContext, digits: usize) -> (Table, usize) {
    let mut t = Table::new(&[
        "s",
        "r_tilde",
        "z",
        "v_s",
        "residual",
        "theta_residual",
        "ambiguous",
        "error",
    ]);
    let mut failed = 0;
    for (index, r) in s.iter().zip(r_tilde_table(s.iter(), ctx)) {
        t.push(match r {
            Ok(r) => vec![
                Cell::Int(r.s),
                num(&r.r_tilde, digits),
                num(&r.z, digits),
                num(&r.v_s, digits),
                num(&r.residual, RESIDUAL_DIGITS),
                num(&r.theta_residual, RESIDUAL_DIGITS),
                Cell::Bool(r.ambiguous),
                Cell::Empty,
            ],
            Err(e) => {
                failed += 1;
                let mut cells = vec![Cell::Int(index)];
                cells.extend(std::iter::repeat_n(Cell::Empty, 6));
                cells.push(err_cell(&e));
                cells
            }
        });
    }
    (t, failed)
}

fn spectral_rows(j: IndexRange, ctx: &PrecisionContext, digits: usize) -> Result<(Table, usize), Failure> {
    let table = SpectralTable::compute(j.start, j.end, ctx)?;
    let mut t = Table::new(&["j", "q_tilde", "y", "theta_residual", "dtheta_residual", "error"]);
    let mut failed = 0;
    for (index, r) in j.iter().zip(&table.spectral) {
        t.push(match r {
            Ok(r) => vec![
                Cell::Int(r.j),
                num(&r.q_tilde, digits),
                num(&r.y, digits),
                num(&r.theta_residual, RESIDUAL_DIGITS),
                num(&r.dtheta_residual, RESIDUAL_DIGITS),
                Cell::Empty,
            ],
            Err(e) => {
                failed += 1;
                vec![Cell::Int(index), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, err_cell(e)]
            }
        });
    }
    Ok((t, failed))
}

fn planted_model(kind: SequenceKind, planted: &Planted, ctx: &PrecisionContext) -> Result<AsymptoticModel, Failure> {
    let value = ctx.parse(&planted.value)?;
    let model = AsymptoticModel::new(kind);
    let base = planted.name.trim_end_matches('*');
    let starred = planted.name.ends_with('*');
    let expects_star = matches!(kind, SequenceKind::RTilde | SequenceKind::Z);
    if starred && !expects_star {
        return Err(Failure::Usage(format!("`{}` does not belong to {kind}", planted.name)));
    }
    match base {
        "b" => Ok(model.with_b(value)),
        "alpha" if !kind.is_parameter() => Ok(model.with_alpha(value)),
        _ => Err(Failure::Usage(format!("{kind} is fitted through {}", kind.constant_name()))),
    }
}

fn fit_table(
    kind: SequenceKind,
    range: IndexRange,
    synthetic: Option<&Planted>,
    ctx: &PrecisionContext,
) -> Result<Table, Failure> {
    if range.len() < MIN_ENTRIES {
        return Err(Failure::Usage(format!("a fit needs at least {MIN_ENTRIES} indices, got {}", range.len())));
    }
    let sequence: Vec<(usize, Float)> = match synthetic {
        Some(p) => synthetic_sequence(&planted_model(kind, p, ctx)?, range.iter(), ctx)?,
        None => computed_sequence(kind, range, ctx)?,
    };
    let fit = extract_constant(&sequence, kind).map_err(|e| match e {
        Error::DegenerateSequence(_) => Failure::Numeric(e),
        other => Failure::from(other),
    })?;
    let mut t = Table::new(&["row", "constant", "index", "estimate", "interval_lo", "interval_hi", "slack", "in_interval"]);
    let name = || Cell::Text(fit.constant_name.clone());
    for (j, c) in &fit.per_index_estimates {
        t.push(vec![
            Cell::Text("estimate".into()),
            name(),
            Cell::Int(*j),
            num_f64(*c),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    let interval = |label: &str, value: f64, verdict: Cell| {
        vec![
            Cell::Text(label.into()),
            name(),
            Cell::Empty,
            num_f64(value),
            num_f64(fit.reference_interval.0),
            num_f64(fit.reference_interval.1),
            num_f64(fit.slack),
            verdict,
        ]
    };
    t.push(interval("tail_average", fit.tail_average, Cell::Empty));
    t.push(interval("extrapolated", fit.extrapolated, Cell::Bool(fit.in_interval)));
    Ok(t)
}

/// The sequence of `kind` over `range`; rows whose solve failed are dropped
/// with a warning.
fn computed_sequence(kind: SequenceKind, range: IndexRange, ctx: &PrecisionContext) -> Result<Vec<(usize, Float)>, Failure> {
    let mut out = Vec::with_capacity(range.len());
    let mut keep = |index: usize, value: crate::Result<Float>| match value {
        Ok(v) => out.push((index, v)),
        Err(e) => eprintln!("warning: index {index} dropped: {e}"),
    };
    match kind {
        SequenceKind::QTilde | SequenceKind::Y => {
            let table = SpectralTable::compute(range.start, range.end, ctx)?;
            for (j, r) in range.iter().zip(table.spectral) {
                keep(
                    j,
                    r.map(|r| if kind == SequenceKind::QTilde { r.q_tilde } else { r.y }),
                );
            }
        }
        SequenceKind::RTilde | SequenceKind::Z => {
            for (s, r) in range.iter().zip(r_tilde_table(range.iter(), ctx)) {
                keep(s, r.map(|r| if kind == SequenceKind::RTilde { r.r_tilde } else { r.z }));
            }
        }
    }
    Ok(out)
}

fn verify_table(suite: Suite, j_max: usize, ctx: &PrecisionContext) -> Result<(Table, Status), Failure> {
    if j_max == 0 {
        return Err(Failure::Usage("--j-max must be positive".into()));
    }
    let report = run_suite(suite, j_max, ctx)?;
    let mut t = Table::new(&["suite", "name", "grid_size", "worst_margin", "pass", "note"]);
    for row in &report.rows {
        t.push(vec![
            Cell::Text(row.suite.clone()),
            Cell::Text(row.name.clone()),
            Cell::Int(row.grid_size),
            num_f64(row.worst_margin),
            Cell::Bool(row.pass),
            Cell::Text(row.note.clone()),
        ]);
    }
    let status = if report.all_pass() {
        Status::Success
    } else {
        for row in report.failures() {
            eprintln!("FAIL {}: {} (worst margin {:e}) {}", row.suite, row.name, row.worst_margin, row.note);
        }
        Status::VerifyFailure
    };
    Ok((t, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_single_and_inclusive() {
        assert_eq!("7".parse::<IndexRange>().unwrap(), IndexRange { start: 7, end: 7 });
        assert_eq!("1..5".parse::<IndexRange>().unwrap(), IndexRange { start: 1, end: 5 });
        assert_eq!("2..=4".parse::<IndexRange>().unwrap(), IndexRange { start: 2, end: 4 });
        assert!("0..3".parse::<IndexRange>().is_err());
        assert!("5..3".parse::<IndexRange>().is_err());
        assert!("a..3".parse::<IndexRange>().is_err());
    }

    #[test]
    fn planted_constants_parse() {
        let p: Planted = "b=2.0".parse().unwrap();
        assert_eq!(p.to_string(), "b=2.0");
        assert!("c=1".parse::<Planted>().is_err());
        assert!("b=x".parse::<Planted>().is_err());
    }

    #[test]
    fn float_cells_use_significant_digits() {
        let v = Float::with_val(200, 0.25);
        assert_eq!(num(&v, 3), Cell::Num("2.50e-1".into()));
    }
}
