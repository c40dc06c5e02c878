//! `ergomart` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (JSON error on stderr), 2 failed
//! identity suite.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ergomart::dynamics::{product_torus, DynamicalSystem, SystemKind, SystemSpec};
use ergomart::experiments::{
    cauchy_profile, cyclic_sweep, desk_catalog, double_average_limit, double_average_profile,
    estimate_constant, identity_suite, oscillation_probe, random_observable, trial_rng,
    ConvergenceReport, ExperimentConfig, IdentityCheck, OscillationStats, RatioEnvelope, SweepRow,
    ValueDistribution,
};
use ergomart::martingale::{backward_martingale, martingale_differences, square_function};
use ergomart::paraproduct::{pi_em, pi_me, summation_by_parts_sides};
use ergomart::space::Observable;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "ergomart",
    version,
    about = "Ergodic-martingale paraproduct experiments on finite systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in systems.
    Catalog(OutputArgs),
    /// Run the identity suites on one system.
    Verify(VerifyArgs),
    /// Evaluate both paraproducts once.
    Paraproduct(ParaproductArgs),
    /// Cauchy profile and pointwise oscillation of the partial sums.
    Converge(ConvergeArgs),
    /// Empirical constant of the paraproduct estimate.
    Constants(ConstantsArgs),
    /// Profile of double ergodic averages for two commuting shifts.
    Double(DoubleArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write a run manifest with timings and output paths.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `cyclic:M[:DEPTH]` or `torus:M1,M2[:DEPTH]`.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Random cases per identity family.
    #[arg(long, default_value_t = 100)]
    draws: usize,
}

#[derive(Args)]
struct ParaproductArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// `unit:I`, `ramp`, `randn` or `const:C`.
    #[arg(long, default_value = "randn")]
    f: Preset,
    #[arg(long, default_value = "randn")]
    g: Preset,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Horizon; defaults to the filtration depth.
    #[arg(long)]
    n: Option<usize>,
    /// First level of the oscillation window.
    #[arg(long, default_value_t = 0)]
    n0: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value = "randn")]
    f: Preset,
    #[arg(long, default_value = "randn")]
    g: Preset,
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Horizon; defaults to the filtration depth.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// `normal` or `student_t3`.
    #[arg(long)]
    distribution: Option<String>,
    /// Also sweep `cyclic:M:M` for these `M` (comma separated).
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<u32>,
    /// Oscillation threshold used by the sweep.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
}

#[derive(Args)]
struct DoubleArgs {
    #[command(flatten)]
    common: Common,
    /// Averaging lengths (comma separated); defaults to 2^0..2^10.
    #[arg(long, value_delimiter = ',')]
    ns: Vec<u64>,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value = "randn")]
    f: Preset,
    #[arg(long, default_value = "randn")]
    g: Preset,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Range(String),
    NonCommuting(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Invalid(_) => "invalid_input",
            CliError::Range(_) => "range",
            CliError::NonCommuting(_) => "non_commuting",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m)
            | CliError::Range(m)
            | CliError::NonCommuting(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<ergomart::Error> for CliError {
    fn from(e: ergomart::Error) -> Self {
        match e {
            ergomart::Error::InvalidInput(_) => CliError::Invalid(e.to_string()),
            ergomart::Error::Range(_) => CliError::Range(e.to_string()),
            ergomart::Error::NonCommuting { .. } => CliError::NonCommuting(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Named observables for the command line.
#[derive(Debug, Clone, PartialEq)]
enum Preset {
    Unit(usize),
    Ramp,
    Randn,
    Const(f64),
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown function preset `{s}` (use unit:I, ramp, randn or const:C)");
        match s.split_once(':') {
            None if s == "ramp" => Ok(Preset::Ramp),
            None if s == "randn" => Ok(Preset::Randn),
            Some(("unit", i)) => i.parse().map(Preset::Unit).map_err(|_| bad()),
            Some(("const", c)) => c
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite())
                .map(Preset::Const)
                .ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preset::Unit(i) => write!(f, "unit:{i}"),
            Preset::Ramp => write!(f, "ramp"),
            Preset::Randn => write!(f, "randn"),
            Preset::Const(c) => write!(f, "const:{c}"),
        }
    }
}

impl Preset {
    /// `stream` separates the draws for `f` and `g` under one seed.
    fn realize(&self, atoms: usize, seed: Option<u64>, stream: u64) -> CliResult<Observable> {
        Ok(match *self {
            Preset::Unit(i) if i < atoms => Observable::indicator(atoms, i),
            Preset::Unit(i) => {
                return Err(invalid(format!(
                    "unit:{i} is out of range for {atoms} atoms"
                )))
            }
            Preset::Ramp => Observable::new((1..=atoms).map(|v| v as f64).collect()),
            Preset::Const(c) => Observable::constant(atoms, c),
            Preset::Randn => {
                let seed =
                    seed.ok_or_else(|| invalid("--seed is required for randomized inputs"))?;
                random_observable(
                    &mut trial_rng(seed, stream),
                    atoms,
                    ValueDistribution::Normal,
                )
            }
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum SystemField {
    #[default]
    Missing,
    Text(String),
    Spec(SystemSpec),
}

/// Config file contents; every field optional so flags can fill the gaps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    a: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    r: Option<f64>,
    horizon_n: Option<usize>,
    seed: Option<u64>,
    trials: Option<usize>,
    #[serde(default)]
    system: SystemField,
    distribution: Option<ValueDistribution>,
}

struct Resolved {
    config: ConfigFile,
    system: Option<SystemSpec>,
    seed: Option<u64>,
}

fn resolve(common: &Common) -> CliResult<Resolved> {
    let mut config = match &common.config {
        None => ConfigFile::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| invalid(format!("config {}: {e}", path.display())))?
        }
    };
    let system = match (&common.system, std::mem::take(&mut config.system)) {
        (Some(text), _) => Some(text.parse()?),
        (None, SystemField::Text(text)) => Some(text.parse()?),
        (None, SystemField::Spec(spec)) => Some(spec),
        (None, SystemField::Missing) => None,
    };
    let seed = common.seed.or(config.seed);
    Ok(Resolved {
        config,
        system,
        seed,
    })
}

fn require_system(r: &Resolved) -> CliResult<&SystemSpec> {
    r.system
        .as_ref()
        .ok_or_else(|| invalid("--system is required"))
}

fn require_seed(r: &Resolved) -> CliResult<u64> {
    r.seed
        .ok_or_else(|| invalid("--seed is required for randomized subcommands"))
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    schema_version: u32,
    command: &'static str,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a serde_json::Value,
    timings_ms: Timings,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Timings {
    compute: f64,
    total: f64,
}

/// A finished run: JSON body plus an optional CSV table.
struct Output {
    command: &'static str,
    body: serde_json::Value,
    table: Option<Table>,
    suite_failed: bool,
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<Option<f64>>>,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_csv(path: &Path, table: &Table) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(table.header).map_err(io)?;
    for row in &table.rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Output, args: &OutputArgs, started: Instant, computed: f64) -> CliResult<()> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: out.command,
        body: &out.body,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    let mut outputs = Vec::new();
    match &args.out {
        Some(path) => {
            write_file(path, json.as_bytes())?;
            outputs.push(path.display().to_string());
        }
        None => print!("{json}"),
    }
    match (&args.csv, &out.table) {
        (Some(path), Some(table)) => {
            write_csv(path, table)?;
            outputs.push(path.display().to_string());
        }
        (Some(_), None) => return Err(invalid(format!("`{}` has no CSV table", out.command))),
        (None, _) => {}
    }
    if let Some(path) = &args.manifest {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "ergomart",
            version: env!("CARGO_PKG_VERSION"),
            command: out.command,
            config: out.body.get("config").unwrap_or(&serde_json::Value::Null),
            timings_ms: Timings {
                compute: computed,
                total: started.elapsed().as_secs_f64() * 1e3,
            },
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

fn profile_table(levels: &[ergomart::experiments::LevelRecord]) -> Table {
    Table {
        header: &["n", "norm", "increment"],
        rows: levels
            .iter()
            .map(|l| vec![Some(l.n as f64), Some(l.norm), l.increment])
            .collect(),
    }
}

#[derive(Serialize)]
struct CatalogEntry {
    name: String,
    atoms: usize,
    depth: usize,
    stabilization_depth: usize,
}

fn run_catalog() -> CliResult<Output> {
    let systems: Vec<CatalogEntry> = desk_catalog()?
        .into_iter()
        .map(|(name, s)| CatalogEntry {
            name,
            atoms: s.atom_count(),
            depth: s.depth(),
            stabilization_depth: s.filtration().stabilization_depth(),
        })
        .collect();
    #[derive(Serialize)]
    struct Body {
        syntax: [&'static str; 2],
        systems: Vec<CatalogEntry>,
    }
    Ok(Output {
        command: "catalog",
        body: to_value(&Body {
            syntax: ["cyclic:M[:DEPTH]", "torus:M1,M2[:DEPTH]"],
            systems,
        }),
        table: None,
        suite_failed: false,
    })
}

fn run_verify(args: &VerifyArgs) -> CliResult<Output> {
    let r = resolve(&args.common)?;
    let spec = require_system(&r)?;
    let seed = require_seed(&r)?;
    if args.draws == 0 {
        return Err(invalid("--draws must be positive"));
    }
    let system = spec.build()?;
    let checks = identity_suite(&system, seed, args.draws)?;
    let passed = checks.iter().all(|c| c.passed);
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSpec,
        seed: u64,
        draws: usize,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        config: Config<'a>,
        passed: bool,
        checks: Vec<IdentityCheck>,
    }
    Ok(Output {
        command: "verify",
        body: to_value(&Body {
            config: Config {
                system: spec,
                seed,
                draws: args.draws,
            },
            passed,
            checks,
        }),
        table: None,
        suite_failed: !passed,
    })
}

fn base_of(flag: Option<f64>, r: &Resolved) -> CliResult<f64> {
    flag.or(r.config.a)
        .ok_or_else(|| invalid("--a is required"))
}

fn run_paraproduct(args: &ParaproductArgs) -> CliResult<Output> {
    let r = resolve(&args.common)?;
    let spec = require_system(&r)?;
    let system = spec.build()?;
    let a = base_of(args.a, &r)?;
    let n = args.n.or(r.config.horizon_n).unwrap_or(system.depth());
    let atoms = system.atom_count();
    let f = args.f.realize(atoms, r.seed, 0)?;
    let g = args.g.realize(atoms, r.seed, 1)?;
    let em = pi_em(&f, &g, &system, a, n)?;
    let me = pi_me(&f, &g, &system, a, n)?;
    let (lhs, rhs) = summation_by_parts_sides(&f, &g, &system, a, n)?;
    let mart = backward_martingale(&g, system.filtration(), system.space())?;
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSpec,
        a: f64,
        n: usize,
        f: String,
        g: String,
        seed: Option<u64>,
    }
    #[derive(Serialize)]
    struct SummationByParts<'a> {
        lhs: &'a [f64],
        rhs: &'a [f64],
        residual: f64,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        config: Config<'a>,
        f: &'a [f64],
        g: &'a [f64],
        pi_em: &'a [f64],
        pi_me: &'a [f64],
        summation_by_parts: SummationByParts<'a>,
        martingale_differences: Vec<Vec<f64>>,
        square_function: Vec<f64>,
    }
    let body = to_value(&Body {
        config: Config {
            system: spec,
            a,
            n,
            f: args.f.to_string(),
            g: args.g.to_string(),
            seed: r.seed,
        },
        f: f.values(),
        g: g.values(),
        pi_em: em.values(),
        pi_me: me.values(),
        summation_by_parts: SummationByParts {
            lhs: lhs.values(),
            rhs: rhs.values(),
            residual: lhs.max_abs_diff(&rhs),
        },
        martingale_differences: martingale_differences(&mart)
            .into_iter()
            .map(Observable::into_values)
            .collect(),
        square_function: square_function(&mart).into_values(),
    });
    let rows = (0..atoms)
        .map(|i| {
            vec![
                Some(i as f64),
                Some(em.get(i)),
                Some(me.get(i)),
                Some(lhs.get(i)),
                Some(rhs.get(i)),
            ]
        })
        .collect();
    Ok(Output {
        command: "paraproduct",
        body,
        table: Some(Table {
            header: &["atom", "pi_em", "pi_me", "sbp_lhs", "sbp_rhs"],
            rows,
        }),
        suite_failed: false,
    })
}

fn run_converge(args: &ConvergeArgs) -> CliResult<Output> {
    let r = resolve(&args.common)?;
    let spec = require_system(&r)?;
    let system = spec.build()?;
    let a = base_of(args.a, &r)?;
    let exp_r = args.r.or(r.config.r).unwrap_or(1.0);
    if !(exp_r.is_finite() && exp_r >= 1.0) {
        return Err(invalid(format!("r = {exp_r} must lie in [1, ∞)")));
    }
    let horizon = args.n.or(r.config.horizon_n).unwrap_or(system.depth());
    if horizon == 0 {
        return Err(invalid("horizon must be positive"));
    }
    if horizon > system.depth() {
        return Err(invalid(format!(
            "horizon {horizon} exceeds the filtration depth {}",
            system.depth()
        )));
    }
    let f = args.f.realize(system.atom_count(), r.seed, 0)?;
    let g = args.g.realize(system.atom_count(), r.seed, 1)?;
    let mut profile = cauchy_profile(&f, &g, &system, a, exp_r, horizon)?;
    profile.oscillation = Some(oscillation_probe(
        &f, &g, &system, a, args.n0, horizon, args.eps,
    )?);
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSpec,
        a: f64,
        r: f64,
        horizon: usize,
        n0: usize,
        epsilon: f64,
        f: String,
        g: String,
        seed: Option<u64>,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        config: Config<'a>,
        filtration_stabilization_depth: usize,
        profile: &'a ConvergenceReport,
    }
    let table = profile_table(&profile.levels);
    Ok(Output {
        command: "converge",
        body: to_value(&Body {
            config: Config {
                system: spec,
                a,
                r: exp_r,
                horizon,
                n0: args.n0,
                epsilon: args.eps,
                f: args.f.to_string(),
                g: args.g.to_string(),
                seed: r.seed,
            },
            filtration_stabilization_depth: system.filtration().stabilization_depth(),
            profile: &profile,
        }),
        table: Some(table),
        suite_failed: false,
    })
}

fn parse_distribution(s: &str) -> CliResult<ValueDistribution> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        invalid(format!(
            "unknown distribution `{s}` (use normal or student_t3)"
        ))
    })
}

fn run_constants(args: &ConstantsArgs) -> CliResult<Output> {
    let r = resolve(&args.common)?;
    let spec = require_system(&r)?.clone();
    let seed = require_seed(&r)?;
    let need = |flag: Option<f64>, file: Option<f64>, name: &str| {
        flag.or(file)
            .ok_or_else(|| invalid(format!("--{name} is required")))
    };
    let distribution = match &args.distribution {
        Some(s) => parse_distribution(s)?,
        None => r.config.distribution.unwrap_or_default(),
    };
    let horizon = match args.n.or(r.config.horizon_n) {
        Some(h) => h,
        None => spec.build()?.depth(),
    };
    let config = ExperimentConfig {
        a: need(args.a, r.config.a, "a")?,
        p: need(args.p, r.config.p, "p")?,
        q: need(args.q, r.config.q, "q")?,
        r: need(args.r, r.config.r, "r")?,
        horizon_n: horizon,
        seed,
        trials: args
            .trials
            .or(r.config.trials)
            .ok_or_else(|| invalid("--trials is required"))?,
        system: spec,
        distribution,
    };
    let report = estimate_constant(&config)?;
    let envelope = report
        .envelope
        .expect("estimate_constant fills the envelope");
    for w in &envelope.warnings {
        eprintln!("warning: {w}");
    }
    let sweep = if args.sweep.is_empty() {
        None
    } else {
        Some(cyclic_sweep(&args.sweep, &config, args.eps)?)
    };
    #[derive(Serialize)]
    struct Body<'a> {
        config: &'a ExperimentConfig,
        envelope: &'a RatioEnvelope,
        #[serde(skip_serializing_if = "Option::is_none")]
        sweep: Option<Vec<SweepRow>>,
    }
    let table = Table {
        header: &["trial", "ratio"],
        rows: envelope
            .trials
            .iter()
            .map(|t| vec![Some(t.trial as f64), Some(t.ratio)])
            .collect(),
    };
    Ok(Output {
        command: "constants",
        body: to_value(&Body {
            config: &config,
            envelope: &envelope,
            sweep,
        }),
        table: Some(table),
        suite_failed: false,
    })
}

fn run_double(args: &DoubleArgs) -> CliResult<Output> {
    let r = resolve(&args.common)?;
    let spec = require_system(&r)?;
    let SystemKind::ProductTorus {
        m1,
        m2,
        shift_s,
        shift_t,
    } = spec.kind
    else {
        return Err(invalid(
            "`double` needs a torus system with two commuting shifts",
        ));
    };
    let pair = product_torus(m1, m2, shift_s, shift_t, spec.depth)?;
    let system: &DynamicalSystem = &pair.system;
    let times: Vec<u64> = if args.ns.is_empty() {
        (0..=10).map(|k| 1u64 << k).collect()
    } else {
        args.ns.clone()
    };
    let f = args.f.realize(system.atom_count(), r.seed, 0)?;
    let g = args.g.realize(system.atom_count(), r.seed, 1)?;
    let profile = double_average_profile(
        &f,
        &g,
        pair.first(),
        &pair.second,
        system.space(),
        &times,
        args.eps,
    )?;
    let limit = double_average_limit(&f, &g, pair.first(), &pair.second);
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSpec,
        ns: &'a [u64],
        epsilon: f64,
        f: String,
        g: String,
        seed: Option<u64>,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        config: Config<'a>,
        levels: &'a [ergomart::experiments::LevelRecord],
        oscillation: &'a Option<OscillationStats>,
        period_average: &'a [f64],
    }
    let table = profile_table(&profile.levels);
    Ok(Output {
        command: "double",
        body: to_value(&Body {
            config: Config {
                system: spec,
                ns: &times,
                epsilon: args.eps,
                f: args.f.to_string(),
                g: args.g.to_string(),
                seed: r.seed,
            },
            levels: &profile.levels,
            oscillation: &profile.oscillation,
            period_average: limit.values(),
        }),
        table: Some(table),
        suite_failed: false,
    })
}

fn output_args(cmd: &Command) -> &OutputArgs {
    match cmd {
        Command::Catalog(o) => o,
        Command::Verify(a) => &a.common.output,
        Command::Paraproduct(a) => &a.common.output,
        Command::Converge(a) => &a.common.output,
        Command::Constants(a) => &a.common.output,
        Command::Double(a) => &a.common.output,
    }
}

fn run(cli: &Cli) -> CliResult<bool> {
    let started = Instant::now();
    let out = match &cli.command {
        Command::Catalog(_) => run_catalog(),
        Command::Verify(a) => run_verify(a),
        Command::Paraproduct(a) => run_paraproduct(a),
        Command::Converge(a) => run_converge(a),
        Command::Constants(a) => run_constants(a),
        Command::Double(a) => run_double(a),
    }?;
    let computed = started.elapsed().as_secs_f64() * 1e3;
    let failed = out.suite_failed;
    emit(out, output_args(&cli.command), started, computed)?;
    Ok(!failed)
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprint!("{}", e.render());
            eprintln!(
                "{}",
                error_json("usage", e.kind().as_str().unwrap_or("invalid arguments"))
            );
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), e.message()));
            ExitCode::from(1)
        }
    }
}
