//! Command-line front end: single-point evaluation, figure-style sweeps,
//! simulation reports, gain maps, and convergence studies over the flat
//! key-value config format.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fogpipe::analysis::{
    classify_regime, d2d_threshold, is_d2d_beneficial, min_pipelined_ndt, pipelining_gain_bound,
};
use fogpipe::model::{ConfigError, ConfigFile, SimScale, SystemParams};
use fogpipe::scheme::{block_markov_convert, synthesize_serial_policy, validate_policy};
use fogpipe::simulator::{place_caches, worst_case_report, Delivery, DeliveryReport, RunOptions};
use output::{Cell, Table};

const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fogpipe",
    about = "latency analysis and delivery simulation for a 2x2 D2D-aided fog RAN",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed forms at a single parameter point.
    Eval(CommonArgs),
    /// Sweep the fractional cache size; emits knot rows for every breakpoint.
    SweepMu(CommonArgs),
    /// Sweep the D2D rate at fixed cache size and fronthaul rate.
    SweepRd(CommonArgs),
    /// Synthesize a policy and run serial and pipelined worst-case intervals.
    Simulate(CommonArgs),
    /// Grid of pipelined vs serial-achievable NDT and the observed gain.
    GainMap(CommonArgs),
    /// Empirical NDT against the closed form over block counts and SNR exponents.
    Convergence(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum CliError {
    Parse(String),
    Validation(String),
    Infeasible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Validation(m) | CliError::Infeasible(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Param(_) | ConfigError::Scale(_) => CliError::Validation(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, table) = match &cli.command {
        Command::Eval(a) => (a, load_config(a).and_then(|c| cmd_eval(&c))),
        Command::SweepMu(a) => (a, load_config(a).and_then(|c| cmd_sweep_mu(&c))),
        Command::SweepRd(a) => (a, load_config(a).and_then(|c| cmd_sweep_rd(&c))),
        Command::Simulate(a) => (a, load_config(a).and_then(|c| cmd_simulate(&c))),
        Command::GainMap(a) => (a, load_config(a).and_then(|c| cmd_gain_map(&c))),
        Command::Convergence(a) => (a, load_config(a).and_then(|c| cmd_convergence(&c))),
    };
    match table {
        Ok(table) => {
            let text = match args.format {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json(),
            };
            match &args.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(EXIT_PARSE);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", args.config.display())))?;
    Ok(ConfigFile::parse(&text)?)
}

/// Inclusive uniform grid with `steps` points.
fn grid(start: f64, stop: f64, steps: u64) -> Result<Vec<f64>, CliError> {
    if steps < 2 || start.is_nan() || stop.is_nan() || start > stop {
        return Err(CliError::Validation(format!(
            "sweep range needs start <= stop and steps >= 2, got [{start}, {stop}] x {steps}"
        )));
    }
    let step = (stop - start) / (steps - 1) as f64;
    Ok((0..steps).map(|i| start + i as f64 * step).collect())
}

/// Sorted, deduplicated merge of grid points and knot candidates.
fn merge_axis(mut points: Vec<f64>, knots: &[f64], start: f64, stop: f64) -> Vec<f64> {
    for &k in knots {
        if k >= start && k <= stop {
            points.push(k);
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    points
}

fn params_with(cfg: &ConfigFile, mu: f64, r_d: f64) -> Result<SystemParams, CliError> {
    let p = SystemParams::new(
        mu,
        cfg.require_f64("r_f")?,
        r_d,
        cfg.u64_or("n_files", 2)? as u32,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(p)
}

fn cmd_eval(cfg: &ConfigFile) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let ndt = min_pipelined_ndt(&p);
    let regime = classify_regime(&p);
    let threshold = d2d_threshold(&p);
    let mut table = Table::new(vec![
        "mu",
        "r_f",
        "r_d",
        "min_pipelined_ndt",
        "regime",
        "tie",
        "d2d_threshold_raw",
        "d2d_threshold",
        "is_d2d_beneficial",
        "pipelining_gain_bound",
    ]);
    table.push(vec![
        Cell::Float(p.mu),
        Cell::Float(p.r_f),
        Cell::Float(p.r_d),
        Cell::Float(ndt.value()),
        Cell::Text(regime.label().into()),
        Cell::Bool(regime.tie),
        Cell::Float(threshold.raw),
        Cell::Float(threshold.clamped),
        Cell::Bool(is_d2d_beneficial(p.mu, p.r_f)),
        Cell::Float(pipelining_gain_bound(p.mu)),
    ]);
    Ok(table)
}

/// Knot candidates of the NDT-vs-mu curve for the swept and the zero-D2D
/// baselines, so every breakpoint lands on an exact output row.
fn mu_knot_candidates(r_f: f64, r_d: f64) -> Vec<f64> {
    if !(r_f > 0.0 && r_f < 1.0) {
        return Vec::new();
    }
    vec![
        (1.0 - r_f) / (2.0 + r_f),
        (1.0 - r_f + r_d) / (2.0 + r_f + 2.0 * r_d),
        1.0 - r_f - r_d,
        (1.0 - r_f) / 2.0,
        1.0 - r_f,
    ]
}

fn cmd_sweep_mu(cfg: &ConfigFile) -> Result<Table, CliError> {
    let r_f = cfg.require_f64("r_f")?;
    let r_d = cfg.require_f64("r_d")?;
    let start = cfg.f64_or("sweep_start", 0.0)?;
    let stop = cfg.f64_or("sweep_stop", 1.0)?;
    let steps = cfg.u64_or("sweep_steps", 101)?;
    let points = merge_axis(
        grid(start, stop, steps)?,
        &mu_knot_candidates(r_f, r_d),
        start,
        stop,
    );

    let mut table = Table::new(vec!["mu", "ndt", "ndt_no_d2d", "regime"]);
    for mu in points {
        let p = params_with(cfg, mu, r_d)?;
        let baseline = params_with(cfg, mu, 0.0)?;
        table.push(vec![
            Cell::Float(mu),
            Cell::Float(min_pipelined_ndt(&p).value()),
            Cell::Float(min_pipelined_ndt(&baseline).value()),
            Cell::Text(classify_regime(&p).label().into()),
        ]);
    }
    Ok(table)
}

fn cmd_sweep_rd(cfg: &ConfigFile) -> Result<Table, CliError> {
    let mu = cfg.require_f64("mu")?;
    let start = cfg.f64_or("sweep_start", 0.0)?;
    let stop = cfg.f64_or("sweep_stop", 1.0)?;
    let steps = cfg.u64_or("sweep_steps", 101)?;
    let threshold = d2d_threshold(&params_with(cfg, mu, 0.0)?).clamped;
    let points = merge_axis(grid(start, stop, steps)?, &[threshold], start, stop);

    let mut table = Table::new(vec![
        "r_d",
        "ndt_pipelined",
        "ndt_serial_achievable",
        "threshold_marker",
    ]);
    for r_d in points {
        let p = params_with(cfg, mu, r_d)?;
        let serial = match synthesize_serial_policy(&p) {
            Ok(policy) => policy.ndt.sum(),
            Err(_) => f64::INFINITY,
        };
        table.push(vec![
            Cell::Float(r_d),
            Cell::Float(min_pipelined_ndt(&p).value()),
            Cell::Float(serial),
            Cell::Float(threshold),
        ]);
    }
    Ok(table)
}

const REPORT_COLUMNS: [&str; 12] = [
    "record",
    "blocks",
    "log_p",
    "total_symbols",
    "busy_fronthaul_1",
    "busy_fronthaul_2",
    "busy_edge",
    "busy_d2d_12",
    "busy_d2d_21",
    "decode_success",
    "empirical_ndt",
    "gap_to_closed_form",
];

fn report_row(record: &str, blocks: u32, log_p: f64, r: &DeliveryReport) -> Vec<Cell> {
    vec![
        Cell::Text(record.into()),
        Cell::Int(u64::from(blocks)),
        Cell::Float(log_p),
        Cell::Int(r.total_symbols),
        Cell::Int(r.busy.fronthaul_1),
        Cell::Int(r.busy.fronthaul_2),
        Cell::Int(r.busy.edge),
        Cell::Int(r.busy.d2d_12),
        Cell::Int(r.busy.d2d_21),
        Cell::Bool(r.decode_success),
        Cell::Float(r.empirical_ndt),
        Cell::Float(r.gap_to_closed_form),
    ]
}

fn cmd_simulate(cfg: &ConfigFile) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let scale = cfg.sim_scale()?;
    let opts = RunOptions {
        degenerate_passthrough: cfg.u64_or("degenerate_passthrough", 0)? != 0,
    };
    if !min_pipelined_ndt(&p).is_feasible() {
        return Err(CliError::Infeasible(format!(
            "instance (mu={}, r_f={}, r_d={}) has no feasible delivery",
            p.mu, p.r_f, p.r_d
        )));
    }
    let policy = synthesize_serial_policy(&p).map_err(|e| CliError::Infeasible(e.to_string()))?;
    validate_policy(&policy, &p).map_err(|e| CliError::Validation(e.to_string()))?;
    place_caches(&policy, &p, &scale).map_err(|e| CliError::Validation(e.to_string()))?;
    let schedule =
        block_markov_convert(&policy, &scale).map_err(|e| CliError::Validation(e.to_string()))?;

    let serial = worst_case_report(Delivery::Serial(&policy), &p, &scale, &opts)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let pipelined = worst_case_report(Delivery::Pipelined(&schedule), &p, &scale, &opts)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let mut table = Table::new(REPORT_COLUMNS.to_vec());
    table.push(report_row("serial", scale.blocks, scale.log_p, &serial));
    table.push(report_row(
        "pipelined",
        scale.blocks,
        scale.log_p,
        &pipelined,
    ));

    if let Some(blocks_list) = cfg.u64_list("blocks_list")? {
        for blocks in blocks_list {
            let scale_b = SimScale::new(scale.file_bits, scale.log_p, blocks as u32)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let schedule_b = block_markov_convert(&policy, &scale_b)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let report = worst_case_report(Delivery::Pipelined(&schedule_b), &p, &scale_b, &opts)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            table.push(report_row(
                "convergence",
                scale_b.blocks,
                scale_b.log_p,
                &report,
            ));
        }
    }
    Ok(table)
}

fn cmd_gain_map(cfg: &ConfigFile) -> Result<Table, CliError> {
    let mus = grid(
        cfg.f64_or("mu_start", 0.0)?,
        cfg.f64_or("mu_stop", 1.0)?,
        cfg.u64_or("mu_steps", 21)?,
    )?;
    let rfs = grid(
        cfg.f64_or("rf_start", 0.0)?,
        cfg.f64_or("rf_stop", 2.0)?,
        cfg.u64_or("rf_steps", 21)?,
    )?;
    let rds = grid(
        cfg.f64_or("rd_start", 0.0)?,
        cfg.f64_or("rd_stop", 2.0)?,
        cfg.u64_or("rd_steps", 21)?,
    )?;
    let n_files = cfg.u64_or("n_files", 2)? as u32;

    let mut table = Table::new(vec![
        "mu",
        "r_f",
        "r_d",
        "pipelined_ndt",
        "serial_achievable_ndt",
        "observed_gain",
        "bound",
    ]);
    for &mu in &mus {
        for &r_f in &rfs {
            for &r_d in &rds {
                let p = SystemParams::new(mu, r_f, r_d, n_files)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                // Infeasible corners carry no policy; they are skipped.
                let Ok(policy) = synthesize_serial_policy(&p) else {
                    continue;
                };
                let pipelined = policy.ndt.max();
                let serial = policy.ndt.sum();
                table.push(vec![
                    Cell::Float(mu),
                    Cell::Float(r_f),
                    Cell::Float(r_d),
                    Cell::Float(pipelined),
                    Cell::Float(serial),
                    Cell::Float(serial / pipelined),
                    Cell::Float(pipelining_gain_bound(mu)),
                ]);
            }
        }
    }
    Ok(table)
}

fn cmd_convergence(cfg: &ConfigFile) -> Result<Table, CliError> {
    let p = cfg.system_params()?;
    let file_bits = cfg.require_u64("file_bits")?;
    let blocks_list: Vec<u32> = cfg
        .u64_list("blocks_list")?
        .ok_or_else(|| CliError::Parse("missing key `blocks_list`".into()))?
        .into_iter()
        .map(|b| b as u32)
        .collect();
    let logp_list: Vec<f64> = match cfg.get("logp_list") {
        Some(raw) => raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Parse(format!("logp_list: cannot parse `{}`", s.trim())))
            })
            .collect::<Result<_, _>>()?,
        None => vec![cfg.require_f64("log_p")?],
    };

    let series = fogpipe::simulator::convergence_study(&p, &blocks_list, &logp_list, file_bits)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if !series.feasible {
        return Err(CliError::Infeasible(format!(
            "instance (mu={}, r_f={}, r_d={}) has no feasible delivery",
            p.mu, p.r_f, p.r_d
        )));
    }
    let mut table = Table::new(vec![
        "blocks",
        "log_p",
        "empirical_ndt",
        "gap_to_closed_form",
    ]);
    for e in &series.entries {
        table.push(vec![
            Cell::Int(u64::from(e.blocks)),
            Cell::Float(e.log_p),
            Cell::Float(e.empirical_ndt),
            Cell::Float(e.gap_to_closed_form),
        ]);
    }
    Ok(table)
}
