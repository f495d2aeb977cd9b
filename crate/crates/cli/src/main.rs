//! `tierlab` — one binary covering every capability of the fee-tier
//! liquidity lab: equilibrium solves, parameter sweeps, Monte Carlo
//! simulation, event-stream analytics, order routing, and the two-provider
//! pool walkthrough.
//!
//! Conventions shared by all subcommands:
//!
//! - `--format csv|json` selects the encoding of the primary output (the
//!   simulation report is always JSON, with an optional per-cycle CSV);
//!   CSV floats carry 12 significant digits.
//! - `--out-dir DIR` (default: the `TIERLAB_OUT_DIR` environment variable)
//!   mirrors the primary output into a file and, for model commands, echoes
//!   the merged effective configuration as `effective_config.json`; output
//!   always goes to stdout as well.
//! - Model configs are single JSON or TOML files (chosen by extension);
//!   `--set KEY=VALUE` flags override individual fields after the file is
//!   read, and the sweep axis overrides its parameter per grid point.
//! - Exit codes: 0 success; 1 validation error (bad flags, malformed
//!   config, invalid parameter or data); 2 infeasible model assumptions or
//!   a route beyond the posted depth.
//! - Identical invocation and seed produce byte-identical output,
//!   regardless of `--threads`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use tierlab_core::numerics::fmt_sig12;
use tierlab_core::{analytics, cycle, pool, range, router, sim, ModelError};

#[derive(Parser)]
#[command(name = "tierlab", version, about = "Fee-tier liquidity laboratory")]
struct Cli {
    /// Output encoding for the primary result.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for sweeps and replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving output files and the effective-config echo
    /// (default: the TIERLAB_OUT_DIR environment variable; unset ⇒ stdout
    /// only).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model equilibrium and report its headline quantities.
    Equilibrium {
        #[command(subcommand)]
        model: EquilibriumTarget,
    },
    /// Solve along a one-parameter grid and emit one row per point.
    Sweep {
        #[command(subcommand)]
        model: SweepTarget,
    },
    /// Run the Monte Carlo event process and report per-pool outcomes.
    Simulate(SimulateArgs),
    /// Compute per-metric tables from a swap/mint/burn event stream.
    Analyze {
        #[command(subcommand)]
        metric: AnalyzeTarget,
    },
    /// Split buy orders across two pool snapshots at minimum cost.
    Route(RouteArgs),
    /// Pool mechanics utilities.
    Pool {
        #[command(subcommand)]
        which: PoolTarget,
    },
}

#[derive(Args)]
struct ModelIo {
    /// Model parameters as a JSON or TOML file (missing fields default).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Field override applied after the config file, e.g. `--set Gamma=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum EquilibriumTarget {
    /// Repricing-shock model with a continuum of providers.
    Range(ModelIo),
    /// Deplete-and-refill model with Pareto provider sizes.
    Cycle(ModelIo),
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    io: ModelIo,
    /// Parameter to vary (a field name of the model config, e.g. Gamma).
    #[arg(long)]
    param: String,
    #[arg(long)]
    min: f64,
    #[arg(long)]
    max: f64,
    /// Grid points, endpoints included (at least 2).
    #[arg(long)]
    points: usize,
}

#[derive(Subcommand)]
enum SweepTarget {
    Range(SweepArgs),
    Cycle(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config (JSON or TOML): model, params, horizon, seed, …
    #[arg(long)]
    config: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Field override applied after the config file, e.g.
    /// `--set params.Gamma=2` or `--set replications=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EventsArg {
    /// Event stream CSV (block,position,tx_hash,timestamp,pool_id,…).
    #[arg(long)]
    events: PathBuf,
}

#[derive(Subcommand)]
enum AnalyzeTarget {
    /// Per pool-day adverse-flow cost against both benchmark prices.
    Lvr(EventsArg),
    /// Per pool-day impermanent loss of a symmetric ±5% position.
    Il(EventsArg),
    /// Same-block mint/swap/burn sandwiches.
    Jit(EventsArg),
    /// Wallet-level deposit→withdrawal (and reverse) cycle durations.
    Cycles(EventsArg),
    /// The full pool-day panel.
    Panel(EventsArg),
}

#[derive(Args)]
struct RouteArgs {
    /// Exactly two pool snapshot JSON files.
    #[arg(long, num_args = 2, value_names = ["POOL_A", "POOL_B"])]
    pools: Vec<PathBuf>,
    /// Order sizes in token units, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<f64>,
    /// Fixed gas cost charged per pool used.
    #[arg(long, default_value_t = 0.0)]
    gas: f64,
}

#[derive(Subcommand)]
enum PoolTarget {
    /// Run the two-provider worked example and print its values.
    Demo,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

/// 2 for infeasible assumptions / insufficient depth, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            return match m {
                ModelError::Infeasible(_) | ModelError::InsufficientDepth(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("invalid `threads`: must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("invalid `threads`: {e}"))?;
    }
    let io = Io {
        format: cli.format,
        out_dir: cli
            .out_dir
            .or_else(|| std::env::var_os("TIERLAB_OUT_DIR").map(PathBuf::from)),
    };
    match cli.command {
        Command::Equilibrium { model } => match model {
            EquilibriumTarget::Range(args) => equilibrium_range(&io, &args),
            EquilibriumTarget::Cycle(args) => equilibrium_cycle(&io, &args),
        },
        Command::Sweep { model } => match model {
            SweepTarget::Range(args) => sweep_range(&io, &args),
            SweepTarget::Cycle(args) => sweep_cycle(&io, &args),
        },
        Command::Simulate(args) => simulate(&io, &args),
        Command::Analyze { metric } => match metric {
            AnalyzeTarget::Lvr(a) => analyze_lvr(&io, &a.events),
            AnalyzeTarget::Il(a) => analyze_il(&io, &a.events),
            AnalyzeTarget::Jit(a) => analyze_jit(&io, &a.events),
            AnalyzeTarget::Cycles(a) => analyze_cycles(&io, &a.events),
            AnalyzeTarget::Panel(a) => analyze_panel(&io, &a.events),
        },
        Command::Route(args) => route_sizes(&io, &args),
        Command::Pool { which } => match which {
            PoolTarget::Demo => pool_demo(&io),
        },
    }
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

struct Io {
    format: Format,
    out_dir: Option<PathBuf>,
}

impl Io {
    /// Print `content` to stdout and mirror it to `<out_dir>/<stem>.<ext>`.
    fn emit(&self, stem: &str, content: &str) -> Result<()> {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        self.emit_named(&format!("{stem}.{ext}"), content)
    }

    fn emit_named(&self, filename: &str, content: &str) -> Result<()> {
        print!("{content}");
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory `{}`", dir.display()))?;
            let path = dir.join(filename);
            fs::write(&path, content)
                .with_context(|| format!("writing `{}`", path.display()))?;
        }
        Ok(())
    }

    /// Echo the merged effective configuration for reproducibility.
    fn echo_config(&self, doc: &Value) -> Result<()> {
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory `{}`", dir.display()))?;
            let path = dir.join("effective_config.json");
            fs::write(&path, pretty(doc)?)
                .with_context(|| format!("writing `{}`", path.display()))?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Render rows of pre-formatted fields as CSV (header first).
fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    Ok(String::from_utf8(bytes)?)
}

/// Two-column metric/value CSV for single-solution reports.
fn kv_csv(rows: &[(&str, String)]) -> Result<String> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect();
    csv_table(&["metric", "value"], &body)
}

fn opt_sig12(x: Option<f64>) -> String {
    x.map(fmt_sig12).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Config loading
// ---------------------------------------------------------------------------

/// Read a JSON or TOML config file into a JSON value tree.
fn load_config_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config `{}`", path.display()))?;
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "json" => serde_json::from_str(&text)
            .with_context(|| format!("invalid `config`: `{}` is not valid JSON", path.display())),
        "toml" => {
            let v: toml::Value = toml::from_str(&text).with_context(|| {
                format!("invalid `config`: `{}` is not valid TOML", path.display())
            })?;
            Ok(serde_json::to_value(v)?)
        }
        other => bail!(
            "invalid `config`: `{}` has unsupported extension `{other}` (need .json or .toml)",
            path.display()
        ),
    }
}

/// Recursively merge `overlay` onto `base`: objects merge key-wise,
/// everything else replaces.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply one `--set KEY=VALUE` override; dotted keys descend into nested
/// objects. The value parses as JSON where possible, else as a string.
fn apply_set(base: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("invalid `--set`: `{spec}` is not KEY=VALUE"))?;
    if path.is_empty() {
        bail!("invalid `--set`: `{spec}` has an empty key");
    }
    let value: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    let (last, parents) = parts.split_last().unwrap();
    let mut slot = base;
    for (i, part) in parents.iter().enumerate() {
        let obj = slot.as_object_mut().ok_or_else(|| {
            anyhow!(
                "invalid `--set`: `{}` is not a config section",
                parts[..=i].join(".")
            )
        })?;
        slot = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = slot
        .as_object_mut()
        .ok_or_else(|| anyhow!("invalid `--set`: `{path}` does not address a config field"))?;
    obj.insert(last.to_string(), value);
    Ok(())
}

/// Defaults ← config file ← `--set` overrides, then deserialize.
fn build_params<T>(io: &ModelIo) -> Result<(T, Value)>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default())?;
    if let Some(path) = &io.config {
        merge(&mut value, load_config_value(path)?);
    }
    for spec in &io.set {
        apply_set(&mut value, spec)?;
    }
    let params: T =
        serde_json::from_value(value.clone()).map_err(|e| anyhow!("invalid config: {e}"))?;
    Ok((params, value))
}

// ---------------------------------------------------------------------------
// equilibrium
// ---------------------------------------------------------------------------

fn equilibrium_range(io: &Io, args: &ModelIo) -> Result<()> {
    let (params, cfg): (range::RangeModelParams, Value) = build_params(args)?;
    let eq = range::solve_equilibrium(&params)?;
    let gft = range::gft_compare(&params)?;
    let f_bar = range::yield_threshold(&params);
    let eta_bar = range::eta_threshold(&params)?;
    io.echo_config(&json!({"command": "equilibrium range", "params": cfg}))?;
    let content = match io.format {
        Format::Json => pretty(&json!({
            "equilibrium": eq,
            "gft": gft,
            "yield_threshold": f_bar,
            "eta_threshold": eta_bar,
        }))?,
        Format::Csv => kv_csv(&[
            ("regime", format!("{:?}", eq.regime)),
            ("q_t", opt_sig12(eq.q_t)),
            ("q_lo_l", fmt_sig12(eq.q_lo_l)),
            ("q_lo_h", fmt_sig12(eq.q_lo_h)),
            ("w_low", fmt_sig12(eq.w_low)),
            ("pool_supply_low", fmt_sig12(eq.pool_supply_low)),
            ("pool_supply_high", fmt_sig12(eq.pool_supply_high)),
            ("gft_menu", fmt_sig12(gft.menu)),
            ("gft_single", fmt_sig12(gft.single)),
            ("gft_difference", fmt_sig12(gft.difference)),
            ("yield_threshold", fmt_sig12(f_bar)),
            ("eta_threshold", fmt_sig12(eta_bar)),
        ])?,
    };
    io.emit("equilibrium_range", &content)
}

fn equilibrium_cycle(io: &Io, args: &ModelIo) -> Result<()> {
    let (params, cfg): (cycle::CycleModelParams, Value) = build_params(args)?;
    let eq = cycle::solve_cycle_equilibrium(&params)?;
    let is_single = cycle::single_pool_is(params.h, &params)?;
    let is_menu = cycle::menu_is(&params)?;
    let optimum = if params.gamma_big > 0.0 {
        Some(cycle::optimal_single_fee(&params)?)
    } else {
        None
    };
    io.echo_config(&json!({"command": "equilibrium cycle", "params": cfg}))?;
    let content = match io.format {
        Format::Json => pretty(&json!({
            "equilibrium": eq,
            "is_single_h": is_single,
            "is_menu": is_menu,
            "is_difference": is_menu - is_single,
            "fee_optimum": optimum,
        }))?,
        Format::Csv => kv_csv(&[
            ("regime", format!("{:?}", eq.regime)),
            ("q_t", fmt_sig12(eq.q_t)),
            ("q_lo", fmt_sig12(eq.q_lo)),
            ("l_low", fmt_sig12(eq.l_low)),
            ("l_high", fmt_sig12(eq.l_high)),
            ("w_low", fmt_sig12(eq.w_low)),
            ("d_low", fmt_sig12(eq.d_low)),
            ("d_high", fmt_sig12(eq.d_high)),
            ("boundary_note", eq.boundary_note.clone().unwrap_or_default()),
            ("is_single_h", fmt_sig12(is_single)),
            ("is_menu", fmt_sig12(is_menu)),
            ("is_difference", fmt_sig12(is_menu - is_single)),
            ("f_star", opt_sig12(optimum.as_ref().map(|o| o.f_star))),
            ("is_at_f_star", opt_sig12(optimum.as_ref().map(|o| o.is_at_star))),
            (
                "lambert_reciprocal_form",
                opt_sig12(optimum.as_ref().map(|o| o.lambert_reciprocal_form)),
            ),
            (
                "lambert_matches",
                optimum
                    .as_ref()
                    .map(|o| o.lambert_matches.to_string())
                    .unwrap_or_default(),
            ),
        ])?,
    };
    io.emit("equilibrium_cycle", &content)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn sweep_grid(args: &SweepArgs) -> Result<Vec<f64>> {
    if args.points < 2 {
        bail!("invalid `points`: need at least 2, got {}", args.points);
    }
    if !args.min.is_finite() || !args.max.is_finite() {
        bail!("invalid sweep bounds: `min` and `max` must be finite");
    }
    let n = args.points;
    Ok((0..n)
        .map(|i| args.min + (args.max - args.min) * i as f64 / (n - 1) as f64)
        .collect())
}

fn set_param(base: &Value, name: &str, x: f64) -> Result<Value> {
    let mut v = base.clone();
    let obj = v
        .as_object_mut()
        .ok_or_else(|| anyhow!("invalid config: not an object"))?;
    obj.insert(name.to_string(), json!(x));
    Ok(v)
}

fn sweep_range(io: &Io, args: &SweepArgs) -> Result<()> {
    use rayon::prelude::*;
    let (_, base): (range::RangeModelParams, Value) = build_params(&args.io)?;
    let grid = sweep_grid(args)?;
    struct Row {
        x: f64,
        q_t: Option<f64>,
        q_lo_h: f64,
        w_low: f64,
        gft_single: f64,
        gft_menu: f64,
    }
    let rows: Vec<Row> = grid
        .par_iter()
        .map(|&x| -> Result<Row> {
            let params: range::RangeModelParams =
                serde_json::from_value(set_param(&base, &args.param, x)?)
                    .map_err(|e| anyhow!("invalid `param`: {e}"))?;
            let eq = range::solve_equilibrium(&params)?;
            let gft = range::gft_compare(&params)?;
            Ok(Row {
                x,
                q_t: eq.q_t,
                q_lo_h: eq.q_lo_h,
                w_low: eq.w_low,
                gft_single: gft.single,
                gft_menu: gft.menu,
            })
        })
        .collect::<Result<_>>()?;
    io.echo_config(&json!({
        "command": "sweep range",
        "param": args.param,
        "min": args.min,
        "max": args.max,
        "points": args.points,
        "params": base,
    }))?;
    let content = match io.format {
        Format::Json => {
            let docs: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        args.param.clone(): r.x,
                        "q_t": r.q_t,
                        "q_lo_h": r.q_lo_h,
                        "w_low": r.w_low,
                        "gft_single": r.gft_single,
                        "gft_menu": r.gft_menu,
                    })
                })
                .collect();
            pretty(&docs)?
        }
        Format::Csv => {
            let header = [
                args.param.as_str(),
                "q_t",
                "q_lo_h",
                "w_low",
                "gft_single",
                "gft_menu",
            ];
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_sig12(r.x),
                        opt_sig12(r.q_t),
                        fmt_sig12(r.q_lo_h),
                        fmt_sig12(r.w_low),
                        fmt_sig12(r.gft_single),
                        fmt_sig12(r.gft_menu),
                    ]
                })
                .collect();
            csv_table(&header, &body)?
        }
    };
    io.emit("sweep_range", &content)
}

fn sweep_cycle(io: &Io, args: &SweepArgs) -> Result<()> {
    use rayon::prelude::*;
    let (_, base): (cycle::CycleModelParams, Value) = build_params(&args.io)?;
    let grid = sweep_grid(args)?;
    struct Row {
        x: f64,
        q_t: f64,
        q_lo: f64,
        w_low: f64,
        d_low: f64,
        d_high: f64,
        is_single: f64,
        is_menu: f64,
        f_star: Option<f64>,
    }
    let rows: Vec<Row> = grid
        .par_iter()
        .map(|&x| -> Result<Row> {
            let params: cycle::CycleModelParams =
                serde_json::from_value(set_param(&base, &args.param, x)?)
                    .map_err(|e| anyhow!("invalid `param`: {e}"))?;
            let eq = cycle::solve_cycle_equilibrium(&params)?;
            let is_single = cycle::single_pool_is(params.h, &params)?;
            let is_menu = cycle::menu_is(&params)?;
            let f_star = if params.gamma_big > 0.0 {
                Some(cycle::optimal_single_fee(&params)?.f_star)
            } else {
                None
            };
            Ok(Row {
                x,
                q_t: eq.q_t,
                q_lo: eq.q_lo,
                w_low: eq.w_low,
                d_low: eq.d_low,
                d_high: eq.d_high,
                is_single,
                is_menu,
                f_star,
            })
        })
        .collect::<Result<_>>()?;
    io.echo_config(&json!({
        "command": "sweep cycle",
        "param": args.param,
        "min": args.min,
        "max": args.max,
        "points": args.points,
        "params": base,
    }))?;
    let content = match io.format {
        Format::Json => {
            let docs: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        args.param.clone(): r.x,
                        "q_t": r.q_t,
                        "q_lo": r.q_lo,
                        "w_low": r.w_low,
                        "d_low": r.d_low,
                        "d_high": r.d_high,
                        "is_single": r.is_single,
                        "is_menu": r.is_menu,
                        "f_star": r.f_star,
                    })
                })
                .collect();
            pretty(&docs)?
        }
        Format::Csv => {
            let header = [
                args.param.as_str(),
                "q_t",
                "q_lo",
                "w_low",
                "d_low",
                "d_high",
                "is_single",
                "is_menu",
                "f_star",
            ];
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_sig12(r.x),
                        fmt_sig12(r.q_t),
                        fmt_sig12(r.q_lo),
                        fmt_sig12(r.w_low),
                        fmt_sig12(r.d_low),
                        fmt_sig12(r.d_high),
                        fmt_sig12(r.is_single),
                        fmt_sig12(r.is_menu),
                        opt_sig12(r.f_star),
                    ]
                })
                .collect();
            csv_table(&header, &body)?
        }
    };
    io.emit("sweep_cycle", &content)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn simulate(io: &Io, args: &SimulateArgs) -> Result<()> {
    let mut value = load_config_value(&args.config)?;
    for spec in &args.set {
        apply_set(&mut value, spec)?;
    }
    if let Some(seed) = args.seed {
        apply_set(&mut value, &format!("seed={seed}"))?;
    }
    let config: sim::SimConfig =
        serde_json::from_value(value.clone()).map_err(|e| anyhow!("invalid config: {e}"))?;
    let report = sim::simulate(&config)?;
    let checks = sim::prediction_checks(&report, report.low.liquidity_share);
    io.echo_config(&json!({"command": "simulate", "config": value}))?;
    // The report is JSON regardless of `--format`; the per-cycle trace, when
    // requested, is additionally mirrored as a CSV file.
    let doc = json!({
        "config": value,
        "report": report,
        "checks": checks,
    });
    io.emit_named("simulate_report.json", &pretty(&doc)?)?;
    if !report.cycle_trace.is_empty() {
        if let Some(dir) = &io.out_dir {
            let body: Vec<Vec<String>> = report
                .cycle_trace
                .iter()
                .map(|c| {
                    vec![
                        c.cycle_id.to_string(),
                        c.pool.to_string(),
                        fmt_sig12(c.duration),
                        fmt_sig12(c.volume),
                        c.trades.to_string(),
                    ]
                })
                .collect();
            let csv = csv_table(&["cycle_id", "pool", "duration", "volume", "trades"], &body)?;
            let path = dir.join("simulate_cycles.csv");
            fs::write(&path, csv).with_context(|| format!("writing `{}`", path.display()))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn load_book(events: &Path) -> Result<analytics::EventBook> {
    let file = fs::File::open(events)
        .with_context(|| format!("reading events `{}`", events.display()))?;
    let rows = analytics::read_events_csv(file)?;
    Ok(analytics::EventBook::new(rows)?)
}

fn day_span(book: &analytics::EventBook) -> Option<(i64, i64)> {
    let days: Vec<i64> = book.events().iter().map(|e| e.day()).collect();
    Some((*days.iter().min()?, *days.iter().max()?))
}

fn analyze_lvr(io: &Io, events: &Path) -> Result<()> {
    let book = load_book(events)?;
    let mut rows = Vec::new();
    if let Some((day_min, day_max)) = day_span(&book) {
        for pool_id in book.pool_ids() {
            for day in day_min..=day_max {
                let day_end = (day + 1) * 86_400 - 1;
                let tvl_end = book.tvl_at(&pool_id, day_end);
                for (name, benchmark) in [
                    ("instant", analytics::LvrBenchmark::Instant),
                    ("lagged_1h", analytics::LvrBenchmark::Lagged),
                ] {
                    let r = analytics::lvr_daily(&book, &pool_id, day, benchmark, tvl_end)?;
                    rows.push((name, r));
                }
            }
        }
    }
    let content = match io.format {
        Format::Json => {
            let docs: Vec<Value> = rows
                .iter()
                .map(|(name, r)| {
                    json!({
                        "pool_id": r.pool_id,
                        "day": r.day,
                        "benchmark": name,
                        "lvr_bps": r.lvr_bps,
                        "swaps_included": r.swaps_included,
                        "swaps_excluded": r.swaps_excluded,
                        "flagged": r.flagged,
                    })
                })
                .collect();
            pretty(&docs)?
        }
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|(name, r)| {
                    vec![
                        r.pool_id.clone(),
                        r.day.to_string(),
                        name.to_string(),
                        opt_sig12(r.lvr_bps),
                        r.swaps_included.to_string(),
                        r.swaps_excluded.to_string(),
                        r.flagged.to_string(),
                    ]
                })
                .collect();
            csv_table(
                &[
                    "pool_id",
                    "day",
                    "benchmark",
                    "lvr_bps",
                    "swaps_included",
                    "swaps_excluded",
                    "flagged",
                ],
                &body,
            )?
        }
    };
    io.emit("analyze_lvr", &content)
}

fn analyze_il(io: &Io, events: &Path) -> Result<()> {
    let book = load_book(events)?;
    let panel = analytics::build_panel(&book)?;
    let content = match io.format {
        Format::Json => {
            let docs: Vec<Value> = panel
                .iter()
                .map(|r| json!({"pool_id": r.pool_id, "day": r.day, "il_5pct": r.il_5pct}))
                .collect();
            pretty(&docs)?
        }
        Format::Csv => {
            let body: Vec<Vec<String>> = panel
                .iter()
                .map(|r| {
                    vec![
                        r.pool_id.clone(),
                        r.day.to_string(),
                        opt_sig12(r.il_5pct),
                    ]
                })
                .collect();
            csv_table(&["pool_id", "day", "il_5pct"], &body)?
        }
    };
    io.emit("analyze_il", &content)
}

fn analyze_jit(io: &Io, events: &Path) -> Result<()> {
    let book = load_book(events)?;
    let triples = analytics::jit_detect(book.events());
    let content = match io.format {
        Format::Json => pretty(&triples)?,
        Format::Csv => {
            let body: Vec<Vec<String>> = triples
                .iter()
                .map(|t| {
                    vec![
                        t.block.to_string(),
                        t.pool_id.clone(),
                        t.wallet.clone(),
                        t.mint_tx.clone(),
                        t.swap_tx.clone(),
                        t.burn_tx.clone(),
                    ]
                })
                .collect();
            csv_table(
                &["block", "pool_id", "wallet", "mint_tx", "swap_tx", "burn_tx"],
                &body,
            )?
        }
    };
    io.emit("analyze_jit", &content)
}

fn analyze_cycles(io: &Io, events: &Path) -> Result<()> {
    let book = load_book(events)?;
    let cycles = analytics::liquidity_cycles(&book);
    let content = match io.format {
        Format::Json => pretty(&cycles)?,
        Format::Csv => {
            let body: Vec<Vec<String>> = cycles
                .iter()
                .map(|c| {
                    vec![
                        c.wallet.clone(),
                        c.pool_id.clone(),
                        format!("{:?}", c.kind),
                        fmt_sig12(c.hours),
                        c.day.to_string(),
                        c.out_of_range.to_string(),
                    ]
                })
                .collect();
            csv_table(
                &["wallet", "pool_id", "kind", "hours", "day", "out_of_range"],
                &body,
            )?
        }
    };
    io.emit("analyze_cycles", &content)
}

fn analyze_panel(io: &Io, events: &Path) -> Result<()> {
    let book = load_book(events)?;
    let panel = analytics::build_panel(&book)?;
    let content = match io.format {
        Format::Json => pretty(&panel)?,
        Format::Csv => {
            let body: Vec<Vec<String>> = panel
                .iter()
                .map(|r| {
                    vec![
                        r.pool_id.clone(),
                        r.day.to_string(),
                        fmt_sig12(r.tvl_end),
                        fmt_sig12(r.volume),
                        r.trade_count.to_string(),
                        opt_sig12(r.median_trade),
                        opt_sig12(r.median_mint),
                        r.lp_wallets.to_string(),
                        fmt_sig12(r.liquidity_share),
                        fmt_sig12(r.volume_share),
                        opt_sig12(r.lvr_1h),
                        opt_sig12(r.lvr_instant),
                        opt_sig12(r.il_5pct),
                        opt_sig12(r.liq_yield),
                        opt_sig12(r.volatility),
                        r.corrupt.to_string(),
                    ]
                })
                .collect();
            csv_table(
                &[
                    "pool_id",
                    "day",
                    "tvl_end",
                    "volume",
                    "trade_count",
                    "median_trade",
                    "median_mint",
                    "lp_wallets",
                    "liquidity_share",
                    "volume_share",
                    "lvr_1h",
                    "lvr_instant",
                    "il_5pct",
                    "liq_yield",
                    "volatility",
                    "corrupt",
                ],
                &body,
            )?
        }
    };
    io.emit("analyze_panel", &content)
}

// ---------------------------------------------------------------------------
// route
// ---------------------------------------------------------------------------

fn route_sizes(io: &Io, args: &RouteArgs) -> Result<()> {
    let mut states = Vec::new();
    for path in &args.pools {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading pool snapshot `{}`", path.display()))?;
        let snap: pool::PoolSnapshot = serde_json::from_str(&text).with_context(|| {
            format!("invalid `pools`: `{}` is not a pool snapshot", path.display())
        })?;
        states.push(pool::PoolState::from_snapshot(&snap)?);
    }
    let [a, b]: [pool::PoolState; 2] = states
        .try_into()
        .map_err(|_| anyhow!("invalid `pools`: exactly two snapshots required"))?;
    let (low, high) = if a.fee_bps <= b.fee_bps { (a, b) } else { (b, a) };
    for &size in &args.sizes {
        if !size.is_finite() || size < 0.0 {
            bail!("invalid `sizes`: {size} is not a finite non-negative quantity");
        }
    }
    if !args.gas.is_finite() || args.gas < 0.0 {
        bail!("invalid `gas`: must be finite and non-negative");
    }
    let mut results = Vec::new();
    for &size in &args.sizes {
        results.push((size, router::route(size, &low, &high, args.gas)?));
    }
    let content = match io.format {
        Format::Json => {
            let docs: Vec<Value> = results
                .iter()
                .map(|(size, r)| {
                    json!({
                        "size": size,
                        "split_low": r.split_low,
                        "cost_total": r.cost_total,
                        "cost_low": r.cost_low,
                        "cost_high": r.cost_high,
                    })
                })
                .collect();
            pretty(&docs)?
        }
        Format::Csv => {
            let body: Vec<Vec<String>> = results
                .iter()
                .map(|(size, r)| {
                    vec![
                        fmt_sig12(*size),
                        fmt_sig12(r.split_low),
                        fmt_sig12(r.cost_total),
                    ]
                })
                .collect();
            csv_table(&["size", "split_low", "cost_total"], &body)?
        }
    };
    io.emit("route", &content)
}

// ---------------------------------------------------------------------------
// pool demo
// ---------------------------------------------------------------------------

fn pool_demo(io: &Io) -> Result<()> {
    let ex = pool::worked_example()?;
    let content = match io.format {
        Format::Json => pretty(&ex)?,
        Format::Csv => kv_csv(&[
            ("price_tick_73080", fmt_sig12(ex.tick_prices[0])),
            ("price_tick_73140", fmt_sig12(ex.tick_prices[1])),
            ("price_tick_73200", fmt_sig12(ex.tick_prices[2])),
            ("price_tick_73260", fmt_sig12(ex.tick_prices[3])),
            ("price_tick_73320", fmt_sig12(ex.tick_prices[4])),
            ("liquidity_a", fmt_sig12(ex.liquidity_a)),
            ("liquidity_b", fmt_sig12(ex.liquidity_b)),
            ("deposit_a_token", fmt_sig12(ex.deposit_a_token)),
            ("deposit_a_numeraire", fmt_sig12(ex.deposit_a_numeraire)),
            ("deposit_b_token", fmt_sig12(ex.deposit_b_token)),
            (
                "deposit_b_token_per_interval",
                fmt_sig12(ex.deposit_b_token_per_interval),
            ),
            ("first_interval_depth", fmt_sig12(ex.first_interval_depth)),
            ("trade1_token_qty", fmt_sig12(ex.trade1.amount_out)),
            ("trade1_numeraire_in", fmt_sig12(ex.trade1.amount_in)),
            ("trade1_fee", fmt_sig12(ex.trade1.fee_paid)),
            ("trade1_end_price", fmt_sig12(ex.trade1.end_price)),
            ("trade2_token_qty", fmt_sig12(ex.trade2.amount_out)),
            ("trade2_numeraire_in", fmt_sig12(ex.trade2.amount_in)),
            ("trade2_fee", fmt_sig12(ex.trade2.fee_paid)),
            ("trade2_end_price", fmt_sig12(ex.trade2.end_price)),
            ("trade2_fee_a", fmt_sig12(ex.trade2_fee_a)),
            ("trade2_fee_b", fmt_sig12(ex.trade2_fee_b)),
            (
                "fee_ratio_a_over_b",
                fmt_sig12(ex.trade2_fee_a / ex.trade2_fee_b),
            ),
            (
                "liquidity_ratio_a_over_b",
                fmt_sig12(ex.liquidity_a / ex.liquidity_b),
            ),
        ])?,
    };
    io.emit("pool_demo", &content)
}
