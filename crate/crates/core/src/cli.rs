//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for invalid parameters or usage, 2 for file
//! and format errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::bounds::{theorem1_bounds, theorem2_bounds, theorem3_bounds, TheoremBounds};
use crate::certificate::{certify, ConditionSubset};
use crate::ensemble::{read_instance, write_instance, ProblemInstance};
use crate::error::{Error, Result};
use crate::experiment::{
    emit_plot, preset_config, run_fig1, run_fig2, run_fig3, trend_statistic, write_results, ExperimentConfig, Figure,
    Mode, Preset, ProbEstimate, Threshold,
};
use crate::lasso::{solve_homotopy, solve_proximal};
use crate::wishart::{run_default_grid, write_validation_csv};

#[derive(Debug, Parser)]
#[command(name = "sparselab", version, about = "Lasso support recovery laboratory", disable_help_subcommand = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random problem instance (Gaussian matrix, ±T sparse signal, sphere noise)
    Gen(GenArgs),
    /// Solve the Lasso on an instance
    Solve(SolveArgs),
    /// Evaluate the recovery conditions on an instance
    Certify(CertifyArgs),
    /// Print sparsity thresholds, regularization levels and probability bounds
    Bounds(BoundsArgs),
    /// Run a Monte Carlo recovery sweep
    Experiment(ExperimentArgs),
    /// Run the Monte Carlo validators of the random-matrix lemmas
    #[command(name = "validate-lemmas")]
    ValidateLemmas(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of measurements
    #[arg(long)]
    pub n: usize,
    /// Signal dimension
    #[arg(long)]
    pub p: usize,
    /// Sparsity
    #[arg(long)]
    pub k: usize,
    /// Magnitude of the nonzero entries
    #[arg(long = "T", default_value_t = 1.0)]
    pub t: f64,
    /// Noise norm
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output instance file
    #[arg(long, default_value = "instance.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Homotopy,
    Proximal,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file written by `gen`
    pub instance: PathBuf,
    /// Regularization level
    #[arg(long)]
    pub gamma: f64,
    /// Solver
    #[arg(long, value_enum, default_value_t = Method::Homotopy)]
    pub method: Method,
    /// Optimality tolerance of the proximal solver
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Iteration cap of the proximal solver
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Write the nonzero entries as CSV (1-based index, value)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubsetArg {
    Both,
    C1Only,
    C2Only,
}

impl From<SubsetArg> for ConditionSubset {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::Both => ConditionSubset::Both,
            SubsetArg::C1Only => ConditionSubset::C1Only,
            SubsetArg::C2Only => ConditionSubset::C2Only,
        }
    }
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Instance file written by `gen`
    pub instance: PathBuf,
    /// Regularization level
    #[arg(long)]
    pub gamma: f64,
    /// Conditions to evaluate; an empty support always gets c2-only
    #[arg(long, value_enum, default_value_t = SubsetArg::Both)]
    pub subset: SubsetArg,
    /// Write the JSON report to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Number of measurements
    #[arg(long)]
    pub n: usize,
    /// Signal dimension
    #[arg(long)]
    pub p: usize,
    /// Sparsity constant in [0, 1)
    #[arg(long)]
    pub alpha: f64,
    /// Sparsity constant in [0, 1)
    #[arg(long)]
    pub beta: f64,
    /// Noise norm
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Sparsity for the l2 consistency bound (default: the floored sparsity limit)
    #[arg(long)]
    pub k: Option<usize>,
    /// Write the JSON output to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FigureArg {
    /// Exact recovery against k
    Fig1,
    /// Sign condition against gamma/gamma_0 without noise
    Fig2,
    /// Support inclusion against T/gamma_0
    Fig3,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    /// 1000 x 4000, 200 trials
    Desk,
    /// 8000 x 32000, 1000 trials (long running)
    Paper,
    /// 3000 x 36000, 1000 trials (long running)
    PaperWide,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Certificate,
    Solver,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Sweep to run
    #[arg(value_enum)]
    pub figure: FigureArg,
    /// Preset supplying the defaults
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    pub preset: PresetArg,
    /// JSON file with ExperimentConfig fields; overrides the preset
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of measurements
    #[arg(long)]
    pub n: Option<usize>,
    /// Signal dimension
    #[arg(long)]
    pub p: Option<usize>,
    /// Sparsity constant
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sparsity constant
    #[arg(long)]
    pub beta: Option<f64>,
    /// Noise norm
    #[arg(long)]
    pub eps: Option<f64>,
    /// Fixed sparsity outside the k sweep
    #[arg(long)]
    pub k: Option<usize>,
    /// gamma/gamma_0 outside the gamma sweep
    #[arg(long)]
    pub gamma: Option<f64>,
    /// T/gamma_0 outside the T sweep
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Trials per grid point
    #[arg(long)]
    pub trials: Option<u64>,
    /// Comma-separated sweep grid
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Certificate or solver mode
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0: all cores); results do not depend on it
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output directory
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0: all cores); results do not depend on it
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Write one CSV row per sub-check to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(()) => 0,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a, out),
        Command::Solve(a) => solve(a, out),
        Command::Certify(a) => certify_cmd(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::Experiment(a) => experiment(a, out),
        Command::ValidateLemmas(a) => validate(a, out),
    }
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker threads: {e}")))?;
    pool.install(f)
}

fn print_json(out: &mut dyn Write, v: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn save_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").map_err(Error::at(path))?;
    Ok(())
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<()> {
    let inst = ProblemInstance::generate(a.n, a.p, a.k, a.t, a.eps, a.seed)?;
    write_instance(&inst, &a.out)?;
    writeln!(
        out,
        "wrote {} (n = {}, p = {}, k = {}, T = {}, eps = {}, seed = {})",
        a.out.display(),
        a.n,
        a.p,
        a.k,
        a.t,
        a.eps,
        a.seed
    )?;
    Ok(())
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|i| i + 1).collect()
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Result<()> {
    let inst = read_instance(&a.instance)?;
    let sol = match a.method {
        Method::Homotopy => solve_homotopy(&inst.a, &inst.y, a.gamma)?,
        Method::Proximal => solve_proximal(&inst.a, &inst.y, a.gamma, a.tol, a.max_iter)?,
    };
    let report = json!({
        "method": format!("{:?}", a.method).to_lowercase(),
        "gamma": sol.gamma,
        "support": one_based(&sol.support),
        "values": sol.support.iter().map(|&i| sol.x[i]).collect::<Vec<_>>(),
        "objective": sol.objective(&inst.a, &inst.y),
        "kkt_violation": sol.kkt_violation,
        "unique": sol.unique,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "l2_error": (&sol.x - inst.x0.dense()).norm(),
    });
    print_json(out, &report)?;
    if let Some(path) = a.out {
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["index", "value"])?;
        for &i in &sol.support {
            w.write_record([(i + 1).to_string(), sol.x[i].to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn certify_cmd(a: CertifyArgs, out: &mut dyn Write) -> Result<()> {
    let inst = read_instance(&a.instance)?;
    let subset = if inst.x0.k() == 0 { ConditionSubset::C2Only } else { a.subset.into() };
    let with_erc = inst.x0.k() < inst.p();
    let r = certify(&inst.a, &inst.x0, &inst.w, a.gamma, subset, with_erc)?;
    let report = json!({
        "gamma": a.gamma,
        "k": inst.x0.k(),
        "subset": subset,
        "fuchs": r.fuchs_value,
        "erc": r.erc_value,
        "c1": r.c1.as_ref().map(|c| json!({ "holds": c.holds, "margin": finite_or_null(c.margin) })),
        "c2": r.c2.as_ref().map(|c| json!({
            "holds": c.holds,
            "max_correlation": c.max_correlation,
            "worst_index": c.worst_index.map(|j| j + 1),
            "margin": c.margin,
            "u_norm": c.u_norm,
        })),
        "exact": r.exact,
    });
    print_json(out, &report)?;
    if let Some(path) = a.out {
        save_json(&path, &report)?;
    }
    Ok(())
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn bounds_rows(b: &TheoremBounds) -> Vec<(&'static str, String)> {
    let mut rows = vec![("k_max", format!("{:.4}", b.k_max)), ("k_max (floor)", b.k_max_int.to_string())];
    if let Some(k) = b.k {
        rows.push(("k", k.to_string()));
    }
    rows.push(("gamma", format!("{:.6}", b.gamma)));
    rows.push(("T_min", format!("{:.6}", b.t_min)));
    if let Some(d) = b.delta {
        rows.push(("Delta", format!("{d:.6}")));
    }
    if let Some(t) = b.tail_inf_max {
        rows.push(("tail sup-norm max", format!("{t:.6}")));
    }
    if let Some(l) = b.l2_bound {
        rows.push(("l2 error bound", format!("{l:.6}")));
    }
    rows.push(("probability lower bound", format!("{:.6}", b.prob_lb)));
    if let Some(l) = b.prob_lb_leading {
        rows.push(("leading terms", format!("{l:.6}")));
    }
    rows
}

fn bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let t1 = theorem1_bounds(a.n, a.p, a.alpha, a.beta, a.eps)?;
    let t2 = theorem2_bounds(a.n, a.p, a.alpha, a.beta, a.eps)?;
    let t3 = theorem3_bounds(a.n, a.p, a.alpha, a.beta, a.eps, a.k.unwrap_or(t1.k_max_int))?;
    writeln!(out, "n = {}, p = {}, alpha = {}, beta = {}, eps = {}", a.n, a.p, a.alpha, a.beta, a.eps)?;
    for (title, b) in [("exact sign recovery", &t1), ("compressible signals", &t2), ("l2 consistency", &t3)] {
        writeln!(out, "\n{title}")?;
        for (name, value) in bounds_rows(b) {
            writeln!(out, "  {name:<26}{value:>14}")?;
        }
        for w in &b.warnings {
            writeln!(out, "  warning: {w}")?;
        }
    }
    let v = json!({ "exact": t1, "compressible": t2, "consistency": t3 });
    writeln!(out)?;
    print_json(out, &v)?;
    if let Some(path) = a.out {
        save_json(&path, &v)?;
    }
    Ok(())
}

fn merge_object(base: &mut Value, over: Value) -> Result<()> {
    let Value::Object(over) = over else {
        return Err(Error::Parse("experiment config must be a JSON object".into()));
    };
    let base = base.as_object_mut().expect("config serializes to an object");
    for (k, v) in over {
        base.insert(k, v);
    }
    Ok(())
}

/// Preset, then config file, then flags.
fn effective_config(a: &ExperimentArgs, figure: Figure) -> Result<ExperimentConfig> {
    let preset = match a.preset {
        PresetArg::Desk => Preset::Desk,
        PresetArg::Paper => Preset::Paper,
        PresetArg::PaperWide => Preset::PaperWide,
    };
    let mut value = serde_json::to_value(preset_config(preset, figure, 0)?)?;
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(Error::at(path))?;
        merge_object(&mut value, serde_json::from_str(&text)?)?;
    }
    let mut flags = Map::new();
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            flags.insert(key.to_string(), v);
        }
    };
    set("n", a.n.map(Value::from));
    set("p", a.p.map(Value::from));
    set("alpha", a.alpha.map(Value::from));
    set("beta", a.beta.map(Value::from));
    set("eps", a.eps.map(Value::from));
    set("k", a.k.map(Value::from));
    set("gamma_ratio", a.gamma.map(Value::from));
    set("T_ratio", a.t.map(Value::from));
    set("trials", a.trials.map(Value::from));
    set("master_seed", a.seed.map(Value::from));
    set(
        "mode",
        a.mode.map(|m| {
            serde_json::to_value(match m {
                ModeArg::Certificate => Mode::Certificate,
                ModeArg::Solver => Mode::Solver,
            })
            .expect("mode serializes")
        }),
    );
    merge_object(&mut value, Value::Object(flags))?;
    if let Some(grid) = &a.grid {
        value["sweep"]["grid"] = json!(grid);
    }
    serde_json::from_value(value).map_err(|e| Error::domain(format!("invalid experiment configuration: {e}")))
}

fn experiment(a: ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let (figure, name) = match a.figure {
        FigureArg::Fig1 => (Figure::Sparsity, "fig1"),
        FigureArg::Fig2 => (Figure::Regularization, "fig2"),
        FigureArg::Fig3 => (Figure::Magnitude, "fig3"),
    };
    let config = effective_config(&a, figure)?;
    config.validate()?;
    writeln!(out, "# config: {}", serde_json::to_string(&config)?)?;
    let (estimates, thresholds) = with_threads(a.threads, || -> Result<(Vec<ProbEstimate>, Vec<Threshold>)> {
        Ok(match figure {
            Figure::Sparsity => {
                let r = run_fig1(&config)?;
                (r.estimates, r.thresholds)
            }
            Figure::Regularization => (run_fig2(&config)?, Vec::new()),
            Figure::Magnitude => (run_fig3(&config)?, Vec::new()),
        })
    })?;
    let what = match figure {
        Figure::Sparsity => "exact recovery vs k",
        Figure::Regularization => "sign condition vs gamma/gamma_0",
        Figure::Magnitude => "support inclusion vs T/gamma_0",
    };
    let title = format!("{what} (n = {}, p = {})", config.n, config.p);
    fs::create_dir_all(&a.out).map_err(Error::at(&a.out))?;
    let csv_path = a.out.join(format!("{name}.csv"));
    let svg_path = a.out.join(format!("{name}.svg"));
    let cfg_path = a.out.join(format!("{name}.config.json"));
    write_results(&estimates, &csv_path)?;
    emit_plot(&estimates, &thresholds, &title, &svg_path)?;
    save_json(&cfg_path, &serde_json::to_value(&config)?)?;

    writeln!(
        out,
        "{:>12} {:>8} {:>10} {:>8} {:>8} {:>8} {:>9}",
        estimates[0].sweep_var.name(),
        "trials",
        "successes",
        "p_hat",
        "ci_low",
        "ci_high",
        "anomalies"
    )?;
    for e in &estimates {
        writeln!(
            out,
            "{:>12} {:>8} {:>10} {:>8.4} {:>8.4} {:>8.4} {:>9}",
            e.value, e.trials, e.successes, e.p_hat, e.ci_low, e.ci_high, e.anomalies
        )?;
    }
    for t in &thresholds {
        writeln!(out, "threshold {} at k = {:.4}", t.label, t.value)?;
    }
    if estimates.len() >= 2 {
        match trend_statistic(&estimates) {
            Ok(z) => writeln!(out, "trend z = {z:.4}")?,
            Err(_) => writeln!(out, "trend z undefined (constant outcome)")?,
        }
    }
    writeln!(out, "wrote {}, {}, {}", csv_path.display(), svg_path.display(), cfg_path.display())?;
    Ok(())
}

fn validate(a: ValidateArgs, out: &mut dyn Write) -> Result<()> {
    let results = with_threads(a.threads, || run_default_grid(a.seed))?;
    writeln!(out, "{:<9} {:<34} {:<44} {:>12}    {:<12} verdict", "lemma", "params", "check", "statistic", "bound")?;
    for r in &results {
        write!(out, "{r}")?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} of {} parameter points passed", results.len() - failed, results.len())?;
    if let Some(path) = a.out {
        write_validation_csv(&results, &path)?;
    }
    Ok(())
}
