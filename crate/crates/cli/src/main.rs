use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gridcover::formulations::{build_milp_cov, build_milp_mov, build_milp_static, FormulationHandle, StaticDeployment};
use gridcover::grid::evaluate_plan;
use gridcover::harness::{self, ExperimentConfig, MobileMethod, MobileStage, StaticMethod, Sweep};
use gridcover::milp::write_lp_text;
use gridcover::{par, planners, GridSpec, SolveParams};

#[derive(Parser, Debug)]
#[command(name = "gridcover", version, about = "Static placement and mobile path planning for grid coverage")]
struct Cli {
    /// key=value file supplying defaults for any long flag; flags on the
    /// command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Sequential execution and no wall-clock fields, so outputs are
    /// byte-identical across runs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads for data-parallel work.
    #[arg(long, global = true, env = "GRIDCOVER_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Backend::Embedded)]
    backend: Backend,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Backend {
    /// Solve with the built-in branch-and-bound.
    Embedded,
    /// Write the model as LP text to --out instead of solving.
    ExportLp,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Formulation {
    Static,
    Cov,
    Mov,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Baseline {
    Greedy,
    Random,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Place static nodes and write the deployment.
    PlaceStatic(Params),
    /// Plan mobile paths maximizing coverage within K_max iterations.
    PlanCov(Params),
    /// Plan mobile paths reaching the coverage target with fewest movements.
    PlanMov(Params),
    /// Plan mobile paths with the greedy or random baseline.
    Baseline {
        #[command(flatten)]
        params: Params,
        #[arg(long, value_enum, default_value_t = Baseline::Greedy)]
        method: Baseline,
    },
    /// Write a formulation as LP text without solving it.
    ExportLp {
        #[command(flatten)]
        params: Params,
        #[arg(long, value_enum)]
        formulation: Formulation,
    },
    /// Run the full pipeline once per seed.
    Run {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        methods: Methods,
    },
    /// Run the pipeline over a cartesian product of settings.
    Sweep {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        methods: Methods,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        ns_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        l_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        kmax_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        static_method_values: Vec<String>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        method_values: Vec<String>,
    },
}

#[derive(Args, Debug, Clone)]
struct Params {
    #[arg(long, default_value_t = 10)]
    rows: usize,
    #[arg(long, default_value_t = 10)]
    cols: usize,
    /// Number of static nodes.
    #[arg(long, default_value_t = 5)]
    ns: usize,
    /// Number of mobile nodes.
    #[arg(long, default_value_t = 3)]
    l: usize,
    #[arg(long, default_value_t = 1)]
    rs: usize,
    #[arg(long, default_value_t = 2)]
    rho_x: usize,
    #[arg(long, default_value_t = 2)]
    rho_y: usize,
    #[arg(long, default_value_t = 1)]
    co_static: usize,
    #[arg(long, default_value_t = 3)]
    co_mobile: usize,
    /// Weight of boundary cells in static placement.
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    #[arg(long, default_value_t = 4)]
    kmax: usize,
    /// Target coverage ratio for movement minimization.
    #[arg(long, default_value_t = 1.0)]
    cr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver time limit in seconds.
    #[arg(long, default_value_t = 18000.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    #[arg(long)]
    node_limit: Option<u64>,
    /// Static deployment file (`s i j` lines) to plan around.
    #[arg(long, value_name = "FILE")]
    deployment: Option<PathBuf>,
    /// Output file (plan, deployment or LP text).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Methods {
    #[arg(long, default_value = "milp-static")]
    static_method: String,
    #[arg(long, default_value = "milp-cov")]
    method: String,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Directory for results.csv and per-row plans and deployments.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

/// Rejected input: exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Solver found nothing usable: exit code 1.
#[derive(Debug)]
struct NoSolution(String);

impl std::fmt::Display for NoSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NoSolution {}

impl Params {
    fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.rows, self.cols).map_err(|e| usage(e.to_string()))
    }

    fn experiment(&self, deterministic: bool) -> Result<ExperimentConfig> {
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(usage("--time-limit must be a positive number of seconds"));
        }
        Ok(ExperimentConfig {
            rows: self.rows,
            cols: self.cols,
            n_static: self.ns,
            n_mobile: self.l,
            r_s: self.rs,
            rho_x: self.rho_x,
            rho_y: self.rho_y,
            c_o_static: self.co_static,
            c_o_mobile: self.co_mobile,
            alpha: self.alpha,
            k_max: self.kmax,
            cr_target: self.cr,
            seeds: vec![self.seed],
            solver: SolveParams {
                time_limit: Duration::from_secs_f64(self.time_limit),
                mip_gap: self.gap,
                node_limit: self.node_limit,
                deterministic,
                ..SolveParams::default()
            },
            deterministic,
            ..ExperimentConfig::default()
        })
    }

    fn load_deployment(&self, grid: &GridSpec) -> Result<StaticDeployment> {
        let Some(path) = &self.deployment else {
            return Ok(StaticDeployment::none(*grid));
        };
        let positions = harness::read_deployment(path)?;
        StaticDeployment::from_positions(positions, self.rs, grid, self.alpha)
            .map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| usage("--out is required here"))
    }
}

/// Appends `--key value` for every config-file entry whose flag is absent
/// from the command line.
fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (n, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(n + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("{path}:{}: expected key=value", n + 1)))?;
        entries.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    let mut out = args.clone();
    for (k, v) in entries {
        let flag = format!("--{k}");
        if args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match v.as_str() {
            "true" => out.push(flag),
            "false" => {}
            _ => out.push(format!("{flag}={v}")),
        }
    }
    Ok(out)
}

fn write_lp(handle: &FormulationHandle, out: &Path) -> Result<()> {
    fs::write(out, write_lp_text(&handle.instance)).with_context(|| format!("writing {}", out.display()))?;
    let s = handle.instance.stats();
    println!(
        "wrote {} ({} binary, {} continuous, {} constraints)",
        out.display(),
        s.n_binary,
        s.n_continuous,
        s.n_constraints
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x}"))
}

fn place_static(p: &Params, backend: Backend, deterministic: bool) -> Result<()> {
    if p.ns == 0 {
        return Err(usage("--ns must be at least 1 for static placement"));
    }
    let grid = p.grid()?;
    if backend == Backend::ExportLp {
        let h = build_milp_static(&grid, p.ns, p.rs, p.co_static, p.alpha).map_err(|e| usage(e.to_string()))?;
        return write_lp(&h, p.require_out()?);
    }
    let cfg = p.experiment(deterministic)?;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let st = harness::static_stage(&cfg, &grid, p.seed);
    if let Some(e) = st.error {
        return Err(NoSolution(format!("static placement failed ({}): {e}", st.status)).into());
    }
    let d = &st.deployment;
    let cells: Vec<String> = d.positions.iter().map(|c| c.to_string()).collect();
    println!(
        "status {} objective {} covered {}/{} positions {}",
        st.status,
        fmt_opt(st.objective),
        d.covered.len(),
        grid.len(),
        cells.join(" ")
    );
    if let Some(out) = &p.out {
        harness::write_deployment(out, d)?;
    }
    Ok(())
}

fn report(p: &Params, grid: &GridSpec, st: &StaticDeployment, stage: &MobileStage) -> Result<()> {
    let params = gridcover::SensorParams { r_s: p.rs, rho_x: p.rho_x, rho_y: p.rho_y, c_o: p.co_mobile };
    let rep = evaluate_plan(st, &stage.plan, &params, grid)?;
    println!(
        "status {} objective {} bound {} coverage {:.2}% ({}/{}) movements {} trimmed {}",
        stage.status,
        fmt_opt(stage.objective),
        fmt_opt(stage.bound),
        rep.ratio.percent(),
        rep.ratio.covered,
        rep.ratio.total,
        stage.plan.movements(),
        planners::trimmed_movements(&stage.plan, st, &params, grid)
    );
    if let Some(out) = &p.out {
        harness::write_plan(out, &stage.plan)?;
    }
    Ok(())
}

fn plan_milp(p: &Params, method: MobileMethod, backend: Backend, deterministic: bool) -> Result<()> {
    let grid = p.grid()?;
    let st = p.load_deployment(&grid)?;
    if backend == Backend::ExportLp {
        let h = match method {
            MobileMethod::MilpCov => {
                build_milp_cov(&grid, &st.uncovered, p.l, p.kmax, p.rs, p.rho_x, p.rho_y, p.co_mobile)
            }
            _ => build_milp_mov(
                &grid,
                &st.uncovered,
                st.covered.len(),
                p.l,
                p.kmax,
                p.rs,
                p.rho_x,
                p.rho_y,
                p.co_mobile,
                p.cr,
            ),
        }
        .map_err(|e| usage(e.to_string()))?;
        return write_lp(&h, p.require_out()?);
    }
    let mut cfg = p.experiment(deterministic)?;
    cfg.mobile_method = method;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let stage = harness::milp_stage(&cfg, &grid, &st);
    if stage.status == "nothing-to-plan" {
        println!("nothing to plan: static nodes already meet the coverage target");
    }
    report(p, &grid, &st, &stage)?;
    if let Some(e) = stage.error {
        return Err(NoSolution(e).into());
    }
    Ok(())
}

fn baseline(p: &Params, method: Baseline, deterministic: bool) -> Result<()> {
    let grid = p.grid()?;
    let st = p.load_deployment(&grid)?;
    let mut cfg = p.experiment(deterministic)?;
    cfg.mobile_method = match method {
        Baseline::Greedy => MobileMethod::Greedy,
        Baseline::Random => MobileMethod::Random,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let stage = harness::baseline_stage(&cfg, &grid, &st, p.seed);
    report(p, &grid, &st, &stage)?;
    if let Some(e) = stage.error {
        return Err(usage(e));
    }
    Ok(())
}

fn export_lp(p: &Params, formulation: Formulation) -> Result<()> {
    match formulation {
        Formulation::Static => place_static(p, Backend::ExportLp, true),
        Formulation::Cov => plan_milp(p, MobileMethod::MilpCov, Backend::ExportLp, true),
        Formulation::Mov => plan_milp(p, MobileMethod::MilpMov, Backend::ExportLp, true),
    }
}

fn experiment(p: &Params, m: &Methods, deterministic: bool) -> Result<ExperimentConfig> {
    let mut cfg = p.experiment(deterministic)?;
    cfg.static_method = m.static_method.parse::<StaticMethod>().map_err(usage)?;
    cfg.mobile_method = m.method.parse::<MobileMethod>().map_err(usage)?;
    cfg.seeds = m.seeds.clone();
    Ok(cfg)
}

fn emit(rows: &[harness::ResultRow], out_dir: Option<&Path>) -> Result<()> {
    match out_dir {
        Some(dir) => {
            harness::write_outputs(dir, rows)?;
            println!("wrote {} rows to {}", rows.len(), dir.join("results.csv").display());
        }
        None => print!("{}", harness::results_csv(rows)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        par::set_threads(n);
    }
    if cli.deterministic {
        par::set_parallel(false);
    }
    let det = cli.deterministic;
    let embedded_only = |name: &str| -> Result<()> {
        if cli.backend == Backend::ExportLp {
            return Err(usage(format!("--backend export-lp does not apply to `{name}`")));
        }
        Ok(())
    };
    match &cli.command {
        Command::PlaceStatic(p) => place_static(p, cli.backend, det),
        Command::PlanCov(p) => plan_milp(p, MobileMethod::MilpCov, cli.backend, det),
        Command::PlanMov(p) => plan_milp(p, MobileMethod::MilpMov, cli.backend, det),
        Command::Baseline { params, method } => {
            embedded_only("baseline")?;
            baseline(params, *method, det)
        }
        Command::ExportLp { params, formulation } => export_lp(params, *formulation),
        Command::Run { params, methods } => {
            embedded_only("run")?;
            let cfg = experiment(params, methods, det)?;
            let rows = harness::run_pipeline(&cfg).map_err(|e| usage(e.to_string()))?;
            emit(&rows, methods.out_dir.as_deref())
        }
        Command::Sweep { params, methods, ns_values, l_values, kmax_values, static_method_values, method_values } => {
            embedded_only("sweep")?;
            let base = experiment(params, methods, det)?;
            let mut sweep = Sweep::new(base);
            if !ns_values.is_empty() {
                sweep.n_static = ns_values.clone();
            }
            if !l_values.is_empty() {
                sweep.n_mobile = l_values.clone();
            }
            if !kmax_values.is_empty() {
                sweep.k_max = kmax_values.clone();
            }
            if !static_method_values.is_empty() {
                sweep.static_methods =
                    static_method_values.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(usage)?;
            }
            if !method_values.is_empty() {
                sweep.mobile_methods = method_values.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(usage)?;
            }
            for cfg in sweep.configs() {
                cfg.validate().map_err(|e| usage(e.to_string()))?;
            }
            emit(&harness::sweep(&sweep), methods.out_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
