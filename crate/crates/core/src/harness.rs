//! Experiment pipelines: static placement, mobile planning, evaluation, and
//! the text formats results are persisted in.
//!
//! Every row is recomputed from the stored plan and deployment, never taken
//! from a solver objective. Files written in deterministic mode leave the
//! wall-time column blank so reruns are byte-identical.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bnb::{solve_milp_from, MilpStatus, SolveParams};
use crate::formulations::{
    build_milp_cov, build_milp_mov, build_milp_static, decode_plan, decode_static, encode_plan, greedy_mobile_start,
    greedy_static_start, FormulationHandle, MobilePlan, StaticDeployment,
};
use crate::grid::{evaluate_plan, Cell, GridSpec, SensorParams};
use crate::milp::Assignment;
use crate::planners::{self, BaselineConfig, InitialPlacement};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StaticMethod {
    Milp,
    /// Uniform over the grid without replacement.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MobileMethod {
    MilpCov,
    MilpMov,
    Greedy,
    Random,
}

impl StaticMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            StaticMethod::Milp => "milp-static",
            StaticMethod::Random => "random-static",
        }
    }
}

impl MobileMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MobileMethod::MilpCov => "milp-cov",
            MobileMethod::MilpMov => "milp-mov",
            MobileMethod::Greedy => "greedy",
            MobileMethod::Random => "random",
        }
    }

    pub fn is_milp(self) -> bool {
        matches!(self, MobileMethod::MilpCov | MobileMethod::MilpMov)
    }
}

impl fmt::Display for StaticMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for MobileMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StaticMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "milp-static" | "milp" => Ok(StaticMethod::Milp),
            "random-static" | "random" => Ok(StaticMethod::Random),
            _ => Err(format!("unknown static method `{s}` (expected milp-static or random-static)")),
        }
    }
}

impl FromStr for MobileMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "milp-cov" => Ok(MobileMethod::MilpCov),
            "milp-mov" => Ok(MobileMethod::MilpMov),
            "greedy" => Ok(MobileMethod::Greedy),
            "random" => Ok(MobileMethod::Random),
            _ => Err(format!("unknown mobile method `{s}` (expected milp-cov, milp-mov, greedy or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rows: usize,
    pub cols: usize,
    pub n_static: usize,
    pub n_mobile: usize,
    pub r_s: usize,
    pub rho_x: usize,
    pub rho_y: usize,
    pub c_o_static: usize,
    pub c_o_mobile: usize,
    pub alpha: f64,
    pub k_max: usize,
    pub cr_target: f64,
    pub static_method: StaticMethod,
    pub mobile_method: MobileMethod,
    pub seeds: Vec<u64>,
    pub solver: SolveParams,
    /// Blank wall times in written results.
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            n_static: 5,
            n_mobile: 3,
            r_s: 1,
            rho_x: 2,
            rho_y: 2,
            c_o_static: 1,
            c_o_mobile: 3,
            alpha: 4.0,
            k_max: 4,
            cr_target: 1.0,
            static_method: StaticMethod::Milp,
            mobile_method: MobileMethod::MilpCov,
            seeds: vec![0],
            solver: SolveParams::default(),
            deterministic: false,
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<GridSpec, HarnessError> {
        GridSpec::new(self.rows, self.cols).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn sensor_params(&self) -> SensorParams {
        SensorParams { r_s: self.r_s, rho_x: self.rho_x, rho_y: self.rho_y, c_o: self.c_o_mobile }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        let grid = self.grid()?;
        if self.n_static > grid.len() && self.static_method == StaticMethod::Random {
            return bad("more static nodes than cells for random placement");
        }
        if self.n_mobile == 0 {
            return bad("number of mobile nodes must be at least 1");
        }
        if self.k_max == 0 {
            return bad("K_max must be at least 1");
        }
        if self.c_o_static == 0 || self.c_o_mobile == 0 {
            return bad("overlap factors must be at least 1");
        }
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return bad("alpha must be at least 1");
        }
        if !(self.cr_target > 0.0 && self.cr_target <= 1.0) {
            return bad("coverage target must lie in (0, 1]");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        self.solver.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }
}

/// Outcome of one pipeline run for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Solver status of the static stage (`none` when `N_s = 0`, `random`
    /// for random placement).
    pub static_status: String,
    /// Solver status of the mobile stage; baselines report `heuristic`.
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub static_covered: usize,
    pub covered: usize,
    pub total: usize,
    pub coverage_pct: f64,
    pub movements: usize,
    pub movements_trimmed: usize,
    /// Placements needed to reach `cr_target`, if the plan ever does.
    pub movements_to_target: Option<usize>,
    /// Worst coverage-variable fractionality over the MILP stages.
    pub fractionality: Option<f64>,
    pub wall_time: Duration,
    pub deployment: StaticDeployment,
    pub plan: MobilePlan,
    pub error: Option<String>,
}

/// Column list of the results file.
pub const CSV_HEADER: &str = "rows,cols,n_static,n_mobile,r_s,rho_x,rho_y,c_o_static,c_o_mobile,alpha,k_max,cr_target,\
static_method,mobile_method,seed,static_status,status,objective,bound,gap,static_covered,covered,total,coverage_pct,\
movements,movements_trimmed,movements_to_target,fractionality,wall_time_s,error";

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |x| x.to_string())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let wall = if c.deterministic { String::new() } else { format!("{:.3}", self.wall_time.as_secs_f64()) };
        [
            c.rows.to_string(),
            c.cols.to_string(),
            c.n_static.to_string(),
            c.n_mobile.to_string(),
            c.r_s.to_string(),
            c.rho_x.to_string(),
            c.rho_y.to_string(),
            c.c_o_static.to_string(),
            c.c_o_mobile.to_string(),
            c.alpha.to_string(),
            c.k_max.to_string(),
            c.cr_target.to_string(),
            c.static_method.to_string(),
            c.mobile_method.to_string(),
            self.seed.to_string(),
            self.static_status.clone(),
            self.status.clone(),
            opt(&self.objective),
            opt(&self.bound),
            opt(&self.gap.map(|g| format!("{g:.6}"))),
            self.static_covered.to_string(),
            self.covered.to_string(),
            self.total.to_string(),
            format!("{:.4}", self.coverage_pct),
            self.movements.to_string(),
            self.movements_trimmed.to_string(),
            opt(&self.movements_to_target),
            opt(&self.fractionality.map(|f| format!("{f:.1e}"))),
            wall,
            quote(self.error.as_deref().unwrap_or("")),
        ]
        .join(",")
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Result of the static placement stage.
#[derive(Debug, Clone)]
pub struct StaticStage {
    pub deployment: StaticDeployment,
    pub status: String,
    pub objective: Option<f64>,
    pub error: Option<String>,
    /// Largest distance of a coverage variable from 0/1 in the solver's
    /// incumbent; `None` when no MILP was solved.
    pub fractionality: Option<f64>,
}

/// Result of the mobile planning stage.
#[derive(Debug, Clone)]
pub struct MobileStage {
    pub plan: MobilePlan,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub error: Option<String>,
    /// See [`StaticStage::fractionality`].
    pub fractionality: Option<f64>,
}

fn coverage_fractionality(h: &FormulationHandle, a: &Assignment) -> f64 {
    h.coverage_vars().map(|v| (a.value(v) - a.value(v).round()).abs()).fold(0.0, f64::max)
}

/// Uniform placement without replacement from a stream reserved for it.
pub fn random_static_positions(grid: &GridSpec, n: usize, seed: u64) -> Vec<Cell> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let cells: Vec<Cell> = grid.cells().collect();
    let mut chosen: Vec<Cell> = cells.choose_multiple(&mut rng, n.min(cells.len())).copied().collect();
    chosen.sort();
    chosen
}

pub fn static_stage(cfg: &ExperimentConfig, grid: &GridSpec, seed: u64) -> StaticStage {
    let fail = |status: &str, error: String| StaticStage {
        deployment: StaticDeployment::none(*grid),
        status: status.to_string(),
        objective: None,
        error: Some(error),
        fractionality: None,
    };
    if cfg.n_static == 0 {
        return StaticStage { deployment: StaticDeployment::none(*grid), status: "none".into(), objective: None, error: None, fractionality: None };
    }
    match cfg.static_method {
        StaticMethod::Random => {
            let positions = random_static_positions(grid, cfg.n_static, seed);
            match StaticDeployment::from_positions(positions, cfg.r_s, grid, cfg.alpha) {
                Ok(deployment) => StaticStage {
                    deployment,
                    status: "random".into(),
                    objective: None,
                    error: None,
                    fractionality: None,
                },
                Err(e) => fail("error", e.to_string()),
            }
        }
        StaticMethod::Milp => {
            let h = match build_milp_static(grid, cfg.n_static, cfg.r_s, cfg.c_o_static, cfg.alpha) {
                Ok(h) => h,
                Err(e) => return fail("error", e.to_string()),
            };
            let params = SolveParams { objective_step: h.objective_step(), ..cfg.solver.clone() };
            let start = greedy_static_start(&h);
            let r = match solve_milp_from(&h.instance, &params, start.as_ref()) {
                Ok(r) => r,
                Err(e) => return fail("error", e.to_string()),
            };
            let status = r.status.as_str().to_string();
            let fractionality = r.incumbent.as_ref().map(|a| coverage_fractionality(&h, a));
            match r.incumbent.as_ref().map(|a| decode_static(&h, a)) {
                Some(Ok(deployment)) => StaticStage { deployment, status, objective: r.objective, error: None, fractionality },
                Some(Err(e)) => fail("error", e.to_string()),
                None => fail(&status, "static placement has no solution".into()),
            }
        }
    }
}

/// Best of the confined greedy start and baseline greedy plans from a few
/// fixed starting placements, as an incumbent for the mobile solves.
fn mobile_warm_start(h: &FormulationHandle, cfg: &ExperimentConfig, st: &StaticDeployment) -> Option<Assignment> {
    let grid = *h.grid();
    let mut best: Option<(f64, Assignment)> = None;
    let mut consider = |a: Assignment| {
        if !h.instance.is_feasible(&a, 1e-9) {
            return;
        }
        let z = h.instance.objective_value(&a);
        let z = match h.instance.sense() {
            crate::milp::ObjectiveSense::Maximize => z,
            crate::milp::ObjectiveSense::Minimize => -z,
        };
        if best.as_ref().is_none_or(|(b, _)| z > *b) {
            best = Some((z, a));
        }
    };
    if let Some(a) = greedy_mobile_start(h) {
        consider(a);
    }
    if cfg.mobile_method == MobileMethod::MilpCov {
        for s in 0..WARM_START_TRIES {
            let bc = BaselineConfig::new(cfg.n_mobile, cfg.k_max, &cfg.sensor_params(), s);
            if let Ok(plan) = planners::greedy_plan(&grid, st, &bc) {
                if let Ok(a) = encode_plan(h, &plan) {
                    consider(a);
                }
            }
        }
    }
    best.map(|(_, a)| a)
}

/// Baseline greedy runs tried as incumbents for the coverage MILP.
const WARM_START_TRIES: u64 = 8;

pub fn milp_stage(cfg: &ExperimentConfig, grid: &GridSpec, st: &StaticDeployment) -> MobileStage {
    let empty = MobilePlan::new(cfg.n_mobile, cfg.k_max);
    let fail = |error: String| MobileStage {
        plan: empty.clone(),
        status: "error".into(),
        objective: None,
        bound: None,
        gap: None,
        error: Some(error),
        fractionality: None,
    };
    let built = match cfg.mobile_method {
        MobileMethod::MilpCov => build_milp_cov(
            grid,
            &st.uncovered,
            cfg.n_mobile,
            cfg.k_max,
            cfg.r_s,
            cfg.rho_x,
            cfg.rho_y,
            cfg.c_o_mobile,
        ),
        _ => build_milp_mov(
            grid,
            &st.uncovered,
            st.covered.len(),
            cfg.n_mobile,
            cfg.k_max,
            cfg.r_s,
            cfg.rho_x,
            cfg.rho_y,
            cfg.c_o_mobile,
            cfg.cr_target,
        ),
    };
    let h = match built {
        Ok(h) => h,
        Err(e) => return fail(e.to_string()),
    };
    if h.nothing_to_plan() {
        return MobileStage {
            plan: empty,
            status: "nothing-to-plan".into(),
            objective: Some(0.0),
            bound: Some(0.0),
            gap: Some(0.0),
            error: None,
            fractionality: None,
        };
    }
    let params = SolveParams { objective_step: h.objective_step(), ..cfg.solver.clone() };
    let start = mobile_warm_start(&h, cfg, st);
    let r = match solve_milp_from(&h.instance, &params, start.as_ref()) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let status = r.status.as_str().to_string();
    let finite = |x: f64| x.is_finite().then_some(x);
    let mut stage = MobileStage {
        plan: empty,
        status,
        objective: r.objective,
        bound: finite(r.best_bound),
        gap: finite(r.gap),
        error: None,
        fractionality: r.incumbent.as_ref().map(|a| coverage_fractionality(&h, a)),
    };
    match r.incumbent.as_ref().map(|a| decode_plan(&h, a)) {
        Some(Ok(plan)) => stage.plan = plan,
        Some(Err(e)) => stage.error = Some(e.to_string()),
        None if r.status == MilpStatus::Infeasible => {
            stage.error = Some("no feasible plan; increase K_max or L".into());
        }
        None => stage.error = Some("no plan found within the limits".into()),
    }
    stage
}

pub fn baseline_stage(cfg: &ExperimentConfig, grid: &GridSpec, st: &StaticDeployment, seed: u64) -> MobileStage {
    let bc = BaselineConfig::new(cfg.n_mobile, cfg.k_max, &cfg.sensor_params(), seed);
    debug_assert_eq!(bc.initial, InitialPlacement::UniformOverUncovered);
    let result = match cfg.mobile_method {
        MobileMethod::Greedy => planners::greedy_plan(grid, st, &bc),
        _ => planners::random_plan(grid, st, &bc),
    };
    match result {
        Ok(plan) => {
            MobileStage {
            plan,
            status: "heuristic".into(),
            objective: None,
            bound: None,
            gap: None,
            error: None,
            fractionality: None,
        }
        }
        Err(e) => MobileStage {
            plan: MobilePlan::new(cfg.n_mobile, cfg.k_max),
            status: "error".into(),
            objective: None,
            bound: None,
            gap: None,
            error: Some(e.to_string()),
            fractionality: None,
        },
    }
}

fn assemble(
    cfg: &ExperimentConfig,
    grid: &GridSpec,
    seed: u64,
    st: &StaticStage,
    mob: &MobileStage,
    wall_time: Duration,
) -> ResultRow {
    let params = cfg.sensor_params();
    let d = &st.deployment;
    let (covered, error) = match evaluate_plan(d, &mob.plan, &params, grid) {
        Ok(rep) => (rep.ratio.covered, st.error.clone().or_else(|| mob.error.clone())),
        Err(e) => (d.covered.len(), Some(e.to_string())),
    };
    ResultRow {
        config: cfg.clone(),
        seed,
        static_status: st.status.clone(),
        status: mob.status.clone(),
        objective: mob.objective,
        bound: mob.bound,
        gap: mob.gap,
        static_covered: d.covered.len(),
        covered,
        total: grid.len(),
        coverage_pct: 100.0 * covered as f64 / grid.len() as f64,
        movements: mob.plan.movements(),
        movements_trimmed: planners::trimmed_movements(&mob.plan, d, &params, grid),
        movements_to_target: planners::movements_to_reach(&mob.plan, d, &params, grid, cfg.cr_target),
        fractionality: match (st.fractionality, mob.fractionality) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        },
        wall_time,
        deployment: d.clone(),
        plan: mob.plan.clone(),
        error,
    }
}

/// Runs every stage once per seed. Stage failures are recorded in the rows;
/// only an invalid configuration is an error.
///
/// MILP stages do not depend on the seed, so with MILP static placement the
/// static stage runs once, and a MILP planner after it runs once as well.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    let mut shared: Option<(StaticStage, Option<MobileStage>, Duration)> = None;
    for &seed in &cfg.seeds {
        let started = Instant::now();
        let reuse_static = cfg.static_method == StaticMethod::Milp || cfg.n_static == 0;
        if reuse_static {
            if shared.is_none() {
                let st = static_stage(cfg, &grid, seed);
                let mob = cfg.mobile_method.is_milp().then(|| milp_stage(cfg, &grid, &st.deployment));
                shared = Some((st, mob, started.elapsed()));
            }
            let (st, mob, shared_time) = shared.as_ref().expect("computed above");
            let row = match mob {
                Some(mob) => assemble(cfg, &grid, seed, st, mob, *shared_time),
                None => {
                    let mob = baseline_stage(cfg, &grid, &st.deployment, seed);
                    assemble(cfg, &grid, seed, st, &mob, started.elapsed())
                }
            };
            rows.push(row);
            continue;
        }
        let st = static_stage(cfg, &grid, seed);
        let mob = if cfg.mobile_method.is_milp() {
            milp_stage(cfg, &grid, &st.deployment)
        } else {
            baseline_stage(cfg, &grid, &st.deployment, seed)
        };
        rows.push(assemble(cfg, &grid, seed, &st, &mob, started.elapsed()));
    }
    Ok(rows)
}

/// Cartesian sweep over a base configuration. Every axis starts as the base
/// value; an empty axis yields an empty sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub base: ExperimentConfig,
    pub n_static: Vec<usize>,
    pub n_mobile: Vec<usize>,
    pub k_max: Vec<usize>,
    pub static_methods: Vec<StaticMethod>,
    pub mobile_methods: Vec<MobileMethod>,
}

impl Sweep {
    pub fn new(base: ExperimentConfig) -> Self {
        Self {
            n_static: vec![base.n_static],
            n_mobile: vec![base.n_mobile],
            k_max: vec![base.k_max],
            static_methods: vec![base.static_method],
            mobile_methods: vec![base.mobile_method],
            base,
        }
    }

    /// Configurations in a fixed order: `N_s`, then `L`, `K_max`, static
    /// method, mobile method.
    pub fn configs(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &ns in &self.n_static {
            for &l in &self.n_mobile {
                for &k in &self.k_max {
                    for &sm in &self.static_methods {
                        for &mm in &self.mobile_methods {
                            out.push(ExperimentConfig {
                                n_static: ns,
                                n_mobile: l,
                                k_max: k,
                                static_method: sm,
                                mobile_method: mm,
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Runs every configuration of the sweep, possibly in parallel; rows come
/// back in configuration order. A configuration that fails validation
/// contributes one error row per seed.
pub fn sweep(spec: &Sweep) -> Vec<ResultRow> {
    let configs = spec.configs();
    let batches = crate::par::map(&configs, |cfg| match run_pipeline(cfg) {
        Ok(rows) => rows,
        Err(e) => error_rows(cfg, &e.to_string()),
    });
    batches.into_iter().flatten().collect()
}

fn error_rows(cfg: &ExperimentConfig, msg: &str) -> Vec<ResultRow> {
    let grid = cfg.grid().unwrap_or_else(|_| GridSpec::new(1, 1).expect("1x1 grid"));
    cfg.seeds
        .iter()
        .map(|&seed| ResultRow {
            config: cfg.clone(),
            seed,
            static_status: "error".into(),
            status: "error".into(),
            objective: None,
            bound: None,
            gap: None,
            static_covered: 0,
            covered: 0,
            total: grid.len(),
            coverage_pct: 0.0,
            movements: 0,
            movements_trimmed: 0,
            movements_to_target: None,
            fractionality: None,
            wall_time: Duration::ZERO,
            deployment: StaticDeployment::none(grid),
            plan: MobilePlan::new(cfg.n_mobile, cfg.k_max),
            error: Some(msg.to_string()),
        })
        .collect()
}

/// Mean coverage percentage of rows matching `pred`.
pub fn mean_coverage<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) -> Option<f64> {
    let (sum, n) = rows.into_iter().fold((0.0, 0usize), |(s, n), r| (s + r.coverage_pct, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `l k i j` per placement, 1-based, iteration-major.
pub fn format_plan(plan: &MobilePlan) -> String {
    let mut out = format!("# nodes {} horizon {}\n", plan.num_nodes(), plan.horizon());
    for (l, k, c) in plan.placements() {
        let _ = writeln!(out, "{} {} {} {}", l + 1, k + 1, c.i, c.j);
    }
    out
}

/// `s i j` per static node, 1-based.
pub fn format_deployment(d: &StaticDeployment) -> String {
    let mut out = format!("# static {}\n", d.positions.len());
    for (s, c) in d.positions.iter().enumerate() {
        let _ = writeln!(out, "{} {} {}", s + 1, c.i, c.j);
    }
    out
}

fn numbers(path: &str, text: &str, width: usize) -> Result<Vec<(usize, Vec<usize>)>, HarnessError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| HarnessError::Parse { path: path.to_string(), line: n + 1, msg };
        let fields: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| err(format!("`{t}` is not a non-negative integer"))))
            .collect::<Result<_, _>>()?;
        if fields.len() != width {
            return Err(err(format!("expected {width} fields, found {}", fields.len())));
        }
        out.push((n + 1, fields));
    }
    Ok(out)
}

fn header_value(text: &str, key: &str) -> Option<usize> {
    let line = text.lines().find(|l| l.trim_start().starts_with('#'))?;
    let mut it = line.trim_start_matches('#').split_whitespace();
    while let Some(t) = it.next() {
        if t == key {
            return it.next()?.parse().ok();
        }
    }
    None
}

/// Parses [`format_plan`] output. Sizes come from the header when present,
/// otherwise from the largest indices seen.
pub fn parse_plan(path: &str, text: &str) -> Result<MobilePlan, HarnessError> {
    let entries = numbers(path, text, 4)?;
    let err = |line: usize, msg: &str| HarnessError::Parse { path: path.to_string(), line, msg: msg.to_string() };
    for (line, f) in &entries {
        if f[0] == 0 || f[1] == 0 || f[2] == 0 || f[3] == 0 {
            return Err(err(*line, "indices are 1-based"));
        }
    }
    let nodes = header_value(text, "nodes").unwrap_or_else(|| entries.iter().map(|(_, f)| f[0]).max().unwrap_or(0));
    let horizon = header_value(text, "horizon").unwrap_or_else(|| entries.iter().map(|(_, f)| f[1]).max().unwrap_or(0));
    let mut plan = MobilePlan::new(nodes, horizon);
    for (line, f) in entries {
        if f[0] > nodes || f[1] > horizon {
            return Err(err(line, "node or iteration beyond the header sizes"));
        }
        if plan.get(f[0] - 1, f[1] - 1).is_some() {
            return Err(err(line, "duplicate (node, iteration) entry"));
        }
        plan.set(f[0] - 1, f[1] - 1, Some(Cell::new(f[2], f[3])));
    }
    Ok(plan)
}

/// Static positions from [`format_deployment`] output, in node order.
pub fn parse_deployment(path: &str, text: &str) -> Result<Vec<Cell>, HarnessError> {
    let mut entries = numbers(path, text, 3)?;
    entries.sort_by_key(|(_, f)| f[0]);
    for (k, (line, f)) in entries.iter().enumerate() {
        if f[0] != k + 1 {
            return Err(HarnessError::Parse {
                path: path.to_string(),
                line: *line,
                msg: "node numbers must run 1..N_s without gaps".into(),
            });
        }
    }
    Ok(entries.into_iter().map(|(_, f)| Cell::new(f[1], f[2])).collect())
}

pub fn write_plan(path: &Path, plan: &MobilePlan) -> Result<(), HarnessError> {
    Ok(fs::write(path, format_plan(plan))?)
}

pub fn read_plan(path: &Path) -> Result<MobilePlan, HarnessError> {
    parse_plan(&path.display().to_string(), &fs::read_to_string(path)?)
}

pub fn write_deployment(path: &Path, d: &StaticDeployment) -> Result<(), HarnessError> {
    Ok(fs::write(path, format_deployment(d))?)
}

pub fn read_deployment(path: &Path) -> Result<Vec<Cell>, HarnessError> {
    parse_deployment(&path.display().to_string(), &fs::read_to_string(path)?)
}

/// Writes `results.csv` plus `row-NNNN.plan` / `row-NNNN.deployment` for
/// every row into `dir`.
pub fn write_outputs(dir: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(rows))?;
    for (n, r) in rows.iter().enumerate() {
        write_plan(&dir.join(format!("row-{n:04}.plan")), &r.plan)?;
        write_deployment(&dir.join(format!("row-{n:04}.deployment")), &r.deployment)?;
    }
    Ok(())
}
