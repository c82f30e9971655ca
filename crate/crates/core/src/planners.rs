//! Greedy and random-walk baselines, and movement accounting shared with the
//! MILP plans.
//!
//! Randomness comes from ChaCha8 seeded with `seed`: stream 0 draws initial
//! positions, stream `l + 1` drives node `l`'s walk, so adding nodes or
//! iterations never perturbs the draws of existing ones.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formulations::{MobilePlan, StaticDeployment};
use crate::grid::{self, Cell, CellSet, GridSpec, SensorParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("{0} initial positions given for {1} nodes")]
    InitialCount(usize, usize),
    #[error("initial position {0} lies outside the grid")]
    InitialOutOfGrid(Cell),
    #[error("K_max must be at least 1")]
    ZeroHorizon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialPlacement {
    /// Uniform over `C_1` (over `C` when `C_1` is empty), with replacement.
    UniformOverUncovered,
    Given(Vec<Cell>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub nodes: usize,
    pub k_max: usize,
    pub r_s: usize,
    pub rho_x: usize,
    pub rho_y: usize,
    pub seed: u64,
    pub initial: InitialPlacement,
}

impl BaselineConfig {
    pub fn new(nodes: usize, k_max: usize, params: &SensorParams, seed: u64) -> Self {
        Self {
            nodes,
            k_max,
            r_s: params.r_s,
            rho_x: params.rho_x,
            rho_y: params.rho_y,
            seed,
            initial: InitialPlacement::UniformOverUncovered,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn initial_positions(grid: &GridSpec, st: &StaticDeployment, cfg: &BaselineConfig) -> Result<Vec<Cell>, PlannerError> {
    if cfg.k_max == 0 {
        return Err(PlannerError::ZeroHorizon);
    }
    match &cfg.initial {
        InitialPlacement::Given(cells) => {
            if cells.len() != cfg.nodes {
                return Err(PlannerError::InitialCount(cells.len(), cfg.nodes));
            }
            if let Some(c) = cells.iter().find(|c| !grid.contains(**c)) {
                return Err(PlannerError::InitialOutOfGrid(*c));
            }
            Ok(cells.clone())
        }
        InitialPlacement::UniformOverUncovered => {
            let pool: Vec<Cell> = if st.uncovered.is_empty() { grid.cells().collect() } else { st.uncovered.to_vec() };
            let mut rng = cfg.rng(0);
            Ok((0..cfg.nodes).map(|_| *pool.choose(&mut rng).expect("grid is nonempty")).collect())
        }
    }
}

fn mark(covered: &mut CellSet, grid: &GridSpec, center: Cell, r_s: usize) -> usize {
    grid.window_unchecked(center, r_s, r_s).filter(|c| covered.insert(*c)).count()
}

/// Cells of `center`'s footprint not yet in `covered`.
pub fn gain(covered: &CellSet, grid: &GridSpec, center: Cell, r_s: usize) -> usize {
    grid.window_unchecked(center, r_s, r_s).filter(|c| !covered.contains(*c)).count()
}

/// Each iteration, nodes in ascending order move to the reachable cell with
/// the largest number of newly covered cells (ties to the smallest cell).
/// Nodes roam the whole grid.
pub fn greedy_plan(grid: &GridSpec, st: &StaticDeployment, cfg: &BaselineConfig) -> Result<MobilePlan, PlannerError> {
    let start = initial_positions(grid, st, cfg)?;
    let mut plan = MobilePlan::new(cfg.nodes, cfg.k_max);
    let mut covered = st.covered.clone();
    for (l, &c) in start.iter().enumerate() {
        plan.set(l, 0, Some(c));
        mark(&mut covered, grid, c, cfg.r_s);
    }
    for k in 1..cfg.k_max {
        for l in 0..cfg.nodes {
            let prev = plan.get(l, k - 1).expect("baseline nodes never stop");
            let window: Vec<Cell> = grid.window_unchecked(prev, cfg.rho_x, cfg.rho_y).collect();
            let gains = crate::par::map(&window, |c| gain(&covered, grid, *c, cfg.r_s));
            // window is row-major, so the first maximum is the smallest cell
            let best = (0..window.len()).fold(0, |b, x| if gains[x] > gains[b] { x } else { b });
            let next = window[best];
            mark(&mut covered, grid, next, cfg.r_s);
            plan.set(l, k, Some(next));
        }
    }
    Ok(plan)
}

/// Each node steps to a cell drawn uniformly from its reachable window.
pub fn random_plan(grid: &GridSpec, st: &StaticDeployment, cfg: &BaselineConfig) -> Result<MobilePlan, PlannerError> {
    let start = initial_positions(grid, st, cfg)?;
    let mut plan = MobilePlan::new(cfg.nodes, cfg.k_max);
    for (l, &c) in start.iter().enumerate() {
        let mut rng = cfg.rng(l as u64 + 1);
        let mut here = c;
        plan.set(l, 0, Some(here));
        for k in 1..cfg.k_max {
            let window: Vec<Cell> = grid.window_unchecked(here, cfg.rho_x, cfg.rho_y).collect();
            here = window[rng.gen_range(0..window.len())];
            plan.set(l, k, Some(here));
        }
    }
    Ok(plan)
}

/// Number of placements, scanned iteration by iteration, after which the
/// covered fraction first reaches `cr_target`; `Some(0)` when the static
/// nodes already suffice.
pub fn movements_to_reach(
    plan: &MobilePlan,
    st: &StaticDeployment,
    params: &SensorParams,
    grid: &GridSpec,
    cr_target: f64,
) -> Option<usize> {
    let need = grid::required_cells(cr_target, grid.len());
    let mut covered = st.covered.clone();
    if covered.len() >= need {
        return Some(0);
    }
    for (count, (_, _, c)) in plan.placements().enumerate() {
        if !grid.contains(c) {
            continue;
        }
        mark(&mut covered, grid, c, params.r_s);
        if covered.len() >= need {
            return Some(count + 1);
        }
    }
    None
}

/// Placements until the plan's own final coverage is reached; trailing
/// placements that add nothing are not counted.
pub fn trimmed_movements(plan: &MobilePlan, st: &StaticDeployment, params: &SensorParams, grid: &GridSpec) -> usize {
    let mut covered = st.covered.clone();
    let mut last_gain = 0;
    for (count, (_, _, c)) in plan.placements().enumerate() {
        if grid.contains(c) && mark(&mut covered, grid, c, params.r_s) > 0 {
            last_gain = count + 1;
        }
    }
    last_gain
}
