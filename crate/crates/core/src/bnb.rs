//! Branch-and-bound over simplex relaxations.
//!
//! Branching fixes the most fractional binary to 0 and 1 (ties to the lowest
//! variable index). Each node re-solves its relaxation from the previous
//! basis. No cuts, no presolve.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::milp::{Assignment, MilpInstance, ObjectiveSense, VarKind};
use crate::simplex::{LpSolver, LpStatus};

/// Tolerance for accepting a snapped incumbent by substitution.
const INCUMBENT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("numerical failure in the LP relaxation after {nodes} nodes")]
    Numerical { nodes: u64 },
    #[error("invalid solver parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    /// Largest relaxation bound first; ties go to the deeper, then the most
    /// recently created node.
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    MostFractional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub time_limit: Duration,
    /// Relative gap at which the search stops and reports `Optimal`.
    pub mip_gap: f64,
    pub int_tol: f64,
    pub node_selection: NodeSelection,
    pub branching: Branching,
    /// Node exploration is sequential; the flag is kept so callers can
    /// demand it explicitly once exploration is parallelized.
    pub deterministic: bool,
    pub node_limit: Option<u64>,
    /// Spacing of objective values over integral solutions. `None` detects
    /// it from the instance where possible.
    pub objective_step: Option<f64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(18_000),
            mip_gap: 0.0,
            int_tol: 1e-6,
            node_selection: NodeSelection::BestBound,
            branching: Branching::MostFractional,
            deterministic: true,
            node_limit: None,
            objective_step: None,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.time_limit.is_zero() {
            return Err(SolveError::InvalidParams("time_limit must be positive"));
        }
        if !(self.mip_gap >= 0.0) {
            return Err(SolveError::InvalidParams("mip_gap must be non-negative"));
        }
        if !(self.int_tol > 0.0 && self.int_tol < 0.5) {
            return Err(SolveError::InvalidParams("int_tol must lie in (0, 0.5)"));
        }
        if self.objective_step.is_some_and(|s| !(s > 0.0)) {
            return Err(SolveError::InvalidParams("objective_step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// Stopped at a limit with an incumbent.
    Feasible,
    /// Stopped at a limit before any incumbent was found.
    NoIncumbent,
    Infeasible,
    Unbounded,
}

impl MilpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::Feasible => "feasible",
            MilpStatus::NoIncumbent => "no-incumbent",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub incumbent: Option<Assignment>,
    pub objective: Option<f64>,
    /// Proven bound on the optimum in the instance's own sense.
    pub best_bound: f64,
    pub gap: f64,
    pub nodes_explored: u64,
    pub lp_iterations: u64,
    pub elapsed: Duration,
}

struct Node {
    /// Relaxation bound inherited from the parent, maximization form.
    bound: f64,
    depth: u32,
    seq: u64,
    fixings: Vec<(u32, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

enum Frontier {
    Heap(BinaryHeap<Node>),
    Stack(Vec<Node>),
}

impl Frontier {
    fn push(&mut self, n: Node) {
        match self {
            Frontier::Heap(h) => h.push(n),
            Frontier::Stack(s) => s.push(n),
        }
    }
    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Heap(h) => h.pop(),
            Frontier::Stack(s) => s.pop(),
        }
    }
    fn best_bound(&self) -> Option<f64> {
        match self {
            Frontier::Heap(h) => h.peek().map(|n| n.bound),
            Frontier::Stack(s) => s.iter().map(|n| n.bound).max_by(f64::total_cmp),
        }
    }
}

/// Solves `instance` to optimality or until a limit is hit.
pub fn solve_milp(instance: &MilpInstance, params: &SolveParams) -> Result<MilpResult, SolveError> {
    solve_milp_from(instance, params, None)
}

/// As [`solve_milp`], seeded with a candidate incumbent. An infeasible start
/// is ignored.
pub fn solve_milp_from(
    instance: &MilpInstance,
    params: &SolveParams,
    start: Option<&Assignment>,
) -> Result<MilpResult, SolveError> {
    params.validate()?;
    let started = Instant::now();
    let deadline = started + params.time_limit;
    let sign = match instance.sense() {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let step = params.objective_step.or_else(|| instance.detect_objective_step());
    let binaries: Vec<usize> = instance
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let root_bounds: Vec<(f64, f64)> = instance.variables().iter().map(|v| (v.lower, v.upper)).collect();

    // Incumbent kept in maximization form.
    let mut incumbent: Option<(f64, Assignment)> = None;
    if let Some(s) = start {
        if let Some(snapped) = snap(instance, &binaries, s, params.int_tol) {
            let z = sign * instance.objective_value(&snapped);
            incumbent = Some((z, snapped));
        } else {
            log::debug!("warm start rejected: not integral-feasible");
        }
    }

    // Best objective a node with relaxation value `z` could still deliver.
    let attainable = |z: f64| match step {
        Some(s) => ((z / s) + 1e-6).floor() * s,
        None => z,
    };
    let prunable = |z: f64, inc: &Option<(f64, Assignment)>| match inc {
        None => false,
        Some((iz, _)) => {
            let slack = params.mip_gap * iz.abs().max(1.0);
            match step {
                Some(s) => attainable(z) < iz + 0.5 * s || attainable(z) - iz <= slack,
                None => z <= iz + 1e-9 * iz.abs().max(1.0) || z - iz <= slack,
            }
        }
    };

    let mut frontier = match params.node_selection {
        NodeSelection::BestBound => Frontier::Heap(BinaryHeap::new()),
        NodeSelection::DepthFirst => Frontier::Stack(Vec::new()),
    };
    let mut seq = 0u64;
    frontier.push(Node { bound: f64::INFINITY, depth: 0, seq, fixings: Vec::new() });

    let mut lp = LpSolver::new(instance);
    let mut nodes = 0u64;
    let mut interrupted = false;
    let mut bounds = root_bounds.clone();

    while let Some(node) = frontier.pop() {
        if prunable(node.bound, &incumbent) {
            continue;
        }
        let out_of_time = Instant::now() >= deadline;
        let out_of_nodes = params.node_limit.is_some_and(|l| nodes >= l);
        if out_of_time || out_of_nodes {
            frontier.push(node);
            interrupted = true;
            break;
        }
        nodes += 1;

        bounds.copy_from_slice(&root_bounds);
        for &(j, up) in &node.fixings {
            let v = if up { 1.0 } else { 0.0 };
            bounds[j as usize] = (v, v);
        }
        let relax = lp.solve(&bounds, Some(deadline));
        match relax.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    return Ok(MilpResult {
                        status: MilpStatus::Unbounded,
                        incumbent: None,
                        objective: None,
                        best_bound: sign * f64::INFINITY,
                        gap: f64::INFINITY,
                        nodes_explored: nodes,
                        lp_iterations: lp.iterations,
                        elapsed: started.elapsed(),
                    });
                }
                return Err(SolveError::Numerical { nodes });
            }
            LpStatus::Interrupted => {
                frontier.push(node);
                interrupted = true;
                break;
            }
            LpStatus::NumericalFailure => return Err(SolveError::Numerical { nodes }),
        }
        let values = relax.values.unwrap();
        let z = sign * relax.objective.unwrap();
        if prunable(z, &incumbent) {
            continue;
        }

        let branch_var = binaries
            .iter()
            .map(|&j| (j, values.as_slice()[j]))
            .filter(|(_, x)| (x - x.round()).abs() > params.int_tol)
            .min_by(|a, b| (a.1.fract() - 0.5).abs().total_cmp(&(b.1.fract() - 0.5).abs()).then(a.0.cmp(&b.0)));

        match branch_var {
            None => {
                let candidate = snap(instance, &binaries, &values, params.int_tol)
                    .or_else(|| repair(&mut lp, instance, &binaries, &values, &root_bounds, deadline));
                if let Some(sol) = candidate {
                    let cz = sign * instance.objective_value(&sol);
                    if incumbent.as_ref().is_none_or(|(iz, _)| cz > *iz + 1e-9) {
                        log::debug!("incumbent {} at node {nodes}", sign * cz);
                        incumbent = Some((cz, sol));
                    }
                }
            }
            Some((j, _)) => {
                let child_bound = z;
                for up in [false, true] {
                    seq += 1;
                    let mut fixings = node.fixings.clone();
                    fixings.push((j as u32, up));
                    frontier.push(Node { bound: child_bound, depth: node.depth + 1, seq, fixings });
                }
            }
        }

        if params.mip_gap > 0.0 {
            if let (Some((iz, _)), Some(open)) = (&incumbent, frontier.best_bound()) {
                if (attainable(open).max(*iz) - iz) / iz.abs().max(1.0) <= params.mip_gap {
                    break;
                }
            }
        }
    }

    let open_bound = frontier.best_bound().map(attainable);
    let elapsed = started.elapsed();
    let result = match incumbent {
        Some((iz, sol)) => {
            let bound_z = open_bound.map_or(iz, |b| b.max(iz));
            let gap = (bound_z - iz).abs() / iz.abs().max(1.0);
            let status = if !interrupted || gap <= params.mip_gap { MilpStatus::Optimal } else { MilpStatus::Feasible };
            MilpResult {
                status,
                objective: Some(sign * iz),
                incumbent: Some(sol),
                best_bound: sign * bound_z,
                gap,
                nodes_explored: nodes,
                lp_iterations: lp.iterations,
                elapsed,
            }
        }
        None => {
            let (status, bound_z) = if interrupted {
                (MilpStatus::NoIncumbent, open_bound.unwrap_or(f64::INFINITY))
            } else {
                (MilpStatus::Infeasible, f64::NEG_INFINITY)
            };
            MilpResult {
                status,
                incumbent: None,
                objective: None,
                best_bound: sign * bound_z,
                gap: f64::INFINITY,
                nodes_explored: nodes,
                lp_iterations: lp.iterations,
                elapsed,
            }
        }
    };
    log::debug!(
        "bnb {}: objective {:?} bound {} after {} nodes, {} pivots, {:.2?}",
        result.status.as_str(),
        result.objective,
        result.best_bound,
        result.nodes_explored,
        result.lp_iterations,
        result.elapsed
    );
    Ok(result)
}

/// Rounds binaries to exactly 0/1 and accepts the point if it still
/// satisfies every row and bound.
fn snap(instance: &MilpInstance, binaries: &[usize], values: &Assignment, int_tol: f64) -> Option<Assignment> {
    if values.len() != instance.num_vars() {
        return None;
    }
    let mut v = values.clone().into_vec();
    for &j in binaries {
        if (v[j] - v[j].round()).abs() > int_tol {
            return None;
        }
        v[j] = v[j].round();
    }
    let a = Assignment::from_vec(v);
    instance.is_feasible(&a, INCUMBENT_TOL).then_some(a)
}

/// Re-solves the continuous part with the binaries pinned to their rounded
/// values, for relaxation points that fail the snap check.
fn repair(
    lp: &mut LpSolver<'_>,
    instance: &MilpInstance,
    binaries: &[usize],
    values: &Assignment,
    root: &[(f64, f64)],
    deadline: Instant,
) -> Option<Assignment> {
    let mut bounds = root.to_vec();
    for &j in binaries {
        let v = values.as_slice()[j].round();
        bounds[j] = (v, v);
    }
    let r = lp.solve(&bounds, Some(deadline));
    let sol = r.values?;
    let mut v = sol.into_vec();
    for &j in binaries {
        v[j] = v[j].round();
    }
    let a = Assignment::from_vec(v);
    instance.is_feasible(&a, INCUMBENT_TOL).then_some(a)
}
