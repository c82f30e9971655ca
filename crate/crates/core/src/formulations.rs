//! The three coverage MILPs and the translation between solver assignments
//! and deployments/plans.
//!
//! * static placement: `N_s` binaries per cell, boundary-weighted coverage,
//!   at most `c_o` static nodes covering any cell;
//! * coverage maximization: `L` mobile nodes over `K_max` iterations confined
//!   to the cells the static nodes leave uncovered (`C_1`);
//! * movement minimization: the same paths, minimizing placements subject to
//!   a coverage-ratio target, nodes allowed to stop.
//!
//! Rows are emitted in a fixed order (equation by equation, nodes ascending,
//! iterations ascending, cells row-major) so LP exports are reproducible.

use std::fmt;

use thiserror::Error;

use crate::grid::{self, Cell, CellSet, GridError, GridSpec};
use crate::milp::{Assignment, MilpError, MilpInstance, ObjectiveSense, Sense, VarId, VarKind};

const DECODE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("assignment has {got} values, instance has {want} variables")]
    Length { got: usize, want: usize },
    #[error("variable `{name}` is not integral ({value})")]
    NonIntegral { name: String, value: f64 },
    #[error("static node {s} occupies {count} cells")]
    StaticPosition { s: usize, count: usize },
    #[error("mobile node {l} occupies {count} cells at iteration {k}")]
    MobilePosition { l: usize, k: usize, count: usize },
    #[error("decoded plan violates its own constraints: {0:?}")]
    Inconsistent(Vec<PlanViolation>),
    #[error("handle holds a {0:?} formulation")]
    WrongKind(FormulationKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    Static,
    Coverage,
    Movement,
}

/// Placement of the static nodes and the partition it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticDeployment {
    pub positions: Vec<Cell>,
    /// `C_2`.
    pub covered: CellSet,
    /// `C_1`.
    pub uncovered: CellSet,
    pub alpha: f64,
    pub objective_value: f64,
}

impl StaticDeployment {
    /// No static nodes: everything is left to the mobile nodes.
    pub fn none(grid: GridSpec) -> Self {
        Self {
            positions: Vec::new(),
            covered: CellSet::empty(grid),
            uncovered: CellSet::full(grid),
            alpha: 1.0,
            objective_value: 0.0,
        }
    }

    pub fn from_positions(
        positions: Vec<Cell>,
        r_s: usize,
        grid: &GridSpec,
        alpha: f64,
    ) -> Result<Self, GridError> {
        let (covered, uncovered) = grid::static_coverage(&positions, r_s, grid)?;
        let objective_value = positions
            .iter()
            .flat_map(|&p| grid.window_unchecked(p, r_s, r_s))
            .map(|c| if grid.is_boundary(c) { alpha } else { 1.0 })
            .sum();
        Ok(Self { positions, covered, uncovered, alpha, objective_value })
    }

    pub fn grid(&self) -> &GridSpec {
        self.covered.grid()
    }
}

/// Cell of each mobile node `l` at each iteration `k` (both 0-based), absent
/// once a node has stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilePlan {
    positions: Vec<Vec<Option<Cell>>>,
    horizon: usize,
}

impl MobilePlan {
    pub fn new(nodes: usize, horizon: usize) -> Self {
        Self { positions: vec![vec![None; horizon]; nodes], horizon }
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, l: usize, k: usize) -> Option<Cell> {
        self.positions[l][k]
    }

    pub fn set(&mut self, l: usize, k: usize, cell: Option<Cell>) {
        self.positions[l][k] = cell;
    }

    pub fn path(&self, l: usize) -> &[Option<Cell>] {
        &self.positions[l]
    }

    /// Present placements `(l, k, cell)` in iteration-major order.
    pub fn placements(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        (0..self.horizon)
            .flat_map(move |k| (0..self.positions.len()).filter_map(move |l| self.positions[l][k].map(|c| (l, k, c))))
    }

    /// Number of `(node, iteration)` placements.
    pub fn movements(&self) -> usize {
        self.positions.iter().flatten().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.movements() == 0
    }

    /// Keeps only the first `count` placements in iteration-major order.
    pub fn truncated(&self, count: usize) -> Self {
        let mut out = Self::new(self.num_nodes(), self.horizon);
        for (l, k, c) in self.placements().take(count) {
            out.set(l, k, Some(c));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    OutOfGrid { l: usize, k: usize, cell: Cell },
    /// Position outside the cells the node may occupy (normally `C_1`).
    NotAllowed { l: usize, k: usize, cell: Cell },
    Step { l: usize, k: usize, from: Cell, to: Cell },
    /// Node reappears after having stopped.
    Restarted { l: usize, k: usize },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::OutOfGrid { l, k, cell } => write!(f, "node {l} iteration {k}: {cell} outside grid"),
            PlanViolation::NotAllowed { l, k, cell } => {
                write!(f, "node {l} iteration {k}: {cell} already covered by static nodes")
            }
            PlanViolation::Step { l, k, from, to } => write!(f, "node {l} iteration {k}: step {from} -> {to} too long"),
            PlanViolation::Restarted { l, k } => write!(f, "node {l} iteration {k}: moves again after stopping"),
        }
    }
}

/// Checks grid bounds, membership in `allowed`, step lengths and that a
/// stopped node stays stopped.
pub fn validate_plan(
    plan: &MobilePlan,
    grid: &GridSpec,
    allowed: &CellSet,
    rho_x: usize,
    rho_y: usize,
) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    for l in 0..plan.num_nodes() {
        let mut prev: Option<Cell> = None;
        let mut stopped = false;
        for k in 0..plan.horizon() {
            match plan.get(l, k) {
                None => {
                    if prev.is_some() || k == 0 {
                        stopped = true;
                    }
                    prev = None;
                }
                Some(cell) => {
                    if stopped {
                        out.push(PlanViolation::Restarted { l, k });
                    }
                    if !grid.contains(cell) {
                        out.push(PlanViolation::OutOfGrid { l, k, cell });
                    } else if !allowed.contains(cell) {
                        out.push(PlanViolation::NotAllowed { l, k, cell });
                    }
                    if let Some(p) = prev {
                        if p.i.abs_diff(cell.i) > rho_x || p.j.abs_diff(cell.j) > rho_y {
                            out.push(PlanViolation::Step { l, k, from: p, to: cell });
                        }
                    }
                    prev = Some(cell);
                }
            }
        }
    }
    out
}

/// Groups `cells` into classes mutually reachable by steps of at most
/// `(rho_x, rho_y)` that stay inside `cells`.
pub fn reachability_components(cells: &CellSet, rho_x: usize, rho_y: usize) -> Vec<CellSet> {
    let grid = *cells.grid();
    let mut seen = CellSet::empty(grid);
    let mut out = Vec::new();
    for start in cells.iter() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = CellSet::empty(grid);
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(c) = stack.pop() {
            comp.insert(c);
            for n in grid.window_unchecked(c, rho_x, rho_y) {
                if cells.contains(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        out.push(comp);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    StaticPosition { s: usize, cell: Cell },
    StaticCover { s: usize, cell: Cell },
    MobilePosition { l: usize, k: usize, cell: Cell },
    MobileCover { l: usize, k: usize, cell: Cell },
    Cover { cell: Cell },
}

/// A built formulation with the bookkeeping to map variables back to nodes,
/// iterations and cells. Node and iteration indices are 0-based here; names
/// inside the instance are 1-based.
#[derive(Debug, Clone)]
pub struct FormulationHandle {
    pub instance: MilpInstance,
    kind: FormulationKind,
    grid: GridSpec,
    r_s: usize,
    rho_x: usize,
    rho_y: usize,
    c_o: usize,
    alpha: f64,
    nodes: usize,
    horizon: usize,
    /// Cells carrying variables: all of `C` (static) or `C_1` (mobile).
    domain: Vec<Cell>,
    domain_index: Vec<Option<usize>>,
    allowed: CellSet,
    position_vars: Vec<VarId>,
    node_cover_vars: Vec<VarId>,
    cover_vars: Vec<VarId>,
    roles: Vec<VarRole>,
    static_covered: usize,
    required_mobile: usize,
}

impl FormulationHandle {
    pub fn kind(&self) -> FormulationKind {
        self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `C_1` for mobile formulations, `C` for the static one.
    pub fn domain(&self) -> &CellSet {
        &self.allowed
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// True for mobile formulations over an empty `C_1`, or a movement target
    /// the static nodes already meet.
    pub fn nothing_to_plan(&self) -> bool {
        match self.kind {
            FormulationKind::Static => false,
            FormulationKind::Coverage => self.domain.is_empty(),
            FormulationKind::Movement => self.domain.is_empty() || self.required_mobile == 0,
        }
    }

    /// Cells the mobile nodes must cover for the movement target.
    pub fn required_mobile_cells(&self) -> usize {
        self.required_mobile
    }

    /// Objective spacing over integral solutions, for branch-and-bound pruning.
    pub fn objective_step(&self) -> Option<f64> {
        match self.kind {
            FormulationKind::Static => (self.alpha.fract() == 0.0).then_some(1.0),
            FormulationKind::Coverage | FormulationKind::Movement => Some(1.0),
        }
    }

    pub fn role(&self, v: VarId) -> VarRole {
        self.roles[v.index()]
    }

    fn slot(&self, cell: Cell) -> Option<usize> {
        if !self.grid.contains(cell) {
            return None;
        }
        self.domain_index[self.grid.index(cell)]
    }

    fn block(&self, a: usize, b: usize) -> usize {
        (a * self.horizon + b) * self.domain.len()
    }

    /// `x^s_{cell}` (static) for node `s`.
    pub fn static_position_var(&self, s: usize, cell: Cell) -> Option<VarId> {
        (self.kind == FormulationKind::Static).then(|| self.slot(cell).map(|c| self.position_vars[self.block(s, 0) + c]))?
    }

    pub fn static_cover_var(&self, s: usize, cell: Cell) -> Option<VarId> {
        (self.kind == FormulationKind::Static)
            .then(|| self.slot(cell).map(|c| self.node_cover_vars[self.block(s, 0) + c]))?
    }

    /// `x^{l,k}_{cell}`.
    pub fn mobile_position_var(&self, l: usize, k: usize, cell: Cell) -> Option<VarId> {
        (self.kind != FormulationKind::Static).then(|| self.slot(cell).map(|c| self.position_vars[self.block(l, k) + c]))?
    }

    /// `c^{l,k}_{cell}`.
    pub fn mobile_cover_var(&self, l: usize, k: usize, cell: Cell) -> Option<VarId> {
        (self.kind != FormulationKind::Static)
            .then(|| self.slot(cell).map(|c| self.node_cover_vars[self.block(l, k) + c]))?
    }

    /// `c_{cell}`.
    pub fn cover_var(&self, cell: Cell) -> Option<VarId> {
        self.slot(cell).and_then(|c| self.cover_vars.get(c).copied())
    }

    /// Every coverage variable (the ones that should come out 0/1).
    pub fn coverage_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.node_cover_vars.iter().chain(&self.cover_vars).copied()
    }
}

fn empty_handle(kind: FormulationKind, grid: GridSpec, sense: ObjectiveSense) -> FormulationHandle {
    FormulationHandle {
        instance: MilpInstance::new(sense),
        kind,
        grid,
        r_s: 0,
        rho_x: 0,
        rho_y: 0,
        c_o: 1,
        alpha: 1.0,
        nodes: 0,
        horizon: 0,
        domain: Vec::new(),
        domain_index: vec![None; grid.len()],
        allowed: CellSet::empty(grid),
        position_vars: Vec::new(),
        node_cover_vars: Vec::new(),
        cover_vars: Vec::new(),
        roles: Vec::new(),
        static_covered: 0,
        required_mobile: 0,
    }
}

fn invalid(msg: impl Into<String>) -> FormulationError {
    FormulationError::InvalidParameter(msg.into())
}

/// Static placement: maximize boundary-weighted per-node coverage.
pub fn build_milp_static(
    grid: &GridSpec,
    n_static: usize,
    r_s: usize,
    c_o: usize,
    alpha: f64,
) -> Result<FormulationHandle, FormulationError> {
    if n_static == 0 {
        return Err(invalid("number of static nodes must be at least 1"));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(invalid("boundary weight alpha must be at least 1"));
    }
    if c_o == 0 {
        return Err(invalid("overlap factor c_o must be at least 1"));
    }
    let mut h = empty_handle(FormulationKind::Static, *grid, ObjectiveSense::Maximize);
    h.r_s = r_s;
    h.c_o = c_o;
    h.alpha = alpha;
    h.nodes = n_static;
    h.horizon = 1;
    h.domain = grid.cells().collect();
    h.domain_index = (0..grid.len()).map(Some).collect();
    h.allowed = CellSet::full(*grid);

    let m = &mut h.instance;
    for s in 0..n_static {
        for &c in &h.domain {
            h.position_vars.push(m.add_binary(format!("x_s{}_{}_{}", s + 1, c.i, c.j))?);
            h.roles.push(VarRole::StaticPosition { s, cell: c });
        }
    }
    for s in 0..n_static {
        for &c in &h.domain {
            h.node_cover_vars.push(m.add_variable(format!("c_s{}_{}_{}", s + 1, c.i, c.j), VarKind::Continuous, 0.0, 1.0)?);
            h.roles.push(VarRole::StaticCover { s, cell: c });
        }
    }
    let n = h.domain.len();
    let objective: Vec<(VarId, f64)> = h
        .node_cover_vars
        .iter()
        .enumerate()
        .map(|(k, &v)| (v, if grid.is_boundary(h.domain[k % n]) { alpha } else { 1.0 }))
        .collect();
    m.set_objective(ObjectiveSense::Maximize, objective)?;

    for s in 0..n_static {
        let terms = (0..n).map(|c| (h.position_vars[s * n + c], 1.0)).collect();
        m.add_named_constraint(format!("pos_s{}", s + 1), terms, Sense::Eq, 1.0)?;
    }
    for s in 0..n_static {
        for (ci, &c) in h.domain.iter().enumerate() {
            let mut terms = vec![(h.node_cover_vars[s * n + ci], 1.0)];
            for w in grid.window_unchecked(c, r_s, r_s) {
                terms.push((h.position_vars[s * n + grid.index(w)], -1.0));
            }
            m.add_named_constraint(format!("sense_s{}_{}_{}", s + 1, c.i, c.j), terms, Sense::Eq, 0.0)?;
        }
    }
    for (ci, &c) in h.domain.iter().enumerate() {
        let terms = (0..n_static).map(|s| (h.node_cover_vars[s * n + ci], 1.0)).collect();
        m.add_named_constraint(format!("overlap_{}_{}", c.i, c.j), terms, Sense::Le, c_o as f64)?;
    }
    Ok(h)
}

struct MobileSpec<'a> {
    grid: &'a GridSpec,
    c1: &'a CellSet,
    nodes: usize,
    horizon: usize,
    r_s: usize,
    rho_x: usize,
    rho_y: usize,
    c_o: usize,
}

fn build_mobile(spec: MobileSpec<'_>, kind: FormulationKind) -> Result<FormulationHandle, FormulationError> {
    let MobileSpec { grid, c1, nodes, horizon, r_s, rho_x, rho_y, c_o } = spec;
    if c1.grid() != grid {
        return Err(invalid("uncovered-cell set belongs to a different grid"));
    }
    if nodes == 0 {
        return Err(invalid("number of mobile nodes L must be at least 1"));
    }
    if horizon == 0 {
        return Err(invalid("K_max must be at least 1"));
    }
    if c_o == 0 {
        return Err(invalid("overlap factor c_o must be at least 1"));
    }
    let sense = match kind {
        FormulationKind::Movement => ObjectiveSense::Minimize,
        _ => ObjectiveSense::Maximize,
    };
    let mut h = empty_handle(kind, *grid, sense);
    h.r_s = r_s;
    h.rho_x = rho_x;
    h.rho_y = rho_y;
    h.c_o = c_o;
    h.nodes = nodes;
    h.horizon = horizon;
    h.allowed = c1.clone();
    h.domain = c1.to_vec();
    for (k, c) in h.domain.iter().enumerate() {
        h.domain_index[grid.index(*c)] = Some(k);
    }
    h.static_covered = grid.len() - c1.len();
    if h.domain.is_empty() {
        return Ok(h);
    }
    let comps = reachability_components(c1, rho_x, rho_y);
    if comps.len() > 1 {
        log::warn!("uncovered cells split into {} components unreachable from each other", comps.len());
    }

    let n = h.domain.len();
    let m = &mut h.instance;
    for l in 0..nodes {
        for k in 0..horizon {
            for &c in &h.domain {
                h.position_vars.push(m.add_binary(format!("x_l{}_k{}_{}_{}", l + 1, k + 1, c.i, c.j))?);
                h.roles.push(VarRole::MobilePosition { l, k, cell: c });
            }
        }
    }
    for l in 0..nodes {
        for k in 0..horizon {
            for &c in &h.domain {
                let name = format!("c_l{}_k{}_{}_{}", l + 1, k + 1, c.i, c.j);
                h.node_cover_vars.push(m.add_variable(name, VarKind::Continuous, 0.0, 1.0)?);
                h.roles.push(VarRole::MobileCover { l, k, cell: c });
            }
        }
    }
    for &c in &h.domain {
        h.cover_vars.push(m.add_variable(format!("c_{}_{}", c.i, c.j), VarKind::Continuous, 0.0, 1.0)?);
        h.roles.push(VarRole::Cover { cell: c });
    }

    let block = |l: usize, k: usize| (l * horizon + k) * n;
    let slot = |c: Cell| h.domain_index[grid.index(c)];

    match kind {
        FormulationKind::Movement => {
            let terms = h.position_vars.iter().map(|&v| (v, 1.0)).collect();
            m.set_objective(ObjectiveSense::Minimize, terms)?;
        }
        _ => {
            let terms = h.cover_vars.iter().map(|&v| (v, 1.0)).collect();
            m.set_objective(ObjectiveSense::Maximize, terms)?;
        }
    }

    // one cell per node and iteration (at most one when nodes may stop)
    let pos_sense = if kind == FormulationKind::Movement { Sense::Le } else { Sense::Eq };
    for l in 0..nodes {
        for k in 0..horizon {
            let terms = (0..n).map(|c| (h.position_vars[block(l, k) + c], 1.0)).collect();
            m.add_named_constraint(format!("pos_l{}_k{}", l + 1, k + 1), terms, pos_sense, 1.0)?;
        }
    }
    // next position within one step of the current one
    for l in 0..nodes {
        for k in 0..horizon.saturating_sub(1) {
            for (ci, &c) in h.domain.iter().enumerate() {
                let mut terms = vec![(h.position_vars[block(l, k + 1) + ci], 1.0)];
                for w in grid.window_unchecked(c, rho_x, rho_y) {
                    if let Some(wi) = slot(w) {
                        terms.push((h.position_vars[block(l, k) + wi], -1.0));
                    }
                }
                let name = format!("move_l{}_k{}_{}_{}", l + 1, k + 1, c.i, c.j);
                m.add_named_constraint(name, terms, Sense::Le, 0.0)?;
            }
        }
    }
    // per-iteration sensing
    for l in 0..nodes {
        for k in 0..horizon {
            for (ci, &c) in h.domain.iter().enumerate() {
                let mut terms = vec![(h.node_cover_vars[block(l, k) + ci], 1.0)];
                for w in grid.window_unchecked(c, r_s, r_s) {
                    if let Some(wi) = slot(w) {
                        terms.push((h.position_vars[block(l, k) + wi], -1.0));
                    }
                }
                let name = format!("sense_l{}_k{}_{}_{}", l + 1, k + 1, c.i, c.j);
                m.add_named_constraint(name, terms, Sense::Eq, 0.0)?;
            }
        }
    }
    for l in 0..nodes {
        for k in 0..horizon {
            for (ci, &c) in h.domain.iter().enumerate() {
                let terms = vec![(h.cover_vars[ci], 1.0), (h.node_cover_vars[block(l, k) + ci], -1.0)];
                let name = format!("seen_l{}_k{}_{}_{}", l + 1, k + 1, c.i, c.j);
                m.add_named_constraint(name, terms, Sense::Ge, 0.0)?;
            }
        }
    }
    for (ci, &c) in h.domain.iter().enumerate() {
        let mut terms = vec![(h.cover_vars[ci], 1.0)];
        for l in 0..nodes {
            for k in 0..horizon {
                terms.push((h.node_cover_vars[block(l, k) + ci], -1.0));
            }
        }
        m.add_named_constraint(format!("covered_{}_{}", c.i, c.j), terms, Sense::Le, 0.0)?;
    }
    for (ci, &c) in h.domain.iter().enumerate() {
        let mut terms = Vec::with_capacity(nodes * horizon);
        for l in 0..nodes {
            for k in 0..horizon {
                terms.push((h.node_cover_vars[block(l, k) + ci], 1.0));
            }
        }
        m.add_named_constraint(format!("overlap_{}_{}", c.i, c.j), terms, Sense::Le, c_o as f64)?;
    }
    Ok(h)
}

/// Coverage maximization over `C_1` for `L` nodes and `K_max` iterations.
/// An empty `C_1` yields a handle flagged [`FormulationHandle::nothing_to_plan`].
#[allow(clippy::too_many_arguments)]
pub fn build_milp_cov(
    grid: &GridSpec,
    c1: &CellSet,
    n_mobile: usize,
    k_max: usize,
    r_s: usize,
    rho_x: usize,
    rho_y: usize,
    c_o: usize,
) -> Result<FormulationHandle, FormulationError> {
    let spec = MobileSpec { grid, c1, nodes: n_mobile, horizon: k_max, r_s, rho_x, rho_y, c_o };
    build_mobile(spec, FormulationKind::Coverage)
}

/// Movement minimization reaching `ceil(cr_target * |C|)` covered cells, the
/// `|C_2|` statically covered cells counted as a constant.
#[allow(clippy::too_many_arguments)]
pub fn build_milp_mov(
    grid: &GridSpec,
    c1: &CellSet,
    static_covered: usize,
    n_mobile: usize,
    k_max: usize,
    r_s: usize,
    rho_x: usize,
    rho_y: usize,
    c_o: usize,
    cr_target: f64,
) -> Result<FormulationHandle, FormulationError> {
    if !(cr_target > 0.0 && cr_target <= 1.0) {
        return Err(invalid("coverage target must lie in (0, 1]"));
    }
    if static_covered + c1.len() != grid.len() {
        return Err(invalid("static coverage count must equal |C| - |C_1|"));
    }
    let spec = MobileSpec { grid, c1, nodes: n_mobile, horizon: k_max, r_s, rho_x, rho_y, c_o };
    let mut h = build_mobile(spec, FormulationKind::Movement)?;
    let need = grid::required_cells(cr_target, grid.len());
    h.required_mobile = need.saturating_sub(static_covered);
    if !h.domain.is_empty() {
        let rhs = need as f64 - static_covered as f64;
        let terms = h.cover_vars.iter().map(|&v| (v, 1.0)).collect();
        h.instance.add_named_constraint("target", terms, Sense::Ge, rhs)?;
    }
    Ok(h)
}

fn check_len(handle: &FormulationHandle, a: &Assignment) -> Result<(), DecodeError> {
    if a.len() != handle.instance.num_vars() {
        return Err(DecodeError::Length { got: a.len(), want: handle.instance.num_vars() });
    }
    Ok(())
}

fn integral(handle: &FormulationHandle, v: VarId, a: &Assignment) -> Result<bool, DecodeError> {
    let x = a.value(v);
    if (x - x.round()).abs() > DECODE_TOL || !(x.round() == 0.0 || x.round() == 1.0) {
        return Err(DecodeError::NonIntegral { name: handle.instance.variable(v).name.clone(), value: x });
    }
    Ok(x.round() == 1.0)
}

/// Reads static node positions from an integral assignment.
pub fn decode_static(handle: &FormulationHandle, assignment: &Assignment) -> Result<StaticDeployment, DecodeError> {
    if handle.kind != FormulationKind::Static {
        return Err(DecodeError::WrongKind(handle.kind));
    }
    check_len(handle, assignment)?;
    let n = handle.domain.len();
    let mut positions = Vec::with_capacity(handle.nodes);
    for s in 0..handle.nodes {
        let mut found = Vec::new();
        for ci in 0..n {
            if integral(handle, handle.position_vars[s * n + ci], assignment)? {
                found.push(handle.domain[ci]);
            }
        }
        if found.len() != 1 {
            return Err(DecodeError::StaticPosition { s, count: found.len() });
        }
        positions.push(found[0]);
    }
    let (covered, uncovered) =
        grid::static_coverage(&positions, handle.r_s, &handle.grid).expect("decoded positions lie in the grid");
    Ok(StaticDeployment {
        positions,
        covered,
        uncovered,
        alpha: handle.alpha,
        objective_value: handle.instance.objective_value(assignment),
    })
}

/// Reads mobile paths from an integral assignment and re-validates them.
pub fn decode_plan(handle: &FormulationHandle, assignment: &Assignment) -> Result<MobilePlan, DecodeError> {
    if handle.kind == FormulationKind::Static {
        return Err(DecodeError::WrongKind(handle.kind));
    }
    let mut plan = MobilePlan::new(handle.nodes, handle.horizon);
    if handle.domain.is_empty() {
        return Ok(plan);
    }
    check_len(handle, assignment)?;
    let n = handle.domain.len();
    for l in 0..handle.nodes {
        for k in 0..handle.horizon {
            let base = handle.block(l, k);
            let mut found = Vec::new();
            for ci in 0..n {
                if integral(handle, handle.position_vars[base + ci], assignment)? {
                    found.push(handle.domain[ci]);
                }
            }
            let required = handle.kind == FormulationKind::Coverage;
            if found.len() > 1 || (required && found.is_empty()) {
                return Err(DecodeError::MobilePosition { l, k, count: found.len() });
            }
            plan.set(l, k, found.first().copied());
        }
    }
    let violations = validate_plan(&plan, &handle.grid, &handle.allowed, handle.rho_x, handle.rho_y);
    if !violations.is_empty() {
        return Err(DecodeError::Inconsistent(violations));
    }
    Ok(plan)
}

/// Variable values realizing a static placement.
pub fn encode_static(handle: &FormulationHandle, positions: &[Cell]) -> Result<Assignment, DecodeError> {
    if handle.kind != FormulationKind::Static {
        return Err(DecodeError::WrongKind(handle.kind));
    }
    if positions.len() != handle.nodes {
        return Err(DecodeError::StaticPosition { s: positions.len(), count: 0 });
    }
    let mut a = Assignment::zeros(handle.instance.num_vars());
    let n = handle.domain.len();
    for (s, &p) in positions.iter().enumerate() {
        let Some(pi) = handle.slot(p) else {
            return Err(DecodeError::StaticPosition { s, count: 0 });
        };
        a.set(handle.position_vars[s * n + pi], 1.0);
        for w in handle.grid.window_unchecked(p, handle.r_s, handle.r_s) {
            a.set(handle.node_cover_vars[s * n + handle.grid.index(w)], 1.0);
        }
    }
    Ok(a)
}

/// Variable values realizing a plan; positions outside `C_1` are dropped.
pub fn encode_plan(handle: &FormulationHandle, plan: &MobilePlan) -> Result<Assignment, DecodeError> {
    if handle.kind == FormulationKind::Static {
        return Err(DecodeError::WrongKind(handle.kind));
    }
    let mut a = Assignment::zeros(handle.instance.num_vars());
    if handle.domain.is_empty() {
        return Ok(a);
    }
    for (l, k, cell) in plan.placements() {
        if l >= handle.nodes || k >= handle.horizon {
            continue;
        }
        let base = handle.block(l, k);
        if let Some(ci) = handle.slot(cell) {
            a.set(handle.position_vars[base + ci], 1.0);
        }
        for w in handle.grid.window_unchecked(cell, handle.r_s, handle.r_s) {
            if let Some(wi) = handle.slot(w) {
                a.set(handle.node_cover_vars[base + wi], 1.0);
                a.set(handle.cover_vars[wi], 1.0);
            }
        }
    }
    Ok(a)
}

/// Feasible placement used to seed the static solve: centers are tried in
/// order of decreasing weighted footprint (ties to the smallest cell),
/// backtracking when the overlap cap leaves no room, within a fixed budget.
pub fn greedy_static_start(handle: &FormulationHandle) -> Option<Assignment> {
    if handle.kind != FormulationKind::Static {
        return None;
    }
    let grid = handle.grid;
    let mut candidates: Vec<(f64, Vec<usize>, Cell)> = grid
        .cells()
        .map(|c| {
            let fp: Vec<usize> = grid.window_unchecked(c, handle.r_s, handle.r_s).map(|w| grid.index(w)).collect();
            let score = fp.iter().map(|&w| if grid.is_boundary(grid.cell_at(w)) { handle.alpha } else { 1.0 }).sum();
            (score, fp, c)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)));

    struct Search<'a> {
        cands: &'a [(f64, Vec<usize>, Cell)],
        load: Vec<usize>,
        chosen: Vec<Cell>,
        cap: usize,
        budget: usize,
    }
    impl Search<'_> {
        fn go(&mut self, need: usize, from: usize) -> bool {
            if need == 0 {
                return true;
            }
            for (k, (_, fp, c)) in self.cands.iter().enumerate().skip(from) {
                if self.budget == 0 {
                    return false;
                }
                self.budget -= 1;
                if fp.iter().any(|&w| self.load[w] >= self.cap) {
                    continue;
                }
                fp.iter().for_each(|&w| self.load[w] += 1);
                self.chosen.push(*c);
                // nodes are interchangeable, but with c_o > 1 a center may repeat
                let next = if self.cap > 1 { k } else { k + 1 };
                if self.go(need - 1, next) {
                    return true;
                }
                self.chosen.pop();
                fp.iter().for_each(|&w| self.load[w] -= 1);
            }
            false
        }
    }
    let mut search =
        Search { cands: &candidates, load: vec![0; grid.len()], chosen: Vec::new(), cap: handle.c_o, budget: 200_000 };
    if !search.go(handle.nodes, 0) {
        return None;
    }
    encode_static(handle, &search.chosen).ok()
}

/// Greedy plan confined to `C_1` and the overlap cap, used to seed the
/// mobile solves. For the movement formulation the plan is cut at the first
/// placement reaching the target; `None` if it never does.
pub fn greedy_mobile_start(handle: &FormulationHandle) -> Option<Assignment> {
    greedy_mobile_plan(handle).and_then(|p| encode_plan(handle, &p).ok())
}

pub(crate) fn greedy_mobile_plan(handle: &FormulationHandle) -> Option<MobilePlan> {
    if handle.kind == FormulationKind::Static {
        return None;
    }
    let grid = handle.grid;
    let mut plan = MobilePlan::new(handle.nodes, handle.horizon);
    if handle.nothing_to_plan() {
        return Some(plan);
    }
    let mut load = vec![0usize; grid.len()];
    let mut covered = CellSet::empty(grid);
    let target = handle.required_mobile;
    let mut placed = 0;
    for k in 0..handle.horizon {
        for l in 0..handle.nodes {
            let candidates: Vec<Cell> = match k {
                0 => handle.domain.clone(),
                _ => {
                    let prev = plan.get(l, k - 1)?;
                    grid.window_unchecked(prev, handle.rho_x, handle.rho_y)
                        .filter(|c| handle.allowed.contains(*c))
                        .collect()
                }
            };
            let mut best: Option<(usize, Cell)> = None;
            for c in candidates {
                let fp = || grid.window_unchecked(c, handle.r_s, handle.r_s).filter(|w| handle.allowed.contains(*w));
                if fp().any(|w| load[grid.index(w)] >= handle.c_o) {
                    continue;
                }
                let gain = fp().filter(|w| !covered.contains(*w)).count();
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, c));
                }
            }
            let (_, c) = best?;
            for w in grid.window_unchecked(c, handle.r_s, handle.r_s).filter(|w| handle.allowed.contains(*w)) {
                load[grid.index(w)] += 1;
                covered.insert(w);
            }
            plan.set(l, k, Some(c));
            placed += 1;
            if handle.kind == FormulationKind::Movement && covered.len() >= target {
                return Some(plan.truncated(placed));
            }
        }
    }
    match handle.kind {
        FormulationKind::Movement => None,
        _ => Some(plan),
    }
}
