//! Bounded-variable revised simplex.
//!
//! Every row `a.x (<=|=|>=) b` becomes `a.x + s + t = b` with a logical `s`
//! bounded by the row sense (equality rows get none) and an artificial `t`
//! that is only free during phase 1. Variables sit nonbasic at either bound,
//! so `[0, 1]` boxes never become rows.
//!
//! The matrix is stored sparse by column and by row; the basis inverse is
//! kept in product form and rebuilt every [`REFACTOR_INTERVAL`] updates.
//!
//! Cold solves run phase 1 over the artificials. Re-solves after a bound
//! change (branch-and-bound) start from the previous basis, which stays dual
//! feasible, and run a cost-perturbed dual simplex followed by a primal
//! clean-up. Pivots use the largest reduced cost, falling back to Bland's
//! rule after `2 * (rows + cols)` consecutive degenerate pivots.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::milp::{Assignment, MilpInstance, ObjectiveSense, Sense, VarId};
use crate::par;

/// Centralized numerical tolerances.
pub mod tol {
    /// Primal feasibility of bounds and rows.
    pub const FEASIBILITY: f64 = 1e-7;
    /// Reduced-cost optimality.
    pub const REDUCED_COST: f64 = 1e-9;
    /// Smallest acceptable pivot element.
    pub const PIVOT: f64 = 1e-9;
    /// Entries below this are flushed to zero.
    pub const DROP: f64 = 1e-12;
    /// Accepted residual when re-verifying a solution by substitution.
    pub const RESIDUAL: f64 = 1e-7;
    /// Returned values this close to a bound are snapped onto it.
    pub const BOUND: f64 = 1e-9;
}

/// Basis updates between refactorizations.
const REFACTOR_INTERVAL: usize = 100;
/// Relative size of the cost perturbation used by the dual simplex.
const PERTURBATION: f64 = 1e-6;
/// Primal infeasibility beyond which a dual run is abandoned as unstable.
const BLOW_UP: f64 = 1e7;
/// Columns per pricing chunk.
const PRICE_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Residual check failed or the iteration cap was hit.
    NumericalFailure,
    /// Deadline reached before termination.
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub values: Option<Assignment>,
    pub objective: Option<f64>,
    pub iterations: u64,
}

/// Solves the LP relaxation of `instance` with bounds optionally tightened
/// by `extra_bounds`.
pub fn solve_lp(instance: &MilpInstance, extra_bounds: &BTreeMap<VarId, (f64, f64)>) -> LpResult {
    let mut bounds: Vec<(f64, f64)> = instance.variables().iter().map(|v| (v.lower, v.upper)).collect();
    for (&v, &(lo, hi)) in extra_bounds {
        let b = &mut bounds[v.index()];
        b.0 = b.0.max(lo);
        b.1 = b.1.min(hi);
    }
    let mut solver = LpSolver::new(instance);
    solver.solve(&bounds, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free column held at zero.
    Zero,
}

enum Outcome {
    Done,
    Infeasible,
    Unbounded,
    Stalled,
    Interrupted,
}

fn resting_position(lower: f64, upper: f64) -> (Pos, f64) {
    if lower.is_finite() {
        (Pos::Lower, lower)
    } else if upper.is_finite() {
        (Pos::Upper, upper)
    } else {
        (Pos::Zero, 0.0)
    }
}

/// Constraint matrix in standard form, with logical and artificial columns.
struct Model {
    m: usize,
    /// Structural columns.
    n: usize,
    ncols: usize,
    first_artificial: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    rhs: Vec<f64>,
    /// Bounds of logical columns (structural entries are placeholders).
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    /// Maximization costs.
    cost: Vec<f64>,
    /// Row of each unit (logical/artificial) column.
    unit_row: Vec<usize>,
    /// Logical column of each row, if any.
    logical_of: Vec<Option<usize>>,
}

impl Model {
    fn new(instance: &MilpInstance, sign: f64) -> Self {
        let rows = instance.constraints();
        let m = rows.len();
        let n = instance.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, r) in rows.iter().enumerate() {
            for &(v, a) in &r.terms {
                let col = &mut cols[v.index()];
                match col.last_mut() {
                    Some(last) if last.0 == i => last.1 += a,
                    _ => col.push((i, a)),
                }
            }
        }
        let mut base_lower = vec![0.0; n];
        let mut base_upper = vec![0.0; n];
        let mut unit_row = vec![usize::MAX; n];
        let mut logical_of = vec![None; m];
        for (i, r) in rows.iter().enumerate() {
            let (lo, hi) = match r.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => continue,
            };
            logical_of[i] = Some(cols.len());
            cols.push(vec![(i, 1.0)]);
            base_lower.push(lo);
            base_upper.push(hi);
            unit_row.push(i);
        }
        let first_artificial = cols.len();
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            base_lower.push(0.0);
            base_upper.push(0.0);
            unit_row.push(i);
        }
        let ncols = cols.len();

        let mut col_start = Vec::with_capacity(ncols + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        let mut row_count = vec![0usize; m];
        col_start.push(0);
        for col in &cols {
            for &(i, a) in col {
                if a != 0.0 {
                    col_row.push(i);
                    col_val.push(a);
                    row_count[i] += 1;
                }
            }
            col_start.push(col_row.len());
        }
        let mut row_start = vec![0usize; m + 1];
        for i in 0..m {
            row_start[i + 1] = row_start[i] + row_count[i];
        }
        let mut fill = row_start.clone();
        let mut row_col = vec![0usize; col_row.len()];
        let mut row_val = vec![0.0; col_row.len()];
        for j in 0..ncols {
            for k in col_start[j]..col_start[j + 1] {
                let i = col_row[k];
                row_col[fill[i]] = j;
                row_val[fill[i]] = col_val[k];
                fill[i] += 1;
            }
        }
        let mut cost = vec![0.0; ncols];
        for &(v, c) in instance.objective() {
            cost[v.index()] += sign * c;
        }
        Self {
            m,
            n,
            ncols,
            first_artificial,
            col_start,
            col_row,
            col_val,
            row_start,
            row_col,
            row_val,
            rhs: rows.iter().map(|r| r.rhs).collect(),
            base_lower,
            base_upper,
            cost,
            unit_row,
            logical_of,
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_start[j]..self.col_start[j + 1]).map(move |k| (self.col_row[k], self.col_val[k]))
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }
}

/// Working state: bounds, basis, primal values, reduced costs, and the
/// basis inverse as a product of eta columns.
#[derive(Clone)]
struct Engine {
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    pos: Vec<Pos>,
    basis: Vec<usize>,
    /// Maximization costs of the phase being run.
    cost: Vec<f64>,
    d: Vec<f64>,
    eta_row: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
    updates: usize,
    /// Set when the last refactorization had to repair a singular basis.
    repaired: bool,
    /// Dual steepest-edge weights by basis row.
    dse: Vec<f64>,
    iterations: u64,
}

impl Engine {
    fn is_fixed(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] <= 0.0
    }

    fn push_eta(&mut self, r: usize, col: &[f64]) {
        self.eta_row.push(r);
        self.eta_pivot.push(col[r]);
        for (i, &v) in col.iter().enumerate() {
            if i != r && v.abs() > tol::DROP {
                self.eta_idx.push(i);
                self.eta_val.push(v);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }

    /// `v <- B^-1 v`.
    fn ftran(&self, v: &mut [f64]) {
        for k in 0..self.eta_row.len() {
            let p = self.eta_row[k];
            if v[p] == 0.0 {
                continue;
            }
            let xp = v[p] / self.eta_pivot[k];
            v[p] = xp;
            for t in self.eta_start[k]..self.eta_start[k + 1] {
                v[self.eta_idx[t]] -= self.eta_val[t] * xp;
            }
        }
    }

    /// `v <- B^-T v`.
    fn btran(&self, v: &mut [f64]) {
        for k in (0..self.eta_row.len()).rev() {
            let p = self.eta_row[k];
            let mut s = v[p];
            for t in self.eta_start[k]..self.eta_start[k + 1] {
                s -= self.eta_val[t] * v[self.eta_idx[t]];
            }
            v[p] = s / self.eta_pivot[k];
        }
    }

    fn column_into(&self, model: &Model, j: usize, v: &mut [f64]) {
        v.iter_mut().for_each(|e| *e = 0.0);
        for (i, a) in model.column(j) {
            v[i] = a;
        }
        self.ftran(v);
    }

    fn push_sparse_eta(&mut self, p: usize, pivot: f64, entries: &[(usize, f64)]) {
        self.eta_row.push(p);
        self.eta_pivot.push(pivot);
        for &(i, v) in entries {
            if v.abs() > tol::DROP {
                self.eta_idx.push(i);
                self.eta_val.push(v);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }

    /// Rebuilds the basis inverse as a sparse LU factorization written out
    /// as eta columns: the elimination steps of `L`, then the columns of `U`
    /// in reverse pivot order. Unit columns keep their own rows; the rest
    /// are eliminated with Markowitz pivoting under a relative threshold.
    /// A column left without an acceptable pivot is made nonbasic and its
    /// row refilled with a unit column.
    fn refactor(&mut self, model: &Model) {
        self.eta_row.clear();
        self.eta_pivot.clear();
        self.eta_start.clear();
        self.eta_start.push(0);
        self.eta_idx.clear();
        self.eta_val.clear();
        self.updates = 0;
        self.repaired = false;

        let m = model.m;
        let mut filled = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        let mut rest = Vec::new();
        for &j in &self.basis {
            if j >= model.n && !filled[model.unit_row[j]] {
                filled[model.unit_row[j]] = true;
                new_basis[model.unit_row[j]] = j;
            } else {
                rest.push(j);
            }
        }
        rest.sort_unstable();

        // active submatrix by column, with row patterns and counts
        let nc = rest.len();
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nc);
        let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nc];
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut row_cnt = vec![0usize; m];
        for (k, &j) in rest.iter().enumerate() {
            let mut c = Vec::new();
            for (i, a) in model.column(j) {
                if filled[i] {
                    upper[k].push((i, a));
                } else {
                    c.push((i, a));
                    row_cols[i].push(k);
                    row_cnt[i] += 1;
                }
            }
            cols.push(c);
        }
        let mut done = vec![false; nc];
        let mut u_order: Vec<(usize, usize, f64)> = Vec::with_capacity(nc);
        let mut slot = vec![usize::MAX; m];
        let mut left = nc;

        let acceptable = |c: &[(usize, f64)], a: f64| {
            let max = c.iter().fold(0.0f64, |x, e| x.max(e.1.abs()));
            a.abs() > 10.0 * tol::PIVOT && a.abs() >= 0.1 * max
        };
        while left > 0 {
            // row singletons first, then Markowitz over the sparsest columns
            let mut pick: Option<(usize, usize)> = None;
            'rows: for i in 0..m {
                if filled[i] || row_cnt[i] != 1 {
                    continue;
                }
                for &k in &row_cols[i] {
                    if done[k] {
                        continue;
                    }
                    if let Some(&(_, a)) = cols[k].iter().find(|e| e.0 == i) {
                        if acceptable(&cols[k], a) {
                            pick = Some((k, i));
                            break 'rows;
                        }
                    }
                }
            }
            if pick.is_none() {
                let mut cand: Vec<usize> = (0..nc).filter(|&k| !done[k]).collect();
                cand.sort_by_key(|&k| cols[k].len());
                if let Some(&k) = cand.first().filter(|&&k| cols[k].is_empty()) {
                    done[k] = true;
                    left -= 1;
                    self.make_nonbasic(rest[k]);
                    self.repaired = true;
                    continue;
                }
                let mut best: Option<(usize, usize, usize)> = None;
                for (seen, &k) in cand.iter().enumerate() {
                    if seen >= 4 && best.is_some() {
                        break;
                    }
                    for &(i, a) in &cols[k] {
                        if !acceptable(&cols[k], a) {
                            continue;
                        }
                        let cost = (row_cnt[i] - 1) * (cols[k].len() - 1);
                        if best.is_none_or(|b| cost < b.0) {
                            best = Some((cost, k, i));
                        }
                    }
                }
                match best {
                    Some((_, k, i)) => pick = Some((k, i)),
                    None => {
                        for k in cand {
                            done[k] = true;
                            self.make_nonbasic(rest[k]);
                        }
                        self.repaired = true;
                        break;
                    }
                }
            }
            let (k, p) = pick.expect("pivot chosen");
            done[k] = true;
            left -= 1;
            filled[p] = true;
            new_basis[p] = rest[k];
            let col = std::mem::take(&mut cols[k]);
            let piv = col.iter().find(|e| e.0 == p).expect("pivot in column").1;
            let multipliers: Vec<(usize, f64)> = col.iter().filter(|e| e.0 != p).map(|&(i, a)| (i, a / piv)).collect();
            for &(i, _) in &col {
                row_cnt[i] -= 1;
            }
            if !multipliers.is_empty() {
                self.push_sparse_eta(p, 1.0, &multipliers);
            }
            u_order.push((k, p, piv));
            for t in 0..row_cols[p].len() {
                let c = row_cols[p][t];
                if done[c] {
                    continue;
                }
                let Some(at) = cols[c].iter().position(|e| e.0 == p) else {
                    continue;
                };
                let (_, apc) = cols[c].swap_remove(at);
                upper[c].push((p, apc));
                if multipliers.is_empty() {
                    continue;
                }
                for (idx, &(i, _)) in cols[c].iter().enumerate() {
                    slot[i] = idx;
                }
                for &(i, l) in &multipliers {
                    if slot[i] != usize::MAX {
                        cols[c][slot[i]].1 -= apc * l;
                    } else {
                        cols[c].push((i, -apc * l));
                        row_cols[i].push(c);
                        row_cnt[i] += 1;
                    }
                }
                for &(i, _) in &cols[c] {
                    slot[i] = usize::MAX;
                }
            }
        }
        for &(k, p, piv) in u_order.iter().rev() {
            let entries = std::mem::take(&mut upper[k]);
            if piv != 1.0 || !entries.is_empty() {
                self.push_sparse_eta(p, piv, &entries);
            }
        }
        for i in 0..m {
            if !filled[i] {
                new_basis[i] = model.logical_of[i].unwrap_or(model.first_artificial + i);
            }
        }
        self.basis = new_basis;
        for (i, &j) in self.basis.iter().enumerate() {
            self.pos[j] = Pos::Basic(i);
        }
    }

    fn make_nonbasic(&mut self, j: usize) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let (p, v) = if lo.is_finite() && (!hi.is_finite() || (self.x[j] - lo).abs() <= (hi - self.x[j]).abs()) {
            (Pos::Lower, lo)
        } else if hi.is_finite() {
            (Pos::Upper, hi)
        } else {
            (Pos::Zero, 0.0)
        };
        self.pos[j] = p;
        self.x[j] = v;
    }

    /// Basic values from the nonbasic ones: `x_B = B^-1 (b - N x_N)`.
    fn recompute_basics(&mut self, model: &Model) {
        let mut v = model.rhs.clone();
        for j in 0..model.ncols {
            if matches!(self.pos[j], Pos::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (i, a) in model.column(j) {
                v[i] -= a * xj;
            }
        }
        self.ftran(&mut v);
        for (i, &b) in self.basis.iter().enumerate() {
            self.x[b] = v[i];
        }
    }

    /// Reduced costs `d = c - A^T B^-T c_B` under the current costs.
    fn recompute_reduced_costs(&mut self, model: &Model) {
        let mut y: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
        self.btran(&mut y);
        let mut d = std::mem::take(&mut self.d);
        d.resize(model.ncols, 0.0);
        let (cost, pos) = (&self.cost, &self.pos);
        par::for_each_row(&mut d, PRICE_CHUNK, model.col_row.len(), |c, chunk| {
            for (off, dj) in chunk.iter_mut().enumerate() {
                let j = c * PRICE_CHUNK + off;
                *dj = if matches!(pos[j], Pos::Basic(_)) {
                    0.0
                } else {
                    model.column(j).fold(cost[j], |s, (i, a)| s - y[i] * a)
                };
            }
        });
        self.d = d;
    }

    fn refresh(&mut self, model: &Model) {
        self.refactor(model);
        self.recompute_basics(model);
        self.recompute_reduced_costs(model);
    }

    /// Entering candidate and its direction; `bland` takes the lowest index.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.d.len() {
            let dir = match self.pos[j] {
                Pos::Basic(_) => continue,
                _ if self.is_fixed(j) => continue,
                Pos::Lower if self.d[j] > tol::REDUCED_COST => 1.0,
                Pos::Upper if self.d[j] < -tol::REDUCED_COST => -1.0,
                Pos::Zero if self.d[j].abs() > tol::REDUCED_COST => self.d[j].signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| self.d[j].abs() > self.d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// `q` enters the basis at row `r`, the leaving column rests at
    /// `bound`; `col = B^-1 a_q`.
    fn replace(&mut self, r: usize, q: usize, col: &[f64], bound: f64) {
        let leaving = self.basis[r];
        self.push_eta(r, col);
        self.basis[r] = q;
        self.pos[q] = Pos::Basic(r);
        self.x[leaving] = bound;
        self.pos[leaving] = if bound == self.lower[leaving] { Pos::Lower } else { Pos::Upper };
        self.updates += 1;
        self.iterations += 1;
    }

    fn shift_basics(&mut self, col: &[f64], step: f64) {
        for (i, &a) in col.iter().enumerate() {
            if a != 0.0 {
                self.x[self.basis[i]] -= a * step;
            }
        }
    }

    /// Primal simplex with the current costs from a primal feasible basis.
    /// In phase 1 artificials leaving the basis are fixed at zero.
    fn primal(&mut self, model: &Model, deadline: Option<Instant>, max_iter: u64, phase_one: bool) -> Outcome {
        let m = model.m;
        let degenerate_cap = 2 * (m + model.ncols);
        let mut degenerate = 0usize;
        let start = self.iterations;
        let mut col = vec![0.0; m];
        self.recompute_reduced_costs(model);
        loop {
            if self.iterations - start > max_iter {
                return Outcome::Stalled;
            }
            if self.iterations.is_multiple_of(16) && deadline.is_some_and(|d| Instant::now() >= d) {
                return Outcome::Interrupted;
            }
            if self.updates >= REFACTOR_INTERVAL {
                self.refresh(model);
                if self.repaired {
                    return Outcome::Stalled;
                }
            }
            let bland = degenerate > degenerate_cap;
            let Some((q, dir)) = self.price(bland) else {
                return Outcome::Done;
            };
            self.column_into(model, q, &mut col);

            // Harris two-pass ratio test
            let mut theta_max = f64::INFINITY;
            for i in 0..m {
                let a = dir * col[i];
                if a.abs() <= tol::PIVOT {
                    continue;
                }
                let b = self.basis[i];
                let ratio = if a > 0.0 {
                    (self.x[b] - self.lower[b] + tol::FEASIBILITY) / a
                } else {
                    (self.upper[b] - self.x[b] + tol::FEASIBILITY) / -a
                };
                theta_max = theta_max.min(ratio);
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            if theta_max.is_finite() {
                for i in 0..m {
                    let a = dir * col[i];
                    if a.abs() <= tol::PIVOT {
                        continue;
                    }
                    let b = self.basis[i];
                    let (ratio, bound) = if a > 0.0 {
                        ((self.x[b] - self.lower[b]) / a, self.lower[b])
                    } else {
                        ((self.upper[b] - self.x[b]) / -a, self.upper[b])
                    };
                    if !(ratio <= theta_max) {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((r, _, _)) if bland => b < self.basis[r],
                        Some((r, _, _)) => a.abs() > col[r].abs(),
                    };
                    if better {
                        leave = Some((i, ratio.max(0.0), bound));
                    }
                }
            }
            let flip = self.upper[q] - self.lower[q];
            match leave {
                Some((r, theta, bound)) if !(flip.is_finite() && flip <= theta) => {
                    let step = dir * theta;
                    self.shift_basics(&col, step);
                    self.x[q] += step;
                    let leaving = self.basis[r];
                    self.replace(r, q, &col, bound);
                    if phase_one && model.is_artificial(leaving) {
                        self.lower[leaving] = 0.0;
                        self.upper[leaving] = 0.0;
                        self.x[leaving] = 0.0;
                        self.pos[leaving] = Pos::Lower;
                    }
                    degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };
                }
                _ if flip.is_finite() => {
                    self.shift_basics(&col, dir * flip);
                    if dir > 0.0 {
                        self.x[q] = self.upper[q];
                        self.pos[q] = Pos::Upper;
                    } else {
                        self.x[q] = self.lower[q];
                        self.pos[q] = Pos::Lower;
                    }
                    self.iterations += 1;
                    degenerate = 0;
                }
                _ => return Outcome::Unbounded,
            }
            self.recompute_reduced_costs(model);
        }
    }

    /// Dual simplex from a dual feasible basis, with steepest-edge row
    /// selection and a bound-flipping ratio test: boxed columns whose
    /// breakpoints are passed while the leaving row stays infeasible move
    /// to their opposite bound instead of entering.
    fn dual(&mut self, model: &Model, deadline: Option<Instant>, max_iter: u64) -> Outcome {
        let m = model.m;
        let start = self.iterations;
        let mut rho = vec![0.0; m];
        let mut col = vec![0.0; m];
        let mut tau = vec![0.0; m];
        let mut shift = vec![0.0; m];
        let mut alpha = vec![0.0; model.ncols];
        let mut seen = vec![false; model.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut cands: Vec<(f64, usize)> = Vec::new();
        if self.dse.len() != m {
            self.dse = vec![1.0; m];
        }
        loop {
            if self.iterations - start > max_iter {
                return Outcome::Stalled;
            }
            if self.iterations.is_multiple_of(16) && deadline.is_some_and(|d| Instant::now() >= d) {
                return Outcome::Interrupted;
            }
            if self.updates >= REFACTOR_INTERVAL {
                self.refresh(model);
                if self.repaired {
                    return Outcome::Stalled;
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut best = 0.0;
            let mut worst = 0.0f64;
            for (i, &b) in self.basis.iter().enumerate() {
                let below = self.lower[b] - self.x[b];
                let above = self.x[b] - self.upper[b];
                let (viol, target) = if below > above { (below, self.lower[b]) } else { (above, self.upper[b]) };
                if viol > tol::FEASIBILITY {
                    worst = worst.max(viol);
                    let score = viol * viol / self.dse[i];
                    if score > best {
                        best = score;
                        leave = Some((i, target));
                    }
                }
            }
            let Some((r, target)) = leave else {
                return Outcome::Done;
            };
            if worst > BLOW_UP {
                return Outcome::Stalled;
            }
            let b = self.basis[r];
            let increase = self.x[b] < target;

            // pivot row e_r^T B^-1 A, accumulated row-wise
            rho.iter_mut().for_each(|e| *e = 0.0);
            rho[r] = 1.0;
            self.btran(&mut rho);
            for &j in &touched {
                alpha[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if ri.abs() <= tol::DROP {
                    continue;
                }
                for k in model.row_start[i]..model.row_start[i + 1] {
                    let j = model.row_col[k];
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    alpha[j] += ri * model.row_val[k];
                }
            }

            cands.clear();
            for &j in &touched {
                let a = alpha[j];
                if a.abs() <= tol::PIVOT {
                    continue;
                }
                // distance of d_j from the wrong sign
                let slack = match self.pos[j] {
                    Pos::Basic(_) => continue,
                    _ if self.is_fixed(j) => continue,
                    Pos::Lower if (a < 0.0) == increase => -self.d[j],
                    Pos::Upper if (a > 0.0) == increase => self.d[j],
                    Pos::Zero => 0.0,
                    _ => continue,
                };
                cands.push((slack.max(0.0) / a.abs(), j));
            }
            if cands.is_empty() {
                return Outcome::Infeasible;
            }
            cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

            // pass breakpoints group by group while the slope stays positive
            let mut slope = (self.x[b] - target).abs();
            let mut from = 0;
            let q = loop {
                let theta_max = cands[from..]
                    .iter()
                    .map(|&(ratio, j)| ratio + tol::REDUCED_COST / alpha[j].abs())
                    .fold(f64::INFINITY, f64::min);
                let to = from + cands[from..].iter().take_while(|c| c.0 <= theta_max).count().max(1);
                let drop: f64 = cands[from..to].iter().map(|&(_, j)| alpha[j].abs() * (self.upper[j] - self.lower[j])).sum();
                if to < cands.len() && slope - drop > tol::FEASIBILITY {
                    slope -= drop;
                    from = to;
                    continue;
                }
                let mut q = cands[from].1;
                for &(_, j) in &cands[from..to] {
                    if alpha[j].abs() > alpha[q].abs() {
                        q = j;
                    }
                }
                break q;
            };
            self.column_into(model, q, &mut col);
            let arq = col[r];
            if arq.abs() <= tol::PIVOT || (arq - alpha[q]).abs() > 1e-7 * (1.0 + arq.abs()) {
                // row and column disagree: the inverse has drifted
                if self.updates == 0 {
                    return Outcome::Stalled;
                }
                self.refresh(model);
                if self.repaired {
                    return Outcome::Stalled;
                }
                continue;
            }

            // flip the passed columns and move the basics accordingly
            if from > 0 {
                shift.iter_mut().for_each(|e| *e = 0.0);
                for &(_, j) in &cands[..from] {
                    let (p, v) = match self.pos[j] {
                        Pos::Lower => (Pos::Upper, self.upper[j]),
                        _ => (Pos::Lower, self.lower[j]),
                    };
                    let step = v - self.x[j];
                    self.x[j] = v;
                    self.pos[j] = p;
                    for (i, a) in model.column(j) {
                        shift[i] += a * step;
                    }
                }
                self.ftran(&mut shift);
                self.shift_basics(&shift, 1.0);
            }

            // steepest-edge weights, from tau = B^-1 rho
            let w_r: f64 = rho.iter().map(|v| v * v).sum();
            tau.copy_from_slice(&rho);
            self.ftran(&mut tau);
            for i in 0..m {
                if i != r && col[i] != 0.0 {
                    let ratio = col[i] / arq;
                    self.dse[i] = (self.dse[i] + ratio * (ratio * w_r - 2.0 * tau[i])).max(1e-4);
                }
            }
            self.dse[r] = (w_r / (arq * arq)).max(1e-4);

            let delta = (self.x[b] - target) / arq;
            self.shift_basics(&col, delta);
            self.x[q] += delta;
            let theta_d = self.d[q] / arq;
            for &j in &touched {
                if !matches!(self.pos[j], Pos::Basic(_)) {
                    self.d[j] -= theta_d * alpha[j];
                }
            }
            self.replace(r, q, &col, target);
            self.d[q] = 0.0;
            self.d[b] = -theta_d;
        }
    }

    /// Pushes nonbasic reduced costs away from zero in their dual feasible
    /// direction, breaking the ties that make the dual stall on degenerate
    /// models. The perturbation is a fixed function of the column index.
    fn perturb_costs(&mut self) {
        for j in 0..self.d.len() {
            let dir = match self.pos[j] {
                Pos::Basic(_) | Pos::Zero => continue,
                _ if self.is_fixed(j) => continue,
                Pos::Lower => -1.0,
                Pos::Upper => 1.0,
            };
            // golden-ratio hash spreads the magnitudes over [1, 2)
            let spread = 1.0 + ((j as f64) * 0.618_033_988_749_895).fract();
            let eps = PERTURBATION * spread * (1.0 + self.cost[j].abs());
            self.cost[j] += dir * eps;
            self.d[j] += dir * eps;
        }
    }

    fn dual_infeasibility(&self) -> f64 {
        (0..self.d.len())
            .map(|j| match self.pos[j] {
                Pos::Basic(_) => 0.0,
                _ if self.is_fixed(j) => 0.0,
                Pos::Lower => self.d[j].max(0.0),
                Pos::Upper => (-self.d[j]).max(0.0),
                Pos::Zero => self.d[j].abs(),
            })
            .fold(0.0, f64::max)
    }
}

/// Reusable LP engine for one instance, warm-started across bound changes.
pub(crate) struct LpSolver<'a> {
    instance: &'a MilpInstance,
    model: Model,
    n: usize,
    engine: Option<Engine>,
    /// First optimal state, a clean basis to restart from when the working
    /// one drifts.
    root: Option<Engine>,
    pub(crate) iterations: u64,
}

impl<'a> LpSolver<'a> {
    pub(crate) fn new(instance: &'a MilpInstance) -> Self {
        let sign = match instance.sense() {
            ObjectiveSense::Maximize => 1.0,
            ObjectiveSense::Minimize => -1.0,
        };
        let model = Model::new(instance, sign);
        Self { instance, model, n: instance.num_vars(), engine: None, root: None, iterations: 0 }
    }

    fn iteration_cap(&self) -> u64 {
        20 * (self.model.m + self.model.ncols) as u64 + 1000
    }

    /// Solves under `bounds` (one pair per variable), reusing the previous
    /// basis when there is one.
    pub(crate) fn solve(&mut self, bounds: &[(f64, f64)], deadline: Option<Instant>) -> LpResult {
        if bounds.iter().any(|(l, u)| l > u) {
            return LpResult { status: LpStatus::Infeasible, values: None, objective: None, iterations: self.iterations };
        }
        if self.engine.is_some() {
            if let Some(r) = self.try_warm(bounds, deadline) {
                return r;
            }
            if self.restore_root() {
                log::debug!("warm start failed, retrying from the root basis");
                if let Some(r) = self.try_warm(bounds, deadline) {
                    return r;
                }
            }
            log::debug!("warm start failed, solving from scratch");
        }
        let status = self.cold(bounds, deadline);
        let r = self.finish(status);
        if r.status == LpStatus::Optimal && self.root.is_none() {
            self.root = self.engine.clone();
        }
        r
    }

    fn restore_root(&mut self) -> bool {
        let Some(root) = &self.root else {
            return false;
        };
        let mut fresh = root.clone();
        fresh.iterations = self.iterations;
        self.engine = Some(fresh);
        true
    }

    /// Warm re-solve whose outcome is only trusted once verified against the
    /// original rows.
    fn try_warm(&mut self, bounds: &[(f64, f64)], deadline: Option<Instant>) -> Option<LpResult> {
        let status = self.warm(bounds, deadline);
        self.iterations = self.engine.as_ref().map_or(self.iterations, |e| e.iterations);
        match status? {
            LpStatus::NumericalFailure => None,
            LpStatus::Infeasible => {
                if self.row_drift() > tol::RESIDUAL {
                    return None;
                }
                let r = self.finish(LpStatus::Infeasible);
                // the failed dual run may leave a badly scaled basis behind
                self.restore_root();
                Some(r)
            }
            status => {
                let r = self.finish(status);
                (r.status != LpStatus::NumericalFailure).then_some(r)
            }
        }
    }

    /// Largest mismatch of the current point (logicals included) against
    /// the original rows, relative to the row scale.
    fn row_drift(&mut self) -> f64 {
        let Some(e) = self.engine.as_mut() else {
            return f64::INFINITY;
        };
        let model = &self.model;
        e.recompute_basics(model);
        let mut worst = 0.0f64;
        for i in 0..model.m {
            let mut act = 0.0;
            let mut scale = model.rhs[i].abs().max(1.0);
            for k in model.row_start[i]..model.row_start[i + 1] {
                let t = model.row_val[k] * e.x[model.row_col[k]];
                act += t;
                scale = scale.max(t.abs());
            }
            worst = worst.max((act - model.rhs[i]).abs() / scale);
        }
        worst
    }

    fn finish(&mut self, status: LpStatus) -> LpResult {
        if let Some(e) = &self.engine {
            self.iterations = self.iterations.max(e.iterations);
        }
        let iterations = self.iterations;
        if status != LpStatus::Optimal {
            if status != LpStatus::Infeasible {
                // a partially optimized basis may be dual infeasible
                self.engine = None;
            }
            return LpResult { status, values: None, objective: None, iterations };
        }
        let e = self.engine.as_mut().expect("optimal solves keep their basis");
        e.recompute_basics(&self.model);
        let raw = Assignment::from_vec(e.x[..self.n].to_vec());
        let rows_ok = self.instance.constraints().iter().all(|c| c.violation(&raw) <= tol::RESIDUAL);
        let bounds_ok = raw
            .as_slice()
            .iter()
            .enumerate()
            .all(|(j, v)| *v >= e.lower[j] - tol::FEASIBILITY && *v <= e.upper[j] + tol::FEASIBILITY);
        if !rows_ok || !bounds_ok {
            log::debug!("residual check failed after {iterations} iterations");
            self.engine = None;
            return LpResult { status: LpStatus::NumericalFailure, values: None, objective: None, iterations };
        }
        let values: Vec<f64> = raw
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let (lo, hi) = (e.lower[j], e.upper[j]);
                if v <= lo + tol::BOUND {
                    lo
                } else if v >= hi - tol::BOUND {
                    hi
                } else {
                    v
                }
            })
            .collect();
        let values = Assignment::from_vec(values);
        let objective = self.instance.objective_value(&values);
        LpResult { status, values: Some(values), objective: Some(objective), iterations }
    }

    fn warm(&mut self, bounds: &[(f64, f64)], deadline: Option<Instant>) -> Option<LpStatus> {
        let cap = self.iteration_cap();
        let model = &self.model;
        let e = self.engine.as_mut()?;
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if e.lower[j] == lo && e.upper[j] == hi {
                continue;
            }
            e.lower[j] = lo;
            e.upper[j] = hi;
            if matches!(e.pos[j], Pos::Basic(_)) {
                continue;
            }
            // keep the column on its dual feasible side
            let (pos, value) = if lo == hi {
                (Pos::Lower, lo)
            } else if e.d[j] > 0.0 && hi.is_finite() {
                (Pos::Upper, hi)
            } else if lo.is_finite() {
                (Pos::Lower, lo)
            } else {
                resting_position(lo, hi)
            };
            e.pos[j] = pos;
            e.x[j] = value;
        }
        e.recompute_basics(model);
        if e.dual_infeasibility() > 1e-7 {
            return None;
        }
        let true_cost = e.cost.clone();
        e.perturb_costs();
        let outcome = e.dual(model, deadline, cap);
        e.cost = true_cost;
        match outcome {
            Outcome::Done => {}
            Outcome::Infeasible => return Some(LpStatus::Infeasible),
            Outcome::Interrupted => return Some(LpStatus::Interrupted),
            Outcome::Stalled | Outcome::Unbounded => return Some(LpStatus::NumericalFailure),
        }
        Some(match e.primal(model, deadline, cap, false) {
            Outcome::Done => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::Interrupted => LpStatus::Interrupted,
            Outcome::Infeasible | Outcome::Stalled => LpStatus::NumericalFailure,
        })
    }

    /// Cold start from the slack basis with every column on the bound its
    /// cost prefers, which is dual feasible whenever those bounds are finite.
    /// Returns `None` when that is not the case or the dual run stalls.
    fn cold_dual(&mut self, bounds: &[(f64, f64)], deadline: Option<Instant>) -> Option<LpStatus> {
        let model = &self.model;
        let (m, n, ncols) = (model.m, model.n, model.ncols);
        let mut lower = model.base_lower.clone();
        let mut upper = model.base_upper.clone();
        let mut x = vec![0.0; ncols];
        let mut pos = vec![Pos::Lower; ncols];
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            lower[j] = lo;
            upper[j] = hi;
            let c = model.cost[j];
            (pos[j], x[j]) = if c > 0.0 && hi.is_finite() {
                (Pos::Upper, hi)
            } else if c < 0.0 && lo.is_finite() {
                (Pos::Lower, lo)
            } else if c == 0.0 {
                resting_position(lo, hi)
            } else {
                return None;
            };
        }
        let basis: Vec<usize> = (0..m).map(|i| model.logical_of[i].unwrap_or(model.first_artificial + i)).collect();
        for (i, &b) in basis.iter().enumerate() {
            pos[b] = Pos::Basic(i);
        }
        let mut e = Engine {
            lower,
            upper,
            x,
            pos,
            basis,
            cost: model.cost.clone(),
            d: model.cost.clone(),
            eta_row: Vec::new(),
            eta_pivot: Vec::new(),
            eta_start: vec![0],
            eta_idx: Vec::new(),
            eta_val: Vec::new(),
            updates: 0,
            repaired: false,
            dse: vec![1.0; m],
            iterations: self.iterations,
        };
        debug_assert!(n <= ncols);
        e.recompute_basics(model);
        let cap = self.iteration_cap();
        let true_cost = e.cost.clone();
        e.perturb_costs();
        let outcome = e.dual(model, deadline, cap);
        e.cost = true_cost;
        self.iterations = e.iterations;
        let status = match outcome {
            Outcome::Done => match e.primal(model, deadline, cap, false) {
                Outcome::Done => LpStatus::Optimal,
                Outcome::Unbounded => LpStatus::Unbounded,
                Outcome::Interrupted => LpStatus::Interrupted,
                Outcome::Infeasible | Outcome::Stalled => return None,
            },
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Interrupted => LpStatus::Interrupted,
            Outcome::Stalled | Outcome::Unbounded => return None,
        };
        self.iterations = e.iterations;
        self.engine = Some(e);
        if status == LpStatus::Infeasible && self.row_drift() > tol::RESIDUAL {
            self.engine = None;
            return None;
        }
        Some(status)
    }

    fn cold(&mut self, bounds: &[(f64, f64)], deadline: Option<Instant>) -> LpStatus {
        if let Some(status) = self.cold_dual(bounds, deadline) {
            return status;
        }
        let model = &self.model;
        let (m, n, ncols) = (model.m, model.n, model.ncols);
        let cap = self.iteration_cap();

        let mut lower = model.base_lower.clone();
        let mut upper = model.base_upper.clone();
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            lower[j] = lo;
            upper[j] = hi;
        }
        let mut x = vec![0.0; ncols];
        let mut pos = vec![Pos::Lower; ncols];
        for j in 0..model.first_artificial {
            (pos[j], x[j]) = resting_position(lower[j], upper[j]);
        }
        let mut resid = model.rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for (i, a) in model.column(j) {
                    resid[i] -= a * x[j];
                }
            }
        }
        // a logical absorbs its row's residual when it can; otherwise the
        // row's artificial does, bounded on the residual's side
        let mut basis = vec![0usize; m];
        let mut cost = vec![0.0; ncols];
        for i in 0..m {
            if let Some(s) = model.logical_of[i] {
                if resid[i] >= lower[s] && resid[i] <= upper[s] {
                    basis[i] = s;
                    pos[s] = Pos::Basic(i);
                    x[s] = resid[i];
                    continue;
                }
            }
            let a = model.first_artificial + i;
            if resid[i] >= 0.0 {
                upper[a] = f64::INFINITY;
                cost[a] = -1.0;
            } else {
                lower[a] = f64::NEG_INFINITY;
                cost[a] = 1.0;
            }
            basis[i] = a;
            pos[a] = Pos::Basic(i);
            x[a] = resid[i];
        }

        let mut e = Engine {
            lower,
            upper,
            x,
            pos,
            basis,
            cost,
            d: vec![0.0; ncols],
            eta_row: Vec::new(),
            eta_pivot: Vec::new(),
            eta_start: vec![0],
            eta_idx: Vec::new(),
            eta_val: Vec::new(),
            updates: 0,
            repaired: false,
            dse: vec![1.0; m],
            iterations: self.iterations,
        };
        self.engine = None;

        let artificial = model.first_artificial..ncols;
        if e.cost.iter().any(|c| *c != 0.0) {
            let outcome = e.primal(model, deadline, cap, true);
            self.iterations = e.iterations;
            match outcome {
                Outcome::Done => {}
                Outcome::Interrupted => return LpStatus::Interrupted,
                _ => return LpStatus::NumericalFailure,
            }
            e.recompute_basics(model);
            let infeasibility: f64 = artificial.clone().map(|j| e.x[j].abs()).sum();
            if infeasibility > tol::FEASIBILITY {
                return LpStatus::Infeasible;
            }
        }
        for j in artificial {
            e.lower[j] = 0.0;
            e.upper[j] = 0.0;
            if !matches!(e.pos[j], Pos::Basic(_)) {
                e.x[j] = 0.0;
                e.pos[j] = Pos::Lower;
            }
        }
        e.cost = model.cost.clone();
        let status = match e.primal(model, deadline, cap, false) {
            Outcome::Done => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::Interrupted => LpStatus::Interrupted,
            Outcome::Infeasible | Outcome::Stalled => LpStatus::NumericalFailure,
        };
        self.iterations = e.iterations;
        self.engine = Some(e);
        status
    }
}
