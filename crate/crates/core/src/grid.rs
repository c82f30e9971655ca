//! Unit-cell network area, sensing/mobility windows and coverage accounting.
//!
//! Cells are addressed with 1-based `(i, j)` coordinates, `i` the row and `j`
//! the column. Both the sensing footprint and the one-step reachable window
//! are axis-aligned squares (Chebyshev balls) clipped at the grid edge; cells
//! outside the grid simply do not exist.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::formulations::{MobilePlan, StaticDeployment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("cell {cell} lies outside the {rows}x{cols} grid")]
    OutOfGrid { cell: Cell, rows: usize, cols: usize },
    #[error("overlap factor must be at least 1")]
    ZeroOverlap,
    #[error("plan positions outside the grid at (l, k) = {0:?}")]
    PlanOutOfGrid(Vec<(usize, usize)>),
}

/// Grid cell coordinate, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

impl From<(usize, usize)> for Cell {
    fn from((i, j): (usize, usize)) -> Self {
        Self { i, j }
    }
}

/// An `M x N` lattice of unit cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::EmptyGrid { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `|C| = M * N`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, cell: Cell) -> bool {
        (1..=self.rows).contains(&cell.i) && (1..=self.cols).contains(&cell.j)
    }

    pub fn check(&self, cell: Cell) -> Result<(), GridError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(GridError::OutOfGrid { cell, rows: self.rows, cols: self.cols })
        }
    }

    /// Row-major dense index of an in-grid cell.
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell));
        (cell.i - 1) * self.cols + (cell.j - 1)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.cols + 1, index % self.cols + 1)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|k| self.cell_at(k))
    }

    pub fn is_boundary(&self, cell: Cell) -> bool {
        cell.i == 1 || cell.i == self.rows || cell.j == 1 || cell.j == self.cols
    }

    /// The perimeter set `B`. Single-row or single-column grids are entirely
    /// boundary.
    pub fn boundary_cells(&self) -> CellSet {
        let mut set = CellSet::empty(*self);
        for cell in self.cells().filter(|c| self.is_boundary(*c)) {
            set.insert(cell);
        }
        set
    }

    /// `A = C \ B`.
    pub fn interior_cells(&self) -> CellSet {
        self.boundary_cells().complement()
    }

    pub fn all_cells(&self) -> CellSet {
        CellSet::full(*self)
    }

    /// Clipped window `{(i+p, j+q) : |p| <= di, |q| <= dj}`, row-major.
    pub fn window(&self, center: Cell, di: usize, dj: usize) -> Result<Vec<Cell>, GridError> {
        self.check(center)?;
        Ok(self.window_unchecked(center, di, dj).collect())
    }

    pub(crate) fn window_unchecked(
        &self,
        center: Cell,
        di: usize,
        dj: usize,
    ) -> impl Iterator<Item = Cell> {
        let i0 = center.i.saturating_sub(di).max(1);
        let i1 = (center.i + di).min(self.rows);
        let j0 = center.j.saturating_sub(dj).max(1);
        let j1 = (center.j + dj).min(self.cols);
        (i0..=i1).flat_map(move |i| (j0..=j1).map(move |j| Cell::new(i, j)))
    }
}

/// Cells sensed by a node at `center`: the clipped `(2r+1) x (2r+1)` square.
pub fn sensing_footprint(center: Cell, r_s: usize, grid: &GridSpec) -> Result<Vec<Cell>, GridError> {
    grid.window(center, r_s, r_s)
}

/// Cells a mobile node at `center` may occupy in the next iteration,
/// including `center` itself.
pub fn reachable_window(
    center: Cell,
    rho_x: usize,
    rho_y: usize,
    grid: &GridSpec,
) -> Result<Vec<Cell>, GridError> {
    grid.window(center, rho_x, rho_y)
}

pub fn boundary_cells(grid: &GridSpec) -> CellSet {
    grid.boundary_cells()
}

/// Dense membership set over the cells of one grid, iterated row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    grid: GridSpec,
    members: Vec<bool>,
    count: usize,
}

impl CellSet {
    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, members: vec![false; grid.len()], count: 0 }
    }

    pub fn full(grid: GridSpec) -> Self {
        Self { grid, members: vec![true; grid.len()], count: grid.len() }
    }

    pub fn from_cells<I: IntoIterator<Item = Cell>>(grid: GridSpec, cells: I) -> Result<Self, GridError> {
        let mut set = Self::empty(grid);
        for cell in cells {
            grid.check(cell)?;
            set.insert(cell);
        }
        Ok(set)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.grid.contains(cell) && self.members[self.grid.index(cell)]
    }

    /// Returns `true` if the cell was newly added.
    pub fn insert(&mut self, cell: Cell) -> bool {
        let k = self.grid.index(cell);
        if self.members[k] {
            false
        } else {
            self.members[k] = true;
            self.count += 1;
            true
        }
    }

    pub fn remove(&mut self, cell: Cell) -> bool {
        let k = self.grid.index(cell);
        if self.members[k] {
            self.members[k] = false;
            self.count -= 1;
            true
        } else {
            false
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.members.iter().enumerate().filter(|(_, m)| **m).map(|(k, _)| self.grid.cell_at(k))
    }

    pub fn complement(&self) -> Self {
        let members: Vec<bool> = self.members.iter().map(|m| !m).collect();
        Self { grid: self.grid, count: self.grid.len() - self.count, members }
    }

    pub fn union_with(&mut self, other: &CellSet) {
        debug_assert_eq!(self.grid, other.grid);
        for (k, m) in other.members.iter().enumerate() {
            if *m && !self.members[k] {
                self.members[k] = true;
                self.count += 1;
            }
        }
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.members.iter().zip(&other.members).all(|(a, b)| !(*a && *b))
    }

    pub fn to_vec(&self) -> Vec<Cell> {
        self.iter().collect()
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Node capabilities shared by static and mobile sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorParams {
    pub r_s: usize,
    pub rho_x: usize,
    pub rho_y: usize,
    pub c_o: usize,
}

impl SensorParams {
    pub fn new(r_s: usize, rho_x: usize, rho_y: usize, c_o: usize) -> Result<Self, GridError> {
        if c_o == 0 {
            return Err(GridError::ZeroOverlap);
        }
        Ok(Self { r_s, rho_x, rho_y, c_o })
    }
}

impl Default for SensorParams {
    fn default() -> Self {
        Self { r_s: 1, rho_x: 2, rho_y: 2, c_o: 3 }
    }
}

/// Coverage ratio kept as an exact `covered / total` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoverageRatio {
    pub covered: usize,
    pub total: usize,
}

impl CoverageRatio {
    pub fn as_f64(&self) -> f64 {
        self.covered as f64 / self.total as f64
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.as_f64()
    }

    pub fn is_full(&self) -> bool {
        self.covered == self.total
    }
}

impl PartialOrd for CoverageRatio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CoverageRatio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.covered * other.total).cmp(&(other.covered * self.total))
    }
}

impl fmt::Display for CoverageRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.covered, self.total)
    }
}

/// Number of cells a coverage ratio target demands, `ceil(cr * |C|)`.
///
/// A relative slack of 1e-9 absorbs binary representation error so that e.g.
/// `0.95 * 100` asks for 95 cells, not 96.
pub fn required_cells(cr_target: f64, total: usize) -> usize {
    let want = cr_target * total as f64;
    let want = (want - 1e-9 * want.abs().max(1.0)).ceil();
    want.clamp(0.0, total as f64) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub covered: CellSet,
    pub ratio: CoverageRatio,
    /// Mobile footprints containing each cell; static coverage not counted.
    pub multiplicity: BTreeMap<Cell, usize>,
    pub movements: usize,
}

impl CoverageReport {
    pub fn max_multiplicity(&self) -> usize {
        self.multiplicity.values().copied().max().unwrap_or(0)
    }
}

/// Partition `C` into `(C_2, C_1)`: cells covered by the static nodes and the rest.
pub fn static_coverage(
    placements: &[Cell],
    r_s: usize,
    grid: &GridSpec,
) -> Result<(CellSet, CellSet), GridError> {
    let mut covered = CellSet::empty(*grid);
    for &p in placements {
        for cell in sensing_footprint(p, r_s, grid)? {
            covered.insert(cell);
        }
    }
    let uncovered = covered.complement();
    Ok((covered, uncovered))
}

/// Union of static coverage and every mobile footprint of the plan.
pub fn evaluate_plan(
    deployment: &StaticDeployment,
    plan: &MobilePlan,
    params: &SensorParams,
    grid: &GridSpec,
) -> Result<CoverageReport, GridError> {
    let offending: Vec<(usize, usize)> = plan
        .placements()
        .filter(|(_, _, cell)| !grid.contains(*cell))
        .map(|(l, k, _)| (l, k))
        .collect();
    if !offending.is_empty() {
        return Err(GridError::PlanOutOfGrid(offending));
    }

    let mut covered = deployment.covered.clone();
    let mut multiplicity = BTreeMap::new();
    let mut movements = 0;
    for (_, _, center) in plan.placements() {
        movements += 1;
        for cell in grid.window_unchecked(center, params.r_s, params.r_s) {
            covered.insert(cell);
            *multiplicity.entry(cell).or_insert(0) += 1;
        }
    }
    let ratio = CoverageRatio { covered: covered.len(), total: grid.len() };
    Ok(CoverageReport { covered, ratio, multiplicity, movements })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: usize, n: usize) -> GridSpec {
        GridSpec::new(m, n).unwrap()
    }

    fn cells(v: &[(usize, usize)]) -> Vec<Cell> {
        v.iter().map(|&c| c.into()).collect()
    }

    #[test]
    fn footprint_interior_and_corner() {
        let grid = g(3, 3);
        assert_eq!(sensing_footprint(Cell::new(2, 2), 1, &grid).unwrap().len(), 9);
        assert_eq!(
            sensing_footprint(Cell::new(1, 1), 1, &grid).unwrap(),
            cells(&[(1, 1), (1, 2), (2, 1), (2, 2)])
        );
    }

    #[test]
    fn footprint_enumerated_by_hand() {
        let got = sensing_footprint(Cell::new(5, 5), 1, &g(10, 10)).unwrap();
        let mut want = Vec::new();
        for i in 4..=6 {
            for j in 4..=6 {
                want.push(Cell::new(i, j));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn footprint_rejects_outside_center() {
        let err = sensing_footprint(Cell::new(4, 1), 1, &g(3, 3)).unwrap_err();
        assert!(matches!(err, GridError::OutOfGrid { .. }));
        assert!(sensing_footprint(Cell::new(0, 1), 1, &g(3, 3)).is_err());
    }

    #[test]
    fn reachable_windows() {
        let grid = g(10, 10);
        assert_eq!(reachable_window(Cell::new(3, 3), 2, 2, &grid).unwrap().len(), 25);
        assert_eq!(reachable_window(Cell::new(1, 1), 2, 2, &grid).unwrap().len(), 9);
        let w = reachable_window(Cell::new(2, 4), 1, 2, &g(4, 8)).unwrap();
        assert_eq!(w.len(), 15);
        assert!(w.iter().all(|c| (1..=3).contains(&c.i) && (2..=6).contains(&c.j)));
        assert!(reachable_window(Cell::new(9, 9), 0, 0, &g(8, 8)).is_err());
    }

    #[test]
    fn boundary_counts() {
        assert_eq!(g(8, 8).boundary_cells().len(), 28);
        assert_eq!(g(2, 2).boundary_cells().len(), 4);
        assert_eq!(g(10, 10).boundary_cells().len(), 36);
        assert_eq!(g(1, 7).boundary_cells().len(), 7);
        assert_eq!(g(5, 1).interior_cells().len(), 0);
        assert_eq!(g(4, 6).interior_cells().len(), 8);
    }

    #[test]
    fn static_coverage_examples() {
        let grid = g(3, 3);
        let (c2, c1) = static_coverage(&[], 1, &grid).unwrap();
        assert!(c2.is_empty());
        assert_eq!(c1.len(), 9);

        let (c2, c1) = static_coverage(&[Cell::new(2, 2)], 1, &grid).unwrap();
        assert_eq!(c2.len(), 9);
        assert!(c1.is_empty());

        let grid = g(3, 6);
        let (c2, c1) = static_coverage(&cells(&[(2, 2), (2, 5)]), 1, &grid).unwrap();
        assert_eq!(c2.len(), 18);
        assert!(c1.is_empty());
    }

    #[test]
    fn coverage_ratio_is_exact() {
        let a = CoverageRatio { covered: 55, total: 64 };
        assert_eq!(a.to_string(), "55/64");
        assert!((a.percent() - 85.9375).abs() < 1e-12);
        assert!(CoverageRatio { covered: 1, total: 2 } == CoverageRatio { covered: 1, total: 2 });
        assert!(CoverageRatio { covered: 2, total: 4 }.cmp(&CoverageRatio { covered: 1, total: 2 }).is_eq());
    }

    #[test]
    fn required_cells_rounds_up_without_float_noise() {
        assert_eq!(required_cells(1.0, 100), 100);
        assert_eq!(required_cells(0.95, 100), 95);
        assert_eq!(required_cells(0.951, 100), 96);
        assert_eq!(required_cells(0.0, 64), 0);
        assert_eq!(required_cells(0.5, 9), 5);
    }

    #[test]
    fn cellset_ops() {
        let grid = g(3, 4);
        let mut s = CellSet::empty(grid);
        assert!(s.insert(Cell::new(1, 2)));
        assert!(!s.insert(Cell::new(1, 2)));
        assert!(s.contains(Cell::new(1, 2)));
        assert!(!s.contains(Cell::new(9, 9)));
        let c = s.complement();
        assert_eq!(c.len(), 11);
        assert!(s.is_disjoint(&c));
        let mut u = s.clone();
        u.union_with(&c);
        assert_eq!(u, CellSet::full(grid));
        assert!(s.remove(Cell::new(1, 2)));
        assert!(s.is_empty());
    }
}
