//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the simplex or the branch-and-bound.
#![allow(dead_code)]

use gridcover::milp::{MilpInstance, ObjectiveSense, Sense, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-7;

/// Small dense (MI)LP with finite bounds on every variable.
#[derive(Debug, Clone)]
pub struct Dense {
    pub maximize: bool,
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
}

impl Dense {
    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn to_instance(&self) -> MilpInstance {
        let sense = if self.maximize { ObjectiveSense::Maximize } else { ObjectiveSense::Minimize };
        let mut m = MilpInstance::new(sense);
        let vars: Vec<_> = (0..self.n())
            .map(|j| {
                let kind = if self.binary[j] { VarKind::Binary } else { VarKind::Continuous };
                m.add_variable(format!("x{j}"), kind, self.lower[j], self.upper[j]).unwrap()
            })
            .collect();
        let terms = |row: &[f64]| -> Vec<_> {
            row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (vars[j], *a)).collect()
        };
        m.set_objective(sense, terms(&self.cost)).unwrap();
        for (a, s, b) in &self.rows {
            m.add_constraint(terms(a), *s, *b).unwrap();
        }
        m
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let bounds = x.iter().enumerate().all(|(j, v)| *v >= self.lower[j] - tol && *v <= self.upper[j] + tol);
        bounds
            && self.rows.iter().all(|(a, s, b)| {
                let lhs: f64 = a.iter().zip(x).map(|(a, v)| a * v).sum();
                match s {
                    Sense::Le => lhs <= b + tol,
                    Sense::Ge => lhs >= b - tol,
                    Sense::Eq => (lhs - b).abs() <= tol,
                }
            })
    }
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[p][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Best objective over the vertices of the (bounded) feasible region, or
/// `None` if it has no vertex, i.e. is empty.
pub fn lp_by_vertices(p: &Dense) -> Option<f64> {
    let n = p.n();
    if n == 0 {
        return p.feasible(&[], 1e-7).then_some(0.0);
    }
    let mut planes: Vec<(Vec<f64>, f64)> = p.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lower[j]));
        planes.push((e, p.upper[j]));
    }
    let mut best: Option<f64> = None;
    for_each_subset(planes.len(), n, &mut |idx| {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if p.feasible(&x, 1e-7) {
                let z = p.objective(&x);
                let better = match best {
                    None => true,
                    Some(b) => (p.maximize && z > b) || (!p.maximize && z < b),
                };
                if better {
                    best = Some(z);
                }
            }
        }
    });
    best
}

/// Optimum over all binary assignments, the continuous part of each solved
/// by vertex enumeration.
pub fn milp_by_enumeration(p: &Dense) -> Option<f64> {
    let bins: Vec<usize> = (0..p.n()).filter(|&j| p.binary[j]).collect();
    let conts: Vec<usize> = (0..p.n()).filter(|&j| !p.binary[j]).collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let fixed: Vec<f64> = (0..bins.len()).map(|b| f64::from((mask >> b) & 1)).collect();
        let mut sub = Dense {
            maximize: p.maximize,
            cost: conts.iter().map(|&j| p.cost[j]).collect(),
            rows: Vec::new(),
            lower: conts.iter().map(|&j| p.lower[j]).collect(),
            upper: conts.iter().map(|&j| p.upper[j]).collect(),
            binary: vec![false; conts.len()],
        };
        if bins.iter().zip(&fixed).any(|(&j, v)| *v < p.lower[j] || *v > p.upper[j]) {
            continue;
        }
        let constant: f64 = bins.iter().zip(&fixed).map(|(&j, v)| p.cost[j] * v).sum();
        for (a, s, b) in &p.rows {
            let shift: f64 = bins.iter().zip(&fixed).map(|(&j, v)| a[j] * v).sum();
            sub.rows.push((conts.iter().map(|&j| a[j]).collect(), *s, b - shift));
        }
        if let Some(z) = lp_by_vertices(&sub) {
            let z = z + constant;
            let better = match best {
                None => true,
                Some(b) => (p.maximize && z > b) || (!p.maximize && z < b),
            };
            if better {
                best = Some(z);
            }
        }
    }
    best
}

pub fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    random_dense(&mut rng, n, m, 0)
}

/// Tiny MILP with up to `max_bins` binaries and at most two continuous
/// variables.
pub fn random_milp(seed: u64, max_bins: usize, max_rows: usize) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.gen_range(1..=max_bins);
    let nc = rng.gen_range(0..=2);
    let m = rng.gen_range(1..=max_rows);
    random_dense(&mut rng, nb + nc, m, nb)
}

fn random_dense(rng: &mut ChaCha8Rng, n: usize, m: usize, n_bin: usize) -> Dense {
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for j in 0..n {
        if j < n_bin {
            lower.push(0.0);
            upper.push(1.0);
        } else {
            let lo = f64::from(rng.gen_range(-3i32..=1));
            lower.push(lo);
            upper.push(lo + f64::from(rng.gen_range(1i32..=6)));
        }
    }
    let cost = (0..n).map(|_| f64::from(rng.gen_range(-5i32..=5))).collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.7) { f64::from(rng.gen_range(-4i32..=4)) } else { 0.0 })
                .collect();
            let sense = match rng.gen_range(0..10) {
                0 => Sense::Eq,
                1..=2 => Sense::Ge,
                _ => Sense::Le,
            };
            let b = f64::from(rng.gen_range(-4i32..=8));
            (a, sense, b)
        })
        .collect();
    Dense { maximize: rng.gen_bool(0.5), cost, rows, lower, upper, binary: (0..n).map(|j| j < n_bin).collect() }
}

/// Cells of an `m x n` grid, 1-based, row-major.
pub fn cells(m: usize, n: usize) -> Vec<(usize, usize)> {
    (1..=m).flat_map(|i| (1..=n).map(move |j| (i, j))).collect()
}

pub fn within(a: (usize, usize), b: (usize, usize), di: usize, dj: usize) -> bool {
    a.0.abs_diff(b.0) <= di && a.1.abs_diff(b.1) <= dj
}

/// Non-decreasing index tuples of length `k` over `0..n`.
fn multisets(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Best boundary-weighted per-node coverage over all placements of `ns`
/// nodes whose footprints overlap at most `c_o` times per cell.
pub fn static_oracle(m: usize, n: usize, ns: usize, r_s: usize, c_o: usize, alpha: f64) -> Option<(f64, Vec<(usize, usize)>)> {
    let all = cells(m, n);
    let weight = |c: (usize, usize)| if c.0 == 1 || c.0 == m || c.1 == 1 || c.1 == n { alpha } else { 1.0 };
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    multisets(all.len(), ns, &mut |idx| {
        let mut value = 0.0;
        for &c in &all {
            let k = idx.iter().filter(|&&p| within(all[p], c, r_s, r_s)).count();
            if k > c_o {
                return;
            }
            value += k as f64 * weight(c);
        }
        if best.as_ref().is_none_or(|(b, _)| value > *b + 1e-9) {
            best = Some((value, idx.iter().map(|&p| all[p]).collect()));
        }
    });
    best
}

/// Paths of exactly `len` steps through `domain` with Chebyshev moves.
fn paths(domain: &[(usize, usize)], len: usize, rho: (usize, usize)) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for p in &out {
            for c in 0..domain.len() {
                if p.last().is_none_or(|&q| within(domain[q], domain[c], rho.0, rho.1)) {
                    let mut q = p.clone();
                    q.push(c);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

/// Per-cell footprint counts of a set of node paths over `domain`, or `None`
/// if some cell exceeds `c_o`.
fn counts(domain: &[(usize, usize)], chosen: &[&Vec<usize>], r_s: usize, c_o: usize) -> Option<Vec<usize>> {
    let mut cnt = vec![0usize; domain.len()];
    for p in chosen {
        for &pos in p.iter() {
            for (c, slot) in cnt.iter_mut().enumerate() {
                if within(domain[pos], domain[c], r_s, r_s) {
                    *slot += 1;
                }
            }
        }
    }
    cnt.iter().all(|&k| k <= c_o).then_some(cnt)
}

pub struct MobileCase<'a> {
    /// Uncovered cells; positions and counted coverage are confined to them.
    pub domain: &'a [(usize, usize)],
    pub nodes: usize,
    pub k_max: usize,
    pub r_s: usize,
    pub rho: (usize, usize),
    pub c_o: usize,
}

/// Most domain cells covered by `nodes` paths of exactly `k_max` steps.
pub fn cov_oracle(case: &MobileCase<'_>) -> Option<usize> {
    let ps = paths(case.domain, case.k_max, case.rho);
    let mut best = None;
    multisets(ps.len(), case.nodes, &mut |idx| {
        let chosen: Vec<&Vec<usize>> = idx.iter().map(|&i| &ps[i]).collect();
        if let Some(cnt) = counts(case.domain, &chosen, case.r_s, case.c_o) {
            let covered = cnt.iter().filter(|&&k| k > 0).count();
            best = Some(best.map_or(covered, |b: usize| b.max(covered)));
        }
    });
    best
}

/// Fewest placements (each node a prefix path of at most `k_max` steps)
/// covering at least `need` domain cells.
pub fn mov_oracle(case: &MobileCase<'_>, need: usize) -> Option<usize> {
    let ps: Vec<Vec<usize>> = (0..=case.k_max).flat_map(|t| paths(case.domain, t, case.rho)).collect();
    let mut best = None;
    multisets(ps.len(), case.nodes, &mut |idx| {
        let chosen: Vec<&Vec<usize>> = idx.iter().map(|&i| &ps[i]).collect();
        let moves: usize = chosen.iter().map(|p| p.len()).sum();
        if best.is_some_and(|b| moves >= b) {
            return;
        }
        if let Some(cnt) = counts(case.domain, &chosen, case.r_s, case.c_o) {
            if cnt.iter().filter(|&&k| k > 0).count() >= need {
                best = Some(moves);
            }
        }
    });
    best
}
