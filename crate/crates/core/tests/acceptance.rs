//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines reach the console. Exits
//! nonzero if any criterion fails, except those listed in
//! [`KNOWN_UNATTAINABLE`], which are still evaluated and reported as FAIL.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{cov_oracle, milp_by_enumeration, mov_oracle, random_milp, static_oracle, MobileCase};
use gridcover::formulations::{build_milp_cov, build_milp_mov, build_milp_static, decode_static, FormulationHandle};
use gridcover::harness::{self, mean_coverage, ExperimentConfig, MobileMethod, ResultRow, StaticMethod};
use gridcover::{solve_milp, Cell, CellSet, GridSpec, MilpStatus, SolveParams};

/// Criteria whose target value cannot be met by any valid solution.
/// 3c: five pairwise-disjoint unclipped 3x3 footprints do not fit in 8x8.
const KNOWN_UNATTAINABLE: &[&str] = &["3c"];

/// Time limit for the one solve that does not close within desk-scale time
/// (10x10, L=3, K_max=4, no static nodes).
const COV_TIME_LIMIT: Duration = Duration::from_secs(20);

struct Gate {
    results: Vec<(String, bool)>,
    /// Worst coverage-variable fractionality seen in criteria 2-6.
    fractionality: f64,
    solved: usize,
}

impl Gate {
    fn report(&mut self, id: &str, title: &str, pass: bool, detail: String, started: Instant) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:<3} {verdict}  {title}: {detail} [{:.1}s]", started.elapsed().as_secs_f64());
        self.results.push((id.to_string(), pass));
    }

    fn integrality(&mut self, h: &FormulationHandle, a: &gridcover::Assignment) {
        for v in h.coverage_vars() {
            let x = a.value(v);
            self.fractionality = self.fractionality.max((x - x.round()).abs());
        }
        self.solved += 1;
    }

    fn rows(&mut self, rows: &[ResultRow]) {
        for r in rows {
            if let Some(f) = r.fractionality {
                self.fractionality = self.fractionality.max(f);
                self.solved += 1;
            }
        }
    }
}

fn cells_of(set: &CellSet) -> Vec<(usize, usize)> {
    set.iter().map(|c| (c.i, c.j)).collect()
}

fn show(cells: &[Cell]) -> String {
    cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn required(cr: f64, total: usize) -> usize {
    ((cr * total as f64) - 1e-9).ceil() as usize
}

fn criterion_1(gate: &mut Gate) {
    let t = Instant::now();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for m in [8, 10, 12] {
        for n in [8, 10, 12] {
            let grid = GridSpec::new(m, n).unwrap();
            let c = m * n;
            let all = CellSet::full(grid);
            for ns in [1, 3, 5, 10] {
                let s = build_milp_static(&grid, ns, 1, 1, 4.0).unwrap().instance.stats();
                let want = (ns * c, ns * c, ns + (ns + 1) * c);
                if (s.n_binary, s.n_continuous, s.n_constraints) != want {
                    mismatches.push(format!("static {m}x{n} ns={ns}"));
                }
                checked += 1;
                for l in [1, 3, 5] {
                    for k in [1, 4] {
                        let cov = build_milp_cov(&grid, &all, l, k, 1, 2, 2, 3).unwrap().instance.stats();
                        let mov = build_milp_mov(&grid, &all, 0, l, k, 1, 2, 2, 3, 1.0).unwrap().instance.stats();
                        let cons = (l * k * (3 * c + 1) + 2 * c) as i64 - (l * c) as i64;
                        let want = (l * k * c, l * k * c + c, cons as usize);
                        if (cov.n_binary, cov.n_continuous, cov.n_constraints) != want {
                            mismatches.push(format!("cov {m}x{n} L={l} K={k}"));
                        }
                        if (mov.n_binary, mov.n_continuous, mov.n_constraints) != (want.0, want.1, want.2 + 1) {
                            mismatches.push(format!("mov {m}x{n} L={l} K={k}"));
                        }
                        checked += 2;
                    }
                }
            }
        }
    }
    let fast = t.elapsed() < Duration::from_secs(1);
    let detail = format!("{checked} instances, {} mismatches {:?}, under 1 s: {fast}", mismatches.len(), mismatches);
    gate.report("1", "instance statistics match closed forms", mismatches.is_empty() && fast, detail, t);
}

fn criterion_2(gate: &mut Gate) {
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut random_cases = 0;
    for seed in 0..60 {
        let p = random_milp(seed, 12, 10);
        let r = solve_milp(&p.to_instance(), &SolveParams::default()).unwrap();
        let ok = match milp_by_enumeration(&p) {
            None => r.status == MilpStatus::Infeasible,
            Some(z) => r.status == MilpStatus::Optimal && (r.objective.unwrap() - z).abs() <= 1e-6,
        };
        if !ok {
            failures.push(format!("random seed {seed}"));
        }
        random_cases += 1;
    }

    let mut formulation_cases = 0;
    let mut solve = |gate: &mut Gate, h: &FormulationHandle, want: Option<f64>, label: String| {
        let r = solve_milp(&h.instance, &SolveParams::default()).unwrap();
        if let Some(a) = &r.incumbent {
            gate.integrality(h, a);
        }
        let ok = match want {
            None => r.status == MilpStatus::Infeasible,
            Some(z) => r.status == MilpStatus::Optimal && (r.objective.unwrap() - z).abs() <= 1e-6,
        };
        if !ok {
            failures.push(format!("{label}: solver {:?} {:?}, oracle {want:?}", r.status, r.objective));
        }
        formulation_cases += 1;
    };

    for (m, max_ns) in [(3, 3), (4, 3)] {
        let grid = GridSpec::new(m, m).unwrap();
        for ns in 1..=max_ns {
            for c_o in [1, 2] {
                let h = build_milp_static(&grid, ns, 1, c_o, 4.0).unwrap();
                let want = static_oracle(m, m, ns, 1, c_o, 4.0).map(|(v, _)| v);
                solve(gate, &h, want, format!("static {m}x{m} ns={ns} c_o={c_o}"));
            }
        }
    }

    // uncovered sets: the whole grid, and what one static node at (2,2) leaves
    let domains = |m: usize| {
        let grid = GridSpec::new(m, m).unwrap();
        let full = CellSet::full(grid);
        let (_, rest) = gridcover::grid::static_coverage(&[Cell::new(2, 2)], 1, &grid).unwrap();
        if m == 3 { vec![full] } else { vec![full, rest] }
    };
    for m in [3, 4] {
        let grid = GridSpec::new(m, m).unwrap();
        for c1 in domains(m) {
            let dom = cells_of(&c1);
            let static_covered = grid.len() - c1.len();
            for l in 1..=2 {
                for k in 1..=3 {
                    for c_o in [1, 3] {
                        let case = MobileCase { domain: &dom, nodes: l, k_max: k, r_s: 1, rho: (2, 2), c_o };
                        let h = build_milp_cov(&grid, &c1, l, k, 1, 2, 2, c_o).unwrap();
                        let want = cov_oracle(&case).map(|v| v as f64);
                        solve(gate, &h, want, format!("cov {m}x{m} |C1|={} L={l} K={k} c_o={c_o}", dom.len()));
                        for cr in [1.0, 0.75] {
                            let need = required(cr, grid.len()).saturating_sub(static_covered);
                            let h = build_milp_mov(&grid, &c1, static_covered, l, k, 1, 2, 2, c_o, cr).unwrap();
                            let want = mov_oracle(&case, need).map(|v| v as f64);
                            let label = format!("mov {m}x{m} |C1|={} L={l} K={k} c_o={c_o} cr={cr}", dom.len());
                            solve(gate, &h, want, label);
                        }
                    }
                }
            }
        }
    }
    let fast = t.elapsed() < Duration::from_secs(120);
    let pass = failures.is_empty() && fast;
    let detail = format!(
        "{random_cases} random MILPs and {formulation_cases} formulation instances vs enumeration, {} mismatches {:?}",
        failures.len(),
        failures.iter().take(3).collect::<Vec<_>>()
    );
    gate.report("2", "branch-and-bound equals exhaustive enumeration", pass, detail, t);
}

fn criterion_3(gate: &mut Gate) {
    let t = Instant::now();
    let grid = GridSpec::new(3, 3).unwrap();
    let h = build_milp_static(&grid, 1, 1, 1, 4.0).unwrap();
    let r = solve_milp(&h.instance, &SolveParams::default()).unwrap();
    let a = r.incumbent.unwrap();
    gate.integrality(&h, &a);
    let d = decode_static(&h, &a).unwrap();
    let (oracle, at) = static_oracle(3, 3, 1, 1, 1, 4.0).unwrap();
    let pass = r.objective == Some(33.0) && oracle == 33.0 && d.positions == [Cell::new(2, 2)] && at == [(2, 2)];
    let detail = format!("objective {:?} at {} (enumeration: {oracle} at {at:?})", r.objective, show(&d.positions));
    gate.report("3a", "3x3 static desk check", pass, detail, t);

    let t = Instant::now();
    let grid = GridSpec::new(8, 8).unwrap();
    let h = build_milp_static(&grid, 5, 1, 1, 4.0).unwrap();
    let r = solve_milp(&h.instance, &SolveParams::default()).unwrap();
    let a = r.incumbent.unwrap();
    gate.integrality(&h, &a);
    let d = decode_static(&h, &a).unwrap();
    let footprint_sum: usize =
        d.positions.iter().map(|&p| gridcover::grid::sensing_footprint(p, 1, &grid).unwrap().len()).sum();
    let disjoint = footprint_sum == d.covered.len();
    let detail = format!(
        "{:?} objective {:?}, positions {}, footprint sizes sum {footprint_sum}, |C_2| {}",
        r.status,
        r.objective,
        show(&d.positions),
        d.covered.len()
    );
    gate.report("3b", "8x8 N_s=5 footprints disjoint", disjoint, detail, t);

    let t = Instant::now();
    // 45 needs five disjoint unclipped footprints; count how many can exist
    let centers: Vec<(usize, usize)> = (2..=7).flat_map(|i| (2..=7).map(move |j| (i, j))).collect();
    let apart = |a: (usize, usize), b: (usize, usize)| a.0.abs_diff(b.0) >= 3 || a.1.abs_diff(b.1) >= 3;
    let mut most = 0;
    let mut chosen = Vec::new();
    fn grow(
        start: usize,
        centers: &[(usize, usize)],
        chosen: &mut Vec<(usize, usize)>,
        most: &mut usize,
        apart: &dyn Fn((usize, usize), (usize, usize)) -> bool,
    ) {
        *most = (*most).max(chosen.len());
        for i in start..centers.len() {
            if chosen.iter().all(|&c| apart(c, centers[i])) {
                chosen.push(centers[i]);
                grow(i + 1, centers, chosen, most, apart);
                chosen.pop();
            }
        }
    }
    grow(0, &centers, &mut chosen, &mut most, &apart);
    let detail = format!(
        "|C_2| = {} (target 45); at most {most} disjoint unclipped 3x3 footprints fit in 8x8, so disjoint \
         coverage is capped at {} cells",
        d.covered.len(),
        9 * most + 6
    );
    gate.report("3c", "8x8 N_s=5 |C_2| = 45", d.covered.len() == 45, detail, t);
}

fn pipeline(rows: usize, ns: usize, l: usize, k: usize, method: MobileMethod, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        rows,
        cols: rows,
        n_static: ns,
        n_mobile: l,
        k_max: k,
        mobile_method: method,
        seeds,
        deterministic: true,
        ..ExperimentConfig::default()
    }
}

fn criterion_4(gate: &mut Gate) {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (l, ns, floor) in [(1, 3, 80.0), (1, 5, 100.0), (2, 3, 100.0), (2, 5, 100.0), (3, 3, 100.0), (3, 5, 100.0)] {
        let row_start = Instant::now();
        let rows = harness::run_pipeline(&pipeline(8, ns, l, 4, MobileMethod::MilpCov, vec![0])).unwrap();
        gate.rows(&rows);
        let r = &rows[0];
        let ok = r.coverage_pct >= floor && r.error.is_none() && row_start.elapsed() < Duration::from_secs(600);
        pass &= ok;
        parts.push(format!("L={l},N_s={ns}: {:.2}% ({})", r.coverage_pct, r.status));
    }
    gate.report("4", "8x8 K_max=4 placement then coverage planning", pass, parts.join("; "), t);
}

fn criterion_5(gate: &mut Gate) {
    let t = Instant::now();
    let mov = harness::run_pipeline(&pipeline(10, 10, 3, 4, MobileMethod::MilpMov, vec![0])).unwrap();
    let cov = harness::run_pipeline(&pipeline(10, 10, 3, 4, MobileMethod::MilpCov, vec![0])).unwrap();
    gate.rows(&mov);
    gate.rows(&cov);
    let (mov, cov) = (&mov[0], &cov[0]);
    let mov_moves = mov.movements;
    let cov_moves = cov.movements_to_target;
    let pass = mov.status == "optimal"
        && mov.coverage_pct == 100.0
        && mov_moves.abs_diff(6) <= 1
        && cov_moves.is_some_and(|c| c >= mov_moves)
        && t.elapsed() < Duration::from_secs(600);
    let detail = format!(
        "MILP-Mov {} movements ({}, {:.0}% coverage); MILP-Cov reaches full coverage after {:?} placements ({:.0}%)",
        mov_moves, mov.status, mov.coverage_pct, cov_moves, cov.coverage_pct
    );
    gate.report("5", "10x10 L=3 N_s=10 movements", pass, detail, t);
}

fn criterion_6(gate: &mut Gate) {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for ns in [0, 5, 10] {
        let mut means = Vec::new();
        for method in [MobileMethod::MilpCov, MobileMethod::Greedy, MobileMethod::Random] {
            let mut cfg = pipeline(10, ns, 3, 4, method, (0..5).collect());
            cfg.solver.time_limit = COV_TIME_LIMIT;
            let rows = harness::run_pipeline(&cfg).unwrap();
            gate.rows(&rows);
            means.push(mean_coverage(&rows).unwrap());
        }
        let ok = means[0] >= means[1] && means[1] >= means[2] && means[0] > means[2];
        pass &= ok;
        parts.push(format!("N_s={ns}: {:.1} / {:.1} / {:.1}", means[0], means[1], means[2]));
    }
    gate.report("6", "MILP-Cov >= greedy >= random (mean %, 5 seeds, K_max=4)", pass, parts.join("; "), t);
}

fn criterion_7(gate: &mut Gate) {
    let t = Instant::now();
    let pass = gate.fractionality <= 1e-6 && gate.solved > 0;
    let detail = format!("{} solved instances, worst coverage-variable fractionality {:.1e}", gate.solved, gate.fractionality);
    gate.report("7", "coverage variables integral", pass, detail, t);
}

fn optimum(h: &FormulationHandle) -> Option<f64> {
    let r = solve_milp(&h.instance, &SolveParams::default()).unwrap();
    match r.status {
        MilpStatus::Optimal => r.objective,
        MilpStatus::Infeasible => None,
        s => panic!("unexpected status {s:?}"),
    }
}

fn criterion_8(gate: &mut Gate) {
    let t = Instant::now();
    let mut violations = Vec::new();
    let mut checked = 0;
    for m in [4, 5] {
        let grid = GridSpec::new(m, m).unwrap();
        let c1 = CellSet::full(grid);
        // every node is placed at every iteration, so a tight overlap cap can
        // make the model infeasible (minus infinity); the L and K_max series
        // therefore run at the default c_o = 3
        let cov = |l: usize, k: usize, c_o: usize| {
            optimum(&build_milp_cov(&grid, &c1, l, k, 1, 2, 2, c_o).unwrap()).unwrap_or(f64::NEG_INFINITY)
        };
        for l in 1..=3 {
            let series: Vec<f64> = (1..=3).map(|k| cov(l, k, 3)).collect();
            checked += 1;
            if series.windows(2).any(|w| w[1] < w[0]) {
                violations.push(format!("{m}x{m} cov in K_max (L={l}): {series:?}"));
            }
        }
        for k in 1..=3 {
            let series: Vec<f64> = (1..=3).map(|l| cov(l, k, 3)).collect();
            checked += 1;
            if series.windows(2).any(|w| w[1] < w[0]) {
                violations.push(format!("{m}x{m} cov in L (K_max={k}): {series:?}"));
            }
            for l in 1..=3 {
                let series: Vec<f64> = (1..=3).map(|c_o| cov(l, k, c_o)).collect();
                checked += 1;
                if series.windows(2).any(|w| w[1] < w[0]) {
                    violations.push(format!("{m}x{m} cov in c_o (L={l}, K_max={k}): {series:?}"));
                }
            }
        }
        let mov = |l: usize, k: usize, c_o: usize, cr: f64| {
            optimum(&build_milp_mov(&grid, &c1, 0, l, k, 1, 2, 2, c_o, cr).unwrap()).unwrap_or(f64::INFINITY)
        };
        for l in 1..=2 {
            let by_c_o: Vec<f64> = (1..=3).map(|c_o| mov(l, 4, c_o, 1.0)).collect();
            let by_cr: Vec<f64> = [1.0, 0.9, 0.8, 0.6].iter().map(|&cr| mov(l, 4, 3, cr)).collect();
            checked += 2;
            if by_c_o.windows(2).any(|w| w[1] > w[0]) {
                violations.push(format!("{m}x{m} mov in c_o (L={l}): {by_c_o:?}"));
            }
            if by_cr.windows(2).any(|w| w[1] > w[0]) {
                violations.push(format!("{m}x{m} mov as cr decreases (L={l}): {by_cr:?}"));
            }
        }
        for k in [3, 4] {
            for cr in [1.0, 0.8] {
                // infeasible counts as infinitely many movements
                let series: Vec<f64> = (1..=3).map(|l| mov(l, k, 3, cr)).collect();
                checked += 1;
                if series.windows(2).any(|w| w[1] > w[0]) {
                    violations.push(format!("{m}x{m} mov in L (K_max={k}, cr={cr}): {series:?}"));
                }
            }
        }
    }
    let detail = format!("{checked} series, {} violations {:?}", violations.len(), violations);
    gate.report("8", "objective monotonicity", violations.is_empty(), detail, t);
}

fn criterion_9(gate: &mut Gate) {
    let t = Instant::now();
    let mut sweep = harness::Sweep::new(pipeline(6, 2, 2, 3, MobileMethod::MilpCov, vec![0, 1, 2]));
    sweep.static_methods = vec![StaticMethod::Milp, StaticMethod::Random];
    sweep.mobile_methods = vec![MobileMethod::MilpCov, MobileMethod::MilpMov, MobileMethod::Greedy, MobileMethod::Random];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        harness::write_outputs(d.path(), &harness::sweep(&sweep)).unwrap();
    }
    let mut files = 0;
    let mut differing = Vec::new();
    for entry in std::fs::read_dir(dirs[0].path()).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap_or_default();
        if a != b {
            differing.push(name.to_string_lossy().into_owned());
        }
        files += 1;
    }
    let detail = format!("{files} files from two deterministic runs, {} differ {:?}", differing.len(), differing);
    gate.report("9", "deterministic outputs byte-identical", differing.is_empty() && files > 1, detail, t);
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as --quiet; only a name filter
    // that matches nothing here (e.g. another test's name) skips the run.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let mut gate = Gate { results: Vec::new(), fractionality: 0.0, solved: 0 };
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);
    criterion_8(&mut gate);
    criterion_9(&mut gate);

    let failed: Vec<&str> = gate.results.iter().filter(|(_, ok)| !ok).map(|(id, _)| id.as_str()).collect();
    let unexpected: Vec<&&str> = failed.iter().filter(|id| !KNOWN_UNATTAINABLE.contains(id)).collect();
    println!(
        "acceptance: {} checks, {} failed {:?} ({} known unattainable)",
        gate.results.len(),
        failed.len(),
        failed,
        failed.len() - unexpected.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
