//! Dense two-phase simplex for the small linear programs that show up in
//! membership, redundancy and distinguishability tests.
//!
//! All variables are nonnegative. Free variables are modelled by the caller
//! as a difference of two nonnegative ones.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }
}

/// Minimize `objective · x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Minimum total constraint violation found in phase one (the L1 norm of
    /// the artificial variables). Zero for feasible programs.
    pub infeasibility: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Phase-one optimum above this is reported infeasible.
    pub feasibility_tol: f64,
    /// Pivot and reduced-cost threshold.
    pub pivot_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            pivot_tol: 1e-11,
            max_iterations: 200_000,
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
    }

    pub fn solve(&self) -> LpSolution {
        self.solve_with(SimplexOptions::default())
    }

    pub fn solve_with(&self, opts: SimplexOptions) -> LpSolution {
        Tableau::build(self).run(self, opts)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
    n_orig: usize,
    artificial_start: usize,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.constraints.len();
        let mut n_slack = 0;
        let mut n_art = 0;
        let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        for (_, rel, _) in &normalized {
            match rel {
                Relation::Le => n_slack += 1,
                Relation::Ge => {
                    n_slack += 1;
                    n_art += 1
                }
                Relation::Eq => n_art += 1,
            }
        }
        let artificial_start = n + n_slack;
        let ncols = artificial_start + n_art;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = n;
        let mut art = artificial_start;
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![0.0; ncols + 1];
            row[..n].copy_from_slice(&coeffs);
            row[ncols] = rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            ncols,
            n_orig: n,
            artificial_start,
        }
    }

    fn cost_row(&self, costs: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.ncols + 1];
        z[..costs.len()].copy_from_slice(costs);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = if b < costs.len() { costs[b] } else { 0.0 };
            if cb != 0.0 {
                for (zj, rj) in z.iter_mut().zip(row) {
                    *zj -= cb * rj;
                }
            }
        }
        z
    }

    fn pivot(&mut self, z: &mut [f64], r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = z[c];
        if f != 0.0 {
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations on columns `< allowed`, Dantzig pricing with a
    /// switch to Bland's rule after a run of degenerate pivots.
    fn iterate(
        &mut self,
        z: &mut [f64],
        allowed: usize,
        opts: &SimplexOptions,
        budget: &mut usize,
    ) -> PivotOutcome {
        let rhs = self.ncols;
        let mut degenerate_run = 0usize;
        loop {
            if *budget == 0 {
                return PivotOutcome::IterationLimit;
            }
            *budget -= 1;
            let bland = degenerate_run > 50;
            let mut entering = None;
            let mut best = -opts.pivot_tol;
            for (j, &zj) in z.iter().enumerate().take(allowed) {
                if zj < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = zj;
                }
            }
            let Some(c) = entering else {
                return PivotOutcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > opts.pivot_tol {
                    let ratio = row[rhs] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return PivotOutcome::Unbounded;
            };
            if ratio.abs() < 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(z, r, c);
        }
    }

    fn run(mut self, lp: &LinearProgram, opts: SimplexOptions) -> LpSolution {
        let mut budget = opts.max_iterations;
        let rhs = self.ncols;
        let n_art = self.ncols - self.artificial_start;
        let mut infeasibility = 0.0;
        if n_art > 0 {
            let mut phase1 = vec![0.0; self.ncols];
            for v in phase1.iter_mut().skip(self.artificial_start) {
                *v = 1.0;
            }
            let mut z = self.cost_row(&phase1);
            match self.iterate(&mut z, self.ncols, &opts, &mut budget) {
                PivotOutcome::IterationLimit => return self.finish(lp, LpStatus::IterationLimit, 0.0),
                PivotOutcome::Unbounded | PivotOutcome::Optimal => {}
            }
            infeasibility = (-z[rhs]).max(0.0);
            if infeasibility > opts.feasibility_tol {
                return self.finish(lp, LpStatus::Infeasible, infeasibility);
            }
            // Drive remaining artificial variables out of the basis.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.artificial_start {
                    let col = (0..self.artificial_start)
                        .find(|&j| self.rows[i][j].abs() > 1e-9);
                    match col {
                        Some(j) => {
                            let mut dummy = vec![0.0; self.ncols + 1];
                            self.pivot(&mut dummy, i, j);
                            i += 1;
                        }
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        let mut z = self.cost_row(&lp.objective);
        let status = match self.iterate(&mut z, self.artificial_start, &opts, &mut budget) {
            PivotOutcome::Optimal => LpStatus::Optimal,
            PivotOutcome::Unbounded => LpStatus::Unbounded,
            PivotOutcome::IterationLimit => LpStatus::IterationLimit,
        };
        self.finish(lp, status, infeasibility)
    }

    fn finish(self, lp: &LinearProgram, status: LpStatus, infeasibility: f64) -> LpSolution {
        let mut x = vec![0.0; self.n_orig];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n_orig {
                x[b] = row[self.ncols];
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution {
            status,
            x,
            objective,
            infeasibility,
        }
    }
}

/// Smallest L1 residual `min |A λ - b|_1` over `λ >= 0` with optional
/// `sum λ <= 1` (cone = false) or `sum λ = 1` (hull) side condition.
/// Columns of `a` are generators given as rows of `points`.
pub fn l1_residual(points: &[Vec<f64>], b: &[f64], sum: Option<Relation>) -> (f64, Vec<f64>) {
    let m = points.len();
    let k = b.len();
    let mut lp = LinearProgram::new(m);
    for r in 0..k {
        let coeffs = points.iter().map(|p| p[r]).collect();
        lp.push(coeffs, Relation::Eq, b[r]);
    }
    if let Some(rel) = sum {
        lp.push(vec![1.0; m], rel, 1.0);
    }
    let opts = SimplexOptions {
        feasibility_tol: f64::INFINITY,
        ..SimplexOptions::default()
    };
    let sol = lp.solve_with(opts);
    (sol.infeasibility, sol.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-3.0, -5.0];
        lp.push(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.push(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.push(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((s.objective + 36.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.push(vec![1.0], Relation::Ge, 2.0);
        lp.push(vec![1.0], Relation::Le, 1.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!((s.infeasibility - 1.0).abs() < 1e-12);

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.push(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // x + y = 1, x - y >= -0.5 (i.e. y - x <= 0.5), min y -> y = 0
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![0.0, 1.0];
        lp.push(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.push(vec![1.0, -1.0], Relation::Ge, -0.5);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.x[1].abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.push(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.push(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = lp.solve();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_residual_of_outside_point() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (r, _) = l1_residual(&pts, &[0.5, 0.5], Some(Relation::Le));
        assert!(r < 1e-12);
        let (r, _) = l1_residual(&pts, &[1.0, 1.0], Some(Relation::Le));
        assert!((r - 1.0).abs() < 1e-9);
    }
}
