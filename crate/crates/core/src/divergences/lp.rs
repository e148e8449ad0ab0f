//! Dense two-phase simplex for the small linear programs behind the
//! divergence oracles (optimal transport couplings, bounded-Lipschitz
//! maximizations). Bland's rule keeps pivoting deterministic and free of
//! cycles; correctness is preferred over speed at these sizes (≈ 200
//! variables, a few thousand constraints).

use std::fmt;

/// Comparison direction of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `maximize objective·x` subject to rows `a·x (cmp) b` and box bounds.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<(Vec<f64>, Cmp, f64)>,
    /// Per-variable `[lo, hi]`; `lo` must be finite, `hi` may be `+∞`.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    Malformed(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "infeasible linear program"),
            LpError::Unbounded => write!(f, "unbounded linear program"),
            LpError::Malformed(msg) => write!(f, "malformed linear program: {msg}"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

const TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

struct Tableau {
    /// Constraint rows, each of length `cols` (coefficients only).
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    /// Reduced-cost row `c_j − c_B·B⁻¹A_j` for an objective `c`.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut obj = c.to_vec();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for (o, &a) in obj.iter_mut().zip(row) {
                    *o -= cb * a;
                }
            }
        }
        obj
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor != 0.0 {
                for (v, &pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                self.rhs[i] -= factor * pivot_rhs;
                if self.rhs[i].abs() < 1e-14 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let factor = obj[c];
        if factor != 0.0 {
            for (v, &pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `c` over the current basis with Bland's rule.
    fn optimize(&mut self, c: &[f64], banned: usize) -> Result<(), LpError> {
        let mut obj = self.reduced_costs(c);
        for _ in 0..MAX_PIVOTS {
            // entering: smallest index with positive reduced cost,
            // skipping columns at or beyond `banned`
            let entering = (0..self.cols.min(banned)).find(|&j| obj[j] > TOL);
            let Some(e) = entering else {
                return Ok(());
            };
            // leaving: minimum ratio; ties broken by smallest basis index
            let mut best: Option<(f64, usize, usize)> = None; // (ratio, basis var, row)
            for (i, row) in self.rows.iter().enumerate() {
                if row[e] > PIVOT_TOL {
                    let ratio = self.rhs[i] / row[e];
                    let key = (ratio, self.basis[i]);
                    if best.is_none_or(|(br, bb, _)| key < (br, bb)) {
                        best = Some((ratio, self.basis[i], i));
                    }
                }
            }
            match best {
                Some((_, _, r)) => self.pivot(r, e, &mut obj),
                None => return Err(LpError::Unbounded),
            }
        }
        Err(LpError::Malformed("pivot limit exceeded".into()))
    }
}

/// Exact (to solver tolerance 1e-9) optimum of a small dense LP by the
/// two-phase simplex method with deterministic Bland pivoting. Infeasible
/// and unbounded programs are reported distinctly.
pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let n = problem.objective.len();
    if problem.bounds.len() != n {
        return Err(LpError::Malformed(format!(
            "{n} objective coefficients but {} bounds",
            problem.bounds.len()
        )));
    }
    for (coeffs, _, b) in &problem.constraints {
        if coeffs.len() != n {
            return Err(LpError::Malformed("constraint width mismatch".into()));
        }
        if !b.is_finite() || coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("non-finite constraint".into()));
        }
    }
    if problem.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Malformed("non-finite objective".into()));
    }
    for &(lo, hi) in &problem.bounds {
        if !lo.is_finite() || hi < lo {
            return Err(LpError::Malformed(format!("bad bounds [{lo}, {hi}]")));
        }
    }

    // Shift to y = x − lo ≥ 0; finite upper bounds become rows.
    let lo: Vec<f64> = problem.bounds.iter().map(|b| b.0).collect();
    let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::new();
    for (coeffs, cmp, b) in &problem.constraints {
        let shift: f64 = coeffs.iter().zip(&lo).map(|(c, l)| c * l).sum();
        rows.push((coeffs.clone(), *cmp, b - shift));
    }
    for (j, &(l, h)) in problem.bounds.iter().enumerate() {
        if h.is_finite() && h > l {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Cmp::Le, h - l));
        } else if h == l {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Cmp::Eq, 0.0));
        }
    }

    // Normalize to nonnegative right-hand sides.
    for (coeffs, cmp, b) in rows.iter_mut() {
        if *b < 0.0 {
            for v in coeffs.iter_mut() {
                *v = -*v;
            }
            *b = -*b;
            *cmp = match *cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Cmp::Le).count();
    let cols = n + n_slack + n_art;

    let mut t = Tableau {
        rows: vec![vec![0.0; cols]; m],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        cols,
    };
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    for (i, (coeffs, cmp, b)) in rows.iter().enumerate() {
        t.rows[i][..n].copy_from_slice(coeffs);
        t.rhs[i] = *b;
        match cmp {
            Cmp::Le => {
                t.rows[i][slack_at] = 1.0;
                t.basis[i] = slack_at;
                slack_at += 1;
            }
            Cmp::Ge => {
                t.rows[i][slack_at] = -1.0; // surplus
                slack_at += 1;
                t.rows[i][art_at] = 1.0;
                t.basis[i] = art_at;
                art_at += 1;
            }
            Cmp::Eq => {
                t.rows[i][art_at] = 1.0;
                t.basis[i] = art_at;
                art_at += 1;
            }
        }
    }

    // Phase I: drive artificials to zero.
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(n + n_slack) {
            *c = -1.0;
        }
        t.optimize(&phase1, cols)?;
        let infeasibility: f64 = t
            .basis
            .iter()
            .zip(&t.rhs)
            .filter(|(b, _)| **b >= n + n_slack)
            .map(|(_, r)| r)
            .sum();
        if infeasibility > TOL {
            return Err(LpError::Infeasible);
        }
        // Pivot any degenerate artificial out of the basis, or drop its
        // (redundant) row when nothing else is available.
        let mut drop_rows = Vec::new();
        for i in 0..m {
            if t.basis[i] >= n + n_slack {
                match (0..n + n_slack).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                    Some(j) => {
                        let mut dummy = vec![0.0; cols];
                        t.pivot(i, j, &mut dummy);
                    }
                    None => drop_rows.push(i),
                }
            }
        }
        for &i in drop_rows.iter().rev() {
            t.rows.remove(i);
            t.rhs.remove(i);
            t.basis.remove(i);
        }
    }

    // Phase II over original variables and slacks only.
    let mut c2 = vec![0.0; cols];
    c2[..n].copy_from_slice(&problem.objective);
    t.optimize(&c2, n + n_slack)?;

    let mut x = lo;
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] += t.rhs[i];
        }
    }
    let value = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpSolution { value, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free_bounds(n: usize) -> Vec<(f64, f64)> {
        vec![(0.0, f64::INFINITY); n]
    }

    #[test]
    fn single_variable_cap() {
        // max x s.t. x ≤ 3, x ≥ 0
        let p = LpProblem {
            objective: vec![1.0],
            constraints: vec![(vec![1.0], Cmp::Le, 3.0)],
            bounds: free_bounds(1),
        };
        let s = lp_solve(&p).unwrap();
        assert!((s.value - 3.0).abs() < 1e-9);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_equality_point() {
        // only feasible point is x = 3
        let p = LpProblem {
            objective: vec![0.0],
            constraints: vec![(vec![1.0], Cmp::Eq, 3.0)],
            bounds: free_bounds(1),
        };
        let s = lp_solve(&p).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn reports_infeasible_and_unbounded_distinctly() {
        let inf = LpProblem {
            objective: vec![1.0],
            constraints: vec![(vec![1.0], Cmp::Le, 1.0), (vec![1.0], Cmp::Ge, 2.0)],
            bounds: free_bounds(1),
        };
        assert_eq!(lp_solve(&inf).unwrap_err(), LpError::Infeasible);

        let unb = LpProblem {
            objective: vec![1.0],
            constraints: vec![],
            bounds: free_bounds(1),
        };
        assert_eq!(lp_solve(&unb).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn classic_two_variable_program() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), value 36
        let p = LpProblem {
            objective: vec![3.0, 5.0],
            constraints: vec![
                (vec![1.0, 0.0], Cmp::Le, 4.0),
                (vec![0.0, 2.0], Cmp::Le, 12.0),
                (vec![3.0, 2.0], Cmp::Le, 18.0),
            ],
            bounds: free_bounds(2),
        };
        let s = lp_solve(&p).unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9);
        assert!((s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn honors_box_bounds_and_negative_rhs() {
        // max x + y, x ∈ [−2, −1], y ∈ [0, 0.5], plus a redundant ≥ row
        let p = LpProblem {
            objective: vec![1.0, 1.0],
            constraints: vec![(vec![1.0, 1.0], Cmp::Ge, -5.0)],
            bounds: vec![(-2.0, -1.0), (0.0, 0.5)],
        };
        let s = lp_solve(&p).unwrap();
        assert!((s.value + 0.5).abs() < 1e-9);
        assert!((s.x[0] + 1.0).abs() < 1e-9);
        assert!((s.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn equality_system_with_redundant_row() {
        // x + y = 1 stated twice plus max y → y = 1
        let p = LpProblem {
            objective: vec![0.0, 1.0],
            constraints: vec![
                (vec![1.0, 1.0], Cmp::Eq, 1.0),
                (vec![2.0, 2.0], Cmp::Eq, 2.0),
            ],
            bounds: free_bounds(2),
        };
        let s = lp_solve(&p).unwrap();
        assert!((s.value - 1.0).abs() < 1e-9);
    }

    /// Brute-force LP oracle: enumerate basic solutions of the standard-form
    /// system (equality rows only, x ≥ 0) and take the best feasible one.
    fn brute_force_eq(objective: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
        let m = a.len();
        let n = objective.len();
        let mut best: Option<f64> = None;
        let mut combo = (0..m).collect::<Vec<usize>>();
        // iterate over all m-subsets of columns
        loop {
            // solve A_B x_B = b
            if let Some(xb) = solve_dense(
                &combo.iter().map(|&j| a.iter().map(|row| row[j]).collect()).collect::<Vec<Vec<f64>>>(),
                b,
            ) {
                if xb.iter().all(|&v| v >= -1e-9) {
                    let mut x = vec![0.0; n];
                    for (k, &j) in combo.iter().enumerate() {
                        x[j] = xb[k];
                    }
                    let val: f64 = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                    best = Some(best.map_or(val, |b: f64| b.max(val)));
                }
            }
            // next combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if combo[i] < n - (m - i) {
                    combo[i] += 1;
                    for k in i + 1..m {
                        combo[k] = combo[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Gaussian elimination on column-major basis matrix; None if singular.
    fn solve_dense(cols: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
        let m = b.len();
        if cols.len() != m {
            return None;
        }
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..m {
                a[i][j] = cols[j][i];
            }
            a[i][m] = b[i];
        }
        for col in 0..m {
            let piv = (col..m).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
            if a[piv][col].abs() < 1e-10 {
                return None;
            }
            a.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[r][col..=m].iter_mut().zip(&pivot_row[col..=m]) {
                        *v -= f * pv;
                    }
                }
            }
        }
        Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
    }

    #[test]
    fn transport_lp_matches_extreme_point_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            // random 3×3 transport instance
            let mut p: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut q: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
            let ps: f64 = p.iter().sum();
            let qs: f64 = q.iter().sum();
            for v in p.iter_mut() {
                *v /= ps;
            }
            for v in q.iter_mut() {
                *v /= qs;
            }
            let cost: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..2.0)).collect();

            // maximize −cost·γ subject to marginal equalities
            let mut constraints = Vec::new();
            for i in 0..3 {
                let mut row = vec![0.0; 9];
                for j in 0..3 {
                    row[i * 3 + j] = 1.0;
                }
                constraints.push((row, Cmp::Eq, p[i]));
            }
            for j in 0..3 {
                let mut row = vec![0.0; 9];
                for i in 0..3 {
                    row[i * 3 + j] = 1.0;
                }
                constraints.push((row, Cmp::Eq, q[j]));
            }
            let problem = LpProblem {
                objective: cost.iter().map(|c| -c).collect(),
                constraints: constraints.clone(),
                bounds: free_bounds(9),
            };
            let s = lp_solve(&problem).unwrap();

            // the last marginal row is implied by the others (both sum to 1),
            // so the brute-force oracle enumerates bases of the rank-5 system
            let a: Vec<Vec<f64>> = constraints[..5].iter().map(|c| c.0.clone()).collect();
            let b: Vec<f64> = constraints[..5].iter().map(|c| c.2).collect();
            let oracle = brute_force_eq(&problem.objective, &a, &b).unwrap();
            assert!(
                (s.value - oracle).abs() < 1e-8,
                "simplex {} vs brute force {}",
                s.value,
                oracle
            );
        }
    }

    #[test]
    fn random_inequality_programs_match_brute_force() {
        // small random ≤-form programs, solved both ways after adding slacks
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = rng.gen_range(2..4usize);
            let m = rng.gen_range(2..4usize);
            let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let mut constraints = Vec::new();
            for _ in 0..m {
                let row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
                constraints.push((row, Cmp::Le, rng.gen_range(0.5..3.0)));
            }
            let p = LpProblem {
                objective: objective.clone(),
                constraints: constraints.clone(),
                bounds: free_bounds(n),
            };
            let s = lp_solve(&p).unwrap();

            // standard form with slacks for the oracle
            let total = n + m;
            let mut a = Vec::new();
            let mut b = Vec::new();
            let mut obj2 = objective.clone();
            obj2.extend(vec![0.0; m]);
            for (k, (row, _, rhs)) in constraints.iter().enumerate() {
                let mut r = row.clone();
                r.extend(vec![0.0; m]);
                r[n + k] = 1.0;
                a.push(r);
                b.push(*rhs);
            }
            let _ = total;
            let oracle = brute_force_eq(&obj2, &a, &b).unwrap();
            assert!(
                (s.value - oracle).abs() < 1e-8,
                "simplex {} vs brute force {}",
                s.value,
                oracle
            );
        }
    }
}
