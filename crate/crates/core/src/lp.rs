//! Exact rational linear-programming feasibility.
//!
//! The balance checker decides strict-sign cone membership by solving the
//! homogenized system { theta >= 0, theta.zeta_k >= 1, theta.zeta_k <= -1,
//! theta.zeta_k = 0 } with a phase-1 simplex over `BigRational`. Bland's rule
//! guarantees termination; every answer is exact.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<BigRational>,
    pub cmp: Cmp,
    pub rhs: BigRational,
}

impl Constraint {
    pub fn new(coeffs: Vec<BigRational>, cmp: Cmp, rhs: BigRational) -> Self {
        Constraint { coeffs, cmp, rhs }
    }
}

/// Find any x >= 0 satisfying all constraints, or None when infeasible.
pub fn feasible_point(n_vars: usize, constraints: &[Constraint]) -> Option<Vec<BigRational>> {
    let m = constraints.len();
    if m == 0 {
        return Some(vec![BigRational::zero(); n_vars]);
    }

    // Column layout: [vars | slack/surplus | artificials | rhs].
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    let mut slack_cols = 0usize;
    for c in constraints {
        assert_eq!(c.coeffs.len(), n_vars);
        if c.cmp != Cmp::Eq {
            slack_cols += 1;
        }
    }
    let n_art = m; // one artificial per row keeps the bookkeeping simple
    let ncols = n_vars + slack_cols + n_art;

    let mut basis = vec![0usize; m];
    let mut slack_at = 0usize;
    for (r, c) in constraints.iter().enumerate() {
        let mut row = vec![BigRational::zero(); ncols + 1];
        let mut negate = c.rhs.is_negative();
        for (j, v) in c.coeffs.iter().enumerate() {
            row[j] = if negate { -v.clone() } else { v.clone() };
        }
        let mut cmp = c.cmp;
        if negate {
            cmp = match cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        let rhs = if negate { -c.rhs.clone() } else { c.rhs.clone() };
        row[ncols] = rhs;
        match cmp {
            Cmp::Le => {
                row[n_vars + slack_at] = BigRational::one();
                slack_at += 1;
            }
            Cmp::Ge => {
                row[n_vars + slack_at] = -BigRational::one();
                slack_at += 1;
            }
            Cmp::Eq => {}
        }
        row[n_vars + slack_cols + r] = BigRational::one();
        basis[r] = n_vars + slack_cols + r;
        negate = false;
        let _ = negate;
        rows.push(row);
    }

    // Phase-1 objective: minimize the sum of artificials. The reduced-cost
    // row starts as minus the sum of all constraint rows over non-artificial
    // columns (artificials are basic with cost 1).
    let mut cost = vec![BigRational::zero(); ncols + 1];
    for row in &rows {
        for j in 0..=ncols {
            if j < n_vars + slack_cols || j == ncols {
                cost[j] -= &row[j];
            }
        }
    }

    loop {
        // Bland: entering column = smallest index with negative reduced cost.
        let mut enter = None;
        for (j, cj) in cost.iter().enumerate().take(ncols) {
            if cj.is_negative() {
                enter = Some(j);
                break;
            }
        }
        let Some(enter) = enter else { break };

        // Ratio test; ties broken by smallest basis variable (Bland).
        let mut leave: Option<usize> = None;
        let mut best: Option<BigRational> = None;
        for (r, row) in rows.iter().enumerate() {
            if row[enter].is_positive() {
                let ratio = &row[ncols] / &row[enter];
                let better = match &best {
                    None => true,
                    Some(b) => {
                        ratio < *b
                            || (ratio == *b
                                && basis[r] < basis[leave.expect("leave set with best")])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(r);
                }
            }
        }
        let Some(leave) = leave else {
            // Unbounded phase-1 objective cannot happen (bounded below by 0);
            // treat defensively as infeasible.
            return None;
        };

        pivot(&mut rows, &mut cost, leave, enter, ncols);
        basis[leave] = enter;
    }

    // Optimum of phase 1 is -cost[rhs]; feasible iff it is zero.
    if !cost[ncols].is_zero() {
        return None;
    }

    // Drive any artificial stuck in the basis at level zero out (or accept a
    // degenerate zero row).
    let art_start = n_vars + slack_cols;
    for r in 0..m {
        if basis[r] >= art_start {
            debug_assert!(rows[r][ncols].is_zero());
            if let Some(j) = (0..art_start).find(|&j| !rows[r][j].is_zero()) {
                pivot(&mut rows, &mut cost, r, j, ncols);
                basis[r] = j;
            }
        }
    }

    let mut x = vec![BigRational::zero(); n_vars];
    for (r, &b) in basis.iter().enumerate() {
        if b < n_vars {
            x[b] = rows[r][ncols].clone();
        }
    }
    Some(x)
}

fn pivot(
    rows: &mut [Vec<BigRational>],
    cost: &mut [BigRational],
    r: usize,
    c: usize,
    ncols: usize,
) {
    let inv = rows[r][c].clone();
    for v in rows[r].iter_mut() {
        *v /= &inv;
    }
    let pivot_row = rows[r].clone();
    for (i, row) in rows.iter_mut().enumerate() {
        if i != r && !row[c].is_zero() {
            let factor = row[c].clone();
            for j in 0..=ncols {
                let delta = &factor * &pivot_row[j];
                row[j] -= delta;
            }
        }
    }
    if !cost[c].is_zero() {
        let factor = cost[c].clone();
        for j in 0..=ncols {
            let delta = &factor * &pivot_row[j];
            cost[j] -= delta;
        }
    }
}
