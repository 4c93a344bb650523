//! Dense phase-one simplex for linear feasibility problems
//! `A x ≤ b, x ≥ 0`.
//!
//! Pivoting follows Bland's rule, so the method terminates without cycling.
//! When the system is infeasible the final phase-one prices give a Farkas
//! certificate `f ≥ 0` with `fᵀA ≥ 0` and `fᵀb < 0`.
//!
//! The system is equilibrated first (rows, variables and the right-hand side
//! scaled to unit max-abs entries) so the phase-one tolerances are relative.

use crate::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const EQUILIBRATION_PASSES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<f64>),
    Infeasible { certificate: Vec<f64> },
}

/// Solves `A x ≤ b, x ≥ 0`. `a` is row-major with `b.len()` rows.
pub fn solve_feasibility(a: &[Vec<f64>], b: &[f64], max_iterations: usize) -> Result<LpOutcome> {
    check_shape(a, b)?;
    let (scaled_a, scaled_b, rows, cols, rhs) = equilibrate(a, b);
    Ok(match solve_tableau(&scaled_a, &scaled_b, max_iterations)? {
        // x = D z / d_b
        LpOutcome::Feasible(z) => LpOutcome::Feasible(z.iter().zip(&cols).map(|(z, d)| z * d / rhs).collect()),
        // f = R f' certifies the original system since D > 0.
        LpOutcome::Infeasible { certificate } => LpOutcome::Infeasible {
            certificate: certificate.iter().zip(&rows).map(|(f, r)| f * r).collect(),
        },
    })
}

type Equilibrated = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>, f64);

/// Ruiz scaling of `[A | b]`: returns `R A D`, `R b d_b`, `R`, `D` and `d_b`.
fn equilibrate(a: &[Vec<f64>], b: &[f64]) -> Equilibrated {
    let m = b.len();
    let n = a.first().map_or(0, Vec::len);
    let mut sa: Vec<Vec<f64>> = a.to_vec();
    let mut sb = b.to_vec();
    let mut rows = vec![1.0; m];
    let mut cols = vec![1.0; n];
    let mut rhs = 1.0;
    let inv_sqrt = |v: f64| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 };
    for _ in 0..EQUILIBRATION_PASSES {
        for i in 0..m {
            let r = inv_sqrt(sa[i].iter().fold(sb[i].abs(), |acc, v| acc.max(v.abs())));
            sa[i].iter_mut().for_each(|v| *v *= r);
            sb[i] *= r;
            rows[i] *= r;
        }
        for j in 0..n {
            let d = inv_sqrt(sa.iter().fold(0.0f64, |acc, row| acc.max(row[j].abs())));
            sa.iter_mut().for_each(|row| row[j] *= d);
            cols[j] *= d;
        }
        let d = inv_sqrt(sb.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
        sb.iter_mut().for_each(|v| *v *= d);
        rhs *= d;
    }
    (sa, sb, rows, cols, rhs)
}

fn check_shape(a: &[Vec<f64>], b: &[f64]) -> Result<()> {
    let m = b.len();
    if a.len() != m {
        return Err(Error::DimensionMismatch {
            context: "constraint rows",
            expected: m,
            actual: a.len(),
        });
    }
    let n = a.first().map_or(0, Vec::len);
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("a", "ragged constraint matrix"));
    }
    if a.iter().flatten().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("a", "constraint data must be finite"));
    }
    Ok(())
}

fn solve_tableau(a: &[Vec<f64>], b: &[f64], max_iterations: usize) -> Result<LpOutcome> {
    let m = b.len();
    let n = a.first().map_or(0, Vec::len);

    // Columns: x (n), slacks (m), artificials (one per row with b < 0), rhs.
    let flipped: Vec<bool> = b.iter().map(|v| *v < 0.0).collect();
    let n_art = flipped.iter().filter(|f| **f).count();
    let width = n + m + n_art + 1;
    let rhs = width - 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0usize; m];
    let mut art = n + m;
    for i in 0..m {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = sign * a[i][j];
        }
        tab[i][n + i] = sign;
        tab[i][rhs] = sign * b[i];
        if flipped[i] {
            tab[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    // Phase-one objective: minimise the sum of artificials, priced out.
    for i in 0..m {
        if flipped[i] {
            for j in 0..width {
                if j < n + m || j == rhs {
                    tab[m][j] -= tab[i][j];
                }
            }
        }
    }

    let mut iterations = 0;
    loop {
        let entering = (0..rhs).find(|&j| tab[m][j] < -PIVOT_EPS);
        let Some(col) = entering else { break };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[i][col];
            if coef > PIVOT_EPS {
                let ratio = tab[i][rhs] / coef;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-15 || (ratio <= br + 1e-15 && basis[i] < basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = best else {
            // Unbounded direction in phase one cannot happen (objective ≥ 0);
            // treat the column as priced out.
            return Err(Error::Numerical("phase-one simplex found an unbounded ray".into()));
        };
        pivot(&mut tab, row, col);
        basis[row] = col;
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::SolverStalled { iterations });
        }
    }

    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let objective = -tab[m][rhs];
    if objective > 1e-10 * scale {
        let certificate = (0..m).map(|i| tab[m][n + i].max(0.0)).collect();
        return Ok(LpOutcome::Infeasible { certificate });
    }
    let mut x = vec![0.0; n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = tab[i][rhs].max(0.0);
        }
    }
    Ok(LpOutcome::Feasible(x))
}

fn pivot(tab: &mut [Vec<f64>], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            r[col] = 0.0;
        }
    }
}

/// Checks a Farkas certificate for `A x ≤ b, x ≥ 0`.
pub fn certifies_infeasibility(a: &[Vec<f64>], b: &[f64], f: &[f64], tol: f64) -> bool {
    if f.iter().any(|v| *v < 0.0) {
        return false;
    }
    let n = a.first().map_or(0, Vec::len);
    let fb: f64 = f.iter().zip(b).map(|(x, y)| x * y).sum();
    let columns_ok = (0..n).all(|j| {
        let s: f64 = f.iter().zip(a).map(|(fi, row)| fi * row[j]).sum();
        s >= -tol
    });
    columns_ok && fb < -tol
}
