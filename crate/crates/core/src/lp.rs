//! Dense Phase-I simplex for linear feasibility problems `A x = b, x >= 0`.
//!
//! Artificial variables are attached to every row and their sum is minimised
//! with Bland's rule, which guarantees termination on the heavily degenerate
//! problems produced by 0/1 vertex matrices.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct Feasibility {
    /// Structural variable values at the end of Phase I.
    pub x: Vec<f64>,
    /// Sum of artificial variables at the end of Phase I.
    pub artificial_sum: f64,
    /// `max_i |(A x)_i - b_i|`, recomputed from `x` and the original data.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve Phase I for `rows · x = rhs`, `x >= 0`.
///
/// `rows` holds the constraint matrix row-major; every row must have the
/// same length.
pub fn phase_one(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Feasibility> {
    let m = rows.len();
    if rhs.len() != m {
        return Err(Error::LpNotConverged(format!("{m} rows but {} right-hand sides", rhs.len())));
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::LpNotConverged("ragged constraint matrix".into()));
    }
    if rows.iter().flatten().chain(rhs).any(|v| !v.is_finite()) {
        return Err(Error::LpNotConverged("non-finite input".into()));
    }

    // Tableau columns: structural | artificial | rhs
    let width = ncols + m + 1;
    let rhs_col = width - 1;
    let mut t = vec![0.0; m * width];
    for i in 0..m {
        let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut t[i * width..(i + 1) * width];
        for j in 0..ncols {
            row[j] = sign * rows[i][j];
        }
        row[ncols + i] = 1.0;
        row[rhs_col] = sign * rhs[i];
    }
    let mut basis: Vec<usize> = (ncols..ncols + m).collect();

    // Reduced costs of the artificial-sum objective; the last slot holds -w.
    let mut z = vec![0.0; width];
    for i in 0..m {
        let row = &t[i * width..(i + 1) * width];
        for j in 0..ncols {
            z[j] -= row[j];
        }
        z[rhs_col] -= row[rhs_col];
    }

    let max_iter = 50 * (m + ncols) + 1000;
    let mut iterations = 0;
    loop {
        let Some(enter) = (0..ncols + m).find(|&j| z[j] < -PIVOT_EPS) else {
            break;
        };
        if iterations >= max_iter {
            return Err(Error::LpNotConverged(format!(
                "iteration limit {max_iter} reached (m={m}, columns={ncols})"
            )));
        }
        iterations += 1;

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[i * width + rhs_col] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS
                            || (ratio <= lr + PIVOT_EPS && basis[i] < basis[li])
                        {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // Phase I is bounded below by zero, so an entering column always has
        // a positive entry unless the tableau has lost numerical integrity.
        let Some((r, _)) = leave else {
            return Err(Error::LpNotConverged(format!(
                "unbounded direction in column {enter} during Phase I"
            )));
        };

        pivot(&mut t, width, r, enter);
        let factor = z[enter];
        if factor != 0.0 {
            let prow = &t[r * width..(r + 1) * width];
            for (zj, &pj) in z.iter_mut().zip(prow) {
                *zj -= factor * pj;
            }
        }
        basis[r] = enter;
    }

    let mut x = vec![0.0; ncols];
    for (i, &var) in basis.iter().enumerate() {
        if var < ncols {
            x[var] = t[i * width + rhs_col].max(0.0);
        }
    }
    let artificial_sum = (-z[rhs_col]).max(0.0);
    let residual = rows
        .iter()
        .zip(rhs)
        .map(|(row, &bi)| {
            let ax: f64 = row.iter().zip(&x).map(|(a, xj)| a * xj).sum();
            (ax - bi).abs()
        })
        .fold(0.0, f64::max);

    Ok(Feasibility { x, artificial_sum, residual, iterations })
}

fn pivot(t: &mut [f64], width: usize, r: usize, c: usize) {
    let m = t.len() / width;
    let inv = 1.0 / t[r * width + c];
    for v in &mut t[r * width..(r + 1) * width] {
        *v *= inv;
    }
    let prow: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
    for i in 0..m {
        if i == r {
            continue;
        }
        let factor = t[i * width + c];
        if factor == 0.0 {
            continue;
        }
        let row = &mut t[i * width..(i + 1) * width];
        for (v, &p) in row.iter_mut().zip(&prow) {
            *v -= factor * p;
        }
        row[c] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_simplex_point() {
        // x1 + x2 + x3 = 1, x1 = 0.2, x2 = 0.3
        let rows = vec![vec![1.0, 1.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let sol = phase_one(&rows, &[1.0, 0.2, 0.3]).unwrap();
        assert!(sol.residual < 1e-12);
        assert!((sol.x[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_negative_requirement() {
        // x1 + x2 = 1 and x1 + x2 = 2 cannot both hold
        let rows = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let sol = phase_one(&rows, &[1.0, 2.0]).unwrap();
        assert!(sol.artificial_sum > 0.5);
        assert!(sol.residual > 0.4);
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        let rows = vec![vec![-1.0, 0.0], vec![0.0, 1.0]];
        let sol = phase_one(&rows, &[-0.25, 0.5]).unwrap();
        assert!(sol.residual < 1e-12);
        assert!((sol.x[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(phase_one(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 1.0]).is_err());
        assert!(phase_one(&[vec![1.0]], &[1.0, 2.0]).is_err());
        assert!(phase_one(&[vec![f64::NAN]], &[1.0]).is_err());
    }
}
