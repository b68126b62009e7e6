//! Small dense two-phase primal simplex solver.
//!
//! Solves `min c'x  s.t.  Ax = b, x >= 0` for the pocket-sized programs the
//! hull-width estimator generates. Pivoting uses Bland's rule, which cannot
//! cycle, so the solver terminates on every input.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("constraint matrix shape {rows}x{cols} does not match c (len {c_len}) / b (len {b_len})")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        c_len: usize,
        b_len: usize,
    },
    #[error("problem is infeasible (phase-1 objective {0})")]
    Infeasible(f64),
    #[error("objective is unbounded below")]
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

const PIVOT_EPS: f64 = 1e-11;

/// Minimize `c'x` subject to `Ax = b`, `x >= 0` (`a` is row-major, `rows x cols`).
pub fn solve(c: &[f64], a: &[f64], b: &[f64], rows: usize, cols: usize) -> Result<SimplexSolution, SimplexError> {
    if a.len() != rows * cols || c.len() != cols || b.len() != rows {
        return Err(SimplexError::ShapeMismatch {
            rows,
            cols,
            c_len: c.len(),
            b_len: b.len(),
        });
    }

    // Tableau with one artificial variable per row; phase 1 drives them out.
    let width = cols + rows;
    let mut t = vec![0.0; rows * width];
    let mut rhs = vec![0.0; rows];
    for i in 0..rows {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            t[i * width + j] = flip * a[i * cols + j];
        }
        t[i * width + cols + i] = 1.0;
        rhs[i] = flip * b[i];
    }
    let mut basis: Vec<usize> = (cols..width).collect();

    // Phase 1: minimize the sum of artificials.
    let mut phase1_cost = vec![0.0; width];
    for j in cols..width {
        phase1_cost[j] = 1.0;
    }
    let p1 = iterate(&mut t, &mut rhs, &mut basis, &phase1_cost, width, rows)?;
    if p1 > 1e-8 {
        return Err(SimplexError::Infeasible(p1));
    }
    // Pivot lingering artificials out of the basis where possible.
    for i in 0..rows {
        if basis[i] >= cols {
            if let Some(j) = (0..cols).find(|&j| t[i * width + j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut rhs, &mut basis, i, j, width, rows);
            }
        }
    }

    // Phase 2 on the original objective; artificial columns are frozen.
    let mut phase2_cost = vec![0.0; width];
    phase2_cost[..cols].copy_from_slice(c);
    let objective = iterate_restricted(&mut t, &mut rhs, &mut basis, &phase2_cost, width, rows, cols)?;

    let mut x = vec![0.0; cols];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < cols {
            x[bv] = rhs[i];
        }
    }
    Ok(SimplexSolution { objective, x })
}

fn iterate(
    t: &mut [f64],
    rhs: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    rows: usize,
) -> Result<f64, SimplexError> {
    iterate_restricted(t, rhs, basis, cost, width, rows, width)
}

/// Bland-rule simplex iterations over the first `allowed` columns.
fn iterate_restricted(
    t: &mut [f64],
    rhs: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    rows: usize,
    allowed: usize,
) -> Result<f64, SimplexError> {
    loop {
        // Reduced costs via the basic cost multipliers.
        let mut entering = None;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let mut reduced = cost[j];
            for i in 0..rows {
                reduced -= cost[basis[i]] * t[i * width + j];
            }
            if reduced < -1e-9 {
                entering = Some(j); // Bland: lowest eligible index
                break;
            }
        }
        let Some(j) = entering else {
            let obj = (0..rows).map(|i| cost[basis[i]] * rhs[i]).sum();
            return Ok(obj);
        };

        // Ratio test; Bland tie-break on the smallest basis variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let aij = t[i * width + j];
            if aij > PIVOT_EPS {
                let ratio = rhs[i] / aij;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS
                            || ((ratio - lr).abs() <= PIVOT_EPS && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return Err(SimplexError::Unbounded);
        };
        pivot(t, rhs, basis, i, j, width, rows);
    }
}

fn pivot(
    t: &mut [f64],
    rhs: &mut [f64],
    basis: &mut [usize],
    row: usize,
    col: usize,
    width: usize,
    rows: usize,
) {
    let p = t[row * width + col];
    for j in 0..width {
        t[row * width + j] /= p;
    }
    rhs[row] /= p;
    for i in 0..rows {
        if i == row {
            continue;
        }
        let f = t[i * width + col];
        if f == 0.0 {
            continue;
        }
        for j in 0..width {
            t[i * width + j] -= f * t[row * width + j];
        }
        rhs[i] -= f * rhs[row];
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // min -x1 - 2x2  s.t.  x1 + x2 + s1 = 4,  x2 + s2 = 2,  x >= 0.
        // Optimum at (2, 2): objective -6.
        let c = [-1.0, -2.0, 0.0, 0.0];
        let a = [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let b = [4.0, 2.0];
        let sol = solve(&c, &a, &b, 2, 4).unwrap();
        assert!((sol.objective - (-6.0)).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x1 = -1 with x1 >= 0 is infeasible.
        let c = [1.0];
        let a = [1.0];
        let b = [-1.0];
        assert!(matches!(
            solve(&c, &a, &b, 1, 1),
            Err(SimplexError::Infeasible(_))
        ));
    }

    #[test]
    fn simplex_vertex_on_probability_simplex() {
        // min c'x over the probability simplex picks out the smallest entry.
        let c = [3.0, -1.0, 2.0];
        let a = [1.0, 1.0, 1.0];
        let b = [1.0];
        let sol = solve(&c, &a, &b, 1, 3).unwrap();
        assert!((sol.objective - (-1.0)).abs() < 1e-9);
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
    }
}
