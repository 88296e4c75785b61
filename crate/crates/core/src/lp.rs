//! Dense tableau simplex for small linear programs in canonical form
//!
//! ```text
//! maximize cᵀx  subject to  A x ≤ b,  x ≥ 0,  b ≥ 0
//! ```
//!
//! Since `b ≥ 0` the origin is feasible and no phase one is needed. Bland's
//! rule guards against cycling; the programs solved here have at most a few
//! hundred rows.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded,
}

/// Solves `max cᵀx s.t. Ax ≤ b, x ≥ 0` for `b ≥ 0`. `a` holds one row per
/// constraint.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let n = c.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::dims("LP right-hand side", m, b.len()));
    }
    if let Some(row) = a.iter().find(|row| row.len() != n) {
        return Err(Error::dims("LP constraint row", n, row.len()));
    }
    if let Some(i) = b.iter().position(|&bi| bi < 0.0 || !bi.is_finite()) {
        return Err(Error::Solver(format!(
            "right-hand side {i} is negative; origin must be feasible"
        )));
    }

    // Columns: n structural, m slack, 1 rhs.
    let width = n + m + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for i in 0..m {
        for j in 0..n {
            t[i * width + j] = a[i][j];
        }
        t[i * width + n + i] = 1.0;
        t[i * width + width - 1] = b[i];
    }
    // Objective row stores -c so that negative entries mark improving columns.
    for j in 0..n {
        t[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iter = 50 * (n + m + 1) * (n + m + 1);
    for _ in 0..max_iter {
        // Bland: lowest-index improving column.
        let entering = match (0..n + m).find(|&j| t[m * width + j] < -PIVOT_TOL) {
            Some(j) => j,
            None => {
                let mut x = vec![0.0; n];
                for (i, &bv) in basis.iter().enumerate() {
                    if bv < n {
                        x[bv] = t[i * width + width - 1];
                    }
                }
                let value = t[m * width + width - 1];
                return Ok(LpOutcome::Optimal { x, value });
            }
        };
        // Ratio test, ties broken by lowest basis index.
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let coef = t[i * width + entering];
            if coef > PIVOT_TOL {
                let ratio = t[i * width + width - 1] / coef;
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-15
                            || (ratio <= best_ratio + 1e-15 && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leaving = Some(i);
                }
            }
        }
        let Some(r) = leaving else {
            return Ok(LpOutcome::Unbounded);
        };
        let pivot = t[r * width + entering];
        for j in 0..width {
            t[r * width + j] /= pivot;
        }
        for i in 0..=m {
            if i == r {
                continue;
            }
            let factor = t[i * width + entering];
            if factor != 0.0 {
                for j in 0..width {
                    t[i * width + j] -= factor * t[r * width + j];
                }
            }
        }
        basis[r] = entering;
    }
    Err(Error::Solver("iteration limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(outcome: LpOutcome) -> (Vec<f64>, f64) {
        match outcome {
            LpOutcome::Optimal { x, value } => (x, value),
            LpOutcome::Unbounded => panic!("unexpected unbounded LP"),
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 -> (2, 6), 36
        let (x, v) = optimal(
            maximize(
                &[3.0, 5.0],
                &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
                &[4.0, 12.0, 18.0],
            )
            .unwrap(),
        );
        assert!((v - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn detects_unbounded() {
        let out = maximize(&[1.0, 0.0], &[vec![0.0, 1.0]], &[1.0]).unwrap();
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Degenerate at the origin; Bland's rule must not cycle.
        let (_, v) = optimal(
            maximize(
                &[10.0, -57.0, -9.0, -24.0],
                &[
                    vec![0.5, -5.5, -2.5, 9.0],
                    vec![0.5, -1.5, -0.5, 1.0],
                    vec![1.0, 0.0, 0.0, 0.0],
                ],
                &[0.0, 0.0, 1.0],
            )
            .unwrap(),
        );
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_rhs() {
        assert!(maximize(&[1.0], &[vec![1.0]], &[-1.0]).is_err());
    }
}
