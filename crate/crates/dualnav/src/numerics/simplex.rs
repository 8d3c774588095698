//! Dense two-phase simplex for tiny standard-form linear programs.
//!
//! Solves `min cᵀx  s.t.  E x = d,  x ≥ 0` with a dense tableau and Bland's
//! rule. Problem sizes here are a handful of rows and a few dozen columns
//! (support functions and dual recovery over conic set descriptions), so a
//! dense tableau is the right tool.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Solve `min cᵀx  s.t.  E x = d, x ≥ 0`.
pub(crate) fn solve_standard_form(
    c: &DVector<f64>,
    e: &DMatrix<f64>,
    d: &DVector<f64>,
) -> LpOutcome {
    let m = e.nrows();
    let n = e.ncols();
    assert_eq!(c.len(), n, "cost vector length mismatch");
    assert_eq!(d.len(), m, "rhs length mismatch");

    // Tableau columns: n originals, m artificials, 1 rhs.
    let cols = n + m + 1;
    let mut t = DMatrix::<f64>::zeros(m + 1, cols);
    for i in 0..m {
        let flip = if d[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = flip * e[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, cols - 1)] = flip * d[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: minimize the sum of artificials. Reduced costs start as the
    // negated column sums of the constraint rows.
    for j in 0..cols {
        let mut s = 0.0;
        for i in 0..m {
            s += t[(i, j)];
        }
        t[(m, j)] = if (n..n + m).contains(&j) { 0.0 } else { -s };
    }
    if !run_simplex(&mut t, &mut basis, n + m) {
        // Phase 1 is always bounded below by 0; an unbounded report here
        // means numerical trouble, treat as infeasible.
        return LpOutcome::Infeasible;
    }
    let phase1 = -t[(m, cols - 1)];
    if phase1 > 1e-8 {
        return LpOutcome::Infeasible;
    }

    // Phase 2: restore the real objective, keeping artificials locked out.
    for j in 0..cols {
        t[(m, j)] = if j < n { c[j] } else { 0.0 };
    }
    // Price out the basic columns.
    for i in 0..m {
        let b = basis[i];
        let cb = if b < n { c[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..cols {
                t[(m, j)] -= cb * t[(i, j)];
            }
        }
    }
    if !run_simplex(&mut t, &mut basis, n) {
        return LpOutcome::Unbounded;
    }

    let mut x = DVector::<f64>::zeros(n);
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[(i, cols - 1)];
        }
    }
    let value = c.dot(&x);
    LpOutcome::Optimal { x, value }
}

/// Run simplex pivots on the tableau until optimal (true) or unbounded
/// (false). Columns with index ≥ `enter_limit` never enter the basis.
fn run_simplex(t: &mut DMatrix<f64>, basis: &mut [usize], enter_limit: usize) -> bool {
    let m = t.nrows() - 1;
    let cols = t.ncols();
    let rhs = cols - 1;
    // Bland's rule terminates; the cap is a belt against fp stalls.
    for _ in 0..20_000 {
        // Entering: smallest index with reduced cost < -tol.
        let mut enter = None;
        for j in 0..enter_limit {
            if t[(m, j)] < -COST_TOL {
                enter = Some(j);
                break;
            }
        }
        let Some(j) = enter else { return true };

        // Leaving: min ratio, ties broken by smallest basis index.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = t[(i, j)];
            if a > PIVOT_TOL {
                let ratio = t[(i, rhs)] / a;
                let better = ratio < best - PIVOT_TOL
                    || (ratio < best + PIVOT_TOL
                        && leave.map(|l| basis[i] < basis[l]).unwrap_or(true));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else { return false };

        pivot(t, r, j);
        basis[r] = j;
    }
    true
}

fn pivot(t: &mut DMatrix<f64>, r: usize, j: usize) {
    let cols = t.ncols();
    let p = t[(r, j)];
    for col in 0..cols {
        t[(r, col)] /= p;
    }
    for row in 0..t.nrows() {
        if row != r {
            let f = t[(row, j)];
            if f != 0.0 {
                for col in 0..cols {
                    t[(row, col)] -= f * t[(r, col)];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_textbook_lp() {
        // min -x1 - 2x2 s.t. x1 + x2 + s1 = 4, x1 + 3x2 + s2 = 6, x >= 0.
        let c = DVector::from_vec(vec![-1.0, -2.0, 0.0, 0.0]);
        let e = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 0.0, 1.0, 3.0, 0.0, 1.0]);
        let d = DVector::from_vec(vec![4.0, 6.0]);
        match solve_standard_form(&c, &e, &d) {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 3.0).abs() < 1e-9);
                assert!((x[1] - 1.0).abs() < 1e-9);
                assert!((value + 5.0).abs() < 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        // x1 = 1 and x1 = 2 simultaneously.
        let c = DVector::from_vec(vec![1.0]);
        let e = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let d = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            solve_standard_form(&c, &e, &d),
            LpOutcome::Infeasible
        ));
    }

    #[test]
    fn detects_unbounded() {
        // min -x1 s.t. x1 - x2 = 0: push both to infinity.
        let c = DVector::from_vec(vec![-1.0, 0.0]);
        let e = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let d = DVector::from_vec(vec![0.0]);
        assert!(matches!(
            solve_standard_form(&c, &e, &d),
            LpOutcome::Unbounded
        ));
    }

    #[test]
    fn handles_negative_rhs() {
        // min x1 s.t. -x1 + x2 = -2, x >= 0 -> x1 = 2 at x2 = 0.
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let e = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        let d = DVector::from_vec(vec![-2.0]);
        match solve_standard_form(&c, &e, &d) {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 2.0).abs() < 1e-9);
                assert!((value - 2.0).abs() < 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }
}
