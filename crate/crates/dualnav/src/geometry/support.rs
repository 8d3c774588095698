//! Support-function evaluation per shape class.
//!
//! Polytopes go through an exact dense-simplex solve of the conic dual
//! `min bᵀλ s.t. Aᵀλ = z, λ ≥ 0`, whose optimizer doubles as the dual
//! certificate. Ellipsoids in lifted form have a closed form. Everything
//! else (product cones, general SOC rows) falls back to a small ADMM
//! splitting solve.

use nalgebra::{DMatrix, DVector};

use super::{ConvexBody, GeometryError, ShapeClass};
use crate::numerics::simplex::{solve_standard_form, LpOutcome};

pub(crate) fn support(
    body: &ConvexBody,
    z: &DVector<f64>,
) -> Result<(f64, DVector<f64>), GeometryError> {
    if z.len() != body.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: body.dim(),
            got: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::UnsupportedShape("non-finite direction"));
    }
    match &body.shape {
        ShapeClass::Polytope => polytope_support(body, z),
        ShapeClass::Ellipsoid { e_inv, center, .. } => {
            let w = e_inv.transpose() * z;
            let value = center.dot(z) + w.norm();
            // Dual block (λ₀, λ_z) = (‖E⁻ᵀz‖, −E⁻ᵀz) sits on the SOC
            // boundary and satisfies Aᵀλ = z, bᵀλ = support.
            let n = body.dim();
            let mut lambda = DVector::zeros(n + 1);
            lambda[0] = w.norm();
            for i in 0..n {
                lambda[i + 1] = -w[i];
            }
            Ok((value, lambda))
        }
        ShapeClass::General => admm_support(body, z),
    }
}

fn polytope_support(
    body: &ConvexBody,
    z: &DVector<f64>,
) -> Result<(f64, DVector<f64>), GeometryError> {
    let a_t = body.a().transpose();
    match solve_standard_form(body.b(), &a_t, z) {
        LpOutcome::Optimal { x, value } => Ok((value, x)),
        // Dual infeasible <=> primal support problem unbounded.
        LpOutcome::Infeasible => Err(GeometryError::UnboundedSupport),
        LpOutcome::Unbounded => Err(GeometryError::EmptyInterior),
    }
}

/// Chebyshev center of a polytope: `max r  s.t.  aᵢᵀy + r‖aᵢ‖ ≤ bᵢ`.
pub(crate) fn chebyshev_center(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, f64), GeometryError> {
    let (l, n) = (a.nrows(), a.ncols());
    // Standard form over (y⁺, y⁻, r, s): columns 2n + 1 + l.
    let cols = 2 * n + 1 + l;
    let mut e = DMatrix::zeros(l, cols);
    for i in 0..l {
        let row_norm = a.row(i).norm();
        for j in 0..n {
            e[(i, j)] = a[(i, j)];
            e[(i, n + j)] = -a[(i, j)];
        }
        e[(i, 2 * n)] = row_norm;
        e[(i, 2 * n + 1 + i)] = 1.0;
    }
    let mut c = DVector::zeros(cols);
    c[2 * n] = -1.0;
    match solve_standard_form(&c, &e, b) {
        LpOutcome::Optimal { x, value } => {
            let y = DVector::from_iterator(n, (0..n).map(|j| x[j] - x[n + j]));
            Ok((y, -value))
        }
        LpOutcome::Infeasible => Err(GeometryError::EmptyInterior),
        LpOutcome::Unbounded => Err(GeometryError::UnboundedSupport),
    }
}

/// ADMM on `max zᵀy  s.t.  b − Ay ∈ K`, splitting the cone constraint.
fn admm_support(
    body: &ConvexBody,
    z: &DVector<f64>,
) -> Result<(f64, DVector<f64>), GeometryError> {
    let a = body.a();
    let b = body.b();
    let n = body.dim();
    let l = a.nrows();

    let gram = a.transpose() * a;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(GeometryError::UnboundedSupport)?;

    let rho = 1.0;
    let mut y = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(l);
    let mut u = DVector::<f64>::zeros(l);

    let max_iter = 100_000;
    let tol = 1e-11;
    for it in 0..max_iter {
        // y-step: (AᵀA) y = z/ρ + Aᵀ(b − w − u)
        let rhs = z / rho + a.transpose() * (b - &w - &u);
        let y_new = chol.solve(&rhs);
        // w-step: project the cone residual
        let aw = a * &y_new;
        let w_new = body.cone.project(&(b - &aw - &u));
        // dual update
        let primal_res = &aw + &w_new - b;
        u += &primal_res;

        let dy = (&y_new - &y).norm();
        y = y_new;
        w = w_new;
        if y.norm() > 1e9 {
            return Err(GeometryError::UnboundedSupport);
        }
        if it > 10 && primal_res.norm() < tol && dy < tol {
            let lambda = body.cone.project(&(u.clone() * rho));
            return Ok((z.dot(&y), lambda));
        }
    }
    Err(GeometryError::NoConvergence)
}
