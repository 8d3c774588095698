//! Euclidean projection onto conic bodies.
//!
//! Polytopes use exact active-set enumeration (the row counts here are a
//! dozen at most), ellipsoids a safeguarded Newton iteration on the single
//! Lagrange multiplier, and product bodies Dykstra's alternating scheme
//! over their factors.

use nalgebra::{DMatrix, DVector};

use super::{ConvexBody, GeometryError, ShapeClass};

const FEAS_TOL: f64 = 1e-9;

pub fn project_point(body: &ConvexBody, x: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
    if x.len() != body.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: body.dim(),
            got: x.len(),
        });
    }
    match &body.shape {
        ShapeClass::Polytope => project_polytope(body.a(), body.b(), x),
        ShapeClass::Ellipsoid { e, center, .. } => Ok(project_ellipsoid(e, center, x)),
        ShapeClass::General => project_dykstra(body, x),
    }
}

/// Exact projection onto `{y : Ay ≤ b}` by enumerating candidate active
/// sets of size ≤ n and checking both primal and dual KKT feasibility.
fn project_polytope(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>, GeometryError> {
    let l = a.nrows();
    let n = a.ncols();

    let residual = a * x - b;
    if residual.iter().all(|&r| r <= FEAS_TOL) {
        return Ok(x.clone());
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut subset: Vec<usize> = Vec::with_capacity(n);
    enumerate_subsets(l, n.min(l), &mut subset, &mut |s: &[usize]| {
        if s.is_empty() {
            return;
        }
        let k = s.len();
        let mut a_s = DMatrix::zeros(k, n);
        let mut rhs = DVector::zeros(k);
        for (i, &row) in s.iter().enumerate() {
            a_s.row_mut(i).copy_from(&a.row(row));
            rhs[i] = residual[row] + 0.0; // a_row·x − b_row
        }
        let gram = &a_s * a_s.transpose();
        let Some(lu) = gram.clone().full_piv_lu().try_inverse() else {
            return;
        };
        let nu = &lu * rhs;
        if nu.iter().any(|&v| v < -FEAS_TOL) {
            return;
        }
        let y = x - a_s.transpose() * &nu;
        let check = a * &y - b;
        if check.iter().any(|&r| r > 1e-8) {
            return;
        }
        let d = (&y - x).norm();
        if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
            best = Some((d, y));
        }
    });

    best.map(|(_, y)| y).ok_or(GeometryError::NoConvergence)
}

fn enumerate_subsets<F: FnMut(&[usize])>(
    l: usize,
    max_size: usize,
    current: &mut Vec<usize>,
    f: &mut F,
) {
    fn recurse<F: FnMut(&[usize])>(
        start: usize,
        l: usize,
        max_size: usize,
        current: &mut Vec<usize>,
        f: &mut F,
    ) {
        f(current);
        if current.len() == max_size {
            return;
        }
        for i in start..l {
            current.push(i);
            recurse(i + 1, l, max_size, current, f);
            current.pop();
        }
    }
    recurse(0, l, max_size, current, f);
}

/// Projection onto `{y : ‖E(y − c)‖ ≤ 1}` via Newton on the multiplier of
/// the single quadratic constraint.
fn project_ellipsoid(e: &DMatrix<f64>, center: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let q = e.transpose() * e;
    let diff = x - center;
    let level = (e * &diff).norm_squared();
    if level <= 1.0 {
        return x.clone();
    }

    let eig = q.symmetric_eigen();
    let d = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let xt = v.transpose() * &diff;

    let g = |nu: f64| -> f64 {
        (0..d.len())
            .map(|i| d[i] * xt[i] * xt[i] / (1.0 + nu * d[i]).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let gp = |nu: f64| -> f64 {
        (0..d.len())
            .map(|i| -2.0 * d[i] * d[i] * xt[i] * xt[i] / (1.0 + nu * d[i]).powi(3))
            .sum::<f64>()
    };

    // g is strictly decreasing on ν ≥ 0 with g(0) > 0; bracket then Newton.
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 4.0;
        if hi > 1e18 {
            break;
        }
    }
    let mut lo = 0.0;
    let mut nu = hi * 0.5;
    for _ in 0..200 {
        let gv = g(nu);
        if gv.abs() < 1e-15 {
            break;
        }
        if gv > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        let step = gv / gp(nu);
        let mut next = nu - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - nu).abs() < 1e-16 * (1.0 + nu) {
            nu = next;
            break;
        }
        nu = next;
    }

    let scaled = DVector::from_iterator(d.len(), (0..d.len()).map(|i| xt[i] / (1.0 + nu * d[i])));
    center + v * scaled
}

/// Dykstra's alternating projections onto the intersection of the product
/// factors. Each factor must itself be a polytope block or a lifted
/// ellipsoid block.
fn project_dykstra(body: &ConvexBody, x: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
    let factors = body.factor_bodies();
    for f in &factors {
        if matches!(f.shape, ShapeClass::General) {
            return Err(GeometryError::UnsupportedShape(
                "product factor is neither polytope rows nor a lifted ellipsoid",
            ));
        }
    }
    let n = body.dim();
    let mut current = x.clone();
    let mut increments: Vec<DVector<f64>> = vec![DVector::zeros(n); factors.len()];

    for _ in 0..20_000 {
        let before = current.clone();
        for (f, inc) in factors.iter().zip(increments.iter_mut()) {
            let target = &current + &*inc;
            let projected = match &f.shape {
                ShapeClass::Polytope => project_polytope(f.a(), f.b(), &target)?,
                ShapeClass::Ellipsoid { e, center, .. } => project_ellipsoid(e, center, &target),
                ShapeClass::General => unreachable!("checked above"),
            };
            *inc = target - &projected;
            current = projected;
        }
        if (&current - before).norm() < 1e-12 {
            return Ok(current);
        }
    }
    Err(GeometryError::NoConvergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cone;

    #[test]
    fn projects_onto_box() {
        let b = ConvexBody::axis_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let p = b.project(&DVector::from_vec(vec![2.0, 0.3])).unwrap();
        assert!((p - DVector::from_vec(vec![1.0, 0.3])).norm() < 1e-10);
        // corner case
        let p = b.project(&DVector::from_vec(vec![3.0, -4.0])).unwrap();
        assert!((p - DVector::from_vec(vec![1.0, -1.0])).norm() < 1e-10);
        // interior point is a fixed point
        let p = b.project(&DVector::from_vec(vec![0.2, -0.4])).unwrap();
        assert!((p - DVector::from_vec(vec![0.2, -0.4])).norm() < 1e-12);
    }

    #[test]
    fn projects_onto_ellipsoid() {
        // Circle of radius 2 at origin: projection of (5, 0) is (2, 0).
        let b = ConvexBody::ball(DVector::zeros(2), 2.0).unwrap();
        let p = b.project(&DVector::from_vec(vec![5.0, 0.0])).unwrap();
        assert!((p - DVector::from_vec(vec![2.0, 0.0])).norm() < 1e-10);
        // Anisotropic: E = diag(1, 2) so semi-axes (1, 0.5).
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = ConvexBody::ellipsoid(e.clone(), DVector::zeros(2)).unwrap();
        let p = b.project(&DVector::from_vec(vec![0.0, 3.0])).unwrap();
        assert!((&p - DVector::from_vec(vec![0.0, 0.5])).norm() < 1e-9);
        let lvl = (&e * &p).norm();
        assert!((lvl - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projects_onto_product_intersection() {
        // Box [-1,1]^2 ∩ disk radius 1.2: project (2, 2) -> on the disk arc
        // inside the box corner region.
        let mut a = DMatrix::zeros(7, 2);
        let mut b = DVector::zeros(7);
        a[(0, 0)] = 1.0;
        b[0] = 1.0;
        a[(1, 0)] = -1.0;
        b[1] = 1.0;
        a[(2, 1)] = 1.0;
        b[2] = 1.0;
        a[(3, 1)] = -1.0;
        b[3] = 1.0;
        b[4] = 1.0;
        a[(5, 0)] = -1.0 / 1.2;
        a[(6, 1)] = -1.0 / 1.2;
        let cone = Cone::Product(vec![Cone::NonnegativeOrthant(4), Cone::SecondOrderCone(3)]);
        let body = ConvexBody::new(a, b, cone).unwrap();
        let p = body.project(&DVector::from_vec(vec![2.0, 2.0])).unwrap();
        let expect = 1.2 / 2.0f64.sqrt();
        assert!((p[0] - expect).abs() < 1e-6, "p = {p:?}");
        assert!((p[1] - expect).abs() < 1e-6);
    }
}
