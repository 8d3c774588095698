//! Conic representations of convex sets, cones and their duals, rigid-body
//! poses, and support-function evaluation.
//!
//! A body is the set `{y : A y ⪯_K b}` for a proper cone `K`. The
//! nonnegative orthant gives polytopes, the second-order cone gives
//! ellipsoids, and product cones give intersections of both. Bodies are
//! validated to be compact with non-empty interior at construction, so
//! every support-function query downstream is finite.

mod project;
mod support;

pub use project::project_point;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Membership slack tolerance for cone and set queries.
pub const MEMBER_TOL: f64 = 1e-9;
/// Orthogonality tolerance for rotation matrices.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Unit-norm tolerance for hyperplane normals.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("set is unbounded in the probed direction")]
    UnboundedSupport,
    #[error("set is empty or has empty interior")]
    EmptyInterior,
    #[error("matrix is not a proper rotation: {0}")]
    InvalidRotation(&'static str),
    #[error("vector is not unit length")]
    NotUnit,
    #[error("iterative geometric solve did not converge")]
    NoConvergence,
    #[error("unsupported shape for this operation: {0}")]
    UnsupportedShape(&'static str),
}

/// A closed convex pointed cone with non-empty interior.
#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `{v : v ≥ 0}` componentwise.
    NonnegativeOrthant(usize),
    /// `{(s, z) : ‖z‖₂ ≤ s}` with `s` the first coordinate.
    SecondOrderCone(usize),
    /// Cartesian product of factors, stacked in order.
    Product(Vec<Cone>),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match self {
            Cone::NonnegativeOrthant(d) | Cone::SecondOrderCone(d) => *d,
            Cone::Product(fs) => fs.iter().map(Cone::dim).sum(),
        }
    }

    fn validate(&self) -> bool {
        match self {
            Cone::NonnegativeOrthant(d) => *d >= 1,
            Cone::SecondOrderCone(d) => *d >= 1,
            Cone::Product(fs) => !fs.is_empty() && fs.iter().all(Cone::validate),
        }
    }

    /// Atomic factors as (row offset, factor) pairs, flattening products.
    pub fn factors(&self) -> Vec<(usize, Cone)> {
        let mut out = Vec::new();
        self.collect_factors(0, &mut out);
        out
    }

    fn collect_factors(&self, offset: usize, out: &mut Vec<(usize, Cone)>) {
        match self {
            Cone::Product(fs) => {
                let mut off = offset;
                for f in fs {
                    f.collect_factors(off, out);
                    off += f.dim();
                }
            }
            atomic => out.push((offset, atomic.clone())),
        }
    }

    /// Membership `v ∈ K` with slack tolerance `tol`.
    pub fn member_with_tol(&self, v: &DVector<f64>, tol: f64) -> Result<bool, GeometryError> {
        if v.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(self.min_slack(v) >= -tol)
    }

    pub fn member(&self, v: &DVector<f64>) -> Result<bool, GeometryError> {
        self.member_with_tol(v, MEMBER_TOL)
    }

    /// Membership in the dual cone. The orthant and second-order cone are
    /// self-dual and the dual of a product is the product of duals, so this
    /// coincides with primal membership for the cones supported here.
    pub fn dual_member(&self, v: &DVector<f64>) -> Result<bool, GeometryError> {
        self.member(v)
    }

    pub fn dual_member_with_tol(&self, v: &DVector<f64>, tol: f64) -> Result<bool, GeometryError> {
        self.member_with_tol(v, tol)
    }

    /// Smallest slack of `v` relative to the cone boundary; negative values
    /// mean violation. Orthant: min component. SOC block: `s − ‖z‖`.
    pub fn min_slack(&self, v: &DVector<f64>) -> f64 {
        let mut worst = f64::INFINITY;
        for (off, f) in self.factors() {
            let s = match f {
                Cone::NonnegativeOrthant(d) => {
                    (0..d).map(|i| v[off + i]).fold(f64::INFINITY, f64::min)
                }
                Cone::SecondOrderCone(d) => {
                    let z_norm = (1..d).map(|i| v[off + i] * v[off + i]).sum::<f64>().sqrt();
                    v[off] - z_norm
                }
                Cone::Product(_) => unreachable!("factors are atomic"),
            };
            worst = worst.min(s);
        }
        worst
    }

    /// Euclidean projection onto the cone.
    pub(crate) fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        for (off, f) in self.factors() {
            match f {
                Cone::NonnegativeOrthant(d) => {
                    for i in 0..d {
                        out[off + i] = out[off + i].max(0.0);
                    }
                }
                Cone::SecondOrderCone(d) => {
                    let s = v[off];
                    let z_norm = (1..d).map(|i| v[off + i] * v[off + i]).sum::<f64>().sqrt();
                    if z_norm <= s {
                        // already inside
                    } else if z_norm <= -s {
                        for i in 0..d {
                            out[off + i] = 0.0;
                        }
                    } else {
                        let alpha = 0.5 * (s + z_norm);
                        out[off] = alpha;
                        let scale = if z_norm > 0.0 { alpha / z_norm } else { 0.0 };
                        for i in 1..d {
                            out[off + i] = v[off + i] * scale;
                        }
                    }
                }
                Cone::Product(_) => unreachable!("factors are atomic"),
            }
        }
        out
    }
}

/// Cached shape classification, decided once at construction.
#[derive(Debug, Clone)]
pub(crate) enum ShapeClass {
    /// All rows under one orthant cone.
    Polytope,
    /// Single SOC in the lifted form `{y : ‖E(y − c)‖ ≤ 1}`.
    Ellipsoid {
        e: DMatrix<f64>,
        center: DVector<f64>,
        e_inv: DMatrix<f64>,
    },
    /// Anything else (product cones, general SOC rows).
    General,
}

/// A compact convex set `{y : A y ⪯_K b}` with non-empty interior.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    a: DMatrix<f64>,
    b: DVector<f64>,
    cone: Cone,
    shape: ShapeClass,
    /// A strictly feasible point found during validation.
    interior: DVector<f64>,
}

impl ConvexBody {
    /// Build and validate a body. Compactness is checked heuristically by
    /// probing the support function in the `2n` axis directions plus ten
    /// fixed pseudo-random directions; non-empty interior by locating a
    /// strictly feasible point.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, cone: Cone) -> Result<Self, GeometryError> {
        if !cone.validate() {
            return Err(GeometryError::UnsupportedShape("invalid cone"));
        }
        if a.nrows() != cone.dim() || a.nrows() != b.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: cone.dim(),
                got: a.nrows(),
            });
        }
        let shape = classify(&a, &b, &cone);
        let mut body = ConvexBody {
            interior: DVector::zeros(a.ncols()),
            a,
            b,
            cone,
            shape,
        };
        body.check_compact()?;
        body.interior = body.find_interior()?;
        Ok(body)
    }

    /// Internal constructor that skips validation; used for row-block
    /// factors of product bodies, which may be unbounded on their own.
    pub(crate) fn new_unchecked(a: DMatrix<f64>, b: DVector<f64>, cone: Cone) -> Self {
        let shape = classify(&a, &b, &cone);
        ConvexBody {
            interior: DVector::zeros(a.ncols()),
            a,
            b,
            cone,
            shape,
        }
    }

    /// Axis-aligned box `[lo, hi]` with rows ordered `(+e₁, −e₁, +e₂, …)`.
    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Result<Self, GeometryError> {
        let n = lo.len();
        if hi.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: hi.len(),
            });
        }
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(a, b, Cone::NonnegativeOrthant(2 * n))
    }

    /// Polytope `{y : a y ≤ b}` under the orthant cone.
    pub fn polytope(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, GeometryError> {
        let l = a.nrows();
        Self::new(a, b, Cone::NonnegativeOrthant(l))
    }

    /// Ellipsoid `{y : ‖E(y − c)‖₂ ≤ 1}` lifted into conic form: the first
    /// row reads `1 ≥ 0·y` and the remaining rows carry `E(y − c)`.
    pub fn ellipsoid(e: DMatrix<f64>, center: DVector<f64>) -> Result<Self, GeometryError> {
        let n = e.ncols();
        if e.nrows() != n || center.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: center.len(),
            });
        }
        let mut a = DMatrix::zeros(n + 1, n);
        let mut b = DVector::zeros(n + 1);
        b[0] = 1.0;
        let ec = &e * &center;
        for i in 0..n {
            for j in 0..n {
                a[(i + 1, j)] = -e[(i, j)];
            }
            b[i + 1] = -ec[i];
        }
        Self::new(a, b, Cone::SecondOrderCone(n + 1))
    }

    /// Sphere of radius `r` about `center`.
    pub fn ball(center: DVector<f64>, r: f64) -> Result<Self, GeometryError> {
        let n = center.len();
        Self::ellipsoid(DMatrix::identity(n, n) / r, center)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self.shape, ShapeClass::Polytope)
    }

    /// Ellipsoid parameters `(E, c)` when the body is in lifted SOC form.
    pub fn ellipsoid_params(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.shape {
            ShapeClass::Ellipsoid { e, center, .. } => Some((e, center)),
            _ => None,
        }
    }

    /// A strictly feasible point found at construction.
    pub fn interior_point(&self) -> &DVector<f64> {
        &self.interior
    }

    /// Membership `A y ⪯_K b` with slack ≥ −tol.
    pub fn member_with_tol(&self, y: &DVector<f64>, tol: f64) -> Result<bool, GeometryError> {
        if y.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let slack = &self.b - &self.a * y;
        Ok(self.cone.min_slack(&slack) >= -tol)
    }

    pub fn member(&self, y: &DVector<f64>) -> Result<bool, GeometryError> {
        self.member_with_tol(y, MEMBER_TOL)
    }

    /// Support function `max_{y ∈ body} yᵀz`.
    pub fn support(&self, z: &DVector<f64>) -> Result<f64, GeometryError> {
        support::support(self, z).map(|(v, _)| v)
    }

    /// Support value together with a dual certificate `λ ∈ K*` satisfying
    /// `Aᵀλ = z` and `bᵀλ = support(z)`.
    pub fn support_with_dual(
        &self,
        z: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>), GeometryError> {
        support::support(self, z)
    }

    /// Euclidean projection of a point onto the body.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        project::project_point(self, x)
    }

    /// Row blocks of a product body as standalone (possibly unbounded)
    /// factor bodies.
    pub(crate) fn factor_bodies(&self) -> Vec<ConvexBody> {
        self.cone
            .factors()
            .into_iter()
            .map(|(off, f)| {
                let d = f.dim();
                let a = self.a.rows(off, d).into_owned();
                let b = DVector::from_iterator(d, (0..d).map(|i| self.b[off + i]));
                ConvexBody::new_unchecked(a, b, f)
            })
            .collect()
    }

    fn check_compact(&self) -> Result<(), GeometryError> {
        let n = self.dim();
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            dirs.push(e.clone());
            dirs.push(-e);
        }
        // Fixed pseudo-random probes; a shared generator would make body
        // construction order-dependent.
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..10 {
            let mut d = DVector::zeros(n);
            for j in 0..n {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                d[j] = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
            }
            if d.norm() > 1e-9 {
                d /= d.norm();
                dirs.push(d);
            }
        }
        for d in &dirs {
            support::support(self, d)?;
        }
        Ok(())
    }

    fn find_interior(&self) -> Result<DVector<f64>, GeometryError> {
        match &self.shape {
            ShapeClass::Ellipsoid { center, .. } => Ok(center.clone()),
            ShapeClass::Polytope => {
                let (y, r) = support::chebyshev_center(&self.a, &self.b)?;
                if r <= 1e-9 {
                    return Err(GeometryError::EmptyInterior);
                }
                Ok(y)
            }
            ShapeClass::General => {
                // Average projections of scattered probes; convexity keeps
                // the average feasible and pulls it off the boundary.
                let n = self.dim();
                let mut acc = DVector::zeros(n);
                let mut count = 0.0;
                for i in 0..2 * n {
                    let mut p = DVector::zeros(n);
                    p[i / 2] = if i % 2 == 0 { 1.0 } else { -1.0 };
                    let proj = project::project_point(self, &p)?;
                    acc += proj;
                    count += 1.0;
                }
                let y = acc / count;
                let slack = &self.b - &self.a * &y;
                if self.cone.min_slack(&slack) <= 1e-9 {
                    return Err(GeometryError::EmptyInterior);
                }
                Ok(y)
            }
        }
    }
}

fn classify(a: &DMatrix<f64>, b: &DVector<f64>, cone: &Cone) -> ShapeClass {
    match cone {
        Cone::NonnegativeOrthant(_) => ShapeClass::Polytope,
        Cone::SecondOrderCone(d) => {
            let n = a.ncols();
            if *d != n + 1 || a.row(0).iter().any(|v| v.abs() > 0.0) || (b[0] - 1.0).abs() > 0.0 {
                return ShapeClass::General;
            }
            let e = -a.rows(1, n).into_owned();
            match e.clone().try_inverse() {
                Some(e_inv) => {
                    let bz = DVector::from_iterator(n, (1..=n).map(|i| b[i]));
                    let center = &e_inv * (-bz);
                    ShapeClass::Ellipsoid { e, center, e_inv }
                }
                None => ShapeClass::General,
            }
        }
        Cone::Product(_) => ShapeClass::General,
    }
}

/// A rigid-body placement: proper rotation plus translation.
#[derive(Debug, Clone)]
pub struct Pose {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl Pose {
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self, GeometryError> {
        let n = rotation.nrows();
        if rotation.ncols() != n || translation.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: translation.len(),
            });
        }
        let gram = rotation.transpose() * &rotation;
        let id = DMatrix::identity(n, n);
        if (gram - id).abs().max() > ORTHOGONALITY_TOL {
            return Err(GeometryError::InvalidRotation("RᵀR ≠ I"));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHOGONALITY_TOL {
            return Err(GeometryError::InvalidRotation("det ≠ +1"));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity(n: usize) -> Self {
        Pose {
            rotation: DMatrix::identity(n, n),
            translation: DVector::zeros(n),
        }
    }

    /// Planar pose from a yaw angle and translation.
    pub fn planar(yaw: f64, translation: DVector<f64>) -> Result<Self, GeometryError> {
        Pose::new(rotation2d(yaw), translation)
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// Map a body-frame point into the world frame.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.rotation * y + &self.translation
    }

    /// Map a world-frame point into the body frame.
    pub fn apply_inverse(&self, y: &DVector<f64>) -> DVector<f64> {
        self.rotation.transpose() * (y - &self.translation)
    }
}

/// Standard planar rotation.
pub fn rotation2d(yaw: f64) -> DMatrix<f64> {
    let (s, c) = yaw.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Z-X-Y Euler rotation `Rz(ψ)·Rx(φ)·Ry(θ)` mapping body to world frame.
pub fn rotation_zxy(phi: f64, theta: f64, psi: f64) -> DMatrix<f64> {
    let (s_phi, c_phi) = phi.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    let (s_psi, c_psi) = psi.sin_cos();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            c_psi * c_th - s_phi * s_psi * s_th,
            -c_phi * s_psi,
            c_psi * s_th + s_phi * s_psi * c_th,
            s_psi * c_th + s_phi * c_psi * s_th,
            c_phi * c_psi,
            s_psi * s_th - s_phi * c_psi * c_th,
            -c_phi * s_th,
            s_phi,
            c_phi * c_th,
        ],
    )
}

/// A unit-norm direction, validated to `UNIT_TOL`.
#[derive(Debug, Clone)]
pub struct Direction(DVector<f64>);

impl Direction {
    pub fn new(v: DVector<f64>) -> Result<Self, GeometryError> {
        if (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(GeometryError::NotUnit);
        }
        Ok(Direction(v))
    }

    /// Normalize a nonzero vector into a direction.
    pub fn normalize(v: DVector<f64>) -> Result<Self, GeometryError> {
        let n = v.norm();
        if n < 1e-300 {
            return Err(GeometryError::NotUnit);
        }
        Ok(Direction(v / n))
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Lazy view of `R·B + t`; support and membership are answered through the
/// base body without materializing a new inequality description.
#[derive(Debug, Clone)]
pub struct TransformedBody {
    body: ConvexBody,
    pose: Pose,
}

/// Place a body under a pose.
pub fn transform(body: &ConvexBody, pose: &Pose) -> Result<TransformedBody, GeometryError> {
    if pose.dim() != body.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: body.dim(),
            got: pose.dim(),
        });
    }
    Ok(TransformedBody {
        body: body.clone(),
        pose: pose.clone(),
    })
}

impl TransformedBody {
    pub fn base(&self) -> &ConvexBody {
        &self.body
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    /// `support(R·B + t, z) = support(B, Rᵀz) + tᵀz`.
    pub fn support(&self, z: &DVector<f64>) -> Result<f64, GeometryError> {
        let local = self.pose.rotation().transpose() * z;
        Ok(self.body.support(&local)? + self.pose.translation().dot(z))
    }

    pub fn member(&self, y: &DVector<f64>) -> Result<bool, GeometryError> {
        self.body.member(&self.pose.apply_inverse(y))
    }

    /// Explicit inequality description of the transformed set:
    /// `{y : (A Rᵀ) y ⪯_K b + A Rᵀ t}`.
    pub fn materialize(&self) -> ConvexBody {
        let r_t = self.pose.rotation().transpose();
        let a = self.body.a() * &r_t;
        let b = self.body.b() + &a * self.pose.translation();
        ConvexBody::new_unchecked(a, b, self.body.cone().clone())
    }
}
