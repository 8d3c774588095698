//! Dual-multiplier certificates for clearance bounds.
//!
//! A certificate is a multiplier `λ` in the dual cone of the obstacle's
//! cone (plus `μ` in the dual cone of the body's cone for full-dimensional
//! objects) whose feasibility witnesses a distance, penetration, or
//! signed-distance bound through convex duality:
//!
//! - distance:        `(A p − b)ᵀλ > d`,   `‖Aᵀλ‖ ≤ 1`
//! - penetration:     `(b − A p)ᵀλ < p`,   `‖Aᵀλ‖ = 1`
//! - signed distance: `(A p − b)ᵀλ > d`,   `‖Aᵀλ‖ = 1`
//!
//! with `p` replaced by the pose translation and the extra alignment
//! equality `Gᵀμ + RᵀAᵀλ = 0` (and `−gᵀμ` in the margin) in the
//! full-dimensional case. This module evaluates those residuals, their
//! analytic derivatives for the NLP, and recovers optimal certificates
//! from oracle witnesses for testing and warm starts.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{ConvexBody, GeometryError, Pose};
use crate::oracle::{self, Operand, OracleError};

/// Structural feasibility tolerance used when verifying certificates.
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate kind does not match the requested operation")]
    KindMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("certificate for a full-dimensional body requires mu")]
    MissingMu,
    #[error("certificate recovery failed: {0}")]
    RecoveryFailed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    Distance,
    Penetration,
    SignedDistance,
}

/// Dual multipliers witnessing a clearance bound.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub lambda: DVector<f64>,
    pub mu: Option<DVector<f64>>,
    pub kind: CertKind,
}

impl Certificate {
    pub fn point(kind: CertKind, lambda: DVector<f64>) -> Self {
        Certificate {
            lambda,
            mu: None,
            kind,
        }
    }

    pub fn full_dim(kind: CertKind, lambda: DVector<f64>, mu: DVector<f64>) -> Self {
        Certificate {
            lambda,
            mu: Some(mu),
            kind,
        }
    }
}

/// Evaluated left-hand quantities of the certificate conditions.
#[derive(Debug, Clone)]
pub struct CertResidual {
    /// `(A p − b)ᵀλ` (distance / signed distance) or `(b − A p)ᵀλ`
    /// (penetration), with the `∓gᵀμ` term added in the full-dim case.
    pub margin: f64,
    /// `‖Aᵀλ‖₂`.
    pub dual_norm: f64,
    /// `Gᵀμ + RᵀAᵀλ`; present only for full-dimensional certificates.
    pub alignment: Option<DVector<f64>>,
    /// Cone slack profile of λ (componentwise for orthant factors, one
    /// `s − ‖z‖` entry per SOC factor).
    pub lambda_cone_slacks: Vec<f64>,
    /// Cone slack profile of μ when present.
    pub mu_cone_slacks: Option<Vec<f64>>,
}

impl CertResidual {
    pub fn lambda_min_slack(&self) -> f64 {
        self.lambda_cone_slacks
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mu_min_slack(&self) -> f64 {
        self.mu_cone_slacks
            .as_ref()
            .map(|s| s.iter().copied().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::INFINITY)
    }

    fn alignment_max(&self) -> f64 {
        self.alignment
            .as_ref()
            .map(|a| a.abs().max())
            .unwrap_or(0.0)
    }

    /// Structural feasibility for the given kind (cone memberships, norm
    /// condition, alignment) to tolerance `tol`; the margin is judged by
    /// the caller against its bound.
    pub fn feasible(&self, kind: CertKind, tol: f64) -> bool {
        let cones_ok = self.lambda_min_slack() >= -tol && self.mu_min_slack() >= -tol;
        let align_ok = self.alignment_max() <= tol;
        let norm_ok = match kind {
            CertKind::Distance => self.dual_norm <= 1.0 + tol,
            CertKind::Penetration | CertKind::SignedDistance => {
                (self.dual_norm - 1.0).abs() <= tol
            }
        };
        cones_ok && align_ok && norm_ok
    }

    /// A distance certificate is VALID for bound `d_min` when it is
    /// structurally feasible and its margin clears the bound.
    pub fn valid_for_distance(&self, d_min: f64) -> bool {
        self.feasible(CertKind::Distance, VERIFY_TOL) && self.margin > d_min
    }

    /// A penetration certificate is VALID for bound `p_max` when feasible
    /// and the margin is below the bound.
    pub fn valid_for_penetration(&self, p_max: f64) -> bool {
        self.feasible(CertKind::Penetration, VERIFY_TOL) && self.margin < p_max
    }

    pub fn valid_for_signed_distance(&self, d: f64) -> bool {
        self.feasible(CertKind::SignedDistance, VERIFY_TOL) && self.margin > d
    }
}

fn slack_profile(body: &ConvexBody, v: &DVector<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for (off, f) in body.cone().factors() {
        match f {
            crate::geometry::Cone::NonnegativeOrthant(d) => {
                for i in 0..d {
                    out.push(v[off + i]);
                }
            }
            crate::geometry::Cone::SecondOrderCone(d) => {
                let z_norm = (1..d).map(|i| v[off + i] * v[off + i]).sum::<f64>().sqrt();
                out.push(v[off] - z_norm);
            }
            crate::geometry::Cone::Product(_) => unreachable!("factors are atomic"),
        }
    }
    out
}

fn check_lambda(o: &ConvexBody, cert: &Certificate) -> Result<(), CertError> {
    if cert.lambda.len() != o.a().nrows() {
        return Err(CertError::DimensionMismatch {
            expected: o.a().nrows(),
            got: cert.lambda.len(),
        });
    }
    Ok(())
}

fn point_margin(
    p: &DVector<f64>,
    o: &ConvexBody,
    cert: &Certificate,
    expect: CertKind,
) -> Result<CertResidual, CertError> {
    if cert.kind != expect {
        return Err(CertError::KindMismatch);
    }
    check_lambda(o, cert)?;
    if p.len() != o.dim() {
        return Err(CertError::DimensionMismatch {
            expected: o.dim(),
            got: p.len(),
        });
    }
    let residual = o.a() * p - o.b();
    let raw = residual.dot(&cert.lambda);
    let margin = match expect {
        CertKind::Penetration => -raw,
        _ => raw,
    };
    let dual_norm = (o.a().transpose() * &cert.lambda).norm();
    Ok(CertResidual {
        margin,
        dual_norm,
        alignment: None,
        lambda_cone_slacks: slack_profile(o, &cert.lambda),
        mu_cone_slacks: None,
    })
}

/// Margin `(A p − b)ᵀλ` of a point-mass distance certificate.
pub fn point_distance_margin(
    p: &DVector<f64>,
    o: &ConvexBody,
    cert: &Certificate,
) -> Result<CertResidual, CertError> {
    point_margin(p, o, cert, CertKind::Distance)
}

/// Margin `(b − A p)ᵀλ` of a point-mass penetration certificate.
pub fn point_penetration_margin(
    p: &DVector<f64>,
    o: &ConvexBody,
    cert: &Certificate,
) -> Result<CertResidual, CertError> {
    point_margin(p, o, cert, CertKind::Penetration)
}

/// Margin `(A p − b)ᵀλ` of a point-mass signed-distance certificate
/// (equality-norm form).
pub fn point_signed_distance_margin(
    p: &DVector<f64>,
    o: &ConvexBody,
    cert: &Certificate,
) -> Result<CertResidual, CertError> {
    point_margin(p, o, cert, CertKind::SignedDistance)
}

fn body_margin(
    pose: &Pose,
    base: &ConvexBody,
    o: &ConvexBody,
    cert: &Certificate,
    expect: CertKind,
) -> Result<CertResidual, CertError> {
    if cert.kind != expect {
        return Err(CertError::KindMismatch);
    }
    check_lambda(o, cert)?;
    let mu = cert.mu.as_ref().ok_or(CertError::MissingMu)?;
    if mu.len() != base.a().nrows() {
        return Err(CertError::DimensionMismatch {
            expected: base.a().nrows(),
            got: mu.len(),
        });
    }
    let t = pose.translation();
    let residual = o.a() * t - o.b();
    let raw = residual.dot(&cert.lambda) - base.b().dot(mu);
    let margin = match expect {
        CertKind::Penetration => -raw,
        _ => raw,
    };
    let a_t_lambda = o.a().transpose() * &cert.lambda;
    let alignment = base.a().transpose() * mu + pose.rotation().transpose() * &a_t_lambda;
    Ok(CertResidual {
        margin,
        dual_norm: a_t_lambda.norm(),
        alignment: Some(alignment),
        lambda_cone_slacks: slack_profile(o, &cert.lambda),
        mu_cone_slacks: Some(slack_profile(base, mu)),
    })
}

/// Margin `−gᵀμ + (A t − b)ᵀλ` with alignment `Gᵀμ + RᵀAᵀλ` for a
/// full-dimensional distance certificate.
pub fn body_distance_margin(
    pose: &Pose,
    base: &ConvexBody,
    o: &ConvexBody,
    cert: &Certificate,
) -> Result<CertResidual, CertError> {
    body_margin(pose, base, o, cert, CertKind::Distance)
}

/// Margin `gᵀμ + (b − A t)ᵀλ` for a full-dimensional penetration
/// certificate.
pub fn body_penetration_margin(
    pose: &Pose,
    base: &ConvexBody,
    o: &ConvexBody,
    cert: &Certificate,
) -> Result<CertResidual, CertError> {
    body_margin(pose, base, o, cert, CertKind::Penetration)
}

/// Margin `−gᵀμ + (A t − b)ᵀλ` for a full-dimensional signed-distance
/// certificate (equality-norm form).
pub fn body_signed_distance_margin(
    pose: &Pose,
    base: &ConvexBody,
    o: &ConvexBody,
    cert: &Certificate,
) -> Result<CertResidual, CertError> {
    body_margin(pose, base, o, cert, CertKind::SignedDistance)
}

/// Recover an optimal certificate from oracle witnesses: the separating or
/// deepest-penetration direction `z*` yields `λ` through the obstacle's
/// support dual and `μ` through the base shape's support dual at `−Rᵀz*`,
/// making the certificate margin coincide with the oracle value.
pub fn recover_certificate(
    e: &Operand,
    o: &ConvexBody,
    kind: CertKind,
) -> Result<Certificate, CertError> {
    let (d, (we, wo)) = oracle::distance(e, o)?;

    let direction = if d > 0.0 {
        (we - wo) / d
    } else {
        if kind == CertKind::Distance {
            // Overlapping sets admit only the trivial distance certificate.
            let lambda = DVector::zeros(o.a().nrows());
            let mu = match e {
                Operand::Point(_) => None,
                Operand::Body(tb) => Some(DVector::zeros(tb.base().a().nrows())),
            };
            return Ok(Certificate { lambda, mu, kind });
        }
        let (_, dir) = oracle::penetration(e, o)?;
        dir.vector().clone()
    };

    let (_, lambda) = o.support_with_dual(&direction)?;
    let mu = match e {
        Operand::Point(_) => None,
        Operand::Body(tb) => {
            let local = -(tb.pose().rotation().transpose() * &direction);
            let (_, mu) = tb.base().support_with_dual(&local)?;
            Some(mu)
        }
    };

    let norm = (o.a().transpose() * &lambda).norm();
    if kind != CertKind::Distance && (norm - 1.0).abs() > 1e-6 {
        return Err(CertError::RecoveryFailed(format!(
            "support dual norm {norm} is not unit"
        )));
    }
    Ok(Certificate { lambda, mu, kind })
}

/// Analytic partial derivatives of the certificate residuals, chained
/// through planar poses where rotation enters.
pub mod jac {
    use super::*;

    fn margin_sign(kind: CertKind) -> f64 {
        match kind {
            CertKind::Penetration => -1.0,
            _ => 1.0,
        }
    }

    /// ∂margin/∂p for the point case: `±Aᵀλ`.
    pub fn point_margin_wrt_position(
        o: &ConvexBody,
        lambda: &DVector<f64>,
        kind: CertKind,
    ) -> DVector<f64> {
        (o.a().transpose() * lambda) * margin_sign(kind)
    }

    /// ∂margin/∂λ for the point case: `±(A p − b)`.
    pub fn point_margin_wrt_lambda(
        o: &ConvexBody,
        p: &DVector<f64>,
        kind: CertKind,
    ) -> DVector<f64> {
        (o.a() * p - o.b()) * margin_sign(kind)
    }

    /// Gradient of `‖Aᵀλ‖² − 1` with respect to λ: `2AAᵀλ`.
    pub fn norm_sq_wrt_lambda(o: &ConvexBody, lambda: &DVector<f64>) -> DVector<f64> {
        (o.a() * (o.a().transpose() * lambda)) * 2.0
    }

    /// ∂margin/∂t for the full-dimensional case: `±Aᵀλ`.
    pub fn body_margin_wrt_translation(
        o: &ConvexBody,
        lambda: &DVector<f64>,
        kind: CertKind,
    ) -> DVector<f64> {
        (o.a().transpose() * lambda) * margin_sign(kind)
    }

    /// ∂margin/∂λ for the full-dimensional case: `±(A t − b)`.
    pub fn body_margin_wrt_lambda(
        o: &ConvexBody,
        t: &DVector<f64>,
        kind: CertKind,
    ) -> DVector<f64> {
        (o.a() * t - o.b()) * margin_sign(kind)
    }

    /// ∂margin/∂μ: `∓g`.
    pub fn body_margin_wrt_mu(base: &ConvexBody, kind: CertKind) -> DVector<f64> {
        -base.b() * margin_sign(kind)
    }

    /// ∂alignment/∂yaw for a planar pose: `(dR/dyaw)ᵀ Aᵀλ`.
    pub fn alignment_wrt_yaw(o: &ConvexBody, lambda: &DVector<f64>, yaw: f64) -> DVector<f64> {
        let (s, c) = yaw.sin_cos();
        // dR/dyaw = [[-s, -c], [c, -s]], transposed and applied to Aᵀλ.
        let v = o.a().transpose() * lambda;
        DVector::from_vec(vec![-s * v[0] + c * v[1], -c * v[0] - s * v[1]])
    }

    /// ∂alignment/∂λ: `RᵀAᵀ`.
    pub fn alignment_wrt_lambda(o: &ConvexBody, rotation: &DMatrix<f64>) -> DMatrix<f64> {
        rotation.transpose() * o.a().transpose()
    }

    /// ∂alignment/∂μ: `Gᵀ`.
    pub fn alignment_wrt_mu(base: &ConvexBody) -> DMatrix<f64> {
        base.a().transpose().into_owned()
    }
}
