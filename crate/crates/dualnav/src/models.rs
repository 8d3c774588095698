//! Vehicle dynamics: a 12-state quadcopter and a kinematic bicycle car,
//! with forward-Euler discretization over a variable sampling time and
//! analytic Jacobians of everything the transcription needs.
//!
//! Quadcopter state: `[X, Y, Z, φ, θ, ψ, Ẋ, Ẏ, Ż, p, q, r]` with Z-X-Y
//! Euler angles and body rates `(p, q, r)`; inputs are the four rotor
//! speeds. Car state: `[X, Y, φ, v]` at the rear-axle center; inputs are
//! steering angle and acceleration.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{rotation2d, ConvexBody, Pose};

pub const QUAD_STATE_DIM: usize = 12;
pub const QUAD_INPUT_DIM: usize = 4;
pub const CAR_STATE_DIM: usize = 4;
pub const CAR_INPUT_DIM: usize = 2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("attitude too close to the Euler-rate singularity (|phi| near pi/2)")]
    SingularAttitude,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Quadcopter physical parameters and operating bounds.
///
/// Only the mass (0.5 kg) and the half-meter diameter are fixed by the
/// scenario definition; the remaining values are shipped configuration
/// defaults for a quadcopter of that class and can be overridden through
/// the parameter file. The hover identity holds for any choice.
#[derive(Debug, Clone)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    /// Center-of-gravity to rotor arm length.
    pub arm_length: f64,
    /// Diagonal inertia (kg·m²).
    pub inertia: [f64; 3],
    /// Rotor thrust coefficient, N/(rad/s)².
    pub thrust_coeff: f64,
    /// Rotor drag-moment coefficient, N·m/(rad/s)².
    pub moment_coeff: f64,
    /// Rotor speed bounds, rad/s.
    pub rotor_speed_bounds: (f64, f64),
    /// Bound on |φ| and |θ|, rad.
    pub tilt_bound: f64,
    /// Bound on |ψ|, rad.
    pub yaw_bound: f64,
    /// Bound on each velocity component, m/s.
    pub velocity_bound: f64,
    /// Bound on each body rate, rad/s.
    pub rate_bound: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams {
            mass: 0.5,
            gravity: 9.81,
            arm_length: 0.25,
            inertia: [2.32e-3, 2.32e-3, 4.0e-3],
            thrust_coeff: 5.57e-6,
            moment_coeff: 1.36e-7,
            rotor_speed_bounds: (0.0, 800.0),
            tilt_bound: 0.6,
            yaw_bound: std::f64::consts::PI,
            velocity_bound: 5.0,
            rate_bound: 3.0,
        }
    }
}

impl QuadParams {
    /// Rotor speed at which four rotors balance gravity.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (4.0 * self.thrust_coeff)).sqrt()
    }

    pub fn hover_input(&self) -> DVector<f64> {
        DVector::from_element(QUAD_INPUT_DIM, self.hover_speed())
    }
}

/// Kinematic bicycle parameters and the collision rectangle.
#[derive(Debug, Clone)]
pub struct CarParams {
    /// Wheelbase, m.
    pub wheelbase: f64,
    /// |δ| bound, rad.
    pub steer_bound: f64,
    /// |δ̇| bound, rad/s.
    pub steer_rate_bound: f64,
    /// |a| bound, m/s².
    pub accel_bound: f64,
    /// Velocity range, m/s.
    pub velocity_bounds: (f64, f64),
    /// Collision rectangle length (along heading), m.
    pub body_length: f64,
    /// Collision rectangle width, m.
    pub body_width: f64,
    /// Forward offset of the rectangle center from the rear axle, m.
    pub center_offset: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        CarParams {
            wheelbase: 2.7,
            steer_bound: 0.6,
            steer_rate_bound: 0.6,
            accel_bound: 1.0,
            velocity_bounds: (-1.0, 2.0),
            body_length: 4.7,
            body_width: 2.0,
            // Rectangle centered midway along the wheelbase.
            center_offset: 1.35,
        }
    }
}

impl CarParams {
    /// The collision rectangle in its body frame, centered at the origin
    /// with +x along the heading. Rows ordered `(+e₁, −e₁, +e₂, −e₂)`.
    pub fn body_shape(&self) -> ConvexBody {
        let hl = self.body_length / 2.0;
        let hw = self.body_width / 2.0;
        ConvexBody::axis_box(&[-hl, -hw], &[hl, hw]).expect("car rectangle is a valid box")
    }

    /// Rectangle center in the world frame for a car state.
    pub fn body_center(&self, x: &[f64]) -> DVector<f64> {
        let (sin, cos) = x[2].sin_cos();
        DVector::from_vec(vec![
            x[0] + self.center_offset * cos,
            x[1] + self.center_offset * sin,
        ])
    }

    /// World pose of the collision rectangle for a car state.
    pub fn body_pose(&self, x: &[f64]) -> Pose {
        Pose::new(rotation2d(x[2]), self.body_center(x)).expect("planar rotation is proper")
    }
}

/// A discrete-time vehicle model under forward-Euler integration.
#[derive(Debug, Clone)]
pub enum Model {
    Quad(QuadParams),
    Car(CarParams),
}

impl Model {
    pub fn state_dim(&self) -> usize {
        match self {
            Model::Quad(_) => QUAD_STATE_DIM,
            Model::Car(_) => CAR_STATE_DIM,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Quad(_) => QUAD_INPUT_DIM,
            Model::Car(_) => CAR_INPUT_DIM,
        }
    }

    /// Continuous-time state derivative.
    pub fn continuous(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        match self {
            Model::Quad(p) => quad_continuous(x, u, p),
            Model::Car(p) => Ok(car_continuous(x, u, p)),
        }
    }

    /// Jacobians of the continuous dynamics with respect to state and input.
    pub fn continuous_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
        match self {
            Model::Quad(p) => quad_continuous_jacobians(x, u, p),
            Model::Car(p) => Ok(car_continuous_jacobians(x, u, p)),
        }
    }

    /// Single forward-Euler step `x + T·f(x, u)`.
    pub fn euler_step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t_opt: f64,
    ) -> Result<DVector<f64>, ModelError> {
        Ok(x + self.continuous(x, u)? * t_opt)
    }

    /// Jacobians of the Euler step: `(∂x⁺/∂x, ∂x⁺/∂u, ∂x⁺/∂T)`, the last
    /// being the continuous derivative itself.
    pub fn step_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t_opt: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>), ModelError> {
        let f = self.continuous(x, u)?;
        let (jx, ju) = self.continuous_jacobians(x, u)?;
        let n = self.state_dim();
        let dx = DMatrix::identity(n, n) + jx * t_opt;
        let du = ju * t_opt;
        Ok((dx, du, f))
    }

    /// Stage path-constraint residuals `h ≤ 0`: box bounds on states and
    /// inputs, position bounds when provided, and the steering-rate
    /// coupling `|δ_k − δ_{k−1}| ≤ rate·T` for the car.
    pub fn path_constraints(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        u_prev: Option<&DVector<f64>>,
        t_opt: f64,
        position_bounds: Option<(&[f64], &[f64])>,
    ) -> Vec<f64> {
        let mut h = Vec::new();
        match self {
            Model::Quad(p) => {
                if let Some((lo, hi)) = position_bounds {
                    for i in 0..3 {
                        h.push(x[i] - hi[i]);
                        h.push(lo[i] - x[i]);
                    }
                }
                for i in [3, 4] {
                    h.push(x[i].abs() - p.tilt_bound);
                }
                h.push(x[5].abs() - p.yaw_bound);
                for i in 6..9 {
                    h.push(x[i].abs() - p.velocity_bound);
                }
                for i in 9..12 {
                    h.push(x[i].abs() - p.rate_bound);
                }
                for i in 0..4 {
                    h.push(u[i] - p.rotor_speed_bounds.1);
                    h.push(p.rotor_speed_bounds.0 - u[i]);
                }
            }
            Model::Car(p) => {
                if let Some((lo, hi)) = position_bounds {
                    for i in 0..2 {
                        h.push(x[i] - hi[i]);
                        h.push(lo[i] - x[i]);
                    }
                }
                h.push(x[3] - p.velocity_bounds.1);
                h.push(p.velocity_bounds.0 - x[3]);
                h.push(u[0].abs() - p.steer_bound);
                h.push(u[1].abs() - p.accel_bound);
                if let Some(prev) = u_prev {
                    let jump = u[0] - prev[0];
                    h.push(jump - p.steer_rate_bound * t_opt);
                    h.push(-jump - p.steer_rate_bound * t_opt);
                }
            }
        }
        h
    }
}

/// Continuous quadcopter dynamics.
pub fn quad_continuous(
    x: &DVector<f64>,
    u: &DVector<f64>,
    p: &QuadParams,
) -> Result<DVector<f64>, ModelError> {
    check_dims(x, QUAD_STATE_DIM)?;
    check_dims(u, QUAD_INPUT_DIM)?;
    let phi = x[3];
    let theta = x[4];
    let psi = x[5];
    if phi.abs() >= std::f64::consts::FRAC_PI_2 - 1e-6 {
        return Err(ModelError::SingularAttitude);
    }
    let (s_phi, c_phi) = phi.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    let (s_psi, c_psi) = psi.sin_cos();
    let t_phi = s_phi / c_phi;

    let forces: Vec<f64> = (0..4).map(|i| p.thrust_coeff * u[i] * u[i]).collect();
    let thrust: f64 = forces.iter().sum();
    let moments: Vec<f64> = (0..4).map(|i| p.moment_coeff * u[i] * u[i]).collect();

    let mut f = DVector::zeros(QUAD_STATE_DIM);
    // Position derivatives.
    f[0] = x[6];
    f[1] = x[7];
    f[2] = x[8];

    // Euler-angle rates from body rates.
    let (bp, bq, br) = (x[9], x[10], x[11]);
    f[3] = c_th * bp + s_th * br;
    f[4] = s_th * t_phi * bp + bq - c_th * t_phi * br;
    f[5] = -s_th / c_phi * bp + c_th / c_phi * br;

    // Translational acceleration: gravity plus thrust along the body z
    // axis expressed in the world frame (third rotation column).
    let r3 = [
        c_psi * s_th + s_phi * s_psi * c_th,
        s_psi * s_th - s_phi * c_psi * c_th,
        c_phi * c_th,
    ];
    let a = thrust / p.mass;
    f[6] = a * r3[0];
    f[7] = a * r3[1];
    f[8] = a * r3[2] - p.gravity;

    // Body-rate dynamics with the gyroscopic term.
    let [ix, iy, iz] = p.inertia;
    let l = p.arm_length;
    f[9] = (l * (forces[1] - forces[3]) - bq * br * (iz - iy)) / ix;
    f[10] = (l * (forces[2] - forces[0]) - br * bp * (ix - iz)) / iy;
    f[11] = (moments[0] - moments[1] + moments[2] - moments[3] - bp * bq * (iy - ix)) / iz;
    Ok(f)
}

/// Analytic Jacobians of the continuous quadcopter dynamics.
pub fn quad_continuous_jacobians(
    x: &DVector<f64>,
    u: &DVector<f64>,
    p: &QuadParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
    check_dims(x, QUAD_STATE_DIM)?;
    check_dims(u, QUAD_INPUT_DIM)?;
    let phi = x[3];
    let theta = x[4];
    let psi = x[5];
    if phi.abs() >= std::f64::consts::FRAC_PI_2 - 1e-6 {
        return Err(ModelError::SingularAttitude);
    }
    let (s_phi, c_phi) = phi.sin_cos();
    let (s_th, c_th) = theta.sin_cos();
    let (s_psi, c_psi) = psi.sin_cos();
    let t_phi = s_phi / c_phi;
    let sec2 = 1.0 / (c_phi * c_phi);

    let kf = p.thrust_coeff;
    let thrust: f64 = (0..4).map(|i| kf * u[i] * u[i]).sum();
    let a = thrust / p.mass;
    let (bp, bq, br) = (x[9], x[10], x[11]);

    let mut jx = DMatrix::zeros(QUAD_STATE_DIM, QUAD_STATE_DIM);
    let mut ju = DMatrix::zeros(QUAD_STATE_DIM, QUAD_INPUT_DIM);

    // Position rows.
    jx[(0, 6)] = 1.0;
    jx[(1, 7)] = 1.0;
    jx[(2, 8)] = 1.0;

    // Euler-rate rows: W(φ, θ)·ω and its angle sensitivities.
    jx[(3, 9)] = c_th;
    jx[(3, 11)] = s_th;
    jx[(4, 9)] = s_th * t_phi;
    jx[(4, 10)] = 1.0;
    jx[(4, 11)] = -c_th * t_phi;
    jx[(5, 9)] = -s_th / c_phi;
    jx[(5, 11)] = c_th / c_phi;

    jx[(3, 4)] = -s_th * bp + c_th * br;
    jx[(4, 3)] = (s_th * bp - c_th * br) * sec2;
    jx[(4, 4)] = c_th * t_phi * bp + s_th * t_phi * br;
    jx[(5, 3)] = (-s_th * bp + c_th * br) * s_phi / (c_phi * c_phi);
    jx[(5, 4)] = (-c_th * bp - s_th * br) / c_phi;

    // Acceleration rows.
    let r3 = [
        c_psi * s_th + s_phi * s_psi * c_th,
        s_psi * s_th - s_phi * c_psi * c_th,
        c_phi * c_th,
    ];
    let dr3_dphi = [
        c_phi * s_psi * c_th,
        -c_phi * c_psi * c_th,
        -s_phi * c_th,
    ];
    let dr3_dtheta = [
        c_psi * c_th - s_phi * s_psi * s_th,
        s_psi * c_th + s_phi * c_psi * s_th,
        -c_phi * s_th,
    ];
    let dr3_dpsi = [
        -s_psi * s_th + s_phi * c_psi * c_th,
        c_psi * s_th + s_phi * s_psi * c_th,
        0.0,
    ];
    for row in 0..3 {
        jx[(6 + row, 3)] = a * dr3_dphi[row];
        jx[(6 + row, 4)] = a * dr3_dtheta[row];
        jx[(6 + row, 5)] = a * dr3_dpsi[row];
        for i in 0..4 {
            ju[(6 + row, i)] = (2.0 * kf * u[i] / p.mass) * r3[row];
        }
    }

    // Body-rate rows.
    let [ix_, iy, iz] = p.inertia;
    let l = p.arm_length;
    let km = p.moment_coeff;
    jx[(9, 10)] = -br * (iz - iy) / ix_;
    jx[(9, 11)] = -bq * (iz - iy) / ix_;
    jx[(10, 9)] = -br * (ix_ - iz) / iy;
    jx[(10, 11)] = -bp * (ix_ - iz) / iy;
    jx[(11, 9)] = -bq * (iy - ix_) / iz;
    jx[(11, 10)] = -bp * (iy - ix_) / iz;
    ju[(9, 1)] = 2.0 * l * kf * u[1] / ix_;
    ju[(9, 3)] = -2.0 * l * kf * u[3] / ix_;
    ju[(10, 2)] = 2.0 * l * kf * u[2] / iy;
    ju[(10, 0)] = -2.0 * l * kf * u[0] / iy;
    ju[(11, 0)] = 2.0 * km * u[0] / iz;
    ju[(11, 1)] = -2.0 * km * u[1] / iz;
    ju[(11, 2)] = 2.0 * km * u[2] / iz;
    ju[(11, 3)] = -2.0 * km * u[3] / iz;

    Ok((jx, ju))
}

/// Continuous kinematic-bicycle dynamics `(v cosφ, v sinφ, v tanδ/L, a)`.
pub fn car_continuous(x: &DVector<f64>, u: &DVector<f64>, p: &CarParams) -> DVector<f64> {
    let (s, c) = x[2].sin_cos();
    let v = x[3];
    DVector::from_vec(vec![v * c, v * s, v * u[0].tan() / p.wheelbase, u[1]])
}

pub fn car_continuous_jacobians(
    x: &DVector<f64>,
    u: &DVector<f64>,
    p: &CarParams,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (s, c) = x[2].sin_cos();
    let v = x[3];
    let mut jx = DMatrix::zeros(CAR_STATE_DIM, CAR_STATE_DIM);
    jx[(0, 2)] = -v * s;
    jx[(0, 3)] = c;
    jx[(1, 2)] = v * c;
    jx[(1, 3)] = s;
    jx[(2, 3)] = u[0].tan() / p.wheelbase;
    let mut ju = DMatrix::zeros(CAR_STATE_DIM, CAR_INPUT_DIM);
    let sec = 1.0 / u[0].cos();
    ju[(2, 0)] = v * sec * sec / p.wheelbase;
    ju[(3, 1)] = 1.0;
    (jx, ju)
}

fn check_dims(v: &DVector<f64>, expected: usize) -> Result<(), ModelError> {
    if v.len() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}
