//! Smooth constrained NLP solver for the transcribed trajectory problems.
//!
//! The algorithm is an augmented-Lagrangian outer loop over all equality
//! constraints (inequalities are converted to equalities with bounded
//! slacks), a log-barrier treatment of variable bounds with
//! fraction-to-boundary steps, and damped Gauss-Newton inner iterations.
//! The Newton systems are solved with a banded sparse Cholesky
//! factorization after a Cuthill-McKee reordering, with high-degree
//! columns (the shared sampling-time variable) split off into a small
//! dense border eliminated by a Schur complement.
//!
//! Termination is judged purely by KKT residuals: the solver reports
//! `Optimal` once stationarity, feasibility and the barrier parameter all
//! sit below the configured tolerance, and always returns the best point
//! it has seen.

use std::io::Write as _;
use std::time::Instant;

/// Problem interface consumed by [`solve`]. Constraint Jacobians have a
/// fixed sparsity structure; only the values change between evaluations.
pub trait NlpProblem {
    fn num_vars(&self) -> usize;
    /// Variable bounds; use `±INFINITY` for free coordinates.
    fn var_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn objective_gradient(&self, x: &[f64], grad: &mut [f64]);
    /// Lower-triangle triplets `(i, j, value)` with `i ≥ j` of the
    /// objective Hessian at `x`.
    fn objective_hessian(&self, x: &[f64]) -> Vec<(usize, usize, f64)>;
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;
    /// Evaluate equality residuals (`= 0`) and inequality residuals
    /// (`≤ 0`).
    fn constraints(&self, x: &[f64], eq: &mut [f64], ineq: &mut [f64]);
    fn eq_jacobian_structure(&self) -> &[(usize, usize)];
    fn ineq_jacobian_structure(&self) -> &[(usize, usize)];
    fn eq_jacobian_values(&self, x: &[f64], vals: &mut [f64]);
    fn ineq_jacobian_values(&self, x: &[f64], vals: &mut [f64]);
    /// Optional stabilization applied after accepted steps (used for the
    /// degenerate region of norm-equality duals). Returns true when the
    /// point was modified.
    fn post_step_adjust(&self, _x: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Max KKT residual accepted as optimal.
    pub kkt_tolerance: f64,
    /// Total inner-iteration budget.
    pub max_iterations: usize,
    /// Initial quadratic penalty on constraint residuals.
    pub initial_penalty: f64,
    /// Initial barrier parameter for variable bounds.
    pub initial_barrier: f64,
    /// Smallest Levenberg damping added to the Newton systems.
    pub regularization_floor: f64,
    /// Armijo sufficient-decrease coefficient.
    pub armijo_coeff: f64,
    /// Fraction-to-boundary factor keeping iterates inside bounds.
    pub fraction_to_boundary: f64,
    /// Wall-clock budget in seconds.
    pub time_budget_secs: f64,
    /// Optional line-oriented iteration log destination.
    pub log_path: Option<std::path::PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tolerance: 1e-6,
            max_iterations: 3000,
            initial_penalty: 10.0,
            initial_barrier: 0.1,
            regularization_floor: 1e-10,
            armijo_coeff: 1e-4,
            fraction_to_boundary: 0.995,
            time_budget_secs: 600.0,
            log_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    TimeBudget,
    Infeasible,
    NumericalFailure,
}

/// Final KKT residuals and bookkeeping for one solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub iterations: usize,
    pub wall_time_secs: f64,
    /// Final multiplier estimates for equality rows followed by
    /// inequality rows.
    pub multipliers: Vec<f64>,
}

// ---------------------------------------------------------------------
// Bordered banded Cholesky
// ---------------------------------------------------------------------

/// Symmetric positive-definite system with a banded main block and a small
/// dense border, in solver-internal ordering.
struct BandSystem {
    n_band: usize,
    n_border: usize,
    bw: usize,
    /// Column-major band: entry (i, j) with 0 ≤ i−j ≤ bw at
    /// `band[j*(bw+1) + (i−j)]`.
    band: Vec<f64>,
    /// Cross block, `n_band × n_border` row-major.
    cross: Vec<f64>,
    /// Dense border block, `n_border × n_border` row-major.
    corner: Vec<f64>,
}

impl BandSystem {
    fn zeroed(n_band: usize, n_border: usize, bw: usize) -> Self {
        BandSystem {
            n_band,
            n_border,
            bw,
            band: vec![0.0; n_band * (bw + 1)],
            cross: vec![0.0; n_band * n_border],
            corner: vec![0.0; n_border * n_border],
        }
    }

    fn clear(&mut self) {
        self.band.iter_mut().for_each(|v| *v = 0.0);
        self.cross.iter_mut().for_each(|v| *v = 0.0);
        self.corner.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn band_idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bw);
        j * (self.bw + 1) + (i - j)
    }

    /// In-place banded Cholesky; false if a pivot is not positive.
    fn factor_band(&mut self) -> bool {
        let n = self.n_band;
        let bw = self.bw;
        for j in 0..n {
            let start = j.saturating_sub(bw);
            let mut d = self.band[self.band_idx(j, j)];
            for k in start..j {
                let l = self.band[self.band_idx(j, k)];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return false;
            }
            let dj = d.sqrt();
            self.band[self.band_idx(j, j)] = dj;
            let hi = (j + bw).min(n - 1);
            for i in j + 1..=hi {
                let mut v = self.band[self.band_idx(i, j)];
                let kstart = i.saturating_sub(bw).max(start);
                for k in kstart..j {
                    v -= self.band[self.band_idx(i, k)] * self.band[self.band_idx(j, k)];
                }
                self.band[self.band_idx(i, j)] = v / dj;
            }
        }
        true
    }

    fn solve_band(&self, rhs: &mut [f64]) {
        let n = self.n_band;
        let bw = self.bw;
        // L z = rhs
        for j in 0..n {
            let start = j.saturating_sub(bw);
            let mut v = rhs[j];
            for k in start..j {
                v -= self.band[self.band_idx(j, k)] * rhs[k];
            }
            rhs[j] = v / self.band[self.band_idx(j, j)];
        }
        // Lᵀ x = z
        for j in (0..n).rev() {
            let hi = (j + bw).min(n - 1);
            let mut v = rhs[j];
            for i in j + 1..=hi {
                v -= self.band[self.band_idx(i, j)] * rhs[i];
            }
            rhs[j] = v / self.band[self.band_idx(j, j)];
        }
    }

    /// Factor the bordered system and solve `H d = −g`; returns the step
    /// blocks in internal ordering, or None on an indefinite pivot.
    fn solve_newton(&mut self, g_band: &[f64], g_border: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if !self.factor_band() {
            return None;
        }
        let nb = self.n_border;
        // X = B⁻¹ C, column by column.
        let mut x_cols: Vec<Vec<f64>> = Vec::with_capacity(nb);
        for c in 0..nb {
            let mut col: Vec<f64> = (0..self.n_band).map(|r| self.cross[r * nb + c]).collect();
            self.solve_band(&mut col);
            x_cols.push(col);
        }
        // Schur complement S = D − Cᵀ X.
        let mut s = vec![0.0; nb * nb];
        for i in 0..nb {
            for j in 0..nb {
                let mut v = self.corner[i * nb + j];
                for r in 0..self.n_band {
                    v -= self.cross[r * nb + i] * x_cols[j][r];
                }
                s[i * nb + j] = v;
            }
        }
        // rhs blocks for H d = −g.
        let mut b1: Vec<f64> = g_band.iter().map(|v| -v).collect();
        self.solve_band(&mut b1);
        let mut rhs2 = vec![0.0; nb];
        for i in 0..nb {
            let mut v = -g_border[i];
            for r in 0..self.n_band {
                v -= self.cross[r * nb + i] * b1[r];
            }
            rhs2[i] = v;
        }
        let w = dense_spd_solve(&mut s, &mut rhs2, nb)?;
        let mut d_band = b1;
        for c in 0..nb {
            for r in 0..self.n_band {
                d_band[r] -= x_cols[c][r] * w[c];
            }
        }
        Some((d_band, w))
    }
}

/// Dense Cholesky solve for the small border block.
fn dense_spd_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    if n == 0 {
        return Some(Vec::new());
    }
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        a[j * n + j] = dj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / dj;
        }
    }
    for j in 0..n {
        let mut v = b[j];
        for k in 0..j {
            v -= a[j * n + k] * b[k];
        }
        b[j] = v / a[j * n + j];
    }
    for j in (0..n).rev() {
        let mut v = b[j];
        for i in j + 1..n {
            v -= a[i * n + j] * b[i];
        }
        b[j] = v / a[j * n + j];
    }
    Some(b.to_vec())
}

// ---------------------------------------------------------------------
// Structure analysis: row cliques, border columns, Cuthill-McKee order
// ---------------------------------------------------------------------

struct KktStructure {
    m_eq: usize,
    m_in: usize,
    n_total: usize,
    /// position(v) for banded vars; usize::MAX for border vars.
    pos: Vec<usize>,
    /// border index for border vars; usize::MAX otherwise.
    border_pos: Vec<usize>,
    border: Vec<usize>,
    n_band: usize,
    bw: usize,
}

fn analyze_structure(problem: &dyn NlpProblem, hess_pairs: &[(usize, usize)]) -> KktStructure {
    let n = problem.num_vars();
    let m_eq = problem.num_eq();
    let m_in = problem.num_ineq();
    let n_total = n + m_in;

    let mut row_vars: Vec<Vec<usize>> = vec![Vec::new(); m_eq + m_in];
    for &(r, c) in problem.eq_jacobian_structure() {
        row_vars[r].push(c);
    }
    for &(r, c) in problem.ineq_jacobian_structure() {
        row_vars[m_eq + r].push(c);
    }
    for (k, row) in row_vars.iter_mut().enumerate().skip(m_eq) {
        row.push(n + (k - m_eq));
    }
    for row in row_vars.iter_mut() {
        row.sort_unstable();
        row.dedup();
    }

    // Column degrees (number of rows touching each variable).
    let mut degree = vec![0usize; n_total];
    for row in &row_vars {
        for &c in row {
            degree[c] += 1;
        }
    }
    let m_total = (m_eq + m_in).max(1);
    let cutoff = 64.max(m_total / 8);
    let mut border: Vec<usize> = (0..n_total).filter(|&c| degree[c] > cutoff).collect();
    // A large border would defeat the banded factorization.
    border.truncate(16);
    let is_border: Vec<bool> = {
        let mut f = vec![false; n_total];
        for &b in &border {
            f[b] = true;
        }
        f
    };

    // Adjacency among banded variables from constraint cliques plus the
    // objective Hessian pattern.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_total];
    let mut add_edge = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
        if a != b && !is_border[a] && !is_border[b] {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for row in &row_vars {
        for i in 0..row.len() {
            for j in i + 1..row.len() {
                add_edge(row[i], row[j], &mut adj);
            }
        }
    }
    for &(i, j) in hess_pairs {
        add_edge(i, j, &mut adj);
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }

    // Cuthill-McKee over banded variables, reversed.
    let banded: Vec<usize> = (0..n_total).filter(|&c| !is_border[c]).collect();
    let mut visited = vec![false; n_total];
    let mut order: Vec<usize> = Vec::with_capacity(banded.len());
    loop {
        let mut start = None;
        let mut best_deg = usize::MAX;
        for &c in &banded {
            if !visited[c] && adj[c].len() < best_deg {
                best_deg = adj[c].len();
                start = Some(c);
            }
        }
        let Some(start) = start else { break };
        let mut queue = std::collections::VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (adj[u].len(), u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();

    let mut pos = vec![usize::MAX; n_total];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut border_pos = vec![usize::MAX; n_total];
    for (k, &b) in border.iter().enumerate() {
        border_pos[b] = k;
    }

    // Bandwidth over all structural pairs.
    let mut bw = 0usize;
    for row in &row_vars {
        let positions: Vec<usize> = row
            .iter()
            .filter(|&&c| !is_border[c])
            .map(|&c| pos[c])
            .collect();
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                bw = bw.max(positions[i].abs_diff(positions[j]));
            }
        }
    }
    for &(i, j) in hess_pairs {
        if !is_border[i] && !is_border[j] {
            bw = bw.max(pos[i].abs_diff(pos[j]));
        }
    }

    KktStructure {
        m_eq,
        m_in,
        n_total,
        pos,
        border_pos,
        n_band: order.len(),
        border,
        bw,
    }
}

// ---------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------

struct Workspace {
    lb: Vec<f64>,
    ub: Vec<f64>,
    eq: Vec<f64>,
    ineq: Vec<f64>,
    eq_vals: Vec<f64>,
    ineq_vals: Vec<f64>,
    obj_grad: Vec<f64>,
    grad: Vec<f64>,
    resid: Vec<f64>,
}

/// Minimize the problem from `start` under `config`; never panics on
/// numerical failure, always returns the best point found.
pub fn solve(
    problem: &dyn NlpProblem,
    start: &[f64],
    config: &SolverConfig,
) -> (Vec<f64>, SolveReport) {
    let t0 = Instant::now();
    let n = problem.num_vars();
    assert_eq!(start.len(), n, "start point length mismatch");
    let m_eq = problem.num_eq();
    let m_in = problem.num_ineq();
    let m = m_eq + m_in;

    let mut log = config
        .log_path
        .as_ref()
        .and_then(|p| std::fs::File::create(p).ok().map(std::io::BufWriter::new));

    let hess0 = problem.objective_hessian(start);
    let hess_pairs: Vec<(usize, usize)> = hess0.iter().map(|&(i, j, _)| (i, j)).collect();
    let st = analyze_structure(problem, &hess_pairs);
    let mut sys = BandSystem::zeroed(
        st.n_band,
        st.border.len(),
        st.bw.min(st.n_band.saturating_sub(1)),
    );

    // Bounds in slack-extended space; slacks live in [0, ∞).
    let (lb_x, ub_x) = problem.var_bounds();
    let mut lb = lb_x;
    let mut ub = ub_x;
    lb.extend(std::iter::repeat(0.0).take(m_in));
    ub.extend(std::iter::repeat(f64::INFINITY).take(m_in));

    let mut ws = Workspace {
        lb,
        ub,
        eq: vec![0.0; m_eq],
        ineq: vec![0.0; m_in],
        eq_vals: vec![0.0; problem.eq_jacobian_structure().len()],
        ineq_vals: vec![0.0; problem.ineq_jacobian_structure().len()],
        obj_grad: vec![0.0; n],
        grad: vec![0.0; st.n_total],
        resid: vec![0.0; m],
    };

    // Initial point: interior clamp, slacks from the residuals.
    let mut v = vec![0.0; st.n_total];
    v[..n].copy_from_slice(start);
    for j in 0..n {
        v[j] = interior_clamp(v[j], ws.lb[j], ws.ub[j]);
    }
    problem.constraints(&v[..n], &mut ws.eq, &mut ws.ineq);
    for k in 0..m_in {
        v[n + k] = (-ws.ineq[k]).max(1e-2);
    }

    let mut y = vec![0.0; m];
    let mut rho = config.initial_penalty;
    let mut nu = config.initial_barrier;
    let tol = config.kkt_tolerance;
    let nu_min = (tol * 0.5).max(1e-12);
    let mut omega = 1.0f64;
    let mut eta = 1.0f64;
    let mut delta = 1e-8f64;

    let mut iterations = 0usize;
    let mut status = SolveStatus::MaxIter;
    let mut best: Option<(f64, f64, Vec<f64>)> = None; // (feasibility, objective, point)
    let mut stall_rounds = 0usize;
    let mut last_infeas = f64::INFINITY;
    let mut final_kkt = (f64::INFINITY, f64::INFINITY, nu);

    'outer: for _round in 0..200 {
        // ----- inner minimization of the merit function -----
        let mut inner_count = 0usize;
        loop {
            if iterations >= config.max_iterations {
                status = SolveStatus::MaxIter;
                break 'outer;
            }
            if t0.elapsed().as_secs_f64() > config.time_budget_secs {
                status = SolveStatus::TimeBudget;
                break 'outer;
            }

            let (phi, feas_now) = merit_and_track(
                problem, &v, n, m_in, &ws.lb, &ws.ub, &y, rho, nu, &mut ws, &mut best,
            );
            if !phi.is_finite() {
                status = SolveStatus::NumericalFailure;
                break 'outer;
            }

            let grad_norm =
                merit_gradient(problem, &v, n, m_in, &ws.lb, &ws.ub, &y, rho, nu, &mut ws);
            if grad_norm <= omega || inner_count >= 80 {
                break;
            }

            // Assemble and solve the damped Gauss-Newton system.
            let mut step: Option<Vec<f64>> = None;
            let mut local_delta = delta;
            for _try in 0..14 {
                assemble_hessian(problem, &v, n, &ws, &st, rho, nu, local_delta, &mut sys);
                let mut g_band = vec![0.0; st.n_band];
                let mut g_border = vec![0.0; st.border.len()];
                for idx in 0..st.n_total {
                    if st.pos[idx] != usize::MAX {
                        g_band[st.pos[idx]] = ws.grad[idx];
                    } else {
                        g_border[st.border_pos[idx]] = ws.grad[idx];
                    }
                }
                if let Some((d_band, d_border)) = sys.solve_newton(&g_band, &g_border) {
                    let mut d = vec![0.0; st.n_total];
                    for idx in 0..st.n_total {
                        d[idx] = if st.pos[idx] != usize::MAX {
                            d_band[st.pos[idx]]
                        } else {
                            d_border[st.border_pos[idx]]
                        };
                    }
                    step = Some(d);
                    break;
                }
                local_delta = (local_delta * 100.0).max(1e-8);
            }
            delta = local_delta;
            let Some(d) = step else {
                status = SolveStatus::NumericalFailure;
                break 'outer;
            };

            // Fraction-to-boundary cap.
            let tau = config.fraction_to_boundary;
            let mut alpha_max = 1.0f64;
            for j in 0..st.n_total {
                if d[j] < 0.0 && ws.lb[j].is_finite() {
                    alpha_max = alpha_max.min(tau * (v[j] - ws.lb[j]) / (-d[j]));
                }
                if d[j] > 0.0 && ws.ub[j].is_finite() {
                    alpha_max = alpha_max.min(tau * (ws.ub[j] - v[j]) / d[j]);
                }
            }

            // Armijo backtracking on the merit function.
            let slope: f64 = ws.grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            let mut alpha = alpha_max.min(1.0);
            let mut accepted = false;
            for _ls in 0..40 {
                let trial: Vec<f64> = v.iter().zip(&d).map(|(vi, di)| vi + alpha * di).collect();
                let (phi_t, _) =
                    merit_only(problem, &trial, n, m_in, &ws.lb, &ws.ub, &y, rho, nu, &mut ws);
                if phi_t.is_finite() && phi_t <= phi + config.armijo_coeff * alpha * slope {
                    v = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break;
                }
            }
            iterations += 1;
            inner_count += 1;

            if let Some(log) = log.as_mut() {
                let _ = writeln!(
                    log,
                    "iter {iterations} merit {phi:.9e} grad {grad_norm:.3e} feas {feas_now:.3e} rho {rho:.1e} nu {nu:.1e} alpha {alpha:.2e}"
                );
            }

            if accepted {
                debug_assert!(
                    {
                        let (phi_after, _) =
                            merit_only(problem, &v, n, m_in, &ws.lb, &ws.ub, &y, rho, nu, &mut ws);
                        phi_after <= phi + 1e-7 * (1.0 + phi.abs())
                    },
                    "merit increased on an accepted step"
                );
                delta = (delta * 0.33).max(config.regularization_floor);
                let mut x_part = v[..n].to_vec();
                if problem.post_step_adjust(&mut x_part) {
                    v[..n].copy_from_slice(&x_part);
                    for j in 0..n {
                        v[j] = interior_clamp(v[j], ws.lb[j], ws.ub[j]);
                    }
                }
            } else {
                delta = (delta.max(1e-10)) * 30.0;
                if delta > 1e14 {
                    status = SolveStatus::NumericalFailure;
                    break 'outer;
                }
            }
        }

        // ----- outer updates -----
        problem.constraints(&v[..n], &mut ws.eq, &mut ws.ineq);
        let mut c_norm = 0.0f64;
        for k in 0..m_eq {
            c_norm = c_norm.max(ws.eq[k].abs());
        }
        for k in 0..m_in {
            c_norm = c_norm.max((ws.ineq[k] + v[n + k]).abs());
        }
        let feas_true = true_feasibility(&ws.eq, &ws.ineq);
        let stat = merit_gradient(problem, &v, n, m_in, &ws.lb, &ws.ub, &y, rho, nu, &mut ws);
        final_kkt = (stat, feas_true, nu);

        if stat <= tol && feas_true <= tol && nu <= tol {
            status = SolveStatus::Optimal;
            break 'outer;
        }

        if c_norm <= eta {
            for k in 0..m_eq {
                y[k] += rho * ws.eq[k];
            }
            for k in 0..m_in {
                y[m_eq + k] += rho * (ws.ineq[k] + v[n + k]);
            }
            eta = (eta * 0.2).max(tol * 0.1);
            omega = (omega * 0.2).max(tol * 0.5);
        } else {
            rho = (rho * 10.0).min(1e10);
            omega = (omega * 0.5).max(tol * 0.5);
        }
        nu = (nu * 0.2).max(nu_min);

        // Infeasibility stall detection.
        if rho >= 1e10 && feas_true > 100.0 * tol {
            if feas_true > 0.99 * last_infeas {
                stall_rounds += 1;
            } else {
                stall_rounds = 0;
            }
            last_infeas = feas_true;
            if stall_rounds >= 3 {
                status = SolveStatus::Infeasible;
                break 'outer;
            }
        }
    }

    // Prefer the final iterate unless a tracked point strictly beats it.
    problem.constraints(&v[..n], &mut ws.eq, &mut ws.ineq);
    let feas_v = true_feasibility(&ws.eq, &ws.ineq);
    let obj_v = problem.objective(&v[..n]);
    let x_out = match &best {
        Some((bf, bo, bx)) if (*bf, *bo) < (feas_v, obj_v) && status != SolveStatus::Optimal => {
            bx[..n].to_vec()
        }
        _ => v[..n].to_vec(),
    };

    let mut multipliers = y.clone();
    problem.constraints(&x_out, &mut ws.eq, &mut ws.ineq);
    for k in 0..m_eq {
        multipliers[k] += rho * ws.eq[k];
    }
    for k in 0..m_in {
        multipliers[m_eq + k] += rho * (ws.ineq[k] + v[n + k]);
    }

    let report = SolveReport {
        status,
        stationarity: final_kkt.0,
        feasibility: final_kkt.1,
        complementarity: final_kkt.2,
        iterations,
        wall_time_secs: t0.elapsed().as_secs_f64(),
        multipliers,
    };
    (x_out, report)
}

fn interior_clamp(v: f64, lb: f64, ub: f64) -> f64 {
    let eps = if lb.is_finite() && ub.is_finite() {
        (1e-3 * (ub - lb)).min(1e-3)
    } else {
        1e-6
    };
    let mut out = v;
    if lb.is_finite() {
        out = out.max(lb + eps);
    }
    if ub.is_finite() {
        out = out.min(ub - eps);
    }
    out
}

fn true_feasibility(eq: &[f64], ineq: &[f64]) -> f64 {
    let mut f = 0.0f64;
    for &e in eq {
        f = f.max(e.abs());
    }
    for &h in ineq {
        f = f.max(h.max(0.0));
    }
    f
}

/// Merit value; also records the best-seen point keyed on
/// (true feasibility, objective).
#[allow(clippy::too_many_arguments)]
fn merit_and_track(
    problem: &dyn NlpProblem,
    v: &[f64],
    n: usize,
    m_in: usize,
    lb: &[f64],
    ub: &[f64],
    y: &[f64],
    rho: f64,
    nu: f64,
    ws: &mut Workspace,
    best: &mut Option<(f64, f64, Vec<f64>)>,
) -> (f64, f64) {
    let (phi, feas) = merit_only(problem, v, n, m_in, lb, ub, y, rho, nu, ws);
    let obj = problem.objective(&v[..n]);
    if best
        .as_ref()
        .map(|(bf, bo, _)| (feas, obj) < (*bf, *bo))
        .unwrap_or(true)
    {
        *best = Some((feas, obj, v.to_vec()));
    }
    (phi, feas)
}

#[allow(clippy::too_many_arguments)]
fn merit_only(
    problem: &dyn NlpProblem,
    v: &[f64],
    n: usize,
    m_in: usize,
    lb: &[f64],
    ub: &[f64],
    y: &[f64],
    rho: f64,
    nu: f64,
    ws: &mut Workspace,
) -> (f64, f64) {
    let m_eq = ws.eq.len();
    problem.constraints(&v[..n], &mut ws.eq, &mut ws.ineq);
    let mut phi = problem.objective(&v[..n]);
    for k in 0..m_eq {
        let c = ws.eq[k];
        phi += y[k] * c + 0.5 * rho * c * c;
    }
    for k in 0..m_in {
        let c = ws.ineq[k] + v[n + k];
        phi += y[m_eq + k] * c + 0.5 * rho * c * c;
    }
    for j in 0..v.len() {
        if lb[j].is_finite() {
            let gap = v[j] - lb[j];
            if gap <= 0.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            phi -= nu * gap.ln();
        }
        if ub[j].is_finite() {
            let gap = ub[j] - v[j];
            if gap <= 0.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            phi -= nu * gap.ln();
        }
    }
    let feas = true_feasibility(&ws.eq, &ws.ineq);
    (phi, feas)
}

/// Gradient of the merit function into `ws.grad`; returns its ∞-norm.
/// Also refreshes `ws.resid` with the shifted multiplier estimates
/// `y + ρC` used by the Hessian assembly.
#[allow(clippy::too_many_arguments)]
fn merit_gradient(
    problem: &dyn NlpProblem,
    v: &[f64],
    n: usize,
    m_in: usize,
    lb: &[f64],
    ub: &[f64],
    y: &[f64],
    rho: f64,
    nu: f64,
    ws: &mut Workspace,
) -> f64 {
    let m_eq = ws.eq.len();
    problem.constraints(&v[..n], &mut ws.eq, &mut ws.ineq);
    problem.objective_gradient(&v[..n], &mut ws.obj_grad);
    problem.eq_jacobian_values(&v[..n], &mut ws.eq_vals);
    problem.ineq_jacobian_values(&v[..n], &mut ws.ineq_vals);

    for k in 0..m_eq {
        ws.resid[k] = y[k] + rho * ws.eq[k];
    }
    for k in 0..m_in {
        ws.resid[m_eq + k] = y[m_eq + k] + rho * (ws.ineq[k] + v[n + k]);
    }

    ws.grad.iter_mut().for_each(|g| *g = 0.0);
    ws.grad[..n].copy_from_slice(&ws.obj_grad);
    for (&(r, c), &val) in problem
        .eq_jacobian_structure()
        .iter()
        .zip(ws.eq_vals.iter())
    {
        ws.grad[c] += val * ws.resid[r];
    }
    for (&(r, c), &val) in problem
        .ineq_jacobian_structure()
        .iter()
        .zip(ws.ineq_vals.iter())
    {
        ws.grad[c] += val * ws.resid[m_eq + r];
    }
    for k in 0..m_in {
        ws.grad[n + k] = ws.resid[m_eq + k];
    }
    for j in 0..v.len() {
        if lb[j].is_finite() {
            ws.grad[j] -= nu / (v[j] - lb[j]);
        }
        if ub[j].is_finite() {
            ws.grad[j] += nu / (ub[j] - v[j]);
        }
    }
    ws.grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()))
}

/// Gauss-Newton Hessian of the merit function: objective Hessian plus
/// `ρ JᵀJ` plus barrier curvature plus relative Levenberg damping.
#[allow(clippy::too_many_arguments)]
fn assemble_hessian(
    problem: &dyn NlpProblem,
    v: &[f64],
    n: usize,
    ws: &Workspace,
    st: &KktStructure,
    rho: f64,
    nu: f64,
    delta: f64,
    sys: &mut BandSystem,
) {
    sys.clear();
    let nb = st.border.len();
    let mut diag = vec![0.0; st.n_total];

    // Band entries are symmetric by storage; cross and corner entries are
    // written one-sided here and mirrored where needed.
    let mut add = |i: usize, j: usize, val: f64, sys: &mut BandSystem| {
        let (pi, pj) = (st.pos[i], st.pos[j]);
        match (pi != usize::MAX, pj != usize::MAX) {
            (true, true) => {
                let (hi, lo) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                let idx = sys.band_idx(hi, lo);
                sys.band[idx] += val;
            }
            (true, false) => sys.cross[pi * nb + st.border_pos[j]] += val,
            (false, true) => sys.cross[pj * nb + st.border_pos[i]] += val,
            (false, false) => {
                let (bi, bj) = (st.border_pos[i], st.border_pos[j]);
                sys.corner[bi * nb + bj] += val;
                if bi != bj {
                    sys.corner[bj * nb + bi] += val;
                }
            }
        }
    };

    for (i, j, val) in problem.objective_hessian(&v[..n]) {
        add(i, j, val, sys);
        if i == j {
            diag[i] += val.abs();
        }
    }

    let m_eq = st.m_eq;
    let mut row_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m_eq + st.m_in];
    for (&(r, c), &val) in problem
        .eq_jacobian_structure()
        .iter()
        .zip(ws.eq_vals.iter())
    {
        row_entries[r].push((c, val));
    }
    for (&(r, c), &val) in problem
        .ineq_jacobian_structure()
        .iter()
        .zip(ws.ineq_vals.iter())
    {
        row_entries[m_eq + r].push((c, val));
    }
    for k in 0..st.m_in {
        row_entries[m_eq + k].push((n + k, 1.0));
    }
    for row in &row_entries {
        for (a, &(ca, va)) in row.iter().enumerate() {
            diag[ca] += rho * va * va;
            add(ca, ca, rho * va * va, sys);
            for &(cb, vb) in row.iter().skip(a + 1) {
                add(ca, cb, rho * va * vb, sys);
            }
        }
    }

    for j in 0..st.n_total {
        let mut curv = 0.0;
        if ws.lb[j].is_finite() {
            let gap = v[j] - ws.lb[j];
            curv += nu / (gap * gap);
        }
        if ws.ub[j].is_finite() {
            let gap = ws.ub[j] - v[j];
            curv += nu / (gap * gap);
        }
        let scale = (diag[j] + curv).max(1.0);
        add(j, j, curv + delta * scale, sys);
    }
}

/// Central finite-difference audit of all analytic derivatives exposed by
/// a problem; returns the worst relative error across the objective
/// gradient and both constraint Jacobians.
pub fn check_gradients(problem: &dyn NlpProblem, x: &[f64], step: f64) -> f64 {
    let n = problem.num_vars();
    let m_eq = problem.num_eq();
    let m_in = problem.num_ineq();
    let mut worst = 0.0f64;

    let mut grad = vec![0.0; n];
    problem.objective_gradient(x, &mut grad);

    let eq_struct = problem.eq_jacobian_structure();
    let in_struct = problem.ineq_jacobian_structure();
    let mut eq_vals = vec![0.0; eq_struct.len()];
    let mut in_vals = vec![0.0; in_struct.len()];
    problem.eq_jacobian_values(x, &mut eq_vals);
    problem.ineq_jacobian_values(x, &mut in_vals);

    let mut eq_dense = vec![0.0; m_eq * n];
    for (&(r, c), &val) in eq_struct.iter().zip(eq_vals.iter()) {
        eq_dense[r * n + c] += val;
    }
    let mut in_dense = vec![0.0; m_in * n];
    for (&(r, c), &val) in in_struct.iter().zip(in_vals.iter()) {
        in_dense[r * n + c] += val;
    }

    let mut xp = x.to_vec();
    let mut eq_hi = vec![0.0; m_eq];
    let mut in_hi = vec![0.0; m_in];
    let mut eq_lo = vec![0.0; m_eq];
    let mut in_lo = vec![0.0; m_in];
    for j in 0..n {
        let h = step * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let f_hi = problem.objective(&xp);
        problem.constraints(&xp, &mut eq_hi, &mut in_hi);
        xp[j] = x[j] - h;
        let f_lo = problem.objective(&xp);
        problem.constraints(&xp, &mut eq_lo, &mut in_lo);
        xp[j] = x[j];

        let fd = (f_hi - f_lo) / (2.0 * h);
        worst = worst.max(rel_err(fd, grad[j]));
        for r in 0..m_eq {
            let fd = (eq_hi[r] - eq_lo[r]) / (2.0 * h);
            worst = worst.max(rel_err(fd, eq_dense[r * n + j]));
        }
        for r in 0..m_in {
            let fd = (in_hi[r] - in_lo[r]) / (2.0 * h);
            worst = worst.max(rel_err(fd, in_dense[r * n + j]));
        }
    }
    worst
}

fn rel_err(fd: f64, analytic: f64) -> f64 {
    (fd - analytic).abs() / (1.0 + fd.abs().max(analytic.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Generic small dense test problem.
    struct TestProblem {
        n: usize,
        lb: Vec<f64>,
        ub: Vec<f64>,
        obj: Box<dyn Fn(&[f64]) -> f64>,
        grad: Box<dyn Fn(&[f64]) -> Vec<f64>>,
        hess: Box<dyn Fn(&[f64]) -> Vec<(usize, usize, f64)>>,
        eq: Box<dyn Fn(&[f64]) -> Vec<f64>>,
        eq_struct: Vec<(usize, usize)>,
        eq_jac: Box<dyn Fn(&[f64]) -> Vec<f64>>,
        ineq: Box<dyn Fn(&[f64]) -> Vec<f64>>,
        ineq_struct: Vec<(usize, usize)>,
        ineq_jac: Box<dyn Fn(&[f64]) -> Vec<f64>>,
        m_eq: usize,
        m_in: usize,
    }

    impl NlpProblem for TestProblem {
        fn num_vars(&self) -> usize {
            self.n
        }
        fn var_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (self.lb.clone(), self.ub.clone())
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (self.obj)(x)
        }
        fn objective_gradient(&self, x: &[f64], grad: &mut [f64]) {
            grad.copy_from_slice(&(self.grad)(x));
        }
        fn objective_hessian(&self, x: &[f64]) -> Vec<(usize, usize, f64)> {
            (self.hess)(x)
        }
        fn num_eq(&self) -> usize {
            self.m_eq
        }
        fn num_ineq(&self) -> usize {
            self.m_in
        }
        fn constraints(&self, x: &[f64], eq: &mut [f64], ineq: &mut [f64]) {
            eq.copy_from_slice(&(self.eq)(x));
            ineq.copy_from_slice(&(self.ineq)(x));
        }
        fn eq_jacobian_structure(&self) -> &[(usize, usize)] {
            &self.eq_struct
        }
        fn ineq_jacobian_structure(&self) -> &[(usize, usize)] {
            &self.ineq_struct
        }
        fn eq_jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
            vals.copy_from_slice(&(self.eq_jac)(x));
        }
        fn ineq_jacobian_values(&self, x: &[f64], vals: &mut [f64]) {
            vals.copy_from_slice(&(self.ineq_jac)(x));
        }
    }

    fn unconstrained_skeleton(n: usize) -> TestProblem {
        TestProblem {
            n,
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
            obj: Box::new(|_| 0.0),
            grad: Box::new(move |_| vec![0.0; n]),
            hess: Box::new(|_| vec![]),
            eq: Box::new(|_| vec![]),
            eq_struct: vec![],
            eq_jac: Box::new(|_| vec![]),
            ineq: Box::new(|_| vec![]),
            ineq_struct: vec![],
            ineq_jac: Box::new(|_| vec![]),
            m_eq: 0,
            m_in: 0,
        }
    }

    /// min (x−1)² s.t. x ≥ 2: active bound, multiplier 2 by hand.
    #[test]
    fn bound_constrained_quadratic() {
        let mut p = unconstrained_skeleton(1);
        p.lb = vec![2.0];
        p.obj = Box::new(|x| (x[0] - 1.0).powi(2));
        p.grad = Box::new(|x| vec![2.0 * (x[0] - 1.0)]);
        p.hess = Box::new(|_| vec![(0, 0, 2.0)]);
        let (x, rep) = solve(&p, &[3.0], &SolverConfig::default());
        assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
        assert!((x[0] - 2.0).abs() < 1e-5, "x = {}", x[0]);
        assert!((2.0 * (x[0] - 1.0) - 2.0).abs() < 1e-4);
    }

    /// min x²+y² s.t. x+y = 1 → (0.5, 0.5), equality multiplier −1.
    #[test]
    fn equality_constrained_quadratic() {
        let mut p = unconstrained_skeleton(2);
        p.obj = Box::new(|x| x[0] * x[0] + x[1] * x[1]);
        p.grad = Box::new(|x| vec![2.0 * x[0], 2.0 * x[1]]);
        p.hess = Box::new(|_| vec![(0, 0, 2.0), (1, 1, 2.0)]);
        p.eq = Box::new(|x| vec![x[0] + x[1] - 1.0]);
        p.eq_struct = vec![(0, 0), (0, 1)];
        p.eq_jac = Box::new(|_| vec![1.0, 1.0]);
        p.m_eq = 1;
        let (x, rep) = solve(&p, &[3.0, -2.0], &SolverConfig::default());
        assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
        assert!((x[0] - 0.5).abs() < 1e-6, "{x:?}");
        assert!((x[1] - 0.5).abs() < 1e-6);
        assert!(
            (rep.multipliers[0] + 1.0).abs() < 1e-4,
            "{:?}",
            rep.multipliers
        );
    }

    /// min x s.t. x²+y² = 1 → (−1, 0): nonconvex sphere equality.
    #[test]
    fn norm_equality_with_linear_objective() {
        let mut p = unconstrained_skeleton(2);
        p.obj = Box::new(|x| x[0]);
        p.grad = Box::new(|_| vec![1.0, 0.0]);
        p.hess = Box::new(|_| vec![]);
        p.eq = Box::new(|x| vec![x[0] * x[0] + x[1] * x[1] - 1.0]);
        p.eq_struct = vec![(0, 0), (0, 1)];
        p.eq_jac = Box::new(|x| vec![2.0 * x[0], 2.0 * x[1]]);
        p.m_eq = 1;
        let (x, rep) = solve(&p, &[-0.5, 0.4], &SolverConfig::default());
        assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
        assert!((x[0] + 1.0).abs() < 1e-5, "{x:?}");
        assert!(x[1].abs() < 1e-5);
    }

    /// Inequality via a general constraint row rather than a bound.
    #[test]
    fn inequality_rows() {
        // min (x+2)² + y² s.t. 1 − x ≤ 0 → x* = 1, y* = 0.
        let mut p = unconstrained_skeleton(2);
        p.obj = Box::new(|x| (x[0] + 2.0).powi(2) + x[1] * x[1]);
        p.grad = Box::new(|x| vec![2.0 * (x[0] + 2.0), 2.0 * x[1]]);
        p.hess = Box::new(|_| vec![(0, 0, 2.0), (1, 1, 2.0)]);
        p.ineq = Box::new(|x| vec![1.0 - x[0]]);
        p.ineq_struct = vec![(0, 0)];
        p.ineq_jac = Box::new(|_| vec![-1.0]);
        p.m_in = 1;
        let (x, rep) = solve(&p, &[2.0, 1.5], &SolverConfig::default());
        assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
        assert!((x[0] - 1.0).abs() < 1e-5, "{x:?}");
        assert!(x[1].abs() < 1e-5);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // x = 0 and x = 1 simultaneously.
        let mut p = unconstrained_skeleton(1);
        p.eq = Box::new(|x| vec![x[0], x[0] - 1.0]);
        p.eq_struct = vec![(0, 0), (1, 0)];
        p.eq_jac = Box::new(|_| vec![1.0, 1.0]);
        p.m_eq = 2;
        let mut cfg = SolverConfig::default();
        cfg.max_iterations = 4000;
        let (_, rep) = solve(&p, &[0.3], &cfg);
        assert!(
            matches!(rep.status, SolveStatus::Infeasible | SolveStatus::MaxIter),
            "{rep:?}"
        );
        assert!(rep.feasibility > 0.1);
    }

    #[test]
    fn gradient_check_on_quadratic() {
        let mut p = unconstrained_skeleton(3);
        p.obj = Box::new(|x| x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2] + x[0] * x[1]);
        p.grad = Box::new(|x| vec![2.0 * x[0] + x[1], 4.0 * x[1] + x[0], x[2]]);
        p.eq = Box::new(|x| vec![x[0] + x[1] * x[2]]);
        p.eq_struct = vec![(0, 0), (0, 1), (0, 2)];
        p.eq_jac = Box::new(|x| vec![1.0, x[2], x[1]]);
        p.m_eq = 1;
        let err = check_gradients(&p, &[0.3, -0.7, 1.1], 1e-6);
        assert!(err < 1e-9, "gradient error {err}");
    }

    #[test]
    fn deterministic_iterates() {
        let build = || {
            let mut p = unconstrained_skeleton(2);
            p.obj = Box::new(|x| (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2));
            p.grad = Box::new(|x| vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)]);
            p.hess = Box::new(|_| vec![(0, 0, 2.0), (1, 1, 2.0)]);
            p.eq = Box::new(|x| vec![x[0] * x[0] + x[1] - 1.0]);
            p.eq_struct = vec![(0, 0), (0, 1)];
            p.eq_jac = Box::new(|x| vec![2.0 * x[0], 1.0]);
            p.m_eq = 1;
            p
        };
        let (x1, r1) = solve(&build(), &[0.2, 0.2], &SolverConfig::default());
        let (x2, r2) = solve(&build(), &[0.2, 0.2], &SolverConfig::default());
        assert_eq!(x1, x2);
        assert_eq!(r1.iterations, r2.iterations);
    }
}
