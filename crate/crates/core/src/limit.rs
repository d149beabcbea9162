//! Deterministic small-width limit: one walker dragging its own chemical
//! trail under a constant force F = (u, 0).
//!
//! With unit diffusion and no decay the trail gradient collapses to a single
//! history integral,
//!
//! ```text
//! grad c(X(t), t) = -(a / 8 pi) * integral over tau in [eps, t + eps] of
//!                   tau^-2 (X(t) - X(t + eps - tau)) exp(-|X(t) - X(t+eps-tau)|^2 / (4 tau))
//! ```
//!
//! and the late-time speed solves v = u / (1 + (a/8pi) I(v)) with
//! I(v) the improper integral of ((tau-eps)/tau^2) exp(-v^2 (tau-eps)^2 / (4 tau)).

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::geom::Vec2;
use crate::kernel::{KernelError, Result, SampledPath};
use crate::quad::{nodes_1d, QuadScheme, QuadratureSpec};

/// Walker history plus the model constants. The second coordinate never
/// changes: the gradient's y component is an exact zero on one-dimensional
/// histories, so the starting y survives every step bit for bit.
#[derive(Debug, Clone)]
pub struct DeterministicState {
    history: SampledPath,
    epsilon: f64,
    amplitude: f64,
    force: f64,
}

impl DeterministicState {
    pub fn new(start: Vec2, epsilon: f64, amplitude: f64, force: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(KernelError::InvalidInput("epsilon must be positive".into()));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(KernelError::InvalidInput("amplitude must be nonnegative".into()));
        }
        if !(force > 0.0 && force.is_finite()) {
            return Err(KernelError::InvalidInput("force must be positive".into()));
        }
        Ok(DeterministicState {
            history: SampledPath::new(2, vec![0.0], vec![start.x, start.y])?,
            epsilon,
            amplitude,
            force,
        })
    }

    pub fn history(&self) -> &SampledPath {
        &self.history
    }

    pub fn time(&self) -> f64 {
        self.history.end_time()
    }

    pub fn position(&self) -> Vec2 {
        self.history.eval_2d(self.time())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn force(&self) -> f64 {
        self.force
    }
}

/// Trail gradient at the walker's own position at time `t`.
///
/// The integrand lives on scales set by tau itself (it peaks near 2 eps and
/// decays like 1/tau), so the quadrature grades the interval [eps, t + eps]
/// into octave panels with `q.time_points` nodes each.
pub fn closed_form_gradient(
    state: &DeterministicState,
    t: f64,
    q: &QuadratureSpec,
) -> Result<Vec2> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime { t });
    }
    let h = &state.history;
    if h.start_time() > 0.0 || h.end_time() < t - 1e-12 {
        return Err(KernelError::InvalidInput(format!(
            "history covers [{}, {}], gradient needs [0, {t}]",
            h.start_time(),
            h.end_time()
        )));
    }
    let eps = state.epsilon;
    let x_now = h.eval_2d(t);
    let upper = t + eps;
    let mut acc = Vec2::ZERO;
    let mut lo = eps;
    while lo < upper {
        let hi = (2.0 * lo).min(upper);
        for &(tau, w) in &nodes_1d(q.scheme, q.time_points, lo, hi) {
            let past = h.eval_2d((t + eps - tau).min(t));
            let d = x_now - past;
            let e = (-d.norm_sq() / (4.0 * tau)).exp();
            acc = acc + d * (w * e / (tau * tau));
        }
        lo = hi;
    }
    Ok(acc * (-state.amplitude / (8.0 * PI)))
}

/// One explicit Euler step from the state's current end time `t` (passed
/// explicitly so call sites stay in step with their own clocks).
pub fn deterministic_step(
    state: &mut DeterministicState,
    t: f64,
    dt: f64,
    q: &QuadratureSpec,
) -> Result<Vec2> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KernelError::InvalidInput("time step must be positive".into()));
    }
    if (t - state.time()).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(KernelError::InvalidInput(format!(
            "step time {t} does not match the history end {}",
            state.time()
        )));
    }
    let grad = if t > 0.0 {
        closed_form_gradient(state, t, q)?
    } else {
        Vec2::ZERO
    };
    let x = state.position();
    // adding a signed zero can flip the sign bit of a zero coordinate
    let next_y = if grad.y == 0.0 { x.y } else { x.y + grad.y * dt };
    let next = Vec2::new(x.x + (grad.x + state.force) * dt, next_y);
    state.history.push(t + dt, &[next.x, next.y])?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AsymptoticSpeedResult {
    pub epsilon: f64,
    pub v_eps: f64,
    /// |v - G(v)| at the returned speed.
    pub residual: f64,
    pub iterations: usize,
    /// I(v_eps), the history integral at the fixed point.
    pub integral: f64,
    /// Relative change of I(v_eps) under node doubling.
    pub quadrature_rel_diff: f64,
}

/// I(v) by tau = e^sigma substitution: the integrand becomes
/// (1 - eps e^-sigma) exp(-v^2 (tau - eps)^2 / (4 tau)), bounded and smooth,
/// integrated over unit panels in sigma until the exponential is dead.
fn speed_integral(epsilon: f64, v: f64, nodes_per_panel: usize) -> f64 {
    debug_assert!(v > 0.0);
    let cutoff = 2.0 * epsilon + 320.0 / (v * v) + 10.0;
    let sigma_lo = epsilon.ln();
    let sigma_hi = cutoff.ln();
    let mut acc = 0.0;
    let mut lo = sigma_lo;
    while lo < sigma_hi {
        let hi = (lo + 1.0).min(sigma_hi);
        for &(sigma, w) in &nodes_1d(QuadScheme::GaussLegendre, nodes_per_panel, lo, hi) {
            let tau = sigma.exp();
            let dist = tau - epsilon;
            let e = (-v * v * dist * dist / (4.0 * tau)).exp();
            acc += w * (1.0 - epsilon / tau) * e;
        }
        lo = hi;
    }
    acc
}

/// Solves v = u / (1 + (a/8pi) I(v)) by damped iteration from v = u. G is
/// decreasing and maps (0, u] into (0, u], so the averaged update converges
/// without derivatives.
pub fn asymptotic_speed(epsilon: f64, a: f64, u: f64, tol: f64) -> Result<AsymptoticSpeedResult> {
    if !(epsilon > 0.0) || !(a >= 0.0) || !(u > 0.0) || !(tol > 0.0) {
        return Err(KernelError::InvalidInput(
            "asymptotic speed needs epsilon, u, tol > 0 and a >= 0".into(),
        ));
    }
    let nodes = 24usize;
    let g = |v: f64| -> f64 { u / (1.0 + a / (8.0 * PI) * speed_integral(epsilon, v, nodes)) };
    let max_iterations = 200;
    let mut v = u;
    for iteration in 1..=max_iterations {
        let gv = g(v);
        let residual = (v - gv).abs();
        if residual < tol {
            let integral = speed_integral(epsilon, gv, nodes);
            let refined = speed_integral(epsilon, gv, 2 * nodes);
            let quadrature_rel_diff = (integral - refined).abs() / refined.abs().max(1e-300);
            let v_eps = gv;
            debug_assert!(v_eps > 0.0 && v_eps <= u);
            return Ok(AsymptoticSpeedResult {
                epsilon,
                v_eps,
                residual,
                iterations: iteration,
                integral,
                quadrature_rel_diff,
            });
        }
        v = 0.5 * (v + gv);
    }
    Err(KernelError::FixedPointDiverged {
        window_start: 0.0,
        window_end: u,
        iterations: max_iterations,
        contraction: f64::NAN,
    })
}

/// Fixed-point speeds across a width sweep, in the given order.
pub fn sweep_epsilon(
    eps_list: &[f64],
    a: f64,
    u: f64,
    tol: f64,
) -> Result<Vec<AsymptoticSpeedResult>> {
    if eps_list.is_empty() {
        return Err(KernelError::InvalidInput("sweep needs at least one width".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(KernelError::InvalidInput("sweep widths must be positive".into()));
    }
    eps_list
        .par_iter()
        .map(|&eps| asymptotic_speed(eps, a, u, tol))
        .collect()
}
