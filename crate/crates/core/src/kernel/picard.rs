//! Picard iteration for the self-consistent source problem.
//!
//! The walkers' emission amplitudes depend on the concentrations at the
//! walkers, so the Duhamel map becomes a fixed-point problem. The map
//! contracts on short enough horizons; the solver iterates on a window,
//! monitors the successive-difference ratios, and halves the window when the
//! iteration stops contracting, continuing from the converged prefix.

use super::duhamel::{initial_term, initial_term_grad, mollified_kernel, FieldSampler};
use super::{KernelError, KernelParams, Result, SampledPath};
use crate::quad::{nodes_1d, QuadratureSpec};
use std::sync::Arc;

/// Emission amplitude a(c, t) of one walker into one species; `c` is the
/// concentration vector at the walker.
pub type EmissionFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

pub struct PicardProblem {
    /// Kernel parameters per species; all entries share one dimension.
    pub species: Vec<KernelParams>,
    /// emissions[i][j] feeds walker j into species i.
    pub emissions: Vec<Vec<EmissionFn>>,
    pub epsilon: f64,
    pub horizon: f64,
    /// Sup-norm tolerance on successive iterates, sampled along the paths.
    pub tol: f64,
    pub max_iterations: usize,
    /// Node count of the uniform time grid carrying the iterated samples.
    pub sample_points: usize,
    pub quad: QuadratureSpec,
    /// Initial data per species; `None` entries start from zero.
    pub u0: Vec<Option<FieldSampler>>,
}

impl PicardProblem {
    fn validate(&self, paths: &[SampledPath]) -> Result<()> {
        if self.species.is_empty() {
            return Err(KernelError::InvalidInput("need at least one species".into()));
        }
        let dim = self.species[0].dim;
        if self.species.iter().any(|p| p.dim != dim) {
            return Err(KernelError::InvalidInput("species dimensions differ".into()));
        }
        if self.emissions.len() != self.species.len() {
            return Err(KernelError::InvalidInput(format!(
                "{} emission rows for {} species",
                self.emissions.len(),
                self.species.len()
            )));
        }
        if self.emissions.iter().any(|row| row.len() != paths.len()) {
            return Err(KernelError::InvalidInput(format!(
                "every emission row must have one entry per walker ({})",
                paths.len()
            )));
        }
        if !self.u0.is_empty() && self.u0.len() != self.species.len() {
            return Err(KernelError::InvalidInput("u0 table length mismatch".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(KernelError::InvalidInput("mollifier width must be positive".into()));
        }
        if !(self.horizon > 0.0) || !(self.tol > 0.0) {
            return Err(KernelError::InvalidInput("horizon and tol must be positive".into()));
        }
        if self.sample_points < 3 {
            return Err(KernelError::InvalidInput("need at least 3 sample points".into()));
        }
        for (j, path) in paths.iter().enumerate() {
            if path.dim() != dim {
                return Err(KernelError::DimensionMismatch { expected: dim, got: path.dim() });
            }
            if path.start_time() > 0.0 || path.end_time() < self.horizon {
                return Err(KernelError::InvalidInput(format!(
                    "path {j} covers [{}, {}], need [0, {}]",
                    path.start_time(),
                    path.end_time(),
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    fn u0_for(&self, i: usize) -> Option<&FieldSampler> {
        self.u0.get(i).and_then(|s| s.as_ref())
    }
}

#[derive(Clone, Debug, Default)]
pub struct PicardDiagnostics {
    /// Windows actually iterated, as (start, end) times.
    pub windows: Vec<(f64, f64)>,
    /// Successive sup-norm differences per window.
    pub sup_diffs: Vec<Vec<f64>>,
}

/// Converged per-species field evaluator.
pub struct PicardSolution {
    species: Vec<KernelParams>,
    emissions: Vec<Vec<EmissionFn>>,
    u0: Vec<Option<FieldSampler>>,
    epsilon: f64,
    horizon: f64,
    quad: QuadratureSpec,
    paths: Vec<SampledPath>,
    grid: Vec<f64>,
    /// table[i][j][q]: concentration of species i at walker j, grid time q.
    table: Vec<Vec<Vec<f64>>>,
    pub diagnostics: PicardDiagnostics,
}

impl PicardSolution {
    /// Concentration vector at walker j, grid-interpolated at time s.
    fn concentration_at_walker(&self, j: usize, s: f64) -> Vec<f64> {
        let n = self.species.len();
        let q_max = self.grid.len() - 1;
        let dt = self.horizon / q_max as f64;
        let pos = (s / dt).clamp(0.0, q_max as f64);
        let q0 = (pos.floor() as usize).min(q_max - 1);
        let w = pos - q0 as f64;
        (0..n)
            .map(|i| {
                let row = &self.table[i][j];
                row[q0] + w * (row[q0 + 1] - row[q0])
            })
            .collect()
    }

    fn amplitude(&self, i: usize, j: usize, s: f64) -> f64 {
        let c = self.concentration_at_walker(j, s);
        (self.emissions[i][j])(&c, s)
    }

    /// Field of species i at (x, t), using the converged amplitude samples.
    pub fn eval(&self, i: usize, x: &[f64], t: f64) -> Result<f64> {
        self.check_args(i, x, t)?;
        let p = &self.species[i];
        if t == 0.0 {
            return Ok(initial_term(p, self.u0_for(i), x, 0.0, &self.quad));
        }
        let mut total = initial_term(p, self.u0_for(i), x, t, &self.quad);
        let mut xi = vec![0.0; p.dim];
        let mut r = vec![0.0; p.dim];
        for (j, path) in self.paths.iter().enumerate() {
            for &(s, w) in &nodes_1d(self.quad.scheme, self.quad.time_points, 0.0, t) {
                let f = self.amplitude(i, j, s);
                if f == 0.0 {
                    continue;
                }
                path.eval(s, &mut xi);
                for k in 0..p.dim {
                    r[k] = x[k] - xi[k];
                }
                total += w * f * mollified_kernel(p, self.epsilon, &r, t - s, &self.quad);
            }
        }
        Ok(total)
    }

    /// Spatial gradient of species i at (x, t).
    pub fn grad(&self, i: usize, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_args(i, x, t)?;
        let p = &self.species[i];
        let mut total = initial_term_grad(p, self.u0_for(i), x, t, &self.quad)?;
        let mut xi = vec![0.0; p.dim];
        let mut r = vec![0.0; p.dim];
        for (j, path) in self.paths.iter().enumerate() {
            for &(s, w) in &nodes_1d(self.quad.scheme, self.quad.time_points, 0.0, t) {
                let f = self.amplitude(i, j, s);
                if f == 0.0 {
                    continue;
                }
                path.eval(s, &mut xi);
                for k in 0..p.dim {
                    r[k] = x[k] - xi[k];
                }
                let g = mollified_kernel_grad(p, self.epsilon, &r, t - s, &self.quad);
                for k in 0..p.dim {
                    total[k] += w * f * g[k];
                }
            }
        }
        Ok(total)
    }

    fn check_args(&self, i: usize, x: &[f64], t: f64) -> Result<()> {
        if i >= self.species.len() {
            return Err(KernelError::InvalidInput(format!("species index {i} out of range")));
        }
        if x.len() != self.species[i].dim {
            return Err(KernelError::DimensionMismatch {
                expected: self.species[i].dim,
                got: x.len(),
            });
        }
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(KernelError::InvalidInput(format!(
                "time {t} outside solved horizon [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    fn u0_for(&self, i: usize) -> Option<&FieldSampler> {
        self.u0.get(i).and_then(|s| s.as_ref())
    }

    /// Sup-norm defect of the fixed point: re-applying the Duhamel map to the
    /// converged samples must reproduce them.
    pub fn self_consistency(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut xi = vec![0.0; self.species[0].dim];
        for i in 0..self.species.len() {
            for (j, path) in self.paths.iter().enumerate() {
                for (q, &s) in self.grid.iter().enumerate() {
                    path.eval(s, &mut xi);
                    let mapped = self.eval(i, &xi, s)?;
                    worst = worst.max((mapped - self.table[i][j][q]).abs());
                }
            }
        }
        Ok(worst)
    }
}

fn mollified_kernel_grad(
    p: &KernelParams,
    epsilon: f64,
    r: &[f64],
    tau: f64,
    q: &QuadratureSpec,
) -> Vec<f64> {
    let d = p.dim;
    if p.diffusion == 1.0 {
        let s = tau + epsilon;
        let value = {
            let r2: f64 = r.iter().map(|&c| c * c).sum();
            (4.0 * std::f64::consts::PI * s).powf(-(d as f64) / 2.0)
                * (-r2 / (4.0 * s) - p.decay * tau).exp()
        };
        return r.iter().map(|&c| -c / (2.0 * s) * value).collect();
    }
    // Quadrature of int eta_eps(y) grad Phi(r - y, tau) dy over the product
    // Gaussian support; tau = 0 never reaches here (grad of the mollifier
    // itself would be needed only at t = s, a measure-zero quadrature node).
    let dtau = p.diffusion * tau;
    let center_scale = epsilon / (epsilon + dtau);
    let std = (2.0 * epsilon * dtau / (epsilon + dtau)).sqrt();
    let hw = (12.0 * std).min(q.space_halfwidth);
    let axis = nodes_1d(q.scheme, q.space_points, -hw, hw);
    let mut total = vec![0.0; d];
    let mut idx = vec![0usize; d];
    let mut y = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    'outer: loop {
        let mut w = 1.0;
        for k in 0..d {
            let (c, wx) = axis[idx[k]];
            w *= wx;
            y[k] = r[k] * center_scale + c;
            shifted[k] = r[k] - y[k];
        }
        let eta = {
            let y2: f64 = y.iter().map(|&c| c * c).sum();
            (4.0 * std::f64::consts::PI * epsilon).powf(-(d as f64) / 2.0)
                * (-y2 / (4.0 * epsilon)).exp()
        };
        let phi = super::heat_kernel_eval(p, &shifted, tau).unwrap();
        let scale = -phi / (2.0 * p.diffusion * tau);
        for k in 0..d {
            total[k] += w * eta * shifted[k] * scale;
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < axis.len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    total
}

/// Solves the self-consistent source problem for the given walker paths.
pub fn picard_solve(problem: &PicardProblem, paths: &[SampledPath]) -> Result<PicardSolution> {
    problem.validate(paths)?;
    let n = problem.species.len();
    let m = paths.len();
    let q_count = problem.sample_points;
    let grid: Vec<f64> =
        (0..q_count).map(|q| problem.horizon * q as f64 / (q_count - 1) as f64).collect();

    let mut solution = PicardSolution {
        species: problem.species.clone(),
        emissions: problem.emissions.clone(),
        u0: problem.u0.clone(),
        epsilon: problem.epsilon,
        horizon: problem.horizon,
        quad: problem.quad,
        paths: paths.to_vec(),
        grid: grid.clone(),
        table: vec![vec![vec![0.0; q_count]; m]; n],
        diagnostics: PicardDiagnostics::default(),
    };

    // Start from the evolution of the initial data alone.
    let mut xi = vec![0.0; problem.species[0].dim];
    for i in 0..n {
        for (j, path) in paths.iter().enumerate() {
            for (q, &s) in grid.iter().enumerate() {
                path.eval(s, &mut xi);
                solution.table[i][j][q] =
                    initial_term(&problem.species[i], problem.u0_for(i), &xi, s, &problem.quad);
            }
        }
    }

    // Windowed continuation over grid indices: (lo, hi] is under iteration,
    // entries at or before lo are frozen.
    let mut lo = 0usize;
    let mut hi = q_count - 1;
    while lo < q_count - 1 {
        let mut diffs = Vec::new();
        let mut converged = false;
        let mut rising = 0usize;
        for _iter in 0..problem.max_iterations {
            let mut sup = 0.0f64;
            let mut updates = Vec::with_capacity(n * m * (hi - lo));
            for i in 0..n {
                for (j, path) in paths.iter().enumerate() {
                    for q in (lo + 1)..=hi {
                        let s = grid[q];
                        path.eval(s, &mut xi);
                        let mapped = solution.eval(i, &xi, s)?;
                        sup = sup.max((mapped - solution.table[i][j][q]).abs());
                        updates.push((i, j, q, mapped));
                    }
                }
            }
            for (i, j, q, v) in updates {
                solution.table[i][j][q] = v;
            }
            diffs.push(sup);
            if sup < problem.tol {
                converged = true;
                break;
            }
            let k = diffs.len();
            if k >= 2 && diffs[k - 1] > diffs[k - 2] {
                rising += 1;
                if rising >= 2 {
                    break; // not contracting on this window
                }
            }
        }
        solution.diagnostics.windows.push((grid[lo], grid[hi]));
        solution.diagnostics.sup_diffs.push(diffs.clone());
        if converged {
            let width = hi - lo;
            lo = hi;
            hi = (lo + 2 * width).min(q_count - 1);
        } else {
            let contraction = match diffs.len() {
                0 | 1 => f64::INFINITY,
                k => diffs[k - 1] / diffs[k - 2],
            };
            if hi - lo <= 1 {
                return Err(KernelError::FixedPointDiverged {
                    window_start: grid[lo],
                    window_end: grid[hi],
                    iterations: diffs.len(),
                    contraction,
                });
            }
            hi = lo + (hi - lo) / 2;
        }
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::super::duhamel::{duhamel_solve, MollifiedSourceSpec};
    use super::*;
    use crate::quad::QuadScheme;

    fn toy_problem(emission: EmissionFn, walkers: usize, horizon: f64) -> PicardProblem {
        let p = KernelParams::new(1.0, 0.5, 2).unwrap();
        PicardProblem {
            species: vec![p],
            emissions: vec![vec![emission; walkers]],
            epsilon: 0.01,
            horizon,
            tol: 1e-8,
            max_iterations: 200,
            sample_points: 129,
            quad: QuadratureSpec::new(48, 64, 16.0, QuadScheme::GaussLegendre),
            u0: vec![None],
        }
    }

    fn toy_paths() -> Vec<SampledPath> {
        vec![
            SampledPath::stationary(&[-0.25, 0.0], 8.0).unwrap(),
            SampledPath::stationary(&[0.25, 0.1], 8.0).unwrap(),
        ]
    }

    #[test]
    fn zero_emissions_return_initial_evolution() {
        let mut problem = toy_problem(Arc::new(|_c: &[f64], _t| 0.0), 2, 1.0);
        problem.u0 = vec![Some(Arc::new(|_x: &[f64]| 1.0) as FieldSampler)];
        let sol = picard_solve(&problem, &toy_paths()).unwrap();
        let got = sol.eval(0, &[0.0, 0.0], 1.0).unwrap();
        let expect = (-0.5f64).exp(); // constant data decays at rate lambda
        assert!((got - expect).abs() < 1e-9, "got {got}, expect {expect}");
        // Converges in a single sweep: the map no longer depends on the field.
        assert_eq!(sol.diagnostics.windows.len(), 1);
    }

    #[test]
    fn constant_emissions_match_duhamel() {
        let problem = toy_problem(Arc::new(|_c: &[f64], _t| 1.7), 2, 1.0);
        let paths = toy_paths();
        let sol = picard_solve(&problem, &paths).unwrap();
        let x = [0.1, -0.2];
        let got = sol.eval(0, &x, 1.0).unwrap();
        let srcs: Vec<MollifiedSourceSpec> = paths
            .iter()
            .map(|p| MollifiedSourceSpec::constant(p.clone(), 1.7, 0.01).unwrap())
            .collect();
        let expect =
            duhamel_solve(&srcs, &problem.species[0], None, &x, 1.0, &problem.quad).unwrap();
        assert!((got - expect).abs() < 1e-8, "picard {got} vs duhamel {expect}");
    }

    #[test]
    fn arctan_coupling_contracts_geometrically() {
        // Nonzero initial data keeps the zero field from being a trivial
        // fixed point of arctan-coupled emissions.
        let mut problem = toy_problem(Arc::new(|c: &[f64], _t| c[0].atan()), 2, 1.0);
        problem.u0 = vec![Some(Arc::new(|_x: &[f64]| 1.0) as FieldSampler)];
        let sol = picard_solve(&problem, &toy_paths()).unwrap();
        let diffs = &sol.diagnostics.sup_diffs[0];
        assert!(diffs.len() >= 3, "expected several iterations, got {diffs:?}");
        // Successive differences decay geometrically with a ratio < 1.
        for w in diffs.windows(2) {
            if w[0] > 1e-13 {
                assert!(w[1] < w[0], "non-monotone: {diffs:?}");
            }
        }
        let consistency = sol.self_consistency().unwrap();
        assert!(consistency < 2e-8, "self consistency {consistency}");
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let problem = toy_problem(Arc::new(|_c: &[f64], _t| 0.0), 1, 1.0);
        assert!(picard_solve(&problem, &toy_paths()).is_err());
        let short = toy_problem(Arc::new(|_c: &[f64], _t| 0.0), 2, 20.0);
        assert!(picard_solve(&short, &toy_paths()).is_err());
    }
}
