//! Implicit Euler stepping of M dq/dt + B q = f.
//!
//! On the uniform periodic triangulation every row of M + dt*B is the same
//! stencil translated, so the system matrix is diagonalized by the 2D DFT.
//! The factorization is the FFT of the stencil, done once per species; each
//! step is two FFTs plus a pointwise divide, and the result is checked
//! against the assembled sparse matrix.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::grid::PeriodicGrid;
use super::sparse::Csr;
use crate::kernel::{KernelError, Result};

pub struct ImplicitEulerSolver {
    side: usize,
    dt: f64,
    mass: Arc<Csr>,
    system: Csr,
    inv_symbol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

const RESIDUAL_LIMIT: f64 = 1e-10;

impl ImplicitEulerSolver {
    /// Factors M + dt*B for one species. `stiffness` is the assembled
    /// bilinear form B = D*K + lambda*M.
    pub fn new(grid: &PeriodicGrid, mass: Arc<Csr>, stiffness: &Csr, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(KernelError::InvalidInput(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let side = grid.nodes_per_side();
        let count = grid.node_count();
        if mass.dim() != count || stiffness.dim() != count {
            return Err(KernelError::InvalidInput(
                "matrix dimensions do not match the grid".into(),
            ));
        }
        let system = mass.add_scaled(stiffness, dt);
        check_translation_invariance(&system, side)?;

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(side);
        let inv = planner.plan_fft_inverse(side);

        // symbol = 2D DFT of the node-0 stencil image
        let mut img = vec![Complex::new(0.0, 0.0); count];
        for (c, v) in system.row(0) {
            img[c] = Complex::new(v, 0.0);
        }
        fft2(&mut img, side, &fwd);
        let max_mag = img.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut inv_symbol = Vec::with_capacity(count);
        for z in &img {
            if z.im.abs() > 1e-12 * max_mag {
                return Err(KernelError::SpectralFactorization(format!(
                    "eigenvalue has imaginary part {:.3e}",
                    z.im
                )));
            }
            if z.re <= 0.0 {
                return Err(KernelError::SpectralFactorization(format!(
                    "nonpositive eigenvalue {:.3e}",
                    z.re
                )));
            }
            inv_symbol.push(1.0 / z.re);
        }
        Ok(ImplicitEulerSolver { side, dt, mass, system, inv_symbol, fwd, inv })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn system(&self) -> &Csr {
        &self.system
    }

    /// One backward Euler step: solves (M + dt B) q_next = M q + dt f.
    pub fn step(&self, q: &[f64], load: &[f64]) -> Result<Vec<f64>> {
        let count = self.side * self.side;
        if q.len() != count || load.len() != count {
            return Err(KernelError::InvalidInput(
                "state and load must have one entry per node".into(),
            ));
        }
        let mut rhs = self.mass.matvec_alloc(q);
        for (r, f) in rhs.iter_mut().zip(load) {
            *r += self.dt * *f;
        }
        let sol = self.solve(&rhs);

        let mut residual = self.system.matvec_alloc(&sol);
        let mut res_sq = 0.0;
        let mut rhs_sq = 0.0;
        for (r, b) in residual.iter_mut().zip(&rhs) {
            *r -= b;
            res_sq += *r * *r;
            rhs_sq += b * b;
        }
        let limit = RESIDUAL_LIMIT * rhs_sq.sqrt();
        if res_sq.sqrt() > limit && rhs_sq > 0.0 {
            return Err(KernelError::ResidualTooLarge { residual: res_sq.sqrt(), limit });
        }
        Ok(sol)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let count = rhs.len();
        let mut buf: Vec<Complex<f64>> = rhs.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft2(&mut buf, self.side, &self.fwd);
        for (z, s) in buf.iter_mut().zip(&self.inv_symbol) {
            *z *= *s;
        }
        fft2(&mut buf, self.side, &self.inv);
        // unnormalized transforms compose to count * identity
        buf.iter().map(|z| z.re / count as f64).collect()
    }
}

/// In-place 2D transform: rows, transpose, rows, transpose back.
fn fft2(buf: &mut [Complex<f64>], side: usize, fft: &Arc<dyn Fft<f64>>) {
    fft.process(buf);
    transpose(buf, side);
    fft.process(buf);
    transpose(buf, side);
}

fn transpose(buf: &mut [Complex<f64>], side: usize) {
    for y in 0..side {
        for x in (y + 1)..side {
            buf.swap(y * side + x, x * side + y);
        }
    }
}

/// Every row must be the node-0 stencil translated. Summation order differs
/// between seam and interior nodes, so allow a few ulps.
fn check_translation_invariance(system: &Csr, side: usize) -> Result<()> {
    let count = side * side;
    let mut stencil = vec![0.0f64; count];
    for (c, v) in system.row(0) {
        stencil[c] = v;
    }
    let scale: f64 = stencil.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rows = [1, side / 2, side + 1, count / 2 + side / 3, count - 1];
    for &r in rows.iter().filter(|&&r| r < count) {
        let (rx, ry) = (r % side, r / side);
        let mut seen = 0usize;
        for (c, v) in system.row(r) {
            let (cx, cy) = (c % side, c / side);
            let ox = (cx + side - rx) % side;
            let oy = (cy + side - ry) % side;
            let expect = stencil[oy * side + ox];
            if (v - expect).abs() > 1e-12 * scale {
                return Err(KernelError::SpectralFactorization(format!(
                    "row {r} deviates from the translated stencil at column {c}"
                )));
            }
            seen += 1;
        }
        if seen != system.row(0).count() {
            return Err(KernelError::SpectralFactorization(format!(
                "row {r} has {seen} entries, node 0 has {}",
                system.row(0).count()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble::{assemble_laplacian, assemble_mass, assemble_source, assemble_stiffness};
    use crate::geom::Vec2;

    fn setup(l: f64, h: f64, d: f64, lam: f64, dt: f64) -> (PeriodicGrid, ImplicitEulerSolver) {
        let grid = PeriodicGrid::new(l, h).unwrap();
        let mass = Arc::new(assemble_mass(&grid));
        let b = assemble_stiffness(&grid, d, lam).unwrap();
        let solver = ImplicitEulerSolver::new(&grid, mass, &b, dt).unwrap();
        (grid, solver)
    }

    #[test]
    fn constant_state_decays_like_scalar_ode() {
        let (grid, solver) = setup(3.0, 0.5, 1.7, 0.8, 0.01);
        let q0 = vec![2.0; grid.node_count()];
        let f = vec![0.0; grid.node_count()];
        let q1 = solver.step(&q0, &f).unwrap();
        // diffusion drops out on constants: q1 = q0 / (1 + dt*lambda)
        let expect = 2.0 / (1.0 + 0.01 * 0.8);
        for v in &q1 {
            assert!((v - expect).abs() < 1e-12, "got {v}, expected {expect}");
        }
    }

    #[test]
    fn mass_is_conserved_without_decay() {
        // decay-free form assembled directly from the Laplacian
        let grid = PeriodicGrid::new(3.0, 0.5).unwrap();
        let mass = Arc::new(assemble_mass(&grid));
        let k = assemble_laplacian(&grid);
        let zero = Csr::from_triplets(grid.node_count(), vec![]);
        let b = zero.add_scaled(&k, 2.3);
        let solver = ImplicitEulerSolver::new(&grid, mass.clone(), &b, 0.05).unwrap();
        let mut q: Vec<f64> = (0..grid.node_count())
            .map(|i| ((i * 2654435761) % 97) as f64 / 97.0)
            .collect();
        let total = |q: &[f64]| -> f64 { mass.matvec_alloc(q).iter().sum() };
        let m0 = total(&q);
        let f = vec![0.0; grid.node_count()];
        for _ in 0..50 {
            q = solver.step(&q, &f).unwrap();
        }
        assert!((total(&q) - m0).abs() < 1e-12 * m0.abs().max(1.0));
    }

    #[test]
    fn source_balance_reaches_steady_state() {
        // with decay, a constant total injection balances at rate a/lambda
        let (grid, solver) = setup(3.0, 0.25, 1.0, 1.0, 0.05);
        let f = assemble_source(&grid, 0.02, &[(Vec2::new(0.4, 0.1), 1.0)]).unwrap();
        let mass = assemble_mass(&grid);
        let mut q = vec![0.0; grid.node_count()];
        for _ in 0..400 {
            q = solver.step(&q, &f).unwrap();
        }
        let total: f64 = mass.matvec_alloc(&q).iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "steady mass {total}");
    }

    #[test]
    fn step_is_translation_equivariant() {
        let grid = PeriodicGrid::new(3.0, 0.5).unwrap();
        let mass = Arc::new(assemble_mass(&grid));
        let b = assemble_stiffness(&grid, 1.0, 1.0).unwrap();
        let solver = ImplicitEulerSolver::new(&grid, mass, &b, 0.01).unwrap();
        let n = grid.nodes_per_side();
        let shift = 4usize;
        let shifted_id =
            |id: usize| -> usize { (id / n) * n + ((id % n) + shift) % n };

        let src = Vec2::new(-0.3, 0.7);
        let src_shifted = Vec2::new(-0.3 + shift as f64 * 0.5, 0.7);
        let f0 = assemble_source(&grid, 0.05, &[(src, 2.0)]).unwrap();
        let f1 = assemble_source(&grid, 0.05, &[(src_shifted, 2.0)]).unwrap();

        let mut q0 = vec![0.0; grid.node_count()];
        let mut q1 = vec![0.0; grid.node_count()];
        for _ in 0..20 {
            q0 = solver.step(&q0, &f0).unwrap();
            q1 = solver.step(&q1, &f1).unwrap();
        }
        for id in 0..grid.node_count() {
            let d = (q0[id] - q1[shifted_id(id)]).abs();
            assert!(d < 1e-10, "node {id}: {d}");
        }
    }

    #[test]
    fn states_stay_nonnegative_from_positive_sources() {
        let (grid, solver) = setup(3.0, 0.25, 1.0, 1.0, 0.01);
        let f = assemble_source(&grid, 0.01, &[(Vec2::new(0.0, 0.0), 5.0)]).unwrap();
        let mut q = vec![0.0; grid.node_count()];
        for _ in 0..100 {
            q = solver.step(&q, &f).unwrap();
        }
        let min = q.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-8, "min nodal value {min}");
    }

    #[test]
    fn rejects_bad_time_step_and_shapes() {
        let grid = PeriodicGrid::new(3.0, 0.5).unwrap();
        let mass = Arc::new(assemble_mass(&grid));
        let b = assemble_stiffness(&grid, 1.0, 1.0).unwrap();
        assert!(ImplicitEulerSolver::new(&grid, mass.clone(), &b, 0.0).is_err());
        let solver = ImplicitEulerSolver::new(&grid, mass, &b, 0.01).unwrap();
        let q = vec![0.0; 3];
        let f = vec![0.0; grid.node_count()];
        assert!(solver.step(&q, &f).is_err());
    }

    #[test]
    fn spectral_solve_matches_dense_reference() {
        let grid = PeriodicGrid::new(1.5, 0.5).unwrap();
        let mass = Arc::new(assemble_mass(&grid));
        let b = assemble_stiffness(&grid, 0.9, 1.4).unwrap();
        let solver = ImplicitEulerSolver::new(&grid, mass.clone(), &b, 0.02).unwrap();
        let nd = grid.node_count();
        let q: Vec<f64> = (0..nd).map(|i| (i as f64 * 0.37).sin()).collect();
        let f: Vec<f64> = (0..nd).map(|i| (i as f64 * 0.11).cos()).collect();
        let got = solver.step(&q, &f).unwrap();

        let dense = solver.system().to_dense();
        let mut a = nalgebra::DMatrix::zeros(nd, nd);
        for r in 0..nd {
            for c in 0..nd {
                a[(r, c)] = dense[r][c];
            }
        }
        let mut rhs = mass.matvec_alloc(&q);
        for (r, fv) in rhs.iter_mut().zip(&f) {
            *r += 0.02 * fv;
        }
        let sol = a
            .lu()
            .solve(&nalgebra::DVector::from_vec(rhs))
            .expect("system is positive definite");
        for i in 0..nd {
            assert!((got[i] - sol[i]).abs() < 1e-11, "node {i}");
        }
    }
}
