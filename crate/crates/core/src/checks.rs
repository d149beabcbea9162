//! Fast runtime self-checks behind the `validate` subcommand: oracle
//! identities and invariants that catch a miscompiled or corrupted build
//! without pulling in the full test suite.

use std::sync::Arc;

use crate::fem::{
    assemble_laplacian, assemble_mass, Csr, ImplicitEulerSolver, PeriodicGrid, SourceAssembler,
};
use crate::geom::Vec2;
use crate::kernel::{heat_kernel_eval, heat_kernel_grad, KernelParams};
use crate::limit::asymptotic_speed;
use crate::quad::{nodes_1d, QuadScheme};
use crate::walker::RngStream;

pub type Check = (&'static str, fn() -> Result<(), String>);

fn tensor_nodes(halfwidth: f64, n: usize) -> Vec<(f64, f64)> {
    nodes_1d(QuadScheme::GaussLegendre, n, -halfwidth, halfwidth)
}

fn kernel_mass() -> Result<(), String> {
    let p = KernelParams::new(0.7, 0.4, 2).map_err(|e| e.to_string())?;
    let t = 1.0f64;
    let nodes = tensor_nodes(8.0 * (4.0 * 0.7 * t).sqrt(), 96);
    let mut total = 0.0;
    for &(x, wx) in &nodes {
        for &(y, wy) in &nodes {
            total += wx * wy * heat_kernel_eval(&p, &[x, y], t).map_err(|e| e.to_string())?;
        }
    }
    let target = (-0.4f64 * t).exp();
    let err = (total - target).abs();
    if err < 1e-8 {
        Ok(())
    } else {
        Err(format!("kernel mass {total} vs {target}, error {err:.3e}"))
    }
}

fn kernel_semigroup() -> Result<(), String> {
    let p = KernelParams::new(1.0, 0.5, 2).map_err(|e| e.to_string())?;
    let (s, t) = (0.4, 1.0);
    let x = [0.3, -0.2];
    let nodes = tensor_nodes(8.0 * (4.0f64).sqrt(), 96);
    let mut conv = 0.0;
    for &(y0, w0) in &nodes {
        for &(y1, w1) in &nodes {
            let a = heat_kernel_eval(&p, &[y0, y1], s).map_err(|e| e.to_string())?;
            let b = heat_kernel_eval(&p, &[x[0] - y0, x[1] - y1], t - s)
                .map_err(|e| e.to_string())?;
            conv += w0 * w1 * a * b;
        }
    }
    let direct = heat_kernel_eval(&p, &x, t).map_err(|e| e.to_string())?;
    let rel = (conv - direct).abs() / direct;
    if rel < 1e-6 {
        Ok(())
    } else {
        Err(format!("semigroup convolution {conv} vs {direct}, relative {rel:.3e}"))
    }
}

fn kernel_gradient_fd() -> Result<(), String> {
    let p = KernelParams::new(1.3, 0.2, 2).map_err(|e| e.to_string())?;
    let t = 0.7;
    let h = 1e-5;
    for point in [[0.4, -0.1], [-0.8, 0.6], [0.05, 0.02]] {
        let grad = heat_kernel_grad(&p, &point, t).map_err(|e| e.to_string())?;
        for axis in 0..2 {
            let mut hi = point;
            let mut lo = point;
            hi[axis] += h;
            lo[axis] -= h;
            let fd = (heat_kernel_eval(&p, &hi, t).map_err(|e| e.to_string())?
                - heat_kernel_eval(&p, &lo, t).map_err(|e| e.to_string())?)
                / (2.0 * h);
            let scale = grad[axis].abs().max(1e-6);
            let rel = (grad[axis] - fd).abs() / scale;
            if rel > 1e-6 {
                return Err(format!(
                    "gradient at {point:?} axis {axis}: analytic {} vs fd {fd}, relative {rel:.3e}",
                    grad[axis]
                ));
            }
        }
    }
    Ok(())
}

fn source_stencil_mass() -> Result<(), String> {
    let grid = PeriodicGrid::new(3.0, 0.05).map_err(|e| e.to_string())?;
    let assembler = SourceAssembler::new(&grid, 0.01).map_err(|e| e.to_string())?;
    let stencil = assembler.stencil(&grid, Vec2::new(0.137, -0.271));
    let err = (stencil.total_mass() - 1.0).abs();
    if err < 1e-6 {
        Ok(())
    } else {
        Err(format!("mollified source mass {} off by {err:.3e}", stencil.total_mass()))
    }
}

fn discrete_mass_conservation() -> Result<(), String> {
    let grid = PeriodicGrid::new(1.5, 0.25).map_err(|e| e.to_string())?;
    let mass = Arc::new(assemble_mass(&grid));
    let laplacian = assemble_laplacian(&grid);
    let zero = Csr::from_triplets(grid.node_count(), vec![]);
    let b = zero.add_scaled(&laplacian, 1.7);
    let solver =
        ImplicitEulerSolver::new(&grid, mass.clone(), &b, 0.05).map_err(|e| e.to_string())?;
    let mut q: Vec<f64> =
        (0..grid.node_count()).map(|i| ((i * 2654435761) % 89) as f64 / 89.0).collect();
    let total = |q: &[f64]| -> f64 { mass.matvec_alloc(q).iter().sum() };
    let before = total(&q);
    let f = vec![0.0; grid.node_count()];
    for _ in 0..20 {
        q = solver.step(&q, &f).map_err(|e| e.to_string())?;
    }
    let drift = (total(&q) - before).abs();
    if drift < 1e-12 * before.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("decay-free mass drifted by {drift:.3e}"))
    }
}

fn rng_reproducibility() -> Result<(), String> {
    let mut a = RngStream::new(7, 3);
    let mut b = RngStream::new(7, 3);
    let mut c = RngStream::new(7, 4);
    let mut diverged = false;
    for _ in 0..100 {
        let (ax, ay) = a.standard_normal_pair();
        let (bx, by) = b.standard_normal_pair();
        let (cx, _) = c.standard_normal_pair();
        if ax.to_bits() != bx.to_bits() || ay.to_bits() != by.to_bits() {
            return Err("identical seeds produced different draws".into());
        }
        diverged |= ax.to_bits() != cx.to_bits();
    }
    if diverged {
        Ok(())
    } else {
        Err("different streams produced identical draws".into())
    }
}

fn noise_variance() -> Result<(), String> {
    let sigma = 0.2f64;
    let dt = 1e-3f64;
    let scale = sigma * dt.sqrt();
    let mut rng = RngStream::new(99, 0);
    let n = 100_000usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let (z0, z1) = rng.standard_normal_pair();
        for z in [z0 * scale, z1 * scale] {
            sum += z;
            sum_sq += z * z;
        }
    }
    let m = 2.0 * n as f64;
    let var = sum_sq / m - (sum / m) * (sum / m);
    let target = sigma * sigma * dt;
    let rel = (var - target).abs() / target;
    if rel < 0.05 {
        Ok(())
    } else {
        Err(format!("increment variance {var:.3e} vs {target:.3e}, relative {rel:.3}"))
    }
}

fn speed_fixed_point() -> Result<(), String> {
    let free = asymptotic_speed(0.05, 0.0, 1.0, 1e-12).map_err(|e| e.to_string())?;
    if free.v_eps != 1.0 {
        return Err(format!("zero amplitude must return the forcing, got {}", free.v_eps));
    }
    let r = asymptotic_speed(0.05, 1.0, 1.0, 1e-10).map_err(|e| e.to_string())?;
    if !(r.v_eps > 0.0 && r.v_eps <= 1.0) {
        return Err(format!("speed {} escaped (0, u]", r.v_eps));
    }
    if r.residual >= 1e-10 {
        return Err(format!("fixed point residual {:.3e} above tolerance", r.residual));
    }
    Ok(())
}

/// The suite, in dependency order. Each entry is independent and fast; the
/// whole list stays under a few seconds.
pub fn all() -> Vec<Check> {
    vec![
        ("kernel mass decays as exp(-lambda t)", kernel_mass),
        ("kernel semigroup convolution identity", kernel_semigroup),
        ("kernel gradient matches finite differences", kernel_gradient_fd),
        ("mollified source stencil has unit mass", source_stencil_mass),
        ("decay-free field conserves discrete mass", discrete_mass_conservation),
        ("rng streams reproduce and separate", rng_reproducibility),
        ("noise increment variance matches sigma^2 dt", noise_variance),
        ("asymptotic speed fixed point is bracketed", speed_fixed_point),
    ]
}
