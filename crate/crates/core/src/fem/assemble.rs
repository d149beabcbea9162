//! Galerkin assembly on the periodic triangulation.

use std::f64::consts::PI;

use super::grid::{shape_gradients, triangle_area, PeriodicGrid};
use super::sparse::Csr;
use crate::geom::Vec2;
use crate::kernel::{KernelError, Result};
use crate::quad::TRIANGLE_7;

/// Consistent mass matrix: local block A/12 * (1 + delta_ij).
pub fn assemble_mass(grid: &PeriodicGrid) -> Csr {
    let mut triplets = Vec::with_capacity(grid.element_count() * 9);
    for e in 0..grid.element_count() {
        let geo = grid.element_geometry(e);
        let a = triangle_area(&geo.vertices);
        for i in 0..3 {
            for j in 0..3 {
                let v = a / 12.0 * if i == j { 2.0 } else { 1.0 };
                triplets.push((geo.nodes[i], geo.nodes[j], v));
            }
        }
    }
    Csr::from_triplets(grid.node_count(), triplets)
}

/// Pure Laplacian stiffness (diffusion 1, no decay). Zero entries are kept so
/// the pattern matches the mass matrix.
pub fn assemble_laplacian(grid: &PeriodicGrid) -> Csr {
    let mut triplets = Vec::with_capacity(grid.element_count() * 9);
    for e in 0..grid.element_count() {
        let geo = grid.element_geometry(e);
        let a = triangle_area(&geo.vertices);
        let g = shape_gradients(&geo.vertices);
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((geo.nodes[i], geo.nodes[j], a * g[i].dot(g[j])));
            }
        }
    }
    Csr::from_triplets(grid.node_count(), triplets)
}

/// Reaction-diffusion bilinear form D*K + lambda*M for one species.
pub fn assemble_stiffness(grid: &PeriodicGrid, diffusion: f64, decay: f64) -> Result<Csr> {
    if !(diffusion > 0.0 && diffusion.is_finite()) || !(decay > 0.0 && decay.is_finite()) {
        return Err(KernelError::InvalidInput(
            "species needs positive diffusion and decay".into(),
        ));
    }
    let k = assemble_laplacian(grid);
    let m = assemble_mass(grid);
    let mut scaled = Csr::from_triplets(grid.node_count(), vec![]);
    scaled = scaled.add_scaled(&k, diffusion);
    Ok(scaled.add_scaled(&m, decay))
}

/// Quadrature point of the reference cell, precomputed once per source
/// assembly: position offset inside the cell plus the weighted parent hat
/// values (quadrature weight x sub-triangle area folded in).
struct CellPoint {
    upper: bool,
    offset: Vec2,
    weighted_hats: [f64; 3],
}

fn parent_hats(upper: bool, p: Vec2, h: f64) -> [f64; 3] {
    let (x, y) = (p.x / h, p.y / h);
    if upper {
        [1.0 - y, x, y - x]
    } else {
        [1.0 - x, x - y, y]
    }
}

fn subdivide(tri: [Vec2; 3], levels: u32, out: &mut Vec<[Vec2; 3]>) {
    if levels == 0 {
        out.push(tri);
        return;
    }
    let [a, b, c] = tri;
    let ab = (a + b) * 0.5;
    let bc = (b + c) * 0.5;
    let ca = (c + a) * 0.5;
    for t in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
        subdivide(t, levels - 1, out);
    }
}

fn reference_points(h: f64, levels: u32) -> Vec<CellPoint> {
    let lower = [Vec2::new(0.0, 0.0), Vec2::new(h, 0.0), Vec2::new(h, h)];
    let upper = [Vec2::new(0.0, 0.0), Vec2::new(h, h), Vec2::new(0.0, h)];
    let mut points = Vec::new();
    for (is_upper, parent) in [(false, lower), (true, upper)] {
        let mut subs = Vec::new();
        subdivide(parent, levels, &mut subs);
        for sub in subs {
            let area = triangle_area(&sub);
            for &(bary, w) in TRIANGLE_7.iter() {
                let p = sub[0] * bary[0] + sub[1] * bary[1] + sub[2] * bary[2];
                let hats = parent_hats(is_upper, p, h);
                points.push(CellPoint {
                    upper: is_upper,
                    offset: p,
                    weighted_hats: [
                        w * area * hats[0],
                        w * area * hats[1],
                        w * area * hats[2],
                    ],
                });
            }
        }
    }
    points
}

/// Geometric load of one mollified unit source: node ids with the integrals
/// of eta_eps(x - source) against their hat functions. Entries may repeat a
/// node (periodic corner overlap); callers accumulate, so that is harmless.
pub struct SourceStencil {
    pub entries: Vec<(usize, f64)>,
}

impl SourceStencil {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }
}

/// Shared precomputation for many stencils on the same grid and width.
pub struct SourceAssembler {
    points: Vec<CellPoint>,
    cutoff: f64,
    epsilon: f64,
}

impl SourceAssembler {
    pub fn new(grid: &PeriodicGrid, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(KernelError::InvalidInput("mollifier width must be positive".into()));
        }
        let h = grid.spacing();
        // refine until sub-cell diagonals resolve the mollifier's std dev
        let sigma = (2.0 * epsilon).sqrt();
        let mut levels = 0u32;
        while levels < 5 && std::f64::consts::SQRT_2 * h / f64::from(1 << levels) > 0.5 * sigma {
            levels += 1;
        }
        // tail mass of the Gaussian beyond r is exp(-r^2/(4 eps))
        let cutoff = (4.0 * epsilon * (1e12f64).ln()).sqrt();
        Ok(SourceAssembler { points: reference_points(h, levels), cutoff, epsilon })
    }

    pub fn stencil(&self, grid: &PeriodicGrid, source: Vec2) -> SourceStencil {
        let n = grid.nodes_per_side() as i64;
        let h = grid.spacing();
        let l = grid.half_length();
        let period = 2.0 * l;
        let norm = 1.0 / (4.0 * PI * self.epsilon);
        let inv4e = 1.0 / (4.0 * self.epsilon);
        let mut entries = Vec::new();

        // contributions from at most one wrap in each direction
        for wy in -1..=1i64 {
            for wx in -1..=1i64 {
                let c = Vec2::new(
                    source.x + wx as f64 * period,
                    source.y + wy as f64 * period,
                );
                let lo_x = ((c.x - self.cutoff + l) / h).floor() as i64;
                let hi_x = ((c.x + self.cutoff + l) / h).floor() as i64;
                let lo_y = ((c.y - self.cutoff + l) / h).floor() as i64;
                let hi_y = ((c.y + self.cutoff + l) / h).floor() as i64;
                let (lo_x, hi_x) = (lo_x.max(0), hi_x.min(n - 1));
                let (lo_y, hi_y) = (lo_y.max(0), hi_y.min(n - 1));
                if lo_x > hi_x || lo_y > hi_y {
                    continue;
                }
                let np = self.points.len();
                // separable Gaussian factors per cell row/column and point
                let mut ex = vec![0.0f64; (hi_x - lo_x + 1) as usize * np];
                for cx in lo_x..=hi_x {
                    let x0 = -l + cx as f64 * h;
                    for (q, pt) in self.points.iter().enumerate() {
                        let d = x0 + pt.offset.x - c.x;
                        ex[(cx - lo_x) as usize * np + q] = (-d * d * inv4e).exp();
                    }
                }
                let mut ey = vec![0.0f64; (hi_y - lo_y + 1) as usize * np];
                for cy in lo_y..=hi_y {
                    let y0 = -l + cy as f64 * h;
                    for (q, pt) in self.points.iter().enumerate() {
                        let d = y0 + pt.offset.y - c.y;
                        ey[(cy - lo_y) as usize * np + q] = (-d * d * inv4e).exp();
                    }
                }

                let w = (hi_x - lo_x + 1) as usize;
                let ht = (hi_y - lo_y + 1) as usize;
                let mut patch = vec![0.0f64; (w + 1) * (ht + 1)];
                for cy in 0..ht {
                    for cx in 0..w {
                        let mut acc = [0.0f64; 4]; // v00, v10, v11, v01
                        for (q, pt) in self.points.iter().enumerate() {
                            let gauss = ex[cx * np + q] * ey[cy * np + q];
                            let wh = &pt.weighted_hats;
                            if pt.upper {
                                acc[0] += gauss * wh[0];
                                acc[2] += gauss * wh[1];
                                acc[3] += gauss * wh[2];
                            } else {
                                acc[0] += gauss * wh[0];
                                acc[1] += gauss * wh[1];
                                acc[2] += gauss * wh[2];
                            }
                        }
                        let base = cy * (w + 1) + cx;
                        patch[base] += acc[0];
                        patch[base + 1] += acc[1];
                        patch[base + w + 2] += acc[2];
                        patch[base + w + 1] += acc[3];
                    }
                }
                for py in 0..=ht {
                    for px in 0..=w {
                        let v = patch[py * (w + 1) + px];
                        if v == 0.0 {
                            continue;
                        }
                        let gx = ((lo_x + px as i64) % n) as usize;
                        let gy = ((lo_y + py as i64) % n) as usize;
                        entries.push((grid.node_id(gx, gy), norm * v));
                    }
                }
            }
        }
        SourceStencil { entries }
    }
}

/// Load vector for one species: f[node] = sum over sources of
/// amplitude * integral of eta against the hat function.
pub fn assemble_source(
    grid: &PeriodicGrid,
    epsilon: f64,
    sources: &[(Vec2, f64)],
) -> Result<Vec<f64>> {
    let assembler = SourceAssembler::new(grid, epsilon)?;
    let mut f = vec![0.0; grid.node_count()];
    for &(pos, amp) in sources {
        for &(node, v) in &assembler.stencil(grid, pos).entries {
            f[node] += amp * v;
        }
    }
    Ok(f)
}
