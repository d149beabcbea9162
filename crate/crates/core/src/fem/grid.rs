//! Uniform periodic triangulation of the square (-L, L)^2.
//!
//! The square is cut into n x n cells of side `spacing`, each split along the
//! main diagonal (lower-left to upper-right). Node (ix, iy) sits at
//! (-L + ix*spacing, -L + iy*spacing) and carries id iy*n + ix; the right and
//! top boundaries wrap back onto column and row zero. Cell (cx, cy) owns
//! elements 2*(cy*n + cx) for the lower triangle and +1 for the upper one.

use crate::geom::{wrap_point, Vec2};
use crate::kernel::{KernelError, Result};

#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    half_length: f64,
    spacing: f64,
    nodes_per_side: usize,
}

/// One triangle with unwrapped vertex coordinates, so geometry near the seam
/// stays contiguous even though the node ids wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub element: usize,
    pub nodes: [usize; 3],
    pub vertices: [Vec2; 3],
}

/// Result of point location: the owning element and barycentric weights.
#[derive(Debug, Clone, Copy)]
pub struct Located {
    pub geometry: ElementGeometry,
    pub barycentric: [f64; 3],
}

impl PeriodicGrid {
    pub fn new(half_length: f64, spacing: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) || !(spacing > 0.0 && spacing.is_finite())
        {
            return Err(KernelError::InvalidInput(
                "grid needs positive finite half length and spacing".into(),
            ));
        }
        let ratio = 2.0 * half_length / spacing;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(KernelError::InvalidInput(format!(
                "spacing {spacing} does not divide the period {}",
                2.0 * half_length
            )));
        }
        let n = n as usize;
        if n < 3 {
            return Err(KernelError::InvalidInput(
                "grid needs at least three cells per side".into(),
            ));
        }
        Ok(PeriodicGrid { half_length, spacing, nodes_per_side: n })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side * self.nodes_per_side
    }

    pub fn element_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn node_id(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nodes_per_side && iy < self.nodes_per_side);
        iy * self.nodes_per_side + ix
    }

    pub fn node_position(&self, id: usize) -> Vec2 {
        let n = self.nodes_per_side;
        let ix = id % n;
        let iy = id / n;
        Vec2::new(
            -self.half_length + ix as f64 * self.spacing,
            -self.half_length + iy as f64 * self.spacing,
        )
    }

    fn wrap_cell(&self, i: i64) -> usize {
        let n = self.nodes_per_side as i64;
        i.rem_euclid(n) as usize
    }

    /// Vertex node ids for element `e`: lower triangles list
    /// (v00, v10, v11), upper ones (v00, v11, v01).
    pub fn element_nodes(&self, e: usize) -> [usize; 3] {
        let n = self.nodes_per_side;
        debug_assert!(e < self.element_count());
        let cell = e / 2;
        let upper = e % 2 == 1;
        let cx = cell % n;
        let cy = cell / n;
        let xp = (cx + 1) % n;
        let yp = (cy + 1) % n;
        let v00 = self.node_id(cx, cy);
        let v10 = self.node_id(xp, cy);
        let v11 = self.node_id(xp, yp);
        let v01 = self.node_id(cx, yp);
        if upper {
            [v00, v11, v01]
        } else {
            [v00, v10, v11]
        }
    }

    /// Unwrapped vertex coordinates anchored at the cell's lower-left corner.
    pub fn element_geometry(&self, e: usize) -> ElementGeometry {
        let n = self.nodes_per_side;
        let cell = e / 2;
        let upper = e % 2 == 1;
        let cx = (cell % n) as f64;
        let cy = (cell / n) as f64;
        let h = self.spacing;
        let x0 = -self.half_length + cx * h;
        let y0 = -self.half_length + cy * h;
        let p00 = Vec2::new(x0, y0);
        let p10 = Vec2::new(x0 + h, y0);
        let p11 = Vec2::new(x0 + h, y0 + h);
        let p01 = Vec2::new(x0, y0 + h);
        let vertices = if upper { [p00, p11, p01] } else { [p00, p10, p11] };
        ElementGeometry { element: e, nodes: self.element_nodes(e), vertices }
    }

    /// Wraps the point into the fundamental square and returns the containing
    /// element with barycentric weights. Points on shared edges belong to
    /// every adjacent element; the one with the smallest element index wins,
    /// including across the periodic seam.
    pub fn locate(&self, point: Vec2) -> Located {
        let n = self.nodes_per_side as i64;
        let p = wrap_point(point, self.half_length);
        let fx = (p.x + self.half_length) / self.spacing;
        let fy = (p.y + self.half_length) / self.spacing;
        let cx = (fx.floor() as i64).clamp(0, n - 1);
        let cy = (fy.floor() as i64).clamp(0, n - 1);
        let xi = fx - cx as f64;
        let eta = fy - cy as f64;

        let mut cand_cells: Vec<(i64, i64)> = vec![(cx, cy)];
        if xi == 0.0 {
            cand_cells.push((cx - 1, cy));
        }
        if eta == 0.0 {
            cand_cells.push((cx, cy - 1));
        }
        if xi == 0.0 && eta == 0.0 {
            cand_cells.push((cx - 1, cy - 1));
        }

        let mut best: Option<(usize, [f64; 3])> = None;
        for (ax, ay) in cand_cells {
            let wx = self.wrap_cell(ax);
            let wy = self.wrap_cell(ay);
            // local coordinates relative to this candidate cell
            let lx = xi + (cx - ax) as f64;
            let ly = eta + (cy - ay) as f64;
            if !(0.0..=1.0).contains(&lx) || !(0.0..=1.0).contains(&ly) {
                continue;
            }
            let cell_id = wy as usize * self.nodes_per_side + wx as usize;
            for upper in [false, true] {
                let inside = if upper { ly >= lx } else { ly <= lx };
                if !inside {
                    continue;
                }
                let e = 2 * cell_id + upper as usize;
                let bary = if upper {
                    [1.0 - ly, lx, ly - lx]
                } else {
                    [1.0 - lx, lx - ly, ly]
                };
                match best {
                    Some((eb, _)) if eb <= e => {}
                    _ => best = Some((e, bary)),
                }
            }
        }
        let (e, barycentric) = best.expect("point always lies in some element");
        Located { geometry: self.element_geometry(e), barycentric }
    }
}

/// Barycentric gradients of the three hat functions on a triangle.
pub fn shape_gradients(vertices: &[Vec2; 3]) -> [Vec2; 3] {
    let [a, b, c] = *vertices;
    let two_area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let rot = |v: Vec2| Vec2::new(-v.y, v.x);
    [
        rot(c - b) * (1.0 / two_area),
        rot(a - c) * (1.0 / two_area),
        rot(b - a) * (1.0 / two_area),
    ]
}

pub fn triangle_area(vertices: &[Vec2; 3]) -> f64 {
    let [a, b, c] = *vertices;
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
}
