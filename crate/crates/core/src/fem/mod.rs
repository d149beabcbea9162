//! Periodic P1 finite element solver for the cue fields.
//!
//! One reaction-diffusion equation per species on the torus (-L, L)^2,
//! discretized with piecewise linear elements on a uniform triangulation and
//! stepped with backward Euler. Sources are mollified walker positions
//! entering through the load vector.

mod assemble;
mod grid;
mod solver;
mod sparse;

pub use assemble::{
    assemble_laplacian, assemble_mass, assemble_source, assemble_stiffness, SourceAssembler,
    SourceStencil,
};
pub use grid::{shape_gradients, triangle_area, ElementGeometry, Located, PeriodicGrid};
pub use solver::ImplicitEulerSolver;
pub use sparse::Csr;

use std::sync::Arc;

use crate::geom::Vec2;
use crate::kernel::{KernelError, Result};

/// Diffusivity and decay rate of one species. Both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpeciesParams {
    pub diffusion: f64,
    pub decay: f64,
}

/// Nodal concentrations for all species at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub time: f64,
    pub values: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn zero(species: usize, nodes: usize) -> Self {
        FieldState { time: 0.0, values: vec![vec![0.0; nodes]; species] }
    }

    pub fn species_count(&self) -> usize {
        self.values.len()
    }
}

/// One walker's contribution to the loads: a position shared by all species
/// and one amplitude per species.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    pub position: Vec2,
    pub amplitudes: Vec<f64>,
}

/// Everything needed to advance the coupled fields: factored solvers per
/// species plus the shared source machinery.
pub struct FieldSolver {
    grid: PeriodicGrid,
    mass: Arc<Csr>,
    assembler: SourceAssembler,
    solvers: Vec<ImplicitEulerSolver>,
    dt: f64,
}

impl FieldSolver {
    pub fn new(
        grid: PeriodicGrid,
        species: &[SpeciesParams],
        epsilon: f64,
        dt: f64,
    ) -> Result<Self> {
        if species.is_empty() {
            return Err(KernelError::InvalidInput("need at least one species".into()));
        }
        let mass = Arc::new(assemble_mass(&grid));
        let assembler = SourceAssembler::new(&grid, epsilon)?;
        let mut solvers = Vec::with_capacity(species.len());
        for sp in species {
            let b = assemble_stiffness(&grid, sp.diffusion, sp.decay)?;
            solvers.push(ImplicitEulerSolver::new(&grid, mass.clone(), &b, dt)?);
        }
        Ok(FieldSolver { grid, mass, assembler, solvers, dt })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn species_count(&self) -> usize {
        self.solvers.len()
    }

    pub fn mass(&self) -> &Csr {
        &self.mass
    }

    pub fn zero_state(&self) -> FieldState {
        FieldState::zero(self.solvers.len(), self.grid.node_count())
    }

    /// Integral of one species over the square.
    pub fn total_mass(&self, state: &FieldState, species: usize) -> f64 {
        self.mass.matvec_alloc(&state.values[species]).iter().sum()
    }

    /// Advances all species by one implicit Euler step. Each source's
    /// geometric stencil is assembled once and scaled per species.
    pub fn step(&self, state: &mut FieldState, sources: &[SourceTerm]) -> Result<()> {
        let nodes = self.grid.node_count();
        let ns = self.solvers.len();
        let mut loads = vec![vec![0.0f64; nodes]; ns];
        for src in sources {
            if src.amplitudes.len() != ns {
                return Err(KernelError::InvalidInput(
                    "source needs one amplitude per species".into(),
                ));
            }
            if src.amplitudes.iter().all(|a| *a == 0.0) {
                continue;
            }
            let stencil = self.assembler.stencil(&self.grid, src.position);
            for (i, &amp) in src.amplitudes.iter().enumerate() {
                if amp == 0.0 {
                    continue;
                }
                for &(node, v) in &stencil.entries {
                    loads[i][node] += amp * v;
                }
            }
        }
        for (i, solver) in self.solvers.iter().enumerate() {
            state.values[i] = solver.step(&state.values[i], &loads[i])?;
        }
        state.time += self.dt;
        Ok(())
    }

    pub fn eval(&self, state: &FieldState, species: usize, point: Vec2) -> f64 {
        eval_field(&self.grid, &state.values[species], point)
    }

    pub fn eval_gradient(&self, state: &FieldState, species: usize, point: Vec2) -> Vec2 {
        eval_field_gradient(&self.grid, &state.values[species], point)
    }

    /// Concentrations of every species at one point.
    pub fn eval_all(&self, state: &FieldState, point: Vec2) -> Vec<f64> {
        state
            .values
            .iter()
            .map(|v| eval_field(&self.grid, v, point))
            .collect()
    }
}

/// Piecewise linear interpolation of nodal values.
pub fn eval_field(grid: &PeriodicGrid, nodal: &[f64], point: Vec2) -> f64 {
    assert_eq!(nodal.len(), grid.node_count());
    let loc = grid.locate(point);
    (0..3)
        .map(|i| loc.barycentric[i] * nodal[loc.geometry.nodes[i]])
        .sum()
}

/// Gradient of the interpolant, constant on each element. Points on shared
/// edges use the element chosen by the location tie-break.
pub fn eval_field_gradient(grid: &PeriodicGrid, nodal: &[f64], point: Vec2) -> Vec2 {
    assert_eq!(nodal.len(), grid.node_count());
    let loc = grid.locate(point);
    let grads = shape_gradients(&loc.geometry.vertices);
    let mut g = Vec2::ZERO;
    for i in 0..3 {
        g = g + grads[i] * nodal[loc.geometry.nodes[i]];
    }
    g
}
