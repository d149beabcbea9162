//! Model instances: the three-species coefficient family, the four
//! experiments, and the simulation loop coupling walkers to fields.
//!
//! Species order is fixed throughout: 0 attractive, 1 repulsive, 2 trigger.

use serde::{Deserialize, Serialize};

use crate::fem::{FieldSolver, FieldState, PeriodicGrid, SourceTerm, SpeciesParams};
use crate::geom::Vec2;
use crate::kernel::{KernelError, Result};
use crate::walker::{
    drift, euler_maruyama_step, proximity_step, ContactEvent, ProximityPolicy, RngStream, Walker,
    WalkerKind, LAYOUT_STREAM,
};

pub const ATTRACTIVE: usize = 0;
pub const REPULSIVE: usize = 1;
pub const TRIGGER: usize = 2;

/// One term of a coefficient function. The whole family is sums of these,
/// which keeps every coefficient bounded and Lipschitz in c for free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefTerm {
    Const { value: f64 },
    /// scale * arctan(conc_scale * c[species] + shift)
    ArctanConc { scale: f64, conc_scale: f64, species: usize, shift: f64 },
    /// scale * arctan(time_scale * t + shift)
    ArctanTime { scale: f64, time_scale: f64, shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefFn {
    pub terms: Vec<CoefTerm>,
}

impl CoefFn {
    pub fn zero() -> Self {
        CoefFn { terms: vec![] }
    }

    pub fn constant(value: f64) -> Self {
        CoefFn { terms: vec![CoefTerm::Const { value }] }
    }

    pub fn eval(&self, c: &[f64], t: f64) -> f64 {
        debug_assert!(c.iter().all(|v| v.is_finite()));
        self.terms
            .iter()
            .map(|term| match *term {
                CoefTerm::Const { value } => value,
                CoefTerm::ArctanConc { scale, conc_scale, species, shift } => {
                    scale * (conc_scale * c[species] + shift).atan()
                }
                CoefTerm::ArctanTime { scale, time_scale, shift } => {
                    scale * (time_scale * t + shift).atan()
                }
            })
            .sum()
    }

    /// Bounds over all finite arguments: arctan terms contribute an open
    /// interval of half-width |scale| * pi / 2 around zero.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for term in &self.terms {
            match *term {
                CoefTerm::Const { value } => {
                    lo += value;
                    hi += value;
                }
                CoefTerm::ArctanConc { scale, .. } | CoefTerm::ArctanTime { scale, .. } => {
                    let half = scale.abs() * std::f64::consts::FRAC_PI_2;
                    lo -= half;
                    hi += half;
                }
            }
        }
        (lo, hi)
    }
}

/// Emission and drift-weight functions for the three-species model. Soma
/// weights are identically zero and not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// Cone emission per species.
    pub cone_emission: Vec<CoefFn>,
    /// Soma emission per species.
    pub soma_emission: Vec<CoefFn>,
    /// Cone drift weight per species.
    pub cone_weight: Vec<CoefFn>,
}

impl CoefficientSpec {
    /// Base three-species scenario: cones emit attractive cue once triggered
    /// and trigger cue once attracted somewhere, somas emit the trigger
    /// response and a constant repulsive cue; cones are first pushed away,
    /// then pulled back as the weights switch sign around t = 1.3.
    pub fn baseline(beta: f64, gamma: f64) -> Self {
        use CoefTerm::*;
        let switch = |scale: f64| ArctanTime { scale, time_scale: 3.0, shift: -3.9 };
        CoefficientSpec {
            cone_emission: vec![
                CoefFn {
                    terms: vec![
                        ArctanConc { scale: 15.0, conc_scale: 2.25, species: TRIGGER, shift: -3.5 },
                        Const { value: 7.5 * std::f64::consts::PI },
                        ArctanTime { scale: 15.0, time_scale: 2.0, shift: 0.0 },
                    ],
                },
                CoefFn::zero(),
                CoefFn {
                    terms: vec![
                        ArctanConc { scale: 20.0, conc_scale: 2.25, species: ATTRACTIVE, shift: -3.0 },
                        Const { value: 7.5 * std::f64::consts::PI },
                        ArctanTime { scale: 15.0, time_scale: 2.0, shift: 0.0 },
                    ],
                },
            ],
            soma_emission: vec![
                CoefFn {
                    terms: vec![ArctanConc { scale: 5.0, conc_scale: 0.5, species: TRIGGER, shift: 0.0 }],
                },
                CoefFn::constant(3.0),
                CoefFn::zero(),
            ],
            cone_weight: vec![
                CoefFn { terms: vec![switch(beta / std::f64::consts::PI), Const { value: beta / 2.0 }] },
                CoefFn { terms: vec![switch(gamma / std::f64::consts::PI), Const { value: -gamma / 2.0 }] },
                CoefFn::zero(),
            ],
        }
    }

    /// First experiment's overrides: the cone attractive emission runs at a
    /// third of its base amplitude and somas emit more repellent.
    pub fn experiment_one(beta: f64, gamma: f64) -> Self {
        use CoefTerm::*;
        let mut spec = Self::baseline(beta, gamma);
        spec.cone_emission[ATTRACTIVE] = CoefFn {
            terms: vec![
                ArctanConc { scale: 5.0, conc_scale: 2.25, species: TRIGGER, shift: -3.5 },
                Const { value: 2.5 * std::f64::consts::PI },
                ArctanTime { scale: 5.0, time_scale: 2.0, shift: 0.0 },
            ],
        };
        spec.soma_emission[REPULSIVE] = CoefFn::constant(5.0);
        spec
    }

    pub fn species_count(&self) -> usize {
        self.cone_emission.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cone_emission.len();
        if n == 0 || self.soma_emission.len() != n || self.cone_weight.len() != n {
            return Err(KernelError::InvalidInput(
                "coefficient tables must cover every species".into(),
            ));
        }
        Ok(())
    }

    pub fn emission(&self, species: usize, kind: WalkerKind, c: &[f64], t: f64) -> f64 {
        match kind {
            WalkerKind::GrowthCone => self.cone_emission[species].eval(c, t),
            WalkerKind::Soma => self.soma_emission[species].eval(c, t),
        }
    }

    /// Soma weights are identically zero.
    pub fn weight(&self, kind: WalkerKind, species: usize, c: &[f64], t: f64) -> f64 {
        match kind {
            WalkerKind::GrowthCone => self.cone_weight[species].eval(c, t),
            WalkerKind::Soma => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Shared(f64),
    PerCone(Vec<f64>),
}

impl SigmaSpec {
    fn for_cone(&self, cone_index: usize) -> f64 {
        match self {
            SigmaSpec::Shared(s) => *s,
            SigmaSpec::PerCone(v) => v[cone_index],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum SomaLayout {
    Explicit { positions: Vec<[f64; 2]> },
    /// Cartesian product coords x coords, each soma shifted by a uniform
    /// draw from [-deviation, deviation]^2.
    GridWithDeviation { coords: Vec<f64>, deviation: f64 },
    Random { count: usize },
}

impl SomaLayout {
    pub fn soma_count(&self) -> usize {
        match self {
            SomaLayout::Explicit { positions } => positions.len(),
            SomaLayout::GridWithDeviation { coords, .. } => coords.len() * coords.len(),
            SomaLayout::Random { count } => *count,
        }
    }

    /// Resolves to concrete positions. Layout draws come from a dedicated
    /// stream so walker noise is independent of the layout family.
    pub fn resolve(&self, seed: u64, half_length: f64) -> Vec<Vec2> {
        let mut rng = RngStream::new(seed, LAYOUT_STREAM);
        match self {
            SomaLayout::Explicit { positions } => {
                positions.iter().map(|p| Vec2::new(p[0], p[1])).collect()
            }
            SomaLayout::GridWithDeviation { coords, deviation } => {
                let mut out = Vec::with_capacity(coords.len() * coords.len());
                for &y in coords {
                    for &x in coords {
                        let dx = rng.uniform_in(-deviation, *deviation);
                        let dy = rng.uniform_in(-deviation, *deviation);
                        out.push(Vec2::new(x + dx, y + dy));
                    }
                }
                out
            }
            SomaLayout::Random { count } => (0..*count)
                .map(|_| {
                    let x = rng.uniform_in(-half_length, half_length);
                    let y = rng.uniform_in(-half_length, half_length);
                    Vec2::new(x, y)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientChoice {
    Baseline,
    ExperimentOne,
    Custom { spec: CoefficientSpec },
}

fn default_true() -> bool {
    true
}

fn default_contact_threshold() -> f64 {
    0.1
}

/// Full description of one run. JSON schema version 1; unknown keys are
/// rejected so stale configs fail loudly instead of silently drifting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub half_length: f64,
    pub spacing: f64,
    pub dt: f64,
    pub horizon: f64,
    pub species: Vec<SpeciesParams>,
    pub epsilon: f64,
    pub sigma: SigmaSpec,
    pub beta: f64,
    pub gamma: f64,
    pub soma_layout: SomaLayout,
    pub cones_per_soma: usize,
    /// Activation times within one soma are 0, stagger, 2*stagger, ...
    #[serde(default)]
    pub activation_stagger: f64,
    pub seed: u64,
    #[serde(default = "CoefficientChoice::default_choice")]
    pub coefficients: CoefficientChoice,
    #[serde(default)]
    pub literal_noise: bool,
    #[serde(default = "default_contact_threshold")]
    pub contact_threshold: f64,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_true")]
    pub record_trajectories: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl CoefficientChoice {
    fn default_choice() -> Self {
        CoefficientChoice::Baseline
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(KernelError::InvalidInput(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("epsilon", self.epsilon),
            ("half_length", self.half_length),
            ("spacing", self.spacing),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(KernelError::InvalidInput(format!("{name} must be positive")));
            }
        }
        if !self.beta.is_finite() || !self.gamma.is_finite() {
            return Err(KernelError::InvalidInput("beta and gamma must be finite".into()));
        }
        if self.species.is_empty() {
            return Err(KernelError::InvalidInput("need at least one species".into()));
        }
        for sp in &self.species {
            if !(sp.diffusion > 0.0) || !(sp.decay > 0.0) {
                return Err(KernelError::InvalidInput(
                    "species parameters must be positive".into(),
                ));
            }
        }
        let spec = self.coefficient_spec();
        spec.validate()?;
        if spec.species_count() != self.species.len() {
            return Err(KernelError::InvalidInput(
                "coefficient tables and species table disagree".into(),
            ));
        }
        if self.cones_per_soma == 0 {
            return Err(KernelError::InvalidInput("need at least one cone per soma".into()));
        }
        let total_cones = self.soma_layout.soma_count() * self.cones_per_soma;
        if let SigmaSpec::PerCone(v) = &self.sigma {
            if v.len() != total_cones {
                return Err(KernelError::InvalidInput(format!(
                    "per-cone sigma list has {} entries for {} cones",
                    v.len(),
                    total_cones
                )));
            }
        }
        match &self.sigma {
            SigmaSpec::Shared(s) if !(*s >= 0.0 && s.is_finite()) => {
                return Err(KernelError::InvalidInput("sigma must be nonnegative".into()));
            }
            SigmaSpec::PerCone(v) if v.iter().any(|s| !(*s >= 0.0 && s.is_finite())) => {
                return Err(KernelError::InvalidInput("sigma must be nonnegative".into()));
            }
            _ => {}
        }
        if let SomaLayout::Explicit { positions } = &self.soma_layout {
            for p in positions {
                if p[0].abs() > self.half_length || p[1].abs() > self.half_length {
                    return Err(KernelError::InvalidInput(format!(
                        "soma ({}, {}) lies outside the domain",
                        p[0], p[1]
                    )));
                }
            }
        }
        if !(self.contact_threshold > 0.0) {
            return Err(KernelError::InvalidInput("contact threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn coefficient_spec(&self) -> CoefficientSpec {
        match &self.coefficients {
            CoefficientChoice::Baseline => CoefficientSpec::baseline(self.beta, self.gamma),
            CoefficientChoice::ExperimentOne => {
                CoefficientSpec::experiment_one(self.beta, self.gamma)
            }
            CoefficientChoice::Custom { spec } => spec.clone(),
        }
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Somas first (ids 0..S), then the cones of soma 0, soma 1, ...; cone
    /// ids double as RNG stream ids, so this order is part of the contract.
    pub fn build_walkers(&self) -> Result<Vec<Walker>> {
        let somas = self.soma_layout.resolve(self.seed, self.half_length);
        for p in &somas {
            if p.x.abs() > self.half_length || p.y.abs() > self.half_length {
                return Err(KernelError::InvalidInput(format!(
                    "resolved soma ({}, {}) lies outside the domain",
                    p.x, p.y
                )));
            }
        }
        let mut walkers: Vec<Walker> = somas
            .iter()
            .enumerate()
            .map(|(i, p)| Walker::soma(i, *p))
            .collect();
        let soma_count = somas.len();
        for s in 0..soma_count {
            for k in 0..self.cones_per_soma {
                let cone_index = s * self.cones_per_soma + k;
                let id = soma_count + cone_index;
                walkers.push(Walker::growth_cone(
                    id,
                    somas[s],
                    s,
                    self.sigma.for_cone(cone_index),
                    k as f64 * self.activation_stagger,
                ));
            }
        }
        Ok(walkers)
    }
}

/// Partial overrides applied on top of an experiment's defaults.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOverrides {
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub cones_per_soma: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

/// The four published experiments with their defaults.
///
/// Per-species transport rates: the attractive cue spreads fast so a cone is
/// not pinned by the steep near field of its own trail, the repulsive cue
/// stays concentrated around the soma to drive the early dispersal, and the
/// trigger sits in between. With all three at (1, 1) the self-emitted
/// attractant gradient outweighs the soma repellent from the start and every
/// cone stalls in place.
pub fn build_experiment(which: u32, overrides: &ExperimentOverrides, seed: u64) -> Result<ScenarioConfig> {
    let species = vec![
        SpeciesParams { diffusion: 4.0, decay: 1.0 },
        SpeciesParams { diffusion: 0.25, decay: 0.5 },
        SpeciesParams { diffusion: 1.0, decay: 1.0 },
    ];
    let mut config = ScenarioConfig {
        version: 1,
        half_length: 3.0,
        spacing: 0.05,
        dt: 1e-3,
        horizon: 5.0,
        species,
        epsilon: 0.01,
        sigma: SigmaSpec::Shared(0.2),
        beta: 15.0,
        gamma: 10.0,
        soma_layout: SomaLayout::Explicit { positions: vec![] },
        cones_per_soma: 1,
        activation_stagger: 0.0,
        seed,
        coefficients: CoefficientChoice::Baseline,
        literal_noise: false,
        contact_threshold: 0.1,
        snapshot_every: None,
        record_trajectories: true,
        output_dir: None,
    };
    match which {
        1 => {
            config.soma_layout = SomaLayout::GridWithDeviation {
                coords: vec![-2.0, 0.0, 2.0],
                deviation: 0.3,
            };
            config.cones_per_soma = 3;
            config.activation_stagger = 0.8;
            config.coefficients = CoefficientChoice::ExperimentOne;
        }
        2 => {
            config.soma_layout = SomaLayout::Random { count: 6 };
            config.epsilon = 0.1;
        }
        3 => {
            config.soma_layout = SomaLayout::Explicit {
                positions: vec![[-1.2, 0.0], [1.2, 0.0]],
            };
            config.sigma = SigmaSpec::Shared(0.1);
            config.epsilon = 0.02;
        }
        4 => {
            config.soma_layout = SomaLayout::Explicit {
                positions: vec![[-1.5, -1.5], [1.5, -1.5], [-1.5, 1.5], [1.5, 1.5]],
            };
        }
        other => {
            return Err(KernelError::InvalidInput(format!(
                "experiment id must be 1..=4, got {other}"
            )));
        }
    }
    if let Some(s) = overrides.sigma {
        config.sigma = SigmaSpec::Shared(s);
    }
    if let Some(e) = overrides.epsilon {
        config.epsilon = e;
    }
    if let Some(b) = overrides.beta {
        config.beta = b;
    }
    if let Some(g) = overrides.gamma {
        config.gamma = g;
    }
    if let Some(c) = overrides.cones_per_soma {
        config.cones_per_soma = c;
    }
    if let Some(t) = overrides.horizon {
        config.horizon = t;
    }
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub step: usize,
    pub time: f64,
    pub walker: usize,
    pub kind: WalkerKind,
    pub position: Vec2,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub step: usize,
    pub time: f64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSummary {
    pub walker: usize,
    pub path_length: f64,
    pub net_displacement: f64,
    pub active_at_end: bool,
    pub connection: Option<ContactEvent>,
}

impl ConeSummary {
    pub fn tortuosity(&self) -> Option<f64> {
        (self.net_displacement > 0.0).then(|| self.path_length / self.net_displacement)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub soma_count: usize,
    pub cone_count: usize,
    pub final_active_cones: usize,
    pub connection_count: usize,
    pub cones: Vec<ConeSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub config: ScenarioConfig,
    pub walkers: Vec<Walker>,
    pub trajectory: Vec<TrajectorySample>,
    pub contacts: Vec<ContactEvent>,
    pub snapshots: Vec<FieldSnapshot>,
    pub final_state: FieldState,
    pub summary: RunSummary,
}

/// Advances the coupled system to the horizon.
///
/// Per step: move every walker with the fields frozen at the old time, apply
/// contact inactivation at the new positions, then assemble sources at the
/// new positions (concentration arguments still from the old field) and take
/// one implicit Euler step per species.
pub fn run_simulation(config: &ScenarioConfig) -> Result<RunArtifact> {
    config.validate()?;
    let spec = config.coefficient_spec();
    let grid = PeriodicGrid::new(config.half_length, config.spacing)?;
    let solver = FieldSolver::new(grid, &config.species, config.epsilon, config.dt)?;
    let mut walkers = config.build_walkers()?;
    let mut streams: Vec<RngStream> = walkers
        .iter()
        .map(|w| RngStream::new(config.seed, w.id as u64))
        .collect();
    let mut state = solver.zero_state();
    let policy = ProximityPolicy { threshold: config.contact_threshold };
    let steps = config.step_count();
    let ns = config.species.len();

    let mut trajectory = Vec::new();
    let record = |trajectory: &mut Vec<TrajectorySample>, step: usize, time: f64, ws: &[Walker]| {
        if !config.record_trajectories {
            return;
        }
        for w in ws {
            trajectory.push(TrajectorySample {
                step,
                time,
                walker: w.id,
                kind: w.kind,
                position: w.position,
                active: w.active,
            });
        }
    };
    let mut snapshots = Vec::new();
    let snap = |snapshots: &mut Vec<FieldSnapshot>, step: usize, st: &FieldState| {
        if let Some(every) = config.snapshot_every {
            if every > 0 && step % every == 0 {
                snapshots.push(FieldSnapshot {
                    step,
                    time: st.time,
                    values: st.values.clone(),
                });
            }
        }
    };

    record(&mut trajectory, 0, 0.0, &walkers);
    snap(&mut snapshots, 0, &state);

    let mut contacts: Vec<ContactEvent> = Vec::new();
    let mut path_length = vec![0.0f64; walkers.len()];
    let mut net = vec![Vec2::ZERO; walkers.len()];

    for step in 0..steps {
        let t = step as f64 * config.dt;
        let t_next = (step + 1) as f64 * config.dt;

        let displacements = euler_maruyama_step(
            &mut walkers,
            &mut streams,
            t,
            config.dt,
            config.half_length,
            config.literal_noise,
            |w| {
                let c = solver.eval_all(&state, w.position);
                let mut weights = Vec::with_capacity(ns);
                let mut grads = Vec::with_capacity(ns);
                for k in 0..ns {
                    weights.push(spec.weight(w.kind, k, &c, t));
                    grads.push(solver.eval_gradient(&state, k, w.position));
                }
                drift(&weights, &grads)
            },
        );
        for (i, d) in displacements.iter().enumerate() {
            path_length[i] += d.norm();
            net[i] = net[i] + *d;
        }

        proximity_step(&mut walkers, t_next, &policy, config.half_length, &mut contacts);

        let sources: Vec<SourceTerm> = walkers
            .iter()
            .filter(|w| w.is_emitting(t_next))
            .map(|w| {
                let c = solver.eval_all(&state, w.position);
                SourceTerm {
                    position: w.position,
                    amplitudes: (0..ns)
                        .map(|i| spec.emission(i, w.kind, &c, t_next))
                        .collect(),
                }
            })
            .collect();
        solver.step(&mut state, &sources)?;

        record(&mut trajectory, step + 1, t_next, &walkers);
        snap(&mut snapshots, step + 1, &state);
    }

    let soma_count = config.soma_layout.soma_count();
    let cones: Vec<ConeSummary> = walkers
        .iter()
        .filter(|w| w.kind == WalkerKind::GrowthCone)
        .map(|w| ConeSummary {
            walker: w.id,
            path_length: path_length[w.id],
            net_displacement: net[w.id].norm(),
            active_at_end: w.active,
            connection: contacts
                .iter()
                .find(|e| e.first == w.id || e.second == w.id)
                .copied(),
        })
        .collect();
    let summary = RunSummary {
        soma_count,
        cone_count: cones.len(),
        final_active_cones: cones.iter().filter(|c| c.active_at_end).count(),
        connection_count: contacts.len(),
        cones,
    };
    Ok(RunArtifact {
        config: config.clone(),
        walkers,
        trajectory,
        contacts,
        snapshots,
        final_state: state,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tiny_config() -> ScenarioConfig {
        ScenarioConfig {
            version: 1,
            half_length: 3.0,
            spacing: 0.5,
            dt: 0.01,
            horizon: 0.05,
            species: vec![SpeciesParams { diffusion: 1.0, decay: 1.0 }; 3],
            epsilon: 0.05,
            sigma: SigmaSpec::Shared(0.2),
            beta: 15.0,
            gamma: 10.0,
            soma_layout: SomaLayout::Explicit { positions: vec![[-1.0, 0.0], [1.0, 0.0]] },
            cones_per_soma: 1,
            activation_stagger: 0.0,
            seed: 42,
            coefficients: CoefficientChoice::Baseline,
            literal_noise: false,
            contact_threshold: 0.1,
            snapshot_every: None,
            record_trajectories: true,
            output_dir: None,
        }
    }

    #[test]
    fn baseline_coefficient_values_match_hand_evaluation() {
        let spec = CoefficientSpec::baseline(15.0, 10.0);
        let c = [0.0, 0.0, 0.0];
        let a_attr = spec.emission(ATTRACTIVE, WalkerKind::GrowthCone, &c, 0.0);
        let expect = 15.0 * (-3.5f64).atan() + 7.5 * PI;
        assert!((a_attr - expect).abs() < 1e-12);
        assert!((expect - 4.1745).abs() < 1e-4);

        assert_eq!(spec.emission(REPULSIVE, WalkerKind::Soma, &c, 3.7), 3.0);
        assert_eq!(spec.emission(REPULSIVE, WalkerKind::GrowthCone, &[5.0, 5.0, 5.0], 2.0), 0.0);
        assert_eq!(spec.emission(TRIGGER, WalkerKind::Soma, &c, 1.0), 0.0);
        // soma trigger response vanishes without trigger agent
        assert_eq!(spec.emission(ATTRACTIVE, WalkerKind::Soma, &c, 1.0), 0.0);
    }

    #[test]
    fn weights_switch_around_the_advertised_time() {
        let spec = CoefficientSpec::baseline(15.0, 10.0);
        let c = [0.0; 3];
        let b1 = |t: f64| spec.weight(WalkerKind::GrowthCone, ATTRACTIVE, &c, t);
        let b2 = |t: f64| spec.weight(WalkerKind::GrowthCone, REPULSIVE, &c, t);
        assert!((b1(1.3) - 7.5).abs() < 1e-13, "attractive weight is beta/2 at the switch");
        assert!((b2(1.3) + 5.0).abs() < 1e-13);
        assert!((b1(1e9) - 15.0).abs() < 1e-7, "late-time limit is beta");
        assert!(b2(1e9).abs() < 1e-7);
        // direct formula at t = 0: arctan(-3.9) pushes both weights to
        // their early extremes
        let atan39 = (3.9f64).atan();
        assert!((b1(0.0) - (7.5 - 15.0 / PI * atan39)).abs() < 1e-12, "got {}", b1(0.0));
        assert!((b2(0.0) - (-5.0 - 10.0 / PI * atan39)).abs() < 1e-12, "got {}", b2(0.0));
        assert!((b1(0.0) - 1.19845).abs() < 1e-5);
        assert!(b1(0.0) < b1(5.0) && b2(0.0) < b2(5.0), "weights rise in time");
        // somas never drift
        assert_eq!(spec.weight(WalkerKind::Soma, ATTRACTIVE, &c, 2.0), 0.0);
    }

    #[test]
    fn evaluations_stay_in_the_analytic_range() {
        let spec = CoefficientSpec::baseline(15.0, 10.0);
        let mut rng = RngStream::new(5, 0);
        let all: Vec<(&CoefFn, &str)> = spec
            .cone_emission
            .iter()
            .map(|f| (f, "cone emission"))
            .chain(spec.soma_emission.iter().map(|f| (f, "soma emission")))
            .chain(spec.cone_weight.iter().map(|f| (f, "cone weight")))
            .collect();
        for (f, label) in all {
            let (lo, hi) = f.range();
            for _ in 0..200 {
                let c = [
                    rng.uniform_in(0.0, 40.0),
                    rng.uniform_in(0.0, 40.0),
                    rng.uniform_in(0.0, 40.0),
                ];
                let t = rng.uniform_in(0.0, 5.0);
                let v = f.eval(&c, t);
                assert!(v >= lo && v <= hi, "{label}: {v} outside [{lo}, {hi}]");
            }
        }
        let (lo, hi) = spec.cone_weight[ATTRACTIVE].range();
        assert!((lo - 0.0).abs() < 1e-12 && (hi - 15.0).abs() < 1e-12);
        let (lo, hi) = spec.cone_weight[REPULSIVE].range();
        assert!((lo + 10.0).abs() < 1e-12 && (hi - 0.0).abs() < 1e-12);
    }

    #[test]
    fn experiment_one_rescales_only_the_advertised_terms() {
        let base = CoefficientSpec::baseline(15.0, 10.0);
        let one = CoefficientSpec::experiment_one(15.0, 10.0);
        let c = [0.3, 0.1, 1.8];
        let t = 0.7;
        let b = base.emission(ATTRACTIVE, WalkerKind::GrowthCone, &c, t);
        let o = one.emission(ATTRACTIVE, WalkerKind::GrowthCone, &c, t);
        assert!((o - b / 3.0).abs() < 1e-12, "attractive emission scales by 1/3");
        assert_eq!(one.emission(REPULSIVE, WalkerKind::Soma, &c, t), 5.0);
        assert_eq!(
            base.emission(TRIGGER, WalkerKind::GrowthCone, &c, t),
            one.emission(TRIGGER, WalkerKind::GrowthCone, &c, t)
        );
    }

    #[test]
    fn experiment_builders_apply_published_defaults() {
        let e1 = build_experiment(1, &ExperimentOverrides::default(), 7).unwrap();
        assert_eq!(e1.soma_layout.soma_count(), 9);
        assert_eq!(e1.cones_per_soma, 3);
        assert_eq!(e1.activation_stagger, 0.8);
        assert_eq!(e1.epsilon, 0.01);
        assert_eq!(e1.sigma, SigmaSpec::Shared(0.2));
        let somas = e1.soma_layout.resolve(e1.seed, e1.half_length);
        assert_eq!(somas.len(), 9);
        for (i, s) in somas.iter().enumerate() {
            let gx = [-2.0, 0.0, 2.0][i % 3];
            let gy = [-2.0, 0.0, 2.0][i / 3];
            assert!((s.x - gx).abs() <= 0.3 && (s.y - gy).abs() <= 0.3);
            assert!(
                (s.x, s.y) != (gx, gy),
                "deviation draw must actually move the soma"
            );
        }
        let again = e1.soma_layout.resolve(e1.seed, e1.half_length);
        assert_eq!(somas, again, "layout must be a pure function of the seed");

        let e3 = build_experiment(
            3,
            &ExperimentOverrides { epsilon: Some(0.02), ..Default::default() },
            7,
        )
        .unwrap();
        assert_eq!(e3.sigma, SigmaSpec::Shared(0.1));
        assert_eq!(e3.dt, 1e-3);
        assert_eq!(e3.half_length, 3.0);
        assert_eq!(e3.epsilon, 0.02);
        assert_eq!(e3.soma_layout.soma_count(), 2);

        assert!(build_experiment(5, &ExperimentOverrides::default(), 7).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut config = build_experiment(2, &ExperimentOverrides::default(), 13).unwrap();
        config.snapshot_every = Some(100);
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);

        let mut broken: serde_json::Value = serde_json::from_str(&text).unwrap();
        broken["no_such_key"] = 1.into();
        assert!(serde_json::from_value::<ScenarioConfig>(broken).is_err());

        let mut old = config.clone();
        old.version = 2;
        assert!(old.validate().is_err());
    }

    #[test]
    fn walker_construction_orders_ids_and_staggers_activation() {
        let mut config = tiny_config();
        config.cones_per_soma = 2;
        config.activation_stagger = 0.8;
        config.sigma = SigmaSpec::PerCone(vec![0.1, 0.2, 0.3, 0.4]);
        let walkers = config.build_walkers().unwrap();
        assert_eq!(walkers.len(), 6);
        for (i, w) in walkers.iter().enumerate() {
            assert_eq!(w.id, i);
        }
        assert_eq!(walkers[0].kind, WalkerKind::Soma);
        assert_eq!(walkers[2].kind, WalkerKind::GrowthCone);
        assert_eq!(walkers[2].origin, Some(0));
        assert_eq!(walkers[3].origin, Some(0));
        assert_eq!(walkers[4].origin, Some(1));
        assert_eq!(walkers[2].activation_time, 0.0);
        assert_eq!(walkers[3].activation_time, 0.8);
        assert_eq!(walkers[3].sigma, 0.2);
        assert_eq!(walkers[5].sigma, 0.4);
        assert_eq!(walkers[2].position, walkers[0].position, "cones spawn on their soma");
    }

    #[test]
    fn zero_coefficients_and_zero_noise_freeze_everything() {
        let mut config = tiny_config();
        config.sigma = SigmaSpec::Shared(0.0);
        let zero = CoefFn::zero();
        config.coefficients = CoefficientChoice::Custom {
            spec: CoefficientSpec {
                cone_emission: vec![zero.clone(), zero.clone(), zero.clone()],
                soma_emission: vec![zero.clone(), zero.clone(), zero.clone()],
                cone_weight: vec![zero.clone(), zero.clone(), zero.clone()],
            },
        };
        let artifact = run_simulation(&config).unwrap();
        for w in &artifact.walkers {
            let start = config.build_walkers().unwrap()[w.id].position;
            assert_eq!(w.position, start);
        }
        for sp in &artifact.final_state.values {
            assert!(sp.iter().all(|v| *v == 0.0));
        }
        assert!(artifact.contacts.is_empty(), "somas are 2 apart, cones graced");
    }

    #[test]
    fn simulation_is_deterministic() {
        let config = tiny_config();
        let a = run_simulation(&config).unwrap();
        let b = run_simulation(&config).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.contacts, b.contacts);
        assert_eq!(a.final_state.values, b.final_state.values);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn loop_matches_a_hand_rolled_replication() {
        // replicate the documented interleaving step by step and demand
        // bitwise agreement
        let mut config = tiny_config();
        config.horizon = 0.03;
        let artifact = run_simulation(&config).unwrap();

        let spec = config.coefficient_spec();
        let grid = PeriodicGrid::new(config.half_length, config.spacing).unwrap();
        let solver = FieldSolver::new(grid, &config.species, config.epsilon, config.dt).unwrap();
        let mut walkers = config.build_walkers().unwrap();
        let mut streams: Vec<RngStream> = walkers
            .iter()
            .map(|w| RngStream::new(config.seed, w.id as u64))
            .collect();
        let mut state = solver.zero_state();
        let policy = ProximityPolicy { threshold: config.contact_threshold };
        let mut contacts = Vec::new();
        for step in 0..3usize {
            let t = step as f64 * config.dt;
            let t_next = (step + 1) as f64 * config.dt;
            euler_maruyama_step(
                &mut walkers,
                &mut streams,
                t,
                config.dt,
                config.half_length,
                false,
                |w| {
                    let c = solver.eval_all(&state, w.position);
                    let mut weights = Vec::new();
                    let mut grads = Vec::new();
                    for k in 0..3 {
                        weights.push(spec.weight(w.kind, k, &c, t));
                        grads.push(solver.eval_gradient(&state, k, w.position));
                    }
                    drift(&weights, &grads)
                },
            );
            proximity_step(&mut walkers, t_next, &policy, config.half_length, &mut contacts);
            let sources: Vec<SourceTerm> = walkers
                .iter()
                .filter(|w| w.is_emitting(t_next))
                .map(|w| {
                    let c = solver.eval_all(&state, w.position);
                    SourceTerm {
                        position: w.position,
                        amplitudes: (0..3)
                            .map(|i| spec.emission(i, w.kind, &c, t_next))
                            .collect(),
                    }
                })
                .collect();
            solver.step(&mut state, &sources).unwrap();
        }
        for (a, b) in artifact.walkers.iter().zip(&walkers) {
            assert_eq!(a.position, b.position);
        }
        assert_eq!(artifact.final_state.values, state.values);
    }

    #[test]
    fn summary_tracks_paths_and_connections() {
        let mut config = tiny_config();
        // park the somas close; their cones meet quickly
        config.soma_layout = SomaLayout::Explicit { positions: vec![[-0.2, 0.0], [0.2, 0.0]] };
        config.horizon = 0.5;
        config.sigma = SigmaSpec::Shared(0.3);
        config.seed = 11;
        let artifact = run_simulation(&config).unwrap();
        assert_eq!(artifact.summary.cone_count, 2);
        for cone in &artifact.summary.cones {
            if cone.path_length > 0.0 {
                assert!(cone.path_length >= cone.net_displacement - 1e-12);
                if let Some(tort) = cone.tortuosity() {
                    assert!(tort >= 1.0 - 1e-12);
                }
            }
            assert_eq!(cone.active_at_end, cone.connection.is_none());
        }
        assert_eq!(
            artifact.summary.final_active_cones,
            artifact.summary.cone_count
                - artifact
                    .summary
                    .cones
                    .iter()
                    .filter(|c| c.connection.is_some())
                    .count()
        );
    }

    #[test]
    fn snapshots_follow_the_configured_cadence() {
        let mut config = tiny_config();
        config.snapshot_every = Some(2);
        config.horizon = 0.05;
        let artifact = run_simulation(&config).unwrap();
        let steps: Vec<usize> = artifact.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 2, 4]);
        assert_eq!(artifact.snapshots[1].values.len(), 3);
    }

    #[test]
    fn trajectories_can_be_switched_off() {
        let mut config = tiny_config();
        config.record_trajectories = false;
        let artifact = run_simulation(&config).unwrap();
        assert!(artifact.trajectory.is_empty());
        assert_eq!(artifact.summary.cone_count, 2);
    }
}
