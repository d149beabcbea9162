//! Walker dynamics: somas, growth cones, their noise streams and contacts.
//!
//! Every walker owns one counter-mode RNG stream and consumes exactly one
//! normal pair per step, moving or not. Trajectories therefore stay
//! bit-identical for a given (seed, walker id) pair no matter how many other
//! walkers exist or when they stop.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::geom::{minimal_image, wrap_point, Vec2};

/// Stream id reserved for initial-layout draws so walker streams are never
/// perturbed by how a scenario places its somas.
pub const LAYOUT_STREAM: u64 = u64::MAX;

pub struct RngStream {
    rng: ChaCha8Rng,
    words: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { rng, words: 0 }
    }

    fn word(&mut self) -> u64 {
        self.words += 1;
        self.rng.next_u64()
    }

    /// Uniform on (0, 1], open at zero so the Box-Muller log is safe.
    fn unit_open_zero(&mut self) -> f64 {
        ((self.word() >> 11) + 1) as f64 * 2f64.powi(-53)
    }

    /// Uniform on [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.word() >> 11) as f64 * 2f64.powi(-53)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Independent standard normal pair (Box-Muller). Exactly two words.
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.unit_open_zero();
        let u2 = self.unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn words_consumed(&self) -> u64 {
        self.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkerKind {
    Soma,
    GrowthCone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Walker {
    pub id: usize,
    pub kind: WalkerKind,
    pub position: Vec2,
    /// Walker id of the soma this cone grew from.
    pub origin: Option<usize>,
    pub sigma: f64,
    pub activation_time: f64,
    pub active: bool,
    pub has_exited_origin: bool,
}

impl Walker {
    pub fn soma(id: usize, position: Vec2) -> Self {
        Walker {
            id,
            kind: WalkerKind::Soma,
            position,
            origin: None,
            sigma: 0.0,
            activation_time: 0.0,
            active: true,
            has_exited_origin: true,
        }
    }

    pub fn growth_cone(
        id: usize,
        position: Vec2,
        origin: usize,
        sigma: f64,
        activation_time: f64,
    ) -> Self {
        Walker {
            id,
            kind: WalkerKind::GrowthCone,
            position,
            origin: Some(origin),
            sigma,
            activation_time,
            active: true,
            has_exited_origin: false,
        }
    }

    /// Cones move once activated and until they connect. Somas never move.
    pub fn is_moving(&self, t: f64) -> bool {
        self.kind == WalkerKind::GrowthCone && self.active && t >= self.activation_time
    }

    /// Somas emit always; cones only while moving.
    pub fn is_emitting(&self, t: f64) -> bool {
        match self.kind {
            WalkerKind::Soma => true,
            WalkerKind::GrowthCone => self.active && t >= self.activation_time,
        }
    }
}

/// Drift of one cone: sum over species of b_k times the field gradient.
pub fn drift(weights: &[f64], gradients: &[Vec2]) -> Vec2 {
    assert_eq!(weights.len(), gradients.len());
    let mut v = Vec2::ZERO;
    for (w, g) in weights.iter().zip(gradients) {
        v = v + *g * *w;
    }
    v
}

/// One Euler-Maruyama step over every walker. Streams advance in lockstep;
/// only activated, still-active growth cones move. Returns the displacement
/// of each walker in slice order (unwrapped, for path-length bookkeeping).
pub fn euler_maruyama_step<F>(
    walkers: &mut [Walker],
    streams: &mut [RngStream],
    t: f64,
    dt: f64,
    half_length: f64,
    literal_noise: bool,
    mut drift_of: F,
) -> Vec<Vec2>
where
    F: FnMut(&Walker) -> Vec2,
{
    assert_eq!(walkers.len(), streams.len());
    assert!(dt > 0.0);
    let noise_scale = if literal_noise { 1.0 } else { dt.sqrt() };
    let mut displacements = vec![Vec2::ZERO; walkers.len()];
    for (idx, (w, s)) in walkers.iter_mut().zip(streams.iter_mut()).enumerate() {
        let (z0, z1) = s.standard_normal_pair();
        if !w.is_moving(t) {
            continue;
        }
        let mu = drift_of(w);
        let step = mu * dt + Vec2::new(z0, z1) * (w.sigma * noise_scale);
        displacements[idx] = step;
        w.position = wrap_point(w.position + step, half_length);
    }
    displacements
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    ConeCone,
    ConeSoma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time: f64,
    /// Lower walker id of the pair.
    pub first: usize,
    pub second: usize,
    pub kind: ContactKind,
}

#[derive(Debug, Clone, Copy)]
pub struct ProximityPolicy {
    pub threshold: f64,
}

impl Default for ProximityPolicy {
    fn default() -> Self {
        ProximityPolicy { threshold: 0.1 }
    }
}

/// Contact detection and inactivation.
///
/// Exit flags update first: a cone that has put more than the threshold
/// between itself and its origin soma is allowed to wire back to it later.
/// Contacts then use the activity snapshot taken at entry, distances are
/// minimal-image, and pairs are scanned in ascending id order. A contact
/// stops every snapshot-active cone in the pair; already-inactive cones and
/// somas still act as targets. Cones before their activation time take no
/// part at all.
pub fn proximity_step(
    walkers: &mut [Walker],
    t: f64,
    policy: &ProximityPolicy,
    half_length: f64,
    events: &mut Vec<ContactEvent>,
) {
    let n = walkers.len();
    for i in 0..n {
        debug_assert_eq!(walkers[i].id, i, "walker ids must index the slice");
    }

    for i in 0..n {
        if walkers[i].kind != WalkerKind::GrowthCone || walkers[i].has_exited_origin {
            continue;
        }
        let origin = walkers[i].origin.expect("cones record their origin");
        let d = minimal_image(walkers[i].position, walkers[origin].position, half_length).norm();
        if d > policy.threshold {
            walkers[i].has_exited_origin = true;
        }
    }

    let snapshot: Vec<bool> = walkers.iter().map(|w| w.active).collect();
    let is_cone: Vec<bool> = walkers.iter().map(|w| w.kind == WalkerKind::GrowthCone).collect();
    let cone_active = |k: usize| is_cone[k] && snapshot[k];
    let participates = |w: &Walker| match w.kind {
        WalkerKind::Soma => true,
        WalkerKind::GrowthCone => t >= w.activation_time,
    };

    for i in 0..n {
        if !participates(&walkers[i]) {
            continue;
        }
        for j in (i + 1)..n {
            if !participates(&walkers[j]) {
                continue;
            }
            let (wi, wj) = (&walkers[i], &walkers[j]);
            if wi.kind == WalkerKind::Soma && wj.kind == WalkerKind::Soma {
                continue;
            }
            // at least one snapshot-active cone must be involved
            if !cone_active(i) && !cone_active(j) {
                continue;
            }
            // origin grace: a cone that never left its soma cannot connect to it
            let graced = |cone: &Walker, other: &Walker| {
                cone.kind == WalkerKind::GrowthCone
                    && other.kind == WalkerKind::Soma
                    && cone.origin == Some(other.id)
                    && !cone.has_exited_origin
            };
            if graced(wi, wj) || graced(wj, wi) {
                continue;
            }
            let d = minimal_image(wi.position, wj.position, half_length).norm();
            if d >= policy.threshold {
                continue;
            }
            let kind = if wi.kind == WalkerKind::GrowthCone && wj.kind == WalkerKind::GrowthCone {
                ContactKind::ConeCone
            } else {
                ContactKind::ConeSoma
            };
            events.push(ContactEvent { time: t, first: i, second: j, kind });
            if cone_active(i) {
                walkers[i].active = false;
            }
            if cone_active(j) {
                walkers[j].active = false;
            }
        }
    }
}
