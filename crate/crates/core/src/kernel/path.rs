//! Piecewise-linear walker trajectories used by the analytic layer.

use super::{KernelError, Result};
use crate::geom::Vec2;

/// A path in R^dim sampled at strictly increasing times and interpolated
/// linearly in between.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    dim: usize,
    times: Vec<f64>,
    coords: Vec<f64>,
}

impl SampledPath {
    pub fn new(dim: usize, times: Vec<f64>, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(KernelError::InvalidInput(format!("path dimension {dim} out of range")));
        }
        if times.is_empty() {
            return Err(KernelError::InvalidInput("path needs at least one sample".into()));
        }
        if coords.len() != times.len() * dim {
            return Err(KernelError::InvalidInput(format!(
                "expected {} coordinates for {} samples, got {}",
                times.len() * dim,
                times.len(),
                coords.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KernelError::InvalidInput("sample times must strictly increase".into()));
        }
        if times.iter().chain(coords.iter()).any(|v| !v.is_finite()) {
            return Err(KernelError::InvalidInput("path contains non-finite values".into()));
        }
        Ok(SampledPath { dim, times, coords })
    }

    /// Path that stays at `point` over [0, duration].
    pub fn stationary(point: &[f64], duration: f64) -> Result<Self> {
        let mut coords = point.to_vec();
        coords.extend_from_slice(point);
        SampledPath::new(point.len(), vec![0.0, duration], coords)
    }

    pub fn from_points_2d(times: Vec<f64>, points: &[Vec2]) -> Result<Self> {
        let coords = points.iter().flat_map(|p| [p.x, p.y]).collect();
        SampledPath::new(2, times, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Linear interpolation at `t`, which must lie within the sampled range
    /// (callers check horizons; out of range is a caller bug).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim);
        assert!(
            t >= self.start_time() - 1e-12 && t <= self.end_time() + 1e-12,
            "time {t} outside sampled range [{}, {}]",
            self.start_time(),
            self.end_time()
        );
        if self.times.len() == 1 {
            out.copy_from_slice(self.point(0));
            return;
        }
        let idx = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            i if i >= self.times.len() => self.times.len() - 2,
            i => i - 1,
        };
        let t0 = self.times[idx];
        let t1 = self.times[idx + 1];
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = self.point(idx);
        let b = self.point(idx + 1);
        // return stored samples bit for bit at the ends of the segment
        if w == 0.0 {
            out.copy_from_slice(a);
        } else if w == 1.0 {
            out.copy_from_slice(b);
        } else {
            for k in 0..self.dim {
                out[k] = a[k] + w * (b[k] - a[k]);
            }
        }
    }

    pub fn eval_2d(&self, t: f64) -> Vec2 {
        debug_assert_eq!(self.dim, 2);
        let mut buf = [0.0; 2];
        self.eval(t, &mut buf);
        Vec2::new(buf[0], buf[1])
    }

    /// Appends one sample past the current end.
    pub fn push(&mut self, time: f64, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(KernelError::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        if !(time > self.end_time()) || !time.is_finite() {
            return Err(KernelError::InvalidInput(format!(
                "appended time {time} must exceed the path end {}",
                self.end_time()
            )));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::InvalidInput("path contains non-finite values".into()));
        }
        self.times.push(time);
        self.coords.extend_from_slice(point);
        Ok(())
    }

    /// Sup-norm distance to another path over the union of both sample grids.
    /// Piecewise-linear paths attain their maximum separation at breakpoints.
    pub fn sup_distance(&self, other: &SampledPath) -> f64 {
        assert_eq!(self.dim, other.dim);
        let lo = self.start_time().max(other.start_time());
        let hi = self.end_time().min(other.end_time());
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        let mut best = 0.0f64;
        for &t in self.times.iter().chain(other.times.iter()) {
            if t < lo || t > hi {
                continue;
            }
            self.eval(t, &mut a);
            other.eval(t, &mut b);
            let d2: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
            best = best.max(d2.sqrt());
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_linearly() {
        let path =
            SampledPath::new(2, vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 1.0, 0.0, 1.0, 2.0]).unwrap();
        let mut out = [0.0; 2];
        path.eval(0.5, &mut out);
        assert_eq!(out, [0.5, 0.0]);
        path.eval(1.5, &mut out);
        assert_eq!(out, [1.0, 1.0]);
        path.eval(2.0, &mut out);
        assert_eq!(out, [1.0, 2.0]);
    }

    #[test]
    fn rejects_malformed_paths() {
        assert!(SampledPath::new(2, vec![0.0, 0.0], vec![0.0; 4]).is_err());
        assert!(SampledPath::new(2, vec![0.0, 1.0], vec![0.0; 3]).is_err());
        assert!(SampledPath::new(2, vec![], vec![]).is_err());
        assert!(SampledPath::new(2, vec![0.0, 1.0], vec![f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn sup_distance_sees_breakpoints() {
        let a = SampledPath::new(1, vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]).unwrap();
        let b = SampledPath::new(1, vec![0.0, 1.0, 2.0], vec![0.0, 0.3, 0.0]).unwrap();
        assert!((a.sup_distance(&b) - 0.3).abs() < 1e-15);
    }
}
