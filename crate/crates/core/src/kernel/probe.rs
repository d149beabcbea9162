//! Empirical Lipschitz stability of the solved fields in walker paths and
//! evaluation points.

use super::picard::{picard_solve, PicardProblem};
use super::{KernelError, Result, SampledPath};

#[derive(Clone, Copy, Debug)]
pub struct LipschitzSample {
    /// Sup-norm distance between the two path sets.
    pub delta: f64,
    /// Euclidean distance between the two evaluation points.
    pub point_sep: f64,
    pub value_ratio: f64,
    pub grad_ratio: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LipschitzStats {
    pub samples: Vec<LipschitzSample>,
    pub max_value_ratio: f64,
    pub max_grad_ratio: f64,
}

/// Solves the self-consistent problem for each path set of each pair and
/// records the difference quotients
///
/// ```text
/// |u(x, t; xi) - u(xbar, t; xibar)| / (|x - xbar| + sup_s |xi - xibar|)
/// ```
///
/// over all species, along with the same quotient for the field gradients.
/// A bounded quotient across perturbation scales is the stability evidence
/// the continuity analysis predicts.
pub fn lipschitz_probe(
    problem: &PicardProblem,
    path_pairs: &[(Vec<SampledPath>, Vec<SampledPath>)],
    point_pairs: &[(Vec<f64>, Vec<f64>)],
    t: f64,
) -> Result<LipschitzStats> {
    if path_pairs.is_empty() || point_pairs.is_empty() {
        return Err(KernelError::InvalidInput("need at least one path and point pair".into()));
    }
    if !(t > 0.0 && t <= problem.horizon) {
        return Err(KernelError::InvalidInput(format!(
            "probe time {t} outside (0, {}]",
            problem.horizon
        )));
    }
    let mut stats = LipschitzStats::default();
    for (paths_a, paths_b) in path_pairs {
        if paths_a.len() != paths_b.len() {
            return Err(KernelError::InvalidInput("path sets differ in walker count".into()));
        }
        let delta = paths_a
            .iter()
            .zip(paths_b)
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0f64, f64::max);
        let sol_a = picard_solve(problem, paths_a)?;
        let sol_b = picard_solve(problem, paths_b)?;
        for (x, xbar) in point_pairs {
            let point_sep: f64 =
                x.iter().zip(xbar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let denom = point_sep + delta;
            if denom == 0.0 {
                return Err(KernelError::InvalidInput(
                    "identical paths and identical points give a zero denominator".into(),
                ));
            }
            let mut value_ratio = 0.0f64;
            let mut grad_ratio = 0.0f64;
            for i in 0..problem.species.len() {
                let va = sol_a.eval(i, x, t)?;
                let vb = sol_b.eval(i, xbar, t)?;
                value_ratio = value_ratio.max((va - vb).abs() / denom);
                let ga = sol_a.grad(i, x, t)?;
                let gb = sol_b.grad(i, xbar, t)?;
                let gd: f64 =
                    ga.iter().zip(&gb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                grad_ratio = grad_ratio.max(gd / denom);
            }
            stats.samples.push(LipschitzSample { delta, point_sep, value_ratio, grad_ratio });
            stats.max_value_ratio = stats.max_value_ratio.max(value_ratio);
            stats.max_grad_ratio = stats.max_grad_ratio.max(grad_ratio);
        }
    }
    Ok(stats)
}
