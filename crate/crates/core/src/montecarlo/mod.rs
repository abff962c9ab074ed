//! Monte-Carlo bounds: the primal value of an adapted policy (a lower bound)
//! and the martingale-map dual (an upper bound), on common random paths.
//!
//! Paths are independent work units evaluated in parallel; results are
//! collected by path index and reduced sequentially, so estimates do not
//! depend on scheduling.

mod maps;
mod paths;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use maps::{MapInputs, MapRegistry, MartingaleMap, OptimalMap, ZeroMap};
pub use paths::{sample_path, PathSample};

use crate::error::{Error, Result};
use crate::marginal::{marginal_left, marginal_predictable, MarginalSurface};
use crate::model::LatticeModel;
use crate::policy::{DpArgmax, PolicyRule, PolicyTable};
use crate::rng::GENERATOR;
use crate::solver::ValueSurface;
use crate::verify::{bspde_residual, chain_rule_check, GridInfo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Sample mean and standard error (`n - 1` denominator), summed in order.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::TooFewPaths(n));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
        })
    }
}

/// Reward and exercised cells of `policy` along one path, from `level`.
pub fn policy_path_value(
    model: &LatticeModel,
    policy: &PolicyTable,
    dy: f64,
    path: &PathSample,
    level: usize,
) -> Result<(f64, usize)> {
    let mut j = level;
    let mut reward = 0.0;
    for i in 0..model.step_count() {
        let k = path.nodes[i];
        if policy.exercises(i, k, j) {
            if j == 0 {
                return Err(Error::InfeasibleControl { step: i, node: k });
            }
            reward += dy * model.payoff(i, k);
            j -= 1;
        }
    }
    Ok((reward, level - j))
}

/// Unbiased estimate of `policy`'s value from the root at level `level`.
pub fn simulate_primal(
    model: &LatticeModel,
    policy: &PolicyTable,
    dy: f64,
    level: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_paths < 2 {
        return Err(Error::TooFewPaths(n_paths));
    }
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| policy_path_value(model, policy, dy, &sample_path(model, seed, p), level).map(|(r, _)| r))
        .collect::<Result<Vec<f64>>>()?;
    Estimate::from_samples(&samples)
}

/// Pathwise maximum over grid volume trajectories of
/// `sum u dt X - (M(T, u) - M(0, u))`, by DP over (step, level) along the path.
pub fn inner_maximum(
    inputs: &MapInputs<'_>,
    map: &dyn MartingaleMap,
    path: &PathSample,
    level: usize,
) -> f64 {
    let model = inputs.model;
    let dy = inputs.surface.volume().dy();
    let n = model.step_count();
    let mut next = vec![0.0; level + 1];
    let mut current = vec![0.0; level + 1];
    let mut hold = vec![0.0; level + 1];
    let mut exercise = vec![0.0; level + 1];
    for i in (0..n).rev() {
        // Levels below `level - i` cannot be reached by step `i`.
        let lo = level.saturating_sub(i);
        let (k, m) = (path.nodes[i], path.nodes[i + 1]);
        let reward = dy * model.payoff(i, k);
        map.increments(inputs, i, k, m, lo, level, &mut hold, &mut exercise);
        for j in lo..=level {
            let keep = next[j] - hold[j - lo];
            current[j] = if j >= 1 {
                let take = reward + next[j - 1] - exercise[j - lo];
                if take >= keep {
                    take
                } else {
                    keep
                }
            } else {
                keep
            };
        }
        std::mem::swap(&mut next, &mut current);
    }
    next[level]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub map: String,
    /// Largest per-path inner maximum.
    pub max_path: f64,
}

pub fn dual_bound(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    level: usize,
    n_paths: usize,
    seed: u64,
    map: &dyn MartingaleMap,
) -> Result<DualEstimate> {
    surface.check_model(model)?;
    if n_paths < 2 {
        return Err(Error::TooFewPaths(n_paths));
    }
    if level > surface.volume().levels() {
        return Err(Error::param("y0", "below the deepest volume level"));
    }
    let inputs = MapInputs { model, surface, marginal };
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| inner_maximum(&inputs, map, &sample_path(model, seed, p), level))
        .collect();
    let est = Estimate::from_samples(&samples)?;
    Ok(DualEstimate {
        mean: est.mean,
        stderr: est.stderr,
        map: map.name().to_string(),
        max_path: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub bspde_left_max: f64,
    pub bspde_predictable_max: f64,
    pub chain_rule_policy_max: f64,
}

/// Output of [`price`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub primal: Estimate,
    pub dual: DualEstimate,
    /// `dual.mean - primal.mean`.
    pub gap: f64,
    /// Lattice value `J(0, root, y0)`.
    pub value: f64,
    pub y0: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub generator: String,
    pub grid: GridInfo,
    pub model: serde_json::Value,
    pub residuals: ResidualSummary,
}

impl DualReport {
    pub fn combined_stderr(&self) -> f64 {
        self.primal.stderr.hypot(self.dual.stderr)
    }
}

/// Solve-to-bounds pipeline on an already solved surface: DP policy, primal
/// estimate and optimal-map dual on common paths.
pub fn price(
    model: &LatticeModel,
    surface: &ValueSurface,
    y0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<DualReport> {
    surface.check_model(model)?;
    let volume = *surface.volume();
    let level = volume
        .level_of(y0)
        .ok_or_else(|| Error::param("y0", format!("{y0} is not a volume level of the grid")))?;
    if n_paths < 2 {
        return Err(Error::TooFewPaths(n_paths));
    }
    let predictable = marginal_predictable(model, surface)?;
    let policy = DpArgmax.extract(model, surface, &predictable)?;
    let primal = simulate_primal(model, &policy, volume.dy(), level, n_paths, seed)?;
    let dual = dual_bound(model, surface, &predictable, level, n_paths, seed, &OptimalMap)?;
    let residuals = ResidualSummary {
        bspde_left_max: bspde_residual(model, surface, &marginal_left(model, surface)?)?.max_residual,
        bspde_predictable_max: bspde_residual(model, surface, &predictable)?.max_residual,
        chain_rule_policy_max: chain_rule_check(model, surface, &predictable, &policy)?.max_residual,
    };
    Ok(DualReport {
        gap: dual.mean - primal.mean,
        primal,
        dual,
        value: surface.value(0, 0, level),
        y0,
        n_paths,
        seed,
        generator: GENERATOR.to_string(),
        grid: GridInfo::of(&volume, model.step_count()),
        model: serde_json::json!({ "id": model.id(), "kind": model.kind() }),
        residuals,
    })
}
