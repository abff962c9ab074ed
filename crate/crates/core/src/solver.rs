//! Backward dynamic programming for the value surface `J(t_i, node, y_j)`.
//!
//! The per-step objective is affine in the exercise rate, so the maximum over
//! `[0, L]` is attained at `0` or `L`; ties go to `L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, VolumeGrid};
use crate::model::LatticeModel;

/// Reward of one full-rate step at `(step, node)`: `L * dt * X = dy * X`.
#[inline]
pub fn cell_reward(model: &LatticeModel, volume: &VolumeGrid, step: usize, node: usize) -> f64 {
    volume.dy() * model.payoff(step, node)
}

/// Values indexed `[step][node][level]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSurface {
    model_id: String,
    time: TimeGrid,
    volume: VolumeGrid,
    values: Vec<Vec<Vec<f64>>>,
    /// `W[step][node]`, the value with a slack volume constraint.
    unconstrained: Vec<Vec<f64>>,
}

impl ValueSurface {
    pub fn from_parts(
        model_id: impl Into<String>,
        time: TimeGrid,
        volume: VolumeGrid,
        values: Vec<Vec<Vec<f64>>>,
        unconstrained: Vec<Vec<f64>>,
    ) -> Result<Self> {
        volume.check_matches(&time)?;
        if values.len() != time.steps() + 1 || unconstrained.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "surface holds {} steps, grid has {}",
                values.len(),
                time.steps() + 1
            )));
        }
        for (i, step) in values.iter().enumerate() {
            if step.len() != unconstrained[i].len() {
                return Err(Error::GridMismatch(format!("step {i}: node count mismatch")));
            }
            if step.iter().any(|row| row.len() != volume.len()) {
                return Err(Error::GridMismatch(format!(
                    "step {i}: rows must hold {} levels",
                    volume.len()
                )));
            }
        }
        Ok(Self {
            model_id: model_id.into(),
            time,
            volume,
            values,
            unconstrained,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn volume(&self) -> &VolumeGrid {
        &self.volume
    }

    pub fn node_count(&self, step: usize) -> usize {
        self.values[step].len()
    }

    #[inline]
    pub fn value(&self, step: usize, node: usize, level: usize) -> f64 {
        self.values[step][node][level]
    }

    pub fn row(&self, step: usize, node: usize) -> &[f64] {
        &self.values[step][node]
    }

    pub fn unconstrained(&self, step: usize, node: usize) -> f64 {
        self.unconstrained[step][node]
    }

    pub fn values_mut(&mut self) -> &mut Vec<Vec<Vec<f64>>> {
        &mut self.values
    }

    /// Checks that this surface was computed on `model`'s lattice.
    pub fn check_model(&self, model: &LatticeModel) -> Result<()> {
        self.volume.check_matches(model.time())?;
        for i in 0..=self.time.steps() {
            if self.values[i].len() != model.nodes(i).len() {
                return Err(Error::GridMismatch(format!(
                    "step {i}: surface has {} nodes, model has {}",
                    self.values[i].len(),
                    model.nodes(i).len()
                )));
            }
        }
        Ok(())
    }

    /// Value at an arbitrary consumed volume `y <= 1` on a grid step: linear
    /// in `y` between levels, `W` below the deepest level. Approximation only
    /// off the grid.
    pub fn value_at(&self, step: usize, node: usize, y: f64) -> Option<f64> {
        if !(y <= 1.0) {
            return None;
        }
        let cells = (1.0 - y) / self.volume.dy();
        let levels = self.volume.levels();
        if cells >= levels as f64 {
            return Some(self.unconstrained[step][node]);
        }
        let lo = cells.floor() as usize;
        let w = cells - lo as f64;
        let row = &self.values[step][node];
        Some(if w == 0.0 {
            row[lo]
        } else {
            (1.0 - w) * row[lo] + w * row[lo + 1]
        })
    }
}

/// `W[i][node] = L dt X(i, node) + E[W[i+1] | node]`, `W[N] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedSurface {
    pub values: Vec<Vec<f64>>,
}

impl UnconstrainedSurface {
    pub fn value(&self, step: usize, node: usize) -> f64 {
        self.values[step][node]
    }
}

pub fn unconstrained_values(model: &LatticeModel, volume: &VolumeGrid) -> Result<UnconstrainedSurface> {
    volume.check_matches(model.time())?;
    let n = model.step_count();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    values[n] = vec![0.0; model.nodes(n).len()];
    for i in (0..n).rev() {
        let next = &values[i + 1];
        let row = (0..model.nodes(i).len())
            .map(|k| cell_reward(model, volume, i, k) + model.expect(i, k, |to| next[to]))
            .collect();
        values[i] = row;
    }
    Ok(UnconstrainedSurface { values })
}

/// `Z[i][node] = E[max(X(i, node), Z[i+1]) | node]`, `Z[N] = X(N, .)`: a
/// forward-looking bound for the Lipschitz constant of `J` in `y`.
pub fn forward_max_payoff(model: &LatticeModel) -> Vec<Vec<f64>> {
    let n = model.step_count();
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    z[n] = model.nodes(n).iter().map(|node| node.payoff).collect();
    for i in (0..n).rev() {
        let next = &z[i + 1];
        z[i] = model
            .nodes(i)
            .iter()
            .enumerate()
            .map(|(k, node)| model.expect(i, k, |to| node.payoff.max(next[to])))
            .collect();
    }
    z
}

/// One-step conditional expectation of a level row: `E[J[i+1][., j] | node]`.
pub(crate) fn expected_next_row(
    model: &LatticeModel,
    next: &[Vec<f64>],
    step: usize,
    node: usize,
    len: usize,
) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for t in &model.node(step, node).transitions {
        for (a, v) in acc.iter_mut().zip(&next[t.to]) {
            *a += t.prob * v;
        }
    }
    acc
}

/// Solves `J[i][node][j] = max_{u in {0, L}} u dt X + E[J[i+1][.][j - u dt/dy]]`
/// backward from `J[N] = 0`, with `u = 0` forced at `j = 0`.
pub fn solve_dp(model: &LatticeModel, volume: &VolumeGrid) -> Result<ValueSurface> {
    volume.check_matches(model.time())?;
    let diagnostics = model.validate();
    if !diagnostics.is_empty() {
        return Err(Error::InvalidModel(diagnostics));
    }
    let n = model.step_count();
    let len = volume.len();
    let w = unconstrained_values(model, volume)?;

    let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n + 1];
    values[n] = vec![vec![0.0; len]; model.nodes(n).len()];
    for i in (0..n).rev() {
        let next = &values[i + 1];
        let step: Vec<Vec<f64>> = (0..model.nodes(i).len())
            .into_par_iter()
            .map(|k| {
                let ev = expected_next_row(model, next, i, k, len);
                let reward = cell_reward(model, volume, i, k);
                let mut row = Vec::with_capacity(len);
                row.push(ev[0]);
                for j in 1..len {
                    let exercise = reward + ev[j - 1];
                    row.push(if exercise >= ev[j] { exercise } else { ev[j] });
                }
                row
            })
            .collect();
        values[i] = step;
    }
    ValueSurface::from_parts(model.id(), *model.time(), *volume, values, w.values)
}

/// Expected reward of following `exercise` from every cell, `[step][node][level]`.
pub fn evaluate_policy(
    model: &LatticeModel,
    volume: &VolumeGrid,
    exercise: impl Fn(usize, usize, usize) -> bool,
) -> Vec<Vec<Vec<f64>>> {
    let n = model.step_count();
    let len = volume.len();
    let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n + 1];
    values[n] = vec![vec![0.0; len]; model.nodes(n).len()];
    for i in (0..n).rev() {
        let next = &values[i + 1];
        values[i] = (0..model.nodes(i).len())
            .map(|k| {
                let ev = expected_next_row(model, next, i, k, len);
                let reward = cell_reward(model, volume, i, k);
                (0..len)
                    .map(|j| {
                        if j >= 1 && exercise(i, k, j) {
                            reward + ev[j - 1]
                        } else {
                            ev[j]
                        }
                    })
                    .collect()
            })
            .collect();
    }
    values
}

/// True when the DP prefers full-rate exercise at `(step, node, level)`.
pub(crate) fn dp_exercises(ev: &[f64], reward: f64, level: usize) -> bool {
    level >= 1 && reward + ev[level - 1] >= ev[level]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelParams};
    use approx::assert_abs_diff_eq;

    fn solve(params: ModelParams, horizon: f64, steps: usize, cap: f64) -> (LatticeModel, ValueSurface) {
        let grid = TimeGrid::new(horizon, steps).unwrap();
        let model = build_model(&params, &grid).unwrap();
        let volume = VolumeGrid::new(&grid, cap).unwrap();
        let surface = solve_dp(&model, &volume).unwrap();
        (model, surface)
    }

    #[test]
    fn indicator_closed_form_anchor() {
        let (_, s) = solve(ModelParams::indicator_deterministic(0.5), 1.0, 100, 2.0);
        let j = s.volume().level_of(0.2).unwrap();
        assert_abs_diff_eq!(s.value(0, 0, j), 0.8, epsilon = 0.02);
    }

    #[test]
    fn boundaries_are_zero() {
        let (model, s) = solve(ModelParams::gbm_call(100.0, 95.0, 0.3, 0.02), 0.5, 12, 2.0);
        for i in 0..=12 {
            for k in 0..model.nodes(i).len() {
                assert_eq!(s.value(i, k, 0), 0.0);
            }
        }
        assert!(s.row(12, 0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_payoff_gives_zero_surface() {
        let (_, s) = solve(ModelParams::constant(1.0, 2.0, 0.0), 1.0, 6, 1.0);
        for i in 0..=6 {
            assert!(s.row(i, 0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unconstrained_region_equals_w_exactly() {
        let (model, s) = solve(ModelParams::gbm_call(100.0, 100.0, 0.3, 0.0), 0.5, 20, 2.0);
        let w = unconstrained_values(&model, s.volume()).unwrap();
        for i in 0..=20 {
            for k in 0..model.nodes(i).len() {
                for j in (20 - i)..s.volume().len() {
                    assert_eq!(s.value(i, k, j), w.value(i, k));
                }
            }
        }
    }

    #[test]
    fn deterministic_indicator_w() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let model = build_model(&ModelParams::indicator_deterministic(0.5), &grid).unwrap();
        let w = unconstrained_values(&model, &VolumeGrid::new(&grid, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(w.value(0, 0), 1.0, epsilon = 1e-12);
        assert!(w.values[200].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let other = TimeGrid::new(1.0, 20).unwrap();
        let model = build_model(&ModelParams::indicator_exponential(1.0), &grid).unwrap();
        let volume = VolumeGrid::new(&other, 1.0).unwrap();
        assert!(matches!(solve_dp(&model, &volume), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn interpolation_between_levels() {
        let (_, s) = solve(ModelParams::indicator_deterministic(0.5), 1.0, 10, 1.0);
        let dy = s.volume().dy();
        let mid = s.value_at(0, 0, 1.0 - 1.5 * dy).unwrap();
        assert_abs_diff_eq!(mid, 0.5 * (s.value(0, 0, 1) + s.value(0, 0, 2)), epsilon = 1e-15);
        assert_eq!(s.value_at(0, 0, -5.0), Some(s.unconstrained(0, 0)));
        assert_eq!(s.value_at(0, 0, 1.5), None);
    }

    #[test]
    fn forward_max_dominates_payoff() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let model = build_model(&ModelParams::gbm_call(100.0, 100.0, 0.3, 0.0), &grid).unwrap();
        let z = forward_max_payoff(&model);
        for i in 0..=8 {
            for (k, node) in model.nodes(i).iter().enumerate() {
                assert!(z[i][k] >= node.payoff);
            }
        }
    }
}
