//! Martingale maps `M(s, u)` penalizing anticipative controls in the dual.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::marginal::MarginalSurface;
use crate::model::LatticeModel;
use crate::solver::ValueSurface;

/// Everything a map may read: the lattice, the value surface and its
/// predictable marginal.
#[derive(Clone, Copy)]
pub struct MapInputs<'a> {
    pub model: &'a LatticeModel,
    pub surface: &'a ValueSurface,
    pub marginal: &'a MarginalSurface,
}

pub trait MartingaleMap: Send + Sync {
    fn name(&self) -> &'static str;

    /// Increment `M(t_{i+1}, u) - M(t_i, u)` when the path moves from
    /// `node` to `next` while at level `level`, exercising or not.
    fn increment(
        &self,
        inputs: &MapInputs<'_>,
        step: usize,
        node: usize,
        next: usize,
        level: usize,
        exercise: bool,
    ) -> f64;

    /// `increment` for every level in `lo..=hi`: the holding increment goes
    /// to `hold[j - lo]` and the exercising one to `exercise[j - lo]`
    /// (left untouched at `j = 0`).
    #[allow(clippy::too_many_arguments)]
    fn increments(
        &self,
        inputs: &MapInputs<'_>,
        step: usize,
        node: usize,
        next: usize,
        lo: usize,
        hi: usize,
        hold: &mut [f64],
        exercise: &mut [f64],
    ) {
        for j in lo..=hi {
            hold[j - lo] = self.increment(inputs, step, node, next, j, false);
            if j >= 1 {
                exercise[j - lo] = self.increment(inputs, step, node, next, j, true);
            }
        }
    }
}

/// `M(s, u) = J(s, y(s)) + int_t^s L (X + D(r, y(r)))_+ - D(r, y(r)) u(r) dr`.
pub struct OptimalMap;

impl OptimalMap {
    pub const NAME: &'static str = "optimal";
}

impl MartingaleMap for OptimalMap {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    #[inline]
    fn increment(
        &self,
        inputs: &MapInputs<'_>,
        step: usize,
        node: usize,
        next: usize,
        level: usize,
        exercise: bool,
    ) -> f64 {
        let dy = inputs.surface.volume().dy();
        let d = inputs.marginal.value(step, node, level);
        let positive = (inputs.model.payoff(step, node) + d).max(0.0);
        let to = if exercise { level - 1 } else { level };
        let drift = if exercise { dy * (positive - d) } else { dy * positive };
        inputs.surface.value(step + 1, next, to) - inputs.surface.value(step, node, level) + drift
    }

    fn increments(
        &self,
        inputs: &MapInputs<'_>,
        step: usize,
        node: usize,
        next: usize,
        lo: usize,
        hi: usize,
        hold: &mut [f64],
        exercise: &mut [f64],
    ) {
        let dy = inputs.surface.volume().dy();
        let x = inputs.model.payoff(step, node);
        let here = &inputs.surface.row(step, node)[..=hi];
        let ahead = &inputs.surface.row(step + 1, next)[..=hi];
        let marginal = &inputs.marginal.row(step, node)[..=hi];
        for j in lo..=hi {
            let d = marginal[j];
            let positive = (x + d).max(0.0);
            hold[j - lo] = ahead[j] - here[j] + dy * positive;
            if j >= 1 {
                exercise[j - lo] = ahead[j - 1] - here[j] + dy * (positive - d);
            }
        }
    }
}

/// `M = 0`: the perfect-foresight bound.
pub struct ZeroMap;

impl ZeroMap {
    pub const NAME: &'static str = "zero";
}

impl MartingaleMap for ZeroMap {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn increment(&self, _: &MapInputs<'_>, _: usize, _: usize, _: usize, _: usize, _: bool) -> f64 {
        0.0
    }
}

pub struct MapRegistry {
    maps: BTreeMap<&'static str, Box<dyn MartingaleMap>>,
}

impl MapRegistry {
    pub fn standard() -> Self {
        let mut r = Self { maps: BTreeMap::new() };
        r.register(OptimalMap);
        r.register(ZeroMap);
        r
    }

    pub fn register<M: MartingaleMap + 'static>(&mut self, map: M) {
        self.maps.insert(map.name(), Box::new(map));
    }

    pub fn get(&self, name: &str) -> Result<&dyn MartingaleMap> {
        self.maps.get(name).map(|m| m.as_ref()).ok_or_else(|| Error::UnknownStrategy {
            registry: "martingale map",
            name: name.to_string(),
            known: self.maps.keys().copied().collect::<Vec<_>>().join(", "),
        })
    }
}

impl Default for MapRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{TimeGrid, VolumeGrid};
    use crate::marginal::marginal_predictable;
    use crate::model::{build_model, ModelParams};
    use crate::solver::solve_dp;

    /// The optimal map has zero conditional mean for either action, i.e. it is
    /// a martingale for every grid control.
    #[test]
    fn optimal_map_increments_are_centered() {
        let grid = TimeGrid::new(0.5, 12).unwrap();
        let model = build_model(&ModelParams::gbm_call(100.0, 100.0, 0.3, 0.0), &grid).unwrap();
        let surface = solve_dp(&model, &VolumeGrid::new(&grid, 2.0).unwrap()).unwrap();
        let marginal = marginal_predictable(&model, &surface).unwrap();
        let inputs = MapInputs { model: &model, surface: &surface, marginal: &marginal };
        for i in 0..12 {
            for k in 0..model.nodes(i).len() {
                for j in 0..surface.volume().len() {
                    for exercise in [false, true] {
                        if exercise && j == 0 {
                            continue;
                        }
                        let mean = model.expect(i, k, |m| OptimalMap.increment(&inputs, i, k, m, j, exercise));
                        assert!(mean.abs() < 1e-10, "i={i} k={k} j={j} {exercise}: {mean}");
                        // one-step-expectation form of the same increment
                        let to = if exercise { j - 1 } else { j };
                        let centered = |m: usize| surface.value(i + 1, m, to) - model.expect(i, k, |q| surface.value(i + 1, q, to));
                        for t in &model.node(i, k).transitions {
                            let a = OptimalMap.increment(&inputs, i, k, t.to, j, exercise);
                            assert!((a - centered(t.to)).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn row_increments_match_cellwise() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = build_model(&ModelParams::indicator_exponential(1.5), &grid).unwrap();
        let surface = solve_dp(&model, &VolumeGrid::new(&grid, 1.0).unwrap()).unwrap();
        let marginal = marginal_predictable(&model, &surface).unwrap();
        let inputs = MapInputs { model: &model, surface: &surface, marginal: &marginal };
        let (lo, hi) = (0, surface.volume().levels());
        let mut hold = vec![0.0; hi + 1];
        let mut exercise = vec![0.0; hi + 1];
        for i in 0..10 {
            for k in 0..model.nodes(i).len() {
                for t in &model.node(i, k).transitions {
                    OptimalMap.increments(&inputs, i, k, t.to, lo, hi, &mut hold, &mut exercise);
                    for j in lo..=hi {
                        assert_eq!(hold[j].to_bits(), OptimalMap.increment(&inputs, i, k, t.to, j, false).to_bits());
                        if j >= 1 {
                            assert_eq!(exercise[j].to_bits(), OptimalMap.increment(&inputs, i, k, t.to, j, true).to_bits());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn registry_lookup() {
        let r = MapRegistry::standard();
        assert_eq!(r.get("zero").unwrap().name(), "zero");
        assert!(r.get("regression").is_err());
    }
}
