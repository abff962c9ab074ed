//! Bang-bang exercise policies `u(i, node, j) in {0, L}`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VolumeGrid;
use crate::marginal::MarginalSurface;
use crate::model::LatticeModel;
use crate::rng::path_rng;
use crate::solver::{cell_reward, dp_exercises, expected_next_row, ValueSurface};

/// Default dead-band of the marginal sign rule; `|X + D| <= eps` resolves to `L`.
pub const EPS_SWITCH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    provenance: String,
    rate_cap: f64,
    /// `exercise[i][node][j]`; always false at `j = 0` and at the final step.
    exercise: Vec<Vec<Vec<bool>>>,
}

impl PolicyTable {
    /// Builds a table from a decision function; the decision is ignored (and
    /// recorded as no exercise) wherever no volume is left.
    pub fn from_fn(
        provenance: impl Into<String>,
        model: &LatticeModel,
        volume: &VolumeGrid,
        mut decide: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let n = model.step_count();
        let exercise = (0..=n)
            .map(|i| {
                (0..model.nodes(i).len())
                    .map(|k| {
                        (0..volume.len())
                            .map(|j| i < n && j >= 1 && decide(i, k, j))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            provenance: provenance.into(),
            rate_cap: volume.rate_cap(),
            exercise,
        }
    }

    /// A raw table, checked for volume feasibility.
    pub fn from_table(
        provenance: impl Into<String>,
        rate_cap: f64,
        exercise: Vec<Vec<Vec<bool>>>,
    ) -> Result<Self> {
        for (i, step) in exercise.iter().enumerate() {
            for (k, row) in step.iter().enumerate() {
                if row.first() == Some(&true) {
                    return Err(Error::InfeasibleControl { step: i, node: k });
                }
            }
        }
        if let Some(last) = exercise.last() {
            if last.iter().flatten().any(|&e| e) {
                return Err(Error::param("policy", "exercise at the final step"));
            }
        }
        Ok(Self {
            provenance: provenance.into(),
            rate_cap,
            exercise,
        })
    }

    pub fn never(model: &LatticeModel, volume: &VolumeGrid) -> Self {
        Self::from_fn("never", model, volume, |_, _, _| false)
    }

    /// Full rate whenever volume remains.
    pub fn always(model: &LatticeModel, volume: &VolumeGrid) -> Self {
        Self::from_fn("always", model, volume, |_, _, _| true)
    }

    /// Independent fair coin per cell, drawn from stream `stream` of `seed`.
    pub fn random(model: &LatticeModel, volume: &VolumeGrid, seed: u64, stream: u64) -> Self {
        let mut rng = path_rng(seed, stream);
        Self::from_fn(format!("random(seed={seed},stream={stream})"), model, volume, |_, _, _| {
            rng.gen::<bool>()
        })
    }

    pub fn check_shape(&self, model: &LatticeModel, volume: &VolumeGrid) -> Result<()> {
        let ok = self.exercise.len() == model.step_count() + 1
            && self.exercise.iter().enumerate().all(|(i, step)| {
                step.len() == model.nodes(i).len() && step.iter().all(|row| row.len() == volume.len())
            });
        if ok {
            Ok(())
        } else {
            Err(Error::GridMismatch("policy table does not match the lattice".into()))
        }
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    #[inline]
    pub fn exercises(&self, step: usize, node: usize, level: usize) -> bool {
        self.exercise[step][node][level]
    }

    /// `u` in rate units.
    pub fn rate(&self, step: usize, node: usize, level: usize) -> f64 {
        if self.exercises(step, node, level) {
            self.rate_cap
        } else {
            0.0
        }
    }

    pub fn cell_count(&self) -> usize {
        self.exercise.iter().flatten().map(Vec::len).sum()
    }

    /// Fraction of cells where the two tables take the same action.
    pub fn agreement(&self, other: &PolicyTable) -> f64 {
        let mut same = 0usize;
        let mut total = 0usize;
        for (a, b) in self.exercise.iter().flatten().zip(other.exercise.iter().flatten()) {
            for (x, y) in a.iter().zip(b) {
                total += 1;
                same += usize::from(x == y);
            }
        }
        if total == 0 {
            1.0
        } else {
            same as f64 / total as f64
        }
    }
}

pub trait PolicyRule: Send + Sync {
    fn name(&self) -> &'static str;

    fn extract(
        &self,
        model: &LatticeModel,
        surface: &ValueSurface,
        marginal: &MarginalSurface,
    ) -> Result<PolicyTable>;
}

/// The DP maximizer itself, ties to `L`.
pub struct DpArgmax;

impl DpArgmax {
    pub const NAME: &'static str = "dp-argmax";
}

impl PolicyRule for DpArgmax {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn extract(
        &self,
        model: &LatticeModel,
        surface: &ValueSurface,
        _marginal: &MarginalSurface,
    ) -> Result<PolicyTable> {
        surface.check_model(model)?;
        let volume = *surface.volume();
        let n = model.step_count();
        let len = volume.len();
        let mut exercise: Vec<Vec<Vec<bool>>> = Vec::with_capacity(n + 1);
        for i in 0..n {
            let next: Vec<Vec<f64>> = (0..model.nodes(i + 1).len())
                .map(|k| surface.row(i + 1, k).to_vec())
                .collect();
            exercise.push(
                (0..model.nodes(i).len())
                    .map(|k| {
                        let ev = expected_next_row(model, &next, i, k, len);
                        let reward = cell_reward(model, &volume, i, k);
                        (0..len).map(|j| dp_exercises(&ev, reward, j)).collect()
                    })
                    .collect(),
            );
        }
        exercise.push(vec![vec![false; len]; model.nodes(n).len()]);
        PolicyTable::from_table(Self::NAME, volume.rate_cap(), exercise)
    }
}

/// Sign test on `X + D` with a dead-band resolved to `L`.
pub struct MarginalRule {
    pub eps_switch: f64,
}

impl MarginalRule {
    pub const NAME: &'static str = "marginal-rule";
}

impl Default for MarginalRule {
    fn default() -> Self {
        Self {
            eps_switch: EPS_SWITCH,
        }
    }
}

impl PolicyRule for MarginalRule {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn extract(
        &self,
        model: &LatticeModel,
        surface: &ValueSurface,
        marginal: &MarginalSurface,
    ) -> Result<PolicyTable> {
        surface.check_model(model)?;
        Ok(PolicyTable::from_fn(Self::NAME, model, surface.volume(), |i, k, j| {
            model.payoff(i, k) + marginal.value(i, k, j) >= -self.eps_switch
        }))
    }
}

pub struct PolicyRegistry {
    rules: BTreeMap<&'static str, Box<dyn PolicyRule>>,
}

impl PolicyRegistry {
    pub fn standard() -> Self {
        let mut r = Self {
            rules: BTreeMap::new(),
        };
        r.register(DpArgmax);
        r.register(MarginalRule::default());
        r
    }

    pub fn register<R: PolicyRule + 'static>(&mut self, rule: R) {
        self.rules.insert(rule.name(), Box::new(rule));
    }

    pub fn get(&self, name: &str) -> Result<&dyn PolicyRule> {
        self.rules
            .get(name)
            .map(|r| r.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                registry: "policy rule",
                name: name.to_string(),
                known: self.rules.keys().copied().collect::<Vec<_>>().join(", "),
            })
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn extract_policy(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    rule: &str,
) -> Result<PolicyTable> {
    PolicyRegistry::standard().get(rule)?.extract(model, surface, marginal)
}
