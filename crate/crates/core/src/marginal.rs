//! Discrete marginal values `D ~ D_y^- J`.
//!
//! Two stencils are registered:
//!
//! * `left`: the same-step difference `(J[i][j-1] - J[i][j]) / dy`, with
//!   `D = 0` on the unconstrained region `y_j <= 1 - L(T - t_i)`. This is the
//!   exported `D` column.
//! * `predictable`: `E[(J[i+1][j-1] - J[i+1][j]) / dy | node]`, the shadow
//!   price the DP step actually uses. With it the backward equation, the
//!   chain rule and the martingale map hold exactly on the grid.
//!
//! Both use `-J[i][1] / dy` at `y = 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::solver::{expected_next_row, ValueSurface};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSurface {
    stencil: String,
    values: Vec<Vec<Vec<f64>>>,
}

impl MarginalSurface {
    pub fn new(stencil: impl Into<String>, values: Vec<Vec<Vec<f64>>>) -> Self {
        Self {
            stencil: stencil.into(),
            values,
        }
    }

    pub fn stencil(&self) -> &str {
        &self.stencil
    }

    #[inline]
    pub fn value(&self, step: usize, node: usize, level: usize) -> f64 {
        self.values[step][node][level]
    }

    pub fn row(&self, step: usize, node: usize) -> &[f64] {
        &self.values[step][node]
    }
}

pub trait MarginalStencil: Send + Sync {
    fn name(&self) -> &'static str;

    fn compute(&self, model: &LatticeModel, surface: &ValueSurface) -> Result<MarginalSurface>;
}

pub struct LeftDifference;

impl LeftDifference {
    pub const NAME: &'static str = "left";
}

impl MarginalStencil for LeftDifference {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn compute(&self, model: &LatticeModel, surface: &ValueSurface) -> Result<MarginalSurface> {
        surface.check_model(model)?;
        let volume = surface.volume();
        let dy = volume.dy();
        let values = (0..=model.step_count())
            .map(|i| {
                (0..model.nodes(i).len())
                    .map(|k| {
                        let row = surface.row(i, k);
                        let mut d: Vec<f64> = (0..row.len())
                            .map(|j| {
                                if j == 0 {
                                    (row[0] - row[1]) / dy
                                } else if volume.is_unconstrained(i, j) {
                                    0.0
                                } else {
                                    (row[j - 1] - row[j]) / dy
                                }
                            })
                            .collect();
                        if volume.is_unconstrained(i, 0) {
                            d[0] = 0.0;
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        Ok(MarginalSurface::new(Self::NAME, values))
    }
}

pub struct PredictableDifference;

impl PredictableDifference {
    pub const NAME: &'static str = "predictable";
}

impl MarginalStencil for PredictableDifference {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn compute(&self, model: &LatticeModel, surface: &ValueSurface) -> Result<MarginalSurface> {
        surface.check_model(model)?;
        let n = model.step_count();
        let len = surface.volume().len();
        let dy = surface.volume().dy();
        let mut values: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n + 1);
        for i in 0..n {
            let next: Vec<Vec<f64>> = (0..model.nodes(i + 1).len())
                .map(|k| surface.row(i + 1, k).to_vec())
                .collect();
            let step = (0..model.nodes(i).len())
                .map(|k| {
                    let ev = expected_next_row(model, &next, i, k, len);
                    let row = surface.row(i, k);
                    (0..len)
                        .map(|j| {
                            if j == 0 {
                                (row[0] - row[1]) / dy
                            } else {
                                (ev[j - 1] - ev[j]) / dy
                            }
                        })
                        .collect()
                })
                .collect();
            values.push(step);
        }
        values.push(vec![vec![0.0; len]; model.nodes(n).len()]);
        Ok(MarginalSurface::new(Self::NAME, values))
    }
}

pub struct StencilRegistry {
    stencils: BTreeMap<&'static str, Box<dyn MarginalStencil>>,
}

impl StencilRegistry {
    pub fn standard() -> Self {
        let mut r = Self {
            stencils: BTreeMap::new(),
        };
        r.register(LeftDifference);
        r.register(PredictableDifference);
        r
    }

    pub fn register<S: MarginalStencil + 'static>(&mut self, stencil: S) {
        self.stencils.insert(stencil.name(), Box::new(stencil));
    }

    pub fn get(&self, name: &str) -> Result<&dyn MarginalStencil> {
        self.stencils
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                registry: "marginal stencil",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.stencils.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn MarginalStencil> {
        self.stencils.values().map(|s| s.as_ref())
    }
}

impl Default for StencilRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

/// The exported marginal surface (`left` stencil).
pub fn marginal_left(model: &LatticeModel, surface: &ValueSurface) -> Result<MarginalSurface> {
    LeftDifference.compute(model, surface)
}

pub fn marginal_predictable(model: &LatticeModel, surface: &ValueSurface) -> Result<MarginalSurface> {
    PredictableDifference.compute(model, surface)
}
