//! Independent reference values: the closed form of the indicator payoff and
//! exhaustive enumeration of bang-bang policy tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, VolumeGrid};
use crate::model::{IndicatorBuilder, LatticeModel, ModelParams};

/// Default enumeration limit: `2^24` policy tables.
pub const BRUTE_FORCE_MAX_CELLS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    ClosedForm,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub provenance: OracleKind,
    pub formula: String,
}

/// Value of `X = 1_{[0, rho)}` at time `t` and consumed volume `y`:
/// `E[min(1 - y, L (rho - t)) | F_t]` on `{rho >= t}`.
///
/// Deterministic `rho = tstar`: `min(1 - y, L (tstar - t)_+)`. Exponential
/// `rho` while alive: `(L / lambda) (1 - exp(-lambda b / L))` with
/// `b = min(1 - y, L (T - t))`. Dead: 0.
pub fn analytic_indicator_value(
    params: &ModelParams,
    grid: &TimeGrid,
    rate_cap: f64,
    t: f64,
    y: f64,
    alive: bool,
) -> Result<OracleValue> {
    if !(y <= 1.0) {
        return Err(Error::param("y", format!("consumed volume must be at most 1, got {y}")));
    }
    let remaining = 1.0 - y;
    match params.kind.as_str() {
        IndicatorBuilder::DETERMINISTIC => {
            let tstar = params.require("tstar", params.tstar)?;
            // the deterministic chain is alive exactly before tstar
            let value = remaining.min(rate_cap * (tstar - t).max(0.0));
            Ok(OracleValue {
                value,
                provenance: OracleKind::ClosedForm,
                formula: "min(1-y, L*(tstar-t)_+)".into(),
            })
        }
        IndicatorBuilder::EXPONENTIAL => {
            let lambda = params.require("lambda", params.lambda)?;
            let value = if alive {
                let b = remaining.min(rate_cap * (grid.horizon() - t).max(0.0));
                -(rate_cap / lambda) * (-lambda * b / rate_cap).exp_m1()
            } else {
                0.0
            };
            Ok(OracleValue {
                value,
                provenance: OracleKind::ClosedForm,
                formula: "(L/lambda)*(1-exp(-lambda*min(1-y, L*(T-t))/L))".into(),
            })
        }
        other => Err(Error::NotIndicator(other.to_string())),
    }
}

/// Decision cells of a policy table: every node before maturity times every
/// level with volume left.
pub fn decision_cells(model: &LatticeModel, volume: &VolumeGrid) -> usize {
    (0..model.step_count()).map(|i| model.nodes(i).len()).sum::<usize>() * volume.levels()
}

/// Maximum over all `2^cells` bang-bang tables of the expected reward from
/// the root, for every starting level `j = 0..=M`.
pub fn brute_force_root_values(model: &LatticeModel, volume: &VolumeGrid, max_cells: usize) -> Result<Vec<f64>> {
    volume.check_matches(model.time())?;
    let cells = decision_cells(model, volume);
    if cells > max_cells || cells >= 64 {
        return Err(Error::ModelTooLarge { cells, max: max_cells });
    }
    let n = model.step_count();
    let len = volume.len();
    let levels = volume.levels();

    // bit index of cell (i, k, j), j >= 1
    let mut offsets = Vec::with_capacity(n);
    let mut acc = 0usize;
    for i in 0..n {
        offsets.push(acc);
        acc += model.nodes(i).len() * levels;
    }

    let mut best = vec![f64::NEG_INFINITY; len];
    let mut values: Vec<Vec<Vec<f64>>> = (0..=n).map(|i| vec![vec![0.0; len]; model.nodes(i).len()]).collect();
    for mask in 0u64..(1u64 << cells) {
        for i in (0..n).rev() {
            let (head, tail) = values.split_at_mut(i + 1);
            let next = &tail[0];
            for (k, row) in head[i].iter_mut().enumerate() {
                let payoff = volume.dy() * model.payoff(i, k);
                for (j, slot) in row.iter_mut().enumerate() {
                    let exercise = j >= 1 && mask >> (offsets[i] + k * levels + (j - 1)) & 1 == 1;
                    let to = if exercise { j - 1 } else { j };
                    let mut v = if exercise { payoff } else { 0.0 };
                    let mut cont = 0.0;
                    for t in &model.node(i, k).transitions {
                        cont += t.prob * next[t.to][to];
                    }
                    v += cont;
                    *slot = v;
                }
            }
        }
        for (b, &v) in best.iter_mut().zip(&values[0][0]) {
            if v > *b {
                *b = v;
            }
        }
    }
    Ok(best)
}

/// Brute-force value at the root and level `level`.
pub fn brute_force_value(model: &LatticeModel, volume: &VolumeGrid, level: usize, max_cells: usize) -> Result<OracleValue> {
    let values = brute_force_root_values(model, volume, max_cells)?;
    let value = *values
        .get(level)
        .ok_or_else(|| Error::param("level", format!("{level} exceeds M = {}", volume.levels())))?;
    Ok(OracleValue {
        value,
        provenance: OracleKind::BruteForce,
        formula: format!("max over 2^{} policy tables", decision_cells(model, volume)),
    })
}
