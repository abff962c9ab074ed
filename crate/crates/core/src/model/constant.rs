use super::{model_id, LatticeModel, ModelBuilder, ModelParams, Node, NodeState, Transition};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A single deterministic path paying `X(t_i) = e^{-r t_i} (S0 - K)_+`.
pub struct ConstantBuilder;

impl ConstantBuilder {
    pub const KIND: &'static str = "constant";
}

impl ModelBuilder for ConstantBuilder {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn build(&self, params: &ModelParams, grid: &TimeGrid) -> Result<LatticeModel> {
        params.forbid_except(&["S0", "K", "r"])?;
        let spot = params.require("S0", params.spot)?;
        let strike = params.strike.unwrap_or(0.0);
        let rate = params.rate.unwrap_or(0.0);
        if spot < 0.0 {
            return Err(Error::param("S0", format!("must be nonnegative, got {spot}")));
        }
        if !strike.is_finite() || strike < 0.0 {
            return Err(Error::param("K", format!("must be nonnegative, got {strike}")));
        }
        if !rate.is_finite() {
            return Err(Error::param("r", "must be finite"));
        }
        let n = grid.steps();
        let steps = (0..=n)
            .map(|i| {
                let transitions = if i == n {
                    vec![]
                } else {
                    vec![Transition { to: 0, prob: 1.0 }]
                };
                let x = (-rate * grid.time(i)).exp() * (spot - strike).max(0.0);
                vec![Node::new(NodeState::Spot(spot), x, transitions)]
            })
            .collect();
        Ok(LatticeModel::from_steps(model_id(params, grid), Self::KIND, *grid, steps))
    }
}
