use super::{model_id, LatticeModel, ModelBuilder, ModelParams, Node, NodeState, Transition};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Cox-Ross-Rubinstein factors `(up, down, p)` for one step of length `dt`.
pub fn crr_factors(sigma: f64, rate: f64, dt: f64) -> (f64, f64, f64) {
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let p = ((rate * dt).exp() - down) / (up - down);
    (up, down, p)
}

/// Recombining CRR tree with discounted call payoff `X = e^{-rt} (S - K)_+`.
///
/// Node `k` of step `i` has seen `k` up-moves, so spots ascend with `k`.
pub struct GbmCallBuilder;

impl GbmCallBuilder {
    pub const KIND: &'static str = "gbm-call";
}

impl ModelBuilder for GbmCallBuilder {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn build(&self, params: &ModelParams, grid: &TimeGrid) -> Result<LatticeModel> {
        params.forbid_except(&["S0", "K", "sigma", "r"])?;
        let spot = params.require("S0", params.spot)?;
        let strike = params.require("K", params.strike)?;
        let sigma = params.require("sigma", params.sigma)?;
        let rate = params.require("r", params.rate)?;
        if spot <= 0.0 {
            return Err(Error::param("S0", format!("must be positive, got {spot}")));
        }
        if strike < 0.0 {
            return Err(Error::param("K", format!("must be nonnegative, got {strike}")));
        }
        if sigma <= 0.0 {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }

        let dt = grid.dt();
        let (up, _, p) = crr_factors(sigma, rate, dt);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange { p });
        }

        let n = grid.steps();
        let steps = (0..=n)
            .map(|i| {
                let discount = (-rate * grid.time(i)).exp();
                (0..=i)
                    .map(|k| {
                        let s = spot * up.powi(2 * k as i32 - i as i32);
                        let transitions = if i == n {
                            vec![]
                        } else {
                            vec![
                                Transition { to: k, prob: 1.0 - p },
                                Transition { to: k + 1, prob: p },
                            ]
                        };
                        Node::new(NodeState::Spot(s), discount * (s - strike).max(0.0), transitions)
                    })
                    .collect()
            })
            .collect();
        Ok(LatticeModel::from_steps(model_id(params, grid), Self::KIND, *grid, steps))
    }
}
