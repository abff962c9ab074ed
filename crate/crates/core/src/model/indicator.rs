use super::{model_id, LatticeModel, ModelBuilder, ModelParams, Node, NodeState, Transition};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Law of the kill time `rho` in `X(t) = 1_{[0, rho)}(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorLaw {
    /// `rho = tstar`.
    Deterministic,
    /// First jump of a rate-`lambda` Poisson clock, capped at `T`.
    Exponential,
}

/// Per-step alive-to-dead probability of the exponential law, `1 - e^{-lambda dt}`.
pub fn death_probability(lambda: f64, dt: f64) -> f64 {
    -(-lambda * dt).exp_m1()
}

/// First step index with `t_i >= tstar` (to a relative 1e-9, so that
/// `tstar` on a grid point is not lost to rounding of `i * dt`).
pub fn first_dead_step(tstar: f64, grid: &TimeGrid) -> usize {
    ((tstar / grid.dt()) - 1e-9).ceil().max(0.0) as usize
}

/// Two-state `{alive, dead}` chain; alive pays 1, dead pays 0 and absorbs.
pub struct IndicatorBuilder {
    law: IndicatorLaw,
}

impl IndicatorBuilder {
    pub const DETERMINISTIC: &'static str = "indicator-deterministic";
    pub const EXPONENTIAL: &'static str = "indicator-exponential";

    pub fn new(law: IndicatorLaw) -> Self {
        Self { law }
    }

    fn deterministic(&self, params: &ModelParams, grid: &TimeGrid) -> Result<Vec<Vec<Node>>> {
        params.forbid_except(&["tstar"])?;
        let tstar = params.require("tstar", params.tstar)?;
        if !(0.0..=grid.horizon()).contains(&tstar) {
            return Err(Error::param(
                "tstar",
                format!("must lie in [0, T] = [0, {}], got {tstar}", grid.horizon()),
            ));
        }
        // Only the reachable state is kept at each step.
        let kill = first_dead_step(tstar, grid);
        let n = grid.steps();
        Ok((0..=n)
            .map(|i| {
                let transitions = if i == n {
                    vec![]
                } else {
                    vec![Transition { to: 0, prob: 1.0 }]
                };
                let node = if i < kill {
                    Node::new(NodeState::Alive, 1.0, transitions)
                } else {
                    Node::new(NodeState::Dead, 0.0, transitions)
                };
                vec![node]
            })
            .collect())
    }

    fn exponential(&self, params: &ModelParams, grid: &TimeGrid) -> Result<Vec<Vec<Node>>> {
        params.forbid_except(&["lambda"])?;
        let lambda = params.require("lambda", params.lambda)?;
        if lambda <= 0.0 {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        let die = death_probability(lambda, grid.dt());
        let survive = (-lambda * grid.dt()).exp();
        let n = grid.steps();
        let mut steps = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let last = i == n;
            let alive = Node::new(
                NodeState::Alive,
                1.0,
                if last {
                    vec![]
                } else {
                    vec![
                        Transition { to: 0, prob: survive },
                        Transition { to: 1, prob: die },
                    ]
                },
            );
            if i == 0 {
                steps.push(vec![alive]);
                continue;
            }
            let dead = Node::new(
                NodeState::Dead,
                0.0,
                if last {
                    vec![]
                } else {
                    vec![Transition { to: 1, prob: 1.0 }]
                },
            );
            steps.push(vec![alive, dead]);
        }
        Ok(steps)
    }
}

impl ModelBuilder for IndicatorBuilder {
    fn kind(&self) -> &'static str {
        match self.law {
            IndicatorLaw::Deterministic => Self::DETERMINISTIC,
            IndicatorLaw::Exponential => Self::EXPONENTIAL,
        }
    }

    fn is_indicator(&self) -> bool {
        true
    }

    fn build(&self, params: &ModelParams, grid: &TimeGrid) -> Result<LatticeModel> {
        let steps = match self.law {
            IndicatorLaw::Deterministic => self.deterministic(params, grid)?,
            IndicatorLaw::Exponential => self.exponential(params, grid)?,
        };
        Ok(LatticeModel::from_steps(model_id(params, grid), self.kind(), *grid, steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn deterministic_kill_at_first_step_past_tstar() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let m = IndicatorBuilder::new(IndicatorLaw::Deterministic)
            .build(&ModelParams::indicator_deterministic(0.5), &grid)
            .unwrap();
        let payoffs: Vec<f64> = (0..=4).map(|i| m.payoff(i, 0)).collect();
        assert_eq!(payoffs, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.node(2, 0).state, NodeState::Dead);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn tstar_on_fine_grid_point() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        assert_eq!(first_dead_step(0.5, &grid), 100);
        assert_eq!(first_dead_step(0.0, &grid), 0);
        assert_eq!(first_dead_step(0.5001, &grid), 101);
    }

    #[test]
    fn dead_from_the_start() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let m = IndicatorBuilder::new(IndicatorLaw::Deterministic)
            .build(&ModelParams::indicator_deterministic(0.0), &grid)
            .unwrap();
        assert_eq!(m.max_payoff(), 0.0);
    }

    #[test]
    fn exponential_death_probability() {
        assert_abs_diff_eq!(death_probability(1.0, 0.1), 0.09516, epsilon = 1e-5);
        assert_abs_diff_eq!(death_probability(1.0, 0.1), 1.0 - (-0.1_f64).exp(), epsilon = 1e-16);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let m = IndicatorBuilder::new(IndicatorLaw::Exponential)
            .build(&ModelParams::indicator_exponential(1.0), &grid)
            .unwrap();
        assert!(m.validate().is_empty());
        let dead = &m.node(3, 1);
        assert_eq!(dead.payoff, 0.0);
        assert_eq!(dead.transitions, vec![Transition { to: 1, prob: 1.0 }]);
        for i in 0..=10 {
            for node in m.nodes(i) {
                assert!(node.payoff == 0.0 || node.payoff == 1.0);
            }
        }
    }

    #[test]
    fn precondition_failures() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let exp = IndicatorBuilder::new(IndicatorLaw::Exponential);
        assert!(exp.build(&ModelParams::indicator_exponential(0.0), &grid).is_err());
        assert!(exp.build(&ModelParams::indicator_exponential(-1.0), &grid).is_err());
        let det = IndicatorBuilder::new(IndicatorLaw::Deterministic);
        assert!(det.build(&ModelParams::indicator_deterministic(1.5), &grid).is_err());
        assert!(det.build(&ModelParams::indicator_deterministic(-0.1), &grid).is_err());
    }
}
