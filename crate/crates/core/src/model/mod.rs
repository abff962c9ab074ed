//! Finite Markovian lattices carrying the nonnegative payoff-rate process `X`.
//!
//! Every model kind is a [`ModelBuilder`] registered by name in a
//! [`ModelRegistry`]; configuration files select one by its `kind` string.

mod constant;
mod gbm;
mod indicator;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use constant::ConstantBuilder;
pub use gbm::{crr_factors, GbmCallBuilder};
pub use indicator::{death_probability, first_dead_step, IndicatorBuilder, IndicatorLaw};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Outgoing probabilities must sum to one within this bound.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeState {
    Spot(f64),
    Alive,
    Dead,
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeState::Spot(s) => write!(f, "S={s:.16e}"),
            NodeState::Alive => f.write_str("alive"),
            NodeState::Dead => f.write_str("dead"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub to: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub state: NodeState,
    /// Payoff rate `X(i, node)`.
    pub payoff: f64,
    /// Transitions into the next step's node list; empty at the final step.
    pub transitions: Vec<Transition>,
}

impl Node {
    pub fn new(state: NodeState, payoff: f64, transitions: Vec<Transition>) -> Self {
        Self {
            state,
            payoff,
            transitions,
        }
    }
}

/// Kind-specific model parameters. Unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: String,
    pub spot: Option<f64>,
    pub strike: Option<f64>,
    pub sigma: Option<f64>,
    /// Discount rate `r`.
    pub rate: Option<f64>,
    /// Hazard rate of the exponential kill time.
    pub lambda: Option<f64>,
    /// Deterministic kill time.
    pub tstar: Option<f64>,
}

impl ModelParams {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }

    pub fn gbm_call(spot: f64, strike: f64, sigma: f64, rate: f64) -> Self {
        Self {
            spot: Some(spot),
            strike: Some(strike),
            sigma: Some(sigma),
            rate: Some(rate),
            ..Self::new(GbmCallBuilder::KIND)
        }
    }

    pub fn indicator_deterministic(tstar: f64) -> Self {
        Self {
            tstar: Some(tstar),
            ..Self::new(IndicatorBuilder::DETERMINISTIC)
        }
    }

    pub fn indicator_exponential(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::new(IndicatorBuilder::EXPONENTIAL)
        }
    }

    /// Deterministic payoff `X(t) = e^{-rt} (S0 - K)_+` on a one-node-per-step chain.
    pub fn constant(spot: f64, strike: f64, rate: f64) -> Self {
        Self {
            spot: Some(spot),
            strike: Some(strike),
            rate: Some(rate),
            ..Self::new(ConstantBuilder::KIND)
        }
    }

    pub(crate) fn require(&self, field: &'static str, value: Option<f64>) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(Error::param(field, format!("must be finite, got {v}"))),
            None => Err(Error::param(field, format!("required for kind `{}`", self.kind))),
        }
    }

    /// Rejects parameters the kind does not use.
    pub(crate) fn forbid_except(&self, allowed: &[&str]) -> Result<()> {
        let present = [
            ("S0", self.spot.is_some()),
            ("K", self.strike.is_some()),
            ("sigma", self.sigma.is_some()),
            ("r", self.rate.is_some()),
            ("lambda", self.lambda.is_some()),
            ("tstar", self.tstar.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(Error::param(name, format!("not used by kind `{}`", self.kind)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    id: String,
    kind: String,
    time: TimeGrid,
    steps: Vec<Vec<Node>>,
}

impl LatticeModel {
    /// Assembles a model without checking it; see [`LatticeModel::validate`].
    pub fn from_steps(
        id: impl Into<String>,
        kind: impl Into<String>,
        time: TimeGrid,
        steps: Vec<Vec<Node>>,
    ) -> Self {
        Self {
            id: id.into(),
            kind: kind.into(),
            time,
            steps,
        }
    }

    /// Like [`LatticeModel::from_steps`] but fails on any invariant violation.
    pub fn checked(
        id: impl Into<String>,
        kind: impl Into<String>,
        time: TimeGrid,
        steps: Vec<Vec<Node>>,
    ) -> Result<Self> {
        let model = Self::from_steps(id, kind, time, steps);
        let diagnostics = model.validate();
        if diagnostics.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(diagnostics))
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn step_count(&self) -> usize {
        self.time.steps()
    }

    pub fn nodes(&self, step: usize) -> &[Node] {
        &self.steps[step]
    }

    pub fn node(&self, step: usize, node: usize) -> &Node {
        &self.steps[step][node]
    }

    pub fn payoff(&self, step: usize, node: usize) -> f64 {
        self.steps[step][node].payoff
    }

    pub fn max_payoff(&self) -> f64 {
        self.steps
            .iter()
            .flatten()
            .map(|n| n.payoff)
            .fold(0.0, f64::max)
    }

    /// `E[f(next) | node]`, summed in transition order.
    #[inline]
    pub fn expect(&self, step: usize, node: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.steps[step][node].transitions {
            acc += t.prob * f(t.to);
        }
        acc
    }

    /// Lists every violated lattice invariant; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.time.steps();
        if self.steps.len() != n + 1 {
            out.push(format!(
                "expected {} steps of nodes for N = {n}, found {}",
                n + 1,
                self.steps.len()
            ));
            return out;
        }
        if self.steps[0].len() != 1 {
            out.push(format!("step 0 must hold exactly one node, found {}", self.steps[0].len()));
        }
        for (i, nodes) in self.steps.iter().enumerate() {
            if nodes.is_empty() {
                out.push(format!("step {i} has no nodes"));
            }
            for (k, node) in nodes.iter().enumerate() {
                if !(node.payoff >= 0.0 && node.payoff.is_finite()) {
                    out.push(format!(
                        "step {i} node {k}: payoff {} violates nonnegativity",
                        node.payoff
                    ));
                }
                if i == n {
                    continue;
                }
                let next = self.steps[i + 1].len();
                let mut sum = 0.0;
                for t in &node.transitions {
                    if t.to >= next {
                        out.push(format!(
                            "step {i} node {k}: transition to missing node {} of step {}",
                            t.to,
                            i + 1
                        ));
                    }
                    if !(t.prob >= 0.0) {
                        out.push(format!("step {i} node {k}: negative probability {}", t.prob));
                    }
                    sum += t.prob;
                }
                if !((sum - 1.0).abs() <= PROBABILITY_SUM_TOL) {
                    out.push(format!(
                        "step {i} node {k}: outgoing probabilities sum to {sum}, not 1"
                    ));
                }
            }
        }
        out
    }
}

/// Builds one family of lattice models from [`ModelParams`].
pub trait ModelBuilder: Send + Sync {
    /// The `kind` string this builder answers to.
    fn kind(&self) -> &'static str;

    /// True for the two-state `1_{[0, rho)}` payoffs with a closed-form value.
    fn is_indicator(&self) -> bool {
        false
    }

    fn build(&self, params: &ModelParams, grid: &TimeGrid) -> Result<LatticeModel>;
}

pub struct ModelRegistry {
    builders: BTreeMap<&'static str, Box<dyn ModelBuilder>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// All built-in kinds.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(GbmCallBuilder);
        r.register(IndicatorBuilder::new(IndicatorLaw::Deterministic));
        r.register(IndicatorBuilder::new(IndicatorLaw::Exponential));
        r.register(ConstantBuilder);
        r
    }

    pub fn register<B: ModelBuilder + 'static>(&mut self, builder: B) {
        self.builders.insert(builder.kind(), Box::new(builder));
    }

    pub fn get(&self, kind: &str) -> Result<&dyn ModelBuilder> {
        self.builders
            .get(kind)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                registry: "model kind",
                name: kind.to_string(),
                known: self.kinds().join(", "),
            })
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, params: &ModelParams, grid: &TimeGrid) -> Result<LatticeModel> {
        self.get(&params.kind)?.build(params, grid)
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Builds a model with the standard registry.
pub fn build_model(params: &ModelParams, grid: &TimeGrid) -> Result<LatticeModel> {
    ModelRegistry::standard().build(params, grid)
}

pub(crate) fn model_id(params: &ModelParams, grid: &TimeGrid) -> String {
    let mut parts = Vec::new();
    let fields = [
        ("S0", params.spot),
        ("K", params.strike),
        ("sigma", params.sigma),
        ("r", params.rate),
        ("lambda", params.lambda),
        ("tstar", params.tstar),
    ];
    for (name, v) in fields {
        if let Some(v) = v {
            parts.push(format!("{name}={v}"));
        }
    }
    parts.push(format!("T={}", grid.horizon()));
    parts.push(format!("N={}", grid.steps()));
    format!("{}({})", params.kind, parts.join(","))
}
