//! Numerical verification of a value surface.
//!
//! Every check produces a [`ResidualReport`]; a report passes iff its maximum
//! residual is within its tolerance. Checks are registered by name in a
//! [`CheckRegistry`] and run against a shared [`VerifyContext`].

mod equation;
mod oracle;
mod structure;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use equation::{
    bspde_residual, bspde_sweep, chain_rule_check, chain_rule_sweep, optimality_gap, optimality_residual,
};
pub use oracle::{
    analytic_indicator_value, brute_force_root_values, brute_force_value, decision_cells, OracleKind,
    OracleValue, BRUTE_FORCE_MAX_CELLS,
};
pub use structure::{boundary_checks, marginal_checks, structural_checks};

use crate::config::ModelConfig;
use crate::error::Result;
use crate::grid::VolumeGrid;
use crate::marginal::{MarginalSurface, StencilRegistry};
use crate::model::LatticeModel;
use crate::policy::{DpArgmax, PolicyRule, PolicyTable};
use crate::solver::{solve_dp, ValueSurface};

/// Budget for identities that are exact in real arithmetic.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridInfo {
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(rename = "M")]
    pub levels: usize,
}

impl GridInfo {
    pub fn of(volume: &VolumeGrid, steps: usize) -> Self {
        Self {
            steps,
            levels: volume.levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub name: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub grid: GridInfo,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl ResidualReport {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Same statistics judged against a different tolerance.
    pub fn judged(mut self, name: impl Into<String>, tolerance: f64) -> Self {
        self.name = name.into();
        self.tolerance = tolerance;
        self.pass = self.max_residual <= tolerance;
        self
    }
}

/// Running max / mean of absolute residuals. NaN counts as an infinite residual.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualStats {
    max: f64,
    sum: f64,
    count: usize,
}

impl ResidualStats {
    #[inline]
    pub fn push(&mut self, residual: f64) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual.abs() };
        if r > self.max {
            self.max = r;
        }
        self.sum += r;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &ResidualStats) {
        self.max = self.max.max(other.max);
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn report(&self, name: impl Into<String>, tolerance: f64, grid: GridInfo) -> ResidualReport {
        ResidualReport {
            name: name.into(),
            max_residual: self.max,
            mean_residual: self.mean(),
            tolerance,
            pass: self.max <= tolerance,
            grid,
            seed: None,
        }
    }
}

/// Numeric knobs of the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Identities exact on the grid.
    pub exact: f64,
    /// Discretization budget of the same-step (`left`) backward-equation
    /// residual, in units of `L * dt * max X`.
    pub bspde_factor: f64,
    /// Required shrink factor of the `left` residual when `N` doubles.
    pub convergence_factor: f64,
    /// Number of random feasible controls in the chain-rule check.
    pub random_controls: usize,
    pub control_seed: u64,
    /// Largest policy table enumerated by the brute-force oracle.
    pub brute_force_cells: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: EXACT_TOL,
            bspde_factor: BSPDE_FACTOR,
            convergence_factor: 1.6,
            random_controls: 20,
            control_seed: 42,
            brute_force_cells: BRUTE_FORCE_MAX_CELLS,
        }
    }
}

/// Default `left`-stencil budget: the residual stays below
/// `BSPDE_FACTOR * L * dt * max X` on every shipped model.
pub const BSPDE_FACTOR: f64 = 1.0;

impl Tolerances {
    /// `C * L * dt * max X`, plus the exact-arithmetic budget.
    pub fn bspde_budget(&self, model: &LatticeModel, volume: &VolumeGrid) -> f64 {
        self.bspde_factor * volume.dy() * model.max_payoff() + self.exact
    }
}

pub struct VerifyContext<'a> {
    pub model: &'a LatticeModel,
    pub surface: &'a ValueSurface,
    /// One marginal per registered stencil, keyed by stencil name.
    pub marginals: BTreeMap<&'static str, MarginalSurface>,
    pub policy: PolicyTable,
    pub tolerances: Tolerances,
    /// Present when the model can be rebuilt at other resolutions.
    pub config: Option<&'a ModelConfig>,
}

impl<'a> VerifyContext<'a> {
    pub fn new(
        model: &'a LatticeModel,
        surface: &'a ValueSurface,
        tolerances: Tolerances,
        config: Option<&'a ModelConfig>,
    ) -> Result<Self> {
        surface.check_model(model)?;
        let mut marginals = BTreeMap::new();
        for stencil in StencilRegistry::standard().iter() {
            marginals.insert(stencil.name(), stencil.compute(model, surface)?);
        }
        let policy = DpArgmax.extract(model, surface, &marginals["predictable"])?;
        Ok(Self {
            model,
            surface,
            marginals,
            policy,
            tolerances,
            config,
        })
    }

    pub fn grid(&self) -> GridInfo {
        GridInfo::of(self.surface.volume(), self.model.step_count())
    }

    pub fn marginal(&self, stencil: &str) -> &MarginalSurface {
        &self.marginals[stencil]
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;

    /// Reports of this check; empty when it does not apply to the context.
    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>>;
}

struct Boundary;
struct Structure;
struct Marginals;
struct Bspde;
struct Convergence;
struct ChainRule;
struct Optimality;
struct BruteForce;
struct Analytic;

impl Check for Boundary {
    fn name(&self) -> &'static str {
        "boundary"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let mut out = Vec::new();
        for (n, d) in ctx.marginals.values().enumerate() {
            let reports = boundary_checks(ctx.model, ctx.surface, d, ctx.tolerances.exact)?;
            // the y = 1 value check does not depend on the stencil
            out.extend(reports.into_iter().filter(|r| n == 0 || r.name != "boundary_y1_value"));
        }
        Ok(out)
    }
}

impl Check for Structure {
    fn name(&self) -> &'static str {
        "structure"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        structural_checks(ctx.model, ctx.surface, ctx.tolerances.exact)
    }
}

impl Check for Marginals {
    fn name(&self) -> &'static str {
        "marginal"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let mut out = Vec::new();
        for d in ctx.marginals.values() {
            out.extend(marginal_checks(ctx.model, ctx.surface, d, ctx.tolerances.exact)?);
        }
        Ok(out)
    }
}

impl Check for Bspde {
    fn name(&self) -> &'static str {
        "bspde"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let budget = ctx.tolerances.bspde_budget(ctx.model, ctx.surface.volume());
        Ok(vec![
            bspde_residual(ctx.model, ctx.surface, ctx.marginal("left"))?.judged("bspde_residual[left]", budget),
            bspde_residual(ctx.model, ctx.surface, ctx.marginal("predictable"))?
                .judged("bspde_residual[predictable]", ctx.tolerances.exact),
        ])
    }
}

impl Check for Convergence {
    fn name(&self) -> &'static str {
        "convergence"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let Some(config) = ctx.config else {
            return Ok(vec![]);
        };
        let coarse = bspde_residual(ctx.model, ctx.surface, ctx.marginal("left"))?;
        let fine_config = config.refined(2);
        let (model, volume) = fine_config.build()?;
        let surface = solve_dp(&model, &volume)?;
        let d = crate::marginal::marginal_left(&model, &surface)?;
        let fine = bspde_residual(&model, &surface, &d)?;
        // nothing left to shrink once both residuals are at rounding level
        let exact = ctx.tolerances.exact;
        let ratio = if coarse.max_residual <= exact && fine.max_residual <= exact {
            0.0
        } else {
            fine.max_residual / coarse.max_residual
        };
        Ok(vec![ResidualReport {
            name: "bspde_convergence[left]".into(),
            max_residual: ratio,
            mean_residual: ratio,
            tolerance: 1.0 / ctx.tolerances.convergence_factor,
            pass: ratio <= 1.0 / ctx.tolerances.convergence_factor,
            grid: ctx.grid(),
            seed: None,
        }])
    }
}

impl Check for ChainRule {
    fn name(&self) -> &'static str {
        "chain_rule"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let tol = ctx.tolerances;
        let d = ctx.marginal("predictable");
        let (model, surface) = (ctx.model, ctx.surface);
        let volume = surface.volume();
        let mut out = vec![
            chain_rule_check(model, surface, d, &PolicyTable::never(model, volume))?
                .judged("chain_rule[zero-control]", tol.exact),
            chain_rule_check(model, surface, d, &ctx.policy)?.judged("chain_rule[dp-policy]", tol.exact),
        ];
        let mut random = ResidualStats::default();
        let mut random_left = ResidualStats::default();
        for c in 0..tol.random_controls {
            let control = PolicyTable::random(model, volume, tol.control_seed, c as u64);
            random.merge(&chain_rule_sweep(model, surface, d, &control)?.1);
            random_left.merge(&chain_rule_sweep(model, surface, ctx.marginal("left"), &control)?.1);
        }
        out.push(
            random
                .report("chain_rule[random-controls]", tol.exact, ctx.grid())
                .with_seed(tol.control_seed),
        );
        out.push(
            random_left
                .report("chain_rule[random-controls,left]", 2.0 * tol.bspde_budget(model, volume), ctx.grid())
                .with_seed(tol.control_seed),
        );
        Ok(out)
    }
}

impl Check for Optimality {
    fn name(&self) -> &'static str {
        "optimality"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let tol = ctx.tolerances;
        let d = ctx.marginal("predictable");
        let (model, surface) = (ctx.model, ctx.surface);
        let mut out = vec![optimality_residual(model, surface, d, &ctx.policy)?.judged("optimality_gap[dp-policy]", tol.exact)];
        // the gap of any feasible control is nonnegative
        let mut negative = ResidualStats::default();
        for c in 0..tol.random_controls {
            let control = PolicyTable::random(model, surface.volume(), tol.control_seed, c as u64);
            let gaps = optimality_gap(model, surface, d, &control)?;
            for v in gaps.iter().flatten().flatten() {
                negative.push((-v).max(0.0));
            }
        }
        out.push(
            negative
                .report("optimality_gap_nonnegative[random-controls]", tol.exact, ctx.grid())
                .with_seed(tol.control_seed),
        );
        Ok(out)
    }
}

impl Check for BruteForce {
    fn name(&self) -> &'static str {
        "brute_force"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let volume = ctx.surface.volume();
        if decision_cells(ctx.model, volume) > ctx.tolerances.brute_force_cells {
            return Ok(vec![]);
        }
        let oracle = brute_force_root_values(ctx.model, volume, ctx.tolerances.brute_force_cells)?;
        let mut stats = ResidualStats::default();
        for (j, v) in oracle.iter().enumerate() {
            stats.push(v - ctx.surface.value(0, 0, j));
        }
        Ok(vec![stats.report("brute_force_equivalence", 1e-12, ctx.grid())])
    }
}

impl Check for Analytic {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn run(&self, ctx: &VerifyContext<'_>) -> Result<Vec<ResidualReport>> {
        let Some(config) = ctx.config else {
            return Ok(vec![]);
        };
        if !config.is_indicator() {
            return Ok(vec![]);
        }
        let params = config.params();
        let (model, surface) = (ctx.model, ctx.surface);
        let volume = surface.volume();
        let mut stats = ResidualStats::default();
        for i in 0..=model.step_count() {
            let t = model.time().time(i);
            for (k, node) in model.nodes(i).iter().enumerate() {
                let alive = node.payoff > 0.0;
                for j in 0..volume.len() {
                    let exact = analytic_indicator_value(&params, model.time(), volume.rate_cap(), t, volume.y(j), alive)?;
                    stats.push(surface.value(i, k, j) - exact.value);
                }
            }
        }
        Ok(vec![stats.report("closed_form_indicator", volume.dy() + ctx.tolerances.exact, ctx.grid())])
    }
}

pub struct CheckRegistry {
    checks: Vec<Box<dyn Check>>,
}

impl CheckRegistry {
    pub fn empty() -> Self {
        Self { checks: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Boundary);
        r.register(Structure);
        r.register(Marginals);
        r.register(Bspde);
        r.register(Convergence);
        r.register(ChainRule);
        r.register(Optimality);
        r.register(BruteForce);
        r.register(Analytic);
        r
    }

    /// Later registrations with an existing name replace the earlier check.
    pub fn register<C: Check + 'static>(&mut self, check: C) {
        if let Some(slot) = self.checks.iter_mut().find(|c| c.name() == check.name()) {
            *slot = Box::new(check);
        } else {
            self.checks.push(Box::new(check));
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checks.iter().map(|c| c.name()).collect()
    }

    pub fn run(&self, ctx: &VerifyContext<'_>) -> Result<VerificationReport> {
        let mut checks = Vec::new();
        for check in &self.checks {
            checks.extend(check.run(ctx)?);
        }
        let pass = checks.iter().all(|c| c.pass);
        Ok(VerificationReport {
            model: ctx.model.id().to_string(),
            grid: ctx.grid(),
            pass,
            checks,
        })
    }
}

impl Default for CheckRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub model: String,
    pub grid: GridInfo,
    pub pass: bool,
    pub checks: Vec<ResidualReport>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ResidualReport> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ResidualReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs the standard suite.
pub fn verify(
    model: &LatticeModel,
    surface: &ValueSurface,
    tolerances: Tolerances,
    config: Option<&ModelConfig>,
) -> Result<VerificationReport> {
    let ctx = VerifyContext::new(model, surface, tolerances, config)?;
    CheckRegistry::standard().run(&ctx)
}
