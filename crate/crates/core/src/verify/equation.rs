//! Residuals of the backward equation, the chain-rule identity along a
//! control, and the optimality gap.

use rayon::prelude::*;

use super::{GridInfo, ResidualReport, ResidualStats};
use crate::error::{Error, Result};
use crate::marginal::MarginalSurface;
use crate::model::LatticeModel;
use crate::policy::PolicyTable;
use crate::solver::ValueSurface;

type Field = Vec<Vec<Vec<f64>>>;

fn check_inputs(model: &LatticeModel, surface: &ValueSurface, marginal: &MarginalSurface) -> Result<()> {
    surface.check_model(model)?;
    for i in 0..=model.step_count() {
        for k in 0..model.nodes(i).len() {
            if marginal.row(i, k).len() != surface.volume().len() {
                return Err(Error::GridMismatch(format!(
                    "marginal `{}` does not match the surface at step {i}",
                    marginal.stencil()
                )));
            }
        }
    }
    Ok(())
}

/// Backward sweep `F[i][k][j] = term(i, k, j) + E[F[i+1][.][j - u]]`, where
/// `term` returns the running integrand (already multiplied by `dt`) and
/// whether the control exercises.
fn sweep(model: &LatticeModel, levels: usize, term: impl Fn(usize, usize, usize) -> (f64, bool)) -> Field {
    let n = model.step_count();
    let mut field: Field = vec![Vec::new(); n + 1];
    field[n] = vec![vec![0.0; levels]; model.nodes(n).len()];
    for i in (0..n).rev() {
        let next = &field[i + 1];
        field[i] = (0..model.nodes(i).len())
            .map(|k| {
                (0..levels)
                    .map(|j| {
                        let (value, exercise) = term(i, k, j);
                        let to = if exercise { j - 1 } else { j };
                        value + model.expect(i, k, |m| next[m][to])
                    })
                    .collect()
            })
            .collect();
    }
    field
}

/// `R[i] = L dt (X(i) + D(i, y))_+ + E[R[i+1]]` at one fixed level `y_j`.
pub fn bspde_sweep(model: &LatticeModel, surface: &ValueSurface, marginal: &MarginalSurface, level: usize) -> Vec<Vec<f64>> {
    let dy = surface.volume().dy();
    let n = model.step_count();
    let mut r: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    r[n] = vec![0.0; model.nodes(n).len()];
    for i in (0..n).rev() {
        let next = &r[i + 1];
        r[i] = (0..model.nodes(i).len())
            .map(|k| {
                let drive = model.payoff(i, k) + marginal.value(i, k, level);
                dy * drive.max(0.0) + model.expect(i, k, |m| next[m])
            })
            .collect();
    }
    r
}

/// `|J - R|` over every step before maturity and every level of the
/// constrained region `y >= 1 - L T`, with `y` held fixed along the integral.
pub fn bspde_residual(model: &LatticeModel, surface: &ValueSurface, marginal: &MarginalSurface) -> Result<ResidualReport> {
    check_inputs(model, surface, marginal)?;
    let volume = surface.volume();
    let n = model.step_count();
    let top = n.min(volume.levels());
    let per_level: Vec<ResidualStats> = (0..=top)
        .into_par_iter()
        .map(|j| {
            let r = bspde_sweep(model, surface, marginal, j);
            let mut stats = ResidualStats::default();
            for (i, row) in r.iter().enumerate().take(n) {
                for (k, v) in row.iter().enumerate() {
                    stats.push(surface.value(i, k, j) - v);
                }
            }
            stats
        })
        .collect();
    let mut stats = ResidualStats::default();
    for s in &per_level {
        stats.merge(s);
    }
    Ok(stats.report(
        format!("bspde_residual[{}]", marginal.stencil()),
        f64::INFINITY,
        GridInfo::of(volume, n),
    ))
}

/// Right-hand side of the chain-rule identity
/// `E[sum L dt (X + D(y(r)))_+ - D(y(r)) u dt]` along `control`, from every
/// starting cell, and the statistics of `|J - RHS|` on the constrained region.
pub fn chain_rule_sweep(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    control: &PolicyTable,
) -> Result<(Field, ResidualStats)> {
    check_inputs(model, surface, marginal)?;
    let volume = *surface.volume();
    control.check_shape(model, &volume)?;
    let dy = volume.dy();
    let rhs = sweep(model, volume.len(), |i, k, j| {
        let exercise = control.exercises(i, k, j);
        if exercise && j == 0 {
            unreachable!("policy tables never exercise at j = 0");
        }
        let d = marginal.value(i, k, j);
        let positive = (model.payoff(i, k) + d).max(0.0);
        let term = if exercise { dy * (positive - d) } else { dy * positive };
        (term, exercise)
    });
    let mut stats = ResidualStats::default();
    for i in 0..model.step_count() {
        for k in 0..model.nodes(i).len() {
            for j in 0..=volume.levels().min(model.step_count()) {
                stats.push(surface.value(i, k, j) - rhs[i][k][j]);
            }
        }
    }
    Ok((rhs, stats))
}

pub fn chain_rule_check(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    control: &PolicyTable,
) -> Result<ResidualReport> {
    let (_, stats) = chain_rule_sweep(model, surface, marginal, control)?;
    Ok(stats.report(
        format!("chain_rule[{},{}]", marginal.stencil(), control.provenance()),
        f64::INFINITY,
        GridInfo::of(surface.volume(), model.step_count()),
    ))
}

/// `E[sum dt (L (X + D)_+ - (X + D) u)]` along `control` from every cell.
/// Nonnegative for every feasible control, zero exactly for optimal ones.
pub fn optimality_gap(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    control: &PolicyTable,
) -> Result<Field> {
    check_inputs(model, surface, marginal)?;
    let volume = *surface.volume();
    control.check_shape(model, &volume)?;
    let dy = volume.dy();
    Ok(sweep(model, volume.len(), |i, k, j| {
        let exercise = control.exercises(i, k, j);
        let drive = model.payoff(i, k) + marginal.value(i, k, j);
        let positive = drive.max(0.0);
        let term = if exercise { dy * (positive - drive) } else { dy * positive };
        (term, exercise)
    }))
}

/// Statistics of the optimality gap over the constrained region.
pub fn optimality_residual(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    control: &PolicyTable,
) -> Result<ResidualReport> {
    let gap = optimality_gap(model, surface, marginal, control)?;
    let mut stats = ResidualStats::default();
    for i in 0..model.step_count() {
        for k in 0..model.nodes(i).len() {
            for j in 0..=surface.volume().levels().min(model.step_count()) {
                stats.push(gap[i][k][j]);
            }
        }
    }
    Ok(stats.report(
        format!("optimality_gap[{},{}]", marginal.stencil(), control.provenance()),
        f64::INFINITY,
        GridInfo::of(surface.volume(), model.step_count()),
    ))
}
