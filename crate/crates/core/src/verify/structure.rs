//! Boundary conditions and shape properties of `J` and `D`.

use super::{GridInfo, ResidualReport, ResidualStats};
use crate::error::Result;
use crate::marginal::MarginalSurface;
use crate::model::LatticeModel;
use crate::solver::{forward_max_payoff, unconstrained_values, ValueSurface};

/// (a) `J(t, 1) = 0`; (b) `D(t, 1) <= -X(t)`; (c) `D(t, 1 - L(T - t)) = 0`.
///
/// (c) also checks the one-sided difference of `J` into the unconstrained
/// region, `(J(y_d) - J(y_d - dy)) / dy`, wherever that level is on the grid.
pub fn boundary_checks(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    exact: f64,
) -> Result<Vec<ResidualReport>> {
    surface.check_model(model)?;
    let volume = surface.volume();
    let n = model.step_count();
    let grid = GridInfo::of(volume, n);
    let stencil = marginal.stencil();

    let mut value = ResidualStats::default();
    let mut y1 = ResidualStats::default();
    let mut diagonal = ResidualStats::default();
    for i in 0..=n {
        for k in 0..model.nodes(i).len() {
            value.push(surface.value(i, k, 0));
            if i == n {
                continue;
            }
            y1.push((marginal.value(i, k, 0) + model.payoff(i, k)).max(0.0));
            let jd = n - i;
            if jd <= volume.levels() {
                diagonal.push(marginal.value(i, k, jd));
                if jd < volume.levels() {
                    diagonal.push((surface.value(i, k, jd) - surface.value(i, k, jd + 1)) / volume.dy());
                }
            }
        }
    }
    Ok(vec![
        value.report("boundary_y1_value", 0.0, grid),
        y1.report(format!("boundary_y1_marginal[{stencil}]"), exact, grid),
        diagonal.report(format!("boundary_diagonal_marginal[{stencil}]"), 0.0, grid),
    ])
}

/// Terminal zero, monotonicity and concavity in `y`, the Lipschitz bound,
/// the supermartingale property in `t`, and `J = W` on the unconstrained region.
pub fn structural_checks(model: &LatticeModel, surface: &ValueSurface, exact: f64) -> Result<Vec<ResidualReport>> {
    surface.check_model(model)?;
    let volume = *surface.volume();
    let n = model.step_count();
    let grid = GridInfo::of(&volume, n);
    let w = unconstrained_values(model, &volume)?;
    let z = forward_max_payoff(model);
    let len = volume.len();

    let mut terminal = ResidualStats::default();
    let mut monotone = ResidualStats::default();
    let mut concave = ResidualStats::default();
    let mut lipschitz = ResidualStats::default();
    let mut supermartingale = ResidualStats::default();
    let mut identity = ResidualStats::default();

    for k in 0..model.nodes(n).len() {
        for &v in surface.row(n, k) {
            terminal.push(v);
        }
    }
    for i in 0..=n {
        for k in 0..model.nodes(i).len() {
            let row = surface.row(i, k);
            for j in 0..len {
                if j >= 1 {
                    monotone.push((row[j - 1] - row[j]).max(0.0));
                }
                if j >= 1 && j + 1 < len {
                    concave.push((row[j - 1] + row[j + 1] - 2.0 * row[j]).max(0.0));
                }
                if j + 1 < len {
                    lipschitz.push(((row[j] - row[j + 1]).abs() - volume.dy() * z[i][k]).max(0.0));
                }
                if volume.is_unconstrained(i, j) {
                    identity.push(row[j] - w.value(i, k));
                }
                if i < n {
                    let ahead = model.expect(i, k, |m| surface.value(i + 1, m, j));
                    supermartingale.push((ahead - row[j]).max(0.0));
                }
            }
        }
    }
    Ok(vec![
        terminal.report("terminal_zero", 0.0, grid),
        monotone.report("monotone_in_y", exact, grid),
        concave.report("concave_in_y", exact, grid),
        lipschitz.report("lipschitz_forward_max", exact, grid),
        supermartingale.report("value_supermartingale", exact, grid),
        identity.report("unconstrained_identity", 0.0, grid),
    ])
}

/// `D <= 0`, `D` nonincreasing in `y`, and `D(., y)` a submartingale in `t`.
pub fn marginal_checks(
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
    exact: f64,
) -> Result<Vec<ResidualReport>> {
    surface.check_model(model)?;
    let n = model.step_count();
    let grid = GridInfo::of(surface.volume(), n);
    let stencil = marginal.stencil();
    let mut sign = ResidualStats::default();
    let mut monotone = ResidualStats::default();
    let mut submartingale = ResidualStats::default();
    for i in 0..=n {
        for k in 0..model.nodes(i).len() {
            let row = marginal.row(i, k);
            for j in 0..row.len() {
                sign.push(row[j].max(0.0));
                if j >= 1 {
                    monotone.push((row[j - 1] - row[j]).max(0.0));
                }
                if i < n {
                    let ahead = model.expect(i, k, |m| marginal.value(i + 1, m, j));
                    submartingale.push((row[j] - ahead).max(0.0));
                }
            }
        }
    }
    Ok(vec![
        sign.report(format!("marginal_nonpositive[{stencil}]"), exact, grid),
        monotone.report(format!("marginal_monotone_in_y[{stencil}]"), exact, grid),
        submartingale.report(format!("marginal_submartingale[{stencil}]"), exact, grid),
    ])
}
