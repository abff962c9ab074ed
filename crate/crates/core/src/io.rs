//! Surface CSV export and import.
//!
//! Header `i,t,node,state,j,y,J,D,W`; one row per (step, node, level) in
//! ascending order; floats printed with 17 significant digits. `D` is the
//! `left` marginal.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::VolumeGrid;
use crate::marginal::MarginalSurface;
use crate::model::LatticeModel;
use crate::solver::ValueSurface;

pub const SURFACE_HEADER: &str = "i,t,node,state,j,y,J,D,W";

pub fn write_surface_csv<W: Write>(
    out: &mut W,
    model: &LatticeModel,
    surface: &ValueSurface,
    marginal: &MarginalSurface,
) -> Result<()> {
    surface.check_model(model)?;
    let volume = surface.volume();
    writeln!(out, "{SURFACE_HEADER}")?;
    for i in 0..=model.step_count() {
        let t = model.time().time(i);
        for (k, node) in model.nodes(i).iter().enumerate() {
            let w = surface.unconstrained(i, k);
            for j in 0..volume.len() {
                writeln!(
                    out,
                    "{i},{t:.16e},{k},{},{j},{:.16e},{:.16e},{:.16e},{w:.16e}",
                    node.state,
                    volume.y(j),
                    surface.value(i, k, j),
                    marginal.value(i, k, j),
                )?;
            }
        }
    }
    Ok(())
}

pub fn surface_csv_string(model: &LatticeModel, surface: &ValueSurface, marginal: &MarginalSurface) -> Result<String> {
    let mut buf = Vec::new();
    write_surface_csv(&mut buf, model, surface, marginal)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

/// Reads `J` and `W` back for `model` on `volume`. Rows must appear in the
/// exported order and cover every cell exactly once.
pub fn read_surface_csv<R: BufRead>(input: R, model: &LatticeModel, volume: &VolumeGrid) -> Result<ValueSurface> {
    let n = model.step_count();
    let len = volume.len();
    let mut values: Vec<Vec<Vec<f64>>> = (0..=n).map(|i| vec![vec![0.0; len]; model.nodes(i).len()]).collect();
    let mut w: Vec<Vec<f64>> = (0..=n).map(|i| vec![0.0; model.nodes(i).len()]).collect();

    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != SURFACE_HEADER {
        return Err(Error::SurfaceFormat(format!("expected header `{SURFACE_HEADER}`")));
    }
    let mut expected = (0..=n).flat_map(|i| (0..model.nodes(i).len()).flat_map(move |k| (0..len).map(move |j| (i, k, j))));
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::SurfaceFormat(format!("row {}: expected 9 fields", row + 2)));
        }
        let index = |f: &str| f.parse::<usize>().map_err(|_| Error::SurfaceFormat(format!("row {}: bad index `{f}`", row + 2)));
        let number = |f: &str| f.parse::<f64>().map_err(|_| Error::SurfaceFormat(format!("row {}: bad number `{f}`", row + 2)));
        let cell = (index(fields[0])?, index(fields[2])?, index(fields[4])?);
        if expected.next() != Some(cell) {
            return Err(Error::SurfaceFormat(format!("row {}: unexpected cell {cell:?}", row + 2)));
        }
        let (i, k, j) = cell;
        values[i][k][j] = number(fields[6])?;
        w[i][k] = number(fields[8])?;
    }
    if expected.next().is_some() {
        return Err(Error::SurfaceFormat("file ends before every cell is listed".into()));
    }
    ValueSurface::from_parts(model.id(), *model.time(), *volume, values, w)
}
