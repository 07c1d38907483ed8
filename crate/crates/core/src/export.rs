//! CSV and density file output. Numbers are written with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::density::{GridDensity, GridSpec};
use crate::error::{Error, Result};
use crate::particle::TrajectoryRecord;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes named columns of equal length as CSV with a header row.
pub fn write_columns<W: Write>(mut w: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::invalid(format!("{} headers for {} columns", header.len(), columns.len())));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::invalid("columns differ in length"));
    }
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..rows {
        line.clear();
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&fmt_num(c[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// `time,leftmost,rightmost`.
pub fn write_trajectory<W: Write>(w: W, rec: &TrajectoryRecord) -> Result<()> {
    write_columns(w, &["time", "leftmost", "rightmost"], &[&rec.sample_times, &rec.leftmost, &rec.rightmost])
}

/// One row per sample time: `time,x1,...,xN`. Needs full snapshots.
pub fn write_trajectory_wide<W: Write>(mut w: W, rec: &TrajectoryRecord) -> Result<()> {
    let cfgs = rec
        .full_configs
        .as_ref()
        .ok_or_else(|| Error::invalid("trajectory was recorded without full configurations"))?;
    let n = rec.final_config.len();
    let header: Vec<String> = std::iter::once("time".to_string()).chain((1..=n).map(|k| format!("x{k}"))).collect();
    writeln!(w, "{}", header.join(","))?;
    for (t, c) in rec.sample_times.iter().zip(cfgs) {
        let row: Vec<String> = std::iter::once(*t).chain(c.positions().iter().copied()).map(fmt_num).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DensityHeader {
    x0: f64,
    dx: f64,
    count: usize,
    mass: f64,
}

/// A JSON header line `{"x0","dx","count","mass"}`, then CSV `x,value` at
/// cell centres.
pub fn write_density<W: Write>(mut w: W, f: &GridDensity) -> Result<()> {
    let header = DensityHeader {
        x0: f.x0(),
        dx: f.dx(),
        count: f.len(),
        mass: f.mass(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    let x: Vec<f64> = (0..f.len()).map(|i| f.center(i)).collect();
    write_columns(w, &["x", "value"], &[&x, f.values()])
}

pub fn read_density<R: BufRead>(r: R) -> Result<GridDensity> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .map_err(Error::from)
    };
    let header: DensityHeader = serde_json::from_str(&next("header line")?)?;
    let cols = next("column header")?;
    if cols.trim() != "x,value" {
        return Err(Error::Parse(format!("expected `x,value`, got `{cols}`")));
    }
    let mut values = Vec::with_capacity(header.count);
    for k in 0..header.count {
        let line = next(&format!("row {k}"))?;
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("row {k} has no comma")))?;
        values.push(v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {k}: {e}")))?);
    }
    let f = GridDensity::new(GridSpec::new(header.x0, header.dx, header.count)?, values)?;
    if (f.mass() - header.mass).abs() > 1e-12 * header.mass.abs().max(1e-300) {
        return Err(Error::Parse(format!("header mass {} but values give {}", header.mass, f.mass())));
    }
    Ok(f)
}
