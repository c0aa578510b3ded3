//! File formats.
//!
//! - `samples.csv`: header `x[,y],t,u`, one observation per row.
//! - `*_grid.csv`: header `x[,y],t,u`, one row per grid node in canonical
//!   order (t outermost, x innermost); the domain is reconstructed on read
//!   and the node coordinates are required to match it bit for bit.
//! - `net.txt`: `widths ...` / `omega0 ...` / `seed ...` header lines, then
//!   one parameter per line.
//! - `model.json`: a [`ModelFile`] (library, coefficients, domain, optional
//!   initial condition and benchmark tag).
//! - `trace.csv`, `design.csv`: plot-ready exports.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so every
//! write/read cycle reproduces the exact bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cpde_core::{
    DesignMatrix, GriddedField, InitialCondition, Point, Sample, SpaceTimeDomain, StructuralModel,
    SurrogateNet, TrainTrace,
};

use crate::error::{CliError, Result};

pub fn write_samples_csv(path: &Path, samples: &[Sample], dim: usize) -> Result<()> {
    let mut out = String::new();
    out.push_str(if dim == 2 { "x,y,t,u\n" } else { "x,t,u\n" });
    for s in samples {
        if dim == 2 {
            writeln!(out, "{},{},{},{}", s.point.x, s.point.y, s.point.t, s.u)
                .expect("string write");
        } else {
            writeln!(out, "{},{},{}", s.point.x, s.point.t, s.u).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a samples file; the header decides the dimension.
pub fn read_samples_csv(path: &Path) -> Result<(Vec<Sample>, usize)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(1, "empty samples file"))?;
    let dim = match header.trim() {
        "x,t,u" => 1,
        "x,y,t,u" => 2,
        other => {
            return Err(CliError::parse(
                1,
                &format!("expected header `x,t,u` or `x,y,t,u`, got `{other}`"),
            ))
        }
    };
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(CliError::parse(
                lineno,
                &format!("expected {} fields, got {}", dim + 2, fields.len()),
            ));
        }
        let mut vals = [0.0f64; 4];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f.trim().parse().map_err(|_| {
                CliError::parse(lineno, &format!("cannot parse `{f}` as a number"))
            })?;
        }
        let (point, u) = if dim == 2 {
            (Point::xyt(vals[0], vals[1], vals[2]), vals[3])
        } else {
            (Point::xt(vals[0], vals[1]), vals[2])
        };
        samples.push(Sample { point, u });
    }
    Ok((samples, dim))
}

pub fn write_grid_csv(path: &Path, field: &GriddedField) -> Result<()> {
    let d = &field.domain;
    let mut out = String::new();
    out.push_str(if d.dim == 2 { "x,y,t,u\n" } else { "x,t,u\n" });
    let mut i = 0;
    for it in 0..d.nt {
        for iy in 0..d.ny() {
            for ix in 0..d.nx[0] {
                let p = field.node_point(ix, iy, it);
                if d.dim == 2 {
                    writeln!(out, "{},{},{},{}", p.x, p.y, p.t, field.values[i])
                        .expect("string write");
                } else {
                    writeln!(out, "{},{},{}", p.x, p.t, field.values[i]).expect("string write");
                }
                i += 1;
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a grid file and rebuild its domain from the node coordinates. The
/// rows must enumerate a full tensor grid in canonical order.
pub fn read_grid_csv(path: &Path) -> Result<GriddedField> {
    let (samples, dim) = read_samples_csv(path)?;
    if samples.is_empty() {
        return Err(CliError::parse(1, "grid file has no rows"));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ts: Vec<f64> = Vec::new();
    for s in &samples {
        push_unique(&mut xs, s.point.x);
        push_unique(&mut ys, s.point.y);
        push_unique(&mut ts, s.point.t);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (nx, ny, nt) = (xs.len(), ys.len(), ts.len());
    if nx * ny * nt != samples.len() {
        return Err(CliError::usage(&format!(
            "grid file is not a full tensor grid: {} rows vs {}x{}x{} nodes",
            samples.len(),
            nx,
            ny,
            nt
        )));
    }
    let domain = if dim == 2 {
        SpaceTimeDomain::dim2(
            [xs[0], ys[0]],
            [xs[nx - 1], ys[ny - 1]],
            ts[nt - 1],
            [nx, ny],
            nt,
        )
    } else {
        SpaceTimeDomain::dim1(xs[0], xs[nx - 1], ts[nt - 1], nx, nt)
    }
    .map_err(CliError::from)?;

    let mut values = vec![0.0; samples.len()];
    for (row, s) in samples.iter().enumerate() {
        // canonical order check: recompute the node for this row index
        let ix = row % nx;
        let iy = (row / nx) % ny;
        let it = row / (nx * ny);
        let expect_x = domain.x_lo[0] + ix as f64 * domain.dx(0);
        let expect_t = it as f64 * domain.dt();
        if s.point.x != expect_x || s.point.t != expect_t {
            return Err(CliError::parse(
                row + 2,
                "grid rows are not in canonical node order",
            ));
        }
        if dim == 2 {
            let expect_y = domain.x_lo[1] + iy as f64 * domain.dx(1);
            if s.point.y != expect_y {
                return Err(CliError::parse(
                    row + 2,
                    "grid rows are not in canonical node order",
                ));
            }
        }
        values[row] = s.u;
    }
    GriddedField::new(domain, values).map_err(CliError::from)
}

fn push_unique(v: &mut Vec<f64>, x: f64) {
    if !v.iter().any(|&y| y == x) {
        v.push(x);
    }
}

/// Serialized structural model with everything needed to re-solve it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: StructuralModel,
    pub domain: SpaceTimeDomain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_condition: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
}

pub fn write_model_json(path: &Path, file: &ModelFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file)
        .map_err(|e| CliError::usage(&format!("model serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn read_model_json(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(e.line(), &e.to_string()))
}

pub fn write_net(path: &Path, net: &SurrogateNet) -> Result<()> {
    let mut out = String::new();
    out.push_str("widths");
    for w in net.widths() {
        write!(out, " {w}").expect("string write");
    }
    out.push('\n');
    writeln!(out, "omega0 {}", net.omega0()).expect("string write");
    writeln!(out, "seed {}", net.seed()).expect("string write");
    let (shift, scale) = net.input_transform();
    writeln!(
        out,
        "input_map {} {} {} {} {} {}",
        shift[0], shift[1], shift[2], scale[0], scale[1], scale[2]
    )
    .expect("string write");
    for p in net.params() {
        writeln!(out, "{p}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_net(path: &Path) -> Result<SurrogateNet> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let widths: Vec<usize> = {
        let (_, line) = lines
            .next()
            .ok_or_else(|| CliError::parse(1, "empty checkpoint"))?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some("widths") {
            return Err(CliError::parse(1, "expected `widths ...`"));
        }
        toks.map(|t| {
            t.parse()
                .map_err(|_| CliError::parse(1, &format!("bad width `{t}`")))
        })
        .collect::<Result<Vec<usize>>>()?
    };
    let omega0: f64 = {
        let (_, line) = lines
            .next()
            .ok_or_else(|| CliError::parse(2, "missing omega0 line"))?;
        let rest = line
            .strip_prefix("omega0 ")
            .ok_or_else(|| CliError::parse(2, "expected `omega0 <value>`"))?;
        rest.trim()
            .parse()
            .map_err(|_| CliError::parse(2, "bad omega0"))?
    };
    let _seed_line = lines
        .next()
        .ok_or_else(|| CliError::parse(3, "missing seed line"))?;
    let mut transform: Option<([f64; 3], [f64; 3])> = None;
    let mut params = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("input_map ") {
            let vals: Vec<f64> = rest
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| CliError::parse(idx + 1, &format!("bad input_map `{t}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 6 {
                return Err(CliError::parse(idx + 1, "input_map needs 6 values"));
            }
            transform = Some(([vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]]));
            continue;
        }
        params.push(line.parse().map_err(|_| {
            CliError::parse(idx + 1, &format!("bad parameter `{line}`"))
        })?);
    }
    let mut net = SurrogateNet::from_params(widths, omega0, params).map_err(CliError::from)?;
    if let Some((shift, scale)) = transform {
        net.set_input_transform(shift, scale);
    }
    Ok(net)
}

pub fn write_trace_csv(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut out = String::new();
    out.push_str("epoch,data,residual,l1,total");
    for key in &trace.op_keys {
        write!(out, ",alpha[{key}]").expect("string write");
    }
    out.push('\n');
    for r in &trace.records {
        write!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.data, r.residual, r.l1, r.total
        )
        .expect("string write");
        for a in &r.alpha {
            write!(out, ",{a}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Header row is the operator ids with the target column `b` last.
pub fn write_design_csv(path: &Path, dm: &DesignMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&dm.op_keys.join(","));
    out.push_str(",b\n");
    for i in 0..dm.n {
        for j in 0..dm.m {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", dm.a[i * dm.m + j]).expect("string write");
        }
        writeln!(out, ",{}", dm.b[i]).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}
