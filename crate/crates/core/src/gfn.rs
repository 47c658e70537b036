//! The `GFN1` text format.
//!
//! ```text
//! gfn <dim> <spacing> <origin...> <shape...>
//! v v v ...        one grid row per line, row-major
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Values are written
//! with Rust's shortest round-trip float formatting, so write → read is exact.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridFunction};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse(text: &str) -> Result<GridFunction> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.first() != Some(&"gfn") {
        return Err(parse_err(hline, "header must start with `gfn`"));
    }
    let dim: usize = tok
        .get(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(hline, "bad dimension"))?;
    if !(1..=3).contains(&dim) {
        return Err(parse_err(hline, format!("unsupported dimension {dim}")));
    }
    if tok.len() != 3 + 2 * dim {
        return Err(parse_err(
            hline,
            format!("expected {} header fields, found {}", 3 + 2 * dim, tok.len()),
        ));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| parse_err(hline, format!("bad number {s:?}")))
    };
    let spacing = num(tok[2])?;
    let origin = tok[3..3 + dim].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
    let shape = tok[3 + dim..]
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| parse_err(hline, format!("bad extent {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let geom = Geometry::new(origin, spacing, shape).map_err(|e| parse_err(hline, e.to_string()))?;

    let mut values = Vec::with_capacity(geom.len());
    for (lno, line) in lines {
        for s in line.split_whitespace() {
            let v: f64 = s.parse().map_err(|_| parse_err(lno, format!("bad value {s:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(lno, format!("non-finite value {s}")));
            }
            if v < 0.0 {
                return Err(parse_err(lno, format!("negative value {s}")));
            }
            values.push(v);
        }
    }
    if values.len() != geom.len() {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("expected {} values, found {}", geom.len(), values.len()),
        ));
    }
    GridFunction::from_geometry(geom, values)
}

pub fn to_string(f: &GridFunction) -> String {
    let mut out = String::new();
    write!(out, "gfn {} {:?}", f.dim(), f.spacing()).unwrap();
    for o in f.origin() {
        write!(out, " {o:?}").unwrap();
    }
    for n in f.shape() {
        write!(out, " {n}").unwrap();
    }
    out.push('\n');
    let row = *f.shape().last().unwrap();
    for chunk in f.values().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read(mut r: impl Read) -> Result<GridFunction> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    parse(&s)
}

pub fn write(f: &GridFunction, mut w: impl Write) -> Result<()> {
    w.write_all(to_string(f).as_bytes())?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<GridFunction> {
    read(std::fs::File::open(path)?)
}

pub fn save(f: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_string(f))?;
    Ok(())
}
