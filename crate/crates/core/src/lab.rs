//! Scenario generators, parameter sweeps and log-log slope fits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{Geometry, GridFunction};
use crate::means::MeanParams;
use crate::stability::{certify_main, StabilityReport};
use crate::supconv::sup_convolution;

const MIN_CELLS: usize = 10;

/// `1_{[0, len]}` on `round(len/spacing)` cells.
pub fn indicator(len: f64, spacing: f64) -> Result<GridFunction> {
    let n = cells(len, spacing)?;
    GridFunction::line(0.0, spacing, vec![1.0; n])
}

/// Tent of height 1 on `[0, len]`.
pub fn hat(len: f64, spacing: f64) -> Result<GridFunction> {
    let n = cells(len, spacing)?;
    let half = 0.5 * len;
    let vals = (0..n).map(|i| 1.0 - ((i as f64 + 0.5) * spacing - half).abs() / half).collect();
    GridFunction::line(0.0, spacing, vals)
}

/// `(1 - x²)_+` on `[-1, 1]`; concave, hence p-concave for every `p ≤ 1`.
pub fn parabola_bump(spacing: f64) -> Result<GridFunction> {
    let n = cells(2.0, spacing)?;
    let vals = (0..n)
        .map(|i| {
            let x = -1.0 + (i as f64 + 0.5) * spacing;
            (1.0 - x * x).max(0.0)
        })
        .collect();
    GridFunction::line(-1.0, spacing, vals)
}

/// `exp(-|x|²/(2σ²))` on a square grid of `2·half_cells` cells per side
/// centered at the origin.
pub fn gaussian_2d(sigma: f64, spacing: f64, half_cells: usize) -> Result<GridFunction> {
    if !(sigma > 0.0) || half_cells == 0 {
        return Err(invalid("sigma and the grid size must be positive"));
    }
    let o = -(half_cells as f64) * spacing;
    let geom = Geometry::new(vec![o, o], spacing, vec![2 * half_cells, 2 * half_cells])?;
    GridFunction::from_fn(geom, |x| (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * sigma * sigma)).exp())
}

/// A sum of two to four random anisotropic Gaussian blobs on a 32×32 grid,
/// truncated below `1e-6`.
pub fn random_blobs_2d(seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = Geometry::new(vec![0.0, 0.0], 1.0 / 32.0, vec![32, 32])?;
    let k = rng.gen_range(2..=4);
    let blobs: Vec<[f64; 5]> = (0..k)
        .map(|_| {
            [
                rng.gen_range(0.2..0.8),
                rng.gen_range(0.2..0.8),
                rng.gen_range(0.04..0.15),
                rng.gen_range(0.04..0.15),
                rng.gen_range(0.3..1.0),
            ]
        })
        .collect();
    GridFunction::from_fn(geom, |x| {
        let v: f64 = blobs
            .iter()
            .map(|b| {
                let dx = (x[0] - b[0]) / b[2];
                let dy = (x[1] - b[1]) / b[3];
                b[4] * (-0.5 * (dx * dx + dy * dy)).exp()
            })
            .sum();
        if v < 1e-6 { 0.0 } else { v }
    })
}

fn cells(len: f64, spacing: f64) -> Result<usize> {
    if !(spacing > 0.0 && len > 0.0) {
        return Err(invalid("lengths and spacing must be positive"));
    }
    let n = (len / spacing).round() as usize;
    if n < MIN_CELLS {
        return Err(invalid(format!(
            "spacing {spacing} leaves {n} cells on an interval of length {len}; need at least {MIN_CELLS}"
        )));
    }
    Ok(n)
}

/// The near-equality triple of the sharpness family.
#[derive(Debug, Clone)]
pub struct SharpnessTriple {
    pub f: GridFunction,
    pub g: GridFunction,
    pub h: GridFunction,
    /// `√δ₀`.
    pub s: f64,
    /// Snapped lengths of the supports of `f`, `g`, `h`.
    pub lengths: [f64; 3],
}

/// `f = 1_{[0,Lf]}/Lf`, `g = 1_{[0,Lg]}/Lg`, `h = (Lf·Lg)^{-1/2}·1_{[0,(Lf+Lg)/2]}`
/// with `Lf ≈ 1+s`, `Lg ≈ 1/(1+s)`, `s = √δ₀`.
///
/// `Lf` snaps to the nearest cell count and `Lg` to the nearest count making
/// the two counts' sum even, so the right end of `h` is a cell boundary.
/// The height of `h` is the geometric mean of the heights of `f` and `g`,
/// which is 1 before snapping; `h` is then `M*_{1/2,0}(f, g)` and satisfies
/// the hypothesis for every `p ≤ 0`, and `δ` is the AM/GM gap of the snapped
/// lengths instead of a multiple of the spacing.
pub fn gen_sharpness_pair(delta0: f64, spacing: f64) -> Result<SharpnessTriple> {
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(invalid(format!("delta0 must be positive, got {delta0}")));
    }
    let s = delta0.sqrt();
    let nf = cells(1.0 + s, spacing)?;
    let target = 1.0 / (1.0 + s) / spacing;
    let lo = target.floor() as usize;
    // the two counts of the right parity bracketing the target
    let (a, b) = if (nf + lo) % 2 == 0 { (lo, lo + 2) } else { (lo.saturating_sub(1), lo + 1) };
    let ng = if target - a as f64 <= b as f64 - target { a } else { b };
    if ng < MIN_CELLS {
        return Err(invalid(format!("spacing {spacing} leaves {ng} cells for g; need at least {MIN_CELLS}")));
    }
    let nh = (nf + ng) / 2;
    let (lf, lg) = (nf as f64 * spacing, ng as f64 * spacing);
    let f = GridFunction::line(0.0, spacing, vec![1.0 / lf; nf])?;
    let g = GridFunction::line(0.0, spacing, vec![1.0 / lg; ng])?;
    let h = GridFunction::line(0.0, spacing, vec![1.0 / (lf * lg).sqrt(); nh])?;
    Ok(SharpnessTriple { f, g, h, s, lengths: [lf, lg, nh as f64 * spacing] })
}

/// `max(h, M*(f, g))`, the least function above `h` satisfying the
/// hypothesis for `(f, g)`.
pub fn admissible_h(f: &GridFunction, g: &GridFunction, h: &GridFunction, params: &MeanParams) -> Result<GridFunction> {
    sup_convolution(f, g, params)?.pointwise_max(h)
}

/// A dent: the cells whose centers lie in the box of side `width` centered
/// at `position` are multiplied by `1 - depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    pub position: Vec<f64>,
    pub width: f64,
    pub depth: f64,
}

impl Hole {
    pub fn new(position: Vec<f64>, width: f64, depth: f64) -> Self {
        Self { position, width, depth }
    }

    fn covers(&self, x: &[f64]) -> bool {
        let r = 0.5 * self.width;
        x.iter().zip(&self.position).all(|(a, c)| *a >= c - r && *a < c + r)
    }

    fn overlaps(&self, other: &Hole) -> bool {
        let r = 0.5 * (self.width + other.width);
        self.position.iter().zip(&other.position).all(|(a, b)| (a - b).abs() < r)
    }
}

/// `base` with the given dents. Holes must lie in the support of `base`
/// and must not overlap.
pub fn gen_dented(base: &GridFunction, holes: &[Hole]) -> Result<GridFunction> {
    for (i, a) in holes.iter().enumerate() {
        if a.position.len() != base.dim() {
            return Err(invalid("hole position has the wrong dimension"));
        }
        if !(a.width > 0.0) || !(0.0..=1.0).contains(&a.depth) {
            return Err(invalid("holes need positive width and depth in [0, 1]"));
        }
        if holes[..i].iter().any(|b| a.overlaps(b)) {
            return Err(invalid("holes overlap"));
        }
    }
    let geom = base.geometry();
    let mut vals = base.values().to_vec();
    for hole in holes {
        let mut hit = 0;
        for (k, v) in vals.iter_mut().enumerate() {
            if hole.covers(&geom.center(k)) {
                if *v <= 0.0 {
                    return Err(invalid("hole leaves the support of the base function"));
                }
                *v *= 1.0 - hole.depth;
                hit += 1;
            }
        }
        if hit == 0 {
            return Err(invalid("hole covers no cell center"));
        }
    }
    GridFunction::from_geometry(geom.clone(), vals)
}

/// `1_{[0,1]} + eps·1_{[v,v+1]}`.
pub fn gen_two_bump(eps: f64, v: f64, spacing: f64) -> Result<GridFunction> {
    if !(v > 2.0) {
        return Err(invalid(format!("the far bump needs v > 2, got {v}")));
    }
    if !(eps >= 0.0) {
        return Err(invalid(format!("eps must be nonnegative, got {eps}")));
    }
    let n = cells(v + 1.0, spacing)?;
    let vals = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * spacing;
            if x < 1.0 {
                1.0
            } else if x >= v && x < v + 1.0 {
                eps
            } else {
                0.0
            }
        })
        .collect();
    GridFunction::line(0.0, spacing, vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// The sharpness triple, `δ₀` as given.
    Sharpness,
    /// Indicator of `[0, 1]` with a centered full-depth hole of width `δ₀`.
    Dented,
    /// Two bumps at distance 50, far height `δ₀`.
    TwoBump,
    /// Hat `f` against a seeded multiplicative perturbation `g` of size `δ₀`.
    Perturbed,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Sharpness => "sharpness",
            Family::Dented => "dented",
            Family::TwoBump => "two-bump",
            Family::Perturbed => "perturbed",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sharpness" => Ok(Family::Sharpness),
            "dented" => Ok(Family::Dented),
            "two-bump" => Ok(Family::TwoBump),
            "perturbed" => Ok(Family::Perturbed),
            _ => Err(invalid(format!("unknown family {s:?}"))),
        }
    }
}

/// Builds the `(f, g, h)` of one sweep row.
pub fn family_triple(
    family: Family,
    delta0: f64,
    spacing: f64,
    params: &MeanParams,
    seed: u64,
) -> Result<(GridFunction, GridFunction, GridFunction)> {
    let self_triple = |f: GridFunction| -> Result<_> {
        let h = sup_convolution(&f, &f, params)?;
        Ok((f.clone(), f, h))
    };
    match family {
        Family::Sharpness => {
            let t = gen_sharpness_pair(delta0, spacing)?;
            let h = admissible_h(&t.f, &t.g, &t.h, params)?;
            Ok((t.f, t.g, h))
        }
        Family::Dented => {
            let base = indicator(1.0, spacing)?;
            self_triple(gen_dented(&base, &[Hole::new(vec![0.5], delta0, 1.0)])?)
        }
        Family::TwoBump => self_triple(gen_two_bump(delta0, 50.0, spacing)?),
        Family::Perturbed => {
            let f = hat(1.0, spacing)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = f.values().iter().map(|v| v * (1.0 + delta0 * rng.gen_range(-1.0..1.0))).collect();
            let g = GridFunction::from_geometry(f.geometry().clone(), vals)?;
            let g = g.scale(f.integral() / g.integral())?;
            let h = sup_convolution(&f, &g, params)?;
            Ok((f, g, h))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub family: Family,
    pub delta0: f64,
    pub delta: f64,
    pub mass_f: f64,
    pub symdiff_distance: f64,
    pub linear_gap: f64,
    pub main_distance: f64,
    pub ratio_sqrt: f64,
    pub ratio_linear: f64,
    pub ratio_main: f64,
    pub shave_removed: f64,
    pub best_shift: Vec<i64>,
    pub seed: u64,
    pub valid: bool,
    pub runtime_ms: f64,
}

impl SweepRow {
    fn from_report(family: Family, index: usize, delta0: f64, seed: u64, r: &StabilityReport, ms: f64) -> Self {
        Self {
            scenario: format!("{}-{index:03}", family.name()),
            family,
            delta0,
            delta: r.delta,
            mass_f: r.mass_f,
            symdiff_distance: r.symdiff_distance.unwrap_or(f64::NAN),
            linear_gap: r.linear_gap.unwrap_or(f64::NAN),
            main_distance: r.main_distance.unwrap_or(f64::NAN),
            ratio_sqrt: r.ratio_sqrt.unwrap_or(f64::NAN),
            ratio_linear: r.ratio_linear.unwrap_or(f64::NAN),
            ratio_main: r.ratio_main.unwrap_or(f64::NAN),
            shave_removed: r.shave_removed.unwrap_or(f64::NAN),
            best_shift: r.best_shift.clone().unwrap_or_default(),
            seed,
            valid: r.valid(),
            runtime_ms: ms,
        }
    }
}

/// Seed of row `index` derived from the sweep seed.
pub fn row_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `certify_main` on each `δ₀` of the family (rows in parallel) and
/// returns rows sorted by `(family, δ₀)`.
pub fn sweep(
    family: Family,
    delta0s: &[f64],
    params: &MeanParams,
    spacing: f64,
    c: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = delta0s
        .par_iter()
        .enumerate()
        .map(|(i, &d0)| {
            let start = Instant::now();
            let s = row_seed(seed, i);
            let (f, g, h) = family_triple(family, d0, spacing, params, s)?;
            let r = certify_main(&f, &g, &h, params, c)?;
            Ok(SweepRow::from_report(family, i, d0, s, &r, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.family.cmp(&b.family).then(a.delta0.total_cmp(&b.delta0)));
    Ok(rows)
}

/// Column names of the sweep CSV. `runtime_ms` is appended only when timing
/// is requested, since it differs between runs.
pub const SWEEP_HEADER: [&str; 16] = [
    "scenario",
    "family",
    "delta0",
    "delta",
    "mass_f",
    "symdiff_distance",
    "linear_gap",
    "main_distance",
    "ratio_sqrt",
    "ratio_linear",
    "ratio_main",
    "shave_removed",
    "best_shift",
    "seed",
    "valid",
    "p",
];

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow], p: f64, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = SWEEP_HEADER.to_vec();
    if timing {
        header.push("runtime_ms");
    }
    w.write_record(&header)?;
    for r in rows {
        let shift = r.best_shift.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut rec = vec![
            r.scenario.clone(),
            r.family.to_string(),
            r.delta0.to_string(),
            r.delta.to_string(),
            r.mass_f.to_string(),
            r.symdiff_distance.to_string(),
            r.linear_gap.to_string(),
            r.main_distance.to_string(),
            r.ratio_sqrt.to_string(),
            r.ratio_linear.to_string(),
            r.ratio_main.to_string(),
            r.shave_removed.to_string(),
            shift,
            r.seed.to_string(),
            r.valid.to_string(),
            p.to_string(),
        ];
        if timing {
            rec.push(format!("{:.3}", r.runtime_ms));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `lo:hi:logN`, `lo:hi:linN`, or a comma-separated list.
pub fn parse_delta_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim().parse::<f64>().map_err(|_| invalid(format!("not a number: {t:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [lo, hi, spec] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let (log, n) = if let Some(n) = spec.strip_prefix("log") {
                (true, n)
            } else if let Some(n) = spec.strip_prefix("lin") {
                (false, n)
            } else {
                return Err(invalid(format!("grid kind must be logN or linN, got {spec:?}")));
            };
            let n: usize = n.parse().map_err(|_| invalid(format!("bad point count in {spec:?}")))?;
            if n < 2 || !(lo > 0.0 && hi > lo) {
                return Err(invalid("grid needs 0 < lo < hi and at least two points"));
            }
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    if log { (lo.ln() + t * (hi.ln() - lo.ln())).exp() } else { lo + t * (hi - lo) }
                })
                .collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(invalid(format!("cannot parse grid {s:?}"))),
    };
    if out.iter().any(|&d: &f64| !(d > 0.0)) {
        return Err(invalid("grid values must be positive"));
    }
    Ok(out)
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
}

pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(invalid("x and y differ in length"));
    }
    if x.len() < 4 {
        return Err(invalid(format!("slope fit needs at least 4 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(invalid("slope fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 1e-12 * n {
        return Err(invalid("x values span no range"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, stderr })
}

/// Slope of `symdiff_distance` against measured `delta` over sweep rows.
pub fn symdiff_slope(rows: &[SweepRow]) -> Result<SlopeFit> {
    let x: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.symdiff_distance).collect();
    fit_loglog_slope(&x, &y)
}
