//! Sup-convolution `M*_{λ,p}(f, g)`, lattice Minkowski combinations, and the
//! deficit of a Borell-Brascamp-Lieb triple.
//!
//! With `λ = a/b`, the point `λx + (1-λ)y` of two cell centers is itself a cell
//! center exactly when `a·x + (b-a)·y ≡ 0 (mod b)` in lattice coordinates, so
//! every supremum below is a maximum over a finite set of grid pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{add_cells, Cell, Geometry, GridFunction, LevelSet};
use crate::means::{mean_key, mean_key_inv, power_mean, rational_approx, MeanParams};

/// Pair budget above which two-dimensional violation counts are sampled.
pub const EXHAUSTIVE_PAIR_LIMIT: u64 = 100_000_000;
const SAMPLE_PAIRS: u64 = 1_000_000;
const SAMPLE_SEED: u64 = 0x5EED_0B1D;

/// Relative tolerance for pointwise hypothesis checks, scaled by `max h`.
pub const VIOLATION_REL_TOL: f64 = 1e-9;

/// `λ = a/b` with `0 < a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Ratio {
    pub a: i64,
    pub b: i64,
}

impl Ratio {
    pub(crate) fn from_lambda(lambda: f64) -> Result<Ratio> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        let (a, b) = rational_approx(lambda).ok_or_else(|| Error::Incommensurate {
            lambda,
            reason: "no fraction a/b with b <= 1000 matches lambda".into(),
        })?;
        Ok(Ratio { a, b })
    }

    /// Lattice coordinate of `λx + (1-λ)y`, if it is one.
    #[inline]
    pub(crate) fn combine(&self, x: i64, y: i64) -> Option<i64> {
        let num = self.a * x + (self.b - self.a) * y;
        (num.rem_euclid(self.b) == 0).then(|| num.div_euclid(self.b))
    }

    /// The `y` with `λx + (1-λ)y = z`, if it is a lattice coordinate.
    #[inline]
    fn partner(&self, z: i64, x: i64) -> Option<i64> {
        let num = self.b * z - self.a * x;
        let den = self.b - self.a;
        (num.rem_euclid(den) == 0).then(|| num.div_euclid(den))
    }

    fn combine_cells(&self, x: &Cell, y: &Cell, dim: usize) -> Option<Cell> {
        let mut z = [0_i64; 3];
        for axis in 0..dim {
            z[axis] = self.combine(x[axis], y[axis])?;
        }
        Some(z)
    }

    /// Output window `[lo, hi]` covering all combinations of two boxes.
    fn window(&self, xlo: &Cell, xhi: &Cell, ylo: &Cell, yhi: &Cell, dim: usize) -> (Cell, Cell) {
        let mut lo = [0_i64; 3];
        let mut hi = [0_i64; 3];
        for axis in 0..dim {
            let l = self.a * xlo[axis] + (self.b - self.a) * ylo[axis];
            let h = self.a * xhi[axis] + (self.b - self.a) * yhi[axis];
            lo[axis] = -((-l).div_euclid(self.b));
            hi[axis] = h.div_euclid(self.b);
        }
        (lo, hi)
    }
}

/// Support cells of `f` in the lattice frame of `anchor`, with their values.
fn support_in(anchor: &Geometry, f: &GridFunction) -> Result<Vec<(Cell, f64)>> {
    let off = anchor.offset_of(f.geometry())?;
    Ok(f.support()
        .into_iter()
        .map(|i| (add_cells(&f.geometry().unravel(i), &off), f.values()[i]))
        .collect())
}

fn bbox(cells: &[(Cell, f64)], dim: usize) -> (Cell, Cell) {
    let mut lo = [0_i64; 3];
    let mut hi = [0_i64; 3];
    for axis in 0..dim {
        lo[axis] = cells.iter().map(|c| c.0[axis]).min().unwrap();
        hi[axis] = cells.iter().map(|c| c.0[axis]).max().unwrap();
    }
    (lo, hi)
}

/// Dense lookup of `g` in the anchor frame.
struct Dense<'a> {
    geom: &'a Geometry,
    off: Cell,
    values: &'a [f64],
}

impl Dense<'_> {
    #[inline]
    fn index(&self, c: &Cell) -> Option<usize> {
        let local = [c[0] - self.off[0], c[1] - self.off[1], c[2] - self.off[2]];
        self.geom.ravel(&local)
    }
}

/// For every output cell, the pair `(x, y)` maximizing the surrogate key.
/// Ties keep the first pair in support order.
fn gather_argmax(
    ratio: Ratio,
    dim: usize,
    fsup: &[(Cell, f64)],
    fkeys: &[f64],
    g: &Dense<'_>,
    gkeys: &[f64],
    out: &Geometry,
    out_off: Cell,
    weight: f64,
) -> Vec<Option<(usize, usize)>> {
    if dim == 1 {
        return gather_argmax_1d(ratio, fsup, fkeys, g, gkeys, out, out_off[0], weight);
    }
    (0..out.len())
        .into_par_iter()
        .map(|k| {
            let z = add_cells(&out.unravel(k), &out_off);
            let mut best = f64::NEG_INFINITY;
            let mut arg = None;
            'pairs: for (fi, (x, _)) in fsup.iter().enumerate() {
                let mut y = [0_i64; 3];
                for axis in 0..dim {
                    match ratio.partner(z[axis], x[axis]) {
                        Some(v) => y[axis] = v,
                        None => continue 'pairs,
                    }
                }
                let Some(gi) = g.index(&y) else { continue };
                let gk = gkeys[gi];
                if gk == f64::NEG_INFINITY {
                    continue;
                }
                let key = weight * fkeys[fi] + (1.0 - weight) * gk;
                if key > best {
                    best = key;
                    arg = Some((fi, gi));
                }
            }
            arg
        })
        .collect()
}

/// One-dimensional `gather_argmax`: for each `z` only the `x` whose partner
/// lies on the lattice and inside `g` are visited. Same tie rule.
#[allow(clippy::too_many_arguments)]
fn gather_argmax_1d(
    ratio: Ratio,
    fsup: &[(Cell, f64)],
    fkeys: &[f64],
    g: &Dense<'_>,
    gkeys: &[f64],
    out: &Geometry,
    out_off: i64,
    weight: f64,
) -> Vec<Option<(usize, usize)>> {
    let (a, b) = (ratio.a, ratio.b);
    let d = b - a;
    let xlo = fsup.iter().map(|c| c.0[0]).min().unwrap_or(0);
    let xhi = fsup.iter().map(|c| c.0[0]).max().unwrap_or(-1);
    let mut slot = vec![usize::MAX; (xhi - xlo + 1).max(0) as usize];
    for (fi, (x, _)) in fsup.iter().enumerate() {
        let s = &mut slot[(x[0] - xlo) as usize];
        if *s == usize::MAX {
            *s = fi;
        }
    }
    let gl = g.off[0];
    let gh = gl + g.geom.shape()[0] as i64 - 1;
    // a·x ≡ b·z (mod d); gcd(a, d) = 1
    let inv_a = (0..d).find(|k| (a * k).rem_euclid(d) == 1 % d).unwrap_or(0);
    (0..out.len())
        .into_par_iter()
        .map(|k| {
            let z = k as i64 + out_off;
            let bz = b * z;
            let lo = xlo.max(-((d * gh - bz).div_euclid(a)));
            let hi = xhi.min((bz - d * gl).div_euclid(a));
            if lo > hi {
                return None;
            }
            let r = (bz.rem_euclid(d) * inv_a).rem_euclid(d);
            let mut x = lo + (r - lo).rem_euclid(d);
            let mut best = f64::NEG_INFINITY;
            let mut arg: Option<(usize, usize)> = None;
            while x <= hi {
                let fi = slot[(x - xlo) as usize];
                if fi != usize::MAX {
                    let gi = ((bz - a * x) / d - gl) as usize;
                    let gk = gkeys[gi];
                    if gk != f64::NEG_INFINITY {
                        let key = weight * fkeys[fi] + (1.0 - weight) * gk;
                        if key > best || (key == best && arg.is_some_and(|(f0, _)| fi < f0)) {
                            best = key;
                            arg = Some((fi, gi));
                        }
                    }
                }
                x += d;
            }
            arg
        })
        .collect()
}

/// `M*_{λ,p}(f, g)(z) = max { M_{λ,p}(f(x), g(y)) : λx + (1-λ)y = z }` on the
/// lattice shared by `f` and `g`, over the window of all such `z`.
pub fn sup_convolution(f: &GridFunction, g: &GridFunction, params: &MeanParams) -> Result<GridFunction> {
    let ratio = Ratio::from_lambda(params.lambda())?;
    let (lambda, p) = (params.lambda(), params.p());
    let anchor = f.geometry();
    let dim = f.dim();
    let goff = anchor.offset_of(g.geometry())?;
    let fsup = support_in(anchor, f)?;
    let gsup = support_in(anchor, g)?;
    if fsup.is_empty() || gsup.is_empty() {
        let w = anchor.window(&[0; 3], vec![1; dim]);
        return Ok(GridFunction::zeros(w));
    }
    let (xlo, xhi) = bbox(&fsup, dim);
    let (ylo, yhi) = bbox(&gsup, dim);
    let (lo, hi) = ratio.window(&xlo, &xhi, &ylo, &yhi, dim);
    let shape: Vec<usize> = (0..dim).map(|a| (hi[a] - lo[a] + 1).max(1) as usize).collect();
    let out = anchor.window(&lo, shape);

    let fkeys: Vec<f64> = fsup.iter().map(|(_, v)| mean_key(p, *v)).collect();
    let gkeys: Vec<f64> = g.values().iter().map(|&v| mean_key(p, v)).collect();
    let dense = Dense { geom: g.geometry(), off: goff, values: g.values() };
    let arg = gather_argmax(ratio, dim, &fsup, &fkeys, &dense, &gkeys, &out, lo, lambda);
    let values = arg
        .into_iter()
        .map(|a| a.map_or(0.0, |(fi, gi)| power_mean(lambda, p, fsup[fi].1, dense.values[gi])))
        .collect();
    GridFunction::from_geometry(out, values)
}

/// The lattice set `{λx + (1-λ)y : x ∈ A, y ∈ B}`.
pub fn minkowski_combination(a: &LevelSet, b: &LevelSet, lambda: f64) -> Result<LevelSet> {
    let ratio = Ratio::from_lambda(lambda)?;
    let anchor = a.geometry();
    let dim = anchor.dim();
    let boff = anchor.offset_of(b.geometry())?;
    let acells: Vec<(Cell, f64)> = a.lattice_cells().into_iter().map(|c| (c, 1.0)).collect();
    let bcells: Vec<(Cell, f64)> =
        b.lattice_cells().into_iter().map(|c| (add_cells(&c, &boff), 1.0)).collect();
    if acells.is_empty() || bcells.is_empty() {
        return Ok(LevelSet::from_cells(anchor, 0.0, &[]));
    }
    let (xlo, xhi) = bbox(&acells, dim);
    let (ylo, yhi) = bbox(&bcells, dim);
    let (lo, hi) = ratio.window(&xlo, &xhi, &ylo, &yhi, dim);
    let shape: Vec<usize> = (0..dim).map(|k| (hi[k] - lo[k] + 1).max(1) as usize).collect();
    let out = anchor.window(&lo, shape);
    let bmask: Vec<f64> =
        b.mask().iter().map(|&m| if m { 0.0 } else { f64::NEG_INFINITY }).collect();
    let dense = Dense { geom: b.geometry(), off: boff, values: &bmask };
    let akeys = vec![0.0; acells.len()];
    let arg = gather_argmax(ratio, dim, &acells, &akeys, &dense, &bmask, &out, lo, lambda);
    let mask = arg.iter().map(Option::is_some).collect();
    Ok(LevelSet::from_mask(out, 0.0, mask))
}

/// A grid pair `(x, y)` with `h(z) < M_{λ,p}(f(x), g(y)) - tol`, coordinates in
/// the lattice frame of `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub x: Cell,
    pub y: Cell,
    pub z: Cell,
    pub required: f64,
    pub actual: f64,
}

/// Deficit bookkeeping for a triple `(f, g, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeficitReport {
    pub mass_f: f64,
    pub mass_g: f64,
    pub mass_h: f64,
    /// `∫h / ∫f - 1`.
    pub delta: f64,
    pub pointwise_violations: u64,
    pub pairs_checked: u64,
    /// True when the pair set was too large and a fixed-seed sample was used.
    pub sampled: bool,
    pub tol: f64,
}

impl DeficitReport {
    pub fn hypothesis_holds(&self) -> bool {
        self.pointwise_violations == 0
    }
}

/// Per-output thresholds for the hypothesis check.
struct Checker<'a> {
    ratio: Ratio,
    lambda: f64,
    p: f64,
    dim: usize,
    tol: f64,
    h: Dense<'a>,
    /// `κ(h(z) + tol)` per h cell; `κ(tol)` outside h.
    h_thr: Vec<f64>,
    out_thr: f64,
}

impl<'a> Checker<'a> {
    fn new(f: &GridFunction, h: &'a GridFunction, params: &MeanParams) -> Result<Self> {
        let ratio = Ratio::from_lambda(params.lambda())?;
        let tol = VIOLATION_REL_TOL * h.max_value();
        let p = params.p();
        let hoff = f.geometry().offset_of(h.geometry())?;
        let h_thr = h.values().iter().map(|&v| mean_key(p, v + tol)).collect();
        Ok(Self {
            ratio,
            lambda: params.lambda(),
            p,
            dim: f.dim(),
            tol,
            h: Dense { geom: h.geometry(), off: hoff, values: h.values() },
            h_thr,
            out_thr: mean_key(p, tol),
        })
    }

    /// Some violation if the pair breaks the hypothesis.
    #[inline]
    fn check(&self, x: &Cell, fx: f64, kx: f64, y: &Cell, gy: f64, ky: f64) -> Option<Violation> {
        let z = self.ratio.combine_cells(x, y, self.dim)?;
        let (hz, thr) = match self.h.index(&z) {
            Some(i) => (self.h.values[i], self.h_thr[i]),
            None => (0.0, self.out_thr),
        };
        let key = self.lambda * kx + (1.0 - self.lambda) * ky;
        let slack = 1e-9 * (thr.abs() + 1.0);
        if !(key >= thr - slack) {
            return None;
        }
        let m = power_mean(self.lambda, self.p, fx, gy);
        (m > hz + self.tol).then(|| Violation { x: *x, y: *y, z, required: m, actual: hz })
    }
}

/// One-dimensional shortcut: true when `M*(f, g) ≤ h + tol` holds everywhere
/// with room to spare, so no single pair can violate. A false answer means
/// the pairs must be enumerated.
pub(crate) fn clearly_dominated(f: &GridFunction, g: &GridFunction, h: &GridFunction, params: &MeanParams, tol: f64) -> Result<bool> {
    if f.dim() != 1 {
        return Ok(false);
    }
    let m = sup_convolution(f, g, params)?;
    let off = m.geometry().offset_of(h.geometry())?;
    for (k, &v) in m.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let c = m.geometry().unravel(k)[0] - off[0];
        let hz = if c >= 0 && (c as usize) < h.len() { h.values()[c as usize] } else { 0.0 };
        let bound = hz + tol;
        if !(v <= bound - 1e-12 * bound) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All grid pairs violating `h(λx + (1-λ)y) ≥ M_{λ,p}(f(x), g(y))` beyond
/// `tol = 1e-9·max h`. An empty list certifies the hypothesis on the grid.
pub fn verify_bbl_hypothesis(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    params: &MeanParams,
) -> Result<Vec<Violation>> {
    let checker = Checker::new(f, h, params)?;
    if clearly_dominated(f, g, h, params, checker.tol)? {
        return Ok(Vec::new());
    }
    let p = params.p();
    let fsup = support_in(f.geometry(), f)?;
    let gsup = support_in(f.geometry(), g)?;
    let gkeys: Vec<f64> = gsup.iter().map(|(_, v)| mean_key(p, *v)).collect();
    let per_x: Vec<Vec<Violation>> = fsup
        .par_iter()
        .map(|(x, fx)| {
            let kx = mean_key(p, *fx);
            gsup.iter()
                .zip(&gkeys)
                .filter_map(|((y, gy), ky)| checker.check(x, *fx, kx, y, *gy, *ky))
                .collect()
        })
        .collect();
    Ok(per_x.into_iter().flatten().collect())
}

/// Masses, `δ = ∫h/∫f - 1`, and the number of violating pairs.
///
/// Pairs are enumerated exhaustively in one dimension; in two or more
/// dimensions a fixed-seed sample of 10^6 pairs is used once the pair count
/// exceeds 10^8.
pub fn deficit(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    params: &MeanParams,
) -> Result<DeficitReport> {
    let mass_f = f.integral();
    if !(mass_f > 0.0) {
        return Err(Error::ZeroMass);
    }
    let checker = Checker::new(f, h, params)?;
    let p = params.p();
    let fsup = support_in(f.geometry(), f)?;
    let gsup = support_in(f.geometry(), g)?;
    let fkeys: Vec<f64> = fsup.iter().map(|(_, v)| mean_key(p, *v)).collect();
    let gkeys: Vec<f64> = gsup.iter().map(|(_, v)| mean_key(p, *v)).collect();
    let total = fsup.len() as u64 * gsup.len() as u64;
    let sampled = f.dim() > 1 && total > EXHAUSTIVE_PAIR_LIMIT;

    let (violations, checked) = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let mut count = 0_u64;
        for _ in 0..SAMPLE_PAIRS {
            let i = rng.gen_range(0..fsup.len());
            let j = rng.gen_range(0..gsup.len());
            let (x, fx) = &fsup[i];
            let (y, gy) = &gsup[j];
            if checker.check(x, *fx, fkeys[i], y, *gy, gkeys[j]).is_some() {
                count += 1;
            }
        }
        (count, SAMPLE_PAIRS)
    } else if fsup.is_empty() || gsup.is_empty() || clearly_dominated(f, g, h, params, checker.tol)? {
        (0, total)
    } else {
        let count = fsup
            .par_iter()
            .zip(&fkeys)
            .map(|((x, fx), kx)| {
                gsup.iter()
                    .zip(&gkeys)
                    .filter(|((y, gy), ky)| checker.check(x, *fx, *kx, y, *gy, **ky).is_some())
                    .count() as u64
            })
            .sum();
        (count, total)
    };

    let mass_h = h.integral();
    Ok(DeficitReport {
        mass_f,
        mass_g: g.integral(),
        mass_h,
        delta: mass_h / mass_f - 1.0,
        pointwise_violations: violations,
        pairs_checked: checked,
        sampled,
        tol: checker.tol,
    })
}

/// `M*_{λ,p}(f, f)` evaluated through the surrogate key only, for callers
/// that need many self-convolutions of small functions (the shaving search).
pub(crate) fn self_convolution_mass(f: &GridFunction, params: &MeanParams) -> Result<f64> {
    let ratio = Ratio::from_lambda(params.lambda())?;
    let (lambda, p) = (params.lambda(), params.p());
    let dim = f.dim();
    let sup = support_in(f.geometry(), f)?;
    if sup.is_empty() {
        return Ok(0.0);
    }
    let (lo, hi) = bbox(&sup, dim);
    let (zlo, zhi) = ratio.window(&lo, &hi, &lo, &hi, dim);
    let shape: Vec<usize> = (0..dim).map(|a| (zhi[a] - zlo[a] + 1).max(1) as usize).collect();
    let out = f.geometry().window(&zlo, shape);
    let keys: Vec<f64> = sup.iter().map(|(_, v)| mean_key(p, *v)).collect();
    let fkeys: Vec<f64> = f.values().iter().map(|&v| mean_key(p, v)).collect();
    let dense = Dense { geom: f.geometry(), off: [0; 3], values: f.values() };
    let arg = gather_argmax(ratio, dim, &sup, &keys, &dense, &fkeys, &out, zlo, lambda);
    let total: f64 = arg
        .into_iter()
        .map(|a| {
            a.map_or(0.0, |(fi, gi)| {
                let k = lambda * keys[fi] + (1.0 - lambda) * fkeys[gi];
                mean_key_inv(p, k)
            })
        })
        .sum();
    Ok(total * f.cell_volume())
}
