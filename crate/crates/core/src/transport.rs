//! Monotone one-dimensional transports, spatial and across heights, and the
//! level-set diagnostics `I_1 … I_5` of a BBL triple.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{add_cells, Cell, Geometry, GridFunction, LevelSet};
use crate::hull::convex_hull_set;
use crate::means::{power_mean, MeanParams};
use crate::supconv::{minkowski_combination, sup_convolution};

/// Relative mass agreement required of transport inputs.
pub const MASS_REL_TOL: f64 = 1e-9;

/// What the map transports: positions on the line, or heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Spatial,
    Height,
}

/// Piecewise-linear nondecreasing map through `(domain_breaks[k], values[k])`.
/// A repeated domain break is a jump; at a jump the map takes its left limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap1D {
    pub domain_breaks: Vec<f64>,
    pub values: Vec<f64>,
    pub source_mass: f64,
    pub target_mass: f64,
    pub kind: TransportKind,
}

impl TransportMap1D {
    /// Segment `(k-1, k)` used for `x`, preferring the one ending at `x`.
    fn segment(&self, x: f64) -> usize {
        let j = self.domain_breaks.partition_point(|&b| b < x);
        j.clamp(1, self.domain_breaks.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.domain_breaks.len();
        if n == 1 {
            return self.values[0];
        }
        if x <= self.domain_breaks[0] {
            return self.values[0];
        }
        if x >= self.domain_breaks[n - 1] {
            return self.values[n - 1];
        }
        let k = self.segment(x);
        let (x0, x1) = (self.domain_breaks[k - 1], self.domain_breaks[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }

    /// Left derivative; the right one at the first break.
    pub fn derivative(&self, x: f64) -> f64 {
        if self.domain_breaks.len() < 2 {
            return 0.0;
        }
        let mut k = self.segment(x);
        while k + 1 < self.domain_breaks.len() && self.domain_breaks[k] == self.domain_breaks[k - 1] {
            k += 1;
        }
        let dx = self.domain_breaks[k] - self.domain_breaks[k - 1];
        if dx == 0.0 {
            return f64::INFINITY;
        }
        (self.values[k] - self.values[k - 1]) / dx
    }

    pub fn is_monotone(&self) -> bool {
        self.domain_breaks.windows(2).all(|w| w[0] <= w[1]) && self.values.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Piecewise-constant density on `[breaks[k], breaks[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    pub breaks: Vec<f64>,
    pub density: Vec<f64>,
}

impl Density1D {
    pub fn new(breaks: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if breaks.len() != density.len() + 1 {
            return Err(invalid("a density needs one more break than values"));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("density breaks must increase strictly"));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(invalid("densities must be finite and nonnegative"));
        }
        Ok(Self { breaks, density })
    }

    /// The cells of a one-dimensional grid function.
    pub fn spatial(f: &GridFunction) -> Result<Self> {
        if f.dim() != 1 {
            return Err(invalid("spatial transport needs one-dimensional functions"));
        }
        let (o, h) = (f.origin()[0], f.spacing());
        let breaks = (0..=f.len()).map(|i| o + i as f64 * h).collect();
        Self::new(breaks, f.values().to_vec())
    }

    /// `t ↦ |{f > t}|` on `[0, max f]`, breaking at the distinct values.
    pub fn heights(f: &GridFunction) -> Self {
        let mut vals: Vec<f64> = f.values().iter().copied().filter(|&v| v > 0.0).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let cell = f.cell_volume();
        // descending: measure of {f ≥ v} for each distinct v
        let mut levels: Vec<(f64, f64)> = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            let m = (k + 1) as f64 * cell;
            match levels.last_mut() {
                Some(last) if last.0 == v => last.1 = m,
                _ => levels.push((v, m)),
            }
        }
        levels.reverse();
        let mut breaks = vec![0.0];
        let mut density = Vec::with_capacity(levels.len());
        for (v, m) in levels {
            breaks.push(v);
            density.push(m);
        }
        if density.is_empty() {
            return Self { breaks: vec![0.0, 1.0], density: vec![0.0] };
        }
        Self { breaks, density }
    }

    pub fn cumulative(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.breaks.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for (k, d) in self.density.iter().enumerate() {
            acc += d * (self.breaks[k + 1] - self.breaks[k]);
            cum.push(acc);
        }
        cum
    }

    pub fn mass(&self) -> f64 {
        *self.cumulative().last().unwrap()
    }

    /// `∫_{-∞}^x` of the density.
    pub fn cdf(&self, x: f64) -> f64 {
        let cum = self.cumulative();
        if x <= self.breaks[0] {
            return 0.0;
        }
        let k = self.breaks.partition_point(|&b| b <= x);
        if k >= self.breaks.len() {
            return cum[cum.len() - 1];
        }
        cum[k - 1] + self.density[k - 1] * (x - self.breaks[k - 1])
    }
}

fn normalized_cumulative(d: &Density1D) -> Vec<f64> {
    let mut cum = d.cumulative();
    let total = *cum.last().unwrap();
    for c in cum.iter_mut() {
        *c = (*c / total).min(1.0);
    }
    *cum.last_mut().unwrap() = 1.0;
    cum
}

/// The interval of positions whose normalized cumulative mass is `level`.
fn inverse_range(breaks: &[f64], cum: &[f64], level: f64) -> (f64, f64) {
    let lo = cum.partition_point(|&c| c < level);
    if lo < cum.len() && cum[lo] == level {
        let hi = cum.partition_point(|&c| c <= level) - 1;
        (breaks[lo], breaks[hi])
    } else {
        let k = lo - 1;
        let x = breaks[k] + (level - cum[k]) / (cum[lo] - cum[k]) * (breaks[lo] - breaks[k]);
        let x = x.clamp(breaks[k], breaks[lo]);
        (x, x)
    }
}

fn check_masses(mf: f64, mg: f64) -> Result<()> {
    if !(mf > 0.0) || !(mg > 0.0) {
        return Err(Error::ZeroMass);
    }
    if (mf - mg).abs() > MASS_REL_TOL * mf.max(mg) {
        return Err(Error::MassMismatch { left: mf, right: mg });
    }
    Ok(())
}

/// Cumulative-mass matching between two densities of equal mass.
pub fn monotone_transport(src: &Density1D, dst: &Density1D, kind: TransportKind) -> Result<TransportMap1D> {
    let (mf, mg) = (src.mass(), dst.mass());
    check_masses(mf, mg)?;
    let cf = normalized_cumulative(src);
    let cg = normalized_cumulative(dst);
    let mut levels: Vec<f64> = cf.iter().chain(&cg).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut xs = Vec::with_capacity(2 * levels.len());
    let mut ys = Vec::with_capacity(2 * levels.len());
    let mut push = |x: f64, y: f64| {
        if xs.last() != Some(&x) || ys.last() != Some(&y) {
            xs.push(x);
            ys.push(y);
        }
    };
    for &l in &levels {
        let (xlo, xhi) = inverse_range(&src.breaks, &cf, l);
        let (ylo, yhi) = inverse_range(&dst.breaks, &cg, l);
        push(xlo, ylo);
        push(xhi, yhi);
    }
    Ok(TransportMap1D { domain_breaks: xs, values: ys, source_mass: mf, target_mass: mg, kind })
}

/// `∫_{-∞}^x f = ∫_{-∞}^{T(x)} g` for one-dimensional `f` and `g`.
pub fn spatial_transport(f: &GridFunction, g: &GridFunction) -> Result<TransportMap1D> {
    monotone_transport(&Density1D::spatial(f)?, &Density1D::spatial(g)?, TransportKind::Spatial)
}

/// `∫_0^t |F_s| ds = ∫_0^{T(t)} |G_s| ds`, for functions of any dimension.
pub fn height_transport(f: &GridFunction, g: &GridFunction) -> Result<TransportMap1D> {
    check_masses(f.integral(), g.integral())?;
    monotone_transport(&Density1D::heights(f), &Density1D::heights(g), TransportKind::Height)
}

/// Largest `|F(x) - (m_f/m_g)·G(T(x))|` over the breakpoints of `t`, with `F`
/// and `G` the cumulative masses matching the kind of the map.
pub fn pushforward_check(t: &TransportMap1D, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let (df, dg) = match t.kind {
        TransportKind::Spatial => (Density1D::spatial(f)?, Density1D::spatial(g)?),
        TransportKind::Height => (Density1D::heights(f), Density1D::heights(g)),
    };
    Ok(pushforward_check_densities(t, &df, &dg))
}

pub fn pushforward_check_densities(t: &TransportMap1D, f: &Density1D, g: &Density1D) -> f64 {
    let (mf, mg) = (f.mass(), g.mass());
    if mf == 0.0 && mg == 0.0 {
        return 0.0;
    }
    let scale = if mg > 0.0 { mf / mg } else { 1.0 };
    t.domain_breaks
        .iter()
        .zip(&t.values)
        .map(|(&x, &y)| (f.cdf(x) - scale * g.cdf(y)).abs())
        .fold(0.0, f64::max)
}

/// How `h` relates to the sup-convolution of `f` and `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HConvention {
    /// `h = M*(f, g)` up to `1e-9` of the mass.
    SupConvolution,
    /// `h` exceeds the sup-convolution by `excess` in mass.
    Majorant { excess: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub alpha: f64,
    /// `∫_{I_k} |F_t| dt` for `k = 1…5`.
    pub masses: [f64; 5],
    /// `∫_I |F_t| dt` for the union `I`.
    pub union_mass: f64,
    /// `∫ (|co F_t ∖ F_t| + |co G_{T(t)} ∖ G_{T(t)}|) dt` outside `I`.
    pub hull_gap_integral: f64,
    pub mass_f: f64,
    pub intervals: usize,
    pub h_convention: HConvention,
}

/// Half-open runs `[l, r)` of lattice cells on the line.
#[derive(Debug, Clone, PartialEq)]
struct Runs(Vec<(i64, i64)>);

impl Runs {
    fn count(&self) -> usize {
        self.0.iter().map(|(l, r)| (r - l) as usize).sum()
    }

    fn above(f: &GridFunction, off: i64, t: f64) -> Runs {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &v) in f.values().iter().enumerate() {
            match (v > t, start) {
                (true, None) => start = Some(i as i64),
                (false, Some(s)) => {
                    runs.push((s + off, i as i64 + off));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s + off, f.len() as i64 + off));
        }
        Runs(runs)
    }

    fn hull(&self) -> Runs {
        match (self.0.first(), self.0.last()) {
            (Some(a), Some(b)) => Runs(vec![(a.0, b.1)]),
            _ => Runs(Vec::new()),
        }
    }

    fn overlap_at(&self, other: &Runs, s: i64) -> i64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut acc) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            let (l1, r1) = (a[i].0 + s, a[i].1 + s);
            let (l2, r2) = b[j];
            acc += (r1.min(r2) - l1.max(l2)).max(0);
            if r1 < r2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        acc
    }

    /// `min_s |(self + s) Δ other|` over integer shifts, in cells. The overlap
    /// is piecewise linear in `s` with kinks where run endpoints meet, so the
    /// endpoint differences contain a maximizer.
    fn min_symdiff(&self, other: &Runs) -> usize {
        let total = self.count() + other.count();
        let mut best = 0;
        for &(l1, r1) in &self.0 {
            for &(l2, r2) in &other.0 {
                for s in [l2 - l1, r2 - r1, l2 - r1, r2 - l1] {
                    best = best.max(self.overlap_at(other, s));
                }
            }
        }
        total - 2 * best as usize
    }

    /// `{λx + (1-λ)y}` for `λ = 1/2`.
    fn midpoints(&self, other: &Runs) -> Runs {
        let mut out: Vec<(i64, i64)> = Vec::new();
        for &(l1, r1) in &self.0 {
            for &(l2, r2) in &other.0 {
                let (s1, s2) = (l1 + l2, r1 - 1 + r2 - 1);
                let (zl, zr) = ((s1 + 1).div_euclid(2), s2.div_euclid(2));
                if zl <= zr {
                    out.push((zl, zr + 1));
                }
            }
        }
        out.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::new();
        for (l, r) in out {
            match merged.last_mut() {
                Some(last) if l <= last.1 => last.1 = last.1.max(r),
                _ => merged.push((l, r)),
            }
        }
        Runs(merged)
    }
}

/// One level of the diagnostics, in cell counts.
struct Level {
    f: usize,
    g: usize,
    co_f: usize,
    co_g: usize,
    mink: usize,
    f_vs_h: usize,
    cof_vs_cog: usize,
}

/// Level geometry through masks, for any dimension.
fn level_nd(
    anchor: &Geometry,
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    (t, s, m): (f64, f64, f64),
    lambda: f64,
) -> Result<Level> {
    let fs = f.level_set(t);
    let gs = g.level_set(s);
    let hs = h.level_set(m);
    let cells = |set: &LevelSet| -> Result<Vec<Cell>> {
        let off = anchor.offset_of(set.geometry())?;
        Ok(set.lattice_cells().iter().map(|c| add_cells(c, &off)).collect())
    };
    let best_overlap = |a: &[Cell], b: &[Cell]| -> usize {
        let mut hist: HashMap<Cell, usize> = HashMap::new();
        for x in a {
            for y in b {
                *hist.entry([y[0] - x[0], y[1] - x[1], y[2] - x[2]]).or_default() += 1;
            }
        }
        hist.values().copied().max().unwrap_or(0)
    };
    let (cf, cg, ch) = (cells(&fs)?, cells(&gs)?, cells(&hs)?);
    let co_fs = if fs.is_empty() { fs.clone() } else { convex_hull_set(&fs)? };
    let co_gs = if gs.is_empty() { gs.clone() } else { convex_hull_set(&gs)? };
    let (ccf, ccg) = (cells(&co_fs)?, cells(&co_gs)?);
    let mink = if fs.is_empty() || gs.is_empty() { 0 } else { minkowski_combination(&fs, &gs, lambda)?.count() };
    Ok(Level {
        f: cf.len(),
        g: cg.len(),
        co_f: ccf.len(),
        co_g: ccg.len(),
        mink,
        f_vs_h: cf.len() + ch.len() - 2 * best_overlap(&cf, &ch),
        cof_vs_cog: ccf.len() + ccg.len() - 2 * best_overlap(&ccf, &ccg),
    })
}

fn level_1d(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    offs: (i64, i64),
    (t, s, m): (f64, f64, f64),
    lambda: f64,
) -> Result<Level> {
    let fs = Runs::above(f, 0, t);
    let gs = Runs::above(g, offs.0, s);
    let hs = Runs::above(h, offs.1, m);
    let (co_f, co_g) = (fs.hull(), gs.hull());
    let mink = if lambda == 0.5 {
        fs.midpoints(&gs).count()
    } else if fs.count() == 0 || gs.count() == 0 {
        0
    } else {
        minkowski_combination(&f.level_set(t), &g.level_set(s), lambda)?.count()
    };
    Ok(Level {
        f: fs.count(),
        g: gs.count(),
        co_f: co_f.count(),
        co_g: co_g.count(),
        mink,
        f_vs_h: fs.min_symdiff(&hs),
        cof_vs_cog: co_f.min_symdiff(&co_g),
    })
}

/// Bad-level masses `∫_{I_k}|F_t| dt` and the good-set hull-gap integral.
///
/// Heights are split at the values of `f`, the preimages under the height
/// transport of the values of `g`, and the heights where `M_{λ,p}(t, T(t))`
/// crosses a value of `h`. Every level set is constant on each piece, so the
/// integrals are exact for grid functions.
pub fn level_diagnostics(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    params: &MeanParams,
    alpha: f64,
) -> Result<DiagnosticsReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let t_map = height_transport(f, g)?;
    let (lambda, p) = (params.lambda(), params.p());
    let n = f.dim();
    let tmax = f.max_value();
    let mass_f = f.integral();

    let mut cuts: Vec<f64> = t_map.domain_breaks.iter().copied().filter(|&t| t <= tmax).collect();
    cuts.push(0.0);
    cuts.push(tmax);
    let level_of = |t: f64| power_mean(lambda, p, t, t_map.eval(t));
    let mut hv: Vec<f64> = h.values().iter().copied().filter(|&v| v > 0.0).collect();
    hv.sort_by(f64::total_cmp);
    hv.dedup();
    let crossings: Vec<f64> = hv
        .par_iter()
        .filter_map(|&v| {
            if level_of(tmax) < v {
                return None;
            }
            let (mut lo, mut hi) = (0.0, tmax);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if level_of(mid) >= v {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        })
        .collect();
    cuts.extend(crossings);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let anchor = f.geometry();
    let offs = (anchor.offset_of(g.geometry())?[0], anchor.offset_of(h.geometry())?[0]);
    let cell = f.cell_volume();
    let pieces: Vec<Result<Option<([bool; 5], f64, f64)>>> = cuts
        .par_windows(2)
        .map(|w| {
            let (t0, t1) = (w[0], w[1]);
            if !(t1 > t0) {
                return Ok(None);
            }
            let t = 0.5 * (t0 + t1);
            let s = t_map.eval(t);
            let m = power_mean(lambda, p, t, s);
            let lv = if n == 1 {
                level_1d(f, g, h, offs, (t, s, m), lambda)?
            } else {
                level_nd(anchor, f, g, h, (t, s, m), lambda)?
            };
            if lv.f == 0 {
                return Ok(None);
            }
            let (fm, gm) = (lv.f as f64 * cell, lv.g as f64 * cell);
            let slope = t_map.derivative(t);
            let gap_f = (lv.co_f - lv.f) as f64 * cell;
            let gap_g = (lv.co_g - lv.g) as f64 * cell;
            let bm = power_mean(lambda, 1.0 / n as f64, fm, gm);
            let flags = [
                !(slope >= 1.0 - alpha && slope <= 1.0 + alpha),
                gap_f >= alpha * fm || gap_g >= alpha * gm,
                lv.mink as f64 * cell >= (1.0 + alpha) * bm,
                lv.f_vs_h as f64 * cell >= alpha * fm,
                lv.cof_vs_cog as f64 * cell >= alpha * fm,
            ];
            let dt = t1 - t0;
            Ok(Some((flags, fm * dt, (gap_f + gap_g) * dt)))
        })
        .collect();

    let mut masses = [0.0; 5];
    let (mut union_mass, mut hull_gap_integral, mut intervals) = (0.0, 0.0, 0);
    for piece in pieces {
        let Some((flags, w, gap)) = piece? else { continue };
        intervals += 1;
        for k in 0..5 {
            if flags[k] {
                masses[k] += w;
            }
        }
        if flags.iter().any(|&b| b) {
            union_mass += w;
        } else {
            hull_gap_integral += gap;
        }
    }

    let excess = h.integral() - sup_convolution(f, g, params)?.integral();
    let h_convention = if excess.abs() <= 1e-9 * mass_f {
        HConvention::SupConvolution
    } else {
        HConvention::Majorant { excess }
    };
    Ok(DiagnosticsReport { alpha, masses, union_mass, hull_gap_integral, mass_f, intervals, h_convention })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(o: f64, h: f64, v: Vec<f64>) -> GridFunction {
        GridFunction::line(o, h, v).unwrap()
    }

    #[test]
    fn identity_and_halving() {
        let f = line(0.0, 0.1, vec![1.0; 10]);
        let t = spatial_transport(&f, &f).unwrap();
        for x in [0.0, 0.33, 0.5, 1.0] {
            assert!((t.eval(x) - x).abs() < 1e-15);
        }
        let g = line(0.0, 0.1, vec![2.0, 2.0, 2.0, 2.0, 2.0]);
        let t = spatial_transport(&f, &g).unwrap();
        for x in [0.0, 0.25, 0.7, 1.0] {
            assert!((t.eval(x) - x / 2.0).abs() < 1e-15);
            assert!((t.derivative(x.max(0.01)) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn heights_of_indicator_pair() {
        let f = line(0.0, 0.1, vec![1.0; 10]);
        let g = line(0.0, 0.1, vec![2.0; 5]);
        let t = height_transport(&f, &g).unwrap();
        for s in [0.0, 0.2, 0.5, 1.0] {
            assert!((t.eval(s) - 2.0 * s).abs() < 1e-15);
        }
        assert!(pushforward_check(&t, &f, &g).unwrap() < 1e-15);
    }

    #[test]
    fn gap_in_target_is_a_jump() {
        let f = line(0.0, 1.0, vec![1.0, 1.0]);
        let g = line(0.0, 1.0, vec![1.0, 0.0, 1.0]);
        let t = spatial_transport(&f, &g).unwrap();
        assert!((t.eval(1.0) - 1.0).abs() < 1e-15);
        assert!((t.eval(1.0 + 1e-9) - 2.0).abs() < 1e-8);
        assert!(pushforward_check(&t, &f, &g).unwrap() < 1e-15);
    }

    #[test]
    fn mass_mismatch_is_rejected() {
        let f = line(0.0, 0.1, vec![1.0; 10]);
        let g = line(0.0, 0.1, vec![1.0; 11]);
        assert!(matches!(spatial_transport(&f, &g), Err(Error::MassMismatch { .. })));
        let z = line(0.0, 0.1, vec![0.0; 3]);
        assert!(matches!(height_transport(&z, &z), Err(Error::ZeroMass)));
    }

    #[test]
    fn runs_helpers() {
        let a = Runs(vec![(0, 3), (5, 6)]);
        let b = Runs(vec![(10, 13), (15, 16)]);
        assert_eq!(a.min_symdiff(&b), 0);
        let c = Runs(vec![(0, 4)]);
        assert_eq!(c.midpoints(&c), c);
        assert_eq!(Runs(vec![(0, 1)]).midpoints(&Runs(vec![(1, 2)])).count(), 0);
        assert_eq!(Runs(vec![(0, 2)]).midpoints(&Runs(vec![(10, 12)])), Runs(vec![(5, 7)]));
    }

    #[test]
    fn equality_case_has_no_bad_levels() {
        let vals: Vec<f64> = (0..41).map(|i| 1.0 - ((i as f64 - 20.0) / 20.5).abs()).collect();
        let f = line(0.0, 0.025, vals).normalize().unwrap();
        let params = MeanParams::half(1.0, 1).unwrap();
        let h = sup_convolution(&f, &f, &params).unwrap();
        let r = level_diagnostics(&f, &f, &h, &params, 0.1).unwrap();
        assert!(r.masses.iter().all(|&m| m < 1e-12), "{:?}", r.masses);
        assert_eq!(r.h_convention, HConvention::SupConvolution);
    }
}
