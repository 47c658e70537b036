//! p-concave hulls, p-planes, concavity checks, convex hulls of lattice sets,
//! and the tail-mass bound for p-concave functions.

mod chull;
mod planar;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{l1_distance, Cell, Geometry, GridFunction, LevelSet};
use crate::means::{mean_key, power_mean, MeanParams};
use planar::P2;

/// `h_{y,d}(x)`: `(<x,y> + d)^{1/p}` for `p ≠ 0`, `exp(<x,y> + d)` for `p = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PPlane {
    pub p: f64,
    pub y: Vec<f64>,
    pub d: f64,
}

impl PPlane {
    pub fn new(p: f64, y: Vec<f64>, d: f64) -> Self {
        Self { p, y, d }
    }

    /// The affine part `<x,y> + d`.
    pub fn affine(&self, x: &[f64]) -> f64 {
        self.y.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.d
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        p_plane_eval(self, x)
    }
}

/// Evaluates a p-plane. Returns `+∞` for `p < 0` where the affine part is
/// not positive and `0` for `p > 0` there.
pub fn p_plane_eval(plane: &PPlane, x: &[f64]) -> f64 {
    let s = plane.affine(x);
    let p = plane.p;
    if p == 0.0 {
        s.exp()
    } else if s > 0.0 {
        s.powf(1.0 / p)
    } else if p > 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct HullResult {
    pub hull: GridFunction,
    /// `∫(co_p(f) - f)`.
    pub gap_mass: f64,
    pub facets: Vec<PPlane>,
}

/// Value transform `f ↦ φ` whose concave majorant (convex minorant for
/// `p < 0`) gives the hull.
#[derive(Clone, Copy)]
struct Lift {
    p: f64,
}

impl Lift {
    fn fwd(&self, v: f64) -> f64 {
        if self.p == 0.0 {
            v.ln()
        } else {
            v.powf(self.p)
        }
    }

    fn inv(&self, phi: f64) -> f64 {
        if self.p == 0.0 {
            phi.exp()
        } else if phi > 0.0 {
            phi.powf(1.0 / self.p)
        } else {
            0.0
        }
    }

    /// Upper envelope for `p ≥ 0`, lower for `p < 0`.
    fn upper(&self) -> bool {
        self.p >= 0.0
    }
}

/// Plane `φ = Σ α_k i_k + γ` in local lattice indices, as a `PPlane` in real
/// coordinates.
fn lattice_plane(geom: &Geometry, p: f64, alpha: &[f64], gamma: f64) -> PPlane {
    let h = geom.spacing();
    let mut d = gamma;
    let mut y = Vec::with_capacity(alpha.len());
    for (k, a) in alpha.iter().enumerate() {
        y.push(a / h);
        d -= a * (geom.origin()[k] / h + 0.5);
    }
    PPlane::new(p, y, d)
}

/// Monotone chain over `(t, φ)` sorted by `t`; upper or lower envelope.
fn chain(pts: &[(i64, f64)], upper: bool) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    for &q in pts {
        while out.len() >= 2 {
            let (o, a) = (out[out.len() - 2], out[out.len() - 1]);
            let cr = (a.0 - o.0) as f64 * (q.1 - o.1) - (a.1 - o.1) * (q.0 - o.0) as f64;
            if (upper && cr >= 0.0) || (!upper && cr <= 0.0) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(q);
    }
    out
}

/// Linear interpolation of a chain at integer `t` inside its range.
fn chain_eval(ch: &[(i64, f64)], t: i64, seg: &mut usize) -> f64 {
    if ch.len() == 1 {
        return ch[0].1;
    }
    while *seg + 2 < ch.len() && t > ch[*seg + 1].0 {
        *seg += 1;
    }
    let (a, b) = (ch[*seg], ch[*seg + 1]);
    if t == a.0 {
        return a.1;
    }
    if t == b.0 {
        return b.1;
    }
    a.1 + (b.1 - a.1) * ((t - a.0) as f64 / (b.0 - a.0) as f64)
}

/// `co_p(f)` on `f`'s grid, supported on the cells of `co(supp f)`.
pub fn p_concave_hull(f: &GridFunction, p: f64) -> Result<HullResult> {
    let dim = f.dim();
    if !p.is_finite() || p <= -1.0 / dim as f64 {
        return Err(invalid(format!("p must exceed -1/{dim}, got {p}")));
    }
    if !(f.integral() > 0.0) {
        return Err(Error::ZeroMass);
    }
    let lift = Lift { p };
    let geom = f.geometry();
    let mut phi = vec![f64::NAN; f.len()];
    let mut facets = Vec::new();
    match dim {
        1 => {
            let pts: Vec<(i64, f64)> =
                f.support().into_iter().map(|i| (i as i64, lift.fwd(f.values()[i]))).collect();
            let ch = chain(&pts, lift.upper());
            let mut seg = 0;
            for t in ch[0].0..=ch[ch.len() - 1].0 {
                phi[t as usize] = chain_eval(&ch, t, &mut seg);
            }
            facets = chain_facets(geom, p, &ch, &[1, 0], [0, 0]);
        }
        2 => hull_2d(f, lift, &mut phi, &mut facets),
        _ => return Err(invalid("p-concave hulls are implemented for dimensions 1 and 2")),
    }
    let values: Vec<f64> = phi
        .iter()
        .zip(f.values())
        .map(|(&ph, &v)| if ph.is_nan() { v } else { lift.inv(ph).max(v) })
        .collect();
    let hull = GridFunction::from_geometry(geom.clone(), values)?;
    let gap_mass = l1_distance(&hull, f)?;
    Ok(HullResult { hull, gap_mass, facets })
}

/// One p-plane per chain segment along the lattice line `base + t·dir`.
fn chain_facets(geom: &Geometry, p: f64, ch: &[(i64, f64)], dir: &[i64; 2], base: [i64; 2]) -> Vec<PPlane> {
    let dim = geom.dim();
    let norm2 = (dir[0] * dir[0] + dir[1] * dir[1]) as f64;
    let mk = |slope: f64, value_at_0: f64| {
        // φ(i) = value_at_0 + slope·<i - base, dir>/|dir|²
        let mut alpha = vec![0.0; dim];
        let mut gamma = value_at_0;
        for k in 0..dim {
            alpha[k] = slope * dir[k] as f64 / norm2;
            gamma -= alpha[k] * base[k] as f64;
        }
        lattice_plane(geom, p, &alpha, gamma)
    };
    if ch.len() == 1 {
        return vec![mk(0.0, ch[0].1)];
    }
    ch.windows(2)
        .map(|w| {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0) as f64;
            mk(slope, w[0].1 - slope * w[0].0 as f64)
        })
        .collect()
}

fn hull_2d(f: &GridFunction, lift: Lift, phi: &mut [f64], facets: &mut Vec<PPlane>) {
    let geom = f.geometry();
    let p = lift.p;
    let sup = f.support();
    let xy: Vec<P2> = sup.iter().map(|&i| {
        let c = geom.unravel(i);
        [c[0], c[1]]
    }).collect();
    let vals: Vec<f64> = sup.iter().map(|&i| lift.fwd(f.values()[i])).collect();
    let poly = planar::convex_polygon(&xy);

    if poly.len() <= 2 {
        // collinear support: a one-dimensional hull along the lattice line
        let a = poly[0];
        let (dir, span) = if poly.len() == 1 {
            ([1, 0], 0)
        } else {
            let (dx, dy) = (poly[1][0] - a[0], poly[1][1] - a[1]);
            let g = gcd(dx.abs(), dy.abs());
            ([dx / g, dy / g], g)
        };
        let mut pts: Vec<(i64, f64)> = xy
            .iter()
            .zip(&vals)
            .map(|(q, &v)| {
                let t = if dir[0] != 0 { (q[0] - a[0]) / dir[0] } else { (q[1] - a[1]) / dir[1] };
                (t, v)
            })
            .collect();
        pts.sort_by_key(|q| q.0);
        let ch = chain(&pts, lift.upper());
        let mut seg = 0;
        for t in 0..=span {
            let c: Cell = [a[0] + t * dir[0], a[1] + t * dir[1], 0];
            phi[geom.ravel(&c).unwrap()] = chain_eval(&ch, t, &mut seg);
        }
        *facets = chain_facets(geom, p, &ch, &dir, a);
        return;
    }

    let scale = {
        let m = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m > 0.0 { (1_u64 << 50) as f64 / m } else { 1.0 }
    };
    let pts3: Vec<chull::P3> =
        xy.iter().zip(&vals).map(|(q, &v)| [q[0], q[1], (v * scale).round() as i64]).collect();

    let upper = lift.upper();
    let tris: Vec<[usize; 3]> = match chull::hull3(&pts3) {
        Some(faces) => faces
            .into_iter()
            .filter(|t| {
                let nz = chull::normal_z(pts3[t[0]], pts3[t[1]], pts3[t[2]]);
                if upper { nz > 0 } else { nz < 0 }
            })
            .collect(),
        None => {
            // all lifted points coplanar: fan-triangulate the support polygon
            let idx: Vec<usize> =
                poly.iter().map(|v| xy.iter().position(|q| q == v).unwrap()).collect();
            (1..idx.len() - 1).map(|k| [idx[0], idx[k], idx[k + 1]]).collect()
        }
    };

    let shape = geom.shape();
    for t in &tris {
        let (a, b, c) = (xy[t[0]], xy[t[1]], xy[t[2]]);
        let area = planar::cross(a, b, c);
        if area == 0 {
            continue;
        }
        let (fa, fb, fc) = (vals[t[0]], vals[t[1]], vals[t[2]]);
        // plane through the three lifted points, in lattice indices
        let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
        let det = (u[0] * v[1] - u[1] * v[0]) as f64;
        let alpha = [
            ((fb - fa) * v[1] as f64 - (fc - fa) * u[1] as f64) / det,
            ((fc - fa) * u[0] as f64 - (fb - fa) * v[0] as f64) / det,
        ];
        let gamma = fa - alpha[0] * a[0] as f64 - alpha[1] * a[1] as f64;
        facets.push(lattice_plane(geom, p, &alpha, gamma));

        let lo = [a[0].min(b[0]).min(c[0]), a[1].min(b[1]).min(c[1])];
        let hi = [a[0].max(b[0]).max(c[0]), a[1].max(b[1]).max(c[1])];
        for i in lo[0].max(0)..=hi[0].min(shape[0] as i64 - 1) {
            for j in lo[1].max(0)..=hi[1].min(shape[1] as i64 - 1) {
                let q = [i, j];
                if !planar::in_triangle(a, b, c, q) {
                    continue;
                }
                // barycentric weights are exact rationals
                let wa = planar::cross(q, b, c) as f64 / area as f64;
                let wb = planar::cross(a, q, c) as f64 / area as f64;
                let wc = 1.0 - wa - wb;
                let val = wa * fa + wb * fb + wc * fc;
                let k = geom.ravel(&[i, j, 0]).unwrap();
                let cur = phi[k];
                phi[k] = if cur.is_nan() {
                    val
                } else if upper {
                    cur.min(val)
                } else {
                    cur.max(val)
                };
            }
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Worst failure of the midpoint inequality found by `is_p_concave`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityViolation {
    pub x: Cell,
    pub y: Cell,
    pub mid: Cell,
    /// `M_{1/2,p}(f(x), f(y))`.
    pub required: f64,
    pub actual: f64,
}

impl ConcavityViolation {
    pub fn excess(&self) -> f64 {
        self.required - self.actual
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    pub holds: bool,
    pub worst: Option<ConcavityViolation>,
}

/// Checks `f((x+y)/2) ≥ M_{1/2,p}(f(x), f(y)) - tol` over all grid pairs
/// whose midpoint is a cell. Cell coordinates are local to `f`'s grid.
pub fn is_p_concave(f: &GridFunction, p: f64, tol: f64) -> ConcavityReport {
    if f.dim() == 1 && !f.support().is_empty() {
        if let Ok(params) = MeanParams::new(0.5, p, 1) {
            if crate::supconv::clearly_dominated(f, f, f, &params, tol).unwrap_or(false) {
                return ConcavityReport { holds: true, worst: None };
            }
        }
    }
    let geom = f.geometry();
    let dim = f.dim();
    let sup = f.support();
    let cells: Vec<Cell> = sup.iter().map(|&i| geom.unravel(i)).collect();
    let keys: Vec<f64> = sup.iter().map(|&i| mean_key(p, f.values()[i])).collect();
    let thr: Vec<f64> = f.values().iter().map(|&v| mean_key(p, v + tol)).collect();

    let better = |a: &ConcavityViolation, b: &ConcavityViolation| {
        a.excess() > b.excess() || (a.excess() == b.excess() && (a.x, a.y) < (b.x, b.y))
    };
    let worst = (0..sup.len())
        .into_par_iter()
        .filter_map(|s| {
            let x = cells[s];
            let mut best: Option<ConcavityViolation> = None;
            for t in s + 1..sup.len() {
                let y = cells[t];
                let mut mid = [0_i64; 3];
                let mut ok = true;
                for k in 0..dim {
                    let sum = x[k] + y[k];
                    if sum % 2 != 0 {
                        ok = false;
                        break;
                    }
                    mid[k] = sum / 2;
                }
                if !ok {
                    continue;
                }
                let m = geom.ravel(&mid).unwrap();
                let key = 0.5 * (keys[s] + keys[t]);
                if key < thr[m] - 1e-9 * (thr[m].abs() + 1.0) {
                    continue;
                }
                let required = power_mean(0.5, p, f.values()[sup[s]], f.values()[sup[t]]);
                let actual = f.values()[m];
                if required - actual > tol {
                    let v = ConcavityViolation { x, y, mid, required, actual };
                    if best.as_ref().map_or(true, |b| better(&v, b)) {
                        best = Some(v);
                    }
                }
            }
            best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a });
    ConcavityReport { holds: worst.is_none(), worst }
}

/// Cells whose centers lie in the convex hull of `a`'s cell centers.
pub fn convex_hull_set(a: &LevelSet) -> Result<LevelSet> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let geom = a.geometry().clone();
    let cells = a.lattice_cells();
    let mask = match geom.dim() {
        1 => {
            let lo = cells.iter().map(|c| c[0]).min().unwrap();
            let hi = cells.iter().map(|c| c[0]).max().unwrap();
            (0..geom.len() as i64).map(|i| i >= lo && i <= hi).collect()
        }
        2 => {
            let poly = planar::convex_polygon(&cells.iter().map(|c| [c[0], c[1]]).collect::<Vec<_>>());
            (0..geom.len())
                .map(|k| {
                    let c = geom.unravel(k);
                    planar::contains(&poly, [c[0], c[1]])
                })
                .collect()
        }
        _ => return Err(invalid("convex hulls of sets are implemented for dimensions 1 and 2")),
    };
    Ok(LevelSet::from_mask(geom, a.threshold(), mask))
}

/// `(|co(A)| - |A|) / |A|`.
pub fn hull_deficit(a: &LevelSet) -> Result<f64> {
    let co = convex_hull_set(a)?;
    Ok((co.count() as f64 - a.count() as f64) / a.count() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    /// `∫_S g / ∫ g` with `S = {g ≥ max g / 2}`.
    pub ratio: f64,
    /// Lower bound valid for every p-concave function in this dimension.
    pub bound: f64,
    /// Whether `g` passed `is_p_concave` at tolerance `1e-9·max g`.
    pub p_concave: bool,
}

impl TailReport {
    pub fn within_bound(&self) -> bool {
        self.ratio >= self.bound
    }
}

/// Outer mass constant `C(p, n) = ∫_1^∞ φ(λ) n λ^{n-1} dλ`, where `φ(λ)` bounds
/// a p-concave function with maximum 1 at the point `λ` times as far from the
/// maximizer as the boundary of its half-level set.
///
/// Along each ray `g(s) ≥ M_{1/λ,p}(g(z), 1)` with `g(s) = 1/2` gives
/// `φ(λ) = (1 + λ(2^{-p} - 1))_+^{1/p}` and `φ(λ) = 2^{-λ}` at `p = 0`.
pub fn tail_constant(p: f64, n: usize) -> f64 {
    if p <= -1.0 / n as f64 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    if p.abs() < 1e-7 {
        // n Γ(n, ln 2) / (ln 2)^n
        let l = std::f64::consts::LN_2;
        let mut s = 0.0;
        let mut term = 1.0;
        for k in 0..n {
            if k > 0 {
                term *= l / k as f64;
            }
            s += term;
        }
        let fact: f64 = (1..n).map(|k| k as f64).product();
        return nf * fact * 0.5 * s / l.powi(n as i32);
    }
    // substitute t = 1 + aλ and expand (t - 1)^{n-1}
    let c = 2f64.powf(-p);
    let a = c - 1.0;
    let mut sum = 0.0;
    let mut binom = 1.0;
    for k in 0..n {
        if k > 0 {
            binom *= (n - k) as f64 / k as f64;
        }
        let e = k as f64 + 1.0 / p + 1.0;
        let sign = if (n - 1 - k) % 2 == 0 { 1.0 } else { -1.0 };
        sum += binom * sign * c.powf(e) / e;
    }
    -nf / a.powi(n as i32) * sum
}

/// Lower bound `1/2 / (1/2 + C(p, n))` on the tail ratio of p-concave functions.
pub fn tail_bound(p: f64, n: usize) -> f64 {
    0.5 / (0.5 + tail_constant(p, n))
}

/// Fraction of the mass of `g` on its half-level set, with the bound that
/// holds when `g` is p-concave. Non-concave inputs are flagged, not rejected.
pub fn tail_ratio(g: &GridFunction, p: f64) -> Result<TailReport> {
    let m = g.max_value();
    if !(m > 0.0) {
        return Err(Error::ZeroMass);
    }
    let total: f64 = g.values().iter().sum();
    let inner: f64 = g.values().iter().filter(|&&v| v >= 0.5 * m).sum();
    let p_concave = is_p_concave(g, p, 1e-9 * m).holds;
    Ok(TailReport { ratio: inner / total, bound: tail_bound(p, g.dim()), p_concave })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_branches() {
        let pl = PPlane::new(1.0, vec![0.0], 2.0);
        assert_eq!(p_plane_eval(&pl, &[3.7]), 2.0);
        let pl = PPlane::new(-0.5, vec![1.0], -1.0);
        assert_eq!(p_plane_eval(&pl, &[1.0]), f64::INFINITY);
        let pl = PPlane::new(0.0, vec![0.0], 0.0);
        assert_eq!(p_plane_eval(&pl, &[5.0]), 1.0);
        let pl = PPlane::new(2.0, vec![1.0], -1.0);
        assert_eq!(p_plane_eval(&pl, &[0.5]), 0.0);
        assert!((p_plane_eval(&pl, &[5.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hat_is_its_own_hull() {
        let vals: Vec<f64> = (0..21).map(|i| 1.0 - ((i as f64 - 10.0) / 10.5).abs()).collect();
        let f = GridFunction::line(-1.0, 0.1, vals).unwrap();
        let r = p_concave_hull(&f, 1.0).unwrap();
        assert!(r.gap_mass < 1e-14);
        assert_eq!(r.facets.len(), 2);
    }

    #[test]
    fn two_spikes_log_hull_fills_gap() {
        let mut vals = vec![0.0; 11];
        vals[0] = 1.0;
        vals[10] = 1.0;
        let f = GridFunction::line(0.0, 0.1, vals).unwrap();
        let r = p_concave_hull(&f, 0.0).unwrap();
        assert!(r.hull.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!((r.gap_mass - 0.9).abs() < 1e-12);
        let rep = is_p_concave(&f, 0.0, 1e-12);
        assert!(!rep.holds);
        let w = rep.worst.unwrap();
        assert_eq!((w.x[0], w.y[0], w.mid[0]), (0, 10, 5));
    }

    #[test]
    fn facets_match_hull_values() {
        let f = GridFunction::line(0.3, 0.05, vec![0.2, 0.9, 0.1, 0.5, 0.7, 0.0, 0.3]).unwrap();
        for p in [-0.5, 0.0, 0.5, 1.0] {
            let r = p_concave_hull(&f, p).unwrap();
            for i in 0..f.len() {
                let x = f.geometry().center(i);
                let env = r.facets.iter().map(|pl| p_plane_eval(pl, &x)).fold(f64::INFINITY, f64::min);
                assert!((env - r.hull.values()[i]).abs() < 1e-12 * env.max(1.0), "p={p} i={i}");
            }
        }
    }

    #[test]
    fn convex_hull_of_two_intervals() {
        let mut vals = vec![1.0; 30];
        for v in &mut vals[10..20] {
            *v = 0.0;
        }
        let f = GridFunction::line(0.0, 0.1, vals).unwrap();
        let a = f.level_set(0.0);
        assert!((convex_hull_set(&a).unwrap().measure() - 3.0).abs() < 1e-12);
        assert!((hull_deficit(&a).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tail_constants() {
        assert!((tail_constant(1.0, 1) - 0.25).abs() < 1e-14);
        assert!((tail_constant(0.0, 1) - 0.5 / std::f64::consts::LN_2).abs() < 1e-14);
        // continuity through p = 0
        for n in 1..=3 {
            let a = tail_constant(1e-5, n);
            let b = tail_constant(0.0, n);
            let c = tail_constant(-1e-5, n);
            assert!((a - b).abs() < 1e-3 && (b - c).abs() < 1e-3, "n={n}: {a} {b} {c}");
        }
        assert!(tail_constant(-0.5, 2).is_infinite());
    }
}
