//! Reference implementations shared by the integration tests. They favor
//! obviously correct brute force over speed.

#![allow(dead_code)]

use bbl_core::GridFunction;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `(λx^p + (1-λ)y^p)^{1/p}`, geometric at `p = 0`, zero if either argument is.
pub fn ref_mean(lambda: f64, p: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        x.powf(lambda) * y.powf(1.0 - lambda)
    } else {
        (lambda * x.powf(p) + (1.0 - lambda) * y.powf(p)).powf(1.0 / p)
    }
}

/// Whole-cell offset of `b`'s origin from `a`'s.
pub fn cell_offset(a: &GridFunction, b: &GridFunction) -> Vec<i64> {
    a.origin().iter().zip(b.origin()).map(|(x, y)| ((y - x) / a.spacing()).round() as i64).collect()
}

/// Value of `f` at lattice cell `c` given in the frame of `anchor`.
pub fn value_at(anchor: &GridFunction, f: &GridFunction, c: &[i64]) -> f64 {
    let off = cell_offset(anchor, f);
    let mut flat = 0usize;
    for (axis, (&ci, &oi)) in c.iter().zip(&off).enumerate() {
        let local = ci - oi;
        if local < 0 || local >= f.shape()[axis] as i64 {
            return 0.0;
        }
        flat = flat * f.shape()[axis] + local as usize;
    }
    f.values()[flat]
}

fn cells_of(f: &GridFunction) -> Vec<Vec<i64>> {
    let shape = f.shape();
    (0..f.len())
        .map(|k| {
            let mut rest = k;
            let mut c = vec![0_i64; shape.len()];
            for axis in (0..shape.len()).rev() {
                c[axis] = (rest % shape[axis]) as i64;
                rest /= shape[axis];
            }
            c
        })
        .collect()
}

/// Brute-force sup-convolution for `λ = a/b`, as a map from lattice cells in
/// `f`'s frame to values. Cells without any pair are absent.
pub fn brute_supconv(
    f: &GridFunction,
    g: &GridFunction,
    a: i64,
    b: i64,
    p: f64,
) -> std::collections::BTreeMap<Vec<i64>, f64> {
    let lambda = a as f64 / b as f64;
    let goff = cell_offset(f, g);
    let mut out = std::collections::BTreeMap::new();
    let fc = cells_of(f);
    let gc = cells_of(g);
    for (x, &fx) in fc.iter().zip(f.values()) {
        if fx == 0.0 {
            continue;
        }
        for (y, &gy) in gc.iter().zip(g.values()) {
            if gy == 0.0 {
                continue;
            }
            let mut z = Vec::with_capacity(x.len());
            let mut ok = true;
            for axis in 0..x.len() {
                let num = a * x[axis] + (b - a) * (y[axis] + goff[axis]);
                if num.rem_euclid(b) != 0 {
                    ok = false;
                    break;
                }
                z.push(num.div_euclid(b));
            }
            if !ok {
                continue;
            }
            let m = ref_mean(lambda, p, fx, gy);
            let e = out.entry(z).or_insert(0.0_f64);
            *e = e.max(m);
        }
    }
    out
}

/// Random staircase: runs of constant value, some of them zero.
pub fn staircase(rng: &mut ChaCha8Rng, max_cells: usize) -> GridFunction {
    let n = rng.gen_range(1..=max_cells);
    let mut vals = Vec::with_capacity(n + 4);
    vals.extend(std::iter::repeat(0.0).take(rng.gen_range(0..3)));
    while vals.len() < n {
        let run = rng.gen_range(1..=4).min(n - vals.len());
        let v = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.05..2.0) };
        vals.extend(std::iter::repeat(v).take(run));
    }
    if vals.iter().all(|&v| v == 0.0) {
        vals.push(1.0);
    }
    vals.extend(std::iter::repeat(0.0).take(rng.gen_range(0..3)));
    let spacing = [0.1, 0.25, 0.5][rng.gen_range(0..3)];
    GridFunction::line(rng.gen_range(-2.0..2.0), spacing, vals).unwrap()
}

fn lift(p: f64, v: f64) -> f64 {
    if p == 0.0 { v.ln() } else { v.powf(p) }
}

fn unlift(p: f64, phi: f64) -> f64 {
    if p == 0.0 {
        phi.exp()
    } else if phi > 0.0 {
        phi.powf(1.0 / p)
    } else {
        0.0
    }
}

/// One-dimensional hull by brute force: the lower envelope (upper for `p < 0`)
/// of all lines through two lifted points lying on one side of every lifted
/// point, on `f`'s grid.
pub fn hull_oracle_1d(f: &GridFunction, p: f64) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i as f64, lift(p, v)))
        .collect();
    let upper = p >= 0.0;
    let mut out = vec![0.0; f.len()];
    let (lo, hi) = (pts[0].0 as usize, pts[pts.len() - 1].0 as usize);
    if lo == hi {
        out[lo] = f.values()[lo];
        return out;
    }
    let tol = 1e-12 * (1.0 + pts.iter().map(|q| q.1.abs()).fold(0.0, f64::max));
    let mut lines = Vec::new();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let slope = (pts[b].1 - pts[a].1) / (pts[b].0 - pts[a].0);
            let at = |x: f64| pts[a].1 + slope * (x - pts[a].0);
            if pts.iter().all(|q| if upper { at(q.0) >= q.1 - tol } else { at(q.0) <= q.1 + tol }) {
                lines.push((pts[a], slope));
            }
        }
    }
    for (i, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let vals = lines.iter().map(|&((x0, y0), s)| y0 + s * (i as f64 - x0));
        let phi = if upper { vals.fold(f64::INFINITY, f64::min) } else { vals.fold(f64::NEG_INFINITY, f64::max) };
        *o = unlift(p, phi);
    }
    out
}

/// Two-dimensional hull by brute force over planes through three lifted
/// points, for supports that are not collinear. Values on `f`'s grid.
pub fn hull_oracle_2d(f: &GridFunction, p: f64) -> Vec<f64> {
    let (nx, ny) = (f.shape()[0], f.shape()[1]);
    let pts: Vec<([f64; 2], f64)> = (0..f.len())
        .filter(|&k| f.values()[k] > 0.0)
        .map(|k| ([(k / ny) as f64, (k % ny) as f64], lift(p, f.values()[k])))
        .collect();
    let upper = p >= 0.0;
    let tol = 1e-12 * (1.0 + pts.iter().map(|q| q.1.abs()).fold(0.0, f64::max));
    let mut planes: Vec<(f64, f64, f64)> = Vec::new();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            for c in b + 1..pts.len() {
                let (pa, pb, pc) = (pts[a], pts[b], pts[c]);
                let u = [pb.0[0] - pa.0[0], pb.0[1] - pa.0[1]];
                let v = [pc.0[0] - pa.0[0], pc.0[1] - pa.0[1]];
                let det = u[0] * v[1] - u[1] * v[0];
                if det == 0.0 {
                    continue;
                }
                let (du, dv) = (pb.1 - pa.1, pc.1 - pa.1);
                let ax = (du * v[1] - dv * u[1]) / det;
                let ay = (dv * u[0] - du * v[0]) / det;
                let c0 = pa.1 - ax * pa.0[0] - ay * pa.0[1];
                let at = |q: [f64; 2]| c0 + ax * q[0] + ay * q[1];
                if pts.iter().all(|q| if upper { at(q.0) >= q.1 - tol } else { at(q.0) <= q.1 + tol }) {
                    planes.push((ax, ay, c0));
                }
            }
        }
    }
    let mut out = vec![0.0; f.len()];
    for i in 0..nx {
        for j in 0..ny {
            let z = [i as f64, j as f64];
            if !in_hull_2d(&pts.iter().map(|q| q.0).collect::<Vec<_>>(), z) {
                continue;
            }
            let vals = planes.iter().map(|&(ax, ay, c0)| c0 + ax * z[0] + ay * z[1]);
            let phi =
                if upper { vals.fold(f64::INFINITY, f64::min) } else { vals.fold(f64::NEG_INFINITY, f64::max) };
            out[i * ny + j] = unlift(p, phi);
        }
    }
    out
}

/// Whether `z` lies in a triangle (or on a segment) of the given points.
pub fn in_hull_2d(pts: &[[f64; 2]], z: [f64; 2]) -> bool {
    let eps = 1e-9;
    for a in 0..pts.len() {
        if pts[a] == z {
            return true;
        }
        for b in a + 1..pts.len() {
            let (pa, pb) = (pts[a], pts[b]);
            let cross = (pb[0] - pa[0]) * (z[1] - pa[1]) - (pb[1] - pa[1]) * (z[0] - pa[0]);
            let dot = (z[0] - pa[0]) * (pb[0] - pa[0]) + (z[1] - pa[1]) * (pb[1] - pa[1]);
            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
            if cross.abs() <= eps && dot >= -eps && dot <= len2 + eps {
                return true;
            }
            for c in b + 1..pts.len() {
                let pc = pts[c];
                let d = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
                if d == 0.0 {
                    continue;
                }
                let l1 = ((pb[0] - z[0]) * (pc[1] - z[1]) - (pb[1] - z[1]) * (pc[0] - z[0])) / d;
                let l2 = ((pc[0] - z[0]) * (pa[1] - z[1]) - (pc[1] - z[1]) * (pa[0] - z[0])) / d;
                let l3 = 1.0 - l1 - l2;
                if l1 >= -eps && l2 >= -eps && l3 >= -eps {
                    return true;
                }
            }
        }
    }
    false
}
