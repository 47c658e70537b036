//! Greedy maximization of the shaving objective
//! `J(f') = ∫(M*(f,f) - M*(f',f')) - (1+c)∫(f - f')` over `f' = min(f, ℓ)`.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::hull::p_concave_hull;
use crate::means::MeanParams;
use crate::supconv::self_convolution_mass;

const MAX_MOVES: usize = 500;
const MAX_VERTICES_1D: usize = 64;
const MAX_POINTS_2D: usize = 12;
const MAX_CAPS: usize = 256;
const MAX_COMPONENTS: usize = 16;

#[derive(Debug, Clone)]
pub struct Shaved {
    pub shaved: GridFunction,
    /// `∫(f - f')`.
    pub removed: f64,
    /// `J(f')`; zero when nothing was removed.
    pub objective: f64,
    pub moves: usize,
}

/// `c` used when none is given: `0.1·λ`.
pub fn default_c(params: &MeanParams) -> f64 {
    0.1 * params.lambda()
}

#[derive(Clone, Copy)]
struct Lift(f64);

impl Lift {
    fn fwd(self, v: f64) -> f64 {
        if self.0 == 0.0 { v.ln() } else { v.powf(self.0) }
    }

    /// p-plane value from its affine part.
    fn plane(self, s: f64) -> f64 {
        let p = self.0;
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
}

fn evenly(items: &[usize], k: usize) -> Vec<usize> {
    if items.len() <= k {
        return items.to_vec();
    }
    (0..k).map(|j| items[j * (items.len() - 1) / (k - 1)]).collect()
}

fn fingerprint(v: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for x in v {
        x.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Maximal runs of positive cells, half-open.
fn runs(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (v > 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, values.len()));
    }
    out
}

/// 4-connected components of the support of a 2-D function.
fn components_2d(f: &GridFunction) -> Vec<Vec<usize>> {
    let shape = f.shape();
    let (nx, ny) = (shape[0], shape[1]);
    let mut label = vec![usize::MAX; f.len()];
    let mut comps = Vec::new();
    for start in 0..f.len() {
        if f.values()[start] <= 0.0 || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        label[start] = id;
        while let Some(k) = stack.pop() {
            members.push(k);
            let (i, j) = (k / ny, k % ny);
            let mut nbrs = Vec::with_capacity(4);
            if i > 0 { nbrs.push(k - ny); }
            if i + 1 < nx { nbrs.push(k + ny); }
            if j > 0 { nbrs.push(k - 1); }
            if j + 1 < ny { nbrs.push(k + 1); }
            for q in nbrs {
                if f.values()[q] > 0.0 && label[q] == usize::MAX {
                    label[q] = id;
                    stack.push(q);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

/// Points of `cur` where it touches its own p-concave hull.
fn hull_touching(cur: &GridFunction, p: f64) -> Result<Vec<usize>> {
    let hull = p_concave_hull(cur, p)?.hull;
    Ok(cur
        .support()
        .into_iter()
        .filter(|&i| cur.values()[i] >= hull.values()[i] * (1.0 - 1e-12))
        .collect())
}

/// Candidate replacements `min(cur, ℓ)` for the current iterate.
fn candidates(cur: &GridFunction, p: f64) -> Result<Vec<Vec<f64>>> {
    let lift = Lift(p);
    let vals = cur.values();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let cap_with = |plane: &dyn Fn(usize) -> f64| -> Vec<f64> {
        vals.iter().enumerate().map(|(k, &v)| if v > 0.0 { v.min(plane(k)) } else { 0.0 }).collect()
    };

    match cur.dim() {
        1 => {
            let comps = runs(vals);
            let phi: Vec<f64> = vals.iter().map(|&v| if v > 0.0 { lift.fwd(v) } else { f64::NAN }).collect();
            let scale = phi.iter().filter(|x| x.is_finite()).fold(0.0_f64, |m, x| m.max(x.abs())) + 1.0;
            let mut verts = Vec::new();
            for &(s, e) in &comps {
                verts.push(s);
                for i in s + 1..e.saturating_sub(1) {
                    let second = phi[i - 1] - 2.0 * phi[i] + phi[i + 1];
                    if second.abs() > 1e-12 * scale {
                        verts.push(i);
                    }
                }
                if e - 1 > s {
                    verts.push(e - 1);
                }
            }
            let touching = hull_touching(cur, p)?;
            if verts.len() > MAX_VERTICES_1D {
                let t: HashSet<usize> = touching.iter().copied().collect();
                verts.retain(|v| t.contains(v));
                verts = evenly(&verts, MAX_VERTICES_1D);
            }
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            for a in 0..verts.len() {
                for b in a + 1..verts.len() {
                    pairs.push((verts[a], verts[b]));
                }
            }
            // consecutive touching pairs on one facet give the same plane
            let mut last: Option<(f64, f64)> = None;
            for w in touching.windows(2) {
                let slope = (phi[w[1]] - phi[w[0]]) / (w[1] - w[0]) as f64;
                let icpt = phi[w[0]] - slope * w[0] as f64;
                let same = last.is_some_and(|(s0, c0)| {
                    (slope - s0).abs() <= 1e-12 * scale && (icpt - c0).abs() <= 1e-12 * scale * vals.len() as f64
                });
                if !same {
                    pairs.push((w[0], w[1]));
                    last = Some((slope, icpt));
                }
            }
            for (i, j) in pairs {
                let slope = (phi[j] - phi[i]) / (j - i) as f64;
                let base = phi[i];
                out.push(cap_with(&|k: usize| lift.plane(base + slope * (k as f64 - i as f64))));
            }
            for k in 0..comps.len() {
                for l in k..comps.len() {
                    if k == 0 && l == comps.len() - 1 {
                        continue;
                    }
                    let (lo, hi) = (comps[k].0, comps[l].1);
                    out.push(vals.iter().enumerate().map(|(i, &v)| if i >= lo && i < hi { v } else { 0.0 }).collect());
                }
            }
        }
        2 => {
            let geom = cur.geometry();
            let sup = cur.support();
            let pts = if sup.len() <= 20 { sup.clone() } else { hull_touching(cur, p)? };
            let pts = evenly(&pts, MAX_POINTS_2D);
            let lifted: Vec<([f64; 2], f64)> = pts
                .iter()
                .map(|&k| {
                    let c = geom.unravel(k);
                    ([c[0] as f64, c[1] as f64], lift.fwd(vals[k]))
                })
                .collect();
            for a in 0..lifted.len() {
                for b in a + 1..lifted.len() {
                    for c in b + 1..lifted.len() {
                        let (pa, pb, pc) = (lifted[a], lifted[b], lifted[c]);
                        let u = [pb.0[0] - pa.0[0], pb.0[1] - pa.0[1]];
                        let v = [pc.0[0] - pa.0[0], pc.0[1] - pa.0[1]];
                        let det = u[0] * v[1] - u[1] * v[0];
                        if det == 0.0 {
                            continue;
                        }
                        let (du, dv) = (pb.1 - pa.1, pc.1 - pa.1);
                        let ax = (du * v[1] - dv * u[1]) / det;
                        let ay = (dv * u[0] - du * v[0]) / det;
                        out.push(cap_with(&|k: usize| {
                            let q = geom.unravel(k);
                            lift.plane(pa.1 + ax * (q[0] as f64 - pa.0[0]) + ay * (q[1] as f64 - pa.0[1]))
                        }));
                    }
                }
            }
            let comps = components_2d(cur);
            if comps.len() > 1 && comps.len() <= MAX_COMPONENTS {
                for comp in &comps {
                    let keep: HashSet<usize> = comp.iter().copied().collect();
                    out.push(vals.iter().enumerate().map(|(i, &v)| if keep.contains(&i) { v } else { 0.0 }).collect());
                    out.push(vals.iter().enumerate().map(|(i, &v)| if keep.contains(&i) { 0.0 } else { v }).collect());
                }
            }
        }
        _ => return Err(invalid("shaving is implemented for dimensions 1 and 2")),
    }

    let mut levels: Vec<f64> = vals.iter().copied().filter(|&v| v > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels.pop();
    let idx: Vec<usize> = (0..levels.len()).collect();
    for k in evenly(&idx, MAX_CAPS) {
        let t = levels[k];
        out.push(vals.iter().map(|&v| v.min(t)).collect());
    }
    Ok(out)
}

/// Greedy steepest ascent on `J` to a fixpoint of the candidate family.
pub fn shave(f: &GridFunction, params: &MeanParams, c: f64) -> Result<Shaved> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("c must lie in (0, 1), got {c}")));
    }
    let mass = f.integral();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let p = params.p();
    let base = self_convolution_mass(f, params)?;
    let accept = 1e-14 * mass;

    let mut cur = f.clone();
    let mut cur_s = base;
    let mut cur_m = mass;
    let mut moves = 0;
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(fingerprint(cur.values()));
    while moves < MAX_MOVES {
        let mut cands = candidates(&cur, p)?;
        cands.retain(|v| seen.insert(fingerprint(v)));
        if cands.is_empty() {
            break;
        }
        let scored: Vec<Result<(f64, f64, f64)>> = cands
            .par_iter()
            .map(|v| {
                let g = GridFunction::from_geometry(cur.geometry().clone(), v.clone())?;
                let m = g.integral();
                if !(m > 0.0) {
                    return Ok((f64::NEG_INFINITY, 0.0, 0.0));
                }
                let s = self_convolution_mass(&g, params)?;
                Ok(((cur_s - s) - (1.0 + c) * (cur_m - m), s, m))
            })
            .collect();
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (k, r) in scored.into_iter().enumerate() {
            let (gain, s, m) = r?;
            if best.map_or(true, |b| gain > b.1) {
                best = Some((k, gain, s, m));
            }
        }
        let Some((k, gain, s, m)) = best else { break };
        if !(gain > accept) {
            break;
        }
        cur = GridFunction::from_geometry(cur.geometry().clone(), cands.swap_remove(k))?;
        cur_s = s;
        cur_m = m;
        moves += 1;
    }
    let removed = mass - cur_m;
    let objective = (base - cur_s) - (1.0 + c) * removed;
    Ok(Shaved { shaved: cur, removed, objective, moves })
}
