//! Projection of a three-dimensional function, constant along the fibers of
//! a cone, onto the plane of the two remaining axes.

use crate::error::{invalid, Error, Result};
use crate::grid::{Geometry, GridFunction};
use crate::means::{check_pq_switch, exponent_map, power_mean, Margin, MeanParams};
use crate::supconv::{verify_bbl_hypothesis, Violation};

#[derive(Debug, Clone)]
pub struct FiberProjection {
    /// `F(z, w) = |C^{z,w}| · f|_{C^{z,w}}`.
    pub projected: GridFunction,
    /// `|C^{z,w}|`, the length of each fiber of the cone.
    pub fiber_measure: GridFunction,
    /// Largest `max - min` of `f` over a fiber.
    pub max_oscillation: f64,
}

impl FiberProjection {
    /// Value of `f` on the fiber over `k`, or zero for an empty fiber.
    pub fn fiber_value(&self, k: usize) -> f64 {
        let m = self.fiber_measure.values()[k];
        if m > 0.0 { self.projected.values()[k] / m } else { 0.0 }
    }
}

/// Projects `f · 1_C` along axis `axes[2]`; the output grid uses axes
/// `axes[0]` and `axes[1]`. `cone` is a row-major mask on `f`'s grid.
/// The fiber value is the mean of `f` over the fiber, so integrals are
/// preserved; a fiber whose values spread by more than `tol` is an error.
pub fn fiber_project(f: &GridFunction, cone: &[bool], axes: [usize; 3], tol: f64) -> Result<FiberProjection> {
    if f.dim() != 3 {
        return Err(invalid(format!("fiber projection needs a 3-D grid, got dimension {}", f.dim())));
    }
    let mut sorted = axes;
    sorted.sort_unstable();
    if sorted != [0, 1, 2] {
        return Err(invalid(format!("axes {axes:?} are not a permutation of 0, 1, 2")));
    }
    if cone.len() != f.len() {
        return Err(Error::GeometryMismatch("cone mask does not match the grid".into()));
    }
    let geom = f.geometry();
    let h = geom.spacing();
    let shape = geom.shape();
    let out_geom = Geometry::new(
        vec![geom.origin()[axes[0]], geom.origin()[axes[1]]],
        h,
        vec![shape[axes[0]], shape[axes[1]]],
    )?;
    let (n0, n1, nf) = (shape[axes[0]], shape[axes[1]], shape[axes[2]]);
    let mut projected = vec![0.0; n0 * n1];
    let mut measure = vec![0.0; n0 * n1];
    let mut worst: f64 = 0.0;
    for i in 0..n0 {
        for j in 0..n1 {
            let (mut sum, mut count) = (0.0, 0_usize);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for t in 0..nf {
                let mut cell = [0_i64; 3];
                cell[axes[0]] = i as i64;
                cell[axes[1]] = j as i64;
                cell[axes[2]] = t as i64;
                let k = geom.ravel(&cell).expect("inside the grid");
                if !cone[k] {
                    continue;
                }
                let v = f.values()[k];
                sum += v;
                count += 1;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if count == 0 {
                continue;
            }
            let osc = hi - lo;
            if osc > tol {
                return Err(Error::FiberOscillation { oscillation: osc, tol });
            }
            worst = worst.max(osc);
            let len = count as f64 * h;
            measure[i * n1 + j] = len;
            projected[i * n1 + j] = sum / count as f64 * len;
        }
    }
    Ok(FiberProjection {
        projected: GridFunction::from_geometry(out_geom.clone(), projected)?,
        fiber_measure: GridFunction::from_geometry(out_geom, measure)?,
        max_oscillation: worst,
    })
}

#[derive(Debug, Clone)]
pub struct FiberMargins {
    /// `b·M_{λ,p}(u, v) - M_{λ,q}(a·u, c·v)` per commensurate pair.
    pub margins: Vec<Margin>,
    /// Pairs whose combined point has an empty middle fiber.
    pub skipped: usize,
}

impl FiberMargins {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the exponent switch `b·M_{λ,p}(u,v) ≥ M_{λ,q}(a·u, c·v)` with
/// `q = p/(1+p)` at every pair `(x, y)` of support points of the two
/// projections whose combination `z` is a grid point. Here `a`, `c` are the
/// fiber lengths over `x`, `y`, `b` is `mid`'s fiber length over `z`, and
/// `u`, `v` the fiber values.
pub fn fiber_margins(
    f: &FiberProjection,
    g: &FiberProjection,
    mid: &GridFunction,
    lambda: f64,
    p: f64,
) -> Result<FiberMargins> {
    let q = exponent_map(p, 1)?;
    let ratio = crate::supconv::Ratio::from_lambda(lambda)?;
    let fg = f.projected.geometry();
    let goff = fg.offset_of(g.projected.geometry())?;
    let moff = fg.offset_of(mid.geometry())?;
    let mut margins = Vec::new();
    let mut skipped = 0;
    for x in f.projected.support() {
        let xc = fg.unravel(x);
        let a = f.fiber_measure.values()[x];
        let u = f.fiber_value(x);
        for y in g.projected.support() {
            let yl = g.projected.geometry().unravel(y);
            let yc = [yl[0] + goff[0], yl[1] + goff[1], 0];
            let (Some(z0), Some(z1)) = (ratio.combine(xc[0], yc[0]), ratio.combine(xc[1], yc[1])) else {
                continue;
            };
            let b = mid
                .geometry()
                .ravel(&[z0 - moff[0], z1 - moff[1], 0])
                .map_or(0.0, |k| mid.values()[k]);
            if !(b > 0.0) {
                skipped += 1;
                continue;
            }
            let c = g.fiber_measure.values()[y];
            let v = g.fiber_value(y);
            let m = if p < 0.0 {
                check_pq_switch(lambda, p, 1, a, b, c, u, v)?
            } else {
                Margin::new(b * power_mean(lambda, p, u, v), power_mean(lambda, q, a * u, c * v))
            };
            margins.push(m);
        }
    }
    Ok(FiberMargins { margins, skipped })
}

/// Checks `H(λx + (1-λ)y) ≥ M_{λ,q}(F(x), G(y))` for the projections, with
/// `q = p/(1+p)` the exponent for one collapsed dimension.
pub fn fiber_companion_check(
    f: &FiberProjection,
    g: &FiberProjection,
    h: &FiberProjection,
    lambda: f64,
    p: f64,
) -> Result<Vec<Violation>> {
    let q = exponent_map(p, 1)?;
    let params = MeanParams::new(lambda, q, 2)?;
    verify_bbl_hypothesis(&f.projected, &g.projected, &h.projected, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cone over a 6×4 base whose fiber over `(i, j)` has `2 + i` cells.
    fn wedge(value: impl Fn(usize, usize) -> f64) -> (GridFunction, Vec<bool>) {
        let geom = Geometry::new(vec![0.0, 0.0, 0.0], 0.25, vec![6, 4, 8]).unwrap();
        let mut vals = vec![0.0; geom.len()];
        let mut mask = vec![false; geom.len()];
        for k in 0..geom.len() {
            let c = geom.unravel(k);
            if (c[2] as usize) < 2 + c[0] as usize {
                mask[k] = true;
                vals[k] = value(c[0] as usize, c[1] as usize);
            }
        }
        (GridFunction::from_geometry(geom, vals).unwrap(), mask)
    }

    #[test]
    fn unit_function_projects_to_fiber_length() {
        let (f, mask) = wedge(|_, _| 1.0);
        let pr = fiber_project(&f, &mask, [0, 1, 2], 1e-12).unwrap();
        for k in 0..pr.projected.len() {
            let i = pr.projected.geometry().unravel(k)[0] as f64;
            assert!((pr.projected.values()[k] - (2.0 + i) * 0.25).abs() < 1e-15);
        }
        assert!((pr.projected.integral() - f.integral()).abs() < 1e-12);
    }

    #[test]
    fn oscillating_fiber_is_rejected() {
        let (base, mask) = wedge(|_, _| 1.0);
        let vals: Vec<f64> = base.values().iter().enumerate().map(|(k, v)| v * (1.0 + (k % 2) as f64)).collect();
        let f = GridFunction::from_geometry(base.geometry().clone(), vals).unwrap();
        assert!(matches!(fiber_project(&f, &mask, [0, 1, 2], 1e-9), Err(Error::FiberOscillation { .. })));
    }

    #[test]
    fn zero_function_projects_to_zero() {
        let (f, mask) = wedge(|_, _| 0.0);
        let pr = fiber_project(&f, &mask, [1, 0, 2], 0.0).unwrap();
        assert_eq!(pr.projected.shape(), &[4, 6]);
        assert!(pr.projected.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_fibers_satisfy_the_switch() {
        let (f, mask) = wedge(|i, j| 1.0 + 0.3 * i as f64 + 0.1 * j as f64);
        let (g, _) = wedge(|i, j| 2.0 - 0.2 * i as f64 + 0.05 * (j * j) as f64);
        let pf = fiber_project(&f, &mask, [0, 1, 2], 1e-12).unwrap();
        let pg = fiber_project(&g, &mask, [0, 1, 2], 1e-12).unwrap();
        for p in [-0.3, 0.0, 0.5, 2.0] {
            let m = fiber_margins(&pf, &pg, &pf.fiber_measure, 0.5, p).unwrap();
            assert!(!m.margins.is_empty());
            assert!(m.margins.iter().all(|x| x.margin >= -1e-9 * x.scale()), "p = {p}");
        }
    }
}
