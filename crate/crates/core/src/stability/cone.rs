//! Three fixed planar sectors and the translate that splits a mass evenly
//! among them.
//!
//! Relative to the apex `a`, with `(X, Y) = (x, y) - a`:
//! `K1 = {X < 0, |Y| ≤ |X|}`, `K2 = {Y ≥ max(0, -X)}`, `K3 = {Y ≤ min(0, X)}`.
//! `K1` spans 90 degrees and the other two 135 degrees each, so the
//! balancing apex of a symmetric bump sits slightly right of its center.

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    K1,
    K2,
    K3,
}

/// Inward normals `(nx, ny)` of the two half-planes `n·(X, Y) ≥ 0` cutting
/// out each sector.
const HALF_PLANES: [[[f64; 2]; 2]; 3] = [
    [[-1.0, -1.0], [-1.0, 1.0]],
    [[0.0, 1.0], [1.0, 1.0]],
    [[0.0, -1.0], [1.0, -1.0]],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone2D {
    pub apex: [f64; 2],
}

impl Cone2D {
    pub fn new(apex: [f64; 2]) -> Self {
        Self { apex }
    }

    /// Sector containing `pt`. Shared boundary rays go to `K1`, then `K2`.
    pub fn sector_of(&self, pt: [f64; 2]) -> Sector {
        let x = pt[0] - self.apex[0];
        let y = pt[1] - self.apex[1];
        if x < 0.0 && y.abs() <= -x {
            Sector::K1
        } else if y >= 0.0_f64.max(-x) {
            Sector::K2
        } else {
            Sector::K3
        }
    }

    /// `∫_{a+K_i} f` for the piecewise-constant extension of `f`, with cell
    /// and sector intersections computed exactly.
    pub fn sector_masses(&self, f: &GridFunction) -> Result<[f64; 3]> {
        if f.dim() != 2 {
            return Err(invalid(format!("sector masses need a 2-D grid, got dimension {}", f.dim())));
        }
        let geom = f.geometry();
        let h = geom.spacing();
        let mut out = [0.0; 3];
        for k in f.support() {
            let c = geom.unravel(k);
            let x0 = geom.origin()[0] + c[0] as f64 * h - self.apex[0];
            let y0 = geom.origin()[1] + c[1] as f64 * h - self.apex[1];
            let a = cell_areas(x0, y0, h);
            let v = f.values()[k];
            for i in 0..3 {
                out[i] += v * a[i];
            }
        }
        Ok(out)
    }
}

fn inside(n: [f64; 2], p: [f64; 2]) -> f64 {
    n[0] * p[0] + n[1] * p[1]
}

/// Clips a convex polygon to `n·p ≥ 0`.
fn clip(poly: &[[f64; 2]], n: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (inside(n, a), inside(n, b));
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

/// Areas of the square `[x0, x0+h] × [y0, y0+h]` (apex-relative) in each sector.
fn cell_areas(x0: f64, y0: f64, h: f64) -> [f64; 3] {
    let square = [[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]];
    let full = h * h;
    let mut out = [0.0; 3];
    for (s, planes) in HALF_PLANES.iter().enumerate().take(2) {
        let all_in = square.iter().all(|&p| planes.iter().all(|&n| inside(n, p) >= 0.0));
        if all_in {
            out[s] = full;
            return out;
        }
        let all_out = planes.iter().any(|&n| square.iter().all(|&p| inside(n, p) <= 0.0));
        if all_out {
            continue;
        }
        let poly = clip(&clip(&square, planes[0]), planes[1]);
        if poly.len() >= 3 {
            out[s] = area(&poly);
        }
    }
    out[2] = (full - out[0] - out[1]).max(0.0);
    out
}

/// Result of the equipartition search.
#[derive(Debug, Clone, PartialEq)]
pub struct Equipartition {
    pub cone: Cone2D,
    pub masses: [f64; 3],
    /// `max_i |m_i - M/3|`.
    pub residual: f64,
    pub iterations: usize,
}

const MAX_BISECTIONS: usize = 200;

/// Bisection for the last `t` in `[lo, hi]` with `sign(t) > 0`, assuming
/// `sign(lo) > 0 ≥ sign(hi)` and a monotone sign change.
fn bisect(mut lo: f64, mut hi: f64, mut positive: impl FnMut(f64) -> Result<bool>, count: &mut usize) -> Result<f64> {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        *count += 1;
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Apex `a` with `∫_{a+K_i} f = ∫f / 3` for each sector, to `1e-6·∫f`.
///
/// For fixed `a_x`, moving the apex up only shrinks `a+K2` and grows `a+K3`,
/// so `a_y` balancing those two is found by bisection. Moving right then
/// grows `a+K1`, so an outer bisection on `a_x` brings `K1` to a third.
pub fn cone_equipartition_2d(f: &GridFunction) -> Result<Equipartition> {
    if f.dim() != 2 {
        return Err(invalid(format!("equipartition needs a 2-D grid, got dimension {}", f.dim())));
    }
    let mass = f.integral();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let geom = f.geometry();
    let h = geom.spacing();
    let (lo, hi) = f.support_bbox().expect("positive mass");
    let xmin = geom.origin()[0] + lo[0] as f64 * h;
    let xmax = geom.origin()[0] + (hi[0] + 1) as f64 * h;
    let ymin = geom.origin()[1] + lo[1] as f64 * h;
    let ymax = geom.origin()[1] + (hi[1] + 1) as f64 * h;
    let (w, t) = (xmax - xmin, ymax - ymin);
    let ax_lo = xmin - h;
    let ax_hi = xmax + t + h;
    let pad = 4.0 * (w + t + h);
    let tol = 1e-6 * mass;
    let third = mass / 3.0;
    let mut iterations = 0;

    let balance_y = |ax: f64, count: &mut usize| -> Result<f64> {
        bisect(
            ymin - pad,
            ymax + pad,
            |ay| {
                let m = Cone2D::new([ax, ay]).sector_masses(f)?;
                Ok(m[1] > m[2])
            },
            count,
        )
    };

    let mut inner = 0;
    let ax = bisect(
        ax_lo,
        ax_hi,
        |ax| {
            let ay = balance_y(ax, &mut inner)?;
            let m = Cone2D::new([ax, ay]).sector_masses(f)?;
            Ok(m[0] < third)
        },
        &mut iterations,
    )?;
    let ay = balance_y(ax, &mut inner)?;
    iterations += inner;
    let cone = Cone2D::new([ax, ay]);
    let masses = cone.sector_masses(f)?;
    let residual = masses.iter().map(|m| (m - third).abs()).fold(0.0, f64::max);
    if residual > tol {
        return Err(Error::NoConvergence { iterations, residual });
    }
    Ok(Equipartition { cone, masses, residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    #[test]
    fn sectors_tile_the_plane() {
        let cone = Cone2D::new([0.3, -0.2]);
        let f = GridFunction::from_fn(Geometry::new(vec![-2.0, -2.0], 0.1, vec![40, 40]).unwrap(), |_| 1.0)
            .unwrap();
        let m = cone.sector_masses(&f).unwrap();
        assert!((m.iter().sum::<f64>() - f.integral()).abs() < 1e-12);
        assert_eq!(cone.sector_of([-1.0, 0.0]), Sector::K1);
        assert_eq!(cone.sector_of([1.0, 0.5]), Sector::K2);
        assert_eq!(cone.sector_of([1.0, -0.5]), Sector::K3);
        assert_eq!(cone.sector_of([0.3, -0.2]), Sector::K2);
    }

    #[test]
    fn exact_areas_of_split_cells() {
        // unit square centered on the apex: K1 gets a quarter, K2 and K3 3/8 each
        let a = cell_areas(-0.5, -0.5, 1.0);
        assert!((a[0] - 0.25).abs() < 1e-15);
        assert!((a[1] - 0.375).abs() < 1e-15);
        assert!((a[2] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn uniform_square_apex() {
        // the K1 share of [-1,1]^2 from apex (a, 0) is 2a + 1, a third at a = 1/6
        let g = Geometry::new(vec![-1.0, -1.0], 0.05, vec![40, 40]).unwrap();
        let f = GridFunction::from_fn(g, |_| 1.0).unwrap();
        let e = cone_equipartition_2d(&f).unwrap();
        assert!((e.cone.apex[0] - 1.0 / 6.0).abs() < 1e-6);
        assert!(e.cone.apex[1].abs() < 1e-6);
        assert!(e.residual <= 1e-6 * f.integral());
    }

    #[test]
    fn rejects_zero_mass() {
        let g = Geometry::new(vec![0.0, 0.0], 1.0, vec![3, 3]).unwrap();
        assert!(matches!(cone_equipartition_2d(&GridFunction::zeros(g)), Err(Error::ZeroMass)));
    }
}
