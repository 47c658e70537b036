//! Stability certificates: best translation, shaving, p-concave witnesses and
//! the distance ratios against the deficit; plus the planar cone
//! equipartition and the fiber projection used in dimension reduction.

mod cone;
mod fiber;
mod shave;

pub use cone::{cone_equipartition_2d, Cone2D, Equipartition, Sector};
pub use fiber::{fiber_companion_check, fiber_margins, fiber_project, FiberMargins, FiberProjection};
pub use shave::{default_c, shave, Shaved};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{l1_distance, Cell, GridFunction};
use crate::hull::{is_p_concave, p_concave_hull};
use crate::means::MeanParams;
use crate::supconv::{deficit, sup_convolution};

/// Relative mass tolerance for inputs that must carry equal mass.
pub const MASS_REL_TOL: f64 = 1e-6;

/// Tolerance, relative to `max ℓ`, for the witness concavity check.
pub const WITNESS_REL_TOL: f64 = 1e-9;

/// Everything a certifier measured. Fields a certifier does not compute stay
/// `None`.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `∫h/∫f - 1`.
    pub delta: f64,
    pub mass_f: f64,
    /// Pairs breaking `h(λx+(1-λ)y) ≥ M(f(x), g(y))`.
    pub hypothesis_violations: u64,
    /// True when violations were counted on a sample of pairs.
    pub hypothesis_sampled: bool,
    /// `v` minimizing `∫|f - g(·+v)|`, in cells.
    pub best_shift: Option<Vec<i64>>,
    pub symdiff_distance: Option<f64>,
    /// `symdiff_distance / (√δ · mass_f)`.
    pub ratio_sqrt: Option<f64>,
    /// `∫|f - ℓ|`.
    pub linear_gap: Option<f64>,
    /// `linear_gap / (δ · mass_f)`, with `δ` the self-deficit of the shaved input.
    pub ratio_linear: Option<f64>,
    /// `∫|f - ℓ| + ∫|g(·+v) - ℓ|`.
    pub main_distance: Option<f64>,
    /// `main_distance / (√δ · mass_f)`.
    pub ratio_main: Option<f64>,
    pub witness: Option<GridFunction>,
    pub witness_p_concave: Option<bool>,
    pub shave_removed: Option<f64>,
}

impl StabilityReport {
    fn new(delta: f64, mass_f: f64, violations: u64, sampled: bool) -> Self {
        Self {
            delta,
            mass_f,
            hypothesis_violations: violations,
            hypothesis_sampled: sampled,
            best_shift: None,
            symdiff_distance: None,
            ratio_sqrt: None,
            linear_gap: None,
            ratio_linear: None,
            main_distance: None,
            ratio_main: None,
            witness: None,
            witness_p_concave: None,
            shave_removed: None,
        }
    }

    /// The hypothesis held on every checked pair and any witness is p-concave.
    pub fn valid(&self) -> bool {
        self.hypothesis_violations == 0 && self.witness_p_concave != Some(false)
    }
}

/// `distance / scale`, with `0/0 = 0` and `x/0 = ∞`.
fn ratio(distance: f64, scale: f64, mass: f64) -> f64 {
    if scale > 0.0 {
        distance / scale
    } else if distance <= 1e-12 * mass {
        0.0
    } else {
        f64::INFINITY
    }
}

fn check_dim(f: &GridFunction, params: &MeanParams) -> Result<()> {
    match f.dim() {
        1 | 2 if params.n() == f.dim() => Ok(()),
        1 | 2 => Err(invalid(format!(
            "parameters are for dimension {} but the grid has dimension {}",
            params.n(),
            f.dim()
        ))),
        d => Err(invalid(format!("certificates are implemented for dimensions 1 and 2, got {d}"))),
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

/// `g(·+v)`, i.e. `g` moved by `-v` cells.
pub fn shift_back(g: &GridFunction, v: &[i64]) -> GridFunction {
    let neg: Vec<i64> = v.iter().map(|x| -x).collect();
    g.translate(&neg)
}

/// `∫|f - g(·+v)|`.
pub fn shifted_distance(f: &GridFunction, g: &GridFunction, v: &[i64]) -> Result<f64> {
    l1_distance(f, &shift_back(g, v))
}

/// Exhaustive search over cell shifts `v` with overlapping supports (plus
/// `v = 0`). Ties go to the smallest `|v|²`, then the lexicographically
/// smallest `v`. Returns `(v, ∫|f - g(·+v)|)`.
pub fn best_shift(f: &GridFunction, g: &GridFunction) -> Result<(Vec<i64>, f64)> {
    let dim = f.dim();
    let off = f.geometry().offset_of(g.geometry())?;
    let (Some((flo, fhi)), Some((glo, ghi))) = (f.support_bbox(), g.support_bbox()) else {
        return Err(Error::ZeroMass);
    };
    let vol = f.cell_volume();
    let mf: f64 = f.values().iter().sum::<f64>() * vol;
    let mg: f64 = g.values().iter().sum::<f64>() * vol;

    let mut lo = [0_i64; 3];
    let mut hi = [0_i64; 3];
    for a in 0..dim {
        lo[a] = (glo[a] + off[a] - fhi[a]).min(0);
        hi[a] = (ghi[a] + off[a] - flo[a]).max(0);
    }
    let mut shifts: Vec<Cell> = Vec::new();
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                shifts.push([i, j, k]);
            }
        }
    }
    let fsup: Vec<(Cell, f64)> =
        f.support().into_iter().map(|i| (f.geometry().unravel(i), f.values()[i])).collect();
    let gg = g.geometry();
    let (fv, gv) = (f.values(), g.values());
    let dist: Vec<f64> = shifts
        .par_iter()
        .map(|v| {
            if dim == 1 {
                // f cells x with x + v - off inside g, as one slice pair
                let start = (off[0] - v[0]).max(0);
                let end = (gv.len() as i64 + off[0] - v[0]).min(fv.len() as i64);
                let overlap: f64 = if start < end {
                    let (a, b) = (start as usize, end as usize);
                    let gs = (start + v[0] - off[0]) as usize;
                    fv[a..b].iter().zip(&gv[gs..gs + (b - a)]).map(|(x, y)| x.min(*y)).sum()
                } else {
                    0.0
                };
                return (mf + mg - 2.0 * overlap * vol).max(0.0);
            }
            let mut overlap = 0.0;
            for (x, fx) in &fsup {
                let local = [x[0] + v[0] - off[0], x[1] + v[1] - off[1], x[2] + v[2] - off[2]];
                if let Some(j) = gg.ravel(&local) {
                    overlap += fx.min(g.values()[j]);
                }
            }
            (mf + mg - 2.0 * overlap * vol).max(0.0)
        })
        .collect();

    let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let tie = best + 1e-12 * (mf + mg);
    let norm = |v: &Cell| v.iter().map(|x| x * x).sum::<i64>();
    let k = (0..shifts.len())
        .filter(|&k| dist[k] <= tie)
        .min_by(|&a, &b| norm(&shifts[a]).cmp(&norm(&shifts[b])).then(shifts[a].cmp(&shifts[b])))
        .expect("shift set contains zero");
    let v = shifts[k][..dim].to_vec();
    Ok((v, dist[k]))
}

/// Deficit of `(f, g, h)`, the best translation of `g`, and
/// `∫|f - g(·+v)| / (√δ · ∫f)`.
pub fn certify_symmetric_difference(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    params: &MeanParams,
) -> Result<StabilityReport> {
    check_dim(f, params)?;
    check_masses(f.integral(), g.integral())?;
    let d = deficit(f, g, h, params)?;
    let mut report = StabilityReport::new(d.delta, d.mass_f, d.pointwise_violations, d.sampled);
    let (v, dist) = best_shift(f, g)?;
    report.ratio_sqrt = Some(ratio(dist, d.delta.max(0.0).sqrt() * d.mass_f, d.mass_f));
    report.best_shift = Some(v);
    report.symdiff_distance = Some(dist);
    Ok(report)
}

/// Shaves `f`, takes the p-concave hull of the result as the witness `ℓ`,
/// and reports `∫|f - ℓ|` against `δ·∫f`. Without `h` the deficit is taken
/// against `M*(f, f)`.
pub fn certify_linear(
    f: &GridFunction,
    h: Option<&GridFunction>,
    params: &MeanParams,
    c: f64,
) -> Result<StabilityReport> {
    check_dim(f, params)?;
    if !(f.integral() > 0.0) {
        return Err(Error::ZeroMass);
    }
    let own;
    let h = match h {
        Some(h) => h,
        None => {
            own = sup_convolution(f, f, params)?;
            &own
        }
    };
    let d = deficit(f, f, h, params)?;
    let mut report = StabilityReport::new(d.delta, d.mass_f, d.pointwise_violations, d.sampled);
    let shaved = shave(f, params, c)?;
    let ell = p_concave_hull(&shaved.shaved, params.p())?.hull;
    let gap = l1_distance(f, &ell)?;
    let ok = is_p_concave(&ell, params.p(), WITNESS_REL_TOL * ell.max_value()).holds;
    report.linear_gap = Some(gap);
    report.ratio_linear = Some(ratio(gap, d.delta.max(0.0) * d.mass_f, d.mass_f));
    report.shave_removed = Some(shaved.removed);
    report.witness_p_concave = Some(ok);
    report.witness = Some(ell);
    Ok(report)
}

/// Symmetric-difference certificate, then a linear certificate for
/// `k = min(f, g(·+v))`, whose witness `ℓ` gives
/// `main_distance = ∫|f - ℓ| + ∫|g(·+v) - ℓ|`.
///
/// `delta`, the hypothesis counts and `ratio_sqrt` refer to `(f, g, h)`;
/// `linear_gap`, `ratio_linear` and `shave_removed` refer to `k`.
pub fn certify_main(
    f: &GridFunction,
    g: &GridFunction,
    h: &GridFunction,
    params: &MeanParams,
    c: f64,
) -> Result<StabilityReport> {
    let mut report = certify_symmetric_difference(f, g, h, params)?;
    let v = report.best_shift.clone().expect("filled by the symmetric certificate");
    let gv = shift_back(g, &v);
    let k = f.pointwise_min(&gv)?;
    let lin = certify_linear(&k, None, params, c)?;
    let ell = lin.witness.expect("filled by the linear certificate");
    let dist = l1_distance(f, &ell)? + l1_distance(&gv, &ell)?;
    report.main_distance = Some(dist);
    report.ratio_main = Some(ratio(dist, report.delta.max(0.0).sqrt() * report.mass_f, report.mass_f));
    report.linear_gap = lin.linear_gap;
    report.ratio_linear = lin.ratio_linear;
    report.shave_removed = lin.shave_removed;
    report.witness_p_concave = lin.witness_p_concave;
    report.witness = Some(ell);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(p: f64) -> MeanParams {
        MeanParams::new(0.5, p, 1).unwrap()
    }

    fn bumpy() -> GridFunction {
        GridFunction::line(0.0, 0.1, vec![0.0, 1.0, 2.0, 0.5, 0.0, 3.0, 1.0]).unwrap()
    }

    #[test]
    fn identical_inputs_have_zero_shift() {
        let f = GridFunction::line(0.0, 0.1, vec![1.0; 10]).unwrap();
        let h = sup_convolution(&f, &f, &half(0.0)).unwrap();
        let r = certify_symmetric_difference(&f, &f, &h, &half(0.0)).unwrap();
        assert_eq!(r.best_shift.as_deref(), Some(&[0_i64][..]));
        assert!(r.symdiff_distance.unwrap() < 1e-15);
        assert!(r.delta.abs() < 1e-12);
        assert!(r.valid());
    }

    #[test]
    fn translated_copy_is_found() {
        let f = bumpy();
        let g = f.translate(&[3]);
        let (v, d) = best_shift(&f, &g).unwrap();
        assert_eq!(v, vec![3]);
        assert!(d < 1e-15);
        assert!(shifted_distance(&f, &g, &v).unwrap() < 1e-15);
    }

    #[test]
    fn best_shift_beats_every_other_shift() {
        let f = bumpy();
        let g = GridFunction::line(0.3, 0.1, vec![2.0, 0.1, 0.0, 1.0, 2.5, 1.0, 0.4]).unwrap();
        let (v, d) = best_shift(&f, &g).unwrap();
        for s in -15..=15 {
            assert!(d <= shifted_distance(&f, &g, &[s]).unwrap() + 1e-12);
        }
        assert!((shifted_distance(&f, &g, &v).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_the_smallest_shift() {
        // disjoint supports give the same distance at every far shift
        let f = GridFunction::line(0.0, 1.0, vec![1.0]).unwrap();
        let g = GridFunction::line(0.0, 1.0, vec![1.0, 0.0, 1.0]).unwrap();
        let (v, _) = best_shift(&f, &g).unwrap();
        assert_eq!(v, vec![0]);
    }

    #[test]
    fn mass_mismatch_is_rejected() {
        let f = GridFunction::line(0.0, 0.1, vec![1.0; 4]).unwrap();
        let g = GridFunction::line(0.0, 0.1, vec![1.0; 5]).unwrap();
        assert!(matches!(
            certify_symmetric_difference(&f, &g, &g, &half(1.0)),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn concave_input_is_its_own_witness() {
        let vals: Vec<f64> = (0..20).map(|i| 1.0 - ((i as f64 + 0.5) / 10.0 - 1.0).abs()).collect();
        let f = GridFunction::line(0.0, 0.1, vals).unwrap();
        for p in [-0.25, 0.0, 1.0] {
            let r = certify_linear(&f, None, &half(p), 0.05).unwrap();
            assert!(r.linear_gap.unwrap() < 1e-12, "p = {p}");
            assert_eq!(r.shave_removed, Some(0.0));
            assert_eq!(r.witness_p_concave, Some(true));
        }
    }

    #[test]
    fn main_certificate_on_equal_concave_inputs() {
        let f = GridFunction::line(0.0, 0.1, vec![1.0; 12]).unwrap();
        let h = sup_convolution(&f, &f, &half(0.0)).unwrap();
        let r = certify_main(&f, &f, &h, &half(0.0), 0.05).unwrap();
        assert!(r.main_distance.unwrap() < 1e-12);
        assert_eq!(r.ratio_main, Some(0.0));
        assert!(r.valid());
    }

    #[test]
    fn user_h_violations_are_reported_not_fatal() {
        let f = GridFunction::line(0.0, 0.1, vec![1.0; 6]).unwrap();
        let h = GridFunction::line(0.0, 0.1, vec![0.5; 6]).unwrap();
        let r = certify_symmetric_difference(&f, &f, &h, &half(1.0)).unwrap();
        assert!(r.hypothesis_violations > 0);
        assert!(!r.valid());
    }
}
