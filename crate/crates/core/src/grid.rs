//! Nonnegative functions sampled on uniform, axis-aligned, cell-centered grids.
//!
//! Every grid lives on a lattice: two grids are compatible when they share
//! dimension and spacing and their origins differ by a whole number of cells.
//! Binary operations embed both operands into the union window of that
//! lattice, so translated functions never need resampling.

use crate::error::{Error, Result};

/// Integer lattice coordinates; unused axes are zero.
pub type Cell = [i64; 3];

/// Largest supported dimension. Only the fiber projection uses dimension 3.
pub const MAX_DIM: usize = 3;

const LATTICE_TOL: f64 = 1e-6;

/// Origin, spacing and shape of a grid. Cell `i` along an axis covers
/// `[origin + i·h, origin + (i+1)·h)` and is sampled at its center.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
}

impl Geometry {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension must be 1..=3, got {dim}")));
        }
        if origin.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "origin has {} coordinates for a {dim}-dimensional grid",
                origin.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("shape components must be at least 1".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }
        Ok(Self { origin, spacing, shape })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Local multi-index of a flat (row-major) index.
    pub fn unravel(&self, flat: usize) -> Cell {
        let mut out = [0_i64; 3];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            out[axis] = (rem % self.shape[axis]) as i64;
            rem /= self.shape[axis];
        }
        out
    }

    /// Flat index of a local multi-index, if inside the grid.
    pub fn ravel(&self, cell: &Cell) -> Option<usize> {
        let mut flat = 0_usize;
        for axis in 0..self.dim() {
            let c = cell[axis];
            if c < 0 || c >= self.shape[axis] as i64 {
                return None;
            }
            flat = flat * self.shape[axis] + c as usize;
        }
        Some(flat)
    }

    /// Center of a cell given by local multi-index (may lie outside the grid).
    pub fn center_of(&self, cell: &Cell) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.origin[a] + (cell[a] as f64 + 0.5) * self.spacing)
            .collect()
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.center_of(&self.unravel(flat))
    }

    /// Whole-cell offset of `other`'s origin relative to this origin.
    pub fn offset_of(&self, other: &Geometry) -> Result<Cell> {
        if other.dim() != self.dim() {
            return Err(Error::GeometryMismatch(format!(
                "dimension {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        if (other.spacing - self.spacing).abs() > 1e-12 * self.spacing {
            return Err(Error::GeometryMismatch(format!(
                "spacing {} vs {}",
                self.spacing, other.spacing
            )));
        }
        let mut out = [0_i64; 3];
        for a in 0..self.dim() {
            let shift = (other.origin[a] - self.origin[a]) / self.spacing;
            let r = shift.round();
            if (shift - r).abs() > LATTICE_TOL {
                return Err(Error::GeometryMismatch(format!(
                    "origins differ by {shift} cells along axis {a}"
                )));
            }
            out[a] = r as i64;
        }
        Ok(out)
    }

    /// Geometry on the same lattice covering local cells `lo .. lo + shape`.
    pub fn window(&self, lo: &Cell, shape: Vec<usize>) -> Geometry {
        let origin = (0..self.dim())
            .map(|a| self.origin[a] + lo[a] as f64 * self.spacing)
            .collect();
        Geometry { origin, spacing: self.spacing, shape }
    }

    /// Smallest window on this lattice containing every geometry in `others`,
    /// together with each geometry's offset inside it.
    pub fn union_window(geoms: &[&Geometry]) -> Result<(Geometry, Vec<Cell>)> {
        let base = geoms[0];
        let dim = base.dim();
        let mut offsets = Vec::with_capacity(geoms.len());
        for g in geoms {
            offsets.push(base.offset_of(g)?);
        }
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (g, off) in geoms.iter().zip(&offsets) {
            for a in 0..dim {
                lo[a] = lo[a].min(off[a]);
                hi[a] = hi[a].max(off[a] + g.shape[a] as i64);
            }
        }
        for a in dim..3 {
            lo[a] = 0;
            hi[a] = 1;
        }
        let shape = (0..dim).map(|a| (hi[a] - lo[a]) as usize).collect();
        let window = base.window(&lo, shape);
        let rel = offsets
            .iter()
            .map(|o| {
                let mut r = [0_i64; 3];
                for a in 0..dim {
                    r[a] = o[a] - lo[a];
                }
                r
            })
            .collect();
        Ok((window, rel))
    }

    fn translated(&self, shift: &[i64]) -> Geometry {
        let origin = (0..self.dim())
            .map(|a| self.origin[a] + shift.get(a).copied().unwrap_or(0) as f64 * self.spacing)
            .collect();
        Geometry { origin, spacing: self.spacing, shape: self.shape.clone() }
    }
}

pub(crate) fn add_cells(a: &Cell, b: &Cell) -> Cell {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// A nonnegative function on a grid; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    geom: Geometry,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::from_geometry(Geometry::new(origin, spacing, shape)?, values)
    }

    pub fn from_geometry(geom: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of {} cells",
                values.len(),
                geom.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "values must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self { geom, values })
    }

    pub fn zeros(geom: Geometry) -> Self {
        let n = geom.len();
        Self { geom, values: vec![0.0; n] }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(geom: Geometry, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..geom.len()).map(|i| f(&geom.center(i))).collect();
        Self::from_geometry(geom, values)
    }

    /// One-dimensional convenience constructor.
    pub fn line(origin: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(vec![origin], spacing, vec![n], values)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.geom.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.geom.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.geom.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.geom.cell_volume()
    }

    pub fn at(&self, cell: &Cell) -> f64 {
        self.geom.ravel(cell).map_or(0.0, |i| self.values[i])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Flat indices of cells with positive value, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.values[i] > 0.0).collect()
    }

    pub fn support_measure(&self) -> f64 {
        self.values.iter().filter(|&&v| v > 0.0).count() as f64 * self.cell_volume()
    }

    /// Local bounding box `[lo, hi]` (inclusive) of the support.
    pub fn support_bbox(&self) -> Option<(Cell, Cell)> {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        let mut any = false;
        for i in 0..self.len() {
            if self.values[i] > 0.0 {
                any = true;
                let c = self.geom.unravel(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Midpoint quadrature: sum of values times the cell volume.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Strict super-level set `{f > t}`.
    pub fn level_set(&self, t: f64) -> LevelSet {
        let mask: Vec<bool> = self.values.iter().map(|&v| v > t).collect();
        LevelSet::from_mask(self.geom.clone(), t, mask)
    }

    /// Midpoint quadrature of `t ↦ |{f > t}|` over `[0, max f]` with
    /// `n_heights` equal steps.
    pub fn layer_cake_integral(&self, n_heights: usize) -> Result<f64> {
        if n_heights == 0 {
            return Err(Error::InvalidParameter("n_heights must be at least 1".into()));
        }
        let top = self.max_value();
        if top == 0.0 {
            return Ok(0.0);
        }
        let mut sorted: Vec<f64> = self.values.iter().copied().filter(|&v| v > 0.0).collect();
        sorted.sort_by(f64::total_cmp);
        let step = top / n_heights as f64;
        let mut total = 0.0;
        let mut below = 0_usize;
        for k in 0..n_heights {
            let t = (k as f64 + 0.5) * step;
            while below < sorted.len() && sorted[below] <= t {
                below += 1;
            }
            total += (sorted.len() - below) as f64;
        }
        Ok(total * self.cell_volume() * step)
    }

    /// Layer cake with breakpoints at the distinct values, exact for
    /// piecewise-constant functions up to rounding.
    pub fn layer_cake_exact(&self) -> f64 {
        let mut sorted: Vec<f64> = self.values.iter().copied().filter(|&v| v > 0.0).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut total = 0.0;
        let mut prev = 0.0;
        let mut i = 0;
        while i < n {
            let v = sorted[i];
            total += (v - prev) * (n - i) as f64;
            prev = v;
            while i < n && sorted[i] == v {
                i += 1;
            }
        }
        total * self.cell_volume()
    }

    /// Shift by whole cells: `(translate(f, v))(x) = f(x - v·h)`.
    pub fn translate(&self, shift: &[i64]) -> GridFunction {
        Self { geom: self.geom.translated(shift), values: self.values.clone() }
    }

    /// Pointwise `min(f, c)`.
    pub fn cap(&self, c: f64) -> Result<GridFunction> {
        if !(c >= 0.0) {
            return Err(Error::InvalidParameter(format!("cap level must be nonnegative, got {c}")));
        }
        Ok(self.map(|v| v.min(c)))
    }

    pub fn scale(&self, k: f64) -> Result<GridFunction> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be nonnegative, got {k}")));
        }
        Ok(self.map(|v| v * k))
    }

    /// Rescaled to unit integral.
    pub fn normalize(&self) -> Result<GridFunction> {
        let m = self.integral();
        if !(m > 0.0) {
            return Err(Error::ZeroMass);
        }
        let mut out = self.map(|v| v / m);
        // one correction step brings the sum to within an ulp or two of 1
        let m2 = out.integral();
        if m2 != 1.0 {
            out = out.map(|v| v / m2);
        }
        Ok(out)
    }

    /// `f · 1_S`.
    pub fn restrict(&self, set: &LevelSet) -> Result<GridFunction> {
        let off = self.geom.offset_of(set.geometry())?;
        let values = (0..self.len())
            .map(|i| {
                let c = self.geom.unravel(i);
                let local = [c[0] - off[0], c[1] - off[1], c[2] - off[2]];
                match set.geometry().ravel(&local) {
                    Some(j) if set.contains(j) => self.values[i],
                    _ => 0.0,
                }
            })
            .collect();
        Ok(Self { geom: self.geom.clone(), values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self { geom: self.geom.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Same function on a larger (or smaller) window of its lattice; cells
    /// outside the original grid read as zero.
    pub fn embed(&self, window: &Geometry) -> Result<GridFunction> {
        let off = window.offset_of(&self.geom)?;
        let mut values = vec![0.0; window.len()];
        for i in 0..self.len() {
            if self.values[i] == 0.0 {
                continue;
            }
            let c = add_cells(&self.geom.unravel(i), &off);
            match window.ravel(&c) {
                Some(j) => values[j] = self.values[i],
                None => {
                    return Err(Error::GeometryMismatch(
                        "window does not cover the support".into(),
                    ))
                }
            }
        }
        Ok(Self { geom: window.clone(), values })
    }

    /// Crops to the support's bounding box (a zero function keeps one cell).
    pub fn trim(&self) -> GridFunction {
        match self.support_bbox() {
            None => {
                let g = self.geom.window(&[0; 3], vec![1; self.dim()]);
                Self { geom: g, values: vec![0.0] }
            }
            Some((lo, hi)) => {
                let shape = (0..self.dim()).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
                let g = self.geom.window(&lo, shape);
                self.embed(&g).expect("support fits its bounding box")
            }
        }
    }

    /// Applies `op` cellwise on the union window of two compatible grids.
    pub fn zip_with(
        &self,
        other: &GridFunction,
        op: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        let (window, _) = Geometry::union_window(&[&self.geom, &other.geom])?;
        let a = self.embed(&window)?;
        let b = other.embed(&window)?;
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| op(x, y)).collect();
        GridFunction::from_geometry(window, values)
    }

    pub fn pointwise_min(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, f64::min)
    }

    pub fn pointwise_max(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, f64::max)
    }

    /// `f ≤ g + tol` at every cell of the union window.
    pub fn dominated_by(&self, other: &GridFunction, tol: f64) -> Result<bool> {
        let (window, _) = Geometry::union_window(&[&self.geom, &other.geom])?;
        let a = self.embed(&window)?;
        let b = other.embed(&window)?;
        Ok(a.values.iter().zip(&b.values).all(|(x, y)| *x <= *y + tol))
    }

    /// Largest cellwise difference over the union window.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        let (window, _) = Geometry::union_window(&[&self.geom, &other.geom])?;
        let a = self.embed(&window)?;
        let b = other.embed(&window)?;
        Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }
}

/// `∫|f - g|` over the union window of two compatible grids.
pub fn l1_distance(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if f.geom == g.geom {
        let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
        return Ok(s * f.cell_volume());
    }
    let (window, offs) = Geometry::union_window(&[f.geometry(), g.geometry()])?;
    let mut diff = vec![0.0; window.len()];
    for (src, off, sign) in [(f, offs[0], 1.0), (g, offs[1], -1.0)] {
        for i in 0..src.len() {
            let v = src.values[i];
            if v != 0.0 {
                let j = window.ravel(&add_cells(&src.geom.unravel(i), &off)).unwrap();
                diff[j] += sign * v;
            }
        }
    }
    Ok(diff.iter().map(|x| x.abs()).sum::<f64>() * f.cell_volume())
}

/// Cells of a super-level set.
#[derive(Debug, Clone, PartialEq)]
pub enum CellSet {
    /// Sorted, disjoint, half-open index ranges (one-dimensional grids).
    Intervals(Vec<(usize, usize)>),
    /// Row-major membership mask (higher-dimensional grids).
    Mask(Vec<bool>),
}

/// A set of cells on a grid, typically `F_t = {f > t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    geom: Geometry,
    threshold: f64,
    cells: CellSet,
    count: usize,
    measure: f64,
}

impl LevelSet {
    pub fn from_mask(geom: Geometry, threshold: f64, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), geom.len(), "mask size must match the grid");
        let count = mask.iter().filter(|&&b| b).count();
        let measure = count as f64 * geom.cell_volume();
        let cells = if geom.dim() == 1 {
            let mut runs = Vec::new();
            let mut i = 0;
            while i < mask.len() {
                if mask[i] {
                    let start = i;
                    while i < mask.len() && mask[i] {
                        i += 1;
                    }
                    runs.push((start, i));
                } else {
                    i += 1;
                }
            }
            CellSet::Intervals(runs)
        } else {
            CellSet::Mask(mask)
        };
        Self { geom, threshold, cells, count, measure }
    }

    /// Builds a set from lattice cells given relative to `geom`'s origin,
    /// cropping the geometry to their bounding box.
    pub fn from_cells(geom: &Geometry, threshold: f64, cells: &[Cell]) -> LevelSet {
        if cells.is_empty() {
            let g = geom.window(&[0; 3], vec![1; geom.dim()]);
            return LevelSet::from_mask(g, threshold, vec![false]);
        }
        let dim = geom.dim();
        let mut lo = [0_i64; 3];
        let mut hi = [0_i64; 3];
        for a in 0..dim {
            lo[a] = cells.iter().map(|c| c[a]).min().unwrap();
            hi[a] = cells.iter().map(|c| c[a]).max().unwrap();
        }
        let shape = (0..dim).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
        let w = geom.window(&lo, shape);
        let mut mask = vec![false; w.len()];
        for c in cells {
            let local = [c[0] - lo[0], c[1] - lo[1], c[2] - lo[2]];
            mask[w.ravel(&local).unwrap()] = true;
        }
        LevelSet::from_mask(w, threshold, mask)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn dim(&self) -> usize {
        self.geom.dim()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    /// Number of cells in the set.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, flat: usize) -> bool {
        match &self.cells {
            CellSet::Mask(m) => m.get(flat).copied().unwrap_or(false),
            CellSet::Intervals(runs) => {
                let k = runs.partition_point(|&(_, end)| end <= flat);
                k < runs.len() && runs[k].0 <= flat
            }
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        match &self.cells {
            CellSet::Mask(m) => m.clone(),
            CellSet::Intervals(runs) => {
                let mut m = vec![false; self.geom.len()];
                for &(s, e) in runs {
                    m[s..e].iter_mut().for_each(|b| *b = true);
                }
                m
            }
        }
    }

    /// Flat indices of member cells, ascending.
    pub fn indices(&self) -> Vec<usize> {
        match &self.cells {
            CellSet::Mask(m) => (0..m.len()).filter(|&i| m[i]).collect(),
            CellSet::Intervals(runs) => runs.iter().flat_map(|&(s, e)| s..e).collect(),
        }
    }

    /// Member cells as local multi-indices.
    pub fn lattice_cells(&self) -> Vec<Cell> {
        self.indices().into_iter().map(|i| self.geom.unravel(i)).collect()
    }

    pub fn translate(&self, shift: &[i64]) -> LevelSet {
        LevelSet { geom: self.geom.translated(shift), ..self.clone() }
    }

    /// `self ⊆ other` on their common lattice.
    pub fn is_subset_of(&self, other: &LevelSet) -> Result<bool> {
        let off = other.geom.offset_of(&self.geom)?;
        Ok(self.lattice_cells().iter().all(|c| {
            other.geom.ravel(&add_cells(c, &off)).is_some_and(|j| other.contains(j))
        }))
    }

    /// Cell count of the symmetric difference on the common lattice.
    pub fn symmetric_difference_count(&self, other: &LevelSet) -> Result<usize> {
        let off = other.geom.offset_of(&self.geom)?;
        let common = self
            .lattice_cells()
            .iter()
            .filter(|c| other.geom.ravel(&add_cells(c, &off)).is_some_and(|j| other.contains(j)))
            .count();
        Ok(self.count + other.count - 2 * common)
    }
}
