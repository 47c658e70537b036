//! Exact incremental convex hull of integer points in three dimensions.
//!
//! Orientation signs are computed in `i128`, so the combinatorics never
//! depend on rounding. Coplanar points are not inserted as vertices.

use std::collections::HashMap;

pub(crate) type P3 = [i64; 3];

#[inline]
pub(crate) fn orient(a: P3, b: P3, c: P3, d: P3) -> i128 {
    let u = [(b[0] - a[0]) as i128, (b[1] - a[1]) as i128, (b[2] - a[2]) as i128];
    let v = [(c[0] - a[0]) as i128, (c[1] - a[1]) as i128, (c[2] - a[2]) as i128];
    let w = [(d[0] - a[0]) as i128, (d[1] - a[1]) as i128, (d[2] - a[2]) as i128];
    u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0])
}

/// z-component of the outward normal of face `abc`.
#[inline]
pub(crate) fn normal_z(a: P3, b: P3, c: P3) -> i128 {
    (b[0] - a[0]) as i128 * (c[1] - a[1]) as i128 - (b[1] - a[1]) as i128 * (c[0] - a[0]) as i128
}

struct Face {
    v: [usize; 3],
    alive: bool,
    outside: Vec<usize>,
    mark: u32,
}

struct Builder<'a> {
    pts: &'a [P3],
    faces: Vec<Face>,
    edges: HashMap<(usize, usize), usize>,
    pending: Vec<usize>,
    epoch: u32,
}

impl<'a> Builder<'a> {
    fn sees(&self, f: usize, q: usize) -> i128 {
        let [a, b, c] = self.faces[f].v;
        orient(self.pts[a], self.pts[b], self.pts[c], self.pts[q])
    }

    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let id = self.faces.len();
        self.faces.push(Face { v, alive: true, outside: Vec::new(), mark: 0 });
        for k in 0..3 {
            self.edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        id
    }

    fn kill(&mut self, f: usize) {
        let v = self.faces[f].v;
        self.faces[f].alive = false;
        for k in 0..3 {
            let e = (v[k], v[(k + 1) % 3]);
            if self.edges.get(&e) == Some(&f) {
                self.edges.remove(&e);
            }
        }
    }

    /// Assigns `q` to some face it sees among `cands`, then among all faces.
    fn assign(&mut self, q: usize, cands: &[usize]) {
        let hit = cands.iter().copied().find(|&f| self.sees(f, q) > 0).or_else(|| {
            (0..self.faces.len()).rev().find(|&f| self.faces[f].alive && self.sees(f, q) > 0)
        });
        if let Some(f) = hit {
            self.faces[f].outside.push(q);
            self.pending.push(f);
        }
    }

    fn insert(&mut self, start: usize) {
        let outside = std::mem::take(&mut self.faces[start].outside);
        let (qpos, _) = outside
            .iter()
            .enumerate()
            .map(|(k, &q)| (k, self.sees(start, q)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        let q = outside[qpos];
        let mut orphans: Vec<usize> = outside.into_iter().filter(|&x| x != q).collect();

        self.epoch += 1;
        let epoch = self.epoch;
        let mut visible = vec![start];
        self.faces[start].mark = epoch;
        let mut horizon = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            let v = self.faces[f].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                let g = self.edges[&(b, a)];
                if self.faces[g].mark == epoch {
                    continue;
                }
                if self.sees(g, q) > 0 {
                    self.faces[g].mark = epoch;
                    visible.push(g);
                } else {
                    horizon.push((a, b));
                }
            }
        }
        for &f in &visible {
            orphans.extend(std::mem::take(&mut self.faces[f].outside));
            self.kill(f);
        }
        let new_faces: Vec<usize> = horizon.iter().map(|&(a, b)| self.add_face([a, b, q])).collect();
        for o in orphans {
            self.assign(o, &new_faces);
        }
    }
}

/// Outward-oriented triangles of the hull, or `None` when all points are
/// coplanar (including fewer than four distinct points).
pub(crate) fn hull3(pts: &[P3]) -> Option<Vec<[usize; 3]>> {
    let n = pts.len();
    let i0 = 0;
    let i1 = (1..n).find(|&i| pts[i] != pts[i0])?;
    let collinear = |i: usize| {
        let u = [pts[i1][0] - pts[i0][0], pts[i1][1] - pts[i0][1], pts[i1][2] - pts[i0][2]];
        let w = [pts[i][0] - pts[i0][0], pts[i][1] - pts[i0][1], pts[i][2] - pts[i0][2]];
        let c = [
            u[1] as i128 * w[2] as i128 - u[2] as i128 * w[1] as i128,
            u[2] as i128 * w[0] as i128 - u[0] as i128 * w[2] as i128,
            u[0] as i128 * w[1] as i128 - u[1] as i128 * w[0] as i128,
        ];
        c == [0, 0, 0]
    };
    let i2 = (0..n).find(|&i| !collinear(i))?;
    let i3 = (0..n).find(|&i| orient(pts[i0], pts[i1], pts[i2], pts[i]) != 0)?;

    let mut b = Builder { pts, faces: Vec::new(), edges: HashMap::new(), pending: Vec::new(), epoch: 0 };
    let simplex = [i0, i1, i2, i3];
    for skip in 0..4 {
        let mut v: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| simplex[k]).collect();
        let inner = pts[simplex[skip]];
        if orient(pts[v[0]], pts[v[1]], pts[v[2]], inner) > 0 {
            v.swap(1, 2);
        }
        b.add_face([v[0], v[1], v[2]]);
    }
    let initial: Vec<usize> = (0..4).collect();
    for q in 0..n {
        if simplex.contains(&q) {
            continue;
        }
        if let Some(&f) = initial.iter().find(|&&f| b.sees(f, q) > 0) {
            b.faces[f].outside.push(q);
        }
    }
    b.pending = initial;
    while let Some(f) = b.pending.pop() {
        if b.faces[f].alive && !b.faces[f].outside.is_empty() {
            b.insert(f);
        }
    }
    Some(b.faces.iter().filter(|f| f.alive).map(|f| f.v).collect())
}
