//! Exact convex hulls of lattice points in the plane.

pub(crate) type P2 = [i64; 2];

#[inline]
pub(crate) fn cross(o: P2, a: P2, b: P2) -> i128 {
    (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128 - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
}

/// Counter-clockwise hull vertices without collinear points. Two vertices
/// mean the input is collinear, one that it is a single point.
pub(crate) fn convex_polygon(points: &[P2]) -> Vec<P2> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<P2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Boundary-inclusive membership in the hull returned by `convex_polygon`.
pub(crate) fn contains(poly: &[P2], q: P2) -> bool {
    match poly.len() {
        0 => false,
        1 => poly[0] == q,
        2 => {
            let (a, b) = (poly[0], poly[1]);
            cross(a, b, q) == 0
                && q[0] >= a[0].min(b[0])
                && q[0] <= a[0].max(b[0])
                && q[1] >= a[1].min(b[1])
                && q[1] <= a[1].max(b[1])
        }
        n => (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], q) >= 0),
    }
}

/// Boundary-inclusive membership in triangle `abc` of either orientation.
#[inline]
pub(crate) fn in_triangle(a: P2, b: P2, c: P2, q: P2) -> bool {
    let d1 = cross(a, b, q);
    let d2 = cross(b, c, q);
    let d3 = cross(c, a, q);
    let neg = d1 < 0 || d2 < 0 || d3 < 0;
    let pos = d1 > 0 || d2 > 0 || d3 > 0;
    !(neg && pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_interior_and_edge_points() {
        let pts = [[0, 0], [2, 0], [2, 2], [0, 2], [1, 1], [1, 0]];
        let poly = convex_polygon(&pts);
        assert_eq!(poly.len(), 4);
        assert!(contains(&poly, [1, 0]));
        assert!(contains(&poly, [2, 2]));
        assert!(!contains(&poly, [3, 1]));
    }

    #[test]
    fn collinear_input_gives_segment() {
        let poly = convex_polygon(&[[0, 0], [2, 2], [1, 1], [4, 4]]);
        assert_eq!(poly, vec![[0, 0], [4, 4]]);
        assert!(contains(&poly, [3, 3]));
        assert!(!contains(&poly, [3, 2]));
        assert!(!contains(&poly, [5, 5]));
    }
}
