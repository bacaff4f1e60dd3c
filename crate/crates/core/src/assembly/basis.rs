//! P1/P2 Lagrange basis on triangles in barycentric form. Local node order
//! is `[v0, v1, v2, m01, m12, m20]`; P1 uses the first three.

use crate::scene::Point;

/// Gradients of the barycentric coordinates and the (positive) area of a
/// counter-clockwise triangle.
pub fn barycentric_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = |i: usize| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        [(p[j][1] - p[k][1]) / two_area, (p[k][0] - p[j][0]) / two_area]
    };
    ([g(0), g(1), g(2)], 0.5 * two_area)
}

pub fn values(degree: usize, l: [f64; 3]) -> [f64; 6] {
    if degree == 1 {
        return [l[0], l[1], l[2], 0.0, 0.0, 0.0];
    }
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn gradients(degree: usize, l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    if degree == 1 {
        out[..3].copy_from_slice(gl);
        return out;
    }
    for c in 0..2 {
        for i in 0..3 {
            out[i][c] = (4.0 * l[i] - 1.0) * gl[i][c];
        }
        for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            out[3 + k][c] = 4.0 * (l[i] * gl[j][c] + l[j] * gl[i][c]);
        }
    }
    out
}

/// Edge basis on the parameter `s ∈ [0, 1]` from vertex `a` to vertex `b`:
/// `[a, b, midpoint]`.
pub fn edge_values(degree: usize, s: f64) -> [f64; 3] {
    if degree == 1 {
        return [1.0 - s, s, 0.0];
    }
    [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::barycentric;

    const TRI: [Point; 3] = [[0.3, -0.1], [1.7, 0.4], [0.6, 1.2]];

    fn node_bary(k: usize) -> [f64; 3] {
        match k {
            0 => [1.0, 0.0, 0.0],
            1 => [0.0, 1.0, 0.0],
            2 => [0.0, 0.0, 1.0],
            3 => [0.5, 0.5, 0.0],
            4 => [0.0, 0.5, 0.5],
            _ => [0.5, 0.0, 0.5],
        }
    }

    #[test]
    fn lagrange_property() {
        for k in 0..6 {
            let v = values(2, node_bary(k));
            for (m, vm) in v.iter().enumerate() {
                assert!((vm - if m == k { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (gl, area) = barycentric_gradients(TRI);
        assert!(area > 0.0);
        let p = [0.8, 0.4];
        let eps = 1e-6;
        for degree in [1, 2] {
            let g = gradients(degree, barycentric(TRI[0], TRI[1], TRI[2], p), &gl);
            for c in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[c] += eps;
                pm[c] -= eps;
                let vp = values(degree, barycentric(TRI[0], TRI[1], TRI[2], pp));
                let vm = values(degree, barycentric(TRI[0], TRI[1], TRI[2], pm));
                for k in 0..6 {
                    let fd = (vp[k] - vm[k]) / (2.0 * eps);
                    assert!((fd - g[k][c]).abs() < 1e-7, "degree {degree} basis {k} dir {c}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let (gl, _) = barycentric_gradients(TRI);
        let l = [0.2, 0.5, 0.3];
        for degree in [1, 2] {
            assert!((values(degree, l).iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let g = gradients(degree, l, &gl);
            for c in 0..2 {
                assert!(g.iter().map(|v| v[c]).sum::<f64>().abs() < 1e-13);
            }
        }
    }

    #[test]
    fn edge_basis_matches_trace() {
        for s in [0.0, 0.21, 0.5, 0.9, 1.0] {
            let e = edge_values(2, s);
            // Edge v0 -> v1 of the triangle: barycentric (1-s, s, 0).
            let v = values(2, [1.0 - s, s, 0.0]);
            assert!((e[0] - v[0]).abs() < 1e-15 && (e[1] - v[1]).abs() < 1e-15 && (e[2] - v[3]).abs() < 1e-15);
        }
    }
}
