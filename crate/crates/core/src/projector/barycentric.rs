//! Barycentric weights of a 2D point and their derivatives with respect to
//! the triangle's vertex positions.

/// z-component of the cross product of two 2D vectors.
#[inline]
pub(crate) fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Weights plus Jacobian: `dw[k][m]` is the gradient of weight `k` with
/// respect to the 2D position of vertex `m`.
#[derive(Debug, Clone, Copy)]
pub struct BarycentricGradient {
    pub w: [f64; 3],
    pub dw: [[[f64; 2]; 3]; 3],
}

/// Barycentric weights of `q` in the triangle `(s0, s1, s2)`, via signed
/// sub-areas. Orientation-independent; the weights sum to 1 up to round-off
/// whenever the triangle is non-degenerate.
pub fn barycentric(s: &[[f64; 2]; 3], q: [f64; 2]) -> [f64; 3] {
    let a2 = cross2(sub2(s[1], s[0]), sub2(s[2], s[0]));
    [
        cross2(sub2(s[2], s[1]), sub2(q, s[1])) / a2,
        cross2(sub2(s[0], s[2]), sub2(q, s[2])) / a2,
        cross2(sub2(s[1], s[0]), sub2(q, s[0])) / a2,
    ]
}

/// Weights and their analytic derivatives with respect to each vertex.
///
/// Each weight is a quotient `w_k = E_k / A` of an edge sub-area and the
/// total signed area, so the Jacobian follows from the quotient rule with
/// the closed-form area derivatives.
pub fn barycentric_gradient(s: &[[f64; 2]; 3], q: [f64; 2]) -> BarycentricGradient {
    let a2 = cross2(sub2(s[1], s[0]), sub2(s[2], s[0]));
    // Sub-area opposite vertex k, spanned by the directed edge (k+1 -> k+2).
    let e = [
        cross2(sub2(s[2], s[1]), sub2(q, s[1])),
        cross2(sub2(s[0], s[2]), sub2(q, s[2])),
        cross2(sub2(s[1], s[0]), sub2(q, s[0])),
    ];
    let w = [e[0] / a2, e[1] / a2, e[2] / a2];

    // For E = cross2(b - a, q - a):
    //   dE/da = (b.y - q.y, q.x - b.x),  dE/db = (q.y - a.y, a.x - q.x).
    let d_edge = |a: [f64; 2], b: [f64; 2]| {
        (
            [b[1] - q[1], q[0] - b[0]], // wrt a
            [q[1] - a[1], a[0] - q[0]], // wrt b
        )
    };
    let mut de = [[[0.0; 2]; 3]; 3]; // de[k][m] = dE_k/ds_m
    for k in 0..3 {
        let (ia, ib) = ((k + 1) % 3, (k + 2) % 3);
        let (da, db) = d_edge(s[ia], s[ib]);
        de[k][ia] = da;
        de[k][ib] = db;
    }
    // Total doubled area: dA2/ds_m = (y_{m+1} - y_{m+2}, x_{m+2} - x_{m+1}).
    let mut da2 = [[0.0; 2]; 3];
    for m in 0..3 {
        let (i1, i2) = ((m + 1) % 3, (m + 2) % 3);
        da2[m] = [s[i1][1] - s[i2][1], s[i2][0] - s[i1][0]];
    }

    let mut dw = [[[0.0; 2]; 3]; 3];
    for k in 0..3 {
        for m in 0..3 {
            for d in 0..2 {
                dw[k][m][d] = (de[k][m][d] * a2 - e[k] * da2[m][d]) / (a2 * a2);
            }
        }
    }
    BarycentricGradient { w, dw }
}
