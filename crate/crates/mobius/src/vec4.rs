//! Small fixed-size vector helpers for points in R³/R⁴.
//!
//! Every point is stored as `[f64; 4]`; curves in R³ keep the last
//! component at zero, so dot products and norms work uniformly.

pub type Vec4 = [f64; 4];

pub const ZERO: Vec4 = [0.0; 4];

#[inline]
pub fn dot(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
pub fn norm2(a: &Vec4) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &Vec4) -> f64 {
    norm2(a).sqrt()
}

#[inline]
pub fn add(a: &Vec4, b: &Vec4) -> Vec4 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

#[inline]
pub fn sub(a: &Vec4, b: &Vec4) -> Vec4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

#[inline]
pub fn scale(a: &Vec4, c: f64) -> Vec4 {
    [a[0] * c, a[1] * c, a[2] * c, a[3] * c]
}

#[inline]
pub fn axpy(c: f64, x: &Vec4, y: &Vec4) -> Vec4 {
    [c * x[0] + y[0], c * x[1] + y[1], c * x[2] + y[2], c * x[3] + y[3]]
}

#[inline]
pub fn normalize(a: &Vec4) -> Vec4 {
    scale(a, 1.0 / norm(a))
}

#[inline]
pub fn dist(a: &Vec4, b: &Vec4) -> f64 {
    norm(&sub(a, b))
}

/// Determinant of the 3×3 matrix with columns `a, b, c` (first three components).
#[inline]
pub fn det3(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Geodesic distance on the unit sphere, robust at near-antipodal points.
#[inline]
pub fn sphere_dist(a: &Vec4, b: &Vec4) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Any unit vector orthogonal to `a` (assumed nonzero).
pub fn any_orthogonal(a: &Vec4) -> Vec4 {
    // pick the coordinate axis least aligned with a
    let mut k = 0;
    for i in 1..4 {
        if a[i].abs() < a[k].abs() {
            k = i;
        }
    }
    let mut e = ZERO;
    e[k] = 1.0;
    let proj = dot(&e, a) / norm2(a);
    normalize(&axpy(-proj, a, &e))
}

/// Orthonormal basis of the tangent space of S³ at unit vector `p`.
pub fn tangent_basis(p: &Vec4) -> [Vec4; 3] {
    let t1 = any_orthogonal(p);
    let t2 = {
        let mut k = 0;
        let mut best = f64::INFINITY;
        // axis least aligned with span{p, t1}
        let mut cand = [ZERO; 4];
        for (i, c) in cand.iter_mut().enumerate() {
            let mut e = ZERO;
            e[i] = 1.0;
            let r = axpy(-dot(&e, p), p, &axpy(-dot(&e, &t1), &t1, &e));
            let s = -norm2(&r);
            *c = r;
            if s < best {
                best = s;
                k = i;
            }
        }
        normalize(&cand[k])
    };
    // t3 = "cross product" completing (p, t1, t2) to an oriented frame:
    // the vector whose dot with x equals det(p, t1, t2, x).
    let t3 = cross4(p, &t1, &t2);
    [t1, t2, normalize(&t3)]
}

/// Generalized cross product in R⁴: vector v with ⟨v, x⟩ = det(a, b, c, x).
pub fn cross4(a: &Vec4, b: &Vec4, c: &Vec4) -> Vec4 {
    let m = |i: usize, j: usize, k: usize| {
        a[i] * (b[j] * c[k] - b[k] * c[j]) - a[j] * (b[i] * c[k] - b[k] * c[i])
            + a[k] * (b[i] * c[j] - b[j] * c[i])
    };
    [-m(1, 2, 3), m(0, 2, 3), -m(0, 1, 3), m(0, 1, 2)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross4_is_orthogonal() {
        let a = [1.0, 2.0, -0.5, 0.3];
        let b = [0.0, 1.0, 1.0, -2.0];
        let c = [3.0, 0.0, 0.5, 1.0];
        let v = cross4(&a, &b, &c);
        assert!(dot(&v, &a).abs() < 1e-12);
        assert!(dot(&v, &b).abs() < 1e-12);
        assert!(dot(&v, &c).abs() < 1e-12);
    }

    #[test]
    fn tangent_basis_orthonormal() {
        let p = normalize(&[0.3, -0.4, 0.5, 0.7]);
        let basis = tangent_basis(&p);
        for (i, ti) in basis.iter().enumerate() {
            assert!((norm(ti) - 1.0).abs() < 1e-12);
            assert!(dot(ti, &p).abs() < 1e-12);
            for tj in basis.iter().skip(i + 1) {
                assert!(dot(ti, tj).abs() < 1e-12);
            }
        }
    }
}
