//! Spherical exponential/log maps, the annulus retraction R_{(p,λ,t)} with its
//! non-expansion property, retracted family areas, and the min-max family Φ
//! on I⁵ assembled from the canonical family.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::curve::Link;
use crate::energy::QuadratureSpec;
use crate::error::{MobiusError, Result};
use crate::family::{self, family_coeffs, support_radius, SurfaceGrid};
use crate::vec4::{self, Vec4};

/// exp_p(u) = cos|u| p + sin|u| u/|u| for u ∈ T_pS³.
pub fn sphere_exp(p: &Vec4, u: &Vec4) -> Vec4 {
    let r = vec4::norm(u);
    if r < 1e-300 {
        return *p;
    }
    vec4::axpy(r.sin() / r, u, &vec4::scale(p, r.cos()))
}

/// exp_p⁻¹(x); errors at the antipode where the log is undefined.
pub fn sphere_log(p: &Vec4, x: &Vec4) -> Result<Vec4> {
    let c = vec4::dot(p, x).clamp(-1.0, 1.0);
    if c <= -1.0 + 1e-12 {
        return Err(MobiusError::Singularity("log map undefined at the antipode".into()));
    }
    let theta = c.acos();
    let perp = vec4::axpy(-c, p, x);
    let n = vec4::norm(&perp);
    if n < 1e-300 {
        return Ok(vec4::ZERO);
    }
    Ok(vec4::scale(&perp, theta / n))
}

/// Geodesic radial retraction of the annulus B̄_{π/2}(p) ∖ B_λ(p):
/// R_{(p,λ,t)}(x) = exp_p(((1−t) + tλ/d(p,x)) exp_p⁻¹(x)).
#[derive(Debug, Clone, Copy)]
pub struct Retraction {
    pub p: Vec4,
    pub lambda: f64,
    pub t: f64,
}

/// Domain slack: nodes outside the annulus by at most this are projected back.
pub const DOMAIN_TOL: f64 = 1e-9;

impl Retraction {
    pub fn new(p: Vec4, lambda: f64, t: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&lambda) || !(0.0..=1.0).contains(&t) {
            return Err(MobiusError::Config(format!(
                "retraction parameters out of range: lambda = {lambda}, t = {t}"
            )));
        }
        Ok(Retraction { p, lambda, t })
    }

    /// Clamp d(p,x) into [λ, π/2], tolerating DOMAIN_TOL of rounding drift.
    fn admissible_distance(&self, x: &Vec4) -> Result<f64> {
        let d = vec4::sphere_dist(&self.p, x);
        if d < self.lambda - DOMAIN_TOL || d > FRAC_PI_2 + DOMAIN_TOL {
            return Err(MobiusError::ContainmentViolation(format!(
                "point at geodesic distance {d} outside the annulus [{}, {}]",
                self.lambda, FRAC_PI_2
            )));
        }
        Ok(d.clamp(self.lambda.max(1e-300), FRAC_PI_2))
    }

    pub fn apply(&self, x: &Vec4) -> Result<Vec4> {
        let d = self.admissible_distance(x)?;
        let u = sphere_log(&self.p, x)?;
        let factor = (1.0 - self.t) + self.t * self.lambda / d;
        Ok(sphere_exp(&self.p, &vec4::scale(&u, factor)))
    }

    /// Analytic differential: pushforward of a tangent vector `w` at `x`.
    ///
    /// Decomposes w into radial and rotational parts in the exponential chart,
    /// where the map is y ↦ ((1−t)+tλ/|y|) y.
    pub fn differential(&self, x: &Vec4, w: &Vec4) -> Result<Vec4> {
        let d = self.admissible_distance(&{ *x })?;
        let u = sphere_log(&self.p, x)?;
        let uhat = vec4::normalize(&u);
        // pull w back through d exp_p at u: invert the closed form
        // d exp_p(u)[wr·∂r + v] = wr(−sin d p + cos d û) + (sin d / d) v
        let radial_dir = vec4::axpy(d.cos(), &uhat, &vec4::scale(&self.p, -d.sin()));
        let wr = vec4::dot(w, &radial_dir);
        let v_amb = vec4::axpy(-wr, &radial_dir, w);
        // v_amb = (sin d / d) v with v ⊥ û, v ⊥ p in the chart
        let v_chart = vec4::scale(&v_amb, d / d.sin());
        // chart map f(y) = ((1−t)+tλ/|y|)y: Df[∂r] = (1−t)∂r, Df[v] = factor·v
        let factor = (1.0 - self.t) + self.t * self.lambda / d;
        let fd = factor * d; // |f(u)|
        let out_radial = vec4::axpy(
            fd.cos(),
            &uhat,
            &vec4::scale(&self.p, -fd.sin()),
        );
        // push forward through d exp_p at f(u)
        let out = vec4::axpy(
            (1.0 - self.t) * wr,
            &out_radial,
            &vec4::scale(&v_chart, factor * fd.sin() / fd.max(1e-300)),
        );
        Ok(out)
    }
}

/// Max finite-difference singular value of DR over random admissible samples.
pub fn retract_contraction_check(
    r: &Retraction,
    samples: &[Vec4],
    h: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in samples {
        let basis = vec4::tangent_basis(x);
        let mut m = nalgebra::Matrix3::<f64>::zeros();
        let image = r.apply(x)?;
        let out_basis = vec4::tangent_basis(&image);
        for (j, b) in basis.iter().enumerate() {
            // walk along the geodesic through x in direction b
            let plus = r.apply(&sphere_exp(x, &vec4::scale(b, h)))?;
            let minus = r.apply(&sphere_exp(x, &vec4::scale(b, -h)))?;
            let fd = vec4::scale(&vec4::sub(&plus, &minus), 0.5 / h);
            for (i, ob) in out_basis.iter().enumerate() {
                m[(i, j)] = vec4::dot(&fd, ob);
            }
        }
        let svd = nalgebra::SVD::new(m, false, false);
        worst = worst.max(svd.singular_values[0]);
    }
    Ok(worst)
}

/// Area data of a retracted family member C(p,z,s).
pub struct RetractedArea {
    pub base_area: f64,
    pub area: f64,
    /// max over nodes of |d(center, image) − λ| at s = 1, else 0
    pub sphere_residual: f64,
    /// max nodewise jac increase of R∘g over g (≤ 0 expected)
    pub max_jac_increase: f64,
}

/// Compose the boundary family map g_{(p,z)} with the retraction at parameter
/// `s` and integrate the Jacobian; the retraction center/λ follow the
/// hemisphere of z (mirrored for z < 1/2).
pub fn retracted_family_area(
    link: &Link,
    p: &Vec4,
    z: f64,
    s: f64,
    quad: &QuadratureSpec,
) -> Result<RetractedArea> {
    let fp = family_coeffs(p, z)?;
    let grid = family::family_area(link, &fp, quad)?;
    retracted_area_from_grid(link, &grid, p, z, s)
}

/// Retraction acting on an already-built boundary grid.
pub fn retracted_area_from_grid(
    link: &Link,
    grid: &SurfaceGrid,
    p: &Vec4,
    z: f64,
    s: f64,
) -> Result<RetractedArea> {
    let r = support_radius(link.alpha(), z);
    let (center, lambda) = if z >= 0.5 {
        (*p, r)
    } else {
        (vec4::scale(p, -1.0), PI - r)
    };
    let retraction = Retraction::new(center, lambda, s)?;
    let w = (crate::curve::TAU / grid.n as f64).powi(2);
    let mut area = 0.0;
    let mut sphere_residual = 0.0f64;
    let mut max_increase = f64::NEG_INFINITY;
    for node in grid.nodes.iter().filter(|n| !n.excluded) {
        let g = &node.sample;
        let image = retraction.apply(&g.g).map_err(|e| match e {
            MobiusError::ContainmentViolation(msg) => MobiusError::ContainmentViolation(format!(
                "base surface leaves the retraction domain (upstream containment bug): {msg}"
            )),
            other => other,
        })?;
        let ds = retraction.differential(&g.g, &g.dgds)?;
        let dt = retraction.differential(&g.g, &g.dgdt)?;
        let e = vec4::norm2(&ds);
        let f = vec4::dot(&ds, &dt);
        let gg = vec4::norm2(&dt);
        let jac = (e * gg - f * f).max(0.0).sqrt();
        area += jac;
        max_increase = max_increase.max(jac - g.jac);
        if s >= 1.0 {
            sphere_residual =
                sphere_residual.max((vec4::sphere_dist(&center, &image) - lambda).abs());
        }
    }
    Ok(RetractedArea {
        base_area: grid.area_integral,
        area: area * w,
        sphere_residual,
        max_jac_increase: if max_increase.is_finite() { max_increase } else { 0.0 },
    })
}

/// Resolved member of the min-max family Φ(x, t).
pub enum MinMaxSurface {
    /// t ∈ {0, 1}
    Zero,
    /// |f(x)| ≤ 1: canonical family member (interior or boundary grid)
    Family { v: Vec4, z: f64, area: f64 },
    /// 1 < |f(x)| < 2: retracted boundary member
    Retracted { p: Vec4, z: f64, s: f64, area: f64 },
    /// |f(x)| = 2 (x ∈ ∂I⁴): round geodesic sphere ∂B_{r(t)}(center)
    RoundSphere { center: Vec4, radius: f64, area: f64 },
}

impl MinMaxSurface {
    pub fn area(&self) -> f64 {
        match self {
            MinMaxSurface::Zero => 0.0,
            MinMaxSurface::Family { area, .. }
            | MinMaxSurface::Retracted { area, .. }
            | MinMaxSurface::RoundSphere { area, .. } => *area,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MinMaxSurface::Zero => "zero",
            MinMaxSurface::Family { .. } => "family",
            MinMaxSurface::Retracted { .. } => "retracted",
            MinMaxSurface::RoundSphere { .. } => "round-sphere",
        }
    }
}

/// Radial homeomorphism f: I⁴ → B̄⁴₂(0) (max-norm to Euclidean-norm stretch,
/// center-preserving and orientation-preserving).
pub fn cube_to_ball(x: &[f64; 4]) -> Vec4 {
    let u = [2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0, 2.0 * x[2] - 1.0, 2.0 * x[3] - 1.0];
    let sup = u.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let n = vec4::norm(&u);
    if n < 1e-300 {
        return vec4::ZERO;
    }
    vec4::scale(&u, 2.0 * sup / n)
}

/// Geodesic-sphere area in S³: area(∂B_r(p)) = 4π sin²(r).
pub fn geodesic_sphere_area(r: f64) -> f64 {
    4.0 * PI * r.sin() * r.sin()
}

/// Φ(x, t) = C̃(f(x), t), resolved by the piecewise definition.
pub fn minmax_surface(link: &Link, x: &[f64; 4], t: f64, quad: &QuadratureSpec) -> Result<MinMaxSurface> {
    if t <= 0.0 || t >= 1.0 {
        return Ok(MinMaxSurface::Zero);
    }
    let v = cube_to_ball(x);
    let n = vec4::norm(&v);
    if n <= 1.0 {
        let fp = family_coeffs(&v, t)?;
        let grid = family::family_area(link, &fp, quad)?;
        return Ok(MinMaxSurface::Family { v, z: t, area: grid.area_integral });
    }
    let p = vec4::scale(&v, 1.0 / n);
    if n >= 2.0 - 1e-12 {
        let r = support_radius(link.alpha(), t);
        return Ok(MinMaxSurface::RoundSphere { center: p, radius: r, area: geodesic_sphere_area(r) });
    }
    let s = n - 1.0;
    let ra = retracted_family_area(link, &p, t, s, quad)?;
    Ok(MinMaxSurface::Retracted { p, z: t, s, area: ra.area })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::hopf_link;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec4 {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = vec4::norm(&v);
            if n > 1e-3 {
                return vec4::scale(&v, 1.0 / n);
            }
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..128 {
            let p = random_unit(&mut rng);
            let x = random_unit(&mut rng);
            if vec4::dot(&p, &x) < -0.99 {
                continue;
            }
            let u = sphere_log(&p, &x).unwrap();
            assert!((vec4::norm(&u) - vec4::sphere_dist(&p, &x)).abs() < 1e-12);
            let back = sphere_exp(&p, &u);
            assert!(vec4::dist(&back, &x) < 1e-12);
            // chord-derived distance: |x−p| = 2 sin(d/2)
            let chord = vec4::dist(&x, &p);
            let d = 2.0 * (chord / 2.0).asin();
            assert!((d - vec4::sphere_dist(&p, &x)).abs() < 1e-12);
        }
        let p = [1.0, 0.0, 0.0, 0.0];
        assert!(vec4::norm(&sphere_log(&p, &p).unwrap()) < 1e-15);
        assert!(sphere_log(&p, &[-1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn retraction_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..64 {
            let p = random_unit(&mut rng);
            let lambda = rng.gen_range(0.1..FRAC_PI_2);
            // sample a point in the annulus
            let d = rng.gen_range(lambda..FRAC_PI_2);
            let dir = {
                let raw = random_unit(&mut rng);
                let perp = vec4::axpy(-vec4::dot(&raw, &p), &p, &raw);
                vec4::normalize(&perp)
            };
            let x = sphere_exp(&p, &vec4::scale(&dir, d));
            let r0 = Retraction::new(p, lambda, 0.0).unwrap();
            assert!(vec4::dist(&r0.apply(&x).unwrap(), &x) < 1e-12);
            let r1 = Retraction::new(p, lambda, 1.0).unwrap();
            let y = r1.apply(&x).unwrap();
            assert!((vec4::sphere_dist(&p, &y) - lambda).abs() < 1e-10);
        }
    }

    #[test]
    fn equator_retraction_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let p = random_unit(&mut rng);
        for t in [0.0, 0.3, 1.0] {
            let r = Retraction::new(p, FRAC_PI_2, t).unwrap();
            for _ in 0..16 {
                let dir = {
                    let raw = random_unit(&mut rng);
                    vec4::normalize(&vec4::axpy(-vec4::dot(&raw, &p), &p, &raw))
                };
                let x = sphere_exp(&p, &vec4::scale(&dir, FRAC_PI_2));
                assert!(vec4::dist(&r.apply(&x).unwrap(), &x) < 1e-10);
            }
        }
    }

    #[test]
    fn outside_annulus_rejected() {
        let p = [0.0, 0.0, 0.0, 1.0];
        let r = Retraction::new(p, 0.5, 0.5).unwrap();
        // x too close to the center
        let x = sphere_exp(&p, &[0.2, 0.0, 0.0, 0.0]);
        assert!(matches!(r.apply(&x), Err(MobiusError::ContainmentViolation(_))));
        // x past the equator
        let y = sphere_exp(&p, &[2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(r.apply(&y), Err(MobiusError::ContainmentViolation(_))));
    }

    #[test]
    fn differential_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..64 {
            let p = random_unit(&mut rng);
            let lambda = rng.gen_range(0.1..FRAC_PI_2 - 0.05);
            let t = rng.gen_range(0.0..1.0);
            let d = rng.gen_range(lambda + 0.02..FRAC_PI_2 - 0.01);
            let dir = {
                let raw = random_unit(&mut rng);
                vec4::normalize(&vec4::axpy(-vec4::dot(&raw, &p), &p, &raw))
            };
            let x = sphere_exp(&p, &vec4::scale(&dir, d));
            let r = Retraction::new(p, lambda, t).unwrap();
            let h = 1e-6;
            for b in vec4::tangent_basis(&x) {
                let plus = r.apply(&sphere_exp(&x, &vec4::scale(&b, h))).unwrap();
                let minus = r.apply(&sphere_exp(&x, &vec4::scale(&b, -h))).unwrap();
                let fd = vec4::scale(&vec4::sub(&plus, &minus), 0.5 / h);
                let an = r.differential(&x, &b).unwrap();
                assert!(vec4::dist(&fd, &an) < 1e-6, "fd {fd:?} an {an:?}");
            }
        }
    }

    #[test]
    fn contraction_bound_and_radial_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        // 512 random (p, λ, t, x): all singular values ≤ 1 + 1e-5
        for _ in 0..512 {
            let p = random_unit(&mut rng);
            let lambda = rng.gen_range(0.05..FRAC_PI_2 - 0.05);
            let t = rng.gen_range(0.0..1.0);
            let d = rng.gen_range(lambda + 0.01..FRAC_PI_2 - 0.005);
            let dir = {
                let raw = random_unit(&mut rng);
                vec4::normalize(&vec4::axpy(-vec4::dot(&raw, &p), &p, &raw))
            };
            let x = sphere_exp(&p, &vec4::scale(&dir, d));
            let r = Retraction::new(p, lambda, t).unwrap();
            let sv = retract_contraction_check(&r, &[x], 1e-5).unwrap();
            assert!(sv <= 1.0 + 1e-5, "singular value {sv}");
            // radial direction contracts by exactly (1−t)
            let radial = r.differential(&x, &{
                let u = sphere_log(&p, &x).unwrap();
                let uhat = vec4::normalize(&u);
                vec4::axpy(d.cos(), &uhat, &vec4::scale(&p, -d.sin()))
            });
            assert!((vec4::norm(&radial.unwrap()) - (1.0 - t)).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_at_t_zero_has_unit_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let p = random_unit(&mut rng);
        let r = Retraction::new(p, 0.3, 0.0).unwrap();
        let dir = {
            let raw = random_unit(&mut rng);
            vec4::normalize(&vec4::axpy(-vec4::dot(&raw, &p), &p, &raw))
        };
        let x = sphere_exp(&p, &vec4::scale(&dir, 0.9));
        let sv = retract_contraction_check(&r, &[x], 1e-5).unwrap();
        assert!((sv - 1.0).abs() < 1e-6);
    }

    #[test]
    fn retracted_family_endpoints() {
        let hopf = hopf_link();
        let quad = QuadratureSpec { n: 64 };
        let p = vec4::normalize(&[0.5, -0.5, 0.5, 0.5]);
        let z = 0.7;
        // s = 0: area equals the base area
        let r0 = retracted_family_area(&hopf, &p, z, 0.0, &quad).unwrap();
        assert!((r0.area - r0.base_area).abs() < 1e-10);
        // s = 1: image on ∂B_{r(z)}(p), area matches the geodesic-sphere oracle
        let r1 = retracted_family_area(&hopf, &p, z, 1.0, &quad).unwrap();
        assert!(r1.sphere_residual < 1e-8, "residual {}", r1.sphere_residual);
        let expected = geodesic_sphere_area(support_radius(hopf.alpha(), z));
        assert!((r1.area - expected).abs() < 1e-3, "area {} expected {expected}", r1.area);
        // area nonincreasing in s
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let ra = retracted_family_area(&hopf, &p, z, s, &quad).unwrap();
            assert!(ra.area <= prev + 1e-6);
            assert!(ra.max_jac_increase <= 1e-10, "jac increase {}", ra.max_jac_increase);
            prev = ra.area;
        }
    }

    #[test]
    fn retracted_family_mirrored_hemisphere() {
        let hopf = hopf_link();
        let quad = QuadratureSpec { n: 64 };
        let p = vec4::normalize(&[0.5, -0.5, 0.5, 0.5]);
        let z = 0.3; // southern-hemisphere branch
        let r1 = retracted_family_area(&hopf, &p, z, 1.0, &quad).unwrap();
        assert!(r1.sphere_residual < 1e-8);
        let expected = geodesic_sphere_area(support_radius(hopf.alpha(), z));
        assert!((r1.area - expected).abs() < 1e-3);
    }

    #[test]
    fn cube_map_hits_ball() {
        // center to center
        assert!(vec4::norm(&cube_to_ball(&[0.5; 4])) < 1e-12);
        // boundary of the cube to the sphere of radius 2
        assert!((vec4::norm(&cube_to_ball(&[1.0, 0.5, 0.5, 0.5])) - 2.0).abs() < 1e-12);
        assert!((vec4::norm(&cube_to_ball(&[0.0, 0.0, 1.0, 0.3])) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn minmax_piecewise_descriptors() {
        let hopf = hopf_link();
        let quad = QuadratureSpec { n: 48 };
        // t ∈ {0,1}: zero surface
        assert!(matches!(
            minmax_surface(&hopf, &[0.3, 0.3, 0.3, 0.3], 0.0, &quad).unwrap(),
            MinMaxSurface::Zero
        ));
        assert_eq!(minmax_surface(&hopf, &[0.2; 4], 1.0, &quad).unwrap().area(), 0.0);
        // boundary x, t = 1/2: great sphere of area 4π
        let s = minmax_surface(&hopf, &[1.0, 0.4, 0.6, 0.5], 0.5, &quad).unwrap();
        match s {
            MinMaxSurface::RoundSphere { radius, area, .. } => {
                assert!((radius - FRAC_PI_2).abs() < 1e-12);
                assert!((area - 4.0 * PI).abs() < 1e-10);
            }
            _ => panic!("expected a round sphere on the cube boundary"),
        }
        // center: family member at v = 0
        let c = minmax_surface(&hopf, &[0.5; 4], 0.5, &quad).unwrap();
        assert_eq!(c.kind(), "family");
        assert!((c.area() - 2.0 * PI * PI).abs() < 1e-6);
    }

    #[test]
    fn sphere_family_anchor() {
        // grid-computed retracted areas at s=1 match 4π sin²(r(t)) for 9 t values
        let hopf = hopf_link();
        let quad = QuadratureSpec { n: 64 };
        let p = vec4::normalize(&[0.5, -0.5, 0.5, 0.5]);
        for j in 1..=9 {
            let t = j as f64 / 10.0;
            let ra = retracted_family_area(&hopf, &p, t, 1.0, &quad).unwrap();
            let expected = geodesic_sphere_area(support_radius(hopf.alpha(), t));
            assert!((ra.area - expected).abs() < 1e-3, "t {t}: {} vs {expected}", ra.area);
        }
    }
}
