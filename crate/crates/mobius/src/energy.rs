//! Möbius cross energy, the Gauss linking integral, and the pointwise Gauss map
//! with its Jacobian bound and equality-condition residuals.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::curve::{Link, TAU};
use crate::error::{MobiusError, Result};
use crate::vec4::{self, Vec4};

/// Uniform trapezoid nodes on [0, 2π) per circle; on the periodic domain the
/// trapezoid rule coincides with the rectangle rule and converges spectrally
/// for analytic integrands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub n: usize,
}

impl QuadratureSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(MobiusError::Config(format!("quadrature resolution must be >= 8, got {n}")));
        }
        Ok(QuadratureSpec { n })
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        (0..n).map(move |j| TAU * j as f64 / n as f64)
    }

    /// Weight h² of one node of the double integral.
    pub fn weight2(&self) -> f64 {
        (TAU / self.n as f64).powi(2)
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { n: 128 }
    }
}

/// One sample of the Gauss map g(s,t) = (γ1(s)−γ2(t))/|γ1(s)−γ2(t)|,
/// with tangents, Jacobian, the pointwise upper bound of the Jacobian
/// estimate, and the three equality-case inner products.
#[derive(Debug, Clone, Copy)]
pub struct GaussMapSample {
    pub g: Vec4,
    pub dgds: Vec4,
    pub dgdt: Vec4,
    pub jac: f64,
    pub bound: f64,
    /// (⟨γ1',γ2'⟩, ⟨γ1',γ1−γ2⟩, ⟨γ2',γ1−γ2⟩)
    pub residuals: [f64; 3],
}

/// Gauss-map sample from raw positions and tangents of both curves.
///
/// Closed forms: ∂g/∂s = (γ1' − ⟨g,γ1'⟩g)/|γ1−γ2|, ∂g/∂t = −(γ2' − ⟨g,γ2'⟩g)/|γ1−γ2|.
pub fn gauss_sample(x1: &Vec4, d1: &Vec4, x2: &Vec4, d2: &Vec4) -> GaussMapSample {
    let delta = vec4::sub(x1, x2);
    let dist = vec4::norm(&delta);
    let g = vec4::scale(&delta, 1.0 / dist);
    let dgds = vec4::scale(&vec4::axpy(-vec4::dot(&g, d1), &g, d1), 1.0 / dist);
    let dgdt = vec4::scale(&vec4::axpy(-vec4::dot(&g, d2), &g, d2), -1.0 / dist);
    let e = vec4::norm2(&dgds);
    let f = vec4::dot(&dgds, &dgdt);
    let gg = vec4::norm2(&dgdt);
    let jac = (e * gg - f * f).max(0.0).sqrt();
    let bound = vec4::norm(d1) * vec4::norm(d2) / (dist * dist);
    GaussMapSample {
        g,
        dgds,
        dgdt,
        jac,
        bound,
        residuals: [vec4::dot(d1, d2), vec4::dot(d1, &delta), vec4::dot(d2, &delta)],
    }
}

/// Gauss map of a link at (s, t).
pub fn gauss_map(link: &Link, s: f64, t: f64) -> GaussMapSample {
    gauss_sample(
        &link.gamma1.eval(s),
        &link.gamma1.eval_derivative(s),
        &link.gamma2.eval(t),
        &link.gamma2.eval_derivative(t),
    )
}

/// Trapezoid approximation of ∬ |γ1'||γ2'| / |γ1−γ2|² ds dt.
///
/// Summation is parallel over rows; rows are reduced in index order, so the
/// value is deterministic for fixed N.
pub fn mobius_energy(link: &Link, quad: &QuadratureSpec) -> f64 {
    let n = quad.n;
    let p1 = link.gamma1.sample_uniform(n);
    let p2 = link.gamma2.sample_uniform(n);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (x, dx) = &p1[j];
            let sx = vec4::norm(dx);
            let mut acc = 0.0;
            for (y, dy) in &p2 {
                acc += sx * vec4::norm(dy) / vec4::norm2(&vec4::sub(x, y));
            }
            acc
        })
        .collect();
    rows.iter().sum::<f64>() * quad.weight2()
}

/// Affine hyperplane fitted by least squares to the sampled link, as
/// (point, unit normal, max residual).
fn fit_hyperplane(link: &Link, probe: usize) -> (Vec4, Vec4, f64) {
    let mut pts = Vec::with_capacity(2 * probe);
    for c in [&link.gamma1, &link.gamma2] {
        for j in 0..probe {
            pts.push(c.eval(TAU * j as f64 / probe as f64));
        }
    }
    let mut mean = vec4::ZERO;
    for p in &pts {
        mean = vec4::add(&mean, p);
    }
    mean = vec4::scale(&mean, 1.0 / pts.len() as f64);
    let mut cov = nalgebra::Matrix4::<f64>::zeros();
    for p in &pts {
        let d = vec4::sub(p, &mean);
        for i in 0..4 {
            for j in 0..4 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut k = 0;
    for i in 1..4 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let col = eig.eigenvectors.column(k);
    let mut normal = [col[0], col[1], col[2], col[3]];
    // deterministic sign: first component of largest magnitude positive
    let lead = (0..4).max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs())).unwrap();
    if normal[lead] < 0.0 {
        normal = vec4::scale(&normal, -1.0);
    }
    let residual = pts
        .iter()
        .map(|p| vec4::dot(&vec4::sub(p, &mean), &normal).abs())
        .fold(0.0, f64::max);
    (mean, normal, residual)
}

/// Gauss linking integral (1/4π) ∬ det(γ1', γ2', γ1−γ2)/|γ1−γ2|³ ds dt.
///
/// A dim-4 link must lie in an affine hyperplane (to 1e−8); the integral is
/// computed in that hyperplane with the orientation induced by its fitted
/// normal (deterministic sign convention).
pub fn gauss_linking_integral(link: &Link, quad: &QuadratureSpec) -> Result<f64> {
    let link3;
    let link = if link.dim() == 3 {
        link
    } else {
        let (mean, normal, residual) = fit_hyperplane(link, 512);
        if residual > 1e-8 {
            return Err(MobiusError::Config(format!(
                "dim-4 link is not contained in an affine hyperplane (residual {residual:.3e})"
            )));
        }
        // orthonormal basis (e1,e2,e3) of the hyperplane with det(e1,e2,e3,n) = +1
        let [t1, t2, t3] = vec4::tangent_basis(&normal);
        // tangent_basis yields det(normal, t1, t2, t3) = +1; moving `normal`
        // from the front to the back flips the sign an odd number of times.
        let rows = [t1, t2, vec4::scale(&t3, -1.0), normal];
        let g1 = link.gamma1.translated(&vec4::scale(&mean, -1.0)).linear_map(&rows, 3)?;
        let g2 = link.gamma2.translated(&vec4::scale(&mean, -1.0)).linear_map(&rows, 3)?;
        link3 = Link::new(g1, g2)?;
        &link3
    };
    let n = quad.n;
    let p1 = link.gamma1.sample_uniform(n);
    let p2 = link.gamma2.sample_uniform(n);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (x, dx) = &p1[j];
            let mut acc = 0.0;
            for (y, dy) in &p2 {
                let delta = vec4::sub(x, y);
                let d = vec4::norm(&delta);
                acc += vec4::det3(dx, dy, &delta) / (d * d * d);
            }
            acc
        })
        .collect();
    Ok(rows.iter().sum::<f64>() * quad.weight2() / (4.0 * PI))
}

/// Nearest integer to the Gauss integral; errors when the integral is more
/// than 0.1 from an integer (under-resolved quadrature).
pub fn linking_number(link: &Link, quad: &QuadratureSpec) -> Result<i64> {
    let value = gauss_linking_integral(link, quad)?;
    let rounded = value.round();
    let residual = (value - rounded).abs();
    if residual > 0.1 {
        return Err(MobiusError::UnresolvedLinking { value, residual });
    }
    Ok(rounded as i64)
}

/// E, lk and the slack of the lower bound E ≥ 4π|lk|.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundReport {
    pub energy: f64,
    pub lk: i64,
    pub slack: f64,
}

pub fn energy_lower_bound_report(link: &Link, quad: &QuadratureSpec) -> Result<LowerBoundReport> {
    let energy = mobius_energy(link, quad);
    let lk = linking_number(link, quad)?;
    Ok(LowerBoundReport { energy, lk, slack: energy - 4.0 * PI * lk.unsigned_abs() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{hopf_link, hopf_link_r3, perturbed_hopf_link, split_link, torus_2_4_link};

    const TWO_PI_SQ: f64 = 2.0 * PI * PI;

    #[test]
    fn hopf_energy_two_pi_squared() {
        let e = mobius_energy(&hopf_link(), &QuadratureSpec { n: 128 });
        assert!((e - TWO_PI_SQ).abs() < 1e-8, "E = {e}");
    }

    #[test]
    fn energy_symmetric_under_swap() {
        let link = torus_2_4_link();
        let quad = QuadratureSpec { n: 96 };
        let a = mobius_energy(&link, &quad);
        let b = mobius_energy(&link.swapped(), &quad);
        assert!((a - b).abs() < 1e-12);
    }

    /// 2D adaptive Simpson oracle over [0,2π]² for the energy integrand.
    fn energy_oracle(link: &Link, tol: f64) -> f64 {
        // iterated adaptive Simpson: inner integral in t for fixed s, adaptively in s
        let inner = |s: f64| {
            let x = link.gamma1.eval(s);
            let dx = link.gamma1.eval_derivative(s);
            let sx = vec4::norm(&dx);
            adaptive_simpson(
                &|t: f64| {
                    let y = link.gamma2.eval(t);
                    let dy = link.gamma2.eval_derivative(t);
                    sx * vec4::norm(&dy) / vec4::norm2(&vec4::sub(&x, &y))
                },
                0.0,
                TAU,
                tol / TAU,
            )
        };
        adaptive_simpson(&inner, 0.0, TAU, tol)
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth > 24 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
            }
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 0)
    }

    #[test]
    fn distant_circles_energy_against_oracle() {
        let link = split_link(10.0);
        let quad = QuadratureSpec { n: 128 };
        let e = mobius_energy(&link, &quad);
        let oracle = energy_oracle(&link, 1e-11);
        assert!((e - oracle).abs() < 1e-8, "E = {e}, oracle = {oracle}");
        assert!(e < 4.0 * PI);
    }

    #[test]
    fn spectral_convergence_hopf() {
        // |E_N − 2π²| decreases at least geometrically at N = 16, 32, 64
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| (mobius_energy(&hopf_link(), &QuadratureSpec { n }) - TWO_PI_SQ).abs())
            .collect();
        // Hopf integrand is constant, so all errors sit at rounding level
        for pair in errs.windows(2) {
            assert!(pair[1] <= 0.5 * pair[0] || pair[1] < 1e-12, "errors {errs:?}");
        }
    }

    #[test]
    fn spectral_convergence_torus_link() {
        let link = torus_2_4_link();
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| {
                (mobius_energy(&link, &QuadratureSpec { n })
                    - mobius_energy(&link, &QuadratureSpec { n: 256 }))
                .abs()
            })
            .collect();
        for pair in errs.windows(2) {
            assert!(pair[1] <= 0.5 * pair[0] || pair[1] < 1e-12, "errors {errs:?}");
        }
    }

    #[test]
    fn hopf_r3_linking_number_unit() {
        let link = hopf_link_r3(16).unwrap();
        let quad = QuadratureSpec { n: 128 };
        let v = gauss_linking_integral(&link, &quad).unwrap();
        assert!((v.abs() - 1.0).abs() < 1e-8, "integral {v}");
        assert_eq!(linking_number(&link, &quad).unwrap().abs(), 1);
    }

    #[test]
    fn split_link_zero() {
        let link = split_link(10.0);
        let quad = QuadratureSpec { n: 128 };
        let v = gauss_linking_integral(&link, &quad).unwrap();
        assert!(v.abs() < 1e-8);
        assert_eq!(linking_number(&link, &quad).unwrap(), 0);
    }

    #[test]
    fn orientation_reversal_negates_lk_fixes_energy() {
        let link = hopf_link_r3(16).unwrap();
        let quad = QuadratureSpec { n: 128 };
        let v = gauss_linking_integral(&link, &quad).unwrap();
        let vr = gauss_linking_integral(&link.with_reversed(1), &quad).unwrap();
        assert!((v + vr).abs() < 1e-10);
        let e = mobius_energy(&link, &quad);
        let er = mobius_energy(&link.with_reversed(0), &quad);
        assert!((e - er).abs() < 1e-10);
    }

    #[test]
    fn torus_2_4_linking_number() {
        let link = torus_2_4_link();
        let quad = QuadratureSpec { n: 192 };
        let lk = linking_number(&link, &quad).unwrap();
        assert_eq!(lk.abs(), 2);
    }

    #[test]
    fn hopf_in_hyperplane_errors() {
        // the standard Hopf link spans all of R⁴: hyperplane detection must fail
        let quad = QuadratureSpec { n: 64 };
        assert!(gauss_linking_integral(&hopf_link(), &quad).is_err());
    }

    #[test]
    fn dim4_planar_link_matches_dim3() {
        // embed the torus link in the x4 = 0.25 hyperplane of R⁴
        let link3 = torus_2_4_link();
        let embed = |c: &crate::curve::Curve| {
            let mut coeffs = c.coeffs().to_vec();
            coeffs.push(vec![num_complex::Complex64::new(0.0, 0.0); c.modes() + 1]);
            coeffs[3][0] = num_complex::Complex64::new(0.25, 0.0);
            crate::curve::Curve::new(4, coeffs).unwrap()
        };
        let link4 = Link::new(embed(&link3.gamma1), embed(&link3.gamma2)).unwrap();
        let quad = QuadratureSpec { n: 192 };
        let v3 = gauss_linking_integral(&link3, &quad).unwrap();
        let v4 = gauss_linking_integral(&link4, &quad).unwrap();
        assert!((v3.abs() - v4.abs()).abs() < 1e-9, "v3 {v3} v4 {v4}");
    }

    #[test]
    fn hopf_gauss_map_constant_jacobian() {
        let hopf = hopf_link();
        for (s, t) in [(0.0, 0.0), (1.0, 2.0), (4.4, 0.3), (2.0, 5.9)] {
            let sample = gauss_map(&hopf, s, t);
            assert!((sample.jac - 0.5).abs() < 1e-12);
            assert!((sample.bound - 0.5).abs() < 1e-12);
            for r in sample.residuals {
                assert!(r.abs() < 1e-12);
            }
            assert!((vec4::norm(&sample.g) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_map_jacobian_below_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let link = perturbed_hopf_link(9, 0.15, 12).unwrap();
        for _ in 0..1024 {
            let sample = gauss_map(&link, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            assert!(sample.jac <= sample.bound + 1e-10);
        }
    }

    #[test]
    fn gauss_map_tangents_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let link = torus_2_4_link();
        let h = 1e-6;
        for _ in 0..32 {
            let s = rng.gen_range(0.0..TAU);
            let t = rng.gen_range(0.0..TAU);
            let sample = gauss_map(&link, s, t);
            let fd_s = vec4::scale(
                &vec4::sub(&gauss_map(&link, s + h, t).g, &gauss_map(&link, s - h, t).g),
                1.0 / (2.0 * h),
            );
            let fd_t = vec4::scale(
                &vec4::sub(&gauss_map(&link, s, t + h).g, &gauss_map(&link, s, t - h).g),
                1.0 / (2.0 * h),
            );
            assert!(vec4::dist(&fd_s, &sample.dgds) < 1e-7);
            assert!(vec4::dist(&fd_t, &sample.dgdt) < 1e-7);
        }
    }

    #[test]
    fn lower_bound_reports() {
        let quad = QuadratureSpec { n: 128 };
        let hopf = hopf_link_r3(16).unwrap();
        let report = energy_lower_bound_report(&hopf, &quad).unwrap();
        assert!((report.slack - (TWO_PI_SQ - 4.0 * PI)).abs() < 1e-6, "slack {}", report.slack);
        let split = energy_lower_bound_report(&split_link(10.0), &quad).unwrap();
        assert_eq!(split.lk, 0);
        assert!(split.slack >= 0.0 && (split.slack - split.energy).abs() < 1e-14);
    }

    #[test]
    fn perturbed_hopf_lower_bound_screen() {
        let quad = QuadratureSpec { n: 96 };
        for seed in 0..20 {
            let link = perturbed_hopf_link(seed, 0.2, 12).unwrap();
            let report = energy_lower_bound_report(&link, &quad).unwrap();
            assert!(report.slack >= -1e-6, "seed {seed} slack {}", report.slack);
        }
    }
}
