//! Closed curves in R³/R⁴ as truncated Fourier series, and 2-component links.
//!
//! A curve is stored as one complex coefficient per coordinate and mode,
//! evaluated as x_d(s) = Re Σ_{k=0..M} c_{d,k} e^{iks}, which is real by
//! construction and 2π-periodic. Derivatives are term-by-term.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{MobiusError, Result};
use crate::vec4::{self, Vec4};

pub const TAU: f64 = 2.0 * PI;

/// Relative speed threshold below which a curve counts as degenerate.
const DEGENERATE_SPEED_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    dim: usize,
    /// coeffs[d][k] is the mode-k coefficient of coordinate d; len = modes + 1.
    coeffs: Vec<Vec<Complex64>>,
}

impl Curve {
    pub fn new(dim: usize, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if dim != 3 && dim != 4 {
            return Err(MobiusError::Config(format!("curve dim must be 3 or 4, got {dim}")));
        }
        if coeffs.len() != dim {
            return Err(MobiusError::Config(format!(
                "expected {dim} coordinate coefficient lists, got {}",
                coeffs.len()
            )));
        }
        let modes = coeffs[0].len();
        if modes == 0 || coeffs.iter().any(|c| c.len() != modes) {
            return Err(MobiusError::Config(
                "all coordinates must carry the same nonzero number of modes".into(),
            ));
        }
        Ok(Curve { dim, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest retained Fourier mode M.
    pub fn modes(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coeffs
    }

    /// γ(s): real part of the one-sided Fourier sum, coordinate-wise.
    pub fn eval(&self, s: f64) -> Vec4 {
        self.eval_order(s, 0)
    }

    /// γ'(s), term-by-term.
    pub fn eval_derivative(&self, s: f64) -> Vec4 {
        self.eval_order(s, 1)
    }

    /// γ''(s).
    pub fn eval_second_derivative(&self, s: f64) -> Vec4 {
        self.eval_order(s, 2)
    }

    fn eval_order(&self, s: f64, order: u32) -> Vec4 {
        let mut out = vec4::ZERO;
        let rot = Complex64::from_polar(1.0, s);
        for (d, cs) in self.coeffs.iter().enumerate() {
            let mut e = Complex64::new(1.0, 0.0);
            let mut acc = 0.0;
            for (k, c) in cs.iter().enumerate() {
                let f = Complex64::new(0.0, k as f64).powu(order);
                acc += (c * f * e).re;
                e *= rot;
            }
            out[d] = acc;
        }
        out
    }

    /// Positions and derivatives at N uniform nodes s_j = 2πj/N.
    pub fn sample_uniform(&self, n: usize) -> Vec<(Vec4, Vec4)> {
        (0..n)
            .map(|j| {
                let s = TAU * j as f64 / n as f64;
                (self.eval(s), self.eval_derivative(s))
            })
            .collect()
    }

    /// Least-squares/DFT fit of `modes` Fourier modes to P ≥ 2(modes+1)
    /// uniform samples of a smooth closed curve.
    pub fn fit(dim: usize, samples: &[Vec4], modes: usize) -> Result<Self> {
        let p = samples.len();
        if p < 2 * (modes + 1) {
            return Err(MobiusError::Config(format!(
                "need at least {} samples to fit {modes} modes, got {p}",
                2 * (modes + 1)
            )));
        }
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); modes + 1]; dim];
        for (d, cs) in coeffs.iter_mut().enumerate() {
            for (k, c) in cs.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, x) in samples.iter().enumerate() {
                    let s = TAU * j as f64 / p as f64;
                    acc += x[d] * Complex64::from_polar(1.0, -(k as f64) * s);
                }
                let w = if k == 0 { 1.0 } else { 2.0 };
                *c = acc * (w / p as f64);
            }
            cs[0].im = 0.0;
        }
        Curve::new(dim, coeffs)
    }

    /// Fit a function of s given as a closure, at P uniform samples.
    pub fn fit_fn(dim: usize, modes: usize, p: usize, f: impl Fn(f64) -> Vec4) -> Result<Self> {
        let samples: Vec<Vec4> = (0..p).map(|j| f(TAU * j as f64 / p as f64)).collect();
        Curve::fit(dim, &samples, modes)
    }

    /// Speed statistics on a probe grid: (min, mean, max) of |γ'|.
    pub fn speed_stats(&self, probe: usize) -> (f64, f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        let mut sum = 0.0;
        for j in 0..probe {
            let v = vec4::norm(&self.eval_derivative(TAU * j as f64 / probe as f64));
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        (min, sum / probe as f64, max)
    }

    /// Total arclength via spectral (trapezoid on periodic domain) quadrature
    /// of |γ'| on a fine grid.
    pub fn arclength(&self) -> f64 {
        let n = (16 * (self.modes() + 1)).max(2048);
        let mut sum = 0.0;
        for j in 0..n {
            sum += vec4::norm(&self.eval_derivative(TAU * j as f64 / n as f64));
        }
        sum * TAU / n as f64
    }

    /// Reparametrize proportionally to arclength and refit with `modes` modes.
    ///
    /// The cumulative arclength A(s) is built from the Fourier series of the
    /// speed on a fine grid (its periodic part integrates termwise), then
    /// inverted by Newton iteration at uniform arclength targets.
    pub fn resample_arclength(&self, modes: usize) -> Result<Curve> {
        let k = (16 * (self.modes() + 1)).max(4096);
        let speeds: Vec<f64> = (0..k)
            .map(|j| vec4::norm(&self.eval_derivative(TAU * j as f64 / k as f64)))
            .collect();
        let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = speeds.iter().sum::<f64>() / k as f64;
        if min < DEGENERATE_SPEED_REL * mean {
            return Err(MobiusError::DegenerateCurve { min_speed: min, mean_speed: mean });
        }

        // Fourier coefficients of the speed; speed(s) = Re Σ d_m e^{ims}.
        let kc = k / 2 - 1;
        let mut d = vec![Complex64::new(0.0, 0.0); kc + 1];
        for (m, dm) in d.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &sp) in speeds.iter().enumerate() {
                acc += sp * Complex64::from_polar(1.0, -(m as f64) * TAU * j as f64 / k as f64);
            }
            let w = if m == 0 { 1.0 } else { 2.0 };
            *dm = acc * (w / k as f64);
        }
        let d0 = d[0].re;
        let total = d0 * TAU;
        // A(s) = d0 s + Σ_{m≥1} Re(d_m (e^{ims}-1)/(im))
        let cum = |s: f64| -> f64 {
            let mut a = d0 * s;
            for (m, dm) in d.iter().enumerate().skip(1) {
                let im = Complex64::new(0.0, m as f64);
                a += (dm * (Complex64::from_polar(1.0, m as f64 * s) - 1.0) / im).re;
            }
            a
        };
        let speed_at = |s: f64| vec4::norm(&self.eval_derivative(s));

        let p = (8 * (modes + 1)).max(256);
        let mut samples = Vec::with_capacity(p);
        let mut s = 0.0;
        for i in 0..p {
            let target = total * i as f64 / p as f64;
            // Newton on A(s) = target, warm-started from the previous node
            for _ in 0..50 {
                let f = cum(s) - target;
                if f.abs() < 1e-14 * total {
                    break;
                }
                s -= f / speed_at(s);
            }
            samples.push(self.eval(s));
            s += total / (p as f64 * d0.max(1e-300));
        }
        Curve::fit(self.dim, &samples, modes)
    }

    /// Inverse stereographic projection R³ → S³ ⊂ R⁴, x ↦ (2x, |x|²−1)/(|x|²+1).
    ///
    /// The image is refit in Fourier form (modes doubled until the refit lies
    /// on the sphere to 1e−11) and reparametrized by arclength.
    pub fn stereographic_lift(&self) -> Result<Curve> {
        if self.dim != 3 {
            return Err(MobiusError::Config("stereographic lift expects a curve in R3".into()));
        }
        let lift = |x: &Vec4| -> Vec4 {
            let n2 = vec4::norm2(x);
            let den = n2 + 1.0;
            [2.0 * x[0] / den, 2.0 * x[1] / den, 2.0 * x[2] / den, (n2 - 1.0) / den]
        };
        let mut modes = (2 * self.modes()).max(16);
        loop {
            let p = 8 * (modes + 1);
            let fitted =
                Curve::fit_fn(4, modes, p, |s| lift(&self.eval(s)))?.resample_arclength(modes)?;
            let probe = 4 * (modes + 1);
            let off_sphere = (0..probe)
                .map(|j| (vec4::norm(&fitted.eval(TAU * j as f64 / probe as f64)) - 1.0).abs())
                .fold(0.0, f64::max);
            if off_sphere <= 1e-11 || modes >= 512 {
                if off_sphere > 1e-10 {
                    return Err(MobiusError::Numeric(format!(
                        "stereographic lift did not reach the sphere: residual {off_sphere:.3e} at {modes} modes"
                    )));
                }
                return Ok(fitted);
            }
            modes *= 2;
        }
    }

    /// Stereographic projection S³ → R³, inverse of [`Curve::stereographic_lift`].
    pub fn stereographic_project(&self, modes: usize) -> Result<Curve> {
        if self.dim != 4 {
            return Err(MobiusError::Config("stereographic projection expects a curve on S3".into()));
        }
        let probe = (8 * (self.modes() + 1)).max(8 * (modes + 1));
        let mut samples = Vec::with_capacity(probe);
        for j in 0..probe {
            let y = self.eval(TAU * j as f64 / probe as f64);
            if y[3] > 1.0 - 1e-6 {
                return Err(MobiusError::Singularity(
                    "curve passes through the projection pole (0,0,0,1)".into(),
                ));
            }
            let c = 1.0 / (1.0 - y[3]);
            samples.push([y[0] * c, y[1] * c, y[2] * c, 0.0]);
        }
        Curve::fit(3, &samples, modes)
    }

    /// Apply a constant orthogonal (or any linear) map given by rows.
    pub fn linear_map(&self, rows: &[Vec4; 4], out_dim: usize) -> Result<Curve> {
        let modes = self.modes();
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); modes + 1]; out_dim];
        for (d, cs) in coeffs.iter_mut().enumerate() {
            for (k, c) in cs.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for e in 0..self.dim {
                    acc += rows[d][e] * self.coeffs[e][k];
                }
                *c = acc;
            }
        }
        Curve::new(out_dim, coeffs)
    }

    /// Reverse orientation: s ↦ −s, i.e. conjugate every coefficient.
    pub fn reversed(&self) -> Curve {
        let coeffs = self
            .coeffs
            .iter()
            .map(|cs| cs.iter().map(|c| c.conj()).collect())
            .collect();
        Curve { dim: self.dim, coeffs }
    }

    /// Translate by a constant vector (mode-0 shift).
    pub fn translated(&self, t: &Vec4) -> Curve {
        let mut c = self.clone();
        for d in 0..self.dim {
            c.coeffs[d][0] += t[d];
        }
        c
    }

    /// Scale about the origin.
    pub fn scaled(&self, lambda: f64) -> Curve {
        let coeffs = self
            .coeffs
            .iter()
            .map(|cs| cs.iter().map(|c| c * lambda).collect())
            .collect();
        Curve { dim: self.dim, coeffs }
    }

    /// Max distance from the curve image to a point, on a probe grid.
    pub fn min_distance_to_point(&self, v: &Vec4, probe: usize) -> f64 {
        (0..probe)
            .map(|j| vec4::dist(&self.eval(TAU * j as f64 / probe as f64), v))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ordered, oriented pair of disjoint curves with cached minimal separation α.
#[derive(Debug, Clone)]
pub struct Link {
    pub gamma1: Curve,
    pub gamma2: Curve,
    alpha: f64,
}

/// Separation below this is treated as an intersection.
pub const INTERSECTION_FLOOR: f64 = 1e-9;

impl Link {
    pub fn new(gamma1: Curve, gamma2: Curve) -> Result<Link> {
        if gamma1.dim() != gamma2.dim() {
            return Err(MobiusError::Config("link components must share the ambient dimension".into()));
        }
        let alpha = min_separation(&gamma1, &gamma2)?;
        Ok(Link { gamma1, gamma2, alpha })
    }

    pub fn dim(&self) -> usize {
        self.gamma1.dim()
    }

    /// Cached minimal chord distance α between the components.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn swapped(&self) -> Link {
        Link { gamma1: self.gamma2.clone(), gamma2: self.gamma1.clone(), alpha: self.alpha }
    }

    /// Reverse the orientation of one component (0-indexed).
    pub fn with_reversed(&self, component: usize) -> Link {
        let (g1, g2) = if component == 0 {
            (self.gamma1.reversed(), self.gamma2.clone())
        } else {
            (self.gamma1.clone(), self.gamma2.reversed())
        };
        Link { gamma1: g1, gamma2: g2, alpha: self.alpha }
    }

    /// Max distance of both components from the unit sphere, on a probe grid.
    pub fn off_sphere_residual(&self, probe: usize) -> f64 {
        let mut worst = 0.0f64;
        for c in [&self.gamma1, &self.gamma2] {
            for j in 0..probe {
                let r = (vec4::norm(&c.eval(TAU * j as f64 / probe as f64)) - 1.0).abs();
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Lift both components to S³ (identity if already there to 1e−8).
    pub fn to_sphere(&self) -> Result<Link> {
        if self.dim() == 4 {
            if self.off_sphere_residual(512) <= 1e-8 {
                return Ok(self.clone());
            }
            return Err(MobiusError::Config("dim-4 link does not lie on the unit sphere".into()));
        }
        Link::new(self.gamma1.stereographic_lift()?, self.gamma2.stereographic_lift()?)
    }

    pub fn min_distance_to_point(&self, v: &Vec4, probe: usize) -> f64 {
        self.gamma1
            .min_distance_to_point(v, probe)
            .min(self.gamma2.min_distance_to_point(v, probe))
    }
}

/// Minimal separation between two curves: 256×256 grid scan followed by
/// Newton refinement of the squared-distance function.
pub fn min_separation(gamma1: &Curve, gamma2: &Curve) -> Result<f64> {
    let n = 256;
    let p1 = gamma1.sample_uniform(n);
    let p2 = gamma2.sample_uniform(n);
    let mut best = f64::INFINITY;
    let (mut bs, mut bt) = (0.0, 0.0);
    for (j, (x, _)) in p1.iter().enumerate() {
        for (k, (y, _)) in p2.iter().enumerate() {
            let d = vec4::norm2(&vec4::sub(x, y));
            if d < best {
                best = d;
                bs = TAU * j as f64 / n as f64;
                bt = TAU * k as f64 / n as f64;
            }
        }
    }
    let (mut s, mut t) = (bs, bt);
    let mut val = best;
    for _ in 0..40 {
        let x = gamma1.eval(s);
        let dx = gamma1.eval_derivative(s);
        let ddx = gamma1.eval_second_derivative(s);
        let y = gamma2.eval(t);
        let dy = gamma2.eval_derivative(t);
        let ddy = gamma2.eval_second_derivative(t);
        let delta = vec4::sub(&x, &y);
        let gs = 2.0 * vec4::dot(&dx, &delta);
        let gt = -2.0 * vec4::dot(&dy, &delta);
        let hss = 2.0 * (vec4::dot(&ddx, &delta) + vec4::norm2(&dx));
        let hst = -2.0 * vec4::dot(&dx, &dy);
        let htt = 2.0 * (vec4::norm2(&dy) - vec4::dot(&ddy, &delta));
        let det = hss * htt - hst * hst;
        let grad_norm = (gs * gs + gt * gt).sqrt();
        if grad_norm < 1e-14 || det.abs() < 1e-12 {
            break;
        }
        let ds = (gt * hst - gs * htt) / det;
        let dt = (gs * hst - gt * hss) / det;
        let step_cap = TAU / n as f64;
        if ds.hypot(dt) > 2.0 * step_cap {
            break;
        }
        s += ds;
        t += dt;
        let new = vec4::norm2(&vec4::sub(&gamma1.eval(s), &gamma2.eval(t)));
        if new > val {
            break;
        }
        val = new;
    }
    let alpha = val.min(best).sqrt();
    if alpha < INTERSECTION_FLOOR {
        return Err(MobiusError::IntersectingLink { sep: alpha, floor: INTERSECTION_FLOOR });
    }
    Ok(alpha)
}

// ---------------------------------------------------------------------------
// Model links
// ---------------------------------------------------------------------------

/// The standard Hopf link in S³: γ̂1(s)=(cos s, sin s, 0, 0), γ̂2(t)=(0, 0, cos t, sin t).
pub fn hopf_link() -> Link {
    let c = |coords: [usize; 2]| {
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); 2]; 4];
        coeffs[coords[0]][1] = Complex64::new(1.0, 0.0); // cos s
        coeffs[coords[1]][1] = Complex64::new(0.0, -1.0); // sin s
        Curve::new(4, coeffs).expect("static link construction")
    };
    let gamma1 = c([0, 1]);
    let gamma2 = c([2, 3]);
    Link { gamma1, gamma2, alpha: std::f64::consts::SQRT_2 }
}

/// Rotation used before projecting the Hopf link to R³: 45° in the (1,4)-plane,
/// which moves both components away from the projection pole.
fn hopf_pole_rotation() -> [Vec4; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [[r, 0.0, 0.0, r], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [-r, 0.0, 0.0, r]]
}

/// The Hopf link stereographically projected to R³ (two linked round circles),
/// arclength-parametrized.
pub fn hopf_link_r3(modes: usize) -> Result<Link> {
    let rot = hopf_pole_rotation();
    let hopf = hopf_link();
    let g1 = hopf.gamma1.linear_map(&rot, 4)?.stereographic_project(modes)?.resample_arclength(modes)?;
    let g2 = hopf.gamma2.linear_map(&rot, 4)?.stereographic_project(modes)?.resample_arclength(modes)?;
    Link::new(g1, g2)
}

/// Two coaxial unit circles in parallel planes separated by `gap` (split link).
pub fn split_link(gap: f64) -> Link {
    let circle = |z: f64| {
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); 2]; 3];
        coeffs[0][1] = Complex64::new(1.0, 0.0);
        coeffs[1][1] = Complex64::new(0.0, -1.0);
        coeffs[2][0] = Complex64::new(z, 0.0);
        Curve::new(3, coeffs).expect("static link construction")
    };
    Link::new(circle(0.0), circle(gap)).expect("split link is disjoint")
}

/// The (2,4)-torus link: two parallel (1,2)-curves on the torus R=2, r=1/2.
pub fn torus_2_4_link() -> Link {
    let component = |phase: f64| {
        Curve::fit_fn(3, 8, 64, |s| {
            let rho = 2.0 + 0.5 * (2.0 * s + phase).cos();
            [rho * s.cos(), rho * s.sin(), 0.5 * (2.0 * s + phase).sin(), 0.0]
        })
        .expect("static link construction")
    };
    Link::new(component(0.0), component(PI)).expect("torus link is disjoint")
}

/// Seeded smooth perturbation of the projected Hopf link in R³.
///
/// Modes 1..=4 of every coordinate receive random complex bumps, normalized so
/// the sup-norm displacement of each component equals `amp`.
pub fn perturbed_hopf_link(seed: u64, amp: f64, modes: usize) -> Result<Link> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = hopf_link_r3(modes)?;
    let perturb = |curve: &Curve, rng: &mut rand_chacha::ChaCha8Rng| -> Result<Curve> {
        let mut delta = vec![vec![Complex64::new(0.0, 0.0); modes + 1]; 3];
        for cs in delta.iter_mut() {
            for (k, c) in cs.iter_mut().enumerate().take(5).skip(1) {
                let decay = 1.0 / (k * k) as f64;
                *c = Complex64::new(
                    decay * rng.gen_range(-1.0..1.0),
                    decay * rng.gen_range(-1.0..1.0),
                );
            }
        }
        let bump = Curve::new(3, delta)?;
        let sup = (0..512)
            .map(|j| vec4::norm(&bump.eval(TAU * j as f64 / 512.0)))
            .fold(0.0, f64::max);
        let mut out = curve.clone();
        for d in 0..3 {
            for k in 0..=modes {
                out.coeffs_mut()[d][k] += bump.coeffs()[d][k] * (amp / sup);
            }
        }
        out.resample_arclength(modes)
    };
    let g1 = perturb(&base.gamma1, &mut rng)?;
    let g2 = perturb(&base.gamma2, &mut rng)?;
    Link::new(g1, g2)
}
