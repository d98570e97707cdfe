//! Gradient descent on the discretized cross energy over Fourier coefficients,
//! gauge normalization, conformal null-space projection, and the rigidity
//! diagnostics evaluated at a converged minimizer.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::curve::{Curve, Link, TAU};
use crate::energy::{linking_number, mobius_energy, QuadratureSpec};
use crate::error::{MobiusError, Result};
use crate::family::{self, family_coeffs};
use crate::vec4::{self, Vec4};

/// Flat real view of the Fourier coefficients of both components.
///
/// Layout: curve 1 then curve 2; per curve, coordinate-major, each mode
/// contributing (re, im). Im c₀ is carried but is not a degree of freedom
/// (eval ignores it); gradients and null directions vanish there.
#[derive(Debug, Clone)]
pub struct CoeffVector {
    dim1: usize,
    modes1: usize,
    dim2: usize,
    modes2: usize,
    pub data: Vec<f64>,
}

impl CoeffVector {
    pub fn zeros_like(link: &Link) -> CoeffVector {
        let (d1, m1) = (link.gamma1.dim(), link.gamma1.modes());
        let (d2, m2) = (link.gamma2.dim(), link.gamma2.modes());
        CoeffVector {
            dim1: d1,
            modes1: m1,
            dim2: d2,
            modes2: m2,
            data: vec![0.0; 2 * (d1 * (m1 + 1) + d2 * (m2 + 1))],
        }
    }

    pub fn from_link(link: &Link) -> CoeffVector {
        let mut v = CoeffVector::zeros_like(link);
        let mut i = 0;
        for curve in [&link.gamma1, &link.gamma2] {
            for cs in curve.coeffs() {
                for c in cs {
                    v.data[i] = c.re;
                    v.data[i + 1] = c.im;
                    i += 2;
                }
            }
        }
        v
    }

    /// Rebuild a link with these coefficients (validates the separation).
    pub fn to_link(&self) -> Result<Link> {
        let mut i = 0;
        let mut curves = Vec::with_capacity(2);
        for (dim, modes) in [(self.dim1, self.modes1), (self.dim2, self.modes2)] {
            let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); modes + 1]; dim];
            for cs in coeffs.iter_mut() {
                for c in cs.iter_mut() {
                    *c = Complex64::new(self.data[i], self.data[i + 1]);
                    i += 2;
                }
                cs[0].im = 0.0;
            }
            curves.push(Curve::new(dim, coeffs)?);
        }
        let g2 = curves.pop().expect("two curves");
        let g1 = curves.pop().expect("two curves");
        Link::new(g1, g2)
    }

    pub fn dot(&self, other: &CoeffVector) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, c: f64, x: &CoeffVector) {
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    /// Subtract the components along an orthonormal basis.
    pub fn project_out(&mut self, basis: &[CoeffVector]) {
        for b in basis {
            let c = self.dot(b);
            self.axpy(-c, b);
        }
    }
}

/// Analytic gradient of the trapezoid-discretized energy with respect to every
/// real Fourier coefficient, together with the energy value.
pub fn energy_gradient(link: &Link, quad: &QuadratureSpec) -> Result<(f64, CoeffVector)> {
    let n = quad.n;
    let s1 = link.gamma1.sample_uniform(n);
    let s2 = link.gamma2.sample_uniform(n);
    // per-node position/tangent gradients, rows reduced in index order
    struct Row {
        gp1: Vec4,
        gt1: Vec4,
        gp2: Vec<Vec4>,
        gt2: Vec<Vec4>,
        energy: f64,
    }
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (x1, d1) = &s1[j];
            let sp1 = vec4::norm(d1);
            let hat1 = vec4::scale(d1, 1.0 / sp1);
            let mut row = Row {
                gp1: vec4::ZERO,
                gt1: vec4::ZERO,
                gp2: vec![vec4::ZERO; n],
                gt2: vec![vec4::ZERO; n],
                energy: 0.0,
            };
            for (k, (x2, d2)) in s2.iter().enumerate() {
                let delta = vec4::sub(x1, x2);
                let r2 = vec4::norm2(&delta);
                let sp2 = vec4::norm(d2);
                let val = sp1 * sp2 / r2;
                row.energy += val;
                let pos = vec4::scale(&delta, -2.0 * val / r2);
                row.gp1 = vec4::add(&row.gp1, &pos);
                row.gp2[k] = vec4::sub(&row.gp2[k], &pos);
                row.gt1 = vec4::axpy(sp2 / r2, &hat1, &row.gt1);
                row.gt2[k] = vec4::axpy(sp1 / (r2 * sp2), d2, &row.gt2[k]);
            }
            row
        })
        .collect();
    let w = quad.weight2();
    let mut energy = 0.0;
    let mut gp1 = vec![vec4::ZERO; n];
    let mut gt1 = vec![vec4::ZERO; n];
    let mut gp2 = vec![vec4::ZERO; n];
    let mut gt2 = vec![vec4::ZERO; n];
    for (j, row) in rows.into_iter().enumerate() {
        energy += row.energy;
        gp1[j] = row.gp1;
        gt1[j] = row.gt1;
        for k in 0..n {
            gp2[k] = vec4::add(&gp2[k], &row.gp2[k]);
            gt2[k] = vec4::add(&gt2[k], &row.gt2[k]);
        }
    }
    energy *= w;

    let mut grad = CoeffVector::zeros_like(link);
    let mut i = 0;
    for (curve, gp, gt) in [(&link.gamma1, &gp1, &gt1), (&link.gamma2, &gp2, &gt2)] {
        let modes = curve.modes();
        for d in 0..curve.dim() {
            for k in 0..=modes {
                let mut re = 0.0;
                let mut im = 0.0;
                for j in 0..n {
                    let ks = k as f64 * TAU * j as f64 / n as f64;
                    let (sin, cos) = ks.sin_cos();
                    // ∂x(s_j)/∂Re c_k = cos ks, ∂x'(s_j)/∂Re c_k = −k sin ks
                    re += gp[j][d] * cos - k as f64 * gt[j][d] * sin;
                    // ∂x/∂Im c_k = −sin ks, ∂x'/∂Im c_k = −k cos ks
                    im += -gp[j][d] * sin - k as f64 * gt[j][d] * cos;
                }
                grad.data[i] = re * w;
                grad.data[i + 1] = if k == 0 { 0.0 } else { im * w };
                i += 2;
            }
        }
    }
    Ok((energy, grad))
}

/// Parameter-mean centroid of a component (the constant Fourier mode).
fn centroid(c: &Curve) -> Vec4 {
    let mut out = vec4::ZERO;
    for (d, cs) in c.coeffs().iter().enumerate() {
        out[d] = cs[0].re;
    }
    out
}

/// Mean chordal radius of a component about its centroid.
fn mean_radius(c: &Curve) -> f64 {
    let m = centroid(c);
    let probe = 256.max(4 * (c.modes() + 1));
    (0..probe)
        .map(|j| vec4::dist(&c.eval(TAU * j as f64 / probe as f64), &m))
        .sum::<f64>()
        / probe as f64
}

/// Similarity normalization: midpoint of the two component centroids at the
/// origin, mean radius of component 1 equal to 1.
pub fn gauge_normalize(link: &Link) -> Result<Link> {
    let mid = vec4::scale(
        &vec4::add(&centroid(&link.gamma1), &centroid(&link.gamma2)),
        0.5,
    );
    let shift = vec4::scale(&mid, -1.0);
    let g1 = link.gamma1.translated(&shift);
    let g2 = link.gamma2.translated(&shift);
    let r = mean_radius(&g1);
    if r < 1e-300 {
        return Err(MobiusError::DegenerateCurve { min_speed: r, mean_speed: 1.0 });
    }
    Link::new(g1.scaled(1.0 / r), g2.scaled(1.0 / r))
}

/// Fit the coefficient direction of a velocity field x ↦ V(x) along the link.
fn field_direction(link: &Link, field: impl Fn(&Vec4) -> Vec4) -> CoeffVector {
    let mut v = CoeffVector::zeros_like(link);
    let mut i = 0;
    for curve in [&link.gamma1, &link.gamma2] {
        let modes = curve.modes();
        let p = 4 * (modes + 1);
        let samples: Vec<Vec4> =
            (0..p).map(|j| field(&curve.eval(TAU * j as f64 / p as f64))).collect();
        let fitted = Curve::fit(curve.dim(), &samples, modes).expect("enough samples by construction");
        for cs in fitted.coeffs() {
            for c in cs {
                v.data[i] = c.re;
                v.data[i + 1] = c.im;
                i += 2;
            }
        }
    }
    v
}

/// Orthonormal basis of the conformal null space of E at this link: three
/// translations, three rotations, one dilation, and three special conformal
/// generators K_b(x) = 2⟨b,x⟩x − |x|²b (R³ components only).
pub fn conformal_null_basis(link: &Link) -> Vec<CoeffVector> {
    if link.dim() != 3 {
        return Vec::new();
    }
    let mut raw: Vec<CoeffVector> = Vec::with_capacity(10);
    for a in 0..3 {
        let mut e = vec4::ZERO;
        e[a] = 1.0;
        raw.push(field_direction(link, |_| e));
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        raw.push(field_direction(link, |x| {
            let mut v = vec4::ZERO;
            v[b] = x[a];
            v[a] = -x[b];
            v
        }));
    }
    raw.push(field_direction(link, |x| *x));
    for a in 0..3 {
        let mut e = vec4::ZERO;
        e[a] = 1.0;
        raw.push(field_direction(link, move |x| {
            vec4::axpy(2.0 * x[a], x, &vec4::scale(&e, -vec4::norm2(x)))
        }));
    }
    // modified Gram–Schmidt; drop directions that collapse (symmetric links)
    let mut basis: Vec<CoeffVector> = Vec::with_capacity(raw.len());
    for mut v in raw {
        let scale0 = v.norm();
        v.project_out(&basis);
        let n = v.norm();
        if n > 1e-10 * scale0.max(1.0) {
            v.scale(1.0 / n);
            basis.push(v);
        }
    }
    basis
}

/// One trace row of the descent loop.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    /// min separation of the current link
    pub alpha: f64,
    /// accepted step size (0 on the final diagnostic row)
    pub step: f64,
    /// projected gradient norm
    pub gradnorm: f64,
    /// linking number when checked this iteration
    pub lk: Option<i64>,
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOpts {
    pub max_iter: usize,
    pub tol: f64,
    pub quad: QuadratureSpec,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        MinimizeOpts { max_iter: 5000, tol: 1e-6, quad: QuadratureSpec { n: 96 } }
    }
}

pub struct MinimizeResult {
    pub link: Link,
    pub energy: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// line search collapsed below the minimum step without a decrease
    pub stalled: bool,
    pub lk: i64,
}

const ARMIJO_C: f64 = 1e-4;
const STEP_INIT: f64 = 0.1;
const STEP_MIN: f64 = 1e-12;

/// Backtracking gradient descent with per-step gauge normalization, a
/// separation floor of 1e-3 × mean radius, and periodic linking checks.
pub fn minimize(link: &Link, opts: &MinimizeOpts) -> Result<MinimizeResult> {
    let mut current = gauge_normalize(link)?;
    let lk0 = linking_number(&current, &opts.quad)?;
    let (mut energy, mut grad) = energy_gradient(&current, &opts.quad)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut stalled = false;
    for iter in 0..opts.max_iter {
        let basis = conformal_null_basis(&current);
        grad.project_out(&basis);
        let gradnorm = grad.norm();
        let check_lk = iter == 0 || iter % 50 == 0;
        let lk_now = if check_lk { Some(linking_number(&current, &opts.quad)?) } else { None };
        if let Some(l) = lk_now {
            if l != lk0 {
                return Err(MobiusError::Numeric(format!(
                    "linking number changed during descent: {lk0} -> {l}"
                )));
            }
        }
        if gradnorm <= opts.tol {
            trace.push(TraceRow { iter, energy, alpha: current.alpha(), step: 0.0, gradnorm, lk: lk_now });
            converged = true;
            break;
        }
        let floor = 1e-3 * mean_radius(&current.gamma1);
        let base = CoeffVector::from_link(&current);
        let mut step = STEP_INIT;
        let mut accepted = None;
        while step >= STEP_MIN {
            let mut cand = base.clone();
            cand.axpy(-step, &grad);
            match cand.to_link() {
                Ok(next) if next.alpha() >= floor => {
                    let next = gauge_normalize(&next)?;
                    let (e_next, g_next) = energy_gradient(&next, &opts.quad)?;
                    if e_next <= energy - ARMIJO_C * step * gradnorm * gradnorm {
                        accepted = Some((next, e_next, g_next));
                        break;
                    }
                }
                _ => {}
            }
            step *= 0.5;
        }
        match accepted {
            Some((next, e_next, g_next)) => {
                trace.push(TraceRow {
                    iter,
                    energy: e_next,
                    alpha: next.alpha(),
                    step,
                    gradnorm,
                    lk: lk_now,
                });
                current = next;
                energy = e_next;
                grad = g_next;
            }
            None => {
                trace.push(TraceRow { iter, energy, alpha: current.alpha(), step: 0.0, gradnorm, lk: lk_now });
                stalled = true;
                break;
            }
        }
    }
    let lk_final = linking_number(&current, &opts.quad)?;
    if lk_final != lk0 {
        return Err(MobiusError::Numeric(format!(
            "linking number changed during descent: {lk0} -> {lk_final}"
        )));
    }
    Ok(MinimizeResult { link: current, energy, trace, converged, stalled, lk: lk_final })
}

/// Least-squares circle fit in R⁴: PCA plane through the centroid, then a
/// Kåsa fit in plane coordinates. Returns (scaled max residual, radius).
pub fn best_fit_circle(pts: &[Vec4]) -> (f64, f64) {
    let n = pts.len();
    assert!(n >= 3, "circle fit needs at least 3 points");
    let mut m = vec4::ZERO;
    for p in pts {
        m = vec4::add(&m, p);
    }
    m = vec4::scale(&m, 1.0 / n as f64);
    let mut cov = nalgebra::Matrix4::<f64>::zeros();
    for p in pts {
        let d = vec4::sub(p, &m);
        for i in 0..4 {
            for j in 0..4 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    // top two eigenvectors span the fitting plane
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let e1: Vec4 = std::array::from_fn(|i| eig.eigenvectors[(i, order[0])]);
    let e2: Vec4 = std::array::from_fn(|i| eig.eigenvectors[(i, order[1])]);
    // Kåsa: u² + v² = 2au + 2bv + c
    let mut a_mat = nalgebra::Matrix3::<f64>::zeros();
    let mut rhs = nalgebra::Vector3::<f64>::zeros();
    let planar: Vec<(f64, f64, f64)> = pts
        .iter()
        .map(|p| {
            let d = vec4::sub(p, &m);
            let u = vec4::dot(&d, &e1);
            let v = vec4::dot(&d, &e2);
            let off = vec4::norm(&vec4::axpy(-v, &e2, &vec4::axpy(-u, &e1, &d)));
            (u, v, off)
        })
        .collect();
    for &(u, v, _) in &planar {
        let row = [2.0 * u, 2.0 * v, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                a_mat[(i, j)] += row[i] * row[j];
            }
            rhs[i] += row[i] * (u * u + v * v);
        }
    }
    let sol = a_mat
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| nalgebra::Vector3::zeros());
    let (ca, cb) = (sol[0], sol[1]);
    let radius = (sol[2] + ca * ca + cb * cb).max(0.0).sqrt();
    let mut worst = 0.0f64;
    for &(u, v, off) in &planar {
        let in_plane = ((u - ca).powi(2) + (v - cb).powi(2)).sqrt() - radius;
        worst = worst.max((in_plane * in_plane + off * off).sqrt());
    }
    (worst / radius.max(1e-300), radius)
}

/// Rigidity residuals of a near-minimizer, evaluated after the best family
/// inversion: the three orthogonality inner products of the equality case,
/// the spread of the chord length |γ̂1(s) − γ̂2(t)|, and per-component
/// circle-fit residuals.
#[derive(Debug, Clone, Copy)]
pub struct RigidityReport {
    pub max_ortho_residual: f64,
    pub chord_spread: f64,
    pub circle_residuals: [f64; 2],
    /// v of the normalizing inversion
    pub best_v: Vec4,
}

/// Renormalized inversion of an on-sphere link: F_v followed by the similarity
/// pulling the image sphere back to the unit sphere.
fn invert_to_unit_sphere(link: &Link, v: &Vec4) -> Result<Link> {
    let n2 = vec4::norm2(v);
    let scale = 1.0 - n2; // inverse of the image-sphere radius
    let map = |curve: &Curve| -> Result<Curve> {
        let modes = (4 * curve.modes()).max(32);
        let p = 4 * (modes + 1);
        let c = vec4::scale(v, 1.0 / (1.0 - n2));
        let samples: Vec<Vec4> = (0..p)
            .map(|j| {
                let x = curve.eval(TAU * j as f64 / p as f64);
                let d = vec4::sub(&x, v);
                let f = vec4::scale(&d, 1.0 / vec4::norm2(&d));
                vec4::scale(&vec4::sub(&f, &c), scale)
            })
            .collect();
        Curve::fit(curve.dim(), &samples, modes)
    };
    Link::new(map(&link.gamma1)?, map(&link.gamma2)?)
}

pub fn rigidity_report(link: &Link, quad: &QuadratureSpec) -> Result<RigidityReport> {
    let lifted = if link.dim() == 3 { link.to_sphere()? } else { link.clone() };
    let best_v = refine_family_argmax(&lifted, quad)?.0;
    let normalized = if vec4::norm(&best_v) < 1e-9 {
        lifted
    } else {
        invert_to_unit_sphere(&lifted, &best_v)?
    };
    let grid = 128;
    let s1 = normalized.gamma1.sample_uniform(grid);
    let s2 = normalized.gamma2.sample_uniform(grid);
    let mut ortho = 0.0f64;
    let mut chord_min = f64::INFINITY;
    let mut chord_max = 0.0f64;
    for (x1, d1) in &s1 {
        let n1 = vec4::norm(d1);
        for (x2, d2) in &s2 {
            let n2 = vec4::norm(d2);
            let delta = vec4::sub(x1, x2);
            let r = vec4::norm(&delta);
            ortho = ortho
                .max(vec4::dot(d1, d2).abs() / (n1 * n2))
                .max(vec4::dot(d1, &delta).abs() / (n1 * r))
                .max(vec4::dot(d2, &delta).abs() / (n2 * r));
            chord_min = chord_min.min(r);
            chord_max = chord_max.max(r);
        }
    }
    let pts1: Vec<Vec4> = s1.iter().map(|(x, _)| *x).collect();
    let pts2: Vec<Vec4> = s2.iter().map(|(x, _)| *x).collect();
    Ok(RigidityReport {
        max_ortho_residual: ortho,
        chord_spread: 2.0 * (chord_max - chord_min) / (chord_max + chord_min),
        circle_residuals: [best_fit_circle(&pts1).0, best_fit_circle(&pts2).0],
        best_v,
    })
}

/// Family-area maximum diagnostic: coarse low-discrepancy scan followed by
/// pattern-search refinement in (v, z).
pub struct FamilyMaxReport {
    pub v: Vec4,
    pub z: f64,
    pub value: f64,
    pub energy: f64,
}

fn family_value(link: &Link, v: &Vec4, z: f64, quad: &QuadratureSpec) -> f64 {
    let n = vec4::norm(v);
    let v = if n > 1.0 { vec4::scale(v, 1.0 / n) } else { *v };
    match family_coeffs(&v, z.clamp(0.0, 1.0)) {
        Ok(fp) => match family::family_area(link, &fp, quad) {
            Ok(grid) => grid.area_integral,
            Err(_) => f64::NEG_INFINITY,
        },
        Err(_) => f64::NEG_INFINITY,
    }
}

fn refine_family_argmax(link: &Link, quad: &QuadratureSpec) -> Result<(Vec4, f64, f64)> {
    let coarse = QuadratureSpec::new(48)?;
    let mut best = (vec4::ZERO, 0.5, family_value(link, &vec4::ZERO, 0.5, &coarse));
    for (v, z) in family::family_sample(256) {
        let val = family_value(link, &v, z, &coarse);
        if val > best.2 {
            best = (v, z, val);
        }
    }
    // pattern search over (v, z)
    let mut step = 0.2;
    while step > 1e-5 {
        let mut improved = false;
        for axis in 0..5 {
            for sign in [1.0, -1.0] {
                let mut v = best.0;
                let mut z = best.1;
                if axis < 4 {
                    v[axis] += sign * step;
                } else {
                    z = (z + sign * step).clamp(0.01, 0.99);
                }
                let val = family_value(link, &v, z, &coarse);
                if val > best.2 + 1e-14 {
                    best = (v, z, val);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let value = family_value(link, &best.0, best.1, quad);
    Ok((best.0, best.1, value))
}

/// Maximize the canonical-family area over (v, z); reports the argmax, the
/// maximum value, and the energy it is bounded by.
pub fn family_max_diagnostic(link: &Link, quad: &QuadratureSpec) -> Result<FamilyMaxReport> {
    if link.off_sphere_residual(512) > 1e-8 {
        return Err(MobiusError::Config("family diagnostic needs an on-sphere link; lift first".into()));
    }
    let (v, z, value) = refine_family_argmax(link, quad)?;
    let energy = mobius_energy(link, quad);
    Ok(FamilyMaxReport { v, z, value, energy })
}
