//! The canonical family of Gauss-map surfaces g_{(v,z)} in S³: coefficients
//! a, b, c, surface grids with their area integrals and upper bounds, the
//! uniform Jacobian bound, great-sphere and support-containment checks, and
//! mass-concentration scans.

use rayon::prelude::*;

use crate::conformal::boundary_b;
use crate::curve::{Link, TAU};
use crate::energy::{gauss_sample, GaussMapSample, QuadratureSpec};
use crate::error::{MobiusError, Result};
use crate::vec4::{self, Vec4};

/// |v| at or above this counts as a boundary parameter (v ∈ S³).
pub const BOUNDARY_THRESHOLD: f64 = 1e-9;

/// Family parameter (v, z) with the derived coefficients.
#[derive(Debug, Clone, Copy)]
pub struct FamilyPoint {
    pub v: Vec4,
    pub z: f64,
    /// a(v,z) = 1 + (1−|v|²) b(v,z); 1 on the boundary.
    pub a: f64,
    /// b(v,z) interior, b(z) on the boundary.
    pub b: f64,
    /// Dilation center c(v) = v/(1−|v|²); None on the boundary.
    pub c: Option<Vec4>,
    pub boundary: bool,
    /// z ∈ {0, 1}: the family member is the zero surface.
    pub zero_surface: bool,
}

/// Closed-form family coefficients at (v, z), |v| ≤ 1, z ∈ [0, 1].
pub fn family_coeffs(v: &Vec4, z: f64) -> Result<FamilyPoint> {
    let n = vec4::norm(v);
    if n > 1.0 + 1e-12 || !(0.0..=1.0).contains(&z) {
        return Err(MobiusError::Config(format!(
            "family parameter out of range: |v| = {n}, z = {z}"
        )));
    }
    if z == 0.0 || z == 1.0 {
        return Ok(FamilyPoint {
            v: *v,
            z,
            a: if z == 1.0 { f64::INFINITY } else { 0.0 },
            b: if z == 1.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            c: None,
            boundary: n >= 1.0 - BOUNDARY_THRESHOLD,
            zero_surface: true,
        });
    }
    let boundary = n >= 1.0 - BOUNDARY_THRESHOLD;
    let onem = 1.0 - n * n;
    let (a, b, c) = if boundary {
        (1.0, boundary_b(z), None)
    } else {
        let b = (2.0 * z - 1.0) / ((onem + z) * (1.0 - z));
        (1.0 + onem * b, b, Some(vec4::scale(v, 1.0 / onem)))
    };
    Ok(FamilyPoint { v: *v, z, a, b, c, boundary, zero_surface: false })
}

/// Transformed curve data at one parameter value.
struct TransformedNode {
    /// F_v∘γ (first curve) or the fully transformed second curve point.
    pos: Vec4,
    tan: Vec4,
    /// F_v∘γ without the dilation/offset (second curve only; equals `pos` for γ1).
    base_pos: Vec4,
    base_tan: Vec4,
    /// |γ(s) − v|, for S_v exclusion.
    dist_v: f64,
}

/// F_v applied to a point/tangent pair.
fn invert_node(v: &Vec4, x: &Vec4, u: &Vec4) -> (Vec4, Vec4, f64) {
    let d = vec4::sub(x, v);
    let n2 = vec4::norm2(&d);
    let pos = vec4::scale(&d, 1.0 / n2);
    let hat = vec4::scale(&d, 1.0 / n2.sqrt());
    let tan = vec4::scale(&vec4::axpy(-2.0 * vec4::dot(u, &hat), &hat, u), 1.0 / n2);
    (pos, tan, n2.sqrt())
}

fn transform_gamma1(fp: &FamilyPoint, x: &Vec4, u: &Vec4) -> TransformedNode {
    let (pos, tan, dist_v) = invert_node(&fp.v, x, u);
    TransformedNode { pos, tan, base_pos: pos, base_tan: tan, dist_v }
}

fn transform_gamma2(fp: &FamilyPoint, x: &Vec4, u: &Vec4) -> TransformedNode {
    let (base_pos, base_tan, dist_v) = invert_node(&fp.v, x, u);
    if fp.boundary {
        // L_{(v,z)} = F_v − b(z)·v
        let pos = vec4::axpy(-fp.b, &fp.v, &base_pos);
        TransformedNode { pos, tan: base_tan, base_pos, base_tan, dist_v }
    } else {
        let c = fp.c.expect("interior family point carries a dilation center");
        let pos = vec4::add(&vec4::scale(&vec4::sub(&base_pos, &c), fp.a), &c);
        let tan = vec4::scale(&base_tan, fp.a);
        TransformedNode { pos, tan, base_pos, base_tan, dist_v }
    }
}

/// Exclusion radius around the inversion center (the measure-zero set S_v).
pub const SV_EXCLUSION: f64 = 1e-6;

/// Gauss-map sample of the family member g_{(v,z)} at (s, t).
pub fn family_gauss_map(link: &Link, fp: &FamilyPoint, s: f64, t: f64) -> Result<GaussMapSample> {
    if fp.zero_surface {
        return Err(MobiusError::Config("z in {0,1} yields the zero surface; no Gauss map".into()));
    }
    let n1 = transform_gamma1(fp, &link.gamma1.eval(s), &link.gamma1.eval_derivative(s));
    let n2 = transform_gamma2(fp, &link.gamma2.eval(t), &link.gamma2.eval_derivative(t));
    if n1.dist_v < SV_EXCLUSION || n2.dist_v < SV_EXCLUSION {
        return Err(MobiusError::Singularity(
            "family Gauss map sampled on the singular set S_v".into(),
        ));
    }
    Ok(gauss_sample(&n1.pos, &n1.tan, &n2.pos, &n2.tan))
}

/// Node payload of a [`SurfaceGrid`].
#[derive(Debug, Clone, Copy)]
pub struct GridNode {
    pub sample: GaussMapSample,
    /// Lemma-chain middle expression a|(F_vγ1)'||(F_vγ2)'| / (a|Δ°|² + b²).
    pub upper: f64,
    /// node excluded as part of the S_v neighborhood
    pub excluded: bool,
}

/// Uniform (s,t) grid of a family Gauss-map surface with its area integral
/// and the integral of the chain's middle expression.
pub struct SurfaceGrid {
    pub params: FamilyPoint,
    pub n: usize,
    pub nodes: Vec<GridNode>,
    /// trapezoid sum of |Jac g_{(v,z)}|
    pub area_integral: f64,
    /// trapezoid sum of the middle expression (≥ area_integral, ≤ E)
    pub upper_integral: f64,
}

impl SurfaceGrid {
    pub fn node(&self, j: usize, k: usize) -> &GridNode {
        &self.nodes[j * self.n + k]
    }

    pub fn max_jac(&self) -> f64 {
        self.nodes.iter().filter(|n| !n.excluded).map(|n| n.sample.jac).fold(0.0, f64::max)
    }
}

/// Build the surface grid of g_{(v,z)} at resolution N.
pub fn family_area(link: &Link, fp: &FamilyPoint, quad: &QuadratureSpec) -> Result<SurfaceGrid> {
    if fp.zero_surface {
        return Ok(SurfaceGrid {
            params: *fp,
            n: quad.n,
            nodes: Vec::new(),
            area_integral: 0.0,
            upper_integral: 0.0,
        });
    }
    let n = quad.n;
    let s1 = link.gamma1.sample_uniform(n);
    let s2 = link.gamma2.sample_uniform(n);
    let t1: Vec<TransformedNode> =
        s1.iter().map(|(x, u)| transform_gamma1(fp, x, u)).collect();
    let t2: Vec<TransformedNode> =
        s2.iter().map(|(x, u)| transform_gamma2(fp, x, u)).collect();
    let b2 = fp.b * fp.b;
    let a = fp.a;
    let rows: Vec<Vec<GridNode>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let n1 = &t1[j];
            let mut row = Vec::with_capacity(n);
            for n2 in &t2 {
                let excluded = n1.dist_v < SV_EXCLUSION || n2.dist_v < SV_EXCLUSION;
                let sample = gauss_sample(&n1.pos, &n1.tan, &n2.pos, &n2.tan);
                let delta0 = vec4::norm2(&vec4::sub(&n1.base_pos, &n2.base_pos));
                let upper = a * vec4::norm(&n1.base_tan) * vec4::norm(&n2.base_tan)
                    / (a * delta0 + b2);
                row.push(GridNode { sample, upper, excluded });
            }
            row
        })
        .collect();
    let w = quad.weight2();
    let mut area = 0.0;
    let mut upper = 0.0;
    let mut nodes = Vec::with_capacity(n * n);
    for row in rows {
        for node in row {
            if !node.excluded {
                area += node.sample.jac;
                upper += node.upper;
            }
            nodes.push(node);
        }
    }
    Ok(SurfaceGrid {
        params: *fp,
        n,
        nodes,
        area_integral: area * w,
        upper_integral: upper * w,
    })
}

/// Halton low-discrepancy sequence in [0,1]^d (bases 2,3,5,7,11).
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    const BASES: [usize; 5] = [2, 3, 5, 7, 11];
    (0..dim)
        .map(|d| {
            let base = BASES[d];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Low-discrepancy sample of B⁴ × (0,1): `count` Halton points.
pub fn family_sample(count: usize) -> Vec<(Vec4, f64)> {
    let mut out = Vec::with_capacity(count);
    let mut idx = 0;
    while out.len() < count {
        let h = halton(idx, 5);
        idx += 1;
        let v = [2.0 * h[0] - 1.0, 2.0 * h[1] - 1.0, 2.0 * h[2] - 1.0, 2.0 * h[3] - 1.0];
        if vec4::norm(&v) >= 1.0 {
            continue;
        }
        let z = 0.02 + 0.96 * h[4];
        out.push((v, z));
    }
    out
}

/// Explicit uniform Jacobian bound assembled from the proof chain:
/// |Jac g_{(v,z)}| ≤ (3C₁)(3C₂)/α² with C_i = max |γ_i'|.
pub fn jacobian_proof_bound(link: &Link) -> f64 {
    let (_, _, c1) = link.gamma1.speed_stats(1024);
    let (_, _, c2) = link.gamma2.speed_stats(1024);
    9.0 * c1 * c2 / (link.alpha() * link.alpha())
}

pub struct JacobianScanReport {
    pub max_jac: f64,
    pub proof_bound: f64,
    pub samples: usize,
}

/// Max Jacobian over a low-discrepancy (v,z) sample and a coarse (s,t) grid.
pub fn uniform_jacobian_bound(
    link: &Link,
    samples: usize,
    quad: &QuadratureSpec,
) -> Result<JacobianScanReport> {
    let pts = family_sample(samples);
    let maxima: Vec<f64> = pts
        .par_iter()
        .map(|(v, z)| {
            let fp = family_coeffs(v, *z)?;
            Ok(family_area(link, &fp, quad)?.max_jac())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_jac = maxima.iter().cloned().fold(0.0, f64::max);
    Ok(JacobianScanReport { max_jac, proof_bound: jacobian_proof_bound(link), samples })
}

/// Max |⟨g_{(v,1/2)}, v⟩| over the grid; the image lies on the great sphere
/// ⟨x, v⟩ = 0 for every unit v off the curves.
pub fn great_sphere_check(link: &Link, v: &Vec4, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    if (vec4::norm(v) - 1.0).abs() > 1e-12 {
        return Err(MobiusError::Config("great_sphere_check expects a unit vector".into()));
    }
    if link.min_distance_to_point(v, 2048) < 1e-4 {
        return Err(MobiusError::Singularity("v is too close to a curve".into()));
    }
    let fp = family_coeffs(v, 0.5)?;
    let grid = family_area(link, &fp, quad)?;
    let max_inner = grid
        .nodes
        .iter()
        .filter(|n| !n.excluded)
        .map(|n| vec4::dot(&n.sample.g, v).abs())
        .fold(0.0, f64::max);
    Ok((max_inner, grid.area_integral))
}

/// Support radius r(z) = arccos(b(z)/√(b(z)² + c²)) with c = α/4.
pub fn support_radius(alpha: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return std::f64::consts::PI;
    }
    if z >= 1.0 {
        return 0.0;
    }
    let b = boundary_b(z);
    let c = alpha / 4.0;
    (b / (b * b + c * c).sqrt()).clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, Copy)]
pub struct ContainmentReport {
    /// min over nodes of the slack of the annulus condition (≥ −1e−6 required)
    pub min_margin: f64,
    /// max |⟨g,p⟩·|Δ| − b(z)| (the proof's inner-product identity)
    pub identity_residual: f64,
    /// max violation of |⟨g,p⟩| ≤ |b|/√(b²+c²)
    pub cosine_bound_violation: f64,
}

/// Check supp(C(p,z)) ⊂ B̄_{π/2}(p) ∖ B_{r(z)}(p) (z ≥ 1/2; mirrored for
/// z ≤ 1/2) node-by-node, plus the proof identity ⟨g,p⟩ |F_pγ1 − L_{(p,z)}γ2| = b(z).
pub fn support_containment_check(
    link: &Link,
    p: &Vec4,
    z: f64,
    quad: &QuadratureSpec,
) -> Result<ContainmentReport> {
    if (vec4::norm(p) - 1.0).abs() > 1e-12 {
        return Err(MobiusError::Config("support check expects a unit vector p".into()));
    }
    if link.min_distance_to_point(p, 2048) < 1e-4 {
        return Err(MobiusError::Singularity("p is too close to a curve".into()));
    }
    let fp = family_coeffs(p, z)?;
    let grid = family_area(link, &fp, quad)?;
    let r = support_radius(link.alpha(), z);
    let b = boundary_b(z);
    let cos_cap = (b.abs() / (b * b + link.alpha().powi(2) / 16.0).sqrt()).min(1.0);
    let mut min_margin = f64::INFINITY;
    let mut identity_residual = 0.0f64;
    let mut cosine_violation = 0.0f64;
    // reconstruct |F_pγ1 − L_{(p,z)}γ2| per node from the sample
    let n = grid.n;
    let s1 = link.gamma1.sample_uniform(n);
    let s2 = link.gamma2.sample_uniform(n);
    let t1: Vec<TransformedNode> = s1.iter().map(|(x, u)| transform_gamma1(&fp, x, u)).collect();
    let t2: Vec<TransformedNode> = s2.iter().map(|(x, u)| transform_gamma2(&fp, x, u)).collect();
    for j in 0..n {
        for k in 0..n {
            let node = grid.node(j, k);
            if node.excluded {
                continue;
            }
            let d = vec4::sphere_dist(&node.sample.g, p);
            // z ≥ 1/2: d ∈ [r, π/2]; z ≤ 1/2: d ∈ [π/2, r]
            let margin = if z >= 0.5 {
                (d - r).min(std::f64::consts::FRAC_PI_2 - d)
            } else {
                (r - d).min(d - std::f64::consts::FRAC_PI_2)
            };
            min_margin = min_margin.min(margin);
            let chord = vec4::dist(&t1[j].pos, &t2[k].pos);
            identity_residual =
                identity_residual.max((vec4::dot(&node.sample.g, p) * chord - b).abs());
            cosine_violation =
                cosine_violation.max(vec4::dot(&node.sample.g, p).abs() - cos_cap);
        }
    }
    Ok(ContainmentReport {
        min_margin,
        identity_residual,
        cosine_bound_violation: cosine_violation.max(0.0),
    })
}

/// Max relative residual of the two sphere identities at one (v, z, s, t):
/// |F_vγ1 − D(F_vγ2)|² = a|F_vγ1 − F_vγ2|² + b² and
/// |F_vγ1 − F_vγ2|² |γ1−v|² |γ2−v|² = |γ1−γ2|².
pub fn sphere_identity_residual(link: &Link, v: &Vec4, z: f64, s: f64, t: f64) -> Result<f64> {
    let fp = family_coeffs(v, z)?;
    if fp.zero_surface || fp.boundary {
        return Err(MobiusError::Config("sphere identities apply at interior (v, z)".into()));
    }
    let x1 = link.gamma1.eval(s);
    let x2 = link.gamma2.eval(t);
    let n1 = transform_gamma1(&fp, &x1, &link.gamma1.eval_derivative(s));
    let n2 = transform_gamma2(&fp, &x2, &link.gamma2.eval_derivative(t));
    if n1.dist_v < SV_EXCLUSION || n2.dist_v < SV_EXCLUSION {
        return Err(MobiusError::Singularity("sample on the singular set S_v".into()));
    }
    let lhs1 = vec4::norm2(&vec4::sub(&n1.pos, &n2.pos));
    let delta0 = vec4::norm2(&vec4::sub(&n1.base_pos, &n2.base_pos));
    let rhs1 = fp.a * delta0 + fp.b * fp.b;
    let r1 = (lhs1 - rhs1).abs() / rhs1.abs().max(1e-300);
    let lhs2 = delta0 * n1.dist_v * n1.dist_v * n2.dist_v * n2.dist_v;
    let rhs2 = vec4::norm2(&vec4::sub(&x1, &x2));
    let r2 = (lhs2 - rhs2).abs() / rhs2.max(1e-300);
    Ok(r1.max(r2))
}

/// Area of g_{(v,z)} inside the geodesic ball B_r(p), by node counting.
pub fn mass_in_ball(grid: &SurfaceGrid, p: &Vec4, r: f64) -> f64 {
    let w = (TAU / grid.n as f64).powi(2);
    grid.nodes
        .iter()
        .filter(|n| !n.excluded && vec4::sphere_dist(&n.sample.g, p) < r)
        .map(|n| n.sample.jac)
        .sum::<f64>()
        * w
}

/// Deterministic quasi-random covering of S³ by `count` centers.
pub fn sphere_centers(count: usize) -> Vec<Vec4> {
    // Halton points in [0,1]⁴ mapped through a Box-Muller-flavored transform
    let mut out = Vec::with_capacity(count);
    let mut idx = 0;
    while out.len() < count {
        let h = halton(idx, 4);
        idx += 1;
        let g = |u: f64, v: f64| {
            let r = (-2.0 * (1.0 - u).max(1e-12).ln()).sqrt();
            (r * (TAU * v).cos(), r * (TAU * v).sin())
        };
        let (a, b) = g(h[0], h[1]);
        let (c, d) = g(h[2], h[3]);
        let v = [a, b, c, d];
        let n = vec4::norm(&v);
        if n > 1e-6 {
            out.push(vec4::scale(&v, 1.0 / n));
        }
    }
    out
}

pub struct ConcentrationScan {
    pub radii: Vec<f64>,
    /// max over family sample and ball centers of the mass in a ball, per radius
    pub max_mass: Vec<f64>,
}

/// Mass-concentration scan: max over sampled family points and ball centers
/// of the area inside B_r(p), for each radius.
pub fn concentration_scan(
    link: &Link,
    family_points: &[(Vec4, f64)],
    radii: &[f64],
    centers: usize,
    quad: &QuadratureSpec,
) -> Result<ConcentrationScan> {
    let centers = sphere_centers(centers);
    let per_family: Vec<Vec<f64>> = family_points
        .par_iter()
        .map(|(v, z)| {
            let fp = family_coeffs(v, *z)?;
            let grid = family_area(link, &fp, quad)?;
            Ok(radii
                .iter()
                .map(|&r| {
                    centers.iter().map(|p| mass_in_ball(&grid, p, r)).fold(0.0, f64::max)
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let max_mass = (0..radii.len())
        .map(|i| per_family.iter().map(|m| m[i]).fold(0.0, f64::max))
        .collect();
    Ok(ConcentrationScan { radii: radii.to_vec(), max_mass })
}
