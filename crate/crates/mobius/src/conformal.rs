//! Conformal and affine transformation toolkit: sphere inversions F_v,
//! dilations D_{w,λ}, boundary maps L_{(v,z)}, compositions, curve
//! pushforwards, image-sphere data c(v), and the derivative bound check.

use serde::{Deserialize, Serialize};

use crate::curve::{Curve, TAU};
use crate::error::{MobiusError, Result};
use crate::vec4::{self, Vec4};

/// Points closer than this to an inversion center trigger a singularity error.
pub const SINGULARITY_RADIUS: f64 = 1e-12;

/// b(z) = (2z−1)/(z(1−z)), the boundary-map offset coefficient.
pub fn boundary_b(z: f64) -> f64 {
    (2.0 * z - 1.0) / (z * (1.0 - z))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConformalMap {
    /// F_v(x) = (x−v)/|x−v|²
    Inversion { v: Vec4 },
    /// D_{w,λ}(x) = λ(x−w)+w
    Dilation { w: Vec4, lambda: f64 },
    /// L_{(v,z)}(x) = F_v(x) − b(z)v, for |v| = 1, 0 < z < 1
    Boundary { v: Vec4, z: f64 },
    /// Applied left to right: children[0] first.
    Composition { children: Vec<ConformalMap> },
}

impl ConformalMap {
    pub fn inversion(v: Vec4) -> Self {
        ConformalMap::Inversion { v }
    }

    pub fn dilation(w: Vec4, lambda: f64) -> Self {
        ConformalMap::Dilation { w, lambda }
    }

    pub fn apply(&self, x: &Vec4) -> Result<Vec4> {
        match self {
            ConformalMap::Inversion { v } => invert(v, x),
            ConformalMap::Dilation { w, lambda } => {
                Ok(vec4::add(&vec4::scale(&vec4::sub(x, w), *lambda), w))
            }
            ConformalMap::Boundary { v, z } => {
                Ok(vec4::axpy(-boundary_b(*z), v, &invert(v, x)?))
            }
            ConformalMap::Composition { children } => {
                let mut y = *x;
                for c in children {
                    y = c.apply(&y)?;
                }
                Ok(y)
            }
        }
    }

    /// Pushforward of a tangent vector `u` at `x` (analytic differential).
    pub fn differential(&self, x: &Vec4, u: &Vec4) -> Result<Vec4> {
        match self {
            ConformalMap::Inversion { v } | ConformalMap::Boundary { v, .. } => {
                Ok(invert_differential(v, x, u)?)
            }
            ConformalMap::Dilation { lambda, .. } => Ok(vec4::scale(u, *lambda)),
            ConformalMap::Composition { children } => {
                let mut y = *x;
                let mut w = *u;
                for c in children {
                    w = c.differential(&y, &w)?;
                    y = c.apply(&y)?;
                }
                Ok(w)
            }
        }
    }

    /// Refit the image of `curve` in Fourier form, doubling the mode count
    /// (up to 512) until the refit agrees pointwise with `apply` to 1e−8 on
    /// an offset probe grid.
    pub fn pushforward_curve(&self, curve: &Curve) -> Result<Curve> {
        // inversion centers must stay off the curve
        let centers: Vec<Vec4> = self.inversion_centers();
        for c in &centers {
            if curve.min_distance_to_point(c, 2048) < 1e-6 {
                return Err(MobiusError::Singularity(
                    "inversion center lies on (or within 1e-6 of) the curve".into(),
                ));
            }
        }
        let mut modes = curve.modes().max(8);
        loop {
            let p = 8 * (modes + 1);
            let mut samples = Vec::with_capacity(p);
            for j in 0..p {
                samples.push(self.apply(&curve.eval(TAU * j as f64 / p as f64))?);
            }
            let fitted = Curve::fit(curve.dim(), &samples, modes)?;
            // probe at nodes offset from the fitting grid
            let probe = 4 * (modes + 1);
            let mut worst = 0.0f64;
            for j in 0..probe {
                let s = TAU * (j as f64 + 0.5) / probe as f64;
                let exact = self.apply(&curve.eval(s))?;
                worst = worst.max(vec4::dist(&exact, &fitted.eval(s)));
            }
            if worst <= 1e-8 {
                return Ok(fitted);
            }
            if modes >= 512 {
                return Err(MobiusError::Numeric(format!(
                    "pushforward refit did not converge: pointwise error {worst:.3e} at 512 modes"
                )));
            }
            modes = (2 * modes).min(512);
        }
    }

    fn inversion_centers(&self) -> Vec<Vec4> {
        match self {
            ConformalMap::Inversion { v } | ConformalMap::Boundary { v, .. } => vec![*v],
            ConformalMap::Dilation { .. } => vec![],
            ConformalMap::Composition { children } => {
                // centers of later members are pulled back lazily at apply time;
                // only direct centers are pre-checked here
                children.iter().flat_map(|c| c.inversion_centers()).collect()
            }
        }
    }
}

fn invert(v: &Vec4, x: &Vec4) -> Result<Vec4> {
    let d = vec4::sub(x, v);
    let n2 = vec4::norm2(&d);
    if n2.sqrt() < SINGULARITY_RADIUS {
        return Err(MobiusError::Singularity(format!(
            "inversion evaluated at its center (|x - v| = {:.3e})",
            n2.sqrt()
        )));
    }
    Ok(vec4::scale(&d, 1.0 / n2))
}

/// dF_v(x)[u] = (u − 2⟨u, x̂⟩x̂)/|x−v|² with x̂ = (x−v)/|x−v|.
fn invert_differential(v: &Vec4, x: &Vec4, u: &Vec4) -> Result<Vec4> {
    let d = vec4::sub(x, v);
    let n2 = vec4::norm2(&d);
    if n2.sqrt() < SINGULARITY_RADIUS {
        return Err(MobiusError::Singularity("differential at the inversion center".into()));
    }
    let hat = vec4::scale(&d, 1.0 / n2.sqrt());
    Ok(vec4::scale(&vec4::axpy(-2.0 * vec4::dot(u, &hat), &hat, u), 1.0 / n2))
}

/// Image of the unit sphere under F_v for |v| < 1: sphere of center
/// c(v) = v/(1−|v|²) and radius 1/(1−|v|²).
pub fn image_sphere(v: &Vec4) -> Result<(Vec4, f64)> {
    let n2 = vec4::norm2(v);
    if n2.sqrt() >= 1.0 - 1e-9 {
        return Err(MobiusError::Numeric(format!(
            "image_sphere needs |v| < 1 - 1e-9 (got |v| = {}); use boundary maps instead",
            n2.sqrt()
        )));
    }
    let f = 1.0 / (1.0 - n2);
    Ok((vec4::scale(v, f), f))
}

/// Residual of the boundary-map plane identity ⟨L_{(v,z)}(x), v⟩ = −1/2 − b(z).
pub fn boundary_map_plane_check(v: &Vec4, z: f64, x: &Vec4) -> Result<f64> {
    let map = ConformalMap::Boundary { v: *v, z };
    let y = map.apply(x)?;
    Ok(vec4::dot(&y, v) + 0.5 + boundary_b(z))
}

/// Max over `samples` parameter values of |(F_v∘γ)'(t)| / |(F_v∘γ)(t)|²,
/// excluding points within 1e−6 of the inversion center (the set S_v).
pub fn derivative_bound_check(curve: &Curve, v: &Vec4, samples: usize) -> Result<f64> {
    let mut max_ratio = 0.0f64;
    for j in 0..samples {
        let t = TAU * j as f64 / samples as f64;
        let x = curve.eval(t);
        if vec4::dist(&x, v) < 1e-6 {
            continue;
        }
        let u = curve.eval_derivative(t);
        let fx = invert(v, &x)?;
        let du = invert_differential(v, &x, &u)?;
        max_ratio = max_ratio.max(vec4::norm(&du) / vec4::norm2(&fx));
    }
    Ok(max_ratio)
}
