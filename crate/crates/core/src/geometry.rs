//! Analytic moving domains.
//!
//! Every family is a map `κ(t, ξ)` defined on the closed unit disk of the
//! reference plane. The lateral boundary at time `t` is the image of the unit
//! circle `ξ(θ) = (cos θ, sin θ)`, traversed counter-clockwise, so the outward
//! normal is the tangent rotated by −90°.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Built-in families of moving domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    StationaryCircle,
    TranslatingCircle,
    ExpandingCircle,
    RotatingEllipse,
    /// `r(t, θ) = R₀ (1 + a sin(kθ) sin(ωt))`.
    PerturbedCircle,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::StationaryCircle,
        Family::TranslatingCircle,
        Family::ExpandingCircle,
        Family::RotatingEllipse,
        Family::PerturbedCircle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::StationaryCircle => "stationary-circle",
            Family::TranslatingCircle => "translating-circle",
            Family::ExpandingCircle => "expanding-circle",
            Family::RotatingEllipse => "rotating-ellipse",
            Family::PerturbedCircle => "radially-perturbed-circle",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown geometry family `{name}`")))
    }

    /// Parameter names understood by the family, with their defaults.
    pub fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::StationaryCircle => &[("R0", 1.0)],
            Family::TranslatingCircle => &[("R0", 1.0), ("c", 0.5), ("cy", 0.0)],
            Family::ExpandingCircle => &[("R0", 1.0), ("a", 0.3)],
            Family::RotatingEllipse => &[("R0", 1.0), ("R1", 0.6), ("omega", 1.0)],
            Family::PerturbedCircle => &[("R0", 1.0), ("a", 0.1), ("k", 3.0), ("omega", PI)],
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Circle { r0: f64 },
    Translating { r0: f64, c: Point },
    Expanding { r0: f64, a: f64 },
    Ellipse { r0: f64, r1: f64, omega: f64 },
    Perturbed { r0: f64, a: f64, k: u32, omega: f64 },
}

/// One point of the lateral boundary `Σ_T` with everything the kernels need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub t: f64,
    pub theta: f64,
    pub x: Point,
    /// Unit outward spatial normal of `Ω_t`.
    pub n: Point,
    /// Line element `|∂_θ x|`.
    pub jac: f64,
    /// Normal velocity `⟨V, n⟩`.
    pub vn: f64,
}

/// Result of [`TubeGeometry::classify_point`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Inside,
    Outside,
    NearBoundary,
}

/// A moving domain `Ω_t = κ(t, Ω₀)` for `t ∈ [0, T]`.
#[derive(Clone, Debug)]
pub struct TubeGeometry {
    family: Family,
    params: BTreeMap<String, f64>,
    horizon: f64,
    c_kappa: f64,
    shape: Shape,
}

/// Default bound on first and second derivatives of κ and its inverse.
pub const DEFAULT_C_KAPPA: f64 = 100.0;

/// Segments of the polygon used by [`TubeGeometry::classify_point`].
pub const CLASSIFY_SEGMENTS: usize = 4096;

impl TubeGeometry {
    /// Builds a family from named parameters; missing ones take the family
    /// defaults, unknown ones are rejected. The key `C_kappa` overrides the
    /// derivative bound.
    pub fn new(family: Family, params: &BTreeMap<String, f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        let mut resolved: BTreeMap<String, f64> = family
            .default_params()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let mut c_kappa = DEFAULT_C_KAPPA;
        for (key, &value) in params {
            if key == "C_kappa" {
                c_kappa = value;
                continue;
            }
            if !resolved.contains_key(key) {
                return Err(Error::Config(format!(
                    "parameter `{key}` is not used by {family}"
                )));
            }
            if !value.is_finite() {
                return Err(Error::Config(format!("parameter `{key}` is not finite")));
            }
            resolved.insert(key.clone(), value);
        }
        let p = |k: &str| resolved[k];
        let r0 = p("R0");
        if r0 <= 0.0 {
            return Err(Error::Config(format!("R0 must be positive, got {r0}")));
        }
        let shape = match family {
            Family::StationaryCircle => Shape::Circle { r0 },
            Family::TranslatingCircle => Shape::Translating {
                r0,
                c: [p("c"), p("cy")],
            },
            Family::ExpandingCircle => {
                let a = p("a");
                if r0 + a * horizon <= 0.0 {
                    return Err(Error::Config(format!(
                        "expanding circle collapses before T: R0 + a T = {}",
                        r0 + a * horizon
                    )));
                }
                Shape::Expanding { r0, a }
            }
            Family::RotatingEllipse => {
                let r1 = p("R1");
                if r1 <= 0.0 {
                    return Err(Error::Config(format!("R1 must be positive, got {r1}")));
                }
                Shape::Ellipse {
                    r0,
                    r1,
                    omega: p("omega"),
                }
            }
            Family::PerturbedCircle => {
                let a = p("a");
                let k = p("k");
                if k < 1.0 || k.fract() != 0.0 || k > 64.0 {
                    return Err(Error::Config(format!(
                        "mode k must be an integer in [1, 64], got {k}"
                    )));
                }
                // det Dκ = f (1 + ε (k+1) ρ^k sin kφ) with |ε| ≤ |a|
                if a.abs() * (k + 1.0) >= 1.0 {
                    return Err(Error::Config(format!(
                        "perturbation too large: |a| (k + 1) = {} must stay below 1",
                        a.abs() * (k + 1.0)
                    )));
                }
                Shape::Perturbed {
                    r0,
                    a,
                    k: k as u32,
                    omega: p("omega"),
                }
            }
        };
        let geom = TubeGeometry {
            family,
            params: resolved,
            horizon,
            c_kappa,
            shape,
        };
        geom.check_derivative_bound()?;
        Ok(geom)
    }

    pub fn stationary_circle(r0: f64, horizon: f64) -> Result<Self> {
        Self::new(Family::StationaryCircle, &params(&[("R0", r0)]), horizon)
    }

    pub fn translating_circle(r0: f64, velocity: Point, horizon: f64) -> Result<Self> {
        Self::new(
            Family::TranslatingCircle,
            &params(&[("R0", r0), ("c", velocity[0]), ("cy", velocity[1])]),
            horizon,
        )
    }

    pub fn expanding_circle(r0: f64, rate: f64, horizon: f64) -> Result<Self> {
        Self::new(
            Family::ExpandingCircle,
            &params(&[("R0", r0), ("a", rate)]),
            horizon,
        )
    }

    pub fn rotating_ellipse(r0: f64, r1: f64, omega: f64, horizon: f64) -> Result<Self> {
        Self::new(
            Family::RotatingEllipse,
            &params(&[("R0", r0), ("R1", r1), ("omega", omega)]),
            horizon,
        )
    }

    pub fn perturbed_circle(r0: f64, a: f64, k: u32, omega: f64, horizon: f64) -> Result<Self> {
        Self::new(
            Family::PerturbedCircle,
            &params(&[("R0", r0), ("a", a), ("k", k as f64), ("omega", omega)]),
            horizon,
        )
    }

    /// The family with its default parameters.
    pub fn with_defaults(family: Family, horizon: f64) -> Result<Self> {
        Self::new(family, &BTreeMap::new(), horizon)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn c_kappa(&self) -> f64 {
        self.c_kappa
    }

    /// Reference radius `R₀`, the length scale of every family.
    pub fn r0(&self) -> f64 {
        self.params["R0"]
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if t.is_nan() || t < -slack || t > self.horizon + slack {
            return Err(Error::Domain {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `κ(t, ξ)` for a reference point `ξ`.
    pub fn map(&self, t: f64, xi: Point) -> Point {
        match self.shape {
            Shape::Circle { r0 } => [r0 * xi[0], r0 * xi[1]],
            Shape::Translating { r0, c } => [r0 * xi[0] + c[0] * t, r0 * xi[1] + c[1] * t],
            Shape::Expanding { r0, a } => {
                let r = r0 + a * t;
                [r * xi[0], r * xi[1]]
            }
            Shape::Ellipse { r0, r1, omega } => {
                let (s, c) = (omega * t).sin_cos();
                let (u, v) = (r0 * xi[0], r1 * xi[1]);
                [c * u - s * v, s * u + c * v]
            }
            Shape::Perturbed { r0, a, k, omega } => {
                let eps = a * (omega * t).sin();
                let f = 1.0 + eps * poly_mode(xi, k).0;
                [r0 * f * xi[0], r0 * f * xi[1]]
            }
        }
    }

    /// Spatial Jacobian `Dκ(t, ξ)`, row-major.
    pub fn jacobian(&self, t: f64, xi: Point) -> [[f64; 2]; 2] {
        match self.shape {
            Shape::Circle { r0 } | Shape::Translating { r0, .. } => [[r0, 0.0], [0.0, r0]],
            Shape::Expanding { r0, a } => {
                let r = r0 + a * t;
                [[r, 0.0], [0.0, r]]
            }
            Shape::Ellipse { r0, r1, omega } => {
                let (s, c) = (omega * t).sin_cos();
                [[c * r0, -s * r1], [s * r0, c * r1]]
            }
            Shape::Perturbed { r0, a, k, omega } => {
                let eps = a * (omega * t).sin();
                let (p, grad) = poly_mode(xi, k);
                let f = 1.0 + eps * p;
                [
                    [r0 * (f + eps * xi[0] * grad[0]), r0 * eps * xi[0] * grad[1]],
                    [r0 * eps * xi[1] * grad[0], r0 * (f + eps * xi[1] * grad[1])],
                ]
            }
        }
    }

    /// `∂_t κ(t, ξ)`; on the boundary this is the deformation velocity `V`.
    pub fn velocity(&self, t: f64, xi: Point) -> Point {
        match self.shape {
            Shape::Circle { .. } => [0.0, 0.0],
            Shape::Translating { c, .. } => c,
            Shape::Expanding { a, .. } => [a * xi[0], a * xi[1]],
            Shape::Ellipse { r0, r1, omega } => {
                let (s, c) = (omega * t).sin_cos();
                let (u, v) = (r0 * xi[0], r1 * xi[1]);
                [omega * (-s * u - c * v), omega * (c * u - s * v)]
            }
            Shape::Perturbed { r0, a, k, omega } => {
                let deps = a * omega * (omega * t).cos();
                let p = poly_mode(xi, k).0;
                [r0 * deps * p * xi[0], r0 * deps * p * xi[1]]
            }
        }
    }

    /// Jacobian determinant of κ, the volume weight of the reference disk.
    pub fn jacobian_det(&self, t: f64, xi: Point) -> f64 {
        let j = self.jacobian(t, xi);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Closed-form area `|Ω_t|`.
    pub fn area(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Circle { r0 } | Shape::Translating { r0, .. } => PI * r0 * r0,
            Shape::Expanding { r0, a } => PI * (r0 + a * t).powi(2),
            Shape::Ellipse { r0, r1, .. } => PI * r0 * r1,
            Shape::Perturbed { r0, a, omega, .. } => {
                let eps = a * (omega * t).sin();
                PI * r0 * r0 * (1.0 + 0.5 * eps * eps)
            }
        }
    }

    /// `κ(t, x̂(θ))` on the reference circle.
    pub fn boundary_point(&self, t: f64, theta: f64) -> Result<Point> {
        self.check_time(t)?;
        Ok(self.map(t, [theta.cos(), theta.sin()]))
    }

    /// Boundary sample at `(t, θ)` with outward normal, line element and
    /// normal velocity `⟨∂_t κ, n⟩`.
    pub fn boundary_sample(&self, t: f64, theta: f64) -> Result<BoundarySample> {
        self.check_time(t)?;
        let s = self.sample_at(t, theta);
        if !(s.jac >= 1e-12) {
            return Err(Error::Geometry(format!(
                "degenerate tangent at t = {t}, theta = {theta}"
            )));
        }
        Ok(s)
    }

    /// Unchecked variant of [`boundary_sample`](Self::boundary_sample) for
    /// quadrature loops over validated meshes.
    #[inline]
    pub fn sample_at(&self, t: f64, theta: f64) -> BoundarySample {
        let (sn, cs) = theta.sin_cos();
        let xi = [cs, sn];
        let x = self.map(t, xi);
        let j = self.jacobian(t, xi);
        let tangent = [j[0][0] * -sn + j[0][1] * cs, j[1][0] * -sn + j[1][1] * cs];
        let jac = norm(tangent);
        let n = [tangent[1] / jac, -tangent[0] / jac];
        let vn = dot(self.velocity(t, xi), n);
        BoundarySample {
            t,
            theta,
            x,
            n,
            jac,
            vn,
        }
    }

    /// Tangent `∂_θ x(t, θ)`.
    pub fn tangent(&self, t: f64, theta: f64) -> Point {
        let (sn, cs) = theta.sin_cos();
        let j = self.jacobian(t, [cs, sn]);
        [j[0][0] * -sn + j[0][1] * cs, j[1][0] * -sn + j[1][1] * cs]
    }

    fn polygon(&self, t: f64, segments: usize) -> Vec<Point> {
        (0..segments)
            .map(|i| {
                let th = TAU * i as f64 / segments as f64;
                self.map(t, [th.cos(), th.sin()])
            })
            .collect()
    }

    /// Inside/outside/near-boundary test against a 4096-gon of `Γ_t` with the
    /// near band `δ = 10⁻³ R₀`.
    pub fn classify_point(&self, t: f64, x: Point) -> Result<PointClass> {
        self.classify_point_with_band(t, x, 1e-3 * self.r0())
    }

    pub fn classify_point_with_band(&self, t: f64, x: Point, band: f64) -> Result<PointClass> {
        self.check_time(t)?;
        let poly = self.polygon(t, CLASSIFY_SEGMENTS);
        if polygon_distance(&poly, x) < band {
            return Ok(PointClass::NearBoundary);
        }
        Ok(if winding_number(&poly, x) != 0 {
            PointClass::Inside
        } else {
            PointClass::Outside
        })
    }

    /// Reference angle of the boundary point of `Γ_t` closest to `x`, and the
    /// distance to it.
    pub fn nearest_angle(&self, t: f64, x: Point) -> (f64, f64) {
        const COARSE: usize = 512;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..COARSE {
            let th = TAU * i as f64 / COARSE as f64;
            let d = norm(sub(self.map(t, [th.cos(), th.sin()]), x));
            if d < best.1 {
                best = (th, d);
            }
        }
        // golden-section polish on the bracketing cell
        let h = TAU / COARSE as f64;
        let (mut lo, mut hi) = (best.0 - h, best.0 + h);
        let dist = |th: f64| norm(sub(self.map(t, [th.cos(), th.sin()]), x));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let (mut fc, mut fd) = (dist(c), dist(d));
        for _ in 0..60 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = dist(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = dist(d);
            }
        }
        let th = 0.5 * (lo + hi);
        (th.rem_euclid(TAU), dist(th))
    }

    /// Samples `κ` on a grid of the closed reference disk and checks the
    /// derivative bound `C_κ` together with positivity of `det Dκ`.
    fn check_derivative_bound(&self) -> Result<()> {
        const NT: usize = 9;
        const NR: usize = 5;
        const NA: usize = 24;
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for it in 0..NT {
            let t = self.horizon * it as f64 / (NT - 1) as f64;
            for ir in 0..NR {
                let rho = ir as f64 / (NR - 1) as f64;
                for ia in 0..NA {
                    let phi = TAU * ia as f64 / NA as f64;
                    let xi = [rho * phi.cos(), rho * phi.sin()];
                    let j = self.jacobian(t, xi);
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    if !(det > 0.0) {
                        return Err(Error::Config(format!(
                            "{}: det Dκ = {det} is not positive at t = {t}",
                            self.family
                        )));
                    }
                    let inv_norm = frob(&j) / det;
                    let v = self.velocity(t, xi);
                    // second derivatives by differencing the analytic first ones
                    let tp = (t + h).min(self.horizon);
                    let tm = (t - h).max(0.0);
                    let vt = sub(self.velocity(tp, xi), self.velocity(tm, xi));
                    let dvt = norm(vt) / (tp - tm);
                    let jx = frob(&mat_sub(
                        &self.jacobian(t, [xi[0] + h, xi[1]]),
                        &self.jacobian(t, [xi[0] - h, xi[1]]),
                    )) / (2.0 * h);
                    let jy = frob(&mat_sub(
                        &self.jacobian(t, [xi[0], xi[1] + h]),
                        &self.jacobian(t, [xi[0], xi[1] - h]),
                    )) / (2.0 * h);
                    for q in [frob(&j), inv_norm, norm(v), dvt, jx, jy] {
                        worst = worst.max(q);
                    }
                }
            }
        }
        if worst > self.c_kappa {
            return Err(Error::Config(format!(
                "{}: derivative bound {worst:.3e} exceeds C_kappa = {}",
                self.family, self.c_kappa
            )));
        }
        Ok(())
    }
}

fn params(list: &[(&str, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `P(ξ) = Im (ξ₁ + iξ₂)^k` and its gradient; `P = sin kθ` on the unit circle.
#[inline]
fn poly_mode(xi: Point, k: u32) -> (f64, Point) {
    let rho = norm(xi);
    if rho == 0.0 {
        let g = if k == 1 { [0.0, 1.0] } else { [0.0, 0.0] };
        return (0.0, g);
    }
    let phi = xi[1].atan2(xi[0]);
    let kf = k as f64;
    let p = rho.powi(k as i32) * (kf * phi).sin();
    // k z^{k-1} = k ρ^{k-1} e^{i(k-1)φ}; ∂P/∂ξ₁ = Im, ∂P/∂ξ₂ = Re
    let m = kf * rho.powi(k as i32 - 1);
    let (s, c) = ((kf - 1.0) * phi).sin_cos();
    (p, [m * s, m * c])
}

fn frob(m: &[[f64; 2]; 2]) -> f64 {
    (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)).sqrt()
}

fn mat_sub(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

/// Unit space-time normal `(v_ν, n) / √(1 + v_ν²)` with `v_ν = −⟨V, n⟩`,
/// ordered (time, x₁, x₂).
pub fn space_time_normal(sample: &BoundarySample) -> [f64; 3] {
    let v_nu = -sample.vn;
    let scale = 1.0 / (1.0 + v_nu * v_nu).sqrt();
    [v_nu * scale, sample.n[0] * scale, sample.n[1] * scale]
}

/// Winding number of a closed polygon around `p`.
pub fn winding_number(poly: &[Point], p: Point) -> i32 {
    let mut wn = 0;
    for (i, a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let is_left = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && is_left > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && is_left < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Euclidean distance from `p` to a closed polygon.
pub fn polygon_distance(poly: &[Point], p: Point) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &a) in poly.iter().enumerate() {
        let b = poly[(i + 1) % poly.len()];
        let ab = sub(b, a);
        let len2 = dot(ab, ab);
        let s = if len2 > 0.0 {
            (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + s * ab[0], a[1] + s * ab[1]];
        best = best.min(norm(sub(p, q)));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn all_families() -> Vec<TubeGeometry> {
        Family::ALL
            .into_iter()
            .map(|f| TubeGeometry::with_defaults(f, 1.0).unwrap())
            .collect()
    }

    #[test]
    fn boundary_point_examples() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let p = g.boundary_point(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-15);

        let g = TubeGeometry::translating_circle(1.0, [1.0, 0.0], 1.0).unwrap();
        let p = g.boundary_point(0.5, PI).unwrap();
        assert_abs_diff_eq!(p[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-15);

        let g = TubeGeometry::expanding_circle(1.0, 0.5, 1.0).unwrap();
        let p = g.boundary_point(1.0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn time_outside_horizon_is_rejected() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        assert!(matches!(g.boundary_point(1.5, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(g.boundary_sample(-0.1, 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn normal_velocity_examples() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        assert_eq!(g.boundary_sample(0.3, 1.1).unwrap().vn, 0.0);

        let g = TubeGeometry::expanding_circle(1.0, 0.3, 1.0).unwrap();
        for th in [0.0, 0.7, 2.0, 5.5] {
            assert_abs_diff_eq!(g.boundary_sample(0.4, th).unwrap().vn, 0.3, epsilon = 1e-14);
        }

        let g = TubeGeometry::translating_circle(1.0, [0.7, 0.0], 1.0).unwrap();
        for th in [0.0, 0.7, 2.0, 5.5] {
            let s = g.boundary_sample(0.4, th).unwrap();
            assert_abs_diff_eq!(s.vn, 0.7 * th.cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn sample_invariants_on_grid() {
        let h = 1e-5;
        for g in all_families() {
            for it in 0..32 {
                let t = 0.99 * it as f64 / 31.0;
                for ia in 0..32 {
                    let th = TAU * ia as f64 / 32.0;
                    let s = g.boundary_sample(t, th).unwrap();
                    assert!((norm(s.n) - 1.0).abs() <= 1e-12);
                    let tan = g.tangent(t, th);
                    assert!(dot(s.n, tan).abs() <= 1e-10 * norm(tan));
                    let ahead = g.boundary_point(t + h, th).unwrap();
                    let fd = dot(sub(ahead, s.x), s.n) / h;
                    assert!(
                        (fd - s.vn).abs() <= 1e-3,
                        "{}: vn {} vs fd {fd}",
                        g.family(),
                        s.vn
                    );
                    // outward: a small step along n leaves the domain
                    let out = [s.x[0] + 1e-2 * s.n[0], s.x[1] + 1e-2 * s.n[1]];
                    assert_eq!(g.classify_point(t, out).unwrap(), PointClass::Outside);
                }
            }
        }
    }

    #[test]
    fn stationary_velocities_vanish_exactly() {
        let g = TubeGeometry::stationary_circle(2.0, 1.0).unwrap();
        for th in [0.0, 1.0, 4.0] {
            let s = g.boundary_sample(0.5, th).unwrap();
            assert_eq!(s.vn, 0.0);
            assert_eq!(space_time_normal(&s)[0], 0.0);
        }
    }

    #[test]
    fn space_time_normal_examples() {
        let g = TubeGeometry::expanding_circle(1.0, 1.0, 1.0).unwrap();
        let s = g.boundary_sample(0.5, 0.3).unwrap();
        let nu = space_time_normal(&s);
        let r = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(nu[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(nu[1], s.n[0] * r, epsilon = 1e-15);
        for g in all_families() {
            let s = g.boundary_sample(0.7, 2.1).unwrap();
            let nu = space_time_normal(&s);
            let len = (nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2]).sqrt();
            assert_abs_diff_eq!(len, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(nu[0] * (1.0 + s.vn * s.vn).sqrt(), -s.vn, epsilon = 1e-15);
        }
    }

    #[test]
    fn classify_examples() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        assert_eq!(g.classify_point(0.5, [0.0, 0.0]).unwrap(), PointClass::Inside);
        assert_eq!(g.classify_point(0.5, [3.0, 0.0]).unwrap(), PointClass::Outside);
        assert_eq!(
            g.classify_point(0.5, [1.0, 0.0]).unwrap(),
            PointClass::NearBoundary
        );
        let g = TubeGeometry::translating_circle(1.0, [1.0, 0.0], 1.0).unwrap();
        assert_eq!(g.classify_point(1.0, [1.0, 0.0]).unwrap(), PointClass::Inside);
        assert_eq!(g.classify_point(1.0, [-0.5, 0.0]).unwrap(), PointClass::Outside);
    }

    #[test]
    fn areas_match_polygon_areas() {
        for g in all_families() {
            for t in [0.0, 0.35, 1.0] {
                let poly = g.polygon(t, 8192);
                let mut a = 0.0;
                for i in 0..poly.len() {
                    let p = poly[i];
                    let q = poly[(i + 1) % poly.len()];
                    a += 0.5 * (p[0] * q[1] - q[0] * p[1]);
                }
                assert!((a - g.area(t)).abs() < 1e-6, "{} at {t}", g.family());
            }
        }
    }

    #[test]
    fn nearest_angle_recovers_normal_offsets() {
        let g = TubeGeometry::with_defaults(Family::RotatingEllipse, 1.0).unwrap();
        let s = g.boundary_sample(0.4, 1.3).unwrap();
        let p = [s.x[0] - 0.05 * s.n[0], s.x[1] - 0.05 * s.n[1]];
        let (th, d) = g.nearest_angle(0.4, p);
        assert_abs_diff_eq!(th, 1.3, epsilon = 1e-7);
        assert_abs_diff_eq!(d, 0.05, epsilon = 1e-10);
    }

    #[test]
    fn invalid_parameters_are_config_errors() {
        assert!(TubeGeometry::stationary_circle(-1.0, 1.0).is_err());
        assert!(TubeGeometry::expanding_circle(1.0, -2.0, 1.0).is_err());
        assert!(TubeGeometry::perturbed_circle(1.0, 0.5, 3, 1.0, 1.0).is_err());
        assert!(TubeGeometry::stationary_circle(1.0, 0.0).is_err());
        let mut p = BTreeMap::new();
        p.insert("bogus".to_string(), 1.0);
        assert!(TubeGeometry::new(Family::StationaryCircle, &p, 1.0).is_err());
        p.clear();
        p.insert("C_kappa".to_string(), 0.5);
        assert!(TubeGeometry::new(Family::StationaryCircle, &p, 1.0).is_err());
        assert_eq!(Family::from_name("rotating-ellipse").unwrap(), Family::RotatingEllipse);
        assert!(Family::from_name("torus").is_err());
    }
}
