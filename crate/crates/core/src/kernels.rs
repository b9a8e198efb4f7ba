//! Heat fundamental solution and its velocity-corrected traces.
//!
//! All kernels are causal: they vanish whenever the source time is not
//! strictly before the target time.

use std::f64::consts::PI;

use crate::geometry::{dot, sub, BoundarySample, Point};

/// Exponents below this are flushed to zero.
const UNDERFLOW_EXPONENT: f64 = -700.0;

/// Kernel argument: a space-time point, optionally carrying the normal and
/// normal velocity needed by traces taken in that variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelPoint {
    pub t: f64,
    pub x: Point,
    pub n: Option<Point>,
    pub vn: Option<f64>,
}

impl KernelPoint {
    pub fn field(t: f64, x: Point) -> Self {
        KernelPoint {
            t,
            x,
            n: None,
            vn: None,
        }
    }

    /// A field point that borrows the normal data of a boundary sample, e.g.
    /// a point displaced off the boundary along that sample's normal.
    pub fn with_trace(t: f64, x: Point, n: Point, vn: f64) -> Self {
        KernelPoint {
            t,
            x,
            n: Some(n),
            vn: Some(vn),
        }
    }

    fn normal(&self) -> (Point, f64) {
        (
            self.n.expect("trace kernel needs a normal at the target"),
            self.vn.unwrap_or(0.0),
        )
    }
}

impl From<&BoundarySample> for KernelPoint {
    fn from(s: &BoundarySample) -> Self {
        KernelPoint::with_trace(s.t, s.x, s.n, s.vn)
    }
}

impl From<BoundarySample> for KernelPoint {
    fn from(s: BoundarySample) -> Self {
        KernelPoint::from(&s)
    }
}

/// `G = (4π dt)^{-d/2} exp(−r²/(4 dt))` for `dt > 0`, zero otherwise.
#[inline]
pub fn heat_kernel(dt: f64, r2: f64, d: u32) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    let e = -r2 / (4.0 * dt);
    if e < UNDERFLOW_EXPONENT {
        return 0.0;
    }
    let base = 4.0 * PI * dt;
    let pref = match d {
        1 => base.sqrt().recip(),
        2 => base.recip(),
        3 => (base * base.sqrt()).recip(),
        _ => panic!("heat kernel implemented for d in 1..=3, got {d}"),
    };
    pref * e.exp()
}

#[inline]
fn g2(dt: f64, r2: f64) -> f64 {
    heat_kernel(dt, r2, 2)
}

/// `∇_x G = −(x − y) / (2 dt) · G`; zero for non-causal pairs.
pub fn grad_x_heat_kernel(target: &KernelPoint, source: &KernelPoint) -> Point {
    let dt = target.t - source.t;
    if dt <= 0.0 {
        return [0.0, 0.0];
    }
    let d = sub(target.x, source.x);
    let g = g2(dt, dot(d, d));
    let f = -g / (2.0 * dt);
    [f * d[0], f * d[1]]
}

/// Hessian `∇_x ∇_x G` of the planar kernel.
pub fn hessian_x_heat_kernel(target: &KernelPoint, source: &KernelPoint) -> [[f64; 2]; 2] {
    let dt = target.t - source.t;
    if dt <= 0.0 {
        return [[0.0; 2]; 2];
    }
    let d = sub(target.x, source.x);
    let g = g2(dt, dot(d, d));
    let a = 1.0 / (2.0 * dt);
    let h = |i: usize, j: usize| {
        let delta = if i == j { 1.0 } else { 0.0 };
        g * (a * a * d[i] * d[j] - a * delta)
    };
    [[h(0, 0), h(0, 1)], [h(1, 0), h(1, 1)]]
}

/// Interior Neumann trace `γ₁⁻ = ∂_n + ½⟨V, n⟩`.
#[inline]
pub fn neumann_minus(value: f64, gradient: Point, sample: &BoundarySample) -> f64 {
    dot(gradient, sample.n) + 0.5 * sample.vn * value
}

/// `γ₁⁺ = ∂_n − ½⟨V, n⟩`.
#[inline]
pub fn neumann_plus(value: f64, gradient: Point, sample: &BoundarySample) -> f64 {
    dot(gradient, sample.n) - 0.5 * sample.vn * value
}

/// Kernel of the single layer potential.
#[inline]
pub fn single_layer_kernel(target: &BoundarySample, source: &BoundarySample) -> f64 {
    TracedKernel::Single.eval(&target.into(), source)
}

/// `γ₁⁺` in the source variables: `[⟨x−y, n_y⟩ / (2 dt) − ½ vn_y] G`.
#[inline]
pub fn double_layer_kernel(target: &BoundarySample, source: &BoundarySample) -> f64 {
    TracedKernel::Double.eval(&target.into(), source)
}

/// `γ₁⁻` in the target variables: `[−⟨x−y, n_x⟩ / (2 dt) + ½ vn_x] G`.
#[inline]
pub fn adjoint_double_layer_kernel(target: &BoundarySample, source: &BoundarySample) -> f64 {
    TracedKernel::AdjointDouble.eval(&target.into(), source)
}

/// Selector for the traced kernels integrated against boundary densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TracedKernel {
    /// `G`
    Single,
    /// `γ₁⁺_(τ,y) G`
    Double,
    /// `γ₁⁻_(t,x) G`, needs the target normal.
    AdjointDouble,
    /// `γ₁⁻_(t,x) γ₁⁺_(τ,y) G`, needs the target normal. Only meaningful off
    /// the boundary; its boundary limit defines the hypersingular operator.
    NeumannOfDouble,
}

impl TracedKernel {
    #[inline]
    pub fn eval(self, target: &KernelPoint, source: &BoundarySample) -> f64 {
        self.eval_lagged(target, source, target.t - source.t)
    }

    /// As [`eval`](Self::eval) with the time lag `t − τ` supplied by the
    /// caller, who may know it more accurately than the difference of the
    /// two times.
    #[inline]
    pub fn eval_lagged(self, target: &KernelPoint, source: &BoundarySample, dt: f64) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        let d = sub(target.x, source.x);
        let g = g2(dt, dot(d, d));
        if g == 0.0 {
            return 0.0;
        }
        let a = 1.0 / (2.0 * dt);
        match self {
            TracedKernel::Single => g,
            TracedKernel::Double => (a * dot(d, source.n) - 0.5 * source.vn) * g,
            TracedKernel::AdjointDouble => {
                let (nx, vnx) = target.normal();
                (-a * dot(d, nx) + 0.5 * vnx) * g
            }
            TracedKernel::NeumannOfDouble => {
                let (nx, vnx) = target.normal();
                let dny = dot(d, source.n);
                let dnx = dot(d, nx);
                // ∂_{n_x} of (a⟨d,n_y⟩ − ½vn_y) G, plus ½ vn_x times the same
                let inner = a * dny - 0.5 * source.vn;
                let normal_derivative = (a * dot(nx, source.n) - inner * a * dnx) * g;
                normal_derivative + 0.5 * vnx * inner * g
            }
        }
    }
}
