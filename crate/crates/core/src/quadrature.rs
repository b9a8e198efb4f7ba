//! Discretisation of the lateral boundary and the space-time integrals over
//! it.
//!
//! `Σ_T` is split into `M` uniform time slabs times `N` uniform panels in the
//! reference angle. Densities are piecewise constant on these patches and
//! collocated at patch midpoints. Three integration regimes are used for a
//! patch, seen from a target point `(t, x)`:
//!
//! * slabs ending at least one slab width before `t`: tensor Gauss in
//!   `(τ, θ)` on nodes cached in the mesh;
//! * the current and the previous slab, away from the target angle: the
//!   substitution `τ = t − s²` with composite Gauss in `s`;
//! * the current and previous slab within two panels of the target angle:
//!   the same substitution, followed by a Duffy split of the `(s, θ)`
//!   rectangle at the point nearest to the target and geometric grading of
//!   the radial Duffy variable.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, Point, TubeGeometry};
use crate::kernels::{KernelPoint, TracedKernel};

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] → [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + h * x, h * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature orders and grading used on the mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss order per slab in time.
    pub q_t: usize,
    /// Gauss order per panel in angle.
    pub q_s: usize,
    /// Gauss order of each Duffy sub-interval on near patches.
    pub q_near: usize,
    /// Number of geometric grading levels toward the singular corner.
    pub grading_levels: usize,
    /// Ratio between consecutive grading break points.
    pub grading_ratio: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            q_t: 6,
            q_s: 6,
            q_near: 10,
            grading_levels: 5,
            grading_ratio: 0.15,
        }
    }
}

impl QuadratureOptions {
    pub fn with_orders(q_t: usize, q_s: usize) -> Self {
        QuadratureOptions {
            q_t,
            q_s,
            ..Default::default()
        }
    }
}

/// Quadrature node on `Σ_T`: the boundary sample and its weight, which
/// already contains the line element.
pub type WeightedSample = (BoundarySample, f64);

/// A point where layer potentials or traces are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    pub point: KernelPoint,
    /// Reference angle of the nearest boundary point; singular integration
    /// is centred here.
    pub theta0: f64,
    /// Whether the point lies on `Σ_T`. Near-singular integrals for points
    /// off the boundary use graded rules.
    pub on_boundary: bool,
}

impl Target {
    pub fn on_boundary(sample: &BoundarySample) -> Self {
        Target {
            point: sample.into(),
            theta0: sample.theta,
            on_boundary: true,
        }
    }

    /// The point `x + offset · n` at the time of `sample`, carrying the
    /// normal data of `sample` for trace kernels.
    pub fn offset(sample: &BoundarySample, offset: f64) -> Self {
        let x = [
            sample.x[0] + offset * sample.n[0],
            sample.x[1] + offset * sample.n[1],
        ];
        Target {
            point: KernelPoint::with_trace(sample.t, x, sample.n, sample.vn),
            theta0: sample.theta,
            on_boundary: offset == 0.0,
        }
    }

    /// A free field point; the singular centre is located by search.
    pub fn field(geom: &TubeGeometry, t: f64, x: Point) -> Self {
        Target {
            point: KernelPoint::field(t, x),
            theta0: geom.nearest_angle(t, x).0,
            on_boundary: false,
        }
    }
}

/// `M × N` space-time mesh of `Σ_T` with cached samples.
#[derive(Clone, Debug)]
pub struct SpaceTimeMesh {
    geom: TubeGeometry,
    m: usize,
    n: usize,
    opts: QuadratureOptions,
    collocation: Vec<BoundarySample>,
    measures: Vec<f64>,
    far_nodes: Vec<Vec<WeightedSample>>,
    time_rule: GaussRule,
    space_rule: GaussRule,
    near_rule: GaussRule,
    /// Twice the near order, for points off the boundary where the
    /// near-singular integrands are steeper.
    off_rule: GaussRule,
    grading: Vec<(f64, f64)>,
}

impl SpaceTimeMesh {
    /// Builds an `M × N` mesh; needs `M, N ≥ 4` and orders `≥ 2`.
    pub fn build(geom: &TubeGeometry, m: usize, n: usize, opts: QuadratureOptions) -> Result<Self> {
        Self::build_unchecked_sizes(geom, m, n, opts, 4)
    }

    /// As [`build`](Self::build) but allows meshes down to `min_size` slabs,
    /// used for truncated causal solves.
    pub(crate) fn build_unchecked_sizes(
        geom: &TubeGeometry,
        m: usize,
        n: usize,
        opts: QuadratureOptions,
        min_size: usize,
    ) -> Result<Self> {
        if m < min_size || n < 4 {
            return Err(Error::Config(format!(
                "mesh needs M, N >= 4, got M = {m}, N = {n}"
            )));
        }
        if opts.q_t < 2 || opts.q_s < 2 || opts.q_near < 2 {
            return Err(Error::Config(format!(
                "quadrature orders must be >= 2, got q_t = {}, q_s = {}, q_near = {}",
                opts.q_t, opts.q_s, opts.q_near
            )));
        }
        if !(opts.grading_ratio > 0.0 && opts.grading_ratio < 1.0) {
            return Err(Error::Config("grading ratio must lie in (0, 1)".into()));
        }
        let horizon = geom.horizon();
        let slab = horizon / m as f64;
        let dtheta = TAU / n as f64;
        let time_rule = GaussRule::new(opts.q_t);
        let space_rule = GaussRule::new(opts.q_s);
        let near_rule = GaussRule::new(opts.q_near);
        let off_rule = GaussRule::new(2 * opts.q_near);

        let mut collocation = Vec::with_capacity(m * n);
        let mut measures = Vec::with_capacity(m * n);
        let mut far_nodes = Vec::with_capacity(m * n);
        for j in 0..m {
            let (ta, tb) = (j as f64 * slab, (j + 1) as f64 * slab);
            for p in 0..n {
                let (tha, thb) = (p as f64 * dtheta, (p + 1) as f64 * dtheta);
                let s = geom.boundary_sample(0.5 * (ta + tb), 0.5 * (tha + thb))?;
                collocation.push(s);
                let mut nodes = Vec::with_capacity(opts.q_t * opts.q_s);
                let mut measure = 0.0;
                for (tau, wt) in time_rule.on(ta, tb) {
                    for (th, wth) in space_rule.on(tha, thb) {
                        let q = geom.boundary_sample(tau, th)?;
                        let w = wt * wth * q.jac;
                        measure += w;
                        nodes.push((q, w));
                    }
                }
                measures.push(measure);
                far_nodes.push(nodes);
            }
        }
        let mut grading = Vec::with_capacity(opts.grading_levels + 1);
        let mut hi = 1.0;
        for _ in 0..opts.grading_levels {
            let lo = hi * opts.grading_ratio;
            grading.push((lo, hi));
            hi = lo;
        }
        grading.push((0.0, hi));
        Ok(SpaceTimeMesh {
            geom: geom.clone(),
            m,
            n,
            opts,
            collocation,
            measures,
            far_nodes,
            time_rule,
            space_rule,
            near_rule,
            off_rule,
            grading,
        })
    }

    pub fn geometry(&self) -> &TubeGeometry {
        &self.geom
    }

    /// Number of time slabs.
    pub fn slabs(&self) -> usize {
        self.m
    }

    /// Number of angular panels.
    pub fn panels(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn options(&self) -> QuadratureOptions {
        self.opts
    }

    pub fn slab_width(&self) -> f64 {
        self.geom.horizon() / self.m as f64
    }

    pub fn panel_width(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Slab-major index of `(slab, panel)`.
    #[inline]
    pub fn index(&self, slab: usize, panel: usize) -> usize {
        slab * self.n + panel
    }

    /// Collocation samples at patch midpoints, slab-major.
    pub fn collocation(&self) -> &[BoundarySample] {
        &self.collocation
    }

    /// Space-time measures `∫∫ jac dθ dτ` of the patches, slab-major.
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// Cached tensor Gauss nodes of one patch.
    pub fn patch_nodes(&self, slab: usize, panel: usize) -> &[WeightedSample] {
        &self.far_nodes[self.index(slab, panel)]
    }

    /// Samples a function of `(t, θ)` at the collocation points.
    pub fn sample_density(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.collocation.iter().map(|s| f(s.t, s.theta)).collect()
    }

    /// Samples a function of a boundary sample at the collocation points.
    pub fn sample_with(&self, f: impl Fn(&BoundarySample) -> f64) -> Vec<f64> {
        self.collocation.iter().map(f).collect()
    }

    /// `∫_slab ∫_panel kernel(target, y(τ, θ)) jac dθ dτ`.
    pub fn panel_integral(&self, kernel: TracedKernel, target: &Target, slab: usize, panel: usize) -> f64 {
        self.integrate_patch(|s, lag| kernel.eval_lagged(&target.point, s, lag), target, slab, panel)
    }

    /// Integrals of `kernel` over every patch, slab-major; zero for patches
    /// not in the past of the target.
    pub fn kernel_row(&self, kernel: TracedKernel, target: &Target) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        for slab in 0..self.m {
            if slab as f64 * self.slab_width() >= target.point.t {
                break;
            }
            for panel in 0..self.n {
                row[self.index(slab, panel)] = self.panel_integral(kernel, target, slab, panel);
            }
        }
        row
    }

    /// Integrates `f(source, t − τ) · jac` over one patch as seen from
    /// `target`. The lag passed to `f` is exact on substituted rules.
    pub fn integrate_patch(
        &self,
        f: impl Fn(&BoundarySample, f64) -> f64,
        target: &Target,
        slab: usize,
        panel: usize,
    ) -> f64 {
        self.integrate_patch_many(|s, lag| [f(s, lag)], target, slab, panel)[0]
    }

    /// As [`integrate_patch`](Self::integrate_patch) for several integrands
    /// sharing the same nodes.
    pub fn integrate_patch_many<const K: usize>(
        &self,
        f: impl Fn(&BoundarySample, f64) -> [f64; K],
        target: &Target,
        slab: usize,
        panel: usize,
    ) -> [f64; K] {
        let t = target.point.t;
        let width = self.slab_width();
        let ta = slab as f64 * width;
        if ta >= t {
            return [0.0; K];
        }
        let tb_full = (slab + 1) as f64 * width;
        let tb = tb_full.min(t);
        let gap = t - tb;

        let dtheta = self.panel_width();
        let tha = panel as f64 * dtheta;
        let thb = tha + dtheta;
        let centre = tha + 0.5 * dtheta;
        let theta0 = centre + wrap_angle(target.theta0 - centre);
        let angular_gap = (tha - theta0).max(theta0 - thb).max(0.0);
        let space_near = angular_gap <= 1.5 * dtheta * (1.0 + 1e-9);
        // a fraction of a slab width keeps roundoff in t away from the switch
        let time_near = gap < 0.75 * width;

        let mut acc = Acc([0.0; K]);
        if !time_near && tb == tb_full && (!space_near || gap >= 2.5 * width) {
            for (s, w) in &self.far_nodes[self.index(slab, panel)] {
                acc.add(f(s, t - s.t), *w);
            }
            return acc.0;
        }
        if !time_near {
            // early slab, near in angle: split the panel for the narrow kernel
            self.tensor_patch(&f, &mut acc, t, ta, tb, tha, thb, 4);
            return acc.0;
        }

        let s_lo = gap.sqrt();
        let s_hi = (t - ta).sqrt();
        if !space_near {
            self.substituted_patch(&f, &mut acc, t, s_lo, s_hi, tha, thb);
            return acc.0;
        }
        let thc = theta0.clamp(tha, thb);
        if thc - tha > 1e-14 * dtheta {
            self.duffy_rectangle(&f, &mut acc, t, (s_lo, s_hi), (thc, tha), target.on_boundary);
        }
        if thb - thc > 1e-14 * dtheta {
            self.duffy_rectangle(&f, &mut acc, t, (s_lo, s_hi), (thc, thb), target.on_boundary);
        }
        acc.0
    }

    #[allow(clippy::too_many_arguments)]
    fn tensor_patch<const K: usize>(
        &self,
        f: &impl Fn(&BoundarySample, f64) -> [f64; K],
        acc: &mut Acc<K>,
        t: f64,
        ta: f64,
        tb: f64,
        tha: f64,
        thb: f64,
        angle_pieces: usize,
    ) {
        let hth = (thb - tha) / angle_pieces as f64;
        for (tau, wt) in self.time_rule.on(ta, tb) {
            for ia in 0..angle_pieces {
                let a0 = tha + ia as f64 * hth;
                for (th, wth) in self.space_rule.on(a0, a0 + hth) {
                    let s = self.geom.sample_at(tau, th);
                    acc.add(f(&s, t - tau), s.jac * wt * wth);
                }
            }
        }
    }

    /// `τ = t − s²` in time, composite Gauss in `s`, plain Gauss in angle.
    #[allow(clippy::too_many_arguments)]
    fn substituted_patch<const K: usize>(
        &self,
        f: &impl Fn(&BoundarySample, f64) -> [f64; K],
        acc: &mut Acc<K>,
        t: f64,
        s_lo: f64,
        s_hi: f64,
        tha: f64,
        thb: f64,
    ) {
        const PIECES: usize = 3;
        let hs = (s_hi - s_lo) / PIECES as f64;
        for piece in 0..PIECES {
            let a = s_lo + piece as f64 * hs;
            for (s, ws) in self.time_rule.on(a, a + hs) {
                let tau = t - s * s;
                for (th, wth) in self.space_rule.on(tha, thb) {
                    let q = self.geom.sample_at(tau, th);
                    acc.add(f(&q, s * s), q.jac * 2.0 * s * ws * wth);
                }
            }
        }
    }

    /// Rectangle `[s_lo, s_hi] × [θc, θf]` (θf may lie below θc) split into
    /// two Duffy triangles from the corner `(s_lo, θc)`.
    fn duffy_rectangle<const K: usize>(
        &self,
        f: &impl Fn(&BoundarySample, f64) -> [f64; K],
        acc: &mut Acc<K>,
        t: f64,
        (s_lo, s_hi): (f64, f64),
        (thc, thf): (f64, f64),
        smooth: bool,
    ) {
        // on the boundary the Duffy integrand is bounded and smooth; grading
        // would only sample the corner where x − y suffers cancellation
        let (grading, rule): (&[(f64, f64)], _) = if smooth {
            (&[(0.0, 0.5), (0.5, 1.0)], &self.near_rule)
        } else {
            (&self.grading, &self.off_rule)
        };
        let span_s = s_hi - s_lo;
        let span_th = thf - thc;
        let area = span_s * span_th.abs();
        for &(u0, u1) in grading {
            for (u, wu) in rule.on(u0, u1) {
                for (v, wv) in rule.on(0.0, 1.0) {
                    let w = area * u * wu * wv;
                    // triangle along the time axis
                    let s = s_lo + span_s * u;
                    let th = thc + span_th * u * v;
                    let q = self.geom.sample_at(t - s * s, th);
                    acc.add(f(&q, s * s), q.jac * 2.0 * s * w);
                    // triangle along the angle axis
                    let s = s_lo + span_s * u * v;
                    let th = thc + span_th * u;
                    let q = self.geom.sample_at(t - s * s, th);
                    acc.add(f(&q, s * s), q.jac * 2.0 * s * w);
                }
            }
        }
    }
}

struct Acc<const K: usize>([f64; K]);

impl<const K: usize> Acc<K> {
    #[inline]
    fn add(&mut self, values: [f64; K], weight: f64) {
        for (a, v) in self.0.iter_mut().zip(values) {
            *a += v * weight;
        }
    }
}

/// Wraps an angle difference into `(−π, π]`.
#[inline]
pub fn wrap_angle(d: f64) -> f64 {
    let w = d.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Node of a volume rule on `Q_T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeNode {
    pub t: f64,
    pub x: Point,
    pub weight: f64,
}

/// Volume rule on `Q_T`, a matching surface rule on `Σ_T`, and a rule on
/// the final cross-section `Ω_T`.
#[derive(Clone, Debug)]
pub struct VolumeQuadrature {
    pub nodes: Vec<VolumeNode>,
    pub boundary_nodes: Vec<WeightedSample>,
    pub final_nodes: Vec<(Point, f64)>,
    pub resolution: usize,
}

impl VolumeQuadrature {
    /// Tensor Gauss grid on the reference cylinder `(0, T) × unit disk`
    /// (Gauss in time and radius, trapezoid with `2r` points in angle)
    /// mapped through κ with `det Dκ` weights.
    pub fn build(geom: &TubeGeometry, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::Config(format!(
                "volume quadrature resolution must be >= 8, got {resolution}"
            )));
        }
        let horizon = geom.horizon();
        let time = GaussRule::new(resolution);
        let radial = GaussRule::new(resolution);
        let n_ang = 2 * resolution;
        let dphi = TAU / n_ang as f64;

        let disk: Vec<(Point, f64)> = radial
            .on(0.0, 1.0)
            .flat_map(|(rho, wr)| {
                (0..n_ang).map(move |k| {
                    let phi = k as f64 * dphi;
                    ([rho * phi.cos(), rho * phi.sin()], wr * rho * dphi)
                })
            })
            .collect();

        let mut nodes = Vec::with_capacity(resolution * disk.len());
        let mut boundary_nodes = Vec::with_capacity(resolution * n_ang);
        for (t, wt) in time.on(0.0, horizon) {
            for &(xi, w) in &disk {
                let det = geom.jacobian_det(t, xi);
                nodes.push(VolumeNode {
                    t,
                    x: geom.map(t, xi),
                    weight: wt * w * det,
                });
            }
            for k in 0..n_ang {
                let s = geom.boundary_sample(t, k as f64 * dphi)?;
                let w = wt * dphi * s.jac;
                boundary_nodes.push((s, w));
            }
        }
        let final_nodes = disk
            .iter()
            .map(|&(xi, w)| (geom.map(horizon, xi), w * geom.jacobian_det(horizon, xi)))
            .collect();
        Ok(VolumeQuadrature {
            nodes,
            boundary_nodes,
            final_nodes,
            resolution,
        })
    }

    /// Total measure of `Q_T` under the rule.
    pub fn measure(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Family;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in [2, 3, 5, 8, 16, 32] {
            let rule = GaussRule::new(n);
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            for k in 0..(2 * n) {
                let approx: f64 = rule.on(0.0, 2.0).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = 2f64.powi(k as i32 + 1) / (k + 1) as f64;
                assert_relative_eq!(approx, exact, max_relative = 1e-12);
            }
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn stationary_mesh_examples() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&g, 8, 8, QuadratureOptions::default()).unwrap();
        assert_eq!(mesh.collocation().len(), 64);
        assert!(mesh.collocation().iter().all(|s| s.vn == 0.0));
        let total: f64 = mesh.measures().iter().sum();
        assert_relative_eq!(total, TAU, max_relative = 1e-10);
        // slab-major ordering
        let c = mesh.collocation();
        assert!(c[7].t < c[8].t);
        assert_eq!(c[0].t, c[7].t);
    }

    #[test]
    fn expanding_mesh_samples_follow_radius() {
        let g = TubeGeometry::expanding_circle(1.0, 0.4, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&g, 6, 5, QuadratureOptions::default()).unwrap();
        for s in mesh.collocation() {
            let r = (s.x[0].powi(2) + s.x[1].powi(2)).sqrt();
            assert_relative_eq!(r, 1.0 + 0.4 * s.t, max_relative = 1e-14);
        }
    }

    #[test]
    fn invalid_sizes_are_rejected() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        assert!(SpaceTimeMesh::build(&g, 3, 8, QuadratureOptions::default()).is_err());
        assert!(SpaceTimeMesh::build(&g, 8, 2, QuadratureOptions::default()).is_err());
        assert!(SpaceTimeMesh::build(&g, 8, 8, QuadratureOptions::with_orders(1, 4)).is_err());
    }

    #[test]
    fn future_patches_vanish() {
        let g = TubeGeometry::with_defaults(Family::RotatingEllipse, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&g, 6, 6, QuadratureOptions::default()).unwrap();
        let target = Target::on_boundary(&mesh.collocation()[mesh.index(2, 3)]);
        for k in [
            TracedKernel::Single,
            TracedKernel::Double,
            TracedKernel::AdjointDouble,
        ] {
            for p in 0..6 {
                assert_eq!(mesh.panel_integral(k, &target, 3, p), 0.0);
                assert_eq!(mesh.panel_integral(k, &target, 5, p), 0.0);
            }
        }
    }

    #[test]
    fn rotation_invariance_on_stationary_circle() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&g, 8, 8, QuadratureOptions::default()).unwrap();
        for kernel in [TracedKernel::Single, TracedKernel::Double] {
            let mut reference = std::collections::HashMap::new();
            for i in 0..8 {
                for p in 0..8 {
                    let target = Target::on_boundary(&mesh.collocation()[mesh.index(i, p)]);
                    for j in 0..=i {
                        for q in 0..8 {
                            let v = mesh.panel_integral(kernel, &target, j, q);
                            let key = (i - j, (q + 8 - p) % 8);
                            let r = *reference.entry(key).or_insert(v);
                            assert!((v - r).abs() <= 1e-12, "{kernel:?} {key:?}: {v} vs {r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_single_layer_entries_are_positive() {
        for family in Family::ALL {
            let g = TubeGeometry::with_defaults(family, 1.0).unwrap();
            let mesh = SpaceTimeMesh::build(&g, 6, 8, QuadratureOptions::default()).unwrap();
            for (i, s) in mesh.collocation().iter().enumerate() {
                let v = mesh.panel_integral(TracedKernel::Single, &Target::on_boundary(s), i / 8, i % 8);
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn self_patch_converges_under_order_doubling() {
        let g = TubeGeometry::with_defaults(Family::TranslatingCircle, 1.0).unwrap();
        let value = |q: usize| {
            let opts = QuadratureOptions {
                q_near: q,
                ..QuadratureOptions::with_orders(q, q)
            };
            let mesh = SpaceTimeMesh::build(&g, 8, 8, opts).unwrap();
            let s = mesh.collocation()[mesh.index(3, 2)];
            mesh.panel_integral(TracedKernel::Single, &Target::on_boundary(&s), 3, 2)
        };
        let (a, b) = (value(16), value(32));
        assert!(((a - b) / b).abs() <= 1e-4, "{a} vs {b}");
    }

    #[test]
    fn separated_patches_converge_under_order_doubling() {
        let g = TubeGeometry::with_defaults(Family::ExpandingCircle, 1.0).unwrap();
        let value = |q: usize| {
            let mesh = SpaceTimeMesh::build(&g, 8, 8, QuadratureOptions::with_orders(q, q)).unwrap();
            let s = mesh.collocation()[mesh.index(6, 0)];
            let t = Target::on_boundary(&s);
            [
                mesh.panel_integral(TracedKernel::Single, &t, 2, 4),
                mesh.panel_integral(TracedKernel::Double, &t, 1, 3),
                mesh.panel_integral(TracedKernel::AdjointDouble, &t, 3, 5),
            ]
        };
        let (a, b) = (value(8), value(16));
        for k in 0..3 {
            assert!(((a[k] - b[k]) / b[k]).abs() <= 1e-10, "{k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn volume_measures() {
        let g = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let vq = VolumeQuadrature::build(&g, 8).unwrap();
        assert_relative_eq!(vq.measure(), PI, max_relative = 1e-8);
        assert!(vq.nodes.iter().all(|n| n.weight > 0.0));

        let g = TubeGeometry::expanding_circle(1.0, 0.5, 1.0).unwrap();
        let vq = VolumeQuadrature::build(&g, 8).unwrap();
        assert_relative_eq!(vq.measure(), PI * 19.0 / 12.0, max_relative = 1e-8);

        let g = TubeGeometry::translating_circle(1.0, [0.8, -0.3], 1.0).unwrap();
        let vq = VolumeQuadrature::build(&g, 8).unwrap();
        assert_relative_eq!(vq.measure(), PI, max_relative = 1e-8);

        for family in Family::ALL {
            let g = TubeGeometry::with_defaults(family, 1.0).unwrap();
            let vq = VolumeQuadrature::build(&g, 16).unwrap();
            let time = GaussRule::new(40);
            let exact: f64 = time.on(0.0, 1.0).map(|(t, w)| w * g.area(t)).sum();
            assert_relative_eq!(vq.measure(), exact, max_relative = 1e-6);
            let final_area: f64 = vq.final_nodes.iter().map(|n| n.1).sum();
            assert_relative_eq!(final_area, g.area(1.0), max_relative = 1e-6);
        }
        assert!(VolumeQuadrature::build(&g, 4).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0);
        assert_relative_eq!(wrap_angle(-3.0 * PI / 2.0), PI / 2.0);
        assert_relative_eq!(wrap_angle(0.25), 0.25);
    }
}
