//! Independent checks of the discrete operators: manufactured solutions,
//! jump relations, Calderón identities, positivity of the quadratic forms,
//! and the tube Green formula.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dot, sub, BoundarySample, Point, PointClass, TubeGeometry};
use crate::kernels::heat_kernel;
use crate::operators::{CalderonBlocks, CausalMatrix};
use crate::potentials::{one_sided_limit, LayerDensities};
use crate::quadrature::{SpaceTimeMesh, VolumeQuadrature};

/// A smooth function of `(t, x)` with the derivatives the checks need.
pub trait SmoothField {
    fn value(&self, t: f64, x: Point) -> f64;
    fn gradient(&self, t: f64, x: Point) -> Point;
    fn time_derivative(&self, t: f64, x: Point) -> f64;
    fn laplacian(&self, t: f64, x: Point) -> f64;

    /// `γ₁⁻` at a boundary sample: `∂u/∂n + ½⟨V, n⟩u`.
    fn neumann_minus(&self, s: &BoundarySample) -> f64 {
        dot(self.gradient(s.t, s.x), s.n) + 0.5 * s.vn * self.value(s.t, s.x)
    }
}

/// `u(t, x) = G(t, x − x*)`, the heat kernel released at `t = 0` from a
/// point outside the tube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub source: Point,
}

impl ManufacturedSolution {
    /// Minimum distance between the source and `Ω_t`, in units of `R₀`.
    pub const MARGIN: f64 = 0.2;

    /// Checks that `source` keeps the margin from every cross-section.
    pub fn new(geom: &TubeGeometry, source: Point) -> Result<Self> {
        const TIMES: usize = 200;
        let margin = Self::MARGIN * geom.r0();
        for k in 0..=TIMES {
            let t = geom.horizon() * k as f64 / TIMES as f64;
            let class = geom.classify_point(t, source)?;
            let (_, distance) = geom.nearest_angle(t, source);
            if class != PointClass::Outside || distance < margin {
                return Err(Error::Config(format!(
                    "manufactured source ({}, {}) is within {margin} of the domain at t = {t}",
                    source[0], source[1]
                )));
            }
        }
        Ok(ManufacturedSolution { source })
    }

    /// Exact `(γ₀u, γ₁⁻u)` at the collocation points.
    pub fn cauchy_data(&self, mesh: &SpaceTimeMesh) -> (Vec<f64>, Vec<f64>) {
        (
            mesh.sample_with(|s| self.value(s.t, s.x)),
            mesh.sample_with(|s| self.neumann_minus(s)),
        )
    }
}

impl SmoothField for ManufacturedSolution {
    fn value(&self, t: f64, x: Point) -> f64 {
        let d = sub(x, self.source);
        heat_kernel(t, dot(d, d), 2)
    }

    fn gradient(&self, t: f64, x: Point) -> Point {
        if t <= 0.0 {
            return [0.0, 0.0];
        }
        let d = sub(x, self.source);
        let g = heat_kernel(t, dot(d, d), 2) / (2.0 * t);
        [-d[0] * g, -d[1] * g]
    }

    fn time_derivative(&self, t: f64, x: Point) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let d = sub(x, self.source);
        let r2 = dot(d, d);
        heat_kernel(t, r2, 2) * (r2 / (4.0 * t * t) - 1.0 / t)
    }

    fn laplacian(&self, t: f64, x: Point) -> f64 {
        self.time_derivative(t, x)
    }
}

/// Smooth random density: `(t/T)² Σ c_kl cos(kπt/T + a_kl) cos(lθ + b_kl)`
/// with decaying coefficients.
pub fn random_smooth_density(mesh: &SpaceTimeMesh, rng: &mut impl Rng) -> Vec<f64> {
    const K: usize = 3;
    const L: usize = 4;
    let horizon = mesh.geometry().horizon();
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..K)
        .flat_map(|k| (0..L).map(move |l| (k, l)))
        .map(|(k, l)| {
            let c = rng.gen_range(-1.0..1.0) / (1.0 + (k + l) as f64);
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let b = rng.gen_range(0.0..std::f64::consts::TAU);
            (c, k as f64, a, l as f64, b)
        })
        .collect();
    mesh.sample_density(|t, th| {
        let s = t / horizon;
        s * s
            * terms
                .iter()
                .map(|&(c, k, a, l, b)| c * (k * std::f64::consts::PI * s + a).cos() * (l * th + b).cos())
                .sum::<f64>()
    })
}

/// Interior probe points `(t, x)` spread over `t ∈ (0.3T, T)` on a golden
/// angle spiral in the reference disk of radius 0.4.
pub fn interior_probes(geom: &TubeGeometry, count: usize) -> Vec<(f64, Point)> {
    let horizon = geom.horizon();
    (0..count)
        .map(|k| {
            let t = horizon * (0.3 + 0.7 * (k as f64 + 0.5) / count as f64);
            let r = 0.5 * (k % 5) as f64 / 5.0;
            let a = 2.4 * k as f64;
            (t, geom.map(t, [r * a.cos(), r * a.sin()]))
        })
        .collect()
}

/// `Σ_i m_i a_i b_i` with the patch measures `m_i`.
pub fn inner(mesh: &SpaceTimeMesh, a: &[f64], b: &[f64]) -> f64 {
    mesh.measures()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(m, (x, y))| m * x * y)
        .sum()
}

/// Discrete `L²(Σ_T)` norm.
pub fn l2_norm(mesh: &SpaceTimeMesh, a: &[f64]) -> f64 {
    inner(mesh, a, a).sqrt()
}

/// `max |a − b| / max |b|`, or the plain maximum when `b` vanishes.
pub fn relative_max_error(a: &[f64], b: &[f64]) -> f64 {
    let err = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Potential {
    Single,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Dirichlet,
    NeumannMinus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpPoint {
    /// Collocation index.
    pub index: usize,
    pub interior: f64,
    pub exterior: f64,
    /// `exterior − interior`.
    pub jump: f64,
    pub predicted: f64,
    /// `|jump − predicted| / max |density|`.
    pub deviation: f64,
    /// The extrapolation on one of the sides did not settle.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpReport {
    pub potential: Potential,
    pub trace: TraceKind,
    pub points: Vec<JumpPoint>,
    pub max_deviation: f64,
}

impl JumpReport {
    pub fn flagged(&self) -> Vec<usize> {
        self.points.iter().filter(|p| p.flagged).map(|p| p.index).collect()
    }
}

/// Collocation indices spread over the mesh, avoiding the first slab where
/// every density used here vanishes to second order.
pub fn probe_indices(mesh: &SpaceTimeMesh, count: usize) -> Vec<usize> {
    let (m, n) = (mesh.slabs(), mesh.panels());
    (0..count)
        .map(|k| {
            let slab = 1 + (k * (m - 1)) / count.max(1);
            let panel = (k * 7 + k / 3) % n;
            mesh.index(slab.min(m - 1), panel)
        })
        .collect()
}

/// Measures `[γ Ṽψ]` or `[γ K̃w]` at `indices` by extrapolating from both
/// sides of the boundary along the normal.
pub fn jump_probe(
    mesh: &SpaceTimeMesh,
    density: &[f64],
    potential: Potential,
    trace: TraceKind,
    offsets: &[f64],
    indices: &[usize],
) -> Result<JumpReport> {
    if offsets.len() < 2 || offsets.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(Error::Config("jump offsets must be positive and decreasing".into()));
    }
    let (layers, sign) = match potential {
        Potential::Single => (LayerDensities::single(density), 1.0),
        Potential::Double => (LayerDensities::double(density), -1.0),
    };
    let neumann = trace == TraceKind::NeumannMinus;
    let scale = density.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 5e-2 * scale;
    let mut points = Vec::with_capacity(indices.len());
    for &index in indices {
        let sample = &mesh.collocation()[index];
        let (inside, ci) = one_sided_limit(mesh, layers, sample, -1.0, offsets, neumann)?;
        let (outside, co) = one_sided_limit(mesh, layers, sample, 1.0, offsets, neumann)?;
        let (interior, exterior) = (sign * inside, sign * outside);
        let jump = exterior - interior;
        let predicted = match (potential, trace) {
            (Potential::Single, TraceKind::Dirichlet) | (Potential::Double, TraceKind::NeumannMinus) => 0.0,
            (Potential::Double, TraceKind::Dirichlet) => density[index],
            (Potential::Single, TraceKind::NeumannMinus) => -density[index],
        };
        points.push(JumpPoint {
            index,
            interior,
            exterior,
            jump,
            predicted,
            deviation: (jump - predicted).abs() / scale,
            flagged: !(ci <= tol && co <= tol),
        });
    }
    let max_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    Ok(JumpReport {
        potential,
        trace,
        points,
        max_deviation,
    })
}

fn pair_norm(mesh: &SpaceTimeMesh, w: &[f64], psi: &[f64]) -> f64 {
    (inner(mesh, w, w) + inner(mesh, psi, psi)).sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        // only an exactly zero pair has a zero norm, and its image is zero
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `‖Ĉ(w, ψ) − (w, ψ)‖ / ‖(w, ψ)‖` in the discrete `L²(Σ_T)` norm.
pub fn projector_residual(blocks: &CalderonBlocks, w: &[f64], psi: &[f64]) -> Result<f64> {
    let (a, b) = blocks.apply_projector(w, psi)?;
    let ra: Vec<f64> = a.iter().zip(w).map(|(x, y)| x - y).collect();
    let rb: Vec<f64> = b.iter().zip(psi).map(|(x, y)| x - y).collect();
    let mesh = blocks.mesh();
    Ok(ratio(pair_norm(mesh, &ra, &rb), pair_norm(mesh, w, psi)))
}

/// `‖Â²q − ¼q‖ / ‖q‖` for `q = (w, ψ)`.
pub fn involution_residual(blocks: &CalderonBlocks, w: &[f64], psi: &[f64]) -> Result<f64> {
    let (a, b) = blocks.apply_a(w, psi)?;
    let (aa, ab) = blocks.apply_a(&a, &b)?;
    let ra: Vec<f64> = aa.iter().zip(w).map(|(x, y)| x - 0.25 * y).collect();
    let rb: Vec<f64> = ab.iter().zip(psi).map(|(x, y)| x - 0.25 * y).collect();
    let mesh = blocks.mesh();
    Ok(ratio(pair_norm(mesh, &ra, &rb), pair_norm(mesh, w, psi)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalderonResiduals {
    pub projector: f64,
    pub involution: f64,
}

/// Projector residual of the pair `(w, ψ)` and involution residual of a
/// random smooth pair drawn from `seed`.
pub fn calderon_residuals(blocks: &CalderonBlocks, w: &[f64], psi: &[f64], seed: u64) -> Result<CalderonResiduals> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qw = random_smooth_density(blocks.mesh(), &mut rng);
    let qpsi = random_smooth_density(blocks.mesh(), &mut rng);
    Ok(CalderonResiduals {
        projector: projector_residual(blocks, w, psi)?,
        involution: involution_residual(blocks, &qw, &qpsi)?,
    })
}

/// `sym(W^{1/2} A W^{-1/2})`, whose quadratic form is that of `A` in the
/// measure-weighted inner product.
pub fn weighted_symmetric_part(mesh: &SpaceTimeMesh, a: &CausalMatrix) -> DMatrix<f64> {
    let sq: Vec<f64> = mesh.measures().iter().map(|m| m.sqrt()).collect();
    let mut d = a.to_dense();
    for ((r, c), v) in d.iter_mut().enumerate().map(|(k, v)| ((k % a.dim(), k / a.dim()), v)) {
        *v *= sq[r] / sq[c];
    }
    (&d + d.transpose()) * 0.5
}

pub fn min_eigenvalue(sym: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of the weighted symmetric part of `D̂` on the
/// complement of the densities that are constant in space on every slab.
pub fn min_eigenvalue_off_constants(mesh: &SpaceTimeMesh, a: &CausalMatrix) -> f64 {
    let (m, n) = (mesh.slabs(), mesh.panels());
    let sym = weighted_symmetric_part(mesh, a);
    // orthonormal basis (Euclidean, after the W^{1/2} scaling) of the
    // complement: per slab, columns orthogonal to the scaled constant
    let sq: Vec<f64> = mesh.measures().iter().map(|v| v.sqrt()).collect();
    let mut basis = DMatrix::zeros(m * n, m * (n - 1));
    for i in 0..m {
        let c = nalgebra::DVector::from_iterator(n, (0..n).map(|p| sq[i * n + p]));
        let c = c.normalize();
        // Householder reflector mapping e_0 to c spans the complement with
        // its remaining columns
        let mut v = -c.clone();
        v[0] += 1.0;
        let h = if v.norm() < 1e-14 {
            DMatrix::identity(n, n)
        } else {
            let v = v.normalize();
            DMatrix::identity(n, n) - &v * v.transpose() * 2.0
        };
        for k in 1..n {
            for p in 0..n {
                basis[(i * n + p, i * (n - 1) + k - 1)] = h[(p, k)];
            }
        }
    }
    min_eigenvalue(basis.transpose() * sym * basis)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityReport {
    pub min_eig_v: f64,
    pub min_eig_d: f64,
    pub min_eig_d_off_constants: f64,
    /// `⟨(ψ, w), Â(ψ, w)⟩ / ‖(ψ, w)‖²` for each random pair.
    pub pair_forms: Vec<f64>,
}

impl CoercivityReport {
    pub fn positive_pairs(&self) -> usize {
        self.pair_forms.iter().filter(|&&v| v > 0.0).count()
    }
}

/// `⟨ψ, V̂ψ − K̂w⟩ + ⟨K̂′ψ + D̂w, w⟩` in the measure-weighted pairing.
pub fn pair_form(blocks: &CalderonBlocks, w: &[f64], psi: &[f64]) -> Result<f64> {
    let (a, b) = blocks.apply_a(w, psi)?;
    let mesh = blocks.mesh();
    Ok(inner(mesh, psi, &a) + inner(mesh, &b, w))
}

pub fn coercivity_report(blocks: &CalderonBlocks, pairs: usize, seed: u64) -> Result<CoercivityReport> {
    let mesh = blocks.mesh();
    let d = blocks.d()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair_forms = (0..pairs)
        .map(|_| {
            let w = random_smooth_density(mesh, &mut rng);
            let psi = random_smooth_density(mesh, &mut rng);
            Ok(pair_form(blocks, &w, &psi)? / pair_norm(mesh, &w, &psi).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CoercivityReport {
        min_eig_v: min_eigenvalue(weighted_symmetric_part(mesh, &blocks.v)),
        min_eig_d: min_eigenvalue(weighted_symmetric_part(mesh, d)),
        min_eig_d_off_constants: min_eigenvalue_off_constants(mesh, d),
        pair_forms,
    })
}

/// `d(u, v) = ∫∫ ∂_t u · v dx dt + ½ ∫∫ ⟨V, n⟩ u v dσ dt`.
pub fn bilinear_d(u: &impl SmoothField, v: &impl SmoothField, vq: &VolumeQuadrature) -> f64 {
    let volume: f64 = vq
        .nodes
        .iter()
        .map(|q| u.time_derivative(q.t, q.x) * v.value(q.t, q.x) * q.weight)
        .sum();
    let surface: f64 = vq
        .boundary_nodes
        .iter()
        .map(|(s, w)| s.vn * u.value(s.t, s.x) * v.value(s.t, s.x) * w)
        .sum();
    volume + 0.5 * surface
}

/// The four terms of Green's first formula on the tube,
/// `∫∫⟨∇u, ∇v⟩ + d(u, v) − ∫∫(∂_t − Δ)u · v − ⟨γ₁⁻u, γ₀v⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenTerms {
    pub gradient: f64,
    pub bilinear: f64,
    pub source: f64,
    pub boundary: f64,
}

impl GreenTerms {
    pub fn residual(&self) -> f64 {
        self.gradient + self.bilinear - self.source - self.boundary
    }

    /// Residual relative to the largest term.
    pub fn relative_residual(&self) -> f64 {
        let scale = [self.gradient, self.bilinear, self.source, self.boundary]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        ratio(self.residual().abs(), scale)
    }
}

pub fn green_terms(u: &impl SmoothField, v: &impl SmoothField, vq: &VolumeQuadrature) -> GreenTerms {
    let mut gradient = 0.0;
    let mut source = 0.0;
    for q in &vq.nodes {
        let (gu, gv) = (u.gradient(q.t, q.x), v.gradient(q.t, q.x));
        gradient += dot(gu, gv) * q.weight;
        source += (u.time_derivative(q.t, q.x) - u.laplacian(q.t, q.x)) * v.value(q.t, q.x) * q.weight;
    }
    let boundary = vq
        .boundary_nodes
        .iter()
        .map(|(s, w)| u.neumann_minus(s) * v.value(s.t, s.x) * w)
        .sum();
    GreenTerms {
        gradient,
        bilinear: bilinear_d(u, v, vq),
        source,
        boundary,
    }
}

/// Relative residual of Green's first formula.
pub fn greens_first_residual(u: &impl SmoothField, v: &impl SmoothField, vq: &VolumeQuadrature) -> f64 {
    green_terms(u, v, vq).relative_residual()
}

/// `b(t) p(x)`: a random polynomial profile in time vanishing to second
/// order at `t = 0` and `t = T`, times a quadratic polynomial in space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpField {
    pub horizon: f64,
    /// `b(t) = s²(1 − s)²(a0 + a1 s + a2 s²)` with `s = t/T`.
    pub time: [f64; 3],
    /// `c0 + c1 x + c2 y + c3 x² + c4 xy + c5 y²`
    pub coefficients: [f64; 6],
}

impl BumpField {
    pub fn random(horizon: f64, rng: &mut impl Rng) -> Self {
        BumpField {
            horizon,
            time: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            coefficients: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        }
    }

    fn bump(&self, t: f64) -> (f64, f64) {
        let s = t / self.horizon;
        let [a0, a1, a2] = self.time;
        let p = s * s * (1.0 - s) * (1.0 - s);
        let dp = 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        let q = a0 + a1 * s + a2 * s * s;
        let dq = a1 + 2.0 * a2 * s;
        (p * q, (dp * q + p * dq) / self.horizon)
    }

    fn poly(&self, x: Point) -> (f64, Point, f64) {
        let c = &self.coefficients;
        let value = c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
        let grad = [c[1] + 2.0 * c[3] * x[0] + c[4] * x[1], c[2] + c[4] * x[0] + 2.0 * c[5] * x[1]];
        (value, grad, 2.0 * (c[3] + c[5]))
    }
}

impl SmoothField for BumpField {
    fn value(&self, t: f64, x: Point) -> f64 {
        self.bump(t).0 * self.poly(x).0
    }

    fn gradient(&self, t: f64, x: Point) -> Point {
        let b = self.bump(t).0;
        let g = self.poly(x).1;
        [b * g[0], b * g[1]]
    }

    fn time_derivative(&self, t: f64, x: Point) -> f64 {
        self.bump(t).1 * self.poly(x).0
    }

    fn laplacian(&self, t: f64, x: Point) -> f64 {
        self.bump(t).0 * self.poly(x).2
    }
}

/// `cos(a·x) e^{−|a|² t}`-type smooth field, caloric for every `t`, times a
/// factor of the form `(T − t)²` so that it vanishes at the final time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndVanishingField {
    pub horizon: f64,
    pub wave: Point,
}

impl SmoothField for EndVanishingField {
    fn value(&self, t: f64, x: Point) -> f64 {
        let e = self.horizon - t;
        e * e * dot(self.wave, x).cos()
    }

    fn gradient(&self, t: f64, x: Point) -> Point {
        let e = self.horizon - t;
        let s = -e * e * dot(self.wave, x).sin();
        [s * self.wave[0], s * self.wave[1]]
    }

    fn time_derivative(&self, t: f64, x: Point) -> f64 {
        -2.0 * (self.horizon - t) * dot(self.wave, x).cos()
    }

    fn laplacian(&self, t: f64, x: Point) -> f64 {
        -dot(self.wave, self.wave) * self.value(t, x)
    }
}
