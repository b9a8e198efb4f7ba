//! Discrete boundary integral operators.
//!
//! Every operator is stored as a [`CausalMatrix`]: an `M × M` grid of
//! `N × N` blocks in which only the blocks with source slab `j ≤ i` can be
//! nonzero. Entry `(i·N + p, j·N + q)` is the integral of the kernel seen
//! from collocation point `(i, p)` over source patch `(j, q)`, so columns
//! carry the patch measure.
//!
//! The one-sided `±½` terms are never part of these matrices.

use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::TracedKernel;
use crate::quadrature::{SpaceTimeMesh, Target};

const MAGIC: &[u8; 4] = b"THBM";
const DUMP_VERSION: u32 = 1;

/// Block lower-triangular matrix in slab-major ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalMatrix {
    m: usize,
    n: usize,
    /// Blocks `(i, j)`, `j ≤ i`, at `i(i+1)/2 + j`.
    blocks: Vec<DMatrix<f64>>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

fn block_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (0..=i).map(move |j| (i, j))).collect()
}

impl CausalMatrix {
    pub fn zeros(m: usize, n: usize) -> Self {
        CausalMatrix {
            m,
            n,
            blocks: vec![DMatrix::zeros(n, n); m * (m + 1) / 2],
        }
    }

    pub fn identity(m: usize, n: usize) -> Self {
        let mut a = Self::zeros(m, n);
        a.add_identity(1.0);
        a
    }

    /// Builds every causal block with `f(i, j)`, in parallel.
    pub fn from_blocks(m: usize, n: usize, f: impl Fn(usize, usize) -> DMatrix<f64> + Sync) -> Self {
        let blocks: Vec<DMatrix<f64>> = block_pairs(m)
            .into_par_iter()
            .map(|(i, j)| {
                let b = f(i, j);
                assert_eq!(b.shape(), (n, n), "block ({i}, {j}) has the wrong shape");
                b
            })
            .collect();
        CausalMatrix { m, n, blocks }
    }

    /// Keeps the causal part of a dense `MN × MN` matrix.
    pub fn from_dense(m: usize, n: usize, dense: &DMatrix<f64>) -> Result<Self> {
        if dense.shape() != (m * n, m * n) {
            return Err(Error::Dimension {
                expected: m * n,
                got: dense.nrows(),
            });
        }
        Ok(Self::from_blocks(m, n, |i, j| {
            dense.view((i * n, j * n), (n, n)).into_owned()
        }))
    }

    /// Number of time slabs.
    pub fn slabs(&self) -> usize {
        self.m
    }

    /// Block size.
    pub fn panels(&self) -> usize {
        self.n
    }

    /// Total dimension `M·N`.
    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    /// Block `(i, j)`; `None` above the block diagonal.
    pub fn block(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        (j <= i && i < self.m).then(|| &self.blocks[tri(i, j)])
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> Option<&mut DMatrix<f64>> {
        (j <= i && i < self.m).then(|| &mut self.blocks[tri(i, j)])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (i, p) = (row / self.n, row % self.n);
        let (j, q) = (col / self.n, col % self.n);
        self.block(i, j).map_or(0.0, |b| b[(p, q)])
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    fn check_shape(&self, other: &CausalMatrix) -> Result<()> {
        if (self.m, self.n) != (other.m, other.n) {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let n = self.n;
        let mut y = vec![0.0; self.dim()];
        for i in 0..self.m {
            let mut yi = DVector::zeros(n);
            for j in 0..=i {
                let xj = DVector::from_column_slice(&x[j * n..(j + 1) * n]);
                yi.gemv(1.0, &self.blocks[tri(i, j)], &xj, 1.0);
            }
            y[i * n..(i + 1) * n].copy_from_slice(yi.as_slice());
        }
        Ok(y)
    }

    /// `Aᵀ x`, which is block upper-triangular.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let n = self.n;
        let mut y = vec![0.0; self.dim()];
        for j in 0..self.m {
            let mut yj = DVector::zeros(n);
            for i in j..self.m {
                let xi = DVector::from_column_slice(&x[i * n..(i + 1) * n]);
                yj.gemv_tr(1.0, &self.blocks[tri(i, j)], &xi, 1.0);
            }
            y[j * n..(j + 1) * n].copy_from_slice(yj.as_slice());
        }
        Ok(y)
    }

    /// `self += alpha · Id`.
    pub fn add_identity(&mut self, alpha: f64) {
        for i in 0..self.m {
            let b = &mut self.blocks[tri(i, i)];
            for p in 0..self.n {
                b[(p, p)] += alpha;
            }
        }
    }

    /// `alpha · Id + beta · self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let mut a = self.scaled(beta);
        a.add_identity(alpha);
        a
    }

    pub fn scaled(&self, beta: f64) -> Self {
        CausalMatrix {
            m: self.m,
            n: self.n,
            blocks: self.blocks.iter().map(|b| b * beta).collect(),
        }
    }

    /// `self + beta · other`.
    pub fn add_scaled(&self, beta: f64, other: &CausalMatrix) -> Result<Self> {
        self.check_shape(other)?;
        Ok(CausalMatrix {
            m: self.m,
            n: self.n,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b * beta)
                .collect(),
        })
    }

    /// Block product; each block sums its terms in a fixed order.
    pub fn mul(&self, other: &CausalMatrix) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self::from_blocks(self.m, self.n, |i, j| {
            let mut c = DMatrix::zeros(self.n, self.n);
            for k in j..=i {
                c.gemm(1.0, &self.blocks[tri(i, k)], &other.blocks[tri(k, j)], 1.0);
            }
            c
        }))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.m {
            for j in 0..=i {
                d.view_mut((i * n, j * n), (n, n))
                    .copy_from(&self.blocks[tri(i, j)]);
            }
        }
        d
    }

    /// Leading `slabs × slabs` block principal submatrix.
    pub fn truncated(&self, slabs: usize) -> Self {
        let slabs = slabs.min(self.m);
        CausalMatrix {
            m: slabs,
            n: self.n,
            blocks: self.blocks[..slabs * (slabs + 1) / 2].to_vec(),
        }
    }

    /// LU factors of the diagonal blocks.
    pub fn factorize(&self) -> Result<CausalFactor<'_>> {
        let lus = (0..self.m)
            .map(|i| {
                let b = &self.blocks[tri(i, i)];
                let scale = b.amax();
                let lu = b.clone().lu();
                let u = lu.u();
                let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
                if !(scale > 0.0) || !(min_pivot > 1e-14 * scale) {
                    return Err(Error::SingularBlock { slab: i });
                }
                Ok(lu)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CausalFactor { matrix: self, lus })
    }

    /// Writes the binary dump: `"THBM"`, version, `M`, `N` as little-endian
    /// `u32`, then blocks `(0,0), (1,0), (1,1), …` each row-major as
    /// little-endian `f64`.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [DUMP_VERSION, self.m as u32, self.n as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for b in &self.blocks {
            for p in 0..self.n {
                for q in 0..self.n {
                    w.write_all(&b[(p, q)].to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config("not a causal matrix dump".into()));
        }
        let mut word = [0u8; 4];
        let mut next = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = next(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Config(format!("unsupported dump version {version}")));
        }
        let m = next(&mut r)? as usize;
        let n = next(&mut r)? as usize;
        let mut a = Self::zeros(m, n);
        let mut buf = [0u8; 8];
        for b in &mut a.blocks {
            for p in 0..n {
                for q in 0..n {
                    r.read_exact(&mut buf)?;
                    b[(p, q)] = f64::from_le_bytes(buf);
                }
            }
        }
        Ok(a)
    }
}

/// A causal matrix with factorised diagonal blocks, ready for forward
/// substitution.
pub struct CausalFactor<'a> {
    matrix: &'a CausalMatrix,
    lus: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl CausalFactor<'_> {
    /// Solves `A x = b` slab by slab.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let a = self.matrix;
        a.check_len(rhs.len())?;
        let n = a.n;
        let mut x = vec![0.0; a.dim()];
        for i in 0..a.m {
            let mut r = DVector::from_column_slice(&rhs[i * n..(i + 1) * n]);
            for j in 0..i {
                let xj = DVector::from_column_slice(&x[j * n..(j + 1) * n]);
                r.gemv(-1.0, &a.blocks[tri(i, j)], &xj, 1.0);
            }
            let xi = self.lus[i]
                .solve(&r)
                .ok_or(Error::SingularBlock { slab: i })?;
            x[i * n..(i + 1) * n].copy_from_slice(xi.as_slice());
        }
        Ok(x)
    }

    /// Solves `A X = B` for a causal right-hand side; columns of block
    /// column `j` are independent and solved in parallel.
    pub fn solve_matrix(&self, rhs: &CausalMatrix) -> Result<CausalMatrix> {
        let a = self.matrix;
        a.check_shape(rhs)?;
        let (m, n) = (a.m, a.n);
        let columns: Vec<Vec<DMatrix<f64>>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut col: Vec<DMatrix<f64>> = Vec::with_capacity(m - j);
                for i in j..m {
                    let mut r = rhs.blocks[tri(i, j)].clone();
                    for k in j..i {
                        r.gemm(-1.0, &a.blocks[tri(i, k)], &col[k - j], 1.0);
                    }
                    if !self.lus[i].solve_mut(&mut r) {
                        return Err(Error::SingularBlock { slab: i });
                    }
                    col.push(r);
                }
                Ok(col)
            })
            .collect::<Result<_>>()?;
        let mut x = CausalMatrix::zeros(m, n);
        for (j, col) in columns.into_iter().enumerate() {
            for (k, b) in col.into_iter().enumerate() {
                x.blocks[tri(j + k, j)] = b;
            }
        }
        Ok(x)
    }
}

/// Assembles the collocation matrix of `kernel` on the boundary.
pub fn assemble(mesh: &SpaceTimeMesh, kernel: TracedKernel) -> CausalMatrix {
    let [a] = assemble_many(mesh, [kernel]);
    a
}

/// Assembles several boundary kernels in one sweep over the quadrature
/// nodes.
pub fn assemble_many<const K: usize>(mesh: &SpaceTimeMesh, kernels: [TracedKernel; K]) -> [CausalMatrix; K] {
    let (m, n) = (mesh.slabs(), mesh.panels());
    let colloc = mesh.collocation();
    let blocks: Vec<[DMatrix<f64>; K]> = block_pairs(m)
        .into_par_iter()
        .map(|(i, j)| {
            let mut out: [DMatrix<f64>; K] = std::array::from_fn(|_| DMatrix::zeros(n, n));
            for p in 0..n {
                let target = Target::on_boundary(&colloc[mesh.index(i, p)]);
                for q in 0..n {
                    let v = mesh.integrate_patch_many(
                        |s, lag| kernels.map(|k| k.eval_lagged(&target.point, s, lag)),
                        &target,
                        j,
                        q,
                    );
                    for (o, v) in out.iter_mut().zip(v) {
                        o[(p, q)] = v;
                    }
                }
            }
            out
        })
        .collect();
    let mut result: [Vec<DMatrix<f64>>; K] = std::array::from_fn(|_| Vec::with_capacity(blocks.len()));
    for b in blocks {
        for (r, b) in result.iter_mut().zip(b) {
            r.push(b);
        }
    }
    result.map(|blocks| CausalMatrix { m, n, blocks })
}

/// `V̂`.
pub fn assemble_single_layer(mesh: &SpaceTimeMesh) -> CausalMatrix {
    assemble(mesh, TracedKernel::Single)
}

/// `K̂`, without the `±½` term.
pub fn assemble_double_layer(mesh: &SpaceTimeMesh) -> CausalMatrix {
    assemble(mesh, TracedKernel::Double)
}

/// `K̂′`, without the `±½` term.
pub fn assemble_adjoint_double_layer(mesh: &SpaceTimeMesh) -> CausalMatrix {
    assemble(mesh, TracedKernel::AdjointDouble)
}

/// Offsets and acceptance tolerance of the interior limit used for the
/// hypersingular operator.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitOptions {
    /// Decreasing positive distances from the boundary.
    pub offsets: Vec<f64>,
    /// Largest accepted change between the last two extrapolants, relative
    /// to the scale of the quantity.
    pub tolerance: f64,
}

impl LimitOptions {
    /// Offsets `R₀·h·{1/4, 1/8, 1/16}` with `h = 2π/N`.
    pub fn for_mesh(mesh: &SpaceTimeMesh) -> Self {
        let h = mesh.geometry().r0() * mesh.panel_width();
        LimitOptions {
            offsets: vec![h / 4.0, h / 8.0, h / 16.0],
            tolerance: 5e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() < 3 {
            return Err(Error::Config("limits need at least three offsets".into()));
        }
        if self.offsets.iter().any(|&e| !(e > 0.0))
            || self.offsets.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Config("offsets must be positive and decreasing".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("limit tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Polynomial extrapolation to `ε = 0` through `(offsets[k], values[k])`
/// (Neville). Returns the limit and the change between the last two
/// diagonal entries of the tableau.
pub fn extrapolate_to_zero(offsets: &[f64], values: &[f64]) -> (f64, f64) {
    assert_eq!(offsets.len(), values.len());
    assert!(!values.is_empty());
    let mut p = values.to_vec();
    let mut previous = p[p.len() - 1];
    let mut change = f64::INFINITY;
    for level in 1..p.len() {
        for k in (level..p.len()).rev() {
            let (ea, eb) = (offsets[k - level], offsets[k]);
            p[k] = (ea * p[k] - eb * p[k - 1]) / (ea - eb);
        }
        let last = p[p.len() - 1];
        change = (last - previous).abs();
        previous = last;
    }
    (p[p.len() - 1], change)
}

/// Hypersingular matrix built from interior limits, together with the
/// entries whose extrapolation did not settle.
#[derive(Clone, Debug)]
pub struct DirectHypersingular {
    pub matrix: CausalMatrix,
    /// `(row, column)` of flagged entries.
    pub flagged: Vec<(usize, usize)>,
}

/// `D̂ = −γ₁⁻K̃`, each entry the limit of the interior Neumann trace of the
/// double layer potential of one unit patch density.
pub fn assemble_hypersingular_direct(mesh: &SpaceTimeMesh, limits: &LimitOptions) -> Result<DirectHypersingular> {
    limits.validate()?;
    let (m, n) = (mesh.slabs(), mesh.panels());
    let colloc = mesh.collocation();
    let results: Vec<(DMatrix<f64>, Vec<(usize, usize)>)> = block_pairs(m)
        .into_par_iter()
        .map(|(i, j)| {
            let mut b = DMatrix::zeros(n, n);
            let mut changes = DMatrix::zeros(n, n);
            let mut values = vec![0.0; limits.offsets.len()];
            for p in 0..n {
                let sample = &colloc[mesh.index(i, p)];
                let targets: Vec<Target> = limits
                    .offsets
                    .iter()
                    .map(|&e| Target::offset(sample, -e))
                    .collect();
                for q in 0..n {
                    for (v, target) in values.iter_mut().zip(&targets) {
                        *v = mesh.panel_integral(TracedKernel::NeumannOfDouble, target, j, q);
                    }
                    let (limit, change) = extrapolate_to_zero(&limits.offsets, &values);
                    b[(p, q)] = -limit;
                    changes[(p, q)] = change;
                }
            }
            // tiny entries are judged against the block scale
            let floor = 1e-3 * b.amax();
            let flagged = (0..n)
                .flat_map(|p| (0..n).map(move |q| (p, q)))
                .filter(|&(p, q)| !(changes[(p, q)] <= limits.tolerance * (b[(p, q)].abs() + floor)))
                .map(|(p, q)| (i * n + p, j * n + q))
                .collect();
            (b, flagged)
        })
        .collect();
    let mut flagged = Vec::new();
    let mut blocks = Vec::with_capacity(results.len());
    for (b, f) in results {
        blocks.push(b);
        flagged.extend(f);
    }
    flagged.sort_unstable();
    Ok(DirectHypersingular {
        matrix: CausalMatrix { m, n, blocks },
        flagged,
    })
}

/// `D̂ = V̂⁻¹(¼ Id − K̂²)`.
pub fn derive_hypersingular_calderon(v: &CausalMatrix, k: &CausalMatrix) -> Result<CausalMatrix> {
    let rhs = k.mul(k)?.shifted(0.25, -1.0);
    v.factorize()?.solve_matrix(&rhs)
}

/// Which hypersingular matrix a computation uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HypersingularChoice {
    /// Derived from `V̂` and `K̂` through the Calderón identity.
    #[default]
    Calderon,
    /// Interior limits of the double layer potential.
    Direct,
}

impl std::str::FromStr for HypersingularChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calderon" => Ok(Self::Calderon),
            "direct" => Ok(Self::Direct),
            other => Err(Error::Config(format!(
                "unknown hypersingular operator `{other}` (expected calderon or direct)"
            ))),
        }
    }
}

/// The four discrete boundary integral operators. `D̂` is built on first
/// use, since only some formulations need it.
#[derive(Debug)]
pub struct CalderonBlocks {
    pub v: CausalMatrix,
    pub k: CausalMatrix,
    pub k_adj: CausalMatrix,
    d: OnceLock<CausalMatrix>,
    choice: HypersingularChoice,
    mesh: SpaceTimeMesh,
}

impl CalderonBlocks {
    pub fn assemble(mesh: &SpaceTimeMesh, choice: HypersingularChoice) -> Self {
        let [v, k, k_adj] = assemble_many(
            mesh,
            [TracedKernel::Single, TracedKernel::Double, TracedKernel::AdjointDouble],
        );
        CalderonBlocks {
            v,
            k,
            k_adj,
            d: OnceLock::new(),
            choice,
            mesh: mesh.clone(),
        }
    }

    /// Uses `d` as the hypersingular matrix instead of building one.
    pub fn with_hypersingular(mut self, d: CausalMatrix) -> Result<Self> {
        self.v.check_shape(&d)?;
        self.d = OnceLock::from(d);
        Ok(self)
    }

    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn choice(&self) -> HypersingularChoice {
        self.choice
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    /// `D̂`, built on first call.
    pub fn d(&self) -> Result<&CausalMatrix> {
        if let Some(d) = self.d.get() {
            return Ok(d);
        }
        let d = match self.choice {
            HypersingularChoice::Calderon => derive_hypersingular_calderon(&self.v, &self.k)
                .map_err(|e| e.context("deriving the hypersingular operator"))?,
            HypersingularChoice::Direct => {
                assemble_hypersingular_direct(&self.mesh, &LimitOptions::for_mesh(&self.mesh))?.matrix
            }
        };
        Ok(self.d.get_or_init(|| d))
    }

    /// `Â (w, ψ) = (−K̂w + V̂ψ, D̂w + K̂′ψ)`.
    pub fn apply_a(&self, w: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let kw = self.k.matvec(w)?;
        let vpsi = self.v.matvec(psi)?;
        let dw = self.d()?.matvec(w)?;
        let kpsi = self.k_adj.matvec(psi)?;
        let first = vpsi.iter().zip(&kw).map(|(a, b)| a - b).collect();
        let second = dw.iter().zip(&kpsi).map(|(a, b)| a + b).collect();
        Ok((first, second))
    }

    /// `Ĉ (w, ψ) = ½ (w, ψ) + Â (w, ψ)`.
    pub fn apply_projector(&self, w: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = self.apply_a(w, psi)?;
        let first = a.iter().zip(w).map(|(a, w)| a + 0.5 * w).collect();
        let second = b.iter().zip(psi).map(|(b, p)| b + 0.5 * p).collect();
        Ok((first, second))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Family, TubeGeometry};
    use crate::quadrature::QuadratureOptions;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(geom: &TubeGeometry, m: usize, n: usize) -> SpaceTimeMesh {
        SpaceTimeMesh::build(geom, m, n, QuadratureOptions::default()).unwrap()
    }

    fn random_causal(m: usize, n: usize, seed: u64) -> CausalMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CausalMatrix::from_blocks(m, n, |_, _| DMatrix::zeros(n, n));
        for i in 0..m {
            for j in 0..=i {
                let b = a.block_mut(i, j).unwrap();
                for v in b.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            a.block_mut(i, i).unwrap().fill_diagonal(4.0 + n as f64);
        }
        a
    }

    #[test]
    fn forward_solve_matches_dense_lu() {
        let a = random_causal(5, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = a.factorize().unwrap().solve(&b).unwrap();
        let dense = a.to_dense().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for (u, v) in x.iter().zip(dense.iter()) {
            assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        let r = a.matvec(&x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * nb);
    }

    #[test]
    fn identity_and_zero_systems() {
        let id = CausalMatrix::identity(3, 4);
        let b: Vec<f64> = (0..12).map(|k| k as f64 - 5.5).collect();
        assert_eq!(id.factorize().unwrap().solve(&b).unwrap(), b);
        let a = random_causal(3, 4, 9);
        assert!(a.factorize().unwrap().solve(&[0.0; 12]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_block_is_reported_with_its_slab() {
        let mut a = CausalMatrix::identity(3, 2);
        a.block_mut(1, 1).unwrap().fill(0.0);
        match a.factorize() {
            Err(Error::SingularBlock { slab }) => assert_eq!(slab, 1),
            other => panic!("expected singular block, got {:?}", other.err()),
        }
    }

    #[test]
    fn matrix_solve_and_products_agree_with_dense() {
        let a = random_causal(4, 3, 1);
        let b = random_causal(4, 3, 2);
        let x = a.factorize().unwrap().solve_matrix(&b).unwrap();
        let ax = a.mul(&x).unwrap();
        assert!(ax.add_scaled(-1.0, &b).unwrap().frobenius_norm() <= 1e-12 * b.frobenius_norm());
        let dense = &a.to_dense() * &b.to_dense();
        assert!((a.mul(&b).unwrap().to_dense() - dense).norm() <= 1e-12);
    }

    #[test]
    fn transpose_matvec_matches_dense() {
        let a = random_causal(3, 4, 5);
        let x: Vec<f64> = (0..12).map(|k| (k as f64).sin()).collect();
        let y = a.transpose_matvec(&x).unwrap();
        let dense = a.to_dense().transpose() * DVector::from_vec(x);
        for (u, v) in y.iter().zip(dense.iter()) {
            assert_relative_eq!(u, v, epsilon = 1e-13);
        }
    }

    #[test]
    fn binary_dump_round_trips() {
        let a = random_causal(3, 2, 7);
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"THBM");
        assert_eq!(buf.len(), 16 + 6 * 4 * 8);
        assert_eq!(CausalMatrix::read_binary(buf.as_slice()).unwrap(), a);
        assert!(CausalMatrix::read_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = CausalMatrix::identity(2, 2);
        assert!(matches!(a.matvec(&[1.0; 3]), Err(Error::Dimension { .. })));
        assert!(a.mul(&CausalMatrix::identity(2, 3)).is_err());
    }

    #[test]
    fn neville_is_exact_for_polynomials() {
        let eps = [0.4, 0.2, 0.1];
        let vals: Vec<f64> = eps.iter().map(|e| 3.0 - 2.0 * e + 5.0 * e * e).collect();
        let (limit, _) = extrapolate_to_zero(&eps, &vals);
        assert_relative_eq!(limit, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn stationary_circle_blocks_are_circulant_and_time_invariant() {
        let geom = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let mesh = mesh(&geom, 4, 8);
        let [v, k] = assemble_many(&mesh, [TracedKernel::Single, TracedKernel::Double]);
        for a in [&v, &k] {
            assert!(a.is_finite());
            for i in 0..4 {
                for j in 0..=i {
                    let b = a.block(i, j).unwrap();
                    let reference = a.block(i - j, 0).unwrap();
                    for p in 0..8 {
                        for q in 0..8 {
                            let shifted = b[((p + 1) % 8, (q + 1) % 8)];
                            assert!((b[(p, q)] - shifted).abs() <= 1e-12);
                            assert!((b[(p, q)] - reference[(p, q)]).abs() <= 1e-12);
                        }
                    }
                }
            }
            assert!(a.block(0, 1).is_none());
            assert_eq!(a.get(0, 8), 0.0);
        }
    }

    #[test]
    fn double_and_adjoint_diagonal_blocks_are_transposes_on_a_stationary_circle() {
        let geom = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let mesh = mesh(&geom, 4, 8);
        let [k, ka] = assemble_many(&mesh, [TracedKernel::Double, TracedKernel::AdjointDouble]);
        for i in 0..4 {
            let diff = k.block(i, i).unwrap() - ka.block(i, i).unwrap().transpose();
            assert!(diff.amax() <= 1e-8, "slab {i}: {}", diff.amax());
        }
    }

    #[test]
    fn constant_normal_velocity_shifts_the_double_layer_by_the_single_layer() {
        let a = 0.3;
        let geom = TubeGeometry::expanding_circle(1.0, a, 1.0).unwrap();
        let mesh = mesh(&geom, 4, 8);
        let [v, k] = assemble_many(&mesh, [TracedKernel::Single, TracedKernel::Double]);
        // the same integrals with the velocity term removed
        let colloc = mesh.collocation();
        for (row, col) in [(0, 0), (9, 3), (31, 17), (31, 31), (20, 4)] {
            let target = Target::on_boundary(&colloc[row]);
            let plain = mesh.integrate_patch(
                |s, lag| {
                    let mut s = *s;
                    s.vn = 0.0;
                    TracedKernel::Double.eval_lagged(&target.point, &s, lag)
                },
                &target,
                col / 8,
                col % 8,
            );
            let expected = plain - 0.5 * a * v.get(row, col);
            assert!((k.get(row, col) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn calderon_hypersingular_satisfies_its_defining_identity() {
        let geom = TubeGeometry::with_defaults(Family::RotatingEllipse, 1.0).unwrap();
        let mesh = mesh(&geom, 4, 8);
        let [v, k] = assemble_many(&mesh, [TracedKernel::Single, TracedKernel::Double]);
        let d = derive_hypersingular_calderon(&v, &k).unwrap();
        let lhs = v.mul(&d).unwrap().add_scaled(1.0, &k.mul(&k).unwrap()).unwrap();
        let residual = lhs.add_scaled(-1.0, &CausalMatrix::identity(4, 8).scaled(0.25)).unwrap();
        assert!(residual.frobenius_norm() <= 1e-12 * lhs.frobenius_norm().max(1.0));
    }

    #[test]
    fn direct_hypersingular_of_zero_density_is_zero_and_circulant() {
        let geom = TubeGeometry::stationary_circle(1.0, 1.0).unwrap();
        let mesh = mesh(&geom, 4, 8);
        let d = assemble_hypersingular_direct(&mesh, &LimitOptions::for_mesh(&mesh)).unwrap();
        assert!(d.matrix.matvec(&[0.0; 32]).unwrap().iter().all(|&v| v == 0.0));
        let b = d.matrix.block(2, 2).unwrap();
        for p in 0..8 {
            for q in 0..8 {
                assert!((b[(p, q)] - b[((p + 3) % 8, (q + 3) % 8)]).abs() <= 1e-9 * b.amax());
            }
        }
        assert!(LimitOptions { offsets: vec![0.1, 0.2, 0.05], tolerance: 1.0 }.validate().is_err());
    }
}
