//! The four Dirichlet and four Neumann boundary integral formulations,
//! solved by marching forward over the time slabs.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::operators::{CalderonBlocks, CausalMatrix};
use crate::potentials::{represent, LayerDensities, PotentialValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Dirichlet,
    Neumann,
}

/// Which of the four integral equations is solved.
///
/// | variant | Dirichlet data `g`            | Neumann data `h`              |
/// |---------|-------------------------------|-------------------------------|
/// | i       | `Vψ = (½ + K)g`               | `(½ + K)w = Vh`               |
/// | ii      | `(½ − K′)ψ = Dg`              | `Dw = (½ − K′)h`              |
/// | iii     | `Vψ = g`, `u = Ṽψ`            | `(½ + K′)ψ = h`, `u = Ṽψ`     |
/// | iv      | `(½ − K)w = −g`, `u = K̃w`     | `Dw = −h`, `u = K̃w`           |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    I,
    Ii,
    Iii,
    Iv,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::I, Variant::Ii, Variant::Iii, Variant::Iv];

    pub fn name(self) -> &'static str {
        match self {
            Variant::I => "i",
            Variant::Ii => "ii",
            Variant::Iii => "iii",
            Variant::Iv => "iv",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown variant `{name}` (expected i, ii, iii or iv)")))
    }

    /// Whether the system involves the hypersingular operator.
    pub fn needs_hypersingular(self, problem: Problem) -> bool {
        match problem {
            Problem::Dirichlet => self == Variant::Ii,
            Problem::Neumann => matches!(self, Variant::Ii | Variant::Iv),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Dirichlet => "dirichlet",
            Problem::Neumann => "neumann",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Formulation {
    pub problem: Problem,
    pub variant: Variant,
}

impl Formulation {
    pub fn dirichlet(variant: Variant) -> Self {
        Formulation {
            problem: Problem::Dirichlet,
            variant,
        }
    }

    pub fn neumann(variant: Variant) -> Self {
        Formulation {
            problem: Problem::Neumann,
            variant,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.problem, self.variant)
    }
}

/// Result of one boundary integral solve.
#[derive(Clone, Debug)]
pub struct BieSolution {
    pub formulation: Formulation,
    /// The unknown of the linear system.
    pub density: Vec<f64>,
    /// Dirichlet trace `γ₀u` at the collocation points.
    pub dirichlet: Vec<f64>,
    /// Neumann trace `γ₁⁻u` at the collocation points.
    pub neumann: Vec<f64>,
    /// `u = Ṽ single − K̃ double`.
    pub single: Option<Vec<f64>>,
    pub double: Option<Vec<f64>>,
    /// `‖A x − b‖ / ‖b‖`, zero for zero data.
    pub residual: f64,
}

impl BieSolution {
    pub fn layers(&self) -> LayerDensities<'_> {
        LayerDensities {
            single: self.single.as_deref(),
            double: self.double.as_deref(),
        }
    }

    /// The solution at an interior point.
    pub fn evaluate(&self, ops: &CalderonBlocks, t: f64, x: Point) -> Result<PotentialValue> {
        represent(ops.mesh(), self.layers(), t, x)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + y).collect()
}

fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

/// Solves `A x = b` by causal block forward substitution and reports the
/// relative residual.
pub fn forward_substitute(a: &CausalMatrix, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let x = a.factorize()?.solve(rhs)?;
    let ax = a.matvec(&x)?;
    let nb = norm(rhs);
    let residual = if nb == 0.0 {
        norm(&ax)
    } else {
        norm(&axpy(-1.0, rhs, &ax)) / nb
    };
    Ok((x, residual))
}

fn check_data(ops: &CalderonBlocks, data: &[f64]) -> Result<()> {
    if data.len() != ops.dim() {
        return Err(Error::Dimension {
            expected: ops.dim(),
            got: data.len(),
        });
    }
    Ok(())
}

/// Dirichlet problem with boundary data `g` sampled at the collocation
/// points.
pub fn solve_dirichlet(ops: &CalderonBlocks, g: &[f64], variant: Variant) -> Result<BieSolution> {
    check_data(ops, g)?;
    let formulation = Formulation::dirichlet(variant);
    let solution = match variant {
        Variant::I => {
            let rhs = axpy(0.5, g, &ops.k.matvec(g)?);
            let (psi, residual) = forward_substitute(&ops.v, &rhs)?;
            BieSolution {
                formulation,
                dirichlet: g.to_vec(),
                neumann: psi.clone(),
                single: Some(psi.clone()),
                double: Some(g.to_vec()),
                density: psi,
                residual,
            }
        }
        Variant::Ii => {
            let rhs = ops.d()?.matvec(g)?;
            let (psi, residual) = forward_substitute(&ops.k_adj.shifted(0.5, -1.0), &rhs)?;
            BieSolution {
                formulation,
                dirichlet: g.to_vec(),
                neumann: psi.clone(),
                single: Some(psi.clone()),
                double: Some(g.to_vec()),
                density: psi,
                residual,
            }
        }
        Variant::Iii => {
            let (psi, residual) = forward_substitute(&ops.v, g)?;
            let neumann = axpy(0.5, &psi, &ops.k_adj.matvec(&psi)?);
            BieSolution {
                formulation,
                dirichlet: g.to_vec(),
                neumann,
                single: Some(psi.clone()),
                double: None,
                density: psi,
                residual,
            }
        }
        Variant::Iv => {
            let (w, residual) = forward_substitute(&ops.k.shifted(0.5, -1.0), &scale(-1.0, g))?;
            let neumann = scale(-1.0, &ops.d()?.matvec(&w)?);
            BieSolution {
                formulation,
                dirichlet: g.to_vec(),
                neumann,
                single: None,
                double: Some(scale(-1.0, &w)),
                density: w,
                residual,
            }
        }
    };
    Ok(solution)
}

/// Neumann problem with data `h = γ₁⁻u` sampled at the collocation points.
pub fn solve_neumann(ops: &CalderonBlocks, h: &[f64], variant: Variant) -> Result<BieSolution> {
    check_data(ops, h)?;
    let formulation = Formulation::neumann(variant);
    let solution = match variant {
        Variant::I => {
            let rhs = ops.v.matvec(h)?;
            let (w, residual) = forward_substitute(&ops.k.shifted(0.5, 1.0), &rhs)?;
            BieSolution {
                formulation,
                dirichlet: w.clone(),
                neumann: h.to_vec(),
                single: Some(h.to_vec()),
                double: Some(w.clone()),
                density: w,
                residual,
            }
        }
        Variant::Ii => {
            let rhs = axpy(0.5, h, &scale(-1.0, &ops.k_adj.matvec(h)?));
            let (w, residual) = forward_substitute(ops.d()?, &rhs)?;
            BieSolution {
                formulation,
                dirichlet: w.clone(),
                neumann: h.to_vec(),
                single: Some(h.to_vec()),
                double: Some(w.clone()),
                density: w,
                residual,
            }
        }
        Variant::Iii => {
            let (psi, residual) = forward_substitute(&ops.k_adj.shifted(0.5, 1.0), h)?;
            let dirichlet = ops.v.matvec(&psi)?;
            BieSolution {
                formulation,
                dirichlet,
                neumann: h.to_vec(),
                single: Some(psi.clone()),
                double: None,
                density: psi,
                residual,
            }
        }
        Variant::Iv => {
            let (w, residual) = forward_substitute(ops.d()?, &scale(-1.0, h))?;
            let dirichlet = axpy(-0.5, &w, &ops.k.matvec(&w)?);
            BieSolution {
                formulation,
                dirichlet,
                neumann: h.to_vec(),
                single: None,
                double: Some(scale(-1.0, &w)),
                density: w,
                residual,
            }
        }
    };
    Ok(solution)
}

pub fn solve(ops: &CalderonBlocks, data: &[f64], formulation: Formulation) -> Result<BieSolution> {
    match formulation.problem {
        Problem::Dirichlet => solve_dirichlet(ops, data, formulation.variant),
        Problem::Neumann => solve_neumann(ops, data, formulation.variant),
    }
    .map_err(|e| e.context(format!("solving {formulation}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TubeGeometry;
    use crate::operators::HypersingularChoice;
    use crate::quadrature::{QuadratureOptions, SpaceTimeMesh};

    fn ops(m: usize) -> CalderonBlocks {
        let geom = TubeGeometry::translating_circle(1.0, [0.5, 0.0], 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&geom, m, 8, QuadratureOptions::default()).unwrap();
        CalderonBlocks::assemble(&mesh, HypersingularChoice::Calderon)
    }

    #[test]
    fn zero_data_gives_zero_solutions() {
        let ops = ops(4);
        let zero = vec![0.0; ops.dim()];
        for variant in Variant::ALL {
            for f in [Formulation::dirichlet(variant), Formulation::neumann(variant)] {
                let s = solve(&ops, &zero, f).unwrap();
                assert!(s.density.iter().all(|&v| v == 0.0), "{f}");
                assert_eq!(s.residual, 0.0);
                assert_eq!(s.evaluate(&ops, 0.5, [0.2, 0.0]).unwrap().value, 0.0);
            }
        }
    }

    #[test]
    fn residuals_are_at_roundoff() {
        let ops = ops(4);
        let data: Vec<f64> = ops.mesh().sample_density(|t, th| t * (1.0 + 0.3 * th.cos()));
        for variant in Variant::ALL {
            for f in [Formulation::dirichlet(variant), Formulation::neumann(variant)] {
                let s = solve(&ops, &data, f).unwrap();
                assert!(s.residual <= 1e-12, "{f}: {}", s.residual);
            }
        }
    }

    #[test]
    fn truncated_meshes_reproduce_the_leading_slabs() {
        let full = ops(6);
        let geom = TubeGeometry::translating_circle(1.0, [0.5, 0.0], 0.5).unwrap();
        let mesh = SpaceTimeMesh::build_unchecked_sizes(&geom, 3, 8, QuadratureOptions::default(), 1).unwrap();
        let short = CalderonBlocks::assemble(&mesh, HypersingularChoice::Calderon);
        let f = |t: f64, th: f64| t * t * (2.0 + th.sin());
        for variant in Variant::ALL {
            let a = solve_dirichlet(&full, &full.mesh().sample_density(f), variant).unwrap();
            let b = solve_dirichlet(&short, &mesh.sample_density(f), variant).unwrap();
            for (u, v) in b.density.iter().zip(&a.density) {
                assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()), "{variant}: {u} vs {v}");
            }
        }
        // the same holds exactly for the truncated matrices
        let data = full.mesh().sample_density(f);
        let s = solve_dirichlet(&full, &data, Variant::Iii).unwrap();
        let (x, _) = forward_substitute(&full.v.truncated(3), &data[..24]).unwrap();
        assert_eq!(x, s.density[..24].to_vec());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::from_name(v.name()).unwrap(), v);
        }
        assert!(Variant::from_name("v").is_err());
        assert_eq!(Formulation::neumann(Variant::Iii).to_string(), "neumann-iii");
    }
}
