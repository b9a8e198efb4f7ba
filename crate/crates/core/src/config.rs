//! Run configuration, read from TOML.
//!
//! ```toml
//! [geometry]
//! kind = "translating-circle"
//! T = 1.0
//! params = { R0 = 1.0, c = 0.5 }
//!
//! [mesh]
//! M = 32
//! N = 32
//!
//! [problem]
//! kind = "dirichlet"
//! variant = "i"
//! data = "manufactured"
//! source = [-2.5, 0.0]
//! ```
//!
//! Every other key has a default; see [`RunConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evalexpr::{build_operator_tree, ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, Family, TubeGeometry};
use crate::operators::HypersingularChoice;
use crate::quadrature::{QuadratureOptions, SpaceTimeMesh};
use crate::solve::{Formulation, Problem, Variant};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: String,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    #[serde(rename = "M", default = "default_size")]
    pub m: usize,
    #[serde(rename = "N", default = "default_size")]
    pub n: usize,
    #[serde(default = "default_order")]
    pub q_t: usize,
    #[serde(default = "default_order")]
    pub q_s: usize,
}

fn default_size() -> usize {
    16
}

fn default_order() -> usize {
    QuadratureOptions::default().q_t
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection {
            m: default_size(),
            n: default_size(),
            q_t: default_order(),
            q_s: default_order(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Traces of the heat kernel released from `source` at `t = 0`.
    #[default]
    Manufactured,
    /// `expression` evaluated at the collocation points.
    Expression,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "default_problem")]
    pub kind: Problem,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub data: DataSource,
    /// Source point of the manufactured solution; a point `1.5 R₀` to the
    /// left of the initial domain when absent.
    #[serde(default)]
    pub source: Option<[f64; 2]>,
    /// Boundary data in the variables `t`, `x`, `y`, `theta` and `pi`.
    #[serde(default)]
    pub expression: Option<String>,
    #[serde(default)]
    pub hypersingular: HypersingularChoice,
    /// Interior sample grid for field output: times and points per axis.
    #[serde(default = "default_field_times")]
    pub field_times: Vec<f64>,
    #[serde(default = "default_field_points")]
    pub field_points: usize,
}

fn default_problem() -> Problem {
    Problem::Dirichlet
}

fn default_variant() -> Variant {
    Variant::I
}

fn default_field_times() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn default_field_points() -> usize {
    9
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            kind: default_problem(),
            variant: default_variant(),
            data: DataSource::default(),
            source: None,
            expression: None,
            hypersingular: HypersingularChoice::default(),
            field_times: default_field_times(),
            field_points: default_field_points(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Jumps,
    Calderon,
    Coercivity,
    Hypersingular,
    Bilinear,
    Green,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Jumps,
        Check::Calderon,
        Check::Coercivity,
        Check::Hypersingular,
        Check::Bilinear,
        Check::Green,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Jumps => "jumps",
            Check::Calderon => "calderon",
            Check::Coercivity => "coercivity",
            Check::Hypersingular => "hypersingular",
            Check::Bilinear => "bilinear",
            Check::Green => "green",
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_jump")]
    pub jump: f64,
    #[serde(default = "tol_projector")]
    pub projector: f64,
    #[serde(default = "tol_involution")]
    pub involution: f64,
    #[serde(default = "tol_hypersingular")]
    pub hypersingular: f64,
    #[serde(default = "tol_bilinear")]
    pub bilinear: f64,
    #[serde(default = "tol_green")]
    pub green: f64,
}

fn tol_jump() -> f64 {
    5e-2
}
fn tol_projector() -> f64 {
    1e-1
}
fn tol_involution() -> f64 {
    1e-1
}
fn tol_hypersingular() -> f64 {
    0.2
}
fn tol_bilinear() -> f64 {
    1e-6
}
fn tol_green() -> f64 {
    1e-5
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            jump: tol_jump(),
            projector: tol_projector(),
            involution: tol_involution(),
            hypersingular: tol_hypersingular(),
            bilinear: tol_bilinear(),
            green: tol_green(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "all_checks")]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// Random pairs for the quadratic form of `Â`.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Collocation points probed for the jump relations.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_volume_resolution")]
    pub volume_resolution: usize,
}

fn all_checks() -> Vec<Check> {
    Check::ALL.to_vec()
}
fn default_pairs() -> usize {
    100
}
fn default_probes() -> usize {
    16
}
fn default_volume_resolution() -> usize {
    32
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            checks: all_checks(),
            tolerances: Tolerances::default(),
            seed: 0,
            pairs: default_pairs(),
            probes: default_probes(),
            volume_resolution: default_volume_resolution(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    /// Interior probe points for the representation error.
    #[serde(default = "default_interior_probes")]
    pub probes: usize,
}

fn default_levels() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_interior_probes() -> usize {
    20
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection {
            levels: default_levels(),
            probes: default_interior_probes(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    /// Binary dumps of the operator matrices.
    Binary,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a TOML document. Errors carry the line and
    /// column of the offending entry.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let geom = self.geometry()?;
        if self.mesh.m < 4 || self.mesh.n < 4 {
            return Err(Error::Config("mesh.M and mesh.N must be at least 4".into()));
        }
        if self.mesh.q_t < 2 || self.mesh.q_s < 2 {
            return Err(Error::Config("mesh.q_t and mesh.q_s must be at least 2".into()));
        }
        match self.problem.data {
            DataSource::Expression => {
                let expr = self.problem.expression.as_deref().ok_or_else(|| {
                    Error::Config("problem.data = \"expression\" needs problem.expression".into())
                })?;
                BoundaryExpression::parse(expr)?;
            }
            DataSource::Manufactured => {
                crate::verify::ManufacturedSolution::new(&geom, self.manufactured_source(&geom))?;
            }
        }
        let t = &self.verify.tolerances;
        for (name, v) in [
            ("jump", t.jump),
            ("projector", t.projector),
            ("involution", t.involution),
            ("hypersingular", t.hypersingular),
            ("bilinear", t.bilinear),
            ("green", t.green),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("verify.tolerances.{name} must be positive")));
            }
        }
        if self.converge.levels.is_empty() || self.converge.levels.iter().any(|&l| l < 4) {
            return Err(Error::Config("converge.levels must be non-empty and at least 4".into()));
        }
        if self.problem.field_points < 1 {
            return Err(Error::Config("problem.field_points must be at least 1".into()));
        }
        if let Some(&t) = self
            .problem
            .field_times
            .iter()
            .find(|&&t| !(t > 0.0 && t <= geom.horizon()))
        {
            return Err(Error::Config(format!("field time {t} outside (0, T]")));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<TubeGeometry> {
        let family = Family::from_name(&self.geometry.kind)?;
        TubeGeometry::new(family, &self.geometry.params, self.geometry.horizon)
    }

    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions::with_orders(self.mesh.q_t, self.mesh.q_s)
    }

    pub fn mesh_at(&self, geom: &TubeGeometry, m: usize, n: usize) -> Result<SpaceTimeMesh> {
        SpaceTimeMesh::build(geom, m, n, self.quadrature())
    }

    pub fn formulation(&self) -> Formulation {
        Formulation {
            problem: self.problem.kind,
            variant: self.problem.variant,
        }
    }

    /// The configured source, or `κ(0, 0) − (2.5 R₀, 0)`.
    pub fn manufactured_source(&self, geom: &TubeGeometry) -> [f64; 2] {
        self.problem.source.unwrap_or_else(|| {
            let c = geom.map(0.0, [0.0, 0.0]);
            [c[0] - 2.5 * geom.r0(), c[1]]
        })
    }
}

/// Boundary data given as an expression of `t`, `x`, `y` and `theta`.
pub struct BoundaryExpression {
    tree: Node,
}

impl BoundaryExpression {
    pub fn parse(text: &str) -> Result<Self> {
        let tree = build_operator_tree(text)
            .map_err(|e| Error::Config(format!("problem.expression: {e}")))?;
        let probe = Self { tree };
        probe.eval(0.5, 0.0, [1.0, 0.0])?;
        Ok(probe)
    }

    pub fn eval(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<f64> {
        let mut ctx = HashMapContext::new();
        for (name, v) in [("t", t), ("theta", theta), ("x", x[0]), ("y", x[1]), ("pi", std::f64::consts::PI)] {
            ctx.set_value(name.into(), Value::Float(v))
                .map_err(|e| Error::Config(format!("problem.expression: {e}")))?;
        }
        self.tree
            .eval_number_with_context(&ctx)
            .map_err(|e| Error::Config(format!("problem.expression: {e}")))
    }

    pub fn sample(&self, s: &BoundarySample) -> Result<f64> {
        self.eval(s.t, s.theta, s.x)
    }
}
