//! The `solve`, `verify` and `converge` runs behind the command line tool.
//! Each run reads a [`RunConfig`], writes its CSV files into the output
//! directory and returns a summary.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{BoundaryExpression, Check, DataSource, Format, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{PointClass, TubeGeometry};
use crate::operators::{
    assemble_hypersingular_direct, CalderonBlocks, HypersingularChoice, LimitOptions,
};
use crate::output::{fmt_f64, write_csv, write_density, write_field, write_matrix, FieldSample};
use crate::quadrature::{SpaceTimeMesh, VolumeQuadrature};
use crate::solve::{solve, BieSolution, Problem};
use crate::verify::{
    bilinear_d, coercivity_report, green_terms, interior_probes, involution_residual, jump_probe,
    probe_indices, projector_residual, random_smooth_density, relative_max_error, BumpField,
    EndVanishingField, ManufacturedSolution, Potential, SmoothField, TraceKind,
};

/// Random pairs averaged for the involution residual.
pub const INVOLUTION_PAIRS: u64 = 5;
/// Test pairs for the antisymmetry of `d`.
pub const BILINEAR_PAIRS: usize = 10;

/// Boundary data and, for manufactured data, the exact traces.
pub struct ProblemData {
    pub data: Vec<f64>,
    pub exact: Option<(ManufacturedSolution, Vec<f64>, Vec<f64>)>,
}

/// Samples the configured boundary data on `mesh`.
pub fn problem_data(config: &RunConfig, mesh: &SpaceTimeMesh) -> Result<ProblemData> {
    let problem = config.problem.kind;
    match config.problem.data {
        DataSource::Manufactured => {
            let u = ManufacturedSolution::new(mesh.geometry(), config.manufactured_source(mesh.geometry()))?;
            let (g, psi) = u.cauchy_data(mesh);
            let data = match problem {
                Problem::Dirichlet => g.clone(),
                Problem::Neumann => psi.clone(),
            };
            Ok(ProblemData {
                data,
                exact: Some((u, g, psi)),
            })
        }
        DataSource::Expression => {
            let text = config.problem.expression.as_deref().unwrap_or_default();
            let expr = BoundaryExpression::parse(text)?;
            let data = mesh
                .collocation()
                .iter()
                .map(|s| expr.sample(s))
                .collect::<Result<Vec<f64>>>()?;
            Ok(ProblemData { data, exact: None })
        }
    }
}

fn assemble(config: &RunConfig, mesh: &SpaceTimeMesh) -> Result<CalderonBlocks> {
    let choice = config.problem.hypersingular;
    let ops = CalderonBlocks::assemble(mesh, choice);
    if choice == HypersingularChoice::Direct && config.formulation().variant.needs_hypersingular(config.problem.kind) {
        ops.d().map_err(|e| e.context("assembling the hypersingular operator"))?;
    }
    Ok(ops)
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.output.directory.join(name)
}

fn prepare_output(config: &RunConfig) -> Result<()> {
    let dir = &config.output.directory;
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))
}

fn wants(config: &RunConfig, format: Format) -> bool {
    config.output.formats.contains(&format)
}

/// Errors of one manufactured solve against the exact solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveErrors {
    /// Relative max error of the computed unknown trace.
    pub density: f64,
    /// Max error at the interior probes relative to max |u|.
    pub interior: f64,
}

/// Compares a solution with the exact manufactured traces and interior
/// values.
pub fn solve_errors(
    ops: &CalderonBlocks,
    sol: &BieSolution,
    exact: &(ManufacturedSolution, Vec<f64>, Vec<f64>),
    probes: usize,
) -> Result<SolveErrors> {
    let (u, g, psi) = exact;
    let density = match sol.formulation.problem {
        Problem::Dirichlet => relative_max_error(&sol.neumann, psi),
        Problem::Neumann => relative_max_error(&sol.dirichlet, g),
    };
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (t, x) in interior_probes(ops.mesh().geometry(), probes) {
        let value = sol.evaluate(ops, t, x)?.value;
        let reference = u.value(t, x);
        err = err.max((value - reference).abs());
        scale = scale.max(reference.abs());
    }
    let interior = if scale > 0.0 { err / scale } else { err };
    Ok(SolveErrors { density, interior })
}

/// Field sample points at time `t`: a square grid over the bounding box
/// of `Γ_t`, keeping the points inside.
pub fn field_grid(geom: &TubeGeometry, t: f64, points: usize) -> Result<Vec<[f64; 2]>> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for k in 0..256 {
        let x = geom.boundary_point(t, std::f64::consts::TAU * k as f64 / 256.0)?;
        for d in 0..2 {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    let coord = |d: usize, i: usize| {
        if points == 1 {
            0.5 * (lo[d] + hi[d])
        } else {
            lo[d] + (hi[d] - lo[d]) * i as f64 / (points - 1) as f64
        }
    };
    let mut grid = Vec::new();
    for j in 0..points {
        for i in 0..points {
            let x = [coord(0, i), coord(1, j)];
            if geom.classify_point(t, x)? != PointClass::Outside {
                grid.push(x);
            }
        }
    }
    Ok(grid)
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub formulation: String,
    pub residual: f64,
    pub errors: Option<SolveErrors>,
    pub files: Vec<PathBuf>,
}

/// Solves the configured problem and writes `density.csv`, `field.csv`,
/// `summary.csv` and, if asked, the operator matrices.
pub fn run_solve(config: &RunConfig) -> Result<SolveReport> {
    prepare_output(config)?;
    let geom = config.geometry()?;
    let mesh = config.mesh_at(&geom, config.mesh.m, config.mesh.n)?;
    let ops = assemble(config, &mesh)?;
    let data = problem_data(config, &mesh)?;
    let sol = solve(&ops, &data.data, config.formulation())?;
    let errors = match &data.exact {
        Some(exact) => Some(solve_errors(&ops, &sol, exact, config.converge.probes)?),
        None => None,
    };

    let mut files = Vec::new();
    let path = out_path(config, "density.csv");
    write_density(&path, &mesh, &sol.density)?;
    files.push(path);

    let mut samples = Vec::new();
    for &t in &config.problem.field_times {
        for x in field_grid(&geom, t, config.problem.field_points)? {
            let v = sol.evaluate(&ops, t, x)?;
            samples.push(FieldSample {
                t,
                x,
                value: v.value,
                near_boundary: v.near_boundary,
            });
        }
    }
    let path = out_path(config, "field.csv");
    write_field(&path, &samples)?;
    files.push(path);

    let mut rows = vec![
        vec!["formulation".to_string(), sol.formulation.to_string()],
        vec!["M".into(), mesh.slabs().to_string()],
        vec!["N".into(), mesh.panels().to_string()],
        vec!["residual".into(), fmt_f64(sol.residual)],
    ];
    if let Some(e) = errors {
        rows.push(vec!["density_error".into(), fmt_f64(e.density)]);
        rows.push(vec!["interior_error".into(), fmt_f64(e.interior)]);
    }
    let path = out_path(config, "summary.csv");
    write_csv(&path, "summary", &["quantity", "value"], &rows)?;
    files.push(path);

    if wants(config, Format::Binary) {
        for (name, a) in [("V.bin", &ops.v), ("K.bin", &ops.k), ("Kadj.bin", &ops.k_adj)] {
            let path = out_path(config, name);
            write_matrix(&path, a)?;
            files.push(path);
        }
        if sol.formulation.variant.needs_hypersingular(sol.formulation.problem) {
            let path = out_path(config, "D.bin");
            write_matrix(&path, ops.d()?)?;
            files.push(path);
        }
    }

    Ok(SolveReport {
        formulation: sol.formulation.to_string(),
        residual: sol.residual,
        errors,
        files,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported without a threshold.
    Info,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    Above,
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
        }
    }

    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::Above => value > threshold,
            Relation::AtLeast => value >= threshold,
        }
    }
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub quantity: String,
    pub value: f64,
    pub bound: Option<(Relation, f64)>,
}

impl CheckRow {
    fn test(check: Check, quantity: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        CheckRow {
            check: check.name(),
            quantity: quantity.into(),
            value,
            bound: Some((relation, threshold)),
        }
    }

    fn info(check: Check, quantity: impl Into<String>, value: f64) -> Self {
        CheckRow {
            check: check.name(),
            quantity: quantity.into(),
            value,
            bound: None,
        }
    }

    pub fn status(&self) -> Status {
        match self.bound {
            None => Status::Info,
            Some((r, t)) if r.holds(self.value, t) => Status::Pass,
            Some(_) => Status::Fail,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
    pub files: Vec<PathBuf>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.status() != Status::Fail)
    }

    pub fn get(&self, check: Check, quantity: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.check == check.name() && r.quantity == quantity)
    }
}

/// The four jump measurements on random smooth densities drawn from `seed`.
pub fn jump_rows(mesh: &SpaceTimeMesh, seed: u64, probes: usize, tol: f64) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = random_smooth_density(mesh, &mut rng);
    let offsets = LimitOptions::for_mesh(mesh).offsets;
    let indices = probe_indices(mesh, probes);
    let mut rows = Vec::new();
    for (potential, trace, name) in [
        (Potential::Single, TraceKind::Dirichlet, "single-dirichlet"),
        (Potential::Single, TraceKind::NeumannMinus, "single-neumann"),
        (Potential::Double, TraceKind::Dirichlet, "double-dirichlet"),
        (Potential::Double, TraceKind::NeumannMinus, "double-neumann"),
    ] {
        let report = jump_probe(mesh, &density, potential, trace, &offsets, &indices)?;
        rows.push(CheckRow::test(Check::Jumps, name, report.max_deviation, Relation::AtMost, tol));
        rows.push(CheckRow::info(
            Check::Jumps,
            format!("{name}-flagged"),
            report.flagged().len() as f64,
        ));
    }
    Ok(rows)
}

/// Mean involution residual over [`INVOLUTION_PAIRS`] random smooth pairs.
pub fn mean_involution_residual(blocks: &CalderonBlocks, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..INVOLUTION_PAIRS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k));
        let w = random_smooth_density(blocks.mesh(), &mut rng);
        let psi = random_smooth_density(blocks.mesh(), &mut rng);
        total += involution_residual(blocks, &w, &psi)?;
    }
    Ok(total / INVOLUTION_PAIRS as f64)
}

/// `max |d(u, v) + d(v, u)| / (|d(u, v)| + 1)` over random test pairs.
pub fn antisymmetry_defect(vq: &VolumeQuadrature, horizon: f64, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|_| {
            let u = BumpField::random(horizon, &mut rng);
            let v = BumpField::random(horizon, &mut rng);
            let duv = bilinear_d(&u, &v, vq);
            let dvu = bilinear_d(&v, &u, vq);
            (duv + dvu).abs() / (duv.abs() + 1.0)
        })
        .fold(0.0, f64::max)
}

/// The test field paired with the manufactured solution in Green's formula.
pub fn green_test_field(horizon: f64) -> EndVanishingField {
    EndVanishingField {
        horizon,
        wave: [1.0, 0.5],
    }
}

/// Relative residual of Green's first formula for the manufactured
/// solution from `source` on `vq`.
pub fn green_residual(geom: &TubeGeometry, source: [f64; 2], vq: &VolumeQuadrature) -> Result<f64> {
    let u = ManufacturedSolution::new(geom, source)?;
    Ok(green_terms(&u, &green_test_field(geom.horizon()), vq).relative_residual())
}

/// `‖D̂_cal − D̂_dir‖_F / ‖D̂_cal‖_F` and the number of flagged direct
/// entries.
pub fn hypersingular_mismatch(blocks: &CalderonBlocks) -> Result<(f64, usize)> {
    let mesh = blocks.mesh();
    let cal = crate::operators::derive_hypersingular_calderon(&blocks.v, &blocks.k)?;
    let direct = assemble_hypersingular_direct(mesh, &LimitOptions::for_mesh(mesh))?;
    let diff = cal.add_scaled(-1.0, &direct.matrix)?;
    Ok((diff.frobenius_norm() / cal.frobenius_norm(), direct.flagged.len()))
}

/// Runs the configured checks and writes `verify.csv`.
pub fn run_verify(config: &RunConfig) -> Result<VerifyReport> {
    prepare_output(config)?;
    let geom = config.geometry()?;
    let mesh = config.mesh_at(&geom, config.mesh.m, config.mesh.n)?;
    let tol = &config.verify.tolerances;
    let seed = config.verify.seed;
    let mut checks = config.verify.checks.clone();
    checks.sort();
    checks.dedup();

    let needs_blocks = checks
        .iter()
        .any(|c| matches!(c, Check::Calderon | Check::Coercivity | Check::Hypersingular));
    let blocks = needs_blocks.then(|| CalderonBlocks::assemble(&mesh, config.problem.hypersingular));
    let vq = if checks.iter().any(|c| matches!(c, Check::Bilinear | Check::Green)) {
        Some(VolumeQuadrature::build(&geom, config.verify.volume_resolution)?)
    } else {
        None
    };

    let mut rows = vec![CheckRow {
        check: "config",
        quantity: "seed".into(),
        value: seed as f64,
        bound: None,
    }];
    for check in checks {
        let context = |e: Error| e.context(format!("{} check", check.name()));
        match check {
            Check::Jumps => rows.extend(jump_rows(&mesh, seed, config.verify.probes, tol.jump).map_err(context)?),
            Check::Calderon => {
                let blocks = blocks.as_ref().expect("assembled above");
                let source = config.manufactured_source(&geom);
                let u = ManufacturedSolution::new(&geom, source).map_err(context)?;
                let (g, psi) = u.cauchy_data(&mesh);
                let p = projector_residual(blocks, &g, &psi).map_err(context)?;
                let i = mean_involution_residual(blocks, seed).map_err(context)?;
                rows.push(CheckRow::test(check, "projector", p, Relation::AtMost, tol.projector));
                rows.push(CheckRow::test(check, "involution", i, Relation::AtMost, tol.involution));
            }
            Check::Coercivity => {
                let blocks = blocks.as_ref().expect("assembled above");
                let pairs = config.verify.pairs;
                let report = coercivity_report(blocks, pairs, seed).map_err(context)?;
                rows.push(CheckRow::test(check, "min-eig-v", report.min_eig_v, Relation::Above, 0.0));
                rows.push(CheckRow::info(check, "min-eig-d", report.min_eig_d));
                rows.push(CheckRow::info(check, "min-eig-d-off-constants", report.min_eig_d_off_constants));
                rows.push(CheckRow::test(
                    check,
                    "positive-pairs",
                    report.positive_pairs() as f64,
                    Relation::AtLeast,
                    pairs as f64,
                ));
                let min_form = report.pair_forms.iter().copied().fold(f64::INFINITY, f64::min);
                rows.push(CheckRow::info(check, "min-pair-form", min_form));
            }
            Check::Hypersingular => {
                let blocks = blocks.as_ref().expect("assembled above");
                let (ratio, flagged) = hypersingular_mismatch(blocks).map_err(context)?;
                rows.push(CheckRow::test(check, "relative-frobenius", ratio, Relation::AtMost, tol.hypersingular));
                rows.push(CheckRow::info(check, "flagged-entries", flagged as f64));
            }
            Check::Bilinear => {
                let vq = vq.as_ref().expect("built above");
                let defect = antisymmetry_defect(vq, geom.horizon(), BILINEAR_PAIRS, seed);
                rows.push(CheckRow::test(check, "antisymmetry", defect, Relation::AtMost, tol.bilinear));
            }
            Check::Green => {
                let vq = vq.as_ref().expect("built above");
                let r = green_residual(&geom, config.manufactured_source(&geom), vq).map_err(context)?;
                rows.push(CheckRow::test(check, "relative-residual", r, Relation::AtMost, tol.green));
            }
        }
    }

    let path = out_path(config, "verify.csv");
    write_verify(&path, &rows)?;
    Ok(VerifyReport {
        rows,
        files: vec![path],
    })
}

fn write_verify(path: &Path, rows: &[CheckRow]) -> Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (rel, thr) = match r.bound {
                Some((rel, t)) => (rel.symbol().to_string(), fmt_f64(t)),
                None => (String::new(), String::new()),
            };
            vec![
                r.check.to_string(),
                r.quantity.clone(),
                fmt_f64(r.value),
                rel,
                thr,
                r.status().name().to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        "verify",
        &["check", "quantity", "value", "relation", "threshold", "status"],
        &table,
    )
}

/// One level of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergeLevel {
    pub size: usize,
    pub errors: SolveErrors,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergeReport {
    pub levels: Vec<ConvergeLevel>,
    pub files: Vec<PathBuf>,
}

impl ConvergeReport {
    /// Observed orders `log(e_{k−1}/e_k) / log(n_k/n_{k−1})`.
    pub fn orders(&self, pick: impl Fn(&SolveErrors) -> f64) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.levels.windows(2) {
            let (a, b) = (pick(&w[0].errors), pick(&w[1].errors));
            let r = (w[1].size as f64 / w[0].size as f64).ln();
            out.push((a > 0.0 && b > 0.0).then(|| (a / b).ln() / r));
        }
        out
    }
}

/// Solves the manufactured problem at `M = N = level` for each level and
/// writes `converge.csv`.
pub fn run_converge(config: &RunConfig) -> Result<ConvergeReport> {
    if config.problem.data != DataSource::Manufactured {
        return Err(Error::Config("converge needs problem.data = \"manufactured\"".into()));
    }
    prepare_output(config)?;
    let geom = config.geometry()?;
    let mut levels = Vec::new();
    for &size in &config.converge.levels {
        let context = |e: Error| e.context(format!("level M = N = {size}"));
        let mesh = config.mesh_at(&geom, size, size).map_err(context)?;
        let ops = assemble(config, &mesh).map_err(context)?;
        let data = problem_data(config, &mesh).map_err(context)?;
        let sol = solve(&ops, &data.data, config.formulation()).map_err(context)?;
        let exact = data.exact.as_ref().expect("manufactured data");
        let errors = solve_errors(&ops, &sol, exact, config.converge.probes).map_err(context)?;
        levels.push(ConvergeLevel {
            size,
            errors,
            residual: sol.residual,
        });
    }
    let mut report = ConvergeReport {
        levels,
        files: Vec::new(),
    };
    let density_orders = report.orders(|e| e.density);
    let interior_orders = report.orders(|e| e.interior);
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .zip(density_orders.into_iter().zip(interior_orders))
        .map(|(l, (od, oi))| {
            vec![
                l.size.to_string(),
                fmt_f64(l.errors.density),
                opt(od),
                fmt_f64(l.errors.interior),
                opt(oi),
                fmt_f64(l.residual),
            ]
        })
        .collect();
    let path = out_path(config, "converge.csv");
    write_csv(
        &path,
        "converge",
        &["size", "density_error", "density_order", "interior_error", "interior_order", "residual"],
        &rows,
    )?;
    report.files.push(path);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            r#"
[geometry]
kind = "stationary-circle"
T = 1.0

[mesh]
M = 4
N = 8

[output]
directory = "{}"
{extra}
"#,
            dir.display()
        );
        RunConfig::parse(&text).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_density_and_residual() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), "");
        c.problem.data = DataSource::Expression;
        c.problem.expression = Some("0.0 * t".into());
        let report = run_solve(&c).unwrap();
        assert_eq!(report.residual, 0.0);
        assert!(report.errors.is_none());
        let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
        assert!(text.lines().skip(2).all(|l| l.ends_with(",0e0")));
        assert!(dir.path().join("field.csv").exists());
    }

    #[test]
    fn manufactured_solve_reports_errors_and_binary_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path(), "formats = [\"csv\", \"binary\"]");
        let report = run_solve(&c).unwrap();
        let e = report.errors.unwrap();
        assert!(e.density < 0.3 && e.interior < 0.1, "{e:?}");
        let v = std::fs::File::open(dir.path().join("V.bin")).unwrap();
        let v = crate::operators::CausalMatrix::read_binary(std::io::BufReader::new(v)).unwrap();
        assert_eq!(v.dim(), 32);
    }

    #[test]
    fn verify_rows_have_statuses() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), "");
        c.verify.checks = vec![Check::Coercivity, Check::Bilinear];
        c.verify.pairs = 5;
        c.verify.volume_resolution = 8;
        let report = run_verify(&c).unwrap();
        assert_eq!(report.get(Check::Coercivity, "positive-pairs").unwrap().status(), Status::Pass);
        assert_eq!(report.get(Check::Bilinear, "antisymmetry").unwrap().status(), Status::Pass);
        assert!(report.all_pass());
        let text = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
        assert!(text.starts_with("# tubeheat-csv v1 verify\ncheck,quantity,value,relation,threshold,status\n"));
    }

    #[test]
    fn converge_orders_and_expression_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), "");
        c.converge.levels = vec![4, 8];
        let report = run_converge(&c).unwrap();
        let orders = report.orders(|e| e.density);
        assert_eq!(orders.len(), 2);
        assert!(orders[0].is_none() && orders[1].unwrap() > 0.0);
        c.problem.data = DataSource::Expression;
        c.problem.expression = Some("t".into());
        assert!(run_converge(&c).is_err());
    }

    #[test]
    fn field_grid_stays_inside() {
        let geom = TubeGeometry::translating_circle(1.0, [0.5, 0.0], 1.0).unwrap();
        let grid = field_grid(&geom, 1.0, 9).unwrap();
        assert!(!grid.is_empty() && grid.len() < 81);
        for x in grid {
            assert!((x[0] - 0.5).hypot(x[1]) <= 1.0 + 1e-12);
        }
    }
}
