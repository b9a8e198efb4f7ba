//! Single and double layer potentials away from the boundary, and the
//! representation formula inside the tube.

use crate::error::{Error, Result};
use crate::geometry::{BoundarySample, Point, PointClass};
use crate::kernels::TracedKernel;
use crate::quadrature::{SpaceTimeMesh, Target};

/// A potential value; `near_boundary` marks points closer to `Γ_t` than half
/// a panel, where the value is less reliable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    pub near_boundary: bool,
}

/// Densities of a representation `u = Ṽ single − K̃ double`; either may be
/// absent.
#[derive(Clone, Copy, Debug, Default)]
pub struct LayerDensities<'a> {
    pub single: Option<&'a [f64]>,
    pub double: Option<&'a [f64]>,
}

impl<'a> LayerDensities<'a> {
    pub fn new(single: &'a [f64], double: &'a [f64]) -> Self {
        LayerDensities {
            single: Some(single),
            double: Some(double),
        }
    }

    pub fn single(single: &'a [f64]) -> Self {
        LayerDensities {
            single: Some(single),
            double: None,
        }
    }

    pub fn double(double: &'a [f64]) -> Self {
        LayerDensities {
            single: None,
            double: Some(double),
        }
    }
}

fn check(mesh: &SpaceTimeMesh, density: Option<&[f64]>) -> Result<()> {
    match density {
        Some(d) if d.len() != mesh.len() => Err(Error::Dimension {
            expected: mesh.len(),
            got: d.len(),
        }),
        _ => Ok(()),
    }
}

/// `(Ṽ single − K̃ double)` at `target`, summed patch by patch.
pub fn eval_at(mesh: &SpaceTimeMesh, layers: LayerDensities<'_>, target: &Target) -> Result<f64> {
    check(mesh, layers.single)?;
    check(mesh, layers.double)?;
    let t = target.point.t;
    let horizon = mesh.geometry().horizon();
    if t > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain { t, horizon });
    }
    let mut total = 0.0;
    for slab in 0..mesh.slabs() {
        if slab as f64 * mesh.slab_width() >= t {
            break;
        }
        for panel in 0..mesh.panels() {
            let idx = mesh.index(slab, panel);
            let a = layers.single.map_or(0.0, |d| d[idx]);
            let b = layers.double.map_or(0.0, |d| d[idx]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let [s, k] = mesh.integrate_patch_many(
                |src, lag| {
                    [
                        TracedKernel::Single.eval_lagged(&target.point, src, lag),
                        TracedKernel::Double.eval_lagged(&target.point, src, lag),
                    ]
                },
                target,
                slab,
                panel,
            );
            total += a * s - b * k;
        }
    }
    Ok(total)
}

/// Interior or exterior Neumann trace kernels applied at `target`:
/// `γ₁⁻`-type derivative at the target normal of `Ṽ single − K̃ double`.
pub fn eval_normal_derivative_at(mesh: &SpaceTimeMesh, layers: LayerDensities<'_>, target: &Target) -> Result<f64> {
    check(mesh, layers.single)?;
    check(mesh, layers.double)?;
    let mut total = 0.0;
    for slab in 0..mesh.slabs() {
        if slab as f64 * mesh.slab_width() >= target.point.t {
            break;
        }
        for panel in 0..mesh.panels() {
            let idx = mesh.index(slab, panel);
            let a = layers.single.map_or(0.0, |d| d[idx]);
            let b = layers.double.map_or(0.0, |d| d[idx]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let [s, k] = mesh.integrate_patch_many(
                |src, lag| {
                    [
                        TracedKernel::AdjointDouble.eval_lagged(&target.point, src, lag),
                        TracedKernel::NeumannOfDouble.eval_lagged(&target.point, src, lag),
                    ]
                },
                target,
                slab,
                panel,
            );
            total += a * s - b * k;
        }
    }
    Ok(total)
}

fn field_value(mesh: &SpaceTimeMesh, layers: LayerDensities<'_>, t0: f64, x0: Point) -> Result<PotentialValue> {
    if t0 <= 0.0 {
        check(mesh, layers.single)?;
        check(mesh, layers.double)?;
        return Ok(PotentialValue {
            value: 0.0,
            near_boundary: false,
        });
    }
    let geom = mesh.geometry();
    let (theta0, distance) = geom.nearest_angle(t0, x0);
    let target = Target {
        point: crate::kernels::KernelPoint::field(t0, x0),
        theta0,
        on_boundary: false,
    };
    let value = eval_at(mesh, layers, &target)?;
    Ok(PotentialValue {
        value,
        near_boundary: distance < near_band(mesh),
    })
}

/// Half a panel in arc length.
pub fn near_band(mesh: &SpaceTimeMesh) -> f64 {
    0.5 * mesh.geometry().r0() * mesh.panel_width()
}

/// `(Ṽψ)(t0, x0)`.
pub fn eval_single_layer(mesh: &SpaceTimeMesh, psi: &[f64], t0: f64, x0: Point) -> Result<PotentialValue> {
    field_value(mesh, LayerDensities::single(psi), t0, x0)
}

/// `(K̃w)(t0, x0)`.
pub fn eval_double_layer(mesh: &SpaceTimeMesh, w: &[f64], t0: f64, x0: Point) -> Result<PotentialValue> {
    let v = field_value(mesh, LayerDensities::double(w), t0, x0)?;
    Ok(PotentialValue {
        value: -v.value,
        ..v
    })
}

/// `u(t0, x0) = (Ṽψ − K̃w)(t0, x0)` for an interior point and a Cauchy pair
/// `(w, ψ)`.
pub fn represent_interior(mesh: &SpaceTimeMesh, w: &[f64], psi: &[f64], t0: f64, x0: Point) -> Result<PotentialValue> {
    represent(mesh, LayerDensities::new(psi, w), t0, x0)
}

/// Evaluates `Ṽ single − K̃ double` at a point that must not lie outside the
/// domain.
pub fn represent(mesh: &SpaceTimeMesh, layers: LayerDensities<'_>, t0: f64, x0: Point) -> Result<PotentialValue> {
    let geom = mesh.geometry();
    if geom.classify_point(t0, x0)? == PointClass::Outside {
        return Err(Error::NotInside {
            t: t0,
            x: x0[0],
            y: x0[1],
        });
    }
    field_value(mesh, layers, t0, x0)
}

/// Limit of `Ṽ single − K̃ double` at a boundary sample from one side, by
/// extrapolation from `x ± ε n`. `side` is `-1` for the interior and `+1`
/// for the exterior. Returns the limit and the extrapolation change.
pub fn one_sided_limit(
    mesh: &SpaceTimeMesh,
    layers: LayerDensities<'_>,
    sample: &BoundarySample,
    side: f64,
    offsets: &[f64],
    neumann: bool,
) -> Result<(f64, f64)> {
    let values = offsets
        .iter()
        .map(|&e| {
            let target = Target::offset(sample, side * e);
            if neumann {
                eval_normal_derivative_at(mesh, layers, &target)
            } else {
                eval_at(mesh, layers, &target)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::operators::extrapolate_to_zero(offsets, &values))
}
