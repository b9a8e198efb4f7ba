//! Interior limits of the layer potentials against the assembled boundary
//! operators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tubeheat::geometry::{Family, TubeGeometry};
use tubeheat::operators::{CalderonBlocks, LimitOptions};
use tubeheat::potentials::{one_sided_limit, LayerDensities};
use tubeheat::quadrature::SpaceTimeMesh;
use tubeheat::verify::{probe_indices, random_smooth_density};

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[test]
fn interior_limits_match_the_boundary_operators() {
    let geom = TubeGeometry::with_defaults(Family::ExpandingCircle, 1.0).unwrap();
    let mesh = SpaceTimeMesh::build(&geom, 16, 16, Default::default()).unwrap();
    let ops = CalderonBlocks::assemble(&mesh, Default::default());
    let density = random_smooth_density(&mesh, &mut ChaCha8Rng::seed_from_u64(4));
    let scale = max_abs(&density);
    let offsets = LimitOptions::for_mesh(&mesh).offsets;

    let v = ops.v.matvec(&density).unwrap();
    let kp = ops.k_adj.matvec(&density).unwrap();
    let k = ops.k.matvec(&density).unwrap();
    let single = LayerDensities::single(&density);
    let double = LayerDensities::double(&density);

    let mut worst = [0.0f64; 3];
    for i in probe_indices(&mesh, 12) {
        let sample = &mesh.collocation()[i];
        let (dirichlet, _) = one_sided_limit(&mesh, single, sample, -1.0, &offsets, false).unwrap();
        let (neumann, _) = one_sided_limit(&mesh, single, sample, -1.0, &offsets, true).unwrap();
        // the double layer enters the representation with a minus sign
        let (minus_double, _) = one_sided_limit(&mesh, double, sample, -1.0, &offsets, false).unwrap();
        worst[0] = worst[0].max((dirichlet - v[i]).abs() / scale);
        worst[1] = worst[1].max((neumann - (0.5 * density[i] + kp[i])).abs() / scale);
        worst[2] = worst[2].max((-minus_double - (k[i] - 0.5 * density[i])).abs() / scale);
    }
    assert!(worst.iter().all(|&w| w <= 2e-3), "{worst:?}");
}
