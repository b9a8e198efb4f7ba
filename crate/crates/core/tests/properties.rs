use std::sync::OnceLock;

use proptest::prelude::*;
use tubeheat::geometry::{dot, norm, Family, TubeGeometry};
use tubeheat::kernels::heat_kernel;
use tubeheat::operators::{assemble_single_layer, extrapolate_to_zero, CalderonBlocks, CausalMatrix};
use tubeheat::quadrature::SpaceTimeMesh;
use tubeheat::solve::{solve, Formulation, Variant};

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn blocks() -> &'static CalderonBlocks {
    static BLOCKS: OnceLock<CalderonBlocks> = OnceLock::new();
    BLOCKS.get_or_init(|| {
        let geom = TubeGeometry::with_defaults(Family::RotatingEllipse, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&geom, 4, 6, Default::default()).unwrap();
        CalderonBlocks::assemble(&mesh, Default::default())
    })
}

fn density(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_frames_are_orthonormal(family in family(), t in 0.0f64..1.0, theta in 0.0f64..std::f64::consts::TAU) {
        let geom = TubeGeometry::with_defaults(family, 1.0).unwrap();
        let s = geom.boundary_sample(t, theta).unwrap();
        prop_assert!((norm(s.n) - 1.0).abs() < 1e-12);
        prop_assert!(dot(s.n, geom.tangent(t, theta)).abs() < 1e-10);
        prop_assert!(s.jac > 0.0);
        // the outward normal points away from the interior
        let probe = [s.x[0] - 0.01 * s.n[0], s.x[1] - 0.01 * s.n[1]];
        prop_assert_ne!(geom.classify_point(t, probe).unwrap(), tubeheat::PointClass::Outside);
    }

    #[test]
    fn heat_kernel_is_positive_and_causal(dt in -1.0f64..1.0, r2 in 0.0f64..4.0) {
        let g = heat_kernel(dt, r2, 2);
        if dt <= 0.0 {
            prop_assert_eq!(g, 0.0);
        } else {
            prop_assert!(g >= 0.0 && g.is_finite());
            prop_assert!(heat_kernel(dt, r2 + 0.1, 2) <= g);
        }
    }

    #[test]
    fn neville_is_exact_on_quadratics(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, h in 0.01f64..1.0) {
        let offsets = [h, h / 2.0, h / 4.0];
        let values: Vec<f64> = offsets.iter().map(|e| a + b * e + c * e * e).collect();
        let (limit, _) = extrapolate_to_zero(&offsets, &values);
        prop_assert!((limit - a).abs() <= 1e-9 * (1.0 + a.abs() + b.abs() + c.abs()));
    }

    #[test]
    fn binary_dump_round_trips(m in 1usize..4, n in 1usize..4, seed in any::<u64>()) {
        let mut a = CausalMatrix::zeros(m, n);
        let mut x = seed;
        for i in 0..m {
            for j in 0..=i {
                for v in a.block_mut(i, j).unwrap().iter_mut() {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    *v = (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                }
            }
        }
        let mut bytes = Vec::new();
        a.write_binary(&mut bytes).unwrap();
        prop_assert_eq!(bytes.len(), 16 + 8 * n * n * m * (m + 1) / 2);
        let b = CausalMatrix::read_binary(bytes.as_slice()).unwrap();
        prop_assert_eq!(a.to_dense(), b.to_dense());
    }

    #[test]
    fn operators_are_linear_and_causal(x in density(24), y in density(24), alpha in -2.0f64..2.0) {
        let v = &blocks().v;
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
        let lhs = v.matvec(&combo).unwrap();
        let (vx, vy) = (v.matvec(&x).unwrap(), v.matvec(&y).unwrap());
        for k in 0..24 {
            prop_assert!((lhs[k] - alpha * vx[k] - vy[k]).abs() <= 1e-12 * (1.0 + lhs[k].abs()));
        }
        // changing the density in the last slab leaves earlier slabs alone
        let mut late = x.clone();
        for v in &mut late[18..] {
            *v += 1.0;
        }
        let vl = v.matvec(&late).unwrap();
        prop_assert_eq!(&vl[..18], &vx[..18]);
    }

    #[test]
    fn every_formulation_reproduces_its_own_data(data in density(24), variant in prop::sample::select(Variant::ALL.to_vec()), neumann in any::<bool>()) {
        let formulation = if neumann { Formulation::neumann(variant) } else { Formulation::dirichlet(variant) };
        let sol = solve(blocks(), &data, formulation).unwrap();
        prop_assert!(sol.residual <= 1e-10, "{}: {}", formulation, sol.residual);
        prop_assert!(sol.density.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn single_layer_diagonal_blocks_are_positive() {
    for family in Family::ALL {
        let geom = TubeGeometry::with_defaults(family, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(&geom, 4, 8, Default::default()).unwrap();
        let v = assemble_single_layer(&mesh);
        for i in 0..4 {
            let b = v.block(i, i).unwrap();
            assert!(b.iter().all(|&x| x > 0.0), "{family}");
        }
    }
}
