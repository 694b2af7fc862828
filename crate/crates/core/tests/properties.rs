use nalgebra::DMatrix;
use proptest::prelude::*;

use multisym::bundle::{FieldSpec, JetPoint};
use multisym::lagrangian::{hamiltonian, invert_legendre, legendre, LagrangianDensity, Potential};
use multisym::multihamiltonian::{assemble_structure_matrices, integer_rank};

fn potential() -> impl Strategy<Value = Potential> {
    prop_oneof![
        Just(Potential::Zero),
        (0.1f64..3.0).prop_map(|mass| Potential::KleinGordon { mass }),
        Just(Potential::SineGordon),
        (-2.0f64..2.0, -1.0f64..1.0).prop_map(|(lambda, gamma)| Potential::Duffing { lambda, gamma }),
    ]
}

fn jet(n: usize, fib: usize) -> impl Strategy<Value = JetPoint> {
    let nb = n + 1;
    (
        prop::collection::vec(-3.0f64..3.0, nb),
        prop::collection::vec(-3.0f64..3.0, fib),
        prop::collection::vec(-3.0f64..3.0, nb * fib),
    )
        .prop_map(move |(x, y, v)| JetPoint::new(x, y, DMatrix::from_vec(fib, nb, v)))
}

proptest! {
    #[test]
    fn legendre_round_trip(
        (n, fib, j) in (0usize..3, 1usize..4).prop_flat_map(|(n, f)| (Just(n), Just(f), jet(n, f))),
        pot in potential(),
        elliptic in any::<bool>(),
    ) {
        let l = if elliptic {
            LagrangianDensity::elliptic_pattern(n, fib, pot)
        } else {
            LagrangianDensity::nonlinear_wave(n, fib, pot)
        };
        let z = legendre(&l, &j).unwrap();
        let back = invert_legendre(&l, &z, None).unwrap();
        prop_assert!((&back.v - &j.v).amax() <= 1e-9);
        // H = p·v − L on the image
        let h = hamiltonian(&l, &z).unwrap();
        let pv = z.p.dot(&j.v);
        let lv = l.value(&j.x, &j.y, &j.v);
        prop_assert!((h - (pv - lv)).abs() <= 1e-9 * (1.0 + lv.abs()));
    }

    #[test]
    fn structure_matrices_are_skew_with_rank_2n(n in 0usize..4, fib in 1usize..5) {
        let sm = assemble_structure_matrices(&FieldSpec::new(n, fib));
        let mut sum = DMatrix::<i32>::zeros(sm.d, sm.d);
        for mu in 0..=n {
            let w = sm.omega(mu);
            prop_assert_eq!(w.transpose(), -w.clone());
            prop_assert_eq!(integer_rank(w), 2 * fib);
            sum += w.abs();
        }
        // distinct μ have disjoint patterns
        prop_assert!(sum.iter().all(|v| *v <= 1));
    }
}
