use std::f64::consts::PI;

use adiafactor::adia::{self, Matrix, StateVector};
use adiafactor::bitplan::{build_system, BiPrimeInstance, Split, Var};
use adiafactor::gatedec::{self, Gate, GateProgram};
use adiafactor::hamcomp::{self, ZPolynomial};
use adiafactor::poly::IntPoly;
use adiafactor::reducer::{self, ReductionMode};
use adiafactor::tomo::{self, Basis, DensityMatrix1Q};
use num_complex::Complex64;
use proptest::prelude::*;

const VARS: [Var; 4] = [Var::P(1), Var::P(2), Var::Q(1), Var::Q(2)];

fn poly_strategy() -> impl Strategy<Value = IntPoly> {
    prop::collection::vec((-5i64..=5, prop::collection::vec(0usize..4, 0..3)), 0..6).prop_map(|terms| {
        terms.into_iter().fold(IntPoly::zero(), |acc, (c, vars)| {
            let mono = vars
                .into_iter()
                .fold(IntPoly::constant(c), |m, i| m.mul(&IntPoly::var(VARS[i])));
            acc.add(&mono)
        })
    })
}

fn bit_of(bits: u8) -> impl Fn(Var) -> i64 {
    move |v| {
        let i = VARS.iter().position(|u| *u == v).unwrap();
        ((bits >> i) & 1) as i64
    }
}

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    let angle = -10.0f64..10.0;
    prop_oneof![
        (0..n).prop_map(|q| Gate::X { q }),
        (0..n).prop_map(|q| Gate::H { q }),
        (0..n).prop_map(|q| Gate::Sdg { q }),
        (0..n, angle.clone()).prop_map(|(q, theta)| Gate::U1 { q, theta }),
        (0..n, angle.clone()).prop_map(|(q, theta)| Gate::Rz { q, theta }),
        (0..n, angle).prop_map(|(q, theta)| Gate::Rx { q, theta }),
        (0..n, 1..n).prop_map(move |(c, d)| Gate::Cx {
            control: c,
            target: (c + d) % n
        }),
    ]
}

fn random_state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| {
            let amps: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())
        })
}

fn primes_below(n: u64) -> Vec<u64> {
    (3..n)
        .filter(|&k| (2..k).take_while(|d| d * d <= k).all(|d| k % d != 0))
        .collect()
}

proptest! {
    #[test]
    fn poly_ring_ops_commute_with_evaluation(a in poly_strategy(), b in poly_strategy(), bits in 0u8..16) {
        let f = bit_of(bits);
        prop_assert_eq!(a.add(&b).eval(&f), a.eval(&f) + b.eval(&f));
        prop_assert_eq!(a.mul(&b).eval(&f), a.eval(&f) * b.eval(&f));
        prop_assert_eq!(a.scale(3).eval(&f), 3 * a.eval(&f));
    }

    #[test]
    fn normalization_preserves_roots(a in poly_strategy(), bits in 0u8..16) {
        let f = bit_of(bits);
        let n = a.normalized();
        prop_assert_eq!(n.eval(&f) == 0, a.eval(&f) == 0);
        prop_assert_eq!(n.vars(), a.vars());
    }

    #[test]
    fn z_polynomial_products_are_pointwise(qa in 0usize..3, qb in 0usize..3, x in 0u64..8) {
        let a = hamcomp::bit_operator(3, qa);
        let b = hamcomp::bit_operator(3, qb);
        let bit = |q: usize| ((x >> q) & 1) as f64;
        prop_assert_eq!(a.eigenvalue(x), bit(qa));
        prop_assert_eq!(a.mul(&b).eigenvalue(x), bit(qa) * bit(qb));
        prop_assert_eq!(a.add(&b).eigenvalue(x), bit(qa) + bit(qb));
    }

    #[test]
    fn normalized_angles_are_congruent(theta in -1e4f64..1e4) {
        let r = gatedec::normalize_angle(theta);
        prop_assert!(r > -PI && r <= PI);
        let turns = (theta - r) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn qasm_round_trip(gates in prop::collection::vec(gate_strategy(3), 0..40), measure: bool) {
        let mut program = GateProgram::new(3);
        for g in gates {
            program.push(g).unwrap();
        }
        let parsed = gatedec::parse_qasm(&gatedec::emit_qasm(&program, measure)).unwrap();
        prop_assert_eq!(parsed.program.gates.len(), program.gates.len());
        prop_assert_eq!(parsed.measured.len(), if measure { 3 } else { 0 });
        let d = gatedec::phase_distance(
            &gatedec::simulate_program(&parsed.program),
            &gatedec::simulate_program(&program),
        );
        prop_assert!(d < 1e-9, "distance {}", d);
    }

    #[test]
    fn programs_are_unitary(gates in prop::collection::vec(gate_strategy(2), 0..20)) {
        let mut program = GateProgram::new(2);
        for g in gates {
            program.push(g).unwrap();
        }
        prop_assert!(adia::unitarity_error(&gatedec::simulate_program(&program)) < 1e-12);
        let merged = program.peephole();
        let d = gatedec::phase_distance(&gatedec::simulate_program(&merged), &gatedec::simulate_program(&program));
        prop_assert!(d < 1e-9);
    }

    #[test]
    fn diagonal_unitaries_decompose_exactly(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let u = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, a),
            Complex64::from_polar(1.0, b),
        ]));
        let program = gatedec::decompose_diag_1q(&u).unwrap();
        prop_assert!(gatedec::phase_distance(&gatedec::simulate_program(&program), &u) < 1e-12);
    }

    #[test]
    fn exponentials_are_unitary(entries in prop::collection::vec(-3.0f64..3.0, 16), t in 0.0f64..5.0) {
        let raw = Matrix::from_fn(4, 4, |r, c| Complex64::new(entries[r * 4 + c], entries[c * 4 + r]));
        let h = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        prop_assert!(adia::unitarity_error(&adia::expm_hermitian(&h, t)) < 1e-10);
    }

    #[test]
    fn sample_counts_sum_to_shots(state in random_state(2), qubit in 0usize..2, shots in 1u64..5000, seed: u64) {
        for basis in Basis::ALL {
            let rec = tomo::sample(&state, qubit, basis, shots, seed).unwrap();
            prop_assert_eq!(rec.counts.values().sum::<u64>(), shots);
            prop_assert_eq!(&rec, &tomo::sample(&state, qubit, basis, shots, seed).unwrap());
        }
        let reg = tomo::sample_register(&state, shots, seed).unwrap();
        prop_assert_eq!(reg.counts.values().sum::<u64>(), shots);
    }

    #[test]
    fn ideal_reconstruction_is_exact(state in random_state(3), qubit in 0usize..3) {
        let exact = tomo::reduced_density(&state, qubit);
        prop_assert!(tomo::ideal_reconstruction(&state, qubit).max_abs_diff(&exact) < 1e-12);
        prop_assert!((exact.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(exact.hermiticity_error() < 1e-12);
    }

    #[test]
    fn bloch_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let r = DensityMatrix1Q::from_bloch([x, y, z]);
        let b = r.bloch();
        prop_assert!((b[0] - x).abs() + (b[1] - y).abs() + (b[2] - z).abs() < 1e-12);
    }

    #[test]
    fn true_factors_survive_reduction(i in 0usize..60, j in 0usize..60) {
        let primes = primes_below(300);
        let (p, q) = (primes[i.min(j)], primes[i.max(j)]);
        prop_assume!(p != q);
        let n = p * q;
        let bits = |x: u64| 64 - x.leading_zeros() as usize;
        let inst = BiPrimeInstance::new(n).unwrap();
        let system = build_system(&inst, Split::new(bits(p), bits(q)));
        for mode in [ReductionMode::Substitution, ReductionMode::PaperCompat] {
            let red = reducer::reduce(&system, mode).unwrap();
            let bit = |v: Var| match v {
                Var::P(k) => ((p >> k) & 1) as i64,
                Var::Q(k) => ((q >> k) & 1) as i64,
                Var::Carry(_) => 0,
            };
            let free: Vec<i64> = red.free_vars.iter().map(|v| bit(*v)).collect();
            let vals = red.lift_bits(&free).unwrap();
            for (v, x) in &vals {
                if !v.is_carry() {
                    prop_assert_eq!(*x, bit(*v), "{} in {}", v, n);
                }
            }
            prop_assert!(red.residuals_hold(&vals));
        }
    }
}

#[test]
fn zero_polynomial_has_flat_spectrum() {
    let z = ZPolynomial::zero(2);
    assert!(z.is_zero());
    assert_eq!(z.diagonal(), vec![0.0; 4]);
    let (e0, states) = hamcomp::ground_states(&z).unwrap();
    assert_eq!(e0, 0.0);
    assert_eq!(states, vec![0, 1, 2, 3]);
}
