use num_complex::Complex64;
use proptest::prelude::*;
use qchaos::circuit::{build_modular_adder, build_modular_subtractor, build_qft};
use qchaos::classical::{
    cat_step_exact, cat_step_exact_inverse, evolve_cat_exact, Direction, LatticeMask,
};
use qchaos::maps::{
    build_cat_step, prepare_cat_initial, CatMapSpec, LatticeDistribution, DEFAULT_MEMORY_CAP,
};
use qchaos::state::{fidelity, reduce_angle};
use qchaos::{Circuit, GateOp, NoiseSpec, StateVector};

fn state_from(parts: &[(f64, f64)]) -> StateVector {
    let amps: Vec<Complex64> = parts
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn random_state(qubits: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << qubits)
        .prop_filter("non-zero", |v| {
            v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3)
        })
        .prop_map(|v| state_from(&v))
}

fn gate(width: usize) -> impl Strategy<Value = GateOp> {
    let q = 0..width;
    prop_oneof![
        q.clone().prop_map(GateOp::Hadamard),
        q.clone().prop_map(GateOp::Phase),
        (q.clone(), q.clone())
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(control, target)| GateOp::Cnot { control, target }),
        (q.clone(), q.clone(), q.clone())
            .prop_filter("distinct", |(a, b, c)| a != b && b != c && a != c)
            .prop_map(|(a, b, target)| GateOp::Toffoli {
                controls: [a, b],
                target
            }),
        (q.clone(), q.clone(), -4.0f64..4.0)
            .prop_filter("distinct", |(a, b, _)| a != b)
            .prop_map(|(a, b, t)| GateOp::controlled_phase(a, b, t)),
        (q.clone(), -4.0f64..4.0).prop_map(|(a, t)| GateOp::phase_rotation(a, t)),
        (q.clone(), q)
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(a, b)| GateOp::Swap(a, b)),
    ]
}

fn circuit(width: usize) -> impl Strategy<Value = Circuit> {
    prop::collection::vec(gate(width), 0..24).prop_map(move |gs| {
        let mut c = Circuit::new(width);
        for g in gs {
            c.push(g).unwrap();
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuits_preserve_norm_and_invert((c, s) in (circuit(5), random_state(5)), eps in 0.0f64..0.1, seed: u64) {
        let mut ideal = s.clone();
        c.apply_to(&mut ideal).unwrap();
        prop_assert!((ideal.norm_sqr() - 1.0).abs() < 1e-12);
        let mut noisy = s.clone();
        c.apply_noisy_to(&mut noisy, &mut NoiseSpec::new(eps, seed).unwrap()).unwrap();
        prop_assert!((noisy.norm_sqr() - 1.0).abs() < 1e-12);
        c.inverse().apply_to(&mut ideal).unwrap();
        prop_assert!(fidelity(&ideal, &s).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn text_format_round_trips(c in circuit(6)) {
        prop_assert_eq!(Circuit::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn zero_noise_is_exact(c in circuit(4), s in random_state(4), seed: u64) {
        let mut a = s.clone();
        let mut b = s;
        c.apply_to(&mut a).unwrap();
        c.apply_noisy_to(&mut b, &mut NoiseSpec::new(0.0, seed).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn qft_round_trip(s in random_state(6)) {
        let reg: Vec<usize> = (0..6).collect();
        let mut t = s.clone();
        build_qft(&reg, false, true).unwrap().apply_to(&mut t).unwrap();
        build_qft(&reg, true, true).unwrap().apply_to(&mut t).unwrap();
        prop_assert!(fidelity(&s, &t).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn adder_adds(w in 1usize..7, x: u64, y: u64) {
        let m = 1u64 << w;
        let (x, y) = ((x % m) as usize, (y % m) as usize);
        let a: Vec<usize> = (0..w).collect();
        let b: Vec<usize> = (w..2 * w).collect();
        let c: Vec<usize> = (2 * w..3 * w - 1).collect();
        let width = (3 * w - 1).max(2 * w);
        let mut s = StateVector::new_basis_state(width, x | (y << w)).unwrap();
        build_modular_adder(&a, &b, &c, w).unwrap().apply_to(&mut s).unwrap();
        prop_assert!((s.amplitude(x | (((x + y) % m as usize) << w)).re - 1.0).abs() < 1e-12);
        build_modular_subtractor(&a, &b, &c, w).unwrap().apply_to(&mut s).unwrap();
        prop_assert!((s.amplitude(x | (y << w)).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angles_reduce_into_half_open_interval(t in -1e3f64..1e3) {
        let r = reduce_angle(t);
        prop_assert!(r > -std::f64::consts::PI && r <= std::f64::consts::PI);
        let turns = (t - r) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn exact_cat_map_inverts(n in 1usize..8, l in prop::sample::select(vec![1usize, 2, 4]), i: u32, j: u32) {
        let (i, j) = (i as usize % (1 << n), j as usize % (l << n));
        let (a, b) = cat_step_exact(i, j, n, l);
        prop_assert_eq!(cat_step_exact_inverse(a, b, n, l), (i, j));
    }
}

#[test]
fn quantum_cat_map_tracks_the_lattice() {
    let (n, l) = (3, 2);
    let spec = CatMapSpec::new(n, l).unwrap();
    let mask = LatticeMask::from_cells(n, l, [(0, 0), (1, 3), (5, 9), (7, 15)]).unwrap();
    let mut s = prepare_cat_initial(&spec, &mask, DEFAULT_MEMORY_CAP).unwrap();
    let step = build_cat_step(&spec).unwrap();
    for t in 1..=12 {
        step.apply_to(&mut s).unwrap();
        let image = evolve_cat_exact(&mask, t, Direction::Forward);
        let dist = LatticeDistribution::from_state(&s, &spec).unwrap();
        assert!((dist.overlap(&image) - 1.0).abs() < 1e-12, "t = {t}");
    }
}
