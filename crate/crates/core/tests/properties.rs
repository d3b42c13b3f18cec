//! Property tests over random geometries, operators and states.

use fellgeom::cli::{bundled, emit_config, parse_config, Model, BUNDLED};
use fellgeom::constraints::{diagonalize_mass, group_masses, involutions, repeated_block};
use fellgeom::fellbundle::{build_fell_bundle, build_pair_groupoid, verify_fell_axioms};
use fellgeom::lincore::{
    c64, get_block, random_complex, random_hermitian, random_unitary, set_block, CMatrix,
};
use fellgeom::quantize::{
    kms_check, modular_flow, partition_sum, KmsContinuation, PartitionMode, ProductIndex, StateSet,
};
use fellgeom::triple::{
    connes_distance, spectral_action, DistanceOptions, SpectralFunction, StateFunctional,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn two_point(re: f64, im: f64) -> Model {
    let text = bundled("two_point")
        .unwrap()
        .replace("re = [[1.2]]", &format!("re = [[{re:?}]]"))
        .replace("im = [[-0.5]]", &format!("im = [[{im:?}]]"));
    Model::from_config(parse_config(&text).unwrap(), &text).unwrap()
}

/// Block-diagonal unitary with one random block per object.
fn object_unitary(dims: &[usize], r: &mut ChaCha8Rng) -> CMatrix {
    let n: usize = dims.iter().sum();
    let mut u = CMatrix::zeros(n, n);
    let mut o = 0;
    for &k in dims {
        set_block(&mut u, o, o, &random_unitary(r, k));
        o += k;
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fell_axioms_hold_on_pair_bundles(
        dims in prop::collection::vec(1usize..=3, 1..=3),
        seed in any::<u64>(),
    ) {
        let ids: Vec<String> = (0..dims.len()).map(|i| format!("o{i}")).collect();
        let geom = build_fell_bundle(build_pair_groupoid(&ids).unwrap(), &dims).unwrap();
        let report = verify_fell_axioms(&geom, 40, seed, 1e-10);
        prop_assert!(report.all_passed(), "{:?}", report.failed());
    }

    #[test]
    fn spectral_action_is_unitarily_invariant(n in 1usize..=6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = random_hermitian(&mut r, n);
        let u = random_unitary(&mut r, n);
        let ud = &u * &d * u.adjoint();
        for f in [SpectralFunction::square(), SpectralFunction::quartic(), SpectralFunction::GaussianCutoff(1.5)] {
            let a = spectral_action(&d, &f).unwrap();
            let b = spectral_action(&ud, &f).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
        // Tr D² is the squared Frobenius norm.
        let x2 = spectral_action(&d, &SpectralFunction::square()).unwrap();
        prop_assert!((x2 - d.norm_squared()).abs() <= 1e-10 * x2.max(1.0));
    }

    #[test]
    fn two_point_distance_is_inverse_mass(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let m = c64(re, im).norm();
        prop_assume!(m > 0.05);
        let model = two_point(re, im);
        let t = model.triple().unwrap();
        let (p0, p1) = (StateFunctional::basis(2, 0).unwrap(), StateFunctional::basis(2, 1).unwrap());
        let opts = DistanceOptions::default();
        let d01 = connes_distance(&t, &p0, &p1, &opts).unwrap();
        let d10 = connes_distance(&t, &p1, &p0, &opts).unwrap();
        prop_assert!((d01.distance - 1.0 / m).abs() <= 1e-6);
        prop_assert!((d01.distance - d10.distance).abs() <= 1e-6);
    }

    #[test]
    fn partition_sum_matches_frobenius_and_is_invariant(
        dims in prop::collection::vec(1usize..=3, 2..=3),
        seed in any::<u64>(),
    ) {
        let ids: Vec<String> = (0..dims.len()).map(|i| format!("o{i}")).collect();
        let geom = build_fell_bundle(build_pair_groupoid(&ids).unwrap(), &dims).unwrap();
        let n = geom.total_dim();
        let mut r = rng(seed);
        let d = random_hermitian(&mut r, n);
        let states = StateSet::basis(n).unwrap();

        let z = partition_sum(&d, &geom, &states, PartitionMode::Trace, ProductIndex::Single).unwrap();
        prop_assert!((z - n as f64 * d.norm_squared()).abs() <= 1e-10 * z.max(1.0));

        let per = partition_sum(&d, &geom, &states, PartitionMode::Trace, ProductIndex::PerObject).unwrap();
        let d2 = &d * &d;
        let mut oracle = n as f64;
        let mut o = 0;
        for &k in &dims {
            let block = get_block(&d2, o, o, k, k);
            oracle *= (0..k).map(|i| block[(i, i)].re).sum::<f64>();
            o += k;
        }
        prop_assert!((per - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));

        let u = object_unitary(&dims, &mut r);
        let ud = &u * &d * u.adjoint();
        let conj = states.conjugated(&u).unwrap();
        for (mode, product) in [
            (PartitionMode::Trace, ProductIndex::Single),
            (PartitionMode::Trace, ProductIndex::PerObject),
            (PartitionMode::StateWeighted, ProductIndex::Single),
        ] {
            let a = partition_sum(&d, &geom, &states, mode, product).unwrap();
            let b = partition_sum(&ud, &geom, &conj, mode, product).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{mode:?} {product:?}");
        }
    }

    #[test]
    fn diagonal_state_flow_has_closed_form(
        weights in prop::collection::vec(0.05f64..1.0, 2..=4),
        t in -3.0f64..3.0,
    ) {
        let total: f64 = weights.iter().sum();
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let n = p.len();
        let rho = CMatrix::from_diagonal(&p.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>().into());
        let omega = StateFunctional::new(rho, 1e-12).unwrap();
        let flow = modular_flow(&omega, t).unwrap();
        for i in 0..n {
            for k in 0..n {
                let mut e = CMatrix::zeros(n, n);
                e[(i, k)] = c64(1.0, 0.0);
                let got = flow.apply(&e)[(i, k)];
                let want = c64(0.0, t * (p[i] / p[k]).ln()).exp();
                prop_assert!((got - want).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn kms_holds_for_faithful_states(n in 2usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_complex(&mut r, n, n);
        let rho = &x * x.adjoint() + CMatrix::identity(n, n) * c64(0.1, 0.0);
        let rho = &rho / rho.trace();
        let omega = StateFunctional::new(rho, 1e-10).unwrap();
        let ok = kms_check(None, &omega, &KmsContinuation::Modular, 20, seed, 1e-8).unwrap();
        prop_assert!(ok.passed, "residual {}", ok.max_residual);
    }

    #[test]
    fn repeated_blocks_repeat_masses(rows in 1usize..=3, cols in 1usize..=3, k in 1usize..=3, seed in any::<u64>()) {
        let m = random_complex(&mut rng(seed), rows, cols);
        let spec = diagonalize_mass(&repeated_block(&m, k));
        let groups = group_masses(&spec.masses, 1e-9);
        prop_assert_eq!(groups.iter().map(|g| g.1).sum::<usize>(), spec.masses.len());
        for (mass, mult) in groups {
            prop_assert!(mult % k == 0, "mass {mass} multiplicity {mult} with k = {k}");
        }
    }

    #[test]
    fn two_point_configs_round_trip(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let model = two_point(re, im);
        let emitted = emit_config(&model.config).unwrap();
        let again = Model::from_config(parse_config(&emitted).unwrap(), &emitted).unwrap();
        prop_assert_eq!(&again.dirac, &model.dirac);
        prop_assert_eq!(emit_config(&again.config).unwrap(), emitted);
    }
}

#[test]
fn involution_counts_follow_the_telephone_recurrence() {
    // a(n) = a(n-1) + (n-1) a(n-2)
    let mut a = vec![1usize, 1];
    for n in 2..=8 {
        a.push(a[n - 1] + (n - 1) * a[n - 2]);
    }
    for (n, &expected) in a.iter().enumerate() {
        let all = involutions(n);
        assert_eq!(all.len(), expected, "n = {n}");
        assert!(all.iter().all(|s| (0..n).all(|i| s[s[i]] == i)));
    }
}

#[test]
fn bundled_configs_round_trip() {
    for (name, text) in BUNDLED {
        let cfg = parse_config(text).unwrap();
        let emitted = emit_config(&cfg).unwrap();
        let back = parse_config(&emitted).unwrap();
        assert_eq!(emit_config(&back).unwrap(), emitted, "{name}");
        let a = Model::from_config(cfg, text).unwrap();
        let b = Model::from_config(back, &emitted).unwrap();
        assert_eq!(a.dirac, b.dirac, "{name}");
        assert_eq!(a.basis, b.basis, "{name}");
    }
}
