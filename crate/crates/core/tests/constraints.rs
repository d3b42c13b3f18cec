//! Pattern enumeration, parameter counting and exclusions on the bundled
//! product geometries, checked against brute-force oracles.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use fellgeom::cli::{bundled, emit_config, parse_config, Model};
use fellgeom::constraints::{
    check_leptoquark_exclusion, enumerate_admissible_patterns, manifold_real_rank,
    object_permutation, select_mass_pattern, solve_reality_constraint, EnumerationOptions,
    ProductParameterization,
};
use fellgeom::fellbundle::{linking_algebra, section_from_matrix, AXIOM_NAMES};
use fellgeom::lincore::{complex_span_dim, random_unitary, CMatrix};
use fellgeom::triple::{check_axioms, CheckStatus, CHECK_FIRST_ORDER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(name: &str, sector: Option<&str>) -> Model {
    let text = bundled(name).unwrap();
    let m = Model::from_config(parse_config(text).unwrap(), text).unwrap();
    match sector {
        Some(s) => m.restrict(s).unwrap(),
        None => m,
    }
}

fn from_text(text: &str) -> Model {
    Model::from_config(parse_config(text).unwrap(), text).unwrap()
}

fn pattern_set(m: &Model) -> BTreeSet<Vec<usize>> {
    enumerate_admissible_patterns(
        &m.geometry,
        m.j.as_ref(),
        None,
        &EnumerationOptions::default(),
    )
    .unwrap()
    .into_iter()
    .map(|p| p.pairing().to_vec())
    .collect()
}

/// Every permutation of `0..n` by Heap's algorithm, kept when involutive,
/// `τ`-equivariant and either fixed-point free or the identity.
fn oracle(tau: &[usize]) -> BTreeSet<Vec<usize>> {
    let n = tau.len();
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    let mut all = vec![a.clone()];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            let k = if i % 2 == 0 { 0 } else { c[i] };
            a.swap(k, i);
            all.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    all.into_iter()
        .filter(|s| (0..n).all(|i| s[s[i]] == i))
        .filter(|s| (0..n).all(|i| s[tau[i]] == tau[s[i]]))
        .filter(|s| {
            let fixed = (0..n).filter(|&i| s[i] == i).count();
            fixed == 0 || fixed == n
        })
        .collect()
}

#[test]
fn pattern_lists_match_permutation_oracle() {
    for (name, sector) in [
        ("quarks_uncoloured", None),
        ("quarks_coloured", None),
        ("one_generation", Some("quark")),
        ("one_generation", Some("lepton")),
    ] {
        let m = model(name, sector);
        let tau = object_permutation(&m.geometry, m.j.as_ref()).unwrap();
        assert_eq!(pattern_set(&m), oracle(&tau), "{name} {sector:?}");
        assert_eq!(pattern_set(&m).len(), 4, "{name} {sector:?}");
    }
}

#[test]
fn pattern_list_independent_of_consistent_j_phases() {
    let text = bundled("quarks_coloured").unwrap();
    let baseline = pattern_set(&from_text(text));
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..3 {
        let mut cfg = parse_config(text).unwrap();
        let spec = cfg.real_structure.as_mut().unwrap().get_mut();
        // J² = +1 holds iff the phase is constant on each orbit {i, π(i)}.
        let mut phases = vec![[0.0, 0.0]; spec.permutation.len()];
        for i in 0..phases.len() {
            let p = spec.permutation[i];
            if p >= i {
                let theta = rng.random_range(0.0..TAU);
                phases[i] = [theta.cos(), theta.sin()];
                phases[p] = phases[i];
            }
        }
        spec.phases = phases;
        let emitted = emit_config(&cfg).unwrap();
        let m = from_text(&emitted);
        assert!(m.j.as_ref().unwrap().j_squared_residual() < 1e-12);
        assert_eq!(pattern_set(&m), baseline);
    }
}

#[test]
fn mass_pattern_counts_survive_a_change_of_basis() {
    let m = model("one_generation", Some("quark"));
    let patterns =
        enumerate_admissible_patterns(&m.geometry, m.j.as_ref(), None, &Default::default())
            .unwrap();
    let signs = m
        .grading
        .as_ref()
        .and_then(|g| g.object_signs(&m.geometry.offsets(), m.geometry.dims()));
    let sel = select_mass_pattern(&patterns, &m.roles, signs.as_deref()).unwrap();
    let bundle = m.product_bundle().unwrap();
    let param = ProductParameterization::new(&bundle, &sel.chosen, m.j.as_ref().unwrap()).unwrap();
    assert_eq!(param.naive_param_count(), 11);

    let plain = manifold_real_rank(&param, 0, 5, None).unwrap();
    assert_eq!(plain, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..3 {
        let w = random_unitary(&mut rng, param.matrix_dim());
        assert_eq!(
            manifold_real_rank(&param, seed, 5, Some(&w)).unwrap(),
            plain
        );
    }
}

#[test]
fn witnesses_are_real_sections() {
    // Generic witnesses only solve D = D* = J D J^-1. Without colour they
    // also satisfy first order; with colour a generic factor on the opposite
    // side does not commute with the colour action and first order fails.
    for (name, sector, first_order) in [
        ("quarks_uncoloured", None, true),
        ("one_generation", Some("quark"), false),
    ] {
        let m = model(name, sector);
        let j = m.j.as_ref().unwrap();
        let patterns =
            enumerate_admissible_patterns(&m.geometry, Some(j), None, &Default::default()).unwrap();
        let signs = m
            .grading
            .as_ref()
            .and_then(|g| g.object_signs(&m.geometry.offsets(), m.geometry.dims()));
        let sel = select_mass_pattern(&patterns, &m.roles, signs.as_deref()).unwrap();
        let sol = solve_reality_constraint(&m.product_bundle().unwrap(), &sel.chosen, j, 2, 1e-10)
            .unwrap();
        assert!(sol.witness_residual < 1e-10);

        let link = linking_algebra(&m.geometry);
        let triple = m.triple().unwrap();
        for w in &sol.witnesses {
            assert!(link.contains(w));
            let section = section_from_matrix(&m.geometry, w, 1e-10).expect("one block per row");
            assert_eq!(section.pairing(), sel.chosen.pairing());
            let report = check_axioms(&triple.with_dirac(w.clone()).unwrap(), 50, 9, 1e-10);
            for c in &report.checks {
                let expect_pass = c.name != CHECK_FIRST_ORDER || first_order;
                assert_eq!(
                    c.status == CheckStatus::Passed,
                    expect_pass,
                    "{name}: {c:?}"
                );
            }
        }
    }
}

#[test]
fn linking_algebra_is_spanned_by_fiber_units() {
    let m = model("quarks_uncoloured", None);
    let link = linking_algebra(&m.geometry);
    let n = link.size();
    let units: Vec<CMatrix> = (0..n * n)
        .map(|k| {
            let mut e = CMatrix::zeros(n, n);
            e[(k / n, k % n)] = 1.0.into();
            e
        })
        .collect();
    assert_eq!(complex_span_dim(&units, 1e-12), link.dimension());
    assert_eq!(link.dimension(), m.geometry.total_dim().pow(2));
}

#[test]
fn leptoquark_layouts_rejected_on_every_product_config() {
    for (name, sector) in [("quarks_coloured", None), ("one_generation", Some("quark"))] {
        let m = model(name, sector);
        let report =
            check_leptoquark_exclusion(&m.geometry, m.j.as_ref().unwrap(), &m.roles, 0, 1e-10)
                .unwrap();
        assert!(report.confirmed(), "{name}");
        assert_eq!(report.layouts.len(), 2);
    }
}

#[test]
fn split_alpha_breaks_first_order() {
    let text = bundled("quarks_uncoloured").unwrap();
    let split = text
        .replace("summands = [2, 2, 1]", "summands = [2, 2, 1, 1]")
        .replace(
            r#"labels = ["a_left", "a_right", "alpha"]"#,
            r#"labels = ["a_left", "a_right", "alpha", "beta"]"#,
        )
        .replace(
            "summand = \"alpha\"\nobject = \"Rb\"",
            "summand = \"beta\"\nobject = \"Rb\"",
        );
    assert_ne!(split, text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split_alpha.toml");
    std::fs::write(&path, &split).unwrap();

    let run = |config: &str| {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = fellgeom::cli::run(["fellgeom", "check", config], &mut out, &mut err);
        (code, String::from_utf8(out).unwrap())
    };
    let (code, out) = run("quarks_uncoloured");
    assert_eq!(code, 0, "{out}");
    let (code, out) = run(path.to_str().unwrap());
    assert_eq!(code, 1);
    assert!(out.contains("failed: triple check first order"), "{out}");
    assert!(out.contains("triple_witness[first order]"), "{out}");
    // The Fell bundle itself is untouched by the algebra.
    for a in 1..=AXIOM_NAMES.len() {
        assert!(out.contains(&format!("fell_axiom[{a}]: pass")), "{out}");
    }
}
