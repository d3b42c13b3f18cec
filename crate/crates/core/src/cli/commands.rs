use std::fs::File;
use std::io::BufWriter;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{load_config_text, parse_config};
use super::model::Model;
use super::{Command, Common, Report};
use crate::constraints::{
    check_leptoquark_exclusion, check_sector_mixing, diagonalize_mass,
    enumerate_admissible_patterns, manifold_real_rank, object_permutation, select_mass_pattern,
    solve_reality_constraint, BlockPattern, Chirality, EnumerationOptions, MassSelection,
    ProductParameterization, RANK_SEEDS,
};
use crate::error::{Error, Result};
use crate::fellbundle::{
    classify_matrix, section_from_matrix, verify_fell_axioms, SectionDiagnostic,
};
use crate::lincore::{
    get_block, random_complex, random_unitary, rel_diff, set_block, unitary_residual, CMatrix,
    Complex64,
};
use crate::quantize::{
    generated_algebra_dims, geodesic_flow, kms_check, metropolis_sample, modular_flow,
    partition_sum, ConfigurationSpace, KmsContinuation, MetropolisOptions, PartitionMode,
    ProductIndex, StateSet,
};
use crate::triple::{
    check_axioms, connes_distance, spectral_action, CheckStatus, DistanceOptions, SpectralFunction,
    StateFunctional,
};

type Outcome = Result<(Report, bool)>;

pub(super) fn execute(cmd: Command) -> Outcome {
    match cmd {
        Command::Check { common, samples } => check(&common, samples),
        Command::Enumerate {
            common,
            graded,
            all_involutions,
        } => enumerate(&common, graded, all_involutions),
        Command::CountParams { common } => count_params(&common),
        Command::Exclusions { common } => exclusions(&common),
        Command::Diagonalize { common } => diagonalize(&common),
        Command::Action {
            common,
            function,
            unitaries,
        } => action(&common, &function, unitaries),
        Command::Distance {
            common,
            from,
            to,
            random_triples,
        } => distance(&common, from.as_deref(), to.as_deref(), random_triples),
        Command::Flow {
            common,
            state,
            time,
        } => flow(&common, state.as_deref(), time),
        Command::Kms {
            common,
            state,
            continuation,
            samples,
        } => kms(&common, state.as_deref(), &continuation, samples),
        Command::Partition {
            common,
            mode,
            product,
            unitaries,
        } => partition(&common, mode.as_deref(), product.as_deref(), unitaries),
        Command::Sample {
            common,
            steps,
            scale,
            function,
            chains,
            burn_in,
            thin,
            out,
        } => {
            let opts = MetropolisOptions {
                steps,
                seed: common.seed,
                proposal_scale: scale,
                thin,
                burn_in,
                chains,
            };
            sample(&common, &function, &opts, out.as_deref())
        }
        Command::GenerateDims { common, samples } => generate_dims(&common, samples),
    }
}

fn load(common: &Common) -> Result<Model> {
    let (_, text) = load_config_text(&common.config)?;
    Model::from_config(parse_config(&text)?, &text)
}

/// Whole model unless `--sector` names one sector.
fn load_scoped(common: &Common) -> Result<Model> {
    let m = load(common)?;
    match common.sector.as_deref() {
        None | Some("all") => Ok(m),
        Some(s) => m.restrict(s),
    }
}

/// Model restricted to `--sector`, the first sector by default.
fn sector_model(model: &Model, common: &Common) -> Result<(String, Model)> {
    match common.sector.as_deref() {
        Some("all") => Ok(("all".into(), model.clone())),
        Some(s) => Ok((s.to_string(), model.restrict(s)?)),
        None => {
            let first = model.sectors().remove(0);
            let m = model.restrict(&first)?;
            Ok((first, m))
        }
    }
}

fn fmt_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn one_based(xs: &[usize]) -> String {
    fmt_list(&xs.iter().map(|x| x + 1).collect::<Vec<_>>())
}

fn header(r: &mut Report, m: &Model) {
    r.kv("objects", m.object_ids().join(" "));
    r.kv("dimension", m.geometry.total_dim());
}

fn status(r: &mut Report, passed: bool) {
    r.kv("status", if passed { "pass" } else { "FAIL" });
}

fn grading_signs(m: &Model) -> Option<Vec<i8>> {
    m.grading
        .as_ref()
        .and_then(|g| g.object_signs(&m.geometry.offsets(), m.geometry.dims()))
}

fn mass_selection(m: &Model, seed: u64, tol: f64) -> Result<(Vec<BlockPattern>, MassSelection)> {
    let opts = EnumerationOptions {
        seed,
        tol,
        ..Default::default()
    };
    let patterns = enumerate_admissible_patterns(&m.geometry, m.j.as_ref(), None, &opts)?;
    let signs = grading_signs(m);
    let sel = select_mass_pattern(&patterns, &m.roles, signs.as_deref())?;
    Ok((patterns, sel))
}

fn check(common: &Common, samples: usize) -> Outcome {
    let m = load_scoped(common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let mut r = Report::new(
        "check",
        &common.config,
        "the ten Fell bundle axioms, the real even spectral triple axioms, and one block per row and column for D",
    );
    header(&mut r, &m);
    r.kv("samples", samples);
    r.kv("seed", common.seed);
    r.kv("tol", tol);
    let mut failures = Vec::new();

    let fell = verify_fell_axioms(&m.geometry, samples, common.seed, tol);
    for a in &fell.axioms {
        r.kv(
            format!("fell_axiom[{}]", a.number),
            format!(
                "{} {} max_residual={:e}",
                if a.passed { "pass" } else { "FAIL" },
                a.name,
                a.max_residual
            ),
        );
        if let Some(w) = &a.witness {
            let arrows: Vec<String> = w
                .arrows
                .iter()
                .map(|x| format!("({},{})", x.range + 1, x.source + 1))
                .collect();
            r.kv(
                format!("fell_witness[{}]", a.number),
                format!(
                    "sample {} arrows {} residual={:e} {}",
                    w.sample,
                    arrows.join(" "),
                    w.residual,
                    w.detail
                ),
            );
            failures.push(format!("fell axiom {} ({})", a.number, a.name));
        }
    }

    let t = m.triple()?;
    let triple = check_axioms(&t, samples, common.seed, tol);
    for c in &triple.checks {
        r.kv(
            format!("triple_check[{}]", c.name),
            format!("{} max_residual={:e}", c.status.as_str(), c.max_residual),
        );
        if let Some(w) = &c.witness {
            r.kv(format!("triple_witness[{}]", c.name), w);
        }
        if c.status == CheckStatus::Failed {
            failures.push(format!("triple check {}", c.name));
        }
    }

    let verdict = classify_matrix(&m.geometry, &m.dirac, m.j.as_ref(), tol)?;
    r.kv(
        "dirac_section",
        if verdict.accepted {
            "accepted"
        } else {
            "rejected"
        },
    );
    for (k, d) in verdict.diagnostics.iter().enumerate() {
        r.kv(format!("section_diagnostic[{}]", k + 1), d);
    }
    if !verdict.accepted {
        failures.push("dirac section".into());
    }
    r.kv(
        "failed",
        if failures.is_empty() {
            "none".to_string()
        } else {
            failures.join("; ")
        },
    );
    let passed = failures.is_empty();
    status(&mut r, passed);
    Ok((r, passed))
}

fn enumerate(common: &Common, graded: bool, all_involutions: bool) -> Outcome {
    let model = load(common)?;
    let (sector, m) = sector_model(&model, common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let mut r = Report::new(
        "enumerate",
        &common.config,
        "block patterns admissible for x = x* = J x* J^-1, one block per row and column",
    );
    r.kv("sector", &sector);
    header(&mut r, &m);
    let tau = object_permutation(&m.geometry, m.j.as_ref())?;
    r.kv("object_permutation", one_based(&tau).replace(',', " "));
    r.kv("grading_filter", if graded { "on" } else { "off" });
    r.kv("homogeneous", !all_involutions);
    let grading = if graded {
        Some(
            m.grading
                .as_ref()
                .ok_or_else(|| Error::Config("--graded needs a [grading] in the config".into()))?,
        )
    } else {
        None
    };
    let opts = EnumerationOptions {
        homogeneous: !all_involutions,
        seed: common.seed,
        tol,
    };
    let patterns = enumerate_admissible_patterns(&m.geometry, m.j.as_ref(), grading, &opts)?;
    r.kv("patterns", patterns.len());
    for (k, p) in patterns.iter().enumerate() {
        r.kv(
            format!("pattern[{}]", k + 1),
            format!("{} kind={}", p.pairing_string(), p.kind(&m.roles).name()),
        );
        for (row, line) in p.render().lines().enumerate() {
            r.kv(format!("pattern[{}].row[{}]", k + 1, row + 1), line);
        }
    }
    let has_chirality = m.roles.iter().any(|x| x.chirality != Chirality::Neutral);
    if has_chirality {
        let signs = grading_signs(&m);
        match select_mass_pattern(&patterns, &m.roles, signs.as_deref()) {
            Ok(sel) => {
                r.kv("mass_pattern", sel.chosen.pairing_string());
                for (k, (p, why)) in sel.rejected.iter().enumerate() {
                    r.kv(
                        format!("rejected[{}]", k + 1),
                        format!("{} {why}", p.pairing_string()),
                    );
                }
            }
            Err(Error::NoChiralityConnectingPattern) => r.kv("mass_pattern", "none"),
            Err(e) => return Err(e),
        }
    }
    let passed = !patterns.is_empty();
    status(&mut r, passed);
    Ok((r, passed))
}

fn count_params(common: &Common) -> Outcome {
    let model = load(common)?;
    let (sector, m) = sector_model(&model, common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let j =
        m.j.as_ref()
            .ok_or_else(|| Error::Config("count-params needs a [real_structure]".into()))?;
    let bundle = m
        .product_bundle()
        .map_err(|e| Error::Config(e.to_string()))?;
    let (_, sel) = mass_selection(&m, common.seed, tol)?;
    let sol = solve_reality_constraint(&bundle, &sel.chosen, j, common.seed, tol)?;

    let mut r = Report::new(
        "count-params",
        &common.config,
        "free parameters of the mass pattern on a product bundle after imposing D = D* = J D J^-1",
    );
    r.kv("sector", &sector);
    header(&mut r, &m);
    r.kv("embedding", m.embedding.name());
    r.kv("pattern", sol.pattern.pairing_string());
    r.kv("equations", sol.equations.len());
    for (k, eq) in sol.equations.iter().enumerate() {
        r.kv(format!("equation[{}]", k + 1), eq);
    }
    r.kv("naive_param_count", sol.naive_param_count);
    r.kv("real_rank", sol.real_rank);
    r.kv("manifold_dim", sol.manifold_dim);
    r.kv("rank_seeds", RANK_SEEDS);
    r.kv("witness_residual", format!("{:e}", sol.witness_residual));

    let param = ProductParameterization::new(&bundle, &sol.pattern, j)?;
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let w = random_unitary(&mut rng, m.geometry.total_dim());
    let rotated = manifold_real_rank(&param, common.seed, RANK_SEEDS, Some(&w))? / 2;
    r.kv("manifold_dim_after_basis_change", rotated);
    let passed = sol.witness_residual <= 1e-6 && rotated == sol.manifold_dim;
    status(&mut r, passed);
    Ok((r, passed))
}

fn exclusions(common: &Common) -> Outcome {
    let model = load(common)?;
    let (sector, m) = sector_model(&model, common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let mut r = Report::new(
        "exclusions",
        &common.config,
        "leptoquark blocks and quark-lepton mixing are incompatible with one block per row and column",
    );
    r.kv("sector", &sector);
    header(&mut r, &m);
    let mut passed = true;

    match &m.j {
        None => r.kv("leptoquark_exclusion", "skipped (no real structure)"),
        Some(j) => match check_leptoquark_exclusion(&m.geometry, j, &m.roles, common.seed, tol) {
            Ok(rep) => {
                r.kv("mass_pattern", rep.mass_pattern.pairing_string());
                r.kv(
                    "mass_pattern_verdict",
                    if rep.mass_pattern_verdict.accepted {
                        "accepted"
                    } else {
                        "rejected"
                    },
                );
                for l in &rep.layouts {
                    let key = l.signature.name();
                    let pats: Vec<String> = l.patterns.iter().map(|p| p.pairing_string()).collect();
                    r.kv(format!("layout[{key}].patterns"), pats.join(" + "));
                    r.kv(
                        format!("layout[{key}].verdict"),
                        if l.verdict.accepted {
                            "accepted"
                        } else {
                            "rejected"
                        },
                    );
                    let reasons: Vec<&str> = l
                        .verdict
                        .diagnostics
                        .iter()
                        .map(SectionDiagnostic::reason)
                        .collect();
                    let mut uniq: Vec<&str> = Vec::new();
                    for x in reasons {
                        if !uniq.contains(&x) {
                            uniq.push(x);
                        }
                    }
                    r.kv(format!("layout[{key}].reason"), uniq.join("; "));
                    r.kv(
                        format!("layout[{key}].offending_rows"),
                        one_based(&l.offending_rows),
                    );
                    r.kv(format!("layout[{key}].self_adjoint"), l.self_adjoint);
                    r.kv(format!("layout[{key}].real"), l.real);
                    for (s, ok) in &l.anticommutes {
                        r.kv(format!("layout[{key}].anticommutes[{}]", s.name()), ok);
                    }
                }
                let ok = rep.confirmed();
                passed &= ok;
                r.kv("leptoquark_exclusion", if ok { "pass" } else { "FAIL" });
            }
            Err(e) => {
                passed = false;
                r.kv("leptoquark_exclusion", format!("FAIL ({e})"));
            }
        },
    }

    let mut distinct: Vec<&String> = Vec::new();
    for s in &model.basis_sectors {
        if !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    match (&model.j, distinct.len()) {
        (Some(j), k) if k > 1 => {
            let mix = check_sector_mixing(
                &model.geometry,
                j,
                &model.roles,
                &model.basis_sectors,
                common.seed,
                tol,
            )?;
            r.kv("mixing.sectors", mix.sectors.join(","));
            r.kv("mixing.involutions_checked", mix.involutions_checked);
            r.kv("mixing.mass_bearing", mix.mass_bearing.len());
            r.kv("mixing.mixing", mix.mixing.len());
            for (k, p) in mix.mixing.iter().enumerate() {
                r.kv(format!("mixing.pattern[{}]", k + 1), p.pairing_string());
            }
            let ok = mix.passed();
            passed &= ok;
            r.kv("mixing_exclusion", if ok { "pass" } else { "FAIL" });
        }
        _ => r.kv("mixing_exclusion", "skipped (single sector)"),
    }
    status(&mut r, passed);
    Ok((r, passed))
}

fn diagonalize(common: &Common) -> Outcome {
    let model = load(common)?;
    let (sector, m) = sector_model(&model, common)?;
    let find = |c: Chirality| {
        m.roles
            .iter()
            .position(|x| x.chirality == c && !x.conjugate)
            .ok_or_else(|| {
                Error::Config(format!(
                    "sector {sector:?} has no {} particle object",
                    c.name()
                ))
            })
    };
    let (left, right) = (find(Chirality::Left)?, find(Chirality::Right)?);
    let offsets = m.geometry.offsets();
    let dims = m.geometry.dims();
    let block = get_block(
        &m.dirac,
        offsets[left],
        offsets[right],
        dims[left],
        dims[right],
    );
    let spec = diagonalize_mass(&block);

    let mut r = Report::new(
        "diagonalize",
        &common.config,
        "singular values of the left-right mass block and their multiplicities",
    );
    r.kv("sector", &sector);
    let ids = m.object_ids();
    r.kv("block", format!("rows {} cols {}", ids[left], ids[right]));
    r.kv("shape", format!("{}x{}", dims[left], dims[right]));
    r.kv("masses", fmt_list(&spec.masses).replace(',', " "));
    for (k, (mass, mult)) in spec.multiplicities.iter().enumerate() {
        r.kv(
            format!("mass_group[{}]", k + 1),
            format!("{mass} multiplicity {mult}"),
        );
    }
    r.kv("nonzero_masses", spec.nonzero_count(1e-10));
    let rot = spec.rotated(&block);
    let mut diag = CMatrix::zeros(rot.nrows(), rot.ncols());
    for k in 0..rot.nrows().min(rot.ncols()) {
        diag[(k, k)] = Complex64::new(spec.masses[k], 0.0);
    }
    let residual = rel_diff(&rot, &diag);
    r.kv("rotation_residual", format!("{residual:e}"));
    r.kv(
        "unitarity_residual",
        format!(
            "{:e}",
            unitary_residual(&spec.u).max(unitary_residual(&spec.v))
        ),
    );
    let passed = residual <= 1e-10;
    status(&mut r, passed);
    Ok((r, passed))
}

fn action(common: &Common, functions: &str, unitaries: usize) -> Outcome {
    let m = load_scoped(common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let fs: Vec<(String, SpectralFunction)> = split_functions(functions)
        .into_iter()
        .map(|s| s.parse().map(|f| (s.clone(), f)))
        .collect::<Result<_>>()?;
    if fs.is_empty() {
        return Err(Error::Config("no spectral function given".into()));
    }
    let mut r = Report::new(
        "action",
        &common.config,
        "spectral action Tr f(D) and its invariance under unitary conjugation",
    );
    header(&mut r, &m);
    r.kv("unitaries", unitaries);
    let n = m.geometry.total_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let us: Vec<CMatrix> = (0..unitaries)
        .map(|_| random_unitary(&mut rng, n))
        .collect();
    let mut passed = true;
    for (name, f) in &fs {
        let s = spectral_action(&m.dirac, f)?;
        let mut worst: f64 = 0.0;
        for u in &us {
            let d = u * &m.dirac * u.adjoint();
            let d = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
            let su = spectral_action(&d, f)?;
            worst = worst.max((su - s).abs() / 1f64.max(s.abs()));
        }
        r.kv(format!("action[{name}]"), s);
        r.kv(format!("invariance_residual[{name}]"), format!("{worst:e}"));
        passed &= worst <= tol;
    }
    status(&mut r, passed);
    Ok((r, passed))
}

/// Split `x2,poly:1,2,x4` into functions, keeping `poly` coefficients together.
fn split_functions(s: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let numeric = tok.parse::<f64>().is_ok();
        match out.last_mut() {
            Some(last) if numeric && last.starts_with("poly:") => {
                last.push(',');
                last.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
    }
    out
}

fn find_state<'a>(states: &'a StateSet, name: &str) -> Result<&'a StateFunctional> {
    states
        .states()
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, s)| s)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown state {name:?} (declared: {})",
                states.names().join(", ")
            ))
        })
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Result<StateFunctional> {
    let g = random_complex(rng, n, n);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    StateFunctional::new(rho / tr, 1e-9)
}

fn distance(common: &Common, from: Option<&str>, to: Option<&str>, triples: usize) -> Outcome {
    let m = load_scoped(common)?;
    let tol = common.tol.unwrap_or(1e-6);
    let names = m.states.names();
    if names.len() < 2 && (from.is_none() || to.is_none()) {
        return Err(Error::Config("distance needs two states".into()));
    }
    let a = from.unwrap_or(names[0]).to_string();
    let b = to.unwrap_or(names[1]).to_string();
    let t = m.triple()?;
    let opts = DistanceOptions {
        seed: common.seed,
        ..Default::default()
    };
    let res = connes_distance(
        &t,
        find_state(&m.states, &a)?,
        find_state(&m.states, &b)?,
        &opts,
    )?;

    let mut r = Report::new(
        "distance",
        &common.config,
        "spectral distance sup |w1(a) - w2(a)| over self-adjoint a with ||[D, a]|| <= 1",
    );
    header(&mut r, &m);
    r.kv("from", &a);
    r.kv("to", &b);
    r.kv("distance", res.distance);
    r.kv("unbounded", res.unbounded);
    r.kv("converged", res.converged);
    r.kv(
        "agreeing_restarts",
        format!("{}/{}", res.agreeing_restarts, res.restarts),
    );
    let mut passed = res.converged;

    if triples > 0 {
        let n = m.geometry.total_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed ^ 0x5eed);
        let (mut sym, mut tri): (f64, f64) = (0.0, 0.0);
        let d = |x: &StateFunctional, y: &StateFunctional| -> Result<f64> {
            Ok(connes_distance(&t, x, y, &opts)?.distance)
        };
        for _ in 0..triples {
            let (x, y, z) = (
                random_state(&mut rng, n)?,
                random_state(&mut rng, n)?,
                random_state(&mut rng, n)?,
            );
            let (xy, yx) = (d(&x, &y)?, d(&y, &x)?);
            let (xz, zy) = (d(&x, &z)?, d(&z, &y)?);
            if xy.is_finite() && yx.is_finite() {
                sym = sym.max((xy - yx).abs() / 1f64.max(xy));
            }
            if xy.is_finite() && xz.is_finite() && zy.is_finite() {
                tri = tri.max((xy - xz - zy).max(0.0) / 1f64.max(xy));
            }
        }
        r.kv("random_triples", triples);
        r.kv("symmetry_violation", format!("{sym:e}"));
        r.kv("triangle_violation", format!("{tri:e}"));
        passed &= sym <= tol && tri <= tol;
    }
    status(&mut r, passed);
    Ok((r, passed))
}

/// Named state, or the first faithful declared state.
fn pick_state(m: &Model, name: Option<&str>) -> Result<Option<(String, StateFunctional)>> {
    if let Some(n) = name {
        return Ok(Some((n.to_string(), find_state(&m.states, n)?.clone())));
    }
    Ok(m.states
        .states()
        .iter()
        .find(|(_, s)| {
            crate::lincore::eigenvalues_hermitian(s.density())
                .first()
                .is_some_and(|&l| l > 1e-14)
        })
        .cloned())
}

fn flow(common: &Common, state: Option<&str>, t: f64) -> Outcome {
    let m = load_scoped(common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let mut r = Report::new(
        "flow",
        &common.config,
        "geodesic flow exp(it|D|) and the modular flow of a faithful state",
    );
    header(&mut r, &m);
    r.kv("time", t);
    let u = geodesic_flow(&m.dirac, t)?;
    let unit = unitary_residual(&u);
    let s = 0.5 * t + 0.25;
    let law = rel_diff(
        &(&u * geodesic_flow(&m.dirac, s)?),
        &geodesic_flow(&m.dirac, t + s)?,
    );
    r.kv("geodesic_unitarity_residual", format!("{unit:e}"));
    r.kv("geodesic_group_law_residual", format!("{law:e}"));
    let mut passed = unit <= tol && law <= tol;

    match pick_state(&m, state)? {
        None => r.kv("modular", "skipped (no faithful state declared)"),
        Some((name, omega)) => {
            let f = modular_flow(&omega, t)?;
            r.kv("modular_state", &name);
            r.kv("modular_trivial", f.is_trivial());
            let n = omega.dimension();
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let fs = modular_flow(&omega, s)?;
            let fts = modular_flow(&omega, t + s)?;
            let (mut group, mut inv): (f64, f64) = (0.0, 0.0);
            for _ in 0..20 {
                let a = random_complex(&mut rng, n, n);
                group = group.max(rel_diff(&f.apply(&fs.apply(&a)), &fts.apply(&a)));
                let (x, y) = (omega.evaluate(&f.apply(&a))?, omega.evaluate(&a)?);
                inv = inv.max((x - y).norm() / 1f64.max(y.norm()));
            }
            r.kv("modular_group_law_residual", format!("{group:e}"));
            r.kv("modular_invariance_residual", format!("{inv:e}"));
            passed &= group <= tol && inv <= tol;
            if n <= 8 {
                for i in 0..n {
                    for k in 0..n {
                        let mut e = CMatrix::zeros(n, n);
                        e[(i, k)] = Complex64::new(1.0, 0.0);
                        let z = f.apply(&e)[(i, k)];
                        r.kv(
                            format!("modular_unit_factor[{i},{k}]"),
                            format!("{} {}", z.re, z.im),
                        );
                    }
                }
            }
        }
    }
    status(&mut r, passed);
    Ok((r, passed))
}

fn kms(common: &Common, state: Option<&str>, continuation: &str, samples: usize) -> Outcome {
    let m = load_scoped(common)?;
    let tol = common.tol.unwrap_or(1e-8);
    let cont = match continuation {
        "modular" => KmsContinuation::Modular,
        "inverted" => KmsContinuation::inverted(),
        other => {
            return Err(Error::Config(format!(
                "unknown continuation {other:?} (expected modular or inverted)"
            )))
        }
    };
    let (name, omega) =
        pick_state(&m, state)?.ok_or_else(|| Error::Config("no faithful state declared".into()))?;
    let rep = kms_check(Some(&m.rep), &omega, &cont, samples, common.seed, tol)?;
    let mut r = Report::new(
        "kms",
        &common.config,
        "KMS identity w(ab) = w(b s(a)) for a state and its modular continuation",
    );
    header(&mut r, &m);
    r.kv("state", &name);
    r.kv("continuation", continuation);
    r.kv("samples", rep.samples);
    r.kv("tol", tol);
    r.kv("kms_max_residual", format!("{:e}", rep.max_residual));
    r.kv(
        "kms_first_violation",
        rep.first_violation
            .map_or("none".to_string(), |s| s.to_string()),
    );
    r.kv("kms", if rep.passed { "pass" } else { "FAIL" });
    status(&mut r, rep.passed);
    Ok((r, rep.passed))
}

/// Direct sum of random unitaries, one per object.
fn block_unitary(rng: &mut ChaCha8Rng, dims: &[usize], offsets: &[usize]) -> CMatrix {
    let n: usize = dims.iter().sum();
    let mut u = CMatrix::zeros(n, n);
    for (&k, &o) in dims.iter().zip(offsets) {
        set_block(&mut u, o, o, &random_unitary(rng, k));
    }
    u
}

/// Entry-wise evaluation of the partition sum, independent of the matrix
/// products used by the library.
fn partition_brute_force(
    d: &CMatrix,
    dims: &[usize],
    offsets: &[usize],
    states: &StateSet,
    mode: PartitionMode,
    product: ProductIndex,
) -> f64 {
    let n = d.nrows();
    // (D²)_{ab} = Σ_c D_{ac} D_{cb}
    let d2 = |a: usize, b: usize| -> Complex64 { (0..n).map(|c| d[(a, c)] * d[(c, b)]).sum() };
    states
        .states()
        .iter()
        .map(|(_, s)| match (mode, product) {
            (PartitionMode::Trace, ProductIndex::Single) => (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| d[(a, b)].norm_sqr())
                .sum(),
            (PartitionMode::Trace, ProductIndex::PerObject) => dims
                .iter()
                .zip(offsets)
                .map(|(&k, &o)| {
                    (o..o + k)
                        .map(|a| (0..n).map(|b| d[(a, b)].norm_sqr()).sum::<f64>())
                        .sum::<f64>()
                })
                .product(),
            (PartitionMode::StateWeighted, _) => {
                let rho = s.density();
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        acc += rho[(a, b)] * d2(b, a);
                    }
                }
                acc.re
            }
        })
        .sum()
}

fn partition(
    common: &Common,
    mode: Option<&str>,
    product: Option<&str>,
    unitaries: usize,
) -> Outcome {
    let m = load_scoped(common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let mode: PartitionMode = match mode {
        Some(s) => s.parse()?,
        None => m.partition_mode,
    };
    let product: ProductIndex = match product {
        Some(s) => s.parse()?,
        None => m.partition_product,
    };
    let z = partition_sum(&m.dirac, &m.geometry, &m.states, mode, product)?;
    let dims = m.geometry.dims();
    let offsets = m.geometry.offsets();
    let brute = partition_brute_force(&m.dirac, dims, &offsets, &m.states, mode, product);

    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..unitaries {
        let u = block_unitary(&mut rng, dims, &offsets);
        let d = &u * &m.dirac * u.adjoint();
        let zu = partition_sum(&d, &m.geometry, &m.states.conjugated(&u)?, mode, product)?;
        worst = worst.max((zu - z).abs() / 1f64.max(z.abs()));
    }

    let mut r = Report::new(
        "partition",
        &common.config,
        "partition sum over declared states of products of traces of squared Dirac sections",
    );
    header(&mut r, &m);
    r.kv("states", m.states.names().join(" "));
    r.kv("mode", mode.name());
    r.kv("product", product.name());
    r.kv("z", z);
    r.kv("brute_force", brute);
    let brute_res = (z - brute).abs() / 1f64.max(brute.abs());
    r.kv("brute_force_residual", format!("{brute_res:e}"));
    r.kv("unitaries", unitaries);
    r.kv("invariance_residual", format!("{worst:e}"));
    let passed = brute_res <= tol && worst <= tol;
    status(&mut r, passed);
    Ok((r, passed))
}

/// Sampling space of a (sector) model: the product parameterisation of the
/// mass pattern when the model is a product bundle with a real structure,
/// otherwise the linear space of sections on the block pattern of D.
fn configuration_space(m: &Model, seed: u64, tol: f64) -> Result<(ConfigurationSpace, String)> {
    if let (Some(_), Some(j)) = (&m.factors, &m.j) {
        let bundle = m.product_bundle()?;
        let (_, sel) = mass_selection(m, seed, tol)?;
        let p = ProductParameterization::new(&bundle, &sel.chosen, j)?;
        return Ok((
            ConfigurationSpace::Product(p),
            format!("product {}", sel.chosen.pairing_string()),
        ));
    }
    let section = section_from_matrix(&m.geometry, &m.dirac, tol).map_err(|v| {
        Error::InconsistentPattern(format!(
            "D is not a section, so it fixes no pattern: {}",
            v.diagnostics
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        ))
    })?;
    let pattern = BlockPattern::new(section.pairing().to_vec())?;
    let label = format!("linear {}", pattern.pairing_string());
    Ok((
        ConfigurationSpace::linear(&m.geometry, &pattern, m.j.as_ref())?,
        label,
    ))
}

fn sample(
    common: &Common,
    function: &str,
    opts: &MetropolisOptions,
    out: Option<&std::path::Path>,
) -> Outcome {
    let model = load(common)?;
    let (sector, m) = sector_model(&model, common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let f: SpectralFunction = function.parse()?;
    let (space, label) = configuration_space(&m, common.seed, tol)?;
    let ens = metropolis_sample(&space, &f, function, opts)?;

    let mut r = Report::new(
        "sample",
        &common.config,
        "Metropolis ensemble of Dirac sections with weight exp(-Tr f(D))",
    );
    r.kv("sector", &sector);
    header(&mut r, &m);
    r.kv("space", &label);
    r.kv("coordinates", space.dimension());
    r.kv("measure", space.measure_description());
    r.kv("function", function);
    r.kv("seed", opts.seed);
    r.kv("steps", opts.steps);
    r.kv("chains", opts.chains.max(1));
    r.kv("samples", ens.samples.len());
    r.kv("acceptance_rate", ens.acceptance_rate());
    let mean = ens.samples.iter().map(|s| s.action).sum::<f64>() / ens.samples.len().max(1) as f64;
    r.kv("mean_action", mean);
    if let Some(path) = out {
        let file = File::create(path)
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
        ens.write_csv(
            BufWriter::new(file),
            &[
                ("config", common.config.clone()),
                ("sector", sector),
                ("space", label),
            ],
        )?;
        r.kv("csv", path.display());
    }
    status(&mut r, true);
    Ok((r, true))
}

fn generate_dims(common: &Common, samples: usize) -> Outcome {
    let model = load(common)?;
    let (sector, m) = sector_model(&model, common)?;
    let tol = common.tol.unwrap_or(1e-10);
    let (space, label) = configuration_space(&m, common.seed, tol)?;
    let a = generated_algebra_dims(&space, samples, common.seed)?;
    let b = generated_algebra_dims(&space, 2 * samples, common.seed.wrapping_add(1))?;
    let mut r = Report::new(
        "generate-dims",
        &common.config,
        "dimensions of the algebras generated by sampled Dirac sections and by their pairwise products",
    );
    r.kv("sector", &sector);
    header(&mut r, &m);
    r.kv("space", &label);
    r.kv("samples", a.samples);
    r.kv("full", a.full);
    r.kv("units", a.units);
    r.kv("expected_full", a.expected_full);
    r.kv("expected_units", a.expected_units);
    r.kv("samples_doubled", b.samples);
    r.kv("full_doubled", b.full);
    r.kv("units_doubled", b.units);
    let stable = a.full == b.full && a.units == b.units;
    r.kv("stable", stable);
    r.kv("rank_deficient", a.rank_deficient());
    status(&mut r, stable);
    Ok((r, stable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincore::random_hermitian;

    #[test]
    fn function_lists() {
        assert_eq!(
            split_functions("x2, poly:1,2,3,x4"),
            vec!["x2", "poly:1,2,3", "x4"]
        );
        assert_eq!(split_functions("cutoff:2"), vec!["cutoff:2"]);
    }

    #[test]
    fn brute_force_matches_single_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_hermitian(&mut rng, 3);
        let states = StateSet::basis(3).unwrap();
        let b = partition_brute_force(
            &d,
            &[1, 2],
            &[0, 1],
            &states,
            PartitionMode::Trace,
            ProductIndex::Single,
        );
        assert!((b - 3.0 * (&d * &d).trace().re).abs() < 1e-12);
    }
}
