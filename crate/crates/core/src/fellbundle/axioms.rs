use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::bundle::{FellBundleGeometry, FiberElement};
use super::groupoid::Arrow;
use crate::lincore::{eigenvalues_hermitian, hermitian_residual, rel_diff, CMatrix, Complex64};

pub const AXIOM_NAMES: [&str; 10] = [
    "product covers composition",
    "bilinear product",
    "associative product",
    "submultiplicative norm",
    "involution covers inversion",
    "conjugate-linear involution",
    "involutive involution",
    "anti-multiplicative involution",
    "C*-norm identity",
    "positivity of e*e",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomWitness {
    pub sample: usize,
    pub arrows: Vec<Arrow>,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomResult {
    pub number: usize,
    pub name: &'static str,
    pub passed: bool,
    pub max_residual: f64,
    pub witness: Option<AxiomWitness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FellAxiomReport {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub axioms: Vec<AxiomResult>,
}

impl FellAxiomReport {
    pub fn all_passed(&self) -> bool {
        self.axioms.iter().all(|a| a.passed)
    }

    pub fn failed(&self) -> Vec<&AxiomResult> {
        self.axioms.iter().filter(|a| !a.passed).collect()
    }
}

struct Check {
    residual: f64,
    passed: bool,
    arrows: Vec<Arrow>,
    detail: String,
}

fn scalar<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn shape_check(geom: &FellBundleGeometry, e: &FiberElement, expected: Arrow) -> f64 {
    if e.arrow == expected && e.matrix.shape() == geom.fiber_shape(expected) {
        0.0
    } else {
        f64::INFINITY
    }
}

fn run_sample(geom: &FellBundleGeometry, seed: u64, sample: usize, tol: f64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    let n = geom.len();
    let (i, j, k, l) = (
        rng.random_range(0..n),
        rng.random_range(0..n),
        rng.random_range(0..n),
        rng.random_range(0..n),
    );
    let (ij, jk, kl) = (Arrow::new(i, j), Arrow::new(j, k), Arrow::new(k, l));
    let e1 = geom.random_element(&mut rng, ij);
    let e1b = geom.random_element(&mut rng, ij);
    let e2 = geom.random_element(&mut rng, jk);
    let e2b = geom.random_element(&mut rng, jk);
    let e3 = geom.random_element(&mut rng, kl);
    let (alpha, beta) = (scalar(&mut rng), scalar(&mut rng));

    let mul = |a: &FiberElement, b: &FiberElement| {
        geom.multiply(a, b).expect("composable by construction")
    };
    let star = |a: &FiberElement| geom.involution(a);
    let lin = |a: &FiberElement, b: &FiberElement, x: Complex64, y: Complex64| FiberElement {
        arrow: a.arrow,
        matrix: &a.matrix * x + &b.matrix * y,
    };
    let exact = |residual: f64, arrows: Vec<Arrow>, detail: &str| Check {
        residual,
        passed: residual <= tol,
        arrows,
        detail: detail.to_string(),
    };

    let e12 = mul(&e1, &e2);
    let mut out = Vec::with_capacity(10);

    // 1
    out.push(exact(
        shape_check(geom, &e12, Arrow::new(i, k)),
        vec![ij, jk],
        "p(e1 e2) != p(e1) p(e2)",
    ));

    // 2
    let left = rel_diff(
        &mul(&lin(&e1, &e1b, alpha, beta), &e2).matrix,
        &(&e12.matrix * alpha + &mul(&e1b, &e2).matrix * beta),
    );
    let right = rel_diff(
        &mul(&e1, &lin(&e2, &e2b, alpha, beta)).matrix,
        &(&e12.matrix * alpha + &mul(&e1, &e2b).matrix * beta),
    );
    out.push(exact(left.max(right), vec![ij, jk], "product not bilinear"));

    // 3
    let assoc = rel_diff(&mul(&e12, &e3).matrix, &mul(&e1, &mul(&e2, &e3)).matrix);
    out.push(exact(assoc, vec![ij, jk, kl], "(e1 e2) e3 != e1 (e2 e3)"));

    // 4
    let (n12, n1, n2) = (e12.norm(), e1.norm(), e2.norm());
    let excess = ((n12 - n1 * n2) / 1f64.max(n1 * n2)).max(0.0);
    out.push(exact(excess, vec![ij, jk], "||e1 e2|| > ||e1|| ||e2||"));

    // 5
    let s1 = star(&e1);
    out.push(exact(
        shape_check(geom, &s1, ij.inverse()),
        vec![ij],
        "p(e*) != p(e)*",
    ));

    // 6
    let conj_lin = rel_diff(
        &star(&lin(&e1, &e1b, alpha, beta)).matrix,
        &(&s1.matrix * alpha.conj() + &star(&e1b).matrix * beta.conj()),
    );
    out.push(exact(
        conj_lin,
        vec![ij],
        "(a e + b f)* != conj(a) e* + conj(b) f*",
    ));

    // 7
    let inv = rel_diff(&star(&s1).matrix, &e1.matrix);
    out.push(exact(inv, vec![ij], "e** != e"));

    // 8
    let anti = rel_diff(&star(&e12).matrix, &mul(&star(&e2), &s1).matrix);
    out.push(exact(anti, vec![ij, jk], "(e1 e2)* != e2* e1*"));

    // 9
    let ses = mul(&s1, &e1);
    let c_star = (ses.norm() - n1 * n1).abs() / 1f64.max(n1 * n1);
    out.push(exact(c_star, vec![ij], "||e* e|| != ||e||^2"));

    // 10
    let m: &CMatrix = &ses.matrix;
    let herm = hermitian_residual(m);
    let (residual, detail) = if herm > tol {
        (herm, "e* e is not self-adjoint".to_string())
    } else {
        let min = eigenvalues_hermitian(m).first().copied().unwrap_or(0.0);
        let scale = 1f64.max(m.norm());
        (
            (-min / scale).max(0.0),
            format!("e* e has eigenvalue {min:.3e}"),
        )
    };
    out.push(Check {
        residual,
        passed: residual <= tol,
        arrows: vec![ij],
        detail,
    });

    out
}

/// Check the ten Fell-bundle axioms on `samples` random composable triples.
///
/// Sample `s` draws from a ChaCha stream `s` under `seed`, so the report is
/// independent of how samples are scheduled across threads.
pub fn verify_fell_axioms(
    geom: &FellBundleGeometry,
    samples: usize,
    seed: u64,
    tol: f64,
) -> FellAxiomReport {
    let per_sample: Vec<Vec<Check>> = (0..samples.max(1))
        .into_par_iter()
        .map(|s| run_sample(geom, seed, s, tol))
        .collect();

    let axioms = (0..10)
        .map(|a| {
            let mut max_residual: f64 = 0.0;
            let mut witness = None;
            for (s, checks) in per_sample.iter().enumerate() {
                let c = &checks[a];
                max_residual = max_residual.max(c.residual);
                if !c.passed && witness.is_none() {
                    witness = Some(AxiomWitness {
                        sample: s,
                        arrows: c.arrows.clone(),
                        residual: c.residual,
                        detail: c.detail.clone(),
                    });
                }
            }
            AxiomResult {
                number: a + 1,
                name: AXIOM_NAMES[a],
                passed: witness.is_none(),
                max_residual,
                witness,
            }
        })
        .collect();

    FellAxiomReport {
        samples: samples.max(1),
        seed,
        tol,
        axioms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fellbundle::{build_fell_bundle, build_pair_groupoid, InvolutionRule, ProductRule};

    fn geom(ids: &[&str], dims: &[usize]) -> FellBundleGeometry {
        build_fell_bundle(build_pair_groupoid(ids).unwrap(), dims).unwrap()
    }

    #[test]
    fn line_bundle_passes() {
        let r = verify_fell_axioms(&geom(&["1", "2", "3"], &[1, 1, 1]), 300, 1, 1e-10);
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn point_c_star_algebra_passes() {
        let r = verify_fell_axioms(&geom(&["x"], &[2]), 300, 2, 1e-10);
        assert!(r.all_passed());
    }

    #[test]
    fn transpose_involution_breaks_axiom_6() {
        let g = geom(&["1", "2"], &[2, 1]).with_involution(InvolutionRule::Transpose);
        let r = verify_fell_axioms(&g, 200, 3, 1e-10);
        let failed: Vec<usize> = r.failed().iter().map(|a| a.number).collect();
        assert!(failed.contains(&6), "{failed:?}");
        assert!(r.axioms[5].witness.is_some());
    }

    #[test]
    fn scaled_rules_detected() {
        let g = geom(&["1", "2"], &[2, 1]).with_involution(InvolutionRule::ScaledAdjoint(2.0));
        let r = verify_fell_axioms(&g, 100, 4, 1e-10);
        assert!(!r.axioms[6].passed);

        let g = geom(&["1", "2"], &[2, 1]).with_product(ProductRule::Scaled(3.0));
        let r = verify_fell_axioms(&g, 100, 5, 1e-10);
        assert!(!r.axioms[3].passed || !r.axioms[8].passed);
    }

    #[test]
    fn report_is_reproducible() {
        let g = geom(&["1", "2", "3"], &[2, 1, 3]).with_involution(InvolutionRule::Transpose);
        assert_eq!(
            verify_fell_axioms(&g, 64, 9, 1e-10),
            verify_fell_axioms(&g, 64, 9, 1e-10)
        );
    }
}
