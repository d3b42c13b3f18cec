use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::ConfigurationSpace;
use crate::error::{Error, Result};
use crate::lincore::eigenvalues_hermitian;
use crate::triple::SpectralFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisOptions {
    pub steps: usize,
    pub seed: u64,
    pub proposal_scale: f64,
    /// Keep every `thin`-th state.
    pub thin: usize,
    pub burn_in: usize,
    /// Independent chains, chain `c` drawing from ChaCha stream `c`.
    pub chains: usize,
}

impl Default for MetropolisOptions {
    fn default() -> Self {
        Self {
            steps: 10_000,
            seed: 0,
            proposal_scale: 0.5,
            thin: 1,
            burn_in: 0,
            chains: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub chain: usize,
    pub step: usize,
    pub coordinates: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub action: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub samples: Vec<Sample>,
    pub accepted: usize,
    pub proposed: usize,
    pub options: MetropolisOptions,
    pub measure: String,
    pub action: String,
}

impl Ensemble {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// CSV with a `#`-prefixed metadata header.
    pub fn write_csv<W: Write>(&self, mut w: W, extra_metadata: &[(&str, String)]) -> Result<()> {
        let o = &self.options;
        writeln!(w, "# seed: {}", o.seed)?;
        writeln!(w, "# steps: {}", o.steps)?;
        writeln!(w, "# chains: {}", o.chains)?;
        writeln!(w, "# burn_in: {}", o.burn_in)?;
        writeln!(w, "# thin: {}", o.thin)?;
        writeln!(w, "# proposal_scale: {}", o.proposal_scale)?;
        writeln!(w, "# measure: {}", self.measure)?;
        writeln!(w, "# action: {}", self.action)?;
        writeln!(w, "# acceptance_rate: {}", self.acceptance_rate())?;
        for (k, v) in extra_metadata {
            writeln!(w, "# {k}: {v}")?;
        }
        let (np, ne) = self
            .samples
            .first()
            .map(|s| (s.coordinates.len(), s.eigenvalues.len()))
            .unwrap_or((0, 0));
        let mut header = vec!["chain".to_string(), "step".to_string()];
        header.extend((0..np).map(|i| format!("x{i}")));
        header.extend((0..ne).map(|i| format!("ev{i}")));
        header.push("action".into());
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.chain.to_string(), s.step.to_string()];
            row.extend(s.coordinates.iter().map(|x| format!("{x:e}")));
            row.extend(s.eigenvalues.iter().map(|x| format!("{x:e}")));
            row.push(format!("{:e}", s.action));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn evaluate(
    space: &ConfigurationSpace,
    f: &SpectralFunction,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let ev = eigenvalues_hermitian(&space.point(x)?);
    Ok((ev.iter().map(|&l| f.eval(l)).sum(), ev))
}

fn run_chain(
    space: &ConfigurationSpace,
    f: &SpectralFunction,
    opts: &MetropolisOptions,
    chain: usize,
) -> Result<(Vec<Sample>, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(chain as u64);
    let k = space.dimension();
    let mut x = vec![0.0; k];
    let (mut s, mut ev) = evaluate(space, f, &x)?;
    let mut samples = Vec::new();
    let (mut accepted, mut proposed) = (0, 0);
    let thin = opts.thin.max(1);
    for step in 0..opts.burn_in + opts.steps {
        let proposal: Vec<f64> = x
            .iter()
            .map(|&xi| xi + opts.proposal_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (s_new, ev_new) = evaluate(space, f, &proposal)?;
        let u: f64 = rng.random();
        proposed += 1;
        if u.ln() < -(s_new - s) {
            x = proposal;
            s = s_new;
            ev = ev_new;
            accepted += 1;
        }
        if step >= opts.burn_in && (step - opts.burn_in).is_multiple_of(thin) {
            samples.push(Sample {
                chain,
                step: step - opts.burn_in,
                coordinates: x.clone(),
                eigenvalues: ev.clone(),
                action: s,
            });
        }
    }
    Ok((samples, accepted, proposed))
}

/// Metropolis chain over the coordinates of a configuration space with
/// weight `exp(−Tr f(D))` against Lebesgue measure on the coordinates.
/// Gaussian proposals of width `proposal_scale`; chains start at `D = 0`.
pub fn metropolis_sample(
    space: &ConfigurationSpace,
    f: &SpectralFunction,
    action_name: &str,
    opts: &MetropolisOptions,
) -> Result<Ensemble> {
    if space.dimension() == 0 {
        return Err(Error::EmptyConfigurationSpace);
    }
    if opts.steps == 0 {
        return Err(Error::Config("at least one step is required".into()));
    }
    let chains: Vec<(Vec<Sample>, usize, usize)> = (0..opts.chains.max(1))
        .into_par_iter()
        .map(|c| run_chain(space, f, opts, c))
        .collect::<Result<_>>()?;
    let mut samples = Vec::new();
    let (mut accepted, mut proposed) = (0, 0);
    for (s, a, p) in chains {
        samples.extend(s);
        accepted += a;
        proposed += p;
    }
    Ok(Ensemble {
        samples,
        accepted,
        proposed,
        options: opts.clone(),
        measure: space.measure_description().to_string(),
        action: action_name.to_string(),
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}
