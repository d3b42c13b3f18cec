//! Command-line front end: geometry configs, subcommands and `key: value`
//! reports.
//!
//! Exit codes: 0 success, 1 verification failure or runtime error, 2 usage
//! or configuration error.

mod commands;
pub mod config;
pub mod model;

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub use config::{
    bundled, emit_config, load_config_text, parse_config, GeometryConfig, BUNDLED,
    NEGATIVE_CONTROLS,
};
pub use model::Model;

#[derive(Debug, Parser)]
#[command(
    name = "fellgeom",
    version,
    about = "Finite spectral triples and Fell bundle geometries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Bundled config name or path to a TOML file.
    config: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tolerance; each subcommand has its own default.
    #[arg(long)]
    tol: Option<f64>,
    /// Sector to restrict to, or `all`. Pattern, mass, sampling and
    /// generation commands default to the first sector; the others to `all`.
    #[arg(long)]
    sector: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fell bundle axioms, spectral triple axioms and the section check on D.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Admissible block patterns of Dirac sections.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Keep only patterns that flip the grading sign.
        #[arg(long)]
        graded: bool,
        /// Keep involutions with mixed fixed points too.
        #[arg(long)]
        all_involutions: bool,
    },
    /// Naive and Jacobian parameter counts of the mass pattern.
    CountParams {
        #[command(flatten)]
        common: Common,
    },
    /// Leptoquark and sector-mixing exclusions.
    Exclusions {
        #[command(flatten)]
        common: Common,
    },
    /// Masses and multiplicities of the left-right mass block.
    Diagonalize {
        #[command(flatten)]
        common: Common,
    },
    /// Spectral action values and their unitary invariance.
    Action {
        #[command(flatten)]
        common: Common,
        /// Comma-separated spectral functions: x2, x4, poly:c0,c1,..., cutoff:L.
        #[arg(long, default_value = "x2,x4,cutoff:2")]
        function: String,
        #[arg(long, default_value_t = 100)]
        unitaries: usize,
    },
    /// Spectral distance between two declared states.
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        /// Also test symmetry and the triangle inequality on random states.
        #[arg(long, default_value_t = 0)]
        random_triples: usize,
    },
    /// Geodesic flow of D and the modular flow of a state.
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: Option<String>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        time: f64,
    },
    /// KMS identity for a state and its modular continuation.
    Kms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: Option<String>,
        /// `modular` or the negative control `inverted`.
        #[arg(long, default_value = "modular")]
        continuation: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Partition sum over the declared states.
    Partition {
        #[command(flatten)]
        common: Common,
        /// `trace` or `state-weighted`; overrides the config.
        #[arg(long)]
        mode: Option<String>,
        /// `single` or `per-object`; overrides the config.
        #[arg(long)]
        product: Option<String>,
        #[arg(long, default_value_t = 20)]
        unitaries: usize,
    },
    /// Metropolis ensemble of Dirac sections weighted by exp(-Tr f(D)).
    Sample {
        #[command(flatten)]
        common: Common,
        /// Recorded steps per chain, after burn-in.
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        #[arg(long, default_value = "x2")]
        function: String,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        /// CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dimensions of the algebras generated by sampled sections.
    GenerateDims {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 6)]
        samples: usize,
    },
}

/// Ordered `key: value` lines.
#[derive(Debug, Clone, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    fn new(command: &str, config: &str, reproduces: &str) -> Self {
        let mut r = Self::default();
        r.kv("command", command);
        r.kv("config", config);
        r.kv("reproduces", reproduces);
        r
    }

    fn kv(&mut self, key: impl Display, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (k, v) in &self.lines {
            writeln!(out, "{k}: {v}")?;
        }
        Ok(())
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Parse `args` (including the program name), run the subcommand, and
/// return the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{e}");
                2
            } else {
                let _ = write!(out, "{e}");
                0
            };
        }
    };
    match commands::execute(cli.command) {
        Ok((report, passed)) => {
            if let Err(e) = report.write(out) {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
            if passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["fellgeom"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["frobnicate", "two_point"]).0, 2);
        assert_eq!(call(&["check"]).0, 2);
        let (code, _, err) = call(&["check", "no_such_config"]);
        assert_eq!(code, 2, "{err}");
        let (code, _, err) = call(&[
            "partition",
            "two_point",
            "--mode",
            "state-weighted",
            "--product",
            "per-object",
        ]);
        assert_eq!(code, 2, "{err}");
    }

    #[test]
    fn report_header() {
        let (code, out, err) = call(&["partition", "two_point"]);
        assert_eq!(code, 0, "{err}");
        assert!(out.starts_with("command: partition\nconfig: two_point\nreproduces: "));
    }
}
