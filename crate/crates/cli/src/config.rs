//! Pipeline settings resolved from flags, then the config file, then the
//! built-in defaults.

use std::path::Path;

use clap::Args;
use toml::{Table, Value};

use crate::error::{CliError, CliResult, WithPath};

/// Flags overriding the config file. Every flag has a snake_case config key
/// of the same name.
#[derive(Args, Clone, Debug, Default)]
#[command(next_help_heading = "Pipeline settings")]
pub struct SettingsArgs {
    /// Pooling interval T in seconds [default: 2]
    #[arg(long, global = true)]
    pub interval: Option<f64>,
    /// Interval step in seconds [default: 1]
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Feature points kept per frame [default: 450]
    #[arg(long, global = true)]
    pub max_points: Option<usize>,
    /// Quadrant overlap fraction [default: 0.1]
    #[arg(long, global = true)]
    pub overlap: Option<f64>,
    /// Grayscale vocabulary size [default: 256]
    #[arg(long, global = true)]
    pub k_gray: Option<usize>,
    /// Color vocabulary size [default: 32]
    #[arg(long, global = true)]
    pub k_color: Option<usize>,
    /// Maximum Lloyd iterations [default: 100]
    #[arg(long, global = true)]
    pub kmeans_iters: Option<usize>,
    /// Bits per code [default: 64]
    #[arg(long, global = true)]
    pub bits: Option<usize>,
    /// Eigenvectors searched per weak learner [default: 10]
    #[arg(long, global = true)]
    pub subspace: Option<usize>,
    /// Relative covariance regularization [default: 1e-6]
    #[arg(long, global = true)]
    pub regularization: Option<f64>,
    /// Hamming threshold d0 [default: model threshold, else bits / 2]
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Index bands B [default: 4]
    #[arg(long, global = true)]
    pub bands: Option<usize>,
    /// Substitution scale s0 [default: 2]
    #[arg(long, global = true)]
    pub match_scale: Option<f64>,
    /// Gap penalty g [default: -1]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gap: Option<f64>,
    /// tf-idf distance scale rho [default: 1]
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Seed hits needed to shortlist a diagonal [default: 3]
    #[arg(long, global = true)]
    pub min_seeds: Option<usize>,
    /// Diagonal distance merged into one chain [default: 2]
    #[arg(long, global = true)]
    pub diagonal_slack: Option<usize>,
    /// Refinement band half-width [default: 4]
    #[arg(long, global = true)]
    pub band_halfwidth: Option<usize>,
    /// Diagonals refined per query [default: 50]
    #[arg(long, global = true)]
    pub shortlist_cap: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub interval: f64,
    pub step: f64,
    pub max_points: usize,
    pub overlap: f64,
    pub k_gray: usize,
    pub k_color: usize,
    pub kmeans_iters: usize,
    pub bits: usize,
    pub subspace: usize,
    pub regularization: f64,
    pub threshold: Option<f64>,
    pub bands: usize,
    pub match_scale: f64,
    pub gap: f64,
    pub rho: f64,
    pub min_seeds: usize,
    pub diagonal_slack: usize,
    pub band_halfwidth: usize,
    pub shortlist_cap: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

const KEYS: &[&str] = &[
    "interval",
    "step",
    "max_points",
    "overlap",
    "k_gray",
    "k_color",
    "kmeans_iters",
    "bits",
    "subspace",
    "regularization",
    "threshold",
    "bands",
    "match_scale",
    "gap",
    "rho",
    "min_seeds",
    "diagonal_slack",
    "band_halfwidth",
    "shortlist_cap",
    "seed",
    "threads",
];

struct ConfigFile<'a> {
    table: Table,
    path: Option<&'a Path>,
}

impl ConfigFile<'_> {
    fn bad(&self, key: &str, expected: &str) -> CliError {
        let path = self
            .path
            .map_or(String::new(), |p| format!("{}: ", p.display()));
        CliError::usage(format!("{path}config key {key}: expected {expected}"))
    }

    fn float(&self, key: &str) -> CliResult<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(self.bad(key, "a number")),
        }
    }

    fn int(&self, key: &str) -> CliResult<Option<u64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(_) => Err(self.bad(key, "a non-negative integer")),
        }
    }

    fn size(&self, key: &str) -> CliResult<Option<usize>> {
        Ok(self.int(key)?.map(|v| v as usize))
    }
}

impl Settings {
    /// Flags win over `config`, which wins over the defaults.
    pub fn resolve(
        flags: &SettingsArgs,
        config: Option<&Path>,
        threads: Option<usize>,
    ) -> CliResult<Settings> {
        let table = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).at(path)?;
                text.parse::<Table>()
                    .map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message())))?
            }
            None => Table::new(),
        };
        if let Some(key) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            let path = config.map_or(String::new(), |p| format!("{}: ", p.display()));
            return Err(CliError::usage(format!("{path}unknown config key {key}")));
        }
        let file = ConfigFile {
            table,
            path: config,
        };
        let s = Settings {
            interval: flags.interval.or(file.float("interval")?).unwrap_or(2.0),
            step: flags.step.or(file.float("step")?).unwrap_or(1.0),
            max_points: flags.max_points.or(file.size("max_points")?).unwrap_or(450),
            overlap: flags.overlap.or(file.float("overlap")?).unwrap_or(0.10),
            k_gray: flags.k_gray.or(file.size("k_gray")?).unwrap_or(256),
            k_color: flags.k_color.or(file.size("k_color")?).unwrap_or(32),
            kmeans_iters: flags
                .kmeans_iters
                .or(file.size("kmeans_iters")?)
                .unwrap_or(100),
            bits: flags.bits.or(file.size("bits")?).unwrap_or(64),
            subspace: flags.subspace.or(file.size("subspace")?).unwrap_or(10),
            regularization: flags
                .regularization
                .or(file.float("regularization")?)
                .unwrap_or(1e-6),
            threshold: flags.threshold.or(file.float("threshold")?),
            bands: flags.bands.or(file.size("bands")?).unwrap_or(4),
            match_scale: flags
                .match_scale
                .or(file.float("match_scale")?)
                .unwrap_or(2.0),
            gap: flags.gap.or(file.float("gap")?).unwrap_or(-1.0),
            rho: flags.rho.or(file.float("rho")?).unwrap_or(1.0),
            min_seeds: flags.min_seeds.or(file.size("min_seeds")?).unwrap_or(3),
            diagonal_slack: flags
                .diagonal_slack
                .or(file.size("diagonal_slack")?)
                .unwrap_or(2),
            band_halfwidth: flags
                .band_halfwidth
                .or(file.size("band_halfwidth")?)
                .unwrap_or(4),
            shortlist_cap: flags
                .shortlist_cap
                .or(file.size("shortlist_cap")?)
                .unwrap_or(50),
            seed: flags.seed.or(file.int("seed")?).unwrap_or(0),
            threads: threads.or(file.size("threads")?),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> CliResult<()> {
        let positive = [
            ("interval", self.interval),
            ("step", self.step),
            ("match_scale", self.match_scale),
            ("rho", self.rho),
            ("regularization", self.regularization),
        ];
        if let Some((key, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::usage(format!(
                "--{} must be positive, got {v}",
                flag(key)
            )));
        }
        if self.step > self.interval {
            return Err(CliError::usage(format!(
                "--step {} must not exceed --interval {}",
                self.step, self.interval
            )));
        }
        if !(self.gap <= 0.0 && self.gap.is_finite()) {
            return Err(CliError::usage(format!(
                "--gap must be <= 0, got {}",
                self.gap
            )));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::usage(format!(
                    "--threshold must be positive, got {t}"
                )));
            }
        }
        let counts = [
            ("k_gray", self.k_gray),
            ("k_color", self.k_color),
            ("bits", self.bits),
            ("subspace", self.subspace),
            ("bands", self.bands),
            ("min_seeds", self.min_seeds),
            ("shortlist_cap", self.shortlist_cap),
        ];
        if let Some((key, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::usage(format!(
                "--{} must be at least 1",
                flag(key)
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        Ok(())
    }
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}
