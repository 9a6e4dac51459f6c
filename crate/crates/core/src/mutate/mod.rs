//! Bag-space simulation of post-production edits: spatial mutations alter
//! single nucleotides, temporal ones edit the timeline and report where every
//! output position came from.

mod pairs;
mod spatial;
mod temporal;

use std::fmt;
use std::str::FromStr;

pub use pairs::{generate_training_pairs, Pair, PairOrigin, PairSet};
pub use spatial::{mutate_nucleotide, mutate_values};
pub use temporal::{mutate_sequence, mutate_sequence_with_donors, Groundtruth};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    SubstitutionNoise,
    QuadrantCrop,
    HistogramRescale,
    OverlayInject,
    Indel,
    FadeBlend,
    LocalSpeed,
    SubstitutionSegment,
    TimeShift,
}

impl MutationKind {
    pub const ALL: [MutationKind; 9] = [
        MutationKind::SubstitutionNoise,
        MutationKind::QuadrantCrop,
        MutationKind::HistogramRescale,
        MutationKind::OverlayInject,
        MutationKind::Indel,
        MutationKind::FadeBlend,
        MutationKind::LocalSpeed,
        MutationKind::SubstitutionSegment,
        MutationKind::TimeShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationKind::SubstitutionNoise => "substitution_noise",
            MutationKind::QuadrantCrop => "quadrant_crop",
            MutationKind::HistogramRescale => "histogram_rescale",
            MutationKind::OverlayInject => "overlay_inject",
            MutationKind::Indel => "indel",
            MutationKind::FadeBlend => "fade_blend",
            MutationKind::LocalSpeed => "local_speed",
            MutationKind::SubstitutionSegment => "substitution_segment",
            MutationKind::TimeShift => "time_shift",
        }
    }

    /// Spatial kinds change nucleotide content in place.
    pub fn is_spatial(self) -> bool {
        matches!(
            self,
            MutationKind::SubstitutionNoise
                | MutationKind::QuadrantCrop
                | MutationKind::HistogramRescale
                | MutationKind::OverlayInject
        )
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MutationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MutationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mutation kind {s:?}")))
    }
}

/// A mutation with its strength (1..=3), optional parameter overrides and
/// seed.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationSpec {
    pub kind: MutationKind,
    pub strength: u8,
    pub seed: u64,
    params: Vec<(String, f64)>,
}

/// Parameter names each kind accepts.
fn known_params(kind: MutationKind) -> &'static [&'static str] {
    match kind {
        MutationKind::SubstitutionNoise => &["fraction", "words"],
        MutationKind::QuadrantCrop => &["crop", "quadrant"],
        MutationKind::HistogramRescale => &["gamma"],
        MutationKind::OverlayInject => &["weight"],
        MutationKind::Indel => &["length", "insert", "at"],
        MutationKind::FadeBlend => &["length", "depth", "at"],
        MutationKind::LocalSpeed => &["factor", "span", "at"],
        MutationKind::SubstitutionSegment => &["length", "at"],
        MutationKind::TimeShift => &["phase"],
    }
}

impl MutationSpec {
    pub fn new(kind: MutationKind, strength: u8, seed: u64) -> Result<Self> {
        if !(1..=3).contains(&strength) {
            return Err(Error::InvalidParameter(format!(
                "strength {strength} not in 1..=3"
            )));
        }
        Ok(MutationSpec {
            kind,
            strength,
            seed,
            params: Vec::new(),
        })
    }

    /// Overrides one kind-specific parameter.
    pub fn with_param(mut self, key: &str, value: f64) -> Result<Self> {
        if !known_params(self.kind).contains(&key) {
            return Err(Error::InvalidParameter(format!(
                "{} has no parameter {key:?}",
                self.kind
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{key} must be finite")));
        }
        self.check_range(key, value)?;
        match self.params.iter_mut().find(|p| p.0 == key) {
            Some(p) => p.1 = value,
            None => self.params.push((key.to_string(), value)),
        }
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check_range(&self, key: &str, v: f64) -> Result<()> {
        let ok = match key {
            "fraction" | "crop" | "weight" | "depth" | "phase" => (0.0..=1.0).contains(&v),
            "gamma" | "factor" => v > 0.0,
            "quadrant" => (0.0..4.0).contains(&v) && v.fract() == 0.0,
            "insert" => v == 0.0 || v == 1.0,
            _ => v >= 0.0 && v.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{key}={v} out of range for {}",
                self.kind
            )))
        }
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|p| p.0 == key).map(|p| p.1)
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    fn by_strength(&self, key: &str, table: [f64; 3]) -> f64 {
        self.param(key).unwrap_or(table[self.strength as usize - 1])
    }

    /// Parses `kind strength [seed=N] [key=value ...]`.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut f = line.split_whitespace();
        let kind: MutationKind = f
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty mutation spec".into()))?
            .parse()?;
        let strength: u8 = f
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidParameter("missing or bad strength".into()))?;
        let mut spec = MutationSpec::new(kind, strength, 0)?;
        for kv in f {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("expected key=value, got {kv:?}"))
            })?;
            if k == "seed" {
                spec.seed = v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad seed {v:?}")))?;
            } else {
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad value for {k}: {v:?}")))?;
                spec = spec.with_param(k, v)?;
            }
        }
        Ok(spec)
    }

    /// Reads one spec per non-empty, non-`#` line.
    pub fn parse_list(text: &str) -> Result<Vec<MutationSpec>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| {
                MutationSpec::parse_line(l).map_err(|e| Error::parse(i + 1, e.to_string()))
            })
            .collect()
    }

    pub fn format_list(specs: &[MutationSpec]) -> String {
        specs.iter().map(|s| format!("{s}\n")).collect()
    }
}

impl fmt::Display for MutationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} seed={}", self.kind, self.strength, self.seed)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}
