//! Local (Smith-Waterman), banded and global (Needleman-Wunsch) alignment of
//! nucleotide sequences, with a linear gap penalty.

mod dp;

use std::fmt;
use std::ops::Range;

use crate::bitcode::Bitcode;
use crate::dna::VideoDna;
use crate::error::{Error, Result};
use crate::metric::{tfidf_distance, MetricModel};
use crate::vocab::IdfWeights;

/// Default substitution scale `s0`.
pub const DEFAULT_MATCH_SCALE: f64 = 2.0;
/// Default per-element gap penalty.
pub const DEFAULT_GAP: f64 = -1.0;
/// Tables with more cells than this are traced back from checkpoint rows.
pub const DEFAULT_TABLE_LIMIT: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub enum ScoringMode {
    /// `sigma = s0 (d0 - hamming) / d0`.
    Bitcode { threshold: f64 },
    /// `sigma = s0 (1 - tfidf_distance / rho)`.
    Tfidf { idf: IdfWeights, rho: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoringParams {
    pub mode: ScoringMode,
    pub match_scale: f64,
    pub gap: f64,
}

impl ScoringParams {
    pub fn bitcode(threshold: f64) -> Result<Self> {
        ScoringParams {
            mode: ScoringMode::Bitcode { threshold },
            match_scale: DEFAULT_MATCH_SCALE,
            gap: DEFAULT_GAP,
        }
        .validated()
    }

    /// Bitcode scoring at the model's decision threshold.
    pub fn for_model(model: &MetricModel) -> Result<Self> {
        ScoringParams::bitcode(model.threshold() as f64)
    }

    pub fn tfidf(idf: IdfWeights, rho: f64) -> Result<Self> {
        ScoringParams {
            mode: ScoringMode::Tfidf { idf, rho },
            match_scale: DEFAULT_MATCH_SCALE,
            gap: DEFAULT_GAP,
        }
        .validated()
    }

    pub fn with_gap(mut self, gap: f64) -> Result<Self> {
        self.gap = gap;
        self.validated()
    }

    pub fn with_match_scale(mut self, s0: f64) -> Result<Self> {
        self.match_scale = s0;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.gap <= 0.0 && self.gap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gap penalty {} must be <= 0",
                self.gap
            )));
        }
        if !(self.match_scale > 0.0 && self.match_scale.is_finite()) {
            return Err(Error::InvalidParameter("match scale must be > 0".into()));
        }
        let ok = match &self.mode {
            ScoringMode::Bitcode { threshold } => *threshold > 0.0 && threshold.is_finite(),
            ScoringMode::Tfidf { rho, .. } => *rho > 0.0 && rho.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter(
                "threshold d0 / scale rho must be positive".into(),
            ));
        }
        Ok(self)
    }

    pub fn is_bitcode(&self) -> bool {
        matches!(self.mode, ScoringMode::Bitcode { .. })
    }
}

/// One side of a substitution.
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    Code(&'a Bitcode),
    Values(&'a [f32]),
}

pub fn score_substitution(a: Operand, b: Operand, params: &ScoringParams) -> Result<f64> {
    let s0 = params.match_scale;
    match (&params.mode, a, b) {
        (ScoringMode::Bitcode { threshold }, Operand::Code(a), Operand::Code(b)) => {
            let h = a.hamming(b)? as f64;
            Ok(s0 * (threshold - h) / threshold)
        }
        (ScoringMode::Tfidf { idf, rho }, Operand::Values(a), Operand::Values(b)) => {
            Ok(s0 * (1.0 - tfidf_distance(a, b, idf)? / rho))
        }
        (ScoringMode::Bitcode { .. }, _, _) => {
            Err(Error::ModeMismatch("bitcode scoring needs bitcodes"))
        }
        (ScoringMode::Tfidf { .. }, _, _) => Err(Error::ModeMismatch(
            "tf-idf scoring needs nucleotide values",
        )),
    }
}

/// One alignment column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    /// `x_i` aligned with `y_j`.
    Match(usize, usize),
    /// `y_j` opposite a gap in `x`.
    GapX(usize),
    /// `x_i` opposite a gap in `y`.
    GapY(usize),
}

impl Step {
    pub fn is_gap(&self) -> bool {
        !matches!(self, Step::Match(..))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub score: f64,
    pub steps: Vec<Step>,
    /// Half-open range of aligned `x` positions.
    pub x_span: Range<usize>,
    pub y_span: Range<usize>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.steps.iter().filter(|s| s.is_gap()).count()
    }

    pub fn matches(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.steps.iter().filter_map(|s| match *s {
            Step::Match(i, j) => Some((i, j)),
            _ => None,
        })
    }

    /// Re-accumulates the path score in path order.
    pub fn rescore<F: Fn(usize, usize) -> f64>(&self, sigma: F, gap: f64) -> f64 {
        self.steps.iter().fold(0.0, |acc, s| match *s {
            Step::Match(i, j) => acc + sigma(i, j),
            _ => acc + gap,
        })
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse_text(text: &str) -> Result<Alignment> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))?;
        let mut score = None;
        let mut x_span = None;
        let mut y_span = None;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("bad header field {field:?}")))?;
            match key {
                "score" => {
                    score = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| Error::parse(1, "bad score"))?,
                    )
                }
                "xspan" => x_span = Some(parse_span(value)?),
                "yspan" => y_span = Some(parse_span(value)?),
                _ => return Err(Error::parse(1, format!("unknown header key {key:?}"))),
            }
        }
        let mut steps = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(lineno, format!("bad index {s:?}")))
            };
            let step = match f.as_slice() {
                ["M", i, j] => Step::Match(num(i)?, num(j)?),
                ["GX", j] => Step::GapX(num(j)?),
                ["GY", i] => Step::GapY(num(i)?),
                _ => return Err(Error::parse(lineno, format!("bad step {line:?}"))),
            };
            steps.push(step);
        }
        Ok(Alignment {
            score: score.ok_or_else(|| Error::parse(1, "missing score"))?,
            steps,
            x_span: x_span.ok_or_else(|| Error::parse(1, "missing xspan"))?,
            y_span: y_span.ok_or_else(|| Error::parse(1, "missing yspan"))?,
        })
    }
}

fn parse_span(s: &str) -> Result<Range<usize>> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| Error::parse(1, format!("bad span {s:?}")))?;
    let a = a
        .parse()
        .map_err(|_| Error::parse(1, format!("bad span {s:?}")))?;
    let b = b
        .parse()
        .map_err(|_| Error::parse(1, format!("bad span {s:?}")))?;
    if a > b {
        return Err(Error::parse(1, format!("reversed span {s:?}")));
    }
    Ok(a..b)
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "score={} xspan={}-{} yspan={}-{}",
            self.score, self.x_span.start, self.x_span.end, self.y_span.start, self.y_span.end
        )?;
        for s in &self.steps {
            match s {
                Step::Match(i, j) => writeln!(f, "M {i} {j}")?,
                Step::GapX(j) => writeln!(f, "GX {j}")?,
                Step::GapY(i) => writeln!(f, "GY {i}")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignKind {
    Local,
    Global,
}

/// Cells with `|(j - i) - center| <= halfwidth` (0-based sequence indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Band {
    pub center: i64,
    pub halfwidth: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignOptions {
    pub kind: AlignKind,
    /// Only honoured by local alignment.
    pub band: Option<Band>,
    pub table_limit: usize,
}

impl AlignOptions {
    pub fn local() -> Self {
        AlignOptions {
            kind: AlignKind::Local,
            band: None,
            table_limit: DEFAULT_TABLE_LIMIT,
        }
    }

    pub fn global() -> Self {
        AlignOptions {
            kind: AlignKind::Global,
            ..AlignOptions::local()
        }
    }

    pub fn banded(center: i64, halfwidth: usize) -> Self {
        AlignOptions {
            band: Some(Band { center, halfwidth }),
            ..AlignOptions::local()
        }
    }
}

/// Aligns sequences of lengths `m` and `n` under an arbitrary substitution
/// score `sigma(i, j)`.
pub fn align_by<F: Fn(usize, usize) -> f64>(
    m: usize,
    n: usize,
    sigma: F,
    gap: f64,
    opts: &AlignOptions,
) -> Result<Alignment> {
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("alignment operands"));
    }
    if gap.is_nan() || gap > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gap penalty {gap} must be <= 0"
        )));
    }
    Ok(dp::run(m, n, &sigma, gap, opts))
}

/// Substitution scores between the positions of two sequences.
pub struct Substitution<'a> {
    x: &'a VideoDna,
    y: &'a VideoDna,
    params: &'a ScoringParams,
    x_codes: &'a [Bitcode],
    y_codes: &'a [Bitcode],
}

impl<'a> Substitution<'a> {
    pub fn new(x: &'a VideoDna, y: &'a VideoDna, params: &'a ScoringParams) -> Result<Self> {
        let (x_codes, y_codes): (&[Bitcode], &[Bitcode]) = match &params.mode {
            ScoringMode::Bitcode { .. } => {
                let (a, b) = (
                    x.bitcodes().ok_or(Error::MissingBitcodes)?,
                    y.bitcodes().ok_or(Error::MissingBitcodes)?,
                );
                if x.code_bits() != y.code_bits() {
                    return Err(Error::LengthMismatch {
                        left: x.code_bits(),
                        right: y.code_bits(),
                    });
                }
                (a, b)
            }
            ScoringMode::Tfidf { idf, .. } => {
                if x.dim() == 0 || y.dim() == 0 {
                    return Err(Error::ModeMismatch(
                        "tf-idf scoring needs nucleotide values",
                    ));
                }
                for d in [x.dim(), y.dim()] {
                    if d != idf.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: idf.dim(),
                            got: d,
                        });
                    }
                }
                (&[], &[])
            }
        };
        Ok(Substitution {
            x,
            y,
            params,
            x_codes,
            y_codes,
        })
    }

    #[inline]
    pub fn score(&self, i: usize, j: usize) -> f64 {
        let s0 = self.params.match_scale;
        match &self.params.mode {
            ScoringMode::Bitcode { threshold } => {
                let h = self.x_codes[i].hamming_unchecked(&self.y_codes[j]) as f64;
                s0 * (threshold - h) / threshold
            }
            ScoringMode::Tfidf { idf, rho } => {
                let d =
                    tfidf_distance(self.x.row(i), self.y.row(j), idf).expect("dimensions checked");
                s0 * (1.0 - d / rho)
            }
        }
    }
}

fn align_sequences(
    x: &VideoDna,
    y: &VideoDna,
    params: &ScoringParams,
    opts: &AlignOptions,
) -> Result<Alignment> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("alignment operands"));
    }
    let sub = Substitution::new(x, y, params)?;
    align_by(x.len(), y.len(), |i, j| sub.score(i, j), params.gap, opts)
}

pub fn local_align(x: &VideoDna, y: &VideoDna, params: &ScoringParams) -> Result<Alignment> {
    align_sequences(x, y, params, &AlignOptions::local())
}

pub fn banded_local_align(
    x: &VideoDna,
    y: &VideoDna,
    params: &ScoringParams,
    diagonal_center: i64,
    band_halfwidth: usize,
) -> Result<Alignment> {
    align_sequences(
        x,
        y,
        params,
        &AlignOptions::banded(diagonal_center, band_halfwidth),
    )
}

pub fn global_align(x: &VideoDna, y: &VideoDna, params: &ScoringParams) -> Result<Alignment> {
    align_sequences(x, y, params, &AlignOptions::global())
}
