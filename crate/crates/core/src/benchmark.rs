//! Retrieval benchmark: excerpts of an indexed corpus are mutated, encoded
//! and searched; a query is correct when its top hit is the source sequence
//! within one interval of the true offset.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dna::VideoDna;
use crate::error::{Error, Result};
use crate::metric::MetricModel;
use crate::mutate::{mutate_sequence, MutationSpec};
use crate::search::{build_index, search, BandIndex, SearchParams};

/// Offset tolerance in intervals.
pub const OFFSET_TOLERANCE: i64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct QueryPlan {
    /// Queries per length.
    pub queries: usize,
    pub lengths: Vec<usize>,
    /// Query `k` of each length uses `specs[k % specs.len()]` with a fresh
    /// seed; no specs means unmutated queries.
    pub specs: Vec<MutationSpec>,
    pub seed: u64,
}

/// One drawn query and its outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub length: usize,
    /// Mutation kind name, or `none`.
    pub kind: String,
    /// 0 for unmutated queries.
    pub strength: u8,
    /// Catalog index of the source sequence.
    pub sequence: usize,
    pub start: usize,
    pub expected_offset: i64,
    /// Top hit as (catalog index, offset).
    pub top: Option<(usize, i64)>,
    pub correct: bool,
    pub latency: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusStats {
    pub sequences: usize,
    pub nucleotides: usize,
    pub bits: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionRow {
    pub queries: usize,
    pub correct: usize,
}

impl PrecisionRow {
    pub fn precision(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.correct as f64 / self.queries as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyStats {
    pub mean: Duration,
    pub median: Duration,
    pub p90: Duration,
    pub p99: Duration,
    pub max: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub corpus: CorpusStats,
    pub records: Vec<QueryRecord>,
}

/// Encodes the corpus, indexes it with `params` and runs the query plan.
pub fn bench(
    corpus: &[VideoDna],
    model: &MetricModel,
    plan: &QueryPlan,
    params: &SearchParams,
    bands: usize,
) -> Result<BenchReport> {
    let encoded = corpus
        .iter()
        .map(|s| {
            let mut s = s.clone();
            model.encode_into(&mut s)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let index = build_index(&encoded, bands)?;
    bench_indexed(corpus, &index, model, plan, params)
}

/// As [`bench`] with a prebuilt index over the encoded `corpus`.
pub fn bench_indexed(
    corpus: &[VideoDna],
    index: &BandIndex,
    model: &MetricModel,
    plan: &QueryPlan,
    params: &SearchParams,
) -> Result<BenchReport> {
    let longest = plan.lengths.iter().copied().max().unwrap_or(0);
    if corpus.len() < 2 {
        return Err(Error::CorpusTooSmall(format!(
            "{} sequences, need at least 2",
            corpus.len()
        )));
    }
    if plan.lengths.contains(&0) {
        return Err(Error::InvalidParameter(
            "query lengths must be positive".into(),
        ));
    }
    if index.len() != corpus.len() {
        return Err(Error::InvalidParameter(
            "index does not match corpus".into(),
        ));
    }
    let mut sources: Vec<&str> = corpus.iter().map(|s| s.source_id()).collect();
    sources.sort_unstable();
    if sources.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::CorpusTooSmall(
            "corpus sources must be pairwise distinct".into(),
        ));
    }
    let eligible: Vec<usize> = (0..corpus.len())
        .filter(|&k| corpus[k].len() >= longest)
        .collect();
    if eligible.is_empty() {
        return Err(Error::CorpusTooSmall(format!(
            "no sequence holds a {longest}-long query"
        )));
    }

    let jobs = draw_queries(corpus, index, plan, &eligible)?;
    let records = jobs
        .into_par_iter()
        .map(|job| run_query(corpus, index, model, params, job))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport {
        corpus: CorpusStats {
            sequences: corpus.len(),
            nucleotides: corpus.iter().map(|s| s.len()).sum(),
            bits: index.bits(),
        },
        records,
    })
}

struct Job {
    length: usize,
    sequence: usize,
    start: usize,
    spec: Option<MutationSpec>,
}

fn draw_queries(
    corpus: &[VideoDna],
    index: &BandIndex,
    plan: &QueryPlan,
    eligible: &[usize],
) -> Result<Vec<Job>> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut jobs = Vec::with_capacity(plan.queries * plan.lengths.len());
    for &length in &plan.lengths {
        for k in 0..plan.queries {
            let mut attempts = 0;
            let (sequence, start) = loop {
                let sequence = eligible[rng.random_range(0..eligible.len())];
                let start = rng.random_range(0..=corpus[sequence].len() - length);
                if is_unique(index, sequence, start, length) {
                    break (sequence, start);
                }
                attempts += 1;
                if attempts > 1000 {
                    return Err(Error::CorpusTooSmall(
                        "no excerpt with a unique location".into(),
                    ));
                }
            };
            let spec = (!plan.specs.is_empty()).then(|| {
                plan.specs[k % plan.specs.len()]
                    .clone()
                    .with_seed(rng.random())
            });
            jobs.push(Job {
                length,
                sequence,
                start,
                spec,
            });
        }
    }
    Ok(jobs)
}

/// Whether the indexed excerpt occurs nowhere else as an exact code window.
fn is_unique(index: &BandIndex, sequence: usize, start: usize, length: usize) -> bool {
    let codes = index.codes(sequence);
    let window = &codes[start..start + length];
    index
        .postings(0, index.band_value(&window[0], 0))
        .iter()
        .filter(|p| (p.sequence as usize, p.position as usize) != (sequence, start))
        .all(|p| {
            let other = index.codes(p.sequence as usize);
            let at = p.position as usize;
            at + length > other.len() || other[at..at + length] != *window
        })
}

fn run_query(
    corpus: &[VideoDna],
    index: &BandIndex,
    model: &MetricModel,
    params: &SearchParams,
    job: Job,
) -> Result<QueryRecord> {
    let excerpt = corpus[job.sequence].slice(job.start, job.start + job.length);
    let (mut query, map) = match &job.spec {
        Some(spec) => mutate_sequence(&excerpt, std::slice::from_ref(spec))?,
        None => (excerpt.clone(), (0..excerpt.len()).map(Some).collect()),
    };
    let (q0, m0) = map
        .iter()
        .enumerate()
        .find_map(|(q, m)| m.map(|m| (q, m)))
        .ok_or(Error::EmptyQuery)?;
    let expected_offset = (job.start + m0) as i64 - q0 as i64;
    model.encode_into(&mut query)?;

    let t = Instant::now();
    let hits = search(&query, index, params)?;
    let latency = t.elapsed();

    let top = hits.first().map(|h| {
        let seq = index
            .catalog()
            .iter()
            .position(|e| e.id == h.sequence_id)
            .expect("hit from index");
        (seq, h.db_offset)
    });
    let correct = top
        .is_some_and(|(s, o)| s == job.sequence && (o - expected_offset).abs() <= OFFSET_TOLERANCE);
    Ok(QueryRecord {
        length: job.length,
        kind: job
            .spec
            .as_ref()
            .map_or("none".to_string(), |s| s.kind.name().to_string()),
        strength: job.spec.as_ref().map_or(0, |s| s.strength),
        sequence: job.sequence,
        start: job.start,
        expected_offset,
        top,
        correct,
        latency,
    })
}

impl BenchReport {
    pub fn overall(&self) -> PrecisionRow {
        tally(self.records.iter())
    }

    /// Precision per (kind, strength), sorted by kind name then strength.
    pub fn by_kind(&self) -> Vec<(String, u8, PrecisionRow)> {
        let mut keys: Vec<(String, u8)> = self
            .records
            .iter()
            .map(|r| (r.kind.clone(), r.strength))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(k, s)| {
                let row = tally(
                    self.records
                        .iter()
                        .filter(|r| r.kind == k && r.strength == s),
                );
                (k, s, row)
            })
            .collect()
    }

    /// Precision per query length, ascending.
    pub fn by_length(&self) -> Vec<(usize, PrecisionRow)> {
        let mut lengths: Vec<usize> = self.records.iter().map(|r| r.length).collect();
        lengths.sort_unstable();
        lengths.dedup();
        lengths
            .into_iter()
            .map(|l| (l, tally(self.records.iter().filter(|r| r.length == l))))
            .collect()
    }

    pub fn latency(&self) -> Option<LatencyStats> {
        let mut v: Vec<Duration> = self.records.iter().map(|r| r.latency).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_unstable();
        let pick = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
        Some(LatencyStats {
            mean: v.iter().sum::<Duration>() / v.len() as u32,
            median: pick(0.5),
            p90: pick(0.9),
            p99: pick(0.99),
            max: v[v.len() - 1],
        })
    }

    pub fn write_kind_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# kind\tstrength\tqueries\tcorrect\tprecision")?;
        for (k, s, r) in self.by_kind() {
            writeln!(
                w,
                "{k}\t{s}\t{}\t{}\t{:.4}",
                r.queries,
                r.correct,
                r.precision()
            )?;
        }
        Ok(())
    }

    pub fn write_length_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# length\tqueries\tcorrect\tprecision")?;
        for (l, r) in self.by_length() {
            writeln!(w, "{l}\t{}\t{}\t{:.4}", r.queries, r.correct, r.precision())?;
        }
        Ok(())
    }

    /// Corpus statistics and latency percentiles in milliseconds.
    pub fn write_summary_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        let o = self.overall();
        writeln!(w, "# key\tvalue")?;
        writeln!(w, "sequences\t{}", self.corpus.sequences)?;
        writeln!(w, "nucleotides\t{}", self.corpus.nucleotides)?;
        writeln!(w, "bits\t{}", self.corpus.bits)?;
        writeln!(w, "queries\t{}", o.queries)?;
        writeln!(w, "correct\t{}", o.correct)?;
        writeln!(w, "precision\t{:.4}", o.precision())?;
        if let Some(l) = self.latency() {
            let ms = |d: Duration| d.as_secs_f64() * 1e3;
            writeln!(w, "latency_mean_ms\t{:.3}", ms(l.mean))?;
            writeln!(w, "latency_median_ms\t{:.3}", ms(l.median))?;
            writeln!(w, "latency_p90_ms\t{:.3}", ms(l.p90))?;
            writeln!(w, "latency_p99_ms\t{:.3}", ms(l.p99))?;
            writeln!(w, "latency_max_ms\t{:.3}", ms(l.max))?;
        }
        Ok(())
    }

    /// One line per query; `top` is `-` when nothing was found.
    pub fn write_queries_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# length\tkind\tstrength\tsequence\tstart\texpected_offset\ttop_sequence\ttop_offset\tcorrect\tlatency_ms")?;
        for r in &self.records {
            let (ts, to) = r.top.map_or(("-".to_string(), "-".to_string()), |(s, o)| {
                (s.to_string(), o.to_string())
            });
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{ts}\t{to}\t{}\t{:.3}",
                r.length,
                r.kind,
                r.strength,
                r.sequence,
                r.start,
                r.expected_offset,
                u8::from(r.correct),
                r.latency.as_secs_f64() * 1e3
            )?;
        }
        Ok(())
    }
}

fn tally<'a>(records: impl Iterator<Item = &'a QueryRecord>) -> PrecisionRow {
    let mut row = PrecisionRow {
        queries: 0,
        correct: 0,
    };
    for r in records {
        row.queries += 1;
        row.correct += usize::from(r.correct);
    }
    row
}
