//! Timeline mutations with an exact output-to-input correspondence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spatial::SpatialPlan;
use super::{MutationKind, MutationSpec};
use crate::bitcode::Bitcode;
use crate::dna::VideoDna;
use crate::error::{Error, Result};

const SEGMENT: [f64; 3] = [3.0, 6.0, 12.0];
const FADE_DEPTH: [f64; 3] = [0.5, 0.75, 1.0];
const SPEED: [f64; 3] = [1.25, 1.5, 2.0];
const SPEED_SPAN: f64 = 20.0;
const PHASE: [f64; 3] = [0.25, 0.5, 0.75];

/// For each output position, the input position it was derived from, or
/// `None` for inserted or substituted content.
pub type Groundtruth = Vec<Option<usize>>;

/// One timeline edit: output rows and where each came from.
struct Edit {
    rows: Vec<Vec<f32>>,
    map: Groundtruth,
    /// Whether every output row is an unmodified copy of its source.
    copies: bool,
}

/// Applies `specs` in order; spatial kinds mutate every nucleotide.
pub fn mutate_sequence(s: &VideoDna, specs: &[MutationSpec]) -> Result<(VideoDna, Groundtruth)> {
    mutate_sequence_with_donors(s, specs, &[])
}

/// As [`mutate_sequence`]; substitution_segment draws its replacement from
/// `donors` when any are given.
pub fn mutate_sequence_with_donors(
    s: &VideoDna,
    specs: &[MutationSpec],
    donors: &[VideoDna],
) -> Result<(VideoDna, Groundtruth)> {
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut rows = s.rows().to_vec();
    let mut map: Groundtruth = (0..rows.len()).map(Some).collect();
    let mut codes: Option<Vec<Bitcode>> = s.bitcodes().map(|c| c.to_vec());
    for spec in specs {
        let edit = if spec.kind.is_spatial() {
            spatial(&rows, spec, s.dim())?
        } else {
            temporal(&rows, spec, s.dim(), donors)?
        };
        codes = match codes {
            Some(c) if edit.copies => Some(
                edit.map
                    .iter()
                    .map(|m| c[m.expect("copies have sources")].clone())
                    .collect(),
            ),
            _ => None,
        };
        map = edit.map.iter().map(|m| m.and_then(|i| map[i])).collect();
        rows = edit.rows;
    }
    let mut out = VideoDna::new(s.source_id(), s.interval(), s.step(), s.dim(), rows)?;
    if let Some(c) = codes {
        out.set_bitcodes(c)?;
    }
    Ok((out, map))
}

fn spatial(rows: &[Vec<f32>], spec: &MutationSpec, dim: usize) -> Result<Edit> {
    let plan = SpatialPlan::new(spec, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
    let rows = rows
        .iter()
        .map(|r| plan.apply(r, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Edit {
        map: (0..rows.len()).map(Some).collect(),
        rows,
        copies: false,
    })
}

/// Picks the start of a `len`-long window in `0..=n-len`, honoring `at`.
fn window(spec: &MutationSpec, rng: &mut ChaCha8Rng, n: usize, len: usize) -> usize {
    let last = n - len;
    match spec.param("at") {
        Some(a) => (a as usize).min(last),
        None => rng.random_range(0..=last),
    }
}

fn temporal(
    rows: &[Vec<f32>],
    spec: &MutationSpec,
    dim: usize,
    donors: &[VideoDna],
) -> Result<Edit> {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let identity = |rows: Vec<Vec<f32>>, copies| Edit {
        map: (0..rows.len()).map(Some).collect(),
        rows,
        copies,
    };
    match spec.kind {
        MutationKind::Indel => {
            let len = spec.by_strength("length", SEGMENT) as usize;
            let insert = match spec.param("insert") {
                Some(v) => v == 1.0,
                None => rng.random_bool(0.5),
            };
            if insert {
                let at = match spec.param("at") {
                    Some(a) => (a as usize).min(n),
                    None => rng.random_range(0..=n),
                };
                let mut out = rows[..at].to_vec();
                out.extend(std::iter::repeat_n(vec![0.0; dim], len));
                out.extend_from_slice(&rows[at..]);
                let map = (0..at)
                    .map(Some)
                    .chain(std::iter::repeat_n(None, len))
                    .chain((at..n).map(Some))
                    .collect();
                Ok(Edit {
                    rows: out,
                    map,
                    copies: len == 0,
                })
            } else {
                let len = len.min(n - 1);
                let at = window(spec, &mut rng, n, len);
                let keep: Vec<usize> = (0..at).chain(at + len..n).collect();
                Ok(Edit {
                    rows: keep.iter().map(|&i| rows[i].clone()).collect(),
                    map: keep.into_iter().map(Some).collect(),
                    copies: true,
                })
            }
        }
        MutationKind::FadeBlend => {
            let len = (spec.by_strength("length", SEGMENT) as usize).min(n);
            let depth = spec.by_strength("depth", FADE_DEPTH);
            let at = window(spec, &mut rng, n, len);
            let mut out = rows.to_vec();
            for k in 0..len {
                // Triangular ramp down to (1 - depth) and back.
                let t = (k as f64 + 1.0) / (len as f64 + 1.0);
                let w = 1.0 - depth * (1.0 - (2.0 * t - 1.0).abs());
                out[at + k]
                    .iter_mut()
                    .for_each(|v| *v = (*v as f64 * w) as f32);
            }
            Ok(identity(out, len == 0 || depth == 0.0))
        }
        MutationKind::LocalSpeed => {
            let factor = spec.by_strength("factor", SPEED);
            let span = (spec.param("span").unwrap_or(SPEED_SPAN) as usize).min(n);
            let at = window(spec, &mut rng, n, span);
            let produced = ((span as f64 / factor).round() as usize).max(1);
            let mut out = rows[..at].to_vec();
            let mut map: Groundtruth = (0..at).map(Some).collect();
            let mut copies = true;
            let mut previous = None;
            for k in 0..produced {
                let src = at + ((k as f64 * factor).round() as usize).min(span - 1);
                out.push(rows[src].clone());
                if previous == Some(src) {
                    map.push(None);
                    copies = false;
                } else {
                    map.push(Some(src));
                }
                previous = Some(src);
            }
            out.extend_from_slice(&rows[at + span..]);
            map.extend((at + span..n).map(Some));
            Ok(Edit {
                rows: out,
                map,
                copies,
            })
        }
        MutationKind::SubstitutionSegment => {
            let len = (spec.by_strength("length", SEGMENT) as usize).min(n);
            let at = window(spec, &mut rng, n, len);
            let replacement = replacement_segment(rows, at, len, dim, donors, &mut rng)?;
            let mut out = rows.to_vec();
            out.splice(at..at + len, replacement);
            let map = (0..n)
                .map(|i| {
                    if i >= at && i < at + len {
                        None
                    } else {
                        Some(i)
                    }
                })
                .collect();
            Ok(Edit {
                rows: out,
                map,
                copies: len == 0,
            })
        }
        MutationKind::TimeShift => {
            let phase = spec.by_strength("phase", PHASE);
            if phase == 0.0 || n < 2 {
                return Ok(identity(rows.to_vec(), true));
            }
            // Interval i of the output covers [i + phase, i + 1 + phase) of
            // the input timeline, re-pooled by linear interpolation.
            let shift = phase.round() as usize;
            let out: Vec<Vec<f32>> = (0..n - 1)
                .map(|i| {
                    rows[i]
                        .iter()
                        .zip(&rows[i + 1])
                        .map(|(&a, &b)| ((1.0 - phase) * a as f64 + phase * b as f64) as f32)
                        .collect()
                })
                .collect();
            let map = (0..n - 1).map(|i| Some(i + shift)).collect();
            Ok(Edit {
                rows: out,
                map,
                copies: phase == 1.0,
            })
        }
        _ => Err(Error::KindMismatch(spec.kind.name())),
    }
}

/// A donor excerpt when donors are available, otherwise the original
/// segment with its words shuffled inside each quadrant block.
fn replacement_segment(
    rows: &[Vec<f32>],
    at: usize,
    len: usize,
    dim: usize,
    donors: &[VideoDna],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f32>>> {
    let usable: Vec<&VideoDna> = donors
        .iter()
        .filter(|d| d.len() >= len && d.dim() == dim)
        .collect();
    if !usable.is_empty() {
        let d = usable[rng.random_range(0..usable.len())];
        let start = rng.random_range(0..=d.len() - len);
        return Ok(d.rows()[start..start + len].to_vec());
    }
    let block = (dim / 4).max(1);
    let perms: Vec<Vec<usize>> = (0..dim.div_ceil(block))
        .map(|q| {
            let size = block.min(dim - q * block);
            let mut p: Vec<usize> = (0..size).collect();
            rand::seq::SliceRandom::shuffle(p.as_mut_slice(), rng);
            p
        })
        .collect();
    Ok(rows[at..at + len]
        .iter()
        .map(|r| {
            let mut out = vec![0.0; dim];
            for (q, p) in perms.iter().enumerate() {
                for (i, &j) in p.iter().enumerate() {
                    out[q * block + i] = r[q * block + j];
                }
            }
            out
        })
        .collect())
}
