//! Positive and negative nucleotide pairs for metric training.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spatial::mutate_values;
use super::MutationSpec;
use crate::dna::{VideoDna, VisualNucleotide};
use crate::error::{Error, Result};
use crate::metric::TrainingSet;

/// Where one side of a pair came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairOrigin {
    pub source_id: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub left: VisualNucleotide,
    pub right: VisualNucleotide,
    pub left_origin: PairOrigin,
    pub right_origin: PairOrigin,
    /// The mutation turning `left` into `right`, for positives.
    pub mutation: Option<MutationSpec>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairSet {
    pub positives: Vec<Pair>,
    pub negatives: Vec<Pair>,
}

/// Samples `n_pos` nucleotides paired with a random-spec mutation of
/// themselves and `n_neg` pairs of nucleotides from different sources.
pub fn generate_training_pairs(
    corpus: &[VideoDna],
    specs: &[MutationSpec],
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<PairSet> {
    let sources: BTreeSet<&str> = corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.source_id())
        .collect();
    if sources.len() < 2 {
        return Err(Error::InsufficientSources(sources.len()));
    }
    if n_pos > 0 && specs.is_empty() {
        return Err(Error::InvalidParameter(
            "positive pairs need at least one mutation spec".into(),
        ));
    }
    if let Some(s) = specs.iter().find(|s| !s.kind.is_spatial()) {
        return Err(Error::KindMismatch(s.kind.name()));
    }
    // Flat index over all nucleotides for uniform sampling.
    let mut offsets = Vec::with_capacity(corpus.len());
    let mut total = 0usize;
    for s in corpus {
        offsets.push(total);
        total += s.len();
    }
    let locate = |flat: usize| -> (usize, usize) {
        let seq = offsets.partition_point(|&o| o <= flat) - 1;
        (seq, flat - offsets[seq])
    };
    let origin = |(seq, i): (usize, usize)| PairOrigin {
        source_id: corpus[seq].source_id().to_string(),
        index: i,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PairSet::default();
    for _ in 0..n_pos {
        let at = locate(rng.random_range(0..total));
        let spec = specs[rng.random_range(0..specs.len())]
            .clone()
            .with_seed(rng.random());
        let left = corpus[at.0].nucleotide(at.1);
        let right = VisualNucleotide {
            values: mutate_values(&left.values, &spec)?,
            ..left.clone()
        };
        set.positives.push(Pair {
            left,
            right,
            left_origin: origin(at),
            right_origin: origin(at),
            mutation: Some(spec),
        });
    }
    for _ in 0..n_neg {
        let a = locate(rng.random_range(0..total));
        let b = loop {
            let b = locate(rng.random_range(0..total));
            if corpus[b.0].source_id() != corpus[a.0].source_id() {
                break b;
            }
        };
        set.negatives.push(Pair {
            left: corpus[a.0].nucleotide(a.1),
            right: corpus[b.0].nucleotide(b.1),
            left_origin: origin(a),
            right_origin: origin(b),
            mutation: None,
        });
    }
    Ok(set)
}

const MANIFEST_HEADER: &str = "# set\tleft_source\tleft_index\tright_source\tright_index\tmutation";

impl PairSet {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_training_set(&self) -> TrainingSet {
        let raw = |p: &[Pair]| {
            p.iter()
                .map(|p| (p.left.values.clone(), p.right.values.clone()))
                .collect()
        };
        TrainingSet {
            positives: raw(&self.positives),
            negatives: raw(&self.negatives),
        }
    }

    fn all(&self) -> impl Iterator<Item = &Pair> {
        self.positives.iter().chain(&self.negatives)
    }

    /// Writes `left.vdna`, `right.vdna` (positives first) and `manifest.tsv`
    /// into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let dim = self.all().next().map_or(0, |p| p.left.values.len());
        for (name, side) in [("left.vdna", true), ("right.vdna", false)] {
            let rows = self
                .all()
                .map(|p| {
                    if side {
                        p.left.values.clone()
                    } else {
                        p.right.values.clone()
                    }
                })
                .collect();
            let dna = VideoDna::new("pairs", 2.0, 1.0, dim, rows)?;
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            dna.write_to(&mut w)?;
            w.flush()?;
        }
        let mut w = BufWriter::new(File::create(dir.join("manifest.tsv"))?);
        writeln!(w, "{MANIFEST_HEADER}")?;
        for (set, pairs) in [("pos", &self.positives), ("neg", &self.negatives)] {
            for p in pairs {
                let m = p
                    .mutation
                    .as_ref()
                    .map_or("-".to_string(), |m| m.to_string());
                writeln!(
                    w,
                    "{set}\t{}\t{}\t{}\t{}\t{m}",
                    p.left_origin.source_id,
                    p.left_origin.index,
                    p.right_origin.source_id,
                    p.right_origin.index
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<PairSet> {
        let read = |name: &str| -> Result<VideoDna> {
            VideoDna::read_from(BufReader::new(File::open(dir.join(name))?), "pairs")
        };
        let (left, right) = (read("left.vdna")?, read("right.vdna")?);
        let manifest = BufReader::new(File::open(dir.join("manifest.tsv"))?);
        let mut set = PairSet::default();
        let mut k = 0usize;
        for (ln, line) in manifest.lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::parse(ln + 1, m.to_string());
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 tab-separated fields"));
            }
            if k >= left.len() || k >= right.len() {
                return Err(bad(
                    "manifest lists more pairs than the sequence files hold",
                ));
            }
            let index = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
            let mutation = match f[5] {
                "-" => None,
                m => Some(MutationSpec::parse_line(m).map_err(|e| bad(&e.to_string()))?),
            };
            let left_origin = PairOrigin {
                source_id: f[1].to_string(),
                index: index(f[2])?,
            };
            let right_origin = PairOrigin {
                source_id: f[3].to_string(),
                index: index(f[4])?,
            };
            let nucleotide = |s: &VideoDna, o: &PairOrigin| VisualNucleotide {
                values: s.row(k).to_vec(),
                interval_start: o.index as f64 * s.step() as f64,
                interval_length: s.interval() as f64,
            };
            let pair = Pair {
                left: nucleotide(&left, &left_origin),
                right: nucleotide(&right, &right_origin),
                left_origin,
                right_origin,
                mutation,
            };
            match f[0] {
                "pos" => set.positives.push(pair),
                "neg" => set.negatives.push(pair),
                _ => return Err(bad("set must be pos or neg")),
            }
            k += 1;
        }
        if k != left.len() || k != right.len() {
            return Err(Error::InvalidParameter(format!(
                "manifest lists {k} pairs, sequence files hold {} and {}",
                left.len(),
                right.len()
            )));
        }
        Ok(set)
    }
}
