//! Version phylogeny: alignment-based distances between sequences,
//! neighbor-joining guide trees, Newick dendrograms and progressive multiple
//! alignment.

mod msa;
mod newick;
mod nj;

use std::io::{BufRead, Write};

use rayon::prelude::*;

pub use msa::{progressive_msa, Msa};
pub use newick::{parse_newick, RootedNode, RootedTree};
pub use nj::{neighbor_joining, Join, PhyloTree};

use crate::align::{local_align, ScoringParams};
use crate::dna::VideoDna;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// `values` is row-major `n x n`.
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "{} values for {n} labels",
                values.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(Error::InvalidMatrix("empty label".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidMatrix(format!("duplicate label {l:?}")));
            }
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) = {v}")));
                }
                if (v - values[j * n + i]).abs() > 1e-9 {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    /// TSV with a `#`-prefixed header row of labels and one labelled row per
    /// sequence.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "#")?;
        for l in &self.labels {
            write!(w, "\t{l}")?;
        }
        writeln!(w)?;
        for (i, l) in self.labels.iter().enumerate() {
            write!(w, "{l}")?;
            for j in 0..self.len() {
                write!(w, "\t{}", self.get(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))?;
        let header = header?;
        let mut cols = header.split('\t');
        if cols.next() != Some("#") {
            return Err(Error::parse(1, "header must start with '#'"));
        }
        let labels: Vec<String> = cols.map(str::to_string).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut f = line.split('\t');
            let label = f.next().unwrap_or_default();
            if rows >= n || label != labels[rows] {
                return Err(Error::parse(
                    lineno,
                    format!("unexpected row label {label:?}"),
                ));
            }
            let row: Vec<f64> = f
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(lineno, format!("bad value {v:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::parse(
                    lineno,
                    format!("expected {n} values, found {}", row.len()),
                ));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(
                rows + 2,
                format!("expected {n} rows, found {rows}"),
            ));
        }
        DistanceMatrix::new(labels, values)
    }
}

/// Gap ratio and score of the local alignment of two sequences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDistance {
    /// Gap steps over path length, 1 for an empty path.
    pub distance: f64,
    pub score: f64,
}

pub fn pairwise_distance(x: &VideoDna, y: &VideoDna, scoring: &ScoringParams) -> Result<f64> {
    pairwise_alignment_distance(x, y, scoring).map(|p| p.distance)
}

pub fn pairwise_alignment_distance(
    x: &VideoDna,
    y: &VideoDna,
    scoring: &ScoringParams,
) -> Result<PairDistance> {
    let a = local_align(x, y, scoring)?;
    let distance = if a.is_empty() {
        1.0
    } else {
        a.gap_count() as f64 / a.len() as f64
    };
    Ok(PairDistance {
        distance,
        score: a.score,
    })
}

/// Distances between all pairs, labelled by source id. Each pair is aligned
/// once, with the lexicographically smaller label as `x`.
pub fn distance_matrix(sequences: &[VideoDna], scoring: &ScoringParams) -> Result<DistanceMatrix> {
    if sequences.len() < 2 {
        return Err(Error::EmptyInput("at least two sequences"));
    }
    let n = sequences.len();
    let labels: Vec<String> = sequences
        .iter()
        .map(|s| s.source_id().to_string())
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let distances = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = if labels[i] <= labels[j] {
                (i, j)
            } else {
                (j, i)
            };
            pairwise_distance(&sequences[a], &sequences[b], scoring)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(distances) {
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    DistanceMatrix::new(labels, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcode::Bitcode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(id: &str, codes: Vec<Bitcode>) -> VideoDna {
        VideoDna::from_codes(id, codes).unwrap()
    }

    fn random_codes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Bitcode> {
        (0..n)
            .map(|_| Bitcode::from_u64(rng.random(), 64))
            .collect()
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ScoringParams::bitcode(32.0).unwrap();
        // Top halves all zero here and all one below: every cross pair
        // differs in at least 32 bits, so no substitution scores positive.
        let codes: Vec<Bitcode> = (0..10)
            .map(|_| Bitcode::from_u64(rng.random::<u32>() as u64, 64))
            .collect();
        let x = seq("x", codes.clone());
        assert_eq!(pairwise_distance(&x, &x, &p).unwrap(), 0.0);
        let far = seq(
            "f",
            (0..10)
                .map(|_| Bitcode::from_u64(rng.random::<u64>() | 0xFFFF_FFFF << 32, 64))
                .collect(),
        );
        assert_eq!(pairwise_distance(&x, &far, &p).unwrap(), 1.0);
        let mut del = codes.clone();
        del.remove(6);
        del.remove(3);
        let y = seq("y", del);
        assert_eq!(pairwise_distance(&x, &y, &p).unwrap(), 0.2);
    }

    #[test]
    fn matrix_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ScoringParams::bitcode(32.0).unwrap();
        let base = random_codes(&mut rng, 30);
        let seqs: Vec<VideoDna> = (0..4)
            .map(|k| {
                let mut c = base.clone();
                for _ in 0..k {
                    let at = rng.random_range(5..c.len() - 5);
                    c.remove(at);
                }
                seq(&format!("v{k}"), c)
            })
            .collect();
        let m = distance_matrix(&seqs, &p).unwrap();
        assert_eq!(m.len(), 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!((0.0..=1.0).contains(&m.get(i, j)));
            }
        }
        let mut rev = seqs.clone();
        rev.reverse();
        let r = distance_matrix(&rev, &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), r.get(3 - i, 3 - j));
            }
        }
        let same = vec![
            seq("a", base.clone()),
            seq("b", base.clone()),
            seq("c", base),
        ];
        let z = distance_matrix(&same, &p).unwrap();
        assert!((0..9).all(|k| z.get(k / 3, k % 3) == 0.0));
    }

    #[test]
    fn tsv_roundtrip_and_validation() {
        let m = DistanceMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.0, 0.5, 0.25, 0.5, 0.0, 1.0, 0.25, 1.0, 0.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_tsv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "#\ta\tb\tc\na\t0\t0.5\t0.25\nb\t0.5\t0\t1\nc\t0.25\t1\t0\n"
        );
        assert_eq!(DistanceMatrix::read_tsv(&buf[..]).unwrap(), m);
        assert!(
            DistanceMatrix::new(vec!["a".into(), "b".into()], vec![0.0, 1.0, 2.0, 0.0]).is_err()
        );
        assert!(DistanceMatrix::new(vec!["a".into()], vec![1.0]).is_err());
    }
}
