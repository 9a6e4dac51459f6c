use std::collections::HashMap;

use super::nj::PhyloTree;
use crate::align::{align_by, AlignOptions, ScoringMode, ScoringParams, Step};
use crate::dna::VideoDna;
use crate::error::{Error, Result};
use crate::metric::tfidf_distance;

/// Gapped rows, one per input sequence in input order; `None` is a gap.
#[derive(Clone, Debug, PartialEq)]
pub struct Msa {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<Option<usize>>>,
}

impl Msa {
    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Positions of row `r` with gaps removed.
    pub fn degapped(&self, r: usize) -> Vec<usize> {
        self.rows[r].iter().flatten().copied().collect()
    }

    /// One line per row: label, tab, space-separated positions with `-` for
    /// gaps.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (label, row) in self.labels.iter().zip(&self.rows) {
            out.push_str(label);
            out.push('\t');
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or_else(|| "-".to_string(), |p| p.to_string()))
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

struct Profile {
    members: Vec<usize>,
    rows: Vec<Vec<Option<usize>>>,
}

impl Profile {
    fn len(&self) -> usize {
        self.rows[0].len()
    }

    fn means(&self, seqs: &[VideoDna]) -> Vec<Vec<f32>> {
        let d = seqs[self.members[0]].dim();
        (0..self.len())
            .map(|c| {
                let mut acc = vec![0f64; d];
                let mut k = 0usize;
                for (m, row) in self.members.iter().zip(&self.rows) {
                    if let Some(p) = row[c] {
                        for (a, &v) in acc.iter_mut().zip(seqs[*m].row(p)) {
                            *a += v as f64;
                        }
                        k += 1;
                    }
                }
                acc.iter().map(|a| (a / k.max(1) as f64) as f32).collect()
            })
            .collect()
    }
}

fn merge(a: Profile, b: Profile, seqs: &[VideoDna], scoring: &ScoringParams) -> Result<Profile> {
    let ScoringMode::Tfidf { idf, rho } = &scoring.mode else {
        return Err(Error::ModeMismatch("profiles are aligned in tf-idf mode"));
    };
    let (ma, mb) = (a.means(seqs), b.means(seqs));
    let s0 = scoring.match_scale;
    let sigma = |i: usize, j: usize| {
        let d = tfidf_distance(&ma[i], &mb[j], idf).expect("dimensions checked");
        s0 * (1.0 - d / rho)
    };
    let al = align_by(
        ma.len(),
        mb.len(),
        sigma,
        scoring.gap,
        &AlignOptions::global(),
    )?;
    let mut rows: Vec<Vec<Option<usize>>> =
        vec![Vec::with_capacity(al.len()); a.rows.len() + b.rows.len()];
    for step in &al.steps {
        let (ca, cb) = match *step {
            Step::Match(i, j) => (Some(i), Some(j)),
            Step::GapY(i) => (Some(i), None),
            Step::GapX(j) => (None, Some(j)),
        };
        for (r, src) in a.rows.iter().enumerate() {
            rows[r].push(ca.and_then(|c| src[c]));
        }
        for (r, src) in b.rows.iter().enumerate() {
            rows[a.rows.len() + r].push(cb.and_then(|c| src[c]));
        }
    }
    let mut members = a.members;
    members.extend(b.members);
    Ok(Profile { members, rows })
}

/// Progressive alignment along the guide tree's join order, ending with the
/// last two clusters. Gaps, once inserted, are kept.
pub fn progressive_msa(
    sequences: &[VideoDna],
    tree: &PhyloTree,
    scoring: &ScoringParams,
) -> Result<Msa> {
    let ScoringMode::Tfidf { idf, .. } = &scoring.mode else {
        return Err(Error::ModeMismatch("profiles are aligned in tf-idf mode"));
    };
    let mut by_label: HashMap<&str, usize> = HashMap::new();
    for (k, s) in sequences.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::EmptyInput("sequence in alignment"));
        }
        if s.dim() != idf.dim() {
            return Err(Error::DimensionMismatch {
                expected: idf.dim(),
                got: s.dim(),
            });
        }
        if by_label.insert(s.source_id(), k).is_some() {
            return Err(Error::LabelMismatch(format!(
                "duplicate sequence id {:?}",
                s.source_id()
            )));
        }
    }
    if tree.labels().len() != sequences.len() {
        return Err(Error::LabelMismatch(format!(
            "{} leaves for {} sequences",
            tree.labels().len(),
            sequences.len()
        )));
    }
    let mut profiles: HashMap<usize, Profile> = HashMap::new();
    for (leaf, label) in tree.labels().iter().enumerate() {
        let &k = by_label
            .get(label.as_str())
            .ok_or_else(|| Error::LabelMismatch(format!("no sequence for leaf {label:?}")))?;
        profiles.insert(
            leaf,
            Profile {
                members: vec![k],
                rows: vec![(0..sequences[k].len()).map(Some).collect()],
            },
        );
    }
    let take = |profiles: &mut HashMap<usize, Profile>, node: usize| {
        profiles
            .remove(&node)
            .ok_or_else(|| Error::LabelMismatch(format!("tree node {node} used twice")))
    };
    for j in tree.joins() {
        let a = take(&mut profiles, j.left)?;
        let b = take(&mut profiles, j.right)?;
        let merged = merge(a, b, sequences, scoring)?;
        profiles.insert(j.node, merged);
    }
    let (a, b, _) = tree.final_edge();
    let pa = take(&mut profiles, a)?;
    let pb = take(&mut profiles, b)?;
    let all = merge(pa, pb, sequences, scoring)?;

    let mut rows = vec![Vec::new(); sequences.len()];
    for (m, row) in all.members.into_iter().zip(all.rows) {
        rows[m] = row;
    }
    Ok(Msa {
        labels: sequences
            .iter()
            .map(|s| s.source_id().to_string())
            .collect(),
        rows,
    })
}
