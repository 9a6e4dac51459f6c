//! Seed-and-extend search over bitcode sequences: every code is split into
//! B bands, each band value keys an inverted list, band collisions are chained
//! along diagonals and the best diagonals are refined by banded alignment.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::align::{align_by, AlignOptions, Alignment, ScoringMode, ScoringParams, Step};
use crate::binio::{BinReader, BinWrite};
use crate::bitcode::Bitcode;
use crate::dna::VideoDna;
use crate::error::{Error, Result};

pub const DEFAULT_BANDS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    pub id: u64,
    pub length: u32,
    pub source_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Posting {
    /// Index into the catalog.
    pub sequence: u32,
    pub position: u32,
}

#[derive(Clone, Debug)]
pub struct BandIndex {
    bits: usize,
    bands: usize,
    catalog: Vec<CatalogEntry>,
    postings: Vec<HashMap<u64, Vec<Posting>>>,
    codes: Vec<Vec<Bitcode>>,
}

impl PartialEq for BandIndex {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits
            && self.bands == other.bands
            && self.catalog == other.catalog
            && self.codes == other.codes
            && self.postings == other.postings
    }
}

fn band_width(bits: usize, bands: usize) -> Result<usize> {
    if bands == 0 || bits == 0 || !bits.is_multiple_of(bands) {
        return Err(Error::BandMismatch(format!(
            "{bands} bands do not divide {bits} bits"
        )));
    }
    let w = bits / bands;
    if w > 64 {
        return Err(Error::BandMismatch(format!(
            "band width {w} exceeds 64 bits"
        )));
    }
    Ok(w)
}

impl BandIndex {
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn band_width(&self) -> usize {
        self.bits / self.bands
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.catalog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalog.is_empty()
    }

    /// Total indexed nucleotides.
    pub fn nucleotides(&self) -> usize {
        self.codes.iter().map(|c| c.len()).sum()
    }

    pub fn codes(&self, sequence: usize) -> &[Bitcode] {
        &self.codes[sequence]
    }

    /// Postings under band `band` with value `value`.
    pub fn postings(&self, band: usize, value: u64) -> &[Posting] {
        self.postings[band]
            .get(&value)
            .map_or(&[], |v| v.as_slice())
    }

    pub fn posting_count(&self) -> usize {
        self.postings
            .iter()
            .flat_map(|m| m.values())
            .map(|v| v.len())
            .sum()
    }

    pub(crate) fn band_value(&self, code: &Bitcode, band: usize) -> u64 {
        let w = self.band_width();
        code.bit_range(band * w, w)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let width_bytes = self.band_width().div_ceil(8);
        w.write_all(b"VDIX")?;
        w.put_u32(1)?;
        w.put_u32(self.bits as u32)?;
        w.put_u32(self.bands as u32)?;
        w.put_u32(self.catalog.len() as u32)?;
        for e in &self.catalog {
            w.put_u64(e.id)?;
            w.put_u32(e.length)?;
            w.put_string(&e.source_id)?;
        }
        for band in &self.postings {
            let mut keys: Vec<u64> = band.keys().copied().collect();
            keys.sort_unstable();
            w.put_u32(keys.len() as u32)?;
            for k in keys {
                let list = &band[&k];
                w.put_uint(k, width_bytes)?;
                w.put_u32(list.len() as u32)?;
                for p in list {
                    w.put_u64(self.catalog[p.sequence as usize].id)?;
                    w.put_u32(p.position)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BinReader::new(r);
        r.magic(b"VDIX")?;
        r.version(1)?;
        let at = r.offset();
        let bits = r.u32()? as usize;
        let bands = r.u32()? as usize;
        let width = band_width(bits, bands).map_err(|e| Error::format(at, e.to_string()))?;
        let width_bytes = width.div_ceil(8);
        let count = r.u32()? as usize;
        let mut catalog = Vec::with_capacity(count.min(1 << 20));
        let mut by_id = HashMap::new();
        for k in 0..count {
            let at = r.offset();
            let id = r.u64()?;
            let length = r.u32()?;
            let source_id = r.string()?;
            if by_id.insert(id, k as u32).is_some() {
                return Err(Error::format(at, format!("duplicate sequence id {id}")));
            }
            catalog.push(CatalogEntry {
                id,
                length,
                source_id,
            });
        }
        let mut codes: Vec<Vec<Bitcode>> = catalog
            .iter()
            .map(|e| vec![Bitcode::zeros(bits); e.length as usize])
            .collect();
        let mut seen: Vec<Vec<u32>> = catalog.iter().map(|e| vec![0; e.length as usize]).collect();
        let mut postings = Vec::with_capacity(bands);
        for band in 0..bands {
            let buckets = r.u32()? as usize;
            let mut map: HashMap<u64, Vec<Posting>> = HashMap::with_capacity(buckets.min(1 << 20));
            let mut last_key = None;
            for _ in 0..buckets {
                let at = r.offset();
                let key = r.uint(width_bytes)?;
                if width < 64 && key >> width != 0 {
                    return Err(Error::format(at, "band value wider than band"));
                }
                if last_key.is_some_and(|k| k >= key) {
                    return Err(Error::format(at, "band values out of order"));
                }
                last_key = Some(key);
                let n = r.u32()? as usize;
                let mut list = Vec::with_capacity(n.min(1 << 20));
                for _ in 0..n {
                    let at = r.offset();
                    let id = r.u64()?;
                    let position = r.u32()?;
                    let &sequence = by_id
                        .get(&id)
                        .ok_or_else(|| Error::format(at, format!("unknown sequence id {id}")))?;
                    let s = sequence as usize;
                    if position as usize >= codes[s].len() {
                        return Err(Error::format(at, "posting position out of range"));
                    }
                    let code = &mut codes[s][position as usize];
                    for b in 0..width {
                        code.set(band * width + b, (key >> (width - 1 - b)) & 1 == 1);
                    }
                    seen[s][position as usize] += 1;
                    list.push(Posting { sequence, position });
                }
                map.insert(key, list);
            }
            postings.push(map);
        }
        let end = r.offset();
        r.finish()?;
        if seen.iter().flatten().any(|&c| c as usize != bands) {
            return Err(Error::format(
                end,
                "some positions are not indexed under every band",
            ));
        }
        Ok(BandIndex {
            bits,
            bands,
            catalog,
            postings,
            codes,
        })
    }
}

/// Indexes sequences under ids `0..sequences.len()`.
pub fn build_index(sequences: &[VideoDna], bands: usize) -> Result<BandIndex> {
    let ids: Vec<u64> = (0..sequences.len() as u64).collect();
    build_index_with_ids(sequences, &ids, bands)
}

pub fn build_index_with_ids(
    sequences: &[VideoDna],
    ids: &[u64],
    bands: usize,
) -> Result<BandIndex> {
    if ids.len() != sequences.len() {
        return Err(Error::InvalidParameter(
            "one id per sequence required".into(),
        ));
    }
    let mut bits = None;
    for s in sequences {
        let codes = s.bitcodes().ok_or(Error::MissingBitcodes)?;
        if codes.is_empty() {
            continue;
        }
        match bits {
            None => bits = Some(s.code_bits()),
            Some(b) if b != s.code_bits() => {
                return Err(Error::BandMismatch(format!(
                    "mixed code widths {b} and {}",
                    s.code_bits()
                )))
            }
            _ => {}
        }
    }
    let bits = bits.ok_or(Error::EmptyIndex)?;
    let width = band_width(bits, bands)?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
        return Err(Error::InvalidParameter(format!(
            "duplicate sequence id {dup}"
        )));
    }
    let mut index = BandIndex {
        bits,
        bands,
        catalog: Vec::with_capacity(sequences.len()),
        postings: vec![HashMap::new(); bands],
        codes: Vec::with_capacity(sequences.len()),
    };
    for (k, (s, &id)) in sequences.iter().zip(ids).enumerate() {
        let codes = s.bitcodes().ok_or(Error::MissingBitcodes)?;
        if codes.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter("sequence too long to index".into()));
        }
        for (pos, code) in codes.iter().enumerate() {
            for band in 0..bands {
                let v = code.bit_range(band * width, width);
                index.postings[band].entry(v).or_default().push(Posting {
                    sequence: k as u32,
                    position: pos as u32,
                });
            }
        }
        index.catalog.push(CatalogEntry {
            id,
            length: codes.len() as u32,
            source_id: s.source_id().to_string(),
        });
        index.codes.push(codes.to_vec());
    }
    Ok(index)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeedHit {
    /// Catalog index of the hit sequence.
    pub sequence: u32,
    pub db_position: u32,
    pub query_position: u32,
}

impl SeedHit {
    pub fn diagonal(&self) -> i64 {
        self.db_position as i64 - self.query_position as i64
    }
}

fn query_codes(query: &VideoDna, index: &BandIndex) -> Result<Vec<Bitcode>> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let codes = query.bitcodes().ok_or(Error::MissingBitcodes)?;
    if query.code_bits() != index.bits {
        return Err(Error::BandMismatch(format!(
            "query codes have {} bits, index has {}",
            query.code_bits(),
            index.bits
        )));
    }
    Ok(codes.to_vec())
}

/// Band collisions of every query position, one hit per (query position,
/// indexed position) however many bands collide; sorted by sequence, then
/// db position, then query position.
pub fn seed_hits(query: &VideoDna, index: &BandIndex) -> Result<Vec<SeedHit>> {
    let codes = query_codes(query, index)?;
    Ok(seed_hits_for(&codes, index))
}

fn seed_hits_for(codes: &[Bitcode], index: &BandIndex) -> Vec<SeedHit> {
    let mut hits = Vec::new();
    let mut local = Vec::new();
    for (q, code) in codes.iter().enumerate() {
        local.clear();
        for band in 0..index.bands {
            local.extend_from_slice(index.postings(band, index.band_value(code, band)));
        }
        local.sort_unstable();
        local.dedup();
        hits.extend(local.iter().map(|p| SeedHit {
            sequence: p.sequence,
            db_position: p.position,
            query_position: q as u32,
        }));
    }
    hits.sort_unstable();
    hits
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub sequence: u32,
    pub diagonal: i64,
    pub hit_count: usize,
}

/// Groups hits by (sequence, diagonal bin of width `diagonal_slack`) and keeps
/// bins holding at least `min_seeds` hits. Each candidate's diagonal is the
/// most frequent one in its bin (lowest on ties).
pub fn chain_diagonals(
    hits: &[SeedHit],
    min_seeds: usize,
    diagonal_slack: usize,
) -> Vec<Candidate> {
    let slack = diagonal_slack.max(1) as i64;
    let mut keyed: Vec<(u32, i64, i64)> = hits
        .iter()
        .map(|h| (h.sequence, h.diagonal().div_euclid(slack), h.diagonal()))
        .collect();
    keyed.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let (seq, bin, _) = keyed[i];
        let mut j = i;
        let (mut best_diag, mut best_run) = (keyed[i].2, 0);
        while j < keyed.len() && keyed[j].0 == seq && keyed[j].1 == bin {
            let d = keyed[j].2;
            let mut k = j;
            while k < keyed.len() && keyed[k].0 == seq && keyed[k].1 == bin && keyed[k].2 == d {
                k += 1;
            }
            if k - j > best_run {
                best_run = k - j;
                best_diag = d;
            }
            j = k;
        }
        if j - i >= min_seeds {
            out.push(Candidate {
                sequence: seq,
                diagonal: best_diag,
                hit_count: j - i,
            });
        }
        i = j;
    }
    out.sort_by(|a, b| {
        b.hit_count
            .cmp(&a.hit_count)
            .then(a.sequence.cmp(&b.sequence))
            .then(a.diagonal.cmp(&b.diagonal))
    });
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchParams {
    pub min_seeds: usize,
    pub diagonal_slack: usize,
    pub band_halfwidth: usize,
    pub shortlist_cap: usize,
    pub scoring: ScoringParams,
}

impl SearchParams {
    pub fn new(scoring: ScoringParams) -> Self {
        SearchParams {
            min_seeds: 3,
            diagonal_slack: 2,
            band_halfwidth: 4,
            shortlist_cap: 50,
            scoring,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchHit {
    pub sequence_id: u64,
    pub source_id: String,
    /// Database position aligned with query position 0.
    pub db_offset: i64,
    pub score: f64,
    pub hit_count: usize,
    /// Alignment in query / database coordinates.
    pub alignment: Alignment,
}

/// Seeds, chains, refines and ranks (score descending, then sequence id,
/// then offset). One result per (sequence, offset).
pub fn search(
    query: &VideoDna,
    index: &BandIndex,
    params: &SearchParams,
) -> Result<Vec<SearchHit>> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let codes = query_codes(query, index)?;
    let threshold = match params.scoring.mode {
        ScoringMode::Bitcode { threshold } => threshold,
        ScoringMode::Tfidf { .. } => return Err(Error::ModeMismatch("search scores bitcodes")),
    };
    let s0 = params.scoring.match_scale;
    let hits = seed_hits_for(&codes, index);
    let mut shortlist = chain_diagonals(&hits, params.min_seeds, params.diagonal_slack);
    shortlist.truncate(params.shortlist_cap);

    let m = codes.len();
    let hw = params.band_halfwidth as i64;
    let mut results: Vec<SearchHit> = Vec::with_capacity(shortlist.len());
    for cand in &shortlist {
        let db = &index.codes[cand.sequence as usize];
        let lo = (cand.diagonal - hw).max(0);
        let hi = (cand.diagonal + m as i64 + hw).min(db.len() as i64);
        if lo >= hi {
            continue;
        }
        let window = &db[lo as usize..hi as usize];
        let sigma = |i: usize, j: usize| {
            let h = codes[i].hamming_unchecked(&window[j]) as f64;
            s0 * (threshold - h) / threshold
        };
        let opts = AlignOptions::banded(cand.diagonal - lo, params.band_halfwidth);
        let mut a = align_by(m, window.len(), sigma, params.scoring.gap, &opts)?;
        if a.is_empty() {
            continue;
        }
        let shift = lo as usize;
        for s in &mut a.steps {
            match s {
                Step::Match(_, j) | Step::GapX(j) => *j += shift,
                Step::GapY(_) => {}
            }
        }
        a.y_span = a.y_span.start + shift..a.y_span.end + shift;
        let entry = &index.catalog[cand.sequence as usize];
        results.push(SearchHit {
            sequence_id: entry.id,
            source_id: entry.source_id.clone(),
            db_offset: a.y_span.start as i64 - a.x_span.start as i64,
            score: a.score,
            hit_count: cand.hit_count,
            alignment: a,
        });
    }
    results.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.sequence_id.cmp(&b.sequence_id))
            .then(a.db_offset.cmp(&b.db_offset))
    });
    let mut seen = std::collections::HashSet::new();
    results.retain(|r| seen.insert((r.sequence_id, r.db_offset)));
    Ok(results)
}

/// Results as TSV: `rank seq_id offset score`, ranks from 1.
pub fn write_results_tsv<W: Write>(w: &mut W, results: &[SearchHit]) -> Result<()> {
    writeln!(w, "# rank\tseq_id\toffset\tscore")?;
    for (k, r) in results.iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            k + 1,
            r.sequence_id,
            r.db_offset,
            r.score
        )?;
    }
    Ok(())
}
