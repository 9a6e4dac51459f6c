//! Video DNA: the timed sequence of visual nucleotides of one video.

use std::io::{Read, Write};

use crate::binio::{BinReader, BinWrite};
use crate::bitcode::Bitcode;
use crate::error::{Error, Result};

/// One pooled bag-of-features vector with its time interval.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualNucleotide {
    pub values: Vec<f32>,
    pub interval_start: f64,
    pub interval_length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoDna {
    source_id: String,
    interval: f32,
    step: f32,
    dim: usize,
    rows: Vec<Vec<f32>>,
    bitcodes: Option<Vec<Bitcode>>,
    /// Indices of intervals that had no frames and were zero-filled.
    empty_intervals: Vec<usize>,
}

impl VideoDna {
    pub fn new(
        source_id: impl Into<String>,
        interval: f32,
        step: f32,
        dim: usize,
        rows: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if !(interval > 0.0 && step > 0.0 && step <= interval) {
            return Err(Error::InvalidParameter(format!(
                "interval {interval} / step {step} must satisfy 0 < step <= T"
            )));
        }
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        Ok(VideoDna {
            source_id: source_id.into(),
            interval,
            step,
            dim,
            rows,
            bitcodes: None,
            empty_intervals: Vec::new(),
        })
    }

    /// A sequence with the default timing (T = 2 s, step = 1 s).
    pub fn with_rows(source_id: impl Into<String>, rows: Vec<Vec<f32>>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        VideoDna::new(source_id, 2.0, 1.0, dim, rows)
    }

    /// A sequence holding bitcodes only (zero-dimensional nucleotides).
    pub fn from_codes(source_id: impl Into<String>, codes: Vec<Bitcode>) -> Result<Self> {
        let rows = vec![Vec::new(); codes.len()];
        VideoDna::new(source_id, 2.0, 1.0, 0, rows)?.with_bitcodes(codes)
    }

    pub fn with_bitcodes(mut self, codes: Vec<Bitcode>) -> Result<Self> {
        self.set_bitcodes(codes)?;
        Ok(self)
    }

    pub fn set_bitcodes(&mut self, codes: Vec<Bitcode>) -> Result<()> {
        if codes.len() != self.rows.len() {
            return Err(Error::InvalidParameter(format!(
                "{} bitcodes for {} nucleotides",
                codes.len(),
                self.rows.len()
            )));
        }
        if let Some(first) = codes.first() {
            if codes.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidParameter("bitcodes of unequal length".into()));
            }
        }
        self.bitcodes = Some(codes);
        Ok(())
    }

    pub fn clear_bitcodes(&mut self) {
        self.bitcodes = None;
    }

    pub fn set_source_id(&mut self, id: impl Into<String>) {
        self.source_id = id.into();
    }

    pub fn set_empty_intervals(&mut self, idx: Vec<usize>) {
        self.empty_intervals = idx;
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Interval length T in seconds.
    pub fn interval(&self) -> f32 {
        self.interval
    }

    /// Interval step in seconds.
    pub fn step(&self) -> f32 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f32>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f32>> {
        self.rows
    }

    pub fn nucleotide(&self, i: usize) -> VisualNucleotide {
        VisualNucleotide {
            values: self.rows[i].clone(),
            interval_start: i as f64 * self.step as f64,
            interval_length: self.interval as f64,
        }
    }

    pub fn bitcodes(&self) -> Option<&[Bitcode]> {
        self.bitcodes.as_deref()
    }

    /// Width of the attached bitcodes, 0 when absent.
    pub fn code_bits(&self) -> usize {
        self.bitcodes
            .as_ref()
            .and_then(|c| c.first())
            .map_or(0, |c| c.len())
    }

    pub fn empty_intervals(&self) -> &[usize] {
        &self.empty_intervals
    }

    /// Contiguous excerpt `[start, end)` keeping timing and bitcodes.
    pub fn slice(&self, start: usize, end: usize) -> VideoDna {
        VideoDna {
            source_id: self.source_id.clone(),
            interval: self.interval,
            step: self.step,
            dim: self.dim,
            rows: self.rows[start..end].to_vec(),
            bitcodes: self.bitcodes.as_ref().map(|c| c[start..end].to_vec()),
            empty_intervals: self
                .empty_intervals
                .iter()
                .filter(|&&i| i >= start && i < end)
                .map(|i| i - start)
                .collect(),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.code_bits();
        w.write_all(b"VDNA")?;
        w.put_u32(1)?;
        w.put_f32(self.interval)?;
        w.put_f32(self.step)?;
        w.put_u32(self.dim as u32)?;
        w.put_u32(n as u32)?;
        w.put_u64(self.rows.len() as u64)?;
        for r in &self.rows {
            w.put_f32s(r)?;
        }
        if let Some(codes) = &self.bitcodes {
            if n > 0 {
                for c in codes {
                    w.write_all(&c.to_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reads a VDNA stream; the source id is not stored in the file.
    pub fn read_from<R: Read>(r: R, source_id: impl Into<String>) -> Result<Self> {
        let mut r = BinReader::new(r);
        r.magic(b"VDNA")?;
        r.version(1)?;
        let at = r.offset();
        let interval = r.f32()?;
        let step = r.f32()?;
        if !(interval > 0.0 && step > 0.0 && step <= interval) {
            return Err(Error::format(at, "invalid interval/step"));
        }
        let dim = r.u32()? as usize;
        let n = r.u32()? as usize;
        let count = r.u64()? as usize;
        let mut rows = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            rows.push(r.f32_vec(dim)?);
        }
        let bitcodes = if n > 0 {
            let nbytes = n.div_ceil(8);
            let mut codes = Vec::with_capacity(count);
            for _ in 0..count {
                let at = r.offset();
                let b = r.bytes(nbytes)?;
                codes.push(
                    Bitcode::from_bytes(&b, n).map_err(|e| Error::format(at, e.to_string()))?,
                );
            }
            Some(codes)
        } else {
            None
        };
        r.finish()?;
        Ok(VideoDna {
            source_id: source_id.into(),
            interval,
            step,
            dim,
            rows,
            bitcodes,
            empty_intervals: Vec::new(),
        })
    }
}
