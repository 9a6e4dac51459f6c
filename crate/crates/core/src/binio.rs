//! Little-endian binary framing shared by all on-disk formats.
//!
//! Readers track the byte offset so that malformed files can be reported
//! precisely.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) struct BinReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> BinReader<R> {
    pub fn new(inner: R) -> Self {
        BinReader { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn wrap<T>(&mut self, width: u64, r: std::io::Result<T>) -> Result<T> {
        match r {
            Ok(v) => {
                self.offset += width;
                Ok(v)
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(Error::format(self.offset, "unexpected end of file"))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.offset;
        let got = self.bytes(4)?;
        if got != expected {
            return Err(Error::format(
                at,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u32) -> Result<()> {
        let at = self.offset;
        let v = self.u32()?;
        if v != expected {
            return Err(Error::format(at, format!("unsupported version {v}")));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        let r = self.inner.read_u8();
        self.wrap(1, r)
    }

    pub fn u32(&mut self) -> Result<u32> {
        let r = self.inner.read_u32::<LittleEndian>();
        self.wrap(4, r)
    }

    pub fn u64(&mut self) -> Result<u64> {
        let r = self.inner.read_u64::<LittleEndian>();
        self.wrap(8, r)
    }

    pub fn f32(&mut self) -> Result<f32> {
        let r = self.inner.read_f32::<LittleEndian>();
        self.wrap(4, r)
    }

    pub fn f32_vec(&mut self, len: usize) -> Result<Vec<f32>> {
        let mut out = vec![0f32; len];
        let r = self.inner.read_f32_into::<LittleEndian>(&mut out);
        self.wrap(4 * len as u64, r)?;
        Ok(out)
    }

    pub fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; len];
        let r = self.inner.read_exact(&mut out);
        self.wrap(len as u64, r)?;
        Ok(out)
    }

    /// Unsigned little-endian integer of `width` bytes (1..=8).
    pub fn uint(&mut self, width: usize) -> Result<u64> {
        let b = self.bytes(width)?;
        Ok(b.iter().rev().fold(0u64, |acc, &x| (acc << 8) | x as u64))
    }

    pub fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let at = self.offset;
        let b = self.bytes(len)?;
        String::from_utf8(b).map_err(|_| Error::format(at, "invalid UTF-8 in string"))
    }

    /// Fails unless the stream is exhausted.
    pub fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::format(self.offset, "trailing bytes after payload")),
        }
    }
}

pub(crate) trait BinWrite: Write {
    fn put_u8(&mut self, v: u8) -> Result<()> {
        Ok(self.write_u8(v)?)
    }
    fn put_u32(&mut self, v: u32) -> Result<()> {
        Ok(self.write_u32::<LittleEndian>(v)?)
    }
    fn put_u64(&mut self, v: u64) -> Result<()> {
        Ok(self.write_u64::<LittleEndian>(v)?)
    }
    fn put_f32(&mut self, v: f32) -> Result<()> {
        Ok(self.write_f32::<LittleEndian>(v)?)
    }
    fn put_f32s(&mut self, vs: &[f32]) -> Result<()> {
        for &v in vs {
            self.write_f32::<LittleEndian>(v)?;
        }
        Ok(())
    }
    fn put_uint(&mut self, v: u64, width: usize) -> Result<()> {
        let bytes = v.to_le_bytes();
        Ok(self.write_all(&bytes[..width])?)
    }
    fn put_string(&mut self, s: &str) -> Result<()> {
        self.put_u32(s.len() as u32)?;
        Ok(self.write_all(s.as_bytes())?)
    }
}

impl<W: Write + ?Sized> BinWrite for W {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_input_reports_offset() {
        let mut buf = Vec::new();
        buf.put_u32(7).unwrap();
        buf.push(1);
        let mut r = BinReader::new(&buf[..]);
        assert_eq!(r.u32().unwrap(), 7);
        match r.u32() {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uint_width_roundtrip() {
        let mut buf = Vec::new();
        buf.put_uint(0xBEEF, 2).unwrap();
        buf.put_uint(0x01_0203, 3).unwrap();
        let mut r = BinReader::new(&buf[..]);
        assert_eq!(r.uint(2).unwrap(), 0xBEEF);
        assert_eq!(r.uint(3).unwrap(), 0x01_0203);
        r.finish().unwrap();
    }
}
