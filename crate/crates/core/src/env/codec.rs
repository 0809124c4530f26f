//! Versioned little-endian binary records.
//!
//! Layout of every record: 4-byte magic, `u16` format version, `u8` kind tag,
//! then the kind's fields in declaration order. Variable-length fields carry a
//! `u32` length prefix.

use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"GPSS";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Opaque serialized simulator state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimState(pub Vec<u8>);

impl SimState {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn with_header(magic: &[u8; 4], version: u16, kind: u8) -> Self {
        let mut w = ByteWriter::default();
        w.buf.extend_from_slice(magic);
        w.u16(version);
        w.u8(kind);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u32(v.len() as u32);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    /// Validates the header and returns a reader positioned after it.
    pub fn open(buf: &'a [u8], magic: &[u8; 4], version: u16, kind: u8) -> Result<Self> {
        let mut r = ByteReader { buf, pos: 0 };
        let m = r.take(4)?;
        if m != magic {
            return Err(Error::decode(format!(
                "bad magic {:?}, expected {:?}",
                m, magic
            )));
        }
        let v = r.u16()?;
        if v != version {
            return Err(Error::decode(format!(
                "unsupported version {v}, expected {version}"
            )));
        }
        let k = r.u8()?;
        if k != kind {
            return Err(Error::decode(format!("record kind {k}, expected {kind}")));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::decode(format!(
                "truncated record: need {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::decode(format!("invalid bool byte {b}"))),
        }
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::decode(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_checked() {
        let mut w = ByteWriter::with_header(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 7);
        w.u32(42);
        w.bytes(&[1, 2, 3]);
        let buf = w.finish();

        let mut r = ByteReader::open(&buf, SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 7).unwrap();
        assert_eq!(r.u32().unwrap(), 42);
        assert_eq!(r.bytes().unwrap(), vec![1, 2, 3]);
        r.finish().unwrap();

        assert!(ByteReader::open(&buf, SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 8).is_err());
        assert!(ByteReader::open(&buf, b"XXXX", SNAPSHOT_VERSION, 7).is_err());
        let mut r = ByteReader::open(&buf[..9], SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 7).unwrap();
        assert!(r.u32().is_err());
    }
}
