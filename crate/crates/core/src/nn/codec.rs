//! Binary parameter layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes   "THZMLP01"
//! layer count    u32       number of entries in the size list (layers + 1)
//! sizes          u32 each
//! hidden act     u8        0 identity, 1 relu, 2 tanh
//! output act     u8
//! param count    u64
//! params         f64 each, flattening order
//! ```

use crate::error::{Error, Result};
use crate::nn::{param_count, Activation, Mlp};

pub const MLP_MAGIC: &[u8; 8] = b"THZMLP01";

pub fn encode(net: &Mlp, out: &mut Vec<u8>) {
    out.extend_from_slice(MLP_MAGIC);
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for &s in net.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.push(net.hidden_activation().code());
    out.push(net.output_activation().code());
    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
}

pub fn to_bytes(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::new();
    encode(net, &mut out);
    out
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated input: need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8]) -> Result<()> {
        let got = self.take(magic.len())?;
        if got != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }
}

pub(crate) fn decode_from(r: &mut Reader<'_>) -> Result<Mlp> {
    r.expect_magic(MLP_MAGIC)?;
    let count = r.u32()? as usize;
    let sizes = (0..count).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let hidden = Activation::from_code(r.u8()?)?;
    let output = Activation::from_code(r.u8()?)?;
    let n = r.u64()? as usize;
    if sizes.len() >= 2 && n != param_count(&sizes) {
        return Err(Error::Format(format!(
            "parameter count {n} does not match architecture {sizes:?}"
        )));
    }
    let params = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Mlp::from_params(&sizes, hidden, output, params)
}

pub fn from_bytes(buf: &[u8]) -> Result<Mlp> {
    let mut r = Reader::new(buf);
    let net = decode_from(&mut r)?;
    if r.position() != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.position())));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn layout_is_byte_exact() {
        let net = Mlp::from_params(&[1, 1], Activation::Relu, Activation::Tanh, vec![0.5, -2.0]).unwrap();
        let bytes = to_bytes(&net);
        let mut expected = b"THZMLP01".to_vec();
        expected.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 2]);
        expected.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&0.5f64.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip_and_corruption() {
        let net = Mlp::new(&[5, 7, 3], Activation::Relu, Activation::Tanh, &mut seed::rng(4)).unwrap();
        let bytes = to_bytes(&net);
        assert_eq!(from_bytes(&bytes).unwrap(), net);
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
        let mut long = bytes;
        long.push(0);
        assert!(from_bytes(&long).is_err());
    }
}
