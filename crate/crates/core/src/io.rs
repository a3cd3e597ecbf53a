//! Number formatting for CSV output and the JSON-header + binary block format
//! shared by contraction maps and scalograms.
//!
//! Block layout: one line of UTF-8 JSON (the [`BlockHeader`]) terminated by
//! `\n`, followed by `shape.iter().product()` little-endian `f64` values in
//! row-major order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BLOCK_FORMAT: &str = "chronotax-block";
pub const BLOCK_VERSION: u32 = 1;

/// Formats like C's `%.15g`.
pub fn fmt_sig(x: f64) -> String {
    const P: i32 = 15;
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub format: String,
    pub version: u32,
    /// What the block holds, e.g. `contraction_map` or `scalogram`.
    pub kind: String,
    /// Row-major dimensions; the first axis indexes `fields`.
    pub shape: Vec<usize>,
    pub fields: Vec<String>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl BlockHeader {
    pub fn new(kind: &str, shape: Vec<usize>, fields: Vec<String>, meta: serde_json::Value) -> Self {
        Self { format: BLOCK_FORMAT.to_string(), version: BLOCK_VERSION, kind: kind.to_string(), shape, fields, meta }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn write_block<W: Write>(mut w: W, header: &BlockHeader, data: &[f64]) -> Result<()> {
    if header.len() != data.len() {
        return Err(Error::invalid(format!(
            "block shape {:?} holds {} values, got {}",
            header.shape,
            header.len(),
            data.len()
        )));
    }
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_block<R: BufRead>(mut r: R) -> Result<(BlockHeader, Vec<f64>)> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: BlockHeader = serde_json::from_slice(&line)?;
    if header.format != BLOCK_FORMAT || header.version != BLOCK_VERSION {
        return Err(Error::invalid(format!("unsupported block format {} v{}", header.format, header.version)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.len() * 8 {
        return Err(Error::invalid(format!(
            "block payload has {} bytes, header expects {}",
            bytes.len(),
            header.len() * 8
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_like_percent_g() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333333");
        assert_eq!(fmt_sig(1e-7), "1e-07");
        assert_eq!(fmt_sig(123456789012345678.0), "1.23456789012346e+17");
        assert_eq!(fmt_sig(0.0001234), "0.0001234");
    }

    proptest! {
        #[test]
        fn fifteen_digits_round_trip(x in -1e12f64..1e12) {
            let back: f64 = fmt_sig(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-14 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn block_round_trip_and_validation() {
        let header = BlockHeader::new("test", vec![2, 3], vec!["a".into(), "b".into()], serde_json::json!({"k": 1}));
        let data = vec![1.0, -2.0, 3.5, f64::MAX, 0.0, 1e-300];
        let mut buf = Vec::new();
        write_block(&mut buf, &header, &data).unwrap();
        let (h, d) = read_block(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(d, data);
        assert!(write_block(&mut Vec::new(), &header, &data[..5]).is_err());
        assert!(read_block(&buf[..buf.len() - 1]).is_err());
    }
}
