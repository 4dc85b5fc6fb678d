//! Float formatting, digests and small CSV helpers shared by the artifact
//! writers. Every float is printed in shortest round-trip form so that
//! parsing it back yields the identical bit pattern.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 * bytes.len());
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// SHA-256 of the little-endian bit patterns of `values`.
pub fn digest_f64(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hex(&hasher.finalize())
}

/// Writes `index,value` rows with a header.
pub fn write_indexed_csv(
    path: &Path,
    header: (&str, &str),
    rows: impl IntoIterator<Item = (usize, f64)>,
) -> io::Result<()> {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (i, v) in rows {
        let _ = writeln!(out, "{i},{}", fmt_f64(v));
    }
    fs::write(path, out)
}

pub fn read_indexed_csv(path: &Path) -> io::Result<Vec<(usize, f64)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut parts = line.split(',');
            let bad = || io::Error::new(io::ErrorKind::InvalidData, format!("bad row `{line}`"));
            let i = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let v = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            Ok((i, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn float_text_round_trips_bit_exactly(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = fmt_f64(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_ne!(digest_f64(&[0.0]), digest_f64(&[-0.0]));
    }
}
