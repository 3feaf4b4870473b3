//! Binary serialization of a feature bank.
//!
//! Layout: magic `CGCN`, then format version, d, w, b, s as little-endian
//! u32, then the filters as little-endian f64 in (feature, row, column,
//! channel) order, then the d biases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array4};

use crate::error::{Error, Result};
use crate::nn::types::ConvFeatureBank;

const MAGIC: &[u8; 4] = b"CGCN";
const VERSION: u32 = 1;

pub fn save_bank<W: Write>(bank: &ConvFeatureBank, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    for v in [
        VERSION,
        bank.features() as u32,
        bank.kernel() as u32,
        bank.channels() as u32,
        bank.stride() as u32,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in bank.filters_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in bank.biases_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_bank<R: Read>(mut input: R) -> Result<ConvFeatureBank> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a feature bank file".into()));
    }
    let mut header = [0u32; 5];
    for h in &mut header {
        let mut buf = [0u8; 4];
        input.read_exact(&mut buf)?;
        *h = u32::from_le_bytes(buf);
    }
    let [version, d, w, b, s] = header;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported bank version {version}")));
    }
    let (d, w, b, s) = (d as usize, w as usize, b as usize, s as usize);
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let filters = Array4::from_shape_vec((d, w, w, b), read_f64s(d * w * w * b)?)
        .map_err(|e| Error::Format(e.to_string()))?;
    let biases = Array1::from_vec(read_f64s(d)?);
    ConvFeatureBank::new(filters, biases, s)
}

pub fn save_bank_to_path<P: AsRef<Path>>(bank: &ConvFeatureBank, path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    save_bank(bank, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_bank_from_path<P: AsRef<Path>>(path: P) -> Result<ConvFeatureBank> {
    load_bank(BufReader::new(File::open(path)?))
}

/// Serialized bytes of a bank; handy for bit-equality checks.
pub fn bank_bytes(bank: &ConvFeatureBank) -> Vec<u8> {
    let mut buf = Vec::new();
    save_bank(bank, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::types::BankShape;
    use crate::rng::master_rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = master_rng(30);
        let bank = ConvFeatureBank::random(BankShape { features: 5, kernel: 3, stride: 2 }, 3, &mut rng);
        let bytes = bank_bytes(&bank);
        let loaded = load_bank(&bytes[..]).unwrap();
        assert_eq!(bank, loaded);
        assert_eq!(bytes, bank_bytes(&loaded));
    }

    #[test]
    fn header_layout_is_stable() {
        let mut rng = master_rng(31);
        let bank = ConvFeatureBank::random(BankShape { features: 2, kernel: 1, stride: 1 }, 4, &mut rng);
        let bytes = bank_bytes(&bank);
        assert_eq!(&bytes[0..4], b"CGCN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1); // version
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2); // d
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1); // w
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 4); // b
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1); // s
        assert_eq!(bytes.len(), 24 + 8 * (2 * 1 * 1 * 4 + 2));
    }

    #[test]
    fn rejects_garbage() {
        assert!(load_bank(&b"NOPE0000"[..]).is_err());
    }
}
