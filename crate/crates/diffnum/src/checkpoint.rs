//! Flat binary container for named parameter tensors.
//!
//! Layout: 8 magic bytes, u32 LE format version, then per-tensor records
//! until EOF: u32 LE name length, UTF-8 name, u32 LE rank, u64 LE dims,
//! little-endian f64 payload. Values of any scalar type are stored as f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DiffTensor, Scalar};

pub const MAGIC: &[u8; 8] = b"DNTENSOR";
pub const VERSION: u32 = 1;

const MAX_NAME: usize = 4096;
const MAX_RANK: u32 = 8;
const MAX_ELEMS: u64 = 1 << 33;

pub fn save<T: Scalar, W: Write>(mut w: W, entries: &[(&str, &DiffTensor<T>)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for (name, t) in entries {
        let bytes = name.as_bytes();
        assert!(bytes.len() <= MAX_NAME, "tensor name too long");
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.values() {
            let f = v.to_f64().expect("scalar to f64");
            w.write_all(&f.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_file<T: Scalar, P: AsRef<Path>>(
    path: P,
    entries: &[(&str, &DiffTensor<T>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

pub fn load<T: Scalar, R: Read>(mut r: R) -> Result<Vec<(String, DiffTensor<T>)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut out = Vec::new();
    loop {
        // Records run to EOF; a clean EOF at a record boundary ends the file.
        match r.read_exact(&mut u32b) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(u32b) as usize;
        if name_len > MAX_NAME {
            return Err(Error::Format(format!("name length {name_len} too large")));
        }
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        r.read_exact(&mut u32b)?;
        let rank = u32::from_le_bytes(u32b);
        if rank > MAX_RANK {
            return Err(Error::Format(format!("rank {rank} too large")));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        let mut u64b = [0u8; 8];
        let mut count: u64 = 1;
        for _ in 0..rank {
            r.read_exact(&mut u64b)?;
            let d = u64::from_le_bytes(u64b);
            count = count
                .checked_mul(d)
                .ok_or_else(|| Error::Format("dim overflow".into()))?;
            dims.push(d as usize);
        }
        if count > MAX_ELEMS {
            return Err(Error::Format(format!("{count} elements exceeds limit")));
        }
        let mut vals = Vec::with_capacity(count as usize);
        for _ in 0..count {
            r.read_exact(&mut u64b)?;
            let f = f64::from_le_bytes(u64b);
            if !f.is_finite() {
                return Err(Error::Format(format!("non-finite value in `{name}`")));
            }
            vals.push(T::lit(f));
        }
        out.push((name, DiffTensor::new(dims, vals)));
    }
    Ok(out)
}

pub fn load_file<T: Scalar, P: AsRef<Path>>(path: P) -> Result<Vec<(String, DiffTensor<T>)>> {
    load(BufReader::new(File::open(path)?))
}

/// Lookup helper over a loaded checkpoint.
pub fn take_tensor<T: Scalar>(
    entries: &mut Vec<(String, DiffTensor<T>)>,
    name: &str,
) -> Result<DiffTensor<T>> {
    let idx = entries
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::Format(format!("missing tensor `{name}`")))?;
    Ok(entries.remove(idx).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits_and_order() {
        let a = DiffTensor::<f64>::new(vec![2, 3], vec![1.0, -2.5, 3e-300, 4.0, 5.0, 6.25]);
        let b = DiffTensor::<f64>::scalar(0.1 + 0.2);
        let mut buf = Vec::new();
        save(&mut buf, &[("alpha", &a), ("beta", &b)]).unwrap();
        let loaded = load::<f64, _>(&buf[..]).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "alpha");
        assert_eq!(loaded[1].0, "beta");
        assert!(loaded[0].1.bits_eq(&a));
        assert!(loaded[1].1.bits_eq(&b));
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOTMAGIC\x01\x00\x00\x00".to_vec();
        assert!(load::<f64, _>(&buf[..]).is_err());
    }

    #[test]
    fn rejects_truncated_payload() {
        let a = DiffTensor::<f64>::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]);
        let mut buf = Vec::new();
        save(&mut buf, &[("t", &a)]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(load::<f64, _>(&buf[..]).is_err());
    }

    #[test]
    fn f32_tensors_round_trip_through_f64_payload() {
        let a = DiffTensor::<f32>::new(vec![2], vec![1.5, -0.25]);
        let mut buf = Vec::new();
        save(&mut buf, &[("t", &a)]).unwrap();
        let loaded = load::<f32, _>(&buf[..]).unwrap();
        assert!(loaded[0].1.bits_eq(&a));
    }
}
