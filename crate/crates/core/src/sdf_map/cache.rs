//! Binary map cache.
//!
//! Layout (little endian): 8-byte magic, 1 version byte, origin as 3 x f64,
//! voxel size as f64, dims as 3 x u64, then `dims[0] * dims[1] * dims[2]`
//! distances as f64 in storage order.

use std::io::{Read, Write};

use nalgebra::Point3;

use super::{EsdfMap, MapError};
use crate::scalar::{lit, to_f64, Real};

pub const CACHE_MAGIC: &[u8; 8] = b"TPESDF\0\0";
pub const CACHE_VERSION: u8 = 1;

pub fn write_map<T: Real, W: Write>(map: &EsdfMap<T>, mut out: W) -> Result<(), MapError> {
    let io = |e: std::io::Error| MapError::Cache(e.to_string());
    let mut buf = Vec::with_capacity(8 + 1 + 8 * 7 + 8 * map.distances().len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.push(CACHE_VERSION);
    let o = map.origin();
    for v in [o.x, o.y, o.z, map.voxel_size()] {
        buf.extend_from_slice(&to_f64(v).to_le_bytes());
    }
    for n in map.dims() {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &d in map.distances() {
        buf.extend_from_slice(&to_f64(d).to_le_bytes());
    }
    out.write_all(&buf).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_map<T: Real, R: Read>(mut input: R) -> Result<EsdfMap<T>, MapError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| MapError::Cache(e.to_string()))?;
    let mut cursor = Cursor {
        bytes: &bytes,
        pos: 0,
    };

    if cursor.take(8)? != CACHE_MAGIC {
        return Err(MapError::Cache("bad magic".into()));
    }
    let version = cursor.take(1)?[0];
    if version != CACHE_VERSION {
        return Err(MapError::Cache(format!("unsupported version {version}")));
    }
    let origin = Point3::new(lit(cursor.f64()?), lit(cursor.f64()?), lit(cursor.f64()?));
    let voxel_size = lit(cursor.f64()?);
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = usize::try_from(cursor.u64()?)
            .map_err(|_| MapError::Cache("dimension overflow".into()))?;
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| MapError::Cache("dimension overflow".into()))?;
    if bytes.len() - cursor.pos != n.saturating_mul(8) {
        return Err(MapError::Cache(format!(
            "expected {n} distances, found {} bytes",
            bytes.len() - cursor.pos
        )));
    }
    let mut distances = Vec::with_capacity(n);
    for _ in 0..n {
        distances.push(lit(cursor.f64()?));
    }
    EsdfMap::from_raw(origin, voxel_size, dims, distances)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MapError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(MapError::Cache("truncated file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64, MapError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, MapError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf_map::{Bounds, BuildOptions};

    #[test]
    fn round_trip_and_corruption() {
        let b = Bounds::new(Point3::new(-0.2, -0.2, -0.1), Point3::new(0.2, 0.3, 0.2));
        let map = EsdfMap::from_fn(&b, &BuildOptions::default(), |p| p.z - 0.3 * p.x).unwrap();
        let mut buf = Vec::new();
        write_map(&map, &mut buf).unwrap();
        assert_eq!(&buf[..8], CACHE_MAGIC);
        assert_eq!(buf[8], CACHE_VERSION);
        let back: EsdfMap<f64> = read_map(buf.as_slice()).unwrap();
        assert_eq!(back, map);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_map::<f64, _>(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(read_map::<f64, _>(bad.as_slice()).is_err());
        assert!(read_map::<f64, _>(&buf[..buf.len() - 3]).is_err());
    }
}
