//! Binary container for eigenbases.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "BILLEIGN"
//! version      u32
//! domain hash  32 bytes
//! h            f64
//! N            u64      number of states
//! dimension    u64      number of mesh nodes
//! triangles    u64
//! has sectors  u8
//! lambdas      N x f64  (E = hbar^2 lambda / 2)
//! sectors      N x u8   (only if has sectors)
//! vectors      N columns of dimension x f64
//! nodes        dimension x (f64, f64)
//! boundary     dimension x u8
//! segments     per node: u32 count then count x u32
//! connectivity triangles x 3 x u64
//! checksum     sha256 of everything above
//! ```
//!
//! Sector bases store the quarter mesh and quarter vectors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::basis::{EigenBasis, Sector};
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const CONTAINER_MAGIC: &[u8; 8] = b"BILLEIGN";
pub const CONTAINER_VERSION: u32 = 1;

struct HashWriter<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> HashWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)
    }
    fn u8(&mut self, x: u8) -> std::io::Result<()> {
        self.put(&[x])
    }
    fn u32(&mut self, x: u32) -> std::io::Result<()> {
        self.put(&x.to_le_bytes())
    }
    fn u64(&mut self, x: u64) -> std::io::Result<()> {
        self.put(&x.to_le_bytes())
    }
    fn f64(&mut self, x: f64) -> std::io::Result<()> {
        self.put(&x.to_le_bytes())
    }
    fn f64s(&mut self, xs: &[f64]) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(8 * xs.len());
        for x in xs {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        self.put(&buf)
    }
}

struct HashReader<R: Read> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> HashReader<R> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(truncated)?;
        self.hasher.update(b);
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        let mut buf = vec![0u8; 8 * out.len()];
        self.inner.read_exact(&mut buf).map_err(truncated)?;
        self.hasher.update(&buf);
        for (o, c) in out.iter_mut().zip(buf.chunks_exact(8)) {
            *o = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(())
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Container("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

/// Write `basis` to `path`. The value of `hbar` is not stored.
pub fn write_basis(basis: &EigenBasis, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = HashWriter { inner: BufWriter::new(file), hasher: Sha256::new() };
    let mesh = &basis.mesh;
    w.put(CONTAINER_MAGIC)?;
    w.u32(CONTAINER_VERSION)?;
    w.put(&basis.domain_hash)?;
    w.f64(mesh.h)?;
    w.u64(basis.len() as u64)?;
    w.u64(mesh.num_nodes() as u64)?;
    w.u64(mesh.num_triangles() as u64)?;
    w.u8(basis.sectors.is_some() as u8)?;
    w.f64s(&basis.lambdas)?;
    if let Some(s) = &basis.sectors {
        w.put(&s.iter().map(|s| s.code()).collect::<Vec<_>>())?;
    }
    for c in 0..basis.len() {
        w.f64s(basis.vectors.column(c).as_slice())?;
    }
    for p in &mesh.nodes {
        w.f64(p.x)?;
        w.f64(p.y)?;
    }
    w.put(&mesh.boundary.iter().map(|&b| b as u8).collect::<Vec<_>>())?;
    for segs in &mesh.node_segments {
        w.u32(segs.len() as u32)?;
        for &s in segs {
            w.u32(s as u32)?;
        }
    }
    for t in &mesh.triangles {
        for &i in t {
            w.u64(i as u64)?;
        }
    }
    let digest = w.hasher.finalize();
    w.inner.write_all(&digest)?;
    w.inner.flush()?;
    Ok(())
}

/// Read a basis written by [`write_basis`], verifying the checksum.
pub fn read_basis(path: &Path, hbar: f64) -> Result<EigenBasis> {
    let file = File::open(path)?;
    let mut r = HashReader { inner: BufReader::new(file), hasher: Sha256::new() };
    if &r.take::<8>()? != CONTAINER_MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CONTAINER_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let domain_hash = r.take::<32>()?;
    let h = r.f64()?;
    let n = r.u64()? as usize;
    let dim = r.u64()? as usize;
    let nt = r.u64()? as usize;
    let has_sectors = r.u8()? != 0;
    // Sanity bound before allocating: 2^40 doubles.
    if n.saturating_mul(dim) > 1 << 40 || nt > 1 << 40 {
        return Err(Error::Container("implausible header sizes".into()));
    }
    let mut lambdas = vec![0.0; n];
    r.f64s(&mut lambdas)?;
    let sectors = if has_sectors {
        let mut s = Vec::with_capacity(n);
        for _ in 0..n {
            s.push(Sector::from_code(r.u8()?).ok_or_else(|| Error::Container("bad sector code".into()))?);
        }
        Some(s)
    } else {
        None
    };
    let mut vectors = DMatrix::zeros(dim, n);
    for c in 0..n {
        r.f64s(vectors.column_mut(c).as_mut_slice())?;
    }
    let mut nodes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let x = r.f64()?;
        nodes.push(Vec2::new(x, r.f64()?));
    }
    let mut boundary = Vec::with_capacity(dim);
    for _ in 0..dim {
        boundary.push(r.u8()? != 0);
    }
    let mut node_segments = Vec::with_capacity(dim);
    for _ in 0..dim {
        let k = r.u32()? as usize;
        let mut segs = Vec::with_capacity(k.min(16));
        for _ in 0..k {
            segs.push(r.u32()? as usize);
        }
        node_segments.push(segs);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let mut t = [0usize; 3];
        for i in &mut t {
            *i = r.u64()? as usize;
            if *i >= dim {
                return Err(Error::Container("triangle index out of range".into()));
            }
        }
        triangles.push(t);
    }
    let expected = r.hasher.finalize();
    let mut stored = [0u8; 32];
    r.inner.read_exact(&mut stored).map_err(truncated)?;
    if stored[..] != expected[..] {
        return Err(Error::Container("checksum mismatch".into()));
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(Error::Container("trailing bytes after checksum".into()));
    }
    let mesh = Mesh { nodes, triangles, boundary, node_segments, h };
    Ok(EigenBasis { hbar, lambdas, vectors, mesh: Arc::new(mesh), sectors, domain_hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{presets, BilliardDomain};
    use crate::spectral::{solve_basis, symmetry_sector_solve};

    #[test]
    fn round_trip_is_bit_identical() {
        let d = BilliardDomain::from_polygon(&presets::centered_square(1.0));
        let b = symmetry_sector_solve(&d, 0.1, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.bin");
        write_basis(&b, &p).unwrap();
        let r = read_basis(&p, 0.25).unwrap();
        assert_eq!(r.hbar, 0.25);
        assert_eq!(r.lambdas, b.lambdas);
        assert_eq!(r.vectors, b.vectors);
        assert_eq!(*r.mesh, *b.mesh);
        assert_eq!(r.sectors, b.sectors);
        assert_eq!(r.domain_hash, b.domain_hash);
    }

    #[test]
    fn corruption_is_detected() {
        let d = BilliardDomain::from_polygon(&presets::unit_square());
        let b = solve_basis(&d, 0.1, 3, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.bin");
        write_basis(&b, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_basis(&p, 1.0), Err(Error::Container(_))));
        bytes.truncate(mid);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_basis(&p, 1.0), Err(Error::Container(_))));
    }
}
