//! Binary stage artifacts. Every file starts with a 4-byte magic; all
//! integers and floats are little endian.
//!
//! | magic  | content                                                            |
//! |--------|--------------------------------------------------------------------|
//! | `CMDM` | dense f64 matrix: u8 entity type (255 = none), u64 rows, u64 cols, u64 seed, data row-major |
//! | `CMEM` | f32 embedding dump: u8 entity type, u64 n, u32 d, u64 seed, data row-major |
//! | `CMSP` | CSR f64 matrix: u64 rows, u64 cols, u64 nnz, indptr (u64), indices (u32), values (f64) |
//! | `CMKN` | neighbor lists: u8 query type, u8 target type, u32 k, u64 n, then per query u32 len and (u32 id, f64 distance) pairs |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use cartomap_core::embed::LatentEmbedding;
use cartomap_core::linalg::DenseMatrix;
use cartomap_core::neighbors::{Neighbor, NeighborLists};
use cartomap_core::vectorize::SparseMatrix;
use cartomap_core::EntityType;

use crate::error::{Error, Result};

struct Out<'a> {
    w: BufWriter<File>,
    path: &'a Path,
}

impl<'a> Out<'a> {
    fn create(path: &'a Path, magic: &[u8; 4]) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut o = Self {
            w: BufWriter::with_capacity(1 << 20, f),
            path,
        };
        o.bytes(magic)?;
        Ok(o)
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b).map_err(|e| Error::io(self.path, e))
    }

    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(self.path, e))
    }
}

struct In<'a> {
    r: BufReader<File>,
    path: &'a Path,
}

impl<'a> In<'a> {
    fn open(path: &'a Path, magic: &[u8; 4]) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut i = Self {
            r: BufReader::with_capacity(1 << 20, f),
            path,
        };
        let mut m = [0u8; 4];
        i.exact(&mut m)?;
        if &m != magic {
            return Err(Error::format(path, format!("expected magic {:?}", String::from_utf8_lossy(magic))));
        }
        Ok(i)
    }

    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.r
            .read_exact(buf)
            .map_err(|e| Error::format(self.path, format!("truncated file: {e}")))
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; n * 8];
        self.exact(&mut raw)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn end(mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.r.read(&mut b) {
            Ok(0) => Ok(()),
            _ => Err(Error::format(self.path, "trailing bytes")),
        }
    }
}

fn type_code(kind: Option<EntityType>) -> u8 {
    kind.map(|k| k.index() as u8).unwrap_or(255)
}

fn type_of(path: &Path, code: u8) -> Result<Option<EntityType>> {
    match code {
        255 => Ok(None),
        c if (c as usize) < 4 => Ok(Some(EntityType::ALL[c as usize])),
        c => Err(Error::format(path, format!("unknown entity type code {c}"))),
    }
}

fn size(path: &Path, v: u64, what: &str) -> Result<usize> {
    usize::try_from(v)
        .ok()
        .filter(|&n| n < (1usize << 40))
        .ok_or_else(|| Error::format(path, format!("implausible {what} {v}")))
}

pub fn write_dense(path: &Path, m: &DenseMatrix, kind: Option<EntityType>, seed: u64) -> Result<()> {
    let mut o = Out::create(path, b"CMDM")?;
    o.u8(type_code(kind))?;
    o.u64(m.rows() as u64)?;
    o.u64(m.cols() as u64)?;
    o.u64(seed)?;
    for &v in m.data() {
        o.f64(v)?;
    }
    o.finish()
}

pub fn read_dense(path: &Path) -> Result<(DenseMatrix, Option<EntityType>, u64)> {
    let mut i = In::open(path, b"CMDM")?;
    let kind = type_of(path, i.u8()?)?;
    let rows = size(path, i.u64()?, "row count")?;
    let cols = size(path, i.u64()?, "column count")?;
    let seed = i.u64()?;
    let data = i.f64s(rows * cols)?;
    i.end()?;
    Ok((DenseMatrix::from_vec(rows, cols, data), kind, seed))
}

pub fn write_embedding(path: &Path, e: &LatentEmbedding, seed: u64) -> Result<()> {
    write_dense(path, &e.matrix, Some(e.kind), seed)
}

pub fn read_embedding(path: &Path) -> Result<LatentEmbedding> {
    let (m, kind, _) = read_dense(path)?;
    let kind = kind.ok_or_else(|| Error::format(path, "embedding without entity type"))?;
    Ok(LatentEmbedding::new(kind, m)?)
}

/// Compact single-precision dump for external tools.
pub fn write_embedding_f32(path: &Path, e: &LatentEmbedding, seed: u64) -> Result<()> {
    let mut o = Out::create(path, b"CMEM")?;
    o.u8(type_code(Some(e.kind)))?;
    o.u64(e.len() as u64)?;
    o.u32(e.dim() as u32)?;
    o.u64(seed)?;
    for &v in e.matrix.data() {
        o.bytes(&(v as f32).to_le_bytes())?;
    }
    o.finish()
}

pub fn read_embedding_f32(path: &Path) -> Result<(EntityType, usize, usize, u64, Vec<f32>)> {
    let mut i = In::open(path, b"CMEM")?;
    let kind = type_of(path, i.u8()?)?.ok_or_else(|| Error::format(path, "missing entity type"))?;
    let n = size(path, i.u64()?, "row count")?;
    let d = i.u32()? as usize;
    let seed = i.u64()?;
    let mut raw = vec![0u8; n * d * 4];
    i.exact(&mut raw)?;
    i.end()?;
    let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((kind, n, d, seed, data))
}

pub fn write_sparse(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut o = Out::create(path, b"CMSP")?;
    o.u64(m.n_rows() as u64)?;
    o.u64(m.n_cols() as u64)?;
    o.u64(m.nnz() as u64)?;
    for &p in m.indptr() {
        o.u64(p as u64)?;
    }
    for &c in m.indices() {
        o.u32(c)?;
    }
    for &v in m.values() {
        o.f64(v)?;
    }
    o.finish()
}

pub fn read_sparse(path: &Path) -> Result<SparseMatrix> {
    let mut i = In::open(path, b"CMSP")?;
    let rows = size(path, i.u64()?, "row count")?;
    let cols = size(path, i.u64()?, "column count")?;
    let nnz = size(path, i.u64()?, "nonzero count")?;
    let mut indptr = Vec::with_capacity(rows + 1);
    for _ in 0..=rows {
        indptr.push(size(path, i.u64()?, "row pointer")?);
    }
    let mut indices = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        indices.push(i.u32()?);
    }
    let values = i.f64s(nnz)?;
    i.end()?;
    Ok(SparseMatrix::from_csr(rows, cols, indptr, indices, values)?)
}

pub fn write_neighbors(path: &Path, lists: &NeighborLists) -> Result<()> {
    let mut o = Out::create(path, b"CMKN")?;
    o.u8(type_code(Some(lists.query_kind)))?;
    o.u8(type_code(Some(lists.target_kind)))?;
    o.u32(lists.k as u32)?;
    o.u64(lists.lists.len() as u64)?;
    for l in &lists.lists {
        o.u32(l.len() as u32)?;
        for nb in l {
            o.u32(nb.id)?;
            o.f64(nb.distance)?;
        }
    }
    o.finish()
}

pub fn read_neighbors(path: &Path) -> Result<NeighborLists> {
    let mut i = In::open(path, b"CMKN")?;
    let q = type_of(path, i.u8()?)?.ok_or_else(|| Error::format(path, "missing query type"))?;
    let t = type_of(path, i.u8()?)?.ok_or_else(|| Error::format(path, "missing target type"))?;
    let k = i.u32()? as usize;
    let n = size(path, i.u64()?, "list count")?;
    let mut lists = Vec::with_capacity(n);
    for _ in 0..n {
        let len = i.u32()? as usize;
        if len > k {
            return Err(Error::format(path, "neighbor list longer than k"));
        }
        let mut l = Vec::with_capacity(len);
        for _ in 0..len {
            let id = i.u32()?;
            let distance = i.f64()?;
            l.push(Neighbor { id, distance });
        }
        lists.push(l);
    }
    i.end()?;
    Ok(NeighborLists {
        query_kind: q,
        target_kind: t,
        k,
        lists,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = DenseMatrix::from_vec(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-300, f64::MAX]);
        let p = dir.path().join("m.bin");
        write_dense(&p, &m, Some(EntityType::Author), 9).unwrap();
        assert_eq!(read_dense(&p).unwrap(), (m.clone(), Some(EntityType::Author), 9));

        let e = LatentEmbedding::new(EntityType::Lab, m).unwrap();
        let p32 = dir.path().join("e.f32");
        write_embedding_f32(&p32, &e, 4).unwrap();
        let (k, n, d, seed, data) = read_embedding_f32(&p32).unwrap();
        assert_eq!((k, n, d, seed, data[2]), (EntityType::Lab, 2, 3, 4, 3.5f32));

        let s = SparseMatrix::from_rows(4, vec![vec![(1, 0.5)], vec![], vec![(0, 1.0), (3, 2.0)]]).unwrap();
        let ps = dir.path().join("s.bin");
        write_sparse(&ps, &s).unwrap();
        assert_eq!(read_sparse(&ps).unwrap(), s);

        let nl = NeighborLists {
            query_kind: EntityType::Word,
            target_kind: EntityType::Article,
            k: 2,
            lists: vec![vec![Neighbor { id: 3, distance: 0.25 }], vec![]],
        };
        let pn = dir.path().join("n.bin");
        write_neighbors(&pn, &nl).unwrap();
        assert_eq!(read_neighbors(&pn).unwrap(), nl);
        assert!(read_sparse(&pn).is_err());
    }
}
