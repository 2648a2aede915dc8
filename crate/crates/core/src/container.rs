//! Binary container shared by models and reduction transforms.
//!
//! Layout (little-endian):
//!
//! | field      | bytes                                  |
//! |------------|----------------------------------------|
//! | magic      | `XMLRIDGE`                             |
//! | version    | u8 (currently 1)                       |
//! | kind       | u8: 0 model, 1 svd, 2 random projection |
//! | width      | u8: 4 (f32) or 8 (f64)                 |
//! | layout     | u8: 0 dense, 1 CSR                     |
//! | flags      | u32                                    |
//! | param      | f64 (λ for models, density for projections) |
//! | seed       | u64                                    |
//! | rows, cols | u64, u64                               |
//! | metadata   | u32 length + UTF-8 `key=value` lines   |
//! | payload    | dense values, or nnz u64 + offsets u64 + indices u64 + values |

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

pub const MAGIC: &[u8; 8] = b"XMLRIDGE";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ContainerKind {
    Model = 0,
    Svd = 1,
    RandomProjection = 2,
}

impl ContainerKind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Self::Model),
            1 => Ok(Self::Svd),
            2 => Ok(Self::RandomProjection),
            other => Err(Error::Format(format!("unknown container kind {other}"))),
        }
    }
}

/// Dense or CSR matrix payload.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixPayload<T> {
    Dense(DenseMatrix<T>),
    Sparse(SparseMatrix<T>),
}

impl<T: Scalar> MatrixPayload<T> {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixPayload::Dense(m) => m.shape(),
            MatrixPayload::Sparse(m) => m.shape(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Container<T> {
    pub kind: ContainerKind,
    pub flags: u32,
    pub param: f64,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
    pub payload: MatrixPayload<T>,
}

impl<T: Scalar> Container<T> {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(self.kind as u8);
        buf.push(T::WIDTH);
        buf.push(matches!(self.payload, MatrixPayload::Sparse(_)) as u8);
        buf.extend_from_slice(&self.flags.to_le_bytes());
        buf.extend_from_slice(&self.param.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        let (rows, cols) = self.payload.shape();
        buf.extend_from_slice(&(rows as u64).to_le_bytes());
        buf.extend_from_slice(&(cols as u64).to_le_bytes());
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::InvalidArgument(format!("metadata entry {k:?} not encodable")));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(meta.as_bytes());
        out.write_all(&buf)?;
        buf.clear();

        match &self.payload {
            MatrixPayload::Dense(m) => {
                for chunk in m.values().chunks(1 << 16) {
                    chunk.iter().for_each(|v| v.write_le(&mut buf));
                    out.write_all(&buf)?;
                    buf.clear();
                }
            }
            MatrixPayload::Sparse(m) => {
                buf.extend_from_slice(&(m.nnz() as u64).to_le_bytes());
                m.row_offsets().iter().for_each(|&o| buf.extend_from_slice(&(o as u64).to_le_bytes()));
                m.col_indices().iter().for_each(|&j| buf.extend_from_slice(&(j as u64).to_le_bytes()));
                out.write_all(&buf)?;
                buf.clear();
                for chunk in m.values().chunks(1 << 16) {
                    chunk.iter().for_each(|v| v.write_le(&mut buf));
                    out.write_all(&buf)?;
                    buf.clear();
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut r = Reader { inner: &mut input };
        let magic = r.bytes(8)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = ContainerKind::from_byte(r.u8()?)?;
        let width = r.u8()?;
        if width != 4 && width != 8 {
            return Err(Error::Format(format!("unsupported scalar width {width}")));
        }
        let layout = r.u8()?;
        let flags = u32::from_le_bytes(r.array()?);
        let param = f64::from_le_bytes(r.array()?);
        let seed = r.u64()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let meta_len = u32::from_le_bytes(r.array()?) as usize;
        let meta = String::from_utf8(r.bytes(meta_len)?)
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let metadata = meta
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();

        let payload = match layout {
            0 => {
                let n = rows.checked_mul(cols).ok_or_else(|| Error::Format("dims overflow".into()))?;
                let values = r.scalars::<T>(n, width)?;
                MatrixPayload::Dense(DenseMatrix::from_vec(rows, cols, values)?)
            }
            1 => {
                let nnz = r.usize()?;
                let offsets = (0..=rows).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
                let indices = (0..nnz).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
                let values = r.scalars::<T>(nnz, width)?;
                MatrixPayload::Sparse(SparseMatrix::from_csr(rows, cols, offsets, indices, values)?)
            }
            other => return Err(Error::Format(format!("unknown layout {other}"))),
        };
        Ok(Self {
            kind,
            flags,
            param,
            seed,
            metadata,
            payload,
        })
    }
}

struct Reader<'a, R> {
    inner: &'a mut R,
}

impl<R: Read> Reader<'_, R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut b = Vec::new();
        self.inner.by_ref().take(n as u64).read_to_end(&mut b)?;
        if b.len() != n {
            return Err(Error::Format("truncated container".into()));
        }
        Ok(b)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        self.inner
            .read_exact(&mut a)
            .map_err(|_| Error::Format("truncated container".into()))?;
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length exceeds address space".into()))
    }

    fn scalars<T: Scalar>(&mut self, n: usize, width: u8) -> Result<Vec<T>> {
        let bytes = self.bytes(n * usize::from(width))?;
        Ok(bytes
            .chunks_exact(usize::from(width))
            .map(|c| {
                if width == T::WIDTH {
                    T::read_le(c)
                } else if width == 4 {
                    T::lit(f64::from(f32::read_le(c)))
                } else {
                    T::lit(f64::read_le(c))
                }
            })
            .collect())
    }
}
