use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io::ByteReader;
use crate::nn::Matrix;

const MAGIC: &[u8; 4] = b"FDLG";
const VERSION: u32 = 1;

/// One client's logits on the public set: the unit of communication.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    pub client_id: usize,
    pub values: Matrix,
}

impl LogitMatrix {
    pub fn new(client_id: usize, values: Matrix) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::input(format!("client {client_id} sent non-finite logits")));
        }
        Ok(Self { client_id, values })
    }

    pub fn samples(&self) -> usize {
        self.values.rows()
    }

    pub fn classes(&self) -> usize {
        self.values.cols()
    }

    /// Payload size on the wire: one f64 per entry.
    pub fn payload_bytes(&self) -> usize {
        self.values.rows() * self.values.cols() * std::mem::size_of::<f64>()
    }

    /// Binary dump: `"FDLG"`, u32 version, u32 client id, u64 rows, u64 cols,
    /// then `rows × cols` little-endian f64 in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.client_id as u32).to_le_bytes())?;
        w.write_all(&(self.values.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.values.cols() as u64).to_le_bytes())?;
        for v in self.values.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut r = ByteReader::new(r, source);
        if &r.bytes::<4>()? != MAGIC {
            return Err(r.format_error(0, "bad logit dump magic"));
        }
        let version = r.u32_le()?;
        if version != VERSION {
            return Err(r.format_error(4, format!("unsupported version {version}")));
        }
        let client_id = r.u32_le()? as usize;
        let rows = r.u64_le()? as usize;
        let cols = r.u64_le()? as usize;
        let len = rows
            .checked_mul(cols)
            .filter(|&n| n <= 1 << 32)
            .ok_or_else(|| r.format_error(12, format!("implausible shape {rows}x{cols}")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let v = r.f64_le()?;
            if !v.is_finite() {
                return Err(r.format_error(r.offset() - 8, "non-finite logit"));
            }
            data.push(v);
        }
        if !r.at_end()? {
            return Err(r.format_error(r.offset(), "trailing bytes after payload"));
        }
        Ok(Self {
            client_id,
            values: Matrix::from_vec(rows, cols, data)?,
        })
    }

    /// CSV with header `sample,logit_0,…,logit_{C-1}`; floats use the shortest
    /// round-tripping representation.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["sample".to_owned()];
        header.extend((0..self.classes()).map(|c| format!("logit_{c}")));
        out.write_record(&header)?;
        for (i, row) in self.values.iter_rows().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::Serde(e.to_string()))
    }
}
