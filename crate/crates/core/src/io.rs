//! The LT1 binary container.
//!
//! A tensor record is the magic `b"LT1\0"`, a little-endian `u32` order `N`,
//! `N` little-endian `u32` dimensions, then the `P = prod D_n` entries as
//! little-endian `f64` in first-index-fastest order.
//!
//! A Tucker model file is a sequence of tensor records: a 1-way record
//! holding the ranks `(d_1, ..., d_N)`, then one `D_n x d_n` record per mode
//! basis (column-major, which is the natural order of a 2-way record), then an
//! optional record holding the `d_1 x ... x d_N` core.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, StiefelBasis};
use crate::tensor::DenseTensor;
use crate::tucker::TuckerModel;

pub const MAGIC: [u8; 4] = *b"LT1\0";

pub fn write_tensor<W: Write>(w: &mut W, x: &DenseTensor) -> Result<()> {
    w.write_all(&MAGIC)?;
    let order = u32::try_from(x.order()).map_err(|_| Error::arg("tensor order does not fit in u32"))?;
    w.write_all(&order.to_le_bytes())?;
    for &d in x.shape() {
        let d = u32::try_from(d).map_err(|_| Error::arg(format!("dimension {d} does not fit in u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reader that remembers how many bytes it has consumed, for error offsets.
struct Counting<R> {
    inner: R,
    pos: u64,
}

impl<R: Read> Counting<R> {
    /// Fills `buf`; `Ok(false)` means clean EOF before the first byte.
    fn fill(&mut self, buf: &mut [u8], allow_eof: bool) -> Result<bool> {
        let mut got = 0;
        while got < buf.len() {
            let n = self.inner.read(&mut buf[got..])?;
            if n == 0 {
                if got == 0 && allow_eof {
                    return Ok(false);
                }
                return Err(Error::format(
                    self.pos,
                    format!("unexpected end of data ({} of {} bytes)", got, buf.len()),
                ));
            }
            got += n;
        }
        self.pos += got as u64;
        Ok(true)
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, false)?;
        Ok(u32::from_le_bytes(b))
    }
}

fn read_record<R: Read>(r: &mut Counting<R>) -> Result<Option<DenseTensor>> {
    let start = r.pos;
    let mut magic = [0u8; 4];
    if !r.fill(&mut magic, true)? {
        return Ok(None);
    }
    if magic != MAGIC {
        return Err(Error::format(start, format!("bad magic {magic:02x?}, expected \"LT1\\0\"")));
    }
    let order_at = r.pos;
    let order = r.u32()? as usize;
    if order == 0 {
        return Err(Error::format(order_at, "tensor order is zero"));
    }
    let mut shape = Vec::with_capacity(order.min(64));
    let mut p: usize = 1;
    for _ in 0..order {
        let at = r.pos;
        let d = r.u32()? as usize;
        if d == 0 {
            return Err(Error::format(at, "zero dimension"));
        }
        p = p
            .checked_mul(d)
            .ok_or_else(|| Error::format(at, "entry count overflows"))?;
        shape.push(d);
    }
    let mut data = Vec::with_capacity(p.min(1 << 24));
    let mut b = [0u8; 8];
    for _ in 0..p {
        r.fill(&mut b, false)?;
        data.push(f64::from_le_bytes(b));
    }
    Ok(Some(DenseTensor::new(shape, data)?))
}

pub fn read_tensor<R: Read>(r: R) -> Result<DenseTensor> {
    let mut c = Counting { inner: r, pos: 0 };
    let x = read_record(&mut c)?.ok_or_else(|| Error::format(0, "empty input"))?;
    let mut extra = [0u8; 1];
    if c.fill(&mut extra, true)? {
        return Err(Error::format(c.pos - 1, "trailing bytes after tensor record"));
    }
    Ok(x)
}

pub fn save_tensor(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, x)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

fn matrix_record(m: &Matrix) -> DenseTensor {
    DenseTensor::new(vec![m.nrows(), m.ncols()], m.as_slice().to_vec()).expect("matrix shape is valid")
}

pub fn write_model<W: Write>(w: &mut W, model: &TuckerModel) -> Result<()> {
    let ranks = DenseTensor::new(
        vec![model.ranks.len()],
        model.ranks.iter().map(|&d| d as f64).collect(),
    )?;
    write_tensor(w, &ranks)?;
    for b in &model.bases {
        write_tensor(w, &matrix_record(b.matrix()))?;
    }
    if let Some(core) = &model.core {
        write_tensor(w, core)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<TuckerModel> {
    let mut c = Counting { inner: r, pos: 0 };
    let at = c.pos;
    let header = read_record(&mut c)?.ok_or_else(|| Error::format(0, "empty model file"))?;
    if header.order() != 1 {
        return Err(Error::format(at, "model header must be a 1-way ranks record"));
    }
    let mut ranks = Vec::with_capacity(header.len());
    for &v in header.data() {
        if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::format(at, format!("invalid rank {v}")));
        }
        ranks.push(v as usize);
    }
    let mut bases = Vec::with_capacity(ranks.len());
    for (n, &d) in ranks.iter().enumerate() {
        let at = c.pos;
        let rec = read_record(&mut c)?
            .ok_or_else(|| Error::format(at, format!("missing basis for mode {n}")))?;
        if rec.order() != 2 || rec.shape()[1] != d {
            return Err(Error::format(
                at,
                format!("mode-{n} basis record has shape {:?}, expected (D, {d})", rec.shape()),
            ));
        }
        let m = Matrix::from_column_slice(rec.shape()[0], d, rec.data());
        let basis = StiefelBasis::new(m).map_err(|e| Error::format(at, e.to_string()))?;
        bases.push(basis);
    }
    let mut model = TuckerModel::new(bases).map_err(|e| Error::format(0, e.to_string()))?;
    let at = c.pos;
    if let Some(core) = read_record(&mut c)? {
        if core.shape() != ranks.as_slice() {
            return Err(Error::format(
                at,
                format!("core shape {:?} does not match ranks {ranks:?}", core.shape()),
            ));
        }
        model.core = Some(core);
        let at = c.pos;
        if read_record(&mut c)?.is_some() {
            return Err(Error::format(at, "unexpected record after the core"));
        }
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &TuckerModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TuckerModel> {
    read_model(BufReader::new(File::open(path)?))
}
