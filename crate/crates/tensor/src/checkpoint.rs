//! Binary checkpoint container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic      8 bytes  b"CTRPCKPT"
//! version    u32      currently 1
//! meta_len   u32      followed by meta_len bytes of UTF-8 (free-form, JSON by convention)
//! n_params   u32
//! per parameter, in store order:
//!   name_len u32, name bytes (UTF-8)
//!   rows u64, cols u64
//!   rows*cols f64 values, row-major
//! has_opt    u8       0 or 1
//! if has_opt == 1:
//!   lr f64, beta1 f64, beta2 f64, eps f64, step u64
//!   per parameter, in store order: first moment (rows*cols f64), second moment (rows*cols f64)
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{Result, TensorError};
use crate::params::ParamStore;

pub const MAGIC: &[u8; 8] = b"CTRPCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: String,
    pub params: ParamStore,
    pub optimizer: Option<AdamState>,
}

fn io_err(e: std::io::Error) -> TensorError {
    TensorError::Checkpoint(e.to_string())
}

fn write_matrix<W: Write>(w: &mut W, m: &Array2<f64>) -> Result<()> {
    for v in m.iter() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

pub fn write<W: Write>(mut w: W, meta: &str, params: &ParamStore, optimizer: Option<&AdamState>) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(meta.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(meta.as_bytes()).map_err(io_err)?;
    w.write_all(&(params.len() as u32).to_le_bytes()).map_err(io_err)?;
    for (_, name, value) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
        w.write_all(&(value.nrows() as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(value.ncols() as u64).to_le_bytes()).map_err(io_err)?;
        write_matrix(&mut w, &value.as_standard_layout().to_owned())?;
    }
    match optimizer {
        None => w.write_all(&[0u8]).map_err(io_err)?,
        Some(opt) => {
            if opt.m.len() != params.len() {
                return Err(TensorError::Checkpoint(
                    "optimizer state does not match parameter count".into(),
                ));
            }
            w.write_all(&[1u8]).map_err(io_err)?;
            let c = opt.config;
            for x in [c.lr, c.beta1, c.beta2, c.eps] {
                w.write_all(&x.to_le_bytes()).map_err(io_err)?;
            }
            w.write_all(&opt.step.to_le_bytes()).map_err(io_err)?;
            for (m, v) in opt.moments() {
                write_matrix(&mut w, m)?;
                write_matrix(&mut w, v)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| TensorError::Checkpoint(format!("truncated file: {e}")))?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn string(&mut self, len: usize) -> Result<String> {
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| TensorError::Checkpoint(format!("truncated file: {e}")))?;
        String::from_utf8(buf).map_err(|_| TensorError::Checkpoint("invalid UTF-8".into()))
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(self.f64()?);
        }
        Ok(Array2::from_shape_vec((rows, cols), values).expect("length matches shape"))
    }
}

pub fn read<R: Read>(r: R) -> Result<Checkpoint> {
    let mut r = Reader { inner: r };
    let magic: [u8; 8] = r.bytes()?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(TensorError::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = r.u32()? as usize;
    let meta = r.string(meta_len)?;
    let n = r.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..n {
        let name_len = r.u32()? as usize;
        let name = r.string(name_len)?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let value = r.matrix(rows, cols)?;
        if params.id(&name).is_some() {
            return Err(TensorError::Checkpoint(format!("duplicate parameter {name}")));
        }
        params.insert(name, value);
    }
    let optimizer = match r.bytes::<1>()?[0] {
        0 => None,
        1 => {
            let config = AdamConfig {
                lr: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            let step = r.u64()?;
            let mut m = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for (_, _, p) in params.iter() {
                m.push(r.matrix(p.nrows(), p.ncols())?);
                v.push(r.matrix(p.nrows(), p.ncols())?);
            }
            Some(AdamState { config, step, m, v })
        }
        other => return Err(TensorError::Checkpoint(format!("bad optimizer flag {other}"))),
    };
    Ok(Checkpoint {
        meta,
        params,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Gradients;
    use ndarray::array;

    #[test]
    fn roundtrip_with_optimizer() {
        let mut store = ParamStore::new();
        let w = store.insert("w", array![[1.5, -2.0], [0.25, 3.0]]);
        store.insert("b", array![[0.1, 0.2]]);
        let mut adam = AdamState::new(&store, AdamConfig::default());
        let mut g = Gradients::new(2);
        g.accumulate(w, &array![[1.0, 1.0], [1.0, 1.0]]);
        adam.step(&mut store, &g);

        let mut buf = Vec::new();
        write(&mut buf, "{\"k\":1}", &store, Some(&adam)).unwrap();
        let ck = read(buf.as_slice()).unwrap();
        assert_eq!(ck.meta, "{\"k\":1}");
        assert_eq!(ck.params.get(w), store.get(w));
        assert_eq!(ck.params.name(w), "w");
        assert_eq!(ck.optimizer.unwrap(), adam);
    }

    #[test]
    fn header_layout_is_stable() {
        let mut store = ParamStore::new();
        store.insert("a", array![[2.0]]);
        let mut buf = Vec::new();
        write(&mut buf, "", &store, None).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..16], &0u32.to_le_bytes());
        assert_eq!(&buf[16..20], &1u32.to_le_bytes());
        assert_eq!(&buf[20..24], &1u32.to_le_bytes());
        assert_eq!(buf[24], b'a');
        assert_eq!(&buf[41..49], &2.0f64.to_le_bytes());
        assert_eq!(buf.len(), 50);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut store = ParamStore::new();
        store.insert("a", array![[2.0, 3.0]]);
        let mut buf = Vec::new();
        write(&mut buf, "", &store, None).unwrap();
        assert!(read(&buf[..buf.len() - 3]).is_err());
        assert!(read(&b"NOTACKPT"[..]).is_err());
    }
}
