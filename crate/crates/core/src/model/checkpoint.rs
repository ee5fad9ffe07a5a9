//! Binary checkpoint: magic `DBNM`, u16 version, model shape, optional
//! training temperatures, a UTF-8 config echo, then every parameter tensor
//! (name, shape, little-endian f64 values). Loading reproduces the
//! parameters bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::network::{Activation, DualBranchModel, Model, ModelConfig, SingleBranchModel};
use super::temperature::TemperatureSchedule;
use crate::numerics::Tensor;
use crate::rng::{self, Stream};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DBNM";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Free-form text describing the run that produced the model.
    pub config_echo: String,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(model: &Model, config_echo: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let cfg = model.config();
    out.push(match model {
        Model::Single(_) => 1,
        Model::Dual(_) => 2,
    });
    out.push(cfg.activation.code());
    put_u32(&mut out, cfg.input_dim)?;
    put_u32(&mut out, cfg.num_classes)?;
    put_u32(&mut out, cfg.hidden.len())?;
    for &w in &cfg.hidden {
        put_u32(&mut out, w)?;
    }
    put_u32(&mut out, cfg.head_hidden.len())?;
    for &w in &cfg.head_hidden {
        put_u32(&mut out, w)?;
    }

    match model.schedule() {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            put_f64s(&mut out, &[s.eta, s.epsilon]);
            put_u32(&mut out, s.class_counts.len())?;
            for &c in &s.class_counts {
                put_u32(&mut out, c)?;
            }
            put_u32(&mut out, s.temperatures.len())?;
            put_f64s(&mut out, &s.balance);
            put_f64s(&mut out, &s.temperatures);
        }
    }

    put_u32(&mut out, config_echo.len())?;
    out.extend_from_slice(config_echo.as_bytes());

    let params = model.params();
    put_u32(&mut out, params.len())?;
    for id in params.ids() {
        let name = params.name(id);
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        let value = params.value(id);
        put_u32(&mut out, value.shape().len())?;
        for &d in value.shape() {
            put_u32(&mut out, d)?;
        }
        put_f64s(&mut out, value.data());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()) {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format("checkpoint truncated".into())),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| self.u32()).collect()
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8".into()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected DBNM".into()));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let kind = r.u8()?;
    let activation = Activation::from_code(r.u8()?)?;
    let input_dim = r.u32()?;
    let num_classes = r.u32()?;
    let n_hidden = r.u32()?;
    let hidden = r.u32s(n_hidden)?;
    let n_head = r.u32()?;
    let head_hidden = r.u32s(n_head)?;
    let config = ModelConfig {
        input_dim,
        num_classes,
        hidden,
        head_hidden,
        activation,
    };

    let schedule = match r.u8()? {
        0 => None,
        1 => {
            let eta = r.f64()?;
            let epsilon = r.f64()?;
            let n_counts = r.u32()?;
            let class_counts = r.u32s(n_counts)?;
            let k = r.u32()?;
            let balance = r.f64s(k)?;
            let temperatures = r.f64s(k)?;
            Some(TemperatureSchedule {
                eta,
                epsilon,
                class_counts,
                balance,
                temperatures,
            })
        }
        other => return Err(Error::Format(format!("bad schedule flag {other}"))),
    };
    let config_echo = r.string()?;

    // Parameter values are overwritten below; the seed only fixes layout.
    let mut init = rng::stream(0, Stream::Init);
    let mut model = match kind {
        1 => Model::Single(SingleBranchModel::new(config, &mut init)?),
        2 => Model::Dual(DualBranchModel::new(config, &mut init)?),
        other => return Err(Error::Format(format!("unknown model kind {other}"))),
    };
    model.set_schedule(schedule);

    let count = r.u32()?;
    if count != model.params().len() {
        return Err(Error::Format(format!(
            "checkpoint holds {count} tensors, model layout needs {}",
            model.params().len()
        )));
    }
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let name = r.string()?;
        if name != model.params().name(id) {
            return Err(Error::Format(format!(
                "expected tensor `{}`, found `{name}`",
                model.params().name(id)
            )));
        }
        let ndim = r.u32()?;
        let shape = r.u32s(ndim)?;
        let len = shape.iter().product();
        let data = r.f64s(len)?;
        let tensor = Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))?;
        model
            .params_mut()
            .set_value(id, tensor)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(Checkpoint { model, config_echo })
}

pub fn save_checkpoint(path: &Path, model: &Model, config_echo: &str) -> Result<()> {
    let bytes = encode_checkpoint(model, config_echo)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
