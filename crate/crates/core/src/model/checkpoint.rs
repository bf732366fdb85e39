//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic   "AWSR"
//! version u32
//! config  scale u32, n_lfb u32, n_awru u32, c_feat u32, c_wide u32,
//!         ru_kind u8 (0 basic, 1 adaptive), use_lrfu u8, use_awms u8,
//!         init_unit_weight f64, init_branch_weight f64,
//!         kernel_count u32, kernels u32 * kernel_count
//! count   u32
//! param   name_len u32, name bytes, dtype u8 (0 f32, 1 f64), rank u8, dims u32 * rank,
//!         values (dtype, little-endian)
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{AwsrnModel, ModelConfig, ModelError, RuKind};
use crate::params::{ParamRegistry, Parameter};
use crate::tensor::{DType, Element, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AWSR";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, not a checkpoint")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {found} (expected {CHECKPOINT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(String),
    #[error("checkpoint config invalid: {0}")]
    InvalidConfig(String),
    #[error("checkpoint registry mismatch: {0}")]
    RegistryMismatch(String),
    #[error("unknown dtype tag {tag} for `{name}`")]
    UnknownDType { name: String, tag: u8 },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
}

impl From<ModelError> for CheckpointError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::RegistryMismatch(m) => CheckpointError::RegistryMismatch(m),
            other => CheckpointError::InvalidConfig(other.to_string()),
        }
    }
}

/// Serialises a model to bytes.
pub fn write_checkpoint<T: Element>(model: &AwsrnModel<T>) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    for v in [cfg.scale, cfg.n_lfb, cfg.n_awru, cfg.c_feat, cfg.c_wide] {
        put_u32(&mut out, v as u32);
    }
    out.push(match cfg.ru_kind {
        RuKind::Basic => 0,
        RuKind::Adaptive => 1,
    });
    out.push(cfg.use_lrfu as u8);
    out.push(cfg.use_awms as u8);
    out.extend_from_slice(&cfg.init_unit_weight.to_le_bytes());
    out.extend_from_slice(&cfg.init_branch_weight.to_le_bytes());
    put_u32(&mut out, cfg.awms_kernels.len() as u32);
    for &k in &cfg.awms_kernels {
        put_u32(&mut out, k as u32);
    }
    put_u32(&mut out, model.params().len() as u32);
    for p in model.params().iter() {
        put_u32(&mut out, p.name.len() as u32);
        out.extend_from_slice(p.name.as_bytes());
        out.push(T::DTYPE as u8);
        out.push(4);
        for d in p.value.shape().0 {
            put_u32(&mut out, d as u32);
        }
        for &v in p.value.data() {
            v.write_le(&mut out);
        }
    }
    out
}

pub fn save_checkpoint<T: Element>(model: &AwsrnModel<T>, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint<T: Element>(path: impl AsRef<Path>) -> Result<AwsrnModel<T>, CheckpointError> {
    read_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint that must hold exactly the registry of `expected`.
pub fn load_checkpoint_as<T: Element>(
    path: impl AsRef<Path>,
    expected: &ModelConfig,
) -> Result<AwsrnModel<T>, CheckpointError> {
    let model: AwsrnModel<T> = load_checkpoint(path)?;
    let want = expected.expected_signature();
    let got = model.params().signature();
    if want != got {
        let detail = match want.iter().zip(&got).position(|(a, b)| a != b) {
            Some(i) => format!("expected `{}` {}, found `{}` {}", want[i].0, want[i].1, got[i].0, got[i].1),
            None => format!("expected {} parameters, found {}", want.len(), got.len()),
        };
        return Err(CheckpointError::RegistryMismatch(detail));
    }
    Ok(model)
}

/// Parses and validates checkpoint bytes. Values stored in another precision are converted.
pub fn read_checkpoint<T: Element>(bytes: &[u8]) -> Result<AwsrnModel<T>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let config = read_config(&mut r)?;
    config.validate()?;
    let expected = config.expected_signature();

    let count = r.u32("parameter count")? as usize;
    if count != expected.len() {
        return Err(CheckpointError::RegistryMismatch(format!(
            "config implies {} parameters, file stores {count}",
            expected.len()
        )));
    }
    let mut params = ParamRegistry::new();
    for (i, (want_name, want_shape)) in expected.iter().enumerate() {
        let ctx = || format!("parameter #{i} (`{want_name}`)");
        let len = r.u32(&format!("name length of {}", ctx()))? as usize;
        let name = String::from_utf8_lossy(r.take(len, &format!("name of {}", ctx()))?).into_owned();
        if &name != want_name {
            return Err(CheckpointError::RegistryMismatch(format!("entry {i}: expected `{want_name}`, found `{name}`")));
        }
        let tag = r.u8(&format!("dtype of `{name}`"))?;
        let dtype = DType::from_tag(tag).ok_or_else(|| CheckpointError::UnknownDType { name: name.clone(), tag })?;
        let rank = r.u8(&format!("rank of `{name}`"))? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32(&format!("dims of `{name}`"))? as usize);
        }
        if dims != want_shape.0 {
            return Err(CheckpointError::RegistryMismatch(format!(
                "`{name}` has dims {dims:?}, expected {want_shape}"
            )));
        }
        let n = want_shape.numel();
        let raw = r.take(n * dtype.size(), &format!("values of `{name}`"))?;
        let data: Vec<T> = match dtype {
            DType::F32 => raw.chunks_exact(4).map(|c| T::from_f64(f32::read_le(c) as f64)).collect(),
            DType::F64 if T::DTYPE == DType::F64 => raw.chunks_exact(8).map(T::read_le).collect(),
            DType::F64 => raw.chunks_exact(8).map(|c| T::from_f64(f64::read_le(c))).collect(),
        };
        let value = Tensor::new(*want_shape, data).map_err(|e| CheckpointError::InvalidConfig(e.to_string()))?;
        params
            .insert(Parameter::new(name, value))
            .map_err(|e| CheckpointError::RegistryMismatch(e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(AwsrnModel::from_parts(config, params)?)
}

fn read_config(r: &mut Reader<'_>) -> Result<ModelConfig, CheckpointError> {
    let mut ints = [0usize; 5];
    for (slot, field) in ints.iter_mut().zip(["scale", "n_lfb", "n_awru", "c_feat", "c_wide"]) {
        *slot = r.u32(&format!("config field {field}"))? as usize;
    }
    let ru_kind = match r.u8("config field ru_kind")? {
        0 => RuKind::Basic,
        1 => RuKind::Adaptive,
        t => return Err(CheckpointError::InvalidConfig(format!("ru_kind tag {t}"))),
    };
    let flag = |v: u8, field: &str| match v {
        0 => Ok(false),
        1 => Ok(true),
        t => Err(CheckpointError::InvalidConfig(format!("{field} flag {t}"))),
    };
    let use_lrfu = flag(r.u8("config field use_lrfu")?, "use_lrfu")?;
    let use_awms = flag(r.u8("config field use_awms")?, "use_awms")?;
    let init_unit_weight = r.f64("config field init_unit_weight")?;
    let init_branch_weight = r.f64("config field init_branch_weight")?;
    let nk = r.u32("config kernel count")? as usize;
    let mut awms_kernels = Vec::with_capacity(nk.min(64));
    for _ in 0..nk {
        awms_kernels.push(r.u32("config kernels")? as usize);
    }
    let [scale, n_lfb, n_awru, c_feat, c_wide] = ints;
    Ok(ModelConfig {
        scale,
        n_lfb,
        n_awru,
        c_feat,
        c_wide,
        awms_kernels,
        ru_kind,
        use_lrfu,
        use_awms,
        init_unit_weight,
        init_branch_weight,
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Truncated(what.to_string())),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}
