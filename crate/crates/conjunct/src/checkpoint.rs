//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "CONJCKPT"
//! version      u32
//! kind         u8       1 = identifier, 2 = detector
//! header_len   u32
//! header       JSON     encoder spec, flag encoding, loss, config, log,
//!                       transition mask
//! tensors      u32 count, then per tensor:
//!              u16 name length, name, u8 rank, u32 dims, f64 values
//! digest       32 bytes SHA-256 of everything before it
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use conjunct_core::crf::{transition_mask, CrfParams, NUM_LABELS};
use conjunct_core::encoder::{EncoderError, EncoderSpec, FlagEncoding, HashedEncoder};
use conjunct_core::models::{
    DetectorLoss, DetectorModel, IdentifierModel, Linear, ModelError, SharedEncoder, TrainingLog,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Config;

pub const MAGIC: &[u8; 8] = b"CONJCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error("expected a {expected:?} checkpoint, found {found:?}")]
    Kind { expected: ModelKind, found: ModelKind },
    #[error("unknown model kind byte {0}")]
    UnknownKind(u8),
    #[error("checkpoint digest mismatch")]
    Digest,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("tensor `{name}`: expected dims {expected:?}, found {found:?}")]
    Shape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("transition mask differs from this build")]
    Mask,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Identifier,
    Detector,
}

impl ModelKind {
    fn byte(self) -> u8 {
        match self {
            ModelKind::Identifier => 1,
            ModelKind::Detector => 2,
        }
    }

    fn from_byte(b: u8) -> Result<Self, CheckpointError> {
        match b {
            1 => Ok(ModelKind::Identifier),
            2 => Ok(ModelKind::Detector),
            other => Err(CheckpointError::UnknownKind(other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    encoder: EncoderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flags: Option<FlagEncoding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss: Option<DetectorLoss>,
    config: Config,
    log: TrainingLog,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition_mask: Option<Vec<Vec<bool>>>,
}

struct Tensor {
    name: String,
    dims: Vec<usize>,
    values: Vec<f64>,
}

/// Instantiates the encoder a checkpoint was trained with.
pub fn build_encoder(spec: &EncoderSpec) -> Result<SharedEncoder, EncoderError> {
    match spec {
        EncoderSpec::Hashed(cfg) => {
            if cfg.dim == 0 {
                return Err(EncoderError::Dimension { got: 0, expected: 1 });
            }
            Ok(Arc::new(HashedEncoder::new(*cfg)))
        }
        EncoderSpec::External { model_path, .. } => Err(EncoderError::Unavailable(format!(
            "external encoder `{model_path}` requires a subword backend, none is built in"
        ))),
    }
}

fn mask_table() -> Vec<Vec<bool>> {
    transition_mask().iter().map(|r| r.to_vec()).collect()
}

fn encode(kind: ModelKind, header: &Header, tensors: &[Tensor]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(kind.byte());
    let json = serde_json::to_vec(header).expect("header serializes");
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        buf.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(t.name.as_bytes());
        buf.push(t.dims.len() as u8);
        for d in &t.dims {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &t.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| CheckpointError::Malformed("truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(data: &[u8], expected: ModelKind) -> Result<(Header, Vec<Tensor>), CheckpointError> {
    if data.len() < MAGIC.len() || &data[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if data.len() < MAGIC.len() + 4 + 32 {
        return Err(CheckpointError::Malformed("truncated".into()));
    }
    let mut c = Cursor { data, pos: MAGIC.len() };
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    let (body, digest) = data.split_at(data.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::Digest);
    }
    c.data = body;
    let found = ModelKind::from_byte(c.u8()?)?;
    if found != expected {
        return Err(CheckpointError::Kind { expected, found });
    }
    let hlen = c.u32()? as usize;
    let header: Header =
        serde_json::from_slice(c.take(hlen)?).map_err(|e| CheckpointError::Malformed(format!("header: {e}")))?;
    let count = c.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(16));
    for _ in 0..count {
        let nlen = c.u16()? as usize;
        let name = String::from_utf8(c.take(nlen)?.to_vec())
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
        let rank = c.u8()? as usize;
        let dims = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let size = dims.iter().try_fold(1usize, |a, d| a.checked_mul(*d));
        let size = size
            .filter(|s| s.checked_mul(8).is_some_and(|b| b <= c.data.len() - c.pos))
            .ok_or_else(|| CheckpointError::Malformed(format!("tensor `{name}` too large")))?;
        let values = (0..size).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
        tensors.push(Tensor { name, dims, values });
    }
    if c.pos != c.data.len() {
        return Err(CheckpointError::Malformed("trailing bytes".into()));
    }
    Ok((header, tensors))
}

fn take_tensor(tensors: &mut Vec<Tensor>, name: &str, dims: &[usize]) -> Result<Vec<f64>, CheckpointError> {
    let pos = tensors
        .iter()
        .position(|t| t.name == name)
        .ok_or_else(|| CheckpointError::Malformed(format!("missing tensor `{name}`")))?;
    let t = tensors.remove(pos);
    if t.dims != dims {
        return Err(CheckpointError::Shape {
            name: name.to_string(),
            expected: dims.to_vec(),
            found: t.dims,
        });
    }
    Ok(t.values)
}

fn linear_tensors(prefix: &str, l: &Linear) -> [Tensor; 2] {
    [
        Tensor {
            name: format!("{prefix}.weight"),
            dims: vec![l.outputs, l.inputs],
            values: l.weights.clone(),
        },
        Tensor {
            name: format!("{prefix}.bias"),
            dims: vec![l.outputs],
            values: l.bias.clone(),
        },
    ]
}

fn read_linear(tensors: &mut Vec<Tensor>, prefix: &str, inputs: usize, outputs: usize) -> Result<Linear, CheckpointError> {
    Ok(Linear {
        inputs,
        outputs,
        weights: take_tensor(tensors, &format!("{prefix}.weight"), &[outputs, inputs])?,
        bias: take_tensor(tensors, &format!("{prefix}.bias"), &[outputs])?,
    })
}

pub fn identifier_bytes(model: &IdentifierModel, config: &Config) -> Vec<u8> {
    let header = Header {
        encoder: model.encoder().spec(),
        flags: None,
        loss: None,
        config: config.clone(),
        log: model.log().clone(),
        transition_mask: None,
    };
    encode(ModelKind::Identifier, &header, &linear_tensors("projection", model.projection()))
}

pub fn detector_bytes(model: &DetectorModel, config: &Config) -> Vec<u8> {
    let header = Header {
        encoder: model.encoder().spec(),
        flags: Some(model.flag_encoding()),
        loss: Some(model.loss_kind()),
        config: config.clone(),
        log: model.log().clone(),
        transition_mask: Some(mask_table()),
    };
    let crf = model.crf();
    let mut tensors: Vec<Tensor> = linear_tensors("emission", model.emission()).into();
    tensors.push(Tensor {
        name: "crf.start".into(),
        dims: vec![NUM_LABELS],
        values: crf.start.to_vec(),
    });
    tensors.push(Tensor {
        name: "crf.end".into(),
        dims: vec![NUM_LABELS],
        values: crf.end.to_vec(),
    });
    tensors.push(Tensor {
        name: "crf.transitions".into(),
        dims: vec![NUM_LABELS, NUM_LABELS],
        values: crf.transitions.as_flattened().to_vec(),
    });
    encode(ModelKind::Detector, &header, &tensors)
}

/// The configuration stored alongside the weights.
pub fn stored_config(data: &[u8], kind: ModelKind) -> Result<Config, CheckpointError> {
    Ok(decode(data, kind)?.0.config)
}

pub fn identifier_from_bytes(data: &[u8]) -> Result<IdentifierModel, CheckpointError> {
    let (header, mut tensors) = decode(data, ModelKind::Identifier)?;
    let encoder = build_encoder(&header.encoder)?;
    let projection = read_linear(&mut tensors, "projection", encoder.dim(), 2)?;
    Ok(IdentifierModel::from_parts(encoder, projection, header.log)?)
}

pub fn detector_from_bytes(data: &[u8]) -> Result<DetectorModel, CheckpointError> {
    let (header, mut tensors) = decode(data, ModelKind::Detector)?;
    if header.transition_mask.as_ref() != Some(&mask_table()) {
        return Err(CheckpointError::Mask);
    }
    let flags = header
        .flags
        .ok_or_else(|| CheckpointError::Malformed("detector header lacks flag encoding".into()))?;
    let encoder = build_encoder(&header.encoder)?;
    let emission = read_linear(&mut tensors, "emission", encoder.dim() + flags.dim(), NUM_LABELS)?;
    let mut crf = CrfParams::default();
    crf.start
        .copy_from_slice(&take_tensor(&mut tensors, "crf.start", &[NUM_LABELS])?);
    crf.end.copy_from_slice(&take_tensor(&mut tensors, "crf.end", &[NUM_LABELS])?);
    crf.transitions
        .as_flattened_mut()
        .copy_from_slice(&take_tensor(&mut tensors, "crf.transitions", &[NUM_LABELS, NUM_LABELS])?);
    Ok(DetectorModel::from_parts(
        encoder,
        flags,
        emission,
        crf,
        header.loss.unwrap_or_default(),
        header.log,
    )?)
}

fn read_file(path: &Path) -> Result<Vec<u8>, CheckpointError> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    Ok(data)
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), CheckpointError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(data)?;
    f.sync_all()?;
    Ok(())
}

pub fn save_identifier(path: &Path, model: &IdentifierModel, config: &Config) -> Result<(), CheckpointError> {
    write_file(path, &identifier_bytes(model, config))
}

pub fn save_detector(path: &Path, model: &DetectorModel, config: &Config) -> Result<(), CheckpointError> {
    write_file(path, &detector_bytes(model, config))
}

pub fn load_identifier(path: &Path) -> Result<IdentifierModel, CheckpointError> {
    identifier_from_bytes(&read_file(path)?)
}

pub fn load_detector(path: &Path) -> Result<DetectorModel, CheckpointError> {
    detector_from_bytes(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use conjunct_core::encoder::HashedConfig;
    use conjunct_core::models::{train_detector, train_identifier};
    use conjunct_core::treebank::{generate_instances, parse_bracketed};

    fn setup() -> (Config, IdentifierModel, DetectorModel) {
        let mut config = Config {
            encoder: EncoderSpec::Hashed(HashedConfig { dim: 64, window: 1, max_len: 64 }),
            ..Config::default()
        };
        config.train.epochs = 2;
        let t = parse_bracketed("(NP (NP (NNS apples)) (CC and) (NP (NNS pears)))").unwrap();
        let data = generate_instances(&t).unwrap();
        let enc = build_encoder(&config.encoder).unwrap();
        let id = train_identifier(&data, enc.clone(), &config.train).unwrap();
        let det = train_detector(&data, enc, config.detector.flags, &config.train).unwrap();
        (config, id, det)
    }

    #[test]
    fn round_trip_is_exact() {
        let (config, id, det) = setup();
        let bytes = detector_bytes(&det, &config);
        let back = detector_from_bytes(&bytes).unwrap();
        assert_eq!(back.crf(), det.crf());
        assert_eq!(back.emission(), det.emission());
        assert_eq!(detector_bytes(&back, &config), bytes);
        let ib = identifier_bytes(&id, &config);
        assert_eq!(identifier_bytes(&identifier_from_bytes(&ib).unwrap(), &config), ib);
        assert_eq!(stored_config(&ib, ModelKind::Identifier).unwrap(), config);
    }

    #[test]
    fn refuses_mismatches() {
        let (config, id, det) = setup();
        let bytes = detector_bytes(&det, &config);
        assert!(matches!(
            identifier_from_bytes(&bytes),
            Err(CheckpointError::Kind { .. })
        ));
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(matches!(detector_from_bytes(&v), Err(CheckpointError::Version { found: 9 })));
        let mut v = bytes.clone();
        let n = v.len();
        v[n - 40] ^= 1;
        assert!(matches!(detector_from_bytes(&v), Err(CheckpointError::Digest)));
        assert!(matches!(detector_from_bytes(b"nope"), Err(CheckpointError::BadMagic)));

        let mut wrong = config.clone();
        wrong.encoder = EncoderSpec::Hashed(HashedConfig { dim: 32, window: 1, max_len: 64 });
        let header = Header {
            encoder: wrong.encoder.clone(),
            flags: None,
            loss: None,
            config: wrong,
            log: TrainingLog::default(),
            transition_mask: None,
        };
        let forged = encode(ModelKind::Identifier, &header, &linear_tensors("projection", id.projection()));
        assert!(matches!(identifier_from_bytes(&forged), Err(CheckpointError::Shape { .. })));
    }
}
