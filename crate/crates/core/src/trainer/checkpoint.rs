use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::model::{ModelParams, TENSOR_NAMES};

use super::{OptimizerState, TrainConfig, TrainError};

pub const CHECKPOINT_FORMAT: &str = "scp-ckpt-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OptimizerRecord {
    step: u64,
    m: Vec<TensorRecord>,
    v: Vec<TensorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    step: u64,
    config: TrainConfig,
    tensors: Vec<TensorRecord>,
    optimizer: OptimizerRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub step: u64,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
}

fn records(p: &ModelParams) -> Vec<TensorRecord> {
    let shapes = p.shapes();
    p.tensors()
        .iter()
        .zip(TENSOR_NAMES)
        .zip(shapes)
        .map(|((t, name), (r, c))| TensorRecord {
            name: name.to_owned(),
            shape: [r, c],
            data: t.to_vec(),
        })
        .collect()
}

fn restore(recs: &[TensorRecord], cfg: &TrainConfig, what: &str) -> Result<ModelParams, TrainError> {
    let mismatch = |m: String| Err(TrainError::ShapeMismatch(format!("{what}: {m}")));
    let expected = ModelParams::expected_shapes(&cfg.model());
    if recs.len() != expected.len() {
        return mismatch(format!("{} tensors, expected {}", recs.len(), expected.len()));
    }
    let mut p = ModelParams::zeros(&cfg.model());
    for (i, (rec, (er, ec))) in recs.iter().zip(expected).enumerate() {
        if rec.name != TENSOR_NAMES[i] {
            return mismatch(format!("tensor {i} is {:?}, expected {:?}", rec.name, TENSOR_NAMES[i]));
        }
        if rec.shape != [er, ec] {
            return mismatch(format!("{} has shape {:?}, config implies {:?}", rec.name, rec.shape, [er, ec]));
        }
        if rec.data.len() != er * ec {
            return mismatch(format!("{} has {} values for shape {:?}", rec.name, rec.data.len(), rec.shape));
        }
    }
    for (dst, rec) in p.tensors_mut().into_iter().zip(recs) {
        dst.copy_from_slice(&rec.data);
    }
    Ok(p)
}

/// Writes a versioned JSON checkpoint. `f64` values round-trip bitwise.
pub fn save_checkpoint(
    path: &Path,
    p: &ModelParams,
    s: &OptimizerState,
    cfg: &TrainConfig,
    step: u64,
) -> Result<(), TrainError> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_owned(),
        step,
        config: cfg.clone(),
        tensors: records(p),
        optimizer: OptimizerRecord {
            step: s.step,
            m: records(&s.m),
            v: records(&s.v),
        },
    };
    let text = serde_json::to_string(&file).map_err(|e| TrainError::Io(e.to_string()))?;
    fs::write(path, text).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
}

/// Reads a checkpoint and validates every tensor against its config echo
/// and, when given, against `expected`.
pub fn load_checkpoint(path: &Path, expected: Option<&TrainConfig>) -> Result<Checkpoint, TrainError> {
    let text = fs::read_to_string(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    let format = value.get("format").and_then(|f| f.as_str()).unwrap_or("");
    if format != CHECKPOINT_FORMAT {
        return Err(TrainError::VersionMismatch {
            found: format.to_owned(),
            expected: CHECKPOINT_FORMAT.to_owned(),
        });
    }
    let file: CheckpointFile =
        serde_json::from_value(value).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    let cfg = expected.unwrap_or(&file.config);
    if let Some(e) = expected {
        let (a, b) = (e.model(), file.config.model());
        if (a.d_in, a.d_h, a.d) != (b.d_in, b.d_h, b.d) {
            return Err(TrainError::ShapeMismatch(format!(
                "checkpoint dims (d_in {}, d_h {}, d {}) differ from config (d_in {}, d_h {}, d {})",
                b.d_in, b.d_h, b.d, a.d_in, a.d_h, a.d
            )));
        }
    }
    let params = restore(&file.tensors, cfg, "params")?;
    let optimizer = OptimizerState {
        m: restore(&file.optimizer.m, cfg, "optimizer.m")?,
        v: restore(&file.optimizer.v, cfg, "optimizer.v")?,
        step: file.optimizer.step,
    };
    Ok(Checkpoint {
        config: file.config,
        step: file.step,
        params,
        optimizer,
    })
}

impl Checkpoint {
    /// Dense view of one tensor by name.
    pub fn tensor(&self, name: &str) -> Option<Mat> {
        let i = TENSOR_NAMES.iter().position(|n| *n == name)?;
        let (r, c) = self.params.shapes()[i];
        Some(Mat::from_vec(r, c, self.params.tensors()[i].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(cfg: &TrainConfig) -> (ModelParams, OptimizerState) {
        let mut p = ModelParams::init(&cfg.model(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| *x += rng.random_range(-1e-3..1e-3) / 3.0);
        }
        let mut s = OptimizerState::new(&p);
        s.m = p.clone();
        s.step = 17;
        (p, s)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let cfg = TrainConfig::default();
        let (p, s) = noisy(&cfg);
        save_checkpoint(&path, &p, &s, &cfg, 42).unwrap();
        let ck = load_checkpoint(&path, Some(&cfg)).unwrap();
        assert_eq!(ck.step, 42);
        assert_eq!(ck.config, cfg);
        for (a, b) in ck.params.tensors().iter().zip(p.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(ck.optimizer, s);
    }

    #[test]
    fn tampered_shape_tag_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let cfg = TrainConfig::default();
        let (p, s) = noisy(&cfg);
        save_checkpoint(&path, &p, &s, &cfg, 1).unwrap();
        let text = fs::read_to_string(&path).unwrap().replacen("\"shape\":[64,16]", "\"shape\":[16,64]", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(TrainError::ShapeMismatch(_))));
    }

    #[test]
    fn dimension_change_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let small = TrainConfig {
            d: 16,
            ..TrainConfig::default()
        };
        let (p, s) = noisy(&small);
        save_checkpoint(&path, &p, &s, &small, 1).unwrap();
        let big = TrainConfig {
            d: 64,
            ..TrainConfig::default()
        };
        assert!(matches!(load_checkpoint(&path, Some(&big)), Err(TrainError::ShapeMismatch(_))));
    }

    #[test]
    fn wrong_format_tag_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        fs::write(&path, r#"{"format": "scp-ckpt-0"}"#).unwrap();
        assert!(matches!(
            load_checkpoint(&path, None),
            Err(TrainError::VersionMismatch { .. })
        ));
    }
}
