//! File formats shared across the toolkit.
//!
//! * Trajectory JSON (UTF-8):
//!   `{"dt": number, "source": "human"|"robot", "demo_id": string,
//!     "frames": [{"translation":[x,y,z], "quaternion":[w,x,y,z], "joints":[...]}, ...]}`
//! * Feature binary (`TRJF`): magic bytes `TRJF`, version `u32 = 1`,
//!   rows `u32`, dim `u32`, then `rows * dim` IEEE-754 binary32 values,
//!   all little-endian, row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quat;
use crate::traj::{ActionFrame, FeatureSequence, Source, Trajectory};

pub const FEATURE_MAGIC: &[u8; 4] = b"TRJF";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FrameWire {
    translation: [f64; 3],
    quaternion: [f64; 4],
    joints: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryWire {
    dt: f64,
    source: Source,
    demo_id: String,
    frames: Vec<FrameWire>,
}

pub fn trajectory_to_json(traj: &Trajectory) -> String {
    let wire = TrajectoryWire {
        dt: traj.dt(),
        source: traj.source(),
        demo_id: traj.demo_id().to_string(),
        frames: traj
            .frames()
            .iter()
            .map(|f| FrameWire {
                translation: f.translation(),
                quaternion: f.orientation().wxyz(),
                joints: f.joints().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&wire).expect("trajectory serialization cannot fail")
}

pub fn trajectory_from_json(json: &str) -> Result<Trajectory> {
    let wire: TrajectoryWire =
        serde_json::from_str(json).map_err(|e| Error::Format(format!("trajectory json: {e}")))?;
    let frames = wire
        .frames
        .into_iter()
        .map(|f| ActionFrame::new(f.translation, Quat::from_wxyz(f.quaternion)?, f.joints))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(frames, wire.dt, wire.source, wire.demo_id)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trajectory_to_json(traj)).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trajectory_from_json(&text)
}

/// Serializes features to the `TRJF` layout. Values are quantized to f32;
/// the demo id is not stored and must be re-supplied on read.
pub fn features_to_bytes(features: &FeatureSequence) -> Vec<u8> {
    let rows = features.len() as u32;
    let dim = features.dim() as u32;
    let mut out = Vec::with_capacity(16 + (rows * dim) as usize * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for row in features.rows() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn features_from_bytes(bytes: &[u8], demo_id: impl Into<String>) -> Result<FeatureSequence> {
    let mut cursor = bytes;
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("feature file truncated before magic".into()))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Format(format!(
            "bad feature magic {magic:?}, expected {FEATURE_MAGIC:?}"
        )));
    }
    let version = read_u32(&mut cursor, "version")?;
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!(
            "unsupported feature file version {version}"
        )));
    }
    let rows = read_u32(&mut cursor, "rows")? as usize;
    let dim = read_u32(&mut cursor, "dim")? as usize;
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut buf = [0u8; 4];
            cursor
                .read_exact(&mut buf)
                .map_err(|_| Error::Format("feature file truncated in payload".into()))?;
            row.push(f32::from_le_bytes(buf) as f64);
        }
        data.push(row);
    }
    FeatureSequence::new(data, demo_id)
}

pub fn write_features(path: impl AsRef<Path>, features: &FeatureSequence) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&features_to_bytes(features))
        .map_err(|e| Error::io(path, e))
}

/// Reads a `TRJF` file; the demo id is taken from the file stem.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let demo_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    features_from_bytes(&bytes, demo_id)
}

fn read_u32(cursor: &mut &[u8], what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("feature file truncated in {what}")))?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_traj() -> Trajectory {
        let frames = vec![
            ActionFrame::new(
                [0.1, 0.2, 0.3],
                Quat::from_axis_angle([0.0, 0.0, 1.0], 0.3).unwrap(),
                vec![0.5],
            )
            .unwrap(),
            ActionFrame::new([0.2, 0.1, 0.0], Quat::IDENTITY, vec![-0.25]).unwrap(),
        ];
        Trajectory::new(frames, 0.033, Source::Robot, "demo-7").unwrap()
    }

    #[test]
    fn trajectory_json_round_trip() {
        let traj = sample_traj();
        let json = trajectory_to_json(&traj);
        let back = trajectory_from_json(&json).unwrap();
        assert_eq!(traj, back);
        // second serialization is byte-identical
        assert_eq!(json, trajectory_to_json(&back));
    }

    #[test]
    fn trajectory_json_schema_fields() {
        let json = trajectory_to_json(&sample_traj());
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["source"], "robot");
        assert_eq!(value["demo_id"], "demo-7");
        assert_eq!(value["frames"][0]["quaternion"].as_array().unwrap().len(), 4);
        assert_eq!(value["frames"][0]["translation"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn features_binary_round_trip() {
        let f = FeatureSequence::new(vec![vec![1.0, -2.5], vec![0.125, 3.0]], "f1").unwrap();
        let bytes = features_to_bytes(&f);
        assert_eq!(&bytes[0..4], FEATURE_MAGIC);
        let back = features_from_bytes(&bytes, "f1").unwrap();
        assert_eq!(f, back);
        assert_eq!(bytes, features_to_bytes(&back));
    }

    #[test]
    fn features_rejects_corrupt_input() {
        assert!(features_from_bytes(b"nope", "x").is_err());
        let f = FeatureSequence::new(vec![vec![1.0]], "f").unwrap();
        let mut bytes = features_to_bytes(&f);
        bytes.truncate(bytes.len() - 1);
        assert!(features_from_bytes(&bytes, "f").is_err());
    }
}
