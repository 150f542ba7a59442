//! Mapping-guided MixUp: condition assembly, interpolation schedules, and
//! deterministic emission of 50/50 co-training batches.
//!
//! Batch binary format (`TRJB`): magic bytes `TRJB`, version `u32 = 1`,
//! then per record: `u32` condition length, condition as binary64, `u32 k`,
//! `u32` action dim, actions row-major binary64, binary64 domain alpha; all
//! little-endian. A JSON manifest written next to the data file records
//! dims, seed, schedule, and counts.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::align::MappingTable;
use crate::error::{Error, Result};
use crate::traj::{FeatureSequence, Source, Trajectory};

pub const BATCH_MAGIC: &[u8; 4] = b"TRJB";
pub const BATCH_VERSION: u32 = 1;

/// History length and per-timestep feature dimensions of a condition.
/// `agent_dim` is the agent-view feature size, `wrist_dim` the wrist-view
/// feature size (zero-filled for human data); proprioception size follows
/// from the trajectory's joint dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionDims {
    pub tau: usize,
    pub agent_dim: usize,
    pub wrist_dim: usize,
}

impl ConditionDims {
    pub fn new(tau: usize, agent_dim: usize, wrist_dim: usize) -> Result<ConditionDims> {
        if tau == 0 {
            return Err(Error::InvalidInput("tau must be >= 1".into()));
        }
        if agent_dim == 0 {
            return Err(Error::InvalidInput("agent_dim must be >= 1".into()));
        }
        Ok(ConditionDims {
            tau,
            agent_dim,
            wrist_dim,
        })
    }
}

/// Observation condition over a history window of length tau: agent-view
/// features, wrist-view features, and proprioception per timestep, oldest
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    agent: Vec<Vec<f64>>,
    wrist: Vec<Vec<f64>>,
    proprio: Vec<Vec<f64>>,
}

impl Condition {
    pub fn new(
        agent: Vec<Vec<f64>>,
        wrist: Vec<Vec<f64>>,
        proprio: Vec<Vec<f64>>,
    ) -> Result<Condition> {
        let tau = agent.len();
        if tau == 0 || wrist.len() != tau || proprio.len() != tau {
            return Err(Error::DimensionMismatch(
                "agent/wrist/proprio must share the same history length".into(),
            ));
        }
        for block in [&agent, &wrist, &proprio] {
            let dim = block[0].len();
            if block.iter().any(|row| row.len() != dim) {
                return Err(Error::DimensionMismatch(
                    "condition block rows must share one dimension".into(),
                ));
            }
        }
        Ok(Condition {
            agent,
            wrist,
            proprio,
        })
    }

    pub fn tau(&self) -> usize {
        self.agent.len()
    }

    pub fn agent_dim(&self) -> usize {
        self.agent[0].len()
    }

    pub fn wrist_dim(&self) -> usize {
        self.wrist[0].len()
    }

    pub fn proprio_dim(&self) -> usize {
        self.proprio[0].len()
    }

    pub fn agent(&self) -> &[Vec<f64>] {
        &self.agent
    }

    pub fn wrist(&self) -> &[Vec<f64>] {
        &self.wrist
    }

    pub fn proprio(&self) -> &[Vec<f64>] {
        &self.proprio
    }

    /// Deterministic concatenation `[agent_t | wrist_t | proprio_t]` per
    /// timestep, timesteps oldest first.
    pub fn flattened(&self) -> Vec<f64> {
        let per_step = self.agent_dim() + self.wrist_dim() + self.proprio_dim();
        let mut out = Vec::with_capacity(per_step * self.tau());
        for t in 0..self.tau() {
            out.extend_from_slice(&self.agent[t]);
            out.extend_from_slice(&self.wrist[t]);
            out.extend_from_slice(&self.proprio[t]);
        }
        out
    }

    /// Inverse of [`Condition::flattened`], given the block dimensions.
    pub fn from_flattened(
        flat: &[f64],
        dims: &ConditionDims,
        proprio_dim: usize,
    ) -> Result<Condition> {
        let per_step = dims.agent_dim + dims.wrist_dim + proprio_dim;
        if per_step == 0 || flat.len() != per_step * dims.tau {
            return Err(Error::DimensionMismatch(format!(
                "flattened length {} does not match {} steps of {per_step}",
                flat.len(),
                dims.tau
            )));
        }
        let mut agent = Vec::with_capacity(dims.tau);
        let mut wrist = Vec::with_capacity(dims.tau);
        let mut proprio = Vec::with_capacity(dims.tau);
        for step in flat.chunks_exact(per_step) {
            agent.push(step[..dims.agent_dim].to_vec());
            wrist.push(step[dims.agent_dim..dims.agent_dim + dims.wrist_dim].to_vec());
            proprio.push(step[dims.agent_dim + dims.wrist_dim..].to_vec());
        }
        Condition::new(agent, wrist, proprio)
    }
}

/// A supervision pair: condition plus future action chunk.
/// `domain_alpha` is 1 for pure human data, 0 for pure robot data, and the
/// interpolation coefficient for mixed samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub condition: Condition,
    pub actions: Vec<Vec<f64>>,
    pub domain_alpha: f64,
}

impl TrainingSample {
    pub fn k(&self) -> usize {
        self.actions.len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map_or(0, |a| a.len())
    }
}

/// How the interpolation coefficient evolves over training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// `alpha = max(alpha_min, 1 - epoch / epochs_to_zero)`, deterministic.
    LinearAnneal {
        epochs_to_zero: usize,
        alpha_min: f64,
    },
    /// One draw from Beta(a, b) per query.
    BetaDist { a: f64, b: f64 },
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            AlphaSchedule::LinearAnneal {
                epochs_to_zero,
                alpha_min,
            } => {
                if *epochs_to_zero == 0 {
                    return Err(Error::InvalidInput("epochs_to_zero must be >= 1".into()));
                }
                if !alpha_min.is_finite() || !(0.0..=1.0).contains(alpha_min) {
                    return Err(Error::InvalidInput("alpha_min must lie in [0, 1]".into()));
                }
            }
            AlphaSchedule::BetaDist { a, b } => {
                if !a.is_finite() || !b.is_finite() || *a <= 0.0 || *b <= 0.0 {
                    return Err(Error::InvalidInput(
                        "beta parameters must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::LinearAnneal {
            epochs_to_zero: 300,
            alpha_min: 0.0,
        }
    }
}

/// Evaluates the schedule with an explicit generator (used by the batch
/// stream, which owns one seeded generator for everything).
pub fn alpha_with(schedule: &AlphaSchedule, epoch: usize, rng: &mut impl Rng) -> f64 {
    match schedule {
        AlphaSchedule::LinearAnneal {
            epochs_to_zero,
            alpha_min,
        } => (1.0 - epoch as f64 / *epochs_to_zero as f64).max(*alpha_min),
        AlphaSchedule::BetaDist { a, b } => {
            let beta = Beta::new(*a, *b).expect("validated parameters");
            beta.sample(rng)
        }
    }
}

/// Standalone schedule evaluation, deterministic in `(seed, epoch)`.
pub fn alpha_at(schedule: &AlphaSchedule, epoch: usize, seed: u64) -> Result<f64> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    Ok(alpha_with(schedule, epoch, &mut rng))
}

/// Flat per-step state vector used for proprioception and action chunks.
fn frame_vec(traj: &Trajectory, t: usize) -> Vec<f64> {
    traj.frame(t).to_flat()
}

/// Builds the condition at timestep `t` from a trajectory and its feature
/// track. Robot sources expect features of dimension `agent_dim +
/// wrist_dim` (the two views concatenated); human sources expect
/// `agent_dim` and get a zero wrist block, with the retargeted per-step
/// state standing in as proprioception.
pub fn assemble_condition(
    traj: &Trajectory,
    features: &FeatureSequence,
    t: usize,
    dims: &ConditionDims,
) -> Result<Condition> {
    if features.len() != traj.len() {
        return Err(Error::DimensionMismatch(format!(
            "feature rows {} do not match trajectory length {}",
            features.len(),
            traj.len()
        )));
    }
    if t + 1 < dims.tau {
        return Err(Error::InsufficientHistory {
            t,
            min_t: dims.tau - 1,
        });
    }
    if t >= traj.len() {
        return Err(Error::OutOfRange(format!(
            "t={t} outside trajectory of length {}",
            traj.len()
        )));
    }
    let expected_dim = match traj.source() {
        Source::Robot => dims.agent_dim + dims.wrist_dim,
        Source::Human => dims.agent_dim,
    };
    if features.dim() != expected_dim {
        return Err(Error::DimensionMismatch(format!(
            "{:?} features must have dim {expected_dim}, got {}",
            traj.source(),
            features.dim()
        )));
    }
    let window = (t + 1 - dims.tau)..=t;
    let mut agent = Vec::with_capacity(dims.tau);
    let mut wrist = Vec::with_capacity(dims.tau);
    let mut proprio = Vec::with_capacity(dims.tau);
    for step in window {
        let row = features.row(step);
        match traj.source() {
            Source::Robot => {
                agent.push(row[..dims.agent_dim].to_vec());
                wrist.push(row[dims.agent_dim..].to_vec());
            }
            Source::Human => {
                agent.push(row.to_vec());
                wrist.push(vec![0.0; dims.wrist_dim]);
            }
        }
        proprio.push(frame_vec(traj, step));
    }
    Condition::new(agent, wrist, proprio)
}

/// The `k` future frames after `t` as flat action rows.
pub fn action_chunk(traj: &Trajectory, t: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidInput("chunk length k must be >= 1".into()));
    }
    if t + k >= traj.len() {
        return Err(Error::OutOfRange(format!(
            "chunk [{}..={}] exceeds trajectory length {}",
            t + 1,
            t + k,
            traj.len()
        )));
    }
    Ok((t + 1..=t + k).map(|s| frame_vec(traj, s)).collect())
}

/// Convex combination of two samples: `alpha * human + (1 - alpha) * robot`
/// elementwise over condition blocks and action chunks. `alpha = 1` and
/// `alpha = 0` return clones of the respective input so the endpoints are
/// bit-identical.
pub fn mix(human: &TrainingSample, robot: &TrainingSample, alpha: f64) -> Result<TrainingSample> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let hc = &human.condition;
    let rc = &robot.condition;
    if hc.tau() != rc.tau()
        || hc.agent_dim() != rc.agent_dim()
        || hc.wrist_dim() != rc.wrist_dim()
        || hc.proprio_dim() != rc.proprio_dim()
    {
        return Err(Error::DimensionMismatch(
            "condition dims differ between samples".into(),
        ));
    }
    if human.k() != robot.k() || human.action_dim() != robot.action_dim() {
        return Err(Error::DimensionMismatch(
            "action chunk dims differ between samples".into(),
        ));
    }
    if alpha == 1.0 {
        return Ok(TrainingSample {
            condition: hc.clone(),
            actions: human.actions.clone(),
            domain_alpha: 1.0,
        });
    }
    if alpha == 0.0 {
        return Ok(TrainingSample {
            condition: rc.clone(),
            actions: robot.actions.clone(),
            domain_alpha: 0.0,
        });
    }
    let lerp_block = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| {
                ra.iter()
                    .zip(rb)
                    .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
                    .collect()
            })
            .collect()
    };
    let condition = Condition::new(
        lerp_block(hc.agent(), rc.agent()),
        lerp_block(hc.wrist(), rc.wrist()),
        lerp_block(hc.proprio(), rc.proprio()),
    )?;
    let actions = lerp_block(&human.actions, &robot.actions);
    Ok(TrainingSample {
        condition,
        actions,
        domain_alpha: alpha,
    })
}

/// A demonstration with its feature track.
#[derive(Debug, Clone)]
pub struct DemoBundle {
    pub traj: Trajectory,
    pub features: FeatureSequence,
}

impl DemoBundle {
    pub fn new(traj: Trajectory, features: FeatureSequence) -> Result<DemoBundle> {
        if features.len() != traj.len() {
            return Err(Error::DimensionMismatch(format!(
                "demo {}: features rows {} vs trajectory length {}",
                traj.demo_id(),
                features.len(),
                traj.len()
            )));
        }
        Ok(DemoBundle { traj, features })
    }

    pub fn demo_id(&self) -> &str {
        self.traj.demo_id()
    }
}

/// How human timesteps get their robot partner.
#[derive(Debug, Clone, Copy)]
pub enum Pairing<'a> {
    /// Sample the partner uniformly from the mapping-table entry.
    Mapped(&'a MappingTable),
    /// Ablation mode: sample the partner uniformly over all robot anchors,
    /// ignoring the table.
    Random,
}

enum ResolvedPairing {
    PerAnchor(Vec<Vec<usize>>),
    AllRobot,
}

/// Deterministic stream of co-training batches. Every batch is exactly
/// half raw robot samples, half mixed samples (robot half first). All
/// randomness flows from one generator seeded with `(seed, epoch)`, so
/// identical arguments give byte-identical streams.
pub struct BatchStream {
    human_samples: Vec<TrainingSample>,
    robot_samples: Vec<TrainingSample>,
    pairing: ResolvedPairing,
    schedule: AlphaSchedule,
    epoch: usize,
    batch_size: usize,
    batches_total: usize,
    emitted: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    pub fn batches_total(&self) -> usize {
        self.batches_total
    }
}

impl Iterator for BatchStream {
    type Item = Vec<TrainingSample>;

    fn next(&mut self) -> Option<Vec<TrainingSample>> {
        if self.emitted >= self.batches_total {
            return None;
        }
        self.emitted += 1;
        let half = self.batch_size / 2;
        let mut batch = Vec::with_capacity(self.batch_size);
        for _ in 0..half {
            let idx = self.rng.random_range(0..self.robot_samples.len());
            batch.push(self.robot_samples[idx].clone());
        }
        for _ in 0..half {
            let h_idx = self.rng.random_range(0..self.human_samples.len());
            let r_idx = match &self.pairing {
                ResolvedPairing::PerAnchor(pairs) => {
                    let options = &pairs[h_idx];
                    options[self.rng.random_range(0..options.len())]
                }
                ResolvedPairing::AllRobot => self.rng.random_range(0..self.robot_samples.len()),
            };
            let alpha = alpha_with(&self.schedule, self.epoch, &mut self.rng);
            let mixed = mix(
                &self.human_samples[h_idx],
                &self.robot_samples[r_idx],
                alpha,
            )
            .expect("anchor dims validated at stream construction");
            batch.push(mixed);
        }
        Some(batch)
    }
}

/// Anchors with enough history for the condition and enough future for the
/// chunk.
fn valid_anchors(traj: &Trajectory, tau: usize, k: usize) -> Vec<usize> {
    (0..traj.len())
        .filter(|&t| t + 1 >= tau && t + k < traj.len())
        .collect()
}

/// Builds the per-epoch batch stream.
///
/// Candidate human anchors are the `(tau, k)`-valid timesteps of every
/// human demo; with [`Pairing::Mapped`] each one must appear in the table
/// (`UnmappedTimestep` otherwise), and mapped partners that lack history or
/// chunk room in their robot demo are dropped; anchors left with no usable
/// partner are excluded. One epoch covers the eligible human anchors once
/// in expectation: `ceil(#anchors / (batch_size/2))` batches of uniform
/// draws with replacement.
pub fn emit_batches(
    humans: &[DemoBundle],
    robots: &[DemoBundle],
    pairing: Pairing,
    dims: &ConditionDims,
    k: usize,
    schedule: &AlphaSchedule,
    batch_size: usize,
    epoch: usize,
    seed: u64,
) -> Result<BatchStream> {
    schedule.validate()?;
    if humans.is_empty() || robots.is_empty() {
        return Err(Error::InvalidInput(
            "need at least one human and one robot demo".into(),
        ));
    }
    if batch_size == 0 || batch_size % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "batch_size must be even and positive, got {batch_size}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("chunk length k must be >= 1".into()));
    }

    // robot anchors, flattened over demos in input order
    let mut robot_samples = Vec::new();
    let mut robot_anchor_index = std::collections::HashMap::new(); // (demo idx, t) -> flat idx
    for (d, bundle) in robots.iter().enumerate() {
        if bundle.traj.source() != Source::Robot {
            return Err(Error::InvalidInput(format!(
                "demo {} in the robot set has source {:?}",
                bundle.demo_id(),
                bundle.traj.source()
            )));
        }
        for t in valid_anchors(&bundle.traj, dims.tau, k) {
            let condition = assemble_condition(&bundle.traj, &bundle.features, t, dims)?;
            let actions = action_chunk(&bundle.traj, t, k)?;
            robot_anchor_index.insert((d, t), robot_samples.len());
            robot_samples.push(TrainingSample {
                condition,
                actions,
                domain_alpha: 0.0,
            });
        }
    }
    if robot_samples.is_empty() {
        return Err(Error::InvalidInput(
            "no robot timestep admits both the history window and the action chunk".into(),
        ));
    }
    let robot_by_id: std::collections::HashMap<&str, usize> = robots
        .iter()
        .enumerate()
        .map(|(d, b)| (b.demo_id(), d))
        .collect();

    // human anchors plus their usable partners
    let mut human_samples = Vec::new();
    let mut per_anchor_pairs: Vec<Vec<usize>> = Vec::new();
    for bundle in humans {
        if bundle.traj.source() != Source::Human {
            return Err(Error::InvalidInput(format!(
                "demo {} in the human set has source {:?}",
                bundle.demo_id(),
                bundle.traj.source()
            )));
        }
        for t in valid_anchors(&bundle.traj, dims.tau, k) {
            let pairs = match pairing {
                Pairing::Mapped(table) => {
                    let steps =
                        table
                            .get(bundle.demo_id(), t)
                            .ok_or_else(|| Error::UnmappedTimestep {
                                demo: bundle.demo_id().to_string(),
                                t,
                            })?;
                    let usable: Vec<usize> = steps
                        .iter()
                        .filter_map(|step| {
                            let d = robot_by_id.get(step.robot_demo.as_str())?;
                            robot_anchor_index.get(&(*d, step.t_prime)).copied()
                        })
                        .collect();
                    if usable.is_empty() {
                        continue; // mapped partners all sit too close to demo edges
                    }
                    usable
                }
                Pairing::Random => Vec::new(),
            };
            let condition = assemble_condition(&bundle.traj, &bundle.features, t, dims)?;
            let actions = action_chunk(&bundle.traj, t, k)?;
            human_samples.push(TrainingSample {
                condition,
                actions,
                domain_alpha: 1.0,
            });
            per_anchor_pairs.push(pairs);
        }
    }
    if human_samples.is_empty() {
        return Err(Error::InvalidInput(
            "no human timestep is usable for batching".into(),
        ));
    }

    // mixing requires identical layouts across the two halves
    let h0 = &human_samples[0];
    let r0 = &robot_samples[0];
    if h0.condition.proprio_dim() != r0.condition.proprio_dim()
        || h0.action_dim() != r0.action_dim()
    {
        return Err(Error::DimensionMismatch(format!(
            "human and robot state dims differ: proprio {} vs {}, action {} vs {}",
            h0.condition.proprio_dim(),
            r0.condition.proprio_dim(),
            h0.action_dim(),
            r0.action_dim()
        )));
    }

    let half = batch_size / 2;
    let batches_total = human_samples.len().div_ceil(half);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let pairing = match pairing {
        Pairing::Mapped(_) => ResolvedPairing::PerAnchor(per_anchor_pairs),
        Pairing::Random => ResolvedPairing::AllRobot,
    };
    Ok(BatchStream {
        human_samples,
        robot_samples,
        pairing,
        schedule: schedule.clone(),
        epoch,
        batch_size,
        batches_total,
        emitted: 0,
        rng,
    })
}

/// Dataset description stored next to the batch binary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub schedule: AlphaSchedule,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub records: usize,
    pub dims: ConditionDims,
    pub proprio_dim: usize,
    pub k: usize,
    pub action_dim: usize,
}

/// The manifest lives beside the data file with `.manifest.json` appended.
pub fn manifest_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn sample_to_bytes(sample: &TrainingSample, out: &mut Vec<u8>) {
    let flat = sample.condition.flattened();
    out.extend_from_slice(&(flat.len() as u32).to_le_bytes());
    for v in &flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(sample.k() as u32).to_le_bytes());
    out.extend_from_slice(&(sample.action_dim() as u32).to_le_bytes());
    for row in &sample.actions {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&sample.domain_alpha.to_le_bytes());
}

/// Writes `epochs` epochs of batches to `path` plus a manifest, returning
/// the manifest. Epoch `e` uses the stream seeded with `(seed, e)`.
#[allow(clippy::too_many_arguments)]
pub fn export_dataset(
    humans: &[DemoBundle],
    robots: &[DemoBundle],
    pairing: Pairing,
    dims: &ConditionDims,
    k: usize,
    schedule: &AlphaSchedule,
    batch_size: usize,
    epochs: usize,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(BATCH_MAGIC);
    bytes.extend_from_slice(&BATCH_VERSION.to_le_bytes());

    let mut records = 0usize;
    let mut batches_per_epoch = 0usize;
    let mut proprio_dim = 0usize;
    let mut action_dim = 0usize;
    for epoch in 0..epochs {
        let stream = emit_batches(
            humans, robots, pairing, dims, k, schedule, batch_size, epoch, seed,
        )?;
        batches_per_epoch = stream.batches_total();
        for batch in stream {
            for sample in &batch {
                proprio_dim = sample.condition.proprio_dim();
                action_dim = sample.action_dim();
                sample_to_bytes(sample, &mut bytes);
                records += 1;
            }
        }
    }
    if epochs == 0 {
        // dims still come from the inputs so the manifest is complete
        if let (Some(h), Some(_)) = (humans.first(), robots.first()) {
            proprio_dim = crate::traj::ActionFrame::flat_dim(h.traj.joint_dim());
            action_dim = proprio_dim;
        }
    }

    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let manifest = DatasetManifest {
        version: BATCH_VERSION,
        seed,
        schedule: schedule.clone(),
        batch_size,
        batches_per_epoch,
        epochs,
        records,
        dims: *dims,
        proprio_dim,
        k,
        action_dim,
    };
    let manifest_file = manifest_path(path);
    let mut f = fs::File::create(&manifest_file).map_err(|e| Error::io(&manifest_file, e))?;
    f.write_all(
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )
    .map_err(|e| Error::io(&manifest_file, e))?;
    Ok(manifest)
}

fn read_exact_f64(cursor: &mut &[u8]) -> Result<f64> {
    let mut buf = [0u8; 8];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("batch file truncated".into()))?;
    Ok(f64::from_le_bytes(buf))
}

fn read_exact_u32(cursor: &mut &[u8]) -> Result<u32> {
    let mut buf = [0u8; 4];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("batch file truncated".into()))?;
    Ok(u32::from_le_bytes(buf))
}

/// Reads a dataset written by [`export_dataset`].
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<TrainingSample>)> {
    let path = path.as_ref();
    let manifest_file = manifest_path(path);
    let manifest: DatasetManifest = serde_json::from_str(
        &fs::read_to_string(&manifest_file).map_err(|e| Error::io(&manifest_file, e))?,
    )
    .map_err(|e| Error::Format(format!("manifest: {e}")))?;

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = bytes.as_slice();
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("batch file truncated before magic".into()))?;
    if &magic != BATCH_MAGIC {
        return Err(Error::Format(format!(
            "bad batch magic {magic:?}, expected {BATCH_MAGIC:?}"
        )));
    }
    let version = read_exact_u32(&mut cursor)?;
    if version != BATCH_VERSION {
        return Err(Error::Format(format!("unsupported batch version {version}")));
    }
    let mut samples = Vec::with_capacity(manifest.records);
    for _ in 0..manifest.records {
        let condition_len = read_exact_u32(&mut cursor)? as usize;
        let mut flat = Vec::with_capacity(condition_len);
        for _ in 0..condition_len {
            flat.push(read_exact_f64(&mut cursor)?);
        }
        let k = read_exact_u32(&mut cursor)? as usize;
        let action_dim = read_exact_u32(&mut cursor)? as usize;
        let mut actions = Vec::with_capacity(k);
        for _ in 0..k {
            let mut row = Vec::with_capacity(action_dim);
            for _ in 0..action_dim {
                row.push(read_exact_f64(&mut cursor)?);
            }
            actions.push(row);
        }
        let domain_alpha = read_exact_f64(&mut cursor)?;
        let condition = Condition::from_flattened(&flat, &manifest.dims, manifest.proprio_dim)?;
        samples.push(TrainingSample {
            condition,
            actions,
            domain_alpha,
        });
    }
    if !cursor.is_empty() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the declared records",
            cursor.len()
        )));
    }
    Ok((manifest, samples))
}

/// Serializes a full stream to the record byte layout (no header), used to
/// compare streams bytewise.
pub fn stream_to_bytes(stream: BatchStream) -> Vec<u8> {
    let mut out = Vec::new();
    for batch in stream {
        for sample in &batch {
            sample_to_bytes(sample, &mut out);
        }
    }
    out
}
