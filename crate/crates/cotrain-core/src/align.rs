//! Full-sequence dynamic time warping and the human-to-robot mapping table.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{
    action_cost_matrix, visual_cost_matrix, ActionDistanceWeights, CostMatrix,
};
use crate::error::{Error, Result};
use crate::traj::{FeatureSequence, Trajectory};

/// A monotone alignment path through a cost matrix.
///
/// For a full-sequence warp the path runs from `(0, 0)` to
/// `(rows-1, cols-1)` with steps in `{(1,0), (0,1), (1,1)}`; `total_cost`
/// is the sum of matrix entries along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl WarpPath {
    /// Checks the full-sequence path invariants against its cost matrix.
    pub fn validate(&self, cost: &CostMatrix) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidInput("warp path is empty".into()));
        }
        if self.pairs[0] != (0, 0) {
            return Err(Error::InvalidInput("warp path must start at (0,0)".into()));
        }
        let last = *self.pairs.last().unwrap();
        if last != (cost.rows() - 1, cost.cols() - 1) {
            return Err(Error::InvalidInput(
                "warp path must end at the final cell".into(),
            ));
        }
        for w in self.pairs.windows(2) {
            let (di, dj) = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return Err(Error::InvalidInput(format!(
                    "illegal step {:?} -> {:?}",
                    w[0], w[1]
                )));
            }
        }
        let summed: f64 = self.pairs.iter().map(|&(i, j)| cost.get(i, j)).sum();
        if (summed - self.total_cost).abs() > 1e-9 * (1.0 + summed.abs()) {
            return Err(Error::InvalidInput(
                "total_cost does not match path sum".into(),
            ));
        }
        Ok(())
    }
}

/// Full-sequence DTW over a precomputed cost matrix.
///
/// Backtracking tie-break is fixed: diagonal, then vertical (advance row),
/// then horizontal.
pub fn dtw(cost: &CostMatrix) -> Result<WarpPath> {
    dtw_banded(cost, None)
}

/// [`dtw`] restricted to the Sakoe-Chiba band `|i - j| <= w`, where `w` is
/// widened to at least `|rows - cols|` so an alignment always exists.
pub fn dtw_banded(cost: &CostMatrix, band: Option<usize>) -> Result<WarpPath> {
    if !cost.is_finite() {
        return Err(Error::InvalidInput(
            "cost matrix entries must be finite".into(),
        ));
    }
    let (rows, cols) = (cost.rows(), cost.cols());
    let width = band.map(|b| b.max(rows.abs_diff(cols)));
    let inside = |i: usize, j: usize| -> bool {
        width.is_none_or(|w| i.abs_diff(j) <= w)
    };

    let mut acc = vec![f64::INFINITY; rows * cols];
    let idx = |i: usize, j: usize| i * cols + j;
    for i in 0..rows {
        for j in 0..cols {
            if !inside(i, j) {
                continue;
            }
            let d = cost.get(i, j);
            let best_prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[idx(0, j - 1)],
                (_, 0) => acc[idx(i - 1, 0)],
                _ => acc[idx(i - 1, j - 1)]
                    .min(acc[idx(i - 1, j)])
                    .min(acc[idx(i, j - 1)]),
            };
            acc[idx(i, j)] = d + best_prev;
        }
    }

    let total_cost = acc[idx(rows - 1, cols - 1)];
    let mut pairs = Vec::with_capacity(rows + cols);
    let (mut i, mut j) = (rows - 1, cols - 1);
    pairs.push((i, j));
    while (i, j) != (0, 0) {
        if i == 0 {
            j -= 1;
        } else if j == 0 {
            i -= 1;
        } else {
            let diag = acc[idx(i - 1, j - 1)];
            let vert = acc[idx(i - 1, j)];
            let horiz = acc[idx(i, j - 1)];
            let best = diag.min(vert).min(horiz);
            if diag == best {
                i -= 1;
                j -= 1;
            } else if vert == best {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(WarpPath { pairs, total_cost })
}

/// One robot timestep matched to a human timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedStep {
    pub robot_demo: String,
    pub t_prime: usize,
}

/// The relation from human `(demo, t)` to the robot timesteps DTW paired
/// with it across demonstrations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MappingTable {
    entries: BTreeMap<(String, usize), Vec<MappedStep>>,
}

#[derive(Serialize, Deserialize)]
struct MappingRecord {
    human_demo: String,
    t: usize,
    pairs: Vec<MappedStep>,
}

impl MappingTable {
    pub fn new() -> MappingTable {
        MappingTable::default()
    }

    pub fn insert(&mut self, human_demo: &str, t: usize, step: MappedStep) {
        self.entries
            .entry((human_demo.to_string(), t))
            .or_default()
            .push(step);
    }

    pub fn get(&self, human_demo: &str, t: usize) -> Option<&[MappedStep]> {
        self.entries
            .get(&(human_demo.to_string(), t))
            .map(|v| v.as_slice())
    }

    /// Number of human `(demo, t)` keys.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of `(t, t')` pairs across all keys.
    pub fn pair_count(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    pub fn covers_demo(&self, human_demo: &str) -> bool {
        self.entries.keys().any(|(demo, _)| demo == human_demo)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, usize), &Vec<MappedStep>)> {
        self.entries.iter()
    }

    /// JSON-lines encoding, one record per human timestep, ordered by
    /// `(demo, t)`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ((demo, t), pairs) in &self.entries {
            let record = MappingRecord {
                human_demo: demo.clone(),
                t: *t,
                pairs: pairs.clone(),
            };
            out.push_str(&serde_json::to_string(&record).expect("mapping record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<MappingTable> {
        let mut table = MappingTable::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: MappingRecord = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("mapping line {}: {e}", lineno + 1)))?;
            for step in record.pairs {
                table.insert(&record.human_demo, record.t, step);
            }
        }
        Ok(table)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<MappingTable> {
        let path = path.as_ref();
        let reader = BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?);
        let mut text = String::new();
        for line in reader.lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        MappingTable::from_jsonl(&text)
    }
}

/// Robot-demo selection policy when building the mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopK {
    /// Pair every human demo with every robot demo.
    All,
    /// Keep only the `k` robot demos with the lowest total DTW cost per
    /// human demo.
    K(usize),
}

fn build_mapping_impl<T: Sync, F>(
    humans: &[(&str, &[T])],
    robots: &[(&str, &[T])],
    metric: F,
    top_k: TopK,
    band: Option<usize>,
) -> Result<MappingTable>
where
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    if humans.is_empty() || robots.is_empty() {
        return Err(Error::InvalidInput(
            "mapping needs non-empty human and robot demo sets".into(),
        ));
    }
    if let TopK::K(0) = top_k {
        return Err(Error::InvalidInput("top_k must be >= 1".into()));
    }
    for set in [humans, robots] {
        let mut ids: Vec<&str> = set.iter().map(|(id, _)| *id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != set.len() {
            return Err(Error::InvalidInput("demo ids must be unique".into()));
        }
    }

    let pair_indices: Vec<(usize, usize)> = (0..humans.len())
        .flat_map(|h| (0..robots.len()).map(move |r| (h, r)))
        .collect();
    let paths: Vec<(usize, usize, WarpPath)> = pair_indices
        .par_iter()
        .map(|&(h, r)| {
            let cost = crate::distance::cost_matrix(humans[h].1, robots[r].1, &metric)?;
            let path = dtw_banded(&cost, band)?;
            Ok((h, r, path))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = MappingTable::new();
    for h in 0..humans.len() {
        let mut candidates: Vec<&(usize, usize, WarpPath)> =
            paths.iter().filter(|(ph, _, _)| *ph == h).collect();
        if let TopK::K(k) = top_k {
            candidates.sort_by(|a, b| {
                a.2.total_cost
                    .partial_cmp(&b.2.total_cost)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.1.cmp(&b.1))
            });
            candidates.truncate(k);
            // deterministic table layout: robot input order within the kept set
            candidates.sort_by_key(|c| c.1);
        }
        for (_, r, path) in candidates {
            let robot_id = robots[*r].0;
            for &(t, t_prime) in &path.pairs {
                table.insert(
                    humans[h].0,
                    t,
                    MappedStep {
                        robot_demo: robot_id.to_string(),
                        t_prime,
                    },
                );
            }
        }
    }
    Ok(table)
}

/// Builds the mapping table from action distance over trajectories.
/// Robot trajectories are expected to be gamma-subsampled already so both
/// embodiments move at a comparable pace.
pub fn build_mapping_action(
    humans: &[Trajectory],
    robots: &[Trajectory],
    weights: &ActionDistanceWeights,
    top_k: TopK,
    band: Option<usize>,
) -> Result<MappingTable> {
    let h: Vec<(&str, &[crate::traj::ActionFrame])> = humans
        .iter()
        .map(|t| (t.demo_id(), t.frames()))
        .collect();
    let r: Vec<(&str, &[crate::traj::ActionFrame])> = robots
        .iter()
        .map(|t| (t.demo_id(), t.frames()))
        .collect();
    build_mapping_impl(&h, &r, |a, b| crate::distance::d_act(a, b, weights), top_k, band)
}

/// Builds the mapping table from visual feature distance.
pub fn build_mapping_visual(
    humans: &[FeatureSequence],
    robots: &[FeatureSequence],
    top_k: TopK,
    band: Option<usize>,
) -> Result<MappingTable> {
    let h: Vec<(&str, &[Vec<f64>])> = humans.iter().map(|f| (f.demo_id(), f.rows())).collect();
    let r: Vec<(&str, &[Vec<f64>])> = robots.iter().map(|f| (f.demo_id(), f.rows())).collect();
    build_mapping_impl(
        &h,
        &r,
        |a, b| crate::distance::d_vis(a.as_slice(), b.as_slice()),
        top_k,
        band,
    )
}

/// Convenience used by metrics: DTW alignment of two trajectories under the
/// action distance.
pub fn dtw_action(
    a: &Trajectory,
    b: &Trajectory,
    weights: &ActionDistanceWeights,
) -> Result<WarpPath> {
    dtw(&action_cost_matrix(a, b, weights)?)
}

/// Convenience: DTW alignment of two feature sequences.
pub fn dtw_visual(a: &FeatureSequence, b: &FeatureSequence) -> Result<WarpPath> {
    dtw(&visual_cost_matrix(a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::Quat;
    use crate::traj::{ActionFrame, Source};

    fn matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CostMatrix {
        let mut data = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix::from_rows(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_diagonal_gives_diagonal_path() {
        let m = matrix(4, 4, |i, j| if i == j { 0.0 } else { 5.0 });
        let path = dtw(&m).unwrap();
        assert_eq!(path.total_cost, 0.0);
        assert_eq!(path.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        path.validate(&m).unwrap();
    }

    #[test]
    fn single_row_visits_every_column() {
        let m = matrix(1, 5, |_, j| j as f64 + 1.0);
        let path = dtw(&m).unwrap();
        assert_eq!(path.pairs.len(), 5);
        assert_eq!(path.total_cost, 1.0 + 2.0 + 3.0 + 4.0 + 5.0);
    }

    #[test]
    fn single_cell() {
        let m = matrix(1, 1, |_, _| 3.5);
        let path = dtw(&m).unwrap();
        assert_eq!(path.pairs, vec![(0, 0)]);
        assert_eq!(path.total_cost, 3.5);
    }

    #[test]
    fn rejects_non_finite_costs() {
        let m = matrix(2, 2, |i, j| if i == 1 && j == 1 { f64::NAN } else { 1.0 });
        assert!(dtw(&m).is_err());
    }

    #[test]
    fn transpose_has_equal_cost() {
        for seed in 0..20u64 {
            let m = matrix(5, 7, |i, j| {
                ((seed as f64 + 1.0) * (i as f64 * 7.91 + j as f64 * 3.17)).sin().abs()
            });
            let a = dtw(&m).unwrap().total_cost;
            let b = dtw(&m.transpose()).unwrap().total_cost;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cost_never_exceeds_pure_diagonal() {
        let m = matrix(6, 6, |i, j| ((i * 31 + j * 17) % 13) as f64 + 0.5);
        let best = dtw(&m).unwrap().total_cost;
        let diagonal: f64 = (0..6).map(|i| m.get(i, i)).sum();
        assert!(best <= diagonal);
    }

    #[test]
    fn banded_matches_unbanded_when_band_is_wide() {
        let m = matrix(6, 9, |i, j| ((i as f64 - j as f64).abs() + 0.1) * 1.3);
        let full = dtw(&m).unwrap();
        let banded = dtw_banded(&m, Some(10)).unwrap();
        assert_eq!(full.pairs, banded.pairs);
        assert_eq!(full.total_cost, banded.total_cost);
    }

    #[test]
    fn banded_path_stays_feasible_for_narrow_band() {
        let m = matrix(8, 4, |i, j| (i + j) as f64);
        let path = dtw_banded(&m, Some(0)).unwrap();
        path.validate(&m).unwrap();
    }

    fn traj_1d(id: &str, values: &[f64]) -> Trajectory {
        let frames = values
            .iter()
            .map(|&v| ActionFrame::new([v, 0.0, 0.0], Quat::IDENTITY, vec![]).unwrap())
            .collect();
        Trajectory::new(frames, 0.1, Source::Human, id).unwrap()
    }

    #[test]
    fn identical_demo_maps_one_to_one() {
        let h = traj_1d("h0", &[0.0, 1.0, 2.0, 3.0]);
        let r = traj_1d("r0", &[0.0, 1.0, 2.0, 3.0]);
        let table = build_mapping_action(
            &[h],
            &[r],
            &ActionDistanceWeights::default(),
            TopK::All,
            None,
        )
        .unwrap();
        for t in 0..4 {
            let pairs = table.get("h0", t).unwrap();
            assert_eq!(pairs.len(), 1);
            assert_eq!(pairs[0].t_prime, t);
            assert_eq!(pairs[0].robot_demo, "r0");
        }
    }

    #[test]
    fn top_one_keeps_the_exact_copy() {
        let h = traj_1d("h0", &[0.0, 1.0, 2.0]);
        let exact = traj_1d("good", &[0.0, 1.0, 2.0]);
        let far = traj_1d("bad", &[9.0, 9.0, 9.0]);
        let table = build_mapping_action(
            &[h],
            &[far, exact],
            &ActionDistanceWeights::default(),
            TopK::K(1),
            None,
        )
        .unwrap();
        for t in 0..3 {
            let pairs = table.get("h0", t).unwrap();
            assert!(pairs.iter().all(|p| p.robot_demo == "good"));
        }
    }

    #[test]
    fn all_pairs_table_size_is_sum_of_path_lengths() {
        let humans = vec![
            traj_1d("h0", &[0.0, 0.5, 1.5]),
            traj_1d("h1", &[2.0, 2.2]),
            traj_1d("h2", &[0.1, 0.9, 1.7, 2.4]),
        ];
        let robots = vec![
            traj_1d("r0", &[0.0, 1.0, 2.0]),
            traj_1d("r1", &[1.0, 1.4, 0.2]),
        ];
        let table = build_mapping_action(
            &humans,
            &robots,
            &ActionDistanceWeights::default(),
            TopK::All,
            None,
        )
        .unwrap();
        let mut expected = 0usize;
        for h in &humans {
            for r in &robots {
                expected += dtw_action(h, r, &ActionDistanceWeights::default())
                    .unwrap()
                    .pairs
                    .len();
            }
        }
        assert_eq!(table.pair_count(), expected);
        // every human timestep of every demo is covered
        for h in &humans {
            for t in 0..h.len() {
                assert!(table.get(h.demo_id(), t).is_some());
            }
        }
    }

    #[test]
    fn empty_demo_sets_error() {
        let r = traj_1d("r0", &[0.0]);
        assert!(build_mapping_action(
            &[],
            &[r],
            &ActionDistanceWeights::default(),
            TopK::All,
            None
        )
        .is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = traj_1d("same", &[0.0]);
        let b = traj_1d("same", &[1.0]);
        let r = traj_1d("r0", &[0.0]);
        assert!(build_mapping_action(
            &[a, b],
            &[r],
            &ActionDistanceWeights::default(),
            TopK::All,
            None
        )
        .is_err());
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let h = traj_1d("h0", &[0.0, 1.0, 2.5]);
        let r0 = traj_1d("r0", &[0.0, 1.2, 2.6]);
        let r1 = traj_1d("r1", &[0.3, 0.8]);
        let table = build_mapping_action(
            &[h],
            &[r0, r1],
            &ActionDistanceWeights::default(),
            TopK::All,
            None,
        )
        .unwrap();
        let text = table.to_jsonl();
        let back = MappingTable::from_jsonl(&text).unwrap();
        assert_eq!(table, back);
        assert_eq!(text, back.to_jsonl());
    }
}
