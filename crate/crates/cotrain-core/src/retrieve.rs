//! Subsequence DTW and greedy multi-segment retrieval of task-relevant
//! spans from long unsegmented demonstrations, plus interval-IoU scoring.

use serde::{Deserialize, Serialize};

use crate::align::WarpPath;
use crate::distance::{ActionDistanceWeights, CostMatrix};
use crate::error::{Error, Result};
use crate::traj::{FeatureSequence, Trajectory};

/// A retrieved match: human span `[h_start, h_end]` aligned to robot span
/// `[r_start, r_end]` (all inclusive) at path-length-normalized cost `cost`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub h_start: usize,
    pub h_end: usize,
    pub r_start: usize,
    pub r_end: usize,
    pub cost: f64,
}

impl Segment {
    pub fn human_len(&self) -> usize {
        self.h_end - self.h_start + 1
    }
}

/// Windowing parameters of the greedy scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmsConfig {
    pub l_min: usize,
    pub l_max: usize,
    pub epsilon: f64,
}

impl GmsConfig {
    pub fn new(l_min: usize, l_max: usize, epsilon: f64) -> Result<GmsConfig> {
        if l_min == 0 || l_min > l_max {
            return Err(Error::InvalidInput(format!(
                "window bounds must satisfy 1 <= l_min <= l_max, got {l_min}..{l_max}"
            )));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and positive, got {epsilon}"
            )));
        }
        Ok(GmsConfig {
            l_min,
            l_max,
            epsilon,
        })
    }
}

/// Result of matching a full query against any contiguous span of the
/// candidate sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SubseqMatch {
    /// Cumulative path cost divided by path length, so values are
    /// comparable across window lengths.
    pub cost: f64,
    pub j_start: usize,
    pub j_end: usize,
    /// Path pairs `(query_row, candidate_col)` with absolute candidate
    /// indices; `total_cost` holds the raw (unnormalized) cumulative cost.
    pub path: WarpPath,
}

const PRED_START: u8 = 0;
const PRED_DIAG: u8 = 1;
const PRED_VERT: u8 = 2;
const PRED_HORIZ: u8 = 3;

/// Open-ended DP table. Row 0 starts fresh at every column (free start);
/// the first column only accumulates vertically; interior cells take the
/// cheapest of diagonal, vertical, horizontal with that preference order on
/// ties. Rows can be appended incrementally, which the greedy scan exploits
/// to share work across window lengths at a fixed anchor.
struct SdtwTable {
    cols: usize,
    rows: usize,
    cum: Vec<f64>,
    pathlen: Vec<u32>,
    preds: Vec<Vec<u8>>,
}

impl SdtwTable {
    fn new(cols: usize) -> SdtwTable {
        SdtwTable {
            cols,
            rows: 0,
            cum: Vec::new(),
            pathlen: Vec::new(),
            preds: Vec::new(),
        }
    }

    fn push_row(&mut self, costs: &[f64]) {
        debug_assert_eq!(costs.len(), self.cols);
        let mut preds = vec![PRED_START; self.cols];
        if self.rows == 0 {
            self.cum = costs.to_vec();
            self.pathlen = vec![1; self.cols];
        } else {
            let mut cum = vec![0.0; self.cols];
            let mut pathlen = vec![0u32; self.cols];
            cum[0] = self.cum[0] + costs[0];
            pathlen[0] = self.pathlen[0] + 1;
            preds[0] = PRED_VERT;
            for j in 1..self.cols {
                let diag = self.cum[j - 1];
                let vert = self.cum[j];
                let horiz = cum[j - 1];
                let best = diag.min(vert).min(horiz);
                let (pred, plen) = if diag == best {
                    (PRED_DIAG, self.pathlen[j - 1])
                } else if vert == best {
                    (PRED_VERT, self.pathlen[j])
                } else {
                    (PRED_HORIZ, pathlen[j - 1])
                };
                cum[j] = costs[j] + best;
                pathlen[j] = plen + 1;
                preds[j] = pred;
            }
            self.cum = cum;
            self.pathlen = pathlen;
        }
        self.preds.push(preds);
        self.rows += 1;
    }

    /// `(j_end, raw_cost, path_len)` minimizing raw cumulative cost over the
    /// current final row; the smallest column wins ties.
    fn best_end(&self) -> (usize, f64, u32) {
        let mut best_j = 0;
        for j in 1..self.cols {
            if self.cum[j] < self.cum[best_j] {
                best_j = j;
            }
        }
        (best_j, self.cum[best_j], self.pathlen[best_j])
    }

    /// Path pairs from the start row down to `(row, j_end)`.
    fn backtrack(&self, row: usize, j_end: usize) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let (mut i, mut j) = (row, j_end);
        loop {
            pairs.push((i, j));
            match self.preds[i][j] {
                PRED_START => break,
                PRED_DIAG => {
                    i -= 1;
                    j -= 1;
                }
                PRED_VERT => i -= 1,
                PRED_HORIZ => j -= 1,
                _ => unreachable!(),
            }
        }
        pairs.reverse();
        pairs
    }
}

/// Matches the full query (matrix rows) against any contiguous span of the
/// candidate (matrix columns). The end column minimizes raw cumulative
/// cost; the start is recovered by backtracking; the reported cost is
/// normalized by path length.
pub fn sdtw(query_cost: &CostMatrix) -> Result<SubseqMatch> {
    if !query_cost.is_finite() {
        return Err(Error::InvalidInput(
            "cost matrix entries must be finite".into(),
        ));
    }
    let mut table = SdtwTable::new(query_cost.cols());
    for i in 0..query_cost.rows() {
        table.push_row(query_cost.row(i));
    }
    let (j_end, raw, plen) = table.best_end();
    let pairs = table.backtrack(query_cost.rows() - 1, j_end);
    let j_start = pairs[0].1;
    Ok(SubseqMatch {
        cost: raw / plen as f64,
        j_start,
        j_end,
        path: WarpPath {
            pairs,
            total_cost: raw,
        },
    })
}

/// Greedy multi-segment retrieval: scans the human sequence left to right,
/// evaluates every window length in `[l_min, l_max]` at the current anchor
/// via subsequence DTW, and keeps the best window by normalized cost
/// (equal-cost ties go to the longest window so exact embeddings are
/// recovered whole). Anchors whose best window beats `epsilon` emit a
/// segment and the scan resumes after it; otherwise the anchor advances by
/// one.
pub fn gms_sdtw<T, F>(human: &[T], robot: &[T], metric: F, cfg: &GmsConfig) -> Result<Vec<Segment>>
where
    F: Fn(&T, &T) -> Result<f64>,
{
    if human.len() < cfg.l_min {
        return Err(Error::InvalidInput(format!(
            "human sequence length {} shorter than l_min {}",
            human.len(),
            cfg.l_min
        )));
    }
    if robot.is_empty() {
        return Err(Error::InvalidInput("robot sequence is empty".into()));
    }
    let cost = crate::distance::cost_matrix(human, robot, metric)?;
    if !cost.is_finite() {
        return Err(Error::InvalidInput(
            "cost matrix entries must be finite".into(),
        ));
    }
    let t_h = human.len();
    let mut segments = Vec::new();
    let mut t = 0usize;
    while t + cfg.l_min <= t_h {
        let l_cap = cfg.l_max.min(t_h - t);
        let mut table = SdtwTable::new(cost.cols());
        let mut best: Option<(f64, usize, usize)> = None; // (cost, window len, j_end)
        for l in 1..=l_cap {
            table.push_row(cost.row(t + l - 1));
            if l < cfg.l_min {
                continue;
            }
            let (j_end, raw, plen) = table.best_end();
            let d = raw / plen as f64;
            if best.as_ref().is_none_or(|(b, _, _)| d <= *b) {
                best = Some((d, l, j_end));
            }
        }
        let (d_best, l_star, j_end) = best.expect("window range is non-empty");
        if d_best < cfg.epsilon {
            let pairs = table.backtrack(l_star - 1, j_end);
            segments.push(Segment {
                h_start: t,
                h_end: t + l_star - 1,
                r_start: pairs[0].1,
                r_end: j_end,
                cost: d_best,
            });
            t += l_star;
        } else {
            t += 1;
        }
    }
    Ok(segments)
}

/// [`gms_sdtw`] under the action distance.
pub fn gms_sdtw_action(
    human: &Trajectory,
    robot: &Trajectory,
    weights: &ActionDistanceWeights,
    cfg: &GmsConfig,
) -> Result<Vec<Segment>> {
    gms_sdtw(
        human.frames(),
        robot.frames(),
        |a, b| crate::distance::d_act(a, b, weights),
        cfg,
    )
}

/// [`gms_sdtw`] under the visual feature distance.
pub fn gms_sdtw_visual(
    human: &FeatureSequence,
    robot: &FeatureSequence,
    cfg: &GmsConfig,
) -> Result<Vec<Segment>> {
    gms_sdtw(
        human.rows(),
        robot.rows(),
        |a, b| crate::distance::d_vis(a, b),
        cfg,
    )
}

/// Retrieval scores: mean IoU over ground-truth spans and the fraction of
/// truths matched with IoU at least 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalScore {
    pub miou: f64,
    pub acc_at_half: f64,
}

fn interval_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter_lo = a.0.max(b.0);
    let inter_hi = a.1.min(b.1);
    if inter_hi < inter_lo {
        return 0.0;
    }
    let inter = (inter_hi - inter_lo + 1) as f64;
    let union = (a.1 - a.0 + 1 + b.1 - b.0 + 1) as f64 - inter;
    inter / union
}

/// Greedy one-to-one matching of predictions to truths by descending IoU;
/// unmatched truths contribute zero.
pub fn eval_retrieval(predicted: &[Segment], truth: &[(usize, usize)]) -> Result<RetrievalScore> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("ground truth set is empty".into()));
    }
    if truth.iter().any(|(s, e)| e < s) {
        return Err(Error::InvalidInput(
            "ground-truth interval has end < start".into(),
        ));
    }
    if predicted
        .iter()
        .any(|s| s.h_end < s.h_start || s.r_end < s.r_start)
    {
        return Err(Error::InvalidInput("segment has end < start".into()));
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, tr) in truth.iter().enumerate() {
        for (pi, p) in predicted.iter().enumerate() {
            let iou = interval_iou((p.h_start, p.h_end), *tr);
            if iou > 0.0 {
                candidates.push((iou, ti, pi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut truth_used = vec![false; truth.len()];
    let mut pred_used = vec![false; predicted.len()];
    let mut matched = Vec::new();
    for (iou, ti, pi) in candidates {
        if !truth_used[ti] && !pred_used[pi] {
            truth_used[ti] = true;
            pred_used[pi] = true;
            matched.push(iou);
        }
    }
    let miou = matched.iter().sum::<f64>() / truth.len() as f64;
    let acc = matched.iter().filter(|&&iou| iou >= 0.5).count() as f64 / truth.len() as f64;
    Ok(RetrievalScore {
        miou,
        acc_at_half: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::cost_matrix;

    fn abs_metric(a: &f64, b: &f64) -> Result<f64> {
        Ok((a - b).abs())
    }

    #[test]
    fn exact_embedding_is_found_at_zero_cost() {
        // query equals robot[3..=7] of an otherwise distant sequence
        let robot: Vec<f64> = vec![9.0, 9.0, 9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 9.0, 9.0];
        let query: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        // cost rows = query, cols = robot
        let m = cost_matrix(&query, &robot, abs_metric).unwrap();
        let hit = sdtw(&m).unwrap();
        assert_eq!(hit.cost, 0.0);
        assert_eq!(hit.j_start, 3);
        assert_eq!(hit.j_end, 7);
    }

    #[test]
    fn single_row_query_picks_argmin_column() {
        let robot: Vec<f64> = vec![4.0, 2.0, 7.0, 2.0];
        let query = vec![2.0];
        let m = cost_matrix(&query, &robot, abs_metric).unwrap();
        let hit = sdtw(&m).unwrap();
        assert_eq!(hit.j_start, 1);
        assert_eq!(hit.j_end, 1); // first of the tied minima
        assert_eq!(hit.cost, 0.0);
    }

    #[test]
    fn sdtw_path_is_monotone_and_costed() {
        let robot: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let query: Vec<f64> = (0..4).map(|i| (i as f64 * 0.7 + 1.0).sin()).collect();
        let m = cost_matrix(&query, &robot, abs_metric).unwrap();
        let hit = sdtw(&m).unwrap();
        assert_eq!(hit.path.pairs.first().unwrap().0, 0);
        assert_eq!(hit.path.pairs.last().unwrap().0, 3);
        for w in hit.path.pairs.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 as i64 - w[0].1 as i64);
            assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
        let sum: f64 = hit.path.pairs.iter().map(|&(i, j)| m.get(i, j)).sum();
        assert!((sum - hit.path.total_cost).abs() < 1e-12);
        assert!((hit.cost - hit.path.total_cost / hit.path.pairs.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn open_ended_raw_cost_never_exceeds_full_dtw() {
        for seed in 0..50u64 {
            let robot: Vec<f64> = (0..10)
                .map(|i| ((seed as f64 + 1.3) * (i as f64 * 1.17 + 0.31)).sin())
                .collect();
            let query: Vec<f64> = (0..4)
                .map(|i| ((seed as f64 + 0.7) * (i as f64 * 0.83 + 0.11)).cos())
                .collect();
            let m = cost_matrix(&query, &robot, abs_metric).unwrap();
            let open = sdtw(&m).unwrap();
            let full = crate::align::dtw(&m).unwrap();
            assert!(open.path.total_cost <= full.total_cost + 1e-12);
        }
    }

    fn planted_sequences() -> (Vec<f64>, Vec<f64>, Vec<(usize, usize)>) {
        let query: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let mut human = vec![50.0; 40];
        let offsets = [5usize, 20];
        for &o in &offsets {
            for (i, q) in query.iter().enumerate() {
                human[o + i] = *q;
            }
        }
        let truth = offsets.iter().map(|&o| (o, o + query.len() - 1)).collect();
        (human, query, truth)
    }

    #[test]
    fn gms_recovers_exact_copies_whole() {
        let (human, query, truth) = planted_sequences();
        let cfg = GmsConfig::new(6, 10, 0.5).unwrap();
        let segments = gms_sdtw(&human, &query, abs_metric, &cfg).unwrap();
        assert_eq!(segments.len(), 2);
        for (seg, tr) in segments.iter().zip(&truth) {
            assert_eq!((seg.h_start, seg.h_end), *tr);
            assert_eq!(seg.cost, 0.0);
            assert_eq!(seg.r_start, 0);
            assert_eq!(seg.r_end, query.len() - 1);
        }
        let score = eval_retrieval(&segments, &truth).unwrap();
        assert_eq!(score.miou, 1.0);
        assert_eq!(score.acc_at_half, 1.0);
    }

    #[test]
    fn epsilon_below_everything_yields_no_segments() {
        let (human, query, _) = planted_sequences();
        // shift the query so nothing matches at zero cost
        let shifted: Vec<f64> = query.iter().map(|v| v + 0.05).collect();
        let cfg = GmsConfig::new(6, 10, 1e-9).unwrap();
        let segments = gms_sdtw(&human, &shifted, abs_metric, &cfg).unwrap();
        assert!(segments.is_empty());
    }

    #[test]
    fn gms_segments_are_disjoint_sorted_and_below_epsilon() {
        let (human, query, _) = planted_sequences();
        let cfg = GmsConfig::new(4, 12, 0.8).unwrap();
        let segments = gms_sdtw(&human, &query, abs_metric, &cfg).unwrap();
        for pair in segments.windows(2) {
            assert!(pair[0].h_end < pair[1].h_start);
        }
        for seg in &segments {
            assert!(seg.cost < 0.8);
            assert!(seg.h_start <= seg.h_end);
            assert!(seg.r_start <= seg.r_end);
        }
    }

    #[test]
    fn gms_rejects_short_human_sequence() {
        let cfg = GmsConfig::new(6, 10, 0.5).unwrap();
        let human = vec![0.0; 4];
        let robot = vec![0.0; 8];
        assert!(gms_sdtw(&human, &robot, abs_metric, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GmsConfig::new(0, 5, 0.1).is_err());
        assert!(GmsConfig::new(6, 5, 0.1).is_err());
        assert!(GmsConfig::new(2, 5, 0.0).is_err());
        assert!(GmsConfig::new(2, 5, -1.0).is_err());
    }

    fn seg(h: (usize, usize)) -> Segment {
        Segment {
            h_start: h.0,
            h_end: h.1,
            r_start: 0,
            r_end: 1,
            cost: 0.0,
        }
    }

    #[test]
    fn eval_perfect_prediction() {
        let truth = vec![(0, 9), (20, 29)];
        let predicted: Vec<Segment> = truth.iter().map(|&t| seg(t)).collect();
        let score = eval_retrieval(&predicted, &truth).unwrap();
        assert_eq!(score.miou, 1.0);
        assert_eq!(score.acc_at_half, 1.0);
    }

    #[test]
    fn eval_partial_overlap() {
        // [0,9] vs [5,14]: intersection 5, union 15
        let score = eval_retrieval(&[seg((0, 9))], &[(5, 14)]).unwrap();
        assert!((score.miou - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(score.acc_at_half, 0.0);
    }

    #[test]
    fn eval_no_predictions() {
        let score = eval_retrieval(&[], &[(0, 1), (2, 3), (4, 5), (6, 7)]).unwrap();
        assert_eq!(score.miou, 0.0);
        assert_eq!(score.acc_at_half, 0.0);
    }

    #[test]
    fn eval_matching_is_one_to_one() {
        // one prediction overlapping two truths may only be matched once
        let score = eval_retrieval(&[seg((0, 19))], &[(0, 9), (10, 19)]).unwrap();
        assert!(score.miou < 0.5);
    }

    #[test]
    fn eval_rejects_malformed() {
        assert!(eval_retrieval(&[seg((0, 1))], &[]).is_err());
        assert!(eval_retrieval(&[seg((0, 1))], &[(5, 2)]).is_err());
        let bad = Segment {
            h_start: 5,
            h_end: 2,
            r_start: 0,
            r_end: 0,
            cost: 0.0,
        };
        assert!(eval_retrieval(&[bad], &[(0, 1)]).is_err());
    }
}
