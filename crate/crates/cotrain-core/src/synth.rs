//! Seeded synthetic-data generators used by the test suites and the CLI:
//! minimum-jerk trajectories, long sequences with planted motif copies,
//! random rigid scenes, and clustered feature blobs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quat::Quat;
use crate::traj::{ActionFrame, FeatureSequence, Source, Trajectory};
use crate::transform::RigidTransform;

/// A motif copy planted at `offset`, with Gaussian noise of standard
/// deviation `noise_sigma` on its translations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSegmentSpec {
    pub offset: usize,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// Straight-line minimum-jerk translation profile from `start` to `end`.
    MinJerk {
        start: [f64; 3],
        end: [f64; 3],
        frames: usize,
        dt: f64,
    },
    /// A long "human" sequence of far-away background motion with noisy
    /// copies of a short "robot" motif planted at the given offsets.
    /// Matching feature tracks are produced through one shared random
    /// linear map of the translations.
    PlantedSegments {
        base_len: usize,
        query_len: usize,
        segments: Vec<PlantedSegmentSpec>,
        feature_dim: usize,
    },
    /// Random point cloud with a known rigid transform applied to it.
    RigidScene {
        n_points: usize,
        rotation_angle: f64,
        translation: [f64; 3],
    },
    /// Feature rows grouped into contiguous clusters around random centers.
    FeatureBlob {
        frames: usize,
        dim: usize,
        cluster_count: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub seed: u64,
}

/// Generated data together with its ground truth.
#[derive(Debug, Clone)]
pub enum Generated {
    MinJerk {
        traj: Trajectory,
        start: [f64; 3],
        end: [f64; 3],
    },
    Planted {
        robot: Trajectory,
        human: Trajectory,
        robot_features: FeatureSequence,
        human_features: FeatureSequence,
        /// Inclusive human-index spans of the planted copies.
        truth: Vec<(usize, usize)>,
    },
    Rigid {
        cam: Vec<[f64; 3]>,
        rob: Vec<[f64; 3]>,
        truth: RigidTransform,
    },
    Features {
        features: FeatureSequence,
        labels: Vec<usize>,
    },
}

fn min_jerk_blend(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

fn lerp3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [
        a[0] + s * (b[0] - a[0]),
        a[1] + s * (b[1] - a[1]),
        a[2] + s * (b[2] - a[2]),
    ]
}

fn feature_map(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let rows = (0..dim)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let bias = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (rows, bias)
}

fn project_features(
    map: &(Vec<[f64; 3]>, Vec<f64>),
    positions: &[[f64; 3]],
    demo_id: &str,
) -> Result<FeatureSequence> {
    let rows = positions
        .iter()
        .map(|p| {
            map.0
                .iter()
                .zip(&map.1)
                .map(|(row, b)| row[0] * p[0] + row[1] * p[1] + row[2] * p[2] + b)
                .collect()
        })
        .collect();
    FeatureSequence::new(rows, demo_id)
}

fn positions_to_traj(
    positions: &[[f64; 3]],
    dt: f64,
    source: Source,
    demo_id: &str,
) -> Result<Trajectory> {
    let frames = positions
        .iter()
        .map(|&p| ActionFrame::new(p, Quat::IDENTITY, vec![]))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(frames, dt, source, demo_id)
}

/// Deterministic generation: the same spec (including its seed) always
/// produces identical output.
pub fn generate(spec: &SynthSpec) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.kind {
        SynthKind::MinJerk {
            start,
            end,
            frames,
            dt,
        } => {
            if *frames < 1 {
                return Err(Error::InvalidInput("frames must be >= 1".into()));
            }
            if !dt.is_finite() || *dt <= 0.0 {
                return Err(Error::InvalidInput("dt must be positive".into()));
            }
            let positions: Vec<[f64; 3]> = (0..*frames)
                .map(|i| {
                    let u = if *frames == 1 {
                        0.0
                    } else {
                        i as f64 / (*frames - 1) as f64
                    };
                    lerp3(*start, *end, min_jerk_blend(u))
                })
                .collect();
            let traj = positions_to_traj(
                &positions,
                *dt,
                Source::Human,
                &format!("minjerk-{}", spec.seed),
            )?;
            Ok(Generated::MinJerk {
                traj,
                start: *start,
                end: *end,
            })
        }
        SynthKind::PlantedSegments {
            base_len,
            query_len,
            segments,
            feature_dim,
        } => {
            if *query_len < 2 {
                return Err(Error::InvalidInput("query_len must be >= 2".into()));
            }
            if *feature_dim < 1 {
                return Err(Error::InvalidInput("feature_dim must be >= 1".into()));
            }
            let mut last_end: Option<usize> = None;
            for seg in segments {
                if seg.offset + query_len > *base_len {
                    return Err(Error::OutOfRange(format!(
                        "segment at offset {} does not fit in base_len {base_len}",
                        seg.offset
                    )));
                }
                if let Some(end) = last_end {
                    if seg.offset <= end {
                        return Err(Error::InvalidInput(
                            "planted segments must be sorted and non-overlapping".into(),
                        ));
                    }
                }
                if !seg.noise_sigma.is_finite() || seg.noise_sigma < 0.0 {
                    return Err(Error::InvalidInput(
                        "noise_sigma must be finite and non-negative".into(),
                    ));
                }
                last_end = Some(seg.offset + query_len - 1);
            }

            // motif: a minimum-jerk sweep across the unit box
            let a = [
                rng.random_range(0.0..0.3),
                rng.random_range(0.0..0.3),
                rng.random_range(0.0..0.3),
            ];
            let b = [
                rng.random_range(0.7..1.0),
                rng.random_range(0.7..1.0),
                rng.random_range(0.7..1.0),
            ];
            let query: Vec<[f64; 3]> = (0..*query_len)
                .map(|i| {
                    let u = i as f64 / (*query_len - 1) as f64;
                    lerp3(a, b, min_jerk_blend(u))
                })
                .collect();

            // background far from the motif so spills cost plenty
            let mut human: Vec<[f64; 3]> = (0..*base_len)
                .map(|_| {
                    [
                        12.0 + rng.random_range(-2.0..2.0),
                        12.0 + rng.random_range(-2.0..2.0),
                        12.0 + rng.random_range(-2.0..2.0),
                    ]
                })
                .collect();
            let mut truth = Vec::with_capacity(segments.len());
            for seg in segments {
                let normal = Normal::new(0.0, seg.noise_sigma.max(f64::MIN_POSITIVE))
                    .expect("validated sigma");
                for (i, q) in query.iter().enumerate() {
                    let noise = if seg.noise_sigma > 0.0 {
                        [
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                        ]
                    } else {
                        [0.0; 3]
                    };
                    human[seg.offset + i] =
                        [q[0] + noise[0], q[1] + noise[1], q[2] + noise[2]];
                }
                truth.push((seg.offset, seg.offset + query_len - 1));
            }

            let map = feature_map(&mut rng, *feature_dim);
            let robot_id = format!("planted-robot-{}", spec.seed);
            let human_id = format!("planted-human-{}", spec.seed);
            Ok(Generated::Planted {
                robot: positions_to_traj(&query, 0.1, Source::Robot, &robot_id)?,
                human: positions_to_traj(&human, 0.1, Source::Human, &human_id)?,
                robot_features: project_features(&map, &query, &robot_id)?,
                human_features: project_features(&map, &human, &human_id)?,
                truth,
            })
        }
        SynthKind::RigidScene {
            n_points,
            rotation_angle,
            translation,
        } => {
            if *n_points < 1 {
                return Err(Error::InvalidInput("n_points must be >= 1".into()));
            }
            if !rotation_angle.is_finite() {
                return Err(Error::InvalidInput("rotation_angle must be finite".into()));
            }
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let axis = loop {
                let v = [
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                ];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-6 {
                    break [v[0] / n, v[1] / n, v[2] / n];
                }
            };
            let truth = RigidTransform::new(
                Quat::from_axis_angle(axis, *rotation_angle)?,
                *translation,
            )?;
            let cam: Vec<[f64; 3]> = (0..*n_points)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect();
            let rob = cam.iter().map(|&p| truth.apply(p)).collect();
            Ok(Generated::Rigid { cam, rob, truth })
        }
        SynthKind::FeatureBlob {
            frames,
            dim,
            cluster_count,
        } => {
            if *frames < 1 || *dim < 1 || *cluster_count < 1 || cluster_count > frames {
                return Err(Error::InvalidInput(
                    "need frames >= cluster_count >= 1 and dim >= 1".into(),
                ));
            }
            let centers: Vec<Vec<f64>> = (0..*cluster_count)
                .map(|_| (0..*dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let normal = Normal::new(0.0, 0.05).expect("fixed sigma");
            let mut rows = Vec::with_capacity(*frames);
            let mut labels = Vec::with_capacity(*frames);
            for t in 0..*frames {
                let label = (t * *cluster_count) / *frames;
                labels.push(label);
                rows.push(
                    centers[label]
                        .iter()
                        .map(|c| c + normal.sample(&mut rng))
                        .collect(),
                );
            }
            Ok(Generated::Features {
                features: FeatureSequence::new(rows, format!("blob-{}", spec.seed))?,
                labels,
            })
        }
    }
}

/// Adds seeded Gaussian noise to every feature entry.
pub fn disturb_features(
    features: &FeatureSequence,
    sigma: f64,
    seed: u64,
) -> Result<FeatureSequence> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidInput(
            "sigma must be finite and non-negative".into(),
        ));
    }
    if sigma == 0.0 {
        return Ok(features.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let rows = features
        .rows()
        .iter()
        .map(|row| row.iter().map(|v| v + normal.sample(&mut rng)).collect())
        .collect();
    FeatureSequence::new(rows, features.demo_id())
}

/// Adds seeded Gaussian noise to the translation and joint channels of a
/// trajectory; orientations are left untouched.
pub fn disturb_actions(traj: &Trajectory, sigma: f64, seed: u64) -> Result<Trajectory> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidInput(
            "sigma must be finite and non-negative".into(),
        ));
    }
    if sigma == 0.0 {
        return Ok(traj.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let frames = traj
        .frames()
        .iter()
        .map(|f| {
            let t = f.translation();
            let translation = [
                t[0] + normal.sample(&mut rng),
                t[1] + normal.sample(&mut rng),
                t[2] + normal.sample(&mut rng),
            ];
            let joints = f
                .joints()
                .iter()
                .map(|j| j + normal.sample(&mut rng))
                .collect();
            ActionFrame::new(translation, *f.orientation(), joints)
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(frames, traj.dt(), traj.source(), traj.demo_id())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::speed_profile;
    use crate::retrieve::eval_retrieval;

    #[test]
    fn min_jerk_with_equal_endpoints_is_constant() {
        let spec = SynthSpec {
            kind: SynthKind::MinJerk {
                start: [0.5, 0.5, 0.5],
                end: [0.5, 0.5, 0.5],
                frames: 20,
                dt: 0.1,
            },
            seed: 1,
        };
        let Generated::MinJerk { traj, .. } = generate(&spec).unwrap() else {
            panic!("wrong variant");
        };
        let speeds = speed_profile(&traj).unwrap();
        assert!(speeds.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn planted_sigma_zero_copies_query_exactly() {
        let spec = SynthSpec {
            kind: SynthKind::PlantedSegments {
                base_len: 100,
                query_len: 12,
                segments: vec![
                    PlantedSegmentSpec {
                        offset: 10,
                        noise_sigma: 0.0,
                    },
                    PlantedSegmentSpec {
                        offset: 50,
                        noise_sigma: 0.0,
                    },
                ],
                feature_dim: 4,
            },
            seed: 2,
        };
        let Generated::Planted {
            robot,
            human,
            truth,
            ..
        } = generate(&spec).unwrap()
        else {
            panic!("wrong variant");
        };
        for (start, end) in &truth {
            for (i, t) in (*start..=*end).enumerate() {
                assert_eq!(human.frame(t).translation(), robot.frame(i).translation());
            }
        }
        // truth spans score a perfect retrieval against themselves
        let segs: Vec<crate::retrieve::Segment> = truth
            .iter()
            .map(|&(s, e)| crate::retrieve::Segment {
                h_start: s,
                h_end: e,
                r_start: 0,
                r_end: robot.len() - 1,
                cost: 0.0,
            })
            .collect();
        let score = eval_retrieval(&segs, &truth).unwrap();
        assert_eq!(score.miou, 1.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SynthSpec {
            kind: SynthKind::PlantedSegments {
                base_len: 80,
                query_len: 10,
                segments: vec![PlantedSegmentSpec {
                    offset: 30,
                    noise_sigma: 0.02,
                }],
                feature_dim: 5,
            },
            seed: 77,
        };
        let (Generated::Planted { human: h1, human_features: f1, .. }, Generated::Planted { human: h2, human_features: f2, .. }) =
            (generate(&spec).unwrap(), generate(&spec).unwrap())
        else {
            panic!("wrong variant");
        };
        assert_eq!(h1, h2);
        assert_eq!(f1, f2);
    }

    #[test]
    fn overlapping_segments_rejected() {
        let spec = SynthSpec {
            kind: SynthKind::PlantedSegments {
                base_len: 50,
                query_len: 10,
                segments: vec![
                    PlantedSegmentSpec {
                        offset: 5,
                        noise_sigma: 0.0,
                    },
                    PlantedSegmentSpec {
                        offset: 8,
                        noise_sigma: 0.0,
                    },
                ],
                feature_dim: 3,
            },
            seed: 1,
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn rigid_scene_truth_maps_cam_to_rob() {
        let spec = SynthSpec {
            kind: SynthKind::RigidScene {
                n_points: 15,
                rotation_angle: 1.2,
                translation: [0.3, -0.7, 2.0],
            },
            seed: 5,
        };
        let Generated::Rigid { cam, rob, truth } = generate(&spec).unwrap() else {
            panic!("wrong variant");
        };
        for (c, r) in cam.iter().zip(&rob) {
            let mapped = truth.apply(*c);
            for d in 0..3 {
                assert!((mapped[d] - r[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feature_blob_labels_are_contiguous() {
        let spec = SynthSpec {
            kind: SynthKind::FeatureBlob {
                frames: 30,
                dim: 4,
                cluster_count: 3,
            },
            seed: 9,
        };
        let Generated::Features { features, labels } = generate(&spec).unwrap() else {
            panic!("wrong variant");
        };
        assert_eq!(features.len(), 30);
        assert_eq!(labels.len(), 30);
        for w in labels.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(*labels.last().unwrap(), 2);
    }

    #[test]
    fn disturb_sigma_zero_is_identity() {
        let f = FeatureSequence::new(vec![vec![1.0, 2.0]; 4], "f").unwrap();
        assert_eq!(disturb_features(&f, 0.0, 3).unwrap(), f);
        let spec = SynthSpec {
            kind: SynthKind::MinJerk {
                start: [0.0; 3],
                end: [1.0, 0.0, 0.0],
                frames: 10,
                dt: 0.1,
            },
            seed: 1,
        };
        let Generated::MinJerk { traj, .. } = generate(&spec).unwrap() else {
            panic!("wrong variant");
        };
        assert_eq!(disturb_actions(&traj, 0.0, 3).unwrap(), traj);
    }

    #[test]
    fn disturb_sample_deviation_matches_sigma() {
        let rows = vec![vec![0.0; 100]; 100];
        let f = FeatureSequence::new(rows, "zeros").unwrap();
        let noisy = disturb_features(&f, 0.1, 11).unwrap();
        let n = 100.0 * 100.0;
        let mean: f64 = noisy.rows().iter().flatten().sum::<f64>() / n;
        let var: f64 = noisy
            .rows()
            .iter()
            .flatten()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        assert!((sd - 0.1).abs() < 0.005, "sd {sd}");
    }
}
