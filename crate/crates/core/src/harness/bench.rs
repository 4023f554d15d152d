use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::perception::{perceive, FrameBuffer, PerceptionConfig, PointCloud2D, Tracker};
use crate::geometry::Vec2;
use crate::planner::StageTimings;
use crate::scenario::Scenario;
use crate::world::{step_world, WorldState};

use super::{millis, percentile, sense, trial_rngs, ActivePlanner, AblationMode, HarnessError, PlannerKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStats {
    pub stage: String,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencySummary {
    pub cycles: usize,
    /// One row per pipeline stage, `total` last.
    pub stages: Vec<StageStats>,
}

impl LatencySummary {
    pub fn total(&self) -> &StageStats {
        self.stages.last().expect("total row")
    }

    pub fn stage(&self, name: &str) -> Option<&StageStats> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

/// Runs `n_cycles` closed-loop planning cycles, restarting the scenario
/// (with the next seed) whenever a run ends, and summarises wall time per
/// stage.
pub fn bench_latency(
    scenario: &Scenario,
    mode: AblationMode,
    kind: PlannerKind,
    n_cycles: usize,
    seed: u64,
) -> Result<LatencySummary, HarnessError> {
    if n_cycles < 100 {
        return Err(HarnessError::TooFewCycles(n_cycles));
    }
    let mut timings: Vec<StageTimings> = Vec::with_capacity(n_cycles);
    let mut run = 0u64;
    while timings.len() < n_cycles {
        let sc = scenario.jittered(seed + run);
        let (mut sensor_rng, mut planner_rng) = trial_rngs(seed + run);
        let mut planner = ActivePlanner::new(&sc, mode, kind);
        let mut buffer = FrameBuffer::new();
        let mut world = WorldState::initial(&sc);
        for _ in 0..sc.max_steps {
            if timings.len() >= n_cycles || world.collided {
                break;
            }
            if (world.robot.pose.position() - sc.goal.position()).norm() <= sc.goal.tolerance {
                break;
            }
            if sense(&world, &sc, &mut buffer, &mut sensor_rng).is_err() {
                break;
            }
            match planner.cycle(&world, &sc, &buffer, &mut planner_rng) {
                Ok((command, report)) => {
                    timings.push(report.timings);
                    world = step_world(&world, &sc, command, sc.dt);
                }
                Err(_) => break,
            }
        }
        run += 1;
        if run > 10_000 {
            break;
        }
    }

    let stages = StageTimings::STAGES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut ms: Vec<f64> = timings.iter().map(|t| millis(t.as_array()[i])).collect();
            ms.sort_by(f64::total_cmp);
            StageStats {
                stage: name.to_string(),
                mean_ms: ms.iter().sum::<f64>() / ms.len().max(1) as f64,
                p50_ms: percentile(&ms, 0.5),
                p95_ms: percentile(&ms, 0.95),
            }
        })
        .collect();
    Ok(LatencySummary {
        cycles: timings.len(),
        stages,
    })
}

/// Synthetic frame of `n` distinct points: tight blobs of 25 points on a
/// 2 m lattice.
fn synthetic_frame(n: usize, t: f64, rng: &mut ChaCha8Rng) -> PointCloud2D {
    let per_blob = 25;
    let side = ((n / per_blob) as f64).sqrt().ceil() as usize + 1;
    let pts = (0..n)
        .map(|i| {
            let b = i / per_blob;
            let c = Vec2::new((b % side) as f64 * 2.0, (b / side) as f64 * 2.0);
            c + Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
        })
        .collect();
    PointCloud2D::new(pts, t)
}

/// Median wall time of one perception update over synthetic frames of each
/// size.
pub fn perception_scaling(sizes: &[usize], reps: usize) -> Vec<(usize, Duration)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    sizes
        .iter()
        .map(|&n| {
            let mut samples: Vec<Duration> = (0..reps.max(1))
                .map(|_| {
                    let mut buffer = FrameBuffer::new();
                    buffer.push(synthetic_frame(n, 0.0, &mut rng)).expect("ordered");
                    buffer.push(synthetic_frame(n, 0.1, &mut rng)).expect("ordered");
                    let mut tracker = Tracker::new(PerceptionConfig::default());
                    let started = Instant::now();
                    perceive(&buffer, &mut tracker).expect("fresh tracks are well-formed");
                    started.elapsed()
                })
                .collect();
            samples.sort();
            (n, samples[samples.len() / 2])
        })
        .collect()
}
