//! Box-projected gradient descent with Armijo backtracking.

use std::time::{Duration, Instant};

use crate::world::{ControlCommand, RobotState};

use super::cost::{cost, cost_and_gradient, CostBreakdown};
use super::reference::ReferenceTrajectory;
use super::{ConstraintPoint, PlannerConfig, PlannerError};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: CostBreakdown,
    /// Cost after every accepted iterate, starting with the initial guess.
    pub cost_history: Vec<f64>,
    pub wall_time: Duration,
}

fn project(u: ControlCommand, cfg: &PlannerConfig) -> ControlCommand {
    ControlCommand::new(
        u.v.clamp(-cfg.v_max, cfg.v_max),
        u.omega.clamp(-cfg.omega_max, cfg.omega_max),
    )
}

/// Minimises the planner objective over the control sequence.
///
/// `warm_start` is used as given (the caller shifts the previous solution);
/// without one the search starts from rest. Every iterate is projected onto
/// the actuator box and only sufficient-decrease steps are accepted, so the
/// reported cost history is non-increasing.
pub fn solve_mpc(
    state: &RobotState,
    reference: &ReferenceTrajectory,
    points: &[ConstraintPoint],
    cfg: &PlannerConfig,
    warm_start: Option<&[ControlCommand]>,
) -> Result<(Vec<ControlCommand>, SolveReport), PlannerError> {
    let started = Instant::now();
    let h = cfg.horizon;
    let mut u: Vec<ControlCommand> = match warm_start {
        Some(w) if w.len() == h => w.iter().map(|c| project(*c, cfg)).collect(),
        Some(w) => {
            return Err(PlannerError::WarmStartLength {
                expected: h,
                got: w.len(),
            })
        }
        None => vec![ControlCommand::default(); h],
    };

    let (mut current, mut grad) = cost_and_gradient(&u, state, reference, points, cfg);
    if !current.total.is_finite() {
        return Err(PlannerError::NonFiniteCost { iterate: u });
    }
    let initial_cost = current.total;
    let mut history = vec![initial_cost];
    let mut step = cfg.initial_step;
    let mut iterations = 0;

    for _ in 0..cfg.iterations {
        iterations += 1;
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let cand: Vec<ControlCommand> = u
                .iter()
                .zip(&grad)
                .map(|(c, g)| project(ControlCommand::new(c.v - alpha * g[0], c.omega - alpha * g[1]), cfg))
                .collect();
            let decrease: f64 = cand
                .iter()
                .zip(&u)
                .zip(&grad)
                .map(|((n, o), g)| g[0] * (n.v - o.v) + g[1] * (n.omega - o.omega))
                .sum();
            if decrease == 0.0 {
                break;
            }
            let trial = cost(&cand, state, reference, points, cfg);
            if !trial.total.is_finite() {
                return Err(PlannerError::NonFiniteCost { iterate: cand });
            }
            if trial.total <= current.total + cfg.armijo_c * decrease {
                accepted = Some(cand);
                break;
            }
            alpha *= cfg.backtrack_shrink;
        }
        let Some(next) = accepted else { break };
        u = next;
        (current, grad) = cost_and_gradient(&u, state, reference, points, cfg);
        history.push(current.total);
        step = (alpha * 2.0).min(cfg.max_step);
    }

    Ok((
        u,
        SolveReport {
            iterations,
            initial_cost,
            final_cost: current,
            cost_history: history,
            wall_time: started.elapsed(),
        },
    ))
}
