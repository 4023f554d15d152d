use serde::Serialize;

use crate::exec::Execution;
use crate::scenario::Scenario;

use super::{run_trial, AblationMode, HarnessError, PlannerKind, TrialResult, TrialStatus};

/// Aggregate over the seeds of one `(scenario, mode, planner)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub mode: String,
    pub planner: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub collisions: usize,
    /// Over trials that reached the goal; `None` if none did.
    pub mean_path_length_m: Option<f64>,
    pub std_path_length_m: Option<f64>,
    pub mean_cycle_ms: f64,
}

#[derive(Debug, Clone)]
pub struct AblationResults {
    /// Ordered by `(scenario, mode, planner, seed)`.
    pub trials: Vec<TrialResult>,
    /// Ordered by `(scenario, mode, planner)`.
    pub summary: Vec<SummaryRow>,
}

impl AblationResults {
    pub fn row(&self, scenario: &str, mode: AblationMode) -> Option<&SummaryRow> {
        let m = mode.to_string();
        self.summary
            .iter()
            .find(|r| r.scenario == scenario && r.mode == m)
    }

    pub fn any_solver_error(&self) -> bool {
        self.trials.iter().any(|t| t.status == TrialStatus::SolverError)
    }
}

pub fn run_ablation(
    scenarios: &[Scenario],
    modes: &[AblationMode],
    seeds: &[u64],
    planner: PlannerKind,
) -> Result<AblationResults, HarnessError> {
    run_ablation_with(scenarios, modes, seeds, planner, Execution::default())
}

/// Full factorial of `scenarios x modes x seeds`. Trials are independent
/// and run on the pool when `exec` is parallel; failures are recorded, not
/// fatal.
pub fn run_ablation_with(
    scenarios: &[Scenario],
    modes: &[AblationMode],
    seeds: &[u64],
    planner: PlannerKind,
    exec: Execution,
) -> Result<AblationResults, HarnessError> {
    if scenarios.is_empty() {
        return Err(HarnessError::TooFew {
            what: "scenarios",
            need: 1,
            got: 0,
        });
    }
    if modes.len() < 2 {
        return Err(HarnessError::TooFew {
            what: "modes",
            need: 2,
            got: modes.len(),
        });
    }
    if seeds.is_empty() {
        return Err(HarnessError::TooFew {
            what: "seeds",
            need: 1,
            got: 0,
        });
    }
    let jobs: Vec<(&Scenario, AblationMode, u64)> = scenarios
        .iter()
        .flat_map(|s| modes.iter().flat_map(move |m| seeds.iter().map(move |seed| (s, *m, *seed))))
        .collect();
    let mut trials = exec.map_slice(&jobs, |(s, m, seed)| run_trial(s, *m, *seed, planner));
    trials.sort_by(|a, b| {
        (&a.scenario, a.mode.to_string(), a.planner, a.seed).cmp(&(&b.scenario, b.mode.to_string(), b.planner, b.seed))
    });
    let summary = summarize(&trials);
    Ok(AblationResults { trials, summary })
}

pub(crate) fn summarize(trials: &[TrialResult]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut keys: Vec<(String, String, String)> = trials
        .iter()
        .map(|t| (t.scenario.clone(), t.mode.to_string(), t.planner.to_string()))
        .collect();
    keys.sort();
    keys.dedup();
    for (scenario, mode, planner) in keys {
        let cell: Vec<&TrialResult> = trials
            .iter()
            .filter(|t| t.scenario == scenario && t.mode.to_string() == mode && t.planner.to_string() == planner)
            .collect();
        let reached: Vec<f64> = cell
            .iter()
            .filter(|t| t.status == TrialStatus::Reached)
            .map(|t| t.metrics.path_length)
            .collect();
        let (mean, std) = if reached.is_empty() {
            (None, None)
        } else {
            let n = reached.len() as f64;
            let m = reached.iter().sum::<f64>() / n;
            let var = reached.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            (Some(m), Some(var.sqrt()))
        };
        rows.push(SummaryRow {
            trials: cell.len(),
            successes: reached.len(),
            success_rate: reached.len() as f64 / cell.len() as f64,
            collisions: cell.iter().filter(|t| t.status == TrialStatus::Collided).count(),
            mean_path_length_m: mean,
            std_path_length_m: std,
            mean_cycle_ms: cell.iter().map(|t| t.metrics.mean_cycle_ms).sum::<f64>() / cell.len() as f64,
            scenario,
            mode,
            planner,
        });
    }
    rows
}
