use std::io::Write;
use std::thread;

use serde::Serialize;

use crate::error::RunError;
use crate::metrics::{aggregate, Aggregate, MetricsResult};
use crate::question::Scenario;

use super::{run_scenario, RunConfig};

/// One (scenario, configuration) run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub scenario_id: String,
    pub config: String,
    pub metrics: Option<MetricsResult>,
    pub error: Option<String>,
}

/// Means over the scenarios a configuration completed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub config: String,
    pub metrics: Option<Aggregate>,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub outcomes: Vec<ScenarioOutcome>,
}

impl BenchReport {
    pub fn row(&self, config: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.config == config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Columns: config, acc, dar, ns, nuwl, scenarios, failures. Metric
    /// cells are empty when no scenario completed.
    pub fn write_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["config", "acc", "dar", "ns", "nuwl", "scenarios", "failures"])?;
        for r in &self.rows {
            let cell = |f: fn(&Aggregate) -> f64| {
                r.metrics.as_ref().map(|m| f(m).to_string()).unwrap_or_default()
            };
            out.write_record([
                r.config.clone(),
                cell(|m| m.acc),
                cell(|m| m.dar),
                cell(|m| m.ns),
                cell(|m| m.nuwl),
                r.metrics.map(|m| m.scenarios).unwrap_or(0).to_string(),
                r.failures.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every scenario under every configuration. A failing run is recorded
/// in its outcome and excluded from the means. Runs are spread across
/// threads; results do not depend on the thread count.
pub fn run_suite(scenarios: &[Scenario], configs: &[RunConfig]) -> Result<BenchReport, RunError> {
    if scenarios.is_empty() {
        return Err(RunError::InvalidScenario("benchmark has no scenarios".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let jobs: Vec<(&Scenario, &RunConfig)> = configs
        .iter()
        .flat_map(|c| scenarios.iter().map(move |s| (s, c)))
        .collect();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let chunk = jobs.len().div_ceil(workers);
    let outcomes: Vec<ScenarioOutcome> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&(s, c)| run_one(s, c)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("benchmark worker panicked"))
            .collect()
    });

    let rows = configs
        .iter()
        .map(|c| {
            let label = c.label();
            let mine: Vec<&ScenarioOutcome> = outcomes.iter().filter(|o| o.config == label).collect();
            let done: Vec<MetricsResult> = mine.iter().filter_map(|o| o.metrics.clone()).collect();
            BenchRow {
                config: label,
                metrics: aggregate(&done).ok(),
                failures: mine.len() - done.len(),
            }
        })
        .collect();
    Ok(BenchReport { rows, outcomes })
}

fn run_one(scenario: &Scenario, config: &RunConfig) -> ScenarioOutcome {
    let result = run_scenario(scenario, config).and_then(|t| {
        t.stored_metrics()
            .cloned()
            .ok_or_else(|| RunError::InvalidScenario("run produced no metrics".into()))
    });
    let (metrics, error) = match result {
        Ok(m) => (Some(m), None),
        Err(e) => {
            log::warn!("{} under {}: {e}", scenario.scenario_id, config.label());
            (None, Some(e.to_string()))
        }
    };
    ScenarioOutcome {
        scenario_id: scenario.scenario_id.clone(),
        config: config.label(),
        metrics,
        error,
    }
}
