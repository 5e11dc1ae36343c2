//! Batch runner: reads a flat experiment config, runs the certificate
//! stages and writes CSV tables plus a JSON report.

pub mod config;
pub mod report;
pub mod setup;
pub mod stages;

use config::ExperimentConfig;
use report::{Environment, RunRecord};
use stages::{run_stage, Stage};

/// Run the given stages in order; failures are recorded, never propagated.
pub fn run(command: &str, stages: &[Stage], cfg: &ExperimentConfig) -> RunRecord {
    let records = stages
        .iter()
        .map(|&s| {
            log::info!("stage {} ...", s.name());
            let r = run_stage(s, cfg);
            log::info!("stage {} finished in {:.1}s: {:?}", s.name(), r.seconds, r.verdict);
            r
        })
        .collect();
    RunRecord {
        config_hash: cfg.hash(),
        command: command.into(),
        config: cfg.clone(),
        stages: records,
        environment: Environment::current(),
    }
}
