#![allow(dead_code)]

pub mod grids;
pub mod grpo;
pub mod pipeline;
pub mod props;

use std::path::PathBuf;

use labelsteward::dataset::ingest_path;
use labelsteward::{CalculatorRegistry, Instance};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn pipeline_instances() -> Vec<Instance> {
    ingest_path(&fixture("pipeline.csv"), CalculatorRegistry::builtin())
        .expect("fixture ingests")
        .instances
}
