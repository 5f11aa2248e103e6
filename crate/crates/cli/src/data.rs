use std::collections::BTreeMap;
use std::path::Path;

use labelsteward::dataset::{ingest_path, read_jsonl, write_jsonl};
use labelsteward::discrepancy::compare;
use labelsteward::{CalculatorRegistry, Instance, Label};
use serde::Serialize;
use serde_json::json;

use crate::error::{fatal, input, usage, CliResult};
use crate::manifest::{manifest_for_file, ManifestBuilder};
use crate::{emit, Column};

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file {} does not exist", path.display())))
    }
}

pub fn read_instances(path: &Path) -> CliResult<Vec<Instance>> {
    require_file(path)?;
    read_jsonl(path).map_err(|e| input(path, e))
}

pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| fatal(format!("{}: {e}", dir.display())))?;
    }
    write_jsonl(path, items).map_err(|e| fatal(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| fatal(format!("{}: {e}", dir.display())))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(fatal)?;
    std::fs::write(path, text + "\n").map_err(|e| fatal(format!("{}: {e}", path.display())))
}

pub fn ingest(input: &Path, out: &Path, json: bool) -> CliResult<()> {
    require_file(input)?;
    let manifest = ManifestBuilder::start("ingest", json!({ "input": input, "out": out })).input(input);
    let ingested = ingest_path(input, CalculatorRegistry::builtin()).map_err(|e| crate::error::input(input, e))?;
    write_lines(out, &ingested.instances)?;
    manifest.finish(&[out.to_path_buf()], &manifest_for_file(out))?;
    let summary = json!({ "instances": ingested.instances.len(), "warnings": ingested.warnings });
    emit(json, &summary, || {
        let mut s = format!("ingested {} instances into {}\n", ingested.instances.len(), out.display());
        for w in &ingested.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    });
    Ok(())
}

fn column(inst: &Instance, col: Column) -> Option<Label> {
    match col {
        Column::Original => inst.label_original.clone(),
        Column::New => inst.label_new.clone(),
        Column::Expert => inst.label_expert().cloned(),
    }
}

#[derive(Debug, Serialize)]
struct DiffSummary {
    compared: usize,
    flagged: usize,
    by_kind: BTreeMap<String, usize>,
    skipped: Vec<String>,
}

pub fn diff(instances_path: &Path, left: Column, right: Column, out: &Path, json: bool) -> CliResult<()> {
    let instances = read_instances(instances_path)?;
    let manifest =
        ManifestBuilder::start("diff", json!({ "left": left, "right": right, "out": out })).input(instances_path);
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for inst in &instances {
        match (column(inst, left), column(inst, right)) {
            (Some(a), Some(b)) => reports.push(compare(&inst.unique_id, &a, &b)),
            _ => skipped.push(inst.unique_id.clone()),
        }
    }
    write_lines(out, &reports)?;
    manifest.finish(&[out.to_path_buf()], &manifest_for_file(out))?;
    let mut by_kind = BTreeMap::new();
    for r in reports.iter().filter(|r| r.flagged) {
        let kind = serde_json::to_value(r.kind).map_err(fatal)?;
        *by_kind.entry(kind.as_str().unwrap_or("?").to_string()).or_insert(0) += 1;
    }
    let summary = DiffSummary {
        compared: reports.len(),
        flagged: reports.iter().filter(|r| r.flagged).count(),
        by_kind,
        skipped,
    };
    emit(json, &summary, || {
        let mut s = format!("compared {}, flagged {}", summary.compared, summary.flagged);
        if !summary.skipped.is_empty() {
            s.push_str(&format!(", skipped {} without both labels", summary.skipped.len()));
        }
        s.push('\n');
        for (k, n) in &summary.by_kind {
            s.push_str(&format!("  {k}: {n}\n"));
        }
        s
    });
    Ok(())
}
