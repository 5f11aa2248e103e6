//! Ingestion of delimiter-separated benchmark files and JSONL persistence of
//! instance records.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::calculators::CalculatorRegistry;
use crate::model::{
    parse_label, Instance, InstanceMetadata, OutputKind, PatientContext, ScoreQuestion,
};

pub const COL_UNIQUE_ID: &str = "Unique ID";
pub const COL_CALCULATOR_ID: &str = "Calculator ID";
pub const COL_CALCULATOR_NAME: &str = "Calculator Name";
pub const COL_CATEGORY: &str = "Category";
pub const COL_OUTPUT_TYPE: &str = "Output Type";
pub const COL_NOTE_ID: &str = "Note ID";
pub const COL_NOTE_TYPE: &str = "Note Type";
pub const COL_PATIENT_NOTE: &str = "Patient Note";
pub const COL_QUESTION: &str = "Question";
pub const COL_RELEVANT_ENTITIES: &str = "Relevant Entities";
pub const COL_GROUND_TRUTH: &str = "Ground Truth Answer";
pub const COL_LOWER_LIMIT: &str = "Lower Limit";
pub const COL_UPPER_LIMIT: &str = "Upper Limit";
pub const COL_EXPLANATION: &str = "Ground Truth Explanation";

/// Column order of a full source record.
pub const RECORD_ORDER: &[&str] = &[
    COL_UNIQUE_ID,
    COL_CALCULATOR_ID,
    COL_CALCULATOR_NAME,
    COL_CATEGORY,
    COL_OUTPUT_TYPE,
    COL_NOTE_ID,
    COL_NOTE_TYPE,
    COL_PATIENT_NOTE,
    COL_QUESTION,
    COL_RELEVANT_ENTITIES,
    COL_GROUND_TRUTH,
    COL_LOWER_LIMIT,
    COL_UPPER_LIMIT,
    COL_EXPLANATION,
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed delimited file: {0}")]
    Csv(#[from] csv::Error),
    #[error("required column {0:?} is missing")]
    MissingColumn(&'static str),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate unique id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub instances: Vec<Instance>,
    /// Non-fatal findings, e.g. unparsable original answers.
    pub warnings: Vec<String>,
}

/// Reads a benchmark file. `.tsv` files are tab separated, anything else is
/// comma separated.
pub fn ingest_path(path: &Path, registry: &CalculatorRegistry) -> Result<Ingested, DatasetError> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    };
    let source_tag = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    ingest_reader(File::open(path)?, delimiter, &source_tag, registry)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    delimiter: u8,
    source_tag: &str,
    registry: &CalculatorRegistry,
) -> Result<Ingested, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    for required in [COL_UNIQUE_ID, COL_PATIENT_NOTE, COL_QUESTION] {
        if !headers.iter().any(|h| h == required) {
            return Err(DatasetError::MissingColumn(required));
        }
    }
    if !headers.iter().any(|h| h == COL_CALCULATOR_ID || h == COL_CALCULATOR_NAME) {
        return Err(DatasetError::MissingColumn(COL_CALCULATOR_NAME));
    }

    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 2; // header is line 1
        let record = record?;
        let mut row: IndexMap<String, String> = headers
            .iter()
            .cloned()
            .zip(record.iter().map(str::to_string))
            .collect();
        let instance = build_instance(&mut row, row_no, source_tag, registry, &mut out.warnings)?;
        if !seen.insert(instance.unique_id.clone()) {
            return Err(DatasetError::DuplicateId(instance.unique_id));
        }
        out.instances.push(instance);
    }
    Ok(out)
}

fn take(row: &mut IndexMap<String, String>, key: &str) -> Option<String> {
    row.shift_remove(key).filter(|v| !v.trim().is_empty())
}

fn build_instance(
    row: &mut IndexMap<String, String>,
    row_no: usize,
    source_tag: &str,
    registry: &CalculatorRegistry,
    warnings: &mut Vec<String>,
) -> Result<Instance, DatasetError> {
    let err = |message: String| DatasetError::Row { row: row_no, message };
    let unique_id = take(row, COL_UNIQUE_ID).ok_or_else(|| err("empty Unique ID".into()))?;
    let note_text = take(row, COL_PATIENT_NOTE).ok_or_else(|| err(format!("instance {unique_id}: empty Patient Note")))?;
    let question_text = take(row, COL_QUESTION).ok_or_else(|| err(format!("instance {unique_id}: empty Question")))?;
    let note_id = take(row, COL_NOTE_ID).unwrap_or_else(|| format!("note-{unique_id}"));

    // These stay in `extra` so the full source record can be reproduced.
    let raw_id = row.get(COL_CALCULATOR_ID).filter(|v| !v.trim().is_empty()).cloned();
    let raw_name = row.get(COL_CALCULATOR_NAME).filter(|v| !v.trim().is_empty()).cloned();
    let raw_kind = row.get(COL_OUTPUT_TYPE).cloned();

    let spec = raw_name
        .as_deref()
        .and_then(|n| registry.resolve(n))
        .or_else(|| raw_id.as_deref().and_then(|id| registry.resolve(id)));
    let (calculator_id, calculator_name, output_kind) = match spec {
        Some(spec) => (
            spec.calculator_id.clone(),
            raw_name.clone().unwrap_or_else(|| spec.name.clone()),
            spec.output_kind,
        ),
        None => {
            let kind = raw_kind
                .as_deref()
                .and_then(OutputKind::from_output_type)
                .ok_or_else(|| err(format!("instance {unique_id}: unknown calculator and no usable Output Type")))?;
            let id = raw_id.clone().or_else(|| raw_name.clone()).unwrap_or_default();
            warnings.push(format!(
                "instance {unique_id}: calculator {:?} is not in the registry",
                raw_name.as_deref().unwrap_or(&id)
            ));
            (id.clone(), raw_name.clone().unwrap_or(id), kind)
        }
    };

    let original_answer_text = take(row, COL_GROUND_TRUTH);
    let label_original = original_answer_text.as_deref().and_then(|t| match parse_label(t, output_kind) {
        Ok(l) => Some(l),
        Err(e) => {
            warnings.push(format!("instance {unique_id}: original answer not usable: {e}"));
            None
        }
    });
    let metadata = InstanceMetadata {
        relevant_entities: take(row, COL_RELEVANT_ENTITIES),
        explanation: take(row, COL_EXPLANATION),
        lower_limit: take(row, COL_LOWER_LIMIT),
        upper_limit: take(row, COL_UPPER_LIMIT),
        original_answer_text,
        extra: std::mem::take(row),
    };
    let mut instance = Instance::new(
        unique_id,
        PatientContext {
            note_text,
            note_id,
            source_tag: source_tag.to_string(),
        },
        ScoreQuestion {
            calculator_id,
            calculator_name,
            question_text,
            output_kind,
        },
    );
    instance.label_original = label_original;
    instance.metadata = metadata;
    Ok(instance)
}

/// The instance as an ordered source record (column name -> text).
pub fn source_record(instance: &Instance) -> IndexMap<String, String> {
    let m = &instance.metadata;
    let mut out = IndexMap::new();
    for key in RECORD_ORDER {
        let value = match *key {
            COL_UNIQUE_ID => Some(instance.unique_id.clone()),
            COL_CALCULATOR_ID => m
                .extra
                .get(*key)
                .cloned()
                .or_else(|| Some(instance.question.calculator_id.clone())),
            COL_CALCULATOR_NAME => m
                .extra
                .get(*key)
                .cloned()
                .or_else(|| Some(instance.question.calculator_name.clone())),
            COL_OUTPUT_TYPE => m.extra.get(*key).cloned().or_else(|| {
                Some(
                    match instance.question.output_kind {
                        OutputKind::Real => "decimal",
                        OutputKind::Ordinal => "integer",
                        OutputKind::Datetime => "date",
                    }
                    .to_string(),
                )
            }),
            COL_NOTE_ID => Some(instance.context.note_id.clone()),
            COL_PATIENT_NOTE => Some(instance.context.note_text.clone()),
            COL_QUESTION => Some(instance.question.question_text.clone()),
            COL_RELEVANT_ENTITIES => m.relevant_entities.clone(),
            COL_GROUND_TRUTH => m
                .original_answer_text
                .clone()
                .or_else(|| instance.label_original.as_ref().map(|l| l.to_string())),
            COL_LOWER_LIMIT => m.lower_limit.clone(),
            COL_UPPER_LIMIT => m.upper_limit.clone(),
            COL_EXPLANATION => m.explanation.clone(),
            other => m.extra.get(other).cloned(),
        };
        if let Some(v) = value {
            out.insert(key.to_string(), v);
        }
    }
    for (k, v) in &m.extra {
        if !out.contains_key(k) {
            out.insert(k.clone(), v.clone());
        }
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

/// Reads a JSONL file, treating a missing file as empty.
pub fn read_jsonl_or_empty<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    match read_jsonl(path) {
        Err(DatasetError::Io(e)) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        other => other,
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    const HEADER: &str = "Unique ID,Calculator ID,Calculator Name,Output Type,Note ID,Patient Note,Question,Relevant Entities,Ground Truth Answer,Lower Limit,Upper Limit,Ground Truth Explanation,Reviewer Notes\n";

    fn ingest(body: &str) -> Result<Ingested, DatasetError> {
        let text = format!("{HEADER}{body}");
        ingest_reader(text.as_bytes(), b',', "test.csv", CalculatorRegistry::builtin())
    }

    #[test]
    fn ingests_known_and_unknown_calculators() {
        let got = ingest(concat!(
            "1,2,Creatinine Clearance (Cockcroft-Gault Equation),decimal,pmc-1,\"An 87-year-old man, 48 kg.\",What is the CrCl?,\"{'age': [87, 'years']}\",25.238,23.9761,26.4999,Plug in.,keep me\n",
            "2,99,HAS-BLED Score,integer,pmc-2,Note two.,What is HAS-BLED?,{},3,3,3,,\n",
        ))
        .unwrap();
        assert_eq!(got.instances.len(), 2);
        let a = &got.instances[0];
        assert_eq!(a.question.calculator_id, "cockcroft_gault");
        assert_eq!(a.question.output_kind, OutputKind::Real);
        assert_eq!(a.label_original, Some(Label::Real("25.238".parse().unwrap())));
        assert_eq!(a.metadata.extra.get("Reviewer Notes").map(String::as_str), Some("keep me"));
        assert_eq!(a.context.source_tag, "test.csv");
        let b = &got.instances[1];
        assert_eq!(b.question.calculator_id, "99");
        assert_eq!(b.question.output_kind, OutputKind::Ordinal);
        assert_eq!(got.warnings.len(), 1);
    }

    #[test]
    fn source_record_round_trips_columns_in_order() {
        let got = ingest("7,2,Creatinine Clearance (Cockcroft-Gault Equation),decimal,pmc-1,Note.,Q?,ents,25.238,23.9761,26.4999,Expl.,x\n").unwrap();
        let rec = source_record(&got.instances[0]);
        let keys: Vec<_> = rec.keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            vec![
                "Unique ID",
                "Calculator ID",
                "Calculator Name",
                "Output Type",
                "Note ID",
                "Patient Note",
                "Question",
                "Relevant Entities",
                "Ground Truth Answer",
                "Lower Limit",
                "Upper Limit",
                "Ground Truth Explanation",
                "Reviewer Notes"
            ]
        );
        assert_eq!(rec["Calculator ID"], "2");
    }

    #[test]
    fn rejects_duplicates_empty_notes_and_missing_columns() {
        assert!(matches!(
            ingest("1,2,BMI,decimal,n,Note.,Q?,,1,,,,\n1,2,BMI,decimal,n,Note.,Q?,,1,,,,\n"),
            Err(DatasetError::DuplicateId(_))
        ));
        assert!(matches!(ingest("1,2,BMI,decimal,n,,Q?,,1,,,,\n"), Err(DatasetError::Row { .. })));
        let r = ingest_reader("Unique ID,Question\n1,Q\n".as_bytes(), b',', "x", CalculatorRegistry::builtin());
        assert!(matches!(r, Err(DatasetError::MissingColumn("Patient Note"))));
    }

    #[test]
    fn unparsable_original_answer_is_a_warning() {
        let got = ingest("1,13,Estimated Due Date,date,n,Note.,Q?,,\"('4 weeks', '2 days')\",,,,\n").unwrap();
        assert_eq!(got.instances[0].label_original, None);
        assert_eq!(got.warnings.len(), 2);
        assert!(got.instances[0].metadata.original_answer_text.is_some());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.jsonl");
        let got = ingest("1,2,BMI,decimal,n,Note.,Q?,,22.857,,,,\n").unwrap();
        write_jsonl(&path, &got.instances).unwrap();
        let back: Vec<Instance> = read_jsonl(&path).unwrap();
        assert_eq!(back, got.instances);
        append_jsonl(&path, &got.instances).unwrap();
        assert_eq!(read_jsonl::<Instance>(&path).unwrap().len(), 2);
        assert!(read_jsonl_or_empty::<Instance>(&dir.path().join("missing.jsonl")).unwrap().is_empty());
    }
}
