//! File formats: roster CSV, weight and config JSON, audit report export.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    Answer, EngineError, Importance, RespondentProfile, Roster, UserResponse, WeightMatrix,
};
use crate::impact::ElectorateParameters;
use crate::perturb::DropConditioning;
use crate::simulate::{AuditConfig, AuditReport, Level, SyntheticRosterSpec, TopkSummary};

pub use crate::simulate::roster_digest;

/// Weight table shipped as the default, byte for byte.
pub const DEFAULT_WEIGHTS_JSON: &str =
    r#"{"not_important":[12,15,18,21,24],"neutral":[6,12,18,24,30],"important":[0,9,18,27,36]}"#;

/// Column header of the change-rate report.
pub const REPORT_COLUMNS: [&str; 12] = [
    "kind",
    "importance",
    "distance",
    "delta",
    "n",
    "level",
    "mean_change_pct",
    "ci_low",
    "ci_high",
    "batches",
    "trials",
    "skips",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: u64, id: String },
    #[error("no valid rows")]
    Empty,
    #[error("weights: {0}")]
    Weights(String),
    #[error("{what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    /// Any bad row fails the load.
    #[default]
    Strict,
    /// Bad rows are dropped and listed.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRejection {
    pub row: u64,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RosterLoad {
    pub roster: Roster,
    pub rejected: Vec<RowRejection>,
}

fn expected_header(m: usize) -> Vec<String> {
    ["id", "name", "party"]
        .into_iter()
        .map(String::from)
        .chain((1..=m).map(|i| format!("a{i}")))
        .collect()
}

fn parse_answers(fields: &[&str]) -> Result<Vec<Answer>, String> {
    fields
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(format!("a{} is blank", i + 1));
            }
            let v: i64 = raw
                .parse()
                .map_err(|_| format!("a{} = `{raw}` is not an integer", i + 1))?;
            Answer::new(v).map_err(|_| format!("a{} = {v} outside 1..=5", i + 1))
        })
        .collect()
}

/// Reads `id,name,party,a1..am`. Rows are numbered by line, header = 1.
pub fn load_roster<R: Read>(source: R, m: usize, mode: IngestMode) -> Result<RosterLoad, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let expected = expected_header(m);
    if header != expected {
        return Err(IoError::Header {
            expected: expected.join(","),
            found: header.join(","),
        });
    }
    let mut profiles = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        let fields: Vec<&str> = record.iter().collect();
        let parsed = if fields.len() != m + 3 {
            Err(format!(
                "expected {} columns, found {}",
                m + 3,
                fields.len()
            ))
        } else if id.is_empty() {
            Err("id is blank".to_string())
        } else {
            parse_answers(&fields[3..])
        };
        match parsed {
            Ok(answers) => {
                if !seen.insert(id.clone()) {
                    return Err(IoError::DuplicateId { row, id });
                }
                profiles.push(RespondentProfile {
                    id,
                    name: fields[1].trim().to_string(),
                    party: fields[2].trim().to_string(),
                    answers,
                });
            }
            Err(reason) => match mode {
                IngestMode::Strict => return Err(IoError::Row { row, reason }),
                IngestMode::Lenient => rejected.push(RowRejection { row, id, reason }),
            },
        }
    }
    if profiles.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(RosterLoad {
        roster: Roster::new(profiles)?,
        rejected,
    })
}

pub fn load_roster_path(path: &Path, m: usize, mode: IngestMode) -> Result<RosterLoad, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    load_roster(file, m, mode)
}

pub fn write_roster<W: Write>(roster: &Roster, sink: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(expected_header(roster.question_count()))?;
    for r in roster.respondents() {
        let mut rec = vec![r.id.clone(), r.name.clone(), r.party.clone()];
        rec.extend(r.answers.iter().map(|a| a.value().to_string()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn parse_weights(text: &str) -> Result<WeightMatrix, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Weights(e.to_string()))
}

pub fn load_weights<R: Read>(mut source: R) -> Result<WeightMatrix, IoError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| IoError::Weights(e.to_string()))?;
    parse_weights(&text)
}

pub fn load_weights_path(path: &Path) -> Result<WeightMatrix, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_weights(&text)
}

pub fn default_weights() -> WeightMatrix {
    parse_weights(DEFAULT_WEIGHTS_JSON).expect("embedded default is valid")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserDocument {
    answers: Vec<i64>,
    importances: Vec<Importance>,
}

/// `{"answers":[...],"importances":["important",...]}`
pub fn parse_user(text: &str) -> Result<UserResponse, IoError> {
    let doc: UserDocument = serde_json::from_str(text).map_err(|source| IoError::Json {
        what: "user",
        source,
    })?;
    let answers = doc
        .answers
        .into_iter()
        .map(Answer::new)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(UserResponse::new(answers, doc.importances)?)
}

/// Audit configuration file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfigDocument {
    pub audit: AuditConfig,
    /// Synthetic roster to generate when no roster file is given.
    pub roster: SyntheticRosterSpec,
    pub roster_file: Option<PathBuf>,
    pub electorate: ElectorateParameters,
}

pub fn parse_audit_config(text: &str) -> Result<AuditConfigDocument, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Json {
        what: "audit config",
        source,
    })
}

pub fn load_audit_config(path: &Path) -> Result<AuditConfigDocument, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_audit_config(&text)
}

/// One line of the change-rate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: String,
    pub importance: Option<Importance>,
    pub distance: Option<u8>,
    pub delta: Option<u32>,
    pub n: Option<usize>,
    pub level: Level,
    pub mean_change_pct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub batches: usize,
    pub trials: u64,
    pub skips: u64,
}

pub fn report_rows(report: &AuditReport) -> Vec<ReportRow> {
    report
        .cells
        .iter()
        .map(|c| {
            let p = &c.perturbation;
            ReportRow {
                kind: p.kind().to_string(),
                importance: p.importance(),
                distance: p.distance(),
                delta: p.delta().map(|d| d.get()),
                n: p.drop_count(),
                level: c.level,
                mean_change_pct: c.mean_change_pct,
                ci_low: c.ci_low,
                ci_high: c.ci_high,
                batches: c.batches,
                trials: c.trials,
                skips: c.skips,
            }
        })
        .collect()
}

pub fn write_report_csv<W: Write>(report: &AuditReport, sink: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(sink);
    for row in report_rows(report) {
        w.serialize(row)?;
    }
    if report.cells.is_empty() {
        w.write_record(REPORT_COLUMNS)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn parse_report_csv<R: Read>(source: R) -> Result<Vec<ReportRow>, IoError> {
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<&str> = reader.headers()?.iter().collect();
    if header != REPORT_COLUMNS {
        return Err(IoError::Header {
            expected: REPORT_COLUMNS.join(","),
            found: header.join(","),
        });
    }
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkRow {
    pub kind: String,
    pub importance: Option<Importance>,
    pub distance: Option<u8>,
    pub delta: Option<u32>,
    pub k: usize,
    pub mean_rho: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub batches: usize,
    pub users: u64,
    pub degenerate: u64,
}

impl From<&TopkSummary> for TopkRow {
    fn from(t: &TopkSummary) -> Self {
        let p = &t.perturbation;
        TopkRow {
            kind: p.kind().to_string(),
            importance: p.importance(),
            distance: p.distance(),
            delta: p.delta().map(|d| d.get()),
            k: t.k,
            mean_rho: t.mean_rho,
            ci_low: t.ci_low,
            ci_high: t.ci_high,
            batches: t.batches,
            users: t.users,
            degenerate: t.degenerate,
        }
    }
}

pub fn write_topk_csv<W: Write>(report: &AuditReport, sink: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(sink);
    for t in &report.topk {
        w.serialize(TopkRow::from(t))?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

pub fn report_json(report: &AuditReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_report_json(text: &str) -> Result<AuditReport, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Json {
        what: "report",
        source,
    })
}

/// Output locations for [`export_report`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub topk_csv: Option<PathBuf>,
}

impl ReportPaths {
    /// `report.csv`, `report.json` and `report_topk.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        ReportPaths {
            csv: dir.join("report.csv"),
            json: dir.join("report.json"),
            topk_csv: Some(dir.join("report_topk.csv")),
        }
    }
}

fn staged(path: &Path, bytes: &[u8]) -> Result<tempfile::NamedTempFile, IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    Ok(tmp)
}

/// Writes every output to a temp file beside its target, then renames them
/// into place. Nothing is renamed unless every file was staged.
pub fn export_report(report: &AuditReport, paths: &ReportPaths) -> Result<(), IoError> {
    let mut csv_bytes = Vec::new();
    write_report_csv(report, &mut csv_bytes)?;
    let mut outputs = vec![
        (paths.csv.clone(), csv_bytes),
        (paths.json.clone(), report_json(report).into_bytes()),
    ];
    if let Some(topk) = &paths.topk_csv {
        let mut bytes = Vec::new();
        write_topk_csv(report, &mut bytes)?;
        outputs.push((topk.clone(), bytes));
    }
    let staged_files = outputs
        .iter()
        .map(|(path, bytes)| staged(path, bytes).map(|t| (path, t)))
        .collect::<Result<Vec<_>, _>>()?;
    for (path, tmp) in staged_files {
        tmp.persist(path).map_err(|e| IoError::Io {
            path: path.clone(),
            source: e.error,
        })?;
    }
    Ok(())
}

/// Short label for a drop conditioning, as used in summaries.
pub fn conditioning_label(c: DropConditioning) -> String {
    match c {
        DropConditioning::Unconditioned => "any".into(),
        DropConditioning::Level(l) => l.key().into(),
    }
}
