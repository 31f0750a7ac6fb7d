//! Censored functional survival samples: schema, trajectories, CSV ingestion,
//! validation and terminal-jump imputation.
//!
//! A subject's covariates are step functions of time. Each [`Epoch`] holds
//! the readings that apply on the half-open interval `[start, end)`, built by
//! carrying the last observation forward. Categorical readings are stored as
//! dense integer codes (as `f64`) indexing the column's label dictionary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Continuous,
    /// Label dictionary; a reading's code is its index in this list.
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical(name: impl Into<String>, labels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical(labels),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical(_))
    }
}

/// Ordered covariate columns of a dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    pub columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns }
    }

    /// Schema of `p` continuous columns named `x1..xp`.
    pub fn continuous(p: usize) -> Self {
        Self::new((1..=p).map(|j| Column::continuous(format!("x{j}"))).collect())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Parses a cell of column `j` into its stored representation.
    pub fn encode(&self, j: usize, cell: &str) -> Result<f64> {
        let column = &self.columns[j];
        match &column.kind {
            ColumnKind::Continuous => cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Schema(format!("column `{}`: `{cell}` is not a number", column.name))
                }),
            ColumnKind::Categorical(labels) => labels
                .iter()
                .position(|l| l == cell.trim())
                .map(|i| i as f64)
                .ok_or_else(|| Error::UnknownLabel {
                    column: column.name.clone(),
                    label: cell.trim().to_string(),
                }),
        }
    }

    /// Formats a stored value of column `j` back to its textual form.
    pub fn decode(&self, j: usize, value: f64) -> String {
        match &self.columns[j].kind {
            ColumnKind::Continuous => format!("{value}"),
            ColumnKind::Categorical(labels) => labels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("{value}")),
        }
    }

    /// Checks that a covariate vector conforms, naming the offending column.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Schema(format!(
                "expected {} covariates, got {}",
                self.len(),
                x.len()
            )));
        }
        for (column, &v) in self.columns.iter().zip(x) {
            match &column.kind {
                ColumnKind::Continuous if !v.is_finite() => {
                    return Err(Error::Schema(format!(
                        "column `{}`: non-finite value {v}",
                        column.name
                    )))
                }
                ColumnKind::Categorical(labels)
                    if v < 0.0 || v.fract() != 0.0 || v as usize >= labels.len() =>
                {
                    return Err(Error::UnknownLabel {
                        column: column.name.clone(),
                        label: format!("{v}"),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Covariate readings held constant on `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub start: f64,
    pub end: f64,
    pub values: Vec<f64>,
}

impl Epoch {
    pub fn new(start: f64, end: f64, values: Vec<f64>) -> Self {
        Self { start, end, values }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One subject's censored trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    pub id: String,
    pub epochs: Vec<Epoch>,
    pub followup: f64,
    pub event: bool,
    /// Covariates read at the follow-up time itself, if recorded.
    pub terminal: Option<Vec<f64>>,
}

impl FunctionalSample {
    pub fn new(id: impl Into<String>, epochs: Vec<Epoch>, followup: f64, event: bool) -> Self {
        Self {
            id: id.into(),
            epochs,
            followup,
            event,
            terminal: None,
        }
    }

    pub fn with_terminal(mut self, terminal: Vec<f64>) -> Self {
        self.terminal = Some(terminal);
        self
    }

    /// Readings in force at time `t` (right-continuous at epoch starts; the
    /// last epoch is used at and beyond follow-up).
    pub fn covariates_at(&self, t: f64) -> &[f64] {
        let idx = self
            .epochs
            .partition_point(|e| e.end <= t)
            .min(self.epochs.len() - 1);
        &self.epochs[idx].values
    }

    /// Readings attached to the follow-up point `(T, X(T))`.
    pub fn terminal_covariates(&self) -> &[f64] {
        &self.epochs[self.epochs.len() - 1].values
    }

    /// End of the covered trajectory.
    pub fn covered_until(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.end)
    }

    /// Copy whose last epoch is carried forward to `t` when `t` lies past
    /// the covered trajectory.
    pub fn extended_to(&self, t: f64) -> FunctionalSample {
        let mut out = self.clone();
        if let Some(last) = out.epochs.last_mut() {
            if last.end < t {
                last.end = t;
            }
        }
        out
    }
}

/// Inserts a jump at the midpoint between the last pre-terminal measurement
/// and follow-up, assigning the terminal reading to the imputed tail.
///
/// Without this, an event whose terminal reading differs from the last
/// in-trajectory reading can land in a region the trajectory never visits,
/// leaving it with events but no exposure. Samples without a distinct
/// terminal reading come back unchanged, which also makes the operation
/// idempotent.
pub fn impute_terminal_jump(sample: &FunctionalSample) -> FunctionalSample {
    let mut out = sample.clone();
    let Some(terminal) = sample.terminal.as_ref() else {
        return out;
    };
    let Some(last) = out.epochs.last() else {
        return out;
    };
    if &last.values == terminal || terminal.len() != last.values.len() {
        return out;
    }
    let midpoint = 0.5 * (last.start + sample.followup);
    if !(midpoint > last.start && midpoint < sample.followup && last.end == sample.followup) {
        return out;
    }
    let last = out.epochs.last_mut().expect("nonempty");
    last.end = midpoint;
    out.epochs
        .push(Epoch::new(midpoint, sample.followup, terminal.clone()));
    out
}

/// Immutable collection of samples sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub samples: Vec<FunctionalSample>,
}

impl Dataset {
    pub fn new(schema: Schema, samples: Vec<FunctionalSample>) -> Self {
        Self { schema, samples }
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn p(&self) -> usize {
        self.schema.len()
    }

    pub fn event_count(&self) -> usize {
        self.samples.iter().filter(|s| s.event).count()
    }

    pub fn total_followup(&self) -> f64 {
        crate::numeric::stable_sum(self.samples.iter().map(|s| s.followup))
    }

    /// Dataset made of the given subjects, in order; indices may repeat.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Applies [`impute_terminal_jump`] to every sample.
    pub fn impute_terminal_jumps(&self) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: self.samples.iter().map(impute_terminal_jump).collect(),
        }
    }

    /// Lists every invariant violation; an empty report means the dataset is
    /// ready for fitting.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Returns the dataset back if valid, else the report as an error.
    pub fn validated(self) -> Result<Self> {
        let report = validate(&self);
        if report.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidDataset(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub subject: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    fn push(&mut self, subject: Option<&str>, message: String) {
        self.issues.push(ValidationIssue {
            subject: subject.map(str::to_string),
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            match &issue.subject {
                Some(id) => writeln!(f, "subject {id}: {}", issue.message)?,
                None => writeln!(f, "{}", issue.message)?,
            }
        }
        Ok(())
    }
}

pub fn validate(dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    if dataset.samples.is_empty() {
        report.push(None, "no samples".to_string());
        return report;
    }
    let p = dataset.p();
    for sample in &dataset.samples {
        let id = Some(sample.id.as_str());
        if !(sample.followup > 0.0) || !sample.followup.is_finite() {
            report.push(id, format!("followup {} must be positive", sample.followup));
        }
        if sample.epochs.is_empty() {
            report.push(id, "no epochs".to_string());
            continue;
        }
        if sample.epochs[0].start != 0.0 {
            report.push(
                id,
                format!("first epoch starts at {} instead of 0", sample.epochs[0].start),
            );
        }
        for (k, epoch) in sample.epochs.iter().enumerate() {
            if !(epoch.start < epoch.end) {
                report.push(
                    id,
                    format!("empty epoch [{}, {}) at position {k}", epoch.start, epoch.end),
                );
            }
            if epoch.values.len() != p {
                report.push(
                    id,
                    format!(
                        "epoch at {} has {} values, schema has {p}",
                        epoch.start,
                        epoch.values.len()
                    ),
                );
            } else if let Err(e) = dataset.schema.check_point(&epoch.values) {
                report.push(id, format!("epoch at {}: {e}", epoch.start));
            }
        }
        for pair in sample.epochs.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.end < b.start {
                report.push(id, format!("gap at subject {} between {} and {}", sample.id, a.end, b.start));
            } else if a.end > b.start {
                report.push(id, format!("overlap at subject {} between {} and {}", sample.id, b.start, a.end));
            }
        }
        let last = sample.covered_until();
        if last != sample.followup {
            report.push(
                id,
                format!("trajectory ends at {last} but followup is {}", sample.followup),
            );
        }
        if let Some(terminal) = &sample.terminal {
            if terminal.len() != p {
                report.push(id, format!("terminal reading has {} values, schema has {p}", terminal.len()));
            }
        }
    }
    if dataset.event_count() == 0 {
        report.push(None, "no observed events; F0 undefined".to_string());
    }
    report
}

/// How covariate columns are typed when loading a CSV.
#[derive(Debug, Clone, Default)]
pub enum SchemaSpec {
    /// Every covariate continuous.
    #[default]
    AllContinuous,
    /// Continuous except the named columns, whose label dictionaries are
    /// collected from the file (sorted lexicographically).
    Infer { categorical: Vec<String> },
    /// Use an existing schema (for instance from a trained model); labels
    /// outside its dictionaries are errors.
    Fixed(Schema),
}

impl SchemaSpec {
    pub fn with_categorical<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SchemaSpec::Infer {
            categorical: names.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(std::io::BufReader::new(file), spec)
}

struct SubjectRows {
    id: String,
    /// (time, cells, line)
    measurements: Vec<(f64, Vec<String>, u64)>,
    terminal: Option<(f64, bool, Option<Vec<String>>, u64)>,
    last_line: u64,
}

/// Reads the long-format CSV: `id, time, <covariates...>, followup, event`.
pub fn read_dataset<R: Read>(reader: R, spec: &SchemaSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(_) => return Err(Error::NoSamples),
    };
    if headers.len() == 0 || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::NoSamples);
    }
    let width = headers.len();
    if width < 4
        || &headers[0] != "id"
        || &headers[1] != "time"
        || &headers[width - 2] != "followup"
        || &headers[width - 1] != "event"
    {
        return Err(Error::Parse {
            line: 1,
            subject: None,
            message: "header must be `id,time,<covariates...>,followup,event`".into(),
        });
    }
    let names: Vec<String> = (2..width - 2).map(|i| headers[i].to_string()).collect();
    if let SchemaSpec::Fixed(schema) = spec {
        let expected: Vec<&str> = schema.names().collect();
        if expected != names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Schema(format!(
                "covariate columns {names:?} do not match expected {expected:?}"
            )));
        }
    }
    if let SchemaSpec::Infer { categorical } = spec {
        for c in categorical {
            if !names.contains(c) {
                return Err(Error::Schema(format!("categorical column `{c}` not in header")));
            }
        }
    }
    let p = names.len();

    let mut order: Vec<String> = Vec::new();
    let mut subjects: HashMap<String, SubjectRows> = HashMap::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let malformed = |subject: Option<&str>, message: String| Error::Parse {
            line,
            subject: subject.map(str::to_string),
            message,
        };
        if record.len() != width {
            return Err(malformed(
                record.get(0),
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(malformed(None, "missing subject id".into()));
        }
        let entry = subjects.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            SubjectRows {
                id: id.clone(),
                measurements: Vec::new(),
                terminal: None,
                last_line: line,
            }
        });
        entry.last_line = line;
        let cells: Vec<String> = (2..width - 2).map(|i| record[i].to_string()).collect();
        let followup = &record[width - 2];
        let event = &record[width - 1];
        match (followup.is_empty(), event.is_empty()) {
            (true, true) => {
                let time: f64 = record[1]
                    .parse()
                    .ok()
                    .filter(|t: &f64| t.is_finite())
                    .ok_or_else(|| malformed(Some(&id), format!("bad time `{}`", &record[1])))?;
                if let Some(j) = cells.iter().position(String::is_empty) {
                    return Err(malformed(
                        Some(&id),
                        format!("missing value for covariate `{}`", names[j]),
                    ));
                }
                if entry.terminal.is_some() {
                    return Err(malformed(Some(&id), "measurement after terminal row".into()));
                }
                if let Some((prev, _, _)) = entry.measurements.last() {
                    if time <= *prev {
                        return Err(malformed(
                            Some(&id),
                            format!("non-monotone times: {time} after {prev}"),
                        ));
                    }
                }
                entry.measurements.push((time, cells, line));
            }
            (false, false) => {
                if entry.terminal.is_some() {
                    return Err(malformed(Some(&id), "duplicate terminal row".into()));
                }
                let followup: f64 = followup
                    .parse()
                    .ok()
                    .filter(|t: &f64| t.is_finite())
                    .ok_or_else(|| malformed(Some(&id), format!("bad followup `{followup}`")))?;
                let event = match event {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(malformed(Some(&id), format!("event must be 0 or 1, got `{other}`")))
                    }
                };
                if !record[1].is_empty() {
                    let t: Option<f64> = record[1].parse().ok();
                    if t != Some(followup) {
                        return Err(malformed(
                            Some(&id),
                            "terminal row time must be empty or equal followup".into(),
                        ));
                    }
                }
                let present = cells.iter().filter(|c| !c.is_empty()).count();
                let terminal = if present == 0 {
                    None
                } else if present == p {
                    Some(cells)
                } else {
                    return Err(malformed(
                        Some(&id),
                        "terminal covariates must be all present or all empty".into(),
                    ));
                };
                entry.terminal = Some((followup, event, terminal, line));
            }
            _ => {
                return Err(malformed(
                    Some(&id),
                    "followup and event must both be set (terminal row) or both empty".into(),
                ))
            }
        }
    }
    if order.is_empty() {
        return Err(Error::NoSamples);
    }

    let schema = match spec {
        SchemaSpec::Fixed(schema) => schema.clone(),
        SchemaSpec::AllContinuous => {
            Schema::new(names.iter().map(|n| Column::continuous(n.clone())).collect())
        }
        SchemaSpec::Infer { categorical } => {
            let mut columns = Vec::with_capacity(p);
            for (j, name) in names.iter().enumerate() {
                if categorical.contains(name) {
                    let mut labels = BTreeSet::new();
                    for rows in subjects.values() {
                        for (_, cells, _) in &rows.measurements {
                            labels.insert(cells[j].clone());
                        }
                        if let Some((_, _, Some(cells), _)) = &rows.terminal {
                            labels.insert(cells[j].clone());
                        }
                    }
                    columns.push(Column::categorical(name.clone(), labels.into_iter().collect()));
                } else {
                    columns.push(Column::continuous(name.clone()));
                }
            }
            Schema::new(columns)
        }
    };

    let encode_row = |cells: &[String], id: &str, line: u64| -> Result<Vec<f64>> {
        cells
            .iter()
            .enumerate()
            .map(|(j, c)| {
                schema.encode(j, c).map_err(|e| match e {
                    Error::UnknownLabel { .. } => e,
                    other => Error::Parse {
                        line,
                        subject: Some(id.to_string()),
                        message: other.to_string(),
                    },
                })
            })
            .collect()
    };

    let mut samples = Vec::with_capacity(order.len());
    for id in &order {
        let rows = subjects.remove(id).expect("grouped subject");
        let Some((followup, event, terminal_cells, terminal_line)) = rows.terminal else {
            return Err(Error::Parse {
                line: rows.last_line,
                subject: Some(rows.id),
                message: "missing terminal row (followup, event)".into(),
            });
        };
        if rows.measurements.is_empty() {
            return Err(Error::Parse {
                line: terminal_line,
                subject: Some(rows.id),
                message: "subject has zero epochs (no measurement rows)".into(),
            });
        }
        let mut epochs = Vec::with_capacity(rows.measurements.len());
        for (k, (time, cells, line)) in rows.measurements.iter().enumerate() {
            let end = rows
                .measurements
                .get(k + 1)
                .map_or(followup, |next| next.0);
            if *time >= followup {
                return Err(Error::Parse {
                    line: *line,
                    subject: Some(rows.id.clone()),
                    message: format!("non-monotone times: measurement at {time} not before followup {followup}"),
                });
            }
            epochs.push(Epoch::new(*time, end, encode_row(cells, &rows.id, *line)?));
        }
        let mut sample = FunctionalSample::new(rows.id.clone(), epochs, followup, event);
        if let Some(cells) = terminal_cells {
            sample.terminal = Some(encode_row(&cells, &rows.id, terminal_line)?);
        }
        samples.push(sample);
    }
    Ok(Dataset::new(schema, samples))
}

pub fn write_dataset_file(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = std::io::BufWriter::new(file);
    write_dataset(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the long-format CSV read by [`read_dataset`]: one measurement row
/// per epoch start plus a terminal row per subject.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let p = dataset.p();
    let mut header = vec!["id".to_string(), "time".to_string()];
    header.extend(dataset.schema.names().map(str::to_string));
    header.push("followup".into());
    header.push("event".into());
    wtr.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(p + 4);
    for sample in &dataset.samples {
        for epoch in &sample.epochs {
            row.clear();
            row.push(sample.id.clone());
            row.push(format!("{}", epoch.start));
            row.extend(epoch.values.iter().enumerate().map(|(j, &v)| dataset.schema.decode(j, v)));
            row.push(String::new());
            row.push(String::new());
            wtr.write_record(&row)?;
        }
        row.clear();
        row.push(sample.id.clone());
        row.push(String::new());
        match &sample.terminal {
            Some(values) => {
                row.extend(values.iter().enumerate().map(|(j, &v)| dataset.schema.decode(j, v)))
            }
            None => row.extend(std::iter::repeat_n(String::new(), p)),
        }
        row.push(format!("{}", sample.followup));
        row.push(if sample.event { "1" } else { "0" }.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Dataset> {
        read_dataset(text.as_bytes(), &SchemaSpec::AllContinuous)
    }

    #[test]
    fn locf_construction() {
        let ds = read("id,time,x,followup,event\n1,0,0.3,,\n1,1.0,0.8,,\n1,,,2.0,0\n").unwrap();
        assert_eq!(ds.n(), 1);
        let s = &ds.samples[0];
        assert_eq!(
            s.epochs,
            vec![Epoch::new(0.0, 1.0, vec![0.3]), Epoch::new(1.0, 2.0, vec![0.8])]
        );
        assert_eq!(s.followup, 2.0);
        assert!(!s.event);
        assert!(s.terminal.is_none());
    }

    #[test]
    fn empty_file_has_no_samples() {
        assert!(matches!(read(""), Err(Error::NoSamples)));
        assert!(matches!(read("id,time,x,followup,event\n"), Err(Error::NoSamples)));
    }

    #[test]
    fn two_subjects_one_epoch_each() {
        let ds = read("id,time,x,followup,event\na,0,1,,\na,,,3,1\nb,0,2,,\nb,,,4,0\n").unwrap();
        assert_eq!(ds.n(), 2);
        assert!(ds.samples.iter().all(|s| s.epochs.len() == 1));
        assert!(ds.validate().is_empty());
    }

    #[test]
    fn load_errors_carry_line_and_subject() {
        let err = read("id,time,x,followup,event\n7,0,1,,\n7,0,2,,\n7,,,3,1\n").unwrap_err();
        match err {
            Error::Parse { line, subject, message } => {
                assert_eq!(line, 3);
                assert_eq!(subject.as_deref(), Some("7"));
                assert!(message.contains("non-monotone"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = read("id,time,x,followup,event\n7,0,abc,,\n7,,,3,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read("id,time,x,followup,event\n7,,,3,1\n").unwrap_err();
        assert!(err.to_string().contains("zero epochs"), "{err}");
        let err = read("id,time,x,followup,event\n7,0,1,,\n").unwrap_err();
        assert!(err.to_string().contains("terminal"), "{err}");
    }

    #[test]
    fn unknown_categorical_label() {
        let schema = Schema::new(vec![Column::categorical("g", vec!["a".into(), "b".into()])]);
        let err = read_dataset(
            "id,time,g,followup,event\n1,0,c,,\n1,,,2,1\n".as_bytes(),
            &SchemaSpec::Fixed(schema),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { ref column, .. } if column == "g"));
    }

    #[test]
    fn categorical_dictionary_is_sorted() {
        let ds = read_dataset(
            "id,time,g,followup,event\n1,0,z,,\n1,1,a,,\n1,,,2,1\n".as_bytes(),
            &SchemaSpec::with_categorical(["g"]),
        )
        .unwrap();
        assert_eq!(
            ds.schema.columns[0].kind,
            ColumnKind::Categorical(vec!["a".into(), "z".into()])
        );
        assert_eq!(ds.samples[0].epochs[0].values, vec![1.0]);
        assert_eq!(ds.samples[0].epochs[1].values, vec![0.0]);
    }

    #[test]
    fn imputes_midpoint_jump() {
        let ds = read("id,time,x,followup,event\n1,0,0.3,,\n1,1,0.8,,\n1,,0.9,2,1\n").unwrap();
        let imputed = impute_terminal_jump(&ds.samples[0]);
        assert_eq!(
            imputed.epochs,
            vec![
                Epoch::new(0.0, 1.0, vec![0.3]),
                Epoch::new(1.0, 1.5, vec![0.8]),
                Epoch::new(1.5, 2.0, vec![0.9]),
            ]
        );
        assert_eq!(impute_terminal_jump(&imputed), imputed);
    }

    #[test]
    fn imputation_noops() {
        let same = FunctionalSample::new("a", vec![Epoch::new(0.0, 1.0, vec![0.3]), Epoch::new(1.0, 2.0, vec![0.8])], 2.0, true)
            .with_terminal(vec![0.8]);
        assert_eq!(impute_terminal_jump(&same), same);
        let single = FunctionalSample::new("b", vec![Epoch::new(0.0, 2.0, vec![0.3])], 2.0, true)
            .with_terminal(vec![0.3]);
        assert_eq!(impute_terminal_jump(&single), single);
        let none = FunctionalSample::new("c", vec![Epoch::new(0.0, 2.0, vec![0.3])], 2.0, true);
        assert_eq!(impute_terminal_jump(&none), none);
    }

    #[test]
    fn validation_reports() {
        let good = read("id,time,x,followup,event\na,0,1,,\na,,,3,1\nb,0,2,,\nb,,,4,0\n").unwrap();
        assert!(validate(&good).is_empty());

        let gap = Dataset::new(
            Schema::continuous(1),
            vec![FunctionalSample::new(
                "s1",
                vec![Epoch::new(0.0, 1.0, vec![0.0]), Epoch::new(1.5, 2.0, vec![0.0])],
                2.0,
                true,
            )],
        );
        let report = validate(&gap);
        assert_eq!(report.len(), 1);
        assert!(report.to_string().contains("gap at subject s1"));

        let mut censored = good.clone();
        censored.samples.iter_mut().for_each(|s| s.event = false);
        let report = validate(&censored);
        assert!(report.to_string().contains("no observed events; F0 undefined"));
    }

    #[test]
    fn covariates_at_follows_locf() {
        let s = FunctionalSample::new(
            "a",
            vec![Epoch::new(0.0, 1.0, vec![1.0]), Epoch::new(1.0, 2.0, vec![2.0])],
            2.0,
            false,
        );
        assert_eq!(s.covariates_at(0.0), &[1.0]);
        assert_eq!(s.covariates_at(0.999), &[1.0]);
        assert_eq!(s.covariates_at(1.0), &[2.0]);
        assert_eq!(s.covariates_at(2.0), &[2.0]);
        assert_eq!(s.covariates_at(5.0), &[2.0]);
    }
}
