//! On-disk formats: raw two-channel signal recordings and per-subject
//! parameter tables.
//!
//! Signal files are CSV with header `t,ecg,ip`, one row per sample. The
//! subject and body position are taken from the file stem,
//! `<subject>_<position>.csv`. Parameter files are CSV with header
//! `subject_id,position` followed by the ten parameter columns in any order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Body position during a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Supine,
    Standing,
}

impl Position {
    pub const ALL: [Position; 2] = [Position::Supine, Position::Standing];

    pub fn as_str(self) -> &'static str {
        match self {
            Position::Supine => "supine",
            Position::Standing => "standing",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "supine" => Ok(Position::Supine),
            "standing" => Ok(Position::Standing),
            other => Err(Error::Config(format!("unknown position '{other}'"))),
        }
    }
}

/// The closed set of cardiorespiratory parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParameterName {
    #[serde(rename = "HR")]
    Hr,
    #[serde(rename = "RMSSD")]
    Rmssd,
    #[serde(rename = "lnRMSSD")]
    LnRmssd,
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "ciRR")]
    CiRr,
    #[serde(rename = "cInsT")]
    CInsT,
    #[serde(rename = "cExpT")]
    CExpT,
    #[serde(rename = "cInsV")]
    CInsV,
    #[serde(rename = "cExpV")]
    CExpV,
    #[serde(rename = "BR")]
    Br,
}

impl ParameterName {
    pub const ALL: [ParameterName; 10] = [
        ParameterName::Hr,
        ParameterName::Rmssd,
        ParameterName::LnRmssd,
        ParameterName::Rr,
        ParameterName::CiRr,
        ParameterName::CInsT,
        ParameterName::CExpT,
        ParameterName::CInsV,
        ParameterName::CExpV,
        ParameterName::Br,
    ];

    /// The five breathing coefficients of variation that feed BR.
    pub const BREATHING_CVS: [ParameterName; 5] = [
        ParameterName::CiRr,
        ParameterName::CInsT,
        ParameterName::CExpT,
        ParameterName::CInsV,
        ParameterName::CExpV,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParameterName::Hr => "HR",
            ParameterName::Rmssd => "RMSSD",
            ParameterName::LnRmssd => "lnRMSSD",
            ParameterName::Rr => "RR",
            ParameterName::CiRr => "ciRR",
            ParameterName::CInsT => "cInsT",
            ParameterName::CExpT => "cExpT",
            ParameterName::CInsV => "cInsV",
            ParameterName::CExpV => "cExpV",
            ParameterName::Br => "BR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Checks the admissible range of a value for this parameter.
    pub fn validate(self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                location: self.as_str().to_string(),
                value,
            });
        }
        let (ok, expected) = match self {
            ParameterName::Hr | ParameterName::Rmssd | ParameterName::Rr => (value > 0.0, "> 0"),
            ParameterName::LnRmssd => (true, "finite"),
            ParameterName::Br => ((0.0..=100.0).contains(&value), "0 ..= 100"),
            _ => (value >= 0.0, ">= 0"),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                name: self.as_str().to_string(),
                value,
                expected,
            })
        }
    }
}

impl fmt::Display for ParameterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParameterName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ParameterName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter '{s}'")))
    }
}

/// One subject's raw two-channel recording in one body position.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub subject_id: String,
    pub position: Position,
    pub sample_rate_hz: f64,
    pub ecg: Vec<f64>,
    pub ip: Vec<f64>,
}

/// Shortest recording accepted, in seconds.
pub const MIN_RECORD_SECONDS: f64 = 30.0;

impl SignalRecord {
    pub fn new(
        subject_id: impl Into<String>,
        position: Position,
        sample_rate_hz: f64,
        ecg: Vec<f64>,
        ip: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::SampleRate(sample_rate_hz));
        }
        if ecg.len() != ip.len() {
            return Err(Error::LengthMismatch {
                ecg: ecg.len(),
                ip: ip.len(),
            });
        }
        crate::error::check_finite(&ecg, "ecg")?;
        crate::error::check_finite(&ip, "ip")?;
        let min_len = (MIN_RECORD_SECONDS * sample_rate_hz).ceil() as usize;
        if ecg.len() < min_len {
            return Err(Error::TooShort(format!(
                "{} samples at {sample_rate_hz} Hz, need at least {min_len}",
                ecg.len()
            )));
        }
        Ok(SignalRecord {
            subject_id: subject_id.into(),
            position,
            sample_rate_hz,
            ecg,
            ip,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.ecg.len() as f64 / self.sample_rate_hz
    }
}

/// Parses a decimal with `.` separator, optionally in scientific notation.
pub(crate) fn parse_decimal(field: &str) -> std::result::Result<f64, String> {
    let s = field.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    if s.contains(',') {
        return Err(format!("'{s}': comma decimal separators are not accepted"));
    }
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits a `<subject>_<position>` file stem.
pub fn parse_record_stem(stem: &str) -> Result<(String, Position)> {
    let (subject, pos) = stem
        .rsplit_once('_')
        .ok_or_else(|| Error::Config(format!("file stem '{stem}' is not <subject>_<position>")))?;
    if subject.is_empty() {
        return Err(Error::Config(format!("file stem '{stem}' has no subject id")));
    }
    Ok((subject.to_string(), pos.parse()?))
}

/// Loads a signal CSV; subject and position come from the file name.
pub fn load_signal_record(path: impl AsRef<Path>) -> Result<SignalRecord> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("bad file name {}", path.display())))?;
    let (subject, position) = parse_record_stem(stem)?;
    read_signal_csv(open(path)?, subject, position)
}

/// Parses signal CSV content from any reader.
pub fn read_signal_csv<R: Read>(
    reader: R,
    subject_id: impl Into<String>,
    position: Position,
) -> Result<SignalRecord> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != ["t", "ecg", "ip"] {
        return Err(Error::MalformedHeader(format!(
            "expected 't,ecg,ip', found '{}'",
            header.join(",")
        )));
    }

    let mut t = Vec::new();
    let mut channels: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    // once a channel runs out, it must stay empty
    let mut ended = [false; 2];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() > 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let tv = parse_decimal(rec.get(0).unwrap_or("")).map_err(|msg| Error::Parse { line, msg })?;
        if !tv.is_finite() {
            return Err(Error::NonFinite {
                location: format!("t at line {line}"),
                value: tv,
            });
        }
        t.push(tv);
        for (c, name) in ["ecg", "ip"].into_iter().enumerate() {
            let field = rec.get(c + 1).unwrap_or("").trim();
            if field.is_empty() {
                ended[c] = true;
                continue;
            }
            if ended[c] {
                return Err(Error::Parse {
                    line,
                    msg: format!("{name} has a gap before this row"),
                });
            }
            let v = parse_decimal(field).map_err(|msg| Error::Parse { line, msg })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    location: format!("{name} at line {line}"),
                    value: v,
                });
            }
            channels[c].push(v);
        }
    }
    let [ecg, ip] = channels;
    if ecg.len() != ip.len() {
        return Err(Error::LengthMismatch {
            ecg: ecg.len(),
            ip: ip.len(),
        });
    }
    let fs = infer_sample_rate(&t)?;
    SignalRecord::new(subject_id, position, fs, ecg, ip)
}

/// Largest accepted deviation of any time step from the median step.
pub const SAMPLING_JITTER_TOLERANCE: f64 = 0.01;

/// Sample rate from the median time step. Every step must lie within
/// ±1% of the median; a rate within 0.1% of a whole number of Hz snaps
/// to it.
pub fn infer_sample_rate(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::TooShort("fewer than two samples".into()));
    }
    let dt: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = dt.iter().position(|&d| d <= 0.0) {
        return Err(Error::Parse {
            line: i as u64 + 3,
            msg: "time stamps are not strictly increasing".into(),
        });
    }
    let med = crate::stats::median(&mut dt.clone());
    if let Some(i) = dt
        .iter()
        .position(|&d| (d - med).abs() > SAMPLING_JITTER_TOLERANCE * med)
    {
        return Err(Error::Parse {
            line: i as u64 + 3,
            msg: format!("irregular sampling: step {} s vs median {med} s", dt[i]),
        });
    }
    let rate = 1.0 / med;
    let snapped = rate.round();
    if snapped > 0.0 && (rate - snapped).abs() <= 1e-3 * rate {
        Ok(snapped)
    } else {
        Ok(rate)
    }
}

/// Writes a signal record in the signal CSV format.
pub fn write_signal_csv<W: Write>(record: &SignalRecord, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "ecg", "ip"])?;
    for (i, (e, p)) in record.ecg.iter().zip(&record.ip).enumerate() {
        let t = i as f64 / record.sample_rate_hz;
        w.write_record([format!("{t:?}"), format!("{e:?}"), format!("{p:?}")])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: Default::default(),
        source,
    })?;
    Ok(())
}

/// The ten parameter values of one recording, indexed by [`ParameterName`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamValues(pub [f64; 10]);

impl ParamValues {
    pub fn get(&self, name: ParameterName) -> f64 {
        self.0[name.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for name in ParameterName::ALL {
            name.validate(self.get(name))?;
        }
        Ok(())
    }
}

impl std::ops::Index<ParameterName> for ParamValues {
    type Output = f64;

    fn index(&self, name: ParameterName) -> &f64 {
        &self.0[name.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub subject_id: String,
    pub position: Position,
    pub params: ParamValues,
}

/// Subjects × positions × the ten parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterTable {
    rows: Vec<ParameterRow>,
    keys: BTreeSet<(String, Position)>,
}

impl ParameterTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = ParameterRow>) -> Result<Self> {
        let mut table = Self::new();
        for row in rows {
            table.push(row)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, row: ParameterRow) -> Result<()> {
        row.params.validate()?;
        let key = (row.subject_id.clone(), row.position);
        if self.keys.contains(&key) {
            return Err(Error::DuplicateKey {
                subject: row.subject_id,
                position: row.position.to_string(),
            });
        }
        self.keys.insert(key);
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ParameterRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn position_rows(&self, position: Position) -> impl Iterator<Item = &ParameterRow> {
        self.rows.iter().filter(move |r| r.position == position)
    }

    /// Column of one parameter for one position, in row order.
    pub fn column(&self, name: ParameterName, position: Position) -> Vec<f64> {
        self.position_rows(position).map(|r| r.params.get(name)).collect()
    }

    pub fn get(&self, subject_id: &str, position: Position) -> Option<&ParameterRow> {
        self.rows
            .iter()
            .find(|r| r.position == position && r.subject_id == subject_id)
    }

    /// Supine and standing values of one parameter for the subjects present
    /// in both positions, ordered by subject id.
    pub fn paired(&self, name: ParameterName) -> (Vec<String>, Vec<f64>, Vec<f64>) {
        let by_key: HashMap<(&str, Position), &ParameterRow> = self
            .rows
            .iter()
            .map(|r| ((r.subject_id.as_str(), r.position), r))
            .collect();
        let subjects: BTreeSet<&str> = self.rows.iter().map(|r| r.subject_id.as_str()).collect();
        let mut ids = Vec::new();
        let mut sup = Vec::new();
        let mut sta = Vec::new();
        for s in subjects {
            if let (Some(a), Some(b)) = (
                by_key.get(&(s, Position::Supine)),
                by_key.get(&(s, Position::Standing)),
            ) {
                ids.push(s.to_string());
                sup.push(a.params.get(name));
                sta.push(b.params.get(name));
            }
        }
        (ids, sup, sta)
    }
}

/// Maps source column headers onto canonical parameter names, for files
/// that use a different naming.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnAliases(pub HashMap<String, String>);

impl ColumnAliases {
    fn resolve<'a>(&'a self, header: &'a str) -> &'a str {
        self.0.get(header).map(String::as_str).unwrap_or(header)
    }
}

pub fn load_parameter_table(path: impl AsRef<Path>) -> Result<ParameterTable> {
    read_parameter_csv(open(path.as_ref())?, &ColumnAliases::default())
}

pub fn load_parameter_table_with_aliases(
    path: impl AsRef<Path>,
    aliases: &ColumnAliases,
) -> Result<ParameterTable> {
    read_parameter_csv(open(path.as_ref())?, aliases)
}

pub fn read_parameter_csv<R: Read>(reader: R, aliases: &ColumnAliases) -> Result<ParameterTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| aliases.resolve(h.trim()).to_string())
        .collect();

    let mut subject_col = None;
    let mut position_col = None;
    let mut param_cols: [Option<usize>; 10] = [None; 10];
    for (i, h) in header.iter().enumerate() {
        let slot = match h.as_str() {
            "subject_id" => &mut subject_col,
            "position" => &mut position_col,
            other => {
                let name: ParameterName = other
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("unknown column '{other}'")))?;
                &mut param_cols[name.index()]
            }
        };
        if slot.is_some() {
            return Err(Error::MalformedHeader(format!("column '{h}' appears twice")));
        }
        *slot = Some(i);
    }
    let subject_col =
        subject_col.ok_or_else(|| Error::MalformedHeader("missing column 'subject_id'".into()))?;
    let position_col =
        position_col.ok_or_else(|| Error::MalformedHeader("missing column 'position'".into()))?;
    let mut cols = [0usize; 10];
    for name in ParameterName::ALL {
        cols[name.index()] = param_cols[name.index()]
            .ok_or_else(|| Error::MalformedHeader(format!("missing column '{name}'")))?;
    }

    let mut table = ParameterTable::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let subject_id = rec[subject_col].trim().to_string();
        if subject_id.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty subject_id".into(),
            });
        }
        let position: Position = rec[position_col].parse().map_err(|e: Error| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let mut values = [0.0; 10];
        for name in ParameterName::ALL {
            let v = parse_decimal(&rec[cols[name.index()]]).map_err(|msg| Error::Parse {
                line,
                msg: format!("{name}: {msg}"),
            })?;
            values[name.index()] = v;
        }
        table.push(ParameterRow {
            subject_id,
            position,
            params: ParamValues(values),
        })?;
    }
    Ok(table)
}

/// Writes a parameter table with the canonical column order.
pub fn write_parameter_csv<W: Write>(table: &ParameterTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["subject_id", "position"];
    header.extend(ParameterName::ALL.iter().map(|p| p.as_str()));
    w.write_record(&header)?;
    for row in table.rows() {
        let mut rec = vec![row.subject_id.clone(), row.position.to_string()];
        rec.extend(row.params.0.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: Default::default(),
        source,
    })?;
    Ok(())
}

pub fn save_parameter_table(table: &ParameterTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_parameter_csv(table, file)
}
