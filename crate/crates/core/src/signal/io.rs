use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridGeometry, GridRecording, TrialMetadata, TrimPolicy};
use crate::error::{Error, Result};
use crate::signal::{Condition, FiberAxis};

/// JSON sidecar describing one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataFile {
    pub subject_id: String,
    pub mvc_percent: u32,
    pub condition: Condition,
    pub sampling_rate_hz: f64,
    pub rows: usize,
    pub cols: usize,
    pub ied_m: f64,
    #[serde(default = "default_missing_pads")]
    pub missing_pads: Vec<[usize; 2]>,
    #[serde(default)]
    pub trim: TrimPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_force_n: Option<f64>,
}

fn default_missing_pads() -> Vec<[usize; 2]> {
    GridGeometry::default()
        .missing_pads
        .iter()
        .map(|&(r, c)| [r, c])
        .collect()
}

impl MetadataFile {
    pub fn from_parts(geometry: &GridGeometry, meta: &TrialMetadata) -> Self {
        Self {
            subject_id: meta.subject_id.clone(),
            mvc_percent: meta.mvc_percent,
            condition: meta.condition,
            sampling_rate_hz: meta.sampling_rate_hz,
            rows: geometry.rows,
            cols: geometry.cols,
            ied_m: geometry.ied_m,
            missing_pads: geometry.missing_pads.iter().map(|&(r, c)| [r, c]).collect(),
            trim: meta.trim,
            target_force_n: meta.target_force_n,
        }
    }

    pub fn into_parts(self) -> Result<(GridGeometry, TrialMetadata)> {
        let geometry = GridGeometry {
            rows: self.rows,
            cols: self.cols,
            ied_m: self.ied_m,
            fiber_axis: FiberAxis::AlongColumns,
            missing_pads: self.missing_pads.iter().map(|p| (p[0], p[1])).collect(),
        };
        geometry.validate()?;
        let meta = TrialMetadata {
            subject_id: self.subject_id,
            mvc_percent: self.mvc_percent,
            condition: self.condition,
            sampling_rate_hz: self.sampling_rate_hz,
            target_force_n: self.target_force_n,
            trim: self.trim,
        };
        meta.validate()?;
        Ok((geometry, meta))
    }
}

pub fn parse_metadata(json: &str) -> Result<(GridGeometry, TrialMetadata)> {
    let file: MetadataFile =
        serde_json::from_str(json).map_err(|e| Error::InvalidMetadata(e.to_string()))?;
    file.into_parts()
}

enum Column {
    Emg(usize),
    Force,
}

fn parse_header(fields: &[&str], geometry: &GridGeometry) -> Result<Vec<Column>> {
    if fields.first().map(|s| s.trim()) != Some("t") {
        return Err(Error::MalformedFile("first header field must be `t`".into()));
    }
    let mut seen = vec![false; geometry.n_positions()];
    let mut columns = Vec::with_capacity(fields.len() - 1);
    let last = fields.len() - 1;
    for (i, raw) in fields.iter().enumerate().skip(1) {
        let name = raw.trim();
        if name == "force" {
            if i != last {
                return Err(Error::MalformedFile("`force` must be the last column".into()));
            }
            columns.push(Column::Force);
            continue;
        }
        let pos = name
            .strip_prefix("e_")
            .and_then(|rest| rest.split_once('_'))
            .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)));
        let Some((r, c)) = pos else {
            return Err(Error::MalformedFile(format!("unrecognised header field `{name}`")));
        };
        if r >= geometry.rows || c >= geometry.cols {
            return Err(Error::MetadataMismatch(format!(
                "column `{name}` lies outside the declared {}x{} grid",
                geometry.rows, geometry.cols
            )));
        }
        if geometry.is_missing(r, c) {
            return Err(Error::MetadataMismatch(format!(
                "column `{name}` is a pad declared missing"
            )));
        }
        let idx = geometry.channel_index(r, c);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::MalformedFile(format!("duplicate header field `{name}`")));
        }
        columns.push(Column::Emg(idx));
    }
    let n_emg = columns.iter().filter(|c| matches!(c, Column::Emg(_))).count();
    if n_emg != geometry.n_present() {
        return Err(Error::MetadataMismatch(format!(
            "metadata declares {} EMG channels, file has {n_emg}",
            geometry.n_present()
        )));
    }
    Ok(columns)
}

/// Parses trial CSV data against already-validated metadata.
pub fn parse_trial_csv<R: Read>(
    reader: R,
    geometry: GridGeometry,
    meta: TrialMetadata,
) -> Result<GridRecording> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.byte_records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::MalformedFile(format!("header: {e}"))),
        None => return Err(Error::MalformedFile("empty file".into())),
    };
    let header_fields = header
        .iter()
        .map(std::str::from_utf8)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::MalformedFile("header is not valid UTF-8".into()))?;
    let names: Vec<String> = header_fields.iter().map(|s| s.trim().to_string()).collect();
    let columns = parse_header(&header_fields, &geometry)?;

    let mut data: Vec<Vec<f64>> = vec![Vec::new(); geometry.n_positions()];
    let mut force = Vec::new();
    let mut start_time = None;
    for (line, rec) in records.enumerate() {
        let line = line + 2;
        let rec = rec.map_err(|e| Error::MalformedFile(format!("line {line}: {e}")))?;
        if rec.len() != names.len() {
            return Err(Error::MalformedFile(format!(
                "line {line}: expected {} fields, found {}",
                names.len(),
                rec.len()
            )));
        }
        for (i, field) in rec.iter().enumerate() {
            let text = std::str::from_utf8(field)
                .map_err(|_| Error::MalformedFile(format!("line {line}: invalid UTF-8")))?;
            let value: f64 = text.trim().parse().map_err(|_| {
                Error::MalformedFile(format!("line {line}: `{text}` is not a number"))
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteSample {
                    line,
                    column: names[i].clone(),
                });
            }
            match i {
                0 => {
                    start_time.get_or_insert(value);
                }
                _ => match columns[i - 1] {
                    Column::Emg(idx) => data[idx].push(value),
                    Column::Force => force.push(value),
                },
            }
        }
    }

    let n = data.iter().map(Vec::len).max().unwrap_or(0);
    let min_samples = (2.0 * meta.sampling_rate_hz).ceil() as usize;
    if n < min_samples {
        return Err(Error::MalformedFile(format!(
            "{n} samples is shorter than the 2 s minimum ({min_samples} samples)"
        )));
    }
    let has_force = columns.iter().any(|c| matches!(c, Column::Force));
    let channels = (0..geometry.cols)
        .flat_map(|c| (0..geometry.rows).map(move |r| (r, c)))
        .map(|(r, c)| {
            let idx = geometry.channel_index(r, c);
            (!geometry.is_missing(r, c)).then(|| std::mem::take(&mut data[idx]))
        })
        .collect();
    GridRecording::new(
        geometry,
        meta,
        channels,
        has_force.then_some(force),
        start_time.unwrap_or(0.0),
    )
}

/// Loads a trial CSV and its JSON sidecar.
pub fn load_trial(signal_path: &Path, meta_path: &Path) -> Result<GridRecording> {
    let json = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let (geometry, meta) = parse_metadata(&json)?;
    let file = fs::File::open(signal_path).map_err(|e| Error::io(signal_path, e))?;
    parse_trial_csv(std::io::BufReader::new(file), geometry, meta)
}

pub fn write_trial_csv<W: Write>(rec: &GridRecording, out: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    let geometry = &rec.geometry;
    let pads: Vec<(usize, usize)> = geometry.present_pads().collect();
    w.write_all(b"t")?;
    for &(r, c) in &pads {
        write!(w, ",e_{r}_{c}")?;
    }
    if rec.force().is_some() {
        w.write_all(b",force")?;
    }
    w.write_all(b"\n")?;
    let cols: Vec<&[f64]> = pads
        .iter()
        .map(|&(r, c)| rec.channel(r, c).expect("present pad"))
        .collect();
    let fs = rec.sampling_rate();
    for i in 0..rec.n_samples() {
        write!(w, "{}", rec.start_time_s + i as f64 / fs)?;
        for col in &cols {
            write!(w, ",{}", col[i])?;
        }
        if let Some(f) = rec.force() {
            write!(w, ",{}", f[i])?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes a trial as CSV plus JSON sidecar.
pub fn save_trial(rec: &GridRecording, signal_path: &Path, meta_path: &Path) -> Result<()> {
    let file = fs::File::create(signal_path).map_err(|e| Error::io(signal_path, e))?;
    write_trial_csv(rec, file).map_err(|e| Error::io(signal_path, e))?;
    let sidecar = MetadataFile::from_parts(&rec.geometry, &rec.meta);
    let mut json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Invariant(format!("metadata serialisation: {e}")))?;
    json.push('\n');
    fs::write(meta_path, json).map_err(|e| Error::io(meta_path, e))
}
