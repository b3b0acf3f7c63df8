use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};

use super::frame::{datetime_to_minutes, minutes_to_datetime, Column, ColumnSpec, Minutes, TimeSeriesFrame};
use crate::error::{Error, Result};

/// Column-to-group/unit mapping stored next to a data CSV.
///
/// Text format, one `key=value` pair per line, `#` starts a comment:
///
/// ```text
/// step_minutes=15
/// drybulb_temp=weather,degC,mean
/// R1_window=room,-,last
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    pub step_minutes: Option<u32>,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn from_frame(frame: &TimeSeriesFrame) -> Self {
        Schema {
            step_minutes: Some(frame.step_minutes()),
            columns: frame.specs(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::default();
        for (line, key, value) in parse_key_values(text)? {
            if key == "step_minutes" {
                let step = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad step_minutes '{value}'"),
                })?;
                schema.step_minutes = Some(step);
                continue;
            }
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            if parts.len() < 2 || parts.len() > 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected group,unit[,aggregation] for '{key}'"),
                });
            }
            let mut spec = ColumnSpec::new(key.clone(), parts[0].parse()?, parts[1]);
            if let Some(agg) = parts.get(2) {
                spec.aggregation = agg.parse()?;
            }
            if schema.get(&key).is_some() {
                return Err(Error::DuplicateColumn(key));
            }
            schema.columns.push(spec);
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Schema::parse(&read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# hybridtherm schema v1\n");
        if let Some(step) = self.step_minutes {
            out.push_str(&format!("step_minutes={step}\n"));
        }
        for c in &self.columns {
            out.push_str(&format!(
                "{}={},{},{}\n",
                c.name,
                c.group,
                c.unit,
                c.aggregation.as_str()
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
/// Returns (1-based line number, key, value).
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, got '{line}'"),
        })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

pub fn format_timestamp(minutes: Minutes) -> String {
    minutes_to_datetime(minutes).to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Option<Minutes> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(datetime_to_minutes(dt.with_timezone(&Utc)));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|naive| datetime_to_minutes(naive.and_utc()))
}

/// Reads a frame from CSV. The first column is `timestamp`; every other
/// header must be declared in `schema`. Unparseable or empty cells become
/// missing values.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<TimeSeriesFrame> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_csv(BufReader::new(File::open(path)?), schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<TimeSeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut header_iter = headers.iter();
    match header_iter.next() {
        Some(h) if h.trim() == "timestamp" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "first column must be 'timestamp'".into(),
            })
        }
    }
    let mut specs: Vec<ColumnSpec> = Vec::new();
    for name in header_iter {
        let name = name.trim();
        if specs.iter().any(|s| s.name == name) {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
        let spec = schema
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        specs.push(spec);
    }

    let mut timestamps = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); specs.len()];
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let ts = record.get(0).and_then(parse_timestamp).ok_or_else(|| Error::Parse {
            line,
            message: "unparseable timestamp".into(),
        })?;
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(Error::NonMonotonicTimestamps { row: timestamps.len() });
            }
        }
        timestamps.push(ts);
        for (j, col) in values.iter_mut().enumerate() {
            let v = record
                .get(j + 1)
                .and_then(|cell| cell.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .unwrap_or(f64::NAN);
            col.push(v);
        }
    }

    let step = schema
        .step_minutes
        .or_else(|| {
            timestamps
                .windows(2)
                .map(|w| (w[1] - w[0]) as u32)
                .min()
        })
        .unwrap_or(1);
    let columns = specs
        .into_iter()
        .zip(values)
        .map(|(spec, v)| Column::new(spec, v))
        .collect();
    TimeSeriesFrame::new(timestamps, step, columns)
}

/// Writes a frame as CSV. Floats use the shortest representation that
/// round-trips exactly, so output is bit-stable; missing cells are empty.
pub fn write_csv<W: Write>(frame: &TimeSeriesFrame, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    write!(w, "timestamp")?;
    for c in frame.columns() {
        write!(w, ",{}", c.name())?;
    }
    writeln!(w)?;
    for (i, &t) in frame.timestamps().iter().enumerate() {
        w.write_all(format_timestamp(t).as_bytes())?;
        for c in frame.columns() {
            let v = c.values[i];
            if v.is_nan() {
                w.write_all(b",")?;
            } else {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(frame: &TimeSeriesFrame, path: &Path) -> Result<()> {
    write_csv(frame, File::create(path)?)
}
