//! Delimited dataset files: header `station_id,timestamp,<features...>`, one row per
//! (station, timestamp), an empty field marks a missing reading.

use std::collections::HashMap;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use super::schema::Schema;
use super::{Dataset, StationSeries};
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

/// Equally spaced timestamps from `start` through `end`, both inclusive.
pub fn time_grid(start: NaiveDateTime, end: NaiveDateTime, interval_minutes: u32) -> Vec<NaiveDateTime> {
    let step = Duration::minutes(interval_minutes as i64);
    let mut out = Vec::new();
    let mut t = start;
    while t <= end {
        out.push(t);
        t += step;
    }
    out
}

/// Reads a dataset and aligns every station to one grid spanning the first to the last
/// timestamp in the file. Rows absent from the file become fully missing rows.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let mut expected = vec!["station_id".to_string(), "timestamp".to_string()];
    expected.extend(schema.features.iter().cloned());
    if header != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header {:?} does not match schema columns {:?}", header, expected),
        });
    }
    let station_index: HashMap<&str, usize> =
        schema.stations.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let d = schema.d_in();
    let mut rows: Vec<(usize, NaiveDateTime, Vec<Option<f64>>, u64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        if rec.len() != d + 2 {
            return Err(err(format!("expected {} fields, got {}", d + 2, rec.len())));
        }
        let station = *station_index.get(&rec[0]).ok_or_else(|| err(format!("unknown station {:?}", &rec[0])))?;
        let ts = parse_timestamp(&rec[1]).ok_or_else(|| err(format!("bad timestamp {:?}", &rec[1])))?;
        let mut values = Vec::with_capacity(d);
        for (j, field) in rec.iter().skip(2).enumerate() {
            if field.is_empty() {
                values.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| err(format!("bad value {:?} for {}", field, schema.features[j])))?;
                if !v.is_finite() {
                    return Err(err(format!("non-finite value for {}", schema.features[j])));
                }
                values.push(Some(v));
            }
        }
        rows.push((station, ts, values, line));
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no data rows", path.display())));
    }
    let start = rows.iter().map(|r| r.1).min().unwrap();
    let end = rows.iter().map(|r| r.1).max().unwrap();
    let interval = schema.interval_minutes as i64;
    let timestamps = time_grid(start, end, schema.interval_minutes);
    let t = timestamps.len();
    let mut stations: Vec<StationSeries> = schema
        .stations
        .iter()
        .map(|s| StationSeries {
            id: s.id.clone(),
            lat: s.lat,
            lon: s.lon,
            values: vec![0.0; t * d],
            observed: vec![false; t * d],
        })
        .collect();
    let mut seen = vec![false; t * stations.len()];
    for (station, ts, values, line) in rows {
        let minutes = (ts - start).num_minutes();
        if (ts - start).num_seconds() % 60 != 0 || minutes % interval != 0 {
            return Err(Error::Schema(format!(
                "{}:{}: timestamp {} is off the {}-minute grid starting at {}",
                path.display(),
                line,
                ts,
                interval,
                start
            )));
        }
        let step = (minutes / interval) as usize;
        let slot = station * t + step;
        if seen[slot] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("duplicate row for station {} at {}", schema.stations[station].id, ts),
            });
        }
        seen[slot] = true;
        let s = &mut stations[station];
        for (j, v) in values.into_iter().enumerate() {
            if let Some(v) = v {
                s.values[step * d + j] = v;
                s.observed[step * d + j] = true;
            }
        }
    }
    let ds = Dataset { schema: schema.clone(), timestamps, stations };
    ds.validate()?;
    Ok(ds)
}

/// Writes every grid row of every station, so reading it back reproduces the dataset.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["station_id".to_string(), "timestamp".to_string()];
    header.extend(ds.schema.features.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let d = ds.schema.d_in();
    for s in &ds.stations {
        for (step, ts) in ds.timestamps.iter().enumerate() {
            let mut rec = vec![s.id.clone(), ts.format(TIMESTAMP_FORMAT).to_string()];
            for j in 0..d {
                let i = step * d + j;
                rec.push(if s.observed[i] { s.values[i].to_string() } else { String::new() });
            }
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { path: path.to_path_buf(), line, msg: e.to_string() }
}
