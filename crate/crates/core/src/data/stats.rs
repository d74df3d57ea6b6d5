use std::fmt::Write as _;

use super::Dataset;

/// Missing-reading summary of one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationMissing {
    pub id: String,
    /// fraction of missing entries over all timestamps and features
    pub rate: f64,
    pub per_feature: Vec<f64>,
    /// fraction of timestamps with every feature missing
    pub empty_rows: f64,
}

pub fn missing_summary(ds: &Dataset) -> Vec<StationMissing> {
    let d = ds.schema.d_in();
    let t = ds.n_steps();
    ds.stations
        .iter()
        .map(|s| {
            let mut per = vec![0usize; d];
            let mut empty = 0;
            for step in 0..t {
                let row = &s.observed[step * d..(step + 1) * d];
                for (j, &o) in row.iter().enumerate() {
                    if !o {
                        per[j] += 1;
                    }
                }
                if row.iter().all(|&o| !o) {
                    empty += 1;
                }
            }
            let total: usize = per.iter().sum();
            StationMissing {
                id: s.id.clone(),
                rate: total as f64 / (t * d) as f64,
                per_feature: per.iter().map(|&c| c as f64 / t as f64).collect(),
                empty_rows: empty as f64 / t as f64,
            }
        })
        .collect()
}

impl StationMissing {
    /// Delimited table with a header naming each feature.
    pub fn table(rows: &[StationMissing], features: &[String]) -> String {
        let mut out = String::from("station,missing_rate,empty_rows");
        for f in features {
            write!(out, ",{}", f).unwrap();
        }
        out.push('\n');
        for r in rows {
            write!(out, "{},{:.6},{:.6}", r.id, r.rate, r.empty_rows).unwrap();
            for v in &r.per_feature {
                write!(out, ",{:.6}", v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}
