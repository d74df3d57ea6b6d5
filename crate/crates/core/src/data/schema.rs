use std::path::Path;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StationMeta {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

/// Dataset description, stored as `key=value` lines.
///
/// ```text
/// version=1
/// features=pm25,temperature
/// units=ug/m3,C
/// target=pm25
/// interval_minutes=60
/// station.s00=39.93,116.40
/// ```
///
/// Station order in the file fixes node order in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub version: u32,
    pub features: Vec<String>,
    pub units: Vec<String>,
    /// forecast targets, a subset of `features`
    pub targets: Vec<String>,
    pub interval_minutes: u32,
    pub stations: Vec<StationMeta>,
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl Schema {
    pub fn d_in(&self) -> usize {
        self.features.len()
    }

    pub fn d_out(&self) -> usize {
        self.targets.len()
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    /// Feature index of each target.
    pub fn target_indices(&self) -> Vec<usize> {
        self.targets
            .iter()
            .map(|t| self.features.iter().position(|f| f == t).expect("validated target"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema version {}", self.version)));
        }
        if self.features.is_empty() {
            return Err(Error::Schema("no features declared".into()));
        }
        if self.units.len() != self.features.len() {
            return Err(Error::Schema(format!(
                "{} units for {} features",
                self.units.len(),
                self.features.len()
            )));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(Error::Schema(format!("duplicate feature {}", f)));
            }
            if matches!(f.as_str(), "station_id" | "timestamp") {
                return Err(Error::Schema(format!("feature name {} is reserved", f)));
            }
        }
        if self.targets.is_empty() {
            return Err(Error::Schema("no target declared".into()));
        }
        if let Some(t) = self.targets.iter().find(|t| !self.features.contains(t)) {
            return Err(Error::Schema(format!("target {} is not a feature", t)));
        }
        if self.interval_minutes == 0 {
            return Err(Error::Schema("interval_minutes must be positive".into()));
        }
        if self.stations.is_empty() {
            return Err(Error::Schema("no stations declared".into()));
        }
        for (i, s) in self.stations.iter().enumerate() {
            if self.stations[..i].iter().any(|o| o.id == s.id) {
                return Err(Error::Schema(format!("duplicate station {}", s.id)));
            }
            if !(-90.0..=90.0).contains(&s.lat) || !(-180.0..=180.0).contains(&s.lon) {
                return Err(Error::Schema(format!("station {} has invalid coordinates", s.id)));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Schema> {
        let mut version = None;
        let mut features = None;
        let mut units = None;
        let mut targets = None;
        let mut interval = None;
        let mut stations = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: idx as u64 + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got {:?}", line)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "version" => version = Some(v.parse().map_err(|_| err(format!("bad version {:?}", v)))?),
                "features" => features = Some(list(v)),
                "units" => units = Some(list(v)),
                "target" => targets = Some(list(v)),
                "interval_minutes" => {
                    interval = Some(v.parse().map_err(|_| err(format!("bad interval {:?}", v)))?)
                }
                _ => {
                    let id = k.strip_prefix("station.").ok_or_else(|| err(format!("unknown key {}", k)))?;
                    let (lat, lon) = v.split_once(',').ok_or_else(|| err("station needs lat,lon".into()))?;
                    let lat = lat.trim().parse().map_err(|_| err(format!("bad latitude {:?}", lat)))?;
                    let lon = lon.trim().parse().map_err(|_| err(format!("bad longitude {:?}", lon)))?;
                    stations.push(StationMeta { id: id.to_string(), lat, lon });
                }
            }
        }
        let missing = |k: &str| Error::Schema(format!("{}: missing key {}", path.display(), k));
        let schema = Schema {
            version: version.ok_or_else(|| missing("version"))?,
            features: features.ok_or_else(|| missing("features"))?,
            units: units.ok_or_else(|| missing("units"))?,
            targets: targets.ok_or_else(|| missing("target"))?,
            interval_minutes: interval.ok_or_else(|| missing("interval_minutes"))?,
            stations,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "version={}\nfeatures={}\nunits={}\ntarget={}\ninterval_minutes={}\n",
            self.version,
            self.features.join(","),
            self.units.join(","),
            self.targets.join(","),
            self.interval_minutes
        );
        for s in &self.stations {
            out.push_str(&format!("station.{}={},{}\n", s.id, s.lat, s.lon));
        }
        out
    }

    pub fn load(path: &Path) -> Result<Schema> {
        Schema::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
