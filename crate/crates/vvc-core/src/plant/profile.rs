//! Time-series inputs to the simulator, loaded from CSV.
//!
//! Load profile header: `timestamp,pz_mw,pz_mvar,pi_mw,pi_mvar,pp_mw,pp_mvar,pe_kwh`.
//! HV profile header: `timestamp,kv`. Timestamps are ISO-8601. Rows may be
//! coarser than the simulation step; values are interpolated linearly and
//! clamped to the first/last row outside the covered span.

use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::LoadProfilePoint;

#[derive(Debug)]
pub struct ProfileError {
    pub path: Option<String>,
    pub message: String,
}

impl fmt::Display for ProfileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{p}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ProfileError {}

fn err(path: Option<&Path>, message: impl Into<String>) -> ProfileError {
    ProfileError {
        path: path.map(|p| p.display().to_string()),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
struct LoadRow {
    timestamp: DateTime<Utc>,
    pz_mw: f64,
    pz_mvar: f64,
    pi_mw: f64,
    pi_mvar: f64,
    pp_mw: f64,
    pp_mvar: f64,
    pe_kwh: f64,
}

#[derive(Debug, Deserialize)]
struct HvRow {
    timestamp: DateTime<Utc>,
    kv: f64,
}

/// Piecewise-linear load demand over time.
#[derive(Debug, Clone)]
pub struct LoadProfile {
    times: Vec<DateTime<Utc>>,
    points: Vec<LoadProfilePoint>,
}

impl LoadProfile {
    pub fn from_reader<R: Read>(reader: R, path: Option<&Path>) -> Result<Self, ProfileError> {
        let mut csv = csv::Reader::from_reader(reader);
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (i, row) in csv.deserialize::<LoadRow>().enumerate() {
            let row = row.map_err(|e| err(path, format!("row {}: {e}", i + 2)))?;
            if let Some(last) = times.last() {
                if row.timestamp <= *last {
                    return Err(err(
                        path,
                        format!("row {}: timestamps must be strictly increasing", i + 2),
                    ));
                }
            }
            // active demands and energy inflow cannot be negative; reactive
            // components may be (capacitive customers)
            if row.pz_mw < 0.0 || row.pi_mw < 0.0 || row.pp_mw < 0.0 || row.pe_kwh < 0.0 {
                return Err(err(
                    path,
                    format!("row {}: negative active demand or energy inflow", i + 2),
                ));
            }
            times.push(row.timestamp);
            points.push(LoadProfilePoint {
                pz_mw: row.pz_mw,
                pz_mvar: row.pz_mvar,
                pi_mw: row.pi_mw,
                pi_mvar: row.pi_mvar,
                pp_mw: row.pp_mw,
                pp_mvar: row.pp_mvar,
                pe_kwh: row.pe_kwh,
            });
        }
        if times.is_empty() {
            return Err(err(path, "load profile has no rows"));
        }
        Ok(Self { times, points })
    }

    pub fn from_path(path: &Path) -> Result<Self, ProfileError> {
        let file = std::fs::File::open(path).map_err(|e| err(Some(path), e.to_string()))?;
        Self::from_reader(file, Some(path))
    }

    pub fn span(&self) -> (DateTime<Utc>, DateTime<Utc>) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn sample(&self, t: DateTime<Utc>) -> LoadProfilePoint {
        match interpolation_index(&self.times, t) {
            Interp::Before => self.points[0],
            Interp::After => *self.points.last().unwrap(),
            Interp::At(i) => self.points[i],
            Interp::Between(i, frac) => {
                LoadProfilePoint::lerp(&self.points[i], &self.points[i + 1], frac)
            }
        }
    }
}

/// Piecewise-linear HV bus voltage over time.
#[derive(Debug, Clone)]
pub struct HvProfile {
    times: Vec<DateTime<Utc>>,
    kv: Vec<f64>,
}

impl HvProfile {
    pub fn from_reader<R: Read>(reader: R, path: Option<&Path>) -> Result<Self, ProfileError> {
        let mut csv = csv::Reader::from_reader(reader);
        let mut times = Vec::new();
        let mut kv = Vec::new();
        for (i, row) in csv.deserialize::<HvRow>().enumerate() {
            let row = row.map_err(|e| err(path, format!("row {}: {e}", i + 2)))?;
            if let Some(last) = times.last() {
                if row.timestamp <= *last {
                    return Err(err(
                        path,
                        format!("row {}: timestamps must be strictly increasing", i + 2),
                    ));
                }
            }
            times.push(row.timestamp);
            kv.push(row.kv);
        }
        if times.is_empty() {
            return Err(err(path, "HV profile has no rows"));
        }
        Ok(Self { times, kv })
    }

    pub fn from_path(path: &Path) -> Result<Self, ProfileError> {
        let file = std::fs::File::open(path).map_err(|e| err(Some(path), e.to_string()))?;
        Self::from_reader(file, Some(path))
    }

    pub fn span(&self) -> (DateTime<Utc>, DateTime<Utc>) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn sample(&self, t: DateTime<Utc>) -> f64 {
        match interpolation_index(&self.times, t) {
            Interp::Before => self.kv[0],
            Interp::After => *self.kv.last().unwrap(),
            Interp::At(i) => self.kv[i],
            Interp::Between(i, frac) => self.kv[i] + (self.kv[i + 1] - self.kv[i]) * frac,
        }
    }
}

enum Interp {
    Before,
    After,
    At(usize),
    Between(usize, f64),
}

fn interpolation_index(times: &[DateTime<Utc>], t: DateTime<Utc>) -> Interp {
    if t <= times[0] {
        return if t == times[0] { Interp::At(0) } else { Interp::Before };
    }
    if t >= *times.last().unwrap() {
        return Interp::After;
    }
    let i = match times.binary_search(&t) {
        Ok(i) => return Interp::At(i),
        Err(i) => i - 1,
    };
    let span = (times[i + 1] - times[i]).num_milliseconds() as f64;
    let into = (t - times[i]).num_milliseconds() as f64;
    Interp::Between(i, into / span)
}
