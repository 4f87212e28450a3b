//! Append-only metrics log.
//!
//! One TSV row per value: `run_id  stage  metric  value  wall_clock`, where
//! `wall_clock` is seconds since the Unix epoch. Timestamps never decrease
//! within a log, even if the system clock steps back.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

pub const HEADER: &str = "run_id\tstage\tmetric\tvalue\twall_clock";

pub struct MetricsLog {
    file: File,
    path: PathBuf,
    run_id: String,
    last: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub run_id: String,
    pub stage: String,
    pub metric: String,
    pub value: f64,
    pub wall_clock: f64,
}

impl MetricsLog {
    /// Opens `path` for appending, writing the header if the file is new.
    pub fn open(path: &Path, run_id: &str) -> Result<Self> {
        let mut last = 0.0f64;
        let fresh = !path.exists() || std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len() == 0;
        if !fresh {
            for r in read_metrics(path)? {
                last = last.max(r.wall_clock);
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if fresh {
            writeln!(file, "{HEADER}").map_err(|e| Error::io(path, e))?;
        }
        Ok(Self {
            file,
            path: path.into(),
            run_id: run_id.into(),
            last,
        })
    }

    pub fn record(&mut self, stage: &str, metric: &str, value: f64) -> Result<()> {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        self.last = self.last.max(now);
        writeln!(self.file, "{}\t{stage}\t{metric}\t{value}\t{:.6}", self.run_id, self.last)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [run_id, stage, metric, value, wall] = f[..] else {
            return Err(Error::parse(path, i + 1, "expected 5 tab-separated fields"));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(path, i + 1, format!("bad number {s:?}")));
        out.push(MetricRecord {
            run_id: run_id.into(),
            stage: stage.into(),
            metric: metric.into(),
            value: num(value)?,
            wall_clock: num(wall)?,
        });
    }
    Ok(out)
}
