//! Append-only CSV log of per-iteration loss components.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const HEADER: &str = "iteration,images_seen,level,alpha,loss_d,adv_d,r1,loss_g,loss_rec";

/// Losses and schedule position of one completed iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub images_seen: u64,
    pub level: usize,
    pub alpha: f64,
    pub loss_d: f64,
    pub adv_d: f64,
    pub r1: f64,
    pub loss_g: f64,
    pub loss_rec: f64,
}

impl IterationRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            self.iteration,
            self.images_seen,
            self.level,
            self.alpha,
            self.loss_d,
            self.adv_d,
            self.r1,
            self.loss_g,
            self.loss_rec
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return None;
        }
        Some(IterationRecord {
            iteration: f[0].parse().ok()?,
            images_seen: f[1].parse().ok()?,
            level: f[2].parse().ok()?,
            alpha: f[3].parse().ok()?,
            loss_d: f[4].parse().ok()?,
            adv_d: f[5].parse().ok()?,
            r1: f[6].parse().ok()?,
            loss_g: f[7].parse().ok()?,
            loss_rec: f[8].parse().ok()?,
        })
    }
}

pub struct MetricsLog {
    out: BufWriter<File>,
}

impl MetricsLog {
    /// Opens `path` for appending, writing the header if the file is new.
    pub fn open(path: &Path) -> io::Result<Self> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut out = BufWriter::new(file);
        if fresh {
            writeln!(out, "{HEADER}")?;
        }
        Ok(MetricsLog { out })
    }

    pub fn append(&mut self, rec: &IterationRecord) -> io::Result<()> {
        writeln!(self.out, "{}", rec.csv_line())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Reads every record of a metrics file, skipping the header.
pub fn read_log(path: &Path) -> io::Result<Vec<IterationRecord>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .skip(1)
        .filter_map(IterationRecord::parse)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_roundtrip() {
        let r = IterationRecord {
            iteration: 3,
            images_seen: 384,
            level: 1,
            alpha: 0.125,
            loss_d: 1.25,
            adv_d: 1.0,
            r1: 0.25,
            loss_g: 0.7,
            loss_rec: 3.5e-3,
        };
        assert_eq!(IterationRecord::parse(&r.csv_line()), Some(r));
    }

    #[test]
    fn append_keeps_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let r = IterationRecord {
            iteration: 1,
            images_seen: 2,
            level: 0,
            alpha: 1.0,
            loss_d: 0.0,
            adv_d: 0.0,
            r1: 0.0,
            loss_g: 0.0,
            loss_rec: 0.0,
        };
        for _ in 0..2 {
            let mut log = MetricsLog::open(&path).unwrap();
            log.append(&r).unwrap();
            log.flush().unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("iteration").count(), 1);
        assert_eq!(read_log(&path).unwrap().len(), 2);
    }
}
