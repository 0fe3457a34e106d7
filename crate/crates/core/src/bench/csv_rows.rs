use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BenchError, BenchPoint, BenchResult};
use crate::kernels::{CostModel, StencilKind};
use crate::strategies::StrategyKind;
use crate::taskrt::Schedule;

pub const CSV_HEADER: &str = "dim,n,stencil,cost,strategy,threads,schedule,chunk,sweeps,rep,seconds,ns_per_cell_update,digest";

/// Repetition index, or the summary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    Index(usize),
    Median,
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rep::Index(i) => write!(f, "{i}"),
            Rep::Median => f.write_str("median"),
        }
    }
}

impl FromStr for Rep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "median" {
            return Ok(Rep::Median);
        }
        s.parse().map(Rep::Index).map_err(|_| format!("bad rep {s:?}"))
    }
}

mod text {
    use super::*;

    pub fn serialize<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: fmt::Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dim: usize,
    pub n: usize,
    #[serde(with = "text")]
    pub stencil: StencilKind,
    #[serde(with = "text")]
    pub cost: CostModel,
    #[serde(with = "text")]
    pub strategy: StrategyKind,
    pub threads: usize,
    #[serde(with = "text")]
    pub schedule: Schedule,
    pub chunk: usize,
    pub sweeps: usize,
    #[serde(with = "text")]
    pub rep: Rep,
    pub seconds: f64,
    pub ns_per_cell_update: f64,
    pub digest: String,
}

impl BenchRow {
    fn point(&self) -> BenchPoint {
        BenchPoint {
            dim: self.dim,
            n: self.n,
            kind: self.stencil,
            cost: self.cost,
            strategy: self.strategy,
            threads: self.threads,
            schedule: self.schedule,
            chunk: self.chunk,
            sweeps: self.sweeps,
        }
    }
}

impl BenchResult {
    /// One row per repetition followed by the median row. The summary digest
    /// is the common digest, or `mixed` when repetitions disagree.
    pub fn rows(&self) -> Vec<BenchRow> {
        let p = self.point;
        let row = |rep, seconds, ns, digest: &str| BenchRow {
            dim: p.dim,
            n: p.n,
            stencil: p.kind,
            cost: p.cost,
            strategy: p.strategy,
            threads: p.threads,
            schedule: p.schedule,
            chunk: p.chunk,
            sweeps: p.sweeps,
            rep,
            seconds,
            ns_per_cell_update: ns,
            digest: digest.to_owned(),
        };
        let ns = self.ns_per_cell_update();
        let mut rows: Vec<BenchRow> = self
            .seconds
            .iter()
            .zip(&ns)
            .zip(&self.digests)
            .enumerate()
            .map(|(i, ((&s, &ns), d))| row(Rep::Index(i), s, ns, d))
            .collect();
        rows.push(row(
            Rep::Median,
            self.median_seconds(),
            self.median_ns_per_cell_update(),
            self.stable_digest().unwrap_or("mixed"),
        ));
        rows
    }

    /// Regroups repetition rows by point, in first-seen order. Summary rows
    /// are derived data and skipped.
    pub fn from_rows(rows: &[BenchRow]) -> Vec<BenchResult> {
        let mut out: Vec<BenchResult> = Vec::new();
        for r in rows.iter().filter(|r| r.rep != Rep::Median) {
            let p = r.point();
            match out.iter_mut().find(|b| b.point == p) {
                Some(b) => {
                    b.seconds.push(r.seconds);
                    b.digests.push(r.digest.clone());
                }
                None => out.push(BenchResult {
                    point: p,
                    seconds: vec![r.seconds],
                    digests: vec![r.digest.clone()],
                }),
            }
        }
        out
    }
}

pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        for row in r.rows() {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Config(format!("unexpected CSV header {:?}", header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}
