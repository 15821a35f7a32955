use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of every per-run CSV.
pub const RUN_CSV_HEADER: [&str; 5] = ["episode", "v_star", "v_pik", "regret", "cum_regret"];

/// Identifies one (environment, agent, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub env: String,
    pub agent: String,
    pub seed: u64,
    pub horizon: usize,
    pub episodes: u64,
}

impl RunMeta {
    /// File stem used for the run's CSV: `<env>__<agent>__seed<seed>`.
    pub fn file_stem(&self) -> String {
        format!("{}__{}__seed{}", self.env, self.agent, self.seed)
    }

    /// Inverse of [`file_stem`](Self::file_stem) for the identifying fields.
    pub fn parse_file_stem(stem: &str) -> Option<(String, String, u64)> {
        let (rest, seed) = stem.rsplit_once("__seed")?;
        let seed = seed.parse().ok()?;
        let (env, agent) = rest.split_once("__")?;
        Some((env.to_string(), agent.to_string(), seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRegret {
    pub episode: u64,
    pub v_star: f64,
    pub v_pik: f64,
    pub regret: f64,
    pub cum_regret: f64,
}

/// Receives per-episode regret rows as a run produces them.
pub trait RegretSink {
    fn record(&mut self, row: &EpisodeRegret) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<A: RegretSink, B: RegretSink> RegretSink for (A, B) {
    fn record(&mut self, row: &EpisodeRegret) -> Result<()> {
        self.0.record(row)?;
        self.1.record(row)
    }

    fn finish(&mut self) -> Result<()> {
        self.0.finish()?;
        self.1.finish()
    }
}

impl<S: RegretSink + ?Sized> RegretSink for &mut S {
    fn record(&mut self, row: &EpisodeRegret) -> Result<()> {
        (**self).record(row)
    }

    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

/// Per-episode exact regret of one run, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRecord {
    pub meta: RunMeta,
    pub rows: Vec<EpisodeRegret>,
}

impl RegretRecord {
    pub fn new(meta: RunMeta) -> Self {
        Self {
            meta,
            rows: Vec::new(),
        }
    }

    pub fn cum_regret(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cum_regret).collect()
    }

    pub fn final_cum_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Reads a run CSV written by [`CsvRegretWriter`].
    pub fn read_csv(path: impl AsRef<Path>, meta: RunMeta) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        if header.iter().ne(RUN_CSV_HEADER.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!(
                    "unexpected header {:?}, expected {}",
                    header.iter().collect::<Vec<_>>(),
                    RUN_CSV_HEADER.join(",")
                ),
            });
        }
        let mut rows = Vec::new();
        for row in reader.deserialize() {
            rows.push(row?);
        }
        Ok(Self { meta, rows })
    }
}

impl RegretSink for RegretRecord {
    fn record(&mut self, row: &EpisodeRegret) -> Result<()> {
        self.rows.push(*row);
        Ok(())
    }
}

/// Streams rows to a CSV file as they arrive.
pub struct CsvRegretWriter<W: Write> {
    writer: csv::Writer<W>,
}

impl CsvRegretWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufWriter::new(file))
    }
}

impl<W: Write> CsvRegretWriter<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(RUN_CSV_HEADER)?;
        Ok(Self { writer })
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
    }
}

impl<W: Write> RegretSink for CsvRegretWriter<W> {
    fn record(&mut self, row: &EpisodeRegret) -> Result<()> {
        self.writer.write_record([
            row.episode.to_string(),
            row.v_star.to_string(),
            row.v_pik.to_string(),
            row.regret.to_string(),
            row.cum_regret.to_string(),
        ])?;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::Csv(e.into()))
    }
}
