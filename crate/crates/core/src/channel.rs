//! PER-matrix channel models.
//!
//! A [`PerMatrix`] holds the packet error rate of every directed link in the
//! network. Node 0 is always the master; every other index is a slave. The
//! matrix may be asymmetric, but the diagonal is always zero.
//!
//! Two parametric generators provide synthetic networks: a ring where only
//! nodes one or two positions apart can hear each other, and a random-area
//! model where slaves are scattered over the unit square and link quality
//! falls off logistically with distance.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the master node in every matrix.
pub const MASTER: usize = 0;

/// Square matrix of per-link packet error rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerMatrix {
    node_count: usize,
    per: Vec<Vec<f64>>,
}

impl PerMatrix {
    /// Validates and wraps a row-major matrix.
    pub fn new(per: Vec<Vec<f64>>) -> Result<Self> {
        let n = per.len();
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        for (row, values) in per.iter().enumerate() {
            if values.len() != n {
                return Err(Error::NonSquare {
                    row,
                    found: values.len(),
                    expected: n,
                });
            }
            for (col, &value) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::OutOfRange { row, col, value });
                }
                if row == col && value != 0.0 {
                    return Err(Error::NonzeroDiagonal { index: row, value });
                }
            }
        }
        Ok(Self { node_count: n, per })
    }

    /// Matrix where every off-diagonal link has the same error rate.
    pub fn uniform(node_count: usize, per: f64) -> Result<Self> {
        let rows = (0..node_count)
            .map(|i| {
                (0..node_count)
                    .map(|j| if i == j { 0.0 } else { per })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Error rate of the directed link `from -> to`.
    #[inline]
    pub fn per(&self, from: usize, to: usize) -> f64 {
        self.per[from][to]
    }

    /// Probability that a single transmission on `from -> to` is received.
    #[inline]
    pub fn success(&self, from: usize, to: usize) -> f64 {
        1.0 - self.per[from][to]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.per
    }

    pub fn slaves(&self) -> impl Iterator<Item = usize> {
        1..self.node_count
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.node_count).all(|i| (0..i).all(|j| self.per[i][j] == self.per[j][i]))
    }

    /// Copy with one link's error rate replaced.
    pub fn with_link(&self, from: usize, to: usize, per: f64) -> Result<Self> {
        let mut rows = self.per.clone();
        rows[from][to] = per;
        Self::new(rows)
    }

    /// Serializes to the comma-separated text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.per {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                // `Display` for f64 is the shortest string that parses back to the same bits.
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the comma-separated text format. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    let field = field.trim();
                    field.parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("{field:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            node_count: usize,
            per: Vec<Vec<f64>>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        if doc.node_count != doc.per.len() {
            return Err(Error::NonSquare {
                row: doc.per.len(),
                found: doc.per.len(),
                expected: doc.node_count,
            });
        }
        Self::new(doc.per)
    }

    pub fn load(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match format {
            MatrixFormat::Text => Self::from_text(&text),
            MatrixFormat::Json => Self::from_json(&text),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
        let path = path.as_ref();
        let text = match format {
            MatrixFormat::Text => self.to_text(),
            MatrixFormat::Json => self.to_json()?,
        };
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk matrix encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Text,
    Json,
}

impl MatrixFormat {
    /// Guesses the format from a file extension; anything but `.json` is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => MatrixFormat::Json,
            _ => MatrixFormat::Text,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" | "csv" => Ok(MatrixFormat::Text),
            "json" => Ok(MatrixFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown matrix format {other:?}"
            ))),
        }
    }
}

pub const DEFAULT_RING_PER_ADJACENT: f64 = 0.1;
pub const DEFAULT_RING_PER_TWO_HOP: f64 = 0.6;
pub const DEFAULT_AREA_D50: f64 = 0.3;
pub const DEFAULT_AREA_WIDTH: f64 = 0.07;

/// Parameters of a channel model, as recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    Ring {
        node_count: usize,
        per_adjacent: f64,
        per_two_hop: f64,
    },
    RandArea {
        node_count: usize,
        d50: f64,
        width: f64,
        seed: u64,
    },
    File {
        path: String,
        format: MatrixFormat,
    },
}

impl ChannelSpec {
    pub fn ring(node_count: usize) -> Self {
        ChannelSpec::Ring {
            node_count,
            per_adjacent: DEFAULT_RING_PER_ADJACENT,
            per_two_hop: DEFAULT_RING_PER_TWO_HOP,
        }
    }

    pub fn rand_area(node_count: usize, seed: u64) -> Self {
        ChannelSpec::RandArea {
            node_count,
            d50: DEFAULT_AREA_D50,
            width: DEFAULT_AREA_WIDTH,
            seed,
        }
    }

    /// The five stock models: rings of 10 and 100 nodes and random areas of
    /// 20, 100 and 200 nodes (seeds 20, 100 and 200).
    pub fn defaults() -> Vec<(String, ChannelSpec)> {
        vec![
            ("Ring_10".into(), Self::ring(10)),
            ("Ring_100".into(), Self::ring(100)),
            ("RandArea_20".into(), Self::rand_area(20, 20)),
            ("RandArea_100".into(), Self::rand_area(100, 100)),
            ("RandArea_200".into(), Self::rand_area(200, 200)),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelSpec::Ring {
                node_count,
                per_adjacent,
                per_two_hop,
            } => {
                if node_count < 3 {
                    return Err(Error::InvalidSpec(format!(
                        "ring needs at least 3 nodes, got {node_count}"
                    )));
                }
                if !(0.0 <= per_adjacent && per_adjacent <= per_two_hop && per_two_hop <= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "ring requires 0 <= per_adjacent <= per_two_hop <= 1, got {per_adjacent} and {per_two_hop}"
                    )));
                }
                Ok(())
            }
            ChannelSpec::RandArea {
                node_count,
                d50,
                width,
                ..
            } => {
                if node_count < 2 {
                    return Err(Error::InvalidSpec(format!(
                        "rand-area needs at least 2 nodes, got {node_count}"
                    )));
                }
                if !(d50 > 0.0 && width > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "rand-area requires d50 > 0 and width > 0, got {d50} and {width}"
                    )));
                }
                Ok(())
            }
            ChannelSpec::File { .. } => Ok(()),
        }
    }

    pub fn build(&self) -> Result<PerMatrix> {
        match self {
            &ChannelSpec::Ring {
                node_count,
                per_adjacent,
                per_two_hop,
            } => generate_ring(node_count, per_adjacent, per_two_hop),
            &ChannelSpec::RandArea {
                node_count,
                d50,
                width,
                seed,
            } => generate_rand_area(node_count, d50, width, seed),
            ChannelSpec::File { path, format } => PerMatrix::load(path, *format),
        }
    }
}

/// Ring of `node_count` nodes. Neighbours one step apart get `per_adjacent`,
/// two steps apart `per_two_hop`, everything further is unreachable.
pub fn generate_ring(node_count: usize, per_adjacent: f64, per_two_hop: f64) -> Result<PerMatrix> {
    ChannelSpec::Ring {
        node_count,
        per_adjacent,
        per_two_hop,
    }
    .validate()?;
    let n = node_count;
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let diff = i.abs_diff(j);
                    match diff.min(n - diff) {
                        0 => 0.0,
                        1 => per_adjacent,
                        2 => per_two_hop,
                        _ => 1.0,
                    }
                })
                .collect()
        })
        .collect();
    PerMatrix::new(rows)
}

/// Logistic error rate at distance `dist`: 0.5 at `d50`, steepness set by `width`.
pub fn logistic_per(dist: f64, d50: f64, width: f64) -> f64 {
    (1.0 / (1.0 + (-(dist - d50) / width).exp())).clamp(0.0, 1.0)
}

/// Node positions used by [`generate_rand_area`]: the master at the centre of
/// the unit square, slaves uniformly at random.
pub fn rand_area_positions(node_count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(node_count);
    if node_count > 0 {
        pos.push((0.5, 0.5));
    }
    for _ in 1..node_count {
        pos.push((rng.gen::<f64>(), rng.gen::<f64>()));
    }
    pos
}

/// Random-area model: see [`rand_area_positions`] and [`logistic_per`].
pub fn generate_rand_area(node_count: usize, d50: f64, width: f64, seed: u64) -> Result<PerMatrix> {
    ChannelSpec::RandArea {
        node_count,
        d50,
        width,
        seed,
    }
    .validate()?;
    let pos = rand_area_positions(node_count, seed);
    let rows = (0..node_count)
        .map(|i| {
            (0..node_count)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                    logistic_per(dx.hypot(dy), d50, width)
                })
                .collect()
        })
        .collect();
    PerMatrix::new(rows)
}
