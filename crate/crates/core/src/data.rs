//! Labelled samples and the loaders that produce them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse `{value}`")]
    Parse { line: usize, value: String },
    #[error("dataset has zero feature dimension")]
    ZeroDimension,
    #[error("dataset is empty")]
    Empty,
    #[error("line {line}: feature index {index} exceeds dimension {dim}")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        dim: usize,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Sample { features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Per-feature shift and scale applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Rescales every feature to mean 0 and (population) variance 1. Constant
/// features are only centred.
pub fn standardize(samples: &mut [Sample]) -> Standardization {
    let dim = samples.first().map_or(0, Sample::dim);
    let n = samples.len() as f64;
    let mut means = vec![0.0; dim];
    for s in samples.iter() {
        for (m, v) in means.iter_mut().zip(&s.features) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; dim];
    for s in samples.iter() {
        for ((sd, v), m) in stds.iter_mut().zip(&s.features).zip(&means) {
            *sd += (v - m) * (v - m);
        }
    }
    stds.iter_mut().for_each(|sd| *sd = (*sd / n).sqrt());
    for s in samples.iter_mut() {
        for ((v, m), sd) in s.features.iter_mut().zip(&means).zip(&stds) {
            *v -= m;
            if *sd > 0.0 {
                *v /= sd;
            }
        }
    }
    Standardization { means, stds }
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Comma-separated rows, last column is the label. A first row containing any
/// non-numeric field is treated as a header.
pub fn parse_csv(text: &str) -> Result<Vec<Sample>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    let mut width = None;
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| DataError::Parse {
            line,
            value: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(_) => {
                let bad = rec.iter().find(|s| s.parse::<f64>().is_err()).unwrap_or("");
                return Err(DataError::Parse {
                    line,
                    value: bad.to_string(),
                });
            }
        };
        let expected = *width.get_or_insert(values.len());
        if values.len() != expected {
            return Err(DataError::Ragged {
                line,
                expected,
                found: values.len(),
            });
        }
        if expected < 2 {
            return Err(DataError::ZeroDimension);
        }
        let (features, label) = values.split_at(expected - 1);
        samples.push(Sample::new(features.to_vec(), label[0]));
    }
    if samples.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(samples)
}

pub fn load_csv(path: &Path) -> Result<Vec<Sample>, DataError> {
    parse_csv(&read(path)?)
}

/// `label idx:value ...` with 1-based indices. Missing indices are zero. The
/// dimension is `dim` when given, else the largest index seen.
pub fn parse_libsvm(text: &str, dim: Option<usize>) -> Result<Vec<Sample>, DataError> {
    let mut rows = Vec::new();
    let mut max_index = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.split('#').next().unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let mut tokens = raw.split_whitespace();
        let label_tok = tokens.next().unwrap_or("");
        let label: f64 = label_tok.parse().map_err(|_| DataError::Parse {
            line,
            value: label_tok.to_string(),
        })?;
        let mut entries = Vec::new();
        for tok in tokens {
            let parse_err = || DataError::Parse {
                line,
                value: tok.to_string(),
            };
            let (i, v) = tok.split_once(':').ok_or_else(parse_err)?;
            let i: usize = i.parse().map_err(|_| parse_err())?;
            let v: f64 = v.parse().map_err(|_| parse_err())?;
            if i == 0 {
                return Err(parse_err());
            }
            if let Some(d) = dim {
                if i > d {
                    return Err(DataError::IndexOutOfRange {
                        line,
                        index: i,
                        dim: d,
                    });
                }
            }
            max_index = max_index.max(i);
            entries.push((i - 1, v));
        }
        rows.push((label, entries));
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let dim = dim.unwrap_or(max_index);
    if dim == 0 {
        return Err(DataError::ZeroDimension);
    }
    Ok(rows
        .into_iter()
        .map(|(label, entries)| {
            let mut features = vec![0.0; dim];
            for (i, v) in entries {
                features[i] = v;
            }
            Sample::new(features, label)
        })
        .collect())
}

pub fn load_libsvm(path: &Path, dim: Option<usize>) -> Result<Vec<Sample>, DataError> {
    parse_libsvm(&read(path)?, dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTask {
    /// `y = ⟨ξ, w*⟩ + noise·N(0,1)`.
    Linear,
    /// `y ∈ {-1, +1}` with `P(y = 1) = σ(signal·⟨a, w*⟩)`.
    Logistic,
}

/// Seeded Gaussian design with a planted parameter `w* ~ N(0, I)`. Features
/// are drawn from `N(0, I/dim)`, so `‖ξ‖ ≈ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    pub task: SyntheticTask,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_signal")]
    pub signal: f64,
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.1
}

fn default_signal() -> f64 {
    3.0
}

impl SyntheticSpec {
    pub fn new(n: usize, dim: usize, task: SyntheticTask, seed: u64) -> Self {
        SyntheticSpec {
            n,
            dim,
            task,
            noise: default_noise(),
            signal: default_signal(),
            seed,
        }
    }

    pub fn generate(&self) -> Result<Vec<Sample>, DataError> {
        if self.n == 0 {
            return Err(DataError::InvalidSpec("n must be positive".into()));
        }
        if self.dim == 0 {
            return Err(DataError::ZeroDimension);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let planted: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let scale = 1.0 / (self.dim as f64).sqrt();
        let samples = (0..self.n)
            .map(|_| {
                let features: Vec<f64> = (0..self.dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let score: f64 = features.iter().zip(&planted).map(|(a, b)| a * b).sum();
                let label = match self.task {
                    SyntheticTask::Linear => {
                        score + self.noise * rng.sample::<f64, _>(StandardNormal)
                    }
                    SyntheticTask::Logistic => {
                        let p = 1.0 / (1.0 + (-self.signal * score).exp());
                        if rng.random::<f64>() < p {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                Sample::new(features, label)
            })
            .collect();
        Ok(samples)
    }
}

/// Writes samples as headerless CSV with the label in the last column.
pub fn to_csv(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        for v in &s.features {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&s.label.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libsvm_sparse_line() {
        let s = parse_libsvm("1 1:0.5 3:-2\n", Some(3)).unwrap();
        assert_eq!(s, vec![Sample::new(vec![0.5, 0.0, -2.0], 1.0)]);
        let inferred = parse_libsvm("-1 2:1\n+1 4:3\n", None).unwrap();
        assert_eq!(inferred[0].dim(), 4);
        assert_eq!(inferred[1].label, 1.0);
    }

    #[test]
    fn libsvm_errors() {
        assert!(matches!(
            parse_libsvm("1 5:1\n", Some(3)),
            Err(DataError::IndexOutOfRange { index: 5, .. })
        ));
        assert!(matches!(
            parse_libsvm("x 1:1\n", None),
            Err(DataError::Parse { .. })
        ));
        assert!(matches!(
            parse_libsvm("1 0:1\n", None),
            Err(DataError::Parse { .. })
        ));
        assert!(matches!(
            parse_libsvm("1\n", None),
            Err(DataError::ZeroDimension)
        ));
        assert!(matches!(parse_libsvm("\n\n", None), Err(DataError::Empty)));
    }

    #[test]
    fn csv_with_and_without_header() {
        let plain = parse_csv("1,2,3\n4,5,6\n").unwrap();
        assert_eq!(plain.len(), 2);
        assert_eq!(plain[1], Sample::new(vec![4.0, 5.0], 6.0));
        let headed = parse_csv("a,b,y\n1,2,3\n").unwrap();
        assert_eq!(headed, vec![Sample::new(vec![1.0, 2.0], 3.0)]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_csv("1,2,3\n4,5\n"),
            Err(DataError::Ragged { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv("1,2\n3,x\n"),
            Err(DataError::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_csv("1\n2\n"), Err(DataError::ZeroDimension)));
        assert!(matches!(parse_csv("a,b\n"), Err(DataError::Empty)));
    }

    #[test]
    fn body_fat_shaped_csv() {
        let mut text = String::new();
        for i in 0..252 {
            let row: Vec<String> = (0..15).map(|j| format!("{}", i * 15 + j)).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let s = parse_csv(&text).unwrap();
        assert_eq!(s.len(), 252);
        assert!(s.iter().all(|x| x.dim() == 14));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::new(1000, 22, SyntheticTask::Logistic, 5);
        let a = spec.generate().unwrap();
        assert_eq!(a, spec.generate().unwrap());
        assert_eq!(a.len(), 1000);
        assert!(a
            .iter()
            .all(|s| s.dim() == 22 && (s.label == 1.0 || s.label == -1.0)));
        let other = SyntheticSpec { seed: 6, ..spec }.generate().unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn csv_round_trip() {
        let spec = SyntheticSpec::new(20, 3, SyntheticTask::Linear, 1);
        let s = spec.generate().unwrap();
        assert_eq!(parse_csv(&to_csv(&s)).unwrap(), s);
    }

    #[test]
    fn standardization_moments() {
        let mut s = vec![
            Sample::new(vec![1.0, 5.0], 0.0),
            Sample::new(vec![3.0, 5.0], 0.0),
            Sample::new(vec![5.0, 5.0], 0.0),
        ];
        let st = standardize(&mut s);
        assert_eq!(st.means, vec![3.0, 5.0]);
        let col: Vec<f64> = s.iter().map(|x| x.features[0]).collect();
        let var = col.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|x| x.features[1] == 0.0));
    }
}
