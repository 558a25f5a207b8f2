//! Rayleigh-fading instance generation and dataset files.
//!
//! Gains are drawn as `H = 10^(snr_db/10) * E` with `E ~ Exp(1)`, the
//! squared magnitude of a unit-variance complex Gaussian channel, then
//! SIC-sorted. Every sample derives its own RNG from `(seed, sample_id)`,
//! so generation is schedule-independent and byte-reproducible.
//!
//! File format: one JSON header line
//! `{"version":1,"N":..,"K":..,"size":..,"seed":..,"snr_db":..,"split":..}`
//! followed by one line per sample: the sample id, then N tab-separated
//! groups of K space-separated gains printed with 17 significant digits
//! (bit-exact round trip).

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noma::{sic_sort, NetworkInstance};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SNR_DB: f64 = 20.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset integrity error: {0}")]
    Integrity(String),
    #[error("unsupported dataset format version {0}")]
    UnsupportedVersion(u32),
}

/// Train/validation/test composition of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// Sample counts for train, validation and test, in file order.
    TrainValTest { split: [usize; 3] },
    TestOnly,
}

/// One row of the dataset table: problem size, sample count, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub n_subchannels: usize,
    pub k_per_subchannel: usize,
    pub size: usize,
    pub kind: DatasetKind,
    pub seed: u64,
    pub snr_db: f64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.size < 1 {
            return Err(DataError::InvalidSpec("size must be >= 1".into()));
        }
        if self.n_subchannels < 1 || self.k_per_subchannel < 1 {
            return Err(DataError::InvalidSpec("N and K must be >= 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(DataError::InvalidSpec("snr_db must be finite".into()));
        }
        if let DatasetKind::TrainValTest { split } = self.kind {
            if split.iter().sum::<usize>() != self.size {
                return Err(DataError::InvalidSpec(format!(
                    "split {:?} does not sum to size {}",
                    split, self.size
                )));
            }
            if split[0] == 0 {
                return Err(DataError::InvalidSpec("train split must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    size: usize,
    seed: u64,
    snr_db: f64,
    split: Option<[usize; 3]>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent RNG for one sample of one dataset.
pub fn instance_rng(seed: u64, sample_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(sample_id)))
}

/// Draws one channel realization: `n` subchannels of `k` SIC-sorted gains.
pub fn sample_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    snr_db: f64,
    sample_id: u64,
) -> NetworkInstance {
    assert!(n >= 1 && k >= 1, "N and K must be >= 1");
    let scale = 10f64.powf(snr_db / 10.0);
    let subchannels: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let gains: Vec<f64> = (0..k)
                .map(|_| {
                    // u in (0, 1): -ln(u) ~ Exp(1), strictly positive.
                    let mut u = rng.gen::<f64>();
                    while u == 0.0 {
                        u = rng.gen::<f64>();
                    }
                    scale * -u.ln()
                })
                .collect();
            sic_sort(&gains).expect("generated gains are positive and finite").0
        })
        .collect();
    NetworkInstance::new(sample_id, snr_db, subchannels)
        .expect("sampled gains satisfy instance invariants")
}

/// Materializes every sample of `spec`, in sample-id order.
pub fn generate_instances(spec: &DatasetSpec) -> Result<Vec<NetworkInstance>, DataError> {
    spec.validate()?;
    Ok((0..spec.size as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = instance_rng(spec.seed, id);
            sample_instance(
                &mut rng,
                spec.n_subchannels,
                spec.k_per_subchannel,
                spec.snr_db,
                id,
            )
        })
        .collect())
}

fn header_of(spec: &DatasetSpec) -> Header {
    Header {
        version: FORMAT_VERSION,
        n: spec.n_subchannels,
        k: spec.k_per_subchannel,
        size: spec.size,
        seed: spec.seed,
        snr_db: spec.snr_db,
        split: match spec.kind {
            DatasetKind::TrainValTest { split } => Some(split),
            DatasetKind::TestOnly => None,
        },
    }
}

/// Writes `spec` and `instances` to `path` in the line-delimited format.
pub fn save_dataset(
    path: &Path,
    spec: &DatasetSpec,
    instances: &[NetworkInstance],
) -> Result<(), DataError> {
    spec.validate()?;
    if instances.len() != spec.size {
        return Err(DataError::Integrity(format!(
            "{} instances for declared size {}",
            instances.len(),
            spec.size
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let header = serde_json::to_string(&header_of(spec)).expect("header serializes");
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for inst in instances {
        line.clear();
        line.push_str(&inst.sample_id().to_string());
        for gains in inst.subchannels() {
            line.push('\t');
            for (i, g) in gains.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{g:.16e}"));
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Generates and writes one file per named spec; returns the paths.
pub fn generate_datasets(
    specs: &[(String, DatasetSpec)],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, DataError> {
    for (i, (name, _)) in specs.iter().enumerate() {
        if specs[..i].iter().any(|(other, _)| other == name) {
            return Err(DataError::InvalidSpec(format!("duplicate dataset name {name}")));
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut paths = Vec::with_capacity(specs.len());
    for (name, spec) in specs {
        let instances = generate_instances(spec)?;
        let path = out_dir.join(format!("{name}.txt"));
        save_dataset(&path, spec, &instances)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Parses a dataset file back into its spec and instances.
pub fn load_dataset(path: &Path) -> Result<(DatasetSpec, Vec<NetworkInstance>), DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| DataError::Parse {
            line: 1,
            msg: "missing header line".into(),
        })??;
    let header: Header = serde_json::from_str(&header_line).map_err(|e| DataError::Parse {
        line: 1,
        msg: format!("bad header: {e}"),
    })?;
    if header.version != FORMAT_VERSION {
        return Err(DataError::UnsupportedVersion(header.version));
    }
    let spec = DatasetSpec {
        n_subchannels: header.n,
        k_per_subchannel: header.k,
        size: header.size,
        kind: match header.split {
            Some(split) => DatasetKind::TrainValTest { split },
            None => DatasetKind::TestOnly,
        },
        seed: header.seed,
        snr_db: header.snr_db,
    };
    spec.validate()
        .map_err(|e| DataError::Integrity(format!("header spec invalid: {e}")))?;

    let mut instances = Vec::with_capacity(spec.size);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let sample_id: u64 = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|e| DataError::Parse {
                line: line_no,
                msg: format!("bad sample id: {e}"),
            })?;
        let mut subchannels = Vec::with_capacity(spec.n_subchannels);
        for group in fields {
            let gains: Vec<f64> = group
                .split(' ')
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| DataError::Parse {
                        line: line_no,
                        msg: format!("bad gain {tok:?}: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            subchannels.push(gains);
        }
        if subchannels.len() != spec.n_subchannels
            || subchannels.iter().any(|g| g.len() != spec.k_per_subchannel)
        {
            return Err(DataError::Parse {
                line: line_no,
                msg: format!(
                    "expected {} groups of {} gains",
                    spec.n_subchannels, spec.k_per_subchannel
                ),
            });
        }
        let inst = NetworkInstance::new(sample_id, spec.snr_db, subchannels).map_err(|e| {
            DataError::Parse {
                line: line_no,
                msg: e.to_string(),
            }
        })?;
        instances.push(inst);
    }
    if instances.len() != spec.size {
        return Err(DataError::Integrity(format!(
            "header declares {} samples but file holds {}",
            spec.size,
            instances.len()
        )));
    }
    Ok((spec, instances))
}

/// Views of a loaded dataset according to its declared split.
pub fn split_slices<'a>(
    spec: &DatasetSpec,
    instances: &'a [NetworkInstance],
) -> (&'a [NetworkInstance], &'a [NetworkInstance], &'a [NetworkInstance]) {
    match spec.kind {
        DatasetKind::TrainValTest { split } => {
            let (a, rest) = instances.split_at(split[0]);
            let (b, c) = rest.split_at(split[1]);
            (a, b, c)
        }
        DatasetKind::TestOnly => (&[], &[], instances),
    }
}

/// The ten standard datasets: one 10,000-sample train/val/test set at
/// (N, K) = (10, 5) split 8000/1000/1000, and nine 1,000-sample test-only
/// sets covering N in {8, 10, 12} x K in {4, 5, 6}. Per-dataset seeds are
/// derived from `base_seed`.
pub fn standard_datasets(base_seed: u64, snr_db: f64) -> Vec<(String, DatasetSpec)> {
    let mut out = Vec::with_capacity(10);
    let sizes: [(usize, usize); 9] = [
        (10, 4),
        (10, 5),
        (10, 6),
        (8, 4),
        (8, 5),
        (8, 6),
        (12, 4),
        (12, 5),
        (12, 6),
    ];
    out.push((
        "ds1".to_string(),
        DatasetSpec {
            n_subchannels: 10,
            k_per_subchannel: 5,
            size: 10_000,
            kind: DatasetKind::TrainValTest {
                split: [8_000, 1_000, 1_000],
            },
            seed: splitmix64(base_seed ^ 1),
            snr_db,
        },
    ));
    for (i, (n, k)) in sizes.iter().enumerate() {
        out.push((
            format!("ds{}", i + 2),
            DatasetSpec {
                n_subchannels: *n,
                k_per_subchannel: *k,
                size: 1_000,
                kind: DatasetKind::TestOnly,
                seed: splitmix64(base_seed ^ (i as u64 + 2)),
                snr_db,
            },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;

    fn tiny_spec(size: usize) -> DatasetSpec {
        DatasetSpec {
            n_subchannels: 3,
            k_per_subchannel: 4,
            size,
            kind: DatasetKind::TestOnly,
            seed: 11,
            snr_db: DEFAULT_SNR_DB,
        }
    }

    #[test]
    fn monte_carlo_mean_matches_snr() {
        let mut rng = instance_rng(3, 0);
        let draws = 120_000;
        let mut sum = 0.0;
        for id in 0..draws {
            let inst = sample_instance(&mut rng, 1, 1, 20.0, id);
            sum += inst.gains(0)[0];
        }
        let mean = sum / draws as f64;
        assert!(
            (mean - 100.0).abs() < 2.0,
            "mean {mean} outside 100 +- 2%"
        );
    }

    #[test]
    fn instance_shape_single() {
        let mut rng = instance_rng(1, 0);
        let inst = sample_instance(&mut rng, 1, 1, 20.0, 0);
        assert_eq!(inst.num_subchannels(), 1);
        assert!(inst.gains(0)[0] > 0.0);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let draw = || {
            let mut rng = instance_rng(42, 7);
            sample_instance(&mut rng, 2, 3, 20.0, 7)
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn empirical_cdf_is_exponential() {
        // Kolmogorov-Smirnov distance between H / 10^(snr/10) and Exp(1).
        let spec = DatasetSpec {
            n_subchannels: 1,
            k_per_subchannel: 1,
            size: 100_000,
            kind: DatasetKind::TestOnly,
            seed: 5,
            snr_db: 20.0,
        };
        let mut normalized: Vec<f64> = generate_instances(&spec)
            .unwrap()
            .iter()
            .map(|inst| inst.gains(0)[0] / 100.0)
            .collect();
        normalized.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = normalized.len() as f64;
        let mut ks = 0.0f64;
        for (i, x) in normalized.iter().enumerate() {
            let cdf = 1.0 - (-x).exp();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            ks = ks.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempdir();
        let spec = tiny_spec(25);
        let instances = generate_instances(&spec).unwrap();
        let path = dir.join("rt.txt");
        save_dataset(&path, &spec, &instances).unwrap();
        let (spec2, loaded) = load_dataset(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(instances, loaded);
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let dir = tempdir();
        let specs = vec![("d".to_string(), tiny_spec(10))];
        let p1 = generate_datasets(&specs, &dir.join("a")).unwrap();
        let p2 = generate_datasets(&specs, &dir.join("b")).unwrap();
        let read = |p: &PathBuf| {
            let mut buf = Vec::new();
            File::open(p).unwrap().read_to_end(&mut buf).unwrap();
            buf
        };
        assert_eq!(read(&p1[0]), read(&p2[0]));
    }

    #[test]
    fn rejects_zero_size() {
        assert!(matches!(
            generate_instances(&tiny_spec(0)),
            Err(DataError::InvalidSpec(_))
        ));
    }

    #[test]
    fn rejects_duplicate_names() {
        let dir = tempdir();
        let specs = vec![
            ("same".to_string(), tiny_spec(2)),
            ("same".to_string(), tiny_spec(2)),
        ];
        assert!(matches!(
            generate_datasets(&specs, &dir),
            Err(DataError::InvalidSpec(_))
        ));
    }

    #[test]
    fn truncated_record_names_line() {
        let dir = tempdir();
        let spec = tiny_spec(3);
        let instances = generate_instances(&spec).unwrap();
        let path = dir.join("t.txt");
        save_dataset(&path, &spec, &instances).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut = &text[..text.len() - 30];
        let bad = dir.join("cut.txt");
        fs::write(&bad, cut).unwrap();
        match load_dataset(&bad) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn count_disagreement_is_integrity_error() {
        let dir = tempdir();
        let spec = tiny_spec(3);
        let instances = generate_instances(&spec).unwrap();
        let path = dir.join("c.txt");
        save_dataset(&path, &spec, &instances).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        let bad = dir.join("short.txt");
        fs::write(&bad, lines.join("\n")).unwrap();
        assert!(matches!(
            load_dataset(&bad),
            Err(DataError::Integrity(_))
        ));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempdir();
        let spec = tiny_spec(2);
        let instances = generate_instances(&spec).unwrap();
        let path = dir.join("v.txt");
        save_dataset(&path, &spec, &instances).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let bad = dir.join("vbad.txt");
        fs::write(&bad, text.replacen("\"version\":1", "\"version\":9", 1)).unwrap();
        assert!(matches!(
            load_dataset(&bad),
            Err(DataError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn standard_table_layout() {
        let specs = standard_datasets(7, DEFAULT_SNR_DB);
        assert_eq!(specs.len(), 10);
        assert_eq!(specs[0].1.size, 10_000);
        assert_eq!(
            specs[0].1.kind,
            DatasetKind::TrainValTest {
                split: [8_000, 1_000, 1_000]
            }
        );
        assert_eq!(specs[4].0, "ds5");
        assert_eq!(
            (specs[4].1.n_subchannels, specs[4].1.k_per_subchannel),
            (8, 4)
        );
        assert!(specs[1..]
            .iter()
            .all(|(_, s)| s.size == 1_000 && s.kind == DatasetKind::TestOnly));
    }

    #[test]
    fn loaded_samples_satisfy_invariants() {
        let spec = tiny_spec(50);
        for inst in generate_instances(&spec).unwrap() {
            for n in 0..inst.num_subchannels() {
                let g = inst.gains(n);
                assert!(g.iter().all(|&x| x > 0.0 && x.is_finite()));
                assert!(g.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    fn tempdir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "nomanet-data-test-{}-{}",
            std::process::id(),
            rand::random::<u32>()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }
}
