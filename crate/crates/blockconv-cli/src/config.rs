//! Flat `key = value` run configuration shared by every subcommand, plus the
//! FNV-1a hash that stamps output artifacts with the exact configuration that
//! produced them.
//!
//! The format is plain text: one assignment per line, `#` starts a comment,
//! blank lines are ignored, no nesting. Unknown keys are rejected so typos
//! fail loudly. `print` emits every key in a fixed order with round-tripping
//! number formatting, and `parse(print(c)) == c` holds exactly.

use crate::error::CliError;
use blockconv::lista::TrainConfig;
use blockconv::scene::{AcquisitionConfig, RoiGrid};

/// Floating-point width used for tensor payloads written by commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Eight-byte floats (the computation width).
    F64,
    /// Four-byte floats, halving artifact size.
    F32,
}

impl Precision {
    /// Bytes per stored parameter.
    pub fn bytes(self) -> u64 {
        match self {
            Precision::F64 => 8,
            Precision::F32 => 4,
        }
    }
}

/// Every tunable the CLI understands, in one flat struct.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Number of array elements.
    pub n_c: usize,
    /// Element pitch in meters.
    pub d_c: f64,
    /// Pulse center frequency in Hz.
    pub f_c: f64,
    /// Gaussian envelope bandwidth factor in s^-2.
    pub alpha: f64,
    /// Sampling frequency in Hz.
    pub f_s: f64,
    /// Wave speed in m/s.
    pub c0: f64,
    /// Measurement noise level for simulation.
    pub noise_std: f64,
    /// Envelope cutoff governing the recording tail.
    pub envelope_eps: f64,
    /// Grid pixels across.
    pub n_x: usize,
    /// Grid pixels in depth.
    pub n_z: usize,
    /// Pixel width in meters (must equal `d_c` for model builds).
    pub d_x: f64,
    /// Pixel height in meters.
    pub d_z: f64,
    /// Standoff from the array to the first pixel row, in meters.
    pub d_s: f64,
    /// Penalty as a fraction of the back-projected data's sup-norm.
    pub lambda_frac: f64,
    /// Accelerated-solver iteration count.
    pub fista_iters: usize,
    /// Learned-solver layer count.
    pub k_layers: usize,
    /// Training epochs.
    pub epochs: usize,
    /// Fresh maps per epoch.
    pub maps_per_epoch: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// Minimum scatterers per synthetic map.
    pub k_min: usize,
    /// Maximum scatterers per synthetic map.
    pub k_max: usize,
    /// Lower scatterer amplitude bound.
    pub a_min: f64,
    /// Upper scatterer amplitude bound.
    pub a_max: f64,
    /// Noise level applied to training measurements.
    pub train_noise_std: f64,
    /// Seed for scatterer draws, noise, and training order.
    pub seed: u64,
    /// Worker threads; 0 keeps the runtime default.
    pub threads: usize,
    /// Payload width for written tensors.
    pub precision: Precision,
    /// Channel counts swept by the benchmark.
    pub bench_sizes: Vec<usize>,
    /// Timed repetitions per benchmark row.
    pub bench_reps: usize,
    /// Also write the full measurement volume when simulating.
    pub write_volume: bool,
    /// Memory budget for benchmark model builds; larger sizes get
    /// formula-only rows.
    pub mem_budget_bytes: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_c: 4,
            d_c: 5e-4,
            f_c: 5e6,
            alpha: 2.5e12,
            f_s: 2e7,
            c0: 6300.0,
            noise_std: 0.0,
            envelope_eps: 1e-3,
            n_x: 4,
            n_z: 4,
            d_x: 5e-4,
            d_z: 5e-4,
            d_s: 5e-3,
            lambda_frac: 1e-3,
            fista_iters: 200,
            k_layers: 5,
            epochs: 50,
            maps_per_epoch: 20,
            lr: 1e-4,
            k_min: 1,
            k_max: 3,
            a_min: 0.5,
            a_max: 1.5,
            train_noise_std: 0.0,
            seed: 0,
            threads: 0,
            precision: Precision::F64,
            bench_sizes: vec![2, 4, 8],
            bench_reps: 100,
            write_volume: false,
            mem_budget_bytes: 2 * 1024 * 1024 * 1024,
        }
    }
}

impl RunConfig {
    /// The acquisition geometry this config describes.
    pub fn acquisition(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            n_c: self.n_c,
            d_c: self.d_c,
            f_c: self.f_c,
            alpha: self.alpha,
            f_s: self.f_s,
            c0: self.c0,
            noise_std: self.noise_std,
            envelope_eps: self.envelope_eps,
        }
    }

    /// The pixel grid this config describes.
    pub fn roi(&self) -> RoiGrid {
        RoiGrid { n_x: self.n_x, n_z: self.n_z, d_x: self.d_x, d_z: self.d_z, d_s: self.d_s }
    }

    /// The training recipe this config describes.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            maps_per_epoch: self.maps_per_epoch,
            lr: self.lr,
            seed: self.seed,
            k_min: self.k_min,
            k_max: self.k_max,
            a_min: self.a_min,
            a_max: self.a_max,
            noise_std: self.train_noise_std,
        }
    }

    /// Canonical text form: every key, fixed order, one per line.
    pub fn print(&self) -> String {
        let sizes =
            self.bench_sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        let precision = match self.precision {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        };
        format!(
            "n_c = {}\nd_c = {}\nf_c = {}\nalpha = {}\nf_s = {}\nc0 = {}\n\
             noise_std = {}\nenvelope_eps = {}\nn_x = {}\nn_z = {}\nd_x = {}\n\
             d_z = {}\nd_s = {}\nlambda_frac = {}\nfista_iters = {}\n\
             k_layers = {}\nepochs = {}\nmaps_per_epoch = {}\nlr = {}\n\
             k_min = {}\nk_max = {}\na_min = {}\na_max = {}\ntrain_noise_std = {}\n\
             seed = {}\nthreads = {}\nprecision = {}\nbench_sizes = {}\n\
             bench_reps = {}\nwrite_volume = {}\nmem_budget_bytes = {}\n",
            self.n_c,
            self.d_c,
            self.f_c,
            self.alpha,
            self.f_s,
            self.c0,
            self.noise_std,
            self.envelope_eps,
            self.n_x,
            self.n_z,
            self.d_x,
            self.d_z,
            self.d_s,
            self.lambda_frac,
            self.fista_iters,
            self.k_layers,
            self.epochs,
            self.maps_per_epoch,
            self.lr,
            self.k_min,
            self.k_max,
            self.a_min,
            self.a_max,
            self.train_noise_std,
            self.seed,
            self.threads,
            precision,
            sizes,
            self.bench_reps,
            self.write_volume,
            self.mem_budget_bytes,
        )
    }

    /// Hash of the canonical text form, for artifact provenance.
    pub fn hash(&self) -> u64 {
        fnv1a_64(self.print().as_bytes())
    }

    /// Parses assignments on top of the defaults. Unknown and duplicate keys
    /// are rejected.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(CliError::Validation(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            seen.push(key.to_string());
            cfg.assign(key, value)
                .map_err(|m| CliError::Validation(format!("line {}: {m}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    fn assign(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value.parse::<T>().map_err(|_| format!("invalid value `{value}` for `{key}`"))
        }
        match key {
            "n_c" => self.n_c = num(key, value)?,
            "d_c" => self.d_c = num(key, value)?,
            "f_c" => self.f_c = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "f_s" => self.f_s = num(key, value)?,
            "c0" => self.c0 = num(key, value)?,
            "noise_std" => self.noise_std = num(key, value)?,
            "envelope_eps" => self.envelope_eps = num(key, value)?,
            "n_x" => self.n_x = num(key, value)?,
            "n_z" => self.n_z = num(key, value)?,
            "d_x" => self.d_x = num(key, value)?,
            "d_z" => self.d_z = num(key, value)?,
            "d_s" => self.d_s = num(key, value)?,
            "lambda_frac" => self.lambda_frac = num(key, value)?,
            "fista_iters" => self.fista_iters = num(key, value)?,
            "k_layers" => self.k_layers = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "maps_per_epoch" => self.maps_per_epoch = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "k_min" => self.k_min = num(key, value)?,
            "k_max" => self.k_max = num(key, value)?,
            "a_min" => self.a_min = num(key, value)?,
            "a_max" => self.a_max = num(key, value)?,
            "train_noise_std" => self.train_noise_std = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "precision" => {
                self.precision = match value {
                    "f64" => Precision::F64,
                    "f32" => Precision::F32,
                    _ => return Err(format!("invalid value `{value}` for `precision`")),
                }
            }
            "bench_sizes" => {
                let sizes: Result<Vec<usize>, _> =
                    value.split(',').map(|s| s.trim().parse::<usize>()).collect();
                self.bench_sizes =
                    sizes.map_err(|_| format!("invalid value `{value}` for `bench_sizes`"))?;
                if self.bench_sizes.is_empty() {
                    return Err("bench_sizes must list at least one size".into());
                }
            }
            "bench_reps" => self.bench_reps = num(key, value)?,
            "write_volume" => {
                self.write_volume = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(format!("invalid value `{value}` for `write_volume`")),
                }
            }
            "mem_budget_bytes" => self.mem_budget_bytes = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Reads and parses a config file.
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// 64-bit FNV-1a hash.
pub fn fnv1a_64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
