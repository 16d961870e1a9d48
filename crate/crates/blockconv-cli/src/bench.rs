//! Storage and timing sweep: for each configured channel count the grid is
//! square with pixel spacing equal to the element pitch and the standoff
//! equal to the grid depth, storage for the dense and convolutional models is
//! computed in closed form, and — when the convolutional model fits the
//! memory budget — the accelerated solver and the learned network are timed
//! at matched iteration/layer counts over repeated runs (one warm-up run
//! excluded) on the same simulated dataset.

use crate::config::RunConfig;
use crate::error::CliError;
use blockconv::conv::{
    build_kernel_bank, conv_forward, storage_bytes, SliceWeights, StorageKind,
};
use blockconv::lista::{init_from_model, lista_forward, random_map};
use blockconv::scene::{required_samples, AcquisitionConfig, RoiGrid};
use blockconv::solver::{
    bc_fista_step, default_lambda, lipschitz_estimate, FistaState, LassoProblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// CSV header for benchmark rows.
pub const CSV_HEADER: &str = "n_c,n_x,n_z,n_t,dense_bytes,conv_bytes,ratio,timed,\
                              fista_max_s,fista_avg_s,fista_min_s,\
                              lista_max_s,lista_avg_s,lista_min_s";

/// Wall-clock statistics over the timed repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    /// Slowest repetition in seconds.
    pub max_s: f64,
    /// Mean over repetitions in seconds.
    pub avg_s: f64,
    /// Fastest repetition in seconds.
    pub min_s: f64,
}

impl Timing {
    fn from_samples(samples: &[f64]) -> Self {
        let max_s = samples.iter().fold(f64::MIN, |m, &v| m.max(v));
        let min_s = samples.iter().fold(f64::MAX, |m, &v| m.min(v));
        let avg_s = samples.iter().sum::<f64>() / samples.len() as f64;
        Self { max_s, avg_s, min_s }
    }
}

/// One benchmark sweep entry.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// Channel count (the grid is `n_c x n_c`).
    pub n_c: usize,
    /// Grid pixels across.
    pub n_x: usize,
    /// Grid pixels in depth.
    pub n_z: usize,
    /// Samples per A-scan.
    pub n_t: usize,
    /// Dense model bytes by formula.
    pub dense_bytes: u128,
    /// Convolutional model bytes by formula.
    pub conv_bytes: u128,
    /// dense_bytes / conv_bytes.
    pub ratio: f64,
    /// Whether this size was actually built and timed (false = the model
    /// exceeded the memory budget, so the row is formula-only).
    pub timed: bool,
    /// Accelerated-solver timing, when timed.
    pub fista: Option<Timing>,
    /// Learned-network timing, when timed.
    pub lista: Option<Timing>,
}

impl BenchRow {
    /// Formats one CSV row; formula-only rows leave the timing cells empty.
    pub fn to_csv_row(&self) -> String {
        let t = |v: Option<Timing>, f: fn(Timing) -> f64| match v {
            Some(t) => format!("{}", f(t)),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_c,
            self.n_x,
            self.n_z,
            self.n_t,
            self.dense_bytes,
            self.conv_bytes,
            self.ratio,
            self.timed,
            t(self.fista, |t| t.max_s),
            t(self.fista, |t| t.avg_s),
            t(self.fista, |t| t.min_s),
            t(self.lista, |t| t.max_s),
            t(self.lista, |t| t.avg_s),
            t(self.lista, |t| t.min_s),
        )
    }
}

/// The geometry one sweep entry measures: square grid at the element pitch,
/// standoff equal to the grid's depth extent.
pub fn bench_geometry(cfg: &RunConfig, n_c: usize) -> (AcquisitionConfig, RoiGrid) {
    let acq = AcquisitionConfig { n_c, ..cfg.acquisition() };
    let roi = RoiGrid {
        n_x: n_c,
        n_z: n_c,
        d_x: cfg.d_c,
        d_z: cfg.d_c,
        d_s: n_c as f64 * cfg.d_c,
    };
    (acq, roi)
}

/// Runs the sweep.
pub fn run_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    if cfg.bench_reps < 1 {
        return Err(CliError::Validation("bench_reps must be at least 1".into()));
    }
    if cfg.bench_sizes.is_empty() {
        return Err(CliError::Validation("bench_sizes must list at least one size".into()));
    }
    let mut rows = Vec::with_capacity(cfg.bench_sizes.len());
    for &n_c in &cfg.bench_sizes {
        if n_c < 1 {
            return Err(CliError::Validation("bench sizes must be at least 1".into()));
        }
        let (acq, roi) = bench_geometry(cfg, n_c);
        let n_t = required_samples(&acq, &roi);
        let bpp = cfg.precision.bytes();
        let dense_bytes = storage_bytes(StorageKind::Dense, &acq, &roi, bpp);
        let conv_bytes = storage_bytes(StorageKind::Conv, &acq, &roi, bpp);
        let ratio = dense_bytes as f64 / conv_bytes as f64;
        // The working set is the double-precision bank plus same-order
        // buffers; gate on the bank's f64 footprint.
        let build_bytes = storage_bytes(StorageKind::Conv, &acq, &roi, 8);
        let mut row = BenchRow {
            n_c,
            n_x: roi.n_x,
            n_z: roi.n_z,
            n_t,
            dense_bytes,
            conv_bytes,
            ratio,
            timed: build_bytes <= cfg.mem_budget_bytes as u128,
            fista: None,
            lista: None,
        };
        if row.timed {
            let (fista, lista) = time_solvers(cfg, &acq, &roi)?;
            row.fista = Some(fista);
            row.lista = Some(lista);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn time_solvers(
    cfg: &RunConfig,
    acq: &AcquisitionConfig,
    roi: &RoiGrid,
) -> Result<(Timing, Timing), CliError> {
    let bank = build_kernel_bank(acq, roi)?;
    let weights = SliceWeights::reciprocity(bank.n_c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Clamp the scatterer recipe to the sweep grid so tiny sizes still run.
    let mut recipe = cfg.train_config();
    recipe.k_max = recipe.k_max.min(roi.n_pixels());
    recipe.k_min = recipe.k_min.min(recipe.k_max);
    let (map, _) = random_map(&mut rng, roi, &recipe)?;
    let y = conv_forward(&bank, &map.data)?;
    let est = lipschitz_estimate(&bank, &weights, 100, 1e-6, 0)?;
    if est.zero_operator {
        return Err(CliError::Numerical("operator is identically zero".into()));
    }
    let l = 1.05 * est.l;
    let lambda = default_lambda(&bank, &y, &weights, cfg.lambda_frac)?;
    let prob = LassoProblem { bank: &bank, y: &y, weights: weights.clone(), lambda };
    let net = init_from_model(&bank, lambda, l, cfg.k_layers)?;
    let n = bank.n_x * bank.n_z;

    let run_fista = || -> Result<Vec<f64>, CliError> {
        let mut state = FistaState::new(vec![0.0; n], l);
        for _ in 0..cfg.k_layers {
            bc_fista_step(&prob, &mut state)?;
        }
        Ok(state.x)
    };
    let run_lista = || -> Result<Vec<f64>, CliError> { Ok(lista_forward(&net, &y)?) };

    // One warm-up each, excluded from the statistics.
    std::hint::black_box(run_fista()?);
    std::hint::black_box(run_lista()?);

    let mut fista_samples = Vec::with_capacity(cfg.bench_reps);
    let mut lista_samples = Vec::with_capacity(cfg.bench_reps);
    for _ in 0..cfg.bench_reps {
        let t0 = Instant::now();
        std::hint::black_box(run_fista()?);
        fista_samples.push(t0.elapsed().as_secs_f64());
    }
    for _ in 0..cfg.bench_reps {
        let t0 = Instant::now();
        std::hint::black_box(run_lista()?);
        lista_samples.push(t0.elapsed().as_secs_f64());
    }
    Ok((Timing::from_samples(&fista_samples), Timing::from_samples(&lista_samples)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> RunConfig {
        RunConfig {
            bench_sizes: vec![1, 2, 3],
            bench_reps: 2,
            k_layers: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn sweep_produces_one_row_per_size_with_matching_storage() {
        let cfg = quick_cfg();
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, &n_c) in rows.iter().zip(&cfg.bench_sizes) {
            assert_eq!(row.n_c, n_c);
            assert_eq!((row.n_x, row.n_z), (n_c, n_c));
            let (acq, roi) = bench_geometry(&cfg, n_c);
            assert_eq!(
                row.dense_bytes,
                storage_bytes(StorageKind::Dense, &acq, &roi, cfg.precision.bytes())
            );
            assert_eq!(
                row.conv_bytes,
                storage_bytes(StorageKind::Conv, &acq, &roi, cfg.precision.bytes())
            );
            assert!(row.timed);
            let f = row.fista.unwrap();
            assert!(f.min_s <= f.avg_s && f.avg_s <= f.max_s);
            assert!(f.min_s > 0.0);
            let l = row.lista.unwrap();
            assert!(l.min_s <= l.avg_s && l.avg_s <= l.max_s);
        }
    }

    #[test]
    fn ratio_column_grows_with_channel_count() {
        let cfg = RunConfig { bench_sizes: vec![2, 4, 8, 16], ..quick_cfg() };
        let rows = run_bench(&RunConfig { bench_reps: 1, ..cfg }).unwrap();
        for pair in rows.windows(2) {
            assert!(
                pair[1].ratio > pair[0].ratio,
                "dense/conv ratio should grow: {} then {}",
                pair[0].ratio,
                pair[1].ratio
            );
        }
    }

    #[test]
    fn rows_over_the_budget_are_formula_only() {
        let cfg = RunConfig { mem_budget_bytes: 1, ..quick_cfg() };
        let rows = run_bench(&cfg).unwrap();
        for row in &rows {
            assert!(!row.timed);
            assert!(row.fista.is_none() && row.lista.is_none());
            assert!(row.dense_bytes > 0 && row.conv_bytes > 0);
            let csv = row.to_csv_row();
            let cells: Vec<&str> = csv.split(',').collect();
            assert_eq!(cells.len(), 14);
            assert!(cells[8..].iter().all(|c| c.is_empty()));
        }
    }

    #[test]
    fn csv_rows_have_the_header_arity() {
        let cfg = RunConfig { bench_sizes: vec![2], bench_reps: 1, ..quick_cfg() };
        let rows = run_bench(&cfg).unwrap();
        let header_cols = CSV_HEADER.split(',').count();
        for row in &rows {
            assert_eq!(row.to_csv_row().split(',').count(), header_cols);
        }
    }

    #[test]
    fn bad_sweep_configs_are_rejected() {
        assert!(run_bench(&RunConfig { bench_reps: 0, ..quick_cfg() }).is_err());
        assert!(run_bench(&RunConfig { bench_sizes: vec![0], ..quick_cfg() }).is_err());
    }
}
