//! The subcommand implementations. Every command reads a `RunConfig`, does
//! its work through the library, and writes artifacts that embed the config
//! hash and seed for provenance.
//!
//! Tensor record conventions: reflectivity maps are rank-2 `[n_z, n_x]`
//! (column-major, depth fastest) named `x_true` or `x_hat`; per-slice
//! measurements are rank-2 `[n_t, n_c - i_s]` named `slice_{i_s}`; a full
//! measurement volume is rank-3 `[n_t, n_c, n_c]` named `volume`; kernel
//! matrices are rank-2 `[n_t, row_len]`. Integers ride along as the bit
//! patterns of single f64 records under `meta.*`.

use crate::config::{Precision, RunConfig};
use crate::error::CliError;
use crate::tensor::{Payload, Record, TensorFile};
use blockconv::conv::{
    assemble_volume, build_kernel_bank, conv_forward, extract_slices, FmcVolume, KernelBank,
    SliceSet, SliceWeights,
};
use blockconv::lista::{
    generate_dataset, init_from_model, lista_forward, random_map, train, LayerParams, NetParams,
    TrainableMask,
};
use blockconv::scene::{AcquisitionConfig, ReflectivityMap, RoiGrid, Scatterer, ScattererList};
use blockconv::solver::{bc_fista, default_lambda, lipschitz_estimate, LassoProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::path::{Path, PathBuf};

/// Mixed into the seed for the penalty-probe draw so it never collides with
/// the training stream.
const PROBE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Derives a sibling path by appending a suffix to the full file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn provenance_line(cfg: &RunConfig) -> String {
    format!("config_fnv1a = 0x{:016x}, seed = {}", cfg.hash(), cfg.seed)
}

fn push_meta(tf: &mut TensorFile, cfg: &RunConfig) -> Result<(), CliError> {
    tf.push_meta_bits("meta.config_fnv1a_bits", cfg.hash())?;
    tf.push_meta_bits("meta.seed_bits", cfg.seed)
}

/// Writes real data honoring the configured payload width.
fn push_real(
    tf: &mut TensorFile,
    name: &str,
    dims: Vec<u64>,
    data: Vec<f64>,
    precision: Precision,
) -> Result<(), CliError> {
    match precision {
        Precision::F64 => tf.push_f64(name, dims, data),
        Precision::F32 => tf.push_f32(name, dims, data.iter().map(|&v| v as f32).collect()),
    }
}

/// Writes a CSV file: one `#` provenance line, a header row, then the rows.
fn write_csv(
    path: &Path,
    provenance: &str,
    header: &str,
    rows: &[String],
) -> Result<(), CliError> {
    let mut text = String::with_capacity(rows.len() * 32 + 64);
    text.push_str("# ");
    text.push_str(provenance);
    text.push('\n');
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn build_bank(cfg: &RunConfig) -> Result<KernelBank<f64>, CliError> {
    Ok(build_kernel_bank(&cfg.acquisition(), &cfg.roi())?)
}

/// Reads a scatterer list: one `i_x i_z a` triple per line, `#` comments.
pub fn read_scatterers(path: &Path) -> Result<ScattererList, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CliError::Validation(format!(
                "{}:{}: expected `i_x i_z a`",
                path.display(),
                lineno + 1
            )));
        }
        let parse_err = |what: &str| {
            CliError::Validation(format!(
                "{}:{}: invalid {what} `{}`",
                path.display(),
                lineno + 1,
                line
            ))
        };
        entries.push(Scatterer {
            i_x: fields[0].parse().map_err(|_| parse_err("column index"))?,
            i_z: fields[1].parse().map_err(|_| parse_err("depth index"))?,
            a: fields[2].parse().map_err(|_| parse_err("amplitude"))?,
        });
    }
    Ok(ScattererList { entries })
}

fn write_scatterers(path: &Path, list: &ScattererList) -> Result<(), CliError> {
    let mut text = String::from("# i_x i_z a\n");
    for s in &list.entries {
        text.push_str(&format!("{} {} {}\n", s.i_x, s.i_z, s.a));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Simulates measurements for a scatterer file (when given) or a random
/// sparse map. Writes the map, the per-slice data, optionally the full
/// volume, and a scatterer sidecar next to the output.
pub fn cmd_simulate(
    cfg: &RunConfig,
    scatterers_in: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let roi = cfg.roi();
    let bank = build_bank(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (map, list) = match scatterers_in {
        Some(p) => {
            let list = read_scatterers(p)?;
            (ReflectivityMap::from_scatterers(&roi, &list)?, list)
        }
        None => random_map(&mut rng, &roi, &cfg.train_config())?,
    };
    let clean = conv_forward(&bank, &map.data)?;
    let (slices, volume) = if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std)
            .map_err(|e| CliError::Validation(format!("invalid noise_std: {e}")))?;
        let mut vol = assemble_volume(&clean);
        for v in vol.data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        (extract_slices(&vol)?, vol)
    } else {
        let vol = assemble_volume(&clean);
        (clean, vol)
    };

    let mut tf = TensorFile::new();
    push_meta(&mut tf, cfg)?;
    push_real(
        &mut tf,
        "x_true",
        vec![roi.n_z as u64, roi.n_x as u64],
        map.data.clone(),
        cfg.precision,
    )?;
    for (i_s, s) in slices.slices.iter().enumerate() {
        push_real(
            &mut tf,
            &format!("slice_{i_s}"),
            vec![bank.n_t as u64, (bank.n_c - i_s) as u64],
            s.clone(),
            cfg.precision,
        )?;
    }
    if cfg.write_volume {
        push_real(
            &mut tf,
            "volume",
            vec![bank.n_t as u64, bank.n_c as u64, bank.n_c as u64],
            volume.data,
            cfg.precision,
        )?;
    }
    tf.write_to(out)?;
    write_scatterers(&sibling(out, ".scatterers.txt"), &list)
}

/// Builds the kernel bank and writes it as one record per slice.
pub fn cmd_build_kernels(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bank = build_bank(cfg)?;
    let mut tf = TensorFile::new();
    push_meta(&mut tf, cfg)?;
    for (i_s, k) in bank.kernels.iter().enumerate() {
        push_real(
            &mut tf,
            &format!("kernel_{i_s}"),
            vec![bank.n_t as u64, bank.row_len(i_s) as u64],
            k.clone(),
            cfg.precision,
        )?;
    }
    tf.write_to(out)
}

/// Loads measurements from a tensor file: per-slice records when present,
/// otherwise a full volume folded down to slices.
pub fn load_slices(tf: &TensorFile, bank: &KernelBank<f64>) -> Result<SliceSet<f64>, CliError> {
    if tf.get("slice_0").is_some() {
        let mut slices = Vec::with_capacity(bank.n_c);
        for i_s in 0..bank.n_c {
            let rec = tf.get(&format!("slice_{i_s}")).ok_or_else(|| {
                CliError::Validation(format!("missing record slice_{i_s} (of {})", bank.n_c))
            })?;
            let want = [bank.n_t as u64, (bank.n_c - i_s) as u64];
            if rec.dims != want {
                return Err(CliError::Validation(format!(
                    "slice_{i_s} has dims {:?}, expected {want:?}",
                    rec.dims
                )));
            }
            slices.push(rec.to_f64());
        }
        return Ok(SliceSet { n_t: bank.n_t, n_c: bank.n_c, slices });
    }
    if let Some(rec) = tf.get("volume") {
        let want = [bank.n_t as u64, bank.n_c as u64, bank.n_c as u64];
        if rec.dims != want {
            return Err(CliError::Validation(format!(
                "volume has dims {:?}, expected {want:?}",
                rec.dims
            )));
        }
        let vol = FmcVolume { n_t: bank.n_t, n_c: bank.n_c, data: rec.to_f64() };
        return Ok(extract_slices(&vol)?);
    }
    Err(CliError::Validation(
        "tensor file holds neither slice_0.. records nor a volume record".into(),
    ))
}

/// Runs the accelerated solver on loaded measurements; writes the
/// reconstruction plus an objective-trace CSV next to it.
pub fn cmd_fista(cfg: &RunConfig, data_in: &Path, out: &Path) -> Result<(), CliError> {
    let bank = build_bank(cfg)?;
    let data = TensorFile::read_from(data_in)?;
    let y = load_slices(&data, &bank)?;
    let weights = SliceWeights::reciprocity(bank.n_c);
    let lambda = default_lambda(&bank, &y, &weights, cfg.lambda_frac)?;
    let prob = LassoProblem { bank: &bank, y: &y, weights, lambda };
    let x0 = vec![0.0; bank.n_x * bank.n_z];
    let run = bc_fista(&prob, &x0, cfg.fista_iters, None)?;

    let mut tf = TensorFile::new();
    push_meta(&mut tf, cfg)?;
    tf.push_f64("meta.lambda", vec![1], vec![lambda])?;
    tf.push_f64("meta.l", vec![1], vec![run.l])?;
    push_real(
        &mut tf,
        "x_hat",
        vec![bank.n_z as u64, bank.n_x as u64],
        run.x,
        cfg.precision,
    )?;
    tf.write_to(out)?;

    let rows: Vec<String> =
        run.objective.iter().enumerate().map(|(i, o)| format!("{i},{o}")).collect();
    write_csv(&sibling(out, ".trace.csv"), &provenance_line(cfg), "iter,objective", &rows)
}

/// Serializes a network with its forward bank and geometry.
pub fn net_to_tensor(net: &NetParams, cfg: &RunConfig) -> Result<TensorFile, CliError> {
    let bank = &net.forward_bank;
    let mut tf = TensorFile::new();
    push_meta(&mut tf, cfg)?;
    for (name, v) in [
        ("meta.acq.n_c", bank.acq.n_c as f64),
        ("meta.acq.d_c", bank.acq.d_c),
        ("meta.acq.f_c", bank.acq.f_c),
        ("meta.acq.alpha", bank.acq.alpha),
        ("meta.acq.f_s", bank.acq.f_s),
        ("meta.acq.c0", bank.acq.c0),
        ("meta.acq.noise_std", bank.acq.noise_std),
        ("meta.acq.envelope_eps", bank.acq.envelope_eps),
        ("meta.roi.n_x", bank.roi.n_x as f64),
        ("meta.roi.n_z", bank.roi.n_z as f64),
        ("meta.roi.d_x", bank.roi.d_x),
        ("meta.roi.d_z", bank.roi.d_z),
        ("meta.roi.d_s", bank.roi.d_s),
        ("meta.k_layers", net.layers.len() as f64),
    ] {
        tf.push_f64(name, vec![1], vec![v])?;
    }
    for (i_s, k) in bank.kernels.iter().enumerate() {
        tf.push_f64(
            &format!("forward.kernel_{i_s}"),
            vec![bank.n_t as u64, bank.row_len(i_s) as u64],
            k.clone(),
        )?;
    }
    for (k, layer) in net.layers.iter().enumerate() {
        tf.push_f64(&format!("layer_{k}.theta"), vec![1], vec![layer.theta])?;
        tf.push_f64(&format!("layer_{k}.step"), vec![1], vec![layer.step])?;
        tf.push_f64(
            &format!("layer_{k}.agg_w"),
            vec![bank.n_c as u64],
            layer.agg_w.clone(),
        )?;
        for (i_s, g) in layer.g_kernels.iter().enumerate() {
            tf.push_f64(
                &format!("layer_{k}.g_{i_s}"),
                vec![bank.n_t as u64, bank.row_len(i_s) as u64],
                g.clone(),
            )?;
        }
    }
    Ok(tf)
}

fn meta_value(tf: &TensorFile, name: &str) -> Result<f64, CliError> {
    let rec = tf
        .get(name)
        .ok_or_else(|| CliError::Validation(format!("network file misses record `{name}`")))?;
    match &rec.payload {
        Payload::F64(v) if v.len() == 1 => Ok(v[0]),
        _ => Err(CliError::Validation(format!("record `{name}` is not a single f64"))),
    }
}

fn meta_count(tf: &TensorFile, name: &str) -> Result<usize, CliError> {
    let v = meta_value(tf, name)?;
    if v.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&v) {
        return Err(CliError::Validation(format!("record `{name}` is not a valid count: {v}")));
    }
    Ok(v as usize)
}

fn load_matrix(tf: &TensorFile, name: &str, want: [u64; 2]) -> Result<Vec<f64>, CliError> {
    let rec = tf
        .get(name)
        .ok_or_else(|| CliError::Validation(format!("network file misses record `{name}`")))?;
    if rec.dims != want {
        return Err(CliError::Validation(format!(
            "record `{name}` has dims {:?}, expected {want:?}",
            rec.dims
        )));
    }
    match &rec.payload {
        Payload::F64(v) => Ok(v.clone()),
        Payload::F32(_) => {
            Err(CliError::Validation(format!("record `{name}` must be stored as f64")))
        }
    }
}

/// Reconstructs a network from its tensor file, validating geometry and
/// shapes.
pub fn net_from_tensor(tf: &TensorFile) -> Result<NetParams, CliError> {
    let acq = AcquisitionConfig {
        n_c: meta_count(tf, "meta.acq.n_c")?,
        d_c: meta_value(tf, "meta.acq.d_c")?,
        f_c: meta_value(tf, "meta.acq.f_c")?,
        alpha: meta_value(tf, "meta.acq.alpha")?,
        f_s: meta_value(tf, "meta.acq.f_s")?,
        c0: meta_value(tf, "meta.acq.c0")?,
        noise_std: meta_value(tf, "meta.acq.noise_std")?,
        envelope_eps: meta_value(tf, "meta.acq.envelope_eps")?,
    };
    let roi = RoiGrid {
        n_x: meta_count(tf, "meta.roi.n_x")?,
        n_z: meta_count(tf, "meta.roi.n_z")?,
        d_x: meta_value(tf, "meta.roi.d_x")?,
        d_z: meta_value(tf, "meta.roi.d_z")?,
        d_s: meta_value(tf, "meta.roi.d_s")?,
    };
    acq.validate()?;
    roi.validate()?;
    let depth = meta_count(tf, "meta.k_layers")?;
    let first = tf
        .get("forward.kernel_0")
        .ok_or_else(|| CliError::Validation("network file misses forward.kernel_0".into()))?;
    if first.dims.len() != 2 {
        return Err(CliError::Validation("forward.kernel_0 is not rank-2".into()));
    }
    let n_t = first.dims[0] as usize;
    let mut bank = KernelBank {
        n_c: acq.n_c,
        n_x: roi.n_x,
        n_z: roi.n_z,
        n_t,
        acq,
        roi,
        kernels: Vec::with_capacity(0),
    };
    let mut kernels = Vec::with_capacity(bank.n_c);
    for i_s in 0..bank.n_c {
        kernels.push(load_matrix(
            tf,
            &format!("forward.kernel_{i_s}"),
            [n_t as u64, bank.row_len(i_s) as u64],
        )?);
    }
    bank.kernels = kernels;
    let mut layers = Vec::with_capacity(depth);
    for k in 0..depth {
        let theta = meta_value(tf, &format!("layer_{k}.theta"))?;
        let step = meta_value(tf, &format!("layer_{k}.step"))?;
        let agg = tf
            .get(&format!("layer_{k}.agg_w"))
            .ok_or_else(|| CliError::Validation(format!("missing layer_{k}.agg_w")))?;
        if agg.dims != [bank.n_c as u64] {
            return Err(CliError::Validation(format!(
                "layer_{k}.agg_w has dims {:?}, expected [{}]",
                agg.dims, bank.n_c
            )));
        }
        let mut g_kernels = Vec::with_capacity(bank.n_c);
        for i_s in 0..bank.n_c {
            g_kernels.push(load_matrix(
                tf,
                &format!("layer_{k}.g_{i_s}"),
                [n_t as u64, bank.row_len(i_s) as u64],
            )?);
        }
        layers.push(LayerParams { theta, step, g_kernels, agg_w: agg.to_f64() });
    }
    let net = NetParams { forward_bank: bank, layers, trainable: TrainableMask::default() };
    net.validate()?;
    Ok(net)
}

/// Initializes a network from the model, trains it on streaming synthetic
/// maps, and writes the network plus a per-epoch loss CSV.
pub fn cmd_lista_train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bank = build_bank(cfg)?;
    let weights = SliceWeights::reciprocity(bank.n_c);
    let est = lipschitz_estimate(&bank, &weights, 100, 1e-6, 0)?;
    if est.zero_operator {
        return Err(CliError::Numerical("operator is identically zero".into()));
    }
    let l0 = 1.05 * est.l;
    let train_cfg = cfg.train_config();
    // The penalty scale comes from a probe draw outside the training stream.
    let probe = generate_dataset(&bank, &train_cfg, cfg.seed ^ PROBE_SALT, 1)?;
    let lambda0 = default_lambda(&bank, &probe[0].1, &weights, cfg.lambda_frac)?;
    let mut net = init_from_model(&bank, lambda0, l0, cfg.k_layers)?;
    let trace = train(&mut net, &train_cfg)?;

    net_to_tensor(&net, cfg)?.write_to(out)?;
    let rows: Vec<String> =
        trace.iter().enumerate().map(|(e, l)| format!("{e},{l}")).collect();
    write_csv(&sibling(out, ".loss.csv"), &provenance_line(cfg), "epoch,mean_loss", &rows)
}

/// Loads a trained network and runs it on loaded measurements.
pub fn cmd_lista_infer(
    cfg: &RunConfig,
    net_in: &Path,
    data_in: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let net = net_from_tensor(&TensorFile::read_from(net_in)?);
    let net = net?;
    let bank = &net.forward_bank;
    if bank.n_c != cfg.n_c || bank.n_x != cfg.n_x || bank.n_z != cfg.n_z {
        return Err(CliError::Validation(format!(
            "network geometry (n_c = {}, {}x{} grid) differs from config (n_c = {}, {}x{})",
            bank.n_c, bank.n_x, bank.n_z, cfg.n_c, cfg.n_x, cfg.n_z
        )));
    }
    let data = TensorFile::read_from(data_in)?;
    let y = load_slices(&data, bank)?;
    let x_hat = lista_forward(&net, &y)?;

    let mut tf = TensorFile::new();
    push_meta(&mut tf, cfg)?;
    push_real(
        &mut tf,
        "x_hat",
        vec![bank.n_z as u64, bank.n_x as u64],
        x_hat,
        cfg.precision,
    )?;
    tf.write_to(out)
}

/// Renders a rank-2 record (preferring `x_hat`) to a binary PGM image.
pub fn cmd_render(tensor_in: &Path, image_out: &Path) -> Result<(), CliError> {
    let tf = TensorFile::read_from(tensor_in)?;
    let rec: &Record = tf
        .get("x_hat")
        .or_else(|| tf.records.iter().find(|r| r.dims.len() == 2))
        .ok_or_else(|| {
            CliError::Validation(format!(
                "{} holds no rank-2 record to render",
                tensor_in.display()
            ))
        })?;
    let n_z = rec.dims[0] as usize;
    let n_x = rec.dims[1] as usize;
    let mut comment = format!("source = {}", rec.name);
    if let Some(bits) = tf.meta_bits("meta.config_fnv1a_bits") {
        comment.push_str(&format!("\nconfig_fnv1a = 0x{bits:016x}"));
    }
    if let Some(bits) = tf.meta_bits("meta.seed_bits") {
        comment.push_str(&format!("\nseed = {bits}"));
    }
    let bytes = crate::pgm::render_pgm(&rec.to_f64(), n_z, n_x, Some(&comment))?;
    std::fs::write(image_out, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", image_out.display())))
}

/// Runs the storage/timing sweep and writes the benchmark CSV.
pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let rows = crate::bench::run_bench(cfg)?;
    let formatted: Vec<String> = rows.iter().map(crate::bench::BenchRow::to_csv_row).collect();
    write_csv(out, &provenance_line(cfg), crate::bench::CSV_HEADER, &formatted)
}
