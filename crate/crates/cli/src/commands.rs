use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use gbmseg::config::PipelineConfig;
use gbmseg::conv::{convolve_direct, convolve_fft, ConvMode};
use gbmseg::dog::{build_bank, FilterBank};
use gbmseg::io::manifest::CASE_MANIFEST_NAME;
use gbmseg::io::{
    read_bank, read_checkpoint, read_features, read_label_file, read_scalar_volume, write_bank,
    write_checkpoint, write_features, write_labels, write_volume, CaseChannel, CaseManifest,
    Checkpoint, DType,
};
use gbmseg::metrics::{
    aggregate, histogram, read_report_csv, write_case_report, write_hist_csv, write_summary_csv,
};
use gbmseg::net::predict_volume;
use gbmseg::phantom::{generate, PhantomSpec};
use gbmseg::pipeline::{featurize, train_on_cases};
use gbmseg::volume::{Dims, MultiChannelVolume, Volume3D};
use gbmseg::{Error, Result};

use crate::{
    BenchArgs, Cli, Command, EvaluateArgs, FeaturesArgs, FiltersArgs, PhantomArgs, PredictArgs,
    ReportHistArgs, TrainArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let config = match cli.command.config_path() {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = cli.threads.or(config.threads) {
        if t == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Filters(a) => filters(a, config),
        Command::Features(a) => features(a, config),
        Command::Train(a) => train(a, config),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::ReportHist(a) => report_hist(a),
        Command::BenchConv(a) => bench_conv(a),
        Command::Phantom(a) => phantom(a),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn filters(a: FiltersArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(s) = a.support {
        config.dog.support = s;
    }
    if let Some(s) = a.sigmas {
        config.dog.sigmas = s;
    }
    if a.no_zero_dc {
        config.dog.zero_dc = false;
    }
    let bank = build_bank(&config.dog)?;
    write_bank(&bank, &a.out)?;
    eprintln!("wrote {} filters of {s}x{s}x{s} to {}", bank.len(), a.out.display(), s = bank.support());
    Ok(())
}

fn load_bank(path: Option<&PathBuf>, config: &PipelineConfig) -> Result<FilterBank> {
    match path.or(config.filters.as_ref()) {
        Some(dir) => read_bank(dir),
        None => build_bank(&config.dog),
    }
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::invalid(format!("cannot name a channel after {}", path.display())))
}

fn features(a: FeaturesArgs, config: PipelineConfig) -> Result<()> {
    let channels: Vec<(String, PathBuf)> = match (&a.case, &a.channels) {
        (Some(case), _) => CaseManifest::load(case)?
            .channels
            .into_iter()
            .map(|c| (c.name, c.path))
            .collect(),
        (None, Some(paths)) => paths
            .iter()
            .map(|p| Ok((stem(p)?, p.clone())))
            .collect::<Result<_>>()?,
        (None, None) => return Err(Error::invalid("give --channels or --case")),
    };
    let mut vols = Vec::with_capacity(channels.len());
    let mut names = Vec::with_capacity(channels.len());
    for (name, path) in channels {
        vols.push(read_scalar_volume(&path)?);
        names.push(name);
    }
    let image = MultiChannelVolume::new(vols, names)?;
    let bank = load_bank(a.bank.as_ref(), &config)?;
    let dtype = match a.dtype.as_deref() {
        Some(s) => s.parse::<DType>()?,
        None => config.feature_dtype,
    };
    if dtype == DType::U8 {
        return Err(Error::invalid("features must be stored as f32 or f64"));
    }
    let feats = featurize(&image, &bank)?;
    create_parent(&a.out)?;
    write_features(&feats, dtype, &a.out)?;
    eprintln!(
        "wrote {} features over {} voxels to {}",
        feats.feature_count(),
        feats.dims().len(),
        a.out.display()
    );
    Ok(())
}

/// Files in `dir` with one of `exts`, sorted by name.
fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && exts.contains(&ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reference labels for `case_id` under `dir`.
fn find_labels(dir: &Path, case_id: &str) -> Result<PathBuf> {
    for ext in ["lbl", "rvol", "nii"] {
        let p = dir.join(format!("{case_id}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    for manifest in [dir.join(case_id).join(CASE_MANIFEST_NAME), dir.join(CASE_MANIFEST_NAME)] {
        if manifest.is_file() {
            let m = CaseManifest::load(&manifest)?;
            if m.case_id == case_id {
                if let Some(l) = m.labels {
                    return Ok(l);
                }
            }
        }
    }
    Err(Error::invalid(format!(
        "no labels for case '{case_id}' in {}",
        dir.display()
    )))
}

fn train(a: TrainArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(e) = a.epochs {
        config.train.epochs = e;
    }
    if let Some(s) = a.seed {
        config.train.rng_seed = s;
    }
    config.train.validate()?;
    let out = a
        .out
        .or(config.checkpoint)
        .ok_or_else(|| Error::invalid("give --out or set paths.checkpoint in the config"))?;
    let files = list_files(&a.features_dir, &["feat"])?;
    if files.is_empty() {
        return Err(Error::invalid(format!(
            "no .feat files in {}",
            a.features_dir.display()
        )));
    }
    let mut cases = Vec::with_capacity(files.len());
    for f in &files {
        let id = stem(f)?;
        let feats = read_features(f)?;
        let labels = read_label_file(find_labels(&a.labels_dir, &id)?)?;
        cases.push((feats, labels));
    }
    let refs: Vec<_> = cases.iter().map(|(f, l)| (f, l)).collect();
    let outcome = train_on_cases(&refs, &config.sampling, &config.train)?;
    for (e, l) in outcome.loss_trace.iter().enumerate() {
        eprintln!("epoch {e}: loss {l:.6}");
    }
    create_parent(&out)?;
    write_checkpoint(
        &Checkpoint {
            params: outcome.params,
            train_config: Some(config.train),
            loss_trace: outcome.loss_trace,
        },
        &out,
    )
}

fn predict(a: PredictArgs) -> Result<()> {
    let ckpt = read_checkpoint(&a.model)?;
    let feats = read_features(&a.features)?;
    let expected = ckpt.params.feature_manifest();
    if !expected.is_empty() {
        if let Some((i, (want, got))) = expected
            .iter()
            .zip(feats.names())
            .enumerate()
            .find(|(_, (w, g))| w != g)
        {
            return Err(Error::invalid(format!(
                "{}: feature {i} is '{got}' but {} was trained on '{want}'",
                a.features.display(),
                a.model.display()
            )));
        }
    }
    let (labels, probs) = predict_volume(&ckpt.params, &feats)?;
    create_parent(&a.out)?;
    write_labels(&labels, &a.out)?;
    if let Some(p) = &a.probabilities {
        create_parent(p)?;
        write_volume(&probs, DType::F32, p)?;
    }
    Ok(())
}

fn summary_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".to_string());
    report.with_file_name(format!("{stem}.summary.csv"))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let preds = list_files(&a.pred_dir, &["lbl", "nii"])?;
    if preds.is_empty() {
        return Err(Error::invalid(format!(
            "no label files in {}",
            a.pred_dir.display()
        )));
    }
    let mut cases = Vec::with_capacity(preds.len());
    for p in &preds {
        let id = stem(p)?;
        if cases.iter().any(|(c, _)| c == &id) {
            return Err(Error::invalid(format!("case '{id}' has more than one prediction file")));
        }
        let pred = read_label_file(p)?;
        let ref_path = find_labels(&a.ref_dir, &id)?;
        let reference = read_label_file(&ref_path)?;
        let scores = gbmseg::metrics::evaluate_case(&pred, &reference).map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!(
                "case '{id}' ({} vs {}): {m}",
                p.display(),
                ref_path.display()
            )),
            other => other,
        })?;
        cases.push((id, scores));
    }
    let report = aggregate(cases)?;
    create_parent(&a.out)?;
    let mut buf = Vec::new();
    write_case_report(&mut buf, &report.cases)?;
    fs::write(&a.out, buf).map_err(|e| Error::io(&a.out, e))?;
    let spath = summary_path(&a.out);
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &report.summary).map_err(|e| Error::io(&spath, e))?;
    fs::write(&spath, buf).map_err(|e| Error::io(&spath, e))
}

fn report_hist(a: ReportHistArgs) -> Result<()> {
    let file = fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let rows = read_report_csv(BufReader::new(file)).map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", a.input.display()),
        },
        other => other,
    })?;
    let bins = histogram(&rows, a.bins)?;
    match &a.out {
        Some(path) => {
            create_parent(path)?;
            let mut buf = Vec::new();
            write_hist_csv(&mut buf, &bins).map_err(|e| Error::io(path, e))?;
            fs::write(path, buf).map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = std::io::stdout();
            write_hist_csv(stdout.lock(), &bins).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Deterministic pseudo-random test pattern in `[-0.5, 0.5)`.
fn pattern(dims: Dims, salt: u64) -> Volume3D {
    Volume3D::from_fn(dims, |x, y, z| {
        let mut h = (x as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ (z as u64).wrapping_mul(0x1656_67B1_9E37_79F9)
            ^ salt;
        h ^= h >> 29;
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 32;
        (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

fn bench_conv(a: BenchArgs) -> Result<()> {
    if a.repeats == 0 {
        return Err(Error::invalid("--repeats must be at least 1"));
    }
    if a.kernel_size % 2 == 0 {
        return Err(Error::invalid(format!("--kernel-size must be odd, got {}", a.kernel_size)));
    }
    let image = pattern(Dims::cube(a.image_size)?, 1);
    let kernel = pattern(Dims::cube(a.kernel_size)?, 2);
    let time = |f: &dyn Fn() -> Result<Volume3D>| -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..a.repeats {
            let t = Instant::now();
            std::hint::black_box(f()?);
            total += t.elapsed().as_secs_f64();
        }
        Ok(total / a.repeats as f64)
    };
    let fft = time(&|| convolve_fft(&image, &kernel, ConvMode::Same))?;
    let mut out = String::from("path,seconds\n");
    out.push_str(&format!("fft,{fft:.6}\n"));
    if !a.skip_direct {
        let direct = time(&|| convolve_direct(&image, &kernel, ConvMode::Same))?;
        out.push_str(&format!("direct,{direct:.6}\n"));
    }
    std::io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn parse_dims(s: &str) -> Result<Dims> {
    let parts: Vec<&str> = s.split('x').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::invalid(format!("--dims expects N or NXxNYxNZ, got {s:?}")))?;
    match nums[..] {
        [n] => Dims::cube(n),
        [x, y, z] => Dims::new(x, y, z),
        _ => Err(Error::invalid(format!("--dims expects N or NXxNYxNZ, got {s:?}"))),
    }
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let dims = parse_dims(&a.dims)?;
    let mut spec = PhantomSpec::for_dims(dims, a.seed);
    if let Some(s) = a.noise_sigma {
        spec.noise_sigma = s;
    }
    let (image, labels) = generate(&spec)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut channels = Vec::new();
    let (vols, names) = image.into_parts();
    for (vol, name) in vols.into_iter().zip(names) {
        let file = format!("{name}.rvol");
        let single = MultiChannelVolume::new(vec![vol], vec![name.clone()])?;
        write_volume(&single, DType::F64, a.out_dir.join(&file))?;
        channels.push(CaseChannel {
            name,
            path: PathBuf::from(file),
        });
    }
    write_labels(&labels, a.out_dir.join("labels.lbl"))?;
    let manifest = CaseManifest {
        case_id: a.case_id.unwrap_or_else(|| format!("p{}", a.seed)),
        channels,
        labels: Some(PathBuf::from("labels.lbl")),
        notes: vec![format!(
            "synthetic phantom, seed {}, dims {}, noise_sigma {}",
            a.seed, dims, spec.noise_sigma
        )],
    };
    manifest.save(a.out_dir.join(CASE_MANIFEST_NAME))
}
