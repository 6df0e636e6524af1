use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use magdiff::experiment::{detect_shift, required_layers, run_grid, GridInputs};
use magdiff::io::{
    self, is_feature_blob, load_network, manifest_path, parse_feature_blob, parse_idx,
    read_summaries, save_network, write_atomic, write_idx_images, write_report_csv,
    write_summaries, ExperimentConfig, IdxData, ImageSplit, MnistFiles, ReportRow, SummaryFile,
    TrainingMetadata, XAxis,
};
use magdiff::nn::{train_sgd, TrainConfig};
use magdiff::shifts::{apply_shift, Intensity, ShiftFamily, ShiftSpec};
use magdiff::stats::PowerMode;
use magdiff::{mean_graph_summaries, Activation, FeatureKind, LabeledSet, Network, Tensor};

use crate::{DetectArgs, FeatureArg, PowerGridArgs, ShiftArgs, SummariesArgs, TrainArgs};

fn parse_arch(s: &str) -> anyhow::Result<Vec<usize>> {
    let sizes = s
        .split('-')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("invalid architecture '{s}' (expected e.g. 784-128-10)"))?;
    if sizes.len() < 2 {
        bail!("architecture '{s}' needs at least an input and an output size");
    }
    Ok(sizes)
}

fn check_data_dir(dir: &Path) -> anyhow::Result<MnistFiles> {
    if !dir.is_dir() {
        bail!("data directory {} does not exist", dir.display());
    }
    Ok(MnistFiles::in_dir(dir))
}

fn limited(split: ImageSplit, limit: Option<usize>) -> LabeledSet {
    let data = split.to_labeled();
    match limit {
        Some(n) => data.head(n),
        None => data,
    }
}

fn train_network(
    files: &MnistFiles,
    arch: &[usize],
    hidden: Activation,
    config: &TrainConfig,
    train_limit: Option<usize>,
    out: &Path,
) -> anyhow::Result<(Network, f64)> {
    let train = limited(files.load_train()?, train_limit);
    let test = files.load_test()?.to_labeled();
    let init = Network::mlp(arch, hidden, config.seed)?;
    let net = if config.epochs == 0 {
        init
    } else {
        train_sgd(&init, &train, config)?
    };
    let accuracy = net.accuracy(&test)?;
    let meta = TrainingMetadata {
        accuracy: Some(accuracy),
        seed: Some(config.seed),
        epochs: Some(config.epochs),
    };
    save_network(&net, out, Some(meta))?;
    Ok((net, accuracy))
}

pub fn train(a: TrainArgs) -> anyhow::Result<()> {
    let files = check_data_dir(&a.data)?;
    let arch = parse_arch(&a.arch)?;
    let hidden: Activation = a.hidden.parse()?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: a.seed,
    };
    let (_, accuracy) = train_network(&files, &arch, hidden, &config, a.train_limit, &a.out)?;
    println!("saved {}", manifest_path(&a.out).display());
    println!("test accuracy: {accuracy:.4}");
    Ok(())
}

pub fn summaries(a: SummariesArgs) -> anyhow::Result<()> {
    let net = load_network(&a.model)?;
    let files = check_data_dir(&a.data)?;
    let layer = net.resolve_layer(a.layer)?;
    let train = files.load_train()?.to_labeled();
    let summaries = mean_graph_summaries(&net, &train, layer, a.subset_size, a.seed)?;
    let file = SummaryFile {
        requested_layer: a.layer,
        layer,
        subset_size: a.subset_size,
        seed: a.seed,
        summaries,
    };
    write_summaries(&a.out, &file)?;
    println!(
        "wrote {} class summaries for layer {} (index {layer}) to {}",
        file.summaries.len(),
        a.layer,
        a.out.display()
    );
    Ok(())
}

/// Reads IDX images or a feature blob as network inputs.
fn load_samples(path: &Path) -> anyhow::Result<Vec<Tensor>> {
    let bytes = io::read_bytes(path)?;
    if is_feature_blob(&bytes) {
        return Ok(parse_feature_blob(&bytes, path)?.tensors()?);
    }
    match parse_idx(&bytes, path)? {
        IdxData::Images(images) => Ok(images.iter().map(|i| i.to_tensor()).collect()),
        IdxData::Labels(_) => bail!("{} holds labels, not samples", path.display()),
    }
}

pub fn detect(a: DetectArgs) -> anyhow::Result<bool> {
    let net = load_network(&a.model)?;
    let (kind, summaries) = match a.feature {
        FeatureArg::Cv => (FeatureKind::ConfidenceVector, Vec::new()),
        FeatureArg::Magdiff => {
            let path = a
                .summaries
                .as_ref()
                .context("--summaries is required for magdiff features")?;
            let file = read_summaries(path)?;
            let kind = FeatureKind::Magdiff {
                layer: file.layer,
                norm: a.norm.into(),
            };
            (kind, file.summaries)
        }
    };
    let clean = load_samples(&a.clean)?;
    let candidate = load_samples(&a.candidate)?;
    let outcome = detect_shift(&net, &summaries, &clean, &candidate, kind, a.alpha)?;
    println!("feature: {kind}");
    println!("samples: clean {} candidate {}", clean.len(), candidate.len());
    for (c, r) in outcome.coordinates.iter().enumerate() {
        println!(
            "coordinate {c}: statistic {:.6} p-value {:.6e} ({:?})",
            r.statistic, r.p_value, r.method
        );
    }
    println!(
        "min p-value {:.6e} threshold {:.6e} (alpha {} / {})",
        outcome.min_p_value(),
        outcome.threshold(),
        outcome.alpha,
        outcome.coordinates.len()
    );
    println!(
        "{}",
        if outcome.reject {
            "shift detected"
        } else {
            "no shift detected"
        }
    );
    Ok(outcome.reject)
}

pub fn shift(a: ShiftArgs) -> anyhow::Result<()> {
    let family: ShiftFamily = a.kind.parse()?;
    let level: Intensity = a.level.parse()?;
    let kind = magdiff::shifts::intensity_ladder(family, level, &a.dataset)?;
    let spec = ShiftSpec {
        kind,
        intensity: Some(level),
        delta: a.delta,
        seed: a.seed,
    };
    let images = io::read_idx_images(&a.input)?;
    let shifted = apply_shift(&images, &spec)?;
    write_idx_images(&a.out, &shifted)?;
    println!(
        "{spec}: corrupted {} of {} images -> {}",
        spec.shifted_count(images.len()).min(images.len()),
        images.len(),
        a.out.display()
    );
    Ok(())
}

fn obtain_network(cfg: &ExperimentConfig, files: &MnistFiles) -> anyhow::Result<Network> {
    let manifest = manifest_path(&cfg.model.dir);
    if manifest.is_file() {
        let net = load_network(&manifest)?;
        if net.architecture() != cfg.model.arch {
            bail!(
                "model at {} has architecture {:?}, config asks for {:?}",
                manifest.display(),
                net.architecture(),
                cfg.model.arch
            );
        }
        println!("loaded model {}", manifest.display());
        return Ok(net);
    }
    let config = TrainConfig::from(&cfg.train);
    let (net, accuracy) = train_network(
        files,
        &cfg.model.arch,
        cfg.model.hidden,
        &config,
        cfg.data.train_limit,
        &cfg.model.dir,
    )?;
    println!("trained model {} (test accuracy {accuracy:.4})", manifest.display());
    Ok(net)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

/// Plot files for a finished grid: one intensity curve per (shift, delta,
/// sample size) and one sample-size curve per (shift, delta, level).
fn plots(
    cfg: &ExperimentConfig,
    rows: &[ReportRow],
    echo: &str,
) -> anyhow::Result<Vec<(PathBuf, String)>> {
    let grid = &cfg.grid;
    let ladder = cfg.ladder()?;
    let mut out = Vec::new();
    let many_levels = grid.intensities.len() > 1;
    let many_sizes = grid.sample_sizes.len() > 1;
    for &family in &grid.shifts {
        for &delta in &grid.deltas {
            let family_rows = |keep: &dyn Fn(&ReportRow) -> bool| -> Vec<ReportRow> {
                rows.iter()
                    .filter(|r| r.delta == delta)
                    .filter(|r| {
                        r.intensity.is_some_and(|l| r.shift_kind == ladder.params(family, l).to_string())
                    })
                    .filter(|r| keep(r))
                    .cloned()
                    .collect()
            };
            if many_levels || !many_sizes {
                for &m in &grid.sample_sizes {
                    let sel = family_rows(&|r| r.sample_size == m);
                    let title = format!("{family}, delta {delta}, m = {m}");
                    let name = format!("{}_{family}_d{}_m{m}_intensity.svg", cfg.output.prefix, slug(&delta.to_string()));
                    out.push((name.into(), io::emit_power_plot(&sel, XAxis::Intensity, &title, echo)?));
                }
            }
            if many_sizes {
                for &level in &grid.intensities {
                    let sel = family_rows(&|r| r.intensity == Some(level));
                    let title = format!("{family} {level}, delta {delta}");
                    let name = format!("{}_{family}_d{}_{level}_sample_size.svg", cfg.output.prefix, slug(&delta.to_string()));
                    out.push((name.into(), io::emit_power_plot(&sel, XAxis::SampleSize, &title, echo)?));
                }
            }
        }
    }
    Ok(out)
}

pub fn power_grid(a: PowerGridArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let files = check_data_dir(&cfg.data.dir)?;
    let net = obtain_network(&cfg, &files)?;

    let mut summaries = BTreeMap::new();
    let layers = required_layers(&cfg.grid, &net)?;
    if !layers.is_empty() {
        let train = limited(files.load_train()?, cfg.data.train_limit);
        for layer in layers {
            let s = mean_graph_summaries(&net, &train, layer, cfg.summaries.subset_size, cfg.summaries.seed)?;
            summaries.insert(layer, s);
        }
    }
    let test = files.load_test()?;
    let ladder = cfg.ladder()?;
    let inputs = GridInputs {
        net: &net,
        summaries: &summaries,
        images: &test.images,
        ladder: &ladder,
    };
    let rows = run_grid(&cfg.grid, &inputs)?;

    let echo = cfg.resolved()?.to_toml()?;
    let dir = &cfg.output.dir;
    let csv_path = dir.join(format!("{}.csv", cfg.output.prefix));
    write_report_csv(&csv_path, &rows)?;
    write_atomic(&dir.join(format!("{}.config.toml", cfg.output.prefix)), echo.as_bytes())?;
    for (name, svg) in plots(&cfg, &rows, &echo)? {
        write_atomic(&dir.join(name), svg.as_bytes())?;
    }

    for r in rows.iter().filter(|r| r.mode == PowerMode::Power) {
        println!(
            "{:<28} {:<44} {:>3} delta {:<4} m {:<5} power {:.3} ± {:.3}",
            r.feature_label(),
            r.shift_kind,
            r.intensity.map(|i| i.to_string()).unwrap_or_default(),
            r.delta,
            r.sample_size,
            r.estimate,
            r.ci_half_width
        );
    }
    println!("wrote {} rows to {}", rows.len(), csv_path.display());
    Ok(())
}
