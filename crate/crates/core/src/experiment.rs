//! Power/type-I grids over features, shifts, intensities, shifted fractions
//! and sample sizes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::actgraph::MeanGraphSummary;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureKind, FeatureMatrix};
use crate::io::{FeatureRequest, GridSection, ReportRow};
use crate::nn::{Network, Tensor};
use crate::rng::{substream, Domain};
use crate::shifts::{apply_shift, Image, Intensity, IntensityLadder, ShiftFamily, ShiftSpec};
use crate::stats::{bonferroni_test, estimate_power, PowerConfig, PowerMode, PowerReport, TestOutcome};

/// Splits `0..n` into a seeded random clean half and target half (the target
/// gets the extra element when `n` is odd). Both halves are sorted.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, Domain::DetectSplit, 0));
    let mut target = idx.split_off(n / 2);
    idx.sort_unstable();
    target.sort_unstable();
    (idx, target)
}

pub fn resolve_feature(net: &Network, request: FeatureRequest) -> Result<FeatureKind> {
    Ok(match request {
        FeatureRequest::Cv => FeatureKind::ConfidenceVector,
        FeatureRequest::Magdiff { layer, norm } => FeatureKind::Magdiff {
            layer: net.resolve_layer(layer)?,
            norm,
        },
    })
}

/// Resolved dense layers needing mean graph summaries for `grid`.
pub fn required_layers(grid: &GridSection, net: &Network) -> Result<Vec<usize>> {
    let mut layers: Vec<usize> = grid
        .feature_requests()
        .into_iter()
        .map(|r| resolve_feature(net, r).map(|k| k.layer()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    layers.sort_unstable();
    layers.dedup();
    Ok(layers)
}

/// Everything a grid run needs besides the grid itself.
pub struct GridInputs<'a> {
    pub net: &'a Network,
    /// Summaries keyed by resolved layer index.
    pub summaries: &'a BTreeMap<usize, Vec<MeanGraphSummary>>,
    /// Held-out clean images, split into a clean half and a target half that
    /// receives the shift.
    pub images: &'a [Image],
    pub ladder: &'a IntensityLadder,
}

fn features_of(
    inputs: &GridInputs<'_>,
    kind: FeatureKind,
    samples: &[Tensor],
    source: &str,
) -> Result<FeatureMatrix> {
    let empty = Vec::new();
    let summaries = match kind.layer() {
        Some(l) => inputs
            .summaries
            .get(&l)
            .ok_or_else(|| Error::config(format!("no mean graph summaries for layer {l}")))?,
        None => &empty,
    };
    extract_features(inputs.net, summaries, samples, kind, source)
}

/// Extracts `kind` features from both sample sets and runs the Bonferroni
/// KS test at level `alpha`.
pub fn detect_shift(
    net: &Network,
    summaries: &[MeanGraphSummary],
    clean: &[Tensor],
    candidate: &[Tensor],
    kind: FeatureKind,
    alpha: f64,
) -> Result<TestOutcome> {
    let a = extract_features(net, summaries, clean, kind, "clean")?;
    let b = extract_features(net, summaries, candidate, kind, "candidate")?;
    bonferroni_test(&a, &b, alpha)
}

type ShiftKey = (ShiftFamily, Intensity, u64);

/// Runs every grid cell in both modes and returns rows in grid order, power
/// row before type-I row. Results do not depend on the thread count.
pub fn run_grid(grid: &GridSection, inputs: &GridInputs<'_>) -> Result<Vec<ReportRow>> {
    grid.validate()?;
    inputs.ladder.validate()?;
    let (clean_idx, target_idx) = split_halves(inputs.images.len(), grid.seed);
    if clean_idx.is_empty() || target_idx.is_empty() {
        return Err(Error::input("need at least two evaluation images"));
    }
    let clean_tensors: Vec<Tensor> = clean_idx.iter().map(|&i| inputs.images[i].to_tensor()).collect();
    let target_images: Vec<Image> = target_idx.iter().map(|&i| inputs.images[i].clone()).collect();

    let kinds = grid
        .feature_requests()
        .into_iter()
        .map(|r| resolve_feature(inputs.net, r))
        .collect::<Result<Vec<_>>>()?;
    let mut clean_features = BTreeMap::new();
    for &kind in &kinds {
        if let std::collections::btree_map::Entry::Vacant(e) = clean_features.entry(kind) {
            e.insert(features_of(inputs, kind, &clean_tensors, "clean")?);
        }
    }

    let config = |m: usize, mode: PowerMode| PowerConfig {
        sample_size: m,
        repetitions: grid.repetitions,
        alpha: grid.alpha,
        seed: grid.seed,
        mode,
    };

    let mut type1: BTreeMap<(FeatureKind, usize), PowerReport> = BTreeMap::new();
    for (&kind, clean) in &clean_features {
        for &m in &grid.sample_sizes {
            type1.insert((kind, m), estimate_power(clean, clean, &config(m, PowerMode::Type1))?);
        }
    }

    let mut power: BTreeMap<(FeatureKind, ShiftKey, usize), PowerReport> = BTreeMap::new();
    for &family in &grid.shifts {
        for &level in &grid.intensities {
            for &delta in &grid.deltas {
                let spec = ShiftSpec {
                    kind: inputs.ladder.params(family, level),
                    intensity: Some(level),
                    delta,
                    seed: grid.seed,
                };
                let shifted: Vec<Tensor> = apply_shift(&target_images, &spec)?
                    .iter()
                    .map(Image::to_tensor)
                    .collect();
                let key = (family, level, delta.to_bits());
                for (&kind, clean) in &clean_features {
                    let target = features_of(inputs, kind, &shifted, &spec.to_string())?;
                    for &m in &grid.sample_sizes {
                        let report = estimate_power(clean, &target, &config(m, PowerMode::Power))?;
                        power.insert((kind, key, m), report);
                    }
                }
            }
        }
    }

    let mut rows = Vec::new();
    for cell in grid.cells() {
        let kind = resolve_feature(inputs.net, cell.feature)?;
        let shift = inputs.ladder.params(cell.shift, cell.intensity);
        let key = (cell.shift, cell.intensity, cell.delta.to_bits());
        for report in [&power[&(kind, key, cell.sample_size)], &type1[&(kind, cell.sample_size)]] {
            rows.push(ReportRow::from_report(report, &shift, Some(cell.intensity), cell.delta));
        }
    }
    Ok(rows)
}
