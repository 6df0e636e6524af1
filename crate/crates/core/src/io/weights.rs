//! Portable network weights: a JSON manifest plus raw little-endian `f32`
//! blobs, one weight and one bias file per dense layer. Weight blobs are
//! row-major with one row per output neuron.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::atomic::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Network, Tensor};
use crate::rng::{substream, Domain};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;
/// Number of shared input/output pairs written next to each saved network.
pub const TEST_VECTOR_COUNT: usize = 16;
/// Maximum absolute output deviation accepted by [`verify_test_vectors`].
pub const TEST_VECTOR_TOLERANCE: f64 = 1e-5;
const TEST_VECTOR_SEED: u64 = 0x7e57_7ec7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub name: String,
    pub n_in: usize,
    pub n_out: usize,
    pub activation: Activation,
    pub weight_file: String,
    pub bias_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

/// Inputs (`count x input_dim`) and expected outputs (`count x class_count`)
/// for checking that two implementations agree on the forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVectors {
    pub count: usize,
    pub input_file: String,
    pub output_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub format_version: u32,
    pub layers: Vec<LayerDescriptor>,
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_vectors: Option<TestVectors>,
}

impl WeightManifest {
    /// Checks version and that consecutive layer dimensions chain.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported manifest format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::shape("manifest lists no layers"));
        }
        for pair in self.layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::shape(format!(
                    "layer '{}' has n_out {} but layer '{}' has n_in {}",
                    pair[0].name, pair[0].n_out, pair[1].name, pair[1].n_in
                )));
            }
        }
        let last = &self.layers[self.layers.len() - 1];
        if last.n_out != self.class_count {
            return Err(Error::shape(format!(
                "final layer '{}' has n_out {} but class_count is {}",
                last.name, last.n_out, self.class_count
            )));
        }
        Ok(())
    }
}

/// Accepts either a manifest file or the directory containing `manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn base_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or_else(|| Path::new("."))
}

pub fn encode_f32_blob(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn decode_f32_blob(bytes: &[u8], expected: usize, path: &Path) -> Result<Vec<f32>> {
    if bytes.len() != expected * 4 {
        return Err(Error::parse(
            path,
            format!(
                "expected {expected} f32 values ({} bytes), found {} bytes",
                expected * 4,
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn read_f32_blob(path: &Path, expected: usize) -> Result<Vec<f32>> {
    decode_f32_blob(&read_bytes(path)?, expected, path)
}

pub fn write_f32_blob(path: &Path, values: &[f64]) -> Result<()> {
    write_atomic(path, &encode_f32_blob(values))
}

pub fn read_manifest(path: &Path) -> Result<WeightManifest> {
    let path = manifest_path(path);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: WeightManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    manifest.validate()?;
    Ok(manifest)
}

/// Loads the network described by a manifest, promoting weights to `f64`.
pub fn load_network(path: &Path) -> Result<Network> {
    let path = manifest_path(path);
    let manifest = read_manifest(&path)?;
    network_from_manifest(&manifest, base_dir(&path))
}

fn network_from_manifest(manifest: &WeightManifest, dir: &Path) -> Result<Network> {
    let layers = manifest
        .layers
        .iter()
        .map(|d| {
            let w = read_f32_blob(&dir.join(&d.weight_file), d.n_in * d.n_out)?;
            let b = read_f32_blob(&dir.join(&d.bias_file), d.n_out)?;
            DenseLayer::new(
                Tensor::from_f32(vec![d.n_out, d.n_in], &w)?,
                b.iter().map(|&v| f64::from(v)).collect(),
                d.activation,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers, manifest.class_count)
}

/// The network as it will be after a save/load cycle.
pub fn round_to_f32(net: &Network) -> Result<Network> {
    let layers = net
        .layers()
        .iter()
        .map(|l| {
            let w = l.weight().data().iter().map(|&v| f64::from(v as f32)).collect();
            let b = l.bias().iter().map(|&v| f64::from(v as f32)).collect();
            DenseLayer::new(Tensor::matrix(l.n_out(), l.n_in(), w)?, b, l.activation())
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers, net.class_count())
}

/// Writes `manifest.json`, the layer blobs and [`TEST_VECTOR_COUNT`] test
/// vectors into `dir`.
pub fn save_network(
    net: &Network,
    dir: &Path,
    training: Option<TrainingMetadata>,
) -> Result<WeightManifest> {
    let mut layers = Vec::with_capacity(net.layers().len());
    for (k, layer) in net.layers().iter().enumerate() {
        let name = format!("dense_{k}");
        let weight_file = format!("{name}.weight.f32");
        let bias_file = format!("{name}.bias.f32");
        write_f32_blob(&dir.join(&weight_file), layer.weight().data())?;
        write_f32_blob(&dir.join(&bias_file), layer.bias())?;
        layers.push(LayerDescriptor {
            name,
            n_in: layer.n_in(),
            n_out: layer.n_out(),
            activation: layer.activation(),
            weight_file,
            bias_file,
        });
    }

    let stored = round_to_f32(net)?;
    let (inputs, outputs) = test_vectors_for(&stored)?;
    let vectors = TestVectors {
        count: TEST_VECTOR_COUNT,
        input_file: "test_vectors.inputs.f32".into(),
        output_file: "test_vectors.outputs.f32".into(),
    };
    write_f32_blob(&dir.join(&vectors.input_file), &inputs)?;
    write_f32_blob(&dir.join(&vectors.output_file), &outputs)?;

    let manifest = WeightManifest {
        format_version: FORMAT_VERSION,
        layers,
        class_count: net.class_count(),
        training,
        test_vectors: Some(vectors),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::input(format!("serialising manifest: {e}")))?;
    write_atomic(&dir.join(MANIFEST_FILE), format!("{json}\n").as_bytes())?;
    Ok(manifest)
}

/// Seeded uniform `[0, 1)` inputs (exactly representable in `f32`) and the
/// network's outputs on them, both flattened row-major.
pub fn test_vectors_for(net: &Network) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = substream(TEST_VECTOR_SEED, Domain::TrainInit, 0);
    let dim = net.input_dim();
    let mut inputs = Vec::with_capacity(TEST_VECTOR_COUNT * dim);
    let mut outputs = Vec::with_capacity(TEST_VECTOR_COUNT * net.class_count());
    for _ in 0..TEST_VECTOR_COUNT {
        let x: Vec<f64> = (0..dim)
            .map(|_| f64::from(rng.random::<f32>()))
            .collect();
        outputs.extend(net.output(&x)?);
        inputs.extend(x);
    }
    Ok((inputs, outputs))
}

/// Runs `net` on the manifest's test vectors and returns the largest absolute
/// output deviation. Fails if it exceeds [`TEST_VECTOR_TOLERANCE`] or the
/// manifest carries no vectors.
pub fn verify_test_vectors(net: &Network, path: &Path) -> Result<f64> {
    let path = manifest_path(path);
    let manifest = read_manifest(&path)?;
    let tv = manifest
        .test_vectors
        .as_ref()
        .ok_or_else(|| Error::input(format!("{} has no test vectors", path.display())))?;
    let dir = base_dir(&path);
    let dim = net.input_dim();
    let d = net.class_count();
    let inputs = read_f32_blob(&dir.join(&tv.input_file), tv.count * dim)?;
    let expected = read_f32_blob(&dir.join(&tv.output_file), tv.count * d)?;
    let mut worst = 0.0f64;
    for k in 0..tv.count {
        let x: Vec<f64> = inputs[k * dim..(k + 1) * dim].iter().map(|&v| f64::from(v)).collect();
        let y = net.output(&x)?;
        for (a, &b) in y.iter().zip(&expected[k * d..(k + 1) * d]) {
            worst = worst.max((a - f64::from(b)).abs());
        }
    }
    if worst > TEST_VECTOR_TOLERANCE {
        return Err(Error::input(format!(
            "forward pass deviates from test vectors by {worst:e} (> {TEST_VECTOR_TOLERANCE:e})"
        )));
    }
    Ok(worst)
}
