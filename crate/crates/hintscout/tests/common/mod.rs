//! Fixtures shared by the integration tests: synthetic dumps on disk.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use hintscout::core::TensorBlob;
use hintscout::io::write_blob_file;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Write `blobs` as layers 1.. with a manifest; returns the manifest path.
pub fn write_dump(dir: &Path, model: &str, blobs: &[TensorBlob]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let n = blobs[0].samples();
    let layers: Vec<serde_json::Value> = blobs
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let file = format!("layer{:02}.hnt", i + 1);
            write_blob_file(b, &dir.join(&file)).unwrap();
            serde_json::json!({
                "index": i + 1,
                "name": format!("block{}", i + 1),
                "file": file,
                "channels": b.channels(),
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "model_name": model,
        "dataset_name": "synthetic",
        "sample_count": n,
        "layers": layers,
        "metadata": {"checkpoint": "fixture"},
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

pub fn gaussian_blob(rng: &mut StdRng, shape: &[usize]) -> TensorBlob {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    TensorBlob::new(shape.to_vec(), data).unwrap()
}

/// Layers built from one latent `N x C` signal per group, each layer a
/// random mixing of its group's signal plus a little noise. `group_sizes`
/// lists consecutive groups.
pub fn planted_blobs(seed: u64, group_sizes: &[usize], n: usize, c: usize, noise: f64) -> Vec<TensorBlob> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &size in group_sizes {
        let base: Vec<f64> = (0..n * c).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..size {
            let mix: Vec<f64> = (0..c * c)
                .map(
                    |i| if i % (c + 1) == 0 { 1.0 } else { 0.0 } + 0.3 * rng.sample::<f64, _>(StandardNormal),
                )
                .collect();
            let mut data = Vec::with_capacity(n * c);
            for r in 0..n {
                for j in 0..c {
                    let v: f64 = (0..c).map(|t| base[r * c + t] * mix[t * c + j]).sum();
                    data.push((v + noise * rng.sample::<f64, _>(StandardNormal)) as f32);
                }
            }
            out.push(TensorBlob::new(vec![n, c], data).unwrap());
        }
    }
    out
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
