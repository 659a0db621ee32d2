use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::matrix::DenseMatrix;
use crate::scenario::{generate_instance, generate_observations, RngStream, ScenarioSpec};
use crate::shrinkage::{
    noise_level_hat, shrunk_matrix, target_from_matrix, target_ones, NoiseTag, ObservationSet, TargetKind,
};

/// Index of the files written by [`generate_bundle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ScenarioSpec,
    pub master_seed: u64,
    pub stream_id: u64,
    pub a_true: String,
    pub b: String,
    pub cost: String,
    pub observations: Vec<String>,
}

fn column(values: &[f64]) -> DenseMatrix {
    DenseMatrix::new(values.len(), 1, values.to_vec()).expect("column shape matches")
}

/// Writes `a_true.csv`, `b.csv`, `cost.csv`, `obs_<k>.csv` (k = 1..n) and
/// `manifest.json` into `out_dir`. Vectors are single-column CSVs.
pub fn generate_bundle(
    spec: &ScenarioSpec,
    master_seed: u64,
    stream_id: u64,
    out_dir: &Path,
) -> Result<Manifest, HarnessError> {
    let rng = RngStream::new(master_seed, stream_id);
    let inst = generate_instance(spec, &rng)?;
    let obs = generate_observations(&inst.a_true, spec, &rng)?;
    std::fs::create_dir_all(out_dir)?;
    inst.a_true.write_csv(out_dir.join("a_true.csv"))?;
    column(&inst.b).write_csv(out_dir.join("b.csv"))?;
    column(&inst.cost).write_csv(out_dir.join("cost.csv"))?;
    let mut observations = Vec::with_capacity(obs.n());
    for (k, sample) in obs.samples().iter().enumerate() {
        let name = format!("obs_{}.csv", k + 1);
        sample.write_csv(out_dir.join(&name))?;
        observations.push(name);
    }
    let manifest = Manifest {
        spec: spec.clone(),
        master_seed,
        stream_id,
        a_true: "a_true.csv".into(),
        b: "b.csv".into(),
        cost: "cost.csv".into(),
        observations,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

/// The one-line JSON report of the `estimate` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub alpha: f64,
    pub beta: f64,
    pub clamped: bool,
    pub noise_level_hat: f64,
}

/// Reads the samples (and an optional target, defaulting to all ones),
/// writes `A* = α̂Ā + β̂U` to `out`, and returns the coefficient report.
pub fn estimate_files(
    samples: &[PathBuf],
    target: Option<&Path>,
    clamp: bool,
    out: &Path,
) -> Result<EstimateReport, HarnessError> {
    let mats = samples
        .iter()
        .map(DenseMatrix::read_csv)
        .collect::<Result<Vec<_>, _>>()?;
    let obs = ObservationSet::new(mats, NoiseTag::Iid)?;
    let (m, p) = obs.shape();
    let target = match target {
        Some(path) => target_from_matrix(DenseMatrix::read_csv(path)?, TargetKind::Masked)?,
        None => target_ones(m, p),
    };
    let (a_star, coeffs) = shrunk_matrix(&obs, &target, clamp)?;
    a_star.write_csv(out)?;
    Ok(EstimateReport {
        alpha: coeffs.alpha,
        beta: coeffs.beta,
        clamped: coeffs.clamped,
        noise_level_hat: noise_level_hat(&obs)?,
    })
}
