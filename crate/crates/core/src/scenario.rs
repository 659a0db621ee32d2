//! Seedable generation of problem instances and noisy observations.
//!
//! Instances follow the simulation design: `A`, `b` and `c` have independent
//! `U(low, high)` entries (default `U(4, 6)`), and each observation is
//! `A + σE` (i.i.d.), `A + σR E` (column-correlated) or `A + σE R`
//! (row-correlated) with `R` a symmetric positive-definite root.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::{make_spd_root, mean_trace_of_square, CovarianceSpec, DenseMatrix, MatrixError};
use crate::shrinkage::{NoiseTag, ObservationSet};

/// Deterministic random stream identified by `(master_seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting an independent keystream, so
/// the draw sequence is identical on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream for a named purpose; independent of how much of `self` was consumed.
    pub fn substream(&self, purpose: &str) -> RngStream {
        RngStream::new(self.master_seed, stream_key(&[self.stream_id, purpose_tag(purpose)]))
    }

    pub fn sample<T, D: Distribution<T>>(&mut self, dist: D) -> T {
        self.rng.sample(dist)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive, platform-independent mix of a key tuple into a stream id.
pub fn stream_key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a of a purpose label.
pub fn purpose_tag(purpose: &str) -> u64 {
    purpose.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    #[serde(alias = "iid", alias = "iid_gaussian")]
    IidGaussian,
    #[serde(alias = "col-corr", alias = "column_correlated")]
    ColumnCorrelated,
    #[serde(alias = "row-corr", alias = "row_correlated")]
    RowCorrelated,
}

impl NoiseModel {
    pub fn tag(self) -> NoiseTag {
        match self {
            NoiseModel::IidGaussian => NoiseTag::Iid,
            NoiseModel::ColumnCorrelated => NoiseTag::ColumnCorrelated,
            NoiseModel::RowCorrelated => NoiseTag::RowCorrelated,
        }
    }
}

/// Distribution of the unit-variance innovations `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// `U(-√3, √3)`: mean 0, variance 1, finite fourth moment.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub sigma: f64,
    pub noise_model: NoiseModel,
    #[serde(default)]
    pub covariance_spec: CovarianceSpec,
    #[serde(default)]
    pub innovation: Innovation,
    #[serde(default = "default_low")]
    pub entry_low: f64,
    #[serde(default = "default_high")]
    pub entry_high: f64,
}

fn default_low() -> f64 {
    4.0
}

fn default_high() -> f64 {
    6.0
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

impl ScenarioSpec {
    pub fn iid(m: usize, p: usize, n: usize, sigma: f64) -> Self {
        Self {
            m,
            p,
            n,
            sigma,
            noise_model: NoiseModel::IidGaussian,
            covariance_spec: CovarianceSpec::default(),
            innovation: Innovation::Gaussian,
            entry_low: default_low(),
            entry_high: default_high(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.m == 0 || self.p == 0 {
            return Err(ScenarioError::Invalid(format!(
                "dimensions must be positive, got {}x{}",
                self.m, self.p
            )));
        }
        if self.n < 2 {
            return Err(ScenarioError::Invalid(format!("need n >= 2 samples, got {}", self.n)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ScenarioError::Invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.entry_low < self.entry_high) {
            return Err(ScenarioError::Invalid(format!(
                "entry range [{}, {}] is empty",
                self.entry_low, self.entry_high
            )));
        }
        Ok(())
    }
}

/// The true model `max cᵀx, A x <= b, x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a_true: DenseMatrix,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
}

pub fn generate_instance(spec: &ScenarioSpec, rng: &RngStream) -> Result<Instance, ScenarioError> {
    spec.validate()?;
    let dist = Uniform::new(spec.entry_low, spec.entry_high)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut draw = rng.substream("instance");
    let a: Vec<f64> = (0..spec.m * spec.p).map(|_| draw.sample(dist)).collect();
    let b: Vec<f64> = (0..spec.m).map(|_| draw.sample(dist)).collect();
    let cost: Vec<f64> = (0..spec.p).map(|_| draw.sample(dist)).collect();
    Ok(Instance {
        a_true: DenseMatrix::new(spec.m, spec.p, a)?,
        b,
        cost,
    })
}

/// Ground truth of the noise level that `noise_level_hat` estimates.
#[derive(Debug, Clone)]
pub struct NoiseTruth {
    /// σ² for i.i.d. noise, `(1/m) tr(Σ)` for column-correlated noise and
    /// `(1/p) tr(Σ)` for row-correlated noise.
    pub noise_scale: f64,
    /// `σR`, absent for i.i.d. noise.
    pub root: Option<DenseMatrix>,
}

pub fn generate_observations(
    a_true: &DenseMatrix,
    spec: &ScenarioSpec,
    rng: &RngStream,
) -> Result<ObservationSet, ScenarioError> {
    generate_observations_with_truth(a_true, spec, rng).map(|(obs, _)| obs)
}

pub fn generate_observations_with_truth(
    a_true: &DenseMatrix,
    spec: &ScenarioSpec,
    rng: &RngStream,
) -> Result<(ObservationSet, NoiseTruth), ScenarioError> {
    spec.validate()?;
    if a_true.shape() != (spec.m, spec.p) {
        return Err(ScenarioError::Invalid(format!(
            "true matrix is {}x{}, spec says {}x{}",
            a_true.rows(),
            a_true.cols(),
            spec.m,
            spec.p
        )));
    }
    let (m, p) = (spec.m, spec.p);
    let root = match spec.noise_model {
        NoiseModel::IidGaussian => None,
        NoiseModel::ColumnCorrelated | NoiseModel::RowCorrelated => {
            let size = if spec.noise_model == NoiseModel::ColumnCorrelated { m } else { p };
            let mut cov_rng = rng.substream("covariance");
            Some(make_spd_root(size, &spec.covariance_spec, &mut cov_rng)?.scale(spec.sigma))
        }
    };
    let noise_scale = match &root {
        None => spec.sigma * spec.sigma,
        Some(r) => mean_trace_of_square(r),
    };

    let mut draw = rng.substream("observations");
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let raw = innovations(m * p, spec.innovation, &mut draw);
        let e = DenseMatrix::new(m, p, raw)?;
        let noise = match (&root, spec.noise_model) {
            (None, _) => e.scale(spec.sigma),
            (Some(r), NoiseModel::ColumnCorrelated) => r.matmul(&e)?,
            (Some(r), _) => e.matmul(r)?,
        };
        samples.push(a_true.add(&noise)?);
    }
    let obs = ObservationSet::new(samples, spec.noise_model.tag())
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    Ok((obs, NoiseTruth { noise_scale, root }))
}

fn innovations(len: usize, kind: Innovation, rng: &mut RngStream) -> Vec<f64> {
    match kind {
        Innovation::Gaussian => (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        Innovation::Uniform => {
            let half = 3.0f64.sqrt();
            let dist = Uniform::new_inclusive(-half, half).expect("valid range");
            (0..len).map(|_| rng.sample(dist)).collect()
        }
    }
}
