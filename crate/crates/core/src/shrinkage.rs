//! Linear shrinkage of the sample-mean matrix toward a target.
//!
//! The estimator is `A* = α Ā + β U`, where `Ā` is the mean of `n` noisy
//! observations and `U` a target matrix. Three coefficient rules are provided:
//!
//! * [`coefficients_finite_sample_oracle`]: exact minimizer of
//!   `‖α Ā + β U − A‖²_F`, which needs the unknown true `A`;
//! * [`coefficients_asymptotic_oracle`]: its high-dimensional deterministic
//!   equivalent, a function of `A` and the noise level only;
//! * [`coefficients_bona_fide`]: the fully data-driven estimate used in
//!   practice, built from `Ā`, the sample spread and `U`.
//!
//! All rules use `tr(U Uᵀ)` as the normalizer, so any nonzero target works.
//! Differences of the form `tr(XXᵀ)/tr(UUᵀ) − tr²(XUᵀ)/tr²(UUᵀ)` are computed
//! as `‖X − tU‖²_F / tr(UUᵀ)` with `t = tr(XUᵀ)/tr(UUᵀ)`, which is the same
//! quantity without the cancellation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{frobenius_inner, frobenius_norm_sq, DenseMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum ShrinkageError {
    #[error("need at least 2 samples to estimate the noise level, got {0}")]
    InsufficientSamples(usize),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid target matrix: {0}")]
    InvalidTarget(String),

    #[error("observation set is empty")]
    Empty,

    #[error(transparent)]
    Dimension(#[from] MatrixError),
}

/// Covariance structure the samples were generated under. Metadata only:
/// the estimators never look at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTag {
    Iid,
    ColumnCorrelated,
    RowCorrelated,
}

/// `n` noisy observations of one `m x p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    samples: Vec<DenseMatrix>,
    tag: NoiseTag,
}

impl ObservationSet {
    pub fn new(samples: Vec<DenseMatrix>, tag: NoiseTag) -> Result<Self, ShrinkageError> {
        let first = samples.first().ok_or(ShrinkageError::Empty)?;
        if samples.len() < 2 {
            return Err(ShrinkageError::InsufficientSamples(samples.len()));
        }
        for s in &samples[1..] {
            first.same_shape(s)?;
        }
        Ok(Self { samples, tag })
    }

    pub fn samples(&self) -> &[DenseMatrix] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.samples[0].shape()
    }

    pub fn tag(&self) -> NoiseTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: NoiseTag) -> Self {
        self.tag = tag;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    FiniteSampleOracle,
    AsymptoticOracle,
    BonaFide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub kind: CoefficientKind,
    pub clamped: bool,
    /// Values before clamping; equal to `alpha`/`beta` when `clamped` is false.
    pub raw_alpha: f64,
    pub raw_beta: f64,
}

impl ShrinkageCoefficients {
    fn unclamped(alpha: f64, beta: f64, kind: CoefficientKind) -> Self {
        Self {
            alpha,
            beta,
            kind,
            clamped: false,
            raw_alpha: alpha,
            raw_beta: beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// No prior information: every entry is shrunk toward the grand mean.
    Ones,
    /// The true matrix is known up to an unknown scale.
    ScaledKnown,
    /// Zeros mark entries that may be scaled but not shifted.
    Masked,
}

/// Shrinkage target `U`, guaranteed to have `tr(U Uᵀ) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    matrix: DenseMatrix,
    kind: TargetKind,
    norm_sq: f64,
}

impl TargetMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// `tr(U Uᵀ)`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

pub fn target_ones(rows: usize, cols: usize) -> TargetMatrix {
    TargetMatrix {
        matrix: DenseMatrix::ones(rows, cols),
        kind: TargetKind::Ones,
        norm_sq: (rows * cols) as f64,
    }
}

pub fn target_from_matrix(b: DenseMatrix, kind: TargetKind) -> Result<TargetMatrix, ShrinkageError> {
    let norm_sq = frobenius_norm_sq(&b);
    if norm_sq <= 0.0 {
        return Err(ShrinkageError::InvalidTarget("target has tr(U Uᵀ) = 0".into()));
    }
    Ok(TargetMatrix {
        matrix: b,
        kind,
        norm_sq,
    })
}

/// `Ā = (1/n) Σₖ Ãᵏ`.
pub fn sample_mean(obs: &ObservationSet) -> DenseMatrix {
    // Accumulated as offsets from the first sample, so identical samples
    // reproduce it exactly.
    let (rows, cols) = obs.shape();
    let base = obs.samples()[0].as_slice();
    let mut acc = vec![0.0; rows * cols];
    for s in &obs.samples()[1..] {
        for ((a, v), b) in acc.iter_mut().zip(s.as_slice()).zip(base) {
            *a += v - b;
        }
    }
    let n = obs.n() as f64;
    for (a, b) in acc.iter_mut().zip(base) {
        *a = b + *a / n;
    }
    DenseMatrix::new(rows, cols, acc).expect("mean of finite samples is finite")
}

/// `Σₖ tr((Ãᵏ − Ā)(Ãᵏ − Ā)ᵀ)`.
fn sample_spread(obs: &ObservationSet, mean: &DenseMatrix) -> f64 {
    obs.samples()
        .iter()
        .map(|s| {
            s.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum()
}

/// `(1/((n−1) m p)) Σₖ tr((Ãᵏ − Ā)(Ãᵏ − Ā)ᵀ)`.
///
/// Estimates σ² under i.i.d. noise and `(1/m) tr(Σ)` under column-correlated noise.
pub fn noise_level_hat(obs: &ObservationSet) -> Result<f64, ShrinkageError> {
    let n = obs.n();
    if n < 2 {
        return Err(ShrinkageError::InsufficientSamples(n));
    }
    let (m, p) = obs.shape();
    let mean = sample_mean(obs);
    Ok(sample_spread(obs, &mean) / ((n - 1) * m * p) as f64)
}

/// Projection coefficient `tr(X Uᵀ)/tr(U Uᵀ)` and the centered energy
/// `‖X − tU‖²_F / tr(U Uᵀ)`.
fn centered(x: &DenseMatrix, target: &TargetMatrix) -> Result<(f64, DenseMatrix), ShrinkageError> {
    let u = target.matrix();
    let t = frobenius_inner(x, u)? / target.norm_sq();
    let residual = x.linear_combination(1.0, u, -t)?;
    Ok((t, residual))
}

fn degeneracy_floor(x: &DenseMatrix, target: &TargetMatrix) -> f64 {
    1e-12 * frobenius_norm_sq(x) / target.norm_sq()
}

/// Data-driven `(α̂, β̂)`:
///
/// `α̂ = 1 − [spread / (n(n−1) tr(UUᵀ))] / D`, `β̂ = (1 − α̂) tr(ĀUᵀ)/tr(UUᵀ)`,
/// with `D = tr(ĀĀᵀ)/tr(UUᵀ) − tr²(ĀUᵀ)/tr²(UUᵀ)`.
///
/// With `clamp`, α̂ is projected onto `[0, 1]` and β̂ recomputed from it; the
/// raw pair is kept in `raw_alpha`/`raw_beta`.
pub fn coefficients_bona_fide(
    obs: &ObservationSet,
    target: &TargetMatrix,
    clamp: bool,
) -> Result<ShrinkageCoefficients, ShrinkageError> {
    let n = obs.n();
    if n < 2 {
        return Err(ShrinkageError::InsufficientSamples(n));
    }
    let mean = sample_mean(obs);
    mean.same_shape(target.matrix())?;
    bona_fide_from_mean(obs, &mean, target, clamp)
}

fn bona_fide_from_mean(
    obs: &ObservationSet,
    mean: &DenseMatrix,
    target: &TargetMatrix,
    clamp: bool,
) -> Result<ShrinkageCoefficients, ShrinkageError> {
    let n = obs.n() as f64;
    let (t, residual) = centered(mean, target)?;
    let denom = frobenius_norm_sq(&residual) / target.norm_sq();
    if denom <= degeneracy_floor(mean, target) {
        return Err(ShrinkageError::Degenerate(
            "sample mean is numerically proportional to the target".into(),
        ));
    }
    let variance = sample_spread(obs, mean) / (n * (n - 1.0) * target.norm_sq());
    let raw_alpha = 1.0 - variance / denom;
    let beta_of = |alpha: f64| (1.0 - alpha) * t;
    let raw_beta = beta_of(raw_alpha);
    let mut coeffs = ShrinkageCoefficients::unclamped(raw_alpha, raw_beta, CoefficientKind::BonaFide);
    if clamp && !(0.0..=1.0).contains(&raw_alpha) {
        coeffs.alpha = raw_alpha.clamp(0.0, 1.0);
        coeffs.beta = beta_of(coeffs.alpha);
        coeffs.clamped = true;
    }
    Ok(coeffs)
}

/// Exact minimizer of `g(α, β) = ‖α Ā + β U − A‖²_F`:
///
/// `α = [tr(ĀAᵀ)/tr(UUᵀ) − tr(ĀUᵀ) tr(AUᵀ)/tr²(UUᵀ)] / D`,
/// `β = (tr(AUᵀ) − α tr(ĀUᵀ)) / tr(UUᵀ)`.
pub fn coefficients_finite_sample_oracle(
    a_true: &DenseMatrix,
    a_bar: &DenseMatrix,
    target: &TargetMatrix,
) -> Result<ShrinkageCoefficients, ShrinkageError> {
    a_true.same_shape(a_bar)?;
    a_bar.same_shape(target.matrix())?;
    let (t_bar, bar_c) = centered(a_bar, target)?;
    let (t_true, true_c) = centered(a_true, target)?;
    let denom = frobenius_norm_sq(&bar_c);
    if denom / target.norm_sq() <= degeneracy_floor(a_bar, target) {
        return Err(ShrinkageError::Degenerate(
            "sample mean is numerically proportional to the target".into(),
        ));
    }
    let alpha = frobenius_inner(&bar_c, &true_c)? / denom;
    let beta = t_true - alpha * t_bar;
    Ok(ShrinkageCoefficients::unclamped(
        alpha,
        beta,
        CoefficientKind::FiniteSampleOracle,
    ))
}

/// Deterministic equivalent `(α*, β*)` given the true matrix and noise scale
/// (σ² for i.i.d. noise, `(1/m) tr(Σ)` for column-correlated noise):
///
/// `α* = 1 − (s/n) / [tr(AAᵀ)/tr(UUᵀ) + s/n − tr²(AUᵀ)/tr²(UUᵀ)]`,
/// `β* = (1 − α*) tr(AUᵀ)/tr(UUᵀ)`.
pub fn coefficients_asymptotic_oracle(
    a_true: &DenseMatrix,
    noise_scale: f64,
    n: usize,
    target: &TargetMatrix,
) -> Result<ShrinkageCoefficients, ShrinkageError> {
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(ShrinkageError::Degenerate(format!(
            "noise scale must be finite and >= 0, got {noise_scale}"
        )));
    }
    if n == 0 {
        return Err(ShrinkageError::InsufficientSamples(0));
    }
    a_true.same_shape(target.matrix())?;
    let (t, residual) = centered(a_true, target)?;
    let per_sample = noise_scale / n as f64;
    let denom = frobenius_norm_sq(&residual) / target.norm_sq() + per_sample;
    if denom <= 0.0 {
        return Err(ShrinkageError::Degenerate(
            "noise-free true matrix proportional to the target".into(),
        ));
    }
    let alpha = 1.0 - per_sample / denom;
    let beta = (1.0 - alpha) * t;
    Ok(ShrinkageCoefficients::unclamped(
        alpha,
        beta,
        CoefficientKind::AsymptoticOracle,
    ))
}

/// `A* = α̂ Ā + β̂ U` with bona-fide coefficients.
pub fn shrunk_matrix(
    obs: &ObservationSet,
    target: &TargetMatrix,
    clamp: bool,
) -> Result<(DenseMatrix, ShrinkageCoefficients), ShrinkageError> {
    let mean = sample_mean(obs);
    mean.same_shape(target.matrix())?;
    let coeffs = bona_fide_from_mean(obs, &mean, target, clamp)?;
    let shrunk = mean.linear_combination(coeffs.alpha, target.matrix(), coeffs.beta)?;
    Ok((shrunk, coeffs))
}

/// Transposes every sample and swaps the row/column-correlated tags, so that
/// row-correlated data can be fed to the column-correlated estimators with
/// the roles of `m` and `p` exchanged. Applying it twice is the identity.
pub fn transpose_observations(obs: &ObservationSet) -> ObservationSet {
    let tag = match obs.tag {
        NoiseTag::RowCorrelated => NoiseTag::ColumnCorrelated,
        NoiseTag::ColumnCorrelated => NoiseTag::RowCorrelated,
        NoiseTag::Iid => NoiseTag::Iid,
    };
    ObservationSet {
        samples: obs.samples.iter().map(DenseMatrix::transpose).collect(),
        tag,
    }
}
