use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::scenario::NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// x-axis is `p`, one figure set per `c`.
    FixedCVaryP,
    /// x-axis is `c`, one figure set per `p`.
    FixedPVaryC,
}

/// Named presets: `Desk` keeps `p <= 400` and 20 replications; `Paper` is
/// the full grid with 50 replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

/// One sweep. Cells are the product `c_values × p_values × sigma_list`;
/// `m = round(c·p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep_mode: SweepMode,
    pub c_values: Vec<f64>,
    pub p_values: Vec<usize>,
    pub sigma_list: Vec<f64>,
    /// Robust radii are `γ = factor·σ`; may be empty.
    pub gamma_factors: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub noise_model: NoiseModel,
    pub clamp: bool,
    pub master_seed: u64,
    pub output_path: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// When false the `solve_time_ms` column is left empty, which makes the
    /// output a pure function of the configuration.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk, SweepMode::FixedCVaryP)
    }
}

impl ExperimentConfig {
    pub fn profile(profile: Profile, mode: SweepMode) -> Self {
        let (c_values, p_values, reps) = match (profile, mode) {
            (Profile::Desk, SweepMode::FixedCVaryP) => (vec![0.5], vec![100, 200, 300, 400], 20),
            (Profile::Desk, SweepMode::FixedPVaryC) => (vec![0.5, 1.0, 1.5, 2.0, 2.5], vec![200], 20),
            (Profile::Paper, SweepMode::FixedCVaryP) => (vec![0.5, 1.0, 2.0], (1..=9).map(|k| 100 * k).collect(), 50),
            (Profile::Paper, SweepMode::FixedPVaryC) => (float_range(0.1, 2.8, 0.3), vec![200, 500], 50),
        };
        Self {
            sweep_mode: mode,
            c_values,
            p_values,
            sigma_list: vec![0.5, 1.0, 2.0],
            gamma_factors: vec![0.2, 0.5, 0.8],
            n: 5,
            reps,
            noise_model: NoiseModel::IidGaussian,
            clamp: true,
            master_seed: 42,
            output_path: PathBuf::from("results.csv"),
            workers: 0,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.c_values.is_empty() || self.p_values.is_empty() || self.sigma_list.is_empty() {
            return bad("c_values, p_values and sigma_list must be non-empty".into());
        }
        if let Some(s) = self.sigma_list.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return bad(format!("sigma values must be > 0, got {s}"));
        }
        if let Some(g) = self.gamma_factors.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return bad(format!("gamma factors must be > 0, got {g}"));
        }
        if let Some(c) = self.c_values.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return bad(format!("c values must be > 0, got {c}"));
        }
        for &c in &self.c_values {
            for &p in &self.p_values {
                if p == 0 || rows_for(c, p) == 0 {
                    return bad(format!("cell c={c}, p={p} has no constraints or variables"));
                }
            }
        }
        Ok(())
    }

    /// `<stem>_agg.<ext>` next to the output file.
    pub fn aggregate_path(&self) -> PathBuf {
        aggregate_path_for(&self.output_path)
    }
}

pub(crate) fn aggregate_path_for(path: &std::path::Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_agg.{}", ext.to_string_lossy()),
        None => format!("{stem}_agg"),
    };
    path.with_file_name(name)
}

/// `m = round(c·p)`.
pub fn rows_for(c: f64, p: usize) -> usize {
    (c * p as f64).round() as usize
}

/// Inclusive `start, start+step, …, <= stop`, each value rounded to 9
/// decimals so that decimal steps print cleanly.
pub fn float_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(step > 0.0) {
        return out;
    }
    let count = ((stop - start) / step + 1e-9).floor();
    if count < 0.0 {
        return out;
    }
    for k in 0..=count as usize {
        out.push(((start + k as f64 * step) * 1e9).round() / 1e9);
    }
    out
}

/// Parses `a,b,c` or `start:stop:step` (inclusive) into floats.
pub fn parse_float_list(text: &str) -> Result<Vec<f64>, HarnessError> {
    let err = || HarnessError::Config(format!("cannot parse number list {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, s) = (
                start.trim().parse::<f64>().map_err(|_| err())?,
                stop.trim().parse::<f64>().map_err(|_| err())?,
                step.trim().parse::<f64>().map_err(|_| err())?,
            );
            if !(s > 0.0) || b < a {
                return Err(err());
            }
            float_range(a, b, s)
        }
        [_] => text
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| err()))
            .collect::<Result<_, _>>()?,
        _ => return Err(err()),
    };
    if values.is_empty() {
        return Err(err());
    }
    Ok(values)
}

/// Parses `a,b,c` or `start:stop:step` (inclusive) into integers.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>, HarnessError> {
    let err = || HarnessError::Config(format!("cannot parse integer list {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let values: Vec<usize> = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, s) = (
                start.trim().parse::<usize>().map_err(|_| err())?,
                stop.trim().parse::<usize>().map_err(|_| err())?,
                step.trim().parse::<usize>().map_err(|_| err())?,
            );
            if s == 0 || b < a {
                return Err(err());
            }
            (a..=b).step_by(s).collect()
        }
        [_] => text
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| err()))
            .collect::<Result<_, _>>()?,
        _ => return Err(err()),
    };
    if values.is_empty() {
        return Err(err());
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_inclusively() {
        assert_eq!(parse_usize_list("100:900:100").unwrap().len(), 9);
        assert_eq!(parse_usize_list("100, 300").unwrap(), vec![100, 300]);
        assert_eq!(
            parse_float_list("0.1:2.8:0.3").unwrap(),
            vec![0.1, 0.4, 0.7, 1.0, 1.3, 1.6, 1.9, 2.2, 2.5, 2.8]
        );
        assert_eq!(parse_float_list("0.5,1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_usize_list("9:1:1").is_err());
        assert!(parse_float_list("a,b").is_err());
        assert!(parse_float_list("1:2:0").is_err());
    }

    #[test]
    fn profiles_and_validation() {
        let desk = ExperimentConfig::default();
        assert!(desk.p_values.iter().all(|&p| p <= 400));
        assert_eq!(desk.reps, 20);
        desk.validate().unwrap();
        let paper = ExperimentConfig::profile(Profile::Paper, SweepMode::FixedCVaryP);
        assert_eq!(paper.reps, 50);
        assert_eq!(*paper.p_values.last().unwrap(), 900);
        ExperimentConfig::profile(Profile::Paper, SweepMode::FixedPVaryC).validate().unwrap();

        let mut bad = desk.clone();
        bad.reps = 0;
        assert!(bad.validate().is_err());
        let mut bad = desk.clone();
        bad.sigma_list = vec![0.0];
        assert!(bad.validate().is_err());
        let mut bad = desk.clone();
        bad.c_values = vec![0.001];
        bad.p_values = vec![10];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_round_trips_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"reps": 3, "noise_model": "col-corr"}"#).unwrap();
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.noise_model, NoiseModel::ColumnCorrelated);
        assert_eq!(cfg.sigma_list, vec![0.5, 1.0, 2.0]);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"repz": 3}"#).is_err());
    }

    #[test]
    fn aggregate_path_keeps_extension() {
        assert_eq!(aggregate_path_for("out/results.csv".as_ref()), PathBuf::from("out/results_agg.csv"));
        assert_eq!(aggregate_path_for("run".as_ref()), PathBuf::from("run_agg"));
    }
}
