use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{rows_for, ExperimentConfig};
use super::metrics::{relative_objective, violation_metrics};
use super::HarnessError;
use crate::scenario::{generate_instance, generate_observations, stream_key, RngStream, ScenarioSpec};
use crate::shrinkage::{sample_mean, shrunk_matrix, target_ones, ShrinkageCoefficients};
use crate::solver::{
    build_nominal, build_shrinkage, solve_lp, solve_robust, ConstrainedProblem, RobustOptions, Solution,
    SolveStatus,
};

pub const CSV_HEADER: [&str; 17] = [
    "c",
    "p",
    "m",
    "sigma",
    "n",
    "method",
    "gamma_factor",
    "rep",
    "seed",
    "status",
    "rel_obj",
    "viol_mag",
    "viol_ratio",
    "solve_time_ms",
    "alpha_hat",
    "beta_hat",
    "clamped",
];

pub const AGG_HEADER: [&str; 15] = [
    "c",
    "p",
    "m",
    "sigma",
    "n",
    "method",
    "gamma_factor",
    "count",
    "excluded",
    "rel_obj",
    "abs_rel_obj",
    "viol_mag",
    "viol_ratio",
    "solve_time_ms",
    "alpha_hat",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nominal,
    Shrinkage,
    Robust,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nominal => "nominal",
            Method::Shrinkage => "shrinkage",
            Method::Robust => "robust",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Solver statuses plus the two harness-level outcomes: `Degenerate` when
/// the shrinkage coefficients cannot be estimated, `MetricUndefined` when
/// the true model gives no usable reference objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecordStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Degenerate,
    MetricUndefined,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Optimal => "Optimal",
            RecordStatus::Infeasible => "Infeasible",
            RecordStatus::Unbounded => "Unbounded",
            RecordStatus::IterationLimit => "IterationLimit",
            RecordStatus::Degenerate => "Degenerate",
            RecordStatus::MetricUndefined => "MetricUndefined",
        }
    }

    /// Counts toward the sweep's failure rate.
    pub fn is_failure(self) -> bool {
        !matches!(self, RecordStatus::Optimal | RecordStatus::MetricUndefined)
    }
}

impl From<SolveStatus> for RecordStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RecordStatus::Optimal,
            SolveStatus::Infeasible => RecordStatus::Infeasible,
            SolveStatus::Unbounded => RecordStatus::Unbounded,
            SolveStatus::IterationLimit => RecordStatus::IterationLimit,
        }
    }
}

/// Grid position of a record; the sort key of the output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub c_index: usize,
    pub p_index: usize,
    pub sigma_index: usize,
    pub rep: usize,
    /// 0 nominal, 1 shrinkage, 2.. robust by gamma-factor position.
    pub method_index: usize,
}

/// One method on one replication. Metrics are `Some` iff `status` is
/// `Optimal`; `alpha_hat`, `beta_hat` and `clamped` are set for shrinkage
/// records whose coefficients were estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub key: RecordKey,
    pub c: f64,
    pub p: usize,
    pub m: usize,
    pub sigma: f64,
    pub n: usize,
    pub method: Method,
    pub gamma_factor: Option<f64>,
    pub rep: usize,
    /// Stream id of the replication: `RngStream::new(master_seed, seed)`
    /// regenerates its instance and observations.
    pub seed: u64,
    pub status: RecordStatus,
    pub rel_obj: Option<f64>,
    pub viol_mag: Option<f64>,
    pub viol_ratio: Option<f64>,
    pub solve_time_ms: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub clamped: Option<bool>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentRecord {
    pub fn csv_row(&self) -> [String; 17] {
        [
            self.c.to_string(),
            self.p.to_string(),
            self.m.to_string(),
            self.sigma.to_string(),
            self.n.to_string(),
            self.method.to_string(),
            opt(self.gamma_factor),
            self.rep.to_string(),
            self.seed.to_string(),
            self.status.as_str().to_string(),
            opt(self.rel_obj),
            opt(self.viol_mag),
            opt(self.viol_ratio),
            opt(self.solve_time_ms),
            opt(self.alpha_hat),
            opt(self.beta_hat),
            opt(self.clamped),
        ]
    }
}

/// Parameters shared by every replication of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub c_index: usize,
    pub p_index: usize,
    pub sigma_index: usize,
    pub c: f64,
    pub p: usize,
    pub sigma: f64,
}

impl Cell {
    pub fn m(&self) -> usize {
        rows_for(self.c, self.p)
    }

    /// Stream id of replication `rep`; depends on the cell's values, not on
    /// its position, so adding grid points leaves other cells unchanged.
    pub fn stream_id(&self, rep: usize) -> u64 {
        stream_key(&[self.c.to_bits(), self.p as u64, self.sigma.to_bits(), rep as u64])
    }
}

pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for (c_index, &c) in config.c_values.iter().enumerate() {
        for (p_index, &p) in config.p_values.iter().enumerate() {
            for (sigma_index, &sigma) in config.sigma_list.iter().enumerate() {
                out.push(Cell {
                    c_index,
                    p_index,
                    sigma_index,
                    c,
                    p,
                    sigma,
                });
            }
        }
    }
    out
}

struct Outcome {
    status: RecordStatus,
    x: Option<Vec<f64>>,
    elapsed_ms: f64,
}

fn timed(f: impl FnOnce() -> Solution) -> Outcome {
    let start = Instant::now();
    let sol = f();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Outcome {
        status: sol.status.into(),
        x: sol.x,
        elapsed_ms,
    }
}

/// Generates one instance and its observations, then evaluates the nominal,
/// shrinkage (target `U = 𝟙`) and robust (`γ = factor·σ`) models against
/// the true model. Solver failures become record statuses.
pub fn run_replication(
    cell: &Cell,
    rep: usize,
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let (m, p) = (cell.m(), cell.p);
    let spec = ScenarioSpec {
        noise_model: config.noise_model,
        ..ScenarioSpec::iid(m, p, config.n, cell.sigma)
    };
    let seed = cell.stream_id(rep);
    let rng = RngStream::new(config.master_seed, seed);
    let inst = generate_instance(&spec, &rng)?;
    let obs = generate_observations(&inst.a_true, &spec, &rng)?;

    let truth = ConstrainedProblem::new(inst.a_true.clone(), inst.b.clone(), inst.cost.clone(), 0.0)?;
    let true_obj = solve_lp(&truth)?.objective;

    let base = ExperimentRecord {
        key: RecordKey {
            c_index: cell.c_index,
            p_index: cell.p_index,
            sigma_index: cell.sigma_index,
            rep,
            method_index: 0,
        },
        c: cell.c,
        p,
        m,
        sigma: cell.sigma,
        n: config.n,
        method: Method::Nominal,
        gamma_factor: None,
        rep,
        seed,
        status: RecordStatus::Optimal,
        rel_obj: None,
        viol_mag: None,
        viol_ratio: None,
        solve_time_ms: None,
        alpha_hat: None,
        beta_hat: None,
        clamped: None,
    };
    let finish = |mut rec: ExperimentRecord, out: Outcome| -> ExperimentRecord {
        if config.record_timing {
            rec.solve_time_ms = Some(out.elapsed_ms);
        }
        rec.status = out.status;
        if let (RecordStatus::Optimal, Some(x)) = (out.status, out.x) {
            let achieved = crate::matrix::dot(&inst.cost, &x);
            match true_obj.map(|t| relative_objective(achieved, t)) {
                Some(Ok(rel)) => {
                    let (mag, ratio) = violation_metrics(&inst.a_true, &inst.b, &x);
                    rec.rel_obj = Some(rel);
                    rec.viol_mag = Some(mag);
                    rec.viol_ratio = Some(ratio);
                }
                _ => rec.status = RecordStatus::MetricUndefined,
            }
        }
        rec
    };

    let mut records = Vec::with_capacity(2 + config.gamma_factors.len());
    let a_bar = sample_mean(&obs);

    let nominal = build_nominal(a_bar.clone(), inst.b.clone(), inst.cost.clone())?;
    let out = timed(|| solve_lp(&nominal).expect("nominal model is a pure LP"));
    records.push(finish(base.clone(), out));

    let mut rec = base.clone();
    rec.method = Method::Shrinkage;
    rec.key.method_index = 1;
    let target = target_ones(m, p);
    let start = Instant::now();
    let estimated: Option<(ShrinkageCoefficients, Solution)> = match shrunk_matrix(&obs, &target, config.clamp) {
        Ok((a_star, coeffs)) => {
            let model = build_shrinkage(a_star, inst.b.clone(), inst.cost.clone())?;
            Some((coeffs, solve_lp(&model)?))
        }
        Err(_) => None,
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    match estimated {
        Some((coeffs, sol)) => {
            rec.alpha_hat = Some(coeffs.alpha);
            rec.beta_hat = Some(coeffs.beta);
            rec.clamped = Some(coeffs.clamped);
            let out = Outcome {
                status: sol.status.into(),
                x: sol.x,
                elapsed_ms,
            };
            records.push(finish(rec, out));
        }
        None => {
            rec.status = RecordStatus::Degenerate;
            if config.record_timing {
                rec.solve_time_ms = Some(elapsed_ms);
            }
            records.push(rec);
        }
    }

    let opts = RobustOptions::default();
    for (k, &factor) in config.gamma_factors.iter().enumerate() {
        let mut rec = base.clone();
        rec.method = Method::Robust;
        rec.gamma_factor = Some(factor);
        rec.key.method_index = 2 + k;
        let model = nominal.clone().with_robust_radius(factor * cell.sigma)?;
        let out = timed(|| solve_robust(&model, &opts).expect("radius is positive"));
        records.push(finish(rec, out));
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub records: Vec<ExperimentRecord>,
    pub csv_path: PathBuf,
    pub aggregate_path: PathBuf,
}

impl SweepSummary {
    pub fn failure_rate(&self) -> f64 {
        failure_rate(&self.records)
    }
}

pub fn failure_rate(records: &[ExperimentRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.status.is_failure()).count() as f64 / records.len() as f64
}

/// Runs every (cell, replication) on a pool of `config.workers` threads and
/// returns the records sorted by [`RecordKey`].
pub fn run_records(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>, HarnessError> {
    config.validate()?;
    let tasks: Vec<(Cell, usize)> = cells(config)
        .into_iter()
        .flat_map(|cell| (0..config.reps).map(move |rep| (cell, rep)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let batches: Vec<Result<Vec<ExperimentRecord>, HarnessError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(cell, rep)| run_replication(cell, *rep, config))
            .collect()
    });
    let mut records = Vec::with_capacity(tasks.len() * (2 + config.gamma_factors.len()));
    for batch in batches {
        records.extend(batch?);
    }
    records.sort_by_key(|r| r.key);
    Ok(records)
}

/// Runs the sweep and writes the record CSV and its `_agg` companion.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepSummary, HarnessError> {
    let records = run_records(config)?;
    let csv_path = config.output_path.clone();
    let aggregate_path = config.aggregate_path();
    write_atomically(&csv_path, |w| write_records(&records, w))?;
    write_atomically(&aggregate_path, |w| write_aggregates(&aggregate(&records), w))?;
    Ok(SweepSummary {
        records,
        csv_path,
        aggregate_path,
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place; on error the temporary file is removed and any previous file
/// at `path` is left untouched.
pub(crate) fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut buffered = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut buffered)?;
        buffered.flush()?;
    }
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_records(records: &[ExperimentRecord], out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut w = csv_writer(out);
    w.write_record(CSV_HEADER)?;
    for rec in records {
        w.write_record(rec.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Per (cell, method, γ-factor) means over the `Optimal` records.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub c: f64,
    pub p: usize,
    pub m: usize,
    pub sigma: f64,
    pub n: usize,
    pub method: Method,
    pub gamma_factor: Option<f64>,
    /// Records that entered the means.
    pub count: usize,
    /// Records dropped because their status was not `Optimal`.
    pub excluded: usize,
    pub rel_obj: Option<f64>,
    pub abs_rel_obj: Option<f64>,
    pub viol_mag: Option<f64>,
    pub viol_ratio: Option<f64>,
    pub solve_time_ms: Option<f64>,
    pub alpha_hat: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize, usize, usize), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let k = r.key;
        groups
            .entry((k.c_index, k.p_index, k.sigma_index, k.method_index))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let first = group[0];
            let ok: Vec<&ExperimentRecord> = group.iter().copied().filter(|r| r.status == RecordStatus::Optimal).collect();
            AggregateRow {
                c: first.c,
                p: first.p,
                m: first.m,
                sigma: first.sigma,
                n: first.n,
                method: first.method,
                gamma_factor: first.gamma_factor,
                count: ok.len(),
                excluded: group.len() - ok.len(),
                rel_obj: mean(ok.iter().filter_map(|r| r.rel_obj)),
                abs_rel_obj: mean(ok.iter().filter_map(|r| r.rel_obj.map(f64::abs))),
                viol_mag: mean(ok.iter().filter_map(|r| r.viol_mag)),
                viol_ratio: mean(ok.iter().filter_map(|r| r.viol_ratio)),
                solve_time_ms: mean(ok.iter().filter_map(|r| r.solve_time_ms)),
                alpha_hat: mean(ok.iter().filter_map(|r| r.alpha_hat)),
            }
        })
        .collect()
}

pub fn write_aggregates(rows: &[AggregateRow], out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut w = csv_writer(out);
    w.write_record(AGG_HEADER)?;
    for r in rows {
        w.write_record([
            r.c.to_string(),
            r.p.to_string(),
            r.m.to_string(),
            r.sigma.to_string(),
            r.n.to_string(),
            r.method.to_string(),
            opt(r.gamma_factor),
            r.count.to_string(),
            r.excluded.to_string(),
            opt(r.rel_obj),
            opt(r.abs_rel_obj),
            opt(r.viol_mag),
            opt(r.viol_ratio),
            opt(r.solve_time_ms),
            opt(r.alpha_hat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SweepMode;

    fn small_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            sweep_mode: SweepMode::FixedCVaryP,
            c_values: vec![0.5],
            p_values: vec![20, 30],
            sigma_list: vec![1.0],
            gamma_factors: vec![0.5],
            n: 5,
            reps: 3,
            master_seed: 11,
            output_path: dir.join("results.csv"),
            workers: 1,
            record_timing: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_counts_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let summary = run_sweep(&cfg).unwrap();
        assert_eq!(summary.records.len(), 18);
        let text = std::fs::read_to_string(&summary.csv_path).unwrap();
        assert!(text.starts_with(&(CSV_HEADER.join(",") + "\n")));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 19);
        assert_eq!(summary.failure_rate(), 0.0);
    }

    #[test]
    fn replication_emits_one_record_per_method() {
        let mut cfg = small_config(Path::new("."));
        cfg.gamma_factors = vec![0.2, 0.5, 0.8];
        let cell = cells(&cfg)[0];
        let recs = run_replication(&cell, 0, &cfg).unwrap();
        assert_eq!(recs.len(), 5);
        let methods: Vec<Method> = recs.iter().map(|r| r.method).collect();
        assert_eq!(&methods[..2], &[Method::Nominal, Method::Shrinkage]);
        for r in &recs {
            assert_eq!(r.status, RecordStatus::Optimal);
            assert!((0.0..=1.0).contains(&r.viol_ratio.unwrap()));
            assert!(r.viol_mag.unwrap() >= 0.0);
            assert_eq!(r.alpha_hat.is_some(), r.method == Method::Shrinkage);
            assert_eq!(r.gamma_factor.is_some(), r.method == Method::Robust);
        }
    }

    #[test]
    fn zero_noise_has_no_violations() {
        let mut cfg = small_config(Path::new("."));
        cfg.sigma_list = vec![1e-300];
        let cell = cells(&cfg)[0];
        let recs = run_replication(&cell, 0, &cfg).unwrap();
        for r in recs.iter().filter(|r| r.method == Method::Nominal) {
            assert_eq!(r.viol_mag, Some(0.0));
            assert_eq!(r.viol_ratio, Some(0.0));
        }
    }

    #[test]
    fn aggregate_matches_hand_mean() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_sweep(&small_config(dir.path())).unwrap();
        let mut reader = csv::Reader::from_path(&summary.csv_path).unwrap();
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        let picked: Vec<f64> = rows
            .iter()
            .filter(|r| &r[1] == "20" && &r[5] == "shrinkage")
            .map(|r| r[10].parse().unwrap())
            .collect();
        let hand = picked.iter().sum::<f64>() / picked.len() as f64;
        let agg = aggregate(&summary.records);
        let row = agg.iter().find(|r| r.p == 20 && r.method == Method::Shrinkage).unwrap();
        assert_eq!(row.count, 3);
        assert!((row.rel_obj.unwrap() - hand).abs() < 1e-15);
        assert!(std::fs::read_to_string(&summary.aggregate_path).unwrap().starts_with("c,p,m,sigma"));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        run_sweep(&cfg).unwrap();
        let first = std::fs::read(&cfg.output_path).unwrap();
        run_sweep(&cfg).unwrap();
        assert_eq!(first, std::fs::read(&cfg.output_path).unwrap());
    }

    #[test]
    fn failed_write_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.csv");
        let res = write_atomically(&target, |w| {
            w.write_all(b"partial")?;
            Err(HarnessError::Config("boom".into()))
        });
        assert!(res.is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn nulls_are_empty_fields() {
        let mut cfg = small_config(Path::new("."));
        cfg.gamma_factors.clear();
        let rec = &run_replication(&cells(&cfg)[0], 0, &cfg).unwrap()[0];
        let row = rec.csv_row();
        assert_eq!(row[6], "");
        assert_eq!(row[13], "");
        assert_eq!(row[14], "");
        assert_eq!(row[16], "");
    }
}
