//! Open-loop versus closed-loop detection experiment.
//!
//! System 1 is the sampled open-loop plant `G(s)`, system 2 the sampled
//! closed loop `K·G/(1 + K·G)`. Each run draws a balanced training set of `L`
//! trajectories and a balanced validation set of `Qv`, trains the chosen
//! classifier, and reports the validation error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margin::{margin_chain_for_model, MarginReport};
use crate::modelbased::build;
use crate::svm::{train_hard_margin, train_soft_margin, SoftMarginConfig, SvmModel};
use crate::sysmodel::{close_loop, discretize, feasibility_check, require_feasible, tf_to_ss, ContinuousSiso, LinearSystem};
use crate::trajectories::{derive_seed, normalize, random_dataset, sample_class, Dataset, Label, Trajectory};

const PURPOSE_TRAIN: u64 = 1;
const PURPOSE_VALIDATION: u64 = 2;
const PURPOSE_CLOUD: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    ModelBased,
    SvmHard,
    SvmSoft,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model-based" => Ok(ClassifierKind::ModelBased),
            "svm-hard" => Ok(ClassifierKind::SvmHard),
            "svm-soft" => Ok(ClassifierKind::SvmSoft),
            other => Err(Error::InvalidParameter(format!(
                "unknown classifier {other:?} (expected model-based, svm-hard or svm-soft)"
            ))),
        }
    }
}

fn default_tf() -> ContinuousSiso {
    ContinuousSiso::new(vec![1.0, 1.0], vec![10.0, 11.0, 11.0, 1.0]).expect("valid plant")
}

fn default_gain() -> f64 {
    30.0
}
fn default_ts() -> f64 {
    0.1
}
fn default_horizon() -> usize {
    10
}
fn default_train() -> usize {
    50
}
fn default_validation() -> usize {
    1000
}
fn default_sigma2() -> f64 {
    100.0
}
fn default_true() -> bool {
    true
}
fn default_classifier() -> ClassifierKind {
    ClassifierKind::SvmHard
}
fn default_seeds() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_tf")]
    pub tf: ContinuousSiso,
    #[serde(rename = "K", default = "default_gain")]
    pub gain: f64,
    #[serde(rename = "Ts", default = "default_ts")]
    pub ts: f64,
    #[serde(rename = "N", default = "default_horizon")]
    pub horizon: usize,
    /// Total training size, split evenly between the classes.
    #[serde(rename = "L", default = "default_train")]
    pub train_size: usize,
    /// Total validation size; class 1 receives the extra item when odd.
    #[serde(rename = "Qv", default = "default_validation")]
    pub validation_size: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default = "default_classifier")]
    pub classifier: ClassifierKind,
    #[serde(rename = "softC", default)]
    pub soft_c: Option<f64>,
    /// Number of independent repetitions averaged in the report.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tf: default_tf(),
            gain: default_gain(),
            ts: default_ts(),
            horizon: default_horizon(),
            train_size: default_train(),
            validation_size: default_validation(),
            sigma2: default_sigma2(),
            seed: 0,
            normalize: true,
            classifier: default_classifier(),
            soft_c: None,
            seeds: default_seeds(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.horizon == 0 {
            return bad("N must be at least 1".into());
        }
        if self.train_size < 2 || self.train_size % 2 != 0 {
            return bad(format!("L must be even and at least 2, got {}", self.train_size));
        }
        if self.validation_size == 0 {
            return bad("Qv must be at least 1".into());
        }
        if !(self.ts > 0.0) || !self.ts.is_finite() {
            return bad(format!("Ts must be positive, got {}", self.ts));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !self.gain.is_finite() {
            return Err(Error::NonFinite("feedback gain"));
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if let Some(c) = self.soft_c {
            SoftMarginConfig::new(c)?;
        }
        Ok(())
    }

    fn soft_config(&self) -> Result<SoftMarginConfig> {
        SoftMarginConfig::new(self.soft_c.unwrap_or(1.0))
    }
}

/// Sampled open-loop and closed-loop systems.
pub fn build_systems(cfg: &ExperimentConfig) -> Result<(LinearSystem, LinearSystem)> {
    let open = discretize(&tf_to_ss(&cfg.tf)?, cfg.ts)?;
    let closed = discretize(&tf_to_ss(&close_loop(&cfg.tf, cfg.gain)?)?, cfg.ts)?;
    Ok((open, closed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    #[serde(rename = "R_test")]
    pub r_test: f64,
    pub errors_class1: usize,
    pub errors_class2: usize,
    pub abstentions: usize,
    /// Hard-margin training found no separating hyperplane; the run is scored at chance.
    pub not_separable: bool,
    pub support_vectors: Option<usize>,
    pub margin: Option<MarginReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ExperimentConfig,
    #[serde(rename = "R_test_mean")]
    pub r_test_mean: f64,
    #[serde(rename = "R_test_std")]
    pub r_test_std: f64,
    pub feasible: bool,
    pub min_feasible_horizon: Option<usize>,
    pub runs: Vec<SeedRun>,
    pub wall_clock_seconds: f64,
}

impl ValidationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Seconds since `start`; browsers have no monotonic clock in `std`, so wasm reports zero.
#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Balanced validation set of `total` trajectories.
fn validation_set(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let first = cfg.validation_size.div_ceil(2);
    let mut items = sample_class(sys1, 1, first, cfg.horizon, cfg.sigma2, seed)?;
    items.extend(sample_class(
        sys2,
        2,
        cfg.validation_size - first,
        cfg.horizon,
        cfg.sigma2,
        seed,
    )?);
    Ok(items)
}

/// Balanced training set for repetition seed `seed`.
pub fn training_set(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Dataset> {
    random_dataset(
        sys1,
        sys2,
        cfg.train_size / 2,
        cfg.horizon,
        cfg.sigma2,
        derive_seed(seed, PURPOSE_TRAIN),
    )
}

enum Trained {
    ModelBased(crate::modelbased::ModelBasedClassifier),
    Svm(SvmModel),
    /// Scored at chance level.
    NotSeparable,
}

fn run_one(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    cfg: &ExperimentConfig,
    seed: u64,
    feasible: bool,
) -> Result<SeedRun> {
    let train = training_set(sys1, sys2, cfg, seed)?;
    let trained = match cfg.classifier {
        ClassifierKind::ModelBased => Trained::ModelBased(build(sys1, sys2, cfg.horizon)?),
        ClassifierKind::SvmHard => match train_hard_margin(&train, cfg.normalize) {
            Ok(m) => Trained::Svm(m),
            Err(Error::NotSeparable { .. }) => Trained::NotSeparable,
            Err(e) => return Err(e),
        },
        ClassifierKind::SvmSoft => Trained::Svm(train_soft_margin(&train, &cfg.soft_config()?, cfg.normalize)?),
    };

    let margin = match &trained {
        Trained::Svm(model) if cfg.classifier == ClassifierKind::SvmHard && cfg.normalize && feasible => {
            Some(margin_chain_for_model(sys1, sys2, cfg.horizon, &train, model)?)
        }
        _ => None,
    };

    let validation = validation_set(sys1, sys2, cfg, derive_seed(seed, PURPOSE_VALIDATION))?;
    let total = validation.len();
    let (mut err1, mut err2, mut abstentions) = (0, 0, 0);
    if let Trained::NotSeparable = trained {
        return Ok(SeedRun {
            seed,
            r_test: 0.5,
            errors_class1: 0,
            errors_class2: 0,
            abstentions: 0,
            not_separable: true,
            support_vectors: None,
            margin,
        });
    }
    for t in &validation {
        let y = if cfg.normalize { normalize(t)? } else { t.clone() };
        let decided = match &trained {
            Trained::ModelBased(c) => c.classify(y.y())?.label(),
            Trained::Svm(m) => {
                let v = m.predict(y.y(), true)?;
                if v > 0.0 {
                    Some(Label::Positive)
                } else if v < 0.0 {
                    Some(Label::Negative)
                } else {
                    None
                }
            }
            Trained::NotSeparable => unreachable!(),
        };
        let truth = t.label().expect("labeled");
        if decided != Some(truth) {
            if decided.is_none() {
                abstentions += 1;
            }
            match truth {
                Label::Positive => err1 += 1,
                Label::Negative => err2 += 1,
            }
        }
    }
    Ok(SeedRun {
        seed,
        r_test: (err1 + err2) as f64 / total as f64,
        errors_class1: err1,
        errors_class2: err2,
        abstentions,
        not_separable: false,
        support_vectors: match &trained {
            Trained::Svm(m) => Some(m.support_indices.len()),
            _ => None,
        },
        margin,
    })
}

/// Runs `cfg.seeds` repetitions with seeds `cfg.seed, cfg.seed + 1, …`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let elapsed = stopwatch();
    let (sys1, sys2) = build_systems(cfg)?;
    let feasibility = feasibility_check(&sys1, &sys2, cfg.horizon)?;
    let min_feasible_horizon = crate::sysmodel::min_feasible_horizon(&sys1, &sys2)?;
    if cfg.classifier == ClassifierKind::ModelBased {
        require_feasible(&sys1, &sys2, cfg.horizon)?;
    }
    let runs = (0..cfg.seeds as u64)
        .map(|s| run_one(&sys1, &sys2, cfg, cfg.seed.wrapping_add(s), feasibility.feasible))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&runs.iter().map(|r| r.r_test).collect::<Vec<_>>());
    Ok(ValidationReport {
        config: cfg.clone(),
        r_test_mean: mean,
        r_test_std: std,
        feasible: feasibility.feasible,
        min_feasible_horizon,
        runs,
        wall_clock_seconds: elapsed(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    N,
    L,
    Ts,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(SweepAxis::N),
            "L" => Ok(SweepAxis::L),
            "Ts" => Ok(SweepAxis::Ts),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep axis {other:?} (expected N, L or Ts)"
            ))),
        }
    }
}

fn as_count(v: f64, axis: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidParameter(format!("{axis} must be a nonnegative integer, got {v}")))
    }
}

/// Base configuration with one axis overridden.
pub fn derive_config(base: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::N => cfg.horizon = as_count(value, "N")?,
        SweepAxis::L => cfg.train_size = as_count(value, "L")?,
        SweepAxis::Ts => cfg.ts = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub report: Option<ValidationReport>,
    pub error: Option<String>,
}

/// One row per value, in input order. Cells run on separate threads; a
/// failing cell records its error and the sweep continues.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Vec<SweepRow> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&v| scope.spawn(move || derive_config(base, axis, v).and_then(|cfg| run_experiment(&cfg))))
            .collect();
        values
            .iter()
            .zip(handles)
            .map(|(&axis_value, h)| {
                let outcome = h.join().unwrap_or_else(|_| {
                    Err(Error::InvalidParameter("sweep cell panicked".into()))
                });
                match outcome {
                    Ok(report) => SweepRow {
                        axis_value,
                        report: Some(report),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        axis_value,
                        report: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    })
}

/// `axis_value,R_test_mean,R_test_std,seeds`; failed cells print `NaN` and zero seeds.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_value,R_test_mean,R_test_std,seeds\n");
    for row in rows {
        match &row.report {
            Some(r) => out.push_str(&format!(
                "{},{},{},{}\n",
                row.axis_value,
                r.r_test_mean,
                r.r_test_std,
                r.runs.len()
            )),
            None => out.push_str(&format!("{},NaN,NaN,0\n", row.axis_value)),
        }
    }
    out
}

/// `count` normalized trajectories of each system, as two datasets.
pub fn emit_trajectory_cloud(cfg: &ExperimentConfig, count: usize) -> Result<(Dataset, Dataset)> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be positive".into()));
    }
    cfg.validate()?;
    let (sys1, sys2) = build_systems(cfg)?;
    let seed = derive_seed(cfg.seed, PURPOSE_CLOUD);
    let data = random_dataset(&sys1, &sys2, count, cfg.horizon, cfg.sigma2, seed)?.normalized()?;
    Ok((data.filter(Label::Positive), data.filter(Label::Negative)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(classifier: ClassifierKind, horizon: usize) -> ExperimentConfig {
        ExperimentConfig {
            horizon,
            train_size: 10,
            validation_size: 40,
            seeds: 2,
            seed: 7,
            classifier,
            ..Default::default()
        }
    }

    #[test]
    fn config_defaults_from_empty_json() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.tf.den(), &[10.0, 11.0, 11.0, 1.0]);
        assert_eq!((cfg.horizon, cfg.train_size, cfg.validation_size), (10, 50, 1000));
    }

    #[test]
    fn config_rejects_invalid_values() {
        for json in [
            r#"{"L": 3}"#,
            r#"{"L": 0}"#,
            r#"{"N": 0}"#,
            r#"{"Ts": 0.0}"#,
            r#"{"sigma2": -1.0}"#,
            r#"{"Qv": 0}"#,
            r#"{"softC": 0.0}"#,
            r#"{"seeds": 0}"#,
            r#"{"bogus": 1}"#,
            r#"{"tf": {"num": [1.0, 1.0], "den": [1.0, 1.0]}}"#,
        ] {
            assert!(ExperimentConfig::from_json(json).is_err(), "{json}");
        }
    }

    #[test]
    fn closed_loop_system_is_third_order() {
        let (s1, s2) = build_systems(&ExperimentConfig::default()).unwrap();
        assert_eq!((s1.n(), s2.n(), s1.m()), (3, 3, 1));
        assert!(feasibility_check(&s1, &s2, 6).unwrap().feasible);
        assert!(!feasibility_check(&s1, &s2, 5).unwrap().feasible);
    }

    #[test]
    fn model_based_is_exact_on_noise_free_data() {
        let report = run_experiment(&quick(ClassifierKind::ModelBased, 10)).unwrap();
        assert_eq!(report.r_test_mean, 0.0);
        assert!(report.runs.iter().all(|r| r.abstentions == 0));
    }

    #[test]
    fn model_based_reports_infeasible_horizon() {
        match run_experiment(&quick(ClassifierKind::ModelBased, 4)) {
            Err(Error::Infeasible { min_horizon, .. }) => assert_eq!(min_horizon, Some(6)),
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = quick(ClassifierKind::SvmSoft, 8);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.runs, b.runs);
    }

    #[test]
    fn sweep_keeps_order_and_records_errors() {
        let base = quick(ClassifierKind::ModelBased, 10);
        let rows = sweep(&base, SweepAxis::N, &[10.0, 3.0, 8.0]);
        assert_eq!(rows.iter().map(|r| r.axis_value).collect::<Vec<_>>(), [10.0, 3.0, 8.0]);
        assert!(rows[0].report.is_some() && rows[2].report.is_some());
        assert!(rows[1].error.as_deref().unwrap().contains("not separable"));
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("axis_value,R_test_mean,R_test_std,seeds\n10,0,0,2\n3,NaN,NaN,0\n"));
        assert!(sweep(&base, SweepAxis::L, &[]).is_empty());
        assert_eq!(sweep_csv(&[]), "axis_value,R_test_mean,R_test_std,seeds\n");
    }

    #[test]
    fn sweep_rejects_fractional_counts() {
        let base = quick(ClassifierKind::ModelBased, 10);
        assert!(derive_config(&base, SweepAxis::N, 2.5).is_err());
        assert!(derive_config(&base, SweepAxis::L, 5.0).is_err());
        assert_eq!(derive_config(&base, SweepAxis::Ts, 0.5).unwrap().ts, 0.5);
    }

    #[test]
    fn trajectory_cloud_is_normalized() {
        let (c1, c2) = emit_trajectory_cloud(&ExperimentConfig::default(), 3).unwrap();
        assert_eq!((c1.len(), c2.len()), (3, 3));
        for t in c1.items().iter().chain(c2.items()) {
            assert!((t.norm() - 1.0).abs() < 1e-10);
            assert_eq!(t.y().len(), 10);
        }
        let (one1, one2) = emit_trajectory_cloud(&ExperimentConfig::default(), 1).unwrap();
        assert_eq!(one1.len() + one2.len(), 2);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
