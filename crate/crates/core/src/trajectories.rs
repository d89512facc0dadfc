//! Output trajectories `Y = col(y(0), …, y(N-1))` and labeled datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::norm;
use crate::sysmodel::LinearSystem;

/// Rejection-sampling cap for zero trajectories.
pub const MAX_REDRAWS: usize = 100;

/// Class label; `Positive` is the first system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    /// Label of system index 1 or 2.
    pub fn of_class(class: usize) -> Label {
        if class == 1 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    y: Vec<f64>,
    horizon: usize,
    output_dim: usize,
    label: Option<Label>,
}

impl Trajectory {
    pub fn new(y: Vec<f64>, horizon: usize, output_dim: usize, label: Option<Label>) -> Result<Self> {
        if y.len() != horizon * output_dim {
            return Err(Error::DimensionMismatch {
                context: "trajectory length",
                expected: horizon * output_dim,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory sample"));
        }
        Ok(Trajectory {
            y,
            horizon,
            output_dim,
            label,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn norm(&self) -> f64 {
        norm(&self.y)
    }

    pub fn is_zero(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0)
    }
}

/// Zero-input response from `x0`, propagated step by step.
///
/// A zero result is returned as-is; check [`Trajectory::is_zero`].
pub fn simulate(sys: &LinearSystem, x0: &[f64], horizon: usize) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            context: "initial state length",
            expected: sys.n(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let mut y = Vec::with_capacity(horizon * sys.m());
    let mut x = x0.to_vec();
    for t in 0..horizon {
        y.extend(sys.c().matvec(&x));
        if t + 1 < horizon {
            x = sys.a().matvec(&x);
        }
    }
    Trajectory::new(y, horizon, sys.m(), None)
}

pub fn normalize(t: &Trajectory) -> Result<Trajectory> {
    let n = t.norm();
    if n == 0.0 {
        return Err(Error::ZeroTrajectory);
    }
    Ok(Trajectory {
        y: t.y.iter().map(|v| v / n).collect(),
        ..t.clone()
    })
}

/// Labeled trajectories sharing horizon and output dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    horizon: usize,
    output_dim: usize,
    seed: u64,
    items: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
struct DatasetItemDoc {
    label: Label,
    #[serde(rename = "Y")]
    y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    #[serde(rename = "N")]
    horizon: usize,
    m: usize,
    seed: u64,
    items: Vec<DatasetItemDoc>,
}

impl Dataset {
    pub fn new(horizon: usize, output_dim: usize, seed: u64, items: Vec<Trajectory>) -> Result<Self> {
        for t in &items {
            if t.horizon != horizon || t.output_dim != output_dim {
                return Err(Error::DimensionMismatch {
                    context: "dataset trajectory length",
                    expected: horizon * output_dim,
                    found: t.y.len(),
                });
            }
            if t.label.is_none() {
                return Err(Error::InvalidParameter("dataset items must be labeled".into()));
            }
        }
        Ok(Dataset {
            horizon,
            output_dim,
            seed,
            items,
        })
    }

    /// Builds a dataset directly from `(label, Y)` pairs with `m = 1`.
    pub fn from_pairs(pairs: &[(Label, Vec<f64>)]) -> Result<Self> {
        let horizon = pairs.first().map_or(0, |p| p.1.len());
        let items = pairs
            .iter()
            .map(|(l, y)| Trajectory::new(y.clone(), horizon, 1, Some(*l)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(horizon, 1, 0, items)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn items(&self) -> &[Trajectory] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.items.iter().map(|t| t.label.expect("labeled")).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|t| t.label == Some(label)).count()
    }

    /// Copy with every trajectory scaled to unit norm.
    pub fn normalized(&self) -> Result<Dataset> {
        Ok(Dataset {
            items: self.items.iter().map(normalize).collect::<Result<_>>()?,
            ..self.clone()
        })
    }

    /// Items with the given label, in order.
    pub fn filter(&self, label: Label) -> Dataset {
        Dataset {
            items: self
                .items
                .iter()
                .filter(|t| t.label == Some(label))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DatasetDoc {
            horizon: self.horizon,
            m: self.output_dim,
            seed: self.seed,
            items: self
                .items
                .iter()
                .map(|t| DatasetItemDoc {
                    label: t.label.expect("labeled"),
                    y: t.y.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Dataset> {
        let doc: DatasetDoc = serde_json::from_str(s)?;
        let items = doc
            .items
            .into_iter()
            .map(|it| Trajectory::new(it.y, doc.horizon, doc.m, Some(it.label)))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(doc.horizon, doc.m, doc.seed, items)
    }

    /// CSV with header `label,y_0,…,y_{Nm-1}`; values printed with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let width = self.horizon * self.output_dim;
        let mut out = String::from("label");
        for k in 0..width {
            out.push_str(&format!(",y_{k}"));
        }
        out.push('\n');
        for t in &self.items {
            out.push_str(&i8::from(t.label.expect("labeled")).to_string());
            for v in &t.y {
                out.push(',');
                out.push_str(&format_real(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Scientific notation with 17 significant digits; round-trips exactly.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// SplitMix64 finalizer, used to derive independent seeds from one user seed.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent ChaCha20 stream for trajectory `index` of class `class`.
fn trajectory_rng(seed: u64, class: usize, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 48) | index as u64);
    rng
}

/// `count` nonzero trajectories of one system from i.i.d. `N(0, σ²)` initial states.
///
/// Trajectory `k` draws from its own stream derived from `(seed, class, k)`, so
/// the result does not depend on generation order.
pub fn sample_class(
    sys: &LinearSystem,
    class: usize,
    count: usize,
    horizon: usize,
    sigma2: f64,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    let normal = Normal::new(0.0, sigma2.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let label = Label::of_class(class);
    (0..count)
        .map(|k| {
            let mut rng = trajectory_rng(seed, class, k);
            draw_nonzero(sys, horizon, &normal, &mut rng).map(|t| t.with_label(label))
        })
        .collect()
}

fn draw_nonzero<R: Rng>(
    sys: &LinearSystem,
    horizon: usize,
    normal: &Normal<f64>,
    rng: &mut R,
) -> Result<Trajectory> {
    for _ in 0..=MAX_REDRAWS {
        let x0: Vec<f64> = (0..sys.n()).map(|_| normal.sample(rng)).collect();
        let t = simulate(sys, &x0, horizon)?;
        if !t.is_zero() {
            return Ok(t);
        }
    }
    Err(Error::RetryCapExceeded {
        retries: MAX_REDRAWS,
    })
}

/// Balanced dataset: `per_class` trajectories of `sys1` (label +1) followed by
/// `per_class` of `sys2` (label −1).
pub fn random_dataset(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    per_class: usize,
    horizon: usize,
    sigma2: f64,
    seed: u64,
) -> Result<Dataset> {
    if sys1.m() != sys2.m() {
        return Err(Error::OutputDimMismatch {
            m1: sys1.m(),
            m2: sys2.m(),
        });
    }
    if per_class == 0 || horizon == 0 {
        return Err(Error::InvalidParameter(
            "per-class count and horizon must be positive".into(),
        ));
    }
    let mut items = sample_class(sys1, 1, per_class, horizon, sigma2, seed)?;
    items.extend(sample_class(sys2, 2, per_class, horizon, sigma2, seed)?);
    Dataset::new(horizon, sys1.m(), seed, items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn scalar(a: f64) -> LinearSystem {
        LinearSystem::new(
            Matrix::from_row_slice(1, 1, &[a]).unwrap(),
            Matrix::identity(1),
        )
        .unwrap()
    }

    #[test]
    fn simulate_examples() {
        assert_eq!(simulate(&scalar(2.0), &[1.0], 3).unwrap().y(), &[1.0, 2.0, 4.0]);
        assert_eq!(simulate(&scalar(-1.0), &[1.0], 2).unwrap().y(), &[1.0, -1.0]);
        let z = simulate(&scalar(2.0), &[0.0], 3).unwrap();
        assert!(z.is_zero());
        assert!(simulate(&scalar(2.0), &[1.0, 2.0], 3).is_err());
        assert!(simulate(&scalar(2.0), &[1.0], 0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let t = Trajectory::new(vec![3.0, 4.0], 2, 1, Some(Label::Negative)).unwrap();
        let n = normalize(&t).unwrap();
        assert_eq!(n.y(), &[0.6, 0.8]);
        assert_eq!(n.label(), Some(Label::Negative));
        let unit = Trajectory::new(vec![0.0, 1.0], 2, 1, None).unwrap();
        assert_eq!(normalize(&unit).unwrap().y(), unit.y());
        let zero = Trajectory::new(vec![0.0, 0.0], 2, 1, None).unwrap();
        assert!(matches!(normalize(&zero), Err(Error::ZeroTrajectory)));
    }

    #[test]
    fn dataset_cardinality_and_labels() {
        let d = random_dataset(&scalar(0.9), &scalar(-0.5), 25, 4, 100.0, 7).unwrap();
        assert_eq!(d.len(), 50);
        assert_eq!(d.count(Label::Positive), 25);
        assert_eq!(d.count(Label::Negative), 25);
        assert!(d.items()[..25].iter().all(|t| t.label() == Some(Label::Positive)));
    }

    #[test]
    fn dataset_determinism() {
        let a = random_dataset(&scalar(0.9), &scalar(-0.5), 10, 4, 100.0, 42).unwrap();
        let b = random_dataset(&scalar(0.9), &scalar(-0.5), 10, 4, 100.0, 42).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        let c = random_dataset(&scalar(0.9), &scalar(-0.5), 10, 4, 100.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_prefix_stable_in_count() {
        // Per-trajectory streams: asking for more items extends, never reshuffles.
        let small = sample_class(&scalar(0.9), 1, 3, 4, 1.0, 5).unwrap();
        let large = sample_class(&scalar(0.9), 1, 8, 4, 1.0, 5).unwrap();
        assert_eq!(small[..], large[..3]);
    }

    #[test]
    fn dataset_json_format() {
        let d = Dataset::from_pairs(&[
            (Label::Positive, vec![1.0, 1.0]),
            (Label::Negative, vec![1.0, -1.0]),
        ])
        .unwrap();
        let s = d.to_json().unwrap();
        assert_eq!(
            s,
            r#"{"N":2,"m":1,"seed":0,"items":[{"label":1,"Y":[1.0,1.0]},{"label":-1,"Y":[1.0,-1.0]}]}"#
        );
        assert_eq!(Dataset::from_json(&s).unwrap(), d);
        assert!(Dataset::from_json(r#"{"N":2,"m":1,"seed":0,"items":[{"label":0,"Y":[1,1]}]}"#).is_err());
        assert!(Dataset::from_json(r#"{"N":2,"m":1,"seed":0,"items":[{"label":1,"Y":[1]}]}"#).is_err());
    }

    #[test]
    fn dataset_csv_format() {
        let d = Dataset::from_pairs(&[(Label::Negative, vec![0.5, 0.1])]).unwrap();
        let csv = d.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("label,y_0,y_1"));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], "-1");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.1);
        assert_eq!(fields[2], "1.0000000000000001e-1");
    }

    #[test]
    fn invalid_sampling_parameters() {
        assert!(random_dataset(&scalar(0.9), &scalar(0.5), 0, 4, 1.0, 0).is_err());
        assert!(random_dataset(&scalar(0.9), &scalar(0.5), 2, 4, 0.0, 0).is_err());
        let two_out = LinearSystem::new(Matrix::identity(1), Matrix::column_vector(&[1.0, 2.0])).unwrap();
        assert!(matches!(
            random_dataset(&scalar(0.9), &two_out, 2, 4, 1.0, 0),
            Err(Error::OutputDimMismatch { .. })
        ));
    }

    #[test]
    fn derive_seed_separates_purposes() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
    }
}
