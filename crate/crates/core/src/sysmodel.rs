//! Autonomous discrete-time linear systems `x(t+1) = A x(t)`, `y(t) = C x(t)`,
//! their observability matrices, and the continuous-time SISO plumbing used to
//! build sampled-data examples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{default_rank_tol, expm, rank_from_singular_values, svd, Matrix};

/// A state-space pair `(A, C)` with no observability guarantee.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "C")]
    pub c: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, c: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if c.cols() != a.rows() {
            return Err(Error::DimensionMismatch {
                context: "output matrix columns",
                expected: a.rows(),
                found: c.cols(),
            });
        }
        if a.rows() == 0 || c.rows() == 0 {
            return Err(Error::InvalidParameter(
                "state and output dimensions must be positive".into(),
            ));
        }
        a.check_finite()?;
        c.check_finite()?;
        Ok(StateSpace { a, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    /// `[C; CA; …; CA^{N-1}]` by repeated right-multiplication.
    pub fn observability(&self, horizon: usize) -> Matrix {
        let (m, n) = (self.output_dim(), self.state_dim());
        let mut data = Vec::with_capacity(horizon * m * n);
        let mut block = self.c.clone();
        for k in 0..horizon {
            data.extend_from_slice(block.as_slice());
            if k + 1 < horizon {
                block = block.matmul(&self.a);
            }
        }
        Matrix::from_row_slice(horizon * m, n, &data).expect("shape by construction")
    }
}

/// Observable autonomous linear system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearSystem {
    #[serde(flatten)]
    inner: StateSpace,
}

impl LinearSystem {
    /// Validates shapes and observability of `(C, A)`.
    pub fn new(a: Matrix, c: Matrix) -> Result<Self> {
        Self::from_state_space(StateSpace::new(a, c)?)
    }

    pub fn from_state_space(ss: StateSpace) -> Result<Self> {
        let n = ss.state_dim();
        let o = ss.observability(n);
        let rank = numerical_rank_default(&o)?;
        if rank < n {
            return Err(Error::Unobservable { rank, n });
        }
        Ok(LinearSystem { inner: ss })
    }

    pub fn a(&self) -> &Matrix {
        &self.inner.a
    }

    pub fn c(&self) -> &Matrix {
        &self.inner.c
    }

    pub fn n(&self) -> usize {
        self.inner.state_dim()
    }

    pub fn m(&self) -> usize {
        self.inner.output_dim()
    }

    pub fn as_state_space(&self) -> &StateSpace {
        &self.inner
    }

    /// Applies the coordinate change `x = T z`, giving `(T⁻¹AT, CT)`.
    pub fn transformed(&self, t: &Matrix) -> Result<LinearSystem> {
        let t_inv = t.inverse()?;
        LinearSystem::new(
            t_inv.matmul(self.a()).matmul(t),
            self.c().matmul(t),
        )
    }
}

impl<'de> Deserialize<'de> for LinearSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ss = StateSpace::deserialize(d)?;
        let ss = StateSpace::new(ss.a, ss.c).map_err(serde::de::Error::custom)?;
        LinearSystem::from_state_space(ss).map_err(serde::de::Error::custom)
    }
}

fn numerical_rank_default(m: &Matrix) -> Result<usize> {
    let s = svd(m)?.s;
    Ok(rank_from_singular_values(&s, default_rank_tol(m)))
}

/// Stacked observability matrix of order `horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityMatrix {
    pub matrix: Matrix,
    pub horizon: usize,
    pub output_dim: usize,
}

pub fn observability_matrix(sys: &LinearSystem, horizon: usize) -> Result<ObservabilityMatrix> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    Ok(ObservabilityMatrix {
        matrix: sys.as_state_space().observability(horizon),
        horizon,
        output_dim: sys.m(),
    })
}

/// Outcome of the rank test `rank [O1 O2] = n1 + n2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub rank: usize,
    pub required_rank: usize,
    /// Smallest singular value of `[O1 O2]` (zero when it has fewer rows than columns).
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    /// `ceil((n1 + n2) / m)`, the fewest samples that can possibly pass.
    pub horizon_lower_bound: usize,
    /// Set when the horizon is below `horizon_lower_bound`.
    pub warning: Option<String>,
}

fn check_outputs(sys1: &LinearSystem, sys2: &LinearSystem) -> Result<()> {
    if sys1.m() != sys2.m() {
        return Err(Error::OutputDimMismatch {
            m1: sys1.m(),
            m2: sys2.m(),
        });
    }
    Ok(())
}

pub fn feasibility_check(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    horizon: usize,
) -> Result<FeasibilityReport> {
    check_outputs(sys1, sys2)?;
    let o1 = observability_matrix(sys1, horizon)?.matrix;
    let o2 = observability_matrix(sys2, horizon)?.matrix;
    let joint = o1.hstack(&o2)?;
    let required = sys1.n() + sys2.n();
    let s = svd(&joint)?.s;
    let rank = rank_from_singular_values(&s, default_rank_tol(&joint));
    let smallest = if joint.rows() < joint.cols() {
        0.0
    } else {
        s.last().copied().unwrap_or(0.0)
    };
    let lower = required.div_ceil(sys1.m());
    let warning = (horizon < lower).then(|| {
        format!("horizon {horizon} is below ceil((n1+n2)/m) = {lower}; the rank test cannot pass")
    });
    Ok(FeasibilityReport {
        feasible: rank == required,
        rank,
        required_rank: required,
        smallest_singular_value: smallest,
        largest_singular_value: s.first().copied().unwrap_or(0.0),
        horizon_lower_bound: lower,
        warning,
    })
}

/// Smallest horizon passing the rank test, if any. The rank of `[O1 O2]`
/// stops growing once the horizon reaches `n1 + n2`, so the search ends there.
pub fn min_feasible_horizon(sys1: &LinearSystem, sys2: &LinearSystem) -> Result<Option<usize>> {
    check_outputs(sys1, sys2)?;
    let total = sys1.n() + sys2.n();
    for horizon in total.div_ceil(sys1.m()).max(1)..=total {
        if feasibility_check(sys1, sys2, horizon)?.feasible {
            return Ok(Some(horizon));
        }
    }
    Ok(None)
}

/// Returns an error carrying the smallest feasible horizon when the rank test fails.
pub fn require_feasible(
    sys1: &LinearSystem,
    sys2: &LinearSystem,
    horizon: usize,
) -> Result<FeasibilityReport> {
    let report = feasibility_check(sys1, sys2, horizon)?;
    if report.feasible {
        Ok(report)
    } else {
        Err(Error::Infeasible {
            horizon,
            rank: report.rank,
            required: report.required_rank,
            min_horizon: min_feasible_horizon(sys1, sys2)?,
        })
    }
}

/// `(blkdiag(A1, A2), [C1 C2])`. May be unobservable, hence the raw pair.
pub fn parallel_interconnection(sys1: &LinearSystem, sys2: &LinearSystem) -> Result<StateSpace> {
    check_outputs(sys1, sys2)?;
    StateSpace::new(sys1.a().block_diag(sys2.a()), sys1.c().hstack(sys2.c())?)
}

/// Strictly proper continuous-time SISO transfer function, coefficients in
/// ascending powers of `s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousSiso {
    num: Vec<f64>,
    den: Vec<f64>,
}

fn trim_trailing_zeros(mut p: Vec<f64>) -> Vec<f64> {
    while p.last() == Some(&0.0) {
        p.pop();
    }
    p
}

impl ContinuousSiso {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(&den).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("transfer function coefficient"));
        }
        let den = trim_trailing_zeros(den);
        let num = trim_trailing_zeros(num);
        if den.len() < 2 {
            return Err(Error::InvalidTransferFunction(
                "denominator must have degree at least 1".into(),
            ));
        }
        if num.len() >= den.len() {
            return Err(Error::InvalidTransferFunction(format!(
                "not strictly proper: numerator degree {} >= denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        Ok(ContinuousSiso { num, den })
    }

    /// Numerator, ascending degree, trailing zeros removed (empty for the zero system).
    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }
}

impl<'de> Deserialize<'de> for ContinuousSiso {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num: Vec<f64>,
            den: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        ContinuousSiso::new(raw.num, raw.den).map_err(serde::de::Error::custom)
    }
}

/// Controllable canonical realization of the autonomous part.
///
/// With monic denominator `s^n + a_{n-1}s^{n-1} + … + a_0`, `A` has ones on the
/// superdiagonal and last row `[-a_0 … -a_{n-1}]`; `C` holds the numerator
/// coefficients scaled by the leading denominator coefficient.
pub fn tf_to_ss(g: &ContinuousSiso) -> Result<StateSpace> {
    let n = g.order();
    let lead = g.den[n];
    let mut a = Matrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -g.den[j] / lead;
    }
    let mut c = Matrix::zeros(1, n);
    for (j, &b) in g.num.iter().enumerate() {
        c[(0, j)] = b / lead;
    }
    StateSpace::new(a, c)
}

/// Negative unity feedback around `K·G`: `W = K G / (1 + K G)`.
pub fn close_loop(g: &ContinuousSiso, gain: f64) -> Result<ContinuousSiso> {
    if !gain.is_finite() {
        return Err(Error::NonFinite("feedback gain"));
    }
    let num: Vec<f64> = g.num.iter().map(|b| gain * b).collect();
    if num.iter().all(|&b| b == 0.0) {
        return Err(Error::ZeroSystem);
    }
    let mut den = g.den.clone();
    for (d, b) in den.iter_mut().zip(&num) {
        *d += b;
    }
    if den.last() == Some(&0.0) {
        return Err(Error::DegenerateFeedback);
    }
    ContinuousSiso::new(num, den)
}

/// Exact zero-input sampling: `A = exp(A_c · Ts)`, `C = C_c`.
pub fn discretize(continuous: &StateSpace, ts: f64) -> Result<LinearSystem> {
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sampling time must be positive, got {ts}"
        )));
    }
    let a = expm(&continuous.a.scale(ts))?;
    LinearSystem::new(a, continuous.c.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, c: f64) -> LinearSystem {
        LinearSystem::new(
            Matrix::from_row_slice(1, 1, &[a]).unwrap(),
            Matrix::from_row_slice(1, 1, &[c]).unwrap(),
        )
        .unwrap()
    }

    fn demo_plant() -> ContinuousSiso {
        // (s + 1) / ((s + 10)(s^2 + s + 1))
        ContinuousSiso::new(vec![1.0, 1.0], vec![10.0, 11.0, 11.0, 1.0]).unwrap()
    }

    #[test]
    fn observability_jordan_block() {
        let sys = LinearSystem::new(
            Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let o = observability_matrix(&sys, 3).unwrap();
        let want = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_eq!(o.matrix, want);
        assert!(observability_matrix(&sys, 0).is_err());
    }

    #[test]
    fn observability_scalar_examples() {
        assert_eq!(
            observability_matrix(&scalar(1.0, 1.0), 2).unwrap().matrix.as_slice(),
            &[1.0, 1.0]
        );
        assert_eq!(
            observability_matrix(&scalar(-1.0, 1.0), 2).unwrap().matrix.as_slice(),
            &[1.0, -1.0]
        );
    }

    #[test]
    fn unobservable_rejected() {
        let err = LinearSystem::new(
            Matrix::identity(2),
            Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unobservable { rank: 1, n: 2 }));
        assert!(LinearSystem::new(Matrix::zeros(2, 3), Matrix::zeros(1, 3)).is_err());
        assert!(LinearSystem::new(Matrix::identity(2), Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn feasibility_scalar_pair() {
        let (s1, s2) = (scalar(1.0, 1.0), scalar(-1.0, 1.0));
        let r2 = feasibility_check(&s1, &s2, 2).unwrap();
        assert!(r2.feasible);
        assert_eq!(r2.rank, 2);
        assert!(r2.warning.is_none());
        let r1 = feasibility_check(&s1, &s2, 1).unwrap();
        assert!(!r1.feasible);
        assert_eq!(r1.rank, 1);
        assert!(r1.warning.is_some());
        assert_eq!(min_feasible_horizon(&s1, &s2).unwrap(), Some(2));
    }

    #[test]
    fn feasibility_identical_systems() {
        let s = scalar(0.5, 2.0);
        for n in 1..6 {
            assert!(!feasibility_check(&s, &s, n).unwrap().feasible);
        }
        assert_eq!(min_feasible_horizon(&s, &s).unwrap(), None);
        assert!(matches!(
            require_feasible(&s, &s, 3),
            Err(Error::Infeasible {
                min_horizon: None,
                ..
            })
        ));
    }

    #[test]
    fn feasibility_output_mismatch() {
        let s1 = scalar(1.0, 1.0);
        let s2 = LinearSystem::new(Matrix::identity(1), Matrix::column_vector(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            feasibility_check(&s1, &s2, 2),
            Err(Error::OutputDimMismatch { m1: 1, m2: 2 })
        ));
    }

    #[test]
    fn parallel_scalar_pair() {
        let p = parallel_interconnection(&scalar(1.0, 1.0), &scalar(-1.0, 1.0)).unwrap();
        assert_eq!(p.a, Matrix::from_diag(&[1.0, -1.0]));
        assert_eq!(p.c.as_slice(), &[1.0, 1.0]);
        let dup = parallel_interconnection(&scalar(0.3, 2.0), &scalar(0.3, 2.0)).unwrap();
        assert_eq!(dup.a, Matrix::from_diag(&[0.3, 0.3]));
        assert_eq!(dup.c.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn parallel_shapes() {
        let g = discretize(&tf_to_ss(&demo_plant()).unwrap(), 0.1).unwrap();
        let p = parallel_interconnection(&g, &g).unwrap();
        assert_eq!(p.a.shape(), (6, 6));
        assert_eq!(p.c.shape(), (1, 6));
    }

    #[test]
    fn canonical_realizations() {
        let ss = tf_to_ss(&demo_plant()).unwrap();
        assert_eq!(
            ss.a,
            Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-10.0, -11.0, -11.0]]).unwrap()
        );
        assert_eq!(ss.c.as_slice(), &[1.0, 1.0, 0.0]);

        let first = tf_to_ss(&ContinuousSiso::new(vec![1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(first.a.as_slice(), &[-1.0]);
        assert_eq!(first.c.as_slice(), &[1.0]);

        let dint = tf_to_ss(&ContinuousSiso::new(vec![1.0], vec![0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(dint.a, Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap());
        assert_eq!(dint.c.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn improper_rejected() {
        assert!(matches!(
            ContinuousSiso::new(vec![1.0, 1.0], vec![1.0, 1.0]),
            Err(Error::InvalidTransferFunction(_))
        ));
        assert!(ContinuousSiso::new(vec![1.0], vec![2.0]).is_err());
        // Trailing zeros do not count toward the degree.
        assert!(ContinuousSiso::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn closed_loop_examples() {
        let w = close_loop(&demo_plant(), 30.0).unwrap();
        assert_eq!(w.num(), &[30.0, 30.0]);
        assert_eq!(w.den(), &[40.0, 41.0, 11.0, 1.0]);

        let g = ContinuousSiso::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let w = close_loop(&g, 1.0).unwrap();
        assert_eq!(w.num(), &[1.0]);
        assert_eq!(w.den(), &[2.0, 1.0]);

        assert!(matches!(close_loop(&g, 0.0), Err(Error::ZeroSystem)));
    }

    #[test]
    fn discretize_examples() {
        let zero = StateSpace::new(Matrix::zeros(1, 1), Matrix::identity(1)).unwrap();
        assert_eq!(discretize(&zero, 0.7).unwrap().a().as_slice(), &[1.0]);

        let s = StateSpace::new(
            Matrix::from_row_slice(1, 1, &[-2.0]).unwrap(),
            Matrix::identity(1),
        )
        .unwrap();
        let d = discretize(&s, 0.3).unwrap();
        assert!((d.a()[(0, 0)] - (-0.6f64).exp()).abs() < 1e-15);

        let dint = StateSpace::new(
            Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let d = discretize(&dint, 0.5).unwrap();
        assert!(d.a().sub(&Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap()).max_abs() < 1e-15);

        assert!(discretize(&dint, 0.0).is_err());
        assert!(discretize(&dint, -1.0).is_err());
    }

    #[test]
    fn discretize_reports_lost_observability() {
        // A_c = 0 samples to A = I, and C = [1 0] cannot see the second state.
        let flat = StateSpace::new(Matrix::zeros(2, 2), Matrix::from_rows(&[[1.0, 0.0]]).unwrap())
            .unwrap();
        assert!(matches!(
            discretize(&flat, 0.5),
            Err(Error::Unobservable { rank: 1, n: 2 })
        ));
    }

    #[test]
    fn json_shapes() {
        let sys = scalar(0.5, 2.0);
        assert_eq!(serde_json::to_string(&sys).unwrap(), r#"{"A":[[0.5]],"C":[[2.0]]}"#);
        let back: LinearSystem = serde_json::from_str(r#"{"A":[[0.5]],"C":[[2.0]]}"#).unwrap();
        assert_eq!(back, sys);
        assert!(serde_json::from_str::<LinearSystem>(r#"{"A":[[1,0],[0,1]],"C":[[1,0]]}"#).is_err());

        let g = demo_plant();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"num":[1.0,1.0],"den":[10.0,11.0,11.0,1.0]}"#);
        assert_eq!(serde_json::from_str::<ContinuousSiso>(&s).unwrap(), g);
        assert!(serde_json::from_str::<ContinuousSiso>(r#"{"num":[1,1],"den":[1,1]}"#).is_err());
    }
}
