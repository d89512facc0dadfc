//! Model-based classifier `f(Y) = Yᵀ Q Y` with `Q = Q1 − Q2`, where `Q_i` is
//! the orthogonal projector onto the range of the observability matrix `O_i`.
//!
//! `Q_i` is formed as `U_i U_iᵀ` from the reduced SVD of `O_i`; no Gramian is
//! inverted. The weight vector in the lifted space is the column-stacked
//! `vec(Q)`, so that `vec(Q)ᵀ (Y ⊗ Y) = Yᵀ Q Y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{default_rank_tol, dot, norm, rank_from_singular_values, svd, Matrix};
use crate::sysmodel::{observability_matrix, require_feasible, LinearSystem};
use crate::trajectories::Label;

/// Decision values with `|f(Y)| ≤ ABSTAIN_TOL · ‖Y‖²` are not assigned a class.
pub const ABSTAIN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Class(Label),
    Abstain,
}

impl Decision {
    pub fn label(self) -> Option<Label> {
        match self {
            Decision::Class(l) => Some(l),
            Decision::Abstain => None,
        }
    }
}

/// Per-class projection data retained from [`build`].
#[derive(Clone, Debug)]
pub struct Projections {
    pub q1: Matrix,
    pub q2: Matrix,
    /// Orthonormal basis of `range(O1)`, `Nm × n1`.
    pub u1: Matrix,
    /// Orthonormal basis of `range(O2)`, `Nm × n2`.
    pub u2: Matrix,
}

#[derive(Clone, Debug)]
pub struct ModelBasedClassifier {
    horizon: usize,
    output_dim: usize,
    q: Matrix,
    w_m: Vec<f64>,
    projections: Option<Projections>,
}

fn projector(o: &Matrix, n: usize, system: usize) -> Result<(Matrix, Matrix)> {
    let f = svd(o)?;
    let rank = rank_from_singular_values(&f.s, default_rank_tol(o));
    if rank < n {
        return Err(Error::RankDeficient { system, rank, n });
    }
    let u = f.leading_left(n);
    let mut q = u.matmul(&u.transpose());
    q.symmetrize();
    Ok((q, u))
}

/// Builds the classifier for horizon `N`. Requires the rank test to pass.
pub fn build(sys1: &LinearSystem, sys2: &LinearSystem, horizon: usize) -> Result<ModelBasedClassifier> {
    let o1 = observability_matrix(sys1, horizon)?.matrix;
    let o2 = observability_matrix(sys2, horizon)?.matrix;
    let (q1, u1) = projector(&o1, sys1.n(), 1)?;
    let (q2, u2) = projector(&o2, sys2.n(), 2)?;
    require_feasible(sys1, sys2, horizon)?;
    let q = q1.sub(&q2);
    Ok(ModelBasedClassifier {
        horizon,
        output_dim: sys1.m(),
        w_m: q.vec_columns(),
        q,
        projections: Some(Projections { q1, q2, u1, u2 }),
    })
}

#[derive(Serialize, Deserialize)]
struct ClassifierDoc {
    #[serde(rename = "N")]
    horizon: usize,
    m: usize,
    #[serde(rename = "Q")]
    q: Matrix,
}

impl ModelBasedClassifier {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Trajectory length `N·m`.
    pub fn dim(&self) -> usize {
        self.horizon * self.output_dim
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    /// `vec(Q)`, column-stacked, length `(Nm)²`.
    pub fn w_m(&self) -> &[f64] {
        &self.w_m
    }

    pub fn projections(&self) -> Option<&Projections> {
        self.projections.as_ref()
    }

    pub fn orders(&self) -> Option<(usize, usize)> {
        self.projections.as_ref().map(|p| (p.u1.cols(), p.u2.cols()))
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "trajectory length",
                expected: self.dim(),
                found: y.len(),
            });
        }
        Ok(())
    }

    /// Squared distance from `Y` to `range(O_i)`, `‖(I − Q_i) Y‖²`.
    pub fn residual_distance(&self, y: &[f64], class: usize) -> Result<f64> {
        self.check_len(y)?;
        let p = self.projections.as_ref().ok_or(Error::MissingProjections)?;
        let qi = match class {
            1 => &p.q1,
            2 => &p.q2,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "class index must be 1 or 2, got {other}"
                )))
            }
        };
        let proj = qi.matvec(y);
        let resid: Vec<f64> = y.iter().zip(&proj).map(|(a, b)| a - b).collect();
        Ok(norm(&resid).powi(2))
    }

    /// `Yᵀ Q Y`.
    pub fn decision_value(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        Ok(dot(y, &self.q.matvec(y)))
    }

    pub fn classify(&self, y: &[f64]) -> Result<Decision> {
        let g = self.decision_value(y)?;
        let scale = dot(y, y);
        if scale == 0.0 {
            return Err(Error::ZeroTrajectory);
        }
        Ok(if g.abs() <= ABSTAIN_TOL * scale {
            Decision::Abstain
        } else if g > 0.0 {
            Decision::Class(Label::Positive)
        } else {
            Decision::Class(Label::Negative)
        })
    }

    /// Left singular vectors of `O1` and `O2`; `w_M = Σ u1⊗u1 − Σ u2⊗u2`.
    pub fn support_vector_form(&self) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let p = self.projections.as_ref().ok_or(Error::MissingProjections)?;
        let cols = |u: &Matrix| (0..u.cols()).map(|j| u.column(j)).collect::<Vec<_>>();
        Ok((cols(&p.u1), cols(&p.u2)))
    }

    /// `{"N": …, "m": …, "Q": [[…]]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ClassifierDoc {
            horizon: self.horizon,
            m: self.output_dim,
            q: self.q.clone(),
        })?)
    }

    /// Restores `Q` and `w_M`; per-class projections are not stored in the file.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ClassifierDoc = serde_json::from_str(s)?;
        let dim = doc.horizon * doc.m;
        if doc.q.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                context: "classifier Q size",
                expected: dim,
                found: doc.q.rows(),
            });
        }
        Ok(ModelBasedClassifier {
            horizon: doc.horizon,
            output_dim: doc.m,
            w_m: doc.q.vec_columns(),
            q: doc.q,
            projections: None,
        })
    }
}
