//! The damped observer cascade `C = Λ·I + Σ (1−λᵢ)·θᵢ` on `ℝⁿ`, where
//! `Λ = Πλᵢ` and each `θᵢ` is a finite-order linear phase operator.
//!
//! Besides building `C` this module solves `(I − C)x = 0`, computes the
//! spectrum, tests the hull claim `spec(C) ⊆ conv{1, λᵢ⁻¹}` as a reported
//! finding, and checks pairwise commutation of phase operators.

mod eigen;
mod linop;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use linop::{LinOp, DIM_CAP};

use crate::phase_dynamics::RationalPhase;

/// Tolerance on `‖θᵏ − I‖∞` when validating a declared period.
pub const PERIOD_TOL: f64 = 1e-9;
/// Default relative pivot threshold for null-space extraction.
pub const NULLSPACE_TOL: f64 = 1e-10;
/// Relative residual every reported eigenpair must meet.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Distance from the real segment still counted as inside the hull.
pub const HULL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("dimension {0} is outside 1..={DIM_CAP}")]
    DimensionCap(usize),
    #[error("operator entries must be finite")]
    NonFinite,
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("damping {0} is outside [0, 1]")]
    InvalidLambda(f64),
    #[error("stage {stage}: ‖θ^{period} − I‖∞ = {defect:e} exceeds {PERIOD_TOL:e}")]
    InvalidPeriod { stage: usize, period: u64, defect: f64 },
    #[error("a cascade needs at least one stage")]
    EmptyCascade,
    #[error("the hull claim is undefined when a damping is 0 (stage {0})")]
    UndefinedClaim(usize),
    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

pub type Result<T, E = CascadeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeStage {
    pub lambda: f64,
    pub theta: LinOp,
    pub period: u64,
}

/// A validated, non-empty list of damped stages of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSpec {
    stages: Vec<CascadeStage>,
}

impl CascadeSpec {
    pub fn new(stages: Vec<CascadeStage>) -> Result<Self> {
        let first = stages.first().ok_or(CascadeError::EmptyCascade)?;
        let dim = first.theta.dim();
        for (i, s) in stages.iter().enumerate() {
            if s.theta.dim() != dim {
                return Err(CascadeError::DimMismatch(format!(
                    "stage {i} has dimension {}, stage 0 has {dim}",
                    s.theta.dim()
                )));
            }
            if !(0.0..=1.0).contains(&s.lambda) {
                return Err(CascadeError::InvalidLambda(s.lambda));
            }
            let defect = s
                .theta
                .power(s.period)
                .sub(&LinOp::identity(dim))
                .expect("same dimension")
                .norm_inf();
            if s.period == 0 || defect > PERIOD_TOL {
                return Err(CascadeError::InvalidPeriod {
                    stage: i,
                    period: s.period,
                    defect,
                });
            }
        }
        Ok(Self { stages })
    }

    pub fn single(lambda: f64, theta: LinOp, period: u64) -> Result<Self> {
        Self::new(vec![CascadeStage {
            lambda,
            theta,
            period,
        }])
    }

    pub fn stages(&self) -> &[CascadeStage] {
        &self.stages
    }

    pub fn dim(&self) -> usize {
        self.stages[0].theta.dim()
    }

    /// `Λ = Πλᵢ`.
    pub fn contraction(&self) -> f64 {
        self.stages.iter().map(|s| s.lambda).product()
    }
}

/// `C = Λ·I + Σ (1−λᵢ)·θᵢ`.
pub fn build_cascade(spec: &CascadeSpec) -> LinOp {
    let mut c = LinOp::identity(spec.dim()).scale(spec.contraction());
    for s in &spec.stages {
        c = c.add(&s.theta.scale(1.0 - s.lambda)).expect("validated dimensions");
    }
    c
}

/// Orthonormal basis of `null(I − C)`. Pivots smaller than `tol` times the
/// largest entry of `I − C` count as zero.
pub fn cascade_fixed_points(c: &LinOp, tol: f64) -> Vec<Vec<f64>> {
    let n = c.dim();
    let m = LinOp::identity(n).sub(c).expect("same dimension");
    let threshold = tol * m.max_abs();
    let mut a = m.rows();

    // Reduced row echelon form with partial pivoting.
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let piv = (row..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if a[piv][col].abs() <= threshold {
            continue;
        }
        a.swap(row, piv);
        let p = a[row][col];
        a[row].iter_mut().for_each(|v| *v /= p);
        for i in 0..n {
            if i != row && a[i][col] != 0.0 {
                let f = a[i][col];
                for j in col..n {
                    a[i][j] -= f * a[row][j];
                }
            }
        }
        pivots.push(col);
        row += 1;
    }

    let mut basis: Vec<Vec<f64>> = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0.0; n];
        v[free] = 1.0;
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[r][free];
        }
        // Modified Gram-Schmidt against the vectors kept so far.
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Eigenvalues of an operator with their verification residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Sorted by decreasing modulus, then decreasing real and imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub max_modulus: f64,
    /// `‖Cv − λv‖₂ / ‖v‖₂` for an inverse-iteration eigenvector `v`.
    pub residuals: Vec<f64>,
    /// Filled in by [`check_hull_claim`].
    pub hull_check: Option<Vec<bool>>,
}

impl SpectrumReport {
    pub fn all_verified(&self) -> bool {
        self.residuals.iter().all(|&r| r <= RESIDUAL_TOL)
    }

    /// Eigenvalue of largest modulus.
    pub fn leading(&self) -> Complex64 {
        self.eigenvalues[0]
    }

    /// Whether some eigenvalue lies on the unit circle within `tol`.
    pub fn has_unit_modulus(&self, tol: f64) -> bool {
        self.eigenvalues.iter().any(|e| (e.norm() - 1.0).abs() <= tol)
    }
}

pub fn spectrum(c: &LinOp) -> Result<SpectrumReport> {
    let mut eigenvalues = eigen::eigenvalues(c)?;
    eigenvalues.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    let residuals = eigenvalues
        .iter()
        .map(|&l| eigen::eigenvector(c, l).1)
        .collect();
    let max_modulus = eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max);
    Ok(SpectrumReport {
        eigenvalues,
        max_modulus,
        residuals,
        hull_check: None,
    })
}

/// Per-eigenvalue verdicts on the hull claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullVerdict {
    /// The real segment `[1, max 1/λᵢ]`.
    pub segment: (f64, f64),
    pub inside: Vec<bool>,
    pub claim_holds: bool,
}

/// Whether each eigenvalue lies on the real segment spanned by `1` and the
/// `1/λᵢ`. Recorded as a finding, never enforced.
pub fn check_hull_claim(report: &SpectrumReport, spec: &CascadeSpec) -> Result<HullVerdict> {
    if let Some(i) = spec.stages.iter().position(|s| s.lambda == 0.0) {
        return Err(CascadeError::UndefinedClaim(i));
    }
    let (lo, hi) = spec
        .stages
        .iter()
        .map(|s| 1.0 / s.lambda)
        .fold((1.0f64, 1.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let inside: Vec<bool> = report
        .eigenvalues
        .iter()
        .map(|e| e.im.abs() <= HULL_TOL && e.re >= lo - HULL_TOL && e.re <= hi + HULL_TOL)
        .collect();
    Ok(HullVerdict {
        segment: (lo, hi),
        claim_holds: inside.iter().all(|&b| b),
        inside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutationReport {
    pub commute: bool,
    /// `‖θᵢθⱼ − θⱼθᵢ‖∞`.
    pub norm: f64,
}

pub fn check_commuting(theta_i: &LinOp, theta_j: &LinOp, tol: f64) -> Result<CommutationReport> {
    let ab = theta_i.matmul(theta_j)?;
    let ba = theta_j.matmul(theta_i)?;
    let norm = ab.sub(&ba)?.norm_inf();
    Ok(CommutationReport {
        commute: norm <= tol,
        norm,
    })
}

/// `second · first`: run the first cascade, then the second.
pub fn compose_cascades(first: &LinOp, second: &LinOp) -> Result<LinOp> {
    second.matmul(first)
}

/// Pairwise commutation across two cascades and the gap between the two
/// orders of applying them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelReport {
    pub pairwise: Vec<(usize, usize, CommutationReport)>,
    pub all_commute: bool,
    /// `‖C_b C_a − C_a C_b‖∞`.
    pub order_gap: f64,
}

pub fn check_parallel(a: &CascadeSpec, b: &CascadeSpec, tol: f64) -> Result<ParallelReport> {
    let mut pairwise = Vec::new();
    for (i, si) in a.stages.iter().enumerate() {
        for (j, sj) in b.stages.iter().enumerate() {
            pairwise.push((i, j, check_commuting(&si.theta, &sj.theta, tol)?));
        }
    }
    let ca = build_cascade(a);
    let cb = build_cascade(b);
    let order_gap = compose_cascades(&ca, &cb)?
        .sub(&compose_cascades(&cb, &ca)?)?
        .norm_inf();
    Ok(ParallelReport {
        all_commute: pairwise.iter().all(|(_, _, r)| r.commute),
        pairwise,
        order_gap,
    })
}

/// JSON form of a phase operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThetaDesc {
    /// Rotation by `turns` of a full turn in the `plane` coordinates.
    Rotation {
        dim: usize,
        #[serde(default = "default_plane")]
        plane: [usize; 2],
        turns: RationalPhase,
    },
    /// `e_k ↦ signs[k]·e_{perm[k]}`.
    Permutation {
        perm: Vec<usize>,
        #[serde(default)]
        signs: Option<Vec<f64>>,
    },
    Matrix { rows: LinOp, period: u64 },
}

fn default_plane() -> [usize; 2] {
    [0, 1]
}

impl ThetaDesc {
    /// The operator and its period.
    pub fn build(&self) -> Result<(LinOp, u64)> {
        match self {
            ThetaDesc::Rotation { dim, plane, turns } => Ok((
                LinOp::rotation(*dim, plane[0], plane[1], *turns)?,
                turns.denominator() as u64,
            )),
            ThetaDesc::Permutation { perm, signs } => {
                let op = LinOp::signed_permutation(perm, signs.as_deref())?;
                Ok((op, signed_permutation_order(perm, signs.as_deref())))
            }
            ThetaDesc::Matrix { rows, period } => Ok((rows.clone(), *period)),
        }
    }
}

fn signed_permutation_order(perm: &[usize], signs: Option<&[f64]>) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut seen = vec![false; perm.len()];
    let mut order = 1u64;
    for start in 0..perm.len() {
        let (mut len, mut sign, mut k) = (0u64, 1.0, start);
        while !seen[k] {
            seen[k] = true;
            sign *= signs.map_or(1.0, |s| s[k]);
            len += 1;
            k = perm[k];
        }
        if len > 0 {
            let cycle = if sign < 0.0 { 2 * len } else { len };
            order = order / gcd(order, cycle) * cycle;
        }
    }
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDesc {
    pub lambda: f64,
    pub theta: ThetaDesc,
}

/// JSON form of a cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeDesc {
    pub stages: Vec<StageDesc>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    NULLSPACE_TOL
}

impl CascadeDesc {
    pub fn build(&self) -> Result<CascadeSpec> {
        let stages = self
            .stages
            .iter()
            .map(|s| {
                let (theta, period) = s.theta.build()?;
                Ok(CascadeStage {
                    lambda: s.lambda,
                    theta,
                    period,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CascadeSpec::new(stages)
    }
}
