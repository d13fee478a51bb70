//! Coupled state/observer updates on `ℝⁿ`, fixed points and their Jacobians,
//! critical-threshold detection for `F_r = φ + r·O`, bifurcation sweeps, and
//! Lyapunov monitoring of `L = H + α·H_O`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{self, CascadeError, LinOp};
use crate::entropy_ledger::{shannon_entropy, Binning, EntropyError, ProbState, BOUND_TOL};

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_FIXED_TOL: f64 = 1e-10;
/// `|det|` that counts as a root of `d₋` or `d₊`.
pub const DET_TOL: f64 = 1e-8;
const SUFFICIENT_DECREASE: f64 = 1e-4;
pub const STABILITY_MARGIN: f64 = 1e-9;
pub const PERIOD_TOL: f64 = 1e-6;
pub const MAX_PERIOD: usize = 16;
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
pub const DEFAULT_TRANSIENT: usize = 500;
pub const DEFAULT_SAMPLE: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("map produced a non-finite value")]
    NonFinite,
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("length mismatch: trajectory has {trajectory} states, ledger has {ledger}")]
    LengthMismatch { trajectory: usize, ledger: usize },
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T, E = DynamicsError> = std::result::Result<T, E>;

/// Monomial `coeff · Π x[v]` contributing to output coordinate `out`.
/// `vars` lists variable indices with repetition, at most three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub out: usize,
    pub coeff: f64,
    #[serde(default)]
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMap {
    pub weight: f64,
    pub map: MapSpec,
}

/// An endomap of `ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapSpec {
    /// `x ↦ A·x + b`.
    Affine {
        #[serde(rename = "A")]
        a: LinOp,
        b: Vec<f64>,
    },
    /// Per-coordinate polynomials of total degree at most 3.
    Polynomial { dim: usize, terms: Vec<PolyTerm> },
    /// `x ↦ Σ wᵢ·fᵢ(x)`.
    Sum { terms: Vec<WeightedMap> },
    /// `x ↦ f_k(…f_1(x))`, stages applied in list order.
    Compose { stages: Vec<MapSpec> },
}

impl MapSpec {
    pub fn linear(a: LinOp) -> Self {
        let n = a.dim();
        MapSpec::Affine { a, b: vec![0.0; n] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::linear(LinOp::identity(dim))
    }

    pub fn zero(dim: usize) -> Self {
        Self::linear(LinOp::zeros(dim))
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        Self::linear(LinOp::identity(dim).scale(s))
    }

    /// Checks internal consistency and returns the dimension.
    pub fn validate(&self) -> Result<usize> {
        match self {
            MapSpec::Affine { a, b } => {
                if b.len() != a.dim() {
                    return Err(DynamicsError::DimMismatch(format!(
                        "affine offset has length {}, matrix has dimension {}",
                        b.len(),
                        a.dim()
                    )));
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(DynamicsError::NonFinite);
                }
                Ok(a.dim())
            }
            MapSpec::Polynomial { dim, terms } => {
                if *dim == 0 {
                    return Err(DynamicsError::InvalidMap("polynomial of dimension 0".into()));
                }
                for t in terms {
                    if t.out >= *dim || t.vars.iter().any(|&v| v >= *dim) {
                        return Err(DynamicsError::InvalidMap(format!(
                            "term index outside 0..{dim}"
                        )));
                    }
                    if t.vars.len() > 3 {
                        return Err(DynamicsError::InvalidMap(format!(
                            "term of degree {} exceeds 3",
                            t.vars.len()
                        )));
                    }
                    if !t.coeff.is_finite() {
                        return Err(DynamicsError::NonFinite);
                    }
                }
                Ok(*dim)
            }
            MapSpec::Sum { terms } => {
                if terms.iter().any(|t| !t.weight.is_finite()) {
                    return Err(DynamicsError::NonFinite);
                }
                Self::common_dim(terms.iter().map(|t| &t.map), "sum")
            }
            MapSpec::Compose { stages } => Self::common_dim(stages.iter(), "composition"),
        }
    }

    fn common_dim<'a>(maps: impl Iterator<Item = &'a MapSpec>, what: &str) -> Result<usize> {
        let mut dim = None;
        for m in maps {
            let d = m.validate()?;
            match dim {
                None => dim = Some(d),
                Some(prev) if prev != d => {
                    return Err(DynamicsError::DimMismatch(format!(
                        "{what} mixes dimensions {prev} and {d}"
                    )))
                }
                _ => {}
            }
        }
        dim.ok_or_else(|| DynamicsError::InvalidMap(format!("empty {what}")))
    }

    /// Dimension, assuming the map is valid.
    pub fn dim(&self) -> usize {
        match self {
            MapSpec::Affine { a, .. } => a.dim(),
            MapSpec::Polynomial { dim, .. } => *dim,
            MapSpec::Sum { terms } => terms[0].map.dim(),
            MapSpec::Compose { stages } => stages[0].dim(),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let n = self.validate()?;
        if x.len() != n {
            return Err(DynamicsError::DimMismatch(format!(
                "state has length {}, map has dimension {n}",
                x.len()
            )));
        }
        Ok(())
    }

    /// `F(x)`; fails on a dimension mismatch or a non-finite output.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let y = self.eval_unchecked(x);
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(DynamicsError::NonFinite)
        }
    }

    fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MapSpec::Affine { a, b } => {
                let mut y = a.mul_vec(x);
                y.iter_mut().zip(b).for_each(|(yi, bi)| *yi += bi);
                y
            }
            MapSpec::Polynomial { dim, terms } => {
                let mut y = vec![0.0; *dim];
                for t in terms {
                    y[t.out] += t.coeff * t.vars.iter().map(|&v| x[v]).product::<f64>();
                }
                y
            }
            MapSpec::Sum { terms } => {
                let mut y = vec![0.0; x.len()];
                for t in terms {
                    let z = t.map.eval_unchecked(x);
                    y.iter_mut().zip(z).for_each(|(yi, zi)| *yi += t.weight * zi);
                }
                y
            }
            MapSpec::Compose { stages } => stages
                .iter()
                .fold(x.to_vec(), |acc, s| s.eval_unchecked(&acc)),
        }
    }

    fn jacobian_unchecked(&self, x: &[f64]) -> LinOp {
        match self {
            MapSpec::Affine { a, .. } => a.clone(),
            MapSpec::Polynomial { dim, terms } => {
                let mut j = LinOp::zeros(*dim);
                for t in terms {
                    for k in 0..t.vars.len() {
                        let rest: f64 = t
                            .vars
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != k)
                            .map(|(_, &v)| x[v])
                            .product();
                        let v = t.vars[k];
                        j.set(t.out, v, j.get(t.out, v) + t.coeff * rest);
                    }
                }
                j
            }
            MapSpec::Sum { terms } => terms.iter().fold(LinOp::zeros(x.len()), |acc, t| {
                acc.add(&t.map.jacobian_unchecked(x).scale(t.weight))
                    .expect("validated dimensions")
            }),
            MapSpec::Compose { stages } => {
                let mut point = x.to_vec();
                let mut j = LinOp::identity(x.len());
                for s in stages {
                    j = s.jacobian_unchecked(&point).matmul(&j).expect("validated dimensions");
                    point = s.eval_unchecked(&point);
                }
                j
            }
        }
    }
}

/// Analytic Jacobian; sums and compositions use the chain rule.
pub fn jacobian(f: &MapSpec, x: &[f64]) -> Result<LinOp> {
    f.check_input(x)?;
    let j = f.jacobian_unchecked(x);
    if j.entries().iter().all(|v| v.is_finite()) {
        Ok(j)
    } else {
        Err(DynamicsError::NonFinite)
    }
}

/// Central differences with step `1e-6·max(1, |xᵢ|)`.
pub fn jacobian_fd(f: &MapSpec, x: &[f64]) -> Result<LinOp> {
    f.check_input(x)?;
    let n = x.len();
    let mut j = LinOp::zeros(n);
    let mut xp = x.to_vec();
    for col in 0..n {
        let h = 1e-6 * x[col].abs().max(1.0);
        xp[col] = x[col] + h;
        let fp = f.eval(&xp)?;
        xp[col] = x[col] - h;
        let fm = f.eval(&xp)?;
        xp[col] = x[col];
        for row in 0..n {
            j.set(row, col, (fp[row] - fm[row]) / (2.0 * h));
        }
    }
    Ok(j)
}

/// `F_r = φ + r·O`, with `O` acting as an endomap of the state space.
pub fn perturbed_map(phi: &MapSpec, o: &MapSpec, r: f64) -> Result<MapSpec> {
    let (dp, d_o) = (phi.validate()?, o.validate()?);
    if dp != d_o {
        return Err(DynamicsError::DimMismatch(format!(
            "φ has dimension {dp}, observer has {d_o}"
        )));
    }
    if !r.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    Ok(MapSpec::Sum {
        terms: vec![
            WeightedMap { weight: 1.0, map: phi.clone() },
            WeightedMap { weight: r, map: o.clone() },
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub x: Vec<f64>,
    pub o: Vec<f64>,
}

/// `(x, o) ↦ (φ(x), O(φ(x)))`.
pub fn coupled_step(phi: &MapSpec, o: &MapSpec, s: &CoupledState) -> Result<CoupledState> {
    if s.o.len() != o.validate()? {
        return Err(DynamicsError::DimMismatch(format!(
            "observer state has length {}, observer map has dimension {}",
            s.o.len(),
            o.dim()
        )));
    }
    let x = phi.eval(&s.x)?;
    let o = o.eval(&x)?;
    Ok(CoupledState { x, o })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<CoupledState>,
    pub r: f64,
    pub seed: u64,
    pub transient: usize,
}

/// Runs `steps` coupled updates with `F_r` as the state map. State 0 is
/// `(x0, O(x0))`.
pub fn simulate(
    phi: &MapSpec,
    o: &MapSpec,
    r: f64,
    x0: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let f = perturbed_map(phi, o, r)?;
    let mut s = CoupledState { x: x0.to_vec(), o: o.eval(x0)? };
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s.clone());
    for _ in 0..steps {
        s = coupled_step(&f, o, &s)?;
        states.push(s.clone());
    }
    Ok(Trajectory { states, r, seed, transient: 0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn residual(f: &MapSpec, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let fx = f.eval(x)?;
    let d: Vec<f64> = fx.iter().zip(x).map(|(a, b)| a - b).collect();
    let r = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((d, r))
}

/// Damped iteration `x ← x + β(F(x) − x)`. A step that raises the residual,
/// or lowers it by less than a factor `1 − 1e-4·β`, is rejected and `β`
/// halved. An accepted step halves `β` if the new correction points against
/// the old one (overshoot, as near an eigenvalue of `−1`) and otherwise lets it
/// grow back towards 1. The stall test keeps the undamped step from settling
/// onto a 2-cycle around an unstable root.
pub fn find_fixed_point(f: &MapSpec, x0: &[f64], max_iter: usize, tol: f64) -> Result<FixedPoint> {
    let mut x = x0.to_vec();
    let (mut d, mut res) = residual(f, &x)?;
    let mut beta = 1.0f64;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(FixedPoint { x, residual: res, iterations: it });
        }
        let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + beta * di).collect();
        match residual(f, &cand) {
            Ok((cd, cr)) if cr <= (1.0 - SUFFICIENT_DECREASE * beta) * res => {
                let overshoot = cd.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() < 0.0;
                x = cand;
                d = cd;
                res = cr;
                beta = if overshoot { 0.5 * beta } else { (2.0 * beta).min(1.0) };
            }
            Ok(_) | Err(DynamicsError::NonFinite) => {
                beta *= 0.5;
                if beta < f64::EPSILON {
                    return Err(DynamicsError::NoConvergence { iterations: it + 1, residual: res });
                }
            }
            Err(e) => return Err(e),
        }
    }
    if res <= tol {
        return Ok(FixedPoint { x, residual: res, iterations: max_iter });
    }
    Err(DynamicsError::NoConvergence { iterations: max_iter, residual: res })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub stable: bool,
    pub eigenvalues: Vec<Complex64>,
}

/// Stable iff every eigenvalue has modulus below `1 − 1e-9`.
pub fn stability_report(j: &LinOp) -> Result<StabilityReport> {
    let s = cascade::spectrum(j)?;
    Ok(StabilityReport {
        spectral_radius: s.max_modulus,
        stable: s.max_modulus < 1.0 - STABILITY_MARGIN,
        eigenvalues: s.eigenvalues,
    })
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &LinOp) -> f64 {
    let n = m.dim();
    let mut a = m.rows();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
        }
    }
    det
}

/// Evenly spaced coupling values `lo, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl RGrid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        let g = Self { lo, hi, steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(DynamicsError::InvalidParams(format!(
                "r grid needs finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.steps < 2 {
            return Err(DynamicsError::InvalidParams("r grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.hi } else { self.lo + k as f64 * h })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    /// `det(I − DF) = 0`: an eigenvalue crosses `+1`.
    Fold,
    /// `det(I + DF) = 0`: an eigenvalue crosses `−1`.
    Flip,
}

impl CriticalKind {
    fn sign(self) -> f64 {
        match self {
            CriticalKind::Fold => -1.0,
            CriticalKind::Flip => 1.0,
        }
    }

    /// `det(I ∓ J)`.
    pub fn det(self, j: &LinOp) -> f64 {
        let m = LinOp::identity(j.dim()).add(&j.scale(self.sign())).expect("same dimension");
        determinant(&m)
    }

    /// Real eigenvalues beyond `+1` (fold) or below `−1` (flip).
    fn count(self, eigs: &[Complex64]) -> usize {
        eigs.iter()
            .filter(|e| e.im == 0.0 && self.sign() * e.re < -1.0)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalRoot {
    pub kind: CriticalKind,
    pub r: f64,
    pub bracket: (f64, f64),
    /// `|det|` at `r`.
    pub residual: f64,
    pub multiplicity: usize,
    pub x_star: Vec<f64>,
}

/// A run of consecutive grid points where the determinant vanishes, so no
/// isolated root exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateRun {
    pub kind: CriticalKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalReport {
    pub r_c_fold: Option<f64>,
    pub r_c_flip: Option<f64>,
    pub roots: Vec<CriticalRoot>,
    pub degenerate: Vec<DegenerateRun>,
    /// Grid intervals where continuation lost the fixed-point branch.
    pub branch_lost: Vec<(f64, f64)>,
    /// Count changes whose bisection did not reach `|det| ≤ 1e-8`, e.g. a
    /// real pair turning complex away from `±1`.
    pub unresolved: Vec<(CriticalKind, f64, f64)>,
}

impl CriticalReport {
    pub fn of_kind(&self, kind: CriticalKind) -> impl Iterator<Item = &CriticalRoot> {
        self.roots.iter().filter(move |r| r.kind == kind)
    }
}

#[derive(Debug, Clone)]
struct BranchSample {
    r: f64,
    x: Vec<f64>,
    det: [f64; 2],
    count: [usize; 2],
}

const KINDS: [CriticalKind; 2] = [CriticalKind::Fold, CriticalKind::Flip];

fn sample_branch(phi: &MapSpec, o: &MapSpec, r: f64, guess: &[f64], x0: &[f64]) -> Result<BranchSample> {
    let f = perturbed_map(phi, o, r)?;
    let fp = find_fixed_point(&f, guess, DEFAULT_MAX_ITER, DEFAULT_FIXED_TOL)
        .or_else(|_| find_fixed_point(&f, x0, DEFAULT_MAX_ITER, DEFAULT_FIXED_TOL))?;
    let j = jacobian(&f, &fp.x)?;
    let eigs = cascade::spectrum(&j)?.eigenvalues;
    Ok(BranchSample {
        r,
        det: KINDS.map(|k| k.det(&j)),
        count: KINDS.map(|k| k.count(&eigs)),
        x: fp.x,
    })
}

/// Scans `d₋(r) = det(I − DF_r(X*))` and `d₊(r) = det(I + DF_r(X*))` along a
/// continued fixed-point branch and bisects every sign change, and every
/// change in the number of real eigenvalues beyond `±1`, down to
/// `|det| ≤ 1e-8`.
pub fn find_critical_r(
    phi: &MapSpec,
    o: &MapSpec,
    r_lo: f64,
    r_hi: f64,
    grid: usize,
    x0: &[f64],
) -> Result<CriticalReport> {
    let g = RGrid::new(r_lo, r_hi, grid)?;
    perturbed_map(phi, o, r_lo)?.check_input(x0)?;

    let mut samples: Vec<Option<BranchSample>> = Vec::with_capacity(grid);
    let mut guess = x0.to_vec();
    for r in g.values() {
        match sample_branch(phi, o, r, &guess, x0) {
            Ok(s) => {
                guess = s.x.clone();
                samples.push(Some(s));
            }
            Err(DynamicsError::NoConvergence { .. }) | Err(DynamicsError::NonFinite) => {
                samples.push(None)
            }
            Err(e) => return Err(e),
        }
    }

    let rs = g.values();
    let mut report = CriticalReport {
        r_c_fold: None,
        r_c_flip: None,
        roots: vec![],
        degenerate: vec![],
        branch_lost: vec![],
        unresolved: vec![],
    };
    for k in 0..grid - 1 {
        if samples[k].is_none() || samples[k + 1].is_none() {
            report.branch_lost.push((rs[k], rs[k + 1]));
        }
    }

    for (ki, kind) in KINDS.into_iter().enumerate() {
        let zero = |s: &BranchSample| s.det[ki].abs() <= DET_TOL;
        let mut k = 0;
        // Index of the last sample before position `k` that is off the root set.
        let mut prev: Option<usize> = None;
        while k < grid {
            let Some(s) = &samples[k] else {
                prev = None;
                k += 1;
                continue;
            };
            if zero(s) {
                let start = k;
                while k + 1 < grid && samples[k + 1].as_ref().is_some_and(zero) {
                    k += 1;
                }
                if k > start {
                    report.degenerate.push(DegenerateRun { kind, lo: rs[start], hi: rs[k] });
                } else {
                    let next = samples.get(k + 1).and_then(|s| s.as_ref());
                    let before = prev.and_then(|p| samples[p].as_ref());
                    let dn = match (before, next) {
                        (Some(a), Some(b)) => a.count[ki].abs_diff(b.count[ki]),
                        _ => 0,
                    };
                    report.roots.push(CriticalRoot {
                        kind,
                        r: s.r,
                        bracket: (s.r, s.r),
                        residual: s.det[ki].abs(),
                        multiplicity: dn.max(1),
                        x_star: s.x.clone(),
                    });
                }
                prev = None;
                k += 1;
                continue;
            }
            if let Some(p) = prev.filter(|&p| p + 1 == k) {
                let a = samples[p].as_ref().expect("present");
                let sign_change = a.det[ki].signum() != s.det[ki].signum();
                let dn = a.count[ki].abs_diff(s.count[ki]);
                if sign_change || dn > 0 {
                    match bisect(phi, o, x0, kind, a, s, sign_change)? {
                        Some(mut root) => {
                            root.multiplicity = dn.max(1);
                            report.roots.push(root);
                        }
                        None => report.unresolved.push((kind, a.r, s.r)),
                    }
                }
            }
            prev = Some(k);
            k += 1;
        }
    }

    report.roots.sort_by(|a, b| a.r.total_cmp(&b.r));
    let first = |kind| report.of_kind(kind).map(|r| r.r).next();
    let (fold, flip) = (first(CriticalKind::Fold), first(CriticalKind::Flip));
    report.r_c_fold = fold;
    report.r_c_flip = flip;
    Ok(report)
}

fn bisect(
    phi: &MapSpec,
    o: &MapSpec,
    x0: &[f64],
    kind: CriticalKind,
    a: &BranchSample,
    b: &BranchSample,
    by_sign: bool,
) -> Result<Option<CriticalRoot>> {
    let ki = KINDS.iter().position(|&k| k == kind).expect("known kind");
    let bracket = (a.r, b.r);
    let (mut lo, mut hi) = (a.clone(), b.clone());
    let mut best = if lo.det[ki].abs() <= hi.det[ki].abs() { lo.clone() } else { hi.clone() };
    for _ in 0..200 {
        let mid_r = 0.5 * (lo.r + hi.r);
        if mid_r <= lo.r || mid_r >= hi.r {
            break;
        }
        let mid = match sample_branch(phi, o, mid_r, &lo.x, x0) {
            Ok(m) => m,
            Err(DynamicsError::NoConvergence { .. }) | Err(DynamicsError::NonFinite) => break,
            Err(e) => return Err(e),
        };
        if mid.det[ki].abs() < best.det[ki].abs() {
            best = mid.clone();
        }
        if by_sign {
            if mid.det[ki].abs() <= DET_TOL {
                best = mid;
                break;
            }
            if mid.det[ki].signum() == lo.det[ki].signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        } else {
            if hi.r - lo.r <= 1e-12 * hi.r.abs().max(1.0) {
                break;
            }
            if mid.count[ki] == lo.count[ki] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if !by_sign {
        // The crossing sits at the count change; evaluate both sides.
        best = if lo.det[ki].abs() <= hi.det[ki].abs() { lo } else { hi };
    }
    if best.det[ki].abs() > DET_TOL {
        return Ok(None);
    }
    Ok(Some(CriticalRoot {
        kind,
        r: best.r,
        bracket,
        residual: best.det[ki].abs(),
        multiplicity: 1,
        x_star: best.x,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttractorClass {
    FixedPoint,
    Periodic(usize),
    Aperiodic,
    Divergent,
}

impl AttractorClass {
    pub fn label(&self) -> String {
        match self {
            AttractorClass::FixedPoint => "fixed-point".into(),
            AttractorClass::Periodic(p) => format!("period-{p}"),
            AttractorClass::Aperiodic => "aperiodic".into(),
            AttractorClass::Divergent => "divergent".into(),
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            AttractorClass::FixedPoint => Some(1),
            AttractorClass::Periodic(p) => Some(*p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub transient: usize,
    pub sample: usize,
    pub seed: u64,
    /// Half-width of the seeded uniform perturbation of `x0` per row.
    pub jitter: f64,
    pub period_tol: f64,
    pub max_period: usize,
    pub divergence: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            transient: DEFAULT_TRANSIENT,
            sample: DEFAULT_SAMPLE,
            seed: 0,
            jitter: 0.0,
            period_tol: PERIOD_TOL,
            max_period: MAX_PERIOD,
            divergence: DIVERGENCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramRow {
    pub r: f64,
    pub class: AttractorClass,
    /// One point per orbit element for periodic classes, else the last state.
    pub points: Vec<Vec<f64>>,
    /// Largest-modulus eigenvalue of `DF_r` at the continued fixed point.
    pub lead_eig: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationDiagram {
    pub rows: Vec<DiagramRow>,
    pub transient: usize,
    pub sample: usize,
    pub seed: u64,
}

impl BifurcationDiagram {
    /// First `r` whose class is not a fixed point, after a fixed-point row.
    pub fn first_departure_from_fixed(&self) -> Option<(f64, f64)> {
        self.rows
            .windows(2)
            .find(|w| w[0].class == AttractorClass::FixedPoint && w[1].class != AttractorClass::FixedPoint)
            .map(|w| (w[0].r, w[1].r))
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Smallest `p ≤ max_period` with `‖y_{i+p} − y_i‖∞ ≤ tol` across the sample.
pub fn classify_orbit(sample: &[Vec<f64>], tol: f64, max_period: usize) -> AttractorClass {
    for p in 1..=max_period.min(sample.len().saturating_sub(1)) {
        if (0..sample.len() - p).all(|i| inf_dist(&sample[i + p], &sample[i]) <= tol) {
            return if p == 1 { AttractorClass::FixedPoint } else { AttractorClass::Periodic(p) };
        }
    }
    AttractorClass::Aperiodic
}

fn orbit_row(f: &MapSpec, r: f64, x0: Vec<f64>, opts: &SweepOptions) -> Result<DiagramRow> {
    let diverged = |x: &[f64]| x.iter().any(|v| !v.is_finite() || v.abs() > opts.divergence);
    let divergent = DiagramRow { r, class: AttractorClass::Divergent, points: vec![], lead_eig: None };
    let mut x = x0;
    for _ in 0..opts.transient {
        x = match f.eval(&x) {
            Ok(y) if !diverged(&y) => y,
            Ok(_) | Err(DynamicsError::NonFinite) => return Ok(divergent),
            Err(e) => return Err(e),
        };
    }
    let mut sample = Vec::with_capacity(opts.sample);
    for _ in 0..opts.sample {
        x = match f.eval(&x) {
            Ok(y) if !diverged(&y) => y,
            Ok(_) | Err(DynamicsError::NonFinite) => return Ok(divergent),
            Err(e) => return Err(e),
        };
        sample.push(x.clone());
    }
    let class = classify_orbit(&sample, opts.period_tol, opts.max_period);
    let points = match class.period() {
        Some(p) => sample[sample.len() - p..].to_vec(),
        None => vec![sample.last().expect("sample ≥ 2").clone()],
    };
    Ok(DiagramRow { r, class, points, lead_eig: None })
}

/// Iterates `F_r` for every grid value (in parallel), classifies the
/// attractor, and attaches the leading Jacobian eigenvalue at the fixed point
/// found by continuation along the grid.
pub fn sweep_bifurcation(
    phi: &MapSpec,
    o: &MapSpec,
    grid: &RGrid,
    x0: &[f64],
    opts: &SweepOptions,
) -> Result<BifurcationDiagram> {
    grid.validate()?;
    if opts.transient < 1 || opts.sample < 2 {
        return Err(DynamicsError::InvalidParams(
            "sweep needs transient ≥ 1 and sample ≥ 2".into(),
        ));
    }
    perturbed_map(phi, o, grid.lo)?.check_input(x0)?;
    let rs = grid.values();

    let mut rows = rs
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let f = perturbed_map(phi, o, r)?;
            let mut start = x0.to_vec();
            if opts.jitter > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(k as u64);
                start
                    .iter_mut()
                    .for_each(|v| *v += rng.gen_range(-opts.jitter..=opts.jitter));
            }
            orbit_row(&f, r, start, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut guess = x0.to_vec();
    for row in &mut rows {
        let f = perturbed_map(phi, o, row.r)?;
        let fp = find_fixed_point(&f, &guess, DEFAULT_MAX_ITER, DEFAULT_FIXED_TOL)
            .or_else(|_| find_fixed_point(&f, x0, DEFAULT_MAX_ITER, DEFAULT_FIXED_TOL));
        if let Ok(fp) = fp {
            let j = jacobian(&f, &fp.x)?;
            row.lead_eig = Some(cascade::spectrum(&j)?.leading());
            guess = fp.x;
        }
    }

    Ok(BifurcationDiagram {
        rows,
        transient: opts.transient,
        sample: opts.sample,
        seed: opts.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub values: Vec<f64>,
    pub monotone: bool,
    /// Steps `n` with `L_{n+1} > L_n + 1e-9`.
    pub violations: Vec<usize>,
    pub schedule: usize,
}

/// `L_n = H(X_n) + α·H_O(X_n)`. With `schedule = s` the observer entropy is
/// refreshed only at steps `n ≡ 0 (mod s)` and held in between.
pub fn lyapunov_trace(
    traj: &Trajectory,
    ledger_states: &[(ProbState, ProbState)],
    alpha: f64,
    schedule: usize,
) -> Result<LyapunovReport> {
    if ledger_states.len() != traj.states.len() {
        return Err(DynamicsError::LengthMismatch {
            trajectory: traj.states.len(),
            ledger: ledger_states.len(),
        });
    }
    if !(alpha > 0.0) || schedule == 0 {
        return Err(DynamicsError::InvalidParams(
            "Lyapunov trace needs alpha > 0 and schedule ≥ 1".into(),
        ));
    }
    let mut held = 0.0;
    let values: Vec<f64> = ledger_states
        .iter()
        .enumerate()
        .map(|(n, (px, po))| {
            if n % schedule == 0 {
                held = shannon_entropy(po);
            }
            shannon_entropy(px) + alpha * held
        })
        .collect();
    let violations: Vec<usize> = values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + BOUND_TOL)
        .map(|(n, _)| n)
        .collect();
    Ok(LyapunovReport { monotone: violations.is_empty(), values, violations, schedule })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub ensemble: usize,
    /// Half-width of the uniform cloud around `x0`.
    pub spread: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Seeded ensemble around `x0`, binned per step into state and observer
/// distributions for the entropy ledger.
pub fn ensemble_ledger(
    phi: &MapSpec,
    o: &MapSpec,
    r: f64,
    x0: &[f64],
    steps: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<Vec<(ProbState, ProbState)>> {
    if opts.ensemble == 0 {
        return Err(DynamicsError::InvalidParams("ensemble must be non-empty".into()));
    }
    let binning = Binning::new(opts.lo, opts.hi, opts.bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..opts.ensemble)
        .map(|_| {
            x0.iter()
                .map(|v| if opts.spread > 0.0 { v + rng.gen_range(-opts.spread..=opts.spread) } else { *v })
                .collect()
        })
        .collect();
    let runs = starts
        .par_iter()
        .map(|s| simulate(phi, o, r, s, steps, seed))
        .collect::<Result<Vec<_>>>()?;
    (0..=steps)
        .map(|n| {
            let xs: Vec<Vec<f64>> = runs.iter().map(|t| t.states[n].x.clone()).collect();
            let os: Vec<Vec<f64>> = runs.iter().map(|t| t.states[n].o.clone()).collect();
            Ok((binning.histogram("X", &xs)?, binning.histogram("O", &os)?))
        })
        .collect()
}

/// The logistic-form family `F_r(x) = r·x(1 − x)` as `φ = 0`, `O(x) = x − x²`.
pub fn logistic_family() -> (MapSpec, MapSpec) {
    let o = MapSpec::Polynomial {
        dim: 1,
        terms: vec![
            PolyTerm { out: 0, coeff: 1.0, vars: vec![0] },
            PolyTerm { out: 0, coeff: -1.0, vars: vec![0, 0] },
        ],
    };
    (MapSpec::zero(1), o)
}
