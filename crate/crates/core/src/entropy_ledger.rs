//! Entropy bookkeeping: Shannon entropy of explicit distributions, the
//! per-step, per-observation and cumulative growth bounds, and the memory
//! filtration `χₙ₊₁ = V(χₙ)`.
//!
//! Entropies are in bits. The growth bounds use the natural logarithm; the
//! constants `C` and `K` absorb the change of base.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_category::{compose, CategoryError, FinMor, FinObj, FunctorRep, Universe};

/// Absolute tolerance for every bound comparison.
pub const BOUND_TOL: f64 = 1e-9;
/// Allowed deviation of a distribution's total mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("the cumulative bound is undefined at n = 0")]
    DomainError,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("layer {stage} does not embed into layer {next}: `{missing}` is dropped")]
    NotMonotone {
        stage: usize,
        next: usize,
        missing: String,
    },
    #[error(transparent)]
    Category(#[from] CategoryError),
}

pub type Result<T, E = EntropyError> = std::result::Result<T, E>;

/// A probability vector over the elements of a carrier, in carrier order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbState {
    carrier: FinObj,
    probs: Vec<f64>,
}

impl ProbState {
    pub fn new(carrier: FinObj, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != carrier.len() {
            return Err(EntropyError::InvalidDistribution(format!(
                "{} probabilities for {} elements",
                probs.len(),
                carrier.len()
            )));
        }
        validate(&probs)?;
        Ok(Self { carrier, probs })
    }

    pub fn uniform(carrier: FinObj) -> Result<Self> {
        let n = carrier.len();
        Self::new(carrier, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(carrier: FinObj, element: &str) -> Result<Self> {
        let i = carrier.index_of(element).ok_or_else(|| {
            EntropyError::InvalidDistribution(format!("`{element}` is not in `{}`", carrier.id()))
        })?;
        let mut probs = vec![0.0; carrier.len()];
        probs[i] = 1.0;
        Self::new(carrier, probs)
    }

    pub fn carrier(&self) -> &FinObj {
        &self.carrier
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, element: &str) -> Option<f64> {
        self.carrier.index_of(element).map(|i| self.probs[i])
    }
}

fn validate(probs: &[f64]) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(EntropyError::InvalidDistribution(format!("entry {p} is not a probability")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(EntropyError::InvalidDistribution(format!("mass {total} is not 1")));
    }
    Ok(())
}

fn entropy_unchecked(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    // -0.0 and rounding below zero both read as zero.
    h.max(0.0)
}

/// `-Σ pᵢ log₂ pᵢ` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &ProbState) -> f64 {
    entropy_unchecked(&p.probs)
}

/// Entropy of a raw probability slice, validating it first.
pub fn entropy_bits(probs: &[f64]) -> Result<f64> {
    validate(probs)?;
    Ok(entropy_unchecked(probs))
}

/// Image distribution `q(y) = Σ_{f(x)=y} p(x)` on `f.dst`.
pub fn pushforward(p: &ProbState, f: &FinMor) -> Result<ProbState> {
    if f.src() != &p.carrier {
        return Err(EntropyError::ShapeMismatch(format!(
            "`{}` starts at `{}`, the state lives on `{}`",
            f.id(),
            f.src().id(),
            p.carrier.id()
        )));
    }
    let dst = f.dst();
    let mut q = vec![0.0; dst.len()];
    for (x, px) in p.carrier.elements().iter().zip(&p.probs) {
        let y = f.apply(x).expect("total");
        q[dst.index_of(y).expect("image in target")] += px;
    }
    Ok(ProbState {
        carrier: dst.clone(),
        probs: q,
    })
}

/// Both directions of entropy monotonicity along a deterministic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityCheck {
    pub source_bits: f64,
    pub image_bits: f64,
    /// `H(image) ≥ H(source)`: the growth postulate.
    pub postulate_holds: bool,
    /// `H(image) ≤ H(source)`: data processing.
    pub contraction_holds: bool,
}

pub fn check_monotonicity(p: &ProbState, f: &FinMor) -> Result<MonotonicityCheck> {
    let source_bits = shannon_entropy(p);
    let image_bits = shannon_entropy(&pushforward(p, f)?);
    Ok(MonotonicityCheck {
        source_bits,
        image_bits,
        postulate_holds: image_bits + BOUND_TOL >= source_bits,
        contraction_holds: image_bits <= source_bits + BOUND_TOL,
    })
}

/// Constants of the growth bounds and the Lyapunov weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    /// Optional per-step injection `K₀, K₁, …`; steps past its end use `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_schedule: Option<Vec<f64>>,
}

impl EntropyParams {
    pub fn new(c: f64, k: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            c,
            k,
            alpha,
            k_schedule: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.c) {
            return Err(EntropyError::InvalidParams(format!("C = {} must be ≥ 0", self.c)));
        }
        if !finite_nonneg(self.k) {
            return Err(EntropyError::InvalidParams(format!("K = {} must be ≥ 0", self.k)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(EntropyError::InvalidParams(format!("alpha = {} must be > 0", self.alpha)));
        }
        if let Some(s) = &self.k_schedule {
            if s.iter().any(|&k| !finite_nonneg(k)) {
                return Err(EntropyError::InvalidParams("K schedule entries must be ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// Injection allowed on step `n → n+1`.
    pub fn k_at(&self, n: usize) -> f64 {
        self.k_schedule
            .as_ref()
            .and_then(|s| s.get(n).copied())
            .unwrap_or(self.k)
    }
}

/// `H(X₀) + C ln n + Σ_{i<n} Kᵢ`, which is `H(X₀) + C ln n + nK` for constant K.
pub fn total_entropy_bound(n: usize, h0: f64, params: &EntropyParams) -> Result<f64> {
    if n == 0 {
        return Err(EntropyError::DomainError);
    }
    let injected: f64 = match &params.k_schedule {
        None => n as f64 * params.k,
        Some(_) => (0..n).map(|i| params.k_at(i)).sum(),
    };
    Ok(h0 + params.c * (n as f64).ln() + injected)
}

/// `H_O(φ(X)) ≤ H(X) + K`.
pub fn check_observation_bound(h_x: f64, h_o_next: f64, k: f64) -> bool {
    h_o_next <= h_x + k + BOUND_TOL
}

/// One row of an [`EntropyTrace`]. Step flags refer to the step `n → n+1`
/// and are vacuously true on the last row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub h: f64,
    pub h_o: f64,
    /// `C ln(n+1)`, the allowed growth of `H` over the next step.
    pub step_bound: f64,
    /// `H(Xₙ) + Kₙ`, the allowed observer entropy at the next step.
    pub obs_bound: f64,
    /// Cumulative bound; at `n = 0` this is `H(X₀) + H_O(X₀)` itself.
    pub total_bound: f64,
    pub step_bound_ok: bool,
    pub obs_bound_ok: bool,
    pub total_bound_ok: bool,
}

impl TraceRow {
    pub fn total(&self) -> f64 {
        self.h + self.h_o
    }

    /// Short code for the violated checks: `S`, `O`, `T`, or `none`.
    pub fn violated_flags(&self) -> String {
        let flags: String = [
            (!self.step_bound_ok, 'S'),
            (!self.obs_bound_ok, 'O'),
            (!self.total_bound_ok, 'T'),
        ]
        .iter()
        .filter_map(|&(bad, c)| bad.then_some(c))
        .collect();
        if flags.is_empty() {
            "none".to_string()
        } else {
            flags
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EntropyTrace {
    pub rows: Vec<TraceRow>,
}

impl EntropyTrace {
    /// Builds the ledger from aligned series `H(Xₙ)` and `H_O(Xₙ)`.
    pub fn from_series(h: &[f64], h_o: &[f64], params: &EntropyParams) -> Result<Self> {
        params.validate()?;
        if h.len() != h_o.len() {
            return Err(EntropyError::ShapeMismatch(format!(
                "{} state entropies but {} observer entropies",
                h.len(),
                h_o.len()
            )));
        }
        if let Some(v) = h.iter().chain(h_o).find(|v| !v.is_finite() || **v < 0.0) {
            return Err(EntropyError::InvalidDistribution(format!("entropy {v} must be ≥ 0")));
        }
        let last = h.len().saturating_sub(1);
        let rows = (0..h.len())
            .map(|n| {
                let step_bound = params.c * ((n + 1) as f64).ln();
                let obs_bound = h[n] + params.k_at(n);
                let total_bound = if n == 0 {
                    h[0] + h_o[0]
                } else {
                    total_entropy_bound(n, h[0], params).expect("n ≥ 1")
                };
                let (step_ok, obs_ok) = if n < last {
                    (
                        h[n + 1] - h[n] <= step_bound + BOUND_TOL,
                        check_observation_bound(h[n], h_o[n + 1], params.k_at(n)),
                    )
                } else {
                    (true, true)
                };
                TraceRow {
                    n,
                    h: h[n],
                    h_o: h_o[n],
                    step_bound,
                    obs_bound,
                    total_bound,
                    step_bound_ok: step_ok,
                    obs_bound_ok: obs_ok,
                    total_bound_ok: h[n] + h_o[n] <= total_bound + BOUND_TOL,
                }
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn h(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    pub fn all_bounds_hold(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.step_bound_ok && r.obs_bound_ok && r.total_bound_ok)
    }
}

/// Steps `n` with `H(Xₙ₊₁) − H(Xₙ) > C ln(n+1)` beyond tolerance.
pub fn check_step_bound(trace: &EntropyTrace, c: f64) -> Vec<usize> {
    trace
        .rows
        .windows(2)
        .filter(|w| w[1].h - w[0].h > c * ((w[0].n + 1) as f64).ln() + BOUND_TOL)
        .map(|w| w[0].n)
        .collect()
}

/// The chain `χ₀ ⊆ χ₁ ⊆ … ⊆ χₙ` with its step inclusions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Filtration {
    pub layers: Vec<FinObj>,
    pub inclusions: Vec<FinMor>,
}

impl Filtration {
    /// The inclusion `χᵢ → χⱼ` for `i ≤ j`, built directly from labels.
    pub fn inclusion_between(&self, i: usize, j: usize) -> Result<FinMor> {
        let (src, dst) = match (self.layers.get(i), self.layers.get(j)) {
            (Some(s), Some(d)) if i <= j => (s, d),
            _ => {
                return Err(EntropyError::ShapeMismatch(format!(
                    "no inclusion from layer {i} to layer {j}"
                )))
            }
        };
        Ok(FinMor::from_fn(format!("incl_{i}_{j}"), src, dst, |x| x.to_string())?)
    }

    /// The composite of step inclusions from `χᵢ` to `χⱼ`.
    pub fn composite_inclusion(&self, i: usize, j: usize) -> Result<FinMor> {
        let mut acc = FinMor::identity(self.layers.get(i).ok_or_else(|| {
            EntropyError::ShapeMismatch(format!("no layer {i}"))
        })?);
        for step in self.inclusions.get(i..j).unwrap_or(&[]) {
            acc = compose(&acc, step)?;
        }
        Ok(acc)
    }

    /// The final layer, which contains every earlier one.
    pub fn omega(&self) -> &FinObj {
        self.layers.last().expect("at least χ₀")
    }
}

/// `χ₀ = X₀`, `χₖ₊₁ = V(χₖ)` for `k < n`, each step checked to be an inclusion.
pub fn build_filtration(
    universe: &Universe,
    verification: &FunctorRep,
    x0: &FinObj,
    n: usize,
) -> Result<Filtration> {
    let mut layers = vec![x0.clone()];
    let mut inclusions = Vec::with_capacity(n);
    for k in 0..n {
        let prev = &layers[k];
        let next = universe.functor_object(verification, prev)?.clone();
        if let Some(missing) = prev.elements().iter().find(|e| !next.contains(e)) {
            return Err(EntropyError::NotMonotone {
                stage: k,
                next: k + 1,
                missing: missing.clone(),
            });
        }
        inclusions.push(FinMor::from_fn(format!("chi_{k}_{}", k + 1), prev, &next, |x| {
            x.to_string()
        })?);
        layers.push(next);
    }
    Ok(Filtration { layers, inclusions })
}

/// `Mₙ = ⋃_{k≤n} Xₖ` for an orbit of carriers.
pub fn memory_union(orbit: &[FinObj]) -> Result<FinObj> {
    let all: std::collections::BTreeSet<&String> =
        orbit.iter().flat_map(|o| o.elements()).collect();
    Ok(FinObj::new(format!("M{}", orbit.len().saturating_sub(1)), all.into_iter().cloned())?)
}

/// Fixed per-coordinate binning used to turn real-valued samples into a
/// distribution over occupied cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || bins == 0 {
            return Err(EntropyError::InvalidParams(format!(
                "binning [{lo}, {hi}) with {bins} bins"
            )));
        }
        Ok(Self { lo, hi, bins })
    }

    fn cell(&self, v: f64) -> String {
        if !v.is_finite() {
            return "nan".to_string();
        }
        let t = ((v - self.lo) / (self.hi - self.lo) * self.bins as f64).floor();
        let i = t.clamp(0.0, (self.bins - 1) as f64) as usize;
        i.to_string()
    }

    /// Empirical distribution of `samples` over occupied grid cells.
    pub fn histogram(&self, id: &str, samples: &[Vec<f64>]) -> Result<ProbState> {
        if samples.is_empty() {
            return Err(EntropyError::InvalidDistribution("no samples".into()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in samples {
            let label = s.iter().map(|&v| self.cell(v)).collect::<Vec<_>>().join(":");
            *counts.entry(format!("c{label}")).or_default() += 1;
        }
        let total = samples.len() as f64;
        let carrier = FinObj::new(id, counts.keys().cloned())?;
        let mut probs: Vec<f64> = counts.values().map(|&c| c as f64 / total).collect();
        // Division can leave the mass a few ulps from 1.
        let mass: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= mass);
        ProbState::new(carrier, probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: &str, elems: &[&str]) -> FinObj {
        FinObj::new(id, elems.iter().copied()).unwrap()
    }

    fn table(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn entropy_examples() {
        let x4 = obj("X", &["a", "b", "c", "d"]);
        assert_eq!(shannon_entropy(&ProbState::uniform(x4.clone()).unwrap()), 2.0);
        assert_eq!(shannon_entropy(&ProbState::point_mass(x4, "c").unwrap()), 0.0);
        let x3 = obj("X", &["a", "b", "c"]);
        let p = ProbState::new(x3, vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(shannon_entropy(&p), 1.5);
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        let x2 = obj("X", &["a", "b"]);
        assert!(ProbState::new(x2.clone(), vec![0.5, 0.6]).is_err());
        assert!(ProbState::new(x2.clone(), vec![1.5, -0.5]).is_err());
        assert!(ProbState::new(x2, vec![1.0]).is_err());
        assert!(entropy_bits(&[0.3, 0.3]).is_err());
        assert_eq!(entropy_bits(&[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn pushforward_examples() {
        let x = obj("X", &["a", "b", "c"]);
        let p = ProbState::uniform(x.clone()).unwrap();
        let id = FinMor::identity(&x);
        assert_eq!(pushforward(&p, &id).unwrap(), p);

        let one = obj("1", &["*"]);
        let bang = FinMor::from_fn("!", &x, &one, |_| "*").unwrap();
        assert_eq!(shannon_entropy(&pushforward(&p, &bang).unwrap()), 0.0);

        let y = obj("Y", &["u", "v"]);
        let merge = FinMor::new("m", &x, &y, table(&[("a", "u"), ("b", "u"), ("c", "v")])).unwrap();
        let q = pushforward(&p, &merge).unwrap();
        assert!((q.prob("u").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // -(2/3)log2(2/3) - (1/3)log2(1/3) = log2(3) - 2/3
        let expected = 3f64.log2() - 2.0 / 3.0;
        assert!((shannon_entropy(&q) - expected).abs() < 1e-12);
        assert!((shannon_entropy(&q) - 0.9183).abs() < 1e-4);

        assert!(matches!(
            pushforward(&q, &merge),
            Err(EntropyError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn monotonicity_reports_both_directions() {
        let x = obj("X", &["a", "b"]);
        let one = obj("1", &["*"]);
        let bang = FinMor::from_fn("!", &x, &one, |_| "*").unwrap();
        let m = check_monotonicity(&ProbState::uniform(x).unwrap(), &bang).unwrap();
        assert!(!m.postulate_holds);
        assert!(m.contraction_holds);
    }

    fn params(c: f64, k: f64) -> EntropyParams {
        EntropyParams::new(c, k, 1.0).unwrap()
    }

    #[test]
    fn step_bound_examples() {
        let flat = EntropyTrace::from_series(&[1.0; 5], &[0.0; 5], &params(0.0, 0.0)).unwrap();
        assert!(check_step_bound(&flat, 0.0).is_empty());

        let jump = EntropyTrace::from_series(&[0.0, 3.0, 3.0], &[0.0; 3], &params(1.0, 0.0)).unwrap();
        assert_eq!(check_step_bound(&jump, 1.0), vec![0]);
        assert!(!jump.rows[0].step_bound_ok);

        let mut h = vec![0.0];
        for n in 0..10 {
            h.push(h[n] + 0.5 * ((n + 1) as f64).ln());
        }
        let slow = EntropyTrace::from_series(&h, &vec![0.0; h.len()], &params(1.0, 0.0)).unwrap();
        assert!(check_step_bound(&slow, 1.0).is_empty());
    }

    #[test]
    fn observation_bound_examples() {
        assert!(check_observation_bound(2.0, 2.5, 1.0));
        assert!(check_observation_bound(2.0, 2.0, 0.0));
        assert!(!check_observation_bound(1.0, 2.0, 0.5));
    }

    #[test]
    fn total_bound_examples() {
        let p = params(2.0, 0.5);
        assert_eq!(total_entropy_bound(1, 1.0, &p).unwrap(), 1.5);
        let b = total_entropy_bound(3, 1.0, &p).unwrap();
        assert!((b - (1.0 + 2.0 * 3f64.ln() + 1.5)).abs() < 1e-15);
        assert!((b - 4.697).abs() < 1e-3);
        let zero = params(0.0, 0.0);
        for n in 1..20 {
            assert_eq!(total_entropy_bound(n, 0.7, &zero).unwrap(), 0.7);
        }
        assert_eq!(total_entropy_bound(0, 1.0, &p), Err(EntropyError::DomainError));
    }

    #[test]
    fn k_schedule_replaces_constant_injection() {
        let mut p = params(0.0, 1.0);
        p.k_schedule = Some(vec![0.0, 0.5]);
        assert_eq!(p.k_at(0), 0.0);
        assert_eq!(p.k_at(5), 1.0);
        assert_eq!(total_entropy_bound(3, 0.0, &p).unwrap(), 1.5);
    }

    #[test]
    fn params_are_validated() {
        assert!(EntropyParams::new(-1.0, 0.0, 1.0).is_err());
        assert!(EntropyParams::new(0.0, -0.1, 1.0).is_err());
        assert!(EntropyParams::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn trace_rows_report_flags() {
        let t = EntropyTrace::from_series(&[1.0, 1.0, 1.0], &[0.5, 3.0, 0.5], &params(1.0, 0.5))
            .unwrap();
        assert!(!t.rows[0].obs_bound_ok);
        assert_eq!(t.rows[0].violated_flags(), "O");
        assert_eq!(t.rows[0].total_bound, 1.5);
        assert!(!t.rows[1].total_bound_ok);
        assert_eq!(t.rows[2].violated_flags(), "none");
    }

    fn marker_chain(collapse: bool) -> (Universe, FunctorRep) {
        let mut u = Universe::new();
        u.add_object(obj("X0", &["a", "b"])).unwrap();
        u.add_object(obj("X1", &["a", "b", "m0"])).unwrap();
        u.add_object(obj("X2", &["a", "b", "m0", "m1"])).unwrap();
        u.add_object(obj("S", &["a"])).unwrap();
        let last = if collapse { "S" } else { "X2" };
        let v = FunctorRep::from_tables(
            "V",
            table(&[("X0", "X1"), ("X1", last), ("X2", "X2")]),
            BTreeMap::new(),
        );
        u.add_functor(v.clone()).unwrap();
        (u, v)
    }

    #[test]
    fn filtration_grows_by_markers() {
        let (u, v) = marker_chain(false);
        let x0 = u.object("X0").unwrap().clone();
        let f = build_filtration(&u, &v, &x0, 2).unwrap();
        let sizes: Vec<usize> = f.layers.iter().map(FinObj::len).collect();
        assert_eq!(sizes, [2, 3, 4]);
        assert!(f.inclusions.iter().all(FinMor::is_injective));
        let direct = f.inclusion_between(0, 2).unwrap();
        assert!(f.composite_inclusion(0, 2).unwrap().same_map(&direct));
        assert_eq!(f.omega().id(), "X2");
    }

    #[test]
    fn identity_filtration_is_constant() {
        let (u, _) = marker_chain(false);
        let x0 = u.object("X0").unwrap().clone();
        let f = build_filtration(&u, &FunctorRep::identity(), &x0, 3).unwrap();
        assert!(f.layers.iter().all(|l| l == &x0));
    }

    #[test]
    fn collapsing_filtration_is_rejected() {
        let (u, v) = marker_chain(true);
        let x0 = u.object("X0").unwrap().clone();
        assert!(matches!(
            build_filtration(&u, &v, &x0, 2),
            Err(EntropyError::NotMonotone { stage: 1, .. })
        ));
    }

    #[test]
    fn memory_union_keeps_all_states() {
        let m = memory_union(&[obj("A", &["a"]), obj("B", &["b"]), obj("C", &["a", "c"])]).unwrap();
        assert_eq!(m.elements(), ["a", "b", "c"]);
    }

    #[test]
    fn histogram_over_cells() {
        let b = Binning::new(0.0, 1.0, 4).unwrap();
        let s = b
            .histogram("h", &[vec![0.1], vec![0.15], vec![0.9], vec![5.0]])
            .unwrap();
        assert_eq!(s.carrier().elements(), ["c0", "c3"]);
        assert_eq!(s.probs(), [0.5, 0.5]);
        assert!(Binning::new(1.0, 0.0, 4).is_err());
    }
}
