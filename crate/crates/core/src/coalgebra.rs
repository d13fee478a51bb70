//! Temporal iteration and the stabilization point of `F(Y) = V(φ(Y))`.
//!
//! The limit is located as the first stage `Yₙ` that admits a
//! structure-respecting bijection `w: Yₙ → F(Yₙ)`. "Structure" is the set of
//! declared non-identity endomorphisms `e` of `Yₙ` on which `F` is defined;
//! `w` must satisfy `w ∘ e = F(e) ∘ w` for each of them. Candidate bijections
//! are enumerated in lexicographic order, so the witness is deterministic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_category::{
    CategoryError, FinMor, FinObj, FunctorRep, SquareReport, SquareViolation, Universe,
};

pub const DEFAULT_MAX_ITER: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoalgebraError {
    #[error("functor `{functor}` is not defined on `{object}`: the iteration left the declared universe")]
    UniverseEscape { functor: String, object: String },
    #[error("the result did not converge, so there is no witness to verify")]
    NoWitness,
    #[error("max_iter must be at least 1")]
    ZeroMaxIter,
    #[error(transparent)]
    Category(#[from] CategoryError),
}

pub type Result<T, E = CoalgebraError> = std::result::Result<T, E>;

/// One stage of the iteration chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainRecord {
    pub stage: usize,
    pub carrier: FinObj,
    /// Inclusion from the previous carrier, present when the step only adds
    /// elements.
    pub connecting_map: Option<FinMor>,
}

/// How the limit should be read off the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaReading {
    /// Every step was an inclusion, so the carrier is the union of the chain.
    UnionOfInclusions,
    /// The carrier is the first stage isomorphic to its image.
    Stabilization,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThetaResult {
    pub carrier: FinObj,
    pub iterations: usize,
    pub converged: bool,
    /// `w: carrier → F(carrier)`, present iff converged.
    pub witness: Option<BTreeMap<String, String>>,
    pub reading: ThetaReading,
    #[serde(skip)]
    pub chain: Vec<ChainRecord>,
}

fn escape(functor: &FunctorRep, obj: &FinObj) -> CoalgebraError {
    CoalgebraError::UniverseEscape {
        functor: functor.name().to_string(),
        object: obj.id().to_string(),
    }
}

fn step<'u>(universe: &'u Universe, functor: &FunctorRep, obj: &FinObj) -> Result<&'u FinObj> {
    match universe.functor_object(functor, obj) {
        Ok(image) => Ok(image),
        Err(CategoryError::FunctorUndefined { .. }) => Err(escape(functor, obj)),
        Err(e) => Err(e.into()),
    }
}

/// `[X, φ(X), …, φⁿ(X)]`.
pub fn iterate_temporal(
    universe: &Universe,
    phi: &FunctorRep,
    x: &FinObj,
    n: usize,
) -> Result<Vec<FinObj>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x.clone());
    for _ in 0..n {
        let next = step(universe, phi, out.last().expect("non-empty"))?.clone();
        out.push(next);
    }
    Ok(out)
}

/// `F(Y) = V(φ(Y))`.
pub fn apply_f(
    universe: &Universe,
    verification: &FunctorRep,
    phi: &FunctorRep,
    y: &FinObj,
) -> Result<FinObj> {
    let py = step(universe, phi, y)?;
    Ok(step(universe, verification, py)?.clone())
}

/// Pairs `(e, F(e))` for every declared endomorphism `e` of `y` that `F` maps.
fn structure_pairs<'u>(
    universe: &'u Universe,
    verification: &FunctorRep,
    phi: &FunctorRep,
    y: &'u FinObj,
) -> Vec<(&'u FinMor, &'u FinMor)> {
    universe
        .endomorphisms(y)
        .filter_map(|e| {
            let pe = universe.functor_morphism(phi, e).ok()?;
            let fe = universe.functor_morphism(verification, pe).ok()?;
            Some((e, fe))
        })
        .collect()
}

/// Lexicographically first bijection `y → fy` commuting with every pair in
/// `structure`, if one exists.
fn find_witness(
    y: &FinObj,
    fy: &FinObj,
    structure: &[(&FinMor, &FinMor)],
) -> Option<BTreeMap<String, String>> {
    if y.len() != fy.len() {
        return None;
    }
    let n = y.len();
    // Index form: e_src[k][i] = index of e_k(y_i) in y; e_dst[k][j] likewise in fy.
    let idx = |obj: &FinObj, m: &FinMor| -> Vec<usize> {
        obj.elements()
            .iter()
            .map(|x| obj.index_of(m.apply(x).expect("total")).expect("endo"))
            .collect()
    };
    let e_src: Vec<Vec<usize>> = structure.iter().map(|(e, _)| idx(y, e)).collect();
    let e_dst: Vec<Vec<usize>> = structure.iter().map(|(_, fe)| idx(fy, fe)).collect();

    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];

    fn consistent(assign: &[Option<usize>], e_src: &[Vec<usize>], e_dst: &[Vec<usize>], i: usize) -> bool {
        e_src.iter().zip(e_dst).all(|(es, ed)| {
            // w(e(i)) = F(e)(w(i)), plus the same constraint for every j with e(j) = i.
            let forward = match (assign[es[i]], assign[i]) {
                (Some(lhs), Some(wi)) => lhs == ed[wi],
                _ => true,
            };
            forward
                && (0..es.len()).filter(|&j| es[j] == i).all(|j| match assign[j] {
                    Some(wj) => assign[i] == Some(ed[wj]),
                    None => true,
                })
        })
    }

    fn search(
        i: usize,
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        e_src: &[Vec<usize>],
        e_dst: &[Vec<usize>],
    ) -> bool {
        if i == assign.len() {
            return true;
        }
        for cand in 0..assign.len() {
            if used[cand] {
                continue;
            }
            assign[i] = Some(cand);
            used[cand] = true;
            if consistent(assign, e_src, e_dst, i) && search(i + 1, assign, used, e_src, e_dst) {
                return true;
            }
            used[cand] = false;
            assign[i] = None;
        }
        false
    }

    search(0, &mut assign, &mut used, &e_src, &e_dst).then(|| {
        y.elements()
            .iter()
            .zip(&assign)
            .map(|(x, w)| (x.clone(), fy.elements()[w.expect("complete")].clone()))
            .collect()
    })
}

/// Iterates `Yₙ₊₁ = F(Yₙ)` from `x0` until some stage is isomorphic to its
/// image, or `max_iter` stages have been tried.
pub fn iterate_to_theta(
    universe: &Universe,
    verification: &FunctorRep,
    phi: &FunctorRep,
    x0: &FinObj,
    max_iter: usize,
) -> Result<ThetaResult> {
    if max_iter == 0 {
        return Err(CoalgebraError::ZeroMaxIter);
    }
    let mut chain = vec![ChainRecord {
        stage: 0,
        carrier: x0.clone(),
        connecting_map: None,
    }];
    for n in 0..max_iter {
        let y = &chain[n].carrier;
        let fy = apply_f(universe, verification, phi, y)?;
        // Structure only exists on declared objects; scratch objects have none.
        let structure = match universe.object(y.id()) {
            Ok(declared) if declared == y => structure_pairs(universe, verification, phi, declared),
            _ => Vec::new(),
        };
        if let Some(witness) = find_witness(y, &fy, &structure) {
            let reading = if chain.iter().skip(1).all(|r| r.connecting_map.is_some()) {
                ThetaReading::UnionOfInclusions
            } else {
                ThetaReading::Stabilization
            };
            return Ok(ThetaResult {
                carrier: y.clone(),
                iterations: n,
                converged: true,
                witness: Some(witness),
                reading,
                chain,
            });
        }
        let connecting_map = y
            .is_subset_of(&fy)
            .then(|| FinMor::from_fn(format!("incl_{n}"), y, &fy, |x| x.to_string()))
            .transpose()?;
        chain.push(ChainRecord {
            stage: n + 1,
            carrier: fy,
            connecting_map,
        });
    }
    Ok(ThetaResult {
        carrier: chain.last().expect("non-empty").carrier.clone(),
        iterations: max_iter,
        converged: false,
        witness: None,
        reading: ThetaReading::Stabilization,
        chain,
    })
}

/// Re-checks `Θ ≅ V(φ(Θ))` through the stored witness: bijectivity first,
/// then `w(e(x)) = F(e)(w(x))` for each structure endomorphism `e`.
pub fn verify_theta(
    universe: &Universe,
    verification: &FunctorRep,
    phi: &FunctorRep,
    theta: &ThetaResult,
) -> Result<SquareReport> {
    let witness = match (&theta.witness, theta.converged) {
        (Some(w), true) => w,
        _ => return Err(CoalgebraError::NoWitness),
    };
    let carrier = &theta.carrier;
    let image = apply_f(universe, verification, phi, carrier)?;
    let mut violations = Vec::new();

    let mut hit: BTreeMap<&str, &str> = BTreeMap::new();
    for x in carrier.elements() {
        match witness.get(x) {
            None => violations.push(SquareViolation {
                element: x.clone(),
                left_path: "unmapped".into(),
                right_path: format!("an element of {}", image.id()),
            }),
            Some(wx) if !image.contains(wx) => violations.push(SquareViolation {
                element: x.clone(),
                left_path: wx.clone(),
                right_path: format!("an element of {}", image.id()),
            }),
            Some(wx) => {
                if let Some(prev) = hit.insert(wx, x) {
                    violations.push(SquareViolation {
                        element: x.clone(),
                        left_path: wx.clone(),
                        right_path: format!("already the image of {prev}"),
                    });
                }
            }
        }
    }
    if witness.len() != carrier.len() || image.len() != carrier.len() {
        violations.push(SquareViolation {
            element: carrier.id().to_string(),
            left_path: format!("{} elements", carrier.len()),
            right_path: format!("{} elements in {}", image.len(), image.id()),
        });
    }
    if !violations.is_empty() {
        return Ok(SquareReport::from_violations(violations));
    }

    let structure = match universe.object(carrier.id()) {
        Ok(declared) if declared == carrier => structure_pairs(universe, verification, phi, declared),
        _ => Vec::new(),
    };
    for (e, fe) in structure {
        for x in carrier.elements() {
            let left = &witness[e.apply(x).expect("total")];
            let right = fe.apply(&witness[x]).expect("total");
            if left != right {
                violations.push(SquareViolation {
                    element: x.clone(),
                    left_path: format!("w({}({x})) = {left}", e.id()),
                    right_path: format!("F({})(w({x})) = {right}", e.id()),
                });
            }
        }
    }
    Ok(SquareReport::from_violations(violations))
}
