//! Exact phases as rational fractions of a full turn, phased morphisms and
//! the phase-locked constructions built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::finite_category::{self, compose, CategoryError, FinMor, FinObj};

/// Largest denominator a phase may carry after reduction.
pub const DENOMINATOR_CAP: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhaseError {
    #[error("phase denominator must be positive")]
    ZeroDenominator,
    #[error("phase denominator {0} exceeds the cap of {DENOMINATOR_CAP}")]
    DenominatorOverflow(i128),
    #[error("cannot parse phase `{0}`; expected `p/q`")]
    Parse(String),
    #[error("the morphisms do not form a closed loop: {0}")]
    NotAClosedLoop(String),
    #[error("no phase assigned to `{0}`")]
    PartialPhaseMap(String),
    #[error("declared period {period} does not return `{morphism}` to the identity")]
    InvalidPeriod { morphism: String, period: u64 },
    #[error("kernel intersection and fixed-point set disagree for `{0}`")]
    LockSpaceDisagreement(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Category(#[from] CategoryError),
}

pub type Result<T, E = PhaseError> = std::result::Result<T, E>;

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A phase `(num/den)·2π` stored as the canonical residue `0 ≤ num < den`
/// with `gcd(num, den) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalPhase {
    num: i64,
    den: i64,
}

impl RationalPhase {
    pub const ZERO: Self = Self { num: 0, den: 1 };

    /// `num/den` of a turn, reduced modulo one turn.
    pub fn new(num: i64, den: i64) -> Result<Self> {
        Self::reduce(num as i128, den as i128)
    }

    fn reduce(num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(PhaseError::ZeroDenominator);
        }
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let num = num.rem_euclid(den);
        let g = gcd(num, den).max(1);
        let (num, den) = (num / g, den / g);
        if den > DENOMINATOR_CAP as i128 {
            return Err(PhaseError::DenominatorOverflow(den));
        }
        Ok(Self {
            num: num as i64,
            den: den as i64,
        })
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn denominator(self) -> i64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// The additive inverse `(den − num)/den`.
    pub fn inverse(self) -> Self {
        Self::reduce(-(self.num as i128), self.den as i128).expect("same denominator")
    }

    pub fn radians(self) -> f64 {
        std::f64::consts::TAU * self.num as f64 / self.den as f64
    }
}

impl Default for RationalPhase {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Display for RationalPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for RationalPhase {
    type Err = PhaseError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || PhaseError::Parse(s.to_string());
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: i64 = n.parse().map_err(|_| bad())?;
        let d: i64 = d.parse().map_err(|_| bad())?;
        Self::new(n, d)
    }
}

impl Serialize for RationalPhase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RationalPhase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact sum modulo one turn.
pub fn phase_add(a: RationalPhase, b: RationalPhase) -> Result<RationalPhase> {
    let (an, ad, bn, bd) = (a.num as i128, a.den as i128, b.num as i128, b.den as i128);
    let g = gcd(ad, bd);
    let den = ad / g * bd;
    let num = an * (bd / g) + bn * (ad / g);
    RationalPhase::reduce(num, den)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasedElement {
    pub element: String,
    pub phase: RationalPhase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhasedMorphism {
    pub base: FinMor,
    pub phase: RationalPhase,
}

/// Base `b.base ∘ a.base`, phase `a.phase + b.phase`.
pub fn compose_phased(a: &PhasedMorphism, b: &PhasedMorphism) -> Result<PhasedMorphism> {
    Ok(PhasedMorphism {
        base: compose(&a.base, &b.base)?,
        phase: phase_add(a.phase, b.phase)?,
    })
}

/// Total phase picked up around a closed loop of morphisms.
pub fn cycle_net_phase(cycle: &[PhasedMorphism]) -> Result<RationalPhase> {
    let (first, last) = match (cycle.first(), cycle.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(PhaseError::NotAClosedLoop("empty cycle".into())),
    };
    for pair in cycle.windows(2) {
        if pair[0].base.dst() != pair[1].base.src() {
            return Err(PhaseError::NotAClosedLoop(format!(
                "`{}` ends at `{}` but `{}` starts at `{}`",
                pair[0].base.id(),
                pair[0].base.dst().id(),
                pair[1].base.id(),
                pair[1].base.src().id()
            )));
        }
    }
    if last.base.dst() != first.base.src() {
        return Err(PhaseError::NotAClosedLoop(format!(
            "`{}` ends at `{}`, not back at `{}`",
            last.base.id(),
            last.base.dst().id(),
            first.base.src().id()
        )));
    }
    cycle
        .iter()
        .try_fold(RationalPhase::ZERO, |acc, m| phase_add(acc, m.phase))
}

fn fixed_points(m: &FinMor) -> Vec<String> {
    m.mapping()
        .iter()
        .filter(|(x, y)| x == y)
        .map(|(x, _)| x.clone())
        .collect()
}

/// Elements fixed by every power `θᵐ`, `m = 0..k−1`.
///
/// Computed both as the intersection over powers and as `Fix(θ)`; the two
/// must agree.
pub fn phase_lock_space(theta: &FinMor, period: u64) -> Result<FinObj> {
    let order = finite_category::automorphism_order(theta)?;
    if period == 0 || period % order != 0 {
        return Err(PhaseError::InvalidPeriod {
            morphism: theta.id().to_string(),
            period,
        });
    }
    let carrier = theta.src();
    let mut locked: Vec<String> = carrier.elements().to_vec();
    let mut power = FinMor::identity(carrier);
    for _ in 0..period {
        let fixed = fixed_points(&power);
        locked.retain(|x| fixed.contains(x));
        power = compose(&power, theta)?;
    }
    if locked != fixed_points(theta) {
        return Err(PhaseError::LockSpaceDisagreement(theta.id().to_string()));
    }
    Ok(FinObj::new(format!("Lock({})", theta.id()), locked)?)
}

/// All ordered pairs `(x, y)` of carrier elements with equal phase.
pub fn matched_pairs(
    carrier: &FinObj,
    phases: &BTreeMap<String, RationalPhase>,
) -> Result<Vec<(String, String)>> {
    let lookup = |x: &String| {
        phases
            .get(x)
            .copied()
            .ok_or_else(|| PhaseError::PartialPhaseMap(x.clone()))
    };
    let assigned: Vec<(&String, RationalPhase)> = carrier
        .elements()
        .iter()
        .map(|x| lookup(x).map(|p| (x, p)))
        .collect::<Result<_>>()?;
    Ok(assigned
        .iter()
        .flat_map(|(x, px)| {
            assigned
                .iter()
                .filter(move |(_, py)| py == px)
                .map(move |(y, _)| ((*x).clone(), (*y).clone()))
        })
        .collect())
}

/// The fibered product of the carrier with itself over its phase map, as an
/// object whose elements are `(x,y)` labels.
pub fn interference_pairing(
    carrier: &FinObj,
    phases: &BTreeMap<String, RationalPhase>,
) -> Result<FinObj> {
    let pairs = matched_pairs(carrier, phases)?;
    Ok(FinObj::new(
        format!("{}x{}", carrier.id(), carrier.id()),
        pairs.iter().map(|(x, y)| format!("({x},{y})")),
    )?)
}

/// `(x, φ) ↦ (f(x), φ)`.
pub fn lift_phi_phase(phi: &FinMor, states: &[PhasedElement]) -> Result<Vec<PhasedElement>> {
    states
        .iter()
        .map(|s| {
            let image = phi.apply(&s.element).ok_or_else(|| {
                PhaseError::ShapeMismatch(format!(
                    "`{}` is not in the source of `{}`",
                    s.element,
                    phi.id()
                ))
            })?;
            Ok(PhasedElement {
                element: image.to_string(),
                phase: s.phase,
            })
        })
        .collect()
}
