//! Finite-set semantics for objects, morphisms, functors and natural
//! transformations.
//!
//! Objects are finite sets of string labels kept in canonical (lexicographic)
//! order, morphisms are total functions given by explicit tables, and functors
//! and transformations are explicit tables over a declared [`Universe`].
//! Every commutativity condition is decided by pointwise enumeration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name under which the identity functor is always available.
pub const IDENTITY_FUNCTOR: &str = "Id";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error("object `{object}` lists element `{element}` more than once")]
    DuplicateElement { object: String, element: String },
    #[error("morphism `{morphism}` is not defined on element `{element}` of its source")]
    NotTotal { morphism: String, element: String },
    #[error("morphism `{morphism}` maps `{element}`, which is not in its source")]
    ForeignElement { morphism: String, element: String },
    #[error("morphism `{morphism}` sends `{element}` to `{image}`, outside its target")]
    ImageOutsideTarget {
        morphism: String,
        element: String,
        image: String,
    },
    #[error("cannot compose `{first}` with `{second}`: `{first}` lands in `{dst}` but `{second}` starts at `{src}`")]
    NonComposable {
        first: String,
        second: String,
        dst: String,
        src: String,
    },
    #[error("transformation `{transformation}` has no component at `{object}`")]
    MissingComponent {
        transformation: String,
        object: String,
    },
    #[error("morphism `{0}` is not an automorphism")]
    NotAutomorphism(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown morphism `{0}`")]
    UnknownMorphism(String),
    #[error("unknown functor `{0}`")]
    UnknownFunctor(String),
    #[error("unknown transformation `{0}`")]
    UnknownTransformation(String),
    #[error("functor `{functor}` is not defined on {kind} `{id}`")]
    FunctorUndefined {
        functor: String,
        kind: &'static str,
        id: String,
    },
    #[error("id `{0}` is declared twice")]
    DuplicateId(String),
}

pub type Result<T, E = CategoryError> = std::result::Result<T, E>;

/// A finite set with a label. Elements are distinct and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FinObj {
    id: String,
    elements: Vec<String>,
}

impl FinObj {
    pub fn new<I, S>(id: impl Into<String>, elements: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        let mut elements: Vec<String> = elements.into_iter().map(Into::into).collect();
        elements.sort();
        if let Some(w) = elements.windows(2).find(|w| w[0] == w[1]) {
            return Err(CategoryError::DuplicateElement {
                object: id,
                element: w[0].clone(),
            });
        }
        Ok(Self { id, elements })
    }

    pub fn empty(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            elements: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, element: &str) -> bool {
        self.index_of(element).is_some()
    }

    pub fn index_of(&self, element: &str) -> Option<usize> {
        self.elements
            .binary_search_by(|e| e.as_str().cmp(element))
            .ok()
    }

    /// Same element set, ignoring the label.
    pub fn same_elements(&self, other: &FinObj) -> bool {
        self.elements == other.elements
    }

    /// True when every element of `self` is also an element of `other`.
    pub fn is_subset_of(&self, other: &FinObj) -> bool {
        self.elements.iter().all(|e| other.contains(e))
    }
}

impl fmt::Display for FinObj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {{{}}}", self.id, self.elements.join(", "))
    }
}

/// A total function between two finite objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinMor {
    id: String,
    src: FinObj,
    dst: FinObj,
    mapping: BTreeMap<String, String>,
}

impl FinMor {
    pub fn new(
        id: impl Into<String>,
        src: &FinObj,
        dst: &FinObj,
        mapping: BTreeMap<String, String>,
    ) -> Result<Self> {
        let id = id.into();
        for x in src.elements() {
            match mapping.get(x) {
                None => {
                    return Err(CategoryError::NotTotal {
                        morphism: id,
                        element: x.clone(),
                    })
                }
                Some(y) if !dst.contains(y) => {
                    return Err(CategoryError::ImageOutsideTarget {
                        morphism: id,
                        element: x.clone(),
                        image: y.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(x) = mapping.keys().find(|x| !src.contains(x)) {
            return Err(CategoryError::ForeignElement {
                morphism: id,
                element: x.clone(),
            });
        }
        Ok(Self {
            id,
            src: src.clone(),
            dst: dst.clone(),
            mapping,
        })
    }

    /// Builds a morphism from a rule evaluated on every source element.
    pub fn from_fn<F, S>(id: impl Into<String>, src: &FinObj, dst: &FinObj, rule: F) -> Result<Self>
    where
        F: Fn(&str) -> S,
        S: Into<String>,
    {
        let mapping = src
            .elements()
            .iter()
            .map(|x| (x.clone(), rule(x).into()))
            .collect();
        Self::new(id, src, dst, mapping)
    }

    pub fn identity(obj: &FinObj) -> Self {
        Self {
            id: identity_id(obj.id()),
            src: obj.clone(),
            dst: obj.clone(),
            mapping: obj
                .elements()
                .iter()
                .map(|x| (x.clone(), x.clone()))
                .collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn src(&self) -> &FinObj {
        &self.src
    }

    pub fn dst(&self) -> &FinObj {
        &self.dst
    }

    pub fn mapping(&self) -> &BTreeMap<String, String> {
        &self.mapping
    }

    pub fn apply(&self, x: &str) -> Option<&str> {
        self.mapping.get(x).map(String::as_str)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Extensional equality: same source, target and table, any label.
    pub fn same_map(&self, other: &FinMor) -> bool {
        self.src == other.src && self.dst == other.dst && self.mapping == other.mapping
    }

    pub fn is_endo(&self) -> bool {
        self.src == self.dst
    }

    pub fn is_identity(&self) -> bool {
        self.is_endo() && self.mapping.iter().all(|(x, y)| x == y)
    }

    pub fn is_injective(&self) -> bool {
        let images: BTreeSet<&String> = self.mapping.values().collect();
        images.len() == self.mapping.len()
    }

    pub fn is_bijective(&self) -> bool {
        self.is_injective() && self.src.len() == self.dst.len()
    }

    /// `self` composed with itself `k` times; `k = 0` gives the identity.
    pub fn power(&self, k: u64) -> Result<FinMor> {
        if !self.is_endo() {
            return Err(CategoryError::ShapeMismatch(format!(
                "`{}` is not an endomorphism",
                self.id
            )));
        }
        let mut acc = FinMor::identity(&self.src);
        for _ in 0..k {
            acc = compose(&acc, self)?;
        }
        Ok(acc.with_id(format!("{}^{}", self.id, k)))
    }
}

pub fn identity_id(object: &str) -> String {
    format!("id_{object}")
}

/// `g ∘ f`: apply `f` first, then `g`.
pub fn compose(f: &FinMor, g: &FinMor) -> Result<FinMor> {
    if f.dst != g.src {
        return Err(CategoryError::NonComposable {
            first: f.id.clone(),
            second: g.id.clone(),
            dst: f.dst.id.clone(),
            src: g.src.id.clone(),
        });
    }
    let mapping = f
        .mapping
        .iter()
        .map(|(x, y)| (x.clone(), g.mapping[y].clone()))
        .collect();
    Ok(FinMor {
        id: format!("{}.{}", g.id, f.id),
        src: f.src.clone(),
        dst: g.dst.clone(),
        mapping,
    })
}

/// Least `k ≥ 1` with `θ^k = id`, i.e. the lcm of the cycle lengths.
pub fn automorphism_order(theta: &FinMor) -> Result<u64> {
    if !theta.is_endo() || !theta.is_bijective() {
        return Err(CategoryError::NotAutomorphism(theta.id.clone()));
    }
    let elems = theta.src.elements();
    let mut seen = vec![false; elems.len()];
    let mut order = 1u64;
    for start in 0..elems.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0u64;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            len += 1;
            let image = &theta.mapping[&elems[i]];
            i = theta.src.index_of(image).expect("bijection stays in carrier");
        }
        order = lcm(order, len);
    }
    Ok(order)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// The agreement set `{x | η(x) = θ(x)}` and its inclusion into the source.
pub fn equalizer(eta: &FinMor, theta: &FinMor) -> Result<(FinObj, FinMor)> {
    if eta.src != theta.src || eta.dst != theta.dst {
        return Err(CategoryError::ShapeMismatch(format!(
            "`{}` and `{}` are not parallel",
            eta.id, theta.id
        )));
    }
    let agree = eta
        .src
        .elements()
        .iter()
        .filter(|x| eta.mapping[*x] == theta.mapping[*x])
        .cloned();
    let obj = FinObj::new(format!("Eq({},{})", eta.id, theta.id), agree)?;
    let incl = FinMor::from_fn(format!("incl_{}", obj.id), &obj, &eta.src, |x| x.to_string())?;
    Ok((obj, incl))
}

/// One pointwise disagreement in a square.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareViolation {
    pub element: String,
    pub left_path: String,
    pub right_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SquareReport {
    pub holds: bool,
    pub violations: Vec<SquareViolation>,
}

impl SquareReport {
    pub fn from_violations(violations: Vec<SquareViolation>) -> Self {
        Self {
            holds: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FunctorKind {
    Identity,
    Table {
        obj_map: BTreeMap<String, String>,
        mor_map: BTreeMap<String, String>,
    },
}

/// A functor given by explicit object and morphism tables over a universe.
///
/// Identity morphisms missing from the morphism table are sent to the
/// identity of the image object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctorRep {
    name: String,
    kind: FunctorKind,
}

impl FunctorRep {
    pub fn identity() -> Self {
        Self {
            name: IDENTITY_FUNCTOR.to_string(),
            kind: FunctorKind::Identity,
        }
    }

    pub fn from_tables(
        name: impl Into<String>,
        obj_map: BTreeMap<String, String>,
        mor_map: BTreeMap<String, String>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: FunctorKind::Table { obj_map, mor_map },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, FunctorKind::Identity)
    }

    /// Image object id, if the table covers `object`.
    pub fn object_image<'a>(&'a self, object: &'a str) -> Option<&'a str> {
        match &self.kind {
            FunctorKind::Identity => Some(object),
            FunctorKind::Table { obj_map, .. } => obj_map.get(object).map(String::as_str),
        }
    }

    fn morphism_image<'a>(&'a self, morphism: &'a str) -> Option<&'a str> {
        match &self.kind {
            FunctorKind::Identity => Some(morphism),
            FunctorKind::Table { mor_map, .. } => mor_map.get(morphism).map(String::as_str),
        }
    }

    fn declared_objects(&self) -> Vec<&str> {
        match &self.kind {
            FunctorKind::Identity => Vec::new(),
            FunctorKind::Table { obj_map, .. } => obj_map.keys().map(String::as_str).collect(),
        }
    }
}

/// A transformation given by one component morphism per object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NatTransRep {
    pub name: String,
    pub source_functor: String,
    pub target_functor: String,
    /// Object id to component morphism id.
    pub components: BTreeMap<String, String>,
}

/// Outcome of validating a functor table against the functor laws.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FunctorReport {
    pub functor: String,
    pub typing_violations: Vec<String>,
    pub identity_violations: Vec<String>,
    pub composition_violations: Vec<String>,
    pub composable_pairs_checked: usize,
}

impl FunctorReport {
    pub fn is_valid(&self) -> bool {
        self.typing_violations.is_empty()
            && self.identity_violations.is_empty()
            && self.composition_violations.is_empty()
    }
}

/// A declared finite universe of objects, morphisms, functors and
/// transformations. Identity morphisms are added for every object.
#[derive(Debug, Clone, Default)]
pub struct Universe {
    objects: BTreeMap<String, FinObj>,
    morphisms: BTreeMap<String, FinMor>,
    functors: BTreeMap<String, FunctorRep>,
    transformations: BTreeMap<String, NatTransRep>,
}

impl Universe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_object(&mut self, obj: FinObj) -> Result<()> {
        let ident = FinMor::identity(&obj);
        if self.objects.contains_key(obj.id()) || self.morphisms.contains_key(ident.id()) {
            return Err(CategoryError::DuplicateId(obj.id().to_string()));
        }
        self.morphisms.insert(ident.id().to_string(), ident);
        self.objects.insert(obj.id().to_string(), obj);
        Ok(())
    }

    /// Declares a morphism by table; `src` and `dst` must already exist.
    pub fn add_morphism(
        &mut self,
        id: &str,
        src: &str,
        dst: &str,
        mapping: BTreeMap<String, String>,
    ) -> Result<&FinMor> {
        if self.morphisms.contains_key(id) {
            return Err(CategoryError::DuplicateId(id.to_string()));
        }
        let mor = FinMor::new(id, self.object(src)?, self.object(dst)?, mapping)?;
        Ok(self.morphisms.entry(id.to_string()).or_insert(mor))
    }

    /// Declares an already-built morphism whose endpoints are in the universe.
    pub fn insert_morphism(&mut self, mor: FinMor) -> Result<()> {
        if self.morphisms.contains_key(mor.id()) {
            return Err(CategoryError::DuplicateId(mor.id().to_string()));
        }
        for end in [mor.src(), mor.dst()] {
            if self.object(end.id())? != end {
                return Err(CategoryError::ShapeMismatch(format!(
                    "`{}` does not match the declared object `{}`",
                    mor.id(),
                    end.id()
                )));
            }
        }
        self.morphisms.insert(mor.id().to_string(), mor);
        Ok(())
    }

    /// Declares a functor; every table entry must reference declared ids.
    pub fn add_functor(&mut self, functor: FunctorRep) -> Result<()> {
        if functor.name == IDENTITY_FUNCTOR || self.functors.contains_key(&functor.name) {
            return Err(CategoryError::DuplicateId(functor.name.clone()));
        }
        if let FunctorKind::Table { obj_map, mor_map } = &functor.kind {
            for id in obj_map.keys().chain(obj_map.values()) {
                self.object(id)?;
            }
            for id in mor_map.keys().chain(mor_map.values()) {
                self.morphism(id)?;
            }
        }
        self.functors.insert(functor.name.clone(), functor);
        Ok(())
    }

    /// Declares a transformation after checking each component's endpoints.
    pub fn add_transformation(&mut self, trans: NatTransRep) -> Result<()> {
        if self.transformations.contains_key(&trans.name) {
            return Err(CategoryError::DuplicateId(trans.name.clone()));
        }
        let source = self.functor(&trans.source_functor)?;
        let target = self.functor(&trans.target_functor)?;
        for (obj, comp) in &trans.components {
            let obj = self.object(obj)?;
            let comp = self.morphism(comp)?;
            let want_src = self.functor_object(source, obj)?;
            let want_dst = self.functor_object(target, obj)?;
            if comp.src() != want_src || comp.dst() != want_dst {
                return Err(CategoryError::ShapeMismatch(format!(
                    "component `{}` of `{}` at `{}` must go {} -> {}",
                    comp.id(),
                    trans.name,
                    obj.id(),
                    want_src.id(),
                    want_dst.id()
                )));
            }
        }
        self.transformations.insert(trans.name.clone(), trans);
        Ok(())
    }

    pub fn object(&self, id: &str) -> Result<&FinObj> {
        self.objects
            .get(id)
            .ok_or_else(|| CategoryError::UnknownObject(id.to_string()))
    }

    pub fn morphism(&self, id: &str) -> Result<&FinMor> {
        self.morphisms
            .get(id)
            .ok_or_else(|| CategoryError::UnknownMorphism(id.to_string()))
    }

    pub fn functor(&self, name: &str) -> Result<&FunctorRep> {
        static IDENTITY: std::sync::OnceLock<FunctorRep> = std::sync::OnceLock::new();
        if name == IDENTITY_FUNCTOR {
            return Ok(IDENTITY.get_or_init(FunctorRep::identity));
        }
        self.functors
            .get(name)
            .ok_or_else(|| CategoryError::UnknownFunctor(name.to_string()))
    }

    pub fn transformation(&self, name: &str) -> Result<&NatTransRep> {
        self.transformations
            .get(name)
            .ok_or_else(|| CategoryError::UnknownTransformation(name.to_string()))
    }

    pub fn objects(&self) -> impl Iterator<Item = &FinObj> {
        self.objects.values()
    }

    pub fn morphisms(&self) -> impl Iterator<Item = &FinMor> {
        self.morphisms.values()
    }

    pub fn functors(&self) -> impl Iterator<Item = &FunctorRep> {
        self.functors.values()
    }

    pub fn transformations(&self) -> impl Iterator<Item = &NatTransRep> {
        self.transformations.values()
    }

    /// Declared morphisms with source and target `obj`, excluding its identity.
    pub fn endomorphisms<'a>(&'a self, obj: &'a FinObj) -> impl Iterator<Item = &'a FinMor> + 'a {
        self.morphisms
            .values()
            .filter(move |m| m.src() == obj && m.dst() == obj && m.id() != identity_id(obj.id()))
    }

    pub fn functor_object(&self, functor: &FunctorRep, obj: &FinObj) -> Result<&FinObj> {
        let image = functor
            .object_image(obj.id())
            .ok_or_else(|| CategoryError::FunctorUndefined {
                functor: functor.name.clone(),
                kind: "object",
                id: obj.id().to_string(),
            })?;
        self.object(image)
    }

    /// The declared morphism `functor(f)`. Undeclared composites are matched
    /// extensionally against declared morphisms first.
    pub fn functor_morphism(&self, functor: &FunctorRep, f: &FinMor) -> Result<&FinMor> {
        let declared = self.resolve_declared(f).ok_or_else(|| CategoryError::FunctorUndefined {
            functor: functor.name.clone(),
            kind: "morphism",
            id: f.id().to_string(),
        })?;
        if let Some(image) = functor.morphism_image(declared.id()) {
            return self.morphism(image);
        }
        if declared.id() == identity_id(declared.src().id()) {
            let obj = self.functor_object(functor, declared.src())?;
            return self.morphism(&identity_id(obj.id()));
        }
        Err(CategoryError::FunctorUndefined {
            functor: functor.name.clone(),
            kind: "morphism",
            id: f.id().to_string(),
        })
    }

    fn resolve_declared<'a>(&'a self, f: &FinMor) -> Option<&'a FinMor> {
        match self.morphisms.get(f.id()) {
            Some(m) if m.same_map(f) => Some(m),
            _ => self.morphisms.values().find(|m| m.same_map(f)),
        }
    }

    fn component(&self, trans: &NatTransRep, obj: &FinObj) -> Result<&FinMor> {
        let id = trans
            .components
            .get(obj.id())
            .ok_or_else(|| CategoryError::MissingComponent {
                transformation: trans.name.clone(),
                object: obj.id().to_string(),
            })?;
        self.morphism(id)
    }

    /// Checks `T(f) ∘ α_X = α_Y ∘ S(f)` for `α: S ⇒ T` at every element of `S(X)`.
    pub fn check_naturality_square(&self, alpha: &NatTransRep, f: &FinMor) -> Result<SquareReport> {
        let source = self.functor(&alpha.source_functor)?;
        let target = self.functor(&alpha.target_functor)?;
        let alpha_x = self.component(alpha, f.src())?;
        let alpha_y = self.component(alpha, f.dst())?;
        let sf = self.functor_morphism(source, f)?;
        let tf = self.functor_morphism(target, f)?;
        let left = compose(alpha_x, tf)?;
        let right = compose(sf, alpha_y)?;
        let violations = left
            .mapping()
            .iter()
            .filter_map(|(x, l)| {
                let r = &right.mapping()[x];
                (l != r).then(|| SquareViolation {
                    element: x.clone(),
                    left_path: l.clone(),
                    right_path: r.clone(),
                })
            })
            .collect();
        Ok(SquareReport::from_violations(violations))
    }

    /// Every declared square of `alpha`: one per declared non-identity
    /// morphism on which both functors and both components are defined.
    pub fn check_transformation(&self, alpha: &NatTransRep) -> Result<Vec<(String, SquareReport)>> {
        let source = self.functor(&alpha.source_functor)?;
        let target = self.functor(&alpha.target_functor)?;
        let mut out = Vec::new();
        for f in self.morphisms.values() {
            if f.id() == identity_id(f.src().id()) {
                continue;
            }
            let defined = alpha.components.contains_key(f.src().id())
                && alpha.components.contains_key(f.dst().id())
                && self.functor_morphism(source, f).is_ok()
                && self.functor_morphism(target, f).is_ok();
            if defined {
                out.push((f.id().to_string(), self.check_naturality_square(alpha, f)?));
            }
        }
        Ok(out)
    }

    /// Checks typing, identity preservation and composition preservation on
    /// every composable pair of declared morphisms whose composite is declared.
    pub fn validate_functor(&self, functor: &FunctorRep) -> FunctorReport {
        let mut report = FunctorReport {
            functor: functor.name.clone(),
            ..FunctorReport::default()
        };
        if functor.is_identity() {
            return report;
        }
        for obj_id in functor.declared_objects() {
            let Ok(obj) = self.object(obj_id) else { continue };
            let ident = FinMor::identity(obj);
            match self.functor_morphism(functor, &ident) {
                Ok(image) if image.is_identity() => {}
                Ok(image) => report
                    .identity_violations
                    .push(format!("{} -> {} is not an identity", ident.id(), image.id())),
                Err(e) => report.identity_violations.push(e.to_string()),
            }
        }
        if let FunctorKind::Table { mor_map, .. } = &functor.kind {
            for (f_id, image_id) in mor_map {
                let (Ok(f), Ok(image)) = (self.morphism(f_id), self.morphism(image_id)) else {
                    continue;
                };
                let src = self.functor_object(functor, f.src());
                let dst = self.functor_object(functor, f.dst());
                match (src, dst) {
                    (Ok(s), Ok(d)) if image.src() == s && image.dst() == d => {}
                    (Ok(s), Ok(d)) => report.typing_violations.push(format!(
                        "{f_id} -> {image_id} must go {} -> {}",
                        s.id(),
                        d.id()
                    )),
                    (Err(e), _) | (_, Err(e)) => report.typing_violations.push(e.to_string()),
                }
            }
        }
        for f in self.morphisms.values() {
            let Ok(ff) = self.functor_morphism(functor, f) else { continue };
            for g in self.morphisms.values().filter(|g| g.src() == f.dst()) {
                let Ok(fg) = self.functor_morphism(functor, g) else { continue };
                let gf = compose(f, g).expect("endpoints checked");
                for h in self.morphisms.values().filter(|h| h.same_map(&gf)) {
                    let Ok(fh) = self.functor_morphism(functor, h) else { continue };
                    report.composable_pairs_checked += 1;
                    let preserved = compose(ff, fg).map(|c| c.same_map(fh)).unwrap_or(false);
                    if !preserved {
                        report.composition_violations.push(format!(
                            "{}({}) differs from {}({}) . {}({})",
                            functor.name,
                            h.id(),
                            functor.name,
                            g.id(),
                            functor.name,
                            f.id()
                        ));
                    }
                }
            }
        }
        report
    }

    pub fn from_desc(desc: &UniverseDesc) -> Result<Self> {
        let mut u = Self::new();
        for o in &desc.objects {
            u.add_object(FinObj::new(o.id.clone(), o.elements.iter().cloned())?)?;
        }
        for m in &desc.morphisms {
            u.add_morphism(&m.id, &m.src, &m.dst, m.mapping.clone())?;
        }
        for f in &desc.functors {
            u.add_functor(FunctorRep::from_tables(
                f.name.clone(),
                f.obj_map.clone(),
                f.mor_map.clone(),
            ))?;
        }
        for t in &desc.transformations {
            u.add_transformation(NatTransRep {
                name: t.name.clone(),
                source_functor: t.source.clone(),
                target_functor: t.target.clone(),
                components: t.components.clone(),
            })?;
        }
        Ok(u)
    }
}

fn check_from_identity(
    universe: &Universe,
    functor: &FunctorRep,
    trans: &NatTransRep,
    f: &FinMor,
) -> Result<SquareReport> {
    if trans.source_functor != IDENTITY_FUNCTOR || trans.target_functor != functor.name() {
        return Err(CategoryError::ShapeMismatch(format!(
            "`{}` must be a transformation Id => {}",
            trans.name,
            functor.name()
        )));
    }
    universe.check_naturality_square(trans, f)
}

/// `O(f) ∘ v_X = v_Y ∘ f` for the verification morphisms `v: Id ⇒ O`.
pub fn check_observer_square(
    universe: &Universe,
    observer: &FunctorRep,
    v: &NatTransRep,
    f: &FinMor,
) -> Result<SquareReport> {
    check_from_identity(universe, observer, v, f)
}

/// `V(f) ∘ η_X = η_Y ∘ f` for the embedding `η: Id ⇒ V`.
pub fn check_verification_square(
    universe: &Universe,
    verification: &FunctorRep,
    eta: &NatTransRep,
    f: &FinMor,
) -> Result<SquareReport> {
    check_from_identity(universe, verification, eta, f)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDesc {
    pub id: String,
    pub elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphismDesc {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub mapping: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctorDesc {
    pub name: String,
    #[serde(default)]
    pub obj_map: BTreeMap<String, String>,
    #[serde(default)]
    pub mor_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformationDesc {
    pub name: String,
    pub source: String,
    pub target: String,
    pub components: BTreeMap<String, String>,
}

/// JSON description of a universe.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniverseDesc {
    #[serde(default)]
    pub objects: Vec<ObjectDesc>,
    #[serde(default)]
    pub morphisms: Vec<MorphismDesc>,
    #[serde(default)]
    pub functors: Vec<FunctorDesc>,
    #[serde(default)]
    pub transformations: Vec<TransformationDesc>,
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

    fn mor(id: &str, src: &FinObj, dst: &FinObj, pairs: &[(&str, &str)]) -> FinMor {
        FinMor::new(id, src, dst, table(pairs)).unwrap()
    }

    #[test]
    fn objects_are_canonical() {
        let x = obj("X", &["c", "a", "b"]);
        assert_eq!(x.elements(), ["a", "b", "c"]);
        assert_eq!(x, obj("X", &["b", "c", "a"]));
        assert!(matches!(
            FinObj::new("X", ["a", "a"]),
            Err(CategoryError::DuplicateElement { .. })
        ));
    }

    #[test]
    fn morphisms_must_be_total_and_land_in_target() {
        let x = obj("X", &["a", "b"]);
        let y = obj("Y", &["c"]);
        assert!(matches!(
            FinMor::new("f", &x, &y, table(&[("a", "c")])),
            Err(CategoryError::NotTotal { .. })
        ));
        assert!(matches!(
            FinMor::new("f", &x, &y, table(&[("a", "c"), ("b", "z")])),
            Err(CategoryError::ImageOutsideTarget { .. })
        ));
        assert!(matches!(
            FinMor::new("f", &x, &y, table(&[("a", "c"), ("b", "c"), ("q", "c")])),
            Err(CategoryError::ForeignElement { .. })
        ));
    }

    #[test]
    fn compose_with_identity_is_neutral() {
        let x = obj("X", &["a", "b"]);
        let y = obj("Y", &["c", "d"]);
        let g = mor("g", &x, &y, &[("a", "d"), ("b", "c")]);
        let composite = compose(&FinMor::identity(&x), &g).unwrap();
        assert!(composite.same_map(&g));
    }

    #[test]
    fn compose_constant_maps() {
        let x = obj("X", &["a", "b"]);
        let y = obj("Y", &["c"]);
        let z = obj("Z", &["d"]);
        let f = mor("f", &x, &y, &[("a", "c"), ("b", "c")]);
        let g = mor("g", &y, &z, &[("c", "d")]);
        let gf = compose(&f, &g).unwrap();
        assert_eq!(gf.src(), &x);
        assert_eq!(gf.dst(), &z);
        assert_eq!(gf.mapping(), &table(&[("a", "d"), ("b", "d")]));
    }

    #[test]
    fn compose_rejects_mismatched_endpoints() {
        let x = obj("X", &["a"]);
        let y = obj("Y", &["b"]);
        let z = obj("Z", &["c"]);
        let f = mor("f", &x, &y, &[("a", "b")]);
        let g = mor("g", &z, &x, &[("c", "a")]);
        assert!(matches!(compose(&f, &g), Err(CategoryError::NonComposable { .. })));
    }

    #[test]
    fn automorphism_orders() {
        let x3 = obj("X", &["a", "b", "c"]);
        assert_eq!(automorphism_order(&FinMor::identity(&x3)).unwrap(), 1);
        let swap = mor("s", &x3, &x3, &[("a", "b"), ("b", "a"), ("c", "c")]);
        assert_eq!(automorphism_order(&swap).unwrap(), 2);

        let x5 = obj("X", &["1", "2", "3", "4", "5"]);
        let t = mor(
            "t",
            &x5,
            &x5,
            &[("1", "2"), ("2", "3"), ("3", "1"), ("4", "5"), ("5", "4")],
        );
        assert_eq!(automorphism_order(&t).unwrap(), 6);
        assert!(t.power(6).unwrap().is_identity());
        assert!(!t.power(3).unwrap().is_identity());

        let collapse = mor("k", &x3, &x3, &[("a", "a"), ("b", "a"), ("c", "c")]);
        assert!(matches!(
            automorphism_order(&collapse),
            Err(CategoryError::NotAutomorphism(_))
        ));
    }

    #[test]
    fn equalizer_examples() {
        let x = obj("X", &["a", "b", "c"]);
        let id = FinMor::identity(&x);
        let (whole, incl) = equalizer(&id, &id).unwrap();
        assert!(whole.same_elements(&x));
        assert!(incl.is_injective());

        let swap = mor("s", &x, &x, &[("a", "b"), ("b", "a"), ("c", "c")]);
        let (eq, incl) = equalizer(&id, &swap).unwrap();
        assert_eq!(eq.elements(), ["c"]);
        assert_eq!(incl.apply("c"), Some("c"));

        let cyc = mor("r", &x, &x, &[("a", "b"), ("b", "c"), ("c", "a")]);
        let (eq, _) = equalizer(&id, &cyc).unwrap();
        assert!(eq.is_empty());

        let y = obj("Y", &["a"]);
        let other = mor("k", &x, &y, &[("a", "a"), ("b", "a"), ("c", "a")]);
        assert!(matches!(equalizer(&id, &other), Err(CategoryError::ShapeMismatch(_))));
    }

    #[test]
    fn equalizer_of_empty_object_is_empty() {
        let e = FinObj::empty("E");
        let id = FinMor::identity(&e);
        let (eq, _) = equalizer(&id, &id).unwrap();
        assert!(eq.is_empty());
    }

    /// `X = {a,b}`, `Y = {c,d}`, observer collapsing everything to `*`.
    fn collapsing_universe() -> Universe {
        let mut u = Universe::new();
        u.add_object(obj("X", &["a", "b"])).unwrap();
        u.add_object(obj("Y", &["c", "d"])).unwrap();
        u.add_object(obj("OX", &["*"])).unwrap();
        u.add_object(obj("OY", &["*"])).unwrap();
        u.add_morphism("f", "X", "Y", table(&[("a", "c"), ("b", "c")])).unwrap();
        u.add_morphism("Of", "OX", "OY", table(&[("*", "*")])).unwrap();
        u.add_morphism("vX", "X", "OX", table(&[("a", "*"), ("b", "*")])).unwrap();
        u.add_morphism("vY", "Y", "OY", table(&[("c", "*"), ("d", "*")])).unwrap();
        u.add_functor(FunctorRep::from_tables(
            "O",
            table(&[("X", "OX"), ("Y", "OY")]),
            table(&[("f", "Of")]),
        ))
        .unwrap();
        u.add_transformation(NatTransRep {
            name: "v".into(),
            source_functor: "Id".into(),
            target_functor: "O".into(),
            components: table(&[("X", "vX"), ("Y", "vY")]),
        })
        .unwrap();
        u
    }

    #[test]
    fn identity_observer_square_holds() {
        let mut u = Universe::new();
        u.add_object(obj("X", &["a", "b"])).unwrap();
        u.add_object(obj("Y", &["c", "d"])).unwrap();
        u.add_morphism("f", "X", "Y", table(&[("a", "d"), ("b", "d")])).unwrap();
        u.add_transformation(NatTransRep {
            name: "v".into(),
            source_functor: "Id".into(),
            target_functor: "Id".into(),
            components: table(&[("X", "id_X"), ("Y", "id_Y")]),
        })
        .unwrap();
        let id = u.functor("Id").unwrap();
        let v = u.transformation("v").unwrap();
        let f = u.morphism("f").unwrap();
        assert!(check_observer_square(&u, id, v, f).unwrap().holds);
    }

    #[test]
    fn collapsing_observer_square_holds() {
        let u = collapsing_universe();
        let report = check_observer_square(
            &u,
            u.functor("O").unwrap(),
            u.transformation("v").unwrap(),
            u.morphism("f").unwrap(),
        )
        .unwrap();
        assert!(report.holds);
    }

    #[test]
    fn swapped_component_breaks_the_square() {
        // O = Id-shaped on a two-element target; v_Y a swap, f non-symmetric.
        let mut u = Universe::new();
        u.add_object(obj("X", &["a", "b"])).unwrap();
        u.add_object(obj("Y", &["c", "d"])).unwrap();
        u.add_morphism("f", "X", "Y", table(&[("a", "c"), ("b", "c")])).unwrap();
        u.add_morphism("vY", "Y", "Y", table(&[("c", "d"), ("d", "c")])).unwrap();
        u.add_transformation(NatTransRep {
            name: "v".into(),
            source_functor: "Id".into(),
            target_functor: "Id".into(),
            components: table(&[("X", "id_X"), ("Y", "vY")]),
        })
        .unwrap();
        let report = check_observer_square(
            &u,
            u.functor("Id").unwrap(),
            u.transformation("v").unwrap(),
            u.morphism("f").unwrap(),
        )
        .unwrap();
        assert!(!report.holds);
        assert_eq!(report.violations.len(), 2);
        assert_eq!(report.violations[0].left_path, "c");
        assert_eq!(report.violations[0].right_path, "d");
    }

    #[test]
    fn missing_component_is_an_error() {
        let mut u = collapsing_universe();
        u.add_transformation(NatTransRep {
            name: "w".into(),
            source_functor: "Id".into(),
            target_functor: "O".into(),
            components: table(&[("X", "vX")]),
        })
        .unwrap();
        let err = check_observer_square(
            &u,
            u.functor("O").unwrap(),
            u.transformation("w").unwrap(),
            u.morphism("f").unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, CategoryError::MissingComponent { .. }));
    }

    /// `V(X) = X ⊎ {m}` with η the inclusion.
    fn marker_universe(vf_pairs: &[(&str, &str)]) -> Universe {
        let mut u = Universe::new();
        u.add_object(obj("X", &["a", "b"])).unwrap();
        u.add_object(obj("Y", &["c", "d"])).unwrap();
        u.add_object(obj("VX", &["a", "b", "m"])).unwrap();
        u.add_object(obj("VY", &["c", "d", "m"])).unwrap();
        u.add_morphism("f", "X", "Y", table(&[("a", "c"), ("b", "c")])).unwrap();
        u.add_morphism("Vf", "VX", "VY", table(vf_pairs)).unwrap();
        u.add_morphism("etaX", "X", "VX", table(&[("a", "a"), ("b", "b")])).unwrap();
        u.add_morphism("etaY", "Y", "VY", table(&[("c", "c"), ("d", "d")])).unwrap();
        u.add_functor(FunctorRep::from_tables(
            "V",
            table(&[("X", "VX"), ("Y", "VY")]),
            table(&[("f", "Vf")]),
        ))
        .unwrap();
        u.add_transformation(NatTransRep {
            name: "eta".into(),
            source_functor: "Id".into(),
            target_functor: "V".into(),
            components: table(&[("X", "etaX"), ("Y", "etaY")]),
        })
        .unwrap();
        u
    }

    fn verification_holds(u: &Universe) -> SquareReport {
        check_verification_square(
            u,
            u.functor("V").unwrap(),
            u.transformation("eta").unwrap(),
            u.morphism("f").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn marker_extension_commutes() {
        let u = marker_universe(&[("a", "c"), ("b", "c"), ("m", "m")]);
        assert!(verification_holds(&u).holds);
        // The marker is never an η-image, so V(f) is free there.
        let u = marker_universe(&[("a", "c"), ("b", "c"), ("m", "d")]);
        assert!(verification_holds(&u).holds);
        // Perturbing V(f) on an η-image breaks the square.
        let u = marker_universe(&[("a", "d"), ("b", "c"), ("m", "m")]);
        let r = verification_holds(&u);
        assert!(!r.holds);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].element, "a");
    }

    #[test]
    fn square_checks_reject_wrong_transformation_shape() {
        let u = marker_universe(&[("a", "c"), ("b", "c"), ("m", "m")]);
        let err = check_observer_square(
            &u,
            u.functor("Id").unwrap(),
            u.transformation("eta").unwrap(),
            u.morphism("f").unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, CategoryError::ShapeMismatch(_)));
    }

    #[test]
    fn transformation_components_are_typed() {
        let mut u = collapsing_universe();
        let err = u
            .add_transformation(NatTransRep {
                name: "bad".into(),
                source_functor: "Id".into(),
                target_functor: "O".into(),
                components: table(&[("X", "f")]),
            })
            .unwrap_err();
        assert!(matches!(err, CategoryError::ShapeMismatch(_)));
    }

    #[test]
    fn functor_validation_catches_broken_composition() {
        let mut u = Universe::new();
        u.add_object(obj("X", &["a", "b"])).unwrap();
        u.add_morphism("s", "X", "X", table(&[("a", "b"), ("b", "a")])).unwrap();
        // s ∘ s = id_X, so F(s) ∘ F(s) must be the identity.
        u.add_morphism("k", "X", "X", table(&[("a", "a"), ("b", "a")])).unwrap();
        let good = FunctorRep::from_tables("G", table(&[("X", "X")]), table(&[("s", "s")]));
        let bad = FunctorRep::from_tables("B", table(&[("X", "X")]), table(&[("s", "k")]));
        u.add_functor(good.clone()).unwrap();
        u.add_functor(bad.clone()).unwrap();
        assert!(u.validate_functor(&good).is_valid());
        let r = u.validate_functor(&bad);
        assert!(!r.is_valid());
        assert!(!r.composition_violations.is_empty());
        assert!(u.validate_functor(&FunctorRep::identity()).is_valid());
    }

    #[test]
    fn functor_validation_catches_non_identity_image() {
        let mut u = Universe::new();
        u.add_object(obj("X", &["a", "b"])).unwrap();
        u.add_morphism("s", "X", "X", table(&[("a", "b"), ("b", "a")])).unwrap();
        let f = FunctorRep::from_tables("F", table(&[("X", "X")]), table(&[("id_X", "s")]));
        u.add_functor(f.clone()).unwrap();
        assert!(!u.validate_functor(&f).identity_violations.is_empty());
    }

    #[test]
    fn transformation_check_covers_declared_squares() {
        let u = marker_universe(&[("a", "c"), ("b", "c"), ("m", "m")]);
        let squares = u
            .check_transformation(u.transformation("eta").unwrap())
            .unwrap();
        assert_eq!(squares.len(), 1);
        assert!(squares.iter().all(|(_, r)| r.holds));
    }

    #[test]
    fn universe_from_json() {
        let json = r#"{
            "objects": [{"id": "X", "elements": ["b", "a"]}],
            "morphisms": [{"id": "s", "src": "X", "dst": "X", "mapping": {"a": "b", "b": "a"}}],
            "functors": [{"name": "F", "obj_map": {"X": "X"}, "mor_map": {"s": "s"}}],
            "transformations": [{"name": "t", "source": "Id", "target": "F", "components": {"X": "s"}}]
        }"#;
        let desc: UniverseDesc = serde_json::from_str(json).unwrap();
        let u = Universe::from_desc(&desc).unwrap();
        assert_eq!(u.object("X").unwrap().elements(), ["a", "b"]);
        let squares = u.check_transformation(u.transformation("t").unwrap()).unwrap();
        assert!(squares.iter().all(|(_, r)| r.holds));
    }

    #[test]
    fn square_report_serializes() {
        let r = SquareReport::from_violations(vec![SquareViolation {
            element: "a".into(),
            left_path: "c".into(),
            right_path: "d".into(),
        }]);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"holds":false,"violations":[{"element":"a","left_path":"c","right_path":"d"}]}"#
        );
    }
}
