//! Random fixtures and brute-force oracles shared by the integration tests.
//! Oracles work on raw tables and plain arithmetic, never on the library's
//! own checkers.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_complex::Complex64;
use phidrift::cascade::LinOp;
use phidrift::dynamics_bifurcation::{MapSpec, PolyTerm};
use phidrift::finite_category::{FunctorRep, NatTransRep, Universe};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Table = BTreeMap<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn random_table(rng: &mut impl Rng, src: &[String], dst: &[String]) -> Table {
    src.iter()
        .map(|x| (x.clone(), dst.choose(rng).expect("non-empty target").clone()))
        .collect()
}

/// A universe with one functor and one transformation `Id ⇒ functor`, plus
/// the raw tables everything was built from.
pub struct SquareFixture {
    pub universe: Universe,
    pub functor: String,
    pub transformation: String,
    /// Base morphisms whose squares are to be checked.
    pub morphisms: Vec<String>,
    pub elements: BTreeMap<String, Vec<String>>,
    pub tables: BTreeMap<String, Table>,
    pub src: BTreeMap<String, String>,
    pub dst: BTreeMap<String, String>,
    pub mor_image: BTreeMap<String, String>,
    pub components: BTreeMap<String, String>,
}

impl SquareFixture {
    fn new(functor: &str, transformation: &str) -> Self {
        Self {
            universe: Universe::new(),
            functor: functor.into(),
            transformation: transformation.into(),
            morphisms: vec![],
            elements: BTreeMap::new(),
            tables: BTreeMap::new(),
            src: BTreeMap::new(),
            dst: BTreeMap::new(),
            mor_image: BTreeMap::new(),
            components: BTreeMap::new(),
        }
    }

    fn object(&mut self, id: &str, elems: Vec<String>) {
        self.universe
            .add_object(phidrift::finite_category::FinObj::new(id, elems.clone()).unwrap())
            .unwrap();
        self.elements.insert(id.into(), elems);
    }

    fn morphism(&mut self, id: &str, src: &str, dst: &str, table: Table) {
        self.universe.add_morphism(id, src, dst, table.clone()).unwrap();
        self.tables.insert(id.into(), table);
        self.src.insert(id.into(), src.into());
        self.dst.insert(id.into(), dst.into());
    }

    fn finish(&mut self, obj_map: Table) {
        self.universe
            .add_functor(FunctorRep::from_tables(
                self.functor.clone(),
                obj_map,
                self.mor_image.clone(),
            ))
            .unwrap();
        self.universe
            .add_transformation(NatTransRep {
                name: self.transformation.clone(),
                source_functor: "Id".into(),
                target_functor: self.functor.clone(),
                components: self.components.clone(),
            })
            .unwrap();
    }

    /// Elements `x` of `src(f)` where `G(f)(α_X(x)) ≠ α_Y(f(x))`, computed
    /// directly from the tables.
    pub fn oracle_violations(&self, f: &str) -> Vec<String> {
        let (x, y) = (&self.src[f], &self.dst[f]);
        let alpha_x = &self.tables[&self.components[x]];
        let alpha_y = &self.tables[&self.components[y]];
        let gf = &self.tables[&self.mor_image[f]];
        let ft = &self.tables[f];
        self.elements[x]
            .iter()
            .filter(|e| gf[&alpha_x[*e]] != alpha_y[&ft[*e]])
            .cloned()
            .collect()
    }
}

/// Endofunctor `O` on at most 5 objects of at most 4 elements, random
/// components `v_X: X → O(X)` and random images `O(f)`.
pub fn observer_fixture(rng: &mut impl Rng) -> SquareFixture {
    let mut fx = SquareFixture::new("O", "v");
    let n_obj = rng.gen_range(1..=5);
    let ids = labels("X", n_obj);
    for id in &ids {
        let size = rng.gen_range(0..=4);
        fx.object(id, labels("e", size));
    }
    let nonempty: Vec<String> = ids.iter().filter(|i| !fx.elements[*i].is_empty()).cloned().collect();
    let empty: Vec<String> = ids.iter().filter(|i| fx.elements[*i].is_empty()).cloned().collect();
    // O(X) is empty exactly when X is, so every component exists.
    let obj_map: Table = ids
        .iter()
        .map(|x| {
            let pool = if fx.elements[x].is_empty() { &empty } else { &nonempty };
            (x.clone(), pool.choose(rng).unwrap().clone())
        })
        .collect();

    for x in &ids {
        let id = format!("v_{x}");
        let t = random_table(rng, &fx.elements[x].clone(), &fx.elements[&obj_map[x]].clone());
        fx.morphism(&id, x, &obj_map[x].clone(), t);
        fx.components.insert(x.clone(), id);
    }

    let n_mor = rng.gen_range(1..=6);
    for k in 0..n_mor {
        let x = ids.choose(rng).unwrap().clone();
        let targets: Vec<String> = if fx.elements[&x].is_empty() {
            ids.clone()
        } else {
            nonempty.clone()
        };
        let y = targets.choose(rng).unwrap().clone();
        let id = format!("f{k}");
        let t = random_table(rng, &fx.elements[&x].clone(), &fx.elements[&y].clone());
        fx.morphism(&id, &x, &y, t);

        let (ox, oy) = (obj_map[&x].clone(), obj_map[&y].clone());
        let oid = format!("O_f{k}");
        let ot = if rng.gen_bool(0.3) {
            // Make the square hold where the components allow it.
            let vx = &fx.tables[&fx.components[&x]];
            let vy = &fx.tables[&fx.components[&y]];
            let ft = &fx.tables[&id];
            let mut t = random_table(rng, &fx.elements[&ox].clone(), &fx.elements[&oy].clone());
            for e in &fx.elements[&x] {
                t.insert(vx[e].clone(), vy[&ft[e]].clone());
            }
            t
        } else {
            random_table(rng, &fx.elements[&ox].clone(), &fx.elements[&oy].clone())
        };
        fx.morphism(&oid, &ox, &oy, ot);
        fx.mor_image.insert(id.clone(), oid);
        fx.morphisms.push(id);
    }
    fx.finish(obj_map);
    fx
}

/// `V(X) = X ⊎ {m}`, `η` the inclusion and `V(f)` the extension by
/// `m ↦ m`, with one entry of `V(f)` sometimes overwritten.
pub fn verification_fixture(rng: &mut impl Rng) -> SquareFixture {
    let mut fx = SquareFixture::new("V", "eta");
    let n_base = rng.gen_range(1..=2);
    let ids = labels("X", n_base);
    let mut obj_map = Table::new();
    for x in &ids {
        let size = rng.gen_range(1..=3);
        let base = labels("e", size);
        let mut ext = base.clone();
        ext.push("m".into());
        let vx = format!("V{x}");
        fx.object(x, base.clone());
        fx.object(&vx, ext);
        let incl: Table = base.iter().map(|e| (e.clone(), e.clone())).collect();
        let id = format!("eta_{x}");
        fx.morphism(&id, x, &vx, incl);
        fx.components.insert(x.clone(), id);
        obj_map.insert(x.clone(), vx);
    }
    let n_mor = rng.gen_range(1..=4);
    for k in 0..n_mor {
        let x = ids.choose(rng).unwrap().clone();
        let y = ids.choose(rng).unwrap().clone();
        let id = format!("f{k}");
        let t = random_table(rng, &fx.elements[&x].clone(), &fx.elements[&y].clone());
        fx.morphism(&id, &x, &y, t.clone());
        let mut vt = t;
        vt.insert("m".into(), "m".into());
        if rng.gen_bool(0.5) {
            let (vx, vy) = (&obj_map[&x], &obj_map[&y]);
            let z = fx.elements[vx].choose(rng).unwrap().clone();
            let w = fx.elements[vy].choose(rng).unwrap().clone();
            vt.insert(z, w);
        }
        let vid = format!("V_f{k}");
        let (vx, vy) = (obj_map[&x].clone(), obj_map[&y].clone());
        fx.morphism(&vid, &vx, &vy, vt);
        fx.mor_image.insert(id.clone(), vid);
        fx.morphisms.push(id);
    }
    fx.finish(obj_map);
    fx
}

/// A chain `Y₀ → … → Y_k = T` of `F = V∘φ` with distinct consecutive sizes,
/// ending in `T` with `F(T) = T`. `T` carries a declared permutation `s`
/// whose image under `F` is a conjugate of `s`, so a witness exists.
pub struct StabilizingSystem {
    pub universe: Universe,
    pub start: String,
    pub stages: usize,
    pub terminal: String,
}

pub fn stabilizing_system(rng: &mut impl Rng) -> StabilizingSystem {
    stabilizing_system_named(rng, &|prefix, i| format!("{prefix}{i}"))
}

/// Same construction with element `i` of each object named by `name`; equal
/// seeds give isomorphic systems under any injective naming.
pub fn stabilizing_system_named(
    rng: &mut impl Rng,
    name: &dyn Fn(&str, usize) -> String,
) -> StabilizingSystem {
    let named = |prefix: &str, n: usize| -> Vec<String> { (0..n).map(|i| name(prefix, i)).collect() };
    let mut u = Universe::new();
    let k = rng.gen_range(0..=5);
    let mut sizes: Vec<usize> = vec![rng.gen_range(1..=4)];
    for _ in 0..k {
        let prev = *sizes.last().unwrap();
        let next = loop {
            let s = rng.gen_range(1..=4);
            if s != prev {
                break s;
            }
        };
        sizes.push(next);
    }
    let add = |u: &mut Universe, id: &str, n: usize, prefix: &str| {
        u.add_object(phidrift::finite_category::FinObj::new(id, named(prefix, n)).unwrap())
            .unwrap();
    };
    let mut phi_obj = Table::new();
    let mut v_obj = Table::new();
    for (i, &n) in sizes.iter().enumerate() {
        add(&mut u, &format!("Y{i}"), n, "y");
        let p_size = rng.gen_range(1..=4);
        add(&mut u, &format!("P{i}"), p_size, "p");
        phi_obj.insert(format!("Y{i}"), format!("P{i}"));
        let next = if i == k { format!("Y{k}") } else { format!("Y{}", i + 1) };
        v_obj.insert(format!("P{i}"), next);
    }

    let t = format!("Y{k}");
    let p = format!("P{k}");
    let n = sizes[k];
    let mut phi_mor = Table::new();
    let mut v_mor = Table::new();
    if n >= 2 {
        let elems = named("y", n);
        let sigma = random_permutation(rng, n);
        let pi = random_permutation(rng, n);
        // σ' = π σ π⁻¹.
        let mut pi_inv = vec![0; n];
        for (i, &v) in pi.iter().enumerate() {
            pi_inv[v] = i;
        }
        let s_tab: Table = (0..n).map(|i| (elems[i].clone(), elems[sigma[i]].clone())).collect();
        let s2_tab: Table = (0..n)
            .map(|i| (elems[i].clone(), elems[pi[sigma[pi_inv[i]]]].clone()))
            .collect();
        u.add_morphism("s", &t, &t, s_tab).unwrap();
        u.add_morphism("s_image", &t, &t, s2_tab).unwrap();
        let p_elems = named("p", u.object(&p).unwrap().len());
        let tau = random_table(rng, &p_elems, &p_elems);
        u.add_morphism("tau", &p, &p, tau).unwrap();
        phi_mor.insert("s".into(), "tau".into());
        v_mor.insert("tau".into(), "s_image".into());
    }
    u.add_functor(FunctorRep::from_tables("phi", phi_obj, phi_mor)).unwrap();
    u.add_functor(FunctorRep::from_tables("V", v_obj, v_mor)).unwrap();
    StabilizingSystem { universe: u, start: "Y0".into(), stages: k, terminal: t }
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Every permutation of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// Shannon entropy in bits, written independently of the ledger.
pub fn entropy_oracle(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Random orthogonal `Q` by Gram-Schmidt on a random matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for b in &q {
                let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    q
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect()
}

/// A random orthogonal operator of finite order: a block diagonal of
/// rational rotations and `±1` entries, conjugated by a random orthogonal
/// matrix. Returns the operator, its order and its exact spectrum.
pub fn finite_order_orthogonal(rng: &mut impl Rng, n: usize) -> (LinOp, u64, Vec<Complex64>) {
    let mut d = vec![vec![0.0; n]; n];
    let mut spectrum = Vec::new();
    let mut order = 1u64;
    let gcd = |mut a: u64, mut b: u64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut i = 0;
    while i < n {
        if i + 1 < n && rng.gen_bool(0.6) {
            let q: u64 = rng.gen_range(2..=8);
            let p: u64 = rng.gen_range(1..q);
            let a = std::f64::consts::TAU * p as f64 / q as f64;
            d[i][i] = a.cos();
            d[i][i + 1] = -a.sin();
            d[i + 1][i] = a.sin();
            d[i + 1][i + 1] = a.cos();
            spectrum.push(Complex64::from_polar(1.0, a));
            spectrum.push(Complex64::from_polar(1.0, -a));
            let q_red = q / gcd(p, q);
            order = order / gcd(order, q_red) * q_red;
            i += 2;
        } else {
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            d[i][i] = s;
            spectrum.push(Complex64::new(s, 0.0));
            if s < 0.0 {
                order = order / gcd(order, 2) * 2;
            }
            i += 1;
        }
    }
    let q = random_orthogonal(rng, n);
    let theta = matmul(&matmul(&q, &d), &transpose(&q));
    (LinOp::from_rows(&theta).unwrap(), order, spectrum)
}

/// Greedy nearest matching of two multisets; returns the largest distance.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Random polynomial map of total degree at most 3 with coefficients in
/// `[-2, 2]`.
pub fn random_polynomial(rng: &mut impl Rng, dim: usize) -> MapSpec {
    let n_terms = rng.gen_range(1..=3 * dim + 2);
    let terms = (0..n_terms)
        .map(|_| {
            let deg = rng.gen_range(0..=3);
            PolyTerm {
                out: rng.gen_range(0..dim),
                coeff: rng.gen_range(-2.0..2.0),
                vars: (0..deg).map(|_| rng.gen_range(0..dim)).collect(),
            }
        })
        .collect();
    MapSpec::Polynomial { dim, terms }
}

/// Analytic Jacobian of a polynomial map computed term by term.
pub fn polynomial_jacobian_oracle(map: &MapSpec, x: &[f64]) -> Vec<Vec<f64>> {
    let MapSpec::Polynomial { dim, terms } = map else {
        panic!("not a polynomial");
    };
    let mut j = vec![vec![0.0; *dim]; *dim];
    for t in terms {
        for var in 0..*dim {
            // d/dx_var of Π x[v]: multiplicity times x_var^(m-1) times the rest.
            let m = t.vars.iter().filter(|&&v| v == var).count();
            if m == 0 {
                continue;
            }
            let rest: f64 = t.vars.iter().filter(|&&v| v != var).map(|&v| x[v]).product();
            j[t.out][var] += t.coeff * m as f64 * x[var].powi(m as i32 - 1) * rest;
        }
    }
    j
}

/// Plain orbit of `x ↦ r·x(1 − x)`.
pub fn logistic_orbit(r: f64, x0: f64, transient: usize, sample: usize) -> Vec<f64> {
    let mut x = x0;
    for _ in 0..transient {
        x = r * x * (1.0 - x);
    }
    (0..sample)
        .map(|_| {
            x = r * x * (1.0 - x);
            x
        })
        .collect()
}

/// Smallest period `p ≤ 16` of a sampled scalar orbit, if any.
pub fn scalar_period(orbit: &[f64], tol: f64) -> Option<usize> {
    (1..=16.min(orbit.len() - 1)).find(|&p| (0..orbit.len() - p).all(|i| (orbit[i + p] - orbit[i]).abs() <= tol))
}
