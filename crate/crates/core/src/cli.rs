//! Scenario-driven command line front end.
//!
//! Every command reads one JSON scenario, writes its artifacts into the
//! output directory and finishes with `manifest.json`. Exit codes: 0 success,
//! 1 check failure, 2 input error, 3 non-convergence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cascade::{self, CascadeDesc, CascadeError};
use crate::coalgebra::{self, CoalgebraError};
use crate::dynamics_bifurcation::{self as dynamics, DynamicsError, EnsembleOptions, MapSpec, RGrid, SweepOptions};
use crate::entropy_ledger::{self as ledger, shannon_entropy, EntropyError, EntropyParams, EntropyTrace};
use crate::finite_category::{self as cat, CategoryError, Universe, UniverseDesc};
use crate::phase_dynamics::{self as phase, PhaseError, PhasedMorphism, RationalPhase};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "phidrift", version, about = "Observer-coupled fixed-point iteration: checks, sweeps and spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory; overrides the scenario's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the scenario's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Functor laws, naturality squares, equalizers and automorphism orders.
    CheckAxioms,
    /// Iterate F = V∘φ to its stabilization point and verify it.
    Theta,
    /// Coupled trajectory with the Lyapunov functional.
    Simulate,
    /// Bifurcation diagram and critical thresholds over an r grid.
    Sweep,
    /// Cascade operator, fixed points, spectrum and hull claim.
    Cascade,
    /// Entropy ledger against the growth bounds.
    Entropy,
    /// Phase pairing, cycle net phases and phase-lock spaces.
    Phase,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckAxioms => "check-axioms",
            Command::Theta => "theta",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Cascade => "cascade",
            Command::Entropy => "entropy",
            Command::Phase => "phase",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("scenario is missing the `{0}` section")]
    MissingSection(&'static str),
    #[error("unresolved reference: {0}")]
    Unresolved(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NoConvergence(_) => EXIT_NO_CONVERGENCE,
            _ => EXIT_INPUT,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CategoryError> for CliError {
    fn from(e: CategoryError) -> Self {
        match e {
            CategoryError::UnknownObject(_)
            | CategoryError::UnknownMorphism(_)
            | CategoryError::UnknownFunctor(_)
            | CategoryError::UnknownTransformation(_) => CliError::Unresolved(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<CoalgebraError> for CliError {
    fn from(e: CoalgebraError) -> Self {
        match e {
            CoalgebraError::Category(c) => c.into(),
            CoalgebraError::UniverseEscape { .. } => CliError::NoConvergence(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::Category(c) => c.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<PhaseError> for CliError {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::Category(c) => c.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        match e {
            CascadeError::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NoConvergence { .. } => CliError::NoConvergence(e.to_string()),
            DynamicsError::Cascade(c) => c.into(),
            DynamicsError::Entropy(en) => en.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquareKind {
    Observer,
    Verification,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SquareCheckDesc {
    pub kind: SquareKind,
    pub functor: String,
    pub transformation: String,
    /// Defaults to every morphism whose ends carry components.
    #[serde(default)]
    pub morphisms: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EqualizerDesc {
    pub eta: String,
    pub theta: String,
    #[serde(default)]
    pub expect: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AxiomsDesc {
    #[serde(default)]
    pub squares: Vec<SquareCheckDesc>,
    #[serde(default)]
    pub equalizers: Vec<EqualizerDesc>,
    #[serde(default)]
    pub automorphisms: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ThetaSection {
    #[serde(rename = "V")]
    pub v: String,
    pub phi: String,
    pub start: String,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FiltrationSection {
    #[serde(rename = "V")]
    pub v: String,
    pub start: String,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TraceSection {
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    #[serde(rename = "H_O")]
    pub h_o: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EntropySection {
    #[serde(flatten)]
    pub params: EntropyParams,
    #[serde(default)]
    pub trace: Option<TraceSection>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AssignmentDesc {
    pub object: String,
    pub phases: BTreeMap<String, RationalPhase>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PhasedStepDesc {
    pub morphism: String,
    pub phase: RationalPhase,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CycleDesc {
    pub name: String,
    pub steps: Vec<PhasedStepDesc>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LockDesc {
    pub morphism: String,
    /// Defaults to the automorphism order.
    #[serde(default)]
    pub period: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct PhaseSection {
    #[serde(default)]
    pub assignments: Vec<AssignmentDesc>,
    #[serde(default)]
    pub cycles: Vec<CycleDesc>,
    #[serde(default)]
    pub locks: Vec<LockDesc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub steps: usize,
    pub ensemble: usize,
    pub spread: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { steps: 100, ensemble: 256, spread: 0.01, bins: 64, lo: -2.0, hi: 2.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub universe: Option<UniverseDesc>,
    #[serde(default)]
    pub axioms: Option<AxiomsDesc>,
    #[serde(default)]
    pub theta: Option<ThetaSection>,
    #[serde(default)]
    pub filtration: Option<FiltrationSection>,
    #[serde(default)]
    pub entropy: Option<EntropySection>,
    #[serde(default)]
    pub phases: Option<PhaseSection>,
    #[serde(default)]
    pub cascade: Option<CascadeDesc>,
    #[serde(default)]
    pub phi: Option<MapSpec>,
    #[serde(default)]
    pub observer: Option<MapSpec>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub r_grid: Option<RGrid>,
    #[serde(default)]
    pub transient: Option<usize>,
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default)]
    pub jitter: Option<f64>,
    #[serde(default)]
    pub schedule: Option<usize>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
}

impl Scenario {
    fn universe(&self) -> Result<Universe> {
        let desc = self.universe.as_ref().ok_or(CliError::MissingSection("universe"))?;
        Ok(Universe::from_desc(desc)?)
    }

    fn family(&self) -> Result<(&MapSpec, &MapSpec, Vec<f64>)> {
        let phi = self.phi.as_ref().ok_or(CliError::MissingSection("phi"))?;
        let o = self.observer.as_ref().ok_or(CliError::MissingSection("observer"))?;
        let dim = phi.validate()?;
        let x0 = self.x0.clone().unwrap_or_else(|| vec![0.0; dim]);
        Ok((phi, o, x0))
    }
}

/// SHA-256 of the scenario with sorted keys and the effective seed.
pub fn scenario_hash(raw: &Value, seed: u64) -> String {
    let mut v = raw.clone();
    if let Value::Object(m) = &mut v {
        m.insert("seed".into(), json!(seed));
    }
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

/// Fixed 17-significant-digit rendering used for every real in CSV output.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// What a command concluded, before any input error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Ok,
    CheckFailed,
    NoConvergence,
}

impl Verdict {
    fn from_checks(ok: bool) -> Self {
        if ok {
            Verdict::Ok
        } else {
            Verdict::CheckFailed
        }
    }

    fn code(self) -> i32 {
        match self {
            Verdict::Ok => EXIT_OK,
            Verdict::CheckFailed => EXIT_CHECK_FAILED,
            Verdict::NoConvergence => EXIT_NO_CONVERGENCE,
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Parse("--scenario <path> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    let scenario: Scenario = serde_json::from_value(raw.clone()).map_err(|e| CliError::Parse(e.to_string()))?;
    let seed = cli.seed.or(scenario.seed).unwrap_or(0);
    let dir = cli
        .out
        .clone()
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Outputs::new(&dir)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Invalid(e.to_string()))?;
    let result = pool.install(|| dispatch(cli.command, &scenario, seed, &mut out));

    let status = match &result {
        Ok(v) => json!({"exit_code": v.code()}),
        Err(e) => json!({"exit_code": e.exit_code(), "error": e.to_string()}),
    };
    let files = out.files.clone();
    out.json(
        "manifest.json",
        &json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": cli.command.name(),
            "scenario_sha256": scenario_hash(&raw, seed),
            "seed": seed,
            "files": files,
            "status": status,
            "wall_time_s": start.elapsed().as_secs_f64(),
        }),
    )?;
    result.map(Verdict::code)
}

fn dispatch(cmd: Command, s: &Scenario, seed: u64, out: &mut Outputs) -> Result<Verdict> {
    match cmd {
        Command::CheckAxioms => cmd_check_axioms(s, out),
        Command::Theta => cmd_theta(s, out),
        Command::Simulate => cmd_simulate(s, seed, out),
        Command::Sweep => cmd_sweep(s, seed, out),
        Command::Cascade => cmd_cascade(s, out),
        Command::Entropy => cmd_entropy(s, seed, out),
        Command::Phase => cmd_phase(s, out),
    }
}

fn cmd_check_axioms(s: &Scenario, out: &mut Outputs) -> Result<Verdict> {
    let u = s.universe()?;
    let axioms = s.axioms.clone().unwrap_or_default();
    let mut all_hold = true;

    let functors: Vec<_> = u.functors().map(|f| u.validate_functor(f)).collect();
    all_hold &= functors.iter().all(|r| r.is_valid());

    let mut transformations = Vec::new();
    for t in u.transformations() {
        let squares = u.check_transformation(t)?;
        let holds = squares.iter().all(|(_, r)| r.holds);
        all_hold &= holds;
        transformations.push(json!({
            "name": t.name,
            "holds": holds,
            "squares": squares.iter().map(|(m, r)| json!({"morphism": m, "holds": r.holds, "violations": r.violations})).collect::<Vec<_>>(),
        }));
    }

    let mut squares = Vec::new();
    for c in &axioms.squares {
        let functor = u.functor(&c.functor)?;
        let trans = u.transformation(&c.transformation)?;
        let morphisms: Vec<String> = match &c.morphisms {
            Some(m) => m.clone(),
            None => u
                .morphisms()
                .filter(|f| {
                    trans.components.contains_key(f.src().id()) && trans.components.contains_key(f.dst().id())
                })
                .map(|f| f.id().to_string())
                .collect(),
        };
        for m in morphisms {
            let f = u.morphism(&m)?;
            let report = match c.kind {
                SquareKind::Observer => cat::check_observer_square(&u, functor, trans, f)?,
                SquareKind::Verification => cat::check_verification_square(&u, functor, trans, f)?,
            };
            all_hold &= report.holds;
            squares.push(json!({
                "kind": match c.kind { SquareKind::Observer => "observer", SquareKind::Verification => "verification" },
                "functor": c.functor,
                "transformation": c.transformation,
                "morphism": m,
                "holds": report.holds,
                "violations": report.violations,
            }));
        }
    }

    let mut equalizers = Vec::new();
    for e in &axioms.equalizers {
        let (obj, _) = cat::equalizer(u.morphism(&e.eta)?, u.morphism(&e.theta)?)?;
        let matches = e.expect.as_ref().map(|want| {
            let mut want = want.clone();
            want.sort();
            want == obj.elements()
        });
        all_hold &= matches.unwrap_or(true);
        equalizers.push(json!({
            "eta": e.eta, "theta": e.theta, "elements": obj.elements(), "matches_expected": matches,
        }));
    }

    let mut automorphisms = Vec::new();
    for id in &axioms.automorphisms {
        match cat::automorphism_order(u.morphism(id)?) {
            Ok(k) => automorphisms.push(json!({"morphism": id, "order": k})),
            Err(CategoryError::NotAutomorphism(_)) => {
                all_hold = false;
                automorphisms.push(json!({"morphism": id, "order": null, "error": "not an automorphism"}));
            }
            Err(e) => return Err(e.into()),
        }
    }

    out.json(
        "axioms.json",
        &json!({
            "all_hold": all_hold,
            "functors": functors,
            "transformations": transformations,
            "squares": squares,
            "equalizers": equalizers,
            "automorphisms": automorphisms,
        }),
    )?;
    Ok(Verdict::from_checks(all_hold))
}

fn cmd_theta(s: &Scenario, out: &mut Outputs) -> Result<Verdict> {
    let u = s.universe()?;
    let t = s.theta.as_ref().ok_or(CliError::MissingSection("theta"))?;
    let v = u.functor(&t.v)?;
    let phi = u.functor(&t.phi)?;
    let x0 = u.object(&t.start)?;
    let result = coalgebra::iterate_to_theta(&u, v, phi, x0, t.max_iter.unwrap_or(coalgebra::DEFAULT_MAX_ITER))?;
    let verification = if result.converged {
        Some(coalgebra::verify_theta(&u, v, phi, &result)?)
    } else {
        None
    };

    let rows: Vec<Vec<String>> = result
        .chain
        .iter()
        .map(|c| vec![c.stage.to_string(), c.carrier.len().to_string()])
        .collect();
    out.csv("chain.csv", &["stage".into(), "carrier_size".into()], &rows)?;
    out.json("theta.json", &json!({"result": result, "verification": verification}))?;

    Ok(match verification {
        None => Verdict::NoConvergence,
        Some(r) => Verdict::from_checks(r.holds),
    })
}

fn cmd_simulate(s: &Scenario, seed: u64, out: &mut Outputs) -> Result<Verdict> {
    let (phi, o, x0) = s.family()?;
    let r = s.r.unwrap_or(0.0);
    let sim = s.simulate.clone().unwrap_or_default();
    let alpha = s.entropy.as_ref().map_or(1.0, |e| e.params.alpha);
    let schedule = s.schedule.unwrap_or(1);

    let traj = dynamics::simulate(phi, o, r, &x0, sim.steps, seed)?;
    let opts = EnsembleOptions { ensemble: sim.ensemble, spread: sim.spread, bins: sim.bins, lo: sim.lo, hi: sim.hi };
    let states = dynamics::ensemble_ledger(phi, o, r, &x0, sim.steps, seed, &opts)?;
    let lyap = dynamics::lyapunov_trace(&traj, &states, alpha, schedule)?;

    let dim = x0.len();
    let mut header = vec!["n".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend((0..dim).map(|i| format!("o{i}")));
    header.push("L".into());
    let rows: Vec<Vec<String>> = traj
        .states
        .iter()
        .zip(&lyap.values)
        .enumerate()
        .map(|(n, (st, l))| {
            let mut row = vec![n.to_string()];
            row.extend(st.x.iter().chain(&st.o).map(|v| fmt_real(*v)));
            row.push(fmt_real(*l));
            row
        })
        .collect();
    out.csv("trajectory.csv", &header, &rows)?;

    let f = dynamics::perturbed_map(phi, o, r)?;
    let stability = match dynamics::find_fixed_point(&f, &x0, dynamics::DEFAULT_MAX_ITER, dynamics::DEFAULT_FIXED_TOL) {
        Ok(fp) => {
            let rep = dynamics::stability_report(&dynamics::jacobian(&f, &fp.x)?)?;
            json!({"fixed_point": fp.x, "residual": fp.residual, "spectral_radius": rep.spectral_radius, "stable": rep.stable})
        }
        Err(DynamicsError::NoConvergence { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    out.json(
        "lyapunov.json",
        &json!({
            "r": r,
            "alpha": alpha,
            "schedule": lyap.schedule,
            "monotone": lyap.monotone,
            "violations": lyap.violations,
            "stability": stability,
        }),
    )?;
    Ok(Verdict::Ok)
}

fn cmd_sweep(s: &Scenario, seed: u64, out: &mut Outputs) -> Result<Verdict> {
    let (phi, o, x0) = s.family()?;
    let grid = s.r_grid.ok_or(CliError::MissingSection("r_grid"))?;
    let opts = SweepOptions {
        transient: s.transient.unwrap_or(dynamics::DEFAULT_TRANSIENT),
        sample: s.sample.unwrap_or(dynamics::DEFAULT_SAMPLE),
        seed,
        jitter: s.jitter.unwrap_or(0.0),
        ..SweepOptions::default()
    };
    let diagram = dynamics::sweep_bifurcation(phi, o, &grid, &x0, &opts)?;
    let critical = dynamics::find_critical_r(phi, o, grid.lo, grid.hi, grid.steps, &x0)?;

    let header: Vec<String> = ["r", "class", "period", "points", "lead_eig_re", "lead_eig_im"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = diagram
        .rows
        .iter()
        .map(|row| {
            let points = row
                .points
                .iter()
                .map(|p| p.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>().join(":"))
                .collect::<Vec<_>>()
                .join(";");
            let (re, im) = row
                .lead_eig
                .map_or((String::new(), String::new()), |e| (fmt_real(e.re), fmt_real(e.im)));
            vec![
                fmt_real(row.r),
                row.class.label(),
                row.class.period().map_or(String::new(), |p| p.to_string()),
                points,
                re,
                im,
            ]
        })
        .collect();
    out.csv("diagram.csv", &header, &rows)?;
    out.json("critical.json", &critical)?;
    Ok(Verdict::Ok)
}

fn cmd_cascade(s: &Scenario, out: &mut Outputs) -> Result<Verdict> {
    let desc = s.cascade.as_ref().ok_or(CliError::MissingSection("cascade"))?;
    let spec = desc.build()?;
    let c = cascade::build_cascade(&spec);
    let basis = cascade::cascade_fixed_points(&c, desc.tol);
    let mut report = cascade::spectrum(&c)?;
    let hull = cascade::check_hull_claim(&report, &spec);
    report.hull_check = hull.as_ref().ok().map(|h| h.inside.clone());

    let rows: Vec<Vec<String>> = report
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let hull_ok = report
                .hull_check
                .as_ref()
                .map_or("undefined".to_string(), |h| h[i].to_string());
            vec![fmt_real(e.re), fmt_real(e.im), fmt_real(e.norm()), hull_ok]
        })
        .collect();
    out.csv("spectrum.csv", &["re", "im", "modulus", "hull_ok"].map(String::from), &rows)?;

    let mut commutation = Vec::new();
    for (i, a) in spec.stages().iter().enumerate() {
        for (j, b) in spec.stages().iter().enumerate().skip(i + 1) {
            let r = cascade::check_commuting(&a.theta, &b.theta, 1e-12)?;
            commutation.push(json!({"i": i, "j": j, "commute": r.commute, "norm": r.norm}));
        }
    }
    let hull_json = match &hull {
        Ok(h) => json!({"segment": [h.segment.0, h.segment.1], "claim_holds": h.claim_holds}),
        Err(e) => json!({"undefined": e.to_string()}),
    };
    let some_undamped = spec.stages().iter().any(|st| st.lambda == 1.0);
    out.json(
        "cascade.json",
        &json!({
            "dim": spec.dim(),
            "contraction": spec.contraction(),
            "operator": c,
            "fixed_point_basis": basis,
            "eigenvalues": report.eigenvalues.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>(),
            "residuals": report.residuals,
            "all_verified": report.all_verified(),
            "max_modulus": report.max_modulus,
            "hull": hull_json,
            "unit_modulus": {"some_lambda_is_one": some_undamped, "found": report.has_unit_modulus(1e-9)},
            "commutation": commutation,
        }),
    )?;
    Ok(Verdict::from_checks(report.all_verified()))
}

fn cmd_entropy(s: &Scenario, seed: u64, out: &mut Outputs) -> Result<Verdict> {
    let section = s.entropy.as_ref().ok_or(CliError::MissingSection("entropy"))?;
    let params = &section.params;
    let (h, h_o) = match &section.trace {
        Some(t) => (t.h.clone(), t.h_o.clone()),
        None => {
            let (phi, o, x0) = s.family()?;
            let sim = s.simulate.clone().unwrap_or_default();
            let opts = EnsembleOptions { ensemble: sim.ensemble, spread: sim.spread, bins: sim.bins, lo: sim.lo, hi: sim.hi };
            let states = dynamics::ensemble_ledger(phi, o, s.r.unwrap_or(0.0), &x0, sim.steps, seed, &opts)?;
            states.iter().map(|(p, q)| (shannon_entropy(p), shannon_entropy(q))).unzip()
        }
    };
    let trace = EntropyTrace::from_series(&h, &h_o, params)?;
    let step_violations = ledger::check_step_bound(&trace, params.c);

    let header: Vec<String> = ["n", "H", "H_O", "step_bound", "obs_bound", "total_bound", "violated_flags"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = trace
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_real(r.h),
                fmt_real(r.h_o),
                fmt_real(r.step_bound),
                fmt_real(r.obs_bound),
                fmt_real(r.total_bound),
                r.violated_flags(),
            ]
        })
        .collect();
    out.csv("entropy.csv", &header, &rows)?;

    let mut ok = trace.all_bounds_hold();
    let filtration = match &s.filtration {
        None => Value::Null,
        Some(fd) => {
            let u = s.universe()?;
            let v = u.functor(&fd.v)?;
            let x0 = u.object(&fd.start)?;
            match ledger::build_filtration(&u, v, x0, fd.steps) {
                Ok(f) => json!({"layer_sizes": f.layers.iter().map(|l| l.len()).collect::<Vec<_>>(), "omega": f.omega().elements()}),
                Err(e @ EntropyError::NotMonotone { .. }) => {
                    ok = false;
                    json!({"error": e.to_string()})
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    out.json(
        "entropy.json",
        &json!({
            "params": params,
            "all_bounds_hold": trace.all_bounds_hold(),
            "step_violations": step_violations,
            "filtration": filtration,
        }),
    )?;
    Ok(Verdict::from_checks(ok))
}

fn cmd_phase(s: &Scenario, out: &mut Outputs) -> Result<Verdict> {
    let section = s.phases.as_ref().ok_or(CliError::MissingSection("phases"))?;
    let u = s.universe()?;

    let mut pairings = Vec::new();
    for a in &section.assignments {
        let obj = u.object(&a.object)?;
        let pairs = phase::matched_pairs(obj, &a.phases)?;
        pairings.push(json!({"object": a.object, "pairs": pairs}));
    }

    let mut cycles = Vec::new();
    for c in &section.cycles {
        let steps = c
            .steps
            .iter()
            .map(|st| Ok(PhasedMorphism { base: u.morphism(&st.morphism)?.clone(), phase: st.phase }))
            .collect::<Result<Vec<_>>>()?;
        let net = phase::cycle_net_phase(&steps)?;
        cycles.push(json!({"name": c.name, "net_phase": net, "zero_net_phase": net.is_zero()}));
    }

    let mut locks = Vec::new();
    for l in &section.locks {
        let theta = u.morphism(&l.morphism)?;
        let period = match l.period {
            Some(p) => p,
            None => cat::automorphism_order(theta)?,
        };
        let space = phase::phase_lock_space(theta, period)?;
        locks.push(json!({"morphism": l.morphism, "period": period, "elements": space.elements()}));
    }

    out.json("phase.json", &json!({"pairings": pairings, "cycles": cycles, "locks": locks}))?;
    Ok(Verdict::Ok)
}
