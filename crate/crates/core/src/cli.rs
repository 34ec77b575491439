//! Run configuration, suite orchestration and report emission for the `qaux`
//! binary. Reports are deterministic for a fixed config and seed: the text
//! tree and CSV tables carry no timing, and every float is printed with 17
//! significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bethe::{bae_residual, bethe_state, eig_t, solve_bae, BetheRootSet, SeedStrategy};
use crate::error::{Error, Result};
use crate::linalg::{c, eigen_estimate, eigenvalues, ONE};
use crate::loopsym::{classify_limit_roots_multi, drinfeld_poly, multiplet_decompose, nested_paths, DrinfeldData, MultipletReport, RootTrajectory};
use crate::operators::{q_mu, q_trunc, spin_sector_project, transfer_t};
use crate::params::{Branched, ModelParams};
use crate::relations::{self as rel, CheckOptions, ConjectureFamily, RelationReport};
use crate::repkit::LFamily;
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;
pub const PRECISION: &str = "IEEE-754 binary64; complex numbers as (re, im) pairs";

/// A complex number in one of the accepted spellings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    RootOfUnity { root_of_unity: RootSpec },
    Phase { phase_over_pi: f64 },
    Cartesian { re: f64, im: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSpec {
    #[serde(rename = "N")]
    pub n: u32,
    pub k: i64,
}

impl ValueSpec {
    pub fn value(&self) -> C64 {
        match *self {
            ValueSpec::RootOfUnity { root_of_unity: r } => C64::from_polar(1.0, std::f64::consts::TAU * r.k as f64 / r.n as f64),
            ValueSpec::Phase { phase_over_pi } => C64::from_polar(1.0, std::f64::consts::PI * phase_over_pi),
            ValueSpec::Cartesian { re, im } => C64::new(re, im),
        }
    }

    pub fn real(x: f64) -> Self {
        ValueSpec::Cartesian { re: x, im: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaSpec {
    List(Vec<ValueSpec>),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub q: ValueSpec,
    #[serde(default = "one_spec")]
    pub lambda: ValueSpec,
    #[serde(default = "homogeneous")]
    pub zeta: ZetaSpec,
}

fn one_spec() -> ValueSpec {
    ValueSpec::real(1.0)
}

fn homogeneous() -> ZetaSpec {
    ZetaSpec::Named("homogeneous".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub json: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: None, csv: true, json: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub model: ModelConfig,
    #[serde(default = "all")]
    pub suite: String,
    /// Relation ids for the verify suite; "all" selects every applicable one.
    #[serde(default = "all_list")]
    pub relations: Vec<String>,
    #[serde(default = "unit")]
    pub tolerance_scale: f64,
    #[serde(default = "window")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
    /// Magnon numbers for the bethe and rootlimit suites; default 0..=min(2, M/2).
    #[serde(default)]
    pub n_b: Option<Vec<usize>>,
    /// Spectral parameter at which spectra are tabulated.
    #[serde(default = "probe")]
    pub probe_z: ValueSpec,
    #[serde(default = "mu_default")]
    pub mu: ValueSpec,
    #[serde(default = "r0_default")]
    pub r0: ValueSpec,
    #[serde(default = "r1_default")]
    pub r1: ValueSpec,
    /// Number of random spectral points per relation.
    #[serde(default = "samples")]
    pub samples: usize,
    /// Mis-sets S^z in the Q-fusion coefficients; that check is then expected to fail.
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default)]
    pub outputs: Outputs,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}
fn all() -> String {
    "all".into()
}
fn all_list() -> Vec<String> {
    vec!["all".into()]
}
fn unit() -> f64 {
    1.0
}
fn window() -> usize {
    crate::operators::DEFAULT_WINDOW
}
fn probe() -> ValueSpec {
    ValueSpec::Cartesian { re: 0.61, im: 0.33 }
}
fn mu_default() -> ValueSpec {
    ValueSpec::Cartesian { re: 1.3, im: 0.4 }
}
fn r0_default() -> ValueSpec {
    ValueSpec::Cartesian { re: 1.2, im: 0.3 }
}
fn r1_default() -> ValueSpec {
    ValueSpec::Cartesian { re: 0.7, im: 0.2 }
}
fn samples() -> usize {
    3
}

impl RunConfig {
    /// N = 3, M = 4, λ = 1, homogeneous.
    pub fn default_model() -> Self {
        let model = ModelConfig {
            m: 4,
            q: ValueSpec::RootOfUnity { root_of_unity: RootSpec { n: 3, k: 1 } },
            lambda: one_spec(),
            zeta: homogeneous(),
        };
        serde_json::from_value(serde_json::json!({ "model": model })).expect("default config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema {} is not supported (expected {SCHEMA_VERSION})", self.schema)));
        }
        if !(self.tolerance_scale > 0.0 && self.tolerance_scale.is_finite()) {
            return Err(Error::Config("tolerance_scale must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be positive".into()));
        }
        Suite::parse(&self.suite)?;
        for id in &self.relations {
            if id != "all" && !RELATION_IDS.contains(&id.as_str()) {
                return Err(Error::Config(format!("unknown relation id '{id}'")));
            }
        }
        self.params().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        let lambda = self.model.lambda.value();
        let p = match self.model.q {
            ValueSpec::RootOfUnity { root_of_unity: r } => ModelParams::root_of_unity(self.model.m, r.n, r.k, lambda)?,
            ValueSpec::Phase { phase_over_pi } => ModelParams::generic_phase(self.model.m, phase_over_pi, lambda)?,
            ValueSpec::Cartesian { re, im } => ModelParams::generic(self.model.m, C64::new(re, im), lambda)?,
        };
        match &self.model.zeta {
            ZetaSpec::Named(s) if s == "homogeneous" => Ok(p),
            ZetaSpec::Named(s) => Err(Error::Config(format!("zeta must be a list or \"homogeneous\", got \"{s}\""))),
            ZetaSpec::List(v) => p.with_zeta(v.iter().map(ValueSpec::value).collect()),
        }
    }

    fn options(&self) -> CheckOptions {
        CheckOptions { tolerance_scale: self.tolerance_scale, window: self.window, ..CheckOptions::default() }
    }

    fn n_b_list(&self, m: usize) -> Vec<usize> {
        self.n_b.clone().unwrap_or_else(|| (0..=(m / 2).min(2)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Spectrum,
    Bethe,
    Verify,
    RootLimit,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "spectrum" => Suite::Spectrum,
            "bethe" => Suite::Bethe,
            "verify" => Suite::Verify,
            "rootlimit" => Suite::RootLimit,
            "all" => Suite::All,
            other => return Err(Error::Config(format!("unknown suite '{other}' (spectrum, bethe, verify, rootlimit, all)"))),
        })
    }
}

pub const RELATION_IDS: [&str; 15] = [
    "commutation",
    "tq_root",
    "tq_generic",
    "wronskian",
    "qfusion",
    "fusion_recursion",
    "truncation",
    "tnq",
    "spin_reversal",
    "yba_q",
    "qdecomp",
    "conjecture",
    "string_collapse",
    "window_convergence",
    "cancellation",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub operator: String,
    pub z: C64,
    pub two_sz: i64,
    pub eigenvalues: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheRow {
    pub n_b: usize,
    pub index: usize,
    pub two_sz: i64,
    pub roots: Vec<C64>,
    #[serde(with = "crate::serial::ext_f64")]
    pub bae_residual: f64,
    /// |⟨ψ|T(z)|ψ⟩ − Λ(z)| / |Λ(z)| at the probe point.
    #[serde(with = "crate::serial::ext_f64")]
    pub eigenvalue_residual: f64,
    /// ‖T(z)ψ − ⟨T⟩ψ‖ / ‖ψ‖.
    #[serde(with = "crate::serial::ext_f64")]
    pub eigenvector_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckEntry {
    pub id: String,
    pub expected_pass: bool,
    pub report: Option<RelationReport>,
    pub error: Option<String>,
}

impl CheckEntry {
    pub fn as_expected(&self) -> bool {
        self.report.as_ref().map_or(false, |r| r.pass == self.expected_pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DrinfeldEntry {
    pub n_b: usize,
    pub roots: Vec<C64>,
    pub data: DrinfeldData,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub n_b: usize,
    pub trajectory: RootTrajectory,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub sections: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub version: String,
    pub precision: String,
    pub commands: Vec<String>,
    pub config: RunConfig,
    pub checks: Vec<CheckEntry>,
    pub skipped: Vec<Skipped>,
    pub spectra: Vec<SpectrumTable>,
    pub bethe: Vec<BetheRow>,
    pub drinfeld: Vec<DrinfeldEntry>,
    pub trajectories: Vec<TrajectoryEntry>,
    pub multiplets: Vec<MultipletReport>,
    /// Wall-clock seconds per section; excluded from the canonical text and CSV output.
    pub timing: Timing,
}

impl Report {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            precision: PRECISION.to_string(),
            commands: Vec::new(),
            config: cfg.clone(),
            checks: Vec::new(),
            skipped: Vec::new(),
            spectra: Vec::new(),
            bethe: Vec::new(),
            drinfeld: Vec::new(),
            trajectories: Vec::new(),
            multiplets: Vec::new(),
            timing: Timing::default(),
        }
    }

    /// True when every check came out as expected and no check errored.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(CheckEntry::as_expected)
            && self.drinfeld.iter().all(|d| d.data.ok)
            && self.trajectories.iter().all(|t| t.trajectory.lost_at.is_none())
    }

    fn absorb(&mut self, other: Report) {
        self.commands.extend(other.commands);
        self.checks.extend(other.checks);
        self.skipped.extend(other.skipped);
        self.spectra.extend(other.spectra);
        self.bethe.extend(other.bethe);
        self.drinfeld.extend(other.drinfeld);
        self.trajectories.extend(other.trajectories);
        self.multiplets.extend(other.multiplets);
        self.timing.sections.extend(other.timing.sections);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Canonical, diffable text tree. Timing is left out.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "report");
        let _ = writeln!(o, "  schema: {}", self.schema);
        let _ = writeln!(o, "  version: {}", self.version);
        let _ = writeln!(o, "  precision: {}", self.precision);
        let _ = writeln!(o, "  commands: {}", self.commands.join(", "));
        // The output directory is where the report goes, not what it says.
        let mut echo = self.config.clone();
        echo.outputs.dir = None;
        let _ = writeln!(o, "  config: {}", serde_json::to_string(&echo).unwrap_or_default());
        let _ = writeln!(o, "  status: {}", if self.all_pass() { "pass" } else { "fail" });
        if !self.checks.is_empty() {
            let _ = writeln!(o, "  checks");
            for e in &self.checks {
                let status = match (&e.report, e.as_expected()) {
                    (None, _) => "error",
                    (Some(_), true) => "ok",
                    (Some(_), false) => "unexpected",
                };
                let _ = writeln!(o, "    {} [{status}] expected_pass={}", e.id, e.expected_pass);
                if let Some(err) = &e.error {
                    let _ = writeln!(o, "      error: {err}");
                }
                if let Some(r) = &e.report {
                    let _ = writeln!(o, "      pass: {}", r.pass);
                    let _ = writeln!(o, "      operator_residual: {} (tol {})", opt_num(r.operator_residual), num(r.operator_tolerance));
                    let _ = writeln!(o, "      eigenvalue_residual: {} (tol {})", opt_num(r.eigenvalue_residual), num(r.eigenvalue_tolerance));
                    let _ = writeln!(o, "      params: M={} q={} lambda={} zeta=[{}]", r.params.m, cnum(r.params.q), cnum(r.params.lambda), join(&r.params.zeta));
                    for (k, v) in &r.params.extra {
                        let _ = writeln!(o, "      param {k}: {}", cnum(*v));
                    }
                    let _ = writeln!(o, "      samples: [{}]", join(&r.samples));
                    for n in &r.notes {
                        let _ = writeln!(o, "      note: {n}");
                    }
                }
            }
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(o, "  skipped");
            for s in &self.skipped {
                let _ = writeln!(o, "    {}: {}", s.id, s.reason);
            }
        }
        if !self.spectra.is_empty() {
            let _ = writeln!(o, "  spectra");
            for t in &self.spectra {
                let _ = writeln!(o, "    {} z={} 2Sz={} ({} values)", t.operator, cnum(t.z), t.two_sz, t.eigenvalues.len());
                for v in &t.eigenvalues {
                    let _ = writeln!(o, "      {}", cnum(*v));
                }
            }
        }
        if !self.bethe.is_empty() {
            let _ = writeln!(o, "  bethe");
            for b in &self.bethe {
                let _ = writeln!(
                    o,
                    "    nB={} #{} 2Sz={} bae={} eig={} vec={}",
                    b.n_b,
                    b.index,
                    b.two_sz,
                    num(b.bae_residual),
                    num(b.eigenvalue_residual),
                    num(b.eigenvector_residual)
                );
                let _ = writeln!(o, "      roots: [{}]", join(&b.roots));
            }
        }
        if !self.drinfeld.is_empty() {
            let _ = writeln!(o, "  drinfeld");
            for d in &self.drinfeld {
                let x = &d.data;
                let _ = writeln!(o, "    nB={} roots=[{}] ok={}", d.n_b, join(&d.roots), x.ok);
                let _ = writeln!(o, "      P_S (in z^N'): [{}]", join(&x.ps_coeffs));
                let _ = writeln!(o, "      a: [{}]", join(&x.a_roots));
                let _ = writeln!(o, "      n_S={} n0={} n_inf={} n_bar_inf={} 2s={}", x.n_s, x.n0, x.n_inf, x.n_bar_inf, x.two_s);
                let _ = writeln!(
                    o,
                    "      residue={} off_lattice={} consistency={} shift={}",
                    num(x.residue),
                    num(x.off_lattice),
                    num(x.consistency),
                    num(x.shift_residual)
                );
            }
        }
        if !self.trajectories.is_empty() {
            let _ = writeln!(o, "  trajectories");
            for t in &self.trajectories {
                let x = &t.trajectory;
                let _ = writeln!(o, "    nB={} fates={:?} n0={} n_inf={} 2s={} lost_at={:?}", t.n_b, x.classification, x.n0, x.n_inf, x.two_s, x.lost_at);
                let last: Vec<C64> = x.root_tracks.iter().filter_map(|r| r.last().copied()).collect();
                let _ = writeln!(o, "      final roots: [{}]", join(&last));
            }
        }
        if !self.multiplets.is_empty() {
            let _ = writeln!(o, "  multiplets");
            for m in &self.multiplets {
                let spins: Vec<String> = m.members.iter().map(|b| format!("{}x{}", b.two_sz, b.multiplicity)).collect();
                let _ = writeln!(o, "    class {} dim={} eig={} members=[{}] flag={:?}", m.class_id, m.dimension, cnum(m.eigenvalue), spins.join(" "), m.flag);
            }
        }
        o
    }

    /// Writes report.txt, report.json (when enabled), the CSV tables and
    /// timing.csv into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        if self.config.outputs.json {
            std::fs::write(dir.join("report.json"), self.to_json()?)?;
        }
        if self.config.outputs.csv {
            self.write_csv(dir)?;
        }
        let mut w = csv::Writer::from_path(dir.join("timing.csv"))?;
        w.write_record(["section", "seconds"])?;
        for (s, t) in &self.timing.sections {
            w.write_record([s.as_str(), &format!("{t:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_csv(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join("checks.csv"))?;
        w.write_record(["id", "expected_pass", "pass", "operator_residual", "operator_tolerance", "eigenvalue_residual", "eigenvalue_tolerance", "error"])?;
        for e in &self.checks {
            let (pass, orr, ot, er, et) = match &e.report {
                Some(r) => (r.pass.to_string(), opt_num(r.operator_residual), num(r.operator_tolerance), opt_num(r.eigenvalue_residual), num(r.eigenvalue_tolerance)),
                None => ("false".into(), String::new(), String::new(), String::new(), String::new()),
            };
            w.write_record([e.id.clone(), e.expected_pass.to_string(), pass, orr, ot, er, et, e.error.clone().unwrap_or_default()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("spectra.csv"))?;
        w.write_record(["operator", "z_re", "z_im", "two_sz", "index", "re", "im"])?;
        for t in &self.spectra {
            for (i, v) in t.eigenvalues.iter().enumerate() {
                w.write_record([t.operator.clone(), num(t.z.re), num(t.z.im), t.two_sz.to_string(), i.to_string(), num(v.re), num(v.im)])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("bethe.csv"))?;
        w.write_record(["n_b", "index", "two_sz", "root", "re", "im", "bae_residual", "eigenvalue_residual", "eigenvector_residual"])?;
        for b in &self.bethe {
            for (j, r) in b.roots.iter().enumerate() {
                w.write_record([
                    b.n_b.to_string(),
                    b.index.to_string(),
                    b.two_sz.to_string(),
                    j.to_string(),
                    num(r.re),
                    num(r.im),
                    num(b.bae_residual),
                    num(b.eigenvalue_residual),
                    num(b.eigenvector_residual),
                ])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("drinfeld.csv"))?;
        w.write_record(["n_b", "entry", "power_of_z_nprime", "re", "im", "residue", "off_lattice", "ok"])?;
        for (i, d) in self.drinfeld.iter().enumerate() {
            for (k, v) in d.data.ps_coeffs.iter().enumerate() {
                w.write_record([d.n_b.to_string(), i.to_string(), k.to_string(), num(v.re), num(v.im), num(d.data.residue), num(d.data.off_lattice), d.data.ok.to_string()])?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("trajectories.csv"))?;
        w.write_record(["n_b", "entry", "root", "sample", "q_re", "q_im", "re", "im", "fate"])?;
        for (i, t) in self.trajectories.iter().enumerate() {
            let x = &t.trajectory;
            for (r, track) in x.root_tracks.iter().enumerate() {
                for (j, z) in track.iter().enumerate() {
                    let qs = x.q_samples[j];
                    w.write_record([
                        t.n_b.to_string(),
                        i.to_string(),
                        r.to_string(),
                        j.to_string(),
                        num(qs.re),
                        num(qs.im),
                        num(z.re),
                        num(z.im),
                        format!("{:?}", x.classification[r]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "-".into())
}

fn cnum(z: C64) -> String {
    format!("({}, {})", num(z.re), num(z.im))
}

fn join(v: &[C64]) -> String {
    v.iter().map(|z| cnum(*z)).collect::<Vec<_>>().join(", ")
}

fn sort_spectrum(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn timed<T>(rep: &mut Report, name: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    rep.timing.sections.push((name.to_string(), t0.elapsed().as_secs_f64()));
    out
}

/// Per-sector spectra of T(z), a Q family and T^(2)(z) at the probe point.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let z = cfg.probe_z.value();
    let mut rep = Report::new(cfg);
    rep.commands.push("spectrum".into());
    let tables = timed(&mut rep, "spectrum", || -> Result<Vec<SpectrumTable>> {
        let mut ops: Vec<(String, crate::CMatrix)> = vec![("T".into(), transfer_t(&p, z)?.mat)];
        if p.root.is_some() {
            ops.push(("Q_mu".into(), q_mu(&p, Branched::principal(cfg.mu.value()), z)?.mat));
        } else if let Ok(q) = q_trunc(&p, Branched::principal(cfg.r0.value()), cfg.r1.value(), z, cfg.window) {
            ops.push(("Q_le".into(), q.mat));
        }
        ops.push(("T2".into(), rel::fusion_any(&p, 2, z)?));
        let mut out = Vec::new();
        for (name, mat) in &ops {
            for two_sz in (-(p.m as i64)..=p.m as i64).rev().step_by(2) {
                let block = spin_sector_project(mat, p.m, two_sz)?;
                let mut ev = eigenvalues(&block)?;
                sort_spectrum(&mut ev);
                out.push(SpectrumTable { operator: name.clone(), z, two_sz, eigenvalues: ev });
            }
        }
        Ok(out)
    })?;
    rep.spectra = tables;
    Ok(rep)
}

/// Bethe roots for each requested magnon number, with state and eigenvalue residuals.
pub fn cmd_bethe(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let z = cfg.probe_z.value();
    let mut rep = Report::new(cfg);
    rep.commands.push("bethe".into());
    let rows = timed(&mut rep, "bethe", || -> Result<Vec<BetheRow>> {
        let t = transfer_t(&p, z)?.mat;
        let mut rows = Vec::new();
        for nb in cfg.n_b_list(p.m) {
            if 2 * nb > p.m {
                continue;
            }
            let sets = if nb == 0 {
                vec![BetheRootSet::vacuum(&p)]
            } else {
                solve_bae(&p, nb, &SeedStrategy { count: 60, seed: cfg.seed, ..Default::default() })?.sets
            };
            for (i, rs) in sets.iter().enumerate() {
                let bae = bae_residual(rs, &p)?.iter().map(|x| x.norm()).fold(0.0, f64::max);
                let (ev_res, vec_res) = match bethe_state(rs, &p) {
                    Ok(st) => {
                        let (ev, r) = eigen_estimate(&t, &st.vector);
                        let lam = eig_t(rs, &p, z);
                        ((ev - lam).norm() / lam.norm().max(1e-300), r)
                    }
                    Err(_) => (f64::NAN, f64::NAN),
                };
                rows.push(BetheRow { n_b: nb, index: i, two_sz: rs.two_sz, roots: rs.roots.clone(), bae_residual: bae, eigenvalue_residual: ev_res, eigenvector_residual: vec_res });
            }
        }
        Ok(rows)
    })?;
    rep.bethe = rows;
    Ok(rep)
}

/// Why a relation cannot run on these parameters, if it cannot.
fn inapplicable(id: &str, p: &ModelParams) -> Option<&'static str> {
    let np = p.n_prime().ok();
    match (id, np) {
        ("tq_root" | "truncation" | "tnq" | "yba_q" | "string_collapse", None) => Some("needs q at a root of unity"),
        ("tq_generic" | "wronskian" | "qfusion" | "qdecomp" | "window_convergence" | "spin_reversal", Some(_)) => Some("needs generic q"),
        ("fusion_recursion", Some(n)) if n < 3 => Some("no fusion level above 1 exists below N′"),
        ("spin_reversal", None) if p.m > rel::MAX_M_GENERIC => Some("operator-level only, needs M <= 4"),
        _ => None,
    }
}

/// Runs the selected relation checks on the configured model. Relations that
/// need the other kind of q are listed as skipped.
pub fn cmd_verify(cfg: &RunConfig, ids: &[String]) -> Result<Report> {
    for id in ids {
        if id != "all" && !RELATION_IDS.contains(&id.as_str()) {
            return Err(Error::Config(format!("unknown relation id '{id}'")));
        }
    }
    let p = cfg.params()?;
    let mut rep = Report::new(cfg);
    rep.commands.push("verify".into());
    let selected: Vec<&str> = if ids.iter().any(|s| s == "all") {
        RELATION_IDS.to_vec()
    } else {
        RELATION_IDS.iter().copied().filter(|r| ids.iter().any(|s| s == r)).collect()
    };
    let mut run = Vec::new();
    for id in selected {
        match inapplicable(id, &p) {
            Some(reason) => rep.skipped.push(Skipped { id: id.into(), reason: reason.into() }),
            None => run.push(id),
        }
    }
    let states = timed(&mut rep, "verify:bethe", || verify_states(&p, cfg))?;
    let t0 = Instant::now();
    let entries: Vec<(CheckEntry, f64)> = run
        .par_iter()
        .map(|id| {
            let t = Instant::now();
            let result = run_relation(id, &p, cfg, &states);
            let expected_pass = !(cfg.negative_control && *id == "qfusion");
            let entry = match result {
                Ok(r) => CheckEntry { id: id.to_string(), expected_pass, report: Some(r), error: None },
                Err(e) => CheckEntry { id: id.to_string(), expected_pass, report: None, error: Some(e.to_string()) },
            };
            (entry, t.elapsed().as_secs_f64())
        })
        .collect();
    for (e, t) in entries {
        rep.timing.sections.push((format!("verify:{}", e.id), t));
        rep.checks.push(e);
    }
    rep.timing.sections.push(("verify".into(), t0.elapsed().as_secs_f64()));
    Ok(rep)
}

fn verify_states(p: &ModelParams, cfg: &RunConfig) -> Result<Vec<BetheRootSet>> {
    let mut states = vec![BetheRootSet::vacuum(p)];
    for nb in 1..=(p.m / 2).min(2) {
        let seeds = SeedStrategy { count: 40, seed: cfg.seed, target: Some(2), ..Default::default() };
        states.extend(solve_bae(p, nb, &seeds)?.sets);
    }
    Ok(states)
}

fn run_relation(id: &str, p: &ModelParams, cfg: &RunConfig, states: &[BetheRootSet]) -> Result<RelationReport> {
    let mut opts = cfg.options();
    let avoid: Vec<C64> = states.iter().flat_map(|s| s.roots.iter().copied()).collect();
    // Each relation gets its own stream so adding one does not move the others.
    let salt = RELATION_IDS.iter().position(|r| *r == id).unwrap_or(0) as u64;
    let zs = rel::sample_points(p, cfg.samples.max(1), cfg.seed.wrapping_mul(1000).wrapping_add(salt), &avoid, 1e-3);
    let mu = Branched::principal(cfg.mu.value());
    let r0 = Branched::principal(cfg.r0.value());
    let r1 = cfg.r1.value();
    let each = |f: &dyn Fn(C64) -> Result<RelationReport>| -> Result<RelationReport> {
        let parts = zs.iter().map(|&z| f(z)).collect::<Result<Vec<_>>>()?;
        rel::merge_reports(parts).ok_or_else(|| Error::InvalidParameter("no sample points".into()))
    };
    match id {
        "commutation" => {
            let pairs: Vec<(C64, C64)> = zs.iter().zip(zs.iter().cycle().skip(1)).map(|(a, b)| (*a, *b * c(0.9, 0.2))).collect();
            if p.root.is_some() {
                rel::check_commutation_mu(p, &pairs, mu, &opts)
            } else {
                rel::check_commutation(p, &pairs, r0, r1, &opts)
            }
        }
        "tq_root" => each(&|z| rel::check_tq_root(p, mu, z, states, &opts)),
        "tq_generic" => each(&|z| rel::check_tq_generic(p, r0, r1, z, states, &opts)),
        "wronskian" => rel::check_wronskian(p, states, &zs, &opts),
        "qfusion" => {
            if cfg.negative_control {
                opts.s_label_shift = 2;
            }
            let parts = (1..=4).map(|n| rel::check_qfusion(p, states, n, &zs, &opts)).collect::<Result<Vec<_>>>()?;
            rel::merge_reports(parts).ok_or_else(|| Error::InvalidParameter("no fusion levels".into()))
        }
        "fusion_recursion" => {
            // At a root of unity the direct fusion exists only below level N′.
            let top = match p.n_prime() {
                Ok(np) => 5.min(np.saturating_sub(1)),
                Err(_) => 5,
            };
            let parts = (2..=top).map(|n| rel::check_fusion_recursion(p, n, zs[0], states, &opts)).collect::<Result<Vec<_>>>()?;
            rel::merge_reports(parts).ok_or_else(|| Error::InvalidParameter("no fusion levels".into()))
        }
        "truncation" => each(&|z| rel::check_truncation(p, z, None, None, states, &opts)),
        "tnq" => rel::check_tnq(p, zs[0], &opts),
        "spin_reversal" => each(&|z| rel::check_spin_reversal(p, r0, r1, z, &[], &[], &opts)),
        "yba_q" => {
            let fam = LFamily::root_of_unity(mu, p)?;
            each(&|z| rel::check_yba_q(p, &fam, z * c(0.8, -0.3), z, &opts))
        }
        "qdecomp" => each(&|z| rel::check_qdecomp(p, r0, r1, z, &opts)),
        "conjecture" => {
            let fam = if p.root.is_some() { ConjectureFamily::Mu(mu) } else { ConjectureFamily::Window { r0, r1, k: cfg.window.max(50) } };
            let excited: Vec<BetheRootSet> = states.iter().filter(|s| s.n_b() > 0).cloned().collect();
            each(&|z| rel::check_conjecture(p, fam, z, &excited, &opts))
        }
        "string_collapse" => each(&|z| rel::check_string_collapse(p, z, &opts)),
        "window_convergence" => {
            let bad = p.with_lambda(C64::new(1.2, 0.0));
            rel::check_window_convergence(p, r0, r1, zs[0], (cfg.window, cfg.window + 10), Some(&bad), &opts)
        }
        "cancellation" => {
            let fam = if p.root.is_some() { LFamily::root_of_unity(mu, p)? } else { LFamily::generic(r0, r1, ONE, cfg.window, p.q)? };
            let pairs: Vec<(C64, C64)> = zs.iter().map(|&z| (z, z * c(-0.37, 1.21))).collect();
            rel::check_cancellation(p, &fam, c(0.5, 0.3), &pairs, &opts)
        }
        other => Err(Error::Config(format!("unknown relation id '{other}'"))),
    }
}

/// Root trajectories towards the root of unity, Drinfeld data of the solved
/// highest-weight states and the multiplet census.
pub fn cmd_rootlimit(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    p.n_prime().map_err(|_| Error::Config("rootlimit needs q at a root of unity".into()))?;
    let mut rep = Report::new(cfg);
    rep.commands.push("rootlimit".into());
    // Each starting point finds a different subset of solutions.
    let paths = nested_paths(p.q, 1e-9, 0.7, 55, 4, 2);
    let nbs = cfg.n_b_list(p.m);
    let trajectories = timed(&mut rep, "rootlimit:tracks", || -> Result<Vec<TrajectoryEntry>> {
        let mut out = Vec::new();
        for &nb in &nbs {
            if 2 * nb > p.m {
                continue;
            }
            let seeds = SeedStrategy { count: 200, seed: cfg.seed, ..Default::default() };
            for t in classify_limit_roots_multi(&p, nb, &paths, &seeds)? {
                out.push(TrajectoryEntry { n_b: nb, trajectory: t });
            }
        }
        Ok(out)
    })?;
    rep.trajectories = trajectories;
    let claimed = crate::loopsym::claimed_sectors(&p)?;
    let drinfeld = timed(&mut rep, "rootlimit:drinfeld", || -> Result<Vec<DrinfeldEntry>> {
        let mut out = Vec::new();
        for &nb in &nbs {
            if 2 * nb > p.m {
                continue;
            }
            let sets = if nb == 0 {
                vec![BetheRootSet::vacuum(&p)]
            } else {
                solve_bae(&p, nb, &SeedStrategy { count: 60, seed: cfg.seed, ..Default::default() })?.sets
            };
            for rs in sets.into_iter().filter(|s| claimed.contains(&s.two_sz)) {
                if let Ok(data) = drinfeld_poly(&rs, &p) {
                    out.push(DrinfeldEntry { n_b: nb, roots: rs.roots.clone(), data });
                }
            }
        }
        Ok(out)
    })?;
    rep.drinfeld = drinfeld;
    if p.m <= 8 {
        let z = cfg.probe_z.value();
        rep.multiplets = timed(&mut rep, "rootlimit:multiplets", || multiplet_decompose(&p, z))?;
    }
    Ok(rep)
}

/// Runs the configured suite.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let suite = Suite::parse(&cfg.suite)?;
    let mut rep = Report::new(cfg);
    let p = cfg.params()?;
    if matches!(suite, Suite::Spectrum | Suite::All) {
        rep.absorb(cmd_spectrum(cfg)?);
    }
    if matches!(suite, Suite::Bethe | Suite::All) {
        rep.absorb(cmd_bethe(cfg)?);
    }
    if matches!(suite, Suite::Verify | Suite::All) {
        rep.absorb(cmd_verify(cfg, &cfg.relations)?);
    }
    if suite == Suite::RootLimit || (suite == Suite::All && p.root.is_some()) {
        rep.absorb(cmd_rootlimit(cfg)?);
    }
    Ok(rep)
}
