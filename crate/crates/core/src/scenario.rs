//! JSON scenarios: a system, an impulse family, certificates and a list of
//! checks, run end to end with report, trajectory and plot-data outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certificates::{
    check, derive_guas_from_iiss, derive_ubebs_from_iiss, falsify, inequality_series, lift_guas,
    replay, Certificate, CertificateSpec, CheckOptions, CheckReport, EpsDeltaConfig, FalsifyRanges,
    GuasCertificate, Verdict, Witness,
};
use crate::comparison::{ComparisonSpec, PhiSpec};
use crate::error::{parse_json, Error, Result};
use crate::examples::example;
use crate::impulses::{uib_check, FamilySpec, ImpulseFamily, ImpulseSequence};
use crate::inputs::{HybridInput, InputPreset};
use crate::simulate::{simulate, Trajectory};
use crate::system::{check_al_bound, AlRanges, ImpulsiveSystem, SystemConfig, Which};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemRef {
    /// A built-in example by name.
    Example(String),
    Inline(SystemConfig),
    /// A system JSON file, relative to the scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeriveTarget {
    Guas,
    Ubebs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    /// One trajectory from the scenario's `t0`, `x0` and input, checked
    /// against a certificate.
    Check { certificate: String },
    /// Randomized search for a violation.
    Falsify {
        certificate: String,
        #[serde(default)]
        budget: Option<usize>,
    },
    /// Derive a certificate from an iISS one and falsify it.
    Derive {
        from: String,
        target: DeriveTarget,
        #[serde(default)]
        budget: Option<usize>,
    },
    /// Lift a weak GUAS certificate with the envelope `phi` and falsify the
    /// strong result.
    Lift {
        certificate: String,
        phi: PhiSpec,
        #[serde(default)]
        budget: Option<usize>,
    },
    /// Counting-envelope check of the family.
    Uib {
        phi: PhiSpec,
        #[serde(default = "default_uib_samples")]
        samples: usize,
        #[serde(default = "default_uib_horizon")]
        horizon: f64,
    },
    /// Growth-bound sampling check of the flow or jump map.
    Envelope {
        which: Which,
        #[serde(default = "default_envelope_samples")]
        samples: usize,
        #[serde(default)]
        ranges: Option<AlRanges>,
    },
    EpsDelta {
        rho1: ComparisonSpec,
        rho2: ComparisonSpec,
        #[serde(default)]
        config: Box<EpsDeltaConfig>,
        #[serde(default)]
        budget: Option<usize>,
    },
}

fn default_uib_samples() -> usize {
    20
}

fn default_uib_horizon() -> f64 {
    50.0
}

fn default_envelope_samples() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedCheck {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: CheckSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemRef,
    #[serde(default = "default_family")]
    pub family: FamilySpec,
    #[serde(default = "default_input")]
    pub input: InputPreset,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub certificates: BTreeMap<String, CertificateSpec>,
    #[serde(default)]
    pub ranges: FalsifyRanges,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub checks: Vec<NamedCheck>,
    /// Output directory, relative to the scenario file unless overridden.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_family() -> FamilySpec {
    FamilySpec::Empty
}

fn default_input() -> InputPreset {
    InputPreset::Zero
}

fn default_horizon() -> f64 {
    10.0
}

fn default_step() -> f64 {
    0.01
}

fn default_budget() -> usize {
    200
}

impl Scenario {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        parse_json(text, source_name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub report: Value,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub system: String,
    pub family: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub checks: Vec<CheckOutcome>,
}

/// 0 when everything passed, 2 on any violation, 3 otherwise.
pub fn exit_code(verdicts: impl IntoIterator<Item = Verdict>) -> i32 {
    let mut code = 0;
    for v in verdicts {
        match v {
            Verdict::Violated => return 2,
            Verdict::Inconclusive => code = 3,
            Verdict::Pass => {}
        }
    }
    code
}

fn overall(code: i32) -> Verdict {
    match code {
        0 => Verdict::Pass,
        2 => Verdict::Violated,
        _ => Verdict::Inconclusive,
    }
}

/// Writes through a temporary file and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn check_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct Context<'a> {
    scenario: &'a Scenario,
    system: ImpulsiveSystem,
    family: ImpulseFamily,
    certificates: BTreeMap<String, Certificate>,
    out_dir: &'a Path,
}

impl Context<'_> {
    fn certificate(&self, name: &str) -> Result<&Certificate> {
        self.certificates
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("scenario has no certificate named '{name}'")))
    }

    fn write_plot(&self, stem: &str, cert: &Certificate, traj: &Trajectory, w: &HybridInput) -> Result<Vec<String>> {
        let mut buf = Vec::new();
        traj.write_csv(&mut buf)?;
        let traj_name = format!("{stem}_trajectory.csv");
        write_atomic(&self.out_dir.join(&traj_name), &buf)?;

        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["t", "norm_x", "lhs", "bound", "left_limit"])?;
        for p in inequality_series(cert, traj, w)? {
            wtr.write_record([
                p.t.to_string(),
                p.norm.to_string(),
                p.lhs.to_string(),
                p.rhs.to_string(),
                (p.left_limit as u8).to_string(),
            ])?;
        }
        let plot_name = format!("{stem}_plot.csv");
        let bytes = wtr.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        write_atomic(&self.out_dir.join(&plot_name), &bytes)?;
        Ok(vec![traj_name, plot_name])
    }

    fn witness_artifacts(&self, stem: &str, cert: &Certificate, w: &Witness) -> Result<Vec<String>> {
        let step = w.step.unwrap_or(self.scenario.ranges.step);
        let sigma = if w.sigma.is_empty() {
            ImpulseSequence::empty()
        } else {
            ImpulseSequence::finite(w.sigma.clone())?
        };
        let input = HybridInput::new(w.input.clone(), sigma);
        let traj = simulate(&self.system, w.t0, &w.x0, &input, w.horizon, step)?;
        self.write_plot(stem, cert, &traj, &input)
    }

    fn falsify_with(&self, stem: &str, cert: &Certificate, budget: Option<usize>, seed: u64) -> Result<(Verdict, Value, Vec<String>)> {
        let opts = CheckOptions::default();
        let budget = budget.unwrap_or(self.scenario.budget);
        let report = falsify(cert, &self.system, &self.family, budget, &self.scenario.ranges, seed, &opts)?;
        let mut artifacts = Vec::new();
        if let Some(w) = &report.witness {
            let again = replay(w, cert, &self.system, &opts)?;
            if again.verdict != Verdict::Violated {
                return Err(Error::Invalid("witness did not replay".into()));
            }
            artifacts = self.witness_artifacts(stem, cert, w)?;
        }
        Ok((report.verdict, serde_json::to_value(&report)?, artifacts))
    }

    fn run(&self, index: usize, check_spec: &NamedCheck) -> Result<CheckOutcome> {
        let seed = check_seed(self.scenario.seed, index);
        let kind = serde_json::to_value(&check_spec.spec)?
            .get("kind")
            .and_then(Value::as_str)
            .unwrap_or("check")
            .to_string();
        let name = check_spec.name.clone().unwrap_or_else(|| format!("{index}_{kind}"));
        let (verdict, report, artifacts) = match &check_spec.spec {
            CheckSpec::Check { certificate } => {
                let cert = self.certificate(certificate)?;
                let x0 = self
                    .scenario
                    .x0
                    .clone()
                    .ok_or_else(|| Error::Invalid("check needs x0 in the scenario".into()))?;
                let u = if cert.needs_zero_input() {
                    InputPreset::Zero.build(self.system.dim_u())?
                } else {
                    self.scenario.input.build(self.system.dim_u())?
                };
                let sigma = self.family.sample(seed, self.scenario.horizon)?;
                let w = HybridInput::new(u, sigma);
                let traj = simulate(&self.system, self.scenario.t0, &x0, &w, self.scenario.horizon, self.scenario.step)?;
                let report: CheckReport = check(cert, &traj, &w, &CheckOptions::default())?;
                let artifacts = self.write_plot(&name, cert, &traj, &w)?;
                (report.verdict, serde_json::to_value(&report)?, artifacts)
            }
            CheckSpec::Falsify { certificate, budget } => {
                self.falsify_with(&name, self.certificate(certificate)?, *budget, seed)?
            }
            CheckSpec::Derive { from, target, budget } => {
                let Certificate::Iiss(iiss) = self.certificate(from)? else {
                    return Err(Error::Invalid(format!("certificate '{from}' is not an iISS certificate")));
                };
                let derived = match target {
                    DeriveTarget::Guas => Certificate::Guas(derive_guas_from_iiss(iiss)?),
                    DeriveTarget::Ubebs => Certificate::Ubebs(derive_ubebs_from_iiss(iiss)?),
                };
                self.falsify_with(&name, &derived, *budget, seed)?
            }
            CheckSpec::Lift { certificate, phi, budget } => {
                let Certificate::Guas(weak) = self.certificate(certificate)? else {
                    return Err(Error::Invalid(format!("certificate '{certificate}' is not a GUAS certificate")));
                };
                let lifted: GuasCertificate = lift_guas(weak, &phi.build()?)?;
                self.falsify_with(&name, &Certificate::Guas(lifted), *budget, seed)?
            }
            CheckSpec::Uib { phi, samples, horizon } => {
                let r = uib_check(&self.family, &phi.build()?, *samples, *horizon, seed)?;
                let v = if r.pass { Verdict::Pass } else { Verdict::Violated };
                (v, serde_json::to_value(&r)?, Vec::new())
            }
            CheckSpec::Envelope { which, samples, ranges } => {
                let r = check_al_bound(&self.system, *which, *samples, ranges.unwrap_or_default(), seed)?;
                let v = if r.pass { Verdict::Pass } else { Verdict::Violated };
                (v, serde_json::to_value(&r)?, Vec::new())
            }
            CheckSpec::EpsDelta { rho1, rho2, config, budget } => {
                let (r1, r2) = (rho1.build_kinf()?, rho2.build_kinf()?);
                let budget = budget.unwrap_or(self.scenario.budget);
                let r = crate::certificates::check_eps_delta_conditions(
                    &self.system,
                    (&r1, &r2),
                    &self.family,
                    config,
                    budget,
                    seed,
                )?;
                let code = exit_code([r.bounded.verdict, r.small.verdict, r.convergence.verdict]);
                (overall(code), serde_json::to_value(&r)?, Vec::new())
            }
        };
        Ok(CheckOutcome {
            name,
            kind,
            seed,
            verdict,
            report,
            artifacts,
        })
    }
}

fn resolve_system(scenario: &Scenario, base: &Path) -> Result<ImpulsiveSystem> {
    match &scenario.system {
        SystemRef::Example(name) => example(name)?.system(),
        SystemRef::Inline(cfg) => cfg.build(),
        SystemRef::File(p) => {
            let path = base.join(p);
            let text = fs::read_to_string(&path)?;
            SystemConfig::from_json(&text, &path.display().to_string())?.build()
        }
    }
}

/// Runs every check and writes `report.json` plus per-check CSVs into
/// `out_dir`. Relative file references resolve against `base_dir`.
pub fn run_scenario_in(scenario: &Scenario, base_dir: &Path, out_dir: &Path) -> Result<ScenarioReport> {
    let system = resolve_system(scenario, base_dir)?;
    let family = scenario.family.build()?;
    let certificates = scenario
        .certificates
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.build()?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    fs::create_dir_all(out_dir)?;
    let ctx = Context {
        scenario,
        system,
        family,
        certificates,
        out_dir,
    };
    let checks = scenario
        .checks
        .iter()
        .enumerate()
        .map(|(i, c)| ctx.run(i, c))
        .collect::<Result<Vec<_>>>()?;
    let code = exit_code(checks.iter().map(|c| c.verdict));
    let report = ScenarioReport {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        system: ctx.system.name().to_string(),
        family: ctx.family.description().to_string(),
        verdict: overall(code),
        exit_code: code,
        checks,
    };
    let text = serde_json::to_string_pretty(&report)?;
    write_atomic(&out_dir.join("report.json"), text.as_bytes())?;
    Ok(report)
}

/// Loads and runs a scenario file. The output directory is `out_dir` if
/// given, else the scenario's `output_dir` (relative to the file), else
/// `<file stem>_out` next to the file.
pub fn run_scenario(path: &Path, out_dir: Option<&Path>) -> Result<ScenarioReport> {
    let scenario = Scenario::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let out = match (out_dir, &scenario.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
            base.join(format!("{stem}_out"))
        }
    };
    run_scenario_in(&scenario, base, &out)
}
