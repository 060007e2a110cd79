//! Certificates for 0-GUAS, UBEBS and iISS (strong and weak), checkers that
//! evaluate them on sampled trajectories, the constructive iISS ⇒ GUAS/UBEBS
//! derivations and the weak-to-strong lift.

mod eps_delta;
mod falsify;

pub use eps_delta::{
    check_eps_delta_conditions, estimate_tre, estimate_tre_grid, majorize_kinf, BoundEntry,
    ConvergenceEntry, DeltaEntry, EpsDeltaConfig, EpsDeltaReport, TreEstimate, TreGrid,
};
pub use falsify::{falsify, replay, sampled_check, FalsifyRanges, Trial, TrialGenerator, TrialKind};

use serde::{Deserialize, Serialize};

use crate::comparison::{
    lift_weak_beta, make_beta_tilde, make_psi_ubebs, ComparisonFn, ComparisonSpec, KlFn, KlSpec,
    NondecreasingFn,
};
use crate::error::{Error, Result};
use crate::inputs::{euclidean_norm, EnergyProfile, HybridInput, InputSignal};
use crate::simulate::{EvalPoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Strong,
    Weak,
}

impl Mode {
    /// Decay argument: `t − t0 + n` (strong) or `t − t0` (weak).
    pub fn time(self, elapsed: f64, jumps: usize) -> f64 {
        match self {
            Mode::Strong => elapsed + jumps as f64,
            Mode::Weak => elapsed,
        }
    }
}

/// `|x(t)| ≤ β(|x0|, ·)` under zero input.
#[derive(Debug, Clone)]
pub struct GuasCertificate {
    pub beta: KlFn,
    pub mode: Mode,
}

/// `α(|x(t)|) ≤ |x0| + ‖w_(t0,t]‖_(ρ1,ρ2) + c`.
#[derive(Debug, Clone)]
pub struct UbebsCertificate {
    pub alpha: ComparisonFn,
    pub rho1: ComparisonFn,
    pub rho2: ComparisonFn,
    pub c: f64,
}

/// `α(|x(t)|) ≤ β(|x0|, ·) + ‖w_(t0,t]‖_(ρ1,ρ2)`.
#[derive(Debug, Clone)]
pub struct IissCertificate {
    pub alpha: ComparisonFn,
    pub beta: KlFn,
    pub rho1: ComparisonFn,
    pub rho2: ComparisonFn,
    pub mode: Mode,
}

impl GuasCertificate {
    pub fn new(beta: KlFn, mode: Mode) -> Self {
        GuasCertificate { beta, mode }
    }
}

impl UbebsCertificate {
    pub fn new(alpha: ComparisonFn, rho1: ComparisonFn, rho2: ComparisonFn, c: f64) -> Result<Self> {
        for f in [&alpha, &rho1, &rho2] {
            f.require_kinf()?;
        }
        if !(c >= 0.0) {
            return Err(Error::Invalid(format!("UBEBS constant must be >= 0 (got {c})")));
        }
        Ok(UbebsCertificate { alpha, rho1, rho2, c })
    }
}

impl IissCertificate {
    pub fn new(
        alpha: ComparisonFn,
        beta: KlFn,
        rho1: ComparisonFn,
        rho2: ComparisonFn,
        mode: Mode,
    ) -> Result<Self> {
        for f in [&alpha, &rho1, &rho2] {
            f.require_kinf()?;
        }
        Ok(IissCertificate { alpha, beta, rho1, rho2, mode })
    }
}

#[derive(Debug, Clone)]
pub enum Certificate {
    Guas(GuasCertificate),
    Ubebs(UbebsCertificate),
    Iiss(IissCertificate),
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::Guas(_) => "guas",
            Certificate::Ubebs(_) => "ubebs",
            Certificate::Iiss(_) => "iiss",
        }
    }

    /// GUAS certificates are only checked under zero input.
    pub fn needs_zero_input(&self) -> bool {
        matches!(self, Certificate::Guas(_))
    }
}

/// JSON form of a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CertificateSpec {
    Guas {
        beta: KlSpec,
        #[serde(default)]
        mode: Mode,
    },
    Ubebs {
        alpha: ComparisonSpec,
        rho1: ComparisonSpec,
        rho2: ComparisonSpec,
        #[serde(default)]
        c: f64,
    },
    Iiss {
        alpha: ComparisonSpec,
        beta: KlSpec,
        rho1: ComparisonSpec,
        rho2: ComparisonSpec,
        #[serde(default)]
        mode: Mode,
    },
}

impl CertificateSpec {
    pub fn build(&self) -> Result<Certificate> {
        Ok(match self {
            CertificateSpec::Guas { beta, mode } => {
                Certificate::Guas(GuasCertificate::new(beta.build()?, *mode))
            }
            CertificateSpec::Ubebs { alpha, rho1, rho2, c } => Certificate::Ubebs(
                UbebsCertificate::new(alpha.build_kinf()?, rho1.build_kinf()?, rho2.build_kinf()?, *c)?,
            ),
            CertificateSpec::Iiss { alpha, beta, rho1, rho2, mode } => {
                Certificate::Iiss(IissCertificate::new(
                    alpha.build_kinf()?,
                    beta.build()?,
                    rho1.build_kinf()?,
                    rho2.build_kinf()?,
                    *mode,
                )?)
            }
        })
    }

    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        crate::error::parse_json(text, source_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Violated,
    Inconclusive,
}

/// Everything needed to re-simulate a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub input: InputSignal,
    /// Impulse times up to `horizon`.
    pub sigma: Vec<f64>,
    pub horizon: f64,
    pub step: Option<f64>,
    pub t: f64,
    /// The violation is at the left limit `x(t⁻)`.
    pub left_limit: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub seed: Option<u64>,
    pub trial: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    /// `min(rhs − lhs)` over the checked samples.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub trials: usize,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn empty(verdict: Verdict) -> Self {
        CheckReport {
            verdict,
            worst_margin: f64::INFINITY,
            witness: None,
            trials: 0,
            samples: 0,
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Added to the relative tolerance, e.g. a measured simulator error bound.
    #[serde(default)]
    pub extra_tol: f64,
}

/// `1e-9 (1 + |rhs|)` plus any extra allowance.
pub fn tolerance(rhs: f64, opts: &CheckOptions) -> f64 {
    1e-9 * (1.0 + rhs.abs()) + opts.extra_tol
}

fn consistency(traj: &Trajectory, w: &HybridInput) -> Result<()> {
    let end = traj.time(traj.len() - 1);
    let expected: Vec<f64> = w
        .sigma
        .materialize(end)?
        .into_iter()
        .filter(|&t| t > traj.t0())
        .collect();
    let got: Vec<f64> = traj.jumps().iter().map(|j| j.t).collect();
    if expected != got {
        return Err(Error::InconsistentInput(format!(
            "trajectory jumps at {got:?} but σ has {expected:?} in ({}, {end}]",
            traj.t0()
        )));
    }
    Ok(())
}

/// Both sides of a certificate inequality at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidePoint {
    pub t: f64,
    pub left_limit: bool,
    pub jumps: usize,
    /// `|x|` at this point.
    pub norm: f64,
    pub lhs: f64,
    pub rhs: f64,
}

fn series<F>(traj: &Trajectory, mut sides: F) -> Result<Vec<SidePoint>>
where
    F: FnMut(&EvalPoint<'_>) -> Result<(f64, f64)>,
{
    traj.eval_points()
        .iter()
        .map(|p| {
            let (lhs, rhs) = sides(p)?;
            Ok(SidePoint {
                t: p.t,
                left_limit: p.left_limit,
                jumps: p.jumps,
                norm: euclidean_norm(p.x),
                lhs,
                rhs,
            })
        })
        .collect()
}

fn guas_series(cert: &GuasCertificate, traj: &Trajectory, w: &HybridInput) -> Result<Vec<SidePoint>> {
    let end = traj.time(traj.len() - 1);
    let norm = w.u.sup_norm(traj.t0(), end);
    if norm > 0.0 {
        return Err(Error::NonZeroInput { t: traj.t0(), norm });
    }
    let r = euclidean_norm(traj.x0());
    let t0 = traj.t0();
    series(traj, |p| {
        let rhs = cert.beta.eval(r, cert.mode.time(p.t - t0, p.jumps))?;
        Ok((euclidean_norm(p.x), rhs))
    })
}

fn ubebs_series(cert: &UbebsCertificate, traj: &Trajectory, w: &HybridInput) -> Result<Vec<SidePoint>> {
    let r = euclidean_norm(traj.x0());
    let energy = EnergyProfile::new(w, &cert.rho1, &cert.rho2, traj.t0(), traj.horizon())?;
    series(traj, |p| {
        let e = if p.left_limit { energy.before(p.t) } else { energy.upto(p.t) };
        Ok((cert.alpha.eval(euclidean_norm(p.x))?, r + e + cert.c))
    })
}

fn iiss_series(cert: &IissCertificate, traj: &Trajectory, w: &HybridInput) -> Result<Vec<SidePoint>> {
    let r = euclidean_norm(traj.x0());
    let t0 = traj.t0();
    let energy = EnergyProfile::new(w, &cert.rho1, &cert.rho2, t0, traj.horizon())?;
    series(traj, |p| {
        let e = if p.left_limit { energy.before(p.t) } else { energy.upto(p.t) };
        let b = cert.beta.eval(r, cert.mode.time(p.t - t0, p.jumps))?;
        Ok((cert.alpha.eval(euclidean_norm(p.x))?, b + e))
    })
}

/// Left and right sides of the certificate inequality at every sample and
/// left limit, e.g. for plotting `|x(t)|` against its bound.
pub fn inequality_series(cert: &Certificate, traj: &Trajectory, w: &HybridInput) -> Result<Vec<SidePoint>> {
    consistency(traj, w)?;
    match cert {
        Certificate::Guas(c) => guas_series(c, traj, w),
        Certificate::Ubebs(c) => ubebs_series(c, traj, w),
        Certificate::Iiss(c) => iiss_series(c, traj, w),
    }
}

fn judge(traj: &Trajectory, w: &HybridInput, opts: &CheckOptions, points: Vec<SidePoint>) -> Result<CheckReport> {
    let mut report = CheckReport::empty(Verdict::Pass);
    report.trials = 1;
    report.samples = points.len();
    let mut worst: Option<&SidePoint> = None;
    for p in &points {
        let margin = p.rhs - p.lhs;
        report.worst_margin = report.worst_margin.min(margin);
        if p.lhs > p.rhs + tolerance(p.rhs, opts) && worst.is_none_or(|q| margin < q.rhs - q.lhs) {
            worst = Some(p);
        }
    }
    if let Some(p) = worst {
        report.verdict = Verdict::Violated;
        report.witness = Some(Witness {
            t0: traj.t0(),
            x0: traj.x0().to_vec(),
            input: w.u.clone(),
            sigma: w.sigma.materialize(traj.horizon())?,
            horizon: traj.horizon(),
            step: None,
            t: p.t,
            left_limit: p.left_limit,
            lhs: p.lhs,
            rhs: p.rhs,
            seed: None,
            trial: None,
        });
    }
    Ok(report)
}

/// Checks `|x(t)| ≤ β(|x0|, t − t0 [+ n])` at every sample and left limit.
pub fn check_guas(
    cert: &GuasCertificate,
    traj: &Trajectory,
    w: &HybridInput,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    consistency(traj, w)?;
    judge(traj, w, opts, guas_series(cert, traj, w)?)
}

/// Checks `α(|x(t)|) ≤ |x0| + ‖w_(t0,t]‖ + c`.
pub fn check_ubebs(
    cert: &UbebsCertificate,
    traj: &Trajectory,
    w: &HybridInput,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    consistency(traj, w)?;
    judge(traj, w, opts, ubebs_series(cert, traj, w)?)
}

/// Checks `α(|x(t)|) ≤ β(|x0|, t − t0 [+ n]) + ‖w_(t0,t]‖`.
pub fn check_iiss(
    cert: &IissCertificate,
    traj: &Trajectory,
    w: &HybridInput,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    consistency(traj, w)?;
    judge(traj, w, opts, iiss_series(cert, traj, w)?)
}

/// Dispatches to the matching checker.
pub fn check(cert: &Certificate, traj: &Trajectory, w: &HybridInput, opts: &CheckOptions) -> Result<CheckReport> {
    match cert {
        Certificate::Guas(c) => check_guas(c, traj, w, opts),
        Certificate::Ubebs(c) => check_ubebs(c, traj, w, opts),
        Certificate::Iiss(c) => check_iiss(c, traj, w, opts),
    }
}

/// `β̃ = α⁻¹ ∘ β`, same mode.
pub fn derive_guas_from_iiss(cert: &IissCertificate) -> Result<GuasCertificate> {
    Ok(GuasCertificate::new(make_beta_tilde(&cert.alpha, &cert.beta)?, cert.mode))
}

/// `α = ψ` with `ψ(r) = min{β₀⁻¹(α(r)/2), α(r)/2}`, same gains, `c = 0`.
pub fn derive_ubebs_from_iiss(cert: &IissCertificate) -> Result<UbebsCertificate> {
    UbebsCertificate::new(
        make_psi_ubebs(&cert.alpha, &cert.beta)?,
        cert.rho1.clone(),
        cert.rho2.clone(),
        0.0,
    )
}

/// Turns a weak certificate valid over a family with counting envelope `φ`
/// into a strong one using `β̂`.
pub fn lift_guas(cert: &GuasCertificate, phi: &NondecreasingFn) -> Result<GuasCertificate> {
    if cert.mode != Mode::Weak {
        return Err(Error::Invalid("only weak certificates can be lifted".into()));
    }
    Ok(GuasCertificate::new(lift_weak_beta(&cert.beta, phi)?, Mode::Strong))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impulses::ImpulseSequence;
    use crate::simulate::{closed_form_linear_impulsive, simulate};
    use crate::system::SystemConfig;

    fn scalar(flow: &str, jump: &str) -> crate::system::ImpulsiveSystem {
        SystemConfig {
            name: String::new(),
            dim_x: 1,
            dim_u: 1,
            flow: vec![flow.into()],
            jump: vec![jump.into()],
            envelopes: Default::default(),
        }
        .build()
        .unwrap()
    }

    fn id() -> ComparisonFn {
        ComparisonFn::identity()
    }

    #[test]
    fn guas_equality_case_passes() {
        let s = scalar("-x1", "0");
        let w = HybridInput::zero(1, ImpulseSequence::empty());
        let tr = simulate(&s, 0.0, &[2.0], &w, 3.0, 1e-3).unwrap();
        let cert = GuasCertificate::new(KlFn::exp_decay(1.0, 1.0).unwrap(), Mode::Strong);
        let r = check_guas(&cert, &tr, &w, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.worst_margin.abs() < 1e-10);
    }

    #[test]
    fn guas_pure_jump_matches_per_sample_oracle() {
        let s = scalar("0", "-x1 / 2");
        let sigma = ImpulseSequence::periodic(1.0, 1.0).unwrap();
        let w = HybridInput::zero(1, sigma);
        let tr = simulate(&s, 0.0, &[1.0], &w, 5.0, 0.05).unwrap();
        let beta = KlFn::new("r 2^(-s/2)", 1e6, |r, s| r * 2f64.powf(-s / 2.0)).unwrap();
        let cert = GuasCertificate::new(beta, Mode::Strong);
        let r = check_guas(&cert, &tr, &w, &CheckOptions::default()).unwrap();
        // oracle: |x(t)| = 2^{-n}, strong time = t + n
        let mut any_violation = false;
        let mut worst = f64::INFINITY;
        for p in tr.eval_points() {
            let n = p.jumps as f64;
            let x = 2f64.powf(-n);
            let b = 2f64.powf(-(p.t + n) / 2.0);
            worst = worst.min(b - x);
            any_violation |= x > b + 1e-9 * (1.0 + b);
        }
        assert_eq!(r.verdict == Verdict::Violated, any_violation);
        assert!(any_violation);
        assert!((r.worst_margin - worst).abs() < 1e-12);
        let wit = r.witness.unwrap();
        assert!(wit.left_limit, "worst point should sit just before a jump");
    }

    #[test]
    fn zero_state_trivially_passes() {
        let s = scalar("-x1", "-x1 / 2");
        let w = HybridInput::zero(1, ImpulseSequence::periodic(0.5, 0.5).unwrap());
        let tr = simulate(&s, 0.0, &[0.0], &w, 3.0, 0.1).unwrap();
        let cert = GuasCertificate::new(KlFn::exp_decay(1.0, 1.0).unwrap(), Mode::Strong);
        assert!(check_guas(&cert, &tr, &w, &CheckOptions::default()).unwrap().passed());
        let ub = UbebsCertificate::new(id(), id(), id(), 0.0).unwrap();
        assert!(check_ubebs(&ub, &tr, &w, &CheckOptions::default()).unwrap().passed());
    }

    #[test]
    fn guas_rejects_nonzero_input() {
        let s = scalar("-x1 + u1", "0");
        let w = HybridInput::new(
            InputSignal::constant(vec![1.0], 0.0, 1.0).unwrap(),
            ImpulseSequence::empty(),
        );
        let tr = simulate(&s, 0.0, &[1.0], &w, 2.0, 0.1).unwrap();
        let cert = GuasCertificate::new(KlFn::exp_decay(1.0, 1.0).unwrap(), Mode::Strong);
        assert!(matches!(
            check_guas(&cert, &tr, &w, &CheckOptions::default()),
            Err(Error::NonZeroInput { .. })
        ));
    }

    #[test]
    fn mismatched_sigma_is_inconsistent() {
        let s = scalar("-x1", "-x1 / 2");
        let w = HybridInput::zero(1, ImpulseSequence::periodic(1.0, 1.0).unwrap());
        let tr = simulate(&s, 0.0, &[1.0], &w, 3.0, 0.1).unwrap();
        let other = HybridInput::zero(1, ImpulseSequence::periodic(0.5, 0.5).unwrap());
        let ub = UbebsCertificate::new(id(), id(), id(), 0.0).unwrap();
        assert!(matches!(
            check_ubebs(&ub, &tr, &other, &CheckOptions::default()),
            Err(Error::InconsistentInput(_))
        ));
    }

    #[test]
    fn ubebs_examples() {
        let s = scalar("-x1", "0");
        let w = HybridInput::zero(1, ImpulseSequence::empty());
        let tr = simulate(&s, 0.0, &[3.0], &w, 2.0, 0.01).unwrap();
        let ub = UbebsCertificate::new(id(), id(), id(), 0.0).unwrap();
        assert!(check_ubebs(&ub, &tr, &w, &CheckOptions::default()).unwrap().passed());

        // ẋ = −x + u, u ≡ 1 on (0, 1], α(r) = r/2: compare against the closed form
        let s = scalar("-x1 + u1", "0");
        let u = InputSignal::from_pieces(1, vec![0.0, 1.0], vec![vec![1.0], vec![0.0]]).unwrap();
        let w = HybridInput::new(u, ImpulseSequence::empty());
        let tr = simulate(&s, 0.0, &[0.5], &w, 3.0, 0.01).unwrap();
        let exact = closed_form_linear_impulsive(-1.0, 1.0, 0.0, 0.5, &w, 3.0, 0.01).unwrap();
        let half = ComparisonFn::linear(0.5).unwrap();
        let ub = UbebsCertificate::new(half, id(), id(), 0.0).unwrap();
        let r = check_ubebs(&ub, &tr, &w, &CheckOptions::default()).unwrap();
        let mut worst = f64::INFINITY;
        for i in 0..exact.len() {
            let t = exact.time(i);
            let energy = t.min(1.0);
            worst = worst.min(0.5 + energy - exact.state(i)[0].abs() / 2.0);
        }
        assert!(r.passed());
        assert!((r.worst_margin - worst).abs() < 1e-9);
    }

    #[test]
    fn iiss_at_initial_time_needs_alpha_below_beta() {
        let s = scalar("0", "0");
        let w = HybridInput::zero(1, ImpulseSequence::empty());
        let tr = simulate(&s, 0.0, &[1.0], &w, 1.0, 0.5).unwrap();
        let cert = IissCertificate::new(
            ComparisonFn::linear(2.0).unwrap(),
            KlFn::exp_decay(1.0, 1e-9).unwrap(),
            id(),
            id(),
            Mode::Strong,
        )
        .unwrap();
        let r = check_iiss(&cert, &tr, &w, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!((r.worst_margin + 1.0).abs() < 1e-8);
    }

    #[test]
    fn iiss_zero_input_matches_guas_through_alpha() {
        let s = scalar("-x1", "-x1 / 2");
        let w = HybridInput::zero(1, ImpulseSequence::periodic(1.0, 1.0).unwrap());
        let tr = simulate(&s, 0.0, &[2.0], &w, 5.0, 0.01).unwrap();
        let beta = KlFn::exp_decay(1.0, 2f64.ln()).unwrap();
        let iiss = IissCertificate::new(id(), beta.clone(), id(), id(), Mode::Strong).unwrap();
        let a = check_iiss(&iiss, &tr, &w, &CheckOptions::default()).unwrap();
        let g = check_guas(&GuasCertificate::new(beta, Mode::Strong), &tr, &w, &CheckOptions::default())
            .unwrap();
        assert_eq!(a.verdict, g.verdict);
        assert_eq!(a.worst_margin, g.worst_margin);
    }

    #[test]
    fn derivations() {
        let beta = KlFn::exp_decay(1.0, 1.0).unwrap();
        let iiss = IissCertificate::new(id(), beta.clone(), id(), id(), Mode::Weak).unwrap();
        let g = derive_guas_from_iiss(&iiss).unwrap();
        assert_eq!(g.mode, Mode::Weak);
        for (r, s) in [(0.5, 0.0), (2.0, 1.5), (10.0, 4.0)] {
            let (a, b) = (g.beta.eval(r, s).unwrap(), beta.eval(r, s).unwrap());
            assert!((a - b).abs() <= 1e-9 * b);
        }
        assert_eq!(g.beta.eval(0.0, 2.0).unwrap(), 0.0);
        let u = derive_ubebs_from_iiss(&iiss).unwrap();
        assert_eq!(u.c, 0.0);
        assert!((u.alpha.eval(4.0).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lift_requires_weak() {
        let cert = GuasCertificate::new(KlFn::exp_decay(1.0, 1.0).unwrap(), Mode::Strong);
        assert!(lift_guas(&cert, &NondecreasingFn::floor_plus_one()).is_err());
        let weak = GuasCertificate { mode: Mode::Weak, ..cert };
        let lifted = lift_guas(&weak, &NondecreasingFn::floor_plus_one()).unwrap();
        assert_eq!(lifted.mode, Mode::Strong);
    }

    #[test]
    fn spec_round_trip() {
        let text = r#"{"type": "iiss", "alpha": {"kind": "identity"},
            "beta": {"kind": "exp_decay", "lambda": 0.5}, "rho1": {"kind": "identity"},
            "rho2": {"kind": "linear", "k": 2}, "mode": "weak"}"#;
        let spec = CertificateSpec::from_json(text, "cert.json").unwrap();
        match spec.build().unwrap() {
            Certificate::Iiss(c) => assert_eq!(c.mode, Mode::Weak),
            other => panic!("{}", other.kind()),
        }
        let bad = CertificateSpec::from_json("{\"type\": \"ubebs\",\n \"alpha\" 3}", "c.json");
        assert!(matches!(bad, Err(Error::Config { line: 2, .. })), "{bad:?}");
        let sat = r#"{"type": "ubebs", "alpha": {"kind": "saturating"}, "rho1": {"kind": "identity"}, "rho2": {"kind": "identity"}}"#;
        assert!(CertificateSpec::from_json(sat, "s").unwrap().build().is_err());
    }
}
