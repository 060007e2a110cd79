//! Impulsive systems `ẋ = f(t, x, u)` between impulses and
//! `x(τ) = x(τ⁻) + g(τ, x(τ⁻), u(τ))` at impulse times, together with
//! sampling checks of the class-AL regularity conditions.
//!
//! The AL checks can refute membership but never prove it: a failing report
//! carries a concrete witness, a passing one only says no violation was seen
//! among the samples drawn.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::comparison::{ComparisonFn, FnClass, NondecreasingFn, DEFAULT_DOMAIN_HINT};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Scope};
use crate::inputs::euclidean_norm;

/// A map `(t, x, u) ↦ R^n` writing into `out`.
pub trait VectorField: Send + Sync {
    fn eval(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self(t, x, u, out)
    }
}

/// One expression per state component.
#[derive(Debug, Clone)]
pub struct ExprField(Vec<Expr>);

impl ExprField {
    pub fn compile(sources: &[String], dim_x: usize, dim_u: usize) -> Result<Self> {
        if sources.len() != dim_x {
            return Err(Error::InvalidSystem(format!(
                "{} expressions for a state of dimension {dim_x}",
                sources.len()
            )));
        }
        let scope = Scope::System { dim_x, dim_u };
        sources
            .iter()
            .map(|s| Expr::compile(s, scope))
            .collect::<Result<Vec<_>>>()
            .map(ExprField)
    }
}

impl VectorField for ExprField {
    fn eval(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        let b = Bindings::system(t, x, u);
        for (o, e) in out.iter_mut().zip(&self.0) {
            *o = e.eval(&b);
        }
    }
}

/// Growth envelope `|h(t, ξ, μ)| ≤ N_h(|ξ|) (1 + ν_h(|μ|))`.
#[derive(Debug, Clone)]
pub struct AlEnvelope {
    pub n_h: NondecreasingFn,
    pub nu_h: ComparisonFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Flow,
    Jump,
}

impl Which {
    pub fn name(self) -> &'static str {
        match self {
            Which::Flow => "flow",
            Which::Jump => "jump",
        }
    }
}

/// Flow and jump maps plus optional AL envelopes.
#[derive(Clone)]
pub struct ImpulsiveSystem {
    name: String,
    dim_x: usize,
    dim_u: usize,
    flow: Arc<dyn VectorField>,
    jump: Arc<dyn VectorField>,
    flow_envelope: Option<AlEnvelope>,
    jump_envelope: Option<AlEnvelope>,
}

impl fmt::Debug for ImpulsiveSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImpulsiveSystem")
            .field("name", &self.name)
            .field("dim_x", &self.dim_x)
            .field("dim_u", &self.dim_u)
            .finish()
    }
}

impl ImpulsiveSystem {
    pub fn new(
        name: impl Into<String>,
        dim_x: usize,
        dim_u: usize,
        flow: impl VectorField + 'static,
        jump: impl VectorField + 'static,
    ) -> Self {
        ImpulsiveSystem {
            name: name.into(),
            dim_x,
            dim_u,
            flow: Arc::new(flow),
            jump: Arc::new(jump),
            flow_envelope: None,
            jump_envelope: None,
        }
    }

    pub fn with_envelope(mut self, which: Which, envelope: AlEnvelope) -> Self {
        match which {
            Which::Flow => self.flow_envelope = Some(envelope),
            Which::Jump => self.jump_envelope = Some(envelope),
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    pub fn envelope(&self, which: Which) -> Option<&AlEnvelope> {
        match which {
            Which::Flow => self.flow_envelope.as_ref(),
            Which::Jump => self.jump_envelope.as_ref(),
        }
    }

    pub fn flow(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.flow.eval(t, x, u, out)
    }

    pub fn jump(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.jump.eval(t, x, u, out)
    }

    pub fn eval(&self, which: Which, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        match which {
            Which::Flow => self.flow(t, x, u, out),
            Which::Jump => self.jump(t, x, u, out),
        }
    }

    fn eval_vec(&self, which: Which, t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_x];
        self.eval(which, t, x, u, &mut out);
        out
    }
}

/// Envelope expressions in `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub n: String,
    pub nu: String,
}

impl EnvelopeConfig {
    pub fn build(&self) -> Result<AlEnvelope> {
        let n = Expr::compile(&self.n, Scope::Radial)?;
        let nu = Expr::compile(&self.nu, Scope::Radial)?;
        Ok(AlEnvelope {
            n_h: NondecreasingFn::new(self.n.clone(), move |r| n.eval(&Bindings::radial(r)))?,
            nu_h: ComparisonFn::new(self.nu.clone(), FnClass::K, DEFAULT_DOMAIN_HINT, move |r| {
                nu.eval(&Bindings::radial(r))
            })?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvelopesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<EnvelopeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<EnvelopeConfig>,
}

/// JSON form of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(default)]
    pub name: String,
    pub dim_x: usize,
    pub dim_u: usize,
    pub flow: Vec<String>,
    pub jump: Vec<String>,
    #[serde(default)]
    pub envelopes: EnvelopesConfig,
}

impl SystemConfig {
    pub fn build(&self) -> Result<ImpulsiveSystem> {
        if self.dim_x == 0 {
            return Err(Error::InvalidSystem("dim_x must be positive".into()));
        }
        let flow = ExprField::compile(&self.flow, self.dim_x, self.dim_u)?;
        let jump = ExprField::compile(&self.jump, self.dim_x, self.dim_u)?;
        let name = if self.name.is_empty() {
            "custom".to_string()
        } else {
            self.name.clone()
        };
        let mut sys = ImpulsiveSystem::new(name, self.dim_x, self.dim_u, flow, jump);
        if let Some(e) = &self.envelopes.flow {
            sys = sys.with_envelope(Which::Flow, e.build()?);
        }
        if let Some(e) = &self.envelopes.jump {
            sys = sys.with_envelope(Which::Jump, e.build()?);
        }
        Ok(sys)
    }

    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        crate::error::parse_json(text, source_name)
    }
}

/// Sampling ranges for the AL checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlRanges {
    pub t_max: f64,
    pub x_max: f64,
    pub u_max: f64,
}

impl Default for AlRanges {
    fn default() -> Self {
        AlRanges {
            t_max: 10.0,
            x_max: 10.0,
            u_max: 10.0,
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = euclidean_norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// A point whose norm is spread uniformly over `[0, radius]`; every eighth
/// draw sits on the boundary.
fn sample_radial(rng: &mut ChaCha8Rng, dim: usize, radius: f64, i: usize) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    let rho = if i % 8 == 7 {
        radius
    } else {
        radius * rng.gen::<f64>()
    };
    random_direction(rng, dim)
        .into_iter()
        .map(|c| c * rho)
        .collect()
}

/// Uniform in the ball of `radius` around `center`.
fn sample_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dim = center.len();
    let rho = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
    random_direction(rng, dim)
        .into_iter()
        .zip(center)
        .map(|(d, c)| c + d * rho)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlBoundReport {
    pub which: Which,
    /// `false` is conclusive; `true` means no violation among the samples.
    pub pass: bool,
    pub samples: usize,
    /// Smallest `rhs − lhs` seen.
    pub worst_margin: f64,
    pub worst: Option<AlPoint>,
    pub note: String,
}

const NON_MEMBERSHIP_NOTE: &str =
    "sampling check: a failure is a counterexample, a pass is evidence only";

/// Samples `(t, ξ, μ)` and checks `|h| ≤ N_h(|ξ|)(1 + ν_h(|μ|))`.
pub fn check_al_bound(
    system: &ImpulsiveSystem,
    which: Which,
    samples: usize,
    ranges: AlRanges,
    seed: u64,
) -> Result<AlBoundReport> {
    let env = system
        .envelope(which)
        .ok_or(Error::MissingEnvelope(which.name()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_margin = f64::INFINITY;
    let mut worst = None;
    for i in 0..samples {
        let t = if i % 8 == 3 {
            ranges.t_max
        } else {
            ranges.t_max * rng.gen::<f64>()
        };
        let x = sample_radial(&mut rng, system.dim_x(), ranges.x_max, i);
        let u = sample_radial(&mut rng, system.dim_u(), ranges.u_max, i / 8);
        let lhs = euclidean_norm(&system.eval_vec(which, t, &x, &u));
        let rhs = env.n_h.eval(euclidean_norm(&x)) * (1.0 + env.nu_h.eval(euclidean_norm(&u))?);
        let margin = if lhs.is_finite() { rhs - lhs } else { f64::NEG_INFINITY };
        if margin < worst_margin {
            worst_margin = margin;
            worst = Some(AlPoint { t, x, u, lhs, rhs });
        }
    }
    let pass = worst
        .as_ref()
        .is_none_or(|p| p.lhs <= p.rhs * (1.0 + 1e-12) + 1e-12);
    Ok(AlBoundReport {
        which,
        pass,
        samples,
        worst_margin,
        worst,
        note: NON_MEMBERSHIP_NOTE.into(),
    })
}

/// Search budget for the zero-input continuity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuitySearch {
    pub samples_per_delta: usize,
    pub delta0: f64,
    pub shrink: f64,
    pub max_steps: usize,
    pub t_max: f64,
}

impl Default for ContinuitySearch {
    fn default() -> Self {
        ContinuitySearch {
            samples_per_delta: 2000,
            delta0: 1.0,
            shrink: 0.5,
            max_steps: 40,
            t_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub which: Which,
    pub radius: f64,
    pub eps: f64,
    /// Largest δ tried for which every sample deviated by less than ε.
    pub delta: Option<f64>,
    /// The last violating sample seen while shrinking δ.
    pub last_violation: Option<AlPoint>,
    pub deltas_tried: Vec<f64>,
    pub note: String,
}

/// Shrinks δ geometrically until `|h(t,ξ,μ) − h(t,ξ,0)| < ε` for all samples
/// with `|ξ| ≤ r`, `|μ| ≤ δ`.
pub fn check_al_continuity_at_zero_input(
    system: &ImpulsiveSystem,
    which: Which,
    radius: f64,
    eps: f64,
    search: ContinuitySearch,
    seed: u64,
) -> ContinuityReport {
    let zero_u = vec![0.0; system.dim_u()];
    let mut delta = search.delta0;
    let mut tried = Vec::new();
    let mut last_violation = None;
    for _ in 0..search.max_steps {
        tried.push(delta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let violation = (0..search.samples_per_delta).find_map(|i| {
            let t = search.t_max * rng.gen::<f64>();
            let x = sample_radial(&mut rng, system.dim_x(), radius, i);
            let u = sample_radial(&mut rng, system.dim_u(), delta, i + 4);
            let a = system.eval_vec(which, t, &x, &u);
            let b = system.eval_vec(which, t, &x, &zero_u);
            let diff: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
            let dev = euclidean_norm(&diff);
            (!(dev < eps)).then_some(AlPoint {
                t,
                x,
                u,
                lhs: dev,
                rhs: eps,
            })
        });
        match violation {
            None => {
                return ContinuityReport {
                    which,
                    radius,
                    eps,
                    delta: Some(delta),
                    last_violation,
                    deltas_tried: tried,
                    note: NON_MEMBERSHIP_NOTE.into(),
                }
            }
            Some(v) => last_violation = Some(v),
        }
        delta *= search.shrink;
    }
    ContinuityReport {
        which,
        radius,
        eps,
        delta: None,
        last_violation,
        deltas_tried: tried,
        note: NON_MEMBERSHIP_NOTE.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub which: Which,
    /// Largest observed difference quotient.
    pub estimate: f64,
    pub pairs: usize,
    pub witness: Option<(f64, Vec<f64>, Vec<f64>)>,
}

/// Max of `|h(t,ξ1,0) − h(t,ξ2,0)| / |ξ1 − ξ2|` over sampled pairs in the ball.
pub fn check_local_lipschitz_zero_input(
    system: &ImpulsiveSystem,
    which: Which,
    center: &[f64],
    radius: f64,
    samples: usize,
    t_max: f64,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if center.len() != system.dim_x() {
        return Err(Error::InvalidSystem(format!(
            "center has dimension {} (expected {})",
            center.len(),
            system.dim_x()
        )));
    }
    let zero_u = vec![0.0; system.dim_u()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimate = 0.0;
    let mut witness = None;
    for _ in 0..samples {
        let t = t_max * rng.gen::<f64>();
        let a = sample_ball(&mut rng, center, radius);
        let b = sample_ball(&mut rng, center, radius);
        let dx: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
        let dist = euclidean_norm(&dx);
        if dist < 1e-12 {
            continue;
        }
        let ha = system.eval_vec(which, t, &a, &zero_u);
        let hb = system.eval_vec(which, t, &b, &zero_u);
        let dh: Vec<f64> = ha.iter().zip(&hb).map(|(p, q)| p - q).collect();
        let q = euclidean_norm(&dh) / dist;
        if q > estimate || !q.is_finite() {
            estimate = q;
            witness = Some((t, a, b));
        }
    }
    Ok(LipschitzEstimate {
        which,
        estimate,
        pairs: samples,
        witness,
    })
}
