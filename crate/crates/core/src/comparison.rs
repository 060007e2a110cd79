//! Class K, K∞ and KL comparison functions.
//!
//! Functions are evaluator closures paired with a `domain_hint`, the upper end
//! of the interval on which they are evaluated and inverted reliably. Class
//! membership is checked by sampling on a fixed geometric grid at
//! construction, and inverses are always numeric (bisection).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Scope};

/// Number of points in the class-membership validation grid.
pub const GRID_POINTS: usize = 64;
/// Smallest positive grid point.
pub const GRID_MIN: f64 = 1e-9;
pub const DEFAULT_DOMAIN_HINT: f64 = 1e6;

const INVERT_MAX_ITER: usize = 200;
const INVERT_REL_TOL: f64 = 1e-10;

type RadialEval = dyn Fn(f64) -> Result<f64> + Send + Sync;
type TwoArgEval = dyn Fn(f64, f64) -> Result<f64> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FnClass {
    K,
    #[default]
    #[serde(alias = "Kinf", alias = "kinf", alias = "K_inf")]
    KInf,
}

/// Geometric grid of `n` points on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// A class K or K∞ function.
#[derive(Clone)]
pub struct ComparisonFn {
    label: Arc<str>,
    class: FnClass,
    domain_hint: f64,
    eval: Arc<RadialEval>,
}

impl fmt::Debug for ComparisonFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComparisonFn")
            .field("label", &self.label)
            .field("class", &self.class)
            .field("domain_hint", &self.domain_hint)
            .finish()
    }
}

impl ComparisonFn {
    /// Builds and validates a comparison function from an infallible evaluator.
    pub fn new<F>(label: impl Into<String>, class: FnClass, domain_hint: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_fallible(label, class, domain_hint, move |r| Ok(f(r)))
    }

    pub fn from_fallible<F>(
        label: impl Into<String>,
        class: FnClass,
        domain_hint: f64,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        let this = ComparisonFn {
            label: label.into().into(),
            class,
            domain_hint,
            eval: Arc::new(f),
        };
        this.validate()?;
        Ok(this)
    }

    pub fn identity() -> Self {
        Self::linear(1.0).expect("identity is K∞")
    }

    pub fn linear(k: f64) -> Result<Self> {
        Self::new(format!("{k}*r"), FnClass::KInf, DEFAULT_DOMAIN_HINT, move |r| k * r)
    }

    pub fn power(k: f64, p: f64) -> Result<Self> {
        Self::new(format!("{k}*r^{p}"), FnClass::KInf, DEFAULT_DOMAIN_HINT, move |r| {
            k * r.powf(p)
        })
    }

    /// `r / (1 + r)`: class K but bounded.
    pub fn saturating() -> Self {
        Self::new("r/(1+r)", FnClass::K, DEFAULT_DOMAIN_HINT, |r| r / (1.0 + r))
            .expect("r/(1+r) is class K")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn class(&self) -> FnClass {
        self.class
    }

    pub fn domain_hint(&self) -> f64 {
        self.domain_hint
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        (self.eval)(r)
    }

    /// Errors unless the function was declared (and validated as) K∞.
    pub fn require_kinf(&self) -> Result<()> {
        match self.class {
            FnClass::KInf => Ok(()),
            FnClass::K => Err(Error::ClassViolation {
                label: self.label.to_string(),
                reason: "class K∞ is required here".into(),
            }),
        }
    }

    /// Checks the class invariants on the validation grid.
    pub fn validate(&self) -> Result<()> {
        let violation = |reason: String| Error::ClassViolation {
            label: self.label.to_string(),
            reason,
        };
        if !(self.domain_hint > GRID_MIN) || !self.domain_hint.is_finite() {
            return Err(violation(format!("bad domain hint {}", self.domain_hint)));
        }
        let zero = self.eval(0.0)?;
        if zero.abs() > 1e-12 {
            return Err(violation(format!("f(0) = {zero}")));
        }
        let grid = geometric_grid(GRID_MIN, self.domain_hint, GRID_POINTS);
        let values = grid
            .iter()
            .map(|&r| self.eval(r))
            .collect::<Result<Vec<_>>>()?;
        let mut prev = zero;
        for (r, v) in grid.iter().zip(&values) {
            if !v.is_finite() || *v <= prev {
                return Err(violation(format!("not strictly increasing at r = {r}")));
            }
            prev = *v;
        }
        if self.class == FnClass::KInf && !looks_unbounded(&grid, &values) {
            return Err(violation(
                "declared K∞ but appears bounded on the sampled grid".into(),
            ));
        }
        Ok(())
    }
}

/// Unboundedness heuristic: over the last two decades of the grid the
/// increments must not shrink geometrically, as they do for a bounded tail.
fn looks_unbounded(grid: &[f64], values: &[f64]) -> bool {
    let n = grid.len();
    let hi = grid[n - 1];
    if hi < 1e2 {
        return true;
    }
    let at = |r: f64| -> f64 {
        let i = grid.partition_point(|&g| g < r).min(n - 1);
        values[i]
    };
    let top = values[n - 1];
    let d1 = top - at(hi / 10.0);
    let d2 = at(hi / 10.0) - at(hi / 100.0);
    d2 > 0.0 && d1 / d2 >= 0.5
}

/// Numeric inverse of a comparison function by bisection on `[0, domain_hint]`.
///
/// Returns `r` with `|f(r) - y| <= 1e-10 * (1 + y)` whenever the function is
/// resolvable at that precision in double arithmetic.
pub fn invert(f: &ComparisonFn, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let hi_val = f.eval(f.domain_hint)?;
    if !(y >= 0.0) || y > hi_val * (1.0 + INVERT_REL_TOL) {
        return Err(Error::OutOfRange {
            label: f.label.to_string(),
            y,
            max: hi_val,
        });
    }
    if (hi_val - y).abs() <= INVERT_REL_TOL * y {
        return Ok(f.domain_hint);
    }
    let (mut lo, mut hi) = (0.0_f64, f.domain_hint);
    let (mut flo, mut fhi) = (f.eval(0.0)?, hi_val);
    for _ in 0..INVERT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f.eval(mid)?;
        if !fm.is_finite() || fm < flo || fm > fhi {
            return Err(Error::NotMonotone {
                label: f.label.to_string(),
                at: mid,
            });
        }
        if fm == y {
            return Ok(mid);
        }
        if fm < y {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `h = f ∘ g`; K∞ when both arguments are.
pub fn compose(f: &ComparisonFn, g: &ComparisonFn) -> Result<ComparisonFn> {
    let class = if f.class == FnClass::KInf && g.class == FnClass::KInf {
        FnClass::KInf
    } else {
        FnClass::K
    };
    // keep g's outputs inside f's reliable domain
    let domain = if g.eval(g.domain_hint)? > f.domain_hint {
        invert(g, f.domain_hint)?
    } else {
        g.domain_hint
    };
    let (fc, gc) = (f.clone(), g.clone());
    ComparisonFn::from_fallible(
        format!("({})∘({})", f.label, g.label),
        class,
        domain,
        move |r| fc.eval(gc.eval(r)?),
    )
}

/// A class KL function β(r, s).
#[derive(Clone)]
pub struct KlFn {
    label: Arc<str>,
    domain_hint: f64,
    eval: Arc<TwoArgEval>,
}

impl fmt::Debug for KlFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KlFn")
            .field("label", &self.label)
            .field("domain_hint", &self.domain_hint)
            .finish()
    }
}

/// `r` values at which KL decay in `s` is checked.
const KL_R_PROBES: [f64; 4] = [1e-3, 0.1, 1.0, 100.0];
/// `s` at which β(r, s) must have decayed below 1e-3 · β(r, 0).
const KL_DECAY_PROBE: f64 = 1e12;

impl KlFn {
    pub fn new<F>(label: impl Into<String>, domain_hint: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_fallible(label, domain_hint, move |r, s| Ok(f(r, s)))
    }

    pub fn from_fallible<F>(label: impl Into<String>, domain_hint: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Send + Sync + 'static,
    {
        let this = KlFn {
            label: label.into().into(),
            domain_hint,
            eval: Arc::new(f),
        };
        this.validate()?;
        Ok(this)
    }

    /// `k · r · e^{-λ s}`.
    pub fn exp_decay(k: f64, lambda: f64) -> Result<Self> {
        Self::new(
            format!("{k}*r*exp(-{lambda}*s)"),
            DEFAULT_DOMAIN_HINT,
            move |r, s| k * r * (-lambda * s).exp(),
        )
    }

    /// `k · r / (1 + s)^p`.
    pub fn rational_decay(k: f64, p: f64) -> Result<Self> {
        Self::new(
            format!("{k}*r/(1+s)^{p}"),
            DEFAULT_DOMAIN_HINT,
            move |r, s| k * r / (1.0 + s).powf(p),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_hint(&self) -> f64 {
        self.domain_hint
    }

    pub fn eval(&self, r: f64, s: f64) -> Result<f64> {
        (self.eval)(r, s)
    }

    /// The K∞ section `r ↦ β(r, s)` at fixed `s`.
    pub fn section(&self, s: f64) -> Result<ComparisonFn> {
        let beta = self.clone();
        ComparisonFn::from_fallible(
            format!("{}(·,{s})", self.label),
            FnClass::KInf,
            self.domain_hint,
            move |r| beta.eval(r, s),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let violation = |reason: String| Error::ClassViolation {
            label: self.label.to_string(),
            reason,
        };
        // r ↦ β(r, s) must be K∞ at s = 0, and class K at a positive s
        self.section(0.0)?;
        let s1 = self.clone();
        ComparisonFn::from_fallible("section", FnClass::K, self.domain_hint, move |r| {
            s1.eval(r, 1.0)
        })
        .map_err(|e| violation(format!("β(·, 1) is not class K: {e}")))?;

        let mut s_grid = vec![0.0];
        s_grid.extend(geometric_grid(1e-6, 1e6, GRID_POINTS));
        for &r in KL_R_PROBES.iter().filter(|&&r| r <= self.domain_hint) {
            let mut prev = f64::INFINITY;
            for &s in &s_grid {
                let v = self.eval(r, s)?;
                if !v.is_finite() || v < 0.0 || v > prev * (1.0 + 1e-9) {
                    return Err(violation(format!(
                        "β({r}, ·) is not nonincreasing near s = {s}"
                    )));
                }
                prev = v;
            }
            let start = self.eval(r, 0.0)?;
            let tail = self.eval(r, KL_DECAY_PROBE)?;
            if tail > 1e-3 * start {
                return Err(violation(format!(
                    "β({r}, s) does not decay to zero (β({r}, {KL_DECAY_PROBE:e}) = {tail})"
                )));
            }
        }
        Ok(())
    }
}

/// `β̃(r, s) = α⁻¹(β(r, s))`.
pub fn make_beta_tilde(alpha: &ComparisonFn, beta: &KlFn) -> Result<KlFn> {
    alpha.require_kinf()?;
    let beta0 = beta.section(0.0)?;
    let alpha_max = alpha.eval(alpha.domain_hint)?;
    let domain = if beta0.eval(beta0.domain_hint)? > alpha_max {
        invert(&beta0, alpha_max)?
    } else {
        beta.domain_hint
    };
    let (a, b) = (alpha.clone(), beta.clone());
    KlFn::from_fallible(
        format!("inv({})∘({})", alpha.label, beta.label),
        domain,
        move |r, s| invert(&a, b.eval(r, s)?),
    )
}

/// `ψ(r) = min{β₀⁻¹(α(r)/2), α(r)/2}` with `β₀ = β(·, 0)`.
pub fn make_psi_ubebs(alpha: &ComparisonFn, beta: &KlFn) -> Result<ComparisonFn> {
    alpha.require_kinf()?;
    let beta0 = beta.section(0.0)?;
    let beta0_max = beta0.eval(beta0.domain_hint)?;
    let domain = if alpha.eval(alpha.domain_hint)? / 2.0 > beta0_max {
        invert(alpha, 2.0 * beta0_max)?
    } else {
        alpha.domain_hint
    };
    let a = alpha.clone();
    ComparisonFn::from_fallible(
        format!("psi[{}, {}]", alpha.label, beta.label),
        FnClass::KInf,
        domain,
        move |r| {
            let half = a.eval(r)? / 2.0;
            Ok(invert(&beta0, half)?.min(half))
        },
    )
}

/// A nondecreasing map `[0, ∞) → [0, ∞)`, e.g. a jump-count envelope φ.
#[derive(Clone)]
pub struct NondecreasingFn {
    label: Arc<str>,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for NondecreasingFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("NondecreasingFn").field(&self.label).finish()
    }
}

const PHI_CHECK_SPAN: f64 = 1e4;
const PHI_CHECK_POINTS: usize = 4001;

impl NondecreasingFn {
    pub fn new<F>(label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let this = NondecreasingFn {
            label: label.into().into(),
            eval: Arc::new(f),
        };
        this.validate()?;
        Ok(this)
    }

    pub fn zero() -> Self {
        Self::new("0", |_| 0.0).expect("zero is nondecreasing")
    }

    /// `⌊s⌋ + 1`, the jump-count envelope of a period-1 lattice.
    pub fn floor_plus_one() -> Self {
        Self::new("floor(s)+1", |s| s.floor() + 1.0).expect("nondecreasing")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.eval)(s)
    }

    fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        // uniform grid plus the points just left of the integers, where
        // floor/ceil-type envelopes jump
        let uniform = (0..PHI_CHECK_POINTS)
            .map(|i| PHI_CHECK_SPAN * i as f64 / (PHI_CHECK_POINTS - 1) as f64);
        let mut samples: Vec<f64> = uniform.collect();
        samples.extend((1..=64).flat_map(|k| [k as f64 - 1e-9, k as f64]));
        samples.extend(geometric_grid(1e-9, 1.0, 32));
        samples.sort_by(f64::total_cmp);
        for s in samples {
            let v = self.eval(s);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidPhi(format!(
                    "`{}` is negative or non-finite at s = {s}",
                    self.label
                )));
            }
            if v < prev {
                return Err(Error::InvalidPhi(format!(
                    "`{}` decreases at s = {s}",
                    self.label
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `g(v) = inf{s ≥ 0 : s + φ(s) ≥ v}`, bisected to machine precision and
/// returning the left endpoint (so `g(v)` never exceeds the true infimum).
pub fn inverse_strong_time(phi: &NondecreasingFn, v: f64) -> f64 {
    let h = |s: f64| s + phi.eval(s);
    if v <= 0.0 || h(0.0) >= v {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, v);
    for _ in 0..INVERT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= v {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// `β̂(r, v) = β(r, g(v))`, which satisfies `β(r, s) ≤ β̂(r, s + φ(s))`.
pub fn lift_weak_beta(beta: &KlFn, phi: &NondecreasingFn) -> Result<KlFn> {
    let (b, p) = (beta.clone(), phi.clone());
    KlFn::from_fallible(
        format!("lift[{}, {}]", beta.label, phi.label),
        beta.domain_hint,
        move |r, v| b.eval(r, inverse_strong_time(&p, v)),
    )
}

/// Config form of a K / K∞ function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparisonSpec {
    Identity,
    Linear {
        k: f64,
    },
    Power {
        #[serde(default = "one")]
        k: f64,
        p: f64,
    },
    Saturating,
    Expr {
        expr: String,
        #[serde(default)]
        class: FnClass,
        #[serde(default)]
        domain_hint: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl ComparisonSpec {
    pub fn build(&self) -> Result<ComparisonFn> {
        match self {
            ComparisonSpec::Identity => Ok(ComparisonFn::identity()),
            ComparisonSpec::Linear { k } => ComparisonFn::linear(*k),
            ComparisonSpec::Power { k, p } => ComparisonFn::power(*k, *p),
            ComparisonSpec::Saturating => Ok(ComparisonFn::saturating()),
            ComparisonSpec::Expr {
                expr,
                class,
                domain_hint,
            } => {
                let e = Expr::compile(expr, Scope::Radial)?;
                ComparisonFn::new(
                    expr.clone(),
                    *class,
                    domain_hint.unwrap_or(DEFAULT_DOMAIN_HINT),
                    move |r| e.eval(&Bindings::radial(r)),
                )
            }
        }
    }

    /// Builds and requires class K∞.
    pub fn build_kinf(&self) -> Result<ComparisonFn> {
        let f = self.build()?;
        f.require_kinf()?;
        Ok(f)
    }
}

/// Config form of a KL function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KlSpec {
    ExpDecay {
        #[serde(default = "one")]
        k: f64,
        lambda: f64,
    },
    RationalDecay {
        #[serde(default = "one")]
        k: f64,
        p: f64,
    },
    Expr {
        expr: String,
        #[serde(default)]
        domain_hint: Option<f64>,
    },
}

impl KlSpec {
    pub fn build(&self) -> Result<KlFn> {
        match self {
            KlSpec::ExpDecay { k, lambda } => KlFn::exp_decay(*k, *lambda),
            KlSpec::RationalDecay { k, p } => KlFn::rational_decay(*k, *p),
            KlSpec::Expr { expr, domain_hint } => {
                let e = Expr::compile(expr, Scope::TwoArg)?;
                KlFn::new(
                    expr.clone(),
                    domain_hint.unwrap_or(DEFAULT_DOMAIN_HINT),
                    move |r, s| e.eval(&Bindings::two_arg(r, s)),
                )
            }
        }
    }
}

/// Config form of a nondecreasing envelope φ (expression in `r`, read as the
/// interval length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Zero,
    FloorPlusOne {
        #[serde(default = "one")]
        rate: f64,
    },
    Affine {
        slope: f64,
        offset: f64,
    },
    Expr {
        expr: String,
    },
}

impl PhiSpec {
    pub fn build(&self) -> Result<NondecreasingFn> {
        match self {
            PhiSpec::Zero => Ok(NondecreasingFn::zero()),
            PhiSpec::FloorPlusOne { rate } => {
                let rate = *rate;
                NondecreasingFn::new(format!("floor({rate}*s)+1"), move |s| {
                    (rate * s + 1e-9).floor() + 1.0
                })
            }
            PhiSpec::Affine { slope, offset } => {
                let (a, b) = (*slope, *offset);
                NondecreasingFn::new(format!("{a}*s+{b}"), move |s| a * s + b)
            }
            PhiSpec::Expr { expr } => {
                let e = Expr::compile(expr, Scope::Radial)?;
                NondecreasingFn::new(expr.clone(), move |s| e.eval(&Bindings::radial(s)))
            }
        }
    }
}
