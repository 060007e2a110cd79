//! Piecewise-constant input signals, hybrid inputs `w = (u, σ)`, truncation
//! `w_J` and the `(ρ1, ρ2)` energy functional.

use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonFn;
use crate::error::{Error, Result};
use crate::impulses::{count_in, ImpulseSequence};

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-continuous piecewise-constant signal in `R^m`.
///
/// `u(t) = values[i]` on `[breakpoints[i], breakpoints[i+1])`, the last value
/// persists to `+∞`, and `u(t) = 0` before the first breakpoint. An optional
/// window `(lo, hi]` masks the signal to zero outside it (truncation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal", into = "RawSignal")]
pub struct InputSignal {
    dim: usize,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    window: Option<(f64, f64)>,
    origin: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSignal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<(f64, f64)>,
}

impl TryFrom<RawSignal> for InputSignal {
    type Error = Error;

    fn try_from(raw: RawSignal) -> Result<Self> {
        let dim = raw
            .dim
            .or_else(|| raw.values.first().map(Vec::len))
            .unwrap_or(1);
        let mut signal = InputSignal::from_pieces(dim, raw.breakpoints, raw.values)?;
        if let Some((lo, hi)) = raw.window {
            if !(lo <= hi) {
                return Err(Error::InvalidInput(format!("bad window ({lo}, {hi}]")));
            }
            signal.window = Some((lo, hi));
        }
        Ok(signal)
    }
}

impl From<InputSignal> for RawSignal {
    fn from(s: InputSignal) -> Self {
        RawSignal {
            dim: Some(s.dim),
            values: s.values.chunks(s.dim.max(1)).map(<[f64]>::to_vec).collect(),
            breakpoints: s.breakpoints,
            window: s.window,
        }
    }
}

/// A maximal interval on which the signal is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece<'a> {
    pub start: f64,
    pub end: f64,
    pub value: &'a [f64],
}

impl InputSignal {
    pub fn zero(dim: usize) -> Self {
        InputSignal {
            dim,
            breakpoints: Vec::new(),
            values: Vec::new(),
            window: None,
            origin: vec![0.0; dim],
        }
    }

    pub fn from_pieces(dim: usize, breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        let mut flat = Vec::with_capacity(dim * values.len());
        for (i, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "value #{i} has dimension {} (expected {dim})",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("value #{i} is not finite")));
            }
            flat.extend_from_slice(v);
        }
        Ok(InputSignal {
            dim,
            breakpoints,
            values: flat,
            window: None,
            origin: vec![0.0; dim],
        })
    }

    /// `value` on `[from, until)`, zero elsewhere.
    pub fn constant(value: Vec<f64>, from: f64, until: f64) -> Result<Self> {
        let dim = value.len();
        Self::from_pieces(dim, vec![from, until], vec![value, vec![0.0; dim]])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    fn value_index(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn zeros(&self) -> &[f64] {
        &self.origin
    }

    fn unmasked_at(&self, t: f64) -> &[f64] {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        if idx == 0 {
            self.zeros()
        } else {
            self.value_index(idx - 1)
        }
    }

    /// `u(t)` (right-continuous; zero outside the window).
    pub fn at(&self, t: f64) -> &[f64] {
        match self.window {
            Some((lo, hi)) if !(t > lo && t <= hi) => self.zeros(),
            _ => self.unmasked_at(t),
        }
    }

    /// Value on the open interval `(a, b)`, assumed free of breakpoints.
    pub fn on_open(&self, a: f64, b: f64) -> &[f64] {
        self.at(0.5 * (a + b))
    }

    /// Times in `(a, b)` where the signal may change value (breakpoints and
    /// window edges).
    pub fn events_in(&self, a: f64, b: f64) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&x| x > a && x < b)
            .collect();
        if let Some((lo, hi)) = self.window {
            ev.extend([lo, hi].into_iter().filter(|&x| x > a && x < b));
            ev.sort_by(f64::total_cmp);
            ev.dedup();
        }
        ev
    }

    /// Constant pieces covering `(a, b]` (`b` may be `+∞`).
    pub fn pieces(&self, a: f64, b: f64) -> Vec<Piece<'_>> {
        let (mut lo, mut hi) = (a, b);
        if let Some((wl, wh)) = self.window {
            lo = lo.max(wl);
            hi = hi.min(wh);
        }
        if !(hi > lo) {
            return Vec::new();
        }
        let mut cuts = vec![lo];
        cuts.extend(self.breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| Piece {
                start: w[0],
                end: w[1],
                value: if w[1].is_finite() {
                    self.unmasked_at(0.5 * (w[0] + w[1]))
                } else {
                    self.unmasked_at(w[0])
                },
            })
            .collect()
    }

    /// Time after which the signal is identically zero (`+∞` if never).
    pub fn support_end(&self) -> f64 {
        let mut end = f64::NEG_INFINITY;
        let n = self.breakpoints.len();
        for i in 0..n {
            if self.value_index(i).iter().any(|&x| x != 0.0) {
                end = if i + 1 < n {
                    self.breakpoints[i + 1]
                } else {
                    f64::INFINITY
                };
            }
        }
        match self.window {
            Some((_, hi)) => end.min(hi),
            None => end,
        }
    }

    /// `sup |u(s)|` over `(a, b]`.
    pub fn sup_norm(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b)
            .iter()
            .map(|p| euclidean_norm(p.value))
            .chain(std::iter::once(if b.is_finite() {
                euclidean_norm(self.at(b))
            } else {
                0.0
            }))
            .fold(0.0, f64::max)
    }

    /// Scales every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `u_J` for `J = (t0, t]`, composed with any existing window.
    pub fn truncated(&self, t0: f64, t: f64) -> Self {
        let (lo, hi) = match self.window {
            Some((wl, wh)) => (t0.max(wl), t.min(wh)),
            None => (t0, t),
        };
        let mut out = self.clone();
        out.window = Some((lo, hi.max(lo)));
        out
    }
}

/// A hybrid input `w = (u, σ)`.
#[derive(Debug, Clone)]
pub struct HybridInput {
    pub u: InputSignal,
    pub sigma: ImpulseSequence,
}

impl HybridInput {
    pub fn new(u: InputSignal, sigma: ImpulseSequence) -> Self {
        HybridInput { u, sigma }
    }

    /// `w0 = (0, σ)`.
    pub fn zero(dim_u: usize, sigma: ImpulseSequence) -> Self {
        HybridInput {
            u: InputSignal::zero(dim_u),
            sigma,
        }
    }
}

/// `w_J` with `J = (t0, t]`: `u` masked outside `J`, `σ` unchanged.
pub fn truncate(w: &HybridInput, t0: f64, t: f64) -> Result<HybridInput> {
    if t < t0 {
        return Err(Error::InvalidInterval { t0, t });
    }
    Ok(HybridInput {
        u: w.u.truncated(t0, t),
        sigma: w.sigma.clone(),
    })
}

/// `‖w_{(t0,t]}‖_{(ρ1,ρ2)} = ∫_{(t0,t]} ρ1(|u(s)|) ds + Σ_{τ ∈ σ∩(t0,t]} ρ2(|u(τ)|)`.
///
/// Exact for piecewise-constant `u`. `t` may be `+∞`, in which case σ is
/// materialized only up to the support of `u`.
pub fn energy_norm(
    w: &HybridInput,
    rho1: &ComparisonFn,
    rho2: &ComparisonFn,
    t0: f64,
    t: f64,
) -> Result<f64> {
    if t < t0 {
        return Err(Error::InvalidInterval { t0, t });
    }
    let mut integral = 0.0;
    for p in w.u.pieces(t0, t) {
        let n = euclidean_norm(p.value);
        if n == 0.0 {
            continue;
        }
        if !p.end.is_finite() {
            return Ok(f64::INFINITY);
        }
        integral += (p.end - p.start) * rho1.eval(n)?;
    }
    let upper = t.min(w.u.support_end());
    let mut jump_sum = 0.0;
    if upper > t0 {
        for tau in w.sigma.materialize(upper)? {
            if tau > t0 {
                let n = euclidean_norm(w.u.at(tau));
                if n > 0.0 {
                    jump_sum += rho2.eval(n)?;
                }
            }
        }
    }
    Ok(integral + jump_sum)
}

/// Running energy `‖w_{(t0,t]}‖` for nondecreasing query times, used by
/// the checkers to avoid re-integrating from `t0` at every sample.
#[derive(Debug, Clone)]
pub struct EnergyProfile {
    t0: f64,
    /// (piece start, piece end, ρ1(|u|), cumulative integral at start)
    pieces: Vec<(f64, f64, f64, f64)>,
    jump_times: Vec<f64>,
    /// prefix sums of ρ2(|u(τ)|) over `jump_times`
    jump_prefix: Vec<f64>,
}

impl EnergyProfile {
    pub fn new(
        w: &HybridInput,
        rho1: &ComparisonFn,
        rho2: &ComparisonFn,
        t0: f64,
        horizon: f64,
    ) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut acc = 0.0;
        for p in w.u.pieces(t0, horizon) {
            let density = rho1.eval(euclidean_norm(p.value))?;
            pieces.push((p.start, p.end, density, acc));
            acc += (p.end - p.start) * density;
        }
        let jump_times: Vec<f64> = w
            .sigma
            .materialize(horizon)?
            .into_iter()
            .filter(|&tau| tau > t0)
            .collect();
        let mut jump_prefix = Vec::with_capacity(jump_times.len() + 1);
        jump_prefix.push(0.0);
        let mut s = 0.0;
        for &tau in &jump_times {
            s += rho2.eval(euclidean_norm(w.u.at(tau)))?;
            jump_prefix.push(s);
        }
        Ok(EnergyProfile {
            t0,
            pieces,
            jump_times,
            jump_prefix,
        })
    }

    fn integral(&self, t: f64) -> f64 {
        if t <= self.t0 {
            return 0.0;
        }
        let i = self.pieces.partition_point(|p| p.0 < t);
        if i == 0 {
            return 0.0;
        }
        let (start, end, density, cum) = self.pieces[i - 1];
        cum + (t.min(end) - start) * density
    }

    /// `‖w_{(t0, t]}‖`.
    pub fn upto(&self, t: f64) -> f64 {
        let n = count_in(&self.jump_times, self.t0, t);
        self.integral(t) + self.jump_prefix[n]
    }

    /// `‖w_{(t0, t)}‖`: excludes a jump exactly at `t` (left limit).
    pub fn before(&self, t: f64) -> f64 {
        let n = self.jump_times.partition_point(|&s| s < t);
        self.integral(t) + self.jump_prefix[n]
    }
}

/// Named input presets for configs and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum InputPreset {
    Zero,
    Constant {
        value: f64,
        #[serde(default)]
        from: f64,
        until: f64,
    },
    PulseTrain {
        amplitude: f64,
        period: f64,
        width: f64,
        until: f64,
    },
    DecayingBurst {
        amplitude: f64,
        rate: f64,
        piece: f64,
        pieces: usize,
    },
    Signal(InputSignal),
}

impl InputPreset {
    /// Builds the signal; scalar presets are applied to the first input
    /// channel.
    pub fn build(&self, dim_u: usize) -> Result<InputSignal> {
        let vec_of = |a: f64| {
            let mut v = vec![0.0; dim_u];
            if dim_u > 0 {
                v[0] = a;
            }
            v
        };
        match self {
            InputPreset::Zero => Ok(InputSignal::zero(dim_u)),
            InputPreset::Constant { value, from, until } => {
                InputSignal::constant(vec_of(*value), *from, *until)
            }
            InputPreset::PulseTrain {
                amplitude,
                period,
                width,
                until,
            } => {
                if !(*period > 0.0 && *width > 0.0 && width < period) {
                    return Err(Error::InvalidInput(
                        "pulse_train needs 0 < width < period".into(),
                    ));
                }
                let (mut bps, mut vals) = (Vec::new(), Vec::new());
                let mut t = 0.0;
                while t < *until {
                    bps.push(t);
                    vals.push(vec_of(*amplitude));
                    bps.push(t + width);
                    vals.push(vec_of(0.0));
                    t += period;
                }
                InputSignal::from_pieces(dim_u, bps, vals)
            }
            InputPreset::DecayingBurst {
                amplitude,
                rate,
                piece,
                pieces,
            } => {
                let mut bps: Vec<f64> = (0..=*pieces).map(|i| i as f64 * piece).collect();
                let mut vals: Vec<Vec<f64>> = (0..*pieces)
                    .map(|i| vec_of(amplitude * (-rate * i as f64 * piece).exp()))
                    .collect();
                vals.push(vec_of(0.0));
                bps.truncate(vals.len());
                InputSignal::from_pieces(dim_u, bps, vals)
            }
            InputPreset::Signal(s) => {
                if s.dim() != dim_u {
                    return Err(Error::InvalidInput(format!(
                        "signal has dimension {} but the system expects {dim_u}",
                        s.dim()
                    )));
                }
                Ok(s.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id() -> ComparisonFn {
        ComparisonFn::identity()
    }

    #[test]
    fn evaluation_is_right_continuous() {
        let u = InputSignal::from_pieces(1, vec![1.0, 2.0], vec![vec![3.0], vec![0.0]]).unwrap();
        assert_eq!(u.at(0.5), &[0.0]);
        assert_eq!(u.at(1.0), &[3.0]);
        assert_eq!(u.at(1.999), &[3.0]);
        assert_eq!(u.at(2.0), &[0.0]);
        assert_eq!(u.support_end(), 2.0);
    }

    #[test]
    fn truncation_masks_outside_window() {
        let u = InputSignal::constant(vec![1.0], 0.0, 10.0).unwrap();
        let w = HybridInput::new(u, ImpulseSequence::empty());
        let wj = truncate(&w, 2.0, 3.0).unwrap();
        assert_eq!(wj.u.at(2.0), &[0.0]);
        assert_eq!(wj.u.at(2.5), &[1.0]);
        assert_eq!(wj.u.at(3.0), &[1.0]);
        assert_eq!(wj.u.at(3.0001), &[0.0]);
        let empty = truncate(&w, 2.0, 2.0).unwrap();
        for t in [0.0, 2.0, 2.5, 9.0] {
            assert_eq!(empty.u.at(t), &[0.0]);
        }
        assert!(truncate(&w, 3.0, 2.0).is_err());
    }

    #[test]
    fn nested_truncation_equals_inner() {
        let u = InputSignal::from_pieces(
            1,
            vec![0.0, 0.7, 1.9, 4.0],
            vec![vec![1.0], vec![-2.0], vec![0.5], vec![0.0]],
        )
        .unwrap();
        let w = HybridInput::new(u, ImpulseSequence::empty());
        let outer = truncate(&truncate(&w, 0.5, 3.0).unwrap(), 0.5, 1.2).unwrap();
        let direct = truncate(&w, 0.5, 1.2).unwrap();
        for i in 0..=400 {
            let t = i as f64 * 0.01;
            assert_eq!(outer.u.at(t), direct.u.at(t), "t = {t}");
        }
    }

    #[test]
    fn energy_examples() {
        let sigma = ImpulseSequence::finite(vec![1.0, 2.0]).unwrap();
        let w0 = HybridInput::zero(1, sigma.clone());
        assert_eq!(energy_norm(&w0, &id(), &id(), 0.0, 5.0).unwrap(), 0.0);

        // u ≡ 1 on (0, 2]: the value at t = 2 counts because of the jump there
        let u = InputSignal::from_pieces(1, vec![0.0, 3.0], vec![vec![1.0], vec![0.0]])
            .unwrap()
            .truncated(0.0, 2.0);
        let w = HybridInput::new(u, sigma);
        assert_eq!(energy_norm(&w, &id(), &id(), 0.0, 2.0).unwrap(), 4.0);
        let left = energy_norm(&w, &id(), &id(), 0.0, 1.0).unwrap();
        let right = energy_norm(&w, &id(), &id(), 1.0, 2.0).unwrap();
        assert_eq!((left, right), (2.0, 2.0));
        assert!(energy_norm(&w, &id(), &id(), 1.0, 0.5).is_err());
    }

    #[test]
    fn unbounded_horizon() {
        let sigma = ImpulseSequence::periodic(1.0, 1.0).unwrap();
        let u = InputSignal::constant(vec![2.0], 0.0, 3.5).unwrap();
        let w = HybridInput::new(u.clone(), sigma.clone());
        let sq = ComparisonFn::power(1.0, 2.0).unwrap();
        let e = energy_norm(&w, &id(), &sq, 0.0, f64::INFINITY).unwrap();
        assert_eq!(e, 3.5 * 2.0 + 3.0 * 4.0);
        let forever = HybridInput::new(InputSignal::constant(vec![1.0], 0.0, 1.0).unwrap().scaled(1.0), sigma.clone());
        assert!(energy_norm(&forever, &id(), &id(), 0.0, f64::INFINITY).unwrap().is_finite());
        let never_off =
            HybridInput::new(InputSignal::from_pieces(1, vec![0.0], vec![vec![1.0]]).unwrap(), sigma);
        assert_eq!(
            energy_norm(&never_off, &id(), &id(), 0.0, f64::INFINITY).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn profile_matches_direct_evaluation() {
        let sigma = ImpulseSequence::finite(vec![0.5, 1.0, 2.5, 3.0]).unwrap();
        let u = InputSignal::from_pieces(
            2,
            vec![0.2, 1.0, 2.0, 3.0],
            vec![vec![1.0, 1.0], vec![0.0, -2.0], vec![3.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let w = HybridInput::new(u, sigma);
        let sq = ComparisonFn::power(1.0, 2.0).unwrap();
        let prof = EnergyProfile::new(&w, &id(), &sq, 0.3, 4.0).unwrap();
        for i in 0..=40 {
            let t = 0.3 + i as f64 * 0.0925;
            let direct = energy_norm(&w, &id(), &sq, 0.3, t).unwrap();
            assert!((prof.upto(t) - direct).abs() < 1e-12, "t = {t}");
        }
        let at = prof.upto(2.5);
        let before = prof.before(2.5);
        assert!((at - before - sq.eval(euclidean_norm(w.u.at(2.5))).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn presets_build() {
        let p = InputPreset::PulseTrain {
            amplitude: 2.0,
            period: 1.0,
            width: 0.25,
            until: 3.0,
        }
        .build(1)
        .unwrap();
        assert_eq!(p.at(1.1), &[2.0]);
        assert_eq!(p.at(1.3), &[0.0]);
        let d = InputPreset::DecayingBurst {
            amplitude: 1.0,
            rate: 1.0,
            piece: 0.5,
            pieces: 4,
        }
        .build(1)
        .unwrap();
        assert_eq!(d.at(0.1), &[1.0]);
        assert_eq!(d.at(2.5), &[0.0]);
        let json = r#"{"preset":"signal","breakpoints":[0,1],"values":[[1],[0]]}"#;
        let s: InputPreset = serde_json::from_str(json).unwrap();
        assert_eq!(s.build(1).unwrap().at(0.5), &[1.0]);
    }

    #[test]
    fn json_schema() {
        let s: InputSignal =
            serde_json::from_str(r#"{"breakpoints":[0.0,1.5],"values":[[1.0,2.0],[0.0,0.0]]}"#)
                .unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.at(1.0), &[1.0, 2.0]);
        assert!(serde_json::from_str::<InputSignal>(r#"{"breakpoints":[1,0],"values":[[1],[2]]}"#).is_err());
        assert!(serde_json::from_str::<InputSignal>(r#"{"breakpoints":[0],"values":[[1],[2]]}"#).is_err());
        let back: InputSignal = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    fn arb_input() -> impl Strategy<Value = HybridInput> {
        (
            proptest::collection::vec((0.05f64..2.0, -3.0f64..3.0), 1..8),
            proptest::collection::vec(0.05f64..2.0, 0..12),
        )
            .prop_map(|(pieces, gaps)| {
                let mut t = 0.0;
                let (mut bps, mut vals) = (Vec::new(), Vec::new());
                for (len, v) in pieces {
                    bps.push(t);
                    vals.push(vec![v]);
                    t += len;
                }
                bps.push(t);
                vals.push(vec![0.0]);
                let mut times = Vec::new();
                let mut s = 0.0;
                for g in gaps {
                    s += g;
                    times.push(s);
                }
                HybridInput::new(
                    InputSignal::from_pieces(1, bps, vals).unwrap(),
                    ImpulseSequence::finite(times).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn energy_is_additive_and_monotone(w in arb_input(), mut cuts in proptest::collection::vec(0.0f64..15.0, 3)) {
            cuts.sort_by(f64::total_cmp);
            let (a, b, c) = (cuts[0], cuts[1], cuts[2]);
            let sq = ComparisonFn::power(1.0, 2.0).unwrap();
            let whole = energy_norm(&w, &id(), &sq, a, c).unwrap();
            let parts = energy_norm(&w, &id(), &sq, a, b).unwrap() + energy_norm(&w, &id(), &sq, b, c).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole));
            prop_assert!(energy_norm(&w, &id(), &sq, a, b).unwrap() <= whole + 1e-12);
            prop_assert!(whole >= 0.0);
        }

        #[test]
        fn truncation_preserves_window_energy(w in arb_input(), t0 in 0.0f64..8.0, len in 0.0f64..8.0) {
            let t = t0 + len;
            let sq = ComparisonFn::power(1.0, 2.0).unwrap();
            let direct = energy_norm(&w, &id(), &sq, t0, t).unwrap();
            let wt = truncate(&w, t0, t).unwrap();
            let full = energy_norm(&wt, &id(), &sq, 0.0, f64::INFINITY).unwrap();
            prop_assert!((direct - full).abs() <= 1e-12 * (1.0 + direct));
        }
    }
}
