//! Admissible impulse-time sequences, jump counting over `(t0, t]`, strong
//! time, and randomized sequence families.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparison::NondecreasingFn;
use crate::error::{Error, Result};

/// Upper bound on the number of jumps a generator will materialize.
pub const MAX_MATERIALIZED: usize = 10_000_000;

/// Slack used inside lattice counting envelopes so `floor` is not thrown off
/// by rounding in the jump times themselves.
const LATTICE_SLACK: f64 = 1e-9;

type IndexFn = dyn Fn(usize) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    Finite(Arc<[f64]>),
    /// Infinite sequence given by a closed form for the k-th jump (0-based).
    Indexed { label: Arc<str>, time_at: Arc<IndexFn> },
    /// Infinite sequence realized only up to `valid_until`.
    Prefix { times: Arc<[f64]>, valid_until: f64 },
}

/// A strictly increasing sequence of positive impulse times.
#[derive(Clone)]
pub struct ImpulseSequence {
    kind: Kind,
}

impl fmt::Debug for ImpulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Finite(t) => f.debug_tuple("Finite").field(&t.len()).finish(),
            Kind::Indexed { label, .. } => f.debug_tuple("Indexed").field(label).finish(),
            Kind::Prefix { times, valid_until } => f
                .debug_struct("Prefix")
                .field("len", &times.len())
                .field("valid_until", valid_until)
                .finish(),
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidSequence(format!(
                "time #{i} = {t} is not a positive finite number"
            )));
        }
        if i > 0 && t <= prev {
            return Err(Error::InvalidSequence(format!(
                "times not strictly increasing at #{i} ({prev} then {t})"
            )));
        }
        prev = t;
    }
    Ok(())
}

impl ImpulseSequence {
    pub fn empty() -> Self {
        ImpulseSequence {
            kind: Kind::Finite(Arc::from(Vec::new())),
        }
    }

    pub fn finite(times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        Ok(ImpulseSequence {
            kind: Kind::Finite(times.into()),
        })
    }

    /// `first, first + period, first + 2·period, ...`
    pub fn periodic(period: f64, first: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) || !(first > 0.0 && first.is_finite()) {
            return Err(Error::InvalidSequence(format!(
                "periodic sequence needs period > 0 and first time > 0 (got {period}, {first})"
            )));
        }
        Ok(Self::indexed(format!("periodic({period}, first={first})"), move |k| {
            first + k as f64 * period
        }))
    }

    /// An infinite sequence defined by its k-th time. The closure must be
    /// strictly increasing with limit ∞; this is checked on materialization.
    pub fn indexed<F>(label: impl Into<String>, time_at: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        ImpulseSequence {
            kind: Kind::Indexed {
                label: label.into().into(),
                time_at: Arc::new(time_at),
            },
        }
    }

    /// A realization of an infinite sequence that is only known up to
    /// `valid_until`; asking for more is an error.
    pub fn prefix(times: Vec<f64>, valid_until: f64) -> Result<Self> {
        check_times(&times)?;
        if times.last().is_some_and(|&t| t > valid_until) {
            return Err(Error::InvalidSequence(
                "prefix contains times past its validity horizon".into(),
            ));
        }
        Ok(ImpulseSequence {
            kind: Kind::Prefix {
                times: times.into(),
                valid_until,
            },
        })
    }

    pub fn is_unbounded(&self) -> bool {
        !matches!(self.kind, Kind::Finite(_))
    }

    /// The largest horizon this sequence can be materialized to.
    pub fn capability(&self) -> f64 {
        match &self.kind {
            Kind::Prefix { valid_until, .. } => *valid_until,
            _ => f64::INFINITY,
        }
    }

    /// All times `≤ horizon`.
    pub fn materialize(&self, horizon: f64) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Finite(times) => {
                let end = times.partition_point(|&t| t <= horizon);
                Ok(times[..end].to_vec())
            }
            Kind::Prefix { times, valid_until } => {
                if horizon > *valid_until {
                    return Err(Error::HorizonExceeded {
                        requested: horizon,
                        available: *valid_until,
                    });
                }
                let end = times.partition_point(|&t| t <= horizon);
                Ok(times[..end].to_vec())
            }
            Kind::Indexed { label, time_at } => {
                if !horizon.is_finite() {
                    return Err(Error::HorizonExceeded {
                        requested: horizon,
                        available: f64::MAX,
                    });
                }
                let mut out = Vec::new();
                let mut prev = 0.0;
                for k in 0.. {
                    let t = time_at(k);
                    if !(t > prev) || !t.is_finite() {
                        return Err(Error::InvalidSequence(format!(
                            "generator `{label}` is not strictly increasing and positive at k = {k}"
                        )));
                    }
                    if t > horizon {
                        break;
                    }
                    if out.len() >= MAX_MATERIALIZED {
                        return Err(Error::HorizonExceeded {
                            requested: horizon,
                            available: prev,
                        });
                    }
                    out.push(t);
                    prev = t;
                }
                Ok(out)
            }
        }
    }

    /// Serializes the times up to `horizon` as a JSON array.
    pub fn to_json(&self, horizon: f64) -> Result<String> {
        Ok(serde_json::to_string(&self.materialize(horizon)?)?)
    }

    /// Parses a JSON array of times as a finite sequence.
    pub fn from_json(text: &str) -> Result<Self> {
        let times: Vec<f64> =
            serde_json::from_str(text).map_err(|e| Error::config("impulse sequence", e))?;
        Self::finite(times)
    }
}

/// `#(times ∩ (t0, t])` for a sorted slice.
pub fn count_in(times: &[f64], t0: f64, t: f64) -> usize {
    if t <= t0 {
        return 0;
    }
    let hi = times.partition_point(|&s| s <= t);
    let lo = times.partition_point(|&s| s <= t0);
    hi - lo
}

/// `n^σ_{(t0, t]}`.
pub fn count_jumps(sigma: &ImpulseSequence, t0: f64, t: f64) -> Result<usize> {
    if t < t0 {
        return Err(Error::InvalidInterval { t0, t });
    }
    Ok(count_in(&sigma.materialize(t)?, t0, t))
}

/// `(t − t0) + n^σ_{(t0, t]}`.
pub fn strong_time(sigma: &ImpulseSequence, t0: f64, t: f64) -> Result<f64> {
    Ok((t - t0) + count_jumps(sigma, t0, t)? as f64)
}

/// `s_0 = t0` and `s_i = inf{t ≥ s_{i−1} : t − s_{i−1} + n_{(s_{i−1}, t]} ≥ T̃}`.
///
/// The infimum is located exactly: between consecutive jumps the strong time
/// grows linearly, so the crossing is either a jump instant or
/// `s_{i−1} + T̃ − n` for the current count `n`.
pub fn strong_time_schedule(
    sigma: &ImpulseSequence,
    t0: f64,
    t_tilde: f64,
    count: usize,
) -> Result<Vec<f64>> {
    if !(t_tilde > 0.0) {
        return Err(Error::Invalid(format!("T̃ must be positive, got {t_tilde}")));
    }
    // strong time dominates elapsed time, so s_count ≤ t0 + count·T̃
    let times = sigma.materialize(t0 + count as f64 * t_tilde)?;
    let mut schedule = Vec::with_capacity(count + 1);
    schedule.push(t0);
    let mut s = t0;
    for _ in 0..count {
        let mut idx = times.partition_point(|&t| t <= s);
        let mut n = 0usize;
        let next = loop {
            let candidate = s + (t_tilde - n as f64);
            match times.get(idx) {
                Some(&tau) if tau <= candidate => {
                    n += 1;
                    idx += 1;
                    if tau - s + n as f64 >= t_tilde {
                        break tau;
                    }
                }
                _ => break candidate,
            }
        };
        schedule.push(next);
        s = next;
    }
    Ok(schedule)
}

type Sampler = dyn Fn(u64, f64) -> Result<ImpulseSequence> + Send + Sync;

/// A family of impulse sequences sampled reproducibly from `(seed, horizon)`.
#[derive(Clone)]
pub struct ImpulseFamily {
    description: String,
    sampler: Arc<Sampler>,
    uib_phi: Option<NondecreasingFn>,
}

impl fmt::Debug for ImpulseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImpulseFamily")
            .field("description", &self.description)
            .field("uib_phi", &self.uib_phi)
            .finish()
    }
}

impl ImpulseFamily {
    pub fn new<F>(description: impl Into<String>, uib_phi: Option<NondecreasingFn>, f: F) -> Self
    where
        F: Fn(u64, f64) -> Result<ImpulseSequence> + Send + Sync + 'static,
    {
        ImpulseFamily {
            description: description.into(),
            sampler: Arc::new(f),
            uib_phi,
        }
    }

    /// Every sample is the same sequence.
    pub fn single(description: impl Into<String>, sigma: ImpulseSequence) -> Self {
        Self::new(description, None, move |_, _| Ok(sigma.clone()))
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn uib_phi(&self) -> Option<&NondecreasingFn> {
        self.uib_phi.as_ref()
    }

    /// Samples a sequence that can be materialized at least to `horizon`.
    pub fn sample(&self, seed: u64, horizon: f64) -> Result<ImpulseSequence> {
        (self.sampler)(seed, horizon)
    }

    pub fn empty() -> Self {
        Self::new("empty", Some(NondecreasingFn::zero()), |_, _| {
            Ok(ImpulseSequence::empty())
        })
    }

    /// `{first + k·period}`; `first` defaults to `period`.
    pub fn periodic(period: f64, first: Option<f64>) -> Result<Self> {
        let sigma = ImpulseSequence::periodic(period, first.unwrap_or(period))?;
        Ok(Self::new(
            format!("periodic(period={period})"),
            Some(lattice_phi(period)?),
            move |_, _| Ok(sigma.clone()),
        ))
    }

    /// Random gaps uniform in `[min_dwell, min_dwell·(1 + spread)]`.
    pub fn dwell(min_dwell: f64, spread: f64) -> Result<Self> {
        if !(min_dwell > 0.0) || !(spread >= 0.0) {
            return Err(Error::InvalidSequence(
                "dwell family needs min_dwell > 0 and spread ≥ 0".into(),
            ));
        }
        Ok(Self::new(
            format!("dwell(min={min_dwell}, spread={spread})"),
            Some(lattice_phi(min_dwell)?),
            move |seed, horizon| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut times = Vec::new();
                let mut t = 0.0;
                loop {
                    t += min_dwell * (1.0 + spread * rng.gen::<f64>());
                    if t > horizon {
                        break;
                    }
                    times.push(t);
                }
                ImpulseSequence::prefix(times, horizon)
            },
        ))
    }

    /// Exactly `count` distinct times uniform in `(0, span]`.
    pub fn finite_random(count: usize, span: f64) -> Result<Self> {
        if !(span > 0.0) {
            return Err(Error::InvalidSequence("finite_random needs span > 0".into()));
        }
        let phi = NondecreasingFn::new(format!("{count}"), move |_| count as f64)?;
        Ok(Self::new(
            format!("finite_random(count={count}, span={span})"),
            Some(phi),
            move |seed, _| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut times: Vec<f64> = Vec::with_capacity(count);
                while times.len() < count {
                    let t = span * (1.0 - rng.gen::<f64>());
                    if !times.contains(&t) {
                        times.push(t);
                    }
                }
                times.sort_by(f64::total_cmp);
                ImpulseSequence::finite(times)
            },
        ))
    }

    /// Gaps `floor_gap + (first_gap − floor_gap)·ratio^k`, shrinking toward
    /// `floor_gap > 0`: jump-dense but still admissible.
    pub fn zeno_approaching(first_gap: f64, floor_gap: f64, ratio: f64) -> Result<Self> {
        if !(floor_gap > 0.0 && first_gap >= floor_gap && (0.0..1.0).contains(&ratio)) {
            return Err(Error::InvalidSequence(
                "zeno_approaching needs first_gap ≥ floor_gap > 0 and 0 ≤ ratio < 1".into(),
            ));
        }
        let excess = first_gap - floor_gap;
        let sigma = ImpulseSequence::indexed(
            format!("zeno_approaching({first_gap}, {floor_gap}, {ratio})"),
            move |k| {
                let n = (k + 1) as f64;
                n * floor_gap + excess * (1.0 - ratio.powf(n)) / (1.0 - ratio)
            },
        );
        Ok(Self::new(
            format!("zeno_approaching(first={first_gap}, floor={floor_gap}, ratio={ratio})"),
            Some(lattice_phi(floor_gap)?),
            move |_, _| Ok(sigma.clone()),
        ))
    }

    /// Periodic with a random rate `k ∈ {1, …, max_rate}`: `{1/k, 2/k, …}`.
    /// Not UIB over unbounded rates.
    pub fn rate_sweep(max_rate: u32) -> Result<Self> {
        if max_rate == 0 {
            return Err(Error::InvalidSequence("rate_sweep needs max_rate ≥ 1".into()));
        }
        Ok(Self::new(
            format!("rate_sweep(max_rate={max_rate})"),
            None,
            move |seed, _| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = rng.gen_range(1..=max_rate) as f64;
                ImpulseSequence::periodic(1.0 / k, 1.0 / k)
            },
        ))
    }
}

/// `⌊s / gap + slack⌋ + 1`: the counting envelope for minimum spacing `gap`.
pub fn lattice_phi(gap: f64) -> Result<NondecreasingFn> {
    NondecreasingFn::new(format!("floor(s/{gap})+1"), move |s| {
        (s / gap + LATTICE_SLACK).floor() + 1.0
    })
}

/// Config form of an impulse family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FamilySpec {
    Empty,
    Periodic {
        period: f64,
        #[serde(default)]
        first: Option<f64>,
    },
    Dwell {
        min_dwell: f64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    FiniteRandom {
        count: usize,
        span: f64,
    },
    ZenoApproaching {
        first_gap: f64,
        floor_gap: f64,
        ratio: f64,
    },
    RateSweep {
        max_rate: u32,
    },
    Fixed {
        times: Vec<f64>,
    },
}

fn default_spread() -> f64 {
    1.0
}

impl FamilySpec {
    pub fn build(&self) -> Result<ImpulseFamily> {
        match self {
            FamilySpec::Empty => Ok(ImpulseFamily::empty()),
            FamilySpec::Periodic { period, first } => ImpulseFamily::periodic(*period, *first),
            FamilySpec::Dwell { min_dwell, spread } => ImpulseFamily::dwell(*min_dwell, *spread),
            FamilySpec::FiniteRandom { count, span } => ImpulseFamily::finite_random(*count, *span),
            FamilySpec::ZenoApproaching {
                first_gap,
                floor_gap,
                ratio,
            } => ImpulseFamily::zeno_approaching(*first_gap, *floor_gap, *ratio),
            FamilySpec::RateSweep { max_rate } => ImpulseFamily::rate_sweep(*max_rate),
            FamilySpec::Fixed { times } => Ok(ImpulseFamily::single(
                format!("fixed({} times)", times.len()),
                ImpulseSequence::finite(times.clone())?,
            )),
        }
    }
}

/// The built-in family set with default parameters.
pub fn family_generators() -> Vec<(&'static str, FamilySpec)> {
    vec![
        ("empty", FamilySpec::Empty),
        (
            "periodic",
            FamilySpec::Periodic {
                period: 1.0,
                first: None,
            },
        ),
        (
            "dwell",
            FamilySpec::Dwell {
                min_dwell: 0.5,
                spread: 1.0,
            },
        ),
        (
            "finite_random",
            FamilySpec::FiniteRandom {
                count: 5,
                span: 10.0,
            },
        ),
        (
            "zeno_approaching",
            FamilySpec::ZenoApproaching {
                first_gap: 1.0,
                floor_gap: 0.1,
                ratio: 0.7,
            },
        ),
        ("rate_sweep", FamilySpec::RateSweep { max_rate: 64 }),
    ]
}

/// A sampled interval whose jump count exceeds the envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UibViolation {
    pub seed: u64,
    pub t0: f64,
    pub t: f64,
    pub count: usize,
    pub phi_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UibReport {
    pub pass: bool,
    pub samples: usize,
    pub intervals_checked: usize,
    pub violation: Option<UibViolation>,
}

const RANDOM_INTERVALS_PER_SAMPLE: usize = 32;

/// Samples sequences from `family` and checks `n_{(t0,t]} ≤ φ(t − t0)` on
/// random intervals and on every interval that starts just before one jump
/// and ends at another (the count-maximizing intervals).
pub fn uib_check(
    family: &ImpulseFamily,
    phi: &NondecreasingFn,
    sample_count: usize,
    horizon: f64,
    seed: u64,
) -> Result<UibReport> {
    let mut intervals = 0usize;
    for i in 0..sample_count {
        let sample_seed = seed.wrapping_add(i as u64);
        let times = family.sample(sample_seed, horizon)?.materialize(horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed ^ 0x9e37_79b9_7f4a_7c15);
        let violation = |t0: f64, t: f64, count: usize| {
            let phi_value = phi.eval(t - t0);
            (count as f64 > phi_value).then_some(UibViolation {
                seed: sample_seed,
                t0,
                t,
                count,
                phi_value,
            })
        };
        for _ in 0..RANDOM_INTERVALS_PER_SAMPLE {
            let a = horizon * rng.gen::<f64>();
            let b = horizon * rng.gen::<f64>();
            let (t0, t) = if a <= b { (a, b) } else { (b, a) };
            intervals += 1;
            if let Some(v) = violation(t0, t, count_in(&times, t0, t)) {
                return Ok(UibReport {
                    pass: false,
                    samples: i + 1,
                    intervals_checked: intervals,
                    violation: Some(v),
                });
            }
        }
        for k in 0..times.len() {
            let t0 = times[k] - 1e-12 * times[k].max(1.0);
            for (j, &t) in times.iter().enumerate().skip(k) {
                intervals += 1;
                if let Some(v) = violation(t0, t, j - k + 1) {
                    return Ok(UibReport {
                        pass: false,
                        samples: i + 1,
                        intervals_checked: intervals,
                        violation: Some(v),
                    });
                }
            }
        }
    }
    Ok(UibReport {
        pass: true,
        samples: sample_count,
        intervals_checked: intervals,
        violation: None,
    })
}
