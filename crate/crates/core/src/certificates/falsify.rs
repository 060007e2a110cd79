use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check, Certificate, CheckOptions, CheckReport, Verdict, Witness};
use crate::error::{Error, Result};
use crate::impulses::{ImpulseFamily, ImpulseSequence};
use crate::inputs::{euclidean_norm, HybridInput, InputSignal};
use crate::simulate::{simulate, TrajectoryStatus};
use crate::system::ImpulsiveSystem;

/// Trials run in parallel in chunks of this size; the first violation by
/// trial index wins, so results do not depend on scheduling.
const CHUNK: usize = 64;

/// Bounds on the sampled quantifier domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FalsifyRanges {
    pub t0_max: f64,
    pub x0_max: f64,
    pub u_max: f64,
    pub u_duration_max: f64,
    /// Simulated time after `t0`.
    pub horizon: f64,
    pub step: f64,
}

impl Default for FalsifyRanges {
    fn default() -> Self {
        FalsifyRanges {
            t0_max: 5.0,
            x0_max: 5.0,
            u_max: 1.0,
            u_duration_max: 5.0,
            horizon: 10.0,
            step: 0.01,
        }
    }
}

impl FalsifyRanges {
    fn validate(&self) -> Result<()> {
        let ok = self.t0_max >= 0.0
            && self.x0_max >= 0.0
            && self.u_max >= 0.0
            && self.u_duration_max >= 0.0
            && self.horizon > 0.0
            && self.step > 0.0
            && [self.t0_max, self.x0_max, self.u_max, self.u_duration_max, self.horizon]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("bad sampling ranges: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Uniform,
    LowDiscrepancy,
    /// `|x0|` at the range limit, `t0` just before an impulse, input pulses
    /// straddling the impulse times.
    Adversarial,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub kind: TrialKind,
    pub t0: f64,
    pub x0: Vec<f64>,
    pub w: HybridInput,
    pub horizon: f64,
}

/// Reproducible sampler of `(t0, x0, u, σ)`; trial `i` depends only on
/// `(seed, i)`.
#[derive(Debug, Clone)]
pub struct TrialGenerator {
    dim_x: usize,
    dim_u: usize,
    family: ImpulseFamily,
    ranges: FalsifyRanges,
    seed: u64,
    zero_input: bool,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut inv, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        inv += (i % base) as f64 * f;
        i /= base;
        f /= base as f64;
    }
    inv
}

/// SplitMix64 finalizer, to decorrelate per-trial seeds.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl TrialGenerator {
    pub fn new(
        system: &ImpulsiveSystem,
        family: &ImpulseFamily,
        ranges: &FalsifyRanges,
        seed: u64,
        zero_input: bool,
    ) -> Result<Self> {
        ranges.validate()?;
        Ok(TrialGenerator {
            dim_x: system.dim_x(),
            dim_u: system.dim_u(),
            family: family.clone(),
            ranges: ranges.clone(),
            seed,
            zero_input: zero_input || system.dim_u() == 0 || ranges.u_max == 0.0,
        })
    }

    pub fn ranges(&self) -> &FalsifyRanges {
        &self.ranges
    }

    pub fn trial(&self, index: usize) -> Result<Trial> {
        let seed = mix(self.seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = match index % 3 {
            0 => TrialKind::Uniform,
            1 => TrialKind::LowDiscrepancy,
            _ => TrialKind::Adversarial,
        };
        let coords: [f64; 4] = match kind {
            TrialKind::LowDiscrepancy => {
                let k = (index / 3 + 1) as u64;
                [2, 3, 5, 7].map(|b| radical_inverse(k, b))
            }
            _ => [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
        };
        let r = &self.ranges;
        let sigma = self.family.sample(seed, r.t0_max + r.horizon)?;
        let early = sigma.materialize(r.t0_max)?;

        let t0 = match (kind, early.is_empty()) {
            (TrialKind::Adversarial, false) => {
                let tau = early[rng.gen_range(0..early.len())];
                (tau - 1e-6 * tau.max(1.0)).max(0.0)
            }
            _ => coords[0] * r.t0_max,
        };
        let norm = match kind {
            TrialKind::Adversarial => r.x0_max,
            _ => coords[1] * r.x0_max,
        };
        let x0 = self.direction(&mut rng, self.dim_x).into_iter().map(|d| d * norm).collect();

        let u = if self.zero_input {
            InputSignal::zero(self.dim_u)
        } else {
            match kind {
                TrialKind::Adversarial => self.pulses_at_jumps(&mut rng, &sigma, t0)?,
                _ => self.random_pieces(&mut rng, t0, coords[2] * r.u_max, coords[3] * r.u_duration_max)?,
            }
        };
        Ok(Trial {
            index,
            seed,
            kind,
            t0,
            x0,
            w: HybridInput::new(u, sigma),
            horizon: t0 + r.horizon,
        })
    }

    fn direction(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = euclidean_norm(&v);
            if n > 1e-12 || dim == 0 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    fn random_pieces(&self, rng: &mut ChaCha8Rng, t0: f64, amp: f64, duration: f64) -> Result<InputSignal> {
        if duration <= 0.0 || amp <= 0.0 {
            return Ok(InputSignal::zero(self.dim_u));
        }
        let pieces = rng.gen_range(1..=4);
        let mut cuts: Vec<f64> = (1..pieces).map(|_| t0 + rng.gen::<f64>() * duration).collect();
        cuts.push(t0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut values: Vec<Vec<f64>> = cuts
            .iter()
            .map(|_| {
                let scale = amp * rng.gen::<f64>();
                self.direction(rng, self.dim_u).into_iter().map(|d| d * scale).collect()
            })
            .collect();
        cuts.push(t0 + duration);
        values.push(vec![0.0; self.dim_u]);
        InputSignal::from_pieces(self.dim_u, cuts, values)
    }

    fn pulses_at_jumps(&self, rng: &mut ChaCha8Rng, sigma: &ImpulseSequence, t0: f64) -> Result<InputSignal> {
        let r = &self.ranges;
        let end = t0 + r.u_duration_max.min(r.horizon);
        let jumps: Vec<f64> = sigma.materialize(end)?.into_iter().filter(|&t| t > t0).collect();
        if jumps.is_empty() {
            let v = self.direction(rng, self.dim_u).into_iter().map(|d| d * r.u_max).collect();
            return InputSignal::from_pieces(self.dim_u, vec![t0, end], vec![v, vec![0.0; self.dim_u]]);
        }
        let min_gap = jumps
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(std::iter::once(jumps[0] - t0))
            .fold(f64::INFINITY, f64::min);
        let half = (0.25 * min_gap).min(0.05);
        let (mut bps, mut vals) = (Vec::new(), Vec::new());
        for &tau in &jumps {
            bps.push(tau - half);
            vals.push(self.direction(rng, self.dim_u).into_iter().map(|d| d * r.u_max).collect());
            bps.push(tau + half);
            vals.push(vec![0.0; self.dim_u]);
        }
        InputSignal::from_pieces(self.dim_u, bps, vals)
    }
}

struct Outcome {
    index: usize,
    seed: u64,
    report: Result<CheckReport>,
    diverged: bool,
}

fn run_trial(
    gen: &TrialGenerator,
    index: usize,
    cert: &Certificate,
    system: &ImpulsiveSystem,
    opts: &CheckOptions,
) -> Outcome {
    let mut diverged = false;
    let report = gen.trial(index).and_then(|trial| {
        let traj = simulate(system, trial.t0, &trial.x0, &trial.w, trial.horizon, gen.ranges.step)?;
        diverged = traj.status() == TrajectoryStatus::Diverged;
        check(cert, &traj, &trial.w, opts)
    });
    Outcome {
        index,
        seed: mix(gen.seed, index as u64),
        report,
        diverged,
    }
}

/// Randomized search over `(t0, x0, u, σ)` for a trajectory violating `cert`.
///
/// Stops at the first violation (by trial index). A pass means no violation
/// was found within `budget` trials.
pub fn falsify(
    cert: &Certificate,
    system: &ImpulsiveSystem,
    family: &ImpulseFamily,
    budget: usize,
    ranges: &FalsifyRanges,
    seed: u64,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    search(cert, system, family, budget, ranges, seed, opts, true)
}

/// Like [`falsify`] but always runs the whole budget, so `worst_margin`
/// covers every trial; the witness is still the first violation.
pub fn sampled_check(
    cert: &Certificate,
    system: &ImpulsiveSystem,
    family: &ImpulseFamily,
    budget: usize,
    ranges: &FalsifyRanges,
    seed: u64,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    search(cert, system, family, budget, ranges, seed, opts, false)
}

#[allow(clippy::too_many_arguments)]
fn search(
    cert: &Certificate,
    system: &ImpulsiveSystem,
    family: &ImpulseFamily,
    budget: usize,
    ranges: &FalsifyRanges,
    seed: u64,
    opts: &CheckOptions,
    stop_early: bool,
) -> Result<CheckReport> {
    let gen = TrialGenerator::new(system, family, ranges, seed, cert.needs_zero_input())?;
    let mut report = CheckReport::empty(Verdict::Pass);
    let (mut failed, mut diverged) = (0usize, 0usize);
    let mut first_error: Option<String> = None;
    let mut start = 0;
    while start < budget {
        let end = (start + CHUNK).min(budget);
        let outcomes: Vec<Outcome> = (start..end)
            .into_par_iter()
            .map(|i| run_trial(&gen, i, cert, system, opts))
            .collect();
        for o in outcomes {
            report.trials += 1;
            diverged += o.diverged as usize;
            match o.report {
                Ok(r) => {
                    report.samples += r.samples;
                    report.worst_margin = report.worst_margin.min(r.worst_margin);
                    if r.verdict == Verdict::Violated && report.witness.is_none() {
                        let mut w = r.witness.expect("violations carry a witness");
                        w.seed = Some(o.seed);
                        w.trial = Some(o.index);
                        w.step = Some(ranges.step);
                        report.verdict = Verdict::Violated;
                        report.witness = Some(w);
                        if stop_early {
                            break;
                        }
                    }
                }
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert_with(|| format!("trial {}: {e}", o.index));
                }
            }
        }
        if stop_early && report.verdict == Verdict::Violated {
            break;
        }
        start = end;
    }
    if report.verdict == Verdict::Pass {
        if report.trials == failed {
            report.verdict = Verdict::Inconclusive;
            report.notes.push("no trial could be evaluated".into());
        } else {
            report
                .notes
                .push(format!("no violation found within {} trials", report.trials));
        }
    }
    if failed > 0 {
        report.notes.push(format!(
            "{failed} trial(s) could not be simulated; first: {}",
            first_error.unwrap_or_default()
        ));
    }
    if diverged > 0 {
        report
            .notes
            .push(format!("{diverged} trajectory(ies) diverged and were checked up to divergence"));
    }
    Ok(report)
}

/// Re-simulates a witness and re-runs the checker on it.
pub fn replay(
    witness: &Witness,
    cert: &Certificate,
    system: &ImpulsiveSystem,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let step = witness
        .step
        .ok_or_else(|| Error::Invalid("witness has no step size".into()))?;
    let sigma = if witness.sigma.is_empty() {
        ImpulseSequence::empty()
    } else {
        ImpulseSequence::finite(witness.sigma.clone())?
    };
    let w = HybridInput::new(witness.input.clone(), sigma);
    let traj = simulate(system, witness.t0, &witness.x0, &w, witness.horizon, step)?;
    check(cert, &traj, &w, opts)
}
