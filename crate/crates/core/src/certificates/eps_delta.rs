use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::falsify::{FalsifyRanges, Trial, TrialGenerator};
use super::{tolerance, CheckOptions, CheckReport, Verdict, Witness};
use crate::comparison::{ComparisonFn, ComparisonSpec, FnClass};
use crate::error::{Error, Result};
use crate::impulses::ImpulseFamily;
use crate::inputs::{energy_norm, euclidean_norm, EnergyProfile, HybridInput};
use crate::simulate::{simulate, Trajectory};
use crate::system::ImpulsiveSystem;

/// Grids and sampling ranges for the three ε-δ conditions. `budget` in
/// [`check_eps_delta_conditions`] is the number of trials per grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsDeltaConfig {
    pub t_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Candidate `α̃` for the convergence condition.
    pub alpha_tilde: ComparisonSpec,
    pub horizon: f64,
    pub step: f64,
    pub t0_max: f64,
    pub u_max: f64,
    pub u_duration_max: f64,
    pub delta0: f64,
    pub max_halvings: usize,
}

impl Default for EpsDeltaConfig {
    fn default() -> Self {
        EpsDeltaConfig {
            t_grid: vec![1.0, 5.0, 10.0],
            r_grid: vec![1.0, 10.0],
            s_grid: vec![1.0, 10.0],
            eps_grid: vec![0.1, 1.0],
            alpha_tilde: ComparisonSpec::Identity,
            horizon: 20.0,
            step: 0.01,
            t0_max: 5.0,
            u_max: 1.0,
            u_duration_max: 5.0,
            delta0: 1.0,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundEntry {
    pub t: f64,
    pub r: f64,
    pub s: f64,
    /// `max |x(t)|` over samples with strong time `≤ T`; `None` if unbounded
    /// (diverged or non-finite).
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub eps: f64,
    /// Largest tried `δ` with no violation; `None` if every `δ` failed.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub r: f64,
    pub eps: f64,
    /// Last strong time at which `α̃(|x|) > ε + ‖w‖`; `None` if the
    /// violation persisted to the end of some trajectory.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsDeltaReport {
    pub bounded: CheckReport,
    pub bounded_grid: Vec<BoundEntry>,
    pub small: CheckReport,
    pub small_grid: Vec<DeltaEntry>,
    pub convergence: CheckReport,
    pub convergence_grid: Vec<ConvergenceEntry>,
}

fn strong_time(traj: &Trajectory, t: f64, jumps: usize) -> f64 {
    t - traj.t0() + jumps as f64
}

/// Scales the input so that `‖w_(t0,end]‖ ≤ budget`.
fn scale_energy(
    w: &HybridInput,
    rho: (&ComparisonFn, &ComparisonFn),
    t0: f64,
    end: f64,
    budget: f64,
) -> Result<HybridInput> {
    let energy = |k: f64| -> Result<f64> {
        let scaled = HybridInput::new(w.u.scaled(k), w.sigma.clone());
        energy_norm(&scaled, rho.0, rho.1, t0, end)
    };
    if energy(1.0)? <= budget {
        return Ok(w.clone());
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if energy(mid)? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(HybridInput::new(w.u.scaled(lo), w.sigma.clone()))
}

fn ranges_for(cfg: &EpsDeltaConfig, x0_max: f64, horizon: f64) -> FalsifyRanges {
    FalsifyRanges {
        t0_max: cfg.t0_max,
        x0_max,
        u_max: cfg.u_max,
        u_duration_max: cfg.u_duration_max,
        horizon,
        step: cfg.step,
    }
}

struct Sample {
    trial: Trial,
    w: HybridInput,
    traj: Result<Trajectory>,
}

/// Runs `budget` trials with `|x0| ≤ x0_max` and, if `energy_cap` is set,
/// inputs scaled to that energy over the simulated window.
#[allow(clippy::too_many_arguments)]
fn sample_trajectories(
    system: &ImpulsiveSystem,
    family: &ImpulseFamily,
    rho: (&ComparisonFn, &ComparisonFn),
    ranges: &FalsifyRanges,
    energy_cap: Option<f64>,
    budget: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    let zero_input = energy_cap == Some(0.0);
    let gen = TrialGenerator::new(system, family, ranges, seed, zero_input)?;
    (0..budget)
        .into_par_iter()
        .map(|i| {
            let trial = gen.trial(i)?;
            let w = match energy_cap {
                Some(cap) => scale_energy(&trial.w, rho, trial.t0, trial.horizon, cap)?,
                None => trial.w.clone(),
            };
            let traj = simulate(system, trial.t0, &trial.x0, &w, trial.horizon, ranges.step);
            Ok(Sample { trial, w, traj })
        })
        .collect()
}

fn witness_for(s: &Sample, traj: &Trajectory, t: f64, left_limit: bool, lhs: f64, rhs: f64, step: f64) -> Result<Witness> {
    Ok(Witness {
        t0: s.trial.t0,
        x0: s.trial.x0.clone(),
        input: s.w.u.clone(),
        sigma: s.w.sigma.materialize(traj.horizon())?,
        horizon: traj.horizon(),
        step: Some(step),
        t,
        left_limit,
        lhs,
        rhs,
        seed: Some(s.trial.seed),
        trial: Some(s.trial.index),
    })
}

/// Empirical checks of the three ε-δ conditions:
///
/// 1. boundedness: `C(T, r, s) = max |x(t)|` over `|x0| ≤ r`, `‖w‖ ≤ s` and
///    strong time `≤ T` is finite;
/// 2. smallness: for each `ε` the largest `δ ∈ {δ0, δ0/2, …}` such that
///    `|x0| ≤ δ`, `‖w‖ ≤ δ` kept `|x(t)| ≤ ε`;
/// 3. convergence: for each `(r, ε)` a strong time after which
///    `α̃(|x(t)|) ≤ ε + ‖w_(t0,t]‖` held.
///
/// All constants are estimates from `budget` trials per grid cell; a pass
/// only means no counterexample was found.
pub fn check_eps_delta_conditions(
    system: &ImpulsiveSystem,
    gain: (&ComparisonFn, &ComparisonFn),
    family: &ImpulseFamily,
    cfg: &EpsDeltaConfig,
    budget: usize,
    seed: u64,
) -> Result<EpsDeltaReport> {
    let alpha_tilde = cfg.alpha_tilde.build_kinf()?;
    let opts = CheckOptions::default();

    // (i) boundedness
    let mut bounded = CheckReport::empty(Verdict::Pass);
    let mut bounded_grid = Vec::new();
    for (ti, &big_t) in cfg.t_grid.iter().enumerate() {
        for (ri, &r) in cfg.r_grid.iter().enumerate() {
            for (si, &s) in cfg.s_grid.iter().enumerate() {
                let cell_seed = seed ^ ((ti as u64) << 40 | (ri as u64) << 20 | si as u64);
                let ranges = ranges_for(cfg, r, big_t);
                let samples = sample_trajectories(system, family, gain, &ranges, Some(s), budget, cell_seed)?;
                let mut c = Some(0.0_f64);
                for smp in &samples {
                    bounded.trials += 1;
                    match &smp.traj {
                        Ok(traj) if traj.status() == crate::simulate::TrajectoryStatus::Complete => {
                            for p in traj.eval_points() {
                                if strong_time(traj, p.t, p.jumps) <= big_t {
                                    bounded.samples += 1;
                                    c = c.map(|c| c.max(euclidean_norm(p.x)));
                                }
                            }
                        }
                        Ok(traj) => {
                            c = None;
                            if bounded.witness.is_none() {
                                let x = euclidean_norm(traj.last_state());
                                let t = traj.time(traj.len() - 1);
                                bounded.witness = Some(witness_for(smp, traj, t, false, x, f64::INFINITY, cfg.step)?);
                            }
                        }
                        Err(_) => c = None,
                    }
                }
                if c.is_none() {
                    bounded.verdict = Verdict::Violated;
                }
                bounded_grid.push(BoundEntry { t: big_t, r, s, c });
            }
        }
    }
    if bounded.verdict == Verdict::Pass {
        bounded.notes.push("every C(T, r, s) finite on the sampled grid".into());
    }

    // (ii) smallness
    let mut small = CheckReport::empty(Verdict::Pass);
    let mut small_grid = Vec::new();
    for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
        let mut delta = cfg.delta0;
        let mut found = None;
        let mut last_witness = None;
        for k in 0..=cfg.max_halvings {
            let ranges = ranges_for(cfg, delta, cfg.horizon);
            let cell_seed = seed ^ ((ei as u64) << 32 | k as u64) ^ 0x5_0000_0000_0000;
            let samples = sample_trajectories(system, family, gain, &ranges, Some(delta), budget, cell_seed)?;
            let mut ok = true;
            'trials: for smp in &samples {
                small.trials += 1;
                let Ok(traj) = &smp.traj else {
                    ok = false;
                    break;
                };
                for p in traj.eval_points() {
                    small.samples += 1;
                    let x = euclidean_norm(p.x);
                    small.worst_margin = small.worst_margin.min(eps - x);
                    if x > eps + tolerance(eps, &opts) {
                        ok = false;
                        last_witness = Some(witness_for(smp, traj, p.t, p.left_limit, x, eps, cfg.step)?);
                        break 'trials;
                    }
                }
            }
            if ok {
                found = Some(delta);
                break;
            }
            delta /= 2.0;
        }
        if found.is_none() {
            small.verdict = Verdict::Violated;
            small.witness = small.witness.take().or(last_witness);
        }
        small_grid.push(DeltaEntry { eps, delta: found });
    }
    small.worst_margin = f64::INFINITY;
    if small.verdict == Verdict::Pass {
        small.notes.push("a positive δ was found for every ε".into());
    }

    // (iii) convergence
    let mut convergence = CheckReport::empty(Verdict::Pass);
    let mut convergence_grid = Vec::new();
    for (ri, &r) in cfg.r_grid.iter().enumerate() {
        for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
            let ranges = ranges_for(cfg, r, cfg.horizon);
            let cell_seed = seed ^ ((ri as u64) << 24 | ei as u64) ^ 0xC_0000_0000_0000;
            let samples = sample_trajectories(system, family, gain, &ranges, None, budget, cell_seed)?;
            let mut t_re = Some(0.0_f64);
            for smp in &samples {
                convergence.trials += 1;
                let traj = match &smp.traj {
                    Ok(t) => t,
                    Err(_) => {
                        t_re = None;
                        continue;
                    }
                };
                let energy = EnergyProfile::new(&smp.w, gain.0, gain.1, traj.t0(), traj.horizon())?;
                let pts = traj.eval_points();
                let mut last: Option<(usize, f64, f64)> = None;
                for (k, p) in pts.iter().enumerate() {
                    convergence.samples += 1;
                    let e = if p.left_limit { energy.before(p.t) } else { energy.upto(p.t) };
                    let lhs = alpha_tilde.eval(euclidean_norm(p.x))?;
                    if lhs > eps + e + tolerance(eps + e, &opts) {
                        last = Some((k, lhs, eps + e));
                    }
                }
                match last {
                    Some((k, lhs, rhs)) if k + 1 == pts.len() => {
                        t_re = None;
                        if convergence.witness.is_none() {
                            let p = &pts[k];
                            convergence.witness = Some(witness_for(smp, traj, p.t, p.left_limit, lhs, rhs, cfg.step)?);
                        }
                    }
                    Some((k, _, _)) => {
                        let s = strong_time(traj, pts[k].t, pts[k].jumps);
                        t_re = t_re.map(|t| t.max(s));
                    }
                    None => {}
                }
            }
            if t_re.is_none() {
                convergence.verdict = Verdict::Violated;
            }
            convergence_grid.push(ConvergenceEntry { r, eps, t: t_re });
        }
    }
    if convergence.verdict == Verdict::Pass {
        convergence
            .notes
            .push("every violation of the convergence bound ended within the horizon".into());
    }

    Ok(EpsDeltaReport {
        bounded,
        bounded_grid,
        small,
        small_grid,
        convergence,
        convergence_grid,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreEstimate {
    pub r: f64,
    pub eps: f64,
    /// Last strong time at which `α(|x|) > ε + ‖w‖` was observed (0 if
    /// never). When saturated, the largest strong time simulated.
    pub value: f64,
    pub saturated: bool,
    pub verdict: Verdict,
    pub trials: usize,
}

/// Empirical `T(r, ε)`: the least strong time after which
/// `α(|x(t)|) ≤ ε + ‖w_(t0,t]‖` held on every sampled trajectory with
/// `|x0| ≤ r`. Saturates (verdict inconclusive) if a violation lasts to the
/// end of the simulation.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tre(
    system: &ImpulsiveSystem,
    family: &ImpulseFamily,
    alpha: &ComparisonFn,
    gain: (&ComparisonFn, &ComparisonFn),
    r: f64,
    eps: f64,
    ranges: &FalsifyRanges,
    budget: usize,
    seed: u64,
) -> Result<TreEstimate> {
    alpha.require_kinf()?;
    if !(eps > 0.0 && r >= 0.0) {
        return Err(Error::Invalid(format!("need r >= 0 and eps > 0 (got {r}, {eps})")));
    }
    let ranges = FalsifyRanges { x0_max: r, ..ranges.clone() };
    let samples = sample_trajectories(system, family, gain, &ranges, None, budget, seed)?;
    let opts = CheckOptions::default();
    let mut est = TreEstimate {
        r,
        eps,
        value: 0.0,
        saturated: false,
        verdict: Verdict::Pass,
        trials: 0,
    };
    let mut reached: f64 = 0.0;
    for smp in &samples {
        est.trials += 1;
        let traj = match &smp.traj {
            Ok(t) => t,
            Err(_) => {
                est.saturated = true;
                continue;
            }
        };
        let energy = EnergyProfile::new(&smp.w, gain.0, gain.1, traj.t0(), traj.horizon())?;
        let pts = traj.eval_points();
        let mut last = None;
        for (k, p) in pts.iter().enumerate() {
            let e = if p.left_limit { energy.before(p.t) } else { energy.upto(p.t) };
            let s = strong_time(traj, p.t, p.jumps);
            reached = reached.max(s);
            if alpha.eval(euclidean_norm(p.x))? > eps + e + tolerance(eps + e, &opts) {
                last = Some((k, s));
            }
        }
        match last {
            Some((k, _)) if k + 1 == pts.len() => est.saturated = true,
            Some((_, s)) => est.value = est.value.max(s),
            None => {}
        }
    }
    if est.saturated {
        est.value = reached;
        est.verdict = Verdict::Inconclusive;
    }
    Ok(est)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreGrid {
    pub entries: Vec<TreEstimate>,
    /// Within each `ε`, estimates do not decrease as `r` grows.
    pub nondecreasing_in_r: bool,
    /// Within each `r`, estimates do not increase as `ε` grows.
    pub nonincreasing_in_eps: bool,
}

/// [`estimate_tre`] over an `(r, ε)` grid, with monotonicity flags. The
/// same seed is used in every cell.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tre_grid(
    system: &ImpulsiveSystem,
    family: &ImpulseFamily,
    alpha: &ComparisonFn,
    gain: (&ComparisonFn, &ComparisonFn),
    r_grid: &[f64],
    eps_grid: &[f64],
    ranges: &FalsifyRanges,
    budget: usize,
    seed: u64,
) -> Result<TreGrid> {
    let mut rs = r_grid.to_vec();
    rs.sort_by(f64::total_cmp);
    let mut es = eps_grid.to_vec();
    es.sort_by(f64::total_cmp);
    let mut entries = Vec::new();
    for &r in &rs {
        for &eps in &es {
            entries.push(estimate_tre(system, family, alpha, gain, r, eps, ranges, budget, seed)?);
        }
    }
    let at = |i: usize, j: usize| entries[i * es.len() + j].value;
    let slack = |a: f64| 1e-9 * (1.0 + a.abs()) + ranges.step;
    let nondecreasing_in_r = (0..es.len())
        .all(|j| (1..rs.len()).all(|i| at(i, j) + slack(at(i - 1, j)) >= at(i - 1, j)));
    let nonincreasing_in_eps = (0..rs.len())
        .all(|i| (1..es.len()).all(|j| at(i, j) <= at(i, j - 1) + slack(at(i, j - 1))));
    Ok(TreGrid {
        entries,
        nondecreasing_in_r,
        nonincreasing_in_eps,
    })
}

/// A `K∞` majorant of sampled values `(r, ā(r))` of a nondecreasing
/// function: `α̂(r) = r + ` piecewise-linear interpolation of the running
/// maximum, constant past the last sample.
pub fn majorize_kinf(points: &[(f64, f64)]) -> Result<ComparisonFn> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(r, v)| *r > 0.0 && r.is_finite() && v.is_finite())
        .collect();
    if pts.is_empty() {
        return Ok(ComparisonFn::identity());
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut knots = vec![(0.0, 0.0)];
    let mut running = 0.0_f64;
    for (r, v) in pts {
        running = running.max(v.max(0.0));
        knots.push((r, running));
    }
    ComparisonFn::new("majorant", FnClass::KInf, 1e6, move |r| {
        let i = knots.partition_point(|k| k.0 <= r);
        let pl = if i >= knots.len() {
            knots[knots.len() - 1].1
        } else {
            let (a, b) = (knots[i - 1], knots[i]);
            a.1 + (b.1 - a.1) * (r - a.0) / (b.0 - a.0)
        };
        r + pl
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SystemConfig;

    fn scalar(flow: &str, jump: &str) -> ImpulsiveSystem {
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

    fn small_cfg() -> EpsDeltaConfig {
        EpsDeltaConfig {
            t_grid: vec![1.0, 3.0],
            r_grid: vec![0.0, 1.0],
            s_grid: vec![0.0, 1.0],
            eps_grid: vec![0.5],
            horizon: 8.0,
            step: 0.02,
            ..Default::default()
        }
    }

    #[test]
    fn contracting_system_has_finite_constants() {
        let sys = scalar("-x1 + u1", "-x1 / 2");
        let id = ComparisonFn::identity();
        let fam = ImpulseFamily::periodic(1.0, None).unwrap();
        let rep = check_eps_delta_conditions(&sys, (&id, &id), &fam, &small_cfg(), 12, 5).unwrap();
        assert_eq!(rep.bounded.verdict, Verdict::Pass);
        assert_eq!(rep.small.verdict, Verdict::Pass);
        assert_eq!(rep.convergence.verdict, Verdict::Pass, "{:?}", rep.convergence_grid);
        let zero_cell = rep.bounded_grid.iter().find(|e| e.r == 0.0 && e.s == 0.0).unwrap();
        assert_eq!(zero_cell.c, Some(0.0));
        assert!(rep.small_grid.iter().all(|d| d.delta.is_some_and(|d| d > 0.0)));
    }

    #[test]
    fn zero_system_fails_convergence() {
        let sys = scalar("0", "0");
        let id = ComparisonFn::identity();
        let cfg = EpsDeltaConfig {
            r_grid: vec![1.0],
            eps_grid: vec![0.1],
            u_max: 0.0,
            ..small_cfg()
        };
        let rep = check_eps_delta_conditions(&sys, (&id, &id), &ImpulseFamily::empty(), &cfg, 6, 1).unwrap();
        assert_eq!(rep.convergence.verdict, Verdict::Violated);
        assert!(rep.convergence.witness.is_some());
        assert!(rep.convergence_grid[0].t.is_none());
    }

    #[test]
    fn tre_for_exponential_decay() {
        let sys = scalar("-x1", "0");
        let id = ComparisonFn::identity();
        let ranges = FalsifyRanges { u_max: 0.0, horizon: 8.0, ..Default::default() };
        let e = estimate_tre(&sys, &ImpulseFamily::empty(), &id, (&id, &id), 5.0, 0.1, &ranges, 9, 2).unwrap();
        assert_eq!(e.verdict, Verdict::Pass);
        assert!((e.value - (50.0f64).ln()).abs() < 0.05, "{}", e.value);

        let big = estimate_tre(&sys, &ImpulseFamily::empty(), &id, (&id, &id), 5.0, 6.0, &ranges, 9, 2).unwrap();
        assert_eq!(big.value, 0.0);

        let unstable = scalar("-x1", "x1");
        let fam = ImpulseFamily::periodic(0.1, None).unwrap();
        let ranges = FalsifyRanges { u_max: 0.0, horizon: 2.0, ..Default::default() };
        let e = estimate_tre(&unstable, &fam, &id, (&id, &id), 1.0, 0.1, &ranges, 6, 2).unwrap();
        assert!(e.saturated);
        assert_eq!(e.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn tre_grid_monotone() {
        let sys = scalar("-x1", "0");
        let id = ComparisonFn::identity();
        let ranges = FalsifyRanges { u_max: 0.0, horizon: 8.0, ..Default::default() };
        let g = estimate_tre_grid(&sys, &ImpulseFamily::empty(), &id, (&id, &id), &[1.0, 3.0], &[0.1, 0.5], &ranges, 6, 4)
            .unwrap();
        assert!(g.nondecreasing_in_r && g.nonincreasing_in_eps);
    }

    #[test]
    fn majorant_dominates_samples() {
        let pts = [(1.0, 2.0), (0.5, 0.1), (3.0, 1.0), (4.0, 7.0)];
        let a = majorize_kinf(&pts).unwrap();
        assert_eq!(a.class(), FnClass::KInf);
        for (r, v) in pts {
            assert!(a.eval(r).unwrap() >= v);
        }
        assert_eq!(a.eval(0.0).unwrap(), 0.0);
    }
}
