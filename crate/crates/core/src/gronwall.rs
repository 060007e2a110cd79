//! Gronwall inequality with jumps, and the parametric iISS-type bound
//! evaluated from caller-supplied constants.

use serde::Serialize;

use crate::comparison::KlFn;
use crate::error::{Error, Result};
use crate::impulses::{count_jumps, ImpulseSequence};
use crate::simulate::Trajectory;

#[derive(Debug, Clone)]
pub struct GronwallData {
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    pub sigma: ImpulseSequence,
    pub t0: f64,
}

impl GronwallData {
    pub fn new(p: f64, q1: f64, q2: f64, sigma: ImpulseSequence, t0: f64) -> Result<Self> {
        if !(q1 >= 0.0 && q2 >= 0.0) || !p.is_finite() || !q1.is_finite() || !q2.is_finite() {
            return Err(Error::Invalid(format!(
                "need finite p and q1, q2 >= 0 (got p = {p}, q1 = {q1}, q2 = {q2})"
            )));
        }
        Ok(GronwallData { p, q1, q2, sigma, t0 })
    }
}

/// `p (1 + q2)^n e^{q1 (t − t0)}` with `n` the jumps in `(t0, t]`.
pub fn gronwall_bound(data: &GronwallData, t: f64) -> Result<f64> {
    let n = count_jumps(&data.sigma, data.t0, t)?;
    Ok(bound_with_count(data, t, n))
}

fn bound_with_count(data: &GronwallData, t: f64, n: usize) -> f64 {
    data.p * (1.0 + data.q2).powi(n as i32) * (data.q1 * (t - data.t0)).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallReport {
    /// True when no sample exceeds the bound by more than the tolerance.
    pub pass: bool,
    pub samples: usize,
    pub tol: f64,
    /// `min(bound − y)` over the samples.
    pub worst_slack: f64,
    pub worst_t: f64,
    /// Largest `|y − bound| / bound` over the samples (tightness measure).
    pub max_rel_gap: f64,
    pub p_negative: bool,
    pub notes: Vec<String>,
}

/// Checks the hypothesis `y(t) ≤ p + q1 ∫ y + q2 Σ y(τ⁻)` at every sample
/// (and left limit) of the scalar trajectory `y`, then compares `y` with
/// [`gronwall_bound`].
///
/// Fails with [`Error::HypothesisFailed`] when the hypothesis does not hold,
/// in which case nothing is concluded about the bound.
pub fn verify_gronwall(y: &Trajectory, data: &GronwallData, horizon: f64) -> Result<GronwallReport> {
    if y.dim() != 1 {
        return Err(Error::Invalid(format!(
            "verify_gronwall needs a scalar trajectory (got dimension {})",
            y.dim()
        )));
    }
    if y.t0() != data.t0 {
        return Err(Error::Invalid(format!(
            "trajectory starts at {} but the data has t0 = {}",
            y.t0(),
            data.t0
        )));
    }
    let points: Vec<_> = y
        .eval_points()
        .into_iter()
        .filter(|pt| pt.t <= horizon)
        .collect();
    let max_y = points.iter().map(|pt| pt.x[0].abs()).fold(0.0, f64::max);
    let tol = 1e-6 * (1.0 + data.p.abs() + max_y);
    let sigma_times = data.sigma.materialize(horizon)?;

    let mut integral = 0.0;
    let mut jump_sum = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut report = GronwallReport {
        pass: true,
        samples: 0,
        tol,
        worst_slack: f64::INFINITY,
        worst_t: data.t0,
        max_rel_gap: 0.0,
        p_negative: data.p < 0.0,
        notes: Vec::new(),
    };
    for pt in &points {
        let v = pt.x[0];
        if let Some((pt_t, pv)) = prev {
            integral += 0.5 * (pt.t - pt_t) * (pv + v);
        }
        let is_jump_post = !pt.left_limit && prev.is_some_and(|(s, _)| s == pt.t);
        if is_jump_post {
            // the preceding point was the left limit at this jump
            jump_sum += prev.unwrap().1;
        } else if !pt.left_limit && pt.t > data.t0 && sigma_times.binary_search_by(|s| s.total_cmp(&pt.t)).is_ok() {
            return Err(Error::Invalid(format!(
                "trajectory has no jump recorded at impulse time {}",
                pt.t
            )));
        }
        let hyp = data.p + data.q1 * integral + data.q2 * jump_sum;
        if v > hyp + tol {
            return Err(Error::HypothesisFailed { t: pt.t, lhs: v, rhs: hyp });
        }
        let bound = bound_with_count(data, pt.t, pt.jumps);
        let slack = bound - v;
        if slack < report.worst_slack {
            report.worst_slack = slack;
            report.worst_t = pt.t;
        }
        if bound != 0.0 {
            report.max_rel_gap = report.max_rel_gap.max((slack / bound).abs());
        }
        if v > bound + tol {
            report.pass = false;
        }
        report.samples += 1;
        prev = Some((pt.t, v));
    }
    if report.p_negative {
        report
            .notes
            .push("p < 0: the bound is sign-sensitive and tightness is not asserted".into());
    }
    Ok(report)
}

/// `β(|x0|, S) + [S η + κ E] (1 + L)^n e^{L (t − t0)}` with
/// `S = t − t0 + n` and `n` the jumps in `(t0, t]`.
#[allow(clippy::too_many_arguments)]
pub fn genlem3_rhs(
    beta: &KlFn,
    eta: f64,
    kappa: f64,
    l: f64,
    x0_norm: f64,
    t0: f64,
    t: f64,
    sigma: &ImpulseSequence,
    energy: f64,
) -> Result<f64> {
    if !(eta > 0.0 && kappa > 0.0 && l > 0.0) || !(x0_norm >= 0.0 && energy >= 0.0) {
        return Err(Error::Invalid(format!(
            "need eta, kappa, L > 0 and nonnegative |x0|, energy (got {eta}, {kappa}, {l}, {x0_norm}, {energy})"
        )));
    }
    let n = count_jumps(sigma, t0, t)?;
    let s = t - t0 + n as f64;
    let growth = (1.0 + l).powi(n as i32) * (l * (t - t0)).exp();
    Ok(beta.eval(x0_norm, s)? + (s * eta + kappa * energy) * growth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inputs::HybridInput;
    use crate::simulate::simulate;
    use crate::system::SystemConfig;
    use std::f64::consts::E;

    fn data(p: f64, q1: f64, q2: f64, times: Vec<f64>, t0: f64) -> GronwallData {
        GronwallData::new(p, q1, q2, ImpulseSequence::finite(times).unwrap(), t0).unwrap()
    }

    fn growth_traj(rate: f64, factor: f64, p: f64, d: &GronwallData, horizon: f64) -> Trajectory {
        let sys = SystemConfig {
            name: String::new(),
            dim_x: 1,
            dim_u: 0,
            flow: vec![format!("{rate} * x1")],
            jump: vec![format!("{} * x1", factor - 1.0)],
            envelopes: Default::default(),
        }
        .build()
        .unwrap();
        let w = HybridInput::zero(0, d.sigma.clone());
        simulate(&sys, d.t0, &[p], &w, horizon, 1e-3).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(gronwall_bound(&data(1.0, 0.0, 1.0, vec![1.0, 2.0, 3.0], 0.0), 3.0).unwrap(), 8.0);
        let d = data(1.0, 1.0, 0.0, vec![], 0.0);
        assert!((gronwall_bound(&d, 1.0).unwrap() - E).abs() < 1e-15);
        let d = data(2.0, 0.5, 0.5, vec![1.0], 0.0);
        assert!((gronwall_bound(&d, 2.0).unwrap() - 3.0 * E).abs() < 1e-14);
        assert!(matches!(gronwall_bound(&d, -1.0), Err(Error::InvalidInterval { .. })));
        assert!(GronwallData::new(1.0, -0.1, 0.0, ImpulseSequence::empty(), 0.0).is_err());
    }

    #[test]
    fn bound_is_multiplicative() {
        let sigma = ImpulseSequence::finite(vec![0.5, 1.5, 2.25, 4.0]).unwrap();
        let factor = |a: f64, c: f64| {
            let d = GronwallData::new(1.0, 0.3, 0.7, sigma.clone(), a).unwrap();
            gronwall_bound(&d, c).unwrap()
        };
        let whole = factor(0.0, 5.0);
        let split = factor(0.0, 2.25) * factor(2.25, 5.0);
        assert!((whole - split).abs() <= 1e-12 * whole);
    }

    #[test]
    fn extremal_solution_is_tight() {
        let d = data(1.5, 0.4, 0.8, vec![0.7, 1.9, 2.0, 3.3], 0.2);
        let y = growth_traj(0.4, 1.8, 1.5, &d, 4.0);
        let r = verify_gronwall(&y, &d, 4.0).unwrap();
        assert!(r.pass);
        assert!(r.max_rel_gap < 1e-6, "{}", r.max_rel_gap);
    }

    #[test]
    fn constant_has_zero_slack() {
        let d = data(2.0, 0.0, 0.0, vec![1.0], 0.0);
        let y = growth_traj(0.0, 1.0, 2.0, &d, 3.0);
        let r = verify_gronwall(&y, &d, 3.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_slack, 0.0);
    }

    #[test]
    fn slower_growth_has_strict_slack() {
        let d = data(1.0, 1.0, 0.0, vec![], 0.0);
        let y = growth_traj(0.5, 1.0, 1.0, &d, 2.0);
        let r = verify_gronwall(&y, &d, 2.0).unwrap();
        assert!(r.pass);
        let at_end = gronwall_bound(&d, 2.0).unwrap() - y.last_state()[0];
        assert!(at_end > 1.0);
    }

    #[test]
    fn hypothesis_failure_is_reported() {
        let d = data(1.0, 0.5, 0.0, vec![1.0], 0.0);
        let y = growth_traj(2.0, 1.0, 1.0, &d, 2.0);
        assert!(matches!(
            verify_gronwall(&y, &d, 2.0),
            Err(Error::HypothesisFailed { .. })
        ));
    }

    #[test]
    fn negative_p_is_flagged() {
        let d = data(-1.0, 0.0, 0.0, vec![], 0.0);
        let y = growth_traj(0.0, 1.0, -1.0, &d, 1.0);
        let r = verify_gronwall(&y, &d, 1.0).unwrap();
        assert!(r.p_negative && !r.notes.is_empty());
    }

    #[test]
    fn parametric_bound_examples() {
        let beta = KlFn::exp_decay(1.0, 1.0).unwrap();
        let one = ImpulseSequence::finite(vec![0.5]).unwrap();
        let v = genlem3_rhs(&beta, 0.1, 1.0, 1.0, 1.0, 0.0, 1.0, &one, 0.5).unwrap();
        let want = (-2.0f64).exp() + 0.7 * 2.0 * E;
        assert!((v - want).abs() < 1e-12);

        let none = ImpulseSequence::empty();
        let v = genlem3_rhs(&beta, 1e-12, 1.0, 1.0, 3.0, 0.0, 2.0, &none, 0.0).unwrap();
        assert!((v - 3.0 * (-2.0f64).exp()).abs() < 1e-10);

        let v = genlem3_rhs(&beta, 0.1, 2.0, 1.0, 3.0, 1.0, 1.0, &none, 0.25).unwrap();
        assert!((v - (3.0 + 0.5)).abs() < 1e-15);
        assert!(genlem3_rhs(&beta, 0.1, 2.0, 1.0, 3.0, 1.0, 0.5, &none, 0.25).is_err());
        assert!(genlem3_rhs(&beta, 0.0, 2.0, 1.0, 3.0, 0.0, 1.0, &none, 0.25).is_err());
    }
}
