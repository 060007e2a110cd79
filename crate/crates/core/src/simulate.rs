//! Fixed-step RK4 simulation with exact alignment to impulse times and input
//! breakpoints, plus the integral-form residual check and a closed-form
//! oracle for scalar linear impulsive systems.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inputs::{euclidean_norm, HybridInput};
use crate::system::ImpulsiveSystem;

/// States with a larger norm stop the simulation with
/// [`TrajectoryStatus::Diverged`].
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Complete,
    Diverged,
    StepFailure,
}

/// `(τ, x(τ⁻), x(τ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// A right-continuous sampled solution. Samples at impulse times hold the
/// post-jump value; the pre-jump value lives in the matching [`JumpRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dim: usize,
    horizon: f64,
    times: Vec<f64>,
    states: Vec<f64>,
    jumps: Vec<JumpRecord>,
    status: TrajectoryStatus,
}

/// A point at which certificate inequalities are evaluated: every sample,
/// plus the left limit at each jump.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint<'a> {
    pub t: f64,
    pub x: &'a [f64],
    /// Jumps in `(t0, t]`, or in `(t0, t)` for a left limit.
    pub jumps: usize,
    pub left_limit: bool,
}

impl Trajectory {
    fn start(t0: f64, x0: &[f64], horizon: f64) -> Self {
        Trajectory {
            t0,
            dim: x0.len(),
            horizon,
            times: vec![t0],
            states: x0.to_vec(),
            jumps: Vec::new(),
            status: TrajectoryStatus::Complete,
        }
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn x0(&self) -> &[f64] {
        self.state(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        &self.jumps
    }

    pub fn status(&self) -> TrajectoryStatus {
        self.status
    }

    /// Sample index holding the value at `t`, if `t` is a sample time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|s| s.total_cmp(&t)).ok()
    }

    /// All evaluation points in time order; the left limit at a jump comes
    /// right before the post-jump sample.
    pub fn eval_points(&self) -> Vec<EvalPoint<'_>> {
        let mut out = Vec::with_capacity(self.len() + self.jumps.len());
        let mut next_jump = 0;
        for (i, &t) in self.times.iter().enumerate() {
            if next_jump < self.jumps.len() && self.jumps[next_jump].t == t {
                out.push(EvalPoint {
                    t,
                    x: &self.jumps[next_jump].pre,
                    jumps: next_jump,
                    left_limit: true,
                });
                next_jump += 1;
            }
            out.push(EvalPoint {
                t,
                x: self.state(i),
                jumps: next_jump,
                left_limit: false,
            });
        }
        out
    }

    /// CSV with columns `t, x_1..x_n, is_post_jump`; each jump contributes a
    /// pre-jump row (flag 0) followed by the post-jump row (flag 1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x_{i}")));
        header.push("is_post_jump".into());
        w.write_record(&header)?;
        for p in self.eval_points() {
            let mut row = vec![p.t.to_string()];
            row.extend(p.x.iter().map(f64::to_string));
            let post = self.jumps.iter().any(|j| j.t == p.t) && !p.left_limit;
            row.push(if post { "1" } else { "0" }.into());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV produced by [`Trajectory::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let dim = rdr.headers()?.len().saturating_sub(2);
        if dim == 0 {
            return Err(Error::Invalid("trajectory CSV has no state columns".into()));
        }
        let mut traj: Option<Trajectory> = None;
        let mut pending_pre: Option<(f64, Vec<f64>)> = None;
        for rec in rdr.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Invalid(format!("bad number in trajectory CSV: {e}")))?;
            let (t, x, post) = (nums[0], nums[1..=dim].to_vec(), nums[dim + 1] != 0.0);
            match (&mut traj, post) {
                (None, _) => traj = Some(Trajectory::start(t, &x, f64::NAN)),
                (Some(tr), true) => {
                    let (pt, pre) = pending_pre.take().ok_or_else(|| {
                        Error::Invalid(format!("post-jump row at t = {t} without pre-jump row"))
                    })?;
                    if pt != t {
                        return Err(Error::Invalid(format!("jump rows disagree on time ({pt} vs {t})")));
                    }
                    tr.push(t, &x);
                    tr.jumps.push(JumpRecord { t, pre, post: x });
                }
                (Some(tr), false) => {
                    if let Some((pt, px)) = pending_pre.take() {
                        tr.push(pt, &px);
                    }
                    pending_pre = Some((t, x));
                }
            }
        }
        let mut tr = traj.ok_or_else(|| Error::Invalid("empty trajectory CSV".into()))?;
        if let Some((pt, px)) = pending_pre {
            tr.push(pt, &px);
        }
        tr.horizon = *tr.times.last().unwrap();
        Ok(tr)
    }

    pub fn to_json(&self) -> Result<String> {
        let samples: Vec<Vec<f64>> = (0..self.len())
            .map(|i| {
                let mut row = vec![self.time(i)];
                row.extend_from_slice(self.state(i));
                row
            })
            .collect();
        Ok(serde_json::to_string(&TrajectoryJson {
            t0: self.t0,
            horizon: self.horizon,
            status: self.status,
            samples,
            jumps: self.jumps.clone(),
        })?)
    }
}

#[derive(Serialize)]
struct TrajectoryJson {
    t0: f64,
    horizon: f64,
    status: TrajectoryStatus,
    samples: Vec<Vec<f64>>,
    jumps: Vec<JumpRecord>,
}

/// Nodes `a < … < b` with equal spacing no larger than `step` (up to rounding).
fn segment_nodes(a: f64, b: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = (((b - a) / step) - 1e-9).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    (1..=n).map(move |k| if k == n { b } else { a + k as f64 * h })
}

struct Events {
    /// Segment ends in `(t0, horizon]`, sorted and unique.
    ends: Vec<f64>,
    jumps: Vec<f64>,
}

fn collect_events(w: &HybridInput, t0: f64, horizon: f64) -> Result<Events> {
    let jumps: Vec<f64> = w
        .sigma
        .materialize(horizon)?
        .into_iter()
        .filter(|&t| t > t0)
        .collect();
    let mut ends = jumps.clone();
    ends.extend(w.u.events_in(t0, horizon));
    ends.push(horizon);
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    Ok(Events { ends, jumps })
}

fn check_args(system: &ImpulsiveSystem, t0: f64, x0: &[f64], w: &HybridInput, horizon: f64, step: f64) -> Result<()> {
    if !(horizon > t0) || !(step > 0.0) || !t0.is_finite() || !horizon.is_finite() {
        return Err(Error::Invalid(format!(
            "need horizon > t0 and step > 0 (t0 = {t0}, horizon = {horizon}, step = {step})"
        )));
    }
    if x0.len() != system.dim_x() {
        return Err(Error::InvalidSystem(format!(
            "x0 has dimension {} (expected {})",
            x0.len(),
            system.dim_x()
        )));
    }
    if w.u.dim() != system.dim_u() {
        return Err(Error::InconsistentInput(format!(
            "input has dimension {} (expected {})",
            w.u.dim(),
            system.dim_u()
        )));
    }
    Ok(())
}

/// Simulates from `(t0, x0)` to `horizon` under `w`.
///
/// Classical RK4 on every inter-event segment; each segment is split into
/// equal substeps no longer than `step`, so impulse times and input
/// breakpoints are grid nodes. A jump at `t0` is not applied.
pub fn simulate(
    system: &ImpulsiveSystem,
    t0: f64,
    x0: &[f64],
    w: &HybridInput,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    check_args(system, t0, x0, w, horizon, step)?;
    let n = system.dim_x();
    let events = collect_events(w, t0, horizon)?;
    let mut traj = Trajectory::start(t0, x0, horizon);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut a = t0;
    let mut next_jump = 0;
    'segments: for &b in &events.ends {
        let u = w.u.on_open(a, b);
        let mut t = a;
        for node in segment_nodes(a, b, step) {
            let h = node - t;
            system.flow(t, &x, u, &mut k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            system.flow(t + 0.5 * h, &tmp, u, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            system.flow(t + 0.5 * h, &tmp, u, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            system.flow(node, &tmp, u, &mut k4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { map: "flow", t: node });
            }
            t = node;
            let is_jump = node == b && events.jumps.get(next_jump) == Some(&b);
            if !is_jump {
                traj.push(t, &x);
            }
            if euclidean_norm(&x) > DIVERGENCE_BOUND {
                if is_jump {
                    traj.push(t, &x);
                }
                traj.status = TrajectoryStatus::Diverged;
                break 'segments;
            }
        }
        if events.jumps.get(next_jump) == Some(&b) {
            next_jump += 1;
            let pre = x.clone();
            system.jump(b, &pre, w.u.at(b), &mut tmp);
            for i in 0..n {
                x[i] = pre[i] + tmp[i];
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { map: "jump", t: b });
            }
            traj.push(b, &x);
            traj.jumps.push(JumpRecord {
                t: b,
                pre,
                post: x.clone(),
            });
            if euclidean_norm(&x) > DIVERGENCE_BOUND {
                traj.status = TrajectoryStatus::Diverged;
                break;
            }
        }
        a = b;
    }
    Ok(traj)
}

/// `max_t |x(t) − [x(t0) + ∫ f + Σ g]|` over the samples, with the flow
/// integral by trapezoidal quadrature along the stored samples and the jump
/// terms re-evaluated from the recorded pre-jump states.
pub fn integral_residual(traj: &Trajectory, system: &ImpulsiveSystem, w: &HybridInput) -> f64 {
    let n = traj.dim();
    let mut rhs = traj.x0().to_vec();
    let (mut fa, mut fb, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut worst: f64 = 0.0;
    let mut next_jump = 0;
    for i in 1..traj.len() {
        let (ta, tb) = (traj.time(i - 1), traj.time(i));
        let jump = traj
            .jumps()
            .get(next_jump)
            .filter(|j| j.t == tb);
        let xa = traj.state(i - 1);
        let xb = jump.map_or(traj.state(i), |j| j.pre.as_slice());
        let u = w.u.on_open(ta, tb);
        system.flow(ta, xa, u, &mut fa);
        system.flow(tb, xb, u, &mut fb);
        for k in 0..n {
            rhs[k] += 0.5 * (tb - ta) * (fa[k] + fb[k]);
        }
        if let Some(j) = jump {
            system.jump(tb, &j.pre, w.u.at(tb), &mut g);
            for k in 0..n {
                rhs[k] += g[k];
            }
            next_jump += 1;
        }
        let diff: Vec<f64> = traj.state(i).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        worst = worst.max(euclidean_norm(&diff));
    }
    worst
}

/// Exact solution of `ẋ = a·x + u` with jumps `x ↦ jump_factor·x`, sampled on
/// the same grid [`simulate`] uses.
pub fn closed_form_linear_impulsive(
    a: f64,
    jump_factor: f64,
    t0: f64,
    x0: f64,
    w: &HybridInput,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    if w.u.dim() != 1 {
        return Err(Error::InvalidSystem(
            "closed form needs a scalar input".into(),
        ));
    }
    if !(horizon > t0) || !(step > 0.0) {
        return Err(Error::Invalid("need horizon > t0 and step > 0".into()));
    }
    let events = collect_events(w, t0, horizon)?;
    let flow = |x_start: f64, c: f64, dt: f64| -> f64 {
        if a == 0.0 {
            x_start + c * dt
        } else {
            let e = (a * dt).exp();
            e * x_start + c / a * (e - 1.0)
        }
    };
    let mut traj = Trajectory::start(t0, &[x0], horizon);
    let mut x = x0;
    let mut seg_start = t0;
    let mut next_jump = 0;
    for &b in &events.ends {
        let c = w.u.on_open(seg_start, b)[0];
        let x_start = x;
        let is_jump = events.jumps.get(next_jump) == Some(&b);
        for node in segment_nodes(seg_start, b, step) {
            x = flow(x_start, c, node - seg_start);
            if !(is_jump && node == b) {
                traj.push(node, &[x]);
            }
        }
        if is_jump {
            next_jump += 1;
            let pre = x;
            x *= jump_factor;
            traj.push(b, &[x]);
            traj.jumps.push(JumpRecord {
                t: b,
                pre: vec![pre],
                post: vec![x],
            });
        }
        seg_start = b;
    }
    Ok(traj)
}

/// Max absolute state difference between two trajectories on the same grid,
/// including the pre-jump values.
pub fn max_abs_error(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times() != b.times() || a.jumps().len() != b.jumps().len() {
        return Err(Error::Invalid("trajectories are on different grids".into()));
    }
    let pa = a.eval_points();
    let pb = b.eval_points();
    Ok(pa
        .iter()
        .zip(&pb)
        .flat_map(|(p, q)| p.x.iter().zip(q.x).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max))
}
