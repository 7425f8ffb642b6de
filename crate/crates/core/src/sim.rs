//! Exact stochastic simulation and ensemble statistics.
//!
//! `simulate_ssa` runs the direct-method SSA (two uniforms per event) on
//! integer molecule counts. `scaled_process` simulates the time-scaled,
//! normalized family exactly by boosting rate constants and normalizing on
//! output. `simulate_hybrid` implements the piecewise-deterministic
//! simulator: a unit exponential threshold, trapezoid accumulation of the
//! total jump intensity on the ODE solver's own grid, bisection refinement of
//! the crossing time, and channel selection by the intensity ratio with the
//! discrete state at its left limit.

use num_rational::BigRational;
use rayon::prelude::*;

use crate::network::{Network, State};
use crate::ode::{AcceptedStep, OdeControls, OdeError, OdeSolution, OdeStepper};
use crate::rational::rat_to_f64;
use crate::reduce::HybridModel;
use crate::rng::RngStream;
use crate::scaling::ScalingSpec;

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TEnd,
    EventCap,
    /// Index of the hitting predicate that stopped the run.
    Hitting(usize),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// (time, reaction/channel index), strictly increasing in time.
    pub events: Vec<(f64, usize)>,
    pub grid_times: Vec<f64>,
    pub grid_states: Vec<Vec<f64>>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub terminated_by: Termination,
    /// First hitting time per registered predicate, if reached.
    pub hit_times: Vec<Option<f64>>,
}

#[derive(Debug)]
pub enum SimError {
    /// Event cap reached: the path may be exploding in finite time.
    Exploded { t: f64, events: u64 },
    Ode(OdeError),
    GridMismatch { detail: String },
    Replicate { index: usize, source: Box<SimError> },
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::Exploded { t, events } => {
                write!(f, "event cap reached after {events} events at t = {t}")
            }
            SimError::Ode(e) => write!(f, "ODE failure: {e}"),
            SimError::GridMismatch { detail } => write!(f, "grid mismatch: {detail}"),
            SimError::Replicate { index, source } => {
                write!(f, "replicate {index}: {source}")
            }
        }
    }
}

impl std::error::Error for SimError {}

impl From<OdeError> for SimError {
    fn from(e: OdeError) -> Self {
        SimError::Ode(e)
    }
}

/// Hitting predicate over integer counts.
pub type CountPredicate<'a> = &'a (dyn Fn(&[i64]) -> bool + Sync);
/// Hitting predicate over hybrid-model variables.
pub type VarPredicate<'a> = &'a (dyn Fn(&[f64]) -> bool + Sync);

pub struct SsaOptions<'a> {
    pub grid: &'a [f64],
    pub record_events: bool,
    pub event_cap: u64,
    pub predicates: Vec<CountPredicate<'a>>,
    /// Stop the trajectory once every predicate has been hit.
    pub stop_when_all_hit: bool,
}

impl Default for SsaOptions<'_> {
    fn default() -> Self {
        SsaOptions {
            grid: &[],
            record_events: true,
            event_cap: DEFAULT_EVENT_CAP,
            predicates: Vec::new(),
            stop_when_all_hit: false,
        }
    }
}

/// Exact CTMC path by the direct method: exponential waiting time with the
/// total rate, reaction chosen proportionally to its intensity.
pub fn simulate_ssa(
    network: &Network,
    x0: &State,
    t_end: f64,
    rng: &mut RngStream,
    opts: &SsaOptions,
) -> Result<Trajectory, SimError> {
    let mut state = x0.clone();
    let mut t = 0.0f64;
    let mut events = Vec::new();
    let mut n_events: u64 = 0;
    let mut grid_times = Vec::with_capacity(opts.grid.len());
    let mut grid_states = Vec::with_capacity(opts.grid.len());
    let mut gi = 0usize;
    let mut hit_times: Vec<Option<f64>> = vec![None; opts.predicates.len()];

    let check_hits = |state: &State, t: f64, hit_times: &mut Vec<Option<f64>>| {
        for (p, pred) in opts.predicates.iter().enumerate() {
            if hit_times[p].is_none() && pred(&state.counts) {
                hit_times[p] = Some(t);
            }
        }
    };
    check_hits(&state, 0.0, &mut hit_times);

    let emit_grid = |upto: f64,
                     state: &State,
                     gi: &mut usize,
                     grid_times: &mut Vec<f64>,
                     grid_states: &mut Vec<Vec<f64>>| {
        while *gi < opts.grid.len() && opts.grid[*gi] <= upto {
            grid_times.push(opts.grid[*gi]);
            grid_states.push(state.counts.iter().map(|&c| c as f64).collect());
            *gi += 1;
        }
    };

    let all_hit = |hit_times: &[Option<f64>]| {
        !hit_times.is_empty() && hit_times.iter().all(|h| h.is_some())
    };

    let terminated_by = loop {
        if opts.stop_when_all_hit && all_hit(&hit_times) {
            emit_grid(t, &state, &mut gi, &mut grid_times, &mut grid_states);
            break Termination::Hitting(hit_times.len() - 1);
        }
        let total = network.total_intensity(&state);
        if total <= 0.0 {
            // Absorbed: state holds until the horizon.
            emit_grid(t_end, &state, &mut gi, &mut grid_times, &mut grid_states);
            t = t_end;
            break Termination::TEnd;
        }
        let wait = rng.exponential(total);
        let t_next = t + wait;
        if t_next >= t_end {
            emit_grid(t_end, &state, &mut gi, &mut grid_times, &mut grid_states);
            t = t_end;
            break Termination::TEnd;
        }
        // Grid points strictly before the event keep the pre-event state;
        // the path is right-continuous, so a point exactly at the event time
        // sees the post-event state (emitted after applying the reaction).
        while gi < opts.grid.len() && opts.grid[gi] < t_next {
            grid_times.push(opts.grid[gi]);
            grid_states.push(state.counts.iter().map(|&c| c as f64).collect());
            gi += 1;
        }
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut chosen = network.n_reactions() - 1;
        for k in 0..network.n_reactions() {
            acc += network.intensity(k, &state);
            if target < acc {
                chosen = k;
                break;
            }
        }
        network.apply_reaction_unchecked(&mut state.counts, chosen);
        t = t_next;
        n_events += 1;
        if opts.record_events {
            events.push((t, chosen));
        }
        check_hits(&state, t, &mut hit_times);
        emit_grid(t, &state, &mut gi, &mut grid_times, &mut grid_states);
        if n_events >= opts.event_cap {
            return Err(SimError::Exploded { t, events: n_events });
        }
    };

    Ok(Trajectory {
        events,
        grid_times,
        grid_states,
        final_time: t,
        final_state: state.counts.iter().map(|&c| c as f64).collect(),
        terminated_by,
        hit_times,
    })
}

/// First time the predicate holds along an exact path, or None within the
/// horizon. Evaluated event-by-event, never on a sampling grid.
pub fn hitting_time_ssa(
    network: &Network,
    x0: &State,
    t_end: f64,
    rng: &mut RngStream,
    predicate: CountPredicate,
) -> Result<Option<f64>, SimError> {
    let opts = SsaOptions {
        record_events: false,
        predicates: vec![predicate],
        stop_when_all_hit: true,
        ..Default::default()
    };
    let traj = simulate_ssa(network, x0, t_end, rng, &opts)?;
    Ok(traj.hit_times[0])
}

/// The normalized, time-scaled process at level N: intensities are boosted to
/// N^(gamma+rho_k) lambda_k(Z), which on the underlying integer counts means
/// rate constants kappa_k N^(beta_k+gamma); increments are N^(-alpha_i)
/// zeta_ik, applied by normalizing the exact integer path on output.
#[derive(Debug, Clone)]
pub struct ScaledProcess {
    pub network: Network,
    pub n: f64,
    pub n0: f64,
    pub alpha: Vec<f64>,
}

pub fn scaled_process(
    network: &Network,
    spec: &ScalingSpec,
    gamma: &BigRational,
    n: f64,
) -> ScaledProcess {
    assert!(n > 1.0);
    let gamma_f = rat_to_f64(gamma);
    let mut boosted = network.clone();
    for (k, reaction) in boosted.reactions.iter_mut().enumerate() {
        let beta = rat_to_f64(&spec.beta[k]);
        reaction.rate_const = spec.kappa[k] * n.powf(beta + gamma_f);
    }
    ScaledProcess {
        network: boosted,
        n,
        n0: spec.n0,
        alpha: spec.alpha.iter().map(rat_to_f64).collect(),
    }
}

impl ScaledProcess {
    /// X_i^N(0) = floor((N/N0)^alpha_i X_i(0)).
    pub fn initial(&self, x0: &State) -> State {
        let counts = x0
            .counts
            .iter()
            .zip(&self.alpha)
            .map(|(&x, &a)| ((self.n / self.n0).powf(a) * x as f64).floor() as i64)
            .collect();
        State::new(counts)
    }

    /// Z_i = N^(-alpha_i) X_i.
    pub fn normalize(&self, counts: &[f64]) -> Vec<f64> {
        counts
            .iter()
            .zip(&self.alpha)
            .map(|(&x, &a)| x * self.n.powf(-a))
            .collect()
    }

    /// Exact SSA on the integer counts; grid states and final state are
    /// normalized on output, events and hitting predicates see raw counts.
    pub fn simulate(
        &self,
        x0_counts: &State,
        t_end: f64,
        rng: &mut RngStream,
        opts: &SsaOptions,
    ) -> Result<Trajectory, SimError> {
        let mut traj = simulate_ssa(&self.network, x0_counts, t_end, rng, opts)?;
        for s in traj.grid_states.iter_mut() {
            *s = self.normalize(s);
        }
        traj.final_state = self.normalize(&traj.final_state);
        Ok(traj)
    }
}

/// Dense ODE integration re-exported at the simulation interface.
pub fn integrate_ode<F: FnMut(f64, &[f64], &mut [f64])>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    grid: &[f64],
    controls: OdeControls,
) -> Result<OdeSolution, SimError> {
    crate::ode::integrate_ode(rhs, t0, y0, grid, controls).map_err(SimError::from)
}

pub struct HybridOptions<'a> {
    pub grid: &'a [f64],
    pub ode: OdeControls,
    pub record_events: bool,
    pub event_cap: u64,
    pub predicates: Vec<VarPredicate<'a>>,
    pub stop_when_all_hit: bool,
}

impl Default for HybridOptions<'_> {
    fn default() -> Self {
        HybridOptions {
            grid: &[],
            ode: OdeControls::default(),
            record_events: true,
            event_cap: DEFAULT_EVENT_CAP,
            predicates: Vec::new(),
            stop_when_all_hit: false,
        }
    }
}

const JUMP_INTEGRAL_TOL: f64 = 1e-10;

/// Piecewise-deterministic path of a compiled limit model.
///
/// Between jumps the continuous variables follow their drift with the
/// discrete variables frozen. A unit exponential threshold Delta is drawn;
/// the total jump intensity is accumulated by the trapezoid rule on the ODE
/// solver's accepted steps; the crossing time is refined by bisection inside
/// the bracketing step to absolute tolerance 1e-10 in the integral; the
/// channel is selected proportionally to its intensity at the jump time with
/// the discrete state at its left limit.
pub fn simulate_hybrid(
    model: &HybridModel,
    t_end: f64,
    rng: &mut RngStream,
    opts: &HybridOptions,
) -> Result<Trajectory, SimError> {
    let mut z = model.z0.clone();
    let mut t = 0.0f64;
    let mut events = Vec::new();
    let mut n_events: u64 = 0;
    let mut grid_times = Vec::with_capacity(opts.grid.len());
    let mut grid_states = Vec::with_capacity(opts.grid.len());
    let mut gi = 0usize;
    let mut hit_times: Vec<Option<f64>> = vec![None; opts.predicates.len()];

    let check_hits = |z: &[f64], t: f64, hit_times: &mut Vec<Option<f64>>| {
        for (p, pred) in opts.predicates.iter().enumerate() {
            if hit_times[p].is_none() && pred(z) {
                hit_times[p] = Some(t);
            }
        }
    };
    check_hits(&z, 0.0, &mut hit_times);

    let all_hit = |hit_times: &[Option<f64>]| {
        !hit_times.is_empty() && hit_times.iter().all(|h| h.is_some())
    };

    let mut terminated_by = Termination::TEnd;
    'outer: while t < t_end {
        if opts.stop_when_all_hit && all_hit(&hit_times) {
            terminated_by = Termination::Hitting(hit_times.len() - 1);
            break;
        }
        let delta = rng.unit_exponential();
        let mut acc = 0.0f64;
        let mut stepper =
            OdeStepper::new(|tt, y, dy| (model.drift)(tt, y, dy), t, &z, t_end, opts.ode);
        loop {
            if stepper.done() {
                // Horizon reached without crossing the threshold.
                while gi < opts.grid.len() && opts.grid[gi] <= t_end {
                    grid_times.push(opts.grid[gi]);
                    grid_states.push(stepper.y.clone());
                    gi += 1;
                }
                t = t_end;
                z = stepper.y.clone();
                break 'outer;
            }
            let step = stepper.step()?;
            let lam0 = model.total_jump_intensity(step.t0, &step.y0);
            let lam1 = model.total_jump_intensity(step.t1, &step.y1);
            let seg = 0.5 * (lam0 + lam1) * (step.t1 - step.t0);
            if acc + seg < delta {
                acc += seg;
                while gi < opts.grid.len() && opts.grid[gi] <= step.t1 {
                    grid_times.push(opts.grid[gi]);
                    grid_states.push(step.interpolate(opts.grid[gi]));
                    gi += 1;
                }
                continue;
            }
            // The threshold crossing lies inside this step; bisect on the
            // partial trapezoid integral, which is monotone in s.
            let partial = |s: f64, step: &AcceptedStep| -> (f64, Vec<f64>) {
                let ys = step.interpolate(s);
                let lam_s = model.total_jump_intensity(s, &ys);
                (0.5 * (lam0 + lam_s) * (s - step.t0), ys)
            };
            let mut lo = step.t0;
            let mut hi = step.t1;
            let mut tau = hi;
            let mut y_tau = step.y1.clone();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (val, ys) = partial(mid, &step);
                if (acc + val - delta).abs() <= JUMP_INTEGRAL_TOL {
                    tau = mid;
                    y_tau = ys;
                    break;
                }
                if acc + val < delta {
                    lo = mid;
                } else {
                    hi = mid;
                    tau = mid;
                    y_tau = ys;
                }
                if hi - lo < f64::EPSILON * step.t1.abs().max(1.0) {
                    tau = hi;
                    y_tau = step.interpolate(tau);
                    break;
                }
            }

            // Grid points strictly before the jump see the pre-jump flow.
            while gi < opts.grid.len() && opts.grid[gi] < tau {
                grid_times.push(opts.grid[gi]);
                grid_states.push(step.interpolate(opts.grid[gi]));
                gi += 1;
            }

            // Channel selection at the jump time: continuous state at tau,
            // discrete state at its left limit (it is frozen along the flow).
            let weights: Vec<f64> =
                model.channels.iter().map(|c| (c.intensity)(tau, &y_tau).max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut chosen = model.channels.len() - 1;
            if total > 0.0 {
                let target = rng.uniform() * total;
                let mut cum = 0.0;
                for (c, w) in weights.iter().enumerate() {
                    cum += w;
                    if target < cum {
                        chosen = c;
                        break;
                    }
                }
            }
            z = y_tau;
            for (v, d) in model.channels[chosen].delta.iter().enumerate() {
                z[v] += d;
            }
            t = tau;
            n_events += 1;
            if opts.record_events {
                events.push((t, chosen));
            }
            check_hits(&z, t, &mut hit_times);
            // A grid point exactly at the jump time sees the post-jump state
            // (right continuity).
            while gi < opts.grid.len() && opts.grid[gi] <= t {
                grid_times.push(opts.grid[gi]);
                grid_states.push(z.clone());
                gi += 1;
            }
            if n_events >= opts.event_cap {
                return Err(SimError::Exploded { t, events: n_events });
            }
            continue 'outer;
        }
    }

    Ok(Trajectory {
        events,
        grid_times,
        grid_states,
        final_time: t,
        final_state: z,
        terminated_by,
        hit_times,
    })
}

// ---------------------------------------------------------------------------
// Ensembles and comparison.
// ---------------------------------------------------------------------------

/// Per-replicate observables handed back to the aggregator.
#[derive(Debug, Clone)]
pub struct ReplicateOutput {
    /// [grid point][observable].
    pub grid_values: Vec<Vec<f64>>,
    pub hits: Vec<Option<f64>>,
}

impl ReplicateOutput {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        ReplicateOutput { grid_values: traj.grid_states.clone(), hits: traj.hit_times.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub grid: Vec<f64>,
    /// [grid point][observable].
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    /// Per predicate: hitting-time samples of replicates that hit.
    pub hit_samples: Vec<Vec<f64>>,
    /// Per predicate: number of replicates that never hit within the horizon.
    pub hit_misses: Vec<usize>,
    pub n_replicates: usize,
}

impl EnsembleStats {
    pub fn hit_mean(&self, p: usize) -> Option<f64> {
        let s = &self.hit_samples[p];
        if s.is_empty() {
            None
        } else {
            Some(s.iter().sum::<f64>() / s.len() as f64)
        }
    }

    pub fn hit_standard_error(&self, p: usize) -> Option<f64> {
        let s = &self.hit_samples[p];
        if s.len() < 2 {
            return None;
        }
        let mean = self.hit_mean(p)?;
        let var =
            s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s.len() - 1) as f64;
        Some((var / s.len() as f64).sqrt())
    }
}

/// Run `n` independent replicates; replicate r uses RngStream(seed, r).
/// Replicates execute in parallel but are aggregated in index order, so the
/// result is a pure function of (seed, n) regardless of thread count.
pub fn run_ensemble<F>(
    n: usize,
    seed: u64,
    grid: &[f64],
    simulate: F,
) -> Result<EnsembleStats, SimError>
where
    F: Fn(RngStream) -> Result<ReplicateOutput, SimError> + Sync,
{
    assert!(n >= 1);
    let outputs: Result<Vec<ReplicateOutput>, SimError> = (0..n)
        .into_par_iter()
        .map(|r| {
            simulate(RngStream::new(seed, r as u64)).map_err(|e| SimError::Replicate {
                index: r,
                source: Box::new(e),
            })
        })
        .collect();
    let outputs = outputs?;

    let n_obs = outputs[0].grid_values.first().map_or(0, |row| row.len());
    let g = grid.len();
    let mut mean = vec![vec![0.0; n_obs]; g];
    let mut m2 = vec![vec![0.0; n_obs]; g];
    let mut count = 0.0f64;
    for out in &outputs {
        assert_eq!(out.grid_values.len(), g, "replicate grid length mismatch");
        count += 1.0;
        for (j, row) in out.grid_values.iter().enumerate() {
            for (o, &v) in row.iter().enumerate() {
                let d = v - mean[j][o];
                mean[j][o] += d / count;
                m2[j][o] += d * (v - mean[j][o]);
            }
        }
    }
    let std: Vec<Vec<f64>> = m2
        .iter()
        .map(|row| {
            row.iter()
                .map(|&s| if count > 1.0 { (s / (count - 1.0)).sqrt() } else { 0.0 })
                .collect()
        })
        .collect();

    let n_preds = outputs[0].hits.len();
    let mut hit_samples = vec![Vec::new(); n_preds];
    let mut hit_misses = vec![0usize; n_preds];
    for out in &outputs {
        for (p, h) in out.hits.iter().enumerate() {
            match h {
                Some(t) => hit_samples[p].push(*t),
                None => hit_misses[p] += 1,
            }
        }
    }

    Ok(EnsembleStats {
        grid: grid.to_vec(),
        mean,
        std,
        hit_samples,
        hit_misses,
        n_replicates: n,
    })
}

/// Side-by-side hitting-time summary.
#[derive(Debug, Clone, PartialEq)]
pub struct HitComparison {
    pub full_mean: Option<f64>,
    pub reduced_mean_rescaled: Option<f64>,
    pub ratio: Option<f64>,
    pub full_misses: usize,
    pub reduced_misses: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Full-model time axis.
    pub grid: Vec<f64>,
    /// [grid point][observable]: full mean minus rescaled reduced mean.
    pub mean_diff: Vec<Vec<f64>>,
    /// Per observable: fraction of grid points where the +-1 std bands of the
    /// two models overlap.
    pub band_overlap: Vec<f64>,
    pub hits: Vec<HitComparison>,
}

/// Compare a full-model ensemble against a reduced-model ensemble. The
/// reduced model lives on the gamma time scale with normalized magnitudes:
/// its grid must equal the full grid divided by N0^gamma, its observable i is
/// scaled back by N0^alpha_i, and hitting times are multiplied by N0^gamma.
pub fn compare_models(
    full: &EnsembleStats,
    reduced: &EnsembleStats,
    n0: f64,
    gamma: f64,
    alpha_obs: &[f64],
) -> Result<ComparisonReport, SimError> {
    let time_scale = n0.powf(gamma);
    if full.grid.len() != reduced.grid.len() {
        return Err(SimError::GridMismatch {
            detail: format!(
                "full grid has {} points, reduced has {}",
                full.grid.len(),
                reduced.grid.len()
            ),
        });
    }
    for (tf, tr) in full.grid.iter().zip(&reduced.grid) {
        if (tf - tr * time_scale).abs() > 1e-9 * tf.abs().max(1.0) {
            return Err(SimError::GridMismatch {
                detail: format!("full time {tf} vs rescaled reduced time {}", tr * time_scale),
            });
        }
    }
    let n_obs = alpha_obs.len();
    let mut mean_diff = Vec::with_capacity(full.grid.len());
    let mut overlap_counts = vec![0usize; n_obs];
    for j in 0..full.grid.len() {
        let mut row = Vec::with_capacity(n_obs);
        for o in 0..n_obs {
            let scale = n0.powf(alpha_obs[o]);
            let rm = reduced.mean[j][o] * scale;
            let rs = reduced.std[j][o] * scale;
            let fm = full.mean[j][o];
            let fs = full.std[j][o];
            row.push(fm - rm);
            if (fm - fs).max(rm - rs) <= (fm + fs).min(rm + rs) {
                overlap_counts[o] += 1;
            }
        }
        mean_diff.push(row);
    }
    let band_overlap: Vec<f64> = overlap_counts
        .iter()
        .map(|&c| c as f64 / full.grid.len().max(1) as f64)
        .collect();

    let n_preds = full.hit_samples.len().min(reduced.hit_samples.len());
    let mut hits = Vec::with_capacity(n_preds);
    for p in 0..n_preds {
        let full_mean = full.hit_mean(p);
        let reduced_mean_rescaled = reduced.hit_mean(p).map(|m| m * time_scale);
        let ratio = match (full_mean, reduced_mean_rescaled) {
            (Some(f), Some(r)) if f != 0.0 => Some(r / f),
            _ => None,
        };
        hits.push(HitComparison {
            full_mean,
            reduced_mean_rescaled,
            ratio,
            full_misses: full.hit_misses[p],
            reduced_misses: reduced.hit_misses[p],
        });
    }

    Ok(ComparisonReport { grid: full.grid.clone(), mean_diff, band_overlap, hits })
}

// ---------------------------------------------------------------------------
// CSV export.
// ---------------------------------------------------------------------------

/// One trajectory as CSV: header `time,<obs1>,...`, one row per grid point.
pub fn trajectory_csv(traj: &Trajectory, names: &[String]) -> String {
    let mut out = String::from("time");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (t, row) in traj.grid_times.iter().zip(&traj.grid_states) {
        out.push_str(&format!("{t}"));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Aggregated ensemble as CSV: `time,mean_<obs>,std_<obs>,...`.
pub fn ensemble_csv(stats: &EnsembleStats, names: &[String]) -> String {
    let mut out = String::from("time");
    for n in names {
        out.push_str(&format!(",mean_{n},std_{n}"));
    }
    out.push('\n');
    for (j, t) in stats.grid.iter().enumerate() {
        out.push_str(&format!("{t}"));
        for o in 0..names.len() {
            out.push_str(&format!(",{},{}", stats.mean[j][o], stats.std[j][o]));
        }
        out.push('\n');
    }
    out
}

/// Hitting-time samples as a single-column CSV.
pub fn hits_csv(stats: &EnsembleStats, predicate: usize, name: &str) -> String {
    let mut out = format!("{name}\n");
    for t in &stats.hit_samples[predicate] {
        out.push_str(&format!("{t}\n"));
    }
    out
}

/// Two-sided Kolmogorov-Smirnov statistic of samples against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::parse::parse_network;
    use crate::reduce::{HybridModel, JumpChannel};
    use num_traits::Zero;

    fn net(text: &str) -> Network {
        parse_network(text).value.unwrap()
    }

    #[test]
    fn pure_birth_is_poisson_mean() {
        let network = net("species S\n0 -> S @ 3.0\n");
        let grid = [2.0];
        let stats = run_ensemble(2000, 11, &grid, |mut rng| {
            let traj = simulate_ssa(
                &network,
                &State::new(vec![0]),
                2.0,
                &mut rng,
                &SsaOptions { grid: &grid, record_events: false, ..Default::default() },
            )?;
            Ok(ReplicateOutput::from_trajectory(&traj))
        })
        .unwrap();
        let mean = stats.mean[0][0];
        let se = (6.0f64 / 2000.0).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn pure_death_mean_and_hitting_time() {
        let network = net("species S\nS -> 0 @ 1.0\n");
        let x0 = State::new(vec![1]);
        let n = 4000;
        let mut sum = 0.0;
        for r in 0..n {
            let mut rng = RngStream::new(77, r);
            let hit = hitting_time_ssa(&network, &x0, 1e6, &mut rng, &|x| x[0] == 0)
                .unwrap()
                .expect("always absorbs");
            sum += hit;
        }
        let mean = sum / n as f64;
        let se = 1.0 / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn hitting_predicate_true_at_start_gives_zero() {
        let network = net("species S\nS -> 0 @ 1.0\n");
        let mut rng = RngStream::new(1, 0);
        let hit =
            hitting_time_ssa(&network, &State::new(vec![5]), 10.0, &mut rng, &|x| x[0] == 5)
                .unwrap();
        assert_eq!(hit, Some(0.0));
    }

    #[test]
    fn goutsias_conservation_every_event() {
        let network = gallery::goutsias_network();
        let x0 = gallery::goutsias_initial();
        for r in 0..10u64 {
            let mut rng = RngStream::new(5, r);
            let traj =
                simulate_ssa(&network, &x0, 10.0, &mut rng, &SsaOptions::default()).unwrap();
            let mut counts = x0.counts.clone();
            assert_eq!(counts[3] + counts[4] + counts[5], 2);
            let mut prev_t = 0.0;
            for &(t, k) in &traj.events {
                assert!(t > prev_t, "event times strictly increasing");
                prev_t = t;
                network.apply_reaction_unchecked(&mut counts, k);
                assert!(counts.iter().all(|&c| c >= 0));
                assert_eq!(counts[3] + counts[4] + counts[5], 2);
            }
        }
    }

    #[test]
    fn ssa_waiting_times_exponential_ks() {
        // Fixed state with two channels; the first waiting time must be
        // exponential with the total rate.
        let network = net("species A, B\nA -> B @ 2.0\nB -> A @ 1.0\n");
        let x0 = State::new(vec![3, 1]);
        let total = 2.0 * 3.0 + 1.0;
        let n = 5000;
        let mut samples: Vec<f64> = (0..n)
            .map(|r| {
                let mut rng = RngStream::new(99, r);
                let traj =
                    simulate_ssa(&network, &x0, 1e9, &mut rng, &SsaOptions {
                        event_cap: 1,
                        ..Default::default()
                    });
                match traj {
                    Err(SimError::Exploded { t, .. }) => t,
                    Ok(tr) => tr.events[0].0,
                    Err(e) => panic!("{e}"),
                }
            })
            .collect();
        let d = ks_statistic(&mut samples, |x| 1.0 - (-total * x).exp());
        let crit = 1.63 / (n as f64).sqrt(); // alpha = 0.01
        assert!(d < crit, "KS statistic {d} exceeds {crit}");
    }

    #[test]
    fn ensemble_deterministic_across_thread_counts() {
        let network = net("species A, B\nA -> B @ 2.0\nB -> A @ 1.0\n");
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let run = || {
            run_ensemble(64, 123, &grid, |mut rng| {
                let traj = simulate_ssa(
                    &network,
                    &State::new(vec![10, 0]),
                    5.0,
                    &mut rng,
                    &SsaOptions { grid: &grid, record_events: false, ..Default::default() },
                )?;
                Ok(ReplicateOutput::from_trajectory(&traj))
            })
            .unwrap()
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(run);
        let b = pool4.install(run);
        let c = run();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn scaled_process_at_reference_level_is_identity() {
        let network = gallery::goutsias_network();
        let spec = gallery::goutsias_dimer_scaling(&network);
        let process = scaled_process(&network, &spec, &num_rational::BigRational::zero(), 100.0);
        for (orig, boosted) in network.reactions.iter().zip(&process.network.reactions) {
            assert!(
                (orig.rate_const - boosted.rate_const).abs() <= 1e-12 * orig.rate_const,
                "{} vs {}",
                orig.rate_const,
                boosted.rate_const
            );
        }
        let x0 = gallery::goutsias_initial();
        assert_eq!(process.initial(&x0).counts, x0.counts);
    }

    #[test]
    fn scaled_process_initial_floors() {
        let network = gallery::michaelis_menten_network();
        let spec = gallery::michaelis_menten_scaling(&network);
        // alpha = (1, 0, 0, 1), N0 = 100, N = 1000: S and P scale by 10.
        let process = scaled_process(&network, &spec, &num_rational::BigRational::zero(), 1000.0);
        let x0 = State::new(vec![53, 7, 0, 1]);
        assert_eq!(process.initial(&x0).counts, vec![530, 7, 0, 10]);
        let z = process.normalize(&[530.0, 7.0, 0.0, 10.0]);
        assert!((z[0] - 0.53).abs() < 1e-12);
        assert_eq!(z[1], 7.0);
    }

    fn drift_only_model() -> HybridModel {
        HybridModel {
            names: vec!["y".into()],
            is_discrete: vec![false],
            z0: vec![1.0],
            drift: Box::new(|_t, y, dy| dy[0] = -y[0]),
            channels: vec![],
        }
    }

    #[test]
    fn hybrid_without_jumps_equals_ode() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let model = drift_only_model();
        let mut rng = RngStream::new(3, 0);
        let opts = HybridOptions {
            grid: &grid,
            ode: OdeControls { rtol: 1e-10, atol: 1e-12, ..Default::default() },
            ..Default::default()
        };
        let traj = simulate_hybrid(&model, 2.0, &mut rng, &opts).unwrap();
        assert_eq!(traj.grid_times, grid);
        for (t, y) in traj.grid_times.iter().zip(&traj.grid_states) {
            assert!((y[0] - (-t).exp()).abs() < 1e-8, "t = {t}");
        }
        assert!(traj.events.is_empty());
    }

    #[test]
    fn hybrid_negligible_rates_match_ode() {
        let mut model = drift_only_model();
        model.channels.push(JumpChannel {
            label: "rare".into(),
            intensity: Box::new(|_t, _z| 1e-12),
            delta: vec![0.0],
        });
        let grid = [2.0];
        let mut rng = RngStream::new(4, 0);
        let opts = HybridOptions {
            grid: &grid,
            ode: OdeControls { rtol: 1e-10, atol: 1e-12, ..Default::default() },
            ..Default::default()
        };
        let traj = simulate_hybrid(&model, 2.0, &mut rng, &opts).unwrap();
        assert!((traj.grid_states[0][0] - (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn hybrid_birth_death_mean() {
        let (b, d) = (2.0, 0.5);
        let model = HybridModel {
            names: vec!["x".into()],
            is_discrete: vec![true],
            z0: vec![0.0],
            drift: Box::new(|_t, _z, dz| dz.fill(0.0)),
            channels: vec![
                JumpChannel {
                    label: "birth".into(),
                    intensity: Box::new(move |_t, _z| b),
                    delta: vec![1.0],
                },
                JumpChannel {
                    label: "death".into(),
                    intensity: Box::new(move |_t, z| d * z[0]),
                    delta: vec![-1.0],
                },
            ],
        };
        let t = 2.0;
        let grid = [t];
        let n = 2000;
        let stats = run_ensemble(n, 21, &grid, |mut rng| {
            let traj = simulate_hybrid(
                &model,
                t,
                &mut rng,
                &HybridOptions { grid: &grid, record_events: false, ..Default::default() },
            )?;
            Ok(ReplicateOutput::from_trajectory(&traj))
        })
        .unwrap();
        let expect = b / d * (1.0 - (-d * t).exp());
        let mean = stats.mean[0][0];
        let se = stats.std[0][0] / (n as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect}");
    }

    #[test]
    fn hybrid_constant_intensity_interjump_exponential() {
        let c = 1.7;
        let model = HybridModel {
            names: vec!["x".into()],
            is_discrete: vec![true],
            z0: vec![0.0],
            drift: Box::new(|_t, _z, dz| dz.fill(0.0)),
            channels: vec![JumpChannel {
                label: "tick".into(),
                intensity: Box::new(move |_t, _z| c),
                delta: vec![1.0],
            }],
        };
        let mut rng = RngStream::new(8, 0);
        let traj = simulate_hybrid(
            &model,
            2000.0,
            &mut rng,
            &HybridOptions::default(),
        )
        .unwrap();
        let mut gaps = Vec::new();
        let mut prev = 0.0;
        for &(t, _) in &traj.events {
            gaps.push(t - prev);
            prev = t;
        }
        assert!(gaps.len() > 2000);
        let n = gaps.len() as f64;
        let d = ks_statistic(&mut gaps, |x| 1.0 - (-c * x).exp());
        assert!(d < 1.63 / n.sqrt(), "KS = {d}, n = {n}");
    }

    #[test]
    fn hybrid_channel_selection_uses_left_limit() {
        // At x = 0 the second channel's intensity is zero at the left limit,
        // so the first jump must always come from the constant channel even
        // though x becomes positive immediately afterwards.
        let model = HybridModel {
            names: vec!["x".into()],
            is_discrete: vec![true],
            z0: vec![0.0],
            drift: Box::new(|_t, _z, dz| dz.fill(0.0)),
            channels: vec![
                JumpChannel {
                    label: "seed".into(),
                    intensity: Box::new(|_t, _z| 1.0),
                    delta: vec![1.0],
                },
                JumpChannel {
                    label: "amplify".into(),
                    intensity: Box::new(|_t, z| 100.0 * z[0]),
                    delta: vec![1.0],
                },
            ],
        };
        for r in 0..200u64 {
            let mut rng = RngStream::new(31, r);
            let traj = simulate_hybrid(
                &model,
                50.0,
                &mut rng,
                &HybridOptions { event_cap: 5, ..Default::default() },
            );
            let events = match traj {
                Ok(tr) => tr.events,
                Err(SimError::Exploded { .. }) => continue,
            // event cap is fine; we only need the first event
                Err(e) => panic!("{e}"),
            };
            if let Some(&(_, channel)) = events.first() {
                assert_eq!(channel, 0, "first jump must use the left-limit state");
            }
        }
    }

    #[test]
    fn compare_model_with_itself_is_zero() {
        let network = net("species A, B\nA -> B @ 2.0\nB -> A @ 1.0\n");
        let grid: Vec<f64> = (0..=5).map(|i| i as f64).collect();
        let stats = run_ensemble(32, 9, &grid, |mut rng| {
            let traj = simulate_ssa(
                &network,
                &State::new(vec![10, 0]),
                5.0,
                &mut rng,
                &SsaOptions {
                    grid: &grid,
                    record_events: false,
                    predicates: vec![&|x| x[1] >= 5],
                    ..Default::default()
                },
            )?;
            Ok(ReplicateOutput::from_trajectory(&traj))
        })
        .unwrap();
        let report = compare_models(&stats, &stats, 100.0, 0.0, &[0.0, 0.0]).unwrap();
        for row in &report.mean_diff {
            for v in row {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(report.band_overlap.iter().all(|&f| f == 1.0));
        let hc = &report.hits[0];
        assert_eq!(hc.full_mean, hc.reduced_mean_rescaled);
        assert_eq!(hc.ratio, Some(1.0));
    }

    #[test]
    fn grid_mismatch_detected() {
        let mk = |grid: Vec<f64>| EnsembleStats {
            grid,
            mean: vec![vec![0.0]],
            std: vec![vec![0.0]],
            hit_samples: vec![],
            hit_misses: vec![],
            n_replicates: 1,
        };
        let a = mk(vec![1.0]);
        let b = mk(vec![2.0]);
        assert!(matches!(
            compare_models(&a, &b, 100.0, 0.0, &[0.0]),
            Err(SimError::GridMismatch { .. })
        ));
    }

    #[test]
    fn csv_formats() {
        let traj = Trajectory {
            events: vec![],
            grid_times: vec![0.0, 1.0],
            grid_states: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            final_time: 1.0,
            final_state: vec![3.0, 4.0],
            terminated_by: Termination::TEnd,
            hit_times: vec![],
        };
        let csv = trajectory_csv(&traj, &["A".into(), "B".into()]);
        assert!(csv.starts_with("time,A,B\n0,1,2\n1,3,4\n"));
        let stats = EnsembleStats {
            grid: vec![0.5],
            mean: vec![vec![1.5]],
            std: vec![vec![0.25]],
            hit_samples: vec![vec![2.0, 4.0]],
            hit_misses: vec![1],
            n_replicates: 3,
        };
        let csv = ensemble_csv(&stats, &["A".into()]);
        assert_eq!(csv, "time,mean_A,std_A\n0.5,1.5,0.25\n");
        let csv = hits_csv(&stats, 0, "tau");
        assert_eq!(csv, "tau\n2\n4\n");
        assert_eq!(stats.hit_mean(0), Some(3.0));
    }
}
