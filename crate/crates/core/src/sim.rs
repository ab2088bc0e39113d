//! Schedule execution with trace capture, plus the convergence-study driver
//! for the two small-time limits the synthesizer relies on.
//!
//! The runner folds the exact propagators over a schedule's segments.
//! Zero-control stretches use the exact free flow; controlled stretches use
//! Strang substeps of at most dt_max; idealized impulses apply the kick
//! operator directly. Kicks are capped at |k|_inf <= N_max and the shed L2
//! mass accumulates into a truncation residual that is traced and, past a
//! configured fraction of the state norm, aborts the run.
//!
//! Traces sample at segment boundaries and roughly every total_time/200,
//! always on substep boundaries so sampling never perturbs the integration
//! path. Rows carry time, distance to an optional target, energy, the
//! cumulative truncation residual, and the few largest mode amplitudes.

use crate::error::{Error, Result};
use crate::field::{
    from_generator_coeffs, state_error, to_generator_coeffs, FourierField, SobolevIndex, WaveState,
};
use crate::mode::ModeIndex;
use crate::propagate::{
    bracket_target, conjugated_step, constant_control_evolve, energy, free_evolve, kick,
    kick_truncated, SplittingParams,
};
use crate::scalar::Scalar;
use crate::schedule::ControlSchedule;
use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct SimConfig<T: Scalar> {
    /// Spatial dimension d of the torus.
    pub dim: usize,
    /// Mode-support cap |k|_inf for kicks during simulation.
    pub n_max: usize,
    /// Largest Strang substep.
    pub dt_max: T,
    /// Relative prune threshold applied to the state between segments.
    pub prune: T,
    /// Grid resolution per axis for sampled-space operations.
    pub grid_n: usize,
    /// Seed for every randomized scan.
    pub seed: u64,
    /// Abort when the truncation residual exceeds this fraction of the
    /// state norm.
    pub trunc_abort: T,
    /// Fraction of the error budget granted to each transfer phase
    /// (first shift, glide residual, second shift).
    pub eps_split: [T; 3],
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        SimConfig {
            dim: 1,
            n_max: 32,
            dt_max: T::of(1e-3),
            prune: T::PRUNE_REL,
            grid_n: 256,
            seed: 0,
            trunc_abort: T::of(1e-3),
            eps_split: [T::of(0.4), T::of(0.2), T::of(0.4)],
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if self.n_max < 2 {
            return Err(Error::Config("N_max must be at least 2".into()));
        }
        if self.dt_max <= T::zero() {
            return Err(Error::Config("dt_max must be positive".into()));
        }
        if self.prune < T::zero() {
            return Err(Error::Config("prune must be nonnegative".into()));
        }
        if self.grid_n < 4 {
            return Err(Error::Config("grid_n must be at least 4".into()));
        }
        if self.trunc_abort <= T::zero() {
            return Err(Error::Config("trunc_abort must be positive".into()));
        }
        let sum = self.eps_split.iter().fold(T::zero(), |a, &b| a + b);
        if self.eps_split.iter().any(|&x| x <= T::zero())
            || (sum - T::one()).abs() > T::of(1e-9)
        {
            return Err(Error::Config(
                "eps_split needs three positive fractions summing to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Flat key=value text, '#' comments, every key optional. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
pub fn parse_config<T: Scalar>(text: &str, context: &str) -> Result<SimConfig<T>> {
    let mut cfg = SimConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
            context: context.to_string(),
            line,
            msg: "expected 'key = value'".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |msg: String| Error::Parse {
            context: context.to_string(),
            line,
            msg,
        };
        match key {
            "d" => cfg.dim = value.parse().map_err(|_| bad(format!("bad d '{value}'")))?,
            "N_max" => {
                cfg.n_max = value.parse().map_err(|_| bad(format!("bad N_max '{value}'")))?
            }
            "dt_max" => cfg.dt_max = parse_positive(value).ok_or_else(|| bad(format!("bad dt_max '{value}'")))?,
            "prune" => {
                cfg.prune = parse_nonnegative(value)
                    .ok_or_else(|| bad(format!("bad prune '{value}'")))?
            }
            "grid_n" => {
                cfg.grid_n = value.parse().map_err(|_| bad(format!("bad grid_n '{value}'")))?
            }
            "seed" => cfg.seed = value.parse().map_err(|_| bad(format!("bad seed '{value}'")))?,
            "trunc_abort" => {
                cfg.trunc_abort = parse_positive(value)
                    .ok_or_else(|| bad(format!("bad trunc_abort '{value}'")))?
            }
            "eps_split" => {
                let parts: Vec<T> = value
                    .split_whitespace()
                    .filter_map(parse_positive)
                    .collect();
                if parts.len() != 3 {
                    return Err(bad("eps_split needs three positive fractions".into()));
                }
                cfg.eps_split = [parts[0], parts[1], parts[2]];
            }
            _ => return Err(bad(format!("unknown key '{key}'"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_positive<T: Scalar>(tok: &str) -> Option<T> {
    let x: f64 = tok.parse().ok()?;
    (x.is_finite() && x > 0.0).then(|| T::of(x))
}

fn parse_nonnegative<T: Scalar>(tok: &str) -> Option<T> {
    let x: f64 = tok.parse().ok()?;
    (x.is_finite() && x >= 0.0).then(|| T::of(x))
}

pub fn write_config<T: Scalar>(cfg: &SimConfig<T>) -> String {
    format!(
        "d = {}\nN_max = {}\ndt_max = {}\nprune = {}\ngrid_n = {}\nseed = {}\ntrunc_abort = {}\neps_split = {} {} {}\n",
        cfg.dim,
        cfg.n_max,
        cfg.dt_max,
        cfg.prune,
        cfg.grid_n,
        cfg.seed,
        cfg.trunc_abort,
        cfg.eps_split[0],
        cfg.eps_split[1],
        cfg.eps_split[2],
    )
}

#[derive(Clone, Debug)]
pub struct TraceRow<T: Scalar> {
    pub t: T,
    pub error_to_target: Option<T>,
    pub energy: T,
    pub truncation_residual: T,
    /// Largest combined amplitudes sqrt(|w_k|^2 + |v_k|^2), descending.
    pub top_modes: Vec<(ModeIndex, T)>,
}

#[derive(Clone, Debug, Default)]
pub struct Trace<T: Scalar> {
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,error_to_target,energy,truncation_residual,top_modes\n");
        for row in &self.rows {
            let _ = write!(out, "{},", row.t);
            if let Some(e) = row.error_to_target {
                let _ = write!(out, "{e}");
            }
            let _ = write!(out, ",{},{},\"", row.energy, row.truncation_residual);
            for (i, (k, a)) in row.top_modes.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                let _ = write!(out, "{k}:{a}");
            }
            out.push_str("\"\n");
        }
        out
    }
}

const TOP_MODE_COUNT: usize = 5;
const MIN_SEGMENT_STEPS: usize = 64;

fn top_modes<T: Scalar>(state: &WaveState<T>) -> Vec<(ModeIndex, T)> {
    let mut amps: std::collections::BTreeMap<ModeIndex, T> = std::collections::BTreeMap::new();
    for (k, c) in state.profile.modes() {
        *amps.entry(k.clone()).or_insert(T::zero()) += c.norm_sqr();
    }
    for (k, c) in state.velocity.modes() {
        *amps.entry(k.clone()).or_insert(T::zero()) += c.norm_sqr();
    }
    let mut v: Vec<(ModeIndex, T)> = amps.into_iter().map(|(k, a)| (k, a.sqrt())).collect();
    v.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite amplitudes")
            .then_with(|| a.0.cmp(&b.0))
    });
    v.truncate(TOP_MODE_COUNT);
    v
}

fn state_norm<T: Scalar>(state: &WaveState<T>) -> T {
    let w = state.profile.sobolev_norm(SobolevIndex::H1);
    let v = state.velocity.sobolev_norm(SobolevIndex::L2);
    (w * w + v * v).sqrt()
}

struct Recorder<'a, T: Scalar> {
    rows: Vec<TraceRow<T>>,
    target: Option<&'a WaveState<T>>,
    trunc_limit_frac: T,
}

impl<'a, T: Scalar> Recorder<'a, T> {
    /// Adds a row, or replaces the last one when time has not advanced
    /// (zero-duration events), keeping t strictly increasing.
    fn record(&mut self, t: T, state: &WaveState<T>, residual: T) -> Result<()> {
        let row = TraceRow {
            t,
            error_to_target: match self.target {
                Some(tg) => Some(state_error(state, tg)?),
                None => None,
            },
            energy: energy(state),
            truncation_residual: residual,
            top_modes: top_modes(state),
        };
        match self.rows.last_mut() {
            Some(last) if last.t == t => *last = row,
            _ => self.rows.push(row),
        }
        let limit = self.trunc_limit_frac * state_norm(state).max(T::of(1e-12));
        if residual > limit {
            return Err(Error::TruncationOverflow {
                residual: residual.to_f64(),
                limit: limit.to_f64(),
                t: t.to_f64(),
            });
        }
        Ok(())
    }
}

/// Runs a schedule from `initial`, recording a trace. When `target` is
/// given, every row also carries the distance to it.
pub fn run_schedule<T: Scalar>(
    initial: &WaveState<T>,
    schedule: &ControlSchedule<T>,
    target: Option<&WaveState<T>>,
    cfg: &SimConfig<T>,
) -> Result<(WaveState<T>, Trace<T>)> {
    cfg.validate()?;
    if initial.dim() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            got: initial.dim(),
        });
    }
    if let Some(tg) = target {
        if tg.dim() != cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: cfg.dim,
                got: tg.dim(),
            });
        }
    }

    let total = schedule.total_time();
    let dt_sample = total / T::of(200.0);
    let mut rec = Recorder {
        rows: Vec::new(),
        target,
        trunc_limit_frac: cfg.trunc_abort,
    };

    let mut state = initial.clone();
    let mut residual = T::zero();
    let mut t = T::zero();
    rec.record(t, &state, residual)?;

    for seg in schedule.segments() {
        if let Some((c, phi)) = &seg.ideal_kick {
            let (next, dropped) = kick_truncated(&state, *c, phi, cfg.n_max)?;
            state = next;
            residual += dropped;
            rec.record(t, &state, residual)?;
            continue;
        }
        if seg.duration == T::zero() {
            continue;
        }
        let seg_start = t;
        if seg.is_zero_control() {
            // exact free flow, chunked only so the trace has rows
            let chunks = (seg.duration / dt_sample).ceil().to_f64().max(1.0) as usize;
            let chunk = seg.duration / T::of(chunks as f64);
            for i in 1..=chunks {
                state = free_evolve(&state, chunk);
                t = seg_start + chunk * T::of(i as f64);
                rec.record(t, &state, residual)?;
            }
        } else {
            let phi = from_generator_coeffs(cfg.dim, &seg.p)?;
            // at least 64 substeps per controlled segment, so short
            // synthesized pulses keep their splitting error far below the
            // limit errors they are meant to expose
            let steps = (seg.duration / cfg.dt_max)
                .ceil()
                .to_f64()
                .max(MIN_SEGMENT_STEPS as f64) as usize;
            let h = seg.duration / T::of(steps as f64);
            let half = h * T::of(0.5);
            let row_every = (dt_sample / h).to_f64().round().max(1.0) as usize;
            for step in 1..=steps {
                state = free_evolve(&state, half);
                let (kicked, dropped) = kick_truncated(&state, h, &phi, cfg.n_max)?;
                state = kicked;
                residual += dropped;
                state = free_evolve(&state, half);
                if step % row_every == 0 || step == steps {
                    t = seg_start + h * T::of(step as f64);
                    rec.record(t, &state, residual)?;
                }
            }
        }
        state = WaveState {
            profile: state.profile.pruned(cfg.prune),
            velocity: state.velocity.pruned(cfg.prune),
        };
    }

    Ok((state, Trace { rows: rec.rows }))
}

/// Which small-time limit a study drives.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LimitKind {
    /// One short segment with amplitudes xi/tau: limit adds xi*w to the
    /// velocity (a kick).
    Kick,
    /// Conjugated kick pair around a free step: limit subtracts psi^2*w
    /// from the velocity (a square kick).
    Square,
}

#[derive(Clone, Debug)]
pub struct LimitRow<T: Scalar> {
    pub tau: T,
    pub error: T,
}

#[derive(Clone, Debug)]
pub struct LimitStudy<T: Scalar> {
    pub rows: Vec<LimitRow<T>>,
    /// Least-squares slope of log(error) against log(tau); an empirical
    /// convergence order (the proofs give no rate).
    pub fitted_order: T,
}

impl<T: Scalar> LimitStudy<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,error\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{}", row.tau, row.error);
        }
        out
    }
}

/// Substeps per tau in the Kick study; keeps the splitting error well under
/// the limit error across tau in [1e-4, 1e-1].
const KICK_STUDY_STEPS: usize = 256;

pub fn limit_study<T: Scalar>(
    kind: LimitKind,
    field: &FourierField<T>,
    initial: &WaveState<T>,
    taus: &[T],
) -> Result<LimitStudy<T>> {
    for pair in taus.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::Config("taus must be strictly decreasing".into()));
        }
    }
    if taus.iter().any(|&t| t <= T::zero()) {
        return Err(Error::Config("taus must be positive".into()));
    }

    let mut rows = Vec::with_capacity(taus.len());
    match kind {
        LimitKind::Kick => {
            let coeffs = to_generator_coeffs(field)?;
            let target = kick(initial, T::one(), field)?;
            for &tau in taus {
                let p: Vec<T> = coeffs.iter().map(|&a| a / tau).collect();
                let params = SplittingParams::new(tau / T::of(KICK_STUDY_STEPS as f64))?;
                let approx = constant_control_evolve(initial, &p, tau, params, None)?.state;
                rows.push(LimitRow {
                    tau,
                    error: state_error(&approx, &target)?,
                });
            }
        }
        LimitKind::Square => {
            let target = bracket_target(initial, field)?;
            for &tau in taus {
                let approx = conjugated_step(initial, field, tau)?;
                rows.push(LimitRow {
                    tau,
                    error: state_error(&approx, &target)?,
                });
            }
        }
    }

    let pts: Vec<(T, T)> = rows
        .iter()
        .filter(|r| r.error > T::zero())
        .map(|r| (r.tau.ln(), r.error.ln()))
        .collect();
    let fitted_order = if pts.len() < 2 {
        T::zero()
    } else {
        let n = T::of(pts.len() as f64);
        let mx = pts.iter().map(|p| p.0).fold(T::zero(), |a, b| a + b) / n;
        let my = pts.iter().map(|p| p.1).fold(T::zero(), |a, b| a + b) / n;
        let mut num = T::zero();
        let mut den = T::zero();
        for (x, y) in &pts {
            num += (*x - mx) * (*y - my);
            den += (*x - mx) * (*x - mx);
        }
        num / den
    };

    Ok(LimitStudy { rows, fitted_order })
}
