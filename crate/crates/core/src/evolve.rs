//! Time stepping for the coupled system
//!
//! ```text
//! du/dt = Lap(u) - chi div(u grad v) + u (a(x,t) - b(x,t) u),
//!     0 = Lap(v) - lambda v + mu u.
//! ```
//!
//! One step is a Strang composition whose sub-flows each preserve
//! positivity: exact spectral half-steps for the diffusion, an explicit
//! conservative upwind finite-volume step for the transport `-chi
//! div(u grad v)` (positive under the CFL guard), and an exact pointwise
//! logistic solve for the reaction with coefficients frozen at the step
//! midpoint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};
use crate::model::{validate_coefficients, Coefficient, CoefficientField, Params};
use crate::spectral::SpectralOps;

/// Undershoots above this are roundoff and clamp silently.
const CLAMP_SILENT: f64 = -1e-12;
/// Undershoots above this clamp with a warning; below it the step fails.
const CLAMP_ERROR: f64 = -1e-8;
/// Positive far-field cutoff, relative to the field's sup. Spectral
/// transforms deposit roundoff-level mass everywhere; under a logistic
/// source any positive seed grows like `exp(a t)` and would fill the far
/// field of compact-support runs in finite time. Zeroing values below
/// `1e-12 sup u` removes those seeds while staying inactive for any field
/// of dynamic range below 1e12.
const POSITIVE_CUTOFF: f64 = 1e-12;
/// Safety factor of the transport CFL condition.
const CFL_SAFETY: f64 = 0.4;
/// Retries of a failed step at half the step size.
const MAX_RETRIES: usize = 5;

/// The pair `(u, v)` at one time, with `v` slaved to `u` through the
/// Helmholtz solve.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
}

impl State {
    /// Build a state from a nonnegative species density; solves for `v`.
    pub fn new(t: f64, u: ScalarField, params: &Params) -> Result<Self> {
        if !u.all_finite() {
            return Err(Error::NonFinite("initial density"));
        }
        let mut u = u;
        clamp_negative(&mut u, t)?;
        let ops = SpectralOps::new(u.grid());
        let v = ops.helmholtz_solve(&u, params.lambda, params.mu)?;
        Ok(State { t, u, v })
    }
}

/// Per-step record: accepted step size and the pre-clamp extrema of `u`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    pub min_u: f64,
    pub max_u: f64,
}

/// Stored states at increasing times plus the step-size history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<State>,
    steps: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn from_states(states: Vec<State>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InsufficientStates(
                "trajectory needs >= 1 state".into(),
            ));
        }
        if !states.windows(2).all(|w| w[1].t > w[0].t) {
            return Err(Error::invalid("stored times must be strictly increasing"));
        }
        Ok(Trajectory {
            states,
            steps: Vec::new(),
        })
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn steps(&self) -> &[StepDiagnostics] {
        &self.steps
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("non-empty by construction")
    }

    /// Stored state at time `t` (within absolute slack `1e-9`).
    pub fn state_at(&self, t: f64) -> Option<&State> {
        self.states.iter().find(|s| (s.t - t).abs() <= 1e-9)
    }

    /// Running minimum of `u` over all accepted steps.
    pub fn min_over_run(&self) -> f64 {
        self.steps
            .iter()
            .map(|d| d.min_u)
            .fold(self.states[0].u.min(), f64::min)
    }

    /// Checkpoint directory: JSON manifest (times, diagnostics) plus one
    /// binary field file per stored state. `v` is recomputed on load.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let manifest = TrajectoryManifest {
            times: self.times(),
            steps: self.steps.clone(),
        };
        let json =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join("trajectory.json"), json)?;
        for (i, s) in self.states.iter().enumerate() {
            s.u.save(dir.join(format!("state_{i:05}.bin")))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, params: &Params) -> Result<Self> {
        let dir = dir.as_ref();
        let json = std::fs::read_to_string(dir.join("trajectory.json"))?;
        let manifest: TrajectoryManifest =
            serde_json::from_str(&json).map_err(|e| Error::Format(e.to_string()))?;
        let mut states = Vec::with_capacity(manifest.times.len());
        for (i, &t) in manifest.times.iter().enumerate() {
            let u = ScalarField::load(dir.join(format!("state_{i:05}.bin")))?;
            states.push(State::new(t, u, params)?);
        }
        let mut traj = Trajectory::from_states(states)?;
        traj.steps = manifest.steps;
        Ok(traj)
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryManifest {
    times: Vec<f64>,
    steps: Vec<StepDiagnostics>,
}

/// Step-size policy. `Fixed` uses the given nominal step (still clipped to
/// land on storage boundaries); `Adaptive` obeys the transport CFL guard.
#[derive(Debug, Clone, Copy)]
pub enum StepPolicy {
    Fixed(f64),
    Adaptive { dt_max: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub policy: StepPolicy,
    /// Time between stored states; `0` stores every accepted step.
    pub store_interval: f64,
    /// Blow-up guard: error when `sup u` exceeds this multiple of
    /// `max(sup u0, a_sup/(b_inf - chi mu))` while (H1) holds.
    pub blowup_factor: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            policy: StepPolicy::Adaptive { dt_max: 0.02 },
            store_interval: 0.1,
            blowup_factor: 10.0,
        }
    }
}

fn clamp_negative(u: &mut ScalarField, t: f64) -> Result<(f64, usize)> {
    let mut min_before = f64::INFINITY;
    let mut sup = 0.0_f64;
    for v in u.as_slice() {
        min_before = min_before.min(*v);
        sup = sup.max(*v);
    }
    if min_before < CLAMP_ERROR {
        return Err(Error::PositivityLoss {
            t,
            min_u: min_before,
        });
    }
    let floor = POSITIVE_CUTOFF * sup;
    let mut warned = 0usize;
    for v in u.as_mut_slice() {
        if *v < floor {
            if *v < CLAMP_SILENT {
                warned += 1;
            }
            *v = 0.0;
        }
    }
    if warned > 0 {
        log::warn!("clamped {warned} node(s) in [{CLAMP_ERROR:e}, {CLAMP_SILENT:e}) at t = {t}");
    }
    Ok((min_before, warned))
}

/// Conservative upwind divergence of the chemotactic flux `chi u grad v`
/// with face-centered velocities `w = chi (v_next - v)/h`; this is the
/// spatial transport operator of the stepper, exposed so residual checks
/// can evaluate the same discrete system the stepper integrates.
pub(crate) fn upwind_chemotactic_divergence(
    u: &ScalarField,
    v: &ScalarField,
    chi: f64,
) -> ScalarField {
    let grid = *u.grid();
    let (nx, ny, h) = (grid.n[0], grid.n[1], grid.h);
    let us = u.as_slice();
    let vs = v.as_slice();
    let mut out = vec![0.0; us.len()];
    // x-direction fluxes, row by row
    let mut flux = vec![0.0; nx];
    for iy in 0..ny {
        let row = iy * nx;
        for ix in 0..nx {
            let ip = row + (ix + 1) % nx;
            let w = chi * (vs[ip] - vs[row + ix]) / h;
            flux[ix] = if w >= 0.0 {
                w * us[row + ix]
            } else {
                w * us[ip]
            };
        }
        for ix in 0..nx {
            let im = (ix + nx - 1) % nx;
            out[row + ix] += (flux[ix] - flux[im]) / h;
        }
    }
    if ny > 1 {
        let mut fy = vec![0.0; nx * ny];
        for iy in 0..ny {
            let ipy = ((iy + 1) % ny) * nx;
            let row = iy * nx;
            for ix in 0..nx {
                let w = chi * (vs[ipy + ix] - vs[row + ix]) / h;
                fy[row + ix] = if w >= 0.0 {
                    w * us[row + ix]
                } else {
                    w * us[ipy + ix]
                };
            }
        }
        for iy in 0..ny {
            let imy = ((iy + ny - 1) % ny) * nx;
            let row = iy * nx;
            for ix in 0..nx {
                out[row + ix] += (fy[row + ix] - fy[imy + ix]) / h;
            }
        }
    }
    ScalarField::from_values(grid, out).expect("size preserved")
}

/// The splitting engine: FFT plans plus model references.
pub struct Stepper<'a> {
    ops: SpectralOps,
    params: &'a Params,
    coeffs: &'a CoefficientField,
    grid: Grid,
}

impl<'a> Stepper<'a> {
    pub fn new(params: &'a Params, coeffs: &'a CoefficientField) -> Result<Self> {
        params.validate()?;
        coeffs.check_h()?;
        coeffs.validate_for(params)?;
        let grid = params.grid();
        Ok(Stepper {
            ops: SpectralOps::new(&grid),
            params,
            coeffs,
            grid,
        })
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    /// Per-axis max of face-centered `|dv/dx_axis|`.
    fn face_gradient_sup(&self, v: &ScalarField) -> [f64; 2] {
        let (nx, ny, h) = (self.grid.n[0], self.grid.n[1], self.grid.h);
        let vs = v.as_slice();
        let mut gx = 0.0_f64;
        let mut gy = 0.0_f64;
        for iy in 0..ny {
            let row = iy * nx;
            for ix in 0..nx {
                let ipx = row + (ix + 1) % nx;
                gx = gx.max((vs[ipx] - vs[row + ix]).abs() / h);
            }
        }
        if ny > 1 {
            for iy in 0..ny {
                let ipy = ((iy + 1) % ny) * nx;
                let row = iy * nx;
                for ix in 0..nx {
                    gy = gy.max((vs[ipy + ix] - vs[row + ix]).abs() / h);
                }
            }
        }
        [gx, gy]
    }

    /// Largest step satisfying both the nominal CFL rule
    /// `dt <= 0.4 h / sup|grad v|` and the positivity guard
    /// `dt <= 0.4 h / sum_axis sup|chi dv/dx_axis|`.
    pub fn cfl_dt(&self, v: &ScalarField) -> f64 {
        let g = self.face_gradient_sup(v);
        let grad_sup = g[0].max(g[1]);
        let chi_sum = self.params.chi * (g[0] + g[1]);
        let denom = grad_sup.max(chi_sum);
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            CFL_SAFETY * self.grid.h / denom
        }
    }

    /// Conservative upwind transport `u -= dt div(u w)` with face velocity
    /// `w = chi grad v` from face differences of `v`.
    fn transport(&self, u: &ScalarField, v: &ScalarField, dt: f64) -> ScalarField {
        let div = upwind_chemotactic_divergence(u, v, self.params.chi);
        u.add_scaled(-dt, &div).expect("same grid")
    }

    /// Exact pointwise logistic flow over `dt` with coefficients frozen at
    /// `t_mid`: `u -> a u / (a + expm1(-a dt) (a - b u))`.
    fn reaction(&self, u: &mut ScalarField, t_mid: f64, dt: f64) -> Result<()> {
        let a = self.coeffs.on_grid(Coefficient::A, &self.grid, t_mid)?;
        let b = self.coeffs.on_grid(Coefficient::B, &self.grid, t_mid)?;
        for ((uv, &av), &bv) in u
            .as_mut_slice()
            .iter_mut()
            .zip(a.as_slice())
            .zip(b.as_slice())
        {
            let em1 = (-av * dt).exp_m1();
            *uv = av * *uv / (av + em1 * (av - bv * *uv));
        }
        Ok(())
    }

    /// One Strang step from `state` over `dt`. Returns the new state with a
    /// fresh elliptic solve; diagnostics carry the pre-clamp minimum.
    pub fn step(&self, state: &State, dt: f64) -> Result<(State, StepDiagnostics)> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let t_end = state.t + dt;
        let t_mid = state.t + 0.5 * dt;

        // half diffusion
        let mut u = self.ops.diffuse(&state.u, 0.5 * dt)?;
        let (mut min_u, _) = clamp_negative(&mut u, t_end)?;

        // transport with velocity frozen from the mid-stage elliptic solve
        if self.params.chi != 0.0 {
            let v_mid = self
                .ops
                .helmholtz_solve(&u, self.params.lambda, self.params.mu)?;
            u = self.transport(&u, &v_mid, dt);
            let (m, _) = clamp_negative(&mut u, t_end)?;
            min_u = min_u.min(m);
        }

        // exact logistic reaction at the midpoint coefficients
        self.reaction(&mut u, t_mid, dt)?;

        // half diffusion
        let mut u = self.ops.diffuse(&u, 0.5 * dt)?;
        let (m, _) = clamp_negative(&mut u, t_end)?;
        min_u = min_u.min(m);

        if !u.all_finite() {
            return Err(Error::NonFinite("species density after step"));
        }
        let v = self
            .ops
            .helmholtz_solve(&u, self.params.lambda, self.params.mu)?;
        let diag = StepDiagnostics {
            t: t_end,
            dt,
            min_u,
            max_u: u.max(),
        };
        Ok((State { t: t_end, u, v }, diag))
    }
}

/// Single-step convenience wrapper. The blow-up guard references the input
/// state's sup norm.
pub fn step(state: &State, dt: f64, coeffs: &CoefficientField, params: &Params) -> Result<State> {
    let stepper = Stepper::new(params, coeffs)?;
    let guard = blowup_guard(state.u.max(), coeffs, params);
    let (next, _) = stepper.step(state, dt)?;
    check_blowup(&next, guard)?;
    Ok(next)
}

fn blowup_guard(u0_sup: f64, coeffs: &CoefficientField, params: &Params) -> Option<f64> {
    let report = validate_coefficients(coeffs, params).ok()?;
    if !report.holds_h1 {
        return None;
    }
    let e = coeffs.envelopes();
    Some(u0_sup.max(e.a_sup / (e.b_inf - params.chi_mu())))
}

fn check_blowup(state: &State, guard: Option<f64>) -> Result<()> {
    if let Some(reference) = guard {
        let sup = state.u.max();
        if sup > 10.0 * reference {
            return Err(Error::BlowupDetected {
                t: state.t,
                sup_u: sup,
                bound: 10.0 * reference,
            });
        }
    }
    Ok(())
}

/// Integrate from `u0` at `t0` over `horizon`, storing states every
/// `opts.store_interval` time units (step sizes are clipped so stored times
/// are hit exactly). Warns when (H1) fails; propagates step errors with the
/// failing time attached.
pub fn integrate(
    u0: &ScalarField,
    t0: f64,
    horizon: f64,
    coeffs: &CoefficientField,
    params: &Params,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon must be nonnegative"));
    }
    if u0.min() < 0.0 {
        return Err(Error::invalid(format!(
            "initial density must be nonnegative, min = {}",
            u0.min()
        )));
    }
    let state = State::new(t0, u0.clone(), params)?;
    integrate_state(state, horizon, coeffs, params, opts)
}

/// Continue an integration from an existing state (checkpoint resume).
pub fn integrate_state(
    state: State,
    horizon: f64,
    coeffs: &CoefficientField,
    params: &Params,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let stepper = Stepper::new(params, coeffs)?;
    match validate_coefficients(coeffs, params) {
        Ok(report) if !report.holds_h1 => {
            log::warn!(
                "(H1) fails (slack {:.3e}): global existence is not guaranteed",
                report.slack_h1
            );
        }
        _ => {}
    }
    let guard = blowup_guard(state.u.max(), coeffs, params);
    let t0 = state.t;
    let t_end = t0 + horizon;
    let time_scale = t_end.abs().max(1.0);
    let store = opts.store_interval.max(0.0);

    let mut states = vec![state];
    let mut steps: Vec<StepDiagnostics> = Vec::new();
    let mut current = states[0].clone();
    let mut next_store = if store > 0.0 { t0 + store } else { t0 };

    while current.t < t_end - 1e-12 * time_scale {
        let dt_nominal = match opts.policy {
            StepPolicy::Fixed(dt) => dt,
            StepPolicy::Adaptive { dt_max } => dt_max.min(stepper.cfl_dt(&current.v)),
        };
        let mut dt = dt_nominal.min(t_end - current.t);
        if store > 0.0 && next_store > current.t {
            dt = dt.min(next_store - current.t);
        }
        let mut attempt = 0usize;
        let (next, diag) = loop {
            match stepper.step(&current, dt) {
                Ok(ok) => break ok,
                Err(Error::PositivityLoss { .. }) if attempt < MAX_RETRIES => {
                    attempt += 1;
                    dt *= 0.5;
                    log::warn!(
                        "positivity loss at t = {}; retrying with dt = {dt:.3e}",
                        current.t
                    );
                }
                Err(e) => return Err(e.at_time(current.t)),
            }
        };
        check_blowup(&next, guard)?;
        steps.push(diag);
        current = next;
        let due = store <= 0.0
            || current.t >= next_store - 1e-12 * time_scale
            || current.t >= t_end - 1e-12 * time_scale;
        if due {
            states.push(current.clone());
            while store > 0.0 && next_store <= current.t + 1e-12 * time_scale {
                next_store += store;
            }
        }
    }
    let mut traj = Trajectory::from_states(states)?;
    traj.steps = steps;
    Ok(traj)
}

/// Consistency diagnostic: evaluate both sides of the mild (variation of
/// constants) formulation with the semigroup `T(t) = exp(t (Lap - I))` over
/// one coarse window of stored states around `sample_t`, integrating
/// `T(t-s) [ -chi div(u grad v) + (a + 1 - b u) u ](s)` by composite
/// quadrature on the stored nodes. Returns the sup-norm discrepancy.
pub fn mild_residual(
    traj: &Trajectory,
    sample_t: f64,
    coeffs: &CoefficientField,
    params: &Params,
) -> Result<f64> {
    let states = traj.states();
    if states.len() < 3 {
        return Err(Error::InsufficientStates(
            "mild residual needs >= 3 stored states".into(),
        ));
    }
    let t_first = states[0].t;
    let t_last = states[states.len() - 1].t;
    if sample_t < t_first - 1e-9 || sample_t > t_last + 1e-9 {
        return Err(Error::invalid(format!(
            "sample time {sample_t} outside stored window [{t_first}, {t_last}]"
        )));
    }
    // window of up to 9 consecutive states around the sample time
    let anchor = states
        .iter()
        .position(|s| s.t >= sample_t - 1e-9)
        .unwrap_or(states.len() - 1);
    let start = anchor.saturating_sub(4);
    let end = (start + 8).min(states.len() - 1);
    let start = end.saturating_sub(8).min(start);
    let window = &states[start..=end];
    let m = window.len() - 1; // number of intervals

    let ops = SpectralOps::new(states[0].u.grid());
    let grid = *states[0].u.grid();
    let chi = params.chi;
    let t_k = window[m].t;

    // forcing G(s) = -chi div(u grad v) + (a + 1 - b u) u at each node
    let mut forcing = Vec::with_capacity(window.len());
    for s in window {
        let a = coeffs.on_grid(Coefficient::A, &grid, s.t)?;
        let b = coeffs.on_grid(Coefficient::B, &grid, s.t)?;
        let mut g = ScalarField::zeros(grid);
        if chi != 0.0 {
            let grad_v = ops.gradient(&s.v)?;
            let flux = crate::field::VectorField::new(
                grad_v
                    .components()
                    .iter()
                    .map(|c| {
                        let mut f = c.clone();
                        for (fv, &uv) in f.as_mut_slice().iter_mut().zip(s.u.as_slice()) {
                            *fv *= uv;
                        }
                        f
                    })
                    .collect(),
            )?;
            g = ops.divergence(&flux)?.map(|x| -chi * x);
        }
        for i in 0..grid.len() {
            let uv = s.u.as_slice()[i];
            g.as_mut_slice()[i] += (a.as_slice()[i] + 1.0 - b.as_slice()[i] * uv) * uv;
        }
        forcing.push(g);
    }

    // quadrature weights: composite Simpson when the spacing is uniform and
    // the interval count even, composite trapezoid otherwise
    let times: Vec<f64> = window.iter().map(|s| s.t).collect();
    let spacing = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-9 * spacing.max(1e-12));
    let weights: Vec<f64> = if uniform && m >= 2 && m % 2 == 0 {
        (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * spacing / 3.0
            })
            .collect()
    } else {
        (0..=m)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { times[i] - times[i - 1] };
                let right = if i == m { 0.0 } else { times[i + 1] - times[i] };
                0.5 * (left + right)
            })
            .collect()
    };

    // RHS = T(t_k - t_0) u(t_0) + sum_i w_i T(t_k - s_i) G(s_i)
    let mut rhs = ops.damped_semigroup(&window[0].u, t_k - times[0])?;
    for i in 0..=m {
        let propagated = ops.damped_semigroup(&forcing[i], t_k - times[i])?;
        rhs = rhs.add_scaled(weights[i], &propagated)?;
    }
    window[m].u.sup_distance(&rhs)
}
