//! Measured side of the theory: ratio dynamics against an entire solution,
//! decay-rate fits, contraction factors and the chi-threshold surrogate,
//! front-speed measurement, and chi-perturbation studies.

use serde::{Deserialize, Serialize};

use crate::entire::{
    find_periodic_entire_solution, find_steady_state, pullback_entire_solution, EntireOptions,
    EntireSolution,
};
use crate::error::{Error, Result};
use crate::evolve::{integrate, IntegrateOptions, Trajectory};
use crate::field::ScalarField;
use crate::model::{CoefficientField, Dim, Params};

/// `||U - 1||_inf` and `||V - 1||_inf` per stored time, where `U = u/uplus`
/// and `V = v/vplus`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioSeries {
    pub times: Vec<f64>,
    pub u_dev: Vec<f64>,
    pub v_dev: Vec<f64>,
}

/// Result of fitting `M exp(-alpha t)` to the tail of a deviation series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DecayFit {
    Decay {
        alpha: f64,
        prefactor: f64,
        /// RMS residual of the log-linear least squares fit.
        residual: f64,
    },
    /// The tail does not decay (large-chi probing); a status, not an error.
    NoDecay,
}

impl DecayFit {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            DecayFit::Decay { alpha, .. } => Some(*alpha),
            DecayFit::NoDecay => None,
        }
    }
}

/// The contraction factor of the stability staircase.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContractionFactor {
    pub rho: f64,
    /// Empirical `C0`: sup of `||grad uplus||_inf` over the stored window.
    pub c0: f64,
    /// `C1 = 1 + C0 sqrt(N) / (uplus_inf sqrt(lambda))`.
    pub c1: f64,
    /// Whether the space-independent reduction `chi mu / (b_inf - chi mu)`
    /// was used.
    pub homogeneous: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum StaircaseOutcome {
    /// First stored time at which the level-n bound is met.
    Passed { first_passage: f64 },
    /// Horizon too short to decide this level.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StaircaseLevel {
    pub n: u32,
    pub bound: f64,
    pub outcome: StaircaseOutcome,
}

/// Full stability study of one trajectory against one entire solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub series: RatioSeries,
    pub fit: DecayFit,
    pub contraction: ContractionFactor,
    pub staircase: Vec<StaircaseLevel>,
}

impl StabilityReport {
    pub fn csv_rows(&self, key: &str) -> String {
        let mut out = String::from("key,kind,t,value,bound\n");
        for i in 0..self.series.times.len() {
            out.push_str(&format!(
                "{key},u_dev,{:.16e},{:.16e},\n",
                self.series.times[i], self.series.u_dev[i]
            ));
        }
        if let DecayFit::Decay {
            alpha,
            prefactor,
            residual,
        } = &self.fit
        {
            out.push_str(&format!("{key},alpha_hat,,{alpha:.16e},\n"));
            out.push_str(&format!("{key},prefactor,,{prefactor:.16e},\n"));
            out.push_str(&format!("{key},fit_residual,,{residual:.16e},\n"));
        } else {
            out.push_str(&format!("{key},alpha_hat,,no-decay,\n"));
        }
        out.push_str(&format!("{key},rho,,{:.16e},\n", self.contraction.rho));
        out.push_str(&format!("{key},c0,,{:.16e},\n", self.contraction.c0));
        out.push_str(&format!("{key},c1,,{:.16e},\n", self.contraction.c1));
        for level in &self.staircase {
            match level.outcome {
                StaircaseOutcome::Passed { first_passage } => out.push_str(&format!(
                    "{key},staircase_n{},{first_passage:.16e},pass,{:.16e}\n",
                    level.n, level.bound
                )),
                StaircaseOutcome::Indeterminate => out.push_str(&format!(
                    "{key},staircase_n{},,indeterminate,{:.16e}\n",
                    level.n, level.bound
                )),
            }
        }
        out
    }
}

/// Per-chi gaps to the chi = 0 run, their `gap/chi` ratios, and the
/// entire-solution perturbation against the closed-form bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub chis: Vec<f64>,
    /// `sup_t ||u_chi - u_0||_inf`; `None` when that run failed.
    pub gaps: Vec<Option<f64>>,
    pub ratios: Vec<Option<f64>>,
    /// `sup_t ||uplus_chi - uplus_0||_inf` per chi.
    pub entire_gaps: Vec<Option<f64>>,
    /// Closed-form bound `chi mu a_sup uplus0_sup K / ((b_inf - chi mu)
    /// b_inf uplus0_inf)` per chi.
    pub bounds: Vec<f64>,
    /// `K = 2 + sqrt(N)/sqrt(lambda) sup_t ||grad ln uplus_0||_inf`.
    pub k_value: f64,
    /// Error strings for chis whose runs failed (partial report).
    pub errors: Vec<Option<String>>,
}

impl PerturbationReport {
    pub fn csv_rows(&self, key: &str) -> String {
        let mut out = String::from("key,chi,gap,gap_over_chi,entire_gap,bound,error\n");
        for i in 0..self.chis.len() {
            let fmt = |v: &Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
            out.push_str(&format!(
                "{key},{:.16e},{},{},{},{:.16e},{}\n",
                self.chis[i],
                fmt(&self.gaps[i]),
                fmt(&self.ratios[i]),
                fmt(&self.entire_gaps[i]),
                self.bounds[i],
                self.errors[i].clone().unwrap_or_default()
            ));
        }
        out.push_str(&format!("{key},k_value,{:.16e},,,,\n", self.k_value));
        out
    }
}

/// Measured front position per stored time and the fitted speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontSpeed {
    pub speed: f64,
    /// `(t, x)` of the rightmost threshold crossing per stored time.
    pub crossings: Vec<(f64, f64)>,
}

/// Deviation series of a trajectory from an entire solution on the same
/// grid: `||u/uplus - 1||_inf` and `||v/vplus - 1||_inf` per stored time.
pub fn ratio_series(traj: &Trajectory, sol: &EntireSolution) -> Result<RatioSeries> {
    let grid = traj.first().u.grid();
    if grid != sol.grid() {
        return Err(Error::GridMismatch(
            "trajectory and entire solution live on different grids".into(),
        ));
    }
    let mut times = Vec::new();
    let mut u_dev = Vec::new();
    let mut v_dev = Vec::new();
    for s in traj.states() {
        // both v's carry the model's lambda and mu: the trajectory solves
        // for v each step, the representation stores its own v slices
        let uplus = sol.eval_u(s.t)?;
        let vplus = sol.eval_v(s.t)?;
        let mut du = 0.0_f64;
        let mut dv = 0.0_f64;
        for i in 0..grid.len() {
            du = du.max((s.u.as_slice()[i] / uplus.as_slice()[i] - 1.0).abs());
            dv = dv.max((s.v.as_slice()[i] / vplus.as_slice()[i] - 1.0).abs());
        }
        times.push(s.t);
        u_dev.push(du);
        v_dev.push(dv);
    }
    Ok(RatioSeries {
        times,
        u_dev,
        v_dev,
    })
}

/// Least-squares fit of `log(series)` over the tail half of the samples.
/// Sub-roundoff samples (below `1e-13` of the peak) are censored before the
/// fit so a late noise plateau cannot mask the decay.
pub fn fit_decay_rate(times: &[f64], series: &[f64]) -> DecayFit {
    if times.len() != series.len() || times.len() < 4 {
        return DecayFit::NoDecay;
    }
    let peak = series.iter().copied().fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return DecayFit::NoDecay;
    }
    let floor = 1e-13 * peak;
    let start = times.len() / 2;
    let pts: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&series[start..])
        .filter(|(_, &y)| y > floor)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 3 {
        return DecayFit::NoDecay;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return DecayFit::NoDecay;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    if slope >= -1e-12 {
        return DecayFit::NoDecay;
    }
    let rss: f64 = pts
        .iter()
        .map(|(t, ly)| {
            let r = ly - (intercept + slope * t);
            r * r
        })
        .sum();
    DecayFit::Decay {
        alpha: -slope,
        prefactor: intercept.exp(),
        residual: (rss / n).sqrt(),
    }
}

/// Contraction factor `rho = chi mu C1 uplus_sup / ((b_inf - chi mu)
/// uplus_inf)` with `C1 = 1 + C0 sqrt(N) / (uplus_inf sqrt(lambda))` and
/// `C0` measured on the stored window. Spatially homogeneous solutions use
/// the reduced factor `chi mu / (b_inf - chi mu)`.
pub fn contraction_factor(
    sol: &EntireSolution,
    params: &Params,
    coeffs: &CoefficientField,
) -> ContractionFactor {
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    if sol.is_space_homogeneous() {
        return ContractionFactor {
            rho: cm / (e.b_inf - cm),
            c0: 0.0,
            c1: 1.0,
            homogeneous: true,
        };
    }
    let c0 = sol.stats.grad_sup;
    let n = params.dim.as_usize() as f64;
    let c1 = 1.0 + c0 * n.sqrt() / (sol.stats.u_inf * params.lambda.sqrt());
    ContractionFactor {
        rho: cm * c1 * sol.stats.u_sup / ((e.b_inf - cm) * sol.stats.u_inf),
        c0,
        c1,
        homogeneous: false,
    }
}

/// Construct the entire solution appropriate to the coefficient kind.
pub fn construct_entire(
    coeffs: &CoefficientField,
    params: &Params,
    opts: &EntireOptions,
) -> Result<EntireSolution> {
    if coeffs.is_autonomous() {
        find_steady_state(coeffs, params, opts)
    } else if coeffs.period().is_some() {
        find_periodic_entire_solution(coeffs, params, opts)
    } else {
        pullback_entire_solution(coeffs, params, &[4, 8, 12], 1.0, opts)
    }
}

/// Grid-refinement error bar attached to the empirical `C0`: reconstruct
/// the entire solution at half the resolution and return
/// `(C0_fine, |C0_fine - C0_coarse|)`.
pub fn c0_refinement_error(
    coeffs: &CoefficientField,
    params: &Params,
    opts: &EntireOptions,
) -> Result<(f64, f64)> {
    let fine = construct_entire(coeffs, params, opts)?;
    let coarse_params = Params::new(
        params.chi,
        params.lambda,
        params.mu,
        params.dim,
        params.box_half_length,
        params.grid_points / 2,
    )?;
    let coarse = construct_entire(coeffs, &coarse_params, opts)?;
    Ok((
        fine.stats.grad_sup,
        (fine.stats.grad_sup - coarse.stats.grad_sup).abs(),
    ))
}

/// Largest chi on (a refinement of) the grid below which the contraction
/// factor stays < 1 for a constructed entire solution. Returns `None` when
/// the smallest grid point already has `rho >= 1`. The reported value is
/// the largest chi actually verified, after bisecting the first failing
/// bracket down to 1/16 of its width.
pub fn chi0_surrogate(
    coeffs: &CoefficientField,
    params: &Params,
    chi_grid: &[f64],
    opts: &EntireOptions,
) -> Result<Option<f64>> {
    let e = coeffs.envelopes();
    if chi_grid.is_empty() || !chi_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::invalid("chi grid must be non-empty and increasing"));
    }
    if chi_grid[0] <= 0.0 || *chi_grid.last().unwrap() >= e.b_inf / params.mu {
        return Err(Error::invalid(format!(
            "chi grid must lie inside (0, b_inf/mu) = (0, {})",
            e.b_inf / params.mu
        )));
    }
    let rho_at = |chi: f64| -> Result<f64> {
        let p = params.with_chi(chi)?;
        let sol = construct_entire(coeffs, &p, opts)?;
        Ok(contraction_factor(&sol, &p, coeffs).rho)
    };
    let mut last_pass: Option<f64> = None;
    let mut first_fail: Option<f64> = None;
    for &chi in chi_grid {
        if rho_at(chi)? < 1.0 {
            last_pass = Some(chi);
        } else {
            first_fail = Some(chi);
            break;
        }
    }
    let Some(mut pass) = last_pass else {
        return Ok(None);
    };
    if let Some(mut fail) = first_fail {
        let tol = (fail - pass) / 16.0;
        while fail - pass > tol {
            let mid = 0.5 * (pass + fail);
            if rho_at(mid)? < 1.0 {
                pass = mid;
            } else {
                fail = mid;
            }
        }
    }
    Ok(Some(pass))
}

/// Level-n bounds of the stability staircase:
/// `rho^n a_sup / ((b_inf - chi mu) uplus_inf) + eps` with the pinned
/// `eps = 0.01 a_sup / (b_inf - chi mu)`, checked against the deviation
/// series; reports the first stored time each level is met.
pub fn staircase_check(
    series: &RatioSeries,
    sol: &EntireSolution,
    params: &Params,
    coeffs: &CoefficientField,
    n_max: u32,
) -> Result<Vec<StaircaseLevel>> {
    let cf = contraction_factor(sol, params, coeffs);
    if !(cf.rho < 1.0) {
        return Err(Error::invalid(format!(
            "staircase needs contraction factor < 1, got rho = {}",
            cf.rho
        )));
    }
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    let eps = 0.01 * e.a_sup / (e.b_inf - cm);
    let prefactor = e.a_sup / ((e.b_inf - cm) * sol.stats.u_inf);
    let mut levels = Vec::new();
    for n in 1..=n_max {
        let bound = cf.rho.powi(n as i32) * prefactor + eps;
        let outcome = series
            .times
            .iter()
            .zip(&series.u_dev)
            .find(|(_, &dev)| dev <= bound)
            .map_or(StaircaseOutcome::Indeterminate, |(&t, _)| {
                StaircaseOutcome::Passed { first_passage: t }
            });
        levels.push(StaircaseLevel { n, bound, outcome });
    }
    Ok(levels)
}

/// Convenience bundle: ratio series, decay fit, contraction factor, and the
/// staircase at levels `1..=n_max`.
pub fn stability_report(
    traj: &Trajectory,
    sol: &EntireSolution,
    params: &Params,
    coeffs: &CoefficientField,
    n_max: u32,
) -> Result<StabilityReport> {
    let series = ratio_series(traj, sol)?;
    let fit = fit_decay_rate(&series.times, &series.u_dev);
    let contraction = contraction_factor(sol, params, coeffs);
    let staircase = if contraction.rho < 1.0 {
        staircase_check(&series, sol, params, coeffs, n_max)?
    } else {
        Vec::new()
    };
    Ok(StabilityReport {
        series,
        fit,
        contraction,
        staircase,
    })
}

/// Width of the guard band (in cells) the front must keep from the box
/// boundary before the measurement aborts with `BoxTooSmall`.
const FRONT_GUARD_CELLS: f64 = 10.0;

/// Rightmost crossing of `u = threshold` per stored time, and the speed
/// from a least-squares fit over the last third of the run. One spatial
/// dimension; fronts must stay clear of the box boundary.
pub fn front_speed(traj: &Trajectory, threshold: f64) -> Result<FrontSpeed> {
    let grid = traj.first().u.grid();
    if grid.dim != Dim::One {
        return Err(Error::invalid(
            "front tracking is implemented for one spatial dimension",
        ));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    let n = grid.n[0];
    let guard = grid.half_length - FRONT_GUARD_CELLS * grid.h;
    let mut crossings = Vec::new();
    for s in traj.states() {
        let u = s.u.as_slice();
        // scan from the right edge toward the center for the last node
        // above threshold
        let mut found = None;
        for i in (0..n).rev() {
            if u[i] >= threshold {
                found = Some(i);
                break;
            }
        }
        let Some(i) = found else {
            return Err(Error::NoFront { threshold });
        };
        let x = if i + 1 < n {
            // linear interpolation of the crossing inside [x_i, x_{i+1}]
            let frac = (u[i] - threshold) / (u[i] - u[i + 1]).max(f64::MIN_POSITIVE);
            grid.axis_coord(i) + grid.h * frac.clamp(0.0, 1.0)
        } else {
            grid.axis_coord(i)
        };
        if x > guard || i + 1 >= n {
            return Err(Error::BoxTooSmall {
                t: s.t,
                position: x,
            });
        }
        crossings.push((s.t, x));
    }
    // fit over the last third
    if crossings.len() < 2 {
        return Err(Error::InsufficientStates(
            "front speed needs >= 2 stored times".into(),
        ));
    }
    let start = crossings
        .len()
        .saturating_sub(crossings.len() / 3)
        .min(crossings.len() - 2);
    let tail = &crossings[start..];
    let n_f = tail.len() as f64;
    let sx: f64 = tail.iter().map(|p| p.0).sum();
    let sy: f64 = tail.iter().map(|p| p.1).sum();
    let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
    let speed = (n_f * sxy - sx * sy) / (n_f * sxx - sx * sx);
    Ok(FrontSpeed { speed, crossings })
}

#[derive(Debug, Clone, Copy)]
pub struct PerturbationOptions {
    pub store_interval: f64,
    pub dt_max: f64,
    pub entire: EntireOptions,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions {
            store_interval: 0.25,
            dt_max: 0.01,
            entire: EntireOptions::default(),
        }
    }
}

/// Run the coupled system once per chi plus the chi = 0 baseline, tabulate
/// `sup_t ||u_chi - u_0||_inf` and `gap/chi`, and compare the
/// entire-solution gap against the closed-form first-order bound with `K`
/// measured from the chi = 0 entire solution. Per-chi failures leave a
/// partial report.
pub fn perturbation_study(
    u0: &ScalarField,
    chi_list: &[f64],
    horizon: f64,
    coeffs: &CoefficientField,
    params: &Params,
    opts: &PerturbationOptions,
) -> Result<PerturbationReport> {
    if u0.min() <= 0.0 {
        return Err(Error::invalid(
            "perturbation study needs strictly positive u0",
        ));
    }
    let e = coeffs.envelopes();
    if chi_list.is_empty()
        || chi_list
            .iter()
            .any(|&c| c <= 0.0 || c >= e.b_inf / params.mu)
    {
        return Err(Error::invalid(format!(
            "chi list must lie inside (0, b_inf/mu) = (0, {})",
            e.b_inf / params.mu
        )));
    }
    let run_opts = IntegrateOptions {
        policy: crate::evolve::StepPolicy::Adaptive {
            dt_max: opts.dt_max,
        },
        store_interval: opts.store_interval,
        ..Default::default()
    };
    let params0 = params.with_chi(0.0)?;
    let base = integrate(u0, 0.0, horizon, coeffs, &params0, &run_opts)?;
    let uplus0 = construct_entire(coeffs, &params0, &opts.entire)?;
    let n = params.dim.as_usize() as f64;
    let k_value = 2.0 + n.sqrt() / params.lambda.sqrt() * uplus0.stats.grad_log_sup;

    let mut report = PerturbationReport {
        chis: chi_list.to_vec(),
        gaps: Vec::new(),
        ratios: Vec::new(),
        entire_gaps: Vec::new(),
        bounds: Vec::new(),
        k_value,
        errors: Vec::new(),
    };
    for &chi in chi_list {
        let cm = chi * params.mu;
        report.bounds.push(
            cm * e.a_sup * uplus0.stats.u_sup * k_value
                / ((e.b_inf - cm) * e.b_inf * uplus0.stats.u_inf),
        );
        let attempt = || -> Result<(f64, f64)> {
            let p = params.with_chi(chi)?;
            let traj = integrate(u0, 0.0, horizon, coeffs, &p, &run_opts)?;
            let mut gap = 0.0_f64;
            for (s_chi, s_base) in traj.states().iter().zip(base.states()) {
                if (s_chi.t - s_base.t).abs() > 1e-9 {
                    return Err(Error::invalid("stored time grids diverged"));
                }
                gap = gap.max(s_chi.u.sup_distance(&s_base.u)?);
            }
            let uplus_chi = construct_entire(coeffs, &p, &opts.entire)?;
            let mut entire_gap = 0.0_f64;
            // compare on the phase grid of the chi = 0 representation
            for s in match &uplus0.repr {
                crate::entire::EntireRepresentation::Steady(s) => vec![s.t],
                crate::entire::EntireRepresentation::Periodic { states, .. }
                | crate::entire::EntireRepresentation::Window { states, .. } => {
                    states.iter().map(|s| s.t).collect()
                }
            } {
                let a = uplus_chi.eval_u(s)?;
                let b = uplus0.eval_u(s)?;
                entire_gap = entire_gap.max(a.sup_distance(&b)?);
            }
            Ok((gap, entire_gap))
        };
        match attempt() {
            Ok((gap, entire_gap)) => {
                report.gaps.push(Some(gap));
                report.ratios.push(Some(gap / chi));
                report.entire_gaps.push(Some(entire_gap));
                report.errors.push(None);
            }
            Err(err) => {
                report.gaps.push(None);
                report.ratios.push(None);
                report.entire_gaps.push(None);
                report.errors.push(Some(err.to_string()));
            }
        }
    }
    Ok(report)
}
