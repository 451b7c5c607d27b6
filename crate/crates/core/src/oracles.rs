//! Closed-form side of the theory: scalar comparison envelopes, pointwise
//! lower bounds, the box principal eigenvalue, and spreading speeds.
//!
//! Everything here is an explicit formula or a scalar ODE; scalar logistic
//! equations use the closed-form solution when the coefficients are
//! constant and a fixed-step fourth-order integrator otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_coefficients, CoefficientField, Dim, ModelConfig, Params};

/// Predicted lower/upper envelopes in time, their asymptotic limits, and
/// optional pass/fail checks attached by certification routines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    /// Name of the bound family that produced the report.
    pub provenance: String,
    pub times: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_limit: f64,
    pub upper_limit: f64,
    pub checks: Vec<BoundCheck>,
}

/// One certified inequality: `measured` against a required window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub required_low: Option<f64>,
    pub required_high: Option<f64>,
    pub measured: f64,
    /// Distance to the nearest violated side; negative on failure.
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn window(
        name: impl Into<String>,
        lo: Option<f64>,
        hi: Option<f64>,
        measured: f64,
    ) -> Self {
        let mut margin = f64::INFINITY;
        if let Some(lo) = lo {
            margin = margin.min(measured - lo);
        }
        if let Some(hi) = hi {
            margin = margin.min(hi - measured);
        }
        BoundCheck {
            name: name.into(),
            required_low: lo,
            required_high: hi,
            measured,
            margin,
            pass: margin >= 0.0,
        }
    }
}

impl BoundsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// CSV rows keyed by a parameter hash, 17 significant digits.
    pub fn csv_rows(&self, key: &str) -> String {
        let mut out = String::from("key,kind,name,t,lower,upper,measured,margin,pass\n");
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!(
                "{key},envelope,{},{:.16e},{:.16e},{:.16e},,,\n",
                self.provenance, t, self.lower[i], self.upper[i]
            ));
        }
        out.push_str(&format!(
            "{key},limit,{},,{:.16e},{:.16e},,,\n",
            self.provenance, self.lower_limit, self.upper_limit
        ));
        for c in &self.checks {
            out.push_str(&format!(
                "{key},check,{},,{},{},{:.16e},{:.16e},{}\n",
                c.name,
                c.required_low
                    .map_or(String::new(), |v| format!("{v:.16e}")),
                c.required_high
                    .map_or(String::new(), |v| format!("{v:.16e}")),
                c.measured,
                c.margin,
                c.pass
            ));
        }
        out
    }
}

/// Closed-form spreading speeds and the (H3) slack; the measured slot is
/// filled by the analysis module.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpreadingReport {
    pub c_plus_star: f64,
    /// `None` when (H3) fails: no meaningful lower spreading speed.
    pub c_minus_star: Option<f64>,
    pub h3_slack: f64,
    pub measured_speed: Option<f64>,
}

impl SpreadingReport {
    pub fn csv_rows(&self, key: &str) -> String {
        let mut out = String::from("key,name,value\n");
        out.push_str(&format!("{key},c_plus_star,{:.16e}\n", self.c_plus_star));
        match self.c_minus_star {
            Some(v) => out.push_str(&format!("{key},c_minus_star,{v:.16e}\n")),
            None => out.push_str(&format!("{key},c_minus_star,not-applicable\n")),
        }
        out.push_str(&format!("{key},h3_slack,{:.16e}\n", self.h3_slack));
        if let Some(v) = self.measured_speed {
            out.push_str(&format!("{key},measured_speed,{v:.16e}\n"));
        }
        out
    }
}

/// Stable key for CSV rows: FNV-1a over the canonical model config text.
pub fn param_key(params: &Params, coeffs: &CoefficientField) -> String {
    let text = ModelConfig::from_model(params, coeffs)
        .to_toml_string()
        .unwrap_or_default();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Exact solution of `du/dt = u (a - b u)` with constant `a` (any sign) and
/// constant `b >= 0`, from `u(0) = u0 >= 0`.
pub fn logistic_closed_form(u0: f64, a: f64, b: f64, t: f64) -> f64 {
    if u0 == 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        return u0 * (a * t).exp();
    }
    if a == 0.0 {
        return u0 / (1.0 + b * u0 * t);
    }
    let decay = (-a * t).exp();
    if decay.is_infinite() {
        // a < 0 with a*t hugely negative: the population has died out.
        return 0.0;
    }
    a * u0 / (b * u0 + (a - b * u0) * decay)
}

/// Fixed-step classical fourth-order integration of the scalar logistic
/// equation `du/dt = u (a(t) - b(t) u)` with time-dependent coefficients.
pub fn logistic_rk4(
    u0: f64,
    a_of_t: impl Fn(f64) -> f64,
    b_of_t: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    max_dt: f64,
) -> f64 {
    let span = t1 - t0;
    if span == 0.0 {
        return u0;
    }
    let steps = (span / max_dt).abs().ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    let f = |t: f64, u: f64| u * (a_of_t(t) - b_of_t(t) * u);
    let mut u = u0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, u);
        let k2 = f(t + 0.5 * dt, u + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, u + 0.5 * dt * k2);
        let k4 = f(t + dt, u + dt * k3);
        u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
    }
    u
}

fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Integrate the comparison ODE pair that sandwiches every strictly
/// positive solution between scalar logistic envelopes:
///
/// ```text
/// d/dt lower = lower (a_inf - chi mu uplus_sup - (b_sup - chi mu) lower)
/// d/dt upper = upper (a_sup - chi mu uplus_inf - (b_inf - chi mu) upper)
/// ```
///
/// and report the asymptotic limits `(a_inf - chi mu uplus_sup)_+ / (b_sup -
/// chi mu)` and `(a_sup - chi mu uplus_inf)_+ / (b_inf - chi mu)`.
pub fn comparison_envelopes(
    u_inf0: f64,
    u_sup0: f64,
    uplus_inf: f64,
    uplus_sup: f64,
    coeffs: &CoefficientField,
    params: &Params,
    horizon: f64,
) -> Result<BoundsReport> {
    for (name, v) in [
        ("u_inf0", u_inf0),
        ("u_sup0", u_sup0),
        ("uplus_inf", uplus_inf),
        ("uplus_sup", uplus_sup),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon must be nonnegative"));
    }
    let report = validate_coefficients(coeffs, params)?;
    if !report.holds_h1 {
        return Err(Error::HypothesisFailed {
            hypothesis: "(H1)",
            slack: report.slack_h1,
        });
    }
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    let (a_low, b_low) = (e.a_inf - cm * uplus_sup, e.b_sup - cm);
    let (a_up, b_up) = (e.a_sup - cm * uplus_inf, e.b_inf - cm);
    let samples = 201;
    let mut times = Vec::with_capacity(samples);
    let mut lower = Vec::with_capacity(samples);
    let mut upper = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = horizon * i as f64 / (samples - 1) as f64;
        times.push(t);
        lower.push(logistic_closed_form(u_inf0, a_low, b_low, t));
        upper.push(logistic_closed_form(u_sup0, a_up, b_up, t));
    }
    Ok(BoundsReport {
        provenance: "comparison-envelope".into(),
        times,
        lower,
        upper,
        lower_limit: positive_part(a_low) / b_low,
        upper_limit: positive_part(a_up) / b_up,
        checks: Vec::new(),
    })
}

/// Pointwise lower bound for nonnegative data over a finite window:
/// `u0_inf exp(t (a_inf - b_sup u0_sup exp(T a_sup)))` for `0 <= t <= T`.
pub fn pointwise_lower_bound(
    u0_inf: f64,
    u0_sup: f64,
    cap_t: f64,
    t: f64,
    coeffs: &CoefficientField,
) -> Result<f64> {
    if !(0.0 <= t && t <= cap_t) {
        return Err(Error::invalid(format!(
            "need 0 <= t <= T, got t={t}, T={cap_t}"
        )));
    }
    if !(u0_inf >= 0.0 && u0_sup >= u0_inf) {
        return Err(Error::invalid("need 0 <= u0_inf <= u0_sup"));
    }
    let e = coeffs.envelopes();
    Ok(u0_inf * (t * (e.a_inf - e.b_sup * u0_sup * (cap_t * e.a_sup).exp())).exp())
}

/// Mass threshold `M_T = a_inf exp(-a_sup T) / b_sup` below which the
/// infimum is non-decreasing on `[0, T]`.
pub fn lemma21_threshold(cap_t: f64, coeffs: &CoefficientField) -> Result<f64> {
    if !(cap_t >= 0.0) {
        return Err(Error::invalid("T must be nonnegative"));
    }
    let e = coeffs.envelopes();
    Ok(e.a_inf * (-e.a_sup * cap_t).exp() / e.b_sup)
}

/// Principal Dirichlet eigenvalue of `-Lap - a0` on the box `(-L, L)^N`:
/// `sigma_L = N (pi / (2L))^2 - a0`.
pub fn dirichlet_principal_eigenvalue(half_length: f64, a0: f64, dim: Dim) -> Result<f64> {
    if !(half_length > 0.0) {
        return Err(Error::invalid("box half-length must be positive"));
    }
    let n = dim.as_usize() as f64;
    let k = std::f64::consts::PI / (2.0 * half_length);
    Ok(n * k * k - a0)
}

/// Box size `L0 = (pi/2) sqrt(N / a0)` above which `sigma_L` is negative.
pub fn dirichlet_negativity_threshold(a0: f64, dim: Dim) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(Error::invalid("threshold query needs a0 > 0"));
    }
    let n = dim.as_usize() as f64;
    Ok(0.5 * std::f64::consts::PI * (n / a0).sqrt())
}

/// Closed-form spreading speeds
///
/// ```text
/// c+* = 2 sqrt(a_sup) + chi mu sqrt(N) a_sup / (2 (b_inf - chi mu) sqrt(lambda))
/// c-* = 2 sqrt(a_inf - chi mu a_sup / (b_inf - chi mu))
///       - chi mu sqrt(N) a_sup / (2 sqrt(lambda) (b_inf - chi mu))
/// ```
///
/// `c-*` is reported only when (H3) holds.
pub fn spreading_speeds(coeffs: &CoefficientField, params: &Params) -> Result<SpreadingReport> {
    let report = validate_coefficients(coeffs, params)?;
    if !report.holds_h1 {
        return Err(Error::HypothesisFailed {
            hypothesis: "(H1)",
            slack: report.slack_h1,
        });
    }
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    let n_sqrt = (params.dim.as_usize() as f64).sqrt();
    let drift = cm * n_sqrt * e.a_sup / (2.0 * (e.b_inf - cm) * params.lambda.sqrt());
    let c_plus = 2.0 * e.a_sup.sqrt() + drift;
    let c_minus = if report.holds_h3 {
        let depressed = e.a_inf - cm * e.a_sup / (e.b_inf - cm);
        let c = 2.0 * depressed.sqrt() - drift;
        debug_assert!(c <= c_plus);
        Some(c)
    } else {
        None
    };
    Ok(SpreadingReport {
        c_plus_star: c_plus,
        c_minus_star: c_minus,
        h3_slack: report.slack_h3,
        measured_speed: None,
    })
}

/// Improved asymptotic sup bound once a running minimum `m(u0)` is known:
/// `(a_sup - chi mu m) / (b_inf - chi mu)`, monotone decreasing in `m`.
pub fn remark12_bound(m_u0: f64, coeffs: &CoefficientField, params: &Params) -> Result<f64> {
    if !(m_u0 >= 0.0) {
        return Err(Error::invalid("running minimum must be nonnegative"));
    }
    let report = validate_coefficients(coeffs, params)?;
    if !report.holds_h1 {
        return Err(Error::HypothesisFailed {
            hypothesis: "(H1)",
            slack: report.slack_h1,
        });
    }
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    Ok((e.a_sup - cm * m_u0) / (e.b_inf - cm))
}
