//! Model constants, space-time coefficients, hypothesis checks, and the
//! closed-form bounds built from coefficient envelopes.
//!
//! The coefficient functions `a(x,t)` and `b(x,t)` must be positive and
//! bounded (hypothesis (H)); everything downstream consumes only their
//! envelopes `a_inf <= a(x,t) <= a_sup`, `b_inf <= b(x,t) <= b_sup`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

/// Spatial dimension of the box; the laboratory covers N = 1 and N = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

impl TryFrom<u8> for Dim {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            other => Err(format!("dimension must be 1 or 2, got {other}")),
        }
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        d.as_usize() as u8
    }
}

/// Model constants and the discretization of the periodic box `[-L, L)^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Chemotaxis sensitivity, nonnegative.
    pub chi: f64,
    /// Chemical degradation rate, positive.
    pub lambda: f64,
    /// Chemical production rate, positive.
    pub mu: f64,
    pub dim: Dim,
    /// Half-length `L` of the periodic box.
    pub box_half_length: f64,
    /// Grid points per axis, even and at least 16.
    pub grid_points: usize,
}

impl Params {
    pub fn new(
        chi: f64,
        lambda: f64,
        mu: f64,
        dim: Dim,
        box_half_length: f64,
        grid_points: usize,
    ) -> Result<Self> {
        let p = Params {
            chi,
            lambda,
            mu,
            dim,
            box_half_length,
            grid_points,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(Error::invalid("chi must be finite and nonnegative"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and positive"));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu must be finite and positive"));
        }
        // Grid::new re-checks the discretization invariants.
        Grid::new(self.dim, self.grid_points, self.box_half_length)?;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.dim, self.grid_points, self.box_half_length)
            .expect("Params validated at construction")
    }

    /// Same model with a different chemotaxis sensitivity (for sweeps).
    pub fn with_chi(&self, chi: f64) -> Result<Self> {
        Params::new(
            chi,
            self.lambda,
            self.mu,
            self.dim,
            self.box_half_length,
            self.grid_points,
        )
    }

    /// `chi * mu`, the combination every hypothesis compares against `b_inf`.
    pub fn chi_mu(&self) -> f64 {
        self.chi * self.mu
    }
}

/// Spatial factor of a separable coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceProfile {
    Uniform {
        value: f64,
    },
    /// `mean + amp * cos(wavenumber * x_axis)`. The wavenumber must be an
    /// integer multiple of `pi / L` so the profile is box-periodic.
    Cosine {
        mean: f64,
        amp: f64,
        wavenumber: f64,
        #[serde(default)]
        axis: u8,
    },
}

impl SpaceProfile {
    fn eval(&self, x: &[f64; 2]) -> f64 {
        match self {
            SpaceProfile::Uniform { value } => *value,
            SpaceProfile::Cosine {
                mean,
                amp,
                wavenumber,
                axis,
            } => mean + amp * (wavenumber * x[*axis as usize]).cos(),
        }
    }

    /// Analytic range over the continuum.
    fn range(&self) -> (f64, f64) {
        match self {
            SpaceProfile::Uniform { value } => (*value, *value),
            SpaceProfile::Cosine { mean, amp, .. } => (mean - amp.abs(), mean + amp.abs()),
        }
    }

    fn check_box_compatible(&self, half_length: f64) -> Result<()> {
        if let SpaceProfile::Cosine {
            wavenumber, axis, ..
        } = self
        {
            let cycles = wavenumber * half_length / PI;
            if (cycles - cycles.round()).abs() > 1e-9 || cycles.round() < 1.0 {
                return Err(Error::invalid(format!(
                    "cosine wavenumber {wavenumber} is not an integer multiple of pi/L"
                )));
            }
            if *axis as usize >= 2 {
                return Err(Error::invalid("cosine axis must be 0 or 1"));
            }
        }
        Ok(())
    }
}

/// Temporal factor of a separable coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    Uniform {
        value: f64,
    },
    /// `mean + amp * sin(2 pi t / period)`.
    Sine {
        mean: f64,
        amp: f64,
        period: f64,
    },
}

impl TimeProfile {
    fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Uniform { value } => *value,
            TimeProfile::Sine { mean, amp, period } => mean + amp * (2.0 * PI * t / period).sin(),
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            TimeProfile::Uniform { value } => (*value, *value),
            TimeProfile::Sine { mean, amp, .. } => (mean - amp.abs(), mean + amp.abs()),
        }
    }

    fn period(&self) -> Option<f64> {
        match self {
            TimeProfile::Uniform { .. } => None,
            TimeProfile::Sine { period, .. } => Some(*period),
        }
    }
}

/// Time-tabulated coefficient: slices at strictly increasing time nodes,
/// linear interpolation between slices, nearest-node lookup in space.
/// Evaluation outside the tabulated time window is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub times: Vec<f64>,
    /// One slice per time node; a slice of length 1 is spatially uniform,
    /// otherwise its length must match `grid`.
    pub values: Vec<Vec<f64>>,
    pub grid: Option<Grid>,
}

impl Tabulated {
    fn validate(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(Error::invalid(
                "tabulated coefficient needs >= 2 time nodes",
            ));
        }
        if self.times.len() != self.values.len() {
            return Err(Error::invalid("tabulated times/values length mismatch"));
        }
        if !self.times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid(
                "tabulated times must be strictly increasing",
            ));
        }
        let expect = self.grid.map_or(1, |g| g.len());
        for slice in &self.values {
            if slice.len() != expect {
                return Err(Error::invalid(format!(
                    "tabulated slice length {} does not match expected {expect}",
                    slice.len()
                )));
            }
            if !slice.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("tabulated coefficient values"));
            }
        }
        Ok(())
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.times[0], *self.times.last().unwrap());
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(Error::invalid(format!(
                "time {t} outside tabulated window [{lo}, {hi}]"
            )));
        }
        let t = t.clamp(lo, hi);
        let k = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(k) => k.min(self.times.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.times.len() - 2),
        };
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok((k, w))
    }

    fn node_index(&self, x: &[f64; 2]) -> usize {
        match self.grid {
            None => 0,
            Some(g) => {
                let wrap = |xi: f64| -> usize {
                    let n = g.n[0] as i64;
                    let i = ((xi + g.half_length) / g.h).round() as i64;
                    (i.rem_euclid(n)) as usize
                };
                let ix = wrap(x[0]);
                match g.dim {
                    Dim::One => ix,
                    Dim::Two => {
                        let n1 = g.n[1] as i64;
                        let iy =
                            (((x[1] + g.half_length) / g.h).round() as i64).rem_euclid(n1) as usize;
                        iy * g.n[0] + ix
                    }
                }
            }
        }
    }

    fn eval(&self, x: &[f64; 2], t: f64) -> Result<f64> {
        let (k, w) = self.bracket(t)?;
        let idx = self.node_index(x);
        Ok((1.0 - w) * self.values[k][idx] + w * self.values[k + 1][idx])
    }

    fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for slice in &self.values {
            for &v in slice {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// The closed set of coefficient kinds (closed so that serialization stays
/// bit-exact).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum CoefficientKind {
    Constant {
        value: f64,
    },
    SeparablePeriodic {
        space: SpaceProfile,
        time: TimeProfile,
    },
    Tabulated(Tabulated),
}

impl CoefficientKind {
    fn validate(&self) -> Result<()> {
        match self {
            CoefficientKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::NonFinite("constant coefficient"));
                }
                Ok(())
            }
            CoefficientKind::SeparablePeriodic { .. } => Ok(()),
            CoefficientKind::Tabulated(tab) => tab.validate(),
        }
    }

    /// Envelope over the continuum. Analytic profile extremes are exact;
    /// tabulated extremes are node extremes widened by a relative margin of
    /// 1e-9 (extrema of the interpolant sit at nodes, the margin guards the
    /// cached values against roundoff in downstream arithmetic).
    fn envelope(&self) -> (f64, f64) {
        match self {
            CoefficientKind::Constant { value } => (*value, *value),
            CoefficientKind::SeparablePeriodic { space, time } => {
                let (slo, shi) = space.range();
                let (tlo, thi) = time.range();
                // Positivity of every factor is checked at construction, so
                // interval products reduce to products of endpoints.
                (slo * tlo, shi * thi)
            }
            CoefficientKind::Tabulated(tab) => {
                let (lo, hi) = tab.range();
                (lo - 1e-9 * lo.abs(), hi + 1e-9 * hi.abs())
            }
        }
    }

    fn positive_factors(&self) -> Result<()> {
        match self {
            CoefficientKind::Constant { value } => {
                if *value <= 0.0 {
                    return Err(Error::EnvelopeViolation(format!(
                        "constant coefficient {value} is not positive"
                    )));
                }
            }
            CoefficientKind::SeparablePeriodic { space, time } => {
                if space.range().0 <= 0.0 {
                    return Err(Error::EnvelopeViolation(
                        "space profile takes nonpositive values".into(),
                    ));
                }
                if time.range().0 <= 0.0 {
                    return Err(Error::EnvelopeViolation(
                        "time profile takes nonpositive values".into(),
                    ));
                }
            }
            CoefficientKind::Tabulated(tab) => {
                if tab.range().0 <= 0.0 {
                    return Err(Error::EnvelopeViolation(
                        "tabulated coefficient takes nonpositive values".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: &[f64; 2], t: f64) -> Result<f64> {
        match self {
            CoefficientKind::Constant { value } => Ok(*value),
            CoefficientKind::SeparablePeriodic { space, time } => Ok(space.eval(x) * time.eval(t)),
            CoefficientKind::Tabulated(tab) => tab.eval(x, t),
        }
    }

    fn period(&self) -> Option<f64> {
        match self {
            CoefficientKind::Constant { .. } => None,
            CoefficientKind::SeparablePeriodic { time, .. } => time.period(),
            CoefficientKind::Tabulated(_) => None,
        }
    }

    fn is_autonomous(&self) -> bool {
        match self {
            CoefficientKind::Constant { .. } => true,
            CoefficientKind::SeparablePeriodic { time, .. } => {
                matches!(time, TimeProfile::Uniform { .. })
            }
            CoefficientKind::Tabulated(_) => false,
        }
    }

    fn is_space_independent(&self) -> bool {
        match self {
            CoefficientKind::Constant { .. } => true,
            CoefficientKind::SeparablePeriodic { space, .. } => {
                matches!(space, SpaceProfile::Uniform { .. })
            }
            CoefficientKind::Tabulated(tab) => tab.grid.is_none(),
        }
    }
}

/// Cached coefficient envelopes `0 < w_inf <= w_sup < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    pub a_inf: f64,
    pub a_sup: f64,
    pub b_inf: f64,
    pub b_sup: f64,
}

/// Which of the two logistic coefficients to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    A,
    B,
}

/// The space-time coefficients `a(x,t)`, `b(x,t)` with cached envelopes.
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    a: CoefficientKind,
    b: CoefficientKind,
    period: Option<f64>,
    env: Envelopes,
}

impl CoefficientField {
    pub fn new(a: CoefficientKind, b: CoefficientKind) -> Result<Self> {
        a.validate()?;
        b.validate()?;
        a.positive_factors()?;
        b.positive_factors()?;
        let period = match (a.period(), b.period()) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p),
            (Some(p), Some(q)) => {
                if (p - q).abs() <= 1e-12 * p.abs() {
                    Some(p)
                } else {
                    return Err(Error::invalid(format!(
                        "a and b have incompatible periods {p} and {q}"
                    )));
                }
            }
        };
        let (a_inf, a_sup) = a.envelope();
        let (b_inf, b_sup) = b.envelope();
        let env = Envelopes {
            a_inf,
            a_sup,
            b_inf,
            b_sup,
        };
        let field = CoefficientField { a, b, period, env };
        field.check_h()?;
        Ok(field)
    }

    /// Constant-coefficient shortcut.
    pub fn constant(a: f64, b: f64) -> Result<Self> {
        CoefficientField::new(
            CoefficientKind::Constant { value: a },
            CoefficientKind::Constant { value: b },
        )
    }

    /// Hypothesis (H): coefficients positive and bounded.
    pub fn check_h(&self) -> Result<()> {
        let e = self.env;
        for (name, v) in [
            ("a_inf", e.a_inf),
            ("a_sup", e.a_sup),
            ("b_inf", e.b_inf),
            ("b_sup", e.b_sup),
        ] {
            if !v.is_finite() {
                return Err(Error::EnvelopeViolation(format!("{name} is not finite")));
            }
        }
        if !(e.a_inf > 0.0) {
            return Err(Error::EnvelopeViolation(format!(
                "a_inf = {} is not positive",
                e.a_inf
            )));
        }
        if !(e.b_inf > 0.0) {
            return Err(Error::EnvelopeViolation(format!(
                "b_inf = {} is not positive",
                e.b_inf
            )));
        }
        if e.a_sup < e.a_inf {
            return Err(Error::EnvelopeViolation("a_sup < a_inf".into()));
        }
        if e.b_sup < e.b_inf {
            return Err(Error::EnvelopeViolation("b_sup < b_inf".into()));
        }
        Ok(())
    }

    pub fn envelopes(&self) -> Envelopes {
        self.env
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn a(&self) -> &CoefficientKind {
        &self.a
    }

    pub fn b(&self) -> &CoefficientKind {
        &self.b
    }

    pub fn is_autonomous(&self) -> bool {
        self.a.is_autonomous() && self.b.is_autonomous()
    }

    pub fn is_space_independent(&self) -> bool {
        self.a.is_space_independent() && self.b.is_space_independent()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.a, CoefficientKind::Constant { .. })
            && matches!(self.b, CoefficientKind::Constant { .. })
    }

    /// Check the spatial parts are compatible with the discretization in
    /// `params` (box-periodic profiles, tabulated grids matching).
    pub fn validate_for(&self, params: &Params) -> Result<()> {
        let grid = params.grid();
        for kind in [&self.a, &self.b] {
            match kind {
                CoefficientKind::SeparablePeriodic { space, .. } => {
                    space.check_box_compatible(params.box_half_length)?;
                }
                CoefficientKind::Tabulated(tab) => {
                    if let Some(g) = tab.grid {
                        if g != grid {
                            return Err(Error::GridMismatch(
                                "tabulated coefficient grid does not match params".into(),
                            ));
                        }
                    }
                }
                CoefficientKind::Constant { .. } => {}
            }
        }
        Ok(())
    }

    /// Point evaluation. `x` must lie inside the closed box.
    pub fn sample(&self, which: Coefficient, x: &[f64], t: f64, params: &Params) -> Result<f64> {
        let mut xp = [0.0; 2];
        if x.len() != params.dim.as_usize() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                params.dim.as_usize()
            )));
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi.abs() > params.box_half_length + 1e-12 {
                return Err(Error::invalid(format!(
                    "coordinate {xi} outside box of half-length {}",
                    params.box_half_length
                )));
            }
            xp[i] = xi;
        }
        match which {
            Coefficient::A => self.a.eval(&xp, t),
            Coefficient::B => self.b.eval(&xp, t),
        }
    }

    /// Evaluate a coefficient on every grid node at time `t`.
    pub fn on_grid(&self, which: Coefficient, grid: &Grid, t: f64) -> Result<ScalarField> {
        let kind = match which {
            Coefficient::A => &self.a,
            Coefficient::B => &self.b,
        };
        match kind {
            CoefficientKind::Constant { value } => Ok(ScalarField::constant(*grid, *value)),
            CoefficientKind::SeparablePeriodic { space, time } => {
                let tv = time.eval(t);
                let mut out = ScalarField::zeros(*grid);
                for i in 0..grid.len() {
                    out.as_mut_slice()[i] = space.eval(&grid.coord(i)) * tv;
                }
                Ok(out)
            }
            CoefficientKind::Tabulated(tab) => {
                let (k, w) = tab.bracket(t)?;
                let mut out = ScalarField::zeros(*grid);
                if tab.grid.is_none() {
                    let v = (1.0 - w) * tab.values[k][0] + w * tab.values[k + 1][0];
                    return Ok(ScalarField::constant(*grid, v));
                }
                if tab.grid != Some(*grid) {
                    return Err(Error::GridMismatch(
                        "tabulated coefficient grid does not match target".into(),
                    ));
                }
                for i in 0..grid.len() {
                    out.as_mut_slice()[i] = (1.0 - w) * tab.values[k][i] + w * tab.values[k + 1][i];
                }
                Ok(out)
            }
        }
    }
}

/// Result of checking hypotheses (H1)-(H3). Each slack is the left-hand
/// side minus the right-hand side of the corresponding strict inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub holds_h1: bool,
    pub holds_h2: bool,
    pub holds_h3: bool,
    pub slack_h1: f64,
    pub slack_h2: f64,
    pub slack_h3: f64,
}

/// Evaluate hypotheses (H1), (H2), (H3) from exact envelope arithmetic.
///
/// * (H1): `b_inf > chi mu`
/// * (H2): `b_inf > (1 + a_sup/a_inf) chi mu`
/// * (H3): `b_inf > (1 + (1 + sqrt(1 + N a_inf / (4 lambda))) a_sup / (2 a_inf)) chi mu`
pub fn validate_coefficients(
    coeffs: &CoefficientField,
    params: &Params,
) -> Result<HypothesisReport> {
    coeffs.check_h()?;
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    let n = params.dim.as_usize() as f64;
    let slack_h1 = e.b_inf - cm;
    let slack_h2 = e.b_inf - (1.0 + e.a_sup / e.a_inf) * cm;
    let h3_factor = 1.0
        + (1.0 + (1.0 + n * e.a_inf / (4.0 * params.lambda)).sqrt()) * e.a_sup / (2.0 * e.a_inf);
    let slack_h3 = e.b_inf - h3_factor * cm;
    Ok(HypothesisReport {
        holds_h1: slack_h1 > 0.0,
        holds_h2: slack_h2 > 0.0,
        holds_h3: slack_h3 > 0.0,
        slack_h1,
        slack_h2,
        slack_h3,
    })
}

/// The uniform-persistence rectangle `(M_lower, M_upper)` that eventually
/// traps every strictly positive solution. Requires (H2), which makes the
/// shared denominator positive.
pub fn attraction_rectangle(coeffs: &CoefficientField, params: &Params) -> Result<(f64, f64)> {
    let report = validate_coefficients(coeffs, params)?;
    if !report.holds_h2 {
        return Err(Error::HypothesisFailed {
            hypothesis: "(H2)",
            slack: report.slack_h2,
        });
    }
    let e = coeffs.envelopes();
    let cm = params.chi_mu();
    let denom = (e.b_sup - cm) * (e.b_inf - cm) - cm * cm;
    let m_lower = ((e.b_inf - cm) * e.a_inf - cm * e.a_sup) / denom;
    let m_upper = ((e.b_sup - cm) * e.a_sup - cm * e.a_inf) / denom;
    debug_assert!(m_lower > 0.0 && m_lower <= m_upper);
    debug_assert!(m_upper <= e.a_sup / (e.b_inf - cm) * (1.0 + 1e-12));
    Ok((m_lower, m_upper))
}

/// The asymptotic sup bound `a_sup / (b_inf - chi mu)`. Requires (H1).
pub fn sup_bound(coeffs: &CoefficientField, params: &Params) -> Result<f64> {
    let report = validate_coefficients(coeffs, params)?;
    if !report.holds_h1 {
        return Err(Error::HypothesisFailed {
            hypothesis: "(H1)",
            slack: report.slack_h1,
        });
    }
    let e = coeffs.envelopes();
    Ok(e.a_sup / (e.b_inf - params.chi_mu()))
}

/// Serializable description of `Params` plus coefficients; the structured
/// text configuration uses the keys `chi, lambda, mu, dim, box, grid,
/// period, a.kind, a.params, b.kind, b.params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub chi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub dim: u8,
    #[serde(rename = "box")]
    pub box_half_length: f64,
    pub grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    pub a: CoefficientKind,
    pub b: CoefficientKind,
}

impl ModelConfig {
    pub fn from_model(params: &Params, coeffs: &CoefficientField) -> Self {
        ModelConfig {
            chi: params.chi,
            lambda: params.lambda,
            mu: params.mu,
            dim: params.dim.as_usize() as u8,
            box_half_length: params.box_half_length,
            grid: params.grid_points,
            period: coeffs.period(),
            a: coeffs.a().clone(),
            b: coeffs.b().clone(),
        }
    }

    pub fn to_model(&self) -> Result<(Params, CoefficientField)> {
        let dim = Dim::try_from(self.dim).map_err(Error::InvalidInput)?;
        let params = Params::new(
            self.chi,
            self.lambda,
            self.mu,
            dim,
            self.box_half_length,
            self.grid,
        )?;
        let coeffs = CoefficientField::new(self.a.clone(), self.b.clone())?;
        if let (Some(p), Some(q)) = (self.period, coeffs.period()) {
            if (p - q).abs() > 1e-12 * q.abs() {
                return Err(Error::invalid(format!(
                    "declared period {p} does not match coefficient period {q}"
                )));
            }
        }
        coeffs.validate_for(&params)?;
        Ok((params, coeffs))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}
