//! Experiment configuration: the structured text config binding a model to
//! one experiment kind, with validation that reports every problem at once.

use serde::{Deserialize, Serialize};

use kslab_core::model::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Entire,
    Stability,
    Spreading,
    Perturbation,
    OracleAudit,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Entire => "entire",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Spreading => "spreading",
            ExperimentKind::Perturbation => "perturbation",
            ExperimentKind::OracleAudit => "oracle-audit",
        };
        f.write_str(name)
    }
}

/// Initial species density. Random data requires an explicit seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitSpec {
    Constant {
        value: f64,
    },
    /// Smooth compactly supported bump `height * exp(1 - 1/(1 - r^2))` for
    /// `r = |x - center| / radius < 1`, zero outside.
    Bump {
        height: f64,
        radius: f64,
        #[serde(default)]
        center: f64,
    },
    /// Seeded noise, spectrally smoothed, rescaled to `[lo, hi]` exactly.
    RandomBand {
        lo: f64,
        hi: f64,
        seed: Option<u64>,
        /// Diffusion time of the smoothing pass; default `5 h^2`.
        smoothing: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: Option<f64>,
    pub store_interval: Option<f64>,
    pub dt_max: Option<f64>,
    /// Front threshold (spreading); defaults to the closed-form choice.
    pub threshold: Option<f64>,
    /// Chemotaxis sweep (perturbation).
    pub chi_list: Option<Vec<f64>>,
    /// Seeds fanned out to workers (stability).
    pub seeds: Option<Vec<u64>>,
    /// Staircase levels (stability), default 3.
    pub n_max: Option<u32>,
    /// Entire-solution construction: auto | steady | periodic | pullback.
    pub method: Option<String>,
    /// Pullback depths.
    pub k_list: Option<Vec<u32>>,
    /// Period override (pullback, or periodic map for autonomous inputs).
    pub period: Option<f64>,
    /// Repeat the experiment per grid resolution, for convergence diffs.
    pub resolution_ladder: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Validate the whole config, collecting every problem.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.model.to_model() {
            problems.push(format!("model: {e}"));
        }
        if let Some(InitSpec::RandomBand { lo, hi, seed, .. }) = &self.init {
            if seed.is_none() {
                problems.push("init: random-band initial data requires a seed".into());
            }
            if !(lo < hi) {
                problems.push(format!("init: random band needs lo < hi, got [{lo}, {hi}]"));
            }
            if *lo < 0.0 {
                problems.push("init: random band must be nonnegative".into());
            }
        }
        if let Some(InitSpec::Bump { height, radius, .. }) = &self.init {
            if !(*height > 0.0) {
                problems.push("init: bump height must be positive".into());
            }
            if !(*radius > 0.0) {
                problems.push("init: bump radius must be positive".into());
            }
        }
        if let Some(InitSpec::Constant { value }) = &self.init {
            if !(*value >= 0.0) {
                problems.push("init: constant initial data must be nonnegative".into());
            }
        }
        let needs_horizon = matches!(
            self.kind,
            ExperimentKind::Simulate
                | ExperimentKind::Stability
                | ExperimentKind::Spreading
                | ExperimentKind::Perturbation
        );
        if needs_horizon {
            match self.run.horizon {
                Some(h) if h >= 0.0 => {}
                Some(h) => problems.push(format!("run: horizon must be nonnegative, got {h}")),
                None => problems.push(format!("run: {} requires a horizon", self.kind)),
            }
        }
        if needs_horizon && self.init.is_none() {
            problems.push(format!("init: {} requires initial data", self.kind));
        }
        match self.kind {
            ExperimentKind::Spreading => {
                if !matches!(self.init, Some(InitSpec::Bump { .. })) {
                    problems.push("init: spreading requires compactly supported bump data".into());
                }
                if self.model.dim != 1 {
                    problems.push("model: front tracking requires dim = 1".into());
                }
            }
            ExperimentKind::Perturbation => match &self.run.chi_list {
                Some(list) if !list.is_empty() => {
                    if list.iter().any(|c| *c <= 0.0) {
                        problems.push("run: chi_list entries must be positive".into());
                    }
                }
                _ => problems.push("run: perturbation requires a non-empty chi_list".into()),
            },
            ExperimentKind::Entire => {
                if let Some(method) = &self.run.method {
                    if !["auto", "steady", "periodic", "pullback"].contains(&method.as_str()) {
                        problems.push(format!(
                            "run: unknown entire method '{method}' (auto|steady|periodic|pullback)"
                        ));
                    }
                    if method == "pullback" && self.run.k_list.is_none() {
                        problems.push("run: pullback method requires k_list".into());
                    }
                }
            }
            _ => {}
        }
        if matches!(self.kind, ExperimentKind::Stability) {
            let seeded_fanout = self.run.seeds.as_ref().is_some_and(|s| !s.is_empty());
            if seeded_fanout && !matches!(self.init, Some(InitSpec::RandomBand { .. })) {
                problems.push("run: seeds fan-out requires random-band initial data".into());
            }
        }
        if let Some(ladder) = &self.run.resolution_ladder {
            for &n in ladder {
                if n < 16 || n % 2 != 0 {
                    problems.push(format!(
                        "run: resolution ladder entries must be even and >= 16, got {n}"
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            anyhow::bail!("invalid config:\n  - {}", problems.join("\n  - "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
kind = "simulate"

[model]
chi = 0.2
lambda = 1.0
mu = 1.0
dim = 1
box = 10.0
grid = 64

[model.a]
kind = "constant"
params = { value = 1.0 }

[model.b]
kind = "constant"
params = { value = 1.0 }

[init]
kind = "constant"
value = 0.5

[run]
horizon = 1.0
"#;

    #[test]
    fn good_config_roundtrips() {
        let cfg = ExperimentConfig::from_toml_str(GOOD).unwrap();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn all_problems_reported_at_once() {
        let bad = GOOD
            .replace("horizon = 1.0", "")
            .replace("value = 0.5", "value = -2.0");
        let cfg = ExperimentConfig::from_toml_str(&bad).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
        assert!(err.contains("nonnegative"), "{err}");
    }

    #[test]
    fn random_band_requires_seed() {
        let cfg = GOOD.replace(
            "kind = \"constant\"\nvalue = 0.5",
            "kind = \"random-band\"\nlo = 0.1\nhi = 1.0",
        );
        let cfg = ExperimentConfig::from_toml_str(&cfg).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }
}
