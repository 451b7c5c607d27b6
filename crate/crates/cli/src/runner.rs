//! Experiment execution: bind a validated config to the core modules,
//! persist every report and checkpoint under the output directory, and
//! stamp a manifest with a content hash so reruns are verifiable bit for
//! bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kslab_core::analysis::{
    construct_entire, front_speed, perturbation_study, stability_report, DecayFit,
    PerturbationOptions,
};
use kslab_core::entire::{
    certify_entire_bounds, find_periodic_entire_solution, find_steady_state,
    pullback_entire_solution, EntireOptions, EntireSolution,
};
use kslab_core::evolve::{integrate, IntegrateOptions, StepPolicy, Trajectory};
use kslab_core::model::{
    attraction_rectangle, sup_bound, validate_coefficients, CoefficientField, Params,
};
use kslab_core::oracles;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::initdata::build_initial_data;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    /// Echo of the config this run was produced from.
    pub config: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<String>,
    pub content_hash: String,
}

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    std::fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))
}

/// Collect every file under `dir` except the top-level manifest, sorted by
/// relative path.
fn collect_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fn walk(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, base, out)?;
            } else {
                let rel = path.strip_prefix(base).expect("under base").to_path_buf();
                if rel != Path::new("manifest.json") {
                    out.push(rel);
                }
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    Ok(files)
}

/// SHA-256 over the sorted (path, content) stream of output files.
fn content_hash(dir: &Path, files: &[PathBuf]) -> anyhow::Result<String> {
    let mut hasher = Sha256::new();
    for rel in files {
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        hasher.update(std::fs::read(dir.join(rel))?);
        hasher.update([0xffu8]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}

fn write_manifest(
    dir: &Path,
    kind: ExperimentKind,
    config_text: &str,
    error: Option<String>,
) -> anyhow::Result<()> {
    let files = collect_files(dir)?;
    let manifest = Manifest {
        kind: kind.to_string(),
        config: config_text.to_string(),
        status: if error.is_none() { "ok" } else { "failed" }.into(),
        error,
        files: files
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        content_hash: content_hash(dir, &files)?,
    };
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> anyhow::Result<Manifest> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .with_context(|| format!("no manifest in {}", dir.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Run an experiment into `out`. On runtime failure the partial outputs are
/// kept and the manifest is flagged failed.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, workers: usize) -> anyhow::Result<()> {
    config.validate()?;
    let config_text = config.to_toml_string()?;
    std::fs::create_dir_all(out)?;

    if let Some(ladder) = config.run.resolution_ladder.clone() {
        let mut error = None;
        for n in ladder {
            let mut sub = config.clone();
            sub.model.grid = n;
            sub.run.resolution_ladder = None;
            let subdir = out.join(format!("res_{n:05}"));
            std::fs::create_dir_all(&subdir)?;
            if let Err(e) = run_single(&sub, &subdir, workers) {
                error = Some(format!("resolution {n}: {e}"));
                write_manifest(&subdir, sub.kind, &sub.to_toml_string()?, error.clone())?;
                break;
            }
            write_manifest(&subdir, sub.kind, &sub.to_toml_string()?, None)?;
        }
        write_manifest(out, config.kind, &config_text, error.clone())?;
        return match error {
            None => Ok(()),
            Some(e) => bail!(e),
        };
    }

    let result = run_single(config, out, workers);
    write_manifest(
        out,
        config.kind,
        &config_text,
        result.as_ref().err().map(|e| format!("{e:#}")),
    )?;
    result
}

fn integrate_options(config: &ExperimentConfig) -> IntegrateOptions {
    IntegrateOptions {
        policy: StepPolicy::Adaptive {
            dt_max: config.run.dt_max.unwrap_or(0.02),
        },
        store_interval: config.run.store_interval.unwrap_or(0.25),
        ..Default::default()
    }
}

fn entire_options(config: &ExperimentConfig) -> EntireOptions {
    let defaults = EntireOptions::default();
    EntireOptions {
        period: config.run.period,
        dt_max: config.run.dt_max.unwrap_or(defaults.dt_max),
        ..defaults
    }
}

fn run_single(config: &ExperimentConfig, out: &Path, workers: usize) -> anyhow::Result<()> {
    let (params, coeffs) = config.model.to_model()?;
    match config.kind {
        ExperimentKind::Simulate => run_simulate(config, &params, &coeffs, out),
        ExperimentKind::Entire => run_entire(config, &params, &coeffs, out),
        ExperimentKind::Stability => run_stability(config, &params, &coeffs, out, workers),
        ExperimentKind::Spreading => run_spreading(config, &params, &coeffs, out),
        ExperimentKind::Perturbation => run_perturbation(config, &params, &coeffs, out),
        ExperimentKind::OracleAudit => run_audit(&params, &coeffs, out),
    }
}

fn initial_data(
    config: &ExperimentConfig,
    params: &Params,
    seed_override: Option<u64>,
) -> anyhow::Result<kslab_core::field::ScalarField> {
    let spec = config
        .init
        .as_ref()
        .context("experiment requires initial data")?;
    build_initial_data(spec, params, seed_override)
}

fn diagnostics_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,dt,min_u,max_u\n");
    for d in traj.steps() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            f17(d.t),
            f17(d.dt),
            f17(d.min_u),
            f17(d.max_u)
        );
    }
    out
}

fn run_simulate(
    config: &ExperimentConfig,
    params: &Params,
    coeffs: &CoefficientField,
    out: &Path,
) -> anyhow::Result<()> {
    let u0 = initial_data(config, params, None)?;
    let horizon = config.run.horizon.unwrap_or(0.0);
    let traj = integrate(
        &u0,
        0.0,
        horizon,
        coeffs,
        params,
        &integrate_options(config),
    )?;
    traj.save(out.join("trajectory"))?;
    write_text(out, "diagnostics.csv", &diagnostics_csv(&traj))?;

    // Conformance against the global-existence curves.
    let e = coeffs.envelopes();
    let report = validate_coefficients(coeffs, params)?;
    let sup0 = u0.max();
    let cap = if report.holds_h1 {
        sup0.max(e.a_sup / (e.b_inf - params.chi_mu()))
    } else {
        f64::INFINITY
    };
    let mut bounds = String::from("t,sup_u,uniform_cap,exponential_envelope,within\n");
    let mut all_within = true;
    for d in traj.steps() {
        let envelope = sup0 * (e.a_sup * d.t).exp();
        let within = d.max_u <= cap + 1e-6 && d.max_u <= envelope + 1e-6;
        all_within &= within;
        let _ = writeln!(
            bounds,
            "{},{},{},{},{}",
            f17(d.t),
            f17(d.max_u),
            f17(cap),
            f17(envelope),
            within
        );
    }
    write_text(out, "bounds.csv", &bounds)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "simulate: horizon {}", f17(horizon));
    let _ = writeln!(summary, "stored states: {}", traj.states().len());
    let _ = writeln!(summary, "final sup u: {}", f17(traj.last().u.max()));
    let _ = writeln!(summary, "final min u: {}", f17(traj.last().u.min()));
    // the observed running minimum stands in for the (formula-less)
    // persistence floor; it sharpens the asymptotic sup bound
    let running_min = traj.min_over_run().max(0.0);
    let _ = writeln!(summary, "running min u: {}", f17(running_min));
    if report.holds_h1 && running_min > 0.0 {
        let improved = kslab_core::oracles::remark12_bound(running_min, coeffs, params)?;
        let _ = writeln!(
            summary,
            "improved sup bound from running min: {}",
            f17(improved)
        );
    }
    let _ = writeln!(summary, "bounds satisfied: {all_within}");
    write_text(out, "summary.txt", &summary)?;
    Ok(())
}

fn run_entire(
    config: &ExperimentConfig,
    params: &Params,
    coeffs: &CoefficientField,
    out: &Path,
) -> anyhow::Result<()> {
    let opts = entire_options(config);
    let method = config.run.method.as_deref().unwrap_or("auto");
    let sol: EntireSolution = match method {
        "steady" => find_steady_state(coeffs, params, &opts)?,
        "periodic" => find_periodic_entire_solution(coeffs, params, &opts)?,
        "pullback" => {
            let k_list = config.run.k_list.clone().context("pullback needs k_list")?;
            let period = config.run.period.or(coeffs.period()).unwrap_or(1.0);
            pullback_entire_solution(coeffs, params, &k_list, period, &opts)?
        }
        _ => construct_entire(coeffs, params, &opts)?,
    };
    sol.save(out.join("entire"))?;
    let report = certify_entire_bounds(&sol, coeffs, params)?;
    let key = oracles::param_key(params, coeffs);
    write_text(out, "certificate.csv", &report.csv_rows(&key))?;
    let residual = sol.equation_residual(coeffs, params)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "entire solution via {method}");
    let _ = writeln!(summary, "converged: {}", sol.converged);
    let _ = writeln!(summary, "u_inf: {}", f17(sol.stats.u_inf));
    let _ = writeln!(summary, "u_sup: {}", f17(sol.stats.u_sup));
    let _ = writeln!(summary, "sup |grad u| (C0): {}", f17(sol.stats.grad_sup));
    if !sol.is_space_homogeneous() && params.grid_points >= 32 {
        // grid-refinement error estimate on the measured C0
        let (_, bar) = kslab_core::analysis::c0_refinement_error(coeffs, params, &opts)?;
        let _ = writeln!(summary, "C0 refinement error bar: {}", f17(bar));
    }
    let _ = writeln!(summary, "construction residual: {}", f17(sol.residual));
    let _ = writeln!(summary, "equation residual: {}", f17(residual));
    let _ = writeln!(summary, "bounds certified: {}", report.all_pass());
    write_text(out, "summary.txt", &summary)?;
    Ok(())
}

fn run_stability(
    config: &ExperimentConfig,
    params: &Params,
    coeffs: &CoefficientField,
    out: &Path,
    workers: usize,
) -> anyhow::Result<()> {
    let horizon = config.run.horizon.context("stability needs horizon")?;
    let n_max = config.run.n_max.unwrap_or(3);
    let opts = integrate_options(config);
    let sol = construct_entire(coeffs, params, &entire_options(config))?;
    sol.save(out.join("entire"))?;
    let key = oracles::param_key(params, coeffs);

    let seeds: Vec<Option<u64>> = match &config.run.seeds {
        Some(list) if !list.is_empty() => list.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    // fan the seeds out to the worker pool; collect() keeps input order, so
    // the reduction is deterministic whatever the worker count
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let results: Vec<anyhow::Result<(String, String, String)>> = pool.install(|| {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|seed| {
                let u0 = initial_data(config, params, *seed)?;
                let traj = integrate(&u0, 0.0, horizon, coeffs, params, &opts)?;
                let report = stability_report(&traj, &sol, params, coeffs, n_max)?;
                let label = seed.map_or("single".to_string(), |s| format!("seed{s}"));
                let alpha = match report.fit {
                    DecayFit::Decay { alpha, .. } => f17(alpha),
                    DecayFit::NoDecay => "no-decay".into(),
                };
                let line = format!(
                    "{label}: alpha_hat {alpha}, final |U-1| {}, rho {}",
                    f17(*report.series.u_dev.last().unwrap()),
                    f17(report.contraction.rho),
                );
                Ok((
                    format!("stability_{label}.csv"),
                    report.csv_rows(&key),
                    line,
                ))
            })
            .collect()
    });
    let mut summary = String::from("stability study\n");
    for r in results {
        let (name, csv, line) = r?;
        write_text(out, &name, &csv)?;
        let _ = writeln!(summary, "{line}");
    }
    write_text(out, "summary.txt", &summary)?;
    Ok(())
}

/// Front threshold: half the rectangle floor under (H2), otherwise
/// `a_inf / (4 b_sup)`.
fn default_threshold(params: &Params, coeffs: &CoefficientField) -> anyhow::Result<f64> {
    let report = validate_coefficients(coeffs, params)?;
    let e = coeffs.envelopes();
    Ok(if report.holds_h2 {
        attraction_rectangle(coeffs, params)?.0 / 2.0
    } else {
        e.a_inf / (4.0 * e.b_sup)
    })
}

fn run_spreading(
    config: &ExperimentConfig,
    params: &Params,
    coeffs: &CoefficientField,
    out: &Path,
) -> anyhow::Result<()> {
    let horizon = config.run.horizon.context("spreading needs horizon")?;
    let u0 = initial_data(config, params, None)?;
    let traj = integrate(
        &u0,
        0.0,
        horizon,
        coeffs,
        params,
        &integrate_options(config),
    )?;
    let threshold = match config.run.threshold {
        Some(t) => t,
        None => default_threshold(params, coeffs)?,
    };
    let measured = front_speed(&traj, threshold)?;
    let mut report = oracles::spreading_speeds(coeffs, params)?;
    report.measured_speed = Some(measured.speed);
    let key = oracles::param_key(params, coeffs);
    write_text(out, "spreading.csv", &report.csv_rows(&key))?;
    let mut crossings = String::from("t,x\n");
    for (t, x) in &measured.crossings {
        let _ = writeln!(crossings, "{},{}", f17(*t), f17(*x));
    }
    write_text(out, "crossings.csv", &crossings)?;
    write_text(out, "diagnostics.csv", &diagnostics_csv(&traj))?;

    let mut summary = String::new();
    let _ = writeln!(summary, "spreading study, threshold {}", f17(threshold));
    let _ = writeln!(summary, "measured speed: {}", f17(measured.speed));
    let _ = writeln!(summary, "c_plus_star:   {}", f17(report.c_plus_star));
    match report.c_minus_star {
        Some(c) => {
            let _ = writeln!(summary, "c_minus_star:  {}", f17(c));
        }
        None => {
            let _ = writeln!(summary, "c_minus_star:  not applicable ((H3) fails)");
        }
    }
    write_text(out, "summary.txt", &summary)?;
    Ok(())
}

fn run_perturbation(
    config: &ExperimentConfig,
    params: &Params,
    coeffs: &CoefficientField,
    out: &Path,
) -> anyhow::Result<()> {
    let horizon = config.run.horizon.context("perturbation needs horizon")?;
    let chi_list = config.run.chi_list.clone().context("needs chi_list")?;
    let u0 = initial_data(config, params, None)?;
    let opts = PerturbationOptions {
        store_interval: config.run.store_interval.unwrap_or(0.25),
        dt_max: config.run.dt_max.unwrap_or(0.01),
        entire: entire_options(config),
    };
    let report = perturbation_study(&u0, &chi_list, horizon, coeffs, params, &opts)?;
    let key = oracles::param_key(params, coeffs);
    write_text(out, "perturbation.csv", &report.csv_rows(&key))?;

    let mut summary = String::from("perturbation study\n");
    let _ = writeln!(summary, "K: {}", f17(report.k_value));
    for i in 0..report.chis.len() {
        match (report.gaps[i], report.ratios[i]) {
            (Some(g), Some(r)) => {
                let _ = writeln!(
                    summary,
                    "chi {}: gap {}, gap/chi {}",
                    f17(report.chis[i]),
                    f17(g),
                    f17(r)
                );
            }
            _ => {
                let _ = writeln!(
                    summary,
                    "chi {}: failed ({})",
                    f17(report.chis[i]),
                    report.errors[i].clone().unwrap_or_default()
                );
            }
        }
    }
    write_text(out, "summary.txt", &summary)?;
    Ok(())
}

fn run_audit(params: &Params, coeffs: &CoefficientField, out: &Path) -> anyhow::Result<()> {
    let key = oracles::param_key(params, coeffs);
    let e = coeffs.envelopes();
    let report = validate_coefficients(coeffs, params)?;
    let mut rows = String::from("key,name,value\n");
    let mut push = |name: &str, value: String| {
        let _ = writeln!(rows, "{key},{name},{value}");
    };
    push("a_inf", f17(e.a_inf));
    push("a_sup", f17(e.a_sup));
    push("b_inf", f17(e.b_inf));
    push("b_sup", f17(e.b_sup));
    push("h1_slack", f17(report.slack_h1));
    push("h2_slack", f17(report.slack_h2));
    push("h3_slack", f17(report.slack_h3));
    if report.holds_h1 {
        push("sup_bound", f17(sup_bound(coeffs, params)?));
    }
    if report.holds_h2 {
        let (ml, mu) = attraction_rectangle(coeffs, params)?;
        push("m_lower", f17(ml));
        push("m_upper", f17(mu));
    }
    if report.holds_h1 {
        let speeds = oracles::spreading_speeds(coeffs, params)?;
        push("c_plus_star", f17(speeds.c_plus_star));
        match speeds.c_minus_star {
            Some(c) => push("c_minus_star", f17(c)),
            None => push("c_minus_star", "not-applicable".into()),
        }
    }
    let m_t = oracles::lemma21_threshold(1.0, coeffs)?;
    push("lemma21_mass_threshold_T1", f17(m_t));
    push(
        "lemma21_bound_T1_t1",
        f17(oracles::pointwise_lower_bound(m_t, m_t, 1.0, 1.0, coeffs)?),
    );
    let a0 = e.a_inf / 3.0;
    push(
        "dirichlet_sigma_L",
        f17(oracles::dirichlet_principal_eigenvalue(
            params.box_half_length,
            a0,
            params.dim,
        )?),
    );
    push(
        "dirichlet_L0",
        f17(oracles::dirichlet_negativity_threshold(a0, params.dim)?),
    );
    if coeffs.is_constant() && report.holds_h1 {
        // entire solution is a/b: the homogeneous reduction applies exactly
        let cm = params.chi_mu();
        push("rho", f17(cm / (e.b_inf - cm)));
        let bound = cm * e.a_sup * 2.0 / ((e.b_inf - cm) * e.b_inf);
        push("perturbation_bound_k2", f17(bound));
    }
    if report.holds_h1 {
        push(
            "remark12_bound_m0",
            f17(oracles::remark12_bound(0.0, coeffs, params)?),
        );
    }
    write_text(out, "audit.csv", &rows)?;
    write_text(
        out,
        "summary.txt",
        &format!(
            "oracle audit\nH1 {} (slack {})\nH2 {} (slack {})\nH3 {} (slack {})\n",
            report.holds_h1,
            f17(report.slack_h1),
            report.holds_h2,
            f17(report.slack_h2),
            report.holds_h3,
            f17(report.slack_h3),
        ),
    )?;
    Ok(())
}
