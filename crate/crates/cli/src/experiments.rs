//! The experiment presets. Each turns a parameter map into artifacts and
//! may report a failed gate after its outputs are complete.

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thermoflow_core::collision::{
    epsilon_upper_bound, free_energy_change, loss_epsilon, sample_work, sample_work_values, simulate_random_alpha,
    work_moments, Histogram, NoiseModel, QubitProtocolConfig,
};
use thermoflow_core::maps::{dissipation_breakdown, CyclicProtocol};
use thermoflow_core::qudit::{gamma_coefficient, predicted_dissipation, run_qudit_protocol, QuditProtocolConfig, DEFAULT_PANELS};
use thermoflow_core::seeding::stream_seed;
use thermoflow_core::thermo::Temperature;
use thermoflow_core::tth::{g_function, minimize_g, w_dis_of_tth, DissipationQuery};

use crate::config::Experiment;
use crate::error::{CliError, CliResult, NumericContext};
use crate::output::{Artifact, Cell, Table};
use crate::params::{
    parse, temperature, BreakdownParams, CustomParams, Fig3Params, Fig4Params, NoiseSpec, QuditParams, TthParams,
};

/// Artifacts of one run and the first gate that failed, if any.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub gate: Option<CliError>,
}

impl Outcome {
    fn clean(artifacts: Vec<Artifact>) -> Self {
        Self { artifacts, gate: None }
    }
}

/// Fig. 4 caption values (N, mean, σ) at α = 1/2 in bit units.
pub const FIG4_REFERENCE: [(usize, f64, f64); 4] = [(100, 0.939, 0.34), (200, 0.967, 0.27), (500, 0.985, 0.18), (1000, 0.993, 0.14)];

/// Sample size the Fig. 4 envelope gate is defined for.
pub const FIG4_REFERENCE_RUNS: usize = 10_000;

/// Parameters with every default filled in, as hashed into the manifest.
pub fn resolve(experiment: Experiment, params: &Map<String, Value>) -> CliResult<Value> {
    let value = match experiment {
        Experiment::Fig3Loss => serde_json::to_value(parse::<Fig3Params>(params)?),
        Experiment::Fig4Histograms => serde_json::to_value(parse::<Fig4Params>(params)?),
        Experiment::QuditConvergence => serde_json::to_value(parse::<QuditParams>(params)?),
        Experiment::BreakdownScaling => serde_json::to_value(parse::<BreakdownParams>(params)?),
        Experiment::Fig5Fig6Tth => serde_json::to_value(parse::<TthParams>(params)?),
        Experiment::Custom => serde_json::to_value(parse_custom(params)?),
    };
    Ok(value.expect("parameters serialize"))
}

pub fn execute(experiment: Experiment, params: &Map<String, Value>, master_seed: u64) -> CliResult<Outcome> {
    match experiment {
        Experiment::Fig3Loss => fig3_loss(parse(params)?),
        Experiment::Fig4Histograms => fig4_histograms(parse(params)?, master_seed),
        Experiment::QuditConvergence => qudit_convergence(parse(params)?),
        Experiment::BreakdownScaling => breakdown_scaling(parse(params)?),
        Experiment::Fig5Fig6Tth => fig5_fig6_tth(parse(params)?),
        Experiment::Custom => custom(parse_custom(params)?, master_seed),
    }
}

fn parse_custom(params: &Map<String, Value>) -> CliResult<CustomParams> {
    if params.is_empty() {
        return Err(CliError::config("parameters", "the custom experiment needs at least `n` and `noise`"));
    }
    parse(params)
}

fn require_steps(n_values: &[usize]) -> CliResult<()> {
    if n_values.is_empty() {
        return Err(CliError::config("parameters.n_values", "empty"));
    }
    if n_values.contains(&0) {
        return Err(CliError::config("parameters.n_values", "N must be at least 1"));
    }
    Ok(())
}

fn fig3_loss(p: Fig3Params) -> CliResult<Outcome> {
    require_steps(&p.n_values)?;
    let temp = temperature(p.temperature).at_key("parameters.temperature")?;
    QubitProtocolConfig::canonical(1, p.alpha, temp).at_key("parameters.alpha")?;
    let rows: Vec<(usize, f64, f64)> = p
        .n_values
        .par_iter()
        .map(|&n| {
            let config = QubitProtocolConfig::canonical(n, p.alpha, temp).at_key("parameters")?;
            let eps = loss_epsilon(&config).during("collision-qubit/loss_epsilon")?;
            let bound = epsilon_upper_bound(n, p.alpha, temp).during("collision-qubit/epsilon_upper_bound")?;
            Ok((n, eps, bound))
        })
        .collect::<CliResult<_>>()?;
    let mut table = Table::new(&["N", "alpha", "epsilon_exact", "epsilon_bound"]);
    let mut gate = None;
    for &(n, eps, bound) in &rows {
        table.push(vec![n.into(), p.alpha.into(), eps.into(), bound.into()]);
        // At α = 0 both sides vanish identically.
        let dominated = if p.alpha == 0.0 { eps == 0.0 } else { eps >= 0.0 && eps < bound };
        if !dominated && gate.is_none() {
            gate = Some(CliError::Gate {
                gate: "fig3-loss/bound",
                detail: format!("N = {n}: epsilon {eps:e} vs bound {bound:e}"),
            });
        }
    }
    Ok(Outcome {
        artifacts: vec![Artifact::table("fig3_loss", table)],
        gate,
    })
}

fn histogram_table(hist: &Histogram<f64>) -> Table {
    let mut t = Table::new(&["bin_left", "bin_right", "count"]);
    for (w, &c) in hist.edges.windows(2).zip(&hist.counts) {
        t.push(vec![w[0].into(), w[1].into(), c.into()]);
    }
    t
}

fn sample_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn fig4_histograms(p: Fig4Params, master_seed: u64) -> CliResult<Outcome> {
    require_steps(&p.n_values)?;
    if p.runs == 0 {
        return Err(CliError::config("parameters.runs", "need at least one run"));
    }
    if p.bins == 0 {
        return Err(CliError::config("parameters.bins", "need at least one bin"));
    }
    let temp = temperature(p.temperature).at_key("parameters.temperature")?;
    let reference_setup = p.alpha == 0.5 && p.temperature.is_none() && p.runs == FIG4_REFERENCE_RUNS;
    let mut artifacts = Vec::new();
    let mut summary = Table::new(&["N", "alpha", "runs", "mean", "sigma", "std_error", "exact_mean", "exact_sigma"]);
    let mut gate = None;
    for &n in &p.n_values {
        let config = QubitProtocolConfig::canonical(n, p.alpha, temp).at_key("parameters")?;
        let seed = stream_seed(master_seed, &format!("fig4-histograms/N={n}/alpha={:?}", p.alpha));
        let values = sample_work_values(&config, p.runs, seed).during("collision-qubit/sample_work")?;
        let exact = work_moments(&config).during("collision-qubit/work_moments")?;
        let (mean, sigma) = sample_stats(&values);
        let se = sigma / (p.runs as f64).sqrt();
        artifacts.push(Artifact::table(
            format!("fig4_hist_n{n}"),
            histogram_table(&Histogram::from_samples(&values, p.bins)),
        ));
        summary.push(vec![
            n.into(),
            p.alpha.into(),
            p.runs.into(),
            mean.into(),
            sigma.into(),
            se.into(),
            exact.mean.into(),
            exact.std_dev().into(),
        ]);
        let reference = FIG4_REFERENCE.iter().find(|r| r.0 == n);
        if let (true, Some(&(_, m_ref, s_ref)), None) = (reference_setup, reference, &gate) {
            if (mean - m_ref).abs() > 4.0 * se || (sigma - s_ref).abs() > 0.1 * s_ref {
                gate = Some(CliError::Gate {
                    gate: "fig4-histograms/envelope",
                    detail: format!("N = {n}: mean {mean:.5} ± {se:.5}, sigma {sigma:.5}"),
                });
            }
        }
    }
    artifacts.push(Artifact::table("fig4_summary", summary));
    Ok(Outcome { artifacts, gate })
}

fn qudit_convergence(p: QuditParams) -> CliResult<Outcome> {
    require_steps(&p.n_values)?;
    let temp = Temperature::new(p.temperature).at_key("parameters.temperature")?;
    let path = p.path.build(temp).at_key("parameters.path")?;
    let base = QuditProtocolConfig::matched(path.clone(), 1, p.alpha).at_key("parameters.alpha")?;
    let gamma = gamma_coefficient(&path, DEFAULT_PANELS).during("qudit-collision/gamma_coefficient")?;
    let f0 = path
        .free_energy_rate(0.0, &base.h_system)
        .during("qudit-collision/asymptotic_dissipation")?;
    let f1 = path
        .free_energy_rate(1.0, &base.h_system)
        .during("qudit-collision/asymptotic_dissipation")?;
    let rows: Vec<Vec<Cell>> = p
        .n_values
        .par_iter()
        .map(|&n| {
            let config = base.with(n, p.alpha).at_key("parameters")?;
            let run = run_qudit_protocol(&config).during("qudit-collision/run_qudit_protocol")?;
            let w = run.ledger.cumulative_work;
            let df = config.free_energy_change().during("qudit-collision/run_qudit_protocol")?;
            let predicted = predicted_dissipation(gamma, f0, f1, n, p.alpha);
            Ok(vec![n.into(), p.alpha.into(), w.into(), (df - w).into(), predicted.into()])
        })
        .collect::<CliResult<_>>()?;
    let mut table = Table::new(&["N", "alpha", "W_exact", "W_dis_exact", "W_dis_predicted"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(Outcome::clean(vec![Artifact::table("qudit_convergence", table)]))
}

fn breakdown_scaling(p: BreakdownParams) -> CliResult<Outcome> {
    require_steps(&p.n_values)?;
    let temp = Temperature::new(p.temperature).at_key("parameters.temperature")?;
    let path = p.path.build(temp).at_key("parameters.path")?;
    let channel = p.channel.build(p.alpha).at_key("parameters.alpha")?;
    let mode = p.evolution();
    let build = |n: usize| {
        if p.open_segment {
            CyclicProtocol::open_segment(path.clone(), n, channel.clone(), mode)
        } else {
            CyclicProtocol::new(path.clone(), n, channel.clone(), mode)
        }
    };
    build(1).at_key("parameters.path")?;
    let rho0 = path.gibbs(0.0).during("thermal-maps/dissipation_breakdown")?;
    let rows: Vec<Vec<Cell>> = p
        .n_values
        .par_iter()
        .map(|&n| {
            let protocol = build(n).at_key("parameters")?;
            let b = dissipation_breakdown(&protocol, &rho0).during("thermal-maps/dissipation_breakdown")?;
            Ok(vec![
                n.into(),
                p.alpha.into(),
                b.gamma.into(),
                b.epsilon.into(),
                b.kappa.into(),
                b.total.into(),
                b.w_iso.into(),
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut table = Table::new(&["N", "alpha", "gamma", "epsilon", "kappa", "total", "W_iso"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(Outcome::clean(vec![Artifact::table("breakdown_scaling", table)]))
}

fn fig5_fig6_tth(p: TthParams) -> CliResult<Outcome> {
    let model = p.model.build().at_key("parameters.model")?;
    let (lo_default, hi_default) = p.model.default_range();
    let lo = p.t_min.unwrap_or(lo_default);
    let hi = p.t_max.unwrap_or(hi_default).min(p.total_time * (1.0 - 1e-12));
    if !(lo > 0.0 && lo < hi) {
        return Err(CliError::config("parameters.t_min", format!("need 0 < t_min < t_max, got ({lo}, {hi})")));
    }
    if p.points < 2 {
        return Err(CliError::config("parameters.points", "need at least two points"));
    }
    let query = DissipationQuery::new(model.clone(), p.gamma, p.total_time, (lo, hi)).at_key("parameters")?;
    let rows: Vec<Vec<Cell>> = (0..p.points)
        .into_par_iter()
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (p.points - 1) as f64;
            let g = g_function(&model, t).during("tth-optimizer/g_function")?;
            let w = w_dis_of_tth(&query, t).during("tth-optimizer/w_dis_of_tth")?;
            Ok(vec![t.into(), model.alpha(t).into(), g.into(), w.into()])
        })
        .collect::<CliResult<_>>()?;
    let mut curve = Table::new(&["t", "alpha", "G", "W_dis"]);
    rows.into_iter().for_each(|r| curve.push(r));
    let opt = minimize_g(&model, (lo, hi), p.tol).during("tth-optimizer/minimize_g")?;
    let doc = json!({
        "t_opt": opt.t_opt,
        "G_opt": opt.g_opt,
        "alpha_opt": opt.alpha_opt,
        "monotone_flag": opt.monotone,
    });
    Ok(Outcome::clean(vec![
        Artifact::table("tth_curve", curve),
        Artifact::document("tth_optimum", doc),
    ]))
}

fn custom(p: CustomParams, master_seed: u64) -> CliResult<Outcome> {
    let temp = temperature(p.temperature).at_key("parameters.temperature")?;
    let schedule = p.schedule.build(p.n, temp).at_key("parameters.schedule")?;
    let noise = p.noise.build(stream_seed(master_seed, "custom/noise"));
    let config = QubitProtocolConfig::new(p.p0, p.eps_s, schedule.clone(), noise).at_key("parameters")?;
    let mean_alpha = noise.mean_alpha();
    // Work is linear in each independent α_k, so the fixed mean-α protocol
    // gives the exact mean under random noise too.
    let mean_config =
        QubitProtocolConfig::new(p.p0, p.eps_s, schedule, NoiseModel::fixed(mean_alpha)).at_key("parameters")?;
    let exact = work_moments(&mean_config).during("collision-qubit/work_moments")?;
    let exact_variance = match p.noise {
        NoiseSpec::Fixed { .. } => exact.variance,
        _ => f64::NAN,
    };
    let mut artifacts = Vec::new();
    let (ledger, sampled) = if p.runs > 0 {
        let seed = stream_seed(master_seed, &format!("custom/N={}", p.n));
        let ledger = match p.noise {
            NoiseSpec::Fixed { .. } => sample_work(&config, p.runs, seed).during("collision-qubit/sample_work")?,
            _ => {
                simulate_random_alpha(&config, p.runs, seed)
                    .during("collision-qubit/simulate_random_alpha")?
                    .ledger
            }
        };
        let values = sample_work_values(&config, p.runs, seed).during("collision-qubit/sample_work")?;
        artifacts.push(Artifact::table(
            "custom_hist",
            histogram_table(&Histogram::from_samples(&values, p.bins.max(1))),
        ));
        let stats = (ledger.mean, ledger.std_dev(), ledger.standard_error());
        (ledger, Some(stats))
    } else {
        (exact.clone(), None)
    };
    let (s_mean, s_sigma, s_se) = sampled.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    let mut summary = Table::new(&[
        "N",
        "mean_alpha",
        "delta_F",
        "exact_mean",
        "exact_variance",
        "runs",
        "sample_mean",
        "sample_sigma",
        "std_error",
    ]);
    summary.push(vec![
        p.n.into(),
        mean_alpha.into(),
        free_energy_change(&config).into(),
        exact.mean.into(),
        exact_variance.into(),
        p.runs.into(),
        s_mean.into(),
        s_sigma.into(),
        s_se.into(),
    ]);
    artifacts.insert(0, Artifact::table("custom_summary", summary));
    artifacts.push(Artifact::document(
        "custom_ledger",
        serde_json::to_value(&ledger).expect("ledger serializes"),
    ));
    Ok(Outcome::clean(artifacts))
}
