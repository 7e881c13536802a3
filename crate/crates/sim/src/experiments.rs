//! The three experiments plus the moment oracle.
//!
//! Drops are the unit of parallelism. Each drop draws from its own
//! substreams, results are collected in drop order and reduced on one
//! thread, so output does not depend on the size of the rayon pool the
//! caller runs them in.

use fdzf_core::analytics::{self, moment_oracle, Part, SumSeForm};
use fdzf_core::channel::{draw_cell_distance, draw_drop, link_gain, ChannelSampler, Drop, PathLossModel, UeGeometry};
use fdzf_core::linalg::{gram, hermitian_inverse};
use fdzf_core::neumann::{error_magnitude_with, neumann_inverse_from_gram, relative_frobenius_error, ErrorMetric, NeumannConfig};
use fdzf_core::precoding::gram_trace_inverse;
use fdzf_core::stats::MeanAccumulator;
use fdzf_core::stream::{substream, Purpose};
use fdzf_core::Error;
use rayon::prelude::*;

use crate::config::{BetaMode, Scenario, SimulationConfig};
use crate::table::{ResultTable, Value};
use crate::SimError;

/// Percentage of singular Gram matrices above which a run is aborted.
pub const MAX_SINGULAR_PERCENT: usize = 1;

const NOISE_POWER: f64 = 1.0;

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn drop_betas(cfg: &SimulationConfig, drop: u64, n_ues: usize) -> fdzf_core::Result<Vec<f64>> {
    match cfg.beta_mode {
        BetaMode::Unit => Ok(vec![1.0; n_ues]),
        BetaMode::LinkBudget => {
            let model = PathLossModel::for_carrier_ghz(cfg.carrier_ghz);
            let mut place = substream(cfg.seed, Purpose::Placement, drop, 0);
            let mut shadow = substream(cfg.seed, Purpose::LinkGain, drop, 0);
            (0..n_ues)
                .map(|_| {
                    let d = draw_cell_distance(cfg.cell_radius_m, cfg.link_budget.min_distance_m, &mut place)?;
                    link_gain(&model, d, &mut shadow, cfg.link_budget.shadowing)
                })
                .collect()
        }
    }
}

/// Path angles and link gains of drop `index` for the given LOS layout.
/// Angles come from the same substream for every layout, so scenarios
/// differ only in their geometry.
pub fn scenario_drop(cfg: &SimulationConfig, ues: &[UeGeometry], index: u64) -> fdzf_core::Result<Drop> {
    let betas = drop_betas(cfg, index, ues.len())?;
    let ues: Vec<UeGeometry> = ues
        .iter()
        .zip(&betas)
        .map(|(u, &b)| UeGeometry { link_gain: b, ..*u })
        .collect();
    let mut rng = substream(cfg.seed, Purpose::PathAngles, index, 0);
    draw_drop(&ues, cfg.n_paths, &mut rng)
}

fn singular_check(discarded: usize, total: usize) -> Result<(), SimError> {
    if discarded * 100 > total * MAX_SINGULAR_PERCENT {
        return Err(Error::TooManySingular { discarded, total }.into());
    }
    Ok(())
}

/// Everything the sweeps need from one drop, independent of the operating
/// SNR: `Tr[(HH^H)^{-1}]` per accepted realization and the closed-form
/// ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct DropSweep {
    pub betas: Vec<f64>,
    pub traces: Vec<f64>,
    pub discarded: usize,
    pub d_values: Vec<f64>,
    pub num_antennas: usize,
}

impl DropSweep {
    fn p_eirp(operating_snr_db: f64) -> f64 {
        from_db(operating_snr_db) * NOISE_POWER
    }

    fn mean_beta(&self) -> f64 {
        self.betas.iter().sum::<f64>() / self.betas.len() as f64
    }

    /// Per-UE SNR averaged over UEs and realizations (linear).
    pub fn sim_snr(&self, operating_snr_db: f64) -> f64 {
        let l = self.betas.len() as f64;
        let inv: f64 = self.traces.iter().map(|t| 1.0 / t).sum::<f64>() / self.traces.len() as f64;
        Self::p_eirp(operating_snr_db) * self.mean_beta() * l * inv / NOISE_POWER
    }

    /// Sum SE averaged over realizations, bits/s/Hz.
    pub fn sim_sum_se(&self, operating_snr_db: f64) -> f64 {
        let p = Self::p_eirp(operating_snr_db);
        let l = self.betas.len() as f64;
        let total: f64 = self
            .traces
            .iter()
            .map(|t| self.betas.iter().map(|b| (1.0 + p * b * l / (NOISE_POWER * t)).log2()).sum::<f64>())
            .sum();
        total / self.traces.len() as f64
    }

    fn analytic_snrs(&self, operating_snr_db: f64) -> fdzf_core::Result<Vec<f64>> {
        let delta = fdzf_core::channel::compute_mean_gram(self.betas.len(), self.num_antennas);
        analytics::expected_snr_approx(
            &delta,
            &self.d_values,
            &self.betas,
            Self::p_eirp(operating_snr_db),
            NOISE_POWER,
            self.num_antennas,
        )
    }

    /// Closed-form per-UE SNR averaged over UEs (linear).
    pub fn analytic_snr(&self, operating_snr_db: f64) -> fdzf_core::Result<f64> {
        let s = self.analytic_snrs(operating_snr_db)?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn analytic_sum_se(&self, operating_snr_db: f64) -> fdzf_core::Result<(f64, SumSeForm)> {
        analytics::sum_se_auto(&self.analytic_snrs(operating_snr_db)?)
    }
}

fn evaluate_drop(
    cfg: &SimulationConfig,
    ues: &[UeGeometry],
    geom: &fdzf_core::channel::ArrayGeometry,
    index: u64,
) -> fdzf_core::Result<DropSweep> {
    let drop = scenario_drop(cfg, ues, index)?;
    let sampler = ChannelSampler::new(&drop, geom)?;
    let covs = sampler.covariances();
    let d_values = analytics::compute_d(&covs.mean_gram, &covs.per_ue)?;
    let mut traces = Vec::with_capacity(cfg.n_realizations_per_drop);
    let mut discarded = 0;
    for r in 0..cfg.n_realizations_per_drop as u64 {
        let mut rng = substream(cfg.seed, Purpose::Fading, index, r);
        match gram_trace_inverse(&sampler.draw(&mut rng)) {
            Ok(t) => traces.push(t),
            Err(Error::SingularMatrix { .. }) => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(DropSweep {
        betas: drop.link_gains(),
        traces,
        discarded,
        d_values,
        num_antennas: geom.num_antennas(),
    })
}

/// Per-drop sweep ingredients for one scenario, in drop order.
pub fn evaluate_sweep_drops(cfg: &SimulationConfig, scenario: &Scenario) -> Result<Vec<DropSweep>, SimError> {
    let geom = cfg.geometry.build()?;
    let ues = cfg.scenario_ues(scenario, cfg.n_ues)?;
    let drops = (0..cfg.n_drops as u64)
        .into_par_iter()
        .map(|d| evaluate_drop(cfg, &ues, &geom, d))
        .collect::<fdzf_core::Result<Vec<_>>>()?;
    let discarded: usize = drops.iter().map(|d| d.discarded).sum();
    singular_check(discarded, cfg.n_drops * cfg.n_realizations_per_drop)?;
    if drops.iter().any(|d| d.traces.is_empty()) {
        return Err(Error::TooManySingular {
            discarded,
            total: cfg.n_drops * cfg.n_realizations_per_drop,
        }
        .into());
    }
    Ok(drops)
}

fn base_metadata(table: &mut ResultTable, cfg: &SimulationConfig, experiment: &str) {
    table.set_meta("tool", concat!("fdzf ", env!("CARGO_PKG_VERSION")));
    table.set_meta("experiment", experiment);
    table.set_meta("seed", cfg.seed);
    table.set_meta("config_sha256", cfg.hash());
    table.set_meta("n_ues", cfg.n_ues);
    table.set_meta("n_paths", cfg.n_paths);
    table.set_meta("asd_deg", format!("az {} el {}", cfg.asd_az_deg, cfg.asd_el_deg));
    table.set_meta(
        "angle_distribution",
        "path angles iid uniform over LOS angle +- ASD in each dimension",
    );
    table.set_meta("path_gains", "iid CN(0 1/N_P)");
    table.set_meta(
        "geometry",
        format!(
            "{:?} m_x {} m_z {} d_x {} d_z {}",
            cfg.geometry.kind, cfg.geometry.m_x, cfg.geometry.m_z, cfg.geometry.d_x, cfg.geometry.d_z
        ),
    );
    table.set_meta(
        "placement",
        format!(
            "UE k at reference (az {} el {}) + k * separation in both angles unless listed explicitly",
            cfg.placement.reference_az_deg, cfg.placement.reference_el_deg
        ),
    );
    let beta = match cfg.beta_mode {
        BetaMode::Unit => "unit (all link gains 1)".to_string(),
        BetaMode::LinkBudget => format!(
            "link_budget (uniform in cell radius {} m from {} m; carrier {} GHz; shadowing {})",
            cfg.cell_radius_m, cfg.link_budget.min_distance_m, cfg.carrier_ghz, cfg.link_budget.shadowing
        ),
    };
    table.set_meta("beta_mode", beta);
    table.set_meta("operating_snr", "P_EIRP / sigma^2 with sigma^2 = 1");
    table.set_meta("mean_gram", "Delta = E{HH^H} = M I");
}

fn sweep_metadata(table: &mut ResultTable, cfg: &SimulationConfig) {
    table.set_meta("drops", format!("{} drops x {} realizations", cfg.n_drops, cfg.n_realizations_per_drop));
    table.set_meta(
        "random_numbers",
        "common across scenarios: drop d uses the same path-angle and fading substreams in every scenario",
    );
    table.set_meta("std_error", "drop-level: std of per-drop means / sqrt(drops)");
    table.set_meta("singular_policy", format!("discard; abort above {MAX_SINGULAR_PERCENT}%"));
}

fn drop_estimate(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let acc: MeanAccumulator = values.collect();
    (acc.mean(), acc.std_error())
}

/// Expected per-UE ZF SNR against operating SNR, simulated and closed form.
pub fn run_snr_sweep(cfg: &SimulationConfig) -> Result<ResultTable, SimError> {
    cfg.validate()?;
    let mut table = ResultTable::new([
        "scenario",
        "az_separation_deg",
        "el_separation_deg",
        "operating_snr_db",
        "sim_snr_db",
        "sim_stderr_db",
        "analytic_snr_db",
        "gap_db",
        "discarded",
    ]);
    base_metadata(&mut table, cfg, "snr_sweep");
    sweep_metadata(&mut table, cfg);
    table.set_meta("sim_snr", "mean over UEs drops and realizations of P beta_l L / (sigma^2 Tr[(HH^H)^-1]), then dB");
    table.set_meta(
        "analytic_snr",
        "mean over UEs and drops of P beta_l / (sigma^2 Tr[(M^2 Delta^-1 + D) Delta^-2] / L), then dB",
    );
    table.set_meta("gap_db", "analytic_snr_db - sim_snr_db");

    for scenario in &cfg.sweep.snr_scenarios {
        let drops = evaluate_sweep_drops(cfg, scenario)?;
        let discarded: usize = drops.iter().map(|d| d.discarded).sum();
        for &snr_db in &cfg.operating_snr_db {
            let (sim, se) = drop_estimate(drops.iter().map(|d| d.sim_snr(snr_db)));
            let analytic = drops
                .iter()
                .map(|d| d.analytic_snr(snr_db))
                .collect::<fdzf_core::Result<MeanAccumulator>>()?
                .mean();
            let sim_db = db(sim);
            let analytic_db = db(analytic);
            table.push_row(vec![
                scenario.label().into(),
                scenario.az_separation_deg.into(),
                scenario.el_separation_deg.into(),
                snr_db.into(),
                sim_db.into(),
                (10.0 / std::f64::consts::LN_10 * se / sim).into(),
                analytic_db.into(),
                (analytic_db - sim_db).into(),
                discarded.into(),
            ]);
        }
    }
    Ok(table)
}

/// Ergodic sum spectral efficiency against operating SNR.
pub fn run_se_sweep(cfg: &SimulationConfig) -> Result<ResultTable, SimError> {
    cfg.validate()?;
    let mut table = ResultTable::new([
        "scenario",
        "az_separation_deg",
        "el_separation_deg",
        "operating_snr_db",
        "sim_sum_se",
        "sim_stderr",
        "analytic_sum_se",
        "analytic_form",
        "rel_gap",
        "discarded",
    ]);
    base_metadata(&mut table, cfg, "se_sweep");
    sweep_metadata(&mut table, cfg);
    table.set_meta("units", "bits/s/Hz");
    table.set_meta("sim_sum_se", "mean over drops and realizations of sum_l log2(1 + SNR_l)");
    table.set_meta(
        "analytic_sum_se",
        "mean over drops of L log2(1 + E{SNR}) (form common) or sum_l log2(1 + E{SNR_l}) (form per_ue)",
    );
    table.set_meta("rel_gap", "(analytic - sim) / sim");

    for scenario in &cfg.sweep.se_scenarios {
        let drops = evaluate_sweep_drops(cfg, scenario)?;
        let discarded: usize = drops.iter().map(|d| d.discarded).sum();
        for &snr_db in &cfg.operating_snr_db {
            let (sim, se) = drop_estimate(drops.iter().map(|d| d.sim_sum_se(snr_db)));
            let mut analytic = MeanAccumulator::new();
            let mut per_ue = false;
            for d in &drops {
                let (r, form) = d.analytic_sum_se(snr_db)?;
                analytic.push(r);
                per_ue |= form == SumSeForm::PerUe;
            }
            let form = if per_ue { SumSeForm::PerUe } else { SumSeForm::Common };
            let analytic = analytic.mean();
            table.push_row(vec![
                scenario.label().into(),
                scenario.az_separation_deg.into(),
                scenario.el_separation_deg.into(),
                snr_db.into(),
                sim.into(),
                se.into(),
                analytic.into(),
                form.name().into(),
                ((analytic - sim) / sim).into(),
                discarded.into(),
            ]);
        }
    }
    Ok(table)
}

struct AccuracySample {
    /// `|alpha|` and relative Frobenius error per requested order;
    /// infinite when not evaluable.
    alpha: Vec<f64>,
    frobenius: Vec<f64>,
}

fn accuracy_samples(
    cfg: &SimulationConfig,
    ues: &[UeGeometry],
    m: usize,
    orders: &[usize],
    metric: ErrorMetric,
    index: u64,
) -> fdzf_core::Result<Vec<AccuracySample>> {
    let geom = cfg.geometry.with_antennas(m)?;
    let drop = scenario_drop(cfg, ues, index)?;
    let sampler = ChannelSampler::new(&drop, &geom)?;
    let delta = fdzf_core::channel::compute_mean_gram(ues.len(), m);
    let mut out = Vec::with_capacity(cfg.ns_accuracy.n_realizations_per_drop);
    for r in 0..cfg.ns_accuracy.n_realizations_per_drop as u64 {
        let mut rng = substream(cfg.seed, Purpose::Fading, index, r);
        let g = gram(&sampler.draw(&mut rng));
        let exact = match hermitian_inverse(&g) {
            Ok(inv) => Some(inv),
            Err(Error::SingularMatrix { .. }) => None,
            Err(e) => return Err(e),
        };
        let mut sample = AccuracySample {
            alpha: Vec::with_capacity(orders.len()),
            frobenius: Vec::with_capacity(orders.len()),
        };
        for &order in orders {
            let approx = neumann_inverse_from_gram(&g, &delta, NeumannConfig::new(order)?)?;
            let (a, f) = match &exact {
                None => (f64::INFINITY, f64::INFINITY),
                Some(exact) => {
                    let a = match error_magnitude_with(metric, exact, &approx) {
                        Ok(a) => a.abs(),
                        Err(Error::NotEvaluable) => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                    (a, relative_frobenius_error(exact, &approx))
                }
            };
            sample.alpha.push(a);
            sample.frobenius.push(f);
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn alpha_column(order: usize, m: usize) -> String {
    format!("abs_alpha_n{order}_m{m}")
}

pub fn frobenius_column(order: usize, m: usize) -> String {
    format!("frob_n{order}_m{m}")
}

/// Empirical CDFs of the series error magnitude for every antenna count.
///
/// Each data column is sorted independently; row `i` of column `c` is the
/// `(i + 1) / n` quantile of `c`. Samples that could not be evaluated are
/// `inf` and sort last.
pub fn run_ns_accuracy(cfg: &SimulationConfig) -> Result<ResultTable, SimError> {
    cfg.validate()?;
    let ns = &cfg.ns_accuracy;
    let mut orders = vec![cfg.neumann_order];
    if ns.compare_order != cfg.neumann_order {
        orders.push(ns.compare_order);
    }
    let metric: ErrorMetric = cfg.error_metric.into();
    let ues = cfg.scenario_ues(&cfg.placement_scenario(), cfg.n_ues)?;
    let n = ns.n_drops * ns.n_realizations_per_drop;

    let mut columns = vec!["cdf".to_string()];
    let mut data: Vec<Vec<f64>> = Vec::new();
    let mut not_evaluable = Vec::new();
    for &m in &ns.m_values {
        let per_drop = (0..ns.n_drops as u64)
            .into_par_iter()
            .map(|d| accuracy_samples(cfg, &ues, m, &orders, metric, d))
            .collect::<fdzf_core::Result<Vec<_>>>()?;
        let samples: Vec<AccuracySample> = per_drop.into_iter().flatten().collect();
        for (k, &order) in orders.iter().enumerate() {
            let mut alpha: Vec<f64> = samples.iter().map(|s| s.alpha[k]).collect();
            let mut frob: Vec<f64> = samples.iter().map(|s| s.frobenius[k]).collect();
            alpha.sort_by(f64::total_cmp);
            frob.sort_by(f64::total_cmp);
            not_evaluable.push((alpha_column(order, m), alpha.iter().filter(|a| a.is_infinite()).count()));
            columns.push(alpha_column(order, m));
            data.push(alpha);
            columns.push(frobenius_column(order, m));
            data.push(frob);
        }
    }

    let mut table = ResultTable::new(columns);
    base_metadata(&mut table, cfg, "ns_accuracy");
    table.set_meta("alpha_metric", metric.name());
    table.set_meta("alpha_definition", metric.definition());
    table.set_meta("frobenius_definition", "||A - (HH^H)^-1||_F / ||(HH^H)^-1||_F");
    table.set_meta(
        "samples_per_m",
        format!("{n} = {} drops x {} realizations", ns.n_drops, ns.n_realizations_per_drop),
    );
    table.set_meta("geometry_per_m", "same kind and spacings; UPA uses the most square factorization of M");
    table.set_meta("orders", orders.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" "));
    table.set_meta("operating_snr_db", "0 (alpha does not depend on it)");
    table.set_meta("not_evaluable_encoding", "inf");
    for (col, count) in &not_evaluable {
        table.set_meta(&format!("not_evaluable_{col}"), count);
    }
    for i in 0..n {
        let mut row: Vec<Value> = Vec::with_capacity(data.len() + 1);
        row.push(((i + 1) as f64 / n as f64).into());
        row.extend(data.iter().map(|c| Value::Real(c[i])));
        table.push_row(row);
    }
    Ok(table)
}

/// Monte-Carlo check of the moment identities behind the closed form on a
/// small instance.
pub fn run_oracle(cfg: &SimulationConfig) -> Result<ResultTable, SimError> {
    cfg.validate()?;
    let o = &cfg.oracle;
    let geom = match cfg.geometry.kind {
        crate::config::GeometryKind::Ula => fdzf_core::channel::ArrayGeometry::ula(o.m_x * o.m_z, cfg.geometry.d_z)?,
        crate::config::GeometryKind::Upa => {
            fdzf_core::channel::ArrayGeometry::upa(o.m_x, o.m_z, cfg.geometry.d_x, cfg.geometry.d_z)?
        }
    };
    let ues = cfg.scenario_ues(&cfg.placement_scenario(), o.n_ues)?;
    let drop = scenario_drop(cfg, &ues, 0)?;
    let mut rng = substream(cfg.seed, Purpose::Instance, 0, 0);
    let report = moment_oracle(&drop, &geom, o.n_realizations, &mut rng)?;

    let mut table = ResultTable::new([
        "check", "quantity", "row", "col", "part", "estimate", "std_error", "analytic", "z_score",
    ]);
    base_metadata(&mut table, cfg, "oracle");
    table.set_meta(
        "instance",
        format!("M = {} ({} x {}), L = {}, {} realizations", geom.num_antennas(), o.m_x, o.m_z, o.n_ues, o.n_realizations),
    );
    table.set_meta("laplace_relative_gap", format!("{:.6e}", report.laplace_relative_gap()));
    table.set_meta("singular", report.singular);
    table.set_meta("z_score", "(estimate - analytic) / std_error");
    for c in &report.checks {
        table.push_row(vec![
            c.label().into(),
            c.quantity.name().into(),
            c.row.into(),
            c.col.into(),
            match c.part {
                Part::Re => "re",
                Part::Im => "im",
            }
            .into(),
            c.estimate.mean.into(),
            c.estimate.std_error.into(),
            c.analytic.into(),
            c.z_score().into(),
        ]);
    }
    Ok(table)
}

