//! The four experiment modes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use wdm_core::analysis::{
    ap_verdict, check_dirac_necessary_conditions, default_test_family, detect_limit_clusters, fit_convergence_order,
    predict_limit_mass, self_convergence_of, weak_measure_gap, weighted_pointwise_error, ApVerdict, Cluster,
    ConvergenceFit, DiagnosticsReport, DiracCheck, SweepSettings,
};
use wdm_core::discretize::{check_spacing, partition_support, SpacingReport};
use wdm_core::dynamics::{active_box, default_dt, integrate, MonitorReport, RunConfig, Trajectory};
use wdm_core::reference::{l1_distance, solve_reference, OracleConfig, ReferenceGrid};
use wdm_core::regularize::{reconstruct, Cutoff, SampledFunction, UniformGrid, GAUSSIAN_TRUNCATION};
use wdm_core::{Aabb, ParticleEnsemble};

use crate::artifacts::{thin, ArtifactDir};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::plot::{emit_plot, PlotStyle, Series};
use crate::presets::{build_problem, Problem};

/// Rows kept in time-series tables and plots.
const SERIES_ROWS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Converge,
    Asymptote,
    ReproduceFig2,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Converge => "converge",
            Mode::Asymptote => "asymptote",
            Mode::ReproduceFig2 => "reproduce fig2",
        }
    }
}

/// One particle run of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub label: String,
    pub h: f64,
    pub eps: f64,
    pub dt: f64,
    pub t_final: f64,
    pub particles: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub monitors: MonitorReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<SpacingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<bool>,
    pub clusters: Vec<Cluster>,
    /// Limit mass predicted at each cluster, when the growth rate has a root
    /// there. Written as `nan` where it has none, as in `clusters.csv`.
    #[serde(serialize_with = "nan_for_none")]
    pub predicted: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<DiracCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_gap: Option<f64>,
}

fn nan_for_none<S: serde::Serializer>(values: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(values.iter().map(|v| v.unwrap_or(f64::NAN)))
}

/// What a mode computed, besides the files it wrote.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub members: Vec<MemberSummary>,
    pub diagnostics: DiagnosticsReport,
    /// `(dx, dt, mass)` of each oracle solve in a refinement.
    pub oracle_refinement: Vec<(f64, f64, f64)>,
    /// Per-scenario outcomes of `reproduce fig2`.
    pub scenarios: Vec<(String, Outcome)>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            members: Vec::new(),
            diagnostics: DiagnosticsReport::default(),
            oracle_refinement: Vec::new(),
            scenarios: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Every particle run, including those of sub-scenarios.
    pub fn all_members(&self) -> Vec<&MemberSummary> {
        let mut out: Vec<&MemberSummary> = self.members.iter().collect();
        for (_, s) in &self.scenarios {
            out.extend(s.all_members());
        }
        out
    }
}

/// Runs `mode` and writes its artifacts under `out`. A numerical failure
/// leaves `error.txt` in `out`.
pub fn run(mode: Mode, cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let dir = ArtifactDir::create(out)?;
    let result = match mode {
        Mode::Simulate => simulate(cfg, &dir),
        Mode::Converge => converge(cfg, &dir),
        Mode::Asymptote => asymptote(cfg, &dir),
        Mode::ReproduceFig2 => reproduce_fig2(cfg, &dir),
    };
    match result {
        Err(CliError::Numerical { source, report: None }) => {
            let text = format!("mode: {}\nerror: {source}\n", mode.name());
            let report = dir.write_text("error.txt", &text).ok();
            Err(CliError::Numerical { source, report })
        }
        other => other,
    }
}

fn cutoff(cfg: &ExperimentConfig, dim: usize) -> CliResult<Cutoff> {
    Ok(Cutoff::by_name(&cfg.discretization.cutoff, dim)?)
}

fn eps_of(cfg: &ExperimentConfig, h: f64) -> CliResult<f64> {
    Ok(cfg.discretization.eps.apply(h)?)
}

fn common_dt(cfg: &ExperimentConfig, problem: &Problem, h_min: f64) -> f64 {
    cfg.run.dt.unwrap_or_else(|| default_dt(h_min, problem.model.a_sup))
}

/// Steps between snapshots so that they land every `interval` time units.
fn snapshot_every(t_final: f64, dt: f64, interval: f64) -> usize {
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0);
    let used = t_final / steps;
    ((interval / used).round() as usize).max(1)
}

fn run_config(cfg: &ExperimentConfig, dt: f64, max_interval: Option<f64>) -> RunConfig {
    let t = cfg.run.t_final;
    let mut interval = cfg.run.snapshot_interval.unwrap_or(t / 8.0);
    if let Some(m) = max_interval {
        interval = interval.min(m);
    }
    let mut rc = RunConfig::new(t, dt);
    if interval > 0.0 {
        rc = rc.with_snapshot_every(snapshot_every(t, dt, interval));
    }
    rc.negative_alarm = cfg.run.negative_alarm;
    rc
}

fn particle_run(problem: &Problem, h: f64, rc: &RunConfig) -> CliResult<Trajectory> {
    let ens = partition_support(&problem.v0, &problem.model, h, rc.t_final)?;
    Ok(integrate(&problem.model, &ens, rc)?)
}

fn radius(phi: &Cutoff) -> f64 {
    phi.radius().unwrap_or(GAUSSIAN_TRUNCATION)
}

/// Grid covering the particles of `ens` plus the cut-off reach.
fn frame_grid(cfg: &ExperimentConfig, ens: &ParticleEnsemble, phi: &Cutoff, eps: f64) -> CliResult<UniformGrid> {
    let d = ens.dim;
    let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
    for i in 0..ens.len() {
        for (k, &x) in ens.position(i).iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let bbox = Aabb::new(lo, hi).dilate(radius(phi) * eps);
    let spacing = cfg
        .output
        .grid_spacing
        .unwrap_or(if d == 1 { eps / 4.0 } else { eps / 2.0 });
    Ok(UniformGrid::covering(&bbox, spacing)?)
}

fn frame(cfg: &ExperimentConfig, ens: &ParticleEnsemble, phi: &Cutoff, eps: f64) -> CliResult<SampledFunction> {
    let grid = frame_grid(cfg, ens, phi, eps)?;
    Ok(reconstruct(ens, phi, eps, &grid)?)
}

fn mass_plot(dir: &ArtifactDir, traj: &Trajectory, title: &str) -> CliResult<()> {
    let pts: Vec<(f64, f64)> = thin(&traj.series, SERIES_ROWS)
        .iter()
        .map(|s| (s.time, s.mass))
        .collect();
    emit_plot(
        &dir.file("mass.svg"),
        &[Series::new("rho_h", pts)],
        &PlotStyle {
            title: title.into(),
            x_label: "t".into(),
            y_label: "total mass".into(),
            ..PlotStyle::default()
        },
    )
}

/// Manifest, time series, snapshots, frames and plots of one run.
fn write_run(
    dir: &ArtifactDir,
    cfg: &ExperimentConfig,
    mode: &str,
    traj: &Trajectory,
    phi: &Cutoff,
    eps: f64,
) -> CliResult<()> {
    dir.write_manifest(cfg, mode)?;
    dir.write_table(
        "mass.csv",
        &["t", "mass", "min_nu", "max_nu", "min_w", "max_w", "max_displacement"],
        thin(&traj.series, SERIES_ROWS)
            .iter()
            .map(|s| vec![s.time, s.mass, s.min_nu, s.max_nu, s.min_w, s.max_w, s.max_displacement]),
    )?;
    mass_plot(dir, traj, &format!("{} mass", cfg.model.name))?;
    dir.write_particles("final_particles.csv", traj.final_state())?;
    if cfg.output.snapshots {
        let snaps = dir.sub("snapshots")?;
        snaps.write_table(
            "index.csv",
            &["index", "t", "mass"],
            traj.snapshots
                .iter()
                .enumerate()
                .map(|(k, s)| vec![k as f64, s.time, s.mass()]),
        )?;
        for (k, s) in traj.snapshots.iter().enumerate() {
            snaps.write_particles(&format!("particles_{k:04}.csv"), s)?;
        }
    }
    if cfg.output.frames {
        let frames = dir.sub("frames")?;
        let recs: Vec<SampledFunction> = traj
            .snapshots
            .par_iter()
            .map(|s| frame(cfg, s, phi, eps))
            .collect::<CliResult<_>>()?;
        for (k, rec) in recs.iter().enumerate() {
            frames.write_sampled(&format!("frame_{k:04}.csv"), rec)?;
        }
        let last = recs.last().expect("a run has snapshots");
        if last.grid.dim() == 1 {
            let x0 = last.grid.origin[0];
            let dx = last.grid.spacing[0];
            let pts: Vec<(f64, f64)> = last
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| (x0 + j as f64 * dx, *v))
                .collect();
            emit_plot(
                &dir.file("density.svg"),
                &[Series::new(format!("v_eps^h at t = {}", traj.final_state().time), pts)],
                &PlotStyle {
                    title: "regularized particle solution".into(),
                    x_label: "x".into(),
                    y_label: "density".into(),
                    ..PlotStyle::default()
                },
            )?;
        }
    }
    Ok(())
}

fn member_summary(label: String, h: f64, eps: f64, traj: &Trajectory) -> MemberSummary {
    let fin = traj.final_state();
    MemberSummary {
        label,
        h,
        eps,
        dt: traj.dt,
        t_final: fin.time,
        particles: fin.len(),
        initial_mass: traj.initial().mass(),
        final_mass: fin.mass(),
        monitors: traj.monitors,
        spacing: if fin.dim == 1 { check_spacing(fin).ok() } else { None },
        l1_error: None,
        weighted_error: None,
        stationary: None,
        clusters: Vec::new(),
        predicted: Vec::new(),
        residuals: None,
        weak_gap: None,
    }
}

fn snapshot_masses(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.snapshots.iter().map(|s| (s.time, s.mass())).collect()
}

fn require_oracle_model(problem: &Problem) -> CliResult<()> {
    if problem.model.dim != 1 || !problem.model.is_local() {
        return Err(CliError::Usage(format!(
            "the oracle needs a one-dimensional model with local advection; '{}' is not",
            problem.model.name
        )));
    }
    Ok(())
}

fn oracle_config(cfg: &ExperimentConfig, dx: f64, dt: f64, padding: usize) -> OracleConfig {
    let mut oc = OracleConfig::new(dx, dt).with_padding(padding).with_tol(cfg.oracle.tol);
    oc.substeps = cfg.oracle.substeps;
    oc
}

fn write_oracle(dir: &ArtifactDir, oracle: &ReferenceGrid) -> CliResult<()> {
    dir.write_table(
        "oracle.csv",
        &["x", "value"],
        oracle.values.iter().enumerate().map(|(j, v)| vec![oracle.node(j), *v]),
    )?;
    #[derive(Serialize)]
    struct Meta<'a> {
        model: &'a str,
        t: f64,
        dx: f64,
        dt: f64,
        tol: f64,
        lo: f64,
        hi: f64,
        nodes: usize,
        mass: f64,
        max_iterations: usize,
    }
    dir.write_report(
        "oracle_meta.toml",
        &Meta {
            model: &oracle.model,
            t: oracle.time,
            dx: oracle.dx,
            dt: oracle.dt,
            tol: oracle.tol,
            lo: oracle.lo,
            hi: oracle.hi(),
            nodes: oracle.len(),
            mass: oracle.mass(),
            max_iterations: oracle.max_iterations,
        },
    )?;
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, dir: &ArtifactDir) -> CliResult<Outcome> {
    let problem = build_problem(cfg)?;
    let h = cfg.single_h()?;
    let cfg = &cfg.member(h);
    let phi = cutoff(cfg, problem.model.dim)?;
    let eps = eps_of(cfg, h)?;
    let dt = common_dt(cfg, &problem, h);
    let traj = particle_run(&problem, h, &run_config(cfg, dt, None))?;
    write_run(dir, cfg, Mode::Simulate.name(), &traj, &phi, eps)?;
    let mut member = member_summary("run".into(), h, eps, &traj);
    let mut report = DiagnosticsReport {
        model: problem.model.name.clone(),
        mass_series: snapshot_masses(&traj),
        ..DiagnosticsReport::default()
    };
    if cfg.oracle.enabled {
        require_oracle_model(&problem)?;
        let o = &cfg.oracle;
        let padding = o.padding.unwrap_or(((radius(&phi) * eps) / o.dx).ceil() as usize + 1);
        let oracle = solve_reference(
            &problem.model,
            &problem.v0,
            cfg.run.t_final,
            &oracle_config(cfg, o.dx, o.dt, padding),
        )?;
        write_oracle(dir, &oracle)?;
        let rec = reconstruct(traj.final_state(), &phi, eps, &oracle.sample_grid())?;
        let l1 = l1_distance(&oracle, &rec)?;
        let weighted = weighted_pointwise_error(traj.final_state(), &oracle)?;
        member.l1_error = Some(l1);
        member.weighted_error = Some(weighted);
        report.l1_errors = vec![(h, l1)];
        report.weighted_errors = vec![(h, weighted)];
        report.oracle_mass = Some(oracle.mass());
    }
    dir.write_report("run.toml", &member)?;
    dir.write_report("report.toml", &report)?;

    let mut outcome = Outcome::new(dir.path());
    outcome.summary = vec![
        format!(
            "simulate {} in {}D: {} particles, h = {h}, eps = {eps:.4e}, dt = {:.4e}",
            problem.model.name, problem.model.dim, member.particles, member.dt
        ),
        format!(
            "mass {:.6} -> {:.6} at t = {}",
            member.initial_mass, member.final_mass, member.t_final
        ),
        format!(
            "monitors: mass excess {:.3e}, support excess {:.3e}, snapshots {}",
            member.monitors.max_mass_excess,
            member.monitors.max_support_excess,
            traj.snapshots.len()
        ),
    ];
    if let (Some(l1), Some(w)) = (member.l1_error, member.weighted_error) {
        outcome
            .summary
            .push(format!("oracle: L1 error {l1:.4e}, weighted error {w:.4e}"));
    }
    outcome.members.push(member);
    outcome.diagnostics = report;
    Ok(outcome)
}

fn order_plot(dir: &ArtifactDir, name: &str, series: Vec<Series>, title: &str) -> CliResult<()> {
    emit_plot(
        &dir.file(name),
        &series,
        &PlotStyle {
            title: title.into(),
            x_label: "h".into(),
            y_label: "error".into(),
            log_log: true,
            lines: true,
            markers: true,
        },
    )
}

fn fit_line(name: &str, fit: &ConvergenceFit) -> String {
    format!(
        "{name}: order {:.3} (stderr {:.3}, max log residual {:.3})",
        fit.slope, fit.slope_stderr, fit.residual
    )
}

/// Sweep members in parallel, each writing into `members/member_k`.
fn run_members<F>(
    cfg: &ExperimentConfig,
    dir: &ArtifactDir,
    problem: &Problem,
    mode: &str,
    max_interval: Option<f64>,
    extra: F,
) -> CliResult<Vec<(MemberSummary, Trajectory)>>
where
    F: Fn(&ArtifactDir, &Trajectory, &mut MemberSummary) -> CliResult<()> + Sync,
{
    let hs = cfg.sweep()?;
    let phi = cutoff(cfg, problem.model.dim)?;
    let dt = common_dt(cfg, problem, *hs.last().expect("non-empty sweep"));
    let members = dir.sub("members")?;
    hs.par_iter()
        .enumerate()
        .map(|(k, &h)| {
            let mcfg = cfg.member(h);
            let mut mcfg_dt = mcfg.clone();
            mcfg_dt.run.dt = Some(dt);
            let eps = eps_of(&mcfg, h)?;
            let traj = particle_run(problem, h, &run_config(&mcfg, dt, max_interval))?;
            let mdir = members.sub(&format!("member_{k}"))?;
            write_run(&mdir, &mcfg_dt, mode, &traj, &phi, eps)?;
            let mut summary = member_summary(format!("member_{k}"), h, eps, &traj);
            extra(&mdir, &traj, &mut summary)?;
            mdir.write_report("run.toml", &summary)?;
            Ok((summary, traj))
        })
        .collect()
}

fn converge(cfg: &ExperimentConfig, dir: &ArtifactDir) -> CliResult<Outcome> {
    let hs = cfg
        .discretization
        .h_list
        .clone()
        .ok_or_else(|| CliError::Usage("converge needs discretization.h_list".into()))?;
    if hs.len() < 3 {
        return Err(CliError::Usage(format!(
            "converge needs at least 3 h values to fit an order, got {}",
            hs.len()
        )));
    }
    let problem = build_problem(cfg)?;
    dir.write_manifest(cfg, Mode::Converge.name())?;
    let phi = cutoff(cfg, problem.model.dim)?;
    let mut outcome = Outcome::new(dir.path());
    let mut report = DiagnosticsReport {
        model: problem.model.name.clone(),
        ..DiagnosticsReport::default()
    };
    let eps: Vec<f64> = hs.iter().map(|&h| eps_of(cfg, h)).collect::<CliResult<_>>()?;

    if cfg.oracle.enabled {
        require_oracle_model(&problem)?;
        let o = &cfg.oracle;
        let eps_max = eps.iter().copied().fold(0.0, f64::max);
        let padding = o
            .padding
            .unwrap_or(((radius(&phi) * eps_max) / o.dx).ceil() as usize + 1);
        let oracle = solve_reference(
            &problem.model,
            &problem.v0,
            cfg.run.t_final,
            &oracle_config(cfg, o.dx, o.dt, padding),
        )?;
        write_oracle(dir, &oracle)?;
        let grid = oracle.sample_grid();
        let members = run_members(cfg, dir, &problem, Mode::Converge.name(), None, |_, traj, m| {
            let rec = reconstruct(traj.final_state(), &phi, m.eps, &grid)?;
            m.l1_error = Some(l1_distance(&oracle, &rec)?);
            m.weighted_error = Some(weighted_pointwise_error(traj.final_state(), &oracle)?);
            Ok(())
        })?;
        report.l1_errors = members.iter().map(|(m, _)| (m.h, m.l1_error.expect("set"))).collect();
        report.weighted_errors = members
            .iter()
            .map(|(m, _)| (m.h, m.weighted_error.expect("set")))
            .collect();
        report.oracle_mass = Some(oracle.mass());
        report.mass_series = snapshot_masses(&members.last().expect("non-empty").1);
        dir.write_table(
            "errors.csv",
            &["h", "eps", "l1_error", "weighted_error"],
            members
                .iter()
                .map(|(m, _)| vec![m.h, m.eps, m.l1_error.expect("set"), m.weighted_error.expect("set")]),
        )?;
        outcome.members = members.into_iter().map(|(m, _)| m).collect();
    } else {
        let members = run_members(cfg, dir, &problem, Mode::Converge.name(), None, |_, _, _| Ok(()))?;
        let finals: Vec<ParticleEnsemble> = members.iter().map(|(_, t)| t.final_state().clone()).collect();
        let settings = SweepSettings {
            horizon: cfg.run.t_final,
            eps_rule: cfg.discretization.eps,
            cutoff: phi,
            dt: None,
        };
        let sc = self_convergence_of(&problem.model, &hs, &finals, &settings)?;
        report.mass_series = snapshot_masses(&members.last().expect("non-empty").1);
        report.l1_errors = sc.distances.clone();
        report.notes.push(format!(
            "no oracle: errors are L1 distances to the finest run (h = {}), reconstructed on a grid of spacing {}",
            hs.last().expect("non-empty"),
            sc.grid_spacing
        ));
        dir.write_table(
            "errors.csv",
            &["h", "eps", "self_l1_distance"],
            sc.distances.iter().zip(&eps).map(|(&(h, d), &e)| vec![h, e, d]),
        )?;
        outcome.members = members.into_iter().map(|(m, _)| m).collect();
        for (m, &(_, d)) in outcome.members.iter_mut().zip(&sc.distances) {
            m.l1_error = Some(d);
        }
    }

    let l1_fit = fit_convergence_order(&report.l1_errors)?;
    let mut series = vec![Series::new("L1", report.l1_errors.clone())];
    outcome
        .summary
        .push(format!("converge {} over {} h values", problem.model.name, hs.len()));
    outcome.summary.push(fit_line("L1", &l1_fit));
    report.l1_fit = Some(l1_fit);
    if !report.weighted_errors.is_empty() {
        let w_fit = fit_convergence_order(&report.weighted_errors)?;
        outcome.summary.push(fit_line("weighted pointwise", &w_fit));
        report.weighted_fit = Some(w_fit);
        series.push(Series::new("weighted", report.weighted_errors.clone()));
    }
    for (h, e) in &report.l1_errors {
        outcome.summary.push(format!("  h = {h:<10} L1 = {e:.4e}"));
    }
    order_plot(dir, "order.svg", series, &format!("{} convergence", problem.model.name))?;
    dir.write_report("report.toml", &report)?;
    outcome.diagnostics = report;
    Ok(outcome)
}

/// Sample points for the mutation residual: a tensor grid over the active box.
fn residual_samples(cfg: &ExperimentConfig, problem: &Problem) -> Vec<Vec<f64>> {
    if problem.model.mutation.is_none() || cfg.analysis.samples < 2 {
        return Vec::new();
    }
    let bbox = active_box(&problem.model, cfg.run.t_final);
    let n = cfg.analysis.samples;
    let d = bbox.dim();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                let j = flat % n;
                flat /= n;
                x[k] = bbox.lo[k] + (bbox.hi[k] - bbox.lo[k]) * j as f64 / (n - 1) as f64;
            }
            x
        })
        .collect()
}

fn write_clusters(dir: &ArtifactDir, m: &MemberSummary, dim: usize) -> CliResult<()> {
    let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    for h in [
        "mass",
        "particles",
        "predicted_mass",
        "advection_residual",
        "growth_residual",
    ] {
        header.push(h.into());
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = m.clusters.iter().enumerate().map(|(c, cl)| {
        let mut row = cl.position.clone();
        row.push(cl.mass);
        row.push(cl.particles as f64);
        row.push(m.predicted[c].unwrap_or(f64::NAN));
        let r = m.residuals.as_ref().map(|r| &r.clusters[c]);
        row.push(r.map_or(f64::NAN, |r| r.advection));
        row.push(r.map_or(f64::NAN, |r| r.growth));
        row
    });
    dir.write_table("clusters.csv", &header, rows)?;
    Ok(())
}

/// Oracle at the horizon, with `dx` and `dt` halved until the mass settles.
fn refined_oracle(cfg: &ExperimentConfig, problem: &Problem) -> CliResult<(ReferenceGrid, Vec<(f64, f64, f64)>)> {
    let o = &cfg.oracle;
    let (mut dx, mut dt) = (o.dx, o.dt);
    let solve = |dx: f64, dt: f64| -> CliResult<ReferenceGrid> {
        Ok(solve_reference(
            &problem.model,
            &problem.v0,
            cfg.run.t_final,
            &oracle_config(cfg, dx, dt, o.padding.unwrap_or(0)),
        )?)
    };
    let mut oracle = solve(dx, dt)?;
    let mut table = vec![(dx, dt, oracle.mass())];
    for _ in 0..o.max_refinements {
        dx /= 2.0;
        dt /= 2.0;
        let finer = solve(dx, dt)?;
        let change = (finer.mass() - oracle.mass()).abs();
        table.push((dx, dt, finer.mass()));
        oracle = finer;
        if change < o.refine_tol {
            break;
        }
    }
    Ok((oracle, table))
}

fn asymptote(cfg: &ExperimentConfig, dir: &ArtifactDir) -> CliResult<Outcome> {
    let problem = build_problem(cfg)?;
    let hs = cfg.sweep()?;
    dir.write_manifest(cfg, Mode::Asymptote.name())?;
    let a = &cfg.analysis;
    let samples = residual_samples(cfg, &problem);
    let t_final = cfg.run.t_final;
    let d = problem.model.dim;

    let oracle = if cfg.oracle.enabled {
        require_oracle_model(&problem)?;
        let (oracle, table) = refined_oracle(cfg, &problem)?;
        write_oracle(dir, &oracle)?;
        dir.write_table(
            "oracle_refinement.csv",
            &["dx", "dt", "mass"],
            table.iter().map(|&(x, t, m)| vec![x, t, m]),
        )?;
        Some((oracle, table))
    } else {
        None
    };
    let tests = oracle.as_ref().map(|(o, _)| default_test_family(o.lo, o.hi()));

    let members = run_members(
        cfg,
        dir,
        &problem,
        Mode::Asymptote.name(),
        Some(a.window),
        |mdir, traj, m| {
            let pos_tol = a.pos_tol.unwrap_or(10.0 * m.h);
            let det = detect_limit_clusters(traj, a.window, pos_tol, a.mass_tol)?;
            m.stationary = Some(det.stationary);
            m.predicted = det
                .clusters
                .iter()
                .map(|c| predict_limit_mass(&problem.model, &c.position, t_final).ok())
                .collect();
            m.residuals = Some(check_dirac_necessary_conditions(
                &problem.model,
                &det.clusters,
                &samples,
                t_final,
            )?);
            m.clusters = det.clusters;
            if let (Some((o, _)), Some(tests)) = (&oracle, &tests) {
                m.weak_gap = Some(weak_measure_gap(traj.final_state(), o, tests)?);
            }
            write_clusters(mdir, m, d)?;
            Ok(())
        },
    )?;

    let (finest, finest_traj) = members.last().expect("non-empty sweep");
    let mut report = DiagnosticsReport {
        model: problem.model.name.clone(),
        mass_series: snapshot_masses(finest_traj),
        clusters: finest.clusters.clone(),
        stationary: finest.stationary,
        residuals: finest.residuals.clone(),
        ..DiagnosticsReport::default()
    };
    if finest.clusters.len() == 1 {
        report.predicted_mass = finest.predicted[0];
    } else {
        report.notes.push(format!(
            "{} clusters: predicted masses are per cluster in clusters.csv",
            finest.clusters.len()
        ));
    }
    if finest.stationary == Some(false) {
        report.notes.push(format!(
            "not stationary over the last {} time units: no clusters reported",
            a.window
        ));
    }
    let mut outcome = Outcome::new(dir.path());
    outcome.summary.push(format!(
        "asymptote {} to t = {t_final} over {} h value(s)",
        problem.model.name,
        hs.len()
    ));
    if let Some((o, table)) = &oracle {
        report.oracle_mass = Some(o.mass());
        report.weak_gaps = members.iter().map(|(m, _)| (m.h, m.weak_gap.expect("set"))).collect();
        let verdict = ap_verdict(&report.weak_gaps, a.gap_floor);
        report.ap_verdict = Some(verdict);
        outcome.oracle_refinement = table.clone();
        outcome.summary.push(format!(
            "oracle limit mass {:.6} (dx = {}, {} solve(s))",
            o.mass(),
            o.dx,
            table.len()
        ));
        outcome.summary.push(format!(
            "AP verdict: {}",
            match verdict {
                ApVerdict::Preserving => "preserving",
                ApVerdict::NonPreserving => "non-preserving",
                ApVerdict::Inconclusive => "inconclusive",
            }
        ));
        if report.weak_gaps.len() >= 2 && report.weak_gaps.iter().all(|g| g.1 > 0.0) {
            order_plot(
                dir,
                "weak_gap.svg",
                vec![Series::new("weak gap", report.weak_gaps.clone())],
                "weak measure gap",
            )?;
        }
    }
    let mut header: Vec<String> = vec![
        "h".into(),
        "particles".into(),
        "final_mass".into(),
        "stationary".into(),
        "clusters".into(),
    ];
    header.extend((1..=d).map(|k| format!("heaviest_x{k}")));
    header.extend(["heaviest_mass", "predicted_mass", "weak_gap"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.write_table(
        "members.csv",
        &header,
        members.iter().map(|(m, _)| {
            let heavy = m
                .clusters
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.mass.total_cmp(&b.1.mass));
            let mut row = vec![
                m.h,
                m.particles as f64,
                m.final_mass,
                if m.stationary == Some(true) { 1.0 } else { 0.0 },
                m.clusters.len() as f64,
            ];
            match heavy {
                Some((c, cl)) => {
                    row.extend(&cl.position);
                    row.push(cl.mass);
                    row.push(m.predicted[c].unwrap_or(f64::NAN));
                }
                None => row.extend(vec![f64::NAN; d + 2]),
            }
            row.push(m.weak_gap.unwrap_or(f64::NAN));
            row
        }),
    )?;
    for (m, _) in &members {
        let clusters: Vec<String> = m
            .clusters
            .iter()
            .zip(&m.predicted)
            .map(|(c, p)| {
                let pos: Vec<String> = c.position.iter().map(|v| format!("{v:.6}")).collect();
                match p {
                    Some(p) => format!("[{}] mass {:.6} (predicted {:.6})", pos.join(", "), c.mass, p),
                    None => format!("[{}] mass {:.6}", pos.join(", "), c.mass),
                }
            })
            .collect();
        outcome.summary.push(format!(
            "  h = {:<10} mass {:.6} stationary {} clusters: {}",
            m.h,
            m.final_mass,
            m.stationary.unwrap_or(false),
            if clusters.is_empty() {
                "none".into()
            } else {
                clusters.join("; ")
            }
        ));
    }
    dir.write_report("report.toml", &report)?;
    outcome.members = members.into_iter().map(|(m, _)| m).collect();
    outcome.diagnostics = report;
    Ok(outcome)
}

/// The four scenarios of the advection-selection comparison:
/// `(name, r1, initial profile, support)` with `r0 = 6`.
pub const FIG2_SCENARIOS: [(&str, f64, &str, f64, f64); 4] = [
    ("a", 4.0, "one-minus-x", 0.0, 1.0),
    ("b", 4.0, "x-one-minus-x", 0.0, 1.0),
    ("c", 4.0, "x-squared", 0.0, 1.0),
    ("d", 0.5, "const6", 0.05, 1.0),
];

/// Defaults of `reproduce fig2` without a config: `N = 5000`, `T = 40`.
pub fn fig2_defaults() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.discretization.h = Some(1.0 / 5000.0);
    cfg.run.t_final = 40.0;
    cfg
}

/// The config of one scenario built on `base`.
pub fn fig2_scenario(base: &ExperimentConfig, r1: f64, profile: &str, lo: f64, hi: f64) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.model = Default::default();
    cfg.model.name = "advsel1d".into();
    cfg.model.params.insert("r0".into(), 6.0);
    cfg.model.params.insert("r1".into(), r1);
    cfg.initial.name = profile.into();
    cfg.initial.params.clear();
    cfg.initial.lo = vec![lo];
    cfg.initial.hi = vec![hi];
    cfg
}

fn reproduce_fig2(base: &ExperimentConfig, dir: &ArtifactDir) -> CliResult<Outcome> {
    let h = base.single_h()?;
    let base = base.member(h);
    dir.write_manifest(&base, Mode::ReproduceFig2.name())?;
    let runs: Vec<(String, Outcome)> = FIG2_SCENARIOS
        .par_iter()
        .map(|&(name, r1, profile, lo, hi)| {
            let cfg = fig2_scenario(&base, r1, profile, lo, hi);
            let sdir = dir.sub(&format!("scenario_{name}"))?;
            Ok((name.to_string(), asymptote(&cfg, &sdir)?))
        })
        .collect::<CliResult<_>>()?;
    let mut outcome = Outcome::new(dir.path());
    outcome
        .summary
        .push(format!("reproduce fig2: h = {h}, t = {}", base.run.t_final));
    dir.write_labeled_table(
        "summary.csv",
        &[
            "scenario",
            "final_mass",
            "clusters",
            "cluster_x",
            "cluster_mass",
            "predicted_mass",
        ],
        runs.iter().map(|(name, o)| {
            let m = &o.members[0];
            let (x, mass) = m
                .clusters
                .iter()
                .max_by(|a, b| a.mass.total_cmp(&b.mass))
                .map_or((f64::NAN, f64::NAN), |c| (c.position[0], c.mass));
            let predicted = o.diagnostics.predicted_mass.unwrap_or(f64::NAN);
            (
                name.clone(),
                vec![m.final_mass, m.clusters.len() as f64, x, mass, predicted],
            )
        }),
    )?;
    for (name, o) in &runs {
        let m = &o.members[0];
        let line = match (m.clusters.as_slice(), o.diagnostics.predicted_mass) {
            ([c], Some(p)) => format!(
                "  ({name}) one cluster at x = {:.6} with mass {:.6}, predicted {:.6}",
                c.position[0], c.mass, p
            ),
            (cs, _) => format!("  ({name}) {} cluster(s), final mass {:.6}", cs.len(), m.final_mass),
        };
        outcome.summary.push(line);
    }
    outcome.scenarios = runs;
    Ok(outcome)
}
