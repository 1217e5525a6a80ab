use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;
use subplanck_core::dynamics::{
    coherent_wavefunction, convergence_ratio, evolve, fock_projection, variance_matched_dim, EvolutionConfig, Model, WaveFunction,
    XGrid,
};
use subplanck_core::fidelity::{
    coherent_fidelity, compass_fidelity, fidelity_curve, fidelity_quadrature, number_fidelity, random_avg_fidelity, random_slope_avg, scale_report,
    slope_at_zero, squeezed_fidelity, FidelityForm, ScaleReport, SlopeRoute, SqueezeParam,
};
use subplanck_core::fock::{make_random, quad_moments, QuantumState};
use subplanck_core::mixedstate::{entanglement_fidelity, mixed_scale_report};
use subplanck_core::phasespace::{auto_grid, char_grid, husimi_grid, wigner_grid, PhaseGrid, DEFAULT_GRID_RES};
use subplanck_core::protocol::{average_channel, l1_distance, mc_average};
use subplanck_core::ComplexAmplitude;

use crate::output::{grid_plot_script, write_json, RunManifest, Table};
use crate::state::{Built, StateKind, StateSpec, CHAOTIC_MAX_DIM};
use crate::{Command, GridFunction, Invalid, Opts};

/// Runs `cmd`, writes its outputs under `--out` and the manifest last.
pub fn run(cmd: Command, opts: Opts) -> anyhow::Result<()> {
    let started = chrono::Utc::now();
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let mut resolved = opts.clone();
    let outputs = match cmd {
        Command::FidelityCurve => fidelity_curve_cmd(&mut resolved, &out)?,
        Command::Scales => scales_cmd(&mut resolved, &out)?,
        Command::Grid => grid_cmd(&mut resolved, &out)?,
        Command::TeleportMc => teleport_mc_cmd(&mut resolved, &out)?,
        Command::RandomAverage => random_average_cmd(&mut resolved, &out)?,
        Command::Evolve => evolve_cmd(&mut resolved, &out)?,
    };
    let manifest_path = opts.manifest.clone().unwrap_or_else(|| out.join("manifest.json"));
    resolved.config = None;
    write_json(&manifest_path, &RunManifest::new(cmd.name(), resolved, started, outputs))?;
    Ok(())
}

fn required_state(opts: &Opts) -> Result<StateSpec, Invalid> {
    opts.state.map(|s| s.with_trunc(opts.trunc)).ok_or_else(|| Invalid("--state is required".into()))
}

/// Fills unset t-grid options with defaults and returns the grid.
fn t_grid(opts: &mut Opts, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, Invalid> {
    let t_min = *opts.t_min.get_or_insert(lo);
    let t_max = *opts.t_max.get_or_insert(hi);
    let n = *opts.t_steps.get_or_insert(steps);
    if n == 0 || !(t_min >= 0.0) || !t_max.is_finite() {
        return Err(Invalid("need t_steps ≥ 1 and 0 ≤ t_min".into()));
    }
    if n == 1 {
        return Ok(vec![t_min]);
    }
    if !(t_min < t_max) {
        return Err(Invalid(format!("need t_min < t_max, got {t_min} and {t_max}")));
    }
    Ok((0..n).map(|k| t_min + (t_max - t_min) * k as f64 / (n - 1) as f64).collect())
}

fn closed_form(spec: &StateSpec) -> Option<Box<dyn Fn(f64) -> f64>> {
    match spec.kind {
        StateKind::Coherent { .. } => Some(Box::new(coherent_fidelity)),
        StateKind::Squeezed { u } => Some(Box::new(move |t| squeezed_fidelity(u, t))),
        StateKind::Number { n } => Some(Box::new(move |t| number_fidelity(n, t))),
        StateKind::Compass { a } => Some(Box::new(move |t| compass_fidelity(a, t))),
        StateKind::Thermal { nbar } => Some(Box::new(move |t| 1.0 / (1.0 + (2.0 * nbar + 1.0) * t / 2.0))),
        StateKind::Random { .. } | StateKind::Chaotic { .. } => None,
    }
}

fn fidelity_curve_cmd(opts: &mut Opts, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let spec = required_state(opts)?;
    let form = FidelityForm::from_index(*opts.form.get_or_insert(4))?;
    let ts = t_grid(opts, 0.0, 2.0, 21)?;
    let label = spec.to_string();
    let curve = match spec.build()? {
        Built::Pure(s) => fidelity_curve(&s, &ts, form, label.clone())?,
        Built::Mixed(rho) => {
            if form != FidelityForm::Four {
                return Err(Invalid("mixed states support form 4 only".into()).into());
            }
            let points = ts.iter().map(|&t| Ok((t, entanglement_fidelity(&rho, t)?))).collect::<anyhow::Result<Vec<_>>>()?;
            subplanck_core::fidelity::FidelityCurve { points, state: label.clone(), method: subplanck_core::fidelity::CurveMethod::Quadrature(form) }
        }
    };
    curve.validate()?;
    let closed = closed_form(&spec);
    let cols: &[&str] = if closed.is_some() { &["t", "F_closed", "F_quadrature", "abs_diff"] } else { &["t", "F_quadrature"] };
    let mut table = Table::new(cols)
        .header("command", "fidelity-curve")
        .header("state", &label)
        .header("form", form.index())
        .header("version", env!("CARGO_PKG_VERSION"));
    for &(t, f) in &curve.points {
        match &closed {
            Some(c) => {
                let fc = c(t);
                table.row(&[t, fc, f, (fc - f).abs()]);
            }
            None => table.row(&[t, f]),
        }
    }
    let path = out.join("fidelity_curve.csv");
    table.write(&path)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct ScalesOutput {
    state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ScaleReport<f64>>,
    /// F(t_c) itself; roughly one half for many states but not always
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity_at_t_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<Ensemble>,
}

#[derive(Serialize)]
struct Ensemble {
    samples: usize,
    first_seed: u64,
    mean_ell_c: f64,
    std_ell_c: f64,
    mean_big_l_c: f64,
    reports: Vec<ScaleReport<f64>>,
}

fn scales_cmd(opts: &mut Opts, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let spec = required_state(opts)?;
    let mut result = ScalesOutput { state: spec.to_string(), report: None, fidelity_at_t_c: None, ensemble: None };
    match (spec.kind, opts.samples) {
        (StateKind::Random { dim, seed }, Some(k)) if k > 1 => {
            let reports = (0..k as u64).map(|i| scale_report(&make_random(dim, seed + i)?)).collect::<Result<Vec<_>, _>>()?;
            let ells: Vec<f64> = reports.iter().map(|r| r.ell_c).collect();
            let mean = ells.iter().sum::<f64>() / k as f64;
            let var = ells.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            result.ensemble = Some(Ensemble {
                samples: k,
                first_seed: seed,
                mean_ell_c: mean,
                std_ell_c: var.sqrt(),
                mean_big_l_c: reports.iter().map(|r| r.big_l_c).sum::<f64>() / k as f64,
                reports,
            });
        }
        _ => {
            let (report, f) = match spec.build()? {
                Built::Pure(s) => {
                    let r = scale_report(&s)?;
                    let f = fidelity_quadrature(&s, SqueezeParam::from_t(r.t_c)?, FidelityForm::Four)?;
                    (r, f)
                }
                Built::Mixed(rho) => {
                    let r = mixed_scale_report(&rho);
                    let f = entanglement_fidelity(&rho, r.t_c)?;
                    (r, f)
                }
            };
            result.report = Some(report);
            result.fidelity_at_t_c = Some(f);
        }
    }
    let path = out.join("scales.json");
    write_json(&path, &result)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(vec![path])
}

fn sampled_grid<S: QuantumState<f64> + ?Sized>(state: &S, func: GridFunction, extent: Option<f64>, res: usize) -> anyhow::Result<PhaseGrid<f64>> {
    let auto = auto_grid(state, 0.1)?;
    let (center, half) = match func {
        GridFunction::Charsq => (ComplexAmplitude::zero(), extent.unwrap_or(auto.half_width.0)),
        _ => (auto.center, extent.unwrap_or(auto.half_width.0)),
    };
    if !(half > 0.0) || res < 2 {
        return Err(Invalid("grid extent must be positive and resolution at least 2".into()).into());
    }
    let geometry = PhaseGrid::new(center, (half, half), (res, res))?;
    Ok(match func {
        GridFunction::Wigner => {
            let mut g = wigner_grid(state, &geometry);
            g.values.iter_mut().for_each(|v| *v *= PI / 2.0);
            g
        }
        GridFunction::Husimi => {
            let mut g = husimi_grid(state, &geometry);
            g.values.iter_mut().for_each(|v| *v *= PI);
            g
        }
        GridFunction::Charsq => {
            let c = char_grid(state, &geometry);
            PhaseGrid { center, half_width: (half, half), resolution: (res, res), values: c.values.iter().map(|z| z.norm_sqr()).collect() }
        }
    })
}

fn write_grid(grid: &PhaseGrid<f64>, path: &Path, headers: &[(&str, String)]) -> anyhow::Result<()> {
    let mut table = Table::new(&["nu1", "nu2", "value"])
        .header("center", format!("{},{}", grid.center.q1, grid.center.q2))
        .header("extent", format!("{},{}", grid.half_width.0, grid.half_width.1))
        .header("resolution", format!("{},{}", grid.resolution.0, grid.resolution.1));
    for (k, v) in headers {
        table = table.header(k, v);
    }
    let (n1, n2) = grid.resolution;
    for i in 0..n1 {
        for j in 0..n2 {
            let p = grid.point(i, j);
            table.row(&[p.q1, p.q2, *grid.get(i, j)]);
        }
    }
    table.write(path)
}

fn grid_cmd(opts: &mut Opts, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let spec = required_state(opts)?;
    let func = *opts.function.get_or_insert(GridFunction::Wigner);
    let res = *opts.grid_res.get_or_insert(DEFAULT_GRID_RES);
    let grid = match spec.build()? {
        Built::Pure(s) => sampled_grid(&s, func, opts.grid_extent, res)?,
        Built::Mixed(rho) => sampled_grid(&rho, func, opts.grid_extent, res)?,
    };
    let (name, convention) = match func {
        GridFunction::Wigner => ("wigner", "(pi/2)W"),
        GridFunction::Husimi => ("husimi", "pi*Q"),
        GridFunction::Charsq => ("charsq", "|Phi|^2"),
    };
    let csv = out.join(format!("grid_{name}.csv"));
    write_grid(
        &grid,
        &csv,
        &[("command", "grid".into()), ("state", spec.to_string()), ("function", name.into()), ("convention", convention.into())],
    )?;
    let script = out.join(format!("grid_{name}.py"));
    std::fs::write(&script, grid_plot_script(&csv, convention))?;
    Ok(vec![csv, script])
}

#[derive(Serialize)]
struct McSummary {
    state: String,
    t: f64,
    samples: usize,
    seed: u64,
    mean_fidelity: f64,
    fidelity_std_err: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    average_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation_in_std_err: Option<f64>,
    l1_distance: f64,
}

fn teleport_mc_cmd(opts: &mut Opts, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let spec = required_state(opts)?;
    let t = *opts.t.get_or_insert(1.0);
    let samples = *opts.samples.get_or_insert(10_000);
    let seed = *opts.seed.get_or_insert(42);
    SqueezeParam::from_t(t)?;
    if samples == 0 {
        return Err(Invalid("--samples must be positive".into()).into());
    }
    let built = spec.build()?;
    let state: &dyn QuantumState<f64> = match &built {
        Built::Pure(s) => s,
        Built::Mixed(r) => r,
    };
    let report = mc_average(state, t, samples, seed, None)?;
    let analytic = wigner_grid(&average_channel(state, t)?, &report.average);
    let l1 = l1_distance(&report.average, &analytic);
    let average_fidelity = match &built {
        Built::Pure(s) => Some(analytic_fidelity(&spec, s, t)?),
        Built::Mixed(_) => None,
    };

    let mut traj = Table::new(&["index", "xi1", "xi2", "density", "fidelity"])
        .header("command", "teleport-mc")
        .header("state", spec)
        .header("t", t)
        .header("seed", seed);
    for tr in &report.trajectories {
        traj.indexed_row(tr.index, &[tr.xi.q1, tr.xi.q2, tr.density, tr.fidelity]);
    }
    let traj_path = out.join("trajectories.csv");
    traj.write(&traj_path)?;

    let mut avg = report.average.clone();
    avg.values.iter_mut().for_each(|v| *v *= PI / 2.0);
    let avg_path = out.join("mc_average_wigner.csv");
    write_grid(&avg, &avg_path, &[("command", "teleport-mc".into()), ("state", spec.to_string()), ("convention", "(pi/2)W".into())])?;

    let summary = McSummary {
        state: spec.to_string(),
        t,
        samples,
        seed,
        mean_fidelity: report.mean_fidelity,
        fidelity_std_err: report.fidelity_std_err,
        average_fidelity,
        deviation_in_std_err: average_fidelity.map(|f| (report.mean_fidelity - f).abs() / report.fidelity_std_err),
        l1_distance: l1,
    };
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(vec![traj_path, avg_path, summary_path])
}

fn analytic_fidelity(spec: &StateSpec, s: &subplanck_core::PureState<f64>, t: f64) -> anyhow::Result<f64> {
    Ok(match closed_form(spec) {
        Some(f) => f(t),
        None => subplanck_core::fidelity::fidelity_quadrature(s, SqueezeParam::from_t(t)?, FidelityForm::Four)?,
    })
}

fn random_average_cmd(opts: &mut Opts, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let n = *opts.dim.get_or_insert(20);
    let samples = *opts.samples.get_or_insert(500);
    let seed = *opts.seed.get_or_insert(0);
    let ts = t_grid(opts, 0.0, 2.0, 21)?;
    if n == 0 {
        return Err(Invalid("--dim must be positive".into()).into());
    }
    if samples == 1 {
        return Err(Invalid("--samples must be 0 (formula only) or at least 2".into()).into());
    }
    let cols: &[&str] = if samples == 0 { &["t", "F_formula"] } else { &["t", "F_formula", "F_sample_mean", "std_err", "deviation_in_std_err"] };
    let mut table = Table::new(cols)
        .header("command", "random-average")
        .header("dim", n)
        .header("samples", samples)
        .header("seed", seed)
        .header("slope_formula", random_slope_avg::<f64>(n));
    let mut per_state = Vec::with_capacity(samples);
    let mut slopes = Vec::with_capacity(samples);
    for k in 0..samples as u64 {
        let s = make_random(n, seed.wrapping_add(k))?;
        slopes.push(slope_at_zero(&s, SlopeRoute::Variance)?);
        per_state.push(fidelity_curve(&s, &ts, FidelityForm::Four, "")?.points);
    }
    if samples > 0 {
        let (m, se) = mean_se(&slopes);
        table = table.header("slope_sample_mean", m).header("slope_std_err", se);
    }
    for (i, &t) in ts.iter().enumerate() {
        let formula = random_avg_fidelity(n, t);
        if samples == 0 {
            table.row(&[t, formula]);
        } else {
            let fs: Vec<f64> = per_state.iter().map(|c| c[i].1).collect();
            let (m, se) = mean_se(&fs);
            let dev = if se > 0.0 { (m - formula).abs() / se } else { 0.0 };
            table.row(&[t, formula, m, se, dev]);
        }
    }
    let path = out.join("random_average.csv");
    table.write(&path)?;
    Ok(vec![path])
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Serialize)]
struct EvolveReport {
    x0: f64,
    p0: f64,
    dt: f64,
    t_final: f64,
    steps: usize,
    norm_drift: f64,
    max_edge_mass: f64,
    fock_dim: usize,
    leakage: f64,
    var_sum: f64,
    matched_dim: usize,
    max_dev_matched: f64,
    max_dev_n100: f64,
    scales: ScaleReport<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence_ratio: Option<f64>,
}

fn wavefunction_table(psi: &WaveFunction<f64>, command: &str) -> Table {
    let mut t = Table::new(&["x", "re", "im"]).header("command", command);
    for (x, z) in psi.grid.points().zip(&psi.samples) {
        t.row(&[x, z.re, z.im]);
    }
    t
}

fn evolve_cmd(opts: &mut Opts, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let (sx, sp, st) = match opts.state.map(|s| s.kind) {
        Some(StateKind::Chaotic { x0, p0, t_final }) => (x0, p0, t_final),
        Some(_) => return Err(Invalid("evolve takes a chaotic state (or --x0/--p0/--t-final)".into()).into()),
        None => (-8.0, 4.0, 5.0),
    };
    let x0 = *opts.x0.get_or_insert(sx);
    let p0 = *opts.p0.get_or_insert(sp);
    let t_final = *opts.t_final.get_or_insert(st);
    let dt = *opts.dt.get_or_insert(2.5e-4);
    let stride = *opts.snapshot_stride.get_or_insert(4000);
    let max_dim = *opts.trunc.get_or_insert(CHAOTIC_MAX_DIM);
    let want_ratio = *opts.convergence.get_or_insert(false);
    let ts = t_grid(opts, 0.2, 2.0, 19)?;

    let cfg = EvolutionConfig::new(dt, t_final, XGrid::default(), Model::DrivenDoubleWell)?;
    let psi0 = coherent_wavefunction(x0, p0, cfg.grid)?;
    let run = evolve(&psi0, &cfg, stride)?;
    let mut files = Vec::new();

    let final_path = out.join("final_wavefunction.csv");
    wavefunction_table(&run.state, "evolve").header("time", t_final).write(&final_path)?;
    files.push(final_path);
    if !run.snapshots.is_empty() {
        let mut snap = Table::new(&["time", "x", "re", "im"]).header("command", "evolve").header("stride", stride);
        for (tau, psi) in &run.snapshots {
            for (x, z) in psi.grid.points().zip(&psi.samples) {
                snap.row(&[*tau, x, z.re, z.im]);
            }
        }
        let p = out.join("snapshots.csv");
        snap.write(&p)?;
        files.push(p);
    }

    let proj = fock_projection(&run.state, max_dim)?;
    let mut fock = Table::new(&["n", "re", "im"]).header("command", "evolve").header("leakage", proj.leakage);
    for (n, c) in proj.state.coeffs().iter().enumerate() {
        fock.indexed_row(n, &[c.re, c.im]);
    }
    let fock_path = out.join("fock_state.csv");
    fock.write(&fock_path)?;
    files.push(fock_path);

    let var_sum = quad_moments(&proj.state).var_sum();
    let matched = variance_matched_dim(var_sum);
    let curve = fidelity_curve(&proj.state, &ts, FidelityForm::Four, "chaotic")?;
    let mut table = Table::new(&["t", "F_quadrature", "F_random_matched", "F_random_100"])
        .header("command", "evolve")
        .header("matched_dim", matched);
    let (mut dev, mut dev100) = (0.0f64, 0.0f64);
    for &(t, f) in &curve.points {
        let (a, b) = (random_avg_fidelity(matched, t), random_avg_fidelity(100, t));
        if t >= 0.2 {
            dev = dev.max((f - a).abs());
            dev100 = dev100.max((f - b).abs());
        }
        table.row(&[t, f, a, b]);
    }
    let curve_path = out.join("fidelity_curve.csv");
    table.write(&curve_path)?;
    files.push(curve_path);

    let report = EvolveReport {
        x0,
        p0,
        dt,
        t_final,
        steps: run.steps,
        norm_drift: run.norm_drift,
        max_edge_mass: run.max_edge_mass,
        fock_dim: proj.state.dim(),
        leakage: proj.leakage,
        var_sum,
        matched_dim: matched,
        max_dev_matched: dev,
        max_dev_n100: dev100,
        scales: scale_report(&proj.state)?,
        convergence_ratio: if want_ratio { Some(convergence_ratio(&psi0, &cfg)?) } else { None },
    };
    let report_path = out.join("evolve_report.json");
    write_json(&report_path, &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    files.push(report_path);
    Ok(files)
}
