use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use clab::besov::{besov_norm, BesovIndex, DyadicPartition};
use clab::calderon::{exponent_sweep, geometric_lambdas, SplitConfig};
use clab::heat::heat_block_decay;
use clab::lab::experiment::{ContinuationSpec, ExperimentConfig, CONFIG_VERSION};
use clab::lab::monitors::EndTimeSource;
use clab::lab::{
    critical_norm_series, dyadic_scales, rescale_trajectory, run_experiment, vanishing_test, DataRecipe,
    DiagnosticSet, GridSpec, RunOutcome, SolverChoice,
};
use clab::mild::archive::{read_archive, write_archive, MANIFEST_NAME};
use clab::mild::{SolverConfig, TimeSchedule};
use clab::spectral::random::random_velocity;
use clab::spectral::{clf1, SpectralField};
use clab::{Error, Grid, Result, Trajectory};

use crate::{status, Format, Global};

/// What a command prints and the status it exits with.
pub struct Output {
    pub json: Value,
    /// CSV rendering; `None` falls back to `key,value` rows of the JSON scalars.
    pub csv: Option<String>,
    pub status: u8,
}

impl Output {
    fn new(json: Value) -> Self {
        Self { json, csv: None, status: status::OK }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    fn gate(mut self, passed: bool) -> Self {
        if !passed && self.status == status::OK {
            self.status = status::GATE;
        }
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&self.json).expect("JSON value")),
            Format::Csv => self.csv.clone().unwrap_or_else(|| key_value_csv(&self.json)),
        }
    }
}

fn key_value_csv(v: &Value) -> String {
    let mut out = String::from("key,value\n");
    if let Value::Object(map) = v {
        for (k, x) in map {
            match x {
                Value::Number(_) | Value::Bool(_) | Value::String(_) | Value::Null => {
                    out.push_str(&format!("{k},{}\n", scalar(x)))
                }
                _ => {}
            }
        }
    }
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn grid(g: &Global) -> Result<Grid> {
    Grid::new(g.dim, g.n, g.box_length)
}

fn no_config(g: &Global, name: &str) -> Result<()> {
    match g.config {
        Some(_) => Err(Error::InvalidArgument(format!("--config is not used by {name}"))),
        None => Ok(()),
    }
}

fn out_dir(g: &Global) -> Result<&Path> {
    g.out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("this command needs --out".into()))
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("not a number: {s:?}")))
        })
        .collect()
}

pub fn partition_check(g: &Global) -> Result<Output> {
    no_config(g, "partition-check")?;
    let grid = grid(g)?;
    let p = DyadicPartition::for_grid(&grid)?;
    let deviation = p.identity_deviation();
    let leak = p.support_leak();
    let passed = deviation < 1e-10 && leak <= 1e-14;
    Ok(Output::new(json!({
        "dim": grid.dim(),
        "n": grid.n(),
        "box_length": grid.box_length(),
        "j_min": p.j_min(),
        "j_max": p.j_max(),
        "identity_deviation": deviation,
        "support_leak": leak,
        "passed": passed,
    }))
    .gate(passed))
}

#[derive(Args, Debug)]
pub struct NormArgs {
    /// CLF1 field.
    #[arg(long = "in")]
    input: PathBuf,
    /// Regularity; defaults to the critical `-1 + d/p`.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
}

pub fn norm(g: &Global, a: &NormArgs) -> Result<Output> {
    no_config(g, "norm")?;
    let u = clf1::read(&a.input)?;
    let index = match a.s {
        Some(s) => BesovIndex::new(s, a.p, a.q)?,
        None => BesovIndex::critical(u.grid().dim(), a.p, a.q)?,
    };
    let report = besov_norm(&u, &index, &DyadicPartition::for_grid(u.grid())?)?;
    let mut csv = String::from("j,contribution\n");
    for b in &report.blocks {
        csv.push_str(&format!("{},{:e}\n", b.j, b.contrib));
    }
    Ok(Output::new(serde_json::to_value(&report)?).with_csv(csv))
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    lambda: f64,
}

pub fn split(g: &Global, a: &SplitArgs) -> Result<Output> {
    no_config(g, "split")?;
    let u = clf1::read(&a.input)?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let config = SplitConfig::new(u.grid().dim(), a.p, a.q, a.lambda)?;
    let r = clab::calderon::split(&u, &config, &DyadicPartition::for_grid(u.grid())?)?;
    fs::create_dir_all(&out)?;
    clf1::write_atomic(&out.join("U0.clf1"), &clf1::encode(&r.large))?;
    clf1::write_atomic(&out.join("V0.clf1"), &clf1::encode(&r.small))?;
    let summary = serde_json::to_value(&r.summary)?;
    clf1::write_atomic(&out.join("split.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(Output::new(summary))
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 8.0)]
    q: f64,
    #[arg(long, default_value_t = 1e-2)]
    lo: f64,
    #[arg(long, default_value_t = 1e2)]
    hi: f64,
    #[arg(long, default_value_t = 4)]
    per_decade: usize,
    /// Exit 4 unless both fitted slopes are within this distance of the expected ones.
    #[arg(long)]
    gate: Option<f64>,
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<Output> {
    no_config(g, "sweep")?;
    let u = clf1::read(&a.input)?;
    let config = SplitConfig::new(u.grid().dim(), a.p, a.q, a.lo)?;
    let lambdas = geometric_lambdas(a.lo, a.hi, a.per_decade);
    let r = exponent_sweep(&u, &config, &lambdas, &DyadicPartition::for_grid(u.grid())?)?;
    let mut csv = String::from("lambda,large_l2,small_besov,reassembly_error\n");
    for p in &r.points {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            p.lambda, p.large_l2, p.small_besov, p.reassembly_error
        ));
    }
    let passed = match a.gate {
        None => true,
        Some(tol) => {
            let close = |got: Option<f64>, want: f64| got.is_some_and(|x| (x - want).abs() <= tol);
            close(r.large_slope, r.expected_large_slope) && close(r.small_slope, r.expected_small_slope)
        }
    };
    Ok(Output::new(serde_json::to_value(&r)?).with_csv(csv).gate(passed))
}

#[derive(Args, Debug)]
pub struct HeatArgs {
    /// CLF1 field; a random velocity on the global grid when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 9)]
    samples: usize,
}

pub fn heat_verify(g: &Global, a: &HeatArgs) -> Result<Output> {
    no_config(g, "heat-verify")?;
    let u = match &a.input {
        Some(p) => clf1::read(p)?,
        None => random_velocity(&grid(g)?, a.seed, 1.0, f64::INFINITY, 1.0),
    };
    let rows = heat_block_decay(&u, &DyadicPartition::for_grid(u.grid())?, a.samples)?;
    let passed = rows.iter().all(|r| r.within());
    let mut csv = String::from("j,slope,lower,upper,within\n");
    for r in &rows {
        csv.push_str(&format!("{},{:e},{:e},{:e},{}\n", r.j, r.slope, r.lower, r.upper, r.within()));
    }
    Ok(Output::new(json!({ "blocks": rows, "passed": passed })).with_csv(csv).gate(passed))
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    TaylorGreen,
    Abc,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    SplitPerturbed,
    Mollified,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Named initial data (ignored with `--config`).
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// CLF1 initial data (ignored with `--config`).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Horizon; overrides the configured one.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    slope: f64,
    #[arg(long)]
    k_cut: Option<f64>,
    #[arg(long, value_enum, default_value_t = SolverKind::Direct)]
    solver: SolverKind,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 8.0)]
    q: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 1)]
    substeps: usize,
    /// Probes for the operator bounds; zero skips them.
    #[arg(long, default_value_t = 20)]
    probes: usize,
    /// Enable continuation with this first segment length.
    #[arg(long)]
    continuation_step: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    step_floor: f64,
}

fn config_from_flags(g: &Global, a: &SolveArgs) -> Result<ExperimentConfig> {
    let data = match (a.family, &a.input) {
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("give either --family or --in".into())),
        (Some(Family::TaylorGreen), None) => DataRecipe::TaylorGreen { amplitude: a.amplitude },
        (Some(Family::Abc), None) => DataRecipe::Abc {
            coeffs: [a.amplitude; 3],
            wavenumber: 1,
        },
        (Some(Family::Random), None) => DataRecipe::Random {
            seed: a.seed,
            slope: a.slope,
            k_cut: a.k_cut,
            amplitude: a.amplitude,
        },
        (None, Some(p)) => DataRecipe::File { path: p.clone() },
        (None, None) => return Err(Error::InvalidArgument("solve needs --family, --in or --config".into())),
    };
    let grid = match (&data, a.family) {
        (DataRecipe::File { .. }, _) => None,
        // the vortex is planar; --dim does not apply
        (_, Some(Family::TaylorGreen)) => Some(GridSpec { dim: 2, n: g.n, box_length: g.box_length }),
        _ => Some(GridSpec { dim: g.dim, n: g.n, box_length: g.box_length }),
    };
    let solver = match a.solver {
        SolverKind::Direct => SolverChoice::Direct,
        SolverKind::SplitPerturbed => SolverChoice::SplitPerturbed { p: a.p, q: a.q, lambda: a.lambda },
        SolverKind::Mollified => SolverChoice::Mollified { rho: a.rho },
    };
    let horizon = a.horizon.unwrap_or(1.0);
    Ok(ExperimentConfig {
        clab_config: CONFIG_VERSION,
        grid,
        data,
        horizon,
        solver,
        settings: SolverConfig {
            schedule: TimeSchedule { substeps: a.substeps, ..Default::default() },
            probes: a.probes,
            ..Default::default()
        },
        continuation: a.continuation_step.map(|s| ContinuationSpec {
            initial_step: s,
            step_floor: a.step_floor,
            max_segments: 64,
        }),
        diagnostics: DiagnosticSet::default(),
        output: None,
    })
}

/// Largest relative `L^2` deviation from `e^{-2 a^2 t} u0`, `a = 2 pi / L`.
fn taylor_green_error(traj: &Trajectory) -> f64 {
    let a = traj.grid().fundamental();
    let u0 = &traj.fields()[0];
    traj.times()
        .iter()
        .zip(traj.fields())
        .map(|(&t, u)| {
            let exact = u0.scaled((-2.0 * a * a * t).exp());
            let n = exact.l2_norm();
            if n == 0.0 {
                u.l2_norm()
            } else {
                u.sub(&exact).expect("same grid").l2_norm() / n
            }
        })
        .fold(0.0, f64::max)
}

pub fn solve(g: &Global, a: &SolveArgs) -> Result<Output> {
    let (mut config, base) = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (ExperimentConfig::from_json(&text)?, base)
        }
        None => (config_from_flags(g, a)?, PathBuf::from(".")),
    };
    if let Some(t) = a.horizon {
        config.horizon = t;
    }
    let out = match (&g.out, &config.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => return Err(Error::InvalidArgument("solve needs --out or an output directory in the config".into())),
    };
    let run = run_experiment(&config, &base, Some(&out))?;
    let r = &run.report;
    let mut summary = json!({
        "outcome": r.outcome,
        "horizon": config.horizon,
        "t_end": r.diagnostics.t_end,
        "samples": run.trajectory.len(),
        "picard_iterations": r.picard_iterations,
        "integral_residual": r.integral_residual,
        "divergence": r.divergence,
        "min_energy_slack": r.diagnostics.min_energy_slack,
        "gates_passed": r.gates_passed(),
        "out": out.display().to_string(),
    });
    let mut passed = r.gates_passed();
    if matches!(config.data, DataRecipe::TaylorGreen { .. }) {
        let err = taylor_green_error(&run.trajectory);
        summary["taylor_green_error"] = json!(err);
        passed &= err < 1e-8;
    }
    let mut output = Output::new(summary);
    if r.outcome == RunOutcome::BlowupSuspected {
        output.status = status::DIVERGENCE;
    }
    Ok(output.gate(passed))
}

#[derive(Args, Debug)]
pub struct RescaleArgs {
    /// CLF1 field or trajectory archive directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Power of two.
    #[arg(long)]
    lambda: f64,
    /// Translation, comma separated, one entry per axis.
    #[arg(long)]
    x0: Option<String>,
    /// Time shift (archives only).
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
}

pub fn rescale(g: &Global, a: &RescaleArgs) -> Result<Output> {
    no_config(g, "rescale")?;
    let out = out_dir(g)?;
    let is_archive = a.input.join(MANIFEST_NAME).exists();
    let (traj, manifest) = if is_archive {
        let (t, m) = read_archive(&a.input)?;
        (t, Some(m))
    } else {
        if a.t0 != 0.0 {
            return Err(Error::InvalidArgument("--t0 needs a trajectory archive".into()));
        }
        (Trajectory::new(vec![0.0], vec![clf1::read(&a.input)?])?, None)
    };
    let dim = traj.grid().dim();
    let x0 = match &a.x0 {
        Some(s) => parse_list(s)?,
        None => vec![0.0; dim],
    };
    let scaled = rescale_trajectory(&traj, a.lambda, &x0, a.t0)?;
    let before = critical_norm_series(&traj, a.p, a.q)?;
    let after = critical_norm_series(&scaled, a.p, a.q)?;
    let skipped = traj.len() - scaled.len();
    let worst = before[skipped..]
        .iter()
        .zip(&after)
        .map(|(b, f)| if *b == 0.0 { f.abs() } else { (f / b - 1.0).abs() })
        .fold(0.0, f64::max);
    fs::create_dir_all(out)?;
    let written = match manifest {
        Some(m) => {
            let history = m.iterate_history.clone();
            write_archive(
                out,
                &scaled,
                json!({ "rescaled_from": a.input.display().to_string(), "lambda": a.lambda, "x0": x0, "t0": a.t0, "source": m.config }),
                m.residuals,
                history,
            )?;
            out.to_path_buf()
        }
        None => {
            let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let path = out.join(format!("{stem}_rescaled.clf1"));
            clf1::write(&path, &scaled.fields()[0])?;
            path
        }
    };
    let mut csv = String::from("t,critical_norm_before,critical_norm_after\n");
    for ((t, b), f) in scaled.times().iter().zip(&before[skipped..]).zip(&after) {
        csv.push_str(&format!("{t:e},{b:e},{f:e}\n"));
    }
    let passed = worst <= 1e-6;
    Ok(Output::new(json!({
        "lambda": a.lambda,
        "x0": x0,
        "t0": a.t0,
        "samples": scaled.len(),
        "box_length": scaled.grid().box_length(),
        "max_relative_norm_change": worst,
        "written": written.display().to_string(),
    }))
    .with_csv(csv)
    .gate(passed))
}

#[derive(Args, Debug)]
pub struct VanishArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Bump center, comma separated; the origin by default.
    #[arg(long)]
    center: Option<String>,
    /// Comma-separated scales; every resolved power of two by default.
    #[arg(long)]
    lambdas: Option<String>,
}

pub fn vanish(g: &Global, a: &VanishArgs) -> Result<Output> {
    no_config(g, "vanish")?;
    let u: SpectralField = clf1::read(&a.input)?;
    let center = match &a.center {
        Some(s) => parse_list(s)?,
        None => vec![0.0; u.grid().dim()],
    };
    let lambdas = match &a.lambdas {
        Some(s) => parse_list(s)?,
        None => dyadic_scales(&u),
    };
    let pts = vanishing_test(&u, &center, &lambdas)?;
    let mut csv = String::from("lambda,pairing\n");
    for p in &pts {
        csv.push_str(&format!("{:e},{:e}\n", p.lambda, p.magnitude));
    }
    Ok(Output::new(json!({ "center": center, "pairings": pts })).with_csv(csv))
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Trajectory archive directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// End time of the compensated norms; the last sample by default.
    #[arg(long)]
    t_end: Option<f64>,
}

pub fn report(g: &Global, a: &ReportArgs) -> Result<Output> {
    let set = match &g.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?.diagnostics,
        None => DiagnosticSet::default(),
    };
    let (traj, _) = read_archive(&a.input)?;
    let t_end = a.t_end.unwrap_or(traj.horizon());
    let r = set.evaluate(&traj, None, t_end, EndTimeSource::Horizon)?;
    if let Some(out) = &g.out {
        fs::create_dir_all(out)?;
        for s in &r.series {
            clf1::write_atomic(&out.join(format!("{}.csv", s.name)), s.to_csv(&r.times).as_bytes())?;
        }
        clf1::write_atomic(&out.join("diagnostics.json"), &serde_json::to_vec_pretty(&r)?)?;
    }
    let mut csv = String::from("t");
    for s in &r.series {
        csv.push(',');
        csv.push_str(&s.name);
    }
    csv.push('\n');
    for (i, t) in r.times.iter().enumerate() {
        csv.push_str(&format!("{t:e}"));
        for s in &r.series {
            csv.push_str(&format!(",{:e}", s.values[i]));
        }
        csv.push('\n');
    }
    Ok(Output::new(serde_json::to_value(&r)?).with_csv(csv))
}
