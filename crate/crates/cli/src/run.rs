use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use paneitz_core::coefficients::coefficient_report;
use paneitz_core::diagnostics::{epsilon_sweep, seed_lattice, SweepPlan};
use paneitz_core::functional::level_from_quotient;
use paneitz_core::groundstate::{solve_ground_state, GroundStateProblem};
use paneitz_core::io::write_csv_slice;
use paneitz_core::solver::{multistart_solve, write_solution_set, MultistartOptions, MultistartReport};
use paneitz_core::{EnergyParams, Error, Field, GroundState, Seed, TorusGrid};
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig, Mode};
use crate::manifest::Manifest;

/// Bound on the ground-state residual and on the level/quotient identity.
pub const GS_TOL: f64 = 1e-6;

#[derive(Debug)]
pub enum Failure {
    /// Exit 1, nothing computed.
    Config(ConfigError),
    /// Exit 2: a named invariant did not hold.
    Assertion { invariant: String, detail: String },
    /// Exit 2: compute started but could not finish.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Assertion { .. } | Failure::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Assertion { invariant, detail } => write!(f, "assertion `{invariant}` failed: {detail}"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn assertion(invariant: &str, detail: impl Into<String>) -> Failure {
    Failure::Assertion { invariant: invariant.into(), detail: detail.into() }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

pub struct Invocation<'a> {
    pub mode: Mode,
    pub config_text: &'a str,
    pub out: Option<&'a Path>,
    pub deterministic: bool,
}

/// Files written so far, relative to the output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).map_err(runtime)?;
        self.files.push(path);
        Ok(())
    }

    fn extend(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }
}

pub struct Report {
    pub dir: PathBuf,
    pub summary: Value,
}

/// Validates, runs the pipeline for `inv.mode`, and writes `manifest.json`.
/// The manifest is written whenever the output directory exists, with
/// status `FAILED` when the run did not pass.
pub fn execute(inv: &Invocation, threads: Option<usize>) -> Result<Report, Failure> {
    let config = crate::config::parse(inv.config_text)?;
    config.validate(inv.mode)?;
    let deterministic = inv.deterministic || config.deterministic;
    let dir = match (inv.out, &config.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(Failure::Config(ConfigError {
                field: "output_dir".into(),
                message: "give --out or set output_dir".into(),
            }))
        }
    };
    fs::create_dir_all(&dir)
        .map_err(|e| ConfigError { field: "output_dir".into(), message: format!("{}: {e}", dir.display()) })?;

    let mut outputs = Outputs { dir: dir.clone(), files: Vec::new() };
    let result = match inv.mode {
        Mode::Constants => constants(&config, &mut outputs),
        Mode::GroundState => ground_state(&config, &mut outputs).map(|(_, s)| s),
        Mode::Multiplicity => multiplicity(&config, deterministic, &mut outputs),
        Mode::Sweep => sweep(&config, deterministic, &mut outputs),
    };

    let mut manifest = Manifest::new(inv.mode, inv.config_text, &config, deterministic, threads);
    match &result {
        Ok(summary) => manifest.summary = summary.clone(),
        Err(f) => manifest.fail(f.to_string()),
    }
    manifest.add_files(&dir, &outputs.files).map_err(runtime)?;
    manifest.write(&dir).map_err(runtime)?;
    result.map(|_| Report { dir, summary: manifest.summary })
}

fn constants(config: &ExperimentConfig, out: &mut Outputs) -> Result<Value, Failure> {
    let specs = config.specs()?;
    let report = coefficient_report(&specs).map_err(runtime)?;
    out.write("coefficients.csv", report.to_csv().as_bytes())?;
    let flagged = report.rows.iter().filter(|r| r.outcome.is_err()).count();
    let negative: Vec<u32> = report
        .rows
        .iter()
        .filter_map(|r| r.constants().filter(|c| c.big_a < 0.0).map(|_| r.spec.total_dim()))
        .collect();
    if !report.all_signs_ok() {
        return Err(assertion("sign law", "a row has constants with the wrong sign pattern"));
    }
    Ok(json!({ "rows": report.rows.len(), "flagged": flagged, "negative_A_total_dims": negative }))
}

fn ground_state(config: &ExperimentConfig, out: &mut Outputs) -> Result<(GroundState, Value), Failure> {
    let (alpha, beta) = config.coefficients()?.limit_pair()?;
    let gs_box = config.ground_state_box()?;
    let n = config.ground_state_dim()?;
    let problem = GroundStateProblem::new(alpha, beta, config.q, n, gs_box.length, gs_box.points);
    let gs = match solve_ground_state(&problem, &config.solver) {
        Ok(gs) => gs,
        Err(e @ Error::BoxTooSmall { .. }) => return Err(assertion("ground-state decay", e.to_string())),
        Err(e @ Error::NotConverged { .. }) => return Err(assertion("ground-state convergence", e.to_string())),
        Err(e) => return Err(runtime(e)),
    };
    gs.save(&out.dir.join("groundstate")).map_err(runtime)?;
    out.extend([out.dir.join("groundstate.bin"), out.dir.join("groundstate.json")]);

    let mut radial = String::from("bin,r,mean_u\n");
    let h = gs.grid().spacing();
    for (k, m) in gs.radial_bins().iter().enumerate() {
        radial.push_str(&format!("{k},{},{m}\n", (k as f64 + 0.5) * h));
    }
    out.write("groundstate_radial.csv", radial.as_bytes())?;
    let path = out.dir.join("groundstate_slice.csv");
    let file = fs::File::create(&path).map_err(runtime)?;
    write_csv_slice(&gs.profile, BufWriter::new(file)).map_err(runtime)?;
    out.extend([path]);

    let car = (gs.level - level_from_quotient(gs.q, gs.quotient)).abs() / gs.level;
    let summary = json!({
        "alpha": gs.alpha,
        "beta": gs.beta,
        "level": gs.level,
        "quotient": gs.quotient,
        "residual": gs.residual,
        "decay_indicator": gs.decay_indicator,
        "level_quotient_identity": car,
        "radial_increase": gs.radial_increase(),
        "iterations": gs.iterations,
    });
    if !gs.is_positive() {
        return Err(assertion("ground-state positivity", format!("min U = {}", gs.profile.min())));
    }
    if gs.radial_increase() > 0.0 {
        return Err(assertion("ground-state radial monotonicity", format!("bin increase {}", gs.radial_increase())));
    }
    if gs.residual > GS_TOL {
        return Err(assertion("ground-state residual", format!("{} > {GS_TOL}", gs.residual)));
    }
    if car > GS_TOL {
        return Err(assertion("level/quotient identity", format!("{car} > {GS_TOL}")));
    }
    Ok((gs, summary))
}

fn torus_setup(config: &ExperimentConfig, deterministic: bool) -> Result<(EnergyParams, Vec<paneitz_core::TorusPoint>, MultistartOptions), Failure> {
    let g = config.grid()?;
    let grid = TorusGrid::new(g.n, g.length, g.points).map_err(runtime)?;
    let coeffs = config.coefficients()?.linear()?;
    let p = EnergyParams::new(config.eps_list[0], config.q, coeffs, grid.clone()).map_err(runtime)?;
    let seeds = if config.seeds.lattice > 0 { seed_lattice(&grid, config.seeds.lattice) } else { Vec::new() };
    let opts = MultistartOptions {
        cutoff: config.seeds.cutoff.unwrap_or(g.length / 2.0),
        include_constant: config.seeds.constant,
        random_seeds: config.seeds.random,
        rng_seed: config.seed,
        parallel: !deterministic,
    };
    Ok((p, seeds, opts))
}

fn report_summary(report: &MultistartReport, p: &EnergyParams) -> Value {
    let constant = Field::constant(p.grid().clone(), p.constant_solution_value());
    json!({
        "eps": p.eps(),
        "classes": report.classes.len(),
        "accepted": report.accepted_count(),
        "rejected": report.rejected_count(),
        "unconverged": report.unconverged_count(),
        "seed_failures": report.seed_failures(),
        "min_energy": report.min_energy(),
        "constant_energy": p.energy(&constant).ok(),
        "class_energies": report.classes.iter().map(|c| c.representative.energy()).collect::<Vec<_>>(),
        "constant_class": report.classes.iter().position(|c| c.seeds.contains(&Seed::Constant)),
    })
}

fn check_report(report: &MultistartReport, eps: f64) -> Result<(), Failure> {
    if report.classes.is_empty() {
        return Err(assertion("accepted solution exists", format!("no run at ε = {eps} was accepted")));
    }
    if let Some(c) = report.classes.iter().find(|c| !c.representative.accepted()) {
        return Err(assertion("class representatives accepted", format!("energy {}", c.representative.energy())));
    }
    Ok(())
}

fn multiplicity(config: &ExperimentConfig, deterministic: bool, out: &mut Outputs) -> Result<Value, Failure> {
    let (gs, gs_summary) = ground_state(config, out)?;
    let (p, seeds, opts) = torus_setup(config, deterministic)?;
    let report = multistart_solve(&seeds, &gs, &p, &config.solver, &opts).map_err(runtime)?;
    let written = write_solution_set(&out.dir.join("solutions"), &report, &p).map_err(runtime)?;
    out.extend(written);
    check_report(&report, p.eps())?;
    Ok(json!({ "groundstate": gs_summary, "multistart": report_summary(&report, &p) }))
}

fn sweep(config: &ExperimentConfig, deterministic: bool, out: &mut Outputs) -> Result<Value, Failure> {
    let (gs, gs_summary) = ground_state(config, out)?;
    let (template, seeds, options) = torus_setup(config, deterministic)?;
    let plan = SweepPlan { seeds, options, radius: config.seeds.radius };
    let result = epsilon_sweep(&config.eps_list, &template, &config.solver, &gs, &plan).map_err(runtime)?;
    out.write("sweep.csv", result.to_csv().as_bytes())?;
    let mut per_eps = Vec::new();
    for (k, (report, row)) in result.reports.iter().zip(&result.rows).enumerate() {
        let p = template.with_eps(row.eps).map_err(runtime)?;
        let written = write_solution_set(&out.dir.join(format!("eps_{k:02}")), report, &p).map_err(runtime)?;
        out.extend(written);
        per_eps.push(report_summary(report, &p));
    }
    if let Some(row) = result.rows.iter().find(|r| r.flagged) {
        return Err(assertion("accepted solution exists", format!("no run at ε = {} was accepted", row.eps)));
    }
    for (report, row) in result.reports.iter().zip(&result.rows) {
        check_report(report, row.eps)?;
    }
    Ok(json!({ "groundstate": gs_summary, "rows": result.rows, "multistart": per_eps }))
}
