//! Run configuration files and the file-producing drivers behind the
//! command line.
//!
//! A config is TOML with the sections `domain`, `solver`, `nonlinearity`,
//! `experiment` and `output`. Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::{self, ExperimentKind, ExperimentSpec, Report, Setup};
use crate::output::{fmt_num, write_atomic, write_json, CsvTable};
use crate::solver::{detect_blowup, solve, NonlinearitySpec, SolverConfig, Trajectory};
use crate::spectral::{build_domain, DomainSpec, SpectralDomain, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formats {
    Csv,
    Json,
    #[default]
    Both,
}

impl Formats {
    pub fn csv(self) -> bool {
        matches!(self, Formats::Csv | Formats::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Formats::Json | Formats::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default)]
    pub formats: Formats,
    /// Times whose coefficient vectors go to `snapshots.csv` (nearest node).
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Also write a gnuplot script next to experiment CSVs.
    #[serde(default)]
    pub plot_script: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("fracwave_out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: Formats::default(),
            snapshot_times: Vec::new(),
            plot_script: false,
        }
    }
}

/// Initial data given as coefficient lists or sampled from closed forms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    /// Coefficients of u₀ in eigenvalue order; missing entries are zero.
    #[serde(default)]
    pub u0: Vec<f64>,
    #[serde(default)]
    pub u1: Vec<f64>,
    /// Adds A·Π sin(πx_i/L_i) to u₀.
    #[serde(default)]
    pub u0_bump: f64,
    #[serde(default)]
    pub u1_bump: f64,
}

impl InitialData {
    pub fn fields(&self, domain: &SpectralDomain) -> Result<(SpectralField, SpectralField)> {
        let m = domain.mode_count();
        let build = |coeffs: &[f64], bump: f64, name: &str| -> Result<SpectralField> {
            if coeffs.len() > m {
                return Err(Error::Config(format!(
                    "{name} has {} coefficients but the domain keeps {m} modes",
                    coeffs.len()
                )));
            }
            let mut c = coeffs.to_vec();
            c.resize(m, 0.0);
            let mut field = SpectralField::new(c);
            if bump != 0.0 {
                field = &field + &harness::bump_field(domain, bump)?;
            }
            Ok(field)
        };
        Ok((
            build(&self.u0, self.u0_bump, "u0")?,
            build(&self.u1, self.u1_bump, "u1")?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub solver: SolverConfig,
    #[serde(default = "NonlinearitySpec::zero")]
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Every section is checked before any computation starts.
    pub fn validate(&self) -> Result<()> {
        let config_err = |section: &str, e: Error| Error::Config(format!("[{section}] {e}"));
        self.domain
            .validate()
            .map_err(|e| config_err("domain", e))?;
        self.solver
            .validate()
            .map_err(|e| config_err("solver", e))?;
        self.nonlinearity
            .validate()
            .map_err(|e| config_err("nonlinearity", e))?;
        if let Some(exp) = &self.experiment {
            exp.validate().map_err(|e| config_err("experiment", e))?;
        }
        if let Some(t) = self
            .output
            .snapshot_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.solver.t_end))
        {
            return Err(Error::Config(format!(
                "[output] snapshot time {t} lies outside [0, t_end]"
            )));
        }
        Ok(())
    }
}

/// Per-node diagnostics in the documented column order.
pub fn trajectory_table(traj: &Trajectory) -> CsvTable {
    let mut table = CsvTable::new(&[
        "t",
        "l2_norm",
        "lq_norm",
        "frac_norm_theta",
        "picard_iters",
        "picard_residual",
        "blown",
    ]);
    let last = traj.times.len() - 1;
    for (k, (t, d)) in traj.times.iter().zip(&traj.diagnostics).enumerate() {
        table.push(vec![
            fmt_num(*t),
            fmt_num(d.l2_norm),
            fmt_num(d.lq_norm),
            fmt_num(d.frac_norm),
            d.picard_iters.to_string(),
            fmt_num(d.picard_residual),
            u8::from(traj.blown && k == last).to_string(),
        ]);
    }
    table
}

/// Long-format coefficients: one row per (snapshot, mode).
pub fn snapshot_table(traj: &Trajectory, times: &[f64]) -> CsvTable {
    let mut table = CsvTable::new(&["t_requested", "t", "mode", "coefficient"]);
    for &t in times {
        let k = traj.nearest_index(t);
        for (n, c) in traj.fields[k].coeffs().iter().enumerate() {
            table.push(vec![
                fmt_num(t),
                fmt_num(traj.times[k]),
                (n + 1).to_string(),
                fmt_num(*c),
            ]);
        }
    }
    table
}

pub fn trajectory_summary(traj: &Trajectory) -> serde_json::Value {
    let report = detect_blowup(traj);
    let last = traj
        .diagnostics
        .last()
        .expect("trajectory has the initial node");
    json!({
        "alpha": traj.alpha,
        "step": traj.step,
        "theta": traj.theta,
        "lq_exponent": traj.lq_exponent,
        "nodes": traj.times.len(),
        "final_time": traj.final_time(),
        "final_l2_norm": last.l2_norm,
        "final_lq_norm": last.lq_norm,
        "final_frac_norm": last.frac_norm,
        "blown": report.blown,
        "t_flag": report.t_flag,
        "total_picard_iterations": traj.total_picard_iterations(),
        "warnings": traj.warnings,
    })
}

/// What a `solve` run produced.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub written: Vec<PathBuf>,
}

/// Solves the configured problem and writes trajectory, snapshots and
/// summary into `out`.
pub fn run_solve(cfg: &RunConfig, out: &Path) -> Result<SolveOutcome> {
    let domain = build_domain(&cfg.domain)?;
    let (u0, u1) = cfg.initial.fields(&domain)?;
    let trajectory = solve(&domain, &cfg.solver, &cfg.nonlinearity, &u0, &u1)?;
    let mut written = Vec::new();
    if cfg.output.formats.csv() {
        let path = out.join("trajectory.csv");
        write_atomic(&path, trajectory_table(&trajectory).render().as_bytes())?;
        written.push(path);
        if !cfg.output.snapshot_times.is_empty() {
            let path = out.join("snapshots.csv");
            let table = snapshot_table(&trajectory, &cfg.output.snapshot_times);
            write_atomic(&path, table.render().as_bytes())?;
            written.push(path);
        }
    }
    if cfg.output.formats.json() {
        let path = out.join("summary.json");
        write_json(&path, &trajectory_summary(&trajectory))?;
        written.push(path);
    }
    Ok(SolveOutcome {
        trajectory,
        written,
    })
}

/// Runs one experiment from the config and writes its result files.
pub fn run_experiment(cfg: &RunConfig, kind: ExperimentKind, out: &Path) -> Result<Report> {
    let spec = cfg.experiment.as_ref().ok_or_else(|| {
        Error::Config("an [experiment] section is required for experiment runs".into())
    })?;
    if let Some(k) = spec.kind {
        if k != kind {
            return Err(Error::Config(format!(
                "config declares a {k} experiment but {kind} was requested"
            )));
        }
    }
    let domain = build_domain(&cfg.domain)?;
    let setup = Setup {
        domain: &domain,
        solver: &cfg.solver,
        nonlinearity: &cfg.nonlinearity,
    };
    let report = harness::run(kind, spec, &setup)?;
    let dir = spec.output_dir.as_deref().unwrap_or(out);
    report.write(
        dir,
        cfg.output.formats.json(),
        cfg.output.formats.csv(),
        cfg.output.plot_script,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
dimension = 1
grid = [32]
modes = [8]

[solver]
alpha = 1.5
t_end = 1.0
steps = 10
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.solver.picard_tol, 1e-12);
        assert!(cfg.nonlinearity.is_zero());
        assert_eq!(cfg.output.formats, Formats::Both);
        assert!(cfg.experiment.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = MINIMAL.replace("steps = 10", "steps = 10\npicard_tool = 1e-9");
        assert!(matches!(RunConfig::from_toml(&typo), Err(Error::Config(_))));
        let section = format!("{MINIMAL}\n[outptu]\ndirectory = \"x\"\n");
        assert!(RunConfig::from_toml(&section).is_err());
    }

    #[test]
    fn sections_are_validated() {
        let bad = MINIMAL.replace("alpha = 1.5", "alpha = 2.5");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        let empty = format!("{MINIMAL}\n[experiment]\nbetas = []\n");
        assert!(matches!(
            RunConfig::from_toml(&empty),
            Err(Error::Config(_))
        ));
        let late = format!("{MINIMAL}\n[output]\nsnapshot_times = [2.0]\n");
        assert!(RunConfig::from_toml(&late).is_err());
    }

    #[test]
    fn too_many_coefficients() {
        let cfg =
            RunConfig::from_toml(&format!("{MINIMAL}\n[initial]\nu0 = [1,2,3,4,5,6,7,8,9]\n"))
                .unwrap();
        let d = build_domain(&cfg.domain).unwrap();
        assert!(cfg.initial.fields(&d).is_err());
    }
}
