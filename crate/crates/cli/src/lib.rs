//! Subcommands of the `opfix` binary: run an experiment with coverage
//! certification, evaluate bound curves alone, and audit the sub-Weibull
//! parameter algebra.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use opfix_core::bounds::{BoundCurve, Proposition};
use opfix_core::config::{Experiment, ExperimentConfig};
use opfix_core::io::{eta_rows, write_bounds, write_eta, write_report, write_trajectories};
use opfix_core::montecarlo::{
    check_coverage, closure_audit, family_audit, run_ensemble, AuditReport, EnsembleOptions, ExperimentReport,
};
use opfix_core::operators::OperatorClass;
use opfix_core::{ConfigError, Error, Result};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

const DEFAULT_OUT: &str = "opfix-out";

/// Command-line values that replace the corresponding `[run]` keys.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.run.base_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.run.trials = t;
        }
        if let Some(h) = self.horizon {
            cfg.run.horizon = h;
        }
    }

    /// Text appended to the configuration before hashing, so the report
    /// digest identifies the effective inputs.
    fn fingerprint(&self) -> String {
        let mut s = String::new();
        if let Some(v) = self.seed {
            s.push_str(&format!("\n# --seed {v}"));
        }
        if let Some(v) = self.trials {
            s.push_str(&format!("\n# --trials {v}"));
        }
        if let Some(v) = self.horizon {
            s.push_str(&format!("\n# --horizon {v}"));
        }
        s
    }
}

/// Exit code for an error: configuration and input problems map to 1.
pub fn exit_code(_err: &Error) -> i32 {
    EXIT_CONFIG
}

/// Reads, overrides and validates a configuration file.
pub fn load(path: &Path, overrides: Overrides) -> Result<(ExperimentConfig, Experiment)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::from(ConfigError::new("", format!("cannot read {}: {e}", path.display()))))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    overrides.apply(&mut cfg);
    let exp = cfg.build()?;
    Ok((cfg, exp))
}

fn output_dir(exp: &Experiment, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| exp.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Filter applied by `--only`: `eta` selects the eta table, anything else
/// must name a proposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Only {
    Eta,
    Curve(Proposition),
}

impl std::str::FromStr for Only {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "eta" {
            return Ok(Only::Eta);
        }
        s.parse::<Proposition>().map(Only::Curve).map_err(|_| {
            let names: Vec<&str> = Proposition::ALL.iter().map(|p| p.name()).collect();
            ConfigError::new("--only", format!("unknown curve `{s}`; expected `eta` or one of {}", names.join(", ")))
                .into()
        })
    }
}

fn filtered(curves: Vec<BoundCurve>, only: Option<Only>) -> Vec<BoundCurve> {
    match only {
        Some(Only::Curve(p)) => curves.into_iter().filter(|c| c.proposition == p).collect(),
        _ => curves,
    }
}

/// Outcome of `simulate`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSummary {
    pub out_dir: PathBuf,
    pub report: ExperimentReport,
}

impl SimulateSummary {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_pass {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Runs the ensemble, checks every requested curve and writes
/// `trajectories.csv`, `bounds.csv` and `report.json`.
pub fn cmd_simulate(
    config: &Path,
    out: Option<&Path>,
    overrides: Overrides,
    only: Option<Only>,
) -> Result<SimulateSummary> {
    let (cfg, exp) = load(config, overrides)?;
    if only == Some(Only::Eta) {
        return Err(ConfigError::new("--only", "`eta` applies to the bounds subcommand").into());
    }
    let curves = filtered(exp.curves()?, only);
    let keep = exp.output.trajectories.min(exp.trials);
    let options = EnsembleOptions { trials: exp.trials, base_seed: exp.base_seed, keep_trajectories: keep };
    let ens = run_ensemble(&exp.iteration, options)?;
    let coverage = curves.iter().map(|c| check_coverage(&ens, c, None)).collect::<Result<Vec<_>>>()?;
    let text = format!("{}{}", cfg.source(), overrides.fingerprint());
    let report = ExperimentReport::new(&text, &ens, coverage);

    let dir = output_dir(&exp, out);
    write_trajectories(create(&dir, "trajectories.csv")?, ens.kept(), exp.output.stride)?;
    write_bounds(create(&dir, "bounds.csv")?, &curves)?;
    write_report(create(&dir, "report.json")?, &report)?;
    Ok(SimulateSummary { out_dir: dir, report })
}

/// Outcome of `bounds`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsSummary {
    pub path: PathBuf,
    pub rows: usize,
}

/// Evaluates the requested curves without simulating. With `--only eta`
/// writes the eta table of every contractive block instead.
pub fn cmd_bounds(config: &Path, out: Option<&Path>, overrides: Overrides, only: Option<Only>) -> Result<BoundsSummary> {
    let (_, exp) = load(config, overrides)?;
    let dir = output_dir(&exp, out);
    if only == Some(Only::Eta) {
        let zeta = match exp.iteration.operator.base().class() {
            OperatorClass::Contractive { zeta } => zeta,
            OperatorClass::Averaged { .. } => {
                return Err(Error::Unsupported("the eta table needs a contractive operator".into()))
            }
        };
        let params: Vec<(f64, f64)> =
            exp.iteration.update.probabilities().iter().map(|p| (zeta, *p)).collect();
        let rows = eta_rows(&params, exp.iteration.horizon);
        write_eta(create(&dir, "eta.csv")?, &rows)?;
        return Ok(BoundsSummary { path: dir.join("eta.csv"), rows: rows.len() });
    }
    let curves = filtered(exp.curves()?, only);
    write_bounds(create(&dir, "bounds.csv")?, &curves)?;
    Ok(BoundsSummary { path: dir.join("bounds.csv"), rows: curves.iter().map(|c| c.values.len()).sum() })
}

/// Outcome of `audit`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditSummary {
    pub closure: AuditReport,
    pub families: AuditReport,
}

impl AuditSummary {
    pub fn pass(&self) -> bool {
        self.closure.pass && self.families.pass
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Runs the closure-rule and sampler audits; writes `audit.json` when an
/// output directory is given.
pub fn cmd_audit(samples: usize, seed: u64, out: Option<&Path>) -> Result<AuditSummary> {
    let closure = closure_audit(samples, seed)?;
    let families = family_audit(samples, seed.wrapping_add(1_000))?;
    if let Some(dir) = out {
        let mut w = create(dir, "audit.json")?;
        serde_json_write(&mut w, &closure, &families)?;
    }
    Ok(AuditSummary { closure, families })
}

fn serde_json_write<W: std::io::Write>(w: &mut W, closure: &AuditReport, families: &AuditReport) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        closure: &'a AuditReport,
        families: &'a AuditReport,
    }
    serde_json::to_writer_pretty(&mut *w, &Doc { closure, families })?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Human-readable audit table.
pub fn format_audit(summary: &AuditSummary) -> String {
    let mut s = String::new();
    for (title, rep) in [("closure rules", &summary.closure), ("samplers", &summary.families)] {
        s.push_str(&format!("{title}:\n"));
        for e in &rep.entries {
            s.push_str(&format!(
                "  {:<24} theta={:<6} nu={:<12.6} max_ratio={:.4} {}\n",
                e.name,
                e.theta,
                e.nu,
                e.max_ratio,
                if e.within { "ok" } else { "EXCEEDS" }
            ));
        }
        for c in &rep.controls {
            s.push_str(&format!(
                "  control {:<16} max_ratio={:.4} {}\n",
                c.name,
                c.max_ratio,
                if c.within { "UNDETECTED" } else { "detected" }
            ));
        }
    }
    s
}

/// Human-readable coverage table.
pub fn format_report(report: &ExperimentReport) -> String {
    let mut s = format!(
        "trials={} horizon={} base_seed={} digest={}\n",
        report.trials, report.horizon, report.base_seed, report.config_digest
    );
    for c in &report.coverage {
        let mut tag = c.delta.map_or(String::from("-"), |d| format!("delta={d}"));
        if let Some(e) = c.epsilon {
            tag = format!("eps={e}");
        }
        if let Some(m) = c.sigma_mode {
            tag.push_str(&format!(" sigma={m:?}").to_lowercase());
        }
        s.push_str(&format!(
            "  {:<5} {:<26} block={} {:<24} margin={:+.4}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.proposition.name(),
            c.block,
            tag,
            c.margin
        ));
    }
    for n in &report.notes {
        s.push_str(&format!("  note: {n}\n"));
    }
    s
}
