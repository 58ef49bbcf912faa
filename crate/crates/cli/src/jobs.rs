//! Job descriptions and their execution.
//!
//! Every subcommand normalizes its flags into a [`JobConfig`] first; `run
//! --config` deserializes the same struct from JSON, so a job is reproducible
//! from a single file. Execution is deterministic: the only randomness is the
//! seeded competitor sampling inside `verify`, and all reports go through the
//! fixed-key-order, 17-significant-digit JSON writer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use monoreg::io;
use monoreg::isotonic::CERTIFICATE_TOL;
use monoreg::{
    approximate_projection, certify, lift, pointwise_value, project_grid_constant, solve,
    verify_minimizer, BregmanSpec, Certificate, ConvergenceReport, Cuboid, Discretization, Error,
    GridFunction, MinimizerReport, NormKind, PointwiseOptions, PointwiseStep, RefineOptions,
    Result, ScalarField, Signature,
};

use crate::builtins;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Fit,
    Project,
    Converge,
    Verify,
    Point,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    #[default]
    L2,
    Sup,
}

impl NormArg {
    pub fn kind(self) -> NormKind {
        match self {
            NormArg::L2 => NormKind::L2,
            NormArg::Sup => NormKind::Sup,
        }
    }
}

/// A fully resolved job. Optional fields apply only to some commands; the
/// executors reject combinations that make no sense rather than guessing.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: CommandKind,
    /// Grid-function CSV (fit, project, verify) or fine-grid field data
    /// (converge, point).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Sidecar JSON; defaults to the input path with a `json` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
    /// Builtin field name, the alternative to `input` for converge and point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Per-axis directions, e.g. "+1,0,-1"; the sidecar's signature is the
    /// fallback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sig: Option<String>,
    /// Box for a builtin field as `lo:hi` pairs, e.g. "0:1,0:2".
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub box_spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormArg>,
    /// Dyadic levels "lo..hi", or a single top level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<String>,
    /// Certified bound at which refinement stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Certificate tolerance (fit, project) or acceptance tolerance (point).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Convexity spec name for verify: square, entropy, exp, neglog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bregman: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Probe coordinates for point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// What a finished job reports back to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The job ran to completion but its numerical certificate failed.
    CertificateFailure,
}

pub fn exit_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Success => 0,
        Outcome::CertificateFailure => 2,
    }
}

pub fn run(cfg: &JobConfig) -> Result<Outcome> {
    match cfg.command {
        CommandKind::Fit => run_fit(cfg, false),
        CommandKind::Project => run_fit(cfg, true),
        CommandKind::Converge => run_converge(cfg),
        CommandKind::Point => run_point(cfg),
        CommandKind::Verify => run_verify(cfg),
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    command: &'static str,
    input: String,
    signature: String,
    points: usize,
    objective: f64,
    tol: f64,
    certificate: &'a Certificate,
}

fn run_fit(cfg: &JobConfig, continuous: bool) -> Result<Outcome> {
    let command = if continuous { "project" } else { "fit" };
    let (csv_path, meta_path) = data_paths(cfg)?;
    let out = required_out(cfg)?;
    let data = io::read_grid_data(&csv_path, &meta_path)?;
    let sig = resolve_signature(cfg.sig.as_deref(), data.signature.as_ref(), data.f.grid().dim())?;
    let w = match &data.w {
        Some(w) => w.clone(),
        None => GridFunction::constant(data.f.grid().clone(), 1.0)?,
    };
    let result = if continuous {
        project_grid_constant(&data.f, &w, &sig)?
    } else {
        solve(&data.f, &w, &sig)?
    };
    let tol = positive_or(cfg.tol, CERTIFICATE_TOL, "tol")?;
    let cert = certify(&data.f, &w, &result, &sig, tol)?;

    io::write_grid_csv(&out, result.fitted(), data.w.as_ref())?;
    let report = FitReport {
        command,
        input: csv_path.display().to_string(),
        signature: sig.to_string(),
        points: data.f.grid().num_points(),
        objective: result.objective(),
        tol,
        certificate: &cert,
    };
    let cert_path = out.with_extension("cert.json");
    io::atomic_write(&cert_path, io::to_json_string(&report)?.as_bytes())?;

    eprintln!(
        "{command}: {} points, objective {:.6e}, certificate {} -> {}",
        report.points,
        report.objective,
        if cert.pass { "pass" } else { "FAIL" },
        cert_path.display(),
    );
    Ok(if cert.pass {
        Outcome::Success
    } else {
        Outcome::CertificateFailure
    })
}

#[derive(Serialize)]
struct ConvergeOutput<'a> {
    command: &'static str,
    source: String,
    signature: String,
    target_unreached: bool,
    report: &'a ConvergenceReport,
}

fn run_converge(cfg: &JobConfig) -> Result<Outcome> {
    let out = required_out(cfg)?;
    let src = resolve_source(cfg)?;
    let (min_level, max_level) = match &cfg.levels {
        Some(s) => parse_levels(s)?,
        None => (2, 8),
    };
    let opts = RefineOptions {
        norm: cfg.norm.unwrap_or_default().kind(),
        target: cfg.target.unwrap_or(1e-2),
        min_level,
        max_level,
        discretization: src.discretization,
        quad_order: 4,
        weight_bounds: src.weight_bounds,
    };
    let report = approximate_projection(&src.f, &src.w, &src.sig, &opts)?;

    let mut plot = String::from("level,len_G,disc_err,bound,successive_diff\n");
    for rec in &report.levels {
        plot.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.level,
            io::fmt_f64(rec.len_g),
            io::fmt_f64(rec.discretization_error),
            io::fmt_f64(rec.bound),
            rec.successive_diff.map(io::fmt_f64).unwrap_or_default(),
        ));
    }
    let plot_path = out.with_extension("csv");
    io::atomic_write(&plot_path, plot.as_bytes())?;

    let doc = ConvergeOutput {
        command: "converge",
        source: src.label.clone(),
        signature: src.sig.to_string(),
        target_unreached: !report.target_reached,
        report: &report,
    };
    io::atomic_write(&out, io::to_json_string(&doc)?.as_bytes())?;

    let last = report.levels.last().expect("at least one level runs");
    eprintln!(
        "converge: level {} bound {:.6e}, target {} -> {}",
        last.level,
        last.bound,
        if report.target_reached {
            "reached"
        } else {
            "unreached"
        },
        out.display(),
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct PointOutput<'a> {
    command: &'static str,
    source: String,
    signature: String,
    x0: &'a [f64],
    tol: f64,
    value: f64,
    steps: &'a [PointwiseStep],
}

fn run_point(cfg: &JobConfig) -> Result<Outcome> {
    let src = resolve_source(cfg)?;
    let at = cfg
        .at
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("point needs probe coordinates: pass --at".into()))?;
    let tol = positive_or(cfg.tol, 1e-3, "tol")?;
    let opts = PointwiseOptions {
        tol,
        discretization: src.discretization,
        ..PointwiseOptions::default()
    };
    let report = pointwise_value(&src.f, &src.w, &src.sig, at, &opts)?;
    let doc = PointOutput {
        command: "point",
        source: src.label,
        signature: src.sig.to_string(),
        x0: at,
        tol,
        value: report.value,
        steps: &report.steps,
    };
    emit(&doc, cfg.out.as_deref())?;
    if cfg.out.is_some() {
        eprintln!(
            "point: value {:.6e} after {} refinements",
            report.value,
            report.steps.len()
        );
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    command: &'static str,
    input: String,
    signature: String,
    seed: u64,
    report: &'a MinimizerReport,
}

fn run_verify(cfg: &JobConfig) -> Result<Outcome> {
    let (csv_path, meta_path) = data_paths(cfg)?;
    let data = io::read_grid_data(&csv_path, &meta_path)?;
    let sig = resolve_signature(cfg.sig.as_deref(), data.signature.as_ref(), data.f.grid().dim())?;
    let w = match &data.w {
        Some(w) => w.clone(),
        None => GridFunction::constant(data.f.grid().clone(), 1.0)?,
    };
    let spec = BregmanSpec::by_name(cfg.bregman.as_deref().unwrap_or("square"))?;
    let trials = cfg.trials.unwrap_or(200);
    let report = verify_minimizer(&spec, &data.f, &w, &sig, trials, cfg.seed)?;
    let doc = VerifyOutput {
        command: "verify",
        input: csv_path.display().to_string(),
        signature: sig.to_string(),
        seed: cfg.seed,
        report: &report,
    };
    emit(&doc, cfg.out.as_deref())?;
    if cfg.out.is_some() {
        eprintln!(
            "verify {}: worst excess {:.6e}, {}",
            report.spec,
            report.worst_excess,
            if report.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(if report.pass {
        Outcome::Success
    } else {
        Outcome::CertificateFailure
    })
}

/// A continuous field, its weight, and how to discretize it per level.
struct Source {
    f: ScalarField,
    w: ScalarField,
    sig: Signature,
    label: String,
    discretization: Discretization,
    weight_bounds: Option<(f64, f64)>,
}

fn resolve_source(cfg: &JobConfig) -> Result<Source> {
    match (&cfg.builtin, &cfg.input) {
        (Some(name), None) => {
            let b = builtins::lookup(name).ok_or_else(|| {
                let listing: Vec<String> = builtins::BUILTINS
                    .iter()
                    .map(|b| format!("{} ({})", b.name, b.blurb))
                    .collect();
                Error::InvalidInput(format!(
                    "unknown builtin `{name}`; available: {}",
                    listing.join(", ")
                ))
            })?;
            let domain = match &cfg.box_spec {
                Some(spec) => parse_box(spec)?,
                None => b.default_domain(),
            };
            if domain.dim() != b.dim {
                return Err(Error::DimensionMismatch {
                    expected: b.dim,
                    got: domain.dim(),
                });
            }
            let sig_str = cfg.sig.as_deref().ok_or_else(|| {
                Error::InvalidInput("builtin fields carry no signature: pass --sig".into())
            })?;
            let sig = parsed_signature(sig_str, b.dim)?;
            Ok(Source {
                f: b.field(domain.clone()),
                w: ScalarField::constant(domain, 1.0),
                sig,
                label: name.clone(),
                discretization: Discretization::CellAverages,
                weight_bounds: Some((1.0, 1.0)),
            })
        }
        (None, Some(_)) => {
            if cfg.box_spec.is_some() {
                return Err(Error::InvalidInput(
                    "--box applies to builtin fields; a CSV's sidecar fixes the box".into(),
                ));
            }
            let (csv_path, meta_path) = data_paths(cfg)?;
            let data = io::read_grid_data(&csv_path, &meta_path)?;
            let dim = data.f.grid().dim();
            let sig = resolve_signature(cfg.sig.as_deref(), data.signature.as_ref(), dim)?;
            let domain = data.f.grid().domain().clone();
            let (w, weight_bounds) = match &data.w {
                Some(w) => (lift(w), None),
                None => (ScalarField::constant(domain, 1.0), Some((1.0, 1.0))),
            };
            Ok(Source {
                f: lift(&data.f),
                w,
                sig,
                label: csv_path.display().to_string(),
                // Midpoint sampling reproduces cell-constant data exactly once
                // the level grid refines the data grid.
                discretization: Discretization::Midpoints,
                weight_bounds,
            })
        }
        (Some(_), Some(_)) => Err(Error::InvalidInput(
            "pass --builtin or --in, not both".into(),
        )),
        (None, None) => Err(Error::InvalidInput(
            "a field source is required: --builtin NAME or --in CSV".into(),
        )),
    }
}

fn data_paths(cfg: &JobConfig) -> Result<(PathBuf, PathBuf)> {
    let csv = cfg
        .input
        .clone()
        .ok_or_else(|| Error::InvalidInput("grid data is required: pass --in CSV".into()))?;
    let meta = cfg.meta.clone().unwrap_or_else(|| csv.with_extension("json"));
    Ok((csv, meta))
}

fn required_out(cfg: &JobConfig) -> Result<PathBuf> {
    cfg.out
        .clone()
        .ok_or_else(|| Error::InvalidInput("this command writes files: pass --out".into()))
}

fn resolve_signature(
    flag: Option<&str>,
    sidecar: Option<&Signature>,
    dim: usize,
) -> Result<Signature> {
    match flag {
        Some(s) => parsed_signature(s, dim),
        None => {
            let sig = sidecar.cloned().ok_or_else(|| {
                Error::InvalidInput(
                    "no signature: pass --sig or record one in the sidecar".into(),
                )
            })?;
            check_dim(&sig, dim)?;
            Ok(sig)
        }
    }
}

fn parsed_signature(s: &str, dim: usize) -> Result<Signature> {
    let sig = Signature::parse(s)?;
    check_dim(&sig, dim)?;
    Ok(sig)
}

fn check_dim(sig: &Signature, dim: usize) -> Result<()> {
    if sig.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: sig.dim(),
        });
    }
    Ok(())
}

fn positive_or(value: Option<f64>, default: f64, name: &str) -> Result<f64> {
    let v = value.unwrap_or(default);
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidInput(format!(
            "{name} must be finite and > 0, got {v}"
        )));
    }
    Ok(v)
}

/// Parses a box as comma-separated `lo:hi` pairs, one per axis.
fn parse_box(spec: &str) -> Result<Cuboid> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in spec.split(',') {
        let (a, b) = part.split_once(':').ok_or_else(|| {
            Error::InvalidInput(format!("box axis `{part}` is not of the form lo:hi"))
        })?;
        lo.push(parse_coord(a)?);
        hi.push(parse_coord(b)?);
    }
    Cuboid::new(lo, hi)
}

fn parse_coord(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("`{}` is not a number", s.trim())))
}

/// Parses "lo..hi" as an inclusive level range; a bare number names the top
/// level with the start clamped to at most 2.
fn parse_levels(spec: &str) -> Result<(u32, u32)> {
    let s = spec.trim();
    if let Some((a, b)) = s.split_once("..") {
        let lo = parse_level(a)?;
        let hi = parse_level(b)?;
        if lo > hi {
            return Err(Error::InvalidInput(format!("level range `{spec}` is empty")));
        }
        Ok((lo, hi))
    } else {
        let hi = parse_level(s)?;
        Ok((hi.min(2), hi))
    }
}

fn parse_level(s: &str) -> Result<u32> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("`{}` is not a level", s.trim())))
}

fn emit<T: Serialize>(doc: &T, out: Option<&Path>) -> Result<()> {
    let text = io::to_json_string(doc)?;
    match out {
        Some(path) => io::atomic_write(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_convention() {
        assert_eq!(exit_code(Outcome::Success), 0);
        assert_eq!(exit_code(Outcome::CertificateFailure), 2);
    }

    #[test]
    fn box_specs_parse_per_axis() {
        let b = parse_box("0:1,-2:3.5").unwrap();
        assert_eq!(b.lo(), &[0.0, -2.0]);
        assert_eq!(b.hi(), &[1.0, 3.5]);
        assert!(parse_box("0:1,oops:2").is_err());
        assert!(parse_box("0,1").is_err());
        // lo >= hi is the box's own invariant.
        assert!(parse_box("1:1").is_err());
    }

    #[test]
    fn level_ranges_parse_both_forms() {
        assert_eq!(parse_levels("2..8").unwrap(), (2, 8));
        assert_eq!(parse_levels(" 0..3 ").unwrap(), (0, 3));
        assert_eq!(parse_levels("8").unwrap(), (2, 8));
        assert_eq!(parse_levels("1").unwrap(), (1, 1));
        assert!(parse_levels("5..3").is_err());
        assert!(parse_levels("a..b").is_err());
    }

    #[test]
    fn config_json_round_trips_and_rejects_unknown_keys() {
        let cfg = JobConfig {
            command: CommandKind::Converge,
            input: None,
            meta: None,
            builtin: Some("paraboloid1d".into()),
            sig: Some("+1".into()),
            box_spec: None,
            norm: Some(NormArg::Sup),
            levels: Some("2..6".into()),
            target: Some(1e-4),
            tol: None,
            bregman: None,
            trials: None,
            seed: 7,
            at: None,
            out: Some(PathBuf::from("report.json")),
        };
        let text = io::to_json_string(&cfg).unwrap();
        assert!(text.contains("\"command\":\"converge\""));
        assert!(text.contains("\"norm\":\"sup\""));
        // Skipped options stay out of the document entirely.
        assert!(!text.contains("bregman"));
        let back: JobConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.builtin.as_deref(), Some("paraboloid1d"));
        assert_eq!(back.norm, Some(NormArg::Sup));
        assert_eq!(back.seed, 7);

        let bad = r#"{"command":"fit","inptu":"x.csv"}"#;
        assert!(serde_json::from_str::<JobConfig>(bad).is_err());
    }

    #[test]
    fn source_resolution_rejects_bad_combinations() {
        let base = JobConfig {
            command: CommandKind::Converge,
            input: None,
            meta: None,
            builtin: None,
            sig: Some("+1".into()),
            box_spec: None,
            norm: None,
            levels: None,
            target: None,
            tol: None,
            bregman: None,
            trials: None,
            seed: 0,
            at: None,
            out: None,
        };
        assert!(matches!(
            resolve_source(&base),
            Err(Error::InvalidInput(ref m)) if m.contains("field source")
        ));

        let mut unknown = base.clone();
        unknown.builtin = Some("frobnicate".into());
        assert!(matches!(
            resolve_source(&unknown),
            Err(Error::InvalidInput(ref m)) if m.contains("unknown builtin")
        ));

        let mut both = base.clone();
        both.builtin = Some("paraboloid1d".into());
        both.input = Some(PathBuf::from("x.csv"));
        assert!(resolve_source(&both).is_err());

        let mut wrong_dim = base;
        wrong_dim.builtin = Some("saddle".into());
        wrong_dim.sig = Some("+1".into());
        assert!(matches!(
            resolve_source(&wrong_dim),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn builtin_source_carries_unit_weight_bounds() {
        let cfg = JobConfig {
            command: CommandKind::Point,
            input: None,
            meta: None,
            builtin: Some("steps1d".into()),
            sig: Some("+1".into()),
            box_spec: Some("0:2".into()),
            norm: None,
            levels: None,
            target: None,
            tol: None,
            bregman: None,
            trials: None,
            seed: 0,
            at: Some(vec![0.5]),
            out: None,
        };
        let src = resolve_source(&cfg).unwrap();
        assert_eq!(src.weight_bounds, Some((1.0, 1.0)));
        assert_eq!(src.f.domain().hi(), &[2.0]);
        assert_eq!(src.label, "steps1d");
    }
}
