//! The `lsjm` command line.
//!
//! Exit codes: 0 success, 1 input or usage error (nothing is written),
//! 2 the selected restart hit `--max-iters` (outputs are still written).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    arrows_csv, ellipses_csv, fingerprint, parse_edge_list, positions_csv, sha256_hex, svg_scatter,
    ModelArtifact, PositionLayer, ScatterPlot,
};
use crate::lsjm::{align_or_identity, fit_lsjm, LsjmFit};
use crate::lsm::{fit_lsm, FitConfig, FitReport, PriorConfig, ViewVariationalState};
use crate::network::{build_multiplex, MultiplexNetwork, NodeSet};
use crate::predict::{
    in_sample_roc, run_cv, threshold_tau, CvMode, CvPlan, CvReport, Estimator,
    LinkProbabilityMatrix, ProbabilitySource, RocResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lsjm",
    version,
    about = "Latent space models for single and multiplex networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a single-view latent space model.
    FitLsm {
        /// Edge list of the view.
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit the joint model to one or more views over the same nodes.
    FitLsjm {
        /// One edge list per view; the first is the rotation reference.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also fit each view separately and rotate it onto the joint fit.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// K-fold cross-validation of held-out dyads or nodes.
    CrossValidate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Dyads)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Lsjm)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Dyads,
    Nodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Lsjm,
    Lsm,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub prior_xi: f64,
    #[arg(long, default_value_t = 2.0)]
    pub prior_psi2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[arg(long, default_value_t = 10)]
    pub min_iters: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, default_value = "lsjm-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

impl CommonArgs {
    fn prior(&self) -> PriorConfig {
        PriorConfig {
            xi: self.prior_xi,
            psi2: self.prior_psi2,
            sigma2: self.sigma2,
            dim: self.dim,
        }
    }

    fn config(&self) -> FitConfig {
        FitConfig {
            tol: self.tol,
            min_iters: self.min_iters,
            max_iters: self.max_iters,
            restarts: self.restarts,
            seed: self.seed,
            ..FitConfig::default()
        }
    }
}

struct Input {
    path: PathBuf,
    bytes: Vec<u8>,
}

struct Loaded {
    inputs: Vec<Input>,
    multiplex: MultiplexNetwork,
    labels: Vec<String>,
}

fn load(paths: &[PathBuf]) -> Result<Loaded> {
    let mut inputs = Vec::new();
    let mut docs = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::MalformedLine {
            line: 0,
            text: format!("{} is not UTF-8", path.display()),
        })?;
        let doc = parse_edge_list(&text).map_err(|e| in_file(path, e))?;
        docs.push(doc);
        inputs.push(Input {
            path: path.clone(),
            bytes,
        });
    }
    let nodes = docs[0].nodes.clone();
    let mut labels = Vec::new();
    let mut views = Vec::new();
    for (doc, input) in docs.into_iter().zip(&inputs) {
        if doc.nodes != nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} has a different node set than {}",
                input.path.display(),
                inputs[0].path.display()
            )));
        }
        let label = if doc.view.label().is_empty() {
            input
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        } else {
            doc.view.label().to_string()
        };
        let mut view = doc.view;
        view.set_label(label.clone());
        labels.push(label);
        views.push(view);
    }
    Ok(Loaded {
        multiplex: build_multiplex(nodes, views)?,
        inputs,
        labels,
    })
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::MalformedLine { line, text } => Error::MalformedLine {
            line,
            text: format!("{text}` in `{}", path.display()),
        },
        other => other,
    }
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    fingerprint: String,
    inputs: Vec<ManifestInput>,
    options: &'a CommonArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvOptions>,
    baseline: bool,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct CvOptions {
    mode: ModeArg,
    estimator: EstimatorArg,
    folds: usize,
}

/// Collects named outputs and writes them in one go once everything has
/// been computed.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    fn write(self, dir: &Path, manifest: Manifest<'_>) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = manifest;
        manifest.outputs = self.files.iter().map(|(n, _)| n.clone()).collect();
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        }
        let text = toml::to_string(&manifest).map_err(|e| Error::Artifact(e.to_string()))?;
        let path = dir.join("manifest.toml");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn manifest<'a>(command: &'static str, loaded: &Loaded, options: &'a CommonArgs) -> Manifest<'a> {
    Manifest {
        tool: "lsjm",
        version: env!("CARGO_PKG_VERSION"),
        command,
        fingerprint: input_fingerprint(loaded),
        inputs: loaded
            .inputs
            .iter()
            .map(|i| ManifestInput {
                path: i.path.display().to_string(),
                sha256: sha256_hex(&i.bytes),
            })
            .collect(),
        options,
        cv: None,
        baseline: false,
        outputs: Vec::new(),
    }
}

fn input_fingerprint(loaded: &Loaded) -> String {
    fingerprint(loaded.inputs.iter().map(|i| i.bytes.as_slice()))
}

fn trace_csv(report: &FitReport) -> String {
    let mut s = String::from("iteration,objective\n");
    for (i, v) in report.objective_trace.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, v);
    }
    s
}

fn restarts_csv(report: &FitReport) -> String {
    let mut s =
        String::from("restart,initial_objective,final_objective,iterations,converged,failure\n");
    for r in &report.restarts {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.restart,
            r.initial_objective,
            r.final_objective,
            r.iterations,
            r.converged,
            r.failure.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    s
}

fn roc_csv(curves: &[(&str, &RocResult)]) -> String {
    let mut s = String::from("view,fpr,tpr\n");
    for (label, roc) in curves {
        for (x, y) in &roc.points {
            let _ = writeln!(s, "{label},{x},{y}");
        }
    }
    s
}

#[derive(Serialize)]
struct ViewSummary {
    view: String,
    xi_tilde: f64,
    psi2_tilde: f64,
    in_sample_auc: f64,
    tau: f64,
}

#[derive(Serialize)]
struct FitSummary {
    model: &'static str,
    converged: bool,
    iterations: usize,
    best_restart: usize,
    final_objective: f64,
    repairs_total: u64,
    views: Vec<ViewSummary>,
}

fn view_summary(
    label: &str,
    k: usize,
    multiplex: &MultiplexNetwork,
    state: &ViewVariationalState,
) -> Result<(ViewSummary, RocResult)> {
    let probs = LinkProbabilityMatrix::from_positions(
        k,
        &state.positions,
        state.xi_tilde,
        ProbabilitySource::PerView,
    );
    let roc = in_sample_roc(&probs, multiplex.view(k))?;
    Ok((
        ViewSummary {
            view: label.to_string(),
            xi_tilde: state.xi_tilde,
            psi2_tilde: state.psi2_tilde,
            in_sample_auc: roc.auc,
            tau: threshold_tau(&probs, multiplex.view(k))?,
        },
        roc,
    ))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Artifact(e.to_string()))
}

fn file_stem(k: usize) -> String {
    format!("view{}", k + 1)
}

fn plot(title: &str, nodes: &NodeSet, positions: &DMatrix<f64>, cov: &DMatrix<f64>) -> String {
    svg_scatter(&ScatterPlot::from_positions(title, nodes, positions, cov))
}

fn cmd_fit_lsm(input: &Path, common: &CommonArgs) -> Result<i32> {
    let loaded = load(&[input.to_path_buf()])?;
    let prior = common.prior();
    let config = common.config();
    let view = loaded.multiplex.view(0);
    let (state, report) = fit_lsm(view, &prior, &config)?;
    let nodes = loaded.multiplex.nodes();
    let label = loaded.labels[0].as_str();
    let mut out = Outputs::default();
    let artifact = ModelArtifact::from_lsm(
        nodes,
        label,
        &state,
        &prior,
        &config,
        &report,
        input_fingerprint(&loaded),
    );
    out.add("model.toml", artifact.to_toml_string()?);
    out.add("trace.csv", trace_csv(&report));
    out.add("restarts.csv", restarts_csv(&report));
    let summary = view_summary(label, 0, &loaded.multiplex, &state);
    let mut views = Vec::new();
    match summary {
        Ok((s, roc)) => {
            out.add("roc.csv", roc_csv(&[(label, &roc)]));
            views.push(s);
        }
        Err(e) => log::warn!("no in-sample ROC: {e}"),
    }
    out.add(
        "report.toml",
        to_toml(&FitSummary {
            model: "lsm",
            converged: report.converged,
            iterations: report.iterations,
            best_restart: report.best_restart,
            final_objective: report.final_objective(),
            repairs_total: report.repairs.total(),
            views,
        })?,
    );
    let layer = PositionLayer {
        view: label,
        source: "per_view",
        positions: &state.positions,
        cov: &state.cov,
    };
    out.add("positions.csv", positions_csv(nodes, &[layer])?);
    if let Some(e) = ellipses_csv(nodes, &[layer])? {
        out.add("ellipses.csv", e);
        out.add(
            format!("{}.svg", file_stem(0)),
            plot(label, nodes, &state.positions, &state.cov),
        );
    }
    out.write(&common.out, manifest("fit-lsm", &loaded, common))?;
    Ok(if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn lsjm_outputs(loaded: &Loaded, fit: &LsjmFit, out: &mut Outputs) -> Result<()> {
    let nodes = loaded.multiplex.nodes();
    let mut layers: Vec<PositionLayer<'_>> = fit
        .view_states
        .iter()
        .zip(&loaded.labels)
        .map(|(s, l)| PositionLayer {
            view: l,
            source: "per_view",
            positions: &s.positions,
            cov: &s.cov,
        })
        .collect();
    layers.push(PositionLayer {
        view: "fused",
        source: "fused",
        positions: &fit.fused.positions_bar,
        cov: &fit.fused.cov_bar,
    });
    out.add("positions.csv", positions_csv(nodes, &layers)?);
    if let Some(e) = ellipses_csv(nodes, &layers)? {
        out.add("ellipses.csv", e);
        for (k, s) in fit.view_states.iter().enumerate() {
            out.add(
                format!("{}.svg", file_stem(k)),
                plot(&loaded.labels[k], nodes, &s.positions, &s.cov),
            );
        }
        out.add(
            "fused.svg",
            plot("fused", nodes, &fit.fused.positions_bar, &fit.fused.cov_bar),
        );
        let first = &fit.view_states[0].positions;
        let last = &fit.view_states[fit.view_states.len() - 1].positions;
        out.add("arrows.csv", arrows_csv(nodes, first, last)?);
        let mut arrows =
            ScatterPlot::from_positions("arrows", nodes, first, &fit.view_states[0].cov);
        arrows.ellipse = None;
        arrows.arrows = (0..first.nrows())
            .map(|i| ((first[(i, 0)], first[(i, 1)]), (last[(i, 0)], last[(i, 1)])))
            .collect();
        out.add("arrows.svg", svg_scatter(&arrows));
    }
    Ok(())
}

fn cmd_fit_lsjm(inputs: &[PathBuf], baseline: bool, common: &CommonArgs) -> Result<i32> {
    let loaded = load(inputs)?;
    let k = loaded.multiplex.k();
    let priors = vec![common.prior(); k];
    let config = common.config();
    let fit = fit_lsjm(&loaded.multiplex, &priors, &config)?;
    let nodes = loaded.multiplex.nodes();
    let labels: Vec<&str> = loaded.labels.iter().map(String::as_str).collect();
    let mut out = Outputs::default();
    let artifact =
        ModelArtifact::from_lsjm(nodes, &labels, &fit, &config, input_fingerprint(&loaded));
    out.add("model.toml", artifact.to_toml_string()?);
    out.add("trace.csv", trace_csv(&fit.report));
    out.add("restarts.csv", restarts_csv(&fit.report));
    let mut views = Vec::new();
    let mut rocs = Vec::new();
    for (idx, state) in fit.view_states.iter().enumerate() {
        match view_summary(labels[idx], idx, &loaded.multiplex, state) {
            Ok((s, roc)) => {
                views.push(s);
                rocs.push((labels[idx], roc));
            }
            Err(e) => log::warn!("no in-sample ROC for {}: {e}", labels[idx]),
        }
    }
    let curves: Vec<(&str, &RocResult)> = rocs.iter().map(|(l, r)| (*l, r)).collect();
    out.add("roc.csv", roc_csv(&curves));
    out.add(
        "report.toml",
        to_toml(&FitSummary {
            model: "lsjm",
            converged: fit.report.converged,
            iterations: fit.report.iterations,
            best_restart: fit.report.best_restart,
            final_objective: fit.report.final_objective(),
            repairs_total: fit.report.repairs.total(),
            views,
        })?,
    );
    lsjm_outputs(&loaded, &fit, &mut out)?;
    let mut all_converged = fit.report.converged;
    if baseline {
        let mut states = Vec::new();
        for (idx, view) in loaded.multiplex.views().iter().enumerate() {
            let (mut state, report) = fit_lsm(view, &priors[idx], &config)?;
            all_converged &= report.converged;
            let r = align_or_identity(&fit.fused.positions_bar, &state.positions);
            state.rotate(&r);
            let artifact = ModelArtifact::from_lsm(
                nodes,
                labels[idx],
                &state,
                &priors[idx],
                &config,
                &report,
                fingerprint([loaded.inputs[idx].bytes.as_slice()]),
            );
            out.add(
                format!("baseline_{}.toml", file_stem(idx)),
                artifact.to_toml_string()?,
            );
            states.push(state);
        }
        let layers: Vec<PositionLayer<'_>> = states
            .iter()
            .zip(&labels)
            .map(|(s, l)| PositionLayer {
                view: l,
                source: "single_lsm",
                positions: &s.positions,
                cov: &s.cov,
            })
            .collect();
        out.add("baseline_positions.csv", positions_csv(nodes, &layers)?);
        if let Some(e) = ellipses_csv(nodes, &layers)? {
            out.add("baseline_ellipses.csv", e);
            for (idx, s) in states.iter().enumerate() {
                out.add(
                    format!("baseline_{}.svg", file_stem(idx)),
                    plot(labels[idx], nodes, &s.positions, &s.cov),
                );
            }
        }
    }
    let mut m = manifest("fit-lsjm", &loaded, common);
    m.baseline = baseline;
    out.write(&common.out, m)?;
    Ok(if all_converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize)]
struct FoldRow {
    fold: usize,
    view: String,
    tau: f64,
    held_out: u64,
    misclassification: f64,
    auc: Option<f64>,
    failure: Option<String>,
}

#[derive(Serialize)]
struct CvViewRow {
    view: String,
    misclassification: f64,
    auc: Option<f64>,
    true_positive: u64,
    false_positive: u64,
    true_negative: u64,
    false_negative: u64,
}

#[derive(Serialize)]
struct CvSummary {
    mode: ModeArg,
    estimator: EstimatorArg,
    folds: usize,
    failed_folds: usize,
    views: Vec<CvViewRow>,
    fold_results: Vec<FoldRow>,
}

fn cv_summary(
    report: &CvReport,
    labels: &[String],
    mode: ModeArg,
    estimator: EstimatorArg,
    folds: usize,
) -> CvSummary {
    CvSummary {
        mode,
        estimator,
        folds,
        failed_folds: report.failed_folds(),
        views: report
            .views
            .iter()
            .map(|v| CvViewRow {
                view: labels[v.view].clone(),
                misclassification: v.misclassification,
                auc: v.roc.as_ref().map(|r| r.auc),
                true_positive: v.confusion.true_positive,
                false_positive: v.confusion.false_positive,
                true_negative: v.confusion.true_negative,
                false_negative: v.confusion.false_negative,
            })
            .collect(),
        fold_results: report
            .folds
            .iter()
            .map(|f| FoldRow {
                fold: f.fold,
                view: labels[f.view].clone(),
                tau: f.tau,
                held_out: f.confusion.total(),
                misclassification: f.confusion.misclassification(),
                auc: f.auc,
                failure: f.failure.clone(),
            })
            .collect(),
    }
}

fn cmd_cross_validate(
    inputs: &[PathBuf],
    mode: ModeArg,
    estimator: EstimatorArg,
    folds: usize,
    common: &CommonArgs,
) -> Result<i32> {
    let loaded = load(inputs)?;
    let priors = vec![common.prior(); loaded.multiplex.k()];
    let cv_mode = match mode {
        ModeArg::Dyads => CvMode::Dyads,
        ModeArg::Nodes => CvMode::Nodes,
    };
    let est = match estimator {
        EstimatorArg::Lsjm => Estimator::Lsjm,
        EstimatorArg::Lsm => Estimator::SingleLsmPerView,
    };
    if cv_mode == CvMode::Nodes && est != Estimator::Lsjm {
        return Err(Error::InvalidPlan(
            "--mode nodes requires --estimator lsjm".into(),
        ));
    }
    let plan = CvPlan::new(&loaded.multiplex, cv_mode, folds, common.seed)?;
    let report = run_cv(&loaded.multiplex, &priors, &common.config(), &plan, est)?;
    let mut out = Outputs::default();
    out.add(
        "cv.toml",
        to_toml(&cv_summary(&report, &loaded.labels, mode, estimator, folds))?,
    );
    let curves: Vec<(&str, &RocResult)> = report
        .views
        .iter()
        .filter_map(|v| v.roc.as_ref().map(|r| (loaded.labels[v.view].as_str(), r)))
        .collect();
    out.add("roc.csv", roc_csv(&curves));
    let mut m = manifest("cross-validate", &loaded, common);
    m.cv = Some(CvOptions {
        mode,
        estimator,
        folds,
    });
    out.write(&common.out, m)?;
    Ok(EXIT_OK)
}

fn init_threads() {
    if let Some(n) = std::env::var("LSJM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::debug!("thread pool already initialised");
        }
    }
}

/// Runs a parsed command and returns its exit code; errors are printed to
/// stderr.
pub fn run(cli: Cli) -> i32 {
    init_threads();
    let result = match &cli.command {
        Command::FitLsm { input, common } => cmd_fit_lsm(input, common),
        Command::FitLsjm {
            inputs,
            baseline,
            common,
        } => cmd_fit_lsjm(inputs, *baseline, common),
        Command::CrossValidate {
            inputs,
            mode,
            estimator,
            folds,
            common,
        } => cmd_cross_validate(inputs, *mode, *estimator, *folds, common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}
