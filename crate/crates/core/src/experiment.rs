//! Config-driven experiment runner: parses flat key/value configs, sweeps an
//! `n`-grid, fits rates and writes CSV, JSON summary and plot data.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::conjugation::{
    conjugation_report, fit_localization, localization_and_gaps, ConjugationLab, TestFunctionChi,
};
use crate::eigensolve::{lambda_n_of_j, SectionConfig};
use crate::error::{Error, Result};
use crate::operators::IndexRange;
use crate::oscillatory::{
    bessel_j_series, composition_check, diagonal_comparisons, omega_star, osc_integral, stationary_phase_check,
    translation_check, DiagonalComparison, PeriodicFunction, PhaseFamily, M_DEFAULT, STATIONARY_SLOPE_BOUND,
};
use crate::rates::{fit_rate, RateFit, SlopeCheck};
use crate::sequences::{entry_a, mean_and_deviation, theta_nn, ModelParams};
use crate::validate::{commutator_identities, solver_soundness, trivial_identities, Check};

/// Experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Asymptotics,
    Residual,
    Localization,
    Trace,
    Oscillatory,
    Validate,
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "asymptotics" => Self::Asymptotics,
            "residual" => Self::Residual,
            "localization" => Self::Localization,
            "trace" => Self::Trace,
            "oscillatory" => Self::Oscillatory,
            "validate" => Self::Validate,
            _ => return Err(Error::Config(format!("unknown experiment kind '{s}'"))),
        })
    }
}

/// Grid of `n` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpec {
    List(Vec<i64>),
    Geometric { n_min: i64, n_max: i64, factor: i64 },
}

impl GridSpec {
    pub fn points(&self) -> Vec<i64> {
        match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Geometric { n_min, n_max, factor } => {
                let mut out = Vec::new();
                let mut n = *n_min;
                while n <= *n_max {
                    out.push(n);
                    n *= factor;
                }
                out
            }
        }
    }
}

/// Tolerance keys accepted in `[tolerances]` with their defaults.
pub const TOLERANCE_DEFAULTS: &[(&str, f64)] = &[
    ("eig", 1e-10),
    ("slope_slack", 0.15),
    ("bessel", 1e-8),
    ("composition", 1e-8),
    ("translation", 1e-10),
    ("commutator", 1e-13),
    ("oracle", 1e-10),
];

const OPTION_KEYS: &[&str] = &["kind", "output", "checks", "t0", "mu", "seed", "cases", "composition_n", "min_points"];

/// A parsed experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub grid: Option<GridSpec>,
    pub tolerances: BTreeMap<String, f64>,
    pub kind: ExperimentKind,
    pub output: PathBuf,
    /// Remaining `[experiment]` keys.
    pub options: BTreeMap<String, String>,
}

fn config_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("'{key}': cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse_num(key, x)).collect()
}

impl ExperimentConfig {
    /// Parses the flat `[section]` / `key = value` format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !["model", "grid", "tolerances", "experiment"].contains(&name.as_str()) {
                    return Err(config_err(i + 1, format!("unknown section [{name}]")));
                }
                if sections.contains_key(&name) {
                    return Err(config_err(i + 1, format!("duplicate section [{name}]")));
                }
                sections.insert(name.clone(), Vec::new());
                current = Some(name);
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config_err(i + 1, format!("expected 'key = value', got '{line}'")));
            };
            let Some(sec) = &current else {
                return Err(config_err(i + 1, "key outside any section"));
            };
            let entries = sections.get_mut(sec).expect("section registered");
            let k = k.trim().to_string();
            if entries.iter().any(|(e, _)| *e == k) {
                return Err(config_err(i + 1, format!("duplicate key '{k}'")));
            }
            entries.push((k, v.trim().to_string()));
        }

        let exp = sections.remove("experiment").ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
        let mut options: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in exp {
            if !OPTION_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown [experiment] key '{k}'")));
            }
            options.insert(k, v);
        }
        let kind: ExperimentKind =
            options.remove("kind").ok_or_else(|| Error::Config("missing experiment kind".into()))?.parse()?;
        let output =
            PathBuf::from(options.remove("output").ok_or_else(|| Error::Config("missing experiment output".into()))?);

        let model = match sections.remove("model") {
            Some(pairs) => ModelParams::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .map_err(|e| Error::Config(e.to_string()))?,
            None if kind == ExperimentKind::Validate => ModelParams::jaynes_cummings(0.25, 0.5)?,
            None => return Err(Error::Config("missing [model] section".into())),
        };

        let grid = match sections.remove("grid") {
            Some(pairs) => Some(parse_grid(&pairs)?),
            None if kind == ExperimentKind::Validate => None,
            None => return Err(Error::Config("missing [grid] section".into())),
        };

        let mut tolerances = BTreeMap::new();
        for (k, v) in sections.remove("tolerances").unwrap_or_default() {
            if !TOLERANCE_DEFAULTS.iter().any(|(d, _)| *d == k) {
                return Err(Error::Config(format!("unknown tolerance '{k}'")));
            }
            let x: f64 = parse_num(&k, &v)?;
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("tolerance '{k}' must be positive, got {v}")));
            }
            tolerances.insert(k, x);
        }
        Ok(ExperimentConfig { model, grid, tolerances, kind, output, options })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            TOLERANCE_DEFAULTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).expect("known tolerance key")
        })
    }

    pub fn points(&self) -> Vec<i64> {
        self.grid.as_ref().map(GridSpec::points).unwrap_or_default()
    }

    fn option<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.options.get(key).map_or(Ok(default), |v| parse_num(key, v))
    }

    /// Check names selected by `checks = a, b`; `None` means all.
    fn selected(&self) -> Option<Vec<String>> {
        self.options.get("checks").map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
    }
}

fn parse_grid(pairs: &[(String, String)]) -> Result<GridSpec> {
    let get = |k: &str| pairs.iter().find(|(x, _)| x == k).map(|(_, v)| v.as_str());
    for (k, _) in pairs {
        if !["n", "n_min", "n_max", "factor"].contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown [grid] key '{k}'")));
        }
    }
    let grid = match (get("n"), get("n_min"), get("n_max")) {
        (Some(list), None, None) => GridSpec::List(parse_list("n", list)?),
        (None, Some(lo), Some(hi)) => {
            let factor: i64 = get("factor").map_or(Ok(2), |f| parse_num("factor", f))?;
            if factor < 2 {
                return Err(Error::Config(format!("grid factor must be >= 2, got {factor}")));
            }
            GridSpec::Geometric { n_min: parse_num("n_min", lo)?, n_max: parse_num("n_max", hi)?, factor }
        }
        _ => return Err(Error::Config("[grid] needs either 'n' or both 'n_min' and 'n_max'".into())),
    };
    let pts = grid.points();
    if pts.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    if pts[0] < 1 || pts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("grid must be positive and strictly increasing".into()));
    }
    Ok(grid)
}

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Degenerate,
}

/// One line of the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCheck {
    pub name: String,
    pub status: Status,
    /// Whether the check decides the exit status.
    pub gating: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SlopeCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SummaryCheck {
    fn base(name: &str, status: Status) -> Self {
        SummaryCheck {
            name: name.to_string(),
            status,
            gating: true,
            fit: None,
            mode: None,
            target: None,
            slack: None,
            value: None,
            bound: None,
            note: None,
        }
    }

    /// Fitted slope of `values` over `ns` compared with `target ± slack`.
    pub fn slope(name: &str, ns: &[i64], values: &[f64], mode: SlopeCheck, target: f64, slack: f64) -> Self {
        let mut c = Self::base(name, Status::Degenerate);
        c.mode = Some(mode);
        c.target = Some(target);
        c.slack = Some(slack);
        match fit_rate(ns, values) {
            Ok(fit) => {
                c.status = if mode.passes(fit.slope, target, slack) { Status::Pass } else { Status::Fail };
                c.fit = Some(fit);
            }
            Err(e) => c.note = Some(e.to_string()),
        }
        c
    }

    pub fn bound(name: &str, value: f64, bound: f64) -> Self {
        let mut c = Self::base(name, if value <= bound { Status::Pass } else { Status::Fail });
        c.value = Some(value);
        c.bound = Some(bound);
        c
    }

    pub fn flag(name: &str, ok: bool, note: impl Into<String>) -> Self {
        let mut c = Self::base(name, if ok { Status::Pass } else { Status::Fail });
        c.note = Some(note.into());
        c
    }

    fn from_check(c: &Check) -> Self {
        Self::bound(&c.name, c.value, c.bound)
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub model: ModelParams,
    pub grid: Vec<i64>,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<SummaryCheck>,
    pub passed: bool,
}

/// Artifacts of a run, before they are written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: Summary,
    pub csv: String,
    pub plot: String,
}

impl RunOutcome {
    /// `0` when every gating check passes or is degenerate, else `1`.
    pub fn exit_code(&self) -> i32 {
        if self.summary.passed {
            0
        } else {
            1
        }
    }

    /// Writes `<output>.csv`, `<output>.summary.json` and `<output>.plot.dat`.
    pub fn write(&self, output: &Path) -> Result<[PathBuf; 3]> {
        if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let with = |ext: &str| {
            let mut s = output.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        let paths = [with(".csv"), with(".summary.json"), with(".plot.dat")];
        fs::write(&paths[0], &self.csv)?;
        let json = serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&paths[1], json + "\n")?;
        fs::write(&paths[2], &self.plot)?;
        Ok(paths)
    }
}

fn at(n: i64, op: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtGridPoint { n, op, source: Box::new(e) }
}

/// Runs `f` over the grid in parallel; results come back sorted by `n`.
fn sweep<T: Send>(ns: &[i64], op: &'static str, f: impl Fn(i64) -> Result<T> + Sync) -> Result<Vec<T>> {
    ns.par_iter().map(|&n| f(n).map_err(at(n, op))).collect()
}

fn plot_data(xs: impl IntoIterator<Item = (String, f64)>) -> String {
    xs.into_iter().fold(String::new(), |mut s, (x, y)| {
        let _ = writeln!(s, "{x} {y}");
        s
    })
}

/// `n + ⟨v⟩ + a(n-1)² - a(n)²`.
pub fn asymptotic_predictor(m: &ModelParams, n: i64) -> f64 {
    n as f64 + mean_and_deviation(m).mean + entry_a(n - 1, m).powi(2) - entry_a(n, m).powi(2)
}

/// Number of `i` with `r[i+1] > r[i]`.
fn inversions(r: &[f64]) -> usize {
    r.windows(2).filter(|w| w[1] > w[0]).count()
}

/// Runs the configured experiment and returns its artifacts without writing them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let ns = cfg.points();
    let m = &cfg.model;
    let g = m.gamma;
    let slack = cfg.tol("slope_slack");
    let eig = cfg.tol("eig");
    let chi = TestFunctionChi::new(cfg.option("t0", TestFunctionChi::default().t0)?)?;
    let mut csv = String::new();
    let mut checks = Vec::new();
    let plot;

    match cfg.kind {
        ExperimentKind::Asymptotics => {
            let sc = SectionConfig { tol: eig, ..SectionConfig::default() };
            let rows = sweep(&ns, "finite-section eigenvalue", |n| {
                let lam = lambda_n_of_j(m, n, sc)?;
                Ok((n, lam, asymptotic_predictor(m, n)))
            })?;
            csv.push_str("n,lambda,predictor,remainder,section_size\n");
            let mut rem = Vec::new();
            for (n, lam, p) in &rows {
                let r = (lam.value - p).abs();
                rem.push(r);
                let _ = writeln!(csv, "{n},{},{p},{r},{}", lam.value, lam.size);
            }
            checks.push(SummaryCheck::slope("remainder slope", &ns, &rem, SlopeCheck::AtMost, -g / 2.0, slack));
            let (first, last) = (rem.first().copied().unwrap_or(0.0), rem.last().copied().unwrap_or(0.0));
            checks.push(SummaryCheck::bound("remainder endpoint", last, first));
            checks.push(SummaryCheck::bound("remainder inversions", inversions(&rem) as f64, 1.0));
            plot = plot_data(ns.iter().zip(&rem).map(|(n, r)| (n.to_string(), *r)));
        }
        ExperimentKind::Residual => {
            let reps = sweep(&ns, "conjugation report", |n| conjugation_report(m, n, 0.0, &chi, eig))?;
            csv.push_str(crate::conjugation::ConjugationReport::CSV_HEADER);
            csv.push('\n');
            for r in &reps {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            let col = |f: fn(&crate::conjugation::ConjugationReport) -> f64| reps.iter().map(f).collect::<Vec<_>>();
            let target = 3.0 * g - 2.0;
            let res = col(|r| r.residual_norm);
            checks.push(SummaryCheck::slope("residual slope", &ns, &res, SlopeCheck::Within, target, slack));
            checks.push(SummaryCheck::slope(
                "transfer slope",
                &ns,
                &col(|r| r.transfer_sup),
                SlopeCheck::Within,
                target,
                slack,
            ));
            let mut interior = SummaryCheck::slope(
                "interior residual slope",
                &ns,
                &col(|r| r.interior_residual),
                SlopeCheck::Within,
                target,
                slack,
            );
            interior.gating = false;
            checks.push(interior);
            plot = plot_data(ns.iter().zip(&res).map(|(n, r)| (n.to_string(), *r)));
        }
        ExperimentKind::Localization => {
            let reps = sweep(&ns, "localization", |n| localization_and_gaps(m, n, 0.0, eig))?;
            let fit = fit_localization(m, &reps, cfg.option("min_points", 3usize)?);
            csv.push_str("n,loc_sup,gap_sup\n");
            for r in &reps {
                let _ = writeln!(csv, "{},{},{}", r.n, r.loc_sup, r.gap_sup);
            }
            checks.push(match fit {
                Some(f) => SummaryCheck::flag(
                    "localization",
                    true,
                    format!("inside disjoint intervals for n >= {} with C = {}", f.n0, f.c),
                ),
                None => SummaryCheck::flag("localization", false, "no grid tail with localized spectrum"),
            });
            let gaps: Vec<f64> = reps.iter().map(|r| r.gap_sup).collect();
            checks.push(SummaryCheck::slope("gap slope", &ns, &gaps, SlopeCheck::Within, g - 1.0, slack));
            plot = plot_data(ns.iter().zip(&gaps).map(|(n, r)| (n.to_string(), *r)));
        }
        ExperimentKind::Trace => {
            let rows = sweep(&ns, "trace functional", |n| {
                let lab = ConjugationLab::new(m, n)?;
                Ok((lab.trace_g0(&chi, eig)?, lab.vtilde_diag_max()))
            })?;
            csv.push_str("n,G0,vdiag_max\n");
            for (n, (g0, vd)) in ns.iter().zip(&rows) {
                let _ = writeln!(csv, "{n},{g0},{vd}");
            }
            let g0: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let vd: Vec<f64> = rows.iter().map(|r| r.1).collect();
            checks.push(SummaryCheck::slope("trace slope", &ns, &g0, SlopeCheck::AtMost, -g / 2.0, slack));
            checks.push(SummaryCheck::slope("diagonal slope", &ns, &vd, SlopeCheck::AtMost, -g / 2.0, slack));
            plot = plot_data(ns.iter().zip(&g0).map(|(n, r)| (n.to_string(), r.abs())));
        }
        ExperimentKind::Oscillatory => {
            let rows = sweep(&ns, "diagonal prediction", |n| diagonal_comparisons(&ConjugationLab::new(m, n)?))?;
            csv.push_str(DiagonalComparison::CSV_HEADER);
            csv.push('\n');
            let mut sup = Vec::new();
            for block in &rows {
                for r in block {
                    csv.push_str(&r.csv_row());
                    csv.push('\n');
                }
                sup.push(block.iter().map(DiagonalComparison::defect).fold(0.0, f64::max));
            }
            checks.push(SummaryCheck::slope("prediction slope", &ns, &sup, SlopeCheck::Within, g - 1.0, slack));
            checks.extend(oscillatory_kernel_checks(cfg)?);
            plot = plot_data(ns.iter().zip(&sup).map(|(n, r)| (n.to_string(), *r)));
        }
        ExperimentKind::Validate => {
            let mut all: Vec<Check> = Vec::new();
            let want = |k: &str| cfg.selected().is_none_or(|s| s.iter().any(|x| x == k));
            if want("identities") {
                all.extend(trivial_identities()?);
            }
            if want("solver") {
                all.extend(solver_soundness(
                    cfg.option("seed", 20_240_601u64)?,
                    cfg.option("cases", 200usize)?,
                    cfg.tol("oracle"),
                )?);
            }
            if want("commutators") {
                let ns = if ns.is_empty() { vec![16, 64, 256] } else { ns.clone() };
                all.extend(commutator_identities(m, &ns, cfg.tol("commutator"))?);
            }
            csv.push_str(Check::CSV_HEADER);
            csv.push('\n');
            for c in &all {
                csv.push_str(&c.csv_row());
                csv.push('\n');
                checks.push(SummaryCheck::from_check(c));
            }
            plot = plot_data(all.iter().enumerate().map(|(i, c)| (i.to_string(), c.value)));
        }
    }

    if cfg.kind != ExperimentKind::Validate {
        if let Some(sel) = cfg.selected() {
            for name in &sel {
                if !checks.iter().any(|c| c.name.starts_with(name.as_str())) {
                    return Err(Error::Config(format!("'checks' names unknown check '{name}'")));
                }
            }
            for c in &mut checks {
                c.gating &= sel.iter().any(|s| c.name.starts_with(s.as_str()));
            }
        }
    }
    let passed = checks.iter().filter(|c| c.gating).all(SummaryCheck::passed);
    Ok(RunOutcome {
        summary: Summary {
            kind: cfg.kind,
            model: m.clone(),
            grid: ns,
            tolerances: TOLERANCE_DEFAULTS.iter().map(|(k, _)| (k.to_string(), cfg.tol(k))).collect(),
            checks,
            passed,
        },
        csv,
        plot,
    })
}

/// Quadrature versus the series oracle, the stationary-phase slope, and
/// the composition and translation identities.
fn oscillatory_kernel_checks(cfg: &ExperimentConfig) -> Result<Vec<SummaryCheck>> {
    let mut out = Vec::new();
    let mus: Vec<f64> = match cfg.options.get("mu") {
        Some(v) => parse_list("mu", v)?,
        None => vec![0.5, 1.0, 2.0, 5.0, 10.0, 50.0],
    };
    let one = PeriodicFunction::constant(Complex64::new(1.0, 0.0));
    let mut worst = 0.0f64;
    for &mu in &mus {
        let q = osc_integral(&one, mu, M_DEFAULT)?;
        worst = worst.max((q.value - Complex64::new(TAU * bessel_j_series(0, mu)?, 0.0)).norm());
    }
    out.push(SummaryCheck::bound("bessel agreement", worst, cfg.tol("bessel")));

    let sweep_mu: Vec<f64> = (0..=10).map(|k| 2f64.powi(k)).collect();
    let fit = stationary_phase_check(&one, &sweep_mu)?;
    let mut c = SummaryCheck::bound("stationary slope", fit.slope, STATIONARY_SLOPE_BOUND);
    c.fit = Some(fit);
    out.push(c);

    let n: i64 = cfg.option("composition_n", 48)?;
    let fam = PhaseFamily::new(&cfg.model, n).map_err(at(n, "phase family"))?;
    let omega = omega_star(&cfg.model).first().copied().unwrap_or(PI);
    let psi0 = |j: i64, x: f64| fam.psi_tilde_affine(j, x - omega);
    let cut = |k: i64| theta_nn(k, n);
    let rep = composition_check(&psi0, fam.affine(), &cut, &cut).map_err(at(n, "composition"))?;
    out.push(SummaryCheck::bound("composition defect", rep.defect, cfg.tol("composition")));

    let q = |j: i64, x: f64| theta_nn(j, n) * (Complex64::i() * fam.psi_tilde(j, x)).exp();
    let rows = IndexRange::new(n - n / 3, n + n / 3)?;
    let cols = IndexRange::new(n - n / 2, n + n / 2)?;
    let tr = translation_check(&q, 0.7, rows, cols).map_err(at(n, "translation"))?;
    out.push(SummaryCheck::bound("translation defect", tr, cfg.tol("translation")));
    Ok(out)
}

/// Two-column plot data (`first column`, `column`) from CSV text.
pub fn emit_plot(csv_text: &str, column: &str) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Config(format!("no column '{column}' in {:?}", headers.iter().collect::<Vec<_>>())))?;
    let mut out = String::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        let _ = writeln!(out, "{} {}", &rec[0], &rec[idx]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
# comment line
[model]
gamma = 0.5   # trailing comment
a1 = 0.5
v = -0.25, 0.25

[grid]
n_min = 32
n_max = 256

[tolerances]
slope_slack = 0.1

[experiment]
kind = asymptotics
output = out/basic
";

    #[test]
    fn parses_basic_config() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(c.kind, ExperimentKind::Asymptotics);
        assert_eq!(c.points(), vec![32, 64, 128, 256]);
        assert_eq!(c.tol("slope_slack"), 0.1);
        assert_eq!(c.tol("eig"), 1e-10);
        assert_eq!(c.output, PathBuf::from("out/basic"));
        assert_eq!(c.model.v_table, vec![-0.25, 0.25]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            BASIC.replace("kind = asymptotics", "kind = nonsense"),
            BASIC.replace("slope_slack = 0.1", "slope_slack = -1"),
            BASIC.replace("slope_slack = 0.1", "mystery = 1"),
            BASIC.replace("n_min = 32\nn_max = 256", "n = 64, 32"),
            BASIC.replace("[grid]", "[gird]"),
            BASIC.replace("gamma = 0.5", "gamma = 0.9"),
            BASIC.replace("a1 = 0.5", "a1 0.5"),
            BASIC.replace("output = out/basic", ""),
        ];
        for b in bad {
            assert!(matches!(ExperimentConfig::parse(&b), Err(Error::Config(_))), "{b}");
        }
    }

    #[test]
    fn validate_needs_no_model_or_grid() {
        let c = ExperimentConfig::parse("[experiment]\nkind = validate\noutput = x\nchecks = identities\n").unwrap();
        assert!(c.grid.is_none());
        let out = run_experiment(&c).unwrap();
        assert!(out.summary.passed);
        assert!(out.csv.starts_with("name,value,bound,passed\n"));
    }

    #[test]
    fn degenerate_trace_without_modulation() {
        let text =
            "[model]\ngamma = 0.5\na1 = 0.5\nv = 0\n[grid]\nn = 16, 32, 64\n[experiment]\nkind = trace\noutput = t\n";
        let out = run_experiment(&ExperimentConfig::parse(text).unwrap()).unwrap();
        let trace = &out.summary.checks[0];
        assert_eq!(trace.status, Status::Degenerate);
        assert!(trace.fit.is_none());
        assert!(out.csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn asymptotics_run_is_deterministic() {
        let text = BASIC.replace("n_max = 256", "n_max = 128");
        let c = ExperimentConfig::parse(&text).unwrap();
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.csv.lines().count(), 4);
        assert_eq!(a.plot.lines().count(), 3);
    }

    #[test]
    fn errors_name_the_grid_point() {
        let text = "[model]\ngamma = 0.5\na1 = 0.5\nv = 0.1, -0.1\n[grid]\nn = 2, 40\n[experiment]\nkind = trace\noutput = t\n";
        match run_experiment(&ExperimentConfig::parse(text).unwrap()) {
            Err(Error::AtGridPoint { n: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_check_selection_is_rejected() {
        let text = BASIC.replace("output = out/basic", "output = o\nchecks = nothing");
        let c = ExperimentConfig::parse(&text.replace("n_max = 256", "n_max = 128")).unwrap();
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn emit_plot_selects_column() {
        let csv = "n,a,b\n1,2,3\n4,5,6\n";
        assert_eq!(emit_plot(csv, "b").unwrap(), "1 3\n4 6\n");
        assert!(emit_plot(csv, "c").is_err());
    }

    #[test]
    fn trend_counts_inversions() {
        assert_eq!(inversions(&[3.0, 2.0, 2.5, 1.0]), 1);
        assert_eq!(inversions(&[1.0]), 0);
    }
}
