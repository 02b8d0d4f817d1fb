use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hlcone_core::decay::{rate_fit, run, Case, IterationLedger, IterationState, PhiAudit, RateFit, SimConfig, Termination};
use hlcone_core::excess::{excess_csv, volume_excess_with, ExcessOptions, ExcessReport};
use hlcone_core::geometry::{
    audit_special_lagrangian, check_legendrian, induced_metric, inverse_link_metric, link_metric_sqrt_det,
    moment_hamiltonian, su_basis, su_harmonics_rank, CylinderModel, HLLink, SymmetryGenerator,
};
use hlcone_core::lattice::{multiplicity, rigidity_report, FormSpec};
use hlcone_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::scenario::{read_file, Scenario};
use crate::{AuditArgs, AuditKind, ExcessArgs, Format, OutArgs, RigidityArgs, SimulateArgs, SpectrumArgs};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Regime(String),
    Unsupported(String),
    /// A check or audit did not pass, or an internal error.
    Failed(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Failed(_) => 1,
            Self::Usage(_) => 2,
            Self::Regime(_) => 3,
            Self::Unsupported(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(s) | Self::Failed(s) => f.write_str(s),
            Self::Regime(s) => write!(f, "regime exit: {s}"),
            Self::Unsupported(s) => write!(f, "unsupported scope: {s}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Regime { .. } => Self::Regime(msg),
            Error::Unsupported(_) | Error::UnsupportedDimension(_) => Self::Unsupported(msg),
            Error::Input(_) | Error::DimensionMismatch { .. } | Error::Region(_) => Self::Usage(msg),
            _ => Self::Failed(msg),
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Failed(format!("{}: {e}", path.display()))
}

type CmdResult = std::result::Result<(), Failure>;

/// A list of link dimensions, `8`, `3..13` (inclusive) or `3,5,7`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MList(pub Vec<usize>);

impl FromStr for MList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not a dimension: {t:?}"));
        let ms: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty range {s}"));
            }
            (a..=b).collect()
        } else {
            s.split(',').map(num).collect::<Result<_, _>>()?
        };
        if let Some(m) = ms.iter().find(|&&m| m < 3) {
            return Err(format!("m must be at least 3, got {m}"));
        }
        Ok(Self(ms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaSpec {
    Linear,
    Quadratic,
    Value(u64),
}

impl FromStr for LambdaSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            t => t.parse().map(Self::Value).map_err(|_| format!("eigenvalue must be an integer, linear or quadratic, got {t:?}")),
        }
    }
}

/// Prints `body` and, with `--out`, writes it plus a manifest; otherwise the
/// manifest goes to stderr.
fn emit(out: &OutArgs, name: &str, body: &str, mut manifest: RunManifest) -> CmdResult {
    print!("{body}");
    manifest.output(name, body.as_bytes());
    match &out.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            write(&dir.join(name), body.as_bytes())?;
            write(&dir.join("manifest.json"), &to_json(&manifest))
        }
        None => {
            eprintln!("{}", serde_json::to_string(&manifest).expect("manifest serializes"));
            Ok(())
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> CmdResult {
    std::fs::write(path, bytes).map_err(|e| io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("output serializes");
    s.push(b'\n');
    s
}

fn load_config(path: Option<&Path>, manifest: Option<&mut RunManifest>) -> Result<SimConfig, Failure> {
    let Some(path) = path else {
        return Ok(SimConfig::default());
    };
    let (cfg, bytes): (SimConfig, _) = read_file(path).map_err(Failure::Usage)?;
    cfg.validate()?;
    if let Some(m) = manifest {
        m.input(path, &bytes);
    }
    Ok(cfg)
}

pub fn print_config(path: Option<&Path>) -> CmdResult {
    let cfg = load_config(path, None)?;
    let text = toml::to_string(&cfg).map_err(|e| Failure::Failed(e.to_string()))?;
    print!("{text}");
    Ok(())
}

pub fn spectrum(args: &SpectrumArgs, argv: Vec<String>) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        m: usize,
        lambda: u64,
        multiplicity: usize,
    }
    let mut rows = Vec::new();
    for &m in &args.m.0 {
        let form = FormSpec::new(m)?;
        for spec in &args.lambda {
            let lambda = match spec {
                LambdaSpec::Linear => form.linear_eigenvalue(),
                LambdaSpec::Quadratic => form.quadratic_eigenvalue(),
                LambdaSpec::Value(v) => *v,
            };
            rows.push(Row { m, lambda, multiplicity: multiplicity(m, lambda)? });
        }
    }
    let manifest = RunManifest::new(argv, &json!({ "m": args.m.0, "lambda": rows.iter().map(|r| r.lambda).collect::<Vec<_>>() }));
    match args.format {
        Format::Csv => {
            let mut body = String::from("m,lambda,multiplicity\n");
            for r in &rows {
                let _ = writeln!(body, "{},{},{}", r.m, r.lambda, r.multiplicity);
            }
            emit(&args.out, "spectrum.csv", &body, manifest)
        }
        Format::Json => {
            let body = String::from_utf8(to_json(&rows)).expect("utf8");
            emit(&args.out, "spectrum.json", &body, manifest)
        }
    }
}

pub fn rigidity(args: &RigidityArgs, argv: Vec<String>) -> CmdResult {
    let reports = args.m.0.iter().map(|&m| rigidity_report(m)).collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest::new(argv, &json!({ "m": args.m.0 }));
    let body = String::from_utf8(to_json(&reports)).expect("utf8");
    emit(&args.out, "rigidity.json", &body, manifest)
}

/// Chart points on the additive `R_d` low-discrepancy sequence.
fn chart_points(count: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    // phi is the positive root of x^{d+1} = x + 1.
    let phi = (0..64).fold(2.0f64, |x, _| (1.0 + x).powf(1.0 / (dims as f64 + 1.0)));
    let alpha: Vec<f64> = (0..dims).map(|j| phi.powi(-(j as i32 + 1)).fract()).collect();
    let offset = (seed as f64 * 0.618_033_988_749_894_9).fract();
    (0..count)
        .map(|i| alpha.iter().map(|a| 2.0 * PI * ((i as f64 + 1.0) * a + offset).fract()).collect())
        .collect()
}

fn load_scenario(spec: &str, k: usize, m: usize, manifest: &mut RunManifest) -> Result<Scenario, Failure> {
    if spec == "zero" {
        return Ok(Scenario::zero(k, m));
    }
    let path = PathBuf::from(spec);
    let (sc, bytes): (Scenario, _) = read_file(&path).map_err(Failure::Usage)?;
    manifest.input(&path, &bytes);
    Ok(sc)
}

fn excess_reports(sc: &Scenario, radii: &[f64], center: &[f64]) -> Result<Vec<ExcessReport>, Failure> {
    let model = sc.model()?;
    let f = sc.potential()?;
    let opts = ExcessOptions::default();
    Ok(radii.iter().map(|&r| volume_excess_with(&model, &f, r, center, &opts)).collect::<Result<_, _>>()?)
}

pub fn audit(args: &AuditArgs, argv: Vec<String>) -> CmdResult {
    let mut manifest = RunManifest::new(
        argv,
        &json!({
            "what": format!("{:?}", args.what).to_lowercase(),
            "m": args.m, "k": args.k, "samples": args.samples, "seed": args.seed, "tol": args.tol,
            "scenario": args.scenario, "radii": args.radii,
        }),
    );
    let m = args.m;
    let (report, pass) = match args.what {
        AuditKind::Legendrian => {
            let link = HLLink::new(m)?;
            let mut max: f64 = 0.0;
            for theta in chart_points(args.samples, m - 1, args.seed) {
                max = max.max(check_legendrian(&link, &theta, args.tol)?.max_defect);
            }
            let pass = max <= args.tol;
            (json!({ "what": "legendrian", "m": m, "samples": args.samples, "max_defect": max, "pass": pass }), pass)
        }
        AuditKind::Calibration => {
            let model = CylinderModel::new(args.k, m)?;
            let r = audit_special_lagrangian(&model, args.samples, args.seed, args.tol)?;
            let pass = r.pass;
            (json!({ "what": "calibration", "k": args.k, "m": m, "report": r, "pass": pass }), pass)
        }
        AuditKind::Metric => {
            let g = induced_metric(&HLLink::new(m)?);
            let d = m - 1;
            let expected = expected_link_metric(m);
            let mut err: f64 = 0.0;
            for a in 0..d {
                for b in 0..d {
                    err = err.max((g[(a, b)] - expected[a][b]).abs());
                }
            }
            let inv = inverse_link_metric(m);
            let prod = &g * &inv;
            let mut inv_err: f64 = 0.0;
            for a in 0..d {
                for b in 0..d {
                    inv_err = inv_err.max((prod[(a, b)] - if a == b { 1.0 } else { 0.0 }).abs());
                }
            }
            let sqrt_det = g.determinant().sqrt();
            let det_err = (sqrt_det - link_metric_sqrt_det(m)).abs();
            let pass = err.max(inv_err).max(det_err) <= args.tol;
            let rows: Vec<Vec<f64>> = (0..d).map(|a| (0..d).map(|b| g[(a, b)]).collect()).collect();
            (
                json!({
                    "what": "metric", "m": m, "G": rows, "expected": expected, "max_abs_error": err,
                    "inverse_error": inv_err, "sqrt_det": sqrt_det, "sqrt_det_error": det_err, "pass": pass,
                }),
                pass,
            )
        }
        AuditKind::Moment => {
            let model = CylinderModel::new(args.k, m)?;
            let samples = args.samples.max(2 * (m * m - 1));
            let rank = su_harmonics_rank(&model, samples)?;
            // Diagonal generators span the stabilizer t^{m-1}.
            let link = HLLink::new(m)?;
            let basis = su_basis(m);
            let mut stab: f64 = 0.0;
            for theta in chart_points(args.samples, m - 1, args.seed) {
                let z = link.point(&theta)?;
                for a in &basis[basis.len() - (m - 1)..] {
                    stab = stab.max(moment_hamiltonian(&SymmetryGenerator::Rotation(a.clone()), &z)?.abs());
                }
            }
            let expected = m * m - m;
            let pass = rank == expected && stab <= 1e-12;
            (
                json!({
                    "what": "moment", "m": m, "rank": rank, "expected_rank": expected,
                    "stabilizer_max": stab, "pass": pass,
                }),
                pass,
            )
        }
        AuditKind::Excess => {
            let sc = load_scenario(&args.scenario, args.k, m, &mut manifest)?;
            let reports = excess_reports(&sc, &args.radii, &[])?;
            let zero = sc.potential()?.is_zero();
            let monotone = reports.windows(2).all(|w| w[1].monotone_form >= w[0].monotone_form - 1e-8);
            let max_abs = reports.iter().map(|r| r.density_form.abs().max(r.monotone_form.abs())).fold(0.0, f64::max);
            let pass = monotone && (!zero || max_abs <= args.tol);
            (
                json!({
                    "what": "excess", "scenario": sc.name, "reports": reports, "monotone": monotone,
                    "max_abs_excess": max_abs, "pass": pass,
                }),
                pass,
            )
        }
    };
    let body = String::from_utf8(to_json(&report)).expect("utf8");
    emit(&args.out, "audit.json", &body, manifest)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Failed(format!("{:?} audit failed", args.what).to_lowercase()))
    }
}

/// `G = (I + 1 1^T) / m`.
fn expected_link_metric(m: usize) -> Vec<Vec<f64>> {
    let d = m - 1;
    (0..d).map(|a| (0..d).map(|b| if a == b { 2.0 } else { 1.0 } / m as f64).collect()).collect()
}

pub fn excess(args: &ExcessArgs, argv: Vec<String>) -> CmdResult {
    let (sc, bytes): (Scenario, _) = read_file(&args.scenario).map_err(Failure::Usage)?;
    let mut manifest = RunManifest::new(argv, &json!({ "radii": args.radii, "center": args.center }));
    manifest.input(&args.scenario, &bytes);
    let reports = excess_reports(&sc, &args.radii, &args.center)?;
    emit(&args.out, "excess.csv", &excess_csv(&reports), manifest)
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    k: usize,
    m: usize,
    steps: usize,
    cases: BTreeMap<String, usize>,
    out_of_trichotomy_steps: usize,
    termination: &'a Termination,
    audit: &'a PhiAudit,
    rate_fit: Option<RateFit>,
    final_rho: f64,
}

pub fn simulate(args: &SimulateArgs, argv: Vec<String>) -> CmdResult {
    if args.print_config {
        return print_config(args.config.as_deref());
    }
    let scenario_path = args.scenario.as_ref().expect("clap enforces --scenario");
    let mut probe = RunManifest::new(vec![], &());
    let cfg = load_config(args.config.as_deref(), Some(&mut probe))?;
    let mut manifest = RunManifest::new(argv, &cfg);
    manifest.input_hashes = probe.input_hashes;
    let (sc, bytes): (Scenario, _) = read_file(scenario_path).map_err(Failure::Usage)?;
    manifest.input(scenario_path, &bytes);

    // Checked before any quadrature: the initial measurement on a large torus is expensive.
    let rigidity = rigidity_report(sc.m)?;
    if !rigidity.rigid {
        return Err(Failure::Unsupported(format!(
            "C^{}_HL is not rigid (quadratic multiplicity {} against {} rotations)",
            sc.m, rigidity.quadratic_mult, rigidity.su_orbit_dim
        )));
    }
    let state = IterationState::initial(sc.model()?, sc.potential()?, &cfg)?;
    let ledger = run(state, &cfg)?;
    let fit = if ledger.records.len() >= 4 { Some(rate_fit(&ledger, &cfg.hausdorff)?) } else { None };

    let summary = summarize(&sc, &ledger, fit);
    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let outputs = [
        ("ledger.csv", ledger.to_csv().into_bytes()),
        ("ledger.json", to_json(&ledger)),
        ("summary.json", to_json(&summary)),
    ];
    for (name, body) in &outputs {
        write(&dir.join(name), body)?;
        manifest.output(name, body);
    }
    write(&dir.join("manifest.json"), &to_json(&manifest))?;
    print!("{}", String::from_utf8_lossy(&outputs[2].1));

    if let Termination::RegimeExit { step, cause } = &ledger.termination {
        return Err(Failure::Regime(format!("after step {step}: {cause}")));
    }
    if !ledger.audit.pass {
        return Err(Failure::Failed("phi audit failed; see summary.json".into()));
    }
    Ok(())
}

fn summarize<'a>(sc: &'a Scenario, ledger: &'a IterationLedger, rate_fit: Option<RateFit>) -> Summary<'a> {
    let mut cases: BTreeMap<String, usize> = [Case::Case1, Case::Case2, Case::Case3].iter().map(|c| (c.to_string(), 0)).collect();
    for r in &ledger.records {
        *cases.entry(r.case.to_string()).or_default() += 1;
    }
    Summary {
        scenario: &sc.name,
        k: sc.k,
        m: sc.m,
        steps: ledger.records.len(),
        cases,
        out_of_trichotomy_steps: ledger.records.iter().filter(|r| r.out_of_trichotomy).count(),
        termination: &ledger.termination,
        audit: &ledger.audit,
        rate_fit,
        final_rho: ledger.final_state.rho,
    }
}
