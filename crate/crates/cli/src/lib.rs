//! Driver for the verification suites.
//!
//! Every list-valued flag takes comma-separated values; the cartesian product
//! of cases runs in parallel and the report is merged in case-key order.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdiv_geodecomp::assembly::{self, AssemblyOptions};
use hdiv_geodecomp::dofs::{self, Element, QuotientMode};
use hdiv_geodecomp::element::{self, Family};
use hdiv_geodecomp::mesh;
use hdiv_geodecomp::report::{Check, CheckStatus, Params, Report};
use hdiv_geodecomp::simplex::{FrameConvention, LocalFrames, Simplex, SubSimplexId};
use hdiv_geodecomp::tensor::{self, SuccessorReading};
use hdiv_geodecomp::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "hdiv-geodecomp", version, about = "Exact verification of H(div) finite element constructions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Decompose,
    Unisolvence,
    Bubbles,
    DivImage,
    Assemble,
    Conformity,
    Infsup,
    Dims,
    All,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Geometric decomposition of the shape space
    Decompose(Opts),
    /// DoF matrix certificates
    Unisolvence(Opts),
    /// Trace kernel equals the bubble span
    Bubbles(Opts),
    /// Range of div on the bubble space
    DivImage(Opts),
    /// Global space on a mesh with dimension and locality checks
    Assemble(Opts),
    /// Normal-trace continuity plus the flipped-normal control
    Conformity(Opts),
    /// Discrete inf-sup constant over uniform refinements
    Infsup(Opts),
    /// Assembled dimension against the closed form
    Dims(Opts),
    /// Every applicable suite
    All(Opts),
}

impl Command {
    fn split(&self) -> (Suite, &Opts) {
        match self {
            Self::Decompose(o) => (Suite::Decompose, o),
            Self::Unisolvence(o) => (Suite::Unisolvence, o),
            Self::Bubbles(o) => (Suite::Bubbles, o),
            Self::DivImage(o) => (Suite::DivImage, o),
            Self::Assemble(o) => (Suite::Assemble, o),
            Self::Conformity(o) => (Suite::Conformity, o),
            Self::Infsup(o) => (Suite::Infsup, o),
            Self::Dims(o) => (Suite::Dims, o),
            Self::All(o) => (Suite::All, o),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// lagrange, vector, face, traceless or symmetric
    #[arg(long, value_delimiter = ',', default_value = "face", value_parser = parse_family)]
    pub family: Vec<Family>,
    /// Spatial dimension; taken from the mesh when omitted for mesh suites
    #[arg(long, value_delimiter = ',')]
    pub dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub degree: Vec<usize>,
    /// Extra smoothness index; -1 means none
    #[arg(long, value_delimiter = ',', default_value = "-1", allow_hyphen_values = true)]
    pub k: Vec<i32>,
    /// Builtin mesh name, refine(<name>), or a JSON mesh file
    #[arg(long, value_delimiter = ',')]
    pub mesh: Vec<String>,
    #[arg(long, default_value = "orthogonalized", value_parser = parse_frame)]
    pub frame: FrameConvention,
    /// Report path; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Seed for random rational sample points
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core
    #[arg(long, env = "HDIV_GEODECOMP_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Refinement levels for infsup
    #[arg(long)]
    pub levels: Option<usize>,
    /// Random sample points per facet for conformity
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    /// Include wall-clock timings (makes output non-reproducible)
    #[arg(long)]
    pub timings: bool,
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        format!("unknown family `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_frame(s: &str) -> Result<FrameConvention, String> {
    FrameConvention::parse(s).ok_or_else(|| {
        let names: Vec<&str> = FrameConvention::ALL.iter().map(|c| c.name()).collect();
        format!("unknown frame convention `{s}` (expected one of {})", names.join(", "))
    })
}

/// Argument, computation or output failure, tagged with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Inadmissible(_)
            | Error::Unsupported(_)
            | Error::UnknownMesh(_)
            | Error::MeshFile(_)
            | Error::DimensionMismatch(_)
            | Error::NonConforming(_) => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        };
        Self { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

/// One independent unit of work.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Case {
    pub mesh: Option<String>,
    pub family: Family,
    pub n: usize,
    pub r: usize,
    pub k: i32,
}

impl Case {
    pub fn key(&self) -> String {
        let base = format!("{}/n{}/r{}/k{}", self.family.name(), self.n, self.r, self.k);
        match &self.mesh {
            Some(m) => format!("{m}:{base}"),
            None => base,
        }
    }
}

fn is_mesh_suite(s: Suite) -> bool {
    matches!(s, Suite::Assemble | Suite::Conformity | Suite::Infsup | Suite::Dims)
}

fn cases(suite: Suite, o: &Opts) -> Result<Vec<Case>, Failure> {
    let mut meshes: Vec<Option<(String, usize)>> = Vec::new();
    let wants_mesh = is_mesh_suite(suite) || (suite == Suite::All && !o.mesh.is_empty());
    if wants_mesh {
        let names: Vec<String> = if o.mesh.is_empty() {
            if o.dim.is_empty() {
                return Err(usage("mesh suites need --mesh or --dim"));
            }
            o.dim.iter().map(|&n| mesh::default_mesh_name(n).to_string()).collect()
        } else {
            o.mesh.clone()
        };
        for name in names {
            let d = mesh::builtin(&name)?.dim();
            if !o.dim.is_empty() && !o.dim.contains(&d) {
                return Err(usage(format!("mesh `{name}` has dimension {d}, not in --dim")));
            }
            meshes.push(Some((name, d)));
        }
    } else {
        if o.dim.is_empty() {
            return Err(usage("--dim is required"));
        }
        meshes.extend(o.dim.iter().map(|_| None));
    }
    let mut out = Vec::new();
    for (i, m) in meshes.iter().enumerate() {
        let n = m.as_ref().map_or_else(|| o.dim[i], |(_, d)| *d);
        for &family in &o.family {
            for &r in &o.degree {
                for &k in &o.k {
                    out.push(Case { mesh: m.as_ref().map(|(s, _)| s.clone()), family, n, r, k });
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn element_checks(suite: Suite, case: &Case, frame: FrameConvention) -> Result<Vec<Check>, Failure> {
    let Case { family, n, r, k, .. } = *case;
    family.check_dim(n)?;
    let t = Simplex::reference(n);
    let fr = LocalFrames::new(&t, frame);
    let all = suite == Suite::All;
    let mut checks = Vec::new();
    if suite == Suite::Decompose || all {
        checks.push(element::verify_decomposition(&element::decompose(family, &t, r, &fr)?));
    }
    if suite == Suite::Unisolvence || all {
        let e = Element::new(family, &t, r, k, &fr)?;
        checks.push(dofs::certify(&e.dofs, &e.basis)?.to_check());
        if family == Family::Lagrange {
            let ok = dofs::block_lower_triangular(&e.dofs, &e.basis)?;
            checks.push(Check::new(
                format!("block_triangular/{}/n{n}/r{r}", family.name()),
                CheckStatus::from_bool(ok),
                json!({"ordering": "site dimension"}),
            ));
        }
        if family.is_hdiv() {
            let ok = dofs::tangential_annihilation(&e.dofs, &e.basis);
            checks.push(Check::new(
                format!("tangential_annihilation/{}/n{n}/r{r}/k{k}", family.name()),
                CheckStatus::from_bool(ok),
                json!({"dofs": e.dofs.len()}),
            ));
        }
        if all && family.is_hdiv() && n >= 2 && !(family == Family::Symmetric && k > 0) {
            for i in 0..=n {
                checks.push(dofs::verify_merge(&e, &SubSimplexId::facet(i, n), &fr)?);
            }
        }
    }
    let bubbles_apply = family != Family::Lagrange;
    if suite == Suite::Bubbles || (all && bubbles_apply) {
        checks.push(element::verify_bubble_characterization(family, &t, r, &fr)?);
    }
    if suite == Suite::DivImage || (all && family.is_hdiv()) {
        checks.push(element::verify_div_image(family, &t, r, &fr)?);
    }
    if all && family == Family::Traceless {
        let d = tensor::traceless_gradient_basis(&t, SuccessorReading::ModNPlusOne)?;
        let ok = d.basis.len() == n * n - 1 && d.is_kronecker() && d.all_traceless(n);
        checks.push(Check::new(
            format!("traceless_dual/n{n}"),
            CheckStatus::from_bool(ok),
            json!({"basis_size": d.basis.len(), "kronecker": d.is_kronecker()}),
        ));
    }
    if all && family == Family::Face && k >= 0 && n >= 2 {
        for mode in [QuotientMode::ModP0, QuotientMode::ModP1] {
            checks.push(dofs::verify_quotient_unisolvence(n, r, k, mode)?);
        }
    }
    Ok(checks)
}

fn mesh_checks(suite: Suite, case: &Case, o: &Opts) -> Result<Vec<Check>, Failure> {
    let Case { family, r, k, .. } = *case;
    let name = case.mesh.as_deref().expect("mesh case");
    let m = mesh::builtin(name)?;
    let all = suite == Suite::All;
    let space = assembly::assemble(&m, family, r, k, &AssemblyOptions::default())?;
    let mut checks = vec![assembly::check_dimension(&space)];
    if suite == Suite::Assemble || all {
        checks.push(assembly::check_locality(&space));
    }
    if suite == Suite::Conformity || all {
        checks.push(assembly::check_conformity(&space, o.samples, o.seed));
        if family.is_hdiv() && r >= 2 {
            checks.push(assembly::negative_control(&m, family, r, k, o.seed)?);
        }
    }
    if (suite == Suite::Infsup || all) && family.is_hdiv() {
        checks.push(assembly::check_div_onto(&space)?);
        let levels = o.levels.unwrap_or(if m.dim() == 2 { 3 } else { 2 });
        checks.push(assembly::infsup_sweep(&m, levels, family, r, k)?);
    } else if suite == Suite::Infsup {
        return Err(usage(format!("infsup needs an H(div) family, got {}", family.name())));
    }
    for c in &mut checks {
        c.name = format!("{name}:{}", c.name);
    }
    Ok(checks)
}

fn run_case(suite: Suite, case: &Case, o: &Opts) -> Result<Vec<Check>, Failure> {
    if case.mesh.is_some() {
        let mut checks = if suite == Suite::All { element_checks(suite, case, o.frame)? } else { Vec::new() };
        checks.extend(mesh_checks(suite, case, o)?);
        Ok(checks)
    } else {
        element_checks(suite, case, o.frame)
    }
}

fn params(suite: Suite, o: &Opts) -> Params {
    let mut p = BTreeMap::new();
    let suite_name = json!(format!("{suite:?}").to_lowercase());
    p.insert("suite".into(), suite_name);
    p.insert("family".into(), json!(o.family.iter().map(|f| f.name()).collect::<Vec<_>>()));
    if !o.dim.is_empty() {
        p.insert("n".into(), json!(o.dim));
    }
    p.insert("r".into(), json!(o.degree));
    p.insert("k".into(), json!(o.k));
    if !o.mesh.is_empty() {
        p.insert("mesh".into(), json!(o.mesh));
    }
    p.insert("frame".into(), json!(o.frame.name()));
    p.insert("seed".into(), json!(o.seed));
    if let Some(l) = o.levels {
        p.insert("levels".into(), json!(l));
    }
    p
}

/// Builds the merged report; the first failing case aborts the run.
pub fn build_report(suite: Suite, o: &Opts) -> Result<Report, Failure> {
    let list = cases(suite, o)?;
    let work = || -> Vec<(String, Result<Vec<Check>, Failure>, f64)> {
        list.par_iter()
            .map(|c| {
                let start = Instant::now();
                let res = run_case(suite, c, o);
                (c.key(), res, start.elapsed().as_secs_f64())
            })
            .collect()
    };
    let results = if o.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(o.jobs)
            .build()
            .map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?
            .install(work)
    } else {
        work()
    };
    let mut report = Report::new(params(suite, o));
    let mut timings = BTreeMap::new();
    for (key, res, secs) in results {
        for c in res.map_err(|f| Failure { message: format!("{key}: {}", f.message), ..f })? {
            report.push(c);
        }
        timings.insert(key, format!("{secs:.3}s"));
    }
    if o.timings {
        report.timings = Some(timings);
    }
    Ok(report)
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One row per check; witness keys become `witness.<key>` columns.
pub fn to_csv(report: &Report) -> Result<String, Failure> {
    let mut keys = std::collections::BTreeSet::new();
    for c in &report.checks {
        if let Value::Object(m) = &c.witness {
            keys.extend(m.keys().cloned());
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["name".to_string(), "status".to_string()];
    header.extend(keys.iter().map(|k| format!("witness.{k}")));
    let internal = |e: csv::Error| Failure { code: EXIT_INTERNAL, message: e.to_string() };
    w.write_record(&header).map_err(internal)?;
    for c in &report.checks {
        let mut row = vec![c.name.clone(), c.status.name().to_string()];
        row.extend(keys.iter().map(|k| c.witness.get(k).map(cell).unwrap_or_default()));
        w.write_record(&row).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// 0 when every non-skipped check passes, 1 otherwise.
pub fn exit_code(report: &Report) -> i32 {
    if report.all_passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn execute(suite: Suite, o: &Opts) -> Result<i32, Failure> {
    let report = build_report(suite, o)?;
    let text = match o.format {
        Format::Json => report.to_json(),
        Format::Csv => to_csv(&report)?,
    };
    match &o.out {
        Some(p) => write_atomic(p, &text)
            .map_err(|e| Failure { code: EXIT_INTERNAL, message: format!("{}: {e}", p.display()) })?,
        None => print!("{text}"),
    }
    for c in report.checks.iter().filter(|c| c.status == CheckStatus::Fail) {
        eprintln!("FAIL {}", c.name);
    }
    Ok(exit_code(&report))
}

/// Parses `argv` and runs the suite; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let (suite, o) = cli.command.split();
    match execute(suite, o) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
