//! Convergence-study orchestration, CSV output and the self-check suite.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::controls::{l2_error_boundary_control, ControlSpaceKind};
use crate::error::{Error, Result};
use crate::fem::assemble_system;
use crate::fem::norms::{l2_error_boundary_fe, l2_error_volume};
use crate::fem::solve::solve_state;
use crate::manufactured::{self, ManufacturedCase};
use crate::mesh::{generate_mesh, validate, AngleCase, Mesh};
use crate::ocp::OcpProblem;

/// What a study measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// Solve the discrete control problem per level; record control and
    /// state errors against the reference optimum.
    Control,
    /// Solve the state equation with the exact adjoint data per level
    /// (its Ritz projection); record the boundary-trace error.
    Trace,
    /// Both of the above.
    All,
}

impl StudyKind {
    pub fn from_label(s: &str) -> Result<StudyKind> {
        match s {
            "control" => Ok(StudyKind::Control),
            "trace" => Ok(StudyKind::Trace),
            "all" => Ok(StudyKind::All),
            other => Err(Error::Config(format!(
                "unsupported study kind '{other}' (expected control, trace or all)"
            ))),
        }
    }
}

/// Full study configuration.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub omegas: Vec<AngleCase>,
    pub controls: Vec<ControlSpaceKind>,
    pub kind: StudyKind,
    pub min_level: u32,
    pub max_level: u32,
    pub alpha: f64,
    /// Quadrature degree for error integrals.
    pub quad_degree: usize,
    /// Relative tolerance of the inner (sparse) solves.
    pub tol_inner: f64,
    /// Relative tolerance of the outer reduced-Hessian CG.
    pub tol_outer: f64,
    pub out: Option<PathBuf>,
    pub dump_mesh: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> StudyConfig {
        StudyConfig {
            omegas: AngleCase::ALL.to_vec(),
            controls: ControlSpaceKind::ALL.to_vec(),
            kind: StudyKind::All,
            min_level: 1,
            max_level: 4,
            alpha: 1.0,
            quad_degree: 4,
            tol_inner: 1e-11,
            tol_outer: 1e-10,
            out: None,
            dump_mesh: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_level < self.min_level {
            return Err(Error::Config(format!(
                "empty level range {}..{}",
                self.min_level, self.max_level
            )));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.tol_inner > 0.0 && self.tol_outer > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.omegas.is_empty() || self.controls.is_empty() {
            return Err(Error::Config("no angle or control space selected".into()));
        }
        Ok(())
    }
}

/// Quadrature degree for the fixed data loads (f, g, u_d); the data carry
/// singular derivatives, so this stays at 4 independent of the error
/// degree.
const DATA_DEGREE: usize = 4;

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub level: u32,
    pub h: f64,
    pub err_q: Option<f64>,
    pub err_u: Option<f64>,
    pub err_trace: Option<f64>,
    pub eoc_q: Option<f64>,
    pub eoc_u: Option<f64>,
    pub eoc_trace: Option<f64>,
    pub outer_iters: usize,
    pub seconds: f64,
}

impl StudyRecord {
    fn empty(level: u32, h: f64) -> StudyRecord {
        StudyRecord {
            level,
            h,
            err_q: None,
            err_u: None,
            err_trace: None,
            eoc_q: None,
            eoc_u: None,
            eoc_trace: None,
            outer_iters: 0,
            seconds: 0.0,
        }
    }
}

/// A single (angle, control-space, kind) study resolved from a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudySpec {
    pub omega: AngleCase,
    /// Control space; `None` for trace studies.
    pub control: Option<ControlSpaceKind>,
    pub kind: StudyKind,
}

impl StudySpec {
    pub fn tag(&self) -> String {
        match self.control {
            Some(c) => format!("{}-{}-control", self.omega.label(), c.label()),
            None => format!("{}-trace", self.omega.label()),
        }
    }
}

/// Expands a config into the concrete studies to run: one control study
/// per (omega, control space) and one trace study per omega.
pub fn expand_studies(config: &StudyConfig) -> Vec<StudySpec> {
    let mut specs = Vec::new();
    if matches!(config.kind, StudyKind::Control | StudyKind::All) {
        for &omega in &config.omegas {
            for &control in &config.controls {
                specs.push(StudySpec {
                    omega,
                    control: Some(control),
                    kind: StudyKind::Control,
                });
            }
        }
    }
    if matches!(config.kind, StudyKind::Trace | StudyKind::All) {
        for &omega in &config.omegas {
            specs.push(StudySpec {
                omega,
                control: None,
                kind: StudyKind::Trace,
            });
        }
    }
    specs
}

/// Pairwise estimated orders of convergence
/// EOC_k = log(e_{k-1}/e_k) / log(h_{k-1}/h_k); the first entry and any
/// pair touching an exactly-zero error are undefined (`None`).
pub fn estimate_eoc(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), hs.len());
    for w in hs.windows(2) {
        assert!(w[1] < w[0], "mesh sizes must decrease strictly");
    }
    let mut eocs = vec![None; errors.len()];
    for k in 1..errors.len() {
        if errors[k - 1] > 0.0 && errors[k] > 0.0 {
            eocs[k] = Some((errors[k - 1] / errors[k]).ln() / (hs[k - 1] / hs[k]).ln());
        }
    }
    eocs
}

/// Outcome of a study: the records gathered so far and the failure that
/// stopped it, if any. Partial tables are kept so callers can flush them.
pub struct StudyOutcome {
    pub spec: StudySpec,
    pub records: Vec<StudyRecord>,
    pub error: Option<Error>,
}

impl StudyOutcome {
    pub fn into_result(self) -> Result<Vec<StudyRecord>> {
        match self.error {
            None => Ok(self.records),
            Some(e) => Err(e),
        }
    }
}

fn prepared_mesh(config: &StudyConfig, spec: &StudySpec, level: u32) -> Result<Mesh> {
    let mesh = generate_mesh(spec.omega, level)?;
    let diag = validate(&mesh);
    if !diag.pass() {
        return Err(Error::Assembly(format!(
            "mesh validation failed at level {level}: {}",
            diag.first_violation().unwrap_or("unknown")
        )));
    }
    // The angular coordinate of every off-axis vertex must land in
    // [0, omega]; the arctan2 branch cut never intersects the domain.
    let w = spec.omega.omega();
    for v in &mesh.vertices {
        let r = v[0].hypot(v[1]);
        if r > 0.0 {
            let phi = v[1].atan2(v[0]);
            if !(-1e-12..=w + 1e-12).contains(&phi) {
                return Err(Error::Assembly(format!(
                    "vertex angle {phi} outside [0, {w}]"
                )));
            }
        }
    }
    if let Some(base) = &config.dump_mesh {
        mesh.write_dump(&dump_path(base, spec.omega, level))?;
    }
    Ok(mesh)
}

/// Dump file name for one mesh: `<stem>-<omega>-l<level>.<ext>`.
pub fn dump_path(base: &Path, omega: AngleCase, level: u32) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("txt");
    base.with_file_name(format!("{stem}-{}-l{level}.{ext}", omega.label()))
}

/// Runs a control-problem convergence study for one angle and control
/// space: per level, solve the discrete optimal control problem and
/// measure the control and state errors against the reference optimum.
pub fn run_control_study(
    config: &StudyConfig,
    omega: AngleCase,
    control: ControlSpaceKind,
    case: &ManufacturedCase,
) -> StudyOutcome {
    let spec = StudySpec {
        omega,
        control: Some(control),
        kind: StudyKind::Control,
    };
    let mut records = Vec::new();
    let mut hs: Vec<f64> = Vec::new();
    let mut errs_q: Vec<f64> = Vec::new();
    let mut errs_u: Vec<f64> = Vec::new();
    for level in config.min_level..=config.max_level {
        let start = Instant::now();
        let step = (|| -> Result<StudyRecord> {
            let mesh = prepared_mesh(config, &spec, level)?;
            let problem = OcpProblem::assemble(
                &mesh,
                control,
                config.alpha,
                case.f.as_ref(),
                case.g.as_ref(),
                case.u_d.as_ref(),
                DATA_DEGREE,
                config.tol_inner,
            )?;
            let sol = problem.solve_ocp(config.tol_outer)?;
            let err_q = l2_error_boundary_control(
                &mesh,
                &problem.space,
                &sol.control,
                case.q_bar.as_ref(),
                config.quad_degree,
            )?;
            let err_u =
                l2_error_volume(&mesh, &sol.state, case.state.as_ref(), config.quad_degree)?;
            // Quadrature-robustness cross-checks at the coarsest level:
            // the error integral and the desired-state load are
            // re-evaluated one degree higher and should agree to well
            // under the discretization error.
            if level == config.min_level {
                let err_q5 = l2_error_boundary_control(
                    &mesh,
                    &problem.space,
                    &sol.control,
                    case.q_bar.as_ref(),
                    config.quad_degree + 1,
                )?;
                let gap = (err_q5 - err_q).abs();
                if gap > 0.01 * err_q.max(1e-300) {
                    eprintln!(
                        "note: err_q quadrature sensitivity {:.2}% at level {level} ({})",
                        100.0 * gap / err_q,
                        spec.tag(),
                    );
                }
                let ld5 =
                    crate::fem::assemble_volume_load(&mesh, case.u_d.as_ref(), DATA_DEGREE + 1)?;
                let mut diff = 0.0;
                let mut scale = 0.0;
                for (a, b) in problem.desired_load.iter().zip(&ld5) {
                    diff += (a - b) * (a - b);
                    scale += b * b;
                }
                if diff.sqrt() > 0.01 * scale.sqrt() {
                    eprintln!(
                        "note: desired-state load quadrature sensitivity {:.2}% at level {level} ({})",
                        100.0 * diff.sqrt() / scale.sqrt(),
                        spec.tag(),
                    );
                }
            }
            let mut record = StudyRecord::empty(level, mesh.h);
            record.err_q = Some(err_q);
            record.err_u = Some(err_u);
            record.outer_iters = sol.outer_iterations;
            Ok(record)
        })();
        match step {
            Ok(mut record) => {
                record.seconds = start.elapsed().as_secs_f64();
                hs.push(record.h);
                errs_q.push(record.err_q.unwrap());
                errs_u.push(record.err_u.unwrap());
                records.push(record);
            }
            Err(e) => {
                finalize_eocs(&mut records, &hs, &errs_q, &errs_u, &[]);
                return StudyOutcome {
                    spec,
                    records,
                    error: Some(e),
                };
            }
        }
    }
    finalize_eocs(&mut records, &hs, &errs_q, &errs_u, &[]);
    StudyOutcome {
        spec,
        records,
        error: None,
    }
}

/// Runs a boundary-trace study for one angle: per level, the state solve
/// with the exact data of the adjoint state realizes its Ritz projection;
/// the record tracks the trace error on the boundary and the volume error.
pub fn run_trace_study(
    config: &StudyConfig,
    omega: AngleCase,
    case: &ManufacturedCase,
) -> StudyOutcome {
    let spec = StudySpec {
        omega,
        control: None,
        kind: StudyKind::Trace,
    };
    let mut records = Vec::new();
    let mut hs: Vec<f64> = Vec::new();
    let mut errs_trace: Vec<f64> = Vec::new();
    let mut errs_u: Vec<f64> = Vec::new();
    for level in config.min_level..=config.max_level {
        let start = Instant::now();
        let step = (|| -> Result<StudyRecord> {
            let mesh = prepared_mesh(config, &spec, level)?;
            let system = assemble_system(&mesh)?;
            let zero_load = vec![0.0; mesh.n_vertices()];
            let (u_h, info) = solve_state(
                &mesh,
                &system,
                case.f.as_ref(),
                &zero_load,
                DATA_DEGREE,
                config.tol_inner,
            )?;
            let err_trace =
                l2_error_boundary_fe(&mesh, &u_h, case.adjoint.as_ref(), config.quad_degree)?;
            let err_u = l2_error_volume(&mesh, &u_h, case.adjoint.as_ref(), config.quad_degree)?;
            let mut record = StudyRecord::empty(level, mesh.h);
            record.err_trace = Some(err_trace);
            record.err_u = Some(err_u);
            record.outer_iters = info.iterations;
            Ok(record)
        })();
        match step {
            Ok(mut record) => {
                record.seconds = start.elapsed().as_secs_f64();
                hs.push(record.h);
                errs_trace.push(record.err_trace.unwrap());
                errs_u.push(record.err_u.unwrap());
                records.push(record);
            }
            Err(e) => {
                finalize_eocs(&mut records, &hs, &[], &errs_u, &errs_trace);
                return StudyOutcome {
                    spec,
                    records,
                    error: Some(e),
                };
            }
        }
    }
    finalize_eocs(&mut records, &hs, &[], &errs_u, &errs_trace);
    StudyOutcome {
        spec,
        records,
        error: None,
    }
}

fn finalize_eocs(
    records: &mut [StudyRecord],
    hs: &[f64],
    errs_q: &[f64],
    errs_u: &[f64],
    errs_trace: &[f64],
) {
    if records.len() < 2 {
        return;
    }
    if errs_q.len() == records.len() {
        for (rec, eoc) in records.iter_mut().zip(estimate_eoc(errs_q, hs)) {
            rec.eoc_q = eoc;
        }
    }
    if errs_u.len() == records.len() {
        for (rec, eoc) in records.iter_mut().zip(estimate_eoc(errs_u, hs)) {
            rec.eoc_u = eoc;
        }
    }
    if errs_trace.len() == records.len() {
        for (rec, eoc) in records.iter_mut().zip(estimate_eoc(errs_trace, hs)) {
            rec.eoc_trace = eoc;
        }
    }
}

/// Runs one resolved study.
pub fn run_study(config: &StudyConfig, spec: &StudySpec, case: &ManufacturedCase) -> StudyOutcome {
    match spec.control {
        Some(control) => run_control_study(config, spec.omega, control, case),
        None => run_trace_study(config, spec.omega, case),
    }
}

const CSV_HEADER: &str = "level,h,err_q,err_u,err_trace,eoc_q,eoc_u,eoc_trace,outer_iters,seconds";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

/// Serializes records to the CSV schema
/// `level,h,err_q,err_u,err_trace,eoc_q,eoc_u,eoc_trace,outer_iters,seconds`
/// with 17 significant digits and empty fields for absent quantities.
pub fn csv_string(records: &[StudyRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{:.16e},{},{},{},{},{},{},{},{:.16e}",
            r.level,
            r.h,
            fmt_opt(r.err_q),
            fmt_opt(r.err_u),
            fmt_opt(r.err_trace),
            fmt_opt(r.eoc_q),
            fmt_opt(r.eoc_u),
            fmt_opt(r.eoc_trace),
            r.outer_iters,
            r.seconds,
        )
        .expect("write to string");
    }
    out
}

/// Writes records as CSV.
pub fn write_csv(records: &[StudyRecord], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(records))?;
    Ok(())
}

/// Parses a CSV produced by [`write_csv`] (round-trip exact).
pub fn parse_csv(text: &str) -> Result<Vec<StudyRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Config(format!("unexpected CSV header: {other:?}"))),
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::Config(format!("bad float '{s}': {e}")))
        }
    };
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Config(format!(
                "expected 10 fields, got {} in '{line}'",
                fields.len()
            )));
        }
        records.push(StudyRecord {
            level: fields[0]
                .parse()
                .map_err(|e| Error::Config(format!("bad level: {e}")))?,
            h: fields[1]
                .parse()
                .map_err(|e| Error::Config(format!("bad h: {e}")))?,
            err_q: parse_opt(fields[2])?,
            err_u: parse_opt(fields[3])?,
            err_trace: parse_opt(fields[4])?,
            eoc_q: parse_opt(fields[5])?,
            eoc_u: parse_opt(fields[6])?,
            eoc_trace: parse_opt(fields[7])?,
            outer_iters: fields[8]
                .parse()
                .map_err(|e| Error::Config(format!("bad iters: {e}")))?,
            seconds: fields[9]
                .parse()
                .map_err(|e| Error::Config(format!("bad seconds: {e}")))?,
        });
    }
    Ok(records)
}

fn fmt_cell(v: Option<f64>, precision: usize) -> String {
    match v {
        Some(x) => format!("{x:.precision$e}"),
        None => "-".into(),
    }
}

/// EOC cell: an exactly-zero error has no defined order and is reported
/// as exact rather than missing.
fn fmt_eoc_cell(eoc: Option<f64>, err: Option<f64>, first: bool) -> String {
    match (eoc, err) {
        (Some(x), _) => format!("{x:.2e}"),
        (None, Some(0.0)) if !first => "exact".into(),
        _ => "-".into(),
    }
}

/// Renders a study as a console table.
pub fn table_string(spec: &StudySpec, records: &[StudyRecord]) -> String {
    let mut out = String::new();
    writeln!(out, "study {}", spec.tag()).unwrap();
    writeln!(
        out,
        "{:>5} {:>12} {:>12} {:>7} {:>12} {:>7} {:>12} {:>7} {:>6} {:>9}",
        "level", "h", "err_q", "eoc_q", "err_u", "eoc_u", "err_trace", "eoc_tr", "iters", "seconds"
    )
    .unwrap();
    for (k, r) in records.iter().enumerate() {
        writeln!(
            out,
            "{:>5} {:>12.4e} {:>12} {:>7} {:>12} {:>7} {:>12} {:>7} {:>6} {:>9.3}",
            r.level,
            r.h,
            fmt_cell(r.err_q, 4),
            fmt_eoc_cell(r.eoc_q, r.err_q, k == 0),
            fmt_cell(r.err_u, 4),
            fmt_eoc_cell(r.eoc_u, r.err_u, k == 0),
            fmt_cell(r.err_trace, 4),
            fmt_eoc_cell(r.eoc_trace, r.err_trace, k == 0),
            r.outer_iters,
            r.seconds,
        )
        .unwrap();
    }
    out
}

/// CSV output path for one study: the configured path verbatim when the
/// config resolves to a single study, otherwise the study tag is inserted
/// before the extension.
pub fn csv_path(base: &Path, spec: &StudySpec, n_studies: usize) -> PathBuf {
    if n_studies == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("study");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}-{}.{ext}", spec.tag()))
}

/// Runs every study of a config, printing tables and writing CSVs as it
/// goes. Returns the first error after flushing partial tables.
pub fn run_all(config: &StudyConfig) -> Result<Vec<(StudySpec, Vec<StudyRecord>)>> {
    config.validate()?;
    let specs = expand_studies(config);
    let mut results = Vec::new();
    for spec in &specs {
        let case = manufactured::build_case(spec.omega)?;
        let outcome = run_study(config, spec, &case);
        print!("{}", table_string(spec, &outcome.records));
        if let Some(base) = &config.out {
            write_csv(&outcome.records, &csv_path(base, spec, specs.len()))?;
        }
        match outcome.error {
            None => results.push((*spec, outcome.records)),
            Some(e) => return Err(e),
        }
    }
    Ok(results)
}

/// Quick verification pass: manufactured-solution oracles for all angles
/// plus a small property sweep of the FEM and optimization kernels.
/// Returns the per-check lines it printed.
pub fn run_check() -> Result<Vec<String>> {
    let mut lines = Vec::new();
    let mut check = |name: &str, result: Result<String>| -> Result<()> {
        match result {
            Ok(detail) => {
                let line = format!("ok   {name}: {detail}");
                println!("{line}");
                lines.push(line);
                Ok(())
            }
            Err(e) => {
                println!("FAIL {name}: {e}");
                Err(e)
            }
        }
    };

    for omega in AngleCase::ALL {
        check(
            &format!("manufactured oracles ({omega})"),
            manufactured::self_check(omega).map(|r| {
                format!(
                    "laplacian fd {:.2e}, normal derivative {:.2e}",
                    r.laplacian_fd_error, r.normal_derivative
                )
            }),
        )?;
    }

    check(
        "mesh invariants (all angles, levels 0-2)",
        (|| {
            for omega in AngleCase::ALL {
                for level in 0..=2 {
                    let mesh = generate_mesh(omega, level)?;
                    let diag = validate(&mesh);
                    if !diag.pass() {
                        return Err(Error::Assembly(format!(
                            "{omega} level {level}: {}",
                            diag.first_violation().unwrap_or("unknown")
                        )));
                    }
                }
            }
            Ok("volume, conformity, facet partition".into())
        })(),
    )?;

    check(
        "quadrature exactness (degrees 1-6)",
        (|| {
            use crate::fem::quadrature::{TetQuadrature, TriQuadrature};
            for degree in 1..=6usize {
                let tet = TetQuadrature::with_degree(degree)?;
                let tri = TriQuadrature::with_degree(degree)?;
                let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
                for a in 0..=degree {
                    for b in 0..=(degree - a) {
                        let exact_tri = fact(a) * fact(b) / fact(a + b + 2);
                        let q_tri: f64 = tri
                            .points
                            .iter()
                            .zip(&tri.weights)
                            .map(|(p, &w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                            .sum();
                        if (q_tri - exact_tri).abs() > 1e-14 {
                            return Err(Error::Oracle(format!(
                                "triangle degree {degree} monomial ({a},{b})"
                            )));
                        }
                        for c in 0..=(degree - a - b) {
                            let exact_tet = fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
                            let q_tet: f64 = tet
                                .points
                                .iter()
                                .zip(&tet.weights)
                                .map(|(p, &w)| {
                                    w * p[1].powi(a as i32)
                                        * p[2].powi(b as i32)
                                        * p[3].powi(c as i32)
                                })
                                .sum();
                            if (q_tet - exact_tet).abs() > 1e-14 {
                                return Err(Error::Oracle(format!(
                                    "tet degree {degree} monomial ({a},{b},{c})"
                                )));
                            }
                        }
                    }
                }
            }
            Ok("all monomials to 1e-14".into())
        })(),
    )?;

    check(
        "state solve reproduces constants",
        (|| {
            let mesh = generate_mesh(AngleCase::TwoPiOver3, 1)?;
            let system = assemble_system(&mesh)?;
            let zero_load = vec![0.0; mesh.n_vertices()];
            let (u, _) = solve_state(&mesh, &system, &|_| 1.0, &zero_load, 2, 1e-12)?;
            let worst = u
                .coefficients
                .iter()
                .fold(0.0f64, |m, &c| m.max((c - 1.0).abs()));
            if worst > 1e-10 {
                return Err(Error::Oracle(format!("deviation {worst:.2e}")));
            }
            Ok(format!("max deviation {worst:.2e}"))
        })(),
    )?;

    check(
        "reduced gradient and Hessian consistency",
        (|| {
            use crate::controls::ControlFunction;
            use crate::fem::solve::dot;
            use rand::{Rng, SeedableRng};
            let mesh = generate_mesh(AngleCase::ThreePiOver4, 1)?;
            let case = manufactured::case_unchecked(AngleCase::ThreePiOver4);
            let mut worst_fd = 0.0f64;
            let mut worst_sym = 0.0f64;
            for kind in ControlSpaceKind::ALL {
                let problem = OcpProblem::assemble(
                    &mesh,
                    kind,
                    1.0,
                    case.f.as_ref(),
                    case.g.as_ref(),
                    case.u_d.as_ref(),
                    DATA_DEGREE,
                    1e-11,
                )?;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
                let q = ControlFunction::new(
                    &problem.space,
                    (0..problem.space.dof_count)
                        .map(|_| rng.random_range(-0.5..0.5))
                        .collect(),
                );
                let grad = problem.reduced_gradient(&q)?;
                let eps = 1e-5;
                for _ in 0..3 {
                    let delta: Vec<f64> = (0..problem.space.dof_count)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect();
                    let shift = |sign: f64| -> Result<f64> {
                        let coeffs: Vec<f64> = q
                            .coefficients
                            .iter()
                            .zip(&delta)
                            .map(|(qi, di)| qi + sign * eps * di)
                            .collect();
                        problem.eval_cost(&ControlFunction::new(&problem.space, coeffs))
                    };
                    let fd = (shift(1.0)? - shift(-1.0)?) / (2.0 * eps);
                    let dg = dot(&grad, &delta);
                    worst_fd = worst_fd.max((fd - dg).abs() / fd.abs().max(dg.abs()).max(1e-12));
                    let d2: Vec<f64> = (0..problem.space.dof_count)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect();
                    let hd = problem.apply_reduced_hessian(&delta)?;
                    let hd2 = problem.apply_reduced_hessian(&d2)?;
                    let s1 = dot(&d2, &hd);
                    let s2 = dot(&delta, &hd2);
                    worst_sym = worst_sym.max((s1 - s2).abs() / s1.abs().max(s2.abs()).max(1e-30));
                }
            }
            if worst_fd > 1e-5 || worst_sym > 1e-8 {
                return Err(Error::Oracle(format!(
                    "gradient fd {worst_fd:.2e}, hessian asymmetry {worst_sym:.2e}"
                )));
            }
            Ok(format!(
                "gradient fd {worst_fd:.2e}, hessian asymmetry {worst_sym:.2e}"
            ))
        })(),
    )?;

    Ok(lines)
}
