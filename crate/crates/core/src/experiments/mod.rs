//! Runners for the finite-volume experiments and analysis commands.
//!
//! [`run`] computes everything in memory and [`write_outputs`] writes
//! `summary.txt`, per-member CSV and field files. Ensemble members are
//! dispatched with [`map_indexed`](crate::parallel::map_indexed) on their
//! own random streams, so outputs do not depend on the worker count.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

pub use config::{parse_ini, ExperimentConfig, ExperimentKind};

use crate::diagnostics::{ensemble_reduce, RecordSpec, RunRecord};
use crate::error::{Error, Result};
use crate::fv2d::{
    build_em_map, cellular_noise, deformational_noise, leveque_initial, solid_body_rotation, square_initial,
    write_fld, write_pgm, BuiltMap, CellField, EulerSalt, FvProblem, Grid2D, Stencil,
};
use crate::increments::{validate_moments, IncrementSampler, MomentReport, RngStream};
use crate::integrators::{run_path, EmFlowMap, Integrator, PathSpec, Scheme, ShuOsherMethod, Stepper};
use crate::parallel::map_indexed;
use crate::sdebench::{run_convergence, ConvergenceStudy, McSettings};
use crate::tableau::{builtin, extend, radius_of_monotonicity, Builtin, ButcherTableau, Radius};

/// Courant number of one forward-Euler step that the flow maps tolerate.
pub const TAU0: f64 = 0.5;

/// Radius search tolerance used by the `radius` command.
pub const RADIUS_TOL: f64 = 1e-8;

/// One integrated field: a case of an ablation or an ensemble member.
#[derive(Clone, Debug)]
pub struct MemberResult {
    pub label: String,
    pub stream: u64,
    pub outcome: MemberOutcome,
}

#[derive(Clone, Debug)]
pub enum MemberOutcome {
    Completed { record: RunRecord, final_field: CellField },
    /// The state became non-finite at this step.
    Failed { step: usize },
}

impl MemberResult {
    pub fn record(&self) -> Option<&RunRecord> {
        match &self.outcome {
            MemberOutcome::Completed { record, .. } => Some(record),
            MemberOutcome::Failed { .. } => None,
        }
    }

    pub fn final_field(&self) -> Option<&CellField> {
        match &self.outcome {
            MemberOutcome::Completed { final_field, .. } => Some(final_field),
            MemberOutcome::Failed { .. } => None,
        }
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub members: Vec<MemberResult>,
    /// Range the records measure violations against.
    pub bounds: Option<(f64, f64)>,
    /// Largest discrete divergence of any velocity field (transport runs).
    pub max_divergence: Option<f64>,
    pub radius: Option<Radius>,
    pub study: Option<ConvergenceStudy>,
    pub moments: Option<MomentReport>,
    pub summary: String,
}

impl RunReport {
    /// Member by label.
    pub fn member(&self, label: &str) -> Option<&MemberResult> {
        self.members.iter().find(|m| m.label == label)
    }
}

/// Runs `cfg` in memory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport {
        config: cfg.clone(),
        members: Vec::new(),
        bounds: None,
        max_divergence: None,
        radius: None,
        study: None,
        moments: None,
        summary: String::new(),
    };
    match cfg.experiment {
        ExperimentKind::BurgersAblation => burgers_ablation(cfg, &mut report)?,
        ExperimentKind::GammaFamily => gamma_family(cfg, &mut report)?,
        ExperimentKind::Advection2d => advection2d(cfg, &mut report)?,
        ExperimentKind::EulerSalt => euler_salt(cfg, &mut report)?,
        ExperimentKind::BurgersGarkSplit => burgers_gark_split(cfg, &mut report)?,
        ExperimentKind::Converge => converge(cfg, &mut report)?,
        ExperimentKind::Radius => radius(cfg, &mut report)?,
        ExperimentKind::ValidateIncrements => validate_increments(cfg, &mut report)?,
    }
    report.summary = summarize(&report);
    Ok(report)
}

/// Runs `cfg` and writes its outputs to `cfg.output_dir`.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<RunReport> {
    let report = run(cfg)?;
    write_outputs(&report, &cfg.output_dir)?;
    Ok(report)
}

struct Case {
    label: String,
    scheme: Scheme,
    limiter: Option<Stencil>,
    sampler: IncrementSampler,
    stream: u64,
    cfl_limit: f64,
}

fn field_setup(cfg: &ExperimentConfig) -> Result<(Grid2D, PathSpec)> {
    let grid = Grid2D::new(cfg.nx, cfg.ny)?;
    Ok((grid, PathSpec::to_horizon(cfg.t_end, cfg.nt, 1)?))
}

fn scheme_radius(s: &Scheme) -> f64 {
    match s {
        Scheme::EulerMaruyama => 1.0,
        Scheme::ShuOsher(m) => m.radius(),
        Scheme::Butcher(t) => radius_of_monotonicity(&extend(t), 1e-6).value,
        Scheme::StrangSequential { m, n } | Scheme::StrangAdditive { m, n } => (2 * m).min(*n) as f64,
        Scheme::Additive(_) | Scheme::Gark(_) => 1.0,
    }
}

fn integrate(
    stepper: &dyn Stepper,
    q0: &CellField,
    spec: PathSpec,
    sampler: &IncrementSampler,
    seed: u64,
    stream: u64,
    rec: RecordSpec,
) -> Result<MemberOutcome> {
    let mut rng = RngStream::new(seed, stream);
    match run_path(stepper, &q0.data, spec, sampler, &mut rng, rec, None) {
        Ok(run) => Ok(MemberOutcome::Completed {
            record: run.record,
            final_field: CellField::new(q0.grid, run.state)?,
        }),
        Err(Error::NonFinite { step }) => Ok(MemberOutcome::Failed { step }),
        Err(e) => Err(e),
    }
}

/// Integrates each case with its own map. Cases run concurrently.
fn run_cases(
    cfg: &ExperimentConfig,
    grid: Grid2D,
    spec: PathSpec,
    q0: &CellField,
    problem: &FvProblem,
    cases: &[Case],
) -> Result<Vec<MemberResult>> {
    let rec_base = RecordSpec::bounded(q0.min(), q0.max(), grid.cell_area());
    let out = map_indexed(cases.len(), cfg.exec, |k| {
        let c = &cases[k];
        let map = build_em_map(grid, problem.clone(), c.limiter, cfg.exec);
        let noise_dim = match &map {
            BuiltMap::Single(m) => m.noise_dim(),
            BuiltMap::Split { diffusion, .. } => diffusion.noise_dim(),
        };
        let stepper = match &map {
            BuiltMap::Single(m) => Integrator::new(c.scheme.clone(), m.as_ref()),
            BuiltMap::Split { drift, diffusion } => {
                Integrator::split(c.scheme.clone(), drift.as_ref(), diffusion.as_ref())
            }
        };
        let rec = RecordSpec {
            cfl_limit: c.cfl_limit,
            ..rec_base
        };
        let spec = PathSpec { noise_dim, ..spec };
        integrate(&stepper, q0, spec, &c.sampler, cfg.seed, c.stream, rec).map(|outcome| MemberResult {
            label: c.label.clone(),
            stream: c.stream,
            outcome,
        })
    });
    out.into_iter().collect()
}

fn require_completed(members: &[MemberResult]) -> Result<()> {
    for (k, m) in members.iter().enumerate() {
        if let MemberOutcome::Failed { step } = m.outcome {
            return Err(Error::InvalidArgument(format!(
                "member {k} ({}): non-finite state at step {step}",
                m.label
            )));
        }
    }
    Ok(())
}

fn ensemble_cases(cfg: &ExperimentConfig) -> Result<Vec<Case>> {
    let scheme = Scheme::from_name(&cfg.method, cfg.m, cfg.n)?;
    let cfl_limit = TAU0 * scheme_radius(&scheme);
    Ok((0..cfg.ensemble)
        .map(|k| Case {
            label: format!("member_{k}"),
            scheme: scheme.clone(),
            limiter: cfg.limiter,
            sampler: cfg.sampler,
            stream: k as u64,
            cfl_limit,
        })
        .collect())
}

fn burgers_ablation(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (grid, spec) = field_setup(cfg)?;
    let q0 = square_initial(&grid);
    let stencil = cfg.limiter.unwrap_or(Stencil::ThirteenPoint);
    let ssp22 = Scheme::ShuOsher(ShuOsherMethod::Ssp22);
    let midpoint = Scheme::Butcher(builtin("midpoint")?);
    let case = |label: &str, scheme: &Scheme, limiter, sampler| Case {
        label: label.into(),
        cfl_limit: TAU0 * scheme_radius(scheme),
        scheme: scheme.clone(),
        limiter,
        sampler,
        stream: 0,
    };
    let cases = [
        case("ssp22_limiter_bounded", &ssp22, Some(stencil), cfg.sampler),
        case("ssp22_limiter_gaussian", &ssp22, Some(stencil), IncrementSampler::gaussian()),
        case("midpoint_limiter_bounded", &midpoint, Some(stencil), cfg.sampler),
        case("ssp22_nolimiter_bounded", &ssp22, None, cfg.sampler),
    ];
    let problem = FvProblem::BurgersConstNoise {
        a: cfg.noise_a,
        b: cfg.noise_b,
    };
    report.members = run_cases(cfg, grid, spec, &q0, &problem, &cases)?;
    report.bounds = Some((q0.min(), q0.max()));
    Ok(())
}

fn gamma_family(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (grid, spec) = field_setup(cfg)?;
    let q0 = square_initial(&grid);
    let cases = cfg
        .gammas
        .iter()
        .map(|&g| {
            let scheme = Scheme::Butcher(Builtin::Gamma(g).tableau()?);
            Ok(Case {
                label: format!("gamma={g}"),
                cfl_limit: TAU0 * scheme_radius(&scheme),
                scheme,
                limiter: cfg.limiter,
                sampler: cfg.sampler,
                stream: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = FvProblem::BurgersConstNoise {
        a: cfg.noise_a,
        b: cfg.noise_b,
    };
    report.members = run_cases(cfg, grid, spec, &q0, &problem, &cases)?;
    report.bounds = Some((q0.min(), q0.max()));
    Ok(())
}

fn advection2d(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (grid, spec) = field_setup(cfg)?;
    let q0 = leveque_initial(&grid);
    let u = solid_body_rotation(&grid);
    let xi = deformational_noise(&grid);
    let div = u.max_abs_divergence(&grid).max(xi.max_abs_divergence(&grid));
    let problem = FvProblem::Advection { u, xi: vec![xi] };
    report.members = run_cases(cfg, grid, spec, &q0, &problem, &ensemble_cases(cfg)?)?;
    require_completed(&report.members)?;
    report.bounds = Some((q0.min(), q0.max()));
    report.max_divergence = Some(div);
    Ok(())
}

fn euler_salt(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (grid, spec) = field_setup(cfg)?;
    let q0 = leveque_initial(&grid);
    let scheme = Scheme::from_name(&cfg.method, cfg.m, cfg.n)?;
    let cfl_limit = TAU0 * scheme_radius(&scheme);
    let rec = RecordSpec {
        cfl_limit,
        ..RecordSpec::bounded(q0.min(), q0.max(), grid.cell_area())
    };
    let results = map_indexed(cfg.ensemble, cfg.exec, |k| {
        let map = EulerSalt::new(grid, cfg.n_modes, cfg.amplitude, cfg.limiter).with_exec(cfg.exec);
        let spec = PathSpec {
            noise_dim: map.noise_dim(),
            ..spec
        };
        let stepper = Integrator::new(scheme.clone(), &map);
        let outcome = integrate(&stepper, &q0, spec, &cfg.sampler, cfg.seed, k as u64, rec)?;
        let noise_div = map
            .noise_fields()
            .iter()
            .map(|f| f.max_abs_divergence(&grid))
            .fold(0.0f64, f64::max);
        Ok((
            MemberResult {
                label: format!("member_{k}"),
                stream: k as u64,
                outcome,
            },
            map.max_velocity_divergence().max(noise_div),
        ))
    });
    let results: Vec<(MemberResult, f64)> = results.into_iter().collect::<Result<_>>()?;
    report.max_divergence = Some(results.iter().map(|r| r.1).fold(0.0, f64::max));
    report.members = results.into_iter().map(|r| r.0).collect();
    require_completed(&report.members)?;
    report.bounds = Some((q0.min(), q0.max()));
    Ok(())
}

fn burgers_gark_split(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let (grid, spec) = field_setup(cfg)?;
    let q0 = leveque_initial(&grid);
    let xi = cellular_noise(&grid);
    let div = xi.max_abs_divergence(&grid);
    let problem = FvProblem::BurgersTransportNoise { xi: vec![xi] };
    report.members = run_cases(cfg, grid, spec, &q0, &problem, &ensemble_cases(cfg)?)?;
    require_completed(&report.members)?;
    report.bounds = Some((q0.min(), q0.max()));
    report.max_divergence = Some(div);
    Ok(())
}

fn converge(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let problem = cfg.sde.problem();
    let stepper = Integrator::new(Scheme::from_name(&cfg.method, cfg.m, cfg.n)?, &problem);
    let mut mc = McSettings::new(cfg.t_end, cfg.paths, cfg.seed);
    mc.exec = cfg.exec;
    report.study = Some(run_convergence(&stepper, &cfg.sde, &cfg.dt_list, mc, &cfg.sampler, cfg.estimator)?);
    Ok(())
}

/// Builtin name or Butcher tableau file.
pub fn resolve_tableau(method: &str, file: Option<&Path>) -> Result<ButcherTableau> {
    match file {
        Some(p) => ButcherTableau::from_file(p),
        None => builtin(method),
    }
}

fn radius(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let t = resolve_tableau(&cfg.method, cfg.tableau.as_deref())?;
    report.radius = Some(radius_of_monotonicity(&extend(&t), RADIUS_TOL));
    Ok(())
}

fn validate_increments(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let mut rng = RngStream::new(cfg.seed, 0);
    report.moments = Some(validate_moments(&cfg.sampler, cfg.dt, cfg.n_samples, &mut rng)?);
    Ok(())
}

/// A radius rounded to the search tolerance, e.g. `6.0`.
pub fn format_radius(r: &Radius) -> String {
    let v = (r.value * 1e6).round() / 1e6;
    if r.capped {
        format!(">= {v:?} (search cap)")
    } else {
        format!("{v:?}")
    }
}

fn summarize(r: &RunReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {}", c.experiment);
    let _ = writeln!(s, "seed: {}", c.seed);
    if c.experiment.is_field_run() {
        let _ = writeln!(
            s,
            "grid: {}x{}  nt: {}  t_end: {}  dt: {:e}",
            c.nx,
            c.ny,
            c.nt,
            c.t_end,
            c.dt_field()
        );
        match c.experiment {
            ExperimentKind::BurgersAblation | ExperimentKind::GammaFamily => {
                let _ = writeln!(s, "noise: a = {}, b = {}  sampler: {}", c.noise_a, c.noise_b, c.sampler);
                let _ = writeln!(
                    s,
                    "note: all cases draw from the same random stream (seed {}, stream 0), so the \
                     comparison isolates the method",
                    c.seed
                );
            }
            _ => {
                let lim = c.limiter.map_or("none".into(), |l| l.to_string());
                let _ = writeln!(
                    s,
                    "method: {} (m = {}, n = {})  sampler: {}  limiter: {}  ensemble: {}",
                    c.method, c.m, c.n, c.sampler, lim, c.ensemble
                );
            }
        }
        if c.experiment == ExperimentKind::EulerSalt {
            let _ = writeln!(s, "noise modes: {}  amplitude: {:e}", c.n_modes, c.amplitude);
        }
        if let Some((lo, hi)) = r.bounds {
            let _ = writeln!(s, "bounds: [{lo}, {hi}]");
        }
        if let Some(d) = r.max_divergence {
            let _ = writeln!(s, "max velocity divergence: {d:e}");
        }
        let _ = writeln!(
            s,
            "\n{:<28} {:>13} {:>13} {:>13} {:>10} {:>9}  status",
            "member", "overshoot", "undershoot", "mass_drift", "max_cfl", "cfl_warn"
        );
        for m in &r.members {
            match &m.outcome {
                MemberOutcome::Completed { record, .. } => {
                    let cfl = record.max_cfl().map_or("-".into(), |v| format!("{v:.4}"));
                    let _ = writeln!(
                        s,
                        "{:<28} {:>13.3e} {:>13.3e} {:>13.3e} {:>10} {:>9}  {}",
                        m.label,
                        record.worst_overshoot(),
                        record.worst_undershoot(),
                        record.max_mass_drift(),
                        cfl,
                        record.warnings.len(),
                        if record.in_bounds() { "bounded" } else { "VIOLATION" }
                    );
                }
                MemberOutcome::Failed { step } => {
                    let _ = writeln!(s, "{:<28} non-finite at step {step}", m.label);
                }
            }
        }
        let records: Vec<RunRecord> = r.members.iter().filter_map(|m| m.record().cloned()).collect();
        if records.len() > 1 && c.experiment != ExperimentKind::BurgersAblation && c.experiment != ExperimentKind::GammaFamily {
            if let Ok(ext) = ensemble_reduce(&records) {
                let _ = writeln!(
                    s,
                    "\nensemble: worst overshoot {:.3e}, worst undershoot {:.3e}",
                    ext.worst_overshoot(),
                    ext.worst_undershoot()
                );
            }
        }
    }
    if let Some(rad) = &r.radius {
        let name = c.tableau.as_ref().map_or(c.method.clone(), |p| p.display().to_string());
        let _ = writeln!(s, "method: {name}\nradius: {}", format_radius(rad));
    }
    if let Some(st) = &r.study {
        let _ = writeln!(
            s,
            "method: {}  sampler: {}  estimator: {:?}  target: {}  paths: {}",
            c.method, c.sampler, st.estimator, c.sde.interpretation, st.n_paths
        );
        let _ = writeln!(s, "sde: a = {}, b = {}, q0 = {}, T = {}", c.sde.a, c.sde.b, c.sde.q0, c.t_end);
        s.push_str(&st.to_csv());
    }
    if let Some(m) = &r.moments {
        let _ = writeln!(s, "sampler: {}  dt: {}  samples: {}", m.sampler, m.dt, m.n_samples);
        let _ = write!(s, "{m}");
    }
    s
}

/// Writes `summary.txt` and, for field runs, `member_<k>.csv`,
/// `member_<k>_final.fld` and optionally `member_<k>_final.pgm`.
/// Convergence studies also write `convergence.csv`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.txt"), &report.summary)?;
    for (k, m) in report.members.iter().enumerate() {
        let MemberOutcome::Completed { record, final_field } = &m.outcome else {
            continue;
        };
        record.write_csv(BufWriter::new(fs::File::create(dir.join(format!("member_{k}.csv")))?))?;
        write_fld(
            BufWriter::new(fs::File::create(dir.join(format!("member_{k}_final.fld")))?),
            final_field,
            report.config.t_end,
        )?;
        if report.config.write_pgm {
            let (lo, hi) = report.bounds.unwrap_or((final_field.min(), final_field.max()));
            write_pgm(
                BufWriter::new(fs::File::create(dir.join(format!("member_{k}_final.pgm")))?),
                final_field,
                lo,
                hi,
            )?;
        }
    }
    if let Some(st) = &report.study {
        fs::write(dir.join("convergence.csv"), st.to_csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv2d::read_fld;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.nx = 16;
        c.ny = 16;
        c.nt = c.nt / 4;
        c.ensemble = c.ensemble.min(2);
        c
    }

    #[test]
    fn radius_command() {
        let r = run(&ExperimentConfig::defaults(ExperimentKind::Radius)).unwrap();
        assert_eq!(format_radius(r.radius.as_ref().unwrap()), "6.0");
        assert!(r.summary.contains("radius: 6.0"));
    }

    #[test]
    fn ablation_small_case_one_bounded() {
        let r = run(&small(ExperimentKind::BurgersAblation)).unwrap();
        assert_eq!(r.members.len(), 4);
        let rec = r.member("ssp22_limiter_bounded").unwrap().record().unwrap();
        assert!(rec.in_bounds());
        assert!(rec.max_mass_drift() <= 1e-12);
        assert!(r.summary.contains("same random stream"));
    }

    #[test]
    fn outputs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(ExperimentKind::Advection2d);
        c.write_pgm = true;
        c.output_dir = dir.path().to_path_buf();
        let r = run_and_write(&c).unwrap();
        for (k, m) in r.members.iter().enumerate() {
            let f = fs::File::open(dir.path().join(format!("member_{k}_final.fld"))).unwrap();
            let (field, t) = read_fld(f).unwrap();
            assert_eq!(t, c.t_end);
            let want = m.final_field().unwrap();
            assert!(field.data.iter().zip(&want.data).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(dir.path().join(format!("member_{k}_final.pgm")).exists());
            assert!(dir.path().join(format!("member_{k}.csv")).exists());
        }
        assert!(fs::read_to_string(dir.path().join("summary.txt")).unwrap().contains("advection2d"));
    }

    #[test]
    fn converge_writes_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::defaults(ExperimentKind::Converge);
        c.paths = 200;
        c.dt_list = vec![0.25, 0.125, 0.0625, 0.03125];
        c.output_dir = dir.path().to_path_buf();
        let r = run_and_write(&c).unwrap();
        assert_eq!(r.study.unwrap().errors.len(), 4);
        assert!(fs::read_to_string(dir.path().join("convergence.csv")).unwrap().starts_with("dt,error"));
    }

    #[test]
    fn gamma_family_runs_all_cases() {
        let r = run(&small(ExperimentKind::GammaFamily)).unwrap();
        assert_eq!(r.members.len(), 4);
        assert!(r.member("gamma=0.5").unwrap().record().unwrap().in_bounds());
    }

    #[test]
    fn split_and_euler_small() {
        let r = run(&small(ExperimentKind::BurgersGarkSplit)).unwrap();
        assert!(r.members[0].record().is_some());
        let mut c = small(ExperimentKind::EulerSalt);
        c.t_end = 0.125;
        let r = run(&c).unwrap();
        assert!(r.max_divergence.unwrap() <= 1e-12);
        assert!(r.members.iter().all(|m| m.record().unwrap().in_bounds()));
    }
}
