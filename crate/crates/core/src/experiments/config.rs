use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fv2d::Stencil;
use crate::increments::IncrementSampler;
use crate::parallel::Execution;
use crate::sdebench::{parse_dt_list, Estimator, Interpretation, LinearTestSde};
use crate::tableau::parse_number;

/// The experiments and analysis commands the runner knows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    BurgersAblation,
    GammaFamily,
    Advection2d,
    EulerSalt,
    BurgersGarkSplit,
    Converge,
    Radius,
    ValidateIncrements,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::BurgersAblation,
        ExperimentKind::GammaFamily,
        ExperimentKind::Advection2d,
        ExperimentKind::EulerSalt,
        ExperimentKind::BurgersGarkSplit,
        ExperimentKind::Converge,
        ExperimentKind::Radius,
        ExperimentKind::ValidateIncrements,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BurgersAblation => "burgers_ablation",
            ExperimentKind::GammaFamily => "gamma_family",
            ExperimentKind::Advection2d => "advection2d",
            ExperimentKind::EulerSalt => "euler_salt",
            ExperimentKind::BurgersGarkSplit => "burgers_gark_split",
            ExperimentKind::Converge => "converge",
            ExperimentKind::Radius => "radius",
            ExperimentKind::ValidateIncrements => "validate_increments",
        }
    }

    /// Whether the experiment integrates a finite-volume field.
    pub fn is_field_run(self) -> bool {
        matches!(
            self,
            ExperimentKind::BurgersAblation
                | ExperimentKind::GammaFamily
                | ExperimentKind::Advection2d
                | ExperimentKind::EulerSalt
                | ExperimentKind::BurgersGarkSplit
        )
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment `{}`", s.trim())))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a run needs. Start from [`ExperimentConfig::defaults`] and
/// override with [`ExperimentConfig::set`], or parse an INI file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub t_end: f64,
    pub seed: u64,
    pub ensemble: usize,
    pub sampler: IncrementSampler,
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub gammas: Vec<f64>,
    pub limiter: Option<Stencil>,
    pub output_dir: PathBuf,
    pub write_pgm: bool,
    pub exec: Execution,
    /// Constant noise coefficients of the Burgers runs.
    pub noise_a: f64,
    pub noise_b: f64,
    pub n_modes: usize,
    pub amplitude: f64,
    pub sde: LinearTestSde,
    pub dt_list: Vec<f64>,
    pub paths: usize,
    pub estimator: Estimator,
    pub dt: f64,
    pub n_samples: usize,
    /// Tableau file for `radius`; overrides `method` when set.
    pub tableau: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            nx: 64,
            ny: 64,
            nt: 256,
            t_end: 0.5,
            seed: 1,
            ensemble: 1,
            sampler: IncrementSampler::two_point(),
            method: "ssp22".into(),
            m: 1,
            n: 4,
            gammas: vec![0.5, 0.25, 0.75, -1.0 / 40.0],
            limiter: Some(Stencil::ThirteenPoint),
            output_dir: PathBuf::from(format!("out/{}", kind.name())),
            write_pgm: false,
            exec: Execution::default(),
            noise_a: 1.0 / 256.0,
            noise_b: 1.0 / 256.0,
            n_modes: 8,
            amplitude: 1e-4,
            sde: LinearTestSde::default(),
            dt_list: (4..=9).map(|k| 2f64.powi(-k)).collect(),
            paths: 10_000,
            estimator: Estimator::MeanSquare,
            dt: 0.1,
            n_samples: 1_000_000,
            tableau: None,
        };
        match kind {
            ExperimentKind::BurgersAblation | ExperimentKind::GammaFamily => {}
            ExperimentKind::Advection2d => {
                c.t_end = 1.0;
                c.ensemble = 4;
                c.method = "ssp104".into();
                c.sampler = IncrementSampler::three_point();
            }
            ExperimentKind::EulerSalt => {
                c.nx = 128;
                c.ny = 128;
                c.nt = 1024;
                c.t_end = 2.0;
                c.ensemble = 2;
                c.method = "ssp33".into();
                c.sampler = IncrementSampler::three_point();
                c.limiter = Some(Stencil::FivePoint);
            }
            ExperimentKind::BurgersGarkSplit => {
                c.nt = 128;
                c.t_end = 1.0 / 6.0;
                c.method = "strang_sequential".into();
                c.sampler = IncrementSampler::three_point();
            }
            ExperimentKind::Converge => {
                c.method = "em".into();
                c.sampler = IncrementSampler::gaussian();
                c.t_end = 1.0;
            }
            ExperimentKind::Radius => c.method = "ssp104".into(),
            ExperimentKind::ValidateIncrements => {
                c.sampler = IncrementSampler::truncated(1.0).expect("k = 1 is valid");
            }
        }
        c
    }

    /// Switches grid, horizon and ensemble size to the published settings.
    pub fn apply_paper_scale(&mut self) {
        let (nx, nt, t_end, ensemble) = match self.experiment {
            ExperimentKind::BurgersAblation | ExperimentKind::GammaFamily => (128, 512, 0.5, self.ensemble),
            ExperimentKind::Advection2d => (128, 512, 1.0, 16),
            ExperimentKind::EulerSalt => (512, 8192, 16.0, 8),
            ExperimentKind::BurgersGarkSplit => (128, 256, 1.0 / 6.0, self.ensemble),
            _ => return,
        };
        self.nx = nx;
        self.ny = nx;
        self.nt = nt;
        self.t_end = t_end;
        self.ensemble = ensemble;
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| Error::InvalidArgument(format!("`{key}`: expected {what}, got `{v}`"));
        let count = || v.replace('_', "").parse::<usize>().map_err(|_| bad("a count"));
        let real = || parse_number(v);
        let flag = || match v.to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => Ok(true),
            "0" | "false" | "no" | "off" => Ok(false),
            _ => Err(bad("a boolean")),
        };
        match key.trim().to_ascii_lowercase().as_str() {
            "experiment" => self.experiment = v.parse()?,
            "nx" => self.nx = count()?,
            "ny" => self.ny = count()?,
            "nt" => self.nt = count()?,
            "t_end" | "t" => self.t_end = real()?,
            "seed" => self.seed = v.parse().map_err(|_| bad("a 64-bit seed"))?,
            "ensemble" | "members" => self.ensemble = count()?,
            "sampler" | "increments" => self.sampler = v.parse()?,
            "method" | "integrator" => self.method = v.to_string(),
            "m" => self.m = count()?,
            "n" => self.n = count()?,
            "gammas" | "gamma" => {
                self.gammas = v
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(parse_number)
                    .collect::<Result<_>>()?
            }
            "limiter" | "stencil" => {
                self.limiter = match v.to_ascii_lowercase().as_str() {
                    "none" | "off" | "false" | "no" => None,
                    "on" | "true" | "yes" => Some(Stencil::ThirteenPoint),
                    other => Some(other.parse()?),
                }
            }
            "output_dir" | "out" => self.output_dir = PathBuf::from(v),
            "pgm" => self.write_pgm = flag()?,
            "parallel" => {
                self.exec = if flag()? { Execution::Parallel } else { Execution::Sequential }
            }
            "a" | "noise_a" => self.noise_a = real()?,
            "b" | "noise_b" => self.noise_b = real()?,
            "n_modes" | "modes" => self.n_modes = count()?,
            "amplitude" => self.amplitude = real()?,
            "sde_a" => self.sde.a = real()?,
            "sde_b" => self.sde.b = real()?,
            "q0" => self.sde.q0 = real()?,
            "target" | "interpretation" => self.sde.interpretation = v.parse::<Interpretation>()?,
            "dt_list" => self.dt_list = parse_dt_list(v)?,
            "paths" => self.paths = count()?,
            "estimator" => self.estimator = v.parse()?,
            "dt" => self.dt = real()?,
            "n_samples" | "samples" => self.n_samples = count()?,
            "tableau" => self.tableau = Some(PathBuf::from(v)),
            other => return Err(Error::InvalidArgument(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses an INI file: optional `[section]` headers, `key = value`
    /// lines, `#` or `;` comments. Section names are informational only.
    /// The `experiment` key picks the defaults the other keys override.
    pub fn from_ini(text: &str) -> Result<Self> {
        let entries = parse_ini(text)?;
        let (line, kind) = entries
            .iter()
            .find(|(_, k, _)| k == "experiment")
            .map(|(l, _, v)| (*l, v.as_str()))
            .ok_or(Error::Config {
                line: 0,
                msg: "missing `experiment` key".into(),
            })?;
        let kind: ExperimentKind = kind.parse().map_err(|e: Error| Error::Config {
            line,
            msg: e.to_string(),
        })?;
        let mut cfg = Self::defaults(kind);
        for (line, key, value) in &entries {
            cfg.set(key, value).map_err(|e| Error::Config {
                line: *line,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn dt_field(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.experiment.is_field_run() {
            if self.nx == 0 || self.ny == 0 {
                return bad("nx and ny must be positive".into());
            }
            crate::integrators::PathSpec::to_horizon(self.t_end, self.nt, 1)?;
            if self.ensemble == 0 {
                return bad("ensemble must be at least 1".into());
            }
            if self.m == 0 || self.n == 0 {
                return bad("m and n must be at least 1".into());
            }
        }
        if self.experiment == ExperimentKind::GammaFamily && self.gammas.iter().any(|&g| g == 0.0) {
            return bad("gamma = 0 has no tableau".into());
        }
        if self.experiment == ExperimentKind::Converge && self.paths == 0 {
            return bad("paths must be positive".into());
        }
        Ok(())
    }

    /// The config as INI text that [`ExperimentConfig::from_ini`] reads back.
    pub fn to_ini(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let limiter = self.limiter.map_or("none".to_string(), |s| s.to_string());
        format!(
            "[experiment]\nexperiment = {}\n\n[grid]\nnx = {}\nny = {}\nnt = {}\nt_end = {:?}\n\n\
             [run]\nseed = {}\nensemble = {}\nsampler = {}\nparallel = {}\n\n\
             [integrator]\nmethod = {}\nm = {}\nn = {}\ngammas = {}\n\n[limiter]\nlimiter = {}\n\n\
             [problem]\na = {:?}\nb = {:?}\nn_modes = {}\namplitude = {:?}\n\n\
             [sde]\nsde_a = {:?}\nsde_b = {:?}\nq0 = {:?}\ntarget = {}\ndt_list = {}\npaths = {}\nestimator = {}\n\n\
             [increments]\ndt = {:?}\nn_samples = {}\n\n[output]\noutput_dir = {}\npgm = {}\n",
            self.experiment,
            self.nx,
            self.ny,
            self.nt,
            self.t_end,
            self.seed,
            self.ensemble,
            sampler_key(&self.sampler),
            self.exec == Execution::Parallel,
            self.method,
            self.m,
            self.n,
            list(&self.gammas),
            limiter,
            self.noise_a,
            self.noise_b,
            self.n_modes,
            self.amplitude,
            self.sde.a,
            self.sde.b,
            self.sde.q0,
            self.sde.interpretation,
            list(&self.dt_list),
            self.paths,
            match self.estimator {
                Estimator::WeakMean => "weak",
                Estimator::MeanSquare => "ms",
            },
            self.dt,
            self.n_samples,
            self.output_dir.display(),
            self.write_pgm,
        )
    }
}

fn sampler_key(s: &IncrementSampler) -> String {
    match s.kind() {
        crate::increments::SamplerKind::TruncatedGaussian => format!("truncated_gaussian:{:?}", s.k()),
        _ => s.to_string(),
    }
}

/// `(line, key, value)` triples of an INI document, keys lower-cased.
pub fn parse_ini(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if s.starts_with('[') {
            if !s.ends_with(']') || s.len() < 3 {
                return Err(Error::Config {
                    line,
                    msg: format!("malformed section header `{s}`"),
                });
            }
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config {
            line,
            msg: format!("expected `key = value`, got `{s}`"),
        })?;
        let v = v.split(['#', ';']).next().unwrap_or("").trim();
        let k = k.trim().to_ascii_lowercase();
        if k.is_empty() {
            return Err(Error::Config {
                line,
                msg: "empty key".into(),
            });
        }
        out.push((line, k, v.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_overrides_defaults() {
        let text = "# comment\n[experiment]\nexperiment = euler_salt\n[grid]\nnx = 32 ; inline\nt_end = 1/4\n[limiter]\nlimiter = none\n";
        let c = ExperimentConfig::from_ini(text).unwrap();
        assert_eq!(c.experiment, ExperimentKind::EulerSalt);
        assert_eq!((c.nx, c.ny, c.nt), (32, 128, 1024));
        assert_eq!(c.t_end, 0.25);
        assert_eq!(c.limiter, None);
        assert_eq!(c.method, "ssp33");
    }

    #[test]
    fn ini_errors_carry_line_numbers() {
        assert!(matches!(ExperimentConfig::from_ini("nx = 3\n"), Err(Error::Config { line: 0, .. })));
        let e = ExperimentConfig::from_ini("experiment = radius\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = ExperimentConfig::from_ini("experiment = nope\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
        assert!(ExperimentConfig::from_ini("experiment = radius\njunk\n").is_err());
    }

    #[test]
    fn ini_round_trip() {
        for kind in ExperimentKind::ALL {
            let mut c = ExperimentConfig::defaults(kind);
            c.seed = 77;
            let back = ExperimentConfig::from_ini(&c.to_ini()).unwrap();
            assert_eq!(back, c, "{kind}");
        }
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Advection2d);
        assert!(c.validate().is_ok());
        c.ensemble = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Advection2d);
        c.nt = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn paper_scale() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::EulerSalt);
        c.apply_paper_scale();
        assert_eq!((c.nx, c.nt, c.t_end, c.ensemble), (512, 8192, 16.0, 8));
        let mut r = ExperimentConfig::defaults(ExperimentKind::Radius);
        let before = r.clone();
        r.apply_paper_scale();
        assert_eq!(r, before);
    }
}
