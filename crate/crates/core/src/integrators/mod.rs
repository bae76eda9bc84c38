//! Euler–Maruyama flow maps and the SSP stochastic steppers built on them.

mod problem;
mod run;
mod steppers;

pub use problem::{em_scaled, ClampMap, EmFlowMap, NoiseScaling, SdeProblem, SumMap};
pub use run::{run_path, Integrator, Operators, PathRun, PathSpec, Scheme, StepView, Stepper};
pub use steppers::{
    diffusion_pass, drift_pass, em_step, sark_step, sgark_step, shu_osher_step, srk_step,
    strang_additive_step, strang_sequential_step, ShuOsherMethod,
};

/// Step bounds of an SSP run: the critical Euler–Maruyama steps and the
/// radius used to scale them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepBound {
    pub tau0: f64,
    pub tau_f: f64,
    pub tau_g: f64,
    pub radius: f64,
}

impl StepBound {
    /// Largest admissible step of a single-tableau method, `C·τ₀`.
    pub fn srk_limit(&self) -> f64 {
        self.radius * self.tau0
    }

    /// Largest admissible step of an additive method with radii `(r, r̃)`.
    pub fn additive_limit(&self, r: f64, r_tilde: f64) -> f64 {
        (r * self.tau_f).min(r_tilde * self.tau_g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::RecordSpec;
    use crate::increments::{IncrementSampler, RngStream};
    use crate::tableau::{builtin, ArkPair, ButcherTableau, GarkTableaus};
    use proptest::prelude::*;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
            .fold(0.0, f64::max)
    }

    fn additive(c: f64) -> SdeProblem {
        SdeProblem::new(1, 1, |_, out| out[0] = 0.0, move |_, ds, out| out[0] = c * ds[0])
    }

    /// A smooth nonlinear 3-d problem with two noise components.
    fn smooth_problem() -> SdeProblem {
        SdeProblem::new(
            3,
            2,
            |q, out| {
                out[0] = -q[0] + q[1].sin();
                out[1] = 0.5 * q[0] * q[2];
                out[2] = -q[2].powi(3) + 0.1;
            },
            |q, ds, out| {
                out[0] = 0.3 * q[1] * ds[0];
                out[1] = 0.2 * ds[0] + 0.1 * q[2].cos() * ds[1];
                out[2] = 0.25 * q[0] * ds[1];
            },
        )
    }

    #[test]
    fn em_examples() {
        assert_eq!(em_step(&additive(0.1), &[1.0], 0.1, &[1.0]), vec![1.1]);
        let decay = SdeProblem::linear_scalar(-1.0, 0.0);
        assert!((em_step(&decay, &[1.0], 0.1, &[0.0])[0] - 0.9).abs() < 1e-15);
        let gbm = SdeProblem::linear_scalar(1.0, 1.0);
        assert!((em_step(&gbm, &[2.0], 0.1, &[0.3])[0] - 2.8).abs() < 1e-15);
    }

    #[test]
    fn srk_examples() {
        let p = smooth_problem();
        let q = [0.3, -0.2, 0.7];
        let fe = ButcherTableau::forward_euler();
        assert_eq!(srk_step(&fe, &p, &q, 0.05, &[0.2, -0.1]), em_step(&p, &q, 0.05, &[0.2, -0.1]));

        let (lam, dt) = (-1.7, 0.13);
        let heun = srk_step(&builtin("ssp22").unwrap(), &SdeProblem::linear_scalar(lam, 0.0), &[2.0], dt, &[0.4]);
        let z = lam * dt;
        assert!((heun[0] - 2.0 * (1.0 + z + z * z / 2.0)).abs() < 1e-14);

        let out = srk_step(&builtin("ssp22").unwrap(), &additive(0.37), &[1.5], 0.1, &[1.0]);
        assert!((out[0] - 1.87).abs() < 1e-15);
    }

    #[test]
    fn shu_osher_matches_butcher_on_smooth_problem() {
        let p = smooth_problem();
        let mut rng = RngStream::new(1, 1);
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let ds = [0.1 * rng.normal(), 0.1 * rng.normal()];
            for m in [ShuOsherMethod::Ssp22, ShuOsherMethod::Ssp33, ShuOsherMethod::Ssp104] {
                let a = shu_osher_step(m, &p, &q, 0.02, &ds, NoiseScaling::Linear);
                let b = srk_step(&m.butcher(), &p, &q, 0.02, &ds);
                assert!(rel_err(&a, &b) < 1e-13, "{m:?}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn sqrt_compat_scaling_differs_only_for_ssp104() {
        let p = SdeProblem::linear_scalar(0.5, 1.0);
        let q = [1.0];
        let lin = shu_osher_step(ShuOsherMethod::Ssp22, &p, &q, 0.1, &[0.3], NoiseScaling::Linear);
        let sq = shu_osher_step(ShuOsherMethod::Ssp22, &p, &q, 0.1, &[0.3], NoiseScaling::SqrtCompat);
        assert_eq!(lin, sq);
        let lin = shu_osher_step(ShuOsherMethod::Ssp104, &p, &q, 0.1, &[0.3], NoiseScaling::Linear);
        let sq = shu_osher_step(ShuOsherMethod::Ssp104, &p, &q, 0.1, &[0.3], NoiseScaling::SqrtCompat);
        assert!((lin[0] - sq[0]).abs() > 1e-3);
    }

    #[test]
    fn ssp104_zero_field_is_identity() {
        let zero = SdeProblem::new(2, 1, |_, o| o.fill(0.0), |_, _, o| o.fill(0.0));
        let q = [0.123, -4.5];
        assert_eq!(shu_osher_step(ShuOsherMethod::Ssp104, &zero, &q, 0.3, &[0.7], NoiseScaling::Linear), q);
    }

    #[test]
    fn sark_examples() {
        let p = smooth_problem();
        let q = [0.1, 0.2, -0.3];
        let ds = [0.15, -0.05];
        for name in ["ssp22", "ssp33", "ssp104", "midpoint"] {
            let t = builtin(name).unwrap();
            let a = sark_step(&ArkPair::symmetric(t.clone()), &p, &p, &q, 0.05, &ds);
            let b = srk_step(&t, &p, &q, 0.05, &ds);
            assert!(rel_err(&a, &b) < 1e-14, "{name}");
        }

        let silent = ButcherTableau::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![0.0, 0.0]).unwrap();
        let pair = ArkPair::new(builtin("ssp22").unwrap(), silent).unwrap();
        let x = sark_step(&pair, &p, &p, &q, 0.05, &ds);
        let y = sark_step(&pair, &p, &p, &q, 0.05, &[-3.0, 7.0]);
        assert_eq!(x, y);
        let det = SdeProblem::new(3, 2, |q, o| { let mut t = [0.0; 3]; smooth_problem().drift(q, &mut t); o.copy_from_slice(&t) }, |_, _, o| o.fill(0.0));
        let heun = srk_step(&builtin("ssp22").unwrap(), &det, &q, 0.05, &[0.0, 0.0]);
        assert!(rel_err(&x, &heun) < 1e-14);

        // Hand evaluation with dt = 0: k2 = 1.2, q' = 1 + 0.5·0.2 + 0.5·0.24.
        let gbm = SdeProblem::linear_scalar(1.0, 1.0);
        let pair = ArkPair::symmetric(builtin("ssp22").unwrap());
        let out = sark_step(&pair, &gbm, &gbm, &[1.0], 0.0, &[0.2]);
        assert!((out[0] - 1.22).abs() < 1e-15);
    }

    #[test]
    fn sgark_examples() {
        let p = smooth_problem();
        let q = [0.4, -0.1, 0.25];
        let ds = [0.1, 0.2];
        let pair = ArkPair::new(builtin("ssp22").unwrap(), builtin("midpoint").unwrap()).unwrap();
        let g = GarkTableaus::from_ark(&pair);
        let a = sgark_step(&g, &p, &p, &q, 0.03, &ds);
        let b = sark_step(&pair, &p, &p, &q, 0.03, &ds);
        assert!(rel_err(&a, &b) < 1e-14);

        // Block diagonal with equal tableaus.
        let t = builtin("ssp33").unwrap();
        let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| t.a(i, j)).collect()).collect();
        let zero = vec![vec![0.0; 3]; 3];
        let bd = GarkTableaus::new(rows.clone(), zero.clone(), zero, rows, t.b().to_vec(), t.b().to_vec()).unwrap();
        let a = sgark_step(&bd, &p, &p, &q, 0.03, &ds);
        // Drift stages never see the noise and vice versa.
        let drift_only = srk_step(&t, &SdeProblem::new(3, 2, |q, o| smooth_problem().drift(q, o), |_, _, o| o.fill(0.0)), &q, 0.03, &ds);
        let diff_only = srk_step(&t, &SdeProblem::new(3, 2, |_, o| o.fill(0.0), |q, d, o| smooth_problem().diffusion_apply(q, d, o)), &q, 0.03, &ds);
        let expect: Vec<f64> = (0..3).map(|i| drift_only[i] + diff_only[i] - q[i]).collect();
        assert!(rel_err(&a, &expect) < 1e-13);

        let mut silent = GarkTableaus::from_ark(&ArkPair::symmetric(builtin("ssp22").unwrap()));
        silent.b_g = vec![0.0, 0.0];
        silent.a_fg = vec![vec![0.0; 2]; 2];
        let x = sgark_step(&silent, &p, &p, &q, 0.03, &ds);
        let y = sgark_step(&silent, &p, &p, &q, 0.03, &[5.0, -5.0]);
        assert_eq!(x, y);

        let one = GarkTableaus::new(vec![vec![0.0]], vec![vec![0.0]], vec![vec![0.0]], vec![vec![0.0]], vec![1.0], vec![1.0]).unwrap();
        let a = sgark_step(&one, &p, &p, &q, 0.03, &ds);
        assert!(rel_err(&a, &em_step(&p, &q, 0.03, &ds)) < 1e-15);
    }

    fn heun_factor(z: f64) -> f64 {
        1.0 + z + z * z / 2.0
    }

    #[test]
    fn strang_reductions() {
        let p = smooth_problem();
        let drift_only = SdeProblem::new(3, 2, |q, o| smooth_problem().drift(q, o), |_, _, o| o.fill(0.0));
        let diff_only = SdeProblem::new(3, 2, |_, o| o.fill(0.0), |q, d, o| smooth_problem().diffusion_apply(q, d, o));
        let q = [0.2, 0.1, -0.4];
        let ds = [0.3, -0.2];
        for (m, n) in [(1, 1), (2, 3), (3, 4)] {
            let seq = strang_sequential_step(m, n, &drift_only, &drift_only, &q, 0.1, &ds);
            let mut expect = q.to_vec();
            for _ in 0..2 * m {
                expect = shu_osher_step(ShuOsherMethod::Ssp22, &drift_only, &expect, 0.1 / (2 * m) as f64, &[0.0, 0.0], NoiseScaling::Linear);
            }
            assert!(rel_err(&seq, &expect) < 1e-15);
            let add = strang_additive_step(m, n, &drift_only, &drift_only, &q, 0.1, &ds);
            assert!(rel_err(&add, &drift_pass(m, &drift_only, &q, 0.1)) < 1e-15);

            let seq = strang_sequential_step(m, n, &diff_only, &diff_only, &q, 0.1, &ds);
            assert!(rel_err(&seq, &diffusion_pass(n, &diff_only, &q, &ds)) < 1e-15);
            let add = strang_additive_step(m, n, &diff_only, &diff_only, &q, 0.1, &ds);
            assert!(rel_err(&add, &diffusion_pass(n, &diff_only, &q, &ds)) < 1e-15);
        }
        // Full problem through both maps gives a finite answer close to SSP22.
        let full = strang_sequential_step(1, 1, &p, &p, &q, 0.01, &[0.01, 0.02]);
        let ssp = shu_osher_step(ShuOsherMethod::Ssp22, &p, &q, 0.01, &[0.01, 0.02], NoiseScaling::Linear);
        assert!(rel_err(&full, &ssp) < 1e-3);
    }

    #[test]
    fn strang_linear_composition_oracle() {
        let (alpha, beta) = (-0.8, 0.6);
        let p = SdeProblem::linear_scalar(alpha, beta);
        let (dt, dw) = (0.2, 0.35);
        // Independent closed forms of the three sub-flows.
        let drift = |h: f64| heun_factor(alpha * h);
        let diff = heun_factor(beta * dw);
        let q0 = 1.7;
        let seq = strang_sequential_step(1, 1, &p, &p, &[q0], dt, &[dw])[0];
        let expect = drift(dt / 2.0) * diff * drift(dt / 2.0) * q0;
        assert!((seq - expect).abs() <= 1e-14 * expect.abs());
        let add = strang_additive_step(1, 1, &p, &p, &[q0], dt, &[dw])[0];
        let expect = 0.5 * (diff * drift(dt) + drift(dt) * diff) * q0;
        assert!((add - expect).abs() <= 1e-14 * expect.abs());
    }

    #[test]
    fn additive_noise_exactness() {
        // f ≡ 0, state-independent G: λ2 = 1 methods add exactly GΔS.
        let c = 0.37;
        let p = additive(c);
        let q = [2.5];
        for m in [ShuOsherMethod::Ssp22, ShuOsherMethod::Ssp33, ShuOsherMethod::Ssp104] {
            let a = shu_osher_step(m, &p, &q, 0.1, &[1.0], NoiseScaling::Linear);
            assert!((a[0] - (q[0] + c)).abs() < 1e-14, "{m:?}");
            let b = srk_step(&m.butcher(), &p, &q, 0.1, &[1.0]);
            assert!((b[0] - (q[0] + c)).abs() < 1e-14, "{m:?}");
        }
        for (m, n) in [(1, 1), (2, 4)] {
            let a = strang_sequential_step(m, n, &p, &p, &q, 0.1, &[1.0]);
            assert!((a[0] - (q[0] + c)).abs() < 1e-14);
            let a = strang_additive_step(m, n, &p, &p, &q, 0.1, &[1.0]);
            assert!((a[0] - (q[0] + c)).abs() < 1e-14);
        }
    }

    #[test]
    fn deterministic_reduction() {
        let (lam, dt) = (-2.3, 0.07);
        let p = SdeProblem::linear_scalar(lam, 0.9);
        let det = SdeProblem::linear_scalar(lam, 0.0);
        let q = [1.3];
        for m in [ShuOsherMethod::Ssp22, ShuOsherMethod::Ssp33, ShuOsherMethod::Ssp104] {
            let stoch = shu_osher_step(m, &det, &q, dt, &[0.4], NoiseScaling::Linear);
            let ode = srk_step(&m.butcher(), &p, &q, dt, &[0.0]);
            assert!(rel_err(&stoch, &ode) < 1e-13, "{m:?}");
        }
    }

    #[test]
    fn run_path_examples() {
        let decay = SdeProblem::linear_scalar(-1.0, 0.0);
        let em = Integrator::new(Scheme::EulerMaruyama, &decay);
        let spec = PathSpec { dt: 0.1, n_steps: 10, noise_dim: 1 };
        let run = run_path(&em, &[1.0], spec, &IncrementSampler::two_point(), &mut RngStream::new(0, 0), RecordSpec::default(), None).unwrap();
        assert!((run.state[0] - 0.9f64.powi(10)).abs() < 1e-15);
        assert!((run.state[0] - 0.34867844).abs() < 1e-8);
        assert_eq!(run.record.len(), 11);

        let zero_spec = PathSpec { n_steps: 0, ..spec };
        let run = run_path(&em, &[1.0], zero_spec, &IncrementSampler::two_point(), &mut RngStream::new(0, 0), RecordSpec::default(), None).unwrap();
        assert_eq!(run.state, vec![1.0]);

        let zero = SdeProblem::new(2, 1, |_, o| o.fill(0.0), |_, _, o| o.fill(0.0));
        let em = Integrator::new(Scheme::EulerMaruyama, &zero);
        let spec = PathSpec { dt: 0.3, n_steps: 37, noise_dim: 1 };
        let run = run_path(&em, &[0.5, -2.0], spec, &IncrementSampler::gaussian(), &mut RngStream::new(9, 1), RecordSpec::default(), None).unwrap();
        assert_eq!(run.state, vec![0.5, -2.0]);
    }

    #[test]
    fn run_path_reports_blowup_step() {
        let p = SdeProblem::new(1, 1, |q, o| o[0] = q[0] * q[0], |_, _, o| o[0] = 0.0);
        let em = Integrator::new(Scheme::EulerMaruyama, &p);
        let spec = PathSpec { dt: 1.0, n_steps: 50, noise_dim: 1 };
        let err = run_path(&em, &[2.0], spec, &IncrementSampler::two_point(), &mut RngStream::new(0, 0), RecordSpec::default(), None).unwrap_err();
        match err {
            crate::Error::NonFinite { step } => assert!(step > 1 && step < 50),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn run_path_is_replayable_and_calls_hook() {
        let p = SdeProblem::linear_scalar(0.3, 0.5);
        let int = Integrator::new(Scheme::ShuOsher(ShuOsherMethod::Ssp33), &p);
        let spec = PathSpec::to_horizon(1.0, 64, 1).unwrap();
        let mut seen = 0;
        let mut hook = |v: &StepView<'_>| {
            seen += 1;
            assert_eq!(v.step, seen);
        };
        let a = run_path(&int, &[1.0], spec, &IncrementSampler::gaussian(), &mut RngStream::new(4, 2), RecordSpec::default(), Some(&mut hook)).unwrap();
        assert_eq!(seen, 64);
        let b = run_path(&int, &[1.0], spec, &IncrementSampler::gaussian(), &mut RngStream::new(4, 2), RecordSpec::default(), None).unwrap();
        assert_eq!(a.state, b.state);
        assert!(PathSpec::to_horizon(0.0, 4, 1).is_err());
    }

    #[test]
    fn scheme_names() {
        assert!(matches!(Scheme::from_name("ssp104", 1, 1).unwrap(), Scheme::ShuOsher(ShuOsherMethod::Ssp104)));
        assert!(matches!(Scheme::from_name("midpoint", 1, 1).unwrap(), Scheme::Butcher(_)));
        assert!(matches!(Scheme::from_name("gamma(3/4)", 1, 1).unwrap(), Scheme::Butcher(_)));
        assert!(matches!(Scheme::from_name("strang_sequential", 1, 4).unwrap(), Scheme::StrangSequential { m: 1, n: 4 }));
        assert!(Scheme::from_name("rk4", 1, 1).is_err());
    }

    #[test]
    fn step_bound_limits() {
        let b = StepBound { tau0: 0.1, tau_f: 0.2, tau_g: 0.05, radius: 6.0 };
        assert!((b.srk_limit() - 0.6).abs() < 1e-15);
        assert!((b.additive_limit(1.0, 4.0) - 0.2).abs() < 1e-15);
    }

    /// Any map whose output stays in [0, 1] keeps every convex-combination
    /// method in [0, 1], whatever the increment.
    fn in_unit_box(v: &[f64]) -> bool {
        v.iter().all(|x| (0.0..=1.0).contains(x))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn convex_combination_boundedness(
            q in proptest::collection::vec(0.0f64..=1.0, 3),
            seed in any::<u64>(),
            dt in 0.0f64..5.0,
        ) {
            let p = smooth_problem();
            let clamp = ClampMap { inner: &p, lo: 0.0, hi: 1.0 };
            let mut rng = RngStream::new(seed, 0);
            for _ in 0..4 {
                let ds = [3.0 * rng.normal(), 3.0 * rng.normal()];
                for m in [ShuOsherMethod::Ssp22, ShuOsherMethod::Ssp33, ShuOsherMethod::Ssp104] {
                    prop_assert!(in_unit_box(&shu_osher_step(m, &clamp, &q, dt, &ds, NoiseScaling::Linear)));
                }
                for (m, n) in [(1, 1), (1, 4), (3, 2)] {
                    prop_assert!(in_unit_box(&strang_sequential_step(m, n, &clamp, &clamp, &q, dt, &ds)));
                    prop_assert!(in_unit_box(&strang_additive_step(m, n, &clamp, &clamp, &q, dt, &ds)));
                }
            }
        }

        #[test]
        fn shu_osher_butcher_equivalence_linear(
            lam in -3.0f64..3.0, mu in -2.0f64..2.0, q0 in -5.0f64..5.0,
            dt in 0.0f64..0.5, ds in -1.0f64..1.0,
        ) {
            let p = SdeProblem::linear_scalar(lam, mu);
            for m in [ShuOsherMethod::Ssp22, ShuOsherMethod::Ssp33] {
                let a = shu_osher_step(m, &p, &[q0], dt, &[ds], NoiseScaling::Linear)[0];
                let b = srk_step(&m.butcher(), &p, &[q0], dt, &[ds])[0];
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            }
        }
    }
}
