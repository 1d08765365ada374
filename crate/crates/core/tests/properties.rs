//! Statistical and end-to-end properties that need large ensembles or many
//! random inputs.

use apsipic::diagnostics::{entropy_estimate, total_energy, HistogramConfig};
use apsipic::fields::{ElectricField, Grid2D};
use apsipic::model::{mat_m, mat_r, Mat2};
use apsipic::noise::NoiseStream;
use apsipic::pic::{pic_step, sample_initial, solve_fields, DiocotronInit, Ensemble};
use apsipic::poisson::PoissonConfig;
use apsipic::pushers::{PhaseState, SchemeRegistry};
use apsipic::{MagneticProfile, ScaleParams};
use proptest::prelude::*;
use rayon::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn resolvent_identity_holds(
        log_eps in -8.0f64..0.0,
        log_tau in -3.0f64..3.0,
        log_dt in -4.0f64..0.0,
        b0 in 0.5f64..2.0,
        x in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let p = ScaleParams::new(10f64.powf(log_eps), 10f64.powf(log_tau), 1.0, 10f64.powf(log_dt)).unwrap();
        let b = MagneticProfile::uniform(b0).unwrap();
        let m = mat_m(x, &b, &p);
        let r = mat_r(x, &b, p.epsilon(), p.tau()).unwrap();
        let gap = m.scaled(p.lambda()).sub(&r).sub(&m.mul(&r).scaled(-1.0)).max_abs();
        prop_assert!(gap <= 1e-10, "gap {gap:e}");
        let a = Mat2::id_plus_k(1.0 + p.delta() / p.tau(), -p.lambda() * b0);
        prop_assert!(a.mul(&m).sub(&Mat2::IDENTITY).max_abs() <= 1e-12);
    }
}

#[test]
fn initial_sample_statistics() {
    let n = 1_000_000;
    let e = sample_initial(&DiocotronInit::default(), n, 11).unwrap();
    let nf = n as f64;
    for c in 0..2 {
        let mean = e.particles().iter().map(|p| p.state.v[c]).sum::<f64>() / nf;
        let var = e.particles().iter().map(|p| (p.state.v[c] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        // standard errors of a unit-variance normal sample
        assert!(mean.abs() <= 3.0 / nf.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 3.0 * (2.0 / nf).sqrt(), "variance {var}");
    }
    // orthogonal least squares on 1 + a cos 5θ + b sin 5θ
    let (mut c5, mut s5) = (0.0, 0.0);
    for p in e.particles() {
        let th = p.state.x[1].atan2(p.state.x[0]);
        c5 += (5.0 * th).cos();
        s5 += (5.0 * th).sin();
    }
    let amp = 2.0 * c5.hypot(s5) / nf;
    assert!((amp - 0.2).abs() <= 0.02, "mode-5 amplitude {amp}");
}

#[test]
fn entropy_decreases_during_collisional_relaxation() {
    let n = 1_000_000;
    let noise = NoiseStream::new(21);
    let mut states: Vec<PhaseState> = (0..n as u64)
        .map(|id| {
            // smooth positions inside (-4, 4)², cold Gaussian velocities (variance 0.1)
            let a = noise.draw(id, 1_000_000);
            let u = [(a.xi[0] * 0.7).tanh() * 4.0, (a.xi[1] * 0.7).tanh() * 4.0];
            let v = noise.draw(id, 1_000_001).xi;
            PhaseState::new(u, [v[0] * 0.1f64.sqrt(), v[1] * 0.1f64.sqrt()])
        })
        .collect();
    let p = ScaleParams::new(1.0, 1.0, 1.0, 0.05).unwrap();
    let e = ElectricField::zero();
    let b = MagneticProfile::uniform(1.0).unwrap();
    let registry = SchemeRegistry::default();
    let scheme = registry.get("APSI1").unwrap();
    let bins = HistogramConfig::default();
    let entropy = |s: &[PhaseState]| {
        let ens = Ensemble::from_states(s.iter().map(|&st| (st, 1.0 / n as f64)), 0).unwrap();
        entropy_estimate(&ens, &bins)
    };
    let mut history = vec![entropy(&states)];
    for step in 0..60u64 {
        states.par_iter_mut().enumerate().for_each(|(id, s)| {
            *s = scheme.step(*s, &e, &b, &p, noise.draw(id as u64, step)).unwrap();
        });
        if step % 10 == 9 {
            history.push(entropy(&states));
        }
    }
    // histogram noise at 10⁶ markers in 16⁴ cells is far below these gaps
    for w in history.windows(2) {
        assert!(w[1] < w[0], "entropy rose: {history:?}");
    }
    assert!(history[0] - history[history.len() - 1] > 0.5, "{history:?}");
}

/// Largest single-step change of `H` over `t ∈ [0, 0.4]` with negligible
/// collisions.
fn max_energy_step(dt: f64) -> f64 {
    let grid = Grid2D::square(-8.0, 8.0, 65).unwrap();
    let pcfg = PoissonConfig::default();
    let b = MagneticProfile::uniform(1.0).unwrap();
    let registry = SchemeRegistry::default();
    let scheme = registry.get("APSI1").unwrap();
    let p = ScaleParams::new(1.0, 1e12, 0.0, dt).unwrap();
    let mut e = sample_initial(&DiocotronInit::default(), 20_000, 3).unwrap();
    let energy = |e: &Ensemble| total_energy(e, &solve_fields(e, &grid, &pcfg, None).unwrap().fields.e);
    let mut prev = energy(&e);
    let mut worst = 0.0f64;
    for _ in 0..(0.4 / dt).round() as usize {
        pic_step(&mut e, &grid, &pcfg, &p, &b, scheme).unwrap();
        let h = energy(&e);
        worst = worst.max((h - prev).abs());
        prev = h;
    }
    worst
}

#[test]
fn energy_changes_by_order_dt_squared_per_step() {
    let steps: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| max_energy_step(dt)).collect();
    for w in steps.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "per-step energy change {steps:?}");
    }
}
