use std::f64::consts::FRAC_1_SQRT_2;

use proptest::prelude::*;
use qsync_core::analysis::stats::binomial_sigma;
use qsync_core::engine::steppers::{kraus_step, step_sme, step_sse, unitary_propagator};
use qsync_core::engine::{NoiseKind, NoiseStream, Trapping};
use qsync_core::linalg::{pauli_x, trace_distance};
use qsync_core::scenario::{run_point, ScenarioConfig, SweepPoint};
use qsync_core::{CMatrix, CVector, C64};

const BASE: SweepPoint = SweepPoint {
    weight: None,
    noise_kind: None,
    gamma: None,
};

fn qubit(theta: f64) -> CVector {
    CVector::from_vec(vec![C64::from(theta.cos()), C64::from(theta.sin())])
}

fn diag(v: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(v.len(), v.iter().map(|&x| C64::from(x))))
}

fn n5_scenario(extra: &str) -> ScenarioConfig {
    let text = format!(
        r#"
name = "n5"
noise_kind = "quantum-homodyne"
ensemble_size = 200

[model]
n = 5
gamma = 1.0
measured_site = 3

[initial]
kind = "superposition"

[[initial.terms]]
block = "dfs"
c = 1.0
magnetization = 3
amplitude = [{FRAC_1_SQRT_2}, 0.0]

[[initial.terms]]
block = "complement"
magnetization = 3
amplitude = [{FRAC_1_SQRT_2}, 0.0]

[integrator]
t_final = 100.0
dt = 1e-3
seed = 17

[analysis]
lindblad = false

[outputs]
trajectories = 0
{extra}
"#
    );
    ScenarioConfig::from_toml(&text).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// One Euler step of the density-matrix equation on a pure state agrees
    /// with the projector of one state-vector step up to second order.
    #[test]
    fn sme_and_sse_agree_on_pure_states(theta in 0.0..3.1f64, dw_unit in -3.0..3.0f64) {
        let dt: f64 = 1e-7;
        let dw = dw_unit * dt.sqrt();
        let h = pauli_x().scale(0.7);
        let l = diag(&[0.8, -0.8]);
        let psi = qubit(theta);
        let rho = &psi * psi.adjoint();
        let next_psi = step_sse(&psi, &h, &l, dt, dw).unwrap();
        let next_rho = step_sme(&rho, &h, &l, dt, dw).unwrap();
        let d = trace_distance(&(&next_psi * next_psi.adjoint()), &next_rho);
        prop_assert!(d < 50.0 * dt, "distance {d:.3e}");
    }

    /// A state inside a decoherence-free block picks up no noise: the
    /// measurement update is a global factor and the step is `exp(-iH dt)`.
    #[test]
    fn dfs_states_evolve_unitarily(dw in -0.5..0.5f64, phase in 0.0..6.28f64) {
        // block {0, 1} has L = 1, state 2 is the complement
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 1)] = C64::from(1.0);
        h[(1, 0)] = C64::from(1.0);
        h[(2, 2)] = C64::from(0.3);
        let l_diag = [1.0, 1.0, -1.0];
        let dt = 1e-3;
        let u = unitary_propagator(&h, dt).unwrap();
        let psi = CVector::from_vec(vec![
            C64::from(FRAC_1_SQRT_2),
            C64::from_polar(FRAC_1_SQRT_2, phase),
            C64::from(0.0),
        ]);
        let mut members = vec![(1.0, psi.clone())];
        kraus_step(&mut members, &u, &l_diag, dt, dw).unwrap();
        let expect = &u * &psi;
        prop_assert!((&members[0].1 - expect).norm() < 1e-13);
        prop_assert!(members[0].1[2].norm() == 0.0);
    }
}

/// `H = 0`, `L = σz`: every trajectory collapses to `|0>` or `|1>`, the
/// weight on `|0>` is a martingale and the collapse fraction is `cos²θ`.
#[test]
fn single_qubit_collapse_follows_born_rule() {
    let theta: f64 = 0.6;
    let p0 = theta.cos().powi(2);
    let (m, dt, steps, every) = (2000usize, 1e-3, 8000usize, 400usize);
    let u = unitary_propagator(&CMatrix::zeros(2, 2), dt).unwrap();
    let l_diag = [1.0, -1.0];
    let l = diag(&l_diag);
    let h = CMatrix::zeros(2, 2);
    let samples = steps / every + 1;
    let mut sums = vec![0.0; samples];
    let mut squares = vec![0.0; samples];
    let (mut up_kraus, mut up_euler) = (0usize, 0usize);
    for id in 0..m as u64 {
        let mut members = vec![(1.0, qubit(theta))];
        let mut psi = qubit(theta);
        let mut noise = NoiseStream::new(3, id, dt, 0);
        for k in 0..=steps {
            if k % every == 0 {
                let w = members[0].1[0].norm_sqr();
                sums[k / every] += w;
                squares[k / every] += w * w;
            }
            if k == steps {
                break;
            }
            let dw = noise.next_increment();
            kraus_step(&mut members, &u, &l_diag, dt, dw).unwrap();
            psi = step_sse(&psi, &h, &l, dt, dw).unwrap();
        }
        let w = members[0].1[0].norm_sqr();
        assert!(w < 1e-3 || w > 1.0 - 1e-3, "trajectory {id} undecided at {w}");
        up_kraus += usize::from(w > 0.5);
        up_euler += usize::from(psi[0].norm_sqr() > 0.5);
    }
    let sigma = binomial_sigma(p0, m);
    for (name, up) in [("kraus", up_kraus), ("euler", up_euler)] {
        let f = up as f64 / m as f64;
        assert!((f - p0).abs() < 3.0 * sigma, "{name}: {f} vs {p0} ± {sigma}");
    }
    for k in 1..samples {
        let mean = sums[k] / m as f64;
        let var = squares[k] / m as f64 - mean * mean;
        let se = (var / m as f64).sqrt();
        assert!((mean - p0).abs() < 3.0 * se, "sample {k}: {mean} vs {p0} (se {se})");
    }
}

/// Sampled overlaps that reach `1 - from` and later drop below `1 - to`,
/// out of all that reach `1 - from`.
fn excursions(records: &[qsync_core::engine::TrajectoryRecord], from: f64, to: f64) -> (usize, usize) {
    let (mut absorbed, mut escaped) = (0, 0);
    for rec in records {
        for k in 0..rec.overlaps[0].len() {
            let series: Vec<f64> = rec.overlaps.iter().map(|o| o[k]).collect();
            if let Some(first) = series.iter().position(|&w| w >= 1.0 - from) {
                absorbed += 1;
                escaped += usize::from(series[first..].iter().any(|&w| w < 1.0 - to));
            }
        }
    }
    (escaped, absorbed)
}

/// The weight `p` left outside a fixed point is a continuous martingale that
/// tends to zero, so from `p0` it ever reaches `p1 > p0` with probability
/// `p0 / p1`. Absorption at depth `1e-10` therefore never returns to `1e-5`
/// in practice, while absorption at `1e-6` does so for about 10% of records.
#[test]
fn absorbed_trajectories_follow_the_optional_stopping_law() {
    let mut cfg = n5_scenario("");
    cfg.outputs.trajectories = cfg.ensemble_size;
    let out = run_point(&cfg, BASE).unwrap();
    let (deep_escaped, deep) = excursions(&out.kept, 1e-10, 1e-5);
    assert!(deep > cfg.ensemble_size * 9 / 10, "only {deep} deep absorptions");
    assert_eq!(deep_escaped, 0);
    let (escaped, absorbed) = excursions(&out.kept, 1e-6, 1e-5);
    let bound = 0.1 + 3.0 * binomial_sigma(0.1, absorbed);
    let frac = escaped as f64 / absorbed as f64;
    assert!(frac <= bound, "{escaped}/{absorbed} escaped");
    let tracked = out.summary.absorption_violations as f64 / absorbed as f64;
    assert!(tracked <= bound, "tracker: {} violations", out.summary.absorption_violations);
}

/// Halving `dt` on the same Brownian path moves the trapping fractions by
/// less than the binomial 2σ width.
#[test]
fn trapping_fractions_are_stable_under_dt_halving() {
    let mut coarse = n5_scenario("[trapping]\nstop_when_classified = true\n");
    coarse.ensemble_size = 1000;
    coarse.integrator.t_final = 400.0;
    coarse.integrator.dt = Some(2e-3);
    coarse.integrator.noise_refinement = 1;
    let mut fine = coarse.clone();
    fine.integrator.dt = Some(1e-3);
    fine.integrator.noise_refinement = 0;
    let a = run_point(&coarse, BASE).unwrap().summary;
    let b = run_point(&fine, BASE).unwrap().summary;
    let (ha, hb) = (a.trapping.unwrap(), b.trapping.unwrap());
    assert_eq!(ha.undecided + hb.undecided, 0);
    let sigma = binomial_sigma(0.5, 1000);
    for k in 0..ha.fractions.len() {
        let diff = (ha.fractions[k] - hb.fractions[k]).abs();
        assert!(diff < 2.0 * sigma, "block {k}: {} vs {}", ha.fractions[k], hb.fractions[k]);
    }
    // the coupling is pathwise: most trajectories end in the same place
    let same = a
        .trajectories
        .iter()
        .zip(&b.trajectories)
        .filter(|(x, y)| x.trapped_in == y.trapped_in)
        .count();
    assert!(same > 900, "only {same} trajectories agree");
}

#[test]
fn initial_state_inside_dfs_is_trapped_at_time_zero() {
    let mut cfg = n5_scenario("[trapping]\nstop_when_classified = true\ndwell = 0.0\n");
    cfg.initial.terms.truncate(1);
    cfg.initial.terms[0].amplitude = Some([1.0, 0.0]);
    cfg.ensemble_size = 20;
    let out = run_point(&cfg, BASE).unwrap().summary;
    for t in &out.trajectories {
        assert!(matches!(t.trapped_in, Trapping::Dfs(0)));
        assert_eq!(t.hitting_time, Some(0.0));
    }
}

#[test]
fn classical_noise_conserves_purity() {
    let mut cfg = n5_scenario("");
    cfg.noise_kind = NoiseKind::ClassicalStratonovich;
    cfg.ensemble_size = 20;
    cfg.integrator.t_final = 20.0;
    let out = run_point(&cfg, BASE).unwrap().summary;
    assert!(out.max_purity_drift < 1e-8, "drift {}", out.max_purity_drift);
    // no measurement backaction, so nothing is trapped
    assert!(out.trajectories.iter().all(|t| t.trapped_in == Trapping::Undecided));
}
