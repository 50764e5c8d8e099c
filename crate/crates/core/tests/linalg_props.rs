use proptest::prelude::*;
use qsync_core::linalg::{
    eigh, fidelity, identity, kron_chain, pauli_x, pauli_y, pauli_z, purity_amplitude, site_operator,
    trace_distance,
};
use qsync_core::{CMatrix, C64};

fn hermitian(dim: usize, entries: &[(f64, f64)]) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let (re, im) = entries[i * dim + j];
            m[(i, j)] = C64::new(re, im);
        }
    }
    (&m + m.adjoint()).scale(0.5)
}

/// `A A† / Tr` with a small identity admixture so the state has full rank.
fn density(dim: usize, entries: &[(f64, f64)], mix: f64) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let (re, im) = entries[i * dim + j];
            a[(i, j)] = C64::new(re, im);
        }
    }
    let rho = &a * a.adjoint() + identity(dim).scale(mix);
    let tr = rho.trace().re;
    rho.unscale(tr)
}

fn entries(dim: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim * dim)
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigh_reconstructs_hermitian_matrices(dim in 1usize..12, seed in entries(12)) {
        let m = hermitian(dim, &seed);
        let e = eigh(&m).unwrap();
        prop_assert!(max_diff(&e.reconstruct(), &m) < 1e-10);
        let gram = e.vectors.adjoint() * &e.vectors;
        prop_assert!(max_diff(&gram, &identity(dim)) < 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn site_operators_factorize(n in 1usize..6, site in 0usize..6, which in 0usize..3) {
        let site = site % n;
        let op = [pauli_x(), pauli_y(), pauli_z()][which].clone();
        let mut factors = vec![identity(2); n];
        factors[site] = op.clone();
        let direct = kron_chain(&factors).unwrap();
        prop_assert_eq!(site_operator(&op, site, n).unwrap(), direct.clone());
        // every Pauli string squares to the identity
        prop_assert!(max_diff(&(&direct * &direct), &identity(1 << n)) < 1e-14);
    }

    #[test]
    fn kron_matches_index_formula(a in entries(2), b in entries(2), c in entries(2)) {
        let m = [hermitian(2, &a), hermitian(2, &b), hermitian(2, &c)];
        let k = kron_chain(&m).unwrap();
        // row index bits (i0 i1 i2), site 0 most significant
        for row in 0..8 {
            for col in 0..8 {
                let bit = |x: usize, s: usize| (x >> (2 - s)) & 1;
                let expect = (0..3).fold(C64::from(1.0), |acc, s| acc * m[s][(bit(row, s), bit(col, s))]);
                prop_assert!((k[(row, col)] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(
        dim in 2usize..7,
        a in entries(6),
        b in entries(6),
        mix in 1e-3..0.5f64,
    ) {
        let rho = density(dim, &a, mix);
        let sigma = density(dim, &b, mix);
        let f_rs = fidelity(&rho, &sigma).unwrap();
        let f_sr = fidelity(&sigma, &rho).unwrap();
        prop_assert!((f_rs - f_sr).abs() < 1e-8, "{} vs {}", f_rs, f_sr);
        prop_assert!((0.0..=1.0).contains(&f_rs));
        prop_assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-8);
        // Fuchs–van de Graaf: 1 - sqrt(F) <= D <= sqrt(1 - F)
        let d = trace_distance(&rho, &sigma);
        prop_assert!(1.0 - f_rs.sqrt() <= d + 1e-8);
        prop_assert!(d <= (1.0 - f_rs).max(0.0).sqrt() + 1e-8);
    }

    #[test]
    fn purity_amplitude_identity_holds(
        theta in 0.0..std::f64::consts::PI,
        phi in 0.0..std::f64::consts::TAU,
        r in 0.0..=1.0f64,
    ) {
        let a = [r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()];
        let p = purity_amplitude(a).unwrap();
        prop_assert!(p.identity_residual.abs() < 1e-12);
        // the amplitude is bounded by the Bloch length sqrt(2P - 1)
        prop_assert!(p.amplitude <= (2.0 * p.purity - 1.0).sqrt() + 1e-12);
        prop_assert!((p.coherence - 2.0 * p.amplitude).abs() < 1e-15);
        prop_assert!((0.5..=1.0 + 1e-15).contains(&p.purity));
    }

    #[test]
    fn pure_state_amplitude_matches_two_purity_minus_one(
        theta in 0.0..std::f64::consts::PI,
        phi in 0.0..std::f64::consts::TAU,
    ) {
        let a = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let p = purity_amplitude(a).unwrap();
        prop_assert!(p.pure_state_residual.abs() < 1e-12);
        prop_assert!(p.amplitude <= 2.0 * p.purity - 1.0 + 1e-12);
    }
}

#[test]
fn purity_amplitude_matches_density_matrix_oscillation() {
    // <σx>(t) under H = σz swings with amplitude sqrt(ax² + ay²)
    let a = [0.3, -0.4, 0.5];
    let p = purity_amplitude(a).unwrap();
    let rho = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0 + a[2], 0.0),
            C64::new(a[0], -a[1]),
            C64::new(a[0], a[1]),
            C64::new(1.0 - a[2], 0.0),
        ],
    )
    .scale(0.5);
    assert!(((&rho * &rho).trace().re - p.purity).abs() < 1e-15);
    let mut peak: f64 = 0.0;
    for k in 0..2000 {
        let t = k as f64 * std::f64::consts::PI / 2000.0;
        let u = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::from_polar(1.0, -t),
            C64::from_polar(1.0, t),
        ]));
        let rt = &u * &rho * u.adjoint();
        peak = peak.max((pauli_x() * rt).trace().re.abs());
    }
    assert!((peak - p.amplitude).abs() < 1e-5);
}
