use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(lp: f64, lm: f64) -> ModelParams {
    ModelParams::from_khz(100.0, -77.0, lp, lm, 100.0).unwrap()
}

fn basis_state(spec: HilbertSpec, m: i32, n: u32) -> DensityState {
    let mut amp = vec![ZERO; spec.dim()];
    amp[spec.index(m, n)] = Complex64::new(1.0, 0.0);
    DensityState::from_pure(spec, &amp).unwrap()
}

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let h = &a + a.adjoint();
    let tr = h.trace();
    h / tr
}

/// Direct transcription with dense operators.
fn dense_rhs(rho: &DMatrix<Complex64>, spec: &HilbertSpec, m: &ModelParams) -> DMatrix<Complex64> {
    let c = |x: &DMatrix<f64>| x.map(|v| Complex64::new(v, 0.0));
    let h = c(&build_hamiltonian(m, spec).unwrap().to_dense());
    let op = full_operators(spec).unwrap();
    let a = c(&op.a);
    let ad = a.adjoint();
    let n = &ad * &a;
    let k = Complex64::new(m.kappa, 0.0);
    (&h * rho - rho * &h) * (-I) + (&a * rho * &ad * Complex64::new(2.0, 0.0) - &n * rho - rho * &n) * k
}

#[test]
fn matches_dense_superoperator() {
    let spec = HilbertSpec::new(2, 5).unwrap();
    let m = params(40.0, 90.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = DensityState { spec, rho: random_hermitian(spec.dim(), &mut rng) };
    let fast = lindblad_rhs(&rho, &build_hamiltonian(&m, &spec).unwrap(), m.kappa);
    let slow = dense_rhs(&rho.rho, &spec, &m);
    assert!((fast - &slow).camax() <= 1e-10 * slow.camax());
}

#[test]
fn dark_state_is_stationary() {
    let spec = HilbertSpec::new(3, 6).unwrap();
    let m = params(0.0, 0.0);
    let rho = DensityState::spin_up_vacuum(spec).unwrap();
    let d = lindblad_rhs(&rho, &build_hamiltonian(&m, &spec).unwrap(), m.kappa);
    assert_eq!(d.camax(), 0.0);
}

#[test]
fn single_photon_decays_at_twice_kappa() {
    let spec = HilbertSpec::new(1, 6).unwrap();
    let m = params(0.0, 0.0);
    let rho = basis_state(spec, -1, 1);
    let d = lindblad_rhs(&rho, &build_hamiltonian(&m, &spec).unwrap(), m.kappa);
    let dn: f64 = (0..spec.dim()).map(|i| spec.decode(i).1 as f64 * d[(i, i)].re).sum();
    assert!((dn + 2.0 * m.kappa).abs() < 1e-9 * m.kappa);
}

#[test]
fn expectations_match_dense_operators() {
    let spec = HilbertSpec::new(2, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rho = random_hermitian(spec.dim(), &mut rng);
    let e = expectations(&spec, &ladder_weights(&spec), rho.as_slice());
    let op = full_operators(&spec).unwrap();
    let tr = |x: &DMatrix<f64>| (x.map(|v| Complex64::new(v, 0.0)) * &rho).trace();
    assert!((e.a - tr(&op.a)).norm() < 1e-12);
    assert!((e.jm - tr(&op.jm)).norm() < 1e-12);
    assert!((e.jz - tr(&op.jz).re).abs() < 1e-12);
    assert!((e.n - tr(&op.n).re).abs() < 1e-12);
    assert!((e.j2 - 6.0 * rho.trace().re).abs() < 1e-12);
}

#[test]
fn undriven_single_atom_is_constant() {
    let spec = HilbertSpec::new(1, 5).unwrap();
    let settings = QuantumSettings { horizon: 20e-6, ..Default::default() };
    let s = evolve_density(&DensityState::spin_up_vacuum(spec).unwrap(), &params(0.0, 0.0), &settings).unwrap();
    assert_eq!(s.len(), 41);
    assert!(s.exp_n.iter().all(|&n| n == 0.0));
    assert!(s.exp_jz.iter().all(|&z| z == 1.0));
    assert!(s.exp_a.iter().chain(&s.exp_jm).all(|z| z.norm() == 0.0));
    assert!(s.invariants.holds());
}

/// Simpson rule over uniform samples (odd count).
fn simpson(y: &[f64], dt: f64) -> f64 {
    assert!(y.len() % 2 == 1);
    let n = y.len() - 1;
    let inner: f64 = (1..n).map(|k| if k % 2 == 1 { 4.0 * y[k] } else { 2.0 * y[k] }).sum();
    dt / 3.0 * (y[0] + inner + y[n])
}

#[test]
fn counter_rotating_only_exchange_bookkeeping() {
    // with λ₋ = 0, n − Jz changes only through cavity loss
    let spec = HilbertSpec::new(2, 10).unwrap();
    let m = params(120.0, 0.0);
    let settings = QuantumSettings { horizon: 10e-6, dt_sample: 0.02e-6, rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
    let s = evolve_density(&basis_state(spec, -2, 0), &m, &settings).unwrap();
    assert!(s.exp_n.iter().any(|&n| n > 0.05), "no exchange happened");
    let q: Vec<f64> = s.exp_n.iter().zip(&s.exp_jz).map(|(n, z)| n - z).collect();
    for k in (2..s.len()).step_by(2) {
        let lost = 2.0 * m.kappa * simpson(&s.exp_n[..=k], settings.dt_sample);
        assert!((q[k] - q[0] + lost).abs() < 1e-6, "t = {}: {}", s.t[k], q[k] - q[0] + lost);
    }
    assert!(s.invariants.holds(), "{:?}", s.invariants);
    assert!(s.invariants.max_j2_drift < 1e-8);
}

#[test]
fn truncation_overflow_names_time() {
    let spec = HilbertSpec::new(4, 4).unwrap();
    let settings = QuantumSettings { horizon: 50e-6, check_invariants: false, ..Default::default() };
    match evolve_density(&DensityState::spin_up_vacuum(spec).unwrap(), &params(300.0, 300.0), &settings) {
        Err(Error::TruncationOverflow { t, population }) => assert!(t > 0.0 && population > 1e-4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn initial_state_input() {
    let spec = HilbertSpec::new(1, 4).unwrap();
    let h = 0.5f64.sqrt();
    let rho = parse_initial_state(&format!("[[0, {h}, 0.0], [6, 0.0, {h}]]"), spec).unwrap();
    assert!((rho.rho[(0, 6)] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    assert!(rho.check().holds());
    assert!(parse_initial_state("[[0, 1.0000001, 0.0]]", spec).is_ok());
    assert!(parse_initial_state("[[0, 0.5, 0.0]]", spec).is_err());
    assert!(parse_initial_state("[[15, 1.0, 0.0]]", spec).is_err());
    assert!(parse_initial_state("[[0, 1.0, 0.0], [0, 0.0, 0.0]]", spec).is_err());
    assert!(parse_initial_state("{\"a\": 1}", spec).is_err());
}

#[test]
fn table_header() {
    let spec = HilbertSpec::new(1, 4).unwrap();
    let settings = QuantumSettings { horizon: 2e-6, ..Default::default() };
    let s = evolve_density(&DensityState::spin_up_vacuum(spec).unwrap(), &params(10.0, 10.0), &settings).unwrap();
    let mut buf = Vec::new();
    s.write_table(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().nth(1), Some("t_s,re_alpha,im_alpha,re_beta,im_beta,w,n_photon"));
    assert_eq!(text.lines().count(), 2 + s.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_is_preserved(seed: u64, lp in 0.0f64..200.0, lm in 0.0f64..200.0, n_atoms in 1u32..4) {
        let spec = HilbertSpec::new(n_atoms, 5).unwrap();
        let m = params(lp, lm);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = DensityState { spec, rho: random_hermitian(spec.dim(), &mut rng) };
        let d = lindblad_rhs(&rho, &build_hamiltonian(&m, &spec).unwrap(), m.kappa);
        let norm = rho.rho.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // rates are O(1e6) s⁻¹, so compare against the operator scale
        let scale = m.kappa + m.omega + m.omega0.abs() + m.lambda_plus + m.lambda_minus;
        prop_assert!(d.trace().norm() <= 1e-12 * norm * scale * spec.dim() as f64);
    }
}

