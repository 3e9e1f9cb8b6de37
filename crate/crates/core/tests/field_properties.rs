//! Structural invariants of spectral fields under the basic operations.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scbf::basis::BasisIndex;
use scbf::field::{SpectralField, VectorSpectrum};
use scbf::operators::{
    convection_exact, leray_project, leray_project_vector, trilinear, OperatorConfig, Operators,
};
use scbf::transform::to_physical;

fn field(basis: &Arc<BasisIndex>, seed: u64) -> SpectralField {
    SpectralField::random(basis, &mut ChaCha8Rng::seed_from_u64(seed), 1.0)
}

fn basis(d: usize, n: usize) -> Arc<BasisIndex> {
    Arc::new(BasisIndex::new(d, n).unwrap())
}

/// Hermitian vector coefficients with no divergence constraint.
fn raw_vector(basis: &Arc<BasisIndex>, seed: u64) -> VectorSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vs = VectorSpectrum::zeros(basis);
    for w in basis.canonical_waves() {
        let mut v = [Complex64::new(0.0, 0.0); 3];
        for c in v.iter_mut().take(basis.dim()) {
            *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        vs.values[w] = v;
        vs.values[basis.conj_wave(w)] = v.map(|c| c.conj());
    }
    vs
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![(Just(2usize), 1usize..7), (Just(3usize), 1usize..4)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nonlinear_terms_stay_real_and_solenoidal((d, n) in dims(), seed in any::<u64>(), r in 1.0f64..5.0) {
        let b = basis(d, n);
        let u = field(&b, seed);
        let v = field(&b, seed ^ 1);
        let ops = Operators::new(&b, OperatorConfig { r, ..OperatorConfig::default() }).unwrap();
        for out in [ops.convection(&u, &v).unwrap(), ops.absorption(&u).unwrap(), u.add(&v.scaled(-0.3))] {
            let scale = out.max_abs().max(f64::MIN_POSITIVE);
            prop_assert!(out.hermitian_defect() <= 1e-13 * scale, "hermitian defect {}", out.hermitian_defect());
            prop_assert!(out.divergence_defect() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn parseval_on_fine_grids((d, n) in dims(), seed in any::<u64>(), extra in 1usize..4) {
        let b = basis(d, n);
        let u = field(&b, seed);
        let p = to_physical(&u, 2 * n + extra).unwrap();
        let quad = p.mean_dot(&p);
        prop_assert!((quad - u.norm_h_sq()).abs() <= 1e-10 * u.norm_h_sq());
    }

    #[test]
    fn leray_projection_is_idempotent((d, n) in dims(), seed in any::<u64>()) {
        let b = basis(d, n);
        let once = leray_project_vector(&raw_vector(&b, seed));
        let twice = leray_project_vector(&once);
        for (x, y) in once.values.iter().zip(&twice.values) {
            for i in 0..3 {
                prop_assert!((x[i] - y[i]).norm() <= 1e-15 * (1.0 + x[i].norm()));
            }
        }
        let p = leray_project(&once);
        prop_assert!(leray_project(&p.to_vector_spectrum()).sub(&p).max_abs() <= 1e-15 * (1.0 + p.max_abs()));
    }

    #[test]
    fn trilinear_form_is_antisymmetric((d, n) in prop_oneof![(Just(2usize), 1usize..5), (Just(3usize), 1usize..3)], seed in any::<u64>()) {
        let b = basis(d, n);
        let (u, v, w) = (field(&b, seed), field(&b, seed ^ 2), field(&b, seed ^ 3));
        let self_term = convection_exact(&u, &v).inner(&v);
        prop_assert!(self_term.abs() <= 1e-10 * u.norm_h() * v.norm_v_sq());
        let (a, c) = (trilinear(&u, &v, &w), trilinear(&u, &w, &v));
        prop_assert!((a + c).abs() <= 1e-10 * a.abs().max(c.abs()).max(1e-300));
    }
}

#[test]
fn basis_pairs_conjugate_waves_and_orthogonal_polarizations() {
    for (d, n) in [(2, 5), (3, 3)] {
        let b = basis(d, n);
        for w in 0..b.num_waves() {
            let k = b.wave(w);
            assert!(!k.is_zero());
            assert_eq!(b.wave(b.conj_wave(w)), k.neg());
            let kf = k.as_f64();
            for p in 0..b.npol() {
                let e = b.polarization(w, p);
                let dot: f64 = (0..3).map(|i| e[i] * kf[i]).sum();
                let len: f64 = e.iter().map(|x| x * x).sum();
                assert!(dot.abs() < 1e-14 && (len - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(b.num_modes(), BasisIndex::new(d, n).unwrap().num_modes());
    }
}
