//! Randomized checks of the algebraic and monotonicity properties of the
//! discrete operators.

use std::sync::Arc;

use rand::Rng;

use crate::basis::BasisIndex;
use crate::config::auxiliary_rng;
use crate::error::DiagnosticsError;
use crate::field::{PhysicalField, SpectralField};
use crate::operators::{absorption_pointwise, apply_stokes, convection_exact, Dealias, OperatorConfig, Operators};

use super::PropertyReport;

/// Random Hermitian field with `‖u‖_H` log-uniform in `[0.1, 10]`.
pub fn random_field<R: Rng + ?Sized>(basis: &Arc<BasisIndex>, rng: &mut R) -> SpectralField {
    let f = SpectralField::random(basis, rng, 1.0);
    let n = f.norm_h();
    let target = 10f64.powf(rng.random_range(-1.0..1.0));
    if n > 0.0 {
        f.scaled(target / n)
    } else {
        f
    }
}

/// Second member of a pair: independent, or a small perturbation of `u`.
fn partner<R: Rng + ?Sized>(u: &SpectralField, i: usize, rng: &mut R) -> SpectralField {
    let basis = u.basis();
    match i % 4 {
        0 => u.clone(),
        1 => u.add(&random_field(basis, rng).scaled(10f64.powf(-rng.random_range(1.0..6.0)))),
        _ => random_field(basis, rng),
    }
}

fn rel(a: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / scale
    }
}

/// `b(u, v, v) = 0` and `b(u, v, w) = -b(u, w, v)` for the exact
/// truncated convolution.
pub fn operator_identity_suite(basis: &Arc<BasisIndex>, triples: usize, seed: u64) -> PropertyReport {
    let mut rng = auxiliary_rng(seed, 10 + basis.dim() as u64);
    let mut worst_self = 0.0f64;
    let mut worst_anti = 0.0f64;
    for _ in 0..triples {
        let u = random_field(basis, &mut rng);
        let v = random_field(basis, &mut rng);
        let w = random_field(basis, &mut rng);
        let buv = convection_exact(&u, &v);
        let buw = convection_exact(&u, &w);
        let s = buv.inner(&v);
        worst_self = worst_self.max(rel(s.abs(), u.norm_h() * v.norm_v_sq()));
        let a = buv.inner(&w);
        let b = buw.inner(&v);
        worst_anti = worst_anti.max(rel((a + b).abs(), a.abs().max(b.abs())));
    }
    PropertyReport::new(
        format!("trilinear-identities-d{}-n{}", basis.dim(), basis.cutoff()),
        triples,
        -worst_self.max(worst_anti),
        1e-10,
    )
    .with("worst_self_relative", worst_self)
    .with("worst_antisymmetry_relative", worst_anti)
}

fn operators_for(basis: &Arc<BasisIndex>, r: f64) -> Result<Operators, DiagnosticsError> {
    let cfg = OperatorConfig {
        r,
        dealias: Dealias::ExactConvolution,
        ..OperatorConfig::default()
    };
    Ok(Operators::new(basis, cfg)?)
}

/// `⟨Au, u⟩ = ‖u‖²_V` (tolerance 1e-12) and `⟨C(u), u⟩ = ‖u‖^{r+1}_{L^{r+1}}`
/// (tolerance 1e-10) for every exponent in `rs`, relative errors.
pub fn inner_product_suite(
    basis: &Arc<BasisIndex>,
    samples: usize,
    rs: &[f64],
    seed: u64,
) -> Result<Vec<PropertyReport>, DiagnosticsError> {
    let mut rng = auxiliary_rng(seed, 20 + basis.dim() as u64);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = random_field(basis, &mut rng);
        let lhs = apply_stokes(&u).inner(&u);
        worst = worst.max(rel((lhs - u.norm_v_sq()).abs(), u.norm_v_sq()));
    }
    let mut out = vec![PropertyReport::new(
        format!("stokes-form-d{}", basis.dim()),
        samples,
        -worst,
        1e-12,
    )];
    for &r in rs {
        let ops = operators_for(basis, r)?;
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let u = random_field(basis, &mut rng);
            let lhs = ops.absorption(&u)?.inner(&u);
            let rhs = ops.lr1_pow(&u)?;
            worst = worst.max(rel((lhs - rhs).abs(), rhs));
        }
        out.push(
            PropertyReport::new(format!("absorption-form-d{}-r{r}", basis.dim()), samples, -worst, 1e-10)
                .with("r", r),
        );
    }
    Ok(out)
}

fn diff(a: &PhysicalField, b: &PhysicalField) -> PhysicalField {
    let mut out = a.clone();
    for (x, y) in out.components.iter_mut().zip(&b.components) {
        for (p, q) in x.iter_mut().zip(y) {
            *p -= q;
        }
    }
    out
}

fn weighted_square(w: &PhysicalField, d: &PhysicalField, e: f64) -> f64 {
    let n = w.points();
    let mut s = 0.0;
    for i in 0..n {
        let m = w.magnitude(i);
        let f = if e == 0.0 { 1.0 } else { m.powf(e) };
        let dd: f64 = d.components.iter().map(|c| c[i] * c[i]).sum();
        s += f * dd;
    }
    s / n as f64
}

/// Collocation-grid check of
/// `⟨C(u) - C(v), u - v⟩ ≥ 2^{1-r} ‖u - v‖^{r+1}_{L^{r+1}}` and
/// `≥ ½‖|u|^{(r-1)/2}(u - v)‖² + ½‖|v|^{(r-1)/2}(u - v)‖²`.
///
/// Margins are relative to `|lhs| + |bound|`. Every 16th pair also
/// compares the grid value of the left side with the spectral pairing of
/// the projected operators.
pub fn check_monotonicity(ops: &Operators, pairs: usize, seed: u64) -> Result<PropertyReport, DiagnosticsError> {
    let basis = ops.basis();
    let r = ops.config().r;
    let mut rng = auxiliary_rng(seed, 30 + (r * 8.0) as u64 + 1000 * basis.dim() as u64);
    let c1 = 2f64.powf(1.0 - r);
    let mut worst1 = f64::INFINITY;
    let mut worst2 = f64::INFINITY;
    let mut spectral_gap = 0.0f64;
    for i in 0..pairs {
        let u = random_field(basis, &mut rng);
        let v = partner(&u, i, &mut rng);
        let pu = ops.to_physical(&u)?;
        let pv = ops.to_physical(&v)?;
        let gu = absorption_pointwise(&pu, r)?;
        let gv = absorption_pointwise(&pv, r)?;
        let d = diff(&pu, &pv);
        let lhs = diff(&gu, &gv).mean_dot(&d);
        let b1 = c1 * d.mean_pow(r + 1.0);
        let b2 = 0.5 * weighted_square(&pu, &d, r - 1.0) + 0.5 * weighted_square(&pv, &d, r - 1.0);
        worst1 = worst1.min(rel(lhs - b1, lhs.abs() + b1.abs()));
        worst2 = worst2.min(rel(lhs - b2, lhs.abs() + b2.abs()));
        if i % 16 == 0 {
            let cu = ops.to_spectral(&gu)?;
            let cv = ops.to_spectral(&gv)?;
            let spec = cu.sub(&cv).inner(&u.sub(&v));
            spectral_gap = spectral_gap.max(rel((spec - lhs).abs(), lhs.abs()));
        }
    }
    Ok(PropertyReport::new(
        format!("monotonicity-d{}-r{r}", basis.dim()),
        pairs,
        worst1.min(worst2),
        1e-10,
    )
    .with("r", r)
    .with("worst_margin_power_bound", worst1)
    .with("worst_margin_weighted_bound", worst2)
    .with("spectral_grid_gap", spectral_gap))
}

/// `‖C(u) - C(v)‖_{L^{(r+1)/r}} ≤ r (‖u‖ + ‖v‖)^{r-1}_{L^{r+1}} ‖u - v‖_{L^{r+1}}`
/// for the pointwise map, as a ratio that must not exceed one.
pub fn absorption_lipschitz_suite(
    ops: &Operators,
    pairs: usize,
    seed: u64,
) -> Result<PropertyReport, DiagnosticsError> {
    let basis = ops.basis();
    let r = ops.config().r;
    let mut rng = auxiliary_rng(seed, 40 + (r * 8.0) as u64 + 1000 * basis.dim() as u64);
    let p = r + 1.0;
    let q = p / r;
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let u = random_field(basis, &mut rng);
        let v = partner(&u, i, &mut rng);
        let pu = ops.to_physical(&u)?;
        let pv = ops.to_physical(&v)?;
        let lhs = diff(&absorption_pointwise(&pu, r)?, &absorption_pointwise(&pv, r)?).lp_norm(q);
        let rhs = r * (pu.lp_norm(p) + pv.lp_norm(p)).powf(r - 1.0) * diff(&pu, &pv).lp_norm(p);
        worst = worst.max(rel(lhs, rhs));
    }
    Ok(
        PropertyReport::new(format!("absorption-lipschitz-d{}-r{r}", basis.dim()), pairs, 1.0 - worst, 1e-12)
            .with("r", r)
            .with("worst_ratio", worst),
    )
}

/// `‖B(u)‖_{V'} ≤ ‖u‖^{(r+1)/(r-1)}_{L^{r+1}} ‖u‖^{(r-3)/(r-1)}_H` for `r > 3`.
pub fn convection_dual_bound_suite(
    ops: &Operators,
    samples: usize,
    seed: u64,
) -> Result<PropertyReport, DiagnosticsError> {
    let basis = ops.basis();
    let r = ops.config().r;
    if r <= 3.0 {
        return Err(DiagnosticsError::Invalid(format!("dual bound needs r > 3, got {r}")));
    }
    let mut rng = auxiliary_rng(seed, 50 + (r * 8.0) as u64 + 1000 * basis.dim() as u64);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = random_field(basis, &mut rng);
        let b = ops.convection_self(&u)?;
        let lr = ops.to_physical(&u)?.lp_norm(r + 1.0);
        let bound = lr.powf((r + 1.0) / (r - 1.0)) * u.norm_h().powf((r - 3.0) / (r - 1.0));
        worst = worst.max(rel(b.norm_dual_sq().sqrt(), bound));
    }
    Ok(
        PropertyReport::new(format!("convection-dual-bound-d{}-r{r}", basis.dim()), samples, 1.0 - worst, 1e-12)
            .with("r", r)
            .with("worst_ratio", worst),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    #[test]
    fn small_suites_pass() {
        let basis = Arc::new(build_basis(2, 4).unwrap());
        assert!(operator_identity_suite(&basis, 20, 1).pass);
        for rep in inner_product_suite(&basis, 10, &[1.0, 2.0, 3.0, 5.0], 1).unwrap() {
            assert!(rep.pass, "{rep:?}");
        }
        for r in [1.0, 2.0, 3.0, 5.0] {
            let ops = operators_for(&basis, r).unwrap();
            let m = check_monotonicity(&ops, 40, 1).unwrap();
            assert!(m.pass, "{m:?}");
            assert!(m.details["spectral_grid_gap"] < 1e-10, "{m:?}");
            assert!(absorption_lipschitz_suite(&ops, 40, 1).unwrap().pass);
        }
        let ops = operators_for(&basis, 5.0).unwrap();
        let rep = convection_dual_bound_suite(&ops, 40, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn linear_absorption_is_an_equality() {
        let basis = Arc::new(build_basis(2, 3).unwrap());
        let ops = operators_for(&basis, 1.0).unwrap();
        let m = check_monotonicity(&ops, 16, 4).unwrap();
        assert!(m.details["worst_margin_power_bound"].abs() < 1e-12, "{m:?}");
    }
}
