//! Validators for three operator inequalities used throughout the proofs:
//! the sequential-projection (Gao) bound, the Hayashi-Nagaoka inequality and
//! gentle measurement. Each returns a [`ValidationReport`]; any failure on a
//! precondition-satisfying instance is a defect, since all three are theorems.

use crate::error::{check_dims, Error, Result};
use crate::operator::{trace_norm, DensityOperator, Ensemble, HermitianOperator, Matrix, Projector, C64};
use crate::report::{Relation, ValidationReport, DEFAULT_TOL};

/// Precondition tolerance for `0 ⪯ U ⪯ I` style checks.
const PRECONDITION_TOL: f64 = 1e-9;
/// Relative cutoff below which eigenvalues are treated as zero in `T^{−1/2}`.
pub const PINV_TOL: f64 = 1e-12;

/// `Tr(Π_n⋯Π₁ ρ Π₁⋯Π_n) ≥ 1 − 4 Σ Tr[(I − Π_i)ρ]`.
pub fn gao_bound_check(projectors: &[Projector], rho: &DensityOperator) -> Result<ValidationReport> {
    if projectors.is_empty() {
        return Err(Error::InvalidParameter("need at least one projector".into()));
    }
    let mut state = rho.matrix().clone();
    let mut miss = 0.0;
    for p in projectors {
        check_dims(p.dim(), rho.dim())?;
        miss += 1.0 - rho.prob(p)?;
        state = p.matrix() * state * p.matrix();
    }
    let lhs = state.trace().re;
    Ok(
        ValidationReport::new("gao", Relation::Geq, lhs, 1.0 - 4.0 * miss, DEFAULT_TOL).with_digest(format!(
            "dim={},n={}",
            rho.dim(),
            projectors.len()
        )),
    )
}

/// `T^{−1/2}` on the support of `T ⪰ 0`, zero on its kernel.
pub fn pinv_sqrt(t: &HermitianOperator) -> Result<HermitianOperator> {
    let eig = t.eig()?;
    let cut = PINV_TOL * eig.max_abs();
    Ok(eig.map(|l| if l > cut && l > 0.0 { 1.0 / l.sqrt() } else { 0.0 }))
}

/// `I − T^{−1/2} U T^{−1/2} ⪯ 2(I − U) + 4V` with `T = U + V`, reported as
/// the minimum eigenvalue of right minus left.
pub fn hayashi_nagaoka_check(u: &HermitianOperator, v: &HermitianOperator) -> Result<ValidationReport> {
    check_dims(u.dim(), v.dim())?;
    let d = u.dim();
    let ue = u.eig()?;
    let scale = ue.max_abs().max(1.0);
    if *ue.values.last().unwrap() < -PRECONDITION_TOL * scale || ue.values[0] > 1.0 + PRECONDITION_TOL {
        return Err(Error::InvalidParameter("U must satisfy 0 ⪯ U ⪯ I".into()));
    }
    if v.min_eigenvalue()? < -PRECONDITION_TOL * v.spectral_norm()?.max(1.0) {
        return Err(Error::InvalidParameter("V must be positive semidefinite".into()));
    }
    let t = u.add(v)?;
    let s = pinv_sqrt(&t)?;
    let x = s.matrix() * u.matrix() * s.matrix();
    let id = Matrix::identity(d, d);
    let rhs = (&id - u.matrix()) * C64::new(2.0, 0.0) + v.matrix() * C64::new(4.0, 0.0);
    let gap = HermitianOperator::from_matrix_unchecked(rhs - (&id - x));
    let min = gap.min_eigenvalue()?;
    Ok(ValidationReport::new("hayashi_nagaoka", Relation::Geq, min, 0.0, DEFAULT_TOL).with_digest(format!("dim={d}")))
}

/// `Σ_x p(x) ‖√E ρ_x √E − ρ_x‖₁ ≤ 2√ε` with `ε = 1 − Tr[E ρ̄]`.
pub fn gentle_measurement_check(e: &Ensemble, op: &HermitianOperator) -> Result<ValidationReport> {
    check_dims(e.dim(), op.dim())?;
    let eig = op.eig()?;
    if *eig.values.last().unwrap() < -PRECONDITION_TOL || eig.values[0] > 1.0 + PRECONDITION_TOL {
        return Err(Error::InvalidParameter("E must satisfy 0 ⪯ E ⪯ I".into()));
    }
    let root = eig.map(|l| l.max(0.0).sqrt());
    let eps = (1.0 - e.average().expect(op)?).max(0.0);
    let mut damage = 0.0;
    for (p, rho) in e.probs().iter().zip(e.states()) {
        let post = root.matrix() * rho.matrix() * root.matrix();
        let diff = HermitianOperator::from_matrix_unchecked(post - rho.matrix());
        damage += p * trace_norm(&diff)?;
    }
    Ok(
        ValidationReport::new("gentle", Relation::Leq, damage, 2.0 * eps.sqrt(), DEFAULT_TOL).with_digest(format!(
            "dim={},states={}",
            e.dim(),
            e.states().len()
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_projector, random_psd, rng_from_seed};
    use rand::Rng;

    #[test]
    fn gao_single_projector_is_exact() {
        let mut rng = rng_from_seed(31);
        let rho = random_density(5, 5, &mut rng);
        let p = random_projector(5, 3, &mut rng);
        let r = gao_bound_check(std::slice::from_ref(&p), &rho).unwrap();
        // Tr[ΠρΠ] = Tr[Πρ] = 1 − miss
        assert!((r.lhs - rho.prob(&p).unwrap()).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn gao_commuting_matches_classical() {
        // Diagonal projectors: LHS is the mass of the intersection.
        let rho = DensityOperator::from_diagonal(&[0.4, 0.3, 0.2, 0.1]).unwrap();
        let a = Projector::from_indicator(&[true, true, true, false]);
        let b = Projector::from_indicator(&[true, false, true, true]);
        let r = gao_bound_check(&[a, b], &rho).unwrap();
        assert!((r.lhs - 0.6).abs() < 1e-12);
        assert!((r.rhs - (1.0 - 4.0 * (0.1 + 0.3))).abs() < 1e-12);
    }

    #[test]
    fn gao_random_sequences() {
        let mut rng = rng_from_seed(32);
        for _ in 0..100 {
            let d = rng.random_range(2..=16);
            let n = rng.random_range(1..=5);
            let rho = random_density(d, rng.random_range(1..=d), &mut rng);
            let ps: Vec<Projector> = (0..n)
                .map(|_| random_projector(d, rng.random_range(0..=d), &mut rng))
                .collect();
            assert!(gao_bound_check(&ps, &rho).unwrap().pass);
        }
    }

    #[test]
    fn hayashi_nagaoka_special_cases() {
        let mut rng = rng_from_seed(33);
        let p = random_projector(4, 2, &mut rng);
        let r = hayashi_nagaoka_check(&p.op().scale(0.7), &HermitianOperator::zeros(4)).unwrap();
        assert!(r.pass, "{r:?}");
        let v = random_psd(4, &mut rng);
        let r = hayashi_nagaoka_check(&HermitianOperator::identity(4), &v).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(hayashi_nagaoka_check(&HermitianOperator::identity(4).scale(1.5), &v).is_err());
    }

    #[test]
    fn hayashi_nagaoka_random() {
        let mut rng = rng_from_seed(34);
        for _ in 0..100 {
            let d = rng.random_range(1..=12);
            let g = random_psd(d, &mut rng);
            let u = g.scale(1.0 / g.spectral_norm().unwrap());
            let h = random_psd(d, &mut rng);
            let factor = 10f64.powf(rng.random_range(-3.0..0.0));
            let r = hayashi_nagaoka_check(&u, &h.scale(factor)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn gentle_identity_and_random() {
        let mut rng = rng_from_seed(35);
        let e = Ensemble::new(vec![1.0], vec![random_density(3, 3, &mut rng)]).unwrap();
        let r = gentle_measurement_check(&e, &HermitianOperator::identity(3)).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-6);

        for _ in 0..100 {
            let d = rng.random_range(2..=8);
            let k = rng.random_range(1..=4);
            let mut w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
            let z: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= z);
            let w_sum: f64 = w.iter().sum();
            w[0] += 1.0 - w_sum;
            let states = (0..k).map(|_| random_density(d, d, &mut rng)).collect();
            let e = Ensemble::new(w, states).unwrap();
            let g = random_psd(d, &mut rng);
            let op = g.scale(1.0 / g.spectral_norm().unwrap());
            assert!(gentle_measurement_check(&e, &op).unwrap().pass);
        }
    }
}
