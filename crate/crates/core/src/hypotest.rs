//! Asymmetric and composite hypothesis testing on `n` i.i.d. copies.
//!
//! * [`typical_projector`]: the divergence-typical projectors
//!   `{σ^{⊗n} ⪰ 2^{−n(D+δ)}ρ^{⊗n}}` and `{σ^{⊗n} ⪯ 2^{−n(D−δ)}ρ^{⊗n}}`.
//! * [`neyman_pearson_beta`]: exact optimum `β_{n,ε}` via the threshold tests
//!   `{ρ^{⊗n} − tσ^{⊗n} ≻ 0}` with a fractional boundary weight.
//! * composite tests: union over nulls, intersection over alternatives and
//!   their composition, all built from the pairwise Jordan merge.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::meet::{meet_many, meet_tree, threshold_projector, Direction, LedgerEntry, MeetSpec};
use crate::operator::{
    check_support, positive_eigenspace_projector, relative_entropy, strictly_positive_eigenspace_projector,
    tensor_power, DensityOperator, HermitianOperator, Matrix, Projector, C64,
};
use crate::report::{Relation, ValidationReport};

/// Slack on bound comparisons in this module.
pub const BOUND_TOL: f64 = 1e-8;
/// Slack on the converse comparison.
pub const CONVERSE_TOL: f64 = 1e-10;
/// Bisection stops once `t_hi / t_lo − 1` drops below this.
pub const BISECTION_REL_WIDTH: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TypicalDirection {
    /// `{σ^{⊗n} ⪰ 2^{−n(D+δ)}ρ^{⊗n}}`
    Geq,
    /// `{σ^{⊗n} ⪯ 2^{−n(D−δ)}ρ^{⊗n}}`
    Leq,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypicalProjector {
    #[serde(skip_serializing)]
    pub projector: Projector,
    pub divergence: f64,
    /// `Tr[Π ρ^{⊗n}]`.
    pub rho_trace: f64,
    /// `Tr[Π σ^{⊗n}]`.
    pub sigma_trace: f64,
}

/// `ρ^{⊗n}`, `σ^{⊗n}` and `D(ρ‖σ)` after the support check.
fn powers(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: usize,
    cap: usize,
) -> Result<(DensityOperator, DensityOperator, f64)> {
    check_support(rho, sigma)?;
    let d = relative_entropy(rho, sigma)?;
    Ok((tensor_power(rho, n, cap)?, tensor_power(sigma, n, cap)?, d))
}

pub fn typical_projector(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: usize,
    delta: f64,
    direction: TypicalDirection,
    cap: usize,
) -> Result<TypicalProjector> {
    let (rn, sn, d) = powers(rho, sigma, n, cap)?;
    typical_from_powers(&rn, &sn, d, n, delta, direction)
}

fn typical_from_powers(
    rn: &DensityOperator,
    sn: &DensityOperator,
    d: f64,
    n: usize,
    delta: f64,
    direction: TypicalDirection,
) -> Result<TypicalProjector> {
    let nf = n as f64;
    let projector = match direction {
        TypicalDirection::Geq => positive_eigenspace_projector(sn.op(), &rn.op().scale((-nf * (d + delta)).exp2()))?,
        TypicalDirection::Leq => positive_eigenspace_projector(&rn.op().scale((-nf * (d - delta)).exp2()), sn.op())?,
    };
    Ok(TypicalProjector {
        rho_trace: rn.prob(&projector)?,
        sigma_trace: sn.prob(&projector)?,
        projector,
        divergence: d,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaResult {
    pub beta: f64,
    /// `Λ = (1 − γ) P_{>0}(t_hi) + γ P_{>0}(t_lo)`.
    #[serde(skip_serializing)]
    pub test_operator: HermitianOperator,
    pub threshold_t: f64,
    pub gamma: f64,
    /// `1 − Tr[Λ ρ^{⊗n}]`.
    pub achieved_alpha: f64,
    pub iterations: usize,
}

/// `β_{n,ε}(ρ, σ) = min { Tr[Λσ^{⊗n}] : 0 ⪯ Λ ⪯ I, Tr[Λρ^{⊗n}] ≥ 1 − ε }`.
pub fn neyman_pearson_beta(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: usize,
    epsilon: f64,
    cap: usize,
) -> Result<BetaResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let rn = tensor_power(rho, n, cap)?;
    let sn = tensor_power(sigma, n, cap)?;
    neyman_pearson_beta_on(&rn, &sn, epsilon)
}

struct Level {
    proj: Projector,
    f_rho: f64,
    f_sigma: f64,
}

/// Neyman-Pearson optimum for an arbitrary pair of states.
pub fn neyman_pearson_beta_on(x: &DensityOperator, y: &DensityOperator, epsilon: f64) -> Result<BetaResult> {
    let target = 1.0 - epsilon;
    let level = |t: f64| -> Result<Level> {
        let proj = strictly_positive_eigenspace_projector(x.op(), &y.op().scale(t))?;
        Ok(Level {
            f_rho: x.prob(&proj)?,
            f_sigma: y.prob(&proj)?,
            proj,
        })
    };

    let x_max = x.op().eig()?.values[0];
    let y_eig = y.op().eig()?;
    let y_cut = 1e-12 * y_eig.values[0];
    let y_min = y_eig
        .values
        .iter()
        .copied()
        .filter(|&l| l > y_cut)
        .fold(f64::INFINITY, f64::min);
    let t_max = 2.0 * x_max / y_min;

    let top = level(t_max)?;
    if top.f_rho >= target {
        // Even the most aggressive test keeps enough of ρ: scale it down.
        let gamma = target / top.f_rho;
        return Ok(BetaResult {
            beta: gamma * top.f_sigma,
            test_operator: top.proj.op().scale(gamma),
            threshold_t: t_max,
            gamma,
            achieved_alpha: 1.0 - gamma * top.f_rho,
            iterations: 0,
        });
    }

    let (mut lo_t, mut hi_t) = (0.0, t_max);
    let mut lo = level(0.0)?;
    let mut hi = top;
    let mut iterations = 0;
    while iterations < BISECTION_MAX_ITER {
        if lo.f_rho - target <= 1e-12 {
            break;
        }
        if lo_t > 0.0 && hi_t / lo_t - 1.0 <= BISECTION_REL_WIDTH {
            break;
        }
        let mid_t = if lo_t == 0.0 { hi_t / 16.0 } else { (lo_t * hi_t).sqrt() };
        let mid = level(mid_t)?;
        iterations += 1;
        if mid.f_rho >= target {
            lo = mid;
            lo_t = mid_t;
        } else {
            hi = mid;
            hi_t = mid_t;
        }
    }

    let gamma = if lo.f_rho - hi.f_rho > 0.0 {
        ((target - hi.f_rho) / (lo.f_rho - hi.f_rho)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let op = HermitianOperator::from_matrix_unchecked(
        hi.proj.matrix() * C64::new(1.0 - gamma, 0.0) + lo.proj.matrix() * C64::new(gamma, 0.0),
    );
    Ok(BetaResult {
        beta: (1.0 - gamma) * hi.f_sigma + gamma * lo.f_sigma,
        test_operator: op,
        threshold_t: if lo_t > 0.0 { (lo_t * hi_t).sqrt() } else { hi_t },
        gamma,
        achieved_alpha: 1.0 - ((1.0 - gamma) * hi.f_rho + gamma * lo.f_rho),
        iterations,
    })
}

/// `Tr[Λσ^{⊗n}] ≥ 2^{−n(D+δ)}(1 − 18√ε)` with `ε = 1 − Tr[Λρ^{⊗n}]`.
pub fn stein_converse_check(
    test: &HermitianOperator,
    rho: &DensityOperator,
    sigma: &DensityOperator,
    n: usize,
    delta: f64,
    cap: usize,
) -> Result<ValidationReport> {
    let (rn, sn, d) = powers(rho, sigma, n, cap)?;
    let eps = (1.0 - rn.expect(test)?).max(0.0);
    let lhs = sn.expect(test)?;
    let rhs = (-(n as f64) * (d + delta)).exp2() * (1.0 - 18.0 * eps.sqrt());
    Ok(
        ValidationReport::bound("stein.converse", Relation::Geq, lhs, rhs, CONVERSE_TOL)
            .with_digest(format!("n={n},delta={delta},eps={eps:.3e},D={d:.6}")),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositeResult {
    pub construction: String,
    #[serde(skip_serializing)]
    pub pi_star: Projector,
    pub n: usize,
    /// Largest measured miss `1 − Tr[Π_i ρ_i^{⊗n}]` of the base projectors.
    pub epsilon_measured: f64,
    pub per_rho_traces: Vec<f64>,
    pub per_sigma_traces: Vec<f64>,
    /// Smallest single-copy divergence over the tested pairs.
    pub min_divergence: f64,
    /// `−(1/n) log₂ max_t Tr[Π* σ_t^{⊗n}]`.
    pub rate: f64,
    pub bounds: Vec<ValidationReport>,
    pub ledger: Vec<LedgerEntry>,
}

impl CompositeResult {
    pub fn all_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }
}

fn ceil_log2(k: usize) -> usize {
    crate::meet::tree_depth(k)
}

fn rate_of(traces: &[f64], n: usize) -> f64 {
    let worst = traces.iter().copied().fold(0.0, f64::max);
    -worst.log2() / n as f64
}

/// Pieces of a union construction shared with [`composite_two_sided`].
struct Union {
    pi_star: Projector,
    epsilon: f64,
    divergences: Vec<f64>,
    ledger: Vec<LedgerEntry>,
}

fn union_projector(
    rho_powers: &[DensityOperator],
    divergences: &[f64],
    sn: &DensityOperator,
    n: usize,
    delta: f64,
    delta_prime: f64,
) -> Result<Union> {
    let mut base = Vec::with_capacity(rho_powers.len());
    let mut epsilon: f64 = 0.0;
    for (rn, &d) in rho_powers.iter().zip(divergences) {
        let tp = typical_from_powers(rn, sn, d, n, delta_prime, TypicalDirection::Leq)?;
        epsilon = epsilon.max(1.0 - tp.rho_trace);
        base.push(tp.projector);
    }
    if base.len() == 1 {
        return Ok(Union {
            pi_star: base.pop().unwrap(),
            epsilon,
            divergences: divergences.to_vec(),
            ledger: Vec::new(),
        });
    }
    let complements: Vec<Projector> = base.iter().map(|p| p.complement()).collect();
    let tree = meet_tree(&complements, sn, 1.0 - delta)?;
    Ok(Union {
        pi_star: tree.pi_star.complement(),
        epsilon,
        divergences: divergences.to_vec(),
        ledger: tree.ledger,
    })
}

fn check_delta(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Accept every `ρ_i`, reject `σ`: `Π* = I − meet_δ(I − Π_i)` over the
/// projectors `Π_i = {σ^{⊗n} ⪯ 2^{−n(D(ρ_i‖σ)−δ′)}ρ_i^{⊗n}}`.
pub fn composite_union_test(
    rhos: &[DensityOperator],
    sigma: &DensityOperator,
    n: usize,
    delta: f64,
    delta_prime: f64,
    cap: usize,
) -> Result<CompositeResult> {
    check_delta("delta", delta)?;
    check_delta("delta'", delta_prime)?;
    if rhos.is_empty() {
        return Err(Error::InvalidParameter("need at least one null state".into()));
    }
    let sn = tensor_power(sigma, n, cap)?;
    let mut rho_powers = Vec::with_capacity(rhos.len());
    let mut divergences = Vec::with_capacity(rhos.len());
    for r in rhos {
        check_support(r, sigma)?;
        divergences.push(relative_entropy(r, sigma)?);
        rho_powers.push(tensor_power(r, n, cap)?);
    }
    let u = union_projector(&rho_powers, &divergences, &sn, n, delta, delta_prime)?;
    let per_rho_traces = rho_powers
        .iter()
        .map(|r| r.prob(&u.pi_star))
        .collect::<Result<Vec<_>>>()?;
    let sigma_trace = sn.prob(&u.pi_star)?;
    let min_d = u.divergences.iter().copied().fold(f64::INFINITY, f64::min);
    let t = ceil_log2(rhos.len()) as f64;
    let nf = n as f64;

    let min_rho = per_rho_traces.iter().copied().fold(f64::INFINITY, f64::min);
    let bounds = vec![
        ValidationReport::bound(
            "composite_union.rho",
            Relation::Geq,
            min_rho,
            1.0 - u.epsilon - 2.0 * t * delta.sqrt(),
            BOUND_TOL,
        ),
        // (1/n)log Tr[Π*σ] ≤ −min D + δ′ + (t/n)log(9/δ), in trace form.
        ValidationReport::bound(
            "composite_union.sigma",
            Relation::Leq,
            sigma_trace,
            (nf * (-min_d + delta_prime)).exp2() * (9.0 / delta).powf(t),
            BOUND_TOL,
        ),
    ];
    Ok(CompositeResult {
        construction: "union".into(),
        pi_star: u.pi_star,
        n,
        epsilon_measured: u.epsilon,
        per_rho_traces,
        rate: rate_of(&[sigma_trace], n),
        per_sigma_traces: vec![sigma_trace],
        min_divergence: min_d,
        bounds,
        ledger: u.ledger,
    })
}

/// Accept `ρ`, reject every `σ_s`: recursive intersection of
/// `{σ_s^{⊗n} ⪯ 2^{−k_s}ρ^{⊗n}}`, `k_s = n(D(ρ‖σ_s) − δ)`, with `τ = ½`.
pub fn composite_meet_test(
    rho: &DensityOperator,
    sigmas: &[DensityOperator],
    n: usize,
    delta: f64,
    cap: usize,
) -> Result<CompositeResult> {
    check_delta("delta", delta)?;
    if sigmas.is_empty() {
        return Err(Error::InvalidParameter("need at least one alternative state".into()));
    }
    let rn = tensor_power(rho, n, cap)?;
    let nf = n as f64;
    let mut sig_powers = Vec::with_capacity(sigmas.len());
    let mut ks = Vec::with_capacity(sigmas.len());
    let mut min_d = f64::INFINITY;
    for s in sigmas {
        check_support(rho, s)?;
        let d = relative_entropy(rho, s)?;
        if d <= delta {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} must be below every divergence, found {d:.6}"
            )));
        }
        min_d = min_d.min(d);
        ks.push(nf * (d - delta));
        sig_powers.push(tensor_power(s, n, cap)?);
    }

    let (pi_star, epsilon, ledger) = if sigmas.len() == 1 {
        let p = threshold_projector(&rn, &sig_powers[0], ks[0], Direction::Upper)?;
        let eps = (1.0 - rn.prob(&p)?).max(0.0);
        (p, eps, Vec::new())
    } else {
        let spec = MeetSpec::upper(ks.clone(), 0.5).with_tau(0.5);
        let m = meet_many(&rn, &sig_powers, &spec)?;
        (m.pi_star, m.epsilon_measured, m.slack_ledger)
    };
    let ledger_total: f64 = ledger.iter().map(|e| e.additive_term).sum();
    let rho_trace = rn.prob(&pi_star)?;
    let per_sigma_traces = sig_powers
        .iter()
        .map(|s| s.prob(&pi_star))
        .collect::<Result<Vec<_>>>()?;

    let t = ceil_log2(sigmas.len()) as f64;
    let mut bounds = vec![ValidationReport::bound(
        "composite_meet.rho",
        Relation::Geq,
        rho_trace,
        1.0 - (t + 1.0) * epsilon.powf(1.0 - t / 2.0),
        BOUND_TOL,
    )];
    for (i, (&tr, &k)) in per_sigma_traces.iter().zip(&ks).enumerate() {
        bounds.push(ValidationReport::bound(
            format!("composite_meet.sigma{}", i + 1),
            Relation::Leq,
            tr,
            (-k).exp2() + ledger_total,
            BOUND_TOL,
        ));
    }
    Ok(CompositeResult {
        construction: "meet".into(),
        pi_star,
        n,
        epsilon_measured: epsilon,
        per_rho_traces: vec![rho_trace],
        rate: rate_of(&per_sigma_traces, n),
        per_sigma_traces,
        min_divergence: min_d,
        bounds,
        ledger,
    })
}

/// Accept every `ρ_s`, reject every `σ_t`: a `δ`-threshold intersection over
/// `t` of the unions over `s`.
pub fn composite_two_sided(
    rhos: &[DensityOperator],
    sigmas: &[DensityOperator],
    n: usize,
    delta: f64,
    delta_prime: f64,
    cap: usize,
) -> Result<CompositeResult> {
    check_delta("delta", delta)?;
    check_delta("delta'", delta_prime)?;
    if rhos.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidParameter(
            "need non-empty null and alternative sets".into(),
        ));
    }
    let rho_powers = rhos
        .iter()
        .map(|r| tensor_power(r, n, cap))
        .collect::<Result<Vec<_>>>()?;
    let sig_powers = sigmas
        .iter()
        .map(|s| tensor_power(s, n, cap))
        .collect::<Result<Vec<_>>>()?;

    let mut unions = Vec::with_capacity(sigmas.len());
    let mut epsilon: f64 = 0.0;
    let mut min_d = f64::INFINITY;
    for (s, sn) in sigmas.iter().zip(&sig_powers) {
        let mut ds = Vec::with_capacity(rhos.len());
        for r in rhos {
            check_support(r, s)?;
            ds.push(relative_entropy(r, s)?);
        }
        let u = union_projector(&rho_powers, &ds, sn, n, delta, delta_prime)?;
        epsilon = epsilon.max(u.epsilon);
        min_d = ds.iter().copied().fold(min_d, f64::min);
        unions.push(u.pi_star);
    }

    let (pi_star, ledger) = if unions.len() == 1 {
        (unions.pop().unwrap(), Vec::new())
    } else {
        let tree = meet_tree(&unions, &rho_powers[0], 1.0 - delta)?;
        (tree.pi_star, tree.ledger)
    };
    let per_rho_traces = rho_powers
        .iter()
        .map(|r| r.prob(&pi_star))
        .collect::<Result<Vec<_>>>()?;
    let per_sigma_traces = sig_powers
        .iter()
        .map(|s| s.prob(&pi_star))
        .collect::<Result<Vec<_>>>()?;

    let t1 = ceil_log2(rhos.len()) as f64;
    let t2 = ceil_log2(sigmas.len()) as f64;
    let nf = n as f64;
    let factor = 9.0 / delta;
    let rho_target = 1.0 - factor.powf(t2) * (epsilon + 2.0 * t1 * delta.sqrt());
    let sigma_target = factor.powf(t1) * (-nf * (min_d - delta_prime)).exp2() + 2.0 * t2 * delta.sqrt();
    let mut bounds = Vec::new();
    for (i, &tr) in per_rho_traces.iter().enumerate() {
        bounds.push(ValidationReport::bound(
            format!("composite_two_sided.rho{}", i + 1),
            Relation::Geq,
            tr,
            rho_target,
            BOUND_TOL,
        ));
    }
    for (i, &tr) in per_sigma_traces.iter().enumerate() {
        bounds.push(ValidationReport::bound(
            format!("composite_two_sided.sigma{}", i + 1),
            Relation::Leq,
            tr,
            sigma_target,
            BOUND_TOL,
        ));
    }
    Ok(CompositeResult {
        construction: "two_sided".into(),
        pi_star,
        n,
        epsilon_measured: epsilon,
        per_rho_traces,
        rate: rate_of(&per_sigma_traces, n),
        per_sigma_traces,
        min_divergence: min_d,
        bounds,
        ledger,
    })
}

/// Identity on `dim` as a test operator.
pub fn identity_test(dim: usize) -> HermitianOperator {
    HermitianOperator::from_matrix_unchecked(Matrix::identity(dim, dim))
}
