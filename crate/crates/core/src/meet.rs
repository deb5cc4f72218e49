//! Good-set intersection projectors.
//!
//! Given two projectors, Jordan-decompose them and keep the `Π₁` directions
//! of the blocks whose principal angle is small. The pairwise primitive
//! takes an explicit overlap threshold; the public constructions pick it:
//!
//! * [`meet_upper`], [`meet_lower`]: `1 − 8√ε` on `{σ_i ⪯ 2^{−k_i}ρ}` resp.
//!   `{σ_i ⪰ 2^{−k_i}ρ}`.
//! * [`meet_many`]: `1 − 8ε^τ` at every level of a left-balanced merge tree.
//!
//! `ε` is always the measured premise `max_i (1 − Tr[Π_i ρ])`; the nominal
//! `MeetSpec::epsilon` only decides whether a premise violation is flagged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jordan::{jordan_decompose, overlaps_histogram, JordanDecomposition};
use crate::operator::{check_support, positive_eigenspace_projector, DensityOperator, HermitianOperator, Projector};
use crate::report::{Relation, ValidationReport};

/// Blocks within this of the threshold count as Good.
pub const GOOD_TIE_TOL: f64 = 1e-9;
/// Numerical slack on every bound comparison.
pub const BOUND_TOL: f64 = 1e-8;
/// Deepest merge tree accepted by [`meet_many`].
pub const MAX_DEPTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `Π_i = {σ_i ⪯ 2^{−k_i}ρ}`
    Upper,
    /// `Π_i = {σ_i ⪰ 2^{−k_i}ρ}`
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeetSpec {
    pub k_values: Vec<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub direction: Direction,
}

impl MeetSpec {
    pub fn upper(k_values: Vec<f64>, epsilon: f64) -> Self {
        Self {
            k_values,
            epsilon,
            tau: 0.5,
            direction: Direction::Upper,
        }
    }

    pub fn lower(k_values: Vec<f64>, epsilon: f64) -> Self {
        Self {
            direction: Direction::Lower,
            ..Self::upper(k_values, epsilon)
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if let Some(k) = self.k_values.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter(format!("thresholds must be positive, got {k}")));
        }
        Ok(())
    }
}

/// One merge of the recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// 1 for merges of base projectors.
    pub level: usize,
    /// Leaf index ranges `[start, end)` of the two merged subtrees.
    pub left: (usize, usize),
    pub right: (usize, usize),
    pub good_blocks: usize,
    pub good_probability: f64,
    pub max_good_sine: f64,
    /// Measured additive term `2 · max_{α∈Good} sinθ_α` charged to the right subtree.
    pub additive_term: f64,
    /// Worst case of the same term allowed by the threshold.
    pub threshold_term: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeetResult {
    #[serde(skip_serializing)]
    pub pi_star: Projector,
    pub rank: usize,
    /// Good block labels of the final (root) merge.
    pub good_indices: Vec<usize>,
    pub good_probability: f64,
    pub epsilon_nominal: f64,
    pub epsilon_measured: f64,
    pub premise_violation: bool,
    /// `Tr[Π_i ρ]` of the base projectors.
    pub base_traces: Vec<f64>,
    /// `Tr[Π* ρ]`.
    pub rho_trace: f64,
    /// `Tr[Π* σ_i]`.
    pub sigma_traces: Vec<f64>,
    pub bounds: Vec<ValidationReport>,
    pub slack_ledger: Vec<LedgerEntry>,
    /// Additive slack along each leaf's root path.
    pub path_slack: Vec<f64>,
    pub depth: usize,
}

impl MeetResult {
    pub fn ledger_total(&self) -> f64 {
        self.slack_ledger.iter().map(|e| e.additive_term).sum()
    }

    pub fn all_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }
}

/// Outcome of one thresholded pairwise merge.
#[derive(Clone, Debug)]
pub struct PairwiseMeet {
    pub decomposition: JordanDecomposition,
    pub good: Vec<usize>,
    pub good_probability: f64,
    pub max_good_sine: f64,
    pub pi_star: Projector,
}

/// Blocks carrying a `Π₁` direction with overlap `≥ threshold − 1e−9`, and
/// their total weight `Σ Tr[ρ_α]`.
pub fn good_by_threshold(
    dec: &JordanDecomposition,
    rho: &DensityOperator,
    threshold: f64,
) -> Result<(Vec<usize>, f64)> {
    let hist = overlaps_histogram(dec, rho)?;
    let mut good = Vec::new();
    let mut prob = 0.0;
    for (i, b) in dec.first_blocks() {
        if b.overlap >= threshold - GOOD_TIE_TOL {
            good.push(i);
            prob += hist.blocks[i].weight;
        }
    }
    Ok((good, prob.clamp(0.0, 1.0)))
}

/// Good set with the pairwise threshold `1 − 8√ε`.
pub fn good_set(dec: &JordanDecomposition, rho: &DensityOperator, epsilon: f64) -> Result<(Vec<usize>, f64)> {
    good_by_threshold(dec, rho, pairwise_threshold(epsilon))
}

pub fn pairwise_threshold(epsilon: f64) -> f64 {
    1.0 - 8.0 * epsilon.max(0.0).sqrt()
}

pub fn pairwise_meet(p1: &Projector, p2: &Projector, rho: &DensityOperator, threshold: f64) -> Result<PairwiseMeet> {
    let decomposition = jordan_decompose(p1, p2)?;
    let (good, good_probability) = good_by_threshold(&decomposition, rho, threshold)?;
    let max_good_sine = good.iter().map(|&i| decomposition.blocks[i].sine()).fold(0.0, f64::max);
    let pi_star = decomposition.v_projector(&good);
    Ok(PairwiseMeet {
        decomposition,
        good,
        good_probability,
        max_good_sine,
        pi_star,
    })
}

/// `{σ ⪯ 2^{−k}ρ}` (upper) or `{σ ⪰ 2^{−k}ρ}` (lower).
pub fn threshold_projector(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    k: f64,
    direction: Direction,
) -> Result<Projector> {
    let scaled = rho.op().scale((-k).exp2());
    match direction {
        Direction::Upper => positive_eigenspace_projector(&scaled, sigma.op()),
        Direction::Lower => positive_eigenspace_projector(sigma.op(), &scaled),
    }
}

fn base_projectors(
    rho: &DensityOperator,
    sigmas: &[DensityOperator],
    spec: &MeetSpec,
) -> Result<(Vec<Projector>, Vec<f64>, f64)> {
    spec.validate()?;
    if spec.k_values.len() != sigmas.len() {
        return Err(Error::InvalidParameter(format!(
            "{} thresholds for {} states",
            spec.k_values.len(),
            sigmas.len()
        )));
    }
    let mut projectors = Vec::with_capacity(sigmas.len());
    let mut traces = Vec::with_capacity(sigmas.len());
    for (sigma, &k) in sigmas.iter().zip(&spec.k_values) {
        check_support(rho, sigma)?;
        let p = threshold_projector(rho, sigma, k, spec.direction)?;
        traces.push(rho.prob(&p)?);
        projectors.push(p);
    }
    let eps = traces.iter().map(|t| 1.0 - t).fold(0.0_f64, f64::max).max(0.0);
    Ok((projectors, traces, eps))
}

fn pair_result(
    rho: &DensityOperator,
    sigmas: &[DensityOperator],
    spec: &MeetSpec,
    expected: Direction,
) -> Result<MeetResult> {
    if sigmas.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "pairwise meet needs two states, got {}",
            sigmas.len()
        )));
    }
    if spec.direction != expected {
        return Err(Error::InvalidParameter(
            "MeetSpec direction does not match the construction".into(),
        ));
    }
    let (ps, base_traces, eps) = base_projectors(rho, sigmas, spec)?;
    let m = pairwise_meet(&ps[0], &ps[1], rho, pairwise_threshold(eps))?;
    let rho_trace = rho.prob(&m.pi_star)?;
    let sigma_traces = sigmas.iter().map(|s| s.prob(&m.pi_star)).collect::<Result<Vec<_>>>()?;
    let (k1, k2) = (spec.k_values[0], spec.k_values[1]);
    let se = eps.sqrt();

    let bounds = match expected {
        Direction::Upper => vec![
            ValidationReport::bound("meet_upper.rho", Relation::Geq, rho_trace, 1.0 - 2.0 * se, BOUND_TOL),
            ValidationReport::bound(
                "meet_upper.sigma1",
                Relation::Leq,
                sigma_traces[0],
                (-k1).exp2(),
                BOUND_TOL,
            ),
            ValidationReport::bound(
                "meet_upper.sigma2",
                Relation::Leq,
                sigma_traces[1],
                (-k2).exp2() + 4.0 * 2f64.sqrt() * eps.powf(0.25),
                BOUND_TOL,
            ),
        ],
        Direction::Lower => {
            let mut b = vec![
                ValidationReport::bound("meet_lower.rho", Relation::Geq, rho_trace, 1.0 - 2.0 * se, BOUND_TOL),
                ValidationReport::bound(
                    "meet_lower.sigma1",
                    Relation::Geq,
                    sigma_traces[0],
                    (-k1).exp2() * (1.0 - 2.0 * se),
                    BOUND_TOL,
                ),
                ValidationReport::bound(
                    "meet_lower.sigma2",
                    Relation::Geq,
                    sigma_traces[1],
                    (-k2).exp2() * (1.0 - 18.0 * se),
                    BOUND_TOL,
                ),
            ];
            b.push(blockwise_check(&m, rho, sigmas, k1, k2)?);
            b
        }
    };

    let ledger = vec![LedgerEntry {
        level: 1,
        left: (0, 1),
        right: (1, 2),
        good_blocks: m.good.len(),
        good_probability: m.good_probability,
        max_good_sine: m.max_good_sine,
        additive_term: 2.0 * m.max_good_sine,
        threshold_term: threshold_term(pairwise_threshold(eps)),
    }];
    Ok(MeetResult {
        rank: m.pi_star.rank(),
        pi_star: m.pi_star,
        good_indices: m.good,
        good_probability: m.good_probability,
        epsilon_nominal: spec.epsilon,
        epsilon_measured: eps,
        premise_violation: eps > spec.epsilon,
        base_traces,
        rho_trace,
        sigma_traces,
        bounds,
        slack_ledger: ledger,
        path_slack: vec![0.0, 2.0 * m.max_good_sine],
        depth: 1,
    })
}

/// `min` over Good blocks of `⟨v|σ₁ − 2^{−k₁}ρ|v⟩` and `⟨w|σ₂ − 2^{−k₂}ρ|w⟩`.
fn blockwise_check(
    m: &PairwiseMeet,
    rho: &DensityOperator,
    sigmas: &[DensityOperator],
    k1: f64,
    k2: f64,
) -> Result<ValidationReport> {
    let d1 = sigmas[0].op().sub(&rho.op().scale((-k1).exp2()))?;
    let d2 = sigmas[1].op().sub(&rho.op().scale((-k2).exp2()))?;
    let mut worst = f64::INFINITY;
    for &i in &m.good {
        let b = &m.decomposition.blocks[i];
        if let Some(v) = &b.v {
            worst = worst.min(d1.expectation(v));
        }
        if let Some(w) = &b.w {
            worst = worst.min(d2.expectation(w));
        }
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    Ok(ValidationReport::new(
        "meet_lower.blockwise",
        Relation::Geq,
        worst,
        0.0,
        1e-9,
    ))
}

/// `2 · sinθ_max` allowed by an overlap threshold `c`.
fn threshold_term(c: f64) -> f64 {
    2.0 * (1.0 - c).clamp(0.0, 1.0).sqrt()
}

/// Intersection of `{σ₁ ⪯ 2^{−k₁}ρ}` and `{σ₂ ⪯ 2^{−k₂}ρ}`.
pub fn meet_upper(rho: &DensityOperator, sigmas: &[DensityOperator], spec: &MeetSpec) -> Result<MeetResult> {
    pair_result(rho, sigmas, spec, Direction::Upper)
}

/// Intersection of `{σ₁ ⪰ 2^{−k₁}ρ}` and `{σ₂ ⪰ 2^{−k₂}ρ}`.
pub fn meet_lower(rho: &DensityOperator, sigmas: &[DensityOperator], spec: &MeetSpec) -> Result<MeetResult> {
    pair_result(rho, sigmas, spec, Direction::Lower)
}

/// Result of merging a list of projectors up a left-balanced binary tree.
#[derive(Clone, Debug)]
pub struct TreeMeet {
    pub pi_star: Projector,
    pub ledger: Vec<LedgerEntry>,
    pub path_slack: Vec<f64>,
    pub depth: usize,
    /// Good labels and probability of the root merge (empty for one leaf).
    pub root_good: Vec<usize>,
    pub root_good_probability: f64,
}

pub fn tree_depth(leaves: usize) -> usize {
    leaves.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Pairwise-merges `leaves` with a fixed overlap threshold. Independent
/// subtrees are merged in parallel; the left subtree takes the larger half.
pub fn meet_tree(leaves: &[Projector], rho: &DensityOperator, threshold: f64) -> Result<TreeMeet> {
    if leaves.is_empty() {
        return Err(Error::InvalidParameter("nothing to merge".into()));
    }
    let depth = tree_depth(leaves.len());
    if depth > MAX_DEPTH {
        return Err(Error::RecursionDepthExceeded {
            depth,
            limit: MAX_DEPTH,
        });
    }
    merge_range(leaves, 0, rho, threshold)
}

fn merge_range(leaves: &[Projector], offset: usize, rho: &DensityOperator, c: f64) -> Result<TreeMeet> {
    let n = leaves.len();
    if n == 1 {
        return Ok(TreeMeet {
            pi_star: leaves[0].clone(),
            ledger: Vec::new(),
            path_slack: vec![0.0],
            depth: 0,
            root_good: Vec::new(),
            root_good_probability: 1.0,
        });
    }
    let half = n.div_ceil(2);
    let (l, r) = rayon::join(
        || merge_range(&leaves[..half], offset, rho, c),
        || merge_range(&leaves[half..], offset + half, rho, c),
    );
    let (l, r) = (l?, r?);
    let m = pairwise_meet(&l.pi_star, &r.pi_star, rho, c)?;
    let level = l.depth.max(r.depth) + 1;
    let additive = 2.0 * m.max_good_sine;

    let mut ledger = l.ledger;
    ledger.extend(r.ledger);
    ledger.push(LedgerEntry {
        level,
        left: (offset, offset + half),
        right: (offset + half, offset + n),
        good_blocks: m.good.len(),
        good_probability: m.good_probability,
        max_good_sine: m.max_good_sine,
        additive_term: additive,
        threshold_term: threshold_term(c),
    });
    let mut path_slack = l.path_slack;
    path_slack.extend(r.path_slack.iter().map(|s| s + additive));
    Ok(TreeMeet {
        pi_star: m.pi_star,
        ledger,
        path_slack,
        depth: level,
        root_good: m.good,
        root_good_probability: m.good_probability,
    })
}

/// Recursive intersection of `{σ_i ⪯ 2^{−k_i}ρ}` over all `i`.
pub fn meet_many(rho: &DensityOperator, sigmas: &[DensityOperator], spec: &MeetSpec) -> Result<MeetResult> {
    if sigmas.len() < 2 {
        return Err(Error::InvalidParameter("meet_many needs at least two states".into()));
    }
    if spec.direction != Direction::Upper {
        return Err(Error::InvalidParameter(
            "meet_many builds upper-threshold projectors only".into(),
        ));
    }
    let depth = tree_depth(sigmas.len());
    if depth > MAX_DEPTH {
        return Err(Error::RecursionDepthExceeded {
            depth,
            limit: MAX_DEPTH,
        });
    }
    let (ps, base_traces, eps) = base_projectors(rho, sigmas, spec)?;
    let c = 1.0 - 8.0 * eps.powf(spec.tau);
    let tree = meet_tree(&ps, rho, c)?;
    let rho_trace = rho.prob(&tree.pi_star)?;
    let sigma_traces = sigmas
        .iter()
        .map(|s| s.prob(&tree.pi_star))
        .collect::<Result<Vec<_>>>()?;
    let ledger_total: f64 = tree.ledger.iter().map(|e| e.additive_term).sum();

    let t = depth as f64;
    let mut bounds = vec![ValidationReport::bound(
        "meet_many.rho",
        Relation::Geq,
        rho_trace,
        1.0 - (t + 1.0) * eps.powf(1.0 - t * spec.tau),
        BOUND_TOL,
    )];
    for (i, (&tr, &k)) in sigma_traces.iter().zip(&spec.k_values).enumerate() {
        bounds.push(ValidationReport::bound(
            format!("meet_many.sigma{}", i + 1),
            Relation::Leq,
            tr,
            (-k).exp2() + ledger_total,
            BOUND_TOL,
        ));
    }

    Ok(MeetResult {
        rank: tree.pi_star.rank(),
        pi_star: tree.pi_star,
        good_indices: tree.root_good,
        good_probability: tree.root_good_probability,
        epsilon_nominal: spec.epsilon,
        epsilon_measured: eps,
        premise_violation: eps > spec.epsilon,
        base_traces,
        rho_trace,
        sigma_traces,
        bounds,
        slack_ledger: tree.ledger,
        path_slack: tree.path_slack,
        depth,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Claim1Report {
    pub epsilon_nominal: f64,
    pub epsilon_measured: f64,
    pub premise_violation: bool,
    /// `E[cos²θ_α]` under `Tr[ρ_α]`.
    pub mean_overlap: f64,
    pub good_probability: f64,
    pub checks: Vec<ValidationReport>,
}

/// Checks `E[cos²θ] ≥ 1 − 8ε` and `Pr{Good} ≥ 1 − √ε` for the pair encoded
/// in `dec`, with `ε` the measured premise.
pub fn claim1_check(dec: &JordanDecomposition, rho: &DensityOperator, epsilon: f64) -> Result<Claim1Report> {
    let (p1, p2) = crate::jordan::reconstruct(dec);
    let eps = (1.0 - rho.prob(&p1)?).max(1.0 - rho.prob(&p2)?).max(0.0);
    let hist = overlaps_histogram(dec, rho)?;
    let mean_overlap = hist.mean_overlap();
    let (_, good_probability) = good_set(dec, rho, eps)?;
    let checks = vec![
        ValidationReport::bound(
            "claim1.expectation",
            Relation::Geq,
            mean_overlap,
            1.0 - 8.0 * eps,
            BOUND_TOL,
        ),
        ValidationReport::bound(
            "claim1.good",
            Relation::Geq,
            good_probability,
            1.0 - eps.sqrt(),
            BOUND_TOL,
        ),
    ];
    Ok(Claim1Report {
        epsilon_nominal: epsilon,
        epsilon_measured: eps,
        premise_violation: eps > epsilon,
        mean_overlap,
        good_probability,
        checks,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Psd2x2Report {
    pub trace: f64,
    pub re_b: f64,
    /// `Tr[A] − 2Re(b) ≥ −1e−10`
    pub minus: bool,
    /// `Tr[A] + 2Re(b) ≥ −1e−10`
    pub plus: bool,
}

/// For `A = [[a, b], [b*, c]] ⪰ 0`, both `Tr[A] ± 2Re(b)` are non-negative.
pub fn psd2x2_check(a: &HermitianOperator) -> Result<Psd2x2Report> {
    crate::error::check_dims(a.dim(), 2)?;
    let m = a.matrix();
    let trace = a.trace();
    let re_b = m[(0, 1)].re;
    Ok(Psd2x2Report {
        trace,
        re_b,
        minus: trace - 2.0 * re_b >= -1e-10,
        plus: trace + 2.0 * re_b >= -1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Matrix, C64};
    use crate::random::{random_density, random_density_with_spectrum, random_psd, rng_from_seed};
    use rand::Rng;

    fn spectral_distance(a: &Matrix, b: &Matrix) -> f64 {
        HermitianOperator::from_matrix_unchecked(a - b).spectral_norm().unwrap()
    }

    #[test]
    fn good_set_threshold_arithmetic() {
        let plus = Projector::from_matrix(Matrix::from_element(2, 2, C64::new(0.5, 0.0))).unwrap();
        let zero = Projector::from_indicator(&[true, false]);
        let dec = jordan_decompose(&zero, &plus).unwrap();
        let rho = DensityOperator::maximally_mixed(2);
        // 1 − 8·0.1 = 0.2 ≤ 0.5
        let (g, p) = good_set(&dec, &rho, 0.01).unwrap();
        assert_eq!(g, vec![0]);
        assert!((p - 1.0).abs() < 1e-12);
        // 1 − 8·√0.001 ≈ 0.747 > 0.5
        let (g, p) = good_set(&dec, &rho, 0.001).unwrap();
        assert!(g.is_empty());
        assert_eq!(p, 0.0);
        assert!((pairwise_threshold(0.001) - (1.0 - 8.0 * 0.001f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn equal_projectors_meet_to_themselves() {
        let mut rng = rng_from_seed(21);
        let rho = random_density(6, 6, &mut rng);
        let sigma = random_density(6, 6, &mut rng);
        let spec = MeetSpec::upper(vec![0.5, 0.5], 0.5);
        let r = meet_upper(&rho, &[sigma.clone(), sigma.clone()], &spec).unwrap();
        let p1 = threshold_projector(&rho, &sigma, 0.5, Direction::Upper).unwrap();
        assert!(spectral_distance(r.pi_star.matrix(), p1.matrix()) < 1e-10);
        assert!(r.all_pass());
    }

    #[test]
    fn lower_with_equal_states_is_support() {
        let rho = DensityOperator::from_diagonal(&[0.6, 0.4, 0.0]).unwrap();
        let spec = MeetSpec::lower(vec![1.0, 1.0], 0.01);
        let r = meet_lower(&rho, &[rho.clone(), rho.clone()], &spec).unwrap();
        // {ρ ⪰ ρ/2} keeps the kernel too under the zero-eigenspace convention,
        // and ρ carries no weight there.
        assert!((r.rho_trace - 1.0).abs() < 1e-12);
        assert!((r.sigma_traces[1] - 1.0).abs() < 1e-12);
        assert!(r.all_pass());
    }

    #[test]
    fn commuting_upper_matches_classical_sets() {
        let mut rng = rng_from_seed(22);
        for _ in 0..20 {
            let d = rng.random_range(2..=10);
            let probs: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
            let z: f64 = probs.iter().sum();
            let rho_d: Vec<f64> = probs.iter().map(|p| p / z).collect();
            let mk = |rng: &mut crate::random::StdRng| -> Vec<f64> {
                let q: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
                let z: f64 = q.iter().sum();
                q.iter().map(|x| x / z).collect()
            };
            let s1 = mk(&mut rng);
            let s2 = mk(&mut rng);
            let (k1, k2) = (0.3, 0.2);
            let rho = DensityOperator::from_diagonal(&rho_d).unwrap();
            let sig = [
                DensityOperator::from_diagonal(&s1).unwrap(),
                DensityOperator::from_diagonal(&s2).unwrap(),
            ];
            let r = meet_upper(&rho, &sig, &MeetSpec::upper(vec![k1, k2], 0.5)).unwrap();
            if 8.0 * r.epsilon_measured.sqrt() >= 1.0 {
                continue;
            }
            let mask: Vec<bool> = (0..d)
                .map(|x| s1[x] <= (-k1).exp2() * rho_d[x] && s2[x] <= (-k2).exp2() * rho_d[x])
                .collect();
            let expect = Projector::from_indicator(&mask);
            let diff = r.pi_star.matrix() - expect.matrix();
            assert!(diff.iter().all(|z| z.norm() <= 1e-12), "{diff}");
        }
    }

    fn premise_instance(rng: &mut crate::random::StdRng, d: usize) -> (DensityOperator, Vec<DensityOperator>) {
        let mut spec: Vec<f64> = (0..d).map(|i| 0.6f64.powi(i as i32 * 3)).collect();
        spec[0] += 2.0;
        let rho = random_density_with_spectrum(&spec, rng);
        let s1 = random_density(d, d, rng);
        let s2 = random_density(d, d, rng);
        (rho, vec![s1, s2])
    }

    #[test]
    fn random_upper_and_lower_bounds_hold() {
        let mut rng = rng_from_seed(23);
        for _ in 0..30 {
            let d = rng.random_range(3..=12);
            let (rho, sig) = premise_instance(&mut rng, d);
            let k = vec![rng.random_range(0.1..1.5), rng.random_range(0.1..1.5)];
            let up = meet_upper(&rho, &sig, &MeetSpec::upper(k.clone(), 0.5)).unwrap();
            for b in &up.bounds {
                assert!(b.pass, "{b:?}");
            }
            // Π* ⪯ Π₁
            let p1 = threshold_projector(&rho, &sig[0], k[0], Direction::Upper).unwrap();
            let sandwiched = p1.matrix() * up.pi_star.matrix() * p1.matrix();
            assert!(spectral_distance(&sandwiched, up.pi_star.matrix()) <= 1e-8);

            let lo = meet_lower(&rho, &sig, &MeetSpec::lower(vec![3.0, 3.0], 0.5)).unwrap();
            let blk = lo.bounds.iter().find(|b| b.name == "meet_lower.blockwise").unwrap();
            assert!(blk.pass, "{blk:?}");
        }
    }

    #[test]
    fn many_with_identical_inputs_collapses() {
        let mut rng = rng_from_seed(24);
        let (rho, sig) = premise_instance(&mut rng, 6);
        let spec2 = MeetSpec::upper(vec![0.4, 0.4], 0.5);
        let pair = meet_upper(&rho, &[sig[0].clone(), sig[0].clone()], &spec2).unwrap();
        let four = vec![sig[0].clone(); 4];
        let many = meet_many(&rho, &four, &MeetSpec::upper(vec![0.4; 4], 0.5)).unwrap();
        assert!(spectral_distance(pair.pi_star.matrix(), many.pi_star.matrix()) <= 1e-8);
        assert_eq!(many.depth, 2);
        assert_eq!(many.slack_ledger.len(), 3);
    }

    #[test]
    fn many_of_two_equals_upper() {
        let mut rng = rng_from_seed(25);
        let (rho, sig) = premise_instance(&mut rng, 8);
        let spec = MeetSpec::upper(vec![0.3, 0.6], 0.5);
        let a = meet_upper(&rho, &sig, &spec).unwrap();
        let b = meet_many(&rho, &sig, &spec).unwrap();
        assert!(spectral_distance(a.pi_star.matrix(), b.pi_star.matrix()) <= 1e-10);
    }

    #[test]
    fn many_respects_path_slack() {
        let mut rng = rng_from_seed(26);
        for _ in 0..10 {
            let d = 8;
            let mut spec: Vec<f64> = (0..d).map(|i| 0.5f64.powi(i as i32 * 2)).collect();
            spec[0] += 3.0;
            let rho = random_density_with_spectrum(&spec, &mut rng);
            let sig: Vec<DensityOperator> = (0..5).map(|_| random_density(d, d, &mut rng)).collect();
            let k: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..1.0)).collect();
            let r = meet_many(&rho, &sig, &MeetSpec::upper(k.clone(), 0.5).with_tau(0.25)).unwrap();
            assert_eq!(r.depth, 3);
            for (i, ki) in k.iter().enumerate() {
                assert!(r.sigma_traces[i] <= (-ki).exp2() + r.path_slack[i] + 1e-8);
                assert!(r.path_slack[i] <= r.ledger_total() + 1e-15);
            }
        }
    }

    #[test]
    fn depth_limit() {
        let rho = DensityOperator::maximally_mixed(2);
        let sig = vec![rho.clone(); 257];
        let err = meet_many(&rho, &sig, &MeetSpec::upper(vec![0.1; 257], 0.5)).unwrap_err();
        assert!(matches!(err, Error::RecursionDepthExceeded { depth: 9, .. }));
    }

    #[test]
    fn spec_validation() {
        let rho = DensityOperator::maximally_mixed(2);
        let sig = vec![rho.clone(), rho.clone()];
        assert!(meet_upper(&rho, &sig, &MeetSpec::upper(vec![0.1, 0.1], 1.5)).is_err());
        assert!(meet_upper(&rho, &sig, &MeetSpec::upper(vec![0.1, -0.1], 0.5)).is_err());
        assert!(meet_upper(&rho, &sig, &MeetSpec::lower(vec![0.1, 0.1], 0.5)).is_err());
    }

    #[test]
    fn support_violation_is_reported() {
        let rho = DensityOperator::maximally_mixed(2);
        let pure = DensityOperator::from_diagonal(&[1.0, 0.0]).unwrap();
        let err = meet_upper(
            &rho,
            &[pure.clone(), rho.clone()],
            &MeetSpec::upper(vec![0.1, 0.1], 0.5),
        );
        assert!(matches!(err, Err(Error::SupportError(_))));
    }

    #[test]
    fn claim1_examples() {
        let p = Projector::from_indicator(&[true, true, false]);
        let dec = jordan_decompose(&p, &p).unwrap();
        let rho = DensityOperator::from_diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let r = claim1_check(&dec, &rho, 0.01).unwrap();
        assert!((r.mean_overlap - 1.0).abs() < 1e-12);
        assert!((r.good_probability - 1.0).abs() < 1e-12);
        assert!(!r.premise_violation);

        // Nearly orthogonal pair: both premises fail badly.
        let a = Projector::from_indicator(&[true, false]);
        let th: f64 = 1.5;
        let v = crate::operator::Vector::from_vec(vec![C64::new(th.cos(), 0.0), C64::new(th.sin(), 0.0)]);
        let b = Projector::from_orthonormal_columns(&Matrix::from_columns(&[v]), 2);
        let dec = jordan_decompose(&a, &b).unwrap();
        let rho = DensityOperator::from_diagonal(&[0.0, 1.0]).unwrap();
        let r = claim1_check(&dec, &rho, 0.01).unwrap();
        assert!(r.premise_violation);
        assert!(r.epsilon_measured > 0.99);
    }

    #[test]
    fn psd2x2_examples() {
        let ones = HermitianOperator::new(Matrix::from_element(2, 2, C64::new(1.0, 0.0))).unwrap();
        let r = psd2x2_check(&ones).unwrap();
        assert!(r.minus && r.plus);
        assert_eq!(r.trace - 2.0 * r.re_b, 0.0);

        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        let r = psd2x2_check(&HermitianOperator::new(m).unwrap()).unwrap();
        assert_eq!(r.re_b, 0.0);
        assert!(r.minus && r.plus);

        let mut rng = rng_from_seed(27);
        for _ in 0..200 {
            let r = psd2x2_check(&random_psd(2, &mut rng)).unwrap();
            assert!(r.minus && r.plus);
        }
    }
}
