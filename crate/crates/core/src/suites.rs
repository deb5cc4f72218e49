//! Seeded experiment suites shared by the CLI and the acceptance tests.
//!
//! Each suite draws its instances from `derive_seed(&[seed, tag, i])`, runs
//! them in parallel and returns rows in instance order, so output depends
//! only on the configuration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::authchannel::CQChannelFamily;
use crate::error::{Error, Result};
use crate::hypotest::{
    composite_meet_test, composite_two_sided, composite_union_test, neyman_pearson_beta, stein_converse_check,
    CompositeResult,
};
use crate::inequalities::{gao_bound_check, gentle_measurement_check, hayashi_nagaoka_check};
use crate::jordan::jordan_decompose;
use crate::meet::{
    claim1_check, meet_lower, meet_many, meet_upper, psd2x2_check, threshold_projector, Direction, MeetResult, MeetSpec,
};
use crate::operator::{
    relative_entropy, tensor_power, DensityOperator, Ensemble, HermitianOperator, Matrix, Projector, C64,
    DEFAULT_DIM_CAP,
};
use crate::random::{
    derive_seed, random_density, random_density_with_spectrum, random_projector, random_psd, random_unitary,
    rng_from_seed, StdRng,
};
use crate::report::{Relation, ValidationReport};

/// Instances are redrawn until the measured premise is at most this.
pub const DEFAULT_PREMISE: f64 = 0.05;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub trials: usize,
    pub n_list: Vec<usize>,
    pub eps: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub tau: f64,
    pub cap: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 200,
            n_list: vec![6],
            eps: DEFAULT_PREMISE,
            delta: 0.04,
            delta_prime: 0.3,
            tau: 0.25,
            cap: DEFAULT_DIM_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub suite: String,
    pub instance: usize,
    pub report: ValidationReport,
}

fn rows(suite: &str, per_instance: Vec<Vec<ValidationReport>>) -> Vec<Row> {
    per_instance
        .into_iter()
        .enumerate()
        .flat_map(|(i, rs)| {
            rs.into_iter().map(move |report| Row {
                suite: suite.to_string(),
                instance: i,
                report,
            })
        })
        .collect()
}

fn instance_rng(seed: u64, tag: u64, i: usize) -> StdRng {
    rng_from_seed(derive_seed(&[seed, tag, i as u64]))
}

/// Probability vector with one dominant entry carrying `1 − tail`.
fn peaked_spectrum(rng: &mut StdRng, d: usize, tail: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..d.saturating_sub(1)).map(|_| rng.random::<f64>() + 0.01).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x *= tail / z);
    w.insert(0, 1.0 - tail);
    w
}

/// Ginibre state mixed with 5% of `I/d`, so supports are never an issue.
fn full_rank_state(rng: &mut StdRng, d: usize) -> Result<DensityOperator> {
    DensityOperator::mixture(
        &[0.95, 0.05],
        &[&random_density(d, d, rng), &DensityOperator::maximally_mixed(d)],
    )
}

#[derive(Clone, Debug)]
pub struct PairInstance {
    pub rho: DensityOperator,
    pub sigmas: Vec<DensityOperator>,
    pub k: Vec<f64>,
    pub digest: String,
}

/// One draw of a threshold instance of dimension at most 64, from one of
/// three families: i.i.d. powers `ρ^{⊗n}, σ_i^{⊗n}` with thresholds
/// `n(D_i ∓ δ)`, unstructured states with random thresholds, or states
/// nearly diagonal in the eigenbasis of `ρ`.
fn draw_pair(rng: &mut StdRng, direction: Direction, count: usize) -> Result<PairInstance> {
    let family = rng.random_range(0..3);
    if family == 2 {
        return draw_aligned(rng, direction, count);
    }
    if family == 0 {
        let (d0, n) = if rng.random_bool(0.7) {
            (2, rng.random_range(1..=6))
        } else {
            (3, rng.random_range(1..=3))
        };
        let tail = 10f64.powf(rng.random_range(-5.0..-1.0));
        let r0 = random_density_with_spectrum(&peaked_spectrum(rng, d0, tail), rng);
        let delta = rng.random_range(0.05..0.4);
        let mut sigmas = Vec::with_capacity(count);
        let mut k = Vec::with_capacity(count);
        for _ in 0..count {
            let s0 = full_rank_state(rng, d0)?;
            let d = relative_entropy(&r0, &s0)?;
            let ki = match direction {
                Direction::Upper => n as f64 * (d - delta).max(0.05),
                Direction::Lower => n as f64 * (d + delta),
            };
            sigmas.push(tensor_power(&s0, n, DEFAULT_DIM_CAP)?);
            k.push(ki);
        }
        Ok(PairInstance {
            rho: tensor_power(&r0, n, DEFAULT_DIM_CAP)?,
            sigmas,
            k,
            digest: format!("power:d={d0},n={n},delta={delta:.4},tail={tail:.3e}"),
        })
    } else {
        let d = rng.random_range(2..=32);
        let tail = 10f64.powf(rng.random_range(-5.0..-1.0));
        let rho = random_density_with_spectrum(&peaked_spectrum(rng, d, tail), rng);
        let sigmas = (0..count).map(|_| full_rank_state(rng, d)).collect::<Result<_>>()?;
        let k = (0..count)
            .map(|_| match direction {
                Direction::Upper => rng.random_range(0.1..2.0),
                Direction::Lower => rng.random_range(2.0..8.0),
            })
            .collect();
        Ok(PairInstance {
            rho,
            sigmas,
            k,
            digest: format!("dense:d={d},tail={tail:.3e}"),
        })
    }
}

/// Cayley transform `(I − iηH)(I + iηH)^{−1}`: a unitary within `O(η)` of `I`.
fn near_identity(rng: &mut StdRng, d: usize, eta: f64) -> Matrix {
    let h = crate::random::random_hermitian(d, rng);
    let ih = h.matrix() * C64::new(0.0, eta);
    let id = Matrix::identity(d, d);
    let inv = (&id + &ih)
        .try_inverse()
        .expect("I + iηH is invertible for Hermitian H");
    (&id - &ih) * inv
}

fn draw_aligned(rng: &mut StdRng, direction: Direction, count: usize) -> Result<PairInstance> {
    let d = rng.random_range(2..=32);
    let tail = 10f64.powf(rng.random_range(-5.0..-1.0));
    let u = random_unitary(d, rng);
    let rotate = |v: &Matrix, probs: &[f64]| -> DensityOperator {
        let m = v * HermitianOperator::from_real_diagonal(probs).matrix() * v.adjoint();
        DensityOperator::from_op_unchecked(HermitianOperator::from_matrix_unchecked(m))
    };
    let rho = rotate(&u, &peaked_spectrum(rng, d, tail));
    let eta = 10f64.powf(rng.random_range(-4.0..-1.5));
    let mut sigmas = Vec::with_capacity(count);
    let mut k = Vec::with_capacity(count);
    for _ in 0..count {
        let q: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
        let z: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|x| x / z).collect();
        sigmas.push(rotate(&(&u * near_identity(rng, d, eta)), &q));
        k.push(match direction {
            Direction::Upper => rng.random_range(0.1..2.0),
            Direction::Lower => rng.random_range(2.0..8.0),
        });
    }
    Ok(PairInstance {
        rho,
        sigmas,
        k,
        digest: format!("aligned:d={d},tail={tail:.3e},eta={eta:.3e}"),
    })
}

fn run_meet(inst: &PairInstance, direction: Direction, eps: f64, tau: f64) -> Result<MeetResult> {
    match (direction, inst.sigmas.len()) {
        (Direction::Upper, 2) => meet_upper(&inst.rho, &inst.sigmas, &MeetSpec::upper(inst.k.clone(), eps)),
        (Direction::Lower, 2) => meet_lower(&inst.rho, &inst.sigmas, &MeetSpec::lower(inst.k.clone(), eps)),
        (Direction::Upper, _) => meet_many(
            &inst.rho,
            &inst.sigmas,
            &MeetSpec::upper(inst.k.clone(), eps).with_tau(tau),
        ),
        (Direction::Lower, _) => Err(Error::InvalidParameter("lower meet takes two states".into())),
    }
}

/// Redraws until the measured premise `ε` is at most `eps`.
pub fn premise_instance(
    seed: u64,
    tag: u64,
    i: usize,
    direction: Direction,
    count: usize,
    eps: f64,
    tau: f64,
) -> Result<(PairInstance, MeetResult)> {
    let mut rng = instance_rng(seed, tag, i);
    for _ in 0..MAX_ATTEMPTS {
        let inst = draw_pair(&mut rng, direction, count)?;
        let r = run_meet(&inst, direction, eps, tau)?;
        if !r.premise_violation {
            return Ok((inst, r));
        }
    }
    Err(Error::InvalidParameter(format!(
        "no instance with premise ≤ {eps} after {MAX_ATTEMPTS} draws"
    )))
}

fn tagged(mut reports: Vec<ValidationReport>, digest: &str, eps: f64) -> Vec<ValidationReport> {
    for r in &mut reports {
        r.instance_digest = format!("{digest},eps={eps:.3e}");
    }
    reports
}

const TAG_PAIR: u64 = 1;
const TAG_LOWER: u64 = 2;
const TAG_MANY: u64 = 3;
const TAG_FACTS: u64 = 4;

/// Upper two-state intersection bounds on `cfg.trials` instances.
pub fn meet_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let out = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let (inst, r) = premise_instance(cfg.seed, TAG_PAIR, i, Direction::Upper, 2, cfg.eps, cfg.tau)?;
            Ok(tagged(r.bounds, &inst.digest, r.epsilon_measured))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows("meet", out))
}

/// Lower two-state intersection bounds on `cfg.trials` instances.
pub fn lower_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let out = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let (inst, r) = premise_instance(cfg.seed, TAG_LOWER, i, Direction::Lower, 2, cfg.eps, cfg.tau)?;
            Ok(tagged(r.bounds, &inst.digest, r.epsilon_measured))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows("lower", out))
}

/// Overlap statistics of the same instances as [`meet_suite`].
pub fn claim1_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let out = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let (inst, r) = premise_instance(cfg.seed, TAG_PAIR, i, Direction::Upper, 2, cfg.eps, cfg.tau)?;
            let p1 = threshold_projector(&inst.rho, &inst.sigmas[0], inst.k[0], Direction::Upper)?;
            let p2 = threshold_projector(&inst.rho, &inst.sigmas[1], inst.k[1], Direction::Upper)?;
            let dec = jordan_decompose(&p1, &p2)?;
            let c = claim1_check(&dec, &inst.rho, cfg.eps)?;
            Ok(tagged(c.checks, &inst.digest, r.epsilon_measured))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows("claim1", out))
}

/// Recursive intersection of 3 to 6 states.
pub fn many_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let out = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let count = 3 + i % 4;
            let (inst, r) = premise_instance(cfg.seed, TAG_MANY, i, Direction::Upper, count, cfg.eps, cfg.tau)?;
            Ok(tagged(r.bounds, &inst.digest, r.epsilon_measured))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows("many", out))
}

fn unit_psd(rng: &mut StdRng, d: usize) -> Result<HermitianOperator> {
    let g = random_psd(d, rng);
    Ok(g.scale(rng.random_range(0.1..1.0) / g.spectral_norm()?))
}

/// Sequential projection, Hayashi-Nagaoka, gentle measurement and 2×2
/// positivity, each on `cfg.trials` random instances.
pub fn facts_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let out = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<Vec<ValidationReport>> {
            let mut rng = instance_rng(cfg.seed, TAG_FACTS, i);
            let d = rng.random_range(2..=16);
            let rho = random_density(d, rng.random_range(1..=d), &mut rng);
            let ps: Vec<Projector> = (0..rng.random_range(1..=5))
                .map(|_| random_projector(d, rng.random_range(0..=d), &mut rng))
                .collect();
            let gao = gao_bound_check(&ps, &rho)?;

            let u = unit_psd(&mut rng, d)?;
            let v = random_psd(d, &mut rng).scale(10f64.powf(rng.random_range(-3.0..1.0)));
            let hn = hayashi_nagaoka_check(&u, &v)?;

            let k = rng.random_range(1..=4);
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
            let z: f64 = w.iter().sum();
            let mut w: Vec<f64> = w.iter().map(|x| x / z).collect();
            let fix: f64 = w.iter().sum();
            w[0] += 1.0 - fix;
            let states = (0..k)
                .map(|_| random_density(d, rng.random_range(1..=d), &mut rng))
                .collect();
            let gentle = gentle_measurement_check(&Ensemble::new(w, states)?, &unit_psd(&mut rng, d)?)?;

            let a = random_psd(2, &mut rng);
            let p = psd2x2_check(&a)?;
            let psd = ValidationReport::new(
                "psd2x2",
                Relation::Geq,
                (p.trace - 2.0 * p.re_b).min(p.trace + 2.0 * p.re_b),
                0.0,
                1e-10,
            );
            Ok(vec![gao, hn, gentle, psd])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows("facts", out))
}

fn qubit(theta: f64, phase: f64, p: f64) -> DensityOperator {
    // p|ψ⟩⟨ψ| + (1 − p)|ψ⊥⟩⟨ψ⊥| with |ψ⟩ = cos θ|0⟩ + e^{iφ} sin θ|1⟩.
    let (c, s) = (theta.cos(), theta.sin());
    let e = C64::from_polar(1.0, phase);
    let u = Matrix::from_row_slice(2, 2, &[C64::new(c, 0.0), -e.conj() * s, e * s, C64::new(c, 0.0)]);
    let d = HermitianOperator::from_real_diagonal(&[p, 1.0 - p]);
    DensityOperator::from_op_unchecked(HermitianOperator::from_matrix_unchecked(&u * d.matrix() * u.adjoint()))
}

/// Fixed non-commuting qubit pair used by the Stein and β-sweep suites.
pub fn stein_pair() -> (DensityOperator, DensityOperator) {
    (qubit(0.0, 0.0, 0.995), qubit(0.45, 0.3, 0.8))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaRow {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub rate: f64,
    pub bound: f64,
    pub status: String,
}

/// `β_{n,ε}` and its converse target for every `n`, on the fixed pair
/// unless states are given.
pub fn beta_sweep(
    pair: Option<(&DensityOperator, &DensityOperator)>,
    n_list: &[usize],
    epsilon: f64,
    delta: f64,
    cap: usize,
) -> Result<Vec<BetaRow>> {
    let fixed = stein_pair();
    let (rho, sigma) = pair.unwrap_or((&fixed.0, &fixed.1));
    n_list
        .par_iter()
        .map(|&n| {
            let b = neyman_pearson_beta(rho, sigma, n, epsilon, cap)?;
            let check = stein_converse_check(&b.test_operator, rho, sigma, n, delta, cap)?;
            Ok(BetaRow {
                n,
                epsilon,
                delta,
                beta: b.beta,
                rate: -b.beta.log2() / n as f64,
                bound: check.rhs,
                status: check.status().to_string(),
            })
        })
        .collect()
}

/// Converse checks for `n ∈ n_list`, `δ ∈ {0.1, 0.2}`, at `cfg.eps`, plus
/// the rate trend at `ε = 0.05` for the largest `n`.
pub fn stein_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let (rho, sigma) = stein_pair();
    let d = relative_entropy(&rho, &sigma)?;
    let mut per_n = cfg
        .n_list
        .par_iter()
        .map(|&n| -> Result<Vec<ValidationReport>> {
            let b = neyman_pearson_beta(&rho, &sigma, n, cfg.eps, cfg.cap)?;
            [0.1, 0.2]
                .iter()
                .map(|&delta| stein_converse_check(&b.test_operator, &rho, &sigma, n, delta, cfg.cap))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(&n) = cfg.n_list.iter().max() {
        let b = neyman_pearson_beta(&rho, &sigma, n, 0.05, cfg.cap)?;
        let rate = -b.beta.log2() / n as f64;
        per_n.push(vec![ValidationReport::new(
            "stein.trend",
            Relation::Leq,
            (rate - d).abs(),
            0.15,
            0.0,
        )
        .with_digest(format!("n={n},rate={rate:.6},D={d:.6}"))]);
    }
    Ok(rows("stein", per_n))
}

/// Qubit family member: null states are nearly pure and close to `|0⟩`,
/// alternatives have spectrum `(p, 1 − p)` with `p ≤ 0.985` and sit close to
/// `|1⟩`, so sixth tensor powers of the alternatives stay well resolved.
fn composite_state(rng: &mut StdRng, null: bool) -> DensityOperator {
    let theta = rng.random_range(0.0..0.03) + if null { 0.0 } else { std::f64::consts::FRAC_PI_2 };
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let p = if null {
        rng.random_range(0.9985..0.9998)
    } else {
        rng.random_range(0.95..0.985)
    };
    qubit(theta, phase, p)
}

/// Two-channel qubit family: `s0` sends `|0⟩, |+⟩`; `s1` sends `|1⟩, |−⟩`
/// mixed with 20% of `I/2`.
pub fn auth_demo_family() -> CQChannelFamily {
    let pure = |theta: f64| qubit(theta, 0.0, 1.0);
    let noisy = |theta: f64| {
        DensityOperator::mixture(&[0.8, 0.2], &[&pure(theta), &DensityOperator::maximally_mixed(2)])
            .expect("valid mixture")
    };
    let states = [
        ("s0".to_string(), vec![pure(0.0), pure(std::f64::consts::FRAC_PI_4)]),
        (
            "s1".to_string(),
            vec![noisy(std::f64::consts::FRAC_PI_2), noisy(-std::f64::consts::FRAC_PI_4)],
        ),
    ]
    .into_iter()
    .collect();
    CQChannelFamily::new(vec!["s0".into(), "s1".into()], "s0", states).expect("valid family")
}

/// Which composite construction an instance exercises and with how many states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompositeKind {
    Union { nulls: usize },
    Meet { alternatives: usize },
    TwoSided { nulls: usize, alternatives: usize },
}

pub const COMPOSITE_MIX: [CompositeKind; 6] = [
    CompositeKind::Union { nulls: 2 },
    CompositeKind::Union { nulls: 3 },
    CompositeKind::Meet { alternatives: 2 },
    CompositeKind::Meet { alternatives: 3 },
    CompositeKind::TwoSided {
        nulls: 2,
        alternatives: 1,
    },
    CompositeKind::TwoSided {
        nulls: 2,
        alternatives: 2,
    },
];

/// Composite instance `i` of the mix, redrawn until the measured premise
/// is at most `cfg.eps`.
pub fn composite_instance(cfg: &SuiteConfig, i: usize, n: usize) -> Result<(CompositeKind, CompositeResult)> {
    let kind = COMPOSITE_MIX[i % COMPOSITE_MIX.len()];
    let mut rng = instance_rng(cfg.seed, 5 + n as u64 * 16, i);
    for _ in 0..MAX_ATTEMPTS {
        let mut draw = |k: usize, null: bool| -> Vec<DensityOperator> {
            (0..k).map(|_| composite_state(&mut rng, null)).collect()
        };
        let r = match kind {
            CompositeKind::Union { nulls } => {
                let rhos = draw(nulls, true);
                let sigma = draw(1, false).pop().unwrap();
                composite_union_test(&rhos, &sigma, n, cfg.delta, cfg.delta_prime, cfg.cap)?
            }
            CompositeKind::Meet { alternatives } => {
                let rho = draw(1, true).pop().unwrap();
                let sigmas = draw(alternatives, false);
                composite_meet_test(&rho, &sigmas, n, cfg.delta, cfg.cap)?
            }
            CompositeKind::TwoSided { nulls, alternatives } => {
                let rhos = draw(nulls, true);
                let sigmas = draw(alternatives, false);
                composite_two_sided(&rhos, &sigmas, n, cfg.delta, cfg.delta_prime, cfg.cap)?
            }
        };
        if r.epsilon_measured <= cfg.eps {
            return Ok((kind, r));
        }
    }
    Err(Error::InvalidParameter(format!(
        "no composite instance with premise ≤ {} after {MAX_ATTEMPTS} draws",
        cfg.eps
    )))
}

/// The three composite constructions on qubit families, `cfg.trials`
/// instances per `n`.
pub fn composite_suite(cfg: &SuiteConfig) -> Result<Vec<Row>> {
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        let per = (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let (kind, r) = composite_instance(cfg, i, n)?;
                Ok(tagged(r.bounds, &format!("{kind:?},n={n}"), r.epsilon_measured))
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(rows("composite", per));
    }
    Ok(out)
}
