//! Authenticated classical-quantum channel coding at desk scale.
//!
//! The receiver first measures `{Π^{¬⊥}, I − Π^{¬⊥}}`, aborting with `⊥` on
//! the second outcome, and otherwise decodes the post-measurement state with
//! a square-root measurement built from conditional typical projectors.
//! Error rates are estimated by Monte Carlo over fresh random codebooks and
//! uniform messages, one derived seed per `(n, trial, s)`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::inequalities::pinv_sqrt;
use crate::meet::{meet_many, threshold_projector, Direction, LedgerEntry, MeetSpec};
use crate::operator::{
    check_support, checked_power, holevo_information, positive_eigenspace_projector, relative_entropy, tensor_power,
    tensor_product, DensityOperator, Ensemble, HermitianOperator, Matrix, Projector, C64,
};
use crate::random::{derive_seed, rng_from_seed};
use crate::report::wilson_interval;

/// Largest `2^{⌈nR⌉} · n` a codebook may hold.
pub const CODEBOOK_BUDGET: usize = 1 << 26;
/// Below this pass probability the post-measurement state cannot be formed.
pub const UNDERFLOW_TOL: f64 = 1e-13;
/// `D(ρ^{(s₀)}‖ρ^{(s)})` at or below this makes authentication impossible.
pub const DEGENERATE_D: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CQChannelFamily {
    labels: Vec<String>,
    s0: String,
    alphabet: usize,
    states: BTreeMap<String, Vec<DensityOperator>>,
}

impl CQChannelFamily {
    pub fn new(
        labels: Vec<String>,
        s0: impl Into<String>,
        states: BTreeMap<String, Vec<DensityOperator>>,
    ) -> Result<Self> {
        let s0 = s0.into();
        if !labels.contains(&s0) {
            return Err(Error::InvalidParameter(format!("s0 '{s0}' is not a label")));
        }
        let alphabet = states
            .get(&s0)
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidParameter(format!("no states for '{s0}'")))?;
        if alphabet == 0 {
            return Err(Error::InvalidParameter("empty input alphabet".into()));
        }
        let dim = states[&s0][0].dim();
        for l in &labels {
            let row = states
                .get(l)
                .ok_or_else(|| Error::InvalidParameter(format!("no states for '{l}'")))?;
            if row.len() != alphabet {
                return Err(Error::InvalidParameter(format!(
                    "'{l}' has {} states, expected {alphabet}",
                    row.len()
                )));
            }
            for s in row {
                check_dims(dim, s.dim())?;
            }
        }
        Ok(Self {
            labels,
            s0,
            alphabet,
            states,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn s0(&self) -> &str {
        &self.s0
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn dim(&self) -> usize {
        self.states[&self.s0][0].dim()
    }

    pub fn state(&self, label: &str, x: usize) -> &DensityOperator {
        &self.states[label][x]
    }

    pub fn states(&self, label: &str) -> &[DensityOperator] {
        &self.states[label]
    }

    /// Labels other than `s0`, in label order.
    pub fn others(&self) -> impl Iterator<Item = &String> {
        self.labels.iter().filter(move |l| **l != self.s0)
    }

    pub fn ensemble(&self, label: &str, p: &[f64]) -> Result<Ensemble> {
        Ensemble::new(p.to_vec(), self.states[label].clone())
    }

    /// `E_X[ρ_X^{(s)}]`.
    pub fn average(&self, label: &str, p: &[f64]) -> Result<DensityOperator> {
        Ok(self.ensemble(label, p)?.average())
    }

    /// `ρ^{(s)}_{x^n} = ⊗_i ρ^{(s)}_{x_i}`.
    pub fn product_state(&self, label: &str, xn: &[usize], cap: usize) -> Result<DensityOperator> {
        let parts: Vec<&DensityOperator> = xn.iter().map(|&x| &self.states[label][x]).collect();
        tensor_product(&parts, cap)
    }
}

fn check_distribution(p: &[f64], alphabet: usize) -> Result<()> {
    if p.len() != alphabet {
        return Err(Error::InvalidParameter(format!(
            "distribution has {} entries, alphabet has {alphabet}",
            p.len()
        )));
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|x| *x < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("not a probability distribution".into()));
    }
    Ok(())
}

/// `max_{P_X} I[X;B]` under `s0` by simplex grid search and local refinement.
pub fn authentication_capacity(fam: &CQChannelFamily, grid: usize) -> Result<(f64, Vec<f64>)> {
    let k = fam.alphabet();
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidParameter(format!("alphabet size {k} outside 1..=4")));
    }
    if grid < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    let value = |p: &[f64]| -> Result<f64> { holevo_information(&fam.ensemble(fam.s0(), p)?) };
    if k == 1 {
        return Ok((0.0, vec![1.0]));
    }

    let steps = grid - 1;
    let mut best = (f64::NEG_INFINITY, vec![0.0; k]);
    let mut counts = vec![0usize; k];
    simplex_points(k, &mut counts, 0, steps, &mut |c| {
        let p = normalize_counts(c, steps);
        let v = value(&p)?;
        if v > best.0 + 1e-15 {
            best = (v, p);
        }
        Ok(())
    })?;

    // Local refinement: move mass between pairs of coordinates with a
    // shrinking step; for k = 2 this is a bracketed line search.
    let (mut v, mut p) = best;
    let mut h = 1.0 / steps as f64;
    while h > 1e-10 {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j || p[j] < h {
                    continue;
                }
                let mut q = p.clone();
                q[i] += h;
                q[j] -= h;
                let fix: f64 = q.iter().sum();
                q[i] += 1.0 - fix;
                let w = value(&q)?;
                if w > v + 1e-15 {
                    v = w;
                    p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    Ok((v.max(0.0), p))
}

fn normalize_counts(c: &[usize], steps: usize) -> Vec<f64> {
    let mut p: Vec<f64> = c.iter().map(|&x| x as f64 / steps as f64).collect();
    let total: f64 = p.iter().sum();
    let last = p.len() - 1;
    p[last] += 1.0 - total;
    p
}

fn simplex_points(
    k: usize,
    counts: &mut Vec<usize>,
    idx: usize,
    left: usize,
    f: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if idx == k - 1 {
        counts[idx] = left;
        return f(counts);
    }
    for c in 0..=left {
        counts[idx] = c;
        simplex_points(k, counts, idx + 1, left - c, f)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub rate: f64,
    pub words: Vec<Vec<usize>>,
    pub seed: u64,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// `2^{⌈nR⌉}` i.i.d. codewords drawn from `P_X`.
pub fn generate_codebook(p: &[f64], n: usize, rate: f64, seed: u64) -> Result<Codebook> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("blocklength must be positive".into()));
    }
    check_distribution(p, p.len())?;
    let bits = (n as f64 * rate).ceil();
    let count = if bits < 63.0 { 1usize << bits as u32 } else { usize::MAX };
    if count.saturating_mul(n) > CODEBOOK_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "2^{bits} codewords of length {n} exceed the budget of {CODEBOOK_BUDGET} symbols"
        )));
    }
    let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let words = (0..count)
        .map(|_| (0..n).map(|_| dist.sample(&mut rng)).collect())
        .collect();
    Ok(Codebook { n, rate, words, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RejectionTrace {
    pub label: String,
    pub divergence: f64,
    /// `Tr[Π^{¬⊥} (ρ^{(s)})^{⊗n}]`.
    pub trace: f64,
    /// `2^{−n(D − δ_auth)} + ledger total`.
    pub target: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuthProjector {
    #[serde(skip_serializing)]
    pub projector: Projector,
    /// `Tr[Π^{¬⊥} (ρ^{(s₀)})^{⊗n}]`.
    pub acceptance: f64,
    pub rejection: Vec<RejectionTrace>,
    pub ledger: Vec<LedgerEntry>,
    pub ledger_total: f64,
}

/// Intersection over `s ≠ s₀` of
/// `{(ρ^{(s)})^{⊗n} ⪯ 2^{−n(D(ρ^{(s₀)}‖ρ^{(s)}) − δ_auth)}(ρ^{(s₀)})^{⊗n}}`
/// on the input-averaged states.
pub fn build_auth_projector(
    fam: &CQChannelFamily,
    p: &[f64],
    n: usize,
    delta_auth: f64,
    tau: f64,
    cap: usize,
) -> Result<AuthProjector> {
    check_distribution(p, fam.alphabet())?;
    if !(delta_auth > 0.0 && delta_auth < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta_auth must lie in (0, 1), got {delta_auth}"
        )));
    }
    let r0 = fam.average(fam.s0(), p)?;
    let r0n = tensor_power(&r0, n, cap)?;
    let others: Vec<String> = fam.others().cloned().collect();
    if others.is_empty() {
        return Ok(AuthProjector {
            acceptance: 1.0,
            projector: Projector::identity(r0n.dim()),
            rejection: Vec::new(),
            ledger: Vec::new(),
            ledger_total: 0.0,
        });
    }

    let mut divergences = Vec::with_capacity(others.len());
    let mut powers = Vec::with_capacity(others.len());
    let mut ks = Vec::with_capacity(others.len());
    for l in &others {
        let rs = fam.average(l, p)?;
        check_support(&r0, &rs)?;
        let d = relative_entropy(&r0, &rs)?;
        if d <= DEGENERATE_D {
            return Err(Error::DegenerateChannel(l.clone()));
        }
        if d <= delta_auth {
            return Err(Error::InvalidParameter(format!(
                "delta_auth {delta_auth} must be below D = {d:.6} for '{l}'"
            )));
        }
        divergences.push(d);
        ks.push(n as f64 * (d - delta_auth));
        powers.push(tensor_power(&rs, n, cap)?);
    }

    let (projector, ledger) = if powers.len() == 1 {
        (
            threshold_projector(&r0n, &powers[0], ks[0], Direction::Upper)?,
            Vec::new(),
        )
    } else {
        let spec = MeetSpec::upper(ks.clone(), 0.5).with_tau(tau);
        let m = meet_many(&r0n, &powers, &spec)?;
        (m.pi_star, m.slack_ledger)
    };
    let ledger_total: f64 = ledger.iter().map(|e| e.additive_term).sum();
    let mut rejection = Vec::with_capacity(others.len());
    for (i, l) in others.iter().enumerate() {
        rejection.push(RejectionTrace {
            label: l.clone(),
            divergence: divergences[i],
            trace: powers[i].prob(&projector)?,
            target: (-ks[i]).exp2() + ledger_total,
        });
    }
    Ok(AuthProjector {
        acceptance: r0n.prob(&projector)?,
        projector,
        rejection,
        ledger,
        ledger_total,
    })
}

/// `{ρ_{x^n} ⪰ 2^{n(I[X;B] − δ)} ρ̄^{⊗n}}` under `s0`.
pub fn conditional_typical_projector(
    fam: &CQChannelFamily,
    p: &[f64],
    xn: &[usize],
    delta: f64,
    cap: usize,
) -> Result<Projector> {
    let n = xn.len();
    let e = fam.ensemble(fam.s0(), p)?;
    let info = holevo_information(&e)?;
    let avg_n = tensor_power(&e.average(), n, cap)?;
    let rx = fam.product_state(fam.s0(), xn, cap)?;
    positive_eigenspace_projector(rx.op(), &avg_n.op().scale((n as f64 * (info - delta)).exp2()))
}

#[derive(Clone, Debug)]
pub struct Povm {
    pub elements: Vec<HermitianOperator>,
    /// `I − Σ_m Λ_m`.
    pub remainder: HermitianOperator,
}

/// `Λ_m = T^{−1/2} Π_m T^{−1/2}`, `T = Σ_{m′} Π_{m′}`, pseudo-inverse on the support.
pub fn sqrt_measurement(projectors: &[Projector]) -> Result<Povm> {
    let d = projectors
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty measurement".into()))?
        .dim();
    let mut t = Matrix::zeros(d, d);
    for p in projectors {
        check_dims(d, p.dim())?;
        t += p.matrix();
    }
    let s = pinv_sqrt(&HermitianOperator::from_matrix_unchecked(t))?;
    let mut total = Matrix::zeros(d, d);
    let elements: Vec<HermitianOperator> = projectors
        .iter()
        .map(|p| {
            let e = HermitianOperator::from_matrix_unchecked(s.matrix() * p.matrix() * s.matrix());
            total += e.matrix();
            e
        })
        .collect();
    Ok(Povm {
        elements,
        remainder: HermitianOperator::from_matrix_unchecked(Matrix::identity(d, d) - total),
    })
}

pub fn build_sqrt_measurement(
    code: &Codebook,
    fam: &CQChannelFamily,
    p: &[f64],
    delta: f64,
    cap: usize,
) -> Result<Povm> {
    checked_power(fam.dim(), code.n, cap)?;
    let mut cache: BTreeMap<&[usize], Projector> = BTreeMap::new();
    let mut projectors = Vec::with_capacity(code.len());
    for w in &code.words {
        if !cache.contains_key(w.as_slice()) {
            cache.insert(w, conditional_typical_projector(fam, p, w, delta, cap)?);
        }
        projectors.push(cache[w.as_slice()].clone());
    }
    sqrt_measurement(&projectors)
}

#[derive(Clone, Debug)]
pub struct Decoder {
    pub auth: Projector,
    pub povm: Povm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Correct,
    WrongMessage,
    Abort,
}

/// One use of the two-step receiver on message `m` sent through channel `s`.
pub fn simulate_transmission(
    code: &Codebook,
    fam: &CQChannelFamily,
    s: &str,
    m: usize,
    decoder: &Decoder,
    seed: u64,
    cap: usize,
) -> Result<Outcome> {
    let word = code
        .words
        .get(m)
        .ok_or_else(|| Error::InvalidParameter(format!("message {m} out of range")))?;
    let rho = fam.product_state(s, word, cap)?;
    let mut rng = rng_from_seed(seed);
    let pass = rho.prob(&decoder.auth)?.clamp(0.0, 1.0);
    if rng.random::<f64>() >= pass {
        return Ok(Outcome::Abort);
    }
    if pass < UNDERFLOW_TOL {
        return Err(Error::NumericalUnderflow(format!(
            "authentication pass probability {pass:.3e} too small to renormalize"
        )));
    }
    let a = decoder.auth.matrix();
    let post = HermitianOperator::from_matrix_unchecked(a * rho.matrix() * a / C64::new(pass, 0.0));
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, e) in decoder.povm.elements.iter().enumerate() {
        acc += post.trace_with(e)?.max(0.0);
        if u < acc {
            return Ok(if j == m {
                Outcome::Correct
            } else {
                Outcome::WrongMessage
            });
        }
    }
    // Remainder outcome: no message decoded, counted as an error.
    Ok(Outcome::WrongMessage)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Typicality slack of the message projectors.
    pub delta: f64,
    /// Slack of the authentication projectors.
    pub delta_auth: f64,
    pub epsilon_target: f64,
    pub trials: usize,
    pub seed: u64,
    /// Recursion exponent when more than two labels are intersected.
    pub tau: f64,
    pub cap: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            delta_auth: 0.4,
            epsilon_target: 0.1,
            trials: 2000,
            seed: 0,
            tau: 0.5,
            cap: crate::operator::DEFAULT_DIM_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimRow {
    pub s: String,
    pub n: usize,
    #[serde(rename = "R")]
    pub rate: f64,
    pub trials: usize,
    pub correct: u64,
    pub wrong: u64,
    pub abort: u64,
    pub err: f64,
    pub err_lo: f64,
    pub err_hi: f64,
    pub abort_rate: f64,
    /// `Tr[Π^{¬⊥}(ρ^{(s)})^{⊗n}]`.
    pub auth_trace: f64,
    /// Upper target for `auth_trace` when `s ≠ s₀`; absent for `s₀`.
    pub auth_target: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    pub config: DecoderConfig,
    pub capacity: f64,
    pub input_distribution: Vec<f64>,
    pub rows: Vec<SimRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    s: &'a str,
    n: usize,
    #[serde(rename = "R")]
    rate: f64,
    trials: usize,
    err: f64,
    err_lo: f64,
    err_hi: f64,
    abort_rate: f64,
}

impl SimReport {
    pub fn row(&self, s: &str, n: usize) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.s == s && r.n == n)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(CsvRow {
                s: &r.s,
                n: r.n,
                rate: r.rate,
                trials: r.trials,
                err: r.err,
                err_lo: r.err_lo,
                err_hi: r.err_hi,
                abort_rate: r.abort_rate,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Monte-Carlo error rates over fresh codebooks for every `n` and label.
/// For `s₀` an error is a wrong message or an abort; for `s ≠ s₀` only a
/// wrong message that was not aborted counts.
pub fn estimate_error_rates(
    fam: &CQChannelFamily,
    config: &DecoderConfig,
    n_list: &[usize],
    rate: f64,
) -> Result<SimReport> {
    let (capacity, p) = authentication_capacity(fam, 101)?;
    let labels = fam.labels().to_vec();
    let mut rows = Vec::new();
    for &n in n_list {
        let auth = build_auth_projector(fam, &p, n, config.delta_auth, config.tau, config.cap)?;
        let per_trial: Vec<Vec<Outcome>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<Outcome>> {
                let base = [config.seed, n as u64, trial as u64];
                let code = generate_codebook(&p, n, rate, derive_seed(&[base[0], base[1], base[2], u64::MAX]))?;
                let povm = build_sqrt_measurement(&code, fam, &p, config.delta, config.cap)?;
                let decoder = Decoder {
                    auth: auth.projector.clone(),
                    povm,
                };
                let mut pick = rng_from_seed(derive_seed(&[base[0], base[1], base[2], u64::MAX - 1]));
                let m = pick.random_range(0..code.len());
                labels
                    .iter()
                    .enumerate()
                    .map(|(si, s)| {
                        let seed = derive_seed(&[base[0], base[1], base[2], si as u64]);
                        simulate_transmission(&code, fam, s, m, &decoder, seed, config.cap)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for (si, s) in labels.iter().enumerate() {
            let (mut correct, mut wrong, mut abort) = (0u64, 0u64, 0u64);
            for t in &per_trial {
                match t[si] {
                    Outcome::Correct => correct += 1,
                    Outcome::WrongMessage => wrong += 1,
                    Outcome::Abort => abort += 1,
                }
            }
            let is_s0 = s == fam.s0();
            let errors = if is_s0 { wrong + abort } else { wrong };
            let trials = config.trials as u64;
            let (err_lo, err_hi) = wilson_interval(errors, trials);
            let frac = |x: u64| if trials == 0 { 0.0 } else { x as f64 / trials as f64 };
            let (auth_trace, auth_target) = if is_s0 {
                (auth.acceptance, None)
            } else {
                let r = auth.rejection.iter().find(|r| &r.label == s).expect("label present");
                (r.trace, Some(r.target))
            };
            rows.push(SimRow {
                s: s.clone(),
                n,
                rate,
                trials: config.trials,
                correct,
                wrong,
                abort,
                err: frac(errors),
                err_lo,
                err_hi,
                abort_rate: frac(abort),
                auth_trace,
                auth_target,
            });
        }
    }
    Ok(SimReport {
        config: config.clone(),
        capacity,
        input_distribution: p,
        rows,
    })
}
