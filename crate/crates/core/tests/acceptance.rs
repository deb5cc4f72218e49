//! Acceptance criteria, one line each. Exits non-zero if any is red.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use qmeet_core::authchannel::{authentication_capacity, estimate_error_rates, CQChannelFamily, DecoderConfig};
use qmeet_core::hypotest::{composite_meet_test, composite_two_sided, composite_union_test};
use qmeet_core::jordan::{jordan_decompose, reconstruct};
use qmeet_core::meet::{meet_lower, meet_many, meet_upper, MeetSpec};
use qmeet_core::random::{derive_seed, random_projector, rng_from_seed, StdRng};
use qmeet_core::report::Tally;
use qmeet_core::suites::{self, Row, SuiteConfig};
use qmeet_core::{DensityOperator, Matrix, Projector, Vector, C64};
use rand::Rng;

const SEED: u64 = 20_240_917;

type Verdict = (bool, String);
type Case = Option<(Projector, Vec<bool>)>;
type Draw = fn(&mut StdRng) -> Case;
type Criterion = (u32, &'static str, fn() -> Verdict);

fn tally(rows: &[Row]) -> Tally {
    let mut t = Tally::default();
    for r in rows {
        t.add(&r.report);
    }
    t
}

fn describe(rows: &[Row], t: &Tally) -> String {
    let instances = rows.iter().map(|r| r.instance).max().map_or(0, |m| m + 1);
    let worst = rows
        .iter()
        .filter(|r| !r.report.vacuous)
        .map(|r| r.report.margin)
        .fold(f64::INFINITY, f64::min);
    format!(
        "{instances} instances, {} checks: {} pass, {} vacuous, {} fail, worst margin {worst:.3e}",
        t.total(),
        t.pass,
        t.vacuous,
        t.fail
    )
}

fn zero_failures(rows: &[Row], min_instances: usize) -> Verdict {
    let t = tally(rows);
    let instances = rows.iter().map(|r| r.instance).max().map_or(0, |m| m + 1);
    (t.fail == 0 && instances >= min_instances, describe(rows, &t))
}

fn cfg(trials: usize) -> SuiteConfig {
    SuiteConfig {
        seed: SEED,
        trials,
        ..Default::default()
    }
}

fn c1_meet_upper() -> Verdict {
    zero_failures(&suites::meet_suite(&cfg(200)).unwrap(), 200)
}

fn c2_meet_lower() -> Verdict {
    zero_failures(&suites::lower_suite(&cfg(200)).unwrap(), 200)
}

fn c3_claim1() -> Verdict {
    zero_failures(&suites::claim1_suite(&cfg(200)).unwrap(), 200)
}

// ---- classical oracles -------------------------------------------------

fn probs(rng: &mut StdRng, d: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// Mass `1 − t` spread over the first `h` entries, `t` over the rest.
fn heavy(rng: &mut StdRng, d: usize, h: usize, t: f64) -> Vec<f64> {
    let a = probs(rng, h);
    let b = probs(rng, d - h);
    a.iter().map(|x| x * (1.0 - t)).chain(b.iter().map(|x| x * t)).collect()
}

fn diag(p: &[f64]) -> DensityOperator {
    DensityOperator::from_diagonal(p).unwrap()
}

fn power(p: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        out = out.iter().flat_map(|a| p.iter().map(move |b| a * b)).collect();
    }
    out
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).log2())
        .sum()
}

fn miss(rho: &[f64], mask: &[bool]) -> f64 {
    rho.iter().zip(mask).filter(|(_, m)| !**m).map(|(r, _)| r).sum()
}

fn entry_gap(p: &Projector, mask: &[bool]) -> f64 {
    let expect = Projector::from_indicator(mask);
    (p.matrix() - expect.matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn and(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

fn or(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x || *y).collect()
}

/// Draws until `accept` yields a projector/mask pair; returns the gap.
fn oracle_case(tag: u64, i: usize, mut draw: impl FnMut(&mut StdRng) -> Case) -> f64 {
    let mut rng = rng_from_seed(derive_seed(&[SEED, tag, i as u64]));
    for _ in 0..100_000 {
        if let Some((p, mask)) = draw(&mut rng) {
            return entry_gap(&p, &mask);
        }
    }
    panic!("no admissible commuting instance for tag {tag}");
}

const PAIR_LIMIT: f64 = 1.0 / 64.0 - 1e-6;

fn upper_case(rng: &mut StdRng) -> Case {
    let d = rng.random_range(2..=10);
    let h = rng.random_range(1..d);
    let t = 10f64.powf(rng.random_range(-4.0..-2.0));
    let rho = heavy(rng, d, h, t);
    let sig: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let m = rng.random_range(0.8..0.99);
            heavy(rng, d, h, m)
        })
        .collect();
    let k: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..2.0)).collect();
    let masks: Vec<Vec<bool>> = (0..2)
        .map(|i| (0..d).map(|x| sig[i][x] <= (-k[i]).exp2() * rho[x]).collect())
        .collect();
    if masks.iter().any(|m| miss(&rho, m) >= PAIR_LIMIT) {
        return None;
    }
    let r = meet_upper(&diag(&rho), &[diag(&sig[0]), diag(&sig[1])], &MeetSpec::upper(k, 0.5)).ok()?;
    Some((r.pi_star, and(&masks[0], &masks[1])))
}

fn lower_case(rng: &mut StdRng) -> Case {
    let d = rng.random_range(2..=10);
    let rho = probs(rng, d);
    let sig: Vec<Vec<f64>> = (0..2).map(|_| probs(rng, d)).collect();
    let k: Vec<f64> = (0..2).map(|_| rng.random_range(2.0..8.0)).collect();
    let masks: Vec<Vec<bool>> = (0..2)
        .map(|i| (0..d).map(|x| sig[i][x] >= (-k[i]).exp2() * rho[x]).collect())
        .collect();
    if masks.iter().any(|m| miss(&rho, m) >= PAIR_LIMIT) {
        return None;
    }
    let r = meet_lower(&diag(&rho), &[diag(&sig[0]), diag(&sig[1])], &MeetSpec::lower(k, 0.5)).ok()?;
    Some((r.pi_star, and(&masks[0], &masks[1])))
}

fn many_case(rng: &mut StdRng) -> Case {
    let d = rng.random_range(2..=10);
    let h = rng.random_range(1..d);
    let count = rng.random_range(3..=6);
    let t = 10f64.powf(rng.random_range(-4.0..-2.0));
    let rho = heavy(rng, d, h, t);
    let sig: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let m = rng.random_range(0.8..0.99);
            heavy(rng, d, h, m)
        })
        .collect();
    let k: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..2.0)).collect();
    let masks: Vec<Vec<bool>> = (0..count)
        .map(|i| (0..d).map(|x| sig[i][x] <= (-k[i]).exp2() * rho[x]).collect())
        .collect();
    if masks.iter().any(|m| miss(&rho, m) >= PAIR_LIMIT) {
        return None;
    }
    let states: Vec<DensityOperator> = sig.iter().map(|s| diag(s)).collect();
    let r = meet_many(&diag(&rho), &states, &MeetSpec::upper(k, 0.5).with_tau(0.5)).ok()?;
    let all = masks.iter().skip(1).fold(masks[0].clone(), |acc, m| and(&acc, m));
    Some((r.pi_star, all))
}

/// `{σ^{⊗n} ⪯ 2^{−n(D(ρ‖σ) − slack)} ρ^{⊗n}}` as a mask.
fn typical_mask(rho: &[f64], sigma: &[f64], n: usize, slack: f64) -> Vec<bool> {
    let t = (-(n as f64) * (kl(rho, sigma) - slack)).exp2();
    power(sigma, n)
        .iter()
        .zip(power(rho, n))
        .map(|(s, r)| *s <= t * r)
        .collect()
}

const DELTA: f64 = 0.1;
const DELTA_PRIME: f64 = 0.2;

fn union_case(rng: &mut StdRng) -> Case {
    let d = rng.random_range(2..=3);
    let n = rng.random_range(2..=3);
    let count = rng.random_range(2..=3);
    let rhos: Vec<Vec<f64>> = (0..count).map(|_| probs(rng, d)).collect();
    let sigma = probs(rng, d);
    let mask = rhos
        .iter()
        .map(|r| typical_mask(r, &sigma, n, DELTA_PRIME))
        .reduce(|a, b| or(&a, &b))?;
    let states: Vec<DensityOperator> = rhos.iter().map(|r| diag(r)).collect();
    let r = composite_union_test(&states, &diag(&sigma), n, DELTA, DELTA_PRIME, 4096).ok()?;
    Some((r.pi_star, mask))
}

fn composite_meet_case(rng: &mut StdRng) -> Case {
    let d = rng.random_range(2..=3);
    let n = rng.random_range(2..=3);
    let count = rng.random_range(2..=3);
    let t = 10f64.powf(rng.random_range(-4.0..-2.5));
    let rho = heavy(rng, d, 1, t);
    let sigmas: Vec<Vec<f64>> = (0..count).map(|_| probs(rng, d)).collect();
    if sigmas.iter().any(|s| kl(&rho, s) <= DELTA) {
        return None;
    }
    let rn = power(&rho, n);
    let masks: Vec<Vec<bool>> = sigmas.iter().map(|s| typical_mask(&rho, s, n, DELTA)).collect();
    if masks.iter().any(|m| miss(&rn, m) >= PAIR_LIMIT) {
        return None;
    }
    let states: Vec<DensityOperator> = sigmas.iter().map(|s| diag(s)).collect();
    let r = composite_meet_test(&diag(&rho), &states, n, DELTA, 4096).ok()?;
    Some((r.pi_star, masks.into_iter().reduce(|a, b| and(&a, &b))?))
}

fn two_sided_case(rng: &mut StdRng) -> Case {
    let d = rng.random_range(2..=3);
    let n = rng.random_range(2..=3);
    let rhos: Vec<Vec<f64>> = (0..2).map(|_| probs(rng, d)).collect();
    let sigmas: Vec<Vec<f64>> = (0..2).map(|_| probs(rng, d)).collect();
    let mask = sigmas
        .iter()
        .map(|s| {
            rhos.iter()
                .map(|r| typical_mask(r, s, n, DELTA_PRIME))
                .reduce(|a, b| or(&a, &b))
                .unwrap()
        })
        .reduce(|a, b| and(&a, &b))?;
    let r_states: Vec<DensityOperator> = rhos.iter().map(|r| diag(r)).collect();
    let s_states: Vec<DensityOperator> = sigmas.iter().map(|s| diag(s)).collect();
    let r = composite_two_sided(&r_states, &s_states, n, DELTA, DELTA_PRIME, 4096).ok()?;
    Some((r.pi_star, mask))
}

fn c4_commuting() -> Verdict {
    let cases: [(&str, Draw); 6] = [
        ("upper", upper_case),
        ("lower", lower_case),
        ("many", many_case),
        ("union", union_case),
        ("meet", composite_meet_case),
        ("two-sided", two_sided_case),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (tag, (name, f)) in cases.iter().enumerate() {
        let worst = (0..50).map(|i| oracle_case(100 + tag as u64, i, f)).fold(0.0, f64::max);
        ok &= worst <= 1e-12;
        parts.push(format!("{name} {worst:.1e}"));
    }
    (
        ok,
        format!("50 diagonal instances each, max entry gap: {}", parts.join(", ")),
    )
}

// ---- Jordan integrity --------------------------------------------------

fn spectral_norm(m: &Matrix) -> f64 {
    m.singular_values().max()
}

fn c5_jordan() -> Verdict {
    let mut worst_recon: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = rng_from_seed(derive_seed(&[SEED, 5, i]));
        let d = rng.random_range(1..=32);
        let p1 = random_projector(d, rng.random_range(0..=d), &mut rng);
        let p2 = if i % 5 == 0 {
            // Shares part of its range with p1.
            let b = p1.range_basis().unwrap();
            let keep = b.ncols() / 2;
            let extra = random_projector(d, 1.min(d), &mut rng).range_basis().unwrap();
            let mut cols: Vec<Vector> = (0..keep).map(|j| b.column(j).into_owned()).collect();
            cols.push(extra.column(0).into_owned());
            let q = Matrix::from_columns(&cols).qr().q();
            Projector::from_orthonormal_columns(&q, d)
        } else {
            random_projector(d, rng.random_range(0..=d), &mut rng)
        };
        let dec = jordan_decompose(&p1, &p2).unwrap();

        let (r1, r2) = reconstruct(&dec);
        worst_recon = worst_recon
            .max(spectral_norm(&(r1.matrix() - p1.matrix())))
            .max(spectral_norm(&(r2.matrix() - p2.matrix())));

        let basis: Vec<Vector> = dec.blocks.iter().flat_map(|b| b.basis()).collect();
        if !basis.is_empty() {
            let b = Matrix::from_columns(&basis);
            let gram = b.adjoint() * &b - Matrix::identity(basis.len(), basis.len());
            worst_orth = worst_orth.max(gram.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }

        let sandwich = p1.matrix() * p2.matrix() * p1.matrix();
        let mut actual: Vec<f64> = sandwich.symmetric_eigenvalues().iter().copied().collect();
        let mut expect: Vec<f64> = dec.first_blocks().map(|(_, b)| b.overlap).collect();
        expect.resize(d, 0.0);
        actual.sort_by(|a, b| b.total_cmp(a));
        expect.sort_by(|a, b| b.total_cmp(a));
        let gap = actual
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_eig = worst_eig.max(gap);
    }
    let ok = worst_recon <= 1e-8 && worst_orth <= 1e-8 && worst_eig <= 1e-8;
    (
        ok,
        format!(
            "100 pairs, reconstruction {worst_recon:.1e}, orthogonality {worst_orth:.1e}, Π₁Π₂Π₁ spectrum {worst_eig:.1e}"
        ),
    )
}

fn c6_facts() -> Verdict {
    let rows = suites::facts_suite(&cfg(500)).unwrap();
    let (ok, text) = zero_failures(&rows, 500);
    let margin_ok = rows.iter().all(|r| r.report.margin >= -1e-6);
    (ok && margin_ok, format!("{text} (4 validators)"))
}

fn c7_stein() -> Verdict {
    let rows = suites::stein_suite(&SuiteConfig {
        n_list: (1..=8).collect(),
        eps: 0.002,
        ..cfg(0)
    })
    .unwrap();
    let t = tally(&rows);
    let trend = rows.iter().find(|r| r.report.name == "stein.trend").unwrap();
    let converse = rows.iter().filter(|r| r.report.name == "stein.converse").count();
    (
        t.fail == 0 && converse == 16,
        format!(
            "{converse} converse checks ({} pass, {} vacuous, {} fail); trend {}",
            t.pass - 1,
            t.vacuous,
            t.fail,
            trend.report.instance_digest
        ),
    )
}

fn c8_composite() -> Verdict {
    let rows = suites::composite_suite(&SuiteConfig {
        n_list: vec![6],
        delta: 0.04,
        eps: 0.01,
        ..cfg(60)
    })
    .unwrap();
    let t = tally(&rows);
    let frac = t.vacuous_fraction();
    (
        t.fail == 0 && frac < 0.3,
        format!("{}; vacuous fraction {:.1}%", describe(&rows, &t), 100.0 * frac),
    )
}

fn c9_authsim() -> Verdict {
    let fam = suites::auth_demo_family();
    let (cap, _) = authentication_capacity(&fam, 101).unwrap();
    let config = DecoderConfig {
        trials: 2000,
        seed: 11,
        ..Default::default()
    };
    let run = || {
        let r = estimate_error_rates(&fam, &config, &[2, 4, 6], 0.5 * cap).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        (r, buf)
    };
    let (report, first) = run();
    let (_, second) = run();
    let identical = first == second;

    let r2 = report.row("s0", 2).unwrap();
    let r6 = report.row("s0", 6).unwrap();
    let trend = r6.err_lo <= r2.err_hi;
    let mut auth_ok = true;
    let mut worst: f64 = f64::INFINITY;
    for row in report.rows.iter().filter(|r| r.s != "s0") {
        let target = row.auth_target.unwrap();
        auth_ok &= row.auth_trace <= target + 1e-10;
        worst = worst.min(target - row.auth_trace);
    }
    (
        trend && auth_ok && identical,
        format!(
            "R = {:.4}; s0 error n=2 {:.4} [{:.4},{:.4}], n=6 {:.4} [{:.4},{:.4}]; false-auth min margin {worst:.3e}; rerun identical: {identical}",
            0.5 * cap,
            r2.err,
            r2.err_lo,
            r2.err_hi,
            r6.err,
            r6.err_lo,
            r6.err_hi
        ),
    )
}

// ---- capacity ----------------------------------------------------------

fn h(values: &[f64]) -> f64 {
    values.iter().filter(|x| **x > 1e-15).map(|x| -x * x.log2()).sum()
}

/// Entropy of a 2×2 density matrix from its closed-form eigenvalues.
fn qubit_entropy(m: &Matrix) -> f64 {
    let (a, d, b) = (m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)].norm());
    let disc = ((a - d).powi(2) + 4.0 * b * b).sqrt();
    h(&[(a + d + disc) / 2.0, (a + d - disc) / 2.0])
}

fn holevo_oracle(states: &[DensityOperator]) -> f64 {
    (0..=10_000)
        .map(|i| {
            let p = i as f64 / 10_000.0;
            let avg = states[0].matrix() * C64::new(p, 0.0) + states[1].matrix() * C64::new(1.0 - p, 0.0);
            qubit_entropy(&avg) - p * qubit_entropy(states[0].matrix()) - (1.0 - p) * qubit_entropy(states[1].matrix())
        })
        .fold(0.0, f64::max)
}

fn single(states: Vec<DensityOperator>) -> CQChannelFamily {
    CQChannelFamily::new(vec!["a".into()], "a", [("a".to_string(), states)].into_iter().collect()).unwrap()
}

fn ket(a: f64, b: f64) -> DensityOperator {
    DensityOperator::pure(&Vector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)])).unwrap()
}

fn c10_capacity() -> Verdict {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let orth = vec![ket(1.0, 0.0), ket(0.0, 1.0)];
    let same = vec![diag(&[0.6, 0.4]), diag(&[0.6, 0.4])];
    let plus = vec![ket(1.0, 0.0), ket(s, s)];
    let c_orth = authentication_capacity(&single(orth), 101).unwrap().0;
    let c_same = authentication_capacity(&single(same), 101).unwrap().0;
    let c_plus = authentication_capacity(&single(plus.clone()), 101).unwrap().0;
    let oracle = holevo_oracle(&plus);
    let ok = (c_orth - 1.0).abs() <= 1e-6
        && c_same.abs() <= 1e-12
        && (c_plus - 0.6009).abs() <= 5e-4
        && (c_plus - oracle).abs() <= 5e-4;
    (
        ok,
        format!("orthogonal {c_orth:.9}, identical {c_same:.2e}, {{|0⟩,|+⟩}} {c_plus:.6} (grid oracle {oracle:.6})"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "upper two-state intersection bounds", c1_meet_upper),
        (2, "lower two-state intersection bounds", c2_meet_lower),
        (3, "overlap expectation and Good-set mass", c3_claim1),
        (4, "commuting inputs match classical set oracles", c4_commuting),
        (5, "Jordan decomposition integrity", c5_jordan),
        (6, "operator-inequality validators", c6_facts),
        (7, "Stein converse and rate trend", c7_stein),
        (8, "composite hypothesis constructions", c8_composite),
        (9, "authenticated channel simulation", c9_authsim),
        (10, "authentication capacity unit values", c10_capacity),
    ];
    let mut red = 0;
    for (id, title, f) in criteria {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            red += 1;
        }
        println!(
            "criterion {id:>2} {} {title}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria pass", 10 - red);
    if red > 0 {
        std::process::exit(1);
    }
}
