use proptest::prelude::*;

use qmeet_core::jordan::{jordan_decompose, reconstruct};
use qmeet_core::operator::{
    positive_eigenspace_projector, relative_entropy, strictly_positive_eigenspace_projector, trace_distance, Matrix,
};
use qmeet_core::random::{random_density, random_hermitian, random_projector, random_unitary, rng_from_seed};
use qmeet_core::report::wilson_interval;

fn gap(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strict_and_weak_projectors_split_identity(seed in any::<u64>(), d in 1usize..12) {
        let mut rng = rng_from_seed(seed);
        let a = random_hermitian(d, &mut rng);
        let b = random_hermitian(d, &mut rng);
        let strict = strictly_positive_eigenspace_projector(&a, &b).unwrap();
        let weak = positive_eigenspace_projector(&b, &a).unwrap();
        let sum = strict.matrix() + weak.matrix();
        prop_assert!(gap(&sum, &Matrix::identity(d, d)) < 1e-9);
    }

    #[test]
    fn relative_entropy_is_additive(seed in any::<u64>(), d in 2usize..5) {
        let mut rng = rng_from_seed(seed);
        let r1 = random_density(d, d, &mut rng);
        let s1 = random_density(d, d, &mut rng);
        let r2 = random_density(d, d, &mut rng);
        let s2 = random_density(d, d, &mut rng);
        let joint = relative_entropy(&r1.kron(&r2), &s1.kron(&s2)).unwrap();
        let sum = relative_entropy(&r1, &s1).unwrap() + relative_entropy(&r2, &s2).unwrap();
        prop_assert!((joint - sum).abs() < 1e-7 * sum.abs().max(1.0), "{joint} vs {sum}");
    }

    #[test]
    fn relative_entropy_is_unitarily_invariant(seed in any::<u64>(), d in 2usize..8) {
        let mut rng = rng_from_seed(seed);
        let rho = random_density(d, d, &mut rng);
        let sigma = random_density(d, d, &mut rng);
        let u = random_unitary(d, &mut rng);
        let before = relative_entropy(&rho, &sigma).unwrap();
        let after = relative_entropy(&rho.conjugate_by(&u).unwrap(), &sigma.conjugate_by(&u).unwrap()).unwrap();
        prop_assert!(before >= -1e-12);
        prop_assert!((before - after).abs() < 1e-7 * before.max(1.0));
    }

    #[test]
    fn trace_distance_is_bounded(seed in any::<u64>(), d in 1usize..10) {
        let mut rng = rng_from_seed(seed);
        let rho = random_density(d, d, &mut rng);
        let sigma = random_density(d, 1, &mut rng);
        let t = trace_distance(&rho, &sigma).unwrap();
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&t));
        prop_assert!(trace_distance(&rho, &rho).unwrap() < 1e-9);
    }

    #[test]
    fn jordan_blocks_rebuild_both_projectors(seed in any::<u64>(), d in 1usize..16, r1 in 0usize..16, r2 in 0usize..16) {
        let mut rng = rng_from_seed(seed);
        let p1 = random_projector(d, r1 % (d + 1), &mut rng);
        let p2 = random_projector(d, r2 % (d + 1), &mut rng);
        let dec = jordan_decompose(&p1, &p2).unwrap();
        let (q1, q2) = reconstruct(&dec);
        prop_assert!(gap(q1.matrix(), p1.matrix()) < 1e-8);
        prop_assert!(gap(q2.matrix(), p2.matrix()) < 1e-8);
        let dims: usize = dec.blocks.iter().map(|b| b.dim()).sum();
        prop_assert!(dims <= d);
        for (_, b) in dec.first_blocks() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&b.overlap));
        }
    }

    #[test]
    fn wilson_interval_brackets_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = ((trials as f64) * frac).round() as u64;
        let (lo, hi) = wilson_interval(k, trials);
        let p = k as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}
