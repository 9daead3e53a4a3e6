use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scurank_core::metrics::{
    average_ranks, kendall_tau, kendall_tau_b, krippendorff_alpha, pearson_r, rouge_n,
    spearman_rho, spearman_rho_values, AlphaLevel, Ranking,
};

fn sign(v: i64) -> i64 {
    v.signum()
}

/// Kendall τ-b from sign products and tie-group sizes.
fn tau_oracle(x: &[i64], y: &[i64]) -> Option<f64> {
    let n = x.len() as i64;
    let mut s = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
        }
    }
    let ties = |v: &[i64]| -> i64 {
        let mut sorted = v.to_vec();
        sorted.sort_unstable();
        sorted
            .chunk_by(|a, b| a == b)
            .map(|g| (g.len() * (g.len() - 1) / 2) as i64)
            .sum()
    };
    let n0 = n * (n - 1) / 2;
    let (a, b) = (n0 - ties(x), n0 - ties(y));
    if a == 0 || b == 0 {
        return None;
    }
    Some(s as f64 / (a as f64 * b as f64).sqrt())
}

/// Spearman ρ of two tie-free permutations via the squared-difference form,
/// as one rounding of an exact ratio.
fn rho_oracle_permutation(x: &[i64], y: &[i64]) -> f64 {
    let n = x.len() as i64;
    let d2: i64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let m = n * (n * n - 1);
    (m - 6 * d2) as f64 / m as f64
}

/// Pearson r from raw sums.
fn r_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx.abs() < 1e-9 || vy.abs() < 1e-9 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx * vy).sqrt())
}

/// Mid-ranks by counting smaller and equal values.
fn mid_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<i64> {
    let mut p: Vec<i64> = (1..=n as i64).collect();
    p.shuffle(rng);
    p
}

/// Competition ranks of random scores drawn from a small range, so ties occur.
fn random_tied_ranks(rng: &mut ChaCha8Rng, n: usize) -> Vec<i64> {
    let scores: Vec<i64> = (0..n).map(|_| rng.gen_range(0..4)).collect();
    scores
        .iter()
        .map(|s| 1 + scores.iter().filter(|t| *t > s).count() as i64)
        .collect()
}

fn floats(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&a| a as f64).collect()
}

#[test]
fn tau_rho_r_match_oracles_on_random_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..1000 {
        let n = rng.gen_range(2..=8);
        let x = random_permutation(&mut rng, n);
        let y = random_permutation(&mut rng, n);
        let (fx, fy) = (floats(&x), floats(&y));
        assert_eq!(
            kendall_tau_b(&fx, &fy).unwrap(),
            tau_oracle(&x, &y).unwrap(),
            "tau, trial {trial}"
        );
        let rho = rho_oracle_permutation(&x, &y);
        assert_eq!(spearman_rho_values(&fx, &fy).unwrap(), rho, "rho, trial {trial}");
        assert_eq!(pearson_r(&fx, &fy).unwrap(), rho, "r, trial {trial}");
    }
}

#[test]
fn tau_rho_r_match_oracles_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut defined = 0;
    for trial in 0..1000 {
        let n = rng.gen_range(2..=8);
        let x = random_tied_ranks(&mut rng, n);
        let y = random_tied_ranks(&mut rng, n);
        let (fx, fy) = (floats(&x), floats(&y));
        match tau_oracle(&x, &y) {
            Some(t) => {
                defined += 1;
                assert_eq!(kendall_tau_b(&fx, &fy).unwrap(), t, "tau, trial {trial}");
            }
            None => assert!(kendall_tau_b(&fx, &fy).is_err()),
        }
        match r_oracle(&fx, &fy) {
            Some(r) => assert!((pearson_r(&fx, &fy).unwrap() - r).abs() < 1e-12, "r, trial {trial}"),
            None => assert!(pearson_r(&fx, &fy).is_err()),
        }
        assert_eq!(average_ranks(&fx), mid_ranks(&fx));
        if let Some(rho) = r_oracle(&mid_ranks(&fx), &mid_ranks(&fy)) {
            let got = spearman_rho_values(&fx, &fy).unwrap();
            assert!((got - rho).abs() < 1e-12, "rho, trial {trial}");
        }
    }
    assert!(defined > 500, "too few defined cases: {defined}");
}

#[test]
fn hand_derived_tau_example() {
    // One swapped pair out of six: (5 - 1) / 6.
    let a = Ranking::from_order(&["a", "b", "c", "d"]);
    let b = Ranking::from_order(&["a", "b", "d", "c"]);
    let tau = kendall_tau(&a, &b).unwrap();
    assert_eq!(tau, 4.0 / 6.0);
    assert_eq!(format!("{tau:.4}"), "0.6667");
    assert_eq!(spearman_rho(&a, &b).unwrap(), 0.8);
}

/// Krippendorff's alpha from pairwise disagreements over pairable values.
fn alpha_oracle(matrix: &[Vec<Option<f64>>], level: AlphaLevel) -> f64 {
    let units: Vec<Vec<f64>> = (0..matrix[0].len())
        .map(|i| matrix.iter().filter_map(|r| r[i]).collect::<Vec<_>>())
        .filter(|u| u.len() >= 2)
        .collect();
    let pooled: Vec<f64> = units.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let count = |v: f64| pooled.iter().filter(|&&p| p == v).count() as f64;
    let delta2 = |a: f64, b: f64| match level {
        AlphaLevel::Interval => (a - b).powi(2),
        AlphaLevel::Ordinal => {
            let (lo, hi) = (a.min(b), a.max(b));
            let between = pooled.iter().filter(|&&p| p >= lo && p <= hi).count() as f64;
            (between - (count(lo) + count(hi)) / 2.0).powi(2)
        }
    };
    let mut observed = 0.0;
    for u in &units {
        let mut s = 0.0;
        for (i, &a) in u.iter().enumerate() {
            for (j, &b) in u.iter().enumerate() {
                if i != j {
                    s += delta2(a, b);
                }
            }
        }
        observed += s / (u.len() - 1) as f64;
    }
    let mut expected = 0.0;
    for (i, &a) in pooled.iter().enumerate() {
        for (j, &b) in pooled.iter().enumerate() {
            if i != j {
                expected += delta2(a, b);
            }
        }
    }
    1.0 - (n - 1.0) * observed / expected
}

#[test]
fn alpha_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for _ in 0..300 {
        let raters = rng.gen_range(2..=5);
        let items = rng.gen_range(2..=9);
        let matrix: Vec<Vec<Option<f64>>> = (0..raters)
            .map(|_| {
                (0..items)
                    .map(|_| rng.gen_bool(0.85).then(|| rng.gen_range(1..=5) as f64))
                    .collect()
            })
            .collect();
        for level in [AlphaLevel::Ordinal, AlphaLevel::Interval] {
            match krippendorff_alpha(&matrix, level) {
                Ok(a) => {
                    let want = alpha_oracle(&matrix, level);
                    assert!((a - want).abs() < 1e-12, "{level:?}: {a} vs {want}");
                    assert!(a <= 1.0 + 1e-12);
                    checked += 1;
                }
                Err(_) => {
                    let o = alpha_oracle(&matrix, level);
                    assert!(!o.is_finite(), "library undefined but oracle gave {o}");
                }
            }
        }
    }
    assert!(checked > 400);
}

#[test]
fn alpha_is_one_for_identical_raters() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let n = rng.gen_range(2..=9);
        let row: Vec<Option<f64>> = floats(&random_permutation(&mut rng, n))
            .into_iter()
            .map(Some)
            .collect();
        let raters = rng.gen_range(2..=5);
        let matrix = vec![row; raters];
        for level in [AlphaLevel::Ordinal, AlphaLevel::Interval] {
            assert_eq!(krippendorff_alpha(&matrix, level).unwrap(), 1.0);
        }
    }
}

proptest! {
    #[test]
    fn correlations_are_bounded_and_symmetric(
        x in prop::collection::vec(0i64..6, 2..10),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<i64> = x.iter().map(|_| rng.gen_range(0..6)).collect();
        let (fx, fy) = (floats(&x), floats(&y));
        for (f, name) in [
            (kendall_tau_b as fn(&[f64], &[f64]) -> _, "tau"),
            (spearman_rho_values, "rho"),
            (pearson_r, "r"),
        ] {
            match (f(&fx, &fy), f(&fy, &fx)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((-1.0..=1.0).contains(&a), "{} = {}", name, a);
                    prop_assert_eq!(a, b);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "{} defined in one direction only", name),
            }
        }
    }

    #[test]
    fn rouge_scores_are_bounded_and_self_match(
        a in "[a-d]{1,3}( [a-d]{1,3}){0,8}",
        b in "[a-d]{1,3}( [a-d]{1,3}){0,8}",
    ) {
        for n in 1..=2 {
            let s = rouge_n(&a, &b, n);
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        prop_assert_eq!(rouge_n(&a, &a, 1).f1, 1.0);
    }

    #[test]
    fn adding_a_matching_token_never_lowers_recall(
        a in "[a-d]( [a-d]){0,8}",
        b in "[a-d]( [a-d]){0,8}",
        pick in any::<prop::sample::Index>(),
    ) {
        let refs: Vec<&str> = b.split(' ').collect();
        let extra = refs[pick.index(refs.len())];
        let before = rouge_n(&a, &b, 1).recall;
        let after = rouge_n(&format!("{a} {extra}"), &b, 1).recall;
        prop_assert!(after >= before);
    }
}
