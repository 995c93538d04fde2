mod common;

use cldmap::ddmap::{q_tilde, DefectTable, DirectionalDefectMap};
use cldmap::dmap::{first_positive_step, tau_prime_g, tau_prime_max_point, SuccessProfile, SuccessTable};
use cldmap::optimize::{optimize_tau, quality_indexes, tau_grid};
use cldmap::{cld::coherence_length, stats, CldAnalysis, LocalCld, SyntheticSpec};
use common::*;

#[test]
fn checkerboard_ray_walks_match_naive() {
    let img = checkerboard(8, 1);
    let s = stats(&img).unwrap();
    assert_eq!(naive_length(&img, 0, 0, 0, 0.1), Some(2));
    assert_eq!(naive_length(&img, 7, 0, 0, 0.1), None);
    assert_eq!(coherence_length(&img, &s, 0, 0, 0, 0.1).unwrap(), Some(2));
    assert_eq!(coherence_length(&img, &s, 7, 0, 0, 0.1).unwrap(), None);
}

#[test]
fn checkerboard_local_cld_matches_naive() {
    let img = checkerboard(8, 1);
    let s = stats(&img).unwrap();
    let local = LocalCld::compute(&img, &s, 0.1).unwrap();
    assert_eq!(local.to_raw(), naive_local(&img, 0.1));
}

#[test]
fn collapse_at_tau_max() {
    let img = random_image(12, 9, 5);
    let s = stats(&img).unwrap();
    let local = LocalCld::compute(&img, &s, s.tau_max).unwrap();
    assert!(local.to_raw().iter().all(|&l| l == 1));
}

#[test]
fn tau_prime_max_point_matches_naive() {
    let img = checkerboard(8, 1);
    let s = stats(&img).unwrap();
    let a = CldAnalysis::compute(&img, &s, 0.1).unwrap();
    let means = direction_means(&a.local);
    for y in 0..8 {
        for x in 0..8 {
            let idx = y * 8 + x;
            let ratios = pixel_ratios(&a.local, &means, idx);
            let expected = ratios.iter().copied().reduce(f64::max);
            assert_eq!(tau_prime_max_point(&a.local, &a.overall, x, y), expected);
        }
    }
}

#[test]
fn q_tilde_matches_naive() {
    let img = checkerboard(8, 1);
    let s = stats(&img).unwrap();
    let a = CldAnalysis::compute(&img, &s, 0.1).unwrap();
    let means = direction_means(&a.local);
    for y in 0..8 {
        for x in 0..8 {
            let got = q_tilde(&a.local, &a.overall, x, y);
            let want = naive_q(&a.local, &means, y * 8 + x);
            match (got, want) {
                (Some(g), Some(w)) => assert!((g - w).abs() <= 1e-12 * w.max(1.0)),
                (g, w) => assert_eq!(g, w),
            }
        }
    }
}

#[test]
fn bisection_step_equals_order_statistic() {
    for seed in 0..5 {
        let img = random_image(16, 16, 100 + seed);
        let s = stats(&img).unwrap();
        let a = CldAnalysis::compute(&img, &s, 0.3 * s.tau_max).unwrap();
        let means = direction_means(&a.local);
        for y in 0..16 {
            for x in 0..16 {
                let oracle = order_statistic_step(&pixel_ratios(&a.local, &means, y * 16 + x));
                let got = tau_prime_g(&a.local, &a.overall, x, y);
                match (got, oracle) {
                    (Some(g), Some(o)) => assert!((g - o).abs() <= 1e-9, "{g} vs {o}"),
                    (g, o) => assert_eq!(g, o),
                }
            }
        }
    }
}

#[test]
fn distinct_ratios_give_seventeenth() {
    let ratios: Vec<f64> = (0..32).map(|i| ((i * 7) % 32) as f64 * 0.013 + 0.001).collect();
    assert_eq!(first_positive_step(&ratios), order_statistic_step(&ratios));
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(first_positive_step(&ratios), Some(sorted[16]));
}

#[test]
fn chi_jumps_by_multiplicity() {
    let img = random_image(16, 16, 77);
    let s = stats(&img).unwrap();
    let a = CldAnalysis::compute(&img, &s, 0.4 * s.tau_max).unwrap();
    let p = SuccessProfile::compute(&a.local, &a.overall);
    let mut steps: Vec<f64> = p.tau_prime_g.iter().flatten().copied().collect();
    steps.sort_by(f64::total_cmp);
    let hw = 256.0;
    let mut seen = 0usize;
    let mut i = 0;
    while i < steps.len() {
        let v = steps[i];
        let mult = steps[i..].iter().take_while(|&&x| x == v).count();
        let before = if v > 0.0 { p.chi(v - 1e-12) } else { 0.0 };
        assert_eq!(before, seen as f64 / hw);
        seen += mult;
        assert_eq!(p.chi(v), seen as f64 / hw);
        i += mult;
    }
}

#[test]
fn success_table_rows_are_minimal() {
    let img = random_image(16, 16, 21);
    let s = stats(&img).unwrap();
    let a = CldAnalysis::compute(&img, &s, 0.35 * s.tau_max).unwrap();
    let p = SuccessProfile::compute(&a.local, &a.overall);
    let t = SuccessTable::build(&p, 10).unwrap();
    for (j, e) in t.entries.iter().enumerate() {
        let Some(tp) = e.tau_prime else { continue };
        // count * k >= j * hw  <=>  chi >= j / k
        assert!(p.chi_count(tp) * 10 >= j * 256);
        if j > 0 {
            assert!(p.chi_count(tp - 1e-12) * 10 < j * 256);
        }
    }
}

#[test]
fn alpha_matches_count_oracle() {
    let img = random_image(16, 16, 9);
    let s = stats(&img).unwrap();
    let a = CldAnalysis::compute(&img, &s, 0.3 * s.tau_max).unwrap();
    let dd = DirectionalDefectMap::compute(&a.local, &a.overall);
    let t = dd.t_doubleprime().unwrap();
    for j in 1..=100 {
        let tau = t * j as f64 / 101.0;
        assert_eq!(dd.alpha_count(tau), count_defective(&dd.q, tau));
    }
}

#[test]
fn two_level_defect_table() {
    // A quarter of the pixels carry a high mismatch.
    let q: Vec<Option<f64>> = (0..64)
        .map(|i| Some(if i % 4 == 1 { 2.0 + (i % 3) as f64 * 0.5 } else { 0.2 }))
        .collect();
    let dd = DirectionalDefectMap::from_values(8, 8, q.clone());
    let t = DefectTable::build(&dd, 4).unwrap();
    // Sorted excess ratios give every plateau of the defect fraction.
    let mean = q.iter().flatten().sum::<f64>() / 64.0;
    let mut excess: Vec<f64> = q.iter().flatten().map(|v| (v - mean) / mean).filter(|&e| e >= 0.0).collect();
    excess.push(0.0);
    excess.sort_by(f64::total_cmp);
    excess.dedup();
    for e in &t.entries[1..t.entries.len() - 1] {
        assert!(e.reachable);
        assert!(count_defective(&q, e.tau) as f64 / 64.0 >= e.alpha);
        let next = excess.iter().copied().find(|&s| s > e.tau).unwrap();
        assert!((count_defective(&q, next) as f64 / 64.0) < e.alpha);
    }
}

/// Dense evaluation of the product, shifted by the given minima.
fn dense_argmax(img: &cldmap::GrayImage, om0: f64, sup0: f64) -> f64 {
    let s = stats(img).unwrap();
    let dense = tau_grid(s.tau_max, 1024);
    let vals: Vec<(f64, f64)> = dense.iter().map(|&t| quality_indexes(img, &s, t).unwrap()).collect();
    let mut best = (0.0, f64::NEG_INFINITY);
    for (&t, &(om, sup)) in dense.iter().zip(&vals) {
        let pi = (sup - sup0) * (om - om0);
        if pi > best.1 {
            best = (t, pi);
        }
    }
    best.0
}

#[test]
fn optimizer_matches_dense_grid() {
    let fixtures = [
        checkerboard(64, 1),
        SyntheticSpec::SmoothNoise { width: 64, height: 64, radius: 2, seed: 4 }.generate().unwrap(),
    ];
    for img in &fixtures {
        let s = stats(img).unwrap();
        let res = optimize_tau(img, &s, 64).unwrap();
        // Same minima as the coarse curve: the search is under test, not the
        // grid approximation of the minima.
        let dense = dense_argmax(img, res.curve.omega_min, res.curve.support_min);
        assert!(
            (res.tau0 - dense).abs() <= s.tau_max / 64.0,
            "tau0 {} vs dense argmax {dense}",
            res.tau0
        );
        assert!(res.tau0 > 0.0 && res.tau0 < s.tau_max);
        assert!(res.curve.points.iter().all(|p| p.quality <= res.pi_at_tau0));
    }
}

#[test]
fn composite_optimum_is_interior_and_beats_grid() {
    let img = SyntheticSpec::TwoTextureComposite { width: 64, height: 64, left_cell: 2, right_cell: 8 }
        .generate()
        .unwrap();
    let s = stats(&img).unwrap();
    let res = optimize_tau(&img, &s, 64).unwrap();
    assert!(res.tau0 > 0.0 && res.tau0 < s.tau_max);
    assert!(res.curve.points.iter().all(|p| p.quality <= res.pi_at_tau0));
}
