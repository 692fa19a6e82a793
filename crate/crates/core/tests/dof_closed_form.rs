use phycache::analysis::dof::{
    dof_region_membership, grid_alpha_oracle, max_d_at_alpha, max_sum_dof, Branch, RegionParams,
};
use phycache::traffic::zipf_popularity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn random_params(rng: &mut ChaCha8Rng) -> RegionParams {
    let n = rng.random_range(2..=7);
    let k = rng.random_range(2..=40);
    let cache_size = rng.random_range(0..=k);
    let skew = rng.random_range(0.0..2.0);
    let popularity = zipf_popularity(k, skew).unwrap();
    let d_b = rng.random_range(0.05..=1.0);
    let tail: f64 = popularity[cache_size..].iter().sum();
    let r_a = n as f64 * tail;
    let scale = if r_a > 0.0 { r_a } else { 1.0 };
    let backhaul = scale * 10f64.powf(rng.random_range(-3.0..1.0));
    RegionParams {
        n,
        cache_size,
        popularity,
        backhaul,
        read_rate: 2.0 * n as f64,
        d_a: 1.0,
        d_b,
    }
}

#[test]
fn closed_form_matches_grid_search() {
    let draws: Vec<RegionParams> = {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        (0..200).map(|_| random_params(&mut rng)).collect()
    };
    let worst = draws
        .par_iter()
        .map(|p| {
            let closed = max_sum_dof(p).unwrap().d_star;
            let (oracle, _) = grid_alpha_oracle(p, 1e-4).unwrap();
            ((closed - oracle).abs(), p.clone(), closed, oracle)
        })
        .reduce_with(|a, b| if a.0 >= b.0 { a } else { b })
        .unwrap();
    assert!(
        worst.0 < 1e-3,
        "closed {} oracle {} params {:?}",
        worst.2,
        worst.3,
        worst.1
    );
}

#[test]
fn continuous_at_branch_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mut p = random_params(&mut rng);
        if p.cache_size == p.popularity.len() {
            continue;
        }
        for boundary in [p.r_a_star(), p.r_b_star()] {
            let eps = 1e-12 * boundary.max(1e-12);
            p.backhaul = boundary - eps;
            let below = max_sum_dof(&p).unwrap().d_star;
            p.backhaul = boundary + eps;
            let above = max_sum_dof(&p).unwrap().d_star;
            assert!((below - above).abs() < 1e-6, "{below} vs {above} at {boundary}");
        }
    }
}

#[test]
fn branches_follow_backhaul_thresholds() {
    let mut p = RegionParams {
        n: 3,
        cache_size: 5,
        popularity: zipf_popularity(20, 0.8).unwrap(),
        backhaul: 0.0,
        read_rate: 10.0,
        d_a: 1.0,
        d_b: 2.0 / 3.0,
    };
    let tau = p.tail();
    p.backhaul = p.r_a_star() * 1.01;
    assert_eq!(max_sum_dof(&p).unwrap().branch, Branch::Comp);
    assert_eq!(max_sum_dof(&p).unwrap().d_star, 1.0);
    p.backhaul = p.r_b_star() * 0.5;
    let s = max_sum_dof(&p).unwrap();
    assert_eq!(s.branch, Branch::Coordinated);
    assert!((s.d_star - p.backhaul / tau).abs() < 1e-12);
    p.backhaul = 0.5 * (p.r_a_star() + p.r_b_star());
    let s = max_sum_dof(&p).unwrap();
    assert_eq!(s.branch, Branch::Mixed);
    assert!(s.d_star > p.d_b && s.d_star < p.d_a);
    assert!((s.n_times_d - 3.0 * s.d_star).abs() < 1e-15);
    assert!((s.k_times_d - 20.0 * s.d_star).abs() < 1e-12);
}

#[test]
fn pure_comp_feasible_exactly_above_threshold() {
    let mut p = RegionParams {
        n: 2,
        cache_size: 1,
        popularity: zipf_popularity(6, 1.0).unwrap(),
        backhaul: 0.0,
        read_rate: 4.0,
        d_a: 1.0,
        d_b: 0.5,
    };
    p.backhaul = p.r_a_star() * 1.001;
    assert!((max_d_at_alpha(&p, 0.0) - 1.0).abs() < 1e-9);
    p.backhaul = p.r_a_star() * 0.999;
    assert!(max_d_at_alpha(&p, 0.0) < 1.0 - 1e-6);
}

#[test]
fn symmetric_tuples_bracket_the_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let d_star = max_sum_dof(&p).unwrap().d_star;
        let tuple = |d: f64| vec![p.popularity.iter().map(|r| r * d).collect::<Vec<f64>>(); p.n];
        assert!(dof_region_membership(&tuple(d_star * (1.0 - 1e-3)), &p).unwrap());
        if d_star < p.d_a {
            assert!(!dof_region_membership(&tuple(d_star * (1.0 + 1e-3) + 1e-9), &p).unwrap());
        }
    }
}

#[test]
fn region_grows_with_backhaul_and_cache() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let d: Vec<Vec<f64>> = (0..p.n)
            .map(|_| p.popularity.iter().map(|r| r * rng.random_range(0.0..1.0)).collect())
            .collect();
        let mut more_backhaul = p.clone();
        more_backhaul.backhaul *= 1.5;
        let mut more_cache = p.clone();
        more_cache.cache_size = (p.cache_size + 1).min(p.popularity.len());
        if dof_region_membership(&d, &p).unwrap() {
            assert!(dof_region_membership(&d, &more_backhaul).unwrap());
            assert!(dof_region_membership(&d, &more_cache).unwrap());
        }
    }
}

#[test]
fn maximum_is_monotone_in_backhaul_and_cache() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let p = random_params(&mut rng);
        let base = max_sum_dof(&p).unwrap().d_star;
        let mut q = p.clone();
        q.backhaul *= 1.3;
        assert!(max_sum_dof(&q).unwrap().d_star >= base - 1e-12);
        let mut c = p.clone();
        c.cache_size = (p.cache_size + 1).min(p.popularity.len());
        assert!(max_sum_dof(&c).unwrap().d_star >= base - 1e-12);
    }
}
