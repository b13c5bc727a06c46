use supoly::hole::{hole_probability_mc, omega_lower_bound};
use supoly::{Complex64, ComplexPoint, Domain, EnsembleSpec, Sampler, StreamKey};

fn spec(m: usize, n: u32, seed: u64) -> EnsembleSpec {
    EnsembleSpec::new(m, n, seed).unwrap()
}

/// `P(|a|^2 >= r^2 |b|^2)` for independent standard complex Gaussians, by quadrature over `|b|^2`.
///
/// `|a|^2` and `|b|^2` are Exp(1); the inner probability is the Exp(1) survival
/// function, integrated against the density of `|b|^2` with composite Simpson.
fn ratio_tail_by_quadrature(r: f64) -> f64 {
    let (upper, n) = (60.0, 60_000);
    let h = upper / n as f64;
    let f = |y: f64| (-y).exp() * (-(r * r) * y).exp();
    let mut s = f(0.0) + f(upper);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn binomial_stderr(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

#[test]
fn coefficient_tails_are_exponential() {
    let sampler = Sampler::new(spec(1, 0, 2024));
    let n = 1_000_000u64;
    let sq: Vec<f64> = (0..n).map(|t| sampler.sample(t).alpha()[0].norm_sqr()).collect();
    for lambda in [0.5f64, 1.0, 2.0] {
        let l2 = lambda * lambda;
        let above = sq.iter().filter(|&&s| s >= l2).count() as f64 / n as f64;
        let below = sq.iter().filter(|&&s| s <= l2).count() as f64 / n as f64;
        let p = (-l2).exp();
        let se = binomial_stderr(p, n as f64);
        assert!((above - p).abs() <= 3.0 * se, "lambda {lambda}: {above} vs {p}");
        assert!((below - (1.0 - p)).abs() <= 3.0 * se, "lambda {lambda}: {below} vs {}", 1.0 - p);
    }
    let mean = sq.iter().sum::<f64>() / n as f64;
    assert!((0.997..=1.003).contains(&mean), "mean |alpha|^2 = {mean}");
}

#[test]
fn coefficient_phases_are_uniform_and_independent_of_modulus() {
    let sampler = Sampler::new(spec(1, 3, 11));
    let n = 200_000u64;
    let mut quadrant = [0u64; 4];
    let mut corr = 0.0;
    for t in 0..n {
        let a = sampler.sample(t).alpha()[2];
        let q = ((a.arg() + std::f64::consts::PI) / std::f64::consts::FRAC_PI_2) as usize;
        quadrant[q.min(3)] += 1;
        corr += a.re * a.im;
    }
    for q in quadrant {
        let p = q as f64 / n as f64;
        assert!((p - 0.25).abs() < 3.0 * binomial_stderr(0.25, n as f64) + 1e-12);
    }
    assert!((corr / n as f64).abs() < 0.005);
}

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn normalized_evaluator_is_rotation_symmetric() {
    let sampler = Sampler::new(spec(1, 12, 77));
    let z = Complex64::new(0.8, -0.3);
    let rotated = z * Complex64::from_polar(1.0, 2.1);
    let n = 10_000u64;
    let at_z: Vec<f64> = (0..n)
        .map(|t| sampler.sample(t).evaluate_normalized(&ComplexPoint::scalar(z)).norm())
        .collect();
    let at_rot: Vec<f64> = (n..2 * n)
        .map(|t| sampler.sample(t).evaluate_normalized(&ComplexPoint::scalar(rotated)).norm())
        .collect();
    // 1% two-sample critical value 1.628 sqrt(2/n)
    let critical = 1.628 * (2.0 / n as f64).sqrt();
    let d = ks_two_sample(at_z, at_rot);
    assert!(d < critical, "KS distance {d} vs critical {critical}");
}

#[test]
fn ratio_oracle_quadrature_is_accurate() {
    assert!((ratio_tail_by_quadrature(1.0) - 0.5).abs() < 1e-9);
    assert!((ratio_tail_by_quadrature(2.0) - 0.2).abs() < 1e-9);
}

#[test]
fn degree_one_hole_frequency_matches_ratio_oracle() {
    for r in [1.0, 2.0] {
        let est = hole_probability_mc(spec(1, 1, 31), r, 100_000).unwrap();
        let oracle = ratio_tail_by_quadrature(r);
        assert!(
            (est.p_hat - oracle).abs() <= 3.0 * est.stderr,
            "r = {r}: p_hat {} oracle {oracle} stderr {}",
            est.p_hat,
            est.stderr
        );
        assert_eq!(est.stderr, binomial_stderr(est.p_hat, 100_000.0));
        assert!(est.hits <= est.trials);
    }
}

#[test]
fn certified_bound_never_exceeds_monte_carlo() {
    for (n, r) in [(2, 1.0), (4, 0.5), (8, 0.3), (12, 0.3)] {
        let est = hole_probability_mc(spec(1, n, 5), r, 1_000_000).unwrap();
        if est.hits == 0 {
            continue;
        }
        let bound = omega_lower_bound(spec(1, n, 5), r).unwrap().log_prob.exp();
        assert!(
            bound <= est.p_hat + 3.0 * est.stderr,
            "N = {n}, r = {r}: bound {bound} above p_hat {} + 3 se",
            est.p_hat
        );
    }
}

#[test]
fn hole_counts_stable_across_thread_counts() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| hole_probability_mc(spec(1, 6, 99), 0.6, 20_000).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(16));
}

#[test]
fn streams_are_scheduling_independent() {
    let key = StreamKey::new(3, Domain::Coefficients, 17);
    let direct: Vec<u64> = {
        let mut s = key.stream();
        (0..8).map(|_| s.next_u64()).collect()
    };
    let from_threads: Vec<Vec<u64>> = std::thread::scope(|sc| {
        let hs: Vec<_> = (0..4)
            .map(|_| {
                sc.spawn(move || {
                    let mut s = key.stream();
                    (0..8).map(|_| s.next_u64()).collect::<Vec<u64>>()
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(from_threads.iter().all(|v| *v == direct));
}
