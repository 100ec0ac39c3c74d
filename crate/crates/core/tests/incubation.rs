use shapefit::incubation::{
    fenchel_gap, inc_mle_from, inc_mle_report, log_likelihood, reduce_to_interval_censoring, w_process, IcmOptions,
};
use shapefit::sim::{gen_incubation, Law, TruthSpec};
use shapefit::{inc_mle, IncubationData, StepDistribution};

fn design() -> (TruthSpec, Law) {
    (TruthSpec::incubation_weibull(), Law::Uniform { lower: 1.0, upper: 30.0 })
}

fn sample(n: usize, seed: u64) -> IncubationData {
    let (truth, exposure) = design();
    gen_incubation(n, &truth, &exposure, seed).unwrap()
}

/// Log likelihood of masses `m` on `atoms`, `-inf` if some record gets no mass.
fn loglik(data: &IncubationData, atoms: &[f64], m: &[f64]) -> f64 {
    data.exposures()
        .iter()
        .zip(data.onsets())
        .map(|(&e, &s)| {
            let d: f64 = atoms
                .iter()
                .zip(m)
                .filter(|(&x, _)| s - e < x && x <= s)
                .map(|(_, &w)| w)
                .sum();
            d.ln()
        })
        .sum()
}

/// Best point of a grid with spacing `step` over masses within `radius` of `center` on the 4-simplex.
fn simplex_search(data: &IncubationData, atoms: &[f64], center: [f64; 4], step: f64, radius: f64) -> ([f64; 4], f64) {
    let k = (radius / step).round() as i64;
    let mut best = (center, f64::NEG_INFINITY);
    for a in -k..=k {
        for b in -k..=k {
            for c in -k..=k {
                let m0 = center[0] + a as f64 * step;
                let m1 = center[1] + b as f64 * step;
                let m2 = center[2] + c as f64 * step;
                let m3 = 1.0 - m0 - m1 - m2;
                if m0 < -1e-12 || m1 < -1e-12 || m2 < -1e-12 || m3 < -1e-12 {
                    continue;
                }
                let m = [m0.max(0.0), m1.max(0.0), m2.max(0.0), m3.max(0.0)];
                let ll = loglik(data, atoms, &m);
                if ll > best.1 {
                    best = (m, ll);
                }
            }
        }
    }
    best
}

#[test]
fn four_records_match_simplex_grid() {
    let data = IncubationData::from_records(&[(2.0, 3.0), (3.0, 4.0), (1.5, 2.0), (2.5, 5.0)]).unwrap();
    let atoms = data.atoms();
    assert_eq!(atoms, vec![2.0, 3.0, 4.0, 5.0]);
    let (coarse, _) = simplex_search(&data, &atoms, [0.25; 4], 1.0 / 200.0, 1.0);
    let (_, grid_ll) = simplex_search(&data, &atoms, coarse, 1.0 / 4000.0, 2.0 / 200.0);
    let f = inc_mle(&data, 1e-10, 100_000).unwrap();
    let ll = log_likelihood(&f, &data);
    assert!(ll >= grid_ll - 1e-12, "{ll} {grid_ll}");
    assert!(ll - grid_ll <= 1e-4, "{ll} {grid_ll}");
}

#[test]
fn t_over_e_is_uniform() {
    let data = sample(10_000, 11);
    let view = reduce_to_interval_censoring(&data).unwrap();
    let mut u: Vec<f64> = view.t.iter().zip(&view.e).map(|(t, e)| t / e).collect();
    assert!(u.iter().all(|&x| (0.0..1.0).contains(&x)));
    for i in 0..data.len() {
        assert!((view.reconstruct(i) - data.onsets()[i]).abs() <= 1e-12);
    }
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let ks = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max);
    // asymptotic critical value at level 0.01
    assert!(ks < 1.628 / n.sqrt(), "KS statistic {ks}");
}

#[test]
fn uniform_start_is_not_optimal() {
    let data = sample(60, 3);
    let atoms = data.atoms();
    let m = vec![1.0 / atoms.len() as f64; atoms.len()];
    let start = StepDistribution::new(atoms, m).unwrap();
    let (violation, _) = fenchel_gap(&start, &data);
    assert!(violation > 0.0);
}

#[test]
fn certificate_and_touching_at_mass_points() {
    let data = sample(100, 21);
    let r = inc_mle_report(&data, None, IcmOptions::default()).unwrap();
    assert!(r.violation <= 1e-8 && r.complementarity <= 1e-8);
    let w = w_process(&r.estimate, &data);
    // tail sums W_total - W(t-) are nonpositive at every evaluation point
    for &l in &w.left {
        assert!(w.total - l <= 1e-8);
    }
    // and vanish just to the left of every point of mass
    for (&x, &m) in r.estimate.points().iter().zip(r.estimate.masses()) {
        if m > 1e-6 {
            assert!((w.total - w.left_limit(x)).abs() <= 1e-6, "at {x}: {}", w.total - w.left_limit(x));
        }
    }
}

#[test]
fn perturbing_a_mass_lowers_the_likelihood() {
    let data = sample(100, 8);
    let f = inc_mle(&data, 1e-10, 100_000).unwrap();
    let atoms = data.atoms();
    let base: Vec<f64> = atoms.iter().map(|&x| f.cdf(x) - f.cdf_left(x)).collect();
    let ll = loglik(&data, &atoms, &base);
    assert!((ll - log_likelihood(&f, &data)).abs() < 1e-9);
    for k in 0..atoms.len() {
        let mut m = base.clone();
        m[k] += 0.01;
        let total: f64 = m.iter().sum();
        m.iter_mut().for_each(|v| *v /= total);
        assert!(loglik(&data, &atoms, &m) < ll, "atom {k}");
    }
}

#[test]
fn different_starts_agree_at_the_onsets() {
    let data = sample(150, 5);
    let atoms = data.atoms();
    let m = atoms.len();
    let a = inc_mle(&data, 1e-10, 100_000).unwrap();
    // masses increasing and decreasing along the atoms
    for weights in [
        (1..=m).map(|k| k as f64).collect::<Vec<_>>(),
        (1..=m).map(|k| (m + 1 - k) as f64 * (m + 1 - k) as f64).collect(),
    ] {
        let total: f64 = weights.iter().sum();
        let init = StepDistribution::new(atoms.clone(), weights.iter().map(|w| w / total).collect()).unwrap();
        let b = inc_mle_from(&data, &init, 1e-10, 100_000).unwrap();
        for &s in data.onsets() {
            assert!((a.cdf(s) - b.cdf(s)).abs() <= 1e-6, "at {s}: {} vs {}", a.cdf(s), b.cdf(s));
        }
    }
}

#[test]
fn sup_distance_shrinks_with_n() {
    let (truth, _) = design();
    let grid: Vec<f64> = (0..=190).map(|k| 0.5 + 0.1 * k as f64).collect();
    let mut averages = Vec::new();
    for n in [250, 1000, 4000] {
        let mut total = 0.0;
        for r in 0..50u64 {
            let data = sample(n, 500 + r);
            let f = inc_mle(&data, 1e-8, 100_000).unwrap();
            total += grid.iter().map(|&t| (f.cdf(t) - truth.cdf(t)).abs()).fold(0.0, f64::max);
        }
        averages.push(total / 50.0);
    }
    assert!(averages[0] > averages[1] && averages[1] > averages[2], "{averages:?}");
}
