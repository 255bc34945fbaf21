use std::collections::HashSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn f2u() -> ConformalDensity {
    ConformalDensity::with_dimension(&GroupModel::unit(2).unwrap(), 2.0).unwrap()
}

fn f2w() -> ConformalDensity {
    ConformalDensity::with_dimension(&GroupModel::new(&[1.0, 2.0]).unwrap(), 2.0).unwrap()
}

#[test]
fn cocycle_examples() {
    let m = GroupModel::unit(2).unwrap();
    let xi = m.parse_point("a", "b").unwrap();
    assert_eq!(sigma(&m, &m.parse("a").unwrap(), &xi), -1.0);
    assert_eq!(sigma(&m, &m.parse("A").unwrap(), &xi), 1.0);
    let x = m.parse_point("", "B").unwrap();
    let y = m.parse_point("", "ab").unwrap();
    assert_eq!(tau(&m, &m.parse("A").unwrap(), &x, &y).unwrap(), 1.0);
    assert!(tau(&m, &m.identity(), &x, &x).is_err());
}

#[test]
fn cocycle_identities_hold() {
    for d in [f2u(), f2w()] {
        let r = cocycle_report(&d, 500, 8, 3, Exec::Sequential).unwrap();
        assert!(r.passed(), "{:?}", r.failed_checks());
        assert_eq!(r.summary_f64("max_sigma_cocycle_error").unwrap(), 0.0);
    }
}

#[test]
fn bms_examples() {
    let d = f2u();
    let m = d.model();
    let bms = BmsMeasure::new(&d);
    let ab = ProductCylinder::parse(m, "a", "b").unwrap();
    let ab2 = ProductCylinder::parse(m, "ab", "aB").unwrap();
    assert!((bms.mass(&ab) - 1.0 / 16.0).abs() < 1e-15);
    assert!((bms.mass(&ab2) - 1.0 / 16.0).abs() < 1e-15);
    let img = ab2.image(m, &m.parse("A").unwrap());
    assert_eq!(img, vec![ProductCylinder::parse(m, "b", "B").unwrap()]);
    assert!(ProductCylinder::parse(m, "a", "ab").is_err());
    assert!((bms.window_mass() - 0.75).abs() < 1e-15);
    let f = KernelStep::rectangle(m, ab.u(), ab.v());
    assert!((bms.integral(&f).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    assert!(bms.integral(&KernelStep::constant(m, 1.0)).is_err());
}

#[test]
fn cylinder_images_partition_the_image() {
    let d = f2w();
    let m = d.model();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..300 {
        let lu = rng.random_range(1..4);
        let u = m.random_word(&mut rng, lu);
        let lg = rng.random_range(0..6);
        let g = m.random_word(&mut rng, lg);
        let parts = act_cylinder(m, &g, u.letters());
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                assert!(!a.is_nested_with(b));
            }
        }
        let mass: f64 = parts.iter().map(|c| d.mu_cylinder(c)).sum();
        // mu(g [u]) = int_[u] rn(g^{-1}) d mu, constant on [u] once |u| > |g|
        let deep = m.words_of_length(u.len() + g.len() + 1, 1 << 20).unwrap();
        let expect: f64 = deep
            .iter()
            .filter(|w| u.is_prefix_of(w.letters()))
            .map(|w| {
                let xi = m.point_in(w.letters());
                d.mu_letters(w.letters()) * d.rn_derivative(&m.invert(&g), &xi)
            })
            .sum();
        assert!((mass - expect).abs() < 1e-12 * expect.max(1.0), "{mass} vs {expect}");
        for _ in 0..5 {
            let xi = d.sample_point(u.len() + 3, &mut rng).unwrap();
            let inside = parts.iter().any(|c| c.contains(&xi));
            let pre = m.act(&m.invert(&g), &xi);
            assert_eq!(inside, Cylinder::new(u.clone()).contains(&pre));
        }
    }
}

#[test]
fn bms_is_invariant() {
    for d in [f2u(), f2w()] {
        let r = bms_report(&d, 300, 7, 5, Exec::Sequential).unwrap();
        assert!(r.passed(), "{:?}", r.failed_checks());
    }
}

#[test]
fn tube_example() {
    let m = GroupModel::unit(2).unwrap();
    let xi = m.parse_point("", "B").unwrap();
    let eta = m.parse_point("", "a").unwrap();
    let mut tube: Vec<String> = tube_enumerate(&m, &xi, &eta, 0.0, 2.0, 0.0, 100)
        .unwrap()
        .iter()
        .map(|g| m.format(g))
        .collect();
    tube.sort();
    assert_eq!(tube, vec!["A", "AA", "e"]);
    assert!(tube_enumerate(&m, &xi, &eta, 1.0, 0.0, 0.0, 100).unwrap().is_empty());
    assert!(matches!(
        tube_enumerate(&m, &xi, &eta, 0.0, 50.0, 2.0, 10),
        Err(LabError::CapExceeded { .. })
    ));
}

#[test]
fn tube_matches_brute_force() {
    for d in [f2u(), f2w()] {
        let m = d.model();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let ball = m.ball(11.0, 1 << 22).unwrap();
        for _ in 0..12 {
            let (xi, eta) = sample_pair(&d, 8, Some(3.0), &mut rng).unwrap();
            let a = rng.random_range(-3.0..1.0);
            let b = a + rng.random_range(0.0..3.0);
            let mb = rng.random_range(0.0..2.5);
            let got: HashSet<Word> = tube_enumerate(m, &xi, &eta, a, b, mb, 1 << 20)
                .unwrap()
                .into_iter()
                .collect();
            let tol = m.tolerance();
            let want: HashSet<Word> = ball
                .iter()
                .filter(|g| {
                    let s = sigma(m, g, &eta);
                    s >= a - tol
                        && s <= b + tol
                        && m.gromov_bb(&m.act(g, &xi), &m.act(g, &eta)) <= mb + tol
                })
                .cloned()
                .collect();
            assert!(got.iter().all(|g| g.wlen() < 11.0 - 1e-9));
            assert_eq!(got, want);
        }
    }
}

#[test]
fn hopf_trivial_cases() {
    let d = f2u();
    let m = d.model();
    let xi = m.parse_point("", "B").unwrap();
    let eta = m.parse_point("", "a").unwrap();
    let zero = KernelStep::constant(m, 0.0);
    assert_eq!(hopf_average_j(m, &zero, &xi, &eta, 0.0, 10.0, 1000).unwrap(), 0.0);
    let one = KernelStep::constant(m, 1.0);
    assert!(matches!(
        hopf_average_j(m, &one, &xi, &eta, 0.0, 10.0, 1000),
        Err(LabError::UnboundedSupport(_))
    ));
    assert!(hopf_average_j(m, &zero, &xi, &eta, 0.0, 0.0, 1000).is_err());
    // on xi = B^inf, eta = a^inf the vertex a^n sees (A^n B^inf, a^inf)
    let f = KernelStep::rectangle(
        m,
        &Cylinder::new(m.parse("A").unwrap()),
        &Cylinder::new(m.parse("a").unwrap()),
    );
    let j = hopf_average_j(m, &f, &xi, &eta, 0.0, 10.0, 1000).unwrap();
    assert!((j - 1.0).abs() < 1e-12);
    let i = hopf_average_i(m, &f, &xi, &eta, 0.0, 10.0, 1000).unwrap();
    assert!((i - 1.0).abs() < 1e-12);
}

#[test]
fn hopf_i_matches_brute_force() {
    let d = f2w();
    let m = d.model();
    let f = KernelStep::rectangle(
        m,
        &Cylinder::new(m.parse("ab").unwrap()),
        &Cylinder::new(m.parse("aB").unwrap()),
    );
    let mb = f.support_bound(m).unwrap();
    let ball = m.ball(14.0, 1 << 22).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..6 {
        let (xi, eta) = sample_pair(&d, 10, Some(2.0), &mut rng).unwrap();
        let want: f64 = ball
            .iter()
            .filter(|g| {
                let t = tau(m, g, &xi, &eta).unwrap();
                (-1.0 - 1e-9..=3.0 + 1e-9).contains(&t)
            })
            .map(|g| f.eval(&m.act(g, &xi), &m.act(g, &eta)))
            .sum::<f64>()
            / 4.0;
        let got = hopf_average_i(m, &f, &xi, &eta, -1.0, 4.0, 1 << 20).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want} (M = {mb})");
    }
}

/// Frequency per unit length of the factor `u^{-1} v` along a typical ray,
/// from the stationary chain, against the claimed normalization.
#[test]
fn normalization_matches_word_frequencies() {
    for d in [f2u(), f2w()] {
        let m = d.model();
        let freq = letter_frequencies(&d);
        assert!((freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mean_len: f64 = m.letters().map(|a| freq[a as usize] * m.weight(a)).sum();
        let c = hopf_normalization(&d);
        let bms = BmsMeasure::new(&d);
        for (u, v) in [("a", "b"), ("B", "a"), ("ab", "Ba"), ("A", "bb"), ("bA", "a")] {
            let pc = ProductCylinder::parse(m, u, v).unwrap();
            let word = m.mul(&m.invert(pc.u().prefix()), pc.v().prefix());
            let l = word.letters();
            let mut p = freq[l[0] as usize];
            for w in l.windows(2) {
                p *= d.transition(w[0], w[1]);
            }
            let rate = p / mean_len;
            assert!((rate - c * bms.mass(&pc)).abs() < 1e-10, "{u} x {v}: {rate}");
        }
        if m.generator_weights().iter().all(|&w| w == 1.0) {
            assert!((c - 4.0 / 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn window_returns_matches_witness_search() {
    for d in [f2u(), f2w()] {
        let m = d.model();
        for g in m.ball(3.0, 1 << 16).unwrap() {
            // exits from the path of g^{-1} are decided within |g| + 1 letters
            let pts: Vec<BoundaryPoint> = m
                .words_of_length(g.len() + 1, 1 << 16)
                .unwrap()
                .iter()
                .map(|w| m.point_in(w.letters()))
                .collect();
            for (mb, k) in [(0.5, 0.5), (1.5, 0.5), (1.5, 1.5), (2.5, 1.0)] {
                let mut found = false;
                'search: for x in &pts {
                    for y in &pts {
                        if x == y || m.gromov_bb(x, y) >= mb {
                            continue;
                        }
                        let (gx, gy) = (m.act(&g, x), m.act(&g, y));
                        if m.gromov_bb(&gx, &gy) < mb && tau(m, &g, x, y).unwrap().abs() < 2.0 * k
                        {
                            found = true;
                            break 'search;
                        }
                    }
                }
                assert_eq!(window_returns(m, &g, mb, k), found, "g = {}", m.format(&g));
            }
        }
    }
}

#[test]
fn properness_examples() {
    let d = f2u();
    let r = properness_report(&d, 0.99, 0.5, 8.0, 1 << 20).unwrap();
    assert!(r.passed());
    assert_eq!(r.summary_f64("hits").unwrap(), 1.0);
    let r = properness_report(&d, 1.5, 0.5, 6.0, 1 << 20).unwrap();
    assert_eq!(r.summary_f64("hits").unwrap(), 0.0);
    let r = properness_report(&d, 0.1, 1.0, 10.0, 1 << 22).unwrap();
    assert!(r.passed(), "{:?}", r.failed_checks());
    assert!(r.summary_f64("max_hit_length").unwrap() > 1.0);
}

#[test]
fn gap_report_bounded() {
    for d in [f2u(), f2w()] {
        let r = tau_sigma_gap_report(&d, 2.0, 500, 8, Exec::Sequential).unwrap();
        assert!(r.passed());
        assert_eq!(r.summary_f64("max_tree_identity_error").unwrap(), 0.0);
        assert!(r.summary_f64("max_gap").unwrap() > 0.0);
    }
}

#[test]
fn tube_census_is_linear() {
    let d = f2u();
    let r = tube_census_report(&d, 1.0, &[10.0, 20.0, 40.0], 5, 1, 1 << 20).unwrap();
    // L + 1 vertices in the band, and 2 side letters at each of the L + 1 vertices above it
    for (l, v) in r.column("L").iter().zip(r.column("per_length")) {
        assert!((v - (3.0 * l + 3.0) / l).abs() < 1e-12, "{v}");
    }
}

#[test]
fn ergodic_small_run() {
    let d = f2u();
    let m = d.model();
    let f = KernelStep::rectangle(
        m,
        &Cylinder::new(m.parse("a").unwrap()),
        &Cylinder::new(m.parse("b").unwrap()),
    );
    let params = ErgodicParams {
        pairs: 8,
        t_grid: vec![25.0, 100.0],
        start: 0.0,
        seed: 7,
        cap: 1 << 20,
        perturb_depth: 3,
    };
    let r = ergodic_experiment(&d, &f, &params, Exec::Sequential).unwrap();
    assert_eq!(r.rows.len(), 16);
    assert!((r.summary_f64("normalized_target").unwrap() - 1.0 / 12.0).abs() < 1e-12);
    let c = r.summary_f64("contraction_max").unwrap();
    assert!(c > 0.0 && c <= 1.0 + 1e-12);
}
