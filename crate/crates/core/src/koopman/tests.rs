use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sr::{s1_max_on_points, u_set};
use super::*;
use crate::boundary::Cylinder;
use crate::error::LabError;
use crate::words::GroupModel;

fn f2u() -> ConformalDensity {
    ConformalDensity::with_dimension(&GroupModel::unit(2).unwrap(), 2.0).unwrap()
}

fn f2w() -> ConformalDensity {
    ConformalDensity::with_dimension(&GroupModel::new(&[1.0, 2.0]).unwrap(), 2.0).unwrap()
}

fn cyl(m: &GroupModel, s: &str) -> Cylinder {
    Cylinder::new(m.parse(s).unwrap())
}

fn random_step(m: &GroupModel, depth: usize, rng: &mut ChaCha8Rng) -> StepFunction {
    StepFunction::from_depth(m, depth, |_| rng.random_range(-1.0..1.0))
}

fn close(a: &StepFunction, b: &StepFunction, tol: f64) -> bool {
    a.zip_with(b, |x, y| (x - y).abs()).norm_inf() <= tol
}

#[test]
fn p_weight_examples() {
    let d = f2u();
    let m = d.model();
    let a = m.parse("a").unwrap();
    let p = p_weight(&d, &a);
    let s3 = 3f64.sqrt();
    assert!((p.value_on(&[0]).unwrap() - s3).abs() < 1e-12);
    assert!((p.value_on(&[1]).unwrap() - 1.0 / s3).abs() < 1e-12);
    assert_eq!(p_weight(&d, &m.identity()), StepFunction::constant(m, 1.0));
    assert!((p1_norm(&d, &a) - s3 / 2.0).abs() < 1e-12);
    assert!((p.norm1(&d) - s3 / 2.0).abs() < 1e-12);
    assert_eq!(p1_norm(&d, &m.identity()), 1.0);
}

#[test]
fn p1_closed_form_matches_integral() {
    let d = f2w();
    let m = d.model();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(0..9);
        let g = m.random_word(&mut rng, n);
        let closed = p1_norm(&d, &g);
        assert!((closed - p_weight(&d, &g).norm1(&d)).abs() < 1e-12);
        assert!((closed - p1_norm(&d, &m.invert(&g))).abs() < 1e-12);
    }
}

#[test]
fn koopman_examples() {
    let d = f2u();
    let m = d.model();
    let a = m.parse("a").unwrap();
    let ib = StepFunction::indicator(m, &cyl(m, "b"));
    let iab = StepFunction::indicator(m, &cyl(m, "ab"));
    let moved = koopman_apply(&d, &a, &ib);
    assert!(close(&moved, &iab.scale(3f64.sqrt()), 1e-12));
    assert!((moved.inner(&iab, &d) - 3f64.sqrt() / 12.0).abs() < 1e-12);
    assert_eq!(koopman_apply(&d, &m.identity(), &ib), ib);
}

#[test]
fn unitarity_and_representation_law() {
    for d in [f2u(), f2w()] {
        let m = d.model();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let depth = rng.random_range(0..4);
            let f = random_step(m, depth, &mut rng);
            let f2 = random_step(m, depth, &mut rng);
            let (n1, n2) = (rng.random_range(0..7), rng.random_range(0..7));
            let g = m.random_word(&mut rng, n1);
            let h = m.random_word(&mut rng, n2);
            let pf = koopman_apply(&d, &g, &f);
            assert!((pf.norm2(&d) - f.norm2(&d)).abs() < 1e-9);
            assert!((pf.inner(&koopman_apply(&d, &g, &f2), &d) - f.inner(&f2, &d)).abs() < 1e-9);
            let lhs = koopman_apply(&d, &g, &koopman_apply(&d, &h, &f));
            let rhs = koopman_apply(&d, &m.mul(&g, &h), &f);
            assert!(close(&lhs, &rhs, 1e-9 * (1.0 + rhs.norm_inf())));
        }
    }
}

#[test]
fn fast_coefficient_matches_generic_route() {
    for d in [f2u(), f2w()] {
        let m = d.model();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let (dp, dq) = (rng.random_range(0..4), rng.random_range(0..4));
            let phi = random_step(m, dp, &mut rng);
            let psi = random_step(m, dq, &mut rng);
            let n = rng.random_range(0..8);
            let g = m.random_word(&mut rng, n);
            let generic = koopman_apply(&d, &g, &phi).inner(&psi, &d);
            let fast = matrix_coefficient_raw(&d, &g, &phi, &psi);
            assert!((generic - fast).abs() < 1e-12, "{} vs {}", generic, fast);
        }
    }
}

#[test]
fn normalized_coefficient_of_constants() {
    let d = f2w();
    let m = d.model();
    let one = StepFunction::constant(m, 1.0);
    for g in m.ball(6.0, 1 << 16).unwrap() {
        assert!((matrix_coefficient(&d, &g, &one, &one) - 1.0).abs() < 1e-12);
    }
    let du = f2u();
    let mu = du.model();
    let ia = StepFunction::indicator(mu, &cyl(mu, "a"));
    let one_u = StepFunction::constant(mu, 1.0);
    assert!((matrix_coefficient(&du, &mu.identity(), &ia, &one_u) - 0.25).abs() < 1e-15);
}

#[test]
fn decay_is_visible() {
    let d = f2u();
    let (phi, psi) = canonical_pair(&d, 10);
    let r = decay_report(&d, &phi, &psi, &[2.0, 3.0, 4.0, 5.0, 6.0], 1 << 20, Exec::Sequential).unwrap();
    let errs = r.column("max_error");
    assert!(errs.first().unwrap() > errs.last().unwrap());
    assert!(r.summary_f64("slope").unwrap() < 0.0);
}

#[test]
fn p1_report_examples() {
    let d = f2u();
    let r = p1_norm_report(&d, 6.0, 1 << 20, Exec::Sequential).unwrap();
    let vals = r.column("normalized");
    assert_eq!(vals[0], 1.0);
    assert!((vals[1] - 0.75).abs() < 1e-12);
    assert!(r.summary_f64("spread").unwrap() < 4.0);
    assert!(r.summary_f64("max_inverse_asymmetry").unwrap() < 1e-12);
}

#[test]
fn annulus_weight_bounded() {
    let d = f2u();
    let m = d.model();
    let xi = m.parse_point("", "a").unwrap();
    let r = annulus_weight_report(&d, &[2.0, 4.0, 6.0, 8.0], 1.5, &xi, 1 << 20).unwrap();
    assert!(r.summary_f64("max_ratio").unwrap() < 10.0);
    assert!(r.summary_f64("min_ratio").unwrap() > 0.0);
}

#[test]
fn kernel_examples() {
    let d = f2u();
    let m = d.model();
    let one = StepFunction::constant(m, 1.0);
    let ia = StepFunction::indicator(m, &cyl(m, "a"));
    let ib = StepFunction::indicator(m, &cyl(m, "b"));
    let k1 = KernelStep::constant(m, 1.0);
    assert!(close(&k1.apply(&d, &ia), &one.scale(0.25), 1e-15));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let phi = random_step(m, 3, &mut rng);
    assert!(close(&KernelStep::separable(&phi, &one).apply(&d, &one), &phi, 1e-12));
    let rect = KernelStep::rectangle(m, &cyl(m, "a"), &cyl(m, "b"));
    assert!(close(&rect.apply(&d, &ib), &ia.scale(0.25), 1e-15));
    assert!((rect.integral(&d) - 1.0 / 16.0).abs() < 1e-15);
    assert!((rect.support_bound(m).unwrap() - 0.0).abs() < 1e-15);
    assert!(matches!(k1.support_bound(m), Err(LabError::UnboundedSupport(_))));
    let near = KernelStep::rectangle(m, &cyl(m, "ab"), &cyl(m, "aB"));
    assert_eq!(near.support_bound(m).unwrap(), 1.0);
}

#[test]
fn kernel_from_rectangles() {
    let d = f2u();
    let m = d.model();
    let quads = ["a", "b", "A", "B"];
    let mut parts = Vec::new();
    for (i, u) in quads.iter().enumerate() {
        for (j, v) in quads.iter().enumerate() {
            parts.push((cyl(m, u), cyl(m, v), (i * 4 + j) as f64));
        }
    }
    let k = KernelStep::from_rectangles(m, &parts).unwrap();
    for (i, u) in quads.iter().enumerate() {
        for (j, v) in quads.iter().enumerate() {
            let xi = m.point_in(m.parse(u).unwrap().letters());
            let eta = m.point_in(m.parse(v).unwrap().letters());
            assert_eq!(k.eval(&xi, &eta), (i * 4 + j) as f64);
            let want = (i * 4 + j) as f64 / 16.0;
            let got = k.integrate_rect(&d, m.parse(u).unwrap().letters(), m.parse(v).unwrap().letters());
            assert!((got - want).abs() < 1e-15);
        }
    }
    parts.pop();
    assert!(matches!(
        KernelStep::from_rectangles(m, &parts),
        Err(LabError::NotAPartition(_))
    ));
    // mixed depths: [a] refined in the outer variable
    let mixed = vec![
        (cyl(m, "aa"), Cylinder::whole(m), 1.0),
        (cyl(m, "ab"), Cylinder::whole(m), 2.0),
        (cyl(m, "aB"), Cylinder::whole(m), 3.0),
        (cyl(m, "b"), Cylinder::whole(m), 0.0),
        (cyl(m, "A"), Cylinder::whole(m), 0.0),
        (cyl(m, "B"), Cylinder::whole(m), 0.0),
    ];
    let km = KernelStep::from_rectangles(m, &mixed).unwrap();
    assert!((km.integral(&d) - 0.5).abs() < 1e-15);
}

#[test]
fn kernel_positivity_and_linearity() {
    let d = f2w();
    let m = d.model();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let a = StepFunction::from_depth(m, 2, |_| rng.random_range(0.0..1.0));
        let b = StepFunction::from_depth(m, 2, |_| rng.random_range(0.0..1.0));
        let k = KernelStep::separable(&a, &b).add(&KernelStep::rectangle(m, &cyl(m, "a"), &cyl(m, "Ba")));
        assert!(k.is_nonnegative());
        let f = StepFunction::from_depth(m, 3, |_| rng.random_range(0.0..1.0));
        let t = k.apply(&d, &f);
        assert!(t.parts().iter().all(|(_, v)| *v >= 0.0));
        let lin = k.scale(2.0).apply(&d, &f);
        assert!(close(&lin, &t.scale(2.0), 1e-12));
    }
}

fn unit_params(r: f64) -> SrParams {
    SrParams {
        r,
        alpha: 1.5,
        separation: 1.5,
        sigma0: 1.5,
        tau_prime: 2.0,
        cap: 1 << 22,
    }
}

#[test]
fn sr_structure_unit() {
    let d = f2u();
    let m = d.model();
    let k1 = KernelStep::constant(m, 1.0);
    let op = SrOperator::build(&d, &k1, &unit_params(4.0), Exec::Sequential).unwrap();
    assert!(op.u_min >= 1);
    assert!((op.total_mass - 1.0).abs() < 1e-12);
    let one = StepFunction::constant(m, 1.0);
    assert!((op.pairing(&d, &one, &one, Exec::Sequential) - 1.0).abs() < 1e-12);
    // brute-force search for two distinct pairs with intersecting U-sets
    let ball = m.ball(2.0, 100).unwrap();
    let mut seen = std::collections::HashMap::new();
    let mut collision = None;
    'outer: for g in &op.net.members {
        for h in &op.net.members {
            for k in u_set(m, g, h, &ball, 2.0) {
                if let Some(prev) = seen.insert(k.clone(), (g.clone(), h.clone())) {
                    if prev != (g.clone(), h.clone()) {
                        collision = Some(k);
                        break 'outer;
                    }
                }
            }
        }
    }
    assert!(collision.is_some());
    assert!(op.overlaps > 0);
}

#[test]
fn sr_sup_norm_dp_matches_points() {
    let d = f2u();
    let m = d.model();
    let k = KernelStep::rectangle(m, &cyl(m, "a"), &cyl(m, "b")).add(&KernelStep::constant(m, 0.5));
    let op = SrOperator::build(&d, &k, &unit_params(3.0), Exec::Sequential).unwrap();
    let depth = op.terms.iter().map(|t| t.k.len()).max().unwrap() + 1;
    let brute = s1_max_on_points(&op, &d, depth, 1 << 20).unwrap();
    assert!((op.sup_s1(&d) - brute).abs() < 1e-12 * brute.max(1.0));
    assert!(op.sup_s1_adjoint(&d) > 0.0);
    assert!(op.norm_lower_estimate(&d, 2, 2, 1, Exec::Sequential) <= op.norm_bound(&d) + 1e-12);
}

#[test]
fn sr_disjoint_with_wide_separation() {
    let d = f2u();
    let m = d.model();
    let params = SrParams {
        r: 6.0,
        alpha: 1.5,
        separation: 6.0,
        sigma0: 4.5,
        tau_prime: 1.0,
        cap: 1 << 22,
    };
    let op = SrOperator::build(&d, &KernelStep::constant(m, 1.0), &params, Exec::Sequential).unwrap();
    assert!(op.disjoint(), "overlaps: {}", op.overlaps);
}

#[test]
fn sr_rejects_empty_u_sets() {
    let d = f2w();
    let m = d.model();
    let params = SrParams {
        r: 4.0,
        alpha: 1.5,
        separation: 1.5,
        sigma0: 3.0,
        tau_prime: 0.5,
        cap: 1 << 22,
    };
    assert!(matches!(
        SrOperator::build(&d, &KernelStep::constant(m, 1.0), &params, Exec::Sequential),
        Err(LabError::EmptyUSet { .. })
    ));
    let net = build_net(m, 4.0, 1.5, 1.5, 3.0, 1 << 22).unwrap();
    let t = sr::auto_tau_prime(m, &net, 1 << 22, Exec::Sequential).unwrap();
    assert!(sr::first_empty_pair(m, &net.members, t, 1 << 22, Exec::Sequential)
        .unwrap()
        .is_none());
}

#[test]
fn projection_examples() {
    let d = f2u();
    let m = d.model();
    let one = StepFunction::constant(m, 1.0);
    let whole = [Cylinder::whole(m)];
    for k in 1..4 {
        let r = 3f64.powf(-(k as f64) / 2.0);
        let t = projection::ball_kernel(&d, &whole, r).unwrap().apply(&d, &one);
        assert!(close(&t, &one, 1e-12));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let tests: Vec<StepFunction> = (0..3).map(|_| random_step(m, 4, &mut rng)).collect();
    let radii: Vec<f64> = (1..=6).map(|k| 3f64.powf(-(k as f64) / 2.0)).collect();
    let rep = projection_approx_report(&d, &[cyl(m, "a")], &radii, &tests).unwrap();
    let errs = rep.column("max_error");
    assert!(errs[0] > errs[1]);
    assert!(errs[3..].iter().all(|&e| e < 1e-12));
    assert!(rep.column("max_norm_ratio").iter().all(|&x| x <= 1.0 + 1e-12));
}
