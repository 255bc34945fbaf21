//! The acceptance suite on the canonical models: unit-weight rank 2 (`F2U`)
//! and weights (1, 2) (`F2W`), both at dimension 2.
//!
//! Each criterion is evaluated against an independent oracle where one
//! exists. Two criteria are known to fail at their stated parameters; for
//! those the criterion carries a supplementary check that is expected to pass.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::Cylinder;
use crate::classify::{self, MetricPair};
use crate::density::{critical_exponent, ConformalDensity};
use crate::error::{LabError, Result};
use crate::estimates;
use crate::flow::{self, BmsMeasure, ErgodicParams, ProductCylinder};
use crate::koopman::{self, kernel::KernelStep, sr::SrOperator, sr::SrParams};
use crate::par::Exec;
use crate::stats;
use crate::step::StepFunction;
use crate::words::GroupModel;

#[derive(Debug, Clone)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// A substitute check for a criterion that cannot hold as stated.
    pub supplementary: Option<(String, bool)>,
    /// Set when the criterion could not be evaluated.
    pub error: Option<LabError>,
}

impl Criterion {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Criterion {
            name,
            passed,
            detail,
            supplementary: None,
            error: None,
        }
    }

    fn with_supplementary(mut self, detail: String, passed: bool) -> Self {
        self.supplementary = Some((detail, passed));
        self
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<16} {}", self.name, self.detail)?;
        if let Some((d, ok)) = &self.supplementary {
            write!(f, " | supplementary {}: {d}", if *ok { "PASS" } else { "FAIL" })?;
        }
        Ok(())
    }
}

/// Settings shared by every criterion.
#[derive(Debug, Clone, Copy)]
pub struct Suite {
    pub seed: u64,
    pub cap: usize,
    pub exec: Exec,
}

impl Default for Suite {
    fn default() -> Self {
        Suite {
            seed: 20240917,
            cap: 1 << 22,
            exec: Exec::Parallel,
        }
    }
}

pub fn f2u() -> ConformalDensity {
    ConformalDensity::with_dimension(&GroupModel::unit(2).expect("model"), 2.0).expect("density")
}

pub fn f2w() -> ConformalDensity {
    ConformalDensity::with_dimension(&GroupModel::new(&[1.0, 2.0]).expect("model"), 2.0)
        .expect("density")
}

/// Root of `3t^3 + t^2 + t - 1` in (0, 1) by bisection. On weights (1, 2)
/// the growth rate is `-ln t*`.
pub fn weighted_root() -> f64 {
    let p = |t: f64| 3.0 * t * t * t + t * t + t - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn cyl(m: &GroupModel, s: &str) -> Result<Cylinder> {
    Ok(Cylinder::new(m.parse(s)?))
}

pub type Check = fn(&Suite) -> Result<Criterion>;

/// Every criterion in suite order.
pub const ALL: [(&str, Check); 13] = [
    ("exponent", exponent),
    ("density", density),
    ("conformality", conformality),
    ("shadow", shadow),
    ("ahlfors", ahlfors),
    ("growth", growth),
    ("koopman", koopman_unitary),
    ("decay", decay),
    ("sr", sr),
    ("projection", projection),
    ("cocycle_bms", cocycle_bms),
    ("ergodic", ergodic),
    ("classification", classification),
];

/// Runs every criterion; errors become failing lines.
pub fn run_all(suite: &Suite, mut on_result: impl FnMut(&Criterion)) -> Vec<Criterion> {
    ALL.iter()
        .map(|(name, f)| {
            let c = f(suite).unwrap_or_else(|e| Criterion {
                error: Some(e.clone()),
                ..Criterion::new(name, false, format!("error: {e}"))
            });
            on_result(&c);
            c
        })
        .collect()
}

pub fn exponent(_: &Suite) -> Result<Criterion> {
    let hu = critical_exponent(&GroupModel::unit(2)?);
    let w = GroupModel::new(&[1.0, 2.0])?;
    let hw = critical_exponent(&w);
    let eu = (hu - 3f64.ln()).abs();
    let ew = (hw + weighted_root().ln()).abs();
    let mut homog: f64 = 0.0;
    for m in [GroupModel::unit(2)?, w] {
        let h = critical_exponent(&m);
        for c in [0.5, 2.0, 3.0] {
            homog = homog.max((critical_exponent(&m.scaled(c)?) - h / c).abs());
        }
    }
    Ok(Criterion::new(
        "exponent",
        eu < 1e-9 && ew < 1e-6 && homog < 1e-9,
        format!("|h-ln3|={eu:.1e} |h+ln t*|={ew:.1e} homogeneity={homog:.1e}"),
    ))
}

pub fn density(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let m = d.model();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut add: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let c = Cylinder::new(m.random_word(&mut rng, n));
        let kids: f64 = c.children(m).iter().map(|k| d.mu_cylinder(k)).sum();
        add = add.max((kids - d.mu_cylinder(&c)).abs());
    }
    let ea = (d.mu_cylinder(&cyl(m, "a")?) - 0.25).abs();
    let eab = (d.mu_cylinder(&cyl(m, "ab")?) - 1.0 / 12.0).abs();
    let w = f2w();
    let mut poincare: f64 = 0.0;
    for c in Cylinder::whole(w.model()).children(w.model()) {
        let p = w.poincare_truncated(w.h() + 0.01, 12.0, &c)?;
        poincare = poincare.max((p - w.mu_cylinder(&c)).abs());
    }
    Ok(Criterion::new(
        "density",
        add < 1e-9 && ea < 1e-12 && eab < 1e-12 && poincare < 0.02,
        format!("additivity={add:.1e} mu[a]={ea:.1e} mu[ab]={eab:.1e} poincare={poincare:.4}"),
    ))
}

pub fn conformality(s: &Suite) -> Result<Criterion> {
    let mut conf: f64 = 0.0;
    let mut chain: f64 = 0.0;
    for (i, d) in [f2u(), f2w()].iter().enumerate() {
        let m = d.model();
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ i as u64);
        for _ in 0..5000 {
            let (lg, lh) = (rng.random_range(0..=8), rng.random_range(0..=8));
            let g = m.random_word(&mut rng, lg);
            let h = m.random_word(&mut rng, lh);
            let xi = d.sample_point(20, &mut rng)?;
            // measure-level derivative from cylinder masses
            let measured = d.rn_by_cylinders(&g, &xi, g.len() + 2);
            let e = measured * (d.h() * (g.wlen() - 2.0 * m.gromov_wb(&g, &xi))).exp();
            conf = conf.max((e - 1.0).abs());
            let gh = m.mul(&g, &h);
            let lhs = d.rn_by_cylinders(&gh, &xi, gh.len() + 2);
            let moved = m.act(&m.invert(&g), &xi);
            let rhs = measured * d.rn_by_cylinders(&h, &moved, h.len() + 2);
            chain = chain.max((lhs / rhs - 1.0).abs());
        }
    }
    Ok(Criterion::new(
        "conformality",
        conf < 1e-9 && chain < 1e-9,
        format!("max |rn e^(h(|g|-2(g,xi)))-1|={conf:.1e} chain rule={chain:.1e} (10^4 pairs)"),
    ))
}

pub fn shadow(s: &Suite) -> Result<Criterion> {
    let r = estimates::shadow_lemma_report(&f2u(), 1.5, 8.0, s.cap, s.exec)?;
    let off = r
        .column("ratio")
        .iter()
        .map(|&x| (x - 0.75).abs().min((x - 2.25).abs()))
        .fold(0.0, f64::max);
    let w = estimates::shadow_lemma_report(&f2w(), 1.5, 8.0, s.cap, s.exec)?;
    let spread = w.summary_f64("spread").unwrap_or(f64::INFINITY);
    Ok(Criterion::new(
        "shadow",
        off < 1e-9 && spread <= 10.0,
        format!(
            "F2U {} words, max distance to {{3/4, 9/4}}={off:.1e}; F2W spread={spread:.3}",
            r.rows.len()
        ),
    ))
}

pub fn ahlfors(s: &Suite) -> Result<Criterion> {
    let r = estimates::ahlfors_report(&f2u(), 1000, 3.0, 6, s.seed)?;
    let ratios = r.column("ratio");
    let (lo, hi) = stats::min_max(&ratios).unwrap_or((f64::NAN, f64::NAN));
    // on F2U every radius 3^{-k/2} is a level of the ultrametric, so the
    // closed form mu(B) / rho^2 = 1/4 holds at all of them
    let off = ratios.iter().map(|x| (x - 0.25).abs()).fold(0.0, f64::max);
    Ok(Criterion::new(
        "ahlfors",
        lo >= 0.2 && hi <= 1.1 && off < 1e-9,
        format!("ratios in [{lo:.6}, {hi:.6}], max |ratio-1/4|={off:.1e}"),
    ))
}

/// Reduced words over `2k` letters with length in `(lo, hi)`, by brute force
/// over all strings.
fn brute_annulus_count(k: usize, lo: usize, hi: usize) -> usize {
    let n = 2 * k;
    let mut count = 0;
    for len in lo..=hi {
        let total = n.pow(len as u32);
        'outer: for mut code in 0..total {
            let mut prev: Option<usize> = None;
            for _ in 0..len {
                let l = code % n;
                code /= n;
                if let Some(p) = prev {
                    if (p + k) % n == l {
                        continue 'outer;
                    }
                }
                prev = Some(l);
            }
            count += 1;
        }
    }
    count
}

pub fn growth(s: &Suite) -> Result<Criterion> {
    let radii: Vec<f64> = (2..=9).map(f64::from).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [f2u(), f2w()] {
        let r = estimates::growth_report(d.model(), d.h(), 1.5, &radii, s.cap)?;
        let err = (r.summary_f64("slope").unwrap_or(f64::NAN) - d.h()).abs();
        ok &= err < 0.01;
        parts.push(format!("|slope-h|={err:.4}"));
    }
    let n3 = GroupModel::unit(2)?.annulus(3.0, 1.5, s.cap)?.len();
    let oracle = brute_annulus_count(2, 2, 4);
    ok &= n3 == oracle && oracle == 156;
    Ok(Criterion::new(
        "growth",
        ok,
        format!("F2U {} F2W {}; |A_3(1.5)|={n3} (brute force {oracle})", parts[0], parts[1]),
    ))
}

pub fn koopman_unitary(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let m = d.model();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut unit: f64 = 0.0;
    for i in 0..1000 {
        let rho = if i % 2 == 0 { f2u() } else { f2w() };
        let mm = rho.model();
        let n = rng.random_range(0..=6);
        let g = mm.random_word(&mut rng, n);
        let f = StepFunction::from_depth(mm, 3, |_| rng.random_range(-1.0..1.0));
        let before = f.norm2(&rho);
        let after = koopman::koopman_apply(&rho, &g, &f).norm2(&rho);
        unit = unit.max((after - before).abs());
    }
    let pa = (koopman::p1_norm(&d, &m.parse("a")?) - 3f64.sqrt() / 2.0).abs();
    let one = StepFunction::constant(m, 1.0);
    let mut coef: f64 = 0.0;
    for g in m.ball(8.0, s.cap)? {
        let v = koopman::normalized_apply(&d, &g, &one).inner(&one, &d);
        coef = coef.max((v - 1.0).abs());
    }
    Ok(Criterion::new(
        "koopman",
        unit < 1e-9 && pa < 1e-12 && coef < 1e-12,
        format!("unitarity={unit:.1e} |‖P_a‖₁-√3/2|={pa:.1e} max|<π̃(g)1,1>-1|={coef:.1e}"),
    ))
}

pub fn decay(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let (phi, psi) = koopman::canonical_pair(&d, 12);
    let annuli: Vec<f64> = (2..=10).map(f64::from).collect();
    let r = koopman::decay_report(&d, &phi, &psi, &annuli, s.cap, s.exec)?;
    let slope = r.summary_f64("slope").unwrap_or(f64::NAN);
    let bound = -1.0 / d.dimension() + 0.15;
    Ok(Criterion::new(
        "decay",
        slope <= bound,
        format!("log-log slope={slope:.4} (bound {bound})"),
    ))
}

fn sr_params(r: f64) -> SrParams {
    SrParams {
        r,
        alpha: 1.5,
        separation: 1.5,
        sigma0: 1.5,
        tau_prime: 2.0,
        cap: 1 << 22,
    }
}

pub fn sr(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let m = d.model();
    let k = KernelStep::constant(m, 1.0);
    let one = StepFunction::constant(m, 1.0);
    let (mut overlaps, mut sup) = (0usize, 0.0f64);
    let mut errs = Vec::new();
    // an empty U-set surfaces as an error from build
    for r in [3.0, 4.0, 5.0, 6.0] {
        let op = SrOperator::build(&d, &k, &sr_params(r), s.exec)?;
        overlaps += op.overlaps;
        sup = sup.max(op.sup_s1(&d)).max(op.sup_s1_adjoint(&d));
        errs.push((op.pairing(&d, &one, &one, s.exec) - 1.0).abs());
    }
    let decreasing = stats::nonincreasing(&errs, 1e-12);
    let last = *errs.last().unwrap_or(&f64::NAN);
    let norms_ok = sup <= 10.0 && decreasing && last < 0.3;
    let passed = overlaps == 0 && norms_ok;
    let wide = SrParams {
        r: 6.0,
        alpha: 1.5,
        separation: 6.0,
        sigma0: 4.5,
        tau_prime: 1.0,
        cap: s.cap,
    };
    let op = SrOperator::build(&d, &k, &wide, s.exec)?;
    Ok(Criterion::new(
        "sr",
        passed,
        format!(
            "U-sets nonempty, words in several U-sets={overlaps}; sup S_R1, S_R*1 <= {sup:.4}; \
             pairing error nonincreasing={decreasing}, at R=6 {last:.1e}"
        ),
    )
    .with_supplementary(
        format!(
            "norm and pairing parts hold; disjoint at C=6, sigma0=4.5, tau'=1, R=6 (overlaps={})",
            op.overlaps
        ),
        norms_ok && op.disjoint(),
    ))
}

pub fn projection(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let m = d.model();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let tests: Vec<StepFunction> = (0..4)
        .map(|_| StepFunction::from_depth(m, 4, |_| rng.random_range(-1.0..1.0)))
        .collect();
    let radii: Vec<f64> = (1..=6).map(|k| 3f64.powf(-(k as f64) / 2.0)).collect();
    let r = koopman::projection_approx_report(&d, &[cyl(m, "a")?], &radii, &tests)?;
    let errs = r.column("max_error");
    let ri = r.column_index("resolved").expect("column");
    let resolved: Vec<bool> = r
        .rows
        .iter()
        .map(|row| matches!(&row[ri], crate::report::Cell::Text(t) if t == "true"))
        .collect();
    let zero_once_resolved = errs
        .iter()
        .zip(&resolved)
        .all(|(&e, &res)| !res || e <= koopman::projection::ROUNDING);
    let any_resolved = resolved.iter().any(|&x| x);
    let strictly = r.summary.get("strictly_decreasing_while_positive") == Some(&serde_json::json!(true));
    let nonincreasing = r.summary.get("nonincreasing") == Some(&serde_json::json!(true));
    Ok(Criterion::new(
        "projection",
        nonincreasing && strictly && zero_once_resolved && any_resolved,
        format!(
            "errors {}",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

pub fn cocycle_bms(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let m = d.model();
    let c = flow::cocycle_report(&d, 10_000, 8, s.seed, s.exec)?;
    let b = flow::bms_report(&d, 1000, 8, s.seed, s.exec)?;
    let bms = BmsMeasure::new(&d);
    let x = bms.mass(&ProductCylinder::parse(m, "a", "b")?);
    let y = bms.mass(&ProductCylinder::parse(m, "ab", "aB")?);
    let ex = (x - 1.0 / 16.0).abs().max((y - 1.0 / 16.0).abs());
    let tau = c.summary_f64("max_tau_cocycle_error").unwrap_or(f64::NAN);
    let rs = c.summary_f64("max_rho_sigma_error").unwrap_or(f64::NAN);
    let inv = b.summary_f64("max_relative_error").unwrap_or(f64::NAN);
    Ok(Criterion::new(
        "cocycle_bms",
        tau < 1e-9 && rs < 1e-9 && inv < 1e-12 && ex < 1e-12,
        format!("tau cocycle={tau:.1e} rho-sigma={rs:.1e} bms invariance={inv:.1e} |m-1/16|={ex:.1e}"),
    ))
}

pub fn ergodic(s: &Suite) -> Result<Criterion> {
    let d = f2u();
    let m = d.model();
    let f = KernelStep::rectangle(m, &cyl(m, "a")?, &cyl(m, "b")?);
    let params = ErgodicParams {
        pairs: 50,
        t_grid: vec![25.0, 50.0, 100.0, 200.0],
        start: 0.0,
        seed: s.seed,
        cap: s.cap,
        perturb_depth: 3,
    };
    let r = flow::ergodic_experiment(&d, &f, &params, s.exec)?;
    let med = r.summary_f64("median_J_T200").unwrap_or(f64::NAN);
    let lit = (med - 1.0 / 16.0).abs() / (1.0 / 16.0);
    let lit_mono = r.summary.get("median_errors_nonincreasing") == Some(&serde_json::json!(true));
    let target = r.summary_f64("normalized_target").unwrap_or(f64::NAN);
    let norm = (med - target).abs() / target;
    let norm_mono =
        r.summary.get("median_errors_normalized_nonincreasing") == Some(&serde_json::json!(true));
    Ok(Criterion::new(
        "ergodic",
        lit <= 0.25 && lit_mono,
        format!("median J at T=200 = {med:.5}, relative error to 1/16 = {lit:.3}, nonincreasing={lit_mono}"),
    )
    .with_supplementary(
        format!(
            "relative error to normalized target {target:.5} = {norm:.3}, nonincreasing={norm_mono}"
        ),
        norm <= 0.25 && norm_mono,
    ))
}

pub fn classification(s: &Suite) -> Result<Criterion> {
    let cap = s.cap;
    let homothety = MetricPair::from_weights(&[1.0, 1.0], 2.0, &[2.0, 2.0], 2.0)?;
    let h = classify::similarity_deviation_report(&homothety, 8, cap)?;
    let zero = h.summary_f64("max_deviation").unwrap_or(f64::NAN);
    let h_ok = h.summary["verdict"] == "SIMILAR" && zero < 1e-9;

    let mixed = MetricPair::from_weights(&[1.0, 1.0], 2.0, &[1.0, 2.0], 2.0)?;
    let r = classify::similarity_deviation_report(&mixed, 8, cap)?;
    let slope = r.summary_f64("slope").unwrap_or(f64::NAN);
    // |h_1 |b^n|_1 - h_2 |b^n|_2| / n with h_1 = ln 3, h_2 = -ln t*
    let along = (3f64.ln() + 2.0 * weighted_root().ln()).abs();
    let rel = (slope - along).abs() / along;
    let m_ok = r.summary["verdict"] == "NOT_SIMILAR" && rel <= 0.1;

    let lib = classify::classify_report(7, 7, cap)?;
    let agree = lib.passed();

    let mut holder: f64 = 0.0;
    for lp in classify::library().into_iter().filter(|p| p.similar) {
        let mp = MetricPair::from_weights(&lp.first, lp.dimensions.0, &lp.second, lp.dimensions.1)?;
        let f = classify::holder_fit_report(&mp, 200, 10, s.seed)?;
        let want = lp.dimensions.0 / lp.dimensions.1;
        holder = holder.max((f.summary_f64("slope").unwrap_or(f64::NAN) - want).abs());
    }
    Ok(Criterion::new(
        "classification",
        h_ok && m_ok && agree && holder < 0.02,
        format!(
            "homothety deviation={zero:.1e}; (1,1)/(1,2) slope={slope:.4} vs {along:.4}; \
             {} library pairs correct and consistent={agree}; max |Hölder slope - D1/D2|={holder:.1e}",
            lib.rows.len()
        ),
    ))
}
