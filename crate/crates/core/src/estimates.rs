//! Exact scans of the shadow, Ahlfors, cone, cover and growth estimates.
//!
//! Every quantity here is a finite sum of cylinder masses or a word count, so
//! the reported ratios are exact up to floating point.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{BoundaryPoint, Cylinder};
use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::par::{self, Exec};
use crate::report::ExperimentReport;
use crate::row;
use crate::stats;
use crate::words::{GroupModel, Word};

/// Letters needed so a sampled point is exact beyond weighted depth `r`.
pub(crate) fn depth_for(model: &GroupModel, r: f64) -> usize {
    (r.max(0.0) / model.min_weight()).ceil() as usize + 2
}

fn sample_points(
    rho: &ConformalDensity,
    count: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<BoundaryPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| rho.sample_point(depth, &mut rng))
        .collect()
}

fn summarize_ratios(report: &mut ExperimentReport, ratios: &[f64]) {
    if let Some((lo, hi)) = stats::min_max(ratios) {
        report.summarize("min_ratio", lo);
        report.summarize("max_ratio", hi);
        report.summarize("spread", if lo > 0.0 { hi / lo } else { f64::INFINITY });
    }
}

/// `mu(Sigma(g, sigma0)) e^{h|g|}` for every `g != e` with `|g| <= r_max`.
pub fn shadow_lemma_report(
    rho: &ConformalDensity,
    sigma0: f64,
    r_max: f64,
    cap: usize,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let words: Vec<Word> = m
        .ball(r_max, cap)?
        .into_iter()
        .filter(|w| !w.is_identity())
        .collect();
    let rows = par::map(exec, &words, |g| -> Result<(f64, f64)> {
        let mu = rho.mu_cylinder(&m.shadow(g, sigma0)?);
        Ok((mu, mu * (rho.h() * g.wlen()).exp()))
    });
    let mut report = ExperimentReport::new(
        "shadow",
        &["word", "letters", "length", "mu_shadow", "ratio"],
    );
    report.param("sigma0", sigma0);
    report.param("r_max", r_max);
    let mut ratios = Vec::with_capacity(words.len());
    for (g, r) in words.iter().zip(rows) {
        let (mu, ratio) = r?;
        ratios.push(ratio);
        report.push(row![m.format(g), g.len(), g.wlen(), mu, ratio]);
    }
    summarize_ratios(&mut report, &ratios);
    report.summarize("words", words.len());
    Ok(report)
}

/// `mu(B_rho(xi)) / rho^D` for random `xi` and `rho = base^{-k/2}`, `k = 0..=k_max`.
pub fn ahlfors_report(
    rho: &ConformalDensity,
    samples: usize,
    base: f64,
    k_max: u32,
    seed: u64,
) -> Result<ExperimentReport> {
    if !(base > 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "radius base must exceed 1, got {base}"
        )));
    }
    let m = rho.model();
    let vm = rho.visual_metric();
    let radius = |k: u32| base.powf(-(k as f64) / 2.0);
    let depth = depth_for(m, -radius(k_max).ln() / vm.epsilon()) + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new(
        "ahlfors",
        &[
            "sample",
            "xi",
            "k",
            "radius",
            "ball_depth",
            "mu_ball",
            "ratio",
        ],
    );
    report.param("samples", samples);
    report.param("base", base);
    report.param("k_max", k_max);
    report.param("D", rho.dimension());
    let mut ratios = Vec::with_capacity(samples);
    for i in 0..samples {
        use rand::Rng;
        let xi = rho.sample_point(depth, &mut rng)?;
        let k = rng.random_range(0..=k_max);
        let r = radius(k);
        let ball = vm.ball(m, &xi, r)?;
        let mu = rho.mu_cylinder(&ball);
        let ratio = mu / r.powf(rho.dimension());
        ratios.push(ratio);
        report.push(row![
            i,
            m.format_point(&xi),
            k as usize,
            r,
            ball.depth(),
            mu,
            ratio
        ]);
    }
    summarize_ratios(&mut report, &ratios);
    Ok(report)
}

/// `mu{ xi : (g, xi) > s } e^{h s}` over `g` with `|g| <= r_max` and `s` on a
/// grid of step `s_step` up to `|g| + max weight`.
///
/// The summary reports `c_measured`: the largest gap `|g| - s` at which the
/// lower bound fails (the set is empty), clamped at zero. The two-sided
/// estimate holds for all `s < |g| - c_measured`.
pub fn generalized_shadow_report(
    rho: &ConformalDensity,
    r_max: f64,
    s_step: f64,
    cap: usize,
) -> Result<ExperimentReport> {
    if !(s_step > 0.0) {
        return Err(LabError::InvalidArgument("s_step must be positive".into()));
    }
    let m = rho.model();
    let mut report = ExperimentReport::new(
        "generalized_shadow",
        &["word", "length", "s", "gap", "mu_set", "ratio"],
    );
    report.param("r_max", r_max);
    report.param("s_step", s_step);
    let mut inside = Vec::new();
    let mut c_measured: f64 = 0.0;
    for g in m.ball(r_max, cap)? {
        if g.is_identity() {
            continue;
        }
        let mut j = 0usize;
        loop {
            let s = j as f64 * s_step;
            if s > g.wlen() + m.max_weight() {
                break;
            }
            let mu = match prefix_beyond(m, &g, s) {
                Some(p) => rho.mu_cylinder(&Cylinder::new(p)),
                None => 0.0,
            };
            let ratio = mu * (rho.h() * s).exp();
            let gap = g.wlen() - s;
            if mu > 0.0 {
                inside.push(ratio);
            } else {
                c_measured = c_measured.max(gap);
            }
            report.push(row![m.format(&g), g.wlen(), s, gap, mu, ratio]);
            j += 1;
        }
    }
    summarize_ratios(&mut report, &inside);
    report.summarize("c_measured", c_measured);
    Ok(report)
}

/// Shortest prefix of `g` with weight above `s`, if any.
fn prefix_beyond(m: &GroupModel, g: &Word, s: f64) -> Option<Word> {
    let mut wl = 0.0;
    for (i, &l) in g.letters().iter().enumerate() {
        wl += m.weight(l);
        if m.gt(wl, s) {
            return Some(m.prefix(g, i + 1));
        }
    }
    None
}

/// `#{ g in A_R(alpha) : (g, xi) > s } / e^{h (R - s)}` for random `xi`.
pub fn cone_report(
    rho: &ConformalDensity,
    r: f64,
    alpha: f64,
    s_grid: &[f64],
    samples: usize,
    seed: u64,
    cap: usize,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let annulus = m.annulus(r, alpha, cap)?;
    let points = sample_points(rho, samples, depth_for(m, r + alpha), seed)?;
    let mut report = ExperimentReport::new("cone", &["sample", "xi", "s", "count", "ratio"]);
    report.param("R", r);
    report.param("alpha", alpha);
    report.param("samples", samples);
    let mut ratios = Vec::new();
    for (i, xi) in points.iter().enumerate() {
        let products: Vec<f64> = annulus.iter().map(|g| m.gromov_wb(g, xi)).collect();
        for &s in s_grid {
            let count = products.iter().filter(|&&p| m.gt(p, s)).count();
            let ratio = count as f64 / (rho.h() * (r - s)).exp();
            ratios.push(ratio);
            report.push(row![i, m.format_point(xi), s, count, ratio]);
        }
    }
    summarize_ratios(&mut report, &ratios);
    report.summarize("annulus_size", annulus.len());
    Ok(report)
}

/// Number of shadows `Sigma(g, sigma0)`, `g in A_R(alpha)`, containing random `xi`.
pub fn cover_multiplicity_report(
    rho: &ConformalDensity,
    r: f64,
    alpha: f64,
    sigma0: f64,
    samples: usize,
    seed: u64,
    cap: usize,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let shadows = m
        .annulus(r, alpha, cap)?
        .iter()
        .map(|g| m.shadow(g, sigma0))
        .collect::<Result<Vec<_>>>()?;
    let points = sample_points(rho, samples, depth_for(m, r + alpha), seed)?;
    let mut report = ExperimentReport::new("cover", &["sample", "xi", "multiplicity"]);
    report.param("R", r);
    report.param("alpha", alpha);
    report.param("sigma0", sigma0);
    report.param("samples", samples);
    let mut mult = Vec::with_capacity(samples);
    for (i, xi) in points.iter().enumerate() {
        let k = shadows.iter().filter(|c| c.contains(xi)).count();
        mult.push(k as f64);
        report.push(row![i, m.format_point(xi), k]);
    }
    if let Some((lo, hi)) = stats::min_max(&mult) {
        report.summarize("min_multiplicity", lo);
        report.summarize("max_multiplicity", hi);
    }
    Ok(report)
}

/// Annulus sizes `|A_R(alpha)|` over `r_values` and the fitted growth rate.
pub fn growth_report(
    model: &GroupModel,
    h: f64,
    alpha: f64,
    r_values: &[f64],
    cap: usize,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("growth", &["R", "count", "log_count", "normalized"]);
    report.param("alpha", alpha);
    report.param("h", h);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &r in r_values {
        let n = model.annulus(r, alpha, cap)?.len();
        let log = (n as f64).ln();
        xs.push(r);
        ys.push(log);
        report.push(row![r, n, log, n as f64 * (-h * r).exp()]);
    }
    if let Some(fit) = stats::fit_line(&xs, &ys) {
        report.summarize("slope", fit.slope);
        report.summarize("intercept", fit.intercept);
        report.summarize("slope_error", fit.slope - h);
    }
    Ok(report)
}
