//! Ball-averaging kernels `K_rho(xi, eta) = 1_E(xi) 1{d(xi, eta) < rho} / mu(B_rho(xi))`,
//! whose operators approach the multiplication projection `P_E`.

use super::kernel::KernelStep;
use crate::boundary::Cylinder;
use crate::density::ConformalDensity;
use crate::error::Result;
use crate::report::ExperimentReport;
use crate::row;
use crate::stats;
use crate::step::StepFunction;

pub const ROUNDING: f64 = 1e-12;

/// Indicator of a finite union of cylinders.
pub fn union_indicator(rho: &ConformalDensity, e: &[Cylinder]) -> StepFunction {
    let m = rho.model();
    e.iter().fold(StepFunction::constant(m, 0.0), |acc, c| {
        acc.zip_with(&StepFunction::indicator(m, c), f64::max)
    })
}

/// `K_rho` for the union `e`.
pub fn ball_kernel(rho: &ConformalDensity, e: &[Cylinder], radius: f64) -> Result<KernelStep> {
    let m = rho.model();
    let vm = rho.visual_metric();
    let ind = union_indicator(rho, e);
    let outer: Vec<(Cylinder, StepFunction)> = vm
        .ball_partition(m, radius)?
        .into_iter()
        .map(|b| {
            let avg = StepFunction::indicator(m, &b).scale(1.0 / rho.mu_cylinder(&b));
            (b, avg)
        })
        .collect();
    let averaging = KernelStep::from_outer_parts(m, &outer)?;
    let e_left = KernelStep::separable(&ind, &StepFunction::constant(m, 1.0));
    Ok(averaging.zip_with(&e_left, |a, b| a.mul(b)))
}

/// `||T_rho phi - P_E phi||_2` for each radius, maximized over the test functions.
pub fn projection_approx_report(
    rho: &ConformalDensity,
    e: &[Cylinder],
    radii: &[f64],
    tests: &[StepFunction],
) -> Result<ExperimentReport> {
    let m = rho.model();
    let ind = union_indicator(rho, e);
    let vm = rho.visual_metric();
    let mut report = ExperimentReport::new(
        "projection",
        &["radius", "ball_depth", "max_error", "max_norm_ratio", "resolved"],
    );
    report.param(
        "E",
        e.iter()
            .map(|c| m.format(c.prefix()))
            .collect::<Vec<_>>()
            .join("|"),
    );
    report.param("tests", tests.len());
    let mut errors = Vec::new();
    for &r in radii {
        let k = ball_kernel(rho, e, r)?;
        let balls = vm.ball_partition(m, r)?;
        let depth = balls.iter().map(Cylinder::depth).max().unwrap_or(0);
        let mut worst: f64 = 0.0;
        let mut ratio: f64 = 0.0;
        let mut resolved = true;
        for phi in tests {
            let t = k.apply(rho, phi);
            let p = ind.mul(phi);
            worst = worst.max(t.zip_with(&p, |x, y| x - y).norm2(rho));
            let n = phi.norm2(rho);
            if n > 0.0 {
                ratio = ratio.max(t.norm2(rho) / n);
            }
            resolved &= balls.iter().all(|b| phi.value_on(b.prefix().letters()).is_some());
        }
        errors.push(worst);
        report.push(row![r, depth, worst, ratio, resolved]);
    }
    // errors below ROUNDING are zero up to floating point
    let positive: Vec<f64> = errors.iter().copied().filter(|&x| x > ROUNDING).collect();
    let strictly = positive.windows(2).all(|w| w[1] < w[0]);
    report.summarize("nonincreasing", stats::nonincreasing(&errors, ROUNDING));
    report.summarize("strictly_decreasing_while_positive", strictly);
    Ok(report)
}
