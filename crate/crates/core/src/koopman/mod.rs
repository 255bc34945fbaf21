//! The Koopman representation `[pi(g) f](xi) = P_g(xi) f(g^{-1} xi)` with
//! `P_g = sqrt(d g_* mu / d mu)`, and its matrix coefficients.
//!
//! `P_g` depends on `xi` only through `(g, xi)`, so it is the step function
//! that takes the value `exp(-h (|g| - 2 |g_1..g_i|) / 2)` on points leaving
//! the path of `g` after exactly `i` letters.

pub mod kernel;
pub mod net;
pub mod projection;
pub mod sr;

use crate::boundary::BoundaryPoint;
use crate::density::ConformalDensity;
use crate::error::Result;
use crate::par::{self, Exec};
use crate::report::ExperimentReport;
use crate::row;
use crate::stats;
use crate::step::{forbidden, Node, StepFunction};
use crate::words::{Letter, Word};

pub use kernel::KernelStep;
pub use net::{build_net, NetFamily};
pub use projection::projection_approx_report;
pub use sr::{SrOperator, SrParams};

/// `P_g` on each divergence depth `i = 0..=|g|`.
pub fn p_values(rho: &ConformalDensity, g: &Word) -> Vec<f64> {
    let m = rho.model();
    let mut out = Vec::with_capacity(g.len() + 1);
    let mut wl = 0.0;
    out.push((-0.5 * rho.h() * g.wlen()).exp());
    for &l in g.letters() {
        wl += m.weight(l);
        out.push((-0.5 * rho.h() * (g.wlen() - 2.0 * wl)).exp());
    }
    out
}

pub fn p_weight(rho: &ConformalDensity, g: &Word) -> StepFunction {
    StepFunction::along_path(rho.model(), g.letters(), &p_values(rho, g))
}

/// `||P_g||_1` in closed form from the masses of the prefix cylinders of `g`.
pub fn p1_norm(rho: &ConformalDensity, g: &Word) -> f64 {
    let p = p_values(rho, g);
    let letters = g.letters();
    let mut acc = 0.0;
    let mut mass = 1.0;
    for i in 0..letters.len() {
        let next = mass * rho.child_factor(i.checked_sub(1).map(|j| letters[j]), letters[i]);
        acc += p[i] * (mass - next);
        mass = next;
    }
    acc + p[letters.len()] * mass
}

pub fn koopman_apply(rho: &ConformalDensity, g: &Word, f: &StepFunction) -> StepFunction {
    p_weight(rho, g).mul(&f.translate(rho.model(), g))
}

/// `pi(g) f / ||P_g||_1`.
pub fn normalized_apply(rho: &ConformalDensity, g: &Word, f: &StepFunction) -> StepFunction {
    koopman_apply(rho, g, f).scale(1.0 / p1_norm(rho, g))
}

fn node_at(node: &Node, path: impl Iterator<Item = Letter>) -> &Node {
    let mut node = node;
    for l in path {
        match node {
            Node::Leaf(_) => return node,
            Node::Split(c) => node = &c[l as usize],
        }
    }
    node
}

fn joint(a: &Node, b: &Node, rho: &ConformalDensity, last: Letter, mass: f64) -> f64 {
    if let (Node::Leaf(x), Node::Leaf(y)) = (a, b) {
        return x * y * mass;
    }
    let forb = forbidden(rho.model().rank(), Some(last));
    let mut acc = 0.0;
    for l in rho.model().letters() {
        if Some(l as usize) == forb {
            continue;
        }
        let ca = match a {
            Node::Leaf(_) => a,
            Node::Split(c) => &c[l as usize],
        };
        let cb = match b {
            Node::Leaf(_) => b,
            Node::Split(c) => &c[l as usize],
        };
        acc += joint(ca, cb, rho, l, mass * rho.transition(last, l));
    }
    acc
}

/// Unnormalized `<pi(g) phi, psi>`.
///
/// Points leaving `g` after `i` letters through `c` satisfy
/// `g^{-1} xi in [(g_{i+1..})^{-1} c]` and `P_g` is constant there, so the
/// integral splits into one joint walk of the two tries per such cylinder.
pub fn matrix_coefficient_raw(
    rho: &ConformalDensity,
    g: &Word,
    phi: &StepFunction,
    psi: &StepFunction,
) -> f64 {
    let m = rho.model();
    let k = g.letters();
    let n = k.len();
    if n == 0 {
        return phi.inner(psi, rho);
    }
    let p = p_values(rho, g);
    let mut acc = 0.0;
    let mut psi_node = &psi.root;
    let mut mass = 1.0;
    for i in 0..n {
        let last = i.checked_sub(1).map(|j| k[j]);
        let forb = forbidden(m.rank(), last);
        let mut level = 0.0;
        for c in m.letters() {
            if c == k[i] || Some(c as usize) == forb {
                continue;
            }
            let cm = mass * rho.child_factor(last, c);
            let phi_node = node_at(
                &phi.root,
                k[i..].iter().rev().map(|&l| m.inverse(l)).chain(std::iter::once(c)),
            );
            let psi_child = node_at(psi_node, std::iter::once(c));
            level += joint(phi_node, psi_child, rho, c, cm);
        }
        acc += p[i] * level;
        mass *= rho.child_factor(last, k[i]);
        psi_node = node_at(psi_node, std::iter::once(k[i]));
    }
    acc + p[n] * joint(&phi.root, psi_node, rho, k[n - 1], mass)
}

/// `<pi~(g) phi, psi>` with `pi~(g) = pi(g) / ||P_g||_1`.
pub fn matrix_coefficient(
    rho: &ConformalDensity,
    g: &Word,
    phi: &StepFunction,
    psi: &StepFunction,
) -> f64 {
    matrix_coefficient_raw(rho, g, phi, psi) / p1_norm(rho, g)
}

/// The limit profile `phi(check g) psi(hat g)` of the normalized coefficient.
pub fn coefficient_limit(
    rho: &ConformalDensity,
    g: &Word,
    phi: &StepFunction,
    psi: &StepFunction,
) -> f64 {
    let m = rho.model();
    phi.eval(&m.check(g)) * psi.eval(&m.hat(g))
}

/// `phi = 1_[a]` and a depth-`depth` step approximation of `d(., b^inf)`.
pub fn canonical_pair(rho: &ConformalDensity, depth: usize) -> (StepFunction, StepFunction) {
    let m = rho.model();
    let a = crate::boundary::Cylinder::new(m.word(&[0]).expect("single letter"));
    let phi = StepFunction::indicator(m, &a);
    let b: Letter = 1;
    let path = vec![b; depth];
    let values: Vec<f64> = (0..=depth)
        .map(|j| (-rho.epsilon() * j as f64 * m.weight(b)).exp())
        .collect();
    (phi, StepFunction::along_path(m, &path, &values))
}

/// `max_{|g| ~ n} |<pi~(g) phi, psi> - phi(check g) psi(hat g)|` over annuli
/// `n - 1/2 < |g| < n + 1/2`, with the fitted log-log decay rate.
pub fn decay_report(
    rho: &ConformalDensity,
    phi: &StepFunction,
    psi: &StepFunction,
    n_values: &[f64],
    cap: usize,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let eps = rho.epsilon();
    let (lphi, lpsi) = (phi.lipschitz(m, eps), psi.lipschitz(m, eps));
    let scale = lphi * psi.norm_inf() + lpsi * phi.norm_inf();
    let mut report = ExperimentReport::new(
        "matrix_coeff",
        &["n", "words", "max_error", "worst_word", "reference"],
    );
    report.param("D", rho.dimension());
    report.param("reference_slope", -1.0 / rho.dimension());
    report.param("lipschitz_phi", lphi);
    report.param("lipschitz_psi", lpsi);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &n in n_values {
        let words = m.annulus(n, 0.5, cap)?;
        let errs = par::map(exec, &words, |g| {
            (matrix_coefficient(rho, g, phi, psi) - coefficient_limit(rho, g, phi, psi)).abs()
        });
        let (worst, err) = errs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &e)| if e > best.1 { (i, e) } else { best });
        let reference = scale * (1.0 + n).powf(-1.0 / rho.dimension());
        report.push(row![n, words.len(), err, m.format(&words[worst]), reference]);
        if err > 0.0 {
            xs.push((1.0 + n).ln());
            ys.push(err.ln());
        }
    }
    if let Some(fit) = stats::fit_line(&xs, &ys) {
        report.summarize("slope", fit.slope);
    }
    Ok(report)
}

/// `||P_g||_1 e^{h|g|/2} / (1 + |g|)` for every `g` with `|g| <= r_max`.
pub fn p1_norm_report(
    rho: &ConformalDensity,
    r_max: f64,
    cap: usize,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let words = m.ball(r_max, cap)?;
    let vals = par::map(exec, &words, |g| {
        let n = p1_norm(rho, g);
        let inv = p1_norm(rho, &m.invert(g));
        (n, (n - inv).abs())
    });
    let mut report =
        ExperimentReport::new("p1norm", &["word", "length", "p1_norm", "normalized"]);
    report.param("r_max", r_max);
    let mut normalized = Vec::with_capacity(words.len());
    let mut asym: f64 = 0.0;
    for (g, (n, d)) in words.iter().zip(vals) {
        let v = n * (0.5 * rho.h() * g.wlen()).exp() / (1.0 + g.wlen());
        normalized.push(v);
        asym = asym.max(d);
        report.push(row![m.format(g), g.wlen(), n, v]);
    }
    if let Some((lo, hi)) = stats::min_max(&normalized) {
        report.summarize("min_ratio", lo);
        report.summarize("max_ratio", hi);
        report.summarize("spread", hi / lo);
    }
    report.summarize("max_inverse_asymmetry", asym);
    Ok(report)
}

/// `sum_{g in A_R(alpha)} P_g(xi) / ||P_g||_1`.
pub fn annulus_weight(
    rho: &ConformalDensity,
    r: f64,
    alpha: f64,
    xi: &BoundaryPoint,
    cap: usize,
) -> Result<f64> {
    let m = rho.model();
    Ok(m.annulus(r, alpha, cap)?
        .iter()
        .map(|g| {
            let p = (-0.5 * rho.h() * (g.wlen() - 2.0 * m.gromov_wb(g, xi))).exp();
            p / p1_norm(rho, g)
        })
        .sum())
}

pub fn annulus_weight_report(
    rho: &ConformalDensity,
    r_values: &[f64],
    alpha: f64,
    xi: &BoundaryPoint,
    cap: usize,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("annulus_weight", &["R", "sum", "ratio"]);
    report.param("alpha", alpha);
    report.param("xi", rho.model().format_point(xi));
    let mut ratios = Vec::new();
    for &r in r_values {
        let s = annulus_weight(rho, r, alpha, xi, cap)?;
        let ratio = s / (rho.h() * r).exp();
        ratios.push(ratio);
        report.push(row![r, s, ratio]);
    }
    if let Some((lo, hi)) = stats::min_max(&ratios) {
        report.summarize("min_ratio", lo);
        report.summarize("max_ratio", hi);
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
