//! Cocycles on the boundary, the invariant measure on distinct pairs, and
//! Hopf averages along the geodesic flow.
//!
//! In the tree model the Radon-Nikodym cocycle is exactly the Busemann
//! cocycle, so `rho = sigma` and `tau(g, xi, eta) = (g^{-1}, eta) - (g^{-1}, xi)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{BoundaryPoint, Cylinder};
use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::koopman::KernelStep;
use crate::par::{self, Exec};
use crate::report::ExperimentReport;
use crate::row;
use crate::stats;
use crate::words::{common_prefix_len, GroupModel, Letter, Word};

/// `sigma(g, xi) = 2 (g^{-1}, xi) - |g|`.
pub fn sigma(model: &GroupModel, g: &Word, xi: &BoundaryPoint) -> f64 {
    2.0 * model.gromov_wb(&model.invert(g), xi) - g.wlen()
}

/// `(1/h) ln d(g^{-1})_* mu / d mu` at `xi`.
pub fn rho_cocycle(rho: &ConformalDensity, g: &Word, xi: &BoundaryPoint) -> f64 {
    rho.rn_derivative(&rho.model().invert(g), xi).ln() / rho.h()
}

/// `tau(g, xi, eta) = (sigma(g, eta) - sigma(g, xi)) / 2`.
pub fn tau(model: &GroupModel, g: &Word, xi: &BoundaryPoint, eta: &BoundaryPoint) -> Result<f64> {
    if xi == eta {
        return Err(LabError::InvalidArgument(
            "tau needs two distinct boundary points".into(),
        ));
    }
    let gi = model.invert(g);
    Ok(model.gromov_wb(&gi, eta) - model.gromov_wb(&gi, xi))
}

/// A rectangle `[u] x [v]` of distinct pairs, with `u` and `v` not nested.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCylinder {
    u: Cylinder,
    v: Cylinder,
}

impl ProductCylinder {
    pub fn new(u: Cylinder, v: Cylinder) -> Result<Self> {
        if u.is_nested_with(&v) {
            return Err(LabError::InvalidArgument(format!(
                "nested cylinders {:?} and {:?}; refine before measuring",
                u.prefix().letters(),
                v.prefix().letters()
            )));
        }
        Ok(ProductCylinder { u, v })
    }

    pub fn parse(model: &GroupModel, u: &str, v: &str) -> Result<Self> {
        Self::new(Cylinder::new(model.parse(u)?), Cylinder::new(model.parse(v)?))
    }

    pub fn u(&self) -> &Cylinder {
        &self.u
    }

    pub fn v(&self) -> &Cylinder {
        &self.v
    }

    /// The Gromov product `(xi, eta)`, constant on the rectangle.
    pub fn gromov(&self, model: &GroupModel) -> f64 {
        let (a, b) = (self.u.prefix().letters(), self.v.prefix().letters());
        model.wlen_of(&a[..common_prefix_len(a, b)])
    }

    /// `g [u] x g [v]` as a list of rectangles.
    pub fn image(&self, model: &GroupModel, g: &Word) -> Vec<ProductCylinder> {
        let us = act_cylinder(model, g, self.u.prefix().letters());
        let vs = act_cylinder(model, g, self.v.prefix().letters());
        let mut out = Vec::with_capacity(us.len() * vs.len());
        for u in &us {
            for v in &vs {
                // images of disjoint sets are disjoint, so never nested
                out.push(ProductCylinder {
                    u: u.clone(),
                    v: v.clone(),
                });
            }
        }
        out
    }
}

/// `g [u]` as a disjoint union of cylinders.
pub fn act_cylinder(model: &GroupModel, g: &Word, u: &[Letter]) -> Vec<Cylinder> {
    assert!(!u.is_empty(), "the whole boundary is not a cylinder image case");
    let c = model.cancellation(g.letters(), u);
    let uw = model.make(u.to_vec());
    if c < u.len() {
        return vec![Cylinder::new(model.mul(g, &uw))];
    }
    // g = x u^{-1}: g [u] = x (boundary minus [last(u)^{-1}])
    let x = model.mul(g, &uw);
    let forb = model.inverse(*u.last().unwrap());
    model
        .letters()
        .filter(|&l| l != forb)
        .flat_map(|l| act_cylinder(model, &x, &[l]))
        .collect()
}

/// The measure `dm = e^{2h (xi, eta)} d mu(xi) d mu(eta)` on distinct pairs.
#[derive(Debug, Clone, Copy)]
pub struct BmsMeasure<'a> {
    rho: &'a ConformalDensity,
}

impl<'a> BmsMeasure<'a> {
    pub fn new(rho: &'a ConformalDensity) -> Self {
        BmsMeasure { rho }
    }

    pub fn mass(&self, pc: &ProductCylinder) -> f64 {
        let m = self.rho.model();
        (2.0 * self.rho.h() * pc.gromov(m)).exp()
            * self.rho.mu_cylinder(&pc.u)
            * self.rho.mu_cylinder(&pc.v)
    }

    /// Mass of `g ([u] x [v])`, summed over the refined image.
    pub fn image_mass(&self, pc: &ProductCylinder, g: &Word) -> f64 {
        pc.image(self.rho.model(), g).iter().map(|p| self.mass(p)).sum()
    }

    /// Mass of the window `{(xi, eta) : (xi, eta) = 0}`, where `m = mu x mu`.
    pub fn window_mass(&self) -> f64 {
        let m = self.rho.model();
        1.0 - m
            .letters()
            .map(|a| self.rho.initial(a).powi(2))
            .sum::<f64>()
    }

    /// `int f dm` for a kernel of bounded support.
    pub fn integral(&self, f: &KernelStep) -> Result<f64> {
        let m = self.rho.model();
        f.support_bound(m)?;
        let mut acc = 0.0;
        for (u, v, val) in f.rectangles() {
            if val == 0.0 {
                continue;
            }
            let pc = ProductCylinder::new(
                Cylinder::new(m.make(u)),
                Cylinder::new(m.make(v)),
            )?;
            acc += val * self.mass(&pc);
        }
        Ok(acc)
    }
}

/// Stationary letter distribution of the Markov chain that generates `mu`.
pub fn letter_frequencies(rho: &ConformalDensity) -> Vec<f64> {
    let m = rho.model();
    let n = m.alphabet_size();
    let mut p: Vec<f64> = m.letters().map(|a| rho.initial(a)).collect();
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for a in m.letters() {
            for b in m.letters() {
                if b != m.inverse(a) {
                    next[b as usize] += p[a as usize] * rho.transition(a, b);
                }
            }
        }
        // average with the previous step so period-two chains converge too
        let total: f64 = next.iter().sum();
        let next: Vec<f64> = next.iter().zip(&p).map(|(x, y)| 0.5 * (x / total + y)).collect();
        let diff = next.iter().zip(&p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        p = next;
        if diff < 1e-16 {
            break;
        }
    }
    p
}

/// Factor `c` with `J_a^{a+T}(f) -> c int f dm`: a geodesic vertex per
/// letter, counted per unit of length, against the mass of the window that
/// every vertex sees.
pub fn hopf_normalization(rho: &ConformalDensity) -> f64 {
    let m = rho.model();
    let freq = letter_frequencies(rho);
    let mean_len: f64 = m.letters().map(|a| freq[a as usize] * m.weight(a)).sum();
    1.0 / (mean_len * BmsMeasure::new(rho).window_mass())
}

/// A vertex of the geodesic between two boundary points: its word, flow
/// coordinate `t = 2 (x, eta) - |x|`, and the two letters that stay on the line.
#[derive(Debug, Clone)]
struct Vertex {
    x: Word,
    t: f64,
    along: [Letter; 2],
}

/// Vertices of the geodesic `(xi, eta)` with `t` in `[lo, hi]`.
fn geodesic_vertices(
    model: &GroupModel,
    xi: &BoundaryPoint,
    eta: &BoundaryPoint,
    lo: f64,
    hi: f64,
) -> Vec<Vertex> {
    let n = model.common_prefix_bb(xi, eta).expect("distinct points");
    let p = eta.prefix_letters(n);
    let cp = model.wlen_of(&p);
    let tol = model.tolerance();
    let mut out = Vec::new();
    // towards xi
    let mut letters = p.clone();
    let mut t = cp;
    loop {
        let m = letters.len();
        let next = xi.letter(m);
        letters.push(next);
        t -= model.weight(next);
        if t < lo - tol {
            break;
        }
        if t <= hi + tol {
            out.push(Vertex {
                x: model.make(letters.clone()),
                t,
                along: [model.inverse(next), xi.letter(m + 1)],
            });
        }
    }
    out.reverse();
    // the branch point and towards eta
    let mut letters = p;
    let mut t = cp;
    loop {
        let m = letters.len();
        if t > hi + tol {
            break;
        }
        if t >= lo - tol {
            let back = if m > n { model.inverse(letters[m - 1]) } else { xi.letter(n) };
            out.push(Vertex {
                x: model.make(letters.clone()),
                t,
                along: [back, eta.letter(m)],
            });
        }
        let l = eta.letter(m);
        letters.push(l);
        t += model.weight(l);
    }
    out
}

/// All `g` with `sigma(g, eta)` in `[a, b]` and `(g xi, g eta) <= m_bound`.
///
/// `g^{-1} = x w` with `x` on the geodesic `(xi, eta)` and `w` leaving it,
/// so `(g xi, g eta) = |w|` and `sigma(g, eta) = t(x) - |w|`. The
/// decomposition is unique, so no element is produced twice.
pub fn tube_enumerate(
    model: &GroupModel,
    xi: &BoundaryPoint,
    eta: &BoundaryPoint,
    a: f64,
    b: f64,
    m_bound: f64,
    cap: usize,
) -> Result<Vec<Word>> {
    if xi == eta {
        return Err(LabError::InvalidArgument("tube needs distinct endpoints".into()));
    }
    if a > b {
        return Ok(Vec::new());
    }
    let tol = model.tolerance();
    let mut out = Vec::new();
    for v in geodesic_vertices(model, xi, eta, a, b + m_bound) {
        let max_w = m_bound.min(v.t - a);
        let min_w = v.t - b;
        let mut w: Vec<Letter> = Vec::new();
        side_words(model, &v, &mut w, 0.0, max_w + tol, min_w - tol, &mut |w| {
            if out.len() >= cap {
                return Err(LabError::CapExceeded {
                    what: "enumerating a tube".into(),
                    cap,
                });
            }
            let y = model.mul(&v.x, &model.make(w.to_vec()));
            out.push(model.invert(&y));
            Ok(())
        })?;
    }
    Ok(out)
}

fn side_words(
    model: &GroupModel,
    v: &Vertex,
    w: &mut Vec<Letter>,
    wl: f64,
    max_w: f64,
    min_w: f64,
    emit: &mut dyn FnMut(&[Letter]) -> Result<()>,
) -> Result<()> {
    if wl > max_w {
        return Ok(());
    }
    if wl >= min_w {
        emit(w)?;
    }
    for l in model.letters() {
        let blocked = match w.last() {
            None => v.along.contains(&l),
            Some(&prev) => l == model.inverse(prev),
        };
        if blocked {
            continue;
        }
        let nl = wl + model.weight(l);
        if nl > max_w {
            continue;
        }
        w.push(l);
        side_words(model, v, w, nl, max_w, min_w, emit)?;
        w.pop();
    }
    Ok(())
}

/// `J_a^{a+T}(f) = (1/T) sum_{sigma(g, eta) in [a, a+T]} f(g xi, g eta)`.
pub fn hopf_average_j(
    model: &GroupModel,
    f: &KernelStep,
    xi: &BoundaryPoint,
    eta: &BoundaryPoint,
    a: f64,
    t: f64,
    cap: usize,
) -> Result<f64> {
    check_length(t)?;
    let m_bound = f.support_bound(model)?;
    let tube = tube_enumerate(model, xi, eta, a, a + t, m_bound, cap)?;
    Ok(tube
        .iter()
        .map(|g| f.eval(&model.act(g, xi), &model.act(g, eta)))
        .sum::<f64>()
        / t)
}

/// `I_a^{a+T}(f)`: the same average over the band `tau(g, xi, eta) in [a, a+T]`.
pub fn hopf_average_i(
    model: &GroupModel,
    f: &KernelStep,
    xi: &BoundaryPoint,
    eta: &BoundaryPoint,
    a: f64,
    t: f64,
    cap: usize,
) -> Result<f64> {
    check_length(t)?;
    let m_bound = f.support_bound(model)?;
    let gp = model.gromov_bb(xi, eta);
    // tau = sigma(g, eta) + (g xi, g eta) - (xi, eta)
    let tube = tube_enumerate(model, xi, eta, a + gp - m_bound, a + t + gp, m_bound, cap)?;
    let tol = model.tolerance();
    let mut acc = 0.0;
    for g in &tube {
        let tv = tau(model, g, xi, eta)?;
        if tv >= a - tol && tv <= a + t + tol {
            acc += f.eval(&model.act(g, xi), &model.act(g, eta));
        }
    }
    Ok(acc / t)
}

fn check_length(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!(
            "averaging length must be positive, got {t}"
        )))
    }
}

/// Does `g D_{theta,k}` meet `D_{theta,k}`, where
/// `D = {(xi, eta, t) : (xi, eta) < m_bound, |t| < k}`?
///
/// Only where `xi` and `eta` leave the path of `g^{-1}` matters, so the
/// question is decided over those two exit depths.
pub fn window_returns(model: &GroupModel, g: &Word, m_bound: f64, k: f64) -> bool {
    let y = model.invert(g);
    let ys = y.letters();
    let n = ys.len();
    let mut w = vec![0.0; n + 1];
    for i in 0..n {
        w[i + 1] = w[i] + model.weight(ys[i]);
    }
    let exits = |i: usize| -> usize {
        model
            .letters()
            .filter(|&l| {
                (i == n || l != ys[i]) && (i == 0 || l != model.inverse(ys[i - 1]))
            })
            .count()
    };
    let avail: Vec<usize> = (0..=n).map(exits).collect();
    for i in 0..=n {
        for j in 0..=n {
            let ok = if i == j { avail[i] >= 2 } else { avail[i] >= 1 && avail[j] >= 1 };
            if !ok {
                continue;
            }
            let cp = w[i.min(j)];
            let off = y.wlen() - w[i.max(j)];
            if cp < m_bound && off < m_bound && (w[j] - w[i]).abs() < 2.0 * k {
                return true;
            }
        }
    }
    false
}

fn seeded(seed: u64, i: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sample_pair<R: Rng + ?Sized>(
    rho: &ConformalDensity,
    depth: usize,
    max_gromov: Option<f64>,
    rng: &mut R,
) -> Result<(BoundaryPoint, BoundaryPoint)> {
    let m = rho.model();
    loop {
        let xi = rho.sample_point(depth, rng)?;
        let eta = rho.sample_point(depth, rng)?;
        if xi == eta {
            continue;
        }
        match max_gromov {
            Some(b) if m.gromov_bb(&xi, &eta) >= b => continue,
            _ => return Ok((xi, eta)),
        }
    }
}

/// Strict cocycle identities for `sigma` and `tau` and the identity `rho = sigma`.
pub fn cocycle_report(
    rho: &ConformalDensity,
    trials: usize,
    max_len: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let rows = par::map_range(exec, trials, |i| -> Result<_> {
        let mut rng = seeded(seed, i as u64);
        let (n1, n2) = (rng.random_range(0..=max_len), rng.random_range(0..=max_len));
        let g = m.random_word(&mut rng, n1);
        let h = m.random_word(&mut rng, n2);
        let (xi, eta) = sample_pair(rho, max_len + 4, None, &mut rng)?;
        let (hxi, heta) = (m.act(&h, &xi), m.act(&h, &eta));
        let gh = m.mul(&g, &h);
        let tau_err = (tau(m, &gh, &xi, &eta)? - tau(m, &g, &hxi, &heta)? - tau(m, &h, &xi, &eta)?).abs();
        let sigma_err = (sigma(m, &gh, &xi) - sigma(m, &g, &hxi) - sigma(m, &h, &xi)).abs();
        let rho_err = (rho_cocycle(rho, &g, &xi) - sigma(m, &g, &xi)).abs();
        Ok(row![i, m.format(&g), m.format(&h), tau_err, sigma_err, rho_err])
    });
    let mut report = ExperimentReport::new(
        "cocycle",
        &["trial", "g", "h", "tau_cocycle_error", "sigma_cocycle_error", "rho_sigma_error"],
    );
    report.param("trials", trials);
    report.param("max_len", max_len);
    report.param("seed", seed as i64);
    for r in rows {
        report.push(r?);
    }
    let max_of = |c: &str| report.column(c).into_iter().fold(0.0, f64::max);
    let (t, s, r) = (
        max_of("tau_cocycle_error"),
        max_of("sigma_cocycle_error"),
        max_of("rho_sigma_error"),
    );
    report.summarize("max_tau_cocycle_error", t);
    report.summarize("max_sigma_cocycle_error", s);
    report.summarize("max_rho_sigma_error", r);
    report.check("tau_cocycle", t < 1e-9, format!("max error {t:e}"));
    report.check("rho_equals_sigma", r < 1e-9, format!("max error {r:e}"));
    Ok(report)
}

/// `|tau(g, xi, eta) - sigma(g, eta)|` over admissible triples, where both
/// `(xi, eta)` and `(g xi, g eta)` are below `m_bound`. In the tree the gap
/// equals `|(g xi, g eta) - (xi, eta)|`.
pub fn tau_sigma_gap_report(
    rho: &ConformalDensity,
    m_bound: f64,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    if !(m_bound > 0.0) {
        return Err(LabError::InvalidArgument("M must be positive".into()));
    }
    let rows = par::map_range(exec, samples, |i| -> Result<_> {
        let mut rng = seeded(seed, i as u64);
        let (xi, eta) = sample_pair(rho, 16, Some(m_bound), &mut rng)?;
        // g^{-1} = x w with x on the geodesic and |w| < M
        let verts = geodesic_vertices(m, &xi, &eta, -6.0, 6.0);
        let v = &verts[rng.random_range(0..verts.len())];
        let mut w: Vec<Letter> = Vec::new();
        let mut wl = 0.0;
        loop {
            let choices: Vec<Letter> = m
                .letters()
                .filter(|&l| match w.last() {
                    None => !v.along.contains(&l),
                    Some(&p) => l != m.inverse(p),
                })
                .filter(|&l| wl + m.weight(l) < m_bound)
                .collect();
            if choices.is_empty() || rng.random_bool(0.3) {
                break;
            }
            let l = choices[rng.random_range(0..choices.len())];
            wl += m.weight(l);
            w.push(l);
        }
        let g = m.invert(&m.mul(&v.x, &m.make(w)));
        let (gxi, geta) = (m.act(&g, &xi), m.act(&g, &eta));
        let before = m.gromov_bb(&xi, &eta);
        let after = m.gromov_bb(&gxi, &geta);
        let gap = (tau(m, &g, &xi, &eta)? - sigma(m, &g, &eta)).abs();
        let identity_error = (gap - (after - before).abs()).abs();
        Ok(row![i, m.format(&g), before, after, gap, identity_error])
    });
    let mut report = ExperimentReport::new(
        "tau_sigma_gap",
        &["sample", "g", "gromov_before", "gromov_after", "gap", "tree_identity_error"],
    );
    report.param("M", m_bound);
    report.param("samples", samples);
    report.param("seed", seed as i64);
    for r in rows {
        report.push(r?);
    }
    let max_gap = report.column("gap").into_iter().fold(0.0, f64::max);
    let max_id = report.column("tree_identity_error").into_iter().fold(0.0, f64::max);
    report.summarize("max_gap", max_gap);
    report.summarize("bound", 2.0 * m_bound);
    report.summarize("max_tree_identity_error", max_id);
    report.check(
        "gap_bounded",
        max_gap <= 2.0 * m_bound + 1e-9,
        format!("max gap {max_gap} against 2M = {}", 2.0 * m_bound),
    );
    Ok(report)
}

/// Closed-form examples and invariance of the measure under random `g`.
pub fn bms_report(
    rho: &ConformalDensity,
    trials: usize,
    max_len: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let bms = BmsMeasure::new(rho);
    let rows = par::map_range(exec, trials, |i| {
        let mut rng = seeded(seed, i as u64);
        let pc = loop {
            let (a, b) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let u = m.random_word(&mut rng, a);
            let v = m.random_word(&mut rng, b);
            if let Ok(pc) = ProductCylinder::new(Cylinder::new(u), Cylinder::new(v)) {
                break pc;
            }
        };
        let n = rng.random_range(0..=max_len);
        let g = m.random_word(&mut rng, n);
        let mass = bms.mass(&pc);
        let pieces = pc.image(m, &g);
        let image: f64 = pieces.iter().map(|p| bms.mass(p)).sum();
        let err = (image - mass).abs() / mass;
        row![
            i,
            m.format(&g),
            m.format(pc.u().prefix()),
            m.format(pc.v().prefix()),
            mass,
            image,
            pieces.len(),
            err
        ]
    });
    let mut report = ExperimentReport::new(
        "bms",
        &["trial", "g", "u", "v", "mass", "image_mass", "pieces", "relative_error"],
    );
    report.param("trials", trials);
    report.param("max_len", max_len);
    report.param("seed", seed as i64);
    for r in rows {
        report.push(r);
    }
    let max_err = report.column("relative_error").into_iter().fold(0.0, f64::max);
    report.summarize("max_relative_error", max_err);
    report.summarize("window_mass", bms.window_mass());
    if m.rank() >= 2 {
        let ab = bms.mass(&ProductCylinder::parse(m, "a", "b")?);
        let ab2 = bms.mass(&ProductCylinder::parse(m, "ab", "aB")?);
        report.summarize("mass_a_b", ab);
        report.summarize("mass_ab_aB", ab2);
    }
    report.check("invariance", max_err < 1e-12, format!("max relative error {max_err:e}"));
    Ok(report)
}

/// `|tube(xi, eta, [0, L], M)| / L` averaged over sampled pairs.
pub fn tube_census_report(
    rho: &ConformalDensity,
    m_bound: f64,
    lengths: &[f64],
    pairs: usize,
    seed: u64,
    cap: usize,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let depth = (lengths.iter().fold(0.0f64, |a, &b| a.max(b)) / m.min_weight()).ceil() as usize + 4;
    let mut rng = seeded(seed, 0);
    let sampled: Vec<_> = (0..pairs)
        .map(|_| sample_pair(rho, depth, None, &mut rng))
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("tube_census", &["L", "mean_count", "per_length"]);
    report.param("M", m_bound);
    report.param("pairs", pairs);
    report.param("seed", seed as i64);
    let mut tail = Vec::new();
    for &l in lengths {
        let mut total = 0usize;
        for (xi, eta) in &sampled {
            total += tube_enumerate(m, xi, eta, 0.0, l, m_bound, cap)?.len();
        }
        let mean = total as f64 / pairs as f64;
        if l >= 10.0 {
            tail.push(mean / l);
        }
        report.push(row![l, mean, mean / l]);
    }
    if let Some((lo, hi)) = stats::min_max(&tail) {
        report.summarize("spread_l_ge_10", hi / lo);
    }
    Ok(report)
}

/// Which `g` move `D_{theta,k}` back onto itself, shell by shell up to `r_max`.
pub fn properness_report(
    rho: &ConformalDensity,
    theta: f64,
    k: f64,
    r_max: f64,
    cap: usize,
) -> Result<ExperimentReport> {
    let m = rho.model();
    if !(theta > 0.0) || !(k > 0.0) {
        return Err(LabError::InvalidArgument("theta and k must be positive".into()));
    }
    // d(xi, eta) > theta  <=>  (xi, eta) < -ln(theta) / eps
    let m_bound = -theta.ln() / rho.epsilon();
    let words = m.ball(r_max, cap)?;
    let mut report = ExperimentReport::new("properness", &["length", "words", "hits"]);
    report.param("theta", theta);
    report.param("k", k);
    report.param("r_max", r_max);
    report.param("gromov_bound", m_bound);
    let mut shells: Vec<(f64, usize, usize)> = Vec::new();
    let mut max_hit: f64 = f64::NEG_INFINITY;
    for g in &words {
        let hit = window_returns(m, g, m_bound, k);
        if hit {
            max_hit = max_hit.max(g.wlen());
        }
        match shells.last_mut() {
            Some(s) if m.approx_eq(s.0, g.wlen()) => {
                s.1 += 1;
                s.2 += hit as usize;
            }
            _ => shells.push((g.wlen(), 1, hit as usize)),
        }
    }
    let total: usize = shells.iter().map(|s| s.2).sum();
    for (len, n, hits) in shells {
        report.push(row![len, n, hits]);
    }
    let bound = 2.0 * m_bound + 2.0 * k;
    report.summarize("hits", total);
    report.summarize("bound", bound);
    if total > 0 {
        report.summarize("max_hit_length", max_hit);
        report.check(
            "bounded",
            max_hit < bound && m.lt(max_hit, r_max),
            format!("largest return {max_hit}, bound {bound}, enumerated to {r_max}"),
        );
    } else {
        report.check("bounded", true, "no returns".to_string());
    }
    Ok(report)
}

/// Parameters of [`ergodic_experiment`].
#[derive(Debug, Clone)]
pub struct ErgodicParams {
    pub pairs: usize,
    pub t_grid: Vec<f64>,
    pub start: f64,
    pub seed: u64,
    pub cap: usize,
    /// Letters shared by `xi` and its perturbation in the contraction diagnostic.
    pub perturb_depth: usize,
}

/// Hopf averages `J_a^{a+T}(f)` for pairs drawn from `m` on the window `(xi, eta) = 0`.
pub fn ergodic_experiment(
    rho: &ConformalDensity,
    f: &KernelStep,
    params: &ErgodicParams,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let bms = BmsMeasure::new(rho);
    let target = bms.integral(f)?;
    let factor = hopf_normalization(rho);
    let model_target = factor * target;
    let m_bound = f.support_bound(m)?;
    let t_max = params.t_grid.iter().fold(0.0f64, |a, &b| a.max(b));
    let depth = ((params.start.max(0.0) + t_max + m_bound) / m.min_weight()).ceil() as usize
        + params.perturb_depth
        + 8;
    let eps = rho.epsilon();
    let vm = rho.visual_metric();
    let per_pair = par::map_range(exec, params.pairs, |i| -> Result<_> {
        let mut rng = seeded(params.seed, i as u64);
        let (xi, eta) = sample_pair(rho, depth, Some(m.min_weight() * 0.5), &mut rng)?;
        let mut js = Vec::with_capacity(params.t_grid.len());
        for &t in &params.t_grid {
            js.push(hopf_average_j(m, f, &xi, &eta, params.start, t, params.cap)?);
        }
        // contraction along the tube for a perturbation of xi
        let q = params.perturb_depth;
        let mut pl = xi.prefix_letters(q + 1);
        let old = pl[q];
        let forb = if q > 0 { Some(m.inverse(pl[q - 1])) } else { None };
        pl[q] = m.letters().find(|&l| l != old && Some(l) != forb).unwrap();
        let xi2 = m.point_in(&pl);
        let tube = tube_enumerate(m, &xi, &eta, params.start, params.start + t_max, m_bound, params.cap)?;
        let contraction = tube
            .iter()
            .map(|g| {
                vm.distance(m, &m.act(g, &xi), &m.act(g, &xi2)) * (eps * sigma(m, g, &eta)).exp()
            })
            .fold(0.0, f64::max);
        Ok((js, contraction))
    });
    let mut report = ExperimentReport::new(
        "ergodic",
        &["pair", "T", "J", "relative_error", "relative_error_normalized"],
    );
    report.param("pairs", params.pairs);
    report.param("start", params.start);
    report.param("seed", params.seed as i64);
    report.param("perturb_depth", params.perturb_depth);
    report.param(
        "t_grid",
        params.t_grid.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
    );
    let mut by_t: Vec<Vec<f64>> = vec![Vec::new(); params.t_grid.len()];
    let mut contraction: f64 = 0.0;
    for (i, r) in per_pair.into_iter().enumerate() {
        let (js, c) = r?;
        contraction = contraction.max(c);
        for (k, (&t, &j)) in params.t_grid.iter().zip(&js).enumerate() {
            by_t[k].push(j);
            report.push(row![
                i,
                t,
                j,
                (j - target).abs() / target,
                (j - model_target).abs() / model_target
            ]);
        }
    }
    report.summarize("integral", target);
    report.summarize("normalization", factor);
    report.summarize("normalized_target", model_target);
    report.summarize("contraction_max", contraction);
    let rel = |xs: &[f64], target: f64| -> f64 {
        let errs: Vec<f64> = xs.iter().map(|j| (j - target).abs() / target).collect();
        stats::median(&errs).unwrap_or(f64::NAN)
    };
    let mut med_err = Vec::new();
    let mut med_err_norm = Vec::new();
    for (k, &t) in params.t_grid.iter().enumerate() {
        let med = stats::median(&by_t[k]).unwrap_or(f64::NAN);
        report.summarize(&format!("median_J_T{t}"), med);
        med_err.push(rel(&by_t[k], target));
        med_err_norm.push(rel(&by_t[k], model_target));
        report.summarize(&format!("median_relative_error_T{t}"), *med_err.last().unwrap());
    }
    let last_med = by_t.last().and_then(|v| stats::median(v)).unwrap_or(f64::NAN);
    let final_err = (last_med - target).abs() / target;
    let final_err_norm = (last_med - model_target).abs() / model_target;
    report.summarize("final_relative_error", final_err);
    report.summarize("final_relative_error_normalized", final_err_norm);
    report.summarize("median_errors_nonincreasing", stats::nonincreasing(&med_err, 0.0));
    report.summarize(
        "median_errors_normalized_nonincreasing",
        stats::nonincreasing(&med_err_norm, 0.0),
    );
    report.check(
        "converges_to_integral",
        final_err <= 0.25,
        format!("median J {last_med} against int f dm = {target}"),
    );
    report.check(
        "converges_to_normalized_target",
        final_err_norm <= 0.25,
        format!("median J {last_med} against {factor} * int f dm = {model_target}"),
    );
    Ok(report)
}

#[cfg(test)]
mod tests;
