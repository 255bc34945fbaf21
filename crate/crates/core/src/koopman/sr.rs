//! The approximants `S_R = sum_{(g,h) in F^2} w_{g,h} sum_{k in U_{g,h}} pi~(k)`.
//!
//! `F` is a net in `A_R(alpha)`. Its shadows are cut into atoms (the leaves of
//! the trie spanned by the shadow prefixes) and each atom goes to the first
//! member, in length-lex order, whose shadow contains it. `V_{g,h}` is the
//! product of the atoms of `g` and of `h`, so `sum w_{g,h} |U_{g,h}| = int K`.
//! `U_{g,h}` collects the products `g b h^{-1}`, `|b| <= tau'`, that keep
//! length above `|g| + |h| - 3 tau'`.
//!
//! Every `k` is stored once in a sorted arena with its total weight
//! `W(k) = sum of w_{g,h}` over pairs whose U-set contains it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::KernelStep;
use super::net::{build_net, NetFamily};
use super::{matrix_coefficient, p1_norm};
use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::par::{self, Exec};
use crate::report::ExperimentReport;
use crate::row;
use crate::step::StepFunction;
use crate::words::{GroupModel, Letter, Word};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrParams {
    pub r: f64,
    pub alpha: f64,
    pub separation: f64,
    pub sigma0: f64,
    pub tau_prime: f64,
    pub cap: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    offset: usize,
    len: usize,
    weight: f64,
    pair: usize,
}

/// One distinct `k` with its merged weight and `||P_k||_1`.
#[derive(Debug, Clone)]
pub struct SrTerm {
    pub k: Word,
    pub weight: f64,
    pub p1: f64,
    /// Number of pairs `(g, h)` whose U-set contains `k`.
    pub multiplicity: u32,
}

#[derive(Debug, Clone)]
pub struct SrOperator {
    pub net: NetFamily,
    pub tau_prime: f64,
    /// Pairs with both `V_g` and `V_h` nonempty.
    pub active_pairs: usize,
    pub u_min: usize,
    pub u_max: usize,
    /// Distinct `k` lying in more than one U-set of an active pair.
    pub overlaps: usize,
    /// `sum_{g,h} int_{V_{g,h}} K`, equal to `int K` when the atoms partition.
    pub total_mass: f64,
    pub terms: Vec<SrTerm>,
}

/// Leaves of the trie spanned by the given prefixes.
fn atoms(model: &GroupModel, prefixes: &[&[Letter]]) -> Vec<Vec<Letter>> {
    fn go(
        model: &GroupModel,
        path: &mut Vec<Letter>,
        prefixes: &[&[Letter]],
        out: &mut Vec<Vec<Letter>>,
    ) {
        let deeper: Vec<&[Letter]> = prefixes
            .iter()
            .copied()
            .filter(|p| p.len() > path.len() && p.starts_with(path))
            .collect();
        if deeper.is_empty() {
            out.push(path.clone());
            return;
        }
        let forb = path.last().map(|&l| model.inverse(l));
        for b in model.letters() {
            if Some(b) == forb {
                continue;
            }
            path.push(b);
            go(model, path, &deeper, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(model, &mut Vec::new(), prefixes, &mut out);
    out
}

/// The elements of `U_{g,h}` in ball order.
pub fn u_set(model: &GroupModel, g: &Word, h: &Word, ball: &[Word], tau_prime: f64) -> Vec<Word> {
    let hinv = model.invert(h);
    let floor = g.wlen() + h.wlen() - 3.0 * tau_prime;
    ball.iter()
        .map(|b| model.mul(&model.mul(g, b), &hinv))
        .filter(|k| model.gt(k.wlen(), floor))
        .collect()
}

fn u_nonempty(model: &GroupModel, g: &Word, h: &Word, ball: &[Word], tau_prime: f64) -> bool {
    let hinv = model.invert(h);
    let floor = g.wlen() + h.wlen() - 3.0 * tau_prime;
    ball.iter()
        .any(|b| model.gt(model.mul(&model.mul(g, b), &hinv).wlen(), floor))
}

/// First pair of net members with an empty U-set.
pub fn first_empty_pair(
    model: &GroupModel,
    members: &[Word],
    tau_prime: f64,
    cap: usize,
    exec: Exec,
) -> Result<Option<(Word, Word)>> {
    let ball = model.ball(tau_prime, cap)?;
    let found = par::map(exec, members, |g| {
        members
            .iter()
            .find(|h| !u_nonempty(model, g, h, &ball, tau_prime))
            .cloned()
    });
    Ok(members
        .iter()
        .zip(found)
        .find_map(|(g, h)| h.map(|h| (g.clone(), h))))
}

/// Smallest multiple of the largest weight for which every U-set of the net is nonempty.
pub fn auto_tau_prime(model: &GroupModel, net: &NetFamily, cap: usize, exec: Exec) -> Result<f64> {
    for j in 1..=16 {
        let t = j as f64 * model.max_weight();
        if first_empty_pair(model, &net.members, t, cap, exec)?.is_none() {
            return Ok(t);
        }
    }
    Err(LabError::InvalidArgument(
        "no tau' up to 16 times the largest weight makes every U-set nonempty".into(),
    ))
}

impl SrOperator {
    pub fn build(
        rho: &ConformalDensity,
        kernel: &KernelStep,
        params: &SrParams,
        exec: Exec,
    ) -> Result<Self> {
        let m = rho.model();
        let net = build_net(m, params.r, params.alpha, params.separation, params.sigma0, params.cap)?;
        let tp = params.tau_prime;
        if let Some((g, h)) = first_empty_pair(m, &net.members, tp, params.cap, exec)? {
            return Err(LabError::EmptyUSet {
                g: m.format(&g),
                h: m.format(&h),
                tau_prime: tp,
            });
        }
        let shadows = net.shadows(m)?;
        let prefixes: Vec<&[Letter]> = shadows.iter().map(|c| c.prefix().letters()).collect();
        let mut v_sets: Vec<Vec<Vec<Letter>>> = vec![Vec::new(); net.members.len()];
        for atom in atoms(m, &prefixes) {
            let owner = prefixes
                .iter()
                .position(|p| atom.starts_with(p))
                .expect("net shadows cover the boundary");
            v_sets[owner].push(atom);
        }
        let active: Vec<usize> = (0..net.members.len()).filter(|&i| !v_sets[i].is_empty()).collect();
        let ball = m.ball(tp, params.cap)?;
        let n_active = active.len();

        // per active g: (letters arena, entries, u sizes, mass)
        let chunks = par::map(exec, &active, |&gi| {
            let g = &net.members[gi];
            let mut arena: Vec<Letter> = Vec::new();
            let mut entries = Vec::new();
            let mut sizes = Vec::with_capacity(n_active);
            let mut mass = 0.0;
            for &hi in &active {
                let h = &net.members[hi];
                let mut integral = 0.0;
                for a in &v_sets[gi] {
                    for b in &v_sets[hi] {
                        integral += kernel.integrate_rect(rho, a, b);
                    }
                }
                mass += integral;
                let u = u_set(m, g, h, &ball, tp);
                sizes.push(u.len());
                let w = integral / u.len() as f64;
                let pair = gi * net.members.len() + hi;
                for k in u {
                    entries.push(Entry {
                        offset: arena.len(),
                        len: k.len(),
                        weight: w,
                        pair,
                    });
                    arena.extend_from_slice(k.letters());
                }
            }
            (arena, entries, sizes, mass)
        });

        let mut arena: Vec<Letter> = Vec::new();
        let mut entries: Vec<Entry> = Vec::new();
        let (mut u_min, mut u_max) = (usize::MAX, 0);
        let mut total_mass = 0.0;
        for (a, es, sizes, mass) in chunks {
            let base = arena.len();
            arena.extend_from_slice(&a);
            entries.extend(es.into_iter().map(|mut e| {
                e.offset += base;
                e
            }));
            for s in sizes {
                u_min = u_min.min(s);
                u_max = u_max.max(s);
            }
            total_mass += mass;
        }
        let key = |e: &Entry| &arena[e.offset..e.offset + e.len];
        entries.sort_by(|x, y| key(x).cmp(key(y)).then(x.pair.cmp(&y.pair)));

        let mut terms: Vec<SrTerm> = Vec::new();
        let mut overlaps = 0;
        let mut i = 0;
        while i < entries.len() {
            let mut j = i + 1;
            while j < entries.len() && key(&entries[j]) == key(&entries[i]) {
                j += 1;
            }
            let weight: f64 = entries[i..j].iter().map(|e| e.weight).sum();
            if j - i > 1 {
                overlaps += 1;
            }
            let k = m.word(key(&entries[i])).expect("U-set elements are reduced");
            terms.push(SrTerm {
                k,
                weight,
                p1: 0.0,
                multiplicity: (j - i) as u32,
            });
            i = j;
        }
        let p1s = par::map(exec, &terms, |t| p1_norm(rho, &t.k));
        for (t, p) in terms.iter_mut().zip(p1s) {
            t.p1 = p;
        }
        Ok(SrOperator {
            net,
            tau_prime: tp,
            active_pairs: n_active * n_active,
            u_min: if u_min == usize::MAX { 0 } else { u_min },
            u_max,
            overlaps,
            total_mass,
            terms,
        })
    }

    pub fn disjoint(&self) -> bool {
        self.overlaps == 0
    }

    /// `<S_R phi, psi>`.
    pub fn pairing(
        &self,
        rho: &ConformalDensity,
        phi: &StepFunction,
        psi: &StepFunction,
        exec: Exec,
    ) -> f64 {
        par::sum(exec, &self.terms, |t| {
            if t.weight == 0.0 {
                0.0
            } else {
                t.weight * matrix_coefficient(rho, &t.k, phi, psi)
            }
        })
    }

    /// `||S_R 1||_inf`.
    pub fn sup_s1(&self, rho: &ConformalDensity) -> f64 {
        let items: Vec<(&[Letter], f64)> = self
            .terms
            .iter()
            .map(|t| (t.k.letters(), t.weight / t.p1 * (-0.5 * rho.h() * t.k.wlen()).exp()))
            .collect();
        sup_of_sum(rho, &items)
    }

    /// `||S_R^* 1||_inf`, using `pi~(k)^* = pi~(k^{-1})` and `||P_k||_1 = ||P_{k^{-1}}||_1`.
    pub fn sup_s1_adjoint(&self, rho: &ConformalDensity) -> f64 {
        let m = rho.model();
        let mut inv: Vec<(Vec<Letter>, f64)> = self
            .terms
            .iter()
            .map(|t| {
                (
                    m.invert(&t.k).into_letters(),
                    t.weight / t.p1 * (-0.5 * rho.h() * t.k.wlen()).exp(),
                )
            })
            .collect();
        inv.sort_by(|a, b| a.0.cmp(&b.0));
        let items: Vec<(&[Letter], f64)> = inv.iter().map(|(k, c)| (k.as_slice(), *c)).collect();
        sup_of_sum(rho, &items)
    }

    /// Schur-test bound `sqrt(||S_R 1||_inf ||S_R^* 1||_inf)` on the operator norm.
    pub fn norm_bound(&self, rho: &ConformalDensity) -> f64 {
        (self.sup_s1(rho) * self.sup_s1_adjoint(rho)).sqrt()
    }

    /// Largest `|<S_R f, f'>| / (||f|| ||f'||)` over `f = f' = 1` and random
    /// step functions of the given depth.
    pub fn norm_lower_estimate(
        &self,
        rho: &ConformalDensity,
        samples: usize,
        depth: usize,
        seed: u64,
        exec: Exec,
    ) -> f64 {
        let m = rho.model();
        let one = StepFunction::constant(m, 1.0);
        let mut best = self.pairing(rho, &one, &one, exec).abs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let f = StepFunction::from_depth(m, depth, |_| rng.random_range(-1.0..1.0));
            let g = StepFunction::from_depth(m, depth, |_| rng.random_range(-1.0..1.0));
            let denom = f.norm2(rho) * g.norm2(rho);
            if denom > 0.0 {
                best = best.max(self.pairing(rho, &f, &g, exec).abs() / denom);
            }
        }
        best
    }
}

/// `sup_xi sum_k c_k exp(h |k ^ xi|)` for a lexicographically sorted list of
/// `(k, c_k)`, where `k ^ xi` is the common prefix. Each node of the virtual
/// trie of the `k` contributes `exp(h |w|)` times the mass of the `k` that
/// leave the chosen branch at `w`.
fn sup_of_sum(rho: &ConformalDensity, items: &[(&[Letter], f64)]) -> f64 {
    fn go(
        rho: &ConformalDensity,
        items: &[(&[Letter], f64)],
        depth: usize,
        wl: f64,
        last: Option<Letter>,
    ) -> (f64, f64) {
        let m = rho.model();
        let total: f64 = items.iter().map(|(_, c)| c).sum();
        let scale = (rho.h() * wl).exp();
        // items ending here sort first
        let mut i = items.iter().take_while(|(k, _)| k.len() == depth).count();
        let mut best = f64::NEG_INFINITY;
        let mut children = 0;
        while i < items.len() {
            let l = items[i].0[depth];
            let mut j = i + 1;
            while j < items.len() && items[j].0[depth] == l {
                j += 1;
            }
            let (a, f) = go(rho, &items[i..j], depth + 1, wl + m.weight(l), Some(l));
            best = best.max(scale * (total - a) + f);
            children += 1;
            i = j;
        }
        let admissible = m.alphabet_size() - usize::from(last.is_some());
        if children < admissible {
            best = best.max(scale * total);
        }
        (total, best)
    }
    debug_assert!(items.windows(2).all(|w| w[0].0 <= w[1].0));
    if items.is_empty() {
        return 0.0;
    }
    go(rho, items, 0, 0.0, None).1
}

/// Brute-force counterpart of [`SrOperator::sup_s1`] used by the tests: evaluates
/// `S_R 1` on the canonical points of all cylinders at `depth`.
pub fn s1_max_on_points(op: &SrOperator, rho: &ConformalDensity, depth: usize, cap: usize) -> Result<f64> {
    let m = rho.model();
    let mut best: f64 = 0.0;
    for w in m.words_of_length(depth, cap)? {
        let xi = m.point_in(w.letters());
        let v: f64 = op
            .terms
            .iter()
            .map(|t| {
                let p = (-0.5 * rho.h() * (t.k.wlen() - 2.0 * m.gromov_wb(&t.k, &xi))).exp();
                t.weight / t.p1 * p
            })
            .sum();
        best = best.max(v);
    }
    Ok(best)
}

/// `|<S_R phi, psi> - <T_K phi, psi>|` over `r_values`.
#[allow(clippy::too_many_arguments)]
pub fn sr_convergence_report(
    rho: &ConformalDensity,
    kernel: &KernelStep,
    phi: &StepFunction,
    psi: &StepFunction,
    base: &SrParams,
    r_values: &[f64],
    exec: Exec,
) -> Result<ExperimentReport> {
    let target = kernel.apply(rho, phi).inner(psi, rho);
    let mut report = ExperimentReport::new(
        "kernel_convergence",
        &["R", "members", "distinct_k", "overlaps", "pairing", "target", "error"],
    );
    report.param("tau_prime", base.tau_prime);
    report.param("separation", base.separation);
    report.param("alpha", base.alpha);
    report.param("sigma0", base.sigma0);
    report.param("target", target);
    let mut errors = Vec::new();
    for &r in r_values {
        let op = SrOperator::build(rho, kernel, &SrParams { r, ..*base }, exec)?;
        let value = op.pairing(rho, phi, psi, exec);
        let err = (value - target).abs();
        errors.push(err);
        report.push(row![
            r,
            op.net.members.len(),
            op.terms.len(),
            op.overlaps,
            value,
            target,
            err
        ]);
    }
    report.summarize("target", target);
    if let Some(&last) = errors.last() {
        report.summarize("final_error", last);
    }
    Ok(report)
}

/// Sup-norm bounds, Monte-Carlo lower estimates and structural checks over `r_values`.
#[allow(clippy::too_many_arguments)]
pub fn sr_norm_report(
    rho: &ConformalDensity,
    kernel: &KernelStep,
    base: &SrParams,
    r_values: &[f64],
    mc_samples: usize,
    mc_depth: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExperimentReport> {
    let m = rho.model();
    let one = StepFunction::constant(m, 1.0);
    let target = kernel.apply(rho, &one).inner(&one, rho);
    let mut report = ExperimentReport::new(
        "sr_norm",
        &[
            "R",
            "members",
            "active_pairs",
            "u_min",
            "u_max",
            "overlaps",
            "sup_s1",
            "sup_s1_adjoint",
            "norm_bound",
            "mc_lower",
            "pairing_one",
            "pairing_error",
        ],
    );
    report.param("tau_prime", base.tau_prime);
    report.param("separation", base.separation);
    report.param("alpha", base.alpha);
    report.param("sigma0", base.sigma0);
    report.param("mc_samples", mc_samples);
    report.param("mc_depth", mc_depth);
    report.param("target", target);
    for &r in r_values {
        let op = SrOperator::build(rho, kernel, &SrParams { r, ..*base }, exec)?;
        let s1 = op.sup_s1(rho);
        let s1a = op.sup_s1_adjoint(rho);
        let lower = op.norm_lower_estimate(rho, mc_samples, mc_depth, seed, exec);
        let pairing = op.pairing(rho, &one, &one, exec);
        report.push(row![
            r,
            op.net.members.len(),
            op.active_pairs,
            op.u_min,
            op.u_max,
            op.overlaps,
            s1,
            s1a,
            (s1 * s1a).sqrt(),
            lower,
            pairing,
            (pairing - target).abs()
        ]);
    }
    Ok(report)
}
