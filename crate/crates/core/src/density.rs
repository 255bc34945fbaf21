//! Critical exponent and the Patterson-Sullivan density in closed form.
//!
//! The transfer matrix `M(s)[a][b] = exp(-s l(b))` for `b != a^{-1}` encodes
//! the Poincare series by last letter. Its spectral radius decreases in `s`
//! and equals 1 exactly at the critical exponent `h`. With `v` the Perron
//! vector of `M(h)` the measure of a cylinder is
//!
//! ```text
//! mu([w]) = exp(-h |w|) v[last(w)] / Z,   Z = sum_a exp(-h l(a)) v[a]
//! ```
//!
//! and the eigen-equation is exactly additivity over the children of `[w]`.

use rand::Rng;
use serde::Serialize;

use crate::boundary::{BoundaryPoint, Cylinder, VisualMetric};
use crate::error::{LabError, Result};
use crate::words::{GroupModel, Letter, Word};

const BISECTION_TOL: f64 = 1e-13;
const POWER_REL_TOL: f64 = 1e-14;
const POWER_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct TransferMatrix {
    s: f64,
    n: usize,
    entries: Vec<f64>,
}

impl TransferMatrix {
    pub fn new(model: &GroupModel, s: f64) -> Self {
        let n = model.alphabet_size();
        let mut entries = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if b as Letter != model.inverse(a as Letter) {
                    entries[a * n + b] = (-s * model.weight(b as Letter)).exp();
                }
            }
        }
        TransferMatrix { s, n, entries }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.n + b]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|a| {
                self.entries[a * self.n..(a + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }

    /// Power iteration from the all-ones vector. Returns Collatz-Wielandt
    /// bounds `lo <= radius <= hi` and the normalized (max = 1) iterate.
    pub fn perron(&self) -> (f64, f64, Vec<f64>) {
        let mut v = vec![1.0; self.n];
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        for _ in 0..POWER_MAX_ITER {
            let w = self.apply(&v);
            lo = f64::INFINITY;
            hi = 0.0;
            for (x, y) in w.iter().zip(&v) {
                let r = x / y;
                lo = f64::min(lo, r);
                hi = f64::max(hi, r);
            }
            let top = w.iter().copied().fold(0.0, f64::max);
            v = w.into_iter().map(|x| x / top).collect();
            if hi - lo <= POWER_REL_TOL * hi {
                break;
            }
        }
        (lo, hi, v)
    }

    pub fn spectral_radius(&self) -> f64 {
        let (lo, hi, _) = self.perron();
        0.5 * (lo + hi)
    }
}

/// The unique `s` with spectral radius of `M(s)` equal to 1.
pub fn critical_exponent(model: &GroupModel) -> f64 {
    let branching = (model.alphabet_size() - 1) as f64;
    // row sums bracket the radius: (2k-1) e^{-s max} <= r(s) <= (2k-1) e^{-s min}
    let mut lo = branching.ln() / model.max_weight();
    let mut hi = branching.ln() / model.min_weight();
    if hi - lo <= BISECTION_TOL {
        return 0.5 * (lo + hi);
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let (rlo, rhi, _) = TransferMatrix::new(model, mid).perron();
        if rlo > 1.0 {
            lo = mid;
        } else if rhi < 1.0 {
            hi = mid;
        } else if 0.5 * (rlo + rhi) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The Patterson-Sullivan measure of dimension `D = h / epsilon`.
#[derive(Debug, Clone, Serialize)]
pub struct ConformalDensity {
    #[serde(skip)]
    model: GroupModel,
    h: f64,
    epsilon: f64,
    v: Vec<f64>,
    z: f64,
}

impl ConformalDensity {
    /// Builds the density for visual parameter `epsilon`, which must satisfy `0 < epsilon < h`.
    pub fn build(model: &GroupModel, epsilon: f64) -> Result<Self> {
        let h = critical_exponent(model);
        Self::build_with_exponent(model, h, epsilon)
    }

    /// Builds the density with `epsilon = h / dimension`.
    pub fn with_dimension(model: &GroupModel, dimension: f64) -> Result<Self> {
        if !(dimension > 1.0 && dimension.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "dimension must exceed 1, got {dimension}"
            )));
        }
        let h = critical_exponent(model);
        Self::build_with_exponent(model, h, h / dimension)
    }

    fn build_with_exponent(model: &GroupModel, h: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < h) {
            return Err(LabError::InvalidArgument(format!(
                "visual parameter must lie in (0, h) = (0, {h}), got {epsilon}"
            )));
        }
        let (_, _, v) = TransferMatrix::new(model, h).perron();
        let z = model
            .letters()
            .map(|a| (-h * model.weight(a)).exp() * v[a as usize])
            .sum();
        Ok(ConformalDensity {
            model: model.clone(),
            h,
            epsilon,
            v,
            z,
        })
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dimension(&self) -> f64 {
        self.h / self.epsilon
    }

    pub fn perron_vector(&self) -> &[f64] {
        &self.v
    }

    pub fn normalizer(&self) -> f64 {
        self.z
    }

    pub fn visual_metric(&self) -> VisualMetric {
        VisualMetric::new(self.epsilon, self.h).expect("epsilon < h by construction")
    }

    /// Largest residual of the eigen-equation `v_a = sum_{b != a^{-1}} e^{-h l(b)} v_b`.
    pub fn eigen_residual(&self) -> f64 {
        let m = TransferMatrix::new(&self.model, self.h);
        let w = m.apply(&self.v);
        w.iter()
            .zip(&self.v)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// `mu([w])` for a reduced letter sequence; the empty word gives 1.
    pub fn mu_letters(&self, w: &[Letter]) -> f64 {
        match w.last() {
            None => 1.0,
            Some(&l) => (-self.h * self.model.wlen_of(w)).exp() * self.v[l as usize] / self.z,
        }
    }

    pub fn mu_cylinder(&self, c: &Cylinder) -> f64 {
        self.mu_letters(c.prefix().letters())
    }

    /// Factor `mu([w b]) / mu([w])` for a word ending in `last` (or the root).
    #[inline]
    pub fn child_factor(&self, last: Option<Letter>, b: Letter) -> f64 {
        match last {
            None => self.initial(b),
            Some(a) => self.transition(a, b),
        }
    }

    /// `mu([a])`.
    pub fn initial(&self, a: Letter) -> f64 {
        (-self.h * self.model.weight(a)).exp() * self.v[a as usize] / self.z
    }

    /// Markov transition `P(a -> b) = e^{-h l(b)} v_b / v_a`, zero for `b = a^{-1}`.
    pub fn transition(&self, a: Letter, b: Letter) -> f64 {
        if b == self.model.inverse(a) {
            0.0
        } else {
            (-self.h * self.model.weight(b)).exp() * self.v[b as usize] / self.v[a as usize]
        }
    }

    /// Radon-Nikodym derivative `d g_* mu / d mu (xi) = exp(-h (|g| - 2 (g, xi)))`.
    pub fn rn_derivative(&self, g: &Word, xi: &BoundaryPoint) -> f64 {
        (-self.h * (g.wlen() - 2.0 * self.model.gromov_wb(g, xi))).exp()
    }

    /// The same derivative as a ratio of cylinder masses,
    /// `mu(g^{-1} [xi_1..n]) / mu([xi_1..n])`, exact once `n` exceeds `|g|`.
    pub fn rn_by_cylinders(&self, g: &Word, xi: &BoundaryPoint, n: usize) -> f64 {
        let w = self.model.make(xi.prefix_letters(n));
        let gi = self.model.invert(g);
        let image = self.model.mul(&gi, &w);
        self.mu_letters(image.letters()) / self.mu_letters(w.letters())
    }

    /// A random prefix of `depth` letters distributed as `mu` on depth cylinders.
    pub fn sample_prefix<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> Result<Word> {
        if depth == 0 {
            return Err(LabError::InvalidArgument("depth must be at least 1".into()));
        }
        let mut letters: Vec<Letter> = Vec::with_capacity(depth);
        for _ in 0..depth {
            let last = letters.last().copied();
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = None;
            let mut fallback = 0;
            for b in self.model.letters() {
                let p = self.child_factor(last, b);
                if p > 0.0 {
                    fallback = b;
                    acc += p;
                    if u < acc {
                        chosen = Some(b);
                        break;
                    }
                }
            }
            letters.push(chosen.unwrap_or(fallback));
        }
        Ok(self.model.make(letters))
    }

    /// A boundary point whose first `depth` letters are `mu`-distributed,
    /// continued periodically by its last letter.
    pub fn sample_point<R: Rng + ?Sized>(
        &self,
        depth: usize,
        rng: &mut R,
    ) -> Result<BoundaryPoint> {
        let w = self.sample_prefix(depth, rng)?;
        Ok(self.model.point_in(w.letters()))
    }

    /// Truncated Patterson-Sullivan ratio
    /// `sum_{g in [c], |g| <= n} e^{-s|g|} / sum_{g != e, |g| <= n} e^{-s|g|}`.
    /// The identity lies in no cylinder and is left out of both sums.
    pub fn poincare_truncated(&self, s: f64, n: f64, c: &Cylinder) -> Result<f64> {
        if !(s > self.h) {
            return Err(LabError::InvalidArgument(format!(
                "Poincare parameter must exceed h = {}, got {s}",
                self.h
            )));
        }
        let total = poincare_sum(&self.model, s, n, &[]);
        let part = poincare_sum(&self.model, s, n, c.prefix().letters());
        Ok(part / total)
    }
}

/// `sum e^{-s |g|}` over reduced `g != e` with prefix `prefix` and `|g| <= n`.
fn poincare_sum(model: &GroupModel, s: f64, n: f64, prefix: &[Letter]) -> f64 {
    fn walk(model: &GroupModel, s: f64, n: f64, last: Option<Letter>, wl: f64) -> f64 {
        let mut acc = (-s * wl).exp();
        for b in model.letters() {
            if Some(model.inverse(b)) == last {
                continue;
            }
            let next = wl + model.weight(b);
            if next <= n + model.tolerance() {
                acc += walk(model, s, n, Some(b), next);
            }
        }
        acc
    }
    let wl = model.wlen_of(prefix);
    if wl > n + model.tolerance() {
        return 0.0;
    }
    let sum = walk(model, s, n, prefix.last().copied(), wl);
    if prefix.is_empty() {
        sum - 1.0
    } else {
        sum
    }
}
