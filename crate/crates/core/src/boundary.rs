//! The Gromov boundary of the weighted tree: infinite reduced words.
//!
//! Points are eventually periodic words `u p p p ...`, stored in a canonical
//! form (shortest head, primitive period) so structural equality is equality
//! of boundary points.

use std::fmt;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::words::{common_prefix_len, GroupModel, Letter, Word};

/// An eventually periodic boundary point `head . period^infinity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryPoint {
    head: Vec<Letter>,
    period: Vec<Letter>,
}

impl BoundaryPoint {
    pub fn head(&self) -> &[Letter] {
        &self.head
    }

    pub fn period(&self) -> &[Letter] {
        &self.period
    }

    #[inline]
    pub fn letter(&self, i: usize) -> Letter {
        if i < self.head.len() {
            self.head[i]
        } else {
            self.period[(i - self.head.len()) % self.period.len()]
        }
    }

    /// The first `n` letters.
    pub fn prefix_letters(&self, n: usize) -> Vec<Letter> {
        (0..n).map(|i| self.letter(i)).collect()
    }

    fn canonicalize(mut head: Vec<Letter>, mut period: Vec<Letter>) -> Self {
        // primitive root of the period
        let n = period.len();
        for d in 1..=n {
            if n.is_multiple_of(d) && (d..n).all(|i| period[i] == period[i - d]) {
                period.truncate(d);
                break;
            }
        }
        // absorb the tail of the head into a rotation of the period
        while let Some(&l) = head.last() {
            if l != *period.last().unwrap() {
                break;
            }
            head.pop();
            period.rotate_right(1);
        }
        BoundaryPoint { head, period }
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({:?})^inf", self.head, self.period)
    }
}

/// A cylinder `[w]`: all boundary points with prefix `w`. The empty prefix is
/// the whole boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cylinder {
    prefix: Word,
}

impl Cylinder {
    pub fn new(prefix: Word) -> Self {
        Cylinder { prefix }
    }

    pub fn whole(model: &GroupModel) -> Self {
        Cylinder {
            prefix: model.identity(),
        }
    }

    pub fn prefix(&self) -> &Word {
        &self.prefix
    }

    pub fn is_whole(&self) -> bool {
        self.prefix.is_identity()
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    pub fn contains(&self, xi: &BoundaryPoint) -> bool {
        self.prefix
            .letters()
            .iter()
            .enumerate()
            .all(|(i, &l)| xi.letter(i) == l)
    }

    /// Whether `other` is a subset of `self`.
    pub fn contains_cylinder(&self, other: &Cylinder) -> bool {
        self.prefix.is_prefix_of(other.prefix.letters())
    }

    /// Cylinders are either nested or disjoint.
    pub fn is_nested_with(&self, other: &Cylinder) -> bool {
        self.contains_cylinder(other) || other.contains_cylinder(self)
    }

    pub fn children(&self, model: &GroupModel) -> Vec<Cylinder> {
        let forbidden = self.prefix.last().map(|l| model.inverse(l));
        model
            .letters()
            .filter(|&l| Some(l) != forbidden)
            .map(|l| {
                let mut v = self.prefix.letters().to_vec();
                v.push(l);
                Cylinder::new(model.make(v))
            })
            .collect()
    }
}

/// The visual metric `d(xi, eta) = exp(-epsilon (xi, eta))`, an ultrametric here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisualMetric {
    epsilon: f64,
}

impl VisualMetric {
    /// `epsilon` must lie in `(0, h]`; the density builder further requires `epsilon < h`.
    pub fn new(epsilon: f64, critical_exponent: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "visual parameter must be positive, got {epsilon}"
            )));
        }
        if epsilon > critical_exponent {
            return Err(LabError::InvalidArgument(format!(
                "visual parameter {epsilon} exceeds the critical exponent {critical_exponent}"
            )));
        }
        Ok(VisualMetric { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn distance(&self, model: &GroupModel, xi: &BoundaryPoint, eta: &BoundaryPoint) -> f64 {
        let p = model.gromov_bb(xi, eta);
        if p.is_infinite() {
            0.0
        } else {
            (-self.epsilon * p).exp()
        }
    }

    /// Open ball `{eta : d(xi, eta) < rho}` as a cylinder (the whole boundary when `rho > 1`).
    pub fn ball(&self, model: &GroupModel, xi: &BoundaryPoint, rho: f64) -> Result<Cylinder> {
        if !(rho > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "ball radius must be positive, got {rho}"
            )));
        }
        if rho > 1.0 {
            return Ok(Cylinder::whole(model));
        }
        // e^{-eps L} < rho  <=>  L > -ln(rho)/eps
        let threshold = -rho.ln() / self.epsilon;
        Ok(Cylinder::new(model.prefix_exceeding(xi, threshold)))
    }

    /// The partition of the boundary into the balls of radius `rho`.
    pub fn ball_partition(&self, model: &GroupModel, rho: f64) -> Result<Vec<Cylinder>> {
        if !(rho > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "ball radius must be positive, got {rho}"
            )));
        }
        if rho > 1.0 {
            return Ok(vec![Cylinder::whole(model)]);
        }
        let threshold = -rho.ln() / self.epsilon;
        let mut out = Vec::new();
        let mut stack = vec![model.identity()];
        while let Some(w) = stack.pop() {
            if !w.is_identity() && model.gt(w.wlen(), threshold) {
                out.push(Cylinder::new(w));
                continue;
            }
            let c = Cylinder::new(w);
            let mut kids = c.children(model);
            kids.reverse();
            stack.extend(kids.into_iter().map(|k| k.prefix));
        }
        Ok(out)
    }
}

impl GroupModel {
    /// Builds a boundary point `head . period^infinity`, validating reducedness.
    pub fn point(&self, head: &[Letter], period: &[Letter]) -> Result<BoundaryPoint> {
        if period.is_empty() {
            return Err(LabError::InvalidArgument("empty period".into()));
        }
        let n = self.alphabet_size();
        if head.iter().chain(period).any(|&l| l as usize >= n) {
            return Err(LabError::InvalidArgument("letter outside alphabet".into()));
        }
        let mut probe = head.to_vec();
        probe.extend_from_slice(period);
        probe.extend_from_slice(period);
        if !self.is_reduced(&probe) {
            return Err(LabError::NotReduced(format!(
                "{} ({})^inf",
                self.format_letters(head),
                self.format_letters(period)
            )));
        }
        Ok(BoundaryPoint::canonicalize(head.to_vec(), period.to_vec()))
    }

    /// Parses `head` and `period` from text, e.g. `("a", "b")` is `a b b b ...`.
    pub fn parse_point(&self, head: &str, period: &str) -> Result<BoundaryPoint> {
        let h = if head.is_empty() {
            Vec::new()
        } else {
            self.parse_letters(head)?
        };
        let p = self.parse_letters(period)?;
        self.point(&h, &p)
    }

    pub fn format_point(&self, xi: &BoundaryPoint) -> String {
        let head = if xi.head.is_empty() {
            String::new()
        } else {
            self.format_letters(&xi.head)
        };
        format!("{head}({})^inf", self.format_letters(&xi.period))
    }

    /// The point `g . c c c ...` where `c` is the first letter not cancelling
    /// `last(g)`. It lies in every shadow of `g` and `(g, g_hat) = |g|`.
    pub fn hat(&self, g: &Word) -> BoundaryPoint {
        let forbidden = g.last().map(|l| self.inverse(l));
        let c = self.letters().find(|&l| Some(l) != forbidden).unwrap();
        BoundaryPoint::canonicalize(g.letters().to_vec(), vec![c])
    }

    /// `check(g) = hat(g^{-1})`.
    pub fn check(&self, g: &Word) -> BoundaryPoint {
        self.hat(&self.invert(g))
    }

    /// Number of leading letters shared by `g` and `xi`.
    pub fn common_prefix_wb(&self, g: &Word, xi: &BoundaryPoint) -> usize {
        g.letters()
            .iter()
            .enumerate()
            .take_while(|(i, &l)| xi.letter(*i) == l)
            .count()
    }

    /// `(g, xi)_e`: weighted length of the common prefix of `g` and `xi`.
    pub fn gromov_wb(&self, g: &Word, xi: &BoundaryPoint) -> f64 {
        let n = self.common_prefix_wb(g, xi);
        self.wlen_of(&g.letters()[..n])
    }

    /// Number of shared leading letters, `None` when the points coincide.
    pub fn common_prefix_bb(&self, xi: &BoundaryPoint, eta: &BoundaryPoint) -> Option<usize> {
        if xi == eta {
            return None;
        }
        // distinct canonical points differ within head + both periods (Fine-Wilf)
        let bound = xi.head.len().max(eta.head.len()) + xi.period.len() + eta.period.len() + 1;
        (0..bound).find(|&i| xi.letter(i) != eta.letter(i))
    }

    /// `(xi, eta)_e`, `+inf` iff `xi == eta`.
    pub fn gromov_bb(&self, xi: &BoundaryPoint, eta: &BoundaryPoint) -> f64 {
        match self.common_prefix_bb(xi, eta) {
            None => f64::INFINITY,
            Some(n) => (0..n).map(|i| self.weight(xi.letter(i))).sum(),
        }
    }

    /// Shortest prefix of `xi` with weighted length beyond `threshold` (at least one letter).
    pub fn prefix_exceeding(&self, xi: &BoundaryPoint, threshold: f64) -> Word {
        let mut letters = Vec::new();
        let mut wl = 0.0;
        loop {
            let l = xi.letter(letters.len());
            letters.push(l);
            wl += self.weight(l);
            if self.gt(wl, threshold) {
                break;
            }
        }
        self.make(letters)
    }

    /// The shadow `Sigma(g, sigma0) = { xi : (g, xi) + sigma0 > |g| }` as the
    /// cylinder on the shortest nonempty prefix of `g` with weight above `|g| - sigma0`.
    pub fn shadow(&self, g: &Word, sigma0: f64) -> Result<Cylinder> {
        if g.is_identity() {
            return Err(LabError::InvalidArgument("shadow of the identity".into()));
        }
        if !(sigma0 > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "shadow parameter must be positive, got {sigma0}"
            )));
        }
        let threshold = g.wlen() - sigma0;
        let mut wl = 0.0;
        for (i, &l) in g.letters().iter().enumerate() {
            wl += self.weight(l);
            if self.gt(wl, threshold) {
                return Ok(Cylinder::new(self.prefix(g, i + 1)));
            }
        }
        Ok(Cylinder::new(g.clone()))
    }

    /// The boundary action `g . xi` in canonical form.
    pub fn act(&self, g: &Word, xi: &BoundaryPoint) -> BoundaryPoint {
        if g.is_identity() {
            return xi.clone();
        }
        let p = xi.period.len();
        let reps = g.len() / p + 2;
        let mut tail: Vec<Letter> = xi.head.clone();
        for _ in 0..reps {
            tail.extend_from_slice(&xi.period);
        }
        let c = self.cancellation(g.letters(), &tail);
        let mut head = g.letters()[..g.len() - c].to_vec();
        head.extend_from_slice(&tail[c..]);
        BoundaryPoint::canonicalize(head, xi.period.clone())
    }

    /// A point of `[w]` continuing with `w`'s last letter forever.
    pub fn point_in(&self, w: &[Letter]) -> BoundaryPoint {
        match w.last() {
            Some(&l) => BoundaryPoint::canonicalize(w.to_vec(), vec![l]),
            None => BoundaryPoint::canonicalize(Vec::new(), vec![0]),
        }
    }
}

/// Letters shared by two cylinders' prefixes.
pub fn cylinder_common_prefix(a: &Cylinder, b: &Cylinder) -> usize {
    common_prefix_len(a.prefix().letters(), b.prefix().letters())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f2() -> GroupModel {
        GroupModel::unit(2).unwrap()
    }

    fn random_point(m: &GroupModel, rng: &mut ChaCha8Rng) -> BoundaryPoint {
        let n = rng.random_range(0..6usize);
        let head = m.random_word(rng, n);
        loop {
            let plen = rng.random_range(1..4usize);
            let p = m.random_word(rng, plen);
            if let Ok(x) = m.point(head.letters(), p.letters()) {
                return x;
            }
        }
    }

    #[test]
    fn canonical_form() {
        let m = f2();
        let x = m.parse_point("abab", "ab").unwrap();
        let y = m.parse_point("", "abab").unwrap();
        assert_eq!(x, y);
        assert_eq!(x.head(), &[] as &[Letter]);
        assert_eq!(x.period().len(), 2);
        let z = m.parse_point("abb", "b").unwrap();
        assert_eq!(z, m.parse_point("a", "b").unwrap());
        assert!(m.parse_point("aA", "b").is_err());
        assert!(m.parse_point("", "aB").is_ok());
        assert!(m.parse_point("", "ab").is_ok());
        assert!(m.parse_point("", "aA").is_err());
        assert!(m.parse_point("", "bA").is_ok());
        assert!(m.parse_point("", "ba").is_ok());
        assert!(m.parse_point("", "aBA").is_err());
    }

    #[test]
    fn gromov_wb_examples() {
        let m = f2();
        let xi = m.parse_point("a", "b").unwrap();
        assert_eq!(m.gromov_wb(&m.parse("ab").unwrap(), &xi), 2.0);
        assert_eq!(m.gromov_wb(&m.identity(), &xi), 0.0);
        let eta = m.parse_point("", "ab").unwrap();
        assert_eq!(m.gromov_wb(&m.parse("B").unwrap(), &eta), 0.0);
    }

    #[test]
    fn gromov_bb_examples() {
        let m = f2();
        let x = m.parse_point("", "ab").unwrap();
        let y = m.parse_point("", "aB").unwrap();
        assert_eq!(m.gromov_bb(&x, &y), 1.0);
        assert!(m.gromov_bb(&x, &x).is_infinite());
        let a = m.parse_point("", "a").unwrap();
        let b = m.parse_point("", "b").unwrap();
        assert_eq!(m.gromov_bb(&a, &b), 0.0);
        // long shared stretch
        let p = m.parse_point("abababab", "b").unwrap();
        assert_eq!(m.gromov_bb(&p, &x), 8.0);
    }

    #[test]
    fn visual_distance_examples() {
        let m = f2();
        let eps = 3f64.ln() / 2.0;
        let vm = VisualMetric::new(eps, 3f64.ln()).unwrap();
        let x = m.parse_point("", "ab").unwrap();
        let y = m.parse_point("", "aB").unwrap();
        assert!((vm.distance(&m, &x, &y) - 3f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(vm.distance(&m, &x, &x), 0.0);
        let b = m.parse_point("", "b").unwrap();
        assert_eq!(vm.distance(&m, &x, &b), 1.0);
        assert!(VisualMetric::new(2.0, 3f64.ln()).is_err());
        assert!(VisualMetric::new(0.0, 3f64.ln()).is_err());
    }

    #[test]
    fn shadow_examples() {
        let m = f2();
        let ab = m.parse("ab").unwrap();
        assert_eq!(m.format(m.shadow(&ab, 1.5).unwrap().prefix()), "a");
        assert_eq!(m.format(m.shadow(&ab, 0.5).unwrap().prefix()), "ab");
        let s = m.parse("B").unwrap();
        assert_eq!(m.format(m.shadow(&s, 1.5).unwrap().prefix()), "B");
        assert!(m.shadow(&ab, 0.0).is_err());
        assert!(m.shadow(&m.identity(), 1.0).is_err());
    }

    #[test]
    fn shadow_matches_definition() {
        let m = GroupModel::new(&[1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.random_range(1..7usize);
            let g = m.random_word(&mut rng, n);
            let xi = random_point(&m, &mut rng);
            for sigma in [0.5, 1.5, 3.0] {
                let c = m.shadow(&g, sigma).unwrap();
                let by_def = m.gromov_wb(&g, &xi) + sigma > g.wlen();
                // below zero the definition gives the whole boundary; we keep one letter
                if g.wlen() - sigma >= 0.0 {
                    assert_eq!(c.contains(&xi), by_def);
                } else {
                    assert_eq!(c.depth(), 1);
                }
            }
        }
    }

    #[test]
    fn ball_examples() {
        let m = f2();
        let vm = VisualMetric::new(3f64.ln() / 2.0, 3f64.ln()).unwrap();
        let xi = m.parse_point("", "ab").unwrap();
        assert_eq!(vm.ball(&m, &xi, 0.6).unwrap().depth(), 1);
        assert!(vm.ball(&m, &xi, 2.0).unwrap().is_whole());
        assert_eq!(vm.ball(&m, &xi, 3f64.powf(-0.5)).unwrap().depth(), 2);
        for k in 0..7 {
            let rho = 3f64.powf(-(k as f64) / 2.0);
            assert_eq!(vm.ball(&m, &xi, rho).unwrap().depth(), k + 1);
        }
    }

    #[test]
    fn ball_partition_is_partition() {
        let m = GroupModel::new(&[1.0, 2.0]).unwrap();
        let vm = VisualMetric::new(0.3, 0.75).unwrap();
        let parts = vm.ball_partition(&m, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let xi = random_point(&m, &mut rng);
            let hits: Vec<_> = parts.iter().filter(|c| c.contains(&xi)).collect();
            assert_eq!(hits.len(), 1);
            assert_eq!(*hits[0], vm.ball(&m, &xi, 0.4).unwrap());
        }
    }

    #[test]
    fn act_examples() {
        let m = f2();
        let xi = m.parse_point("", "ab").unwrap();
        assert_eq!(
            m.act(&m.parse("A").unwrap(), &xi),
            m.parse_point("", "ba").unwrap()
        );
        assert_eq!(m.act(&m.identity(), &xi), xi);
        let b = m.parse_point("", "b").unwrap();
        assert_eq!(
            m.act(&m.parse("a").unwrap(), &b),
            m.parse_point("a", "b").unwrap()
        );
        // cancellation running through several periods
        let g = m.parse("BABABA").unwrap();
        assert_eq!(m.act(&g, &xi), xi);
    }

    #[test]
    fn action_properties() {
        let m = GroupModel::new(&[1.0, 1.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let (n1, n2) = (rng.random_range(0..8usize), rng.random_range(0..8usize));
            let g = m.random_word(&mut rng, n1);
            let h = m.random_word(&mut rng, n2);
            let xi = random_point(&m, &mut rng);
            let eta = random_point(&m, &mut rng);
            assert_eq!(m.act(&m.mul(&g, &h), &xi), m.act(&g, &m.act(&h, &xi)));
            // (g, g xi) = |g| - (g^{-1}, xi)
            let lhs = m.gromov_wb(&g, &m.act(&g, &xi));
            let rhs = g.wlen() - m.gromov_wb(&m.invert(&g), &xi);
            assert!((lhs - rhs).abs() < 1e-12);
            // (g, xi) <= |g| with equality at hat(g)
            assert!(m.gromov_wb(&g, &xi) <= g.wlen() + 1e-12);
            assert!((m.gromov_wb(&g, &m.hat(&g)) - g.wlen()).abs() < 1e-12);
            // ultrametric inequality
            let vm = VisualMetric::new(0.4, 0.8).unwrap();
            let zeta = random_point(&m, &mut rng);
            let (a, b, c) = (
                vm.distance(&m, &xi, &zeta),
                vm.distance(&m, &xi, &eta),
                vm.distance(&m, &eta, &zeta),
            );
            assert!(a <= b.max(c) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn shadow_contains_ball_along_ray() {
        let m = GroupModel::new(&[1.0, 2.0]).unwrap();
        let eps = 0.3;
        let vm = VisualMetric::new(eps, 0.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let xi = random_point(&m, &mut rng);
            for r in [0.5, 1.0, 2.5, 4.0, 7.0] {
                // gamma(R): the prefix of xi of weighted length about R
                let g = m.prefix_exceeding(&xi, r - m.max_weight());
                let ball = vm.ball(&m, &xi, (-eps * r).exp()).unwrap();
                let sh = m.shadow(&g, 1.5 * m.max_weight()).unwrap();
                assert!(sh.contains_cylinder(&ball), "r={r}");
            }
        }
    }
}
