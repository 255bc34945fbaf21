//! Weighted free groups: reduced words, the weighted word metric and
//! enumeration of balls and annuli.
//!
//! Letters are indices `0..2k`. Index `i < k` is the generator `s_i`, index
//! `i + k` its inverse. In text form generators are `a, b, c, ...` and
//! inverses the matching capitals, so `"aB"` is `s_1 s_2^{-1}`.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};

pub type Letter = u8;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A free group of rank `k >= 2` with a symmetric positive weight on each
/// signed letter. The weighted word length is a left-invariant metric on the
/// group whose Cayley graph is a weighted tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupModel {
    rank: usize,
    weights: Vec<f64>,
    tol: f64,
}

impl GroupModel {
    /// Builds a model from one weight per generator; inverses get the same weight.
    pub fn new(generator_weights: &[f64]) -> Result<Self> {
        let k = generator_weights.len();
        let mut weights = generator_weights.to_vec();
        weights.extend_from_slice(generator_weights);
        Self::from_letter_weights_inner(k, weights)
    }

    /// Builds a model from weights on all `2k` signed letters (generators first).
    pub fn from_letter_weights(letter_weights: &[f64]) -> Result<Self> {
        if !letter_weights.len().is_multiple_of(2) {
            return Err(LabError::InvalidModel(format!(
                "expected an even number of letter weights, got {}",
                letter_weights.len()
            )));
        }
        let k = letter_weights.len() / 2;
        for i in 0..k {
            if letter_weights[i] != letter_weights[i + k] {
                return Err(LabError::InvalidModel(format!(
                    "weight of letter {i} ({}) differs from its inverse ({})",
                    letter_weights[i],
                    letter_weights[i + k]
                )));
            }
        }
        Self::from_letter_weights_inner(k, letter_weights.to_vec())
    }

    fn from_letter_weights_inner(k: usize, weights: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(LabError::InvalidModel(format!(
                "rank must be at least 2 (non-elementary), got {k}"
            )));
        }
        if 2 * k > Letter::MAX as usize {
            return Err(LabError::InvalidModel(format!("rank {k} is too large")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(LabError::InvalidModel(format!(
                "weights must be finite and strictly positive, got {w}"
            )));
        }
        Ok(GroupModel {
            rank: k,
            weights,
            tol: DEFAULT_TOLERANCE,
        })
    }

    /// Free group of the given rank with all weights 1.
    pub fn unit(rank: usize) -> Result<Self> {
        Self::new(&vec![1.0; rank])
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(LabError::InvalidArgument(format!("bad tolerance {tol}")));
        }
        self.tol = tol;
        Ok(self)
    }

    /// The same group with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let w: Vec<f64> = self.generator_weights().iter().map(|x| x * c).collect();
        Self::new(&w)?.with_tolerance(self.tol)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.rank
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn generator_weights(&self) -> &[f64] {
        &self.weights[..self.rank]
    }

    pub fn letter_weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn inverse(&self, l: Letter) -> Letter {
        inverse_letter(self.rank, l)
    }

    #[inline]
    pub fn weight(&self, l: Letter) -> f64 {
        self.weights[l as usize]
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        0..self.alphabet_size() as Letter
    }

    /// `a > b` beyond the length tolerance.
    #[inline]
    pub fn gt(&self, a: f64, b: f64) -> bool {
        a > b + self.tol
    }

    /// `a < b` beyond the length tolerance.
    #[inline]
    pub fn lt(&self, a: f64, b: f64) -> bool {
        a < b - self.tol
    }

    #[inline]
    pub fn approx_eq(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.tol
    }

    pub fn wlen_of(&self, letters: &[Letter]) -> f64 {
        letters.iter().map(|&l| self.weight(l)).sum()
    }

    pub fn identity(&self) -> Word {
        Word {
            letters: Vec::new(),
            wlen: 0.0,
        }
    }

    /// Wraps letters that are already known to be reduced.
    pub(crate) fn make(&self, letters: Vec<Letter>) -> Word {
        debug_assert!(self.is_reduced(&letters));
        let wlen = self.wlen_of(&letters);
        Word { letters, wlen }
    }

    pub fn is_reduced(&self, letters: &[Letter]) -> bool {
        letters.windows(2).all(|p| p[1] != self.inverse(p[0]))
    }

    /// Validates letters and wraps them as a reduced word.
    pub fn word(&self, letters: &[Letter]) -> Result<Word> {
        if let Some(l) = letters
            .iter()
            .find(|&&l| l as usize >= self.alphabet_size())
        {
            return Err(LabError::InvalidArgument(format!(
                "letter {l} outside alphabet of size {}",
                self.alphabet_size()
            )));
        }
        if !self.is_reduced(letters) {
            return Err(LabError::NotReduced(self.format_letters(letters)));
        }
        Ok(self.make(letters.to_vec()))
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn reduce(&self, letters: &[Letter]) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        for &l in letters {
            if out.last() == Some(&self.inverse(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        self.make(out)
    }

    pub fn letter_char(&self, l: Letter) -> Option<char> {
        let k = self.rank;
        if k > 26 {
            return None;
        }
        let i = l as usize;
        if i < k {
            Some((b'a' + i as u8) as char)
        } else {
            Some((b'A' + (i - k) as u8) as char)
        }
    }

    pub fn parse_letter(&self, c: char) -> Result<Letter> {
        let k = self.rank;
        let l = match c {
            'a'..='z' => c as usize - 'a' as usize,
            'A'..='Z' => c as usize - 'A' as usize + k,
            _ => usize::MAX,
        };
        let gen = if l >= k { l.wrapping_sub(k) } else { l };
        if l == usize::MAX || gen >= k || k > 26 {
            return Err(LabError::InvalidArgument(format!(
                "'{c}' is not a letter of the rank-{k} alphabet"
            )));
        }
        Ok(l as Letter)
    }

    pub fn parse_letters(&self, s: &str) -> Result<Vec<Letter>> {
        let s = s.trim();
        if s == "e" || s == "1" {
            return Ok(Vec::new());
        }
        s.chars().map(|c| self.parse_letter(c)).collect()
    }

    /// Parses a reduced word written as e.g. `"aBa"`; `""` or `"e"` is the identity.
    pub fn parse(&self, s: &str) -> Result<Word> {
        let letters = self.parse_letters(s)?;
        self.word(&letters)
    }

    pub fn format_letters(&self, letters: &[Letter]) -> String {
        if letters.is_empty() {
            return "e".to_string();
        }
        letters
            .iter()
            .map(|&l| match self.letter_char(l) {
                Some(c) => c.to_string(),
                None => {
                    let k = self.rank as Letter;
                    if l < k {
                        format!("x{}.", l)
                    } else {
                        format!("X{}.", l - k)
                    }
                }
            })
            .collect()
    }

    pub fn format(&self, w: &Word) -> String {
        self.format_letters(&w.letters)
    }

    /// Free reduction of the concatenation `u v`.
    pub fn mul(&self, u: &Word, v: &Word) -> Word {
        let c = self.cancellation(&u.letters, &v.letters);
        let mut letters = Vec::with_capacity(u.len() + v.len() - 2 * c);
        letters.extend_from_slice(&u.letters[..u.len() - c]);
        letters.extend_from_slice(&v.letters[c..]);
        self.make(letters)
    }

    /// Number of letters cancelled when concatenating two reduced words.
    pub fn cancellation(&self, u: &[Letter], v: &[Letter]) -> usize {
        u.iter()
            .rev()
            .zip(v.iter())
            .take_while(|(&a, &b)| b == self.inverse(a))
            .count()
    }

    pub fn invert(&self, w: &Word) -> Word {
        let letters: Vec<Letter> = w.letters.iter().rev().map(|&l| self.inverse(l)).collect();
        Word {
            letters,
            wlen: w.wlen,
        }
    }

    /// `d(g, h) = |g^{-1} h|`.
    pub fn distance(&self, g: &Word, h: &Word) -> f64 {
        let cp = common_prefix_len(&g.letters, &h.letters);
        self.wlen_of(&g.letters[cp..]) + self.wlen_of(&h.letters[cp..])
    }

    /// Gromov product `(x, y)_o` from the three-distance formula.
    pub fn gromov_product(&self, x: &Word, y: &Word, o: &Word) -> f64 {
        0.5 * (self.distance(o, x) + self.distance(o, y) - self.distance(x, y))
    }

    /// Weighted length of the longest common prefix of `o^{-1} x` and `o^{-1} y`.
    /// Agrees with [`GroupModel::gromov_product`] in the tree.
    pub fn gromov_product_prefix(&self, x: &Word, y: &Word, o: &Word) -> f64 {
        let oi = self.invert(o);
        let a = self.mul(&oi, x);
        let b = self.mul(&oi, y);
        let cp = common_prefix_len(&a.letters, &b.letters);
        self.wlen_of(&a.letters[..cp])
    }

    /// The first `n` letters of `w` as a word.
    pub fn prefix(&self, w: &Word, n: usize) -> Word {
        self.make(w.letters[..n.min(w.len())].to_vec())
    }

    /// All reduced words with `lo < wlen < hi` (strict, up to the tolerance), in
    /// length-lexicographic order. Fails as soon as more than `cap` words are found.
    pub fn words_between(&self, lo: f64, hi: f64, cap: usize) -> Result<Vec<Word>> {
        let mut out = Vec::new();
        if !(hi > lo) {
            return Ok(out);
        }
        let minw = self.min_weight();
        let upper = hi - self.tol;
        let mut n = 0usize;
        let mut buf: Vec<Letter> = Vec::new();
        while (n as f64) * minw < upper {
            self.dfs_exact_len(
                n,
                &mut buf,
                0.0,
                &mut |letters, wl| {
                    if wl > lo + self.tol && wl < upper {
                        if out.len() >= cap {
                            return Err(LabError::CapExceeded {
                                what: format!("enumerating words with {lo} < |g| < {hi}"),
                                cap,
                            });
                        }
                        out.push(Word {
                            letters: letters.to_vec(),
                            wlen: wl,
                        });
                    }
                    Ok(())
                },
                upper,
            )?;
            n += 1;
        }
        Ok(out)
    }

    /// The annulus `A_R(alpha) = { g : R - alpha < |g| < R + alpha }`.
    pub fn annulus(&self, r: f64, alpha: f64, cap: usize) -> Result<Vec<Word>> {
        if !(alpha > 0.0) {
            return Err(LabError::InvalidArgument(format!(
                "annulus half-width must be positive, got {alpha}"
            )));
        }
        self.words_between(r - alpha, r + alpha, cap)
    }

    /// The closed ball `{ g : |g| <= r }`.
    pub fn ball(&self, r: f64, cap: usize) -> Result<Vec<Word>> {
        let mut v = self.words_between(-1.0, r + 2.0 * self.tol, cap)?;
        v.retain(|w| w.wlen <= r + self.tol);
        Ok(v)
    }

    /// Words with exactly `n` letters, lexicographic order.
    pub fn words_of_length(&self, n: usize, cap: usize) -> Result<Vec<Word>> {
        let mut out = Vec::new();
        let mut buf = Vec::new();
        self.dfs_exact_len(
            n,
            &mut buf,
            0.0,
            &mut |letters, wl| {
                if out.len() >= cap {
                    return Err(LabError::CapExceeded {
                        what: format!("enumerating words of length {n}"),
                        cap,
                    });
                }
                out.push(Word {
                    letters: letters.to_vec(),
                    wlen: wl,
                });
                Ok(())
            },
            f64::INFINITY,
        )?;
        Ok(out)
    }

    fn dfs_exact_len(
        &self,
        n: usize,
        buf: &mut Vec<Letter>,
        wl: f64,
        emit: &mut dyn FnMut(&[Letter], f64) -> Result<()>,
        upper: f64,
    ) -> Result<()> {
        if buf.len() == n {
            return emit(buf, wl);
        }
        let remaining = (n - buf.len() - 1) as f64 * self.min_weight();
        let forbidden = buf.last().map(|&l| self.inverse(l));
        for l in self.letters() {
            if Some(l) == forbidden {
                continue;
            }
            let next = wl + self.weight(l);
            if next + remaining >= upper {
                continue;
            }
            buf.push(l);
            let r = self.dfs_exact_len(n, buf, next, emit, upper);
            buf.pop();
            r?;
        }
        Ok(())
    }

    /// A uniformly random reduced word with exactly `n` letters.
    pub fn random_word<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Word {
        let m = self.alphabet_size();
        let mut letters: Vec<Letter> = Vec::with_capacity(n);
        for i in 0..n {
            let l = if i == 0 {
                rng.random_range(0..m) as Letter
            } else {
                let forbidden = self.inverse(letters[i - 1]) as usize;
                let mut x = rng.random_range(0..m - 1);
                if x >= forbidden {
                    x += 1;
                }
                x as Letter
            };
            letters.push(l);
        }
        self.make(letters)
    }

    /// Empirical hyperbolicity constant: the largest four-point defect
    /// `min{(x,y)_o, (y,z)_o} - (x,z)_o` over random quadruples, clamped at 0.
    pub fn estimate_delta(&self, sample_size: usize, seed: u64) -> Result<f64> {
        if sample_size == 0 {
            return Err(LabError::InvalidArgument(
                "sample_size must be at least 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..sample_size {
            let pick = |rng: &mut ChaCha8Rng| {
                let n = rng.random_range(0..=8usize);
                self.random_word(rng, n)
            };
            let (x, y, z, o) = (
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
            );
            let defect = four_point_defect(self, &x, &y, &z, &o);
            worst = worst.max(defect);
        }
        Ok(if worst <= self.tol { 0.0 } else { worst })
    }
}

pub(crate) fn four_point_defect(m: &GroupModel, x: &Word, y: &Word, z: &Word, o: &Word) -> f64 {
    let xy = m.gromov_product(x, y, o);
    let yz = m.gromov_product(y, z, o);
    let xz = m.gromov_product(x, z, o);
    xy.min(yz) - xz
}

#[inline]
pub(crate) fn inverse_letter(rank: usize, l: Letter) -> Letter {
    let k = rank as Letter;
    if l < k {
        l + k
    } else {
        l - k
    }
}

pub fn common_prefix_len(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// A freely reduced word with its cached weighted length.
///
/// Equality and hashing look at the letters only; ordering is length-lexicographic.
#[derive(Debug, Clone)]
pub struct Word {
    letters: Vec<Letter>,
    wlen: f64,
}

impl Word {
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn wlen(&self) -> f64 {
        self.wlen
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    pub fn is_prefix_of(&self, other: &[Letter]) -> bool {
        other.starts_with(&self.letters)
    }
}

impl PartialEq for Word {
    fn eq(&self, other: &Self) -> bool {
        self.letters == other.letters
    }
}

impl Eq for Word {}

impl Hash for Word {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.letters.hash(state);
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for &l in &self.letters {
            write!(f, "[{l}]")?;
        }
        Ok(())
    }
}
