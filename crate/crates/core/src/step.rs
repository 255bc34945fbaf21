//! Step functions on the boundary, stored as a cylinder trie.
//!
//! A node at reduced prefix `w` either holds a constant value on `[w]` or
//! splits into one child per letter. The slot for the inverse of `w`'s last
//! letter is unused and kept as `Leaf(0.0)`. Values are merged bottom-up
//! whenever all admissible children are equal leaves, so two functions are
//! equal exactly when their canonical tries are.

use crate::boundary::{BoundaryPoint, Cylinder};
use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::words::{inverse_letter, GroupModel, Letter, Word};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Leaf(f64),
    Split(Box<[Node]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    rank: usize,
    pub(crate) root: Node,
}

#[inline]
pub(crate) fn forbidden(rank: usize, last: Option<Letter>) -> Option<usize> {
    last.map(|a| inverse_letter(rank, a) as usize)
}

fn canon(node: Node, rank: usize, last: Option<Letter>) -> Node {
    let children = match node {
        Node::Leaf(v) => return Node::Leaf(v),
        Node::Split(c) => c,
    };
    let forb = forbidden(rank, last);
    let kids: Vec<Node> = children
        .into_vec()
        .into_iter()
        .enumerate()
        .map(|(b, c)| {
            if Some(b) == forb {
                Node::Leaf(0.0)
            } else {
                canon(c, rank, Some(b as Letter))
            }
        })
        .collect();
    let mut common: Option<f64> = None;
    let mut uniform = true;
    for (b, k) in kids.iter().enumerate() {
        if Some(b) == forb {
            continue;
        }
        match (k, common) {
            (Node::Leaf(v), None) => common = Some(*v),
            (Node::Leaf(v), Some(c)) if *v == c => {}
            _ => {
                uniform = false;
                break;
            }
        }
    }
    match (uniform, common) {
        (true, Some(v)) => Node::Leaf(v),
        _ => Node::Split(kids.into_boxed_slice()),
    }
}

#[inline]
fn child(node: &Node, b: usize) -> &Node {
    match node {
        Node::Leaf(_) => node,
        Node::Split(c) => &c[b],
    }
}

pub(crate) fn integrate_node(
    node: &Node,
    rho: &ConformalDensity,
    last: Option<Letter>,
    mass: f64,
) -> f64 {
    match node {
        Node::Leaf(v) => v * mass,
        Node::Split(c) => {
            let forb = forbidden(rho.model().rank(), last);
            c.iter()
                .enumerate()
                .filter(|(b, _)| Some(*b) != forb)
                .map(|(b, k)| {
                    let b = b as Letter;
                    integrate_node(k, rho, Some(b), mass * rho.child_factor(last, b))
                })
                .sum()
        }
    }
}

/// Partially specified trie used while assembling a partition.
enum Slot {
    Empty,
    Leaf(f64),
    Split(Vec<Slot>),
}

impl Slot {
    fn insert(&mut self, path: &[Letter], v: f64, n: usize) -> Result<()> {
        let Some((&first, rest)) = path.split_first() else {
            return match self {
                Slot::Empty => {
                    *self = Slot::Leaf(v);
                    Ok(())
                }
                _ => Err(LabError::NotAPartition("overlapping cylinders".into())),
            };
        };
        if let Slot::Empty = self {
            *self = Slot::Split((0..n).map(|_| Slot::Empty).collect());
        }
        match self {
            Slot::Split(c) => c[first as usize].insert(rest, v, n),
            _ => Err(LabError::NotAPartition("overlapping cylinders".into())),
        }
    }

    fn finish(self, rank: usize, last: Option<Letter>) -> Result<Node> {
        match self {
            Slot::Empty => Err(LabError::NotAPartition(
                "cylinders do not cover the boundary".into(),
            )),
            Slot::Leaf(v) => Ok(Node::Leaf(v)),
            Slot::Split(c) => {
                let forb = forbidden(rank, last);
                let kids = c
                    .into_iter()
                    .enumerate()
                    .map(|(b, s)| {
                        if Some(b) == forb {
                            Ok(Node::Leaf(0.0))
                        } else {
                            s.finish(rank, Some(b as Letter))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Node::Split(kids.into_boxed_slice()))
            }
        }
    }
}

impl StepFunction {
    pub(crate) fn from_node(rank: usize, root: Node) -> Self {
        StepFunction {
            rank,
            root: canon(root, rank, None),
        }
    }

    pub fn constant(model: &GroupModel, c: f64) -> Self {
        StepFunction {
            rank: model.rank(),
            root: Node::Leaf(c),
        }
    }

    pub fn indicator(model: &GroupModel, c: &Cylinder) -> Self {
        let n = c.depth();
        let mut values = vec![0.0; n + 1];
        values[n] = 1.0;
        Self::along_path(model, c.prefix().letters(), &values)
    }

    /// The function equal to `values[i]` on points leaving `path` after exactly
    /// `i` letters, and to `values[path.len()]` on `[path]`.
    pub fn along_path(model: &GroupModel, path: &[Letter], values: &[f64]) -> Self {
        assert_eq!(
            values.len(),
            path.len() + 1,
            "one value per divergence depth"
        );
        let n = model.alphabet_size();
        let mut node = Node::Leaf(values[path.len()]);
        for i in (0..path.len()).rev() {
            let mut kids = vec![Node::Leaf(values[i]); n];
            kids[path[i] as usize] = node;
            node = Node::Split(kids.into_boxed_slice());
        }
        Self::from_node(model.rank(), node)
    }

    /// Builds a function from `(cylinder, value)` parts that must partition the boundary.
    pub fn from_parts(model: &GroupModel, parts: &[(Cylinder, f64)]) -> Result<Self> {
        let mut slot = Slot::Empty;
        let n = model.alphabet_size();
        for (c, v) in parts {
            slot.insert(c.prefix().letters(), *v, n)?;
        }
        Ok(Self::from_node(
            model.rank(),
            slot.finish(model.rank(), None)?,
        ))
    }

    /// The function `w -> f(w)` on all cylinders of exactly `depth` letters.
    pub fn from_depth(
        model: &GroupModel,
        depth: usize,
        mut f: impl FnMut(&[Letter]) -> f64,
    ) -> Self {
        fn build(
            model: &GroupModel,
            depth: usize,
            path: &mut Vec<Letter>,
            f: &mut dyn FnMut(&[Letter]) -> f64,
        ) -> Node {
            if path.len() == depth {
                return Node::Leaf(f(path));
            }
            let forb = forbidden(model.rank(), path.last().copied());
            let kids: Vec<Node> = model
                .letters()
                .map(|b| {
                    if Some(b as usize) == forb {
                        Node::Leaf(0.0)
                    } else {
                        path.push(b);
                        let node = build(model, depth, path, f);
                        path.pop();
                        node
                    }
                })
                .collect();
            Node::Split(kids.into_boxed_slice())
        }
        let root = build(model, depth, &mut Vec::new(), &mut f);
        Self::from_node(model.rank(), root)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.root, Node::Leaf(_))
    }

    /// `(prefix, value)` for every part, in letter order.
    pub fn parts(&self) -> Vec<(Vec<Letter>, f64)> {
        fn walk(
            node: &Node,
            rank: usize,
            path: &mut Vec<Letter>,
            out: &mut Vec<(Vec<Letter>, f64)>,
        ) {
            match node {
                Node::Leaf(v) => out.push((path.clone(), *v)),
                Node::Split(c) => {
                    let forb = forbidden(rank, path.last().copied());
                    for (b, k) in c.iter().enumerate() {
                        if Some(b) != forb {
                            path.push(b as Letter);
                            walk(k, rank, path, out);
                            path.pop();
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, self.rank, &mut Vec::new(), &mut out);
        out
    }

    pub fn part_count(&self) -> usize {
        fn count(node: &Node, rank: usize, last: Option<Letter>) -> usize {
            match node {
                Node::Leaf(_) => 1,
                Node::Split(c) => {
                    let forb = forbidden(rank, last);
                    c.iter()
                        .enumerate()
                        .filter(|(b, _)| Some(*b) != forb)
                        .map(|(b, k)| count(k, rank, Some(b as Letter)))
                        .sum()
                }
            }
        }
        count(&self.root, self.rank, None)
    }

    /// Letters in the deepest part prefix.
    pub fn depth(&self) -> usize {
        self.parts().iter().map(|(w, _)| w.len()).max().unwrap_or(0)
    }

    pub fn eval(&self, xi: &BoundaryPoint) -> f64 {
        let mut node = &self.root;
        let mut i = 0;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split(c) => {
                    node = &c[xi.letter(i) as usize];
                    i += 1;
                }
            }
        }
    }

    /// The value on `[prefix]` if the function is constant there.
    pub fn value_on(&self, prefix: &[Letter]) -> Option<f64> {
        let mut node = &self.root;
        for &l in prefix {
            match node {
                Node::Leaf(v) => return Some(*v),
                Node::Split(c) => node = &c[l as usize],
            }
        }
        match node {
            Node::Leaf(v) => Some(*v),
            Node::Split(_) => None,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        fn go(node: &Node, f: &dyn Fn(f64) -> f64) -> Node {
            match node {
                Node::Leaf(v) => Node::Leaf(f(*v)),
                Node::Split(c) => Node::Split(c.iter().map(|k| go(k, f)).collect()),
            }
        }
        Self::from_node(self.rank, go(&self.root, &f))
    }

    /// Pointwise combination on the common refinement.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            self.rank, other.rank,
            "step functions over different groups"
        );
        fn go(a: &Node, b: &Node, f: &dyn Fn(f64, f64) -> f64) -> Node {
            match (a, b) {
                (Node::Leaf(x), Node::Leaf(y)) => Node::Leaf(f(*x, *y)),
                (Node::Split(c), _) => Node::Split(
                    c.iter()
                        .enumerate()
                        .map(|(i, k)| go(k, child(b, i), f))
                        .collect(),
                ),
                (Node::Leaf(_), Node::Split(c)) => {
                    Node::Split(c.iter().map(|k| go(a, k, f)).collect())
                }
            }
        }
        Self::from_node(self.rank, go(&self.root, &other.root, &f))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    /// `f o g^{-1}`, i.e. `xi -> f(g^{-1} xi)`.
    pub fn translate(&self, model: &GroupModel, g: &Word) -> Self {
        if g.is_identity() {
            return self.clone();
        }
        let n = model.alphabet_size();
        // split every node on the path of g^{-1} so that no part is swallowed
        fn refine(node: &Node, path: &[Letter], n: usize) -> Node {
            let mut kids: Vec<Node> = match node {
                Node::Leaf(v) => vec![Node::Leaf(*v); n],
                Node::Split(c) => c.to_vec(),
            };
            if let Some((&first, rest)) = path.split_first() {
                kids[first as usize] = refine(&kids[first as usize], rest, n);
            }
            Node::Split(kids.into_boxed_slice())
        }
        let ginv = model.invert(g);
        let refined = StepFunction {
            rank: self.rank,
            root: refine(&self.root, ginv.letters(), n),
        };
        let mut slot = Slot::Empty;
        let mut buf: Vec<Letter> = Vec::new();
        for (w, v) in refined.parts() {
            let c = model.cancellation(g.letters(), &w);
            buf.clear();
            buf.extend_from_slice(&g.letters()[..g.len() - c]);
            buf.extend_from_slice(&w[c..]);
            slot.insert(&buf, v, n)
                .expect("translation maps a partition to a partition");
        }
        let root = slot
            .finish(self.rank, None)
            .expect("translation maps a partition to a partition");
        Self::from_node(self.rank, root)
    }

    /// `sum over parts of value * mu(part)`.
    pub fn integral(&self, rho: &ConformalDensity) -> f64 {
        integrate_node(&self.root, rho, None, 1.0)
    }

    /// `int_{[prefix]} f d mu`.
    pub fn integral_over(&self, rho: &ConformalDensity, prefix: &[Letter]) -> f64 {
        let mut node = &self.root;
        let mut mass = 1.0;
        let mut last = None;
        for &l in prefix {
            match node {
                Node::Leaf(v) => return v * rho.mu_letters(prefix),
                Node::Split(c) => {
                    node = &c[l as usize];
                    mass *= rho.child_factor(last, l);
                    last = Some(l);
                }
            }
        }
        integrate_node(node, rho, last, mass)
    }

    /// `int f(xi) g(xi) d mu` without materializing the product.
    pub fn inner(&self, other: &Self, rho: &ConformalDensity) -> f64 {
        fn go(a: &Node, b: &Node, rho: &ConformalDensity, last: Option<Letter>, mass: f64) -> f64 {
            if let (Node::Leaf(x), Node::Leaf(y)) = (a, b) {
                return x * y * mass;
            }
            let forb = forbidden(rho.model().rank(), last);
            let mut acc = 0.0;
            for l in rho.model().letters() {
                if Some(l as usize) == forb {
                    continue;
                }
                let i = l as usize;
                acc += go(
                    child(a, i),
                    child(b, i),
                    rho,
                    Some(l),
                    mass * rho.child_factor(last, l),
                );
            }
            acc
        }
        go(&self.root, &other.root, rho, None, 1.0)
    }

    pub fn norm2(&self, rho: &ConformalDensity) -> f64 {
        self.inner(self, rho).max(0.0).sqrt()
    }

    pub fn norm1(&self, rho: &ConformalDensity) -> f64 {
        self.map(f64::abs).integral(rho)
    }

    pub fn norm_inf(&self) -> f64 {
        self.parts()
            .iter()
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Exact Lipschitz constant for `d(xi, eta) = exp(-eps (xi, eta))`.
    ///
    /// Points separated at node `w` are at distance `exp(-eps |w|)`, so the
    /// constant is the largest value gap across distinct children of a node
    /// times `exp(eps |w|)`.
    pub fn lipschitz(&self, model: &GroupModel, eps: f64) -> f64 {
        fn go(
            node: &Node,
            model: &GroupModel,
            eps: f64,
            last: Option<Letter>,
            wl: f64,
        ) -> (f64, f64, f64) {
            match node {
                Node::Leaf(v) => (*v, *v, 0.0),
                Node::Split(c) => {
                    let forb = forbidden(model.rank(), last);
                    let stats: Vec<(f64, f64, f64)> = c
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| Some(*b) != forb)
                        .map(|(b, k)| {
                            let l = b as Letter;
                            go(k, model, eps, Some(l), wl + model.weight(l))
                        })
                        .collect();
                    let lo = stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
                    let hi = stats.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
                    let mut lip = stats.iter().map(|s| s.2).fold(0.0, f64::max);
                    let scale = (eps * wl).exp();
                    for (i, a) in stats.iter().enumerate() {
                        for (j, b) in stats.iter().enumerate() {
                            if i != j {
                                lip = lip.max((a.1 - b.0) * scale);
                            }
                        }
                    }
                    (lo, hi, lip)
                }
            }
        }
        go(&self.root, model, eps, None, 0.0).2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f2u() -> ConformalDensity {
        ConformalDensity::with_dimension(&GroupModel::unit(2).unwrap(), 2.0).unwrap()
    }

    fn cyl(m: &GroupModel, s: &str) -> Cylinder {
        Cylinder::new(m.parse(s).unwrap())
    }

    pub(crate) fn random_step(m: &GroupModel, depth: usize, rng: &mut ChaCha8Rng) -> StepFunction {
        StepFunction::from_depth(m, depth, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn canonical_merging() {
        let d = f2u();
        let m = d.model();
        let parts: Vec<(Cylinder, f64)> = ["a", "b", "A", "B"]
            .iter()
            .map(|s| (cyl(m, s), 2.0))
            .collect();
        let f = StepFunction::from_parts(m, &parts).unwrap();
        assert_eq!(f, StepFunction::constant(m, 2.0));
        let g = StepFunction::from_depth(m, 3, |w| if w[0] == 0 { 1.0 } else { 0.0 });
        assert_eq!(g, StepFunction::indicator(m, &cyl(m, "a")));
        assert_eq!(g.part_count(), 4);
    }

    #[test]
    fn partition_validation() {
        let m = GroupModel::unit(2).unwrap();
        let gap = [
            (cyl(&m, "a"), 1.0),
            (cyl(&m, "b"), 1.0),
            (cyl(&m, "A"), 1.0),
        ];
        assert!(matches!(
            StepFunction::from_parts(&m, &gap),
            Err(LabError::NotAPartition(_))
        ));
        let overlap = [
            (cyl(&m, "a"), 1.0),
            (cyl(&m, "ab"), 1.0),
            (cyl(&m, "b"), 1.0),
            (cyl(&m, "A"), 1.0),
            (cyl(&m, "B"), 1.0),
        ];
        assert!(StepFunction::from_parts(&m, &overlap).is_err());
    }

    #[test]
    fn integrals_and_norms() {
        let d = f2u();
        let m = d.model();
        let ia = StepFunction::indicator(m, &cyl(m, "a"));
        assert!((ia.integral(&d) - 0.25).abs() < 1e-15);
        assert!((ia.norm2(&d) - 0.5).abs() < 1e-15);
        let iab = StepFunction::indicator(m, &cyl(m, "ab"));
        assert!((iab.integral(&d) - 1.0 / 12.0).abs() < 1e-15);
        assert!((ia.inner(&iab, &d) - 1.0 / 12.0).abs() < 1e-15);
        assert!(
            (ia.integral_over(&d, &m.parse("ab").unwrap().into_letters()) - 1.0 / 12.0).abs()
                < 1e-15
        );
        assert_eq!(ia.integral_over(&d, &[1]), 0.0);
        assert!((StepFunction::constant(m, 3.0).integral_over(&d, &[0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn translate_examples() {
        let d = f2u();
        let m = d.model();
        let a = m.parse("a").unwrap();
        let ib = StepFunction::indicator(m, &cyl(m, "b"));
        assert_eq!(
            ib.translate(m, &a),
            StepFunction::indicator(m, &cyl(m, "ab"))
        );
        let ia = StepFunction::indicator(m, &cyl(m, "a"));
        assert_eq!(
            ia.translate(m, &a),
            StepFunction::indicator(m, &cyl(m, "aa"))
        );
        // 1_[A] o a^{-1} is the indicator of the complement of [a]
        let moved = StepFunction::indicator(m, &cyl(m, "A")).translate(m, &a);
        let expect = StepFunction::constant(m, 1.0).add(&ia.scale(-1.0));
        assert_eq!(moved, expect);
        assert_eq!(ia.translate(m, &m.identity()), ia);
    }

    #[test]
    fn translate_matches_pointwise() {
        let m = GroupModel::new(&[1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let depth = rng.random_range(0..4);
            let f = random_step(&m, depth, &mut rng);
            let len = rng.random_range(0..6);
            let g = m.random_word(&mut rng, len);
            let tf = f.translate(&m, &g);
            let ginv = m.invert(&g);
            for _ in 0..10 {
                let n = rng.random_range(1..10);
                let xi = m.point_in(m.random_word(&mut rng, n).letters());
                assert_eq!(tf.eval(&xi), f.eval(&m.act(&ginv, &xi)));
            }
            // group law
            let h = m.random_word(&mut rng, 3);
            assert_eq!(
                f.translate(&m, &h).translate(&m, &g),
                f.translate(&m, &m.mul(&g, &h))
            );
        }
    }

    #[test]
    fn lipschitz_exact() {
        let d = f2u();
        let m = d.model();
        let eps = d.epsilon();
        let iab = StepFunction::indicator(m, &cyl(m, "ab"));
        // split at node [a], distance exp(-eps)
        assert!((iab.lipschitz(m, eps) - eps.exp()).abs() < 1e-12);
        assert_eq!(StepFunction::constant(m, 5.0).lipschitz(m, eps), 0.0);
        // brute force over points at every depth
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_step(m, 3, &mut rng);
        let pts: Vec<BoundaryPoint> = m
            .words_of_length(4, 1000)
            .unwrap()
            .iter()
            .map(|w| m.point_in(w.letters()))
            .collect();
        let vm = d.visual_metric();
        let mut best: f64 = 0.0;
        for x in &pts {
            for y in &pts {
                if x != y {
                    best = best.max((f.eval(x) - f.eval(y)).abs() / vm.distance(m, x, y));
                }
            }
        }
        assert!((best - f.lipschitz(m, eps)).abs() < 1e-9);
    }

    #[test]
    fn value_on_and_parts() {
        let m = GroupModel::unit(2).unwrap();
        let iab = StepFunction::indicator(&m, &cyl(&m, "ab"));
        assert_eq!(iab.value_on(&[0]), None);
        assert_eq!(iab.value_on(&[0, 1]), Some(1.0));
        assert_eq!(iab.value_on(&[1, 1, 1]), Some(0.0));
        assert_eq!(iab.parts().len(), iab.part_count());
        assert_eq!(iab.depth(), 2);
    }
}
