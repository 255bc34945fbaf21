//! Step kernels on `dG x dG` and the operators `T_K f(xi) = int K(xi, eta) f(eta) d mu(eta)`.

use crate::boundary::{BoundaryPoint, Cylinder};
use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::step::{forbidden, Node, StepFunction};
use crate::words::{common_prefix_len, GroupModel, Letter};

#[derive(Debug, Clone, PartialEq)]
enum KNode {
    Leaf(StepFunction),
    Split(Box<[KNode]>),
}

/// A kernel that is a step function in `xi` whose values are step functions in `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStep {
    rank: usize,
    root: KNode,
}

fn canon(node: KNode, rank: usize, last: Option<Letter>) -> KNode {
    let children = match node {
        KNode::Leaf(f) => return KNode::Leaf(f),
        KNode::Split(c) => c,
    };
    let forb = forbidden(rank, last);
    let kids: Vec<KNode> = children
        .into_vec()
        .into_iter()
        .enumerate()
        .map(|(b, k)| {
            if Some(b) == forb {
                KNode::Leaf(StepFunction::from_node(rank, Node::Leaf(0.0)))
            } else {
                canon(k, rank, Some(b as Letter))
            }
        })
        .collect();
    let mut first: Option<&StepFunction> = None;
    let mut uniform = true;
    for (b, k) in kids.iter().enumerate() {
        if Some(b) == forb {
            continue;
        }
        match (k, first) {
            (KNode::Leaf(f), None) => first = Some(f),
            (KNode::Leaf(f), Some(g)) if f == g => {}
            _ => {
                uniform = false;
                break;
            }
        }
    }
    match (uniform, first) {
        (true, Some(f)) => KNode::Leaf(f.clone()),
        _ => KNode::Split(kids.into_boxed_slice()),
    }
}

enum KSlot {
    Empty,
    Leaf(StepFunction),
    Split(Vec<KSlot>),
}

impl KSlot {
    fn insert(&mut self, path: &[Letter], f: &StepFunction, n: usize) -> Result<()> {
        let overlap = || LabError::NotAPartition("overlapping outer cylinders".into());
        let Some((&first, rest)) = path.split_first() else {
            return match self {
                KSlot::Empty => {
                    *self = KSlot::Leaf(f.clone());
                    Ok(())
                }
                _ => Err(overlap()),
            };
        };
        if let KSlot::Empty = self {
            *self = KSlot::Split((0..n).map(|_| KSlot::Empty).collect());
        }
        match self {
            KSlot::Split(c) => c[first as usize].insert(rest, f, n),
            _ => Err(overlap()),
        }
    }

    fn finish(self, model: &GroupModel, last: Option<Letter>) -> Result<KNode> {
        match self {
            KSlot::Empty => Err(LabError::NotAPartition(
                "outer cylinders do not cover the boundary".into(),
            )),
            KSlot::Leaf(f) => Ok(KNode::Leaf(f)),
            KSlot::Split(c) => {
                let forb = forbidden(model.rank(), last);
                let kids = c
                    .into_iter()
                    .enumerate()
                    .map(|(b, k)| {
                        if Some(b) == forb {
                            Ok(KNode::Leaf(StepFunction::constant(model, 0.0)))
                        } else {
                            k.finish(model, Some(b as Letter))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(KNode::Split(kids.into_boxed_slice()))
            }
        }
    }
}

fn kchild(node: &KNode, b: usize) -> &KNode {
    match node {
        KNode::Leaf(_) => node,
        KNode::Split(c) => &c[b],
    }
}

impl KernelStep {
    fn from_node(rank: usize, root: KNode) -> Self {
        KernelStep {
            rank,
            root: canon(root, rank, None),
        }
    }

    pub fn constant(model: &GroupModel, c: f64) -> Self {
        KernelStep {
            rank: model.rank(),
            root: KNode::Leaf(StepFunction::constant(model, c)),
        }
    }

    /// `K(xi, eta) = phi(xi) psi(eta)`.
    pub fn separable(phi: &StepFunction, psi: &StepFunction) -> Self {
        assert_eq!(phi.rank(), psi.rank());
        fn go(node: &Node, psi: &StepFunction) -> KNode {
            match node {
                Node::Leaf(v) => KNode::Leaf(psi.scale(*v)),
                Node::Split(c) => KNode::Split(c.iter().map(|k| go(k, psi)).collect()),
            }
        }
        Self::from_node(phi.rank(), go(&phi.root, psi))
    }

    /// The indicator of `[u] x [v]`.
    pub fn rectangle(model: &GroupModel, u: &Cylinder, v: &Cylinder) -> Self {
        Self::separable(
            &StepFunction::indicator(model, u),
            &StepFunction::indicator(model, v),
        )
    }

    /// Builds a kernel from rectangles `[u] x [v]` with values; the rectangles
    /// must partition `dG x dG`.
    pub fn from_rectangles(model: &GroupModel, parts: &[(Cylinder, Cylinder, f64)]) -> Result<Self> {
        fn build(
            model: &GroupModel,
            prefix: &mut Vec<Letter>,
            parts: &[&(Cylinder, Cylinder, f64)],
        ) -> Result<KNode> {
            let deeper = parts.iter().any(|p| p.0.depth() > prefix.len());
            if !deeper {
                let inner: Vec<(Cylinder, f64)> =
                    parts.iter().map(|p| (p.1.clone(), p.2)).collect();
                return Ok(KNode::Leaf(StepFunction::from_parts(model, &inner)?));
            }
            let forb = forbidden(model.rank(), prefix.last().copied());
            let mut kids = Vec::with_capacity(model.alphabet_size());
            for b in model.letters() {
                if Some(b as usize) == forb {
                    kids.push(KNode::Leaf(StepFunction::constant(model, 0.0)));
                    continue;
                }
                let depth = prefix.len();
                let sub: Vec<&(Cylinder, Cylinder, f64)> = parts
                    .iter()
                    .copied()
                    .filter(|p| p.0.depth() <= depth || p.0.prefix().letters()[depth] == b)
                    .collect();
                prefix.push(b);
                let node = build(model, prefix, &sub);
                prefix.pop();
                kids.push(node?);
            }
            Ok(KNode::Split(kids.into_boxed_slice()))
        }
        let refs: Vec<&(Cylinder, Cylinder, f64)> = parts.iter().collect();
        let root = build(model, &mut Vec::new(), &refs)?;
        Ok(Self::from_node(model.rank(), root))
    }

    /// Builds a kernel from an outer partition with one `eta`-function per part.
    pub fn from_outer_parts(model: &GroupModel, parts: &[(Cylinder, StepFunction)]) -> Result<Self> {
        let mut root = KSlot::Empty;
        for (c, f) in parts {
            root.insert(c.prefix().letters(), f, model.alphabet_size())?;
        }
        Ok(Self::from_node(model.rank(), root.finish(model, None)?))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(outer prefix, eta-function)` for every outer part.
    pub fn outer_parts(&self) -> Vec<(Vec<Letter>, &StepFunction)> {
        fn walk<'a>(
            node: &'a KNode,
            rank: usize,
            path: &mut Vec<Letter>,
            out: &mut Vec<(Vec<Letter>, &'a StepFunction)>,
        ) {
            match node {
                KNode::Leaf(f) => out.push((path.clone(), f)),
                KNode::Split(c) => {
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

    pub fn eval(&self, xi: &BoundaryPoint, eta: &BoundaryPoint) -> f64 {
        let mut node = &self.root;
        let mut i = 0;
        loop {
            match node {
                KNode::Leaf(f) => return f.eval(eta),
                KNode::Split(c) => {
                    node = &c[xi.letter(i) as usize];
                    i += 1;
                }
            }
        }
    }

    /// Pointwise combination on the common refinement of the outer tries.
    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&StepFunction, &StepFunction) -> StepFunction,
    ) -> Self {
        fn go(a: &KNode, b: &KNode, f: &dyn Fn(&StepFunction, &StepFunction) -> StepFunction) -> KNode {
            match (a, b) {
                (KNode::Leaf(x), KNode::Leaf(y)) => KNode::Leaf(f(x, y)),
                (KNode::Split(c), _) => KNode::Split(
                    c.iter().enumerate().map(|(i, k)| go(k, kchild(b, i), f)).collect(),
                ),
                (KNode::Leaf(_), KNode::Split(c)) => {
                    KNode::Split(c.iter().map(|k| go(a, k, f)).collect())
                }
            }
        }
        Self::from_node(self.rank, go(&self.root, &other.root, &f))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x.add(y))
    }

    pub fn scale(&self, c: f64) -> Self {
        fn go(node: &KNode, c: f64) -> KNode {
            match node {
                KNode::Leaf(f) => KNode::Leaf(f.scale(c)),
                KNode::Split(k) => KNode::Split(k.iter().map(|x| go(x, c)).collect()),
            }
        }
        Self::from_node(self.rank, go(&self.root, c))
    }

    /// `T_K f`.
    pub fn apply(&self, rho: &ConformalDensity, f: &StepFunction) -> StepFunction {
        fn go(node: &KNode, rho: &ConformalDensity, f: &StepFunction) -> Node {
            match node {
                KNode::Leaf(k) => Node::Leaf(k.inner(f, rho)),
                KNode::Split(c) => Node::Split(c.iter().map(|x| go(x, rho, f)).collect()),
            }
        }
        StepFunction::from_node(self.rank, go(&self.root, rho, f))
    }

    /// `int_{[u] x [v]} K d mu^2`.
    pub fn integrate_rect(&self, rho: &ConformalDensity, u: &[Letter], v: &[Letter]) -> f64 {
        let mut node = &self.root;
        let mut mass = 1.0;
        let mut last = None;
        for &l in u {
            match node {
                KNode::Leaf(k) => return rho.mu_letters(u) * k.integral_over(rho, v),
                KNode::Split(c) => {
                    node = &c[l as usize];
                    mass *= rho.child_factor(last, l);
                    last = Some(l);
                }
            }
        }
        fn go(
            node: &KNode,
            rho: &ConformalDensity,
            v: &[Letter],
            last: Option<Letter>,
            mass: f64,
        ) -> f64 {
            match node {
                KNode::Leaf(k) => mass * k.integral_over(rho, v),
                KNode::Split(c) => {
                    let forb = forbidden(rho.model().rank(), last);
                    c.iter()
                        .enumerate()
                        .filter(|(b, _)| Some(*b) != forb)
                        .map(|(b, k)| {
                            let b = b as Letter;
                            go(k, rho, v, Some(b), mass * rho.child_factor(last, b))
                        })
                        .sum()
                }
            }
        }
        go(node, rho, v, last, mass)
    }

    pub fn integral(&self, rho: &ConformalDensity) -> f64 {
        self.integrate_rect(rho, &[], &[])
    }

    /// Largest Gromov product `(xi, eta)` over the support. A nonzero value on
    /// nested cylinders reaches the diagonal and is rejected.
    pub fn support_bound(&self, model: &GroupModel) -> Result<f64> {
        let mut bound: f64 = 0.0;
        for (u, f) in self.outer_parts() {
            for (v, val) in f.parts() {
                if val == 0.0 {
                    continue;
                }
                let cp = common_prefix_len(&u, &v);
                if cp == u.len() || cp == v.len() {
                    return Err(LabError::UnboundedSupport(format!(
                        "value {val} on [{}] x [{}]",
                        model.format_letters(&u),
                        model.format_letters(&v)
                    )));
                }
                bound = bound.max(model.wlen_of(&u[..cp]));
            }
        }
        Ok(bound)
    }

    /// Rectangles `(u, v, value)` of the canonical partition.
    pub fn rectangles(&self) -> Vec<(Vec<Letter>, Vec<Letter>, f64)> {
        let mut out = Vec::new();
        for (u, f) in self.outer_parts() {
            for (v, val) in f.parts() {
                out.push((u.clone(), v, val));
            }
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.outer_parts()
            .iter()
            .all(|(_, f)| f.parts().iter().all(|(_, v)| *v >= 0.0))
    }
}
