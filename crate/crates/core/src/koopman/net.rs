//! Separated subsets of an annulus whose shadows cover the boundary.

use std::collections::HashSet;

use crate::boundary::Cylinder;
use crate::error::{LabError, Result};
use crate::words::{GroupModel, Letter, Word};

#[derive(Debug, Clone, PartialEq)]
pub struct NetFamily {
    pub r: f64,
    pub alpha: f64,
    pub separation: f64,
    pub sigma0: f64,
    /// Members in length-lexicographic order.
    pub members: Vec<Word>,
}

impl NetFamily {
    pub fn shadows(&self, model: &GroupModel) -> Result<Vec<Cylinder>> {
        self.members.iter().map(|g| model.shadow(g, self.sigma0)).collect()
    }

    pub fn min_separation(&self, model: &GroupModel) -> f64 {
        let mut best = f64::INFINITY;
        for (i, g) in self.members.iter().enumerate() {
            for h in &self.members[i + 1..] {
                best = best.min(model.distance(g, h));
            }
        }
        best
    }
}

/// True when the union of the cylinders is the whole boundary.
pub fn covers(model: &GroupModel, cylinders: &[Cylinder]) -> bool {
    let set: HashSet<&[Letter]> = cylinders.iter().map(|c| c.prefix().letters()).collect();
    let max_depth = cylinders.iter().map(Cylinder::depth).max().unwrap_or(0);
    fn go(
        model: &GroupModel,
        set: &HashSet<&[Letter]>,
        path: &mut Vec<Letter>,
        max_depth: usize,
    ) -> bool {
        if set.contains(path.as_slice()) {
            return true;
        }
        if path.len() >= max_depth {
            return false;
        }
        let forb = path.last().map(|&l| model.inverse(l));
        for b in model.letters() {
            if Some(b) == forb {
                continue;
            }
            path.push(b);
            let ok = go(model, set, path, max_depth);
            path.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    go(model, &set, &mut Vec::new(), max_depth)
}

/// Greedy net in `A_R(alpha)`: words are taken shell by shell (equal length,
/// shells ordered by distance of the length from `R`), each kept when it is
/// more than `c` away from everything kept so far, until the shadows
/// `Sigma(g, sigma0)` cover the boundary.
pub fn build_net(
    model: &GroupModel,
    r: f64,
    alpha: f64,
    c: f64,
    sigma0: f64,
    cap: usize,
) -> Result<NetFamily> {
    let words = model.annulus(r, alpha, cap)?;
    if words.is_empty() {
        return Err(LabError::InvalidArgument(format!(
            "annulus A_{r}({alpha}) is empty"
        )));
    }
    let mut shells: Vec<(f64, Vec<Word>)> = Vec::new();
    for w in words {
        match shells.iter_mut().find(|(len, _)| model.approx_eq(*len, w.wlen())) {
            Some((_, shell)) => shell.push(w),
            None => shells.push((w.wlen(), vec![w])),
        }
    }
    shells.sort_by(|a, b| {
        (a.0 - r)
            .abs()
            .total_cmp(&(b.0 - r).abs())
            .then(a.0.total_cmp(&b.0))
    });
    let mut members: Vec<Word> = Vec::new();
    let mut shadows: Vec<Cylinder> = Vec::new();
    for (_, mut shell) in shells {
        shell.sort();
        for w in shell {
            if members.iter().all(|m| model.gt(model.distance(m, &w), c)) {
                shadows.push(model.shadow(&w, sigma0)?);
                members.push(w);
            }
        }
        if covers(model, &shadows) {
            members.sort();
            return Ok(NetFamily {
                r,
                alpha,
                separation: c,
                sigma0,
                members,
            });
        }
    }
    Err(LabError::CoverFailed(format!(
        "shadows of a {c}-separated subset of A_{r}({alpha}) with sigma0 = {sigma0} do not cover the boundary"
    )))
}
