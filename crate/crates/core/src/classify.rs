//! Comparing two length functions on the same free group: rough similarity,
//! equivalence of the two densities, and the Hölder relation between the
//! visual metrics.

use std::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::BoundaryPoint;
use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::report::ExperimentReport;
use crate::row;
use crate::stats;
use crate::words::GroupModel;

const FLAT: f64 = 0.01;
const GROWING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SimilarityVerdict {
    Similar,
    NotSimilar,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DensityVerdict {
    Equivalent,
    SingularTendency,
    Inconclusive,
}

impl SimilarityVerdict {
    pub fn from_slope(slope: f64) -> Self {
        if slope < FLAT {
            SimilarityVerdict::Similar
        } else if slope > GROWING {
            SimilarityVerdict::NotSimilar
        } else {
            SimilarityVerdict::Inconclusive
        }
    }

    /// The density verdict that the equivalence of the two conditions predicts.
    pub fn expected_density(self) -> DensityVerdict {
        match self {
            SimilarityVerdict::Similar => DensityVerdict::Equivalent,
            SimilarityVerdict::NotSimilar => DensityVerdict::SingularTendency,
            SimilarityVerdict::Inconclusive => DensityVerdict::Inconclusive,
        }
    }
}

impl DensityVerdict {
    pub fn from_slope(slope: f64) -> Self {
        if slope < FLAT {
            DensityVerdict::Equivalent
        } else if slope > GROWING {
            DensityVerdict::SingularTendency
        } else {
            DensityVerdict::Inconclusive
        }
    }
}

impl fmt::Display for SimilarityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityVerdict::Similar => "SIMILAR",
            SimilarityVerdict::NotSimilar => "NOT_SIMILAR",
            SimilarityVerdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

impl fmt::Display for DensityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityVerdict::Equivalent => "EQUIVALENT",
            DensityVerdict::SingularTendency => "SINGULAR_TENDENCY",
            DensityVerdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Two densities for two weightings of the same alphabet.
#[derive(Debug, Clone)]
pub struct MetricPair {
    pub first: ConformalDensity,
    pub second: ConformalDensity,
}

impl MetricPair {
    pub fn new(first: ConformalDensity, second: ConformalDensity) -> Result<Self> {
        if first.model().rank() != second.model().rank() {
            return Err(LabError::InvalidArgument(format!(
                "ranks differ: {} and {}",
                first.model().rank(),
                second.model().rank()
            )));
        }
        Ok(MetricPair { first, second })
    }

    /// Both models with the given weights, each at visual dimension `d`.
    pub fn from_weights(w1: &[f64], d1: f64, w2: &[f64], d2: f64) -> Result<Self> {
        Self::new(
            ConformalDensity::with_dimension(&GroupModel::new(w1)?, d1)?,
            ConformalDensity::with_dimension(&GroupModel::new(w2)?, d2)?,
        )
    }

    fn params(&self, report: &mut ExperimentReport) {
        for (tag, rho) in [("1", &self.first), ("2", &self.second)] {
            let w = rho.model().generator_weights();
            report.param(
                &format!("weights{tag}"),
                w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            );
            report.param(&format!("h{tag}"), rho.h());
            report.param(&format!("epsilon{tag}"), rho.epsilon());
            report.param(&format!("D{tag}"), rho.dimension());
        }
    }
}

/// `max_{|g|_1 <= R} |h_1 |g|_1 - h_2 |g|_2|` for `R = 1..=r_max`, with the
/// value along the powers of the last generator for reference.
pub fn similarity_deviation_report(
    mp: &MetricPair,
    r_max: usize,
    cap: usize,
) -> Result<ExperimentReport> {
    let (m1, m2) = (mp.first.model(), mp.second.model());
    let (h1, h2) = (mp.first.h(), mp.second.h());
    let words = m1.ball(r_max as f64, cap)?;
    let mut best = vec![0.0f64; r_max + 1];
    for g in &words {
        let dev = (h1 * g.wlen() - h2 * m2.wlen_of(g.letters())).abs();
        let r = (g.wlen() - m1.tolerance()).ceil().max(0.0) as usize;
        if r <= r_max {
            best[r] = best[r].max(dev);
        }
    }
    let last = (m1.rank() - 1) as u8;
    let mut report = ExperimentReport::new("similarity", &["R", "max_deviation", "along_last_generator"]);
    mp.params(&mut report);
    report.param("r_max", r_max);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut running = 0.0f64;
    for r in 1..=r_max {
        running = running.max(best[r]).max(best[r - 1]);
        // powers of the last generator with |b^n|_1 <= R
        let n = (r as f64 / m1.weight(last) + m1.tolerance()).floor();
        let along = n * (h1 * m1.weight(last) - h2 * m2.weight(last)).abs();
        xs.push(r as f64);
        ys.push(running);
        report.push(row![r, running, along]);
    }
    let slope = stats::fit_line(&xs, &ys).map_or(0.0, |f| f.slope);
    let along_slope = (h1 - h2 * m2.weight(last) / m1.weight(last)).abs();
    let verdict = SimilarityVerdict::from_slope(slope);
    report.summarize("slope", slope);
    report.summarize("along_last_generator_slope", along_slope);
    report.summarize("max_deviation", running_max(&ys));
    report.summarize("verdict", verdict.to_string());
    Ok(report)
}

fn running_max(ys: &[f64]) -> f64 {
    ys.iter().copied().fold(0.0, f64::max)
}

/// Spread `max / min` of `mu_1([w]) / mu_2([w])` over depth-`n` cylinders.
pub fn density_ratio_report(mp: &MetricPair, depth: usize, cap: usize) -> Result<ExperimentReport> {
    if depth == 0 {
        return Err(LabError::InvalidArgument("depth must be at least 1".into()));
    }
    let m1 = mp.first.model();
    let mut report = ExperimentReport::new(
        "density_ratio",
        &["n", "cylinders", "min_ratio", "max_ratio", "log_spread"],
    );
    mp.params(&mut report);
    report.param("depth", depth);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in 1..=depth {
        let words = m1.words_of_length(n, cap)?;
        let ratios: Vec<f64> = words
            .iter()
            .map(|w| mp.first.mu_letters(w.letters()) / mp.second.mu_letters(w.letters()))
            .collect();
        let (lo, hi) = stats::min_max(&ratios).expect("nonempty level");
        let ls = (hi / lo).ln();
        xs.push(n as f64);
        ys.push(ls);
        report.push(row![n, words.len(), lo, hi, ls]);
    }
    let slope = stats::fit_line(&xs, &ys).map_or(0.0, |f| f.slope);
    report.summarize("log_spread_slope", slope);
    report.summarize("verdict", DensityVerdict::from_slope(slope).to_string());
    Ok(report)
}

/// `[x, y; z, w] = d(x, z) d(y, w) / (d(x, w) d(y, z))` under the visual metric of `rho`.
pub fn cross_ratio(
    rho: &ConformalDensity,
    x: &BoundaryPoint,
    y: &BoundaryPoint,
    z: &BoundaryPoint,
    w: &BoundaryPoint,
) -> Result<f64> {
    let pts = [x, y, z, w];
    for i in 0..4 {
        for j in i + 1..4 {
            if pts[i] == pts[j] {
                return Err(LabError::InvalidArgument(
                    "cross ratio needs four distinct points".into(),
                ));
            }
        }
    }
    let m = rho.model();
    let vm = rho.visual_metric();
    let d = |a, b| vm.distance(m, a, b);
    Ok(d(x, z) * d(y, w) / (d(x, w) * d(y, z)))
}

/// Log-log regression of the second visual metric against the first over
/// sampled pairs, and of the cross ratios over sampled quadruples.
pub fn holder_fit_report(
    mp: &MetricPair,
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let (m1, m2) = (mp.first.model(), mp.second.model());
    let (e1, e2) = (mp.first.epsilon(), mp.second.epsilon());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ExperimentReport::new(
        "holder",
        &["sample", "log_d1", "log_d2", "log_cross1", "log_cross2"],
    );
    mp.params(&mut report);
    report.param("samples", samples);
    report.param("depth", depth);
    report.param("seed", seed as i64);
    let (mut x, mut y, mut cx, mut cy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut i = 0;
    while i < samples {
        let p: Vec<BoundaryPoint> = (0..4)
            .map(|_| mp.first.sample_point(depth, &mut rng))
            .collect::<Result<_>>()?;
        if (0..4).any(|a| (a + 1..4).any(|b| p[a] == p[b])) {
            continue;
        }
        let ld1 = -e1 * m1.gromov_bb(&p[0], &p[1]);
        let ld2 = -e2 * m2.gromov_bb(&p[0], &p[1]);
        let lc1 = cross_ratio(&mp.first, &p[0], &p[1], &p[2], &p[3])?.ln();
        let lc2 = cross_ratio(&mp.second, &p[0], &p[1], &p[2], &p[3])?.ln();
        x.push(ld1);
        y.push(ld2);
        cx.push(lc1);
        cy.push(lc2);
        report.push(row![i, ld1, ld2, lc1, lc2]);
        i += 1;
    }
    let expected = mp.first.dimension() / mp.second.dimension();
    report.summarize("expected_slope", expected);
    if let Some(fit) = stats::fit_line(&x, &y) {
        let spread = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - fit.slope * a - fit.intercept).abs())
            .fold(0.0, f64::max);
        report.summarize("slope", fit.slope);
        report.summarize("residual_spread", spread);
    }
    if let Some(fit) = stats::fit_line(&cx, &cy) {
        report.summarize("cross_ratio_slope", fit.slope);
    }
    Ok(report)
}

/// Verdicts of both scans on one pair.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub similarity: SimilarityVerdict,
    pub density: DensityVerdict,
    pub deviation_slope: f64,
    pub log_spread_slope: f64,
}

impl Classification {
    pub fn consistent(&self) -> bool {
        self.similarity.expected_density() == self.density
    }
}

pub fn classify(mp: &MetricPair, r_max: usize, depth: usize, cap: usize) -> Result<Classification> {
    let s = similarity_deviation_report(mp, r_max, cap)?;
    let d = density_ratio_report(mp, depth, cap)?;
    let deviation_slope = s.summary_f64("slope").unwrap_or(0.0);
    let log_spread_slope = d.summary_f64("log_spread_slope").unwrap_or(0.0);
    Ok(Classification {
        similarity: SimilarityVerdict::from_slope(deviation_slope),
        density: DensityVerdict::from_slope(log_spread_slope),
        deviation_slope,
        log_spread_slope,
    })
}

/// A named pair of weightings with the expected answer.
#[derive(Debug, Clone)]
pub struct LibraryPair {
    pub name: &'static str,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub dimensions: (f64, f64),
    pub similar: bool,
}

/// Constructed ground truth: proportional weightings are similar, weightings
/// with different normalized length spectra are not.
pub fn library() -> Vec<LibraryPair> {
    let p = |name, first: &[f64], second: &[f64], d1, d2, similar| LibraryPair {
        name,
        first: first.to_vec(),
        second: second.to_vec(),
        dimensions: (d1, d2),
        similar,
    };
    vec![
        p("unit_vs_double", &[1.0, 1.0], &[2.0, 2.0], 2.0, 2.0, true),
        p("weighted_vs_scaled", &[1.0, 2.0], &[3.0, 6.0], 2.0, 4.0, true),
        p("identical", &[1.0, 1.5], &[1.0, 1.5], 2.0, 3.0, true),
        p("rank3_scaled", &[1.0, 2.0, 3.0], &[0.5, 1.0, 1.5], 2.0, 2.0, true),
        p("unit_vs_weighted", &[1.0, 1.0], &[1.0, 2.0], 2.0, 2.0, false),
        p("swapped", &[1.0, 2.0], &[2.0, 1.0], 2.0, 2.0, false),
        p("rank3_perturbed", &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.5], 2.0, 2.0, false),
        p("mild", &[1.0, 1.2], &[1.0, 1.0], 2.0, 2.0, false),
    ]
}

/// Both verdicts on every library pair.
pub fn classify_report(r_max: usize, depth: usize, cap: usize) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "classify",
        &[
            "pair",
            "expected",
            "similarity",
            "density",
            "deviation_slope",
            "log_spread_slope",
            "correct",
            "consistent",
        ],
    );
    report.param("r_max", r_max);
    report.param("depth", depth);
    let mut all_correct = true;
    let mut all_consistent = true;
    for lp in library() {
        let mp = MetricPair::from_weights(&lp.first, lp.dimensions.0, &lp.second, lp.dimensions.1)?;
        let c = classify(&mp, r_max, depth, cap)?;
        let expected = if lp.similar {
            SimilarityVerdict::Similar
        } else {
            SimilarityVerdict::NotSimilar
        };
        let correct = c.similarity == expected;
        all_correct &= correct;
        all_consistent &= c.consistent();
        report.push(row![
            lp.name,
            expected.to_string(),
            c.similarity.to_string(),
            c.density.to_string(),
            c.deviation_slope,
            c.log_spread_slope,
            correct,
            c.consistent()
        ]);
    }
    report.check("verdicts_correct", all_correct, "similarity verdicts against ground truth".to_string());
    report.check("verdicts_consistent", all_consistent, "similarity and density verdicts agree".to_string());
    Ok(report)
}
