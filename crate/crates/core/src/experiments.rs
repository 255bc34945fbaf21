//! One runner per experiment: builds the inputs from a [`RunConfig`], runs
//! the scans and returns the reports to be written.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::boundary::Cylinder;
use crate::classify::{self, MetricPair};
use crate::config::RunConfig;
use crate::density::{critical_exponent, ConformalDensity};
use crate::error::{LabError, Result};
use crate::estimates;
use crate::flow::{self, ErgodicParams};
use crate::koopman::{self, kernel::KernelStep, sr::SrParams};
use crate::par::Exec;
use crate::report::ExperimentReport;
use crate::row;
use crate::step::StepFunction;
use crate::words::GroupModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Exponent,
    Density,
    Shadow,
    Ahlfors,
    Growth,
    Cone,
    Cover,
    MatrixCoeff,
    P1Norm,
    KernelConvergence,
    SrNorm,
    Projection,
    Cocycle,
    Bms,
    Properness,
    Ergodic,
    Classify,
}

impl Experiment {
    pub const ALL: [Experiment; 17] = [
        Experiment::Exponent,
        Experiment::Density,
        Experiment::Shadow,
        Experiment::Ahlfors,
        Experiment::Growth,
        Experiment::Cone,
        Experiment::Cover,
        Experiment::MatrixCoeff,
        Experiment::P1Norm,
        Experiment::KernelConvergence,
        Experiment::SrNorm,
        Experiment::Projection,
        Experiment::Cocycle,
        Experiment::Bms,
        Experiment::Properness,
        Experiment::Ergodic,
        Experiment::Classify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exponent => "exponent",
            Experiment::Density => "density",
            Experiment::Shadow => "shadow",
            Experiment::Ahlfors => "ahlfors",
            Experiment::Growth => "growth",
            Experiment::Cone => "cone",
            Experiment::Cover => "cover",
            Experiment::MatrixCoeff => "matrix-coeff",
            Experiment::P1Norm => "p1norm",
            Experiment::KernelConvergence => "kernel-convergence",
            Experiment::SrNorm => "sr-norm",
            Experiment::Projection => "projection",
            Experiment::Cocycle => "cocycle",
            Experiment::Bms => "bms",
            Experiment::Properness => "properness",
            Experiment::Ergodic => "ergodic",
            Experiment::Classify => "classify",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| LabError::InvalidArgument(format!("unknown experiment {s:?}")))
    }
}

/// A report and the file stem it is written under.
#[derive(Debug, Clone)]
pub struct Output {
    pub stem: String,
    pub report: ExperimentReport,
}

impl Output {
    fn main(e: Experiment, report: ExperimentReport) -> Self {
        Output {
            stem: e.name().to_string(),
            report,
        }
    }

    fn extra(stem: &str, report: ExperimentReport) -> Self {
        Output {
            stem: stem.to_string(),
            report,
        }
    }
}

/// Runs one experiment. The first output is written as `<name>.csv`/`.json`.
pub fn run(e: Experiment, cfg: &RunConfig, exec: Exec) -> Result<Vec<Output>> {
    cfg.validate()?;
    let rho = cfg.model.density()?;
    let m = rho.model();
    let seed = cfg.seed;
    let cap = cfg.cap;
    let out = match e {
        Experiment::Exponent => vec![Output::main(e, exponent_report(cfg)?)],
        Experiment::Density => {
            let mut v = vec![Output::main(e, density_report(&rho, cfg)?)];
            let w = cfg.weighted.density()?;
            v.push(Output::extra("density_weighted", density_report(&w, cfg)?));
            v
        }
        Experiment::Shadow => {
            let w = cfg.weighted.density()?;
            vec![
                Output::main(
                    e,
                    estimates::shadow_lemma_report(&rho, cfg.sigma0, cfg.shadow_r_max, cap, exec)?,
                ),
                Output::extra(
                    "shadow_weighted",
                    estimates::shadow_lemma_report(&w, cfg.sigma0, cfg.shadow_r_max, cap, exec)?,
                ),
                Output::extra(
                    "generalized_shadow",
                    estimates::generalized_shadow_report(
                        &rho,
                        cfg.generalized_r_max,
                        cfg.generalized_s_step,
                        cap,
                    )?,
                ),
            ]
        }
        Experiment::Ahlfors => vec![Output::main(
            e,
            estimates::ahlfors_report(
                &rho,
                cfg.ahlfors_samples,
                cfg.radius_base,
                cfg.ahlfors_k_max,
                seed,
            )?,
        )],
        Experiment::Growth => {
            let w = cfg.weighted.density()?;
            vec![
                Output::main(
                    e,
                    estimates::growth_report(m, rho.h(), cfg.alpha, &cfg.growth_radii, cap)?,
                ),
                Output::extra(
                    "growth_weighted",
                    estimates::growth_report(w.model(), w.h(), cfg.alpha, &cfg.growth_radii, cap)?,
                ),
            ]
        }
        Experiment::Cone => vec![Output::main(
            e,
            estimates::cone_report(
                &rho,
                cfg.cone_radius,
                cfg.alpha,
                &cfg.cone_s,
                cfg.cone_samples,
                seed,
                cap,
            )?,
        )],
        Experiment::Cover => vec![Output::main(
            e,
            estimates::cover_multiplicity_report(
                &rho,
                cfg.cover_radius,
                cfg.alpha,
                cfg.sigma0,
                cfg.cover_samples,
                seed,
                cap,
            )?,
        )],
        Experiment::MatrixCoeff => {
            let (phi, psi) = koopman::canonical_pair(&rho, cfg.decay_depth);
            let mut r = koopman::decay_report(&rho, &phi, &psi, &cfg.decay_annuli, cap, exec)?;
            r.param("decay_depth", cfg.decay_depth);
            vec![Output::main(e, r)]
        }
        Experiment::P1Norm => {
            let xi = m.parse_point("", "a")?;
            vec![
                Output::main(e, koopman::p1_norm_report(&rho, cfg.p1_r_max, cap, exec)?),
                Output::extra(
                    "annulus_weight",
                    koopman::annulus_weight_report(&rho, &cfg.growth_radii, cfg.alpha, &xi, cap)?,
                ),
            ]
        }
        Experiment::KernelConvergence => {
            let (a, b) = (first_letter(m), second_letter(m));
            let k = KernelStep::rectangle(m, &a, &b);
            let phi = StepFunction::indicator(m, &b);
            let psi = StepFunction::indicator(m, &a);
            vec![Output::main(
                e,
                koopman::sr::sr_convergence_report(
                    &rho,
                    &k,
                    &phi,
                    &psi,
                    &sr_params(cfg),
                    &cfg.sr_radii,
                    exec,
                )?,
            )]
        }
        Experiment::SrNorm => vec![Output::main(
            e,
            koopman::sr::sr_norm_report(
                &rho,
                &KernelStep::constant(m, 1.0),
                &sr_params(cfg),
                &cfg.sr_radii,
                cfg.mc_samples,
                cfg.mc_depth,
                seed,
                exec,
            )?,
        )],
        Experiment::Projection => {
            let radii: Vec<f64> = (1..=cfg.projection_k_max)
                .map(|k| cfg.radius_base.powf(-(k as f64) / 2.0))
                .collect();
            let tests = projection_tests(m, cfg);
            let mut r = koopman::projection_approx_report(&rho, &[first_letter(m)], &radii, &tests)?;
            r.param("test_depth", cfg.projection_test_depth);
            r.param("seed", seed as i64);
            vec![Output::main(e, r)]
        }
        Experiment::Cocycle => vec![
            Output::main(
                e,
                flow::cocycle_report(&rho, cfg.cocycle_trials, cfg.max_word_len, seed, exec)?,
            ),
            Output::extra(
                "cocycle_gap",
                flow::tau_sigma_gap_report(&rho, cfg.gap_bound, cfg.gap_samples, seed, exec)?,
            ),
            Output::extra(
                "tube_census",
                flow::tube_census_report(
                    &rho,
                    cfg.gap_bound,
                    &cfg.tube_lengths,
                    cfg.tube_pairs,
                    seed,
                    cap,
                )?,
            ),
        ],
        Experiment::Bms => vec![Output::main(
            e,
            flow::bms_report(&rho, cfg.bms_trials, cfg.max_word_len, seed, exec)?,
        )],
        Experiment::Properness => vec![Output::main(
            e,
            flow::properness_report(
                &rho,
                cfg.properness_theta,
                cfg.properness_k,
                cfg.properness_r_max,
                cap,
            )?,
        )],
        Experiment::Ergodic => {
            let f = KernelStep::rectangle(m, &first_letter(m), &second_letter(m));
            vec![Output::main(e, flow::ergodic_experiment(&rho, &f, &ergodic_params(cfg), exec)?)]
        }
        Experiment::Classify => {
            let mp = MetricPair::new(rho.clone(), cfg.weighted.density()?)?;
            vec![
                Output::main(
                    e,
                    classify::classify_report(cfg.classify_r_max, cfg.classify_depth, cap)?,
                ),
                Output::extra(
                    "similarity",
                    classify::similarity_deviation_report(&mp, cfg.classify_r_max, cap)?,
                ),
                Output::extra(
                    "density_ratio",
                    classify::density_ratio_report(&mp, cfg.classify_depth, cap)?,
                ),
                Output::extra(
                    "holder",
                    classify::holder_fit_report(&mp, cfg.holder_samples, cfg.holder_depth, seed)?,
                ),
            ]
        }
    };
    Ok(out)
}

pub fn sr_params(cfg: &RunConfig) -> SrParams {
    SrParams {
        r: cfg.sr_radii[0],
        alpha: cfg.alpha,
        separation: cfg.separation,
        sigma0: cfg.sigma0,
        tau_prime: cfg.tau_prime,
        cap: cfg.cap,
    }
}

pub fn ergodic_params(cfg: &RunConfig) -> ErgodicParams {
    ErgodicParams {
        pairs: cfg.ergodic_pairs,
        t_grid: cfg.t_grid.clone(),
        start: cfg.ergodic_start,
        seed: cfg.seed,
        cap: cfg.cap,
        perturb_depth: cfg.perturb_depth,
    }
}

/// Random step functions of depth `projection_test_depth`, one stream per seed.
pub fn projection_tests(m: &GroupModel, cfg: &RunConfig) -> Vec<StepFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.projection_tests)
        .map(|_| {
            StepFunction::from_depth(m, cfg.projection_test_depth, |_| rng.random_range(-1.0..1.0))
        })
        .collect()
}

fn first_letter(m: &GroupModel) -> Cylinder {
    Cylinder::new(m.word(&[0]).expect("letter"))
}

fn second_letter(m: &GroupModel) -> Cylinder {
    Cylinder::new(m.word(&[1]).expect("letter"))
}

/// `h` for both models and the homogeneity `h(c l) = h(l) / c`.
pub fn exponent_report(cfg: &RunConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "exponent",
        &["model", "weights", "scale", "h", "epsilon", "D", "eigen_residual", "homogeneity_error"],
    );
    let mut worst: f64 = 0.0;
    let mut hs = Vec::new();
    for (name, spec) in [("model", &cfg.model), ("weighted", &cfg.weighted)] {
        let rho = spec.density()?;
        let m = rho.model();
        let weights = m
            .generator_weights()
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(",");
        hs.push(rho.h());
        report.push(row![
            name,
            weights.clone(),
            1.0,
            rho.h(),
            rho.epsilon(),
            rho.dimension(),
            rho.eigen_residual(),
            0.0
        ]);
        for c in [0.5, 2.0, 3.0] {
            let hc = critical_exponent(&m.scaled(c)?);
            let err = (hc - rho.h() / c).abs();
            worst = worst.max(err);
            report.push(row![name, weights.clone(), c, hc, "", "", "", err]);
        }
    }
    report.summarize("h", hs[0]);
    report.summarize("h_weighted", hs[1]);
    report.summarize("max_homogeneity_error", worst);
    report.check("homogeneity", worst < 1e-9, format!("max error {worst:e}"));
    Ok(report)
}

/// Depth-1 cylinder masses against truncated Poincare ratios, plus the
/// additivity, conformality and chain-rule scans.
pub fn density_report(rho: &ConformalDensity, cfg: &RunConfig) -> Result<ExperimentReport> {
    let m = rho.model();
    let s = rho.h() + 0.01;
    let mut report = ExperimentReport::new("density", &["word", "mu", "poincare", "difference"]);
    report.param("poincare_s", s);
    report.param("poincare_levels", cfg.poincare_levels);
    report.param("density_nodes", cfg.density_nodes);
    report.param("conformal_trials", cfg.conformal_trials);
    report.param("seed", cfg.seed as i64);
    let mut poincare_err: f64 = 0.0;
    for c in Cylinder::whole(m).children(m) {
        let mu = rho.mu_cylinder(&c);
        let p = rho.poincare_truncated(s, cfg.poincare_levels, &c)?;
        poincare_err = poincare_err.max((p - mu).abs());
        report.push(row![m.format(c.prefix()), mu, p, p - mu]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut additivity: f64 = 0.0;
    let mut done = 0;
    while done < cfg.density_nodes {
        let n = rng.random_range(1..=8);
        let c = Cylinder::new(m.random_word(&mut rng, n));
        let kids: f64 = c.children(m).iter().map(|k| rho.mu_cylinder(k)).sum();
        additivity = additivity.max((kids - rho.mu_cylinder(&c)).abs());
        done += 1;
    }

    let mut conformal: f64 = 0.0;
    let mut chain: f64 = 0.0;
    for _ in 0..cfg.conformal_trials {
        let (lg, lh) = (
            rng.random_range(0..=cfg.max_word_len),
            rng.random_range(0..=cfg.max_word_len),
        );
        let g = m.random_word(&mut rng, lg);
        let h = m.random_word(&mut rng, lh);
        let xi = rho.sample_point(2 * cfg.max_word_len + 4, &mut rng)?;
        let measured = rho.rn_by_cylinders(&g, &xi, g.len() + 2);
        let gp = m.gromov_wb(&g, &xi);
        conformal = conformal.max((measured * (rho.h() * (g.wlen() - 2.0 * gp)).exp() - 1.0).abs());
        let lhs = rho.rn_derivative(&m.mul(&g, &h), &xi);
        let rhs = rho.rn_derivative(&g, &xi) * rho.rn_derivative(&h, &m.act(&m.invert(&g), &xi));
        chain = chain.max((lhs / rhs - 1.0).abs());
    }

    let mu = |s: &str| -> Result<f64> { Ok(rho.mu_cylinder(&Cylinder::new(m.parse(s)?))) };
    report.summarize("h", rho.h());
    report.summarize("mu_a", mu("a")?);
    report.summarize("mu_ab", mu("ab")?);
    report.summarize("max_poincare_difference", poincare_err);
    report.summarize("max_additivity_error", additivity);
    report.summarize("max_conformal_error", conformal);
    report.summarize("max_chain_rule_error", chain);
    report.summarize("eigen_residual", rho.eigen_residual());
    report.check("additivity", additivity < 1e-9, format!("max error {additivity:e}"));
    report.check("conformality", conformal < 1e-9, format!("max error {conformal:e}"));
    report.check("chain_rule", chain < 1e-9, format!("max error {chain:e}"));
    Ok(report)
}

/// Header for every written report: the config echo, version and wall time.
pub fn header(cfg: &RunConfig, name: &str, exec: Exec, wall_time: f64) -> Map<String, Value> {
    let mut h = Map::new();
    h.insert("subcommand".into(), json!(name));
    h.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    h.insert("config".into(), cfg.to_json());
    h.insert("exec".into(), json!(exec));
    h.insert("wall_time_s".into(), json!(wall_time));
    h
}

/// Runs `e` and writes every output under `dir`. Returns the outputs.
pub fn run_and_write(e: Experiment, cfg: &RunConfig, dir: &Path, exec: Exec) -> Result<Vec<Output>> {
    let start = Instant::now();
    let outputs = run(e, cfg, exec)?;
    let secs = start.elapsed().as_secs_f64();
    for o in &outputs {
        o.report.write_files(dir, &o.stem, header(cfg, e.name(), exec, secs))?;
    }
    Ok(outputs)
}
