//! Run configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::ConformalDensity;
use crate::error::{LabError, Result};
use crate::words::GroupModel;

/// Generator weights plus at most one of `dimension` or `epsilon`;
/// with neither the dimension is 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "unit_weights")]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub dimension: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn unit_weights() -> Vec<f64> {
    vec![1.0, 1.0]
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::with_dimension(&[1.0, 1.0], 2.0)
    }
}

impl ModelSpec {
    pub fn with_dimension(weights: &[f64], dimension: f64) -> Self {
        ModelSpec {
            weights: weights.to_vec(),
            dimension: Some(dimension),
            epsilon: None,
        }
    }

    pub fn model(&self) -> Result<GroupModel> {
        GroupModel::new(&self.weights)
    }

    /// Solves for `h` and builds the density; fails when `epsilon >= h`.
    pub fn density(&self) -> Result<ConformalDensity> {
        let m = self.model()?;
        match (self.dimension, self.epsilon) {
            (Some(d), None) => ConformalDensity::with_dimension(&m, d),
            (None, None) => ConformalDensity::with_dimension(&m, 2.0),
            (None, Some(e)) => ConformalDensity::build(&m, e),
            _ => Err(LabError::InvalidArgument(
                "model takes dimension or epsilon, not both".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Main model for single-model experiments.
    pub model: ModelSpec,
    /// Second canonical model; also the partner of `model` in `classify`.
    pub weighted: ModelSpec,
    pub seed: u64,
    pub cap: usize,
    pub out: PathBuf,

    pub sigma0: f64,
    pub alpha: f64,
    pub separation: f64,
    pub tau_prime: f64,

    pub density_nodes: usize,
    pub conformal_trials: usize,
    pub poincare_levels: f64,
    pub shadow_r_max: f64,
    pub generalized_r_max: f64,
    pub generalized_s_step: f64,
    pub ahlfors_samples: usize,
    pub radius_base: f64,
    pub ahlfors_k_max: u32,
    pub growth_radii: Vec<f64>,
    pub cone_radius: f64,
    pub cone_s: Vec<f64>,
    pub cone_samples: usize,
    pub cover_radius: f64,
    pub cover_samples: usize,

    pub decay_annuli: Vec<f64>,
    pub decay_depth: usize,
    pub p1_r_max: f64,
    pub sr_radii: Vec<f64>,
    pub mc_samples: usize,
    pub mc_depth: usize,
    pub projection_k_max: u32,
    pub projection_tests: usize,
    pub projection_test_depth: usize,

    pub cocycle_trials: usize,
    pub bms_trials: usize,
    pub max_word_len: usize,
    pub gap_bound: f64,
    pub gap_samples: usize,
    pub tube_lengths: Vec<f64>,
    pub tube_pairs: usize,
    pub properness_theta: f64,
    pub properness_k: f64,
    pub properness_r_max: f64,
    pub ergodic_pairs: usize,
    pub t_grid: Vec<f64>,
    pub ergodic_start: f64,
    pub perturb_depth: usize,

    pub classify_r_max: usize,
    pub classify_depth: usize,
    pub holder_samples: usize,
    pub holder_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec::default(),
            weighted: ModelSpec::with_dimension(&[1.0, 2.0], 2.0),
            seed: 20240917,
            cap: 1 << 22,
            out: PathBuf::from("reports"),
            sigma0: 1.5,
            alpha: 1.5,
            separation: 1.5,
            tau_prime: 2.0,
            density_nodes: 1000,
            conformal_trials: 10_000,
            poincare_levels: 12.0,
            shadow_r_max: 8.0,
            generalized_r_max: 6.0,
            generalized_s_step: 0.5,
            ahlfors_samples: 1000,
            radius_base: 3.0,
            ahlfors_k_max: 6,
            growth_radii: (2..=9).map(f64::from).collect(),
            cone_radius: 6.0,
            cone_s: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            cone_samples: 50,
            cover_radius: 5.0,
            cover_samples: 500,
            decay_annuli: (2..=10).map(f64::from).collect(),
            decay_depth: 12,
            p1_r_max: 8.0,
            sr_radii: vec![3.0, 4.0, 5.0, 6.0],
            mc_samples: 4,
            mc_depth: 4,
            projection_k_max: 6,
            projection_tests: 4,
            projection_test_depth: 4,
            cocycle_trials: 10_000,
            bms_trials: 1000,
            max_word_len: 8,
            gap_bound: 2.0,
            gap_samples: 2000,
            tube_lengths: vec![10.0, 20.0, 40.0],
            tube_pairs: 5,
            properness_theta: 0.99,
            properness_k: 0.5,
            properness_r_max: 8.0,
            ergodic_pairs: 50,
            t_grid: vec![25.0, 50.0, 100.0, 200.0],
            ergodic_start: 0.0,
            perturb_depth: 3,
            classify_r_max: 7,
            classify_depth: 7,
            holder_samples: 200,
            holder_depth: 10,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("{name} must be positive, got {x}")))
    }
}

fn nonzero(name: &str, n: usize) -> Result<()> {
    if n > 0 {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("{name} must be positive")))
    }
}

fn grid(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(LabError::InvalidArgument(format!("{name} must be a nonempty finite grid")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::InvalidArgument(format!("config: {e}")))
    }

    /// Checks every field and builds both densities (which checks `epsilon < h`).
    pub fn validate(&self) -> Result<()> {
        nonzero("cap", self.cap)?;
        for (name, x) in [
            ("sigma0", self.sigma0),
            ("alpha", self.alpha),
            ("separation", self.separation),
            ("tau_prime", self.tau_prime),
            ("poincare_levels", self.poincare_levels),
            ("shadow_r_max", self.shadow_r_max),
            ("generalized_r_max", self.generalized_r_max),
            ("generalized_s_step", self.generalized_s_step),
            ("cone_radius", self.cone_radius),
            ("cover_radius", self.cover_radius),
            ("p1_r_max", self.p1_r_max),
            ("gap_bound", self.gap_bound),
            ("properness_theta", self.properness_theta),
            ("properness_k", self.properness_k),
            ("properness_r_max", self.properness_r_max),
        ] {
            positive(name, x)?;
        }
        if !(self.radius_base > 1.0) {
            return Err(LabError::InvalidArgument("radius_base must exceed 1".into()));
        }
        for (name, n) in [
            ("density_nodes", self.density_nodes),
            ("conformal_trials", self.conformal_trials),
            ("ahlfors_samples", self.ahlfors_samples),
            ("cone_samples", self.cone_samples),
            ("cover_samples", self.cover_samples),
            ("decay_depth", self.decay_depth),
            ("mc_samples", self.mc_samples),
            ("mc_depth", self.mc_depth),
            ("projection_tests", self.projection_tests),
            ("projection_test_depth", self.projection_test_depth),
            ("cocycle_trials", self.cocycle_trials),
            ("bms_trials", self.bms_trials),
            ("max_word_len", self.max_word_len),
            ("gap_samples", self.gap_samples),
            ("tube_pairs", self.tube_pairs),
            ("ergodic_pairs", self.ergodic_pairs),
            ("classify_r_max", self.classify_r_max),
            ("classify_depth", self.classify_depth),
            ("holder_samples", self.holder_samples),
            ("holder_depth", self.holder_depth),
        ] {
            nonzero(name, n)?;
        }
        for (name, xs) in [
            ("growth_radii", &self.growth_radii),
            ("cone_s", &self.cone_s),
            ("decay_annuli", &self.decay_annuli),
            ("sr_radii", &self.sr_radii),
            ("tube_lengths", &self.tube_lengths),
            ("t_grid", &self.t_grid),
        ] {
            grid(name, xs)?;
        }
        if self.t_grid.iter().any(|&t| t <= 0.0) {
            return Err(LabError::InvalidArgument("t_grid entries must be positive".into()));
        }
        let a = self.model.density()?;
        let b = self.weighted.density()?;
        if a.model().rank() != b.model().rank() {
            return Err(LabError::InvalidArgument(
                "model and weighted must have the same rank".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert_eq!(RunConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn partial_documents_keep_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 5, "model": {"weights": [1, 3]}}"#).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.model.weights, vec![1.0, 3.0]);
        assert_eq!(c.model.density().unwrap().dimension(), 2.0);
        let c = RunConfig::from_json(r#"{"weighted": {"weights": [1, 2], "epsilon": 0.3}}"#)
            .unwrap();
        c.validate().unwrap();
        assert_eq!(c.weighted.dimension, None);
        assert_eq!(c.sigma0, 1.5);
    }

    #[test]
    fn validation_failures() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let bad = |c: RunConfig| c.validate().is_err();
        let c = RunConfig {
            model: ModelSpec {
                weights: vec![1.0, 1.0],
                dimension: None,
                epsilon: Some(2.0),
            },
            ..RunConfig::default()
        };
        assert!(matches!(c.validate(), Err(LabError::InvalidArgument(_))));
        assert!(bad(RunConfig { cap: 0, ..RunConfig::default() }));
        let mut both = RunConfig::default();
        both.model.epsilon = Some(0.5);
        assert!(bad(both));
        assert!(bad(RunConfig {
            weighted: ModelSpec::with_dimension(&[1.0, 1.0, 1.0], 2.0),
            ..RunConfig::default()
        }));
        assert!(bad(RunConfig { t_grid: vec![], ..RunConfig::default() }));
    }
}
