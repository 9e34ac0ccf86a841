//! Registration configuration: weights, stiffness schedule, termination,
//! pruning thresholds, and the pre-warp/blend switches.
//!
//! The file format is a one-line header `morphfit-config v1` followed by
//! `key value` lines (`#` comments). Schedules take all their values on one
//! line. Unknown keys are rejected rather than ignored so typos cannot
//! silently fall back to defaults. The struct serializes to JSON for the
//! metrics snapshot, in declaration order.

use std::path::Path;

use serde::Serialize;

use crate::error::{MorphError, Result};

pub const CONFIG_HEADER: &str = "morphfit-config v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistrationConfig {
    /// Distance-term weight α.
    pub alpha: f64,
    /// Landmark-term weight γ (constant across stages unless
    /// `gamma_schedule` is set).
    pub gamma: f64,
    /// Normal-term weight η.
    pub eta: f64,
    /// Stiffness weights β, one per outer stage, strictly decreasing.
    pub beta_schedule: Vec<f64>,
    /// Optional per-stage γ override; length must match `beta_schedule`.
    pub gamma_schedule: Option<Vec<f64>>,
    /// Inner-loop convergence threshold on ‖T_new − T_old‖_F / √n.
    pub epsilon: f64,
    /// Inner-iteration cap per stage.
    pub max_inner: usize,
    /// Weight on the translation row inside the stiffness Frobenius norm
    /// (1 = the plain unweighted norm).
    pub translation_weight: f64,
    /// Blend band half-width Δ for the pre-warp; `None` means 5% of the
    /// template bounding-box diagonal.
    pub delta: Option<f64>,
    /// Use the printed (discontinuous) seam-blend weights.
    pub paper_literal_smooth: bool,
    /// Assemble normal rows at all. With this off the solver is exactly
    /// the three-term energy, regardless of η.
    pub normal_term: bool,
    /// Recompute template normals from the deformed positions each
    /// iteration instead of transforming rest normals.
    pub recompute_normals: bool,
    /// Drop correspondences farther than this distance.
    pub prune_max_distance: Option<f64>,
    /// Drop correspondences whose normals disagree by more than this many
    /// degrees.
    pub prune_max_normal_angle_deg: Option<f64>,
    /// Drop correspondences whose closest point lies on an open boundary
    /// edge of the target.
    pub prune_target_boundary: bool,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        // β from 100 down to 1, geometric, 8 stages.
        let beta_schedule = (0..8)
            .map(|k| 100.0 * 0.01f64.powf(k as f64 / 7.0))
            .collect();
        RegistrationConfig {
            alpha: 1.0,
            gamma: 10.0,
            eta: 0.1,
            beta_schedule,
            gamma_schedule: None,
            epsilon: 1e-4,
            max_inner: 20,
            translation_weight: 1.0,
            delta: None,
            paper_literal_smooth: false,
            normal_term: true,
            recompute_normals: false,
            prune_max_distance: None,
            prune_max_normal_angle_deg: None,
            prune_target_boundary: false,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(MorphError::Invalid(msg));
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ] {
            if !(v >= 0.0) {
                return invalid(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.alpha == 0.0 && self.gamma == 0.0 {
            return invalid("at least one of alpha and gamma must be positive".into());
        }
        if self.beta_schedule.is_empty() {
            return invalid("stiffness schedule must not be empty".into());
        }
        for &b in &self.beta_schedule {
            if !(b >= 0.0) {
                return invalid(format!("stiffness values must be nonnegative, got {b}"));
            }
        }
        if self
            .beta_schedule
            .windows(2)
            .any(|w| !(w[1] < w[0]))
        {
            return invalid("stiffness schedule must be strictly decreasing".into());
        }
        if let Some(gs) = &self.gamma_schedule {
            if gs.len() != self.beta_schedule.len() {
                return invalid(format!(
                    "gamma_schedule has {} entries but beta_schedule has {}",
                    gs.len(),
                    self.beta_schedule.len()
                ));
            }
            if gs.iter().any(|&g| !(g >= 0.0)) {
                return invalid("gamma_schedule values must be nonnegative".into());
            }
        }
        if !(self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_inner == 0 {
            return invalid("max_inner must be at least 1".into());
        }
        if !(self.translation_weight > 0.0) {
            return invalid(format!(
                "translation_weight must be positive, got {}",
                self.translation_weight
            ));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return invalid(format!("delta must be positive, got {d}"));
            }
        }
        if let Some(d) = self.prune_max_distance {
            if !(d > 0.0) {
                return invalid(format!("prune_max_distance must be positive, got {d}"));
            }
        }
        if let Some(a) = self.prune_max_normal_angle_deg {
            if !(a > 0.0) {
                return invalid(format!(
                    "prune_max_normal_angle_deg must be positive, got {a}"
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RegistrationConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<RegistrationConfig> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == CONFIG_HEADER => {}
            _ => {
                return Err(MorphError::parse(
                    source,
                    1,
                    format!("expected '{CONFIG_HEADER}' header"),
                ))
            }
        }

        let mut cfg = RegistrationConfig::default();
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).ok_or_else(|| {
                MorphError::parse(source, line_no, format!("key '{line}' has no value"))
            })?;
            let rest = rest.trim();
            let f64_value = || -> Result<f64> {
                rest.parse().map_err(|_| {
                    MorphError::parse(source, line_no, format!("invalid number '{rest}'"))
                })
            };
            let bool_value = || -> Result<bool> {
                match rest {
                    "true" => Ok(true),
                    "false" => Ok(false),
                    _ => Err(MorphError::parse(
                        source,
                        line_no,
                        format!("expected 'true' or 'false', found '{rest}'"),
                    )),
                }
            };
            let list_value = || -> Result<Vec<f64>> {
                rest.split_whitespace()
                    .map(|t| {
                        t.parse().map_err(|_| {
                            MorphError::parse(
                                source,
                                line_no,
                                format!("invalid number '{t}' in list"),
                            )
                        })
                    })
                    .collect()
            };
            match key {
                "alpha" => cfg.alpha = f64_value()?,
                "gamma" => cfg.gamma = f64_value()?,
                "eta" => cfg.eta = f64_value()?,
                "beta_schedule" => cfg.beta_schedule = list_value()?,
                "gamma_schedule" => cfg.gamma_schedule = Some(list_value()?),
                "epsilon" => cfg.epsilon = f64_value()?,
                "max_inner" => {
                    cfg.max_inner = rest.parse().map_err(|_| {
                        MorphError::parse(source, line_no, format!("invalid count '{rest}'"))
                    })?
                }
                "translation_weight" => cfg.translation_weight = f64_value()?,
                "delta" => cfg.delta = Some(f64_value()?),
                "paper_literal_smooth" => cfg.paper_literal_smooth = bool_value()?,
                "normal_term" => cfg.normal_term = bool_value()?,
                "recompute_normals" => cfg.recompute_normals = bool_value()?,
                "prune_max_distance" => cfg.prune_max_distance = Some(f64_value()?),
                "prune_max_normal_angle_deg" => {
                    cfg.prune_max_normal_angle_deg = Some(f64_value()?)
                }
                "prune_target_boundary" => cfg.prune_target_boundary = bool_value()?,
                other => {
                    return Err(MorphError::parse(
                        source,
                        line_no,
                        format!("unknown key '{other}'"),
                    ))
                }
            }
        }
        cfg.validate()
            .map_err(|e| match e {
                MorphError::Invalid(msg) => MorphError::parse(source, 0, msg),
                other => other,
            })?;
        Ok(cfg)
    }
}
