//! Run configuration. Every field except the potential kind has a default;
//! configs round-trip exactly through TOML because floats are serialized in
//! shortest round-trip form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{Potential, PotentialError};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("missing required key {0}")]
    MissingKey(&'static str),
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: &'static str, reason: String },
    #[error("potential construction failed: {0}")]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKindConfig {
    Zero,
    BoundedBump,
    CappedSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    /// Required: "zero", "bounded-bump" or "capped-singular".
    pub kind: Option<PotentialKindConfig>,
    /// Bump amplitude.
    pub psi0: f64,
    /// Support radius.
    pub r0: f64,
    /// Singular coupling.
    pub g: f64,
    /// Singular exponent.
    pub alpha: f64,
    /// Matching radius where the power law blends toward zero.
    pub r1: f64,
    /// Numerical floor radius for the singular family.
    pub rcap: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            kind: None,
            psi0: 1.0,
            r0: 1.0,
            g: 1.0,
            alpha: 1.5,
            r1: 0.5,
            rcap: 1e-4,
        }
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential, ConfigError> {
        match self.kind {
            None => Err(ConfigError::MissingKey("potential.kind")),
            Some(PotentialKindConfig::Zero) => Ok(Potential::zero(self.r0)?),
            Some(PotentialKindConfig::BoundedBump) => {
                Ok(Potential::bounded_bump(self.psi0, self.r0)?)
            }
            Some(PotentialKindConfig::CappedSingular) => Ok(Potential::capped_singular(
                self.g, self.alpha, self.r1, self.r0, self.rcap,
            )?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyConfig {
    pub mass: f64,
    /// Constant driving force along +x.
    pub force: f64,
    /// Initial body speed.
    pub xidot0: f64,
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig {
            mass: 1.0,
            force: 1.0,
            xidot0: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityModel {
    Cold,
    Maxwellian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidConfig {
    /// Mass density of the fluid.
    pub rho0: f64,
    pub velocity_model: VelocityModel,
    /// Inverse temperature of the Maxwellian model.
    pub beta: f64,
    /// Velocity draws per spatial site (Maxwellian only).
    pub mc_samples: u32,
    pub rng_seed: u64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        FluidConfig {
            rho0: 0.1,
            velocity_model: VelocityModel::Cold,
            beta: 25.0,
            mc_samples: 1,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Axial spacing of seeded columns.
    pub dx: f64,
    /// Radial spacing of seeded rings.
    pub deta: f64,
    /// Radial extent of the curtain; must exceed the support radius.
    pub eta_max: f64,
    /// Axial depth of the pre-seeded slab ahead of the body.
    pub lookahead: f64,
    /// Shell thickness beyond the support radius inside which particles are
    /// integrated (they feel zero force there, so this costs accuracy
    /// nothing and makes entry crossings well resolved).
    pub margin: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dx: 0.05,
            deta: 0.05,
            eta_max: 1.1,
            lookahead: 2.0,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    /// Hard cap on the step size.
    pub dt_max: f64,
    /// Resolution factor: dt <= c_res * r0 / xidot, so a support crossing
    /// takes at least ~2/c_res steps.
    pub c_res: f64,
    /// Stiffness factor: dt <= stiff_factor / sqrt(max |psi''|).
    pub stiff_factor: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    /// Hard integrity tolerance on ledger residuals, relative to M*xidot.
    pub ledger_tol: f64,
    /// Step-halving retries after a sub-cap approach before giving up.
    pub max_step_retries: u32,
    /// Relative-velocity floor for the adiabatic quantity, as a fraction of
    /// the initial body speed.
    pub vmin_factor: f64,
    /// Hold the body at constant velocity (no back-reaction).
    pub frozen_body: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt_max: 2e-4,
            c_res: 0.02,
            stiff_factor: 0.02,
            t_max: 50.0,
            sample_interval: 0.02,
            ledger_tol: 1e-3,
            max_step_retries: 12,
            vmin_factor: 1e-6,
            frozen_body: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Annulus-budget exponent; valid range (0, 2/alpha - 1).
    pub epsilon: f64,
    /// Fraction of the run used for the tail slope.
    pub tail_fraction: f64,
    /// Log-space bins for friction-vs-speed fits from trajectories.
    pub speed_bins: u32,
    /// Relative half-width of an annulus-budget observation window around a
    /// reference speed.
    pub observation_rel_width: f64,
    /// Default sweep lists for oracle tables and sweeps.
    pub sweep_speeds: Vec<f64>,
    pub sweep_etas: Vec<f64>,
    pub sweep_alphas: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            epsilon: 0.1,
            tail_fraction: 0.25,
            speed_bins: 12,
            observation_rel_width: 0.1,
            sweep_speeds: vec![5.0, 10.0, 20.0, 40.0, 80.0],
            sweep_etas: vec![0.25, 0.5, 0.75],
            sweep_alphas: vec![1.0, 1.5, 2.5, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub write_events: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            write_events: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub potential: PotentialConfig,
    pub body: BodyConfig,
    pub fluid: FluidConfig,
    pub grid: GridConfig,
    pub integration: IntegrationConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

fn check(cond: bool, key: &'static str, reason: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::InvalidValue {
            key,
            reason: reason.to_string(),
        })
    }
}

impl SimConfig {
    /// Validate all numeric constraints and construct the potential once to
    /// surface parameter errors early.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.potential.build()?;
        let r0 = self.potential.r0;
        check(self.body.mass > 0.0, "body.mass", "must be > 0")?;
        check(self.body.force >= 0.0, "body.force", "must be >= 0")?;
        check(self.body.xidot0 > 0.0, "body.xidot0", "must be > 0")?;
        check(self.fluid.rho0 >= 0.0, "fluid.rho0", "must be >= 0")?;
        check(self.fluid.beta > 0.0, "fluid.beta", "must be > 0")?;
        check(self.fluid.mc_samples >= 1, "fluid.mc_samples", "must be >= 1")?;
        check(self.grid.dx > 0.0, "grid.dx", "must be > 0")?;
        check(self.grid.deta > 0.0, "grid.deta", "must be > 0")?;
        check(
            self.grid.eta_max > r0,
            "grid.eta_max",
            "must exceed the support radius",
        )?;
        check(
            self.grid.lookahead > r0,
            "grid.lookahead",
            "must exceed the support radius or the body could outrun the curtain",
        )?;
        check(self.grid.margin > 0.0, "grid.margin", "must be > 0")?;
        check(self.integration.dt_max > 0.0, "integration.dt_max", "must be > 0")?;
        check(self.integration.c_res > 0.0, "integration.c_res", "must be > 0")?;
        check(
            self.integration.stiff_factor > 0.0,
            "integration.stiff_factor",
            "must be > 0",
        )?;
        check(self.integration.t_max > 0.0, "integration.t_max", "must be > 0")?;
        check(
            self.integration.sample_interval > 0.0,
            "integration.sample_interval",
            "must be > 0",
        )?;
        check(
            self.integration.ledger_tol > 0.0,
            "integration.ledger_tol",
            "must be > 0",
        )?;
        check(
            self.diagnostics.tail_fraction > 0.0 && self.diagnostics.tail_fraction <= 1.0,
            "diagnostics.tail_fraction",
            "must be in (0, 1]",
        )?;
        check(
            self.diagnostics.epsilon >= 0.0,
            "diagnostics.epsilon",
            "must be >= 0",
        )?;
        Ok(())
    }

    pub fn build_potential(&self) -> Result<Potential, ConfigError> {
        self.potential.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_config() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.potential.kind = Some(PotentialKindConfig::BoundedBump);
        cfg
    }

    #[test]
    fn missing_kind_is_named() {
        let cfg = SimConfig::default();
        assert_eq!(
            cfg.validate().unwrap_err(),
            ConfigError::MissingKey("potential.kind")
        );
    }

    #[test]
    fn default_bump_config_is_valid() {
        bump_config().validate().unwrap();
    }

    #[test]
    fn bad_lookahead_names_key() {
        let mut cfg = bump_config();
        cfg.grid.lookahead = 0.5;
        match cfg.validate().unwrap_err() {
            ConfigError::InvalidValue { key, .. } => assert_eq!(key, "grid.lookahead"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn toml_round_trip_is_identity() {
        let mut cfg = bump_config();
        cfg.body.xidot0 = 10.000000000000002; // not representable in short decimal
        cfg.integration.dt_max = 1.0 / 3.0;
        let text = toml::to_string(&cfg).unwrap();
        let back: SimConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let text2 = toml::to_string(&back).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<SimConfig>("[body]\nmasss = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("masss"));
    }
}
