//! Run outputs: sampled body states, the collision-event log, and the
//! monitored extremes used by the diagnostics.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::math::Vec3;

/// One sampled instant of the body trajectory and the conservation ledgers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajSample {
    pub t: f64,
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
    /// Total x-force exerted by the fluid on the body.
    pub friction: f64,
    /// Particles not yet retired.
    pub n_active: u64,
    /// Momentum-ledger residual (should be ~0).
    pub ledger_momentum: f64,
    /// Energy-ledger residual (should be ~0).
    pub ledger_energy: f64,
}

/// One contiguous interaction window of a particle with the body's support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub particle_id: u64,
    /// 1-based count of windows for this particle.
    pub ordinal: u32,
    /// Entry time.
    pub tau: f64,
    /// Time spent inside the support.
    pub delta: f64,
    /// Impact parameter at seeding (initial distance from the x-axis).
    pub eta: f64,
    /// Distance from the x-axis at the start of this window.
    pub sigma: f64,
    /// Exit velocity minus entry velocity.
    pub dp: Vec3,
    /// Minimal separation from the body over the window.
    pub r_min: f64,
    /// Minimal body speed over the window.
    pub zeta: f64,
    /// The other printed convention: minimum of the inverse body speed,
    /// i.e. 1 / (max body speed over the window).
    pub zeta_alt: f64,
    /// Body speed at entry.
    pub xidot_at_tau: f64,
    /// Statistical weight of the particle.
    pub weight: f64,
    /// True when the run ended mid-window; such events are excluded from
    /// fits.
    pub truncated: bool,
    /// Audit flag: the particle was seeded strictly before entering the
    /// support.
    pub seeded_before_entry: bool,
}

/// Extremes and symmetry diagnostics accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMonitor {
    /// Measured supremum of |body acceleration|.
    pub sup_abs_acceleration: f64,
    /// Minimum body speed over the run.
    pub min_velocity: f64,
    /// Transverse force of the represented measure. Zero by construction
    /// for ring-weighted cold seeding; the Monte Carlo residual for the
    /// Maxwellian model.
    pub transverse_force_max: f64,
    /// Magnitude of the discarded per-representative transverse force sum
    /// (an artifact of single-azimuth ring seeding, recorded for audit).
    pub raw_representative_transverse_max: f64,
    /// Queries below the singular cap radius.
    pub sub_cap_hits: u64,
    pub seeded_particles: u64,
    pub retired_particles: u64,
    /// Total weight, x-momentum and energy folded out at retirement.
    pub retired_weight: f64,
    pub retired_momentum_x: f64,
    pub retired_energy: f64,
    pub max_abs_ledger_momentum: f64,
    pub max_abs_ledger_energy: f64,
    /// Steps rejected due to sub-cap approaches.
    pub rejected_steps: u64,
    pub total_steps: u64,
}

/// Full result of a coupled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SimConfig,
    pub samples: Vec<TrajSample>,
    pub events: Vec<CollisionEvent>,
    pub monitor: RunMonitor,
    /// Minimal body speed seen so far at end of run (monotone record used
    /// by the retirement rule).
    pub speed_floor: f64,
}

impl Trajectory {
    pub fn final_sample(&self) -> Option<&TrajSample> {
        self.samples.last()
    }

    pub fn e_over_m(&self) -> f64 {
        self.config.body.force / self.config.body.mass
    }
}
