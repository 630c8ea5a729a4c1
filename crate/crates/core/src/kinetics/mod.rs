//! Coupled integration of the forced body and the fluid characteristics.
//!
//! The body obeys `M xidd = E + F_fric` with `F_fric` the weighted sum of
//! pair forces from all characteristics inside the support; each
//! characteristic obeys `xdd = -grad psi(|x - xi|)`. Everything advances
//! with a velocity-Verlet step so the conservation ledgers stay honest over
//! long runs; particles outside the support free-stream exactly.

mod adiabatic;
mod engine;
mod frozen;

pub use adiabatic::{adiabatic_momentum, adiabatic_momentum_rate};
pub use engine::{run, Simulation};
pub use frozen::{frozen_scattering, ScatterResult};

use thiserror::Error;

use crate::config::IntegrationConfig;
use crate::math::{KahanSum, Vec3};
use crate::potential::Potential;

#[derive(Debug, Error, PartialEq)]
pub enum KineticsError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("step rejected: pair distance {distance} fell below the cap radius")]
    StepRejected { distance: f64 },
    #[error("relative speed {speed} below the floor {floor}")]
    DegenerateRelativeVelocity { speed: f64, floor: f64 },
    #[error("accuracy failure: {0}")]
    AccuracyFailure(String),
}

/// Errors terminating a coupled run.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(
        "integrity failure at t = {t}: momentum residual {momentum:.3e}, energy residual \
         {energy:.3e} exceed tolerance {tolerance:.3e} (relative to M*xidot = {scale:.3e}); \
         {n_active} active particles, {n_events} events so far"
    )]
    IntegrityFailure {
        t: f64,
        momentum: f64,
        energy: f64,
        tolerance: f64,
        scale: f64,
        n_active: u64,
        n_events: usize,
    },
    #[error("stiffness failure at t = {t}: step retries exhausted at dt = {dt:.3e}")]
    StiffnessFailure { t: f64, dt: f64 },
}

/// The driven body. Motion is constrained to the x-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub position: f64,
    pub velocity: f64,
    pub mass: f64,
    /// Constant driving force along +x.
    pub drive: f64,
}

impl BodyState {
    pub fn position_vec(&self) -> Vec3 {
        Vec3::new(self.position, 0.0, 0.0)
    }

    pub fn velocity_vec(&self) -> Vec3 {
        Vec3::new(self.velocity, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleStatus {
    /// Seeded but not yet reached by the body.
    Pending,
    /// Within `r0 + margin` of the body.
    Interacting,
    /// Outside the support, fast enough to possibly be re-caught.
    Ballistic,
    /// Can never interact again; folded into the ledgers and removed.
    Retired,
}

/// Which internal collection a particle currently belongs to. `Near`
/// particles are advanced by the integrator every step; all others
/// free-stream analytically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bucket {
    Near,
    Ballistic,
    PendingQueue,
    /// Seeded beyond interaction reach; kept only for the mass accounting.
    Spectator,
}

/// Bookkeeping for an interaction window that has not closed yet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OpenWindow {
    pub tau: f64,
    pub entry_velocity: Vec3,
    pub sigma: f64,
    pub xidot_at_tau: f64,
    pub min_body_speed: f64,
    pub max_body_speed: f64,
    pub seeded_before_entry: bool,
    // discrete minimum of the separation plus its neighbours, for the
    // parabolic refinement of r_min at window close
    pub best: (f64, f64),
    pub best_left: Option<(f64, f64)>,
    pub best_right: Option<(f64, f64)>,
    pub prev_sample: (f64, f64),
}

impl OpenWindow {
    pub fn record_distance(&mut self, t: f64, r: f64) {
        if r < self.best.1 {
            self.best_left = Some(self.prev_sample);
            self.best = (t, r);
            self.best_right = None;
        } else if self.best_right.is_none() && self.prev_sample == self.best {
            self.best_right = Some((t, r));
        }
        self.prev_sample = (t, r);
    }

    /// Refined minimal separation: vertex of the parabola through the
    /// discrete minimum and its neighbours when available.
    pub fn refined_r_min(&self) -> f64 {
        let (t2, r2) = self.best;
        let (Some((t1, r1)), Some((t3, r3))) = (self.best_left, self.best_right) else {
            return self.best.1;
        };
        // Lagrange quadratic through three points; vertex value.
        let d21 = t2 - t1;
        let d32 = t3 - t2;
        let d31 = t3 - t1;
        if d21 <= 0.0 || d32 <= 0.0 {
            return r2;
        }
        let a = (r3 * d21 - r2 * d31 + r1 * d32) / (d21 * d32 * d31);
        if a <= 0.0 {
            return r2;
        }
        let b = (r2 - r1) / d21 + a * d21;
        let vertex = r2 - b * b / (4.0 * a);
        if vertex.is_finite() && vertex > 0.0 && vertex <= r2 {
            vertex
        } else {
            r2
        }
    }
}

/// One fluid characteristic carrying a piece of the initial measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub id: u64,
    /// Position at `pos_time`; positions of non-interacting particles are
    /// extrapolated linearly on demand.
    pub position: Vec3,
    pub velocity: Vec3,
    pub weight: f64,
    pub status: ParticleStatus,
    /// Initial distance from the x-axis.
    pub eta: f64,
    pub pos_time: f64,
    pub seeded_at: f64,
    /// Collision windows completed or in progress.
    pub windows: u32,
    /// Indices into the run's event log.
    pub history: Vec<u32>,
    pub(crate) bucket: Bucket,
    pub(crate) open_window: Option<OpenWindow>,
}

impl Particle {
    pub fn new(id: u64, position: Vec3, velocity: Vec3, weight: f64, eta: f64, t: f64) -> Self {
        Particle {
            id,
            position,
            velocity,
            weight,
            status: ParticleStatus::Pending,
            eta,
            pos_time: t,
            seeded_at: t,
            windows: 0,
            history: Vec::new(),
            bucket: Bucket::PendingQueue,
            open_window: None,
        }
    }

    /// Position at time `t`, exact free flight from the last synced state.
    pub fn position_at(&self, t: f64) -> Vec3 {
        self.position + self.velocity * (t - self.pos_time)
    }

    pub fn distance_to_body_at(&self, body: &BodyState, t: f64) -> f64 {
        (self.position_at(t) - body.position_vec()).norm()
    }
}

/// Conservation accounting. Residuals are exactly zero in exact arithmetic:
/// the x-momentum ledger pairs the body kick against the particle kicks
/// (Newton's third law along x), the energy ledger tracks the conserved
/// Hamiltonian of the constrained system minus the work done by the drive.
#[derive(Debug, Clone, Default)]
pub struct Ledgers {
    /// x-momentum of everything not in the near set (pending, ballistic,
    /// spectators, and the folded-in retired particles).
    pub(crate) non_near_px: KahanSum,
    /// Kinetic energy of the same population.
    pub(crate) non_near_ke: KahanSum,
    /// Momentum/energy injected by seeding (zero for the cold datum).
    pub(crate) seeded_px: KahanSum,
    pub(crate) seeded_ke: KahanSum,
}

impl Ledgers {
    pub(crate) fn on_seed(&mut self, px: f64, ke: f64) {
        self.non_near_px.add(px);
        self.non_near_ke.add(ke);
        self.seeded_px.add(px);
        self.seeded_ke.add(ke);
    }

    pub(crate) fn on_enter_near(&mut self, px: f64, ke: f64) {
        self.non_near_px.add(-px);
        self.non_near_ke.add(-ke);
    }

    pub(crate) fn on_leave_near(&mut self, px: f64, ke: f64) {
        self.non_near_px.add(px);
        self.non_near_ke.add(ke);
    }
}

/// The full coupled state at one instant.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub t: f64,
    pub body: BodyState,
    pub particles: Vec<Particle>,
    pub ledgers: Ledgers,
    /// Initial body momentum, kinetic energy and position.
    pub initial_momentum: f64,
    pub initial_energy: f64,
    pub initial_position: f64,
}

impl SystemState {
    pub fn new(body: BodyState) -> Self {
        SystemState {
            t: 0.0,
            initial_momentum: body.mass * body.velocity,
            initial_energy: 0.5 * body.mass * body.velocity * body.velocity,
            initial_position: body.position,
            body,
            particles: Vec::new(),
            ledgers: Ledgers::default(),
        }
    }

    /// Momentum-ledger residual: total x-momentum minus what the drive has
    /// injected so far.
    pub fn momentum_residual(&self) -> f64 {
        let mut near_px = KahanSum::new();
        for p in self.particles.iter().filter(|p| p.bucket == Bucket::Near) {
            near_px.add(p.weight * p.velocity.x);
        }
        self.body.mass * self.body.velocity + self.ledgers.non_near_px.value() + near_px.value()
            - self.initial_momentum
            - self.ledgers.seeded_px.value()
            - self.body.drive * self.t
    }

    /// Energy-ledger residual: conserved Hamiltonian minus drive work.
    pub fn energy_residual(&self, pot: &Potential) -> f64 {
        let mut near_e = KahanSum::new();
        let body_pos = self.body.position_vec();
        for p in self.particles.iter().filter(|p| p.bucket == Bucket::Near) {
            let r = (p.position - body_pos).norm();
            near_e.add(p.weight * (0.5 * p.velocity.norm_squared() + pot.psi(r)));
        }
        0.5 * self.body.mass * self.body.velocity * self.body.velocity
            + self.ledgers.non_near_ke.value()
            + near_e.value()
            - self.initial_energy
            - self.ledgers.seeded_ke.value()
            - self.body.drive * (self.body.position - self.initial_position)
    }
}

/// Forces of one evaluation over the interacting set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSummary {
    /// x-force on the body from the fluid (the friction force).
    pub friction_x: f64,
    /// Per-representative transverse force (y, z): an artifact of the
    /// single-azimuth ring seeding that the axis constraint discards.
    pub raw_transverse: (f64, f64),
    pub min_pair_distance: f64,
    pub max_curvature: f64,
}

/// Friction force on the body: `-sum_i w_i d/dxi psi(|xi - x_i|)`, summed
/// over interacting particles in fixed id order with compensated summation.
pub fn friction_force(state: &SystemState, pot: &Potential) -> f64 {
    let mut acc = KahanSum::new();
    let body_pos = state.body.position_vec();
    for p in state
        .particles
        .iter()
        .filter(|p| p.status == ParticleStatus::Interacting)
    {
        let rel = p.position_at(state.t) - body_pos;
        let r = rel.norm();
        let ff = pot.force_factor(r);
        acc.add(p.weight * ff * rel.x);
    }
    acc.value()
}

/// Time-step bound: `min(dt_max, c_res r0 / xidot, stiff / sqrt(max |psi''|))`.
pub fn adaptive_dt(state: &SystemState, pot: &Potential, cfg: &IntegrationConfig) -> f64 {
    let mut max_curv: f64 = 0.0;
    let body_pos = state.body.position_vec();
    for p in state
        .particles
        .iter()
        .filter(|p| p.status == ParticleStatus::Interacting)
    {
        let r = (p.position_at(state.t) - body_pos).norm();
        max_curv = max_curv.max(pot.d2psi(r).abs());
    }
    combine_dt(cfg, pot.support_radius(), state.body.velocity, max_curv)
}

pub(crate) fn combine_dt(cfg: &IntegrationConfig, r0: f64, xidot: f64, max_curvature: f64) -> f64 {
    let mut dt = cfg.dt_max;
    if xidot > 0.0 {
        dt = dt.min(cfg.c_res * r0 / xidot);
    }
    if max_curvature > 0.0 {
        dt = dt.min(cfg.stiff_factor / max_curvature.sqrt());
    }
    dt
}

/// One velocity-Verlet step of the body plus the interacting particles.
///
/// This is the self-contained form of the engine's inner step: it
/// recomputes accelerations at the start of the step, drifts, and kicks
/// with the end-of-step forces. A sub-cap approach restores the incoming
/// state and reports `StepRejected` so the caller can halve `dt`.
pub fn step(state: &mut SystemState, pot: &Potential, dt: f64) -> Result<(), KineticsError> {
    if !(dt > 0.0) {
        return Err(KineticsError::InvalidParameter {
            name: "dt",
            value: dt,
        });
    }
    let near: Vec<usize> = (0..state.particles.len())
        .filter(|&i| state.particles[i].bucket == Bucket::Near)
        .collect();
    let snapshot: Vec<(Vec3, Vec3, f64)> = near
        .iter()
        .map(|&i| {
            let p = &state.particles[i];
            (p.position, p.velocity, p.pos_time)
        })
        .collect();
    let body_snapshot = state.body;

    let start = evaluate_forces(state, pot, &near);
    let frozen = false;
    let t = state.t;
    let body_acc0 = (state.body.drive + start.summary.friction_x) / state.body.mass;
    let result = verlet_advance(
        state,
        pot,
        &near,
        dt,
        &start.accelerations,
        body_acc0,
        frozen,
    );
    match result {
        Ok(_) => {
            state.t = t + dt;
            Ok(())
        }
        Err(e) => {
            for (k, &i) in near.iter().enumerate() {
                let p = &mut state.particles[i];
                p.position = snapshot[k].0;
                p.velocity = snapshot[k].1;
                p.pos_time = snapshot[k].2;
            }
            state.body = body_snapshot;
            Err(e)
        }
    }
}

pub(crate) struct ForcePass {
    pub accelerations: Vec<Vec3>,
    pub summary: ForceSummary,
    pub distances: Vec<f64>,
}

/// Evaluate pair forces over `near` (indices into `state.particles`) at the
/// particles' stored positions. Deterministic: fixed order, compensated sum.
pub(crate) fn evaluate_forces(state: &SystemState, pot: &Potential, near: &[usize]) -> ForcePass {
    let mut accelerations = Vec::with_capacity(near.len());
    let mut distances = Vec::with_capacity(near.len());
    let mut friction = KahanSum::new();
    let mut fy = KahanSum::new();
    let mut fz = KahanSum::new();
    let mut min_dist = f64::INFINITY;
    let mut max_curv: f64 = 0.0;
    let body_pos = state.body.position_vec();
    for &i in near {
        let p = &state.particles[i];
        let rel = p.position - body_pos;
        let r = rel.norm();
        let ff = pot.force_factor(r);
        accelerations.push(rel * (-ff));
        friction.add(p.weight * ff * rel.x);
        fy.add(p.weight * ff * rel.y);
        fz.add(p.weight * ff * rel.z);
        min_dist = min_dist.min(r);
        if r < pot.support_radius() {
            max_curv = max_curv.max(pot.d2psi(r).abs());
        }
        distances.push(r);
    }
    ForcePass {
        accelerations,
        summary: ForceSummary {
            friction_x: friction.value(),
            raw_transverse: (fy.value(), fz.value()),
            min_pair_distance: min_dist,
            max_curvature: max_curv,
        },
        distances,
    }
}

/// Kick-drift-kick update given start-of-step accelerations. On success the
/// returned pass holds end-of-step forces and distances.
pub(crate) fn verlet_advance(
    state: &mut SystemState,
    pot: &Potential,
    near: &[usize],
    dt: f64,
    accel0: &[Vec3],
    body_accel0: f64,
    frozen_body: bool,
) -> Result<(ForcePass, f64), KineticsError> {
    let half = 0.5 * dt;
    // half kick + drift
    let body_v_half = if frozen_body {
        state.body.velocity
    } else {
        state.body.velocity + half * body_accel0
    };
    state.body.position += dt * body_v_half;
    let t_new = state.t + dt;
    for (k, &i) in near.iter().enumerate() {
        let p = &mut state.particles[i];
        let v_half = p.velocity + accel0[k] * half;
        p.position += v_half * dt;
        p.velocity = v_half;
        p.pos_time = t_new;
    }
    // end-of-step forces
    let pass = evaluate_forces(state, pot, near);
    if let Some(rcap) = pot.cap_radius() {
        if pass.summary.min_pair_distance < rcap {
            return Err(KineticsError::StepRejected {
                distance: pass.summary.min_pair_distance,
            });
        }
    }
    // final kicks
    for (k, &i) in near.iter().enumerate() {
        let p = &mut state.particles[i];
        p.velocity = p.velocity + pass.accelerations[k] * half;
    }
    let body_accel_new = if frozen_body {
        0.0
    } else {
        (state.body.drive + pass.summary.friction_x) / state.body.mass
    };
    if !frozen_body {
        state.body.velocity = body_v_half + half * body_accel_new;
    }
    Ok((pass, body_accel_new))
}
