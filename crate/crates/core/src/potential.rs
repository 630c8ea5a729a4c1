//! Radial pair potentials between the driven body and the fluid particles.
//!
//! Two families are provided, both with compact support of radius `r0`:
//!
//! ```text
//! bounded bump:    psi(r) = psi0 * (1 - (r/r0)^2)^3          for r < r0
//! capped singular: psi(r) = g * r^(-alpha)                   for rcap < r < r1
//!                  psi(r) = g * r^(-alpha) * H(s(r))         for r1 <= r < r0
//! ```
//!
//! where `H` is the quintic smoothstep `6s^5 - 15s^4 + 10s^3` evaluated at
//! `s = (r0 - r)/(r0 - r1)`. The blend matches value and slope of the power
//! law at `r1`, reaches zero with zero slope at `r0`, and is non-increasing
//! on the whole interval because both terms of its derivative are `<= 0`.
//!
//! Below the numerical floor `rcap` the singular potential continues with
//! its linearization at `rcap`, so forces stay finite; every query in that
//! region bumps a trust counter that callers can inspect after a run.
//!
//! A `zero` kind (psi identically 0 inside a nominal support radius) exists
//! so free-flight scenarios can reuse the collision-window bookkeeping.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("invalid parameter {name}: {value} ({requirement})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("blend construction failed: {0}")]
    ConstructionFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Zero,
    BoundedBump,
    CappedSingular,
}

impl std::fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "zero"),
            PotentialKind::BoundedBump => write!(f, "bounded-bump"),
            PotentialKind::CappedSingular => write!(f, "capped-singular"),
        }
    }
}

/// Sup-norms of the potential and its radial derivative over the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorms {
    pub sup_psi: f64,
    pub sup_dpsi: f64,
}

#[derive(Debug)]
enum Shape {
    Zero,
    Bump { psi0: f64 },
    Singular { g: f64, alpha: f64, r1: f64, rcap: f64 },
}

/// An immutable radial potential. Values, derivatives and curvatures are
/// total on `r >= 0`; sub-cap queries on the singular family are answered
/// with the linear continuation and logged.
#[derive(Debug)]
pub struct Potential {
    shape: Shape,
    r0: f64,
    sub_cap_hits: AtomicU64,
}

impl Clone for Potential {
    fn clone(&self) -> Self {
        Potential {
            shape: match &self.shape {
                Shape::Zero => Shape::Zero,
                Shape::Bump { psi0 } => Shape::Bump { psi0: *psi0 },
                Shape::Singular { g, alpha, r1, rcap } => Shape::Singular {
                    g: *g,
                    alpha: *alpha,
                    r1: *r1,
                    rcap: *rcap,
                },
            },
            r0: self.r0,
            sub_cap_hits: AtomicU64::new(self.sub_cap_hits.load(Ordering::Relaxed)),
        }
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), PotentialError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(PotentialError::InvalidParameter {
            name,
            value,
            requirement: "must be finite and > 0",
        });
    }
    Ok(())
}

// Quintic smoothstep and derivatives: H(0)=0, H(1)=1, H'(0)=H'(1)=0,
// H''(0)=H''(1)=0, monotone increasing on [0,1].
fn smoothstep(s: f64) -> f64 {
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

fn smoothstep_d1(s: f64) -> f64 {
    30.0 * s * s * (s - 1.0) * (s - 1.0)
}

fn smoothstep_d2(s: f64) -> f64 {
    60.0 * s * (2.0 * s - 1.0) * (s - 1.0)
}

impl Potential {
    /// The identically-zero potential with a nominal support radius for
    /// window bookkeeping.
    pub fn zero(r0: f64) -> Result<Self, PotentialError> {
        require_positive("r0", r0)?;
        Ok(Potential {
            shape: Shape::Zero,
            r0,
            sub_cap_hits: AtomicU64::new(0),
        })
    }

    /// The C^2 compact bump `psi0 * (1 - (r/r0)^2)^3`.
    pub fn bounded_bump(psi0: f64, r0: f64) -> Result<Self, PotentialError> {
        require_positive("psi0", psi0)?;
        require_positive("r0", r0)?;
        Ok(Potential {
            shape: Shape::Bump { psi0 },
            r0,
            sub_cap_hits: AtomicU64::new(0),
        })
    }

    /// The capped singular family `g r^(-alpha)` blended to zero on
    /// `[r1, r0]`, with linear continuation below `rcap`.
    pub fn capped_singular(
        g: f64,
        alpha: f64,
        r1: f64,
        r0: f64,
        rcap: f64,
    ) -> Result<Self, PotentialError> {
        require_positive("g", g)?;
        require_positive("alpha", alpha)?;
        require_positive("r1", r1)?;
        require_positive("r0", r0)?;
        require_positive("rcap", rcap)?;
        if !(rcap < r1) {
            return Err(PotentialError::InvalidParameter {
                name: "rcap",
                value: rcap,
                requirement: "must satisfy rcap < r1",
            });
        }
        if !(r1 < r0) {
            return Err(PotentialError::InvalidParameter {
                name: "r1",
                value: r1,
                requirement: "must satisfy r1 < r0",
            });
        }
        let pot = Potential {
            shape: Shape::Singular { g, alpha, r1, rcap },
            r0,
            sub_cap_hits: AtomicU64::new(0),
        };
        pot.check_monotone()?;
        Ok(pot)
    }

    fn check_monotone(&self) -> Result<(), PotentialError> {
        let lo = match &self.shape {
            Shape::Singular { rcap, .. } => *rcap,
            _ => 0.0,
        };
        let n = 1024;
        let mut prev = self.psi(lo);
        for i in 1..=n {
            let r = lo + (self.r0 - lo) * i as f64 / n as f64;
            let v = self.psi(r);
            if v > prev * (1.0 + 1e-12) + 1e-300 {
                return Err(PotentialError::ConstructionFailure(format!(
                    "psi increases near r = {r}: {prev} -> {v}"
                )));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn kind(&self) -> PotentialKind {
        match self.shape {
            Shape::Zero => PotentialKind::Zero,
            Shape::Bump { .. } => PotentialKind::BoundedBump,
            Shape::Singular { .. } => PotentialKind::CappedSingular,
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.r0
    }

    /// Numerical floor radius of the singular family.
    pub fn cap_radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Singular { rcap, .. } => Some(rcap),
            _ => None,
        }
    }

    /// How many times value/derivative were queried below `rcap`.
    pub fn sub_cap_hits(&self) -> u64 {
        self.sub_cap_hits.load(Ordering::Relaxed)
    }

    fn note_sub_cap(&self) {
        self.sub_cap_hits.fetch_add(1, Ordering::Relaxed);
    }

    /// Potential value at radius `r >= 0`.
    pub fn psi(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Bump { psi0 } => {
                let u2 = (r / self.r0) * (r / self.r0);
                let w = 1.0 - u2;
                psi0 * w * w * w
            }
            Shape::Singular { g, alpha, r1, rcap } => {
                if r <= *rcap {
                    self.note_sub_cap();
                    let v = g * rcap.powf(-alpha);
                    let d = -alpha * g * rcap.powf(-alpha - 1.0);
                    v + d * (r - rcap)
                } else if r < *r1 {
                    g * r.powf(-alpha)
                } else {
                    let s = (self.r0 - r) / (self.r0 - r1);
                    g * r.powf(-alpha) * smoothstep(s)
                }
            }
        }
    }

    /// Radial derivative `psi'(r)`. Non-positive everywhere (repulsive).
    pub fn dpsi(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Bump { psi0 } => {
                let u2 = (r / self.r0) * (r / self.r0);
                let w = 1.0 - u2;
                -6.0 * psi0 * r / (self.r0 * self.r0) * w * w
            }
            Shape::Singular { g, alpha, r1, rcap } => {
                if r <= *rcap {
                    self.note_sub_cap();
                    -alpha * g * rcap.powf(-alpha - 1.0)
                } else if r < *r1 {
                    -alpha * g * r.powf(-alpha - 1.0)
                } else {
                    let sp = -1.0 / (self.r0 - r1);
                    let s = (self.r0 - r) / (self.r0 - r1);
                    g * (-alpha * r.powf(-alpha - 1.0) * smoothstep(s)
                        + r.powf(-alpha) * smoothstep_d1(s) * sp)
                }
            }
        }
    }

    /// Stable force factor `psi'(r)/r`, finite at the origin for the bump.
    /// The force on a particle at relative position `d` from the body is
    /// `-force_factor(|d|) * d`.
    pub fn force_factor(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Bump { psi0 } => {
                let u2 = (r / self.r0) * (r / self.r0);
                let w = 1.0 - u2;
                -6.0 * psi0 / (self.r0 * self.r0) * w * w
            }
            _ => self.dpsi(r) / r.max(f64::MIN_POSITIVE),
        }
    }

    /// Second radial derivative, used for the stiffness bound of the
    /// adaptive step.
    pub fn d2psi(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Bump { psi0 } => {
                let u2 = (r / self.r0) * (r / self.r0);
                let w = 1.0 - u2;
                -6.0 * psi0 / (self.r0 * self.r0) * (w * w - 4.0 * u2 * w)
            }
            Shape::Singular { g, alpha, r1, rcap } => {
                if r <= *rcap {
                    0.0
                } else if r < *r1 {
                    alpha * (alpha + 1.0) * g * r.powf(-alpha - 2.0)
                } else {
                    let sp = -1.0 / (self.r0 - r1);
                    let s = (self.r0 - r) / (self.r0 - r1);
                    g * (alpha * (alpha + 1.0) * r.powf(-alpha - 2.0) * smoothstep(s)
                        - 2.0 * alpha * r.powf(-alpha - 1.0) * smoothstep_d1(s) * sp
                        + r.powf(-alpha) * smoothstep_d2(s) * sp * sp)
                }
            }
        }
    }

    /// Suprema of `|psi|` and `|psi'|`: dense grid scan plus the analytic
    /// candidates (origin or cap, and the interior extremum of the bump
    /// derivative at `r0/sqrt(5)`).
    pub fn sup_norms(&self) -> SupNorms {
        let lo = self.cap_radius().unwrap_or(0.0);
        let mut sup_psi: f64 = 0.0;
        let mut sup_dpsi: f64 = 0.0;
        let mut consider = |r: f64| {
            sup_psi = sup_psi.max(self.psi(r));
            sup_dpsi = sup_dpsi.max(self.dpsi(r).abs());
        };
        consider(lo);
        if matches!(self.shape, Shape::Bump { .. }) {
            consider(self.r0 / 5.0_f64.sqrt());
        }
        let n = 4096;
        for i in 0..=n {
            consider(lo + (self.r0 - lo) * i as f64 / n as f64);
        }
        SupNorms { sup_psi, sup_dpsi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bump_closed_forms() {
        let p = Potential::bounded_bump(1.0, 1.0).unwrap();
        assert_eq!(p.psi(1.0), 0.0);
        assert_eq!(p.psi(0.0), 1.0);
        assert_eq!(p.dpsi(0.0), 0.0);
        assert_relative_eq!(p.psi(0.5), 0.421875);
        assert_relative_eq!(p.dpsi(0.5), -1.6875);
        assert_eq!(p.dpsi(1.0), 0.0);
    }

    #[test]
    fn bump_rejects_nonpositive_parameters() {
        assert!(Potential::bounded_bump(0.0, 1.0).is_err());
        assert!(Potential::bounded_bump(1.0, -1.0).is_err());
        assert!(Potential::bounded_bump(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn singular_power_region_and_support() {
        let p = Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 1e-4).unwrap();
        assert_relative_eq!(p.psi(0.25), 8.0);
        assert_eq!(p.psi(2.0), 0.0);
        assert_eq!(p.dpsi(2.0), 0.0);
    }

    #[test]
    fn singular_rejects_bad_ordering() {
        assert!(Potential::capped_singular(1.0, 1.5, 1.0, 0.5, 1e-4).is_err());
        assert!(Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 0.6).is_err());
        assert!(Potential::capped_singular(-1.0, 1.5, 0.5, 1.0, 1e-4).is_err());
    }

    #[test]
    fn singular_monotone_on_grid() {
        let p = Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 1e-3).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let r = 1e-3 + (1.0 - 1e-3) * i as f64 / 1000.0;
            let v = p.psi(r);
            assert!(v <= prev + 1e-12, "psi not monotone at r={r}");
            prev = v;
        }
    }

    #[test]
    fn blend_is_c1_at_matching_radii() {
        let p = Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 1e-4).unwrap();
        let h = 1e-7;
        for r in [0.5, 1.0] {
            let left = (p.psi(r) - p.psi(r - h)) / h;
            let right = (p.psi(r + h) - p.psi(r)) / h;
            let scale = left.abs().max(right.abs()).max(1e-3);
            assert!(
                ((left - right) / scale).abs() < 1e-5,
                "slope mismatch at r={r}: {left} vs {right}"
            );
            // one-sided slopes also agree with the analytic derivative
            let d = p.dpsi(r - h / 2.0);
            assert!(((left - d) / scale).abs() < 1e-5);
        }
    }

    #[test]
    fn sup_norms_examples() {
        let b1 = Potential::bounded_bump(1.0, 1.0).unwrap();
        assert_eq!(b1.sup_norms().sup_psi, 1.0);
        let b2 = Potential::bounded_bump(2.0, 1.0).unwrap();
        assert_eq!(b2.sup_norms().sup_psi, 2.0);
        let s = Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 1e-3).unwrap();
        assert_relative_eq!(s.sup_norms().sup_psi, 10f64.powf(4.5), max_relative = 1e-12);
        // |psi'| of the bump peaks at r0/sqrt(5) with value 96/(25 sqrt(5)).
        assert_relative_eq!(
            b1.sup_norms().sup_dpsi,
            96.0 / (25.0 * 5.0_f64.sqrt()),
            max_relative = 1e-6
        );
    }

    #[test]
    fn sub_cap_linear_continuation_is_logged() {
        let p = Potential::capped_singular(1.0, 2.0, 0.5, 1.0, 1e-2).unwrap();
        assert_eq!(p.sub_cap_hits(), 0);
        let v_cap = 1.0 / (1e-2f64 * 1e-2);
        let d_cap = -2.0 / (1e-2f64.powi(3));
        let r = 5e-3;
        assert_relative_eq!(p.psi(r), v_cap + d_cap * (r - 1e-2), max_relative = 1e-12);
        assert_eq!(p.dpsi(r), d_cap);
        assert_eq!(p.sub_cap_hits(), 2);
        // still a barrier: value keeps growing toward the origin
        assert!(p.psi(1e-3) > v_cap);
    }

    #[test]
    fn zero_kind_is_flat() {
        let p = Potential::zero(1.0).unwrap();
        assert_eq!(p.psi(0.3), 0.0);
        assert_eq!(p.dpsi(0.3), 0.0);
        assert_eq!(p.force_factor(0.3), 0.0);
        assert_eq!(p.sup_norms(), SupNorms { sup_psi: 0.0, sup_dpsi: 0.0 });
    }

    #[test]
    fn force_factor_matches_dpsi_over_r() {
        let p = Potential::bounded_bump(1.3, 0.8).unwrap();
        for r in [1e-9, 0.1, 0.4, 0.79] {
            assert_relative_eq!(p.force_factor(r) * r, p.dpsi(r), max_relative = 1e-12);
        }
        let s = Potential::capped_singular(0.7, 1.5, 0.5, 1.0, 1e-4).unwrap();
        for r in [0.01, 0.3, 0.6, 0.9] {
            assert_relative_eq!(s.force_factor(r) * r, s.dpsi(r), max_relative = 1e-12);
        }
    }

    #[test]
    fn d2psi_matches_finite_differences() {
        let cases = [
            Potential::bounded_bump(1.0, 1.0).unwrap(),
            Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 1e-4).unwrap(),
        ];
        for p in &cases {
            for r in [0.05, 0.2, 0.45, 0.6, 0.8, 0.95] {
                let h = 1e-5;
                let fd = (p.psi(r + h) - 2.0 * p.psi(r) + p.psi(r - h)) / (h * h);
                let scale = fd.abs().max(1.0);
                assert!(
                    ((p.d2psi(r) - fd) / scale).abs() < 1e-4,
                    "d2psi mismatch at r={r}: {} vs {}",
                    p.d2psi(r),
                    fd
                );
            }
        }
    }

    proptest! {
        #[test]
        fn compact_support_exact(seed in 0u64..10_000) {
            let p = Potential::bounded_bump(1.0, 1.0).unwrap();
            let s = Potential::capped_singular(1.0, 1.5, 0.5, 1.0, 1e-4).unwrap();
            // deterministic pseudo-random points in (r0, 10 r0)
            let x = 1.0 + 9.0 * ((seed as f64 * 0.6180339887498949) % 1.0);
            prop_assert_eq!(p.psi(x), 0.0);
            prop_assert_eq!(p.dpsi(x), 0.0);
            prop_assert_eq!(s.psi(x), 0.0);
            prop_assert_eq!(s.dpsi(x), 0.0);
        }

        #[test]
        fn repulsive_everywhere(r in 0.0f64..1.5, g in 0.1f64..5.0, alpha in 0.2f64..3.0) {
            let b = Potential::bounded_bump(1.0, 1.0).unwrap();
            prop_assert!(b.dpsi(r) <= 0.0);
            let s = Potential::capped_singular(g, alpha, 0.5, 1.0, 1e-4).unwrap();
            prop_assert!(s.dpsi(r.max(1e-6)) <= 0.0);
        }

        #[test]
        fn singular_scaling_law(lambda in 0.2f64..1.0, r in 0.02f64..0.4) {
            // psi(lambda r) = lambda^-alpha psi(r) inside the power region
            let alpha = 1.5;
            let s = Potential::capped_singular(1.0, alpha, 0.5, 1.0, 1e-4).unwrap();
            let lr = lambda * r;
            prop_assume!(lr > 1e-3);
            let lhs = s.psi(lr);
            let rhs = lambda.powf(-alpha) * s.psi(r);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }
    }
}
