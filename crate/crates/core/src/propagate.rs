//! Flows of the controlled wave system in first-order form W = (w, dw/dt):
//!   dW/dt = (A + phi(x) B) W,   A = (0, I; Lap, 0),   B = (0, 0; I, 0).
//!
//! Three building blocks are exact:
//!   * the free flow e^{tA}, a mode-wise rotation with frequency |k|,
//!   * the impulsive kick e^{c phi B} = I + c phi B (B squares to zero),
//!   * their conjugated triple e^{-a psi B} e^{tau A} e^{a psi B}.
//!
//! Constant-control evolution composes them by symmetric (Strang) splitting,
//! which is second order in the substep.
//!
//! Kicks multiply the profile into the velocity and therefore widen the mode
//! support. The truncating variants cap the support at a configured |k|_inf
//! and report the L2 mass they discard, so spectral truncation shows up as a
//! number instead of a silent error.

use crate::error::{Error, Result};
use crate::field::{from_generator_coeffs, FourierField, WaveState};
use crate::mode::ModeIndex;
use crate::scalar::Scalar;
use num_complex::Complex;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug)]
pub struct SplittingParams<T: Scalar> {
    /// Largest allowed substep of the order-2 splitting.
    pub dt_max: T,
}

impl<T: Scalar> SplittingParams<T> {
    pub fn new(dt_max: T) -> Result<Self> {
        if dt_max <= T::zero() {
            return Err(Error::NonPositiveDuration {
                got: dt_max.to_f64(),
            });
        }
        Ok(SplittingParams { dt_max })
    }
}

/// Result of an evolution that may shed spectral mass at the support cap.
#[derive(Clone, Debug)]
pub struct Evolved<T: Scalar> {
    pub state: WaveState<T>,
    /// Accumulated L2 norm of everything dropped at the cap; zero when the
    /// evolution ran uncapped.
    pub truncation_residual: T,
}

/// Exact free flow e^{tA}, any real t. The zero mode drifts linearly,
/// (w0 + v0 t, v0); every other mode rotates with frequency |k|:
///   w  ->  w cos(|k|t) + v sin(|k|t)/|k|
///   v  -> -|k| w sin(|k|t) + v cos(|k|t).
pub fn free_evolve<T: Scalar>(state: &WaveState<T>, t: T) -> WaveState<T> {
    let dim = state.dim();
    let keys: BTreeSet<ModeIndex> = state
        .profile
        .modes()
        .map(|(k, _)| k.clone())
        .chain(state.velocity.modes().map(|(k, _)| k.clone()))
        .collect();
    let mut wp: BTreeMap<ModeIndex, Complex<T>> = BTreeMap::new();
    let mut wv: BTreeMap<ModeIndex, Complex<T>> = BTreeMap::new();
    for k in keys {
        let w = state.profile.coeff(&k);
        let v = state.velocity.coeff(&k);
        if k.is_zero() {
            wp.insert(k.clone(), w + v * t);
            wv.insert(k, v);
        } else {
            let om = T::from_i64(k.norm_sq()).expect("mode frequency").sqrt();
            let c = (om * t).cos();
            let s = (om * t).sin();
            wp.insert(k.clone(), w * c + v * (s / om));
            wv.insert(k, v * c - w * (om * s));
        }
    }
    WaveState {
        profile: FourierField::from_hermitian_unchecked(dim, wp),
        velocity: FourierField::from_hermitian_unchecked(dim, wv),
    }
}

/// Exact impulsive kick e^{c phi B}: the profile is untouched, the velocity
/// gains c * phi * w. No time passes.
pub fn kick<T: Scalar>(state: &WaveState<T>, c: T, phi: &FourierField<T>) -> Result<WaveState<T>> {
    let gain = phi.multiply(&state.profile)?.scale(c);
    Ok(WaveState {
        profile: state.profile.clone(),
        velocity: state.velocity.add(&gain)?,
    })
}

/// Kick with the velocity support capped at |k|_inf <= cap. Returns the new
/// state and the L2 norm of the coefficients dropped at the cap.
pub fn kick_truncated<T: Scalar>(
    state: &WaveState<T>,
    c: T,
    phi: &FourierField<T>,
    cap: usize,
) -> Result<(WaveState<T>, T)> {
    let gain = phi.multiply(&state.profile)?.scale(c);
    let (velocity, dropped) = state.velocity.add(&gain)?.truncate(cap);
    Ok((
        WaveState {
            profile: state.profile.clone(),
            velocity,
        },
        dropped,
    ))
}

/// Approximates e^{t(A + phi B)} with phi = sum_j p[j] mu_j by Strang steps
/// e^{(h/2)A} e^{h phi B} e^{(h/2)A}, h = t/ceil(t/dt_max), every factor
/// exact; the global error is O(h^2). With all-zero p this IS free_evolve
/// (the splitting of A alone is exact), bitwise. A support cap applies to
/// the kicks as in `kick_truncated`; pass None to run uncapped.
pub fn constant_control_evolve<T: Scalar>(
    state: &WaveState<T>,
    p: &[T],
    t: T,
    params: SplittingParams<T>,
    cap: Option<usize>,
) -> Result<Evolved<T>> {
    if t <= T::zero() {
        return Err(Error::NonPositiveDuration { got: t.to_f64() });
    }
    let phi = from_generator_coeffs(state.dim(), p)?;
    if phi.is_empty() {
        return Ok(Evolved {
            state: free_evolve(state, t),
            truncation_residual: T::zero(),
        });
    }
    let steps = (t / params.dt_max).ceil().to_f64() as usize;
    let steps = steps.max(1);
    let h = t / T::of(steps as f64);
    let half = h * T::of(0.5);

    // n Strang steps share interior half-steps: F(h/2) [K(h) F(h)]^{n-1} K(h) F(h/2).
    let mut residual = T::zero();
    let mut cur = free_evolve(state, half);
    for step in 0..steps {
        cur = match cap {
            Some(cap) => {
                let (s, dropped) = kick_truncated(&cur, h, &phi, cap)?;
                residual += dropped;
                s
            }
            None => kick(&cur, h, &phi)?,
        };
        let dt = if step + 1 == steps { half } else { h };
        cur = free_evolve(&cur, dt);
    }
    Ok(Evolved {
        state: cur,
        truncation_residual: residual,
    })
}

/// The exact conjugated triple e^{-a psi B} e^{tau A} e^{a psi B} with
/// a = tau^{-1/2}. As tau -> 0 it approaches `bracket_target(state, psi)`;
/// this routine is the thing whose convergence the sweeps measure, so all
/// three factors run uncapped.
pub fn conjugated_step<T: Scalar>(
    state: &WaveState<T>,
    psi: &FourierField<T>,
    tau: T,
) -> Result<WaveState<T>> {
    if tau <= T::zero() {
        return Err(Error::NonPositiveDuration { got: tau.to_f64() });
    }
    let a = T::one() / tau.sqrt();
    let s = kick(state, a, psi)?;
    let s = free_evolve(&s, tau);
    kick(&s, -a, psi)
}

/// Closed-form limit of `conjugated_step` as tau -> 0: the profile stays,
/// the velocity loses mu^2 * w. This is the oracle for the sweeps and the
/// reason squares of generators act like new control directions.
pub fn bracket_target<T: Scalar>(state: &WaveState<T>, mu: &FourierField<T>) -> Result<WaveState<T>> {
    let gain = mu.multiply(mu)?.multiply(&state.profile)?;
    Ok(WaveState {
        profile: state.profile.clone(),
        velocity: state.velocity.sub(&gain)?,
    })
}

/// Conserved quadratic form of the free flow:
///   sum_{k != 0} |k|^2 |w_k|^2 + sum_k |v_k|^2.
pub fn energy<T: Scalar>(state: &WaveState<T>) -> T {
    let mut acc = T::zero();
    for (k, c) in state.profile.modes() {
        if !k.is_zero() {
            acc += T::from_i64(k.norm_sq()).expect("mode weight") * c.norm_sqr();
        }
    }
    for (_, c) in state.velocity.modes() {
        acc += c.norm_sqr();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_mu, state_error, SobolevIndex};

    type F = FourierField<f64>;

    fn cos_x() -> F {
        make_mu(1, 1).unwrap()
    }

    fn state(w: F, v: F) -> WaveState<f64> {
        WaveState::new(w, v).unwrap()
    }

    #[test]
    fn zero_mode_drifts_linearly() {
        let s = state(F::zero(1), F::constant(1, 3.0));
        let out = free_evolve(&s, 2.0);
        assert_eq!(out.profile, F::constant(1, 6.0));
        assert_eq!(out.velocity, F::constant(1, 3.0));
    }

    #[test]
    fn cosine_flips_after_half_period() {
        let s = state(cos_x(), F::zero(1));
        let out = free_evolve(&s, std::f64::consts::PI);
        let want = state(cos_x().scale(-1.0), F::zero(1));
        assert!(state_error(&out, &want).unwrap() < 1e-12);
    }

    #[test]
    fn free_flow_is_a_group() {
        let s = state(cos_x(), F::constant(1, 0.7));
        let back = free_evolve(&free_evolve(&s, 1.3), -1.3);
        assert!(state_error(&back, &s).unwrap() < 1e-12);

        let split = free_evolve(&free_evolve(&s, 0.4), 0.9);
        let joined = free_evolve(&s, 1.3);
        assert!(state_error(&split, &joined).unwrap() < 1e-12);
    }

    #[test]
    fn energy_examples_and_conservation() {
        assert_eq!(energy(&WaveState::<f64>::zero(1)), 0.0);

        let s = state(cos_x(), F::zero(1));
        assert!((energy(&s) - 0.5).abs() < 1e-14);

        let e0 = energy(&s);
        for &t in &[0.1, 1.0, 7.3] {
            let e = energy(&free_evolve(&s, t));
            assert!((e - e0).abs() < 1e-11 * e0);
        }
    }

    #[test]
    fn kick_examples() {
        let s = state(F::constant(1, 1.0), F::zero(1));
        let out = kick(&s, 2.0, &cos_x()).unwrap();
        assert_eq!(out.profile, F::constant(1, 1.0));
        assert_eq!(out.velocity, cos_x().scale(2.0));

        let s = state(cos_x(), F::zero(1));
        let out = kick(&s, 1.0, &cos_x()).unwrap();
        let half = F::constant(1, 0.5);
        let want = half
            .add(&F::cosine(&ModeIndex::new(&[2])).scale(0.5))
            .unwrap();
        assert!(out.velocity.sub(&want).unwrap().sobolev_norm(SobolevIndex::L2) < 1e-15);
    }

    #[test]
    fn kicks_invert_and_compose_additively() {
        let s = state(
            cos_x().add(&F::constant(1, 0.3)).unwrap(),
            F::sine(&ModeIndex::new(&[1])),
        );
        let phi = cos_x();
        let back = kick(&kick(&s, 0.8, &phi).unwrap(), -0.8, &phi).unwrap();
        assert!(state_error(&back, &s).unwrap() < 1e-15);

        let two_small = kick(&kick(&s, 0.3, &phi).unwrap(), 0.5, &phi).unwrap();
        let one_big = kick(&s, 0.8, &phi).unwrap();
        assert!(state_error(&two_small, &one_big).unwrap() < 1e-15);
    }

    #[test]
    fn truncated_kick_reports_dropped_mass() {
        let s = state(cos_x(), F::zero(1));
        let phi = F::cosine(&ModeIndex::new(&[3]));
        // cos(3x)cos(x) = (cos 2x + cos 4x)/2; the cap at 3 sheds the +-4 pair.
        let (out, dropped) = kick_truncated(&s, 1.0, &phi, 3).unwrap();
        assert_eq!(out.velocity.support_linf(), 2);
        assert!((dropped - 0.25f64 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn zero_control_is_exactly_the_free_flow() {
        let s = state(cos_x(), F::constant(1, 0.4));
        let params = SplittingParams::new(0.05).unwrap();
        let out = constant_control_evolve(&s, &[0.0, 0.0, 0.0], 1.7, params, Some(8)).unwrap();
        assert_eq!(out.state, free_evolve(&s, 1.7));
        assert_eq!(out.truncation_residual, 0.0);
    }

    #[test]
    fn constant_forcing_matches_the_zero_mode_flow() {
        // Constant profile, constant control a: the zero mode obeys the
        // 2x2 system (0 1; a 0), whose flow is cosh/sinh of sqrt(a) t.
        let s = state(F::constant(1, 1.0), F::zero(1));
        let a = 1.0f64;
        let t = 1.0f64;
        let params = SplittingParams::new(1e-3).unwrap();
        let out = constant_control_evolve(&s, &[a, 0.0, 0.0], t, params, None)
            .unwrap()
            .state;
        let k0 = ModeIndex::zero(1);
        assert!((out.profile.coeff(&k0).re - t.cosh()).abs() < 1e-5);
        assert!((out.velocity.coeff(&k0).re - t.sinh()).abs() < 1e-5);
    }

    #[test]
    fn splitting_error_shrinks_quadratically() {
        let s = state(cos_x(), F::zero(1));
        let p = [0.3, 0.7, 0.0];
        let run = |dt: f64| {
            constant_control_evolve(&s, &p, 0.5, SplittingParams::new(dt).unwrap(), None)
                .unwrap()
                .state
        };
        let reference = run(0.5 / 4096.0);
        let e1 = state_error(&run(0.5 / 16.0), &reference).unwrap();
        let e2 = state_error(&run(0.5 / 32.0), &reference).unwrap();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn conjugated_step_with_zero_psi_is_free() {
        let s = state(cos_x(), F::zero(1));
        let out = conjugated_step(&s, &F::zero(1), 0.25).unwrap();
        assert_eq!(out, free_evolve(&s, 0.25));
    }

    #[test]
    fn conjugated_step_approaches_the_bracket_target() {
        let s = state(F::constant(1, 1.0), F::zero(1));
        let psi = cos_x();
        let target = bracket_target(&s, &psi).unwrap();
        // limit velocity: -cos^2 x = -1/2 - cos(2x)/2
        let k0 = ModeIndex::zero(1);
        assert!((target.velocity.coeff(&k0).re + 0.5).abs() < 1e-15);
        assert!((target.velocity.coeff(&ModeIndex::new(&[2])).re + 0.25).abs() < 1e-15);

        let err = |tau: f64| {
            state_error(&conjugated_step(&s, &psi, tau).unwrap(), &target).unwrap()
        };
        assert!(err(1e-3) < err(1e-1) / 5.0);
    }

    #[test]
    fn bracket_target_examples() {
        let s = state(F::constant(1, 1.0), F::zero(1));
        let out = bracket_target(&s, &F::constant(1, 1.0)).unwrap();
        assert_eq!(out.velocity, F::constant(1, -1.0));

        let s = state(cos_x(), F::zero(1));
        let out = bracket_target(&s, &cos_x()).unwrap();
        // -cos^3 x = -(3 cos x + cos 3x)/4
        let want = cos_x()
            .scale(-0.75)
            .add(&F::cosine(&ModeIndex::new(&[3])).scale(-0.25))
            .unwrap();
        assert!(out.velocity.sub(&want).unwrap().sobolev_norm(SobolevIndex::L2) < 1e-14);
    }
}
