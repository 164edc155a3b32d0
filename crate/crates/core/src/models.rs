//! Built-in test problems, each available as a network, as a plain
//! function of `(state, time)`, and as a closed-form solution.
//!
//! The function forms accumulate from `0.0` in the same order as the
//! corresponding affine layer, so the two agree bit for bit.

use thiserror::Error;

use crate::graph::{Activation, Layer, NetworkGraph};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid mass-damper-stiffness parameters m={m}, d={d}, c={c}: need m > 0, d >= 0, c > 0, all finite")]
    Mds { m: f64, d: f64, c: f64 },
    #[error("decay rate must be finite, got {0}")]
    Decay(f64),
    #[error("state dimension must be at least 1")]
    ZeroDim,
}

/// `m x'' + d x' + c x = 0` with state `(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsParams {
    pub m: f64,
    pub d: f64,
    pub c: f64,
}

impl MdsParams {
    pub fn new(m: f64, d: f64, c: f64) -> Result<Self, ModelError> {
        let p = MdsParams { m, d, c };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<(), ModelError> {
        let MdsParams { m, d, c } = *self;
        let ok = m.is_finite() && d.is_finite() && c.is_finite() && m > 0.0 && c > 0.0 && d >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::Mds { m, d, c })
        }
    }

    /// `c/m` and `d/m`.
    fn ratios(&self) -> (f64, f64) {
        (self.c / self.m, self.d / self.m)
    }
}

/// `u' = lambda u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    pub lambda: f64,
}

impl DecayParams {
    pub fn new(lambda: f64) -> Result<Self, ModelError> {
        if lambda.is_finite() {
            Ok(DecayParams { lambda })
        } else {
            Err(ModelError::Decay(lambda))
        }
    }
}

/// Single linear layer with input `(x, v, t)` and output
/// `(v, -(c/m) x - (d/m) v)`.
pub fn mds_rhs_net(p: &MdsParams) -> Result<NetworkGraph, ModelError> {
    p.check()?;
    let (k, e) = p.ratios();
    let layer = Layer::uniform(
        vec![vec![0.0, 1.0, 0.0], vec![-k, -e, 0.0]],
        vec![0.0, 0.0],
        Activation::Linear,
    );
    Ok(NetworkGraph::new(3, vec![layer]).expect("mds layer is well formed"))
}

pub fn mds_rhs(p: &MdsParams, state: &[f64], _t: f64) -> Vec<f64> {
    let (k, e) = p.ratios();
    let (x, v) = (state[0], state[1]);
    vec![0.0 + v, 0.0 + (-k) * x + (-e) * v]
}

/// Relative tolerance on the discriminant `d^2 - 4mc` below which the
/// system is treated as critically damped.
pub const CRITICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    Under,
    Critical,
    Over,
}

pub fn damping_regime(p: &MdsParams) -> Damping {
    let dd = p.d * p.d;
    let mc4 = 4.0 * p.m * p.c;
    let disc = dd - mc4;
    if disc.abs() <= CRITICAL_TOL * dd.max(mc4) {
        Damping::Critical
    } else if disc < 0.0 {
        Damping::Under
    } else {
        Damping::Over
    }
}

/// Closed-form `(x(t), v(t))` for initial data `(x0, v0)` at `t = 0`.
pub fn mds_exact(p: &MdsParams, x0: f64, v0: f64, t: f64) -> Result<(f64, f64), ModelError> {
    p.check()?;
    Ok(match damping_regime(p) {
        Damping::Under => underdamped(p, x0, v0, t),
        Damping::Critical => critical(p, x0, v0, t),
        Damping::Over => overdamped(p, x0, v0, t),
    })
}

// Each branch is arranged so that t = 0 reproduces (x0, v0) exactly.

fn underdamped(p: &MdsParams, x0: f64, v0: f64, t: f64) -> (f64, f64) {
    let alpha = -p.d / (2.0 * p.m);
    let omega = (4.0 * p.m * p.c - p.d * p.d).sqrt() / (2.0 * p.m);
    let bsin = (v0 - alpha * x0) / omega;
    let (s, co) = (omega * t).sin_cos();
    let decay = (alpha * t).exp();
    let x = decay * (x0 * co + bsin * s);
    let v = decay * (v0 * co + (alpha * bsin - omega * x0) * s);
    (x, v)
}

fn critical(p: &MdsParams, x0: f64, v0: f64, t: f64) -> (f64, f64) {
    let lambda = -p.d / (2.0 * p.m);
    let slope = v0 - lambda * x0;
    let decay = (lambda * t).exp();
    ((x0 + slope * t) * decay, (v0 + lambda * slope * t) * decay)
}

fn overdamped(p: &MdsParams, x0: f64, v0: f64, t: f64) -> (f64, f64) {
    let root = (p.d * p.d - 4.0 * p.m * p.c).sqrt();
    // stable pair of roots of m l^2 + d l + c = 0
    let q = -0.5 * (p.d + root);
    let (l1, l2) = (q / p.m, p.c / q);
    let c1 = (v0 - l2 * x0) / (l1 - l2);
    let c2 = (l1 * x0 - v0) / (l1 - l2);
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    (x0 * e2 + c1 * (e1 - e2), v0 * e1 + l2 * c2 * (e2 - e1))
}

/// Depth-1 linear net computing `lambda u` from `(u, t)`.
pub fn decay_rhs_net(p: &DecayParams) -> NetworkGraph {
    let layer = Layer::uniform(vec![vec![p.lambda, 0.0]], vec![0.0], Activation::Linear);
    NetworkGraph::new(2, vec![layer]).expect("decay layer is well formed")
}

pub fn decay_rhs(p: &DecayParams, state: &[f64], _t: f64) -> Vec<f64> {
    vec![0.0 + p.lambda * state[0]]
}

pub fn decay_exact(p: &DecayParams, u0: f64, t: f64) -> f64 {
    u0 * (p.lambda * t).exp()
}

/// `r(u, t) = 0` in `dim` dimensions: all weights zero.
pub fn zero_rhs_net(dim: usize) -> Result<NetworkGraph, ModelError> {
    if dim == 0 {
        return Err(ModelError::ZeroDim);
    }
    let layer = Layer::uniform(
        vec![vec![0.0; dim + 1]; dim],
        vec![0.0; dim],
        Activation::Linear,
    );
    Ok(NetworkGraph::new(dim + 1, vec![layer]).expect("zero layer is well formed"))
}

/// A right-hand side known both as a network and as a function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhsModel {
    Mds(MdsParams),
    Decay(DecayParams),
    Zero { dim: usize },
}

impl RhsModel {
    pub fn state_dim(&self) -> usize {
        match self {
            RhsModel::Mds(_) => 2,
            RhsModel::Decay(_) => 1,
            RhsModel::Zero { dim } => *dim,
        }
    }

    pub fn net(&self) -> Result<NetworkGraph, ModelError> {
        match self {
            RhsModel::Mds(p) => mds_rhs_net(p),
            RhsModel::Decay(p) => Ok(decay_rhs_net(p)),
            RhsModel::Zero { dim } => zero_rhs_net(*dim),
        }
    }

    pub fn eval(&self, state: &[f64], t: f64) -> Vec<f64> {
        match self {
            RhsModel::Mds(p) => mds_rhs(p, state, t),
            RhsModel::Decay(p) => decay_rhs(p, state, t),
            RhsModel::Zero { dim } => vec![0.0; *dim],
        }
    }

    /// Analytic solution at time `t` for the state `u0` given at `t0`.
    pub fn exact(&self, u0: &[f64], t0: f64, t: f64) -> Result<Vec<f64>, ModelError> {
        let dt = t - t0;
        Ok(match self {
            RhsModel::Mds(p) => {
                let (x, v) = mds_exact(p, u0[0], u0[1], dt)?;
                vec![x, v]
            }
            RhsModel::Decay(p) => vec![decay_exact(p, u0[0], dt)],
            RhsModel::Zero { .. } => u0.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mds_net_examples() {
        let unit = MdsParams::new(1.0, 0.0, 1.0).unwrap();
        let net = mds_rhs_net(&unit).unwrap();
        assert_eq!(net.depth(), 1);
        assert_eq!(net.eval(&[1.0, 0.0, 0.0]).unwrap(), vec![0.0, -1.0]);

        let p = MdsParams::new(2.0, 0.4, 8.0).unwrap();
        let out = mds_rhs_net(&p).unwrap().eval(&[1.0, 1.0, 5.0]).unwrap();
        assert_eq!(out[0], 1.0);
        assert!(close(out[1], -4.2, 1e-15));

        assert_eq!(
            mds_rhs_net(&p).unwrap().eval(&[0.0, 0.0, 3.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn mds_params_are_checked() {
        assert!(MdsParams::new(0.0, 0.0, 1.0).is_err());
        assert!(MdsParams::new(1.0, -0.1, 1.0).is_err());
        assert!(MdsParams::new(1.0, 0.0, 0.0).is_err());
        assert!(MdsParams::new(1.0, f64::NAN, 1.0).is_err());
        let bad = MdsParams {
            m: -1.0,
            d: 0.0,
            c: 1.0,
        };
        assert!(mds_rhs_net(&bad).is_err());
        assert!(mds_exact(&bad, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn exact_undamped_half_period() {
        let p = MdsParams::new(1.0, 0.0, 1.0).unwrap();
        let (x, v) = mds_exact(&p, 1.0, 0.0, PI).unwrap();
        assert!(close(x, -1.0, 1e-12) && close(v, 0.0, 1e-12), "{x} {v}");
    }

    #[test]
    fn exact_critical() {
        let p = MdsParams::new(1.0, 2.0, 1.0).unwrap();
        assert_eq!(damping_regime(&p), Damping::Critical);
        let (x, v) = mds_exact(&p, 1.0, 0.0, 1.0).unwrap();
        assert!(close(x, 2.0 / E, 1e-12) && close(v, -1.0 / E, 1e-12));
    }

    #[test]
    fn exact_initial_condition_all_regimes() {
        for (m, d, c) in [
            (1.0, 0.0, 1.0),
            (1.0, 0.3, 1.0),
            (1.0, 2.0, 1.0),
            (1.0, 5.0, 1.0),
            (2.0, 0.4, 8.0),
        ] {
            let p = MdsParams::new(m, d, c).unwrap();
            for (x0, v0) in [(1.0, 0.0), (-0.3, 2.5), (0.0, -1.0)] {
                assert_eq!(mds_exact(&p, x0, v0, 0.0).unwrap(), (x0, v0));
            }
        }
    }

    /// Centered differences of the closed form must reproduce the ODE.
    #[test]
    fn exact_solution_satisfies_ode() {
        let h = 1e-6;
        for (m, d, c) in [
            (1.0, 0.0, 1.0),
            (1.0, 0.3, 1.0),
            (2.0, 0.4, 8.0),
            (1.0, 2.0, 1.0),
            (1.0, 5.0, 1.0),
        ] {
            let p = MdsParams::new(m, d, c).unwrap();
            for &t in &[0.3, 1.0, 2.7, 6.0] {
                let (x, v) = mds_exact(&p, 1.0, 0.5, t).unwrap();
                let (xp, vp) = mds_exact(&p, 1.0, 0.5, t + h).unwrap();
                let (xm, vm) = mds_exact(&p, 1.0, 0.5, t - h).unwrap();
                let dx = (xp - xm) / (2.0 * h);
                let dv = (vp - vm) / (2.0 * h);
                let accel = -(d / m) * v - (c / m) * x;
                let scale_x = v.abs().max(1e-3);
                let scale_v = accel.abs().max(1e-3);
                assert!((dx - v).abs() <= 1e-6 * scale_x, "x' at {t}: {dx} vs {v}");
                assert!(
                    (dv - accel).abs() <= 1e-6 * scale_v,
                    "v' at {t}: {dv} vs {accel}"
                );
            }
        }
    }

    #[test]
    fn branches_agree_near_critical() {
        let (m, c) = (1.0, 1.0);
        let d_crit: f64 = 2.0;
        for rel in [-3e-9, -2e-9, 2e-9, 3e-9] {
            let d = d_crit * (1.0 + rel);
            let p = MdsParams::new(m, d, c).unwrap();
            assert_ne!(damping_regime(&p), Damping::Critical);
            for t in [0.5, 1.0, 5.0, 10.0] {
                let (xa, va) = mds_exact(&p, 1.0, 0.2, t).unwrap();
                let (xc, vc) = critical(&p, 1.0, 0.2, t);
                assert!(
                    (xa - xc).abs() <= 1e-6 * xc.abs(),
                    "x rel {rel} t {t}: {xa} {xc}"
                );
                assert!(
                    (va - vc).abs() <= 1e-6 * vc.abs(),
                    "v rel {rel} t {t}: {va} {vc}"
                );
            }
        }
    }

    #[test]
    fn decay_examples() {
        let p = DecayParams::new(-1.0).unwrap();
        assert_eq!(decay_exact(&p, 1.0, 1.0), (-1.0f64).exp());
        let flat = DecayParams::new(0.0).unwrap();
        assert_eq!(decay_exact(&flat, 3.25, 17.0), 3.25);
        assert_eq!(decay_rhs_net(&p).eval(&[2.0, 7.0]).unwrap(), vec![-2.0]);
        assert!(DecayParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn zero_model() {
        let m = RhsModel::Zero { dim: 3 };
        let net = m.net().unwrap();
        assert_eq!(net.input_dim(), 4);
        assert_eq!(net.eval(&[1.0, -2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(
            m.exact(&[1.0, 2.0, 3.0], 0.0, 5.0).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(zero_rhs_net(0), Err(ModelError::ZeroDim));
    }
}
