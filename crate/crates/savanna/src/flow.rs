//! Deterministic inter-fire dynamics.
//!
//! The tree component has the closed-form logistic solution
//! `w(t) = w0 / (w0 + (1 − w0)·e^{−r_w t})`; the grass component is solved
//! by an adaptive Dormand–Prince 5(4) pair with `w(t)` substituted in closed
//! form, and the integrated intensity `Λ(t) = ∫₀ᵗ λ(π_s x) ds` is carried as
//! an extra quadrature component of the same integrator. `Λ` is what the
//! jump-time samplers invert, hence the tight default tolerance.

use thiserror::Error;

use crate::model::{ModelParams, State};

/// Default relative tolerance of the adaptive integrator.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Absolute tolerance floor of the adaptive integrator.
pub const ABS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("integrator step size underflowed at t = {t} (pathological intensity or tolerance)")]
    IntegratorFailure { t: f64 },
    #[error("flow left [0,1]^2: ({w}, {g}) at t = {t}")]
    DomainExcursion { w: f64, g: f64, t: f64 },
}

/// Result of flowing a state for a given time.
#[derive(Debug, Clone, Copy)]
pub struct FlowResult {
    /// State `π_t(x0)`.
    pub state: State,
    /// `Λ(t) = ∫₀ᵗ λ(π_s x0) ds`, nonnegative and nondecreasing in `t`.
    pub integrated_intensity: f64,
    /// Accepted integrator steps.
    pub steps_taken: u64,
}

/// Closed-form logistic solution of `w' = r_w·w·(1 − w)`.
///
/// Written in the `e^{−r_w t}` form so that large `t` cannot overflow.
pub fn flow_w(params: &ModelParams, w0: f64, t: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&w0) && t >= 0.0);
    if w0 == 0.0 {
        return 0.0;
    }
    w0 / (w0 + (1.0 - w0) * (-params.r_w() * t).exp())
}

/// Flows `x0` for time `t`, returning the end state, `Λ(t)`, and the step
/// count. `tol` is the relative error target per step, required in
/// `(0, 1e-3]`.
pub fn flow(params: &ModelParams, x0: State, t: f64, tol: f64) -> Result<FlowResult, FlowError> {
    assert!(t >= 0.0, "flow time must be nonnegative, got {t}");
    assert!(
        tol > 0.0 && tol <= 1e-3,
        "tolerance must lie in (0, 1e-3], got {tol}"
    );
    if t == 0.0 {
        return Ok(FlowResult {
            state: x0,
            integrated_intensity: 0.0,
            steps_taken: 0,
        });
    }
    // No grass: w is closed-form and lambda vanishes along the whole path.
    if x0.g() == 0.0 {
        let state = State::new(flow_w(params, x0.w(), t), 0.0)
            .map_err(|_| FlowError::DomainExcursion { w: x0.w(), g: 0.0, t })?;
        return Ok(FlowResult {
            state,
            integrated_intensity: 0.0,
            steps_taken: 0,
        });
    }

    let w0 = x0.w();
    let rhs = |s: f64, y: &[f64; 2]| -> [f64; 2] {
        let w = flow_w(params, w0, s);
        let g = y[0];
        [
            params.r_g() * g * (1.0 - g - w),
            params.intensity_raw(w, g),
        ]
    };
    let out = dopri5(rhs, 0.0, [x0.g(), 0.0], t, tol, ABS_TOL, None)?;
    let w_end = flow_w(params, w0, t);
    let state = State::new(w_end, out.y[0]).map_err(|_| FlowError::DomainExcursion {
        w: w_end,
        g: out.y[0],
        t,
    })?;
    Ok(FlowResult {
        state,
        integrated_intensity: out.y[1].max(0.0),
        steps_taken: out.steps,
    })
}

/// Hot-path variant used by the samplers: advances only the grass component
/// (no `Λ` quadrature) and threads an initial-step hint between calls.
pub(crate) fn advance_state(
    params: &ModelParams,
    x: State,
    dt: f64,
    tol: f64,
    h_hint: Option<f64>,
) -> Result<(State, Option<f64>), FlowError> {
    if dt == 0.0 {
        return Ok((x, h_hint));
    }
    let w_end = flow_w(params, x.w(), dt);
    if x.g() == 0.0 {
        let state = State::new(w_end, 0.0)
            .map_err(|_| FlowError::DomainExcursion { w: w_end, g: 0.0, t: dt })?;
        return Ok((state, h_hint));
    }
    let w0 = x.w();
    let rhs = |s: f64, y: &[f64; 1]| -> [f64; 1] {
        let w = flow_w(params, w0, s);
        [params.r_g() * y[0] * (1.0 - y[0] - w)]
    };
    let out = dopri5(rhs, 0.0, [x.g()], dt, tol, ABS_TOL, h_hint)?;
    let state = State::new(w_end, out.y[0]).map_err(|_| FlowError::DomainExcursion {
        w: w_end,
        g: out.y[0],
        t: dt,
    })?;
    Ok((state, Some(out.h_last)))
}

/// Stability label of an equilibrium of the fire-free system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    StableNode,
    UnstableNode,
    Saddle,
}

#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    pub location: State,
    pub classification: Stability,
    /// Eigenvalues of the Jacobian (it is lower triangular, so these are the
    /// diagonal entries `r_w(1−2w)` and `r_g(1−2g−w)`).
    pub eigenvalues: (f64, f64),
    /// Set when one eigenvalue vanishes: the linearization alone does not
    /// decide stability and the label follows the nonlinear behavior.
    pub degenerate: bool,
}

/// The three rest points of the fire-free system with their classification:
/// `(0,0)` unstable, `(1,0)` locally stable (degenerate linearization in the
/// grass direction), `(0,1)` a saddle.
pub fn equilibria(params: &ModelParams) -> Vec<Equilibrium> {
    let eig = |w: f64, g: f64| -> (f64, f64) {
        (
            params.r_w() * (1.0 - 2.0 * w),
            params.r_g() * (1.0 - 2.0 * g - w),
        )
    };
    let mk = |w: f64, g: f64, classification: Stability| {
        let eigenvalues = eig(w, g);
        Equilibrium {
            location: State::new(w, g).expect("rest points lie in the domain"),
            classification,
            eigenvalues,
            degenerate: eigenvalues.0 == 0.0 || eigenvalues.1 == 0.0,
        }
    };
    vec![
        mk(0.0, 0.0, Stability::UnstableNode),
        mk(1.0, 0.0, Stability::StableNode),
        mk(0.0, 1.0, Stability::Saddle),
    ]
}

struct Dopri5Out<const N: usize> {
    y: [f64; N],
    steps: u64,
    h_last: f64,
}

/// Dormand–Prince 5(4) with standard step-size control. Integrates from
/// `t0` to `t_end ≥ t0`; errors out when the step size underflows.
fn dopri5<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    rtol: f64,
    atol: f64,
    h_hint: Option<f64>,
) -> Result<Dopri5Out<N>, FlowError> {
    const A2: [f64; 1] = [1.0 / 5.0];
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ];
    const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    // Fifth-order weights (also the last stage: FSAL).
    const B: [f64; 6] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ];
    // Difference between the 5th- and embedded 4th-order weights.
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    const C: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];

    let span = t_end - t0;
    debug_assert!(span > 0.0);
    let h_min = 1e-14 * (1.0 + span);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = h_hint.unwrap_or(0.1 * span).clamp(h_min, span);
    let mut h_accepted = h;
    let mut steps: u64 = 0;

    while t < t_end {
        h = h.min(t_end - t);
        let stage = |acc: &mut [f64; N], coef: &[f64], ks: &[&[f64; N]]| {
            for i in 0..N {
                let mut s = 0.0;
                for (c, k) in coef.iter().zip(ks) {
                    s += c * k[i];
                }
                acc[i] = y[i] + h * s;
            }
        };
        let mut yt = [0.0; N];
        stage(&mut yt, &A2, &[&k1]);
        let k2 = f(t + C[0] * h, &yt);
        stage(&mut yt, &A3, &[&k1, &k2]);
        let k3 = f(t + C[1] * h, &yt);
        stage(&mut yt, &A4, &[&k1, &k2, &k3]);
        let k4 = f(t + C[2] * h, &yt);
        stage(&mut yt, &A5, &[&k1, &k2, &k3, &k4]);
        let k5 = f(t + C[3] * h, &yt);
        stage(&mut yt, &A6, &[&k1, &k2, &k3, &k4, &k5]);
        let k6 = f(t + C[4] * h, &yt);

        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i]
                + h * (B[0] * k1[i] + B[2] * k3[i] + B[3] * k4[i] + B[4] * k5[i] + B[5] * k6[i]);
        }
        let k7 = f(t + h, &y_new);

        let mut err_sq = 0.0;
        for i in 0..N {
            let e = h
                * (E[0] * k1[i] + E[2] * k3[i] + E[3] * k4[i] + E[4] * k5[i] + E[5] * k6[i]
                    + E[6] * k7[i]);
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / N as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            steps += 1;
            h_accepted = h;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h < h_min {
            return Err(FlowError::IntegratorFailure { t });
        }
    }

    Ok(Dopri5Out {
        y,
        steps,
        h_last: h_accepted,
    })
}
