//! Embedded Dormand–Prince 5(4) integrator, generic over the state vector.
//!
//! One core drives every integration in the crate: complex two-component
//! states for paths in the plane, real triples for the electro-diffusion
//! system, and double-double pairs for the exponentially sensitive shooting
//! runs. The independent variable is likewise generic (`f64`, or `Dd` when
//! sub-ulp bisection knobs must stay meaningful).
//!
//! Dense output uses the standard fifth-order interpolant of the pair; its
//! coefficients are stored per accepted step when requested.

use crate::dd::Dd;

/// Minimal vector-space interface the stepper needs.
pub trait RkVec: Copy {
    fn zero() -> Self;
    /// `self + c * v`
    fn axpy(self, c: f64, v: Self) -> Self;
    /// `self + (h * c) * v`, with the scalar product carried out at the
    /// state's own precision. For f64-backed states this is just `axpy`;
    /// the double-double state overrides it, because rounding `h * c` to
    /// f64 before the update would feed ~1e-16 relative noise into every
    /// stage — enough to put a floor under both the error estimator and
    /// the flow itself on exponentially sensitive runs.
    fn axpyh(self, h: f64, c: f64, v: Self) -> Self {
        self.axpy(h * c, v)
    }
    fn sub(self, v: Self) -> Self;
    fn inf_norm(self) -> f64;
}

impl RkVec for [f64; 2] {
    fn zero() -> Self {
        [0.0; 2]
    }
    fn axpy(self, c: f64, v: Self) -> Self {
        [self[0] + c * v[0], self[1] + c * v[1]]
    }
    fn sub(self, v: Self) -> Self {
        [self[0] - v[0], self[1] - v[1]]
    }
    fn inf_norm(self) -> f64 {
        self[0].abs().max(self[1].abs())
    }
}

impl RkVec for [f64; 3] {
    fn zero() -> Self {
        [0.0; 3]
    }
    fn axpy(self, c: f64, v: Self) -> Self {
        [self[0] + c * v[0], self[1] + c * v[1], self[2] + c * v[2]]
    }
    fn sub(self, v: Self) -> Self {
        [self[0] - v[0], self[1] - v[1], self[2] - v[2]]
    }
    fn inf_norm(self) -> f64 {
        self[0].abs().max(self[1].abs()).max(self[2].abs())
    }
}

impl RkVec for [num_complex::Complex64; 2] {
    fn zero() -> Self {
        [num_complex::Complex64::new(0.0, 0.0); 2]
    }
    fn axpy(self, c: f64, v: Self) -> Self {
        [self[0] + c * v[0], self[1] + c * v[1]]
    }
    fn sub(self, v: Self) -> Self {
        [self[0] - v[0], self[1] - v[1]]
    }
    fn inf_norm(self) -> f64 {
        // Cheap uniform norm; the max of |re|,|im| is within sqrt(2) of |.|.
        let m = |z: num_complex::Complex64| z.re.abs().max(z.im.abs());
        m(self[0]).max(m(self[1]))
    }
}

impl RkVec for [Dd; 2] {
    fn zero() -> Self {
        [Dd::ZERO; 2]
    }
    fn axpy(self, c: f64, v: Self) -> Self {
        [self[0] + v[0] * c, self[1] + v[1] * c]
    }
    fn axpyh(self, h: f64, c: f64, v: Self) -> Self {
        [self[0] + v[0] * h * c, self[1] + v[1] * h * c]
    }
    fn sub(self, v: Self) -> Self {
        [self[0] - v[0], self[1] - v[1]]
    }
    fn inf_norm(self) -> f64 {
        self[0].hi.abs().max(self[1].hi.abs())
    }
}

/// Independent variable: plain f64, or Dd for runs that must keep
/// sub-f64 positional coherence.
pub trait Indep: Copy {
    fn advance(self, h: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Indep for f64 {
    fn advance(self, h: f64) -> Self {
        self + h
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Indep for Dd {
    fn advance(self, h: f64) -> Self {
        self + h
    }
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
}

// Dormand–Prince coefficients.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// b - bhat: the embedded fourth-order error weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the fifth coefficient.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkStatus {
    /// Reached the end of the integration interval.
    Reached,
    /// The step callback requested a stop.
    Halted,
    /// Step size collapsed below the floor without the callback stopping us.
    StepUnderflow,
    /// State stopped being finite.
    NonFinite,
    MaxSteps,
}

#[derive(Debug, Clone, Copy)]
pub struct RkOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h0: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    pub dense: bool,
}

impl Default for RkOpts {
    fn default() -> Self {
        RkOpts {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h0: None,
            h_max: None,
            max_steps: 2_000_000,
            dense: false,
        }
    }
}

/// One dense-output segment: state(t0 + theta*h) for theta in [0,1].
#[derive(Debug, Clone)]
pub struct DenseSeg<V> {
    pub t0: f64,
    pub h: f64,
    pub c: [V; 5],
}

impl<V: RkVec> DenseSeg<V> {
    pub fn eval(&self, theta: f64) -> V {
        let th = theta;
        let th1 = 1.0 - theta;
        // c1 + th*(c2 + th1*(c3 + th*(c4 + th1*c5)))
        let inner = self.c[3].axpy(th1, self.c[4]);
        let mid = self.c[2].axpy(th, inner);
        let outer = self.c[1].axpy(th1, mid);
        self.c[0].axpy(th, outer)
    }
}

#[derive(Debug, Clone)]
pub struct RkSolution<V, X> {
    pub ts: Vec<X>,
    pub states: Vec<V>,
    pub dense: Vec<DenseSeg<V>>,
    pub accepted: usize,
    pub rejected: usize,
    pub status: RkStatus,
}

impl<V: RkVec, X: Indep> RkSolution<V, X> {
    /// Evaluates the dense interpolant at parameter t (requires `dense`).
    pub fn eval_dense(&self, t: f64) -> Option<V> {
        if self.dense.is_empty() {
            return None;
        }
        // Segments are ordered in integration direction; binary-search by t0.
        let dir = self.dense[0].h.signum();
        let key = t * dir;
        let idx = self
            .dense
            .partition_point(|s| s.t0 * dir <= key)
            .saturating_sub(1);
        let seg = &self.dense[idx];
        let theta = (t - seg.t0) / seg.h;
        Some(seg.eval(theta.clamp(0.0, 1.0)))
    }
}

pub enum StepControl {
    Continue,
    Stop,
}

pub struct StepInfo<'a, V, X> {
    pub t: X,
    pub y: &'a V,
    pub h_used: f64,
    pub accepted: usize,
}

/// Integrates dy/dt = rhs(t, y) from (t0, y0) to t_end.
///
/// `on_step` runs after every accepted step and may halt the run (used for
/// blow-up and sign-crossing detection by the callers).
pub fn integrate<V, X, F, G>(
    mut rhs: F,
    t0: X,
    y0: V,
    t_end: f64,
    opts: &RkOpts,
    mut on_step: G,
) -> RkSolution<V, X>
where
    V: RkVec,
    X: Indep,
    F: FnMut(X, V) -> V,
    G: FnMut(StepInfo<V, X>) -> StepControl,
{
    let span = t_end - t0.to_f64();
    let dir = if span >= 0.0 { 1.0 } else { -1.0 };
    let h_floor = 1e-13 * span.abs().max(1.0);
    let h_max = opts.h_max.unwrap_or(span.abs());
    let mut h = opts.h0.unwrap_or(1e-3 * span.abs()).min(h_max).max(h_floor) * dir;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, y);
    let mut sol = RkSolution {
        ts: vec![t0],
        states: vec![y0],
        dense: Vec::new(),
        accepted: 0,
        rejected: 0,
        status: RkStatus::MaxSteps,
    };

    for _ in 0..opts.max_steps {
        let remaining = t_end - t.to_f64();
        if remaining * dir <= 0.0 {
            sol.status = RkStatus::Reached;
            return sol;
        }
        if h.abs() > remaining.abs() {
            h = remaining;
        }

        let k2 = rhs(t.advance(C[1] * h), y.axpyh(h, A2[0], k1));
        let y3 = y.axpyh(h, A3[0], k1).axpyh(h, A3[1], k2);
        let k3 = rhs(t.advance(C[2] * h), y3);
        let y4 = y.axpyh(h, A4[0], k1).axpyh(h, A4[1], k2).axpyh(h, A4[2], k3);
        let k4 = rhs(t.advance(C[3] * h), y4);
        let y5 = y
            .axpyh(h, A5[0], k1)
            .axpyh(h, A5[1], k2)
            .axpyh(h, A5[2], k3)
            .axpyh(h, A5[3], k4);
        let k5 = rhs(t.advance(C[4] * h), y5);
        let y6 = y
            .axpyh(h, A6[0], k1)
            .axpyh(h, A6[1], k2)
            .axpyh(h, A6[2], k3)
            .axpyh(h, A6[3], k4)
            .axpyh(h, A6[4], k5);
        let k6 = rhs(t.advance(C[5] * h), y6);
        let y_new = y
            .axpyh(h, A7[0], k1)
            .axpyh(h, A7[2], k3)
            .axpyh(h, A7[3], k4)
            .axpyh(h, A7[4], k5)
            .axpyh(h, A7[5], k6);
        let t_new = t.advance(h);
        let k7 = rhs(t_new, y_new);

        if !y_new.inf_norm().is_finite() {
            sol.status = RkStatus::NonFinite;
            return sol;
        }

        let err_vec = V::zero()
            .axpy(E[0], k1)
            .axpy(E[2], k3)
            .axpy(E[3], k4)
            .axpy(E[4], k5)
            .axpy(E[5], k6)
            .axpy(E[6], k7);
        // Shared-scale uniform norm: relative control against the larger of
        // the old/new state norms, so zero crossings of one component do not
        // stall the step size.
        let scale = opts.abs_tol + opts.rel_tol * y.inf_norm().max(y_new.inf_norm());
        let err = err_vec.inf_norm() * h.abs() / scale;

        if err <= 1.0 {
            if opts.dense {
                let ydiff = y_new.sub(y);
                let bspl = V::zero().axpy(h, k1).sub(ydiff);
                let c4 = ydiff.sub(V::zero().axpy(h, k7)).sub(bspl);
                let c5 = V::zero()
                    .axpyh(h, D[0], k1)
                    .axpyh(h, D[2], k3)
                    .axpyh(h, D[3], k4)
                    .axpyh(h, D[4], k5)
                    .axpyh(h, D[5], k6)
                    .axpyh(h, D[6], k7);
                sol.dense.push(DenseSeg { t0: t.to_f64(), h, c: [y, ydiff, bspl, c4, c5] });
            }
            t = t_new;
            y = y_new;
            k1 = k7; // FSAL
            sol.accepted += 1;
            sol.ts.push(t);
            sol.states.push(y);
            let info = StepInfo { t, y: &y, h_used: h, accepted: sol.accepted };
            if let StepControl::Stop = on_step(info) {
                sol.status = RkStatus::Halted;
                return sol;
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
            h = (h * fac).clamp(-h_max, h_max);
        } else {
            sol.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
        if h.abs() < h_floor {
            sol.status = RkStatus::StepUnderflow;
            return sol;
        }
    }
    sol
}
