//! Scalar one-step integrators: adaptive Dormand–Prince 5(4), adaptive
//! Radau IIA for stiff stretches, and classical fixed-step RK4.

use crate::error::{Error, Result};

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth-order minus embedded fourth-order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Local error attributable to rounding, relative to `|y|`.
const ROUNDING_FLOOR: f64 = 8.0 * f64::EPSILON;

/// Smallest Radau step, in units of the spacing of floating-point numbers at `x`.
const MIN_STEP_ULPS: f64 = 64.0;

/// Step-size controller settings for [`Dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// Admissible local error per unit of the independent variable.
    pub tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl AdaptiveOptions {
    pub fn new(tol: f64) -> Self {
        AdaptiveOptions {
            tol,
            initial_step: 1e-3,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

/// A sample of the solution: position, value and derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub dy: f64,
}

/// Common interface of the adaptive integrators.
pub trait Stepper {
    fn node(&self) -> Node;
    /// Size of the next trial step.
    fn next_step(&self) -> f64;
    /// Caps the next trial step.
    fn limit_step(&mut self, h: f64);
    /// Takes one accepted step, never passing `x_stop`. Returns the new node.
    fn step_toward(&mut self, x_stop: f64) -> Result<Node>;

    /// Integrates to `x_end` exactly.
    fn advance_to(&mut self, x_end: f64) -> Result<Node> {
        while self.node().x < x_end {
            self.step_toward(x_end)?;
        }
        Ok(self.node())
    }
}

/// Step-size factor from the error ratio, for a local error of order `order`
/// (in `h`, relative to the per-unit-step allowance).
fn step_factor(allowed: f64, err: f64, order: f64, accepted: bool) -> f64 {
    if accepted {
        if err == 0.0 {
            5.0
        } else {
            (0.9 * (allowed / err).powf(1.0 / order)).clamp(0.2, 5.0)
        }
    } else if err.is_finite() && err > 0.0 {
        (0.9 * (allowed / err).powf(1.0 / order)).clamp(0.1, 0.9)
    } else {
        0.25
    }
}

/// Adaptive Dormand–Prince 5(4) integrator for `y' = f(x, y)` with FSAL.
pub struct Dopri5<F> {
    f: F,
    opts: AdaptiveOptions,
    x: f64,
    y: f64,
    dy: f64,
    h: f64,
    steps: usize,
}

impl<F: Fn(f64, f64) -> f64> Dopri5<F> {
    pub fn new(f: F, x0: f64, y0: f64, opts: AdaptiveOptions) -> Result<Self> {
        let dy = f(x0, y0);
        if !dy.is_finite() || !y0.is_finite() {
            return Err(Error::integration(x0, "non-finite initial state"));
        }
        Ok(Dopri5 {
            f,
            opts,
            x: x0,
            y: y0,
            dy,
            h: opts.initial_step,
            steps: 0,
        })
    }

    pub fn node(&self) -> Node {
        Node {
            x: self.x,
            y: self.y,
            dy: self.dy,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Caps the next trial step.
    pub fn limit_step(&mut self, h: f64) {
        if h > 0.0 && h < self.h {
            self.h = h;
        }
    }

    /// Takes one accepted step, never passing `x_stop`. Returns the new node.
    pub fn step_toward(&mut self, x_stop: f64) -> Result<Node> {
        let f = &self.f;
        let (x, y, k1) = (self.x, self.y, self.dy);
        let mut h = self.h.min(self.opts.max_step);
        loop {
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(Error::integration(x, "step budget exhausted"));
            }
            let remaining = x_stop - x;
            let landing = h >= remaining;
            if landing {
                h = remaining;
            }
            if !(h > 1e-15 * x.abs().max(1.0)) {
                return Err(Error::integration(x, "step size collapsed"));
            }
            let k2 = f(x + C2 * h, y + h * A21 * k1);
            let k3 = f(x + C3 * h, y + h * (A31 * k1 + A32 * k2));
            let k4 = f(x + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(x + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let k6 = f(
                x + h,
                y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
            );
            let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let x_new = if landing { x_stop } else { x + h };
            let k7 = f(x_new, y_new);
            let err = (h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
            // error per unit step, so the order seen by the controller is 4;
            // never below what rounding in y can resolve
            let allowed = self.opts.tol * h + ROUNDING_FLOOR * y.abs();
            if err.is_finite() && y_new.is_finite() && k7.is_finite() && err <= allowed {
                let factor = step_factor(allowed, err, 4.0, true);
                if !landing || factor < 1.0 {
                    self.h = (h * factor).min(self.opts.max_step);
                } else {
                    // keep the unclipped step for the next interval
                    self.h = self.h.max(h * factor).min(self.opts.max_step);
                }
                self.x = x_new;
                self.y = y_new;
                self.dy = k7;
                return Ok(self.node());
            }
            h *= step_factor(allowed, err, 4.0, false);
        }
    }

    /// Integrates to `x_end` exactly.
    pub fn advance_to(&mut self, x_end: f64) -> Result<Node> {
        Stepper::advance_to(self, x_end)
    }
}

impl<F: Fn(f64, f64) -> f64> Stepper for Dopri5<F> {
    fn node(&self) -> Node {
        Dopri5::node(self)
    }
    fn next_step(&self) -> f64 {
        self.h
    }
    fn limit_step(&mut self, h: f64) {
        Dopri5::limit_step(self, h)
    }
    fn step_toward(&mut self, x_stop: f64) -> Result<Node> {
        Dopri5::step_toward(self, x_stop)
    }
}

/// Three-stage Radau IIA collocation (order 5, L-stable, stiffly accurate).
struct RadauTableau {
    c: [f64; 3],
    a: [[f64; 3]; 3],
}

fn radau_tableau() -> RadauTableau {
    let s6 = 6f64.sqrt();
    RadauTableau {
        c: [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0],
        a: [
            [(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
            [(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
            [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
        ],
    }
}

/// Solves the 3×3 system `m·x = r` by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let l = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= l * m[col][k];
            }
            r[row] -= l * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = r[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Adaptive Radau IIA integrator for stiff scalar problems, with the local
/// error estimated by step doubling.
///
/// `jac(x, y)` returns `∂f/∂y`.
pub struct Radau5<F, J> {
    f: F,
    jac: J,
    opts: AdaptiveOptions,
    tableau: RadauTableau,
    x: f64,
    y: f64,
    dy: f64,
    h: f64,
    steps: usize,
    forced: usize,
}

impl<F, J> Radau5<F, J>
where
    F: Fn(f64, f64) -> f64,
    J: Fn(f64, f64) -> f64,
{
    pub fn new(f: F, jac: J, x0: f64, y0: f64, opts: AdaptiveOptions) -> Result<Self> {
        let dy = f(x0, y0);
        if !dy.is_finite() || !y0.is_finite() {
            return Err(Error::integration(x0, "non-finite initial state"));
        }
        Ok(Radau5 {
            f,
            jac,
            opts,
            tableau: radau_tableau(),
            x: x0,
            y: y0,
            dy,
            h: opts.initial_step,
            steps: 0,
            forced: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Steps accepted at the minimum step size without meeting the tolerance.
    pub fn forced_steps(&self) -> usize {
        self.forced
    }

    /// One collocation step of size `h` from `(x, y)` with `f(x, y) = f0`.
    fn collocate(&self, x: f64, y: f64, f0: f64, h: f64) -> Option<f64> {
        let RadauTableau { c, a } = &self.tableau;
        let mut z = [c[0] * h * f0, c[1] * h * f0, c[2] * h * f0];
        let threshold = 1e-3 * self.opts.tol * h + 4.0 * f64::EPSILON * y.abs();
        for _ in 0..12 {
            let fz: [f64; 3] = std::array::from_fn(|j| (self.f)(x + c[j] * h, y + z[j]));
            let jz: [f64; 3] = std::array::from_fn(|j| (self.jac)(x + c[j] * h, y + z[j]));
            let mut m = [[0.0; 3]; 3];
            let mut r = [0.0; 3];
            for i in 0..3 {
                r[i] = -(z[i] - h * (0..3).map(|j| a[i][j] * fz[j]).sum::<f64>());
                for j in 0..3 {
                    m[i][j] = f64::from(u8::from(i == j)) - h * a[i][j] * jz[j];
                }
            }
            let dz = solve3(m, r)?;
            let mut size: f64 = 0.0;
            for i in 0..3 {
                z[i] += dz[i];
                size = size.max(dz[i].abs());
            }
            if !size.is_finite() {
                return None;
            }
            if size <= threshold {
                return Some(y + z[2]);
            }
        }
        None
    }
}

impl<F, J> Stepper for Radau5<F, J>
where
    F: Fn(f64, f64) -> f64,
    J: Fn(f64, f64) -> f64,
{
    fn node(&self) -> Node {
        Node {
            x: self.x,
            y: self.y,
            dy: self.dy,
        }
    }

    fn next_step(&self) -> f64 {
        self.h
    }

    fn limit_step(&mut self, h: f64) {
        if h > 0.0 && h < self.h {
            self.h = h;
        }
    }

    fn step_toward(&mut self, x_stop: f64) -> Result<Node> {
        let (x, y, f0) = (self.x, self.y, self.dy);
        let mut h = self.h.min(self.opts.max_step);
        loop {
            self.steps += 1;
            if self.steps > self.opts.max_steps {
                return Err(Error::integration(x, "step budget exhausted"));
            }
            let remaining = x_stop - x;
            let landing = h >= remaining;
            if landing {
                h = remaining;
            }
            if !landing {
                h = h.max(MIN_STEP_ULPS * f64::EPSILON * x.abs().max(1.0));
            }
            if !(h > 1e-15 * x.abs().max(1.0)) && !landing {
                return Err(Error::integration(x, "step size collapsed"));
            }
            let x_new = if landing { x_stop } else { x + h };
            let attempt = (|| {
                let full = self.collocate(x, y, f0, h)?;
                let half = 0.5 * h;
                let y_mid = self.collocate(x, y, f0, half)?;
                let f_mid = (self.f)(x + half, y_mid);
                if !f_mid.is_finite() {
                    return None;
                }
                let y_new = self.collocate(x + half, y_mid, f_mid, x_new - (x + half))?;
                let k = (self.f)(x_new, y_new);
                k.is_finite().then_some((full, y_new, k))
            })();
            let allowed = self.opts.tol * h + ROUNDING_FLOOR * y.abs();
            // below this the abscissae themselves are too coarse for the
            // error estimate to mean anything
            let floor_step = h <= MIN_STEP_ULPS * f64::EPSILON * x.abs().max(1.0);
            match attempt {
                Some((full, y_new, k)) => {
                    let err = (y_new - full).abs() / 31.0;
                    if floor_step && err > allowed {
                        self.forced += 1;
                    }
                    if err <= allowed || floor_step {
                        let factor = step_factor(allowed, err, 5.0, true);
                        if !landing || factor < 1.0 {
                            self.h = (h * factor).min(self.opts.max_step);
                        } else {
                            self.h = self.h.max(h * factor).min(self.opts.max_step);
                        }
                        self.x = x_new;
                        self.y = y_new;
                        self.dy = k;
                        return Ok(self.node());
                    }
                    h *= step_factor(allowed, err, 5.0, false);
                }
                None if floor_step => {
                    return Err(Error::integration(x, "step size collapsed"));
                }
                None => h *= 0.25,
            }
        }
    }
}

/// Samples a running integrator at each point of `outputs` (strictly
/// increasing, all `>= x0`).
pub fn sample_outputs<S: Stepper>(solver: &mut S, outputs: &[f64]) -> Result<Vec<Node>> {
    let mut nodes = Vec::with_capacity(outputs.len());
    for &x in outputs {
        let node = if x <= solver.node().x {
            solver.node()
        } else {
            solver.advance_to(x)?
        };
        nodes.push(node);
    }
    Ok(nodes)
}

/// Integrates `y' = f(x, y)` from `(x0, y0)` and returns the solution at each
/// point of `outputs` (strictly increasing, all `>= x0`).
pub fn integrate_to_outputs<F: Fn(f64, f64) -> f64>(
    f: F,
    x0: f64,
    y0: f64,
    outputs: &[f64],
    opts: AdaptiveOptions,
) -> Result<Vec<Node>> {
    let mut solver = Dopri5::new(f, x0, y0, opts)?;
    sample_outputs(&mut solver, outputs)
}

/// Stiff counterpart of [`integrate_to_outputs`].
pub fn integrate_stiff_to_outputs<F, J>(
    f: F,
    jac: J,
    x0: f64,
    y0: f64,
    outputs: &[f64],
    opts: AdaptiveOptions,
) -> Result<Vec<Node>>
where
    F: Fn(f64, f64) -> f64,
    J: Fn(f64, f64) -> f64,
{
    let mut solver = Radau5::new(f, jac, x0, y0, opts)?;
    sample_outputs(&mut solver, outputs)
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F: Fn(f64, f64) -> f64>(f: &F, x: f64, y: f64, h: f64) -> f64 {
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(x + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}
