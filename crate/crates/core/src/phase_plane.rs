//! The phase-plane trajectory `Υ(Θ)` through the degenerate origin.
//!
//! All solvers work in log–log coordinates `u = ln Θ`, `y = ln Υ`, where
//! both asymptotic ends are straight lines and the field reads
//!
//! ```text
//! dy/du = k·e^{u−y} + b·m·e^{(m+β)u − ((1+p)/p)·y}
//! ```
//!
//! The production solve integrates `ω = ln W` with `W = Υ^{(p+1)/p}`, starting
//! from the analytic origin expansion at a seed radius `Θ₀`. The regularized
//! families `Υ(0) = ε` (upper) and `Υ(ε) = 0` (lower) squeeze the singular
//! trajectory from both sides and serve as an independent check.

use crate::error::{Error, Result};
use crate::integrate::{integrate_stiff_to_outputs, AdaptiveOptions, Dopri5, Node, Stepper};
use crate::interp::{hermite, locate};
use crate::model::{self, classify_regime, ModelParams, OriginSeries, SpeedSign};

/// `ln(1e-300)`: floor applied to `ln Υ` inside the field evaluation.
const LN_UPSILON_FLOOR: f64 = -690.7755278982137;
/// Rounding noise in a field-evaluated log slope above which node slopes are
/// recomputed from the node values.
const SLOPE_NOISE: f64 = 1e-9;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_POINTS_PER_DECADE: usize = 64;

/// The phase-plane field in log–log coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogField {
    k: f64,
    ln_bm: f64,
    theta_power: f64,
    upsilon_power: f64,
}

impl LogField {
    pub(crate) fn new(params: &ModelParams) -> Self {
        LogField {
            k: params.k(),
            ln_bm: (params.b() * params.m()).ln(),
            theta_power: params.m() + params.beta(),
            upsilon_power: (1.0 + params.p()) / params.p(),
        }
    }

    /// `d ln Υ / d ln Θ`.
    pub(crate) fn slope(&self, u: f64, y: f64) -> f64 {
        let y = y.max(LN_UPSILON_FLOOR);
        let absorption = (self.ln_bm + self.theta_power * u - self.upsilon_power * y).exp();
        if self.k == 0.0 {
            absorption
        } else {
            self.k * (u - y).exp() + absorption
        }
    }

    /// `∂(d ln Υ/d ln Θ)/∂ ln Θ`.
    pub(crate) fn slope_du(&self, u: f64, y: f64) -> f64 {
        let y = y.max(LN_UPSILON_FLOOR);
        let absorption = (self.ln_bm + self.theta_power * u - self.upsilon_power * y).exp();
        let drift = if self.k == 0.0 { 0.0 } else { self.k * (u - y).exp() };
        drift + self.theta_power * absorption
    }

    /// `∂(d ln Υ/d ln Θ)/∂ ln Υ`.
    pub(crate) fn slope_dy(&self, u: f64, y: f64) -> f64 {
        if y < LN_UPSILON_FLOOR {
            return 0.0;
        }
        let absorption = (self.ln_bm + self.theta_power * u - self.upsilon_power * y).exp();
        let drift = if self.k == 0.0 { 0.0 } else { self.k * (u - y).exp() };
        -drift - self.upsilon_power * absorption
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryKind {
    /// `Υ(0) = ε`.
    RegularizedUpper(f64),
    /// `Υ(ε) = 0`.
    RegularizedLower(f64),
    /// The trajectory through the origin.
    Singular,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub points_per_decade: usize,
    /// Overrides the automatic seed radius.
    pub seed_radius: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            points_per_decade: DEFAULT_POINTS_PER_DECADE,
            seed_radius: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Sampled `Υ(Θ)`, immutable after construction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: ModelParams,
    ln_thetas: Vec<f64>,
    ln_upsilons: Vec<f64>,
    /// `d ln Υ / d ln Θ` at each node.
    slopes: Vec<f64>,
    seed: Option<OriginSeries>,
    seed_end: f64,
    kind: TrajectoryKind,
    tol: f64,
}

impl Trajectory {
    pub(crate) fn from_nodes(
        params: ModelParams,
        nodes: Vec<Node>,
        seed: Option<OriginSeries>,
        seed_end: f64,
        kind: TrajectoryKind,
        tol: f64,
    ) -> Self {
        let mut ln_thetas = Vec::with_capacity(nodes.len());
        let mut ln_upsilons = Vec::with_capacity(nodes.len());
        let mut slopes = Vec::with_capacity(nodes.len());
        for n in nodes {
            if let Some(&last) = ln_thetas.last() {
                if n.x <= last {
                    continue;
                }
            }
            ln_thetas.push(n.x);
            ln_upsilons.push(n.y);
            slopes.push(n.dy);
        }
        repair_cancelled_slopes(&params, &ln_thetas, &ln_upsilons, &mut slopes);
        Trajectory {
            params,
            ln_thetas,
            ln_upsilons,
            slopes,
            seed,
            seed_end,
            kind,
            tol,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    /// Θ₀: below it the analytic origin expansion is used (0 for the families).
    pub fn seed_end(&self) -> f64 {
        self.seed_end
    }

    pub fn seed(&self) -> Option<&OriginSeries> {
        self.seed.as_ref()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.ln_thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_thetas.is_empty()
    }

    pub fn theta_min(&self) -> f64 {
        self.ln_thetas[0].exp()
    }

    pub fn theta_max(&self) -> f64 {
        self.ln_thetas[self.len() - 1].exp()
    }

    pub fn ln_thetas(&self) -> &[f64] {
        &self.ln_thetas
    }

    pub fn ln_upsilons(&self) -> &[f64] {
        &self.ln_upsilons
    }

    pub fn log_slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.ln_thetas.iter().map(|u| u.exp()).collect()
    }

    pub fn upsilons(&self) -> Vec<f64> {
        self.ln_upsilons.iter().map(|y| y.exp()).collect()
    }

    /// `dΥ/dΘ` at each node, recovered from the stored log slope.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.slopes[i] * (self.ln_upsilons[i] - self.ln_thetas[i]).exp())
            .collect()
    }

    /// `dv/dt = 1/f(Θ, Υ)` along the inverse representation `Θ = v(Υ)`.
    pub fn inverse_derivatives(&self) -> Vec<f64> {
        self.derivatives().iter().map(|d| 1.0 / d).collect()
    }

    /// `(ln Υ, d ln Υ/d ln Θ)` at `u = ln Θ`.
    pub fn eval_log(&self, u: f64) -> Result<(f64, f64)> {
        let (lo, hi) = (self.ln_thetas[0], self.ln_thetas[self.len() - 1]);
        if u > hi {
            return Err(Error::RangeExceeded {
                value: u.exp(),
                lo: self.seed_end,
                hi: hi.exp(),
            });
        }
        if u < lo {
            return match &self.seed {
                Some(seed) => {
                    let theta = u.exp();
                    let leading = &seed.leading;
                    let corr = seed.correction(theta);
                    let y = leading.constant.ln() + leading.exponent * u + corr.ln_1p();
                    let slope = leading.exponent + seed.eta * corr / (1.0 + corr);
                    Ok((y, slope))
                }
                None => Err(Error::RangeExceeded {
                    value: u.exp(),
                    lo: lo.exp(),
                    hi: hi.exp(),
                }),
            };
        }
        if self.len() == 1 {
            return Ok((self.ln_upsilons[0], self.slopes[0]));
        }
        let i = locate(&self.ln_thetas, u);
        Ok(hermite(
            self.ln_thetas[i],
            self.ln_thetas[i + 1],
            self.ln_upsilons[i],
            self.ln_upsilons[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            u,
        ))
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        eval_trajectory(self, theta)
    }
}

/// Near the critical curve the two terms of the field are each of size
/// `|k|Θ/Υ` and cancel, so the evaluated slope carries rounding noise of that
/// size times ε. There the slope is replaced by a second-order difference of
/// the node values, which stay accurate.
fn repair_cancelled_slopes(params: &ModelParams, us: &[f64], ys: &[f64], slopes: &mut [f64]) {
    let n = us.len();
    if n < 3 || params.k() == 0.0 {
        return;
    }
    let k = params.k().abs();
    let noisy = |i: usize| 8.0 * f64::EPSILON * k * (us[i] - ys[i]).exp() > SLOPE_NOISE;
    let three_point = |i0: usize, at: usize| {
        let (x0, x1, x2) = (us[i0], us[i0 + 1], us[i0 + 2]);
        let (y0, y1, y2) = (ys[i0], ys[i0 + 1], ys[i0 + 2]);
        let x = us[at];
        // derivative of the quadratic through the three points
        y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    for i in 0..n {
        if noisy(i) {
            let i0 = i.saturating_sub(1).min(n - 3);
            slopes[i] = three_point(i0, i);
        }
    }
}

/// `Υ(Θ)`: the analytic seed below Θ₀, monotone log–log Hermite
/// interpolation between nodes, exact at nodes.
pub fn eval_trajectory(traj: &Trajectory, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::RangeExceeded {
            value: theta,
            lo: traj.seed_end,
            hi: traj.theta_max(),
        });
    }
    let u = theta.ln();
    // the last node was landed on exactly; ln/exp may perturb it by one ulp
    let last = traj.ln_thetas[traj.len() - 1];
    let u = if u > last && u - last <= 4.0 * f64::EPSILON * last.abs().max(1.0) {
        last
    } else {
        u
    };
    Ok(traj.eval_log(u)?.0.exp())
}

/// Uniform grid in `ln Θ` from `u0` to `u1` inclusive.
pub(crate) fn log_grid(u0: f64, u1: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (u1 - u0) / std::f64::consts::LN_10;
    let n = ((decades * points_per_decade as f64).ceil() as usize).max(1);
    let h = (u1 - u0) / n as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| u0 + i as f64 * h).collect();
    grid.push(u1);
    grid
}

/// Origin law used for seeding, with the seed radius Θ₀.
///
/// Θ₀ is chosen so the neglected second-order term of the origin expansion
/// is at the level of `tol`.
pub fn seed_radius(params: &ModelParams, theta_max: f64, tol: f64) -> (OriginSeries, f64) {
    let series = model::origin_series(params);
    let radius = series
        .radius_for(tol.sqrt())
        .unwrap_or(1e-6 * theta_max)
        .min(1e-2 * theta_max)
        .max(1e-250);
    (series, radius)
}

fn check_inputs(theta_max: f64, tol: f64) -> Result<()> {
    use crate::error::Constraint;
    if !(theta_max > 0.0 && theta_max.is_finite()) {
        return Err(Error::domain_with(
            Constraint::BadInput,
            format!("theta_max = {theta_max}"),
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::domain_with(Constraint::BadInput, format!("tol = {tol}")));
    }
    Ok(())
}

/// The singular trajectory through the origin on `(0, Θ_max]`.
pub fn solve_trajectory(params: &ModelParams, theta_max: f64, tol: f64) -> Result<Trajectory> {
    solve_trajectory_with(params, theta_max, &SolveOptions::with_tol(tol))
}

pub fn solve_trajectory_with(
    params: &ModelParams,
    theta_max: f64,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    check_inputs(theta_max, opts.tol)?;
    let (series, auto_radius) = seed_radius(params, theta_max, opts.tol);
    let theta0 = opts.seed_radius.unwrap_or(auto_radius).min(theta_max);
    let upsilon0 = series.eval(theta0);
    if !(upsilon0 > 0.0) {
        return Err(Error::integration(theta0, "origin expansion is not positive at the seed radius"));
    }
    let field = LogField::new(params);
    let r = (1.0 + params.p()) / params.p();
    let grid = log_grid(theta0.ln(), theta_max.ln(), opts.points_per_decade);
    // ω = ln W = r·ln Υ
    let nodes = integrate_stiff_to_outputs(
        |u, omega| r * field.slope(u, omega / r),
        |u, omega| field.slope_dy(u, omega / r),
        grid[0],
        r * upsilon0.ln(),
        &grid,
        AdaptiveOptions::new(opts.tol * r),
    )?;
    let nodes = nodes
        .into_iter()
        .map(|n| Node {
            x: n.x,
            y: n.y / r,
            dy: n.dy / r,
        })
        .collect();
    Ok(Trajectory::from_nodes(
        *params,
        nodes,
        Some(series),
        theta0,
        TrajectoryKind::Singular,
        opts.tol,
    ))
}

/// Log slope above which a curve is traced with `ln Υ` as the parameter.
const STEEP: f64 = 16.0;
/// Log slope below which tracing returns to `ln Θ` as the parameter.
const SHALLOW: f64 = 8.0;

/// Traces the solution curve from `(u0, y0)` up to the last grid point,
/// landing on every grid point beyond `u0` while the curve is shallow.
///
/// Where the curve is nearly vertical in the log plane it is traced as
/// `ln Θ` against `±ln Υ`; those stretches are stored at the solver's own
/// steps.
fn trace(field: &LogField, u0: f64, y0: f64, grid: &[f64], tol: f64) -> Result<Vec<Node>> {
    use crate::integrate::Radau5;
    let u_end = *grid.last().expect("non-empty grid");
    let mut nodes = vec![Node {
        x: u0,
        y: y0,
        dy: field.slope(u0, y0),
    }];
    let (mut u, mut y) = (u0, y0);
    let mut next_out = grid.partition_point(|&g| g <= u0);
    let mut force_theta = false;
    while u < u_end {
        let g = field.slope(u, y);
        if u_end - u <= 1e-12 * u.abs().max(1.0) {
            nodes.push(Node { x: u_end, y, dy: g });
            break;
        }
        if g.abs() <= STEEP || force_theta {
            let mut solver = Radau5::new(
                |u, y| field.slope(u, y),
                |u, y| field.slope_dy(u, y),
                u,
                y,
                AdaptiveOptions::new(tol),
            )?;
            while next_out < grid.len() {
                let n = solver.step_toward(grid[next_out])?;
                if n.x >= grid[next_out] {
                    next_out += 1;
                    nodes.push(n);
                    force_theta = false;
                } else if n.dy.abs() > STEEP && !force_theta {
                    nodes.push(n);
                    break;
                }
            }
            let here = solver.node();
            (u, y) = (here.x, here.y);
        } else {
            let sigma = g.signum();
            let mut solver = Radau5::new(
                |s, u| 1.0 / (sigma * field.slope(u, sigma * s)),
                |s, u| {
                    let g = field.slope(u, sigma * s);
                    -sigma * field.slope_du(u, sigma * s) / (g * g)
                },
                sigma * y,
                u,
                AdaptiveOptions::new(tol),
            )?;
            loop {
                let here = solver.node();
                // ds = |g|·du; near the end of the grid finish in ln Θ,
                // which lands on it exactly
                let g = field.slope(here.y, sigma * here.x);
                if 2.0 * solver.next_step() >= (u_end - here.y) * g.abs() {
                    force_theta = true;
                    break;
                }
                let n = solver.step_toward(f64::INFINITY)?;
                let g = field.slope(n.y, sigma * n.x);
                if !(g * sigma >= SHALLOW) {
                    // the step ran into the flat part (possibly past a
                    // turning point): redo it in ln Θ from the last node
                    force_theta = true;
                    break;
                }
                nodes.push(Node {
                    x: n.y,
                    y: sigma * n.x,
                    dy: g,
                });
            }
            let last = nodes[nodes.len() - 1];
            (u, y) = (last.x, last.y);
            next_out = grid.partition_point(|&g| g <= u);
        }
    }
    Ok(nodes)
}

/// Member of the upper family `Υ(0) = ε`, sampled on `grid` (values of `ln Θ`).
pub fn solve_regularized_upper_on(
    params: &ModelParams,
    eps: f64,
    grid: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    use crate::error::Constraint;
    if !(eps > 0.0) {
        return Err(Error::domain_with(Constraint::BadInput, format!("eps = {eps}")));
    }
    let (k, b, m, p) = (params.k(), params.b(), params.m(), params.p());
    let a1 = params.theta_exponent() + 1.0;
    // Υ ≈ ε + kΘ + bm ε^{−1/p} Θ^{a+1}/(a+1) for Θ small; start where both
    // corrections are below 1e-9 relative to ε
    let ln_absorption_coef = (b * m).ln() - eps.ln() / p - a1.ln();
    let mut ln_start = ((1e-9f64).ln() + eps.ln() - ln_absorption_coef) / a1;
    if k != 0.0 {
        ln_start = ln_start.min((1e-9 * eps / k.abs()).ln());
    }
    if let Some(&first) = grid.first() {
        ln_start = ln_start.min(first - 1.0);
    }
    let theta_s = ln_start.exp();
    let upsilon_s = eps + k * theta_s + (ln_absorption_coef + a1 * ln_start).exp();
    let field = LogField::new(params);
    let nodes = trace(&field, ln_start, upsilon_s.ln(), grid, tol)?;
    Ok(Trajectory::from_nodes(
        *params,
        nodes,
        None,
        0.0,
        TrajectoryKind::RegularizedUpper(eps),
        tol,
    ))
}

/// Member of the upper family `Υ(0) = ε` on `[0, Θ_max]`.
pub fn solve_regularized_upper(
    params: &ModelParams,
    eps: f64,
    theta_max: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_inputs(theta_max, tol)?;
    let lo = (theta_max * 1e-12).ln();
    solve_regularized_upper_on(params, eps, &log_grid(lo, theta_max.ln(), DEFAULT_POINTS_PER_DECADE), tol)
}

/// Member of the lower family `Υ(ε) = 0`, sampled on the points of `grid`
/// beyond the start-up region.
///
/// Near `Θ = ε` the trajectory leaves the axis vertically, so the first
/// stretch is integrated for the inverse function `Θ = v(Υ)`, in the form
/// `ln(Θ − ε)` against `ln Υ`, which is regular there.
pub fn solve_regularized_lower_on(
    params: &ModelParams,
    eps: f64,
    grid: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    use crate::error::Constraint;
    if !(eps > 0.0) {
        return Err(Error::domain_with(Constraint::BadInput, format!("eps = {eps}")));
    }
    let (k, b, m, p) = (params.k(), params.b(), params.m(), params.p());
    let a = params.theta_exponent();
    let r = (1.0 + p) / p;
    // dominant balance at the zero: Υ^{(1+p)/p} ≈ bm(1+p)/p · ε^a · (Θ − ε)
    let ln_coef = (b * m * r).ln() + a * eps.ln();
    let small = 1e-10f64.ln();
    let mut ln_ups = (small + eps.ln() + ln_coef) / r;
    if k != 0.0 {
        ln_ups = ln_ups.min(p * (small + (b * m).ln() + a * eps.ln() - k.abs().ln()));
    }
    ln_ups = ln_ups.max(LN_UPSILON_FLOOR + 10.0);
    // w = ln(Θ − ε) keeps the departure from the axis resolved
    let w_s = r * ln_ups - ln_coef;
    let field = LogField::new(params);
    let ln_eps = eps.ln();
    let ln_theta = |w: f64| ln_eps + (w - ln_eps).exp().ln_1p();
    let dw_dy = |y: f64, w: f64| (1.0 + (ln_eps - w).exp()) / field.slope(ln_theta(w), y);
    let mut solver = Dopri5::new(dw_dy, ln_ups, w_s, AdaptiveOptions::new(tol))?;
    let to_node = |n: Node| {
        let u = ln_theta(n.y);
        Node {
            x: u,
            y: n.x,
            dy: field.slope(u, n.x),
        }
    };
    let mut nodes = vec![to_node(solver.node())];
    // once Θ − ε is resolved in ln Θ the generic tracer takes over
    let w_switch = ln_eps + 1e-3f64.ln();
    loop {
        let here = solver.node();
        if here.y >= w_switch || to_node(here).dy <= STEEP {
            break;
        }
        let room = (w_switch - here.y) / here.dy.max(1e-300);
        solver.limit_step(2.0 * room + 1e-6);
        let next = solver.step_toward(f64::INFINITY)?;
        if next.y < here.y {
            return Err(Error::integration(ln_theta(next.y).exp(), "inverse branch turned back"));
        }
        nodes.push(to_node(next));
    }
    let here = to_node(solver.node());
    let mut tail = trace(&field, here.x, here.y, grid, tol)?;
    tail.remove(0);
    nodes.extend(tail);
    Ok(Trajectory::from_nodes(
        *params,
        nodes,
        None,
        0.0,
        TrajectoryKind::RegularizedLower(eps),
        tol,
    ))
}

/// Member of the lower family `Υ(ε) = 0` on `[ε, Θ_max]`.
pub fn solve_regularized_lower(
    params: &ModelParams,
    eps: f64,
    theta_max: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_inputs(theta_max, tol)?;
    if theta_max <= eps {
        return Err(Error::RangeExceeded {
            value: theta_max,
            lo: eps,
            hi: f64::INFINITY,
        });
    }
    let grid = log_grid(eps.ln(), theta_max.ln(), DEFAULT_POINTS_PER_DECADE);
    solve_regularized_lower_on(params, eps, &grid, tol)
}

/// One rung of the ε ladder: members of both families at the same ε factor.
#[derive(Debug, Clone)]
pub struct BracketPair {
    /// Dimensionless ladder factor; the upper member starts at `eps·Υ(Θ₀)`,
    /// the lower member at `Θ = eps·Θ₀`.
    pub eps: f64,
    pub lower: Trajectory,
    pub upper: Trajectory,
}

#[derive(Debug, Clone, Copy)]
pub struct BracketOptions {
    pub start_factor: f64,
    pub ratio: f64,
    pub min_levels: usize,
    pub max_levels: usize,
    /// Target for the relative sup-gap between the two families; the
    /// trajectory's own tolerance when `None`.
    pub gap_tol: Option<f64>,
}

impl Default for BracketOptions {
    fn default() -> Self {
        BracketOptions {
            start_factor: 1e-2,
            ratio: 0.1,
            min_levels: 3,
            max_levels: 12,
            gap_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketLevel {
    pub eps: f64,
    /// `max (upper − lower)/singular` over the common nodes in `[Θ₀, Θ_max]`.
    pub gap: f64,
    /// Largest relative amount by which the singular trajectory escapes the pair.
    pub containment_violation: f64,
}

#[derive(Debug, Clone)]
pub struct BracketReport {
    pub levels: Vec<BracketLevel>,
    pub pairs: Vec<BracketPair>,
    pub converged: bool,
}

impl BracketReport {
    pub fn final_gap(&self) -> f64 {
        self.levels.last().map_or(f64::INFINITY, |l| l.gap)
    }

    pub fn final_eps(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.eps)
    }

    /// Largest relative violation of "upper non-increasing, lower
    /// non-decreasing as ε decreases" over consecutive rungs.
    pub fn family_monotonicity_violation(&self, singular: &Trajectory) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.pairs.windows(2) {
            for (i, &u) in singular.ln_thetas.iter().enumerate() {
                if u.exp() < singular.seed_end {
                    continue;
                }
                let scale = singular.ln_upsilons[i];
                if let (Ok(a), Ok(b)) = (w[0].upper.eval_log(u), w[1].upper.eval_log(u)) {
                    worst = worst.max((b.0.exp() - a.0.exp()) / scale.exp());
                }
                if let (Ok(a), Ok(b)) = (w[0].lower.eval_log(u), w[1].lower.eval_log(u)) {
                    worst = worst.max((a.0.exp() - b.0.exp()) / scale.exp());
                }
            }
        }
        worst
    }

    /// Midpoint of the final pair at the singular trajectory's nodes.
    pub fn max_midpoint_deviation(&self, singular: &Trajectory) -> f64 {
        let Some(pair) = self.pairs.last() else {
            return f64::INFINITY;
        };
        let mut worst: f64 = 0.0;
        for (i, &u) in singular.ln_thetas.iter().enumerate() {
            if let (Ok(lo), Ok(hi)) = (pair.lower.eval_log(u), pair.upper.eval_log(u)) {
                let mid = 0.5 * (lo.0.exp() + hi.0.exp());
                let s = singular.ln_upsilons[i].exp();
                worst = worst.max(((mid - s) / s).abs());
            }
        }
        worst
    }
}

/// Builds one rung of the ladder on the singular trajectory's grid.
pub fn bracket_pair(singular: &Trajectory, eps: f64) -> Result<BracketPair> {
    let params = singular.params;
    let theta0 = singular.seed_end;
    let scale = singular.eval(theta0)?;
    let grid = &singular.ln_thetas;
    let upper = solve_regularized_upper_on(&params, eps * scale, grid, singular.tol)?;
    let lower = solve_regularized_lower_on(&params, eps * theta0, grid, singular.tol)?;
    Ok(BracketPair { eps, lower, upper })
}

fn measure_level(singular: &Trajectory, pair: &BracketPair) -> BracketLevel {
    let mut gap: f64 = 0.0;
    let mut violation: f64 = 0.0;
    for (i, &u) in singular.ln_thetas.iter().enumerate() {
        let (Ok(lo), Ok(hi)) = (pair.lower.eval_log(u), pair.upper.eval_log(u)) else {
            continue;
        };
        let s = singular.ln_upsilons[i].exp();
        let (lo, hi) = (lo.0.exp(), hi.0.exp());
        gap = gap.max((hi - lo) / s);
        violation = violation.max((lo - s) / s).max((s - hi) / s);
    }
    BracketLevel {
        eps: pair.eps,
        gap,
        containment_violation: violation,
    }
}

/// Squeezes the singular trajectory between the two regularized families
/// with ε decreasing geometrically until the relative sup-gap is below the
/// gap target.
pub fn bracket_trajectory(singular: &Trajectory, opts: &BracketOptions) -> Result<BracketReport> {
    let noise = 10.0 * singular.tol;
    let gap_tol = opts.gap_tol.unwrap_or(singular.tol);
    let mut levels = Vec::new();
    let mut pairs = Vec::new();
    let mut eps = opts.start_factor;
    let mut stalled = 0;
    for level in 0..opts.max_levels {
        let pair = bracket_pair(singular, eps)?;
        let measured = measure_level(singular, &pair);
        if let Some(prev) = levels.last().map(|l: &BracketLevel| l.gap) {
            if measured.gap > gap_tol && measured.gap >= prev * 0.999 - noise {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        levels.push(measured);
        pairs.push(pair);
        if measured.gap < gap_tol && level + 1 >= opts.min_levels {
            return Ok(BracketReport {
                levels,
                pairs,
                converged: true,
            });
        }
        if stalled >= 2 {
            return Err(Error::BracketStall {
                gap: measured.gap,
                target: gap_tol,
            });
        }
        eps *= opts.ratio;
    }
    let gap = levels.last().map_or(f64::INFINITY, |l| l.gap);
    Err(Error::BracketStall {
        gap,
        target: gap_tol,
    })
}

/// Whether the trajectory is expected to be increasing everywhere (`k ≥ 0`).
pub fn expect_increasing(params: &ModelParams) -> bool {
    classify_regime(params).speed_sign != SpeedSign::Negative
}
