//! Independent checks on a computed wave: ODE residual, the energy
//! functional, power-law fits at both ends, a fixed-step reference
//! integrator, and the assembled report.

use std::fmt;

use crate::error::{Constraint, Error, Result};
use crate::integrate::{rk4_step, Node};
use crate::model::{
    self, classify_regime, lemma3_asymptote, theorem1_asymptote, AsymptoteSpec, End, ModelParams,
    Regime, SpeedSign,
};
use crate::phase_plane::{
    bracket_trajectory, solve_trajectory, BracketOptions, Trajectory, TrajectoryKind,
};
use crate::profile::{
    default_z_grid, flux_at_phi, geometric_grid, profile_flux, reconstruct_with, Profile,
    TravelMap,
};

/// Relative band around 1 for a power-law ratio at the fit end.
pub const ASYMPTOTE_BAND: f64 = 0.02;
/// Largest normalized ODE residual on the base grid.
pub const RESIDUAL_LIMIT: f64 = 1e-3;
/// Required drop of the residual when the grid spacing is halved.
pub const RESIDUAL_DROP: f64 = 3.0;
/// Bound on the final relative gap between the two regularized families.
pub const GAP_LIMIT: f64 = 1e-4;
/// Agreement required between the adaptive solve and the reference.
pub const ORACLE_LIMIT: f64 = 1e-6;
/// Absolute part of the per-step allowance in the energy check.
pub const ENERGY_ABS_TOL: f64 = 1e-8;
/// Relative allowance on the two energy terms, which cancel at large z.
const ENERGY_REL_TOL: f64 = 1e-9;
/// Changes in the fit deviation below this are treated as flat.
const FIT_NOISE: f64 = 1e-8;
/// Target for the stencil's truncation error on the end power laws, which
/// sets the width of the residual window.
const RESIDUAL_TRUNCATION: f64 = 1e-4;
/// Containment is checked on the rungs down to this ε factor.
const CONTAINMENT_EPS: f64 = 1e-4;
/// Samples per fit decade.
pub const FIT_SAMPLES: usize = 8;
const ORACLE_MAX_NODES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
    Invalid,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Inconclusive => "inconclusive",
            Status::Fail => "fail",
            Status::Invalid => "invalid",
        }
    }

    /// The worse of two outcomes.
    pub fn and(self, other: Status) -> Status {
        fn rank(s: Status) -> u8 {
            match s {
                Status::Pass => 0,
                Status::Inconclusive => 1,
                Status::Fail => 2,
                Status::Invalid => 3,
            }
        }
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }

    fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// C-style `%.17e`: 18 significant digits and a signed two-digit exponent.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.17e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub max_rel: f64,
    pub median_rel: f64,
    /// Interior points that entered the statistics.
    pub points: usize,
}

/// Centred first derivative on a non-uniform grid (second order).
fn centred_derivative(x: &[f64], f: &[f64], i: usize) -> f64 {
    let h0 = x[i] - x[i - 1];
    let h1 = x[i + 1] - x[i];
    (h0 * h0 * f[i + 1] - h1 * h1 * f[i - 1] + (h1 * h1 - h0 * h0) * f[i])
        / (h0 * h1 * (h0 + h1))
}

/// Residual of `(|(φ^m)'|^{p−1}(φ^m)')' − kφ' − bφ^β = 0` at the interior
/// samples of `profile`, with `flux[i] = (φ^m)'(zs[i])`, normalized by `bφ^β`.
pub fn ode_residual(params: &ModelParams, profile: &Profile, flux: &[f64]) -> Result<ResidualStats> {
    let zs = profile.zs();
    let phis = profile.phis();
    if flux.len() != zs.len() {
        return Err(Error::domain_with(
            Constraint::BadInput,
            format!("{} flux samples for {} grid points", flux.len(), zs.len()),
        ));
    }
    if zs.len() < 7 {
        return Err(Error::domain_with(
            Constraint::BadInput,
            "need at least 5 interior points",
        ));
    }
    if phis.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain_with(
            Constraint::BadInput,
            "profile is not monotone",
        ));
    }
    let p = params.p();
    let big_f: Vec<f64> = flux.iter().map(|g| g.abs().powf(p - 1.0) * g).collect();
    let mut res = Vec::with_capacity(zs.len() - 2);
    for i in 1..zs.len() - 1 {
        let d_f = centred_derivative(zs, &big_f, i);
        let d_phi = centred_derivative(zs, phis, i);
        let absorption = params.b() * phis[i].powf(params.beta());
        let defect = (d_f - params.k() * d_phi - absorption).abs();
        res.push(if absorption > 0.0 {
            defect / absorption
        } else if defect == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    let max_rel = res.iter().copied().fold(0.0, f64::max);
    res.sort_by(f64::total_cmp);
    let n = res.len();
    let median_rel = if n % 2 == 1 {
        res[n / 2]
    } else {
        0.5 * (res[n / 2 - 1] + res[n / 2])
    };
    Ok(ResidualStats {
        max_rel,
        median_rel,
        points: n,
    })
}

/// `Φ = p/(p+1)·|(φ^m)'|^{p+1} − bm/(m+β)·φ^{m+β}`.
pub fn energy_phi(params: &ModelParams, phi: f64, flux: f64) -> f64 {
    let (flux_term, absorption_term) = energy_terms(params, phi, flux);
    flux_term - absorption_term
}

fn energy_terms(params: &ModelParams, phi: f64, flux: f64) -> (f64, f64) {
    let (m, p, beta, b) = (params.m(), params.p(), params.beta(), params.b());
    (
        p / (p + 1.0) * flux.abs().powf(p + 1.0),
        b * m / (m + beta) * phi.powf(m + beta),
    )
}

/// `Φ(z)` along a reconstructed profile.
pub fn energy_at(traj: &Trajectory, profile: &Profile, z: f64) -> Result<f64> {
    let phi = profile.phi_at(z)?;
    let flux = profile_flux(traj, profile, z)?;
    Ok(energy_phi(traj.params(), phi, flux))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub monotone: bool,
    /// Largest step-to-step decrease of Φ as a multiple of its allowance.
    pub worst_violation: f64,
}

/// Checks that Φ is non-decreasing over consecutive samples.
///
/// Each step is allowed `1e-8` plus `1e-9` of the two energy terms, which
/// are individually large and nearly cancel far from the front.
pub fn energy_monotonicity(params: &ModelParams, phis: &[f64], fluxes: &[f64]) -> EnergyCheck {
    let terms: Vec<(f64, f64)> = phis
        .iter()
        .zip(fluxes)
        .map(|(&phi, &g)| energy_terms(params, phi, g))
        .collect();
    let mut worst: f64 = 0.0;
    for w in terms.windows(2) {
        let (a, b) = (w[0].0 - w[0].1, w[1].0 - w[1].1);
        let scale = w[0].0 + w[0].1 + w[1].0 + w[1].1;
        let allowance = ENERGY_ABS_TOL + ENERGY_REL_TOL * scale;
        worst = worst.max((a - b) / allowance);
    }
    EnergyCheck {
        monotone: worst <= 1.0,
        worst_violation: worst,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoteFit {
    pub spec: AsymptoteSpec,
    /// Geometric mean of `Y/X^q` over the samples.
    pub measured_constant: f64,
    /// `max |Y/(A·X^q) − 1|` over the samples.
    pub deviation: f64,
    /// `|Y/(A·X^q) − 1|` at the sample closest to the spec's end.
    pub end_deviation: f64,
    /// Whether the deviation shrinks toward the end across the samples.
    pub monotone: bool,
    pub status: Status,
}

/// `n` abscissae spanning the decade at `end` of `[lo, hi]`.
pub fn fit_window(lo: f64, hi: f64, end: End, n: usize) -> Vec<f64> {
    match end {
        End::Origin => geometric_grid(lo, (10.0 * lo).min(hi), n),
        End::Infinity => geometric_grid((0.1 * hi).max(lo), hi, n),
    }
}

/// Ratio test of samples `(X, Y)` against `A·X^q`.
///
/// Passes when the end deviation is within 2% and the deviation decreases
/// toward the end; one of the two alone is inconclusive, neither is a fail.
pub fn fit_asymptote(samples: &[(f64, f64)], spec: &AsymptoteSpec) -> Result<AsymptoteFit> {
    if samples.len() < 3 {
        return Err(Error::domain_with(
            Constraint::BadInput,
            "need at least 3 samples",
        ));
    }
    if samples
        .iter()
        .any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::domain_with(
            Constraint::BadInput,
            "samples must be positive",
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if spec.end == End::Origin {
        sorted.reverse();
    }
    // `sorted` now runs toward the spec's end
    let q = spec.exponent;
    let mean_ln = sorted.iter().map(|&(x, y)| y.ln() - q * x.ln()).sum::<f64>() / sorted.len() as f64;
    let devs: Vec<f64> = sorted
        .iter()
        .map(|&(x, y)| (y / spec.eval(x) - 1.0).abs())
        .collect();
    let deviation = devs.iter().copied().fold(0.0, f64::max);
    let end_deviation = devs[devs.len() - 1];
    let monotone = devs.windows(2).all(|w| w[1] <= w[0] + FIT_NOISE);
    let within = end_deviation <= ASYMPTOTE_BAND;
    let status = match (within, monotone) {
        (true, true) => Status::Pass,
        (false, false) => Status::Fail,
        _ => Status::Inconclusive,
    };
    Ok(AsymptoteFit {
        spec: *spec,
        measured_constant: mean_ln.exp(),
        deviation,
        end_deviation,
        monotone,
        status,
    })
}

/// Fixed-step classical Runge–Kutta solve of `dΥ/dΘ = f(Θ, Υ)`.
///
/// Below `Θ_s = 10⁻³·hi` the solution has fractional powers of Θ, so steps
/// there are fixed in `ln Θ` with size `h/Θ_s`; from `Θ_s` on they are fixed
/// in Θ with size `h`. Both shrink with `h`, which keeps the global error
/// fourth order. The log stage starts nine decades below `Θ_s` (or at `lo`)
/// from `Υ = max(eps, seed)` and is raised until `Δu·Θ|∂f/∂Υ| ≤ 1/2` on the
/// seed; the linear stage also needs `h|∂f/∂Υ| ≤ 1/2` where it begins. At
/// most 20000 nodes are kept, evenly strided, plus the end point.
pub fn oracle_fixed_step(
    params: &ModelParams,
    eps: f64,
    range: (f64, f64),
    h: f64,
) -> Result<Trajectory> {
    let (lo, hi) = range;
    if !(h > 0.0 && eps > 0.0 && lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain_with(
            Constraint::BadInput,
            format!("eps = {eps}, range = [{lo}, {hi}], h = {h}"),
        ));
    }
    let series = model::origin_series(params);
    let (p, k) = (params.p(), params.k());
    let seed = |theta: f64| series.eval(theta).max(eps);
    let jac = |theta: f64, y: f64| {
        let f = model::phase_rhs_unchecked(params, theta, y);
        ((f - k) / (p * y)).abs()
    };
    let rhs = |theta: f64, y: f64| {
        if y > 0.0 {
            model::phase_rhs_unchecked(params, theta, y)
        } else {
            f64::NAN
        }
    };
    let log_rhs = |u: f64, y: f64| {
        let theta = u.exp();
        theta * rhs(theta, y)
    };
    let too_far = |start: f64| Error::RangeExceeded {
        value: start,
        lo,
        hi,
    };

    let switch = (1e-3 * hi).max(lo);
    let du = h / switch;
    let mut start = lo.max(1e-9 * switch);
    while start < switch && du * start * jac(start, seed(start)) > 0.5 {
        start *= 1.1;
    }
    start = start.min(switch);
    if switch < hi && h * jac(switch, seed(switch)) > 0.5 && start == switch {
        return Err(too_far(start));
    }
    let log_steps = if start < switch {
        ((switch / start).ln() / du).ceil() as usize
    } else {
        0
    };
    let lin_steps = ((hi - switch) / h).ceil() as usize;
    let stride = (log_steps + lin_steps).div_ceil(ORACLE_MAX_NODES).max(1);
    let node = |theta: f64, y: f64| Node {
        x: theta.ln(),
        y: y.ln(),
        dy: rhs(theta, y) * theta / y,
    };

    let mut y = seed(start);
    let mut nodes = vec![node(start, y)];
    let mut taken = 0usize;
    let mut push = |theta: f64, y: f64, last: bool, nodes: &mut Vec<Node>| -> Result<()> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::integration(theta, "reference solution left Υ > 0"));
        }
        taken += 1;
        if taken.is_multiple_of(stride) || last {
            nodes.push(node(theta, y));
        }
        Ok(())
    };
    let (u0, u1) = (start.ln(), switch.ln());
    for i in 0..log_steps {
        let u = u0 + i as f64 * du;
        let u_next = if i + 1 == log_steps { u1 } else { u0 + (i + 1) as f64 * du };
        y = rk4_step(&log_rhs, u, y, u_next - u);
        let theta = if i + 1 == log_steps { switch } else { u_next.exp() };
        push(theta, y, lin_steps == 0 && i + 1 == log_steps, &mut nodes)?;
    }
    for i in 0..lin_steps {
        let x = switch + i as f64 * h;
        let x_next = if i + 1 == lin_steps {
            hi
        } else {
            switch + (i + 1) as f64 * h
        };
        y = rk4_step(&rhs, x, y, x_next - x);
        push(x_next, y, i + 1 == lin_steps, &mut nodes)?;
    }
    if nodes.len() < 2 {
        return Err(too_far(start));
    }
    Ok(Trajectory::from_nodes(
        *params,
        nodes,
        None,
        start,
        TrajectoryKind::RegularizedUpper(eps),
        h,
    ))
}

/// Largest `|Υ/Υ_ref − 1|` at the reference nodes inside `[lo, hi]`.
pub fn oracle_deviation(traj: &Trajectory, reference: &Trajectory, lo: f64, hi: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (&u, &y) in reference.ln_thetas().iter().zip(reference.ln_upsilons()) {
        let theta = u.exp();
        if theta < lo || theta > hi {
            continue;
        }
        let v = traj.eval(theta.min(traj.theta_max()))?;
        worst = worst.max((v / y.exp() - 1.0).abs());
    }
    Ok(worst)
}

/// Error ratio `e(h)/e(h/2)` of the reference at the end of `range`, measured
/// against `exact`. About 16 for a fourth-order method.
pub fn richardson_ratio<E: Fn(f64) -> f64>(
    params: &ModelParams,
    exact: E,
    range: (f64, f64),
    h: f64,
) -> Result<f64> {
    let err = |step: f64| -> Result<f64> {
        let r = oracle_fixed_step(params, f64::MIN_POSITIVE, range, step)?;
        let y = r.ln_upsilons()[r.len() - 1].exp();
        Ok((y / exact(range.1) - 1.0).abs())
    };
    Ok(err(h)? / err(0.5 * h)?)
}

/// Knobs of [`run_verification`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub theta_max: f64,
    pub tol: f64,
    pub qtol: f64,
    pub grid_points: usize,
    pub oracle_step: f64,
    pub oracle_range: (f64, f64),
    pub bracket: BracketOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            theta_max: 1e15,
            tol: 1e-10,
            qtol: 1e-10,
            grid_points: 200,
            oracle_step: 1e-6,
            oracle_range: (1e-3, 1.0),
            bracket: BracketOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketSummary {
    pub eps: f64,
    pub gap: f64,
    pub levels: usize,
    pub containment: f64,
    pub family_violation: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureChecks {
    pub phi_increasing: bool,
    pub boundary: bool,
    /// `Υ ≥ kΘ`, only meaningful for `k > 0`.
    pub wave_bound: Option<bool>,
    pub zero_extension: bool,
}

impl StructureChecks {
    fn status(&self) -> Status {
        Status::from_bool(
            self.phi_increasing
                && self.boundary
                && self.wave_bound.unwrap_or(true)
                && self.zero_extension,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub params: ModelParams,
    pub regime: Regime,
    pub theta0: f64,
    pub theta_max: f64,
    pub z_max: f64,
    pub residual: Option<ResidualStats>,
    pub residual_refined: Option<ResidualStats>,
    /// `(z_lo, z_hi)` of the residual grid.
    pub residual_window: (f64, f64),
    pub residual_status: Status,
    pub energy: Option<EnergyCheck>,
    pub asymptotes: Vec<AsymptoteFit>,
    pub bracket: BracketSummary,
    pub oracle_deviation: f64,
    pub oracle_status: Status,
    pub structure: StructureChecks,
    /// Errors raised by individual checks.
    pub notes: Vec<String>,
    pub status: Status,
    pub pass: bool,
}

impl VerificationReport {
    /// Flat `key = value` lines with stable keys.
    pub fn to_document(&self) -> String {
        let mut lines: Vec<(String, String)> = Vec::new();
        let mut num = |k: &str, v: f64| lines.push((k.to_string(), format_number(v)));
        let [m, p, beta, b, k] = self.params.as_array();
        num("params.m", m);
        num("params.p", p);
        num("params.beta", beta);
        num("params.b", b);
        num("params.k", k);
        num("trajectory.theta0", self.theta0);
        num("trajectory.theta_max", self.theta_max);
        num("profile.z_max", self.z_max);
        num("residual.z_lo", self.residual_window.0);
        num("residual.z_hi", self.residual_window.1);
        let nan = f64::NAN;
        num("residual.max_rel", self.residual.map_or(nan, |r| r.max_rel));
        num("residual.median_rel", self.residual.map_or(nan, |r| r.median_rel));
        num(
            "residual.refined_max_rel",
            self.residual_refined.map_or(nan, |r| r.max_rel),
        );
        num("bracket.eps", self.bracket.eps);
        num("bracket.gap", self.bracket.gap);
        num("bracket.containment", self.bracket.containment);
        num("bracket.family_violation", self.bracket.family_violation);
        num("oracle.deviation", self.oracle_deviation);
        let mut text = |k: &str, v: String| lines.push((k.to_string(), v));
        text(
            "regime",
            format!("{}/{}", self.regime.balance, self.regime.speed_sign),
        );
        text("residual.status", self.residual_status.to_string());
        text("bracket.levels", self.bracket.levels.to_string());
        text("bracket.status", self.bracket.status.to_string());
        text("oracle.status", self.oracle_status.to_string());
        match &self.energy {
            Some(e) => {
                text("energy.monotone", e.monotone.to_string());
                text("energy.worst_violation", format_number(e.worst_violation));
            }
            None => text("energy.monotone", "n/a".into()),
        }
        let s = &self.structure;
        text("structure.phi_increasing", s.phi_increasing.to_string());
        text("structure.boundary", s.boundary.to_string());
        text(
            "structure.wave_bound",
            s.wave_bound.map_or("n/a".into(), |v| v.to_string()),
        );
        text("structure.zero_extension", s.zero_extension.to_string());
        text("asymptote.count", self.asymptotes.len().to_string());
        for (i, a) in self.asymptotes.iter().enumerate() {
            let key = |f: &str| format!("asymptote[{i}].{f}");
            text(&key("target"), a.spec.target.name().into());
            text(&key("end"), a.spec.end.name().into());
            text(&key("law"), a.spec.law.name().into());
            text(&key("constant"), format_number(a.spec.constant));
            text(&key("exponent"), format_number(a.spec.exponent));
            text(&key("measured_constant"), format_number(a.measured_constant));
            text(&key("deviation"), format_number(a.end_deviation));
            text(&key("max_deviation"), format_number(a.deviation));
            text(&key("monotone"), a.monotone.to_string());
            text(&key("status"), a.status.to_string());
        }
        for (i, n) in self.notes.iter().enumerate() {
            text(&format!("note[{i}]"), n.replace('\n', " "));
        }
        text("status", self.status.to_string());
        text("pass", self.pass.to_string());
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Leading relative error `(α−1)(α−2)δ²/6` of the centred stencil on `z^α`
/// sampled geometrically with log-spacing `δ`, per unit `δ²`.
fn stencil_coefficient(alpha: f64) -> f64 {
    ((alpha - 1.0) * (alpha - 2.0) / 6.0).abs()
}

/// z-window centred on the crossover between the two ends' laws, clipped to
/// the computed range. It spans four decades unless the profile's end power
/// laws are steep enough that the stencil's truncation on `n` points would
/// exceed 1e-4; then it narrows, down to one decade.
pub fn residual_window(map: &TravelMap<'_>, n: usize) -> Result<(f64, f64)> {
    let traj = map.trajectory();
    let params = traj.params();
    let s = params.reaction_exponent();
    let theta_c = if params.k() == 0.0 {
        1.0
    } else {
        ((params.k().abs().ln() - params.ln_reaction_constant()) / (s - 1.0)).exp()
    };
    let theta_c = theta_c.clamp(traj.seed_end(), traj.theta_max());
    let z_c = map.z_at(theta_c)?;
    let coefficient = [End::Origin, End::Infinity]
        .iter()
        .filter_map(|&end| theorem1_asymptote(params, end).ok())
        .map(|spec| stencil_coefficient(spec.exponent))
        .fold(0.0, f64::max);
    let intervals = n.max(2) as f64 - 1.0;
    let decades = if coefficient > 0.0 {
        (RESIDUAL_TRUNCATION / coefficient).sqrt() * intervals / std::f64::consts::LN_10
    } else {
        4.0
    }
    .clamp(1.0, 4.0);
    let half = 10f64.powf(0.5 * decades);
    let (lo, hi) = (map.z_seed(), 0.99 * map.z_max());
    let mut a = (z_c / half).max(lo);
    let mut b = (z_c * half).min(hi);
    // keep the width when one side is clipped
    let width = half * half;
    if b / a < width {
        if a == lo {
            b = (a * width).min(hi);
        } else {
            a = (b / width).max(lo);
        }
    }
    Ok((a, b))
}

fn sampled_profile(
    map: &TravelMap<'_>,
    window: (f64, f64),
    n: usize,
) -> Result<(Profile, Vec<f64>)> {
    let profile = reconstruct_with(map, &geometric_grid(window.0, window.1, n))?;
    let flux = profile
        .phis()
        .iter()
        .map(|&phi| flux_at_phi(map.trajectory(), phi))
        .collect::<Result<Vec<f64>>>()?;
    Ok((profile, flux))
}

fn trajectory_fit(traj: &Trajectory, spec: &AsymptoteSpec) -> Result<AsymptoteFit> {
    let samples = fit_window(traj.seed_end(), traj.theta_max(), spec.end, FIT_SAMPLES)
        .into_iter()
        .map(|x| Ok((x, traj.eval(x)?)))
        .collect::<Result<Vec<_>>>()?;
    fit_asymptote(&samples, spec)
}

fn profile_fit(map: &TravelMap<'_>, spec: &AsymptoteSpec) -> Result<AsymptoteFit> {
    let samples = fit_window(map.z_seed(), 0.99 * map.z_max(), spec.end, FIT_SAMPLES)
        .into_iter()
        .map(|z| Ok((z, map.solve_log_phi(z)?.exp())))
        .collect::<Result<Vec<_>>>()?;
    fit_asymptote(&samples, spec)
}

/// Solves, brackets, reconstructs and checks one parameter set.
///
/// Only invalid input is an error; every failed check is recorded in the
/// report instead.
pub fn run_verification(params: &ModelParams, opts: &VerifyOptions) -> Result<VerificationReport> {
    let params = model::validate_params(params.as_array())?;
    let regime = classify_regime(&params);
    let traj = solve_trajectory(&params, opts.theta_max, opts.tol)?;
    let map = TravelMap::new(&traj, opts.qtol)?;
    let mut notes = Vec::new();
    let mut note = |what: &str, e: &Error| notes.push(format!("{what}: {e}"));

    // residual on the base grid and on the grid with halved spacing
    let n = opts.grid_points.max(7);
    let residual_window = residual_window(&map, n)?;
    let residual = sampled_profile(&map, residual_window, n)
        .and_then(|(pr, fl)| ode_residual(&params, &pr, &fl));
    let refined = sampled_profile(&map, residual_window, 2 * n - 1)
        .and_then(|(pr, fl)| ode_residual(&params, &pr, &fl));
    let (residual, residual_refined) = match (residual, refined) {
        (Ok(a), Ok(b)) => (Some(a), Some(b)),
        (a, b) => {
            for e in [a.err(), b.err()].into_iter().flatten() {
                note("residual", &e);
            }
            (None, None)
        }
    };
    let residual_status = match (residual, residual_refined) {
        (Some(a), Some(b)) => Status::from_bool(
            a.max_rel <= RESIDUAL_LIMIT && b.max_rel * RESIDUAL_DROP <= a.max_rel,
        ),
        _ => Status::Fail,
    };

    // profile on the report grid: structure and energy
    let grid = default_z_grid(&map, opts.grid_points.max(2));
    let (structure, energy) = match reconstruct_with(&map, &grid).and_then(|pr| {
        let flux = pr
            .phis()
            .iter()
            .map(|&phi| flux_at_phi(&traj, phi))
            .collect::<Result<Vec<f64>>>()?;
        Ok((pr, flux))
    }) {
        Ok((pr, flux)) => {
            let phis = pr.phis();
            let phi_increasing = phis.windows(2).all(|w| w[1] > w[0]) && phis[0] > 0.0;
            let near_front = grid[0] * 1e-3;
            let boundary = pr.phi_at(0.0) == Ok(0.0)
                && profile_flux(&traj, &pr, 0.0) == Ok(0.0)
                && matches!(
                    (profile_flux(&traj, &pr, near_front), profile_flux(&traj, &pr, grid[0])),
                    (Ok(a), Ok(b)) if a < b
                );
            let zero_extension = pr.phi_at(-1.0) == Ok(0.0)
                && profile_flux(&traj, &pr, -1.0) == Ok(0.0);
            let wave_bound = (regime.speed_sign == SpeedSign::Positive).then(|| {
                traj.ln_thetas()
                    .iter()
                    .zip(traj.ln_upsilons())
                    .all(|(&u, &y)| y.exp() >= params.k() * u.exp() * (1.0 - 10.0 * opts.tol))
            });
            let energy = (regime.speed_sign != SpeedSign::Negative)
                .then(|| energy_monotonicity(&params, phis, &flux));
            (
                StructureChecks {
                    phi_increasing,
                    boundary,
                    wave_bound,
                    zero_extension,
                },
                energy,
            )
        }
        Err(e) => {
            note("profile", &e);
            (
                StructureChecks {
                    phi_increasing: false,
                    boundary: false,
                    wave_bound: None,
                    zero_extension: false,
                },
                None,
            )
        }
    };

    let mut asymptotes = Vec::new();
    for end in [End::Origin, End::Infinity] {
        if let Ok(spec) = lemma3_asymptote(&params, end) {
            match trajectory_fit(&traj, &spec) {
                Ok(f) => asymptotes.push(f),
                Err(e) => note("trajectory asymptote", &e),
            }
        }
    }
    for end in [End::Origin, End::Infinity] {
        if let Ok(spec) = theorem1_asymptote(&params, end) {
            match profile_fit(&map, &spec) {
                Ok(f) => asymptotes.push(f),
                Err(e) => note("profile asymptote", &e),
            }
        }
    }

    let bracket = match bracket_trajectory(&traj, &opts.bracket) {
        Ok(rep) => {
            let containment = rep
                .levels
                .iter()
                .filter(|l| l.eps >= CONTAINMENT_EPS * (1.0 - 1e-9))
                .map(|l| l.containment_violation)
                .fold(0.0, f64::max);
            let family_violation = rep.family_monotonicity_violation(&traj);
            let slack = 10.0 * opts.tol;
            let ok = rep.final_gap() < GAP_LIMIT && containment <= slack && family_violation <= slack;
            BracketSummary {
                eps: rep.final_eps(),
                gap: rep.final_gap(),
                levels: rep.levels.len(),
                containment,
                family_violation,
                status: Status::from_bool(ok),
            }
        }
        Err(e) => {
            let gap = match &e {
                Error::BracketStall { gap, .. } => *gap,
                _ => f64::NAN,
            };
            note("bracket", &e);
            BracketSummary {
                eps: f64::NAN,
                gap,
                levels: 0,
                containment: f64::NAN,
                family_violation: f64::NAN,
                status: Status::Fail,
            }
        }
    };

    let (lo, hi) = opts.oracle_range;
    let oracle_deviation = oracle_fixed_step(&params, f64::MIN_POSITIVE, (0.0, hi), opts.oracle_step)
        .and_then(|r| oracle_deviation(&traj, &r, lo, hi))
        .unwrap_or_else(|e| {
            note("oracle", &e);
            f64::NAN
        });
    let oracle_status = Status::from_bool(oracle_deviation <= ORACLE_LIMIT);

    let mut status = residual_status
        .and(oracle_status)
        .and(bracket.status)
        .and(structure.status());
    if let Some(e) = &energy {
        status = status.and(Status::from_bool(e.monotone));
    }
    for a in &asymptotes {
        status = status.and(a.status);
    }
    if !notes.is_empty() {
        status = status.and(Status::Fail);
    }
    Ok(VerificationReport {
        params,
        regime,
        theta0: traj.seed_end(),
        theta_max: traj.theta_max(),
        z_max: map.z_max(),
        residual,
        residual_refined,
        residual_window,
        residual_status,
        energy,
        asymptotes,
        bracket,
        oracle_deviation,
        oracle_status,
        structure,
        notes,
        status,
        pass: status == Status::Pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Law, Target};

    fn params(m: f64, p: f64, beta: f64, b: f64, k: f64) -> ModelParams {
        ModelParams::new(m, p, beta, b, k).unwrap()
    }

    fn separable_profile(n: usize) -> (ModelParams, Profile, Vec<f64>) {
        let pr = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let c = pr.c_star();
        let zs = geometric_grid(1e-2, 1e2, n);
        let phis: Vec<f64> = zs.iter().map(|z| c * z.powf(4.0 / 3.0)).collect();
        let flux = phis.iter().map(|phi| 1.6f64.sqrt() * phi.powf(1.25)).collect();
        (pr, Profile::from_samples(pr, zs, phis).unwrap(), flux)
    }

    #[test]
    fn number_format_matches_printf() {
        assert_eq!(format_number(1.0), "1.00000000000000000e+00");
        assert_eq!(format_number(-2.5e-7), "-2.49999999999999989e-07");
        assert_eq!(format_number(1.5e300), "1.50000000000000008e+300");
        assert_eq!(format_number(0.0), "0.00000000000000000e+00");
        let x = 0.369_931_8_f64;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn residual_of_exact_separable_profile() {
        let (pr, profile, flux) = separable_profile(200);
        let r = ode_residual(&pr, &profile, &flux).unwrap();
        assert!(r.max_rel <= 1e-3, "{r:?}");
        assert!(r.median_rel <= r.max_rel);
        assert_eq!(r.points, 198);
        let (_, fine, fine_flux) = separable_profile(399);
        let rf = ode_residual(&pr, &fine, &fine_flux).unwrap();
        assert!(rf.max_rel * 3.0 <= r.max_rel);
    }

    #[test]
    fn residual_of_zero_profile_vanishes() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 1.0);
        let zs: Vec<f64> = (0..10).map(|i| -10.0 + i as f64).collect();
        let profile = Profile::from_samples(pr, zs, vec![0.0; 10]).unwrap();
        let r = ode_residual(&pr, &profile, &[0.0; 10]).unwrap();
        assert_eq!(r.max_rel, 0.0);
        assert_eq!(r.median_rel, 0.0);
    }

    #[test]
    fn residual_rejects_short_grids() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let profile = Profile::from_samples(pr, vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(ode_residual(&pr, &profile, &[1.0; 3]).is_err());
    }

    #[test]
    fn energy_examples() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 0.0);
        assert_eq!(energy_phi(&pr, 0.0, 0.0), 0.0);
        for phi in [1e-3, 0.5, 7.0] {
            let flux = 1.6f64.sqrt() * f64::powf(phi, 1.25);
            let e = energy_phi(&pr, phi, flux);
            assert!(e.abs() <= 1e-14 * 0.8 * f64::powf(phi, 2.5), "{e}");
        }
    }

    #[test]
    fn energy_increases_for_positive_speed() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 1.0);
        let traj = solve_trajectory(&pr, 1e4, 1e-10).unwrap();
        let profile = crate::reconstruct_profile(&traj, &[0.5, 1.0, 2.0], 1e-10).unwrap();
        let e1 = energy_at(&traj, &profile, 1.0).unwrap();
        let e2 = energy_at(&traj, &profile, 2.0).unwrap();
        assert!(e2 >= e1, "{e1} {e2}");
        assert_eq!(energy_at(&traj, &profile, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_power_law_fits_perfectly() {
        let spec = AsymptoteSpec {
            constant: 0.25,
            exponent: 2.0,
            end: End::Origin,
            target: Target::Profile,
            law: Law::CriticalCurve,
        };
        let samples: Vec<(f64, f64)> = geometric_grid(1e-3, 1e-2, 8)
            .into_iter()
            .map(|x| (x, 0.25 * x * x))
            .collect();
        let fit = fit_asymptote(&samples, &spec).unwrap();
        assert!(fit.deviation < 1e-15);
        assert!((fit.measured_constant - 0.25).abs() < 1e-15);
        assert_eq!(fit.status, Status::Pass);
        assert!(fit_asymptote(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)], &spec).is_err());
        assert!(fit_asymptote(&samples[..2], &spec).is_err());
    }

    #[test]
    fn fit_statuses() {
        let spec = AsymptoteSpec {
            constant: 1.0,
            exponent: 1.0,
            end: End::Infinity,
            target: Target::Trajectory,
            law: Law::Wave,
        };
        let xs = geometric_grid(1.0, 10.0, 8);
        let with = |d: &dyn Fn(f64) -> f64| -> Status {
            let s: Vec<_> = xs.iter().map(|&x| (x, x * (1.0 + d(x)))).collect();
            fit_asymptote(&s, &spec).unwrap().status
        };
        assert_eq!(with(&|x| 0.1 / x), Status::Pass);
        assert_eq!(with(&|x| 0.5 / x), Status::Inconclusive);
        assert_eq!(with(&|x| 0.001 * x), Status::Inconclusive);
        assert_eq!(with(&|x| 0.01 * x), Status::Fail);
    }

    #[test]
    fn lemma3_origin_fit_for_positive_speed() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 1.0);
        let traj = solve_trajectory(&pr, 10.0, 1e-10).unwrap();
        let spec = lemma3_asymptote(&pr, End::Origin).unwrap();
        let samples: Vec<_> = [1e-6, 1e-5, 1e-4]
            .iter()
            .map(|&x| (x, traj.eval(x).unwrap()))
            .collect();
        let fit = fit_asymptote(&samples, &spec).unwrap();
        assert!(fit.deviation <= 0.02, "{fit:?}");
    }

    #[test]
    fn theorem1_origin_fit_for_negative_speed() {
        let pr = params(2.0, 1.0, 0.5, 1.0, -1.0);
        let traj = solve_trajectory(&pr, 10.0, 1e-10).unwrap();
        let map = TravelMap::new(&traj, 1e-10).unwrap();
        let spec = theorem1_asymptote(&pr, End::Origin).unwrap();
        assert!((spec.constant - 0.25).abs() < 1e-14 && spec.exponent == 2.0);
        let fit = profile_fit(&map, &spec).unwrap();
        assert!(fit.deviation <= 0.02, "{fit:?}");
    }

    #[test]
    fn reference_matches_separable_solution() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let r = oracle_fixed_step(&pr, f64::MIN_POSITIVE, (0.0, 1.0), 1e-6).unwrap();
        assert!(r.len() <= ORACLE_MAX_NODES + 2);
        for (&u, &y) in r.ln_thetas().iter().zip(r.ln_upsilons()) {
            if u.exp() >= 1e-3 {
                let exact = 1.6f64.sqrt() * (1.25 * u).exp();
                assert!((y.exp() / exact - 1.0).abs() <= 1e-8, "theta={}", u.exp());
            }
        }
        let again = oracle_fixed_step(&pr, f64::MIN_POSITIVE, (0.0, 1.0), 1e-6).unwrap();
        assert_eq!(r.ln_upsilons(), again.ln_upsilons());
    }

    #[test]
    fn reference_is_fourth_order() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let exact = |t: f64| 1.6f64.sqrt() * t.powf(1.25);
        let ratio = richardson_ratio(&pr, exact, (0.1, 1.0), 1e-2).unwrap();
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn reference_rejects_bad_input() {
        let pr = params(2.0, 1.0, 0.5, 1.0, 0.0);
        assert!(oracle_fixed_step(&pr, 1e-3, (1.0, 0.5), 1e-3).is_err());
        assert!(oracle_fixed_step(&pr, 1e-3, (0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn status_ordering() {
        assert_eq!(Status::Pass.and(Status::Inconclusive), Status::Inconclusive);
        assert_eq!(Status::Fail.and(Status::Inconclusive), Status::Fail);
        assert_eq!(Status::Pass.and(Status::Pass), Status::Pass);
    }
}
