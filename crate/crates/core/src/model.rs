//! Parameters, regime classification and the closed-form power laws.
//!
//! The traveling-wave ansatz `u(x,t) = φ(kt − x)` for
//! `u_t = (|(u^m)_x|^{p−1}(u^m)_x)_x − b u^β` leads, after the change of
//! variables `Θ = φ`, `Υ = ((φ^m)')^p`, to the first-order phase-plane
//! problem `dΥ/dΘ = k + b·m·Θ^{m+β−1}·Υ^{−1/p}`, `Υ(0) = 0`. Everything in
//! this module is a pure function of the parameters; constants are evaluated
//! in log space so that large exponents such as `1/(mp−β)` do not overflow
//! intermediate results.

use crate::error::{Constraint, Error, Result};

/// Half-width of the band around `p(m+β) = 1+p` that is rejected as critical.
pub const CRITICAL_BAND: f64 = 1e-12;

/// Validated parameter tuple `(m, p, β, b, k)` in the slow-diffusion range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    m: f64,
    p: f64,
    beta: f64,
    b: f64,
    k: f64,
}

impl ModelParams {
    pub fn new(m: f64, p: f64, beta: f64, b: f64, k: f64) -> Result<Self> {
        validate_params([m, p, beta, b, k])
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Same parameters with a different wave speed.
    pub fn with_speed(&self, k: f64) -> Result<Self> {
        Self::new(self.m, self.p, self.beta, self.b, k)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.m, self.p, self.beta, self.b, self.k]
    }

    /// Exponent `m + β − 1` of Θ in the absorption term of the phase-plane field.
    pub fn theta_exponent(&self) -> f64 {
        self.m + self.beta - 1.0
    }

    /// Signed balance `p(m+β) − (1+p)`; negative is Sub, positive is Super.
    pub fn balance_gap(&self) -> f64 {
        self.p * (self.m + self.beta) - (1.0 + self.p)
    }

    /// Exponent `p(m+β)/(1+p)` of the reaction-balance law.
    pub fn reaction_exponent(&self) -> f64 {
        self.p * (self.m + self.beta) / (1.0 + self.p)
    }

    /// `ln` of the reaction-balance constant `[bm(1+p)/(p(m+β))]^{p/(1+p)}`.
    pub fn ln_reaction_constant(&self) -> f64 {
        let (m, p, beta, b) = (self.m, self.p, self.beta, self.b);
        p / (1.0 + p) * ((b * m * (1.0 + p)).ln() - (p * (m + beta)).ln())
    }

    /// Exponent `p(m+β−1)` of the critical curve.
    pub fn critical_exponent(&self) -> f64 {
        self.p * self.theta_exponent()
    }

    /// `ln` of the critical-curve constant `(−k/(bm))^{−p}`; requires `k < 0`.
    pub fn ln_critical_constant(&self) -> Option<f64> {
        (self.k < 0.0).then(|| -self.p * ((-self.k).ln() - (self.b * self.m).ln()))
    }

    /// Reaction-balance constant `C_*` of the profile law `φ ∼ C_* z^{(1+p)/(mp−β)}`.
    pub fn c_star(&self) -> f64 {
        self.ln_c_star().exp()
    }

    fn ln_c_star(&self) -> f64 {
        let (m, p, beta, b) = (self.m, self.p, self.beta, self.b);
        let mpb = m * p - beta;
        (b.ln() + (1.0 + p) * mpb.ln() - p * (m * (1.0 + p)).ln() - p.ln() - (m + beta).ln())
            / mpb
    }
}

/// Checks the raw tuple `(m, p, β, b, k)` against the model's constraints.
pub fn validate_params(raw: [f64; 5]) -> Result<ModelParams> {
    let [m, p, beta, b, k] = raw;
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(Constraint::NonFinite));
    }
    if m <= 0.0 {
        return Err(Error::domain_with(Constraint::NonPositiveM, format!("m = {m}")));
    }
    if p <= 0.0 {
        return Err(Error::domain_with(Constraint::NonPositiveP, format!("p = {p}")));
    }
    if b <= 0.0 {
        return Err(Error::domain_with(Constraint::NonPositiveB, format!("b = {b}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain_with(
            Constraint::BetaOutOfRange,
            format!("beta = {beta}"),
        ));
    }
    if m * p <= 1.0 {
        return Err(Error::domain_with(
            Constraint::FastDiffusion,
            format!("mp = {}", m * p),
        ));
    }
    let gap = p * (m + beta) - (1.0 + p);
    if gap.abs() <= CRITICAL_BAND {
        return Err(Error::domain_with(
            Constraint::CriticalBalance,
            format!("p(m+beta) - (1+p) = {gap:e}"),
        ));
    }
    Ok(ModelParams { m, p, beta, b, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeedSign {
    Negative,
    Zero,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Balance {
    /// `p(m+β) < 1+p`
    Sub,
    /// `p(m+β) > 1+p`
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Regime {
    pub speed_sign: SpeedSign,
    pub balance: Balance,
}

impl Regime {
    /// The limit statements for the profile assume a nonzero speed; `k = 0`
    /// is handled through the exact separable solution instead.
    pub fn is_separable(&self) -> bool {
        self.speed_sign == SpeedSign::Zero
    }
}

impl std::fmt::Display for SpeedSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpeedSign::Negative => "negative",
            SpeedSign::Zero => "zero",
            SpeedSign::Positive => "positive",
        })
    }
}

impl std::fmt::Display for Balance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Balance::Sub => "sub",
            Balance::Super => "super",
        })
    }
}

pub fn classify_regime(params: &ModelParams) -> Regime {
    let speed_sign = if params.k > 0.0 {
        SpeedSign::Positive
    } else if params.k < 0.0 {
        SpeedSign::Negative
    } else {
        SpeedSign::Zero
    };
    // validate_params already rejected the critical band
    let balance = if params.balance_gap() < 0.0 {
        Balance::Sub
    } else {
        Balance::Super
    };
    Regime {
        speed_sign,
        balance,
    }
}

/// Right side `k + b·m·Θ^{m+β−1}·Υ^{−1/p}` of the phase-plane equation.
pub fn phase_rhs(params: &ModelParams, theta: f64, upsilon: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::domain_with(
            Constraint::NonPositiveTheta,
            format!("theta = {theta}"),
        ));
    }
    if !(upsilon > 0.0) {
        return Err(Error::domain_with(
            Constraint::NonPositiveUpsilon,
            format!("upsilon = {upsilon}"),
        ));
    }
    Ok(phase_rhs_unchecked(params, theta, upsilon))
}

pub(crate) fn phase_rhs_unchecked(params: &ModelParams, theta: f64, upsilon: f64) -> f64 {
    let ln_term = (params.b * params.m).ln() + params.theta_exponent() * theta.ln()
        - upsilon.ln() / params.p;
    params.k + ln_term.exp()
}

/// The curve on which the phase-plane field vanishes (`k < 0` only).
pub fn critical_curve(params: &ModelParams, theta: f64) -> Result<f64> {
    let ln_a = params
        .ln_critical_constant()
        .ok_or_else(|| Error::domain_with(Constraint::NonNegativeSpeed, format!("k = {}", params.k)))?;
    if !(theta > 0.0) {
        return Err(Error::domain_with(
            Constraint::NonPositiveTheta,
            format!("theta = {theta}"),
        ));
    }
    Ok((ln_a + params.critical_exponent() * theta.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Origin,
    Infinity,
}

impl End {
    pub fn name(&self) -> &'static str {
        match self {
            End::Origin => "origin",
            End::Infinity => "infinity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    /// The phase-plane trajectory `Υ(Θ)`.
    Trajectory,
    /// The traveling-wave profile `φ(z)`.
    Profile,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Trajectory => "trajectory",
            Target::Profile => "profile",
        }
    }
}

/// Which dominant balance produces a power law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    /// Diffusion balances absorption; the speed term is negligible.
    ReactionBalance,
    /// The speed term dominates: `Υ ∼ kΘ`.
    Wave,
    /// The trajectory hugs the curve where the field vanishes (`k < 0`).
    CriticalCurve,
}

impl Law {
    pub fn name(&self) -> &'static str {
        match self {
            Law::ReactionBalance => "reaction_balance",
            Law::Wave => "wave",
            Law::CriticalCurve => "critical_curve",
        }
    }
}

/// A power law `A·X^q` that holds asymptotically at one end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoteSpec {
    pub constant: f64,
    pub exponent: f64,
    pub end: End,
    pub target: Target,
    pub law: Law,
}

impl AsymptoteSpec {
    fn from_ln(ln_constant: f64, exponent: f64, end: End, target: Target, law: Law) -> Self {
        AsymptoteSpec {
            constant: ln_constant.exp(),
            exponent,
            end,
            target,
            law,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.constant.ln() + self.exponent * x.ln()).exp()
    }
}

/// Which law governs the given end, following the Sub/Super and speed-sign
/// case split. `k = 0` is covered only at the end where the reaction-balance
/// law applies for the regime.
fn law_at(params: &ModelParams, end: End) -> Result<Law> {
    let regime = classify_regime(params);
    let reaction_end = match regime.balance {
        Balance::Sub => End::Origin,
        Balance::Super => End::Infinity,
    };
    if end == reaction_end {
        return Ok(Law::ReactionBalance);
    }
    match regime.speed_sign {
        SpeedSign::Positive => Ok(Law::Wave),
        SpeedSign::Negative => Ok(Law::CriticalCurve),
        SpeedSign::Zero => Err(Error::UncoveredRegime { end: end.name() }),
    }
}

/// Power law for the trajectory `Υ(Θ)` at the requested end.
pub fn lemma3_asymptote(params: &ModelParams, end: End) -> Result<AsymptoteSpec> {
    let law = law_at(params, end)?;
    Ok(trajectory_law(params, law, end))
}

pub(crate) fn trajectory_law(params: &ModelParams, law: Law, end: End) -> AsymptoteSpec {
    let (ln_a, q) = match law {
        Law::ReactionBalance => (params.ln_reaction_constant(), params.reaction_exponent()),
        Law::Wave => (params.k.ln(), 1.0),
        Law::CriticalCurve => (
            params.ln_critical_constant().unwrap_or(f64::NAN),
            params.critical_exponent(),
        ),
    };
    AsymptoteSpec::from_ln(ln_a, q, end, Target::Trajectory, law)
}

/// Power law for the profile `φ(z)` at the requested end.
pub fn theorem1_asymptote(params: &ModelParams, end: End) -> Result<AsymptoteSpec> {
    let law = law_at(params, end)?;
    let (m, p, beta, b, k) = (params.m, params.p, params.beta, params.b, params.k);
    let (ln_a, q) = match law {
        Law::ReactionBalance => (params.ln_c_star(), (1.0 + p) / (m * p - beta)),
        Law::Wave => {
            let mp = m * p;
            (
                p / (mp - 1.0) * ((mp - 1.0).ln() - mp.ln()) + k.ln() / (mp - 1.0),
                p / (mp - 1.0),
            )
        }
        Law::CriticalCurve => (
            ((1.0 - beta).ln() + b.ln() - (-k).ln()) / (1.0 - beta),
            1.0 / (1.0 - beta),
        ),
    };
    Ok(AsymptoteSpec::from_ln(ln_a, q, end, Target::Profile, law))
}

/// Exponent `m − q/p` of the travel-time integral `m∫Θ^{m−1}Υ^{−1/p}dΘ`
/// when `Υ ∼ A·Θ^q`. Integrability at the origin requires it to be positive.
pub fn travel_exponent(params: &ModelParams, trajectory_exponent: f64) -> f64 {
    params.m - trajectory_exponent / params.p
}

/// Profile law obtained by integrating the travel-time relation exactly
/// against a trajectory power law `Υ = A·Θ^q`:
/// `z = m·A^{−1/p}·Θ^λ/λ` with `λ = m − q/p`, inverted for `Θ = φ(z)`.
pub fn integrated_profile_law(params: &ModelParams, traj: &AsymptoteSpec) -> AsymptoteSpec {
    let lambda = travel_exponent(params, traj.exponent);
    let ln_a = (lambda.ln() + traj.constant.ln() / params.p - params.m.ln()) / lambda;
    AsymptoteSpec::from_ln(ln_a, 1.0 / lambda, traj.end, Target::Profile, traj.law)
}

/// Two-term expansion `Υ ≈ A·Θ^q·(1 + κ·Θ^η)` of the singular trajectory
/// near the origin, used to seed the integration and to close the travel-time
/// integral analytically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginSeries {
    pub leading: AsymptoteSpec,
    pub kappa: f64,
    pub eta: f64,
}

impl OriginSeries {
    pub fn eval(&self, theta: f64) -> f64 {
        self.leading.eval(theta) * (1.0 + self.correction(theta))
    }

    /// Relative size `κΘ^η` of the first correction.
    pub fn correction(&self, theta: f64) -> f64 {
        if self.kappa == 0.0 {
            0.0
        } else {
            self.kappa * theta.powf(self.eta)
        }
    }

    /// Largest Θ at which the first correction is at most `rel` in magnitude.
    pub fn radius_for(&self, rel: f64) -> Option<f64> {
        (self.kappa != 0.0).then(|| ((rel.ln() - self.kappa.abs().ln()) / self.eta).exp())
    }
}

/// Origin expansion for the singular trajectory in every regime, including
/// the exact separable case `k = 0`.
pub fn origin_series(params: &ModelParams) -> OriginSeries {
    let regime = classify_regime(params);
    let (m, p, beta, b, k) = (params.m, params.p, params.beta, params.b, params.k);
    if regime.balance == Balance::Sub || regime.is_separable() {
        // Υ = A Θ^s + k p Θ/(p + s): the speed enters at relative order Θ^{1−s}
        let leading = trajectory_law(params, Law::ReactionBalance, End::Origin);
        let s = leading.exponent;
        return OriginSeries {
            leading,
            kappa: k * p / (leading.constant * (p + s)),
            eta: 1.0 - s,
        };
    }
    match regime.speed_sign {
        SpeedSign::Positive => {
            // Υ = kΘ + bm k^{−1/p} Θ^g / g with g = m + β − 1/p > 1
            let g = m + beta - 1.0 / p;
            OriginSeries {
                leading: trajectory_law(params, Law::Wave, End::Origin),
                kappa: ((b * m).ln() - (1.0 + 1.0 / p) * k.ln() - g.ln()).exp(),
                eta: g - 1.0,
            }
        }
        _ => {
            // just below the critical curve: Υ = C̃(Θ)(1 − p c A Θ^{c−1}/|k|)
            let leading = trajectory_law(params, Law::CriticalCurve, End::Origin);
            let c = leading.exponent;
            OriginSeries {
                leading,
                kappa: -p * c * leading.constant / (-k),
                eta: c - 1.0,
            }
        }
    }
}
