//! Wave profile `φ(z)` from a phase-plane trajectory.
//!
//! Along the wave `z = m∫₀^φ Θ^{m−1} Υ(Θ)^{−1/p} dΘ`. Below the seed radius Θ₀
//! the integral is taken in closed form against the origin expansion; above
//! it the integrand is integrated in `u = ln Θ` interval by interval.

use crate::error::{Constraint, Error, Result};
use crate::interp::{hermite, locate, pchip_slopes};
use crate::model::{ModelParams, OriginSeries};
use crate::phase_plane::Trajectory;
use crate::quad;

const QUAD_INTERVALS: usize = 200;

/// `λ − 1 = m − 1 − q/p`, the exponent of the travel-time integrand at the
/// origin, checked to be integrable (`> −1`).
pub fn origin_integrand_exponent(params: &ModelParams) -> Result<f64> {
    let q = crate::model::origin_series(params).leading.exponent;
    let e = params.m() - 1.0 - q / params.p();
    if e > -1.0 {
        Ok(e)
    } else {
        Err(Error::domain_with(
            Constraint::BadInput,
            format!("travel-time integrand ~ Θ^{e} is not integrable at the origin"),
        ))
    }
}

/// Closed-form `m∫₀^θ Θ^{m−1}(AΘ^q(1 + κΘ^η))^{−1/p} dΘ` to first order in κ.
fn head_travel(m: f64, p: f64, series: &OriginSeries, theta: f64) -> f64 {
    let a = series.leading.constant;
    let lambda = m - series.leading.exponent / p;
    let base = theta.powf(lambda) / lambda;
    let corr = if series.kappa == 0.0 {
        0.0
    } else {
        series.kappa / p * theta.powf(lambda + series.eta) / (lambda + series.eta)
    };
    m * a.powf(-1.0 / p) * (base - corr)
}

/// Cumulative travel time `z(Θ)` along a trajectory.
#[derive(Debug, Clone)]
pub struct TravelMap<'a> {
    traj: &'a Trajectory,
    series: OriginSeries,
    qtol: f64,
    /// `z` at each node of the trajectory
    cumulative: Vec<f64>,
}

impl<'a> TravelMap<'a> {
    pub fn new(traj: &'a Trajectory, qtol: f64) -> Result<Self> {
        let params = traj.params();
        origin_integrand_exponent(params)?;
        if !(qtol > 0.0 && qtol < 1.0) {
            return Err(Error::domain_with(Constraint::BadInput, format!("qtol = {qtol}")));
        }
        let series = *traj.seed().ok_or(Error::domain_with(
            Constraint::BadInput,
            "travel time needs the singular trajectory",
        ))?;
        let mut map = TravelMap {
            traj,
            series,
            qtol,
            cumulative: Vec::with_capacity(traj.len()),
        };
        let us = traj.ln_thetas();
        let mut z = head_travel(params.m(), params.p(), &series, us[0].exp());
        map.cumulative.push(z);
        for i in 1..us.len() {
            z += map.piece(us[i - 1], us[i])?;
            map.cumulative.push(z);
        }
        Ok(map)
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.traj
    }

    /// `z(Θ₀)`: end of the closed-form head.
    pub fn z_seed(&self) -> f64 {
        self.cumulative[0]
    }

    /// `z(Θ_max)`, the largest reachable travel time.
    pub fn z_max(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// `m Θ^m Υ^{−1/p}`, the integrand in `u = ln Θ`.
    fn integrand(&self, u: f64) -> f64 {
        let params = self.traj.params();
        let y = self.traj.eval_log(u).map_or(f64::NAN, |v| v.0);
        params.m() * (params.m() * u - y / params.p()).exp()
    }

    fn piece(&self, u0: f64, u1: f64) -> Result<f64> {
        quad::integrate(
            |u| self.integrand(u),
            u0,
            u1,
            0.1 * self.qtol,
            0.0,
            QUAD_INTERVALS,
        )
    }

    /// `z` at `u = ln φ`.
    pub fn z_at_log(&self, u: f64) -> Result<f64> {
        let us = self.traj.ln_thetas();
        if u <= us[0] {
            let params = self.traj.params();
            return Ok(head_travel(params.m(), params.p(), &self.series, u.exp()));
        }
        let last = us[us.len() - 1];
        if u > last {
            return Err(Error::RangeExceeded {
                value: u.exp(),
                lo: 0.0,
                hi: last.exp(),
            });
        }
        let i = locate(us, u);
        Ok(self.cumulative[i] + self.piece(us[i], u)?)
    }

    pub fn z_at(&self, phi: f64) -> Result<f64> {
        if phi <= 0.0 {
            return Ok(0.0);
        }
        self.z_at_log(phi.ln())
    }

    /// `ln φ` with `z(φ) = z`, by bisection with secant steps in `ln φ`.
    pub fn solve_log_phi(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::domain_with(Constraint::BadInput, format!("z = {z}")));
        }
        if z > self.z_max() {
            return Err(Error::RangeExceeded {
                value: z,
                lo: 0.0,
                hi: self.z_max(),
            });
        }
        let us = self.traj.ln_thetas();
        let (mut lo, mut hi);
        if z <= self.z_seed() {
            hi = us[0];
            lo = hi - 1.0;
            while self.z_at_log(lo)? > z {
                hi = lo;
                lo -= 2.0 * (hi - lo).max(1.0);
                if lo < -2000.0 {
                    return Err(Error::RangeExceeded {
                        value: z,
                        lo: self.z_seed(),
                        hi: self.z_max(),
                    });
                }
            }
        } else {
            let i = self.cumulative.partition_point(|&c| c < z).clamp(1, us.len() - 1);
            lo = us[i - 1];
            hi = us[i];
        }
        let mut f_lo = self.z_at_log(lo)? - z;
        let mut f_hi = self.z_at_log(hi)? - z;
        if f_lo >= 0.0 {
            return Ok(lo);
        }
        if f_hi <= 0.0 {
            return Ok(hi);
        }
        let u_tol = 0.1 * self.qtol;
        for iter in 0..200 {
            // alternate secant and bisection so the bracket always shrinks
            let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            let mid = if iter % 3 != 2 && secant > lo && secant < hi {
                secant
            } else {
                0.5 * (lo + hi)
            };
            let f_mid = self.z_at_log(mid)? - z;
            if f_mid == 0.0 || f_mid.abs() <= 0.01 * self.qtol * z {
                return Ok(mid);
            }
            if f_mid < 0.0 {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
            if hi - lo <= u_tol {
                break;
            }
        }
        Ok(lo - f_lo * (hi - lo) / (f_hi - f_lo))
    }
}

/// `z = m∫₀^φ Θ^{m−1} Υ^{−1/p} dΘ` for `φ = phi_target`.
pub fn travel_time(traj: &Trajectory, phi_target: f64, qtol: f64) -> Result<f64> {
    TravelMap::new(traj, qtol)?.z_at(phi_target)
}

/// Sampled profile, extended by zero for `z ≤ 0`.
#[derive(Debug, Clone)]
pub struct Profile {
    params: ModelParams,
    zs: Vec<f64>,
    phis: Vec<f64>,
    z_max: f64,
    // log–log interpolation data over the positive samples
    ln_z: Vec<f64>,
    ln_phi: Vec<f64>,
    slopes: Vec<f64>,
}

impl Profile {
    fn new(params: ModelParams, zs: Vec<f64>, phis: Vec<f64>, z_max: f64) -> Self {
        let (ln_z, ln_phi): (Vec<f64>, Vec<f64>) = zs
            .iter()
            .zip(&phis)
            .filter(|(z, phi)| **z > 0.0 && **phi > 0.0)
            .map(|(z, phi)| (z.ln(), phi.ln()))
            .unzip();
        let slopes = pchip_slopes(&ln_z, &ln_phi);
        Profile {
            params,
            zs,
            phis,
            z_max,
            ln_z,
            ln_phi,
            slopes,
        }
    }

    /// Wraps externally sampled values; `zs` strictly increasing, `phis`
    /// non-negative.
    pub fn from_samples(params: ModelParams, zs: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        if zs.len() != phis.len() || zs.is_empty() {
            return Err(Error::domain_with(Constraint::BadInput, "sample lengths differ"));
        }
        if zs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain_with(
                Constraint::BadInput,
                "z grid must be strictly increasing",
            ));
        }
        if phis.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::domain_with(Constraint::BadInput, "phi must be non-negative"));
        }
        let z_max = zs[zs.len() - 1];
        Ok(Profile::new(params, zs, phis, z_max))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn zs(&self) -> &[f64] {
        &self.zs
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    /// Largest reachable `z` for the underlying trajectory.
    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// `φ(z)`: zero for `z ≤ 0`, log–log interpolation between samples and a
    /// power law below the first positive sample.
    pub fn phi_at(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        let n = self.ln_z.len();
        let top = self.zs.last().copied().unwrap_or(0.0);
        if n == 0 || z > top {
            return Err(Error::RangeExceeded {
                value: z,
                lo: 0.0,
                hi: top,
            });
        }
        let lz = z.ln();
        if n == 1 || lz <= self.ln_z[0] {
            if n == 1 {
                return Ok(self.ln_phi[0].exp());
            }
            return Ok((self.ln_phi[0] + self.slopes[0] * (lz - self.ln_z[0])).exp());
        }
        let i = locate(&self.ln_z, lz);
        let (v, _) = hermite(
            self.ln_z[i],
            self.ln_z[i + 1],
            self.ln_phi[i],
            self.ln_phi[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            lz,
        );
        Ok(v.exp())
    }
}

/// Geometric z-grid over `[z(Θ₀), 0.99·z(Θ_max)]`.
pub fn default_z_grid(map: &TravelMap<'_>, points: usize) -> Vec<f64> {
    geometric_grid(map.z_seed(), 0.99 * map.z_max(), points)
}

/// `n` points spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `φ` on `z_grid` (non-decreasing), zero for `z ≤ 0`.
pub fn reconstruct_profile(traj: &Trajectory, z_grid: &[f64], qtol: f64) -> Result<Profile> {
    let map = TravelMap::new(traj, qtol)?;
    reconstruct_with(&map, z_grid)
}

pub fn reconstruct_with(map: &TravelMap<'_>, z_grid: &[f64]) -> Result<Profile> {
    if z_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain_with(
            Constraint::BadInput,
            "z grid must be strictly increasing",
        ));
    }
    let phis = z_grid
        .iter()
        .map(|&z| {
            if z <= 0.0 {
                Ok(0.0)
            } else {
                map.solve_log_phi(z).map(f64::exp)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Profile::new(
        *map.trajectory().params(),
        z_grid.to_vec(),
        phis,
        map.z_max(),
    ))
}

/// Flux `(φ^m)'(z) = Υ(φ(z))^{1/p}`, zero for `z ≤ 0`.
pub fn profile_flux(traj: &Trajectory, profile: &Profile, z: f64) -> Result<f64> {
    let phi = profile.phi_at(z)?;
    flux_at_phi(traj, phi)
}

/// `Υ(φ)^{1/p}`, zero at `φ = 0`.
pub fn flux_at_phi(traj: &Trajectory, phi: f64) -> Result<f64> {
    if phi <= 0.0 {
        return Ok(0.0);
    }
    Ok(traj.eval(phi)?.powf(1.0 / traj.params().p()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{theorem1_asymptote, End};
    use crate::phase_plane::solve_trajectory;

    fn params(m: f64, p: f64, beta: f64, b: f64, k: f64) -> ModelParams {
        ModelParams::new(m, p, beta, b, k).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn separable_travel_time() {
        let pp = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let traj = solve_trajectory(&pp, 10.0, 1e-10).unwrap();
        let z = travel_time(&traj, 1.0, 1e-10).unwrap();
        assert!(rel(z, 2.0 / 1.6f64.sqrt() / 0.75) < 1e-9);
        assert!(rel(z, 2.108185) < 1e-6);
        assert_eq!(travel_time(&traj, 0.0, 1e-10).unwrap(), 0.0);
        assert!(travel_time(&traj, 1e-30, 1e-10).unwrap() < 1e-20);
        assert!(matches!(
            travel_time(&traj, 11.0, 1e-10),
            Err(Error::RangeExceeded { .. })
        ));
    }

    #[test]
    fn closed_form_head_on_critical_law() {
        // Υ = 2Θ^{1.5}, m = 2, p = 1: z = 2√φ
        let pp = params(2.0, 1.0, 0.5, 1.0, -1.0);
        let series = OriginSeries {
            kappa: 0.0,
            ..crate::model::origin_series(&pp)
        };
        assert_eq!(series.leading.constant, 2.0);
        let z = head_travel(2.0, 1.0, &series, 0.01);
        assert!(rel(z, 0.2) < 1e-14);
    }

    #[test]
    fn integrability_holds_in_every_origin_regime() {
        for pp in [
            params(2.0, 1.0, 0.5, 1.0, 1.0),
            params(2.0, 1.0, 0.5, 1.0, -1.0),
            params(0.8, 2.0, 0.3, 1.0, 1.0),
            params(0.8, 2.0, 0.3, 1.0, -1.0),
            params(3.0, 0.6, 0.2, 2.0, 0.0),
        ] {
            assert!(origin_integrand_exponent(&pp).unwrap() > -1.0);
        }
    }

    #[test]
    fn separable_profile() {
        let pp = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let traj = solve_trajectory(&pp, 10.0, 1e-10).unwrap();
        let c_star = 0.225f64.powf(2.0 / 3.0);
        let prof = reconstruct_profile(&traj, &[-1.0, 0.0, 0.5, 1.0, 2.108185], 1e-10).unwrap();
        assert_eq!(prof.phis()[0], 0.0);
        assert_eq!(prof.phis()[1], 0.0);
        assert!(rel(prof.phis()[2], c_star * 0.5f64.powf(4.0 / 3.0)) < 1e-9);
        assert!(rel(prof.phis()[3], c_star) < 1e-9);
        assert!((prof.phis()[3] - 0.369932).abs() < 1e-6);
        assert!((prof.phis()[4] - 1.0).abs() < 1e-6);
        let flux = profile_flux(&traj, &prof, 2.108185).unwrap();
        assert!((flux - 1.264911).abs() < 1e-5);
        assert_eq!(profile_flux(&traj, &prof, 0.0).unwrap(), 0.0);
        assert_eq!(profile_flux(&traj, &prof, -3.0).unwrap(), 0.0);
        assert!(profile_flux(&traj, &prof, 1e-8).unwrap() < 1e-5);
        // interpolation between samples stays close to the law
        assert!(rel(prof.phi_at(0.75).unwrap(), c_star * 0.75f64.powf(4.0 / 3.0)) < 1e-4);
    }

    #[test]
    fn round_trip_and_monotonicity() {
        for (m, p, beta, k) in [
            (2.0, 1.0, 0.5, 1.0),
            (2.0, 1.0, 0.5, -1.0),
            (0.8, 2.0, 0.3, 1.0),
            (0.8, 2.0, 0.3, -1.0),
        ] {
            let pp = params(m, p, beta, 1.0, k);
            let qtol = 1e-9;
            let traj = solve_trajectory(&pp, 1e6, 1e-10).unwrap();
            let map = TravelMap::new(&traj, qtol).unwrap();
            let grid = default_z_grid(&map, 200);
            let prof = reconstruct_with(&map, &grid).unwrap();
            for (z, phi) in prof.zs().iter().zip(prof.phis()) {
                let back = map.z_at(*phi).unwrap();
                assert!(rel(back, *z) <= 10.0 * qtol, "{k}: {z} -> {phi} -> {back}");
            }
            assert!(prof.phis().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn wave_profile_origin_constant() {
        // φ ≈ 0.5 z near the front for k = 1
        let pp = params(2.0, 1.0, 0.5, 1.0, 1.0);
        let law = theorem1_asymptote(&pp, End::Origin).unwrap();
        let traj = solve_trajectory(&pp, 10.0, 1e-10).unwrap();
        let map = TravelMap::new(&traj, 1e-10).unwrap();
        let z = map.z_seed();
        let phi = map.solve_log_phi(z).unwrap().exp();
        assert!(rel(phi, law.eval(z)) < 1e-3);
    }

    #[test]
    fn out_of_range_requests() {
        let pp = params(2.0, 1.0, 0.5, 1.0, 0.0);
        let traj = solve_trajectory(&pp, 10.0, 1e-10).unwrap();
        let map = TravelMap::new(&traj, 1e-10).unwrap();
        assert!(matches!(
            reconstruct_with(&map, &[map.z_max() * 1.01]),
            Err(Error::RangeExceeded { .. })
        ));
        let prof = reconstruct_with(&map, &[1.0, 2.0]).unwrap();
        assert!(matches!(prof.phi_at(2.5), Err(Error::RangeExceeded { .. })));
    }
}
