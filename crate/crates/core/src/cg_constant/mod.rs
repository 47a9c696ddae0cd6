//! The optimal constant `C_G(T)` of
//! `∫<J u̇, u> >= -C_G(T) ∫G(T u̇)` for symplectic `G`.
//!
//! Three independent routes are provided: direct ratio minimisation, the
//! constrained problem swept over levels `γ`, and periodic orbits of
//! `u̇ = J∇G(u)`. For `G(u₁,u₂) = |u₁|^p/p + |u₂|^q/q` the closed form
//! `2/T_p` is available as a reference.

mod flow;
mod ratio;

pub use flow::{flow_characterization, orbit_ratio, FlowOptions, FlowResult, PeriodicOrbit};
pub use ratio::{
    estimate_cg_ratio, gamma_sweep, solve_constrained_p, ConstrainedOptions, ConstrainedSolution, RatioOptions,
};

use crate::error::{Error, Result};
use crate::gfunc::{
    growth_indices, semi_symplectic_certificate, symplectic_test, GFunction, GrowthSampleSpec,
    SemiSymplecticSearch,
};
use crate::linalg;
use crate::orlicz::{modular, Trajectory};
use crate::sampling::SampleSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CgMethod {
    RatioMinimization,
    GammaSweep,
    FlowCharacterization,
    ClosedForm,
}

#[derive(Debug, Clone, Serialize)]
pub struct CgEstimate {
    /// `C_G(T)`.
    pub value: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub method: CgMethod,
    #[serde(skip)]
    pub certificate_orbit: Trajectory,
    /// `(γ, A(γ)/γ)`.
    pub gamma_record: Vec<(f64, f64)>,
    /// `2 C_G(2T) / C_G(T)`, which should be 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling_check: Option<f64>,
}

fn check_p(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must be > 1, got {p}")));
    }
    Ok(p / (p - 1.0))
}

/// `T_p = 4π (p-1)^{1/p} / (p sin(π/p))`, the common period of the scalar
/// p-Laplacian oscillator on any level set.
pub fn period_formula(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(4.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin()))
}

/// `T_p = 4 (p-1)^{-1/q} B(1 + 1/q, 1/p)`.
pub fn period_formula_beta(p: f64) -> Result<f64> {
    let q = check_p(p)?;
    let (a, b) = (1.0 + 1.0 / q, 1.0 / p);
    let beta = libm::tgamma(a) * libm::tgamma(b) / libm::tgamma(a + b);
    Ok(4.0 * (p - 1.0).powf(-1.0 / q) * beta)
}

/// `C_G = p sin(π/p) / (2π (p-1)^{1/p})` for `|u₁|^p/p + |u₂|^q/q` on `R²`.
pub fn cg_closed_form(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(p * (PI / p).sin() / (2.0 * PI * (p - 1.0).powf(1.0 / p)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub symplectic: bool,
    pub c1: f64,
    pub c2: f64,
    pub trials: usize,
    pub violations: usize,
    /// Smallest `∫<J u̇,u> / ∫G(T u̇)` seen.
    pub worst_ratio: f64,
    /// Smallest `LHS - RHS`.
    pub worst_slack: f64,
    #[serde(skip)]
    pub offending: Option<Trajectory>,
}

/// `∫<J u̇, u> + C₁ ∫G(T u̇) + C₂` for one trajectory.
pub fn lower_bound_slack(g: &GFunction, u: &Trajectory, c1: f64, c2: f64) -> Result<(f64, f64)> {
    let lhs = u.symplectic_action();
    let gt = modular(g, &u.derivative().scale(u.period()))?;
    Ok((lhs + c1 * gt + c2, if gt > 0.0 { lhs / gt } else { 0.0 }))
}

/// Tests `∫<J u̇,u> >= -C₁ ∫G(T u̇) - C₂` on random band-limited trajectories
/// (modes 1..8, standard normal coefficients, log-uniform amplitudes in
/// `[1e-2, 1e2]`). `(C₁, C₂) = (2/T, 0)` for symplectic `G`, else
/// `(2K/T, KC)` from the semi-symplectic certificate.
pub fn quadratic_form_lower_bound(
    g: &GFunction,
    trials: usize,
    period: f64,
    n: usize,
    seed: u64,
) -> Result<LowerBoundReport> {
    let g_star = g.conjugate()?;
    let sym = symplectic_test(g, &g_star, &SampleSpec::default().with_seed(seed), 1e-8)?.symplectic;
    let (c1, c2) = if sym {
        (2.0 / period, 0.0)
    } else {
        let cert = semi_symplectic_certificate(g, &g_star, &SemiSymplecticSearch { period, ..Default::default() })?;
        if let Some(at) = cert.violated_at {
            return Err(Error::HypothesisFailure(format!("G is not semi-symplectic on the sample (at {at:?})")));
        }
        (2.0 * cert.k / period, cert.k * cert.c)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LowerBoundReport {
        symplectic: sym,
        c1,
        c2,
        trials,
        violations: 0,
        worst_ratio: f64::INFINITY,
        worst_slack: f64::INFINITY,
        offending: None,
    };
    for _ in 0..trials {
        let amp = 10f64.powf(rng.random_range(-2.0..2.0));
        let u = Trajectory::random_band_limited(&mut rng, period, n, g.dim(), 8)?.scale(amp);
        let (slack, ratio) = lower_bound_slack(g, &u, c1, c2)?;
        let tol = 1e-10 * (1.0 + u.symplectic_action().abs());
        report.worst_ratio = report.worst_ratio.min(ratio);
        if slack < report.worst_slack {
            report.worst_slack = slack;
        }
        if slack < -tol {
            report.violations += 1;
            if report.offending.is_none() {
                report.offending = Some(u);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub simonenko_p: f64,
    pub simonenko_q: f64,
    /// Smallest period among the supplied orbits.
    pub inf_period: f64,
    pub lower: f64,
    pub upper: f64,
    /// With one orbit, `inf_period` is only an upper estimate of the true
    /// infimum, so `lower` may overshoot.
    pub single_orbit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contains_estimate: Option<bool>,
}

/// Relative slack of the containment test in [`simonenko_sandwich`].
pub const SANDWICH_TOL: f64 = 1e-5;

/// `p(G) / inf T_u <= C_G <= q(G) / inf T_u`.
pub fn simonenko_sandwich(g: &GFunction, orbits: &[PeriodicOrbit], estimate: Option<f64>) -> Result<SandwichReport> {
    let inf_period = orbits.iter().map(|o| o.period).fold(f64::INFINITY, f64::min);
    if !inf_period.is_finite() {
        return Err(Error::InvalidParameter("sandwich needs at least one orbit".into()));
    }
    let idx = growth_indices(g, &GrowthSampleSpec::default())?;
    let lower = idx.simonenko_p / inf_period;
    let upper = idx.simonenko_q / inf_period;
    // orbit periods from the midpoint flow carry a relative error of about
    // (ωh)²/12, 8e-7 at the default 2048 steps per period
    let tol = SANDWICH_TOL * upper;
    Ok(SandwichReport {
        simonenko_p: idx.simonenko_p,
        simonenko_q: idx.simonenko_q,
        inf_period,
        lower,
        upper,
        single_orbit: orbits.len() == 1,
        estimate,
        contains_estimate: estimate.map(|e| lower - tol <= e && e <= upper + tol),
    })
}

/// Orbits of `|u₁|^p/p + |u₂|^q/q` started on `G = 1` along the `u₁` axis.
pub fn power_orbit_start(p: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    Ok(vec![p.powf(1.0 / p), 0.0])
}

/// `C_G` from one flow orbit, as a [`CgEstimate`].
pub fn flow_estimate(g: &GFunction, u0: &[f64], opts: &FlowOptions) -> Result<(CgEstimate, FlowResult)> {
    let res = flow_characterization(g, u0, opts)?;
    // rescale the orbit to the unit period: u_0(t) = u(T_u t) / T_u
    let t = res.orbit.period;
    let cert = Trajectory::new(1.0, res.orbit.u.n(), res.orbit.u.dim(), linalg::scale(res.orbit.u.values(), 1.0 / t))?;
    Ok((
        CgEstimate {
            value: res.ratio,
            period: 1.0,
            method: CgMethod::FlowCharacterization,
            certificate_orbit: cert,
            gamma_record: Vec::new(),
            scaling_check: None,
        },
        res,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        assert_relative_eq!(period_formula(2.0).unwrap(), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(period_formula_beta(2.0).unwrap(), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(cg_closed_form(2.0).unwrap(), 1.0 / PI, epsilon = 1e-15);
        for p in [1.2, 1.5, 3.0, 4.0, 7.5] {
            let (a, b) = (period_formula(p).unwrap(), period_formula_beta(p).unwrap());
            assert!((a - b).abs() < 1e-12 * a, "p={p}: {a} vs {b}");
            assert_relative_eq!(cg_closed_form(p).unwrap(), 2.0 / a, epsilon = 1e-14);
            let q = p / (p - 1.0);
            assert_relative_eq!(period_formula(q).unwrap(), a, epsilon = 1e-12);
        }
        assert!(period_formula(1.0).is_err());
    }

    #[test]
    fn clockwise_circle_meets_sharp_bound() {
        // (cos t, -sin t) on [0, 2π]: ∫<J u̇,u> = -2π, ∫G(2π u̇) = 4π³
        let g = GFunction::half_square(2);
        let u = Trajectory::from_fn(2.0 * PI, 128, 2, |t| vec![t.cos(), -t.sin()]).unwrap();
        let c_sharp = 1.0 / (PI * 2.0 * PI);
        let (slack, ratio) = lower_bound_slack(&g, &u, c_sharp, 0.0).unwrap();
        assert!(slack.abs() < 1e-10);
        assert_relative_eq!(ratio, -1.0 / (2.0 * PI * PI), epsilon = 1e-12);
    }

    #[test]
    fn constant_trajectory_has_zero_action() {
        let g = GFunction::half_square(2);
        let u = Trajectory::from_fn(1.0, 16, 2, |_| vec![1.0, 2.0]).unwrap();
        assert_eq!(lower_bound_slack(&g, &u, 2.0, 0.5).unwrap().0, 0.5);
    }

    #[test]
    fn quadratic_ratio_is_one_over_pi() {
        let g = GFunction::half_square(2);
        let opts = RatioOptions { n: 64, restarts: 2, ..RatioOptions::default() };
        let est = estimate_cg_ratio(&g, 1.0, &opts).unwrap();
        assert!((est.value - 1.0 / PI).abs() < 1e-6, "{}", est.value);
    }

    #[test]
    fn harmonic_flow() {
        let g = GFunction::half_square(2);
        let r = flow_characterization(&g, &[1.0, 0.5], &FlowOptions::default()).unwrap();
        assert!((r.orbit.period - 2.0 * PI).abs() < 1e-5, "{}", r.orbit.period);
        assert!((r.ratio - 1.0 / PI).abs() < 1e-6);
    }
}
