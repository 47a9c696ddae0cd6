//! Sampled checks of the existence hypotheses (H1)–(H3).

use super::hamiltonian::Hamiltonian;
use crate::error::{Error, Result};
use crate::gfunc::{delta2_certificate, growth_indices, GrowthSampleSpec};
use crate::linalg;
use crate::sampling::SampleSpec;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct HypothesisOptions {
    /// Points `u` for the pointwise inequalities.
    pub samples: SampleSpec,
    /// Number of equispaced times in `[0, T)`.
    pub n_times: usize,
    /// Rays for the coercivity probe.
    pub n_rays: usize,
    pub ray_radii: Vec<f64>,
    pub growth: GrowthSampleSpec,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            samples: SampleSpec::default().with_points(64).with_radii(1e-2, 1e2),
            n_times: 32,
            n_rays: 24,
            ray_radii: vec![10.0, 100.0, 1000.0],
            growth: GrowthSampleSpec {
                samples: SampleSpec::default().with_points(64),
                ..GrowthSampleSpec::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub t: Option<f64>,
    pub u: Vec<f64>,
    /// How far the inequality is off at `(t, u)`.
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub detail: String,
    pub witness: Option<Witness>,
}

impl HypothesisCheck {
    fn ok(detail: String) -> Self {
        Self { pass: true, detail, witness: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    /// `H(t,u) >= <ξ(t), u>`.
    pub h1: HypothesisCheck,
    /// `H(t,u) <= G(Λu) + γ(t)`.
    pub h2_bound: HypothesisCheck,
    /// `Λ⁻¹ > T max{1, C_{G*}(T)/2}`.
    pub h2_constant: HypothesisCheck,
    /// The index-based replacement of `h2_constant`.
    pub lambda_opt: HypothesisCheck,
    /// `∫H(t, ru) dt` increasing along sampled rays.
    pub h3: HypothesisCheck,
    /// `G(λu) - β(t) <= H(t,u)`; reported, not part of the verdict.
    pub lower_bound: HypothesisCheck,
    pub pass: bool,
}

impl HypothesisReport {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.h1.pass {
            out.push("H1");
        }
        if !self.h2_bound.pass {
            out.push("H2 (growth bound)");
        }
        if !self.h2_constant.pass && !self.lambda_opt.pass {
            out.push("H2 (Lambda constant)");
        }
        if !self.h3.pass {
            out.push("H3");
        }
        out
    }

    pub fn summary(&self) -> String {
        if self.pass {
            return "H1-H3 hold on the sample".into();
        }
        let parts: Vec<String> = [
            ("H1", &self.h1),
            ("H2 (growth bound)", &self.h2_bound),
            ("H2 (Lambda constant)", &self.h2_constant),
            ("lambda_opt", &self.lambda_opt),
            ("H3", &self.h3),
        ]
        .iter()
        .filter(|(_, c)| !c.pass)
        .map(|(name, c)| format!("{name}: {}", c.detail))
        .collect();
        format!("failed {}; {}", self.failures().join(", "), parts.join("; "))
    }
}

/// Checks (H1)–(H3) on samples for period `T`, with `cg_star = C_{G*}(1)`
/// so that `C_{G*}(T) = cg_star / T`.
///
/// The verdict is `H1 ∧ H2-bound ∧ (H2-constant ∨ λ-opt) ∧ H3`.
pub fn check_existence_hypotheses(
    h: &Hamiltonian,
    period: f64,
    cg_star: f64,
    opts: &HypothesisOptions,
) -> Result<HypothesisReport> {
    let cert = h
        .growth()
        .ok_or_else(|| Error::HypothesisFailure("Hamiltonian carries no growth certificate".into()))?;
    if !(period > 0.0) {
        return Err(Error::InvalidParameter(format!("period must be > 0, got {period}")));
    }
    let dim = h.dim();
    let times: Vec<f64> = (0..opts.n_times).map(|k| k as f64 * period / opts.n_times as f64).collect();
    let mut points = opts.samples.points(dim);
    points.push(vec![0.0; dim]);

    let mut h1 = Worst::default();
    let mut h2 = Worst::default();
    let mut lower = Worst::default();
    for &t in &times {
        let xi = (cert.xi)(t);
        let (beta, gamma) = ((cert.beta)(t), (cert.gamma)(t));
        for u in &points {
            let hv = h.value(t, u)?;
            let tol = 1e-10 * (1.0 + hv.abs());
            h1.record(linalg::dot(&xi, u) - hv - tol, t, u);
            let upper = cert.g.evaluate(&linalg::scale(u, cert.big_lambda))? + gamma;
            h2.record(hv - upper - 1e-10 * (1.0 + upper.abs()), t, u);
            let low = cert.g.evaluate(&linalg::scale(u, cert.lambda))? - beta;
            lower.record(low - hv - tol, t, u);
        }
    }
    let sampled = format!("{} times × {}", times.len(), opts.samples.describe());

    let c_t = cg_star / period;
    let bound = period * 1f64.max(c_t / 2.0);
    let inv = 1.0 / cert.big_lambda;
    let h2_constant = HypothesisCheck {
        pass: inv > bound,
        detail: format!("1/Lambda = {inv:.6} vs T max{{1, C(T)/2}} = {bound:.6}"),
        witness: None,
    };

    let lambda_opt = lambda_opt_check(h, period, c_t, opts)?;
    let h3 = coercivity_probe(h, &times, period, opts)?;

    let h1 = h1.into_check("H(t,u) >= <xi(t),u>", &sampled);
    let h2_bound = h2.into_check("H(t,u) <= G(Lambda u) + gamma(t)", &sampled);
    let lower_bound = lower.into_check("G(lambda u) - beta(t) <= H(t,u)", &sampled);
    let pass = h1.pass && h2_bound.pass && (h2_constant.pass || lambda_opt.pass) && h3.pass;
    Ok(HypothesisReport { h1, h2_bound, h2_constant, lambda_opt, h3, lower_bound, pass })
}

/// `K⁻¹ min{(TΛ)^{-β-ε}, (TΛ)^{-α+ε}} >= C_{G*}(T)/2`, valid when `G` and
/// `G*` are globally Δ₂.
fn lambda_opt_check(h: &Hamiltonian, period: f64, c_t: f64, opts: &HypothesisOptions) -> Result<HypothesisCheck> {
    let cert = h.growth().expect("checked by caller");
    let g_star = cert.g.conjugate()?;
    let d_g = delta2_certificate(&cert.g, opts.samples.r_max, opts.samples.n_points)?;
    let d_gs = delta2_certificate(&g_star, opts.samples.r_max, opts.samples.n_points)?;
    if !(d_g.global && d_gs.global) {
        return Ok(HypothesisCheck {
            pass: false,
            detail: "G or G* is not globally Delta2 on the sample".into(),
            witness: None,
        });
    }
    let idx = growth_indices(&cert.g, &opts.growth)?;
    let s = period * cert.big_lambda;
    let e = idx.epsilon;
    let lhs = s.powf(-idx.mo_beta - e).min(s.powf(-idx.mo_alpha + e)) / idx.k_epsilon;
    let rhs = c_t / 2.0;
    Ok(HypothesisCheck {
        pass: lhs >= rhs,
        detail: format!(
            "K^-1 min{{..}} = {lhs:.6} vs C(T)/2 = {rhs:.6} (alpha {:.4}, beta {:.4}, K {:.4})",
            idx.mo_alpha, idx.mo_beta, idx.k_epsilon
        ),
        witness: None,
    })
}

fn coercivity_probe(h: &Hamiltonian, times: &[f64], period: f64, opts: &HypothesisOptions) -> Result<HypothesisCheck> {
    let mut dirs = opts.samples.directions(h.dim());
    dirs.truncate(opts.n_rays.max(1));
    for d in &dirs {
        let mut prev = f64::NEG_INFINITY;
        for &r in &opts.ray_radii {
            let u = linalg::scale(d, r);
            let mut s = 0.0;
            for &t in times {
                s += h.value(t, &u)?;
            }
            let integral = s * period / times.len() as f64;
            if !(integral > prev) {
                return Ok(HypothesisCheck {
                    pass: false,
                    detail: format!("integral of H along ray stops growing at radius {r} ({integral:.6e})"),
                    witness: Some(Witness { t: None, u, gap: prev - integral }),
                });
            }
            prev = integral;
        }
    }
    Ok(HypothesisCheck::ok(format!(
        "integral of H increases over radii {:?} on {} rays",
        opts.ray_radii,
        dirs.len()
    )))
}

#[derive(Default)]
struct Worst {
    gap: f64,
    at: Option<(f64, Vec<f64>)>,
}

impl Worst {
    /// Records a violation when `gap > 0`.
    fn record(&mut self, gap: f64, t: f64, u: &[f64]) {
        if gap > self.gap || (gap > 0.0 && self.at.is_none()) {
            self.gap = gap;
            self.at = Some((t, u.to_vec()));
        }
    }

    fn into_check(self, what: &str, sampled: &str) -> HypothesisCheck {
        match self.at {
            None => HypothesisCheck::ok(format!("{what} on {sampled}")),
            Some((t, u)) => HypothesisCheck {
                pass: false,
                detail: format!("{what} violated by {:.3e} at t = {t:.4}", self.gap),
                witness: Some(Witness { t: Some(t), u, gap: self.gap }),
            },
        }
    }
}
