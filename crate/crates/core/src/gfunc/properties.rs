//! Sampling-based checks of the structural properties of G-functions.

use super::GFunction;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::SampleSpec;
use serde::{Deserialize, Serialize};

/// `|<∇G(u), u> - G(u) - G*(∇G(u))|`.
pub fn young_identity_residual(g: &GFunction, g_star: &GFunction, u: &[f64]) -> Result<f64> {
    let grad = g.gradient(u)?;
    let lhs = linalg::dot(&grad, u);
    Ok((lhs - g.evaluate(u)? - g_star.evaluate(&grad)?).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateBoundReport {
    pub samples: usize,
    /// Smallest `RHS - LHS` over the sample.
    pub min_slack: f64,
    pub max_slack: f64,
    pub violated_at: Option<Vec<f64>>,
}

/// Checks `G*(∇H(u)) <= G(ru)/(r-1) + r(β+γ)/(r-1)` on `samples`.
///
/// `h` returns `(H(u), ∇H(u))`. The sandwich `-β <= H <= G + γ` is verified
/// first; a sample where it fails is reported as a hypothesis failure.
pub fn conjugate_gradient_bound(
    h: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    g: &GFunction,
    g_star: &GFunction,
    beta: f64,
    gamma: f64,
    r: f64,
    samples: &[Vec<f64>],
) -> Result<ConjugateBoundReport> {
    if !(r > 1.0) {
        return Err(Error::InvalidParameter(format!("r must exceed 1, got {r}")));
    }
    let mut pts: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
    let origin = vec![0.0; g.dim()];
    pts.push(&origin);

    let mut evaluated = Vec::with_capacity(pts.len());
    for u in &pts {
        let (hv, hg) = h(u)?;
        let gv = g.evaluate(u)?;
        let tol = 1e-12 * (1.0 + gv.abs() + hv.abs());
        if hv < -beta - tol || hv > gv + gamma + tol {
            return Err(Error::HypothesisFailure(format!(
                "-beta <= H <= G + gamma fails at u = {u:?} (H = {hv}, G = {gv})"
            )));
        }
        evaluated.push(hg);
    }

    let mut report = ConjugateBoundReport {
        samples: pts.len(),
        min_slack: f64::INFINITY,
        max_slack: f64::NEG_INFINITY,
        violated_at: None,
    };
    for (u, hg) in pts.iter().zip(evaluated) {
        let lhs = g_star.evaluate(&hg)?;
        let ru = linalg::scale(u, r);
        let rhs = g.evaluate(&ru)? / (r - 1.0) + r / (r - 1.0) * (beta + gamma);
        let slack = rhs - lhs;
        if slack < report.min_slack {
            report.min_slack = slack;
        }
        report.max_slack = report.max_slack.max(slack);
        if slack < -1e-10 * (1.0 + rhs.abs()) && report.violated_at.is_none() {
            report.violated_at = Some(u.to_vec());
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta2Certificate {
    /// Smallest sampled constant; `G(2u) <= c G(u) + 1` on the sample.
    pub c: f64,
    /// `G(2u) <= c G(u)` held on the sample and the ratio stayed bounded
    /// as the radius grew.
    pub global: bool,
    /// `sup G(2u)/G(u)` on the sample.
    pub ratio_sup: f64,
    /// The ratio kept increasing in the outermost radius decade.
    pub growing: bool,
    pub verified_on: String,
}

/// Samples the Δ₂ condition `G(2u) <= C G(u) + 1` at radii up to
/// `sample_radius`.
pub fn delta2_certificate(
    g: &GFunction,
    sample_radius: f64,
    n_samples: usize,
) -> Result<Delta2Certificate> {
    let spec = SampleSpec::default()
        .with_points(n_samples)
        .with_radii(1e-3_f64.min(sample_radius / 10.0), sample_radius);
    let mut rows = Vec::new();
    for u in spec.points(g.dim()) {
        let gu = g.evaluate(&u)?;
        if !(gu > 0.0) {
            continue;
        }
        let g2 = g.evaluate(&linalg::scale(&u, 2.0))?;
        rows.push((linalg::norm(&u), gu, g2));
    }
    let ratio = |(_, gu, g2): &(f64, f64, f64)| if g2.is_finite() { g2 / gu } else { f64::INFINITY };
    let ratio_sup = rows.iter().map(ratio).fold(0.0, f64::max);
    let c_plus = rows
        .iter()
        .map(|(_, gu, g2)| if g2.is_finite() { (g2 - 1.0) / gu } else { f64::INFINITY })
        .fold(0.0, f64::max);

    // Growth detection: compare the outermost decade with everything below.
    let outer = sample_radius / 10.0;
    let inner_sup = rows.iter().filter(|r| r.0 < outer).map(ratio).fold(0.0, f64::max);
    let outer_sup = rows.iter().filter(|r| r.0 >= outer).map(ratio).fold(0.0, f64::max);
    let growing = !ratio_sup.is_finite() || outer_sup > 1.05 * inner_sup;

    let global = !growing;
    Ok(Delta2Certificate {
        c: if global { ratio_sup } else { c_plus },
        global,
        ratio_sup,
        growing,
        verified_on: spec.describe(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub symplectic: bool,
    /// Largest `|G*(Ju) - G(u)| / (1 + |G(u)|)`.
    pub worst_residual: f64,
    pub worst_at: Option<Vec<f64>>,
}

/// Tests `G*(Ju) = G(u)` on sampled `u`.
pub fn symplectic_test(
    g: &GFunction,
    g_star: &GFunction,
    spec: &SampleSpec,
    tol: f64,
) -> Result<SymplecticReport> {
    if g.dim() % 2 != 0 {
        return Err(Error::InvalidParameter("symplectic test needs an even dimension".into()));
    }
    let mut worst = 0.0;
    let mut worst_at = None;
    for u in spec.points(g.dim()) {
        let gu = g.evaluate(&u)?;
        let res = (g_star.evaluate(&linalg::apply_j(&u))? - gu).abs() / (1.0 + gu.abs());
        if res > worst || worst_at.is_none() {
            worst = res;
            worst_at = Some(u);
        }
    }
    Ok(SymplecticReport { symplectic: worst < tol, worst_residual: worst, worst_at })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiSymplecticSearch {
    pub samples: SampleSpec,
    pub k_min: f64,
    pub k_max: f64,
    pub k_steps: usize,
    pub c_max: f64,
    /// Period used for the embedding constant `K (C T + 1)`, which is also
    /// the quantity minimised over the grid.
    pub period: f64,
}

impl Default for SemiSymplecticSearch {
    fn default() -> Self {
        Self {
            samples: SampleSpec::default(),
            k_min: 1.0,
            k_max: 1e6,
            k_steps: 121,
            c_max: 1e6,
            period: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSymplecticCertificate {
    pub k: f64,
    pub c: f64,
    pub verified_on: String,
    /// Set when no `(K, C)` within the search bounds worked.
    pub violated_at: Option<Vec<f64>>,
    /// `K (C T + 1)` for the search period.
    pub embedding_constant: f64,
}

/// `K (C T + 1)`.
pub fn embedding_constant(k: f64, c: f64, period: f64) -> f64 {
    k * (c * period + 1.0)
}

/// Searches `(K, C)` with `G*(Ju) <= G(Ku) + C` on samples.
pub fn semi_symplectic_certificate(
    g: &GFunction,
    g_star: &GFunction,
    search: &SemiSymplecticSearch,
) -> Result<SemiSymplecticCertificate> {
    if g.dim() % 2 != 0 {
        return Err(Error::InvalidParameter("semi-symplectic test needs an even dimension".into()));
    }
    let pts = search.samples.points(g.dim());
    let lhs: Vec<f64> = pts
        .iter()
        .map(|u| g_star.evaluate(&linalg::apply_j(u)))
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64, f64)> = None;
    let mut worst_fail: Option<(f64, Vec<f64>)> = None;
    let steps = search.k_steps.max(2);
    let ratio = (search.k_max / search.k_min).ln();
    for i in 0..steps {
        let k = search.k_min * (ratio * i as f64 / (steps - 1) as f64).exp();
        let mut c: f64 = 0.0;
        let mut arg = None;
        for (u, l) in pts.iter().zip(&lhs) {
            let gap = l - g.evaluate(&linalg::scale(u, k))?;
            if gap > 1e-10 * (1.0 + l.abs()) && gap > c {
                c = gap;
                arg = Some(u.clone());
            }
        }
        if c > search.c_max {
            if worst_fail.as_ref().is_none_or(|(w, _)| c < *w) {
                worst_fail = arg.map(|a| (c, a));
            }
            continue;
        }
        let e = embedding_constant(k, c, search.period);
        if best.is_none_or(|(_, _, b)| e < b * (1.0 - 1e-12)) {
            best = Some((k, c, e));
        }
    }
    Ok(match best {
        Some((k, c, e)) => SemiSymplecticCertificate {
            k,
            c,
            verified_on: search.samples.describe(),
            violated_at: None,
            embedding_constant: e,
        },
        None => SemiSymplecticCertificate {
            k: search.k_max,
            c: f64::INFINITY,
            verified_on: search.samples.describe(),
            violated_at: worst_fail.map(|(_, u)| u),
            embedding_constant: f64::INFINITY,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSampleSpec {
    pub samples: SampleSpec,
    /// `ε` in the two-sided power bound.
    pub epsilon: f64,
    /// Exponent range `k` of `t = 2^k` for the lower index.
    pub alpha_range: (i32, i32),
    pub beta_range: (i32, i32),
}

impl Default for GrowthSampleSpec {
    fn default() -> Self {
        Self {
            samples: SampleSpec::default(),
            epsilon: 0.0,
            alpha_range: (-20, -10),
            beta_range: (10, 20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthIndices {
    pub simonenko_p: f64,
    pub simonenko_q: f64,
    pub mo_alpha: f64,
    pub mo_beta: f64,
    pub epsilon: f64,
    /// Sampled `K` with `K⁻¹ min{t^{β+ε}, t^{α-ε}} G(u) <= G(tu) <= K max{…} G(u)`.
    pub k_epsilon: f64,
    pub sample_spec: String,
}

/// Simonenko and Matuszewska–Orlicz indices by sampling.
pub fn growth_indices(g: &GFunction, spec: &GrowthSampleSpec) -> Result<GrowthIndices> {
    let pts = spec.samples.points(g.dim());
    let mut gvals = Vec::with_capacity(pts.len());
    let (mut sp, mut sq) = (f64::INFINITY, 0.0_f64);
    for u in &pts {
        let gu = g.evaluate(u)?;
        gvals.push(gu);
        if !(gu > 0.0) {
            continue;
        }
        let ratio = linalg::dot(u, &g.gradient(u)?) / gu;
        if ratio.is_finite() {
            sp = sp.min(ratio);
            sq = sq.max(ratio);
        } else {
            sq = f64::INFINITY;
        }
    }

    let sup_ratio = |t: f64| -> Result<f64> {
        let mut s = 0.0_f64;
        for (u, gu) in pts.iter().zip(&gvals) {
            if *gu > 0.0 {
                s = s.max(g.evaluate(&linalg::scale(u, t))? / gu);
            }
        }
        Ok(s)
    };
    let slope = |(k0, k1): (i32, i32)| -> Result<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in k0..=k1 {
            let t = 2f64.powi(k);
            let h = sup_ratio(t)?;
            if !(h > 0.0) || !h.is_finite() {
                return Ok(if k > 0 { f64::INFINITY } else { 0.0 });
            }
            xs.push(t.ln());
            ys.push(h.ln());
        }
        Ok(ls_slope(&xs, &ys))
    };
    let mo_alpha = slope(spec.alpha_range)?;
    let mo_beta = slope(spec.beta_range)?;

    let eps = spec.epsilon;
    let mut k_eps = 1.0_f64;
    if mo_alpha.is_finite() && mo_beta.is_finite() {
        for k in spec.alpha_range.0..=spec.beta_range.1 {
            let t = 2f64.powi(k);
            let (a, b) = (t.powf(mo_beta + eps), t.powf(mo_alpha - eps));
            let (lo, hi) = (a.min(b), a.max(b));
            for (u, gu) in pts.iter().zip(&gvals) {
                if !(*gu > 0.0) {
                    continue;
                }
                let r = g.evaluate(&linalg::scale(u, t))? / gu;
                k_eps = k_eps.max(r / hi).max(lo / r);
            }
        }
    } else {
        k_eps = f64::INFINITY;
    }

    Ok(GrowthIndices {
        simonenko_p: sp,
        simonenko_q: sq,
        mo_alpha,
        mo_beta,
        epsilon: eps,
        k_epsilon: k_eps,
        sample_spec: spec.samples.describe(),
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub zero_at_origin: bool,
    pub positive: bool,
    pub even: bool,
    pub convex: bool,
    pub superlinear: bool,
    pub verified_on: String,
}

impl AxiomReport {
    pub fn holds(&self) -> bool {
        self.zero_at_origin && self.positive && self.even && self.convex && self.superlinear
    }
}

/// Samples the G-function axioms: `G(0) = 0`, positivity, evenness,
/// midpoint convexity and growth of `G(ru)/(r|u|)` along rays.
pub fn check_axioms(g: &GFunction, spec: &SampleSpec) -> Result<AxiomReport> {
    let d = g.dim();
    let zero_at_origin = g.evaluate(&vec![0.0; d])?.abs() == 0.0;
    let pts = spec.points(d);
    let mut positive = true;
    let mut even = true;
    let mut convex = true;
    for (i, u) in pts.iter().enumerate() {
        let gu = g.evaluate(u)?;
        positive &= gu > 0.0;
        let gm = g.evaluate(&linalg::scale(u, -1.0))?;
        even &= (gu - gm).abs() <= 1e-12 * (1.0 + gu.abs());
        let w = &pts[(i * 7 + 3) % pts.len()];
        let mid = linalg::scale(&linalg::add(u, w), 0.5);
        let gw = g.evaluate(w)?;
        convex &= g.evaluate(&mid)? <= 0.5 * (gu + gw) * (1.0 + 1e-12) + 1e-300;
    }
    let mut superlinear = true;
    for dir in spec.directions(d).iter().take(50) {
        let mut prev = 0.0;
        for k in 0..8 {
            let r = 10f64.powi(k - 2);
            let q = g.evaluate(&linalg::scale(dir, r))? / r;
            superlinear &= q > prev;
            prev = q;
        }
    }
    Ok(AxiomReport { zero_at_origin, positive, even, convex, superlinear, verified_on: spec.describe() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfunc::{ClosureFunction, PowerBlock};
    use approx::assert_abs_diff_eq;

    fn pq(p: f64) -> GFunction {
        GFunction::symplectic_power(p, 1).unwrap()
    }

    #[test]
    fn young_identity_examples() {
        let g = GFunction::half_square(2);
        let gs = g.conjugate().unwrap();
        assert!(young_identity_residual(&g, &gs, &[1.0, 2.0]).unwrap() < 1e-12);
        assert_eq!(young_identity_residual(&g, &gs, &[0.0, 0.0]).unwrap(), 0.0);
        let g = GFunction::power(3.0, 1).unwrap();
        let gs = g.conjugate().unwrap();
        assert!(young_identity_residual(&g, &gs, &[2.0]).unwrap() < 1e-8);
    }

    #[test]
    fn conjugate_gradient_bound_cases() {
        let g = GFunction::half_square(2);
        let gs = g.conjugate().unwrap();
        let samples = SampleSpec::default().with_points(50).points(2);
        let h = |u: &[f64]| Ok((g.evaluate(u)?, g.gradient(u)?));
        let rep = conjugate_gradient_bound(h, &g, &gs, 0.0, 0.0, 2.0, &samples).unwrap();
        assert!(rep.violated_at.is_none());
        assert!(rep.min_slack >= 0.0);

        let g3 = GFunction::power(3.0, 1).unwrap();
        let g3s = g3.conjugate().unwrap();
        let h3 = |u: &[f64]| Ok((g3.evaluate(u)?, g3.gradient(u)?));
        let rep = conjugate_gradient_bound(h3, &g3, &g3s, 0.0, 0.0, 2.0, &[vec![1.0]]).unwrap();
        // at u = 1: LHS 2/3, RHS 8/3
        assert!(rep.violated_at.is_none());
        assert_abs_diff_eq!(rep.min_slack, 0.0, epsilon = 1e-12); // origin sample
        assert_abs_diff_eq!(rep.max_slack, 2.0, epsilon = 1e-12);

        // H(0) = -1 < -beta
        let shifted = |u: &[f64]| Ok((g.evaluate(u)? - 1.0, g.gradient(u)?));
        let err = conjugate_gradient_bound(shifted, &g, &gs, 0.5, 0.0, 2.0, &samples);
        assert!(matches!(err, Err(Error::HypothesisFailure(_))));
    }

    #[test]
    fn delta2_examples() {
        let c = delta2_certificate(&GFunction::half_square(2), 1e3, 200).unwrap();
        assert!(c.global);
        assert_abs_diff_eq!(c.c, 4.0, epsilon = 1e-9);
        let c = delta2_certificate(&GFunction::power(3.0, 1).unwrap(), 1e3, 200).unwrap();
        assert!(c.global);
        assert_abs_diff_eq!(c.c, 8.0, epsilon = 1e-9);

        let exp = ClosureFunction::new(
            "exp_square",
            1,
            |u| (u[0] * u[0]).exp_m1(),
            |u| vec![2.0 * u[0] * (u[0] * u[0]).exp()],
        )
        .into_gfunction();
        let c = delta2_certificate(&exp, 10.0, 200).unwrap();
        assert!(!c.global);
        assert!(c.growing);
        assert!(c.c > 1e10);
    }

    #[test]
    fn symplectic_examples() {
        let spec = SampleSpec::default();
        for g in [pq(3.0), pq(1.5), GFunction::half_square(2)] {
            let rep = symplectic_test(&g, &g.conjugate().unwrap(), &spec, 1e-10).unwrap();
            assert!(rep.symplectic, "{}", g.describe());
        }
        let g = GFunction::power_sum(vec![
            PowerBlock::normalized(3.0, 1).unwrap(),
            PowerBlock::normalized(3.0, 1).unwrap(),
        ])
        .unwrap();
        let gs = g.conjugate().unwrap();
        let rep = symplectic_test(&g, &gs, &spec, 1e-10).unwrap();
        assert!(!rep.symplectic);
        // at (1, 1): G*(J u) = 4/3, G(u) = 2/3
        let r = gs.evaluate(&linalg::apply_j(&[1.0, 1.0])).unwrap() - g.evaluate(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn semi_symplectic_examples() {
        let g = pq(3.0);
        let cert =
            semi_symplectic_certificate(&g, &g.conjugate().unwrap(), &SemiSymplecticSearch::default())
                .unwrap();
        assert_eq!(cert.k, 1.0);
        assert_eq!(cert.c, 0.0);
        assert_eq!(cert.embedding_constant, 1.0);

        let g = GFunction::power_sum(vec![
            PowerBlock::normalized(2.0, 1).unwrap(),
            PowerBlock::normalized(4.0, 1).unwrap(),
        ])
        .unwrap();
        let cert =
            semi_symplectic_certificate(&g, &g.conjugate().unwrap(), &SemiSymplecticSearch::default())
                .unwrap();
        assert!(cert.violated_at.is_none());
        assert!(cert.k.is_finite() && cert.c.is_finite());
        assert_eq!(embedding_constant(1.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn growth_index_examples() {
        let spec = GrowthSampleSpec::default();
        let gi = growth_indices(&GFunction::half_square(2), &spec).unwrap();
        for v in [gi.simonenko_p, gi.simonenko_q, gi.mo_alpha, gi.mo_beta] {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(gi.k_epsilon, 1.0, epsilon = 1e-9);

        let gi = growth_indices(&pq(3.0), &spec).unwrap();
        assert_abs_diff_eq!(gi.simonenko_p, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(gi.simonenko_q, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(gi.mo_alpha, 1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(gi.mo_beta, 3.0, epsilon = 1e-6);
        assert!(gi.k_epsilon < 1.0 + 1e-6);
    }

    #[test]
    fn axioms_hold_for_closed_forms() {
        let spec = SampleSpec::default().with_points(100);
        for g in [pq(3.0), GFunction::half_square(3), pq(1.5)] {
            assert!(check_axioms(&g, &spec).unwrap().holds());
        }
    }
}
