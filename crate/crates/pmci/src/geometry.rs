//! Target set `K`, its open relaxation `U`, the intervals `I` and the
//! distance reductions used by the density step.
//!
//! A gradient sample is the 2x2 matrix `[[p, l], [s^m v, q']]` with rows
//! `(v_s, v_t)` and `(phi_s, phi_t)`.

use crate::error::{Error, Result};
use crate::flux::{lambda_minus, FluxModel};
use crate::numerics::golden_min;
use serde::Serialize;

/// Samples per unit of `p` when scanning the graph of `sigma`.
const CURVE_SAMPLES: f64 = 4096.0;

#[derive(Debug, Clone, Serialize)]
pub struct InclusionSpec {
    pub flux: FluxModel,
    pub lambda: f64,
    pub lambda_minus: f64,
    pub l0: f64,
    pub m: u32,
    pub sigma_lambda: f64,
}

impl InclusionSpec {
    pub fn new(flux: FluxModel, lambda: f64, l0: f64, m: u32) -> Result<InclusionSpec> {
        if !(l0 > 0.0) {
            return Err(Error::Domain(format!("l0={l0} must be positive")));
        }
        let lm = lambda_minus(&flux, lambda)?;
        let sigma_lambda = flux.sigma(lambda);
        Ok(InclusionSpec {
            flux,
            lambda,
            lambda_minus: lm,
            l0,
            m,
            sigma_lambda,
        })
    }

    pub fn weight(&self, s: f64) -> f64 {
        s.powi(self.m as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientSample {
    pub p: f64,
    pub l: f64,
    pub r21: f64,
    pub q_prime: f64,
    pub s: f64,
    pub v: f64,
}

impl GradientSample {
    /// Sample with a consistent second row `phi_s = s^m v`.
    pub fn new(spec: &InclusionSpec, s: f64, v: f64, p: f64, l: f64, q_prime: f64) -> GradientSample {
        GradientSample {
            p,
            l,
            r21: spec.weight(s) * v,
            q_prime,
            s,
            v,
        }
    }

    fn check_row(&self, spec: &InclusionSpec) -> Result<()> {
        let target = spec.weight(self.s) * self.v;
        if (self.r21 - target).abs() > 1e-8 * (1.0 + target.abs()) {
            return Err(Error::Inconsistent(format!(
                "phi_s={} but s^m v={} at s={}",
                self.r21, target, self.s
            )));
        }
        Ok(())
    }
}

pub fn interval_i(spec: &InclusionSpec, s: f64, p: f64) -> Option<(f64, f64)> {
    let w = spec.weight(s);
    if p > spec.lambda_minus && p < spec.lambda {
        Some((w * spec.sigma_lambda, w * spec.flux.sigma(p)))
    } else if p < -spec.lambda_minus && p > -spec.lambda {
        Some((w * spec.flux.sigma(p), -w * spec.sigma_lambda))
    } else {
        None
    }
}

pub fn in_u(spec: &InclusionSpec, g: &GradientSample) -> Result<bool> {
    g.check_row(spec)?;
    if !(g.l.abs() < spec.l0) {
        return Ok(false);
    }
    Ok(match interval_i(spec, g.s, g.p) {
        Some((lo, hi)) => g.q_prime > lo && g.q_prime < hi,
        None => false,
    })
}

/// Membership in `K` with tolerance `tol` on the flux row.
pub fn in_k(spec: &InclusionSpec, g: &GradientSample, tol: f64) -> bool {
    g.p.abs() <= spec.lambda
        && g.l.abs() <= spec.l0
        && (g.q_prime - spec.weight(g.s) * spec.flux.sigma(g.p)).abs() <= tol
}

/// Distance from `(p, q)` to the arc `{(x, w sigma(x)) : lo <= x <= hi}`.
fn arc_distance(flux: &FluxModel, w: f64, p: f64, q: f64, lo: f64, hi: f64) -> f64 {
    arc_distance_capped(flux, w, p, q, lo, hi, f64::INFINITY)
}

/// `min(arc distance, cap)`, scanning only abscissae within `cap` of `p`.
fn arc_distance_capped(flux: &FluxModel, w: f64, p: f64, q: f64, lo: f64, hi: f64, cap: f64) -> f64 {
    let f = |x: f64| {
        let dy = w * flux.sigma(x) - q;
        (x - p) * (x - p) + dy * dy
    };
    let x0 = p.clamp(lo, hi);
    let r2 = f(x0);
    if r2 == 0.0 {
        return 0.0;
    }
    let r = r2.sqrt();
    let reach = r.min(cap);
    let a = lo.max(p - reach);
    let b = hi.min(p + reach);
    if b <= a {
        return r.min(cap);
    }
    let n = (((b - a) * CURVE_SAMPLES).ceil() as usize).max(32) + 1;
    let step = (b - a) / (n - 1) as f64;
    let xs = |k: usize| if k == n - 1 { b } else { a + step * k as f64 };
    let vals: Vec<f64> = (0..n).map(|k| f(xs(k))).collect();
    let mut minima: Vec<usize> = (0..n)
        .filter(|&k| (k == 0 || vals[k] <= vals[k - 1]) && (k == n - 1 || vals[k] <= vals[k + 1]))
        .collect();
    minima.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let mut best = r2.min(vals[minima[0]]);
    for &k in minima.iter().take(3) {
        let lo_k = xs(k.saturating_sub(1));
        let hi_k = xs((k + 1).min(n - 1));
        let (_, v) = golden_min(f, lo_k, hi_k, 1e-14);
        best = best.min(v);
    }
    best.sqrt().min(cap)
}

/// Distance from `(p, q')` to the weighted graph `{(x, s^m sigma(x)) : |x| <= lambda}`.
pub fn curve_distance(spec: &InclusionSpec, s: f64, point: (f64, f64)) -> f64 {
    arc_distance(&spec.flux, spec.weight(s), point.0, point.1, -spec.lambda, spec.lambda)
}

/// `min(curve_distance, cap)`; cheaper when `cap` is small.
pub fn curve_distance_capped(spec: &InclusionSpec, s: f64, point: (f64, f64), cap: f64) -> f64 {
    arc_distance_capped(&spec.flux, spec.weight(s), point.0, point.1, -spec.lambda, spec.lambda, cap)
}

pub fn matrix_distance_k(spec: &InclusionSpec, g: &GradientSample) -> Result<f64> {
    if g.l.abs() > spec.l0 {
        return Err(Error::Hypothesis(format!("|l|={} exceeds l0={}", g.l.abs(), spec.l0)));
    }
    Ok(curve_distance(spec, g.s, (g.p, g.q_prime)))
}

/// Distance to `K` for any `l`, with the excess over `l0` added in quadrature.
pub fn distance_k(spec: &InclusionSpec, g: &GradientSample) -> f64 {
    let lex = (g.l.abs() - spec.l0).max(0.0);
    let d = curve_distance(spec, g.s, (g.p, g.q_prime));
    if lex == 0.0 {
        d
    } else {
        d.hypot(lex)
    }
}

fn segment_distance(spec: &InclusionSpec, w: f64, p: f64, q: f64) -> f64 {
    let y = w * spec.sigma_lambda;
    let (lo, hi) = (spec.lambda_minus, spec.lambda);
    let upper = (p - p.clamp(lo, hi)).hypot(q - y);
    let lower = (p - p.clamp(-hi, -lo)).hypot(q + y);
    upper.min(lower)
}

/// Whether `(p, q')` lies in the closure of the planar section of `U`.
fn in_closed_section(spec: &InclusionSpec, w: f64, p: f64, q: f64) -> bool {
    let (p, q) = if p < 0.0 { (-p, -q) } else { (p, q) };
    p >= spec.lambda_minus && p <= spec.lambda && q >= w * spec.sigma_lambda && q <= w * spec.flux.sigma(p)
}

/// Distance, with the `(2,1)` entry ignored, to `K` united with the
/// relative boundary of `U`.
pub fn gauge_d(spec: &InclusionSpec, g: &GradientSample) -> f64 {
    gauge_d_capped(spec, g, f64::INFINITY)
}

/// `min(gauge_d, cap)`.
pub fn gauge_d_capped(spec: &InclusionSpec, g: &GradientSample, cap: f64) -> f64 {
    let w = spec.weight(g.s);
    let lex = (g.l.abs() - spec.l0).max(0.0);
    let planar = curve_distance_capped(spec, g.s, (g.p, g.q_prime), cap).min(segment_distance(spec, w, g.p, g.q_prime));
    let mut d = if lex == 0.0 { planar } else { planar.hypot(lex) };
    if in_closed_section(spec, w, g.p, g.q_prime) {
        d = d.min((g.l.abs() - spec.l0).abs());
    }
    d.min(cap)
}

/// Distance, with the `(2,1)` entry ignored, to the relative boundary of `U`.
pub fn boundary_distance(spec: &InclusionSpec, g: &GradientSample) -> f64 {
    boundary_distance_capped(spec, g, f64::INFINITY)
}

/// `min(boundary_distance, cap)`.
pub fn boundary_distance_capped(spec: &InclusionSpec, g: &GradientSample, cap: f64) -> f64 {
    let w = spec.weight(g.s);
    let (lm, la) = (spec.lambda_minus, spec.lambda);
    let arc = arc_distance_capped(&spec.flux, w, g.p, g.q_prime, lm, la, cap)
        .min(arc_distance_capped(&spec.flux, w, g.p, g.q_prime, -la, -lm, cap));
    let planar = arc.min(segment_distance(spec, w, g.p, g.q_prime));
    let lex = (g.l.abs() - spec.l0).max(0.0);
    let mut d = if lex == 0.0 { planar } else { planar.hypot(lex) };
    if in_closed_section(spec, w, g.p, g.q_prime) {
        d = d.min((g.l.abs() - spec.l0).abs());
    }
    d.min(cap)
}

/// Polylines of the weighted graph, the arc of `K` bounding `U` and the
/// lower segments, for plotting.
pub fn section_polylines(spec: &InclusionSpec, s: f64, samples: usize) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let w = spec.weight(s);
    let n = samples.max(2);
    let graph = (0..n)
        .map(|k| {
            let x = -spec.lambda + 2.0 * spec.lambda * k as f64 / (n - 1) as f64;
            (x, w * spec.flux.sigma(x))
        })
        .collect();
    let arc = |sign: f64| -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let x = spec.lambda_minus + (spec.lambda - spec.lambda_minus) * k as f64 / (n - 1) as f64;
                (sign * x, sign * w * spec.flux.sigma(x))
            })
            .collect()
    };
    let y = w * spec.sigma_lambda;
    vec![
        ("k_graph", graph),
        ("u_arc_plus", arc(1.0)),
        ("u_segment_plus", vec![(spec.lambda_minus, y), (spec.lambda, y)]),
        ("u_arc_minus", arc(-1.0)),
        ("u_segment_minus", vec![(-spec.lambda, -y), (-spec.lambda_minus, -y)]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(m: u32) -> InclusionSpec {
        InclusionSpec::new(FluxModel::rational(), 2.0, 1.5, m).unwrap()
    }

    #[test]
    fn interval_examples() {
        let sp = spec(1);
        let (lo, hi) = interval_i(&sp, 2.0, 1.5).unwrap();
        assert!((lo - 0.8).abs() < 1e-12 && (hi - 0.923_076_923_077).abs() < 1e-9);
        let (lo, hi) = interval_i(&sp, 2.0, -1.5).unwrap();
        assert!((lo + 0.923_076_923_077).abs() < 1e-9 && (hi + 0.8).abs() < 1e-12);
        assert!(interval_i(&sp, 2.0, 0.2).is_none());
    }

    #[test]
    fn membership_examples() {
        let sp = spec(0);
        let g = GradientSample::new(&sp, 1.0, 0.3, 1.5, 0.0, 0.43);
        assert!(in_u(&sp, &g).unwrap());
        let g = GradientSample::new(&sp, 1.0, 0.3, 1.5, 0.0, 0.39);
        assert!(!in_u(&sp, &g).unwrap());
        let g = GradientSample::new(&sp, 1.0, 0.3, 1.5, sp.l0, 0.43);
        assert!(!in_u(&sp, &g).unwrap());
        let mut bad = GradientSample::new(&sp, 1.0, 0.3, 1.5, 0.0, 0.43);
        bad.r21 += 1e-3;
        assert!(matches!(in_u(&sp, &bad), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn curve_distance_examples() {
        let sp = spec(0);
        for x in [-1.9, -0.4, 0.0, 0.77, 2.0] {
            assert!(curve_distance(&sp, 1.0, (x, sp.flux.sigma(x))) < 1e-10);
        }
        let oracle = (0..=400_000)
            .map(|k| {
                let x = -2.0 + 4.0 * k as f64 / 400_000.0;
                x.hypot(sp.flux.sigma(x) - 1.0)
            })
            .fold(f64::INFINITY, f64::min);
        let d = curve_distance(&sp, 1.0, (0.0, 1.0));
        assert!((d - 0.7677).abs() < 1e-4, "distance {d}");
        assert!((d - oracle).abs() < 1e-8);
        assert_eq!(curve_distance(&sp, 1.0, (0.3, 0.9)), curve_distance(&sp, 3.7, (0.3, 0.9)));
    }

    #[test]
    fn matrix_distance_requires_bounded_l() {
        let sp = spec(2);
        let g = GradientSample::new(&sp, 0.8, 1.0, 1.0, 0.0, 0.64 * sp.flux.sigma(1.0));
        assert!(matrix_distance_k(&sp, &g).unwrap() < 1e-10);
        let g = GradientSample::new(&sp, 0.8, 1.0, 1.0, 2.0, 0.0);
        assert!(matches!(matrix_distance_k(&sp, &g), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn gauge_vanishes_on_k_and_boundary() {
        let sp = spec(1);
        let s = 0.7;
        let on_segment = GradientSample::new(&sp, s, 0.0, 1.2, 0.3, s * sp.sigma_lambda);
        assert!(gauge_d(&sp, &on_segment) < 1e-14);
        let on_k = GradientSample::new(&sp, s, 0.0, 0.3, -1.0, s * sp.flux.sigma(0.3));
        assert!(gauge_d(&sp, &on_k) < 1e-10);
        let inside = GradientSample::new(&sp, s, 0.0, 1.2, 0.0, s * 0.45);
        assert!(in_u(&sp, &inside).unwrap());
        let d = gauge_d(&sp, &inside);
        assert!(d > 0.0 && d <= curve_distance(&sp, s, (1.2, s * 0.45)));
        assert!((boundary_distance(&sp, &inside) - d).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn gauge_ignores_v(s in 0.05f64..1.0, p in -3.0f64..3.0, l in -3.0f64..3.0, q in -0.8f64..0.8, v in -10.0f64..10.0) {
            let spec = InclusionSpec::new(FluxModel::rational(), 2.2, 2.0, 2).unwrap();
            let g0 = GradientSample::new(&spec, s, 0.0, p, l, q);
            let g1 = GradientSample::new(&spec, s, v, p, l, q);
            prop_assert_eq!(gauge_d(&spec, &g0), gauge_d(&spec, &g1));
            prop_assert_eq!(distance_k(&spec, &g0), distance_k(&spec, &g1));
        }

        #[test]
        fn gauge_is_lipschitz(s in 0.1f64..0.9, p in -2.5f64..2.5, q in -0.5f64..0.5, h in -1e-3f64..1e-3) {
            let spec = InclusionSpec::new(FluxModel::rational(), 2.2, 2.0, 1).unwrap();
            let g = GradientSample::new(&spec, s, 0.0, p, 0.0, q);
            let moved = GradientSample::new(&spec, s + h, 0.0, p + h, 0.0, q + h);
            let lip = 1.0 + spec.flux.peak();
            let step = (3.0f64).sqrt() * h.abs();
            prop_assert!((gauge_d(&spec, &g) - gauge_d(&spec, &moved)).abs() <= lip * step + 1e-6);
        }

        #[test]
        fn capped_distance_agrees(s in 0.1f64..1.0, p in -2.5f64..2.5, q in -0.6f64..0.6, cap in 1e-3f64..0.5) {
            let spec = InclusionSpec::new(FluxModel::gaussian(), 2.2, 2.0, 1).unwrap();
            let full = curve_distance(&spec, s, (p, q));
            let capped = curve_distance_capped(&spec, s, (p, q), cap);
            prop_assert!((full.min(cap) - capped).abs() <= 1e-9);
        }
    }
}
