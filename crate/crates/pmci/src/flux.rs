//! Perona-Malik type fluxes `sigma(p) = a(p^2) p`, their branch inverses and
//! the monotone continuation `sigma*` used to build the classical seed.

use crate::error::{Error, Result};
use crate::numerics::{bisect, sampled_min};
use serde::{Deserialize, Serialize};

/// Piecewise polynomial diffusivity on `[0, end]`, continued by
/// `a(x) = a(end) * end / x` beyond the last break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTable {
    /// Left endpoints of the pieces, starting at 0 and increasing.
    pub breaks: Vec<f64>,
    /// Right endpoint of the last piece.
    pub end: f64,
    /// Coefficients per piece in powers of `x - breaks[i]`.
    pub coeffs: Vec<Vec<f64>>,
}

impl PiecewiseTable {
    fn piece(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b <= x).saturating_sub(1)
    }

    fn derivs(&self, x: f64) -> (f64, f64, f64) {
        if x > self.end {
            let (ae, _, _) = self.derivs(self.end);
            let k = ae * self.end;
            return (k / x, -k / (x * x), 2.0 * k / (x * x * x));
        }
        let i = self.piece(x);
        let y = x - self.breaks[i];
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &c in self.coeffs[i].iter().rev() {
            d2 = d2 * y + 2.0 * d1;
            d1 = d1 * y + v;
            v = v * y + c;
        }
        (v, d1, d2)
    }

    fn validate(&self) -> Result<()> {
        if self.breaks.is_empty() || self.breaks[0] != 0.0 {
            return Err(Error::Config("table breaks must start at 0".into()));
        }
        if self.breaks.len() != self.coeffs.len() {
            return Err(Error::Config("one coefficient list per break is required".into()));
        }
        if self.breaks.windows(2).any(|w| w[1] <= w[0]) || *self.breaks.last().unwrap() >= self.end {
            return Err(Error::Config("table breaks must increase strictly below `end`".into()));
        }
        if self.coeffs.iter().any(|c| c.is_empty() || c.iter().any(|x| !x.is_finite())) {
            return Err(Error::Config("table coefficients must be finite and non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusivity {
    /// a(x) = 1 / (1 + x)
    Rational,
    /// a(x) = exp(-x / 2)
    Gaussian,
    /// a(x) = c; not admissible, kept as a linear reference.
    Constant { value: f64 },
    Table(PiecewiseTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxModel {
    pub diffusivity: Diffusivity,
    pub label: String,
    pub lambda_bar: Option<f64>,
}

impl FluxModel {
    pub fn rational() -> FluxModel {
        FluxModel {
            diffusivity: Diffusivity::Rational,
            label: "pm_rational".into(),
            lambda_bar: None,
        }
    }

    pub fn gaussian() -> FluxModel {
        FluxModel {
            diffusivity: Diffusivity::Gaussian,
            label: "pm_gaussian".into(),
            lambda_bar: None,
        }
    }

    pub fn constant(value: f64) -> FluxModel {
        FluxModel {
            diffusivity: Diffusivity::Constant { value },
            label: "constant".into(),
            lambda_bar: None,
        }
    }

    pub fn by_name(name: &str) -> Result<FluxModel> {
        match name {
            "pm_rational" => Ok(FluxModel::rational()),
            "pm_gaussian" => Ok(FluxModel::gaussian()),
            other => Err(Error::Config(format!("unknown flux model `{other}`"))),
        }
    }

    /// Loads a tabulated diffusivity and rejects it unless condition
    /// checks pass.
    pub fn from_table_json(label: &str, json: &str) -> Result<FluxModel> {
        let table: PiecewiseTable = serde_json::from_str(json)?;
        table.validate()?;
        let model = FluxModel {
            diffusivity: Diffusivity::Table(table),
            label: label.into(),
            lambda_bar: None,
        };
        let report = check_admissible(&model, 4000);
        if !report.pass {
            let failed: Vec<String> = report
                .clauses
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("{} (worst at p={:.6})", c.name, c.worst_point))
                .collect();
            return Err(Error::Config(format!(
                "tabulated flux `{label}` is not admissible: {}",
                failed.join(", ")
            )));
        }
        Ok(model)
    }

    /// `(a, a', a'')` at `x >= 0`.
    pub fn a_derivs(&self, x: f64) -> (f64, f64, f64) {
        match &self.diffusivity {
            Diffusivity::Rational => {
                let r = 1.0 / (1.0 + x);
                (r, -r * r, 2.0 * r * r * r)
            }
            Diffusivity::Gaussian => {
                let e = (-0.5 * x).exp();
                (e, -0.5 * e, 0.25 * e)
            }
            Diffusivity::Constant { value } => (*value, 0.0, 0.0),
            Diffusivity::Table(t) => t.derivs(x),
        }
    }

    pub fn a(&self, x: f64) -> f64 {
        self.a_derivs(x).0
    }

    pub fn a_prime(&self, x: f64) -> f64 {
        self.a_derivs(x).1
    }

    pub fn sigma(&self, p: f64) -> f64 {
        self.a(p * p) * p
    }

    pub fn sigma_prime(&self, p: f64) -> f64 {
        let (a, da, _) = self.a_derivs(p * p);
        a + 2.0 * p * p * da
    }

    pub fn sigma_second(&self, p: f64) -> f64 {
        let p2 = p * p;
        let (_, da, dda) = self.a_derivs(p2);
        6.0 * p * da + 4.0 * p * p2 * dda
    }

    pub fn peak(&self) -> f64 {
        self.sigma(1.0)
    }
}

pub fn eval_sigma(model: &FluxModel, p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::Domain(format!("flux evaluated at non-finite p={p}")));
    }
    Ok(model.sigma(p))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClauseResult {
    pub name: &'static str,
    pub pass: bool,
    pub worst_point: f64,
    pub worst_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub pass: bool,
    pub clauses: Vec<ClauseResult>,
}

/// Samples the sign structure of `2p a'(p) + a(p)`, positivity of `a` and
/// the decay of `sigma`.
pub fn check_admissible(model: &FluxModel, sample_count: usize) -> AdmissibilityReport {
    let n = sample_count.max(10);
    let p_hi = 50.0;
    let expr = |p: f64| {
        let (a, da, _) = model.a_derivs(p);
        2.0 * p * da + a
    };
    let grid: Vec<f64> = (0..n).map(|k| p_hi * k as f64 / (n - 1) as f64).collect();

    let mut positive = ClauseResult { name: "a positive", pass: true, worst_point: 0.0, worst_value: f64::INFINITY };
    let mut below = ClauseResult { name: "expression positive on [0,1)", pass: true, worst_point: 0.0, worst_value: f64::INFINITY };
    let mut above = ClauseResult { name: "expression negative on (1,inf)", pass: true, worst_point: 0.0, worst_value: f64::NEG_INFINITY };
    for &p in &grid {
        let a = model.a(p);
        if a < positive.worst_value {
            positive.worst_value = a;
            positive.worst_point = p;
        }
        let e = expr(p);
        if p < 1.0 && e < below.worst_value {
            below.worst_value = e;
            below.worst_point = p;
        }
        if p > 1.0 && e > above.worst_value {
            above.worst_value = e;
            above.worst_point = p;
        }
    }
    positive.pass = positive.worst_value > 0.0;
    below.pass = below.worst_value > 0.0;
    above.pass = above.worst_value < 0.0;

    let at_one = expr(1.0);
    let peak = ClauseResult { name: "expression vanishes at 1", pass: at_one.abs() <= 1e-9, worst_point: 1.0, worst_value: at_one };

    let far: Vec<f64> = [1e2, 1e3, 1e4, 1e6].iter().map(|&p| model.sigma(p)).collect();
    let decays = far.windows(2).all(|w| w[1] <= w[0]) && far[3] < 1e-2 * model.peak();
    let decay = ClauseResult { name: "sigma decays to zero", pass: decays, worst_point: 1e6, worst_value: far[3] };

    let clauses = vec![positive, below, peak, above, decay];
    AdmissibilityReport { pass: clauses.iter().all(|c| c.pass), clauses }
}

/// The two roots `p- < 1 < p+` of `sigma(p) = q` for `0 < q < sigma(1)`.
pub fn invert_sigma(model: &FluxModel, q: f64) -> Result<(f64, f64)> {
    let peak = model.peak();
    if !(q > 0.0 && q < peak) {
        return Err(Error::Range(format!("q={q} outside (0, {peak})")));
    }
    let f = |p: f64| model.sigma(p) - q;
    let lower = bisect(f, 0.0, 1.0, 1e-16);
    let mut cap = 2.0;
    let mut doublings = 0;
    while model.sigma(cap) >= q {
        cap *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Range(format!("no upper bracket for q={q}; flux does not decay")));
        }
    }
    let upper = bisect(f, 1.0, cap, 1e-16 * cap);
    Ok((lower, upper))
}

pub fn lambda_minus(model: &FluxModel, lambda: f64) -> Result<f64> {
    if !(lambda > 1.0) {
        return Err(Error::Domain(format!("lambda={lambda} must exceed 1")));
    }
    invert_sigma(model, model.sigma(lambda)).map(|(lo, _)| lo)
}

/// `sup |sigma'|` over `[-2 lambda, 2 lambda]`.
pub fn lipschitz_sigma(model: &FluxModel, lambda: f64) -> f64 {
    let neg = |p: f64| -model.sigma_prime(p).abs();
    let (_, v) = sampled_min(neg, 0.0, 2.0 * lambda, 4097, 1e-12);
    -v
}

/// A strictly increasing odd flux.
pub trait MonotoneFlux {
    fn value(&self, p: f64) -> f64;
    fn slope(&self, p: f64) -> f64;
}

/// `sigma(p) = k p`.
#[derive(Debug, Clone, Copy)]
pub struct LinearFlux {
    pub slope: f64,
}

impl MonotoneFlux for LinearFlux {
    fn value(&self, p: f64) -> f64 {
        self.slope * p
    }
    fn slope(&self, _p: f64) -> f64 {
        self.slope
    }
}

/// Monotone continuation of `sigma` beyond `lambda-`: equal to `sigma` on
/// `[0, lambda-]`, a quintic blend on `[lambda-, lambda- + width]`, affine
/// with slope `c_lo` afterwards, extended as an odd function.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaStar {
    pub base: FluxModel,
    pub lambda: f64,
    pub bound: f64,
    pub lambda_minus: f64,
    /// Knots of the continuation: `lambda-` and the end of the blend.
    pub knots: [f64; 2],
    /// Blend coefficients in powers of `p - lambda-`.
    pub coeffs: [f64; 6],
    pub c_lo: f64,
    pub c_hi: f64,
    tail_value: f64,
}

impl SigmaStar {
    fn eval_pos(&self, p: f64) -> (f64, f64) {
        if p <= self.knots[0] {
            (self.base.sigma(p), self.base.sigma_prime(p))
        } else if p <= self.knots[1] {
            let x = p - self.knots[0];
            let (mut v, mut d) = (0.0, 0.0);
            for &c in self.coeffs.iter().rev() {
                d = d * x + v;
                v = v * x + c;
            }
            (v, d)
        } else {
            (self.tail_value + self.c_lo * (p - self.knots[1]), self.c_lo)
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        if p < 0.0 {
            -self.eval_pos(-p).0
        } else {
            self.eval_pos(p).0
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        self.eval_pos(p.abs()).1
    }
}

impl MonotoneFlux for SigmaStar {
    fn value(&self, p: f64) -> f64 {
        self.eval(p)
    }
    fn slope(&self, p: f64) -> f64 {
        self.derivative(p)
    }
}

/// Power-basis coefficients of the blend whose derivative is
/// `c + (x-w)^3 (alpha + beta (x-w))`, starting at `v0`.
fn blend_coeffs(v0: f64, c: f64, alpha: f64, beta: f64, w: f64) -> [f64; 6] {
    // alpha/4 ((x-w)^4 - w^4) + beta/5 ((x-w)^5 + w^5)
    let mut k = [0.0; 6];
    k[0] = v0;
    k[1] = c;
    let binom4 = [1.0, 4.0, 6.0, 4.0, 1.0];
    let binom5 = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
    for j in 1..=4 {
        k[j] += alpha / 4.0 * binom4[j] * (-w).powi(4 - j as i32);
    }
    for j in 1..=5 {
        k[j] += beta / 5.0 * binom5[j] * (-w).powi(5 - j as i32);
    }
    k
}

pub fn build_sigma_star(model: &FluxModel, lambda: f64, bound: f64) -> Result<SigmaStar> {
    let lm = lambda_minus(model, lambda)?;
    if !(lm < bound && bound < lambda) {
        return Err(Error::Domain(format!(
            "need lambda-={lm} < M={bound} < lambda={lambda}"
        )));
    }
    let d0 = model.sigma_prime(lm);
    let d1 = model.sigma_second(lm);
    let v0 = model.sigma(lm);
    let margin = model.sigma(bound) - v0;
    let formula = model.sigma_prime(0.5 * lm).min(d0) / 4.0;
    let c = formula.min(margin / (4.0 * (bound - lm)));
    let delta = d0 - c;
    if !(c > 0.0 && delta > 0.0 && margin > 0.0) {
        return Err(Error::Construction(format!(
            "degenerate continuation data at lambda-={lm}: slope {d0}, floor {c}, margin {margin}"
        )));
    }
    let w_mono = if d1 < 0.0 { 4.0 * delta / -d1 } else { f64::INFINITY };
    let rise = |w: f64| c * w + 0.4 * delta * w + 0.05 * d1 * w * w;

    let mut target = 0.5 * margin;
    for _ in 0..40 {
        let w_cap = w_mono.min(4.0 * lambda) * (1.0 - 1e-9);
        let w = if rise(w_cap) <= target {
            w_cap
        } else {
            bisect(|w| rise(w) - target, 0.0, w_cap, 1e-15)
        };
        let alpha = (-4.0 * delta - d1 * w) / w.powi(3);
        let beta = (-3.0 * delta - d1 * w) / w.powi(4);
        let coeffs = blend_coeffs(v0, c, alpha, beta, w);
        let mut star = SigmaStar {
            base: model.clone(),
            lambda,
            bound,
            lambda_minus: lm,
            knots: [lm, lm + w],
            coeffs,
            c_lo: c,
            c_hi: 0.0,
            tail_value: 0.0,
        };
        star.tail_value = star.eval_pos(lm + w).0;
        match verify_sigma_star(&mut star) {
            Ok(()) => return Ok(star),
            Err(_) if target > 1e-6 * margin => target *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Construction("continuation shrinking did not converge".into()))
}

/// Measures `c_hi` and checks the builder invariants on a dense grid.
fn verify_sigma_star(star: &mut SigmaStar) -> Result<()> {
    let n = 10_000;
    let hi = 3.0 * star.lambda;
    let mut slope_max: f64 = 0.0;
    let mut slope_min = f64::INFINITY;
    let mut worst = 0.0;
    let mut prev = star.eval(0.0);
    for k in 1..=n {
        let p = hi * k as f64 / n as f64;
        let v = star.eval(p);
        let fd = (v - prev) * n as f64 / hi;
        slope_max = slope_max.max(fd).max(star.derivative(p));
        if fd < slope_min {
            slope_min = fd;
            worst = p;
        }
        prev = v;
    }
    if slope_min < star.c_lo * (1.0 - 1e-6) {
        return Err(Error::Construction(format!(
            "continuation slope {slope_min} below floor {} near p={worst}",
            star.c_lo
        )));
    }
    star.c_hi = slope_max * (1.0 + 1e-9);

    let sigma_bound = star.base.sigma(star.bound);
    let (lm, bound) = (star.lambda_minus, star.bound);
    for k in 1..=4000 {
        let p = lm + (bound - lm) * k as f64 / 4000.0;
        let v = star.eval(p);
        if v >= sigma_bound {
            return Err(Error::Construction(format!(
                "continuation reaches sigma(M)={sigma_bound} at p={p}"
            )));
        }
        if v >= star.base.sigma(p) {
            return Err(Error::Construction(format!(
                "continuation {v} not below sigma at p={p}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rational_values() {
        let f = FluxModel::rational();
        assert_eq!(eval_sigma(&f, 1.0).unwrap(), 0.5);
        assert!((eval_sigma(&f, 2.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(eval_sigma(&f, 0.0).unwrap(), 0.0);
        assert!(eval_sigma(&f, f64::NAN).is_err());
    }

    #[test]
    fn admissibility_of_builtins_and_heat() {
        assert!(check_admissible(&FluxModel::rational(), 1000).pass);
        assert!(check_admissible(&FluxModel::gaussian(), 1000).pass);
        let heat = check_admissible(&FluxModel::constant(1.0), 1000);
        assert!(!heat.pass);
        let failed = heat.clauses.iter().find(|c| c.name.starts_with("expression negative")).unwrap();
        assert!(!failed.pass);
        assert!(failed.worst_point > 1.0);
    }

    #[test]
    fn admissibility_expression_matches_closed_forms() {
        let r = FluxModel::rational();
        let g = FluxModel::gaussian();
        for k in 0..200 {
            let p = k as f64 * 0.05;
            let (a, da, _) = r.a_derivs(p);
            assert!((2.0 * p * da + a - (1.0 - p) / (1.0 + p).powi(2)).abs() < 1e-14);
            let (a, da, _) = g.a_derivs(p);
            assert!((2.0 * p * da + a - a * (1.0 - p)).abs() < 1e-14);
        }
    }

    #[test]
    fn inversion_examples() {
        let f = FluxModel::rational();
        let (lo, hi) = invert_sigma(&f, 0.4).unwrap();
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        let (lo, hi) = invert_sigma(&f, 0.3).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let (lo, hi) = invert_sigma(&f, 0.5 - 1e-12).unwrap();
        assert!((lo - 1.0).abs() < 1e-5 && (hi - 1.0).abs() < 1e-5);
        assert!(invert_sigma(&f, 0.5).is_err());
        assert!(invert_sigma(&f, 0.0).is_err());
    }

    #[test]
    fn lambda_minus_examples() {
        let f = FluxModel::rational();
        assert!((lambda_minus(&f, 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((lambda_minus(&f, 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((lambda_minus(&f, 1.0 + 1e-6).unwrap() - 1.0).abs() < 1e-4);
        assert!(lambda_minus(&f, 0.9).is_err());
    }

    #[test]
    fn sigma_star_examples() {
        let f = FluxModel::rational();
        let s = build_sigma_star(&f, 2.0, 1.5).unwrap();
        assert_eq!(s.eval(s.lambda_minus), f.sigma(s.lambda_minus));
        assert!(s.eval(1.5) < f.sigma(1.5));
        assert!((f.sigma(1.5) - 0.461_538_461_538).abs() < 1e-9);
        for k in 0..=1000 {
            let p = s.lambda_minus * k as f64 / 1000.0;
            assert!((s.eval(p) - f.sigma(p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sigma_star_spans_both_builtins() {
        for f in [FluxModel::rational(), FluxModel::gaussian()] {
            for (lambda, m) in [(2.2, 2.0), (1.6, 1.5), (3.0, 0.5), (4.0, 3.5)] {
                let lm = lambda_minus(&f, lambda).unwrap();
                if !(lm < m) {
                    continue;
                }
                let s = build_sigma_star(&f, lambda, m).unwrap();
                assert!(s.c_lo > 0.0 && s.c_lo <= s.c_hi);
                assert!(s.eval(m) < f.sigma(m));
            }
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert!((lipschitz_sigma(&FluxModel::rational(), 2.0) - 1.0).abs() < 1e-12);
        assert!((lipschitz_sigma(&FluxModel::gaussian(), 2.0) - 1.0).abs() < 1e-12);
        let oracle = (0..=40000)
            .map(|k| {
                let p = 4.0 * k as f64 / 40000.0;
                ((1.0 - p * p) * (-p * p / 2.0).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(lipschitz_sigma(&FluxModel::gaussian(), 2.0) >= oracle - 1e-12);
    }

    #[test]
    fn table_flux_loads_and_extends() {
        let json = r#"{"breaks":[0.0],"end":200.0,"coeffs":[[1.0,-0.5,0.125,-0.020833333333333332,0.0026041666666666665,-0.00026041666666666666]]}"#;
        // Taylor polynomial of exp(-x/2) is not admissible far out, so it must be rejected.
        assert!(FluxModel::from_table_json("taylor", json).is_err());
        let ok = r#"{"breaks":[0.0,0.5],"end":1.0,"coeffs":[[1.0,-0.3333333333333333],[0.8333333333333334,-0.3333333333333333]]}"#;
        let model = FluxModel::from_table_json("linear_fit", ok).unwrap();
        assert!((model.a(0.2) - (1.0 - 0.2 / 3.0)).abs() < 1e-15);
        assert!((model.a(0.7) - (1.0 - 0.7 / 3.0)).abs() < 1e-15);
        assert!((model.sigma(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((model.a(5.0) - model.a(1.0) / 5.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn inversion_round_trip(q in 1e-6f64..0.499_999) {
            let f = FluxModel::rational();
            let (lo, hi) = invert_sigma(&f, q).unwrap();
            prop_assert!(lo < 1.0 && 1.0 < hi);
            prop_assert!((f.sigma(lo) - q).abs() <= 1e-10);
            prop_assert!((f.sigma(hi) - q).abs() <= 1e-10);
        }

        #[test]
        fn gaussian_round_trip(q in 1e-4f64..0.6) {
            let f = FluxModel::gaussian();
            prop_assume!(q < f.peak());
            let (lo, hi) = invert_sigma(&f, q).unwrap();
            prop_assert!((f.sigma(lo) - q).abs() <= 1e-10);
            prop_assert!((f.sigma(hi) - q).abs() <= 1e-10);
        }

        #[test]
        fn lambda_minus_brackets_one(lambda in 1.0001f64..20.0) {
            let lm = lambda_minus(&FluxModel::gaussian(), lambda).unwrap();
            prop_assert!(lm < 1.0 && 1.0 < lambda);
        }

        #[test]
        fn sigma_star_is_odd(p in -10.0f64..10.0) {
            let s = build_sigma_star(&FluxModel::rational(), 2.2, 2.0).unwrap();
            prop_assert_eq!(s.eval(-p), -s.eval(p));
            prop_assert_eq!(s.derivative(-p), s.derivative(p));
        }
    }
}
