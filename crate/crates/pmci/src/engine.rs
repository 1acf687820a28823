//! End-to-end pipeline: seed, iterated density steps, radial lift and the
//! diagnostics of the final field.

use crate::config::RunConfig;
use crate::density::{density_step, stratified_points, DefectReport, PatchedField};
use crate::error::{Error, Result};
use crate::flux::{build_sigma_star, invert_sigma, lipschitz_sigma, FluxModel, SigmaStar};
use crate::geometry::{distance_k, in_k, in_u, InclusionSpec};
use crate::numerics::gauss_legendre;
use crate::parabolic::{
    check_max_principle, select_delta0, select_l0, solve_classical, stream_function, InitialProfile,
    MaxPrincipleReport, StreamReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// `M + epsilon` for `M >= 1`; otherwise one past the upper root of
/// `sigma = sigma(M)`.
pub fn choose_lambda(bound: f64, epsilon: f64, flux: &FluxModel) -> Result<f64> {
    if !(bound > 0.0) {
        return Err(Error::Domain(format!("max slope M={bound} must be positive")));
    }
    if bound >= 1.0 {
        Ok(bound + epsilon)
    } else {
        Ok(invert_sigma(flux, flux.sigma(bound))?.1 + 1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedCheck {
    pub samples: usize,
    pub violations: usize,
    pub strip_violations: usize,
    pub pass: bool,
}

/// Seed field with the data it was built from.
#[derive(Debug, Clone)]
pub struct SeedBundle {
    pub profile: InitialProfile,
    pub bound: f64,
    pub lambda: f64,
    pub field: PatchedField,
    pub stream: StreamReport,
    pub max_principle: MaxPrincipleReport,
    pub check: SeedCheck,
}

/// Seed gradient in `K` or `U` on the working domain and in `K` on the
/// strips, checked at every grid node with `s > 0`.
pub fn check_seed(field: &PatchedField) -> Result<SeedCheck> {
    let seed = &field.seed;
    let spec = &field.spec;
    let domain = field.domain();
    let mut samples = 0;
    let mut violations = 0;
    let mut strip_violations = 0;
    for j in 0..=seed.nt {
        for i in 1..=seed.ns {
            let (s, t) = (seed.s_node(i), seed.t_node(j));
            let (_, _, g) = field.seed_gradient(s, t);
            samples += 1;
            let tol = 1e-12 * (1.0 + g.q_prime.abs());
            let inside = s > domain.s0 && s < domain.s1;
            if inside {
                if !(in_k(spec, &g, tol) || in_u(spec, &g)?) {
                    violations += 1;
                }
            } else if !in_k(spec, &g, tol) {
                strip_violations += 1;
            }
        }
    }
    Ok(SeedCheck {
        samples,
        violations,
        strip_violations,
        pass: violations == 0 && strip_violations == 0,
    })
}

pub fn build_seed(config: &RunConfig, base: &Path) -> Result<SeedBundle> {
    config.validate()?;
    let flux = FluxModel::by_name(&config.flux).map_err(|e| e.in_stage("flux"))?;
    let profile = config.initial.load(config.radius, base).map_err(|e| e.in_stage("initial"))?;
    let bound = profile.max_slope();
    let lambda = choose_lambda(bound, config.epsilon, &flux).map_err(|e| e.in_stage("lambda"))?;
    let star = build_sigma_star(&flux, lambda, bound).map_err(|e| e.in_stage("sigma_star"))?;
    let mut sol = solve_classical(&star, &profile, config.n, config.radius, config.horizon, config.ns, config.nt)
        .map_err(|e| e.in_stage("parabolic"))?;
    let stream = stream_function(&mut sol, &star);
    let max_principle = check_max_principle(&sol);
    sol.delta0 = select_delta0(&sol, star.lambda_minus, config.strip_cap).map_err(|e| e.in_stage("strip"))?;
    sol.l0 = select_l0(&sol);
    let spec = InclusionSpec::new(flux, lambda, sol.l0, config.n - 1).map_err(|e| e.in_stage("inclusion"))?;
    let field = PatchedField::new(sol, star, spec).map_err(|e| e.in_stage("field"))?;
    let check = check_seed(&field).map_err(|e| e.in_stage("seed_check"))?;
    if !check.pass {
        return Err(Error::Inconsistent(format!(
            "seed gradient leaves K or U at {} working and {} strip nodes",
            check.violations, check.strip_violations
        ))
        .in_stage("seed_check"));
    }
    Ok(SeedBundle {
        profile,
        bound,
        lambda,
        field,
        stream,
        max_principle,
        check,
    })
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: SeedBundle,
    pub field: PatchedField,
    pub reports: Vec<DefectReport>,
    pub diagnostics: Diagnostics,
}

/// Density steps `first..first + count` on `field`.
pub fn iterate(
    config: &RunConfig,
    mut field: PatchedField,
    first: usize,
    count: usize,
) -> Result<(PatchedField, Vec<DefectReport>)> {
    let options = config.density_options();
    let mut reports = Vec::with_capacity(count);
    for k in first..first + count {
        let (next, report) =
            density_step(&field, config.epsilon_at(k), config.eta(k), &options).map_err(|e| e.in_stage("density"))?;
        field = next;
        reports.push(report);
    }
    Ok((field, reports))
}

pub fn run_pipeline(config: &RunConfig, base: &Path) -> Result<RunResult> {
    let seed = build_seed(config, base)?;
    let (field, reports) = iterate(config, seed.field.clone(), 0, config.iterations)?;
    let diagnostics = diagnostics(&seed, &field, &reports, config).map_err(|e| e.in_stage("diagnostics"))?;
    Ok(RunResult {
        seed,
        field,
        reports,
        diagnostics,
    })
}

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: u32) -> f64 {
    // 2 pi^{n/2} / Gamma(n/2) by the half-integer recursion.
    let pi = std::f64::consts::PI;
    let half_gamma = |k: u32| -> f64 {
        let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (pi.sqrt(), 0.5) };
        while 2.0 * x < k as f64 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * pi.powf(n as f64 / 2.0) / half_gamma(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSample {
    pub u: f64,
    pub du: Vec<f64>,
}

/// `u(x, t) = v(|x|, t)` and `Du = v_s(|x|, t) x / |x|`.
pub fn lift_radial(field: &PatchedField, points: &[(Vec<f64>, f64)]) -> Result<Vec<RadialSample>> {
    points
        .iter()
        .map(|(x, t)| {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r > field.seed.radius * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("|x|={r} exceeds R={}", field.seed.radius)));
            }
            let fp = field.sample(r, *t)?;
            let du = if r == 0.0 {
                vec![0.0; x.len()]
            } else {
                x.iter().map(|c| fp.grad.p * c / r).collect()
            };
            Ok(RadialSample { u: fp.v, du })
        })
        .collect()
}

/// `s^{2j} t^k (1 - (s/R)^2)^3 64 (t (T - t) / T^2)^3`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestFunction {
    pub j: u32,
    pub k: u32,
    pub radius: f64,
    pub horizon: f64,
}

impl TestFunction {
    /// Value and partial derivatives `(xi, xi_s, xi_t)`.
    pub fn eval(&self, s: f64, t: f64) -> (f64, f64, f64) {
        let (r, h) = (self.radius, self.horizon);
        let (j, k) = (self.j as i32, self.k as i32);
        let a = s.powi(2 * j);
        let da = if j == 0 { 0.0 } else { 2.0 * j as f64 * s.powi(2 * j - 1) };
        let e = 1.0 - (s / r).powi(2);
        let b = e.powi(3);
        let db = -6.0 * s / (r * r) * e * e;
        let c = t.powi(k);
        let dc = if k == 0 { 0.0 } else { k as f64 * t.powi(k - 1) };
        let z = t * (h - t) / (h * h);
        let d = 64.0 * z.powi(3);
        let dd = 192.0 * z * z * (h - 2.0 * t) / (h * h);
        (a * b * c * d, (da * b + a * db) * c * d, a * b * (dc * d + c * dd))
    }

    /// Sampled bound on `|xi_s|`.
    pub fn max_ds(&self) -> f64 {
        let n = 400;
        let mut best: f64 = 0.0;
        for i in 0..=n {
            for k in 0..=n {
                let s = self.radius * i as f64 / n as f64;
                let t = self.horizon * k as f64 / n as f64;
                best = best.max(self.eval(s, t).1.abs());
            }
        }
        best * 1.01
    }
}

pub fn battery(radius: f64, horizon: f64) -> Vec<TestFunction> {
    (0..5)
        .flat_map(|j| (0..2).map(move |k| TestFunction { j, k, radius, horizon }))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub test: TestFunction,
    pub residual: f64,
    pub seed_residual: f64,
    pub quadrature: f64,
    pub defect_term: f64,
    pub bound: f64,
    pub pass: bool,
}

struct QuadPoint {
    weight: f64,
    s: f64,
    t: f64,
    v: f64,
    p: f64,
    seed_v: f64,
    seed_p: f64,
}

fn quadrature_points(field: &PatchedField, order: usize) -> Result<Vec<QuadPoint>> {
    let seed = &field.seed;
    let (x, w) = gauss_legendre(order);
    let (ds, dt) = (seed.ds(), seed.dt());
    let m = field.spec.m as i32;
    let cells: Vec<(usize, usize)> = (0..seed.nt).flat_map(|j| (0..seed.ns).map(move |i| (i, j))).collect();
    let chunks: Vec<Vec<QuadPoint>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut out = Vec::with_capacity(order * order);
            let (s0, t0) = (seed.s_node(i), seed.t_node(j));
            for (a, wa) in x.iter().zip(&w) {
                for (b, wb) in x.iter().zip(&w) {
                    let s = s0 + 0.5 * ds * (1.0 + a);
                    let t = t0 + 0.5 * dt * (1.0 + b);
                    let fp = field.sample(s, t)?;
                    let ss = seed.sample(s, t);
                    out.push(QuadPoint {
                        weight: 0.25 * ds * dt * wa * wb * s.powi(m),
                        s,
                        t,
                        v: fp.v,
                        p: fp.grad.p,
                        seed_v: ss.v,
                        seed_p: ss.vs,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// `int s^m v xi` over one time row by per-cell Gauss quadrature.
fn row_integral<F: Fn(f64) -> f64>(field: &PatchedField, order: usize, f: F, t: f64) -> Result<f64> {
    let seed = &field.seed;
    let (x, w) = gauss_legendre(order);
    let m = field.spec.m as i32;
    let mut total = 0.0;
    for i in 0..seed.ns {
        let s0 = seed.s_node(i);
        for (a, wa) in x.iter().zip(&w) {
            let s = s0 + 0.5 * seed.ds() * (1.0 + a);
            total += 0.5 * seed.ds() * wa * s.powi(m) * field.sample(s, t)?.v * f(s);
        }
    }
    Ok(total)
}

/// Residuals of the weak form `int s^m (v xi_t - sigma(v_s) xi_s)` plus
/// the time-boundary terms, with the bound from the seed residual under
/// the modified flux, the measured defect and the quadrature gap.
pub fn weak_residual(
    field: &PatchedField,
    flux: &FluxModel,
    tests: &[TestFunction],
    orders: (usize, usize),
    defect: f64,
) -> Result<Vec<ResidualReport>> {
    let star: &SigmaStar = &field.sigma_star;
    let coarse = quadrature_points(field, orders.0)?;
    let fine = quadrature_points(field, orders.1)?;
    let horizon = field.seed.horizon;
    let rm = field.seed.radius.powi(field.spec.m as i32);
    let m_sigma = lipschitz_sigma(flux, field.spec.lambda);
    let interior = |pts: &[QuadPoint], xi: &TestFunction, seed: bool| -> f64 {
        pts.iter()
            .map(|q| {
                let (_, xs, xt) = xi.eval(q.s, q.t);
                let (v, f) = if seed {
                    (q.seed_v, star.eval(q.seed_p))
                } else {
                    (q.v, flux.sigma(q.p))
                };
                q.weight * (v * xt - f * xs)
            })
            .sum()
    };
    tests
        .iter()
        .map(|xi| {
            let edge = |order: usize| -> Result<f64> {
                Ok(row_integral(field, order, |s| xi.eval(s, 0.0).0, 0.0)?
                    - row_integral(field, order, |s| xi.eval(s, horizon).0, horizon)?)
            };
            let (e_coarse, e_fine) = (edge(orders.0)?, edge(orders.1)?);
            let q_coarse = interior(&coarse, xi, false) + e_coarse;
            let q_fine = interior(&fine, xi, false) + e_fine;
            let seed_residual = interior(&fine, xi, true) + e_fine;
            let seed_coarse = interior(&coarse, xi, true) + e_coarse;
            let quadrature = (q_fine - q_coarse).abs() + (seed_residual - seed_coarse).abs();
            let defect_term = (1.0 + rm * m_sigma) * xi.max_ds() * defect;
            let bound = seed_residual.abs() + defect_term + quadrature;
            Ok(ResidualReport {
                test: *xi,
                residual: q_fine,
                seed_residual,
                quadrature,
                defect_term,
                bound,
                pass: q_fine.abs() <= bound,
            })
        })
        .collect()
}

/// Monte-Carlo defect of a field on its working domain with three
/// standard errors added.
pub fn defect_upper(field: &PatchedField, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let domain = field.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1A6);
    let (pts, cell) = stratified_points(domain, samples, &mut rng);
    let d: Vec<f64> = pts
        .par_iter()
        .map(|&(s, t)| Ok(distance_k(&field.spec, &field.sample(s, t)?.grad)))
        .collect::<Result<_>>()?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let est = mean * cell * n;
    let se = (var / n).sqrt() * domain.area();
    Ok((est, se))
}

#[derive(Debug, Clone, Serialize)]
pub struct Item {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub lambda: f64,
    pub lambda_minus: f64,
    pub bound: f64,
    pub delta0: f64,
    pub l0: f64,
    pub patch_count: u64,
    pub defect: f64,
    pub defect_std_error: f64,
    pub residuals: Vec<ResidualReport>,
    /// Items (a) to (f) in order.
    pub items: Vec<Item>,
    pub total_displacement: f64,
    pub displacement_budget: f64,
    pub defect_schedule_pass: bool,
    pub pass: bool,
}

impl Diagnostics {
    pub fn item(&self, name: &str) -> Option<&Item> {
        self.items.iter().find(|x| x.name == name)
    }
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a == 0.0 && b == 0.0)
}

pub fn diagnostics(
    seed: &SeedBundle,
    field: &PatchedField,
    reports: &[DefectReport],
    config: &RunConfig,
) -> Result<Diagnostics> {
    let sol = &field.seed;
    let spec = &field.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
    let (defect, defect_se) = defect_upper(field, config.diagnostic_samples, config.seed)?;
    let tests = battery(sol.radius, sol.horizon);
    let residuals = weak_residual(field, &spec.flux, &tests, (2, 4), defect + 3.0 * defect_se)?;
    let worst = residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let slack = residuals
        .iter()
        .map(|r| r.residual.abs() - r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let item_a = Item {
        name: "a_weak_residual",
        value: worst,
        limit: residuals.iter().map(|r| r.bound).fold(0.0, f64::max),
        pass: residuals.iter().all(|r| r.pass),
        detail: format!("largest residual minus its bound: {slack:e}"),
    };

    // (b) strips untouched.
    let mut strip_points: Vec<(f64, f64)> = Vec::new();
    for j in 0..=sol.nt {
        for i in 0..=sol.ns {
            let s = sol.s_node(i);
            if s <= sol.delta0 || s >= sol.radius - sol.delta0 {
                strip_points.push((s, sol.t_node(j)));
            }
        }
    }
    use rand::Rng;
    for _ in 0..config.diagnostic_samples {
        let u: f64 = rng.gen();
        let s = if u < 0.5 { 2.0 * u * sol.delta0 } else { sol.radius - 2.0 * (u - 0.5) * sol.delta0 };
        strip_points.push((s, rng.gen::<f64>() * sol.horizon));
    }
    let mismatches = strip_points
        .par_iter()
        .map(|&(s, t)| {
            let fp = field.sample(s, t)?;
            let (v, phi, g) = field.seed_gradient(s, t);
            let equal = fp.hits.is_empty()
                && same(fp.v, v)
                && same(fp.phi, phi)
                && same(fp.grad.p, g.p)
                && same(fp.grad.l, g.l)
                && same(fp.grad.q_prime, g.q_prime);
            Ok(usize::from(!equal))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let item_b = Item {
        name: "b_strips_equal_seed",
        value: mismatches as f64,
        limit: 0.0,
        pass: mismatches == 0,
        detail: format!("{} points on the two strips", strip_points.len()),
    };

    // (c) initial datum.
    let mut initial_bad = 0usize;
    let mut initial_gap: f64 = 0.0;
    for i in 0..=sol.ns {
        let s = sol.s_node(i);
        let node = sol.v[sol.idx(i, 0)];
        let want = seed.profile.eval(s);
        initial_gap = initial_gap.max((node - want).abs());
        if !same(node, want) {
            initial_bad += 1;
        }
    }
    for k in 0..config.diagnostic_samples.min(4096) {
        let s = sol.radius * (k as f64 + rng.gen::<f64>()) / config.diagnostic_samples.min(4096) as f64;
        let fp = field.sample(s, 0.0)?;
        if !fp.hits.is_empty() || !same(fp.v, sol.sample(s, 0.0).v) {
            initial_bad += 1;
        }
    }
    let item_c = Item {
        name: "c_initial_datum",
        value: initial_bad as f64,
        limit: 0.0,
        pass: initial_bad == 0,
        detail: format!("largest nodal gap to v0: {initial_gap:e}"),
    };

    // (d) Neumann condition.
    let mut neumann: f64 = 0.0;
    for j in 0..=sol.nt {
        neumann = neumann.max(sol.vs[sol.idx(0, j)].abs()).max(sol.vs[sol.idx(sol.ns, j)].abs());
        let fp = field.sample(sol.radius, sol.t_node(j))?;
        if !fp.hits.is_empty() {
            neumann = f64::INFINITY;
        }
    }
    let item_d = Item {
        name: "d_neumann",
        value: neumann,
        limit: 0.0,
        pass: neumann == 0.0,
        detail: "v_s at s=0 and s=R on every time row".into(),
    };

    // (e) almost maximum principle.
    let mut slope = sol.vs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let (pts, _) = stratified_points(field.domain(), config.diagnostic_samples, &mut rng);
    let sampled = pts
        .par_iter()
        .map(|&(s, t)| Ok(field.sample(s, t)?.grad.p.abs()))
        .collect::<Result<Vec<f64>>>()?;
    slope = sampled.into_iter().fold(slope, f64::max);
    let cap = seed.bound + config.epsilon + 1e-6;
    let applies = seed.bound >= 1.0;
    let item_e = Item {
        name: "e_gradient_bound",
        value: slope,
        limit: cap,
        pass: !applies || slope <= cap,
        detail: if applies {
            format!("M={} and epsilon={}", seed.bound, config.epsilon)
        } else {
            format!("M={} < 1, bound not asserted", seed.bound)
        },
    };

    // (f) conservation of mass.
    let order = 4;
    let m0 = row_integral(field, order, |_| 1.0, 0.0)?;
    let scale = {
        let seed_abs = |s: f64| seed.profile.eval(s).abs();
        let (x, w) = gauss_legendre(order);
        let mut acc = 0.0;
        for i in 0..sol.ns {
            for (a, wa) in x.iter().zip(&w) {
                let s = sol.s_node(i) + 0.5 * sol.ds() * (1.0 + a);
                acc += 0.5 * sol.ds() * wa * s.powi(spec.m as i32) * seed_abs(s);
            }
        }
        acc.max(1e-300)
    };
    let rows: Vec<usize> = (0..=sol.nt).collect();
    let drift = rows
        .par_iter()
        .map(|&j| Ok((row_integral(field, order, |_| 1.0, sol.t_node(j))? - m0).abs() / scale))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let item_f = Item {
        name: "f_mass_drift",
        value: drift,
        limit: 1e-4,
        pass: drift <= 1e-4,
        detail: format!("relative to int s^m |v0| ds = {scale:e}, area factor {:e}", sphere_area(sol.n)),
    };

    let total_displacement: f64 = reports.iter().map(|r| r.sup_displacement).sum();
    let displacement_budget: f64 = reports.iter().map(|r| r.eta).sum();
    let defect_schedule_pass = reports.iter().all(|r| r.defect_pass);
    let items = vec![item_a, item_b, item_c, item_d, item_e, item_f];
    let pass = items.iter().all(|x| x.pass)
        && total_displacement <= displacement_budget
        && defect_schedule_pass
        && reports.iter().all(DefectReport::pass);
    Ok(Diagnostics {
        lambda: spec.lambda,
        lambda_minus: spec.lambda_minus,
        bound: seed.bound,
        delta0: sol.delta0,
        l0: spec.l0,
        patch_count: field.patch_count(),
        defect,
        defect_std_error: defect_se,
        residuals,
        items,
        total_displacement,
        displacement_budget,
        defect_schedule_pass,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_rule() {
        let f = FluxModel::rational();
        assert!((choose_lambda(2.0, 0.1, &f).unwrap() - 2.1).abs() < 1e-15);
        let l = choose_lambda(0.5, 0.1, &f).unwrap();
        assert!((l - 3.0).abs() < 1e-9);
        assert!(f.sigma(l) < f.sigma(0.5));
        assert!(choose_lambda(0.0, 0.1, &f).is_err());
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * pi).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * pi).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * pi * pi).abs() < 1e-13);
    }

    #[test]
    fn test_function_derivatives() {
        for xi in battery(1.0, 0.5) {
            for &(s, t) in &[(0.3, 0.1), (0.7, 0.4), (0.5, 0.25)] {
                let h = 1e-6;
                let (_, xs, xt) = xi.eval(s, t);
                let fs = (xi.eval(s + h, t).0 - xi.eval(s - h, t).0) / (2.0 * h);
                let ft = (xi.eval(s, t + h).0 - xi.eval(s, t - h).0) / (2.0 * h);
                assert!((xs - fs).abs() < 1e-6 * (1.0 + fs.abs()));
                assert!((xt - ft).abs() < 1e-6 * (1.0 + ft.abs()));
            }
            assert_eq!(xi.eval(0.4, 0.0).0, 0.0);
            assert_eq!(xi.eval(1.0, 0.2).0, 0.0);
        }
    }
}
