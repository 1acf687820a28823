use pmci::auxiliary::{build_patch, solve_stilde, verify_patch, Region};
use pmci::config::RunConfig;
use pmci::density::{density_step, PatchedField};
use pmci::engine::{build_seed, run_pipeline};
use pmci::export::export_all;
use pmci::flux::{build_sigma_star, FluxModel, LinearFlux};
use pmci::geometry::{distance_k, gauge_d, in_u, matrix_distance_k, GradientSample, InclusionSpec};
use pmci::numerics::{gauss_legendre, golden_min};
use pmci::parabolic::{check_max_principle, solve_classical, InitialProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, title: &str, out: Outcome) -> bool {
    println!("{} criterion {id} ({title}): {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    out.pass
}

fn stilde_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = rng.gen_range(0.1..3.0);
        let b = rng.gen_range(0.1..3.0);
        let s1 = rng.gen_range(0.05..2.0);
        let s2 = s1 + rng.gen_range(1e-3..1.0);
        let x = solve_stilde(a, b, 0, s1, s2).unwrap();
        worst = worst.max((x - 0.5 * (s1 + s2)).abs());
    }
    let x = solve_stilde(1.0, 1.0, 1, 1.0, 3.0).unwrap();
    let err = (x - (17f64.sqrt() - 2.0)).abs();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-12 && err <= 1e-10 && secs < 1.0,
        detail: format!("midpoint error {worst:e}, sqrt(17)-2 error {err:e}, {secs:.3}s"),
    }
}

/// `int_{s1}^{s2} s^m v~ ds` by Gauss quadrature on each affine piece.
fn moment_by_quadrature(p: &pmci::auxiliary::AuxiliaryPatch, t: f64) -> f64 {
    let g = &p.geometry;
    let bd = g.boundaries(t).unwrap().unwrap();
    let (x, w) = gauss_legendre(8);
    let mut total = 0.0;
    for (lo, hi) in [(bd[0], bd[1]), (bd[1], bd[3]), (bd[3], bd[4])] {
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
            total += 0.5 * (hi - lo) * wi * s.powi(g.m as i32) * g.eval(s, t).unwrap().value;
        }
    }
    total
}

fn patch_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let mut slack: f64 = 0.0;
    let mut moment: f64 = 0.0;
    for k in 0..100 {
        let a = rng.gen_range(0.05..2.0);
        let b = rng.gen_range(0.05..2.0);
        let s01 = rng.gen_range(0.1..1.0);
        let s02 = s01 + rng.gen_range(1e-4..0.05);
        let half = rng.gen_range(1e-3..0.2);
        let m = rng.gen_range(0..4);
        let p = build_patch(a, b, s01, s02, 0.5, half, m).unwrap();
        let rep = verify_patch(&p, 1e-8).unwrap();
        for c in ['a', 'c', 'f', 'g', 'h'] {
            if !rep.item(c).pass {
                failures.push(format!("patch {k} item {c}"));
            }
        }
        let bound = a.max(b) * (1.0 + (s02 / s01).powi(m as i32)) * (s02 - s01) / (2.0 * half);
        let scale = (a + b) / 4.0 * s02.powi(m as i32) * (s02 - s01).powi(2);
        for j in 0..41 {
            let t = 0.5 + half * 0.98 * (2.0 * j as f64 / 40.0 - 1.0);
            moment = moment.max(moment_by_quadrature(&p, t).abs() / scale);
            let bd = p.geometry.boundaries(t).unwrap().unwrap();
            for i in 0..41 {
                let s = bd[0] + (bd[4] - bd[0]) * (i as f64 + 0.5) / 41.0;
                let e = p.geometry.eval(s, t).unwrap();
                if e.region != Region::Outside {
                    slack = slack.max(e.dt.abs() / bound);
                }
            }
        }
    }
    if moment > 1e-8 {
        failures.push(format!("quadrature moment {moment:e}"));
    }
    if slack > 1.01 {
        failures.push(format!("t-derivative ratio {slack}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: failures.is_empty() && secs < 30.0,
        detail: format!(
            "worst |dt|/bound {slack:.4}, quadrature moment {moment:e}, {} failures {:?}, {secs:.2}s",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

/// Minimum over `x` in `[-lambda, lambda]` and `l'` in `[-l0, l0]` of the
/// full Frobenius distance, by dense grids and golden refinement.
fn brute_distance(spec: &InclusionSpec, g: &GradientSample) -> f64 {
    let w = spec.weight(g.s);
    let fx = |x: f64| (g.p - x).powi(2) + (g.q_prime - w * spec.flux.sigma(x)).powi(2);
    let n = 100_000;
    let h = 2.0 * spec.lambda / n as f64;
    let best = (0..=n)
        .map(|k| -spec.lambda + h * k as f64)
        .min_by(|a, b| fx(*a).total_cmp(&fx(*b)))
        .unwrap();
    let (_, vx) = golden_min(fx, (best - h).max(-spec.lambda), (best + h).min(spec.lambda), 1e-15);
    let fl = |l: f64| (g.l - l).powi(2);
    let nl = 2000;
    let hl = 2.0 * spec.l0 / nl as f64;
    let bl = (0..=nl)
        .map(|k| -spec.l0 + hl * k as f64)
        .min_by(|a, b| fl(*a).total_cmp(&fl(*b)))
        .unwrap();
    let (_, vl) = golden_min(fl, (bl - hl).max(-spec.l0), (bl + hl).min(spec.l0), 1e-15);
    let dr = g.r21 - w * g.v;
    (vx.min(fx(best)) + vl + dr * dr).sqrt()
}

fn distance_lemmas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = InclusionSpec::new(FluxModel::rational(), 2.2, 3.0, 1).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = rng.gen_range(0.05..1.0);
        let v = rng.gen_range(-2.0..2.0);
        let g = GradientSample::new(
            &spec,
            s,
            v,
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-0.8..0.8),
        );
        worst = worst.max((matrix_distance_k(&spec, &g).unwrap() - brute_distance(&spec, &g)).abs());
    }
    let mut shifts_equal = true;
    for _ in 0..100 {
        let s = rng.gen_range(0.05..1.0);
        let (p, l, q) = (rng.gen_range(-3.0..3.0), rng.gen_range(-4.0..4.0), rng.gen_range(-0.8..0.8));
        let g0 = GradientSample::new(&spec, s, 0.0, p, l, q);
        let g1 = GradientSample::new(&spec, s, rng.gen_range(-10.0..10.0), p, l, q);
        shifts_equal &= gauge_d(&spec, &g0) == gauge_d(&spec, &g1) && distance_k(&spec, &g0) == distance_k(&spec, &g1);
    }
    let mut disagreements = 0;
    for _ in 0..10_000 {
        let s = rng.gen_range(0.05..1.0);
        let g = GradientSample::new(
            &spec,
            s,
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-2.5..2.5),
            rng.gen_range(-3.5..3.5),
            rng.gen_range(-0.6..0.6),
        );
        let sig = |x: f64| s * x / (1.0 + x * x);
        let (lm, la) = (spec.lambda_minus, spec.lambda);
        let direct = g.l.abs() < spec.l0
            && ((g.p > lm && g.p < la && g.q_prime > sig(la) && g.q_prime < sig(g.p))
                || (g.p < -lm && g.p > -la && g.q_prime > sig(g.p) && g.q_prime < -sig(la)));
        if direct != in_u(&spec, &g).unwrap() {
            disagreements += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-6 && shifts_equal && disagreements == 0,
        detail: format!(
            "brute-force gap {worst:e}, translation invariance {}, membership disagreements {disagreements}",
            if shifts_equal { "exact" } else { "broken" }
        ),
    }
}

fn heat_error(ns: usize, nt: usize) -> f64 {
    let v0 = InitialProfile::from_fn(|s| (PI * s).cos(), 1.0, 4001).unwrap();
    let sol = solve_classical(&LinearFlux { slope: 1.0 }, &v0, 1, 1.0, 0.1, ns, nt).unwrap();
    let mut err: f64 = 0.0;
    for j in 0..=nt {
        for i in 0..=ns {
            let exact = (-PI * PI * sol.t_node(j)).exp() * (PI * sol.s_node(i)).cos();
            err = err.max((sol.v[sol.idx(i, j)] - exact).abs());
        }
    }
    err
}

fn parabolic_seed() -> Outcome {
    let e1 = heat_error(100, 100);
    let e2 = heat_error(200, 200);
    let star = build_sigma_star(&FluxModel::gaussian(), 2.2, 2.0).unwrap();
    let cfg = RunConfig::default();
    let v0 = cfg.initial.load(1.0, Path::new(".")).unwrap();
    let sol = solve_classical(&star, &v0, 2, 1.0, 0.5, 200, 200).unwrap();
    let mp = check_max_principle(&sol);
    let m0 = sol.mass(0);
    let scale: f64 = sol.weights.iter().zip(&sol.v).map(|(w, v)| w * v.abs()).sum();
    let drift = (0..=sol.nt).map(|j| (sol.mass(j) - m0).abs()).fold(0.0, f64::max) / scale;
    Outcome {
        pass: e2 <= 1e-3 && e1 / e2 >= 1.8 && mp.excess <= 1e-6 && drift <= 1e-6,
        detail: format!(
            "heat error {e2:e} at 200x200, refinement factor {:.3}, max-principle excess {:e}, mass drift {drift:e}",
            e1 / e2,
            mp.excess
        ),
    }
}

fn sigma_star_builder() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for flux in [FluxModel::rational(), FluxModel::gaussian()] {
        let star = build_sigma_star(&flux, 2.2, 2.0).unwrap();
        let lm = star.lambda_minus;
        let mut eq: f64 = 0.0;
        let mut slope_lo = f64::INFINITY;
        let mut slope_hi: f64 = 0.0;
        let mut below = true;
        for k in 0..=20_000 {
            let p = lm * k as f64 / 20_000.0;
            eq = eq.max((star.eval(p) - flux.sigma(p)).abs());
        }
        let top = 2.0 * star.lambda;
        let h = 1e-7;
        for k in 0..=20_000 {
            let p = top * k as f64 / 20_000.0;
            let d = (star.eval(p + h) - star.eval((p - h).max(0.0))) / (p + h - (p - h).max(0.0));
            slope_lo = slope_lo.min(d);
            slope_hi = slope_hi.max(d);
        }
        for k in 1..=20_000 {
            let p = lm + (2.0 - lm) * k as f64 / 20_000.0;
            below &= star.eval(p) < flux.sigma(2.0);
        }
        let ok = eq <= 1e-12 && slope_lo >= star.c_lo * (1.0 - 1e-6) && slope_hi <= star.c_hi * (1.0 + 1e-6) && below;
        pass &= ok;
        lines.push(format!(
            "{}: equality {eq:e}, slopes [{slope_lo:.5}, {slope_hi:.5}] in [{:.5}, {:.5}], below sigma(M) {below}",
            flux.label, star.c_lo, star.c_hi
        ));
    }
    Outcome { pass, detail: lines.join("; ") }
}

fn density_contract(field: &PatchedField, cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    let mut options = cfg.density_options();
    options.square_coverage = 0.98;
    let (_, r) = density_step(field, 0.2, 0.05, &options).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let bound = 0.2 * r.domain_area + r.n_max * r.uncovered_area;
    let pass = r.defect_estimate <= bound
        && r.sup_displacement <= 0.05
        && r.inclusion_pass_fraction >= 0.999
        && r.max_vt_in_patches < r.l0
        && r.patch_samples > 0
        && secs <= 300.0;
    Outcome {
        pass,
        detail: format!(
            "defect {:e} <= {:e} (uncovered {:e}, N_max {:.4}), displacement {:e}, inclusion {:.5} of {}, max |v_t| {:.3} < l0 {:.3}, {} patch samples, {secs:.1}s",
            r.defect_estimate,
            bound,
            r.uncovered_area,
            r.n_max,
            r.sup_displacement,
            r.inclusion_pass_fraction,
            r.inclusion_samples,
            r.max_vt_in_patches,
            r.l0,
            r.patch_samples
        ),
    }
}

fn end_to_end(cfg: &RunConfig) -> Outcome {
    let result = run_pipeline(cfg, Path::new(".")).unwrap();
    let d = &result.diagnostics;
    let get = |n: &str| d.item(n).unwrap();
    let (b, c, e, f) = (
        get("b_strips_equal_seed"),
        get("c_initial_datum"),
        get("e_gradient_bound"),
        get("f_mass_drift"),
    );
    let residuals_ok = d.residuals.len() == 10 && d.residuals.iter().all(|r| r.residual.abs() <= r.bound);
    let worst = d
        .residuals
        .iter()
        .map(|r| r.residual.abs() / r.bound)
        .fold(0.0, f64::max);
    let pass = result.reports.len() == 2
        && b.pass
        && c.pass
        && e.value <= cfg.epsilon + d.bound + 1e-6
        && f.value <= 1e-4
        && residuals_ok;
    Outcome {
        pass,
        detail: format!(
            "strip mismatches {}, initial mismatches {}, max |v_s| {:.6} <= {:.6}, mass drift {:e}, residual/bound {:.3}, defects {:?}",
            b.value,
            c.value,
            e.value,
            d.bound + cfg.epsilon + 1e-6,
            f.value,
            worst,
            result.reports.iter().map(|r| r.defect_estimate).collect::<Vec<_>>()
        ),
    }
}

fn determinism() -> Outcome {
    let cfg = RunConfig {
        ns: 60,
        nt: 60,
        iterations: 1,
        samples: 20_000,
        selection_samples: 10_000,
        row_samples: 2_000,
        diagnostic_samples: 4_000,
        floor_levels: 5,
        seed: 7,
        ..RunConfig::default()
    };
    let root = std::env::temp_dir().join(format!("pmci-acceptance-{}", std::process::id()));
    let dirs = [root.join("first"), root.join("second")];
    for dir in &dirs {
        let r = run_pipeline(&cfg, Path::new(".")).unwrap();
        export_all(dir, &r.field, &r.reports, &r.diagnostics).unwrap();
    }
    let mut differing = Vec::new();
    let mut bytes = 0;
    for name in ["field.csv", "patches.json", "defects.json", "diagnostics.json", "curves.dat"] {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        bytes += a.len();
        if a != b {
            differing.push(name);
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Outcome {
        pass: differing.is_empty(),
        detail: format!("5 files, {bytes} bytes compared, differing: {differing:?}"),
    }
}

fn main() {
    let cfg = RunConfig::default();
    let seed = build_seed(&cfg, Path::new(".")).unwrap();
    let results = [
        report(1, "construction lemma oracle", stilde_oracle()),
        report(2, "patch property suite", patch_suite()),
        report(3, "distance lemmas", distance_lemmas()),
        report(4, "parabolic seed", parabolic_seed()),
        report(5, "modified flux", sigma_star_builder()),
        report(6, "density step contract", density_contract(&seed.field, &cfg)),
        report(7, "end-to-end diagnostics", end_to_end(&cfg)),
        report(8, "determinism", determinism()),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
