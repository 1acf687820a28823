//! One density step: split the working domain by the gauge distance,
//! cover the far region by squares and each square by diamonds, glue
//! sawtooth patches and certify the result by sampling.
//!
//! A generation stores only its dyadic blocks. Each block is tiled by a
//! uniform grid of cells, and every cell carries the same diamond lattice up
//! to translation; the amplitudes of a cell are recomputed from the
//! gradient at its center whenever a point inside it is evaluated.

use crate::auxiliary::{PatchGeometry, Region};
use crate::covering::{cover_diamonds, dyadic_cover, CoverRegion, DiamondCover, Occupancy, Rect, Square};
use crate::error::{Error, Result};
use crate::flux::{invert_sigma, lipschitz_sigma, SigmaStar};
use crate::geometry::{
    boundary_distance_capped, distance_k, gauge_d_capped, in_k, in_u, GradientSample, InclusionSpec,
};
use crate::numerics::{bisect, golden_min};
use crate::parabolic::ClassicalSolution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Distance from `(x, q)` to the weighted graph over abscissae within
/// `radius` of `x`, capped at `radius`.
fn local_distance(spec: &InclusionSpec, w: f64, x: f64, q: f64, radius: f64) -> f64 {
    let lo = (x - radius).max(-spec.lambda);
    let hi = (x + radius).min(spec.lambda);
    if hi <= lo {
        return radius;
    }
    let f = |y: f64| {
        let dq = w * spec.flux.sigma(y) - q;
        (y - x) * (y - x) + dq * dq
    };
    let (_, v) = golden_min(f, lo, hi, 1e-13 * (1.0 + x.abs()));
    v.sqrt().min(radius)
}

/// Sawtooth amplitudes `(a, b)` placing `(p - a, q')` and `(p + b, q')` at
/// distance `delta / 2` from the weighted graph.
pub fn amplitudes(spec: &InclusionSpec, center: &GradientSample, delta: f64) -> Result<(f64, f64)> {
    let flip = center.p < 0.0;
    let (p, q) = if flip { (-center.p, -center.q_prime) } else { (center.p, center.q_prime) };
    let w = spec.weight(center.s);
    let level = q / w;
    if !(p > spec.lambda_minus && p < spec.lambda && level > spec.sigma_lambda && level < spec.flux.sigma(p)) {
        return Err(Error::Hypothesis(format!(
            "center (p={}, q'={}) at s={} is not in U",
            center.p, center.q_prime, center.s
        )));
    }
    let (root_lo, root_hi) = invert_sigma(&spec.flux, level)?;
    let target = 0.5 * delta;
    let h = |x: f64| local_distance(spec, w, x, q, delta);
    if h(p) <= target {
        return Err(Error::Inconsistent(format!(
            "distance {} at the center does not exceed delta/2 = {target}",
            h(p)
        )));
    }
    let left = bisect(|a| h(p - a) - target, 0.0, p - root_lo, 1e-15);
    let right = bisect(|b| h(p + b) - target, 0.0, root_hi - p, 1e-15);
    for x in [p - left, p + right] {
        let g = GradientSample::new(spec, center.s, 0.0, x, 0.0, q);
        if !in_u(spec, &g)? {
            return Err(Error::Construction(format!("displaced gradient ({x}, {q}) left U")));
        }
    }
    Ok(if flip { (right, left) } else { (left, right) })
}

/// `max |g|` over `[-R, R]^2` for the divided difference of `s^m`.
pub fn divided_difference_max(m: u32, radius: f64) -> f64 {
    if m == 0 {
        0.0
    } else {
        m as f64 * radius.powi(m as i32 - 1)
    }
}

/// Continuity budget `rho` for the gradient across one square.
pub fn rho(spec: &InclusionSpec, radius: f64) -> f64 {
    let m_sigma = lipschitz_sigma(&spec.flux, spec.lambda);
    0.99 * (1.0 / 6.0f64).min(1.0 / (12.0 * radius.powi(spec.m as i32) * m_sigma))
}

/// The four side limits for a covering square.
#[allow(clippy::too_many_arguments)]
pub fn side_bound_terms(
    eta_i: f64,
    eta: f64,
    gap: f64,
    radius: f64,
    m: u32,
    delta_i: f64,
    m_g: f64,
    sigma_one: f64,
) -> [f64; 4] {
    let r2 = std::f64::consts::SQRT_2;
    let t2 = 4.0 * eta / (r2 * gap);
    let t3 = (4.0 * eta / (r2 * gap * radius.powi(m as i32))).sqrt();
    let t4 = if m_g == 0.0 { f64::INFINITY } else { delta_i / (12.0 * m_g * sigma_one) };
    [eta_i / r2, t2, t3, t4]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SideBound {
    pub eta_i: f64,
    pub terms: [f64; 4],
    pub side: f64,
}

/// Largest admissible square side on a piece whose gradient has Lipschitz
/// estimate `lipschitz`.
pub fn square_side_bound(
    spec: &InclusionSpec,
    delta_i: f64,
    eta: f64,
    lipschitz: f64,
    radius: f64,
    diameter: f64,
) -> Result<SideBound> {
    side_bound_with_rho(spec, rho(spec, radius), delta_i, eta, lipschitz, radius, diameter)
}

fn side_bound_with_rho(
    spec: &InclusionSpec,
    rho: f64,
    delta_i: f64,
    eta: f64,
    lipschitz: f64,
    radius: f64,
    diameter: f64,
) -> Result<SideBound> {
    if !(delta_i > 0.0 && eta > 0.0) {
        return Err(Error::Domain(format!("delta_i={delta_i} and eta={eta} must be positive")));
    }
    let eta_i = if lipschitz > 0.0 {
        rho * delta_i / lipschitz
    } else {
        diameter
    };
    let terms = side_bound_terms(
        eta_i,
        eta,
        spec.lambda - spec.lambda_minus,
        radius,
        spec.m,
        delta_i,
        divided_difference_max(spec.m, radius),
        spec.flux.peak(),
    );
    let side = terms.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SideBound { eta_i, terms, side })
}

/// Diamond aspect limit for a piece with threshold `delta_i`.
pub fn xi_bound(delta_i: f64, spec: &InclusionSpec, delta0: f64, radius: f64) -> Result<f64> {
    if !(delta_i > 0.0 && delta0 > 0.0 && radius > 0.0 && delta0 < 0.5 * radius) {
        return Err(Error::Domain(format!(
            "need delta_i, delta0, R > 0 and delta0 < R/2 (delta_i={delta_i}, delta0={delta0}, R={radius})"
        )));
    }
    let gap = spec.lambda - spec.lambda_minus;
    let m = spec.m as i32;
    let bracket = 1.0 + ((radius - delta0) / delta0).powi(m);
    let t1 = delta_i / (2.0 * gap * bracket);
    let t2 = delta_i / (6.0 * (radius - 2.0 * delta0) * (radius - delta0).powi(m) * gap * bracket);
    Ok(t1.min(t2))
}

/// Dyadic square of a generation with its cell refinement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub level: u32,
    pub i: i64,
    pub j: i64,
    pub square: Square,
    /// Cells have side `base_side / 2^cell_level`.
    pub cell_level: u32,
    pub lipschitz: f64,
    pub side_bound: SideBound,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub index: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    pub xi: f64,
    pub origin: (f64, f64),
    pub base_side: f64,
    /// Diamond lattice per cell level, anchored at the origin.
    pub templates: BTreeMap<u32, DiamondCover>,
    pub blocks: Vec<Block>,
    lookup: HashMap<(u32, i64, i64), usize>,
    levels: Vec<u32>,
}

/// Serialized form of a generation; block data derived from the seed is
/// recomputed on restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub index: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    pub xi: f64,
    pub origin: (f64, f64),
    pub base_side: f64,
    pub templates: BTreeMap<u32, DiamondCover>,
    /// `[level, i, j, cell_level]` per block.
    pub blocks: Vec<[i64; 4]>,
}

impl Generation {
    pub fn reindex(&mut self) {
        self.lookup = self.blocks.iter().enumerate().map(|(k, b)| ((b.level, b.i, b.j), k)).collect();
        let mut levels: Vec<u32> = self.blocks.iter().map(|b| b.level).collect();
        levels.sort_unstable();
        levels.dedup();
        self.levels = levels;
    }

    pub fn record(&self) -> GenerationRecord {
        GenerationRecord {
            index: self.index,
            epsilon: self.epsilon,
            eta: self.eta,
            delta: self.delta,
            xi: self.xi,
            origin: self.origin,
            base_side: self.base_side,
            templates: self.templates.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| [b.level as i64, b.i, b.j, b.cell_level as i64])
                .collect(),
        }
    }

    fn side(&self, level: u32) -> f64 {
        self.base_side / 2f64.powi(level as i32)
    }

    pub fn block_at(&self, s: f64, t: f64) -> Option<usize> {
        for &lvl in &self.levels {
            let h = self.side(lvl);
            let i = ((s - self.origin.0) / h).floor() as i64;
            let j = ((t - self.origin.1) / h).floor() as i64;
            if let Some(&k) = self.lookup.get(&(lvl, i, j)) {
                if self.blocks[k].square.contains(s, t) {
                    return Some(k);
                }
            }
        }
        None
    }

    pub fn cell_of(&self, block: &Block, s: f64, t: f64) -> Square {
        let h = self.side(block.cell_level);
        let i = ((s - self.origin.0) / h).floor();
        let j = ((t - self.origin.1) / h).floor();
        Square {
            s: self.origin.0 + i * h,
            t: self.origin.1 + j * h,
            side: h,
        }
    }

    pub fn cells_per_side(&self, block: &Block) -> u64 {
        1u64 << (block.cell_level - block.level)
    }

    pub fn patch_count(&self) -> u64 {
        self.blocks
            .iter()
            .map(|b| {
                let c = self.cells_per_side(b);
                c * c * self.templates[&b.cell_level].count
            })
            .sum()
    }

    pub fn covered_area(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.square.area() * self.templates[&b.cell_level].covered_fraction)
            .sum()
    }

    pub fn block_area(&self) -> f64 {
        self.blocks.iter().map(|b| b.square.area()).sum()
    }

    /// Largest diamond half-height in use.
    pub fn max_scale(&self) -> f64 {
        self.templates.values().map(|c| c.epsilon).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PatchHit {
    pub generation: usize,
    pub block: usize,
    pub region: Region,
    pub gap: f64,
    pub value: f64,
    pub moment: f64,
    pub dt: f64,
    pub geometry: PatchGeometry,
}

#[derive(Debug, Clone)]
pub struct FieldPoint {
    pub s: f64,
    pub t: f64,
    pub v: f64,
    pub phi: f64,
    pub grad: GradientSample,
    pub hits: Vec<PatchHit>,
    /// Innermost generation whose block square contains the point.
    pub block_generation: Option<usize>,
}

impl FieldPoint {
    pub fn piece(&self) -> PieceKey {
        match self.hits.last() {
            Some(h) => PieceKey::Patch { generation: h.generation, region: h.region },
            None => PieceKey::Remainder,
        }
    }

    pub fn min_gap(&self) -> f64 {
        self.hits.iter().map(|h| h.gap).fold(f64::INFINITY, f64::min)
    }
}

/// Seed plus generations of glued patches.
#[derive(Debug, Clone)]
pub struct PatchedField {
    pub seed: ClassicalSolution,
    pub sigma_star: SigmaStar,
    pub spec: InclusionSpec,
    pub generations: Vec<Generation>,
    grad_lip: Vec<f64>,
    gauge_lip: Vec<f64>,
    vt_lip: Vec<f64>,
}

impl PatchedField {
    pub fn new(seed: ClassicalSolution, sigma_star: SigmaStar, spec: InclusionSpec) -> Result<PatchedField> {
        if !(seed.delta0 > 0.0 && seed.delta0 < 0.5 * seed.radius) {
            return Err(Error::Hypothesis(format!("seed strip width {} not selected", seed.delta0)));
        }
        let (grad_lip, gauge_lip, vt_lip) = seed_lipschitz(&seed, &sigma_star, &spec);
        Ok(PatchedField {
            seed,
            sigma_star,
            spec,
            generations: Vec::new(),
            grad_lip,
            gauge_lip,
            vt_lip,
        })
    }

    /// Reattaches saved generations to a freshly built seed.
    pub fn restore(mut self, records: &[GenerationRecord]) -> Result<PatchedField> {
        let domain = self.domain();
        let diameter = domain.width().hypot(domain.height());
        let rho = rho(&self.spec, self.seed.radius);
        for (k, r) in records.iter().enumerate() {
            if r.index != k {
                return Err(Error::Config(format!("generation record {k} carries index {}", r.index)));
            }
            let mut blocks = Vec::with_capacity(r.blocks.len());
            for &[level, i, j, cell_level] in &r.blocks {
                if level < 0 || cell_level < level || !r.templates.contains_key(&(cell_level as u32)) {
                    return Err(Error::Config(format!("malformed block record {:?}", [level, i, j, cell_level])));
                }
                let side = r.base_side / 2f64.powi(level as i32);
                let square = Square {
                    s: r.origin.0 + i as f64 * side,
                    t: r.origin.1 + j as f64 * side,
                    side,
                };
                let lipschitz = self.gradient_lipschitz(&square);
                let side_bound =
                    side_bound_with_rho(&self.spec, rho, r.delta, r.eta, lipschitz, self.seed.radius, diameter)?;
                blocks.push(Block {
                    level: level as u32,
                    i,
                    j,
                    square,
                    cell_level: cell_level as u32,
                    lipschitz,
                    side_bound,
                });
            }
            let mut g = Generation {
                index: r.index,
                epsilon: r.epsilon,
                eta: r.eta,
                delta: r.delta,
                xi: r.xi,
                origin: r.origin,
                base_side: r.base_side,
                templates: r.templates.clone(),
                blocks,
                lookup: HashMap::new(),
                levels: Vec::new(),
            };
            g.reindex();
            self.generations.push(g);
        }
        Ok(self)
    }

    pub fn domain(&self) -> Rect {
        Rect {
            s0: self.seed.delta0,
            s1: self.seed.radius - self.seed.delta0,
            t0: 0.0,
            t1: self.seed.horizon,
        }
    }

    pub fn seed_gradient(&self, s: f64, t: f64) -> (f64, f64, GradientSample) {
        let ss = self.seed.sample(s, t);
        let q = self.spec.weight(s) * self.sigma_star.eval(ss.vs);
        (ss.v, ss.phi, GradientSample::new(&self.spec, s, ss.v, ss.vs, ss.vt, q))
    }

    pub fn sample(&self, s: f64, t: f64) -> Result<FieldPoint> {
        self.sample_upto(s, t, self.generations.len())
    }

    /// Field built from the seed and the first `upto` generations.
    pub fn sample_upto(&self, s: f64, t: f64, upto: usize) -> Result<FieldPoint> {
        let (mut v, mut phi, g0) = self.seed_gradient(s, t);
        let (mut p, mut l, mut q) = (g0.p, g0.l, g0.q_prime);
        let mut hits = Vec::new();
        let mut block_generation = None;
        for (gi, gen) in self.generations.iter().enumerate().take(upto) {
            let Some(bk) = gen.block_at(s, t) else { continue };
            block_generation = Some(gi);
            let block = &gen.blocks[bk];
            let cell = gen.cell_of(block, s, t);
            let cover = DiamondCover { square: cell, ..gen.templates[&block.cell_level] };
            let Some(pl) = cover.locate(s, t) else { continue };
            let (cs, ct) = cell.center();
            let center = self.sample_upto(cs, ct, gi)?.grad;
            let (a, b) = amplitudes(&self.spec, &center, gen.delta)?;
            let half = pl.scale * gen.xi;
            let geometry = PatchGeometry {
                a,
                b,
                s01: pl.center.0 - half,
                s02: pl.center.0 + half,
                t0: pl.center.1,
                half_height: pl.scale,
                m: self.spec.m,
            };
            let e = geometry.eval(s, t)?;
            if e.region == Region::Outside {
                continue;
            }
            v += e.value;
            phi += e.moment;
            p += e.ds;
            l += e.dt;
            q += e.moment_t;
            hits.push(PatchHit {
                generation: gi,
                block: bk,
                region: e.region,
                gap: e.gap,
                value: e.value,
                moment: e.moment,
                dt: e.dt,
                geometry,
            });
        }
        Ok(FieldPoint {
            s,
            t,
            v,
            phi,
            grad: GradientSample::new(&self.spec, s, v, p, l, q),
            hits,
            block_generation,
        })
    }

    fn cell_range(&self, sq: &Square) -> (usize, usize, usize, usize) {
        let ns = self.seed.ns;
        let nt = self.seed.nt;
        let i0 = ((sq.s / self.seed.ds()).floor().max(0.0) as usize).min(ns - 1);
        let i1 = (((sq.s + sq.side) / self.seed.ds()).floor().max(0.0) as usize).min(ns - 1);
        let j0 = ((sq.t / self.seed.dt()).floor().max(0.0) as usize).min(nt - 1);
        let j1 = (((sq.t + sq.side) / self.seed.dt()).floor().max(0.0) as usize).min(nt - 1);
        (i0, i1, j0, j1)
    }

    fn max_over(&self, grid: &[f64], sq: &Square) -> f64 {
        let (i0, i1, j0, j1) = self.cell_range(sq);
        let mut out: f64 = 0.0;
        for j in j0..=j1 {
            for i in i0..=i1 {
                out = out.max(grid[j * self.seed.ns + i]);
            }
        }
        out
    }

    /// Lipschitz bound of the seed gradient on a square.
    pub fn gradient_lipschitz(&self, sq: &Square) -> f64 {
        self.max_over(&self.grad_lip, sq)
    }

    /// Lipschitz bound of the planar part of the gauge distance along the
    /// seed on a square.
    pub fn gauge_lipschitz(&self, sq: &Square) -> f64 {
        self.max_over(&self.gauge_lip, sq)
    }

    pub fn vt_lipschitz(&self, sq: &Square) -> f64 {
        self.max_over(&self.vt_lip, sq)
    }

    pub fn patch_count(&self) -> u64 {
        self.generations.iter().map(Generation::patch_count).sum()
    }
}

/// Sampled maximum of `|sigma*'|` over `[lo, hi]` on nine points, and a
/// bound on `|sigma*''|` used to close the gaps between them.
fn slope_envelope(star: &SigmaStar) -> (impl Fn(f64, f64) -> f64 + '_, f64) {
    let top = 2.0 * star.lambda;
    let n = 4096;
    let curvature = (0..n)
        .map(|k| {
            let (a, b) = (top * k as f64 / n as f64, top * (k + 1) as f64 / n as f64);
            (star.derivative(b) - star.derivative(a)).abs() / (b - a)
        })
        .fold(0.0, f64::max)
        * 1.1;
    let slope_of = move |lo: f64, hi: f64| {
        (0..=8)
            .map(|k| star.derivative(lo + (hi - lo) * k as f64 / 8.0).abs())
            .fold(0.0, f64::max)
    };
    (slope_of, curvature)
}

fn seed_lipschitz(seed: &ClassicalSolution, star: &SigmaStar, spec: &InclusionSpec) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ns, nt) = (seed.ns, seed.nt);
    let (ds, dt) = (seed.ds(), seed.dt());
    let m = spec.m;
    let rm = seed.radius.powi(m as i32);
    let mg = divided_difference_max(m, seed.radius);
    let peak = spec.flux.peak();
    let (slope_of, curvature) = slope_envelope(star);
    let mut grad = vec![0.0; ns * nt];
    let mut gauge = vec![0.0; ns * nt];
    let mut vt_lip = vec![0.0; ns * nt];
    for j in 0..nt {
        for i in 0..ns {
            let k = [seed.idx(i, j), seed.idx(i + 1, j), seed.idx(i, j + 1), seed.idx(i + 1, j + 1)];
            let lip = |g: &[f64]| {
                let gs = (g[k[1]] - g[k[0]]).abs().max((g[k[3]] - g[k[2]]).abs()) / ds;
                let gt = (g[k[2]] - g[k[0]]).abs().max((g[k[3]] - g[k[1]]).abs()) / dt;
                gs.hypot(gt)
            };
            let corner_max = |g: &[f64]| k.iter().map(|&x| g[x].abs()).fold(0.0, f64::max);
            let lvs = lip(&seed.vs);
            let lvt = lip(&seed.vt);
            let lv = lip(&seed.v);
            let (lo, hi) = k.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                let p = seed.vs[x].abs();
                (a.min(p), b.max(p))
            });
            let slope = slope_of(lo, hi) + 0.5 * curvature * (hi - lo) / 8.0;
            let lq = mg * star.eval(corner_max(&seed.vs)) + rm * slope.min(star.c_hi) * lvs;
            let lr = mg * corner_max(&seed.v) + rm * lv;
            grad[j * ns + i] = (lvs * lvs + lvt * lvt + lq * lq + lr * lr).sqrt();
            gauge[j * ns + i] = lvs.hypot(lq) + mg * peak;
            vt_lip[j * ns + i] = lvt;
        }
    }
    (grad, gauge, vt_lip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PieceKey {
    Remainder,
    Patch { generation: usize, region: Region },
}

/// Piece structure: the remainder plus six subregions per patch.
#[derive(Debug, Clone, Serialize)]
pub struct PieceRegistry {
    pub pieces: u64,
    pub patches: u64,
    pub groups: Vec<PieceKey>,
}

pub fn decompose_pieces(field: &PatchedField) -> PieceRegistry {
    let patches = field.patch_count();
    let mut groups = vec![PieceKey::Remainder];
    for g in &field.generations {
        if g.patch_count() > 0 {
            groups.extend(Region::PIECES.iter().map(|&r| PieceKey::Patch { generation: g.index, region: r }));
        }
    }
    PieceRegistry { pieces: 1 + 6 * patches, patches, groups }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PieceSample {
    /// Gauge distance, capped above every candidate threshold.
    pub gauge: f64,
    pub dist_k: f64,
    /// Distance to the relative boundary of `U`, capped like `gauge`.
    pub boundary: f64,
    pub in_u: bool,
    pub in_k: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaSelection {
    pub i: usize,
    pub piece: PieceKey,
    pub delta_i: f64,
    pub n_i: f64,
    pub area: f64,
    pub k2: f64,
    pub k3_alpha: f64,
    pub k3_beta: f64,
    pub ghat_area: f64,
    pub budget: f64,
    pub halvings: u32,
    pub satisfied: bool,
    pub pathological: bool,
}

pub fn sample_piece(spec: &InclusionSpec, g: &GradientSample, cap: f64) -> Result<PieceSample> {
    Ok(PieceSample {
        gauge: gauge_d_capped(spec, g, cap),
        dist_k: distance_k(spec, g),
        boundary: boundary_distance_capped(spec, g, cap),
        in_u: in_u(spec, g)?,
        in_k: in_k(spec, g, 1e-12),
    })
}

/// Halve `delta` from `epsilon / 4` until
/// `delta |G| + N |K3beta(delta)| <= budget` holds on the sampled piece.
pub fn select_delta_i(
    samples: &[PieceSample],
    cell_area: f64,
    epsilon: f64,
    budget: f64,
    i: usize,
    piece: PieceKey,
) -> DeltaSelection {
    let area = samples.len() as f64 * cell_area;
    let n_i = samples.iter().map(|x| x.dist_k).fold(0.0, f64::max);
    let measure = |delta: f64| {
        let mut k2 = 0.0;
        let mut k3a = 0.0;
        let mut k3b = 0.0;
        let mut ghat = 0.0;
        for x in samples {
            if x.gauge > delta {
                ghat += cell_area;
                continue;
            }
            if x.in_k {
                k2 += cell_area;
            } else if x.in_u {
                if x.dist_k <= delta {
                    k3a += cell_area;
                }
                if x.boundary <= delta {
                    k3b += cell_area;
                }
            }
        }
        (k2, k3a, k3b, ghat)
    };
    let mut delta = 0.25 * epsilon;
    let mut halvings = 0;
    loop {
        while samples.iter().any(|x| x.gauge == delta) {
            delta = delta * (1.0 - f64::EPSILON);
        }
        let (k2, k3a, k3b, ghat) = measure(delta);
        let lhs = delta * area + n_i * k3b;
        if lhs <= budget {
            return DeltaSelection {
                i,
                piece,
                delta_i: delta,
                n_i,
                area,
                k2,
                k3_alpha: k3a,
                k3_beta: k3b,
                ghat_area: ghat,
                budget,
                halvings,
                satisfied: true,
                pathological: false,
            };
        }
        if delta * 0.5 < 1e-14 {
            return DeltaSelection {
                i,
                piece,
                delta_i: delta,
                n_i,
                area,
                k2,
                k3_alpha: k3a,
                k3_beta: k3b,
                ghat_area: ghat,
                budget,
                halvings,
                satisfied: false,
                pathological: true,
            };
        }
        delta *= 0.5;
        halvings += 1;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityOptions {
    /// Monte-Carlo points for certification.
    pub samples: usize,
    /// Monte-Carlo points for threshold selection.
    pub selection_samples: usize,
    pub row_samples: usize,
    pub square_coverage: f64,
    pub diamond_coverage: f64,
    /// Largest block side as a fraction of the shorter side of the domain.
    pub block_fraction: f64,
    pub floor_levels: u32,
    pub generation_cap: usize,
    /// Relative width of the excluded band around patch region boundaries.
    pub band: f64,
    pub seed: u64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            samples: 100_000,
            selection_samples: 40_000,
            row_samples: 10_000,
            square_coverage: 0.98,
            diamond_coverage: 0.95,
            block_fraction: 1.0 / 16.0,
            floor_levels: 8,
            generation_cap: 3,
            band: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleFailure {
    pub s: f64,
    pub t: f64,
    pub p: f64,
    pub l: f64,
    pub q_prime: f64,
    pub dist_k: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefectReport {
    pub generation: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    pub xi: f64,
    pub domain_area: f64,
    pub defect_estimate: f64,
    pub defect_std_error: f64,
    pub defect_bound: f64,
    pub n_max: f64,
    pub uncovered_area: f64,
    pub uncovered_charge: f64,
    pub sup_displacement: f64,
    pub displacement_bound: f64,
    pub inclusion_pass_fraction: f64,
    pub inclusion_samples: usize,
    pub max_vt_in_patches: f64,
    pub l0: f64,
    pub patch_samples: usize,
    pub row_condition_error: f64,
    pub ghat_area: f64,
    pub square_fraction: f64,
    pub square_shortfall: bool,
    pub diamond_fraction: f64,
    pub diamond_shortfall: bool,
    pub block_count: usize,
    pub patch_count: u64,
    pub generation_patch_counts: Vec<u64>,
    pub selections: Vec<DeltaSelection>,
    pub failures: Vec<SampleFailure>,
    pub defect_pass: bool,
    pub displacement_pass: bool,
    pub inclusion_pass: bool,
    pub vt_pass: bool,
}

impl DefectReport {
    pub fn pass(&self) -> bool {
        self.defect_pass && self.displacement_pass && self.inclusion_pass && self.vt_pass
    }
}

/// Stratified uniform points, one per cell of a near-square grid.
pub fn stratified_points(domain: Rect, n: usize, rng: &mut ChaCha8Rng) -> (Vec<(f64, f64)>, f64) {
    let n = n.max(1);
    let aspect = domain.width() / domain.height();
    let nx = ((n as f64 * aspect).sqrt().ceil() as usize).max(1);
    let ny = n.div_ceil(nx).max(1);
    let (hs, ht) = (domain.width() / nx as f64, domain.height() / ny as f64);
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let s = domain.s0 + (i as f64 + rng.gen::<f64>()) * hs;
            let t = domain.t0 + (j as f64 + rng.gen::<f64>()) * ht;
            pts.push((s, t));
        }
    }
    (pts, hs * ht)
}

struct FarRegion<'a> {
    field: &'a PatchedField,
    delta: f64,
    domain: Rect,
    area: f64,
    origin: (f64, f64),
    base: f64,
    taken: HashSet<(u32, i64, i64)>,
    ancestors: HashSet<(u32, i64, i64)>,
}

impl FarRegion<'_> {
    fn key(&self, sq: &Square) -> (u32, i64, i64) {
        let level = (self.base / sq.side).log2().round() as u32;
        let h = self.base / 2f64.powi(level as i32);
        (
            level,
            ((sq.s - self.origin.0) / h).round() as i64,
            ((sq.t - self.origin.1) / h).round() as i64,
        )
    }
}

impl CoverRegion for FarRegion<'_> {
    fn bounds(&self) -> Rect {
        self.domain
    }

    fn area(&self) -> f64 {
        self.area
    }

    fn classify(&self, sq: &Square) -> Occupancy {
        if !self.domain.overlaps_square(sq) {
            return Occupancy::Outside;
        }
        let (level, i, j) = self.key(sq);
        for up in 0..=level {
            if self.taken.contains(&(level - up, i >> up, j >> up)) {
                return Occupancy::Outside;
            }
        }
        if self.ancestors.contains(&(level, i, j)) || !self.domain.contains_square(sq) {
            return Occupancy::Partial;
        }
        let (cs, ct) = sq.center();
        let Ok(point) = self.field.sample(cs, ct) else {
            return Occupancy::Partial;
        };
        let g = point.grad;
        let d = gauge_d_capped(&self.field.spec, &g, 4.0 * self.delta);
        let half_diag = sq.side * std::f64::consts::FRAC_1_SQRT_2;
        let reach = self.field.gauge_lipschitz(sq) * half_diag;
        let vt_reach = self.field.vt_lipschitz(sq) * half_diag;
        let inside_u = in_u(&self.field.spec, &g).unwrap_or(false);
        let l_margin = self.field.spec.l0 - g.l.abs();
        if inside_u && d - reach > self.delta && l_margin - vt_reach > self.delta {
            Occupancy::Inside
        } else if d + reach + vt_reach < self.delta {
            Occupancy::Outside
        } else {
            Occupancy::Partial
        }
    }
}

struct Certified {
    dist: f64,
    displacement: f64,
    included: Option<bool>,
    in_new_patch: bool,
    vt: f64,
    failure: Option<SampleFailure>,
}

/// One density step at defect level `epsilon` and displacement `eta`.
pub fn density_step(
    field: &PatchedField,
    epsilon: f64,
    eta: f64,
    options: &DensityOptions,
) -> Result<(PatchedField, DefectReport)> {
    if !(epsilon > 0.0 && eta > 0.0) {
        return Err(Error::Domain(format!("epsilon={epsilon} and eta={eta} must be positive")));
    }
    if field.generations.len() >= options.generation_cap {
        return Err(Error::Config(format!("generation cap {} reached", options.generation_cap)));
    }
    let spec = &field.spec;
    let gen_index = field.generations.len();
    let domain = field.domain();
    let domain_area = domain.area();
    let radius = field.seed.radius;
    let delta0 = field.seed.delta0;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_mul(0x9E37_79B9).wrapping_add(gen_index as u64));

    let cap = 0.5 * epsilon;
    let (pts, cell_area) = stratified_points(domain, options.selection_samples, &mut rng);
    let sampled: Vec<(PieceKey, bool, PieceSample)> = pts
        .par_iter()
        .map(|&(s, t)| {
            let fp = field.sample(s, t)?;
            Ok((fp.piece(), fp.block_generation.is_some(), sample_piece(spec, &fp.grad, cap)?))
        })
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<PieceKey, Vec<PieceSample>> = BTreeMap::new();
    for (k, _, x) in &sampled {
        groups.entry(*k).or_default().push(*x);
    }
    let mut selections = Vec::new();
    for (i, (k, xs)) in groups.iter().enumerate() {
        let budget = 0.5 * epsilon * xs.len() as f64 * cell_area;
        selections.push(select_delta_i(xs, cell_area, epsilon, budget, i, *k));
    }
    let remainder = selections.iter().find(|x| x.piece == PieceKey::Remainder).cloned();
    let delta = remainder.as_ref().map_or(0.25 * epsilon, |x| x.delta_i);

    let mut placeable = 0.0;
    let mut charged = 0.0;
    for (k, in_old_block, x) in &sampled {
        if *k == PieceKey::Remainder && !in_old_block && x.gauge > delta {
            placeable += cell_area;
        }
    }
    for sel in &selections {
        if sel.pathological {
            charged += sel.area;
        } else if sel.piece != PieceKey::Remainder {
            charged += sel.ghat_area;
        }
    }
    if let Some(r) = &remainder {
        if !r.pathological {
            charged += (r.ghat_area - placeable).max(0.0);
        }
    }

    let xi = xi_bound(delta, spec, delta0, radius)?;
    let max_side = options.block_fraction * domain.width().min(domain.height());
    let base = max_side.min(domain.width()).min(domain.height());
    let origin = (domain.s0, domain.t0);
    for g in &field.generations {
        if (g.base_side - base).abs() > 1e-12 * base || g.origin != origin {
            return Err(Error::Config("generations must share the block lattice".into()));
        }
    }
    let mut taken = HashSet::new();
    let mut ancestors = HashSet::new();
    for g in &field.generations {
        for b in &g.blocks {
            taken.insert((b.level, b.i, b.j));
            for up in 1..=b.level {
                ancestors.insert((b.level - up, b.i >> up, b.j >> up));
            }
        }
    }
    let mut generation = Generation {
        index: gen_index,
        epsilon,
        eta,
        delta,
        xi,
        origin,
        base_side: base,
        templates: BTreeMap::new(),
        blocks: Vec::new(),
        lookup: HashMap::new(),
        levels: Vec::new(),
    };
    let mut square_fraction = 1.0;
    let mut square_shortfall = false;
    if placeable > 0.0 {
        let region = FarRegion {
            field,
            delta,
            domain,
            area: placeable,
            origin,
            base,
            taken,
            ancestors,
        };
        let floor = base / 2f64.powi(options.floor_levels as i32);
        let cover = dyadic_cover(&region, max_side, options.square_coverage, floor)?;
        square_fraction = cover.covered_fraction();
        square_shortfall = cover.shortfall;
        let diameter = domain.width().hypot(domain.height());
        let rho = rho(spec, radius);
        for (_, sq) in &cover.squares {
            let (level, i, j) = region.key(sq);
            let lipschitz = field.gradient_lipschitz(sq);
            let side_bound = side_bound_with_rho(spec, rho, delta, eta, lipschitz, radius, diameter)?;
            let mut cell_level = level;
            while base / 2f64.powi(cell_level as i32) > side_bound.side {
                cell_level += 1;
                if cell_level > 60 {
                    return Err(Error::Construction("square side bound underflows".into()));
                }
            }
            if let std::collections::btree_map::Entry::Vacant(e) = generation.templates.entry(cell_level) {
                let side = base / 2f64.powi(cell_level as i32);
                e.insert(cover_diamonds(Square { s: 0.0, t: 0.0, side }, xi, options.diamond_coverage)?);
            }
            generation.blocks.push(Block {
                level,
                i,
                j,
                square: *sq,
                cell_level,
                lipschitz,
                side_bound,
            });
        }
    }
    generation.reindex();
    let diamond_fraction = generation.templates.values().map(|c| c.covered_fraction).fold(1.0, f64::min);
    let diamond_shortfall = generation.templates.values().any(|c| c.shortfall);
    let covered = generation.covered_area();
    let uncovered_area = (placeable - covered).max(0.0) + charged;
    let block_count = generation.blocks.len();
    let patch_count = generation.patch_count();

    let mut out = field.clone();
    if block_count > 0 {
        out.generations.push(generation);
    }
    let gap = spec.lambda - spec.lambda_minus;
    let displacement_bound = out
        .generations
        .get(gen_index)
        .map(|g| {
            let width = 2.0 * g.max_scale() * g.xi;
            let dv = gap / 4.0 * width;
            let dphi = gap / 4.0 * radius.powi(spec.m as i32) * width * width;
            dv.hypot(dphi)
        })
        .unwrap_or(0.0);

    // Certification on fresh points.
    let (pts, cert_area) = stratified_points(domain, options.samples, &mut rng);
    let certified: Vec<Certified> = pts
        .par_iter()
        .map(|&(s, t)| {
            let fp = out.sample(s, t)?;
            let dist = distance_k(spec, &fp.grad);
            let mut dv = 0.0;
            let mut dphi = 0.0;
            let mut in_new_patch = false;
            for h in fp.hits.iter().filter(|h| h.generation == gen_index) {
                dv += h.value;
                dphi += h.moment;
                in_new_patch = true;
            }
            let included = if fp.min_gap() < options.band {
                None
            } else {
                Some(in_u(spec, &fp.grad)? || (fp.grad.l.abs() <= spec.l0 && dist <= 1e-6))
            };
            let failure = (included == Some(false)).then(|| SampleFailure {
                s,
                t,
                p: fp.grad.p,
                l: fp.grad.l,
                q_prime: fp.grad.q_prime,
                dist_k: dist,
            });
            Ok(Certified {
                dist,
                displacement: dv.hypot(dphi),
                included,
                in_new_patch,
                vt: fp.grad.l.abs(),
                failure,
            })
        })
        .collect::<Result<_>>()?;

    let n = certified.len() as f64;
    let mean = certified.iter().map(|c| c.dist).sum::<f64>() / n;
    let var = certified.iter().map(|c| (c.dist - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let defect_estimate = mean * cert_area * n;
    let defect_std_error = (var / n).sqrt() * domain_area;
    let sup_displacement = certified.iter().map(|c| c.displacement).fold(0.0, f64::max);
    let judged: Vec<bool> = certified.iter().filter_map(|c| c.included).collect();
    let inclusion_pass_fraction = if judged.is_empty() {
        1.0
    } else {
        judged.iter().filter(|&&x| x).count() as f64 / judged.len() as f64
    };
    let patch_points: Vec<&Certified> = certified.iter().filter(|c| c.in_new_patch).collect();
    let max_vt_in_patches = patch_points.iter().map(|c| c.vt).fold(0.0, f64::max);
    let patch_failures = patch_points.iter().filter(|c| c.included == Some(false)).count();
    let failures: Vec<SampleFailure> = certified.iter().filter_map(|c| c.failure.clone()).take(32).collect();
    if !patch_points.is_empty() && patch_failures as f64 > 1e-3 * patch_points.len() as f64 {
        let dump = serde_json::to_string(&failures)?;
        return Err(Error::StepAborted(format!(
            "{patch_failures} of {} patch samples violate the inclusion; first failures: {dump}",
            patch_points.len()
        )));
    }

    let row_condition_error = row_condition_check(&out, options.row_samples, &mut rng)?;

    let n_max = selections.iter().map(|x| x.n_i).fold(0.0, f64::max);
    let uncovered_charge = n_max * uncovered_area;
    let defect_bound = epsilon * domain_area + uncovered_charge;
    let mut generation_patch_counts: Vec<u64> = out.generations.iter().map(Generation::patch_count).collect();
    if block_count == 0 {
        generation_patch_counts.push(0);
    }
    let report = DefectReport {
        generation: gen_index,
        epsilon,
        eta,
        delta,
        xi,
        domain_area,
        defect_estimate,
        defect_std_error,
        defect_bound,
        n_max,
        uncovered_area,
        uncovered_charge,
        sup_displacement,
        displacement_bound,
        inclusion_pass_fraction,
        inclusion_samples: judged.len(),
        max_vt_in_patches,
        l0: spec.l0,
        patch_samples: patch_points.len(),
        row_condition_error,
        ghat_area: placeable,
        square_fraction,
        square_shortfall,
        diamond_fraction,
        diamond_shortfall,
        block_count,
        patch_count,
        generation_patch_counts,
        selections,
        failures,
        defect_pass: defect_estimate <= defect_bound,
        displacement_pass: sup_displacement <= eta && displacement_bound <= eta,
        inclusion_pass: inclusion_pass_fraction >= 0.999,
        vt_pass: max_vt_in_patches < spec.l0,
    };
    Ok((out, report))
}

/// Largest relative violation of `phi_s = s^m v`, checked separately on the
/// seed interpolant and on every patch met by the sample points.
pub fn row_condition_check(field: &PatchedField, samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let domain = field.domain();
    let seed = &field.seed;
    let h = 1e-6 * seed.radius;
    let scale = seed.v.iter().fold(0.0f64, |a, x| a.max(x.abs())) * seed.radius.powi(field.spec.m as i32) + 1e-300;
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|_| {
            (
                domain.s0 + rng.gen::<f64>() * domain.width(),
                domain.t0 + rng.gen::<f64>() * domain.height(),
            )
        })
        .collect();
    let errs: Vec<f64> = pts
        .par_iter()
        .map(|&(s, t)| {
            let mut worst: f64 = 0.0;
            let x = s / seed.ds();
            if (x - x.round()).abs() * seed.ds() > 2.0 * h {
                let fd = (seed.sample(s + h, t).phi - seed.sample(s - h, t).phi) / (2.0 * h);
                let target = field.spec.weight(s) * seed.sample(s, t).v;
                worst = worst.max((fd - target).abs() / scale);
            }
            let fp = field.sample(s, t)?;
            for hit in fp.hits.iter().filter(|h| h.gap > 1e-2) {
                let g = &hit.geometry;
                let Some(bd) = g.boundaries(t)? else { continue };
                let w = bd[4] - bd[0];
                let (sp, sm) = (s + 1e-3 * w, s - 1e-3 * w);
                let up = g.eval(sp, t)?.moment;
                let dn = g.eval(sm, t)?.moment;
                let fd = (up - dn) / (sp - sm);
                let target = field.spec.weight(s) * hit.value;
                let local = field.spec.weight(g.s02) * g.value_bound();
                worst = worst.max((fd - target).abs() / local);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::flux::FluxModel;
    use crate::geometry::curve_distance_capped;

    fn spec() -> InclusionSpec {
        InclusionSpec::new(FluxModel::rational(), 2.0, 1.0, 0).unwrap()
    }

    #[test]
    fn side_bound_example() {
        let t = side_bound_terms(0.01, 0.05, 1.5, 1.0, 1, 0.02, 1.0, 0.5);
        let expect = [0.00707107, 0.0942809, 0.307055, 0.00333333];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-5 * b, "{a} vs {b}");
        }
        let min = t.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min - 0.0033333333).abs() < 1e-9);
        let t0 = side_bound_terms(0.01, 0.05, 1.5, 1.0, 0, 0.02, 0.0, 0.5);
        assert!(t0[3].is_infinite());
        assert!(t0.iter().copied().fold(f64::INFINITY, f64::min) <= 0.01 / 2f64.sqrt());
    }

    #[test]
    fn xi_example() {
        let mut sp = spec();
        sp.m = 1;
        sp.lambda_minus = sp.lambda - 1.5;
        let x = xi_bound(0.02, &sp, 0.1, 1.0).unwrap();
        assert!((x - 0.02 / 64.8).abs() < 1e-12);
        sp.m = 0;
        let x0 = xi_bound(0.02, &sp, 0.1, 1.0).unwrap();
        assert!((x0 - (0.02 / 6.0f64).min(0.02 / (6.0 * 0.8 * 3.0))).abs() < 1e-15);
        assert!(xi_bound(0.02, &sp, 0.6, 1.0).is_err());
    }

    #[test]
    fn amplitude_example_and_symmetry() {
        let sp = spec();
        let g = GradientSample::new(&sp, 1.0, 0.0, 1.5, 0.0, 0.43);
        let (a, b) = amplitudes(&sp, &g, 0.02).unwrap();
        assert!(a > 0.0 && b > 0.0 && a + b < sp.lambda - sp.lambda_minus);
        let h = |x: f64| curve_distance_capped(&sp, 1.0, (x, 0.43), 1.0);
        assert!((h(1.5 - a) - 0.01).abs() <= 1e-8);
        assert!((h(1.5 + b) - 0.01).abs() <= 1e-8);
        let gm = GradientSample::new(&sp, 1.0, 0.0, -1.5, 0.0, -0.43);
        let (am, bm) = amplitudes(&sp, &gm, 0.02).unwrap();
        assert!((am - b).abs() < 1e-12 && (bm - a).abs() < 1e-12);
        let (a2, b2) = amplitudes(&sp, &g, 0.01).unwrap();
        assert!(a2 > a && b2 > b);
    }

    #[test]
    fn amplitude_rejects_close_center() {
        let sp = spec();
        let q = sp.flux.sigma(1.5) - 1e-3;
        let g = GradientSample::new(&sp, 1.0, 0.0, 1.5, 0.0, q);
        assert!(amplitudes(&sp, &g, 0.02).is_err());
    }

    fn sample(gauge: f64, dist_k: f64, boundary: f64, in_u: bool, in_k: bool) -> PieceSample {
        PieceSample { gauge, dist_k, boundary, in_u, in_k }
    }

    #[test]
    fn delta_for_piece_in_k() {
        let xs = vec![sample(0.0, 0.0, 0.0, false, true); 100];
        let sel = select_delta_i(&xs, 0.01, 0.2, 0.1, 0, PieceKey::Remainder);
        assert!(sel.satisfied && sel.halvings == 0 && sel.delta_i < 0.1);
        assert_eq!(sel.k3_beta, 0.0);
    }

    #[test]
    fn delta_for_far_piece() {
        let xs = vec![sample(0.3, 0.3, 0.3, true, false); 100];
        let sel = select_delta_i(&xs, 0.01, 0.2, 0.1, 0, PieceKey::Remainder);
        assert!(sel.satisfied);
        assert!(sel.delta_i * sel.area <= 0.1);
        assert_eq!(sel.k3_beta, 0.0);
        assert!((sel.ghat_area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_halves_past_boundary_layer() {
        let xs: Vec<PieceSample> = (0..1000)
            .map(|k| {
                let b = 1e-3 * k as f64 / 1000.0 + 0.002;
                sample(b, 0.5, b, true, false)
            })
            .collect();
        let sel = select_delta_i(&xs, 1e-3, 0.2, 0.1 * 0.5 * 1.0, 0, PieceKey::Remainder);
        assert!(sel.satisfied && sel.halvings > 0);
        assert!(sel.delta_i < 0.002 + 1e-12);
        assert!(xs.iter().all(|x| x.gauge != sel.delta_i));
    }

    proptest! {
        #[test]
        fn amplitudes_hit_half_delta(p in 1.05f64..1.9, frac in 0.2f64..0.8, delta in 1e-3f64..0.02) {
            let sp = spec();
            let (lo, hi) = (sp.sigma_lambda, sp.flux.sigma(p));
            let q = lo + frac * (hi - lo);
            let g = GradientSample::new(&sp, 1.0, 0.0, p, 0.0, q);
            prop_assume!(curve_distance_capped(&sp, 1.0, (p, q), 1.0) > 2.0 * delta);
            let (a, b) = amplitudes(&sp, &g, delta).unwrap();
            let h = |x: f64| curve_distance_capped(&sp, 1.0, (x, q), 1.0);
            prop_assert!((h(p - a) - 0.5 * delta).abs() <= 1e-9);
            prop_assert!((h(p + b) - 0.5 * delta).abs() <= 1e-9);
            let gm = GradientSample::new(&sp, 1.0, 0.0, -p, 0.0, -q);
            let (am, bm) = amplitudes(&sp, &gm, delta).unwrap();
            prop_assert!((am - b).abs() <= 1e-12 && (bm - a).abs() <= 1e-12);
        }

        #[test]
        fn side_bound_is_smallest_term(lip in 0.1f64..50.0, delta in 1e-3f64..0.05, eta in 1e-3f64..0.1) {
            let sp = spec();
            let sb = square_side_bound(&sp, delta, eta, lip, 1.0, 2.0).unwrap();
            prop_assert!(sb.terms.iter().all(|&t| sb.side <= t));
            prop_assert!(sb.terms.contains(&sb.side));
        }
    }
}
