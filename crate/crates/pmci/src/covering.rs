//! Disjoint covers: greedy dyadic squares inside a region and multi-scale
//! diamond lattices inside a square.
//!
//! A diamond of scale `e` and aspect `xi` is the open rhombus with
//! half-diagonals `e * xi` (in `s`) and `e` (in `t`); its area is `2 xi e^2`.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub s0: f64,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.s1 - self.s0
    }

    pub fn height(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains_square(&self, sq: &Square) -> bool {
        sq.s >= self.s0 && sq.s + sq.side <= self.s1 && sq.t >= self.t0 && sq.t + sq.side <= self.t1
    }

    pub fn overlaps_square(&self, sq: &Square) -> bool {
        sq.s < self.s1 && sq.s + sq.side > self.s0 && sq.t < self.t1 && sq.t + sq.side > self.t0
    }
}

/// Axis-aligned square with lower-left corner `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub s: f64,
    pub t: f64,
    pub side: f64,
}

impl Square {
    pub fn center(&self) -> (f64, f64) {
        (self.s + 0.5 * self.side, self.t + 0.5 * self.side)
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Open-square membership.
    pub fn contains(&self, s: f64, t: f64) -> bool {
        s > self.s && s < self.s + self.side && t > self.t && t < self.t + self.side
    }

    pub fn children(&self) -> [Square; 4] {
        let h = 0.5 * self.side;
        [
            Square { s: self.s, t: self.t, side: h },
            Square { s: self.s + h, t: self.t, side: h },
            Square { s: self.s, t: self.t + h, side: h },
            Square { s: self.s + h, t: self.t + h, side: h },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occupancy {
    Inside,
    Outside,
    Partial,
}

/// Target region for the square cover.
pub trait CoverRegion: Sync {
    fn bounds(&self) -> Rect;
    fn area(&self) -> f64;
    fn classify(&self, square: &Square) -> Occupancy;
}

/// Union of pairwise disjoint rectangles.
#[derive(Debug, Clone)]
pub struct RectUnion {
    pub rects: Vec<Rect>,
}

impl CoverRegion for RectUnion {
    fn bounds(&self) -> Rect {
        let mut b = self.rects[0];
        for r in &self.rects[1..] {
            b.s0 = b.s0.min(r.s0);
            b.s1 = b.s1.max(r.s1);
            b.t0 = b.t0.min(r.t0);
            b.t1 = b.t1.max(r.t1);
        }
        b
    }

    fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }

    fn classify(&self, square: &Square) -> Occupancy {
        if self.rects.iter().any(|r| r.contains_square(square)) {
            Occupancy::Inside
        } else if self.rects.iter().any(|r| r.overlaps_square(square)) {
            Occupancy::Partial
        } else {
            Occupancy::Outside
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Square,
    Diamond { xi: f64 },
}

/// `scale` is the side for squares and the half-height for diamonds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub center: (f64, f64),
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverPlan {
    pub shape: Shape,
    pub elements: Vec<Placement>,
    pub covered_fraction: f64,
    pub uncovered_area: f64,
    pub shortfall: bool,
}

impl CoverPlan {
    pub fn element_area(&self, e: &Placement) -> f64 {
        match self.shape {
            Shape::Square => e.scale * e.scale,
            Shape::Diamond { xi } => 2.0 * xi * e.scale * e.scale,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["element", "vertex", "s", "t"])?;
        for (k, e) in self.elements.iter().enumerate() {
            let (cs, ct) = e.center;
            let verts: Vec<(f64, f64)> = match self.shape {
                Shape::Square => {
                    let h = 0.5 * e.scale;
                    vec![(cs - h, ct - h), (cs + h, ct - h), (cs + h, ct + h), (cs - h, ct + h)]
                }
                Shape::Diamond { xi } => {
                    let (a, b) = (e.scale * xi, e.scale);
                    vec![(cs, ct - b), (cs + a, ct), (cs, ct + b), (cs - a, ct)]
                }
            };
            for (j, (s, t)) in verts.iter().enumerate() {
                w.write_record([k.to_string(), j.to_string(), format!("{s:e}"), format!("{t:e}")])?;
            }
        }
        w.flush().map_err(|e| Error::io("cover csv", e))?;
        Ok(())
    }
}

/// Accepted squares of the dyadic cover, with their refinement level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SquareCover {
    pub base_side: f64,
    pub squares: Vec<(u32, Square)>,
    pub covered_area: f64,
    pub region_area: f64,
    pub shortfall: bool,
}

impl SquareCover {
    pub fn covered_fraction(&self) -> f64 {
        if self.region_area > 0.0 {
            self.covered_area / self.region_area
        } else {
            1.0
        }
    }

    pub fn plan(&self) -> CoverPlan {
        CoverPlan {
            shape: Shape::Square,
            elements: self
                .squares
                .iter()
                .map(|(_, q)| Placement { center: q.center(), scale: q.side })
                .collect(),
            covered_fraction: self.covered_fraction(),
            uncovered_area: (self.region_area - self.covered_area).max(0.0),
            shortfall: self.shortfall,
        }
    }
}

pub fn cover_squares(region: &dyn CoverRegion, max_side: f64, coverage_goal: f64) -> Result<CoverPlan> {
    Ok(dyadic_cover(region, max_side, coverage_goal, max_side / 256.0)?.plan())
}

/// Greedy dyadic cover processed level by level in row-major order.
pub fn dyadic_cover(region: &dyn CoverRegion, max_side: f64, coverage_goal: f64, floor: f64) -> Result<SquareCover> {
    if !(coverage_goal > 0.0 && coverage_goal < 1.0) {
        return Err(Error::Domain(format!("coverage goal {coverage_goal} outside (0,1)")));
    }
    if !(max_side > 0.0) {
        return Err(Error::Domain(format!("max side {max_side} must be positive")));
    }
    let b = region.bounds();
    let region_area = region.area();
    let h0 = max_side.min(b.width()).min(b.height());
    let mut cover = SquareCover {
        base_side: h0,
        squares: Vec::new(),
        covered_area: 0.0,
        region_area,
        shortfall: false,
    };
    if !(h0 > 0.0) || !(region_area > 0.0) {
        return Ok(cover);
    }
    let nx = ((b.width() / h0) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let ny = ((b.height() / h0) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut level: Vec<Square> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            level.push(Square { s: b.s0 + i as f64 * h0, t: b.t0 + j as f64 * h0, side: h0 });
        }
    }
    let target = coverage_goal * region_area;
    let mut depth = 0u32;
    while !level.is_empty() {
        let mut next = Vec::new();
        let classes: Vec<Occupancy> = level.par_iter().map(|sq| region.classify(sq)).collect();
        for (sq, class) in level.iter().zip(classes) {
            match class {
                Occupancy::Inside => {
                    cover.squares.push((depth, *sq));
                    cover.covered_area += sq.area();
                    if cover.covered_area >= target {
                        return Ok(cover);
                    }
                }
                Occupancy::Partial => {
                    if 0.5 * sq.side >= floor * (1.0 - 1e-12) {
                        let mut kids = sq.children();
                        kids.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.s.total_cmp(&y.s)));
                        next.extend(kids);
                    }
                }
                Occupancy::Outside => {}
            }
        }
        next.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.s.total_cmp(&y.s)));
        level = next;
        depth += 1;
    }
    cover.shortfall = true;
    Ok(cover)
}

/// Rhombic lattice of diamonds of half-height `epsilon` filling a square,
/// with the triangular gaps along the bottom and top edges filled by
/// `fill_levels` generations of half-size diamonds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiamondCover {
    pub square: Square,
    pub xi: f64,
    /// Rows of the main lattice are `2 k - 1`.
    pub k: usize,
    pub fill_levels: u32,
    pub epsilon: f64,
    pub columns: usize,
    pub offset: f64,
    pub count: u64,
    pub covered_fraction: f64,
    pub uncovered_area: f64,
    pub shortfall: bool,
}

struct Layout {
    columns: usize,
    main: u64,
    gaps: u64,
}

fn layout(k: usize, xi: f64) -> Layout {
    let columns = ((k as f64 / xi) * (1.0 + 1e-12)).floor() as usize;
    let kk = k as u64;
    let c = columns as u64;
    let main = if columns == 0 { 0 } else { kk * c + (kk - 1) * (c - 1) };
    let gaps = if columns == 0 { 0 } else { 2 * (c - 1) };
    Layout { columns, main, gaps }
}

fn lattice_fraction(k: usize, levels: u32, xi: f64, lay: &Layout) -> f64 {
    let e = 1.0 / (2.0 * k as f64);
    let diamond = 2.0 * xi * e * e;
    let gap = xi * e * e;
    lay.main as f64 * diamond + lay.gaps as f64 * gap * (1.0 - 0.5f64.powi(levels as i32))
}

const MAX_FILL_LEVELS: u32 = 24;

pub fn cover_diamonds(square: Square, xi: f64, coverage_goal: f64) -> Result<DiamondCover> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Domain(format!("xi={xi} must be positive")));
    }
    if !(coverage_goal > 0.0 && coverage_goal < 1.0) {
        return Err(Error::Domain(format!("coverage goal {coverage_goal} outside (0,1)")));
    }
    if !(square.side > 0.0) {
        return Err(Error::Domain(format!("square side {} must be positive", square.side)));
    }
    let k_min = (xi.ceil() as usize).max(1);
    let mut best: Option<(u64, usize, u32, f64)> = None;
    let mut widest: (f64, usize, u32) = (0.0, k_min, 0);
    for k in k_min..k_min + 512 {
        let lay = layout(k, xi);
        if lay.columns == 0 {
            continue;
        }
        if let Some((count, ..)) = best {
            if lay.main >= count {
                break;
            }
        }
        for levels in 0..=MAX_FILL_LEVELS {
            let f = lattice_fraction(k, levels, xi, &lay);
            if f > widest.0 {
                widest = (f, k, levels);
            }
            if f >= coverage_goal {
                let count = lay.main + lay.gaps * ((1u64 << levels) - 1);
                if best.map_or(true, |(c, ..)| count < c) {
                    best = Some((count, k, levels, f));
                }
                break;
            }
        }
    }
    let (k, levels, fraction, shortfall) = match best {
        Some((_, k, l, f)) => (k, l, f, false),
        None => (widest.1, widest.2, widest.0, true),
    };
    let lay = layout(k, xi);
    let epsilon = square.side / (2.0 * k as f64);
    let offset = 0.5 * (square.side - lay.columns as f64 * 2.0 * epsilon * xi).max(0.0);
    Ok(DiamondCover {
        square,
        xi,
        k,
        fill_levels: levels,
        epsilon,
        columns: lay.columns,
        offset,
        count: lay.main + lay.gaps * ((1u64 << levels) - 1),
        covered_fraction: fraction,
        uncovered_area: square.area() * (1.0 - fraction).max(0.0),
        shortfall,
    })
}

impl DiamondCover {
    /// Number of distinct diamond scales in use.
    pub fn scales(&self) -> u32 {
        1 + if self.columns > 1 { self.fill_levels } else { 0 }
    }

    fn to_world(&self, u: f64, tau: f64, scale: f64) -> Placement {
        let w = self.epsilon * self.xi;
        Placement {
            center: (self.square.s + self.offset + u * w, self.square.t + tau * self.epsilon),
            scale: scale * self.epsilon,
        }
    }

    fn main_valid(&self, x: i64, y: i64) -> bool {
        let rows = 2 * self.k as i64 - 1;
        if y < 1 || y > rows {
            return false;
        }
        let c = self.columns as i64;
        if (y - 1) % 2 == 0 {
            x % 2 != 0 && x >= 1 && x <= 2 * c - 1
        } else {
            x % 2 == 0 && x >= 2 && x <= 2 * c - 2
        }
    }

    /// Diamond (open) containing `(s, t)`, if any.
    pub fn locate(&self, s: f64, t: f64) -> Option<Placement> {
        if self.columns == 0 {
            return None;
        }
        let w = self.epsilon * self.xi;
        let u = (s - self.square.s - self.offset) / w;
        let tau = (t - self.square.t) / self.epsilon;
        let top = 2.0 * self.k as f64;
        if !(u > 0.0 && u < 2.0 * self.columns as f64 && tau > 0.0 && tau < top) {
            return None;
        }
        let alpha = u + tau;
        let beta = u - tau;
        let ra = 2.0 * (alpha / 2.0).round();
        let rb = 2.0 * (beta / 2.0).round();
        if (alpha - ra).abs() < 1.0 && (beta - rb).abs() < 1.0 {
            let x = (0.5 * (ra + rb)).round() as i64;
            let y = (0.5 * (ra - rb)).round() as i64;
            if self.main_valid(x, y) {
                return Some(self.to_world(x as f64, y as f64, 1.0));
            }
        }
        let (tau_edge, flip) = if tau < 1.0 {
            (tau, false)
        } else if tau > top - 1.0 {
            (top - tau, true)
        } else {
            return None;
        };
        let mut xc = 2.0 * (u / 2.0).round();
        if xc < 2.0 || xc > 2.0 * self.columns as f64 - 2.0 || (u - xc).abs() + tau_edge >= 1.0 {
            return None;
        }
        let mut e = 1.0;
        for _ in 0..self.fill_levels {
            let h = 0.5 * e;
            if (u - xc).abs() + (tau_edge - h).abs() < h {
                let tc = if flip { top - h } else { h };
                return Some(self.to_world(xc, tc, h));
            }
            xc += if u < xc { -h } else { h };
            e = h;
        }
        None
    }

    /// Explicit list of all diamonds; intended for small covers.
    pub fn elements(&self) -> Vec<Placement> {
        let mut out = Vec::with_capacity(self.count as usize);
        let c = self.columns as i64;
        let rows = 2 * self.k as i64 - 1;
        for y in 1..=rows {
            for x in 1..2 * c {
                if self.main_valid(x, y) {
                    out.push(self.to_world(x as f64, y as f64, 1.0));
                }
            }
        }
        let top = 2.0 * self.k as f64;
        for g in 1..c {
            let x0 = 2.0 * g as f64;
            let mut stack = vec![(x0, 1.0f64, 0u32)];
            while let Some((xc, e, lvl)) = stack.pop() {
                if lvl >= self.fill_levels {
                    continue;
                }
                let h = 0.5 * e;
                out.push(self.to_world(xc, h, h));
                out.push(self.to_world(xc, top - h, h));
                stack.push((xc - h, h, lvl + 1));
                stack.push((xc + h, h, lvl + 1));
            }
        }
        out.sort_by(|a, b| a.center.1.total_cmp(&b.center.1).then(a.center.0.total_cmp(&b.center.0)));
        out
    }

    pub fn plan(&self) -> CoverPlan {
        CoverPlan {
            shape: Shape::Diamond { xi: self.xi },
            elements: self.elements(),
            covered_fraction: self.covered_fraction,
            uncovered_area: self.uncovered_area,
            shortfall: self.shortfall,
        }
    }
}

pub fn diamond_contains(p: &Placement, xi: f64, s: f64, t: f64) -> bool {
    (s - p.center.0).abs() / (p.scale * xi) + (t - p.center.1).abs() / p.scale < 1.0
}
