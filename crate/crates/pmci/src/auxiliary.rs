//! Diamond sawtooth patches with zero weighted moment.
//!
//! On the diamond `|s - s0| / xi + |t - t0| / L < 1` the patch is piecewise
//! affine in `s` with slopes `-a, b, -a`. The middle kink sits at the root
//! `s~(t)` that makes `int tau^m v~ dtau` vanish across each time slice.
//!
//! All quantities are evaluated in local coordinates `y = (s - s1) / w`,
//! `w = s2 - s1`, which keeps slivers of width far below `s` accurate.

use crate::error::{Error, Result};
use crate::numerics::{binomial, Pchip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, PartialOrd, Ord)]
pub enum Region {
    Outside,
    D1Plus,
    D2Plus,
    D3Plus,
    D1Minus,
    D2Minus,
    D3Minus,
}

impl Region {
    pub const PIECES: [Region; 6] = [
        Region::D1Plus,
        Region::D2Plus,
        Region::D3Plus,
        Region::D1Minus,
        Region::D2Minus,
        Region::D3Minus,
    ];

    pub fn index(self) -> Option<usize> {
        Region::PIECES.iter().position(|&r| r == self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchEval {
    pub value: f64,
    pub ds: f64,
    pub dt: f64,
    /// `int_{s1(t)}^{s} tau^m v~ dtau`
    pub moment: f64,
    /// `int_{s1(t)}^{s} tau^m v~_t dtau`
    pub moment_t: f64,
    pub region: Region,
    /// Distance in `y` from the nearest region boundary.
    pub gap: f64,
}

impl PatchEval {
    pub const OUTSIDE: PatchEval = PatchEval {
        value: 0.0,
        ds: 0.0,
        dt: 0.0,
        moment: 0.0,
        moment_t: 0.0,
        region: Region::Outside,
        gap: 0.0,
    };
}

/// Powers `base^0 ..= base^m`.
fn powers(base: f64, m: u32) -> Vec<f64> {
    let mut out = vec![1.0; m as usize + 2];
    for k in 1..out.len() {
        out[k] = out[k - 1] * base;
    }
    out
}

/// Kinks of the unit sawtooth with middle root at `r`.
fn kinks(a: f64, b: f64, r: f64) -> (f64, f64) {
    (b * r / (a + b), (a + b * r) / (a + b))
}

/// `int_0^Y y^k vhat(y) dy` for the unit sawtooth `vhat`, for `k = 0..=m`.
fn unit_moments(a: f64, b: f64, r: f64, upto: f64, m: u32) -> Vec<f64> {
    let (y1, y2) = kinks(a, b, r);
    // int_lo^hi y^k (c0 + c1 y) dy
    let piece = |k: u32, lo: f64, hi: f64, c0: f64, c1: f64| {
        if hi <= lo {
            return 0.0;
        }
        let k1 = (k + 1) as f64;
        let k2 = (k + 2) as f64;
        c0 * (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / k1
            + c1 * (hi.powi(k as i32 + 2) - lo.powi(k as i32 + 2)) / k2
    };
    let y = upto.clamp(0.0, 1.0);
    (0..=m)
        .map(|k| {
            piece(k, 0.0, y.min(y1), 0.0, -a)
                + piece(k, y1, y.min(y2), -b * r, b)
                + piece(k, y2, y, a, -a)
        })
        .collect()
}

/// Weighted moment `int_{s1}^{s1 + w Y} tau^m v dtau` of the sawtooth of width `w`.
fn weighted_moment(a: f64, b: f64, r: f64, s1: f64, w: f64, upto: f64, m: u32) -> f64 {
    let mu = unit_moments(a, b, r, upto, m);
    let sp = powers(s1, m);
    let wp = powers(w, m + 1);
    (0..=m)
        .map(|k| binomial(m, k) * sp[(m - k) as usize] * wp[k as usize] * mu[k as usize])
        .sum::<f64>()
        * w
        * w
}

/// Root ratio `r = (s~ - s1) / (s2 - s1)` of the zero-moment condition.
fn root_ratio(a: f64, b: f64, m: u32, s1: f64, w: f64) -> Result<f64> {
    let g = |r: f64| {
        let mu = unit_moments(a, b, r, 1.0, m);
        let sp = powers(s1, m);
        let wp = powers(w, m);
        (0..=m)
            .map(|k| binomial(m, k) * sp[(m - k) as usize] * wp[k as usize] * mu[k as usize])
            .sum::<f64>()
    };
    if m == 0 {
        return Ok(0.5);
    }
    if w == 0.0 {
        return Ok(0.5);
    }
    let (g0, g1) = (g(0.0), g(1.0));
    if !(g0 > 0.0 && g1 < 0.0) {
        return Err(Error::Degenerate(format!(
            "moment bracket failed: F(s1)={g0}, F(s2)={g1} for a={a}, b={b}, s1={s1}, w={w}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root `s~` in `(s1, s2)` of
/// `(a s1 + b x)^{m+2} - a (a+b)^{m+1} s1^{m+2} - (a s2 + b x)^{m+2} + a (a+b)^{m+1} s2^{m+2}`.
pub fn solve_stilde(a: f64, b: f64, m: u32, s1: f64, s2: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Degenerate(format!("slopes a={a}, b={b} must be positive")));
    }
    if !(s1 > 0.0 && s2 > s1) {
        return Err(Error::Degenerate(format!("need 0 < s1 < s2, got s1={s1}, s2={s2}")));
    }
    let w = s2 - s1;
    let r = root_ratio(a, b, m, s1, w)?;
    Ok(s1 + r * w)
}

/// `sum_{j=0}^{k-1} x^j y^{k-1-j}`, so that `x^k - y^k = (x - y) * this`.
fn power_sum(x: f64, y: f64, k: u32) -> f64 {
    (0..k).map(|j| x.powi(j as i32) * y.powi((k - 1 - j) as i32)).sum()
}

/// Geometry of one diamond patch; evaluation re-solves the root per time slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub a: f64,
    pub b: f64,
    pub s01: f64,
    pub s02: f64,
    pub t0: f64,
    pub half_height: f64,
    pub m: u32,
}

#[derive(Debug, Clone, Copy)]
struct Slice {
    s1: f64,
    w: f64,
    ds1: f64,
    r: f64,
}

impl PatchGeometry {
    pub fn width(&self) -> f64 {
        self.s02 - self.s01
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.s01 + self.s02)
    }

    /// Speed `|s1'|` of the affine boundaries.
    pub fn boundary_speed(&self) -> f64 {
        self.width() / (2.0 * self.half_height)
    }

    pub fn value_bound(&self) -> f64 {
        (self.a + self.b) / 4.0 * self.width()
    }

    pub fn moment_bound(&self) -> f64 {
        (self.a + self.b) / 4.0 * self.s02.powi(self.m as i32) * self.width() * self.width()
    }

    pub fn dt_bound(&self) -> f64 {
        self.a.max(self.b) * (1.0 + (self.s02 / self.s01).powi(self.m as i32)) * self.boundary_speed()
    }

    pub fn stilde_slope_bound(&self) -> f64 {
        (1.0 + (self.s02 / self.s01).powi(self.m as i32)) * self.boundary_speed()
    }

    fn slice(&self, t: f64) -> Result<Option<Slice>> {
        let tau = (t - self.t0).abs();
        if !(tau < self.half_height) {
            return Ok(None);
        }
        let frac = (self.half_height - tau) / self.half_height;
        let w = self.width() * frac;
        let s1 = self.s01 + 0.5 * self.width() * (1.0 - frac);
        let sign = if t >= self.t0 { 1.0 } else { -1.0 };
        let r = root_ratio(self.a, self.b, self.m, s1, w)?;
        Ok(Some(Slice {
            s1,
            w,
            ds1: sign * self.boundary_speed(),
            r,
        }))
    }

    /// `s~(t)`; equals the center outside the open time interval.
    pub fn stilde(&self, t: f64) -> Result<f64> {
        Ok(match self.slice(t)? {
            Some(sl) => sl.s1 + sl.r * sl.w,
            None => self.center(),
        })
    }

    fn stilde_rate(&self, sl: &Slice) -> f64 {
        let (a, b, m) = (self.a, self.b, self.m);
        let u = sl.r * sl.w;
        let s2 = sl.s1 + sl.w;
        let x = sl.s1 + u;
        let ds2 = -sl.ds1;
        let s1p = power_sum(a * sl.s1 + b * x, (a + b) * sl.s1, m + 1);
        let s2p = power_sum((a + b) * s2, a * s2 + b * x, m + 1);
        let s3p = power_sum(a * s2 + b * x, a * sl.s1 + b * x, m + 1);
        (sl.ds1 * sl.r * s1p + ds2 * (1.0 - sl.r) * s2p) / s3p
    }

    pub fn stilde_derivative(&self, t: f64) -> Result<f64> {
        Ok(match self.slice(t)? {
            Some(sl) => self.stilde_rate(&sl),
            None => 0.0,
        })
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<PatchEval> {
        let Some(sl) = self.slice(t)? else {
            return Ok(PatchEval::OUTSIDE);
        };
        if !(s >= sl.s1) || sl.w <= 0.0 {
            return Ok(PatchEval::OUTSIDE);
        }
        let y = (s - sl.s1) / sl.w;
        if !(y < 1.0) {
            return Ok(PatchEval::OUTSIDE);
        }
        let (a, b, m) = (self.a, self.b, self.m);
        let (y1, y2) = kinks(a, b, sl.r);
        let plus = t >= self.t0;
        let rate = self.stilde_rate(&sl);
        let ds2 = -sl.ds1;
        let (region, value, ds, dt) = if y < y1 {
            (if plus { Region::D1Plus } else { Region::D1Minus }, -a * y * sl.w, -a, a * sl.ds1)
        } else if y < y2 {
            (if plus { Region::D2Plus } else { Region::D2Minus }, b * (y - sl.r) * sl.w, b, -b * rate)
        } else {
            (if plus { Region::D3Plus } else { Region::D3Minus }, -a * (y - 1.0) * sl.w, -a, a * ds2)
        };
        let moment = weighted_moment(a, b, sl.r, sl.s1, sl.w, y, m);
        let sp = powers(sl.s1, m);
        let wp = powers(sl.w, m + 1);
        // int tau^m over [s1 + w lo, s1 + w hi]
        let span = |lo: f64, hi: f64| -> f64 {
            if hi <= lo {
                return 0.0;
            }
            (0..=m)
                .map(|k| {
                    let e = k as i32 + 1;
                    binomial(m, k) * sp[(m - k) as usize] * wp[k as usize + 1] * (hi.powi(e) - lo.powi(e)) / e as f64
                })
                .sum()
        };
        let moment_t = a * sl.ds1 * span(0.0, y.min(y1)) - b * rate * span(y1, y.min(y2)) + a * ds2 * span(y2, y);
        let gap = y.min((y - y1).abs()).min((y - y2).abs()).min(1.0 - y);
        Ok(PatchEval {
            value,
            ds,
            dt,
            moment,
            moment_t,
            region,
            gap,
        })
    }

    /// `int_{s1}^{s2} tau^m v~ dtau` on the slice at `t`.
    pub fn total_moment(&self, t: f64) -> Result<f64> {
        Ok(match self.slice(t)? {
            Some(sl) => weighted_moment(self.a, self.b, sl.r, sl.s1, sl.w, 1.0, self.m),
            None => 0.0,
        })
    }

    /// Boundaries `(s1, s~1, s~, s~2, s2)` at `t`, if inside the time span.
    pub fn boundaries(&self, t: f64) -> Result<Option<[f64; 5]>> {
        Ok(self.slice(t)?.map(|sl| {
            let (y1, y2) = kinks(self.a, self.b, sl.r);
            [sl.s1, sl.s1 + y1 * sl.w, sl.s1 + sl.r * sl.w, sl.s1 + y2 * sl.w, sl.s1 + sl.w]
        }))
    }
}

/// A patch together with a sampled table of `s~` over `[t0, t0 + L]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxiliaryPatch {
    pub geometry: PatchGeometry,
    pub stilde_table: Pchip,
}

pub fn build_patch(a: f64, b: f64, s01: f64, s02: f64, t0: f64, half_height: f64, m: u32) -> Result<AuxiliaryPatch> {
    build_patch_sampled(a, b, s01, s02, t0, half_height, m, 257)
}

#[allow(clippy::too_many_arguments)]
pub fn build_patch_sampled(
    a: f64,
    b: f64,
    s01: f64,
    s02: f64,
    t0: f64,
    half_height: f64,
    m: u32,
    samples: usize,
) -> Result<AuxiliaryPatch> {
    if !(a > 0.0 && b > 0.0 && half_height > 0.0) {
        return Err(Error::Degenerate(format!("need a, b, L > 0 (a={a}, b={b}, L={half_height})")));
    }
    if !(s01 > 0.0 && s02 > s01) {
        return Err(Error::Degenerate(format!("need 0 < s01 < s02, got {s01}, {s02}")));
    }
    let geometry = PatchGeometry {
        a,
        b,
        s01,
        s02,
        t0,
        half_height,
        m,
    };
    let n = samples.max(3);
    let ts: Vec<f64> = (0..n).map(|k| half_height * k as f64 / (n - 1) as f64).collect();
    let mut vals = Vec::with_capacity(n);
    for &tau in &ts {
        let x = if tau >= half_height { geometry.center() } else { geometry.stilde(t0 + tau)? };
        vals.push(x);
    }
    let limit = geometry.stilde_slope_bound() * 1.01;
    for k in 0..n - 1 {
        let slope = (vals[k + 1] - vals[k]).abs() / (ts[k + 1] - ts[k]);
        if slope > limit {
            return Err(Error::Construction(format!(
                "s~ slope {slope} exceeds bound {limit} near t={}",
                t0 + ts[k]
            )));
        }
    }
    let patch = AuxiliaryPatch {
        geometry,
        stilde_table: Pchip::new(ts, vals),
    };
    let tip = patch.tip_extrapolation_error();
    if tip > 1e-6 {
        return Err(Error::Construction(format!("s~ misses the tip center by {tip}")));
    }
    Ok(patch)
}

impl AuxiliaryPatch {
    /// Gap between the linear extrapolation of the last two interior table
    /// entries and the center value at the tip.
    pub fn tip_extrapolation_error(&self) -> f64 {
        let (x, y) = (&self.stilde_table.x, &self.stilde_table.y);
        let n = x.len();
        let slope = (y[n - 2] - y[n - 3]) / (x[n - 2] - x[n - 3]);
        (y[n - 2] + slope * (x[n - 1] - x[n - 2]) - self.geometry.center()).abs()
    }

    /// Tabulated `s~`, reflected evenly about `t0`.
    pub fn stilde_interpolated(&self, t: f64) -> f64 {
        let tau = (t - self.geometry.t0).abs().min(self.geometry.half_height);
        self.stilde_table.eval(tau)
    }
}

pub fn eval_patch(patch: &AuxiliaryPatch, s: f64, t: f64) -> Result<PatchEval> {
    patch.geometry.eval(s, t)
}

pub fn patch_moment(patch: &AuxiliaryPatch, s: f64, t: f64) -> Result<f64> {
    let g = &patch.geometry;
    match g.boundaries(t)? {
        None => Ok(0.0),
        Some(bd) if s >= bd[4] => g.total_moment(t),
        Some(bd) if s <= bd[0] => Ok(0.0),
        Some(_) => Ok(g.eval(s, t)?.moment),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemCheck {
    pub item: char,
    pub name: &'static str,
    pub pass: bool,
    /// Worst observed ratio or relative error for the item.
    pub worst: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatchReport {
    pub pass: bool,
    pub items: Vec<ItemCheck>,
}

impl PatchReport {
    pub fn item(&self, c: char) -> &ItemCheck {
        self.items.iter().find(|i| i.item == c).expect("known item")
    }
}

pub fn verify_patch(patch: &AuxiliaryPatch, tolerance: f64) -> Result<PatchReport> {
    let g = &patch.geometry;
    let (vbound, hbound, tbound) = (g.value_bound(), g.moment_bound(), g.dt_bound());
    let rows = 41;
    let cols = 41;
    let (mut wa, mut wb, mut wc, mut wd, mut we, mut wf, mut wg, mut wh) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let fd_rel = 1e-6;
    for jr in 0..rows {
        let tau = g.half_height * (0.98 * (2.0 * jr as f64 / (rows - 1) as f64 - 1.0));
        let t = g.t0 + tau;
        let bd = g.boundaries(t)?.expect("inside time span");
        let w = bd[4] - bd[0];
        wa = wa.max(g.eval(bd[0], t)?.value.abs() / vbound);
        let near_end = g.eval(bd[4] - 1e-9 * w, t)?;
        wa = wa.max((near_end.value.abs() - 1e-9 * w * g.a).max(0.0) / vbound);
        for edge in [bd[1], bd[3]] {
            let left = g.eval(edge - 1e-9 * w, t)?.value;
            let right = g.eval(edge + 1e-9 * w, t)?.value;
            wa = wa.max(((left - right).abs() - 2e-9 * w * (g.a + g.b)).max(0.0) / vbound);
        }
        wf = wf.max(g.total_moment(t)?.abs() / hbound);
        for ic in 0..cols {
            let y = (ic as f64 + 0.5) / cols as f64;
            let s = bd[0] + y * w;
            let e = g.eval(s, t)?;
            let expected_ds = match e.region {
                Region::D2Plus | Region::D2Minus => g.b,
                Region::Outside => 0.0,
                _ => -g.a,
            };
            if e.ds != expected_ds {
                wc = wc.max(1.0);
            }
            wd = wd.max(e.dt.abs() / tbound);
            wg = wg.max(e.value.abs() / vbound);
            wh = wh.max(e.moment.abs() / hbound);
            if e.gap > 1e-3 {
                let hs = fd_rel * w;
                let fs = (g.eval(s + hs, t)?.value - g.eval(s - hs, t)?.value) / (2.0 * hs);
                let ht = fd_rel * g.half_height * e.gap.min(0.01);
                let up = g.eval(s, t + ht)?;
                let dn = g.eval(s, t - ht)?;
                if up.region == e.region && dn.region == e.region {
                    let ft = (up.value - dn.value) / (2.0 * ht);
                    wb = wb.max((fs - e.ds).abs() / (g.a + g.b));
                    wb = wb.max((ft - e.dt).abs() / tbound);
                    let fm = (up.moment - dn.moment) / (2.0 * ht);
                    we = we.max((fm - e.moment_t).abs() / (hbound / g.half_height));
                }
            }
        }
    }
    let tol = tolerance.max(0.0);
    let fd_tol = 1e-4;
    let items = vec![
        ItemCheck { item: 'a', name: "zero on the patch boundary", pass: wa <= tol, worst: wa },
        ItemCheck { item: 'b', name: "gradient consistency per region", pass: wb <= fd_tol, worst: wb },
        ItemCheck { item: 'c', name: "s-derivative values", pass: wc == 0.0, worst: wc },
        ItemCheck { item: 'd', name: "t-derivative bound", pass: wd <= 1.01, worst: wd },
        ItemCheck { item: 'e', name: "moment time derivative", pass: we <= fd_tol, worst: we },
        ItemCheck { item: 'f', name: "zero total moment", pass: wf <= tol, worst: wf },
        ItemCheck { item: 'g', name: "value bound", pass: wg <= 1.0 + tol, worst: wg },
        ItemCheck { item: 'h', name: "moment bound", pass: wh <= 1.0 + tol, worst: wh },
    ];
    Ok(PatchReport {
        pass: items.iter().all(|i| i.pass),
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct_f(a: f64, b: f64, m: u32, s1: f64, s2: f64, x: f64) -> f64 {
        let e = m as i32 + 2;
        let c = a * (a + b).powi(m as i32 + 1);
        (a * s1 + b * x).powi(e) - c * s1.powi(e) - (a * s2 + b * x).powi(e) + c * s2.powi(e)
    }

    #[test]
    fn root_examples() {
        assert_eq!(solve_stilde(0.3, 2.0, 0, 0.2, 0.9).unwrap(), 0.55);
        let r = solve_stilde(1.0, 1.0, 1, 1.0, 3.0).unwrap();
        assert!((r - (17f64.sqrt() - 2.0)).abs() < 1e-12);
        let r = solve_stilde(0.7, 1.3, 2, 0.5, 0.5 + 1e-12).unwrap();
        assert!((r - 0.5).abs() < 2e-12);
        assert!(solve_stilde(1.0, 1.0, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn root_agrees_with_polynomial_form() {
        for (a, b, m, s1, s2) in [(0.7, 1.1, 2, 0.5, 0.9), (2.0, 0.3, 3, 0.1, 1.0), (1.0, 1.0, 1, 0.4, 0.41)] {
            let x = solve_stilde(a, b, m, s1, s2).unwrap();
            let oracle = crate::numerics::bisect(|x| direct_f(a, b, m, s1, s2, x), s1, s2, 1e-15);
            assert!((x - oracle).abs() < 1e-12 * s2, "{x} vs {oracle}");
            assert!(direct_f(a, b, m, s1, s2, s1) > 0.0 && direct_f(a, b, m, s1, s2, s2) < 0.0);
        }
    }

    #[test]
    fn patch_examples() {
        let p = build_patch(0.7, 1.1, 0.5, 0.9, 0.3, 0.2, 0).unwrap();
        for k in 0..20 {
            let t = 0.1 + 0.4 * k as f64 / 19.0;
            assert!((p.stilde_interpolated(t) - 0.7).abs() < 1e-15);
        }
        let p = build_patch(0.7, 1.1, 0.5, 0.9, 0.3, 0.2, 2).unwrap();
        assert_eq!(p.stilde_interpolated(0.5), 0.7);
        assert_eq!(p.stilde_interpolated(0.1), 0.7);
        let report = verify_patch(&p, 1e-8).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn values_and_moments() {
        let p = build_patch(0.7, 1.1, 0.5, 0.9, 0.3, 0.2, 2).unwrap();
        let t = 0.37;
        let bd = p.geometry.boundaries(t).unwrap().unwrap();
        assert_eq!(eval_patch(&p, bd[0], t).unwrap().value, 0.0);
        assert_eq!(eval_patch(&p, bd[4], t).unwrap().value, 0.0);
        let mid = eval_patch(&p, 0.5 * (bd[1] + bd[3]), t).unwrap();
        assert_eq!(mid.ds, 1.1);
        assert!(matches!(mid.region, Region::D2Plus));
        assert_eq!(patch_moment(&p, bd[0], t).unwrap(), 0.0);
        assert!(patch_moment(&p, bd[4], t).unwrap().abs() < 1e-10 * p.geometry.moment_bound());
        let e = eval_patch(&p, 0.5 * (bd[1] + bd[3]), 2.0 * 0.3 - t).unwrap();
        assert_eq!(e.value, mid.value);
        assert_eq!(e.dt, -mid.dt);
    }

    #[test]
    fn symmetric_flat_patch_is_odd() {
        let p = build_patch(0.9, 0.9, 0.4, 0.6, 0.0, 0.1, 0).unwrap();
        for k in 1..20 {
            let d = 0.09 * k as f64 / 20.0;
            let l = eval_patch(&p, 0.5 - d, 0.02).unwrap().value;
            let r = eval_patch(&p, 0.5 + d, 0.02).unwrap().value;
            assert!((l + r).abs() < 1e-15);
        }
    }

    #[test]
    fn tip_extrapolation_meets_center() {
        for (w, m) in [(0.4, 2), (0.3, 3), (0.01, 3), (1e-6, 1)] {
            let p = build_patch(0.4, 1.6, 0.5, 0.5 + w, 1.0, 0.05, m).unwrap();
            assert!(p.tip_extrapolation_error() <= 1e-6);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let p = build_patch(0.7, 1.1, 0.5, 0.9, 0.3, 0.2, 1).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let q: AuxiliaryPatch = serde_json::from_str(&json).unwrap();
        assert_eq!(q.geometry, p.geometry);
        assert_eq!(q.stilde_table.y, p.stilde_table.y);
    }

    proptest! {
        #[test]
        fn root_lies_between_ends(a in 0.05f64..3.0, b in 0.05f64..3.0, s1 in 0.01f64..2.0, w in 1e-6f64..1.0, m in 0u32..5) {
            let x = solve_stilde(a, b, m, s1, s1 + w).unwrap();
            prop_assert!(x > s1 && x < s1 + w);
        }

        #[test]
        fn moment_vanishes_at_right_end(
            a in 0.05f64..2.0, b in 0.05f64..2.0, s01 in 0.1f64..1.0, w in 1e-4f64..0.05, tau in -0.95f64..0.95, m in 0u32..4
        ) {
            let p = build_patch(a, b, s01, s01 + w, 0.5, 0.1, m).unwrap();
            let t = 0.5 + 0.1 * tau;
            let total = p.geometry.total_moment(t).unwrap();
            prop_assert!(total.abs() <= 1e-10 * p.geometry.moment_bound());
        }
    }
}
