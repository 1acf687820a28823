//! Scalar root finding, 1-D minimization, Gauss-Legendre rules and
//! monotone cubic interpolation shared by the other modules.

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Bisection on a bracket whose endpoint values have opposite signs.
/// Returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
/// Returns `(argmin, min)` and never does worse than the endpoints.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc < fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Dense sampling of `f` on `[lo, hi]` followed by golden-section refinement
/// on the bracket around the best sample.
pub fn sampled_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, samples: usize, x_tol: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let n = samples.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_k = 0;
    let mut best_f = f64::INFINITY;
    for k in 0..n {
        let x = if k == n - 1 { hi } else { lo + step * k as f64 };
        let fx = f(x);
        if fx < best_f {
            best_f = fx;
            best_k = k;
        }
    }
    let a = if best_k == 0 { lo } else { lo + step * (best_k - 1) as f64 };
    let b = if best_k + 1 >= n { hi } else { lo + step * (best_k + 1) as f64 };
    let (x, fx) = golden_min(&f, a, b.min(hi), x_tol);
    if fx <= best_f {
        (x, fx)
    } else {
        let xb = if best_k == n - 1 { hi } else { lo + step * best_k as f64 };
        (xb, best_f)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], `n >= 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Pchip {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Pchip {
        let n = x.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
            let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
            if n == 2 {
                d[0] = del[0];
                d[1] = del[0];
            } else {
                for k in 1..n - 1 {
                    if del[k - 1] * del[k] > 0.0 {
                        let w1 = 2.0 * h[k] + h[k - 1];
                        let w2 = h[k] + 2.0 * h[k - 1];
                        d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                    }
                }
                d[0] = end_slope(h[0], h[1], del[0], del[1]);
                d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
            }
        }
        Pchip { x, y, d }
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.x.len() == 1 {
            return self.y[0];
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.x.len() == 1 {
            return 0.0;
        }
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let dh00 = 6.0 * u * (u - 1.0) / h;
        let dh10 = (1.0 - u) * (1.0 - 3.0 * u);
        let dh01 = -dh00;
        let dh11 = u * (3.0 * u - 2.0);
        dh00 * self.y[k] + dh10 * self.d[k] + dh01 * self.y[k + 1] + dh11 * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_rule_integrates_degree_five() {
        let (x, w) = gauss_legendre(3);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((s - 0.4).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pchip_reproduces_nodes_and_monotone_data() {
        let x: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t * t).collect();
        let p = Pchip::new(x.clone(), y.clone());
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-15);
        }
        let mut prev = p.eval(0.0);
        for k in 1..1000 {
            let v = p.eval(k as f64 / 1000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(4, 0), 1.0);
    }
}
