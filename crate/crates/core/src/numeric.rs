//! Small numerical helpers shared across modules.

/// Neumaier compensated accumulator. Sums are order-sensitive only at the
/// level of the compensation term, which keeps reductions reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Accumulator::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Golden-section search for the minimizer of a unimodal function on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Golden-section search to a coarse bracket, then a three-point parabolic
/// step whose vertex is far less sensitive to rounding in `f` than the
/// bracket itself.
pub fn golden_section_polished<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let t = golden_section(&mut f, a, b, 1e-6);
    let h = 1e-3 * (1.0 + t.abs()).min(b - a);
    let (f0, f1, f2) = (f(t - h), f(t), f(t + h));
    let curv = f0 - 2.0 * f1 + f2;
    if curv <= 0.0 {
        return golden_section(f, a, b, tol);
    }
    let mut x = t + 0.5 * h * (f0 - f2) / curv;
    // parabolas on shrinking stencils around the refined centre
    let mut h2 = h;
    for _ in 0..2 {
        h2 *= 0.1;
        let (g0, g1, g2) = (f(x - h2), f(x), f(x + h2));
        let c2 = g0 - 2.0 * g1 + g2;
        if c2 > 0.0 {
            x += 0.5 * h2 * (g0 - g2) / c2;
        }
    }
    x
}

/// Fixed-order Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order.max(1);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

/// Adaptive Gauss-Legendre integral of `f` over `[a, b]` to relative tolerance `tol`.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (xs, ws) = gauss_legendre_unit(10);
    let rule = |lo: f64, hi: f64| -> f64 {
        let h = hi - lo;
        compensated_sum(xs.iter().zip(&ws).map(|(x, w)| w * f(lo + h * x))) * h
    };
    fn rec<R: Fn(f64, f64) -> f64>(rule: &R, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = rule(lo, mid);
        let right = rule(mid, hi);
        let refined = left + right;
        if depth == 0 || (refined - whole).abs() <= tol * refined.abs().max(1e-300) {
            return refined;
        }
        rec(rule, lo, mid, left, tol, depth - 1) + rec(rule, mid, hi, right, tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let whole = rule(a, b);
    rec(&rule, a, b, whole, tol, 20)
}
