//! Reference quadrature shared by the integration tests. It relies on the
//! Gauss–Legendre nodes of `gauss-quad` only, not on the library's own
//! quadrature.
#![allow(dead_code)]

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

pub struct Rule(Vec<(f64, f64)>);

impl Rule {
    pub fn new(points: usize) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(points).unwrap());
        Rule(gl.as_node_weight_pairs().to_vec())
    }

    pub fn on(&self, a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        half * self.0.iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
    }

    /// Uniform composite rule.
    pub fn composite(&self, a: f64, b: f64, pieces: usize, f: &impl Fn(f64) -> f64) -> f64 {
        let w = (b - a) / pieces as f64;
        (0..pieces).map(|k| self.on(a + k as f64 * w, a + (k + 1) as f64 * w, f)).sum()
    }

    /// `∫_p^q g(u) du` for `0 <= p < q`, with `g` allowed a logarithmic
    /// singularity at `u = 0`. Pieces halve towards `p`.
    pub fn graded(&self, p: f64, q: f64, g: &impl Fn(f64) -> f64) -> f64 {
        self.graded_to(p, q, 1e-30, g)
    }

    /// As [`Rule::graded`], halving until the innermost piece is below
    /// `floor * (q - p)`; power singularities need a much smaller floor.
    pub fn graded_to(&self, p: f64, q: f64, floor: f64, g: &impl Fn(f64) -> f64) -> f64 {
        assert!(p >= 0.0 && q > p);
        let len = q - p;
        let mut total = 0.0;
        let mut hi = len;
        loop {
            let lo = 0.5 * hi;
            total += self.on(p + lo, p + hi, g);
            hi = lo;
            if hi < 1e-3 * p || hi < floor * len {
                break;
            }
        }
        if p > 0.0 {
            total += self.on(p, p + hi, g);
        }
        total
    }
}

/// `(∫_c^d H(t - s) dt, ∫_c^d H(t - s) t dt)` for a kernel of the offset.
pub fn offset_moments(h: impl Fn(f64) -> f64, s: f64, c: f64, d: f64) -> (f64, f64) {
    offset_moments_to(h, s, c, d, 1e-30)
}

/// As [`offset_moments`] with an explicit grading floor.
pub fn offset_moments_to(h: impl Fn(f64) -> f64, s: f64, c: f64, d: f64, floor: f64) -> (f64, f64) {
    let rule = Rule::new(20);
    let (u1, u2) = (c - s, d - s);
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    // positive offsets
    if u2 > 0.0 {
        let p = u1.max(0.0);
        m0 += rule.graded_to(p, u2, floor, &|u| h(u));
        m1 += rule.graded_to(p, u2, floor, &|u| h(u) * (s + u));
    }
    // negative offsets, mirrored
    if u1 < 0.0 {
        let p = (-u2).max(0.0);
        m0 += rule.graded_to(p, -u1, floor, &|v| h(-v));
        m1 += rule.graded_to(p, -u1, floor, &|v| h(-v) * (s - v));
    }
    (m0, m1)
}
