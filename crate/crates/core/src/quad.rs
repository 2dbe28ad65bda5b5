//! One-dimensional adaptive Gauss–Legendre quadrature, including integrands
//! with one integrable endpoint or interior singularity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const MAX_CACHED: usize = 64;

static RULES: [OnceLock<GaussRule>; MAX_CACHED + 1] = [const { OnceLock::new() }; MAX_CACHED + 1];

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pairs: Vec<(f64, f64)>,
}

impl GaussRule {
    pub fn new(points: NonZeroUsize) -> Self {
        let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(points)
            .as_node_weight_pairs()
            .to_vec();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        GaussRule { pairs }
    }

    pub fn points(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for &(x, w) in &self.pairs {
            acc += w * f(mid + half * x);
        }
        half * acc
    }

    /// Same as [`GaussRule::integrate`], additionally returning the integral of `|f|`.
    fn integrate_with_abs<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let (mut acc, mut abs) = (0.0, 0.0);
        for &(x, w) in &self.pairs {
            let v = f(mid + half * x);
            acc += w * v;
            abs += w * v.abs();
        }
        (half * acc, half.abs() * abs)
    }
}

/// Shared Gauss–Legendre rule with `points` nodes (cached for up to 64 points).
pub fn gauss_rule(points: usize) -> GaussRule {
    let points = points.max(1);
    if points <= MAX_CACHED {
        RULES[points]
            .get_or_init(|| GaussRule::new(NonZeroUsize::new(points).unwrap()))
            .clone()
    } else {
        GaussRule::new(NonZeroUsize::new(points).unwrap())
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    /// False when the subdivision budget ran out before the tolerance was met,
    /// or when the integrand produced a non-finite value.
    pub converged: bool,
    pub intervals: usize,
}

impl QuadResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Options for [`adaptive`] and [`singular_quad`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Gauss–Legendre points per subinterval.
    pub points: usize,
    /// Requested error relative to the integral of `|f|`.
    pub rel_tol: f64,
    /// Maximum number of subintervals.
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            points: 10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl AdaptiveOptions {
    pub fn with_tol(tol: f64) -> Self {
        AdaptiveOptions {
            rel_tol: tol,
            ..Default::default()
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    abs: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn estimate<F: Fn(f64) -> f64>(rule: &GaussRule, f: &F, a: f64, b: f64) -> Piece {
    let m = 0.5 * (a + b);
    let (coarse, _) = rule.integrate_with_abs(a, b, f);
    let (l, la) = rule.integrate_with_abs(a, m, f);
    let (r, ra) = rule.integrate_with_abs(m, b, f);
    let value = l + r;
    let error = if value.is_finite() && coarse.is_finite() {
        (coarse - value).abs()
    } else {
        f64::NAN
    };
    Piece {
        a,
        b,
        value,
        abs: la + ra,
        error,
    }
}

/// Globally adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate falls below `rel_tol * ∫|f|` or the interval budget is exhausted.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &AdaptiveOptions) -> QuadResult {
    adaptive_on(&f, &[a, b], opts)
}

/// Adaptive integration over consecutive breakpoints `breaks[0] < breaks[1] < ...`.
pub fn adaptive_on<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], opts: &AdaptiveOptions) -> QuadResult {
    let rule = gauss_rule(opts.points);
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(estimate(&rule, f, w[0], w[1]));
        }
    }
    if heap.is_empty() {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
            intervals: 0,
        };
    }
    let (mut value, mut abs, mut error) = heap.iter().fold((0.0, 0.0, 0.0), |acc, p| {
        (acc.0 + p.value, acc.1 + p.abs, acc.2 + p.error)
    });
    loop {
        if !value.is_finite() || !error.is_finite() {
            return QuadResult {
                value: f64::NAN,
                error: f64::INFINITY,
                converged: false,
                intervals: heap.len(),
            };
        }
        let target = opts.rel_tol * abs;
        if error <= target || heap.len() >= opts.max_intervals {
            let mut pieces = heap.into_vec();
            pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
            let value = pieces.iter().map(|p| p.value).sum();
            let error: f64 = pieces.iter().map(|p| p.error).sum();
            return QuadResult {
                value,
                error,
                converged: error <= target,
                intervals: pieces.len(),
            };
        }
        let worst = heap.pop().expect("non-empty heap");
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Interval cannot be split further in floating point.
            let mut pieces = heap.into_vec();
            pieces.push(worst);
            pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
            let value = pieces.iter().map(|p| p.value).sum();
            return QuadResult {
                value,
                error,
                converged: false,
                intervals: pieces.len(),
            };
        }
        let left = estimate(&rule, f, worst.a, m);
        let right = estimate(&rule, f, m, worst.b);
        value += left.value + right.value - worst.value;
        abs += left.abs + right.abs - worst.abs;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// Exponent of the algebraic substitution `t = p + (e - p) u^q` applied on each
/// side of a declared singular point `p`.
const GRADING_POWER: i32 = 4;

/// Integrate `f` over `[a, b]` where `f` may carry one integrable singularity
/// at `singular` (inside or at an end of the interval).
///
/// The interval is split at the singular point and each side is mapped through
/// `t = p + (e - p) u^4`, which flattens logarithmic and algebraic endpoint
/// singularities before the adaptive rule is applied. `f` is never evaluated at
/// the singular point itself.
pub fn singular_quad<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    singular: Option<f64>,
    tol: f64,
) -> QuadResult {
    singular_quad_with(f, a, b, singular, &AdaptiveOptions::with_tol(tol))
}

pub fn singular_quad_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    singular: Option<f64>,
    opts: &AdaptiveOptions,
) -> QuadResult {
    match singular {
        Some(p) if p >= a.min(b) && p <= a.max(b) => offset_quad(
            |d: f64| {
                let t = p + d;
                if t == p {
                    // offset below the spacing of p
                    0.0
                } else {
                    f(t)
                }
            },
            a,
            b,
            p,
            opts,
        ),
        _ => {
            let (lo, hi, sign) = if b < a { (b, a, -1.0) } else { (a, b, 1.0) };
            let r = adaptive(&f, lo, hi, opts);
            QuadResult {
                value: sign * r.value,
                ..r
            }
        }
    }
}

/// Like [`singular_quad_with`], but the integrand is given as a function of the
/// offset `δ = t − p` from the singular point `p ∈ [a, b]`.
///
/// Offsets are generated exactly, so singularities are resolved below the
/// floating-point spacing of `p` itself.
pub fn offset_quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, p: f64, opts: &AdaptiveOptions) -> QuadResult {
    let (a, b, sign) = if b < a { (b, a, -1.0) } else { (a, b, 1.0) };
    let mut total = QuadResult {
        value: 0.0,
        error: 0.0,
        converged: true,
        intervals: 0,
    };
    // (direction, length) of each side measured away from p
    for (dir, len) in [(-1.0, p - a), (1.0, b - p)] {
        if len <= 0.0 {
            continue;
        }
        let q = GRADING_POWER;
        let g = |u: f64| {
            let d = dir * len * u.powi(q);
            if d == 0.0 {
                return 0.0;
            }
            f(d) * len * f64::from(q) * u.powi(q - 1)
        };
        let r = adaptive(g, 0.0, 1.0, opts);
        total.value += r.value;
        total.error += r.error;
        total.converged &= r.converged;
        total.intervals += r.intervals;
    }
    QuadResult {
        value: sign * total.value,
        ..total
    }
}
