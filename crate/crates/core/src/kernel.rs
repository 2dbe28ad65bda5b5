//! Kernel factors of `H(s,t) L(s,t) N(x(t))`. The weakly singular factor `H`
//! carries its product-integration moments; `L` is interpolated linearly in `t`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::quad::singular_quad;

type Eval2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type MomentFn = Arc<dyn Fn(f64, f64, f64) -> (f64, f64) + Send + Sync>;

/// Tolerance of the quadrature fallback for custom factors without moments.
pub const CUSTOM_MOMENT_TOL: f64 = 1e-13;

/// The two moments `m0 = ∫ H(s,t) dt` and `m1 = ∫ H(s,t) t dt` over one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m0: f64,
    pub m1: f64,
}

/// User-defined singular factor.
#[derive(Clone)]
pub struct CustomSingular {
    eval: Eval2,
    moments: Option<MomentFn>,
}

impl CustomSingular {
    /// `eval(s, t)` must be finite for `s != t`.
    pub fn new(eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomSingular {
            eval: Arc::new(eval),
            moments: None,
        }
    }

    /// Attach exact moments `(s, c, d) -> (∫_c^d H(s,t) dt, ∫_c^d H(s,t) t dt)`.
    pub fn with_moments(
        mut self,
        moments: impl Fn(f64, f64, f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        self.moments = Some(Arc::new(moments));
        self
    }
}

/// Weakly singular factor `H`.
#[derive(Clone)]
pub enum SingularFactor {
    /// `H(s,t) = -ln|s - t|`
    LogDistance,
    /// `H(s,t) = |s - t|^(-alpha)`, `0 < alpha < 1`
    PowerDistance { alpha: f64 },
    Custom(CustomSingular),
}

impl fmt::Debug for SingularFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularFactor::LogDistance => write!(f, "LogDistance"),
            SingularFactor::PowerDistance { alpha } => write!(f, "PowerDistance({alpha})"),
            SingularFactor::Custom(c) => write!(f, "Custom(exact_moments: {})", c.moments.is_some()),
        }
    }
}

impl SingularFactor {
    pub fn power_distance(alpha: f64) -> Result<Self> {
        let h = SingularFactor::PowerDistance { alpha };
        h.validate()?;
        Ok(h)
    }

    pub fn custom(c: CustomSingular) -> Self {
        SingularFactor::Custom(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SingularFactor::PowerDistance { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(
                Error::Config(format!("power-distance exponent must lie in (0, 1), got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    /// Pointwise value; the diagonal `s == t` of the built-in kernels is an error.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        let v = match self {
            SingularFactor::LogDistance => -(s - t).abs().ln(),
            SingularFactor::PowerDistance { alpha } => (s - t).abs().powf(-alpha),
            SingularFactor::Custom(c) => (c.eval)(s, t),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("singular factor not finite at ({s}, {t})")))
        }
    }

    /// True when moments are computed in closed form rather than by quadrature.
    pub fn has_exact_moments(&self) -> bool {
        match self {
            SingularFactor::Custom(c) => c.moments.is_some(),
            _ => true,
        }
    }

    /// True when `H(s,t)` depends on `s - t` only.
    pub fn is_convolution(&self) -> bool {
        !matches!(self, SingularFactor::Custom(_))
    }

    /// `∫_c^d H(s,t) dt` and `∫_c^d H(s,t) t dt`, valid for `s` inside, at an
    /// end of, or outside `[c, d]`.
    pub fn moments(&self, s: f64, c: f64, d: f64) -> Result<Moments> {
        let (m0, mu1) = self.local_moments(s, c, d)?;
        Ok(Moments {
            m0,
            m1: mu1 + c * m0,
        })
    }

    /// `(∫_c^d H(s,t) dt, ∫_c^d H(s,t) (t - c) dt)`.
    ///
    /// The first moment is taken about the left end of the cell, which is the
    /// form the interpolation weights need and avoids the cancellation of
    /// `d·m0 - m1` for cells far from the origin.
    pub fn local_moments(&self, s: f64, c: f64, d: f64) -> Result<(f64, f64)> {
        if !(d > c) {
            return Err(Error::Domain(format!("empty cell [{c}, {d}]")));
        }
        let (m0, mu1) = match self {
            SingularFactor::LogDistance => {
                let (m0, g1) = log_moments(s, c, d);
                (m0, g1 - (c - s) * m0)
            }
            SingularFactor::PowerDistance { alpha } => {
                self.validate()?;
                let (m0, g1) = power_moments(*alpha, s, c, d);
                (m0, g1 - (c - s) * m0)
            }
            SingularFactor::Custom(cs) => match &cs.moments {
                Some(mf) => {
                    let (m0, m1) = mf(s, c, d);
                    (m0, m1 - c * m0)
                }
                None => {
                    let sing = if s >= c && s <= d { Some(s) } else { None };
                    let f0 = |t: f64| (cs.eval)(s, t);
                    let r0 = singular_quad(f0, c, d, sing, CUSTOM_MOMENT_TOL);
                    let r1 = singular_quad(|t: f64| (cs.eval)(s, t) * (t - c), c, d, sing, CUSTOM_MOMENT_TOL);
                    if !r0.converged || !r1.converged {
                        return Err(Error::Quadrature {
                            cell: 0,
                            reason: format!("moment quadrature at s = {s} on [{c}, {d}] did not converge"),
                        });
                    }
                    (r0.value, r1.value)
                }
            },
        };
        if m0.is_finite() && mu1.is_finite() {
            Ok((m0, mu1))
        } else {
            Err(Error::Domain(format!("non-finite moments at s = {s} on [{c}, {d}]")))
        }
    }

    /// `∫_{cell_i} ∫_{cell_j} H(s,t) dt ds` for convolution kernels on cells of
    /// width `h` whose left ends differ by `offset = (i - j) h`.
    pub fn cell_pair_integral(&self, offset: f64, h: f64) -> Option<f64> {
        let k2: fn(f64, f64) -> f64 = match self {
            SingularFactor::LogDistance => |u, _| {
                if u == 0.0 {
                    0.0
                } else {
                    0.75 * u * u - 0.5 * u * u * u.abs().ln()
                }
            },
            SingularFactor::PowerDistance { .. } => |u, alpha| {
                u.abs().powf(2.0 - alpha) / ((1.0 - alpha) * (2.0 - alpha))
            },
            SingularFactor::Custom(_) => return None,
        };
        let alpha = match self {
            SingularFactor::PowerDistance { alpha } => *alpha,
            _ => 0.0,
        };
        Some(k2(offset + h, alpha) - 2.0 * k2(offset, alpha) + k2(offset - h, alpha))
    }
}

/// `(∫_{u1}^{u2} -ln|u| du, ∫_{u1}^{u2} -u ln|u| du)` with `u = t - s`.
fn log_moments(s: f64, c: f64, d: f64) -> (f64, f64) {
    let u1 = c - s;
    let u2 = d - s;
    let width = d - c;
    if u1 * u2 > 0.0 && (width / u1).abs() < 0.5 {
        // Cell far from s relative to its width: write the differences of
        // u ln|u| through ln(u2/u1) so that they do not cancel.
        let ln2 = u2.abs().ln();
        let ratio = (width / u1).ln_1p();
        let f0 = width * (ln2 - 1.0) + u1 * ratio;
        let sq = width * (u1 + u2);
        let f1 = 0.5 * sq * ln2 + 0.5 * u1 * u1 * ratio - 0.25 * sq;
        (-f0, -f1)
    } else {
        let f0 = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
        let f1 = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                0.5 * u * u * u.abs().ln() - 0.25 * u * u
            }
        };
        (-(f0(u2) - f0(u1)), -(f1(u2) - f1(u1)))
    }
}

/// `(∫ |u|^-α du, ∫ u |u|^-α du)` over `[c - s, d - s]`.
fn power_moments(alpha: f64, s: f64, c: f64, d: f64) -> (f64, f64) {
    let p0 = |u: f64| u.signum() * u.abs().powf(1.0 - alpha) / (1.0 - alpha);
    let p1 = |u: f64| u.abs().powf(2.0 - alpha) / (2.0 - alpha);
    let (u1, u2) = (c - s, d - s);
    (p0(u2) - p0(u1), p1(u2) - p1(u1))
}

/// Continuous factor `L` on `[a, b]²`.
#[derive(Clone)]
pub struct SmoothFactor {
    f: Eval2,
    constant_one: bool,
}

impl fmt::Debug for SmoothFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFactor")
            .field("constant_one", &self.constant_one)
            .finish()
    }
}

impl SmoothFactor {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SmoothFactor {
            f: Arc::new(f),
            constant_one: false,
        }
    }

    /// `L ≡ 1`.
    pub fn one() -> Self {
        SmoothFactor {
            f: Arc::new(|_, _| 1.0),
            constant_one: true,
        }
    }

    pub fn is_constant_one(&self) -> bool {
        self.constant_one
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        (self.f)(s, t)
    }

    /// Sampled estimate of `max |L|` over `[a, b]²` on a `samples × samples` lattice.
    pub fn max_abs(&self, a: f64, b: f64, samples: usize) -> f64 {
        let m = samples.max(2);
        let step = (b - a) / (m - 1) as f64;
        let mut best: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                best = best.max(self.eval(a + i as f64 * step, a + j as f64 * step).abs());
            }
        }
        best
    }
}

/// Piecewise-linear interpolant of `t -> L(s, t)` on the grid nodes.
pub fn interp_l(l: &SmoothFactor, g: &UniformGrid, s: f64, t: f64) -> Result<f64> {
    if !g.contains(s) {
        return Err(Error::Domain(format!("s = {s} outside [{}, {}]", g.a(), g.b())));
    }
    let i = g.cell_index(t)?;
    if l.is_constant_one() {
        return Ok(1.0);
    }
    let (lo, hi) = g.cell(i);
    Ok(((hi - t) * l.eval(s, lo) + (t - lo) * l.eval(s, hi)) / (hi - lo))
}

type Eval1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Samples and step used by the derivative self-check.
const CHECK_SAMPLES: usize = 32;
const CHECK_TOL: f64 = 1e-6;

/// The nonlinearity `N` together with its first two derivatives.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    f: Eval1,
    df: Eval1,
    d2f: Eval1,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.name)
    }
}

impl Nonlinearity {
    /// Build and self-check on `[-2, 2]`.
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = Nonlinearity::new_unchecked(name, f, df, d2f);
        n.check_derivatives(-2.0, 2.0)?;
        Ok(n)
    }

    pub fn new_unchecked(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Nonlinearity {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }

    /// `N(u) = sin(k π u)`.
    pub fn sin_pi(k: f64) -> Self {
        let w = k * std::f64::consts::PI;
        Nonlinearity::new_unchecked(
            format!("sin({k}πu)"),
            move |u| (w * u).sin(),
            move |u| w * (w * u).cos(),
            move |u| -w * w * (w * u).sin(),
        )
    }

    pub fn identity() -> Self {
        Nonlinearity::new_unchecked("u", |u| u, |_| 1.0, |_| 0.0)
    }

    pub fn square() -> Self {
        Nonlinearity::new_unchecked("u^2", |u| u * u, |u| 2.0 * u, |_| 2.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        (self.d2f)(u)
    }

    /// Compare `N'` and `N''` against central differences at 32 points of `[lo, hi]`.
    pub fn check_derivatives(&self, lo: f64, hi: f64) -> Result<()> {
        for k in 0..CHECK_SAMPLES {
            let u = lo + (hi - lo) * (k as f64 + 0.5) / CHECK_SAMPLES as f64;
            let step = 1e-5 * u.abs().max(1.0);
            let fd1 = (self.value(u + step) - self.value(u - step)) / (2.0 * step);
            let fd2 = (self.derivative(u + step) - self.derivative(u - step)) / (2.0 * step);
            let d1 = self.derivative(u);
            let d2 = self.second_derivative(u);
            if !((fd1 - d1).abs() <= CHECK_TOL * (1.0 + d1.abs())) {
                return Err(Error::DerivativeCheck(format!(
                    "{}: N'({u}) = {d1}, finite difference {fd1}",
                    self.name
                )));
            }
            if !((fd2 - d2).abs() <= CHECK_TOL * (1.0 + d2.abs())) {
                return Err(Error::DerivativeCheck(format!(
                    "{}: N''({u}) = {d2}, finite difference {fd2}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}
