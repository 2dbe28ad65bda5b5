//! Uniform meshes, cell-mean projection, and the moduli `w1` (L¹ oscillation
//! under shifts) and `w2` (uniform modulus of continuity on the square).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{adaptive_on, AdaptiveOptions};

/// Uniform partition of `[a, b]` into `n` cells of width `h = (b - a) / n`.
///
/// Cells are indexed `0..n`; cell `i` is `[t_i, t_{i+1}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
}

impl UniformGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if n == 0 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        Ok(UniformGrid {
            a,
            b,
            n,
            h: (b - a) / n as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node `t_i`, `i = 0..=n`. The last node is `b` exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// End points of cell `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.node(i), self.node(i + 1))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }

    /// Index of the cell containing `t`. Interior nodes belong to the cell on
    /// their right, `b` belongs to the last cell.
    pub fn cell_index(&self, t: f64) -> Result<usize> {
        if !self.contains(t) {
            return Err(Error::Domain(format!(
                "{t} outside [{}, {}]",
                self.a, self.b
            )));
        }
        let guess = ((t - self.a) / self.h).floor();
        let mut i = if guess < 0.0 {
            0
        } else {
            (guess as usize).min(self.n - 1)
        };
        while i > 0 && t < self.node(i) {
            i -= 1;
        }
        while i + 1 < self.n && t >= self.node(i + 1) {
            i += 1;
        }
        Ok(i)
    }

    pub fn same_as(&self, other: &UniformGrid) -> bool {
        self == other
    }
}

/// A function in L¹(\[a, b\]) given by pointwise evaluation.
///
/// Evaluation must be meaningful almost everywhere; `jumps` lists the finitely
/// many discontinuities so that quadrature never averages across one. When an
/// exact interval mean is cheap, `exact_mean` should return it.
pub trait Integrable1D: Send + Sync {
    fn eval(&self, s: f64) -> f64;

    fn jumps(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Mean over `[lo, hi]`, if known in closed form.
    fn exact_mean(&self, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }
}

type Eval1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Mean1 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closure-backed [`Integrable1D`].
#[derive(Clone)]
pub struct Function1D {
    f: Eval1,
    jumps: Vec<f64>,
    mean: Option<Mean1>,
}

impl Function1D {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Function1D {
            f: Arc::new(f),
            jumps: Vec::new(),
            mean: None,
        }
    }

    pub fn with_jumps(mut self, jumps: impl Into<Vec<f64>>) -> Self {
        self.jumps = jumps.into();
        self.jumps.sort_by(f64::total_cmp);
        self
    }

    /// Attach a closed-form interval mean `(lo, hi) -> (1/(hi-lo)) ∫ f`.
    pub fn with_mean(mut self, mean: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.mean = Some(Arc::new(mean));
        self
    }

    pub fn constant(c: f64) -> Self {
        Function1D::new(move |_| c).with_mean(move |_, _| c)
    }

    /// The identity `s -> s`.
    pub fn linear() -> Self {
        Function1D::new(|s| s).with_mean(|lo, hi| 0.5 * (lo + hi))
    }
}

impl fmt::Debug for Function1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Function1D")
            .field("jumps", &self.jumps)
            .field("exact_mean", &self.mean.is_some())
            .finish()
    }
}

impl Integrable1D for Function1D {
    fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    fn jumps(&self) -> Vec<f64> {
        self.jumps.clone()
    }

    fn exact_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        self.mean.as_ref().map(|m| m(lo, hi))
    }
}

/// Step function: `values[k]` on `[breaks[k], breaks[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Config(
                "step function needs one more break than values".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("step breaks must increase".into()));
        }
        Ok(PiecewiseConstant { breaks, values })
    }
}

impl Integrable1D for PiecewiseConstant {
    fn eval(&self, s: f64) -> f64 {
        let k = self.breaks[1..].partition_point(|&x| x <= s);
        self.values[k.min(self.values.len() - 1)]
    }

    fn jumps(&self) -> Vec<f64> {
        self.breaks[1..self.breaks.len() - 1].to_vec()
    }

    fn exact_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        overlap_mean(&self.breaks, &self.values, lo, hi)
    }
}

/// Mean of a step function over `[lo, hi]`; returns the single value exactly
/// when only one step overlaps the interval.
fn overlap_mean(breaks: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<f64> {
    if hi <= lo {
        return None;
    }
    let mut acc = 0.0;
    let mut single: Option<Option<f64>> = None;
    for (k, &v) in values.iter().enumerate() {
        let l = breaks[k].max(lo);
        let r = breaks[k + 1].min(hi);
        if r > l {
            acc += v * (r - l);
            single = match single {
                None => Some(Some(v)),
                Some(_) => Some(None),
            };
        }
    }
    match single {
        Some(Some(v)) => Some(v),
        _ => Some(acc / (hi - lo)),
    }
}

/// Piecewise-constant function on a grid: one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVector {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl CellVector {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Dimension {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(CellVector { grid, values })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        CellVector::constant(grid, 0.0)
    }

    pub fn constant(grid: UniformGrid, c: f64) -> Self {
        CellVector {
            grid,
            values: vec![c; grid.n()],
        }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L¹ norm of the piecewise-constant function, `h Σ |c_i|`.
    pub fn l1_norm(&self) -> f64 {
        discrete_l1(self.grid.h(), &self.values)
    }

    /// `‖self - other‖₁`; both vectors must live on the same grid.
    pub fn l1_distance(&self, other: &CellVector) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        let h = self.grid.h();
        Ok(h * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>())
    }
}

/// Scaled vector 1-norm `h Σ |v_i|`.
pub fn discrete_l1(h: f64, v: &[f64]) -> f64 {
    h * v.iter().map(|x| x.abs()).sum::<f64>()
}

impl Integrable1D for CellVector {
    fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(self.grid.a(), self.grid.b());
        self.values[self.grid.cell_index(s).unwrap_or(0)]
    }

    fn jumps(&self) -> Vec<f64> {
        (1..self.grid.n()).map(|i| self.grid.node(i)).collect()
    }

    fn exact_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        overlap_mean(&self.grid.nodes(), &self.values, lo, hi)
    }
}

/// Options for [`cell_means_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanOptions {
    /// Gauss–Legendre points per subinterval between declared jumps.
    pub points: usize,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for MeanOptions {
    fn default() -> Self {
        MeanOptions {
            points: 8,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

/// Cell means `c_i = (1/h) ∫_{cell i} f`, i.e. the projection of `f` onto
/// piecewise constants on `g`.
pub fn cell_means(f: &dyn Integrable1D, g: &UniformGrid) -> Result<CellVector> {
    cell_means_with(f, g, &MeanOptions::default())
}

pub fn cell_means_with(
    f: &dyn Integrable1D,
    g: &UniformGrid,
    opts: &MeanOptions,
) -> Result<CellVector> {
    let jumps = f.jumps();
    let values = (0..g.n())
        .map(|i| {
            let (lo, hi) = g.cell(i);
            interval_mean(f, lo, hi, &jumps, opts).map_err(|reason| Error::Quadrature { cell: i, reason })
        })
        .collect::<Result<Vec<_>>>()?;
    CellVector::new(*g, values)
}

fn interval_mean(
    f: &dyn Integrable1D,
    lo: f64,
    hi: f64,
    jumps: &[f64],
    opts: &MeanOptions,
) -> std::result::Result<f64, String> {
    if let Some(m) = f.exact_mean(lo, hi) {
        return if m.is_finite() {
            Ok(m)
        } else {
            Err("closed-form mean is not finite".into())
        };
    }
    let mut breaks = vec![lo];
    breaks.extend(jumps.iter().copied().filter(|&j| j > lo && j < hi));
    breaks.push(hi);
    let aopts = AdaptiveOptions {
        points: opts.points,
        rel_tol: opts.rel_tol,
        max_intervals: opts.max_intervals,
    };
    let r = adaptive_on(&|s| f.eval(s), &breaks, &aopts);
    if !r.value.is_finite() {
        return Err("non-finite integrand value".into());
    }
    if !r.converged {
        return Err(format!("tolerance not reached (error estimate {:e})", r.error));
    }
    Ok(r.value / (hi - lo))
}

/// Sample counts for the sampled suprema in [`w1_oscillation`] and [`w2_modulus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusOptions {
    /// Shift samples in `[0, h]` (endpoints included) for `w1`.
    pub shifts: usize,
    /// Base lattice points per axis for `w2`.
    pub lattice: usize,
    /// Displacement directions on the max-norm circle of radius `h` for `w2`.
    pub directions: usize,
    /// Relative tolerance of each shifted-difference integral in `w1`.
    pub rel_tol: f64,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        ModulusOptions {
            shifts: 64,
            lattice: 64,
            directions: 16,
            rel_tol: 1e-10,
        }
    }
}

/// L¹ oscillation of `f` on `[a, b]`:
/// `sup_{0 ≤ u ≤ h} ∫ |f̃(v + u) − f̃(v)| dv`, with `f̃` the zero extension.
///
/// The supremum is taken over `opts.shifts` equally spaced shifts and the
/// pairwise distances between `a`, `b` and the jumps of `f`.
pub fn w1_oscillation(f: &dyn Integrable1D, a: f64, b: f64, h: f64) -> Result<f64> {
    w1_oscillation_with(f, a, b, h, &ModulusOptions::default())
}

pub fn w1_oscillation_with(
    f: &dyn Integrable1D,
    a: f64,
    b: f64,
    h: f64,
    opts: &ModulusOptions,
) -> Result<f64> {
    if h.is_nan() || h < 0.0 {
        return Err(Error::Domain(format!("shift size must be >= 0, got {h}")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let ext = |x: f64| if x < a || x > b { 0.0 } else { f.eval(x) };
    let jumps = f.jumps();
    let samples = opts.shifts.max(2);
    let aopts = AdaptiveOptions {
        points: 8,
        rel_tol: opts.rel_tol,
        max_intervals: 4000,
    };
    // The shifted difference of a step function is piecewise linear in the
    // shift, with kinks at differences of breakpoints; those are candidates too.
    let mut shifts: Vec<f64> = (1..samples).map(|k| h * k as f64 / (samples - 1) as f64).collect();
    let mut points = vec![a, b];
    points.extend(jumps.iter().copied().filter(|&j| j > a && j < b));
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            let d = (p - q).abs();
            if d > 0.0 && d < h {
                shifts.push(d);
            }
        }
    }
    let mut best: f64 = 0.0;
    for (k, &u) in shifts.iter().enumerate() {
        let lo = a - u;
        let mut breaks = vec![lo, a, b - u, b];
        for &j in &jumps {
            breaks.push(j);
            breaks.push(j - u);
        }
        breaks.retain(|&x| x >= lo && x <= b);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let r = adaptive_on(&|v| (ext(v + u) - ext(v)).abs(), &breaks, &aopts);
        if !r.value.is_finite() {
            return Err(Error::Quadrature {
                cell: k,
                reason: format!("non-finite shifted difference at shift {u}"),
            });
        }
        best = best.max(r.value);
    }
    Ok(best)
}

/// Uniform modulus of continuity of `f` on `[a, b]²` in the max-norm:
/// `sup_{‖p − q‖∞ ≤ h} |f(p) − f(q)|`, sampled on a lattice of base points and
/// displacements of max-norm `h` (clamped to the square).
pub fn w2_modulus<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, h: f64) -> Result<f64> {
    w2_modulus_with(f, a, b, h, &ModulusOptions::default())
}

pub fn w2_modulus_with<F: Fn(f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    h: f64,
    opts: &ModulusOptions,
) -> Result<f64> {
    if h.is_nan() || h < 0.0 {
        return Err(Error::Domain(format!("radius must be >= 0, got {h}")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let dirs = square_directions(opts.directions.max(4), h);
    let m = opts.lattice.max(2);
    let step = (b - a) / (m - 1) as f64;
    let mut best: f64 = 0.0;
    for i in 0..m {
        let s = a + i as f64 * step;
        for j in 0..m {
            let t = a + j as f64 * step;
            let base = f(s, t);
            for &(ds, dt) in &dirs {
                let v = f((s + ds).clamp(a, b), (t + dt).clamp(a, b));
                best = best.max((v - base).abs());
            }
        }
    }
    Ok(best)
}

/// `count` points equally spaced along the boundary of `[-h, h]²`, starting at
/// the corner `(h, h)`.
fn square_directions(count: usize, h: f64) -> Vec<(f64, f64)> {
    let perimeter = 8.0 * h;
    (0..count)
        .map(|k| {
            let mut d = perimeter * k as f64 / count as f64;
            // walk: right edge downwards, bottom edge leftwards, left edge up, top edge right
            if d <= 2.0 * h {
                return (h, h - d);
            }
            d -= 2.0 * h;
            if d <= 2.0 * h {
                return (h - d, -h);
            }
            d -= 2.0 * h;
            if d <= 2.0 * h {
                return (-h, -h + d);
            }
            d -= 2.0 * h;
            (-h + d, h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> UniformGrid {
        UniformGrid::new(0.0, 1.0, n).unwrap()
    }

    fn step_phi() -> PiecewiseConstant {
        PiecewiseConstant::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(UniformGrid::new(1.0, 0.0, 3).is_err());
        assert!(UniformGrid::new(0.0, 1.0, 0).is_err());
        assert!(UniformGrid::new(0.0, f64::INFINITY, 2).is_err());
    }

    #[test]
    fn nodes_are_uniform() {
        let g = UniformGrid::new(-1.0, 2.0, 7).unwrap();
        assert_eq!(g.node(0), -1.0);
        assert_eq!(g.node(7), 2.0);
        for i in 1..=7 {
            let d = g.node(i) - g.node(i - 1);
            assert!((d - g.h()).abs() <= 4.0 * f64::EPSILON * g.h().max(1.0));
        }
    }

    #[test]
    fn cell_lookup() {
        let g = unit(4);
        assert_eq!(g.cell_index(0.0).unwrap(), 0);
        assert_eq!(g.cell_index(0.25).unwrap(), 1);
        assert_eq!(g.cell_index(0.9).unwrap(), 3);
        assert_eq!(g.cell_index(1.0).unwrap(), 3);
        assert!(g.cell_index(1.5).is_err());
    }

    #[test]
    fn means_of_constant_and_linear() {
        let ones = cell_means(&Function1D::new(|_| 1.0), &unit(4)).unwrap();
        assert_eq!(ones.values(), &[1.0; 4]);
        let lin = cell_means(&Function1D::new(|s| s), &unit(2)).unwrap();
        assert_abs_diff_eq!(lin.values()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(lin.values()[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn means_of_step_function() {
        let phi = step_phi();
        let c = cell_means(&phi, &unit(10)).unwrap();
        assert_eq!(c.values(), &[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
        // same step function without the closed-form mean, splitting at the jump
        let f = Function1D::new(|s| if s < 0.5 { 1.0 } else { 2.0 }).with_jumps(vec![0.5]);
        let q = cell_means(&f, &unit(3)).unwrap();
        assert_abs_diff_eq!(q.values()[1], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_cell_is_identified() {
        let f = Function1D::new(|s| if s > 0.6 { f64::NAN } else { s });
        match cell_means(&f, &unit(4)) {
            Err(Error::Quadrature { cell, .. }) => assert_eq!(cell, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn w1_examples() {
        let zero = Function1D::constant(0.0);
        assert_eq!(w1_oscillation(&zero, 0.0, 1.0, 0.3).unwrap(), 0.0);
        let one = Function1D::constant(1.0);
        assert_abs_diff_eq!(w1_oscillation(&one, 0.0, 1.0, 0.01).unwrap(), 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(w1_oscillation(&step_phi(), 0.0, 1.0, 0.01).unwrap(), 0.04, epsilon = 1e-12);
        assert_eq!(w1_oscillation(&one, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(w1_oscillation(&one, 0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_modulus(|_, _| 1.0, 0.0, 1.0, 0.2).unwrap(), 0.0);
        assert_abs_diff_eq!(w2_modulus(|s, t| s + t, 0.0, 1.0, 0.1).unwrap(), 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(w2_modulus(|s, _| s, 0.0, 1.0, 0.25).unwrap(), 0.25, epsilon = 1e-14);
        assert_eq!(w2_modulus(|s, t| s * t, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(w2_modulus(|s, _| s, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn square_directions_stay_on_the_max_norm_circle() {
        for (x, y) in square_directions(16, 0.3) {
            assert_abs_diff_eq!(x.abs().max(y.abs()), 0.3, epsilon = 1e-15);
        }
    }
}
