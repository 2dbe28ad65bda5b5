//! Assembly of the finite system `A N(C) − C = Y`.
//!
//! `A(i,j) = (1/h) ∫_{cell i} w_j(s) ds` where `w_j(s) = ∫_{cell j} H(s,t) [L(s,t)]_n dt`
//! is the product-integration weight of cell `j`, and `Y(i)` is the mean of `y`
//! over cell `i`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{cell_means_with, CellVector, Integrable1D, MeanOptions, UniformGrid};
use crate::kernel::{Nonlinearity, SingularFactor, SmoothFactor};
use crate::quad::gauss_rule;

/// The continuous problem `φ = K(φ) − y`, `K(x)(s) = ∫ H L N(x(t)) dt` on `[a, b]`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub singular: SingularFactor,
    pub smooth: SmoothFactor,
    pub nonlinearity: Nonlinearity,
    pub rhs: Arc<dyn Integrable1D>,
    /// Exact solution, when known.
    pub reference: Option<Arc<dyn Integrable1D>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("domain", &(self.a, self.b))
            .field("singular", &self.singular)
            .field("smooth", &self.smooth)
            .field("nonlinearity", &self.nonlinearity)
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        a: f64,
        b: f64,
        singular: SingularFactor,
        smooth: SmoothFactor,
        nonlinearity: Nonlinearity,
        rhs: Arc<dyn Integrable1D>,
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("invalid domain [{a}, {b}]")));
        }
        singular.validate()?;
        Ok(ProblemSpec {
            a,
            b,
            singular,
            smooth,
            nonlinearity,
            rhs,
            reference: None,
        })
    }

    pub fn with_reference(mut self, reference: Arc<dyn Integrable1D>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn grid(&self, n: usize) -> Result<UniformGrid> {
        UniformGrid::new(self.a, self.b, n)
    }
}

/// How the matrix entries were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form double integrals over cell pairs.
    ExactCellPairs,
    /// Closed-form inner moments, Gauss–Legendre outer integral.
    ExactMoments,
    /// Inner moments by adaptive quadrature (custom factor without moments).
    QuadratureMoments,
}

/// Assembly settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Gauss–Legendre points for the outer integral over each (sub)cell.
    pub outer_points: usize,
    /// Graded subintervals toward each non-smooth end of the outer cell on the
    /// band `|i − j| ≤ 1`.
    pub graded_pieces: usize,
    /// Ratio between consecutive graded subinterval lengths.
    pub grading_ratio: f64,
    /// Use closed-form cell-pair integrals when `H` is the log kernel and `L ≡ 1`.
    pub exact_pairs: bool,
    pub means: MeanOptions,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            outer_points: 12,
            graded_pieces: 8,
            grading_ratio: 0.15,
            exact_pairs: true,
            means: MeanOptions::default(),
        }
    }
}

/// Dense system `A N(C) − C = Y` on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    grid: UniformGrid,
    matrix: DMatrix<f64>,
    rhs: Vec<f64>,
    problem: ProblemSpec,
    provenance: Provenance,
}

impl DiscreteSystem {
    /// Build a system from precomputed parts.
    pub fn from_parts(
        problem: ProblemSpec,
        grid: UniformGrid,
        matrix: DMatrix<f64>,
        rhs: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = grid.n();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rhs.len(),
            });
        }
        Ok(DiscreteSystem {
            grid,
            matrix,
            rhs,
            problem,
            provenance,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.grid.n()
    }

    /// `F(X) = A N(X) − X − Y`.
    pub fn residual(&self, x: &CellVector) -> Result<Vec<f64>> {
        self.check_grid(x)?;
        let nl = &self.problem.nonlinearity;
        let nx: Vec<f64> = x.values().iter().map(|&u| nl.value(u)).collect();
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                let row: f64 = (0..n).map(|j| self.matrix[(i, j)] * nx[j]).sum();
                row - x.values()[i] - self.rhs[i]
            })
            .collect())
    }

    pub(crate) fn check_grid(&self, x: &CellVector) -> Result<()> {
        if !self.grid.same_as(x.grid()) {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Write `[A | Y]` as text: one matrix row per line followed by `Y(i)`,
    /// 17 significant digits, `#` header.
    pub fn write_matrix<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        writeln!(out, "# n = {n}; columns: A(i,1..n) Y(i)")?;
        for i in 0..n {
            let mut line = String::new();
            for j in 0..n {
                line.push_str(&format!("{:.16e} ", self.matrix[(i, j)]));
            }
            line.push_str(&format!("{:.16e}", self.rhs[i]));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Product-integration weight `w_j(s) = ∫_{cell j} H(s,t) [L(s,t)]_n dt` (cells `0..n`).
pub fn weight(
    singular: &SingularFactor,
    smooth: &SmoothFactor,
    g: &UniformGrid,
    j: usize,
    s: f64,
) -> Result<f64> {
    if j >= g.n() {
        return Err(Error::Domain(format!("cell {j} out of range 0..{}", g.n())));
    }
    if !g.contains(s) {
        return Err(Error::Domain(format!("s = {s} outside [{}, {}]", g.a(), g.b())));
    }
    let (c, d) = g.cell(j);
    let (m0, mu1) = singular.local_moments(s, c, d)?;
    if smooth.is_constant_one() {
        return Ok(m0);
    }
    let h = d - c;
    let l0 = smooth.eval(s, c);
    let l1 = smooth.eval(s, d);
    Ok(l0 * (m0 - mu1 / h) + l1 * mu1 / h)
}

pub fn assemble(p: &ProblemSpec, g: &UniformGrid) -> Result<DiscreteSystem> {
    assemble_with(p, g, &AssemblyOptions::default())
}

pub fn assemble_with(p: &ProblemSpec, g: &UniformGrid, opts: &AssemblyOptions) -> Result<DiscreteSystem> {
    if p.a != g.a() || p.b != g.b() {
        return Err(Error::Config("grid does not cover the problem domain".into()));
    }
    let pairs = opts.exact_pairs
        && matches!(p.singular, SingularFactor::LogDistance)
        && p.smooth.is_constant_one();
    let (matrix, provenance) = if pairs {
        (log_pair_matrix(g), Provenance::ExactCellPairs)
    } else {
        let prov = if p.singular.has_exact_moments() {
            Provenance::ExactMoments
        } else {
            Provenance::QuadratureMoments
        };
        (quadrature_matrix(p, g, opts)?, prov)
    };
    let rhs = cell_means_with(p.rhs.as_ref(), g, &opts.means)?.into_values();
    DiscreteSystem::from_parts(p.clone(), *g, matrix, rhs, provenance)
}

/// Closed-form `A` for `H = −ln|s − t|`, `L ≡ 1`. Entries depend on `|i − j|` only.
fn log_pair_matrix(g: &UniformGrid) -> DMatrix<f64> {
    let n = g.n();
    let h = g.h();
    let band: Vec<f64> = (0..n).map(|k| log_cell_pair(k, h) / h).collect();
    DMatrix::from_fn(n, n, |i, j| band[i.abs_diff(j)])
}

/// `∫_0^h ∫_0^h −ln|k h + x − y| dy dx`.
///
/// This is the second difference `K(d+h) − 2K(d) + K(d−h)` of
/// `K(u) = 3u²/4 − u² ln|u| / 2`. For `k ≥ 2` the second difference of
/// `u² ln u` is expanded as `2h² ln d + d² S(h/d)` with `S` summed as a series,
/// which keeps full relative accuracy for distant cells.
fn log_cell_pair(k: usize, h: f64) -> f64 {
    if k < 2 {
        return SingularFactor::LogDistance
            .cell_pair_integral(k as f64 * h, h)
            .expect("log kernel is a convolution");
    }
    let d = k as f64 * h;
    let x = h / d;
    let x2 = x * x;
    // S(x) = (1+x)² ln(1+x) + (1−x)² ln(1−x) = 2 Σ c_m x^{2m}
    let mut s = 0.0;
    let mut p = x2;
    for m in 1..60 {
        let mf = m as f64;
        let c = if m == 1 {
            1.5
        } else {
            2.0 / (2.0 * mf - 1.0) - 1.0 / (2.0 * mf) - 1.0 / (2.0 * mf - 2.0)
        };
        let term = c * p;
        s += term;
        if term.abs() < 1e-18 * s.abs() {
            break;
        }
        p *= x2;
    }
    s *= 2.0;
    1.5 * h * h - h * h * d.ln() - 0.5 * d * d * s
}

fn quadrature_matrix(p: &ProblemSpec, g: &UniformGrid, opts: &AssemblyOptions) -> Result<DMatrix<f64>> {
    let n = g.n();
    let h = g.h();
    let rule = gauss_rule(opts.outer_points);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let (lo, hi) = g.cell(i);
        for j in 0..n {
            let pieces = outer_pieces(i, j, lo, hi, opts);
            let mut acc = 0.0;
            let mut failure = None;
            for w in pieces.windows(2) {
                acc += rule.integrate(w[0], w[1], |s| match weight(&p.singular, &p.smooth, g, j, s) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                });
            }
            if let Some(e) = failure {
                return Err(Error::Assembly {
                    row: i,
                    col: j,
                    reason: e.to_string(),
                });
            }
            let v = acc / h;
            if !v.is_finite() {
                return Err(Error::Assembly {
                    row: i,
                    col: j,
                    reason: "non-finite entry".into(),
                });
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Breakpoints of the outer integral over cell `i` for weight `j`: a single
/// interval away from the band, otherwise geometric grading toward every end of
/// cell `i` that is also an end of cell `j` (where `w_j` is not smooth).
fn outer_pieces(i: usize, j: usize, lo: f64, hi: f64, opts: &AssemblyOptions) -> Vec<f64> {
    let toward_lo = i == j || j + 1 == i;
    let toward_hi = i == j || i + 1 == j;
    if !toward_lo && !toward_hi {
        return vec![lo, hi];
    }
    let levels = opts.graded_pieces.max(1);
    let r = opts.grading_ratio;
    let mid = 0.5 * (lo + hi);
    let mut pts = vec![lo, mid, hi];
    let width = 0.5 * (hi - lo);
    let mut f = 1.0;
    for _ in 1..levels {
        f *= r;
        if toward_lo {
            pts.push(lo + width * f);
        }
        if toward_hi {
            pts.push(hi - width * f);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Function1D;
    use crate::kernel::CustomSingular;
    use approx::assert_abs_diff_eq;

    fn log_problem(n: Nonlinearity) -> ProblemSpec {
        ProblemSpec::new(
            0.0,
            1.0,
            SingularFactor::LogDistance,
            SmoothFactor::one(),
            n,
            Arc::new(Function1D::constant(-1.0)),
        )
        .unwrap()
    }

    #[test]
    fn weight_examples() {
        let g = UniformGrid::new(0.0, 1.0, 1).unwrap();
        let w = weight(&SingularFactor::LogDistance, &SmoothFactor::one(), &g, 0, 0.0).unwrap();
        assert_abs_diff_eq!(w, 1.0, epsilon = 1e-15);

        let g2 = UniformGrid::new(0.0, 1.0, 2).unwrap();
        let flat = SingularFactor::custom(CustomSingular::new(|_, _| 1.0));
        let lt = SmoothFactor::new(|_, t| t);
        for s in [0.0, 0.3, 1.0] {
            let w = weight(&flat, &lt, &g2, 0, s).unwrap();
            assert_abs_diff_eq!(w, 0.125, epsilon = 1e-13);
        }
        assert!(weight(&flat, &lt, &g2, 2, 0.1).is_err());
        assert!(weight(&flat, &lt, &g2, 0, 1.1).is_err());
    }

    #[test]
    fn one_cell_log_matrix() {
        let p = log_problem(Nonlinearity::sin_pi(1.0));
        let g = p.grid(1).unwrap();
        for exact_pairs in [true, false] {
            let opts = AssemblyOptions {
                exact_pairs,
                ..Default::default()
            };
            let sys = assemble_with(&p, &g, &opts).unwrap();
            assert_abs_diff_eq!(sys.matrix()[(0, 0)], 1.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn pair_series_matches_direct_formula() {
        let h = 0.1;
        for k in 2..6 {
            let direct = SingularFactor::LogDistance
                .cell_pair_integral(k as f64 * h, h)
                .unwrap();
            assert_abs_diff_eq!(log_cell_pair(k, h), direct, epsilon = 1e-15);
        }
    }

    #[test]
    fn exact_and_quadrature_paths_agree() {
        let p = log_problem(Nonlinearity::sin_pi(1.0));
        let g = p.grid(10).unwrap();
        let exact = assemble(&p, &g).unwrap();
        assert_eq!(exact.provenance(), Provenance::ExactCellPairs);
        let quad = assemble_with(
            &p,
            &g,
            &AssemblyOptions {
                exact_pairs: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(quad.provenance(), Provenance::ExactMoments);
        let diff = (exact.matrix() - quad.matrix()).abs().max();
        assert!(diff < 1e-10, "max difference {diff:e}");
    }

    #[test]
    fn residual_examples() {
        let p = log_problem(Nonlinearity::sin_pi(1.0));
        let g = p.grid(10).unwrap();
        let sys = assemble(&p, &g).unwrap();
        assert_eq!(sys.rhs(), &[-1.0; 10]);
        let r = sys.residual(&CellVector::constant(g, 1.0)).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let r0 = sys.residual(&CellVector::zeros(g)).unwrap();
        assert_eq!(r0, vec![1.0; 10]);
        let other = UniformGrid::new(0.0, 1.0, 5).unwrap();
        assert!(matches!(sys.residual(&CellVector::zeros(other)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn matrix_dump_format() {
        let p = log_problem(Nonlinearity::identity());
        let sys = assemble(&p, &p.grid(3).unwrap()).unwrap();
        let mut buf = Vec::new();
        sys.write_matrix(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with('#'));
        let row: Vec<f64> = lines[1].split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert_eq!(row.len(), 4);
        assert_eq!(row[0], sys.matrix()[(0, 0)]);
        assert_eq!(row[3], -1.0);
    }

    #[test]
    fn outer_pieces_grade_toward_shared_ends() {
        let o = AssemblyOptions::default();
        assert_eq!(outer_pieces(0, 5, 0.0, 1.0, &o), vec![0.0, 1.0]);
        let diag = outer_pieces(3, 3, 0.0, 1.0, &o);
        assert_eq!(diag.len(), 2 * 8 + 1);
        let right = outer_pieces(3, 4, 0.0, 1.0, &o);
        assert_eq!(right.len(), 8 + 2);
        assert!(right[right.len() - 2] > 0.999);
        let left = outer_pieces(4, 3, 0.0, 1.0, &o);
        assert_eq!(left.len(), 8 + 2);
        assert!(left[1] < 1e-3);
    }
}
