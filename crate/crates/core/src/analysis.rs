//! Post-processing of solved systems: the continuous reconstruction from cell
//! means, and convergence studies with the computable error-bound terms.

use std::io::Write;
use std::sync::Arc;

use crate::assembly::{assemble_with, weight, AssemblyOptions, DiscreteSystem, ProblemSpec};
use crate::error::{Error, Result};
use crate::grid::{cell_means, w1_oscillation, w2_modulus, CellVector, Integrable1D, UniformGrid};
use crate::kernel::{Nonlinearity, SingularFactor, SmoothFactor};
use crate::quad::{adaptive_on, singular_quad, AdaptiveOptions};
use crate::solver::{newton_solve, NewtonConfig};

/// `φ_n(s) = Σ_j w_j(s) N(c_j) − y(s)`, the continuous solution of the
/// discretized equation determined by its cell means `C`.
#[derive(Debug, Clone)]
pub struct ReconstructedSolution {
    sys: DiscreteSystem,
    cells: CellVector,
    n_values: Vec<f64>,
}

impl ReconstructedSolution {
    pub fn new(sys: DiscreteSystem, cells: CellVector) -> Result<Self> {
        if !sys.grid().same_as(cells.grid()) {
            return Err(Error::Dimension {
                expected: sys.dim(),
                got: cells.len(),
            });
        }
        let nl = &sys.problem().nonlinearity;
        let n_values = cells.values().iter().map(|&c| nl.value(c)).collect();
        Ok(ReconstructedSolution { sys, cells, n_values })
    }

    pub fn cells(&self) -> &CellVector {
        &self.cells
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let g = self.sys.grid();
        if !g.contains(s) {
            return Err(Error::Domain(format!("s = {s} outside [{}, {}]", g.a(), g.b())));
        }
        let p = self.sys.problem();
        let mut acc = 0.0;
        for (j, nv) in self.n_values.iter().enumerate() {
            if *nv != 0.0 {
                acc += weight(&p.singular, &p.smooth, g, j, s)? * nv;
            }
        }
        Ok(acc - p.rhs.eval(s))
    }
}

impl Integrable1D for ReconstructedSolution {
    fn eval(&self, s: f64) -> f64 {
        ReconstructedSolution::eval(self, s).unwrap_or(f64::NAN)
    }

    fn jumps(&self) -> Vec<f64> {
        let g = self.sys.grid();
        let mut j: Vec<f64> = (1..g.n()).map(|i| g.node(i)).collect();
        j.extend(self.sys.problem().rhs.jumps());
        j.sort_by(f64::total_cmp);
        j
    }
}

/// Evaluate the reconstruction at one point.
pub fn reconstruct(sys: &DiscreteSystem, cells: &CellVector, s: f64) -> Result<f64> {
    ReconstructedSolution::new(sys.clone(), cells.clone())?.eval(s)
}

/// User-supplied constants of the a-priori bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Bound on `‖A₀(π_n x)‖`.
    pub m0: f64,
    /// Bound on `‖K'(x)‖`.
    pub big_m1: f64,
    /// Bound on `‖K''(x)‖`.
    pub big_m2: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if [self.m0, self.big_m1, self.big_m2].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("bound constants must be positive, got {self:?}")))
        }
    }
}

/// `2 w2(L, h) m0 + 2 M1 w1(φ, h) + 2 M2 w1(φ, h)²`: the error bound up to
/// its unknown multiplicative constant.
pub fn error_bound_terms(
    l: &SmoothFactor,
    phi_ref: &dyn Integrable1D,
    g: &UniformGrid,
    inputs: &BoundInputs,
) -> Result<f64> {
    let h = g.h();
    let w2 = if l.is_constant_one() {
        0.0
    } else {
        w2_modulus(|s, t| l.eval(s, t), g.a(), g.b(), h)?
    };
    let w1 = w1_oscillation(phi_ref, g.a(), g.b(), h)?;
    Ok(2.0 * w2 * inputs.m0 + 2.0 * inputs.big_m1 * w1 + 2.0 * inputs.big_m2 * w1 * w1)
}

/// `∫ |φ_n − φ_ref|` over `[a, b]`, integrating the reconstruction cell by cell.
pub fn reconstruction_l1_error(rec: &ReconstructedSolution, phi_ref: &dyn Integrable1D, tol: f64) -> Result<f64> {
    let g = *rec.cells().grid();
    let mut jumps = phi_ref.jumps();
    jumps.extend(Integrable1D::jumps(rec));
    let opts = AdaptiveOptions::with_tol(tol);
    let mut total = 0.0;
    for i in 0..g.n() {
        let (lo, hi) = g.cell(i);
        let mut br = vec![lo];
        br.extend(jumps.iter().copied().filter(|&j| j > lo && j < hi));
        br.push(hi);
        let r = adaptive_on(&|s| (Integrable1D::eval(rec, s) - phi_ref.eval(s)).abs(), &br, &opts);
        if !r.value.is_finite() {
            return Err(Error::Quadrature {
                cell: i,
                reason: "non-finite reconstruction error".into(),
            });
        }
        total += r.value;
    }
    Ok(total)
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    /// `‖π_n φ_ref − C_n‖₁`.
    pub error: f64,
    pub bound: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Least-squares order over this and all previous converged rows.
    pub order_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `ln error` against `ln h` over converged rows.
    pub order: Option<f64>,
}

impl StudyResult {
    /// CSV with header `n,h,error,bound,iterations,converged,order`; reals in 17-digit
    /// scientific notation, empty fields when not available.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,h,error,bound,iterations,converged,order")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{},{},{},{}",
                r.n,
                r.h,
                r.error,
                r.bound.map(|b| format!("{b:.16e}")).unwrap_or_default(),
                r.iterations,
                r.converged,
                r.order_so_far.map(|o| format!("{o:.16e}")).unwrap_or_default(),
            )?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ln e` vs `ln h` over points with `e > 0`; needs two.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Assemble and solve at each `n`, measuring `‖π_n φ_ref − C_n‖₁`.
/// Non-converged rows are kept but excluded from the order fit.
pub fn convergence_study(
    p: &ProblemSpec,
    ns: &[usize],
    cfg: &NewtonConfig,
    bound: Option<&BoundInputs>,
) -> Result<StudyResult> {
    let phi = p
        .reference
        .clone()
        .ok_or_else(|| Error::Config("convergence study needs a reference solution".into()))?;
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("study sizes must be strictly increasing".into()));
    }
    if let Some(b) = bound {
        b.validate()?;
    }
    let mut rows: Vec<StudyRow> = Vec::with_capacity(ns.len());
    let mut fit_pts = Vec::new();
    for &n in ns {
        let g = p.grid(n)?;
        let sys = assemble_with(p, &g, &AssemblyOptions::default())?;
        let projected = cell_means(phi.as_ref(), &g)?;
        let rep = newton_solve(&sys, cfg, Some(&projected))?;
        let error = rep.solution().l1_distance(&projected)?;
        let bound_value = match bound {
            Some(b) => Some(error_bound_terms(&p.smooth, phi.as_ref(), &g, b)?),
            None => None,
        };
        if rep.converged {
            fit_pts.push((g.h(), error));
        }
        rows.push(StudyRow {
            n,
            h: g.h(),
            error,
            bound: bound_value,
            iterations: rep.iterations,
            converged: rep.converged,
            order_so_far: fit_order(&fit_pts),
        });
    }
    Ok(StudyResult {
        order: fit_order(&fit_pts),
        rows,
    })
}

/// Right-hand side `y = K(φ) − φ` manufactured from a chosen solution `φ`.
///
/// Point values integrate the kernel against `N(φ)` with [`singular_quad`];
/// interval means integrate those values adaptively.
#[derive(Clone)]
pub struct ManufacturedRhs {
    a: f64,
    b: f64,
    singular: SingularFactor,
    smooth: SmoothFactor,
    nonlinearity: Nonlinearity,
    phi: Arc<dyn Integrable1D>,
    tol: f64,
}

impl std::fmt::Debug for ManufacturedRhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedRhs")
            .field("domain", &(self.a, self.b))
            .field("tol", &self.tol)
            .finish()
    }
}

impl ManufacturedRhs {
    pub fn new(
        a: f64,
        b: f64,
        singular: SingularFactor,
        smooth: SmoothFactor,
        nonlinearity: Nonlinearity,
        phi: Arc<dyn Integrable1D>,
        tol: f64,
    ) -> Self {
        ManufacturedRhs {
            a,
            b,
            singular,
            smooth,
            nonlinearity,
            phi,
            tol,
        }
    }

    /// `K(φ)(s) = ∫ H(s,t) L(s,t) N(φ(t)) dt`.
    pub fn apply_kernel(&self, s: f64) -> f64 {
        let f = |t: f64| {
            self.singular.eval(s, t).unwrap_or(f64::NAN)
                * self.smooth.eval(s, t)
                * self.nonlinearity.value(self.phi.eval(t))
        };
        let mut breaks = vec![self.a];
        breaks.extend(self.phi.jumps().into_iter().filter(|&j| j > self.a && j < self.b));
        breaks.push(self.b);
        if s > self.a && s < self.b {
            breaks.push(s);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            .map(|w| {
                let sing = if s == w[0] || s == w[1] { Some(s) } else { None };
                singular_quad(f, w[0], w[1], sing, self.tol).value
            })
            .sum()
    }
}

impl Integrable1D for ManufacturedRhs {
    fn eval(&self, s: f64) -> f64 {
        self.apply_kernel(s) - self.phi.eval(s)
    }

    fn jumps(&self) -> Vec<f64> {
        self.phi.jumps()
    }

    fn exact_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut br = vec![lo];
        br.extend(self.phi.jumps().into_iter().filter(|&j| j > lo && j < hi));
        br.push(hi);
        let k = adaptive_on(&|s| self.apply_kernel(s), &br, &AdaptiveOptions::with_tol(self.tol));
        let phi_mean = self.phi.exact_mean(lo, hi).unwrap_or_else(|| {
            adaptive_on(&|s| self.phi.eval(s), &br, &AdaptiveOptions::with_tol(self.tol)).value / (hi - lo)
        });
        Some(k.value / (hi - lo) - phi_mean)
    }
}
