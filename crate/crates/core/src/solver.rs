//! Newton's method for `F(C) = A N(C) − C − Y = 0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::assembly::DiscreteSystem;
use crate::error::{Error, Result};
use crate::grid::{cell_means_with, discrete_l1, CellVector, Integrable1D};

/// Smallest pivot magnitude accepted by the LU solve.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zeros,
    /// Cell means of `−y`, i.e. `−Y`.
    NegRhs,
    Constant(f64),
    User(CellVector),
    /// Cell means of a function, on whatever grid is being solved.
    Projected(GuessFunction),
}

/// Function wrapper for [`InitialGuess::Projected`]; equality is identity.
#[derive(Clone)]
pub struct GuessFunction(pub Arc<dyn Integrable1D>);

impl fmt::Debug for GuessFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GuessFunction(..)")
    }
}

impl PartialEq for GuessFunction {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub guess: InitialGuess,
    /// Relative threshold for both the step and the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtrack over step factors 1, 1/2, 1/4, 1/8 when the full step does
    /// not reduce the residual.
    pub damping: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            guess: InitialGuess::Zeros,
            tol: 1e-14,
            max_iter: 50,
            damping: false,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why an iteration stopped without converging.
#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    MaxIterations,
    SingularJacobian { iteration: usize, column: usize, pivot: f64 },
    NonFinite { iteration: usize },
}

impl fmt::Display for NewtonFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NewtonFailure::MaxIterations => write!(f, "iteration limit reached"),
            NewtonFailure::SingularJacobian { iteration, column, pivot } => write!(
                f,
                "singular Jacobian at iteration {iteration} (pivot {pivot:e} in column {column})"
            ),
            NewtonFailure::NonFinite { iteration } => {
                write!(f, "non-finite iterate at iteration {iteration}")
            }
        }
    }
}

/// Full history of a Newton run. Index `k` of every per-iterate list refers to
/// `C^{(k)}`, with `k = 0` the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterates: Vec<CellVector>,
    /// `h Σ |F(C^{(k)})_i|`.
    pub residual_norms: Vec<f64>,
    /// `h Σ |C^{(k)} − C^{(k−1)}|`; entry 0 is zero.
    pub step_norms: Vec<f64>,
    /// `‖C^{(k)} − C_ref‖ / ‖C_ref‖` in the discrete L¹ norm, when a reference is given.
    pub relative_errors: Option<Vec<f64>>,
    pub converged: bool,
    /// Number of Newton steps taken.
    pub iterations: usize,
    /// 1-norm condition number of the Jacobian at the last iterate.
    pub jacobian_condition_estimate: f64,
    pub failure: Option<NewtonFailure>,
}

impl NewtonReport {
    pub fn solution(&self) -> &CellVector {
        self.iterates.last().expect("report holds the initial guess")
    }

    pub fn final_relative_error(&self) -> Option<f64> {
        self.relative_errors.as_ref().and_then(|e| e.last().copied())
    }
}

/// `F'(X) = A diag(N'(X)) − I`.
pub fn jacobian(sys: &DiscreteSystem, x: &CellVector) -> Result<DMatrix<f64>> {
    sys.check_grid(x)?;
    let nl = &sys.problem().nonlinearity;
    let n = sys.dim();
    let a = sys.matrix();
    let d: Vec<f64> = x.values().iter().map(|&u| nl.derivative(u)).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        a[(i, j)] * d[j] - if i == j { 1.0 } else { 0.0 }
    }))
}

/// Solve `J x = r` by LU with partial pivoting.
pub fn solve_linear(j: &DMatrix<f64>, r: &[f64]) -> Result<Vec<f64>> {
    let lu = factor(j, r.len())?;
    let x = lu
        .solve(&DVector::from_column_slice(r))
        .ok_or(Error::Singular { column: 0, pivot: 0.0 })?;
    Ok(x.iter().copied().collect())
}

fn factor(j: &DMatrix<f64>, n: usize) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if j.nrows() != j.ncols() {
        return Err(Error::Dimension {
            expected: j.nrows(),
            got: j.ncols(),
        });
    }
    if j.nrows() != n {
        return Err(Error::Dimension {
            expected: j.nrows(),
            got: n,
        });
    }
    let lu = j.clone().lu();
    let u = lu.u();
    for k in 0..n {
        let p = u[(k, k)];
        if !(p.abs() >= PIVOT_FLOOR) {
            return Err(Error::Singular { column: k, pivot: p });
        }
    }
    Ok(lu)
}

/// `‖J‖₁ ‖J⁻¹‖₁`, with the inverse formed from the LU factors.
pub fn condition_estimate(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    let Ok(lu) = factor(j, n) else {
        return f64::INFINITY;
    };
    match lu.try_inverse() {
        Some(inv) => col_norm1(j) * col_norm1(&inv),
        None => f64::INFINITY,
    }
}

fn col_norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn initial_iterate(sys: &DiscreteSystem, guess: &InitialGuess) -> Result<CellVector> {
    let g = *sys.grid();
    match guess {
        InitialGuess::Zeros => Ok(CellVector::zeros(g)),
        InitialGuess::Constant(c) => Ok(CellVector::constant(g, *c)),
        InitialGuess::NegRhs => CellVector::new(g, sys.rhs().iter().map(|y| -y).collect()),
        InitialGuess::Projected(f) => cell_means_with(f.0.as_ref(), &g, &Default::default()),
        InitialGuess::User(c) => {
            if !c.grid().same_as(&g) {
                // Project a guess given on another grid of the same interval.
                if c.grid().a() == g.a() && c.grid().b() == g.b() {
                    return cell_means_with(c as &dyn Integrable1D, &g, &Default::default());
                }
                return Err(Error::Dimension {
                    expected: g.n(),
                    got: c.len(),
                });
            }
            Ok(c.clone())
        }
    }
}

/// Run Newton's method from `cfg.guess`. Non-convergence and singular
/// Jacobians are reported in the returned history, not as errors.
pub fn newton_solve(
    sys: &DiscreteSystem,
    cfg: &NewtonConfig,
    reference: Option<&CellVector>,
) -> Result<NewtonReport> {
    cfg.validate()?;
    if let Some(r) = reference {
        sys.check_grid(r)?;
    }
    let g = *sys.grid();
    let h = g.h();
    let ref_norm = reference.map(|r| r.l1_norm());
    let rel_err = |x: &CellVector| -> f64 {
        let r = reference.expect("only called with a reference");
        let d = x.l1_distance(r).expect("same grid");
        match ref_norm {
            Some(nrm) if nrm > 0.0 => d / nrm,
            _ => d,
        }
    };
    let y_norm = discrete_l1(h, sys.rhs());

    let mut x = initial_iterate(sys, &cfg.guess)?;
    let mut f = sys.residual(&x)?;
    let mut report = NewtonReport {
        iterates: vec![x.clone()],
        residual_norms: vec![discrete_l1(h, &f)],
        step_norms: vec![0.0],
        relative_errors: reference.map(|_| vec![rel_err(&x)]),
        converged: false,
        iterations: 0,
        jacobian_condition_estimate: f64::NAN,
        failure: None,
    };

    for k in 1..=cfg.max_iter {
        let j = jacobian(sys, &x)?;
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = match solve_linear(&j, &neg_f) {
            Ok(d) => d,
            Err(Error::Singular { column, pivot }) => {
                report.failure = Some(NewtonFailure::SingularJacobian {
                    iteration: k,
                    column,
                    pivot,
                });
                report.jacobian_condition_estimate = f64::INFINITY;
                return Ok(report);
            }
            Err(e) => return Err(e),
        };

        let mut lambda = 1.0;
        let mut next = step(&x, &delta, lambda)?;
        let mut f_next = sys.residual(&next)?;
        if cfg.damping {
            let current = discrete_l1(h, &f);
            for _ in 0..3 {
                if discrete_l1(h, &f_next) < current {
                    break;
                }
                lambda *= 0.5;
                next = step(&x, &delta, lambda)?;
                f_next = sys.residual(&next)?;
            }
        }

        let step_norm = lambda * discrete_l1(h, &delta);
        let res_norm = discrete_l1(h, &f_next);
        if !(step_norm.is_finite() && res_norm.is_finite()) {
            report.failure = Some(NewtonFailure::NonFinite { iteration: k });
            report.iterations = k;
            return Ok(report);
        }
        x = next;
        f = f_next;
        report.iterations = k;
        report.step_norms.push(step_norm);
        report.residual_norms.push(res_norm);
        if let Some(errs) = report.relative_errors.as_mut() {
            errs.push(rel_err(&x));
        }
        report.iterates.push(x.clone());

        if step_norm <= cfg.tol * (1.0 + x.l1_norm()) && res_norm <= cfg.tol * (1.0 + y_norm) {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        report.failure = Some(NewtonFailure::MaxIterations);
    }
    report.jacobian_condition_estimate = condition_estimate(&jacobian(sys, &x)?);
    Ok(report)
}

fn step(x: &CellVector, delta: &[f64], lambda: f64) -> Result<CellVector> {
    CellVector::new(
        *x.grid(),
        x.values()
            .iter()
            .zip(delta)
            .map(|(xi, di)| xi + lambda * di)
            .collect(),
    )
}
