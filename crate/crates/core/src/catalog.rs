//! Built-in problems: the two log-kernel examples with known solutions and a
//! manufactured problem with a nonzero discretization error.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::analysis::ManufacturedRhs;
use crate::assembly::ProblemSpec;
use crate::error::{Error, Result};
use crate::grid::{cell_means, CellVector, Function1D, PiecewiseConstant, UniformGrid};
use crate::kernel::{Nonlinearity, SingularFactor, SmoothFactor};
use crate::solver::{GuessFunction, InitialGuess};

/// Tolerance used to manufacture right-hand sides.
pub const MANUFACTURED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// `H = −ln|s − t|`, `L ≡ 1`, `N(u) = sin(πu)`, `φ ≡ 1`, `y ≡ −1` on `[0, 1]`.
    Example1SinPi,
    /// As above with `N(u) = sin(2πu)`.
    Example1Sin2Pi,
    /// `N(u) = sin(πu)`, `φ = 1` on `[0, 1/2)`, `2` on `[1/2, 1]`, `y = −φ`.
    Example2,
    /// `N(u) = u²`, `φ(s) = s`, `y = K(φ) − φ`.
    Manufactured,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::Example1SinPi,
        ProblemId::Example1Sin2Pi,
        ProblemId::Example2,
        ProblemId::Manufactured,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Example1SinPi => "example1-sinpi",
            ProblemId::Example1Sin2Pi => "example1-sin2pi",
            ProblemId::Example2 => "example2",
            ProblemId::Manufactured => "manufactured",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            ProblemId::Example1SinPi => "Relative errors for N(u)=sin(pi u), log kernel, phi = 1",
            ProblemId::Example1Sin2Pi => "Relative errors for N(u)=sin(2 pi u), log kernel, phi = 1",
            ProblemId::Example2 => "Relative errors of the Newton iterates, step solution 1|2",
            ProblemId::Manufactured => "Newton iterates for N(u)=u^2, phi(s) = s",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| {
                let known: Vec<&str> = ProblemId::ALL.iter().map(|p| p.as_str()).collect();
                Error::Config(format!("unknown problem '{s}' (known: {})", known.join(", ")))
            })
    }
}

fn step_solution() -> PiecewiseConstant {
    PiecewiseConstant::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0]).expect("valid steps")
}

/// Build the continuous problem for a catalog id.
pub fn problem(id: ProblemId) -> ProblemSpec {
    let log = SingularFactor::LogDistance;
    let one = SmoothFactor::one();
    let spec = match id {
        ProblemId::Example1SinPi | ProblemId::Example1Sin2Pi => {
            let k = if id == ProblemId::Example1SinPi { 1.0 } else { 2.0 };
            ProblemSpec::new(0.0, 1.0, log, one, Nonlinearity::sin_pi(k), Arc::new(Function1D::constant(-1.0)))
                .map(|p| p.with_reference(Arc::new(Function1D::constant(1.0))))
        }
        ProblemId::Example2 => {
            let y = PiecewiseConstant::new(vec![0.0, 0.5, 1.0], vec![-1.0, -2.0]).expect("valid steps");
            ProblemSpec::new(0.0, 1.0, log, one, Nonlinearity::sin_pi(1.0), Arc::new(y))
                .map(|p| p.with_reference(Arc::new(step_solution())))
        }
        ProblemId::Manufactured => {
            let phi = Arc::new(Function1D::linear());
            let y = ManufacturedRhs::new(
                0.0,
                1.0,
                log.clone(),
                one.clone(),
                Nonlinearity::square(),
                phi.clone(),
                MANUFACTURED_TOL,
            );
            ProblemSpec::new(0.0, 1.0, log, one, Nonlinearity::square(), Arc::new(y)).map(|p| p.with_reference(phi))
        }
    };
    spec.expect("catalog problems are valid")
}

/// Starting point used for a catalog problem when none is given.
///
/// Newton from the zeros vector lands in the basin of another root for every
/// catalog problem, so each carries its own guess: the constant 0.6 for
/// `sin(πu)`, the constant 0.8875 for `sin(2πu)` (diverges at n = 10,
/// converges at n = 100), 95% of the step solution for example 2 and the exact
/// solution itself for the manufactured problem.
pub fn default_guess(id: ProblemId) -> InitialGuess {
    match id {
        ProblemId::Example1SinPi => InitialGuess::Constant(0.6),
        ProblemId::Example1Sin2Pi => InitialGuess::Constant(0.8875),
        ProblemId::Example2 => {
            let f = PiecewiseConstant::new(vec![0.0, 0.5, 1.0], vec![0.95, 1.9]).expect("valid steps");
            InitialGuess::Projected(GuessFunction(Arc::new(f)))
        }
        ProblemId::Manufactured => InitialGuess::Projected(GuessFunction(Arc::new(Function1D::linear()))),
    }
}

/// Exact root of the discrete system, when the catalog knows one.
///
/// For the examples `N` vanishes at the solution values, so the cell means of
/// the exact solution solve `A N(C) − C = Y` for every grid that does not
/// split the jump of the step solution.
pub fn exact_discrete_solution(id: ProblemId, g: &UniformGrid) -> Option<CellVector> {
    match id {
        ProblemId::Example1SinPi | ProblemId::Example1Sin2Pi => Some(CellVector::constant(*g, 1.0)),
        ProblemId::Example2 => {
            let aligned = (0..=g.n()).any(|i| g.node(i) == 0.5);
            if aligned {
                cell_means(&step_solution(), g).ok()
            } else {
                None
            }
        }
        ProblemId::Manufactured => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ProblemId::ALL {
            assert_eq!(id.as_str().parse::<ProblemId>().unwrap(), id);
        }
        assert!("example3".parse::<ProblemId>().is_err());
    }

    #[test]
    fn example2_reference_needs_aligned_grid() {
        let g10 = UniformGrid::new(0.0, 1.0, 10).unwrap();
        let c = exact_discrete_solution(ProblemId::Example2, &g10).unwrap();
        assert_eq!(c.values(), &[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
        let g7 = UniformGrid::new(0.0, 1.0, 7).unwrap();
        assert!(exact_discrete_solution(ProblemId::Example2, &g7).is_none());
    }
}
