use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Unit-cell or pack construction failed; names the violated constraint.
    Geometry(String),
    /// Mesh generation or validation failure.
    Mesh(String),
    /// Coupling line rejected; lists every reason.
    CouplingLine { x: f64, reasons: Vec<String> },
    /// Invalid numeric argument (domain error).
    Domain(String),
    /// Iterative/direct linear solver failure.
    LinearSolve { method: &'static str, residual: f64, iterations: usize },
    /// Newton did not converge within the cap.
    Newton { residuals: Vec<f64> },
    /// Closure compatibility condition violated.
    Compatibility { problem: &'static str, residual: f64 },
    /// Coupling loop failed to reach tolerance.
    Coupling { time: f64, residuals: Vec<f64> },
    /// Mismatched shapes between inputs.
    Shape(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Geometry(s) => write!(f, "geometry: {s}"),
            Error::Mesh(s) => write!(f, "mesh: {s}"),
            Error::CouplingLine { x, reasons } => {
                write!(f, "coupling line x = {x}: ")?;
                for (i, r) in reasons.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::LinearSolve { method, residual, iterations } => write!(
                f,
                "{method} solve failed after {iterations} iterations (relative residual {residual:.3e})"
            ),
            Error::Newton { residuals } => write!(
                f,
                "Newton did not converge in {} iterations (last residual {:.3e})",
                residuals.len(),
                residuals.last().copied().unwrap_or(f64::NAN)
            ),
            Error::Compatibility { problem, residual } => {
                write!(f, "closure {problem}: compatibility residual {residual:.3e}")
            }
            Error::Coupling { time, residuals } => write!(
                f,
                "coupling loop at t = {time}: no convergence after {} iterations (last {:.3e})",
                residuals.len(),
                residuals.last().copied().unwrap_or(f64::NAN)
            ),
            Error::Shape(s) => write!(f, "shape mismatch: {s}"),
        }
    }
}

impl core::error::Error for Error {}
