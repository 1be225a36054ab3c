//! Continuous algebraic Riccati equation
//!
//! ```text
//! AᵀP + PA − P B R⁻¹ Bᵀ P + Q = 0
//! ```
//!
//! solved by Newton–Kleinman iteration. Each Newton step is a Lyapunov
//! solve on the current closed loop; the iteration is seeded with a
//! stabilizing gain from Bass's shifted-Lyapunov construction, so no
//! user-supplied initial gain is needed. Problem sizes here are tiny
//! (n = 4), so the Lyapunov equations go through a dense Kronecker solve.

use nalgebra::DMatrix;
use thiserror::Error;

pub const DEFAULT_MAX_ITERATIONS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CareError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("input cost R is not invertible")]
    SingularInputCost,
    #[error("could not build a stabilizing initial gain (pair not controllable?)")]
    NoStabilizingSeed,
    #[error("Lyapunov system is singular (closed loop has eigenvalues λi + λj = 0)")]
    SingularLyapunov,
    #[error("Riccati iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Stabilizing solution of the CARE together with its Frobenius residual.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Residual bound accepted by [`solve_care`]: `1e-9 · max(1, ‖Q‖_F)`.
pub fn residual_tolerance(q: &DMatrix<f64>) -> f64 {
    1e-9 * q.norm().max(1.0)
}

/// `‖AᵀP + PA − P B R⁻¹ Bᵀ P + Q‖_F`
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let pb = p * b;
    let res = a.transpose() * p + p * a - &pb * r_inv * pb.transpose() + q;
    res.norm()
}

/// Solves `M X + X Mᵀ = C` for X.
pub fn solve_lyapunov(m: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, CareError> {
    let n = m.nrows();
    if m.ncols() != n || c.shape() != (n, n) {
        return Err(CareError::Dimension(
            "Lyapunov operands must be square and equal size".into(),
        ));
    }
    // Column-major vec: vec(MX) = (I⊗M) vec X, vec(XMᵀ) = (M⊗I) vec X.
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(m) + m.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let lu = op.clone().lu();
    let mut vec_x = lu.solve(&rhs).ok_or(CareError::SingularLyapunov)?;

    // One round of iterative refinement; cheap at these sizes.
    let correction = lu.solve(&(&rhs - &op * &vec_x)).ok_or(CareError::SingularLyapunov)?;
    vec_x += correction;

    let x = DMatrix::from_column_slice(n, n, vec_x.as_slice());
    Ok(symmetrize(&x))
}

fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(), CareError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n {
        return Err(CareError::Dimension(format!("A is {}x{}", n, a.ncols())));
    }
    if b.nrows() != n {
        return Err(CareError::Dimension(format!("B must have {n} rows, has {}", b.nrows())));
    }
    if q.shape() != (n, n) {
        return Err(CareError::Dimension(format!("Q must be {n}x{n}")));
    }
    if r.shape() != (m, m) {
        return Err(CareError::Dimension(format!("R must be {m}x{m}")));
    }
    Ok(())
}

/// Bass's algorithm: with β > max Re λ(A), solve
/// `(A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ`; then `K = Bᵀ Z⁻¹` places every
/// eigenvalue of `A − BK` in the open left half-plane.
fn bass_seed(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, CareError> {
    let n = a.nrows();
    // Frobenius norm bounds the spectral radius.
    let beta = a.norm() + 1.0;
    let shifted = a + DMatrix::<f64>::identity(n, n) * beta;
    let z = solve_lyapunov(&shifted, &(b * b.transpose() * 2.0))?;
    let z_inv = z.try_inverse().ok_or(CareError::NoStabilizingSeed)?;
    Ok(b.transpose() * z_inv)
}

pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<CareSolution, CareError> {
    solve_care_with(a, b, q, r, DEFAULT_MAX_ITERATIONS)
}

pub fn solve_care_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    max_iterations: usize,
) -> Result<CareSolution, CareError> {
    check_dims(a, b, q, r)?;
    let r_inv = r.clone().try_inverse().ok_or(CareError::SingularInputCost)?;
    let tol = residual_tolerance(q);

    let mut k = bass_seed(a, b)?;
    let mut best: Option<CareSolution> = None;
    let mut last_residual = f64::INFINITY;
    let mut polish_steps = 0;

    for it in 1..=max_iterations {
        let closed = a - b * &k;
        let rhs = -(q + k.transpose() * r * &k);
        // (A − BK)ᵀ P + P (A − BK) = −(Q + KᵀRK)
        let p = solve_lyapunov(&closed.transpose(), &rhs)?;
        let residual = care_residual(a, b, q, &r_inv, &p);
        k = &r_inv * b.transpose() * &p;

        let improved = best.as_ref().is_none_or(|s| residual < s.residual_norm);
        if improved {
            best = Some(CareSolution {
                p,
                residual_norm: residual,
                iterations: it,
            });
        }
        let converged = best.as_ref().is_some_and(|s| s.residual_norm <= tol);
        if converged {
            // Keep stepping while rounding error still shrinks noticeably.
            if residual > 0.5 * last_residual || polish_steps >= 3 {
                break;
            }
            polish_steps += 1;
        } else if it > 5 && residual >= last_residual {
            // Stalled above tolerance.
            break;
        }
        last_residual = residual;
    }

    match best {
        Some(sol) if sol.residual_norm <= tol => Ok(sol),
        other => Err(CareError::NotConverged {
            iterations: max_iterations,
            residual: other.map_or(f64::INFINITY, |s| s.residual_norm),
        }),
    }
}
