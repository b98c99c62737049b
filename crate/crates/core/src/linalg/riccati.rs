//! Lyapunov and continuous algebraic Riccati equations.
//!
//! The Riccati solver works in controller form, `AᵀS + SA + I − SBBᵀS = 0`;
//! the observer form `P̄Aᵀ + AP̄ + I − P̄CᵀCP̄ = 0` is the same equation for
//! the pair `(Aᵀ, Cᵀ)`.

use num_complex::Complex64;

use super::{eigenvalues, rank, symmetric_eigen, DenseMatrix, Lu, NumericPolicy};
use crate::error::{Error, Result};

/// Upper bound on the state dimension accepted by [`solve_lyapunov`].
pub const MAX_LYAPUNOV_DIM: usize = 32;

/// Solve `AᵀX + XA + Q = 0` for symmetric `X`.
///
/// The equation is vectorized into the `n² × n²` system
/// `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec X = −vec Q` and solved by LU with partial pivoting,
/// followed by one step of iterative refinement.
pub fn solve_lyapunov(a: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov: A is {}x{}, Q is {}x{}",
            a.rows(),
            a.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if n > MAX_LYAPUNOV_DIM {
        return Err(Error::Dimension(format!(
            "Lyapunov dimension {n} exceeds cap {MAX_LYAPUNOV_DIM}"
        )));
    }
    // column-major vec: X[i, j] -> j * n + i
    let idx = |i: usize, j: usize| j * n + i;
    let mut op = DenseMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                op[(row, idx(k, j))] += a[(k, i)];
                op[(row, idx(i, k))] += a[(k, j)];
            }
        }
    }
    let lu = match Lu::new(&op, "Lyapunov operator") {
        Ok(lu) => lu,
        Err(Error::Singular(_)) => return Err(Error::SpectrumConflict),
        Err(e) => return Err(e),
    };
    let rhs: Vec<f64> = (0..n * n).map(|k| -q[(k % n, k / n)]).collect();
    let mut x = lu.solve(&rhs);
    let ax = op.matvec(&x);
    let resid: Vec<f64> = rhs.iter().zip(&ax).map(|(r, v)| r - v).collect();
    let corr = lu.solve(&resid);
    x.iter_mut().zip(&corr).for_each(|(v, c)| *v += c);

    let sol = DenseMatrix::from_fn(n, n, |i, j| x[idx(i, j)]);
    if !sol.is_finite() {
        return Err(Error::SpectrumConflict);
    }
    Ok(sol.symmetric_part())
}

/// Frobenius norm of `AᵀX + XA + Q`.
pub fn lyapunov_residual(a: &DenseMatrix, x: &DenseMatrix, q: &DenseMatrix) -> f64 {
    let at = a.transpose();
    (&(&(&at * x) + &(x * a)) + q).frobenius_norm()
}

/// Frobenius norm of `AᵀS + SA + I − SBBᵀS`.
pub fn care_residual(a: &DenseMatrix, b: &DenseMatrix, s: &DenseMatrix) -> f64 {
    let n = a.rows();
    let bt_s = &b.transpose() * s;
    let quad = &bt_s.transpose() * &bt_s;
    let lin = &(&a.transpose() * s) + &(s * a);
    (&(&lin + &DenseMatrix::identity(n)) - &quad).frobenius_norm()
}

/// Real embedding of the complex matrix `[A − λI, B]`; its singular values
/// are those of the complex matrix, each repeated twice.
fn pbh_embedding(a: &DenseMatrix, b: &DenseMatrix, lambda: Complex64) -> DenseMatrix {
    let n = a.rows();
    let width = n + b.cols();
    let mut emb = DenseMatrix::zeros(2 * n, 2 * width);
    for i in 0..n {
        for j in 0..width {
            let (re, im) = if j < n {
                let d = if i == j { 1.0 } else { 0.0 };
                (a[(i, j)] - lambda.re * d, -lambda.im * d)
            } else {
                (b[(i, j - n)], 0.0)
            };
            emb[(i, j)] = re;
            emb[(i, width + j)] = -im;
            emb[(n + i, j)] = im;
            emb[(n + i, width + j)] = re;
        }
    }
    emb
}

/// An unstable eigenvalue of `A` that is not controllable from `B`
/// (Popov–Belevitch–Hautus test), if any.
pub fn uncontrollable_unstable_mode(a: &DenseMatrix, b: &DenseMatrix) -> Result<Option<Complex64>> {
    let n = a.rows();
    for lambda in eigenvalues(a)?.eigenvalues() {
        if lambda.re < 0.0 {
            continue;
        }
        if rank(&pbh_embedding(a, b, *lambda), 1e-8) < 2 * n {
            return Ok(Some(*lambda));
        }
    }
    Ok(None)
}

/// Smallest singular value of `[A − λI, B]` over the eigenvalues of `A` with
/// `Re λ ≥ 0`; `+∞` when `A` is Hurwitz. Pairs with a small margin are
/// stabilizable but give badly scaled Riccati solutions.
pub fn stabilizability_margin(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    let mut best = f64::INFINITY;
    for lambda in eigenvalues(a)?.eigenvalues() {
        if lambda.re < 0.0 {
            continue;
        }
        let emb = pbh_embedding(a, b, *lambda);
        let gram = (&emb * &emb.transpose()).symmetric_part();
        let sigma = super::min_symmetric_eigenvalue(&gram)?.max(0.0).sqrt();
        best = best.min(sigma);
    }
    Ok(best)
}

/// Stabilizing gain by Bass's shifted-Gramian construction.
///
/// With `β₀ > max(0, −min Re λ(A))`, `X` solves `(A + β₀I)X + X(A + β₀I)ᵀ = 2BBᵀ`
/// and `K₀ = BᵀX⁺` moves every controllable mode of `A − BK₀` onto `Re = −β₀`.
/// A small shift keeps `X` well conditioned.
/// Uncontrollable modes are left in place, so the result is stabilizing
/// exactly when `(A, B)` is stabilizable.
pub fn stabilizing_gain_bass(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(Error::Dimension(format!(
            "Bass gain: A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let min_re = eigenvalues(a)?
        .eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let shift = (-min_re).max(0.0) + 1.0;
    let shifted = &a.scale(-1.0) - &DenseMatrix::identity(n).scale(shift);
    let q = (b * &b.transpose()).scale(2.0);
    let x = solve_lyapunov(&shifted.transpose(), &q)?;

    let eig = symmetric_eigen(&x)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(stabilizability_error(a, b));
    }
    let cutoff = 1e-10 * top;
    let mut pinv = DenseMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > cutoff {
            for i in 0..n {
                for j in 0..n {
                    pinv[(i, j)] += eig.vectors[(i, k)] * eig.vectors[(j, k)] / lam;
                }
            }
        }
    }
    let k0 = &b.transpose() * &pinv;
    let closed = a - &(b * &k0);
    if eigenvalues(&closed)?.abscissa() >= 0.0 {
        return Err(stabilizability_error(a, b));
    }
    Ok(k0)
}

fn stabilizability_error(a: &DenseMatrix, b: &DenseMatrix) -> Error {
    match uncontrollable_unstable_mode(a, b) {
        Ok(Some(z)) => Error::NotStabilizable { re: z.re, im: z.im },
        _ => Error::Synthesis("Bass construction failed to stabilize (A, B)".into()),
    }
}

/// Result of the Kleinman–Newton iteration, with per-iterate diagnostics.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub s: DenseMatrix,
    pub iterations: usize,
    pub residual: f64,
    /// Spectral abscissa of `A − BBᵀSₖ` after each Newton step.
    pub closed_loop_abscissae: Vec<f64>,
}

/// Stabilizing solution of `AᵀS + SA + I − SBBᵀS = 0`.
pub fn solve_care(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(solve_care_detailed(a, b, &NumericPolicy::default())?.s)
}

/// Kleinman–Newton iteration seeded by [`stabilizing_gain_bass`]: each step
/// solves `(A − BKₖ)ᵀS + S(A − BKₖ) + I + KₖᵀKₖ = 0` and sets `Kₖ₊₁ = BᵀS`.
pub fn solve_care_detailed(
    a: &DenseMatrix,
    b: &DenseMatrix,
    policy: &NumericPolicy,
) -> Result<CareSolution> {
    let n = a.rows();
    let mut k = stabilizing_gain_bass(a, b)?;
    let bt = b.transpose();
    let eye = DenseMatrix::identity(n);
    let mut abscissae = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut last: Option<(DenseMatrix, f64)> = None;
    for it in 1..=policy.max_newton_iterations {
        let closed = a - &(b * &k);
        let q = &eye + &(&k.transpose() * &k);
        let s = solve_lyapunov(&closed, &q)?;
        k = &bt * &s;
        abscissae.push(eigenvalues(&(a - &(b * &k)))?.abscissa());
        let residual = care_residual(a, b, &s);
        if residual <= policy.riccati_residual {
            // one more quadratic step costs a single Lyapunov solve
            let (s, residual) = match polish(a, b, &s, &bt, &eye) {
                Some((s2, r2)) if r2 < residual => {
                    abscissae.push(eigenvalues(&(a - &(b * &(&bt * &s2))))?.abscissa());
                    (s2, r2)
                }
                _ => (s, residual),
            };
            return Ok(CareSolution {
                s,
                iterations: it,
                residual,
                closed_loop_abscissae: abscissae,
            });
        }
        if residual < 0.5 * best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                last = Some((s, residual));
                break;
            }
        }
        last = Some((s, residual));
    }
    Err(Error::Convergence {
        what: "Kleinman-Newton Riccati iteration",
        residual: last.map_or(f64::NAN, |(_, r)| r),
    })
}

fn polish(
    a: &DenseMatrix,
    b: &DenseMatrix,
    s: &DenseMatrix,
    bt: &DenseMatrix,
    eye: &DenseMatrix,
) -> Option<(DenseMatrix, f64)> {
    let k = bt * s;
    let closed = a - &(b * &k);
    let q = eye + &(&k.transpose() * &k);
    let s2 = solve_lyapunov(&closed, &q).ok()?;
    let r = care_residual(a, b, &s2);
    Some((s2, r))
}
