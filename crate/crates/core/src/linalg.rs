//! Dense linear algebra kernels: matrix exponential, continuous Lyapunov
//! solver, guarded linear solves and spectral quantities.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

/// Condition estimates above this are treated as numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds for each Padé degree in double precision.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].exp());
    }

    let norm = norm1(a);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;

    let low_degree = |coeffs: &[f64]| -> DMatrix<f64> {
        // U = A * sum_{odd k} b_k A^{k-1},  V = sum_{even k} b_k A^k
        let mut u_inner = &ident * coeffs[1];
        let mut v = &ident * coeffs[0];
        let mut power = ident.clone();
        for k in (2..coeffs.len()).step_by(2) {
            power = &power * &a2;
            v += &power * coeffs[k];
            if k + 1 < coeffs.len() {
                u_inner += &power * coeffs[k + 1];
            }
        }
        pade_quotient(&(a * u_inner), &v)
    };

    if norm <= THETA3 {
        return low_degree(&PADE3);
    }
    if norm <= THETA5 {
        return low_degree(&PADE5);
    }
    if norm <= THETA7 {
        return low_degree(&PADE7);
    }
    if norm <= THETA9 {
        return low_degree(&PADE9);
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 2f64.powi(-squarings);
    let a1 = a * scale;
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_tail = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_tail + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a1 * u_inner;
    let v_tail = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_tail + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let mut r = pade_quotient(&u, &v);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade_quotient(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular inside the degree thresholds")
}

/// 1-norm condition number of `a`, computed from an explicit inverse.
/// Returns infinity for singular matrices.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    match a.clone().try_inverse() {
        Some(inv) => {
            let c = norm1(a) * norm1(&inv);
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// LU factorisation with a condition check, reusable for several right-hand sides.
#[derive(Debug, Clone)]
pub struct Factorized {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

impl Factorized {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        Self::with_cap(a, SINGULAR_CONDITION)
    }

    pub fn with_cap(a: &DMatrix<f64>, cap: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let condition = condition_number(a);
        if !(condition <= cap) {
            return Err(Error::SingularSystem { condition });
        }
        Ok(Self {
            lu: a.clone().lu(),
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu
            .solve(b)
            .expect("factorisation was checked for singularity")
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu
            .solve(b)
            .expect("factorisation was checked for singularity")
    }
}

/// Solve `a x = b` with a singularity guard.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Factorized::new(a)?.solve_vec(b))
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000 * n.max(10))
        .ok_or_else(|| Error::InvalidArgument("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Solve the continuous Lyapunov equation `M X + X Mᵀ + Q = 0` for a Hurwitz `M`.
///
/// Uses a complex Schur form `M = U T Uᴴ`, so the transformed equation
/// `T Y + Y Tᴴ = -Uᴴ Q U` is solved column by column with triangular
/// back substitution. One step of iterative refinement is applied.
pub fn lyapunov(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "Lyapunov operands must be square and of equal size, got {}x{} and {}x{}",
            m.nrows(),
            m.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let max_re = max_real_eigenvalue(m)?;
    if !(max_re < 0.0) {
        return Err(Error::UnstableDrift {
            max_real_eigenvalue: max_re,
        });
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let solver = SchurLyapunov::new(m)?;
    let mut x = solver.solve(q);
    let residual = m * &x + &x * m.transpose() + q;
    let correction = solver.solve(&residual);
    x += correction;
    Ok(symmetrize(&x))
}

struct SchurLyapunov {
    u: DMatrix<Complex<f64>>,
    t: DMatrix<Complex<f64>>,
}

impl SchurLyapunov {
    fn new(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        let mc = m.map(|v| Complex::new(v, 0.0));
        let schur = Schur::try_new(mc, f64::EPSILON, 10_000 * n.max(10))
            .ok_or_else(|| Error::InvalidArgument("Schur iteration did not converge".into()))?;
        let (u, mut t) = schur.unpack();
        // The complex Schur form is triangular; clear round-off below the diagonal.
        for j in 0..n {
            for i in (j + 1)..n {
                t[(i, j)] = Complex::new(0.0, 0.0);
            }
        }
        Ok(Self { u, t })
    }

    fn solve(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.t.nrows();
        let qc = q.map(|v| Complex::new(v, 0.0));
        let uh = self.u.adjoint();
        let c = -(&uh * qc * &self.u);
        let t = &self.t;
        let mut y = DMatrix::<Complex<f64>>::zeros(n, n);

        for j in (0..n).rev() {
            let mut rhs = c.column(j).clone_owned();
            for k in (j + 1)..n {
                let coef = t[(j, k)].conj();
                if coef != Complex::new(0.0, 0.0) {
                    rhs -= y.column(k) * coef;
                }
            }
            let shift = t[(j, j)].conj();
            // (T + shift I) y_j = rhs, upper triangular back substitution.
            for i in (0..n).rev() {
                let mut acc = rhs[i];
                for l in (i + 1)..n {
                    acc -= t[(i, l)] * y[(l, j)];
                }
                y[(i, j)] = acc / (t[(i, i)] + shift);
            }
        }

        (&self.u * y * uh).map(|z| z.re)
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
        // Plain Taylor series with scaling; fine for the small norms used below.
        let n = a.nrows();
        let s = (norm1(a).max(1.0)).log2().ceil() as i32 + 4;
        let scaled = a * 2f64.powi(-s);
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &scaled / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn expm_scalar_and_diagonal() {
        let a = DMatrix::from_element(1, 1, -0.5);
        assert_relative_eq!(expm(&a)[(0, 0)], (-0.5f64).exp(), max_relative = 1e-15);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.3, -7.5, 12.0]));
        let e = expm(&d);
        for i in 0..4 {
            assert_relative_eq!(e[(i, i)], d[(i, i)].exp(), max_relative = 1e-13);
        }
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_matches_taylor_on_all_degree_branches() {
        let base = DMatrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.1, 0.2, -0.8, 0.3, 0.05, 0.1, -1.2]);
        for scale in [0.001, 0.05, 0.5, 1.5, 3.0, 10.0, 40.0] {
            let a = &base * scale;
            let got = expm(&a);
            let want = taylor_expm(&a);
            let err = (&got - &want).norm() / want.norm();
            assert!(err < 1e-12, "scale {scale}: rel err {err}");
        }
    }

    #[test]
    fn expm_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let e = expm(&a);
        assert_relative_eq!(e[(0, 0)], 2f64.cos(), epsilon = 1e-14);
        assert_relative_eq!(e[(1, 0)], 2f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_scalar() {
        let m = DMatrix::from_element(1, 1, -0.5);
        let q = DMatrix::from_element(1, 1, 0.04);
        let x = lyapunov(&m, &q).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.04, max_relative = 1e-14);
    }

    #[test]
    fn lyapunov_against_kronecker_solve() {
        // vec(MX + XMᵀ) = (I⊗M + M⊗I) vec(X)
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 0.3, 0.0, 0.2, 0.1, -0.6, 0.25, 0.0, 0.0, -0.4, -0.9, 0.1, 0.3, 0.0, 0.2,
                -1.5,
            ],
        );
        let q = DMatrix::from_row_slice(
            4,
            4,
            &[2.0, 0.1, 0.0, 0.3, 0.1, 1.0, 0.2, 0.0, 0.0, 0.2, 0.5, 0.1, 0.3, 0.0, 0.1, 3.0],
        );
        let n = 4;
        let ident = DMatrix::<f64>::identity(n, n);
        let kron = ident.kronecker(&m) + m.kronecker(&ident);
        let vec_q = DVector::from_iterator(n * n, q.iter().map(|v| -v));
        let vec_x = kron.lu().solve(&vec_q).unwrap();
        let want = DMatrix::from_iterator(n, n, vec_x.iter().copied());
        let got = lyapunov(&m, &q).unwrap();
        assert!((&got - &want).norm() < 1e-12 * want.norm());
        let resid = &m * &got + &got * m.transpose() + &q;
        assert!(resid.norm() < 1e-12 * q.norm());
    }

    #[test]
    fn lyapunov_rejects_unstable_drift() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        let q = DMatrix::identity(2, 2);
        assert!(matches!(lyapunov(&m, &q), Err(Error::UnstableDrift { .. })));
    }

    #[test]
    fn singular_solve_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve(&a, &b), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn spectral_radius_of_known_matrix() {
        // eigenvalues ±sqrt(0.1)
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.2, 0.0]);
        assert_relative_eq!(spectral_radius(&a).unwrap(), 0.1f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }
}
