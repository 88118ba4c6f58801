//! Dense complex linear algebra on small fixed-size matrices.

use num_complex::Complex64;

pub(crate) type CMat<const N: usize> = [[Complex64; N]; N];

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// In-place LU factorization with partial pivoting.
pub(crate) struct Lu<const N: usize> {
    lu: CMat<N>,
    perm: [usize; N],
    sign: f64,
    singular: bool,
}

impl<const N: usize> Lu<N> {
    pub(crate) fn new(mut a: CMat<N>) -> Self {
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut sign = 1.0;
        let mut singular = false;
        for col in 0..N {
            let mut piv = col;
            let mut best = a[col][col].norm();
            for row in col + 1..N {
                let v = a[row][col].norm();
                if v > best {
                    best = v;
                    piv = row;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if piv != col {
                a.swap(piv, col);
                perm.swap(piv, col);
                sign = -sign;
            }
            let inv = ONE / a[col][col];
            for row in col + 1..N {
                let f = a[row][col] * inv;
                a[row][col] = f;
                for c in col + 1..N {
                    let t = a[col][c];
                    a[row][c] -= f * t;
                }
            }
        }
        Self {
            lu: a,
            perm,
            sign,
            singular,
        }
    }

    pub(crate) fn det(&self) -> Complex64 {
        if self.singular {
            return ZERO;
        }
        let mut d = Complex64::new(self.sign, 0.0);
        for i in 0..N {
            d *= self.lu[i][i];
        }
        d
    }

    /// Smallest over largest pivot magnitude; a cheap conditioning proxy.
    pub(crate) fn pivot_ratio(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..N {
            let v = self.lu[i][i].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    pub(crate) fn solve(&self, b: &[Complex64; N]) -> Option<[Complex64; N]> {
        if self.singular {
            return None;
        }
        let mut x = [ZERO; N];
        for i in 0..N {
            let mut s = b[self.perm[i]];
            for j in 0..i {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..N).rev() {
            let mut s = x[i];
            for j in i + 1..N {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
        Some(x)
    }

    pub(crate) fn inverse(&self) -> Option<CMat<N>> {
        let mut inv = [[ZERO; N]; N];
        for col in 0..N {
            let mut e = [ZERO; N];
            e[col] = ONE;
            let x = self.solve(&e)?;
            for row in 0..N {
                inv[row][col] = x[row];
            }
        }
        Some(inv)
    }
}

pub(crate) fn det4(a: &CMat<4>) -> Complex64 {
    Lu::new(*a).det()
}

/// Determinant of `a` with row and column `k` deleted.
pub(crate) fn principal_minor4(a: &CMat<4>, k: usize) -> Complex64 {
    let mut m = [[ZERO; 3]; 3];
    let mut r = 0;
    for i in 0..4 {
        if i == k {
            continue;
        }
        let mut c = 0;
        for j in 0..4 {
            if j == k {
                continue;
            }
            m[r][c] = a[i][j];
            c += 1;
        }
        r += 1;
    }
    Lu::new(m).det()
}

/// Product of the Euclidean row norms, an upper bound on `|det a|`.
pub(crate) fn hadamard_bound<const N: usize>(a: &CMat<N>) -> f64 {
    let mut b = 1.0;
    for row in a {
        let s: f64 = row.iter().map(|z| z.norm_sqr()).sum();
        b *= crate::math::sqrt(s);
    }
    b
}

#[cfg(test)]
pub(crate) fn matmul<const N: usize>(a: &CMat<N>, b: &CMat<N>) -> CMat<N> {
    let mut c = [[ZERO; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat<4> {
        let mut a = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let x = (i * 4 + j) as f64;
                a[i][j] = Complex64::new(libm::sin(1.3 * x + 0.2), libm::cos(0.7 * x * x));
            }
        }
        a
    }

    fn cofactor_det(a: &CMat<4>) -> Complex64 {
        // Laplace expansion along the first row.
        let mut d = ZERO;
        for j in 0..4 {
            let mut m = [[ZERO; 3]; 3];
            for i in 1..4 {
                let mut c = 0;
                for k in 0..4 {
                    if k != j {
                        m[i - 1][c] = a[i][k];
                        c += 1;
                    }
                }
            }
            let m3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            d += a[0][j] * m3 * s;
        }
        d
    }

    #[test]
    fn determinant_matches_laplace_expansion() {
        let a = sample();
        let d = det4(&a);
        let e = cofactor_det(&a);
        assert!((d - e).norm() < 1e-13 * e.norm().max(1.0));
    }

    #[test]
    fn inverse_is_inverse() {
        let a = sample();
        let inv = Lu::new(a).inverse().unwrap();
        let p = matmul(&a, &inv);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { ONE } else { ZERO };
                assert!((p[i][j] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = sample();
        a[2] = a[1];
        let lu = Lu::new(a);
        assert!(lu.pivot_ratio() < 1e-14);
        assert!(det4(&a).norm() < 1e-13);
    }

    #[test]
    fn hadamard_bounds_determinant() {
        let a = sample();
        assert!(det4(&a).norm() <= hadamard_bound(&a));
    }
}
