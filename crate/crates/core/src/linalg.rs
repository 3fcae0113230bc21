//! Small dense and banded linear algebra used by the operator assembly and the
//! implicit step: 2×2 matrices in closed form, and an LU factorization for
//! general banded systems with partial pivoting (LAPACK `dgbtrf` layout).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("singular 2x2 matrix: |det| = {det:.3e} below floor {floor:.1e}")]
    SingularMat2 { det: f64, floor: f64 },
    #[error("singular banded matrix at column {col}")]
    SingularBand { col: usize },
}

/// Determinant floor for pointwise 2×2 inversions of `I + ∇Υᵀ`.
pub const DET_FLOOR: f64 = 1e-10;

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: [f64; 2], v: [f64; 2]) -> Self {
        Mat2::new(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Closed-form inverse with a determinant floor.
    pub fn inverse(&self) -> Result<Mat2, LinalgError> {
        let det = self.det();
        if det.abs() < DET_FLOOR {
            return Err(LinalgError::SingularMat2 {
                det,
                floor: DET_FLOOR,
            });
        }
        Ok(Mat2::new(
            self.d / det,
            -self.b / det,
            -self.c / det,
            self.a / det,
        ))
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Frobenius inner product `A : B`.
    pub fn contract(&self, o: &Mat2) -> f64 {
        self.a * o.a + self.b * o.b + self.c * o.c + self.d * o.d
    }
}

pub fn dot2(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// Banded matrix in LAPACK band storage (column-major), with `kl` extra rows
/// reserved on top for pivoting fill. Entry `A(i, j)` lives at
/// `ab[j * ldab + (kl + ku + i - j)]` for `j - ku <= i <= j + kl`.
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside band"
        );
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    /// Accumulate `val` onto `A(i, j)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, val: f64) {
        let s = self.slot(i, j);
        self.ab[s] += val;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, val: f64) {
        let s = self.slot(i, j);
        self.ab[s] = val;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            return 0.0;
        }
        self.ab[self.slot(i, j)]
    }

    pub fn reset(&mut self) {
        self.ab.fill(0.0);
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu, LinalgError> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // superdiagonals in the factored form
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j among rows j..=j+km
            let mut p = 0usize;
            let mut pmax = 0.0f64;
            for i in 0..=km {
                let v = self.ab[j * ldab + (kv + i)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(LinalgError::SingularBand { col: j });
            }
            ipiv[j] = j + p;
            let jmax = (j + kv).min(n - 1);
            if p > 0 {
                for c in j..=jmax {
                    let s1 = c * ldab + (kv + j - c);
                    let s2 = c * ldab + (kv + j + p - c);
                    self.ab.swap(s1, s2);
                }
            }
            let piv = self.ab[j * ldab + kv];
            for i in 1..=km {
                let s = j * ldab + kv + i;
                let m = self.ab[s] / piv;
                self.ab[s] = m;
                if m != 0.0 {
                    for c in (j + 1)..=jmax {
                        let upper = self.ab[c * ldab + (kv + j - c)];
                        if upper != 0.0 {
                            self.ab[c * ldab + (kv + j + i - c)] -= m * upper;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
        })
    }
}

/// Factored banded system; `solve` is reusable across right-hand sides.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        // forward elimination with row swaps
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= self.ab[j * ldab + kv + i] * bj;
                }
            }
        }
        // back substitution
        for j in (0..n).rev() {
            let x = b[j] / self.ab[j * ldab + kv];
            b[j] = x;
            if x != 0.0 {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= self.ab[j * ldab + (kv + i - j)] * x;
                }
            }
        }
    }
}
