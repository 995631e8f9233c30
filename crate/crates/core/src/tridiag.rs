//! Tridiagonal systems.

/// Tridiagonal matrix stored by diagonals.
///
/// `lower[i]` couples row `i` to column `i - 1` (`lower[0]` unused),
/// `upper[i]` couples row `i` to column `i + 1` (`upper[n - 1]` unused).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    /// Transposed matrix.
    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut t = Self::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 0..n.saturating_sub(1) {
            t.upper[i] = self.lower[i + 1];
            t.lower[i + 1] = self.upper[i];
        }
        t
    }

    /// Solves `A x = rhs` in place with the Thomas algorithm.
    ///
    /// Returns `None` on a zero pivot. No pivoting is done; callers supply
    /// diagonally dominant systems.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) -> Option<()> {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        if n == 0 {
            return Some(());
        }
        scratch.clear();
        scratch.resize(n, 0.0);
        let mut beta = self.diag[0];
        if beta == 0.0 {
            return None;
        }
        rhs[0] /= beta;
        for i in 1..n {
            scratch[i] = self.upper[i - 1] / beta;
            beta = self.diag[i] - self.lower[i] * scratch[i];
            if beta == 0.0 {
                return None;
            }
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i + 1] * rhs[i + 1];
        }
        Some(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tridiagonal {
        Tridiagonal {
            lower: vec![0.0, -1.0, 0.5, -2.0, 1.0],
            diag: vec![4.0, 5.0, 6.0, 7.0, 3.0],
            upper: vec![1.0, 2.0, -1.0, 0.5, 0.0],
        }
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = sample();
        let x = [1.0, -2.0, 0.5, 3.0, -1.5];
        let mut b = vec![0.0; 5];
        a.mul_vec(&x, &mut b);
        let mut scratch = Vec::new();
        a.solve_in_place(&mut b, &mut scratch).unwrap();
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn transpose_matches_dense() {
        let a = sample();
        let t = a.transpose();
        let dense = |m: &Tridiagonal, i: usize, j: usize| -> f64 {
            if i == j {
                m.diag[i]
            } else if j + 1 == i {
                m.lower[i]
            } else if i + 1 == j {
                m.upper[i]
            } else {
                0.0
            }
        };
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(dense(&a, i, j), dense(&t, j, i));
            }
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = Tridiagonal {
            lower: vec![0.0, 1.0],
            diag: vec![0.0, 1.0],
            upper: vec![1.0, 0.0],
        };
        assert!(a.solve_in_place(&mut [1.0, 1.0], &mut Vec::new()).is_none());
    }
}
