//! Small dense Householder QR for tall, narrow least-squares systems.

/// Upper-triangular factor of a thin QR, plus the transformed right-hand side.
pub(crate) struct ThinQr {
    cols: usize,
    /// Row-major `cols x cols` upper triangle.
    r: Vec<f64>,
}

impl ThinQr {
    /// Factors a row-major `rows x cols` matrix, applying the same reflections
    /// to `rhs` when given. Returns `None` when a column is numerically
    /// dependent on the previous ones.
    pub(crate) fn factor(mut a: Vec<f64>, rows: usize, cols: usize, mut rhs: Option<&mut [f64]>) -> Option<Self> {
        debug_assert_eq!(a.len(), rows * cols);
        if rows < cols {
            return None;
        }
        let col_norms: Vec<f64> = (0..cols)
            .map(|j| (0..rows).map(|i| a[i * cols + j].powi(2)).sum::<f64>().sqrt())
            .collect();
        let mut v = vec![0.0; rows];
        for j in 0..cols {
            let norm = (j..rows).map(|i| a[i * cols + j].powi(2)).sum::<f64>().sqrt();
            if !(norm > 1e-13 * col_norms[j].max(f64::MIN_POSITIVE)) {
                return None;
            }
            let alpha = if a[j * cols + j] > 0.0 { -norm } else { norm };
            for i in j..rows {
                v[i] = a[i * cols + j];
            }
            v[j] -= alpha;
            let vnorm2: f64 = (j..rows).map(|i| v[i] * v[i]).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            for k in j..cols {
                let dot: f64 = (j..rows).map(|i| v[i] * a[i * cols + k]).sum();
                let s = 2.0 * dot / vnorm2;
                for i in j..rows {
                    a[i * cols + k] -= s * v[i];
                }
            }
            if let Some(b) = rhs.as_deref_mut() {
                let dot: f64 = (j..rows).map(|i| v[i] * b[i]).sum();
                let s = 2.0 * dot / vnorm2;
                for i in j..rows {
                    b[i] -= s * v[i];
                }
            }
        }
        let mut r = vec![0.0; cols * cols];
        for i in 0..cols {
            for j in i..cols {
                r[i * cols + j] = a[i * cols + j];
            }
        }
        Some(Self { cols, r })
    }

    /// Solves `R x = b` for the leading `cols` entries of `b`.
    pub(crate) fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols;
        let mut x = b[..n].to_vec();
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.r[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.r[i * n + i];
        }
        x
    }

    /// Solves `R^T x = b`.
    pub(crate) fn solve_lower_transposed(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols;
        let mut x = b[..n].to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.r[j * n + i] * x[j]).sum();
            x[i] = (x[i] - s) / self.r[i * n + i];
        }
        x
    }
}

/// Least-squares polynomial coefficients (ascending powers) of `ys` over `xs`.
pub(crate) fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Option<Vec<f64>> {
    let cols = degree + 1;
    let mut a = Vec::with_capacity(xs.len() * cols);
    for &x in xs {
        let mut p = 1.0;
        for _ in 0..cols {
            a.push(p);
            p *= x;
        }
    }
    let mut b = ys.to_vec();
    let qr = ThinQr::factor(a, xs.len(), cols, Some(&mut b))?;
    Some(qr.solve_upper(&b))
}

pub(crate) fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
