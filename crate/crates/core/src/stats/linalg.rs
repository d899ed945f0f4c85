//! Householder QR on column-major data.

/// Relative threshold below which a column counts as linearly dependent on
/// the columns before it.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Qr {
    n: usize,
    p: usize,
    /// Column-major: R above the diagonal, Householder vectors below.
    a: Vec<f64>,
    diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dependent {
    /// Index of the first column that depends on earlier ones.
    pub column: usize,
}

fn norm(v: &[f64]) -> f64 {
    // Scaled to avoid overflow for large entries.
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

impl Qr {
    /// Factorizes the `n x p` matrix given as `p` columns of length `n`.
    pub fn new(columns: &[Vec<f64>]) -> Result<Qr, Dependent> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut a = Vec::with_capacity(n * p);
        for c in columns {
            assert_eq!(c.len(), n, "ragged design");
            a.extend_from_slice(c);
        }
        let col_norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
        let mut diag = vec![0.0; p];
        for j in 0..p.min(n) {
            let (head, tail) = a.split_at_mut(j * n + n);
            let col = &mut head[j * n..];
            let sub_norm = norm(&col[j..]);
            if sub_norm <= RANK_TOL * col_norms[j].max(f64::MIN_POSITIVE) {
                return Err(Dependent { column: j });
            }
            let alpha = if col[j] > 0.0 { -sub_norm } else { sub_norm };
            col[j] -= alpha;
            let vnorm = norm(&col[j..]);
            for x in &mut col[j..] {
                *x /= vnorm;
            }
            diag[j] = alpha;
            // Apply I - 2vv' to the remaining columns.
            for k in 0..(p - j - 1) {
                let other = &mut tail[k * n..k * n + n];
                let dot: f64 = col[j..].iter().zip(&other[j..]).map(|(v, o)| v * o).sum();
                for (o, v) in other[j..].iter_mut().zip(&col[j..]) {
                    *o -= 2.0 * dot * v;
                }
            }
        }
        if p > n {
            return Err(Dependent { column: n });
        }
        Ok(Qr { n, p, a, diag })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    fn v(&self, j: usize) -> &[f64] {
        &self.a[j * self.n + j..j * self.n + self.n]
    }

    /// R[i][j] for i <= j.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[j]
        } else {
            self.a[j * self.n + i]
        }
    }

    /// Computes Q'y in place.
    pub fn apply_qt(&self, y: &mut [f64]) {
        for j in 0..self.p {
            let v = self.v(j);
            let dot: f64 = v.iter().zip(&y[j..]).map(|(a, b)| a * b).sum();
            for (yi, vi) in y[j..].iter_mut().zip(v) {
                *yi -= 2.0 * dot * vi;
            }
        }
    }

    /// Computes Qz in place.
    pub fn apply_q(&self, z: &mut [f64]) {
        for j in (0..self.p).rev() {
            let v = self.v(j);
            let dot: f64 = v.iter().zip(&z[j..]).map(|(a, b)| a * b).sum();
            for (zi, vi) in z[j..].iter_mut().zip(v) {
                *zi -= 2.0 * dot * vi;
            }
        }
    }

    /// Least-squares coefficients for `y`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut beta = vec![0.0; self.p];
        for i in (0..self.p).rev() {
            let s: f64 = ((i + 1)..self.p).map(|j| self.r(i, j) * beta[j]).sum();
            beta[i] = (qty[i] - s) / self.r(i, i);
        }
        beta
    }

    /// Inverse of the upper-triangular R, row-major `p x p`.
    pub fn r_inverse(&self) -> Vec<f64> {
        let p = self.p;
        let mut inv = vec![0.0; p * p];
        for j in 0..p {
            inv[j * p + j] = 1.0 / self.r(j, j);
            for i in (0..j).rev() {
                let s: f64 = ((i + 1)..=j).map(|k| self.r(i, k) * inv[k * p + j]).sum();
                inv[i * p + j] = -s / self.r(i, i);
            }
        }
        inv
    }

    /// Diagonal of (X'X)^-1 = R^-1 R^-T.
    pub fn xtx_inv_diag(&self) -> Vec<f64> {
        let p = self.p;
        let inv = self.r_inverse();
        (0..p).map(|i| (0..p).map(|k| inv[i * p + k].powi(2)).sum()).collect()
    }

    /// Diagonal of the hat matrix: squared row norms of the thin Q.
    pub fn leverage(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.n];
        let mut e = vec![0.0; self.n];
        for j in 0..self.p {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            self.apply_q(&mut e);
            for (hi, qi) in h.iter_mut().zip(&e) {
                *hi += qi * qi;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system() {
        // [[2, 1], [1, 3]] x = [3, 5] -> x = [0.8, 1.4]
        let qr = Qr::new(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = qr.solve(&[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn detects_dependent_column() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![1.0, 1.0, 1.0, 1.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        assert_eq!(Qr::new(&[a, b, c]).unwrap_err(), Dependent { column: 2 });
    }

    #[test]
    fn q_roundtrip_and_leverage_trace() {
        let cols = vec![vec![1.0; 5], vec![0.0, 1.0, 2.0, 3.0, 9.0]];
        let qr = Qr::new(&cols).unwrap();
        let mut y = vec![1.0, -2.0, 0.5, 3.0, 4.0];
        let orig = y.clone();
        qr.apply_qt(&mut y);
        qr.apply_q(&mut y);
        for (a, b) in y.iter().zip(&orig) {
            assert!((a - b).abs() < 1e-12);
        }
        let h = qr.leverage();
        assert!((h.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }
}
