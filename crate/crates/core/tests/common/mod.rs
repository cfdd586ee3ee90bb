//! Reference solvers written without the library's linear algebra, used as
//! independent oracles.

#![allow(dead_code, clippy::needless_range_loop)]

use num_complex::Complex64;

pub type C = Complex64;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// Number of eigenvalues of the symmetric tridiagonal matrix (diagonal `d`,
/// constant off-diagonal `e`) below `x`, from the Sturm sequence.
fn count_below(d: &[f64], e: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (k, &dk) in d.iter().enumerate() {
        q = dk - x - if k == 0 { 0.0 } else { e * e / q };
        if q == 0.0 {
            q = 1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue by bisection.
pub fn tridiag_eigenvalue(d: &[f64], e: f64, k: usize) -> f64 {
    let radius = 2.0 * e.abs();
    let mut lo = d.iter().cloned().fold(f64::INFINITY, f64::min) - radius - 1.0;
    let mut hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + radius + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `(T - shift) x = b` for tridiagonal `T` (Thomas algorithm).
fn thomas(d: &[f64], e: f64, shift: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = d[0] - shift;
    cp[0] = e / denom;
    dp[0] = b[0] / denom;
    for i in 1..n {
        denom = d[i] - shift - e * cp[i - 1];
        cp[i] = e / denom;
        dp[i] = (b[i] - e * dp[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Normalized eigenvector for `lambda` by inverse iteration.
pub fn tridiag_eigenvector(d: &[f64], e: f64, lambda: f64) -> Vec<f64> {
    let n = d.len();
    let shift = lambda + 1e-10 * (1.0 + lambda.abs());
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    for _ in 0..6 {
        v = thomas(d, e, shift, &v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub struct TransmonOracle {
    /// Level energies above ground (Hz).
    pub levels: Vec<f64>,
    pub n: Vec<Vec<f64>>,
    pub cosphi: Vec<Vec<f64>>,
}

/// Charge-basis transmon with `E_J` given directly (Hz), lowest `k` levels.
pub fn transmon_oracle(e_c: f64, e_j: f64, n_g: f64, cutoff: i64, k: usize) -> TransmonOracle {
    let charges: Vec<f64> = (-cutoff..=cutoff).map(|m| m as f64).collect();
    let d: Vec<f64> = charges
        .iter()
        .map(|m| 4.0 * e_c * (m - n_g).powi(2))
        .collect();
    let e = -0.5 * e_j;
    let evals: Vec<f64> = (0..k).map(|i| tridiag_eigenvalue(&d, e, i)).collect();
    let vecs: Vec<Vec<f64>> = evals
        .iter()
        .map(|&l| tridiag_eigenvector(&d, e, l))
        .collect();
    let dim = d.len();
    let mut n = vec![vec![0.0; k]; k];
    let mut cosphi = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            n[i][j] = (0..dim)
                .map(|m| vecs[i][m] * charges[m] * vecs[j][m])
                .sum::<f64>()
                .abs();
            let mut cp = 0.0;
            for m in 0..dim - 1 {
                cp += 0.5 * (vecs[i][m] * vecs[j][m + 1] + vecs[i][m + 1] * vecs[j][m]);
            }
            cosphi[i][j] = cp.abs();
        }
    }
    TransmonOracle {
        levels: evals.iter().map(|l| l - evals[0]).collect(),
        n,
        cosphi,
    }
}

pub type M3 = [[C; 3]; 3];

fn mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[c(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn dag(a: &M3) -> M3 {
    let mut out = [[c(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

fn unit(i: usize, j: usize) -> M3 {
    let mut m = [[c(0.0); 3]; 3];
    m[i][j] = c(1.0);
    m
}

/// Rates and drives in rad/s: `(Gamma10, Gamma20, Gamma21, phi00, phi11, phi22)`.
pub struct Qutrit {
    pub relax: [f64; 3],
    pub dephase: [f64; 3],
    pub omega_c: f64,
    pub omega_p: f64,
    pub delta: f64,
}

impl Qutrit {
    pub fn rhs(&self, rho: &M3) -> M3 {
        let mut h = [[c(0.0); 3]; 3];
        h[1][1] = c(self.delta);
        h[2][2] = c(self.delta);
        h[2][1] = c(-self.omega_c);
        h[1][2] = c(-self.omega_c);
        h[2][0] = c(-self.omega_p);
        h[0][2] = c(-self.omega_p);
        let hr = mul(&h, rho);
        let rh = mul(rho, &h);
        let mut out = [[c(0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = C::new(0.0, -1.0) * (hr[i][j] - rh[i][j]);
            }
        }
        let jumps = [
            (0.5 * self.relax[0], unit(0, 1)),
            (0.5 * self.relax[1], unit(0, 2)),
            (0.5 * self.relax[2], unit(1, 2)),
            (self.dephase[0], unit(0, 0)),
            (self.dephase[1], unit(1, 1)),
            (self.dephase[2], unit(2, 2)),
        ];
        for (k, o) in jumps {
            let od = dag(&o);
            let a = mul(&mul(&o, rho), &od);
            let odo = mul(&od, &o);
            let b = mul(&odo, rho);
            let d = mul(rho, &odo);
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] += c(k) * (c(2.0) * a[i][j] - b[i][j] - d[i][j]);
                }
            }
        }
        out
    }

    /// Steady state from the linear system with the `rho00` equation swapped
    /// for the trace condition, solved by Gaussian elimination.
    pub fn steady_state(&self) -> M3 {
        let mut a = vec![vec![c(0.0); 10]; 9];
        for col in 0..9 {
            let image = self.rhs(&unit(col / 3, col % 3));
            for row in 0..9 {
                a[row][col] = image[row / 3][row % 3];
            }
        }
        for col in 0..9 {
            a[0][col] = if col % 4 == 0 { c(1.0) } else { c(0.0) };
        }
        a[0][9] = c(1.0);
        for p in 0..9 {
            let piv = (p..9)
                .max_by(|&x, &y| a[x][p].norm().total_cmp(&a[y][p].norm()))
                .unwrap();
            a.swap(p, piv);
            for r in 0..9 {
                if r != p {
                    let f = a[r][p] / a[p][p];
                    for k in p..10 {
                        let v = a[p][k];
                        a[r][k] -= f * v;
                    }
                }
            }
        }
        let mut rho = [[c(0.0); 3]; 3];
        for k in 0..9 {
            rho[k / 3][k % 3] = a[k][9] / a[k][k];
        }
        rho
    }
}
