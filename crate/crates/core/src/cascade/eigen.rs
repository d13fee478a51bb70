//! Eigenvalues of small dense real matrices.
//!
//! Householder reduction to upper Hessenberg form, then the Francis
//! double-shift QR iteration with exceptional shifts at iterations 10 and 30
//! of a stalled block. Only eigenvalues are accumulated; eigenvectors are
//! extracted on demand by inverse iteration.

use num_complex::Complex64;

use super::linop::LinOp;
use super::CascadeError;

type Mat = Vec<Vec<f64>>;

/// Orthogonal similarity to upper Hessenberg form.
pub(crate) fn hessenberg(a: &LinOp) -> Mat {
    let n = a.dim();
    let mut h: Mat = a.rows();
    if n < 3 {
        return h;
    }
    let mut ort = vec![0.0; n];
    let high = n - 1;
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[i][j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let f = (m..=high).rev().map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
        for row in h.iter_mut().skip(m + 1) {
            row[m - 1] = 0.0;
        }
    }
    h
}

/// All eigenvalues with multiplicity. Fails when the total number of QR
/// sweeps exceeds `500·n`.
pub(crate) fn eigenvalues(a: &LinOp) -> Result<Vec<Complex64>, CascadeError> {
    let nn = a.dim();
    let mut h = hessenberg(a);
    let mut wr = vec![0.0; nn];
    let mut wi = vec![0.0; nn];

    let norm: f64 = (0..nn)
        .flat_map(|i| (i.saturating_sub(1)..nn).map(move |j| (i, j)))
        .map(|(i, j)| h[i][j].abs())
        .sum();
    if norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); nn]);
    }

    let eps = f64::EPSILON;
    let max_sweeps = 500 * nn;
    let mut sweeps = 0usize;
    let mut exshift = 0.0;
    let mut iter = 0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let mut n = nn as isize - 1;

    while n >= 0 {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            wr[nu] = h[nu][nu] + exshift;
            wi[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots from the trailing 2x2 block.
            let w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            let x = h[nu][nu] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                wr[nu - 1] = x + z;
                wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                wi[nu - 1] = 0.0;
                wi[nu] = 0.0;
            } else {
                wr[nu - 1] = x + p;
                wr[nu] = x + p;
                wi[nu - 1] = z;
                wi[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            let mut x = h[nu][nu];
            let mut y = 0.0;
            let mut w = 0.0;
            if l < nu {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }
            if iter == 10 {
                exshift += x;
                for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                        row[i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(CascadeError::NoConvergence { sweeps });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[m][m - 1].abs() * (q.abs() + r.abs());
                let rhs = eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// Approximate eigenvector for `lambda` by inverse iteration, returned with
/// its relative residual `‖Av − λv‖₂ / ‖v‖₂`.
pub(crate) fn eigenvector(a: &LinOp, lambda: Complex64) -> (Vec<Complex64>, f64) {
    let n = a.dim();
    let scale = a.norm_inf().max(1.0);
    let shifted: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = Complex64::new(a.get(i, j), 0.0);
                    if i == j {
                        v - lambda
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let lu = ComplexLu::factor(shifted, f64::EPSILON * scale);
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + i as f64 / (n as f64 + 1.0), 0.0))
        .collect();
    for _ in 0..3 {
        v = lu.solve(&v);
        let norm = l2(&v);
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v.iter_mut().for_each(|c| *c /= norm);
    }
    let av: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|j| v[j] * a.get(i, j)).sum())
        .collect();
    let resid: Vec<Complex64> = av.iter().zip(&v).map(|(x, y)| x - lambda * y).collect();
    let vn = l2(&v);
    let rel = if vn > 0.0 { l2(&resid) / vn } else { f64::INFINITY };
    (v, rel)
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

/// LU with partial pivoting; vanishing pivots are replaced by `floor` so a
/// singular shifted matrix still yields a solve.
struct ComplexLu {
    lu: Vec<Vec<Complex64>>,
    perm: Vec<usize>,
}

impl ComplexLu {
    fn factor(mut a: Vec<Vec<Complex64>>, floor: f64) -> Self {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))
                .expect("non-empty");
            a.swap(k, piv);
            perm.swap(k, piv);
            if a[k][k].norm() < floor {
                a[k][k] = Complex64::new(floor, 0.0);
            }
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                for j in k + 1..n {
                    let t = a[k][j];
                    a[i][j] -= f * t;
                }
            }
        }
        Self { lu: a, perm }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.len();
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[i][j] * y[j];
                y[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[i][j] * y[j];
                y[i] -= t;
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}
