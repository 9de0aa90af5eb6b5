//! Frequency-domain H-infinity evaluation for `C (zI - A)^-1 D`.
//!
//! `A` is reduced once to upper Hessenberg form so each frequency costs a
//! Hessenberg solve plus a small Hermitian eigenvalue problem. The largest
//! singular value comes from a Householder tridiagonalization of the Gram
//! matrix followed by Sturm bisection and Newton on the tridiagonal.
//! During the grid scan a point skips the eigenvalue stage when the
//! Frobenius norm, or a Cholesky factorization of `floor^2 I - G*G`, shows
//! it cannot beat the running maximum.

use std::f64::consts::PI;

use nalgebra::{Complex, Hessenberg};

use crate::error::{Error, Result};
use crate::numkernel::{ensure_square, spectral_radius, Matrix};

type C64 = Complex<f64>;

pub const DEFAULT_GRID_POINTS: usize = 2048;
pub const DEFAULT_REFINE_TOL: f64 = 1e-8;

/// Precomputed data for evaluating `sigma_max(C (e^{iw} I - A)^-1 D)`.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    n: usize,
    q: usize,
    p: usize,
    /// Hessenberg form of A, row-major
    h: Vec<f64>,
    /// compressed output map in Hessenberg coordinates, row-major q x n
    c: Vec<f64>,
    /// compressed input map in Hessenberg coordinates, row-major n x p
    d: Vec<f64>,
    // scratch
    m: Vec<C64>,
    x: Vec<C64>,
    g: Vec<C64>,
    w: Vec<C64>,
    v: Vec<C64>,
    pv: Vec<C64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    chol: Vec<C64>,
    inverse: Option<InverseForm>,
}

/// When `C` has full column rank and `D` full row rank, with `C = Q_c R`
/// and `D = L Q_d`, the singular values of the response are the reciprocals
/// of those of `M(z) = L^-1 (zI - A) R^-1 = zP - Q`, and on the unit circle
/// `M*M = S0 - cos(w) (N + N') + i sin(w) (N - N')` with `N = P'Q`. The grid
/// scan uses this O(n^2) form to locate the peak.
#[derive(Debug, Clone)]
struct InverseForm {
    s0: Vec<f64>,
    sym: Vec<f64>,
    skew: Vec<f64>,
    w: Vec<C64>,
}

/// Largest condition product of `R` and `L` for which the inverse form is
/// used.
const INVERSE_FORM_MAX_COND: f64 = 1e6;

fn condition(m: &Matrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

impl InverseForm {
    fn new(a: &Matrix, c: &Matrix, d: &Matrix) -> Option<Self> {
        let n = a.nrows();
        if c.nrows() < n || d.ncols() < n {
            return None;
        }
        let r = c.clone().qr().r();
        let l = d.transpose().qr().r().transpose();
        if !(condition(&r) * condition(&l) <= INVERSE_FORM_MAX_COND) {
            return None;
        }
        let r_inv = r.try_inverse()?;
        let l_inv = l.try_inverse()?;
        let p = &l_inv * &r_inv;
        let q = &l_inv * a * &r_inv;
        let nm = p.transpose() * &q;
        let s0 = p.transpose() * &p + q.transpose() * &q;
        let form = InverseForm {
            s0: row_major(&s0),
            sym: row_major(&(&nm + nm.transpose())),
            skew: row_major(&(&nm - nm.transpose())),
            w: vec![C64::default(); n * n],
        };
        form.s0
            .iter()
            .chain(&form.sym)
            .all(|v| v.is_finite())
            .then_some(form)
    }
}

fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl FrequencyResponse {
    pub fn new(a: &Matrix, c: &Matrix, d: &Matrix) -> Result<Self> {
        let n = ensure_square(a)?;
        if c.ncols() != n || d.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "frequency response: A {n}x{n}, C {}x{}, D {}x{}",
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        // C = Q_c R_c and D' = Q_d R_d leave the singular values unchanged
        // when C is replaced by R_c and D by R_d'.
        let c = if c.nrows() > n {
            c.clone().qr().r()
        } else {
            c.clone()
        };
        let d = if d.ncols() > n {
            d.transpose().qr().r().transpose()
        } else {
            d.clone()
        };
        let (q, p) = (c.nrows(), d.ncols());
        let (qh, h) = if n > 1 {
            Hessenberg::new(a.clone()).unpack()
        } else {
            (Matrix::identity(1, 1), a.clone())
        };
        let c2 = &c * &qh;
        let d2 = qh.transpose() * &d;
        let s = q.min(p);
        Ok(FrequencyResponse {
            n,
            q,
            p,
            h: row_major(&h),
            c: row_major(&c2),
            d: row_major(&d2),
            m: vec![C64::default(); n * n],
            x: vec![C64::default(); n * p],
            g: vec![C64::default(); q * p],
            w: vec![C64::default(); s * s],
            v: vec![C64::default(); s],
            pv: vec![C64::default(); s],
            alpha: vec![0.0; s],
            beta: vec![0.0; s],
            chol: vec![C64::default(); n.max(s) * n.max(s)],
            inverse: InverseForm::new(a, &c, &d),
        })
    }

    /// Value used by the grid scan: the inverse form when available,
    /// otherwise the direct evaluation. `None` means the value cannot exceed
    /// `floor`.
    fn grid_value_above(&mut self, omega: f64, floor: f64) -> Option<f64> {
        let Some(inv) = self.inverse.as_mut() else {
            return self.sigma_max_above(omega, floor);
        };
        let n = self.n;
        let (cw, sw) = (omega.cos(), omega.sin());
        for i in 0..n * n {
            inv.w[i] = C64::new(inv.s0[i] - cw * inv.sym[i], sw * inv.skew[i]);
        }
        if floor > 0.0 {
            // lambda_min(M*M) > 1/floor^2 means sigma < floor
            let shift = 1.0 / (floor * floor);
            if positive_definite(n, &mut self.chol, |i, j| {
                if i == j {
                    inv.w[i * n + i] - shift
                } else {
                    inv.w[i * n + j]
                }
            }) {
                return None;
            }
        }
        let mut t = std::mem::take(&mut inv.w);
        for v in t.iter_mut() {
            *v = -*v;
        }
        let mut v = vec![C64::default(); n];
        let mut pv = vec![C64::default(); n];
        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        tridiagonalize(&mut t, n, &mut v, &mut pv, &mut alpha, &mut beta);
        inv.w = t;
        let lambda_min = -tridiagonal_lambda_max(&alpha, &beta[..n.saturating_sub(1)]);
        Some(if lambda_min > 0.0 {
            1.0 / lambda_min.sqrt()
        } else {
            f64::INFINITY
        })
    }

    /// Largest singular value of the transfer matrix at `e^{i omega}`.
    pub fn sigma_max(&mut self, omega: f64) -> f64 {
        self.sigma_max_above(omega, f64::NEG_INFINITY)
            .unwrap_or(0.0)
    }

    /// Like `sigma_max`, but returns `None` as soon as a bound shows the
    /// value cannot exceed `floor`.
    fn sigma_max_above(&mut self, omega: f64, floor: f64) -> Option<f64> {
        let (n, q, p) = (self.n, self.q, self.p);
        if q == 0 || p == 0 {
            return Some(0.0);
        }
        let z = C64::new(omega.cos(), omega.sin());
        for i in 0..n {
            for j in 0..n {
                let mut v = C64::new(-self.h[i * n + j], 0.0);
                if i == j {
                    v += z;
                }
                self.m[i * n + j] = v;
            }
        }
        for i in 0..n * p {
            self.x[i] = C64::new(self.d[i], 0.0);
        }
        // Hessenberg elimination with adjacent-row pivoting
        for k in 0..n.saturating_sub(1) {
            let (r0, r1) = (k * n, (k + 1) * n);
            if self.m[r1 + k].norm_sqr() > self.m[r0 + k].norm_sqr() {
                for j in k..n {
                    self.m.swap(r0 + j, r1 + j);
                }
                for j in 0..p {
                    self.x.swap(k * p + j, (k + 1) * p + j);
                }
            }
            let piv = self.m[r0 + k];
            if piv.norm_sqr() == 0.0 {
                continue;
            }
            let l = self.m[r1 + k] / piv;
            if l.norm_sqr() == 0.0 {
                continue;
            }
            for j in k..n {
                let t = self.m[r0 + j];
                self.m[r1 + j] -= l * t;
            }
            for j in 0..p {
                let t = self.x[k * p + j];
                self.x[(k + 1) * p + j] -= l * t;
            }
        }
        for k in (0..n).rev() {
            let piv = self.m[k * n + k];
            let inv = if piv.norm_sqr() == 0.0 {
                C64::new(f64::INFINITY, 0.0)
            } else {
                piv.inv()
            };
            let (done, rest) = self.x.split_at_mut((k + 1) * p);
            let row = &mut done[k * p..];
            for l in k + 1..n {
                let f = self.m[k * n + l];
                for (xr, &xl) in row.iter_mut().zip(&rest[(l - k - 1) * p..(l - k) * p]) {
                    *xr -= f * xl;
                }
            }
            for xr in row.iter_mut() {
                *xr *= inv;
            }
        }
        self.g.fill(C64::default());
        for i in 0..q {
            let grow = &mut self.g[i * p..(i + 1) * p];
            for l in 0..n {
                let f = self.c[i * n + l];
                if f == 0.0 {
                    continue;
                }
                for (gv, &xv) in grow.iter_mut().zip(&self.x[l * p..(l + 1) * p]) {
                    *gv += xv * f;
                }
            }
        }
        let frob2: f64 = self.g.iter().map(|v| v.norm_sqr()).sum();
        if q == 1 || p == 1 {
            return Some(frob2.sqrt());
        }
        let floor2 = if floor > 0.0 {
            floor * floor
        } else {
            f64::NEG_INFINITY
        };
        if frob2 <= floor2 {
            return None;
        }
        // Gram matrix on the smaller side
        let s = q.min(p);
        let w = &mut self.w[..s * s];
        w.fill(C64::default());
        if p <= q {
            for l in 0..q {
                let grow = &self.g[l * p..(l + 1) * p];
                for i in 0..p {
                    let f = grow[i].conj();
                    for (wv, &gv) in w[i * s + i..(i + 1) * s].iter_mut().zip(&grow[i..]) {
                        *wv += f * gv;
                    }
                }
            }
        } else {
            for i in 0..q {
                for j in i..q {
                    let mut acc = C64::default();
                    for (&a, &b) in self.g[i * p..(i + 1) * p]
                        .iter()
                        .zip(&self.g[j * p..(j + 1) * p])
                    {
                        acc += a * b.conj();
                    }
                    w[i * s + j] = acc;
                }
            }
        }
        for i in 0..s {
            for j in i + 1..s {
                w[j * s + i] = w[i * s + j].conj();
            }
        }
        if floor2 > 0.0
            && positive_definite(s, &mut self.chol, |i, j| {
                if i == j {
                    floor2 - w[i * s + i]
                } else {
                    -w[i * s + j]
                }
            })
        {
            return None;
        }
        tridiagonalize(
            &mut self.w,
            s,
            &mut self.v,
            &mut self.pv,
            &mut self.alpha,
            &mut self.beta,
        );
        Some(
            tridiagonal_lambda_max(&self.alpha, &self.beta[..s - 1])
                .max(0.0)
                .sqrt(),
        )
    }
}

/// Cholesky test: whether the Hermitian matrix with entries `entry(i, j)`
/// is positive definite.
fn positive_definite(s: usize, l: &mut [C64], entry: impl Fn(usize, usize) -> C64) -> bool {
    for j in 0..s {
        let mut djj = entry(j, j).re;
        for k in 0..j {
            djj -= l[j * s + k].norm_sqr();
        }
        if !(djj > 0.0) {
            return false;
        }
        let ljj = djj.sqrt();
        l[j * s + j] = C64::new(ljj, 0.0);
        for i in j + 1..s {
            let mut acc = entry(i, j);
            for k in 0..j {
                acc -= l[i * s + k] * l[j * s + k].conj();
            }
            l[i * s + j] = acc / ljj;
        }
    }
    true
}

/// Householder reduction of the Hermitian `s x s` matrix `w` (row-major,
/// overwritten) to a real symmetric tridiagonal with diagonal `alpha` and
/// off-diagonal magnitudes `beta`.
fn tridiagonalize(
    w: &mut [C64],
    s: usize,
    v: &mut [C64],
    pv: &mut [C64],
    alpha: &mut [f64],
    beta: &mut [f64],
) {
    for k in 0..s.saturating_sub(2) {
        alpha[k] = w[k * s + k].re;
        let xnorm = (k + 1..s)
            .map(|i| w[i * s + k].norm_sqr())
            .sum::<f64>()
            .sqrt();
        beta[k] = xnorm;
        if xnorm == 0.0 {
            continue;
        }
        let x0 = w[(k + 1) * s + k];
        let phase = if x0.norm_sqr() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let m = s - k - 1;
        for i in 0..m {
            v[i] = w[(k + 1 + i) * s + k];
        }
        v[0] += phase * xnorm;
        let vnorm = v[..m].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in v[..m].iter_mut() {
            *c /= vnorm;
        }
        let off = k + 1;
        for i in 0..m {
            let mut acc = C64::default();
            for j in 0..m {
                acc += w[(off + i) * s + off + j] * v[j];
            }
            pv[i] = acc;
        }
        let kappa: f64 = (0..m).map(|i| (v[i].conj() * pv[i]).re).sum();
        for i in 0..m {
            pv[i] -= v[i] * kappa;
        }
        for i in 0..m {
            for j in 0..m {
                let upd = v[i] * pv[j].conj() + pv[i] * v[j].conj();
                w[(off + i) * s + off + j] -= upd * 2.0;
            }
        }
    }
    if s >= 2 {
        alpha[s - 2] = w[(s - 2) * s + s - 2].re;
        beta[s - 2] = w[(s - 1) * s + s - 2].norm();
    }
    alpha[s - 1] = w[(s - 1) * s + s - 1].re;
}

/// Largest eigenvalue of the symmetric tridiagonal matrix (diag `a`,
/// off-diagonal `b`): Sturm-count bisection to a short bracket, then Newton
/// on the characteristic polynomial from above, which decreases
/// monotonically onto the largest root.
fn tridiagonal_lambda_max(a: &[f64], b: &[f64]) -> f64 {
    let s = a.len();
    if s == 1 {
        return a[0];
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..s {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < s { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    let width = (hi.abs() + lo.abs()).max(f64::MIN_POSITIVE);
    let pivot_floor = -f64::EPSILON * width;
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..s {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            d = a[i] - x - if i > 0 { off / d } else { 0.0 };
            if d == 0.0 {
                d = pivot_floor;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-3 * width {
            break;
        }
        if count_below(mid) == s {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x = hi;
    for _ in 0..200 {
        // p'/p = sum d_i'/d_i over the LDL' pivots of T - xI
        let mut d = 1.0;
        let mut dd = 0.0;
        let mut ratio = 0.0;
        for i in 0..s {
            let off = if i > 0 { b[i - 1] * b[i - 1] } else { 0.0 };
            let (nd, ndd) = if i > 0 {
                (a[i] - x - off / d, -1.0 + off * dd / (d * d))
            } else {
                (a[i] - x, -1.0)
            };
            if nd == 0.0 {
                return x;
            }
            d = nd;
            dd = ndd;
            ratio += dd / d;
        }
        let next = x - 1.0 / ratio;
        if !(next < x) || !next.is_finite() {
            break;
        }
        let done = x - next <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
        x = next.max(lo);
        if done {
            break;
        }
    }
    x
}

/// Peak gain over `[0, pi]`: uniform grid, then golden-section refinement
/// around the best grid point until the bracket is below `refine_tol`.
pub fn hinf_norm(
    a_cl: &Matrix,
    c_cl: &Matrix,
    d: &Matrix,
    grid_points: usize,
    refine_tol: f64,
) -> Result<f64> {
    let rho = spectral_radius(a_cl)?;
    if rho >= 1.0 {
        return Err(Error::UnstableClosedLoop(rho));
    }
    let mut fr = FrequencyResponse::new(a_cl, c_cl, d)?;
    Ok(peak_gain(&mut fr, grid_points, refine_tol))
}

pub(crate) fn peak_gain(fr: &mut FrequencyResponse, grid_points: usize, refine_tol: f64) -> f64 {
    let npts = grid_points.max(2);
    let step = PI / (npts - 1) as f64;
    // a coarse pass first so the pruning bound is tight early
    let coarse = 16;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in (0..npts).step_by(coarse) {
        let val = fr
            .grid_value_above(k as f64 * step, f64::NEG_INFINITY)
            .unwrap_or(0.0);
        if val > best.1 {
            best = (k, val);
        }
    }
    for k in (0..npts).filter(|k| k % coarse != 0) {
        if let Some(val) = fr.grid_value_above(k as f64 * step, best.1) {
            if val > best.1 || (val == best.1 && k < best.0) {
                best = (k, val);
            }
        }
    }
    let k = best.0;
    let mut peak = fr.sigma_max(k as f64 * step);
    let mut lo = if k == 0 { 0.0 } else { (k - 1) as f64 * step };
    let mut hi = if k + 1 >= npts {
        PI
    } else {
        (k + 1) as f64 * step
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = fr.sigma_max(x1);
    let mut f2 = fr.sigma_max(x2);
    let tol = refine_tol.max(f64::EPSILON);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = fr.sigma_max(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = fr.sigma_max(x2);
        }
        peak = peak.max(f1).max(f2);
    }
    peak.max(f1).max(f2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn all_pass_scalar() {
        let h = hinf_norm(&scalar(0.0), &scalar(1.0), &scalar(1.0), 2048, 1e-8).unwrap();
        assert!((h - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_peak_at_zero_frequency() {
        let h = hinf_norm(&scalar(0.5), &scalar(1.0), &scalar(1.0), 2048, 1e-8).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(
            hinf_norm(&scalar(1.2), &scalar(1.0), &scalar(1.0), 64, 1e-8),
            Err(Error::UnstableClosedLoop(_))
        ));
    }

    #[test]
    fn sigma_max_matches_svd() {
        let a = Matrix::from_row_slice(3, 3, &[0.3, 0.2, -0.1, 0.05, -0.4, 0.3, 0.1, 0.0, 0.6]);
        let c = Matrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 0.5, 0.5, 0.5, -1.0, 0.2, 0.0],
        );
        let d = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0]);
        let mut fr = FrequencyResponse::new(&a, &c, &d).unwrap();
        for &w in &[0.0, 0.3, 1.1, 2.5, PI] {
            let z = Complex::new(f64::cos(w), f64::sin(w));
            let ac = a.map(|v| Complex::new(v, 0.0));
            let m = nalgebra::DMatrix::<Complex<f64>>::identity(3, 3) * z - ac;
            let x = m.lu().solve(&d.map(|v| Complex::new(v, 0.0))).unwrap();
            let g = c.map(|v| Complex::new(v, 0.0)) * x;
            let svd = g.svd(false, false);
            let expect = svd.singular_values.max();
            assert!(
                (fr.sigma_max(w) - expect).abs() < 1e-12 * expect.max(1.0),
                "w={w}"
            );
        }
    }

    #[test]
    fn repeated_singular_values() {
        // identity-like response gives a split tridiagonal with a repeated top eigenvalue
        let a = Matrix::zeros(3, 3);
        let c = Matrix::identity(3, 3) * 2.0;
        let d = Matrix::identity(3, 3);
        let mut fr = FrequencyResponse::new(&a, &c, &d).unwrap();
        assert!((fr.sigma_max(0.7) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_form_agrees_with_direct_evaluation() {
        let m = crate::bench::load_model(&crate::bench::bundled_model_path("eight_state")).unwrap();
        let (a, c) = crate::sysmodel::closed_loop(&m.sys, &m.stabilizing_gain).unwrap();
        let mut fr = FrequencyResponse::new(&a, &c, m.sys.d()).unwrap();
        assert!(fr.inverse.is_some());
        for k in 0..200 {
            let omega = k as f64 * std::f64::consts::PI / 199.0;
            let fast = fr.grid_value_above(omega, f64::NEG_INFINITY).unwrap();
            let exact = fr.sigma_max(omega);
            assert!(
                (fast - exact).abs() <= 1e-9 * exact,
                "{omega}: {fast} vs {exact}"
            );
            assert!(fr.grid_value_above(omega, exact * 1.001).is_none());
            assert!(fr.grid_value_above(omega, exact * 0.999).is_some());
        }
    }
}
