//! Independent reference computations used by the integration suites.
//! Nothing in here calls into the library's numerics.
#![allow(dead_code)]

use hmix_core::numkernel::Matrix;
use hmix_core::sysmodel::LtiSystem;
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, kept local so the oracle does not share the sampler
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| gaussian(rng) * scale)
}

/// Largest singular value through nalgebra's SVD.
pub fn spectral_norm(m: &Matrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Spectral radius from the characteristic roots (nalgebra's complex
/// eigenvalues, not the library routine).
pub fn spectral_radius(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Scales `a` so its spectral radius equals `target`.
pub fn with_radius(a: Matrix, target: f64) -> Matrix {
    let rho = spectral_radius(&a);
    if rho == 0.0 {
        a
    } else {
        a * (target / rho)
    }
}

/// Plant with `C = [sqrt(q) I; 0]`, `E = [0; sqrt(r) I]`, so `Q = qI` and `R = rI`.
pub fn plant(a: Matrix, b: Matrix, d: Matrix, q: f64, r: f64) -> LtiSystem {
    let (n, m) = (a.nrows(), b.ncols());
    let mut c = Matrix::zeros(n + m, n);
    let mut e = Matrix::zeros(n + m, m);
    for i in 0..n {
        c[(i, i)] = q.sqrt();
    }
    for j in 0..m {
        e[(n + j, j)] = r.sqrt();
    }
    LtiSystem::new(a, b, c, d, e).expect("plant")
}

/// Random plant with `n` states, `m` inputs and open-loop radius `rho`.
pub fn random_plant(rng: &mut ChaCha8Rng, n: usize, m: usize, rho: f64, d_scale: f64) -> LtiSystem {
    let a = with_radius(random_matrix(rng, n, n, 1.0), rho);
    let b = random_matrix(rng, n, m, 1.0);
    let d = Matrix::identity(n, n) * d_scale;
    plant(a, b, d, 1.0, 1.0)
}

/// Solves `X - F'XF = V` through the vectorized linear system
/// `(I - F' (x) F') vec(X) = vec(V)`.
pub fn kron_lyapunov(f: &Matrix, v: &Matrix) -> Matrix {
    let n = f.nrows();
    let ft = f.transpose();
    let op = Matrix::identity(n * n, n * n) - ft.kronecker(&ft);
    let rhs = nalgebra::DVector::from_column_slice(v.as_slice());
    let sol = op.lu().solve(&rhs).expect("Kronecker system singular");
    Matrix::from_column_slice(n, n, sol.as_slice())
}

/// `exp(M)` by Taylor series with scaling and squaring.
pub fn taylor_expm(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let norm = m.abs().row_sum().max();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s);
    let mut term = Matrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order hold by `A_d = exp(A dt)` and composite Simpson quadrature of
/// `int_0^dt exp(A s) ds [B D]`.
pub fn zoh_quadrature(
    ac: &Matrix,
    bc: &Matrix,
    dc: &Matrix,
    dt: f64,
    panels: usize,
) -> (Matrix, Matrix, Matrix) {
    let n = ac.nrows();
    let panels = panels + panels % 2;
    let h = dt / panels as f64;
    let step = taylor_expm(&(ac * h));
    let mut phi = Matrix::identity(n, n);
    let mut integral = Matrix::zeros(n, n);
    for i in 0..=panels {
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += &phi * w;
        if i < panels {
            phi = &phi * &step;
        }
    }
    integral *= h / 3.0;
    (taylor_expm(&(ac * dt)), &integral * bc, &integral * dc)
}

fn c_mul(a: [[Complex<f64>; 2]; 2], b: [[Complex<f64>; 2]; 2]) -> [[Complex<f64>; 2]; 2] {
    let mut out = [[Complex::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn to_c(m: &Matrix) -> [[Complex<f64>; 2]; 2] {
    [
        [Complex::new(m[(0, 0)], 0.0), Complex::new(m[(0, 1)], 0.0)],
        [Complex::new(m[(1, 0)], 0.0), Complex::new(m[(1, 1)], 0.0)],
    ]
}

/// Largest singular value of a complex 2x2 matrix in closed form:
/// `s^2 = (f + sqrt(f^2 - 4|det|^2)) / 2` with `f` the squared Frobenius norm.
pub fn sigma_max_2x2(g: [[Complex<f64>; 2]; 2]) -> f64 {
    let f: f64 = g.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (g[0][0] * g[1][1] - g[0][1] * g[1][0]).norm_sqr();
    ((f + (f * f - 4.0 * det).max(0.0).sqrt()) / 2.0).sqrt()
}

/// `max_w sigma_max(C (e^{jw} I - A)^-1 D)` over `points` equally spaced
/// frequencies in `[0, pi]`, for 2x2 `A`, `C`, `D`.
pub fn dense_grid_hinf(a: &Matrix, c: &Matrix, d: &Matrix, points: usize) -> f64 {
    assert!(a.shape() == (2, 2) && c.shape() == (2, 2) && d.shape() == (2, 2));
    let (ac, cc, dc) = (to_c(a), to_c(c), to_c(d));
    let mut best = 0.0f64;
    for i in 0..points {
        let w = std::f64::consts::PI * i as f64 / (points - 1) as f64;
        let z = Complex::new(w.cos(), w.sin());
        let m = [[z - ac[0][0], -ac[0][1]], [-ac[1][0], z - ac[1][1]]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ];
        best = best.max(sigma_max_2x2(c_mul(c_mul(cc, inv), dc)));
    }
    best
}

/// Standard DARE by value iteration, returning `(K, P)`.
pub fn vi_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> (Matrix, Matrix) {
    let mut p = q.clone();
    for _ in 0..1_000_000 {
        let btp = b.transpose() * &p;
        let k = (r + &btp * b).lu().solve(&(&btp * a)).unwrap();
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &p).norm();
        p = next;
        if change <= 1e-15 * p.norm() {
            break;
        }
    }
    let btp = b.transpose() * &p;
    let k = (r + &btp * b).lu().solve(&(&btp * a)).unwrap();
    (k, p)
}

/// Constants of the regret analysis evaluated term by term.
pub struct Consts {
    pub kappa: f64,
    pub eps: f64,
    pub t_star: f64,
    pub p_star: f64,
}

pub fn consts(mu: f64, nu: f64, sigma: f64, b_norm: f64) -> Consts {
    let k2 = nu / mu;
    let kappa = k2.sqrt();
    let eps = 0.5 / k2;
    let k4 = k2 * k2;
    let t_star = 8.0 * sigma * k4 * b_norm / (eps * mu) * (1.0 + k2 * b_norm * (1.0 + k2) / eps);
    let p_star = 2.0 * sigma / b_norm + 4.0 * k2 * sigma * (1.0 + k2) / eps;
    Consts {
        kappa,
        eps,
        t_star,
        p_star,
    }
}

/// Scalar plant `x+ = a x + b u + d w` with `Q_t = q_t`, `R_t = r_t`: the
/// online loop written out in scalar arithmetic.
pub struct ScalarLoop {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub t: usize,
    pub qbar: f64,
    pub rbar: f64,
    pub k: f64,
    pub p: f64,
    pub k_next: f64,
    pub nu: f64,
    pub refined_at: Option<usize>,
}

impl ScalarLoop {
    /// Stable root of `d^2 P^2 - (g^2 (1 - f^2) + c d^2) P + c g^2 = 0`.
    pub fn policy_p(&self, k: f64, qbar: f64, rbar: f64) -> f64 {
        let f = self.a - self.b * k;
        let c = qbar + k * k * rbar;
        let g2 = self.gamma * self.gamma;
        let d2 = self.d * self.d;
        let beta = g2 * (1.0 - f * f) + c * d2;
        2.0 * c * g2 / (beta + (beta * beta - 4.0 * d2 * c * g2).sqrt())
    }

    pub fn improve(&self, p: f64, rbar: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        let pt = p * g2 / (g2 - self.d * self.d * p);
        self.b * pt * self.a / (rbar + self.b * self.b * pt)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        b: f64,
        d: f64,
        gamma: f64,
        mu: f64,
        sigma: f64,
        k1: f64,
        q1: f64,
        r1: f64,
    ) -> Self {
        let mut s = ScalarLoop {
            a,
            b,
            d,
            gamma,
            mu,
            sigma,
            t: 1,
            qbar: q1,
            rbar: r1,
            k: k1,
            p: 0.0,
            k_next: 0.0,
            nu: 0.0,
            refined_at: None,
        };
        s.p = s.policy_p(k1, q1, r1);
        s.nu = s.p;
        s.k_next = s.improve(s.p, r1);
        s
    }

    pub fn t_star(&self) -> f64 {
        consts(self.mu, self.nu, self.sigma, self.b.abs()).t_star
    }

    pub fn step(&mut self, q: f64, r: f64) {
        let t = self.t + 1;
        let w = 1.0 / t as f64;
        self.qbar = (1.0 - w) * self.qbar + w * q;
        self.rbar = (1.0 - w) * self.rbar + w * r;
        self.t = t;
        self.k = self.k_next;
        self.p = self.policy_p(self.k, self.qbar, self.rbar);
        let mut refined_now = false;
        let c = consts(self.mu, self.nu, self.sigma, self.b.abs());
        if self.refined_at.is_none() && t as f64 >= c.t_star.ceil() {
            let threshold = c.p_star / c.t_star;
            let mut prev = self.p;
            let mut kd = self.k;
            for _ in 0..1000 {
                kd = self.improve(prev, self.rbar);
                let pd = self.policy_p(kd, self.qbar, self.rbar);
                let diff = (pd - prev).abs();
                prev = pd;
                if diff <= threshold {
                    break;
                }
            }
            self.p = prev;
            self.k_next = kd;
            self.refined_at = Some(t);
            refined_now = true;
        }
        self.nu = self.nu.max(self.p);
        if !refined_now {
            self.k_next = self.improve(self.p, self.rbar);
        }
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
