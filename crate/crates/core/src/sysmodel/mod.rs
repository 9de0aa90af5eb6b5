//! Discrete-time LTI plant `x+ = Ax + Bu + Dw`, `z = Cx + Eu` under static
//! state feedback `u = -Kx`.

mod hinf;

use nalgebra::DVector;

pub use hinf::{hinf_norm, FrequencyResponse, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL};

use crate::error::{Error, Result};
use crate::numkernel::{
    definiteness, ensure_finite, ensure_square, matrix_exponential, operator_norm, spectral_radius,
    symmetrize, Definiteness, Matrix,
};

pub type Vector = DVector<f64>;

/// States above this norm are reported as [`Error::StateOverflow`].
pub const STATE_OVERFLOW: f64 = 1e12;

/// Plant matrices. `Q = C'C` and `R = E'E` are derived at construction and
/// the cross term `E'C` must vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
    e: Matrix,
    q: Matrix,
    r: Matrix,
}

impl LtiSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix, e: Matrix) -> Result<Self> {
        let n = ensure_square(&a)
            .map_err(|_| Error::DimensionMismatch(format!("A is {}x{}", a.nrows(), a.ncols())))?;
        let check = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(msg))
            }
        };
        check(
            b.nrows() == n,
            format!("B has {} rows, expected {n}", b.nrows()),
        )?;
        check(
            d.nrows() == n,
            format!("D has {} rows, expected {n}", d.nrows()),
        )?;
        check(
            c.ncols() == n,
            format!("C has {} columns, expected {n}", c.ncols()),
        )?;
        check(
            e.nrows() == c.nrows(),
            format!("E has {} rows, C has {}", e.nrows(), c.nrows()),
        )?;
        check(
            e.ncols() == b.ncols(),
            format!("E has {} columns, B has {}", e.ncols(), b.ncols()),
        )?;
        check(
            b.ncols() > 0 && d.ncols() > 0 && c.nrows() > 0,
            "empty input, disturbance or output dimension".into(),
        )?;
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D"), (&e, "E")] {
            ensure_finite(m, name)?;
        }
        let cross = operator_norm(&(e.transpose() * &c))?;
        let allowed = 1e-10 * (1.0 + operator_norm(&e)? * operator_norm(&c)?);
        if cross > allowed {
            return Err(Error::AssumptionViolation(format!(
                "||E'C|| = {cross:.3e} exceeds {allowed:.3e}"
            )));
        }
        let q = symmetrize(&(c.transpose() * &c));
        let r = symmetrize(&(e.transpose() * &e));
        for (m, name) in [(&q, "Q = C'C"), (&r, "R = E'E")] {
            let tol = 1e-12 * m.norm().max(1.0);
            if definiteness(m, tol)? == Definiteness::Indefinite {
                return Err(Error::AssumptionViolation(format!("{name} is indefinite")));
            }
        }
        Ok(LtiSystem {
            a,
            b,
            c,
            d,
            e,
            q,
            r,
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }
    pub fn e(&self) -> &Matrix {
        &self.e
    }
    pub fn q(&self) -> &Matrix {
        &self.q
    }
    pub fn r(&self) -> &Matrix {
        &self.r
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn disturbances(&self) -> usize {
        self.d.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `Tr(D D')`
    pub fn disturbance_trace(&self) -> f64 {
        (&self.d * self.d.transpose()).trace()
    }

    pub fn d_is_identity(&self, tol: f64) -> bool {
        self.d.is_square()
            && (&self.d - Matrix::identity(self.states(), self.states())).amax() <= tol
    }

    /// Copy of the plant with a different disturbance matrix.
    pub fn with_disturbance(&self, d: Matrix) -> Result<Self> {
        LtiSystem::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            d,
            self.e.clone(),
        )
    }
}

/// State-feedback gain `K` (m x n) for `u = -Kx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gain(pub Matrix);

impl Gain {
    pub fn zeros(sys: &LtiSystem) -> Self {
        Gain(Matrix::zeros(sys.inputs(), sys.states()))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    fn check(&self, sys: &LtiSystem) -> Result<()> {
        if self.0.nrows() != sys.inputs() || self.0.ncols() != sys.states() {
            return Err(Error::DimensionMismatch(format!(
                "gain is {}x{}, plant needs {}x{}",
                self.0.nrows(),
                self.0.ncols(),
                sys.inputs(),
                sys.states()
            )));
        }
        ensure_finite(&self.0, "gain")
    }
}

/// Continuous-to-discrete conversion under zero-order hold, via the
/// exponential of the augmented block matrix `[[Ac, Bc, Dc], [0, 0, 0]] dt`.
pub fn zoh_discretize(
    ac: &Matrix,
    bc: &Matrix,
    dc: &Matrix,
    dt: f64,
) -> Result<(Matrix, Matrix, Matrix)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonPositiveDt(dt));
    }
    let n = ensure_square(ac)?;
    if bc.nrows() != n || dc.nrows() != n {
        return Err(Error::DimensionMismatch(
            "ZOH: B and D must have as many rows as A".into(),
        ));
    }
    let (m, p) = (bc.ncols(), dc.ncols());
    let size = n + m + p;
    let mut aug = Matrix::zeros(size, size);
    aug.view_mut((0, 0), (n, n)).copy_from(ac);
    aug.view_mut((0, n), (n, m)).copy_from(bc);
    aug.view_mut((0, n + m), (n, p)).copy_from(dc);
    let phi = matrix_exponential(&(aug * dt))?;
    Ok((
        phi.view((0, 0), (n, n)).into_owned(),
        phi.view((0, n), (n, m)).into_owned(),
        phi.view((0, n + m), (n, p)).into_owned(),
    ))
}

/// `(A - BK, C - EK)`
pub fn closed_loop(sys: &LtiSystem, k: &Gain) -> Result<(Matrix, Matrix)> {
    k.check(sys)?;
    Ok((&sys.a - &sys.b * &k.0, &sys.c - &sys.e * &k.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub valid: bool,
    pub spectral_radius: f64,
    /// `f64::INFINITY` when the loop is unstable.
    pub hinf: f64,
}

/// Membership in the valid set: stabilizing and `||T_zw||_inf < gamma`.
pub fn is_valid_controller(sys: &LtiSystem, k: &Gain, gamma: f64) -> Result<Validity> {
    is_valid_controller_with(sys, k, gamma, DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL)
}

pub fn is_valid_controller_with(
    sys: &LtiSystem,
    k: &Gain,
    gamma: f64,
    grid_points: usize,
    refine_tol: f64,
) -> Result<Validity> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveParameter("gamma"));
    }
    let (a_cl, c_cl) = closed_loop(sys, k)?;
    let rho = spectral_radius(&a_cl)?;
    if rho >= 1.0 {
        return Ok(Validity {
            valid: false,
            spectral_radius: rho,
            hinf: f64::INFINITY,
        });
    }
    let hinf = hinf_norm(&a_cl, &c_cl, &sys.d, grid_points, refine_tol)?;
    Ok(Validity {
        valid: hinf < gamma,
        spectral_radius: rho,
        hinf,
    })
}

/// States `x_0..x_T`, and per-step controls, disturbances and outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub disturbances: Vec<Vector>,
    pub outputs: Vec<Vector>,
}

impl Trajectory {
    pub fn new(x0: Vector) -> Self {
        Trajectory {
            states: vec![x0],
            ..Default::default()
        }
    }

    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn current_state(&self) -> &Vector {
        self.states.last().expect("trajectory always holds x_0")
    }

    /// Largest deviation of a stored transition from the state equation.
    pub fn max_transition_defect(&self, sys: &LtiSystem) -> f64 {
        (0..self.horizon())
            .map(|t| {
                let pred = propagate(
                    sys,
                    &self.states[t],
                    &self.controls[t],
                    &self.disturbances[t],
                );
                (&self.states[t + 1] - pred).amax()
            })
            .fold(0.0, f64::max)
    }

    /// Appends one transition under `u = -K x_t` and the disturbance chosen by
    /// `disturbance(t, u_t)`.
    pub fn advance(
        &mut self,
        sys: &LtiSystem,
        k: &Gain,
        disturbance: impl FnOnce(usize, &Vector) -> Vector,
    ) -> Result<()> {
        let t = self.horizon();
        let x = self.current_state().clone();
        let u = -(&k.0 * &x);
        let w = disturbance(t, &u);
        if w.len() != sys.disturbances() {
            return Err(Error::DimensionMismatch(format!(
                "disturbance has length {}, plant expects {}",
                w.len(),
                sys.disturbances()
            )));
        }
        let z = &sys.c * &x + &sys.e * &u;
        let next = propagate(sys, &x, &u, &w);
        let norm = next.norm();
        if !(norm <= STATE_OVERFLOW) {
            return Err(Error::StateOverflow { step: t + 1, norm });
        }
        self.controls.push(u);
        self.disturbances.push(w);
        self.outputs.push(z);
        self.states.push(next);
        Ok(())
    }
}

/// `A x + (B u + D w)`; the input terms are summed first so an exact
/// cancellation `D w = -B u` leaves `A x` untouched.
pub fn propagate(sys: &LtiSystem, x: &Vector, u: &Vector, w: &Vector) -> Vector {
    &sys.a * x + (&sys.b * u + &sys.d * w)
}

pub fn simulate(
    sys: &LtiSystem,
    gains: &[Gain],
    disturbances: &[Vector],
    x0: &Vector,
) -> Result<Trajectory> {
    if gains.len() != disturbances.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gains but {} disturbances",
            gains.len(),
            disturbances.len()
        )));
    }
    if x0.len() != sys.states() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            sys.states()
        )));
    }
    let mut traj = Trajectory::new(x0.clone());
    for (k, w) in gains.iter().zip(disturbances) {
        k.check(sys)?;
        traj.advance(sys, k, |_, _| w.clone())?;
    }
    Ok(traj)
}
