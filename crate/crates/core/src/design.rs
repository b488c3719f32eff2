//! Event-parameter design.
//!
//! The design problem asks for the cheapest trigger weight `Y` (smallest
//! communication rate) whose worst-case prediction covariance, the fixed point
//! of `g_{R + Y^{-1}}`, stays strictly below a bound `Delta0`. The rate is
//! relaxed to `tr(Pi Y)`.
//!
//! Two independent feasibility routes are provided:
//!
//! - [`feasibility_check`] iterates the Riccati map to its fixed point and
//!   compares against `Delta0` directly;
//! - [`lmi_feasible`] assembles the block LMI in `(S, Y)` together with the
//!   Schur pair `[[S, I], [I, Delta0]] > 0` and searches for a certificate `S`.
//!
//! The minimization itself is done along a ray `Y = theta * B`, where
//! feasibility is monotone in `theta`, so plain bisection finds the boundary.

use std::fmt::Write as _;

use crate::analysis::{closed_loop_rate_bounds, gaussian_rate, open_loop_rate};
use crate::error::{Error, Result};
use crate::linalg::{
    self, ensure_dims, is_positive_definite, min_eigenvalue, require_spd, spd_inverse, spectral_norm,
    Mat,
};
use crate::model::{steady_state, SystemModel};
use crate::riccati::{self, RiccatiMap, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL};

pub const BISECTION_REL_TOL: f64 = 1e-8;
const THETA_MIN: f64 = 1e-12;
const THETA_MAX: f64 = 1e12;

/// Margin used for strict matrix inequalities `X < Delta0`.
pub fn strict_margin(delta0: &Mat) -> f64 {
    1e-9 * (1.0 + spectral_norm(delta0))
}

/// Constraint on the worst-case covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `X < Delta0`.
    Matrix(Mat),
    /// `tr(X) < c`.
    Trace(f64),
    /// `lambda_max(X) < c`, i.e. `X < c I`.
    MaxEigenvalue(f64),
}

impl Constraint {
    pub fn satisfied(&self, x: &Mat) -> bool {
        match self {
            Constraint::Matrix(d) => linalg::loewner_lt(x, d, strict_margin(d)),
            Constraint::Trace(c) => x.trace() < c - 1e-9 * (1.0 + c.abs()),
            Constraint::MaxEigenvalue(c) => {
                linalg::max_eigenvalue(x) < c - 1e-9 * (1.0 + c.abs())
            }
        }
    }

    /// Matrix-valued bound, when the constraint has one.
    pub fn bound_matrix(&self, n: usize) -> Option<Mat> {
        match self {
            Constraint::Matrix(d) => Some(d.clone()),
            Constraint::MaxEigenvalue(c) => Some(Mat::identity(n, n) * *c),
            Constraint::Trace(_) => None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Constraint::Matrix(d) => {
                ensure_dims("Delta0", d, n, n)?;
                require_spd("Delta0", d)
            }
            Constraint::Trace(c) | Constraint::MaxEigenvalue(c) if *c <= 0.0 || c.is_nan() => Err(
                Error::InvalidParameter(format!("constraint level {c} must be positive")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub model: SystemModel,
    pub constraint: Constraint,
    /// Search direction `B`; identity when absent.
    pub basis: Option<Mat>,
}

impl DesignProblem {
    pub fn new(model: SystemModel, delta0: Mat) -> Self {
        Self {
            model,
            constraint: Constraint::Matrix(delta0),
            basis: None,
        }
    }

    pub fn with_basis(mut self, basis: Mat) -> Self {
        self.basis = Some(basis);
        self
    }

    fn basis(&self) -> Result<Mat> {
        let m = self.model.m();
        match &self.basis {
            Some(b) => {
                ensure_dims("basis", b, m, m)?;
                require_spd("basis", b)?;
                Ok(b.clone())
            }
            None => Ok(Mat::identity(m, m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub theta: f64,
    /// Designed weight `theta * B`.
    pub weight: Mat,
    /// Relaxed objective `tr(Pi Y)` (closed loop: with the worst-case
    /// innovation covariance in place of `Pi`).
    pub objective: f64,
    /// Achieved rate (closed loop: its upper bound).
    pub rate: f64,
    pub gap_bound: f64,
    pub x_upper: Mat,
}

fn worst_case(model: &SystemModel, weight: &Mat) -> Result<Mat> {
    riccati::fixed_point(model, &(model.r() + spd_inverse(weight)?))
}

/// `true` iff the fixed point of `g_{R + Y^{-1}}` lies strictly below `Delta0`.
pub fn feasibility_check(model: &SystemModel, y: &Mat, delta0: &Mat) -> Result<bool> {
    model.require_stable()?;
    ensure_dims("Y", y, model.m(), model.m())?;
    require_spd("Y", y)?;
    Constraint::Matrix(delta0.clone()).validate(model.n())?;
    let x_upper = worst_case(model, y)?;
    Ok(linalg::loewner_lt(&x_upper, delta0, strict_margin(delta0)))
}

/// The two blocks of the LMI certificate for a given `(S, Y, Delta0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlocks {
    /// `(2n + m) x (2n + m)` block matrix.
    pub main: Mat,
    /// `[[S, I], [I, Delta0]]`.
    pub schur: Mat,
}

/// Assembles
///
/// ```text
/// [ Q^-1 - S   Q^-1 A                    0        ]
/// [ A'Q^-1     A'Q^-1 A + S + C'R^-1 C   C'R^-1   ]
/// [ 0          R^-1 C                    Y + R^-1 ]
/// ```
///
/// and the Schur pair. Taking Schur complements of the last two blocks turns
/// the first matrix into `Gamma_W(S) - S` with `W = R + Y^{-1}`, so with
/// `S = X^{-1}` the pair says `g_W(X) < X < Delta0`. Placing the `C` terms
/// in the first row instead would describe the filtered-covariance map
/// `((A X A' + Q)^{-1} + C'W^{-1}C)^{-1}`, whose fixed point is not the
/// prior bound being constrained.
pub fn lmi_blocks(model: &SystemModel, s: &Mat, y: &Mat, delta0: &Mat) -> Result<LmiBlocks> {
    let (n, m) = (model.n(), model.m());
    ensure_dims("S", s, n, n)?;
    ensure_dims("Y", y, m, m)?;
    ensure_dims("Delta0", delta0, n, n)?;
    let (a, c) = (model.a(), model.c());
    let qi = spd_inverse(model.q())?;
    let ri = spd_inverse(model.r())?;

    let mut main = Mat::zeros(2 * n + m, 2 * n + m);
    main.view_mut((0, 0), (n, n)).copy_from(&(&qi - s));
    let qa = &qi * a;
    main.view_mut((0, n), (n, n)).copy_from(&qa);
    main.view_mut((n, 0), (n, n)).copy_from(&qa.transpose());
    main.view_mut((n, n), (n, n))
        .copy_from(&(a.transpose() * &qi * a + s + c.transpose() * &ri * c));
    let ctri = c.transpose() * &ri;
    main.view_mut((n, 2 * n), (n, m)).copy_from(&ctri);
    main.view_mut((2 * n, n), (m, n)).copy_from(&ctri.transpose());
    main.view_mut((2 * n, 2 * n), (m, m)).copy_from(&(y + &ri));

    let mut schur = Mat::zeros(2 * n, 2 * n);
    schur.view_mut((0, 0), (n, n)).copy_from(s);
    schur.view_mut((0, n), (n, n)).fill_with_identity();
    schur.view_mut((n, 0), (n, n)).fill_with_identity();
    schur.view_mut((n, n), (n, n)).copy_from(delta0);

    Ok(LmiBlocks {
        main: linalg::symmetrize(&main),
        schur: linalg::symmetrize(&schur),
    })
}

/// Strict positive-definiteness from the Cholesky pivots: each squared pivot
/// must clear a small fraction of its own diagonal entry. This is invariant
/// under diagonal scaling, so the badly scaled Schur pair (`S` tiny, `Delta0`
/// huge) is judged as accurately as a well scaled one.
fn strictly_pd(m: &Mat) -> bool {
    let Some(chol) = linalg::symmetrize(m).cholesky() else {
        return false;
    };
    let l = chol.l();
    l.diagonal()
        .iter()
        .zip(m.diagonal().iter())
        .all(|(p, d)| p * p > 1e-12 * d)
}

/// Whether `S` certifies feasibility of `(Y, Delta0)`.
pub fn lmi_certifies(model: &SystemModel, s: &Mat, y: &Mat, delta0: &Mat) -> Result<bool> {
    let blocks = lmi_blocks(model, s, y, delta0)?;
    Ok(strictly_pd(&blocks.schur) && strictly_pd(&blocks.main))
}

/// LMI route to feasibility: searches for `S` with both blocks positive
/// definite. Candidates are `S = X^{-1}` for
///
/// - `X = Xbar + t (Delta0 - Xbar)` on a grid of `t` in (0, 1), and
/// - `X` the fixed point of the map with process noise `Q + eps I`, which
///   satisfies `g(X) = X - eps I < X` exactly.
///
/// Any admissible `X` strictly between `Xbar` and `Delta0` with `g(X) < X`
/// is a certificate, so a `false` here is always backed by the blocks
/// themselves failing.
pub fn lmi_feasible(model: &SystemModel, y: &Mat, delta0: &Mat) -> Result<bool> {
    model.require_stable()?;
    ensure_dims("Y", y, model.m(), model.m())?;
    require_spd("Y", y)?;
    Constraint::Matrix(delta0.clone()).validate(model.n())?;
    let n = model.n();
    let w = model.r() + spd_inverse(y)?;
    let x_upper = RiccatiMap::new(model, w.clone())?.fixed_point()?;

    let try_x = |x: &Mat| -> Result<bool> {
        if !is_positive_definite(x, 0.0) {
            return Ok(false);
        }
        lmi_certifies(model, &spd_inverse(x)?, y, delta0)
    };

    for t in [0.5, 0.25, 0.75, 0.1, 0.9, 0.01, 0.99] {
        if try_x(&(&x_upper + (delta0 - &x_upper) * t))? {
            return Ok(true);
        }
    }

    let slack = min_eigenvalue(&(delta0 - &x_upper));
    if slack > 0.0 {
        for scale in [0.5, 0.1, 1e-2, 1e-3, 1e-4] {
            let eps = slack * scale;
            let inflated = SystemModel::new(
                model.a().clone(),
                model.c().clone(),
                model.q() + Mat::identity(n, n) * eps,
                model.r().clone(),
                model.sigma0().clone(),
            )?;
            let x = RiccatiMap::new(&inflated, w.clone())?
                .fixed_point_with(FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)?;
            if try_x(&x)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// `kappa <= (1 + tr(Pi Y))^{-1/2} - det(I + Pi Y)^{-1/2}`.
pub fn optimality_gap_bound(pi: &Mat, y: &Mat) -> f64 {
    let tr = (pi * y).trace();
    let det = linalg::det(&(Mat::identity(pi.nrows(), pi.nrows()) + pi * y));
    (1.0 / (1.0 + tr).sqrt() - 1.0 / det.sqrt()).max(0.0)
}

/// Smallest `theta` on `[THETA_MIN, THETA_MAX]` with `feasible(theta)`,
/// assuming monotonicity.
fn bisect_theta(mut feasible: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let mut hi = 1.0;
    while !feasible(hi)? {
        hi *= 4.0;
        if hi > THETA_MAX {
            return Err(Error::Infeasible(format!(
                "constraint not met even with weight scale {THETA_MAX:e}"
            )));
        }
    }
    let mut lo = hi / 4.0;
    while feasible(lo)? {
        hi = lo;
        lo /= 4.0;
        if lo < THETA_MIN {
            return Ok(hi);
        }
    }
    while hi / lo - 1.0 > BISECTION_REL_TOL {
        let mid = (lo * hi).sqrt();
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn check_best_case(problem: &DesignProblem) -> Result<Mat> {
    problem.constraint.validate(problem.model.n())?;
    let x0 = riccati::fixed_point(&problem.model, problem.model.r())?;
    if !problem.constraint.satisfied(&x0) {
        return Err(Error::Infeasible(
            "bound does not exceed the always-transmit covariance".into(),
        ));
    }
    Ok(x0)
}

/// Open-loop design along `Y = theta B`.
pub fn design_search(problem: &DesignProblem) -> Result<DesignResult> {
    let model = &problem.model;
    let steady = steady_state(model)?;
    let basis = problem.basis()?;
    check_best_case(problem)?;
    let theta = bisect_theta(|t| {
        Ok(problem
            .constraint
            .satisfied(&worst_case(model, &(&basis * t))?))
    })?;
    let weight = &basis * theta;
    Ok(DesignResult {
        theta,
        objective: (&steady.pi * &weight).trace(),
        rate: open_loop_rate(&steady, &weight)?,
        gap_bound: optimality_gap_bound(&steady.pi, &weight),
        x_upper: worst_case(model, &weight)?,
        weight,
    })
}

/// Closed-loop design along `Z = theta B`; the rate is scored by its upper
/// bound. No stability requirement.
pub fn design_search_closed_loop(problem: &DesignProblem) -> Result<DesignResult> {
    let model = &problem.model;
    let basis = problem.basis()?;
    check_best_case(problem)?;
    let theta = bisect_theta(|t| {
        Ok(problem
            .constraint
            .satisfied(&worst_case(model, &(&basis * t))?))
    })?;
    let weight = &basis * theta;
    let cl = closed_loop_rate_bounds(model, &weight)?;
    let innovation = model.c() * &cl.x_upper * model.c().transpose() + model.r();
    Ok(DesignResult {
        theta,
        objective: (&innovation * &weight).trace(),
        rate: gaussian_rate(&innovation, &weight),
        gap_bound: optimality_gap_bound(&innovation, &weight),
        x_upper: cl.x_upper,
        weight,
    })
}

fn write_matrix(out: &mut String, name: &str, m: &Mat) {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    let _ = writeln!(out, "matrix {name} {} {} {nnz}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                let _ = writeln!(out, "{i} {j} {}", m[(i, j)]);
            }
        }
    }
}

/// Plain-text export of the design LMI for external SDP tooling.
///
/// Layout (one item per line, `#` starts a comment, indices 0-based):
///
/// ```text
/// dims <n> <m>
/// objective trace Pi Y
/// matrix Pi <m> <m> <nnz>            followed by <nnz> "row col value" lines
/// lmi MAIN <2n+m>
/// matrix MAIN_const <2n+m> <2n+m> <nnz>
/// term MAIN S <sign> <row> <col>     variable block added at offset
/// term MAIN Y <sign> <row> <col>
/// lmi SCHUR <2n>
/// matrix SCHUR_const <2n> <2n> <nnz>
/// term SCHUR S <sign> <row> <col>
/// positive Y
/// ```
///
/// Each LMI reads `const + sum(sign * var placed at offset) > 0`.
pub fn export_lmi(model: &SystemModel, delta0: &Mat) -> Result<String> {
    model.require_stable()?;
    Constraint::Matrix(delta0.clone()).validate(model.n())?;
    let (n, m) = (model.n(), model.m());
    let steady = steady_state(model)?;
    let zero_blocks = lmi_blocks(model, &Mat::zeros(n, n), &Mat::zeros(m, m), delta0)?;

    let mut out = String::new();
    let _ = writeln!(out, "# setkf design LMI v1");
    let _ = writeln!(out, "# variables: S ({n}x{n} symmetric), Y ({m}x{m} symmetric)");
    let _ = writeln!(out, "dims {n} {m}");
    let _ = writeln!(out, "objective trace Pi Y");
    write_matrix(&mut out, "Pi", &steady.pi);
    let _ = writeln!(out, "lmi MAIN {}", 2 * n + m);
    write_matrix(&mut out, "MAIN_const", &zero_blocks.main);
    let _ = writeln!(out, "term MAIN S -1 0 0");
    let _ = writeln!(out, "term MAIN S 1 {n} {n}");
    let _ = writeln!(out, "term MAIN Y 1 {} {}", 2 * n, 2 * n);
    let _ = writeln!(out, "lmi SCHUR {}", 2 * n);
    write_matrix(&mut out, "SCHUR_const", &zero_blocks.schur);
    let _ = writeln!(out, "term SCHUR S 1 0 0");
    let _ = writeln!(out, "positive Y");
    Ok(out)
}
