//! Log-barrier interior-point solver.
//!
//! With the substitution `y = ln x` a posynomial constraint `p(x) <= 1`
//! becomes the convex log-sum-exp constraint
//! `f(y) = ln sum_j exp(a_j . y + b_j) <= 0`, a monomial equality becomes an
//! affine equality, and a monomial objective becomes a linear objective.
//! The solver follows the central path of the barrier
//! `t * c.y - sum_i ln(-f_i(y))` with damped Newton steps, increasing `t`
//! geometrically until the gap bound `m/t` (m = number of inequalities,
//! an upper bound on the log-domain suboptimality, i.e. on the relative
//! suboptimality of the original objective) falls below tolerance.
//!
//! Equality constraints are eliminated up front by restricting `y` to the
//! affine solution set (`y = y0 + N q` with `N` an orthonormal null-space
//! basis), so the Newton system stays symmetric positive definite and can be
//! solved by dense Cholesky throughout.
//!
//! Feasibility (phase I) minimizes an auxiliary slack `s` subject to
//! `f_i(y) <= s`; a strictly negative optimum yields an interior starting
//! point, otherwise the problem is reported infeasible together with the
//! near-violated constraint set at the phase-I optimum.
//!
//! Everything is deterministic: no randomization, fixed iteration order,
//! fixed tie-breaking.

use crate::expr::Monomial;
use crate::problem::{GpProblem, Sense};
use crate::GpError;

/// Solver tolerances and budgets.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Duality-gap target: the barrier stops once `m/t` (relative objective
    /// accuracy in the original domain) is at or below this.
    pub tol_gap: f64,
    /// Constraint-violation threshold used when reporting infeasibility
    /// certificates (relative posynomial excess over 1).
    pub tol_feas: f64,
    /// Total Newton-step budget across phase I and phase II.
    pub max_newton_iters: usize,
    /// Geometric growth factor of the barrier parameter.
    pub barrier_mu: f64,
    /// Optional strictly feasible starting point in the original domain
    /// (one value per variable). Ignored if it fails a strict feasibility
    /// check; the solver then falls back to the bounds midpoint or phase I.
    pub initial_point: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_gap: 1e-6,
            tol_feas: 1e-7,
            max_newton_iters: 5000,
            barrier_mu: 30.0,
            initial_point: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Converged to the requested duality gap.
    Optimal,
    /// Phase I proved (within tolerance) that no interior point exists.
    Infeasible,
    /// Newton budget exhausted before reaching the requested gap; the
    /// reported point is the best iterate.
    MaxIter,
}

/// One entry of an infeasibility certificate: a constraint and its
/// (relative) violation at the phase-I optimum, `posynomial(x) - 1`.
#[derive(Clone, Debug)]
pub struct ConstraintViolation {
    pub name: String,
    pub violation: f64,
}

#[derive(Clone, Debug)]
pub struct GpSolution {
    pub status: Status,
    /// Variable values in the original (positive) domain, by [`crate::VarId`].
    pub values: Vec<f64>,
    /// Objective monomial evaluated at `values`.
    pub objective: f64,
    /// Final `m/t` bound on the relative suboptimality.
    pub duality_gap: f64,
    /// Infinity norm of the scaled KKT stationarity residual at the final
    /// point (with multipliers `lambda_i = 1/(t * -f_i)`).
    pub kkt_residual: f64,
    /// Newton steps spent (phase I + phase II).
    pub newton_iters: usize,
    /// Near-violated constraints at the phase-I optimum; nonempty only when
    /// `status == Infeasible`.
    pub infeasibility: Vec<ConstraintViolation>,
}

// ---------------------------------------------------------------------------
// Internal log-domain model
// ---------------------------------------------------------------------------

struct Term {
    a: Vec<(usize, f64)>,
    b: f64,
}

struct Lse {
    name: String,
    terms: Vec<Term>,
    support: Vec<usize>,
}

struct Model {
    d: usize,
    c: Vec<f64>,
    cons: Vec<Lse>,
}

/// Affine change of coordinates `y = y0 + N q` (identity when there are no
/// equality constraints).
struct Reduction {
    y0: Vec<f64>,
    /// Orthonormal null-space columns, each of length `n`; `None` = identity.
    basis: Option<Vec<Vec<f64>>>,
}

impl Reduction {
    fn identity(n: usize) -> Self {
        Self { y0: vec![0.0; n], basis: None }
    }

    fn dim(&self) -> usize {
        match &self.basis {
            None => self.y0.len(),
            Some(b) => b.len(),
        }
    }

    fn y_of(&self, q: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => q.to_vec(),
            Some(b) => {
                let mut y = self.y0.clone();
                for (col, &qj) in b.iter().zip(q) {
                    for (yi, &cij) in y.iter_mut().zip(col) {
                        *yi += cij * qj;
                    }
                }
                y
            }
        }
    }

    fn q_of(&self, y: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => y.to_vec(),
            Some(b) => b
                .iter()
                .map(|col| col.iter().zip(y).zip(&self.y0).map(|((c, yv), y0)| c * (yv - y0)).sum())
                .collect(),
        }
    }
}

struct LogForm {
    model: Model,
    red: Reduction,
    /// Equality rows in y-coordinates (`a . y + b = 0`) kept for residual
    /// checks on user-provided starting points.
    eq_rows: Vec<(Vec<f64>, f64)>,
}

fn sparse_from_monomial(m: &Monomial) -> (Vec<(usize, f64)>, f64) {
    (m.exponents().to_vec(), m.coeff().ln())
}

fn build_logform(p: &GpProblem) -> Result<LogForm, GpError> {
    let n = p.n_vars();
    // y-space inequality list: declared constraints, then bounds
    let mut raw: Vec<(String, Vec<(Vec<(usize, f64)>, f64)>)> = Vec::new();
    for (name, posy) in &p.ineqs {
        raw.push((name.clone(), posy.terms().iter().map(sparse_from_monomial).collect()));
    }
    for (i, v) in p.vars.iter().enumerate() {
        raw.push((format!("{} upper bound", v.name), vec![(vec![(i, 1.0)], -v.upper.ln())]));
        raw.push((format!("{} lower bound", v.name), vec![(vec![(i, -1.0)], v.lower.ln())]));
    }

    // equality rows
    let mut eq_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (_, m) in &p.eqs {
        let mut row = vec![0.0; n];
        for &(id, e) in m.exponents() {
            row[id] += e;
        }
        eq_rows.push((row, m.coeff().ln()));
    }

    let red = build_reduction(n, &eq_rows)?;

    // objective: minimize c . y
    let sign = match p.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    let mut c_y = vec![0.0; n];
    for &(id, e) in p.objective.exponents() {
        c_y[id] += sign * e;
    }

    let (c, cons) = match &red.basis {
        None => {
            let cons = raw
                .into_iter()
                .map(|(name, terms)| {
                    let terms: Vec<Term> =
                        terms.into_iter().map(|(a, b)| Term { a, b }).collect();
                    let support = support_of(&terms);
                    Lse { name, terms, support }
                })
                .collect();
            (c_y, cons)
        }
        Some(basis) => {
            let dim = basis.len();
            let project = |a: &[(usize, f64)]| -> (Vec<(usize, f64)>, f64) {
                let mut aq = vec![0.0; dim];
                let mut shift = 0.0;
                for &(id, e) in a {
                    shift += e * red.y0[id];
                    for (j, col) in basis.iter().enumerate() {
                        aq[j] += e * col[id];
                    }
                }
                let sp: Vec<(usize, f64)> = aq
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| v.abs() > 1e-14)
                    .collect();
                (sp, shift)
            };
            let cons = raw
                .into_iter()
                .map(|(name, terms)| {
                    let terms: Vec<Term> = terms
                        .into_iter()
                        .map(|(a, b)| {
                            let (aq, shift) = project(&a);
                            Term { a: aq, b: b + shift }
                        })
                        .collect();
                    let support = support_of(&terms);
                    Lse { name, terms, support }
                })
                .collect();
            let cq: Vec<f64> = basis
                .iter()
                .map(|col| col.iter().zip(&c_y).map(|(ci, yi)| ci * yi).sum())
                .collect();
            (cq, cons)
        }
    };

    let d = red.dim();
    Ok(LogForm { model: Model { d, c, cons }, red, eq_rows })
}

fn support_of(terms: &[Term]) -> Vec<usize> {
    let mut s: Vec<usize> = terms.iter().flat_map(|t| t.a.iter().map(|&(id, _)| id)).collect();
    s.sort_unstable();
    s.dedup();
    s
}

fn build_reduction(n: usize, eq_rows: &[(Vec<f64>, f64)]) -> Result<Reduction, GpError> {
    if eq_rows.is_empty() {
        return Ok(Reduction::identity(n));
    }
    let p = eq_rows.len();
    if p >= n {
        return Err(GpError::Invalid(format!(
            "{p} equality constraints with only {n} variables leave no degrees of freedom"
        )));
    }
    // particular solution y0 = E^T (E E^T)^{-1} (-b)
    let mut gram = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            gram[i * p + j] = dot(&eq_rows[i].0, &eq_rows[j].0);
        }
    }
    let mut rhs: Vec<f64> = eq_rows.iter().map(|(_, b)| -b).collect();
    if !cholesky_solve_in_place(&mut gram, p, &mut rhs) {
        return Err(GpError::Invalid(
            "monomial equality constraints are linearly dependent".into(),
        ));
    }
    let mut y0 = vec![0.0; n];
    for (i, (row, _)) in eq_rows.iter().enumerate() {
        for (y, r) in y0.iter_mut().zip(row) {
            *y += rhs[i] * r;
        }
    }
    // orthonormalize the equality rows, then complete with standard basis
    // vectors to an orthonormal null-space basis
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for (row, _) in eq_rows {
        let mut v = row.clone();
        for u in &ortho {
            let t = dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= t * ui;
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm < 1e-12 {
            return Err(GpError::Invalid(
                "monomial equality constraints are linearly dependent".into(),
            ));
        }
        for vi in v.iter_mut() {
            *vi /= nrm;
        }
        ortho.push(v);
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - p);
    for k in 0..n {
        if basis.len() == n - p {
            break;
        }
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for u in ortho.iter().chain(basis.iter()) {
            let t = dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= t * ui;
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm > 1e-8 {
            for vi in v.iter_mut() {
                *vi /= nrm;
            }
            basis.push(v);
        }
    }
    if basis.len() != n - p {
        return Err(GpError::Numeric("failed to build an equality null-space basis".into()));
    }
    Ok(Reduction { y0, basis: Some(basis) })
}

// ---------------------------------------------------------------------------
// Dense linear algebra
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place Cholesky factorization + solve. Returns false if the matrix is
/// not numerically positive definite.
fn cholesky_solve_in_place(a: &mut [f64], d: usize, rhs: &mut [f64]) -> bool {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag.is_finite() && diag > 0.0) {
            return false;
        }
        let l = diag.sqrt();
        a[j * d + j] = l;
        for i in (j + 1)..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / l;
        }
    }
    // forward substitution L z = rhs
    for i in 0..d {
        let mut v = rhs[i];
        for k in 0..i {
            v -= a[i * d + k] * rhs[k];
        }
        rhs[i] = v / a[i * d + i];
    }
    // backward substitution L^T x = z
    for i in (0..d).rev() {
        let mut v = rhs[i];
        for k in (i + 1)..d {
            v -= a[k * d + i] * rhs[k];
        }
        rhs[i] = v / a[i * d + i];
    }
    true
}

// ---------------------------------------------------------------------------
// Barrier machinery
// ---------------------------------------------------------------------------

struct Workspace {
    g: Vec<f64>,
    h: Vec<f64>,
    hfac: Vec<f64>,
    gc: Vec<f64>,
    z: Vec<f64>,
    qt: Vec<f64>,
    dq: Vec<f64>,
    phi_t: f64,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            g: vec![0.0; d],
            h: vec![0.0; d * d],
            hfac: vec![0.0; d * d],
            gc: vec![0.0; d],
            z: Vec::new(),
            qt: vec![0.0; d],
            dq: vec![0.0; d],
            phi_t: 0.0,
        }
    }
}

fn eval_f(con: &Lse, q: &[f64], z: &mut Vec<f64>) -> f64 {
    z.clear();
    let mut zmax = f64::NEG_INFINITY;
    for t in &con.terms {
        let mut v = t.b;
        for &(id, a) in &t.a {
            v += a * q[id];
        }
        if v > zmax {
            zmax = v;
        }
        z.push(v);
    }
    let se: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
    zmax + se.ln()
}

/// Barrier value `t*c.q + phi(q)`; `None` when `q` is not certainly strictly
/// feasible. A constraint value is the sum of a log-sum-exp shift and a
/// logarithm, so it carries an absolute rounding error proportional to the
/// shift's magnitude; slacks below that noise cannot be certified positive,
/// and stepping onto them would freeze the line search on noise, so such
/// points count as outside the domain.
fn eval_phi_t(model: &Model, q: &[f64], t: f64, z: &mut Vec<f64>) -> Option<f64> {
    let mut phi = t * dot(&model.c, q);
    for con in &model.cons {
        let f = eval_f(con, q, z);
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let noise = 4e-15 * (1.0 + zmax.abs());
        if f >= -noise || !f.is_finite() {
            return None;
        }
        phi -= (-f).ln();
    }
    Some(phi)
}

fn strictly_feasible(model: &Model, q: &[f64], margin: f64) -> bool {
    let mut z = Vec::new();
    model.cons.iter().all(|c| {
        let f = eval_f(c, q, &mut z);
        f.is_finite() && f <= -margin
    })
}

/// Gradient and Hessian of the barrier at `q`. Returns false if `q` left the
/// domain (should not happen along accepted steps).
fn assemble(model: &Model, q: &[f64], t: f64, ws: &mut Workspace) -> bool {
    let d = model.d;
    ws.h.iter_mut().for_each(|v| *v = 0.0);
    for (gi, ci) in ws.g.iter_mut().zip(&model.c) {
        *gi = t * ci;
    }
    let mut phi = t * dot(&model.c, q);
    for con in &model.cons {
        let f = eval_f(con, q, &mut ws.z);
        if f >= 0.0 || !f.is_finite() {
            return false;
        }
        phi -= (-f).ln();
        let r = -1.0 / f;
        let zmax = ws.z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let se: f64 = ws.z.iter().map(|v| (v - zmax).exp()).sum();
        for &k in &con.support {
            ws.gc[k] = 0.0;
        }
        for (j, term) in con.terms.iter().enumerate() {
            let w = (ws.z[j] - zmax).exp() / se;
            for &(k, a) in &term.a {
                ws.gc[k] += w * a;
            }
            // r * sum_j w_j a_j a_j^T (upper triangle)
            let cw = r * w;
            for (i1, &(k1, a1)) in term.a.iter().enumerate() {
                for &(k2, a2) in term.a[i1..].iter() {
                    ws.h[k1 * d + k2] += cw * a1 * a2;
                }
            }
        }
        // (r^2 - r) * gc gc^T over the support (upper triangle)
        let c2 = r * r - r;
        for (i1, &k1) in con.support.iter().enumerate() {
            let g1 = ws.gc[k1];
            if g1 == 0.0 {
                continue;
            }
            for &k2 in con.support[i1..].iter() {
                ws.h[k1 * d + k2] += c2 * g1 * ws.gc[k2];
            }
        }
        for &k in &con.support {
            ws.g[k] += r * ws.gc[k];
        }
    }
    // mirror the upper triangle
    for i in 0..d {
        for j in (i + 1)..d {
            ws.h[j * d + i] = ws.h[i * d + j];
        }
    }
    ws.phi_t = phi;
    true
}

fn solve_newton_system(ws: &mut Workspace, d: usize) -> bool {
    let ridge_scales = [0.0, 1e-12, 1e-9, 1e-6, 1e-3];
    let max_diag = (0..d).map(|i| ws.h[i * d + i]).fold(0.0f64, f64::max).max(1e-300);
    for &rs in &ridge_scales {
        ws.hfac.copy_from_slice(&ws.h);
        if rs > 0.0 {
            for i in 0..d {
                ws.hfac[i * d + i] += rs * max_diag;
            }
        }
        for (dqi, gi) in ws.dq.iter_mut().zip(&ws.g) {
            *dqi = -gi;
        }
        if cholesky_solve_in_place(&mut ws.hfac, d, &mut ws.dq)
            && ws.dq.iter().all(|v| v.is_finite())
        {
            if rs > 0.0 && std::env::var_os("GP_TRACE_NEWTON").is_some() {
                eprintln!("GP_TRACE_NEWTON ridge={rs:.0e}");
            }
            return true;
        }
    }
    false
}

#[derive(Debug)]
enum NewtonOutcome {
    Converged,
    Budget,
    Stalled,
}

fn newton(
    model: &Model,
    q: &mut Vec<f64>,
    t: f64,
    opts: &SolverOptions,
    iters: &mut usize,
    ws: &mut Workspace,
    early_stop: Option<&dyn Fn(&[f64]) -> bool>,
) -> NewtonOutcome {
    let d = model.d;
    let mut qsave = vec![0.0; d];
    let mut tiny_steps = 0usize;
    loop {
        if *iters >= opts.max_newton_iters {
            return NewtonOutcome::Budget;
        }
        *iters += 1;
        if !assemble(model, q, t, ws) {
            return NewtonOutcome::Stalled;
        }
        if !solve_newton_system(ws, d) {
            return NewtonOutcome::Stalled;
        }
        let g_dq = dot(&ws.g, &ws.dq);
        let lambda2 = -g_dq;
        if !lambda2.is_finite() {
            return NewtonOutcome::Stalled;
        }
        if 0.5 * lambda2 <= 1e-9 {
            return NewtonOutcome::Converged;
        }
        let phi0 = ws.phi_t;
        let mut z = std::mem::take(&mut ws.z);

        // Largest step in (0, 1] that keeps the iterate inside the barrier
        // domain. The domain is convex, so every shorter step along the same
        // direction stays inside as well.
        let mut s_max = 1.0f64;
        let mut in_domain = false;
        while s_max >= 1e-14 {
            for ((qt, qi), dqi) in ws.qt.iter_mut().zip(q.iter()).zip(&ws.dq) {
                *qt = qi + s_max * dqi;
            }
            if eval_phi_t(model, &ws.qt, t, &mut z).is_some() {
                in_domain = true;
                break;
            }
            s_max *= 0.5;
        }
        if !in_domain {
            ws.z = z;
            // No admissible step at all: with a small decrement we are
            // centered to within numerical precision; otherwise the
            // direction is unusable.
            return if lambda2 <= 0.09 {
                NewtonOutcome::Converged
            } else {
                NewtonOutcome::Stalled
            };
        }

        if lambda2 <= 0.09 {
            ws.z = z;
            // Quadratic region of the self-concordant barrier: the damped
            // step 1/(1+λ) is admissible and contracts the squared decrement
            // by a factor ≤ (λ/(1−λ))² < 0.19, while an Armijo test on phi
            // would drown in rounding noise (phi's magnitude scales with t,
            // the predicted decrease does not). Accept the step iff the
            // recomputed decrement actually contracts; otherwise the
            // decrement has hit its rounding floor and the point is as
            // centered as f64 allows.
            let s_damped = s_max.min(1.0 / (1.0 + lambda2.sqrt()));
            qsave.copy_from_slice(q);
            for ((qi, qs), dqi) in q.iter_mut().zip(&qsave).zip(&ws.dq) {
                *qi = qs + s_damped * dqi;
            }
            if !assemble(model, q, t, ws) || !solve_newton_system(ws, d) {
                q.copy_from_slice(&qsave);
                return NewtonOutcome::Converged;
            }
            let lambda2_cand = -dot(&ws.g, &ws.dq);
            if !(lambda2_cand.is_finite() && lambda2_cand < 0.5 * lambda2) {
                q.copy_from_slice(&qsave);
                return NewtonOutcome::Converged;
            }
        } else {
            // Armijo backtracking from the largest admissible step; the
            // predicted decrease is far above phi's rounding noise here.
            let mut accepted = false;
            let mut step = s_max;
            while step >= 1e-14 {
                for ((qt, qi), dqi) in ws.qt.iter_mut().zip(q.iter()).zip(&ws.dq) {
                    *qt = qi + step * dqi;
                }
                if let Some(phi) = eval_phi_t(model, &ws.qt, t, &mut z) {
                    if phi <= phi0 + 0.25 * step * g_dq {
                        q.copy_from_slice(&ws.qt);
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            ws.z = z;
            if std::env::var_os("GP_TRACE_NEWTON").is_some() {
                // residual of H dq = -g using the unfactored copy in ws.h
                let mut rmax = 0.0f64;
                let mut gmax = 0.0f64;
                for i in 0..d {
                    let mut hi = 0.0;
                    for j in 0..d {
                        hi += ws.h[i * d + j] * ws.dq[j];
                    }
                    rmax = rmax.max((hi + ws.g[i]).abs());
                    gmax = gmax.max(ws.g[i].abs());
                }
                let hmax = (0..d).map(|i| ws.h[i * d + i]).fold(0.0f64, f64::max);
                let dqmax = ws.dq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                eprintln!(
                    "GP_TRACE_NEWTON it={iters:?} lambda2={lambda2:.3e} s_max={s_max:.3e} step={step:.3e} accepted={accepted} resid={:.3e} gmax={gmax:.3e} hmax={hmax:.3e} dqmax={dqmax:.3e}",
                    rmax
                );
            }
            if !accepted {
                return NewtonOutcome::Stalled;
            }
            // A run of microscopic accepted steps means the backtracking is
            // feeding on rounding noise near a constraint boundary; no real
            // progress is possible there.
            if step < 1e-9 {
                tiny_steps += 1;
                if tiny_steps >= 5 {
                    return NewtonOutcome::Stalled;
                }
            } else {
                tiny_steps = 0;
            }
        }
        if let Some(stop) = early_stop {
            if stop(q) {
                return NewtonOutcome::Converged;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Phase I
// ---------------------------------------------------------------------------

enum Phase1 {
    Feasible(Vec<f64>),
    Infeasible(Vec<f64>),
}

/// Minimize slack `s` subject to `f_i(q) <= s`. Returns an interior point of
/// the original constraint set, or the final (least-infeasible) `y`-point.
fn phase1(lf: &LogForm, opts: &SolverOptions, iters: &mut usize, q_start: &[f64]) -> Phase1 {
    let d = lf.model.d;
    let ds = d + 1;
    let mut cons: Vec<Lse> = lf
        .model
        .cons
        .iter()
        .map(|con| {
            let terms: Vec<Term> = con
                .terms
                .iter()
                .map(|t| {
                    let mut a = t.a.clone();
                    a.push((d, -1.0));
                    Term { a, b: t.b }
                })
                .collect();
            let mut support = con.support.clone();
            support.push(d);
            Lse { name: con.name.clone(), terms, support }
        })
        .collect();

    let mut z = Vec::new();
    let s0 = lf
        .model
        .cons
        .iter()
        .map(|c| eval_f(c, q_start, &mut z))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    cons.push(Lse {
        name: "phase1 slack upper".into(),
        terms: vec![Term { a: vec![(d, 1.0)], b: -(s0 + 1.0) }],
        support: vec![d],
    });
    cons.push(Lse {
        name: "phase1 slack lower".into(),
        terms: vec![Term { a: vec![(d, -1.0)], b: -40.0 }],
        support: vec![d],
    });
    let mut c = vec![0.0; ds];
    c[d] = 1.0;
    let model = Model { d: ds, c, cons };

    let mut q: Vec<f64> = q_start.to_vec();
    q.push(s0);
    let mut ws = Workspace::new(ds);
    let m = model.cons.len() as f64;
    let mut t = 1.0;
    let stop = |qq: &[f64]| qq[d] <= -1e-2;
    loop {
        let out = newton(&model, &mut q, t, opts, iters, &mut ws, Some(&stop));
        if stop(&q) {
            q.truncate(d);
            return Phase1::Feasible(q);
        }
        match out {
            NewtonOutcome::Budget => break,
            NewtonOutcome::Converged | NewtonOutcome::Stalled => {}
        }
        if m / t <= 1e-9 {
            break;
        }
        t *= opts.barrier_mu;
    }
    if q[d] <= -1e-8 {
        q.truncate(d);
        Phase1::Feasible(q)
    } else {
        q.truncate(d);
        Phase1::Infeasible(q)
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Solve a validated geometric program.
pub fn solve(p: &GpProblem, opts: &SolverOptions) -> Result<GpSolution, GpError> {
    p.validate()?;
    if let Some(max_id) = p.max_referenced_var() {
        debug_assert!(max_id < p.n_vars());
    }
    let lf = build_logform(p)?;
    let d = lf.model.d;
    let m = lf.model.cons.len() as f64;
    let mut iters = 0usize;

    // starting point: user-provided, else bounds midpoint, else phase I
    let mut q: Option<Vec<f64>> = None;
    if let Some(x0) = &opts.initial_point {
        if x0.len() == p.n_vars() && x0.iter().all(|v| v.is_finite() && *v > 0.0) {
            let y: Vec<f64> = x0.iter().map(|v| v.ln()).collect();
            let eq_resid = lf
                .eq_rows
                .iter()
                .map(|(row, b)| (dot(row, &y) + b).abs())
                .fold(0.0f64, f64::max);
            if eq_resid < 1e-6 {
                let cand = lf.red.q_of(&y);
                // The margin only has to clear evaluation rounding: callers
                // may hand in points sitting inside very thin feasible slices
                // (slack well below 1e-9), and those are still perfectly good
                // interior starting points for the barrier.
                if strictly_feasible(&lf.model, &cand, 1e-11) {
                    q = Some(cand);
                }
            }
        }
    }
    if q.is_none() {
        let ymid: Vec<f64> =
            p.vars.iter().map(|v| 0.5 * (v.lower.ln() + v.upper.ln())).collect();
        let cand = lf.red.q_of(&ymid);
        if strictly_feasible(&lf.model, &cand, 1e-6) {
            q = Some(cand);
        } else {
            match phase1(&lf, opts, &mut iters, &cand) {
                Phase1::Feasible(qf) => q = Some(qf),
                Phase1::Infeasible(qf) => {
                    let y = lf.red.y_of(&qf);
                    let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
                    let mut viols: Vec<ConstraintViolation> = p
                        .ineqs
                        .iter()
                        .map(|(name, posy)| ConstraintViolation {
                            name: name.clone(),
                            violation: posy.eval(&x) - 1.0,
                        })
                        .filter(|v| v.violation > -1e-6)
                        .collect();
                    for (i, v) in p.vars.iter().enumerate() {
                        if x[i] > v.upper * (1.0 + 1e-9) {
                            viols.push(ConstraintViolation {
                                name: format!("{} upper bound", v.name),
                                violation: x[i] / v.upper - 1.0,
                            });
                        }
                        if x[i] < v.lower * (1.0 - 1e-9) {
                            viols.push(ConstraintViolation {
                                name: format!("{} lower bound", v.name),
                                violation: v.lower / x[i] - 1.0,
                            });
                        }
                    }
                    viols.sort_by(|a, b| b.violation.total_cmp(&a.violation));
                    let objective = p.objective.eval(&x);
                    return Ok(GpSolution {
                        status: Status::Infeasible,
                        values: x,
                        objective,
                        duality_gap: f64::INFINITY,
                        kkt_residual: f64::INFINITY,
                        newton_iters: iters,
                        infeasibility: viols,
                    });
                }
            }
        }
    }
    let mut q = q.expect("starting point exists");

    // phase II: follow the central path
    let mut ws = Workspace::new(d);
    let mut t = 1.0;
    let mut status = Status::Optimal;
    let trace = std::env::var_os("GP_TRACE").is_some();
    loop {
        let before = iters;
        let out = newton(&lf.model, &mut q, t, opts, &mut iters, &mut ws, None);
        if trace {
            eprintln!("GP_TRACE stage t={t:.3e} iters={} outcome={out:?}", iters - before);
        }
        match out {
            NewtonOutcome::Budget => {
                status = Status::MaxIter;
                break;
            }
            NewtonOutcome::Converged | NewtonOutcome::Stalled => {}
        }
        if m / t <= opts.tol_gap {
            break;
        }
        t *= opts.barrier_mu;
    }

    let y = lf.red.y_of(&q);
    let x: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let objective = p.objective.eval(&x);
    // with lambda_i = 1/(t * -f_i), the stationarity residual is exactly the
    // barrier gradient divided by t
    let kkt_residual = if assemble(&lf.model, &q, t, &mut ws) {
        ws.g.iter().map(|v| v.abs()).fold(0.0f64, f64::max) / t
    } else {
        f64::INFINITY
    };
    Ok(GpSolution {
        status,
        values: x,
        objective,
        duality_gap: m / t,
        kkt_residual,
        newton_iters: iters,
        infeasibility: Vec::new(),
    })
}

impl GpProblem {
    /// Convenience wrapper around [`solve`].
    pub fn solve(&self, opts: &SolverOptions) -> Result<GpSolution, GpError> {
        solve(self, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Monomial, Posynomial};

    #[test]
    fn cholesky_solves_small_system() {
        // A = [[4,2],[2,3]], b = [8, 7]  ->  x = [1, 5/3 ... ] solve exactly:
        // x = A^{-1} b = 1/8 * [[3,-2],[-2,4]] . [8,7] = [(24-14)/8, (-16+28)/8]
        //   = [1.25, 1.5]
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![8.0, 7.0];
        assert!(cholesky_solve_in_place(&mut a, 2, &mut b));
        assert!((b[0] - 1.25).abs() < 1e-12);
        assert!((b[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        let mut b = vec![1.0, 1.0];
        assert!(!cholesky_solve_in_place(&mut a, 2, &mut b));
    }

    #[test]
    fn reduction_spans_equality_set() {
        // single equality x*y = 1 -> y0 + span{(1,-1)/sqrt(2)}
        let rows = vec![(vec![1.0, 1.0], 0.0)];
        let red = build_reduction(2, &rows).unwrap();
        let y = red.y_of(&[0.7]);
        assert!((y[0] + y[1]).abs() < 1e-12);
        let q = red.q_of(&y);
        assert!((q[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn lse_eval_is_log_of_posynomial() {
        let mut p = GpProblem::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.set_objective(Sense::Maximize, Monomial::var(x));
        let posy = Posynomial::new()
            .add(Monomial::new(0.3).with(x, 1.0))
            .add(Monomial::new(0.4).with(y, -2.0));
        p.add_ineq("c", posy.clone());
        let lf = build_logform(&p).unwrap();
        let q: Vec<f64> = vec![0.25, -0.5];
        let xs: Vec<f64> = q.iter().map(|v| v.exp()).collect();
        let mut z = Vec::new();
        let f = eval_f(&lf.model.cons[0], &q, &mut z);
        assert!((f - posy.eval(&xs).ln()).abs() < 1e-12);
    }
}
