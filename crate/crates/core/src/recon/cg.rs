//! Fixed-iteration conjugate gradients with exact forward- and reverse-mode
//! derivatives with respect to the right-hand side.
//!
//! The system matrix is Hermitian, so complex CG coincides with real CG on
//! the stacked re/im vector; all inner products below are real parts.

use crate::numerics::{real_inner, ComplexArray};
use crate::Result;

/// Primal iterates kept for differentiation.
#[derive(Clone, Debug)]
pub(crate) struct CgTape {
    r: Vec<ComplexArray>,
    p: Vec<ComplexArray>,
    q: Vec<ComplexArray>,
    rho: Vec<f64>,
    gamma: Vec<f64>,
}

impl CgTape {
    fn steps(&self) -> usize {
        self.q.len()
    }

    fn alpha(&self, k: usize) -> f64 {
        self.rho[k] / self.gamma[k]
    }

    fn beta(&self, k: usize) -> f64 {
        self.rho[k + 1] / self.rho[k]
    }
}

fn rinner(a: &ComplexArray, b: &ComplexArray) -> f64 {
    real_inner(a, b).expect("equal shapes")
}

fn axpy(y: &mut ComplexArray, a: f64, x: &ComplexArray) {
    for (yi, xi) in y.data_mut().iter_mut().zip(x.data()) {
        *yi += a * xi;
    }
}

/// Runs `iters` CG steps on `M x = c` from `x = 0`. Stops early, and records
/// fewer steps, if the residual vanishes exactly.
pub(crate) fn solve(
    m: &impl Fn(&ComplexArray) -> Result<ComplexArray>,
    c: &ComplexArray,
    iters: usize,
) -> Result<(ComplexArray, CgTape)> {
    let mut x = ComplexArray::zeros(c.shape());
    let mut r = c.clone();
    let mut p = c.clone();
    let mut rho = rinner(&r, &r);
    let mut tape = CgTape {
        r: vec![r.clone()],
        p: vec![p.clone()],
        q: Vec::new(),
        rho: vec![rho],
        gamma: Vec::new(),
    };
    for _ in 0..iters {
        if rho == 0.0 {
            break;
        }
        let q = m(&p)?;
        let gamma = rinner(&p, &q);
        let alpha = rho / gamma;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        let rho_next = rinner(&r, &r);
        let beta = rho_next / rho;
        let mut p_next = r.clone();
        axpy(&mut p_next, beta, &p);
        p = p_next;
        rho = rho_next;
        tape.q.push(q);
        tape.gamma.push(gamma);
        tape.r.push(r.clone());
        tape.p.push(p.clone());
        tape.rho.push(rho);
    }
    Ok((x, tape))
}

/// Directional derivative of the CG output along right-hand-side tangent `dc`.
pub(crate) fn tangent(
    m: &impl Fn(&ComplexArray) -> Result<ComplexArray>,
    tape: &CgTape,
    dc: &ComplexArray,
) -> Result<ComplexArray> {
    let mut dx = ComplexArray::zeros(dc.shape());
    let mut dr = dc.clone();
    let mut dp = dc.clone();
    let mut drho = 2.0 * rinner(&tape.r[0], &dr);
    for k in 0..tape.steps() {
        let (p, q) = (&tape.p[k], &tape.q[k]);
        let (rho, gamma, alpha) = (tape.rho[k], tape.gamma[k], tape.alpha(k));
        let dq = m(&dp)?;
        let dgamma = 2.0 * rinner(&dp, q);
        let dalpha = (drho * gamma - rho * dgamma) / (gamma * gamma);
        axpy(&mut dx, dalpha, p);
        axpy(&mut dx, alpha, &dp);
        axpy(&mut dr, -dalpha, q);
        axpy(&mut dr, -alpha, &dq);
        let drho_next = 2.0 * rinner(&tape.r[k + 1], &dr);
        let dbeta = (drho_next * rho - tape.rho[k + 1] * drho) / (rho * rho);
        let mut dp_next = dr.clone();
        axpy(&mut dp_next, dbeta, p);
        axpy(&mut dp_next, tape.beta(k), &dp);
        dp = dp_next;
        drho = drho_next;
    }
    Ok(dx)
}

/// Real adjoint of [`tangent`]: maps an output cotangent to the right-hand side.
pub(crate) fn cotangent(
    m: &impl Fn(&ComplexArray) -> Result<ComplexArray>,
    tape: &CgTape,
    xbar: &ComplexArray,
) -> Result<ComplexArray> {
    let shape = xbar.shape();
    let mut rbar = ComplexArray::zeros(shape);
    let mut pbar = ComplexArray::zeros(shape);
    let mut rhobar = 0.0;
    for k in (0..tape.steps()).rev() {
        let (p, q, r_next) = (&tape.p[k], &tape.q[k], &tape.r[k + 1]);
        let (rho, gamma, alpha, beta) = (tape.rho[k], tape.gamma[k], tape.alpha(k), tape.beta(k));
        // p_{k+1} = r_{k+1} + β p_k
        axpy(&mut rbar, 1.0, &pbar);
        let betabar = rinner(&pbar, p);
        pbar.scale(beta.into());
        // β = ρ_{k+1} / ρ_k
        rhobar += betabar / rho;
        let mut rho_k_bar = -betabar * tape.rho[k + 1] / (rho * rho);
        // ρ_{k+1} = ⟨r_{k+1}, r_{k+1}⟩
        axpy(&mut rbar, 2.0 * rhobar, r_next);
        // r_{k+1} = r_k − α q_k ; x_{k+1} = x_k + α p_k
        let mut qbar = rbar.scaled((-alpha).into());
        let alphabar = -rinner(&rbar, q) + rinner(xbar, p);
        axpy(&mut pbar, alpha, xbar);
        // α = ρ_k / γ_k ; γ_k = ⟨p_k, q_k⟩
        rho_k_bar += alphabar / gamma;
        let gammabar = -alphabar * rho / (gamma * gamma);
        axpy(&mut pbar, gammabar, q);
        axpy(&mut qbar, gammabar, p);
        // q_k = M p_k with M symmetric
        axpy(&mut pbar, 1.0, &m(&qbar)?);
        rhobar = rho_k_bar;
    }
    axpy(&mut rbar, 2.0 * rhobar, &tape.r[0]);
    axpy(&mut rbar, 1.0, &pbar);
    Ok(rbar)
}
