//! Singular-value transformation machinery: an odd polynomial approximating
//! `1/x`, phase factors realizing it, the projector-controlled sequence over
//! a block encoding, and the end-to-end frequency-domain linear solve.
//!
//! Angles live in the Chebyshev convention: for `phi_0..phi_d` the sequence
//! value is the upper-left entry of
//!
//! ```text
//!   e^{i phi_0 Z} * prod_{k=1..d} [ W(x) e^{i phi_k Z} ]
//! ```
//!
//! with `W(x) = [[x, i r],[i r, x]]`, `r = sqrt(1-x^2)`, so zero angles give
//! `T_d(x)` and the `(pi/4, 0, .., 0, pi/4)` start of the Newton iteration
//! sits at an invertible Jacobian. A block encoding acts per singular value
//! as the reflection `R(x) = [[x, r],[r, -x]] = -i e^{i pi/4 Z} W e^{i pi/4 Z}`
//! instead, so the emitted circuit shifts the interior angles by `-pi/2`, the
//! two end angles by `-pi/4`, and restores the leftover constant `i^d` through
//! one phase on a qubit of known value. Each `e^{i phi Z}` factor is a phase
//! on a sign qubit toggled by "block registers all zero".

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::blockenc::{full_be_parts, BlockEncoding};
use crate::circuit::{control_all, invert_all, state_prep, Circuit, Control, Gate, Interp, RegKind};
use crate::linalg::{inner, norm, normalize, ComplexMatrix};
use crate::problem::{assemble_rhs, solve_classical, GridSpec, OperatorParts, PlasmaParams};
use crate::scalar::Scalar;
use crate::sim::{project_component, StateVector};
use crate::{Error, Result};

/// Scalar residual demanded of the phase iteration.
pub const PHASE_TOL: f64 = 1e-12;

/// Default cap on the inversion polynomial degree.
pub const DEFAULT_MAX_DEGREE: usize = 20001;

/// Largest reduced-angle count handled by the dense Newton iteration; above
/// it the structured fixed-point iteration takes over.
const NEWTON_MAX_FREE: usize = 640;

/// Iteration cap for the fixed-point phase search.
const FPI_MAX_ITERS: usize = 400;

/// Coefficient mass the solve shrinks the inversion polynomial to before
/// phase finding; the post-selected state is invariant under the shrink.
const L1_BUDGET: f64 = 0.75;

/// Fidelity threshold below which the solve attaches a diagnostic.
const FIDELITY_FLOOR: f64 = 0.99;

/// Headroom kept below 1 when clamping the polynomial sup norm.
const SUP_CAP: f64 = 0.99;

/// Inversion accuracy and degree budget for the quantum solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig<T> {
    /// Upper bound on `s / sigma_min` of the encoded operator.
    pub kappa: T,
    /// Uniform error of the polynomial against `1/(2 kappa x)` on the window.
    pub eps: T,
    pub max_degree: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self { kappa: T::of(4.0), eps: T::of(1e-3), max_degree: DEFAULT_MAX_DEGREE }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= T::one()) {
            return Err(Error::KappaTooSmall { kappa: self.kappa.as_f64() });
        }
        if !(self.eps > T::zero() && self.eps < T::one()) {
            return Err(Error::Config(format!(
                "tolerance eps must lie in (0, 1), got {}",
                self.eps.as_f64()
            )));
        }
        if self.max_degree == 0 {
            return Err(Error::Config("max_degree must be positive".into()));
        }
        Ok(())
    }
}

/// Odd Chebyshev approximation of `scale / x` on `[1/kappa, 1]`.
///
/// `scale` is `1/(2 kappa)` shrunk further if the raw construction exceeds
/// the unit sup norm required of a singular-value transform.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePoly<T> {
    /// Chebyshev coefficients, index = term degree; even entries are zero.
    pub coeffs: Vec<T>,
    pub kappa: T,
    pub eps: T,
    pub scale: T,
}

impl<T: Scalar> InversePoly<T> {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Clenshaw evaluation of the Chebyshev series at `x`.
    pub fn eval(&self, x: T) -> T {
        eval_chebyshev(&self.coeffs, x)
    }
}

fn eval_chebyshev<T: Scalar>(coeffs: &[T], x: T) -> T {
    let two_x = x + x;
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + two_x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or_else(T::zero) + x * b1 - b2
}

/// Odd polynomial tracking `1/(2 kappa x)` on `[1/kappa, 1]` within `eps`,
/// bounded by 1 in sup norm on `[-1, 1]`.
///
/// Construction: `(1 - (1 - x^2)^b) / (2 kappa x)` is a polynomial of degree
/// `2b - 1` whose Chebyshev coefficients follow from central binomial sums;
/// the series is truncated where the coefficient tail drops below `eps/2`.
pub fn inverse_poly<T: Scalar>(config: &SolverConfig<T>) -> Result<InversePoly<T>> {
    config.validate()?;
    let kappa = config.kappa.as_f64();
    let eps = config.eps.as_f64();
    // (1-x^2)^b <= (eps/2)^... on the window once b >= kappa^2 ln(2/eps).
    let b = (kappa * kappa * (2.0 / eps).ln()).ceil().max(1.0) as usize;

    // w[i] = C(2b, b+i) / 4^b, built by the stable descending recurrence.
    let mut w = vec![0.0f64; b + 1];
    w[0] = central_binomial_ratio(b);
    for i in 0..b {
        w[i + 1] = w[i] * (b - i) as f64 / (b + i + 1) as f64;
    }
    // suffix[j] = sum_{i=j+1..b} w[i]; coefficient of T_{2j+1} is
    // 2 (-1)^j suffix[j] / kappa.
    let mut suffix = vec![0.0f64; b];
    let mut acc = 0.0;
    for j in (0..b).rev() {
        acc += w[j + 1];
        suffix[j] = acc;
    }

    // Truncate where the remaining coefficient mass is below eps/2.
    let mut tail = vec![0.0f64; b + 1];
    for j in (0..b).rev() {
        tail[j] = tail[j + 1] + 2.0 * suffix[j] / kappa;
    }
    let mut terms = b;
    for j in 0..b {
        if tail[j] <= eps / 2.0 {
            terms = j;
            break;
        }
    }
    let degree = if terms == 0 { 1 } else { 2 * terms - 1 };
    if degree > config.max_degree {
        return Err(Error::DegreeCap { eps, cap: config.max_degree, est: degree });
    }

    let mut coeffs = vec![T::zero(); degree + 1];
    for j in 0..terms {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[2 * j + 1] = T::of(sign * 2.0 * suffix[j] / kappa);
    }

    // Clamp the sup norm; the transform demands |p| <= 1 everywhere.
    let mut sup = T::zero();
    for i in 0..=400usize {
        let x = T::of(-1.0 + 2.0 * i as f64 / 400.0);
        sup = sup.max(eval_chebyshev(&coeffs, x).abs());
    }
    let mut scale = T::of(1.0 / (2.0 * kappa));
    if sup.as_f64() > SUP_CAP {
        let shrink = T::of(SUP_CAP) / sup;
        for c in &mut coeffs {
            *c *= shrink;
        }
        scale *= shrink;
    }
    Ok(InversePoly { coeffs, kappa: config.kappa, eps: config.eps, scale })
}

/// C(2b, b) / 4^b without overflow; multiplicative form of the central
/// binomial coefficient.
fn central_binomial_ratio(b: usize) -> f64 {
    let mut r = 1.0f64;
    for i in 1..=b {
        r *= (2 * i - 1) as f64 / (2 * i) as f64;
    }
    r
}

/// Angles of a singular-value transform, one per reflection plus one.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseSequence<T> {
    pub angles: Vec<T>,
}

impl<T: Scalar> PhaseSequence<T> {
    pub fn degree(&self) -> usize {
        self.angles.len().saturating_sub(1)
    }

    /// One angle per line, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.angles {
            out.push_str(&format!("{:.16e}\n", a.as_f64()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut angles = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| Error::Config(format!("phase text line {}: {}", i + 1, e)))?;
            angles.push(T::of(v));
        }
        if angles.is_empty() {
            return Err(Error::Config("phase text holds no angles".into()));
        }
        Ok(Self { angles })
    }
}

type Mat2<T> = [[Complex<T>; 2]; 2];

fn mat2_mul<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[cfg(test)]
fn reflection<T: Scalar>(x: T) -> Mat2<T> {
    let r = (T::one() - x * x).max(T::zero()).sqrt();
    let c = |v: T| Complex::new(v, T::zero());
    [[c(x), c(r)], [c(r), c(-x)]]
}

fn w_matrix<T: Scalar>(x: T) -> Mat2<T> {
    let r = (T::one() - x * x).max(T::zero()).sqrt();
    let zero = T::zero();
    [
        [Complex::new(x, zero), Complex::new(zero, r)],
        [Complex::new(zero, r), Complex::new(x, zero)],
    ]
}

fn phase_z<T: Scalar>(phi: T) -> Mat2<T> {
    let zero = Complex::new(T::zero(), T::zero());
    [[Complex::from_polar(T::one(), phi), zero], [zero, Complex::from_polar(T::one(), -phi)]]
}

/// Scalar transform value `g(x)` for the full angle list.
pub fn scalar_transform<T: Scalar>(angles: &[T], x: T) -> Complex<T> {
    let r = w_matrix(x);
    let mut m = phase_z(angles[0]);
    for &phi in &angles[1..] {
        m = mat2_mul(&m, &r);
        m = mat2_mul(&m, &phase_z(phi));
    }
    m[0][0]
}

/// Real part of `g` and its gradient with respect to every angle.
fn transform_with_grad<T: Scalar>(angles: &[T], x: T) -> (T, Vec<T>) {
    let d = angles.len() - 1;
    let r = w_matrix(x);
    let eye: Mat2<T> = {
        let zero = Complex::new(T::zero(), T::zero());
        let one = Complex::new(T::one(), T::zero());
        [[one, zero], [zero, one]]
    };
    // prefix[k] = E(phi_0) * prod_{l=1..k} R E(phi_l); suffix[k] = the rest.
    let mut prefix = Vec::with_capacity(d + 1);
    prefix.push(phase_z(angles[0]));
    for k in 1..=d {
        let m = mat2_mul(&prefix[k - 1], &r);
        prefix.push(mat2_mul(&m, &phase_z(angles[k])));
    }
    let mut suffix = vec![eye; d + 1];
    for k in (0..d).rev() {
        let m = mat2_mul(&r, &phase_z(angles[k + 1]));
        suffix[k] = mat2_mul(&m, &suffix[k + 1]);
    }
    let g = mat2_mul(&prefix[d], &suffix[d])[0][0];
    // d g / d phi_k = (prefix[k] * iZ * suffix[k])[0][0].
    let i = Complex::new(T::zero(), T::one());
    let grads = (0..=d)
        .map(|k| {
            let a = &prefix[k];
            let b = &suffix[k];
            (i * (a[0][0] * b[0][0] - a[0][1] * b[1][0])).re
        })
        .collect();
    (g.re, grads)
}

/// Phase factors for a definite-parity Chebyshev series: a damped Newton
/// iteration on the symmetric-angle residual at Chebyshev nodes for moderate
/// degrees, and a structured quasi-Newton fixed-point iteration when the
/// dense Jacobian would be too large.
pub fn phases_for_chebyshev<T: Scalar>(coeffs: &[T]) -> Result<PhaseSequence<T>> {
    if coeffs.is_empty() {
        return Err(Error::Config("empty coefficient list".to_string()));
    }
    let d = coeffs.len() - 1;
    let tiny = T::of(1e-14);
    let odd_mass: T = coeffs.iter().skip(1).step_by(2).map(|c| c.abs()).sum();
    let even_mass: T = coeffs.iter().step_by(2).map(|c| c.abs()).sum();
    if odd_mass > tiny && even_mass > tiny {
        return Err(Error::Config("phase finding requires a definite-parity polynomial".into()));
    }

    // A lone +-1 coefficient is exactly +-T_d, a boundary case where the
    // Newton root degenerates; the sequence is known in closed form there.
    if let Some(sign) = single_chebyshev_term(coeffs) {
        let mut angles = vec![T::zero(); d + 1];
        if sign < T::zero() {
            angles[0] = T::FRAC_PI_2();
            angles[d] = if d == 0 { angles[0] + T::FRAC_PI_2() } else { T::FRAC_PI_2() };
        }
        return Ok(PhaseSequence { angles });
    }

    // Free angles under the symmetry phi_k = phi_{d-k}.
    let free = d / 2 + 1;
    let thetas: Vec<T> =
        (1..=free).map(|j| T::PI() * T::of((2 * j - 1) as f64) / T::of((4 * free) as f64)).collect();
    let nodes: Vec<T> = thetas.iter().map(|&t| t.cos()).collect();
    let target: Vec<T> = nodes.iter().map(|&x| eval_chebyshev(coeffs, x)).collect();
    // pi/4 at both ends makes Re g vanish with a well-conditioned Jacobian.
    let init = |psi: &mut [T]| {
        psi.iter_mut().for_each(|p| *p = T::zero());
        psi[0] = T::FRAC_PI_4();
    };
    // The structured iteration rests on every mirror pair being distinct,
    // which holds exactly when the degree is odd.
    let solve_for = |psi: &mut [T], goal: &[T]| -> Result<()> {
        if free <= NEWTON_MAX_FREE || d % 2 == 0 {
            newton_phases(psi, d, &nodes, goal)
        } else {
            fpi_phases(psi, d, &thetas, goal)
        }
    };
    let mut psi = vec![T::zero(); free];
    init(&mut psi);
    match solve_for(&mut psi, &target) {
        Ok(()) => {}
        Err(_) => {
            // Homotopy fallback: ramp the target amplitude, warm-starting
            // from the exact solution of the zero target.
            init(&mut psi);
            for step in 1..=8usize {
                let t = T::of(step as f64 / 8.0);
                let partial: Vec<T> = target.iter().map(|&v| v * t).collect();
                solve_for(&mut psi, &partial)?;
            }
        }
    }
    let mut angles = vec![T::zero(); d + 1];
    for (k, &p) in psi.iter().enumerate() {
        angles[k] = p;
        angles[d - k] = p;
    }
    Ok(PhaseSequence { angles })
}

/// `Some(sign)` when the series is exactly `sign * T_d` with `|sign| = 1`.
fn single_chebyshev_term<T: Scalar>(coeffs: &[T]) -> Option<T> {
    let d = coeffs.len() - 1;
    let tiny = T::of(1e-15);
    if coeffs[..d].iter().any(|c| c.abs() > tiny) {
        return None;
    }
    if (coeffs[d].abs() - T::one()).abs() > tiny {
        return None;
    }
    Some(coeffs[d].signum())
}

/// Phase factors for the inversion polynomial.
pub fn qsvt_phases<T: Scalar>(poly: &InversePoly<T>) -> Result<PhaseSequence<T>> {
    phases_for_chebyshev(&poly.coeffs)
}

fn expand_symmetric<T: Scalar>(psi: &[T], d: usize) -> Vec<T> {
    let mut angles = vec![T::zero(); d + 1];
    for (k, &p) in psi.iter().enumerate() {
        angles[k] = p;
        angles[d - k] = p;
    }
    angles
}

fn newton_phases<T: Scalar>(psi: &mut [T], d: usize, nodes: &[T], target: &[T]) -> Result<()> {
    let free = psi.len();
    let tol = T::of(PHASE_TOL);
    let residual = |psi: &[T]| -> Vec<T> {
        let angles = expand_symmetric(psi, d);
        nodes
            .iter()
            .zip(target)
            .map(|(&x, &t)| scalar_transform(&angles, x).re - t)
            .collect()
    };
    let sup = |v: &[T]| v.iter().fold(T::zero(), |m, &r| m.max(r.abs()));

    let mut f = residual(psi);
    let mut best = sup(&f);
    for iter in 0..100 {
        if best <= tol {
            return Ok(());
        }
        // Jacobian over the reduced angles; mirrored entries share a column.
        let angles = expand_symmetric(psi, d);
        let mut jac = ComplexMatrix::<T>::zeros(free, free);
        for (j, &x) in nodes.iter().enumerate() {
            let (_, grads) = transform_with_grad(&angles, x);
            for k in 0..free {
                let mut g = grads[k];
                if d - k != k {
                    g += grads[d - k];
                }
                jac.column_mut(k)[j] = Complex::new(g, T::zero());
            }
        }
        let rhs: Vec<Complex<T>> = f.iter().map(|&r| Complex::new(-r, T::zero())).collect();
        let delta = jac.lu_solve(&rhs)?;
        // Damped step: halve until the residual sup norm improves.
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<T> =
                psi.iter().zip(&delta).map(|(&p, dz)| p + lambda * dz.re).collect();
            let ft = residual(&trial);
            let st = sup(&ft);
            if st < best {
                psi.copy_from_slice(&trial);
                f = ft;
                best = st;
                accepted = true;
                break;
            }
            lambda = lambda / T::of(2.0);
        }
        if !accepted {
            return Err(Error::PhaseConvergence { residual: best.as_f64(), iters: iter + 1 });
        }
    }
    if best <= tol {
        Ok(())
    } else {
        Err(Error::PhaseConvergence { residual: best.as_f64(), iters: 100 })
    }
}

/// `Re g` minus the target at every node, for mirrored reduced angles, via a
/// row-vector sweep through the factor chain. Costs a handful of flops per
/// layer per node, which is what makes large degrees tractable.
fn residual_symmetric<T: Scalar>(
    psi: &[T],
    d: usize,
    xs: &[T],
    rs: &[T],
    target: &[T],
) -> Vec<T> {
    let free = psi.len();
    let eph: Vec<Complex<T>> =
        psi.iter().map(|&p| Complex::from_polar(T::one(), p)).collect();
    xs.iter()
        .zip(rs)
        .zip(target)
        .map(|((&x, &r), &t)| {
            let mut v0 = eph[0];
            let mut v1 = Complex::new(T::zero(), T::zero());
            for k in 1..=d {
                let w0 = v0 * x + Complex::new(-v1.im * r, v1.re * r);
                let w1 = Complex::new(-v0.im * r, v0.re * r) + v1 * x;
                let e = eph[if k < free { k } else { d - k }];
                v0 = w0 * e;
                v1 = w1 * e.conj();
            }
            v0.re - t
        })
        .collect()
}

/// Quasi-Newton phase iteration for large odd degrees. At the standard
/// starting point the Jacobian columns are `-2 cos((d-2m) theta_j)`, an
/// orthogonal cosine family over the nodes, so the exact inverse of the
/// initial Jacobian is a transpose up to scale. Each update is one residual
/// sweep plus one cosine transform, against the cubic cost of a dense solve.
fn fpi_phases<T: Scalar>(psi: &mut [T], d: usize, thetas: &[T], target: &[T]) -> Result<()> {
    let free = psi.len();
    let tol = T::of(PHASE_TOL);
    let xs: Vec<T> = thetas.iter().map(|&t| t.cos()).collect();
    let rs: Vec<T> = thetas.iter().map(|&t| t.sin()).collect();
    // Three-term seeds for the cosine transform: per node, the column values
    // cos((d - 2m) theta) follow the recurrence a_{m+1} = mul a_m - a_{m-1}.
    let c0: Vec<T> = thetas.iter().map(|&t| (t * T::of(d as f64)).cos()).collect();
    let c1: Vec<T> = thetas.iter().map(|&t| (t * T::of((d - 2) as f64)).cos()).collect();
    let mul: Vec<T> = thetas.iter().map(|&t| T::of(2.0) * (t + t).cos()).collect();

    let l2 = |v: &[T]| v.iter().fold(T::zero(), |s, &r| s + r * r).sqrt();
    let sup = |v: &[T]| v.iter().fold(T::zero(), |m, &r| m.max(r.abs()));

    let mut f = residual_symmetric(psi, d, &xs, &rs, target);
    let mut best = l2(&f);
    for iter in 0..FPI_MAX_ITERS {
        if sup(&f) <= tol {
            return Ok(());
        }
        // delta = -(J0^-1) f = (1/free) C^T f.
        let mut delta = vec![T::zero(); free];
        for (j, &fj) in f.iter().enumerate() {
            let mut prev = c0[j];
            let mut cur = c1[j];
            delta[0] += fj * prev;
            if free > 1 {
                delta[1] += fj * cur;
            }
            for dm in delta.iter_mut().skip(2) {
                let next = mul[j] * cur - prev;
                *dm += fj * next;
                prev = cur;
                cur = next;
            }
        }
        let inv = T::one() / T::of(free as f64);
        delta.iter_mut().for_each(|z| *z = *z * inv);
        // Damped step: halve until the l2 residual improves.
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..10 {
            let trial: Vec<T> =
                psi.iter().zip(&delta).map(|(&p, &dz)| p + lambda * dz).collect();
            let ft = residual_symmetric(&trial, d, &xs, &rs, target);
            let lt = l2(&ft);
            if lt < best {
                psi.copy_from_slice(&trial);
                f = ft;
                best = lt;
                accepted = true;
                break;
            }
            lambda = lambda / T::of(2.0);
        }
        if !accepted {
            return Err(Error::PhaseConvergence { residual: sup(&f).as_f64(), iters: iter + 1 });
        }
    }
    let s = sup(&f);
    if s <= tol {
        Ok(())
    } else {
        Err(Error::PhaseConvergence { residual: s.as_f64(), iters: FPI_MAX_ITERS })
    }
}

/// `e^{i phi (2 P - 1)}` with `P` the projector onto "block registers all
/// zero": mark onto the sign qubit, rotate, unmark. With `realify` present
/// the rotation sign is conditioned on that qubit, so a `|+>` there applies
/// the two conjugate sequences in superposition.
pub fn projector_phase<T: Scalar>(
    angle: T,
    block: &[usize],
    sign: usize,
    realify: Option<usize>,
) -> Vec<Gate<T>> {
    let mark: Vec<Control> = block.iter().map(|&q| Control::neg(q)).collect();
    let mut g = vec![Gate::mcx(mark.clone(), sign)];
    if let Some(h) = realify {
        g.push(Gate::cx(h, sign));
    }
    g.push(Gate::rz(angle + angle, sign));
    if let Some(h) = realify {
        g.push(Gate::cx(h, sign));
    }
    g.push(Gate::mcx(mark, sign));
    g
}

/// The alternating sequence: projector phases interleaved with the encoding
/// unitary and its inverse, valued per singular value at the scalar
/// transform of `angles`. The emitted projector angles carry the
/// Chebyshev-to-reflection shift described in the module header. With
/// `realify` set, the block (after post-selecting that qubit back to zero)
/// carries the real part of the transform.
pub fn sequence_gates<T: Scalar>(
    u: &[Gate<T>],
    angles: &[T],
    block: &[usize],
    sign: usize,
    realify: Option<usize>,
) -> Vec<Gate<T>> {
    let d = angles.len() - 1;
    let inv = invert_all(u);
    let shift = |k: usize| -> T {
        if d == 0 {
            T::zero()
        } else if k == 0 || k == d {
            T::FRAC_PI_4()
        } else {
            T::FRAC_PI_2()
        }
    };
    // e^{i gamma} restores the i^d left over from rewriting each W factor
    // as a reflection; the conjugate branch of the realify qubit needs
    // e^{-i gamma}, which the same RZ provides.
    let gamma = T::FRAC_PI_2() * T::of(d as f64);
    let mut seq = Vec::new();
    if let Some(h) = realify {
        seq.push(Gate::h(h));
        seq.push(Gate::rz(-(gamma + gamma), h));
    } else {
        // the sign qubit is |0> here, so this acts as a global phase
        seq.push(Gate::rz(-(gamma + gamma), sign));
    }
    seq.extend(projector_phase(angles[d] - shift(d), block, sign, realify));
    for k in 1..=d {
        seq.extend_from_slice(if k % 2 == 1 { u } else { inv.as_slice() });
        seq.extend(projector_phase(angles[d - k] - shift(d - k), block, sign, realify));
    }
    if let Some(h) = realify {
        seq.push(Gate::h(h));
    }
    seq
}

/// One counted unit of the transformation: projector phase, U, the mirrored
/// projector phase, U inverse. `sign_qubit` must be the first fresh index
/// past the encoding, so the step width is the encoding width plus one.
pub fn qsvt_step<T: Scalar>(
    be: &BlockEncoding<T>,
    angle: T,
    sign_qubit: usize,
) -> Result<Circuit<T>> {
    let w = be.circuit.width();
    if sign_qubit < w {
        return Err(Error::QubitCollision(sign_qubit));
    }
    if sign_qubit > w {
        return Err(Error::QubitRange { qubit: sign_qubit, width: w + 1 });
    }
    let mut c = clone_layout(&be.circuit);
    let sign = c.add_register("sign", 1, Interp::Unsigned, RegKind::Block).qubit(0);
    let block = be.block_qubits();
    c.extend(projector_phase(angle, &block, sign, None))?;
    c.extend(be.circuit.gates().to_vec())?;
    c.extend(projector_phase(angle, &block, sign, None))?;
    c.extend(be.circuit.inverted_gates())?;
    Ok(c)
}

fn clone_layout<T: Scalar>(src: &Circuit<T>) -> Circuit<T> {
    let mut c = Circuit::new();
    for r in src.registers() {
        c.add_register(&r.name, r.width, r.interp, r.kind);
    }
    c
}

/// Result of the quantum linear solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    /// Normalized post-selected state over the padded data space.
    pub state: Vec<Complex<T>>,
    /// The same component before renormalization.
    pub raw_state: Vec<Complex<T>>,
    pub success_probability: T,
    /// `|<quantum|classical>|` against the direct dense solve.
    pub fidelity: T,
    /// `min_c ||M psi c - b|| / ||b||` over complex rescalings `c`.
    pub residual: T,
    pub degree: usize,
    pub kappa: T,
    /// The post-selected component tracks `solution_scale * M^{-1} b-hat`.
    pub solution_scale: T,
    /// Set when fidelity lands below threshold; names the likely cause.
    pub diagnostic: Option<String>,
}

/// Invert `i omega0 I + A` applied to the source state on a simulator.
///
/// The non-Hermitian operator is inverted through its Hermitian dilation
/// `[[0, M],[M+, 0]]`, one extra data qubit selecting the sector. The right
/// hand side enters the dilation-0 sector; the odd polynomial moves the
/// solution into the dilation-1 sector, which is what gets post-selected
/// together with all block registers, the sign qubit, and the realify qubit
/// at zero.
pub fn solve_quantum<T: Scalar>(
    grid: &GridSpec<T>,
    params: &PlasmaParams<T>,
    config: &SolverConfig<T>,
) -> Result<SolveOutcome<T>> {
    solve_with_parts(grid, params, config, OperatorParts::default())
}

/// Same solve with operator parts toggled; disabling both leaves the
/// diagonal `i omega0 I` system, whose solution is proportional to `b`.
pub fn solve_with_parts<T: Scalar>(
    grid: &GridSpec<T>,
    params: &PlasmaParams<T>,
    config: &SolverConfig<T>,
    parts: OperatorParts,
) -> Result<SolveOutcome<T>> {
    config.validate()?;
    let be = full_be_parts(grid, params, parts)?;
    let m = be.reference.as_ref().expect("full encoding carries its reference").clone();
    let b = assemble_rhs(grid, params)?;
    let b_hat = real_unit(&b)?;

    let poly = inverse_poly(config)?;
    // Shrink the encoded polynomial when its coefficient mass is large: the
    // phase iteration is most robust near the trivial angles, and the
    // post-selected state is invariant under the shrink, which only costs
    // success probability.
    let mass: T = poly.coeffs.iter().fold(T::zero(), |s, &c| s + c.abs());
    let gamma = (T::of(L1_BUDGET) / mass).min(T::one());
    let phases = if gamma < T::one() {
        let shrunk: Vec<T> = poly.coeffs.iter().map(|&c| c * gamma).collect();
        phases_for_chebyshev(&shrunk)?
    } else {
        qsvt_phases(&poly)?
    };
    let degree = phases.degree();

    let data = be.data_qubits();
    let block = be.block_qubits();
    let mut c = clone_layout(&be.circuit);
    let dil = c.add_register("dilation", 1, Interp::Unsigned, RegKind::Data).qubit(0);
    let sign = c.add_register("sign", 1, Interp::Unsigned, RegKind::Block).qubit(0);
    let h = c.add_register("re_half", 1, Interp::Unsigned, RegKind::Block).qubit(0);

    // U_H block-encodes the dilation: flip the sector, then the inverse
    // encoding on sector 1 and the encoding on sector 0.
    let u = be.circuit.gates().to_vec();
    let mut uh = vec![Gate::x(dil)];
    uh.extend(control_all(invert_all(&u), &[Control::pos(dil)]));
    uh.extend(control_all(u, &[Control::neg(dil)]));

    c.extend(state_prep(&data, &b_hat)?)?;
    c.extend(sequence_gates(&uh, &phases.angles, &block, sign, Some(h)))?;

    let mut st = StateVector::zero(c.width());
    st.apply_circuit(&c);
    let mut fixed: Vec<(usize, bool)> = block.iter().map(|&q| (q, false)).collect();
    fixed.push((sign, false));
    fixed.push((h, false));
    fixed.push((dil, true));
    let (raw_state, success_probability) = project_component(&st, &fixed, &data)?;

    let classical = solve_classical(&m, &b)?;
    let state = normalize(&raw_state);
    let fidelity = inner(&state, &normalize(&classical)).norm();

    // Best complex rescaling of M psi against the raw right-hand side.
    let mpsi = m.mul_vec(&state);
    let scale = inner(&mpsi, &b) / Complex::new(norm(&mpsi).powi(2), T::zero());
    let r: Vec<Complex<T>> = mpsi.iter().zip(&b).map(|(p, q)| *p * scale - *q).collect();
    let residual = norm(&r) / norm(&b);

    let diagnostic = if fidelity.as_f64() < FIDELITY_FLOOR {
        let sigma = m.singular_values();
        let need = be.scale / *sigma.last().expect("nonempty spectrum");
        Some(if config.kappa < need {
            format!(
                "kappa {} below s/sigma_min {}; raise kappa",
                config.kappa.as_f64(),
                need.as_f64()
            )
        } else {
            format!(
                "fidelity {} below target with kappa {} >= s/sigma_min {}; tighten eps",
                fidelity.as_f64(),
                config.kappa.as_f64(),
                need.as_f64()
            )
        })
    } else {
        None
    };

    Ok(SolveOutcome {
        state,
        raw_state,
        success_probability,
        fidelity,
        residual,
        degree,
        kappa: config.kappa,
        solution_scale: gamma * poly.scale * be.scale,
        diagnostic,
    })
}

/// Default condition bound: `s / sigma_min` of the assembled operator under
/// its encoding scale, times a 1.25 safety factor.
pub fn default_kappa<T: Scalar>(grid: &GridSpec<T>, params: &PlasmaParams<T>) -> Result<T> {
    let be = full_be_parts(grid, params, OperatorParts::default())?;
    let m = be.reference.as_ref().expect("full encoding carries its reference");
    let sv = m.singular_values();
    let smin = *sv.last().expect("nonempty spectrum");
    Ok(T::of(1.25) * be.scale / smin)
}

/// Real unit vector from a complex one; rejects genuinely complex input
/// since the state preparation network takes real amplitudes.
fn real_unit<T: Scalar>(v: &[Complex<T>]) -> Result<Vec<T>> {
    let n = norm(v);
    let tol = T::of(1e-12);
    for z in v {
        if z.im.abs() > tol * n {
            return Err(Error::Config(
                "source with complex amplitudes is not supported by state preparation".into(),
            ));
        }
    }
    Ok(v.iter().map(|z| z.re / n).collect())
}

/// Notes for reporting: degree, kappa, and scale of the inversion.
pub fn solve_notes<T: Scalar>(outcome: &SolveOutcome<T>) -> BTreeMap<String, f64> {
    let mut n = BTreeMap::new();
    n.insert("degree".into(), outcome.degree as f64);
    n.insert("kappa".into(), outcome.kappa.as_f64());
    n.insert("success_probability".into(), outcome.success_probability.as_f64());
    n.insert("fidelity".into(), outcome.fidelity.as_f64());
    n.insert("residual".into(), outcome.residual.as_f64());
    n.insert("solution_scale".into(), outcome.solution_scale.as_f64());
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::amplitude_assign;
    use crate::Cx;
    use crate::problem::make_grid;
    use crate::sim::extract_block;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(kappa: f64, eps: f64) -> SolverConfig<f64> {
        SolverConfig { kappa, eps, max_degree: DEFAULT_MAX_DEGREE }
    }

    #[test]
    fn inverse_poly_tracks_one_over_x_on_the_window() {
        for &(kappa, eps) in &[(1.5, 1e-2), (4.0, 1e-3), (10.0, 1e-3)] {
            let p = inverse_poly(&config(kappa, eps)).unwrap();
            assert!((p.scale - 1.0 / (2.0 * kappa)).abs() < 1e-15, "no clamp expected here");
            for i in 0..=100 {
                let x = 1.0 / kappa + (1.0 - 1.0 / kappa) * i as f64 / 100.0;
                let err = (p.eval(x) - 1.0 / (2.0 * kappa * x)).abs();
                assert!(err <= eps, "kappa {kappa} x {x}: err {err}");
            }
        }
    }

    #[test]
    fn inverse_poly_value_at_one() {
        let p = inverse_poly(&config(1.5, 1e-2)).unwrap();
        assert!((p.eval(1.0) - 1.0 / 3.0).abs() <= 1e-2);
    }

    #[test]
    fn inverse_poly_is_odd_and_bounded() {
        let p = inverse_poly(&config(3.0, 1e-3)).unwrap();
        for i in 0..=200 {
            let x = -1.0 + 2.0 * i as f64 / 200.0;
            assert!((p.eval(x) + p.eval(-x)).abs() < 1e-12);
            assert!(p.eval(x).abs() <= 1.0 + 1e-12);
        }
        assert!(p.coeffs.iter().step_by(2).all(|&c| c == 0.0));
    }

    #[test]
    fn anchor_degree_for_mild_conditioning() {
        // Regression anchor: kappa = 1.5, eps = 1e-2 needs degree <= 31.
        let p = inverse_poly(&config(1.5, 1e-2)).unwrap();
        assert!(p.degree() <= 31, "degree {}", p.degree());
        assert_eq!(p.degree() % 2, 1);
    }

    #[test]
    fn degree_cap_reports_an_estimate() {
        let err = inverse_poly(&SolverConfig { kappa: 20.0, eps: 1e-4, max_degree: 9 })
            .unwrap_err();
        match err {
            Error::DegreeCap { cap, est, .. } => {
                assert_eq!(cap, 9);
                assert!(est > 9);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(matches!(
            SolverConfig { kappa: 0.5, eps: 1e-3, max_degree: 99 }.validate(),
            Err(Error::KappaTooSmall { .. })
        ));
        assert!(matches!(
            SolverConfig { kappa: 2.0, eps: 0.0, max_degree: 99 }.validate(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn trivial_target_keeps_zero_phases() {
        // p(x) = x is the sequence with every angle zero.
        let seq = phases_for_chebyshev(&[0.0f64, 1.0]).unwrap();
        assert_eq!(seq.angles.len(), 2);
        assert!(seq.angles.iter().all(|a| a.abs() < 1e-12));
        for &x in &[-0.9f64, -0.3, 0.2, 0.8] {
            let g = scalar_transform(&seq.angles, x);
            assert!((g.re - x).abs() < 1e-12 && g.im.abs() < 1e-12);
        }
    }

    #[test]
    fn phases_reproduce_the_polynomial_on_a_grid() {
        let cfg = config(1.5, 1e-2);
        let p = inverse_poly(&cfg).unwrap();
        let seq = qsvt_phases(&p).unwrap();
        assert_eq!(seq.angles.len(), p.degree() + 1);
        for i in 0..=100 {
            let x = 1.0 / cfg.kappa + (1.0 - 1.0 / cfg.kappa) * i as f64 / 100.0;
            let err = (scalar_transform(&seq.angles, x).re - p.eval(x)).abs();
            assert!(err <= 2.0 * cfg.eps, "x {x}: err {err}");
        }
    }

    #[test]
    fn mirrored_angles_conjugate_the_transform() {
        let p = inverse_poly(&config(2.0, 1e-2)).unwrap();
        let seq = qsvt_phases(&p).unwrap();
        let neg: Vec<f64> = seq.angles.iter().map(|a| -a).collect();
        for &x in &[0.5, 0.7, 0.9] {
            let g = scalar_transform(&seq.angles, x);
            let gbar = scalar_transform(&neg, x);
            assert!((g - gbar.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn fast_residual_matches_the_matrix_chain() {
        let p = inverse_poly(&config(2.5, 1e-3)).unwrap();
        let seq = phases_for_chebyshev(&p.coeffs).unwrap();
        let d = seq.degree();
        let free = d / 2 + 1;
        let psi: Vec<f64> = seq.angles[..free].to_vec();
        let thetas: Vec<f64> =
            (1..=free).map(|j| std::f64::consts::PI * (2 * j - 1) as f64 / (4 * free) as f64).collect();
        let xs: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        let rs: Vec<f64> = thetas.iter().map(|t| t.sin()).collect();
        let target = vec![0.0f64; free];
        let fast = residual_symmetric(&psi, d, &xs, &rs, &target);
        for (j, &x) in xs.iter().enumerate() {
            let slow = scalar_transform(&seq.angles, x).re;
            assert!((fast[j] - slow).abs() < 1e-13, "node {j}");
        }
    }

    #[test]
    fn fixed_point_iteration_agrees_with_newton() {
        // Same target through both paths; phases may differ, the realized
        // polynomial may not.
        let p = inverse_poly(&config(3.0, 1e-3)).unwrap();
        let d = p.degree();
        assert_eq!(d % 2, 1);
        let free = d / 2 + 1;
        let thetas: Vec<f64> =
            (1..=free).map(|j| std::f64::consts::PI * (2 * j - 1) as f64 / (4 * free) as f64).collect();
        let nodes: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        let target: Vec<f64> = nodes.iter().map(|&x| eval_chebyshev(&p.coeffs, x)).collect();
        let mut psi = vec![0.0f64; free];
        psi[0] = std::f64::consts::FRAC_PI_4;
        fpi_phases(&mut psi, d, &thetas, &target).unwrap();
        let angles = expand_symmetric(&psi, d);
        for i in 0..=60 {
            let x = i as f64 / 60.0;
            let err = (scalar_transform(&angles, x).re - p.eval(x)).abs();
            assert!(err < 1e-10, "x {x}: err {err}");
        }
    }

    #[test]
    fn phase_text_round_trips() {
        let p = inverse_poly(&config(1.5, 1e-2)).unwrap();
        let seq = qsvt_phases(&p).unwrap();
        let text = seq.to_text();
        assert_eq!(text.lines().count(), seq.angles.len());
        let back = PhaseSequence::<f64>::from_text(&text).unwrap();
        for (a, b) in seq.angles.iter().zip(&back.angles) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(PhaseSequence::<f64>::from_text("not a number\n").is_err());
    }

    /// 1-qubit encoding whose single block value is sigma.
    fn scalar_toy(sigma: f64) -> Circuit<f64> {
        let mut c = Circuit::new();
        let q = c.add_register("blk", 1, Interp::Unsigned, RegKind::Block).qubit(0);
        c.push(Gate::z(q)).unwrap();
        c.push(Gate::ry(2.0 * sigma.acos(), q)).unwrap();
        c
    }

    #[test]
    fn scalar_toy_matches_the_reflection() {
        let u = crate::sim::extract_unitary(&scalar_toy(0.6)).unwrap();
        assert!((u.column(0)[0].re - 0.6).abs() < 1e-15);
        assert!((u.column(1)[1].re + 0.6).abs() < 1e-15);
        assert!((u.column(0)[1].re - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sequence_on_a_scalar_toy_reproduces_the_recursion() {
        let p = inverse_poly(&config(1.5, 1e-2)).unwrap();
        let seq = qsvt_phases(&p).unwrap();
        for &sigma in &[0.3, 0.7, 0.95] {
            let toy = scalar_toy(sigma);
            // Plain sequence: block value is the complex transform.
            let mut c = clone_layout(&toy);
            let sign = c.add_register("sign", 1, Interp::Unsigned, RegKind::Block).qubit(0);
            c.extend(sequence_gates(toy.gates(), &seq.angles, &[0], sign, None)).unwrap();
            let blk = extract_block(&c, &[], 1.0).unwrap();
            let g = scalar_transform(&seq.angles, sigma);
            assert!((blk.column(0)[0] - g).norm() < 1e-12);
            // Realified: block value is p(sigma) within the phase tolerance.
            let mut cr = clone_layout(&toy);
            let sign = cr.add_register("sign", 1, Interp::Unsigned, RegKind::Block).qubit(0);
            let h = cr.add_register("re_half", 1, Interp::Unsigned, RegKind::Block).qubit(0);
            cr.extend(sequence_gates(toy.gates(), &seq.angles, &[0], sign, Some(h))).unwrap();
            let blk = extract_block(&cr, &[], 1.0).unwrap();
            assert!(
                (blk.column(0)[0].re - p.eval(sigma)).abs() <= 5.0 * 1e-2,
                "sigma {sigma}"
            );
            assert!(blk.column(0)[0].im.abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_encoding_transforms_each_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(901);
        let cfg = config(4.0, 1e-3);
        let p = inverse_poly(&cfg).unwrap();
        let seq = qsvt_phases(&p).unwrap();
        for round in 0..5 {
            let k = 2usize;
            let sigmas: Vec<f64> =
                (0..1 << k).map(|_| rng.gen_range(1.0 / cfg.kappa..=1.0)).collect();
            let mut c = Circuit::new();
            let data = c.add_register("d", k, Interp::Unsigned, RegKind::Data);
            let flag = c.add_register("f", 1, Interp::Unsigned, RegKind::Block).qubit(0);
            let sign = c.add_register("sign", 1, Interp::Unsigned, RegKind::Block).qubit(0);
            let h = c.add_register("re_half", 1, Interp::Unsigned, RegKind::Block).qubit(0);
            let u = amplitude_assign(&data.qubits(), flag, &sigmas).unwrap();
            c.extend(sequence_gates(&u, &seq.angles, &[flag], sign, Some(h))).unwrap();
            let blk = extract_block(&c, &data.qubits(), 1.0).unwrap();
            for (m, &s) in sigmas.iter().enumerate() {
                let got = blk.column(m)[m];
                assert!(
                    (got.re - p.eval(s)).abs() <= 5.0 * cfg.eps,
                    "round {round} entry {m}: {} vs {}",
                    got.re,
                    p.eval(s)
                );
            }
        }
    }

    #[test]
    fn step_width_matches_the_counted_layout() {
        let grid = make_grid(&PlasmaParams::default(), 3, 2).unwrap();
        let be = crate::blockenc::full_be(&grid, &PlasmaParams::default()).unwrap();
        let step = qsvt_step(&be, 0.3, be.circuit.width()).unwrap();
        assert_eq!(step.width(), 15);
        assert!(qsvt_step(&be, 0.3, 2).is_err());
        assert!(qsvt_step(&be, 0.3, be.circuit.width() + 1).is_err());
    }

    #[test]
    fn zero_angle_step_is_the_unitary_sandwich() {
        let toy = scalar_toy(0.45);
        let be = BlockEncoding {
            name: "toy".into(),
            circuit: toy.clone(),
            scale: 1.0,
            reference: None,
            notes: Default::default(),
        };
        let step = qsvt_step(&be, 0.0, 1).unwrap();
        let u = crate::sim::extract_unitary(&step).unwrap();
        // R is an involution, so the zero-angle sandwich is the identity.
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((u.column(j)[i] - Cx::new(want, 0.0)).norm() < 1e-12);
            }
        }
        // A nonzero angle reproduces the single-layer scalar recursion on
        // the invariant pair (|0>, |1>).
        let step = qsvt_step(&be, 0.7, 1).unwrap();
        let u = crate::sim::extract_unitary(&step).unwrap();
        let r = reflection(0.45);
        let m = mat2_mul(&mat2_mul(&mat2_mul(&phase_z(0.7), &r), &phase_z(0.7)), &r);
        assert!((u.column(0)[0] - m[0][0]).norm() < 1e-12);
    }

    #[test]
    fn diagonal_system_solves_to_the_source_direction() {
        // Advection and coupling disabled: M = i omega0 I, solution ~ b.
        let params = PlasmaParams::default();
        let grid = make_grid(&params, 3, 2).unwrap();
        let cfg = config(1.3, 1e-3);
        let out = solve_with_parts(&grid, &params, &cfg, OperatorParts::NONE).unwrap();
        assert!(out.fidelity >= 1.0 - 1e-6, "fidelity {}", out.fidelity);
        assert!(out.success_probability > 0.0);
        let n2: f64 = out.raw_state.iter().map(|z| z.norm_sqr()).sum();
        assert!((n2 - out.success_probability).abs() <= 1e-10);
        assert!(out.diagnostic.is_none());
    }

    #[test]
    fn kappa_underestimate_is_diagnosed() {
        let params = PlasmaParams::default();
        let grid = make_grid(&params, 3, 2).unwrap();
        // kappa far below s/sigma_min: fidelity collapses, diagnostic names it.
        let cfg = config(1.05, 1e-2);
        let out = solve_quantum(&grid, &params, &cfg).unwrap();
        assert!(out.fidelity < 0.99);
        let msg = out.diagnostic.expect("diagnostic expected");
        assert!(msg.contains("below s/sigma_min"), "{msg}");
    }

    #[test]
    fn complex_sources_are_rejected() {
        let v = vec![Cx::new(0.6, 0.0), Cx::new(0.0, 0.8)];
        assert!(matches!(real_unit(&v), Err(Error::Config(_))));
        let v = vec![Cx::new(0.6, 0.0), Cx::new(-0.8, 0.0)];
        let u = real_unit(&v).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-15 && (u[1] + 0.8).abs() < 1e-15);
    }
}
