//! Reference assembly of the discretized operator and right-hand side.
//!
//! Everything here is deliberately plain: explicit stencil loops building a
//! dense matrix, plus an independent matrix-free application used to
//! cross-check the assembly. Circuit extractions are compared against these
//! matrices entry by entry.

use super::{dv_maxwellian, make_grid, GridSpec, PlasmaParams};
use crate::linalg::{norm, ComplexMatrix};
use crate::{Error, Result, Scalar};
use num_complex::Complex;

/// Which blocks of `A` to include; `i*omega0*I` is always present.
/// Disabling blocks exists for targeted verification (e.g. the pure
/// identity branch of the final LCU).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorParts {
    pub advection: bool,
    pub coupling: bool,
}

impl Default for OperatorParts {
    fn default() -> Self {
        Self { advection: true, coupling: true }
    }
}

impl OperatorParts {
    pub const NONE: Self = Self { advection: false, coupling: false };
}

/// Boundary mask: zero exactly at inflow rows where the upwind stencil
/// would reach outside the domain: (x = 0, v > 0) and (x = max, v <= 0).
pub fn zeta_mask<T: Scalar>(grid: &GridSpec<T>, ix: usize, iv: usize) -> bool {
    let last = (1usize << grid.n_x) - 1;
    let v = grid.v_points[iv];
    if ix == 0 && v > T::zero() {
        return false;
    }
    if ix == last && v <= T::zero() {
        return false;
    }
    true
}

/// Dense position-derivative matrix: antisymmetric central stencil in the
/// bulk, one-sided 3-point stencils on the boundary rows, all over `2 dx`.
pub fn assemble_grad_x<T: Scalar>(grid: &GridSpec<T>) -> ComplexMatrix<T> {
    let n = 1usize << grid.n_x;
    let h = T::one() / (T::of(2.0) * grid.dx);
    let mut m = ComplexMatrix::zeros(n, n);
    let re = |v: T| Complex::new(v, T::zero());
    m[(0, 0)] = re(T::of(-3.0) * h);
    m[(0, 1)] = re(T::of(4.0) * h);
    m[(0, 2)] = re(-h);
    for r in 1..n - 1 {
        m[(r, r - 1)] = re(-h);
        m[(r, r + 1)] = re(h);
    }
    m[(n - 1, n - 3)] = re(T::of(3.0) * h);
    m[(n - 1, n - 2)] = re(T::of(-4.0) * h);
    m[(n - 1, n - 1)] = re(h);
    m
}

/// Stencil of one row of the position derivative, as (column, weight) pairs.
fn grad_row<T: Scalar>(grid: &GridSpec<T>, r: usize) -> Vec<(usize, T)> {
    let n = 1usize << grid.n_x;
    let h = T::one() / (T::of(2.0) * grid.dx);
    if r == 0 {
        vec![(0, T::of(-3.0) * h), (1, T::of(4.0) * h), (2, -h)]
    } else if r == n - 1 {
        vec![(n - 3, T::of(3.0) * h), (n - 2, T::of(-4.0) * h), (n - 1, h)]
    } else {
        vec![(r - 1, -h), (r + 1, h)]
    }
}

/// Build the full `i*omega0*I + A` matrix over the padded state space.
///
/// Block structure over the field-sector bit (g first, E second):
/// the advection block `F = zeta (v ⊗ I)(I ⊗ grad_x)` on sector 0, coupling
/// columns `-dF/dv` from the E slots into g, current rows `v dv` from g into
/// the E slots, and zero elsewhere; padding slots only carry `i*omega0`.
pub fn assemble_operator<T: Scalar>(
    grid: &GridSpec<T>,
    params: &PlasmaParams<T>,
    parts: OperatorParts,
) -> Result<ComplexMatrix<T>> {
    let layout = grid.layout();
    let dim = layout.dim();
    let mut m = ComplexMatrix::zeros(dim, dim);
    let i_omega = Complex::new(T::zero(), params.omega0);
    for d in 0..dim {
        m[(d, d)] = i_omega;
    }

    let density = params.density.sample(grid)?;
    let temperature = params.temperature.sample(grid)?;
    let nx = 1usize << grid.n_x;
    let nv = 1usize << grid.n_v;

    if parts.advection {
        for iv in 0..nv {
            let v = grid.v_points[iv];
            for ix in 0..nx {
                if !zeta_mask(grid, ix, iv) {
                    continue;
                }
                let row = layout.flat(ix, iv, 0);
                for (col_x, w) in grad_row(grid, ix) {
                    let col = layout.flat(col_x, iv, 0);
                    m[(row, col)] = m[(row, col)] + Complex::new(v * w, T::zero());
                }
            }
        }
    }

    if parts.coupling {
        for ix in 0..nx {
            let e_slot = layout.flat(ix, 0, 1);
            for iv in 0..nv {
                let v = grid.v_points[iv];
                let g_slot = layout.flat(ix, iv, 0);
                // field forcing of the distribution: column -dF/dv
                let force = -dv_maxwellian(density[ix], temperature[ix], v);
                m[(g_slot, e_slot)] = m[(g_slot, e_slot)] + Complex::new(force, T::zero());
                // current deposition: row v dv
                m[(e_slot, g_slot)] = m[(e_slot, g_slot)] + Complex::new(v * grid.dv, T::zero());
            }
        }
    }

    Ok(m)
}

/// Matrix-free application of `(i*omega0*I + A) u`; written independently of
/// [`assemble_operator`] so the two can cross-check each other.
pub fn apply_operator<T: Scalar>(
    grid: &GridSpec<T>,
    params: &PlasmaParams<T>,
    parts: OperatorParts,
    u: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let layout = grid.layout();
    let dim = layout.dim();
    if u.len() != dim {
        return Err(Error::Dimension(format!("state length {} vs {}", u.len(), dim)));
    }
    let density = params.density.sample(grid)?;
    let temperature = params.temperature.sample(grid)?;
    let nx = 1usize << grid.n_x;
    let nv = 1usize << grid.n_v;
    let h = T::one() / (T::of(2.0) * grid.dx);

    let mut out: Vec<Complex<T>> =
        u.iter().map(|z| z * Complex::new(T::zero(), params.omega0)).collect();

    if parts.advection {
        for iv in 0..nv {
            let v = grid.v_points[iv];
            for ix in 0..nx {
                if !zeta_mask(grid, ix, iv) {
                    continue;
                }
                let g = |x: usize| u[layout.flat(x, iv, 0)];
                let deriv = if ix == 0 {
                    (g(0) * T::of(-3.0) + g(1) * T::of(4.0) - g(2)) * h
                } else if ix == nx - 1 {
                    (g(nx - 3) * T::of(3.0) - g(nx - 2) * T::of(4.0) + g(nx - 1)) * h
                } else {
                    (g(ix + 1) - g(ix - 1)) * h
                };
                out[layout.flat(ix, iv, 0)] += deriv * v;
            }
        }
    }

    if parts.coupling {
        for ix in 0..nx {
            let e_val = u[layout.flat(ix, 0, 1)];
            let mut current = Complex::new(T::zero(), T::zero());
            for iv in 0..nv {
                let v = grid.v_points[iv];
                let force = -dv_maxwellian(density[ix], temperature[ix], v);
                out[layout.flat(ix, iv, 0)] += e_val * force;
                current += u[layout.flat(ix, iv, 0)] * (v * grid.dv);
            }
            out[layout.flat(ix, 0, 1)] += current;
        }
    }

    Ok(out)
}

/// Right-hand side `b = (0; -j)`: zeros in the g sector, `-j(x)` in the E
/// slots, zeros in the padding.
pub fn assemble_rhs<T: Scalar>(grid: &GridSpec<T>, params: &PlasmaParams<T>) -> Result<Vec<Complex<T>>> {
    let layout = grid.layout();
    let j = params.source.sample(grid)?;
    let mut b = vec![Complex::new(T::zero(), T::zero()); layout.dim()];
    for (ix, jx) in j.iter().enumerate() {
        b[layout.flat(ix, 0, 1)] = -jx;
    }
    if norm(&b) == T::zero() {
        return Err(Error::InvalidGrid("source current is identically zero".into()));
    }
    Ok(b)
}

/// Direct dense solve with a residual check; the residual guard makes every
/// classical reference self-validating.
pub fn solve_classical<T: Scalar>(m: &ComplexMatrix<T>, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let x = m.lu_solve(b)?;
    let r: Vec<Complex<T>> = m.mul_vec(&x).iter().zip(b).map(|(p, q)| *p - *q).collect();
    let rel = norm(&r) / norm(b);
    if rel > T::epsilon().sqrt() {
        return Err(Error::Dimension(format!("solve residual {} unexpectedly large", rel.as_f64())));
    }
    Ok(x)
}

/// Extremal singular values of the assembled operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport<T> {
    pub sigma_max: T,
    pub sigma_min: T,
}

impl<T: Scalar> ConditionReport<T> {
    pub fn cond(&self) -> T {
        self.sigma_max / self.sigma_min
    }

    /// `s / sigma_min`: the condition number seen by a block encoding with
    /// subnormalization `s`.
    pub fn scaled(&self, s: T) -> T {
        s / self.sigma_min
    }
}

pub fn condition_report<T: Scalar>(
    params: &PlasmaParams<T>,
    n_x: usize,
    n_v: usize,
) -> Result<ConditionReport<T>> {
    let grid = make_grid(params, n_x, n_v)?;
    let m = assemble_operator(&grid, params, OperatorParts::default())?;
    let sv = m.singular_values();
    Ok(ConditionReport { sigma_max: sv[0], sigma_min: *sv.last().expect("nonempty") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n_x: usize, n_v: usize) -> (GridSpec<f64>, PlasmaParams<f64>) {
        let params = PlasmaParams::default();
        let grid = make_grid(&params, n_x, n_v).unwrap();
        (grid, params)
    }

    #[test]
    fn grad_x_kills_constants_including_boundary_rows() {
        let (grid, _) = setup(4, 2);
        let g = assemble_grad_x(&grid);
        let ones = vec![Complex::new(1.0, 0.0); 16];
        for (r, val) in g.mul_vec(&ones).iter().enumerate() {
            assert!(val.norm() < 1e-14, "row {r} sum {val}");
        }
    }

    #[test]
    fn grad_x_boundary_rows_are_one_sided() {
        let (grid, _) = setup(3, 2);
        let g = assemble_grad_x(&grid);
        let h = 1.0 / (2.0 * grid.dx);
        assert_eq!(g[(0, 0)].re, -3.0 * h);
        assert_eq!(g[(0, 1)].re, 4.0 * h);
        assert_eq!(g[(0, 2)].re, -h);
        assert_eq!(g[(7, 5)].re, 3.0 * h);
        assert_eq!(g[(7, 6)].re, -4.0 * h);
        assert_eq!(g[(7, 7)].re, h);
        // interior rows differentiate x^1 exactly
        let xs: Vec<_> = grid.x_points.iter().map(|&x| Complex::new(x, 0.0)).collect();
        let d = g.mul_vec(&xs);
        for r in 1..7 {
            assert!((d[r].re - 1.0).abs() < 1e-13, "row {r}");
        }
    }

    #[test]
    fn zeta_counts_per_boundary() {
        for n_v in 1..=4 {
            let (grid, _) = setup(3, n_v);
            let nv = 1usize << n_v;
            let zeroed_left = (0..nv).filter(|&iv| !zeta_mask(&grid, 0, iv)).count();
            let zeroed_right = (0..nv).filter(|&iv| !zeta_mask(&grid, 7, iv)).count();
            // strictly positive velocities at the left inflow
            assert_eq!(zeroed_left, (1 << (n_v - 1)) - 1);
            // non-positive (including v = 0) at the right
            assert_eq!(zeroed_right, (1 << (n_v - 1)) + 1);
            for ix in 1..7 {
                assert!((0..nv).all(|iv| zeta_mask(&grid, ix, iv)));
            }
        }
    }

    #[test]
    fn operator_lower_right_block_is_pure_diagonal() {
        let (grid, params) = setup(3, 2);
        let m = assemble_operator(&grid, &params, OperatorParts::default()).unwrap();
        let layout = grid.layout();
        let half = 1 << (grid.n_x + grid.n_v);
        for r in half..layout.dim() {
            for c in half..layout.dim() {
                let expect = if r == c { Complex::new(0.0, params.omega0) } else { Complex::new(0.0, 0.0) };
                assert_eq!(m[(r, c)], expect, "entry ({r},{c})");
            }
        }
    }

    #[test]
    fn operator_interior_advection_entry() {
        let (grid, params) = setup(3, 2);
        let m = assemble_operator(&grid, &params, OperatorParts::default()).unwrap();
        let layout = grid.layout();
        // interior x = 3, velocity index 1 (v = dv = 2.0)
        let v = grid.v_points[1];
        let row = layout.flat(3, 1, 0);
        assert_eq!(m[(row, layout.flat(4, 1, 0))].re, v / (2.0 * grid.dx));
        assert_eq!(m[(row, layout.flat(2, 1, 0))].re, -v / (2.0 * grid.dx));
    }

    #[test]
    fn operator_with_no_parts_is_scaled_identity() {
        let (grid, params) = setup(3, 2);
        let m = assemble_operator(&grid, &params, OperatorParts::NONE).unwrap();
        let expect = ComplexMatrix::identity(grid.dim()).scale(Complex::new(0.0, params.omega0));
        assert_eq!(m.max_abs_diff(&expect), 0.0);
    }

    #[test]
    fn inflow_rows_have_no_advection() {
        let (grid, params) = setup(3, 3);
        let only_f = OperatorParts { advection: true, coupling: false };
        let m = assemble_operator(&grid, &params, only_f).unwrap();
        let layout = grid.layout();
        let nv = 1 << grid.n_v;
        for iv in 0..nv {
            for &ix in &[0usize, 7] {
                if zeta_mask(&grid, ix, iv) {
                    continue;
                }
                let row = layout.flat(ix, iv, 0);
                for c in 0..layout.dim() {
                    if c == row {
                        continue;
                    }
                    assert_eq!(m[(row, c)].norm(), 0.0, "masked row ({ix},{iv}) col {c}");
                }
            }
        }
    }

    #[test]
    fn matrix_free_apply_matches_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(n_x, n_v) in &[(3usize, 2usize), (4, 3)] {
            let (grid, params) = setup(n_x, n_v);
            let m = assemble_operator(&grid, &params, OperatorParts::default()).unwrap();
            for _ in 0..50 {
                let u: Vec<_> = (0..grid.dim())
                    .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let a = m.mul_vec(&u);
                let b = apply_operator(&grid, &params, OperatorParts::default(), &u).unwrap();
                let err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
                assert!(err < 1e-12, "({n_x},{n_v}) max err {err}");
            }
        }
    }

    #[test]
    fn rhs_places_negated_source_in_field_slots() {
        let (grid, params) = setup(3, 2);
        let b = assemble_rhs(&grid, &params).unwrap();
        let layout = grid.layout();
        let j = params.source.sample(&grid).unwrap();
        for ix in 0..8 {
            assert_eq!(b[layout.flat(ix, 0, 1)], -j[ix]);
            assert_eq!(b[layout.flat(ix, 0, 0)].norm(), 0.0);
            assert_eq!(b[layout.flat(ix, 1, 1)].norm(), 0.0);
        }
    }

    #[test]
    fn rhs_rejects_zero_source() {
        let (grid, mut params) = setup(3, 2);
        params.source = SourceSpec::Table(vec![(0.0, 0.0); 8]);
        assert!(assemble_rhs(&grid, &params).is_err());
    }

    use crate::problem::SourceSpec;

    #[test]
    fn classical_solve_round_trips() {
        let (grid, params) = setup(3, 2);
        let m = assemble_operator(&grid, &params, OperatorParts::default()).unwrap();
        let b = assemble_rhs(&grid, &params).unwrap();
        let x = solve_classical(&m, &b).unwrap();
        let r: Vec<_> = m.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) / norm(&b) < 1e-10);
    }

    #[test]
    fn solve_scaled_identity() {
        let m = ComplexMatrix::<f64>::identity(4).scale(Complex::new(0.0, 2.0));
        let b = vec![Complex::new(1.0, 0.0); 4];
        let x = solve_classical(&m, &b).unwrap();
        for v in x {
            assert!((v - Complex::new(0.0, -0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn condition_of_diagonal() {
        let mut m = ComplexMatrix::<f64>::zeros(2, 2);
        m[(0, 0)] = Complex::new(1.0, 0.0);
        m[(1, 1)] = Complex::new(0.0, 2.0);
        let sv = m.singular_values();
        assert!((sv[0] / sv[1] - 2.0).abs() < 1e-13);
    }
}
