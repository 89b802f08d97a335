//! Classical description of the discretized problem: plasma parameters,
//! phase-space grid, Maxwellian background and the state-vector layout.
//!
//! The frequency-domain system solved everywhere else is
//! `(i*omega0*I + A) psi = b` over a state holding the distribution
//! perturbation `g(x, v)` in the field-sector-0 slots and the electric field
//! `E(x)` in the (v = 0, sector 1) slots. This module is the plain-matrix
//! side of every check: nothing in here knows about circuits.

mod assemble;

pub use assemble::{
    apply_operator, assemble_grad_x, assemble_operator, assemble_rhs, condition_report,
    solve_classical, zeta_mask, ConditionReport, OperatorParts,
};

use crate::{Error, Result, Scalar};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Spatial profile of a real background quantity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSpec<T> {
    Constant(T),
    Gaussian { amplitude: T, center: T, sigma: T },
    /// Values per grid point; length must equal `2^n_x` at assembly time.
    Table(Vec<T>),
}

impl<T: Scalar> ProfileSpec<T> {
    /// Sample on the position grid.
    pub fn sample(&self, grid: &GridSpec<T>) -> Result<Vec<T>> {
        let n = grid.x_points.len();
        match self {
            ProfileSpec::Constant(c) => Ok(vec![*c; n]),
            ProfileSpec::Gaussian { amplitude, center, sigma } => Ok(grid
                .x_points
                .iter()
                .map(|&x| {
                    let z = (x - *center) / *sigma;
                    *amplitude * (-z * z / T::of(2.0)).exp()
                })
                .collect()),
            ProfileSpec::Table(t) => {
                if t.len() != n {
                    return Err(Error::ProfileLength { got: t.len(), need: n });
                }
                Ok(t.clone())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ProfileSpec::Constant(_) => true,
            ProfileSpec::Gaussian { .. } => false,
            ProfileSpec::Table(t) => t.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

/// Drive current `j(x)`, possibly complex.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec<T> {
    Gaussian { amplitude: T, center: T, sigma: T },
    /// (re, im) per grid point.
    Table(Vec<(T, T)>),
}

impl<T: Scalar> SourceSpec<T> {
    pub fn sample(&self, grid: &GridSpec<T>) -> Result<Vec<Complex<T>>> {
        let n = grid.x_points.len();
        match self {
            SourceSpec::Gaussian { amplitude, center, sigma } => Ok(grid
                .x_points
                .iter()
                .map(|&x| {
                    let z = (x - *center) / *sigma;
                    Complex::new(*amplitude * (-z * z / T::of(2.0)).exp(), T::zero())
                })
                .collect()),
            SourceSpec::Table(t) => {
                if t.len() != n {
                    return Err(Error::ProfileLength { got: t.len(), need: n });
                }
                Ok(t.iter().map(|&(re, im)| Complex::new(re, im)).collect())
            }
        }
    }
}

/// Physical parameters of a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct PlasmaParams<T: Scalar> {
    /// Drive frequency; must be positive (keeps the operator invertible).
    pub omega0: T,
    /// Position domain is `[0, x_max)`.
    pub x_max: T,
    /// Velocity domain is `[-v_max, v_max)`.
    pub v_max: T,
    pub density: ProfileSpec<T>,
    pub temperature: ProfileSpec<T>,
    pub source: SourceSpec<T>,
}

impl<T: Scalar> Default for PlasmaParams<T> {
    fn default() -> Self {
        let x_max = T::of(10.0);
        Self {
            omega0: T::of(1.2),
            x_max,
            v_max: T::of(4.0),
            density: ProfileSpec::Constant(T::one()),
            temperature: ProfileSpec::Constant(T::one()),
            source: SourceSpec::Gaussian {
                amplitude: T::one(),
                center: x_max / T::of(2.0),
                sigma: x_max / T::of(8.0),
            },
        }
    }
}

/// Discretization of phase space.
///
/// Positions are `x_i = i * dx` with `dx = x_max / 2^n_x`. Velocities use a
/// two's-complement register convention: index `i` holds the signed value
/// `signed(i) * dv` with `dv = 2 v_max / 2^n_v`, so index 0 is `v = 0` and
/// index `2^(n_v-1)` is `-v_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub n_x: usize,
    pub n_v: usize,
    pub dx: T,
    pub dv: T,
    pub x_points: Vec<T>,
    pub v_points: Vec<T>,
}

/// Minimum position-register width; the one-sided boundary stencils need the
/// halves of the position grid to hold at least 4 points each.
pub const MIN_N_X: usize = 3;

pub fn make_grid<T: Scalar>(params: &PlasmaParams<T>, n_x: usize, n_v: usize) -> Result<GridSpec<T>> {
    if n_x < MIN_N_X {
        return Err(Error::InvalidGrid(format!("n_x = {n_x} < {MIN_N_X}")));
    }
    if n_v < 1 {
        return Err(Error::InvalidGrid("n_v must be at least 1".into()));
    }
    if n_x + n_v > 24 {
        return Err(Error::InvalidGrid(format!("grid 2^{} points is beyond this workbench", n_x + n_v)));
    }
    if params.x_max <= T::zero() || params.v_max <= T::zero() {
        return Err(Error::InvalidGrid("x_max and v_max must be positive".into()));
    }
    if params.omega0 <= T::zero() {
        return Err(Error::InvalidGrid("omega0 must be positive".into()));
    }
    let nx_points = 1usize << n_x;
    let nv_points = 1usize << n_v;
    let dx = params.x_max / T::of(nx_points as f64);
    let dv = T::of(2.0) * params.v_max / T::of(nv_points as f64);
    let x_points = (0..nx_points).map(|i| T::of(i as f64) * dx).collect();
    let v_points = (0..nv_points).map(|i| T::of(signed_index(i, n_v) as f64) * dv).collect();
    Ok(GridSpec { n_x, n_v, dx, dv, x_points, v_points })
}

/// Two's-complement reading of a velocity register value.
#[inline]
pub fn signed_index(i: usize, width: usize) -> i64 {
    let half = 1i64 << (width - 1);
    let i = i as i64;
    if i < half {
        i
    } else {
        i - (half << 1)
    }
}

impl<T: Scalar> GridSpec<T> {
    pub fn layout(&self) -> StateLayout {
        StateLayout { n_x: self.n_x, n_v: self.n_v }
    }

    /// Total state dimension `2^(n_x + n_v + 1)`.
    pub fn dim(&self) -> usize {
        1 << (self.n_x + self.n_v + 1)
    }

    /// Velocity-domain half width: the most negative grid speed is `-v_max`.
    pub fn v_max(&self) -> T {
        self.dv * T::of((1u64 << (self.n_v - 1)) as f64)
    }
}

/// Index map between (x, v, field-sector) coordinates and flat basis indices.
///
/// Registers are little-endian and allocated x first, then v, then the
/// sector bit: `flat = x + (v << n_x) + (e << (n_x + n_v))`. This matches the
/// simulator's qubit ordering, so classical matrices and extracted circuit
/// blocks index identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_x: usize,
    pub n_v: usize,
}

impl StateLayout {
    #[inline]
    pub fn flat(&self, x: usize, v: usize, e: usize) -> usize {
        debug_assert!(x < 1 << self.n_x && v < 1 << self.n_v && e < 2);
        x + (v << self.n_x) + (e << (self.n_x + self.n_v))
    }

    #[inline]
    pub fn coords(&self, flat: usize) -> (usize, usize, usize) {
        let x = flat & ((1 << self.n_x) - 1);
        let v = (flat >> self.n_x) & ((1 << self.n_v) - 1);
        let e = flat >> (self.n_x + self.n_v);
        (x, v, e)
    }

    pub fn dim(&self) -> usize {
        1 << (self.n_x + self.n_v + 1)
    }

    /// Indices that carry physical unknowns: the whole sector-0 block (g)
    /// plus the (v = 0, sector 1) slots (E).
    pub fn used_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..1 << (self.n_x + self.n_v)).collect();
        out.extend((0..1 << self.n_x).map(|x| self.flat(x, 0, 1)));
        out
    }

    /// Padding slots (sector 1, v != 0); the operator is `i*omega0` diagonal
    /// there and the right-hand side is zero.
    pub fn unused_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for v in 1..1 << self.n_v {
            for x in 0..1 << self.n_x {
                out.push(self.flat(x, v, 1));
            }
        }
        out
    }
}

/// Maxwellian background `F(n, T, v) = n / sqrt(2 pi T) * exp(-v^2 / (2T))`.
#[inline]
pub fn maxwellian<T: Scalar>(density: T, temperature: T, v: T) -> T {
    let two_pi_t = T::of(2.0) * T::PI() * temperature;
    density / two_pi_t.sqrt() * (-v * v / (T::of(2.0) * temperature)).exp()
}

/// Velocity derivative of the Maxwellian: `-(v / T) * F`.
#[inline]
pub fn dv_maxwellian<T: Scalar>(density: T, temperature: T, v: T) -> T {
    -(v / temperature) * maxwellian(density, temperature, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PlasmaParams<f64> {
        PlasmaParams::default()
    }

    #[test]
    fn grid_spacing_examples() {
        let mut p = params();
        p.x_max = 8.0;
        let g = make_grid(&p, 3, 2).unwrap();
        assert_eq!(g.dx, 1.0);
        assert_eq!(g.x_points, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn velocity_points_follow_twos_complement_order() {
        let mut p = params();
        p.v_max = 1.0;
        let g = make_grid(&p, 3, 2).unwrap();
        assert_eq!(g.dv, 0.5);
        assert_eq!(g.v_points, vec![0.0, 0.5, -1.0, -0.5]);
    }

    #[test]
    fn velocity_points_match_rolled_linspace_oracle() {
        // independent construction: ascending linspace over [-v_max, v_max),
        // rotated by half so the signed register order comes out
        for n_v in 1..=6 {
            let p = params();
            let g = make_grid(&p, 3, n_v).unwrap();
            let n = 1usize << n_v;
            let dv = 2.0 * p.v_max / n as f64;
            let ascending: Vec<f64> = (0..n).map(|k| -p.v_max + k as f64 * dv).collect();
            let rolled: Vec<f64> = (0..n).map(|i| ascending[(i + n / 2) % n]).collect();
            for (a, b) in g.v_points.iter().zip(&rolled) {
                assert!((a - b).abs() < 1e-14, "n_v={n_v}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn grid_rejects_small_position_register() {
        assert!(make_grid(&params(), 2, 2).is_err());
        assert!(make_grid(&params(), 3, 0).is_err());
    }

    #[test]
    fn grid_rejects_bad_params() {
        let mut p = params();
        p.omega0 = 0.0;
        assert!(make_grid(&p, 3, 2).is_err());
        let mut p = params();
        p.v_max = -1.0;
        assert!(make_grid(&p, 3, 2).is_err());
    }

    #[test]
    fn maxwellian_peak_value() {
        let f0 = maxwellian(1.0, 1.0, 0.0);
        assert!((f0 - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!(maxwellian(1.0, 1.0, 1.0) < f0);
        assert!(maxwellian(1.0, 1.0, 2.0) < maxwellian(1.0, 1.0, 1.0));
    }

    #[test]
    fn dv_maxwellian_matches_central_difference() {
        let h = 1e-4;
        for &(n, t) in &[(1.0f64, 1.0f64), (0.7, 2.3)] {
            for &v in &[-2.5f64, -0.3, 0.0, 0.4, 1.9] {
                let fd = (maxwellian(n, t, v + h) - maxwellian(n, t, v - h)) / (2.0 * h);
                assert!(
                    (dv_maxwellian(n, t, v) - fd).abs() < 1e-6,
                    "n={n} t={t} v={v}"
                );
            }
        }
    }

    #[test]
    fn dv_maxwellian_is_odd_in_v() {
        assert_eq!(dv_maxwellian(1.0, 1.0, 0.0), 0.0);
        let a: f64 = dv_maxwellian(1.0, 1.0, 0.8);
        let b = dv_maxwellian(1.0, 1.0, -0.8);
        assert!((a + b).abs() < 1e-15);
        assert!(a < 0.0); // F falls off for growing positive v
    }

    #[test]
    fn layout_round_trip_and_used_slots() {
        let l = StateLayout { n_x: 3, n_v: 2 };
        assert_eq!(l.dim(), 64);
        for flat in 0..l.dim() {
            let (x, v, e) = l.coords(flat);
            assert_eq!(l.flat(x, v, e), flat);
        }
        let used = l.used_indices();
        let unused = l.unused_indices();
        assert_eq!(used.len() + unused.len(), 64);
        assert_eq!(used.len(), 32 + 8);
        // E slots sit at v = 0 in sector 1
        assert!(used.contains(&l.flat(5, 0, 1)));
        assert!(unused.contains(&l.flat(5, 1, 1)));
    }

    #[test]
    fn table_profile_length_checked() {
        let p = params();
        let g = make_grid(&p, 3, 2).unwrap();
        let bad = ProfileSpec::Table(vec![1.0; 7]);
        assert!(bad.sample(&g).is_err());
        let good = ProfileSpec::Table(vec![1.0; 8]);
        assert_eq!(good.sample(&g).unwrap().len(), 8);
    }

    #[test]
    fn f32_instantiation_smoke() {
        let p = PlasmaParams::<f32>::default();
        let g = make_grid(&p, 3, 2).unwrap();
        assert!((g.dx - 1.25f32).abs() < 1e-6);
        let f = maxwellian(1.0f32, 1.0, 0.0);
        assert!((f - 0.398_942f32).abs() < 1e-5);
    }
}
