//! Dense statevector simulation of the gate IR.
//!
//! Interprets every gate kind natively, including polarity controls on
//! anything and in-place constant adders (applied as index permutations).
//! Also hosts the two extraction routines the verification layer is built
//! on: full unitaries of small circuits and the `<0|U|0>` sub-blocks of
//! block encodings.

use crate::circuit::{Circuit, Gate};
use crate::linalg::ComplexMatrix;
use crate::{Error, Result, Scalar};
use num_complex::Complex;

/// Hard cap for full unitary extraction; `2^14` columns of `2^14` entries.
pub const UNITARY_WIDTH_LIMIT: usize = 14;
/// Hard cap on the data register for block extraction.
pub const BLOCK_DATA_LIMIT: usize = 10;

#[derive(Debug, Clone)]
pub struct StateVector<T> {
    width: usize,
    pub amps: Vec<Complex<T>>,
}

impl<T: Scalar> StateVector<T> {
    /// |0...0> on `width` qubits.
    pub fn zero(width: usize) -> Self {
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << width];
        amps[0] = Complex::new(T::one(), T::zero());
        Self { width, amps }
    }

    /// Basis state |index>.
    pub fn basis(width: usize, index: usize) -> Self {
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << width];
        amps[index] = Complex::new(T::one(), T::zero());
        Self { width, amps }
    }

    pub fn from_amplitudes(width: usize, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != 1 << width {
            return Err(Error::Dimension(format!(
                "state length {} vs 2^{width}",
                amps.len()
            )));
        }
        Ok(Self { width, amps })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn norm(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn apply(&mut self, gate: &Gate<T>) {
        apply_gate(&mut self.amps, gate);
    }

    pub fn apply_all(&mut self, gates: &[Gate<T>]) {
        for g in gates {
            self.apply(g);
        }
    }

    pub fn apply_circuit(&mut self, circ: &Circuit<T>) {
        debug_assert!(self.width >= circ.width());
        self.apply_all(circ.gates());
    }
}

fn control_masks(gate: &Gate<impl Scalar>) -> (usize, usize) {
    let mut mask = 0usize;
    let mut val = 0usize;
    for c in gate.controls() {
        mask |= 1 << c.qubit;
        if c.on {
            val |= 1 << c.qubit;
        }
    }
    (mask, val)
}

/// Enumerate the indices `i` with `i & fixed_mask == fixed_val`, in
/// increasing order, calling `f` once per index. Carries propagate through
/// the fixed bits, so the walk costs O(1) per visited index.
#[inline]
fn for_each_in_subspace(n: usize, fixed_mask: usize, fixed_val: usize, mut f: impl FnMut(usize)) {
    let count = n >> fixed_mask.count_ones();
    let mut free = 0usize;
    for _ in 0..count {
        f(free | fixed_val);
        free = (free | fixed_mask).wrapping_add(1) & !fixed_mask;
    }
}

/// Apply one gate to a raw amplitude slice of length `2^width`; only the
/// subspace selected by the controls is visited.
pub fn apply_gate<T: Scalar>(amps: &mut [Complex<T>], gate: &Gate<T>) {
    let n = amps.len();
    let (cmask, cval) = control_masks(gate);
    match gate {
        Gate::X { target, .. } => {
            let t = 1usize << target;
            for_each_in_subspace(n, cmask | t, cval, |i| amps.swap(i, i | t));
        }
        Gate::H { target, .. } => {
            let t = 1usize << target;
            let s = T::FRAC_1_SQRT_2();
            for_each_in_subspace(n, cmask | t, cval, |i| {
                let a = amps[i];
                let b = amps[i | t];
                amps[i] = (a + b) * s;
                amps[i | t] = (a - b) * s;
            });
        }
        Gate::Z { target, .. } => {
            let t = 1usize << target;
            for_each_in_subspace(n, cmask | t, cval | t, |i| amps[i] = -amps[i]);
        }
        Gate::Ry { theta, target, .. } => {
            let t = 1usize << target;
            let half = *theta / T::of(2.0);
            let c = half.cos();
            let s = half.sin();
            for_each_in_subspace(n, cmask | t, cval, |i| {
                let a = amps[i];
                let b = amps[i | t];
                amps[i] = a * c - b * s;
                amps[i | t] = a * s + b * c;
            });
        }
        Gate::Rz { theta, target, .. } => {
            let t = 1usize << target;
            let half = *theta / T::of(2.0);
            let lo = Complex::new(half.cos(), -half.sin());
            let hi = Complex::new(half.cos(), half.sin());
            for_each_in_subspace(n, cmask | t, cval, |i| amps[i] = amps[i] * lo);
            for_each_in_subspace(n, cmask | t, cval | t, |i| amps[i] = amps[i] * hi);
        }
        Gate::Phase { theta, target, .. } => {
            let t = 1usize << target;
            let ph = Complex::new(theta.cos(), theta.sin());
            for_each_in_subspace(n, cmask | t, cval | t, |i| amps[i] = amps[i] * ph);
        }
        Gate::AddConst { k, targets, .. } => {
            let m = targets.len();
            let modulus = 1u64 << m;
            let shift = (k % modulus) as usize;
            if shift == 0 {
                return;
            }
            let tmask: usize = targets.iter().map(|&q| 1usize << q).sum();
            let spread = |x: usize| -> usize {
                let mut out = 0usize;
                for (bit, &q) in targets.iter().enumerate() {
                    out |= ((x >> bit) & 1) << q;
                }
                out
            };
            let sub: Vec<usize> = (0..1usize << m).map(spread).collect();
            let mut scratch = vec![Complex::new(T::zero(), T::zero()); 1 << m];
            for_each_in_subspace(n, cmask | tmask, cval, |base| {
                for (x, &off) in sub.iter().enumerate() {
                    scratch[x] = amps[base | off];
                }
                for (x, &val) in scratch.iter().enumerate() {
                    amps[base | sub[(x + shift) & (modulus as usize - 1)]] = val;
                }
            });
        }
    }
}

/// Full matrix of a circuit; refuses widths past [`UNITARY_WIDTH_LIMIT`].
pub fn extract_unitary<T: Scalar>(circ: &Circuit<T>) -> Result<ComplexMatrix<T>> {
    let w = circ.width();
    if w > UNITARY_WIDTH_LIMIT {
        return Err(Error::WidthGuard { width: w, what: "unitary extraction".into(), limit: UNITARY_WIDTH_LIMIT });
    }
    let dim = 1usize << w;
    let mut u = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut state = StateVector::basis(w, col);
        state.apply_circuit(circ);
        u.column_mut(col).copy_from_slice(&state.amps);
    }
    Ok(u)
}

/// `scale * <0|_rest U |0>_rest` over the listed data qubits (LSB first);
/// every qubit not in `data` must enter and be read out as |0>.
pub fn extract_block<T: Scalar>(circ: &Circuit<T>, data: &[usize], scale: T) -> Result<ComplexMatrix<T>> {
    let w = circ.width();
    let k = data.len();
    if k > BLOCK_DATA_LIMIT {
        return Err(Error::WidthGuard { width: k, what: "block extraction data register".into(), limit: BLOCK_DATA_LIMIT });
    }
    for &q in data {
        if q >= w {
            return Err(Error::QubitRange { qubit: q, width: w });
        }
    }
    let spread = |x: usize| -> usize {
        let mut out = 0usize;
        for (bit, &q) in data.iter().enumerate() {
            out |= ((x >> bit) & 1) << q;
        }
        out
    };
    let dim = 1usize << k;
    let rows: Vec<usize> = (0..dim).map(spread).collect();
    let mut m = ComplexMatrix::zeros(dim, dim);
    let s = Complex::new(scale, T::zero());
    for col in 0..dim {
        let mut state = StateVector::basis(w, rows[col]);
        state.apply_circuit(circ);
        let out = m.column_mut(col);
        for (r, &idx) in rows.iter().enumerate() {
            out[r] = state.amps[idx] * s;
        }
    }
    Ok(m)
}

/// Amplitudes of the component with the `fixed` qubits pinned to the given
/// bits, enumerated over the `free` qubits (LSB first), together with the
/// component's squared norm. `fixed` and `free` must partition the width.
pub fn project_component<T: Scalar>(
    state: &StateVector<T>,
    fixed: &[(usize, bool)],
    free: &[usize],
) -> Result<(Vec<Complex<T>>, T)> {
    let w = state.width();
    let mut seen = vec![false; w];
    for &(q, _) in fixed {
        if q >= w {
            return Err(Error::QubitRange { qubit: q, width: w });
        }
        seen[q] = true;
    }
    for &q in free {
        if q >= w {
            return Err(Error::QubitRange { qubit: q, width: w });
        }
        if seen[q] {
            return Err(Error::QubitCollision(q));
        }
        seen[q] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Dimension("fixed and free qubits must cover the state".into()));
    }
    let base: usize = fixed.iter().filter(|&&(_, on)| on).map(|&(q, _)| 1usize << q).sum();
    let mut out = Vec::with_capacity(1 << free.len());
    let mut p = T::zero();
    for x in 0..1usize << free.len() {
        let mut idx = base;
        for (bit, &q) in free.iter().enumerate() {
            idx |= ((x >> bit) & 1) << q;
        }
        let z = state.amps[idx];
        p += z.norm_sqr();
        out.push(z);
    }
    Ok((out, p))
}
