//! Small dense complex linear algebra: enough for reference assembly,
//! direct solves and singular-value checks at verification sizes.

use crate::{Error, Result, Scalar};
use num_complex::Complex;
use std::io::{Read, Write};

/// Dense complex matrix, column-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> &[Complex<T>] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            for k in 0..self.cols {
                let w = other[(k, c)];
                if w.norm_sqr() == T::zero() {
                    continue;
                }
                let src = self.column(k).to_vec();
                let dst = out.column_mut(c);
                for r in 0..src.len() {
                    dst[r] = dst[r] + src[r] * w;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows];
        for (c, w) in v.iter().enumerate() {
            if w.norm_sqr() == T::zero() {
                continue;
            }
            for (r, a) in self.column(c).iter().enumerate() {
                out[r] = out[r] + *a * *w;
            }
        }
        out
    }

    /// Entrywise max |a_ij|.
    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Entrywise max |a_ij - b_ij|; the "max-norm error" used by the checks.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    /// Solve `A x = b` by LU with partial pivoting. Errors when a pivot
    /// falls below 1e-14 (matrix treated as singular).
    pub fn lu_solve(&self, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!("lu_solve needs square matrix, got {}x{}", self.rows, self.cols)));
        }
        if b.len() != self.rows {
            return Err(Error::Dimension(format!("rhs length {} vs matrix order {}", b.len(), self.rows)));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let at = |a: &Vec<Complex<T>>, r: usize, c: usize| a[c * n + r];
        let threshold = T::of(1e-14);

        for k in 0..n {
            // pivot search on column k
            let mut p = k;
            let mut best = at(&a, k, k).norm();
            for r in k + 1..n {
                let v = at(&a, r, k).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < threshold {
                return Err(Error::Singular(best.as_f64()));
            }
            if p != k {
                for c in 0..n {
                    a.swap(c * n + p, c * n + k);
                }
                x.swap(p, k);
            }
            let piv = at(&a, k, k);
            for r in k + 1..n {
                let factor = at(&a, r, k) / piv;
                a[k * n + r] = factor;
                for c in k + 1..n {
                    let v = at(&a, r, c) - factor * at(&a, k, c);
                    a[c * n + r] = v;
                }
            }
        }
        // forward substitution with unit lower triangle
        for r in 1..n {
            let mut acc = x[r];
            for c in 0..r {
                acc = acc - at(&a, r, c) * x[c];
            }
            x[r] = acc;
        }
        // back substitution
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc = acc - at(&a, r, c) * x[c];
            }
            x[r] = acc / at(&a, r, r);
        }
        Ok(x)
    }

    /// Singular values in descending order, by one-sided Jacobi on columns.
    ///
    /// Adequate for the verification sizes here (a few hundred columns);
    /// accuracy is near machine precision because rotations act on the
    /// columns directly.
    pub fn singular_values(&self) -> Vec<T> {
        let mut a = self.clone();
        let n = a.cols;
        let eps = T::epsilon() * T::of(64.0);
        for _sweep in 0..60 {
            let mut off = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    let (app, aqq, apq) = {
                        let cp = a.column(p);
                        let cq = a.column(q);
                        let mut app = T::zero();
                        let mut aqq = T::zero();
                        let mut apq = Complex::new(T::zero(), T::zero());
                        for r in 0..a.rows {
                            app += cp[r].norm_sqr();
                            aqq += cq[r].norm_sqr();
                            apq = apq + cp[r].conj() * cq[r];
                        }
                        (app, aqq, apq)
                    };
                    let denom = (app * aqq).sqrt();
                    if denom == T::zero() || apq.norm() <= eps * denom {
                        continue;
                    }
                    off = off.max(apq.norm() / denom);
                    // twist column q by the phase of the coupling, then a
                    // real Jacobi rotation orthogonalizes the pair
                    let phase = apq / Complex::new(apq.norm(), T::zero());
                    let tau = (aqq - app) / (T::of(2.0) * apq.norm());
                    let t = {
                        let s = if tau >= T::zero() { T::one() } else { -T::one() };
                        s / (tau.abs() + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for r in 0..a.rows {
                        let vp = a[(r, p)];
                        let vq = a[(r, q)] * phase.conj();
                        a[(r, p)] = vp * c - vq * s;
                        a[(r, q)] = vp * s + vq * c;
                    }
                }
            }
            if off <= eps {
                break;
            }
        }
        let mut sv: Vec<T> = (0..n)
            .map(|c| a.column(c).iter().map(|z| z.norm_sqr()).sum::<T>().sqrt())
            .collect();
        sv.sort_by(|x, y| y.partial_cmp(x).expect("singular values are finite"));
        sv
    }

    /// Serialize in the binary dump format: 16-byte header (8-byte magic,
    /// u32 rows, u32 cols, little endian) followed by column-major
    /// (re, im) f64 pairs, little endian.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        for z in &self.data {
            w.write_all(&z.re.as_f64().to_le_bytes())?;
            w.write_all(&z.im.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump(r: &mut impl Read) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..8] != DUMP_MAGIC {
            return Err(Error::DumpFormat("bad magic".into()));
        }
        let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 16];
        for _ in 0..rows * cols {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            data.push(Complex::new(T::of(re), T::of(im)));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn dump_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 16);
        self.write_dump(&mut out).expect("writing to Vec cannot fail");
        out
    }
}

const DUMP_MAGIC: &[u8; 8] = b"VLSVCPX\0";

impl<T> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

/// Write a vector in the dump format (a matrix with one column).
pub fn write_vector_dump<T: Scalar>(v: &[Complex<T>], w: &mut impl Write) -> Result<()> {
    let m = ComplexMatrix { rows: v.len(), cols: 1, data: v.to_vec() };
    m.write_dump(w)
}

pub fn read_vector_dump<T: Scalar>(r: &mut impl Read) -> Result<Vec<Complex<T>>> {
    let m = ComplexMatrix::<T>::read_dump(r)?;
    if m.cols != 1 {
        return Err(Error::DumpFormat(format!("expected 1 column, got {}", m.cols)));
    }
    Ok(m.data)
}

pub fn norm<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// `<a, b>` with conjugation on the left argument.
pub fn inner<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    assert_eq!(a.len(), b.len(), "inner product length mismatch");
    a.iter().zip(b).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * *y)
}

pub fn normalize<T: Scalar>(v: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = norm(v);
    v.iter().map(|z| z / Complex::new(n, T::zero())).collect()
}
