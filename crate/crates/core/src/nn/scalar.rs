//! Floating-point element type used by the network, with a strided GEMM.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Row/column strides of a matrix operand, in elements.
#[derive(Debug, Clone, Copy)]
pub struct Strides {
    pub row: usize,
    pub col: usize,
}

impl Strides {
    pub const fn row_major(cols: usize) -> Self {
        Strides { row: cols, col: 1 }
    }

    /// Column-major view of the same buffer, i.e. the transpose of
    /// `row_major(cols)`.
    pub const fn transposed(cols: usize) -> Self {
        Strides { row: 1, col: cols }
    }

    fn max_index(&self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * self.row + (cols - 1) * self.col
        }
    }
}

pub trait Scalar:
    Float + Sum + Default + Debug + Send + Sync + 'static
{
    /// Raw BLAS-style kernel; see [`gemm`] for the checked wrapper.
    ///
    /// # Safety
    /// Every strided access must stay inside the pointed-to allocations.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        sa: Strides,
        b: *const Self,
        sb: Strides,
        beta: Self,
        c: *mut Self,
        sc: Strides,
    );

    fn from_f64_lossy(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline(always)]
    fn from_f64_lossy(v: f64) -> f32 {
        v as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        sa: Strides,
        b: *const f32,
        sb: Strides,
        beta: f32,
        c: *mut f32,
        sc: Strides,
    ) {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a,
            sa.row as isize,
            sa.col as isize,
            b,
            sb.row as isize,
            sb.col as isize,
            beta,
            c,
            sc.row as isize,
            sc.col as isize,
        );
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64_lossy(v: f64) -> f64 {
        v
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        sa: Strides,
        b: *const f64,
        sb: Strides,
        beta: f64,
        c: *mut f64,
        sc: Strides,
    ) {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a,
            sa.row as isize,
            sa.col as isize,
            b,
            sb.row as isize,
            sb.col as isize,
            beta,
            c,
            sc.row as isize,
            sc.col as isize,
        );
    }
}

/// `C ← A·B + (accumulate ? C : 0)` for an `m×k` by `k×n` product, with
/// arbitrary non-negative strides (overlapping views of `a` are allowed).
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    sa: Strides,
    b: &[T],
    sb: Strides,
    c: &mut [T],
    sc: Strides,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || sa.max_index(m, k) < a.len(), "gemm: A view out of bounds");
    assert!(k == 0 || sb.max_index(k, n) < b.len(), "gemm: B view out of bounds");
    assert!(sc.max_index(m, n) < c.len(), "gemm: C view out of bounds");
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        T::gemm_raw(m, k, n, T::one(), a.as_ptr(), sa, b.as_ptr(), sb, beta, c.as_mut_ptr(), sc);
    }
}
