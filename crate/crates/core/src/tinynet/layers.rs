use super::real::Real;

/// Column matrix for 3x3 convolution with padding 1: row `k = c*9 + ky*3 + kx`,
/// column `p = y*w + x` holds the input value under that tap, zero outside.
pub(crate) struct Im2Col {
    channels: usize,
    h: usize,
    w: usize,
    pub rows: usize,
    pub cols: usize,
}

/// For tap offset `kx`, the output columns `x` whose source `x + kx - 1`
/// lies inside a row of width `w`, and that source start.
fn tap_span(kx: usize, w: usize) -> (usize, usize, usize) {
    match kx {
        0 => (1, w, 0),
        1 => (0, w, 0),
        _ => (0, w - 1, 1),
    }
}

impl Im2Col {
    pub fn new(channels: usize, h: usize, w: usize) -> Self {
        Self { channels, h, w, rows: channels * 9, cols: h * w }
    }

    #[inline(always)]
    pub fn gather<T: Real>(&self, input: &[T], out: &mut [T]) {
        let (h, w) = (self.h, self.w);
        for c in 0..self.channels {
            let plane = &input[c * h * w..(c + 1) * h * w];
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = c * 9 + ky * 3 + kx;
                    let row = &mut out[k * h * w..(k + 1) * h * w];
                    let (x0, x1, sx0) = tap_span(kx, w);
                    for y in 0..h {
                        let dst = &mut row[y * w..(y + 1) * w];
                        let sy = y + ky;
                        if sy == 0 || sy > h {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[(sy - 1) * w..sy * w];
                        dst[..x0].fill(T::zero());
                        dst[x1..].fill(T::zero());
                        dst[x0..x1].copy_from_slice(&src[sx0..sx0 + (x1 - x0)]);
                    }
                }
            }
        }
    }

    #[inline(always)]
    pub fn scatter_add<T: Real>(&self, dcols: &[T], dinput: &mut [T]) {
        let (h, w) = (self.h, self.w);
        for c in 0..self.channels {
            let plane = &mut dinput[c * h * w..(c + 1) * h * w];
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = c * 9 + ky * 3 + kx;
                    let row = &dcols[k * h * w..(k + 1) * h * w];
                    let (x0, x1, sx0) = tap_span(kx, w);
                    for y in 0..h {
                        let sy = y + ky;
                        if sy == 0 || sy > h {
                            continue;
                        }
                        let dst = &mut plane[(sy - 1) * w + sx0..(sy - 1) * w + sx0 + (x1 - x0)];
                        for (d, &g) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                            *d = *d + g;
                        }
                    }
                }
            }
        }
    }
}

#[inline(always)]
pub(crate) fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

#[inline(always)]
pub(crate) fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..8 {
            acc[l] = acc[l] + a[l] * b[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (a, b) in xr.iter().zip(yr) {
        s = s + *a * *b;
    }
    s
}

const MR: usize = 4;
const NR: usize = 8;

/// Starting value of each output element in [`gemm`].
#[derive(Clone, Copy)]
pub(crate) enum Init<'a, T> {
    Zero,
    RowBias(&'a [T]),
}

/// `out[i, :] = start + Σ_k a[i, k] b[k, :]` for row-major `a` (`m x k`)
/// and `b` (`k x n`), summing over `k` in order. Register-blocked in
/// `MR x NR` tiles.
#[inline(always)]
pub(crate) fn gemm<T: Real>(a: &[T], b: &[T], init: Init<'_, T>, m: usize, k: usize, n: usize, out: &mut [T]) {
    assert!(a.len() == m * k && b.len() == k * n && out.len() == m * n);
    let mut i = 0;
    while i + MR <= m {
        let rows: [&[T]; MR] = std::array::from_fn(|r| &a[(i + r) * k..(i + r + 1) * k]);
        let mut j = 0;
        while j + NR <= n {
            let mut acc = [[T::zero(); NR]; MR];
            for (r, tile) in acc.iter_mut().enumerate() {
                match init {
                    Init::Zero => {}
                    Init::RowBias(bias) => *tile = [bias[i + r]; NR],
                }
            }
            for (kk, bk) in b.chunks_exact(n).enumerate() {
                let bv: &[T; NR] = bk[j..j + NR].try_into().unwrap();
                for r in 0..MR {
                    let av = rows[r][kk];
                    for c in 0..NR {
                        acc[r][c] = acc[r][c] + av * bv[c];
                    }
                }
            }
            for (r, tile) in acc.iter().enumerate() {
                out[(i + r) * n + j..(i + r) * n + j + NR].copy_from_slice(tile);
            }
            j += NR;
        }
        for r in 0..MR {
            gemm_row_tail(rows[r], b, init, i + r, j, n, &mut out[(i + r) * n..(i + r + 1) * n]);
        }
        i += MR;
    }
    for r in i..m {
        gemm_row_tail(&a[r * k..(r + 1) * k], b, init, r, 0, n, &mut out[r * n..(r + 1) * n]);
    }
}

#[inline(always)]
fn gemm_row_tail<T: Real>(a_row: &[T], b: &[T], init: Init<'_, T>, row: usize, from: usize, n: usize, out_row: &mut [T]) {
    if from == n {
        return;
    }
    let dst = &mut out_row[from..];
    match init {
        Init::Zero => dst.fill(T::zero()),
        Init::RowBias(bias) => dst.fill(bias[row]),
    }
    for (kk, &av) in a_row.iter().enumerate() {
        axpy(av, &b[kk * n + from..(kk + 1) * n], dst);
    }
}

#[inline(always)]
pub(crate) fn transpose_into<T: Real>(src: &[T], rows: usize, cols: usize, dst: &mut Vec<T>) {
    dst.clear();
    dst.resize(rows * cols, T::zero());
    for (r, row) in src.chunks_exact(cols).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            dst[c * rows + r] = v;
        }
    }
}

/// `out[o, :] = b[o] + Σ_k w[o, k] cols[k, :]`.
#[inline(always)]
pub(crate) fn conv_forward<T: Real>(w: &[T], b: &[T], cols: &[T], rows: usize, n: usize, out: &mut [T]) {
    gemm(w, cols, Init::RowBias(b), b.len(), rows, n, out);
}

/// Accumulates weight and bias gradients, and optionally overwrites the
/// gradient with respect to the column matrix. `scratch` holds transposes.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
pub(crate) fn conv_backward<T: Real>(
    w: &[T],
    cols: &[T],
    dz: &[T],
    rows: usize,
    n: usize,
    dw: &mut [T],
    db: &mut [T],
    dcols: Option<&mut [T]>,
    scratch: &mut Vec<T>,
    dwt_buf: &mut Vec<T>,
) {
    let outs = db.len();
    for (o, dz_row) in dz.chunks_exact(n).enumerate() {
        db[o] = db[o] + dz_row.iter().copied().sum::<T>();
    }
    // dWᵀ = cols dzᵀ, so the narrow output-channel count is the tile width
    transpose_into(dz, outs, n, scratch);
    let mut dwt = std::mem::take(dwt_buf);
    dwt.resize(rows * outs, T::zero());
    gemm(cols, scratch, Init::Zero, rows, n, outs, &mut dwt);
    for (k, row) in dwt.chunks_exact(outs).enumerate() {
        for (o, &g) in row.iter().enumerate() {
            dw[o * rows + k] = dw[o * rows + k] + g;
        }
    }
    *dwt_buf = dwt;
    if let Some(dcols) = dcols {
        // dcols = wᵀ dz
        transpose_into(w, outs, rows, scratch);
        gemm(scratch, dz, Init::Zero, rows, outs, n, dcols);
    }
}

/// `out = b + W x`.
#[inline(always)]
pub(crate) fn dense_forward<T: Real>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let inp = x.len();
    for (o, y) in out.iter_mut().enumerate() {
        *y = b[o] + dot(&w[o * inp..(o + 1) * inp], x);
    }
}

/// Accumulates `dW += g xᵀ`, `db += g`; overwrites `dx = Wᵀ g` when given.
#[inline(always)]
pub(crate) fn dense_backward<T: Real>(w: &[T], x: &[T], g: &[T], dw: &mut [T], db: &mut [T], dx: Option<&mut [T]>) {
    let inp = x.len();
    for (o, &go) in g.iter().enumerate() {
        if go != T::zero() {
            axpy(go, x, &mut dw[o * inp..(o + 1) * inp]);
        }
        db[o] = db[o] + go;
    }
    if let Some(dx) = dx {
        dx.fill(T::zero());
        for (o, &go) in g.iter().enumerate() {
            if go != T::zero() {
                axpy(go, &w[o * inp..(o + 1) * inp], dx);
            }
        }
    }
}

#[inline(always)]
pub(crate) fn relu_inplace<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Zeroes gradient entries where the ReLU output was not positive.
#[inline(always)]
pub(crate) fn relu_mask<T: Real>(activation: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// 2x2 stride-2 max pooling over `c` planes of `h x w`; odd edges are
/// dropped. `arg` receives the input index of each maximum (first on ties).
#[inline(always)]
pub(crate) fn maxpool_forward<T: Real>(input: &[T], c: usize, h: usize, w: usize, out: &mut [T], arg: &mut [u32]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let base = ch * h * w + 2 * y * w + 2 * x;
                let mut best = base;
                for idx in [base + 1, base + w, base + w + 1] {
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                let o = ch * oh * ow + y * ow + x;
                out[o] = input[best];
                arg[o] = best as u32;
            }
        }
    }
}

#[inline(always)]
pub(crate) fn maxpool_backward<T: Real>(dout: &[T], arg: &[u32], dinput: &mut [T]) {
    dinput.fill(T::zero());
    for (&g, &a) in dout.iter().zip(arg) {
        dinput[a as usize] = dinput[a as usize] + g;
    }
}

#[inline(always)]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Label-smoothed cross-entropy from logits. Writes `softmax - target` into
/// `grad` and returns the loss. The target puts `1 - ε + ε/C` on `label` and
/// `ε/C` on every other class.
#[inline(always)]
pub(crate) fn smoothed_cross_entropy<T: Real>(logits: &[T], label: usize, smoothing: T, grad: &mut [T]) -> T {
    let c = T::of(logits.len() as f64);
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    let off = smoothing / c;
    let mut loss = T::zero();
    for (i, (&l, g)) in logits.iter().zip(grad.iter_mut()).enumerate() {
        let q = if i == label { T::one() - smoothing + off } else { off };
        loss = loss - q * (l - lse);
        *g = (l - lse).exp() - q;
    }
    loss
}


#[cfg(test)]
mod gemm_tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_order() {
        for (m, k, n) in [(1, 1, 1), (4, 3, 8), (5, 7, 19), (9, 2, 16), (3, 5, 4)] {
            let a: Vec<f32> = (0..m * k).map(|i| ((i * 37 % 11) as f32 - 5.0) * 0.13).collect();
            let b: Vec<f32> = (0..k * n).map(|i| ((i * 17 % 13) as f32 - 6.0) * 0.07).collect();
            let init: Vec<f32> = (0..m).map(|i| i as f32 * 0.5).collect();
            let mut out = vec![0.0; m * n];
            gemm(&a, &b, Init::RowBias(&init), m, k, n, &mut out);
            for i in 0..m {
                for j in 0..n {
                    let mut acc = init[i];
                    for kk in 0..k {
                        acc += a[i * k + kk] * b[kk * n + j];
                    }
                    assert_eq!(out[i * n + j].to_bits(), acc.to_bits());
                }
            }
        }
    }
}

#[cfg(test)]
mod im2col_tests {
    use super::*;

    /// Direct definition: tap (c, ky, kx) at (y, x) reads (c, y+ky-1, x+kx-1).
    fn reference(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for ch in 0..c {
            for ky in 0..3 {
                for kx in 0..3 {
                    for y in 0..h {
                        for x in 0..w {
                            let (sy, sx) = (y as isize + ky as isize - 1, x as isize + kx as isize - 1);
                            let inside = sy >= 0 && sx >= 0 && sy < h as isize && sx < w as isize;
                            out.push(if inside { input[ch * h * w + sy as usize * w + sx as usize] } else { 0.0 });
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn gather_and_scatter_match_definition() {
        let (c, h, w) = (2, 3, 5);
        let input: Vec<f64> = (0..c * h * w).map(|v| v as f64 + 1.0).collect();
        let t = Im2Col::new(c, h, w);
        let mut cols = vec![0.0; t.rows * t.cols];
        t.gather(&input, &mut cols);
        assert_eq!(cols, reference(&input, c, h, w));
        // scatter_add is the adjoint of gather: <gather(x), g> = <x, scatter(g)>
        let g: Vec<f64> = (0..cols.len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let mut back = vec![0.0; input.len()];
        t.scatter_add(&g, &mut back);
        let lhs: f64 = cols.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = input.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }
}
