//! Raw numeric kernels behind the differentiable ops.
//!
//! Convolutions use im2col followed by a dense matrix product. The three
//! convolution kernels (forward, input gradient, weight gradient) are each
//! other's adjoints, which is what lets the graph differentiate through a
//! gradient.

use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kh) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kw) / self.stride + 1
    }

    fn col_rows(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.out_h() * self.out_w()
    }

    fn in_plane(&self) -> usize {
        self.in_ch * self.in_h * self.in_w
    }

    fn out_plane(&self) -> usize {
        self.out_ch * self.col_cols()
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

/// `c = a · b + beta · c` where `a` is `m×k`, `b` is `k×n` and `c` is `m×n`
/// with row stride `ldc`. Operands carry explicit row/column strides so
/// transposed views need no copy.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(ldc >= n && c.len() >= (m - 1) * ldc + n);
    // SAFETY: the asserts above bound every index dgemm touches in `a`, `b`
    // and `c`; `c` is row-major with row stride `ldc`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

/// Column buffers are capped at this many values so a tile stays in cache.
const TILE_VALUES: usize = 1 << 15;

/// Output rows per im2col tile.
fn tile_rows(g: &ConvGeom) -> usize {
    (TILE_VALUES / (g.col_rows() * g.out_w()).max(1)).clamp(1, g.out_h().max(1))
}

/// im2col restricted to output rows `r0..r1`; `col` is `K × (r1-r0)·ow`.
fn im2col(x: &[f64], g: &ConvGeom, r0: usize, r1: usize, col: &mut [f64]) {
    let ow = g.out_w();
    let p = (r1 - r0) * ow;
    for c in 0..g.in_ch {
        let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut col[row * p..(row + 1) * p];
                for oi in r0..r1 {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[(oi - r0) * ow..(oi - r0 + 1) * ow];
                    if ii < 0 || ii >= g.in_h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[ii as usize * g.in_w..(ii as usize + 1) * g.in_w];
                    for (oj, v) in line.iter_mut().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        *v = if jj < 0 || jj >= g.in_w as isize {
                            0.0
                        } else {
                            src[jj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates a tile back into `x`.
fn col2im(col: &[f64], g: &ConvGeom, r0: usize, r1: usize, x: &mut [f64]) {
    let ow = g.out_w();
    let p = (r1 - r0) * ow;
    for c in 0..g.in_ch {
        let plane = &mut x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &col[row * p..(row + 1) * p];
                for oi in r0..r1 {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    if ii < 0 || ii >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[ii as usize * g.in_w..(ii as usize + 1) * g.in_w];
                    let line = &src[(oi - r0) * ow..(oi - r0 + 1) * ow];
                    for (oj, &v) in line.iter().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if jj >= 0 && jj < g.in_w as isize {
                            dst[jj as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

fn tiles(g: &ConvGeom) -> impl Iterator<Item = (usize, usize)> {
    let (oh, t) = (g.out_h(), tile_rows(g));
    (0..oh).step_by(t).map(move |r0| (r0, (r0 + t).min(oh)))
}

fn col_buffer(g: &ConvGeom) -> Vec<f64> {
    vec![
        0.0;
        if g.is_pointwise() || use_direct(g) {
            0
        } else {
            g.col_rows() * tile_rows(g) * g.out_w()
        }
    ]
}

/// Layers with this many output channels or fewer skip im2col: building the
/// column matrix would cost as much as the product itself.
const DIRECT_MAX_OUT: usize = 4;

fn use_direct(g: &ConvGeom) -> bool {
    g.stride == 1 && g.out_ch <= DIRECT_MAX_OUT && !g.is_pointwise()
}

/// Output columns `lo..hi` whose input column `oj + kj - pad` is in range.
fn valid_cols(g: &ConvGeom, kj: usize) -> (usize, usize) {
    let lo = g.pad.saturating_sub(kj);
    let hi = (g.in_w + g.pad).saturating_sub(kj).min(g.out_w());
    (lo, hi.max(lo))
}

/// Input row feeding output row `oi` at kernel row `ki`, if inside the image.
fn src_row(g: &ConvGeom, oi: usize, ki: usize) -> Option<usize> {
    (oi + ki).checked_sub(g.pad).filter(|&r| r < g.in_h)
}

fn direct_forward(xb: &[f64], w: &[f64], g: &ConvGeom, y: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (hw, ohw) = (g.in_h * g.in_w, oh * ow);
    y.fill(0.0);
    for o in 0..g.out_ch {
        let yo = &mut y[o * ohw..(o + 1) * ohw];
        for c in 0..g.in_ch {
            let xc = &xb[c * hw..(c + 1) * hw];
            for ki in 0..g.kh {
                for kj in 0..g.kw {
                    let wv = w[((o * g.in_ch + c) * g.kh + ki) * g.kw + kj];
                    let (lo, hi) = valid_cols(g, kj);
                    let shift = lo + kj - g.pad;
                    for oi in 0..oh {
                        let Some(ii) = src_row(g, oi, ki) else {
                            continue;
                        };
                        let src = &xc[ii * g.in_w + shift..ii * g.in_w + shift + (hi - lo)];
                        let dst = &mut yo[oi * ow + lo..oi * ow + hi];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += wv * s);
                    }
                }
            }
        }
    }
}

fn direct_input_grad(gyb: &[f64], w: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (hw, ohw) = (g.in_h * g.in_w, oh * ow);
    dx.fill(0.0);
    for c in 0..g.in_ch {
        let dxc = &mut dx[c * hw..(c + 1) * hw];
        for o in 0..g.out_ch {
            let go = &gyb[o * ohw..(o + 1) * ohw];
            for ki in 0..g.kh {
                for kj in 0..g.kw {
                    let wv = w[((o * g.in_ch + c) * g.kh + ki) * g.kw + kj];
                    let (lo, hi) = valid_cols(g, kj);
                    let shift = lo + kj - g.pad;
                    for oi in 0..oh {
                        let Some(ii) = src_row(g, oi, ki) else {
                            continue;
                        };
                        let src = &go[oi * ow + lo..oi * ow + hi];
                        let dst = &mut dxc[ii * g.in_w + shift..ii * g.in_w + shift + (hi - lo)];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += wv * s);
                    }
                }
            }
        }
    }
}

fn direct_weight_grad(xb: &[f64], gyb: &[f64], g: &ConvGeom, dw: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (hw, ohw) = (g.in_h * g.in_w, oh * ow);
    for o in 0..g.out_ch {
        let go = &gyb[o * ohw..(o + 1) * ohw];
        for c in 0..g.in_ch {
            let xc = &xb[c * hw..(c + 1) * hw];
            for ki in 0..g.kh {
                for kj in 0..g.kw {
                    let (lo, hi) = valid_cols(g, kj);
                    let shift = lo + kj - g.pad;
                    let mut acc = 0.0;
                    for oi in 0..oh {
                        let Some(ii) = src_row(g, oi, ki) else {
                            continue;
                        };
                        let a = &go[oi * ow + lo..oi * ow + hi];
                        let b = &xc[ii * g.in_w + shift..ii * g.in_w + shift + (hi - lo)];
                        acc += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
                    }
                    dw[((o * g.in_ch + c) * g.kh + ki) * g.kw + kj] += acc;
                }
            }
        }
    }
}

/// Cross-correlation without bias: `y[b,o] = Σ_c w[o,c] ⋆ x[b,c]`.
pub(crate) fn conv2d(x: &[f64], w: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.out_plane()];
    let (rows, cols, ow) = (g.col_rows(), g.col_cols(), g.out_w());
    out.par_chunks_mut(g.out_plane().max(1))
        .enumerate()
        .for_each_init(
            || col_buffer(g),
            |col, (b, y)| {
                let xb = &x[b * g.in_plane()..(b + 1) * g.in_plane()];
                if use_direct(g) {
                    direct_forward(xb, w, g, y);
                    return;
                }
                if g.is_pointwise() {
                    gemm(
                        g.out_ch,
                        rows,
                        cols,
                        w,
                        (rows, 1),
                        xb,
                        (cols, 1),
                        0.0,
                        y,
                        cols,
                    );
                    return;
                }
                for (r0, r1) in tiles(g) {
                    let n = (r1 - r0) * ow;
                    im2col(xb, g, r0, r1, col);
                    gemm(
                        g.out_ch,
                        rows,
                        n,
                        w,
                        (rows, 1),
                        col,
                        (n, 1),
                        0.0,
                        &mut y[r0 * ow..],
                        cols,
                    );
                }
            },
        );
    out
}

/// Adjoint of [`conv2d`] with respect to its input (a transposed convolution).
pub(crate) fn conv2d_input_grad(gy: &[f64], w: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut dx = vec![0.0; g.batch * g.in_plane()];
    let (rows, cols, ow) = (g.col_rows(), g.col_cols(), g.out_w());
    dx.par_chunks_mut(g.in_plane().max(1))
        .enumerate()
        .for_each_init(
            || col_buffer(g),
            |col, (b, dxb)| {
                let gyb = &gy[b * g.out_plane()..(b + 1) * g.out_plane()];
                if use_direct(g) {
                    direct_input_grad(gyb, w, g, dxb);
                    return;
                }
                if g.is_pointwise() {
                    gemm(
                        rows,
                        g.out_ch,
                        cols,
                        w,
                        (1, rows),
                        gyb,
                        (cols, 1),
                        0.0,
                        dxb,
                        cols,
                    );
                    return;
                }
                for (r0, r1) in tiles(g) {
                    let n = (r1 - r0) * ow;
                    gemm(
                        rows,
                        g.out_ch,
                        n,
                        w,
                        (1, rows),
                        &gyb[r0 * ow..],
                        (cols, 1),
                        0.0,
                        col,
                        n,
                    );
                    col2im(col, g, r0, r1, dxb);
                }
            },
        );
    dx
}

/// Adjoint of [`conv2d`] with respect to its kernel.
///
/// Samples are accumulated sequentially in batch order so the result is
/// bit-reproducible regardless of thread count.
pub(crate) fn conv2d_weight_grad(x: &[f64], gy: &[f64], g: &ConvGeom) -> Vec<f64> {
    let (rows, cols, ow) = (g.col_rows(), g.col_cols(), g.out_w());
    let mut dw = vec![0.0; g.out_ch * rows];
    let mut col = col_buffer(g);
    for b in 0..g.batch {
        let xb = &x[b * g.in_plane()..(b + 1) * g.in_plane()];
        let gyb = &gy[b * g.out_plane()..(b + 1) * g.out_plane()];
        if use_direct(g) {
            direct_weight_grad(xb, gyb, g, &mut dw);
            continue;
        }
        if g.is_pointwise() {
            gemm(
                g.out_ch,
                cols,
                rows,
                gyb,
                (cols, 1),
                xb,
                (1, cols),
                1.0,
                &mut dw,
                rows,
            );
            continue;
        }
        for (r0, r1) in tiles(g) {
            let n = (r1 - r0) * ow;
            im2col(xb, g, r0, r1, &mut col);
            gemm(
                g.out_ch,
                n,
                rows,
                &gyb[r0 * ow..],
                (cols, 1),
                &col,
                (1, n),
                1.0,
                &mut dw,
                rows,
            );
        }
    }
    dw
}

/// Adds `bias[c]` to every element of channel `c`.
pub(crate) fn bias_add(x: &[f64], bias: &[f64], plane: usize) -> Vec<f64> {
    let ch = bias.len();
    x.chunks(plane)
        .enumerate()
        .flat_map(|(i, p)| {
            let b = bias[i % ch];
            p.iter().map(move |v| v + b)
        })
        .collect()
}

/// Sums each channel over batch and spatial positions.
pub(crate) fn channel_sum(x: &[f64], channels: usize, plane: usize) -> Vec<f64> {
    let mut out = vec![0.0; channels];
    for (i, p) in x.chunks(plane).enumerate() {
        out[i % channels] += p.iter().sum::<f64>();
    }
    out
}

pub(crate) fn channel_broadcast(b: &[f64], batch: usize, plane: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * b.len() * plane);
    for _ in 0..batch {
        for &v in b {
            out.extend(std::iter::repeat_n(v, plane));
        }
    }
    out
}

/// Nearest-neighbour upsampling of `planes` images of `h×w` by `f`.
pub(crate) fn upsample_nearest(x: &[f64], planes: usize, h: usize, w: usize, f: usize) -> Vec<f64> {
    let (oh, ow) = (h * f, w * f);
    let mut out = vec![0.0; planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for i in 0..oh {
            let row = &src[(i / f) * w..(i / f + 1) * w];
            for (j, v) in dst[i * ow..(i + 1) * ow].iter_mut().enumerate() {
                *v = row[j / f];
            }
        }
    }
    out
}

/// Sum over non-overlapping `f×f` blocks; adjoint of [`upsample_nearest`].
pub(crate) fn block_sum(x: &[f64], planes: usize, h: usize, w: usize, f: usize) -> Vec<f64> {
    let (oh, ow) = (h / f, w / f);
    let mut out = vec![0.0; planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for i in 0..h {
            for j in 0..w {
                dst[(i / f) * ow + j / f] += src[i * w + j];
            }
        }
    }
    out
}

/// Interpolation taps for one axis: output index -> (lo, hi, weight_lo, weight_hi).
fn bilinear_taps(n_in: usize, f: usize) -> Vec<(usize, usize, f64, f64)> {
    (0..n_in * f)
        .map(|o| {
            let src = ((o as f64 + 0.5) / f as f64 - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(n_in - 1);
            let hi = (lo + 1).min(n_in - 1);
            let t = src - lo as f64;
            (lo, hi, 1.0 - t, t)
        })
        .collect()
}

/// Bilinear upsampling with half-pixel centres (align-corners off).
pub(crate) fn bilinear(x: &[f64], planes: usize, h: usize, w: usize, f: usize) -> Vec<f64> {
    let (ty, tx) = (bilinear_taps(h, f), bilinear_taps(w, f));
    let (oh, ow) = (h * f, w * f);
    let mut out = vec![0.0; planes * oh * ow];
    let mut rows = vec![0.0; h * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        for i in 0..h {
            for (j, &(lo, hi, a, b)) in tx.iter().enumerate() {
                rows[i * ow + j] = a * src[i * w + lo] + b * src[i * w + hi];
            }
        }
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for (i, &(lo, hi, a, b)) in ty.iter().enumerate() {
            for j in 0..ow {
                dst[i * ow + j] = a * rows[lo * ow + j] + b * rows[hi * ow + j];
            }
        }
    }
    out
}

/// Adjoint of [`bilinear`]; `h`, `w` are the low-resolution dimensions.
pub(crate) fn bilinear_transpose(
    g: &[f64],
    planes: usize,
    h: usize,
    w: usize,
    f: usize,
) -> Vec<f64> {
    let (ty, tx) = (bilinear_taps(h, f), bilinear_taps(w, f));
    let (oh, ow) = (h * f, w * f);
    let mut out = vec![0.0; planes * h * w];
    let mut rows = vec![0.0; h * ow];
    for p in 0..planes {
        let src = &g[p * oh * ow..(p + 1) * oh * ow];
        rows.fill(0.0);
        for (i, &(lo, hi, a, b)) in ty.iter().enumerate() {
            for j in 0..ow {
                let v = src[i * ow + j];
                rows[lo * ow + j] += a * v;
                rows[hi * ow + j] += b * v;
            }
        }
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for i in 0..h {
            for (j, &(lo, hi, a, b)) in tx.iter().enumerate() {
                let v = rows[i * ow + j];
                dst[i * w + lo] += a * v;
                dst[i * w + hi] += b * v;
            }
        }
    }
    out
}
