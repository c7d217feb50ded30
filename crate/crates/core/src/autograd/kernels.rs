//! Raw compute kernels over flat NCHW buffers. Shape validation happens in
//! the graph layer; these assume consistent sizes.

use crate::scalar::Scalar;

/// Sliding-window geometry between a dense "image" plane and the grid of
/// window positions laid over it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Window {
    pub channels: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Window {
    pub fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn cols(&self) -> usize {
        self.grid_h * self.grid_w
    }

    /// Calls `f(col_row, col_index, image_index)` for every in-bounds tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let plane = self.image_h * self.image_w;
        let ncols = self.cols();
        for c in 0..self.channels {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    for oy in 0..self.grid_h {
                        let iy = (oy * self.stride + ki) as isize - self.padding as isize;
                        if iy < 0 || iy >= self.image_h as isize {
                            continue;
                        }
                        let img_row = c * plane + iy as usize * self.image_w;
                        let col_row = row * ncols + oy * self.grid_w;
                        for ox in 0..self.grid_w {
                            let ix = (ox * self.stride + kj) as isize - self.padding as isize;
                            if ix < 0 || ix >= self.image_w as isize {
                                continue;
                            }
                            f(row, col_row + ox, img_row + ix as usize);
                        }
                    }
                }
            }
        }
    }
}

/// Unfolds one image `[C, H, W]` into `[C·kh·kw, grid_h·grid_w]`.
pub(crate) fn im2col<T: Scalar>(image: &[T], win: &Window, cols: &mut [T]) {
    cols.iter_mut().for_each(|v| *v = T::zero());
    win.for_each_tap(|_, ci, ii| cols[ci] = image[ii]);
}

/// Adjoint of [`im2col`]: scatters columns back, accumulating into `image`.
pub(crate) fn col2im<T: Scalar>(cols: &[T], win: &Window, image: &mut [T]) {
    win.for_each_tap(|_, ci, ii| image[ii] = image[ii] + cols[ci]);
}

pub(crate) struct ConvShape {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvShape {
    /// Window for a forward convolution: image is the input.
    fn conv_window(&self) -> Window {
        Window {
            channels: self.cin,
            image_h: self.h,
            image_w: self.w,
            grid_h: self.ho,
            grid_w: self.wo,
            kh: self.kh,
            kw: self.kw,
            stride: self.stride,
            padding: self.padding,
        }
    }

    /// Window for a transposed convolution: image is the output.
    fn transpose_window(&self) -> Window {
        Window {
            channels: self.cout,
            image_h: self.ho,
            image_w: self.wo,
            grid_h: self.h,
            grid_w: self.w,
            kh: self.kh,
            kw: self.kw,
            stride: self.stride,
            padding: self.padding,
        }
    }
}

pub(crate) fn conv2d_forward<T: Scalar>(
    s: &ConvShape,
    x: &[T],
    kernel: &[T],
    bias: Option<&[T]>,
    out: &mut [T],
) {
    let win = s.conv_window();
    let (rows, ncols) = (win.rows(), win.cols());
    let mut cols = vec![T::zero(); rows * ncols];
    let in_sz = s.cin * s.h * s.w;
    let out_sz = s.cout * ncols;
    for b in 0..s.n {
        im2col(&x[b * in_sz..(b + 1) * in_sz], &win, &mut cols);
        let o = &mut out[b * out_sz..(b + 1) * out_sz];
        T::gemm(s.cout, rows, ncols, kernel, (rows as isize, 1), &cols, (ncols as isize, 1), o, (ncols as isize, 1), false);
        if let Some(bias) = bias {
            for (co, plane) in o.chunks_exact_mut(ncols).enumerate() {
                plane.iter_mut().for_each(|v| *v = *v + bias[co]);
            }
        }
    }
}

/// Gradients of conv2d. Any of the outputs may be skipped.
pub(crate) fn conv2d_backward<T: Scalar>(
    s: &ConvShape,
    x: &[T],
    kernel: &[T],
    grad_out: &[T],
    mut grad_x: Option<&mut [T]>,
    mut grad_kernel: Option<&mut [T]>,
    mut grad_bias: Option<&mut [T]>,
) {
    let win = s.conv_window();
    let (rows, ncols) = (win.rows(), win.cols());
    let mut cols = vec![T::zero(); rows * ncols];
    let in_sz = s.cin * s.h * s.w;
    let out_sz = s.cout * ncols;
    for b in 0..s.n {
        let go = &grad_out[b * out_sz..(b + 1) * out_sz];
        if let Some(gk) = grad_kernel.as_deref_mut() {
            im2col(&x[b * in_sz..(b + 1) * in_sz], &win, &mut cols);
            // gk[Cout, rows] += go[Cout, ncols] · colsᵀ
            T::gemm(s.cout, ncols, rows, go, (ncols as isize, 1), &cols, (1, ncols as isize), gk, (rows as isize, 1), true);
        }
        if let Some(gx) = grad_x.as_deref_mut() {
            // cols = Kᵀ · go
            T::gemm(rows, s.cout, ncols, kernel, (1, rows as isize), go, (ncols as isize, 1), &mut cols, (ncols as isize, 1), false);
            col2im(&cols, &win, &mut gx[b * in_sz..(b + 1) * in_sz]);
        }
        if let Some(gb) = grad_bias.as_deref_mut() {
            for (co, plane) in go.chunks_exact(ncols).enumerate() {
                gb[co] = gb[co] + plane.iter().copied().sum();
            }
        }
    }
}

/// Transposed convolution; kernel layout `[Cin, Cout, kh, kw]`.
pub(crate) fn conv_transpose2d_forward<T: Scalar>(
    s: &ConvShape,
    x: &[T],
    kernel: &[T],
    bias: Option<&[T]>,
    out: &mut [T],
) {
    let win = s.transpose_window();
    let (rows, ncols) = (win.rows(), win.cols());
    let mut cols = vec![T::zero(); rows * ncols];
    let in_sz = s.cin * s.h * s.w;
    let out_plane = s.ho * s.wo;
    let out_sz = s.cout * out_plane;
    out.iter_mut().for_each(|v| *v = T::zero());
    for b in 0..s.n {
        // cols[rows, HW] = Ktᵀ · x[Cin, HW]
        T::gemm(rows, s.cin, ncols, kernel, (1, rows as isize), &x[b * in_sz..(b + 1) * in_sz], (ncols as isize, 1), &mut cols, (ncols as isize, 1), false);
        let o = &mut out[b * out_sz..(b + 1) * out_sz];
        col2im(&cols, &win, o);
        if let Some(bias) = bias {
            for (co, plane) in o.chunks_exact_mut(out_plane).enumerate() {
                plane.iter_mut().for_each(|v| *v = *v + bias[co]);
            }
        }
    }
}

pub(crate) fn conv_transpose2d_backward<T: Scalar>(
    s: &ConvShape,
    x: &[T],
    kernel: &[T],
    grad_out: &[T],
    mut grad_x: Option<&mut [T]>,
    mut grad_kernel: Option<&mut [T]>,
    mut grad_bias: Option<&mut [T]>,
) {
    let win = s.transpose_window();
    let (rows, ncols) = (win.rows(), win.cols());
    let mut cols = vec![T::zero(); rows * ncols];
    let in_sz = s.cin * s.h * s.w;
    let out_plane = s.ho * s.wo;
    let out_sz = s.cout * out_plane;
    for b in 0..s.n {
        let go = &grad_out[b * out_sz..(b + 1) * out_sz];
        if grad_x.is_some() || grad_kernel.is_some() {
            im2col(go, &win, &mut cols);
        }
        if let Some(gx) = grad_x.as_deref_mut() {
            // gx[Cin, HW] += Kt[Cin, rows] · cols[rows, HW]
            T::gemm(s.cin, rows, ncols, kernel, (rows as isize, 1), &cols, (ncols as isize, 1), &mut gx[b * in_sz..(b + 1) * in_sz], (ncols as isize, 1), true);
        }
        if let Some(gk) = grad_kernel.as_deref_mut() {
            // gk[Cin, rows] += x[Cin, HW] · colsᵀ
            T::gemm(s.cin, ncols, rows, &x[b * in_sz..(b + 1) * in_sz], (ncols as isize, 1), &cols, (1, ncols as isize), gk, (rows as isize, 1), true);
        }
        if let Some(gb) = grad_bias.as_deref_mut() {
            for (co, plane) in go.chunks_exact(out_plane).enumerate() {
                gb[co] = gb[co] + plane.iter().copied().sum();
            }
        }
    }
}

/// Mean over non-overlapping `k × k` windows of `planes` planes.
pub(crate) fn avg_pool<T: Scalar>(x: &[T], planes: usize, h: usize, w: usize, k: usize, out: &mut [T]) {
    let (ho, wo) = (h / k, w / k);
    let inv = T::one() / T::lit((k * k) as f64);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = T::zero();
                for dy in 0..k {
                    let row = (oy * k + dy) * w + ox * k;
                    for dx in 0..k {
                        acc = acc + src[row + dx];
                    }
                }
                dst[oy * wo + ox] = acc * inv;
            }
        }
    }
}

/// Adjoint of [`avg_pool`], accumulating into `gx`.
pub(crate) fn avg_pool_backward<T: Scalar>(g: &[T], planes: usize, h: usize, w: usize, k: usize, gx: &mut [T]) {
    let (ho, wo) = (h / k, w / k);
    let inv = T::one() / T::lit((k * k) as f64);
    for p in 0..planes {
        let src = &g[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = dst[y * w + x] + src[(y / k) * wo + x / k] * inv;
            }
        }
    }
}

pub(crate) fn upsample_nearest<T: Scalar>(x: &[T], planes: usize, h: usize, w: usize, k: usize, out: &mut [T]) {
    let (ho, wo) = (h * k, w * k);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
        for y in 0..ho {
            let srow = &src[(y / k) * w..(y / k + 1) * w];
            for (x, v) in dst[y * wo..(y + 1) * wo].iter_mut().enumerate() {
                *v = srow[x / k];
            }
        }
    }
}

/// Adjoint of [`upsample_nearest`]: block sums, accumulating into `gx`.
pub(crate) fn upsample_nearest_backward<T: Scalar>(g: &[T], planes: usize, h: usize, w: usize, k: usize, gx: &mut [T]) {
    let (ho, wo) = (h * k, w * k);
    for p in 0..planes {
        let src = &g[p * ho * wo..(p + 1) * ho * wo];
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        for y in 0..ho {
            for x in 0..wo {
                let i = (y / k) * w + x / k;
                dst[i] = dst[i] + src[y * wo + x];
            }
        }
    }
}
