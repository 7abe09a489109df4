//! Matrix multiply, 2D convolution, and bilinear sampling primitives.
//!
//! Convolution uses NHWC layout with HWIO weights and is lowered to im2col
//! plus a cache-friendly matmul; the same kernels serve the pullbacks.


use crate::tape::Tape;
use crate::tensor::{DiffTensor, Scalar};

/// out[m,n] += a[m,k] * b[k,n]. The i-k-j loop order keeps the inner loop
/// contiguous over both `out` and `b`, which vectorizes well.
pub fn matmul_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in arow.iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + aik * bv;
            }
        }
    }
}

/// out[i,j] += sum_k a[k,i] * b[k,j] (i.e. out += a^T b).
pub fn matmul_tn_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], k: usize, m: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for kk in 0..k {
        let arow = &a[kk * m..(kk + 1) * m];
        let brow = &b[kk * n..(kk + 1) * n];
        for (i, &aki) in arow.iter().enumerate() {
            if aki == T::zero() {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + aki * bv;
            }
        }
    }
}

fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

struct ConvDims {
    h: usize,
    w: usize,
    ci: usize,
    kh: usize,
    kw: usize,
    co: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

/// Gather 3x3 (or kh x kw) patches of one image into rows of `col`:
/// col[(oy*ow+ox), ((ky*kw+kx)*ci + c)] = x[iy, ix, c].
fn im2col<T: Scalar>(x: &[T], d: &ConvDims, col: &mut [T]) {
    let krow = d.kw * d.ci;
    let kfull = d.kh * krow;
    for oy in 0..d.oh {
        for ox in 0..d.ow {
            let dst_base = (oy * d.ow + ox) * kfull;
            for ky in 0..d.kh {
                let iy = (oy * d.stride + ky) as isize - d.pad as isize;
                let dst_row = dst_base + ky * krow;
                if iy < 0 || iy >= d.h as isize {
                    col[dst_row..dst_row + krow].iter_mut().for_each(|v| *v = T::zero());
                    continue;
                }
                let iy = iy as usize;
                for kx in 0..d.kw {
                    let ix = (ox * d.stride + kx) as isize - d.pad as isize;
                    let dst = dst_row + kx * d.ci;
                    if ix < 0 || ix >= d.w as isize {
                        col[dst..dst + d.ci].iter_mut().for_each(|v| *v = T::zero());
                    } else {
                        let src = (iy * d.w + ix as usize) * d.ci;
                        col[dst..dst + d.ci].copy_from_slice(&x[src..src + d.ci]);
                    }
                }
            }
        }
    }
}

/// Scatter-add of a column buffer back onto the input image.
fn col2im_acc<T: Scalar>(col: &[T], d: &ConvDims, dx: &mut [T]) {
    let krow = d.kw * d.ci;
    let kfull = d.kh * krow;
    for oy in 0..d.oh {
        for ox in 0..d.ow {
            let src_base = (oy * d.ow + ox) * kfull;
            for ky in 0..d.kh {
                let iy = (oy * d.stride + ky) as isize - d.pad as isize;
                if iy < 0 || iy >= d.h as isize {
                    continue;
                }
                let iy = iy as usize;
                for kx in 0..d.kw {
                    let ix = (ox * d.stride + kx) as isize - d.pad as isize;
                    if ix < 0 || ix >= d.w as isize {
                        continue;
                    }
                    let src = src_base + ky * krow + kx * d.ci;
                    let dst = (iy * d.w + ix as usize) * d.ci;
                    for c in 0..d.ci {
                        dx[dst + c] = dx[dst + c] + col[src + c];
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Tape<T> {
    /// a: [M,K], b: [K,N] -> [M,N].
    pub fn matmul(&self, a: &DiffTensor<T>, b: &DiffTensor<T>) -> DiffTensor<T> {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let (k2, n) = (b.shape()[0], b.shape()[1]);
        assert_eq!(k, k2, "matmul inner dims: {:?} x {:?}", a.shape(), b.shape());
        let mut vals = vec![T::zero(); m * n];
        matmul_acc(a.values(), b.values(), &mut vals, m, k, n);
        let out = DiffTensor::new(vec![m, n], vals);
        out.assert_finite("matmul");
        let (an, bn) = (a.node_id(), b.node_id());
        if an.is_none() && bn.is_none() {
            return out;
        }
        let (av, bv) = (a.values_arc(), b.values_arc());
        self.record(
            out,
            Box::new(move |g, slots| {
                if let Some(ai) = an {
                    // dA = g . B^T
                    let bt = transpose(&bv, k, n);
                    let da = slots.slot_mut(ai);
                    matmul_acc(g, &bt, da, m, n, k);
                }
                if let Some(bi) = bn {
                    // dB = A^T . g
                    let db = slots.slot_mut(bi);
                    matmul_tn_acc(&av, g, db, m, k, n);
                }
            }),
        )
    }

    /// x: [N,H,W,Ci], w: [KH,KW,Ci,Co] -> [N,OH,OW,Co]. Zero padding.
    pub fn conv2d(
        &self,
        x: &DiffTensor<T>,
        w: &DiffTensor<T>,
        stride: usize,
        pad: usize,
    ) -> DiffTensor<T> {
        let (n, h, wd, ci) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (kh, kw, ci2, co) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
        assert_eq!(ci, ci2, "conv2d channel mismatch");
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (wd + 2 * pad - kw) / stride + 1;
        let dims = ConvDims {
            h,
            w: wd,
            ci,
            kh,
            kw,
            co,
            oh,
            ow,
            stride,
            pad,
        };
        let kfull = kh * kw * ci;
        let img = h * wd * ci;
        let oimg = oh * ow * co;
        let mut vals = vec![T::zero(); n * oimg];
        let mut col = vec![T::zero(); oh * ow * kfull];
        for b in 0..n {
            im2col(&x.values()[b * img..(b + 1) * img], &dims, &mut col);
            matmul_acc(
                &col,
                w.values(),
                &mut vals[b * oimg..(b + 1) * oimg],
                oh * ow,
                kfull,
                co,
            );
        }
        let out = DiffTensor::new(vec![n, oh, ow, co], vals);
        out.assert_finite("conv2d");
        let (xn, wn) = (x.node_id(), w.node_id());
        if xn.is_none() && wn.is_none() {
            return out;
        }
        let (xv, wv) = (x.values_arc(), w.values_arc());
        self.record(
            out,
            Box::new(move |g, slots| {
                let mut col = vec![T::zero(); dims.oh * dims.ow * kfull];
                if let Some(wi) = wn {
                    let dw = slots.slot_mut(wi);
                    for b in 0..n {
                        im2col(&xv[b * img..(b + 1) * img], &dims, &mut col);
                        matmul_tn_acc(
                            &col,
                            &g[b * oimg..(b + 1) * oimg],
                            dw,
                            dims.oh * dims.ow,
                            kfull,
                            dims.co,
                        );
                    }
                }
                if let Some(xi) = xn {
                    let wt = transpose(&wv, kfull, dims.co);
                    let mut dcol = vec![T::zero(); dims.oh * dims.ow * kfull];
                    let dx = slots.slot_mut(xi);
                    for b in 0..n {
                        dcol.iter_mut().for_each(|v| *v = T::zero());
                        matmul_acc(
                            &g[b * oimg..(b + 1) * oimg],
                            &wt,
                            &mut dcol,
                            dims.oh * dims.ow,
                            dims.co,
                            kfull,
                        );
                        col2im_acc(&dcol, &dims, &mut dx[b * img..(b + 1) * img]);
                    }
                }
            }),
        )
    }

    /// Bilinear sample of a [H,W,C] map at fractional (row, col); corners
    /// clamp to the border.
    pub fn bilinear_at(&self, map: &DiffTensor<T>, y: T, x: T) -> DiffTensor<T> {
        let (h, w, c) = (map.shape()[0], map.shape()[1], map.shape()[2]);
        let corner = bilinear_corners(y, x, h, w);
        let mv = map.values();
        let mut vals = vec![T::zero(); c];
        for &(iy, ix, wgt) in &corner {
            let base = (iy * w + ix) * c;
            for ch in 0..c {
                vals[ch] = vals[ch] + wgt * mv[base + ch];
            }
        }
        let out = DiffTensor::new(vec![c], vals);
        out.assert_finite("bilinear_at");
        let Some(mi) = map.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| {
                let s = slots.slot_mut(mi);
                for &(iy, ix, wgt) in &corner {
                    let base = (iy * w + ix) * c;
                    for ch in 0..c {
                        s[base + ch] = s[base + ch] + wgt * g[ch];
                    }
                }
            }),
        )
    }

    /// Warp a [H,W,C] image by the affine map sending output pixel (ox,oy)
    /// to source coordinates (sx,sy) = (m0*ox+m1*oy+m2, m3*ox+m4*oy+m5),
    /// sampling bilinearly; source corners outside the image contribute
    /// `fill`.
    pub fn affine_resample(
        &self,
        img: &DiffTensor<T>,
        m: [T; 6],
        fill: T,
    ) -> DiffTensor<T> {
        let (h, w, c) = (img.shape()[0], img.shape()[1], img.shape()[2]);
        let iv = img.values();
        let mut vals = vec![T::zero(); h * w * c];
        for oy in 0..h {
            for ox in 0..w {
                let fx = T::lit(ox as f64);
                let fy = T::lit(oy as f64);
                let sx = m[0] * fx + m[1] * fy + m[2];
                let sy = m[3] * fx + m[4] * fy + m[5];
                let dst = (oy * w + ox) * c;
                sample_fill(iv, h, w, c, sy, sx, fill, &mut vals[dst..dst + c]);
            }
        }
        let out = DiffTensor::new(vec![h, w, c], vals);
        out.assert_finite("affine_resample");
        let Some(ii) = img.node_id() else { return out };
        self.record(
            out,
            Box::new(move |g, slots| {
                let s = slots.slot_mut(ii);
                for oy in 0..h {
                    for ox in 0..w {
                        let fx = T::lit(ox as f64);
                        let fy = T::lit(oy as f64);
                        let sx = m[0] * fx + m[1] * fy + m[2];
                        let sy = m[3] * fx + m[4] * fy + m[5];
                        let src = (oy * w + ox) * c;
                        for (iy, ix, wgt) in corners_unclamped(sy, sx) {
                            if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                let base = (iy as usize * w + ix as usize) * c;
                                for ch in 0..c {
                                    s[base + ch] = s[base + ch] + wgt * g[src + ch];
                                }
                            }
                        }
                    }
                }
            }),
        )
    }
}

fn bilinear_corners<T: Scalar>(y: T, x: T, h: usize, w: usize) -> [(usize, usize, T); 4] {
    let clampi = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let y0f = y.floor();
    let x0f = x.floor();
    let wy = y - y0f;
    let wx = x - x0f;
    let y0 = clampi(y0f.to_f64().unwrap() as isize, h);
    let x0 = clampi(x0f.to_f64().unwrap() as isize, w);
    let y1 = clampi(y0 as isize + 1, h);
    let x1 = clampi(x0 as isize + 1, w);
    let one = T::one();
    [
        (y0, x0, (one - wy) * (one - wx)),
        (y0, x1, (one - wy) * wx),
        (y1, x0, wy * (one - wx)),
        (y1, x1, wy * wx),
    ]
}

fn corners_unclamped<T: Scalar>(y: T, x: T) -> [(isize, isize, T); 4] {
    let y0f = y.floor();
    let x0f = x.floor();
    let wy = y - y0f;
    let wx = x - x0f;
    let y0 = y0f.to_f64().unwrap() as isize;
    let x0 = x0f.to_f64().unwrap() as isize;
    let one = T::one();
    [
        (y0, x0, (one - wy) * (one - wx)),
        (y0, x0 + 1, (one - wy) * wx),
        (y0 + 1, x0, wy * (one - wx)),
        (y0 + 1, x0 + 1, wy * wx),
    ]
}

fn sample_fill<T: Scalar>(
    img: &[T],
    h: usize,
    w: usize,
    c: usize,
    y: T,
    x: T,
    fill: T,
    out: &mut [T],
) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for (iy, ix, wgt) in corners_unclamped(y, x) {
        if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
            let base = (iy as usize * w + ix as usize) * c;
            for ch in 0..c {
                out[ch] = out[ch] + wgt * img[base + ch];
            }
        } else {
            for v in out.iter_mut() {
                *v = *v + wgt * fill;
            }
        }
    }
}
