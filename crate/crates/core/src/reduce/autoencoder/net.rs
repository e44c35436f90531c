//! Layer kernels on single samples stored channel-major (`c, h, w`).

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn flat(n: usize) -> Self {
        Self { c: n, h: 1, w: 1 }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Op {
    Conv {
        input: Shape,
        output: Shape,
        kernel: usize,
        stride: usize,
        w_off: usize,
        b_off: usize,
    },
    Pool {
        input: Shape,
        output: Shape,
        window: usize,
    },
    /// Nearest-neighbour upsampling by `factor`, clamped to the input edge.
    Upsample {
        input: Shape,
        output: Shape,
        factor: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        w_off: usize,
        b_off: usize,
    },
    Relu {
        len: usize,
    },
}

impl Op {
    pub fn output_len(&self) -> usize {
        match self {
            Op::Conv { output, .. } | Op::Pool { output, .. } | Op::Upsample { output, .. } => output.len(),
            Op::Dense { outputs, .. } => *outputs,
            Op::Relu { len } => *len,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Op::Conv { input, output, kernel, .. } => output.c * input.c * kernel * kernel + output.c,
            Op::Dense { inputs, outputs, .. } => inputs * outputs + outputs,
            _ => 0,
        }
    }

    /// `(weight_offset, weight_count, bias_offset, bias_count)`.
    pub fn param_blocks(&self) -> Option<(usize, usize, usize, usize)> {
        match self {
            Op::Conv { input, output, kernel, w_off, b_off, .. } => {
                Some((*w_off, output.c * input.c * kernel * kernel, *b_off, output.c))
            }
            Op::Dense { inputs, outputs, w_off, b_off } => Some((*w_off, inputs * outputs, *b_off, *outputs)),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match self {
            Op::Conv { input, kernel, .. } => input.c * kernel * kernel,
            Op::Dense { inputs, .. } => *inputs,
            _ => 0,
        }
    }
}

/// Dot product with eight independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (&x, &y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Output positions `o` along one axis with `0 <= o*stride + k - pad < n_in`.
#[inline]
fn valid_range(k: usize, pad: usize, stride: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if n_in + pad > k { ((n_in + pad - k - 1) / stride + 1).min(n_out) } else { 0 };
    (lo, hi.max(lo))
}

pub(crate) fn conv_forward<T: Real>(
    x: &[T],
    p: &[T],
    input: Shape,
    output: Shape,
    kernel: usize,
    stride: usize,
    w_off: usize,
    b_off: usize,
    y: &mut [T],
) {
    let pad = kernel / 2;
    let (ih, iw, oh, ow) = (input.h, input.w, output.h, output.w);
    for o in 0..output.c {
        let yo = &mut y[o * oh * ow..(o + 1) * oh * ow];
        yo.fill(p[b_off + o]);
        for ci in 0..input.c {
            let xi = &x[ci * ih * iw..(ci + 1) * ih * iw];
            for ky in 0..kernel {
                let (ylo, yhi) = valid_range(ky, pad, stride, ih, oh);
                for kx in 0..kernel {
                    let wv = p[w_off + ((o * input.c + ci) * kernel + ky) * kernel + kx];
                    let (xlo, xhi) = valid_range(kx, pad, stride, iw, ow);
                    for oy in ylo..yhi {
                        let iy = oy * stride + ky - pad;
                        let row_in = &xi[iy * iw..(iy + 1) * iw];
                        let row_out = &mut yo[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            let s = xlo + kx - pad;
                            for (yv, &xv) in row_out[xlo..xhi].iter_mut().zip(&row_in[s..s + xhi - xlo]) {
                                *yv += wv * xv;
                            }
                        } else {
                            for ox in xlo..xhi {
                                row_out[ox] += wv * row_in[ox * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Real>(
    x: &[T],
    p: &[T],
    dy: &[T],
    input: Shape,
    output: Shape,
    kernel: usize,
    stride: usize,
    w_off: usize,
    b_off: usize,
    dx: &mut [T],
    grad: &mut [T],
) {
    let pad = kernel / 2;
    let (ih, iw, oh, ow) = (input.h, input.w, output.h, output.w);
    dx.fill(T::zero());
    for o in 0..output.c {
        let dyo = &dy[o * oh * ow..(o + 1) * oh * ow];
        grad[b_off + o] += dyo.iter().copied().sum::<T>();
        for ci in 0..input.c {
            let xi = &x[ci * ih * iw..(ci + 1) * ih * iw];
            let dxi = &mut dx[ci * ih * iw..(ci + 1) * ih * iw];
            for ky in 0..kernel {
                let (ylo, yhi) = valid_range(ky, pad, stride, ih, oh);
                for kx in 0..kernel {
                    let widx = w_off + ((o * input.c + ci) * kernel + ky) * kernel + kx;
                    let wv = p[widx];
                    let (xlo, xhi) = valid_range(kx, pad, stride, iw, ow);
                    let mut gw = T::zero();
                    for oy in ylo..yhi {
                        let iy = oy * stride + ky - pad;
                        let g = &dyo[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            let s = xlo + kx - pad;
                            let row_in = &xi[iy * iw + s..iy * iw + s + xhi - xlo];
                            gw += dot(&g[xlo..xhi], row_in);
                            let row_dx = &mut dxi[iy * iw + s..iy * iw + s + xhi - xlo];
                            for (d, &gv) in row_dx.iter_mut().zip(&g[xlo..xhi]) {
                                *d += wv * gv;
                            }
                        } else {
                            for ox in xlo..xhi {
                                let ix = iy * iw + ox * stride + kx - pad;
                                gw += g[ox] * xi[ix];
                                dxi[ix] += wv * g[ox];
                            }
                        }
                    }
                    grad[widx] += gw;
                }
            }
        }
    }
}

/// Max pooling; `arg` receives the flat input index of each maximum (first
/// on ties).
pub(crate) fn pool_forward<T: Real>(x: &[T], input: Shape, output: Shape, window: usize, y: &mut [T], arg: &mut [u32]) {
    for c in 0..input.c {
        for oy in 0..output.h {
            for ox in 0..output.w {
                let mut best = usize::MAX;
                for dy in 0..window {
                    for dxx in 0..window {
                        let i = (c * input.h + oy * window + dy) * input.w + ox * window + dxx;
                        if best == usize::MAX || x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                let o = (c * output.h + oy) * output.w + ox;
                y[o] = x[best];
                arg[o] = best as u32;
            }
        }
    }
}

pub(crate) fn pool_backward<T: Real>(dy: &[T], arg: &[u32], dx: &mut [T]) {
    dx.fill(T::zero());
    for (&g, &a) in dy.iter().zip(arg) {
        dx[a as usize] += g;
    }
}

#[inline]
fn upsample_src(input: Shape, factor: usize, c: usize, oy: usize, ox: usize) -> usize {
    let iy = (oy / factor).min(input.h - 1);
    let ix = (ox / factor).min(input.w - 1);
    (c * input.h + iy) * input.w + ix
}

pub(crate) fn upsample_forward<T: Real>(x: &[T], input: Shape, output: Shape, factor: usize, y: &mut [T]) {
    for c in 0..output.c {
        for oy in 0..output.h {
            for ox in 0..output.w {
                y[(c * output.h + oy) * output.w + ox] = x[upsample_src(input, factor, c, oy, ox)];
            }
        }
    }
}

pub(crate) fn upsample_backward<T: Real>(dy: &[T], input: Shape, output: Shape, factor: usize, dx: &mut [T]) {
    dx.fill(T::zero());
    for c in 0..output.c {
        for oy in 0..output.h {
            for ox in 0..output.w {
                dx[upsample_src(input, factor, c, oy, ox)] += dy[(c * output.h + oy) * output.w + ox];
            }
        }
    }
}

pub(crate) fn dense_forward<T: Real>(x: &[T], p: &[T], inputs: usize, outputs: usize, w_off: usize, b_off: usize, y: &mut [T]) {
    for o in 0..outputs {
        let row = &p[w_off + o * inputs..w_off + (o + 1) * inputs];
        y[o] = p[b_off + o] + dot(row, x);
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<T: Real>(
    x: &[T],
    p: &[T],
    dy: &[T],
    inputs: usize,
    outputs: usize,
    w_off: usize,
    b_off: usize,
    dx: &mut [T],
    grad: &mut [T],
) {
    dx.fill(T::zero());
    for o in 0..outputs {
        let g = dy[o];
        grad[b_off + o] += g;
        let row = &p[w_off + o * inputs..w_off + (o + 1) * inputs];
        let grow = &mut grad[w_off + o * inputs..w_off + (o + 1) * inputs];
        for ((gw, &v), (d, &w)) in grow.iter_mut().zip(x).zip(dx.iter_mut().zip(row)) {
            *gw += g * v;
            *d += g * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition with explicit zero padding.
    fn conv_naive(x: &[f64], w: &[f64], b: &[f64], input: Shape, oc: usize, k: usize, s: usize) -> (Shape, Vec<f64>) {
        let pad = k as i64 / 2;
        let oh = (input.h + 2 * pad as usize - k) / s + 1;
        let ow = (input.w + 2 * pad as usize - k) / s + 1;
        let mut y = vec![0.0; oc * oh * ow];
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[o];
                    for c in 0..input.c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as i64 - pad;
                                let ix = (ox * s + kx) as i64 - pad;
                                if iy >= 0 && ix >= 0 && (iy as usize) < input.h && (ix as usize) < input.w {
                                    acc += w[((o * input.c + c) * k + ky) * k + kx]
                                        * x[(c * input.h + iy as usize) * input.w + ix as usize];
                                }
                            }
                        }
                    }
                    y[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        (Shape::new(oc, oh, ow), y)
    }

    #[test]
    fn conv_matches_direct_definition() {
        for (k, s) in [(3, 1), (5, 1), (3, 2), (1, 1), (5, 3)] {
            let input = Shape::new(2, 7, 6);
            let x: Vec<f64> = (0..input.len()).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect();
            let oc = 3;
            let nw = oc * input.c * k * k;
            let p: Vec<f64> = (0..nw + oc).map(|i| ((i * 104729) % 17) as f64 * 0.1 - 0.8).collect();
            let (out, want) = conv_naive(&x, &p[..nw], &p[nw..], input, oc, k, s);
            let mut y = vec![0.0; out.len()];
            conv_forward(&x, &p, input, out, k, s, 0, nw, &mut y);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "k={k} s={s}");
            }
        }
    }

    #[test]
    fn pool_and_upsample() {
        let input = Shape::new(1, 4, 4);
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let out = Shape::new(1, 2, 2);
        let mut y = vec![0.0; 4];
        let mut arg = vec![0; 4];
        pool_forward(&x, input, out, 2, &mut y, &mut arg);
        assert_eq!(y, vec![5.0, 7.0, 13.0, 15.0]);
        let mut big = vec![0.0; 20];
        upsample_forward(&y, out, Shape::new(1, 5, 4), 2, &mut big);
        assert_eq!(&big[16..], &[13.0, 13.0, 15.0, 15.0]);
    }
}
