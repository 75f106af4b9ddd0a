//! Dense kernels in double precision. Tensors are single samples in CHW layout.

/// Channel-major activation map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor { c, h, w, data: vec![0.0; c * h * w] }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// `C = alpha * A * B + beta * C` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: every caller passes buffers whose extents cover the strided m x k, k x n
    // and m x n views; the slices are borrowed for the duration of the call.
    unsafe {
        matrixmultiply::dgemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
    }
}

/// Geometry of a strided, zero-padded square convolution over an image of
/// `channels x in_h x in_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    pub fn cols(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Defines `$name` to run the `#[inline(always)]` kernel `$imp` compiled with
/// AVX2 when the CPU supports it. Float results are identical either way: no
/// operations are contracted or reordered.
macro_rules! avx2_dispatch {
    ($(#[$m:meta])* $vis:vis fn $name:ident => $imp:ident ($($arg:ident: $ty:ty),* $(,)?) $(-> $ret:ty)?) => {
        $(#[$m])*
        $vis fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2")]
                unsafe fn fast($($arg: $ty),*) $(-> $ret)? {
                    $imp($($arg),*)
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the feature was detected at runtime.
                    return unsafe { fast($($arg),*) };
                }
            }
            $imp($($arg),*)
        }
    };
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Runs `f` on a per-thread buffer of at least `len` values with arbitrary contents.
/// Reusing it avoids faulting in fresh pages for every large temporary.
fn with_scratch<R>(len: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    SCRATCH.with(|cell| {
        let mut buf = cell.borrow_mut();
        if buf.len() < len {
            buf.resize(len, 0.0);
        }
        f(&mut buf[..len])
    })
}

/// Unfolds patches into a `rows x cols` matrix.
pub fn im2col(input: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut cols = vec![0.0; g.rows() * g.cols()];
    im2col_into(input, g, &mut cols);
    cols
}

/// Output columns `ox` whose tap `kx` reads inside an input row of width `w`.
#[inline(always)]
fn strided_span(ow: usize, w: usize, kx: usize, pad: usize, stride: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kx).div_ceil(stride);
    let hi = if w + pad > kx { (w + pad - kx).div_ceil(stride).min(ow) } else { 0 };
    (lo.min(hi), hi)
}

/// [`im2col`] into a caller buffer; every entry is written.
#[inline(always)]
fn im2col_into_kernel(input: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let n = oh * ow;
    for c in 0..g.channels {
        let src = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                let (lo, hi) = strided_span(ow, g.in_w, kx, g.pad, g.stride);
                for oy in 0..oh {
                    let out = &mut dst[oy * ow..(oy + 1) * ow];
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize || lo == hi {
                        out.fill(0.0);
                        continue;
                    }
                    let line = &src[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    out[..lo].fill(0.0);
                    out[hi..].fill(0.0);
                    let start = lo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        out[lo..hi].copy_from_slice(&line[start..start + hi - lo]);
                    } else {
                        for (j, o) in out[lo..hi].iter_mut().enumerate() {
                            *o = line[start + j * g.stride];
                        }
                    }
                }
            }
        }
    }
}

#[inline(always)]
fn col2im_kernel(cols: &[f64], g: &ConvGeom, out: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let n = oh * ow;
    for c in 0..g.channels {
        let dst = &mut out[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * n..(row + 1) * n];
                let (lo, hi) = strided_span(ow, g.in_w, kx, g.pad, g.stride);
                if lo == hi {
                    continue;
                }
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let line = &mut dst[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let from = &src[oy * ow + lo..oy * ow + hi];
                    let start = lo * g.stride + kx - g.pad;
                    if g.stride == 1 {
                        axpy(1.0, from, &mut line[start..start + hi - lo]);
                    } else {
                        for (j, v) in from.iter().enumerate() {
                            line[start + j * g.stride] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Output channel counts up to this use the direct stride-1 kernels; a GEMM
/// with so few rows wastes most of each micro-tile.
const DIRECT_MAX_OUT: usize = 4;

enum Saved {
    Cols(Vec<f64>),
    Input(Vec<f64>),
}

/// Cached state of a convolution needed for its backward pass.
pub struct ConvTape {
    pub geom: ConvGeom,
    saved: Saved,
}

/// Columns `x` of an output row whose tap `kx` lands inside the input row.
#[inline(always)]
fn tap_span(w: usize, kx: usize, pad: usize) -> (usize, usize) {
    (pad.saturating_sub(kx), (w + pad).saturating_sub(kx).min(w))
}

#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline(always)]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, &i) in y.iter_mut().zip(x) {
        *o += alpha * i;
    }
}

/// Stride-1 same-padded convolution by shifted row updates.
#[inline(always)]
fn direct_forward_kernel(input: &[f64], g: &ConvGeom, weight: &[f64], out: &mut Tensor) {
    if g.k == 3 && g.in_w >= 3 {
        return direct_forward3(input, g, weight, out);
    }
    let (h, w, k, pad) = (g.in_h, g.in_w, g.k, g.pad);
    for y in 0..h {
        for c in 0..g.channels {
            for ky in 0..k {
                let Some(iy) = (y + ky).checked_sub(pad).filter(|&iy| iy < h) else { continue };
                let line = &input[(c * h + iy) * w..(c * h + iy + 1) * w];
                for o in 0..out.c {
                    let row = &mut out.data[(o * h + y) * w..(o * h + y + 1) * w];
                    let wrow = &weight[((o * g.channels + c) * k + ky) * k..][..k];
                    for (kx, &wv) in wrow.iter().enumerate() {
                        let (x0, x1) = tap_span(w, kx, pad);
                        axpy(wv, &line[x0 + kx - pad..x1 + kx - pad], &mut row[x0..x1]);
                    }
                }
            }
        }
    }
}

/// 3x3 case of [`direct_forward`]: all nine taps of an input channel are applied
/// in one pass over each output row. Rows outside the image read as zeros.
#[inline(always)]
fn direct_forward3(input: &[f64], g: &ConvGeom, weight: &[f64], out: &mut Tensor) {
    let (h, w) = (g.in_h, g.in_w);
    let zeros = vec![0.0; w];
    for o in 0..out.c {
        for y in 0..h {
            let row = &mut out.data[(o * h + y) * w..(o * h + y + 1) * w];
            for c in 0..g.channels {
                let plane = &input[c * h * w..(c + 1) * h * w];
                let line = |dy: usize| match (y + dy).checked_sub(1).filter(|&iy| iy < h) {
                    Some(iy) => &plane[iy * w..(iy + 1) * w],
                    None => zeros.as_slice(),
                };
                let (l0, l1, l2) = (line(0), line(1), line(2));
                let k: &[f64; 9] = weight[(o * g.channels + c) * 9..][..9].try_into().expect("3x3 taps");
                let tap = |x: usize, kx: usize| {
                    let xi = (x + kx).wrapping_sub(1);
                    if xi < w {
                        k[kx] * l0[xi] + k[3 + kx] * l1[xi] + k[6 + kx] * l2[xi]
                    } else {
                        0.0
                    }
                };
                for x in [0, w - 1] {
                    row[x] += tap(x, 0) + tap(x, 1) + tap(x, 2);
                }
                let inner = &mut row[1..w - 1];
                let n = inner.len();
                let (a0, a1, a2) = (&l0[..n], &l0[1..n + 1], &l0[2..n + 2]);
                let (b0, b1, b2) = (&l1[..n], &l1[1..n + 1], &l1[2..n + 2]);
                let (c0, c1, c2) = (&l2[..n], &l2[1..n + 1], &l2[2..n + 2]);
                for i in 0..n {
                    inner[i] += (k[0] * a0[i] + k[1] * a1[i] + k[2] * a2[i])
                        + (k[3] * b0[i] + k[4] * b1[i] + k[5] * b2[i])
                        + (k[6] * c0[i] + k[7] * c1[i] + k[8] * c2[i]);
                }
            }
        }
    }
}

#[inline(always)]
fn direct_backward_kernel(input: &[f64], g: &ConvGeom, dout: &Tensor, weight: &[f64], dweight: &mut [f64], din: Option<&mut [f64]>) {
    let (h, w, k, pad) = (g.in_h, g.in_w, g.k, g.pad);
    let mut din = din;
    for y in 0..h {
        for c in 0..g.channels {
            for ky in 0..k {
                let Some(iy) = (y + ky).checked_sub(pad).filter(|&iy| iy < h) else { continue };
                let span = (c * h + iy) * w..(c * h + iy + 1) * w;
                for o in 0..dout.c {
                    let drow = &dout.data[(o * h + y) * w..(o * h + y + 1) * w];
                    let base = ((o * g.channels + c) * k + ky) * k;
                    for kx in 0..k {
                        let (x0, x1) = tap_span(w, kx, pad);
                        let (s0, s1) = (x0 + kx - pad, x1 + kx - pad);
                        dweight[base + kx] += dot(&drow[x0..x1], &input[span.clone()][s0..s1]);
                        if let Some(d) = din.as_deref_mut() {
                            axpy(weight[base + kx], &drow[x0..x1], &mut d[span.clone()][s0..s1]);
                        }
                    }
                }
            }
        }
    }
}

avx2_dispatch!(fn im2col_into => im2col_into_kernel(input: &[f64], g: &ConvGeom, cols: &mut [f64]));
avx2_dispatch!(
    /// Adjoint of [`im2col`]: scatters columns back and accumulates into `out`.
    pub fn col2im => col2im_kernel(cols: &[f64], g: &ConvGeom, out: &mut [f64])
);
avx2_dispatch!(fn direct_forward => direct_forward_kernel(input: &[f64], g: &ConvGeom, weight: &[f64], out: &mut Tensor));
avx2_dispatch!(fn direct_backward => direct_backward_kernel(
    input: &[f64],
    g: &ConvGeom,
    dout: &Tensor,
    weight: &[f64],
    dweight: &mut [f64],
    din: Option<&mut [f64]>,
));
avx2_dispatch!(fn polyphase_forward => polyphase_forward_kernel(input: &[f64], g: &ConvGeom, weight: &[f64], out: &mut Tensor));

fn conv_setup(input: &Tensor, bias: &[f64], out_c: usize, k: usize, stride: usize) -> (ConvGeom, Tensor) {
    let geom = ConvGeom { channels: input.c, in_h: input.h, in_w: input.w, k, stride, pad: k / 2 };
    let mut out = Tensor::zeros(out_c, geom.out_h(), geom.out_w());
    for (o, chunk) in out.data.chunks_exact_mut(geom.cols()).enumerate() {
        chunk.fill(bias[o]);
    }
    (geom, out)
}

/// Input channel counts up to this use [`polyphase_forward`] for strided layers:
/// with so few patch rows the unfolded matrix costs more to build than to multiply.
const POLYPHASE_MAX_IN: usize = 6;
/// Wider layers amortize the unfolding over enough GEMM rows to win.
const POLYPHASE_MAX_OUT: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Direct,
    Polyphase,
    Gemm,
}

fn kernel(g: &ConvGeom, out_c: usize) -> Kernel {
    if out_c <= DIRECT_MAX_OUT && g.stride == 1 && g.k % 2 == 1 {
        Kernel::Direct
    } else if g.stride > 1 && g.channels <= POLYPHASE_MAX_IN && out_c <= POLYPHASE_MAX_OUT {
        Kernel::Polyphase
    } else {
        Kernel::Gemm
    }
}

/// Output pixels accumulated together in registers by [`polyphase_forward`].
const POLYPHASE_BLOCK: usize = 32;

/// Strided convolution on the zero-padded input split into `stride x stride`
/// phases, where every tap of an output row reads a contiguous run of one phase.
#[inline(always)]
fn polyphase_forward_kernel(input: &[f64], g: &ConvGeom, weight: &[f64], out: &mut Tensor) {
    let (s, k, pad) = (g.stride, g.k, g.pad);
    let (oh, ow) = (g.out_h(), g.out_w());
    let (ph, pw) = (oh + (k - 1) / s, ow + (k - 1) / s);
    // phases[((c * s + py) * s + px) * ph * pw + i * pw + j] = padded[c][s * i + py][s * j + px]
    let mut phases = vec![0.0; g.channels * s * s * ph * pw];
    for c in 0..g.channels {
        for y in 0..g.in_h {
            let (py, i) = ((y + pad) % s, (y + pad) / s);
            if i >= ph {
                continue;
            }
            let line = &input[(c * g.in_h + y) * g.in_w..][..g.in_w];
            for (x, &v) in line.iter().enumerate() {
                let (px, j) = ((x + pad) % s, (x + pad) / s);
                if j < pw {
                    phases[((c * s + py) * s + px) * ph * pw + i * pw + j] = v;
                }
            }
        }
    }
    // start of each tap's run for output row 0, in weight order
    let mut taps = Vec::with_capacity(g.rows());
    for c in 0..g.channels {
        for ky in 0..k {
            for kx in 0..k {
                taps.push(((c * s + ky % s) * s + kx % s) * ph * pw + (ky / s) * pw + kx / s);
            }
        }
    }
    const B: usize = POLYPHASE_BLOCK;
    for o in 0..out.c {
        let wo = &weight[o * g.rows()..(o + 1) * g.rows()];
        for y in 0..oh {
            let row = &mut out.data[(o * oh + y) * ow..(o * oh + y + 1) * ow];
            for x0 in (0..ow).step_by(B) {
                if x0 + B <= ow {
                    let mut acc = [0.0; B];
                    for (&t, &wv) in taps.iter().zip(wo) {
                        let src: &[f64; B] = phases[t + y * pw + x0..][..B].try_into().expect("block");
                        for l in 0..B {
                            acc[l] += wv * src[l];
                        }
                    }
                    for (r, a) in row[x0..x0 + B].iter_mut().zip(acc) {
                        *r += a;
                    }
                } else {
                    let n = ow - x0;
                    let mut acc = [0.0; B];
                    for (&t, &wv) in taps.iter().zip(wo) {
                        let src = &phases[t + y * pw + x0..][..n];
                        for l in 0..n {
                            acc[l] += wv * src[l];
                        }
                    }
                    for (r, a) in row[x0..].iter_mut().zip(acc) {
                        *r += a;
                    }
                }
            }
        }
    }
}

/// `weight` is `[out_c, in_c, k, k]`.
pub fn conv_forward(input: &Tensor, weight: &[f64], bias: &[f64], out_c: usize, k: usize, stride: usize) -> (Tensor, ConvTape) {
    let (geom, mut out) = conv_setup(input, bias, out_c, k, stride);
    match kernel(&geom, out_c) {
        Kernel::Gemm => {
            let cols = im2col(&input.data, &geom);
            let (rows, n) = (geom.rows(), geom.cols());
            gemm(out_c, rows, n, 1.0, weight, rows as isize, 1, &cols, n as isize, 1, 1.0, &mut out.data, n as isize, 1);
            (out, ConvTape { geom, saved: Saved::Cols(cols) })
        }
        direct => {
            if direct == Kernel::Direct {
                direct_forward(&input.data, &geom, weight, &mut out);
            } else {
                polyphase_forward(&input.data, &geom, weight, &mut out);
            }
            (out, ConvTape { geom, saved: Saved::Input(input.data.clone()) })
        }
    }
}

/// [`conv_forward`] without recording anything for a backward pass.
pub fn conv_infer(input: &Tensor, weight: &[f64], bias: &[f64], out_c: usize, k: usize, stride: usize) -> Tensor {
    let (geom, mut out) = conv_setup(input, bias, out_c, k, stride);
    match kernel(&geom, out_c) {
        Kernel::Direct => direct_forward(&input.data, &geom, weight, &mut out),
        Kernel::Polyphase => polyphase_forward(&input.data, &geom, weight, &mut out),
        Kernel::Gemm => {
            let (rows, n) = (geom.rows(), geom.cols());
            with_scratch(rows * n, |cols| {
                im2col_into(&input.data, &geom, cols);
                gemm(out_c, rows, n, 1.0, weight, rows as isize, 1, cols, n as isize, 1, 1.0, &mut out.data, n as isize, 1);
            });
        }
    }
    out
}

/// Accumulates weight/bias gradients; returns the input gradient when requested.
pub fn conv_backward(
    tape: &ConvTape,
    dout: &Tensor,
    weight: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    want_input_grad: bool,
) -> Option<Tensor> {
    let g = &tape.geom;
    let n = g.cols();
    for (o, chunk) in dout.data.chunks_exact(n).enumerate() {
        dbias[o] += chunk.iter().sum::<f64>();
    }
    match &tape.saved {
        Saved::Input(input) if g.stride == 1 => {
            let mut din = want_input_grad.then(|| Tensor::zeros(g.channels, g.in_h, g.in_w));
            direct_backward(input, g, dout, weight, dweight, din.as_mut().map(|t| t.data.as_mut_slice()));
            din
        }
        Saved::Input(input) => gemm_backward(&im2col(input, g), g, dout, weight, dweight, want_input_grad),
        Saved::Cols(cols) => gemm_backward(cols, g, dout, weight, dweight, want_input_grad),
    }
}

fn gemm_backward(cols: &[f64], g: &ConvGeom, dout: &Tensor, weight: &[f64], dweight: &mut [f64], want_input_grad: bool) -> Option<Tensor> {
    let (rows, n, out_c) = (g.rows(), g.cols(), dout.c);
    gemm(out_c, n, rows, 1.0, &dout.data, n as isize, 1, cols, 1, n as isize, 1.0, dweight, rows as isize, 1);
    if !want_input_grad {
        return None;
    }
    let mut din = Tensor::zeros(g.channels, g.in_h, g.in_w);
    with_scratch(rows * n, |dcols| {
        gemm(rows, out_c, n, 1.0, weight, 1, rows as isize, &dout.data, n as isize, 1, 0.0, dcols, n as isize, 1);
        col2im(dcols, g, &mut din.data);
    });
    Some(din)
}

/// Transposed convolution, kernel 4, stride 2, padding 1: doubles the spatial size.
/// `weight` is `[in_c, out_c, 4, 4]`.
pub fn deconv_forward(input: &Tensor, weight: &[f64], bias: &[f64], out_c: usize) -> (Tensor, ConvGeom) {
    let geom = ConvGeom { channels: out_c, in_h: input.h * 2, in_w: input.w * 2, k: 4, stride: 2, pad: 1 };
    debug_assert_eq!(geom.out_h(), input.h);
    let (rows, n) = (geom.rows(), input.plane());
    let mut out = Tensor::zeros(out_c, geom.in_h, geom.in_w);
    with_scratch(rows * n, |cols| {
        gemm(rows, input.c, n, 1.0, weight, 1, rows as isize, &input.data, n as isize, 1, 0.0, cols, n as isize, 1);
        col2im(cols, &geom, &mut out.data);
    });
    let plane = out.plane();
    for (o, chunk) in out.data.chunks_exact_mut(plane).enumerate() {
        chunk.iter_mut().for_each(|v| *v += bias[o]);
    }
    (out, geom)
}

pub fn deconv_backward(input: &Tensor, geom: &ConvGeom, dout: &Tensor, weight: &[f64], dweight: &mut [f64], dbias: &mut [f64]) -> Tensor {
    let (rows, n) = (geom.rows(), input.plane());
    let plane = dout.plane();
    for (o, chunk) in dout.data.chunks_exact(plane).enumerate() {
        dbias[o] += chunk.iter().sum::<f64>();
    }
    let mut din = Tensor::zeros(input.c, input.h, input.w);
    with_scratch(rows * n, |dcols| {
        im2col_into(&dout.data, geom, dcols);
        gemm(input.c, n, rows, 1.0, &input.data, n as isize, 1, dcols, 1, n as isize, 1.0, dweight, rows as isize, 1);
        gemm(input.c, rows, n, 1.0, weight, rows as isize, 1, dcols, n as isize, 1, 0.0, &mut din.data, n as isize, 1);
    });
    din
}

pub const LEAKY_SLOPE: f64 = 0.1;

pub fn leaky_relu(t: &mut Tensor) {
    t.data.iter_mut().for_each(|v| {
        if *v <= 0.0 {
            *v *= LEAKY_SLOPE
        }
    });
}

/// `grad *= f'(out)`; the output sign equals the pre-activation sign.
pub fn leaky_relu_backward(out: &Tensor, grad: &mut Tensor) {
    for (g, &o) in grad.data.iter_mut().zip(&out.data) {
        if o <= 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
}

/// Source indices and weights of 2x bilinear upsampling along one axis
/// (half-pixel centers, edges clamped).
fn upsample_taps(n: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// 2x bilinear upsampling of every channel, values multiplied by `scale`.
pub fn upsample2x(t: &Tensor, scale: f64) -> Tensor {
    let (h, w) = (t.h, t.w);
    let tx = upsample_taps(w);
    let ty = upsample_taps(h);
    let mut out = Tensor::zeros(t.c, 2 * h, 2 * w);
    let mut rows = vec![0.0; h * 2 * w];
    for c in 0..t.c {
        let src = &t.data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            for (ox, &(i0, i1, f)) in tx.iter().enumerate() {
                rows[y * 2 * w + ox] = src[y * w + i0] * (1.0 - f) + src[y * w + i1] * f;
            }
        }
        let dst = &mut out.data[c * 4 * h * w..(c + 1) * 4 * h * w];
        for (oy, &(j0, j1, f)) in ty.iter().enumerate() {
            for ox in 0..2 * w {
                dst[oy * 2 * w + ox] = scale * (rows[j0 * 2 * w + ox] * (1.0 - f) + rows[j1 * 2 * w + ox] * f);
            }
        }
    }
    out
}

/// Adjoint of [`upsample2x`].
pub fn upsample2x_backward(dout: &Tensor, scale: f64) -> Tensor {
    let (h, w) = (dout.h / 2, dout.w / 2);
    let tx = upsample_taps(w);
    let ty = upsample_taps(h);
    let mut din = Tensor::zeros(dout.c, h, w);
    let mut rows = vec![0.0; h * 2 * w];
    for c in 0..dout.c {
        rows.fill(0.0);
        let src = &dout.data[c * 4 * h * w..(c + 1) * 4 * h * w];
        for (oy, &(j0, j1, f)) in ty.iter().enumerate() {
            for ox in 0..2 * w {
                let g = scale * src[oy * 2 * w + ox];
                rows[j0 * 2 * w + ox] += g * (1.0 - f);
                rows[j1 * 2 * w + ox] += g * f;
            }
        }
        let dst = &mut din.data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            for (ox, &(i0, i1, f)) in tx.iter().enumerate() {
                let g = rows[y * 2 * w + ox];
                dst[y * w + i0] += g * (1.0 - f);
                dst[y * w + i1] += g * f;
            }
        }
    }
    din
}

pub fn concat_channels(parts: &[&Tensor]) -> Tensor {
    let (h, w) = (parts[0].h, parts[0].w);
    let c = parts.iter().map(|p| p.c).sum();
    let mut data = Vec::with_capacity(c * h * w);
    for p in parts {
        debug_assert_eq!((p.h, p.w), (h, w));
        data.extend_from_slice(&p.data);
    }
    Tensor { c, h, w, data }
}

pub fn split_channels(t: &Tensor, sizes: &[usize]) -> Vec<Tensor> {
    let plane = t.plane();
    let mut start = 0;
    sizes
        .iter()
        .map(|&c| {
            let part = Tensor { c, h: t.h, w: t.w, data: t.data[start * plane..(start + c) * plane].to_vec() };
            start += c;
            part
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    /// Direct summation reference for a strided padded convolution.
    fn conv_direct(x: &Tensor, w: &[f64], b: &[f64], oc: usize, k: usize, s: usize) -> Tensor {
        let p = k / 2;
        let oh = (x.h + 2 * p - k) / s + 1;
        let ow = (x.w + 2 * p - k) / s + 1;
        let mut out = Tensor::zeros(oc, oh, ow);
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[o];
                    for c in 0..x.c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < x.h && (ix as usize) < x.w {
                                    acc += w[((o * x.c + c) * k + ky) * k + kx] * x.data[(c * x.h + iy as usize) * x.w + ix as usize];
                                }
                            }
                        }
                    }
                    out.data[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        out
    }

    /// Transposed convolution by scattering each input pixel.
    fn deconv_direct(x: &Tensor, w: &[f64], b: &[f64], oc: usize) -> Tensor {
        let (oh, ow) = (2 * x.h, 2 * x.w);
        let mut out = Tensor::zeros(oc, oh, ow);
        for (plane, &bias) in out.data.chunks_exact_mut(oh * ow).zip(b) {
            plane.fill(bias);
        }
        for ic in 0..x.c {
            for iy in 0..x.h {
                for ix in 0..x.w {
                    let v = x.data[(ic * x.h + iy) * x.w + ix];
                    for o in 0..oc {
                        for ky in 0..4 {
                            for kx in 0..4 {
                                let y = (iy * 2 + ky) as isize - 1;
                                let xx = (ix * 2 + kx) as isize - 1;
                                if y >= 0 && xx >= 0 && (y as usize) < oh && (xx as usize) < ow {
                                    out.data[(o * oh + y as usize) * ow + xx as usize] += v * w[((ic * oc + o) * 4 + ky) * 4 + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_summation() {
        for &(oc, k, s) in &[(4, 3, 1), (2, 3, 1), (6, 3, 1), (2, 5, 1), (4, 3, 2), (4, 7, 2), (4, 5, 2)] {
            let x = Tensor { c: 3, h: 9, w: 8, data: lcg(3 * 72, 1) };
            let w = lcg(oc * 3 * k * k, 2);
            let b = lcg(oc, 3);
            let (got, _) = conv_forward(&x, &w, &b, oc, k, s);
            let want = conv_direct(&x, &w, &b, oc, k, s);
            assert_eq!((got.h, got.w), (want.h, want.w));
            for (a, e) in got.data.iter().zip(&want.data) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    /// The convolution is bilinear, so each gradient entry is the response to a unit basis input.
    #[test]
    fn conv_backward_matches_basis_responses() {
        for &(oc, k, s) in &[(2, 3, 1), (6, 3, 1), (3, 3, 2)] {
            let x = Tensor { c: 2, h: 6, w: 5, data: lcg(60, 4) };
            let w = lcg(oc * 2 * k * k, 5);
            let zero = vec![0.0; oc];
            let (out, tape) = conv_forward(&x, &w, &zero, oc, k, s);
            let r = Tensor { data: lcg(out.data.len(), 6), ..out };
            let (mut dw, mut db) = (vec![0.0; w.len()], vec![0.0; oc]);
            let din = conv_backward(&tape, &r, &w, &mut dw, &mut db, true).unwrap();
            let inner = |t: &Tensor| t.data.iter().zip(&r.data).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..w.len() {
                let mut e = vec![0.0; w.len()];
                e[i] = 1.0;
                assert!((dw[i] - inner(&conv_direct(&x, &e, &zero, oc, k, s))).abs() < 1e-12);
            }
            for j in 0..x.data.len() {
                let mut e = Tensor::zeros(2, 6, 5);
                e.data[j] = 1.0;
                assert!((din.data[j] - inner(&conv_direct(&e, &w, &zero, oc, k, s))).abs() < 1e-12);
            }
            for (o, &g) in db.iter().enumerate() {
                let plane = r.plane();
                assert!((g - r.data[o * plane..(o + 1) * plane].iter().sum::<f64>()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deconv_matches_scatter() {
        let x = Tensor { c: 3, h: 4, w: 5, data: lcg(60, 4) };
        let w = lcg(3 * 2 * 16, 5);
        let b = lcg(2, 6);
        let (got, _) = deconv_forward(&x, &w, &b, 2);
        let want = deconv_direct(&x, &w, &b, 2);
        for (a, e) in got.data.iter().zip(&want.data) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn upsample_adjoint_identity() {
        // <U x, y> == <x, U^T y>
        let x = Tensor { c: 2, h: 3, w: 4, data: lcg(24, 7) };
        let y = Tensor { c: 2, h: 6, w: 8, data: lcg(96, 8) };
        let ux = upsample2x(&x, 2.0);
        let uty = upsample2x_backward(&y, 2.0);
        let lhs: f64 = ux.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&uty.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn upsample_of_constant_is_constant() {
        let x = Tensor { c: 1, h: 2, w: 3, data: vec![1.5; 6] };
        assert!(upsample2x(&x, 2.0).data.iter().all(|&v| (v - 3.0).abs() < 1e-15));
    }
}
