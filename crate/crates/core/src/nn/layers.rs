//! Fixed layer menu over a flat parameter slice. Each layer owns offsets
//! into the slice; forward and backward take the slice explicitly so a
//! single parameter vector can be shared read-only across evaluators.

use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

/// Allocates consecutive parameter ranges.
#[derive(Debug, Default)]
pub struct Alloc {
    next: usize,
}

impl Alloc {
    pub fn take(&mut self, n: usize) -> usize {
        let at = self.next;
        self.next += n;
        at
    }

    pub fn total(&self) -> usize {
        self.next
    }
}

/// Fully connected layer, `y = W x + b` with `W` row-major `outputs × inputs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: usize,
    pub b: usize,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, alloc: &mut Alloc) -> Self {
        let w = alloc.take(inputs * outputs);
        let b = alloc.take(outputs);
        Self { inputs, outputs, w, b }
    }

    pub fn weights<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w..self.w + self.inputs * self.outputs]
    }

    pub fn init(&self, p: &mut [f64], rng: &mut SimRng) {
        let bound = 1.0 / (self.inputs as f64).sqrt();
        for v in &mut p[self.w..self.w + self.inputs * self.outputs] {
            *v = rng.uniform(-bound, bound);
        }
        p[self.b..self.b + self.outputs].fill(0.0);
    }

    pub fn forward(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        let w = self.weights(p);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &w[o * self.inputs..(o + 1) * self.inputs];
            *yo = p[self.b + o] + dot(row, x);
        }
    }

    /// Accumulates `dL/dW = dy xᵀ`, `dL/db = dy` into `g` and, when asked,
    /// writes `dL/dx = Wᵀ dy` into `dx` (overwriting).
    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64], dx: Option<&mut [f64]>) {
        let n = self.inputs;
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[self.b + o] += d;
            axpy(d, x, &mut g[self.w + o * n..self.w + (o + 1) * n]);
        }
        if let Some(dx) = dx {
            dx.fill(0.0);
            let w = self.weights(p);
            for (o, &d) in dy.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &w[o * n..(o + 1) * n], dx);
                }
            }
        }
    }
}

/// Stride-1 convolution with same padding over a `channels × h × w` map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub height: usize,
    pub width: usize,
    pub w: usize,
    pub b: usize,
}

impl Conv2d {
    pub fn new(cin: usize, cout: usize, kernel: usize, height: usize, width: usize, alloc: &mut Alloc) -> Self {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        let w = alloc.take(cout * cin * kernel * kernel);
        let b = alloc.take(cout);
        Self { cin, cout, kernel, height, width, w, b }
    }

    pub fn input_len(&self) -> usize {
        self.cin * self.height * self.width
    }

    pub fn output_len(&self) -> usize {
        self.cout * self.height * self.width
    }

    pub fn init(&self, p: &mut [f64], rng: &mut SimRng) {
        let fan_in = self.cin * self.kernel * self.kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in &mut p[self.w..self.w + self.cout * fan_in] {
            *v = rng.uniform(-bound, bound);
        }
        p[self.b..self.b + self.cout].fill(0.0);
    }

    fn widx(&self, co: usize, ci: usize, ky: usize, kx: usize) -> usize {
        self.w + ((co * self.cin + ci) * self.kernel + ky) * self.kernel + kx
    }

    /// Output rows `oy` for which `oy + ky - pad` is inside the map.
    fn span(&self, k: usize, len: usize) -> (usize, usize) {
        let pad = self.kernel / 2;
        let lo = pad.saturating_sub(k);
        let hi = (len + pad).saturating_sub(k).min(len);
        (lo, hi)
    }

    pub fn forward(&self, p: &[f64], x: &[f64], y: &mut [f64]) {
        let (h, w, pad) = (self.height, self.width, self.kernel / 2);
        let plane = h * w;
        for co in 0..self.cout {
            let out = &mut y[co * plane..(co + 1) * plane];
            out.fill(p[self.b + co]);
            for ci in 0..self.cin {
                let inp = &x[ci * plane..(ci + 1) * plane];
                for ky in 0..self.kernel {
                    let (y0, y1) = self.span(ky, h);
                    for kx in 0..self.kernel {
                        let wv = p[self.widx(co, ci, ky, kx)];
                        if wv == 0.0 {
                            continue;
                        }
                        let (x0, x1) = self.span(kx, w);
                        for oy in y0..y1 {
                            let iy = oy + ky - pad;
                            let orow = &mut out[oy * w + x0..oy * w + x1];
                            let irow = &inp[iy * w + x0 + kx - pad..iy * w + x1 + kx - pad];
                            axpy(wv, irow, orow);
                        }
                    }
                }
            }
        }
    }

    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], g: &mut [f64], mut dx: Option<&mut [f64]>) {
        let (h, w, pad) = (self.height, self.width, self.kernel / 2);
        let plane = h * w;
        if let Some(dx) = dx.as_deref_mut() {
            dx.fill(0.0);
        }
        for co in 0..self.cout {
            let dout = &dy[co * plane..(co + 1) * plane];
            g[self.b + co] += dout.iter().sum::<f64>();
            for ci in 0..self.cin {
                let inp = &x[ci * plane..(ci + 1) * plane];
                for ky in 0..self.kernel {
                    let (y0, y1) = self.span(ky, h);
                    for kx in 0..self.kernel {
                        let (x0, x1) = self.span(kx, w);
                        let wi = self.widx(co, ci, ky, kx);
                        let mut acc = 0.0;
                        for oy in y0..y1 {
                            let iy = oy + ky - pad;
                            let drow = &dout[oy * w + x0..oy * w + x1];
                            let irow = &inp[iy * w + x0 + kx - pad..iy * w + x1 + kx - pad];
                            acc += dot(drow, irow);
                        }
                        g[wi] += acc;
                        if let Some(dx) = dx.as_deref_mut() {
                            let wv = p[wi];
                            if wv == 0.0 {
                                continue;
                            }
                            let din = &mut dx[ci * plane..(ci + 1) * plane];
                            for oy in y0..y1 {
                                let iy = oy + ky - pad;
                                let drow = &dout[oy * w + x0..oy * w + x1];
                                axpy(wv, drow, &mut din[iy * w + x0 + kx - pad..iy * w + x1 + kx - pad]);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Values recorded by one LSTM step for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub prev: LstmState,
    /// Activated gates in `[i, f, g, o]` blocks.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Single-layer LSTM with gate blocks ordered input, forget, cell, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
}

impl Lstm {
    pub fn new(inputs: usize, hidden: usize, alloc: &mut Alloc) -> Self {
        let wx = alloc.take(4 * hidden * inputs);
        let wh = alloc.take(4 * hidden * hidden);
        let b = alloc.take(4 * hidden);
        Self { inputs, hidden, wx, wh, b }
    }

    /// Fan-in uniform input weights, orthogonal recurrent blocks, forget
    /// bias 1.
    pub fn init(&self, p: &mut [f64], rng: &mut SimRng) {
        let (n, hd) = (self.inputs, self.hidden);
        let bound = 1.0 / (n as f64).sqrt();
        for v in &mut p[self.wx..self.wx + 4 * hd * n] {
            *v = rng.uniform(-bound, bound);
        }
        for block in 0..4 {
            let q = orthogonal(hd, rng);
            let at = self.wh + block * hd * hd;
            p[at..at + hd * hd].copy_from_slice(&q);
        }
        p[self.b..self.b + 4 * hd].fill(0.0);
        p[self.b + hd..self.b + 2 * hd].fill(1.0);
    }

    pub fn step(&self, p: &[f64], x: &[f64], prev: &LstmState) -> (LstmState, LstmCache) {
        let (n, hd) = (self.inputs, self.hidden);
        let mut gates = p[self.b..self.b + 4 * hd].to_vec();
        for (r, z) in gates.iter_mut().enumerate() {
            *z += dot(&p[self.wx + r * n..self.wx + (r + 1) * n], x)
                + dot(&p[self.wh + r * hd..self.wh + (r + 1) * hd], &prev.h);
        }
        for (r, z) in gates.iter_mut().enumerate() {
            *z = if (2 * hd..3 * hd).contains(&r) { z.tanh() } else { sigmoid(*z) };
        }
        let mut c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            c[j] = f * prev.c[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        let state = LstmState { h, c: c.clone() };
        (state, LstmCache { x: x.to_vec(), prev: prev.clone(), gates, c, tanh_c })
    }

    /// Backpropagates one step given `dh`, `dc` flowing into its outputs.
    /// Accumulates parameter gradients and returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        p: &[f64],
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        g: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, hd) = (self.inputs, self.hidden);
        let gt = &cache.gates;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, gg, o) = (gt[j], gt[hd + j], gt[2 * hd + j], gt[3 * hd + j]);
            let tc = cache.tanh_c[j];
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dcj * gg * i * (1.0 - i);
            dz[hd + j] = dcj * cache.prev.c[j] * f * (1.0 - f);
            dz[2 * hd + j] = dcj * i * (1.0 - gg * gg);
            dz[3 * hd + j] = dh[j] * tc * o * (1.0 - o);
            dc_prev[j] = dcj * f;
        }
        let mut dx = vec![0.0; n];
        let mut dh_prev = vec![0.0; hd];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[self.b + r] += d;
            axpy(d, &cache.x, &mut g[self.wx + r * n..self.wx + (r + 1) * n]);
            axpy(d, &cache.prev.h, &mut g[self.wh + r * hd..self.wh + (r + 1) * hd]);
            axpy(d, &p[self.wx + r * n..self.wx + (r + 1) * n], &mut dx);
            axpy(d, &p[self.wh + r * hd..self.wh + (r + 1) * hd], &mut dh_prev);
        }
        (dx, dh_prev, dc_prev)
    }
}

/// Row-major `n × n` orthogonal matrix from Gram-Schmidt on Gaussian rows.
pub fn orthogonal(n: usize, rng: &mut SimRng) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    let mut r = 0;
    while r < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for k in 0..r {
            let row = &q[k * n..(k + 1) * n];
            let proj = dot(&v, row);
            axpy(-proj, row, &mut v);
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        for (dst, x) in q[r * n..(r + 1) * n].iter_mut().zip(&v) {
            *dst = x / norm;
        }
        r += 1;
    }
    q
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
