//! Batched forward jets and their layer-level reverse sweep.
//!
//! Activations of a layer are stored as one row-major matrix with
//! `comps · n` columns: the first `n` columns hold values, followed (in jet
//! mode) by the ∂x, ∂t and ∂xx blocks. A dense layer is then a single GEMM on
//! the whole block (the bias touches only the value columns), and the reverse
//! sweep is two more GEMMs per layer plus the adjoint of the second-order
//! chain rule.
//!
//! This computes the same gradient as recording every scalar on
//! [`crate::autodiff::Tape`], which the tests use as a reference.

use super::Network;
use crate::autodiff::Jet;
use crate::sampling::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// Values only.
    Value,
    /// Values with ∂x, ∂t, ∂xx.
    Jet,
}

impl Order {
    pub fn comps(self) -> usize {
        match self {
            Order::Value => 1,
            Order::Jet => 4,
        }
    }
}

/// Buffers for one batch; reused across epochs to avoid reallocation.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    order: Option<Order>,
    n: usize,
    /// Per point: multipliers of θ₁ and θ₂ in the wave-layer value, and of
    /// θ₁ in ∂x, θ₂ in ∂t.
    wave_coef: Vec<[f64; 4]>,
    /// `acts[0]` feeds dense layer 0; `acts[l + 1]` is its output.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    /// `[f', f'', f''']` blocks of each layer activation, `3 · fan_out · n`.
    derivs: Vec<Vec<f64>>,
    adj_pre: Vec<f64>,
    adj_act: Vec<f64>,
    adj_next: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Output block: values, then (jet mode) ∂x, ∂t, ∂xx, each `n` long.
    pub fn outputs(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn values(&self) -> &[f64] {
        &self.outputs()[..self.n]
    }

    /// Output jet of point `i` (jet mode only).
    pub fn jet(&self, i: usize) -> Jet<f64> {
        assert_eq!(self.order, Some(Order::Jet), "workspace holds values only");
        let o = self.outputs();
        let n = self.n;
        Jet::new(o[i], o[n + i], o[2 * n + i], o[3 * n + i])
    }
}

/// Zeroed buffer of `len`.
fn resize(buf: &mut Vec<f64>, len: usize) {
    buf.clear();
    buf.resize(len, 0.0);
}

/// Buffer of `len` with unspecified contents, for outputs written in full.
fn reserve(buf: &mut Vec<f64>, len: usize) {
    buf.resize(len, 0.0);
    buf.truncate(len);
}

/// `c = alpha · a · b + beta · c` for a row-major `m × n` output.
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
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access of `a`, `b` and
    // `c` inside its slice, and `c` does not alias the inputs.
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
            n as isize,
            1,
        );
    }
}

impl Network {
    /// Evaluates the network on every point, storing intermediates for
    /// [`Network::backward_batch`].
    pub fn forward_batch(&self, params: &[f64], points: &[Point], order: Order, ws: &mut Workspace) {
        assert_eq!(params.len(), self.layout.len());
        let n = points.len();
        let comps = order.comps();
        let cols = comps * n;
        let layers = &self.layout.layers;
        ws.order = Some(order);
        ws.n = n;
        ws.acts.resize_with(layers.len() + 1, Vec::new);
        ws.pre.resize_with(layers.len(), Vec::new);
        ws.derivs.resize_with(layers.len(), Vec::new);

        // Input block.
        let input = &mut ws.acts[0];
        if self.layout.has_wave() {
            resize(input, cols);
            ws.wave_coef.clear();
            let (th1, th2, th3) = (params[0], params[1], params[2]);
            for (i, p) in points.iter().enumerate() {
                let sp = self.scaler.scale(p);
                let (r1, r2) = sp.wave_factors();
                let coef = [r1 * sp.x, r2 * sp.t, r1 * sp.s_x, r2 * sp.s_t];
                ws.wave_coef.push(coef);
                input[i] = th1 * coef[0] + th2 * coef[1] + th3;
                if comps == 4 {
                    input[n + i] = th1 * coef[2];
                    input[2 * n + i] = th2 * coef[3];
                }
            }
        } else {
            let fan_in = layers[0].fan_in;
            resize(input, fan_in * cols);
            for (i, p) in points.iter().enumerate() {
                let sp = self.scaler.scale(p);
                input[i] = sp.x;
                input[cols + i] = sp.t;
                if fan_in == 3 {
                    if let super::RhoFeature::Unit(r) = sp.rho {
                        input[2 * cols + i] = r;
                    }
                }
                if comps == 4 {
                    input[n + i] = sp.s_x;
                    input[cols + 2 * n + i] = sp.s_t;
                }
            }
        }

        for (l, layer) in layers.iter().enumerate() {
            let act = self.layer_activation(l);
            let (fan_in, fan_out) = (layer.fan_in, layer.fan_out);
            let pre = &mut ws.pre[l];
            reserve(pre, fan_out * cols);
            gemm(
                fan_out,
                fan_in,
                cols,
                &params[layer.weights()],
                (fan_in, 1),
                &ws.acts[l],
                (cols, 1),
                0.0,
                pre,
            );
            let bias = &params[layer.biases()];
            let derivs = &mut ws.derivs[l];
            reserve(derivs, 3 * fan_out * n);
            let mut out = std::mem::take(&mut ws.acts[l + 1]);
            reserve(&mut out, fan_out * cols);
            for j in 0..fan_out {
                let row = j * cols;
                for i in 0..n {
                    pre[row + i] += bias[j];
                    let a = pre[row + i];
                    let [f, d1, d2, d3] = act.derivatives(a);
                    out[row + i] = f;
                    let k = 3 * (j * n + i);
                    derivs[k] = d1;
                    derivs[k + 1] = d2;
                    derivs[k + 2] = d3;
                    if comps == 4 {
                        let ax = pre[row + n + i];
                        out[row + n + i] = d1 * ax;
                        out[row + 2 * n + i] = d1 * pre[row + 2 * n + i];
                        out[row + 3 * n + i] = d2 * ax * ax + d1 * pre[row + 3 * n + i];
                    }
                }
            }
            ws.acts[l + 1] = out;
        }
    }

    /// Accumulates into `grad` the parameter gradient of a loss whose
    /// adjoint with respect to [`Workspace::outputs`] is `out_adj`.
    pub fn backward_batch(&self, params: &[f64], ws: &mut Workspace, out_adj: &[f64], grad: &mut [f64]) {
        let order = ws.order.expect("backward_batch before forward_batch");
        let n = ws.n;
        let comps = order.comps();
        let cols = comps * n;
        assert_eq!(out_adj.len(), cols);
        assert_eq!(grad.len(), self.layout.len());
        let layers = &self.layout.layers;

        ws.adj_act.clear();
        ws.adj_act.extend_from_slice(out_adj);

        for l in (0..layers.len()).rev() {
            let layer = layers[l];
            let (fan_in, fan_out) = (layer.fan_in, layer.fan_out);
            let pre = &ws.pre[l];
            let derivs = &ws.derivs[l];
            let adj_y = &ws.adj_act;
            let adj_a = &mut ws.adj_pre;
            reserve(adj_a, fan_out * cols);
            for j in 0..fan_out {
                let row = j * cols;
                for i in 0..n {
                    let k = 3 * (j * n + i);
                    let (d1, d2, d3) = (derivs[k], derivs[k + 1], derivs[k + 2]);
                    let yv = adj_y[row + i];
                    if comps == 1 {
                        adj_a[row + i] = yv * d1;
                    } else {
                        let (yx, yt, yxx) = (adj_y[row + n + i], adj_y[row + 2 * n + i], adj_y[row + 3 * n + i]);
                        let (ax, at, axx) = (pre[row + n + i], pre[row + 2 * n + i], pre[row + 3 * n + i]);
                        adj_a[row + i] = yv * d1 + (yx * ax + yt * at + yxx * axx) * d2 + yxx * ax * ax * d3;
                        adj_a[row + n + i] = yx * d1 + 2.0 * yxx * d2 * ax;
                        adj_a[row + 2 * n + i] = yt * d1;
                        adj_a[row + 3 * n + i] = yxx * d1;
                    }
                }
            }

            // dW += Ā · Zᵀ
            let z = &ws.acts[l];
            gemm(fan_out, cols, fan_in, adj_a, (cols, 1), z, (1, cols), 1.0, &mut grad[layer.weights()]);
            for (j, g) in grad[layer.biases()].iter_mut().enumerate() {
                *g += adj_a[j * cols..j * cols + n].iter().sum::<f64>();
            }

            if l == 0 && !self.layout.has_wave() {
                break;
            }
            // Z̄ = Wᵀ · Ā
            let next = &mut ws.adj_next;
            reserve(next, fan_in * cols);
            gemm(fan_in, fan_out, cols, &params[layer.weights()], (1, fan_in), adj_a, (cols, 1), 0.0, next);
            std::mem::swap(&mut ws.adj_act, &mut ws.adj_next);
        }

        if self.layout.has_wave() {
            let adj = &ws.adj_act;
            let (mut g1, mut g2, mut g3) = (0.0, 0.0, 0.0);
            for (i, c) in ws.wave_coef.iter().enumerate() {
                g1 += adj[i] * c[0];
                g2 += adj[i] * c[1];
                g3 += adj[i];
                if comps == 4 {
                    g1 += adj[n + i] * c[2];
                    g2 += adj[2 * n + i] * c[3];
                }
            }
            grad[0] += g1;
            grad[1] += g2;
            grad[2] += g3;
        }
    }

    /// Values at many points, without keeping a workspace around.
    pub fn predict(&self, params: &[f64], points: &[Point]) -> Vec<f64> {
        let mut ws = Workspace::new();
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(4096) {
            self.forward_batch(params, chunk, Order::Value, &mut ws);
            out.extend_from_slice(ws.values());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::model::{Activation, Architecture, NetworkConfig};
    use crate::sampling::{epoch_rng, Domain, Interval, RhoSpec};
    use rand::Rng;

    fn variants() -> Vec<Network> {
        let fixed = Domain::standard(RhoSpec::Fixed(1e3));
        let range = Domain::standard(RhoSpec::Range(Interval { lo: 100.0, hi: 1e4 }));
        let mut out = Vec::new();
        for arch in [Architecture::Standard, Architecture::Wave] {
            for act in [Activation::Tanh, Activation::Swish, Activation::Sigmoid, Activation::Sine] {
                let mut c = NetworkConfig::default_for(arch, false);
                c.activation = act;
                c.neurons = 7;
                out.push(Network::new(c, &fixed).unwrap());
            }
            let mut g = NetworkConfig::default_for(arch, true);
            g.neurons = 6;
            out.push(Network::new(g, &range).unwrap());
        }
        out
    }

    fn points(net: &Network, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = epoch_rng(seed, 0);
        (0..n)
            .map(|_| Point {
                x: rng.gen_range(-5.0..5.0),
                t: rng.gen_range(0.0..0.004),
                rho: if net.is_generalizing() { rng.gen_range(100.0..1e4) } else { 1e3 },
            })
            .collect()
    }

    #[test]
    fn batch_forward_matches_pointwise() {
        for net in variants() {
            let p = net.init(4);
            let pts = points(&net, 17, 1);
            let mut ws = Workspace::new();
            net.forward_batch(&p.values, &pts, Order::Jet, &mut ws);
            for (i, pt) in pts.iter().enumerate() {
                let reference = net.eval(&p.values, pt);
                let got = ws.jet(i);
                for (a, b) in got.values().iter().zip(reference.values()) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{:?}", net.config);
                }
            }
            let values = net.predict(&p.values, &pts);
            for (v, pt) in values.iter().zip(&pts) {
                assert!((v - net.eval(&p.values, pt).v).abs() < 1e-14);
            }
        }
    }

    /// Random linear functional of all output components, differentiated by
    /// the batch sweep and by the scalar tape.
    #[test]
    fn batch_backward_matches_tape() {
        for net in variants() {
            let p = net.init(8);
            let pts = points(&net, 9, 2);
            let mut rng = epoch_rng(3, 0);
            for order in [Order::Value, Order::Jet] {
                let comps = order.comps();
                let adj: Vec<f64> = (0..comps * pts.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut ws = Workspace::new();
                net.forward_batch(&p.values, &pts, order, &mut ws);
                let mut grad = vec![0.0; net.param_count()];
                net.backward_batch(&p.values, &mut ws, &adj, &mut grad);

                let tape = Tape::new();
                let vars = tape.parameters(&p.values);
                let mut loss = crate::autodiff::Var::constant(0.0);
                let n = pts.len();
                for (i, pt) in pts.iter().enumerate() {
                    let jet = net.eval(&vars, pt);
                    let comps_v = [jet.v, jet.dx, jet.dt, jet.dxx];
                    for (c, v) in comps_v.iter().take(comps).enumerate() {
                        loss = loss + *v * crate::autodiff::Var::constant(adj[c * n + i]);
                    }
                }
                let reference = tape.gradient(loss).unwrap();
                for (k, (a, b)) in grad.iter().zip(&reference).enumerate() {
                    assert!(
                        (a - b).abs() <= 1e-10 * b.abs().max(1e-3),
                        "{:?} {order:?} param {k}: {a} vs {b}",
                        net.config
                    );
                }
            }
        }
    }

    #[test]
    fn workspace_is_reusable_across_sizes() {
        let net = &variants()[0];
        let p = net.init(1);
        let mut ws = Workspace::new();
        for n in [5, 12, 3] {
            let pts = points(net, n, n as u64);
            net.forward_batch(&p.values, &pts, Order::Jet, &mut ws);
            assert_eq!(ws.len(), n);
            let fresh = {
                let mut w = Workspace::new();
                net.forward_batch(&p.values, &pts, Order::Jet, &mut w);
                w.outputs().to_vec()
            };
            assert_eq!(ws.outputs(), &fresh[..]);
        }
    }
}
