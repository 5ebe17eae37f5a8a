use super::{Network, RhoFeature};
use crate::autodiff::{jet_unary, Jet, Scalar};
use crate::sampling::Point;

pub(super) fn eval<S: Scalar>(net: &Network, params: &[S], x: S, t: S, rho: f64) -> Jet<S> {
    debug_assert_eq!(params.len(), net.layout.len());
    let c = S::constant;
    // Scaling is affine in x and t, so only the constant part needs a point.
    let sp = net.scaler.scale(&Point { x: x.value(), t: t.value(), rho });
    let (xs, ts) = net.scaler.scale_xt(x, t);
    let x = Jet::seed_x(xs, sp.s_x);
    let t = Jet::seed_t(ts, sp.s_t);

    let mut h: Vec<Jet<S>> = if net.layout.has_wave() {
        let (r1, r2) = sp.wave_factors();
        let z = x.scale(params[0] * c(r1)) + t.scale(params[1] * c(r2));
        vec![z.shift(params[2])]
    } else {
        match sp.rho {
            RhoFeature::Unit(r) => vec![x, t, Jet::constant(c(r))],
            _ => vec![x, t],
        }
    };

    for (l, layer) in net.layout.layers.iter().enumerate() {
        let act = net.layer_activation(l);
        let w = &params[layer.weights()];
        let b = &params[layer.biases()];
        h = (0..layer.fan_out)
            .map(|j| {
                let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                let mut acc = h[0].scale(row[0]);
                for (hi, &wi) in h.iter().zip(row).skip(1) {
                    acc = acc + hi.scale(wi);
                }
                jet_unary(act, acc.shift(b[j]))
            })
            .collect();
    }
    h[0]
}

/// Output value only, without input derivatives.
pub(super) fn eval_value<S: Scalar>(net: &Network, params: &[S], point: &Point) -> S {
    let c = S::constant;
    let sp = net.scaler.scale(point);
    let mut h: Vec<S> = if net.layout.has_wave() {
        let (r1, r2) = sp.wave_factors();
        vec![params[0] * c(r1 * sp.x) + params[1] * c(r2 * sp.t) + params[2]]
    } else {
        match sp.rho {
            RhoFeature::Unit(r) => vec![c(sp.x), c(sp.t), c(r)],
            _ => vec![c(sp.x), c(sp.t)],
        }
    };
    for (l, layer) in net.layout.layers.iter().enumerate() {
        let act = net.layer_activation(l);
        let w = &params[layer.weights()];
        let b = &params[layer.biases()];
        h = (0..layer.fan_out)
            .map(|j| {
                let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                let mut acc = b[j];
                for (&hi, &wi) in h.iter().zip(row) {
                    acc = acc + hi * wi;
                }
                act.apply(acc).0
            })
            .collect();
    }
    h[0]
}
