use alloc::vec;
use alloc::vec::Vec;

use super::optim::{bce_with_logits, check_labels, sigmoid};
use super::params::{check_layout, ParamSet};
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::linearizer::TokenSequence;

const LN_EPS: f64 = 1e-9;

/// One encoded patient: token sequences in time order plus task labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub events: Vec<TokenSequence>,
    pub labels: Vec<f64>,
}

struct Gru<S> {
    w_ih: S,
    w_hh: S,
    b_ih: S,
    b_hh: S,
}

struct Norm<S> {
    gain: S,
    bias: S,
}

struct Net<S> {
    emb: S,
    enc: Gru<S>,
    enc_norm: Option<Norm<S>>,
    agg: Gru<S>,
    agg_norm: Option<Norm<S>>,
    head_w: S,
    head_b: S,
}

impl<S> Net<S> {
    /// Assigns slices in layout order.
    fn from_iter(mut it: impl Iterator<Item = S>, layer_norm: bool) -> Self {
        let mut next = || it.next().expect("layout checked");
        let emb = next();
        let enc = Gru { w_ih: next(), w_hh: next(), b_ih: next(), b_hh: next() };
        let enc_norm = layer_norm.then(|| Norm { gain: next(), bias: next() });
        let agg = Gru { w_ih: next(), w_hh: next(), b_ih: next(), b_hh: next() };
        let agg_norm = layer_norm.then(|| Norm { gain: next(), bias: next() });
        let head_w = next();
        let head_b = next();
        Net { emb, enc, enc_norm, agg, agg_norm, head_w, head_b }
    }
}

fn view<'a>(params: &'a ParamSet, hp: &Hyperparams) -> Result<Net<&'a [f64]>> {
    check_layout(params, hp)?;
    Ok(Net::from_iter(params.tensors.iter().map(|t| t.values.as_slice()), hp.layer_norm))
}

fn view_mut<'a>(grads: &'a mut ParamSet, hp: &Hyperparams) -> Result<Net<&'a mut [f64]>> {
    check_layout(grads, hp)?;
    Ok(Net::from_iter(
        grads.tensors.iter_mut().map(|t| t.values.as_mut_slice()),
        hp.layer_norm,
    ))
}

/// `out += W x` for row-major `W` of shape `[out.len(), x.len()]`.
fn matvec_add(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T g`.
fn matvec_t_add(dx: &mut [f64], w: &[f64], g: &[f64]) {
    let cols = dx.len();
    for (gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if *gi == 0.0 {
            continue;
        }
        for (d, a) in dx.iter_mut().zip(row) {
            *d += a * gi;
        }
    }
}

/// `dW += g x^T`.
fn outer_add(dw: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (gi, row) in g.iter().zip(dw.chunks_exact_mut(cols)) {
        if *gi == 0.0 {
            continue;
        }
        for (d, xv) in row.iter_mut().zip(x) {
            *d += gi * xv;
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Activations of one GRU pass over `steps` inputs.
#[derive(Debug, Clone, PartialEq)]
struct GruTrace {
    input: usize,
    hidden: usize,
    xs: Vec<f64>,
    /// `h_0 .. h_T`, `h_0 = 0`.
    hs: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h_{t-1} + b_hn`, needed for the reset-gate gradient.
    hn: Vec<f64>,
}

impl GruTrace {
    fn steps(&self) -> usize {
        self.r.len() / self.hidden
    }

    fn last(&self) -> &[f64] {
        let h = self.hidden;
        &self.hs[self.hs.len() - h..]
    }
}

fn gru_forward(gru: &Gru<&[f64]>, xs: Vec<f64>, input: usize, hidden: usize) -> GruTrace {
    let steps = xs.len() / input;
    let h = hidden;
    let mut tr = GruTrace {
        input,
        hidden,
        xs,
        hs: vec![0.0; (steps + 1) * h],
        r: vec![0.0; steps * h],
        u: vec![0.0; steps * h],
        n: vec![0.0; steps * h],
        hn: vec![0.0; steps * h],
    };
    let mut gi = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];
    for t in 0..steps {
        let x = &tr.xs[t * input..(t + 1) * input];
        gi.copy_from_slice(gru.b_ih);
        matvec_add(&mut gi, gru.w_ih, x);
        let (prev, rest) = tr.hs.split_at_mut((t + 1) * h);
        let h_prev = &prev[t * h..];
        gh.copy_from_slice(gru.b_hh);
        matvec_add(&mut gh, gru.w_hh, h_prev);
        let h_next = &mut rest[..h];
        for j in 0..h {
            let r = sigmoid(gi[j] + gh[j]);
            let u = sigmoid(gi[h + j] + gh[h + j]);
            let hn = gh[2 * h + j];
            let n = libm::tanh(gi[2 * h + j] + r * hn);
            h_next[j] = (1.0 - u) * n + u * h_prev[j];
            tr.r[t * h + j] = r;
            tr.u[t * h + j] = u;
            tr.n[t * h + j] = n;
            tr.hn[t * h + j] = hn;
        }
    }
    tr
}

/// Backpropagation through time. Returns input gradients when `want_dx`.
fn gru_backward(
    gru: &Gru<&[f64]>,
    grad: &mut Gru<&mut [f64]>,
    tr: &GruTrace,
    dh_last: &[f64],
    want_dx: bool,
) -> Vec<f64> {
    let h = tr.hidden;
    let input = tr.input;
    let steps = tr.steps();
    let mut dxs = if want_dx { vec![0.0; steps * input] } else { Vec::new() };
    let mut dh = dh_last.to_vec();
    let mut gi = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];
    let mut dh_prev = vec![0.0; h];
    for t in (0..steps).rev() {
        let h_prev = &tr.hs[t * h..(t + 1) * h];
        let x = &tr.xs[t * input..(t + 1) * input];
        for j in 0..h {
            let (r, u, n, hn) = (tr.r[t * h + j], tr.u[t * h + j], tr.n[t * h + j], tr.hn[t * h + j]);
            let d = dh[j];
            let dn_pre = d * (1.0 - u) * (1.0 - n * n);
            let du_pre = d * (h_prev[j] - n) * u * (1.0 - u);
            let dr_pre = dn_pre * hn * r * (1.0 - r);
            gi[j] = dr_pre;
            gi[h + j] = du_pre;
            gi[2 * h + j] = dn_pre;
            gh[j] = dr_pre;
            gh[h + j] = du_pre;
            gh[2 * h + j] = dn_pre * r;
            dh_prev[j] = d * u;
        }
        outer_add(grad.w_ih, &gi, x);
        add_into(grad.b_ih, &gi);
        outer_add(grad.w_hh, &gh, h_prev);
        add_into(grad.b_hh, &gh);
        if want_dx {
            matvec_t_add(&mut dxs[t * input..(t + 1) * input], gru.w_ih, &gi);
        }
        matvec_t_add(&mut dh_prev, gru.w_hh, &gh);
        core::mem::swap(&mut dh, &mut dh_prev);
    }
    dxs
}

#[derive(Debug, Clone, PartialEq)]
struct NormCache {
    xhat: Vec<f64>,
    inv_std: f64,
}

fn layer_norm(norm: &Norm<&[f64]>, x: &[f64]) -> (Vec<f64>, NormCache) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / libm::sqrt(var + LN_EPS);
    let xhat: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y = xhat
        .iter()
        .zip(norm.gain.iter().zip(norm.bias))
        .map(|(xh, (g, b))| g * xh + b)
        .collect();
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(
    norm: &Norm<&[f64]>,
    grad: Option<&mut Norm<&mut [f64]>>,
    cache: &NormCache,
    dy: &[f64],
) -> Vec<f64> {
    if let Some(grad) = grad {
        for j in 0..dy.len() {
            grad.gain[j] += dy[j] * cache.xhat[j];
            grad.bias[j] += dy[j];
        }
    }
    let n = dy.len() as f64;
    let dxhat: Vec<f64> = dy.iter().zip(norm.gain).map(|(d, g)| d * g).collect();
    let mean_d = dxhat.iter().sum::<f64>() / n;
    let mean_dx = dxhat.iter().zip(&cache.xhat).map(|(d, x)| d * x).sum::<f64>() / n;
    dxhat
        .iter()
        .zip(&cache.xhat)
        .map(|(d, x)| cache.inv_std * (d - mean_d - x * mean_dx))
        .collect()
}

/// Activations of one event encoding. `z` is the event vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCache {
    tokens: Vec<u32>,
    trace: GruTrace,
    norm: Option<NormCache>,
    pub z: Vec<f64>,
}

impl EventCache {
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }
}

/// Everything needed to backpropagate one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    events: Vec<EventCache>,
    agg: GruTrace,
    agg_norm: Option<NormCache>,
    head_in: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardCache {
    pub fn events(&self) -> &[EventCache] {
        &self.events
    }

    /// The normalized aggregator state fed to the head.
    pub fn patient_vector(&self) -> &[f64] {
        &self.head_in
    }
}

fn encode_event(net: &Net<&[f64]>, hp: &Hyperparams, tokens: &[u32]) -> Result<EventCache> {
    if tokens.is_empty() {
        return Err(Error::EmptyEvent);
    }
    let tokens = &tokens[..tokens.len().min(hp.max_tokens_per_event)];
    let e = hp.embed_dim;
    let mut xs = Vec::with_capacity(tokens.len() * e);
    for &id in tokens {
        if id as usize >= hp.vocab_size {
            return Err(Error::TokenOutOfRange { id, vocab_size: hp.vocab_size });
        }
        let row = id as usize * e;
        xs.extend_from_slice(&net.emb[row..row + e]);
    }
    let trace = gru_forward(&net.enc, xs, e, hp.hidden_dim);
    let (z, norm) = match &net.enc_norm {
        Some(n) => {
            let (y, c) = layer_norm(n, trace.last());
            (y, Some(c))
        }
        None => (trace.last().to_vec(), None),
    };
    Ok(EventCache { tokens: tokens.to_vec(), trace, norm, z })
}

/// Encodes one event's tokens into its event vector.
pub fn forward_event(tokens: &TokenSequence, params: &ParamSet, hp: &Hyperparams) -> Result<EventCache> {
    let net = view(params, hp)?;
    encode_event(&net, hp, &tokens.ids)
}

fn forward_with(net: &Net<&[f64]>, hp: &Hyperparams, events: &[TokenSequence]) -> Result<ForwardCache> {
    if events.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let recent = &events[events.len().saturating_sub(hp.max_events_per_patient)..];
    let h = hp.hidden_dim;
    let mut caches = Vec::with_capacity(recent.len());
    let mut zs = Vec::with_capacity(recent.len() * h);
    for ev in recent {
        let c = encode_event(net, hp, &ev.ids)?;
        zs.extend_from_slice(&c.z);
        caches.push(c);
    }
    let agg = gru_forward(&net.agg, zs, h, h);
    let (head_in, agg_norm) = match &net.agg_norm {
        Some(n) => {
            let (y, c) = layer_norm(n, agg.last());
            (y, Some(c))
        }
        None => (agg.last().to_vec(), None),
    };
    let mut logits = net.head_b.to_vec();
    matvec_add(&mut logits, net.head_w, &head_in);
    Ok(ForwardCache { events: caches, agg, agg_norm, head_in, logits })
}

/// Encodes every event, aggregates them in order and applies the head.
/// Only the `max_events_per_patient` most recent events are used.
pub fn forward_patient(
    events: &[TokenSequence],
    params: &ParamSet,
    hp: &Hyperparams,
) -> Result<ForwardCache> {
    let net = view(params, hp)?;
    forward_with(&net, hp, events)
}

fn backward_with(
    net: &Net<&[f64]>,
    grad: &mut Net<&mut [f64]>,
    hp: &Hyperparams,
    cache: &ForwardCache,
    labels: &[f64],
    scale: f64,
) -> Result<f64> {
    let d = hp.head_dim();
    if cache.logits.len() != d || labels.len() != d || cache.head_in.len() != hp.hidden_dim {
        return Err(Error::ShapeMismatch(alloc::format!(
            "cache has {} logits, expected {d} with {} labels",
            cache.logits.len(),
            labels.len()
        )));
    }
    check_labels(labels)?;
    let mut loss = 0.0;
    let dlogits: Vec<f64> = cache
        .logits
        .iter()
        .zip(labels)
        .map(|(&l, &y)| {
            loss += bce_with_logits(l, y);
            (sigmoid(l) - y) * scale / d as f64
        })
        .collect();
    outer_add(grad.head_w, &dlogits, &cache.head_in);
    add_into(grad.head_b, &dlogits);
    let mut dh = vec![0.0; hp.hidden_dim];
    matvec_t_add(&mut dh, net.head_w, &dlogits);
    if let (Some(n), Some(c)) = (&net.agg_norm, &cache.agg_norm) {
        dh = layer_norm_backward(n, grad.agg_norm.as_mut(), c, &dh);
    }
    let dzs = gru_backward(&net.agg, &mut grad.agg, &cache.agg, &dh, true);
    let h = hp.hidden_dim;
    let e = hp.embed_dim;
    for (k, ev) in cache.events.iter().enumerate() {
        let mut dz = dzs[k * h..(k + 1) * h].to_vec();
        if let (Some(n), Some(c)) = (&net.enc_norm, &ev.norm) {
            dz = layer_norm_backward(n, grad.enc_norm.as_mut(), c, &dz);
        }
        let dxs = gru_backward(&net.enc, &mut grad.enc, &ev.trace, &dz, true);
        for (t, &id) in ev.tokens.iter().enumerate() {
            let row = id as usize * e;
            add_into(&mut grad.emb[row..row + e], &dxs[t * e..(t + 1) * e]);
        }
    }
    Ok(loss / d as f64)
}

/// Exact gradient of the single-sample loss.
pub fn backward(
    cache: &ForwardCache,
    labels: &[f64],
    params: &ParamSet,
    hp: &Hyperparams,
) -> Result<ParamSet> {
    let net = view(params, hp)?;
    let mut grads = params.zeros_like();
    let mut gnet = view_mut(&mut grads, hp)?;
    backward_with(&net, &mut gnet, hp, cache, labels, 1.0)?;
    Ok(grads)
}

/// Mean loss and mean gradient over a batch.
pub fn backward_batch(samples: &[&Sample], params: &ParamSet, hp: &Hyperparams) -> Result<(f64, ParamSet)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let net = view(params, hp)?;
    let mut grads = params.zeros_like();
    let mut gnet = view_mut(&mut grads, hp)?;
    let scale = 1.0 / samples.len() as f64;
    let mut total = 0.0;
    for s in samples {
        let cache = forward_with(&net, hp, &s.events)?;
        total += backward_with(&net, &mut gnet, hp, &cache, &s.labels, scale)?;
    }
    Ok((total / samples.len() as f64, grads))
}
