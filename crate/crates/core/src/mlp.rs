//! From-scratch dense MLP (f32): ReLU hidden layers, linear scalar output,
//! explicit backprop, Adam with decoupled weight decay, and a text
//! checkpoint format that round-trips exactly at 32-bit precision.

use crate::effort::Effort;
use crate::error::{Error, Result};
use rand::Rng;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    /// Row-major `out x in` weight matrix per layer.
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<Vec<f32>>,
}

impl Mlp {
    /// He-initialized network; hidden activations are ReLU, output is linear.
    pub fn new(layer_sizes: &[usize], rng: &mut impl Rng) -> Mlp {
        assert!(layer_sizes.len() >= 2);
        assert_eq!(*layer_sizes.last().unwrap(), 1, "scalar output expected");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let std = (2.0 / n_in as f32).sqrt();
            let mut wm = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_in * n_out {
                // Box-Muller keeps us off rand_distr for one Gaussian.
                let u1: f32 = rng.gen_range(1e-7..1.0_f32);
                let u2: f32 = rng.gen();
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f32::consts::PI * u2).cos();
                wm.push(g * std);
            }
            weights.push(wm);
            biases.push(vec![0.0; n_out]);
        }
        Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Multiply-accumulate count of one forward pass.
    pub fn flops(&self) -> u64 {
        self.layer_sizes
            .windows(2)
            .map(|w| 2 * (w[0] * w[1]) as u64)
            .sum()
    }

    pub fn forward(&self, x: &[f32], effort: &Effort) -> f32 {
        effort.add_net_flops(self.flops());
        let mut act = x.to_vec();
        for l in 0..self.num_layers() {
            act = self.layer_forward(l, &act, l + 1 < self.num_layers());
        }
        act[0]
    }

    fn layer_forward(&self, l: usize, input: &[f32], relu: bool) -> Vec<f32> {
        let n_in = self.layer_sizes[l];
        let n_out = self.layer_sizes[l + 1];
        debug_assert_eq!(input.len(), n_in);
        let mut out = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let row = &self.weights[l][o * n_in..(o + 1) * n_in];
            let mut acc = self.biases[l][o];
            for (w, x) in row.iter().zip(input.iter()) {
                acc += w * x;
            }
            out.push(if relu { acc.max(0.0) } else { acc });
        }
        out
    }

    /// Forward pass keeping every layer's activation (post-ReLU), input first.
    fn forward_trace(&self, x: &[f32]) -> Vec<Vec<f32>> {
        let mut acts = Vec::with_capacity(self.num_layers() + 1);
        acts.push(x.to_vec());
        for l in 0..self.num_layers() {
            let next = self.layer_forward(l, acts.last().unwrap(), l + 1 < self.num_layers());
            acts.push(next);
        }
        acts
    }

    pub fn finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<Vec<f32>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f32) {
        for w in &mut self.weights {
            for v in w {
                *v *= s;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= s;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loss {
    Mse,
    /// Huber with unit transition point: 0.5 e^2 for |e| <= 1, |e| - 0.5 beyond.
    Huber,
}

impl Loss {
    pub fn value(&self, pred: f32, target: f32) -> f32 {
        let e = pred - target;
        match self {
            Loss::Mse => e * e,
            Loss::Huber => {
                if e.abs() <= 1.0 {
                    0.5 * e * e
                } else {
                    e.abs() - 0.5
                }
            }
        }
    }

    fn dvalue(&self, pred: f32, target: f32) -> f32 {
        let e = pred - target;
        match self {
            Loss::Mse => 2.0 * e,
            Loss::Huber => e.clamp(-1.0, 1.0),
        }
    }
}

/// Mean loss over the batch and its analytic gradient via backprop.
pub fn batch_loss_gradients(
    net: &Mlp,
    inputs: &[Vec<f32>],
    targets: &[f32],
    loss: Loss,
    effort: &Effort,
) -> (f32, Gradients) {
    assert_eq!(inputs.len(), targets.len());
    assert!(!inputs.is_empty());
    // Backward costs roughly two forwards.
    effort.add_net_flops(3 * net.flops() * inputs.len() as u64);
    let mut grads = Gradients::zeros_like(net);
    let mut total_loss = 0.0;
    let inv_n = 1.0 / inputs.len() as f32;
    for (x, &t) in inputs.iter().zip(targets.iter()) {
        let acts = net.forward_trace(x);
        let pred = acts.last().unwrap()[0];
        total_loss += loss.value(pred, t);
        let mut delta = vec![loss.dvalue(pred, t)];
        for l in (0..net.num_layers()).rev() {
            let n_in = net.layer_sizes[l];
            let n_out = net.layer_sizes[l + 1];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grads.biases[l][o] += d * inv_n;
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(input.iter()) {
                    *g += d * xi * inv_n;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0f32; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &net.weights[l][o * n_in..(o + 1) * n_in];
                    for (p, w) in prev.iter_mut().zip(row.iter()) {
                        *p += d * w;
                    }
                }
                // ReLU mask from the stored activations.
                for (p, a) in prev.iter_mut().zip(acts[l].iter()) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }
    (total_loss * inv_n, grads)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub weight_decay: f32,
    pub epsilon: f32,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.03125, // 2^-5
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step: u64,
    m_w: Vec<Vec<f32>>,
    v_w: Vec<Vec<f32>>,
    m_b: Vec<Vec<f32>>,
    v_b: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(net: &Mlp, hyper: AdamHyper) -> AdamState {
        AdamState {
            hyper,
            step: 0,
            m_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// One Adam update with bias correction; weight decay is decoupled and
    /// applied directly to the weights (biases are not decayed).
    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(self.step as i32);
        let bc2 = 1.0 - h.beta2.powi(self.step as i32);
        for l in 0..net.num_layers() {
            for i in 0..net.weights[l].len() {
                let g = grads.weights[l][i];
                let m = &mut self.m_w[l][i];
                let v = &mut self.v_w[l][i];
                *m = h.beta1 * *m + (1.0 - h.beta1) * g;
                *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                net.weights[l][i] -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
                net.weights[l][i] -= h.lr * h.weight_decay * net.weights[l][i];
            }
            for i in 0..net.biases[l].len() {
                let g = grads.biases[l][i];
                let m = &mut self.m_b[l][i];
                let v = &mut self.v_b[l][i];
                *m = h.beta1 * *m + (1.0 - h.beta1) * g;
                *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                net.biases[l][i] -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
            }
        }
    }
}

/// Mini-batch training with a fixed shuffle per epoch; returns the per-epoch
/// mean loss trace. Aborts with a diagnostic if the loss goes non-finite.
pub fn train_regression(
    net: &mut Mlp,
    inputs: &[Vec<f32>],
    targets: &[f32],
    epochs: usize,
    batch_size: usize,
    adam: &mut AdamState,
    loss: Loss,
    rng: &mut impl Rng,
    effort: &Effort,
) -> Result<Vec<f32>> {
    assert!(!inputs.is_empty());
    let n = inputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        // Fisher-Yates with the caller's RNG keeps runs reproducible.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size.max(1)) {
            let bx: Vec<Vec<f32>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let bt: Vec<f32> = chunk.iter().map(|&i| targets[i]).collect();
            let (l, grads) = batch_loss_gradients(net, &bx, &bt, loss, effort);
            if !l.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became non-finite at epoch {epoch}"
                )));
            }
            adam.apply(net, &grads);
            epoch_loss += l;
            batches += 1;
        }
        if !net.finite() {
            return Err(Error::Diverged(format!(
                "parameters became non-finite at epoch {epoch}"
            )));
        }
        trace.push(epoch_loss / batches as f32);
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Checkpoints

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub net: Mlp,
    /// Named normalization constants so inference is self-contained.
    pub norms: Vec<(String, f32)>,
    pub adam: AdamHyper,
}

impl Checkpoint {
    pub fn norm(&self, name: &str) -> Option<f32> {
        self.norms
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# anyplace checkpoint v1\n");
        s.push_str(&format!("kind {}\n", self.kind));
        s.push_str(&format!(
            "layers {}\n",
            self.net
                .layer_sizes
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ));
        for (name, v) in &self.norms {
            s.push_str(&format!("norm {name} {v}\n"));
        }
        let a = self.adam;
        s.push_str(&format!(
            "adam {} {} {} {} {}\n",
            a.lr, a.beta1, a.beta2, a.weight_decay, a.epsilon
        ));
        for l in 0..self.net.num_layers() {
            let n_in = self.net.layer_sizes[l];
            let n_out = self.net.layer_sizes[l + 1];
            s.push_str(&format!("layer {l} weight {n_out} {n_in}\n"));
            for o in 0..n_out {
                let row: Vec<String> = self.net.weights[l][o * n_in..(o + 1) * n_in]
                    .iter()
                    .map(|w| w.to_string())
                    .collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            s.push_str(&format!("layer {l} bias {n_out}\n"));
            let row: Vec<String> = self.net.biases[l].iter().map(|b| b.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, name: &str) -> Result<Checkpoint> {
        let mut lines = text.lines().peekable();
        let mut kind = String::new();
        let mut layer_sizes: Vec<usize> = Vec::new();
        let mut norms = Vec::new();
        let mut adam = AdamHyper::default();
        let mut weights: Vec<Vec<f32>> = Vec::new();
        let mut biases: Vec<Vec<f32>> = Vec::new();
        let err = |detail: &str| Error::Checkpoint(format!("{name}: {detail}"));
        while let Some(line) = lines.next() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("kind") => kind = tok.next().unwrap_or("").to_string(),
                Some("layers") => {
                    layer_sizes = tok
                        .map(|t| t.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err("bad layers line"))?;
                    weights = layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
                    biases = layer_sizes.windows(2).map(|w| vec![0.0; w[1]]).collect();
                }
                Some("norm") => {
                    let n = tok.next().ok_or_else(|| err("bad norm line"))?;
                    let v: f32 = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err("bad norm value"))?;
                    norms.push((n.to_string(), v));
                }
                Some("adam") => {
                    let vals: Vec<f32> = tok
                        .map(|t| t.parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err("bad adam line"))?;
                    if vals.len() != 5 {
                        return Err(err("adam line needs 5 values"));
                    }
                    adam = AdamHyper {
                        lr: vals[0],
                        beta1: vals[1],
                        beta2: vals[2],
                        weight_decay: vals[3],
                        epsilon: vals[4],
                    };
                }
                Some("layer") => {
                    let l: usize = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err("bad layer index"))?;
                    if l >= weights.len() {
                        return Err(err("layer index out of range"));
                    }
                    let what = tok.next().ok_or_else(|| err("bad layer line"))?;
                    match what {
                        "weight" => {
                            let n_out: usize = tok
                                .next()
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| err("bad weight rows"))?;
                            let n_in: usize = tok
                                .next()
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| err("bad weight cols"))?;
                            if n_in != layer_sizes[l] || n_out != layer_sizes[l + 1] {
                                return Err(err("weight shape mismatch"));
                            }
                            for o in 0..n_out {
                                let row = lines.next().ok_or_else(|| err("missing weight row"))?;
                                let vals: Vec<f32> = row
                                    .split_whitespace()
                                    .map(|t| t.parse())
                                    .collect::<std::result::Result<_, _>>()
                                    .map_err(|_| err("bad weight value"))?;
                                if vals.len() != n_in {
                                    return Err(err("weight row length mismatch"));
                                }
                                weights[l][o * n_in..(o + 1) * n_in].copy_from_slice(&vals);
                            }
                        }
                        "bias" => {
                            let n_out: usize = tok
                                .next()
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| err("bad bias len"))?;
                            if n_out != layer_sizes[l + 1] {
                                return Err(err("bias shape mismatch"));
                            }
                            let row = lines.next().ok_or_else(|| err("missing bias row"))?;
                            let vals: Vec<f32> = row
                                .split_whitespace()
                                .map(|t| t.parse())
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|_| err("bad bias value"))?;
                            if vals.len() != n_out {
                                return Err(err("bias row length mismatch"));
                            }
                            biases[l].copy_from_slice(&vals);
                        }
                        _ => return Err(err("unknown layer entry")),
                    }
                }
                Some(other) => return Err(err(&format!("unknown key '{other}'"))),
                None => {}
            }
        }
        if layer_sizes.is_empty() {
            return Err(err("missing layers line"));
        }
        Ok(Checkpoint {
            kind,
            net: Mlp {
                layer_sizes,
                weights,
                biases,
            },
            norms,
            adam,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Checkpoint::from_text(&text, &path.display().to_string())
    }
}
