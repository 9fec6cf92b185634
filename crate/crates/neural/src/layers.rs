//! Pre-normalization transformer building blocks.

use rand::Rng;

use crate::params::{ParamBuilder, ParamId};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, fan_in: usize, fan_out: usize) -> Self {
        Linear {
            w: pb.weight(&format!("{name}.w"), fan_in, fan_out),
            b: pb.zeros(&format!("{name}.b"), 1, fan_out),
        }
    }

    /// Weight and bias start at zero.
    pub fn zeroed<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, fan_in: usize, fan_out: usize) -> Self {
        Linear {
            w: pb.zeros(&format!("{name}.w"), fan_in, fan_out),
            b: pb.zeros(&format!("{name}.b"), 1, fan_out),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let w = t.param(self.w);
        let b = t.param(self.b);
        let h = t.matmul(x, w);
        t.add_row(h, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, d: usize) -> Self {
        LayerNorm {
            gain: pb.ones(&format!("{name}.gain"), 1, d),
            bias: pb.zeros(&format!("{name}.bias"), 1, d),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let g = t.param(self.gain);
        let b = t.param(self.bias);
        t.layer_norm(x, g, b)
    }
}

#[derive(Debug, Clone)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub d: usize,
}

impl Attention {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, d: usize, heads: usize) -> Self {
        Attention {
            q: Linear::new(pb, &format!("{name}.q"), d, d),
            k: Linear::new(pb, &format!("{name}.k"), d, d),
            v: Linear::new(pb, &format!("{name}.v"), d, d),
            o: Linear::new(pb, &format!("{name}.o"), d, d),
            heads,
            d,
        }
    }

    /// Queries from `x`, keys and values from `memory`. With `causal`, query
    /// `i` attends to memory rows `0..=i`.
    pub fn forward(&self, t: &mut Tape<'_>, x: Var, memory: Var, causal: bool) -> Var {
        let q = self.q.forward(t, x);
        let k = self.k.forward(t, memory);
        let v = self.v.forward(t, memory);
        let dh = self.d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (qh, kh, vh) = if self.heads == 1 {
                (q, k, v)
            } else {
                (
                    t.slice_cols(q, h * dh, dh),
                    t.slice_cols(k, h * dh, dh),
                    t.slice_cols(v, h * dh, dh),
                )
            };
            let scores = t.matmul_t(qh, false, kh, true);
            let scores = t.scale(scores, scale);
            let p = if causal {
                t.causal_softmax(scores, 0)
            } else {
                t.softmax(scores)
            };
            outs.push(t.matmul(p, vh));
        }
        let joined = if outs.len() == 1 { outs[0] } else { t.concat_cols(&outs) };
        self.o.forward(t, joined)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, d: usize, ff: usize) -> Self {
        FeedForward {
            up: Linear::new(pb, &format!("{name}.up"), d, ff),
            down: Linear::new(pb, &format!("{name}.down"), ff, d),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let h = self.up.forward(t, x);
        let h = t.gelu(h);
        self.down.forward(t, h)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub ln_attn: LayerNorm,
    pub attn: Attention,
    pub ln_ff: LayerNorm,
    pub ff: FeedForward,
}

impl EncoderLayer {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, d: usize, heads: usize, ff: usize) -> Self {
        EncoderLayer {
            ln_attn: LayerNorm::new(pb, &format!("{name}.ln_attn"), d),
            attn: Attention::new(pb, &format!("{name}.attn"), d, heads),
            ln_ff: LayerNorm::new(pb, &format!("{name}.ln_ff"), d),
            ff: FeedForward::new(pb, &format!("{name}.ff"), d, ff),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let h = self.ln_attn.forward(t, x);
        let a = self.attn.forward(t, h, h, false);
        let x = t.add(x, a);
        let h = self.ln_ff.forward(t, x);
        let f = self.ff.forward(t, h);
        t.add(x, f)
    }
}

/// Stack of encoder layers followed by a final normalization.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub layers: Vec<EncoderLayer>,
    pub ln_out: LayerNorm,
}

impl Encoder {
    pub fn new<R: Rng>(
        pb: &mut ParamBuilder<'_, R>,
        name: &str,
        n: usize,
        d: usize,
        heads: usize,
        ff: usize,
    ) -> Self {
        Encoder {
            layers: (0..n)
                .map(|i| EncoderLayer::new(pb, &format!("{name}.layer{i}"), d, heads, ff))
                .collect(),
            ln_out: LayerNorm::new(pb, &format!("{name}.ln_out"), d),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, mut x: Var) -> Var {
        for layer in &self.layers {
            x = layer.forward(t, x);
        }
        self.ln_out.forward(t, x)
    }
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub ln_self: LayerNorm,
    pub self_attn: Attention,
    pub ln_cross: LayerNorm,
    pub cross_attn: Attention,
    pub ln_ff: LayerNorm,
    pub ff: FeedForward,
}

impl DecoderLayer {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, d: usize, heads: usize, ff: usize) -> Self {
        DecoderLayer {
            ln_self: LayerNorm::new(pb, &format!("{name}.ln_self"), d),
            self_attn: Attention::new(pb, &format!("{name}.self_attn"), d, heads),
            ln_cross: LayerNorm::new(pb, &format!("{name}.ln_cross"), d),
            cross_attn: Attention::new(pb, &format!("{name}.cross_attn"), d, heads),
            ln_ff: LayerNorm::new(pb, &format!("{name}.ln_ff"), d),
            ff: FeedForward::new(pb, &format!("{name}.ff"), d, ff),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var, memory: Var) -> Var {
        let h = self.ln_self.forward(t, x);
        let a = self.self_attn.forward(t, h, h, true);
        let x = t.add(x, a);
        let h = self.ln_cross.forward(t, x);
        let c = self.cross_attn.forward(t, h, memory, false);
        let x = t.add(x, c);
        let h = self.ln_ff.forward(t, x);
        let f = self.ff.forward(t, h);
        t.add(x, f)
    }
}
