//! Encoder-decoder matcher with a pairwise constraint network.
//!
//! Tasks are encoded by a transformer encoder without positional encoding,
//! satellites by a decoder that cross-attends to the encoded tasks. The
//! constraint network scores every (satellite, task) pair; its feasibility
//! logits feed the cross-attention mask `M = w * s_hat + b` and filter the
//! final argmax.

use rand::Rng;
use serde::{Deserialize, Serialize};

use aeos_core::rng::{rng_from_seed, SimRng};
use aeos_core::sim::AssignmentVector;

use crate::error::MatcherError;
use crate::features::{time_embedding, FeatureLayout, FeatureMatrices};
use crate::tape::{sigmoid, Mat, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub width: usize,
    pub depth: usize,
    pub heads: usize,
    /// Columns of the embedding reserved for the timestep embedding.
    pub time_dim: usize,
    pub ffn_mult: usize,
    pub constraint_hidden: usize,
    /// Unit of the timing head output (s).
    pub time_unit_s: f64,
}

impl ModelConfig {
    pub fn toy() -> Self {
        Self {
            width: 64,
            depth: 2,
            heads: 4,
            time_dim: 16,
            ffn_mult: 4,
            constraint_hidden: 64,
            time_unit_s: 3600.0,
        }
    }

    pub fn full() -> Self {
        Self {
            width: 512,
            depth: 12,
            heads: 16,
            time_dim: 64,
            ffn_mult: 4,
            constraint_hidden: 512,
            time_unit_s: 3600.0,
        }
    }

    pub fn validate(&self) -> Result<(), MatcherError> {
        let fail = |m: &str| Err(MatcherError::Config(m.into()));
        if self.heads == 0 || self.width % self.heads != 0 {
            return fail("width must be a positive multiple of heads");
        }
        if self.time_dim % 2 != 0 {
            return Err(MatcherError::OddDimension(self.time_dim));
        }
        if self.time_dim >= self.width {
            return fail("time_dim must be smaller than width");
        }
        if self.ffn_mult == 0 || self.constraint_hidden == 0 {
            return fail("hidden sizes must be positive");
        }
        if !(self.time_unit_s > 0.0) {
            return fail("time_unit_s must be positive");
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy()
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone, Copy)]
struct Ffn {
    up: Linear,
    down: Linear,
}

#[derive(Debug, Clone, Copy)]
struct EncoderLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone, Copy)]
struct DecoderLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ffn: Ffn,
}

#[derive(Debug, Clone, Copy)]
struct Embed {
    cont: Linear,
    /// Lookup table with one row per categorical class column.
    table: usize,
}

#[derive(Debug, Clone)]
struct Builder {
    names: Vec<String>,
    values: Vec<Mat>,
    rng: SimRng,
}

impl Builder {
    fn add(&mut self, name: String, m: Mat) -> usize {
        self.names.push(name);
        self.values.push(m);
        self.values.len() - 1
    }

    fn uniform(&mut self, name: String, rows: usize, cols: usize, bound: f64) -> usize {
        let m = Mat::from_fn(rows, cols, |_, _| self.rng.random_range(-bound..=bound));
        self.add(name, m)
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let bound = (3.0 / fan_in.max(1) as f64).sqrt();
        Linear {
            w: self.uniform(format!("{name}.w"), fan_in, fan_out, bound),
            b: self.add(format!("{name}.b"), Mat::zeros(1, fan_out)),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        Norm {
            g: self.add(format!("{name}.gamma"), Mat::from_element(1, width, 1.0)),
            b: self.add(format!("{name}.beta"), Mat::zeros(1, width)),
        }
    }

    fn attn(&mut self, name: &str, width: usize) -> Attn {
        Attn {
            q: self.linear(&format!("{name}.q"), width, width),
            k: self.linear(&format!("{name}.k"), width, width),
            v: self.linear(&format!("{name}.v"), width, width),
            o: self.linear(&format!("{name}.o"), width, width),
        }
    }

    fn ffn(&mut self, name: &str, width: usize, mult: usize) -> Ffn {
        Ffn {
            up: self.linear(&format!("{name}.up"), width, width * mult),
            down: self.linear(&format!("{name}.down"), width * mult, width),
        }
    }
}

/// Constraint network outputs for all pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintPrediction {
    /// Feasibility logits, N_S x N_T.
    pub s_hat: Mat,
    /// Estimated attitude-adjustment time (s), N_S x N_T.
    pub t_hat: Mat,
}

/// Handles into a recorded forward pass.
#[derive(Debug, Clone)]
pub struct ForwardVars {
    pub params: Vec<Var>,
    pub h_t: Var,
    pub h_s: Var,
    /// N_S x (1 + N_T); column 0 is the null assignment.
    pub a: Var,
    pub s_hat: Var,
    /// Timing head in units of `time_unit_s`.
    pub t_hat: Var,
}

/// Plain values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub h_t: Mat,
    pub h_s: Mat,
    pub a: Mat,
    pub constraint: ConstraintPrediction,
}

#[derive(Debug, Clone)]
pub struct Matcher {
    pub config: ModelConfig,
    pub layout: FeatureLayout,
    names: Vec<String>,
    params: Vec<Mat>,
    sat_embed: Embed,
    task_embed: Embed,
    encoder: Vec<EncoderLayer>,
    encoder_norm: Norm,
    decoder: Vec<DecoderLayer>,
    decoder_norm: Norm,
    constraint: [Linear; 3],
    mask_w: usize,
    mask_b: usize,
    null: usize,
    cols: [Vec<usize>; 4],
}

fn select_cols(m: &Mat, cols: &[usize]) -> Mat {
    Mat::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

impl Matcher {
    pub fn new(config: ModelConfig, layout: FeatureLayout, seed: u64) -> Result<Self, MatcherError> {
        config.validate()?;
        layout.validate()?;
        let mut b = Builder {
            names: Vec::new(),
            values: Vec::new(),
            rng: rng_from_seed(seed),
        };
        let w = config.width;
        let emb = w - config.time_dim;
        let cols = [
            layout.continuous_columns(true),
            layout.categorical_columns(true),
            layout.continuous_columns(false),
            layout.categorical_columns(false),
        ];
        let embed = |b: &mut Builder, name: &str, n_cont: usize, n_cat: usize| Embed {
            cont: b.linear(&format!("{name}.cont"), n_cont, emb),
            table: b.uniform(format!("{name}.table"), n_cat, emb, 1.0),
        };
        let sat_embed = embed(&mut b, "sat_embed", cols[0].len(), cols[1].len());
        let task_embed = embed(&mut b, "task_embed", cols[2].len(), cols[3].len());
        let encoder = (0..config.depth)
            .map(|l| EncoderLayer {
                ln1: b.norm(&format!("enc{l}.ln1"), w),
                attn: b.attn(&format!("enc{l}.attn"), w),
                ln2: b.norm(&format!("enc{l}.ln2"), w),
                ffn: b.ffn(&format!("enc{l}.ffn"), w, config.ffn_mult),
            })
            .collect();
        let encoder_norm = b.norm("enc.ln", w);
        let decoder = (0..config.depth)
            .map(|l| DecoderLayer {
                ln1: b.norm(&format!("dec{l}.ln1"), w),
                self_attn: b.attn(&format!("dec{l}.self"), w),
                ln2: b.norm(&format!("dec{l}.ln2"), w),
                cross: b.attn(&format!("dec{l}.cross"), w),
                ln3: b.norm(&format!("dec{l}.ln3"), w),
                ffn: b.ffn(&format!("dec{l}.ffn"), w, config.ffn_mult),
            })
            .collect();
        let decoder_norm = b.norm("dec.ln", w);
        let pair = layout.d_s() + layout.d_t();
        let h = config.constraint_hidden;
        let constraint = [
            b.linear("constraint.l1", pair, h),
            b.linear("constraint.l2", h, h),
            b.linear("constraint.l3", h, 2),
        ];
        let mask_w = b.add("mask.w".into(), Mat::zeros(1, 1));
        let mask_b = b.add("mask.b".into(), Mat::zeros(1, 1));
        let null = b.uniform("null".into(), 1, w, 1.0 / (w as f64).sqrt());
        Ok(Self {
            config,
            layout,
            names: b.names,
            params: b.values,
            sat_embed,
            task_embed,
            encoder,
            encoder_norm,
            decoder,
            decoder_norm,
            constraint,
            mask_w,
            mask_b,
            null,
            cols,
        })
    }

    pub fn params(&self) -> &[Mat] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Mat] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Mask scalars `(w, b)`.
    pub fn mask_scalars(&self) -> (f64, f64) {
        (self.params[self.mask_w][(0, 0)], self.params[self.mask_b][(0, 0)])
    }

    pub fn set_mask_scalars(&mut self, w: f64, b: f64) {
        self.params[self.mask_w][(0, 0)] = w;
        self.params[self.mask_b][(0, 0)] = b;
    }

    fn linear(t: &mut Tape, p: &[Var], x: Var, l: Linear) -> Var {
        let y = t.matmul(x, p[l.w]);
        t.add_row(y, p[l.b])
    }

    fn norm(t: &mut Tape, p: &[Var], x: Var, n: Norm) -> Var {
        t.layer_norm(x, p[n.g], p[n.b])
    }

    fn attend(&self, t: &mut Tape, p: &[Var], x: Var, ctx: Var, a: Attn, mask: Option<Var>) -> Var {
        let q = Self::linear(t, p, x, a.q);
        let k = Self::linear(t, p, ctx, a.k);
        let v = Self::linear(t, p, ctx, a.v);
        let o = t.attention(q, k, v, mask, self.config.heads);
        Self::linear(t, p, o, a.o)
    }

    fn feed_forward(t: &mut Tape, p: &[Var], x: Var, f: Ffn) -> Var {
        let h = Self::linear(t, p, x, f.up);
        let h = t.gelu(h);
        Self::linear(t, p, h, f.down)
    }

    fn embed(&self, t: &mut Tape, p: &[Var], x: &Mat, e: Embed, cont: &[usize], cat: &[usize], time: &[f64]) -> Var {
        let xc = t.leaf(select_cols(x, cont));
        let xk = t.leaf(select_cols(x, cat));
        let c = Self::linear(t, p, xc, e.cont);
        let k = t.matmul(xk, p[e.table]);
        let sum = t.add(c, k);
        let te = t.leaf(Mat::from_fn(x.nrows(), time.len(), |_, c| time[c]));
        t.concat_cols(sum, te)
    }

    /// Records a forward pass on `tape`. `use_mask = false` drops the
    /// cross-attention mask entirely.
    pub fn forward_on<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        f: &FeatureMatrices,
        use_mask: bool,
    ) -> Result<ForwardVars, MatcherError> {
        if f.s.ncols() != self.layout.d_s() || f.t.ncols() != self.layout.d_t() {
            return Err(MatcherError::Shape(format!(
                "features are {}/{} wide, model expects {}/{}",
                f.s.ncols(),
                f.t.ncols(),
                self.layout.d_s(),
                self.layout.d_t()
            )));
        }
        if f.s.iter().chain(f.t.iter()).any(|v| !v.is_finite()) {
            return Err(MatcherError::NonFinite("input features".into()));
        }
        let (n_s, n_t) = (f.s.nrows(), f.t.nrows());
        let p: Vec<Var> = self.params.iter().map(|m| tape.param(m)).collect();
        let time = time_embedding(f.step as f64, self.config.time_dim)?;

        // Constraint network on every (satellite, task) pair.
        let s_in = tape.leaf(f.s.clone());
        let t_in = tape.leaf(f.t.clone());
        let pairs = tape.pair_concat(s_in, t_in);
        let h = Self::linear(tape, &p, pairs, self.constraint[0]);
        let h = tape.gelu(h);
        let h = Self::linear(tape, &p, h, self.constraint[1]);
        let h = tape.gelu(h);
        let out = Self::linear(tape, &p, h, self.constraint[2]);
        let s_hat = tape.grid(out, 0, n_s);
        let t_hat = tape.grid(out, 1, n_s);

        // Task encoder.
        let mut x = self.embed(tape, &p, &f.t, self.task_embed, &self.cols[2], &self.cols[3], &time);
        for l in &self.encoder {
            let n = Self::norm(tape, &p, x, l.ln1);
            let a = self.attend(tape, &p, n, n, l.attn, None);
            x = tape.add(x, a);
            let n = Self::norm(tape, &p, x, l.ln2);
            let m = Self::feed_forward(tape, &p, n, l.ffn);
            x = tape.add(x, m);
        }
        let h_t = Self::norm(tape, &p, x, self.encoder_norm);

        // Satellite decoder.
        let mask = use_mask.then(|| tape.scalar_affine(s_hat, p[self.mask_w], p[self.mask_b]));
        let mut y = self.embed(tape, &p, &f.s, self.sat_embed, &self.cols[0], &self.cols[1], &time);
        for l in &self.decoder {
            let n = Self::norm(tape, &p, y, l.ln1);
            let a = self.attend(tape, &p, n, n, l.self_attn, None);
            y = tape.add(y, a);
            let n = Self::norm(tape, &p, y, l.ln2);
            let c = self.attend(tape, &p, n, h_t, l.cross, mask);
            y = tape.add(y, c);
            let n = Self::norm(tape, &p, y, l.ln3);
            let m = Self::feed_forward(tape, &p, n, l.ffn);
            y = tape.add(y, m);
        }
        let h_s = Self::norm(tape, &p, y, self.decoder_norm);

        let columns = tape.concat_rows(p[self.null], h_t);
        let a = tape.matmul_t(h_s, columns);
        debug_assert_eq!(tape.value(a).shape(), (n_s, 1 + n_t));
        Ok(ForwardVars {
            params: p,
            h_t,
            h_s,
            a,
            s_hat,
            t_hat,
        })
    }

    pub fn forward_with(&self, f: &FeatureMatrices, use_mask: bool) -> Result<ForwardOutput, MatcherError> {
        let mut tape = Tape::new();
        let v = self.forward_on(&mut tape, f, use_mask)?;
        let out = ForwardOutput {
            h_t: tape.value(v.h_t).clone(),
            h_s: tape.value(v.h_s).clone(),
            a: tape.value(v.a).clone(),
            constraint: ConstraintPrediction {
                s_hat: tape.value(v.s_hat).clone(),
                t_hat: tape.value(v.t_hat) * self.config.time_unit_s,
            },
        };
        if out.a.iter().chain(out.constraint.s_hat.iter()).any(|v| !v.is_finite()) {
            return Err(MatcherError::NonFinite("model outputs".into()));
        }
        Ok(out)
    }

    pub fn forward(&self, f: &FeatureMatrices) -> Result<ForwardOutput, MatcherError> {
        self.forward_with(f, true)
    }

    /// Constraint network output for a single pair of feature rows.
    pub fn constraint_forward(&self, s_row: &[f64], t_row: &[f64]) -> Result<(f64, f64), MatcherError> {
        let f = FeatureMatrices {
            s: Mat::from_row_slice(1, s_row.len(), s_row),
            t: Mat::from_row_slice(1, t_row.len(), t_row),
            step: 0,
        };
        let out = self.forward_with(&f, true)?;
        Ok((out.constraint.s_hat[(0, 0)], out.constraint.t_hat[(0, 0)]))
    }

    /// Replaces parameters from named tensors, requiring identical names and shapes.
    pub fn load_params(&mut self, named: Vec<(String, Mat)>) -> Result<(), MatcherError> {
        if named.len() != self.params.len() {
            return Err(MatcherError::Checkpoint(format!(
                "{} tensors, model has {}",
                named.len(),
                self.params.len()
            )));
        }
        for (k, (name, m)) in named.into_iter().enumerate() {
            if name != self.names[k] || m.shape() != self.params[k].shape() {
                return Err(MatcherError::Checkpoint(format!(
                    "tensor {k} is `{name}` {:?}, expected `{}` {:?}",
                    m.shape(),
                    self.names[k],
                    self.params[k].shape()
                )));
            }
            self.params[k] = m;
        }
        Ok(())
    }
}

/// Per satellite: null when no task clears `sigmoid(s_hat) > tau_s`,
/// otherwise the feasible task with the highest score (lowest index on ties).
pub fn infer_assignment(a: &Mat, s_hat: &Mat, tau_s: f64) -> AssignmentVector {
    AssignmentVector(
        (0..s_hat.nrows())
            .map(|i| {
                let mut best: Option<(f64, usize)> = None;
                for j in 0..s_hat.ncols() {
                    if sigmoid(s_hat[(i, j)]) <= tau_s {
                        continue;
                    }
                    let score = a[(i, j + 1)];
                    if best.is_none_or(|(b, _)| score > b) {
                        best = Some((score, j));
                    }
                }
                best.map_or(0, |(_, j)| j + 1)
            })
            .collect(),
    )
}
