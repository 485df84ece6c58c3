//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a scalar node returns the gradient of every leaf.

use std::borrow::Cow;

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// Adds a `1 x n` row to every row.
    AddRow(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        mask: Option<Var>,
        heads: usize,
        probs: Vec<Mat>,
    },
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    /// Row `i * n_b + j` is `[a_i, b_j]`.
    PairConcat(Var, Var),
    /// Column `col` of an `(r * c) x k` matrix reshaped to `r x c`.
    Grid { x: Var, col: usize },
    /// `w * x + b` with `1 x 1` parameters.
    ScalarAffine { x: Var, w: Var, b: Var },
    WeightedSum(Vec<(Var, f64)>),
    BceMean { x: Var, labels: Mat },
    MaskedMse { x: Var, target: Mat, mask: Mat },
    CrossEntropyRows { x: Var, targets: Vec<usize>, probs: Mat },
}

#[derive(Debug, Clone)]
struct Node<'p> {
    value: Cow<'p, Mat>,
    op: Op,
}

/// Parameters enter as borrowed leaves, so recording a forward pass does
/// not copy the model.
#[derive(Debug, Clone, Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

fn gelu(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let th = u.tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(m: &mut Mat) {
    for mut row in m.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn column_sums(m: &Mat) -> Mat {
    Mat::from_fn(1, m.ncols(), |_, c| m.column(c).sum())
}

fn head_cols(m: &Mat, h: usize, dh: usize) -> Mat {
    m.columns(h * dh, dh).into_owned()
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[(0, 0)]
    }

    pub fn leaf(&mut self, m: Mat) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn param(&mut self, m: &'p Mat) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(m),
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b).transpose();
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "bias must be a single row");
        let mut v = self.value(a).clone();
        for mut vr in v.row_iter_mut() {
            vr += r;
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(gelu);
        self.push(v, Op::Gelu(a))
    }

    /// Row-wise layer normalization with affine `1 x n` parameters.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let n = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.row_iter_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * is;
            }
            inv_std.push(is);
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        let mut out = xhat.clone();
        for mut row in out.row_iter_mut() {
            row.component_mul_assign(g);
            row += b;
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Multi-head scaled dot-product attention on pre-projected inputs.
    /// `mask`, if given, is added to every head's logits.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, mask: Option<Var>, heads: usize) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let width = qv.ncols();
        assert!(heads > 0 && width % heads == 0, "width must divide into heads");
        let dh = width / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Mat::zeros(qv.nrows(), width);
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = head_cols(qv, h, dh);
            let kh = head_cols(kv, h, dh);
            let mut logits = (&qh * kh.transpose()) * scale;
            if let Some(m) = mask {
                logits += self.value(m);
            }
            softmax_rows(&mut logits);
            out.columns_mut(h * dh, dh)
                .copy_from(&(&logits * head_cols(vv, h, dh)));
            probs.push(logits);
        }
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                mask,
                heads,
                probs,
            },
        )
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.nrows(), bv.nrows());
        let mut v = Mat::zeros(av.nrows(), av.ncols() + bv.ncols());
        v.columns_mut(0, av.ncols()).copy_from(av);
        v.columns_mut(av.ncols(), bv.ncols()).copy_from(bv);
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.ncols(), bv.ncols());
        let mut v = Mat::zeros(av.nrows() + bv.nrows(), av.ncols());
        v.rows_mut(0, av.nrows()).copy_from(av);
        v.rows_mut(av.nrows(), bv.nrows()).copy_from(bv);
        self.push(v, Op::ConcatRows(a, b))
    }

    pub fn pair_concat(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let (na, nb) = (av.nrows(), bv.nrows());
        let (ca, cb) = (av.ncols(), bv.ncols());
        let mut v = Mat::zeros(na * nb, ca + cb);
        for i in 0..na {
            for j in 0..nb {
                let r = i * nb + j;
                v.view_mut((r, 0), (1, ca)).copy_from(&av.row(i));
                v.view_mut((r, ca), (1, cb)).copy_from(&bv.row(j));
            }
        }
        self.push(v, Op::PairConcat(a, b))
    }

    /// Reshapes column `col` of a pair-major matrix into `rows x (n / rows)`.
    pub fn grid(&mut self, x: Var, col: usize, rows: usize) -> Var {
        let xv = self.value(x);
        let cols = if rows == 0 { 0 } else { xv.nrows() / rows };
        let v = Mat::from_fn(rows, cols, |i, j| xv[(i * cols + j, col)]);
        self.push(v, Op::Grid { x, col })
    }

    pub fn scalar_affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (wv, bv) = (self.scalar(w), self.scalar(b));
        let v = self.value(x).map(|e| wv * e + bv);
        self.push(v, Op::ScalarAffine { x, w, b })
    }

    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let shape = self.value(terms[0].0).shape();
        let mut v = Mat::zeros(shape.0, shape.1);
        for &(t, c) in terms {
            v += self.value(t) * c;
        }
        self.push(v, Op::WeightedSum(terms.to_vec()))
    }

    /// Mean binary cross-entropy of logits against 0/1 labels.
    pub fn bce_mean(&mut self, x: Var, labels: &Mat) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.shape(), labels.shape());
        let n = xv.len().max(1) as f64;
        let sum: f64 = xv
            .iter()
            .zip(labels.iter())
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum();
        self.push(
            Mat::from_element(1, 1, sum / n),
            Op::BceMean {
                x,
                labels: labels.clone(),
            },
        )
    }

    /// `sum(mask * (x - target)^2) / sum(mask)`, zero for an empty mask.
    pub fn masked_mse(&mut self, x: Var, target: &Mat, mask: &Mat) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.shape(), target.shape());
        let m = mask.sum();
        let v = if m > 0.0 {
            xv.iter()
                .zip(target.iter())
                .zip(mask.iter())
                .map(|((&a, &t), &w)| w * (a - t) * (a - t))
                .sum::<f64>()
                / m
        } else {
            0.0
        };
        self.push(
            Mat::from_element(1, 1, v),
            Op::MaskedMse {
                x,
                target: target.clone(),
                mask: mask.clone(),
            },
        )
    }

    /// Mean over rows of softmax cross-entropy with integer targets.
    pub fn cross_entropy_rows(&mut self, x: Var, targets: &[usize]) -> Var {
        let mut probs = self.value(x).clone();
        assert_eq!(probs.nrows(), targets.len());
        softmax_rows(&mut probs);
        let n = targets.len().max(1) as f64;
        let mut loss = 0.0;
        let xv = self.value(x);
        for (i, &t) in targets.iter().enumerate() {
            let row = xv.row(i);
            let max = row.max();
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
        }
        self.push(
            Mat::from_element(1, 1, loss / n),
            Op::CrossEntropyRows {
                x,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Gradients of the scalar `root` with respect to every leaf. Entries
    /// for intermediate nodes are consumed and left as `None`.
    pub fn backward(&self, root: Var) -> Vec<Option<Mat>> {
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Mat::from_element(1, 1, 1.0));
        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += g,
                slot => *slot = Some(g),
            }
        }
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => grads[idx] = Some(g),
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, &g * self.value(*b).transpose());
                    acc(&mut grads, *b, self.value(*a).transpose() * &g);
                }
                Op::MatMulT(a, b) => {
                    acc(&mut grads, *a, &g * self.value(*b));
                    acc(&mut grads, *b, g.transpose() * self.value(*a));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, column_sums(&g));
                    acc(&mut grads, *a, g.clone());
                }
                Op::Scale(a, c) => acc(&mut grads, *a, &g * *c),
                Op::Gelu(a) => {
                    let d = self.value(*a).map(gelu_grad);
                    acc(&mut grads, *a, g.component_mul(&d));
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gamma);
                    acc(&mut grads, *beta, column_sums(&g));
                    acc(&mut grads, *gamma, column_sums(&g.component_mul(xhat)));
                    let n = g.ncols() as f64;
                    let mut dx = Mat::zeros(g.nrows(), g.ncols());
                    for r in 0..g.nrows() {
                        let dxhat = g.row(r).component_mul(gv);
                        let m1 = dxhat.sum() / n;
                        let m2 = dxhat.dot(&xhat.row(r)) / n;
                        for c in 0..g.ncols() {
                            dx[(r, c)] = inv_std[r] * (dxhat[c] - m1 - xhat[(r, c)] * m2);
                        }
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    mask,
                    heads,
                    probs,
                } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let dh = qv.ncols() / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Mat::zeros(qv.nrows(), qv.ncols());
                    let mut dk = Mat::zeros(kv.nrows(), kv.ncols());
                    let mut dv = Mat::zeros(vv.nrows(), vv.ncols());
                    let mut dmask = mask.map(|_| Mat::zeros(qv.nrows(), kv.nrows()));
                    for (h, p) in probs.iter().enumerate() {
                        let go = head_cols(&g, h, dh);
                        dv.columns_mut(h * dh, dh).copy_from(&(p.transpose() * &go));
                        let dp = &go * head_cols(vv, h, dh).transpose();
                        let mut ds = dp.component_mul(p);
                        for r in 0..ds.nrows() {
                            let s = ds.row(r).sum();
                            for c in 0..ds.ncols() {
                                ds[(r, c)] -= p[(r, c)] * s;
                            }
                        }
                        if let Some(dm) = dmask.as_mut() {
                            *dm += &ds;
                        }
                        dq.columns_mut(h * dh, dh)
                            .copy_from(&((&ds * head_cols(kv, h, dh)) * scale));
                        dk.columns_mut(h * dh, dh)
                            .copy_from(&((ds.transpose() * head_cols(qv, h, dh)) * scale));
                    }
                    acc(&mut grads, *q, dq);
                    acc(&mut grads, *k, dk);
                    acc(&mut grads, *v, dv);
                    if let (Some(m), Some(dm)) = (mask, dmask) {
                        acc(&mut grads, *m, dm);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).ncols();
                    let cb = self.value(*b).ncols();
                    acc(&mut grads, *a, g.columns(0, ca).into_owned());
                    acc(&mut grads, *b, g.columns(ca, cb).into_owned());
                }
                Op::ConcatRows(a, b) => {
                    let ra = self.value(*a).nrows();
                    let rb = self.value(*b).nrows();
                    acc(&mut grads, *a, g.rows(0, ra).into_owned());
                    acc(&mut grads, *b, g.rows(ra, rb).into_owned());
                }
                Op::PairConcat(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (na, nb) = (av.nrows(), bv.nrows());
                    let (ca, cb) = (av.ncols(), bv.ncols());
                    let mut da = Mat::zeros(na, ca);
                    let mut db = Mat::zeros(nb, cb);
                    for i in 0..na {
                        for j in 0..nb {
                            let r = i * nb + j;
                            let mut dai = da.row_mut(i);
                            dai += g.view((r, 0), (1, ca));
                            let mut dbj = db.row_mut(j);
                            dbj += g.view((r, ca), (1, cb));
                        }
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Grid { x, col } => {
                    let xv = self.value(*x);
                    let cols = g.ncols();
                    let mut dx = Mat::zeros(xv.nrows(), xv.ncols());
                    for i in 0..g.nrows() {
                        for j in 0..cols {
                            dx[(i * cols + j, *col)] = g[(i, j)];
                        }
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::ScalarAffine { x, w, b } => {
                    let xv = self.value(*x);
                    let wv = self.scalar(*w);
                    acc(&mut grads, *w, Mat::from_element(1, 1, g.dot(xv)));
                    acc(&mut grads, *b, Mat::from_element(1, 1, g.sum()));
                    acc(&mut grads, *x, &g * wv);
                }
                Op::WeightedSum(terms) => {
                    for &(t, c) in terms {
                        acc(&mut grads, t, &g * c);
                    }
                }
                Op::BceMean { x, labels } => {
                    let xv = self.value(*x);
                    let n = xv.len().max(1) as f64;
                    let s = g[(0, 0)] / n;
                    let d = Mat::from_fn(xv.nrows(), xv.ncols(), |r, c| {
                        s * (sigmoid(xv[(r, c)]) - labels[(r, c)])
                    });
                    acc(&mut grads, *x, d);
                }
                Op::MaskedMse { x, target, mask } => {
                    let xv = self.value(*x);
                    let m = mask.sum();
                    let d = if m > 0.0 {
                        let s = 2.0 * g[(0, 0)] / m;
                        Mat::from_fn(xv.nrows(), xv.ncols(), |r, c| {
                            s * mask[(r, c)] * (xv[(r, c)] - target[(r, c)])
                        })
                    } else {
                        Mat::zeros(xv.nrows(), xv.ncols())
                    };
                    acc(&mut grads, *x, d);
                }
                Op::CrossEntropyRows { x, targets, probs } => {
                    let n = targets.len().max(1) as f64;
                    let mut d = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        d[(i, t)] -= 1.0;
                    }
                    acc(&mut grads, *x, d * (g[(0, 0)] / n));
                }
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(r: usize, c: usize, seed: u64) -> Mat {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Mat::from_fn(r, c, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    /// Central-difference check of d(root)/d(leaf) for a graph builder.
    fn check<F>(inputs: Vec<Mat>, build: F)
    where
        F: Fn(&mut Tape, &[Var]) -> Var,
    {
        let run = |vals: &[Mat]| {
            let mut t = Tape::new();
            let vars: Vec<Var> = vals.iter().map(|m| t.leaf(m.clone())).collect();
            let root = build(&mut t, &vars);
            (t, vars, root)
        };
        let (tape, vars, root) = run(&inputs);
        let grads = tape.backward(root);
        let eps = 1e-5;
        for (n, v) in vars.iter().enumerate() {
            let g = grads[v.index()].clone().unwrap_or_else(|| inputs[n].map(|_| 0.0));
            for e in 0..inputs[n].len() {
                let mut plus = inputs.clone();
                plus[n][e] += eps;
                let mut minus = inputs.clone();
                minus[n][e] -= eps;
                let (tp, _, rp) = run(&plus);
                let (tm, _, rm) = run(&minus);
                let num = (tp.scalar(rp) - tm.scalar(rm)) / (2.0 * eps);
                let err = (num - g[e]).abs() / num.abs().max(g[e].abs()).max(1e-6);
                assert!(err < 1e-5, "input {n} entry {e}: analytic {} numeric {num}", g[e]);
            }
        }
    }

    fn sum_all(t: &mut Tape, x: Var, seed: u64) -> Var {
        // Contract with fixed random weights so every entry matters.
        let (r, c) = t.value(x).shape();
        let w = t.leaf(mat(c, 1, seed));
        let y = t.matmul(x, w);
        let ones = t.leaf(Mat::from_element(1, r, 1.0));
        t.matmul(ones, y)
    }

    #[test]
    fn elementwise_and_linear_ops() {
        check(vec![mat(3, 4, 1), mat(4, 2, 2), mat(1, 2, 3)], |t, v| {
            let m = t.matmul(v[0], v[1]);
            let b = t.add_row(m, v[2]);
            let g = t.gelu(b);
            let s = t.scale(g, 1.7);
            sum_all(t, s, 9)
        });
        check(vec![mat(3, 4, 4), mat(5, 4, 5)], |t, v| {
            let m = t.matmul_t(v[0], v[1]);
            sum_all(t, m, 10)
        });
    }

    #[test]
    fn layer_norm_gradient() {
        check(vec![mat(3, 6, 6), mat(1, 6, 7), mat(1, 6, 8)], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2]);
            sum_all(t, y, 11)
        });
    }

    #[test]
    fn attention_gradient_with_mask() {
        check(
            vec![mat(3, 4, 12), mat(5, 4, 13), mat(5, 4, 14), mat(3, 5, 15)],
            |t, v| {
                let y = t.attention(v[0], v[1], v[2], Some(v[3]), 2);
                sum_all(t, y, 16)
            },
        );
    }

    #[test]
    fn structural_ops_gradient() {
        check(vec![mat(2, 3, 17), mat(4, 2, 18), mat(1, 1, 19), mat(1, 1, 20)], |t, v| {
            let p = t.pair_concat(v[0], v[1]);
            let w = t.leaf(mat(5, 2, 21));
            let o = t.matmul(p, w);
            let g = t.grid(o, 1, 2);
            let a = t.scalar_affine(g, v[2], v[3]);
            let c = t.concat_cols(a, v[0]);
            let r = t.concat_rows(c, c);
            sum_all(t, r, 22)
        });
    }

    #[test]
    fn loss_gradients() {
        let labels = Mat::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let lab = labels.clone();
        check(vec![mat(2, 3, 23)], move |t, v| t.bce_mean(v[0], &lab));
        let target = mat(2, 3, 24);
        check(vec![mat(2, 3, 25)], move |t, v| t.masked_mse(v[0], &target, &labels));
        check(vec![mat(3, 4, 26)], |t, v| {
            let ce = t.cross_entropy_rows(v[0], &[0, 3, 1]);
            t.weighted_sum(&[(ce, 2.0)])
        });
    }

    #[test]
    fn stable_primitives() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(800.0).is_finite() && softplus(-800.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300 && (sigmoid(800.0) - 1.0).abs() < 1e-15);
    }
}
