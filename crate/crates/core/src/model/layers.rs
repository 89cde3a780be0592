//! Building blocks shared by the QA model and the learned baseline.

use rand::Rng;

use crate::autograd::{ParamStore, Tape, Tensor, Var};

/// Parameter ids of one LSTM direction: input weights, recurrent weights, bias.
#[derive(Debug, Clone, Copy)]
pub struct LstmIds {
    pub w: usize,
    pub u: usize,
    pub b: usize,
}

impl LstmIds {
    /// Uniform start in `±1/√h`, forget-gate bias 1.
    pub fn init<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w = store.add_uniform(&format!("{name}.w"), input, 4 * hidden, bound, rng);
        let u = store.add_uniform(&format!("{name}.u"), hidden, 4 * hidden, bound, rng);
        let mut bias = Tensor::zeros(1, 4 * hidden);
        for x in &mut bias.data[hidden..2 * hidden] {
            *x = 1.0;
        }
        let b = store.add(&format!("{name}.b"), bias);
        Self { w, u, b }
    }

    pub fn lookup(store: &ParamStore, name: &str) -> Option<Self> {
        Some(Self {
            w: store.id(&format!("{name}.w"))?,
            u: store.id(&format!("{name}.u"))?,
            b: store.id(&format!("{name}.b"))?,
        })
    }
}

/// One LSTM direction over `groups` sequences of `steps` rows each. `x` has
/// rows ordered `g·steps + t`; so does the output. Invalid steps output zero
/// and leave the state untouched. Gate order: input, forget, cell, output.
pub fn lstm(tape: &mut Tape, p: LstmIds, x: Var, groups: usize, steps: usize, mask: &[bool], reverse: bool) -> Var {
    let (w, u, b) = (tape.param(p.w), tape.param(p.u), tape.param(p.b));
    let hidden = tape.shape(u).0;
    let xw = tape.matmul(x, w);
    let xw = tape.add_row(xw, b);
    let zeros = tape.constant(Tensor::zeros(groups, hidden));
    let mut h = zeros;
    let mut c = zeros;
    let mut outs = vec![zeros; steps];
    let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
    for t in order {
        let rows: Vec<usize> = (0..groups).map(|g| g * steps + t).collect();
        let m: Vec<bool> = rows.iter().map(|&r| mask[r]).collect();
        if !m.iter().any(|v| *v) {
            continue;
        }
        let xt = tape.select_rows(xw, rows);
        let hu = tape.matmul(h, u);
        let gates = tape.add(xt, hu);
        let i = tape.slice_cols(gates, 0, hidden);
        let i = tape.sigmoid(i);
        let f = tape.slice_cols(gates, hidden, hidden);
        let f = tape.sigmoid(f);
        let g = tape.slice_cols(gates, 2 * hidden, hidden);
        let g = tape.tanh(g);
        let o = tape.slice_cols(gates, 3 * hidden, hidden);
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        let c_new = tape.add(fc, ig);
        let tc = tape.tanh(c_new);
        let h_new = tape.mul(o, tc);
        c = tape.blend(c_new, c, m.clone());
        h = tape.blend(h_new, h, m.clone());
        outs[t] = tape.blend(h_new, zeros, m);
    }
    let stacked = tape.concat_rows(&outs);
    let perm = (0..groups * steps).map(|r| (r % steps) * groups + r / steps).collect();
    tape.select_rows(stacked, perm)
}

/// Forward and backward directions concatenated column-wise.
pub fn bilstm(
    tape: &mut Tape,
    fwd: LstmIds,
    bwd: LstmIds,
    x: Var,
    groups: usize,
    steps: usize,
    mask: &[bool],
) -> Var {
    let f = lstm(tape, fwd, x, groups, steps, mask, false);
    let b = lstm(tape, bwd, x, groups, steps, mask, true);
    tape.concat_cols(&[f, b])
}

/// Attention of query row `q` (1 × D) over each group of `h` (groups·inner ×
/// D). Returns the pooled rows (groups × D) and the weights (groups × inner).
pub fn high_level_attend(tape: &mut Tape, h: Var, q: Var, groups: usize, inner: usize, mask: &[bool]) -> (Var, Var) {
    let logits = tape.matmul_t(h, q);
    let logits = tape.reshape(logits, groups, inner);
    let weights = tape.masked_softmax(logits, mask.to_vec());
    (tape.group_weighted_sum(weights, h), weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sim {
    Dot,
    /// `w₁·e + w₂·h + w₃·(e ⊙ h)`, with parameter ids of `w₁, w₂` (D × 1)
    /// and `w₃` (1 × D).
    Trilinear(usize, usize, usize),
}

/// For every row of `e`, an attention-weighted sum of the rows of `hqa`.
/// Returns `C` and the attention matrix.
pub fn context_match(tape: &mut Tape, e: Var, hqa: Var, sim: Sim) -> (Var, Var) {
    let rows = tape.shape(e).0;
    let qlen = tape.shape(hqa).0;
    let logits = match sim {
        Sim::Dot => tape.matmul_t(e, hqa),
        Sim::Trilinear(w1, w2, w3) => {
            let (w1, w2, w3row) = (tape.param(w1), tape.param(w2), tape.param(w3));
            let a = tape.matmul(e, w1);
            let b = tape.matmul(hqa, w2);
            let b = tape.reshape(b, 1, qlen);
            let ones = tape.constant(Tensor::from_vec(rows, 1, vec![1.0; rows]));
            let w3rows = tape.matmul(ones, w3row);
            let ew = tape.mul(e, w3rows);
            let cross = tape.matmul_t(ew, hqa);
            let with_a = tape.add_col(cross, a);
            tape.add_row(with_a, b)
        }
    };
    let attn = tape.masked_softmax(logits, vec![true; rows * qlen]);
    (tape.matmul(attn, hqa), attn)
}

/// Parameter ids of one stream's answer-selection head.
#[derive(Debug, Clone)]
pub struct ConvHead {
    pub convs: Vec<(usize, usize, usize)>,
    pub out_w: usize,
    pub out_b: usize,
}

impl ConvHead {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        kernels: &[usize],
        filters: usize,
        rng: &mut R,
    ) -> Self {
        let convs = kernels
            .iter()
            .map(|&k| {
                let bound = 1.0 / ((k * channels) as f64).sqrt();
                let w = store.add_uniform(&format!("{name}.conv{k}.w"), k * channels, filters, bound, rng);
                let b = store.add_zeros(&format!("{name}.conv{k}.b"), 1, filters);
                (k, w, b)
            })
            .collect();
        let width = kernels.len() * filters;
        let out_w = store.add_uniform(&format!("{name}.out.w"), width, 1, 1.0 / (width as f64).sqrt(), rng);
        let out_b = store.add_zeros(&format!("{name}.out.b"), 1, 1);
        Self { convs, out_w, out_b }
    }

    pub fn lookup(store: &ParamStore, name: &str, kernels: &[usize]) -> Option<Self> {
        let convs = kernels
            .iter()
            .map(|&k| {
                Some((
                    k,
                    store.id(&format!("{name}.conv{k}.w"))?,
                    store.id(&format!("{name}.conv{k}.b"))?,
                ))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            convs,
            out_w: store.id(&format!("{name}.out.w"))?,
            out_b: store.id(&format!("{name}.out.b"))?,
        })
    }

    /// Same-padded convolutions per kernel size, concatenated, max-pooled over
    /// valid rows and mapped to a scalar (1 × 1).
    pub fn score(&self, tape: &mut Tape, x: Var, mask: &[bool]) -> Var {
        let mut maps = Vec::with_capacity(self.convs.len());
        for &(k, w, b) in &self.convs {
            let cols = tape.im2col(x, k);
            let (w, b) = (tape.param(w), tape.param(b));
            let y = tape.matmul(cols, w);
            maps.push(tape.add_row(y, b));
        }
        let y = tape.concat_cols(&maps);
        let pooled = tape.max_rows(y, mask);
        let (w, b) = (tape.param(self.out_w), tape.param(self.out_b));
        let s = tape.matmul(pooled, w);
        tape.add_row(s, b)
    }
}

/// `[E ∥ C ∥ E⊙C ∥ f]` with masked rows zeroed.
pub fn fuse(tape: &mut Tape, e: Var, c: Var, flags: &[f64], mask: &[bool]) -> Var {
    let (rows, d) = tape.shape(e);
    let ec = tape.mul(e, c);
    let f = tape.constant(Tensor::from_vec(rows, 1, flags.to_vec()));
    let x = tape.concat_cols(&[e, c, ec, f]);
    let zeros = tape.constant(Tensor::zeros(rows, 3 * d + 1));
    tape.blend(x, zeros, mask.to_vec())
}

/// Inverted dropout with keep probability `1 - p`.
pub fn dropout<R: Rng>(tape: &mut Tape, x: Var, p: f64, rng: &mut R) -> Var {
    if p <= 0.0 {
        return x;
    }
    let (r, c) = tape.shape(x);
    let keep = 1.0 - p;
    let mask = (0..r * c)
        .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
        .collect();
    let m = tape.constant(Tensor::from_vec(r, c, mask));
    tape.mul(x, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn lstm_matches_step_by_step_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::default();
        let p = LstmIds::init(&mut store, "l", 3, 2, &mut rng);
        let x = Tensor::from_vec(2, 3, vec![0.5, -1.0, 0.2, 0.3, 0.8, -0.4]);
        let mut tape = Tape::new(&store);
        let xv = tape.constant(x.clone());
        let out = lstm(&mut tape, p, xv, 1, 2, &[true, true], false);
        let got = tape.value(out).clone();

        let (w, u, b) = (store.value(p.w), store.value(p.u), store.value(p.b));
        let (mut h, mut c) = ([0.0f64; 2], [0.0f64; 2]);
        for t in 0..2 {
            let mut z = [0.0f64; 8];
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = b.get(0, j);
                for k in 0..3 {
                    *zj += x.get(t, k) * w.get(k, j);
                }
                for k in 0..2 {
                    *zj += h[k] * u.get(k, j);
                }
            }
            for k in 0..2 {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[2 + k]);
                let g = z[4 + k].tanh();
                let o = sigmoid(z[6 + k]);
                c[k] = f * c[k] + i * g;
                h[k] = o * c[k].tanh();
            }
            for k in 0..2 {
                assert!((got.get(t, k) - h[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn masked_steps_are_zero_and_do_not_leak() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::default();
        let f = LstmIds::init(&mut store, "f", 2, 3, &mut rng);
        let b = LstmIds::init(&mut store, "b", 2, 3, &mut rng);
        let mut tape = Tape::new(&store);
        // two groups of three steps; the second group has one valid step
        let x = tape.constant(Tensor::from_vec(6, 2, (0..12).map(|v| v as f64 * 0.1).collect()));
        let mask = [true, true, true, true, false, false];
        let h = bilstm(&mut tape, f, b, x, 2, 3, &mask);
        let hv = tape.value(h).clone();
        assert!(hv.row(4).iter().chain(hv.row(5)).all(|v| *v == 0.0));
        // the lone step equals a one-step run
        let single = tape.constant(Tensor::from_vec(1, 2, vec![0.6, 0.7]));
        let h1 = bilstm(&mut tape, f, b, single, 1, 1, &[true]);
        for (a, b) in tape.value(h1).row(0).iter().zip(hv.row(3)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_example() {
        let store = ParamStore::default();
        let mut tape = Tape::new(&store);
        let h = tape.constant(Tensor::from_vec(2, 2, vec![2.0, 0.0, 0.0, 2.0]));
        let q = tape.constant(Tensor::row_vector(vec![1.0, 0.0]));
        let (e, w) = high_level_attend(&mut tape, h, q, 1, 2, &[true, true]);
        let e2 = std::f64::consts::E.powi(2);
        let (w0, w1) = (e2 / (e2 + 1.0), 1.0 / (e2 + 1.0));
        assert!((tape.value(w).get(0, 0) - w0).abs() < 1e-12);
        assert!((tape.value(w).get(0, 1) - w1).abs() < 1e-12);
        assert!((tape.value(e).get(0, 0) - 2.0 * w0).abs() < 1e-12);
        assert!((tape.value(e).get(0, 1) - 2.0 * w1).abs() < 1e-12);
    }

    #[test]
    fn context_match_example() {
        let store = ParamStore::default();
        let mut tape = Tape::new(&store);
        let eye = Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let e = tape.constant(eye.clone());
        let q = tape.constant(eye);
        let (c, _) = context_match(&mut tape, e, q, Sim::Dot);
        let hi = 1.0 / (1.0 + (-1.0f64).exp());
        let want = [hi, 1.0 - hi, 1.0 - hi, hi];
        for (g, w) in tape.value(c).data.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let single = tape.constant(Tensor::row_vector(vec![0.3, -0.2]));
        let (c1, _) = context_match(&mut tape, e, single, Sim::Dot);
        for r in 0..2 {
            assert_eq!(tape.value(c1).row(r), &[0.3, -0.2]);
        }
    }
}
