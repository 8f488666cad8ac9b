//! Pre-norm transformer encoder: learned positions, multi-head
//! self-attention, GELU feed-forward, final layer norm.

use rand::Rng;

use super::ops::{
    gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, softmax_row,
    NormCache,
};
use super::params::Linear;
use super::real::{gemm, MatMut, MatRef};
use super::{Model, ModelError, ParamStore, Real};
use crate::corpus::PAD;

struct LayerCache<F> {
    ln1: NormCache<F>,
    a: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// `n_heads × len × len`
    probs: Vec<F>,
    ctx: Vec<F>,
    attn_drop: Option<Vec<F>>,
    ln2: NormCache<F>,
    b: Vec<F>,
    pre: Vec<F>,
    act: Vec<F>,
    ffn_drop: Option<Vec<F>>,
}

/// Activations kept for the backward pass.
pub struct Forward<F> {
    pub(crate) ids: Vec<u32>,
    emb_drop: Option<Vec<F>>,
    layers: Vec<LayerCache<F>>,
    final_norm: NormCache<F>,
    /// `len × d_model`, row 0 is `h_[CLS]`.
    pub hidden: Vec<F>,
    pub(crate) cls_drop: Option<Vec<F>>,
}

impl<F> Forward<F> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub(crate) fn dropout_mask<F: Real, R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<F> {
    let keep = F::lit(1.0 / (1.0 - p));
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < p {
                F::zero()
            } else {
                keep
            }
        })
        .collect()
}

fn apply_mask<F: Real>(x: &mut [F], mask: &Option<Vec<F>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(v, k)| *v *= *k);
    }
}

/// Distinct mutable borrows of two tensors.
pub(crate) fn pair_mut<F>(store: &mut ParamStore<F>, lin: Linear) -> (&mut [F], &mut [F]) {
    let (i, j) = (lin.weight, lin.bias);
    assert_ne!(i, j);
    let (lo, hi) = (i.min(j), i.max(j));
    let (left, right) = store.tensors.split_at_mut(hi);
    let (a, b) = (&mut left[lo].data, &mut right[0].data);
    if i < j {
        (a, b)
    } else {
        (b, a)
    }
}

impl<F: Real> Model<F> {
    fn p(&self, idx: usize) -> &[F] {
        &self.params.tensors[idx].data
    }

    pub(crate) fn check_input(&self, ids: &[u32]) -> Result<(), ModelError> {
        if ids.len() > self.config.max_len {
            return Err(ModelError::SequenceTooLong {
                len: ids.len(),
                max_len: self.config.max_len,
            });
        }
        if let Some(&id) = ids
            .iter()
            .find(|&&id| id as usize >= self.config.vocab_size)
        {
            return Err(ModelError::UnknownTokenId {
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        if ids.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        Ok(())
    }

    /// Runs the encoder. Dropout is drawn from `rng` only when `rng` is given
    /// and the dropout probability is positive.
    pub fn forward<R: Rng>(
        &self,
        ids: &[u32],
        mut rng: Option<&mut R>,
    ) -> Result<Forward<F>, ModelError> {
        self.check_input(ids)?;
        let cfg = &self.config;
        let (len, d, h) = (ids.len(), cfg.d_model, cfg.n_heads);
        let hd = d / h;
        let scale = F::one() / F::from_usize(hd).unwrap().sqrt();
        let p = cfg.dropout_prob;
        let mut drop = |n: usize| -> Option<Vec<F>> {
            match rng.as_deref_mut() {
                Some(r) if p > 0.0 => Some(dropout_mask(n, p, r)),
                _ => None,
            }
        };

        let tok = self.p(self.layout.token_emb);
        let pos = self.p(self.layout.pos_emb);
        let mut x = vec![F::zero(); len * d];
        for (i, &id) in ids.iter().enumerate() {
            let t = &tok[id as usize * d..(id as usize + 1) * d];
            let ps = &pos[i * d..(i + 1) * d];
            for j in 0..d {
                x[i * d + j] = t[j] + ps[j];
            }
        }
        let emb_drop = drop(len * d);
        apply_mask(&mut x, &emb_drop);

        let keys: Vec<bool> = ids.iter().map(|&id| id != PAD).collect();
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for li in &self.layout.layers {
            let (a, ln1) = layer_norm(&x, len, d, self.p(li.ln1.weight), self.p(li.ln1.bias));
            let q = linear(&a, len, self.p(li.q.weight), self.p(li.q.bias), d, d);
            let k = linear(&a, len, self.p(li.k.weight), self.p(li.k.bias), d, d);
            let v = linear(&a, len, self.p(li.v.weight), self.p(li.v.bias), d, d);
            let mut probs = vec![F::zero(); h * len * len];
            let mut ctx = vec![F::zero(); len * d];
            for head in 0..h {
                let scores = &mut probs[head * len * len..(head + 1) * len * len];
                gemm(
                    scale,
                    MatRef::new(&q, len, d).cols(head * hd, hd),
                    MatRef::new(&k, len, d).cols(head * hd, hd).t(),
                    F::zero(),
                    MatMut::new(scores, len, len),
                );
                for r in 0..len {
                    softmax_row(&mut scores[r * len..(r + 1) * len], Some(&keys));
                }
                gemm(
                    F::one(),
                    MatRef::new(scores, len, len),
                    MatRef::new(&v, len, d).cols(head * hd, hd),
                    F::zero(),
                    MatMut::new(&mut ctx, len, d).cols(head * hd, hd),
                );
            }
            let mut o = linear(&ctx, len, self.p(li.out.weight), self.p(li.out.bias), d, d);
            let attn_drop = drop(len * d);
            apply_mask(&mut o, &attn_drop);
            for (xi, oi) in x.iter_mut().zip(&o) {
                *xi += *oi;
            }

            let (b, ln2) = layer_norm(&x, len, d, self.p(li.ln2.weight), self.p(li.ln2.bias));
            let pre = linear(
                &b,
                len,
                self.p(li.ffn_in.weight),
                self.p(li.ffn_in.bias),
                d,
                cfg.d_ff,
            );
            let act: Vec<F> = pre.iter().map(|&z| gelu(z)).collect();
            let mut f = linear(
                &act,
                len,
                self.p(li.ffn_out.weight),
                self.p(li.ffn_out.bias),
                cfg.d_ff,
                d,
            );
            let ffn_drop = drop(len * d);
            apply_mask(&mut f, &ffn_drop);
            for (xi, fi) in x.iter_mut().zip(&f) {
                *xi += *fi;
            }
            layers.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                ctx,
                attn_drop,
                ln2,
                b,
                pre,
                act,
                ffn_drop,
            });
        }
        let fl = self.layout.final_ln;
        let (hidden, final_norm) = layer_norm(&x, len, d, self.p(fl.weight), self.p(fl.bias));
        let cls_drop = drop(d);
        Ok(Forward {
            ids: ids.to_vec(),
            emb_drop,
            layers,
            final_norm,
            hidden,
            cls_drop,
        })
    }

    /// Backpropagates `d loss / d hidden` into `grads` (accumulating).
    pub fn backward(&self, fwd: &Forward<F>, dhidden: &[F], grads: &mut ParamStore<F>) {
        let cfg = &self.config;
        let (len, d, h, ff) = (fwd.len(), cfg.d_model, cfg.n_heads, cfg.d_ff);
        let hd = d / h;
        let scale = F::one() / F::from_usize(hd).unwrap().sqrt();

        let fl = self.layout.final_ln;
        let mut dx = {
            let (dg, db) = pair_mut(grads, fl);
            layer_norm_backward(dhidden, &fwd.final_norm, len, d, self.p(fl.weight), dg, db)
        };

        for (li, cache) in self.layout.layers.iter().zip(&fwd.layers).rev() {
            // x_out = x_mid + drop(ffn(ln2(x_mid)))
            let mut df = dx.clone();
            apply_mask(&mut df, &cache.ffn_drop);
            let dact = {
                let (dw, db) = pair_mut(grads, li.ffn_out);
                linear_backward(
                    &cache.act,
                    &df,
                    len,
                    self.p(li.ffn_out.weight),
                    ff,
                    d,
                    dw,
                    db,
                )
            };
            let dpre: Vec<F> = dact
                .iter()
                .zip(&cache.pre)
                .map(|(&g, &z)| g * gelu_grad(z))
                .collect();
            let db_in = {
                let (dw, db) = pair_mut(grads, li.ffn_in);
                linear_backward(
                    &cache.b,
                    &dpre,
                    len,
                    self.p(li.ffn_in.weight),
                    d,
                    ff,
                    dw,
                    db,
                )
            };
            let dmid = {
                let (dg, db) = pair_mut(grads, li.ln2);
                layer_norm_backward(&db_in, &cache.ln2, len, d, self.p(li.ln2.weight), dg, db)
            };
            for (a, b) in dx.iter_mut().zip(&dmid) {
                *a += *b;
            }

            // x_mid = x_in + drop(attn(ln1(x_in)))
            let mut d_o = dx.clone();
            apply_mask(&mut d_o, &cache.attn_drop);
            let dctx = {
                let (dw, db) = pair_mut(grads, li.out);
                linear_backward(&cache.ctx, &d_o, len, self.p(li.out.weight), d, d, dw, db)
            };
            let mut dq = vec![F::zero(); len * d];
            let mut dk = vec![F::zero(); len * d];
            let mut dv = vec![F::zero(); len * d];
            let mut dscores = vec![F::zero(); len * len];
            for head in 0..h {
                let probs = &cache.probs[head * len * len..(head + 1) * len * len];
                // dP = dctx_h · v_hᵀ
                gemm(
                    F::one(),
                    MatRef::new(&dctx, len, d).cols(head * hd, hd),
                    MatRef::new(&cache.v, len, d).cols(head * hd, hd).t(),
                    F::zero(),
                    MatMut::new(&mut dscores, len, len),
                );
                // dv_h = Pᵀ · dctx_h
                gemm(
                    F::one(),
                    MatRef::new(probs, len, len).t(),
                    MatRef::new(&dctx, len, d).cols(head * hd, hd),
                    F::zero(),
                    MatMut::new(&mut dv, len, d).cols(head * hd, hd),
                );
                for r in 0..len {
                    let pr = &probs[r * len..(r + 1) * len];
                    let dr = &mut dscores[r * len..(r + 1) * len];
                    let dot = pr.iter().zip(dr.iter()).map(|(&p, &g)| p * g).sum::<F>();
                    for (g, &p) in dr.iter_mut().zip(pr) {
                        *g = p * (*g - dot) * scale;
                    }
                }
                gemm(
                    F::one(),
                    MatRef::new(&dscores, len, len),
                    MatRef::new(&cache.k, len, d).cols(head * hd, hd),
                    F::zero(),
                    MatMut::new(&mut dq, len, d).cols(head * hd, hd),
                );
                gemm(
                    F::one(),
                    MatRef::new(&dscores, len, len).t(),
                    MatRef::new(&cache.q, len, d).cols(head * hd, hd),
                    F::zero(),
                    MatMut::new(&mut dk, len, d).cols(head * hd, hd),
                );
            }
            let mut da = vec![F::zero(); len * d];
            for (lin, dy) in [(li.q, &dq), (li.k, &dk), (li.v, &dv)] {
                let (dw, db) = pair_mut(grads, lin);
                let part = linear_backward(&cache.a, dy, len, self.p(lin.weight), d, d, dw, db);
                for (a, b) in da.iter_mut().zip(&part) {
                    *a += *b;
                }
            }
            let din = {
                let (dg, db) = pair_mut(grads, li.ln1);
                layer_norm_backward(&da, &cache.ln1, len, d, self.p(li.ln1.weight), dg, db)
            };
            for (a, b) in dx.iter_mut().zip(&din) {
                *a += *b;
            }
        }

        apply_mask(&mut dx, &fwd.emb_drop);
        let tok = self.layout.token_emb;
        for (i, &id) in fwd.ids.iter().enumerate() {
            let row = &dx[i * d..(i + 1) * d];
            let dst = &mut grads.tensors[tok].data[id as usize * d..(id as usize + 1) * d];
            dst.iter_mut().zip(row).for_each(|(a, b)| *a += *b);
        }
        let pos = &mut grads.tensors[self.layout.pos_emb].data;
        for i in 0..len {
            pos[i * d..(i + 1) * d]
                .iter_mut()
                .zip(&dx[i * d..(i + 1) * d])
                .for_each(|(a, b)| *a += *b);
        }
    }
}
