use super::{ModelError, ParamStore, Real};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState<F> {
    pub m: ParamStore<F>,
    pub v: ParamStore<F>,
    pub step: u64,
}

impl<F: Real> AdamWState<F> {
    pub fn new(params: &ParamStore<F>) -> Self {
        AdamWState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One AdamW update with bias-corrected moments and decoupled decay:
///
/// ```text
/// m ← β1·m + (1−β1)·g        v ← β2·v + (1−β2)·g²
/// θ ← θ − lr·( m̂ / (√v̂ + ε) + λ·θ )
/// ```
///
/// Gradients are checked for finiteness before anything is modified.
pub fn adamw_step<F: Real>(
    params: &mut ParamStore<F>,
    grads: &ParamStore<F>,
    state: &mut AdamWState<F>,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
    weight_decay: f64,
) -> Result<(), ModelError> {
    if let Some(t) = grads
        .tensors
        .iter()
        .find(|t| t.data.iter().any(|x| !x.is_finite()))
    {
        return Err(ModelError::NonFiniteGradient(t.name.clone()));
    }
    state.step += 1;
    let (b1, b2) = (F::lit(betas.0), F::lit(betas.1));
    let bc1 = F::lit(1.0 - betas.0.powi(state.step as i32));
    let bc2 = F::lit(1.0 - betas.1.powi(state.step as i32));
    let (lr, eps, wd) = (F::lit(lr), F::lit(eps), F::lit(weight_decay));
    let one = F::one();
    for (((p, g), m), v) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(&mut state.m.tensors)
        .zip(&mut state.v.tensors)
    {
        assert_eq!(p.data.len(), g.data.len(), "gradient shape for {}", p.name);
        for (((p, &g), m), v) in p
            .data
            .iter_mut()
            .zip(&g.data)
            .zip(&mut m.data)
            .zip(&mut v.data)
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * (mhat / (vhat.sqrt() + eps) + wd * *p);
        }
    }
    Ok(())
}
