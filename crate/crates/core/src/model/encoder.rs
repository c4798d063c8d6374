use crate::linalg::{self, normalize_backward};

use super::{check_dim, Gradients, ModelError, ModelParams, MIN_NORM};

struct FrameTrace {
    x: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    out: Vec<f64>,
    norm: f64,
}

/// Activations cached by [`encode_frames`].
pub struct EncoderTrace {
    frames: Vec<FrameTrace>,
}

impl EncoderTrace {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// `f_k = normalize(W2·relu(W1·x_k + b1) + b2)` for each frame.
pub fn encode_frames(p: &ModelParams, xs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, EncoderTrace), ModelError> {
    let enc = &p.encoder;
    let mut out = Vec::with_capacity(xs.len());
    let mut frames = Vec::with_capacity(xs.len());
    for x in xs {
        check_dim(enc.w1.cols(), x.len())?;
        let mut pre = enc.w1.matvec(x);
        linalg::axpy(&mut pre, 1.0, &enc.b1);
        let hidden: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let mut y = enc.w2.matvec(&hidden);
        linalg::axpy(&mut y, 1.0, &enc.b2);
        let norm = linalg::norm(&y);
        if !(norm >= MIN_NORM) {
            return Err(ModelError::DegenerateNorm(norm));
        }
        let f: Vec<f64> = y.iter().map(|v| v / norm).collect();
        out.push(f.clone());
        frames.push(FrameTrace {
            x: x.clone(),
            pre,
            hidden,
            out: f,
            norm,
        });
    }
    Ok((out, EncoderTrace { frames }))
}

/// Accumulates encoder gradients for `∂L/∂f_k` into `grads`.
pub fn encode_frames_backward(p: &ModelParams, trace: EncoderTrace, grad_f: &[Vec<f64>], grads: &mut Gradients) {
    assert_eq!(trace.frames.len(), grad_f.len(), "one gradient per frame");
    let enc = &p.encoder;
    let g = &mut grads.encoder;
    for (ft, gf) in trace.frames.into_iter().zip(grad_f) {
        if gf.iter().all(|v| *v == 0.0) {
            continue;
        }
        let gy = normalize_backward(&ft.out, ft.norm, gf);
        g.w2.add_outer(1.0, &gy, &ft.hidden);
        linalg::axpy(&mut g.b2, 1.0, &gy);
        let gh = enc.w2.matvec_t(&gy);
        let gpre: Vec<f64> = gh
            .iter()
            .zip(&ft.pre)
            .map(|(g, pre)| if *pre > 0.0 { *g } else { 0.0 })
            .collect();
        g.w1.add_outer(1.0, &gpre, &ft.x);
        linalg::axpy(&mut g.b1, 1.0, &gpre);
    }
}

/// Smallest `|W1·x + b1|` over all inputs; finite differences with step `ε`
/// are only trustworthy when this exceeds a few multiples of `ε`.
pub fn min_preactivation_margin(p: &ModelParams, xs: &[Vec<f64>]) -> f64 {
    let enc = &p.encoder;
    xs.iter()
        .flat_map(|x| {
            let mut pre = enc.w1.matvec(x);
            linalg::axpy(&mut pre, 1.0, &enc.b1);
            pre
        })
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min)
}
