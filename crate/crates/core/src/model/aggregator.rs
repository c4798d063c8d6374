//! One-block, one-head self-attention with a residual path:
//!
//! ```text
//! Q = X·Wq   K = X·Wk   Vm = X·Wv
//! A = rowsoftmax(Q·Kᵀ / √d)
//! H = X + A·Vm·Wo
//! V = normalize(mean over rows of H)
//! ```

use crate::linalg::{self, normalize_backward, Mat};

use super::{check_dim, Gradients, ModelConfig, ModelError, ModelParams, MIN_NORM};

pub struct AggregatorTrace {
    x: Mat,
    q: Mat,
    k: Mat,
    vm: Mat,
    attn: Mat,
    mixed: Mat,
    unit: Vec<f64>,
    norm: f64,
}

/// Sinusoidal position table, `m × d`.
pub fn sinusoidal_positions(m: usize, d: usize) -> Mat {
    let mut pe = Mat::zeros(m, d);
    for pos in 0..m {
        for i in 0..d {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * freq;
            pe.set(pos, i, if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    pe
}

fn row_softmax(s: &Mat) -> Mat {
    let rows: Vec<Vec<f64>> = (0..s.rows()).map(|r| linalg::softmax(s.row(r))).collect();
    Mat::from_rows(&rows)
}

/// Video embedding from an ordered sequence of clip embeddings.
pub fn aggregate(
    p: &ModelParams,
    cfg: &ModelConfig,
    clips: &[Vec<f64>],
) -> Result<(Vec<f64>, AggregatorTrace), ModelError> {
    let m = clips.len();
    if m == 0 {
        return Err(ModelError::EmptyInput);
    }
    let d = p.aggregator.wq.rows();
    for c in clips {
        check_dim(d, c.len())?;
    }
    let mut x = Mat::from_rows(clips);
    if cfg.positional {
        x.add_assign(&sinusoidal_positions(m, d));
    }
    let a = &p.aggregator;
    let q = x.matmul(&a.wq);
    let k = x.matmul(&a.wk);
    let vm = x.matmul(&a.wv);
    let mut scores = q.matmul_t(&k);
    scores.scale(1.0 / (d as f64).sqrt());
    let attn = row_softmax(&scores);
    let mixed = attn.matmul(&vm);
    let mut h = mixed.matmul(&a.wo);
    h.add_assign(&x);

    let mut mean = vec![0.0; d];
    for r in 0..m {
        linalg::axpy(&mut mean, 1.0 / m as f64, h.row(r));
    }
    let norm = linalg::norm(&mean);
    if !(norm >= MIN_NORM) {
        return Err(ModelError::DegenerateNorm(norm));
    }
    let unit: Vec<f64> = mean.iter().map(|v| v / norm).collect();
    Ok((
        unit.clone(),
        AggregatorTrace {
            x,
            q,
            k,
            vm,
            attn,
            mixed,
            unit,
            norm,
        },
    ))
}

/// Accumulates aggregator gradients into `grads` and returns `∂L/∂clip_i`.
pub fn aggregate_backward(
    p: &ModelParams,
    trace: AggregatorTrace,
    grad_out: &[f64],
    grads: &mut Gradients,
) -> Vec<Vec<f64>> {
    let AggregatorTrace {
        x,
        q,
        k,
        vm,
        attn,
        mixed,
        unit,
        norm,
    } = trace;
    let (m, d) = x.shape();
    let a = &p.aggregator;
    let g = &mut grads.aggregator;

    let g_mean = normalize_backward(&unit, norm, grad_out);
    let row = linalg::scaled(&g_mean, 1.0 / m as f64);
    let g_h = Mat::from_rows(&vec![row; m]);

    // residual
    let mut g_x = g_h.clone();

    g.wo.add_assign(&mixed.t_matmul(&g_h));
    let g_mixed = g_h.matmul_t(&a.wo);
    let g_attn = g_mixed.matmul_t(&vm);
    let g_vm = attn.t_matmul(&g_mixed);

    // softmax backward, row by row, folded with the 1/√d scale
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut g_scores = Mat::zeros(m, m);
    for r in 0..m {
        let ar = attn.row(r);
        let gr = g_attn.row(r);
        let inner = linalg::dot(ar, gr);
        for c in 0..m {
            g_scores.set(r, c, ar[c] * (gr[c] - inner) * inv_sqrt_d);
        }
    }
    let g_q = g_scores.matmul(&k);
    let g_k = g_scores.t_matmul(&q);

    g.wq.add_assign(&x.t_matmul(&g_q));
    g.wk.add_assign(&x.t_matmul(&g_k));
    g.wv.add_assign(&x.t_matmul(&g_vm));

    g_x.add_assign(&g_q.matmul_t(&a.wq));
    g_x.add_assign(&g_k.matmul_t(&a.wk));
    g_x.add_assign(&g_vm.matmul_t(&a.wv));
    g_x.to_rows()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{grad_check, Pool};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(d: usize) -> ModelConfig {
        ModelConfig {
            d_in: 2,
            d_h: 2,
            d,
            pool: Pool::Mean,
            positional: false,
        }
    }

    fn unit_rows(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = linalg::norm(&v);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect()
    }

    #[test]
    fn zero_weights_reduce_to_normalized_mean() {
        let c = cfg(4);
        let p = ModelParams::zeros(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let clips = unit_rows(&mut rng, 5, 4);
        let (v, _) = aggregate(&p, &c, &clips).unwrap();
        let mut mean = vec![0.0; 4];
        for r in &clips {
            linalg::axpy(&mut mean, 0.2, r);
        }
        let n = linalg::norm(&mean);
        for (a, b) in v.iter().zip(&mean) {
            assert!((a - b / n).abs() < 1e-12);
        }
    }

    #[test]
    fn single_clip_zero_weights_is_identity() {
        let c = cfg(3);
        let p = ModelParams::zeros(&c);
        let clip = vec![0.0, 0.6, 0.8];
        let (v, _) = aggregate(&p, &c, std::slice::from_ref(&clip)).unwrap();
        for (a, b) in v.iter().zip(&clip) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let c = cfg(3);
        assert!(matches!(
            aggregate(&ModelParams::zeros(&c), &c, &[]),
            Err(ModelError::EmptyInput)
        ));
    }

    fn check_backward(c: &ModelConfig, seed: u64, m: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::zeros(c);
        for t in [
            &mut p.aggregator.wq,
            &mut p.aggregator.wk,
            &mut p.aggregator.wv,
            &mut p.aggregator.wo,
        ] {
            t.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let clips = unit_rows(&mut rng, m, c.d);
        let w: Vec<f64> = (0..c.d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let value = |q: &ModelParams| linalg::dot(&aggregate(q, c, &clips).unwrap().0, &w);
        let (_, trace) = aggregate(&p, c, &clips).unwrap();
        let mut g = p.zeros_like();
        aggregate_backward(&p, trace, &w, &mut g);
        grad_check(value, &p, &g, 1e-5).unwrap().max_rel_err
    }

    #[test]
    fn backward_matches_central_differences() {
        for seed in 0..5 {
            let err = check_backward(&cfg(8), seed, 5);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
        let mut positional = cfg(8);
        positional.positional = true;
        assert!(check_backward(&positional, 9, 5) < 1e-4);
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let c = cfg(6);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut p = ModelParams::zeros(&c);
        for t in [
            &mut p.aggregator.wq,
            &mut p.aggregator.wk,
            &mut p.aggregator.wv,
            &mut p.aggregator.wo,
        ] {
            t.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let clips = unit_rows(&mut rng, 4, 6);
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, trace) = aggregate(&p, &c, &clips).unwrap();
        let mut g = p.zeros_like();
        let gx = aggregate_backward(&p, trace, &w, &mut g);
        let eps = 1e-6;
        for i in 0..4 {
            for j in 0..6 {
                let mut plus = clips.clone();
                plus[i][j] += eps;
                let mut minus = clips.clone();
                minus[i][j] -= eps;
                let fp = linalg::dot(&aggregate(&p, &c, &plus).unwrap().0, &w);
                let fm = linalg::dot(&aggregate(&p, &c, &minus).unwrap().0, &w);
                let num = (fp - fm) / (2.0 * eps);
                let denom = gx[i][j].abs().max(num.abs()).max(1e-12);
                assert!((gx[i][j] - num).abs() / denom < 1e-4);
            }
        }
    }
}
