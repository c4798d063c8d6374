//! Oracle measurements on the seed-7 synthetic corpus and on random inputs.
//! Observed values were measured once and are frozen here.

use procaware::corpus::{synthesize_corpus, SynthSpec};
use procaware::embed::{embed_corpus, embed_text, HashEmbedderConfig};
use procaware::eval::{phase_probe, rank_retrieval, summarize_margins};
use procaware::linalg;
use procaware::losses::counterfactual_margin;
use procaware::model::{aggregate, ModelConfig, ModelParams, Pool};
use procaware::trainer::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seed7() -> procaware::corpus::SynthOutput {
    synthesize_corpus(&SynthSpec::new(8, 6, 16, 0.05, 7)).unwrap()
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = linalg::norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn max_pairwise(vs: &[Vec<f64>]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for i in 0..vs.len() {
        for j in 0..i {
            m = m.max(linalg::dot(&vs[i], &vs[j]));
        }
    }
    m
}

#[test]
fn frames_sit_nearest_their_latent_state() {
    let s = seed7();
    let (mut hit, mut n) = (0usize, 0usize);
    for ov in &s.oracle {
        for oc in &ov.clips {
            let clip = &s.corpus.clips[&oc.clip_id];
            for (f, &label) in clip.frame_features.iter().zip(&oc.frame_labels) {
                let dist = |z: &Vec<f64>| f.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let best = (0..ov.latent_states.len())
                    .min_by(|&a, &b| dist(&ov.latent_states[a]).total_cmp(&dist(&ov.latent_states[b])))
                    .unwrap();
                hit += usize::from(best == label);
                n += 1;
            }
        }
    }
    assert_eq!(n, 192);
    // observed: 192 / 192
    assert!(hit as f64 / n as f64 >= 0.99, "{hit}/{n}");
}

#[test]
fn distinct_steps_get_distinct_vectors_at_d64() {
    let s = seed7();
    let cfg = HashEmbedderConfig::new(64, 0).unwrap();
    let table = embed_corpus(&cfg, &s.corpus).unwrap();
    let narr: Vec<Vec<f64>> = s
        .corpus
        .clips
        .values()
        .map(|c| table.get(&c.narration).unwrap().values().to_vec())
        .collect();
    let m = max_pairwise(&narr);
    assert!((m - 0.774_596_669_241_483_4).abs() < 1e-12, "observed {m}");
    assert!(m < 0.99);

    // across every distinct corpus text, a few short state texts collide
    // under 64-bucket signed hashing
    let mut texts: Vec<&str> = s.corpus.texts();
    texts.sort_unstable();
    texts.dedup();
    assert_eq!(texts.len(), 384);
    let vs: Vec<Vec<f64>> = texts.iter().map(|t| table.get(t).unwrap().values().to_vec()).collect();
    let mut near = 0;
    for i in 0..vs.len() {
        for j in 0..i {
            near += usize::from(linalg::dot(&vs[i], &vs[j]) >= 0.99);
        }
    }
    assert_eq!(near, 3);
}

#[test]
fn unrelated_texts_are_nearly_orthogonal_at_d256() {
    let cfg = HashEmbedderConfig::new(256, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let word = |rng: &mut ChaCha8Rng| (0..6).map(|_| char::from(b'a' + rng.random_range(0..26u8))).collect::<String>();
    let mut total = 0.0;
    for _ in 0..200 {
        let a: Vec<String> = (0..8).map(|_| word(&mut rng)).collect();
        let b: Vec<String> = (0..8).map(|_| word(&mut rng)).collect();
        let ea = embed_text(&cfg, &a.join(" ")).unwrap();
        let eb = embed_text(&cfg, &b.join(" ")).unwrap();
        total += ea.dot(&eb).abs();
    }
    let mean = total / 200.0;
    // observed 0.0283
    assert!(mean < 0.2, "{mean}");
    assert!((mean - 0.028_300_447_825_919_27).abs() < 1e-9, "{mean}");
}

#[test]
fn random_embeddings_retrieve_at_chance() {
    let mut r1 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<_> = (0..50).map(|_| unit(&mut rng, 32)).collect();
        let c: Vec<_> = (0..50).map(|_| unit(&mut rng, 32)).collect();
        r1 += rank_retrieval(&q, &c, &(0..50).collect::<Vec<_>>()).recall_at_1;
    }
    let mean = r1 / 20.0;
    assert!((mean - 0.02).abs() < 0.02, "{mean}");
}

#[test]
fn untrained_phase_probe_is_near_chance() {
    let s = seed7();
    let cfg = TrainConfig::default();
    let table = embed_corpus(&cfg.embedder(), &s.corpus).unwrap();
    let accs: Vec<f64> = (0..20u64)
        .map(|seed| {
            phase_probe(&ModelParams::init(&cfg.model(), seed), &s.corpus, &table)
                .unwrap()
                .accuracy
        })
        .collect();
    let mean = accs.iter().sum::<f64>() / 20.0;
    // observed mean 0.498, range 0.385..0.562
    assert!((mean - 0.5).abs() < 0.05, "{mean}");
    assert!(accs.iter().all(|a| (0.3..0.7).contains(a)), "{accs:?}");
}

fn agg_setup(positional: bool) -> (ModelParams, ModelConfig, Vec<Vec<f64>>) {
    let cfg = ModelConfig {
        d_in: 4,
        d_h: 6,
        d: 8,
        pool: Pool::Mean,
        positional,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut p = ModelParams::init(&cfg, 11);
    for t in [&mut p.aggregator.wq, &mut p.aggregator.wk, &mut p.aggregator.wv, &mut p.aggregator.wo] {
        t.as_mut_slice().iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
    }
    let clips = (0..5).map(|_| unit(&mut rng, 8)).collect();
    (p, cfg, clips)
}

#[test]
fn aggregator_ignores_order_without_positions() {
    let (p, cfg, clips) = agg_setup(false);
    let (a, _) = aggregate(&p, &cfg, &clips).unwrap();
    let rev: Vec<_> = clips.iter().rev().cloned().collect();
    let (b, _) = aggregate(&p, &cfg, &rev).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn aggregator_sees_order_with_positions() {
    let (p, cfg, clips) = agg_setup(true);
    let (a, _) = aggregate(&p, &cfg, &clips).unwrap();
    let rev: Vec<_> = clips.iter().rev().cloned().collect();
    let (b, _) = aggregate(&p, &cfg, &rev).unwrap();
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-3, "{diff}");
}

#[test]
fn margin_is_one_for_exact_summary_and_orthogonal_counterfactuals() {
    let e = |i: usize| {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        v
    };
    let m = counterfactual_margin(&[e(0), e(1)], &[e(0), e(1)], &[vec![e(2), e(3)], vec![e(0)]]);
    assert_eq!(m, vec![Some(1.0), Some(1.0)]);
    let none = counterfactual_margin(&[e(0)], &[e(0)], &[vec![]]);
    assert_eq!(summarize_margins(&none).n, 0);
}
