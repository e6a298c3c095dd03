mod common;

use common::{
    max_abs_diff, model_grad_error, reference_logits, reference_loss, toy_model, toy_tokens,
};
use sffn::accounting::{count_params, forward_flops, tensor_shapes};
use sffn::model::{FfnKind, KVCache, ModelConfig, Tape, TransformerLM};
use sffn::numeric::flops;
use sffn::spectral::factorize_model_ffns;
use sffn::Error;

fn toy() -> ModelConfig {
    ModelConfig::dense(16, 2, 17)
        .with_seq_len(12)
        .with_heads(2, 2)
}

#[test]
fn forward_matches_reference_implementation() {
    for cfg in [
        toy(),
        toy().with_low_rank(4),
        toy().with_heads(4, 2),
        toy().with_heads(4, 1),
    ] {
        let model = toy_model(&cfg, 3);
        let tokens = toy_tokens(9, 17, 4);
        let out = model.lm_forward(&tokens).unwrap();
        let reference: Vec<f64> = reference_logits(&model, &tokens).concat();
        assert!(max_abs_diff(out.logits.as_slice(), &reference) < 1e-11);
        assert!((out.loss.unwrap() - reference_loss(&model, &tokens)).abs() < 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let tokens = toy_tokens(8, 17, 9);
    for cfg in [toy(), toy().with_low_rank(4), toy().with_heads(4, 2)] {
        let err = model_grad_error(&toy_model(&cfg, 5), &tokens);
        assert!(err < 1e-4, "{:?}: {err}", cfg.ffn);
    }
}

#[test]
fn live_tensor_sizes_match_accounting() {
    {
        let name = "desk";
        let c = ModelConfig::preset(name).unwrap();
        let m = TransformerLM::new(&c, 0).unwrap();
        assert_eq!(m.param_count() as u64, count_params(&c).total);
    }
    let c = toy().with_low_rank(4);
    let m = TransformerLM::new(&c, 0).unwrap();
    assert_eq!(m.param_count() as u64, count_params(&c).total);
    let shapes: Vec<(usize, usize)> = m.tensors().iter().map(|t| t.data.shape()).collect();
    assert_eq!(shapes, tensor_shapes(&c));
    assert_eq!(m.factor_pair_count(), 2);
}

#[test]
fn full_rank_factors_reproduce_dense_model() {
    let dense = toy_model(&toy(), 1);
    let lr = factorize_model_ffns(
        &dense,
        FfnKind::LowRank {
            rank: 16,
            first_block_dense: false,
        },
    )
    .unwrap();
    let tokens = toy_tokens(10, 17, 2);
    let a = dense.lm_forward(&tokens).unwrap().logits;
    let b = lr.lm_forward(&tokens).unwrap().logits;
    let rel = a.sub(&b).unwrap().frobenius_norm() / a.frobenius_norm();
    assert!(rel < 1e-8, "{rel}");
}

#[test]
fn grouped_attention_with_all_heads_is_multi_head() {
    let mha = toy().with_heads(4, 4);
    let model = toy_model(&mha, 8);
    let tokens = toy_tokens(10, 17, 1);
    let ours = model.lm_forward(&tokens).unwrap().logits;
    let reference = reference_logits(&model, &tokens).concat();
    assert!(max_abs_diff(ours.as_slice(), &reference) < 1e-12);
}

#[test]
fn cached_decoding_matches_full_forward() {
    for cfg in [toy(), toy().with_heads(4, 1).with_low_rank(4)] {
        let model = toy_model(&cfg, 2);
        let tokens = toy_tokens(12, 17, 6);
        let full = model.lm_forward(&tokens).unwrap().logits;
        let mut cache = KVCache::new(&cfg);
        let prefix = model.forward_cached(&tokens[..5], &mut cache).unwrap();
        assert!(max_abs_diff(prefix.as_slice(), full.row_range(0, 5).as_slice()) < 1e-10);
        for (i, &t) in tokens.iter().enumerate().skip(5) {
            let row = model.decode_step(&mut cache, t).unwrap();
            assert!(max_abs_diff(&row, full.row(i)) < 1e-10, "position {i}");
        }
        assert_eq!(cache.len(), 12);
        assert!(matches!(
            model.decode_step(&mut cache, 0),
            Err(Error::CacheOverflow { .. })
        ));
    }
}

#[test]
fn batched_decoding_matches_single_sequences() {
    let cfg = toy().with_heads(4, 2);
    let model = toy_model(&cfg, 4);
    let seqs = [
        toy_tokens(6, 17, 1),
        toy_tokens(6, 17, 2),
        toy_tokens(6, 17, 3),
    ];
    let mut caches: Vec<KVCache> = seqs.iter().map(|_| KVCache::new(&cfg)).collect();
    for (c, s) in caches.iter_mut().zip(&seqs) {
        model.forward_cached(&s[..3], c).unwrap();
    }
    for step in 3..6 {
        let toks: Vec<u32> = seqs.iter().map(|s| s[step]).collect();
        let batch = model.decode_batch(&mut caches, &toks).unwrap();
        for (b, s) in seqs.iter().enumerate() {
            let full = model.lm_forward(&s[..=step]).unwrap().logits;
            assert!(max_abs_diff(batch.row(b), full.row(step)) < 1e-10);
        }
    }
}

#[test]
fn future_tokens_never_change_past_logits() {
    let model = toy_model(&toy().with_low_rank(4), 7);
    let a = toy_tokens(10, 17, 1);
    let mut b = a.clone();
    for t in &mut b[6..] {
        *t = (*t + 5) % 17;
    }
    let la = model.lm_forward(&a).unwrap().logits;
    let lb = model.lm_forward(&b).unwrap().logits;
    assert_eq!(la.row_range(0, 6), lb.row_range(0, 6));
    assert_ne!(la.row(6), lb.row(6));
}

#[test]
fn single_symbol_vocab_has_zero_loss_and_logit_gradients() {
    let cfg = ModelConfig::dense(16, 2, 1).with_seq_len(8);
    let model = TransformerLM::new(&cfg, 0).unwrap();
    let mut tape = Tape::new();
    let out = model.forward(&[0; 6], Some(&mut tape)).unwrap();
    assert_eq!(out.loss, Some(0.0));
    let g = model.backward(&tape).unwrap();
    assert!(g.to_flat().iter().all(|&v| v == 0.0));
}

#[test]
fn duplicated_batch_gives_identical_mean_gradient() {
    let model = toy_model(&toy(), 3);
    let tokens = toy_tokens(8, 17, 3);
    let mut tape = Tape::new();
    model.forward(&tokens, Some(&mut tape)).unwrap();
    let once = model.backward(&tape).unwrap();
    let mut twice = model.zeros_like();
    model.backward_into(&tape, &mut twice, 1.0 / 14.0).unwrap();
    model.backward_into(&tape, &mut twice, 1.0 / 14.0).unwrap();
    assert!(max_abs_diff(&once.to_flat(), &twice.to_flat()) < 1e-12);
}

#[test]
fn backward_requires_forward_and_tokens_are_checked() {
    let model = TransformerLM::new(&toy(), 0).unwrap();
    assert!(matches!(
        model.backward(&Tape::new()),
        Err(Error::BackwardWithoutForward)
    ));
    assert!(matches!(
        model.lm_forward(&[3, 17]),
        Err(Error::TokenOutOfRange { id: 17, .. })
    ));
    assert!(matches!(
        model.lm_forward(&[0; 13]),
        Err(Error::CacheOverflow { .. })
    ));
}

#[test]
fn forward_flop_counter_matches_accounting() {
    for cfg in [toy(), toy().with_low_rank(4), toy().with_heads(4, 1)] {
        let model = TransformerLM::new(&cfg, 0).unwrap();
        let tokens = toy_tokens(11, 17, 0);
        let (_, n) = flops::measure(|| model.lm_forward(&tokens).unwrap());
        assert_eq!(n, forward_flops(&cfg, 11, 0));
        let mut cache = KVCache::new(&cfg);
        model.forward_cached(&tokens[..4], &mut cache).unwrap();
        let (_, n) = flops::measure(|| model.decode_step(&mut cache, 1).unwrap());
        assert_eq!(n, forward_flops(&cfg, 1, 4));
    }
}

#[test]
fn seeded_construction_is_reproducible() {
    let c = toy().with_low_rank(4);
    assert_eq!(
        TransformerLM::new(&c, 9).unwrap(),
        TransformerLM::new(&c, 9).unwrap()
    );
    assert_ne!(
        TransformerLM::new(&c, 9).unwrap(),
        TransformerLM::new(&c, 10).unwrap()
    );
    // the low-rank model is the spectral factorization of its dense twin
    let dense = TransformerLM::new(&c.dense_twin(), 9).unwrap();
    assert_eq!(
        factorize_model_ffns(&dense, c.ffn).unwrap(),
        TransformerLM::new(&c, 9).unwrap()
    );
}
