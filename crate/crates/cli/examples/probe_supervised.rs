use mtrl_core::corpus::{generate_corpus, LanguageSpec, ReorderRule};
use mtrl_core::grpo::encode_prompt;
use mtrl_core::metrics::corpus_bleu;
use mtrl_core::optim::{adam_step, AdamHyper, AdamState};
use mtrl_core::policy::{
    GruPolicy, PolicyParams, EOS_ID, THINK_CLOSE_ID, THINK_OPEN_ID, TRANSLATE_CLOSE_ID,
    TRANSLATE_OPEN_ID,
};
use mtrl_core::protocol::{parse_response, ThinkMode};
use mtrl_core::corpus::EpochSampler;

fn main() {
    let d: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(48);
    let reorder = match std::env::args().nth(2).as_deref() {
        Some("reverse") => ReorderRule::Reverse,
        _ => ReorderRule::Identity,
    };
    let steps: usize = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(1500);
    let spec = LanguageSpec { reorder, ..LanguageSpec::default() };
    let vocab = spec.vocabulary().unwrap();
    let corpus = generate_corpus(&spec, 512, 128, 0).unwrap();
    let params = PolicyParams::init(d, &vocab, 0, 8.0);
    let mut policy = GruPolicy::new(vocab.clone(), params);
    let mut opt = AdamState::zeros(d, vocab.size());
    let hyper = AdamHyper::with_lr(2e-3);

    let gold: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .train
        .iter()
        .map(|inst| {
            let prompt = encode_prompt(&vocab, inst);
            let mut out = vec![THINK_OPEN_ID, THINK_CLOSE_ID, TRANSLATE_OPEN_ID];
            out.extend(vocab.encode_text(inst.ref_text.as_deref().unwrap()));
            out.push(TRANSLATE_CLOSE_ID);
            out.push(EOS_ID);
            (prompt, out)
        })
        .collect();
    let sampler = EpochSampler::new(gold.len(), 8, 7);

    for step in 0..steps {
        let mut grads = PolicyParams::zeros(d, vocab.size());
        let batch: Vec<_> = sampler.batch_at(step as u64).into_iter().map(|i| &gold[i]).collect();
        let mut nll = 0.0;
        let mut n_tok = 0usize;
        for (prompt, out) in &batch {
            let trace = policy.teacher_trace(prompt, out, 1.0).unwrap();
            n_tok += out.len();
            nll -= trace.logprobs.iter().sum::<f64>();
            let seeds = vec![-1.0; out.len()];
            policy.backprop_trace(&trace, &seeds, &mut grads);
        }
        let scale = 1.0 / n_tok as f64;
        for block in mtrl_core::policy::ParamBlock::ALL {
            for g in grads.block_mut(block) {
                *g *= scale;
            }
        }
        adam_step(&mut policy.params, &grads, &mut opt, &hyper);
        if (step + 1) % 250 == 0 || step == 0 {
            let mut pairs = Vec::new();
            let mut exact = 0usize;
            let mut slot_hits = [0usize; 5];
            let mut slot_n = [0usize; 5];
            for inst in corpus.test.iter().take(64) {
                let prompt = encode_prompt(&vocab, inst);
                let resp = policy.greedy_response(&prompt, 64, 1.0).unwrap();
                let text = vocab.decode(&resp.tokens);
                let parsed = parse_response(&text, ThinkMode::Required);
                let hyp: Vec<String> =
                    parsed.translate_text.split_whitespace().map(str::to_string).collect();
                let rf: Vec<String> = inst
                    .ref_text
                    .as_deref()
                    .unwrap()
                    .split_whitespace()
                    .map(str::to_string)
                    .collect();
                if hyp == rf {
                    exact += 1;
                }
                for s in 0..5 {
                    if s < rf.len() {
                        slot_n[s] += 1;
                        if s < hyp.len() && hyp[s] == rf[s] {
                            slot_hits[s] += 1;
                        }
                    }
                }
                pairs.push((hyp, rf));
            }
            let bleu = corpus_bleu(&pairs).unwrap();
            let accs: Vec<String> = (0..5)
                .map(|s| format!("{:.2}", slot_hits[s] as f64 / slot_n[s].max(1) as f64))
                .collect();
            println!(
                "step {:4}  nll/token {:.4}  test corpus BLEU {:6.2}  exact {}/64  slots {}",
                step + 1,
                nll / n_tok as f64,
                bleu,
                exact,
                accs.join(" ")
            );
        }
    }
}
