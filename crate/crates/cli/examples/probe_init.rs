use mtrl_core::corpus::LanguageSpec;
use mtrl_core::policy::{GruPolicy, PolicyParams};
use mtrl_core::grpo::encode_prompt;
use mtrl_core::protocol::{parse_response, ThinkMode};
use mtrl_core::corpus::generate_corpus;

fn main() {
    let spec = LanguageSpec::default();
    let vocab = spec.vocabulary().unwrap();
    let corpus = generate_corpus(&spec, 8, 2, 0).unwrap();
    for d in [24usize, 48] {
        let params = PolicyParams::init(d, &vocab, 0, 8.0);
        let policy = GruPolicy::new(vocab.clone(), params);
        println!("=== d={d} ===");
        let mut n_valid = 0;
        for (i, inst) in corpus.train.iter().enumerate() {
            let prompt = encode_prompt(&vocab, inst);
            let mut rng = mtrl_core::policy::rollout_rng(0, 0, i as u64, 0, 0);
            let out = policy.sample_response(&prompt, 64, 1.0, &mut rng).unwrap();
            let text = vocab.decode(&out.tokens);
            let parsed = parse_response(&text, ThinkMode::Required);
            if parsed.format_ok { n_valid += 1; }
            if i < 4 {
                println!("[{}] len {} valid {} :: {}", i, out.tokens.len(), parsed.format_ok,
                    if text.len() > 120 { &text[..120] } else { &text });
            }
        }
        println!("valid {}/8", n_valid);
    }
}
