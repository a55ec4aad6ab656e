use mtrl_core::corpus::{generate_corpus, LanguageSpec};
use mtrl_core::grpo::encode_prompt;
use mtrl_core::policy::{checkpoint, GruPolicy};
use mtrl_core::protocol::{parse_response, ThinkMode};
use std::collections::HashSet;

fn main() {
    let path = std::env::args().nth(1).expect("usage: probe_ckpt <ckpt> [d]");
    let spec = LanguageSpec::default();
    let vocab = spec.vocabulary().unwrap();
    let lexicon = spec.lexicon().unwrap();
    let corpus = generate_corpus(&spec, 512, 128, 0).unwrap();
    let ck = checkpoint::load(std::path::Path::new(&path)).unwrap();
    let policy = GruPolicy::new(vocab.clone(), ck.params);

    let first_syn: HashSet<String> = (0..lexicon.n_concepts())
        .map(|c| lexicon.reference_token(c).to_string())
        .collect();
    let mut own_hits = 0usize;
    let mut swap_hits = 0usize;
    let mut n_words = 0usize;
    let mut n_tgt = 0usize;
    let mut n_first = 0usize;
    for (i, inst) in corpus.test.iter().enumerate() {
        let prompt = encode_prompt(&vocab, inst);
        let out = policy.greedy_response(&prompt, 64, 1.0).unwrap();
        let text = vocab.decode(&out.tokens);
        let parsed = parse_response(&text, ThinkMode::Required);
        let hyp: Vec<&str> = parsed.translate_text.split_whitespace().collect();
        let own: HashSet<&str> = inst.ref_text.as_deref().unwrap().split_whitespace().collect();
        let other = corpus.test[(i + 7) % corpus.test.len()].ref_text.clone().unwrap();
        let swap: HashSet<&str> = other.split_whitespace().collect();
        for w in &hyp {
            n_words += 1;
            if lexicon.target_concept(w).is_some() { n_tgt += 1; }
            if first_syn.contains(*w) { n_first += 1; }
            if own.contains(w) { own_hits += 1; }
            if swap.contains(w) { swap_hits += 1; }
        }
        if i < 6 {
            println!("src: {}", inst.src_text);
            println!("ref: {}", inst.ref_text.as_deref().unwrap());
            println!("hyp: {} (valid {})\n", parsed.translate_text, parsed.format_ok);
        }
    }
    println!(
        "words {n_words}  target-range {:.2}  first-syn {:.2}  own-ref recall/word {:.3}  swapped-ref {:.3}",
        n_tgt as f64 / n_words as f64,
        n_first as f64 / n_words as f64,
        own_hits as f64 / n_words as f64,
        swap_hits as f64 / n_words as f64
    );
}
