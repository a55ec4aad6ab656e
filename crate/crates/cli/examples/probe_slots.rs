use mtrl_core::corpus::{generate_corpus, LanguageSpec, ReorderRule};
use mtrl_core::grpo::encode_prompt;
use mtrl_core::policy::{checkpoint, GruPolicy};
use mtrl_core::protocol::{parse_response, ThinkMode};

fn main() {
    let path = std::env::args().nth(1).expect("usage: probe_slots <ckpt> [reverse]");
    let reorder = match std::env::args().nth(2).as_deref() {
        Some("reverse") => ReorderRule::Reverse,
        _ => ReorderRule::Identity,
    };
    let spec = LanguageSpec { reorder, ..LanguageSpec::default() };
    let vocab = spec.vocabulary().unwrap();
    let corpus = generate_corpus(&spec, 512, 128, 0).unwrap();
    let ck = checkpoint::load(std::path::Path::new(&path)).unwrap();
    let policy = GruPolicy::new(vocab.clone(), ck.params);

    let mut slot_hits = [0usize; 6];
    let mut slot_n = [0usize; 6];
    let mut own = 0usize;
    let mut swap = 0usize;
    let mut n = 0usize;
    for (i, inst) in corpus.test.iter().enumerate() {
        let prompt = encode_prompt(&vocab, inst);
        let out = policy.greedy_response(&prompt, 64, 1.0).unwrap();
        let text = vocab.decode(&out.tokens);
        let parsed = parse_response(&text, ThinkMode::Required);
        let hyp: Vec<&str> = parsed.translate_text.split_whitespace().collect();
        let rf: Vec<&str> = inst.ref_text.as_deref().unwrap().split_whitespace().collect();
        for s in 0..6 {
            if s < rf.len() {
                slot_n[s] += 1;
                if s < hyp.len() && hyp[s] == rf[s] {
                    slot_hits[s] += 1;
                }
            }
        }
        let other = corpus.test[(i + 7) % corpus.test.len()].ref_text.clone().unwrap();
        let sw: Vec<&str> = other.split_whitespace().collect();
        for w in &hyp {
            n += 1;
            if rf.contains(w) { own += 1; }
            if sw.contains(w) { swap += 1; }
        }
    }
    for s in 0..6 {
        println!("slot {s}: acc {:.3} ({}/{})", slot_hits[s] as f64 / slot_n[s] as f64, slot_hits[s], slot_n[s]);
    }
    println!("own-recall/word {:.3}  swapped {:.3}", own as f64 / n as f64, swap as f64 / n as f64);
}
