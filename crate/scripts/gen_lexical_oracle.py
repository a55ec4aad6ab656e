#!/usr/bin/env python3
"""Generate frozen expected values for the lexical metrics test suite.

Independent reference implementations of sentence BLEU (exponential
smoothing, effective order), corpus BLEU (no smoothing) and chrF
(character n-gram F-score, beta=2), transcribed from the published
sacreBLEU / mteval-v13a / chrF algorithm descriptions.  The output JSON
is committed as test data; the Rust implementations must agree with it
to within 1e-6.

Run from the repository root:  python3 scripts/gen_lexical_oracle.py
"""

import json
import math
import random
from collections import Counter

MAX_BLEU_ORDER = 4
CHRF_ORDER = 6
CHRF_BETA = 2.0


def ngram_counts(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_pair_stats(hyp, ref):
    """Per-order (matched, total) clipped n-gram counts for one pair."""
    stats = []
    for n in range(1, MAX_BLEU_ORDER + 1):
        hyp_counts = ngram_counts(hyp, n)
        ref_counts = ngram_counts(ref, n)
        matched = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = max(len(hyp) - n + 1, 0)
        stats.append((matched, total))
    return stats


def sentence_bleu(hyp, ref):
    """Sentence BLEU, exponential smoothing, effective order, 0..100."""
    if not ref:
        raise ValueError("empty reference")
    if not hyp:
        return 0.0
    stats = bleu_pair_stats(hyp, ref)
    inv_cnt = 1.0
    log_sum = 0.0
    eff_order = 0
    for matched, total in stats:
        if total == 0:
            break
        eff_order += 1
        if matched == 0:
            inv_cnt *= 2.0
            precision = 1.0 / (inv_cnt * total)
        else:
            precision = matched / total
        log_sum += math.log(precision)
    assert eff_order > 0
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return 100.0 * bp * math.exp(log_sum / eff_order)


def corpus_bleu(pairs):
    """Corpus BLEU over (hyp, ref) pairs, no smoothing, 0..100."""
    if not pairs:
        raise ValueError("empty corpus")
    matched = [0] * MAX_BLEU_ORDER
    total = [0] * MAX_BLEU_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in pairs:
        if not ref:
            raise ValueError("empty reference")
        hyp_len += len(hyp)
        ref_len += len(ref)
        for i, (m, t) in enumerate(bleu_pair_stats(hyp, ref)):
            matched[i] += m
            total[i] += t
    log_sum = 0.0
    for m, t in zip(matched, total):
        if m == 0 or t == 0:
            return 0.0
        log_sum += math.log(m / t)
    if hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_sum / MAX_BLEU_ORDER)


def char_ngrams(text, n):
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def chrf(hyp, ref):
    """chrF with beta=2 over character 1..6-grams, whitespace removed.

    Orders where neither side has any n-grams are skipped; one-sided
    empty counts fall back to a 1e-16 floor, matching the reference
    implementation.  Returns 0..100.
    """
    eps = 1e-16
    hyp = "".join(hyp.split())
    ref = "".join(ref.split())
    if not ref:
        raise ValueError("empty reference after whitespace removal")
    beta2 = CHRF_BETA * CHRF_BETA
    score = 0.0
    eff_order = 0
    for n in range(1, CHRF_ORDER + 1):
        hyp_counts = char_ngrams(hyp, n)
        ref_counts = char_ngrams(ref, n)
        n_hyp = sum(hyp_counts.values())
        n_ref = sum(ref_counts.values())
        if n_hyp == 0 and n_ref == 0:
            continue
        n_match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        prec = n_match / n_hyp if n_hyp > 0 else eps
        rec = n_match / n_ref if n_ref > 0 else eps
        denom = beta2 * prec + rec
        score += (1 + beta2) * prec * rec / denom if denom > 0 else 0.0
        eff_order += 1
    assert eff_order > 0
    return 100.0 * score / eff_order


def chrf_beta(hyp, ref, beta):
    """chrF with a custom beta, all orders counted (cross-check only)."""
    eps = 1e-16
    hyp = "".join(hyp.split())
    ref = "".join(ref.split())
    beta2 = beta * beta
    score = 0.0
    for n in range(1, CHRF_ORDER + 1):
        hyp_counts = char_ngrams(hyp, n)
        ref_counts = char_ngrams(ref, n)
        n_hyp = sum(hyp_counts.values())
        n_ref = sum(ref_counts.values())
        n_match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        prec = n_match / n_hyp if n_hyp > 0 else eps
        rec = n_match / n_ref if n_ref > 0 else eps
        denom = max(beta2 * prec + rec, eps)
        score += (1 + beta2) * prec * rec / denom
    return 100.0 * score / CHRF_ORDER


def self_check():
    # Identity and emptiness edge cases.
    assert sentence_bleu(list("abcd"), list("abcd")) == 100.0
    assert sentence_bleu([], ["a"]) == 0.0
    assert corpus_bleu([(list("abcde"), list("abcde"))]) == 100.0

    # Hand-derived: hyp = the the the, ref = the cat sat.
    # p1 = 1/3 clipped, p2 = smoothed 1/(2*2), p3 = smoothed 1/(4*1),
    # order 4 has no hypothesis n-grams, BP = 1.
    expect = 100.0 * math.exp(
        (math.log(1 / 3) + math.log(1 / 4) + math.log(1 / 4)) / 3
    )
    got = sentence_bleu(["the", "the", "the"], ["the", "cat", "sat"])
    assert abs(got - expect) < 1e-12, (got, expect)

    # Published chrF3 vectors (independent implementation's test data).
    v1 = chrf_beta("aoeu33", "axeu33", 3.0)
    assert abs(v1 - 37.7778) < 1e-3, v1
    long_hyp = (
        "Recent offers of evacuating residents from the Syrian regime and "
        "Russia sound like only thinly veiled threats, pediatricians, "
        "surgeons and other doctors have said."
    )
    long_ref = (
        "Recent offers of evacuation form the regime and Russia had "
        "sounded like thinly-veiled threats, said the surgeons "
        "paediatricians and other doctors."
    )
    v2 = chrf_beta(long_hyp, long_ref, 3.0)
    assert abs(v2 - 69.8328) < 1e-3, v2

    # Identical strings score 100 regardless of length.
    assert chrf("abcd", "abcd") == 100.0
    assert chrf("ab", "ab") == 100.0


def gen_cases(rng):
    vocab = [f"w{i:02d}" for i in range(50)]

    def rand_sent(lo=1, hi=30):
        return [rng.choice(vocab) for _ in range(rng.randint(lo, hi))]

    def perturb(ref):
        hyp = list(ref)
        mode = rng.random()
        if mode < 0.18:
            return hyp  # identical
        if mode < 0.40:  # substitutions
            for _ in range(rng.randint(1, max(1, len(hyp) // 3))):
                hyp[rng.randrange(len(hyp))] = rng.choice(vocab)
            return hyp
        if mode < 0.58:  # shuffle
            rng.shuffle(hyp)
            return hyp
        if mode < 0.72:  # truncate / extend
            if len(hyp) > 2 and rng.random() < 0.5:
                return hyp[: rng.randint(1, len(hyp) - 1)]
            return hyp + rand_sent(1, 6)
        if mode < 0.86:  # unrelated, similar length
            return rand_sent(max(1, len(ref) - 3), len(ref) + 3)
        return rand_sent()  # unrelated, any length

    sentence_cases = []
    for _ in range(230):
        ref = rand_sent()
        hyp = perturb(ref)
        sentence_cases.append(
            {"hyp": hyp, "ref": ref, "bleu": sentence_bleu(hyp, ref)}
        )

    corpus_cases = []
    for _ in range(40):
        pairs = []
        for _ in range(rng.randint(2, 10)):
            ref = rand_sent(4, 24)
            pairs.append([perturb(ref), ref])
        corpus_cases.append(
            {
                "pairs": pairs,
                "bleu": corpus_bleu([(h, r) for h, r in pairs]),
            }
        )

    alphabet = "abcdefghijklmnopqr stuvwxyz"
    chrf_cases = []
    for _ in range(230):
        ref = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40)))
        if not ref.strip():
            ref = "ab"
        if rng.random() < 0.5:
            hyp = list(ref)
            for _ in range(rng.randint(0, max(1, len(hyp) // 2))):
                hyp[rng.randrange(len(hyp))] = rng.choice(alphabet)
            hyp = "".join(hyp)
        else:
            hyp = "".join(
                rng.choice(alphabet) for _ in range(rng.randint(0, 40))
            )
        chrf_cases.append({"hyp": hyp, "ref": ref, "chrf": chrf(hyp, ref)})

    return sentence_cases, corpus_cases, chrf_cases


def main():
    self_check()
    rng = random.Random(20260815)
    sentence_cases, corpus_cases, chrf_cases = gen_cases(rng)

    # Pinned single cases exercised directly by unit tests.
    the_case = sentence_bleu(["the", "the", "the"], ["the", "cat", "sat"])
    abcd_case = chrf("abcd", "abce")
    five_pair = [
        (["w01", "w02", "w03", "w04", "w05"], ["w01", "w02", "w03", "w04", "w05"]),
        (["w01", "w02", "w03", "w09"], ["w01", "w02", "w03", "w04"]),
        (["w10", "w11", "w12", "w13", "w14", "w15"], ["w10", "w11", "w12", "w13", "w14"]),
        (["w20", "w21", "w22", "w23"], ["w20", "w21", "w23", "w22"]),
        (["w30", "w31", "w32", "w33", "w34"], ["w30", "w31", "w32", "w33", "w34", "w35"]),
    ]
    out = {
        "pinned": {
            "sentence_the_the_the": the_case,
            "chrf_abcd_abce": abcd_case,
            "corpus_five_pairs": {
                "pairs": [[h, r] for h, r in five_pair],
                "bleu": corpus_bleu(five_pair),
            },
        },
        "sentence": sentence_cases,
        "corpus": corpus_cases,
        "chrf": chrf_cases,
    }
    path = "crates/core/tests/data/lexical_oracle.json"
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")
    print(f"wrote {path}")
    print(f"  sentence_the_the_the = {the_case!r}")
    print(f"  chrf_abcd_abce       = {abcd_case!r}")
    print(f"  corpus_five_pairs    = {out['pinned']['corpus_five_pairs']['bleu']!r}")


if __name__ == "__main__":
    main()
