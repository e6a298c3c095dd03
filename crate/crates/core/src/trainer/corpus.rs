//! Seeded byte-level text for desk-scale runs: an invented lexicon strung
//! together by a sparse word-bigram process, documents separated by EOS.

use crate::numeric::Rng;

use super::TokenStream;

/// 256 byte values plus end-of-document.
pub const BYTE_VOCAB: usize = 257;
pub const EOS: u32 = 256;

const ONSETS: [&str; 16] = [
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "st",
];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ou"];
const CODAS: [&str; 6] = ["", "", "n", "r", "s", "l"];

const LEXICON: usize = 400;
const SUCCESSORS: usize = 6;

/// Byte ids of `text`, with no EOS appended.
pub fn byte_tokens(text: &str) -> Vec<u32> {
    text.bytes().map(u32::from).collect()
}

/// Exactly `n_tokens` ids over [`BYTE_VOCAB`], a pure function of `seed`.
pub fn synthetic_corpus(n_tokens: usize, seed: u64) -> TokenStream {
    let mut rng = Rng::new(seed);
    let words: Vec<String> = (0..LEXICON)
        .map(|_| {
            let syllables = 1 + rng.below(3);
            (0..syllables)
                .map(|_| {
                    format!(
                        "{}{}{}",
                        ONSETS[rng.below(ONSETS.len())],
                        NUCLEI[rng.below(NUCLEI.len())],
                        CODAS[rng.below(CODAS.len())]
                    )
                })
                .collect()
        })
        .collect();
    // Each word prefers a handful of successors, the first most strongly.
    let next: Vec<[usize; SUCCESSORS]> = (0..LEXICON)
        .map(|_| std::array::from_fn(|_| rng.below(LEXICON)))
        .collect();

    let mut out = Vec::with_capacity(n_tokens + 64);
    while out.len() < n_tokens {
        for _ in 0..3 + rng.below(6) {
            let mut w = rng.below(LEXICON);
            for i in 0..4 + rng.below(9) {
                if i > 0 {
                    out.push(b' ' as u32);
                }
                out.extend(words[w].bytes().map(u32::from));
                w = if rng.uniform() < 0.9 {
                    // geometric preference over the successor list
                    let mut k = 0;
                    while k + 1 < SUCCESSORS && rng.uniform() < 0.4 {
                        k += 1;
                    }
                    next[w][k]
                } else {
                    rng.below(LEXICON)
                };
            }
            out.extend(byte_tokens(". "));
        }
        out.push(EOS);
    }
    out.truncate(n_tokens);
    TokenStream::from_tokens(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let a = synthetic_corpus(10_000, 3);
        assert_eq!(a.len(), 10_000);
        assert_eq!(a, synthetic_corpus(10_000, 3));
        assert_ne!(a, synthetic_corpus(10_000, 4));
        assert!(a.check_vocab(BYTE_VOCAB).is_ok());
        assert!(a.tokens().contains(&EOS));
    }

    #[test]
    fn looks_like_text() {
        let s = synthetic_corpus(2000, 0);
        let text: String = s
            .tokens()
            .iter()
            .filter(|&&t| t != EOS)
            .map(|&t| t as u8 as char)
            .collect();
        assert!(text.contains(". "));
        assert!(text
            .chars()
            .all(|c| c.is_ascii_lowercase() || c == ' ' || c == '.'));
    }
}
