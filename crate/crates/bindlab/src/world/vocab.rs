//! The fixed synthetic vocabulary.
//!
//! The token inventory is a constant of the artifact, independent of any
//! seed: special tokens, the function words the sentence templates need, and
//! two disjoint pools of pronounceable pseudo-words for identity and item
//! names. Option letters are dedicated single tokens so option
//! log-probabilities are single-token reads at the answer position.

use std::collections::HashMap;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

/// Padding token (excluded from training loss).
pub const PAD: u32 = 0;
/// End-of-sequence token; greedy generation stops on it.
pub const EOS: u32 = 1;
/// Option letter (a).
pub const OPT_A: u32 = 2;
/// Option letter (b).
pub const OPT_B: u32 = 3;
/// Option letter (c).
pub const OPT_C: u32 = 4;
/// The three option-letter ids in slot order.
pub const OPTION_IDS: [u32; 3] = [OPT_A, OPT_B, OPT_C];

const SPECIALS: [&str; 5] = ["<pad>", "<eos>", "<optA>", "<optB>", "<optC>"];

const FUNCTION_WORDS: [&str; 36] = [
    "event", "seeks", "speaker", "on", "fair", "wants", "teacher", "for", "city", "plans",
    "show", "about", "who", "should", "choose", "which", "identity", "is", "linked", "with",
    "tradition", "of", "belongs", "to", "folk", "keep", "people", "the", "either", "neither",
    "answer", ".", "?", "craft", "rite", "fest",
];

/// Item-kind suffix words (subset of the function words).
pub const ITEM_KINDS: [&str; 3] = ["craft", "rite", "fest"];

const IDENTITY_POOL_SIZE: usize = 110;
const ITEM_POOL_SIZE: usize = 140;

/// Token inventory with bidirectional lookup.
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    identity_pool: Vec<u32>,
    item_pool: Vec<u32>,
}

fn pseudo_words(onsets: &[&str], vowels: &[&str], n: usize, taken: &[&str]) -> Vec<String> {
    // full CVCV product, walked with a stride coprime to its size so
    // neighboring pool entries do not rhyme; words colliding with existing
    // tokens are skipped
    let mut all = Vec::with_capacity(onsets.len() * vowels.len() * onsets.len() * vowels.len());
    for o1 in onsets {
        for v1 in vowels {
            for o2 in onsets {
                for v2 in vowels {
                    all.push(format!("{o1}{v1}{o2}{v2}"));
                }
            }
        }
    }
    const STRIDE: usize = 641; // prime, coprime to the 2500-word product
    assert!(n < all.len(), "pool request exceeds the word product");
    let mut words = Vec::with_capacity(n);
    let mut idx = 7usize;
    while words.len() < n {
        let w = &all[idx % all.len()];
        if !taken.contains(&w.as_str()) {
            words.push(w.clone());
        }
        idx += STRIDE;
    }
    words
}

impl Vocab {
    fn build() -> Vocab {
        let mut tokens: Vec<String> = Vec::new();
        tokens.extend(SPECIALS.iter().map(|s| s.to_string()));
        tokens.extend(FUNCTION_WORDS.iter().map(|s| s.to_string()));

        let taken: Vec<&str> = SPECIALS.iter().chain(FUNCTION_WORDS.iter()).copied().collect();
        let identity_names = pseudo_words(
            &["k", "v", "z", "m", "t", "r", "n", "s", "l", "d"],
            &["a", "e", "i", "o", "u"],
            IDENTITY_POOL_SIZE,
            &taken,
        );
        let item_names = pseudo_words(
            &["b", "g", "h", "p", "f", "w", "j", "ch", "sh", "th"],
            &["a", "e", "i", "o", "u"],
            ITEM_POOL_SIZE,
            &taken,
        );

        let identity_pool: Vec<u32> = identity_names
            .iter()
            .map(|w| {
                tokens.push(w.clone());
                (tokens.len() - 1) as u32
            })
            .collect();
        let item_pool: Vec<u32> = item_names
            .iter()
            .map(|w| {
                tokens.push(w.clone());
                (tokens.len() - 1) as u32
            })
            .collect();

        let index: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        assert_eq!(index.len(), tokens.len(), "vocabulary has duplicate tokens");

        Vocab { tokens, index, identity_pool, item_pool }
    }

    /// The process-wide vocabulary.
    pub fn shared() -> &'static Vocab {
        static VOCAB: OnceLock<Vocab> = OnceLock::new();
        VOCAB.get_or_init(Vocab::build)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of a known token; panics on unknown words (internal use only).
    pub fn id(&self, token: &str) -> u32 {
        *self
            .index
            .get(token)
            .unwrap_or_else(|| panic!("token not in vocabulary: {token:?}"))
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Name tokens reserved for identity surfaces.
    pub fn identity_pool(&self) -> &[u32] {
        &self.identity_pool
    }

    /// Name tokens reserved for item surfaces.
    pub fn item_pool(&self) -> &[u32] {
        &self.item_pool
    }

    /// Digest of the token inventory; stored in benchmark headers so files
    /// generated against a different inventory are rejected at load.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hex_string(&hasher.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_have_fixed_ids() {
        let v = Vocab::shared();
        assert_eq!(v.id("<pad>"), PAD);
        assert_eq!(v.id("<eos>"), EOS);
        assert_eq!(v.id("<optA>"), OPT_A);
        assert_eq!(v.id("<optB>"), OPT_B);
        assert_eq!(v.id("<optC>"), OPT_C);
    }

    #[test]
    fn size_is_stable_and_near_three_hundred() {
        let v = Vocab::shared();
        assert_eq!(v.len(), 5 + 36 + 110 + 140);
        assert!((250..=350).contains(&v.len()));
    }

    #[test]
    fn pools_are_disjoint_from_everything() {
        let v = Vocab::shared();
        for &id in v.identity_pool() {
            assert!(v.item_pool().iter().all(|&o| o != id));
        }
        // round trip
        for id in 0..v.len() as u32 {
            assert_eq!(v.id(v.token(id)), id);
        }
    }

    #[test]
    fn hash_is_deterministic() {
        assert_eq!(Vocab::shared().hash(), Vocab::shared().hash());
        assert_eq!(Vocab::shared().hash().len(), 64);
    }
}
