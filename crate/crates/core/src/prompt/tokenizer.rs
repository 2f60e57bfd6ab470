//! Offline token counting.
//!
//! `bpe-v1` is a byte-level BPE whose merge table ships in
//! `data/bpe-v1.merges`. The file starts with a `#factsel-bpe v1` header,
//! followed by one merge per line as two token ids `a b`. Ids 0..=255 are raw
//! bytes; merge `i` (0-based) produces id `256 + i`, and earlier merges bind
//! tighter. Text is pre-split into chunks (word runs with one leading
//! space, whitespace runs, punctuation runs) and merges never cross chunks.
//!
//! `chars` counts Unicode scalar values.

use std::collections::HashMap;
use std::sync::OnceLock;

pub const DEFAULT_TOKENIZER: &str = "bpe-v1";
pub const TOKENIZER_IDS: &[&str] = &["bpe-v1", "chars"];
pub const MERGES_HEADER: &str = "#factsel-bpe v1";

static BPE_V1_DATA: &str = include_str!("../../data/bpe-v1.merges");

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TokenizerError {
    #[error("unknown tokenizer {id:?}; available: {}", TOKENIZER_IDS.join(", "))]
    Unknown { id: String },
    #[error("merges file line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone)]
pub struct Bpe {
    ranks: HashMap<(u32, u32), u32>,
}

impl Bpe {
    pub fn parse(text: &str) -> Result<Bpe, TokenizerError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == MERGES_HEADER => {}
            _ => {
                return Err(TokenizerError::Format {
                    line: 1,
                    message: format!("expected header {MERGES_HEADER:?}"),
                })
            }
        }
        let mut ranks = HashMap::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| TokenizerError::Format { line: i + 1, message };
            let mut parts = line.split_ascii_whitespace().map(str::parse::<u32>);
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => (a, b),
                _ => return Err(bad(format!("expected two ids, got {line:?}"))),
            };
            let next = 256 + ranks.len() as u32;
            if a >= next || b >= next {
                return Err(bad(format!("id refers to a later merge ({a} {b})")));
            }
            if ranks.insert((a, b), ranks.len() as u32).is_some() {
                return Err(bad(format!("duplicate merge {a} {b}")));
            }
        }
        Ok(Bpe { ranks })
    }

    pub fn merge_count(&self) -> usize {
        self.ranks.len()
    }

    /// Token ids for one chunk.
    pub fn encode_chunk(&self, chunk: &[u8]) -> Vec<u32> {
        let mut ids: Vec<u32> = chunk.iter().map(|b| *b as u32).collect();
        loop {
            let best = ids
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0], w[1])).map(|r| (*r, i)))
                .min();
            let Some((rank, i)) = best else { break };
            let pair = (ids[i], ids[i + 1]);
            merge_pair(&mut ids, pair, 256 + rank);
        }
        ids
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        pre_split(text)
            .into_iter()
            .flat_map(|c| self.encode_chunk(c.as_bytes()))
            .collect()
    }

    pub fn count(&self, text: &str) -> usize {
        pre_split(text).into_iter().map(|c| self.encode_chunk(c.as_bytes()).len()).sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Word,
    Space,
    Newline,
    Punct,
}

fn class_of(c: char) -> Class {
    if c.is_alphanumeric() || c == '_' {
        Class::Word
    } else if c == '\n' || c == '\r' {
        Class::Newline
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Punct
    }
}

/// Split text into merge chunks. A single space directly before a word is
/// kept with the word.
pub fn pre_split(text: &str) -> Vec<&str> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut prev: Option<Class> = None;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (idx, &(pos, c)) in chars.iter().enumerate() {
        let class = class_of(c);
        if let Some(p) = prev {
            if p != class && pos > start {
                // hand a trailing single space over to the following word
                let space_before_word = p == Class::Space && class == Class::Word && chars[idx - 1].1 == ' ';
                if space_before_word {
                    let cut = pos - 1;
                    if cut > start {
                        chunks.push(&text[start..cut]);
                    }
                    start = cut;
                } else {
                    chunks.push(&text[start..pos]);
                    start = pos;
                }
            }
        }
        prev = Some(class);
    }
    if start < text.len() {
        chunks.push(&text[start..]);
    }
    chunks
}

/// Merges for runs of 2 and 4 of every printable ASCII byte, in byte order.
/// Used as the head of the bundled table so separator lines and other
/// repeated characters compress even when a corpus rarely repeats them.
pub fn run_merges() -> Vec<(u32, u32)> {
    let printable: Vec<u32> = (0x21u32..0x7f).collect();
    let mut out: Vec<(u32, u32)> = printable.iter().map(|b| (*b, *b)).collect();
    let doubled = 256;
    out.extend((0..printable.len() as u32).map(|i| (doubled + i, doubled + i)));
    out
}

/// Train a merge table on `texts`, starting from the fixed merges in
/// `seed`: repeatedly merge the most frequent adjacent pair (ties broken by
/// the smaller pair) until the table holds `merges` entries or no pair
/// occurs twice.
pub fn train_bpe<'a>(texts: impl IntoIterator<Item = &'a str>, seed: &[(u32, u32)], merges: usize) -> Vec<(u32, u32)> {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for t in texts {
        for c in pre_split(t) {
            *freq.entry(c).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<u32>, u64)> = freq
        .into_iter()
        .filter(|(c, _)| c.len() > 1)
        .map(|(c, n)| (c.bytes().map(u32::from).collect(), n))
        .collect();
    words.sort();
    let mut out = Vec::new();
    for pair in seed {
        let new_id = 256 + out.len() as u32;
        for (w, _) in words.iter_mut() {
            merge_pair(w, *pair, new_id);
        }
        out.push(*pair);
    }
    words.retain(|(w, _)| w.len() > 1);
    while out.len() < merges {
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (w, n) in &words {
            for p in w.windows(2) {
                *counts.entry((p[0], p[1])).or_default() += n;
            }
        }
        let Some((pair, count)) = counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))) else {
            break;
        };
        if count < 2 {
            break;
        }
        let new_id = 256 + out.len() as u32;
        for (w, _) in words.iter_mut() {
            merge_pair(w, pair, new_id);
        }
        words.retain(|(w, _)| w.len() > 1);
        out.push(pair);
    }
    out
}

fn merge_pair(ids: &mut Vec<u32>, pair: (u32, u32), new_id: u32) {
    if ids.len() < 2 {
        return;
    }
    let mut merged = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && (ids[i], ids[i + 1]) == pair {
            merged.push(new_id);
            i += 2;
        } else {
            merged.push(ids[i]);
            i += 1;
        }
    }
    *ids = merged;
}

pub fn format_merges(merges: &[(u32, u32)]) -> String {
    let mut text = String::from(MERGES_HEADER);
    text.push('\n');
    for (a, b) in merges {
        text.push_str(&format!("{a} {b}\n"));
    }
    text
}

pub fn bundled_bpe() -> &'static Bpe {
    static BPE: OnceLock<Bpe> = OnceLock::new();
    BPE.get_or_init(|| Bpe::parse(BPE_V1_DATA).expect("bundled merges file is valid"))
}

pub fn token_count(text: &str, tokenizer_id: &str) -> Result<usize, TokenizerError> {
    match tokenizer_id {
        "bpe-v1" => Ok(bundled_bpe().count(text)),
        "chars" => Ok(text.chars().count()),
        other => Err(TokenizerError::Unknown { id: other.to_string() }),
    }
}
