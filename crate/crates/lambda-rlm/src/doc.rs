//! Token-sequence documents with cheap contiguous slicing.
//!
//! A [`Document`] is an immutable sequence of whitespace-delimited tokens.
//! Its length measure is the token count; everything downstream (splitting,
//! windows, cost accounting) depends only on that measure being additive
//! under `split`/`concat`, so a character count or an external tokenizer
//! could replace it behind the same interface.
//!
//! Slices share the underlying token buffer, so `split` and `peek` are O(1)
//! in the number of tokens and safe to hand out across threads.

use std::fmt;
use std::sync::Arc;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DocError {
    #[error("invalid split: k must be at least 1")]
    InvalidSplit,
    #[error("peek out of bounds: [{start}, {end}) on document of length {len}")]
    OutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
}

#[derive(Clone)]
struct Segment {
    buf: Arc<Vec<String>>,
    start: usize,
    end: usize,
}

impl Segment {
    fn len(&self) -> usize {
        self.end - self.start
    }

    fn tokens(&self) -> &[String] {
        &self.buf[self.start..self.end]
    }
}

/// An immutable token sequence. Cloning and slicing are cheap; the token
/// storage is shared.
#[derive(Clone)]
pub struct Document {
    segments: Vec<Segment>,
    len: usize,
}

impl Document {
    pub fn empty() -> Self {
        Document {
            segments: Vec::new(),
            len: 0,
        }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let len = tokens.len();
        if len == 0 {
            return Document::empty();
        }
        Document {
            segments: vec![Segment {
                buf: Arc::new(tokens),
                start: 0,
                end: len,
            }],
            len,
        }
    }

    /// Splits `text` on whitespace; each unit becomes one token.
    pub fn from_text(text: &str) -> Self {
        Document::from_tokens(text.split_whitespace().map(str::to_owned).collect())
    }

    /// Token count: the document's length measure.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.segments
            .iter()
            .flat_map(|s| s.tokens().iter().map(String::as_str))
    }

    pub fn token(&self, idx: usize) -> Option<&str> {
        let mut offset = idx;
        for seg in &self.segments {
            if offset < seg.len() {
                return Some(&seg.tokens()[offset]);
            }
            offset -= seg.len();
        }
        None
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }

    /// Extracts tokens `[start, end)` without copying token storage.
    pub fn peek(&self, start: usize, end: usize) -> Result<Document, DocError> {
        if start > end || end > self.len {
            return Err(DocError::OutOfBounds {
                start,
                end,
                len: self.len,
            });
        }
        if start == end {
            return Ok(Document::empty());
        }
        let mut segments = Vec::new();
        let mut remaining_skip = start;
        let mut remaining_take = end - start;
        for seg in &self.segments {
            if remaining_take == 0 {
                break;
            }
            let seg_len = seg.len();
            if remaining_skip >= seg_len {
                remaining_skip -= seg_len;
                continue;
            }
            let s = seg.start + remaining_skip;
            let take = (seg_len - remaining_skip).min(remaining_take);
            segments.push(Segment {
                buf: Arc::clone(&seg.buf),
                start: s,
                end: s + take,
            });
            remaining_take -= take;
            remaining_skip = 0;
        }
        Ok(Document {
            segments,
            len: end - start,
        })
    }

    /// Partitions into exactly `k` contiguous chunks. The leading chunks take
    /// `ceil(n/k)` tokens each; the last non-empty chunk holds whatever
    /// remains (never more). Trailing chunks are empty only when the
    /// ceiling-sized leading chunks already exhaust the document (always the
    /// case when `k > n`).
    pub fn split(&self, k: usize) -> Result<Vec<Document>, DocError> {
        let sizes = split_sizes(self.len, k)?;
        let mut chunks = Vec::with_capacity(k);
        let mut offset = 0;
        for size in sizes {
            chunks.push(self.peek(offset, offset + size).expect("sizes sum to len"));
            offset += size;
        }
        Ok(chunks)
    }

    /// Joins documents in order, sharing their token storage.
    pub fn concat(parts: &[Document]) -> Document {
        let mut segments = Vec::new();
        let mut len = 0;
        for part in parts {
            for seg in &part.segments {
                if seg.len() > 0 {
                    segments.push(seg.clone());
                    len += seg.len();
                }
            }
        }
        Document { segments, len }
    }
}

/// Chunk sizes produced by [`Document::split`] for a document of `n` tokens.
pub fn split_sizes(n: usize, k: usize) -> Result<Vec<usize>, DocError> {
    if k == 0 {
        return Err(DocError::InvalidSplit);
    }
    let chunk = n.div_ceil(k);
    let mut sizes = Vec::with_capacity(k);
    let mut remaining = n;
    for _ in 0..k {
        let take = chunk.min(remaining);
        sizes.push(take);
        remaining -= take;
    }
    Ok(sizes)
}

impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.tokens().eq(other.tokens())
    }
}

impl Eq for Document {}

impl fmt::Debug for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 12 {
            write!(f, "Document({:?})", self.to_text())
        } else {
            let head: Vec<&str> = self.tokens().take(8).collect();
            write!(
                f,
                "Document({} tokens, {:?} ...)",
                self.len,
                head.join(" ")
            )
        }
    }
}

impl Serialize for Document {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Document {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Ok(Document::from_text(&text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(n: usize) -> Document {
        Document::from_tokens((0..n).map(|i| format!("t{i}")).collect())
    }

    #[test]
    fn split_even_division() {
        let chunks = doc(10).split(5).unwrap();
        assert_eq!(chunks.len(), 5);
        assert!(chunks.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn split_appendix_sizes() {
        let chunks = doc(131_000).split(5).unwrap();
        let sizes: Vec<usize> = chunks.iter().map(Document::len).collect();
        assert_eq!(sizes, vec![26_200; 5]);
    }

    #[test]
    fn split_ceiling_remainder() {
        let chunks = doc(7).split(3).unwrap();
        let sizes: Vec<usize> = chunks.iter().map(Document::len).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
    }

    #[test]
    fn split_empty_trailing_only_when_k_exceeds_n() {
        let chunks = doc(3).split(5).unwrap();
        let sizes: Vec<usize> = chunks.iter().map(Document::len).collect();
        assert_eq!(sizes, vec![1, 1, 1, 0, 0]);
        let chunks = doc(9).split(3).unwrap();
        assert!(chunks.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn split_zero_is_error() {
        assert_eq!(doc(4).split(0).unwrap_err(), DocError::InvalidSplit);
    }

    #[test]
    fn concat_inverts_split() {
        let d = doc(103);
        for k in [1, 2, 3, 7, 50, 103, 200] {
            let rejoined = Document::concat(&d.split(k).unwrap());
            assert_eq!(rejoined, d, "split by {k} then concat");
        }
    }

    #[test]
    fn peek_bounds() {
        let d = doc(10);
        assert_eq!(d.peek(0, 0).unwrap().len(), 0);
        assert_eq!(d.peek(0, 10).unwrap(), d);
        assert!(matches!(
            d.peek(4, 11),
            Err(DocError::OutOfBounds { .. })
        ));
        assert!(d.peek(6, 5).is_err());
    }

    #[test]
    fn peek_composes() {
        let d = doc(40);
        let (a, b) = (5, 31);
        for c in 0..=(b - a) {
            let lhs = d.peek(a, b).unwrap().peek(0, c).unwrap();
            let rhs = d.peek(a, a + c).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn peek_across_concat_segments() {
        let parts = doc(20).split(3).unwrap();
        let joined = Document::concat(&parts);
        assert_eq!(joined.peek(5, 15).unwrap(), doc(20).peek(5, 15).unwrap());
        assert_eq!(joined.token(7), Some("t7"));
        assert_eq!(joined.token(20), None);
    }

    #[test]
    fn text_round_trip() {
        let d = Document::from_text("alpha beta\tgamma\n delta");
        assert_eq!(d.len(), 4);
        assert_eq!(Document::from_text(&d.to_text()), d);
    }
}
