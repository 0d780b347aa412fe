//! Gym tokenization.
//!
//! Chemical strings are wrapped in format tags (`<smiles>CCO</smiles>`) and
//! the content between the tags is split into one token per chemical
//! symbol by greedy longest match over that format's inventory. Everything
//! else goes through the text inventory, with byte tokens for characters it
//! does not cover, so `detokenize` always reproduces the input exactly.
//!
//! Conversations use ChatML markers. Tagged content in assistant turns is
//! always isolated; in any other turn (and in text outside a turn) only when
//! `isolate_inputs` is set, otherwise it is read as plain text.

mod augment;
pub mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::Format;

pub use augment::{augment_entity, augment_record, augment_record_with, AugmentError, AugmentationPolicy, NameProvider};
pub use vocab::{Token, TokenKind, VocabError, Vocabulary, IM_END, IM_START};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("unbalanced tag {tag} at byte {position}")]
    UnbalancedTag { tag: String, position: usize },
    #[error("unknown {format} symbol starting {found:?} at byte {position}")]
    UnknownChemicalSymbol { format: Format, found: String, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetokenizeError {
    #[error("unknown token id {id} at index {index}")]
    UnknownId { id: u32, index: usize },
    #[error("byte tokens do not form valid UTF-8")]
    InvalidUtf8,
}

/// A tagged chemical span: token indices `start..end`, tags included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChemSpan {
    pub format: Format,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub spans: Vec<ChemSpan>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Display names of the tokens.
    pub fn names<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.ids.iter().map(|&id| vocab.name(id).unwrap_or("<unk>")).collect()
    }
}

/// Matches a format tag at the start of `s`, as (format, is_close, length).
fn tag_at(s: &str) -> Option<(Format, bool, usize)> {
    let close = s.starts_with("</");
    let body = if close { &s[2..] } else { s.strip_prefix('<')? };
    Format::ALL.into_iter().find_map(|f| {
        let name = f.name();
        (body.starts_with(name) && body[name.len()..].starts_with('>'))
            .then(|| (f, close, name.len() + if close { 3 } else { 2 }))
    })
}

fn find_tag(s: &str) -> Option<usize> {
    s.match_indices('<').map(|(i, _)| i).find(|&i| tag_at(&s[i..]).is_some())
}

struct Writer<'v> {
    vocab: &'v Vocabulary,
    seq: TokenSequence,
}

impl Writer<'_> {
    fn text(&mut self, s: &str) {
        let mut rest = s;
        while !rest.is_empty() {
            if let Some((id, n)) = self.vocab.text.longest(rest) {
                self.seq.ids.push(id);
                rest = &rest[n..];
                continue;
            }
            let c = rest.chars().next().expect("non-empty");
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                self.seq.ids.push(self.vocab.byte_id(b));
            }
            rest = &rest[c.len_utf8()..];
        }
    }

    /// Content of one tagged span; `offset` is its byte position in the
    /// source, for error reporting.
    fn chem(&mut self, format: Format, content: &str, offset: usize) -> Result<(), TokenizeError> {
        match format {
            Format::Iupac => {
                self.text(content);
                Ok(())
            }
            Format::Protein => {
                // Residue and atom-name markers are chemical tokens; the
                // coordinates between them are text.
                let table = &self.vocab.chem[&format];
                let (mut i, mut run) = (0, 0);
                while i < content.len() {
                    let hit = (content.as_bytes()[i] == b'<').then(|| table.longest(&content[i..])).flatten();
                    match hit {
                        Some((id, n)) => {
                            self.text(&content[run..i]);
                            self.seq.ids.push(id);
                            i += n;
                            run = i;
                        }
                        None => i += 1,
                    }
                }
                self.text(&content[run..]);
                Ok(())
            }
            _ => {
                let table = &self.vocab.chem[&format];
                let mut i = 0;
                while i < content.len() {
                    let (id, n) = table.longest(&content[i..]).ok_or_else(|| TokenizeError::UnknownChemicalSymbol {
                        format,
                        found: content[i..].chars().take(8).collect(),
                        position: offset + i,
                    })?;
                    self.seq.ids.push(id);
                    i += n;
                }
                Ok(())
            }
        }
    }
}

/// Tokenizes `text`. See the module docs for the isolation rule.
pub fn tokenize(text: &str, vocab: &Vocabulary, isolate_inputs: bool) -> Result<TokenSequence, TokenizeError> {
    let mut w = Writer {
        vocab,
        seq: TokenSequence::default(),
    };
    let mut model_turn = false;
    let (mut pos, mut run) = (0, 0);
    while pos < text.len() {
        // '<' is ASCII, so slicing at it is always on a char boundary.
        if text.as_bytes()[pos] != b'<' {
            pos += 1;
            continue;
        }
        let rest = &text[pos..];
        if let Some(marker) = [IM_START, IM_END].into_iter().find(|m| rest.starts_with(m)) {
            w.text(&text[run..pos]);
            w.seq.ids.push(vocab.text.get(marker).expect("chat markers are always present"));
            pos += marker.len();
            run = pos;
            model_turn = marker == IM_START && text[pos..].split('\n').next().unwrap_or("").trim() == "assistant";
            continue;
        }
        let Some((format, close, len)) = tag_at(rest) else {
            pos += 1;
            continue;
        };
        let unbalanced = |position: usize| {
            let tag = tag_at(&text[position..]).map_or(String::new(), |(f, c, _)| if c { f.close_tag() } else { f.open_tag() });
            TokenizeError::UnbalancedTag { tag, position }
        };
        if close {
            return Err(unbalanced(pos));
        }
        let start = pos + len;
        let close_tag = format.close_tag();
        let end = text[start..].find(&close_tag).map(|i| start + i).ok_or_else(|| unbalanced(pos))?;
        if let Some(i) = find_tag(&text[start..end]) {
            return Err(unbalanced(start + i));
        }
        let after = end + close_tag.len();
        if model_turn || isolate_inputs {
            w.text(&text[run..pos]);
            let first = w.seq.ids.len();
            w.seq.ids.push(vocab.tag_id(format, false));
            w.chem(format, &text[start..end], start)?;
            w.seq.ids.push(vocab.tag_id(format, true));
            w.seq.spans.push(ChemSpan {
                format,
                start: first,
                end: w.seq.ids.len(),
            });
            run = after;
        }
        pos = after;
    }
    w.text(&text[run..]);
    Ok(w.seq)
}

/// Inverse of `tokenize`.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> Result<String, DetokenizeError> {
    let mut out = Vec::new();
    for (index, &id) in ids.iter().enumerate() {
        let token = vocab.token(id).ok_or(DetokenizeError::UnknownId { id, index })?;
        match token.kind {
            TokenKind::Byte(b) => out.push(b),
            _ => out.extend_from_slice(token.surface.as_bytes()),
        }
    }
    String::from_utf8(out).map_err(|_| DetokenizeError::InvalidUtf8)
}
