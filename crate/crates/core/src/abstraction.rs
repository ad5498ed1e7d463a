//! Building the simplified copy of an input sequence.
//!
//! Given entity spans over a token sequence `X`, `abstract_sequence`
//! produces `X_s`: every distinct entity (grouped by exact surface match
//! within the example) is replaced by a numbered tag of its type, drawn
//! without replacement from that type's `1..=n` pool; repeated mentions
//! re-use their tag, multi-token spans repeat it at every position, and all
//! other tokens are copied verbatim. The per-position entity mask marks
//! where a tag was written.
//!
//! Tag numbers are redrawn from the rng on every call, so the same example
//! gets different ids across epochs while the grouping of positions into
//! same-tag classes stays fixed.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vocab::Vocabulary;
use rand::seq::SliceRandom;
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

/// Token span `[start, end)` naming one entity mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub type_name: String,
    pub surface: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, type_name: &str, surface: &str) -> Self {
        EntitySpan {
            start,
            end,
            type_name: type_name.to_string(),
            surface: surface.to_string(),
        }
    }
}

/// The (X, X_s, Y) triple handed to the model, plus the entity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractedExample {
    pub x: Vec<u32>,
    pub x_s: Vec<u32>,
    pub y: Vec<u32>,
    pub mask: Vec<bool>,
}

/// How to handle more distinct same-type entities than the tag pool holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overflow {
    /// Refuse (the default): the schema's `n` is sized to the task.
    Error,
    /// Re-use tags round-robin, forcing overlapping ids (the `n = 1` mode).
    CollapseIds,
}

fn check_spans(spans: &[EntitySpan], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for s in spans {
        if s.start >= s.end || s.end > len {
            return Err(Error::SpanOutOfRange { start: s.start, end: s.end, len });
        }
        for i in s.start..s.end {
            if seen[i] {
                return Err(Error::SpanOutOfRange { start: s.start, end: s.end, len });
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// Replace entity spans in `x` with numbered tag ids, returning `X_s` and
/// the entity mask. Entities are numbered per type in order of first
/// appearance, with numbers drawn from a seeded shuffle of the type's pool.
pub fn abstract_sequence(
    x: &[u32],
    spans: &[EntitySpan],
    vocab: &Vocabulary,
    rng: &mut Rng,
    overflow: Overflow,
) -> Result<(Vec<u32>, Vec<bool>)> {
    let schema = vocab.schema();
    check_spans(spans, x.len())?;

    // Distinct entities per type, in order of first appearance.
    let mut distinct: Vec<Vec<&str>> = vec![Vec::new(); schema.types().len()];
    for s in spans {
        let ti = schema
            .type_index(&s.type_name)
            .ok_or_else(|| Error::Config(format!("unknown entity type `{}`", s.type_name)))?;
        if !distinct[ti].iter().any(|&u| u == s.surface) {
            distinct[ti].push(&s.surface);
        }
    }

    // One shuffled pool per type; entity k of a type takes the k-th number.
    // The shuffle is consumed in schema order so the draw only depends on
    // (spans, schema, rng state), not on span ordering quirks.
    let mut assignment: Vec<HashMap<&str, u32>> = Vec::with_capacity(schema.types().len());
    for (ti, ents) in distinct.iter().enumerate() {
        let mut pool: Vec<usize> = (1..=schema.n()).collect();
        pool.shuffle(rng);
        if ents.len() > schema.n() && overflow == Overflow::Error {
            return Err(Error::TagCapacity {
                type_name: schema.types()[ti].clone(),
                found: ents.len(),
                n: schema.n(),
            });
        }
        let mut map = HashMap::new();
        for (k, &surface) in ents.iter().enumerate() {
            let number = pool[k % pool.len()];
            map.insert(surface, vocab.tag_id(ti, number));
        }
        assignment.push(map);
    }

    let mut x_s = x.to_vec();
    let mut mask = vec![false; x.len()];
    for s in spans {
        let ti = schema.type_index(&s.type_name).expect("validated above");
        let tag = assignment[ti][s.surface.as_str()];
        for i in s.start..s.end {
            x_s[i] = tag;
            mask[i] = true;
        }
    }
    Ok((x_s, mask))
}

/// Exact-lookup tagger over a closed word list. Both synthetic tasks ship
/// their generating lexicon, so precision and recall are 1.0 by
/// construction; spans are single tokens.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    word_type: HashMap<String, String>,
}

impl LexiconTagger {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        LexiconTagger { word_type: entries.into_iter().collect() }
    }

    pub fn tag(&self, tokens: &[&str]) -> Vec<EntitySpan> {
        tokens
            .iter()
            .enumerate()
            .filter_map(|(i, tok)| {
                self.word_type
                    .get(*tok)
                    .map(|ty| EntitySpan::new(i, i + 1, ty, tok))
            })
            .collect()
    }
}

/// Parse a tag file: one line per example, tab-separated `start:end:TYPE`
/// records, empty line for span-free examples. Surfaces are filled in
/// against the example's tokens by [`resolve_spans`].
pub fn load_tagfile(path: &Path) -> Result<Vec<Vec<EntitySpan>>> {
    let f = std::fs::File::open(path)?;
    let mut all = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line?;
        let mut spans = Vec::new();
        for record in line.split('\t').filter(|r| !r.trim().is_empty()) {
            let parts: Vec<&str> = record.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::MalformedTagRecord {
                    record: record.to_string(),
                    reason: "expected start:end:TYPE".into(),
                });
            }
            let start: usize = parts[0].parse().map_err(|_| Error::MalformedTagRecord {
                record: record.to_string(),
                reason: "bad start index".into(),
            })?;
            let end: usize = parts[1].parse().map_err(|_| Error::MalformedTagRecord {
                record: record.to_string(),
                reason: "bad end index".into(),
            })?;
            if start >= end {
                return Err(Error::MalformedTagRecord {
                    record: record.to_string(),
                    reason: "start must be < end".into(),
                });
            }
            spans.push(EntitySpan::new(start, end, parts[2], ""));
        }
        all.push(spans);
    }
    Ok(all)
}

/// Attach surfaces from the tokens and validate span bounds.
pub fn resolve_spans(tokens: &[&str], spans: &[EntitySpan]) -> Result<Vec<EntitySpan>> {
    check_spans(spans, tokens.len())?;
    Ok(spans
        .iter()
        .map(|s| EntitySpan {
            start: s.start,
            end: s.end,
            type_name: s.type_name.clone(),
            surface: tokens[s.start..s.end].join(" "),
        })
        .collect())
}
