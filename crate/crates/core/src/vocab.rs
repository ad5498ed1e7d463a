//! Word-level tokenizer and vocabulary.
//!
//! The synthetic tasks emit pre-spaced text, so tokenization is whitespace
//! splitting and ids are stable across runs: specials first, then corpus
//! tokens in sorted order, then a contiguous block of numbered abstraction
//! tags (`PERSON_1 .. PERSON_n`, one run per entity type). Keeping the tag
//! block contiguous lets the entity mask be recomputed from id-range
//! membership alone.

use crate::error::{Error, Result};
use crate::rng::fnv1a;
use std::collections::BTreeSet;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const GROUNDED: &str = "<grounded>";

/// Entity types and the number of numbered tags reserved per type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSchema {
    types: Vec<String>,
    n: usize,
}

impl TagSchema {
    pub fn new(types: Vec<String>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("tag schema needs n >= 1".into()));
        }
        let unique: BTreeSet<&String> = types.iter().collect();
        if unique.len() != types.len() {
            return Err(Error::Config("tag schema has duplicate type names".into()));
        }
        Ok(TagSchema { types, n })
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t == name)
    }

    pub fn tag_count(&self) -> usize {
        self.types.len() * self.n
    }

    pub fn tag_name(&self, type_idx: usize, number: usize) -> String {
        debug_assert!(number >= 1 && number <= self.n);
        format!("{}_{}", self.types[type_idx], number)
    }
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    tokens: Vec<String>,
    schema: TagSchema,
    grounded: Option<u32>,
    tag_block: Range<u32>,
}

impl Vocabulary {
    /// Build from a corpus token stream. Ordering is deterministic: specials,
    /// sorted distinct corpus tokens, then the tag block in schema order.
    pub fn build<'t>(
        corpus: impl IntoIterator<Item = &'t str>,
        schema: TagSchema,
        with_grounded: bool,
    ) -> Self {
        let mut reserved: BTreeSet<String> =
            [PAD, BOS, EOS, UNK].iter().map(|s| s.to_string()).collect();
        if with_grounded {
            reserved.insert(GROUNDED.to_string());
        }
        let mut tag_names = Vec::with_capacity(schema.tag_count());
        for ti in 0..schema.types().len() {
            for k in 1..=schema.n() {
                tag_names.push(schema.tag_name(ti, k));
            }
        }
        reserved.extend(tag_names.iter().cloned());

        let corpus_tokens: BTreeSet<String> = corpus
            .into_iter()
            .flat_map(str::split_whitespace)
            .filter(|t| !reserved.contains(*t))
            .map(str::to_string)
            .collect();

        let mut tokens: Vec<String> = vec![PAD.into(), BOS.into(), EOS.into(), UNK.into()];
        let grounded = if with_grounded {
            tokens.push(GROUNDED.into());
            Some(4u32)
        } else {
            None
        };
        tokens.extend(corpus_tokens);
        let tag_start = tokens.len() as u32;
        tokens.extend(tag_names);
        let tag_end = tokens.len() as u32;

        let id_of = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        Vocabulary { id_of, tokens, schema, grounded, tag_block: tag_start..tag_end }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pad(&self) -> u32 {
        0
    }

    pub fn bos(&self) -> u32 {
        1
    }

    pub fn eos(&self) -> u32 {
        2
    }

    pub fn unk(&self) -> u32 {
        3
    }

    pub fn grounded(&self) -> Option<u32> {
        self.grounded
    }

    pub fn schema(&self) -> &TagSchema {
        &self.schema
    }

    pub fn tag_block(&self) -> Range<u32> {
        self.tag_block.clone()
    }

    pub fn is_tag(&self, id: u32) -> bool {
        self.tag_block.contains(&id)
    }

    /// Id of tag `number` (1-based) of entity type `type_idx`.
    pub fn tag_id(&self, type_idx: usize, number: usize) -> u32 {
        debug_assert!(type_idx < self.schema.types().len());
        debug_assert!(number >= 1 && number <= self.schema.n());
        self.tag_block.start + (type_idx * self.schema.n() + number - 1) as u32
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|t| self.id(t).unwrap_or_else(|| self.unk()))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Content fingerprint; checkpoints refuse to load under a different one.
    pub fn hash(&self) -> u64 {
        let joined = self.tokens.join("\n");
        fnv1a(joined.as_bytes())
    }

    /// One token per line, id = line number, nothing else. The specials are
    /// recognizable by name and the tag block is the maximal trailing run
    /// of `TYPE_k` tokens, so the file alone reconstructs the vocabulary.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for t in &self.tokens {
            writeln!(f, "{}", t)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let tokens: Vec<String> =
            BufReader::new(f).lines().collect::<std::io::Result<_>>()?;
        if tokens.len() < 4 || tokens[..4] != [PAD, BOS, EOS, UNK].map(str::to_string) {
            return Err(Error::Config("vocab file must start with the special tokens".into()));
        }

        // Tag block: maximal trailing run of `TYPE_k` tokens with contiguous
        // per-type numbering 1..=n.
        fn split_tag(token: &str) -> Option<(&str, usize)> {
            let (ty, num) = token.rsplit_once('_')?;
            if ty.is_empty() || !ty.chars().all(|c| c.is_ascii_uppercase()) {
                return None;
            }
            num.parse::<usize>().ok().map(|k| (ty, k))
        }
        let mut tag_start = tokens.len();
        while tag_start > 4 && split_tag(&tokens[tag_start - 1]).is_some() {
            tag_start -= 1;
        }
        let tags = &tokens[tag_start..];
        let mut types: Vec<String> = Vec::new();
        let mut n = 0usize;
        for chunk_ty in tags.iter().filter_map(|t| split_tag(t)).map(|(ty, _)| ty) {
            if types.last().map(String::as_str) != Some(chunk_ty) {
                types.push(chunk_ty.to_string());
            }
        }
        if !types.is_empty() {
            n = tags.len() / types.len();
            let mut expect = Vec::new();
            for ty in &types {
                for k in 1..=n {
                    expect.push(format!("{ty}_{k}"));
                }
            }
            if expect != tags {
                return Err(Error::Config("malformed tag block in vocab file".into()));
            }
        }
        let schema = TagSchema::new(types, n.max(1))?;
        let tag_count = tags.len();

        let id_of: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if id_of.len() != tokens.len() {
            return Err(Error::Config("vocab file has duplicate tokens".into()));
        }
        let grounded = id_of.get(GROUNDED).copied();
        let tag_start = tag_start as u32;
        Ok(Vocabulary {
            id_of,
            tokens,
            schema,
            grounded,
            tag_block: tag_start..tag_start + tag_count as u32,
        })
    }
}
