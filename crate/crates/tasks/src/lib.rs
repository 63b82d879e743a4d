//! Synthetic tasks and corpus files.
//!
//! * [`parsing`]: questions over a toy restaurant database, with gold parses
//!   for a small supervised split and only gold answers for the weak split.
//! * [`weakmt`]: translation with a domain shift, where in-domain instances
//!   come with linked relevant documents and out-of-domain document pools.
//! * [`corpus`], [`documents`], [`manifest`]: the on-disk formats.

pub mod corpus;
pub mod documents;
pub mod error;
pub mod manifest;
pub mod parsing;
pub mod weakmt;

pub use corpus::{
    load_corpus, Corpus, Format, ParsingInstance, SupervisedPair, Tokens, WeakMtInstance,
};
pub use documents::DocumentCollection;
pub use error::{DataError, Result};
pub use manifest::Manifest;
pub use parsing::{execute, generate_parsing_task, ParsingSizes, ParsingTask, ToyDatabase};
pub use weakmt::{
    generate_fullmt_task, generate_weakmt_task, FullMtSizes, FullMtTask, Lexicon, WeakMtSizes,
    WeakMtTask,
};
