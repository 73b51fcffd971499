//! Response generation: template rendering of retrieved facts and
//! clarification questions.

mod library;
mod render;

pub use library::{
    fill, slots_in, ClarificationTable, GlossaryTerm, LevelVariants, Messages, ResponseLibrary, ResponseTemplate,
    RESPONSE_VERSION,
};
pub use render::{
    add_glossary, compose_turn, generate_response, get_clarification, join_list, pack_chunks, render_sentences,
    ClarificationItem, MAX_CHUNK_CHARS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResponseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid response file: {0}")]
    Invalid(String),
    #[error("no response template for axis {0}")]
    MissingTemplate(String),
    #[error("no value for slot {{{0}}}")]
    SlotUnfilled(String),
    #[error("response needs {chunks} chunks, limit is {max}")]
    ChunkOverflow { chunks: usize, max: usize },
    #[error("nothing to clarify")]
    EmptyMissingSet,
}
