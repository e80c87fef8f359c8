//! Turning crawled Markdown into an embedded document.

use crate::document::{DocumentDraft, Sentence, TosDocument};
use crate::embedding::{Embedder, EmbeddingError};
use crate::segment::segment_sentences;

/// Sentences per backend call.
const EMBED_BATCH: usize = 64;

pub fn build_document(draft: DocumentDraft, embedder: &dyn Embedder) -> Result<TosDocument, EmbeddingError> {
    let texts = segment_sentences(&draft.merged_markdown);
    let mut sentences = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EMBED_BATCH) {
        let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
        let vectors = embedder.embed_batch(&refs)?;
        for (text, embedding) in chunk.iter().zip(vectors) {
            sentences.push(Sentence { sentence_id: sentences.len(), text: text.clone(), embedding });
        }
    }
    Ok(TosDocument {
        platform_id: draft.platform_id,
        merged_markdown: draft.merged_markdown,
        source_urls: draft.source_urls,
        sentences,
        content_hash: draft.content_hash,
        backend_spec: embedder.spec().clone(),
        fetched_at: draft.fetched_at,
    })
}

/// Reuses `previous`'s sentences when the content and backend are unchanged;
/// otherwise encodes from scratch. Returns whether encoding was skipped.
pub fn build_or_reuse(
    draft: DocumentDraft,
    embedder: &dyn Embedder,
    previous: Option<&TosDocument>,
) -> Result<(TosDocument, bool), EmbeddingError> {
    match previous {
        Some(prev) if prev.content_hash == draft.content_hash && prev.backend_spec == *embedder.spec() => {
            let doc = TosDocument {
                platform_id: draft.platform_id,
                merged_markdown: draft.merged_markdown,
                source_urls: draft.source_urls,
                sentences: prev.sentences.clone(),
                content_hash: draft.content_hash,
                backend_spec: prev.backend_spec.clone(),
                fetched_at: draft.fetched_at,
            };
            Ok((doc, true))
        }
        _ => Ok((build_document(draft, embedder)?, false)),
    }
}
