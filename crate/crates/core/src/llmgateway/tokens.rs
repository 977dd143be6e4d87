//! Approximate prompt token counts. None of these match a vendor tokenizer
//! exactly; they are stable yardsticks for prompt size.

use std::sync::LazyLock;

use regex::Regex;

use super::GatewayError;

pub const TOKENIZERS: &[&str] = &["whitespace", "wordpunct", "fallback", "char4"];

static WORD_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\w+|[^\w\s]").unwrap());

/// Counts tokens with one of [`TOKENIZERS`]:
///
/// - `whitespace`: runs of non-whitespace
/// - `wordpunct` (alias `fallback`): word runs plus each punctuation char
/// - `char4`: characters / 4, rounded up
pub fn count_prompt_tokens(prompt: &str, tokenizer_id: &str) -> Result<usize, GatewayError> {
    match tokenizer_id {
        "whitespace" => Ok(prompt.split_whitespace().count()),
        "wordpunct" | "fallback" => Ok(WORD_PUNCT.find_iter(prompt).count()),
        "char4" => Ok(prompt.chars().count().div_ceil(4)),
        other => Err(GatewayError::UnknownTokenizer(other.to_string())),
    }
}
