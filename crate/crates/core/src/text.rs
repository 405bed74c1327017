//! Text normalization shared by the featurizer and the typo rule.

use std::borrow::Cow;
use std::sync::LazyLock;

use regex::Regex;

pub(crate) const URL_TOKEN: &str = "<url>";
pub(crate) const USER_TOKEN: &str = "<user>";

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("url regex"));

static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\B@[\p{L}\p{N}_]+").expect("mention regex"));

/// Replaces every URL with the `<url>` token.
pub(crate) fn replace_urls(text: &str) -> Cow<'_, str> {
    URL_RE.replace_all(text, URL_TOKEN)
}

/// Replaces every `@mention` with the `<user>` token.
pub(crate) fn replace_mentions(text: &str) -> Cow<'_, str> {
    MENTION_RE.replace_all(text, USER_TOKEN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urls_are_replaced() {
        assert_eq!(
            replace_urls("see http://x.co/a?b=1 and https://y.io"),
            "see <url> and <url>"
        );
        assert_eq!(replace_urls("www.fx.com/path now"), "<url> now");
        assert_eq!(replace_urls("no links here"), "no links here");
    }

    #[test]
    fn mentions_are_replaced() {
        assert_eq!(replace_mentions("@trader_1 hi @b"), "<user> hi <user>");
        assert_eq!(replace_mentions("mail a@b.com"), "mail a@b.com");
    }
}
