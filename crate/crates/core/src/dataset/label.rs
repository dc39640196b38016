use super::record::CreditLabel;
use super::DatasetError;

const GOOD_TOKENS: &[&str] = &["good", "approve", "approved", "approves", "approval"];
const BAD_TOKENS: &[&str] = &["bad", "deny", "denied", "denies", "reject", "rejected", "rejects"];

/// Reads a credit decision out of free text. Text naming both outcomes, or
/// neither, is refused rather than guessed.
pub fn parse_label(text: &str) -> Result<CreditLabel, DatasetError> {
    let lower = text.to_lowercase();
    let mut good = false;
    let mut bad = false;
    for token in lower.split(|c: char| !c.is_alphanumeric()) {
        good |= GOOD_TOKENS.contains(&token);
        bad |= BAD_TOKENS.contains(&token);
    }
    match (good, bad) {
        (true, false) => Ok(CreditLabel::Good),
        (false, true) => Ok(CreditLabel::Bad),
        _ => Err(DatasetError::Unparseable(excerpt(text))),
    }
}

fn excerpt(text: &str) -> String {
    let trimmed = text.trim();
    match trimmed.char_indices().nth(80) {
        Some((idx, _)) => format!("{}…", &trimmed[..idx]),
        None => trimmed.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_tokens() {
        assert_eq!(parse_label("Final decision: GOOD").unwrap(), CreditLabel::Good);
        assert_eq!(parse_label("bad").unwrap(), CreditLabel::Bad);
    }

    #[test]
    fn synonyms() {
        assert_eq!(parse_label("deny the application").unwrap(), CreditLabel::Bad);
        assert_eq!(parse_label("We approve.").unwrap(), CreditLabel::Good);
        assert_eq!(parse_label("Rejected").unwrap(), CreditLabel::Bad);
    }

    #[test]
    fn conflicting_or_absent_tokens_are_errors() {
        assert!(parse_label("good risk but bad timing").is_err());
        assert!(parse_label("no idea").is_err());
        assert!(parse_label("").is_err());
    }

    #[test]
    fn substrings_do_not_count() {
        assert!(parse_label("goodness badge").is_err());
    }
}
