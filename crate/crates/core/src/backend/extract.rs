use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("no balanced JSON object found")]
    NoObject,
    #[error("candidate JSON object does not parse: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub value: Value,
    /// Set when the text holds more than one top-level object.
    pub note: Option<String>,
}

/// Pulls the first balanced top-level `{...}` out of model text.
pub fn extract_json(text: &str) -> Result<Extracted, ExtractError> {
    let body = strip_fences(text);
    let (start, end) = next_object(&body, 0).ok_or(ExtractError::NoObject)?;
    let value: Value = serde_json::from_str(&body[start..end]).map_err(|e| ExtractError::Parse(e.to_string()))?;
    let mut count = 1;
    let mut cursor = end;
    while let Some((_, e)) = next_object(&body, cursor) {
        count += 1;
        cursor = e;
    }
    let note = (count > 1).then(|| format!("{count} top-level objects found; using the first"));
    Ok(Extracted { value, note })
}

fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Byte range of the first balanced object at or after `from`. String
/// literals inside the object are skipped so braces in them do not count.
fn next_object(text: &str, from: usize) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let start = from + text[from..].find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((start, start + offset + 1));
                }
            }
            _ => {}
        }
    }
    None
}
