use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{ApplicantRecord, AttributeValue, CreditLabel};
use super::schema::{AttributeKind, AttributeSchema};
use super::DatasetError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    /// One `{id, values, label}` object per line.
    Jsonl,
    /// Space-separated statlog layout: 20 attribute columns plus a `1`/`2` label.
    Statlog,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "statlog" => Ok(DatasetFormat::Statlog),
            other => Err(format!("unknown dataset format `{other}` (expected jsonl or statlog)")),
        }
    }
}

pub fn load_dataset(
    path: &Path,
    schema: &AttributeSchema,
    format: DatasetFormat,
) -> Result<Vec<ApplicantRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, schema, format)
}

pub fn parse_dataset(
    text: &str,
    schema: &AttributeSchema,
    format: DatasetFormat,
) -> Result<Vec<ApplicantRecord>, DatasetError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = match format {
            DatasetFormat::Jsonl => parse_jsonl_line(line, line_no)?,
            DatasetFormat::Statlog => parse_statlog_line(line, line_no, schema)?,
        };
        record.validate(schema).map_err(|e| match e {
            DatasetError::InvalidRecord { problems, .. } => DatasetError::Line {
                line: line_no,
                message: problems.join("; "),
            },
            other => other,
        })?;
        records.push(record);
    }
    Ok(records)
}

fn parse_jsonl_line(line: &str, line_no: usize) -> Result<ApplicantRecord, DatasetError> {
    serde_json::from_str(line).map_err(|e| DatasetError::Line {
        line: line_no,
        message: format!("malformed record: {e}"),
    })
}

fn parse_statlog_line(line: &str, line_no: usize, schema: &AttributeSchema) -> Result<ApplicantRecord, DatasetError> {
    let columns: Vec<&str> = line.split_whitespace().collect();
    let expected = schema.len() + 1;
    if columns.len() != expected && columns.len() != schema.len() {
        return Err(DatasetError::ColumnCount {
            line: line_no,
            expected,
            found: columns.len(),
        });
    }
    let mut record = ApplicantRecord::new(format!("rec-{line_no:04}"));
    for (attr, raw) in schema.iter().zip(&columns) {
        let value = match attr.kind {
            AttributeKind::Categorical => {
                if attr.describe(raw).is_none() {
                    return Err(DatasetError::UnknownCode {
                        line: line_no,
                        attribute: attr.id.clone(),
                        code: raw.to_string(),
                    });
                }
                AttributeValue::Code(raw.to_string())
            }
            AttributeKind::Numerical => {
                let n: f64 = raw.parse().map_err(|_| DatasetError::Line {
                    line: line_no,
                    message: format!("attribute {} expects a number, got `{raw}`", attr.id),
                })?;
                AttributeValue::Number(n)
            }
        };
        record.values.insert(attr.id.clone(), value);
    }
    if let Some(label) = columns.get(schema.len()) {
        record.label = Some(match *label {
            "1" => CreditLabel::Good,
            "2" => CreditLabel::Bad,
            other => {
                return Err(DatasetError::Line {
                    line: line_no,
                    message: format!("statlog label must be 1 or 2, got `{other}`"),
                })
            }
        });
    }
    Ok(record)
}

pub fn write_jsonl(path: &Path, records: &[ApplicantRecord]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LINES: &str = "\
A11 6 A34 A43 1169 A65 A75 4 A93 A101 4 A121 67 A143 A152 2 A173 1 A192 A201 1
A12 48 A32 A43 5951 A61 A73 2 A92 A101 2 A121 22 A143 A152 1 A173 1 A191 A201 2
";

    #[test]
    fn statlog_labels_map_to_good_and_bad() {
        let schema = AttributeSchema::german_credit();
        let records = parse_dataset(TWO_LINES, &schema, DatasetFormat::Statlog).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].label, Some(CreditLabel::Good));
        assert_eq!(records[1].label, Some(CreditLabel::Bad));
        assert_eq!(records[0].values.len(), 20);
        assert_eq!(records[1].number("X5"), Some(5951.0));
    }

    #[test]
    fn empty_input_gives_no_records() {
        let schema = AttributeSchema::german_credit();
        assert!(parse_dataset("", &schema, DatasetFormat::Jsonl).unwrap().is_empty());
        assert!(parse_dataset("\n\n", &schema, DatasetFormat::Statlog)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_code_names_line_and_code() {
        let schema = AttributeSchema::german_credit();
        let text = TWO_LINES.replace("A43 5951", "A4X 5951");
        let err = parse_dataset(&text, &schema, DatasetFormat::Statlog).unwrap_err();
        match err {
            DatasetError::UnknownCode { line, code, attribute } => {
                assert_eq!((line, code.as_str(), attribute.as_str()), (2, "A4X", "X4"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn wrong_column_count_is_rejected() {
        let schema = AttributeSchema::german_credit();
        let err = parse_dataset("A11 6 A34\n", &schema, DatasetFormat::Statlog).unwrap_err();
        assert!(matches!(err, DatasetError::ColumnCount { line: 1, found: 3, .. }));
    }

    #[test]
    fn jsonl_round_trip_is_identical() {
        let schema = AttributeSchema::german_credit();
        let records = parse_dataset(TWO_LINES, &schema, DatasetFormat::Statlog).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        write_jsonl(&path, &records).unwrap();
        let again = load_dataset(&path, &schema, DatasetFormat::Jsonl).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let schema = AttributeSchema::german_credit();
        let err = load_dataset(Path::new("/nonexistent/x.jsonl"), &schema, DatasetFormat::Jsonl).unwrap_err();
        assert!(matches!(err, DatasetError::Io { .. }));
    }
}
