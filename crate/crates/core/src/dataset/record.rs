use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of attribute columns in an NSL-KDD row (label excluded).
pub const ATTRIBUTE_COUNT: usize = 41;

const DURATION: usize = 0;
const PROTOCOL: usize = 1;
const SERVICE: usize = 2;
const FLAG: usize = 3;
const SRC_BYTES: usize = 4;
const DST_BYTES: usize = 5;
const COUNT: usize = 22;
const SRV_COUNT: usize = 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Tcp, Protocol::Udp, Protocol::Icmp];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        }
    }

    /// Position in the one-hot sub-vector.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One NSL-KDD connection record.
///
/// The six flow statistics used by the detector are held as typed fields;
/// the other 35 attributes are kept verbatim (in file order) so a record can
/// be written back out unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub duration: f64,
    pub protocol: Protocol,
    pub src_bytes: f64,
    pub dst_bytes: f64,
    pub count: f64,
    pub srv_count: f64,
    pub other: Vec<String>,
    /// Lower-cased attack name or `"normal"`; `None` on unlabeled stream rows.
    pub raw_label: Option<String>,
    pub difficulty: Option<u32>,
}

/// Column layout of a CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLayout {
    /// 41 attributes, no label (the live prediction stream).
    Unlabeled,
    /// 41 attributes + label.
    Labeled,
    /// 41 attributes + label + difficulty score (KDDTrain+/KDDTest+).
    LabeledWithDifficulty,
}

impl RowLayout {
    pub fn field_count(self) -> usize {
        match self {
            RowLayout::Unlabeled => ATTRIBUTE_COUNT,
            RowLayout::Labeled => ATTRIBUTE_COUNT + 1,
            RowLayout::LabeledWithDifficulty => ATTRIBUTE_COUNT + 2,
        }
    }

    pub fn labeled(has_difficulty_column: bool) -> Self {
        if has_difficulty_column {
            RowLayout::LabeledWithDifficulty
        } else {
            RowLayout::Labeled
        }
    }

    pub fn from_field_count(n: usize) -> Option<Self> {
        match n {
            41 => Some(RowLayout::Unlabeled),
            42 => Some(RowLayout::Labeled),
            43 => Some(RowLayout::LabeledWithDifficulty),
            _ => None,
        }
    }
}

impl FlowRecord {
    /// The raw label, or an error if this record came from an unlabeled row.
    pub fn label(&self) -> Result<&str> {
        self.raw_label
            .as_deref()
            .ok_or_else(|| Error::Input("record has no label".into()))
    }

    /// Writes the record back in NSL-KDD row form.
    pub fn to_csv_line(&self) -> String {
        let mut fields: Vec<String> = Vec::with_capacity(ATTRIBUTE_COUNT + 2);
        let mut other = self.other.iter();
        for col in 0..ATTRIBUTE_COUNT {
            let v = match col {
                DURATION => self.duration.to_string(),
                PROTOCOL => self.protocol.to_string(),
                SRC_BYTES => self.src_bytes.to_string(),
                DST_BYTES => self.dst_bytes.to_string(),
                COUNT => self.count.to_string(),
                SRV_COUNT => self.srv_count.to_string(),
                _ => other.next().cloned().unwrap_or_default(),
            };
            fields.push(v);
        }
        if let Some(label) = &self.raw_label {
            fields.push(label.clone());
            if let Some(d) = self.difficulty {
                fields.push(d.to_string());
            }
        }
        fields.join(",")
    }
}

fn parse_count(field: &str, col: usize, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {}: expected a number, got {field:?}", col + 1),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Parse {
            line,
            message: format!("column {}: expected a non-negative number, got {field:?}", col + 1),
        });
    }
    Ok(v)
}

/// Parses one CSV row. `line` is the 1-based line number used in errors.
pub fn parse_line(text: &str, layout: RowLayout, line: usize) -> Result<FlowRecord> {
    let fields: Vec<&str> = text.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != layout.field_count() {
        return Err(Error::Parse {
            line,
            message: format!(
                "expected {} fields, found {}",
                layout.field_count(),
                fields.len()
            ),
        });
    }

    let protocol = fields[PROTOCOL]
        .parse::<Protocol>()
        .map_err(|message| Error::Parse { line, message })?;

    let mut other = Vec::with_capacity(ATTRIBUTE_COUNT - 6);
    for (col, field) in fields.iter().enumerate().take(ATTRIBUTE_COUNT) {
        match col {
            DURATION | PROTOCOL | SRC_BYTES | DST_BYTES | COUNT | SRV_COUNT => {}
            SERVICE | FLAG => other.push(field.trim().to_string()),
            _ => {
                parse_count(field, col, line)?;
                other.push(field.trim().to_string());
            }
        }
    }

    let raw_label = match layout {
        RowLayout::Unlabeled => None,
        _ => Some(fields[ATTRIBUTE_COUNT].trim().to_ascii_lowercase()),
    };
    let difficulty = match layout {
        RowLayout::LabeledWithDifficulty => {
            let f = fields[ATTRIBUTE_COUNT + 1].trim();
            Some(f.parse::<u32>().map_err(|_| Error::Parse {
                line,
                message: format!("difficulty column: expected an integer, got {f:?}"),
            })?)
        }
        _ => None,
    };

    Ok(FlowRecord {
        duration: parse_count(fields[DURATION], DURATION, line)?,
        protocol,
        src_bytes: parse_count(fields[SRC_BYTES], SRC_BYTES, line)?,
        dst_bytes: parse_count(fields[DST_BYTES], DST_BYTES, line)?,
        count: parse_count(fields[COUNT], COUNT, line)?,
        srv_count: parse_count(fields[SRV_COUNT], SRV_COUNT, line)?,
        other,
        raw_label,
        difficulty,
    })
}

/// Parses a labeled NSL-KDD file. Blank lines are skipped; line numbers in
/// errors count every physical line.
pub fn parse_nslkdd<R: BufRead>(source: R, has_difficulty_column: bool) -> Result<Vec<FlowRecord>> {
    let layout = RowLayout::labeled(has_difficulty_column);
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(&line, layout, i + 1)?);
    }
    Ok(records)
}

/// Guesses whether a labeled file carries the trailing difficulty column by
/// counting the fields of its first non-empty line.
pub fn detect_difficulty_column(first_line: &str) -> Option<bool> {
    match RowLayout::from_field_count(first_line.split(',').count())? {
        RowLayout::Labeled => Some(false),
        RowLayout::LabeledWithDifficulty => Some(true),
        RowLayout::Unlabeled => None,
    }
}

/// Raw values of the six selected flow features, untransformed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowFeatures {
    pub duration: f64,
    pub protocol: Protocol,
    pub src_bytes: f64,
    pub dst_bytes: f64,
    pub count: f64,
    pub srv_count: f64,
}

pub fn extract_features(record: &FlowRecord) -> FlowFeatures {
    FlowFeatures {
        duration: record.duration,
        protocol: record.protocol,
        src_bytes: record.src_bytes,
        dst_bytes: record.dst_bytes,
        count: record.count,
        srv_count: record.srv_count,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = "0,tcp,http,SF,181,5450,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,8,8,0.00,0.00,0.00,0.00,1.00,0.00,0.00,9,9,1.00,0.00,0.11,0.00,0.00,0.00,0.00,0.00,normal,21";

    #[test]
    fn parses_reference_row() {
        let r = parse_line(SAMPLE, RowLayout::LabeledWithDifficulty, 1).unwrap();
        assert_eq!(r.duration, 0.0);
        assert_eq!(r.protocol, Protocol::Tcp);
        assert_eq!(r.src_bytes, 181.0);
        assert_eq!(r.dst_bytes, 5450.0);
        assert_eq!(r.count, 8.0);
        assert_eq!(r.srv_count, 8.0);
        assert_eq!(r.raw_label.as_deref(), Some("normal"));
        assert_eq!(r.difficulty, Some(21));
        assert_eq!(r.other.len(), 35);
        assert_eq!(r.other[0], "http");
        assert_eq!(r.other[1], "SF");
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(parse_nslkdd("".as_bytes(), true).unwrap().is_empty());
        assert!(parse_nslkdd("\n\n".as_bytes(), false).unwrap().is_empty());
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let err = parse_nslkdd("0,1,2,3,4,5,6,7,8,9".as_bytes(), true).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            e => panic!("unexpected {e:?}"),
        }
        let two = format!("{SAMPLE}\n1,2,3");
        match parse_nslkdd(two.as_bytes(), true).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_protocol_rejected() {
        let bad = SAMPLE.replacen("tcp", "sctp", 1);
        assert!(matches!(
            parse_line(&bad, RowLayout::LabeledWithDifficulty, 3),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn non_numeric_field_rejected() {
        let bad = SAMPLE.replacen("181", "abc", 1);
        assert!(parse_line(&bad, RowLayout::LabeledWithDifficulty, 1).is_err());
        let bad = SAMPLE.replacen(",0.11,", ",x,", 1);
        assert!(parse_line(&bad, RowLayout::LabeledWithDifficulty, 1).is_err());
    }

    #[test]
    fn label_is_lowercased_and_trimmed() {
        let row = SAMPLE.replace(",normal,", ", Neptune ,");
        let r = parse_line(&row, RowLayout::LabeledWithDifficulty, 1).unwrap();
        assert_eq!(r.raw_label.as_deref(), Some("neptune"));
    }

    #[test]
    fn layouts_without_difficulty_or_label() {
        let no_diff = SAMPLE.rsplit_once(',').unwrap().0;
        let r = parse_line(no_diff, RowLayout::Labeled, 1).unwrap();
        assert_eq!(r.difficulty, None);
        let unlabeled = no_diff.rsplit_once(',').unwrap().0;
        let r = parse_line(unlabeled, RowLayout::Unlabeled, 1).unwrap();
        assert_eq!(r.raw_label, None);
        assert_eq!(detect_difficulty_column(SAMPLE), Some(true));
        assert_eq!(detect_difficulty_column(no_diff), Some(false));
        assert_eq!(detect_difficulty_column(unlabeled), None);
    }

    #[test]
    fn extract_is_a_projection() {
        let mut r = parse_line(SAMPLE, RowLayout::LabeledWithDifficulty, 1).unwrap();
        let f = extract_features(&r);
        assert_eq!(
            (f.duration, f.protocol, f.src_bytes, f.dst_bytes, f.count, f.srv_count),
            (0.0, Protocol::Tcp, 181.0, 5450.0, 8.0, 8.0)
        );
        r.srv_count = 511.0;
        assert_eq!(extract_features(&r).srv_count, 511.0);
        r.duration = 0.0;
        r.src_bytes = 0.0;
        r.dst_bytes = 0.0;
        r.count = 0.0;
        r.srv_count = 0.0;
        let f = extract_features(&r);
        assert_eq!(
            [f.duration, f.src_bytes, f.dst_bytes, f.count, f.srv_count],
            [0.0; 5]
        );
    }

    #[test]
    fn serialize_matches_source_row() {
        let r = parse_line(SAMPLE, RowLayout::LabeledWithDifficulty, 1).unwrap();
        assert_eq!(r.to_csv_line(), SAMPLE);
    }
}
