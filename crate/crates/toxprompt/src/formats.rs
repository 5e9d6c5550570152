//! Dataset, demonstration-pool, lexicon and mock-fixture file formats.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use toxprompt_core::classifiers::Lexicon;
use toxprompt_core::corpus::{normalize_text, Dataset, DemonstrationPool, Document, Label, LabelFieldMap};
use toxprompt_core::mock::{MockEntry, MockFixture};

use crate::error::LoadError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// One JSON object per line.
    #[default]
    Jsonl,
    /// Comma- or tab-separated text with a declared column map.
    Delimited,
}

/// How to read a dataset file.
///
/// For delimited files, `id_field`/`text_field`/`label_field` are either
/// zero-based column indices (`"0"`) or header names (with `header = true`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatSpec {
    #[serde(default)]
    pub format: DataFormat,
    #[serde(default)]
    pub id_field: Option<String>,
    #[serde(default = "default_text_field")]
    pub text_field: String,
    #[serde(default)]
    pub label_field: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub header: bool,
    /// Honour double-quote escaping. Defaults to on for commas, off for tabs.
    #[serde(default)]
    pub quoting: Option<bool>,
    /// Source label value to 0/1. Empty means labels must already be 0/1.
    #[serde(default)]
    pub label_map: BTreeMap<String, u8>,
}

fn default_text_field() -> String {
    "text".into()
}

fn default_delimiter() -> String {
    ",".into()
}

impl Default for FormatSpec {
    fn default() -> Self {
        FormatSpec {
            format: DataFormat::Jsonl,
            id_field: Some("id".into()),
            text_field: default_text_field(),
            label_field: Some("label".into()),
            delimiter: default_delimiter(),
            header: false,
            quoting: None,
            label_map: BTreeMap::new(),
        }
    }
}

impl FormatSpec {
    pub fn jsonl() -> Self {
        FormatSpec::default()
    }

    /// Headerless delimited file with columns given by index.
    pub fn delimited(delimiter: char, id: usize, text: usize, label: Option<usize>) -> Self {
        FormatSpec {
            format: DataFormat::Delimited,
            id_field: Some(id.to_string()),
            text_field: text.to_string(),
            label_field: label.map(|l| l.to_string()),
            delimiter: delimiter.to_string(),
            header: false,
            quoting: None,
            label_map: BTreeMap::new(),
        }
    }

    pub fn with_label_map<'a>(mut self, map: impl IntoIterator<Item = (&'a str, u8)>) -> Self {
        self.label_map = map.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        self
    }

    /// Field names as applied. Line-record files fall back to `id` and `label`.
    fn field_map(&self) -> Result<LabelFieldMap, String> {
        let (id_field, label_field) = match self.format {
            DataFormat::Jsonl => (
                Some(self.id_field.clone().unwrap_or_else(|| "id".into())),
                Some(self.label_field.clone().unwrap_or_else(|| "label".into())),
            ),
            DataFormat::Delimited => (self.id_field.clone(), self.label_field.clone()),
        };
        let mut label_values = BTreeMap::new();
        for (value, label) in &self.label_map {
            let label = Label::try_from(*label).map_err(|e| format!("label_map '{value}': {e}"))?;
            label_values.insert(value.clone(), label);
        }
        Ok(LabelFieldMap {
            id_field,
            text_field: self.text_field.clone(),
            label_field,
            label_values,
        })
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|e| LoadError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|e| LoadError::io(path, e))
}

fn row_error(path: &Path, row: usize, message: impl Into<String>) -> LoadError {
    LoadError::Row {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

/// Resolves a raw label through the map (or as a literal 0/1 when the map is empty).
fn map_label(
    raw: &str,
    map: &LabelFieldMap,
    path: &Path,
    row: usize,
) -> Result<Label, LoadError> {
    let unmappable = || LoadError::UnmappableLabel {
        path: path.to_path_buf(),
        value: raw.to_string(),
        row,
    };
    if map.label_values.is_empty() {
        match raw.trim() {
            "0" => Ok(Label::NonToxic),
            "1" => Ok(Label::Toxic),
            _ => Err(unmappable()),
        }
    } else {
        map.label_values.get(raw.trim()).copied().ok_or_else(unmappable)
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Loads a labeled (or unlabeled) dataset in file order.
pub fn load_dataset(path: &Path, spec: &FormatSpec, name: Option<&str>) -> Result<Dataset, LoadError> {
    let map = spec.field_map().map_err(|m| LoadError::invalid(path, m))?;
    let docs = match spec.format {
        DataFormat::Jsonl => load_jsonl(path, &map)?,
        DataFormat::Delimited => load_delimited(path, spec, &map)?,
    };
    let name = name.map(str::to_string).unwrap_or_else(|| dataset_name(path));
    Dataset::new(name, docs, map).map_err(|source| LoadError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

fn load_jsonl(path: &Path, map: &LabelFieldMap) -> Result<Vec<Document>, LoadError> {
    let bytes = read_bytes(path)?;
    let mut docs = Vec::new();
    for (i, line) in bytes.split(|b| *b == b'\n').enumerate() {
        let row = i + 1;
        let line = std::str::from_utf8(line).map_err(|_| row_error(path, row, "invalid UTF-8"))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Map<String, Value> =
            serde_json::from_str(line).map_err(|e| row_error(path, row, format!("malformed record: {e}")))?;

        let id = match map.id_field.as_deref().and_then(|f| record.get(f)) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(other) => return Err(row_error(path, row, format!("id must be a string, got {other}"))),
            None => row.to_string(),
        };
        let text = match record.get(&map.text_field) {
            Some(Value::String(s)) => s.as_str(),
            _ => {
                return Err(row_error(
                    path,
                    row,
                    format!("missing string field '{}'", map.text_field),
                ))
            }
        };
        let label = match map.label_field.as_deref().and_then(|f| record.get(f)) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(map_label(s, map, path, row)?),
            Some(Value::Number(n)) => Some(map_label(&n.to_string(), map, path, row)?),
            Some(Value::Bool(b)) => Some(map_label(&b.to_string(), map, path, row)?),
            Some(other) => {
                return Err(LoadError::UnmappableLabel {
                    path: path.to_path_buf(),
                    value: other.to_string(),
                    row,
                })
            }
        };
        let doc = Document::new(id, text, label).map_err(|e| row_error(path, row, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    fn parse(field: &str) -> Self {
        field
            .parse()
            .map(Column::Index)
            .unwrap_or_else(|_| Column::Name(field.to_string()))
    }

    fn resolve(&self, header: Option<&csv::ByteRecord>, path: &Path) -> Result<usize, LoadError> {
        match self {
            Column::Index(i) => Ok(*i),
            Column::Name(name) => header
                .and_then(|h| h.iter().position(|c| c == name.as_bytes()))
                .ok_or_else(|| LoadError::invalid(path, format!("no column named '{name}'"))),
        }
    }
}

fn load_delimited(path: &Path, spec: &FormatSpec, map: &LabelFieldMap) -> Result<Vec<Document>, LoadError> {
    let delimiter = match spec.delimiter.as_bytes() {
        [b] => *b,
        _ => {
            return Err(LoadError::invalid(
                path,
                format!("delimiter must be one byte, got {:?}", spec.delimiter),
            ))
        }
    };
    let quoting = spec.quoting.unwrap_or(delimiter != b'\t');
    let bytes = read_bytes(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .quoting(quoting)
        .from_reader(bytes.as_slice());

    let mut records = reader.byte_records();
    let header = if spec.header {
        match records.next() {
            Some(rec) => Some(rec.map_err(|e| row_error(path, 1, e.to_string()))?),
            None => None,
        }
    } else {
        None
    };
    let text_col = Column::parse(&map.text_field).resolve(header.as_ref(), path)?;
    let id_col = map
        .id_field
        .as_deref()
        .map(|f| Column::parse(f).resolve(header.as_ref(), path))
        .transpose()?;
    let label_col = map
        .label_field
        .as_deref()
        .map(|f| Column::parse(f).resolve(header.as_ref(), path))
        .transpose()?;

    let mut expected_fields = header.as_ref().map(|h| h.len());
    let mut docs = Vec::new();
    let row_offset = usize::from(spec.header);
    for (i, rec) in records.enumerate() {
        let row = i + 1 + row_offset;
        let rec = rec.map_err(|e| row_error(path, row, e.to_string()))?;
        if rec.len() == 1 && rec.get(0).is_some_and(|f| f.is_empty()) {
            continue;
        }
        let expected = *expected_fields.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(row_error(
                path,
                row,
                format!("expected {expected} fields, found {}", rec.len()),
            ));
        }
        let field = |col: usize| -> Result<&str, LoadError> {
            let raw = rec
                .get(col)
                .ok_or_else(|| row_error(path, row, format!("no column {col}")))?;
            std::str::from_utf8(raw).map_err(|_| row_error(path, row, "invalid UTF-8"))
        };
        let id = match id_col {
            Some(c) => field(c)?.to_string(),
            None => (i + 1).to_string(),
        };
        let text = field(text_col)?;
        let label = match label_col {
            Some(c) => {
                let raw = field(c)?;
                if raw.trim().is_empty() {
                    None
                } else {
                    Some(map_label(raw, map, path, row)?)
                }
            }
            None => None,
        };
        docs.push(Document::new(id, text, label).map_err(|e| row_error(path, row, e.to_string()))?);
    }
    Ok(docs)
}

/// One demonstration per non-blank line.
pub fn load_pool(path: &Path) -> Result<DemonstrationPool, LoadError> {
    let text = read_text(path)?;
    let texts = text
        .lines()
        .map(normalize_text)
        .filter(|t| !t.is_empty())
        .collect();
    Ok(DemonstrationPool::new(texts, path.display().to_string()))
}

/// One term per line; `#` starts a comment line. Several files are merged.
pub fn load_lexicon(paths: &[impl AsRef<Path>]) -> Result<Lexicon, LoadError> {
    let mut terms = Vec::new();
    let mut sources = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let text = read_text(path)?;
        terms.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string),
        );
        sources.push(path.display().to_string());
    }
    Lexicon::new(terms, sources).map_err(|e| LoadError::Config(format!("lexicon: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FixtureRecord {
    Vocab { vocab_size: u64 },
    Entry(MockEntry),
    Embed { embed: BTreeMap<String, Vec<f64>> },
}

/// Parses a mock fixture: one JSON record per line, each either
/// `{"vocab_size": n}`, `{"context_suffix": s, "token": s, "prob": f}` or
/// `{"embed": {text: [f, ...]}}`. Blank lines are ignored.
pub fn parse_fixture(source: &str, path: &Path) -> Result<MockFixture, LoadError> {
    let mut vocab_size = None;
    let mut entries = Vec::new();
    let mut embeddings = BTreeMap::new();
    for (i, line) in source.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: FixtureRecord = serde_json::from_str(line)
            .map_err(|e| row_error(path, i + 1, format!("malformed fixture record: {e}")))?;
        match record {
            FixtureRecord::Vocab { vocab_size: v } => vocab_size = Some(v),
            FixtureRecord::Entry(e) => entries.push(e),
            FixtureRecord::Embed { embed } => embeddings.extend(embed),
        }
    }
    let fixture = MockFixture {
        vocab_size: vocab_size.ok_or_else(|| LoadError::invalid(path, "fixture lacks a vocab_size record"))?,
        entries,
        embeddings,
    };
    fixture.validate().map_err(|source| LoadError::Fixture {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(fixture)
}

pub fn load_fixture(path: &Path) -> Result<MockFixture, LoadError> {
    parse_fixture(&read_text(path)?, path)
}

/// Serializes a fixture back into the line-record format.
pub fn write_fixture(fixture: &MockFixture) -> String {
    let mut out = serde_json::json!({ "vocab_size": fixture.vocab_size }).to_string();
    out.push('\n');
    for entry in &fixture.entries {
        out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
        out.push('\n');
    }
    if !fixture.embeddings.is_empty() {
        out.push_str(&serde_json::json!({ "embed": fixture.embeddings }).to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents).unwrap();
        f
    }

    #[test]
    fn jsonl_record() {
        let f = file(br#"{"id":"a1","text":"hello","label":1}"#);
        let ds = load_dataset(f.path(), &FormatSpec::jsonl(), Some("t")).unwrap();
        assert_eq!(
            ds.documents(),
            &[Document {
                id: "a1".into(),
                text: "hello".into(),
                gold_label: Some(Label::Toxic)
            }]
        );
    }

    #[test]
    fn jsonl_optional_label_and_normalization() {
        let f = file(b"{\"id\":\"x\",\"text\":\"  hi\\r\\n\"}\n\n{\"id\":7,\"text\":\"b\",\"label\":null}\n");
        let ds = load_dataset(f.path(), &FormatSpec::jsonl(), None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.documents()[0].text, "hi");
        assert_eq!(ds.documents()[0].gold_label, None);
        assert_eq!(ds.documents()[1].id, "7");
    }

    #[test]
    fn jsonl_errors_name_the_row() {
        let f = file(b"{\"id\":\"a\",\"text\":\"ok\",\"label\":0}\n{not json}\n");
        let err = load_dataset(f.path(), &FormatSpec::jsonl(), None).unwrap_err();
        assert!(matches!(err, LoadError::Row { row: 2, .. }), "{err}");

        let f = file(b"{\"id\":\"a\",\"text\":\"ok\",\"label\":2}\n");
        let err = load_dataset(f.path(), &FormatSpec::jsonl(), None).unwrap_err();
        assert!(err.to_string().contains("unmappable label '2' at row 1"), "{err}");

        let f = file(b"{\"id\":\"a\",\"text\":\"\xff\"}\n");
        let err = load_dataset(f.path(), &FormatSpec::jsonl(), None).unwrap_err();
        assert!(err.to_string().contains("row 1: invalid UTF-8"), "{err}");
    }

    #[test]
    fn tab_file_with_label_map() {
        let spec = FormatSpec::delimited('\t', 0, 1, Some(2)).with_label_map([("OFF", 1), ("NOT", 0)]);
        let f = file(b"42\tyou suck\tOFF\n43\tnice \"quote\tNOT\n");
        let ds = load_dataset(f.path(), &spec, None).unwrap();
        assert_eq!(
            ds.documents()[0],
            Document {
                id: "42".into(),
                text: "you suck".into(),
                gold_label: Some(Label::Toxic)
            }
        );
        assert_eq!(ds.documents()[1].text, "nice \"quote");
    }

    #[test]
    fn unmappable_delimited_label() {
        let spec = FormatSpec::delimited('\t', 0, 1, Some(2)).with_label_map([("OFF", 1), ("NOT", 0)]);
        let f = file(b"1\tfine\tNOT\n2\thmm\tMAYBE\n");
        let err = load_dataset(f.path(), &spec, None).unwrap_err();
        assert!(err.to_string().ends_with("unmappable label 'MAYBE' at row 2"), "{err}");
    }

    #[test]
    fn bad_field_count_names_row() {
        let spec = FormatSpec::delimited(',', 0, 1, Some(2));
        let f = file(b"1,a,0\n2,b\n");
        let err = load_dataset(f.path(), &spec, None).unwrap_err();
        assert!(matches!(err, LoadError::Row { row: 2, .. }), "{err}");
    }

    #[test]
    fn header_columns_by_name() {
        let spec = FormatSpec {
            format: DataFormat::Delimited,
            id_field: None,
            text_field: "tweet".into(),
            label_field: Some("class".into()),
            delimiter: ",".into(),
            header: true,
            quoting: None,
            label_map: [("hate".to_string(), 1), ("offensive".to_string(), 1), ("normal".to_string(), 0)]
                .into_iter()
                .collect(),
        };
        let f = file(b"class,tweet\nnormal,\"hello, world\"\nhate,ugh\n");
        let ds = load_dataset(f.path(), &spec, Some("hx")).unwrap();
        assert_eq!(ds.documents()[0].text, "hello, world");
        assert_eq!(ds.documents()[0].id, "1");
        assert_eq!(ds.documents()[1].gold_label, Some(Label::Toxic));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = file(b"{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
        assert!(matches!(
            load_dataset(f.path(), &FormatSpec::jsonl(), None),
            Err(LoadError::Corpus { .. })
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_dataset(Path::new("/definitely/not/here.jsonl"), &FormatSpec::jsonl(), None).unwrap_err();
        assert!(matches!(err, LoadError::Io { .. }));
    }

    #[test]
    fn loading_twice_is_identical() {
        let f = file(b"{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n{\"id\":\"b\",\"text\":\"y\",\"label\":1}\n");
        let a = load_dataset(f.path(), &FormatSpec::jsonl(), None).unwrap();
        let b = load_dataset(f.path(), &FormatSpec::jsonl(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lexicon_file() {
        let f = file(b"# header\nJerk\n\n  idiot  \n");
        let lex = load_lexicon(&[f.path()]).unwrap();
        assert_eq!(lex.terms().iter().collect::<Vec<_>>(), ["idiot", "jerk"]);
    }

    #[test]
    fn pool_file() {
        let f = file(b"first post\n\n second \r\n");
        let pool = load_pool(f.path()).unwrap();
        assert_eq!(pool.texts, ["first post", "second"]);
    }

    #[test]
    fn fixture_round_trip() {
        let src = "{\"vocab_size\": 100}\n{\"context_suffix\": \"P:\", \"token\": \"hi\", \"prob\": 0.5}\n{\"embed\": {\"hello\": [1, 0, 0]}}\n";
        let fx = parse_fixture(src, Path::new("f")).unwrap();
        assert_eq!(fx.vocab_size, 100);
        assert_eq!(fx.entries.len(), 1);
        assert_eq!(fx.embeddings["hello"], vec![1.0, 0.0, 0.0]);
        assert_eq!(parse_fixture(&write_fixture(&fx), Path::new("f")).unwrap(), fx);
    }

    #[test]
    fn fixture_errors() {
        let bad_prob = "{\"vocab_size\": 10}\n{\"context_suffix\": \"\", \"token\": \"x\", \"prob\": 1.5}\n";
        assert!(matches!(parse_fixture(bad_prob, Path::new("f")), Err(LoadError::Fixture { .. })));
        assert!(parse_fixture("{\"token\": 1}\n", Path::new("f")).is_err());
        assert!(parse_fixture("{\"context_suffix\": \"\", \"token\": \"x\", \"prob\": 0.5}\n", Path::new("f")).is_err());
    }
}
