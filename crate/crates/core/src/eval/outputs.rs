//! System outputs on disk: a two-column TSV, `source_id` then `output`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

pub const OUTPUTS_HEADER: [&str; 2] = ["source_id", "output"];

#[derive(Debug, thiserror::Error)]
pub enum OutputsError {
    #[error("outputs tsv: {0}")]
    Csv(#[from] csv::Error),
    #[error("outputs tsv: header must be `source_id<TAB>output`")]
    Header,
    #[error("outputs tsv: duplicate source `{0}`")]
    Duplicate(String),
}

fn builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.delimiter(b'\t').quoting(false).has_headers(true);
    b
}

pub fn write_outputs_tsv<W: Write>(outputs: &BTreeMap<String, String>, out: W) -> Result<(), OutputsError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(out);
    w.write_record(OUTPUTS_HEADER)?;
    for (id, text) in outputs {
        // tabs and newlines would break the row layout
        let clean: String = text.chars().map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c }).collect();
        w.write_record([id.as_str(), clean.as_str()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_outputs_tsv<R: Read>(input: R) -> Result<BTreeMap<String, String>, OutputsError> {
    let mut r = builder().from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != OUTPUTS_HEADER {
        return Err(OutputsError::Header);
    }
    let mut out = BTreeMap::new();
    for row in r.records() {
        let row = row?;
        let id = row.get(0).unwrap_or_default().to_string();
        let text = row.get(1).unwrap_or_default().to_string();
        if out.insert(id.clone(), text).is_some() {
            return Err(OutputsError::Duplicate(id));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = BTreeMap::new();
        m.insert("s1".to_string(), "l'uomo \"ha\" ucciso".to_string());
        m.insert("s2".to_string(), "a\tb".to_string());
        let mut buf = Vec::new();
        write_outputs_tsv(&m, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "source_id\toutput\ns1\tl'uomo \"ha\" ucciso\ns2\ta b\n");
        let back = read_outputs_tsv(&buf[..]).unwrap();
        assert_eq!(back["s1"], m["s1"]);
        assert_eq!(back["s2"], "a b");
        assert!(matches!(read_outputs_tsv(&b"id\ttext\n"[..]), Err(OutputsError::Header)));
        assert!(matches!(read_outputs_tsv(&b"source_id\toutput\na\tx\na\ty\n"[..]), Err(OutputsError::Duplicate(_))));
    }
}
