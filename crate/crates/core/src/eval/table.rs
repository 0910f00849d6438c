use serde::{Deserialize, Serialize};

/// A small report table; `None` cells render blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

impl Table {
    pub fn new(title: impl Into<String>, header: Vec<String>) -> Self {
        Self {
            title: title.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<String>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Column-aligned plain text with the title on top.
    pub fn to_text(&self) -> String {
        let width = |s: &str| s.chars().count();
        let mut widths: Vec<usize> = self.header.iter().map(|h| width(h)).collect();
        for row in &self.rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.as_deref().map_or(0, width));
            }
        }
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = format!("{}\n", self.title);
        let header = line(self.header.iter().map(String::as_str).collect());
        out.push_str(&header);
        out.push('\n');
        out.push_str(&"-".repeat(width(&header)));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row.iter().map(|c| c.as_deref().unwrap_or("")).collect()));
            out.push('\n');
        }
        out
    }
}

pub fn fmt3(v: Option<f64>) -> Option<String> {
    v.map(|x| format!("{x:.3}"))
}

pub fn fmt2(v: Option<f64>) -> Option<String> {
    v.map(|x| format!("{x:.2}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_cells_stay_blank() {
        let mut t = Table::new("T", vec!["a".into(), "b".into(), "c".into()]);
        t.push(vec![Some("x".into()), None, Some("1.00".into())]);
        assert_eq!(t.to_tsv(), "a\tb\tc\nx\t\t1.00\n");
        assert_eq!(t.to_text(), "T\na  b     c\n----------\nx     1.00\n");
    }
}
