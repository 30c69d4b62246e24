//! Minimal CoNLL key/response files.
//!
//! Only document boundaries (`#begin document <id>` / `#end document`) and
//! the last whitespace-separated column of each token line are read. That
//! column holds coreference brackets such as `(3`, `3)`, `(3)` or `(3|(7`,
//! and `-`/`_` for none. Blank lines and other `#` lines are ignored.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::clustering::Clustering;
use crate::error::{Error, Result};

/// Token span `[start, end]` (inclusive, 0-based token positions within the
/// document).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConllDocument {
    pub id: String,
    /// Mentions in order of their opening bracket.
    pub spans: Vec<Span>,
    pub clustering: Clustering,
}

struct Open {
    id: String,
    begin_line: usize,
    tokens: usize,
    stacks: HashMap<String, Vec<(usize, usize)>>,
    // (opening sequence number, span, entity)
    mentions: Vec<(usize, Span, String)>,
    opened: usize,
}

impl Open {
    fn err(&self, line: usize, msg: impl std::fmt::Display) -> Error {
        Error::Parse {
            line,
            msg: format!("document {}: {msg}", self.id),
        }
    }

    fn token(&mut self, column: &str, line: usize) -> Result<()> {
        let pos = self.tokens;
        self.tokens += 1;
        if column == "-" || column == "_" {
            return Ok(());
        }
        for part in column.split('|') {
            let opens = part.starts_with('(');
            let closes = part.ends_with(')') && part.len() > 1;
            let entity = part.trim_start_matches('(').trim_end_matches(')');
            if entity.is_empty() || (!opens && !closes) {
                return Err(self.err(line, format!("malformed coreference field {part:?}")));
            }
            if opens {
                let seq = self.opened;
                self.opened += 1;
                if closes {
                    self.mentions.push((
                        seq,
                        Span {
                            start: pos,
                            end: pos,
                        },
                        entity.to_string(),
                    ));
                } else {
                    self.stacks
                        .entry(entity.to_string())
                        .or_default()
                        .push((seq, pos));
                }
            } else {
                let (seq, start) =
                    self.stacks
                        .get_mut(entity)
                        .and_then(Vec::pop)
                        .ok_or_else(|| {
                            self.err(
                                line,
                                format!("closing bracket for entity {entity} with no open mention"),
                            )
                        })?;
                self.mentions
                    .push((seq, Span { start, end: pos }, entity.to_string()));
            }
        }
        Ok(())
    }

    fn finish(mut self, line: usize) -> Result<ConllDocument> {
        if let Some((entity, _)) = self.stacks.iter().find(|(_, s)| !s.is_empty()) {
            return Err(self.err(
                line,
                format!(
                    "unclosed bracket for entity {entity} (document began at line {})",
                    self.begin_line
                ),
            ));
        }
        self.mentions.sort_unstable_by_key(|m| m.0);
        let labels: Vec<&str> = self.mentions.iter().map(|m| m.2.as_str()).collect();
        Ok(ConllDocument {
            id: self.id,
            spans: self.mentions.iter().map(|m| m.1).collect(),
            clustering: Clustering::from_labels(&labels),
        })
    }
}

/// Parses CoNLL text into one clustering per document.
pub fn parse_conll_str(text: &str) -> Result<Vec<ConllDocument>> {
    let mut docs = Vec::new();
    let mut current: Option<Open> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("#begin document") {
            if let Some(open) = &current {
                return Err(open.err(line, "#begin document before #end document"));
            }
            current = Some(Open {
                id: rest.trim().to_string(),
                begin_line: line,
                tokens: 0,
                stacks: HashMap::new(),
                mentions: Vec::new(),
                opened: 0,
            });
        } else if trimmed.starts_with("#end document") {
            match current.take() {
                Some(open) => docs.push(open.finish(line)?),
                None => {
                    return Err(Error::Parse {
                        line,
                        msg: "#end document without #begin document".into(),
                    })
                }
            }
        } else if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        } else {
            let column = trimmed.split_whitespace().last().expect("non-empty line");
            match current.as_mut() {
                Some(open) => open.token(column, line)?,
                None => {
                    return Err(Error::Parse {
                        line,
                        msg: "token line outside of a document".into(),
                    })
                }
            }
        }
    }
    if let Some(open) = current {
        let last = text.lines().count();
        return Err(open.err(last, "missing #end document"));
    }
    Ok(docs)
}

pub fn parse_conll_key(path: impl AsRef<Path>) -> Result<Vec<ConllDocument>> {
    parse_conll_str(&fs::read_to_string(path)?)
}

/// Writes documents with one token per mention, so mention `k` is the single
/// token `k` and carries `(c)` for its cluster index `c`.
pub fn write_conll<W: Write>(docs: &[(&str, &Clustering)], mut w: W) -> Result<()> {
    for (id, clustering) in docs {
        writeln!(w, "#begin document {id}")?;
        let labels = clustering.labels();
        for (k, c) in labels.iter().enumerate() {
            writeln!(w, "{k}\t({c})")?;
        }
        writeln!(w, "#end document")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_conll_response(
    id: &str,
    clustering: &Clustering,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_conll(&[(id, clustering)], BufWriter::new(fs::File::create(path)?))
}

/// Re-expresses the response clustering over the key's mention order.
/// Both documents must contain exactly the same spans.
pub fn align_response(key: &ConllDocument, response: &ConllDocument) -> Result<Clustering> {
    let mismatch = || {
        Error::Input(format!(
            "document {}: key and response mention spans differ",
            key.id
        ))
    };
    if key.spans.len() != response.spans.len() {
        return Err(mismatch());
    }
    let mut index: HashMap<Span, usize> = HashMap::with_capacity(key.spans.len());
    for (k, span) in key.spans.iter().enumerate() {
        if index.insert(*span, k).is_some() {
            return Err(Error::Input(format!(
                "document {}: duplicate span {:?} in key",
                key.id, span
            )));
        }
    }
    let resp_labels = response.clustering.labels();
    let mut labels = vec![usize::MAX; key.spans.len()];
    for (r, span) in response.spans.iter().enumerate() {
        let k = *index.get(span).ok_or_else(mismatch)?;
        if labels[k] != usize::MAX {
            return Err(mismatch());
        }
        labels[k] = resp_labels[r];
    }
    Ok(Clustering::from_labels(&labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(columns: &[&str]) -> String {
        let mut s = String::from("#begin document (test); part 000\n");
        for (k, c) in columns.iter().enumerate() {
            s.push_str(&format!("test\t0\t{k}\tword\t{c}\n"));
        }
        s.push_str("#end document\n");
        s
    }

    fn clusters(text: &str) -> Vec<Vec<usize>> {
        parse_conll_str(text).unwrap()[0]
            .clustering
            .clusters()
            .to_vec()
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(clusters(&doc(&["(0)", "(0)"])), vec![vec![0, 1]]);
        assert_eq!(clusters(&doc(&["(0", "0)"])), vec![vec![0]]);
        assert_eq!(
            clusters(&doc(&["(0)", "(1)", "(0)"])),
            vec![vec![0, 2], vec![1]]
        );
    }

    #[test]
    fn nested_and_multi_part() {
        let parsed = parse_conll_str(&doc(&["(0|(1)", "-", "0)", "(1)"])).unwrap();
        let d = &parsed[0];
        assert_eq!(d.id, "(test); part 000");
        assert_eq!(
            d.spans,
            vec![
                Span { start: 0, end: 2 },
                Span { start: 0, end: 0 },
                Span { start: 3, end: 3 }
            ]
        );
        assert_eq!(d.clustering.clusters(), &[vec![0], vec![1, 2]]);
        // same entity nested in itself
        let parsed = parse_conll_str(&doc(&["(5", "(5)", "5)"])).unwrap();
        assert_eq!(parsed[0].spans[0], Span { start: 0, end: 2 });
    }

    #[test]
    fn unbalanced_brackets() {
        let err = parse_conll_str(&doc(&["(0", "-"])).unwrap_err();
        assert!(
            matches!(err, Error::Parse { line: 4, ref msg } if msg.contains("(test)")),
            "{err}"
        );
        let err = parse_conll_str(&doc(&["-", "1)"])).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_conll_str("#begin document x\n").is_err());
        assert!(parse_conll_str("a b (0)\n").is_err());
    }

    #[test]
    fn write_then_parse() {
        for c in [
            Clustering::from_labels(&[0, 0]),
            Clustering::singletons(2),
            Clustering::from_labels(&[3, 1, 3, 3, 2]),
            Clustering::singletons(0),
        ] {
            let mut buf = Vec::new();
            write_conll(&[("d1", &c)], &mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            if c.is_empty() {
                assert_eq!(text, "#begin document d1\n#end document\n");
            }
            let back = parse_conll_str(&text).unwrap();
            assert_eq!(back.len(), 1);
            assert_eq!(back[0].id, "d1");
            assert_eq!(back[0].clustering, c);
        }
        let mut buf = Vec::new();
        write_conll(&[("d", &Clustering::singletons(2))], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("(0)") && text.contains("(1)"));
    }

    #[test]
    fn alignment_requires_same_spans() {
        let key = &parse_conll_str(&doc(&["(0)", "(1)", "(0)"])).unwrap()[0];
        let resp = &parse_conll_str(&doc(&["(7)", "(7)", "(8)"])).unwrap()[0];
        let aligned = align_response(key, resp).unwrap();
        assert_eq!(aligned.clusters(), &[vec![0, 1], vec![2]]);
        let short = &parse_conll_str(&doc(&["(7)", "(7)", "-"])).unwrap()[0];
        assert!(matches!(align_response(key, short), Err(Error::Input(_))));
    }
}
