//! The line-oriented `key = value` dialect shared by manifests and
//! scenarios.
//!
//! ```text
//! # comment
//! key = value
//! [section]
//! other.key = value with \n escapes
//! ```
//!
//! Comments are whole lines starting with `#`. Values run to the end of the
//! line with surrounding whitespace trimmed; `\n` and `\\` are the only
//! escapes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A parse failure with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    pub value_column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    /// `None` for the keys before the first header.
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub sections: Vec<Section>,
    /// Position just past the last line, for "missing key" diagnostics.
    pub end_line: usize,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

fn unescape(raw: &str, line: usize, column: usize) -> Result<String, ParseError> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().enumerate();
    while let Some((i, c)) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some((_, 'n')) => out.push('\n'),
            Some((_, '\\')) => out.push('\\'),
            _ => return Err(ParseError::new(line, column + i, "unknown escape; use \\n or \\\\")),
        }
    }
    Ok(out)
}

/// Escapes a value for writing.
pub fn escape(value: &str) -> String {
    value.replace('\\', "\\\\").replace('\n', "\\n")
}

impl Document {
    pub fn parse(text: &str) -> Result<Document, ParseError> {
        let mut sections = vec![Section {
            name: None,
            line: 1,
            entries: Vec::new(),
        }];
        let mut seen_sections = BTreeSet::new();
        let mut line_count = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            line_count = line_no;
            let lead = raw.chars().take_while(|c| c.is_whitespace()).count();
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ParseError::new(line_no, lead + line.chars().count() + 1, "expected `]`"))?
                    .trim();
                if !valid_name(name) {
                    return Err(ParseError::new(
                        line_no,
                        lead + 2,
                        format!("invalid section name `{name}`"),
                    ));
                }
                if !seen_sections.insert(name.to_string()) {
                    return Err(ParseError::new(
                        line_no,
                        lead + 1,
                        format!("duplicate section [{name}]"),
                    ));
                }
                sections.push(Section {
                    name: Some(name.to_string()),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let Some(eq) = raw.find('=') else {
                return Err(ParseError::new(
                    line_no,
                    lead + line.chars().count() + 1,
                    "expected `key = value`",
                ));
            };
            let key = raw[..eq].trim();
            if !valid_name(key) {
                return Err(ParseError::new(line_no, lead + 1, format!("invalid key `{key}`")));
            }
            let after = &raw[eq + 1..];
            let value_lead = after.chars().take_while(|c| c.is_whitespace()).count();
            let value_column = raw[..eq].chars().count() + 2 + value_lead;
            let value = unescape(after.trim(), line_no, value_column)?;
            let section = sections.last_mut().expect("root section exists");
            if section.entries.iter().any(|e| e.key == key) {
                return Err(ParseError::new(line_no, lead + 1, format!("duplicate key `{key}`")));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value,
                line: line_no,
                value_column,
            });
        }
        Ok(Document {
            sections,
            end_line: line_count + 1,
        })
    }

    pub fn section(&self, name: Option<&str>) -> Option<&Section> {
        self.sections.iter().find(|s| s.name.as_deref() == name)
    }

    pub fn reader(&self, name: Option<&str>) -> Option<SectionReader<'_>> {
        self.section(name).map(|s| SectionReader::new(s, self.end_line))
    }

    /// Names of sections whose name starts with `prefix`.
    pub fn sections_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections
            .iter()
            .filter(move |s| s.name.as_deref().is_some_and(|n| n.starts_with(prefix)))
    }
}

/// Typed access to one section that remembers which keys were read, so
/// leftovers can be reported as unknown.
pub struct SectionReader<'a> {
    section: &'a Section,
    end_line: usize,
    used: BTreeSet<&'a str>,
}

impl<'a> SectionReader<'a> {
    pub fn new(section: &'a Section, end_line: usize) -> Self {
        SectionReader {
            section,
            end_line,
            used: BTreeSet::new(),
        }
    }

    fn label(&self) -> String {
        match &self.section.name {
            Some(n) => format!(" in [{n}]"),
            None => String::new(),
        }
    }

    pub fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let e = self.section.entries.iter().find(|e| e.key == key)?;
        self.used.insert(e.key.as_str());
        Some(e)
    }

    pub fn require(&mut self, key: &str) -> Result<&'a Entry, ParseError> {
        let label = self.label();
        let end = self.end_line;
        self.entry(key)
            .ok_or_else(|| ParseError::new(end, 1, format!("missing key `{key}`{label}")))
    }

    pub fn string(&mut self, key: &str) -> Result<String, ParseError> {
        self.require(key).map(|e| e.value.clone())
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> String {
        self.entry(key).map_or_else(|| default.to_string(), |e| e.value.clone())
    }

    pub fn parse<T: FromStr>(&mut self, key: &str) -> Result<T, ParseError>
    where
        T::Err: fmt::Display,
    {
        let e = self.require(key)?;
        parse_value(e)
    }

    pub fn parse_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ParseError>
    where
        T::Err: fmt::Display,
    {
        match self.entry(key) {
            Some(e) => parse_value(e),
            None => Ok(default),
        }
    }

    pub fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ParseError>
    where
        T::Err: fmt::Display,
    {
        self.entry(key).map(parse_value).transpose()
    }

    /// Fails on the first key that was never read.
    pub fn finish(self) -> Result<(), ParseError> {
        match self
            .section
            .entries
            .iter()
            .find(|e| !self.used.contains(e.key.as_str()))
        {
            Some(e) => Err(ParseError::new(
                e.line,
                1,
                format!("unknown key `{}`{}", e.key, self.label()),
            )),
            None => Ok(()),
        }
    }
}

pub fn parse_value<T: FromStr>(e: &Entry) -> Result<T, ParseError>
where
    T::Err: fmt::Display,
{
    e.value
        .parse()
        .map_err(|err: T::Err| ParseError::new(e.line, e.value_column, format!("`{}`: {err}", e.key)))
}
