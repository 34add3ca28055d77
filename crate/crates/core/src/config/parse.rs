//! Line-oriented `[kind name]` / `key = value` syntax shared by
//! configuration and scenario files.

use std::str::FromStr;

use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: String,
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// Splits text into sections. `#` starts a comment line; blank lines are
/// ignored.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, Vec<Diagnostic>> {
    let mut out: Vec<Section> = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(h) = l.strip_prefix('[') {
            let Some(h) = h.strip_suffix(']') else {
                errors.push(Diagnostic::new(line, "unterminated section header"));
                continue;
            };
            let mut parts = h.split_whitespace();
            let Some(kind) = parts.next() else {
                errors.push(Diagnostic::new(line, "empty section header"));
                continue;
            };
            let name = parts.next().map(str::to_string);
            if parts.next().is_some() {
                errors.push(Diagnostic::new(line, "section header takes a kind and at most one name"));
                continue;
            }
            out.push(Section { kind: kind.to_string(), name, line, entries: Vec::new() });
            continue;
        }
        let Some((k, v)) = l.split_once('=') else {
            errors.push(Diagnostic::new(line, "expected `key = value`"));
            continue;
        };
        let Some(section) = out.last_mut() else {
            errors.push(Diagnostic::new(line, "entry outside of any section"));
            continue;
        };
        let key = k.split_whitespace().collect::<Vec<_>>().join(" ");
        if key.is_empty() {
            errors.push(Diagnostic::new(line, "empty key"));
            continue;
        }
        section.entries.push(Entry { key, value: v.trim().to_string(), line });
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

/// Typed access to one section's entries with diagnostics collected on the
/// side.
pub struct Fields<'a> {
    section: &'a Section,
    used: Vec<bool>,
    pub errors: &'a mut Vec<Diagnostic>,
}

impl<'a> Fields<'a> {
    pub fn new(section: &'a Section, errors: &'a mut Vec<Diagnostic>) -> Self {
        Self { section, used: vec![false; section.entries.len()], errors }
    }

    pub fn line(&self) -> usize {
        self.section.line
    }

    pub fn name(&mut self) -> String {
        match &self.section.name {
            Some(n) => n.clone(),
            None => {
                let msg = format!("[{}] needs a name", self.section.kind);
                self.errors.push(Diagnostic::new(self.section.line, msg));
                String::new()
            }
        }
    }

    pub fn error(&mut self, line: usize, msg: impl Into<String>) {
        self.errors.push(Diagnostic::new(line, msg));
    }

    /// All values for `key`, with their lines.
    pub fn all(&mut self, key: &str) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for (i, e) in self.section.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                out.push((e.value.clone(), e.line));
            }
        }
        out
    }

    pub fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let mut all = self.all(key);
        if all.len() > 1 {
            let line = all[1].1;
            self.error(line, format!("duplicate key `{key}`"));
        }
        (!all.is_empty()).then(|| all.remove(0))
    }

    pub fn opt<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = self.raw(key)?;
        match v.parse() {
            Ok(x) => Some(x),
            Err(e) => {
                self.error(line, format!("invalid `{key}` value `{v}`: {e}"));
                None
            }
        }
    }

    pub fn req<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        if !self.section.entries.iter().any(|e| e.key == key) {
            let msg = format!("[{}] is missing `{key}`", self.section.kind);
            self.errors.push(Diagnostic::new(self.section.line, msg));
            return None;
        }
        self.opt(key)
    }

    pub fn flag(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "on" => true,
                "false" | "no" | "off" => false,
                _ => {
                    self.error(line, format!("`{key}` expects true or false"));
                    default
                }
            },
        }
    }

    /// Reports keys nobody asked for.
    pub fn finish(self) {
        for (e, used) in self.section.entries.iter().zip(self.used) {
            if !used {
                self.errors.push(Diagnostic::new(e.line, format!("unknown key `{}` in [{}]", e.key, self.section.kind)));
            }
        }
    }

    pub fn entries(&mut self) -> Vec<Entry> {
        self.used.iter_mut().for_each(|u| *u = true);
        self.section.entries.clone()
    }
}

/// Splits on whitespace and commas.
pub fn list(v: &str) -> Vec<&str> {
    v.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect()
}
