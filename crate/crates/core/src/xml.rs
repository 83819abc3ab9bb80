//! Minimal element tree over `quick-xml`, with source positions on every
//! element and a canonical writer.
//!
//! Prefixed names such as `spl:policy` are kept verbatim; no namespace
//! resolution takes place.

use std::fmt;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

/// 1-based line and column of an element's start tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl Position {
    pub fn from_offset(text: &str, offset: usize) -> Position {
        let offset = offset.min(text.len());
        let before = &text.as_bytes()[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = before
            .iter()
            .rposition(|&b| b == b'\n')
            .map_or(0, |i| i + 1);
        let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
        Position { line, column }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed XML at {position}: {message}")]
pub struct MalformedXml {
    pub position: Position,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Element {
    pub name: String,
    /// Attributes in source order.
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    /// Direct text content, trimmed. Empty when the element has none.
    pub text: String,
    pub position: Position,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.push((name.into(), value.into()));
        self
    }

    pub fn with_child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn push(&mut self, child: Element) {
        self.children.push(child);
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }
}

/// Parses a complete document into its root element.
pub fn parse(text: &str) -> Result<Element, MalformedXml> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    loop {
        let start = reader.buffer_position() as usize;
        let event = reader.read_event().map_err(|e| MalformedXml {
            position: Position::from_offset(text, reader.error_position() as usize),
            message: e.to_string(),
        })?;
        let here = || Position::from_offset(text, start);
        match event {
            Event::Start(ref tag) | Event::Empty(ref tag) => {
                let empty = matches!(event, Event::Empty(_));
                if stack.is_empty() && root.is_some() {
                    return Err(MalformedXml {
                        position: here(),
                        message: "content after the root element".into(),
                    });
                }
                let mut element = open_element(tag, text, start)?;
                element.position = here();
                if empty {
                    close(&mut stack, &mut root, element);
                } else {
                    stack.push(element);
                }
            }
            Event::End(_) => {
                let element = stack.pop().ok_or_else(|| MalformedXml {
                    position: here(),
                    message: "closing tag without an open element".into(),
                })?;
                close(&mut stack, &mut root, element);
            }
            Event::Text(t) => {
                let raw = t.unescape().map_err(|e| MalformedXml {
                    position: here(),
                    message: e.to_string(),
                })?;
                append_text(&mut stack, &raw, here)?;
            }
            Event::CData(c) => {
                let raw = String::from_utf8_lossy(&c).into_owned();
                append_text(&mut stack, &raw, here)?;
            }
            Event::Eof => break,
            // declarations, comments, processing instructions, doctypes
            _ => {}
        }
    }

    if let Some(open) = stack.last() {
        return Err(MalformedXml {
            position: Position::from_offset(text, text.len()),
            message: format!("element <{}> opened at {} is never closed", open.name, open.position),
        });
    }
    root.ok_or_else(|| MalformedXml {
        position: Position::from_offset(text, text.len()),
        message: "document has no root element".into(),
    })
}

fn open_element(tag: &BytesStart<'_>, text: &str, start: usize) -> Result<Element, MalformedXml> {
    let name = String::from_utf8_lossy(tag.name().as_ref()).into_owned();
    let mut element = Element::new(name);
    for attr in tag.attributes() {
        let attr = attr.map_err(|e| MalformedXml {
            position: Position::from_offset(text, start),
            message: e.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| MalformedXml {
            position: Position::from_offset(text, start),
            message: e.to_string(),
        })?;
        element.attrs.push((key, value.into_owned()));
    }
    Ok(element)
}

fn close(stack: &mut [Element], root: &mut Option<Element>, mut element: Element) {
    element.text = element.text.trim().to_string();
    match stack.last_mut() {
        Some(parent) => parent.children.push(element),
        None => *root = Some(element),
    }
}

fn append_text(
    stack: &mut [Element],
    raw: &str,
    here: impl Fn() -> Position,
) -> Result<(), MalformedXml> {
    match stack.last_mut() {
        Some(open) => {
            open.text.push_str(raw);
            Ok(())
        }
        None if raw.trim().is_empty() => Ok(()),
        None => Err(MalformedXml {
            position: here(),
            message: "text outside the root element".into(),
        }),
    }
}

/// Writes `root` in canonical form: XML declaration, two-space indentation,
/// attributes sorted by name, empty elements self-closed, trailing newline.
pub fn write_canonical(root: &Element) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_element(&mut out, root, 0);
    out
}

fn write_element(out: &mut String, element: &Element, depth: usize) {
    let indent = "  ".repeat(depth);
    out.push_str(&indent);
    out.push('<');
    out.push_str(&element.name);
    let mut attrs: Vec<&(String, String)> = element.attrs.iter().collect();
    attrs.sort_by(|a, b| a.0.cmp(&b.0));
    for (k, v) in attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        out.push_str(&escape_attr(v));
        out.push('"');
    }
    match (element.children.is_empty(), element.text.is_empty()) {
        (true, true) => out.push_str("/>\n"),
        (true, false) => {
            out.push('>');
            out.push_str(&quick_xml::escape::escape(element.text.as_str()));
            out.push_str("</");
            out.push_str(&element.name);
            out.push_str(">\n");
        }
        (false, _) => {
            out.push_str(">\n");
            if !element.text.is_empty() {
                out.push_str(&"  ".repeat(depth + 1));
                out.push_str(&quick_xml::escape::escape(element.text.as_str()));
                out.push('\n');
            }
            for child in &element.children {
                write_element(out, child, depth + 1);
            }
            out.push_str(&indent);
            out.push_str("</");
            out.push_str(&element.name);
            out.push_str(">\n");
        }
    }
}

fn escape_attr(v: &str) -> String {
    let mut s = String::with_capacity(v.len());
    for c in v.chars() {
        match c {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\n' => s.push_str("&#10;"),
            '\r' => s.push_str("&#13;"),
            '\t' => s.push_str("&#9;"),
            c => s.push(c),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixed_names_are_literal() {
        let root = parse("<spl:policy a='1'><spl:x>  hi </spl:x></spl:policy>").unwrap();
        assert_eq!(root.name, "spl:policy");
        assert_eq!(root.attr("a"), Some("1"));
        assert_eq!(root.children[0].text, "hi");
    }

    #[test]
    fn positions_are_one_based() {
        let root = parse("<a>\n  <b/>\n</a>").unwrap();
        assert_eq!(root.position, Position { line: 1, column: 1 });
        assert_eq!(root.children[0].position, Position { line: 2, column: 3 });
    }

    #[test]
    fn mismatched_end_tag_has_location() {
        let err = parse("<a>\n<b></a>").unwrap_err();
        assert_eq!(err.position.line, 2);
    }

    #[test]
    fn unclosed_root_is_an_error() {
        let err = parse("<a><b/>").unwrap_err();
        assert!(err.message.contains("never closed"), "{err}");
    }

    #[test]
    fn stray_closing_tag_is_an_error() {
        assert!(parse("</a>").is_err());
        assert!(parse("").is_err());
        assert!(parse("<a/><b/>").is_err());
    }

    #[test]
    fn canonical_sorts_attributes() {
        let a = parse(r#"<r z="1" a="2"><c/></r>"#).unwrap();
        let b = parse(r#"<r a="2"   z="1"><c></c></r>"#).unwrap();
        assert_eq!(write_canonical(&a), write_canonical(&b));
        assert_eq!(
            write_canonical(&a),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<r a=\"2\" z=\"1\">\n  <c/>\n</r>\n"
        );
    }

    #[test]
    fn attribute_escapes_survive() {
        let e = Element::new("r").with_attr("v", "a\"<&>\n\tb");
        let back = parse(&write_canonical(&e)).unwrap();
        assert_eq!(back.attr("v"), Some("a\"<&>\n\tb"));
    }
}
