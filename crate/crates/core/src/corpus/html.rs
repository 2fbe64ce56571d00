//! Conservative HTML-to-text conversion for scraped article bodies.
//!
//! This is a tag stripper, not a readability engine: it drops the contents of
//! a fixed set of non-article elements, turns block-level elements into line
//! breaks, decodes entities and normalizes whitespace.

/// Elements whose entire content is discarded.
const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "template", "head", "nav", "iframe", "svg", "aside", "footer",
];

/// Elements that start or end a line of text.
const BLOCKS: &[&str] = &[
    "address", "article", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption", "figure",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "ol", "p", "pre", "section",
    "table", "tbody", "thead", "tr", "ul",
];

/// Elements rendered as a word separator.
const SEPARATORS: &[&str] = &["td", "th"];

const MAX_PASSES: usize = 16;

/// Converts (possibly malformed) HTML into plain text.
///
/// Lines come from block elements and are joined with `\n`; inside a line all
/// whitespace runs become one space. The function is idempotent: it repeats
/// its pass until the text stops changing, so entity-escaped markup such as
/// `&lt;p&gt;` is handled the same way on the first call and any later one.
pub fn extract_article_text(raw_html: &str) -> String {
    let mut current = single_pass(raw_html);
    for _ in 0..MAX_PASSES {
        let next = single_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn single_pass(input: &str) -> String {
    let stripped = strip_tags(input);
    let decoded = html_escape::decode_html_entities(&stripped);
    normalize_lines(&decoded)
}

fn normalize_lines(text: &str) -> String {
    text.lines()
        .map(crate::text::collapse_whitespace)
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

struct Tag<'a> {
    name: &'a str,
    closing: bool,
    /// Byte index just past the closing `>`.
    end: usize,
}

enum Piece<'a> {
    Text(&'a str),
    Break,
    Space,
    /// Markup that renders as nothing.
    Inline,
}

/// Removes markup. In a document with markup, source line breaks are plain
/// whitespace and only block elements start new lines; text without any
/// markup keeps its lines.
fn strip_tags(input: &str) -> String {
    let pieces = tokenize_markup(input);
    let has_markup = pieces.iter().any(|p| !matches!(p, Piece::Text(_)));
    let mut out = String::with_capacity(input.len());
    for piece in pieces {
        match piece {
            Piece::Text(t) if has_markup => out.extend(t.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c })),
            Piece::Text(t) => out.push_str(t),
            Piece::Break => out.push('\n'),
            Piece::Space => out.push(' '),
            Piece::Inline => {}
        }
    }
    out
}

fn tokenize_markup(input: &str) -> Vec<Piece<'_>> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < input.len() {
        let Some(rel) = input[pos..].find('<') else {
            out.push(Piece::Text(&input[pos..]));
            break;
        };
        let lt = pos + rel;
        out.push(Piece::Text(&input[pos..lt]));

        if input[lt..].starts_with("<!--") {
            pos = match input[lt + 4..].find("-->") {
                Some(i) => lt + 4 + i + 3,
                None => input.len(),
            };
            out.push(Piece::Inline);
            continue;
        }
        if matches!(bytes.get(lt + 1), Some(b'!') | Some(b'?')) {
            pos = match input[lt..].find('>') {
                Some(i) => lt + i + 1,
                None => input.len(),
            };
            out.push(Piece::Inline);
            continue;
        }
        let Some(tag) = parse_tag(input, lt) else {
            // A lone '<' in running text.
            out.push(Piece::Text(&input[lt..lt + 1]));
            pos = lt + 1;
            continue;
        };
        let lower = tag.name.to_ascii_lowercase();
        let name = lower.as_str();
        if !tag.closing && SKIPPED.contains(&name) {
            pos = skip_element(input, tag.end, name);
            out.push(Piece::Break);
            continue;
        }
        out.push(if BLOCKS.contains(&name) {
            Piece::Break
        } else if SEPARATORS.contains(&name) {
            Piece::Space
        } else {
            Piece::Inline
        });
        pos = tag.end;
    }
    out
}

/// Parses a start or end tag beginning at byte `lt`. Returns `None` if the
/// text at `lt` does not look like a tag.
fn parse_tag(input: &str, lt: usize) -> Option<Tag<'_>> {
    let bytes = input.as_bytes();
    let mut i = lt + 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let name_start = i;
    if !bytes.get(i)?.is_ascii_alphabetic() {
        return None;
    }
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-') {
        i += 1;
    }
    let name = &input[name_start..i];
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                return Some(Tag {
                    name,
                    closing,
                    end: i + 1,
                })
            }
            None if b == b'<' => return None,
            None => {}
        }
        i += 1;
    }
    None
}

/// Returns the byte index after the matching `</name ...>`, or the end of the
/// input when the element is never closed.
fn skip_element(input: &str, from: usize, name: &str) -> usize {
    let needle = format!("</{name}");
    let haystack = input[from..].to_ascii_lowercase();
    match haystack.find(&needle) {
        Some(i) => {
            let close = from + i;
            match input[close..].find('>') {
                Some(j) => close + j + 1,
                None => input.len(),
            }
        }
        None => input.len(),
    }
}
