//! Main-content extraction and Markdown rendering.
//!
//! Candidate blocks (`article`, `main`, `section`, `div`) are scored as
//! `text_length - 1.5 * link_text_length`, where lengths count
//! non-whitespace characters of visible text. The highest score wins, ties
//! go to the earliest candidate in document order. Without a positive
//! candidate the whole `<body>` is rendered.

use ego_tree::NodeRef;
use scraper::{ElementRef, Html, Node, Selector};

use super::CrawlError;

pub const MIN_CONTENT_CHARS: usize = 20;
const LINK_PENALTY: f64 = 1.5;

const CANDIDATE_TAGS: &[&str] = &["article", "main", "section", "div"];

/// Elements dropped together with their subtree.
const BOILERPLATE_TAGS: &[&str] = &[
    "nav", "header", "footer", "script", "style", "noscript", "template", "form", "input", "button", "select",
    "textarea", "option", "label", "fieldset", "iframe", "svg", "canvas", "object", "embed", "head", "title",
    "meta", "link",
];

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "section", "article", "main", "aside", "ul", "ol", "dl", "dt", "dd", "table", "thead", "tbody",
    "tfoot", "tr", "figure", "figcaption", "address", "details", "summary", "body", "html", "hr",
];

fn is_boilerplate(el: &scraper::node::Element) -> bool {
    BOILERPLATE_TAGS.contains(&el.name()) || el.attr("hidden").is_some() || el.attr("aria-hidden") == Some("true")
}

/// (visible non-whitespace chars, of which inside links)
fn text_stats(node: NodeRef<'_, Node>, in_link: bool) -> (usize, usize) {
    match node.value() {
        Node::Text(t) => {
            let n = t.chars().filter(|c| !c.is_whitespace()).count();
            (n, if in_link { n } else { 0 })
        }
        Node::Element(el) if is_boilerplate(el) => (0, 0),
        Node::Element(el) => {
            let in_link = in_link || el.name() == "a";
            node.children().fold((0, 0), |(t, l), c| {
                let (ct, cl) = text_stats(c, in_link);
                (t + ct, l + cl)
            })
        }
        _ => node.children().fold((0, 0), |(t, l), c| {
            let (ct, cl) = text_stats(c, in_link);
            (t + ct, l + cl)
        }),
    }
}

pub(crate) fn density_score(el: ElementRef<'_>) -> f64 {
    let (text, links) = text_stats(*el, false);
    text as f64 - LINK_PENALTY * links as f64
}

fn inside_boilerplate(el: ElementRef<'_>) -> bool {
    el.ancestors().any(|a| matches!(a.value(), Node::Element(e) if is_boilerplate(e)))
}

/// Picks the main-content element.
pub(crate) fn select_main(document: &Html) -> Option<ElementRef<'_>> {
    let mut best: Option<(f64, ElementRef<'_>)> = None;
    for node in document.tree.root().descendants() {
        let Some(el) = ElementRef::wrap(node) else { continue };
        if !CANDIDATE_TAGS.contains(&el.value().name()) || inside_boilerplate(el) {
            continue;
        }
        let score = density_score(el);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, el));
        }
    }
    match best {
        Some((score, el)) if score > 0.0 => Some(el),
        _ => {
            let body = Selector::parse("body").expect("static selector");
            document.select(&body).next()
        }
    }
}

#[derive(Default)]
struct MarkdownWriter {
    blocks: Vec<String>,
    inline: String,
}

impl MarkdownWriter {
    fn flush(&mut self) {
        let text = collapse(&self.inline);
        if !text.is_empty() {
            self.blocks.push(text);
        }
        self.inline.clear();
    }

    fn visit(&mut self, node: NodeRef<'_, Node>) {
        match node.value() {
            Node::Text(t) => self.inline.push_str(t),
            Node::Element(el) if is_boilerplate(el) => {}
            Node::Element(el) => {
                let name = el.name();
                match name {
                    "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                        self.flush();
                        let level = usize::from(name.as_bytes()[1] - b'0');
                        let text = collapse(&inline_text(node));
                        if !text.is_empty() {
                            self.blocks.push(format!("{} {}", "#".repeat(level), text));
                        }
                    }
                    "li" => {
                        self.flush();
                        let mut inner = MarkdownWriter::default();
                        node.children().for_each(|c| inner.visit(c));
                        inner.flush();
                        for (i, block) in inner.blocks.into_iter().enumerate() {
                            if i == 0 && !block.starts_with("- ") {
                                self.blocks.push(format!("- {block}"));
                            } else {
                                self.blocks.push(block);
                            }
                        }
                    }
                    "blockquote" => {
                        self.flush();
                        let mut inner = MarkdownWriter::default();
                        node.children().for_each(|c| inner.visit(c));
                        inner.flush();
                        self.blocks.extend(inner.blocks.into_iter().map(|b| format!("> {b}")));
                    }
                    "pre" => {
                        self.flush();
                        let text = inline_text(node);
                        let text = text.trim_matches('\n');
                        if !text.trim().is_empty() {
                            self.blocks.push(format!("```\n{text}\n```"));
                        }
                    }
                    "br" => self.flush(),
                    "td" | "th" => {
                        node.children().for_each(|c| self.visit(c));
                        self.inline.push_str(" | ");
                    }
                    "img" => {
                        if let Some(alt) = el.attr("alt") {
                            self.inline.push(' ');
                            self.inline.push_str(alt);
                            self.inline.push(' ');
                        }
                    }
                    _ if BLOCK_TAGS.contains(&name) => {
                        self.flush();
                        node.children().for_each(|c| self.visit(c));
                        self.flush();
                    }
                    _ => node.children().for_each(|c| self.visit(c)),
                }
            }
            _ => node.children().for_each(|c| self.visit(c)),
        }
    }
}

fn inline_text(node: NodeRef<'_, Node>) -> String {
    let mut out = String::new();
    for d in node.descendants() {
        if let Node::Text(t) = d.value() {
            let hidden = d.ancestors().take_while(|a| *a != node).any(|a| matches!(a.value(), Node::Element(e) if is_boilerplate(e)));
            if !hidden {
                out.push_str(t);
            }
        }
    }
    out
}

fn collapse(s: &str) -> String {
    let joined = s.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.trim_end_matches(" |").trim_start_matches("| ").trim().to_owned()
}

/// Extracts the main textual content of a page as Markdown.
pub fn clean_content(raw_html: &str) -> Result<String, CrawlError> {
    let document = Html::parse_document(raw_html);
    let Some(main) = select_main(&document) else {
        return Err(CrawlError::EmptyContent);
    };
    let mut writer = MarkdownWriter::default();
    writer.visit(*main);
    writer.flush();
    let markdown = writer.blocks.join("\n\n");
    let visible = markdown
        .chars()
        .filter(|c| !c.is_whitespace() && !matches!(c, '#' | '-' | '>' | '`' | '|'))
        .count();
    if visible < MIN_CONTENT_CHARS {
        return Err(CrawlError::EmptyContent);
    }
    Ok(markdown + "\n")
}
