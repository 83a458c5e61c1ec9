use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::text;

/// Half-open range of word offsets into a document's content words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
}

impl WordSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, other: &WordSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionNode {
    pub heading: String,
    pub depth: u8,
    /// Words of this section including every subsection.
    pub span: WordSpan,
    /// Words directly under this heading, before the first nested heading.
    /// Own spans of all nodes partition the document.
    pub own: WordSpan,
    pub parent: Option<usize>,
    /// Sibling indices from the root, e.g. `[0, 1]` for the second child of
    /// the first top-level section.
    pub path: Vec<u16>,
}

/// Sections in document order. Heading lines are structure, not content, so
/// they do not occupy word offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionTree {
    pub nodes: Vec<SectionNode>,
    pub word_count: usize,
}

impl SectionTree {
    pub fn roots(&self) -> impl Iterator<Item = &SectionNode> {
        self.nodes.iter().filter(|n| n.parent.is_none())
    }

    pub fn children(&self, index: usize) -> impl Iterator<Item = &SectionNode> {
        self.nodes.iter().filter(move |n| n.parent == Some(index))
    }
}

pub(crate) struct Scan {
    pub headings: Vec<(usize, u8, String)>,
    pub words: Vec<String>,
}

fn atx_heading(line: &str) -> Option<(u8, String)> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let hashes = rest.len() - rest.trim_start_matches('#').len();
    if hashes == 0 || hashes > 6 {
        return None;
    }
    let after = &rest[hashes..];
    if !after.is_empty() && !after.starts_with([' ', '\t']) {
        return None;
    }
    let title = after.trim().trim_end_matches('#').trim_end();
    Some((hashes as u8, String::from(title)))
}

fn setext_level(line: &str) -> Option<u8> {
    let t = line.trim();
    if !t.is_empty() && t.chars().all(|c| c == '=') {
        Some(1)
    } else if t.len() >= 2 && t.chars().all(|c| c == '-') {
        Some(2)
    } else {
        None
    }
}

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

/// Splits a body into heading events and content words.
pub(crate) fn scan(body: &str) -> Scan {
    let lines: Vec<&str> = body.lines().collect();
    let mut headings = Vec::new();
    let mut words = Vec::new();
    let mut in_fence = false;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if is_fence(line) {
            in_fence = !in_fence;
            words.extend(text::words(line));
            i += 1;
            continue;
        }
        if !in_fence {
            if let Some((depth, title)) = atx_heading(line) {
                headings.push((words.len(), depth, title));
                i += 1;
                continue;
            }
            let next_is_underline = lines.get(i + 1).and_then(|l| setext_level(l));
            if let Some(depth) = next_is_underline {
                if !line.trim().is_empty() && setext_level(line).is_none() {
                    headings.push((words.len(), depth, String::from(line.trim())));
                    i += 2;
                    continue;
                }
            }
        }
        words.extend(text::words(line));
        i += 1;
    }
    Scan { headings, words }
}

/// Builds the section tree of a markdown body. ATX headings (`#`..`######`)
/// and setext headings open sections; text before the first heading becomes
/// an untitled top-level section.
pub fn parse_sections(body: &str) -> Result<SectionTree, IngestError> {
    let scan = scan(body);
    build_tree(&scan)
}

pub(crate) fn build_tree(scan: &Scan) -> Result<SectionTree, IngestError> {
    let total = scan.words.len();
    if total == 0 {
        return Err(IngestError::EmptyDocument);
    }
    let mut nodes: Vec<SectionNode> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut root_count: u16 = 0;

    let first_heading_at = scan.headings.first().map_or(total, |h| h.0);
    if first_heading_at > 0 {
        nodes.push(SectionNode {
            heading: String::new(),
            depth: 1,
            span: WordSpan { start: 0, end: first_heading_at },
            own: WordSpan { start: 0, end: first_heading_at },
            parent: None,
            path: alloc::vec![0],
        });
        root_count = 1;
    }

    for (at, depth, title) in &scan.headings {
        let (at, depth) = (*at, *depth);
        // any heading ends the own text of the most recently opened node
        if let Some(last) = nodes.last_mut() {
            last.own.end = at;
        }
        while let Some(&top) = stack.last() {
            if nodes[top].depth >= depth {
                nodes[top].span.end = at;
                stack.pop();
            } else {
                break;
            }
        }
        let parent = stack.last().copied();
        let path = match parent {
            Some(p) => {
                let siblings = nodes.iter().filter(|n| n.parent == Some(p)).count() as u16;
                let mut path = nodes[p].path.clone();
                path.push(siblings);
                path
            }
            None => {
                root_count += 1;
                alloc::vec![root_count - 1]
            }
        };
        nodes.push(SectionNode {
            heading: title.clone(),
            depth,
            span: WordSpan { start: at, end: total },
            own: WordSpan { start: at, end: total },
            parent,
            path,
        });
        stack.push(nodes.len() - 1);
    }
    for &open in &stack {
        nodes[open].span.end = total;
    }
    Ok(SectionTree { nodes, word_count: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn filler(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn nested_headings_hand_walk() {
        let body = format!("# A\n{}\n## B\n{}\n", filler(100, "a"), filler(50, "b"));
        let tree = parse_sections(&body).unwrap();
        assert_eq!(tree.nodes.len(), 2);
        let a = &tree.nodes[0];
        let b = &tree.nodes[1];
        assert_eq!((a.heading.as_str(), a.depth, a.span), ("A", 1, WordSpan { start: 0, end: 150 }));
        assert_eq!(a.own, WordSpan { start: 0, end: 100 });
        assert_eq!((b.heading.as_str(), b.depth, b.span), ("B", 2, WordSpan { start: 100, end: 150 }));
        assert_eq!(b.parent, Some(0));
        assert_eq!(b.path, alloc::vec![0, 0]);
    }

    #[test]
    fn no_headings_single_root() {
        let tree = parse_sections(&filler(40, "w")).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.nodes[0].span, WordSpan { start: 0, end: 40 });
        assert_eq!(tree.nodes[0].own, tree.nodes[0].span);
    }

    #[test]
    fn empty_body_rejected() {
        assert_eq!(parse_sections(""), Err(IngestError::EmptyDocument));
        assert_eq!(parse_sections("# Only a heading"), Err(IngestError::EmptyDocument));
    }

    #[test]
    fn setext_headings_are_normalized() {
        let body = "Intro\n=====\none two\nSub part\n--------\nthree\n";
        let tree = parse_sections(body).unwrap();
        let headings: Vec<_> = tree.nodes.iter().map(|n| (n.heading.as_str(), n.depth)).collect();
        assert_eq!(headings, alloc::vec![("Intro", 1), ("Sub part", 2)]);
        assert_eq!(tree.nodes[1].own, WordSpan { start: 2, end: 3 });
    }

    #[test]
    fn preamble_and_siblings() {
        let body = "lead in\n# One\nx y\n# Two\nz\n### Deep\nq\n## Mid\nr s";
        let tree = parse_sections(body).unwrap();
        let summary: Vec<_> = tree
            .nodes
            .iter()
            .map(|n| (n.heading.to_string(), n.span.start, n.span.end, n.own.start, n.own.end, n.parent))
            .collect();
        assert_eq!(
            summary,
            alloc::vec![
                ("".to_string(), 0, 2, 0, 2, None),
                ("One".to_string(), 2, 4, 2, 4, None),
                ("Two".to_string(), 4, 8, 4, 5, None),
                ("Deep".to_string(), 5, 6, 5, 6, Some(2)),
                ("Mid".to_string(), 6, 8, 6, 8, Some(2)),
            ]
        );
        assert_eq!(tree.nodes[4].path, alloc::vec![2, 1]);
    }

    #[test]
    fn hashes_inside_code_fences_are_content() {
        let body = "# Real\n```\n# not a heading\n```\ntext";
        let tree = parse_sections(body).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.word_count, 7);
    }

    #[test]
    fn hashtag_without_space_is_content() {
        let tree = parse_sections("#tag words here").unwrap();
        assert_eq!(tree.nodes[0].heading, "");
        assert_eq!(tree.word_count, 3);
    }
}
