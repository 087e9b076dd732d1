//! Newick reading and canonical writing.
//!
//! Children are written in order of subtree leaf count, then smallest leaf
//! label. Lengths use six significant digits; a negative raw length is
//! written as `:0[raw=<value>]` and restored on parse. An unrooted tree is
//! written from the internal node next to its smallest leaf, so its top
//! level has three or more children; a rooted tree's top level has exactly
//! two. Two-leaf unrooted trees are written as `(B:len)A;`.

use super::tree::{Edge, PhyloTree};
use crate::error::{Error, Result};
use crate::util::fmt_sig;

const META: &[char] = &['(', ')', '[', ']', '\'', ':', ';', ',', ' ', '\t', '\n', '\r'];

pub fn quote_label(label: &str) -> String {
    if label.is_empty() || label.contains(META) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

fn fmt_length(e: &Edge) -> String {
    if e.raw_length < 0.0 {
        format!(":0[raw={}]", fmt_sig(e.raw_length, 6))
    } else {
        format!(":{}", fmt_sig(e.raw_length, 6))
    }
}

struct Writer<'a> {
    t: &'a PhyloTree,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Writer<'_> {
    /// (leaf count, smallest leaf label) of the subtree at `node` away from `parent`.
    fn summary(&self, node: usize, parent: usize) -> (usize, String) {
        let children: Vec<usize> = self.adj[node].iter().map(|&(v, _)| v).filter(|&v| v != parent).collect();
        if children.is_empty() {
            return (1, self.t.label(node).unwrap_or_default().to_string());
        }
        children
            .into_iter()
            .map(|c| self.summary(c, node))
            .fold((0, String::new()), |(n, m), (cn, cm)| {
                (n + cn, if m.is_empty() || cm < m { cm } else { m })
            })
    }

    fn children(&self, node: usize, parent: usize) -> Vec<(usize, usize)> {
        let mut kids: Vec<((usize, String), usize, usize)> = self.adj[node]
            .iter()
            .filter(|&&(v, _)| v != parent)
            .map(|&(v, k)| (self.summary(v, node), v, k))
            .collect();
        kids.sort_by(|a, b| a.0.cmp(&b.0));
        kids.into_iter().map(|(_, v, k)| (v, k)).collect()
    }

    fn write(&self, node: usize, parent: usize, out: &mut String) {
        let kids = self.children(node, parent);
        if !kids.is_empty() {
            out.push('(');
            for (i, &(v, k)) in kids.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write(v, node, out);
                out.push_str(&fmt_length(&self.t.edges()[k]));
            }
            out.push(')');
        }
        if let Some(l) = self.t.label(node) {
            out.push_str(&quote_label(l));
        }
    }
}

pub fn to_newick(t: &PhyloTree) -> String {
    let w = Writer {
        t,
        adj: t.adjacency(),
    };
    let top = match t.root() {
        Some(r) => r,
        None => {
            let first = t.leaves()[0];
            if t.leaf_count() == 2 || w.adj[first].is_empty() {
                first
            } else {
                w.adj[first][0].0
            }
        }
    };
    let mut out = String::new();
    w.write(top, usize::MAX, &mut out);
    out.push(';');
    out
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
    labels: Vec<Option<String>>,
    edges: Vec<Edge>,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Newick {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(self.err("unterminated quoted label")),
                    Some('\'') => {
                        self.pos += 1;
                        if self.peek() == Some('\'') {
                            out.push('\'');
                            self.pos += 1;
                        } else {
                            return Ok(Some(out));
                        }
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += c.len_utf8();
                    }
                }
            }
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if META.contains(&c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        Ok((self.pos > start).then(|| self.s[start..self.pos].to_string()))
    }

    /// Optional `:length` followed by optional bracket comments.
    fn length(&mut self) -> Result<Option<f64>> {
        if !self.eat(':') {
            return Ok(None);
        }
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = &self.s[start..self.pos];
        let mut len: f64 = text.parse().map_err(|_| Error::Newick {
            offset: start,
            message: format!("invalid branch length `{text}`"),
        })?;
        while self.eat('[') {
            let body_start = self.pos;
            let end = self.s[self.pos..]
                .find(']')
                .ok_or_else(|| self.err("unterminated comment"))?;
            let body = &self.s[body_start..body_start + end];
            self.pos = body_start + end + 1;
            if let Some(raw) = body.strip_prefix("raw=") {
                len = raw.trim().parse().map_err(|_| Error::Newick {
                    offset: body_start,
                    message: format!("invalid raw length `{raw}`"),
                })?;
            }
        }
        if !len.is_finite() {
            return Err(Error::Newick {
                offset: start,
                message: "branch length is not finite".into(),
            });
        }
        Ok(Some(len))
    }

    /// Parses a subtree and returns its node id.
    fn subtree(&mut self) -> Result<usize> {
        let node = self.labels.len();
        self.labels.push(None);
        if self.eat('(') {
            loop {
                let child = self.subtree()?;
                let len = self.length()?.unwrap_or(0.0);
                self.edges.push(Edge {
                    a: node,
                    b: child,
                    raw_length: len,
                });
                if self.eat(',') {
                    continue;
                }
                if self.eat(')') {
                    break;
                }
                return Err(self.err("expected `,` or `)`"));
            }
        }
        let label = self.label()?;
        if label.is_none() && self.edges.iter().all(|e| e.a != node) {
            return Err(self.err("leaf without a label"));
        }
        self.labels[node] = label;
        Ok(node)
    }
}

/// Parses one Newick tree. The tree is rooted iff its top node has exactly
/// two children.
pub fn parse_newick(s: &str) -> Result<PhyloTree> {
    let mut p = Parser {
        s,
        pos: 0,
        labels: Vec::new(),
        edges: Vec::new(),
    };
    let top = p.subtree()?;
    p.length()?;
    if !p.eat(';') {
        return Err(p.err("expected `;`"));
    }
    p.skip_ws();
    if p.pos != s.len() {
        return Err(p.err("trailing input after `;`"));
    }
    let top_children = p.edges.iter().filter(|e| e.a == top).count();
    let root = (top_children == 2 && p.labels[top].is_none()).then_some(top);
    PhyloTree::new(p.labels, p.edges, root).map_err(|e| Error::Newick {
        offset: 0,
        message: e.to_string(),
    })
}
