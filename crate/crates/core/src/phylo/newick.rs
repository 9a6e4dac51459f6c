use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::nj::{nontrivial, normalize_split, Split};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RootedNode {
    pub label: Option<String>,
    /// Length of the edge to the parent.
    pub length: Option<f64>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootedTree {
    nodes: Vec<RootedNode>,
    root: usize,
}

const SPECIAL: &[char] = &[
    '(', ')', '[', ']', '\'', ':', ';', ',', ' ', '\t', '\n', '\r',
];

fn push_label(out: &mut String, label: &str) {
    if label.is_empty() || label.contains(SPECIAL) {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    } else {
        out.push_str(label);
    }
}

impl RootedTree {
    pub fn new(nodes: Vec<RootedNode>, root: usize) -> Self {
        RootedTree { nodes, root }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[RootedNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &RootedNode {
        &self.nodes[i]
    }

    /// Leaf labels in left-to-right order.
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_leaves(self.root, &mut out);
        out
    }

    fn collect_leaves(&self, u: usize, out: &mut Vec<String>) {
        let n = &self.nodes[u];
        if n.children.is_empty() {
            out.push(n.label.clone().unwrap_or_default());
        }
        for &c in &n.children {
            self.collect_leaves(c, out);
        }
    }

    /// Leaf labels below `u`.
    pub fn clade(&self, u: usize) -> BTreeSet<String> {
        let mut v = Vec::new();
        self.collect_leaves(u, &mut v);
        v.into_iter().collect()
    }

    /// Smallest clade holding all of `labels`, as a node index.
    pub fn common_ancestor(&self, labels: &[&str]) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for u in 0..self.nodes.len() {
            let c = self.clade(u);
            if labels.iter().all(|l| c.contains(*l)) && best.is_none_or(|b| c.len() < b.1) {
                best = Some((u, c.len()));
            }
        }
        best.map(|b| b.0)
    }

    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.emit(self.root, &mut out);
        out.push(';');
        out
    }

    fn emit(&self, u: usize, out: &mut String) {
        let n = &self.nodes[u];
        if !n.children.is_empty() {
            out.push('(');
            for (k, &c) in n.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                self.emit(c, out);
            }
            out.push(')');
        }
        if let Some(l) = &n.label {
            push_label(out, l);
        }
        if let Some(len) = n.length {
            let _ = write!(out, ":{len}");
        }
    }

    /// Leaf bipartitions of every edge with lengths summed; the two edges at
    /// a binary root describe the same split and merge.
    pub fn split_lengths(&self) -> BTreeMap<Split, f64> {
        let labels = self.leaf_labels();
        let smallest = labels.iter().min().cloned().unwrap_or_default();
        let all: Split = labels.into_iter().collect();
        let mut out = BTreeMap::new();
        for u in 0..self.nodes.len() {
            if u == self.root {
                continue;
            }
            let key = normalize_split(self.clade(u), &all, &smallest);
            *out.entry(key).or_insert(0.0) += self.nodes[u].length.unwrap_or(0.0);
        }
        out
    }

    pub fn splits(&self) -> BTreeSet<Split> {
        let n = self.leaf_labels().len();
        nontrivial(self.split_lengths().into_keys(), n)
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: impl Into<String>) -> Error {
        let line = self.text[..self.pos].matches('\n').count() + 1;
        Error::parse(line, format!("{} (at byte {})", msg.into(), self.pos))
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
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

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        match self.peek() {
            Some('\'') => {
                self.pos += 1;
                let mut s = String::new();
                loop {
                    match self.peek() {
                        None => return Err(self.error("unterminated quoted label")),
                        Some('\'') => {
                            self.pos += 1;
                            if self.peek() == Some('\'') {
                                s.push('\'');
                                self.pos += 1;
                            } else {
                                return Ok(Some(s));
                            }
                        }
                        Some(c) => {
                            s.push(c);
                            self.pos += c.len_utf8();
                        }
                    }
                }
            }
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if SPECIAL.contains(&c) {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
                Ok((self.pos > start).then(|| self.text[start..self.pos].to_string()))
            }
        }
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        if self.peek() != Some(':') {
            return Ok(None);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.text[start..self.pos]
            .parse::<f64>()
            .map(Some)
            .map_err(|_| self.error("bad branch length"))
    }

    fn subtree(&mut self, nodes: &mut Vec<RootedNode>, depth: usize) -> Result<usize> {
        if depth > 10_000 {
            return Err(self.error("tree nested too deeply"));
        }
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                children.push(self.subtree(nodes, depth + 1)?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected ',' or ')'")),
                }
            }
        }
        let label = self.label()?;
        if children.is_empty() && label.is_none() {
            return Err(self.error("leaf without label"));
        }
        let length = self.length()?;
        nodes.push(RootedNode {
            label,
            length,
            children,
        });
        Ok(nodes.len() - 1)
    }
}

pub fn parse_newick(text: &str) -> Result<RootedTree> {
    let mut p = Parser { text, pos: 0 };
    let mut nodes = Vec::new();
    let root = p.subtree(&mut nodes, 0)?;
    p.skip_ws();
    if p.peek() != Some(';') {
        return Err(p.error("expected ';'"));
    }
    p.pos += 1;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing text after ';'"));
    }
    Ok(RootedTree { nodes, root })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_canonical_strings() {
        for s in [
            "(A:1,B:1);",
            "((A:1,B:2):0.5,(C:1,D:3):0.5);",
            "(('x y':0.25,'it''s':0.0000001)inner:2,z:0);",
            "(a,(b,c),d);",
        ] {
            let t = parse_newick(s).unwrap();
            assert_eq!(t.to_newick(), s);
        }
        let t = parse_newick("(('x y':1,b:1):1,c:2);").unwrap();
        assert_eq!(t.leaf_labels(), vec!["x y", "b", "c"]);
    }

    #[test]
    fn root_edges_merge_into_one_split() {
        let t = parse_newick("((A:1,B:2):1,(C:1,D:3):0);").unwrap();
        let s = t.split_lengths();
        let cd: Split = ["C", "D"].iter().map(|x| x.to_string()).collect();
        assert_eq!(s[&cd], 1.0);
        assert_eq!(t.splits().len(), 1);
    }

    #[test]
    fn malformed_inputs() {
        for s in [
            "(A,B)",
            "(A,,B);",
            "(A:x,B);",
            "('A,B);",
            "(A,B); extra",
            "(A,B",
        ] {
            assert!(matches!(parse_newick(s), Err(Error::Parse { .. })), "{s}");
        }
    }

    #[test]
    fn common_ancestor_finds_smallest_clade() {
        let t = parse_newick("((a,(b,c)),(d,e));").unwrap();
        let u = t.common_ancestor(&["b", "c"]).unwrap();
        assert_eq!(t.clade(u).len(), 2);
        let u = t.common_ancestor(&["a", "c"]).unwrap();
        assert_eq!(t.clade(u).len(), 3);
    }
}
