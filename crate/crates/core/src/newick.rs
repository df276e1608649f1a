//! Newick reading and writing.
//!
//! ```text
//! tree       := subtree [":" length] [annotation] ";"
//! subtree    := "(" subtree ("," subtree)* ")" [name] suffix
//!             | label suffix
//! suffix     := [":" length] [annotation] | annotation ":" length
//! annotation := "[&" key "=" number ("," key "=" number)* "]"
//! key        := "lambda" | "mu"
//! ```
//!
//! Leaf labels are positive integers; internal names are accepted and
//! dropped. Output orders children by smallest leaf label, and writes
//! `lambda`/`mu` annotations only where they differ from 0 and 1.

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tree::{Forest, Label, NodeId, RootedTree, SpeciesPhylogeny, WeightedTree};

/// Raw parse result: topology plus optional per-edge values.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub tree: RootedTree,
    pub length: Vec<Option<f64>>,
    pub lambda: Vec<Option<f64>>,
    pub mu: Vec<Option<f64>>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    forest: Forest,
    length: Vec<Option<f64>>,
    lambda: Vec<Option<f64>>,
    mu: Vec<Option<f64>>,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Newick { offset, message: message.into() })
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => err(self.pos, format!("expected '{}', found '{}'", c as char, x as char)),
            None => err(self.pos, format!("expected '{}', found end of input", c as char)),
        }
    }

    fn token(&mut self) -> (usize, &'a str) {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if b"(),:;[]=".contains(&c) || c.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        (start, s)
    }

    fn number(&mut self) -> Result<f64> {
        let (at, tok) = self.token();
        match tok.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => err(at, format!("invalid number '{tok}'")),
        }
    }

    fn new_node(&mut self, label: Option<Label>) -> NodeId {
        self.length.push(None);
        self.lambda.push(None);
        self.mu.push(None);
        self.forest.add_node(label)
    }

    fn subtree(&mut self) -> Result<NodeId> {
        let v = if self.peek() == Some(b'(') {
            self.pos += 1;
            let v = self.new_node(None);
            loop {
                let c = self.subtree()?;
                self.forest.attach(v, c);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(x) => return err(self.pos, format!("expected ',' or ')', found '{}'", x as char)),
                    None => return err(self.pos, "expected ',' or ')', found end of input"),
                }
            }
            let _ = self.token();
            v
        } else {
            let (at, tok) = self.token();
            if tok.is_empty() {
                return match self.src.get(at) {
                    Some(&x) => err(at, format!("expected a leaf label, found '{}'", x as char)),
                    None => err(at, "expected a leaf label, found end of input"),
                };
            }
            match tok.parse::<Label>() {
                Ok(l) if l > 0 => self.new_node(Some(l)),
                _ => return err(at, format!("leaf label '{tok}' is not a positive integer")),
            }
        };
        self.suffix(v)?;
        Ok(v)
    }

    fn suffix(&mut self, v: NodeId) -> Result<()> {
        self.length_opt(v)?;
        if self.peek() == Some(b'[') {
            let open = self.pos;
            self.pos += 1;
            if self.src.get(self.pos) != Some(&b'&') {
                return err(self.pos, "annotation must start with '[&'");
            }
            self.pos += 1;
            loop {
                let (at, key) = self.token();
                let key = key.to_string();
                self.expect(b'=')?;
                let x = self.number()?;
                match key.as_str() {
                    "lambda" => self.lambda[v.index()] = Some(x),
                    "mu" => self.mu[v.index()] = Some(x),
                    _ => return err(at, format!("unknown annotation key '{key}'")),
                }
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return err(self.pos, format!("unterminated annotation opened at {open}")),
                }
            }
            if self.length[v.index()].is_none() {
                self.length_opt(v)?;
            }
        }
        Ok(())
    }

    fn length_opt(&mut self, v: NodeId) -> Result<()> {
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.length[v.index()] = Some(self.number()?);
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<Parsed> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        forest: Forest::new(),
        length: Vec::new(),
        lambda: Vec::new(),
        mu: Vec::new(),
    };
    let root = p.subtree()?;
    p.expect(b';')?;
    if p.peek().is_some() {
        return err(p.pos, "trailing input after ';'");
    }
    let tree = RootedTree::from_forest(p.forest, root);
    let mut seen = std::collections::HashSet::new();
    for l in tree.preorder_all().into_iter().filter_map(|v| tree.label(v)) {
        if !seen.insert(l) {
            return Err(Error::InvalidTree(format!("label {l} used twice")));
        }
    }
    Ok(Parsed { tree, length: p.length, lambda: p.lambda, mu: p.mu })
}

impl Parsed {
    pub fn topology(self) -> Result<RootedTree> {
        Ok(self.tree)
    }

    fn lengths<W: Scalar>(&self) -> Result<Vec<W>> {
        let root = self.tree.root();
        self.tree
            .nodes()
            .map(|v| match (v == root, self.length[v.index()]) {
                (true, _) => Ok(W::zero()),
                (false, Some(x)) => Ok(W::of(x)),
                (false, None) => Err(Error::InvalidTree(format!("edge above {v} has no length"))),
            })
            .collect()
    }

    pub fn weighted<W: Scalar>(self) -> Result<WeightedTree<W>> {
        let w = self.lengths()?;
        WeightedTree::new(self.tree, w)
    }

    /// Phylogeny with times from branch lengths; `lambda` defaults to 0 and
    /// `mu` to 1.
    pub fn species<W: Scalar>(self) -> Result<SpeciesPhylogeny<W>> {
        let time = self.lengths()?;
        let lambda = self.lambda.iter().map(|x| W::of(x.unwrap_or(0.0))).collect();
        let mu = self.mu.iter().map(|x| W::of(x.unwrap_or(1.0))).collect();
        SpeciesPhylogeny::new(self.tree, time, lambda, mu)
    }
}

/// Writes `tree` with children in canonical order. `length` produces branch
/// lengths for non-root vertices; `annotation` the text inside `[&...]`.
pub fn write(
    tree: &RootedTree,
    length: Option<&dyn Fn(NodeId) -> String>,
    annotation: &dyn Fn(NodeId) -> Option<String>,
) -> String {
    let mut key = vec![Label::MAX; tree.len()];
    for v in tree.postorder_all() {
        if let (true, Some(l)) = (tree.is_leaf(v), tree.label(v)) {
            key[v.index()] = l;
        }
        for &c in tree.children(v) {
            key[v.index()] = key[v.index()].min(key[c.index()]);
        }
    }
    let mut out = String::new();
    // (vertex, next child position); emit on first and last visit.
    let mut stack: Vec<(NodeId, usize)> = vec![(tree.root(), 0)];
    let mut sorted: Vec<Vec<NodeId>> = vec![Vec::new(); tree.len()];
    while let Some(&(v, i)) = stack.last() {
        if i == 0 {
            let mut kids = tree.children(v).to_vec();
            kids.sort_by_key(|c| key[c.index()]);
            if !kids.is_empty() {
                out.push('(');
            }
            sorted[v.index()] = kids;
        }
        let n_kids = sorted[v.index()].len();
        if i < n_kids {
            if i > 0 {
                out.push(',');
            }
            let c = sorted[v.index()][i];
            stack.last_mut().expect("nonempty").1 += 1;
            stack.push((c, 0));
            continue;
        }
        if n_kids > 0 {
            out.push(')');
        } else if let Some(l) = tree.label(v) {
            out.push_str(&l.to_string());
        }
        if v != tree.root() {
            if let Some(len) = length {
                out.push(':');
                out.push_str(&len(v));
            }
        }
        if let Some(a) = annotation(v) {
            out.push_str("[&");
            out.push_str(&a);
            out.push(']');
        }
        stack.pop();
    }
    out.push(';');
    out
}

pub fn write_species<W: Scalar>(s: &SpeciesPhylogeny<W>) -> String {
    let root = s.root();
    write(s.tree(), Some(&|v| s.time(v).to_string()), &|v| {
        if v == root {
            return None;
        }
        let mut parts = Vec::new();
        if s.hgt_rate(v) != W::zero() {
            parts.push(format!("lambda={}", s.hgt_rate(v)));
        }
        if s.subst_rate(v) != W::one() {
            parts.push(format!("mu={}", s.subst_rate(v)));
        }
        (!parts.is_empty()).then(|| parts.join(","))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_balanced_with_lengths() {
        let s: SpeciesPhylogeny<f64> =
            SpeciesPhylogeny::from_newick("((1:1,2:1):1,(3:1,4:1):1);").unwrap();
        assert!(s.validate().is_empty());
        assert_eq!(s.species_metric(1, 3).unwrap(), 4.0);
        assert_eq!(s.to_newick(), "((1:1,2:1):1,(3:1,4:1):1);");
    }

    #[test]
    fn round_trip_is_canonical() {
        let text = "((4:0.5,3:0.5):1.25[&lambda=0.3],(2:1,1:1)[&mu=2]:0.75);";
        let s: SpeciesPhylogeny<f64> = SpeciesPhylogeny::from_newick(text).unwrap();
        let out = s.to_newick();
        assert_eq!(out, "((1:1,2:1):0.75[&mu=2],(3:0.5,4:0.5):1.25[&lambda=0.3]);");
        let again: SpeciesPhylogeny<f64> = SpeciesPhylogeny::from_newick(&out).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_newick(), out);
    }

    #[test]
    fn error_offsets() {
        let off = |s: &str| match parse(s) {
            Err(Error::Newick { offset, .. }) => offset,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(off("((1,2)"), 6);
        assert_eq!(off("((1,2),3)"), 9);
        assert_eq!(off("(1,x);"), 3);
        assert_eq!(off("(1:abc,2);"), 3);
        assert_eq!(off("(1,2)[&foo=1];"), 7);
        assert_eq!(off("(1,2);x"), 6);
        assert!(matches!(parse("(1,1);"), Err(Error::InvalidTree(_))));
    }

    #[test]
    fn whitespace_and_internal_names() {
        let t = RootedTree::from_newick(" ( (1 , 2)ab : 1 , 3 ) root ;\n").unwrap();
        assert!(t.leafsomorphic(&RootedTree::from_newick("((1,2),3);").unwrap()));
    }
}
