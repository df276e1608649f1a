//! Diluted subtrees: the checkpoint predicate, the bottom-up matcher that
//! finds a real subtree of an observed tree leafsomorphic to a diluted
//! subtree of a pattern, and a brute-force oracle.
//!
//! The matcher treats rooted and unrooted hosts alike. A candidate is a
//! directed edge `p -> c` of the host and stands for the component of `c`
//! once the edge is removed, rooted at `c` (`p = None` means the whole tree).
//! A rooted host only offers `parent(c) -> c`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{Forest, Label, NodeId, RootedTree, Shape, UnrootedTree};

pub mod oracle;

/// Leaf key used when comparing a host core with a pattern ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Key {
    Label(Label),
    Node(NodeId),
}

/// Checks the checkpoint conditions for `kept`, a vertex mask of a subtree
/// of `t` that must contain the root.
pub fn is_diluted_subtree(t: &RootedTree, kept: &[bool]) -> Result<bool> {
    if kept.len() != t.len() {
        return Err(Error::InvalidTree("mask length differs from vertex count".into()));
    }
    if !kept[t.root().index()] {
        return Err(Error::NotRootShared);
    }
    let order = t.preorder_all();
    for &v in &order {
        if kept[v.index()] {
            if let Some(p) = t.parent(v) {
                if !kept[p.index()] {
                    return Err(Error::NotRootShared);
                }
            }
        }
    }
    let mut depth = vec![0usize; t.len()];
    for &v in &order {
        if let Some(p) = t.parent(v) {
            depth[v.index()] = depth[p.index()] + 1;
        }
    }
    for &u in &order {
        if !kept[u.index()] || !depth[u.index()].is_multiple_of(3) {
            continue;
        }
        let mut layer = vec![u];
        for k in 1..=3 {
            layer = layer.iter().flat_map(|&x| t.children(x).iter().copied()).collect();
            let full = layer.len();
            let have = layer.iter().filter(|x| kept[x.index()]).count();
            let ok = if k < 3 { have == full } else { full - have <= 1 };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The observed tree as an undirected graph with next-hop and distance
/// tables.
#[derive(Clone, Debug)]
pub struct Host {
    adj: Vec<Vec<NodeId>>,
    label: Vec<Option<Label>>,
    leaf_of: HashMap<Label, NodeId>,
    next: Vec<u32>,
    dist: Vec<u32>,
    /// Candidates grouped by their root vertex.
    candidates: Vec<Vec<Option<NodeId>>>,
}

const NONE: u32 = u32::MAX;

impl Host {
    fn build(adj: Vec<Vec<NodeId>>, label: Vec<Option<Label>>, candidates: Vec<Vec<Option<NodeId>>>) -> Self {
        let n = adj.len();
        let mut next = vec![NONE; n * n];
        let mut dist = vec![NONE; n * n];
        let mut queue = Vec::with_capacity(n);
        for s in 0..n {
            dist[s * n + s] = 0;
            queue.clear();
            queue.push(s);
            let mut head = 0;
            while head < queue.len() {
                let x = queue[head];
                head += 1;
                for w in &adj[x] {
                    let w = w.index();
                    if dist[s * n + w] == NONE {
                        dist[s * n + w] = dist[s * n + x] + 1;
                        next[w * n + s] = x as u32;
                        queue.push(w);
                    }
                }
            }
        }
        let leaf_of = (0..n)
            .filter(|&v| adj[v].len() <= 1)
            .filter_map(|v| label[v].map(|l| (l, NodeId::from(v))))
            .collect();
        Host { adj, label, leaf_of, next, dist, candidates }
    }

    pub fn rooted(t: &RootedTree) -> Self {
        let n = t.len();
        let mut adj = vec![Vec::new(); n];
        let mut candidates = vec![Vec::new(); n];
        for v in t.preorder_all() {
            match t.parent(v) {
                Some(p) => {
                    adj[p.index()].push(v);
                    adj[v.index()].push(p);
                    candidates[v.index()].push(Some(p));
                }
                None => candidates[v.index()].push(None),
            }
        }
        let label = t.nodes().map(|v| if t.is_leaf(v) { t.label(v) } else { None }).collect();
        Self::build(adj, label, candidates)
    }

    pub fn unrooted(t: &UnrootedTree) -> Self {
        let adj: Vec<Vec<NodeId>> = t.nodes().map(|v| t.neighbors(v).to_vec()).collect();
        let candidates = t
            .nodes()
            .map(|v| {
                let mut c: Vec<Option<NodeId>> = t.neighbors(v).iter().copied().map(Some).collect();
                if t.degree(v) == 2 || t.degree(v) == 0 {
                    c.insert(0, None);
                }
                c
            })
            .collect();
        let label = t.nodes().map(|v| t.label(v)).collect();
        Self::build(adj, label, candidates)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn label(&self, v: NodeId) -> Option<Label> {
        self.label[v.index()]
    }

    pub fn leaf(&self, label: Label) -> Option<NodeId> {
        self.leaf_of.get(&label).copied()
    }

    /// Edge count between two vertices.
    #[inline]
    pub fn distance(&self, u: NodeId, v: NodeId) -> u32 {
        self.dist[u.index() * self.len() + v.index()]
    }

    /// Neighbour of `x` on the path towards `toward`.
    #[inline]
    fn next_hop(&self, x: NodeId, toward: NodeId) -> NodeId {
        NodeId(self.next[x.index() * self.len() + toward.index()])
    }

    /// Whether `x` lies in the component of `c` after removing `p -> c`.
    #[inline]
    fn contains(&self, p: Option<NodeId>, c: NodeId, x: NodeId) -> bool {
        match p {
            None => true,
            Some(p) => x == c || self.next_hop(c, x) != p,
        }
    }
}

/// One way of embedding a pattern vertex: candidate `from -> node`, the core
/// tree (minimal subtree over the ball targets) and, for every kept
/// great-grandchild, the index of its own match.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Match {
    pub from: Option<NodeId>,
    pub node: NodeId,
    pub core: Vec<NodeId>,
    pub sub: Vec<(NodeId, usize)>,
    pub dropped: Option<NodeId>,
}

/// An embedded real subtree of the host.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Embedding {
    pub root: NodeId,
    pub from: Option<NodeId>,
    /// Host vertices of the real subtree, sorted.
    pub nodes: Vec<NodeId>,
}

impl Embedding {
    /// Smallest leaf label inside the embedded subtree.
    pub fn min_label(&self, host: &Host) -> Option<Label> {
        self.nodes.iter().filter_map(|&v| host.label(v)).min()
    }
}

/// Pattern-side data of a vertex: its great-grandchildren, the leaves at
/// depth one or two, and the canonical shape of its 3-ball minus each
/// possible dropped great-grandchild.
struct Ball {
    ggc: Vec<NodeId>,
    leaves: Vec<Label>,
    shapes: Vec<(Option<NodeId>, Shape<Key>)>,
}

impl Ball {
    fn new(pattern: &Forest, v: NodeId) -> Self {
        let mut depth: HashMap<NodeId, u8> = HashMap::new();
        let mut ggc = Vec::new();
        let mut leaves = Vec::new();
        let mut stack = vec![(v, 0u8)];
        while let Some((x, d)) = stack.pop() {
            depth.insert(x, d);
            if d == 3 {
                ggc.push(x);
                continue;
            }
            if d > 0 && pattern.is_leaf(x) {
                leaves.push(pattern.label(x).unwrap_or(0));
            }
            for &c in pattern.children(x).iter().rev() {
                stack.push((c, d + 1));
            }
        }
        let drops: Vec<Option<NodeId>> =
            if ggc.is_empty() { vec![None] } else { ggc.iter().copied().map(Some).collect() };
        let shapes = drops
            .into_iter()
            .map(|drop| {
                let s = Shape::build(
                    v,
                    |x| {
                        if depth[&x] >= 3 {
                            Vec::new()
                        } else {
                            pattern.children(x).iter().copied().filter(|&c| Some(c) != drop).collect()
                        }
                    },
                    |x| {
                        if depth[&x] == 3 {
                            Key::Node(x)
                        } else {
                            Key::Label(pattern.label(x).unwrap_or(0))
                        }
                    },
                );
                (drop, s)
            })
            .collect();
        Ball { ggc, leaves, shapes }
    }

    fn shape(&self, drop: Option<NodeId>) -> &Shape<Key> {
        &self.shapes.iter().find(|(d, _)| *d == drop).expect("known drop").1
    }
}

/// Memoised matches of pattern vertices inside one host. Pattern vertices
/// are identified by their id in the caller's [`Forest`], which may grow
/// between calls as long as existing subtrees are left untouched.
#[derive(Clone, Debug)]
pub struct Matcher<'h> {
    host: &'h Host,
    table: Vec<Option<Vec<Match>>>,
}

impl<'h> Matcher<'h> {
    pub fn new(host: &'h Host) -> Self {
        Matcher { host, table: Vec::new() }
    }

    pub fn host(&self) -> &'h Host {
        self.host
    }

    fn cached(&self, v: NodeId) -> Option<&Vec<Match>> {
        self.table.get(v.index()).and_then(Option::as_ref)
    }

    /// All matches of pattern vertex `v`, computing missing descendants
    /// bottom-up.
    pub fn matches(&mut self, pattern: &Forest, v: NodeId) -> &[Match] {
        if self.cached(v).is_none() {
            for x in pattern.postorder(v) {
                if self.cached(x).is_none() {
                    let m = self.compute(pattern, x);
                    if self.table.len() <= x.index() {
                        self.table.resize(x.index() + 1, None);
                    }
                    self.table[x.index()] = Some(m);
                }
            }
        }
        self.cached(v).expect("just computed")
    }

    fn compute(&self, pattern: &Forest, v: NodeId) -> Vec<Match> {
        let host = self.host;
        if pattern.is_leaf(v) {
            let Some(leaf) = pattern.label(v).and_then(|l| host.leaf(l)) else {
                return Vec::new();
            };
            return host.candidates[leaf.index()]
                .iter()
                .map(|&from| Match { from, node: leaf, core: vec![leaf], sub: Vec::new(), dropped: None })
                .collect();
        }
        let ball = Ball::new(pattern, v);
        let mut leaf_nodes = Vec::with_capacity(ball.leaves.len());
        for &l in &ball.leaves {
            match host.leaf(l) {
                Some(x) => leaf_nodes.push((x, Key::Label(l))),
                None => return Vec::new(),
            }
        }
        let sub_matches: Vec<&Vec<Match>> =
            ball.ggc.iter().map(|w| self.cached(*w).expect("children first")).collect();
        if sub_matches.iter().filter(|m| m.is_empty()).count() > 1 {
            return Vec::new();
        }

        let mut out = Vec::new();
        let mut inverse: Vec<Option<usize>> = vec![None; ball.ggc.len()];
        for c in (0..host.len()).map(NodeId::from) {
            if host.adj[c.index()].len() < 2 {
                continue;
            }
            for &p in &host.candidates[c.index()] {
                if !leaf_nodes.iter().all(|&(x, _)| host.contains(p, c, x)) {
                    continue;
                }
                let mut missing = 0;
                for (i, ms) in sub_matches.iter().enumerate() {
                    inverse[i] = ms.iter().position(|m| {
                        m.node != c && host.contains(p, c, m.node) && m.from == Some(host.next_hop(m.node, c))
                    });
                    if inverse[i].is_none() {
                        missing += 1;
                    }
                }
                if missing > 1 {
                    continue;
                }
                // Drop options, tried so that the kept inverses form the
                // lexicographically least sorted id list.
                let drops: Vec<Option<usize>> = if ball.ggc.is_empty() {
                    vec![None]
                } else if missing == 1 {
                    vec![inverse.iter().position(Option::is_none)]
                } else {
                    let mut idx: Vec<usize> = (0..ball.ggc.len()).collect();
                    idx.sort_by_key(|&i| std::cmp::Reverse(sub_matches[i][inverse[i].unwrap()].node));
                    idx.into_iter().map(Some).collect()
                };
                // The core root must branch into exactly two directions.
                let mut dirs: Vec<(NodeId, usize)> = Vec::with_capacity(4);
                let mut bump = |x: NodeId| {
                    let d = host.next_hop(c, x);
                    match dirs.iter_mut().find(|e| e.0 == d) {
                        Some(e) => e.1 += 1,
                        None => dirs.push((d, 1)),
                    }
                };
                for &(x, _) in &leaf_nodes {
                    bump(x);
                }
                for (i, ms) in sub_matches.iter().enumerate() {
                    if let Some(j) = inverse[i] {
                        bump(ms[j].node);
                    }
                }
                if dirs.len() < 2 || dirs.len() > 3 {
                    continue;
                }
                let branches = |drop: Option<usize>| {
                    let gone = drop
                        .and_then(|i| inverse[i].map(|j| host.next_hop(c, sub_matches[i][j].node)))
                        .and_then(|d| dirs.iter().find(|e| e.0 == d && e.1 == 1));
                    dirs.len() - usize::from(gone.is_some()) == 2
                };
                for drop in drops.into_iter().filter(|&d| branches(d)) {
                    let mut targets = leaf_nodes.clone();
                    let mut sub = Vec::new();
                    for (i, w) in ball.ggc.iter().enumerate() {
                        if Some(i) == drop {
                            continue;
                        }
                        let j = inverse[i].expect("kept inverse exists");
                        targets.push((sub_matches[i][j].node, Key::Node(*w)));
                        sub.push((*w, j));
                    }
                    let dropped = drop.map(|i| ball.ggc[i]);
                    if let Some(core) = self.core_if_matching(c, &targets, ball.shape(dropped)) {
                        out.push(Match { from: p, node: c, core, sub, dropped });
                        break;
                    }
                }
            }
        }
        out
    }

    /// Minimal subtree rooted at `c` spanning `targets`; returned if its
    /// shape equals `want`.
    fn core_if_matching(&self, c: NodeId, targets: &[(NodeId, Key)], want: &Shape<Key>) -> Option<Vec<NodeId>> {
        let host = self.host;
        let mut parent: HashMap<NodeId, NodeId> = HashMap::with_capacity(targets.len() * 4);
        let mut key: HashMap<NodeId, Key> = HashMap::with_capacity(targets.len());
        for &(t, k) in targets {
            if t == c || key.insert(t, k).is_some() {
                return None;
            }
        }
        for &(t, _) in targets {
            let mut x = t;
            while x != c && !parent.contains_key(&x) {
                let y = host.next_hop(x, c);
                parent.insert(x, y);
                x = y;
            }
        }
        let mut children: HashMap<NodeId, Vec<NodeId>> = HashMap::with_capacity(parent.len() + 1);
        for (&x, &y) in &parent {
            children.entry(y).or_default().push(x);
        }
        if children.get(&c).map_or(0, Vec::len) != 2 {
            return None;
        }
        if targets.iter().any(|(t, _)| children.contains_key(t)) {
            return None;
        }
        let shape = Shape::build(
            c,
            |x| children.get(&x).cloned().unwrap_or_default(),
            |x| key.get(&x).copied().unwrap_or(Key::Label(0)),
        );
        if &shape != want {
            return None;
        }
        let mut nodes: Vec<NodeId> = parent.keys().copied().collect();
        nodes.push(c);
        nodes.sort_unstable();
        Some(nodes)
    }

    /// Real subtree for match `index` of pattern vertex `v`.
    pub fn embedding(&self, v: NodeId, index: usize) -> Embedding {
        let m = &self.cached(v).expect("matches computed")[index];
        let mut nodes = Vec::new();
        let mut stack = vec![(v, index)];
        while let Some((x, i)) = stack.pop() {
            let mx = &self.cached(x).expect("matches computed")[i];
            nodes.extend(mx.core.iter().copied());
            stack.extend(mx.sub.iter().copied());
        }
        nodes.sort_unstable();
        nodes.dedup();
        Embedding { root: m.node, from: m.from, nodes }
    }

    /// Distinct host roots among the matches of `v`.
    pub fn roots(&mut self, pattern: &Forest, v: NodeId) -> Vec<NodeId> {
        let mut r: Vec<NodeId> = self.matches(pattern, v).iter().map(|m| m.node).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// The embedding of `v` if all matches share one root.
    pub fn unique(&mut self, pattern: &Forest, v: NodeId) -> Scan {
        let roots = self.roots(pattern, v);
        match roots.len() {
            0 => Scan::None,
            1 => Scan::Unique(self.embedding(v, 0)),
            _ => Scan::Ambiguous(roots),
        }
    }

    /// Dump of the memo table over the subtree of `v`.
    pub fn table(&mut self, pattern: &Forest, v: NodeId) -> DilutedTable {
        self.matches(pattern, v);
        let entries = pattern
            .preorder(v)
            .into_iter()
            .map(|x| TableEntry {
                pattern_node: x,
                leaves: pattern.leaf_labels(x),
                matches: self.cached(x).cloned().unwrap_or_default(),
            })
            .collect();
        DilutedTable { entries }
    }
}

/// Outcome of scanning an unrooted host for the root of an embedding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Scan {
    None,
    Unique(Embedding),
    /// Embeddings exist at several distinct roots.
    Ambiguous(Vec<NodeId>),
}

impl Scan {
    pub fn unique(self) -> Option<Embedding> {
        match self {
            Scan::Unique(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableEntry {
    pub pattern_node: NodeId,
    pub leaves: Vec<Label>,
    pub matches: Vec<Match>,
}

/// The memo table `f` with witnesses, for debugging.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilutedTable {
    pub entries: Vec<TableEntry>,
}

/// Root and vertex set of a real subtree of the rooted `t_obs` leafsomorphic
/// to a diluted subtree of `t`, if one exists.
pub fn find_diluted_embedding(t: &RootedTree, t_obs: &RootedTree) -> Option<Embedding> {
    let host = Host::rooted(t_obs);
    let mut m = Matcher::new(&host);
    let found = !m.matches(t, t.root()).is_empty();
    found.then(|| m.embedding(t.root(), 0))
}

/// Like [`find_diluted_embedding`] on an unrooted host, restricted to
/// embeddings rooted at `candidate_root`.
pub fn find_diluted_embedding_unrooted(
    t: &RootedTree,
    t_obs: &UnrootedTree,
    candidate_root: NodeId,
) -> Option<Embedding> {
    let host = Host::unrooted(t_obs);
    let mut m = Matcher::new(&host);
    let i = m.matches(t, t.root()).iter().position(|x| x.node == candidate_root)?;
    Some(m.embedding(t.root(), i))
}

/// Scans every vertex of the unrooted host.
pub fn scan_diluted_roots(t: &RootedTree, t_obs: &UnrootedTree) -> Scan {
    let host = Host::unrooted(t_obs);
    Matcher::new(&host).unique(t, t.root())
}

/// Host vertices of `e` as a rooted tree (rooted at `e.root`, oriented away
/// from `e.from`).
pub fn embedded_tree(host: &Host, e: &Embedding) -> RootedTree {
    let keep: std::collections::HashSet<NodeId> = e.nodes.iter().copied().collect();
    let mut f = Forest::new();
    let root = f.add_node(host.label(e.root));
    let mut stack = vec![(e.from, e.root, root)];
    while let Some((from, v, nv)) = stack.pop() {
        for &w in &host.adj[v.index()] {
            if Some(w) != from && keep.contains(&w) {
                let nw = f.add_child(nv, host.label(w));
                stack.push((Some(v), w, nw));
            }
        }
    }
    RootedTree::from_forest(f, root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> RootedTree {
        RootedTree::from_newick(s).unwrap()
    }

    fn complete3() -> RootedTree {
        t("(((1,2),(3,4)),((5,6),(7,8)));")
    }

    #[test]
    fn predicate_examples() {
        let c = complete3();
        let all = vec![true; c.len()];
        assert!(is_diluted_subtree(&c, &all).unwrap());
        let one = c.leaf(1).unwrap();
        let mut minus1 = all.clone();
        minus1[one.index()] = false;
        assert!(is_diluted_subtree(&c, &minus1).unwrap());
        let mut minus2 = minus1.clone();
        minus2[c.leaf(8).unwrap().index()] = false;
        assert!(!is_diluted_subtree(&c, &minus2).unwrap());
        let mut rootless = all.clone();
        rootless[c.root().index()] = false;
        assert_eq!(is_diluted_subtree(&c, &rootless), Err(Error::NotRootShared));
    }

    #[test]
    fn rooted_examples() {
        let leaf = t("5;");
        let obs = t("((5,1),(2,3));");
        let e = find_diluted_embedding(&leaf, &obs).unwrap();
        assert_eq!(e.nodes, vec![e.root]);
        assert_eq!(obs.label(e.root), Some(5));

        let cherry = t("(1,2);");
        let obs = t("((1,3),2);");
        let e = find_diluted_embedding(&cherry, &obs).unwrap();
        assert_eq!(e.root, obs.root());
        assert!(find_diluted_embedding(&cherry, &t("((1,3),4);")).is_none());
    }

    #[test]
    fn unrooted_examples() {
        let q = UnrootedTree::from_newick("((1,2),(3,4));").unwrap();
        let cherry = t("(1,2);");
        let e = scan_diluted_roots(&cherry, &q).unique().unwrap();
        let mut nb: Vec<_> = q.neighbors(e.root).iter().filter_map(|&v| q.label(v)).collect();
        nb.sort();
        assert_eq!(nb, vec![1, 2]);

        // (1,3) embeds at either internal vertex (through a path), so there
        // is no single root.
        match scan_diluted_roots(&t("(1,3);"), &q) {
            Scan::Ambiguous(r) => assert_eq!(r.len(), 2),
            other => panic!("expected two roots, got {other:?}"),
        }

        let leaf = scan_diluted_roots(&t("4;"), &q).unique().unwrap();
        assert_eq!(q.label(leaf.root), Some(4));
        let x = q.nodes().find(|&v| q.degree(v) == 3).unwrap();
        let y = q.nodes().find(|&v| q.degree(v) == 3 && v != x).unwrap();
        let c12 = if q.neighbors(x).iter().any(|&n| q.label(n) == Some(1)) { x } else { y };
        assert!(find_diluted_embedding_unrooted(&cherry, &q, c12).is_some());
        let other = if c12 == x { y } else { x };
        assert!(find_diluted_embedding_unrooted(&cherry, &q, other).is_none());
    }

    #[test]
    fn embedding_is_leafsomorphic_to_a_diluted_subtree() {
        // Leaf 8 is moved far away; the rest of the pattern is intact.
        let pattern = complete3();
        let obs = t("((((1,2),(3,4)),((5,6),7)),8);");
        let host = Host::rooted(&obs);
        let mut m = Matcher::new(&host);
        assert!(!m.matches(&pattern, pattern.root()).is_empty());
        let e = m.embedding(pattern.root(), 0);
        let sub = embedded_tree(&host, &e);
        assert_eq!(sub.labels(), vec![1, 2, 3, 4, 5, 6, 7]);
        let mut kept = vec![true; pattern.len()];
        kept[pattern.leaf(8).unwrap().index()] = false;
        let (reference, _) = pattern.forest().extract_filtered(pattern.root(), |v| kept[v.index()]);
        assert!(sub.leafsomorphic(&reference));
    }
}
