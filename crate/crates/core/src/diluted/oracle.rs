//! Exhaustive reference for the matcher on small inputs.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::tree::{Label, NodeId, RootedTree, Shape, UnrootedTree};

use super::is_diluted_subtree;

/// Largest pattern or host leaf count accepted.
pub const ORACLE_LIMIT: usize = 12;

fn check(n: usize) -> Result<()> {
    if n > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { limit: ORACLE_LIMIT, got: n });
    }
    Ok(())
}

/// Vertex masks of all diluted subtrees of `t`, built from the drop choices
/// at each checkpoint.
pub fn diluted_subtrees(t: &RootedTree) -> Result<Vec<Vec<bool>>> {
    check(t.labels().len())?;
    let mut out = Vec::new();
    let mut mask = vec![false; t.len()];
    expand(t, vec![t.root()], &mut mask, &mut out);
    Ok(out)
}

// `pending` holds checkpoints whose 3-balls are not yet chosen.
fn expand(t: &RootedTree, mut pending: Vec<NodeId>, mask: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
    let Some(u) = pending.pop() else {
        out.push(mask.clone());
        return;
    };
    mask[u.index()] = true;
    let mut inner = Vec::new();
    let mut layer = vec![u];
    for _ in 0..2 {
        layer = layer.iter().flat_map(|&x| t.children(x).iter().copied()).collect();
        inner.extend(layer.iter().copied());
    }
    let ggc: Vec<NodeId> = layer.iter().flat_map(|&x| t.children(x).iter().copied()).collect();
    for &x in &inner {
        mask[x.index()] = true;
    }
    let drops: Vec<Option<NodeId>> = std::iter::once(None).chain(ggc.iter().copied().map(Some)).collect();
    for drop in drops {
        let mut next = pending.clone();
        next.extend(ggc.iter().copied().filter(|&w| Some(w) != drop));
        expand(t, next, mask, out);
    }
    for &x in &inner {
        mask[x.index()] = false;
    }
    mask[u.index()] = false;
}

/// Diluted subtrees found by filtering every root-containing subtree through
/// the predicate. Exponential; meant for cross-checking tiny trees.
pub fn diluted_by_filtering(t: &RootedTree) -> Result<Vec<Vec<bool>>> {
    check(t.labels().len())?;
    let mut all: Vec<Vec<bool>> = vec![vec![false; t.len()]];
    all[0][t.root().index()] = true;
    for v in t.preorder_all().into_iter().skip(1) {
        let p = t.parent(v).expect("non-root");
        let mut grown = Vec::new();
        for m in &all {
            if m[p.index()] {
                let mut with = m.clone();
                with[v.index()] = true;
                grown.push(with);
            }
        }
        all.extend(grown);
    }
    let mut out = Vec::new();
    for m in all {
        if is_diluted_subtree(t, &m)? {
            out.push(m);
        }
    }
    Ok(out)
}

/// Canonical shapes of the diluted subtrees of `t`.
pub fn diluted_shapes(t: &RootedTree) -> Result<HashSet<Shape<Option<Label>>>> {
    Ok(diluted_subtrees(t)?
        .into_iter()
        .map(|m| t.forest().extract_filtered(t.root(), |v| m[v.index()]).0.shape())
        .collect())
}

type Directed<'a> = &'a dyn Fn(NodeId, Option<NodeId>) -> Vec<NodeId>;

// Real subtrees rooted at `v` (entered from `from`), as (shape key, shape,
// vertices). Unary non-root vertices are suppressed by the caller's build.
fn real(
    v: NodeId,
    from: Option<NodeId>,
    down: Directed<'_>,
    is_leaf: &dyn Fn(NodeId) -> bool,
) -> Vec<Vec<(NodeId, NodeId)>> {
    let kids = down(v, from);
    if kids.is_empty() {
        return if is_leaf(v) { vec![Vec::new()] } else { Vec::new() };
    }
    let options: Vec<Vec<Vec<(NodeId, NodeId)>>> = kids.iter().map(|&c| real(c, Some(v), down, is_leaf)).collect();
    let mut out = Vec::new();
    for subset in 1u32..(1 << kids.len()) {
        let mut acc: Vec<Vec<(NodeId, NodeId)>> = vec![Vec::new()];
        for (i, &c) in kids.iter().enumerate() {
            if subset & (1 << i) == 0 {
                continue;
            }
            if options[i].is_empty() {
                acc.clear();
                break;
            }
            let mut next = Vec::with_capacity(acc.len() * options[i].len());
            for a in &acc {
                for o in &options[i] {
                    let mut e = a.clone();
                    e.push((v, c));
                    e.extend(o.iter().copied());
                    next.push(e);
                }
            }
            acc = next;
        }
        out.extend(acc);
    }
    out
}

fn shape_of(root: NodeId, edges: &[(NodeId, NodeId)], label: &dyn Fn(NodeId) -> Option<Label>) -> Shape<Option<Label>> {
    Shape::build(
        root,
        |x| edges.iter().filter(|(p, _)| *p == x).map(|&(_, c)| c).collect(),
        label,
    )
}

/// Every host root with a real subtree leafsomorphic to some diluted subtree
/// of the pattern, and one witness (root, sorted vertices).
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub roots: BTreeSet<NodeId>,
    pub witness: Option<(NodeId, Vec<NodeId>)>,
}

fn search(
    candidates: Vec<(Option<NodeId>, NodeId)>,
    wanted: &HashSet<Shape<Option<Label>>>,
    down: Directed<'_>,
    is_leaf: &dyn Fn(NodeId) -> bool,
    label: &dyn Fn(NodeId) -> Option<Label>,
) -> OracleResult {
    let mut roots = BTreeSet::new();
    let mut witness = None;
    for (p, c) in candidates {
        for edges in real(c, p, down, is_leaf) {
            if wanted.contains(&shape_of(c, &edges, label)) {
                roots.insert(c);
                if witness.is_none() {
                    let mut nodes: Vec<NodeId> = edges.iter().map(|&(_, x)| x).collect();
                    nodes.push(c);
                    nodes.sort_unstable();
                    witness = Some((c, nodes));
                }
                break;
            }
        }
    }
    OracleResult { roots, witness }
}

pub fn brute_force_oracle(t: &RootedTree, t_obs: &RootedTree) -> Result<OracleResult> {
    check(t_obs.labels().len())?;
    let wanted = diluted_shapes(t)?;
    let candidates = t_obs.preorder_all().into_iter().map(|v| (t_obs.parent(v), v)).collect();
    let down = |v: NodeId, _: Option<NodeId>| t_obs.children(v).to_vec();
    let label = |v: NodeId| t_obs.label(v);
    Ok(search(candidates, &wanted, &down, &|v| t_obs.is_leaf(v), &label))
}

pub fn brute_force_oracle_unrooted(t: &RootedTree, t_obs: &UnrootedTree) -> Result<OracleResult> {
    check(t_obs.labels().len())?;
    let wanted = diluted_shapes(t)?;
    let mut candidates = Vec::new();
    for v in t_obs.nodes() {
        if t_obs.degree(v) == 2 || t_obs.degree(v) == 0 {
            candidates.push((None, v));
        }
        candidates.extend(t_obs.neighbors(v).iter().map(|&p| (Some(p), v)));
    }
    let down = |v: NodeId, from: Option<NodeId>| {
        t_obs.neighbors(v).iter().copied().filter(|&w| Some(w) != from).collect()
    };
    let label = |v: NodeId| if t_obs.degree(v) <= 1 { t_obs.label(v) } else { None };
    Ok(search(candidates, &wanted, &down, &|v| t_obs.degree(v) <= 1, &label))
}
