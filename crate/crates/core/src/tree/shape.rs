use std::fmt;

use super::{Label, NodeId};

/// Canonical form of a rooted tree up to leafsomorphism.
///
/// Non-root vertices with a single child are suppressed and siblings are
/// ordered by their smallest leaf key (ties broken by the shape itself).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape<K> {
    Leaf(K),
    Node(Vec<Shape<K>>),
}

impl<K: Ord + Clone> Shape<K> {
    /// Builds the shape of the tree hanging from `root`, where `children`
    /// lists the out-neighbours of a vertex and `key` labels the leaves.
    pub fn build<C, F>(root: NodeId, children: C, key: F) -> Self
    where
        C: Fn(NodeId) -> Vec<NodeId>,
        F: Fn(NodeId) -> K,
    {
        let kids = children(root);
        if kids.is_empty() {
            return Shape::Leaf(key(root));
        }
        let mut parts: Vec<(K, Shape<K>)> = kids
            .into_iter()
            .map(|c| Self::build_inner(c, &children, &key))
            .collect();
        parts.sort();
        Shape::Node(parts.into_iter().map(|(_, s)| s).collect())
    }

    fn build_inner<C, F>(v: NodeId, children: &C, key: &F) -> (K, Self)
    where
        C: Fn(NodeId) -> Vec<NodeId>,
        F: Fn(NodeId) -> K,
    {
        let mut v = v;
        let mut kids = children(v);
        while kids.len() == 1 {
            v = kids[0];
            kids = children(v);
        }
        if kids.is_empty() {
            let k = key(v);
            return (k.clone(), Shape::Leaf(k));
        }
        let mut parts: Vec<(K, Shape<K>)> = kids
            .into_iter()
            .map(|c| Self::build_inner(c, children, key))
            .collect();
        parts.sort();
        let min = parts[0].0.clone();
        (min, Shape::Node(parts.into_iter().map(|(_, s)| s).collect()))
    }

    /// Smallest leaf key.
    pub fn min_key(&self) -> &K {
        match self {
            Shape::Leaf(k) => k,
            Shape::Node(parts) => parts[0].min_key(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Shape::Leaf(_) => 1,
            Shape::Node(parts) => parts.iter().map(Shape::leaf_count).sum(),
        }
    }
}

fn write_shape<K>(
    s: &Shape<K>,
    f: &mut fmt::Formatter<'_>,
    leaf: &dyn Fn(&K, &mut fmt::Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    match s {
        Shape::Leaf(k) => leaf(k, f),
        Shape::Node(parts) => {
            f.write_str("(")?;
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write_shape(p, f, leaf)?;
            }
            f.write_str(")")
        }
    }
}

impl fmt::Display for Shape<Option<Label>> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_shape(self, f, &|k, f| match k {
            Some(l) => write!(f, "{l}"),
            None => Ok(()),
        })
    }
}

impl fmt::Display for Shape<Label> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_shape(self, f, &|k, f| write!(f, "{k}"))
    }
}
