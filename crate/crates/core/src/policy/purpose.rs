use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// The purpose a rule allows. `Any` is written as an absent `<Purpose>`
/// element or `type="n/a"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PurposeRef {
    Any,
    Id(String),
}

impl PurposeRef {
    pub const ANY_LITERAL: &'static str = "n/a";

    pub fn parse(s: &str) -> Self {
        if s == Self::ANY_LITERAL {
            PurposeRef::Any
        } else {
            PurposeRef::Id(s.to_string())
        }
    }
}

impl fmt::Display for PurposeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PurposeRef::Any => f.write_str("any purpose"),
            PurposeRef::Id(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PurposeError {
    #[error("duplicate purpose {0:?}")]
    DuplicateId(String),
    #[error("purpose {child:?} names unknown parent {parent:?}")]
    UnknownParent { child: String, parent: String },
    #[error("purpose tree has no root")]
    NoRoot,
    #[error("purpose tree has several roots: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("purpose {0:?} is not connected to the root")]
    Detached(String),
    #[error("{0:?} is reserved and cannot name a purpose")]
    Reserved(String),
    #[error("unknown purpose {0:?}")]
    UnknownPurpose(String),
}

/// Rooted tree of purpose ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PurposeTree {
    root: String,
    /// child -> parent; the root is absent.
    parent: BTreeMap<String, String>,
}

impl PurposeTree {
    /// Builds a tree from `(id, parent)` declarations; exactly one entry has
    /// no parent.
    pub fn new<I, S>(entries: I) -> Result<Self, PurposeError>
    where
        I: IntoIterator<Item = (S, Option<S>)>,
        S: Into<String>,
    {
        let mut declared: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (id, parent) in entries {
            let id = id.into();
            if id == PurposeRef::ANY_LITERAL {
                return Err(PurposeError::Reserved(id));
            }
            if declared.insert(id.clone(), parent.map(Into::into)).is_some() {
                return Err(PurposeError::DuplicateId(id));
            }
        }
        let roots: Vec<String> = declared
            .iter()
            .filter(|(_, p)| p.is_none())
            .map(|(id, _)| id.clone())
            .collect();
        let root = match roots.len() {
            0 => return Err(PurposeError::NoRoot),
            1 => roots[0].clone(),
            _ => return Err(PurposeError::MultipleRoots(roots)),
        };
        let mut parent = BTreeMap::new();
        for (id, p) in &declared {
            if let Some(p) = p {
                if !declared.contains_key(p) {
                    return Err(PurposeError::UnknownParent {
                        child: id.clone(),
                        parent: p.clone(),
                    });
                }
                parent.insert(id.clone(), p.clone());
            }
        }
        let tree = PurposeTree { root, parent };
        // every node must reach the root within |nodes| steps
        for id in declared.keys() {
            let mut cur = id;
            let mut steps = 0;
            while let Some(p) = tree.parent.get(cur) {
                cur = p;
                steps += 1;
                if steps > declared.len() {
                    return Err(PurposeError::Detached(id.clone()));
                }
            }
        }
        Ok(tree)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn contains(&self, id: &str) -> bool {
        id == self.root || self.parent.contains_key(id)
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.parent.get(id).map(String::as_str)
    }

    /// All ids, root first, then the rest sorted.
    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        std::iter::once(self.root.as_str()).chain(self.parent.keys().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.parent.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[id, parent, .., root]`
    pub fn ancestry<'a>(&'a self, id: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            out.push(c);
            cur = self.parent_of(c);
        }
        out
    }
}

/// True iff the requested purpose falls within what the rule allows:
/// `Any`, the same purpose, or a descendant of it.
pub fn purpose_compliant(
    requested: &str,
    allowed: &PurposeRef,
    tree: &PurposeTree,
) -> Result<bool, PurposeError> {
    if !tree.contains(requested) {
        return Err(PurposeError::UnknownPurpose(requested.to_string()));
    }
    match allowed {
        PurposeRef::Any => Ok(true),
        PurposeRef::Id(a) if !tree.contains(a) => Err(PurposeError::UnknownPurpose(a.clone())),
        PurposeRef::Id(a) => Ok(tree.ancestry(requested).contains(&a.as_str())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fixture_tree() -> PurposeTree {
        PurposeTree::new([
            ("general", None),
            ("treat", Some("general")),
            ("surgery", Some("treat")),
            ("research", Some("general")),
            ("marketing", Some("general")),
        ])
        .unwrap()
    }

    fn id(s: &str) -> PurposeRef {
        PurposeRef::Id(s.into())
    }

    #[test]
    fn compliance() {
        let t = fixture_tree();
        assert!(purpose_compliant("treat", &id("treat"), &t).unwrap());
        assert!(purpose_compliant("surgery", &id("treat"), &t).unwrap());
        assert!(!purpose_compliant("marketing", &id("research"), &t).unwrap());
        assert!(!purpose_compliant("treat", &id("surgery"), &t).unwrap());
        assert!(purpose_compliant("marketing", &PurposeRef::Any, &t).unwrap());
        assert_eq!(
            purpose_compliant("fishing", &id("treat"), &t),
            Err(PurposeError::UnknownPurpose("fishing".into()))
        );
        assert!(purpose_compliant("treat", &id("fishing"), &t).is_err());
    }

    #[test]
    fn na_is_any() {
        assert_eq!(PurposeRef::parse("n/a"), PurposeRef::Any);
        assert_eq!(PurposeRef::parse("treat"), id("treat"));
    }

    #[test]
    fn tree_errors() {
        assert_eq!(
            PurposeTree::new([("a", None), ("a", None)]),
            Err(PurposeError::DuplicateId("a".into()))
        );
        assert!(matches!(
            PurposeTree::new([("a", None), ("b", None)]),
            Err(PurposeError::MultipleRoots(_))
        ));
        assert!(matches!(
            PurposeTree::new([("a", Some("b")), ("b", Some("a"))]),
            Err(PurposeError::NoRoot)
        ));
        assert!(matches!(
            PurposeTree::new([("r", None), ("a", Some("b")), ("b", Some("a"))]),
            Err(PurposeError::Detached(_))
        ));
        assert!(matches!(
            PurposeTree::new([("r", None), ("a", Some("zz"))]),
            Err(PurposeError::UnknownParent { .. })
        ));
        assert!(matches!(
            PurposeTree::new([("n/a", None)]),
            Err(PurposeError::Reserved(_))
        ));
    }
}
