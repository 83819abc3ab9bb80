//! The four access-control ontologies (subjects, objects, actions,
//! attributes) and the reasoning the decision point relies on: is-a
//! subsumption, role inheritance and attribute equivalence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::value::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OntologyKind {
    /// Subjects (people, roles).
    #[serde(rename = "SO")]
    So,
    /// Objects (records, resources).
    #[serde(rename = "OO")]
    Oo,
    /// Actions.
    #[serde(rename = "AO")]
    Ao,
    /// Attributes (credentials, context variables).
    #[serde(rename = "AtO")]
    Ato,
}

impl OntologyKind {
    pub const ALL: [OntologyKind; 4] = [
        OntologyKind::So,
        OntologyKind::Oo,
        OntologyKind::Ao,
        OntologyKind::Ato,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OntologyKind::So => "SO",
            OntologyKind::Oo => "OO",
            OntologyKind::Ao => "AO",
            OntologyKind::Ato => "AtO",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "SO" => Some(OntologyKind::So),
            "OO" => Some(OntologyKind::Oo),
            "AO" => Some(OntologyKind::Ao),
            "AtO" => Some(OntologyKind::Ato),
            _ => None,
        }
    }
}

impl fmt::Display for OntologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concept or individual id qualified by the ontology it lives in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConceptRef {
    pub ontology: OntologyKind,
    pub id: String,
}

impl ConceptRef {
    pub fn new(ontology: OntologyKind, id: impl Into<String>) -> Self {
        ConceptRef {
            ontology,
            id: id.into(),
        }
    }
}

impl fmt::Display for ConceptRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.id, self.ontology)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Concept,
    Individual,
}

/// A credential or attribute: an AtO concept plus the authority that issued it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeDescriptor {
    pub attribute_id: String,
    /// Concept id in the attribute ontology.
    pub name: String,
    pub soa_id: String,
    pub equivalence_enabled: bool,
    pub value: Option<Scalar>,
}

impl AttributeDescriptor {
    pub fn new(name: impl Into<String>, soa_id: impl Into<String>) -> Self {
        let name = name.into();
        AttributeDescriptor {
            attribute_id: name.clone(),
            name,
            soa_id: soa_id.into(),
            equivalence_enabled: false,
            value: None,
        }
    }

    pub fn with_value(mut self, value: impl Into<Scalar>) -> Self {
        self.value = Some(value.into());
        self
    }

    pub fn with_equivalence(mut self, enabled: bool) -> Self {
        self.equivalence_enabled = enabled;
        self
    }
}

/// Reads the `e` flag of an SPL attribute. Only `Enabled` and `Enable`
/// switch equivalence on; every other spelling (and absence) is off.
pub fn equivalence_flag(raw: Option<&str>) -> bool {
    matches!(raw, Some("Enabled") | Some("Enable"))
}

/// Declarations read from an ontology document, in source order and
/// before any validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OntologyDocument {
    pub kind: String,
    pub nodes: Vec<(String, NodeKind)>,
    /// (child, parent)
    pub isa: Vec<(String, String)>,
    /// (junior, senior): the senior role holds every right of the junior.
    pub inherits: Vec<(String, String)>,
    pub equiv: Vec<(String, String)>,
    /// (from, label, to)
    pub arcs: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("{relation} cycle detected: {}", cycle.join(" -> "))]
    CycleDetected {
        relation: &'static str,
        cycle: Vec<String>,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("{element} references undeclared node {id:?}")]
    DanglingReference { element: &'static str, id: String },
    #[error("wrong ontology tag: {0}")]
    WrongOntologyTag(String),
    #[error("individual {child:?} cannot be is-a individual {parent:?}")]
    IndividualIsaIndividual { child: String, parent: String },
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptRef),
}

/// A validated, immutable ontology graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyGraph {
    kind: OntologyKind,
    nodes: BTreeMap<String, NodeKind>,
    /// child -> parents
    parents: BTreeMap<String, BTreeSet<String>>,
    /// senior -> juniors
    juniors: BTreeMap<String, BTreeSet<String>>,
    /// symmetric adjacency
    equiv: BTreeMap<String, BTreeSet<String>>,
    arcs: BTreeSet<(String, String, String)>,
}

impl OntologyGraph {
    /// An ontology with no nodes.
    pub fn empty(kind: OntologyKind) -> Self {
        OntologyGraph {
            kind,
            nodes: BTreeMap::new(),
            parents: BTreeMap::new(),
            juniors: BTreeMap::new(),
            equiv: BTreeMap::new(),
            arcs: BTreeSet::new(),
        }
    }

    /// Validates a document and builds the graph.
    pub fn load(doc: &OntologyDocument) -> Result<Self, OntologyError> {
        let kind = OntologyKind::parse(&doc.kind)
            .ok_or_else(|| OntologyError::WrongOntologyTag(format!("unknown kind {:?}", doc.kind)))?;
        if kind != OntologyKind::So && !doc.inherits.is_empty() {
            return Err(OntologyError::WrongOntologyTag(format!(
                "<inherits> is only allowed in SO, found in {kind}"
            )));
        }
        if kind != OntologyKind::Ato && !doc.equiv.is_empty() {
            return Err(OntologyError::WrongOntologyTag(format!(
                "<equiv> is only allowed in AtO, found in {kind}"
            )));
        }

        let mut g = OntologyGraph::empty(kind);
        for (id, node_kind) in &doc.nodes {
            if g.nodes.insert(id.clone(), *node_kind).is_some() {
                return Err(OntologyError::DuplicateId(id.clone()));
            }
        }
        let declared = |element: &'static str, id: &String| {
            if g.nodes.contains_key(id) {
                Ok(())
            } else {
                Err(OntologyError::DanglingReference {
                    element,
                    id: id.clone(),
                })
            }
        };
        for (child, parent) in &doc.isa {
            declared("isa", child)?;
            declared("isa", parent)?;
        }
        for (junior, senior) in &doc.inherits {
            declared("inherits", junior)?;
            declared("inherits", senior)?;
        }
        for (a, b) in &doc.equiv {
            declared("equiv", a)?;
            declared("equiv", b)?;
        }
        for (from, _, to) in &doc.arcs {
            declared("arc", from)?;
            declared("arc", to)?;
        }

        for (child, parent) in &doc.isa {
            if g.nodes[child] == NodeKind::Individual && g.nodes[parent] == NodeKind::Individual {
                return Err(OntologyError::IndividualIsaIndividual {
                    child: child.clone(),
                    parent: parent.clone(),
                });
            }
            g.parents
                .entry(child.clone())
                .or_default()
                .insert(parent.clone());
        }
        for (junior, senior) in &doc.inherits {
            g.juniors
                .entry(senior.clone())
                .or_default()
                .insert(junior.clone());
        }
        for (a, b) in &doc.equiv {
            if a != b {
                g.equiv.entry(a.clone()).or_default().insert(b.clone());
                g.equiv.entry(b.clone()).or_default().insert(a.clone());
            }
        }
        g.arcs = doc.arcs.iter().cloned().collect();

        if let Some(cycle) = find_cycle(&g.nodes, &g.parents) {
            return Err(OntologyError::CycleDetected {
                relation: "isa",
                cycle,
            });
        }
        if let Some(cycle) = find_cycle(&g.nodes, &g.juniors) {
            return Err(OntologyError::CycleDetected {
                relation: "inherits",
                cycle,
            });
        }
        Ok(g)
    }

    /// Loads a document that must declare the given kind.
    pub fn load_as(expected: OntologyKind, doc: &OntologyDocument) -> Result<Self, OntologyError> {
        let g = Self::load(doc)?;
        if g.kind != expected {
            return Err(OntologyError::WrongOntologyTag(format!(
                "expected {expected} document, got {}",
                g.kind
            )));
        }
        Ok(g)
    }

    pub fn kind(&self) -> OntologyKind {
        self.kind
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        self.nodes.get(id).copied()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.nodes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// (child, parent) pairs in sorted order.
    pub fn isa_edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.parents
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (c.as_str(), p.as_str())))
    }

    /// (junior, senior) pairs in sorted order of senior.
    pub fn inherit_edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.juniors
            .iter()
            .flat_map(|(s, js)| js.iter().map(move |j| (j.as_str(), s.as_str())))
    }

    /// Unordered equivalence pairs, each reported once with `a < b`.
    pub fn equiv_edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.equiv.iter().flat_map(|(a, bs)| {
            bs.iter()
                .filter(move |b| a.as_str() < b.as_str())
                .map(move |b| (a.as_str(), b.as_str()))
        })
    }

    pub fn arcs(&self) -> impl Iterator<Item = &(String, String, String)> + '_ {
        self.arcs.iter()
    }

    /// Nodes without an is-a parent.
    pub fn roots(&self) -> impl Iterator<Item = &str> + '_ {
        self.nodes
            .keys()
            .filter(|id| self.parents.get(*id).is_none_or(|p| p.is_empty()))
            .map(String::as_str)
    }

    pub fn require(&self, id: &str) -> Result<(), OntologyError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(OntologyError::UnknownConcept(ConceptRef::new(self.kind, id)))
        }
    }

    /// True iff `ancestor == descendant` or an is-a path leads from
    /// `descendant` up to `ancestor`.
    pub fn subsumes(&self, ancestor: &str, descendant: &str) -> Result<bool, OntologyError> {
        Ok(self.isa_path(ancestor, descendant)?.is_some())
    }

    /// Shortest is-a chain `[descendant, .., ancestor]`, if any.
    pub fn isa_path(
        &self,
        ancestor: &str,
        descendant: &str,
    ) -> Result<Option<Vec<String>>, OntologyError> {
        self.require(ancestor)?;
        self.require(descendant)?;
        Ok(shortest_path(&self.parents, descendant, ancestor))
    }

    /// The roles whose rights `role` holds: itself plus every role reachable
    /// over inherit edges from senior to junior.
    pub fn inherited_rights_roles(&self, role: &str) -> Result<BTreeSet<String>, OntologyError> {
        self.require(role)?;
        Ok(reachable(&self.juniors, role))
    }

    /// Inheritance chain `[role, .., junior]` explaining why `role` holds
    /// `junior`'s rights.
    pub fn inheritance_path(&self, role: &str, junior: &str) -> Option<Vec<String>> {
        shortest_path(&self.juniors, role, junior)
    }

    /// Names accepted in place of `attr.name`: its equivalence class when
    /// the descriptor enables equivalence, else just the name.
    pub fn equivalent_attributes(
        &self,
        attr: &AttributeDescriptor,
    ) -> Result<BTreeSet<String>, OntologyError> {
        self.require(&attr.name)?;
        if attr.equivalence_enabled {
            Ok(reachable(&self.equiv, &attr.name))
        } else {
            Ok(BTreeSet::from([attr.name.clone()]))
        }
    }
}

fn reachable(adj: &BTreeMap<String, BTreeSet<String>>, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([start.to_string()]);
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(n) = queue.pop_front() {
        for next in adj.get(&n).into_iter().flatten() {
            if seen.insert(next.clone()) {
                queue.push_back(next.clone());
            }
        }
    }
    seen
}

fn shortest_path(
    adj: &BTreeMap<String, BTreeSet<String>>,
    from: &str,
    to: &str,
) -> Option<Vec<String>> {
    let mut prev: BTreeMap<String, String> = BTreeMap::new();
    let mut queue = VecDeque::from([from.to_string()]);
    let mut seen = BTreeSet::from([from.to_string()]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            let mut path = vec![n.clone()];
            let mut cur = n;
            while let Some(p) = prev.get(&cur) {
                path.push(p.clone());
                cur = p.clone();
            }
            path.reverse();
            return Some(path);
        }
        for next in adj.get(&n).into_iter().flatten() {
            if seen.insert(next.clone()) {
                prev.insert(next.clone(), n.clone());
                queue.push_back(next.clone());
            }
        }
    }
    None
}

/// Depth-first search for a cycle; returns it closed (`[a, b, a]`).
fn find_cycle(
    nodes: &BTreeMap<String, NodeKind>,
    adj: &BTreeMap<String, BTreeSet<String>>,
) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    for start in nodes.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // (node, index of next neighbour to try)
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::Open);
        while let Some(&mut (node, ref mut idx)) = stack.last_mut() {
            let next = adj.get(node).and_then(|s| s.iter().nth(*idx));
            *idx += 1;
            match next {
                Some(n) => match marks.get(n.as_str()) {
                    Some(Mark::Open) => {
                        let from = stack.iter().position(|(s, _)| *s == n).unwrap_or(0);
                        let mut cycle: Vec<String> =
                            stack[from..].iter().map(|(s, _)| s.to_string()).collect();
                        cycle.push(n.clone());
                        return Some(cycle);
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(n, Mark::Open);
                        stack.push((n, 0));
                    }
                },
                None => {
                    marks.insert(node, Mark::Done);
                    stack.pop();
                }
            }
        }
    }
    None
}

/// The four graphs a policy is interpreted over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontologies {
    pub so: OntologyGraph,
    pub oo: OntologyGraph,
    pub ao: OntologyGraph,
    pub ato: OntologyGraph,
}

impl Ontologies {
    pub fn empty() -> Self {
        Ontologies {
            so: OntologyGraph::empty(OntologyKind::So),
            oo: OntologyGraph::empty(OntologyKind::Oo),
            ao: OntologyGraph::empty(OntologyKind::Ao),
            ato: OntologyGraph::empty(OntologyKind::Ato),
        }
    }

    pub fn get(&self, kind: OntologyKind) -> &OntologyGraph {
        match kind {
            OntologyKind::So => &self.so,
            OntologyKind::Oo => &self.oo,
            OntologyKind::Ao => &self.ao,
            OntologyKind::Ato => &self.ato,
        }
    }

    pub fn set(&mut self, graph: OntologyGraph) {
        match graph.kind() {
            OntologyKind::So => self.so = graph,
            OntologyKind::Oo => self.oo = graph,
            OntologyKind::Ao => self.ao = graph,
            OntologyKind::Ato => self.ato = graph,
        }
    }
}
