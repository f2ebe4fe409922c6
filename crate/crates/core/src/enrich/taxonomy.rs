//! Venue category hierarchy and its mapping onto vocabulary terms.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

/// Term used when neither a category nor any of its ancestors is mapped.
pub const DEFAULT_TERM: &str = "schema:Place";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("category `{0}` is listed twice")]
    Duplicate(String),
    #[error("category `{child}` refers to unknown parent `{parent}`")]
    UnknownParent { child: String, parent: String },
    #[error("category `{0}` is part of a parent cycle")]
    Cycle(String),
}

/// Rooted forest of categories; every non-root has exactly one parent.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    nodes: HashMap<String, Category>,
}

impl Taxonomy {
    pub fn new(entries: Vec<(String, Category)>) -> Result<Self, TaxonomyError> {
        let mut nodes = HashMap::with_capacity(entries.len());
        for (id, category) in entries {
            if nodes.contains_key(&id) {
                return Err(TaxonomyError::Duplicate(id));
            }
            nodes.insert(id, category);
        }
        for (id, category) in &nodes {
            if let Some(parent) = &category.parent {
                if !nodes.contains_key(parent) {
                    return Err(TaxonomyError::UnknownParent {
                        child: id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        let taxonomy = Self { nodes };
        let mut acyclic: HashSet<&str> = HashSet::new();
        for id in taxonomy.nodes.keys() {
            let mut path = HashSet::new();
            let mut cursor = Some(id.as_str());
            while let Some(current) = cursor {
                if acyclic.contains(current) {
                    break;
                }
                if !path.insert(current) {
                    return Err(TaxonomyError::Cycle(current.to_owned()));
                }
                cursor = taxonomy.nodes[current].parent.as_deref();
            }
            acyclic.extend(path);
        }
        Ok(taxonomy)
    }

    pub fn get(&self, id: &str) -> Option<&Category> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The category itself followed by its ancestors up to the root.
    pub fn lineage<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let start = self.nodes.get_key_value(id).map(|(k, _)| k.as_str());
        std::iter::successors(start, move |current| self.nodes[*current].parent.as_deref())
    }
}

/// Category id to vocabulary term (CURIE such as `schema:BarOrPub`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryMapping {
    terms: HashMap<String, String>,
}

impl CategoryMapping {
    pub fn new(terms: HashMap<String, String>) -> Self {
        Self { terms }
    }

    pub fn get(&self, category_id: &str) -> Option<&str> {
        self.terms.get(category_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// How a term was found for a category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Direct,
    Ancestor(String),
    /// Known category with no mapped ancestor.
    Default,
    /// Category absent from the taxonomy.
    Unknown,
}

/// Maps a category to a term, falling back to the nearest mapped ancestor
/// and finally to [`DEFAULT_TERM`]. Never fails.
pub fn map_category<'a>(
    category_id: &str,
    mapping: &'a CategoryMapping,
    taxonomy: &Taxonomy,
) -> (&'a str, Resolution) {
    if let Some(term) = mapping.get(category_id) {
        return (term, Resolution::Direct);
    }
    if !taxonomy.contains(category_id) {
        tracing::warn!(category_id, "category missing from taxonomy, using default term");
        return (DEFAULT_TERM, Resolution::Unknown);
    }
    for ancestor in taxonomy.lineage(category_id).skip(1) {
        if let Some(term) = mapping.get(ancestor) {
            return (term, Resolution::Ancestor(ancestor.to_owned()));
        }
    }
    (DEFAULT_TERM, Resolution::Default)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, parent: Option<&str>) -> (String, Category) {
        (
            id.to_owned(),
            Category {
                name: id.to_uppercase(),
                parent: parent.map(str::to_owned),
            },
        )
    }

    fn mapping(rows: &[(&str, &str)]) -> CategoryMapping {
        CategoryMapping::new(
            rows.iter()
                .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
                .collect(),
        )
    }

    #[test]
    fn direct_mapping_wins() {
        let taxonomy = Taxonomy::new(vec![node("4bf58dd8d48988d116941735", None)]).unwrap();
        let m = mapping(&[("4bf58dd8d48988d116941735", "schema:BarOrPub")]);
        assert_eq!(
            map_category("4bf58dd8d48988d116941735", &m, &taxonomy),
            ("schema:BarOrPub", Resolution::Direct)
        );
    }

    #[test]
    fn unmapped_leaf_uses_parent() {
        let taxonomy = Taxonomy::new(vec![node("shops", None), node("shoes", Some("shops"))]).unwrap();
        let m = mapping(&[("shops", "schema:Store")]);
        assert_eq!(
            map_category("shoes", &m, &taxonomy),
            ("schema:Store", Resolution::Ancestor("shops".into()))
        );
    }

    #[test]
    fn nearest_ancestor_is_preferred() {
        let taxonomy = Taxonomy::new(vec![
            node("root", None),
            node("mid", Some("root")),
            node("leaf", Some("mid")),
        ])
        .unwrap();
        let m = mapping(&[("root", "schema:Place"), ("mid", "schema:Store")]);
        assert_eq!(map_category("leaf", &m, &taxonomy).0, "schema:Store");
    }

    #[test]
    fn unknown_and_unmapped_fall_back() {
        let taxonomy = Taxonomy::new(vec![node("root", None), node("leaf", Some("root"))]).unwrap();
        let m = mapping(&[]);
        assert_eq!(
            map_category("nowhere", &m, &taxonomy),
            (DEFAULT_TERM, Resolution::Unknown)
        );
        assert_eq!(
            map_category("leaf", &m, &taxonomy),
            (DEFAULT_TERM, Resolution::Default)
        );
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            Taxonomy::new(vec![node("a", Some("b")), node("b", Some("a"))]),
            Err(TaxonomyError::Cycle(_))
        ));
        assert!(matches!(
            Taxonomy::new(vec![node("a", Some("zzz"))]),
            Err(TaxonomyError::UnknownParent { .. })
        ));
        assert!(matches!(
            Taxonomy::new(vec![node("a", None), node("a", None)]),
            Err(TaxonomyError::Duplicate(_))
        ));
        assert!(matches!(
            Taxonomy::new(vec![node("self", Some("self"))]),
            Err(TaxonomyError::Cycle(_))
        ));
    }
}
