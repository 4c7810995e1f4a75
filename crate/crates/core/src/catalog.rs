//! Item catalog: loading, validation, churn, and the coarse category scheme
//! used by the diversifier.
//!
//! Every item carries a fixed set of categorical attributes (the scheme's
//! attribute list, with missing values stored as [`UNKNOWN`]) and exactly one
//! diversification category. Categories come from an ordered rule list: the
//! first rule whose predicates all hold wins, so overlapping rules still give
//! a total, deterministic mapping.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a diversification category, always `< d`.
pub type CategoryId = usize;

/// Token stored for an attribute the source line did not provide.
pub const UNKNOWN: &str = "unknown";
/// Name under which the item identifier participates as an attribute.
pub const ITEM_ID_ATTR: &str = "item_id";
/// Derived attribute holding the coarsened price.
pub const PRICE_BAND_ATTR: &str = "price_band";

/// Default price band edges: six bands `[0,25) [25,50) [50,100) [100,200) [200,400) [400,inf)`.
pub const DEFAULT_PRICE_EDGES: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];

/// Default attribute list of the synthetic scheme.
pub const DEFAULT_ATTRIBUTES: [&str; 5] = ["brand", "color", "department", PRICE_BAND_ATTR, "size"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("line {line}: malformed item: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate item_id {item_id:?} on lines {first} and {second}")]
    DuplicateId {
        item_id: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: attribute {name:?} is not part of the category scheme")]
    UnknownAttribute { line: usize, name: String },
    #[error("line {line}: no category rule matches item {item_id:?}")]
    Unmappable { line: usize, item_id: String },
    #[error("invalid category scheme: {0}")]
    Scheme(String),
    #[error("addition {0:?} duplicates an item that survives the purge")]
    DuplicateAddition(String),
    #[error("invalid item {item_id:?}: {reason}")]
    InvalidItem { item_id: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// One line of a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawItem {
    pub item_id: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    /// One entry per scheme attribute, `price_band` included when the scheme
    /// coarsens price.
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    pub category: CategoryId,
}

/// Half-open price interval `[min, max)`; a missing bound is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceRange {
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl PriceRange {
    fn contains(&self, price: Option<f64>) -> bool {
        let Some(p) = price else {
            return false;
        };
        self.min.is_none_or(|lo| p >= lo) && self.max.is_none_or(|hi| p < hi)
    }
}

/// A conjunction of predicates mapping matching items to `category`.
///
/// `when` maps an attribute name to its accepted values; an empty rule is a
/// catch-all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub category: CategoryId,
    #[serde(default)]
    pub when: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<PriceRange>,
}

impl CategoryRule {
    fn matches(&self, attributes: &BTreeMap<String, String>, price: Option<f64>) -> bool {
        let attrs_ok = self.when.iter().all(|(name, accepted)| {
            let value = attributes.get(name).map(String::as_str).unwrap_or(UNKNOWN);
            accepted.iter().any(|v| v == value)
        });
        attrs_ok && self.price.is_none_or(|r| r.contains(price))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScheme {
    /// Number of diversification categories.
    pub d: usize,
    /// Categorical attributes every item carries (the item id is implicit).
    pub attributes: Vec<String>,
    /// Increasing price band edges; band `i` is `[edges[i-1], edges[i])`.
    #[serde(default = "default_price_edges")]
    pub price_bands: Vec<f64>,
    pub rules: Vec<CategoryRule>,
}

fn default_price_edges() -> Vec<f64> {
    DEFAULT_PRICE_EDGES.to_vec()
}

impl CategoryScheme {
    /// Checks the structural invariants: every rule targets a category `< d`,
    /// the rules produce exactly `d` distinct categories, and rule predicates
    /// only name scheme attributes.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let err = |m: String| Err(CatalogError::Scheme(m));
        if self.d == 0 {
            return err("d must be positive".into());
        }
        if self.attributes.iter().any(|a| a == ITEM_ID_ATTR) {
            return err("item_id cannot be a scheme attribute".into());
        }
        let distinct: BTreeSet<_> = self.attributes.iter().collect();
        if distinct.len() != self.attributes.len() {
            return err("duplicate attribute names".into());
        }
        if self.price_bands.iter().any(|e| !e.is_finite())
            || self.price_bands.windows(2).any(|w| w[0] >= w[1])
        {
            return err("price band edges must be finite and strictly increasing".into());
        }
        let mut produced = BTreeSet::new();
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.category >= self.d {
                return err(format!("rule {i} targets category {} >= d={}", rule.category, self.d));
            }
            if let Some(name) = rule.when.keys().find(|n| !self.attributes.contains(n)) {
                return err(format!("rule {i} names unknown attribute {name:?}"));
            }
            produced.insert(rule.category);
        }
        if produced.len() != self.d {
            return err(format!(
                "rules produce {} distinct categories but d={}",
                produced.len(),
                self.d
            ));
        }
        Ok(())
    }

    pub fn coarsens_price(&self) -> bool {
        self.attributes.iter().any(|a| a == PRICE_BAND_ATTR)
    }

    /// Price band label: the band index as a string, or [`UNKNOWN`].
    pub fn price_band(&self, price: Option<f64>) -> String {
        match price {
            Some(p) if p.is_finite() => self
                .price_bands
                .iter()
                .take_while(|&&edge| p >= edge)
                .count()
                .to_string(),
            _ => UNKNOWN.to_string(),
        }
    }

    /// Completes a raw line into scheme attributes and assigns its category.
    /// `line` is only used in error messages.
    pub fn build_item(&self, raw: RawItem, line: usize) -> Result<Item, CatalogError> {
        if raw.item_id.is_empty() {
            return Err(CatalogError::Malformed {
                line,
                reason: "empty item_id".into(),
            });
        }
        if let Some(p) = raw.price {
            if !p.is_finite() || p < 0.0 {
                return Err(CatalogError::Malformed {
                    line,
                    reason: format!("invalid price {p}"),
                });
            }
        }
        let derived = self.coarsens_price();
        if let Some(name) = raw.attributes.keys().find(|n| {
            !self.attributes.contains(n) || (derived && n.as_str() == PRICE_BAND_ATTR)
        }) {
            return Err(CatalogError::UnknownAttribute {
                line,
                name: name.clone(),
            });
        }
        let mut attributes = BTreeMap::new();
        for name in &self.attributes {
            let value = if derived && name == PRICE_BAND_ATTR {
                self.price_band(raw.price)
            } else {
                raw.attributes
                    .get(name)
                    .filter(|v| !v.is_empty())
                    .cloned()
                    .unwrap_or_else(|| UNKNOWN.to_string())
            };
            attributes.insert(name.clone(), value);
        }
        let mut item = Item {
            item_id: raw.item_id,
            attributes,
            price: raw.price,
            category: 0,
        };
        item.category = categorize(&item, self).map_err(|_| CatalogError::Unmappable {
            line,
            item_id: item.item_id.clone(),
        })?;
        Ok(item)
    }

    /// The synthetic scheme: `ceil(d / bands)` departments crossed with the
    /// price bands, category `c` being department `c / bands`, band `c % bands`.
    pub fn synthetic(d: usize) -> Self {
        let bands = DEFAULT_PRICE_EDGES.len() + 1;
        let rules = (0..d)
            .map(|c| CategoryRule {
                category: c,
                when: BTreeMap::from([
                    ("department".to_string(), vec![synthetic_department(c / bands)]),
                    (PRICE_BAND_ATTR.to_string(), vec![(c % bands).to_string()]),
                ]),
                price: None,
            })
            .collect();
        Self {
            d,
            attributes: DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            price_bands: default_price_edges(),
            rules,
        }
    }

    /// Reads a JSON scheme file and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io(e.to_string()))?;
        let scheme: Self =
            serde_json::from_str(&text).map_err(|e| CatalogError::Scheme(e.to_string()))?;
        scheme.validate()?;
        Ok(scheme)
    }
}

pub fn synthetic_department(index: usize) -> String {
    format!("dept{index:02}")
}

/// Maps an item to the category of the first matching rule.
pub fn categorize(item: &Item, scheme: &CategoryScheme) -> Result<CategoryId, CatalogError> {
    scheme
        .rules
        .iter()
        .find(|r| r.matches(&item.attributes, item.price))
        .map(|r| r.category)
        .ok_or_else(|| {
            CatalogError::Scheme(format!("no rule matches item {:?}", item.item_id))
        })
}

/// Outcome counters of [`Catalog::apply_delta`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DeltaReport {
    pub added: usize,
    pub purged: usize,
    pub unknown_purges: usize,
}

/// Immutable item collection; churn produces a new value with a higher
/// generation.
#[derive(Debug, Clone)]
pub struct Catalog {
    items: Vec<Item>,
    index: HashMap<String, usize>,
    scheme: CategoryScheme,
    generation: u64,
}

impl Catalog {
    pub fn empty(scheme: CategoryScheme) -> Self {
        Self {
            items: Vec::new(),
            index: HashMap::new(),
            scheme,
            generation: 0,
        }
    }

    /// Builds a catalog from raw lines (1-based line numbers in errors).
    pub fn from_raw(
        raws: impl IntoIterator<Item = RawItem>,
        scheme: CategoryScheme,
    ) -> Result<Self, CatalogError> {
        scheme.validate()?;
        let mut items = Vec::new();
        for (i, raw) in raws.into_iter().enumerate() {
            items.push(scheme.build_item(raw, i + 1)?);
        }
        Self::from_items(items, scheme)
    }

    pub fn from_items(items: Vec<Item>, scheme: CategoryScheme) -> Result<Self, CatalogError> {
        scheme.validate()?;
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            check_item(item, &scheme)?;
            if let Some(&first) = index.get(&item.item_id) {
                return Err(CatalogError::DuplicateId {
                    item_id: item.item_id.clone(),
                    first: first + 1,
                    second: i + 1,
                });
            }
            index.insert(item.item_id.clone(), i);
        }
        Ok(Self {
            items,
            index,
            scheme,
            generation: 0,
        })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn scheme(&self) -> &CategoryScheme {
        &self.scheme
    }

    pub fn d(&self) -> usize {
        self.scheme.d
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn get(&self, item_id: &str) -> Option<&Item> {
        self.index.get(item_id).map(|&i| &self.items[i])
    }

    /// Per-category item counts.
    pub fn category_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.scheme.d];
        for item in &self.items {
            sizes[item.category] += 1;
        }
        sizes
    }

    /// Purges first, then adds; unknown purge ids are counted, not fatal.
    pub fn apply_delta(
        &self,
        additions: Vec<Item>,
        purge_ids: &[String],
    ) -> Result<(Catalog, DeltaReport), CatalogError> {
        let mut report = DeltaReport::default();
        let purge: BTreeSet<&str> = purge_ids.iter().map(String::as_str).collect();
        for id in &purge {
            if self.index.contains_key(*id) {
                report.purged += 1;
            } else {
                report.unknown_purges += 1;
                log::warn!("purge of unknown item {id:?} ignored");
            }
        }
        let mut items: Vec<Item> = self
            .items
            .iter()
            .filter(|it| !purge.contains(it.item_id.as_str()))
            .cloned()
            .collect();
        let mut index: HashMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.clone(), i))
            .collect();
        for item in additions {
            check_item(&item, &self.scheme)?;
            if index.contains_key(&item.item_id) {
                return Err(CatalogError::DuplicateAddition(item.item_id));
            }
            index.insert(item.item_id.clone(), items.len());
            items.push(item);
            report.added += 1;
        }
        let next = Catalog {
            items,
            index,
            scheme: self.scheme.clone(),
            generation: self.generation + 1,
        };
        Ok((next, report))
    }
}

fn check_item(item: &Item, scheme: &CategoryScheme) -> Result<(), CatalogError> {
    let invalid = |reason: String| CatalogError::InvalidItem {
        item_id: item.item_id.clone(),
        reason,
    };
    if item.item_id.is_empty() {
        return Err(invalid("empty item_id".into()));
    }
    if item.category >= scheme.d {
        return Err(invalid(format!("category {} >= d={}", item.category, scheme.d)));
    }
    if let Some(missing) = scheme.attributes.iter().find(|a| !item.attributes.contains_key(*a)) {
        return Err(invalid(format!("missing attribute {missing:?}")));
    }
    if item.attributes.len() != scheme.attributes.len() {
        return Err(invalid("attributes outside the scheme".into()));
    }
    Ok(())
}

/// Loads a JSON-lines catalog file. Blank lines are skipped but still count
/// toward line numbers.
pub fn load_catalog(path: impl AsRef<Path>, scheme: CategoryScheme) -> Result<Catalog, CatalogError> {
    scheme.validate()?;
    let file = File::open(path).map_err(|e| CatalogError::Io(e.to_string()))?;
    let mut items = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CatalogError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem = serde_json::from_str(&line).map_err(|e| CatalogError::Malformed {
            line: lineno,
            reason: e.to_string(),
        })?;
        if let Some(&first) = seen.get(&raw.item_id) {
            return Err(CatalogError::DuplicateId {
                item_id: raw.item_id,
                first,
                second: lineno,
            });
        }
        seen.insert(raw.item_id.clone(), lineno);
        items.push(scheme.build_item(raw, lineno)?);
    }
    Catalog::from_items(items, scheme)
}

/// Writes items as JSON lines in the catalog file format.
pub fn write_catalog<W: std::io::Write>(mut out: W, raws: &[RawItem]) -> std::io::Result<()> {
    for raw in raws {
        serde_json::to_writer(&mut out, raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn raw(id: &str, dept: &str, price: f64) -> RawItem {
        RawItem {
            item_id: id.into(),
            attributes: BTreeMap::from([
                ("department".into(), dept.into()),
                ("brand".into(), "acme".into()),
            ]),
            price: Some(price),
        }
    }

    fn shoe_scheme() -> CategoryScheme {
        CategoryScheme {
            d: 2,
            attributes: DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            price_bands: default_price_edges(),
            rules: vec![
                CategoryRule {
                    category: 1,
                    when: BTreeMap::from([("department".into(), vec!["shoes".into()])]),
                    price: Some(PriceRange {
                        min: Some(0.0),
                        max: Some(50.0),
                    }),
                },
                CategoryRule {
                    category: 0,
                    when: BTreeMap::new(),
                    price: None,
                },
            ],
        }
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_well_formed_lines() {
        let lines: Vec<String> = (0..3)
            .map(|i| serde_json::to_string(&raw(&format!("i{i}"), "shoes", 10.0)).unwrap())
            .collect();
        let f = write_lines(&lines);
        let cat = load_catalog(f.path(), shoe_scheme()).unwrap();
        assert_eq!(cat.len(), 3);
        assert_eq!(cat.get("i1").unwrap().category, 1);
    }

    #[test]
    fn empty_file_gives_empty_catalog() {
        let f = write_lines(&[]);
        let cat = load_catalog(f.path(), shoe_scheme()).unwrap();
        assert!(cat.is_empty());
        assert_eq!(cat.d(), 2);
    }

    #[test]
    fn duplicate_ids_report_both_lines() {
        let lines: Vec<String> = (0..8)
            .map(|i| {
                let id = if i == 1 || i == 6 { "dup".to_string() } else { format!("i{i}") };
                serde_json::to_string(&raw(&id, "hats", 10.0)).unwrap()
            })
            .collect();
        let f = write_lines(&lines);
        let err = load_catalog(f.path(), shoe_scheme()).unwrap_err();
        assert_eq!(
            err,
            CatalogError::DuplicateId {
                item_id: "dup".into(),
                first: 2,
                second: 7
            }
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_lines(&[
            serde_json::to_string(&raw("a", "hats", 1.0)).unwrap(),
            "{not json".into(),
        ]);
        match load_catalog(f.path(), shoe_scheme()).unwrap_err() {
            CatalogError::Malformed { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_attribute_rejected() {
        let mut r = raw("a", "hats", 1.0);
        r.attributes.insert("rating".into(), "5".into());
        let err = shoe_scheme().build_item(r, 4).unwrap_err();
        assert_eq!(
            err,
            CatalogError::UnknownAttribute {
                line: 4,
                name: "rating".into()
            }
        );
    }

    #[test]
    fn unmappable_item_rejected() {
        let mut scheme = shoe_scheme();
        scheme.rules.pop();
        scheme.d = 2;
        scheme.rules.push(CategoryRule {
            category: 0,
            when: BTreeMap::from([("department".into(), vec!["hats".into()])]),
            price: None,
        });
        let err = scheme.build_item(raw("a", "socks", 1.0), 3).unwrap_err();
        assert!(matches!(err, CatalogError::Unmappable { line: 3, .. }));
    }

    #[test]
    fn missing_attributes_become_unknown() {
        let item = shoe_scheme().build_item(raw("a", "hats", 30.0), 1).unwrap();
        assert_eq!(item.attributes["color"], UNKNOWN);
        assert_eq!(item.attributes[PRICE_BAND_ATTR], "1");
        assert_eq!(item.attributes.len(), 5);
    }

    #[test]
    fn categorize_price_rule() {
        let scheme = shoe_scheme();
        let item = scheme.build_item(raw("a", "shoes", 34.99), 1).unwrap();
        assert_eq!(categorize(&item, &scheme).unwrap(), 1);
        let pricey = scheme.build_item(raw("b", "shoes", 80.0), 1).unwrap();
        assert_eq!(categorize(&pricey, &scheme).unwrap(), 0);
    }

    #[test]
    fn categorize_ignores_item_id() {
        let scheme = CategoryScheme::synthetic(100);
        let mut a = raw("x", "dept03", 60.0);
        a.attributes.insert("color".into(), "red".into());
        let mut b = a.clone();
        b.item_id = "y".into();
        let ia = scheme.build_item(a, 1).unwrap();
        let ib = scheme.build_item(b, 2).unwrap();
        assert_eq!(ia.category, ib.category);
        assert_eq!(ia.category, 3 * 6 + 2);
    }

    #[test]
    fn overlapping_rules_first_match_wins() {
        let mut scheme = CategoryScheme::synthetic(6);
        let everything = |c| CategoryRule {
            category: c,
            when: BTreeMap::new(),
            price: None,
        };
        scheme.rules.insert(0, everything(3));
        scheme.rules.insert(1, everything(5));
        let item = scheme.build_item(raw("a", "dept00", 1.0), 1).unwrap();
        assert_eq!(item.category, 3);
    }

    #[test]
    fn scheme_validation() {
        let mut s = CategoryScheme::synthetic(10);
        assert!(s.validate().is_ok());
        s.d = 11;
        assert!(s.validate().is_err());
        let mut s = CategoryScheme::synthetic(10);
        s.rules[0].category = 10;
        assert!(s.validate().is_err());
        let mut s = CategoryScheme::synthetic(10);
        s.rules[0].when.insert("item_id".into(), vec!["x".into()]);
        assert!(s.validate().is_err());
    }

    fn small_catalog() -> Catalog {
        Catalog::from_raw(
            (0..3).map(|i| raw(&format!("i{i}"), "shoes", 10.0)),
            shoe_scheme(),
        )
        .unwrap()
    }

    #[test]
    fn delta_add_two_purge_one() {
        let cat = small_catalog();
        let s = cat.scheme().clone();
        let adds = vec![
            s.build_item(raw("n1", "hats", 1.0), 1).unwrap(),
            s.build_item(raw("n2", "hats", 1.0), 2).unwrap(),
        ];
        let (next, report) = cat.apply_delta(adds, &["i0".into()]).unwrap();
        assert_eq!(next.len(), cat.len() + 1);
        assert_eq!(next.generation(), cat.generation() + 1);
        assert!(next.get("i0").is_none());
        assert_eq!(report.added, 2);
        assert_eq!(report.purged, 1);
    }

    #[test]
    fn delta_unknown_purge_counts_warning() {
        let cat = small_catalog();
        let (next, report) = cat.apply_delta(vec![], &["ghost".into()]).unwrap();
        assert_eq!(next.items(), cat.items());
        assert_eq!(report.unknown_purges, 1);
    }

    #[test]
    fn delta_purge_then_add_same_id() {
        let cat = small_catalog();
        let replacement = cat.scheme().build_item(raw("i1", "hats", 99.0), 1).unwrap();
        let (next, _) = cat.apply_delta(vec![replacement], &["i1".into()]).unwrap();
        assert_eq!(next.get("i1").unwrap().category, 0);
        assert_eq!(next.len(), 3);
    }

    #[test]
    fn delta_duplicate_addition_rejected() {
        let cat = small_catalog();
        let dup = cat.scheme().build_item(raw("i2", "hats", 1.0), 1).unwrap();
        assert_eq!(
            cat.apply_delta(vec![dup], &[]).unwrap_err(),
            CatalogError::DuplicateAddition("i2".into())
        );
    }

    fn arb_raw() -> impl Strategy<Value = RawItem> {
        (
            "[a-z]{1,6}",
            0usize..20,
            prop::option::of(0.0f64..1000.0),
            prop::option::of("[a-c]"),
        )
            .prop_map(|(id, dept, price, color)| {
                let mut attributes =
                    BTreeMap::from([("department".to_string(), synthetic_department(dept))]);
                if let Some(c) = color {
                    attributes.insert("color".into(), c);
                }
                RawItem {
                    item_id: id,
                    attributes,
                    price,
                }
            })
    }

    fn catch_all_scheme() -> CategoryScheme {
        let mut s = CategoryScheme::synthetic(100);
        s.rules.push(CategoryRule {
            category: 99,
            when: BTreeMap::new(),
            price: None,
        });
        s
    }

    proptest! {
        #[test]
        fn categorize_is_total_and_stable(r in arb_raw()) {
            let scheme = catch_all_scheme();
            let item = scheme.build_item(r, 1).unwrap();
            let c = categorize(&item, &scheme).unwrap();
            prop_assert!(c < scheme.d);
            prop_assert_eq!(c, categorize(&item, &scheme).unwrap());
            prop_assert_eq!(c, item.category);
        }

        #[test]
        fn categories_partition_catalog(raws in prop::collection::vec(arb_raw(), 0..40)) {
            let mut seen = BTreeSet::new();
            let raws: Vec<_> = raws.into_iter().filter(|r| seen.insert(r.item_id.clone())).collect();
            let cat = Catalog::from_raw(raws, catch_all_scheme()).unwrap();
            let mut ids: Vec<&str> = Vec::new();
            for c in 0..cat.d() {
                ids.extend(cat.items().iter().filter(|i| i.category == c).map(|i| i.item_id.as_str()));
            }
            ids.sort_unstable();
            let mut all: Vec<&str> = cat.items().iter().map(|i| i.item_id.as_str()).collect();
            all.sort_unstable();
            prop_assert_eq!(ids, all);
            prop_assert_eq!(cat.category_sizes().iter().sum::<usize>(), cat.len());
        }

        #[test]
        fn purge_is_idempotent(pick in 0usize..3) {
            let cat = small_catalog();
            let id = format!("i{pick}");
            let (once, _) = cat.apply_delta(vec![], std::slice::from_ref(&id)).unwrap();
            let (twice, _) = once.apply_delta(vec![], &[id]).unwrap();
            let (both, _) = cat.apply_delta(vec![], &[format!("i{pick}"), format!("i{pick}")]).unwrap();
            prop_assert_eq!(once.items(), twice.items());
            prop_assert_eq!(once.items(), both.items());
        }
    }
}
