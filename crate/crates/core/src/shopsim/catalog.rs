use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ShopError;

pub const BUY_NOW: &str = "Buy Now";
pub const BACK: &str = "Back";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub attributes: BTreeSet<String>,
    /// Option name to the values a shopper can pick, e.g. `size -> [S, M]`.
    #[serde(default)]
    pub options: BTreeMap<String, Vec<String>>,
    pub price: f64,
}

impl Product {
    /// Option name owning `value`, if any.
    pub fn option_for_value(&self, value: &str) -> Option<&str> {
        self.options
            .iter()
            .find(|(_, vals)| vals.iter().any(|v| v == value))
            .map(|(k, _)| k.as_str())
    }

    fn validate(&self) -> Result<(), ShopError> {
        let bad = |reason: &str| ShopError::InvalidProduct {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() || self.title.trim().is_empty() {
            return Err(bad("id and title must be non-empty"));
        }
        if !self.price.is_finite() || self.price < 0.0 {
            return Err(bad("price must be a non-negative number"));
        }
        let mut seen = BTreeSet::new();
        for (name, values) in &self.options {
            if values.is_empty() {
                return Err(bad(&format!("option `{name}` has no values")));
            }
            for v in values {
                if v.is_empty() || v == BUY_NOW || v == BACK {
                    return Err(bad(&format!("option value `{v}` is reserved or empty")));
                }
                if !seen.insert(v.as_str()) {
                    return Err(bad(&format!("option value `{v}` appears twice")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub instruction: String,
    pub target_attributes: BTreeSet<String>,
    #[serde(default)]
    pub target_options: BTreeMap<String, String>,
    pub price_cap: f64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), ShopError> {
        let bad = |reason: &str| ShopError::InvalidTask {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() || self.instruction.trim().is_empty() {
            return Err(bad("id and instruction must be non-empty"));
        }
        if self.target_attributes.is_empty() {
            return Err(bad("target_attributes must be non-empty"));
        }
        if !self.price_cap.is_finite() || self.price_cap < 0.0 {
            return Err(bad("price_cap must be a non-negative number"));
        }
        Ok(())
    }
}

/// Products keyed and ordered by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    products: BTreeMap<String, Product>,
}

impl Catalog {
    pub fn new(products: Vec<Product>) -> Result<Self, ShopError> {
        let mut map = BTreeMap::new();
        for p in products {
            p.validate()?;
            if map.contains_key(&p.id) {
                return Err(ShopError::InvalidProduct {
                    id: p.id,
                    reason: "duplicate id".into(),
                });
            }
            map.insert(p.id.clone(), p);
        }
        Ok(Self { products: map })
    }

    pub fn get(&self, id: &str) -> Option<&Product> {
        self.products.get(id)
    }

    pub fn products(&self) -> impl Iterator<Item = &Product> {
        self.products.values()
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }
}

pub fn parse_product_line(line: &str) -> Result<Product, ShopError> {
    let p: Product = serde_json::from_str(line).map_err(|e| ShopError::Parse(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn parse_task_line(line: &str) -> Result<TaskSpec, ShopError> {
    let t: TaskSpec = serde_json::from_str(line).map_err(|e| ShopError::Parse(e.to_string()))?;
    t.validate()?;
    Ok(t)
}

fn parse_lines<T>(
    text: &str,
    parse: impl Fn(&str) -> Result<T, ShopError>,
) -> Result<Vec<T>, ShopError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            parse(l).map_err(|e| ShopError::Parse(format!("line {}: {e}", n + 1)))
        })
        .collect()
}

pub fn parse_catalog(text: &str) -> Result<Catalog, ShopError> {
    Catalog::new(parse_lines(text, parse_product_line)?)
}

/// Task ids must be unique.
pub fn parse_tasks(text: &str) -> Result<Vec<TaskSpec>, ShopError> {
    let tasks = parse_lines(text, parse_task_line)?;
    let mut ids = BTreeSet::new();
    for t in &tasks {
        if !ids.insert(t.id.as_str()) {
            return Err(ShopError::InvalidTask {
                id: t.id.clone(),
                reason: "duplicate id".into(),
            });
        }
    }
    Ok(tasks)
}

pub fn load_catalog(path: &Path) -> Result<Catalog, ShopError> {
    let text = fs::read_to_string(path).map_err(|e| ShopError::Io(format!("{}: {e}", path.display())))?;
    parse_catalog(&text)
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>, ShopError> {
    let text = fs::read_to_string(path).map_err(|e| ShopError::Io(format!("{}: {e}", path.display())))?;
    parse_tasks(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_product_line() {
        let p = parse_product_line(
            r#"{"id":"P1","title":"Tea","attributes":["organic"],"options":{"count":["20","50"]},"price":7.5}"#,
        )
        .unwrap();
        assert_eq!(p.option_for_value("50"), Some("count"));
        assert_eq!(p.option_for_value("70"), None);
    }

    #[test]
    fn rejects_invalid_products() {
        for line in [
            r#"{"id":"","title":"x","price":1}"#,
            r#"{"id":"P","title":"x","price":-1}"#,
            r#"{"id":"P","title":"x","price":1,"options":{"a":["Buy Now"]}}"#,
            r#"{"id":"P","title":"x","price":1,"options":{"a":["v"],"b":["v"]}}"#,
            r#"{"id":"P","title":"x","price":1,"options":{"a":[]}}"#,
            r#"{"id":"P","title":"x"}"#,
            "not json",
        ] {
            assert!(parse_product_line(line).is_err(), "{line}");
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let text = "{\"id\":\"P\",\"title\":\"x\",\"price\":1}\n{\"id\":\"P\",\"title\":\"y\",\"price\":2}\n";
        assert!(parse_catalog(text).is_err());
    }

    #[test]
    fn task_needs_target_attributes() {
        assert!(parse_task_line(
            r#"{"id":"T","instruction":"x","target_attributes":[],"price_cap":1}"#
        )
        .is_err());
        let t = parse_task_line(
            r#"{"id":"T","instruction":"x","target_attributes":["a"],"price_cap":1}"#,
        )
        .unwrap();
        assert!(t.target_options.is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_tasks("\n{\"id\":1}\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
