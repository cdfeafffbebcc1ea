use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::registry::{Schema, SchemaRegistry};

/// Dotted field name: `schema.element[.qualifier]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldKey {
    pub schema: Schema,
    pub element: String,
    pub qualifier: Option<String>,
}

impl FieldKey {
    pub fn new(schema: Schema, element: &str, qualifier: Option<&str>) -> Self {
        FieldKey {
            schema,
            element: element.to_string(),
            qualifier: qualifier.map(str::to_string),
        }
    }

    /// Registry position, or `None` for unregistered triples.
    pub fn registry_index(&self) -> Option<usize> {
        SchemaRegistry::standard()
            .lookup(self.schema, &self.element, self.qualifier.as_deref())
            .map(|(i, _)| i)
    }
}

impl fmt::Display for FieldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.schema, self.element)?;
        if let Some(q) = &self.qualifier {
            write!(f, ".{q}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed field name {0:?}")]
pub struct BadFieldName(pub String);

impl FromStr for FieldKey {
    type Err = BadFieldName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadFieldName(s.to_string());
        let mut parts = s.split('.');
        let schema: Schema = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let element = parts.next().ok_or_else(bad)?;
        let qualifier = parts.next();
        if parts.next().is_some() || !is_name_token(element) || qualifier.is_some_and(|q| !is_name_token(q)) {
            return Err(bad());
        }
        Ok(FieldKey::new(schema, element, qualifier))
    }
}

fn is_name_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// One value of one field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetadataField {
    pub schema: Schema,
    pub element: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl MetadataField {
    pub fn new(key: &FieldKey, value: impl Into<String>) -> Self {
        MetadataField {
            schema: key.schema,
            element: key.element.clone(),
            qualifier: key.qualifier.clone(),
            value: value.into(),
            lang: None,
        }
    }

    pub fn key(&self) -> FieldKey {
        FieldKey {
            schema: self.schema,
            element: self.element.clone(),
            qualifier: self.qualifier.clone(),
        }
    }

    pub fn is(&self, key: &str) -> bool {
        // Cheap comparison without allocating a FieldKey.
        let mut parts = key.split('.');
        parts.next() == Some(self.schema.as_str())
            && parts.next() == Some(self.element.as_str())
            && parts.next() == self.qualifier.as_deref()
            && parts.next().is_none()
    }
}

/// An ordered, multi-valued field list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetadataRecord {
    pub fields: Vec<MetadataField>,
}

impl MetadataRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a value. Panics on a malformed key; use [`MetadataRecord::push_field`]
    /// for untrusted input.
    pub fn push(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        let key: FieldKey = key.parse().expect("well-formed field key");
        self.fields.push(MetadataField::new(&key, value));
        self
    }

    pub fn push_field(&mut self, field: MetadataField) -> &mut Self {
        self.fields.push(field);
        self
    }

    /// Builder form of [`MetadataRecord::push`].
    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.push(key, value);
        self
    }

    pub fn values<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.fields.iter().filter(move |f| f.is(key)).map(|f| f.value.as_str())
    }

    pub fn first(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|f| f.is(key)).map(|f| f.value.as_str())
    }

    pub fn is_dc_only(&self) -> bool {
        self.fields.iter().all(|f| f.schema == Schema::Dc)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

impl FromIterator<MetadataField> for MetadataRecord {
    fn from_iter<T: IntoIterator<Item = MetadataField>>(iter: T) -> Self {
        MetadataRecord {
            fields: iter.into_iter().collect(),
        }
    }
}
