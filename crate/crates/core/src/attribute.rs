//! Typed attribute values carried by elements, descriptions and relations.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeValue {
    Number {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
    Text {
        value: String,
    },
    #[serde(rename = "boolean")]
    Bool {
        value: bool,
    },
    Enum {
        value: String,
    },
    List {
        value: Vec<AttributeValue>,
    },
}

impl AttributeValue {
    pub fn number(value: f64, unit: impl Into<String>) -> Self {
        AttributeValue::Number {
            value,
            unit: Some(unit.into()),
        }
    }

    pub fn plain(value: f64) -> Self {
        AttributeValue::Number { value, unit: None }
    }

    pub fn text(value: impl Into<String>) -> Self {
        AttributeValue::Text {
            value: value.into(),
        }
    }

    pub fn token(value: impl Into<String>) -> Self {
        AttributeValue::Enum {
            value: value.into(),
        }
    }

    pub fn as_number(&self) -> Option<(f64, Option<&str>)> {
        match self {
            AttributeValue::Number { value, unit } => Some((*value, unit.as_deref())),
            _ => None,
        }
    }

    fn as_str(&self) -> Option<&str> {
        match self {
            AttributeValue::Text { value } | AttributeValue::Enum { value } => Some(value),
            _ => None,
        }
    }

    /// Equality used by predicates: text and enum tokens compare by content,
    /// numbers must share a unit tag.
    pub fn matches(&self, other: &AttributeValue) -> Result<bool, AttributeError> {
        match (self, other) {
            (AttributeValue::Number { .. }, AttributeValue::Number { .. }) => {
                Ok(self.compare(other)? == Some(Ordering::Equal))
            }
            (AttributeValue::Bool { value: a }, AttributeValue::Bool { value: b }) => Ok(a == b),
            (AttributeValue::List { value: a }, AttributeValue::List { value: b }) => {
                if a.len() != b.len() {
                    return Ok(false);
                }
                for (x, y) in a.iter().zip(b) {
                    if !x.matches(y)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => match (self.as_str(), other.as_str()) {
                (Some(a), Some(b)) => Ok(a == b),
                _ => Ok(false),
            },
        }
    }

    /// Ordering between two numbers with identical unit tags. Non-numeric
    /// operands are not ordered (`Ok(None)`).
    pub fn compare(&self, other: &AttributeValue) -> Result<Option<Ordering>, AttributeError> {
        match (self.as_number(), other.as_number()) {
            (Some((a, ua)), Some((b, ub))) => {
                if ua != ub {
                    return Err(AttributeError::UnitMismatch {
                        left: ua.unwrap_or("").to_string(),
                        right: ub.unwrap_or("").to_string(),
                    });
                }
                Ok(a.partial_cmp(&b))
            }
            _ => Ok(None),
        }
    }

    /// True if this value is `needle` or, for lists and text, contains it.
    pub fn contains(&self, needle: &AttributeValue) -> Result<bool, AttributeError> {
        match self {
            AttributeValue::List { value } => {
                for item in value {
                    if item.matches(needle)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            AttributeValue::Text { value } => match needle.as_str() {
                Some(n) => Ok(value.contains(n)),
                None => Ok(false),
            },
            other => other.matches(needle),
        }
    }

    pub fn satisfies(&self, op: CmpOp, rhs: &AttributeValue) -> Result<bool, AttributeError> {
        let ord = |want: fn(Ordering) -> bool| -> Result<bool, AttributeError> {
            Ok(self.compare(rhs)?.map(want).unwrap_or(false))
        };
        match op {
            CmpOp::Eq => self.matches(rhs),
            CmpOp::Ne => self.matches(rhs).map(|m| !m),
            CmpOp::Lt => ord(|o| o == Ordering::Less),
            CmpOp::Le => ord(|o| o != Ordering::Greater),
            CmpOp::Gt => ord(|o| o == Ordering::Greater),
            CmpOp::Ge => ord(|o| o != Ordering::Less),
            CmpOp::Contains => self.contains(rhs),
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Number { value, unit: Some(u) } => write!(f, "{value} {u}"),
            AttributeValue::Number { value, unit: None } => write!(f, "{value}"),
            AttributeValue::Text { value } | AttributeValue::Enum { value } => f.write_str(value),
            AttributeValue::Bool { value } => write!(f, "{value}"),
            AttributeValue::List { value } => {
                f.write_str("[")?;
                for (i, v) in value.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// A non-negative amount with a unit, used for capacities and costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: impl Into<String>) -> Self {
        Quantity {
            value,
            unit: unit.into(),
        }
    }

    pub fn to_attribute(&self) -> AttributeValue {
        AttributeValue::number(self.value, self.unit.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    #[serde(alias = "=", alias = "==")]
    Eq,
    #[serde(alias = "!=")]
    Ne,
    #[serde(alias = "<")]
    Lt,
    #[serde(alias = "<=")]
    Le,
    #[serde(alias = ">")]
    Gt,
    #[serde(alias = ">=")]
    Ge,
    Contains,
}

impl CmpOp {
    pub fn is_ordering(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }
}

/// Ordering comparison used by alarms and comparison expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    #[serde(alias = "<")]
    Lt,
    #[serde(alias = "<=")]
    Le,
    #[serde(alias = ">")]
    Gt,
    #[serde(alias = ">=")]
    Ge,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttributeError {
    #[error("unit mismatch: '{left}' vs '{right}'")]
    UnitMismatch { left: String, right: String },
}
