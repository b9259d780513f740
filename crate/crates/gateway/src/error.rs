use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Coarse error class shared by CLI exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Parse,
    Validation,
    Planning,
    NotFound,
    Conflict,
    Storage,
    /// A bug: a worker panicked or an invariant of the service broke.
    Internal,
}

impl Category {
    /// Process exit code for `cellreach run` and friends. 0 and 1 are
    /// reserved for feasible / infeasible.
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Parse => 2,
            Category::Validation | Category::NotFound | Category::Conflict => 3,
            Category::Planning => 4,
            Category::Storage => 5,
            Category::Internal => 6,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Parse => "parse",
            Category::Validation => "validation",
            Category::Planning => "planning",
            Category::NotFound => "not_found",
            Category::Conflict => "conflict",
            Category::Storage => "storage",
            Category::Internal => "internal",
        };
        f.write_str(s)
    }
}

/// Gateway error: a category, the violated rule and a human message.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{category} error ({rule}): {message}")]
pub struct GatewayError {
    pub category: Category,
    /// Stable identifier of the rule, e.g. `NothingToUndo` or `schema_version`.
    pub rule: String,
    pub message: String,
}

impl GatewayError {
    pub fn new(category: Category, rule: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            category,
            rule: rule.into(),
            message: message.into(),
        }
    }

    pub fn parse(rule: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Parse, rule, message.to_string())
    }

    pub fn validation(rule: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Validation, rule, message.to_string())
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(Category::NotFound, "NotFound", format!("no {what} `{id}`"))
    }

    pub fn conflict(rule: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(Category::Conflict, rule, message.to_string())
    }

    pub fn storage(message: impl fmt::Display) -> Self {
        Self::new(Category::Storage, "Storage", message.to_string())
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        Self::new(Category::Internal, "Internal", message.to_string())
    }

    /// `{"error": {...}}` as written to stderr and HTTP bodies.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<cellreach::Error> for GatewayError {
    fn from(e: cellreach::Error) -> Self {
        use cellreach::Error as E;
        let category = match &e {
            E::Ply(_) => Category::Parse,
            E::InvalidStart | E::NoValidGoal | E::NoPath | E::Cancelled => Category::Planning,
            E::Io(_) => Category::Storage,
            _ => Category::Validation,
        };
        Self::new(category, e.kind(), e.to_string())
    }
}

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;
