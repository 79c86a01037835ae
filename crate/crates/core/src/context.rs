use serde::{Deserialize, Serialize};

/// Ordered, deduplicated admin/country codes collected from a document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextString {
    codes: Vec<String>,
}

impl ContextString {
    pub fn new<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ctx = Self::default();
        for c in codes {
            ctx.push(c);
        }
        ctx
    }

    /// Appends `code` unless already present.
    pub fn push(&mut self, code: impl Into<String>) {
        let code = code.into();
        if !self.codes.contains(&code) {
            self.codes.push(code);
        }
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn contains(&self, code: &str) -> bool {
        self.codes.iter().any(|c| c == code)
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Codes joined with `||`; empty when there are no codes.
    pub fn rendered(&self) -> String {
        self.codes.join("||")
    }
}
