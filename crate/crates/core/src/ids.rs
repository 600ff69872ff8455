use std::fmt;
use std::sync::Arc;

/// Name of a method in the program model.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodId(Arc<str>);

impl MethodId {
    pub fn new(name: impl AsRef<str>) -> Self {
        MethodId(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for MethodId {
    fn from(s: &str) -> Self {
        MethodId::new(s)
    }
}

/// A call site: the source line of `method` that contains a call.
///
/// Rendered as `method:line`, which is also the model-file syntax.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallSite {
    pub method: MethodId,
    pub line: u32,
}

impl CallSite {
    pub fn new(method: impl Into<MethodId>, line: u32) -> Self {
        CallSite {
            method: method.into(),
            line,
        }
    }
}

impl fmt::Display for CallSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method, self.line)
    }
}

impl fmt::Debug for CallSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method, self.line)
    }
}
