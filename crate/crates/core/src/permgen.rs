//! Permission universe and per-permission contexts.
//!
//! Each checkpoint names the variable passed to `checkPermission`. Its
//! points-to set gives allocation sites; string facts for the constructor
//! arguments at those sites give the concrete permission values and the
//! contexts in which they arise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::contexts::CtxFamily;
use crate::ids::{CallSite, MethodId};
use crate::model::{AllocForm, DepKind, ProgramModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermGenError {
    #[error("checkpoint {0} has no `checkarg` binding")]
    MissingCheckArg(CallSite),
    #[error("no points-to fact for `{var}@{method}`")]
    MissingPointsTo { var: String, method: MethodId },
    #[error("points-to target `{0}` is not an allocation node")]
    NotAnAlloc(String),
    #[error("points-to fact names type `{fact}` but allocation node `{node}` has type `{alloc}`")]
    TypeMismatch {
        node: String,
        fact: String,
        alloc: String,
    },
    #[error("no string fact for `{var}@{method}`")]
    MissingStringFact { var: String, method: MethodId },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permission {
    pub ptype: String,
    pub target: Option<String>,
    pub action: Option<String>,
}

impl Permission {
    pub fn new(ptype: impl Into<String>) -> Self {
        Permission {
            ptype: ptype.into(),
            target: None,
            action: None,
        }
    }

    pub fn with_target(ptype: impl Into<String>, target: impl Into<String>) -> Self {
        Permission {
            target: Some(target.into()),
            ..Permission::new(ptype)
        }
    }

    pub fn with_action(
        ptype: impl Into<String>,
        target: impl Into<String>,
        action: impl Into<String>,
    ) -> Self {
        Permission {
            ptype: ptype.into(),
            target: Some(target.into()),
            action: Some(action.into()),
        }
    }
}

/// Renders as `Type("target","action")`, `Type("target")` or `Type`.
impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.ptype)?;
        if let Some(t) = &self.target {
            write!(f, "({}", quoted(t))?;
            if let Some(a) = &self.action {
                write!(f, ",{}", quoted(a))?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Double-quoted with `"` and `\\` backslash-escaped.
pub(crate) fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Output of [`generate_permissions`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PermissionSet {
    pub perms: BTreeSet<Permission>,
    /// Contexts under which each permission is created.
    pub ctx: BTreeMap<Permission, CtxFamily>,
    /// Checkpoints at which each permission may be demanded.
    pub origins: BTreeMap<Permission, BTreeSet<CallSite>>,
    /// Form-1 argument pairs whose contexts almost matched.
    pub diagnostics: Vec<String>,
}

impl PermissionSet {
    pub fn contexts(&self, p: &Permission) -> CtxFamily {
        self.ctx.get(p).cloned().unwrap_or_default()
    }

    pub fn generated_at(&self, site: &CallSite) -> BTreeSet<Permission> {
        self.origins
            .iter()
            .filter(|(_, sites)| sites.contains(site))
            .map(|(p, _)| p.clone())
            .collect()
    }

    fn add(&mut self, p: Permission, ctx: &CtxFamily, site: &CallSite) {
        self.ctx.entry(p.clone()).or_default().extend(ctx);
        self.origins.entry(p.clone()).or_default().insert(site.clone());
        self.perms.insert(p);
    }
}

/// Call sites that invoke the check method directly.
pub fn checkpoints(model: &ProgramModel) -> BTreeSet<CallSite> {
    let g = &model.graph;
    g.in_edges(&g.check_node).map(|e| e.site.clone()).collect()
}

pub fn generate_permissions(model: &ProgramModel) -> Result<PermissionSet, PermGenError> {
    let mut out = PermissionSet::default();
    for site in checkpoints(model) {
        let var = model
            .check_args
            .get(&site)
            .ok_or_else(|| PermGenError::MissingCheckArg(site.clone()))?;
        let pta = model
            .pta_fact(&site.method, var)
            .ok_or_else(|| PermGenError::MissingPointsTo {
                var: var.clone(),
                method: site.method.clone(),
            })?;
        for obj in &pta.points_to {
            let node = model
                .dep
                .node(&obj.alloc)
                .ok_or_else(|| PermGenError::NotAnAlloc(obj.alloc.clone()))?;
            let DepKind::Alloc {
                form,
                ptype,
                target,
                action,
            } = &node.kind
            else {
                return Err(PermGenError::NotAnAlloc(obj.alloc.clone()));
            };
            if *ptype != obj.ptype {
                return Err(PermGenError::TypeMismatch {
                    node: node.id.clone(),
                    fact: obj.ptype.clone(),
                    alloc: ptype.clone(),
                });
            }
            let alloc_method = &node.method;
            let strings = |v: &Option<String>| {
                let v = v.as_deref().unwrap_or_default();
                model
                    .sa_fact(alloc_method, v)
                    .ok_or_else(|| PermGenError::MissingStringFact {
                        var: v.to_string(),
                        method: alloc_method.clone(),
                    })
            };
            match form {
                AllocForm::TargetAction => {
                    let (ts, acts) = (strings(target)?, strings(action)?);
                    for (sv1, c1) in &ts.values {
                        for (sv2, c2) in &acts.values {
                            if c1 == c2 {
                                let ctx: CtxFamily = [c1.clone()].into_iter().collect();
                                out.add(Permission::with_action(ptype, sv1, sv2), &ctx, &site);
                            } else if c1.is_subset(c2) || c2.is_subset(c1) {
                                out.diagnostics.push(format!(
                                    "near miss at {}: target {sv1:?} under {c1} and action {sv2:?} under {c2} differ only by inclusion",
                                    node.location()
                                ));
                            }
                        }
                    }
                }
                AllocForm::Target => {
                    for (sv, c) in &strings(target)?.values {
                        let ctx: CtxFamily = [c.clone()].into_iter().collect();
                        out.add(Permission::with_target(ptype, sv), &ctx, &site);
                    }
                }
                AllocForm::NoArgs => {
                    let ctx = model.contexts_of(alloc_method);
                    out.add(Permission::new(ptype), &ctx, &site);
                }
            }
        }
    }
    out.diagnostics.sort();
    out.diagnostics.dedup();
    Ok(out)
}
