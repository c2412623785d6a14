//! Principals and access decisions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use watchtower_core::model::{Catena, ViewInstance};

/// Role granting catena and repository writes.
pub const ADMIN: &str = "admin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub roles: BTreeSet<String>,
    pub token: String,
}

impl Principal {
    pub fn is_admin(&self) -> bool {
        self.roles.contains(ADMIN)
    }

    pub fn role_names(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    ReadView,
    SubmitForm,
    Administer,
}

/// Token lookup table.
#[derive(Debug, Clone, Default)]
pub struct Principals {
    by_token: BTreeMap<String, Principal>,
}

impl Principals {
    pub fn new(users: impl IntoIterator<Item = Principal>) -> Self {
        Self {
            by_token: users.into_iter().map(|u| (u.token.clone(), u)).collect(),
        }
    }

    pub fn authenticate(&self, token: &str) -> Option<&Principal> {
        self.by_token.get(token)
    }
}

/// Roles that may submit forms of `catena`: every role some view is
/// visible to, plus admin.
pub fn catena_roles(catena: &Catena) -> BTreeSet<&str> {
    catena
        .views
        .iter()
        .flat_map(|v| v.visible_to.iter().map(String::as_str))
        .chain([ADMIN])
        .collect()
}

pub fn can_read_view(principal: &Principal, view: &ViewInstance) -> bool {
    view.visible_to.iter().any(|r| principal.roles.contains(r))
}

/// Access decision for `action` on `catena`. For view reads, `view` names
/// the view instance.
pub fn authorize(principal: &Principal, catena: &Catena, action: Action, view: Option<&str>) -> Decision {
    let allowed = match action {
        Action::Administer => principal.is_admin(),
        Action::SubmitForm => {
            let roles = catena_roles(catena);
            principal.role_names().any(|r| roles.contains(r))
        }
        Action::ReadView => view
            .and_then(|v| catena.view(v))
            .is_some_and(|v| can_read_view(principal, v)),
    };
    if allowed {
        Decision::Allow
    } else {
        Decision::Deny
    }
}
