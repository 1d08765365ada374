use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{Apsi1, Apsi2, EulerMaruyama, GcEuler, GcREuler, GcSi2, GuidingCenterModel, Pusher};

/// Name-keyed collection of boxed strategies.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Box<T>>,
}

pub type SchemeRegistry = Registry<dyn Pusher>;
pub type GcRegistry = Registry<dyn GuidingCenterModel>;

impl<T: ?Sized> Registry<T> {
    pub fn empty(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces the entry under `name`.
    pub fn register(&mut self, name: impl Into<String>, strategy: Box<T>) {
        self.entries.insert(name.into(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            Error::config(
                self.kind,
                format!("unknown name {name:?}; known: {}", self.names().join(", ")),
            )
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = Registry::empty("scheme");
        for s in [Box::new(Apsi1) as Box<dyn Pusher>, Box::new(Apsi2), Box::new(EulerMaruyama)] {
            r.register(s.name(), s);
        }
        r
    }
}

impl Default for GcRegistry {
    fn default() -> Self {
        let mut r = Registry::empty("gc_model");
        for g in [
            Box::new(GcEuler) as Box<dyn GuidingCenterModel>,
            Box::new(GcSi2),
            Box::new(GcREuler),
        ] {
            r.register(g.name(), g);
        }
        r
    }
}
