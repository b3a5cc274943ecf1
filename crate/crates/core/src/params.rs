//! Flat parameter storage shared by every layer.
//!
//! All tensors of a model live in one contiguous `f64` buffer, indexed by
//! [`TensorId`]. Gradients mirror the same layout, which keeps freezing,
//! optimizer updates, clipping and checkpointing uniform across layers.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{self, DetRng};

/// The three trainable parts of a vision-language model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Component {
    Backbone,
    Projector,
    Lm,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Backbone, Component::Projector, Component::Lm];

    pub fn name(self) -> &'static str {
        match self {
            Component::Backbone => "backbone",
            Component::Projector => "projector",
            Component::Lm => "lm",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Component::Backbone => 1,
            Component::Projector => 2,
            Component::Lm => 4,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "component",
                name: s.into(),
            })
    }
}

/// A subset of [`Component`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ComponentSet(u8);

impl ComponentSet {
    pub const EMPTY: ComponentSet = ComponentSet(0);

    pub fn of(components: &[Component]) -> Self {
        ComponentSet(components.iter().fold(0, |acc, c| acc | c.bit()))
    }

    pub fn all() -> Self {
        Self::of(&Component::ALL)
    }

    pub fn contains(self, c: Component) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn with(self, c: Component) -> Self {
        ComponentSet(self.0 | c.bit())
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Component> {
        Component::ALL.into_iter().filter(move |c| self.contains(*c))
    }
}

impl fmt::Display for ComponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(c.name())?;
        }
        f.write_str("}")
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ComponentSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ComponentSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let list = Vec::<Component>::deserialize(d)?;
        Ok(ComponentSet::of(&list))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    pub component: Component,
    /// Whether decoupled weight decay applies (false for biases and norms).
    pub decay: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

impl TensorId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    specs: Vec<TensorSpec>,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        name: String,
        shape: &[usize],
        component: Component,
        decay: bool,
        init: Init,
        rng: &mut DetRng,
    ) -> TensorId {
        let len = shape.iter().product();
        let offset = self.data.len();
        match init {
            Init::Normal(std) => self
                .data
                .extend((0..len).map(|_| std * rng::normal(rng))),
            Init::Zeros => self.data.resize(offset + len, 0.0),
            Init::Ones => self.data.resize(offset + len, 1.0),
        }
        self.specs.push(TensorSpec {
            name,
            shape: shape.to_vec(),
            offset,
            len,
            component,
            decay,
        });
        TensorId(self.specs.len() - 1)
    }

    #[inline]
    pub fn get(&self, id: TensorId) -> &[f64] {
        let s = &self.specs[id.0];
        &self.data[s.offset..s.offset + s.len]
    }

    #[inline]
    pub fn get_mut(&mut self, id: TensorId) -> &mut [f64] {
        let s = &self.specs[id.0];
        &mut self.data[s.offset..s.offset + s.len]
    }

    pub fn spec(&self, id: TensorId) -> &TensorSpec {
        &self.specs[id.0]
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn ids(&self) -> impl Iterator<Item = TensorId> {
        (0..self.specs.len()).map(TensorId)
    }

    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.specs.iter().position(|s| s.name == name).map(TensorId)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn count(&self, components: ComponentSet) -> usize {
        self.specs
            .iter()
            .filter(|s| components.contains(s.component))
            .map(|s| s.len)
            .sum()
    }

    pub fn fill_component(&mut self, component: Component, value: f64) {
        for i in 0..self.specs.len() {
            if self.specs[i].component == component {
                self.get_mut(TensorId(i)).fill(value);
            }
        }
    }

    /// Replace all values, keeping the layout. Used when loading checkpoints.
    pub fn load_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.data.len() {
            return Err(Error::Dimension(alloc::format!(
                "expected {} parameters, got {}",
                self.data.len(),
                values.len()
            )));
        }
        self.data.copy_from_slice(values);
        Ok(())
    }
}

/// Gradient buffer aligned with a [`ParamStore`]. Only tensors belonging to
/// trainable components hand out slots; layers skip work for the rest.
#[derive(Debug, Clone)]
pub struct Grads {
    data: Vec<f64>,
    slots: Vec<(usize, usize, bool)>,
    trainable: ComponentSet,
}

impl Grads {
    pub fn new(store: &ParamStore, trainable: ComponentSet) -> Self {
        Grads {
            data: vec![0.0; store.len()],
            slots: store
                .specs
                .iter()
                .map(|s| (s.offset, s.len, trainable.contains(s.component)))
                .collect(),
            trainable,
        }
    }

    pub fn trainable(&self) -> ComponentSet {
        self.trainable
    }

    pub fn wants(&self, component: Component) -> bool {
        self.trainable.contains(component)
    }

    #[inline]
    pub fn slot(&mut self, id: TensorId) -> Option<&mut [f64]> {
        let (offset, len, active) = self.slots[id.0];
        active.then(|| &mut self.data[offset..offset + len])
    }

    pub fn get(&self, id: TensorId) -> &[f64] {
        let (offset, len, _) = self.slots[id.0];
        &self.data[offset..offset + len]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn zero(&mut self) {
        self.data.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_masking() {
        let mut rng = rng::seeded(0);
        let mut store = ParamStore::new();
        let a = store.add("a".into(), &[2, 3], Component::Backbone, true, Init::Normal(1.0), &mut rng);
        let b = store.add("b".into(), &[4], Component::Lm, false, Init::Ones, &mut rng);
        assert_eq!(store.len(), 10);
        assert_eq!(store.get(b), &[1.0; 4]);
        assert_eq!(store.count(ComponentSet::of(&[Component::Lm])), 4);
        let mut g = Grads::new(&store, ComponentSet::of(&[Component::Lm]));
        assert!(g.slot(a).is_none());
        g.slot(b).unwrap()[0] = 2.0;
        assert_eq!(g.data()[6], 2.0);
        store.fill_component(Component::Backbone, 0.0);
        assert!(store.get(a).iter().all(|v| *v == 0.0));
        assert_eq!(store.find("b"), Some(b));
    }

    #[test]
    fn component_set_display() {
        let set = ComponentSet::of(&[Component::Lm, Component::Projector]);
        assert_eq!(alloc::format!("{set}"), "{projector, lm}");
        assert!(!set.contains(Component::Backbone));
    }
}
