//! Named parameter arrays partitioned into the four networks.

use std::collections::HashMap;
use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use alae_autodiff::{Array, Float, Tape, Var};

/// Which of the four networks a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    /// F: prior space to latent space.
    Mapper,
    /// G: latent space to data space.
    Generator,
    /// E: data space to latent space.
    Encoder,
    /// D: latent space to score.
    Discriminator,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Mapper, Group::Generator, Group::Encoder, Group::Discriminator];

    pub fn tag(self) -> u8 {
        match self {
            Group::Mapper => 0,
            Group::Generator => 1,
            Group::Encoder => 2,
            Group::Discriminator => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn letter(self) -> char {
        match self {
            Group::Mapper => 'F',
            Group::Generator => 'G',
            Group::Encoder => 'E',
            Group::Discriminator => 'D',
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub group: Group,
    pub value: Arc<Array<T>>,
}

/// Ordered parameter storage. Insertion order is stable and defines the
/// checkpoint layout.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T: Float> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Array<T>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            group,
            value: Arc::new(value),
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array<T> {
        Arc::make_mut(&mut self.params[id.0].value)
    }

    pub fn set(&mut self, id: ParamId, value: Array<T>) {
        assert_eq!(
            value.shape(),
            self.params[id.0].value.shape(),
            "shape change for {}",
            self.params[id.0].name
        );
        self.params[id.0].value = Arc::new(value);
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn count_group(&self, group: Group) -> usize {
        self.params.iter().filter(|p| p.group == group).map(|p| p.value.len()).sum()
    }

    /// Records every parameter on `tape`; only groups in `trainable` require
    /// gradients.
    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: &[Group]) -> Bound<'t, T> {
        let vars = self
            .params
            .iter()
            .map(|p| tape.shared_leaf(p.value.clone(), trainable.contains(&p.group)))
            .collect();
        let trainable_ids = self
            .params
            .iter()
            .enumerate()
            .filter(|(_, p)| trainable.contains(&p.group))
            .map(|(i, _)| ParamId(i))
            .collect();
        Bound {
            tape,
            vars,
            trainable: trainable_ids,
        }
    }

    /// FNV-1a digest of the raw bits of every parameter in `group`.
    pub fn group_digest(&self, group: Group) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in self.params.iter().filter(|p| p.group == group) {
            for v in p.value.data() {
                for b in v.as_f64().to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}

/// Parameters recorded on one tape.
pub struct Bound<'t, T: Float> {
    tape: &'t Tape<T>,
    vars: Vec<Var<'t, T>>,
    trainable: Vec<ParamId>,
}

impl<'t, T: Float> Bound<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn trainable(&self) -> &[ParamId] {
        &self.trainable
    }

    pub fn trainable_vars(&self) -> Vec<Var<'t, T>> {
        self.trainable.iter().map(|id| self.vars[id.0]).collect()
    }

    pub fn var(&self, id: ParamId) -> Var<'t, T> {
        self.vars[id.0]
    }
}

impl<'t, T: Float> Index<ParamId> for Bound<'t, T> {
    type Output = Var<'t, T>;
    fn index(&self, id: ParamId) -> &Var<'t, T> {
        &self.vars[id.0]
    }
}
