use std::collections::HashMap;

use super::Var;

/// A named vector of state bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateBlock {
    /// The `i`-th state of the path.
    Z(u32),
    /// The current-state side of the single transition copy.
    U,
    /// The next-state side of the single transition copy.
    V,
    /// Midpoint state introduced at a squaring level (levels count from 1).
    Mid(u32),
    /// Universal left endpoint at a squaring level.
    LevelU(u32),
    /// Universal right endpoint at a squaring level.
    LevelV(u32),
}

/// A group of Tseitin variables produced by one encoding call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Init,
    Bad,
    /// One copy of the transition cone; the payload is the step it encodes
    /// (always 0 for encodings with a single copy).
    Transition(u32),
    /// Auxiliary definitions tying state blocks together (equalities,
    /// antecedents); the payload distinguishes levels or steps.
    Link(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activation {
    Init,
    Bad,
    Transition,
    Stay,
}

/// What a solver variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    State { block: StateBlock, bit: u32 },
    Input { step: u32, bit: u32 },
    /// Defining variable of gate node `index`.
    Tseitin { group: Group, index: u32 },
    /// Auxiliary definition that does not correspond to a gate.
    Aux { group: Group, index: u32 },
    Activation(Activation),
}

/// Injective map from roles to variables `1..=len`, allocated densely.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    roles: Vec<Role>,
    index: HashMap<Role, Var>,
    groups: Vec<Group>,
}

impl VarMap {
    pub fn new() -> VarMap {
        VarMap::default()
    }

    pub fn alloc(&mut self, role: Role) -> Var {
        let var = Var::new(self.roles.len() as u32 + 1);
        let prev = self.index.insert(role, var);
        assert!(prev.is_none(), "role {role:?} allocated twice");
        self.roles.push(role);
        var
    }

    pub fn get(&self, role: Role) -> Option<Var> {
        self.index.get(&role).copied()
    }

    pub fn role(&self, var: Var) -> Role {
        self.roles[var.index() as usize - 1]
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn roles(&self) -> impl Iterator<Item = (Var, Role)> + '_ {
        self.roles
            .iter()
            .enumerate()
            .map(|(i, &r)| (Var::new(i as u32 + 1), r))
    }

    /// Variables of a state block, bit 0 first. Empty if the block is absent.
    pub fn state_vars(&self, block: StateBlock) -> Vec<Var> {
        (0..)
            .map_while(|bit| self.get(Role::State { block, bit }))
            .collect()
    }

    pub fn input_vars(&self, step: u32) -> Vec<Var> {
        (0..)
            .map_while(|bit| self.get(Role::Input { step, bit }))
            .collect()
    }

    pub(crate) fn open_group(&mut self, group: Group) {
        self.groups.push(group);
    }

    /// Tseitin groups opened so far, in order, including groups that
    /// ended up with no variables.
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn count_groups(&self, pred: impl Fn(Group) -> bool) -> usize {
        self.groups.iter().filter(|&&g| pred(g)).count()
    }

    /// Variables introduced by clause-form translation (gates and auxiliaries).
    pub fn num_definitions(&self) -> usize {
        self.count_roles(|r| matches!(r, Role::Tseitin { .. } | Role::Aux { .. }))
    }

    pub fn count_roles(&self, pred: impl Fn(Role) -> bool) -> usize {
        self.roles.iter().filter(|&&r| pred(r)).count()
    }
}
