//! Abstract syntax shared by the unrestricted language (U), the linear
//! language (L) and their combination.
//!
//! U and L expressions are mutually nested through the two boundary forms
//! [`UExpr::Boundary`] (an L configuration seen from U) and
//! [`LExpr::FromU`] (a U term seen from L). Internal L terms additionally
//! carry locations and `share` nodes that capture a local [`Store`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

pub type Name = String;

static FRESH: AtomicUsize = AtomicUsize::new(0);

/// A variable name derived from `base` that no parser-produced identifier
/// can collide with unless the user writes `$` themselves.
pub fn fresh_name(base: &str) -> Name {
    let stem = base.split('$').next().unwrap_or(base);
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    format!("{stem}${n}")
}

/// Which summand an injection or case arm refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn keyword(self) -> &'static str {
        match self {
            Side::Left => "inl",
            Side::Right => "inr",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UType {
    Var(Name),
    Unit,
    Prod(Box<UType>, Box<UType>),
    Sum(Box<UType>, Box<UType>),
    Fun(Box<UType>, Box<UType>),
    Mu(Name, Box<UType>),
    Forall(Name, Box<UType>),
}

impl UType {
    pub fn prod(a: UType, b: UType) -> UType {
        UType::Prod(Box::new(a), Box::new(b))
    }
    pub fn sum(a: UType, b: UType) -> UType {
        UType::Sum(Box::new(a), Box::new(b))
    }
    pub fn fun(a: UType, b: UType) -> UType {
        UType::Fun(Box::new(a), Box::new(b))
    }
    pub fn mu(a: impl Into<Name>, body: UType) -> UType {
        UType::Mu(a.into(), Box::new(body))
    }
    pub fn forall(a: impl Into<Name>, body: UType) -> UType {
        UType::Forall(a.into(), Box::new(body))
    }
    pub fn var(a: impl Into<Name>) -> UType {
        UType::Var(a.into())
    }

    pub fn size(&self) -> usize {
        match self {
            UType::Var(_) | UType::Unit => 1,
            UType::Prod(a, b) | UType::Sum(a, b) | UType::Fun(a, b) => 1 + a.size() + b.size(),
            UType::Mu(_, b) | UType::Forall(_, b) => 1 + b.size(),
        }
    }

    /// True when no function or universal type occurs (ignoring recursion).
    pub fn is_first_order(&self) -> bool {
        match self {
            UType::Var(_) | UType::Unit => true,
            UType::Prod(a, b) | UType::Sum(a, b) => a.is_first_order() && b.is_first_order(),
            UType::Mu(_, b) => b.is_first_order(),
            UType::Fun(..) | UType::Forall(..) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LType {
    Var(Name),
    Unit,
    Tensor(Box<LType>, Box<LType>),
    Plus(Box<LType>, Box<LType>),
    Lolli(Box<LType>, Box<LType>),
    Mu(Name, Box<LType>),
    Bang(Box<LType>),
    /// A full location holding a value of the payload type.
    Boxed(Box<LType>),
    /// An allocated but empty location.
    EmptyBox,
    /// An opaque U value.
    Lump(UType),
}

impl LType {
    pub fn tensor(a: LType, b: LType) -> LType {
        LType::Tensor(Box::new(a), Box::new(b))
    }
    pub fn plus(a: LType, b: LType) -> LType {
        LType::Plus(Box::new(a), Box::new(b))
    }
    pub fn lolli(a: LType, b: LType) -> LType {
        LType::Lolli(Box::new(a), Box::new(b))
    }
    pub fn mu(a: impl Into<Name>, body: LType) -> LType {
        LType::Mu(a.into(), Box::new(body))
    }
    pub fn bang(a: LType) -> LType {
        LType::Bang(Box::new(a))
    }
    pub fn boxed(a: LType) -> LType {
        LType::Boxed(Box::new(a))
    }
    pub fn var(a: impl Into<Name>) -> LType {
        LType::Var(a.into())
    }

    /// Values of this type may be freely duplicated and discarded.
    pub fn duplicable(&self) -> bool {
        matches!(self, LType::Bang(_))
    }

    pub fn size(&self) -> usize {
        match self {
            LType::Var(_) | LType::Unit | LType::EmptyBox => 1,
            LType::Lump(t) => 1 + t.size(),
            LType::Tensor(a, b) | LType::Plus(a, b) | LType::Lolli(a, b) => {
                1 + a.size() + b.size()
            }
            LType::Mu(_, b) | LType::Bang(b) | LType::Boxed(b) => 1 + b.size(),
        }
    }
}

/// A reference to a node of either language, for traversals.
#[derive(Clone, Copy, Debug)]
pub enum Node<'a> {
    U(&'a UExpr),
    L(&'a LExpr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UExpr {
    Var(Name),
    Unit,
    Pair(Box<UExpr>, Box<UExpr>),
    Fst(Box<UExpr>),
    Snd(Box<UExpr>),
    LetUnit(Box<UExpr>, Box<UExpr>),
    Lam(Name, UType, Box<UExpr>),
    App(Box<UExpr>, Box<UExpr>),
    /// Injection annotated with the full sum type.
    Inj(Side, UType, Box<UExpr>),
    Case(Box<UExpr>, Name, Box<UExpr>, Name, Box<UExpr>),
    /// Fold annotated with the recursive type.
    Fold(UType, Box<UExpr>),
    Unfold(Box<UExpr>),
    TyAbs(Name, Box<UExpr>),
    TyApp(Box<UExpr>, UType),
    /// `UL σ e`: an L configuration embedded in U.
    Boundary(Store, Box<LExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LExpr {
    Var(Name),
    Unit,
    Pair(Box<LExpr>, Box<LExpr>),
    LetPair(Name, Name, Box<LExpr>, Box<LExpr>),
    LetUnit(Box<LExpr>, Box<LExpr>),
    Lam(Name, LType, Box<LExpr>),
    App(Box<LExpr>, Box<LExpr>),
    Inj(Side, LType, Box<LExpr>),
    Case(Box<LExpr>, Name, Box<LExpr>, Name, Box<LExpr>),
    Fold(LType, Box<LExpr>),
    Unfold(Box<LExpr>),
    /// `share σ e`: the locations of `σ` are bound by this node.
    Share(Store, Box<LExpr>),
    Copy(Box<LExpr>),
    New(Box<LExpr>),
    Free(Box<LExpr>),
    BoxUp(Box<LExpr>),
    Unbox(Box<LExpr>),
    Loc(Location),
    /// A lumped U value `⌊v⌋`.
    LumpVal(Box<UExpr>),
    /// `LU e`: a U term embedded in L.
    FromU(Box<UExpr>),
    Lump(LType, Box<LExpr>),
    Unlump(LType, Box<LExpr>),
    /// Evaluation-transparent marker naming a phase for statistics.
    Phase(Name, Box<LExpr>),
}

// Small constructors; the generators and elaborator build a lot of terms.
impl UExpr {
    pub fn var(x: impl Into<Name>) -> UExpr {
        UExpr::Var(x.into())
    }
    pub fn pair(a: UExpr, b: UExpr) -> UExpr {
        UExpr::Pair(Box::new(a), Box::new(b))
    }
    pub fn fst(a: UExpr) -> UExpr {
        UExpr::Fst(Box::new(a))
    }
    pub fn snd(a: UExpr) -> UExpr {
        UExpr::Snd(Box::new(a))
    }
    pub fn let_unit(a: UExpr, b: UExpr) -> UExpr {
        UExpr::LetUnit(Box::new(a), Box::new(b))
    }
    pub fn lam(x: impl Into<Name>, t: UType, body: UExpr) -> UExpr {
        UExpr::Lam(x.into(), t, Box::new(body))
    }
    pub fn app(f: UExpr, a: UExpr) -> UExpr {
        UExpr::App(Box::new(f), Box::new(a))
    }
    pub fn inj(side: Side, t: UType, e: UExpr) -> UExpr {
        UExpr::Inj(side, t, Box::new(e))
    }
    pub fn case(
        e: UExpr,
        x: impl Into<Name>,
        l: UExpr,
        y: impl Into<Name>,
        r: UExpr,
    ) -> UExpr {
        UExpr::Case(Box::new(e), x.into(), Box::new(l), y.into(), Box::new(r))
    }
    pub fn fold(t: UType, e: UExpr) -> UExpr {
        UExpr::Fold(t, Box::new(e))
    }
    pub fn unfold(e: UExpr) -> UExpr {
        UExpr::Unfold(Box::new(e))
    }
    pub fn ty_abs(a: impl Into<Name>, e: UExpr) -> UExpr {
        UExpr::TyAbs(a.into(), Box::new(e))
    }
    pub fn ty_app(e: UExpr, t: UType) -> UExpr {
        UExpr::TyApp(Box::new(e), t)
    }
    /// Surface boundary with empty store.
    pub fn ul(e: LExpr) -> UExpr {
        UExpr::Boundary(Store::new(), Box::new(e))
    }

    /// `let x : t = e in body` as a beta-redex.
    pub fn let_in(x: impl Into<Name>, t: UType, e: UExpr, body: UExpr) -> UExpr {
        UExpr::app(UExpr::lam(x, t, body), e)
    }

    pub fn is_value(&self) -> bool {
        match self {
            UExpr::Var(_) | UExpr::Unit | UExpr::Lam(..) => true,
            UExpr::Pair(a, b) => a.is_value() && b.is_value(),
            UExpr::Inj(_, _, e) | UExpr::Fold(_, e) | UExpr::TyAbs(_, e) => e.is_value(),
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Pre-order traversal over every U and L node reachable from `self`,
    /// including values stored in embedded stores.
    pub fn visit(&self, f: &mut dyn FnMut(Node<'_>)) {
        f(Node::U(self));
        match self {
            UExpr::Var(_) | UExpr::Unit => {}
            UExpr::Pair(a, b) | UExpr::LetUnit(a, b) | UExpr::App(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            UExpr::Fst(a)
            | UExpr::Snd(a)
            | UExpr::Lam(_, _, a)
            | UExpr::Inj(_, _, a)
            | UExpr::Fold(_, a)
            | UExpr::Unfold(a)
            | UExpr::TyAbs(_, a)
            | UExpr::TyApp(a, _) => a.visit(f),
            UExpr::Case(e, _, l, _, r) => {
                e.visit(f);
                l.visit(f);
                r.visit(f);
            }
            UExpr::Boundary(store, e) => {
                store.visit_values(f);
                e.visit(f);
            }
        }
    }
}

impl LExpr {
    pub fn var(x: impl Into<Name>) -> LExpr {
        LExpr::Var(x.into())
    }
    pub fn pair(a: LExpr, b: LExpr) -> LExpr {
        LExpr::Pair(Box::new(a), Box::new(b))
    }
    pub fn let_pair(x: impl Into<Name>, y: impl Into<Name>, e: LExpr, body: LExpr) -> LExpr {
        LExpr::LetPair(x.into(), y.into(), Box::new(e), Box::new(body))
    }
    pub fn let_unit(a: LExpr, b: LExpr) -> LExpr {
        LExpr::LetUnit(Box::new(a), Box::new(b))
    }
    pub fn lam(x: impl Into<Name>, t: LType, body: LExpr) -> LExpr {
        LExpr::Lam(x.into(), t, Box::new(body))
    }
    pub fn app(f: LExpr, a: LExpr) -> LExpr {
        LExpr::App(Box::new(f), Box::new(a))
    }
    pub fn inj(side: Side, t: LType, e: LExpr) -> LExpr {
        LExpr::Inj(side, t, Box::new(e))
    }
    pub fn case(
        e: LExpr,
        x: impl Into<Name>,
        l: LExpr,
        y: impl Into<Name>,
        r: LExpr,
    ) -> LExpr {
        LExpr::Case(Box::new(e), x.into(), Box::new(l), y.into(), Box::new(r))
    }
    pub fn fold(t: LType, e: LExpr) -> LExpr {
        LExpr::Fold(t, Box::new(e))
    }
    pub fn unfold(e: LExpr) -> LExpr {
        LExpr::Unfold(Box::new(e))
    }
    /// Surface `share e`, capturing the empty store.
    pub fn share(e: LExpr) -> LExpr {
        LExpr::Share(Store::new(), Box::new(e))
    }
    pub fn share_with(store: Store, e: LExpr) -> LExpr {
        LExpr::Share(store, Box::new(e))
    }
    pub fn copy(e: LExpr) -> LExpr {
        LExpr::Copy(Box::new(e))
    }
    pub fn new_loc(e: LExpr) -> LExpr {
        LExpr::New(Box::new(e))
    }
    pub fn free(e: LExpr) -> LExpr {
        LExpr::Free(Box::new(e))
    }
    pub fn box_up(e: LExpr) -> LExpr {
        LExpr::BoxUp(Box::new(e))
    }
    pub fn unbox(e: LExpr) -> LExpr {
        LExpr::Unbox(Box::new(e))
    }
    pub fn from_u(e: UExpr) -> LExpr {
        LExpr::FromU(Box::new(e))
    }
    pub fn lump_val(v: UExpr) -> LExpr {
        LExpr::LumpVal(Box::new(v))
    }
    pub fn lump(t: LType, e: LExpr) -> LExpr {
        LExpr::Lump(t, Box::new(e))
    }
    pub fn unlump(t: LType, e: LExpr) -> LExpr {
        LExpr::Unlump(t, Box::new(e))
    }
    pub fn let_in(x: impl Into<Name>, t: LType, e: LExpr, body: LExpr) -> LExpr {
        LExpr::app(LExpr::lam(x, t, body), e)
    }

    pub fn is_value(&self) -> bool {
        match self {
            LExpr::Var(_) | LExpr::Unit | LExpr::Lam(..) | LExpr::Loc(_) | LExpr::LumpVal(_) => {
                true
            }
            LExpr::Pair(a, b) => a.is_value() && b.is_value(),
            LExpr::Inj(_, _, e) | LExpr::Fold(_, e) | LExpr::Share(_, e) => e.is_value(),
            _ => false,
        }
    }

    /// Membership in the surface fragment: no locations, no non-empty
    /// captured stores, no lumped values.
    pub fn is_surface(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |n| match n {
            Node::U(UExpr::Boundary(s, _)) => ok &= s.is_empty(),
            Node::L(LExpr::Loc(_) | LExpr::LumpVal(_)) => ok = false,
            Node::L(LExpr::Share(s, _)) => ok &= s.is_empty(),
            _ => {}
        });
        ok
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    pub fn visit(&self, f: &mut dyn FnMut(Node<'_>)) {
        f(Node::L(self));
        match self {
            LExpr::Var(_) | LExpr::Unit | LExpr::Loc(_) => {}
            LExpr::Pair(a, b) | LExpr::LetUnit(a, b) | LExpr::App(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            LExpr::LetPair(_, _, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            LExpr::Lam(_, _, a)
            | LExpr::Inj(_, _, a)
            | LExpr::Fold(_, a)
            | LExpr::Unfold(a)
            | LExpr::Copy(a)
            | LExpr::New(a)
            | LExpr::Free(a)
            | LExpr::BoxUp(a)
            | LExpr::Unbox(a)
            | LExpr::Lump(_, a)
            | LExpr::Unlump(_, a)
            | LExpr::Phase(_, a) => a.visit(f),
            LExpr::Case(e, _, l, _, r) => {
                e.visit(f);
                l.visit(f);
                r.visit(f);
            }
            LExpr::Share(store, e) => {
                store.visit_values(f);
                e.visit(f);
            }
            LExpr::LumpVal(u) | LExpr::FromU(u) => u.visit(f),
        }
    }
}

/// A store location. Displayed as `#n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location(pub u64);

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Monotone generator of fresh locations.
#[derive(Clone, Debug, Default)]
pub struct LocSupply {
    next: u64,
}

impl LocSupply {
    pub fn starting_at(next: u64) -> Self {
        LocSupply { next }
    }

    /// A supply guaranteed not to re-issue any location occurring in `e`.
    pub fn above_u(e: &UExpr) -> Self {
        LocSupply::starting_at(max_location_u(e).map_or(0, |l| l.0 + 1))
    }

    pub fn above_l(store: &Store, e: &LExpr) -> Self {
        let a = max_location_l(e);
        let b = store.max_location();
        LocSupply::starting_at(a.max(b).map_or(0, |l| l.0 + 1))
    }

    pub fn fresh(&mut self) -> Location {
        let l = Location(self.next);
        self.next += 1;
        l
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

fn max_location_u(e: &UExpr) -> Option<Location> {
    let mut best = None;
    e.visit(&mut |n| max_location_node(n, &mut best));
    best
}

fn max_location_l(e: &LExpr) -> Option<Location> {
    let mut best = None;
    e.visit(&mut |n| max_location_node(n, &mut best));
    best
}

fn max_location_node(n: Node<'_>, best: &mut Option<Location>) {
    match n {
        Node::U(UExpr::Boundary(s, _)) | Node::L(LExpr::Share(s, _)) => {
            *best = (*best).max(s.max_location())
        }
        Node::L(LExpr::Loc(x)) => *best = (*best).max(Some(*x)),
        _ => {}
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Empty,
    /// A value together with the local store it owns.
    Full(Store, LExpr),
}

/// Finite map from locations to slots. Nested stores are owned by the
/// values they sit next to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Store(BTreeMap<Location, Slot>);

impl Store {
    pub fn new() -> Self {
        Store(BTreeMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, l: Location) -> Option<&Slot> {
        self.0.get(&l)
    }

    pub fn contains(&self, l: Location) -> bool {
        self.0.contains_key(&l)
    }

    pub fn insert(&mut self, l: Location, slot: Slot) -> Option<Slot> {
        self.0.insert(l, slot)
    }

    pub fn remove(&mut self, l: Location) -> Option<Slot> {
        self.0.remove(&l)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Location, &Slot)> {
        self.0.iter()
    }

    /// Top-level domain.
    pub fn locations(&self) -> BTreeSet<Location> {
        self.0.keys().copied().collect()
    }

    pub fn singleton(l: Location, slot: Slot) -> Store {
        let mut s = Store::new();
        s.insert(l, slot);
        s
    }

    /// Disjoint union; `None` when the domains overlap.
    pub fn join(&self, other: &Store) -> Option<Store> {
        let mut out = self.clone();
        for (l, slot) in other.iter() {
            if out.insert(*l, slot.clone()).is_some() {
                return None;
            }
        }
        Some(out)
    }

    /// Moves every slot of `other` into `self`; returns the first clashing
    /// location, leaving `self` partially updated.
    pub fn absorb(&mut self, other: Store) -> Result<(), Location> {
        for (l, slot) in other.0 {
            if self.0.contains_key(&l) {
                return Err(l);
            }
            self.0.insert(l, slot);
        }
        Ok(())
    }

    /// Removes and returns the sub-store restricted to `locs`.
    pub fn split_off(&mut self, locs: &BTreeSet<Location>) -> Store {
        let mut out = Store::new();
        for l in locs {
            if let Some(slot) = self.0.remove(l) {
                out.0.insert(*l, slot);
            }
        }
        out
    }

    pub fn restrict(&self, locs: &BTreeSet<Location>) -> Store {
        Store(
            self.0
                .iter()
                .filter(|(l, _)| locs.contains(l))
                .map(|(l, s)| (*l, s.clone()))
                .collect(),
        )
    }

    pub fn max_location(&self) -> Option<Location> {
        let mut best = self.0.keys().next_back().copied();
        for slot in self.0.values() {
            if let Slot::Full(inner, v) = slot {
                best = best.max(inner.max_location()).max(max_location_l(v));
            }
        }
        best
    }

    /// Every location bound at any depth: this store's domain plus the
    /// domains of stores nested in its slots (not those under `share`).
    pub fn all_locations(&self) -> Vec<Location> {
        let mut out = Vec::new();
        for (l, slot) in &self.0 {
            out.push(*l);
            if let Slot::Full(inner, _) = slot {
                out.extend(inner.all_locations());
            }
        }
        out
    }

    pub(crate) fn visit_values(&self, f: &mut dyn FnMut(Node<'_>)) {
        for slot in self.0.values() {
            if let Slot::Full(inner, v) = slot {
                inner.visit_values(f);
                v.visit(f);
            }
        }
    }
}

impl FromIterator<(Location, Slot)> for Store {
    fn from_iter<I: IntoIterator<Item = (Location, Slot)>>(iter: I) -> Self {
        Store(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StoreEntry {
    /// The location must be empty.
    Dead,
    /// The location holds a value of type `ty` owning a store typed by
    /// `inner`. The owned variable context is always empty for closed
    /// configurations, so it is not represented.
    Alive { inner: StoreTyping, ty: LType },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StoreTyping(BTreeMap<Location, StoreEntry>);

impl StoreTyping {
    pub fn new() -> Self {
        StoreTyping(BTreeMap::new())
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn get(&self, l: Location) -> Option<&StoreEntry> {
        self.0.get(&l)
    }
    pub fn insert(&mut self, l: Location, e: StoreEntry) -> Option<StoreEntry> {
        self.0.insert(l, e)
    }
    pub fn iter(&self) -> impl Iterator<Item = (&Location, &StoreEntry)> {
        self.0.iter()
    }
    pub fn locations(&self) -> BTreeSet<Location> {
        self.0.keys().copied().collect()
    }

    /// Disjoint union; `None` on overlap.
    pub fn join(&self, other: &StoreTyping) -> Option<StoreTyping> {
        let mut out = self.clone();
        for (l, e) in other.iter() {
            if out.insert(*l, e.clone()).is_some() {
                return None;
            }
        }
        Some(out)
    }
}

impl FromIterator<(Location, StoreEntry)> for StoreTyping {
    fn from_iter<I: IntoIterator<Item = (Location, StoreEntry)>>(iter: I) -> Self {
        StoreTyping(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    U(UType),
    TyVar,
    L(LType),
    /// A linear L variable that is out of reach because a U layer sits
    /// between its binder and the current position.
    Hidden(LType),
}

/// Mixed typing context. Later entries shadow earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MixedContext {
    entries: Vec<(Name, Binding)>,
}

impl MixedContext {
    pub fn new() -> Self {
        MixedContext::default()
    }

    pub fn with(mut self, x: impl Into<Name>, b: Binding) -> Self {
        self.push(x, b);
        self
    }

    pub fn push(&mut self, x: impl Into<Name>, b: Binding) {
        self.entries.push((x.into(), b));
    }

    pub fn pop(&mut self) -> Option<(Name, Binding)> {
        self.entries.pop()
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, x: &str) -> Option<&Binding> {
        self.entries.iter().rev().find(|(n, _)| n == x).map(|(_, b)| b)
    }

    pub fn has_tyvar(&self, a: &str) -> bool {
        self.entries
            .iter()
            .any(|(n, b)| n == a && matches!(b, Binding::TyVar))
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &(Name, Binding)> {
        self.entries.iter()
    }

    /// The context seen from inside a U layer: linear L variables become
    /// unreachable.
    pub fn bang(&self) -> MixedContext {
        MixedContext {
            entries: self
                .entries
                .iter()
                .map(|(n, b)| match b {
                    Binding::L(t) if !t.duplicable() => (n.clone(), Binding::Hidden(t.clone())),
                    _ => (n.clone(), b.clone()),
                })
                .collect(),
        }
    }

    /// Names of the visible, non-duplicable L variables (innermost binding
    /// of each name only).
    pub fn linear_vars(&self) -> BTreeSet<Name> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        for (n, b) in self.entries.iter().rev() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if let Binding::L(t) = b {
                if !t.duplicable() {
                    out.insert(n.clone());
                }
            }
        }
        out
    }
}

/// A store paired with an L expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub store: Store,
    pub expr: LExpr,
}

impl Configuration {
    pub fn new(store: Store, expr: LExpr) -> Self {
        Configuration { store, expr }
    }

    pub fn surface(expr: LExpr) -> Self {
        Configuration { store: Store::new(), expr }
    }
}
