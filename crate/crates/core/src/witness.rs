//! Witness graphs, embeddings with inverse indices, and the checker for the
//! witness definition.
//!
//! A witness bundle holds a multigraph `W` over a cluster's vertex set, an
//! embedding mapping each witness edge to a path of host edge ids, the slack
//! vector `r` and the parameters `ψ`, `φ`. Parallel witness edges produced
//! from one flow path are stored once with a multiplicity; every count
//! (degrees, cuts, congestion, cascade increments) weighs by multiplicity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;

use crate::graph::{EdgeId, GraphView, VertexId};
use crate::ratio::{floor_u64, from_u64, Ratio};
use crate::vecmap::VertexVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WEdgeId(pub u32);

impl WEdgeId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
struct WEdge {
    tail: VertexId,
    head: VertexId,
    mult: u64,
    alive: bool,
}

#[derive(Debug, Clone, Default)]
struct WVert {
    degree: u64,
    out: Vec<WEdgeId>,
    inc: Vec<WEdgeId>,
}

/// Sparse multigraph over host vertex ids with weighted parallel edges.
#[derive(Debug, Clone, Default)]
pub struct WitnessGraph {
    verts: BTreeMap<VertexId, WVert>,
    edges: Vec<WEdge>,
    live_groups: u64,
    volume: u64,
}

impl WitnessGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ensure_vertex(&mut self, v: VertexId) {
        self.verts.entry(v).or_default();
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.verts.contains_key(&v)
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.verts.keys().copied()
    }

    pub fn vertex_set(&self) -> BTreeSet<VertexId> {
        self.verts.keys().copied().collect()
    }

    pub fn degree(&self, v: VertexId) -> u64 {
        self.verts.get(&v).map(|w| w.degree).unwrap_or(0)
    }

    pub fn volume_total(&self) -> u64 {
        self.volume
    }

    pub fn vol_of<'a, I: IntoIterator<Item = &'a VertexId>>(&self, set: I) -> u64 {
        set.into_iter().map(|&v| self.degree(v)).sum()
    }

    pub fn edge_group_count(&self) -> u64 {
        self.live_groups
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.edges.iter().filter(|e| e.alive).map(|e| e.mult).sum()
    }

    pub fn add_edge(&mut self, tail: VertexId, head: VertexId, mult: u64) -> WEdgeId {
        debug_assert!(mult > 0);
        self.ensure_vertex(tail);
        self.ensure_vertex(head);
        let id = WEdgeId(self.edges.len() as u32);
        self.edges.push(WEdge {
            tail,
            head,
            mult,
            alive: true,
        });
        self.verts.get_mut(&tail).unwrap().out.push(id);
        self.verts.get_mut(&head).unwrap().inc.push(id);
        if tail == head {
            self.verts.get_mut(&tail).unwrap().degree += 2 * mult;
        } else {
            self.verts.get_mut(&tail).unwrap().degree += mult;
            self.verts.get_mut(&head).unwrap().degree += mult;
        }
        self.volume += 2 * mult;
        self.live_groups += 1;
        id
    }

    pub fn remove_edge(&mut self, id: WEdgeId) -> (VertexId, VertexId, u64) {
        let e = &mut self.edges[id.index()];
        debug_assert!(e.alive);
        e.alive = false;
        let (tail, head, mult) = (e.tail, e.head, e.mult);
        retain(&mut self.verts.get_mut(&tail).unwrap().out, id);
        retain(&mut self.verts.get_mut(&head).unwrap().inc, id);
        if tail == head {
            self.verts.get_mut(&tail).unwrap().degree -= 2 * mult;
        } else {
            self.verts.get_mut(&tail).unwrap().degree -= mult;
            self.verts.get_mut(&head).unwrap().degree -= mult;
        }
        self.volume -= 2 * mult;
        self.live_groups -= 1;
        (tail, head, mult)
    }

    pub fn endpoints(&self, id: WEdgeId) -> (VertexId, VertexId, u64) {
        let e = &self.edges[id.index()];
        (e.tail, e.head, e.mult)
    }

    pub fn is_alive(&self, id: WEdgeId) -> bool {
        self.edges.get(id.index()).map(|e| e.alive).unwrap_or(false)
    }

    /// Alive edge groups incident to `v`, loops listed once.
    pub fn incident(&self, v: VertexId) -> BTreeSet<WEdgeId> {
        let mut out = BTreeSet::new();
        if let Some(w) = self.verts.get(&v) {
            out.extend(w.out.iter().copied());
            out.extend(w.inc.iter().copied());
        }
        out
    }

    pub fn live_edges(&self) -> impl Iterator<Item = (WEdgeId, VertexId, VertexId, u64)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.alive)
            .map(|(i, e)| (WEdgeId(i as u32), e.tail, e.head, e.mult))
    }

    fn remap_tail(&mut self, id: WEdgeId, new_tail: VertexId) {
        let (old_tail, head, mult) = self.endpoints(id);
        if old_tail == new_tail {
            return;
        }
        self.ensure_vertex(new_tail);
        retain(&mut self.verts.get_mut(&old_tail).unwrap().out, id);
        self.verts.get_mut(&new_tail).unwrap().out.push(id);
        let was_loop = old_tail == head;
        let is_loop = new_tail == head;
        self.edges[id.index()].tail = new_tail;
        self.fix_degrees(old_tail, new_tail, head, was_loop, is_loop, mult);
    }

    fn remap_head(&mut self, id: WEdgeId, new_head: VertexId) {
        let (tail, old_head, mult) = self.endpoints(id);
        if old_head == new_head {
            return;
        }
        self.ensure_vertex(new_head);
        retain(&mut self.verts.get_mut(&old_head).unwrap().inc, id);
        self.verts.get_mut(&new_head).unwrap().inc.push(id);
        let was_loop = tail == old_head;
        let is_loop = tail == new_head;
        self.edges[id.index()].head = new_head;
        self.fix_degrees(old_head, new_head, tail, was_loop, is_loop, mult);
    }

    fn fix_degrees(
        &mut self,
        moved_from: VertexId,
        moved_to: VertexId,
        other: VertexId,
        was_loop: bool,
        is_loop: bool,
        mult: u64,
    ) {
        let from_share = if was_loop { 2 * mult } else { mult };
        let to_share = if is_loop { 2 * mult } else { mult };
        self.verts.get_mut(&moved_from).unwrap().degree -= from_share;
        self.verts.get_mut(&moved_to).unwrap().degree += to_share;
        // the stationary endpoint's share changes only if loop-ness flipped
        if was_loop && !is_loop {
            self.verts.get_mut(&other).unwrap().degree += mult;
        } else if !was_loop && is_loop {
            self.verts.get_mut(&other).unwrap().degree -= mult;
        }
    }

    /// Recomputes degrees from scratch; test helper.
    pub fn check_consistency(&self) -> Result<()> {
        let mut deg: BTreeMap<VertexId, u64> = self.verts.keys().map(|&v| (v, 0)).collect();
        for e in self.edges.iter().filter(|e| e.alive) {
            if e.tail == e.head {
                *deg.get_mut(&e.tail).unwrap() += 2 * e.mult;
            } else {
                *deg.get_mut(&e.tail).unwrap() += e.mult;
                *deg.get_mut(&e.head).unwrap() += e.mult;
            }
        }
        for (v, w) in &self.verts {
            if deg[v] != w.degree {
                return Err(Error::Postcondition(format!(
                    "witness degree mismatch at {v}: {} vs {}",
                    w.degree, deg[v]
                )));
            }
        }
        Ok(())
    }
}

fn retain(list: &mut Vec<WEdgeId>, id: WEdgeId) {
    if let Some(pos) = list.iter().position(|&x| x == id) {
        list.swap_remove(pos);
    }
}

/// Forward paths plus the inverse index host-edge -> witness-edge groups.
#[derive(Debug, Clone, Default)]
pub struct Embedding {
    forward: HashMap<WEdgeId, Box<[EdgeId]>>,
    inverse: HashMap<EdgeId, Vec<WEdgeId>>,
}

impl Embedding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, we: WEdgeId, path: Vec<EdgeId>) {
        for &e in &path {
            self.inverse.entry(e).or_default().push(we);
        }
        self.forward.insert(we, path.into_boxed_slice());
    }

    pub fn path(&self, we: WEdgeId) -> Option<&[EdgeId]> {
        self.forward.get(&we).map(|p| p.as_ref())
    }

    pub fn remove(&mut self, we: WEdgeId) -> Option<Box<[EdgeId]>> {
        let path = self.forward.remove(&we)?;
        for e in path.iter() {
            if let Some(list) = self.inverse.get_mut(e) {
                if let Some(pos) = list.iter().position(|&x| x == we) {
                    list.swap_remove(pos);
                }
                if list.is_empty() {
                    self.inverse.remove(e);
                }
            }
        }
        Some(path)
    }

    /// Witness edge groups whose path uses `e_host`, ascending and deduped.
    pub fn users_of(&self, e_host: EdgeId) -> Vec<WEdgeId> {
        let mut v = self.inverse.get(&e_host).cloned().unwrap_or_default();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Multiplicity-weighted congestion of one host edge.
    pub fn congestion(&self, e_host: EdgeId, w: &WitnessGraph) -> u64 {
        self.inverse
            .get(&e_host)
            .map(|list| list.iter().map(|&we| w.endpoints(we).2).sum())
            .unwrap_or(0)
    }

    pub fn max_congestion(&self, w: &WitnessGraph) -> u64 {
        self.inverse
            .keys()
            .map(|&e| self.congestion(e, w))
            .max()
            .unwrap_or(0)
    }

    /// Rebuilds the inverse index from forward paths and compares; the
    /// incremental index must match exactly.
    pub fn inverse_matches_forward(&self) -> bool {
        let mut want: BTreeMap<EdgeId, BTreeMap<WEdgeId, usize>> = BTreeMap::new();
        for (&we, path) in &self.forward {
            for &e in path.iter() {
                *want.entry(e).or_default().entry(we).or_default() += 1;
            }
        }
        let mut got: BTreeMap<EdgeId, BTreeMap<WEdgeId, usize>> = BTreeMap::new();
        for (&e, list) in &self.inverse {
            if list.is_empty() {
                continue;
            }
            for &we in list {
                *got.entry(e).or_default().entry(we).or_default() += 1;
            }
        }
        want == got
    }
}

/// Witness graph + embedding + slack vector + parameters.
#[derive(Debug, Clone)]
pub struct WitnessBundle {
    pub w: WitnessGraph,
    pub emb: Embedding,
    pub r: VertexVector,
    pub psi: Ratio,
    pub phi: Ratio,
}

impl WitnessBundle {
    /// Empty witness with the given slack; `W` holds every member isolated.
    pub fn empty<'a, I: IntoIterator<Item = &'a VertexId>>(
        members: I,
        r: VertexVector,
        psi: Ratio,
        phi: Ratio,
    ) -> Self {
        let mut w = WitnessGraph::new();
        for &v in members {
            w.ensure_vertex(v);
        }
        Self {
            w,
            emb: Embedding::new(),
            r,
            psi,
            phi,
        }
    }

    /// Host copy with the identity embedding (each path is the edge itself).
    pub fn identity(
        host: GraphView<'_>,
        members: &BTreeSet<VertexId>,
        psi: Ratio,
        phi: Ratio,
    ) -> Self {
        let mut b = Self::empty(members.iter(), VertexVector::new(), psi, phi);
        for &v in members {
            for &e in host.out_edges(v) {
                let h = host.head(e);
                if h == v || members.contains(&h) {
                    let we = b.w.add_edge(v, h, 1);
                    b.emb.insert(we, vec![e]);
                }
            }
        }
        b
    }

    pub fn add_embedded_edge(
        &mut self,
        tail: VertexId,
        head: VertexId,
        mult: u64,
        path: Vec<EdgeId>,
    ) -> WEdgeId {
        let we = self.w.add_edge(tail, head, mult);
        self.emb.insert(we, path);
        we
    }

    /// Removes every witness edge embedded through `e_host`; per removed
    /// group `(a, b, mult)`, `r(a)` and `r(b)` each gain `mult`. Returns the
    /// removed groups.
    pub fn delete_host_edge_cascade(&mut self, e_host: EdgeId) -> Vec<(VertexId, VertexId, u64)> {
        let users = self.emb.users_of(e_host);
        let mut removed = Vec::with_capacity(users.len());
        for we in users {
            if !self.w.is_alive(we) {
                continue;
            }
            let (a, b, mult) = self.w.remove_edge(we);
            self.emb.remove(we);
            self.r.add(a, mult);
            self.r.add(b, mult);
            removed.push((a, b, mult));
        }
        removed
    }

    /// Split cascade, applied after the host moved `moved` edges onto
    /// `v_new`: (i) witness edge endpoints are remapped to their embedding
    /// paths' current endpoints, (ii) `r(v) += deg_W(v_new)` and
    /// `r(v_new) = deg_W(v_new)` on the remapped graph, (iii) every witness
    /// edge whose path touches `v_new` is removed with the usual increments.
    pub fn split_host_vertex_cascade(
        &mut self,
        host: GraphView<'_>,
        v: VertexId,
        v_new: VertexId,
        moved: &BTreeSet<EdgeId>,
    ) {
        self.w.ensure_vertex(v_new);
        // (i) only edges whose path uses a moved host edge can be affected;
        // v_new's incident host edges are exactly the moved ones
        let mut touched: BTreeSet<WEdgeId> = BTreeSet::new();
        for &e in moved {
            touched.extend(self.emb.users_of(e));
        }
        for &we in &touched {
            if !self.w.is_alive(we) {
                continue;
            }
            let path = self.emb.path(we).expect("embedded edge");
            if path.is_empty() {
                continue;
            }
            let new_tail = host.tail(path[0]);
            let new_head = host.head(path[path.len() - 1]);
            self.w.remap_tail(we, new_tail);
            self.w.remap_head(we, new_head);
        }
        // (ii) slack transfer measured on the remapped graph, before removals
        let dw = self.w.degree(v_new);
        debug_assert_eq!(self.r.get(v_new), 0, "fresh vertex carries no slack");
        self.r.add(v, dw);
        self.r.set(v_new, dw);
        // (iii) removals
        for we in touched {
            if !self.w.is_alive(we) {
                continue;
            }
            let (a, b, mult) = self.w.endpoints(we);
            let uses_new = a == v_new
                || b == v_new
                || self
                    .emb
                    .path(we)
                    .map(|p| {
                        p.iter()
                            .any(|&e| host.tail(e) == v_new || host.head(e) == v_new)
                    })
                    .unwrap_or(false);
            if uses_new {
                self.w.remove_edge(we);
                self.emb.remove(we);
                self.r.add(a, mult);
                self.r.add(b, mult);
            }
        }
    }

    /// Degree cap: while some vertex has `deg_W(v) + r(v) > deg_host(v)/ψ`,
    /// strip all witness edges at `v` (each crediting the other endpoint) and
    /// set `r(v) = ⌊deg_host(v)/ψ⌋`. Returns the isolated vertices.
    pub fn cap_degree_overflow<F>(
        &mut self,
        host_degree: F,
        seeds: &BTreeSet<VertexId>,
    ) -> BTreeSet<VertexId>
    where
        F: Fn(VertexId) -> u64,
    {
        let psi_p = self.psi.numer().clone();
        let psi_q = self.psi.denom().clone();
        let mut dirty: BTreeSet<VertexId> = seeds.clone();
        let mut isolated = BTreeSet::new();
        while let Some(v) = dirty.pop_first() {
            let lhs = BigInt::from(self.w.degree(v) + self.r.get(v)) * &psi_p;
            let rhs = BigInt::from(host_degree(v)) * &psi_q;
            if lhs <= rhs {
                continue;
            }
            for we in self.w.incident(v) {
                let (a, b, mult) = self.w.endpoints(we);
                let other = if a == v { b } else { a };
                self.w.remove_edge(we);
                self.emb.remove(we);
                self.r.add(other, mult);
                dirty.insert(other);
            }
            let bound = Ratio::new(BigInt::from(host_degree(v)) * &psi_q, psi_p.clone());
            self.r.set(v, floor_u64(&bound));
            isolated.insert(v);
        }
        isolated
    }

    /// Cap with every witness vertex and r-support seeded.
    pub fn cap_degree_overflow_full<F>(&mut self, host_degree: F) -> BTreeSet<VertexId>
    where
        F: Fn(VertexId) -> u64,
    {
        let seeds: BTreeSet<VertexId> = self.w.vertex_ids().chain(self.r.support()).collect();
        self.cap_degree_overflow(host_degree, &seeds)
    }

    /// Edge-reversed bundle: witness edges flipped, paths reversed. The
    /// reversed paths read correctly under the host's reversed view.
    pub fn reversed(&self) -> WitnessBundle {
        let mut out = WitnessBundle::empty(
            self.w.vertex_set().iter(),
            self.r.clone(),
            self.psi.clone(),
            self.phi.clone(),
        );
        for (we, t, h, mult) in self.w.live_edges() {
            let mut path = self.emb.path(we).map(|p| p.to_vec()).unwrap_or_default();
            path.reverse();
            out.add_embedded_edge(h, t, mult, path);
        }
        out
    }

    /// Union with a witness produced on the reversed host; the second
    /// bundle's edges and paths are re-reversed into forward orientation.
    /// `r = r₁ + r₂`; ψ is supplied by the caller's level schedule.
    pub fn union_with_reversed(&self, rev: &WitnessBundle, psi: Ratio) -> Result<WitnessBundle> {
        if self.w.vertex_set() != rev.w.vertex_set() {
            return Err(Error::VertexSetMismatch(
                "witness union requires identical vertex sets".into(),
            ));
        }
        let mut out = WitnessBundle::empty(
            self.w.vertex_set().iter(),
            self.r.clone(),
            psi,
            self.phi.clone(),
        );
        out.r.add_assign(&rev.r);
        for (we, t, h, mult) in self.w.live_edges() {
            let path = self.emb.path(we).map(|p| p.to_vec()).unwrap_or_default();
            out.add_embedded_edge(t, h, mult, path);
        }
        for (we, t, h, mult) in rev.w.live_edges() {
            let mut path = rev.emb.path(we).map(|p| p.to_vec()).unwrap_or_default();
            path.reverse();
            out.add_embedded_edge(h, t, mult, path);
        }
        Ok(out)
    }

    /// Restriction to `side`; crossing witness edges are dropped.
    pub fn induced(&self, side: &BTreeSet<VertexId>) -> WitnessBundle {
        let mut out = WitnessBundle::empty(
            side.iter(),
            self.r.restrict(|v| side.contains(&v)),
            self.psi.clone(),
            self.phi.clone(),
        );
        for (we, t, h, mult) in self.w.live_edges() {
            if side.contains(&t) && side.contains(&h) {
                let path = self.emb.path(we).map(|p| p.to_vec()).unwrap_or_default();
                out.add_embedded_edge(t, h, mult, path);
            }
        }
        out
    }

    /// Certified expansion `ψ²φ` of the host; requires `r = 0`.
    pub fn implied_expansion(&self) -> Result<Ratio> {
        if !self.r.is_zero() {
            return Err(Error::Precondition(
                "implied expansion requires r = 0".into(),
            ));
        }
        Ok(&self.psi * &self.psi * &self.phi)
    }

    /// One line per witness edge group: endpoints, multiplicity, path.
    pub fn debug_dump(&self) -> String {
        let mut lines: Vec<String> = self
            .w
            .live_edges()
            .map(|(we, t, h, mult)| {
                let mut s = format!("{t} {h} x{mult}:");
                if let Some(path) = self.emb.path(we) {
                    for e in path {
                        let _ = write!(s, " {e}");
                    }
                }
                s
            })
            .collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

/// Bound applied to `‖r‖₁` in property 1.
#[derive(Debug, Clone)]
pub enum RBound {
    Unbounded,
    AtMost(Ratio),
    LessThan(Ratio),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropStatus {
    Pass,
    Fail(String),
    Skipped(String),
}

impl PropStatus {
    pub fn passed(&self) -> bool {
        matches!(self, PropStatus::Pass)
    }
}

/// Per-property witness check report.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    /// ‖r‖₁ within bound
    pub p1: PropStatus,
    /// degree sandwich deg_W(v)+r(v) ∈ [deg_G(v), deg_G(v)/ψ]
    pub p2: PropStatus,
    /// cut expansion for every γ-balanced cut (enumerated)
    pub p3: PropStatus,
    /// congestion ≤ 1/(ψφ)
    pub p4: PropStatus,
    /// paths well-formed and endpoint-consistent
    pub embedding: PropStatus,
}

impl WitnessReport {
    /// All checked properties pass; `allow_skipped` tolerates a size-gated
    /// property 3.
    pub fn all_pass(&self, allow_skipped: bool) -> bool {
        let p3_ok = match &self.p3 {
            PropStatus::Pass => true,
            PropStatus::Skipped(_) => allow_skipped,
            PropStatus::Fail(_) => false,
        };
        self.p1.passed() && self.p2.passed() && p3_ok && self.p4.passed() && self.embedding.passed()
    }

    pub fn summary(&self) -> String {
        format!(
            "p1={:?} p2={:?} p3={:?} p4={:?} emb={:?}",
            self.p1, self.p2, self.p3, self.p4, self.embedding
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckDirection {
    Out,
    Both,
}

/// Full witness check. Property 3 enumerates all `2^{|X|}` cuts and is gated
/// at `enum_gate` vertices; oversize clusters report `Skipped`, never a
/// silent pass.
pub fn check_witness(
    b: &WitnessBundle,
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    gamma: &VertexVector,
    bound: &RBound,
    direction: CheckDirection,
    enum_gate: usize,
) -> WitnessReport {
    let psi_p = b.psi.numer().clone();
    let psi_q = b.psi.denom().clone();

    let norm = b.r.l1_norm();
    let p1 = match bound {
        RBound::Unbounded => PropStatus::Pass,
        RBound::AtMost(r) => {
            if from_u64(norm) <= *r {
                PropStatus::Pass
            } else {
                PropStatus::Fail(format!("‖r‖₁ = {norm} exceeds {r}"))
            }
        }
        RBound::LessThan(r) => {
            if from_u64(norm) < *r {
                PropStatus::Pass
            } else {
                PropStatus::Fail(format!("‖r‖₁ = {norm} not below {r}"))
            }
        }
    };

    let mut p2 = PropStatus::Pass;
    for &v in members {
        let lhs = b.w.degree(v) + b.r.get(v);
        let deg = host.degree(v);
        if lhs < deg {
            p2 = PropStatus::Fail(format!("deg_W+r = {lhs} < deg_G = {deg} at {v}"));
            break;
        }
        if BigInt::from(lhs) * &psi_p > BigInt::from(deg) * &psi_q {
            p2 = PropStatus::Fail(format!("deg_W+r = {lhs} > deg_G/ψ at {v} (deg_G = {deg})"));
            break;
        }
    }
    if p2.passed() {
        for v in b.w.vertex_ids() {
            if !members.contains(&v) && (b.w.degree(v) > 0 || b.r.get(v) > 0) {
                p2 = PropStatus::Fail(format!("witness mass at non-member {v}"));
                break;
            }
        }
    }

    let p3 = if members.len() > enum_gate {
        PropStatus::Skipped(format!(
            "cluster of {} vertices exceeds enumeration gate {enum_gate}",
            members.len()
        ))
    } else {
        check_cut_property(b, members, gamma, direction, &psi_p, &psi_q)
    };

    let phi_p = b.phi.numer().clone();
    let phi_q = b.phi.denom().clone();
    let cong = b.emb.max_congestion(&b.w);
    let p4 = if BigInt::from(cong) * &psi_p * &phi_p <= &psi_q * &phi_q {
        PropStatus::Pass
    } else {
        PropStatus::Fail(format!("congestion {cong} exceeds 1/(ψφ)"))
    };

    let mut emb_ok = PropStatus::Pass;
    'emb: for (we, t, h, _) in b.w.live_edges() {
        let Some(path) = b.emb.path(we) else {
            emb_ok = PropStatus::Fail(format!("witness edge {t}->{h} lacks a path"));
            break;
        };
        let mut cur = t;
        for &e in path {
            if !host.is_alive(e) {
                emb_ok = PropStatus::Fail(format!("path of {t}->{h} uses retired {e}"));
                break 'emb;
            }
            if host.tail(e) != cur {
                emb_ok = PropStatus::Fail(format!("path of {t}->{h} breaks at {e}"));
                break 'emb;
            }
            cur = host.head(e);
        }
        if cur != h {
            emb_ok = PropStatus::Fail(format!("path of {t}->{h} ends at {cur}"));
            break;
        }
    }

    WitnessReport {
        p1,
        p2,
        p3,
        p4,
        embedding: emb_ok,
    }
}

fn check_cut_property(
    b: &WitnessBundle,
    members: &BTreeSet<VertexId>,
    gamma: &VertexVector,
    direction: CheckDirection,
    psi_p: &BigInt,
    psi_q: &BigInt,
) -> PropStatus {
    let verts: Vec<VertexId> = members.iter().copied().collect();
    let n = verts.len();
    if n < 2 {
        return PropStatus::Pass;
    }
    let idx: HashMap<VertexId, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut count = vec![vec![0u64; n]; n];
    let mut deg = vec![0u64; n];
    for (_, t, h, mult) in b.w.live_edges() {
        let (Some(&i), Some(&j)) = (idx.get(&t), idx.get(&h)) else {
            return PropStatus::Fail(format!("witness edge {t}->{h} outside member set"));
        };
        if i == j {
            deg[i] += 2 * mult;
        } else {
            count[i][j] += mult;
            deg[i] += mult;
            deg[j] += mult;
        }
    }
    let gam: Vec<u64> = verts.iter().map(|&v| gamma.get(v)).collect();
    let rv: Vec<u64> = verts.iter().map(|&v| b.r.get(v)).collect();
    let gam_total: u64 = gam.iter().sum();

    // gray-code walk with O(n) delta updates per cut
    let mut mask: u64 = 0;
    let (mut out, mut inc) = (0i128, 0i128);
    let (mut vol, mut gma, mut rm) = (0u64, 0u64, 0u64);
    let steps = 1u64 << n;
    for k in 1..steps {
        let bit = k.trailing_zeros() as usize;
        let joined = mask >> bit & 1 == 0;
        if joined {
            mask |= 1 << bit;
        } else {
            mask &= !(1 << bit);
        }
        for j in 0..n {
            if j == bit {
                continue;
            }
            let j_in = mask >> j & 1 == 1;
            if joined {
                if j_in {
                    out -= count[j][bit] as i128;
                    inc -= count[bit][j] as i128;
                } else {
                    out += count[bit][j] as i128;
                    inc += count[j][bit] as i128;
                }
            } else if j_in {
                out += count[j][bit] as i128;
                inc += count[bit][j] as i128;
            } else {
                out -= count[bit][j] as i128;
                inc -= count[j][bit] as i128;
            }
        }
        if joined {
            vol += deg[bit];
            gma += gam[bit];
            rm += rv[bit];
        } else {
            vol -= deg[bit];
            gma -= gam[bit];
            rm -= rv[bit];
        }
        if mask == 0 || mask == steps - 1 {
            continue;
        }
        if 2 * gma > gam_total {
            continue;
        }
        let rhs = BigInt::from(vol + rm) * psi_p;
        let lhs_out = BigInt::from(out as u64 + rm) * psi_q;
        if lhs_out < rhs {
            return PropStatus::Fail(format!(
                "out-cut property fails: |E_W(S,S̄)| = {out}, r(S) = {rm}, vol_W+r = {}",
                vol + rm
            ));
        }
        if direction == CheckDirection::Both {
            let lhs_in = BigInt::from(inc as u64 + rm) * psi_q;
            if lhs_in < rhs {
                return PropStatus::Fail(format!(
                    "in-cut property fails: |E_W(S̄,S)| = {inc}, r(S) = {rm}, vol_W+r = {}",
                    vol + rm
                ));
            }
        }
    }
    PropStatus::Pass
}
