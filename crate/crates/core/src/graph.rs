//! Dynamic directed multigraph with stable edge identities.
//!
//! Supports the three dynamic update types (edge deletion, vertex split,
//! self-loop insertion) plus plain edge insertion for initial construction.
//! A self-loop counts 2 units towards the degree of its vertex and once
//! towards the edge count. Retired edge ids are tombstoned and never reused
//! so that stale references are always detectable.

use std::collections::BTreeSet;
use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One adversarial update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateEvent {
    DeleteEdge(EdgeId),
    InsertSelfLoop(VertexId),
    SplitVertex { v: VertexId, moved: BTreeSet<EdgeId> },
}

#[derive(Debug, Clone)]
struct VertexSlot {
    degree: u64,
    out: Vec<EdgeId>,
    inc: Vec<EdgeId>,
    /// Root of the chain of vertex splits that produced this vertex; used by
    /// the refinement checker to align partitions across splits.
    origin: VertexId,
    /// Immediate split parent (self for original vertices).
    parent: VertexId,
}

#[derive(Debug, Clone)]
struct EdgeSlot {
    tail: VertexId,
    head: VertexId,
    alive: bool,
}

#[derive(Debug, Clone, Default)]
pub struct DynGraph {
    verts: Vec<VertexSlot>,
    edges: Vec<EdgeSlot>,
    live_edges: u64,
}

impl DynGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(n: usize) -> Self {
        let mut g = Self::new();
        for _ in 0..n {
            g.add_vertex();
        }
        g
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let id = VertexId(self.verts.len() as u32);
        self.verts.push(VertexSlot {
            degree: 0,
            out: Vec::new(),
            inc: Vec::new(),
            origin: id,
            parent: id,
        });
        id
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.verts.len() as u32).map(VertexId)
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        v.index() < self.verts.len()
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if self.contains_vertex(v) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v.0))
        }
    }

    /// Original ancestor of `v` through the split history.
    pub fn origin(&self, v: VertexId) -> VertexId {
        self.verts[v.index()].origin
    }

    /// Immediate split parent of `v` (itself for original vertices).
    pub fn split_parent(&self, v: VertexId) -> VertexId {
        self.verts[v.index()].parent
    }

    pub fn live_edge_count(&self) -> u64 {
        self.live_edges
    }

    pub fn edge_id_bound(&self) -> usize {
        self.edges.len()
    }

    pub fn is_alive(&self, e: EdgeId) -> bool {
        e.index() < self.edges.len() && self.edges[e.index()].alive
    }

    /// (tail, head); errors on retired ids.
    pub fn endpoints(&self, e: EdgeId) -> Result<(VertexId, VertexId)> {
        let slot = self.edges.get(e.index()).ok_or(Error::UnknownEdge(e.0))?;
        if !slot.alive {
            return Err(Error::UnknownEdge(e.0));
        }
        Ok((slot.tail, slot.head))
    }

    /// Endpoints regardless of liveness; used for retired-record bookkeeping.
    pub fn endpoints_raw(&self, e: EdgeId) -> Option<(VertexId, VertexId)> {
        self.edges.get(e.index()).map(|s| (s.tail, s.head))
    }

    pub fn is_loop(&self, e: EdgeId) -> bool {
        self.edges
            .get(e.index())
            .map(|s| s.tail == s.head)
            .unwrap_or(false)
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(EdgeSlot {
            tail: u,
            head: v,
            alive: true,
        });
        self.verts[u.index()].out.push(id);
        self.verts[v.index()].inc.push(id);
        if u == v {
            self.verts[u.index()].degree += 2;
        } else {
            self.verts[u.index()].degree += 1;
            self.verts[v.index()].degree += 1;
        }
        self.live_edges += 1;
        Ok(id)
    }

    pub fn insert_self_loop(&mut self, v: VertexId) -> Result<EdgeId> {
        self.add_edge(v, v)
    }

    pub fn delete_edge(&mut self, e: EdgeId) -> Result<(VertexId, VertexId)> {
        let (tail, head) = self.endpoints(e)?;
        self.edges[e.index()].alive = false;
        retain_edge(&mut self.verts[tail.index()].out, e);
        retain_edge(&mut self.verts[head.index()].inc, e);
        if tail == head {
            self.verts[tail.index()].degree -= 2;
        } else {
            self.verts[tail.index()].degree -= 1;
            self.verts[head.index()].degree -= 1;
        }
        self.live_edges -= 1;
        Ok((tail, head))
    }

    /// Moves `moved` edges from `v` onto a fresh vertex, keeping edge ids.
    /// A moved self-loop at `v` becomes a self-loop at the new vertex.
    pub fn split_vertex(&mut self, v: VertexId, moved: &BTreeSet<EdgeId>) -> Result<VertexId> {
        self.check_vertex(v)?;
        let mut moved_degree = 0u64;
        for &e in moved {
            let (tail, head) = self.endpoints(e)?;
            if tail != v && head != v {
                return Err(Error::NotIncident(e.0, v.0));
            }
            moved_degree += if tail == head { 2 } else { u64::from(tail == v) + u64::from(head == v) };
        }
        let old_degree = self.verts[v.index()].degree;
        if moved_degree > old_degree - moved_degree {
            return Err(Error::DegreeCondition(v.0));
        }
        let origin = self.verts[v.index()].origin;
        let nv = self.add_vertex();
        self.verts[nv.index()].origin = origin;
        self.verts[nv.index()].parent = v;
        for &e in moved {
            let slot = &mut self.edges[e.index()];
            let was_loop = slot.tail == slot.head;
            if slot.tail == v {
                slot.tail = nv;
                retain_edge(&mut self.verts[v.index()].out, e);
                self.verts[nv.index()].out.push(e);
            }
            if slot.head == v {
                slot.head = nv;
                retain_edge(&mut self.verts[v.index()].inc, e);
                self.verts[nv.index()].inc.push(e);
            }
            let w = if was_loop { 2 } else { 1 };
            self.verts[v.index()].degree -= w;
            self.verts[nv.index()].degree += w;
        }
        Ok(nv)
    }

    pub fn degree(&self, v: VertexId) -> u64 {
        self.verts[v.index()].degree
    }

    pub fn volume<I: IntoIterator<Item = VertexId>>(&self, set: I) -> u64 {
        set.into_iter().map(|v| self.degree(v)).sum()
    }

    /// (out, in) boundary edge sets of `set`; self-loops never appear.
    pub fn boundary(&self, set: &BTreeSet<VertexId>) -> (Vec<EdgeId>, Vec<EdgeId>) {
        self.view().boundary(set)
    }

    pub fn view(&self) -> GraphView<'_> {
        GraphView {
            graph: self,
            reversed: false,
        }
    }

    pub fn reversed(&self) -> GraphView<'_> {
        GraphView {
            graph: self,
            reversed: true,
        }
    }

    pub fn live_edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alive)
            .map(|(i, _)| EdgeId(i as u32))
    }

    /// Recomputes degrees from the edge table; test/verification helper.
    pub fn recompute_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.verts.len()];
        for slot in self.edges.iter().filter(|s| s.alive) {
            if slot.tail == slot.head {
                deg[slot.tail.index()] += 2;
            } else {
                deg[slot.tail.index()] += 1;
                deg[slot.head.index()] += 1;
            }
        }
        deg
    }

    /// Checks degree counters and adjacency/edge-table agreement.
    pub fn check_consistency(&self) -> Result<()> {
        let deg = self.recompute_degrees();
        for (i, slot) in self.verts.iter().enumerate() {
            if deg[i] != slot.degree {
                return Err(Error::Postcondition(format!(
                    "degree counter mismatch at v{i}: {} vs {}",
                    slot.degree, deg[i]
                )));
            }
            for &e in &slot.out {
                let es = &self.edges[e.index()];
                if !es.alive || es.tail.index() != i {
                    return Err(Error::Postcondition(format!("bad out entry {e} at v{i}")));
                }
            }
            for &e in &slot.inc {
                let es = &self.edges[e.index()];
                if !es.alive || es.head.index() != i {
                    return Err(Error::Postcondition(format!("bad in entry {e} at v{i}")));
                }
            }
        }
        let live = self.edges.iter().filter(|s| s.alive).count() as u64;
        if live != self.live_edges {
            return Err(Error::Postcondition("live edge counter mismatch".into()));
        }
        Ok(())
    }
}

fn retain_edge(list: &mut Vec<EdgeId>, e: EdgeId) {
    if let Some(pos) = list.iter().position(|&x| x == e) {
        list.swap_remove(pos);
    }
}

/// Zero-copy orientation-aware read view. The reversed view swaps tail/head
/// roles everywhere; degrees and volumes are orientation independent.
#[derive(Clone, Copy)]
pub struct GraphView<'g> {
    graph: &'g DynGraph,
    reversed: bool,
}

impl<'g> GraphView<'g> {
    pub fn graph(&self) -> &'g DynGraph {
        self.graph
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn reversed(&self) -> GraphView<'g> {
        GraphView {
            graph: self.graph,
            reversed: !self.reversed,
        }
    }

    pub fn tail(&self, e: EdgeId) -> VertexId {
        let slot = &self.graph.edges[e.index()];
        if self.reversed {
            slot.head
        } else {
            slot.tail
        }
    }

    pub fn head(&self, e: EdgeId) -> VertexId {
        let slot = &self.graph.edges[e.index()];
        if self.reversed {
            slot.tail
        } else {
            slot.head
        }
    }

    pub fn endpoints(&self, e: EdgeId) -> Result<(VertexId, VertexId)> {
        let (t, h) = self.graph.endpoints(e)?;
        Ok(if self.reversed { (h, t) } else { (t, h) })
    }

    pub fn is_alive(&self, e: EdgeId) -> bool {
        self.graph.is_alive(e)
    }

    pub fn is_loop(&self, e: EdgeId) -> bool {
        self.graph.is_loop(e)
    }

    pub fn degree(&self, v: VertexId) -> u64 {
        self.graph.degree(v)
    }

    pub fn volume<I: IntoIterator<Item = VertexId>>(&self, set: I) -> u64 {
        self.graph.volume(set)
    }

    pub fn out_edges(&self, v: VertexId) -> &'g [EdgeId] {
        let slot = &self.graph.verts[v.index()];
        if self.reversed {
            &slot.inc
        } else {
            &slot.out
        }
    }

    pub fn in_edges(&self, v: VertexId) -> &'g [EdgeId] {
        let slot = &self.graph.verts[v.index()];
        if self.reversed {
            &slot.out
        } else {
            &slot.inc
        }
    }

    /// (out, in) boundary of `set`: out = edges with tail in `set`, head
    /// outside; in = the converse. Self-loops are excluded by construction.
    pub fn boundary(&self, set: &BTreeSet<VertexId>) -> (Vec<EdgeId>, Vec<EdgeId>) {
        let mut out = Vec::new();
        let mut inc = Vec::new();
        for &v in set {
            for &e in self.out_edges(v) {
                let h = self.head(e);
                if h != v && !set.contains(&h) {
                    out.push(e);
                }
            }
            for &e in self.in_edges(v) {
                let t = self.tail(e);
                if t != v && !set.contains(&t) {
                    inc.push(e);
                }
            }
        }
        out.sort_unstable();
        inc.sort_unstable();
        (out, inc)
    }

    /// Count-only variant of `boundary`.
    pub fn boundary_counts(&self, set: &BTreeSet<VertexId>) -> (u64, u64) {
        let mut out = 0;
        let mut inc = 0;
        for &v in set {
            for &e in self.out_edges(v) {
                let h = self.head(e);
                if h != v && !set.contains(&h) {
                    out += 1;
                }
            }
            for &e in self.in_edges(v) {
                let t = self.tail(e);
                if t != v && !set.contains(&t) {
                    inc += 1;
                }
            }
        }
        (out, inc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> BTreeSet<EdgeId> {
        v.iter().map(|&x| EdgeId(x)).collect()
    }

    #[test]
    fn add_and_degree() {
        let mut g = DynGraph::with_vertices(2);
        let a = VertexId(0);
        let b = VertexId(1);
        g.add_edge(a, b).unwrap();
        assert_eq!(g.degree(a), 1);
        assert_eq!(g.degree(b), 1);
        assert_eq!(g.live_edge_count(), 1);
        // a self-loop counts 2 units
        g.insert_self_loop(a).unwrap();
        assert_eq!(g.degree(a), 3);
        // parallel edges are distinct
        let e1 = g.add_edge(a, b).unwrap();
        let e2 = g.add_edge(a, b).unwrap();
        assert_ne!(e1, e2);
        assert_eq!(g.degree(a), 5);
        g.check_consistency().unwrap();
    }

    #[test]
    fn delete_edge_cases() {
        let mut g = DynGraph::with_vertices(2);
        let a = VertexId(0);
        let b = VertexId(1);
        let e = g.add_edge(a, b).unwrap();
        g.delete_edge(e).unwrap();
        assert_eq!(g.degree(a), 0);
        assert_eq!(g.degree(b), 0);
        assert!(matches!(g.delete_edge(e), Err(Error::UnknownEdge(_))));

        let e1 = g.add_edge(a, b).unwrap();
        let _e2 = g.add_edge(a, b).unwrap();
        g.delete_edge(e1).unwrap();
        assert_eq!(g.degree(a), 1);

        let l = g.insert_self_loop(a).unwrap();
        assert_eq!(g.degree(a), 3);
        g.delete_edge(l).unwrap();
        assert_eq!(g.degree(a), 1);
        g.check_consistency().unwrap();
    }

    #[test]
    fn split_conserves_degree() {
        // star K_{1,4} at v, move two spokes
        let mut g = DynGraph::with_vertices(5);
        let v = VertexId(0);
        let mut spokes = Vec::new();
        for i in 1..5 {
            spokes.push(g.add_edge(v, VertexId(i)).unwrap());
        }
        let before = g.degree(v);
        let moved = ids(&[spokes[0].0, spokes[1].0]);
        let nv = g.split_vertex(v, &moved).unwrap();
        assert_eq!(g.degree(v), 2);
        assert_eq!(g.degree(nv), 2);
        assert_eq!(g.degree(v) + g.degree(nv), before);
        // edge ids unchanged
        assert_eq!(g.endpoints(spokes[0]).unwrap().0, nv);
        let recomputed = g.recompute_degrees();
        assert_eq!(recomputed[v.index()], 2);
        assert_eq!(recomputed[nv.index()], 2);
        g.check_consistency().unwrap();
    }

    #[test]
    fn split_empty_and_loop() {
        let mut g = DynGraph::with_vertices(1);
        let v = VertexId(0);
        let nv = g.split_vertex(v, &BTreeSet::new()).unwrap();
        assert_eq!(g.degree(v), 0);
        assert_eq!(g.degree(nv), 0);
        assert_eq!(g.origin(nv), v);

        let l = g.insert_self_loop(v).unwrap();
        let l2 = g.insert_self_loop(v).unwrap();
        let nv2 = g.split_vertex(v, &ids(&[l.0])).unwrap();
        assert!(g.is_loop(l));
        assert_eq!(g.endpoints(l).unwrap(), (nv2, nv2));
        assert_eq!(g.degree(nv2), 2);
        assert_eq!(g.degree(v), 2);
        let _ = l2;
        g.check_consistency().unwrap();
    }

    #[test]
    fn split_degree_condition() {
        let mut g = DynGraph::with_vertices(3);
        let v = VertexId(0);
        let e1 = g.add_edge(v, VertexId(1)).unwrap();
        let e2 = g.add_edge(v, VertexId(2)).unwrap();
        let e3 = g.add_edge(VertexId(1), v).unwrap();
        // moving all three leaves deg(v)=0 < deg(v')=3
        assert!(matches!(
            g.split_vertex(v, &ids(&[e1.0, e2.0, e3.0])),
            Err(Error::DegreeCondition(_))
        ));
        // moving an edge not incident to v errors
        let far = g.add_edge(VertexId(1), VertexId(2)).unwrap();
        assert!(matches!(
            g.split_vertex(v, &ids(&[far.0])),
            Err(Error::NotIncident(_, _))
        ));
    }

    #[test]
    fn boundary_and_volume() {
        let mut g = DynGraph::with_vertices(3);
        let a = VertexId(0);
        let b = VertexId(1);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, a).unwrap();
        g.insert_self_loop(a).unwrap();
        let s: BTreeSet<_> = [a].into_iter().collect();
        let (out, inc) = g.boundary(&s);
        assert_eq!(out.len(), 1);
        assert_eq!(inc.len(), 1);
        // volume of {a}: one loop (2) + one out + one in
        assert_eq!(g.volume(s.clone()), 4);
        assert_eq!(g.volume(g.vertex_ids()), 2 * g.live_edge_count());
        // S = V has empty boundary
        let all: BTreeSet<_> = g.vertex_ids().collect();
        let (o, i) = g.boundary(&all);
        assert!(o.is_empty() && i.is_empty());
        assert_eq!(g.volume([VertexId(2)]), 0);
    }

    #[test]
    fn reversed_view() {
        let mut g = DynGraph::with_vertices(2);
        let a = VertexId(0);
        let b = VertexId(1);
        let e = g.add_edge(a, b).unwrap();
        let r = g.reversed();
        assert_eq!(r.tail(e), b);
        assert_eq!(r.head(e), a);
        assert_eq!(r.reversed().tail(e), a);
        let s: BTreeSet<_> = [a].into_iter().collect();
        let (out_f, in_f) = g.view().boundary(&s);
        let (out_r, in_r) = r.boundary(&s);
        assert_eq!(out_f, in_r);
        assert_eq!(in_f, out_r);
        assert_eq!(r.degree(a), g.degree(a));
    }
}
