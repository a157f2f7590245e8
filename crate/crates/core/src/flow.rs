//! Flow problems, bounded-round blocking flow with local exploration,
//! residual neighborhoods and integral path decomposition.
//!
//! The solver is the classic level-graph blocking-flow discipline run from a
//! virtual super-source attached to all vertices with unrouted source mass.
//! Per round, the BFS expands only vertices whose sink is already saturated;
//! vertices with spare sink capacity are frontier targets. After the solve,
//! the residual graph contains no path of at most `h` edges from any vertex
//! with positive excess to any vertex with spare sink capacity.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::graph::{EdgeId, GraphView, VertexId};
use crate::vecmap::VertexVector;
use crate::{Error, Result};

/// Flow problem `(G, c, Δ, ∇)` with one uniform edge capacity.
pub struct FlowProblem<'g> {
    pub view: GraphView<'g>,
    pub capacity: u64,
    pub source: VertexVector,
    pub sink: VertexVector,
}

/// Integral preflow with derived excess and absorption vectors.
#[derive(Debug, Clone, Default)]
pub struct Preflow {
    flow: BTreeMap<EdgeId, u64>,
    excess: VertexVector,
    absorbed: VertexVector,
}

impl Preflow {
    pub fn flow(&self, e: EdgeId) -> u64 {
        self.flow.get(&e).copied().unwrap_or(0)
    }

    pub fn flow_entries(&self) -> impl Iterator<Item = (EdgeId, u64)> + '_ {
        self.flow.iter().map(|(&e, &f)| (e, f))
    }

    pub fn excess(&self) -> &VertexVector {
        &self.excess
    }

    pub fn absorbed(&self) -> &VertexVector {
        &self.absorbed
    }

    /// Recomputes excess/absorption from the flow values via
    /// `abs = min(B^T f + Δ, ∇)`, `ex = B^T f + Δ − abs`. Used to cross-check
    /// the solver's incremental bookkeeping.
    pub fn derive_vectors(&self, p: &FlowProblem<'_>) -> Result<(VertexVector, VertexVector)> {
        let mut net: BTreeMap<VertexId, i128> = BTreeMap::new();
        for (&e, &f) in &self.flow {
            if f == 0 {
                continue;
            }
            let (t, h) = p.view.endpoints(e)?;
            if t == h {
                return Err(Error::Postcondition("flow on self-loop".into()));
            }
            *net.entry(t).or_default() -= f as i128;
            *net.entry(h).or_default() += f as i128;
        }
        let mut abs = VertexVector::new();
        let mut ex = VertexVector::new();
        let mut all: BTreeSet<VertexId> = net.keys().copied().collect();
        all.extend(p.source.support());
        all.extend(p.sink.support());
        for v in all {
            let inflow = net.get(&v).copied().unwrap_or(0) + p.source.get(v) as i128;
            if inflow < 0 {
                return Err(Error::Postcondition(format!("negative inflow at {v}")));
            }
            let a = (inflow as u64).min(p.sink.get(v));
            abs.set(v, a);
            ex.set(v, inflow as u64 - a);
        }
        Ok((ex, abs))
    }
}

/// `true` iff the total excess is at most `r`.
pub fn is_r_flow(f: &Preflow, r: u64) -> bool {
    f.excess().l1_norm() <= r
}

/// Per-solve instrumentation. `edges_seen_max_round` is the number of
/// distinct graph edges touched by the most expensive BFS round.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowStats {
    pub rounds: u32,
    pub edges_seen_max_round: u64,
    pub edges_seen_total: u64,
    pub augmenting_paths: u64,
}

#[derive(Clone, Copy)]
struct Arc {
    edge: EdgeId,
    to: VertexId,
    forward: bool,
}

/// Runs blocking-flow rounds until the residual graph has no path of at most
/// `h` edges from an excess vertex to a vertex with spare sink capacity.
pub fn bounded_blocking_flow(p: &FlowProblem<'_>, h: u64) -> Result<(Preflow, FlowStats)> {
    if h == 0 {
        return Err(Error::Precondition("blocking flow needs h >= 1".into()));
    }
    let mut flow: HashMap<EdgeId, u64> = HashMap::new();
    let mut source_left = p.source.clone();
    let mut absorbed = VertexVector::new();
    let mut stats = FlowStats::default();

    let residual = |flow: &HashMap<EdgeId, u64>, arc: &Arc| -> u64 {
        let f = flow.get(&arc.edge).copied().unwrap_or(0);
        if arc.forward {
            p.capacity - f
        } else {
            f
        }
    };

    loop {
        if source_left.is_zero() {
            break;
        }
        if u64::from(stats.rounds) > h + 1 {
            return Err(Error::Guard(
                "blocking flow exceeded its round budget".into(),
            ));
        }

        // BFS level graph over the residual, expanding only saturated-sink
        // vertices. Sources sit at level 0.
        let mut level: HashMap<VertexId, u32> = HashMap::new();
        let mut adj: HashMap<VertexId, Vec<Arc>> = HashMap::new();
        let mut edges_seen: HashSet<EdgeId> = HashSet::new();
        let mut queue: VecDeque<VertexId> = VecDeque::new();
        let mut target_level: Option<u32> = None;
        for (v, _) in source_left.iter() {
            level.insert(v, 0);
            queue.push_back(v);
        }
        while let Some(v) = queue.pop_front() {
            let lv = level[&v];
            if let Some(tl) = target_level {
                if lv >= tl {
                    continue;
                }
            }
            if absorbed.get(v) < p.sink.get(v) {
                // frontier target, not expanded
                target_level = Some(target_level.map_or(lv, |t: u32| t.min(lv)));
                continue;
            }
            let mut arcs = Vec::new();
            for &e in p.view.out_edges(v) {
                let to = p.view.head(e);
                if to == v {
                    continue; // self-loops carry capacity 0
                }
                edges_seen.insert(e);
                let arc = Arc {
                    edge: e,
                    to,
                    forward: true,
                };
                if residual(&flow, &arc) == 0 {
                    continue;
                }
                let entry = level.entry(to).or_insert_with(|| {
                    queue.push_back(to);
                    lv + 1
                });
                if *entry == lv + 1 {
                    arcs.push(arc);
                }
            }
            for &e in p.view.in_edges(v) {
                let to = p.view.tail(e);
                if to == v {
                    continue;
                }
                edges_seen.insert(e);
                let arc = Arc {
                    edge: e,
                    to,
                    forward: false,
                };
                if residual(&flow, &arc) == 0 {
                    continue;
                }
                let entry = level.entry(to).or_insert_with(|| {
                    queue.push_back(to);
                    lv + 1
                });
                if *entry == lv + 1 {
                    arcs.push(arc);
                }
            }
            adj.insert(v, arcs);
        }

        stats.edges_seen_total += edges_seen.len() as u64;
        stats.edges_seen_max_round = stats.edges_seen_max_round.max(edges_seen.len() as u64);

        let tl = match target_level {
            // No spare sink reachable at all: the Fact holds for every h.
            None => break,
            Some(tl) => tl,
        };
        if u64::from(tl) > h {
            // Nearest spare sink is further than h residual edges away.
            break;
        }
        stats.rounds += 1;

        // Blocking phase: saturate admissible paths with current-arc cursors.
        let mut cursor: HashMap<VertexId, usize> = HashMap::new();
        let starts: Vec<VertexId> = source_left.support().collect();
        for s in starts {
            'retry: while source_left.get(s) > 0 {
                // path of arcs from s to the current vertex
                let mut path: Vec<Arc> = Vec::new();
                let mut cur = s;
                loop {
                    if absorbed.get(cur) < p.sink.get(cur) {
                        // augment
                        let mut b = source_left.get(s).min(p.sink.get(cur) - absorbed.get(cur));
                        for arc in &path {
                            b = b.min(residual(&flow, arc));
                        }
                        debug_assert!(b > 0);
                        for arc in &path {
                            let f = flow.entry(arc.edge).or_insert(0);
                            if arc.forward {
                                *f += b;
                            } else {
                                *f -= b;
                            }
                        }
                        source_left.sub_clamped(s, b);
                        absorbed.add(cur, b);
                        stats.augmenting_paths += 1;
                        continue 'retry;
                    }
                    // advance along an admissible arc with residual capacity
                    let arcs = adj.get(&cur);
                    let mut advanced = false;
                    if let Some(arcs) = arcs {
                        let c = cursor.entry(cur).or_insert(0);
                        while *c < arcs.len() {
                            let arc = arcs[*c];
                            if residual(&flow, &arc) > 0 {
                                path.push(arc);
                                cur = arc.to;
                                advanced = true;
                                break;
                            }
                            *c += 1;
                        }
                    }
                    if advanced {
                        continue;
                    }
                    // retreat
                    match path.pop() {
                        Some(arc) => {
                            // the arc into `cur` is now useless this round
                            cur = if path.is_empty() { s } else { path[path.len() - 1].to };
                            let back_from = cur;
                            if let Some(c) = cursor.get_mut(&back_from) {
                                *c += 1;
                            }
                            let _ = arc;
                        }
                        None => break 'retry,
                    }
                }
            }
        }
    }

    let mut pf = Preflow {
        flow: flow
            .into_iter()
            .filter(|&(_, f)| f > 0)
            .collect::<BTreeMap<_, _>>(),
        excess: source_left,
        absorbed,
    };
    // Drop zero entries for canonical form.
    pf.flow.retain(|_, f| *f > 0);
    if cfg!(debug_assertions) {
        let (ex, abs) = pf.derive_vectors(p)?;
        debug_assert_eq!(ex, pf.excess, "excess bookkeeping diverged");
        debug_assert_eq!(abs, pf.absorbed, "absorption bookkeeping diverged");
    }
    Ok((pf, stats))
}

/// Vertices at residual distance exactly 1 from `s`: heads of unsaturated
/// forward edges leaving `s` plus tails of positive-flow edges entering `s`.
pub fn residual_neighbors(
    p: &FlowProblem<'_>,
    f: &Preflow,
    s: &BTreeSet<VertexId>,
) -> BTreeSet<VertexId> {
    let mut out = BTreeSet::new();
    for &v in s {
        for &e in p.view.out_edges(v) {
            let to = p.view.head(e);
            if to == v || s.contains(&to) {
                continue;
            }
            if f.flow(e) < p.capacity {
                out.insert(to);
            }
        }
        for &e in p.view.in_edges(v) {
            let to = p.view.tail(e);
            if to == v || s.contains(&to) {
                continue;
            }
            if f.flow(e) > 0 {
                out.insert(to);
            }
        }
    }
    out
}

/// One group of identical unit flow paths.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub start: VertexId,
    pub end: VertexId,
    pub edges: Vec<EdgeId>,
    pub units: u64,
}

/// Decomposition of an integral preflow into paths. Flow cycles are
/// cancelled and discarded; source mass absorbed in place is reported in
/// `self_absorbed` instead of producing zero-length paths.
#[derive(Debug, Clone, Default)]
pub struct PathDecomposition {
    pub paths: Vec<FlowPath>,
    pub self_absorbed: VertexVector,
}

impl PathDecomposition {
    pub fn unit_count(&self) -> u64 {
        self.paths.iter().map(|p| p.units).sum()
    }

    /// Paths starting at `v`, in units.
    pub fn units_from(&self, v: VertexId) -> u64 {
        self.paths
            .iter()
            .filter(|p| p.start == v)
            .map(|p| p.units)
            .sum()
    }

    pub fn units_into(&self, v: VertexId) -> u64 {
        self.paths
            .iter()
            .filter(|p| p.end == v)
            .map(|p| p.units)
            .sum()
    }
}

pub fn path_decomposition(p: &FlowProblem<'_>, f: &Preflow) -> Result<PathDecomposition> {
    let mut remaining: BTreeMap<EdgeId, u64> = f
        .flow_entries()
        .filter(|&(_, x)| x > 0)
        .collect();
    let mut abs_left = f.absorbed().clone();
    let mut out = PathDecomposition::default();

    let sources: Vec<(VertexId, u64)> = p
        .source
        .iter()
        .map(|(v, d)| {
            let ex = f.excess().get(v);
            (v, d.saturating_sub(ex))
        })
        .filter(|&(_, d)| d > 0)
        .collect();

    for (start, mut units) in sources {
        // absorb in place first
        let k = units.min(abs_left.get(start));
        if k > 0 {
            abs_left.sub_clamped(start, k);
            out.self_absorbed.add(start, k);
            units -= k;
        }
        while units > 0 {
            // greedy walk along positive remaining flow, cancelling cycles
            let mut path: Vec<EdgeId> = Vec::new();
            let mut on_path: HashMap<VertexId, usize> = HashMap::new();
            let mut cur = start;
            on_path.insert(cur, 0);
            let end = loop {
                if cur != start && abs_left.get(cur) > 0 {
                    break cur;
                }
                // pick the first out-edge still carrying flow
                let mut next = None;
                for &e in p.view.out_edges(cur) {
                    if p.view.head(e) == cur {
                        continue;
                    }
                    if remaining.get(&e).copied().unwrap_or(0) > 0 {
                        next = Some(e);
                        break;
                    }
                }
                let e = match next {
                    Some(e) => e,
                    None => {
                        if cur == start && abs_left.get(cur) > 0 {
                            // only local absorption remains
                            break cur;
                        }
                        return Err(Error::Postcondition(format!(
                            "path decomposition stuck at {cur}"
                        )));
                    }
                };
                let to = p.view.head(e);
                if let Some(&pos) = on_path.get(&to) {
                    // cancel the cycle path[pos..] + e
                    let mut c = remaining[&e];
                    for &pe in &path[pos..] {
                        c = c.min(remaining[&pe]);
                    }
                    for pe in path.drain(pos..).collect::<Vec<_>>() {
                        take_flow(&mut remaining, pe, c);
                        on_path.remove(&p.view.head(pe));
                    }
                    take_flow(&mut remaining, e, c);
                    on_path.retain(|_, &mut i| i <= pos);
                    cur = to;
                    if cur == start {
                        on_path.insert(cur, 0);
                    }
                    continue;
                }
                path.push(e);
                cur = to;
                on_path.insert(cur, path.len());
            };
            if path.is_empty() {
                // start's own sink opened up via cycle cancellation
                let k = units.min(abs_left.get(start));
                if k == 0 {
                    return Err(Error::Postcondition(
                        "path decomposition lost source mass".into(),
                    ));
                }
                abs_left.sub_clamped(start, k);
                out.self_absorbed.add(start, k);
                units -= k;
                continue;
            }
            let mut b = units.min(abs_left.get(end));
            for &e in &path {
                b = b.min(remaining[&e]);
            }
            debug_assert!(b > 0);
            for &e in &path {
                take_flow(&mut remaining, e, b);
            }
            abs_left.sub_clamped(end, b);
            units -= b;
            out.paths.push(FlowPath {
                start,
                end,
                edges: path,
                units: b,
            });
        }
    }
    Ok(out)
}

fn take_flow(remaining: &mut BTreeMap<EdgeId, u64>, e: EdgeId, amount: u64) {
    let x = remaining.get_mut(&e).expect("flow bookkeeping");
    *x -= amount;
    if *x == 0 {
        remaining.remove(&e);
    }
}

/// Exhaustive hop-limited residual search used to verify the blocking-flow
/// guarantee: errors if some vertex with spare sink capacity is reachable
/// within `h` residual edges from a vertex with positive excess.
pub fn verify_blocking_fact(p: &FlowProblem<'_>, f: &Preflow, h: u64) -> Result<()> {
    let mut dist: HashMap<VertexId, u32> = HashMap::new();
    let mut queue: VecDeque<VertexId> = VecDeque::new();
    for (v, _) in f.excess().iter() {
        dist.insert(v, 0);
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if f.absorbed().get(v) < p.sink.get(v) {
            return Err(Error::Postcondition(format!(
                "blocking-flow fact violated: spare sink at {v} within {d} residual edges"
            )));
        }
        if u64::from(d) == h {
            continue;
        }
        for &e in p.view.out_edges(v) {
            let to = p.view.head(e);
            if to != v && f.flow(e) < p.capacity && !dist.contains_key(&to) {
                dist.insert(to, d + 1);
                queue.push_back(to);
            }
        }
        for &e in p.view.in_edges(v) {
            let to = p.view.tail(e);
            if to != v && f.flow(e) > 0 && !dist.contains_key(&to) {
                dist.insert(to, d + 1);
                queue.push_back(to);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DynGraph;

    fn vv(entries: &[(u32, u64)]) -> VertexVector {
        entries.iter().map(|&(v, x)| (VertexId(v), x)).collect()
    }

    #[test]
    fn zero_source_is_zero_flow() {
        let g = DynGraph::with_vertices(2);
        let p = FlowProblem {
            view: g.view(),
            capacity: 1,
            source: VertexVector::new(),
            sink: vv(&[(1, 5)]),
        };
        let (f, _) = bounded_blocking_flow(&p, 3).unwrap();
        assert!(f.excess().is_zero());
        assert!(f.absorbed().is_zero());
        assert_eq!(f.flow_entries().count(), 0);
    }

    #[test]
    fn single_edge_routes() {
        let mut g = DynGraph::with_vertices(2);
        let e = g.add_edge(VertexId(0), VertexId(1)).unwrap();
        let p = FlowProblem {
            view: g.view(),
            capacity: 1,
            source: vv(&[(0, 1)]),
            sink: vv(&[(1, 1)]),
        };
        let (f, _) = bounded_blocking_flow(&p, 1).unwrap();
        assert_eq!(f.flow(e), 1);
        assert!(f.excess().is_zero());
        assert_eq!(f.absorbed().get(VertexId(1)), 1);
        verify_blocking_fact(&p, &f, 1).unwrap();
    }

    #[test]
    fn hop_limit_leaves_excess() {
        // a -> b -> c -> d with h = 2: the only sink is 3 edges away
        let mut g = DynGraph::with_vertices(4);
        for i in 0..3 {
            g.add_edge(VertexId(i), VertexId(i + 1)).unwrap();
        }
        let p = FlowProblem {
            view: g.view(),
            capacity: 1,
            source: vv(&[(0, 1)]),
            sink: vv(&[(3, 1)]),
        };
        let (f, _) = bounded_blocking_flow(&p, 2).unwrap();
        assert_eq!(f.excess().get(VertexId(0)), 1);
        verify_blocking_fact(&p, &f, 2).unwrap();
        // with h = 3 it routes
        let (f3, _) = bounded_blocking_flow(&p, 3).unwrap();
        assert!(f3.excess().is_zero());
        verify_blocking_fact(&p, &f3, 3).unwrap();
    }

    #[test]
    fn self_absorption_preferred() {
        let mut g = DynGraph::with_vertices(2);
        g.add_edge(VertexId(0), VertexId(1)).unwrap();
        let p = FlowProblem {
            view: g.view(),
            capacity: 10,
            source: vv(&[(0, 4)]),
            sink: vv(&[(0, 3), (1, 10)]),
        };
        let (f, _) = bounded_blocking_flow(&p, 5).unwrap();
        assert!(f.excess().is_zero());
        assert_eq!(f.absorbed().get(VertexId(0)), 3);
        assert_eq!(f.absorbed().get(VertexId(1)), 1);
        let d = path_decomposition(&p, &f).unwrap();
        assert_eq!(d.self_absorbed.get(VertexId(0)), 3);
        assert_eq!(d.unit_count(), 1);
    }

    #[test]
    fn diamond_decomposition() {
        // a -> {b, c} -> d, unit capacities, 2 units to route
        let mut g = DynGraph::with_vertices(4);
        g.add_edge(VertexId(0), VertexId(1)).unwrap();
        g.add_edge(VertexId(0), VertexId(2)).unwrap();
        g.add_edge(VertexId(1), VertexId(3)).unwrap();
        g.add_edge(VertexId(2), VertexId(3)).unwrap();
        let p = FlowProblem {
            view: g.view(),
            capacity: 1,
            source: vv(&[(0, 2)]),
            sink: vv(&[(3, 2)]),
        };
        let (f, _) = bounded_blocking_flow(&p, 4).unwrap();
        assert!(f.excess().is_zero());
        let d = path_decomposition(&p, &f).unwrap();
        assert_eq!(d.unit_count(), 2);
        // per-edge path counts equal flow values
        let mut used: BTreeMap<EdgeId, u64> = BTreeMap::new();
        for path in &d.paths {
            for &e in &path.edges {
                *used.entry(e).or_default() += path.units;
            }
        }
        for (e, fl) in f.flow_entries() {
            assert_eq!(used.get(&e).copied().unwrap_or(0), fl);
        }
    }

    #[test]
    fn residual_neighbor_rules() {
        let mut g = DynGraph::with_vertices(3);
        let ab = g.add_edge(VertexId(0), VertexId(1)).unwrap();
        let ca = g.add_edge(VertexId(2), VertexId(0)).unwrap();
        let p = FlowProblem {
            view: g.view(),
            capacity: 1,
            source: VertexVector::new(),
            sink: VertexVector::new(),
        };
        let mut f = Preflow::default();
        let s: BTreeSet<_> = [VertexId(0)].into_iter().collect();
        // zero flow: forward edge unsaturated, reverse edge carries none
        assert_eq!(
            residual_neighbors(&p, &f, &s),
            [VertexId(1)].into_iter().collect()
        );
        f.flow.insert(ab, 1);
        f.flow.insert(ca, 1);
        // ab saturated; ca reversible
        assert_eq!(
            residual_neighbors(&p, &f, &s),
            [VertexId(2)].into_iter().collect()
        );
    }

    #[test]
    fn is_r_flow_thresholds() {
        let mut f = Preflow::default();
        assert!(is_r_flow(&f, 0));
        f.excess.add(VertexId(0), 3);
        assert!(!is_r_flow(&f, 2));
        assert!(is_r_flow(&f, 3));
    }
}
