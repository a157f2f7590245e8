//! Independent brute-force ground truth: exhaustive cut enumeration, a
//! generic augmenting-path max-flow, Tarjan SCCs and partition condensation
//! checks. This module deliberately imports only the graph layer so that it
//! cannot inherit bugs from the flow/witness/prune/decomp machinery it is
//! used to validate.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::graph::{EdgeId, GraphView, VertexId};
use crate::ratio::{from_u64, Ratio};
use crate::{Error, Result};

/// Hard size gate for 2^n cut enumeration.
pub const ENUM_VERTEX_GATE: usize = 16;

/// One enumerated cut, oriented so that the reported side is the
/// weight-smaller one.
#[derive(Debug, Clone)]
pub struct CutReport {
    pub side: BTreeSet<VertexId>,
    pub out_count: u64,
    pub in_count: u64,
    pub volume: u64,
    pub r_mass: u64,
    /// (out_count + r) / (volume + r)
    pub out_ratio: Ratio,
    /// min(out, in) + r over volume + r
    pub min_ratio: Ratio,
}

#[derive(Debug, Clone)]
pub enum SparsestCut {
    /// No nontrivial cut with positive denominator exists.
    Empty,
    Found(CutReport),
}

/// Orientation weight: plain volume or an explicit per-vertex weight.
pub enum CutWeight<'a> {
    Volume,
    Weights(&'a BTreeMap<VertexId, u64>),
}

struct EnumContext {
    verts: Vec<VertexId>,
    /// collapsed multigraph: count[i][j] = parallel edges i -> j (no loops)
    count: Vec<Vec<u64>>,
    deg: Vec<u64>,
    weight: Vec<u64>,
    r: Vec<u64>,
}

fn build_context(
    view: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    r: &BTreeMap<VertexId, u64>,
    weight: &CutWeight<'_>,
) -> Result<EnumContext> {
    if members.len() > ENUM_VERTEX_GATE {
        return Err(Error::SizeGate(format!(
            "cut enumeration limited to {ENUM_VERTEX_GATE} vertices, got {}",
            members.len()
        )));
    }
    let verts: Vec<VertexId> = members.iter().copied().collect();
    let idx: HashMap<VertexId, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = verts.len();
    let mut count = vec![vec![0u64; n]; n];
    let mut deg = vec![0u64; n];
    for (i, &v) in verts.iter().enumerate() {
        for &e in view.out_edges(v) {
            let h = view.head(e);
            if h == v {
                deg[i] += 2;
                continue;
            }
            if let Some(&j) = idx.get(&h) {
                count[i][j] += 1;
                deg[i] += 1;
            }
        }
        for &e in view.in_edges(v) {
            let t = view.tail(e);
            if t != v && idx.contains_key(&t) {
                deg[i] += 1;
            }
        }
    }
    let weight = match weight {
        CutWeight::Volume => deg.clone(),
        CutWeight::Weights(w) => verts
            .iter()
            .map(|v| w.get(v).copied().unwrap_or(0))
            .collect(),
    };
    let r = verts.iter().map(|v| r.get(v).copied().unwrap_or(0)).collect();
    Ok(EnumContext {
        verts,
        count,
        deg,
        weight,
        r,
    })
}

impl EnumContext {
    fn totals(&self) -> (u64, u64, u64) {
        (
            self.deg.iter().sum(),
            self.weight.iter().sum(),
            self.r.iter().sum(),
        )
    }

    fn side(&self, mask: u64) -> BTreeSet<VertexId> {
        self.verts
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect()
    }

    /// Visits every nonempty proper subset with incrementally maintained
    /// out/in counts, volume, weight and r mass.
    fn for_each_cut<F: FnMut(u64, u64, u64, u64, u64, u64)>(&self, mut f: F) {
        let n = self.verts.len();
        if n < 2 {
            return;
        }
        // gray-code walk: one membership flip per step
        let mut mask: u64 = 0;
        let (mut out, mut inc, mut vol, mut wgt, mut rm) = (0u64, 0u64, 0u64, 0u64, 0u64);
        let steps = 1u64 << n;
        for k in 1..steps {
            let bit = k.trailing_zeros() as usize;
            let joined = mask >> bit & 1 == 0;
            if joined {
                mask |= 1 << bit;
            } else {
                mask &= !(1 << bit);
            }
            // O(n) delta update for the flipped vertex
            let mut d_out: i128 = 0;
            let mut d_in: i128 = 0;
            for j in 0..n {
                if j == bit {
                    continue;
                }
                let j_in = mask >> j & 1 == 1;
                if joined {
                    if j_in {
                        // bit joined a set containing j: edges between them
                        // no longer cross
                        d_out -= self.count[j][bit] as i128;
                        d_in -= self.count[bit][j] as i128;
                    } else {
                        d_out += self.count[bit][j] as i128;
                        d_in += self.count[j][bit] as i128;
                    }
                } else if j_in {
                    // bit left; edges j<->bit now cross
                    d_out += self.count[j][bit] as i128;
                    d_in += self.count[bit][j] as i128;
                } else {
                    d_out -= self.count[bit][j] as i128;
                    d_in -= self.count[j][bit] as i128;
                }
            }
            out = (out as i128 + d_out) as u64;
            inc = (inc as i128 + d_in) as u64;
            if joined {
                vol += self.deg[bit];
                wgt += self.weight[bit];
                rm += self.r[bit];
            } else {
                vol -= self.deg[bit];
                wgt -= self.weight[bit];
                rm -= self.r[bit];
            }
            if mask != 0 && mask != steps - 1 {
                f(mask, out, inc, vol, wgt, rm);
            }
        }
    }
}

/// Exhaustively enumerates all cuts oriented so `weight(S) <= weight(S̄)` and
/// returns the one minimizing `(out + r(S)) / (vol(S) + r(S))`. Ties are
/// broken towards the lexicographically smallest member list.
pub fn enumerate_sparsest_cut(
    view: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    r: &BTreeMap<VertexId, u64>,
    weight: CutWeight<'_>,
) -> Result<SparsestCut> {
    let ctx = build_context(view, members, r, &weight)?;
    let (_, total_w, _) = ctx.totals();
    let mut best: Option<(Ratio, CutReport)> = None;
    ctx.for_each_cut(|mask, out, inc, vol, wgt, rm| {
        if wgt * 2 > total_w {
            return;
        }
        let denom = vol + rm;
        if denom == 0 {
            return;
        }
        let ratio = from_u64(out + rm) / from_u64(denom);
        let better = match &best {
            None => true,
            Some((b, report)) => {
                ratio < *b || (ratio == *b && lex_smaller(&ctx.side(mask), &report.side))
            }
        };
        if better {
            let side = ctx.side(mask);
            let minr = from_u64(out.min(inc) + rm) / from_u64(denom);
            best = Some((
                ratio.clone(),
                CutReport {
                    side,
                    out_count: out,
                    in_count: inc,
                    volume: vol,
                    r_mass: rm,
                    out_ratio: ratio,
                    min_ratio: minr,
                },
            ));
        }
    });
    Ok(best.map_or(SparsestCut::Empty, |(_, r)| SparsestCut::Found(r)))
}

fn lex_smaller(a: &BTreeSet<VertexId>, b: &BTreeSet<VertexId>) -> bool {
    let av: Vec<_> = a.iter().collect();
    let bv: Vec<_> = b.iter().collect();
    av < bv
}

/// Finds a cut violating `min(out, in) >= threshold * vol(S)` for
/// `vol(S) <= vol(S̄)`; `None` certifies the expansion level.
pub fn expander_violation(
    view: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    threshold: &Ratio,
) -> Result<Option<CutReport>> {
    let empty = BTreeMap::new();
    let ctx = build_context(view, members, &empty, &CutWeight::Volume)?;
    let (total_vol, _, _) = ctx.totals();
    let mut found: Option<CutReport> = None;
    ctx.for_each_cut(|mask, out, inc, vol, _wgt, _rm| {
        if found.is_some() || vol * 2 > total_vol {
            return;
        }
        let lhs = from_u64(out.min(inc));
        let rhs = threshold * from_u64(vol);
        if lhs < rhs {
            let denom = vol.max(1);
            found = Some(CutReport {
                side: ctx.side(mask),
                out_count: out,
                in_count: inc,
                volume: vol,
                r_mass: 0,
                out_ratio: from_u64(out) / from_u64(denom),
                min_ratio: from_u64(out.min(inc)) / from_u64(denom),
            });
        }
    });
    Ok(found)
}

/// Tarjan SCCs over the vertices of `members` (or all vertices when `None`);
/// components are ordered by their smallest member, members ascending.
pub fn tarjan_scc(view: GraphView<'_>, members: Option<&BTreeSet<VertexId>>) -> Vec<Vec<VertexId>> {
    let verts: Vec<VertexId> = match members {
        Some(m) => m.iter().copied().collect(),
        None => view.graph().vertex_ids().collect(),
    };
    let keep: BTreeSet<VertexId> = verts.iter().copied().collect();

    #[derive(Clone, Copy)]
    struct Frame {
        v: VertexId,
        edge_pos: usize,
    }
    let mut index: HashMap<VertexId, u32> = HashMap::new();
    let mut low: HashMap<VertexId, u32> = HashMap::new();
    let mut on_stack: BTreeSet<VertexId> = BTreeSet::new();
    let mut stack: Vec<VertexId> = Vec::new();
    let mut next = 0u32;
    let mut comps: Vec<Vec<VertexId>> = Vec::new();

    for &root in &verts {
        if index.contains_key(&root) {
            continue;
        }
        let mut call: Vec<Frame> = vec![Frame {
            v: root,
            edge_pos: 0,
        }];
        index.insert(root, next);
        low.insert(root, next);
        next += 1;
        stack.push(root);
        on_stack.insert(root);
        while let Some(frame) = call.last_mut() {
            let v = frame.v;
            let outs = view.out_edges(v);
            if frame.edge_pos < outs.len() {
                let e = outs[frame.edge_pos];
                frame.edge_pos += 1;
                let w = view.head(e);
                if w == v || !keep.contains(&w) {
                    continue;
                }
                match index.get(&w) {
                    None => {
                        index.insert(w, next);
                        low.insert(w, next);
                        next += 1;
                        stack.push(w);
                        on_stack.insert(w);
                        call.push(Frame { v: w, edge_pos: 0 });
                    }
                    Some(&wi) => {
                        if on_stack.contains(&w) {
                            let lv = low[&v].min(wi);
                            low.insert(v, lv);
                        }
                    }
                }
            } else {
                if low[&v] == index[&v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack.remove(&w);
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
                let lv = low[&v];
                call.pop();
                if let Some(parent) = call.last() {
                    let pl = low[&parent.v].min(lv);
                    low.insert(parent.v, pl);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Checks that contracting `partition` and dropping `excluded` edges leaves
/// an acyclic graph (self-loops inside parts ignored).
pub fn condensation_is_dag(
    view: GraphView<'_>,
    partition: &[BTreeSet<VertexId>],
    excluded: &BTreeSet<EdgeId>,
) -> bool {
    let mut part_of: HashMap<VertexId, usize> = HashMap::new();
    for (i, part) in partition.iter().enumerate() {
        for &v in part {
            part_of.insert(v, i);
        }
    }
    let n = partition.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in view.graph().live_edge_ids() {
        if excluded.contains(&e) {
            continue;
        }
        let t = view.tail(e);
        let h = view.head(e);
        let (Some(&pt), Some(&ph)) = (part_of.get(&t), part_of.get(&h)) else {
            continue;
        };
        if pt != ph {
            adj[pt].insert(ph);
        }
    }
    // Kahn
    let mut indeg = vec![0usize; n];
    for outs in &adj {
        for &j in outs {
            indeg[j] += 1;
        }
    }
    let mut q: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = q.pop_front() {
        seen += 1;
        for &j in &adj[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                q.push_back(j);
            }
        }
    }
    seen == n
}

/// Result of the generic max-flow used to validate the blocking-flow engine.
#[derive(Debug, Clone)]
pub struct MaxFlowResult {
    pub routed: u64,
    pub excess_l1: u64,
    pub excess: BTreeMap<VertexId, u64>,
}

/// True maximum routable source mass for a uniform-capacity diffusion
/// problem, via repeated BFS augmenting paths over a super-source/super-sink
/// reduction. Independent of the blocking-flow code.
pub fn max_flow_exact(
    view: GraphView<'_>,
    capacity: u64,
    source: &BTreeMap<VertexId, u64>,
    sink: &BTreeMap<VertexId, u64>,
) -> Result<MaxFlowResult> {
    let m = view.graph().live_edge_count();
    if m > 10_000 {
        return Err(Error::SizeGate(format!(
            "max-flow oracle limited to 10^4 edges, got {m}"
        )));
    }
    let mut flow: HashMap<EdgeId, i64> = HashMap::new();
    let mut src_used: BTreeMap<VertexId, u64> = BTreeMap::new();
    let mut snk_used: BTreeMap<VertexId, u64> = BTreeMap::new();
    let total_src: u64 = source.values().sum();
    let mut routed = 0u64;

    loop {
        // BFS from unsaturated sources to unsaturated sinks
        #[derive(Clone, Copy)]
        enum Step {
            Root,
            Fwd(EdgeId, VertexId),
            Bwd(EdgeId, VertexId),
        }
        let mut pred: HashMap<VertexId, Step> = HashMap::new();
        let mut queue = VecDeque::new();
        for (&v, &cap) in source {
            if src_used.get(&v).copied().unwrap_or(0) < cap {
                pred.insert(v, Step::Root);
                queue.push_back(v);
            }
        }
        let mut found: Option<VertexId> = None;
        'bfs: while let Some(v) = queue.pop_front() {
            let spare = sink.get(&v).copied().unwrap_or(0) - snk_used.get(&v).copied().unwrap_or(0);
            if spare > 0 {
                found = Some(v);
                break 'bfs;
            }
            for &e in view.out_edges(v) {
                let w = view.head(e);
                if w == v || pred.contains_key(&w) {
                    continue;
                }
                if flow.get(&e).copied().unwrap_or(0) < capacity as i64 {
                    pred.insert(w, Step::Fwd(e, v));
                    queue.push_back(w);
                }
            }
            for &e in view.in_edges(v) {
                let w = view.tail(e);
                if w == v || pred.contains_key(&w) {
                    continue;
                }
                if flow.get(&e).copied().unwrap_or(0) > 0 {
                    pred.insert(w, Step::Bwd(e, v));
                    queue.push_back(w);
                }
            }
        }
        let Some(t) = found else { break };
        // trace back, find bottleneck
        let mut b = sink.get(&t).copied().unwrap_or(0) - snk_used.get(&t).copied().unwrap_or(0);
        let mut cur = t;
        let mut rev_path = Vec::new();
        let start = loop {
            match pred[&cur] {
                Step::Root => break cur,
                Step::Fwd(e, from) => {
                    b = b.min(capacity - flow.get(&e).copied().unwrap_or(0) as u64);
                    rev_path.push((e, true));
                    cur = from;
                }
                Step::Bwd(e, from) => {
                    b = b.min(flow.get(&e).copied().unwrap_or(0) as u64);
                    rev_path.push((e, false));
                    cur = from;
                }
            }
        };
        let src_spare = source[&start] - src_used.get(&start).copied().unwrap_or(0);
        b = b.min(src_spare);
        debug_assert!(b > 0);
        for (e, fwd) in rev_path {
            let f = flow.entry(e).or_insert(0);
            *f += if fwd { b as i64 } else { -(b as i64) };
        }
        *src_used.entry(start).or_default() += b;
        *snk_used.entry(t).or_default() += b;
        routed += b;
    }

    let mut excess = BTreeMap::new();
    for (&v, &cap) in source {
        let left = cap - src_used.get(&v).copied().unwrap_or(0);
        if left > 0 {
            excess.insert(v, left);
        }
    }
    Ok(MaxFlowResult {
        routed,
        excess_l1: total_src - routed,
        excess,
    })
}

/// Undirected-sense reachability (edges usable both ways), for the
/// connectivity oracle.
pub fn bfs_connected(view: GraphView<'_>, u: VertexId, v: VertexId) -> bool {
    if u == v {
        return true;
    }
    let mut seen: BTreeSet<VertexId> = BTreeSet::new();
    seen.insert(u);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for &e in view.out_edges(x).iter().chain(view.in_edges(x)) {
            let (t, h) = (view.tail(e), view.head(e));
            let y = if t == x { h } else { t };
            if seen.insert(y) {
                if y == v {
                    return true;
                }
                queue.push_back(y);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DynGraph;
    use crate::ratio::ratio;

    fn directed_clique(k: usize) -> DynGraph {
        let mut g = DynGraph::with_vertices(k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    g.add_edge(VertexId(i as u32), VertexId(j as u32)).unwrap();
                }
            }
        }
        g
    }

    fn all(g: &DynGraph) -> BTreeSet<VertexId> {
        g.vertex_ids().collect()
    }

    #[test]
    fn k4_sparsest_cut() {
        let g = directed_clique(4);
        let r = BTreeMap::new();
        let res = enumerate_sparsest_cut(g.view(), &all(&g), &r, CutWeight::Volume).unwrap();
        let SparsestCut::Found(c) = res else {
            panic!("expected a cut")
        };
        // |S|=2 sides have 4 out-edges over volume 12 -> 1/3
        assert_eq!(c.out_ratio, ratio(1, 3));
        assert_eq!(c.side.len(), 2);
    }

    #[test]
    fn single_vertex_is_empty() {
        let g = DynGraph::with_vertices(1);
        let r = BTreeMap::new();
        let res = enumerate_sparsest_cut(g.view(), &all(&g), &r, CutWeight::Volume).unwrap();
        assert!(matches!(res, SparsestCut::Empty));
    }

    #[test]
    fn barbell_bridge_is_minimizer() {
        // two directed 4-cliques joined by one anti-parallel pair
        let mut g = directed_clique(4);
        for _ in 0..4 {
            g.add_vertex();
        }
        for i in 4..8u32 {
            for j in 4..8u32 {
                if i != j {
                    g.add_edge(VertexId(i), VertexId(j)).unwrap();
                }
            }
        }
        g.add_edge(VertexId(0), VertexId(4)).unwrap();
        g.add_edge(VertexId(4), VertexId(0)).unwrap();
        let r = BTreeMap::new();
        let res = enumerate_sparsest_cut(g.view(), &all(&g), &r, CutWeight::Volume).unwrap();
        let SparsestCut::Found(c) = res else {
            panic!("expected a cut")
        };
        assert_eq!(c.out_count, 1);
        assert_eq!(c.in_count, 1);
        assert_eq!(c.side.len(), 4);
    }

    #[test]
    fn expander_certificate() {
        let g = directed_clique(4);
        assert!(expander_violation(g.view(), &all(&g), &ratio(1, 4))
            .unwrap()
            .is_none());
        assert!(expander_violation(g.view(), &all(&g), &ratio(1, 2))
            .unwrap()
            .is_some());
    }

    #[test]
    fn size_gate_errors() {
        let g = DynGraph::with_vertices(17);
        let r = BTreeMap::new();
        assert!(matches!(
            enumerate_sparsest_cut(g.view(), &all(&g), &r, CutWeight::Volume),
            Err(Error::SizeGate(_))
        ));
    }

    #[test]
    fn tarjan_components() {
        // cycle 0->1->2->0 plus dangling 3
        let mut g = DynGraph::with_vertices(4);
        g.add_edge(VertexId(0), VertexId(1)).unwrap();
        g.add_edge(VertexId(1), VertexId(2)).unwrap();
        g.add_edge(VertexId(2), VertexId(0)).unwrap();
        g.add_edge(VertexId(2), VertexId(3)).unwrap();
        let comps = tarjan_scc(g.view(), None);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0], vec![VertexId(0), VertexId(1), VertexId(2)]);
        assert_eq!(comps[1], vec![VertexId(3)]);
        let partition: Vec<BTreeSet<VertexId>> = comps
            .iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        assert!(condensation_is_dag(g.view(), &partition, &BTreeSet::new()));
        // a fake partition separating the cycle is not a DAG
        let bad: Vec<BTreeSet<VertexId>> = vec![
            [VertexId(0)].into_iter().collect(),
            [VertexId(1), VertexId(2), VertexId(3)].into_iter().collect(),
        ];
        assert!(!condensation_is_dag(g.view(), &bad, &BTreeSet::new()));
    }

    #[test]
    fn max_flow_diamond() {
        let mut g = DynGraph::with_vertices(4);
        g.add_edge(VertexId(0), VertexId(1)).unwrap();
        g.add_edge(VertexId(0), VertexId(2)).unwrap();
        g.add_edge(VertexId(1), VertexId(3)).unwrap();
        g.add_edge(VertexId(2), VertexId(3)).unwrap();
        let src = BTreeMap::from([(VertexId(0), 3)]);
        let snk = BTreeMap::from([(VertexId(3), 3)]);
        let res = max_flow_exact(g.view(), 1, &src, &snk).unwrap();
        assert_eq!(res.routed, 2);
        assert_eq!(res.excess_l1, 1);
    }

    #[test]
    fn reachability() {
        let mut g = DynGraph::with_vertices(3);
        g.add_edge(VertexId(0), VertexId(1)).unwrap();
        assert!(bfs_connected(g.view(), VertexId(1), VertexId(0)));
        assert!(!bfs_connected(g.view(), VertexId(0), VertexId(2)));
    }
}
