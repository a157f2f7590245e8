//! One-shot pruning: repair a damaged witness through a local bounded
//! blocking flow, or extract a sufficiently large sparse cut.
//!
//! The flow problem places `⌈8/ψ⌉` units of source mass per slack unit, sinks
//! `deg_G + r` everywhere and caps every edge at `⌈16/(ψφ)⌉`. If the flow
//! drains all but `R'` of the source, the routed paths become new witness
//! edges; source mass absorbed where it was injected becomes witness
//! self-loops, capped by the local slack so the degree bound is kept.
//! Otherwise the saturated region around the leftover excess grows into a
//! sparse cut whose volume window `R' ≤ vol+r ≤ 8R/ψ` is asserted before
//! returning.

use std::collections::BTreeSet;

use crate::flow::{
    bounded_blocking_flow, is_r_flow, path_decomposition, residual_neighbors,
    verify_blocking_fact, FlowProblem, FlowStats,
};
use crate::graph::{GraphView, VertexId};
use crate::ratio::{ceil_u64, floor_log2, floor_u64, from_u64, ratio_u, Ratio};
use crate::vecmap::VertexVector;
use crate::witness::WitnessBundle;
use crate::{Error, Result};

/// Which orientation certified the sparsity of a returned cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Forward,
    Reverse,
}

#[derive(Debug, Clone)]
pub struct CutFound {
    pub side: BTreeSet<VertexId>,
    pub orientation: Orientation,
    /// |E(S,S̄)| in the certified orientation.
    pub sparse_boundary: u64,
    /// vol(S) + r(S) at the time of extraction.
    pub mass: u64,
}

#[derive(Debug)]
pub enum PruneOutcome {
    Cut(CutFound),
    Repaired(WitnessBundle),
}

#[derive(Debug)]
pub enum BothOutcome {
    Cut(CutFound),
    Repaired {
        forward: WitnessBundle,
        /// produced on the reversed host; edges still ⃖-oriented
        reverse: WitnessBundle,
    },
}

pub struct PruneParams<'a> {
    pub phi: &'a Ratio,
    pub psi: &'a Ratio,
    pub r_prime: &'a Ratio,
    /// exhaustively re-verify the blocking-flow guarantee after each solve
    pub verify_fact: bool,
    /// hard-check the repaired bundle's tight degree bound `3/ψ · deg`
    pub strict_checks: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PruneStats {
    pub flow: FlowStats,
    pub growth_iterations: u64,
}

/// Edge count of the host restricted to `members` (each self-loop once).
pub fn member_edge_count(host: GraphView<'_>, members: &BTreeSet<VertexId>) -> u64 {
    let mut m = 0;
    for &v in members {
        for &e in host.out_edges(v) {
            let h = host.head(e);
            if h == v || members.contains(&h) {
                m += 1;
            }
        }
    }
    m
}

/// `h = ⌈16·⌊log₂ m⌋ / (ψφ)⌉`, the round bound for the repair flow.
pub fn repair_round_bound(m: u64, psi: &Ratio, phi: &Ratio) -> u64 {
    let lg = u64::from(floor_log2(m));
    ceil_u64(&(ratio_u(16 * lg, 1) / (psi * phi)))
}

pub fn prune_or_repair(
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    r: &VertexVector,
    w: &WitnessBundle,
    params: &PruneParams<'_>,
    stats: &mut PruneStats,
) -> Result<PruneOutcome> {
    let psi = params.psi;
    let phi = params.phi;
    let m = member_edge_count(host, members);
    let r_norm = r.l1_norm();

    // Lemma hypothesis R ≤ ψm/8; violating it breaks the growth argument.
    if from_u64(8 * r_norm) > psi * from_u64(m) {
        return Err(Error::Precondition(format!(
            "prune requires ‖r‖₁ ≤ ψm/8, got ‖r‖₁ = {r_norm}, m = {m}"
        )));
    }

    let psi_prime = psi * psi / from_u64(6);

    if r_norm == 0 {
        // empty source: the zero flow is an R'-flow and nothing is added
        let mut out = w.clone();
        out.psi = psi_prime;
        return Ok(PruneOutcome::Repaired(out));
    }

    let source = {
        let factor = ceil_u64(&(ratio_u(8, 1) / psi));
        let mut s = VertexVector::new();
        for (v, x) in r.iter() {
            let amt = x
                .checked_mul(factor)
                .ok_or(Error::Overflow("source vector construction"))?;
            s.add(v, amt);
        }
        s
    };
    let mut sink = VertexVector::new();
    for &v in members {
        let d = host.degree(v) + r.get(v);
        if d > 0 {
            sink.set(v, d);
        }
    }
    let capacity = ceil_u64(&(ratio_u(16, 1) / (psi * phi)));
    let problem = FlowProblem {
        view: host,
        capacity,
        source,
        sink,
    };
    let h = repair_round_bound(m, psi, phi);
    let (preflow, flow_stats) = bounded_blocking_flow(&problem, h)?;
    stats.flow = flow_stats;
    if params.verify_fact {
        verify_blocking_fact(&problem, &preflow, h)?;
    }

    if is_r_flow(&preflow, floor_u64(params.r_prime)) {
        let decomposition = path_decomposition(&problem, &preflow)?;
        let mut out = w.clone();
        out.psi = psi_prime.clone();
        let base_congestion = out.emb.max_congestion(&out.w);
        for path in &decomposition.paths {
            out.add_embedded_edge(path.start, path.end, path.units, path.edges.clone());
            out.r.sub_clamped(path.start, path.units);
        }
        // absorbed-in-place mass turns into witness self-loops, capped by
        // the slack still present so deg_W + r never grows past its budget
        for (v, k) in decomposition.self_absorbed.iter() {
            let take = k.min(out.r.get(v));
            if take > 0 {
                out.add_embedded_edge(v, v, take, Vec::new());
                out.r.sub_clamped(v, take);
            }
        }
        if from_u64(out.r.l1_norm()) > *params.r_prime {
            return Err(Error::Postcondition(format!(
                "repaired slack ‖r'‖₁ = {} exceeds R' = {}",
                out.r.l1_norm(),
                params.r_prime
            )));
        }
        let cong = out.emb.max_congestion(&out.w);
        if cong > base_congestion + capacity {
            return Err(Error::Postcondition(format!(
                "repaired congestion {cong} exceeds cong(W) + capacity = {}",
                base_congestion + capacity
            )));
        }
        if params.strict_checks {
            for &v in members {
                let lhs = from_u64(out.w.degree(v) + out.r.get(v));
                let deg = host.degree(v);
                if lhs < from_u64(deg) || lhs > from_u64(3 * deg) / psi {
                    return Err(Error::Postcondition(format!(
                        "repaired degree bound [deg, 3deg/ψ] fails at {v}: deg_W+r = {lhs}, deg = {deg}"
                    )));
                }
            }
        }
        return Ok(PruneOutcome::Repaired(out));
    }

    // cut extraction: grow the excess region until it is φ-sparse
    let mut side: BTreeSet<VertexId> = preflow.excess().support().collect();
    let mut iterations = 0u64;
    loop {
        if side.len() == members.len() {
            return Err(Error::Guard(
                "cut growth swallowed the whole cluster; preconditions are broken".into(),
            ));
        }
        let (out_cnt, _) = host.boundary_counts(&side);
        let mass = host.volume(side.iter().copied()) + r.sum_over(side.iter());
        if from_u64(out_cnt) < phi * from_u64(mass) {
            // volume window from the pruning lemma, both ends
            if from_u64(mass) < *params.r_prime {
                return Err(Error::Postcondition(format!(
                    "cut mass {mass} below R' = {}",
                    params.r_prime
                )));
            }
            if from_u64(mass) * psi > from_u64(8 * r_norm) {
                return Err(Error::Postcondition(format!(
                    "cut mass {mass} above 8R/ψ (R = {r_norm})"
                )));
            }
            stats.growth_iterations = iterations;
            return Ok(PruneOutcome::Cut(CutFound {
                side,
                orientation: if host.is_reversed() {
                    Orientation::Reverse
                } else {
                    Orientation::Forward
                },
                sparse_boundary: out_cnt,
                mass,
            }));
        }
        iterations += 1;
        if iterations > h {
            return Err(Error::Guard(format!(
                "cut growth exceeded {h} iterations; preconditions are broken"
            )));
        }
        let next = residual_neighbors(&problem, &preflow, &side);
        if next.is_empty() {
            return Err(Error::Guard(
                "cut growth stalled while the boundary is non-sparse".into(),
            ));
        }
        side.extend(next);
    }
}

/// Runs the pruning procedure on the host and on its reversal with identical
/// parameters. The first cut wins; otherwise both repaired out-witnesses are
/// returned for the union step.
pub fn prune_or_repair_both(
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    r: &VertexVector,
    w: &WitnessBundle,
    params: &PruneParams<'_>,
    stats: &mut PruneStats,
) -> Result<BothOutcome> {
    match prune_or_repair(host, members, r, w, params, stats)? {
        PruneOutcome::Cut(cut) => Ok(BothOutcome::Cut(cut)),
        PruneOutcome::Repaired(forward) => {
            let w_rev = w.reversed();
            let mut rev_stats = PruneStats::default();
            let outcome =
                prune_or_repair(host.reversed(), members, r, &w_rev, params, &mut rev_stats)?;
            stats.flow.rounds += rev_stats.flow.rounds;
            stats.flow.edges_seen_total += rev_stats.flow.edges_seen_total;
            stats.flow.edges_seen_max_round = stats
                .flow
                .edges_seen_max_round
                .max(rev_stats.flow.edges_seen_max_round);
            stats.flow.augmenting_paths += rev_stats.flow.augmenting_paths;
            stats.growth_iterations += rev_stats.growth_iterations;
            match outcome {
                PruneOutcome::Cut(cut) => Ok(BothOutcome::Cut(cut)),
                PruneOutcome::Repaired(reverse) => Ok(BothOutcome::Repaired { forward, reverse }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DynGraph;
    use crate::ratio::ratio;
    use crate::vecmap::VertexVector;
    use crate::witness::{check_witness, CheckDirection, RBound};

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

    fn members(g: &DynGraph) -> BTreeSet<VertexId> {
        g.vertex_ids().collect()
    }

    #[test]
    fn zero_slack_returns_input_witness() {
        let g = directed_clique(4);
        let m = members(&g);
        let w = WitnessBundle::identity(g.view(), &m, ratio(1, 8), ratio(1, 8));
        let params = PruneParams {
            phi: &ratio(1, 8),
            psi: &ratio(1, 8),
            r_prime: &ratio(1, 2),
            verify_fact: true,
            strict_checks: true,
        };
        let mut stats = PruneStats::default();
        let out = prune_or_repair(
            g.view(),
            &m,
            &VertexVector::new(),
            &w,
            &params,
            &mut stats,
        )
        .unwrap();
        match out {
            PruneOutcome::Repaired(b) => {
                assert!(b.r.is_zero());
                assert_eq!(b.psi, ratio(1, 64) / ratio(6, 1));
                assert_eq!(b.w.total_multiplicity(), w.w.total_multiplicity());
            }
            PruneOutcome::Cut(_) => panic!("expected repair"),
        }
    }

    #[test]
    fn precondition_r_too_large() {
        let g = directed_clique(3);
        let m = members(&g);
        let mut r = VertexVector::new();
        r.add(VertexId(0), 50);
        let w = WitnessBundle::identity(g.view(), &m, ratio(1, 8), ratio(1, 8));
        let params = PruneParams {
            phi: &ratio(1, 8),
            psi: &ratio(1, 8),
            r_prime: &ratio(1, 1),
            verify_fact: false,
            strict_checks: false,
        };
        assert!(matches!(
            prune_or_repair(g.view(), &m, &r, &w, &params, &mut PruneStats::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn repair_after_internal_deletion() {
        // K10 with one internal edge deleted and cascaded; the flow re-routes
        // the displaced witness structure
        let mut g = directed_clique(10);
        let m = members(&g);
        let psi = ratio(1, 4);
        let phi = ratio(1, 8);
        let mut w = WitnessBundle::identity(g.view(), &m, psi.clone(), phi.clone());
        let victim = g
            .live_edge_ids()
            .find(|&e| g.endpoints(e).unwrap() == (VertexId(0), VertexId(1)))
            .unwrap();
        g.delete_edge(victim).unwrap();
        w.delete_host_edge_cascade(victim);
        let r = w.r.clone();
        assert_eq!(r.l1_norm(), 2);

        let params = PruneParams {
            phi: &phi,
            psi: &psi,
            r_prime: &ratio(1, 1),
            verify_fact: true,
            strict_checks: true,
        };
        let mut stats = PruneStats::default();
        let out = prune_or_repair(g.view(), &m, &r, &w, &params, &mut stats).unwrap();
        let PruneOutcome::Repaired(b) = out else {
            panic!("K10 minus one edge stays repairable")
        };
        assert!(from_u64(b.r.l1_norm()) <= ratio(1, 1));
        let gamma = VertexVector::from_degrees(&g, m.iter().copied());
        let rep = check_witness(
            &b,
            g.view(),
            &m,
            &gamma,
            &RBound::AtMost(ratio(1, 1)),
            CheckDirection::Out,
            16,
        );
        assert!(rep.all_pass(false), "{}", rep.summary());
    }

    /// Main clique K8 with tripled edges plus a 3-vertex bidirected pocket
    /// the main side feeds into; the pocket has no outgoing edges. Slack
    /// inside the pocket cannot drain, so the excess region grows into the
    /// pocket cut.
    fn stranded_pocket() -> (DynGraph, VertexVector) {
        let mut g = DynGraph::with_vertices(11);
        for i in 0..8u32 {
            for j in 0..8u32 {
                if i != j {
                    for _ in 0..3 {
                        g.add_edge(VertexId(i), VertexId(j)).unwrap();
                    }
                }
            }
        }
        // bidirected pocket triangle on {8, 9, 10}
        for i in 8..11u32 {
            for j in 8..11u32 {
                if i != j {
                    g.add_edge(VertexId(i), VertexId(j)).unwrap();
                }
            }
        }
        // six one-way feeders into the pocket
        for k in 0..6u32 {
            g.add_edge(VertexId(k % 8), VertexId(8 + k % 3)).unwrap();
        }
        let mut r = VertexVector::new();
        r.add(VertexId(9), 2);
        (g, r)
    }

    #[test]
    fn stranded_slack_yields_cut() {
        let (g, r) = stranded_pocket();
        let m = members(&g);
        let psi = ratio(1, 10);
        let phi = ratio(1, 8);
        let w = WitnessBundle::identity(g.view(), &m, psi.clone(), phi.clone());
        // the input must be a valid witness of (g, r) w.r.t. γ = deg
        let gamma = VertexVector::from_degrees(&g, m.iter().copied());
        let mut wr = w.clone();
        wr.r = r.clone();
        let rep = check_witness(
            &wr,
            g.view(),
            &m,
            &gamma,
            &RBound::Unbounded,
            CheckDirection::Out,
            16,
        );
        assert!(rep.all_pass(false), "fixture invalid: {}", rep.summary());

        let r_prime = ratio(8, 1);
        let params = PruneParams {
            phi: &phi,
            psi: &psi,
            r_prime: &r_prime,
            verify_fact: true,
            strict_checks: false,
        };
        let mut stats = PruneStats::default();
        let out = prune_or_repair(g.view(), &m, &r, &w, &params, &mut stats).unwrap();
        let PruneOutcome::Cut(cut) = out else {
            panic!("stranded pocket must produce a cut")
        };
        // the pocket side: zero out-edges, inside the volume window
        assert_eq!(cut.side, [VertexId(8), VertexId(9), VertexId(10)].into_iter().collect());
        assert_eq!(cut.sparse_boundary, 0);
        assert!(from_u64(cut.mass) >= r_prime);
        assert!(from_u64(cut.mass) <= ratio(8 * 2, 1) / psi);
    }

    #[test]
    fn reverse_pass_finds_in_sparse_cut() {
        // mirror of the stranded pocket: pocket edges all point outward, so
        // the forward pass repairs and the reversed pass extracts the cut
        let (fwd_g, r) = stranded_pocket();
        let mut g = DynGraph::with_vertices(fwd_g.vertex_count());
        for e in fwd_g.live_edge_ids() {
            let (t, h) = fwd_g.endpoints(e).unwrap();
            g.add_edge(h, t).unwrap();
        }
        let m = members(&g);
        let psi = ratio(1, 10);
        let phi = ratio(1, 8);
        let w = WitnessBundle::identity(g.view(), &m, psi.clone(), phi.clone());
        let r_prime = ratio(8, 1);
        let params = PruneParams {
            phi: &phi,
            psi: &psi,
            r_prime: &r_prime,
            verify_fact: true,
            strict_checks: false,
        };
        let mut stats = PruneStats::default();
        let out = prune_or_repair_both(g.view(), &m, &r, &w, &params, &mut stats).unwrap();
        match out {
            BothOutcome::Cut(cut) => {
                assert_eq!(cut.orientation, Orientation::Reverse);
                assert!(cut.side.contains(&VertexId(9)));
                assert_eq!(cut.sparse_boundary, 0);
            }
            BothOutcome::Repaired { .. } => panic!("expected the reversed pass to cut"),
        }
    }

    #[test]
    fn symmetric_repair_union_has_doubled_degrees() {
        let g = directed_clique(4);
        let m = members(&g);
        let psi = ratio(1, 8);
        let phi = ratio(1, 8);
        let w = WitnessBundle::identity(g.view(), &m, psi.clone(), phi.clone());
        let params = PruneParams {
            phi: &phi,
            psi: &psi,
            r_prime: &ratio(1, 2),
            verify_fact: false,
            strict_checks: true,
        };
        let mut stats = PruneStats::default();
        let out = prune_or_repair_both(
            g.view(),
            &m,
            &VertexVector::new(),
            &w,
            &params,
            &mut stats,
        )
        .unwrap();
        let BothOutcome::Repaired { forward, reverse } = out else {
            panic!("clique with no damage repairs trivially")
        };
        let u = forward
            .union_with_reversed(&reverse, ratio(1, 64))
            .unwrap();
        for &v in &m {
            assert_eq!(u.w.degree(v), 2 * w.w.degree(v));
        }
    }
}
