//! The maintenance engine: partition, per-cluster per-level witness bundles,
//! the update/settle loop, the ψ-level schedule and the monotone cut-edge
//! record set.
//!
//! Each cluster carries one witness bundle per level `0..=L_max`. An
//! adversarial update cascades through every level of the affected cluster;
//! the settle loop then repeatedly picks the highest level whose slack
//! crosses its threshold and recomputes it — the top level through
//! CutOrEmbed, lower levels by pruning the level above. Cuts delete all
//! crossing edges, record the smaller edge set, and split the cluster; the
//! partition only ever refines and the record log only ever grows.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::Hasher;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

use crate::cutmatch::{cut_or_embed, CutMatchConfig, CutOrEmbedOutcome, EmbedCut};
use crate::graph::{DynGraph, EdgeId, UpdateEvent, VertexId};
use crate::prune::{
    member_edge_count, prune_or_repair_both, BothOutcome, CutFound, PruneParams, PruneStats,
};
use crate::ratio::{from_u64, ratio, Ratio};
use crate::vecmap::VertexVector;
use crate::witness::WitnessBundle;
use crate::{Error, Result};

/// ψ per level: `psi[L_max] = ψ_CMG/2`, `psi[l] = psi[l+1]⁴/144`.
#[derive(Debug, Clone)]
pub struct LevelSchedule {
    pub l_max: u32,
    psi: Vec<Ratio>,
}

impl LevelSchedule {
    pub fn new(l_max: u32, psi_cmg: &Ratio) -> Self {
        let mut psi = vec![Ratio::zero(); l_max as usize + 1];
        psi[l_max as usize] = psi_cmg / from_u64(2);
        for l in (0..l_max as usize).rev() {
            let up = psi[l + 1].clone();
            psi[l] = &up * &up * &up * &up / from_u64(144);
        }
        Self { l_max, psi }
    }

    pub fn psi(&self, l: u32) -> &Ratio {
        &self.psi[l as usize]
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        0..=self.l_max
    }
}

/// Exact integer evaluation of `8·r_norm ≥ ψ_l · m_x^{l/L_max}`: with
/// `ψ_l = p/q` in lowest terms this compares `(8·q·r_norm)^L ≥ p^L·m_x^l`.
pub fn threshold_check(r_norm: u64, m_x: u64, l: u32, sched: &LevelSchedule) -> bool {
    if r_norm == 0 {
        return false;
    }
    let psi = sched.psi(l);
    let p = psi.numer().to_biguint().expect("ψ > 0");
    let q = psi.denom().to_biguint().expect("ψ > 0");
    let lp = sched.l_max.max(1);
    let lhs = (BigUint::from(8u64) * q * BigUint::from(r_norm)).pow(lp);
    let rhs = p.pow(lp) * BigUint::from(m_x).pow(l);
    lhs >= rhs
}

/// `R' = ψ_l/32 · m^{l/L}`, exact when `m^{l/L}` is integral and otherwise
/// floored to the largest consistent integer (every consumer compares it
/// against integers, so the floor is lossless).
pub fn r_prime_budget(psi_l: &Ratio, m_x: u64, l: u32, l_max: u32) -> Ratio {
    if l == 0 || m_x == 0 {
        return psi_l / from_u64(32);
    }
    if l == l_max {
        return psi_l * from_u64(m_x) / from_u64(32);
    }
    let p = psi_l.numer().to_biguint().expect("ψ > 0");
    let q32 = psi_l.denom().to_biguint().expect("ψ > 0") * BigUint::from(32u64);
    let m_pow = BigUint::from(m_x).pow(l);
    let root = m_pow.nth_root(l_max);
    if root.pow(l_max) == m_pow {
        return Ratio::new(BigInt::from(p * root), BigInt::from(q32));
    }
    // largest integer t with (32·q·t)^L ≤ p^L·m^l
    let rhs = p.pow(l_max) * &m_pow;
    let mut lo = BigUint::zero();
    let mut hi = BigUint::from(m_x) + 1u64;
    while &lo + 1u64 < hi {
        let mid = (&lo + &hi) / 2u64;
        if (&q32 * &mid).pow(l_max) <= rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from_u64(lo.to_u64().unwrap_or(u64::MAX))
}

pub type ClusterId = u32;

#[derive(Debug, Clone)]
pub struct ClusterState {
    pub members: BTreeSet<VertexId>,
    pub gamma: VertexVector,
    /// one bundle per level; `levels[l].r` is the level's slack vector
    pub levels: Vec<WitnessBundle>,
    /// |E(G[X])| counting each self-loop once
    pub edge_count: u64,
}

/// Where a record entered the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordOrigin {
    /// smaller side of an executed cut; batch members share an id
    CutBatch(u64),
    /// adversarial deletion of an edge already crossing clusters
    InterCluster,
    /// undirected pairing closure
    Closure,
}

#[derive(Debug, Clone)]
pub struct RRecord {
    pub edge: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub stage: u64,
    pub origin: RecordOrigin,
}

#[derive(Debug, Clone)]
pub struct DecompConfig {
    pub phi: Ratio,
    pub l_max: u32,
    pub psi_cmg: Ratio,
    pub seed: u64,
    pub enum_gate: usize,
    pub cutmatch_rounds: Option<u32>,
    /// re-verify the blocking-flow guarantee after every solve
    pub verify_fact: bool,
    /// hard-check repaired witness degree bounds inside prune
    pub strict_prune_checks: bool,
    /// reseed attempts for the randomized cut-matching game
    pub max_retries: u32,
    /// escalate failed prunes to a full top-level recompute
    pub escalate_prune_failures: bool,
}

impl Default for DecompConfig {
    fn default() -> Self {
        Self {
            phi: ratio(1, 8),
            l_max: 1,
            psi_cmg: ratio(1, 8),
            seed: 0,
            enum_gate: 16,
            cutmatch_rounds: None,
            verify_fact: false,
            strict_prune_checks: false,
            max_retries: 8,
            escalate_prune_failures: true,
        }
    }
}

/// Per-stage instrumentation; one report per adversarial update.
#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub stage: u64,
    pub records_total: usize,
    pub clusters: usize,
    /// per-level recompute counts this stage
    pub recomputes: Vec<u64>,
    pub cuts_executed: u64,
    pub prune_calls: u64,
    pub cutmatch_calls: u64,
    pub escalations: u64,
    pub flow_rounds: u64,
    pub flow_edges_max_round: u64,
    pub flow_edges_total: u64,
    pub singleton_splits: u64,
    pub loops_inserted: u64,
}

pub struct DecompositionState {
    graph: DynGraph,
    cfg: DecompConfig,
    schedule: LevelSchedule,
    clusters: BTreeMap<ClusterId, ClusterState>,
    next_cluster: ClusterId,
    vertex_cluster: Vec<ClusterId>,
    records: Vec<RRecord>,
    engine_retired: HashSet<EdgeId>,
    stage: u64,
    cut_counter: u64,
    seed_counter: u64,
    pending: BTreeSet<ClusterId>,
    report: StageReport,
}

impl DecompositionState {
    /// Builds the initial decomposition: one cluster holding every vertex,
    /// empty witnesses with `r = deg`, `γ = deg`, then a settle pass.
    pub fn initialize(graph: DynGraph, cfg: DecompConfig) -> Result<Self> {
        if graph.vertex_count() == 0 {
            return Err(Error::Precondition("initialize needs a vertex".into()));
        }
        let schedule = LevelSchedule::new(cfg.l_max, &cfg.psi_cmg);
        let members: BTreeSet<VertexId> = graph.vertex_ids().collect();
        let gamma = VertexVector::from_degrees(&graph, members.iter().copied());
        let levels = schedule
            .levels()
            .map(|l| {
                WitnessBundle::empty(
                    members.iter(),
                    gamma.clone(),
                    schedule.psi(l).clone(),
                    cfg.phi.clone(),
                )
            })
            .collect();
        let edge_count = graph.live_edge_count();
        let vertex_cluster = vec![0; graph.vertex_count()];
        let mut state = Self {
            graph,
            cfg,
            schedule,
            clusters: BTreeMap::from([(
                0,
                ClusterState {
                    members,
                    gamma,
                    levels,
                    edge_count,
                },
            )]),
            next_cluster: 1,
            vertex_cluster,
            records: Vec::new(),
            engine_retired: HashSet::new(),
            stage: 0,
            cut_counter: 0,
            seed_counter: 0,
            pending: BTreeSet::from([0]),
            report: StageReport::default(),
        };
        state.begin_report();
        state.settle()?;
        Ok(state)
    }

    pub fn graph(&self) -> &DynGraph {
        &self.graph
    }

    pub fn config(&self) -> &DecompConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn records(&self) -> &[RRecord] {
        &self.records
    }

    /// Appends a closure record (undirected pairing); apps-layer hook.
    pub fn push_closure_record(&mut self, edge: EdgeId, tail: VertexId, head: VertexId) {
        self.records.push(RRecord {
            edge,
            tail,
            head,
            stage: self.stage,
            origin: RecordOrigin::Closure,
        });
    }

    pub fn cluster_ids(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.clusters.keys().copied()
    }

    pub fn cluster_state(&self, id: ClusterId) -> Option<&ClusterState> {
        self.clusters.get(&id)
    }

    pub fn query_cluster(&self, v: VertexId) -> Result<ClusterId> {
        if !self.graph.contains_vertex(v) {
            return Err(Error::UnknownVertex(v.0));
        }
        Ok(self.vertex_cluster[v.index()])
    }

    /// Current partition, ordered by cluster id.
    pub fn query_partition(&self) -> Vec<BTreeSet<VertexId>> {
        self.clusters.values().map(|c| c.members.clone()).collect()
    }

    /// Was this edge retired by the engine itself (cut sweep)?
    pub fn engine_retired(&self, e: EdgeId) -> bool {
        self.engine_retired.contains(&e)
    }

    fn begin_report(&mut self) {
        self.report = StageReport {
            stage: self.stage,
            recomputes: vec![0; self.schedule.l_max as usize + 1],
            ..StageReport::default()
        };
    }

    fn finish_report(&mut self) -> StageReport {
        self.report.stage = self.stage;
        self.report.records_total = self.records.len();
        self.report.clusters = self.clusters.len();
        std::mem::take(&mut self.report)
    }

    /// One full stage: apply the adversarial update (if any), then settle.
    pub fn update(&mut self, ev: Option<UpdateEvent>) -> Result<StageReport> {
        self.begin_report();
        if let Some(ev) = ev {
            self.stage += 1;
            self.apply_update(ev)?;
        }
        self.settle()?;
        Ok(self.finish_report())
    }

    /// Applies one update through every level of the affected cluster
    /// without running the settle loop. Callers composing multi-part stages
    /// must call [`settle`](Self::settle) before relying on invariants.
    pub fn apply_update(&mut self, ev: UpdateEvent) -> Result<()> {
        match ev {
            UpdateEvent::DeleteEdge(e) => self.apply_delete(e),
            UpdateEvent::InsertSelfLoop(v) => self.apply_loop(v),
            UpdateEvent::SplitVertex { v, moved } => self.apply_split(v, &moved),
        }
    }

    fn apply_delete(&mut self, e: EdgeId) -> Result<()> {
        if !self.graph.is_alive(e) {
            if self.engine_retired.contains(&e) {
                // the engine already deleted it during a cut sweep
                return Ok(());
            }
            return Err(Error::UnknownEdge(e.0));
        }
        let (t, h) = self.graph.endpoints(e)?;
        let ct = self.vertex_cluster[t.index()];
        let ch = self.vertex_cluster[h.index()];
        if ct != ch {
            // inter-cluster deletion: the record set absorbs it
            self.records.push(RRecord {
                edge: e,
                tail: t,
                head: h,
                stage: self.stage,
                origin: RecordOrigin::InterCluster,
            });
            self.graph.delete_edge(e)?;
            return Ok(());
        }
        self.graph.delete_edge(e)?;
        let cluster = self.clusters.get_mut(&ct).expect("cluster exists");
        cluster.edge_count -= 1;
        let graph = &self.graph;
        for bundle in cluster.levels.iter_mut() {
            let removed = bundle.delete_host_edge_cascade(e);
            let mut dirty: BTreeSet<VertexId> = [t, h].into_iter().collect();
            for (a, b, _) in removed {
                dirty.insert(a);
                dirty.insert(b);
            }
            bundle.cap_degree_overflow(|v| graph.degree(v), &dirty);
        }
        self.pending.insert(ct);
        Ok(())
    }

    fn apply_loop(&mut self, v: VertexId) -> Result<()> {
        if !self.graph.contains_vertex(v) {
            return Err(Error::UnknownVertex(v.0));
        }
        let cid = self.vertex_cluster[v.index()];
        self.graph.insert_self_loop(v)?;
        self.report.loops_inserted += 1;
        let cluster = self.clusters.get_mut(&cid).expect("cluster exists");
        cluster.edge_count += 1;
        let graph = &self.graph;
        let dirty: BTreeSet<VertexId> = [v].into_iter().collect();
        for bundle in cluster.levels.iter_mut() {
            bundle.r.add(v, 2);
            bundle.cap_degree_overflow(|x| graph.degree(x), &dirty);
        }
        self.pending.insert(cid);
        Ok(())
    }

    fn apply_split(&mut self, v: VertexId, moved: &BTreeSet<EdgeId>) -> Result<()> {
        if !self.graph.contains_vertex(v) {
            return Err(Error::UnknownVertex(v.0));
        }
        let cid = self.vertex_cluster[v.index()];
        let v_new = self.graph.split_vertex(v, moved)?;
        debug_assert_eq!(v_new.index() + 1, self.graph.vertex_count());
        self.vertex_cluster.push(cid);
        let cluster = self.clusters.get_mut(&cid).expect("cluster exists");
        cluster.members.insert(v_new);
        // γ_X(v') = 0: simply absent from the sparse vector
        let graph = &self.graph;
        for bundle in cluster.levels.iter_mut() {
            bundle.split_host_vertex_cascade(graph.view(), v, v_new, moved);
            let mut dirty: BTreeSet<VertexId> = [v, v_new].into_iter().collect();
            dirty.extend(bundle.r.support());
            bundle.cap_degree_overflow(|x| graph.degree(x), &dirty);
        }
        self.pending.insert(cid);
        Ok(())
    }

    /// Inserts an intra-cluster edge outside the adversary model; used by
    /// the hierarchy's loop-to-edge materialization, whose companion loop
    /// deletions restore every degree before the stage settles.
    pub fn insert_edge_internal(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId> {
        let cu = self.query_cluster(u)?;
        let cv = self.query_cluster(v)?;
        if cu != cv {
            return Err(Error::Precondition(
                "internal edge materialization must stay within a cluster".into(),
            ));
        }
        let e = self.graph.add_edge(u, v)?;
        self.clusters.get_mut(&cu).expect("cluster").edge_count += 1;
        self.pending.insert(cu);
        Ok(e)
    }

    /// The settle loop: recompute tripped levels (highest first) until no
    /// threshold fires, then split zero-degree vertices into singleton
    /// clusters so clusters stay exactly the strongly connected pieces.
    pub fn settle(&mut self) -> Result<()> {
        let split_guard = 4 * self.graph.vertex_count() as u64 + 16;
        let mut splits = 0u64;
        let iter_guard = split_guard * (u64::from(self.schedule.l_max) + 2) * 4 + 64;
        let mut iterations = 0u64;
        loop {
            while let Some((cid, level)) = self.find_tripped() {
                iterations += 1;
                if iterations > iter_guard {
                    return Err(Error::Guard(format!(
                        "settle loop exceeded {iter_guard} iterations"
                    )));
                }
                let had_cut = if level == self.schedule.l_max {
                    self.recompute_top(cid)?
                } else {
                    self.recompute_via_prune(cid, level)?
                };
                if had_cut {
                    splits += 1;
                    if splits > split_guard {
                        return Err(Error::Guard(format!(
                            "more than {split_guard} cluster splits in one stage"
                        )));
                    }
                }
            }
            let swept = self.singleton_sweep();
            self.report.singleton_splits += swept;
            if swept == 0 {
                break;
            }
        }
        Ok(())
    }

    /// Highest tripped level among touched clusters; ties by cluster id.
    fn find_tripped(&mut self) -> Option<(ClusterId, u32)> {
        let mut best: Option<(u32, ClusterId)> = None;
        let mut settled: Vec<ClusterId> = Vec::new();
        for &cid in &self.pending {
            let Some(cluster) = self.clusters.get(&cid) else {
                settled.push(cid);
                continue;
            };
            let mut hit = None;
            for l in (0..=self.schedule.l_max).rev() {
                let norm = cluster.levels[l as usize].r.l1_norm();
                if threshold_check(norm, cluster.edge_count, l, &self.schedule) {
                    hit = Some(l);
                    break;
                }
            }
            match hit {
                None => settled.push(cid),
                Some(l) => {
                    if best.map_or(true, |(bl, bc)| l > bl || (l == bl && cid < bc)) {
                        best = Some((l, cid));
                    }
                }
            }
        }
        for cid in settled {
            self.pending.remove(&cid);
        }
        best.map(|(l, cid)| (cid, l))
    }

    fn next_seed(&mut self) -> u64 {
        self.seed_counter += 1;
        self.cfg
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(self.seed_counter)
    }

    /// Top-level recompute via the cut-matching interface. Returns whether a
    /// cut was executed.
    fn recompute_top(&mut self, cid: ClusterId) -> Result<bool> {
        let cluster = self.clusters.get(&cid).expect("cluster exists");
        let members = cluster.members.clone();
        let m_x = cluster.edge_count;
        let budget = self.schedule.psi(self.schedule.l_max) * from_u64(m_x) / from_u64(16);
        let cm_cfg = CutMatchConfig {
            psi_cmg: self.cfg.psi_cmg.clone(),
            enum_gate: self.cfg.enum_gate,
            rounds: self.cfg.cutmatch_rounds,
            verify_fact: self.cfg.verify_fact,
        };
        self.report.cutmatch_calls += 1;
        let mut outcome = None;
        let mut last_err = None;
        for _ in 0..self.cfg.max_retries.max(1) {
            let seed = self.next_seed();
            match cut_or_embed(
                self.graph.view(),
                &members,
                &self.cfg.phi,
                &budget,
                &cm_cfg,
                seed,
            ) {
                Ok(out) => {
                    outcome = Some(out);
                    break;
                }
                Err(Error::Validation(msg)) => last_err = Some(Error::Validation(msg)),
                Err(other) => return Err(other),
            }
        }
        let outcome = match outcome {
            Some(o) => o,
            None => return Err(last_err.unwrap_or(Error::Other("cut-or-embed failed".into()))),
        };
        match outcome {
            CutOrEmbedOutcome::Witness(bundle) => {
                let cluster = self.clusters.get_mut(&cid).expect("cluster exists");
                cluster.gamma =
                    VertexVector::from_degrees(&self.graph, cluster.members.iter().copied());
                for l in 0..=self.schedule.l_max {
                    let mut b = bundle.clone();
                    b.psi = self.schedule.psi(l).clone();
                    cluster.levels[l as usize] = b;
                    self.report.recomputes[l as usize] += 1;
                }
                self.pending.insert(cid);
                Ok(false)
            }
            CutOrEmbedOutcome::Cut(cut) => {
                let cert = CutCertificate { mass: cut.volume };
                let EmbedCut { side, .. } = cut;
                self.execute_cut(cid, cert, side)?;
                Ok(true)
            }
        }
    }

    /// Lower-level recompute: prune the level above in both orientations and
    /// install the union at `level`. Returns whether a cut was executed.
    fn recompute_via_prune(&mut self, cid: ClusterId, level: u32) -> Result<bool> {
        let cluster = self.clusters.get(&cid).expect("cluster exists");
        let members = cluster.members.clone();
        let m_x = cluster.edge_count;
        let upper = &cluster.levels[level as usize + 1];
        debug_assert!(
            !threshold_check(upper.r.l1_norm(), m_x, level + 1, &self.schedule),
            "level discipline: the level above must satisfy its bound"
        );
        let r_hi = upper.r.clone();
        let psi_hi = self.schedule.psi(level + 1).clone();
        let r_prime = r_prime_budget(self.schedule.psi(level), m_x, level, self.schedule.l_max);
        let params = PruneParams {
            phi: &self.cfg.phi,
            psi: &psi_hi,
            r_prime: &r_prime,
            verify_fact: self.cfg.verify_fact,
            strict_checks: self.cfg.strict_prune_checks,
        };
        self.report.prune_calls += 1;
        let mut stats = PruneStats::default();
        let outcome = prune_or_repair_both(
            self.graph.view(),
            &members,
            &r_hi,
            upper,
            &params,
            &mut stats,
        );
        self.merge_flow_stats(&stats);
        match outcome {
            Ok(BothOutcome::Repaired { forward, reverse }) => {
                let union =
                    forward.union_with_reversed(&reverse, self.schedule.psi(level).clone())?;
                let cluster = self.clusters.get_mut(&cid).expect("cluster exists");
                cluster.levels[level as usize] = union;
                self.report.recomputes[level as usize] += 1;
                self.pending.insert(cid);
                Ok(false)
            }
            Ok(BothOutcome::Cut(cut)) => {
                let CutFound { side, mass, .. } = cut;
                self.execute_cut(cid, CutCertificate { mass }, side)?;
                Ok(true)
            }
            Err(Error::Guard(msg)) if self.cfg.escalate_prune_failures => {
                self.escalate(cid, msg)
            }
            Err(Error::Postcondition(msg)) if self.cfg.escalate_prune_failures => {
                self.escalate(cid, msg)
            }
            Err(Error::Validation(msg)) if self.cfg.escalate_prune_failures => {
                self.escalate(cid, msg)
            }
            Err(e) => Err(e),
        }
    }

    /// A failed prune means the stored witness was weaker than its claim; a
    /// full top-level recompute is always sound, just more expensive.
    fn escalate(&mut self, cid: ClusterId, _why: String) -> Result<bool> {
        self.report.escalations += 1;
        self.recompute_top(cid)
    }

    fn merge_flow_stats(&mut self, stats: &PruneStats) {
        self.report.flow_rounds += u64::from(stats.flow.rounds);
        self.report.flow_edges_total += stats.flow.edges_seen_total;
        self.report.flow_edges_max_round = self
            .report
            .flow_edges_max_round
            .max(stats.flow.edges_seen_max_round);
    }

    /// Executes a cut: records the smaller crossing edge set, deletes every
    /// crossing edge through the normal update path (both endpoints still
    /// share the cluster), then replaces the cluster by the induced halves.
    fn execute_cut(
        &mut self,
        cid: ClusterId,
        cert: CutCertificate,
        side: BTreeSet<VertexId>,
    ) -> Result<()> {
        let cluster = self.clusters.get(&cid).expect("cluster exists");
        if side.is_empty() || side.len() >= cluster.members.len() {
            return Err(Error::Postcondition("degenerate cut side".into()));
        }
        let (out_edges, in_edges) = self.graph.boundary(&side);
        // batch accounting against the certified side's mass
        let batch_len = out_edges.len().min(in_edges.len()) as u64;
        if from_u64(batch_len) >= &self.cfg.phi * from_u64(cert.mass) {
            return Err(Error::Postcondition(format!(
                "record batch of {batch_len} is not below φ·(vol+r), mass {}",
                cert.mass
            )));
        }
        let batch_id = self.cut_counter;
        self.cut_counter += 1;
        self.report.cuts_executed += 1;
        // smaller set recorded; ties take the out-set
        let batch: &[EdgeId] = if out_edges.len() <= in_edges.len() {
            &out_edges
        } else {
            &in_edges
        };
        for &e in batch {
            let (t, h) = self.graph.endpoints(e)?;
            self.records.push(RRecord {
                edge: e,
                tail: t,
                head: h,
                stage: self.stage,
                origin: RecordOrigin::CutBatch(batch_id),
            });
        }
        let mut crossing: Vec<EdgeId> = out_edges;
        crossing.extend(in_edges);
        crossing.sort_unstable();
        crossing.dedup();
        for e in crossing {
            self.apply_delete(e)?;
            self.engine_retired.insert(e);
        }
        // replace the cluster by the induced halves
        let cluster = self.clusters.remove(&cid).expect("cluster exists");
        self.pending.remove(&cid);
        let rest: BTreeSet<VertexId> = cluster.members.difference(&side).copied().collect();
        for half in [side, rest] {
            let id = self.next_cluster;
            self.next_cluster += 1;
            let levels: Vec<WitnessBundle> =
                cluster.levels.iter().map(|b| b.induced(&half)).collect();
            let edge_count = member_edge_count(self.graph.view(), &half);
            let gamma = cluster.gamma.restrict(|v| half.contains(&v));
            for &v in &half {
                self.vertex_cluster[v.index()] = id;
            }
            self.clusters.insert(
                id,
                ClusterState {
                    members: half,
                    gamma,
                    levels,
                    edge_count,
                },
            );
            self.pending.insert(id);
        }
        Ok(())
    }

    /// Splits zero-degree vertices out of multi-vertex clusters so that
    /// clusters remain exactly the SCCs of the maintained graph; no cut and
    /// no records are involved (such a vertex has no incident edges).
    fn singleton_sweep(&mut self) -> u64 {
        let mut jobs: Vec<(ClusterId, VertexId)> = Vec::new();
        for (&cid, cluster) in &self.clusters {
            if cluster.members.len() < 2 {
                continue;
            }
            for &v in &cluster.members {
                if self.graph.degree(v) == 0 {
                    jobs.push((cid, v));
                }
            }
        }
        let count = jobs.len() as u64;
        for (cid, v) in jobs {
            let cluster = self.clusters.get_mut(&cid).expect("cluster exists");
            if cluster.members.len() < 2 {
                continue;
            }
            cluster.members.remove(&v);
            let single: BTreeSet<VertexId> = [v].into_iter().collect();
            let levels: Vec<WitnessBundle> = cluster
                .levels
                .iter_mut()
                .map(|b| {
                    let singleton = b.induced(&single);
                    let rest: BTreeSet<VertexId> =
                        b.w.vertex_set().difference(&single).copied().collect();
                    let reduced = b.induced(&rest);
                    *b = reduced;
                    singleton
                })
                .collect();
            let gamma = cluster.gamma.restrict(|x| x == v);
            cluster.gamma = cluster.gamma.restrict(|x| x != v);
            let id = self.next_cluster;
            self.next_cluster += 1;
            self.vertex_cluster[v.index()] = id;
            self.clusters.insert(
                id,
                ClusterState {
                    members: single,
                    gamma,
                    levels,
                    edge_count: 0,
                },
            );
            self.pending.insert(id);
            self.pending.insert(cid);
        }
        count
    }

    /// Deterministic digest over the public state.
    pub fn digest(&self) -> String {
        let mut h = Fnv64::new();
        h.write_u64(self.stage);
        for e in self.graph.live_edge_ids() {
            let (t, hd) = self.graph.endpoints(e).expect("live");
            h.write_u32(e.0);
            h.write_u32(t.0);
            h.write_u32(hd.0);
        }
        for rec in &self.records {
            h.write_u32(rec.edge.0);
            h.write_u32(rec.tail.0);
            h.write_u32(rec.head.0);
            h.write_u64(rec.stage);
            h.write_u8(match rec.origin {
                RecordOrigin::CutBatch(_) => 0,
                RecordOrigin::InterCluster => 1,
                RecordOrigin::Closure => 2,
            });
        }
        for (cid, cluster) in &self.clusters {
            h.write_u32(*cid);
            for &v in &cluster.members {
                h.write_u32(v.0);
            }
            for (v, x) in cluster.gamma.iter() {
                h.write_u32(v.0);
                h.write_u64(x);
            }
            for bundle in &cluster.levels {
                h.write_u64(bundle.w.edge_group_count());
                h.write_u64(bundle.w.total_multiplicity());
                h.write_u64(bundle.r.l1_norm());
                for (v, x) in bundle.r.iter() {
                    h.write_u32(v.0);
                    h.write_u64(x);
                }
            }
        }
        format!("{:016x}", h.finish())
    }
}

struct CutCertificate {
    /// vol + r of the certified sparse side at production time
    mass: u64,
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::ratio::ratio;
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

    fn barbell(k: usize) -> (DynGraph, EdgeId, EdgeId) {
        let mut g = directed_clique(k);
        for _ in 0..k {
            g.add_vertex();
        }
        for i in k..2 * k {
            for j in k..2 * k {
                if i != j {
                    g.add_edge(VertexId(i as u32), VertexId(j as u32)).unwrap();
                }
            }
        }
        let b1 = g.add_edge(VertexId(0), VertexId(k as u32)).unwrap();
        let b2 = g.add_edge(VertexId(k as u32), VertexId(0)).unwrap();
        (g, b1, b2)
    }

    /// Every cluster bundle passes the Corollary-bound witness check
    /// (tests run with L_max = 1).
    fn assert_all_witnesses(state: &DecompositionState) {
        assert_eq!(state.schedule().l_max, 1);
        for cid in state.cluster_ids().collect::<Vec<_>>() {
            let cluster = state.cluster_state(cid).unwrap();
            for l in 0..=1u32 {
                let bundle = &cluster.levels[l as usize];
                // edgeless clusters have a vacuous threshold; they must
                // simply carry no slack at all
                let bound = if cluster.edge_count == 0 || l == 0 {
                    state.schedule().psi(0) / from_u64(8)
                } else {
                    state.schedule().psi(1) * from_u64(cluster.edge_count) / from_u64(8)
                };
                let report = check_witness(
                    bundle,
                    state.graph().view(),
                    &cluster.members,
                    &cluster.gamma,
                    &RBound::LessThan(bound),
                    CheckDirection::Both,
                    16,
                );
                assert!(
                    report.all_pass(false),
                    "cluster {cid} level {l}: {}",
                    report.summary()
                );
            }
        }
    }

    #[test]
    fn schedule_values() {
        let s = LevelSchedule::new(1, &ratio(1, 8));
        assert_eq!(s.psi(1), &ratio(1, 16));
        assert_eq!(s.psi(0), &ratio(1, 65536 * 144));
        let s2 = LevelSchedule::new(2, &ratio(1, 8));
        assert_eq!(s2.psi(2), &ratio(1, 16));
        assert_eq!(s2.psi(1), s.psi(0));
    }

    #[test]
    fn threshold_exactness() {
        // L_max = 2, l = 1, m = 100, ψ = 1/2: (8·2·r)² ≥ 1·100
        let sched = LevelSchedule {
            l_max: 2,
            psi: vec![ratio(1, 2), ratio(1, 2), ratio(1, 2)],
        };
        assert!(threshold_check(1, 100, 1, &sched));
        assert!(!threshold_check(0, 100, 1, &sched));
        // l = 0: exponent zero, any positive mass against ψ/8
        assert!(threshold_check(1, 100, 0, &sched));
        // l = L_max compares against ψ·m directly: threshold is 100/16
        assert!(!threshold_check(6, 100, 2, &sched));
        assert!(threshold_check(7, 100, 2, &sched));
        // empty cluster with no slack never trips
        assert!(!threshold_check(0, 0, 1, &sched));
    }

    #[test]
    fn r_prime_budget_values() {
        // l = 0: ψ/32
        assert_eq!(r_prime_budget(&ratio(1, 2), 100, 0, 2), ratio(1, 64));
        // l = L: ψ·m/32
        assert_eq!(r_prime_budget(&ratio(1, 2), 100, 2, 2), ratio(100, 64));
        // l = 1, L = 2, m = 49: √49 = 7 exact
        assert_eq!(r_prime_budget(&ratio(1, 2), 49, 1, 2), ratio(7, 64));
        // l = 1, L = 2, m = 50: ⌊√50/64⌋ = 0 (floored)
        assert_eq!(r_prime_budget(&ratio(1, 2), 50, 1, 2), ratio(0, 1));
    }

    #[test]
    fn initialize_single_vertex() {
        let g = DynGraph::with_vertices(1);
        let state = DecompositionState::initialize(g, DecompConfig::default()).unwrap();
        assert_eq!(state.query_partition().len(), 1);
        assert!(state.records().is_empty());
        assert_eq!(state.cluster_state(0).unwrap().levels[0].r.l1_norm(), 0);
    }

    #[test]
    fn initialize_k6_single_cluster() {
        let g = directed_clique(6);
        let state = DecompositionState::initialize(g, DecompConfig::default()).unwrap();
        assert_eq!(state.query_partition().len(), 1);
        assert!(state.records().is_empty());
        assert_all_witnesses(&state);
    }

    #[test]
    fn initialize_barbell_splits() {
        let (g, _, _) = barbell(6);
        let cfg = DecompConfig {
            phi: ratio(1, 4),
            ..DecompConfig::default()
        };
        let state = DecompositionState::initialize(g, cfg).unwrap();
        let parts = state.query_partition();
        assert_eq!(parts.len(), 2);
        assert!(!state.records().is_empty());
        assert!(state.records().len() <= 2);
        assert!(oracle::condensation_is_dag(
            state.graph().view(),
            &parts,
            &BTreeSet::new()
        ));
        assert_all_witnesses(&state);
    }

    #[test]
    fn delete_recorded_edge_is_noop() {
        let (g, b1, _) = barbell(6);
        let cfg = DecompConfig {
            phi: ratio(1, 4),
            ..DecompConfig::default()
        };
        let mut state = DecompositionState::initialize(g, cfg).unwrap();
        assert!(state.engine_retired(b1));
        let report = state.update(Some(UpdateEvent::DeleteEdge(b1))).unwrap();
        assert_eq!(report.cuts_executed, 0);
        assert_eq!(report.recomputes.iter().sum::<u64>(), 0);
        assert_eq!(state.query_partition().len(), 2);
    }

    #[test]
    fn loop_insertion_adds_slack_everywhere() {
        let g = directed_clique(6);
        let mut state = DecompositionState::initialize(g, DecompConfig::default()).unwrap();
        let report = state
            .update(Some(UpdateEvent::InsertSelfLoop(VertexId(0))))
            .unwrap();
        assert_eq!(report.loops_inserted, 1);
        assert_all_witnesses(&state);
        assert_eq!(state.query_partition().len(), 1);
    }

    #[test]
    fn deletion_cascade_then_recertify() {
        let g = directed_clique(8);
        let mut state = DecompositionState::initialize(g, DecompConfig::default()).unwrap();
        let victim = state
            .graph()
            .live_edge_ids()
            .find(|&e| state.graph().endpoints(e).unwrap() == (VertexId(0), VertexId(1)))
            .unwrap();
        let report = state.update(Some(UpdateEvent::DeleteEdge(victim))).unwrap();
        assert!(report.recomputes.iter().sum::<u64>() > 0);
        assert_all_witnesses(&state);
    }

    #[test]
    fn isolated_vertex_becomes_singleton_cluster() {
        let mut g = directed_clique(5);
        let spare = g.add_vertex();
        let e1 = g.add_edge(VertexId(0), spare).unwrap();
        let e2 = g.add_edge(spare, VertexId(0)).unwrap();
        let cfg = DecompConfig {
            phi: ratio(1, 4),
            ..DecompConfig::default()
        };
        let mut state = DecompositionState::initialize(g, cfg).unwrap();
        for e in [e1, e2] {
            state.update(Some(UpdateEvent::DeleteEdge(e))).unwrap();
        }
        let cid = state.query_cluster(spare).unwrap();
        assert_eq!(state.cluster_state(cid).unwrap().members.len(), 1);
        // clusters equal Tarjan SCCs
        let sccs = oracle::tarjan_scc(state.graph().view(), None);
        let mut parts = state.query_partition();
        parts.sort_by_key(|s| *s.iter().next().unwrap());
        let scc_sets: Vec<BTreeSet<VertexId>> =
            sccs.into_iter().map(|c| c.into_iter().collect()).collect();
        assert_eq!(parts, scc_sets);
    }

    #[test]
    fn refinement_and_record_monotonicity() {
        let (g, _, _) = barbell(5);
        let cfg = DecompConfig {
            phi: ratio(1, 4),
            seed: 3,
            ..DecompConfig::default()
        };
        let mut state = DecompositionState::initialize(g, cfg).unwrap();
        let mut prev_parts = state.query_partition();
        let mut prev_records = state.records().len();
        let victims: Vec<EdgeId> = state.graph().live_edge_ids().take(30).collect();
        for e in victims {
            if !state.graph().is_alive(e) && !state.engine_retired(e) {
                continue;
            }
            state.update(Some(UpdateEvent::DeleteEdge(e))).unwrap();
            let parts = state.query_partition();
            for part in &parts {
                assert!(
                    prev_parts.iter().any(|old| part.is_subset(old)),
                    "partition must refine"
                );
            }
            assert!(state.records().len() >= prev_records);
            prev_parts = parts;
            prev_records = state.records().len();
        }
    }

    #[test]
    fn split_update_keeps_invariants() {
        let g = directed_clique(6);
        let mut state = DecompositionState::initialize(g, DecompConfig::default()).unwrap();
        let moved: BTreeSet<EdgeId> = state
            .graph()
            .live_edge_ids()
            .filter(|&e| state.graph().endpoints(e).unwrap().0 == VertexId(0))
            .take(2)
            .collect();
        state
            .update(Some(UpdateEvent::SplitVertex {
                v: VertexId(0),
                moved,
            }))
            .unwrap();
        assert_all_witnesses(&state);
        let parts = state.query_partition();
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, state.graph().vertex_count());
    }

    #[test]
    fn determinism_same_seed() {
        let build = || {
            let (g, _, _) = barbell(5);
            let cfg = DecompConfig {
                phi: ratio(1, 4),
                seed: 42,
                ..DecompConfig::default()
            };
            let mut state = DecompositionState::initialize(g, cfg).unwrap();
            let victims: Vec<EdgeId> = state.graph().live_edge_ids().take(20).collect();
            for e in victims {
                if state.graph().is_alive(e) || state.engine_retired(e) {
                    state.update(Some(UpdateEvent::DeleteEdge(e))).unwrap();
                }
            }
            state.digest()
        };
        assert_eq!(build(), build());
    }
}
