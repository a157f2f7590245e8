//! CutOrEmbed: on a cluster, return either a sparse cut of volume at least
//! `R` or a fresh witness bundle with a residual `r` vector.
//!
//! Small clusters are handled exhaustively: every cut is enumerated, so the
//! returned object is certified by construction. Larger clusters run a
//! seeded matching game: each round draws a random ordering, splits the
//! degree mass into two halves and routes a perfect matching between them in
//! both directions through a bounded blocking flow. Routed paths become
//! witness edges, unrouted residue lands in `r` (capped by the budget), and
//! a failed routing turns its stranded excess region into a candidate cut.
//! Either way, no outcome escapes without passing its validity re-check.

use std::collections::BTreeSet;

use num_traits::ToPrimitive;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::{bounded_blocking_flow, path_decomposition, residual_neighbors, FlowProblem};
use crate::graph::{GraphView, VertexId};
use crate::prune::member_edge_count;
use crate::ratio::{ceil_u64, floor_log2, from_u64, ratio_u, Ratio};
use crate::vecmap::VertexVector;
use crate::witness::{check_witness, CheckDirection, RBound, WitnessBundle};
use crate::{Error, Result};

/// Sparse cut produced by either mode; `min(out, in) < φ · volume` and
/// `volume ≥ R` have been re-checked before return.
#[derive(Debug, Clone)]
pub struct EmbedCut {
    pub side: BTreeSet<VertexId>,
    pub out_count: u64,
    pub in_count: u64,
    pub volume: u64,
}

#[derive(Debug)]
pub enum CutOrEmbedOutcome {
    Cut(EmbedCut),
    Witness(WitnessBundle),
}

#[derive(Debug, Clone)]
pub struct CutMatchConfig {
    pub psi_cmg: Ratio,
    /// vertex bound for the exhaustive mode and for property-3 validation
    pub enum_gate: usize,
    /// matching rounds; clamped so congestion stays within 1/(ψφ)
    pub rounds: Option<u32>,
    pub verify_fact: bool,
}

impl CutMatchConfig {
    pub fn new(psi_cmg: Ratio) -> Self {
        Self {
            psi_cmg,
            enum_gate: 16,
            rounds: None,
            verify_fact: false,
        }
    }
}

/// Dispatches on cluster size: exhaustive under the gate, game above it.
pub fn cut_or_embed(
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    phi: &Ratio,
    r_budget: &Ratio,
    cfg: &CutMatchConfig,
    seed: u64,
) -> Result<CutOrEmbedOutcome> {
    if members.len() <= cfg.enum_gate {
        cut_or_embed_exhaustive(host, members, phi, r_budget, &cfg.psi_cmg)
    } else {
        cut_or_embed_game(host, members, phi, r_budget, cfg, seed)
    }
}

/// Enumerates all cuts. Returns the ratio-minimizing φ-sparse cut of volume
/// at least `R` on its volume-smaller side, or certifies every cut and
/// returns the host itself as its own witness (identity embedding, `r = 0`,
/// `ψ = φ`).
pub fn cut_or_embed_exhaustive(
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    phi: &Ratio,
    r_budget: &Ratio,
    _psi_cmg: &Ratio,
) -> Result<CutOrEmbedOutcome> {
    let n = members.len();
    if n > 16 {
        return Err(Error::SizeGate(format!(
            "exhaustive cut-or-embed limited to 16 vertices, got {n}"
        )));
    }
    let verts: Vec<VertexId> = members.iter().copied().collect();
    let deg: Vec<u64> = verts.iter().map(|&v| host.degree(v)).collect();
    let total_vol: u64 = deg.iter().sum();

    let mut count = vec![vec![0u64; n]; n];
    for (i, &v) in verts.iter().enumerate() {
        for &e in host.out_edges(v) {
            let h = host.head(e);
            if h == v {
                continue;
            }
            if let Some(j) = verts.iter().position(|&x| x == h) {
                count[i][j] += 1;
            }
        }
    }

    let mut best: Option<(Ratio, EmbedCut)> = None;
    if n >= 2 {
        for mask in 1..(1u64 << n) - 1 {
            let mut vol = 0u64;
            for (i, d) in deg.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    vol += d;
                }
            }
            if 2 * vol > total_vol || vol == 0 {
                continue;
            }
            if from_u64(vol) < *r_budget {
                continue;
            }
            let (mut out, mut inc) = (0u64, 0u64);
            for i in 0..n {
                if mask >> i & 1 == 0 {
                    continue;
                }
                for j in 0..n {
                    if mask >> j & 1 == 0 {
                        out += count[i][j];
                        inc += count[j][i];
                    }
                }
            }
            let small = out.min(inc);
            if from_u64(small) >= phi * from_u64(vol) {
                continue;
            }
            let ratio = from_u64(small) / from_u64(vol);
            let side: BTreeSet<VertexId> = verts
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect();
            let better = match &best {
                None => true,
                Some((b, cut)) => {
                    ratio < *b
                        || (ratio == *b
                            && side.iter().collect::<Vec<_>>()
                                < cut.side.iter().collect::<Vec<_>>())
                }
            };
            if better {
                best = Some((
                    ratio,
                    EmbedCut {
                        side,
                        out_count: out,
                        in_count: inc,
                        volume: vol,
                    },
                ));
            }
        }
    }

    if let Some((_, cut)) = best {
        validate_cut(host, &cut, phi, r_budget)?;
        return Ok(CutOrEmbedOutcome::Cut(cut));
    }

    let bundle = WitnessBundle::identity(host, members, phi.clone(), phi.clone());
    let gamma = VertexVector::from_degrees(host.graph(), members.iter().copied());
    let report = check_witness(
        &bundle,
        host,
        members,
        &gamma,
        &RBound::AtMost(r_budget.clone()),
        CheckDirection::Both,
        16,
    );
    if !report.all_pass(false) {
        return Err(Error::Validation(format!(
            "exhaustive certification failed: {}",
            report.summary()
        )));
    }
    Ok(CutOrEmbedOutcome::Witness(bundle))
}

/// Matching rounds for the game, clamped so that `2·rounds` passes at edge
/// capacity `⌈2/φ⌉` keep the embedding congestion within `1/(ψ_CMG φ)`.
fn game_rounds(m: u64, psi_cmg: &Ratio, requested: Option<u32>) -> u32 {
    let lg = u64::from(floor_log2(m));
    let cap = (from_u64(1) / (from_u64(4) * psi_cmg))
        .floor()
        .to_integer()
        .to_u32()
        .unwrap_or(u32::MAX)
        .max(1);
    let default = u32::try_from((lg * lg).max(1)).unwrap_or(u32::MAX);
    requested.unwrap_or(default).clamp(1, cap)
}

pub fn cut_or_embed_game(
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    phi: &Ratio,
    r_budget: &Ratio,
    cfg: &CutMatchConfig,
    seed: u64,
) -> Result<CutOrEmbedOutcome> {
    let m = member_edge_count(host, members);
    if m == 0 {
        let bundle = WitnessBundle::empty(
            members.iter(),
            VertexVector::new(),
            cfg.psi_cmg.clone(),
            phi.clone(),
        );
        return Ok(CutOrEmbedOutcome::Witness(bundle));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = game_rounds(m, &cfg.psi_cmg, cfg.rounds);
    let capacity = ceil_u64(&(ratio_u(2, 1) / phi));
    let h = ceil_u64(&(ratio_u(8 * u64::from(floor_log2(m)), 1) / phi));

    let mut bundle = WitnessBundle::empty(
        members.iter(),
        VertexVector::new(),
        cfg.psi_cmg.clone(),
        phi.clone(),
    );

    for _ in 0..rounds {
        // random ordering, then split the degree mass into equal halves
        let mut order: Vec<(u64, VertexId)> =
            members.iter().map(|&v| (rng.next_u64(), v)).collect();
        order.sort_unstable();
        let total_vol: u64 = members.iter().map(|&v| host.degree(v)).sum();
        let mut a_mass = VertexVector::new();
        let mut b_mass = VertexVector::new();
        let mut left = total_vol / 2;
        for &(_, v) in &order {
            let d = host.degree(v);
            let take = d.min(left);
            left -= take;
            if take > 0 {
                a_mass.set(v, take);
            }
            if d - take > 0 {
                b_mass.set(v, d - take);
            }
        }

        for (src, dst) in [(&a_mass, &b_mass), (&b_mass, &a_mass)] {
            let problem = FlowProblem {
                view: host,
                capacity,
                source: src.clone(),
                sink: dst.clone(),
            };
            let (flow, _) = bounded_blocking_flow(&problem, h)?;
            if cfg.verify_fact {
                crate::flow::verify_blocking_fact(&problem, &flow, h)?;
            }
            let ex = flow.excess().clone();
            if !ex.is_zero() {
                // absorb a small residue into r; otherwise cut
                let fits = from_u64(bundle.r.l1_norm() + ex.l1_norm()) <= *r_budget;
                if !fits {
                    let cut = grow_game_cut(host, members, &problem, &flow, phi, h)?;
                    validate_cut(host, &cut, phi, r_budget)?;
                    return Ok(CutOrEmbedOutcome::Cut(cut));
                }
                bundle.r.add_assign(&ex);
            }
            let decomposition = path_decomposition(&problem, &flow)?;
            for p in &decomposition.paths {
                bundle.add_embedded_edge(p.start, p.end, p.units, p.edges.clone());
            }
            for (v, k) in decomposition.self_absorbed.iter() {
                bundle.add_embedded_edge(v, v, k, Vec::new());
            }
        }
    }

    let gamma = VertexVector::from_degrees(host.graph(), members.iter().copied());
    let report = check_witness(
        &bundle,
        host,
        members,
        &gamma,
        &RBound::AtMost(r_budget.clone()),
        CheckDirection::Both,
        cfg.enum_gate,
    );
    if !report.all_pass(true) {
        return Err(Error::Validation(format!(
            "game produced an uncertified witness: {}",
            report.summary()
        )));
    }
    Ok(CutOrEmbedOutcome::Witness(bundle))
}

fn grow_game_cut(
    host: GraphView<'_>,
    members: &BTreeSet<VertexId>,
    problem: &FlowProblem<'_>,
    flow: &crate::flow::Preflow,
    phi: &Ratio,
    h: u64,
) -> Result<EmbedCut> {
    let mut side: BTreeSet<VertexId> = flow.excess().support().collect();
    let mut iterations = 0u64;
    loop {
        if side.len() >= members.len() {
            return Err(Error::Validation(
                "game cut grew to the whole cluster".into(),
            ));
        }
        let (out, inc) = host.boundary_counts(&side);
        let vol = host.volume(side.iter().copied());
        if vol > 0 && from_u64(out.min(inc)) < phi * from_u64(vol) {
            return Ok(EmbedCut {
                side,
                out_count: out,
                in_count: inc,
                volume: vol,
            });
        }
        iterations += 1;
        if iterations > h {
            return Err(Error::Validation(
                "game cut growth exhausted its round budget".into(),
            ));
        }
        let next = residual_neighbors(problem, flow, &side);
        if next.is_empty() {
            return Err(Error::Validation("game cut growth stalled".into()));
        }
        side.extend(next);
    }
}

fn validate_cut(
    host: GraphView<'_>,
    cut: &EmbedCut,
    phi: &Ratio,
    r_budget: &Ratio,
) -> Result<()> {
    let (out, inc) = host.boundary_counts(&cut.side);
    let vol = host.volume(cut.side.iter().copied());
    if out != cut.out_count || inc != cut.in_count || vol != cut.volume {
        return Err(Error::Validation("cut bookkeeping diverged".into()));
    }
    if from_u64(vol) < *r_budget {
        return Err(Error::Validation(format!(
            "cut volume {vol} below the budget {r_budget}"
        )));
    }
    if from_u64(out.min(inc)) >= phi * from_u64(vol) {
        return Err(Error::Validation(format!(
            "cut is not φ-sparse: min(out, in) = {}, vol = {vol}",
            out.min(inc)
        )));
    }
    Ok(())
}
