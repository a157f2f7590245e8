use exdec_core::flow::*;
use exdec_core::graph::*;
use exdec_core::vecmap::VertexVector;
use std::collections::BTreeSet;

fn main() {
    // replicate one game pass on K10 manually
    let mut g = DynGraph::with_vertices(10);
    for i in 0..10u32 {
        for j in 0..10u32 {
            if i != j { g.add_edge(VertexId(i), VertexId(j)).unwrap(); }
        }
    }
    // A = {0..4}, B = {5..9}
    let mut a = VertexVector::new();
    let mut b = VertexVector::new();
    for v in 0..5u32 { a.set(VertexId(v), 18); }
    for v in 5..10u32 { b.set(VertexId(v), 18); }
    let p = FlowProblem { view: g.view(), capacity: 32, source: a, sink: b };
    let (f, _) = bounded_blocking_flow(&p, 100).unwrap();
    println!("excess: {}", f.excess().l1_norm());
    let d = path_decomposition(&p, &f).unwrap();
    println!("paths: {} units: {}", d.paths.len(), d.unit_count());
    let mut starts: BTreeSet<VertexId> = BTreeSet::new();
    let mut ends: BTreeSet<VertexId> = BTreeSet::new();
    for path in &d.paths {
        starts.insert(path.start);
        ends.insert(path.end);
        if path.start.0 < 3 { println!("{} -> {} x{} len {}", path.start, path.end, path.units, path.edges.len()); }
    }
    println!("distinct starts: {:?}", starts.len());
    println!("distinct ends: {:?}", ends);
    println!("selfabs: {:?}", d.self_absorbed.l1_norm());
}
