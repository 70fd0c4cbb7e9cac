#![no_main]

use drls::topology::Topology;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(topo) = Topology::parse_edge_list(text) {
        let back = Topology::parse_edge_list(&topo.to_edge_list()).expect("re-parse of emitted edge list");
        assert_eq!(back.edges(), topo.edges());
    }
});
