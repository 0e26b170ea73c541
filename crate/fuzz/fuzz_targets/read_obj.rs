#![no_main]

use libfuzzer_sys::fuzz_target;
use mcf_core::mesh::io::{read_obj, write_obj};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mesh) = read_obj(text) {
            let mut out = Vec::new();
            write_obj(&mut out, &mesh, &mesh.nodal_vector()).expect("in-memory write");
            let again = read_obj(std::str::from_utf8(&out).unwrap()).expect("written mesh parses");
            assert_eq!(again.num_nodes(), mesh.num_nodes());
            assert_eq!(again.num_elements(), mesh.num_elements());
        }
    }
});
