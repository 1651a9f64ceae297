use std::path::PathBuf;

use scatterlab::geometry::config::{load_table, TableConfig};
use scatterlab::geometry::presets;
use scatterlab::{Error, Table};

fn schema_doc() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/table-schema.md");
    std::fs::read_to_string(path).expect("schema doc present")
}

fn documented_presets(doc: &str) -> Vec<String> {
    let section = doc.split("## Presets").nth(1).expect("presets section");
    section.split('`').skip(1).step_by(2).map(str::to_owned).collect()
}

fn toml_blocks(doc: &str) -> Vec<String> {
    doc.split("```toml").skip(1).map(|b| b.split("```").next().unwrap().to_owned()).collect()
}

#[test]
fn every_documented_preset_loads() {
    let names = documented_presets(&schema_doc());
    assert!(!names.is_empty());
    for n in &names {
        let t = presets::by_name(n).unwrap_or_else(|e| panic!("{n}: {e}"));
        assert_eq!(t.name(), n);
    }
    let mut doc = names.clone();
    let mut code: Vec<String> = presets::NAMES.iter().map(|s| s.to_string()).collect();
    doc.sort();
    code.sort();
    assert_eq!(doc, code);
}

#[test]
fn documented_example_builds() {
    let blocks = toml_blocks(&schema_doc());
    let t = TableConfig::from_toml(&blocks[0]).unwrap().build().unwrap();
    assert_eq!(t.name(), "sinai");
    assert_eq!(t.tolerances().l_max, 50.0);
    // the Fourier fragment completes into a table
    let fourier = format!("[space]\nkind = \"euclidean\"\ndim = 2\n{}", blocks[1]);
    let f = TableConfig::from_toml(&fourier).unwrap().build().unwrap();
    assert_eq!(f.pieces().len(), 1);
}

#[test]
fn preset_files_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.toml");
    std::fs::write(&p, "preset = \"disk\"\nname = \"my-disk\"\n[tolerances]\ngrazing_tol = 1e-6\n").unwrap();
    let t: Table = load_table(&p).unwrap();
    assert_eq!(t.name(), "my-disk");
    assert_eq!(t.tolerances().grazing_tol, 1e-6);
    assert_eq!(t.tolerances().hit_tol, 1e-10);
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        // unknown key
        "[space]\nkind = \"euclidean\"\ndim = 2\ncolour = 1\n",
        // both preset and space
        "preset = \"disk\"\n[space]\nkind = \"euclidean\"\ndim = 2\n",
        // no pieces
        "[space]\nkind = \"euclidean\"\ndim = 2\n",
        // wrong coordinate count
        "[space]\nkind = \"euclidean\"\ndim = 2\n[[pieces]]\nshape = \"ball\"\ncenter = [0.0, 0.0, 0.0]\nradius = 1.0\nside = \"outer\"\n",
        // overlapping obstacles
        "[space]\nkind = \"flat-torus\"\ndim = 2\nperiods = [1.0, 1.0]\n\
         [[pieces]]\nshape = \"ball\"\ncenter = [0.3, 0.5]\nradius = 0.2\nside = \"obstacle\"\n\
         [[pieces]]\nshape = \"ball\"\ncenter = [0.5, 0.5]\nradius = 0.2\nside = \"obstacle\"\n",
        // outer wall on a torus
        "[space]\nkind = \"flat-torus\"\ndim = 2\nperiods = [1.0, 1.0]\n\
         [[pieces]]\nshape = \"ball\"\ncenter = [0.5, 0.5]\nradius = 0.2\nside = \"outer\"\n",
        // hyperbolic center outside the chart
        "[space]\nkind = \"hyperbolic-ball\"\ndim = 2\n[[pieces]]\nshape = \"ball\"\ncenter = [1.5, 0.0]\nradius = 0.5\nside = \"outer\"\n",
        // dimension out of range
        "[space]\nkind = \"euclidean\"\ndim = 4\n[[pieces]]\nshape = \"ball\"\ncenter = [0.0, 0.0, 0.0, 0.0]\nradius = 1.0\nside = \"outer\"\n",
    ];
    for text in cases {
        let err = TableConfig::from_toml(text).and_then(|c| c.build()).expect_err(text);
        assert!(matches!(err, Error::Config(_) | Error::InvalidTable(_)), "{text}: {err:?}");
        assert!(err.is_validation());
    }
}
