use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use scatterlab_ffi::*;

fn preset(name: &str) -> *mut SlTable {
    let name = CString::new(name).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { sl_table_from_preset(name.as_ptr(), &mut t) }, SlStatus::Ok);
    assert!(!t.is_null());
    t
}

fn last_error() -> String {
    let p = sl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn disk_volumes_and_mean_free_path() {
    let t = preset("disk");
    unsafe {
        assert_eq!(sl_table_dim(t), 2);
        assert_eq!(sl_table_chart_len(t), 2);
        let mut v = SlVolumes::default();
        assert_eq!(sl_domain_volumes(t, &mut v), SlStatus::Ok);
        assert!((v.vol_m - PI).abs() < 1e-12);
        assert!((v.vol_dm - 2.0 * PI).abs() < 1e-12);
        // ∫ cos θ dθ over (−π/2, π/2) times the perimeter
        let mut ts = 0.0;
        assert_eq!(sl_trajectory_space_volume(t, &mut ts), SlStatus::Ok);
        assert!((ts - 4.0 * PI).abs() < 1e-9);
        let mut m = SlMeanFreePath::default();
        assert_eq!(sl_mean_free_path(t, 20_000, 5, &mut m), SlStatus::Ok);
        assert_eq!(m.count, 20_000);
        assert!((m.prediction - PI / 2.0).abs() < 1e-12);
        assert!((m.mean - PI / 2.0).abs() < 5.0 * m.stderr);
        sl_table_free(t);
    }
}

#[test]
fn sampled_points_bounce_around_the_disk() {
    let t = preset("disk");
    let mut pts = vec![SlPhasePoint::default(); 16];
    let mut mass = 0.0;
    unsafe {
        assert_eq!(sl_sample(t, 16, 3, pts.as_mut_ptr(), pts.len(), &mut mass), SlStatus::Ok);
        assert!((mass - 4.0 * PI).abs() < 1e-9);
        for z in &pts {
            let r = z.q[0].hypot(z.q[1]);
            assert!((r - 1.0).abs() < 1e-12);
            let mut chord = SlChord::default();
            assert_eq!(sl_causality_map(t, z, &mut chord), SlStatus::Ok);
            // chord length on the unit circle is twice the normal component
            let cos_in = -(z.q[0] * z.v[0] + z.q[1] * z.v[1]);
            assert!((chord.length - 2.0 * cos_in).abs() < 1e-10);
            let mut next = SlPhasePoint::default();
            assert_eq!(sl_billiard_map(t, z, &mut next, ptr::null_mut()), SlStatus::Ok);
            assert_eq!(next.q, chord.exit.q);
            let cos_next = -(next.q[0] * next.v[0] + next.q[1] * next.v[1]);
            assert!((cos_next - cos_in).abs() < 1e-10);
        }
        let mut again = vec![SlPhasePoint::default(); 16];
        sl_sample(t, 16, 3, again.as_mut_ptr(), again.len(), ptr::null_mut());
        assert_eq!(pts, again);
        sl_table_free(t);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let name = CString::new("no-such-table").unwrap();
        let mut t = ptr::null_mut();
        assert_eq!(sl_table_from_preset(name.as_ptr(), &mut t), SlStatus::Config);
        assert!(t.is_null());
        assert!(last_error().contains("no-such-table"));

        assert_eq!(sl_table_from_preset(ptr::null(), &mut t), SlStatus::NullPointer);
        let mut v = SlVolumes::default();
        assert_eq!(sl_domain_volumes(ptr::null(), &mut v), SlStatus::NullPointer);

        let t = preset("disk");
        assert!(sl_last_error().is_null());
        let mut pts = vec![SlPhasePoint::default(); 2];
        assert_eq!(sl_sample(t, 4, 1, pts.as_mut_ptr(), 2, ptr::null_mut()), SlStatus::BufferTooSmall);

        // outward start at the boundary
        let z = SlPhasePoint { q: [1.0, 0.0, 0.0, 0.0], v: [1.0, 0.0, 0.0, 0.0] };
        let mut c = SlChord::default();
        assert_eq!(sl_causality_map(t, &z, &mut c), SlStatus::DegenerateStart);
        let z = SlPhasePoint { q: [0.5, 0.0, 0.0, 0.0], v: [1.0, 0.0, 0.0, 0.0] };
        assert_eq!(sl_causality_map(t, &z, &mut c), SlStatus::NotOnBoundary);
        let z = SlPhasePoint { q: [f64::NAN; 4], v: [0.0; 4] };
        assert_eq!(sl_causality_map(t, &z, &mut c), SlStatus::InvalidArgument);
        sl_table_free(t);
    }
}

#[test]
fn table_from_toml_text() {
    let text = CString::new(
        "[space]\nkind = \"flat-torus\"\ndim = 2\nperiods = [1.0, 1.0]\n\
         [[pieces]]\nshape = \"ball\"\ncenter = [0.5, 0.5]\nradius = 0.25\nside = \"obstacle\"\n",
    )
    .unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(sl_table_from_toml(text.as_ptr(), &mut t), SlStatus::Ok);
        let mut v = SlVolumes::default();
        sl_domain_volumes(t, &mut v);
        assert!((v.vol_m - (1.0 - PI / 16.0)).abs() < 1e-12);
        assert!((v.vol_dm - PI / 2.0).abs() < 1e-12);
        sl_table_free(t);

        let bad = CString::new("[space]\nkind = \"klein-bottle\"\n").unwrap();
        assert_eq!(sl_table_from_toml(bad.as_ptr(), &mut t), SlStatus::Config);
        assert!(t.is_null());
    }
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = target.join("libscatterlab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[0], env!("CARGO_PKG_VERSION"));
    let nums: Vec<f64> = fields[1..4].iter().map(|s| s.parse().unwrap()).collect();
    assert!((nums[0] - PI).abs() < 1e-9);
    assert!((nums[1] - 2.0 * PI).abs() < 1e-9);
    assert!((nums[2] - 4.0 * PI).abs() < 1e-9);
    assert_eq!(fields[4], "1");
}
