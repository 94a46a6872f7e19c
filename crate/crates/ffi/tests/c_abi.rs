use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use snnlab_ffi::*;

fn last_error() -> String {
    let mut len = 0usize;
    unsafe {
        snnlab_last_error(ptr::null_mut(), 0, &mut len);
        let mut buf = vec![0 as c_char; len];
        assert_eq!(snnlab_last_error(buf.as_mut_ptr(), len, ptr::null_mut()), SnnlabStatus::Ok);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn create(arch: &str, tau: f64) -> (SnnlabStatus, *mut SnnlabNetwork) {
    let arch = CString::new(arch).unwrap();
    let mut net = ptr::null_mut();
    let status = unsafe { snnlab_network_create(arch.as_ptr(), tau, 1.0, 0.0, 0.0, 7, 1.0, &mut net) };
    (status, net)
}

#[test]
fn network_lifecycle() {
    let (status, net) = create("4x4-6FC-3o", 30.0);
    assert_eq!(status, SnnlabStatus::Ok);
    unsafe {
        assert_eq!(snnlab_network_input_size(net), 16);
        assert_eq!(snnlab_network_output_size(net), 3);
        let pixels: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        assert_eq!(snnlab_network_predict(net, pixels.as_ptr(), 16, 20, 3, a.as_mut_ptr(), 3), SnnlabStatus::Ok);
        assert_eq!(snnlab_network_predict(net, pixels.as_ptr(), 16, 20, 3, b.as_mut_ptr(), 3), SnnlabStatus::Ok);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("n.ckpt").to_str().unwrap()).unwrap();
        assert_eq!(snnlab_network_save(net, path.as_ptr()), SnnlabStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(snnlab_network_load(path.as_ptr(), &mut loaded), SnnlabStatus::Ok);
        let mut c = [0.0; 3];
        assert_eq!(snnlab_network_predict(loaded, pixels.as_ptr(), 16, 20, 3, c.as_mut_ptr(), 3), SnnlabStatus::Ok);
        assert_eq!(a, c);
        snnlab_network_free(loaded);
        snnlab_network_free(net);
        snnlab_network_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_reported() {
    let (status, net) = create("4x4-3Q-2o", f64::INFINITY);
    assert_eq!(status, SnnlabStatus::InvalidArgument);
    assert!(net.is_null());
    assert!(last_error().contains("architecture"), "{}", last_error());

    let (status, net) = create("4x4-2o", f64::INFINITY);
    assert_eq!(status, SnnlabStatus::Ok);
    unsafe {
        let mut out = [0.0; 1];
        let pixels = [0.5; 16];
        assert_eq!(
            snnlab_network_predict(net, pixels.as_ptr(), 16, 5, 0, out.as_mut_ptr(), 1),
            SnnlabStatus::BufferTooSmall
        );
        assert_eq!(
            snnlab_network_predict(net, pixels.as_ptr(), 15, 5, 0, out.as_mut_ptr(), 1),
            SnnlabStatus::InvalidArgument
        );
        assert_eq!(
            snnlab_network_predict(net, ptr::null(), 16, 5, 0, out.as_mut_ptr(), 1),
            SnnlabStatus::NullPointer
        );
        snnlab_network_free(net);

        let missing = CString::new("/nonexistent/dir/x.ckpt").unwrap();
        let mut n = ptr::null_mut();
        assert_eq!(snnlab_network_load(missing.as_ptr(), &mut n), SnnlabStatus::Io);

        let mut len = 0usize;
        let mut tiny = [0 as c_char; 2];
        assert_eq!(snnlab_last_error(tiny.as_mut_ptr(), 2, &mut len), SnnlabStatus::BufferTooSmall);
        assert!(len > 2);
    }
}

#[test]
fn coherence_functions() {
    let p = SnnlabCoherenceParams {
        mu: 0.8,
        d: 0.1,
        d_st: 0.1,
        tau_r: 0.0,
        v_th: 1.0,
        u_rest: 0.0,
    };
    let core = snnlab::coherence::CoherenceParams::new(0.8, 0.1).unwrap();
    unsafe {
        let mut rate = 0.0;
        assert_eq!(snnlab_firing_rate(&p, &mut rate), SnnlabStatus::Ok);
        assert_eq!(rate, snnlab::coherence::firing_rate(&core).unwrap());

        let omegas = [0.5, 1.0, 3.0];
        let mut c = [0.0; 3];
        assert_eq!(snnlab_coherence(&p, omegas.as_ptr(), 3, c.as_mut_ptr()), SnnlabStatus::Ok);
        for (w, v) in omegas.iter().zip(c) {
            assert_eq!(v, snnlab::coherence::coherence_fn(*w, &core).unwrap());
        }

        let bad = SnnlabCoherenceParams { d: -1.0, ..p };
        assert_eq!(snnlab_firing_rate(&bad, &mut rate), SnnlabStatus::InvalidArgument);
        assert_eq!(snnlab_coherence(&p, [-1.0].as_ptr(), 1, c.as_mut_ptr()), SnnlabStatus::InvalidArgument);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(snnlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/snnlab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "snnlab_network_create",
        "snnlab_network_free",
        "snnlab_network_predict",
        "snnlab_coherence",
        "snnlab_last_error",
        "SNNLAB_STATUS_NULL_POINTER",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"snnlab.h\"\nint main(void) {\n  SnnlabNetwork *n = 0;\n  SnnlabStatus s = snnlab_network_create(\"4x4-2o\", 30.0, 1.0, 0.0, 0.0, 1, 1.0, &n);\n  snnlab_network_free(n);\n  return (int)s;\n}\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler on PATH; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
