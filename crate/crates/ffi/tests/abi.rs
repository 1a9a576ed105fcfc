use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use sdcnet_ffi::*;

fn last_error() -> String {
    let p = sdc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn small_table() -> *mut SdcTable {
    let mut t = ptr::null_mut();
    let st = unsafe { sdc_table_synthetic(3, 2, 6, 4, 2, 1.0, 0.3, 5, &mut t) };
    assert_eq!(st, SdcStatus::Ok);
    t
}

fn quick_config() -> *mut SdcConfig {
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(sdc_config_default(&mut c), SdcStatus::Ok);
        for (k, v) in [("epochs", "3"), ("batch_size", "8"), ("seed", "11")] {
            let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
            assert_eq!(sdc_config_set(c, k.as_ptr(), v.as_ptr()), SdcStatus::Ok);
        }
    }
    c
}

#[test]
fn table_accessors_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = cpath(&dir.path().join("t.csv"));
    unsafe {
        let t = small_table();
        assert_eq!(sdc_table_len(t), 36);
        assert_eq!(sdc_table_dim(t), 4);
        assert_eq!(sdc_table_num_classes(t), 2);
        let mut feats = vec![0.0; 36 * 4];
        assert_eq!(
            sdc_table_features(t, feats.as_mut_ptr(), feats.len()),
            SdcStatus::Ok
        );
        let mut labels = vec![0i64; 36];
        assert_eq!(sdc_table_labels(t, labels.as_mut_ptr(), 36), SdcStatus::Ok);
        assert!(labels.iter().all(|&l| l == 0 || l == 1));

        assert_eq!(sdc_table_save(t, path.as_ptr()), SdcStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sdc_table_load(path.as_ptr(), &mut back), SdcStatus::Ok);
        let mut feats2 = vec![0.0; 36 * 4];
        assert_eq!(
            sdc_table_features(back, feats2.as_mut_ptr(), feats2.len()),
            SdcStatus::Ok
        );
        assert_eq!(feats, feats2);

        let mut short = vec![0.0; 3];
        assert_eq!(
            sdc_table_features(t, short.as_mut_ptr(), 3),
            SdcStatus::Invalid
        );
        assert!(last_error().contains("needed"));

        sdc_table_free(t);
        sdc_table_free(back);
        sdc_table_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut t = ptr::null_mut();
        let missing = CString::new("/nonexistent/dir/table.csv").unwrap();
        assert_eq!(sdc_table_load(missing.as_ptr(), &mut t), SdcStatus::Io);
        assert!(t.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(sdc_table_load(ptr::null(), &mut t), SdcStatus::NullPointer);
        assert!(last_error().contains("path"));

        assert_eq!(
            sdc_table_synthetic(0, 2, 2, 4, 2, 1.0, 0.1, 0, &mut t),
            SdcStatus::Invalid
        );

        let mut h = 0.0;
        assert_eq!(sdc_differential_entropy(-1.0, &mut h), SdcStatus::Invalid);
        assert_eq!(sdc_differential_entropy(1.0, &mut h), SdcStatus::Ok);
        assert!(sdc_last_error().is_null());
        let expected = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h - expected).abs() < 1e-12);

        let c = quick_config();
        let (k, bad) = (
            CString::new("batch_size").unwrap(),
            CString::new("1").unwrap(),
        );
        assert_eq!(
            sdc_config_set(c, k.as_ptr(), bad.as_ptr()),
            SdcStatus::Invalid
        );
        let unknown = CString::new("no_such_key").unwrap();
        assert_eq!(
            sdc_config_set(c, unknown.as_ptr(), bad.as_ptr()),
            SdcStatus::Invalid
        );
        let mut text = ptr::null_mut();
        assert_eq!(sdc_config_to_text(c, &mut text), SdcStatus::Ok);
        let s = CStr::from_ptr(text).to_str().unwrap().to_owned();
        assert!(s.contains("batch_size = 8"), "{s}");
        sdc_string_free(text);
        sdc_config_free(c);
    }
}

#[test]
fn fit_predict_embed_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    let path = cpath(&dir.path().join("m.ckpt"));
    unsafe {
        let t = small_table();
        let c = quick_config();
        let mut m = ptr::null_mut();
        let mut acc = -1.0;
        assert_eq!(sdc_fit_fold(t, c, 1, &mut m, &mut acc), SdcStatus::Ok);
        assert!((0.0..=1.0).contains(&acc));

        let mut bad = ptr::null_mut();
        assert_eq!(
            sdc_fit_fold(t, c, 99, &mut bad, ptr::null_mut()),
            SdcStatus::Invalid
        );
        assert!(last_error().contains("99"));

        let (mut d, mut e, mut k) = (0, 0, 0);
        assert_eq!(sdc_model_dims(m, &mut d, &mut e, &mut k), SdcStatus::Ok);
        assert_eq!((d, e, k), (4, 64, 2));

        let mut feats = vec![0.0; 36 * 4];
        sdc_table_features(t, feats.as_mut_ptr(), feats.len());
        let mut probs = vec![0.0; 36 * 2];
        assert_eq!(
            sdc_model_predict(m, feats.as_ptr(), 36, 4, probs.as_mut_ptr(), probs.len()),
            SdcStatus::Ok
        );
        for row in probs.chunks(2) {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
        }
        let mut emb = vec![0.0; 36 * 64];
        assert_eq!(
            sdc_model_embed(m, feats.as_ptr(), 36, 4, emb.as_mut_ptr(), emb.len()),
            SdcStatus::Ok
        );
        assert!(emb.iter().all(|v| *v >= 0.0));
        assert_eq!(
            sdc_model_predict(m, feats.as_ptr(), 36, 3, probs.as_mut_ptr(), probs.len()),
            SdcStatus::Invalid
        );

        assert_eq!(sdc_model_save(m, path.as_ptr()), SdcStatus::Ok);
        let mut m2 = ptr::null_mut();
        assert_eq!(sdc_model_load(path.as_ptr(), &mut m2), SdcStatus::Ok);
        let mut probs2 = vec![0.0; 36 * 2];
        sdc_model_predict(m2, feats.as_ptr(), 36, 4, probs2.as_mut_ptr(), probs2.len());
        assert_eq!(probs, probs2);

        sdc_model_free(m);
        sdc_model_free(m2);
        sdc_config_free(c);
        sdc_table_free(t);
    }
}

#[test]
fn loso_report_is_json() {
    unsafe {
        let t = small_table();
        let c = quick_config();
        let mut json = ptr::null_mut();
        assert_eq!(sdc_loso_json(t, c, 1, &mut json), SdcStatus::Ok);
        let s = CStr::from_ptr(json).to_str().unwrap();
        assert!(s.contains("\"mean_accuracy\""));
        assert_eq!(s.matches("\"target_subject\"").count(), 3);
        sdc_string_free(json);
        sdc_config_free(c);
        sdc_table_free(t);
    }
}

#[test]
fn mmd_primitive() {
    let x = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let y = [3.0, 3.0, 4.0, 3.0];
    let mut same = f64::NAN;
    let mut diff = f64::NAN;
    unsafe {
        assert_eq!(
            sdc_mmd2(x.as_ptr(), 3, x.as_ptr(), 3, 2, 1.0, 5, &mut same),
            SdcStatus::Ok
        );
        assert_eq!(
            sdc_mmd2(x.as_ptr(), 3, y.as_ptr(), 2, 2, 0.0, 5, &mut diff),
            SdcStatus::Ok
        );
        assert_eq!(
            sdc_mmd2(x.as_ptr(), 3, ptr::null(), 2, 2, 1.0, 5, &mut diff),
            SdcStatus::NullPointer
        );
    }
    assert!(same.abs() < 1e-12);
    assert!(diff > 0.1);
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(sdc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sdcnet.h"))
            .unwrap();
    let src =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() > 20);
    for name in exported {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    assert!(header.contains("typedef struct SdcTable SdcTable;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"sdcnet.h\"\nint main(void) { SdcTable *t = 0; \
         return sdc_table_synthetic(2, 1, 1, 2, 2, 0.0, 0.1, 0, &t) == SDC_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
