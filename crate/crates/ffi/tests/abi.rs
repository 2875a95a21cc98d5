use std::ffi::{CStr, CString};
use std::ptr;

use credyn::boost::{train, HyperParams};
use credyn::eval;
use credyn::features::{Column, FeatureGroup, FeatureMatrix};
use credyn::shap::tree_shap;
use credyn_ffi::*;

fn toy_model() -> credyn::boost::BoostedModel {
    let n = 400;
    let a: Vec<f64> = (0..n).map(|i| (i % 20) as f64).collect();
    let b: Vec<f64> = (0..n).map(|i| if i % 7 == 0 { f64::NAN } else { (i % 13) as f64 }).collect();
    let y: Vec<bool> = (0..n).map(|i| (i % 20) + (i % 13) > 18).collect();
    let m = FeatureMatrix::new(
        (0..n as u64).collect(),
        vec![
            Column {
                name: "fin_a".into(),
                group: FeatureGroup::Fin,
                values: a,
            },
            Column {
                name: "soc_b".into(),
                group: FeatureGroup::SocInt,
                values: b,
            },
        ],
    )
    .unwrap();
    let p = HyperParams {
        n_trees: 20,
        learning_rate: 0.1,
        min_data_in_leaf: 10,
        max_depth: 3,
        l2_leaf_reg: 1.0,
    };
    train(&m, &y, &p).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(credyn_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn model_handle_matches_the_library() {
    let model = toy_model();
    let json = CString::new(model.to_json().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { credyn_model_from_json(json.as_ptr(), &mut h) }, CredynStatus::Ok);
    assert!(!h.is_null());

    let mut n = 0usize;
    assert_eq!(unsafe { credyn_model_num_features(h, &mut n) }, CredynStatus::Ok);
    assert_eq!(n, 2);
    let mut name = ptr::null();
    assert_eq!(unsafe { credyn_model_feature_name(h, 1, &mut name) }, CredynStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(name) }.to_str().unwrap(), "soc_b");
    assert_eq!(
        unsafe { credyn_model_feature_name(h, 2, &mut name) },
        CredynStatus::InvalidArgument
    );
    assert!(last_error().contains("out of range"));

    let rows = [3.0, 4.0, 17.0, f64::NAN, f64::NAN, 12.0];
    let mut proba = [0.0; 3];
    let mut margin = [0.0; 3];
    assert_eq!(
        unsafe { credyn_model_predict_proba(h, rows.as_ptr(), 3, 2, proba.as_mut_ptr()) },
        CredynStatus::Ok
    );
    assert_eq!(
        unsafe { credyn_model_predict_margin(h, rows.as_ptr(), 3, 2, margin.as_mut_ptr()) },
        CredynStatus::Ok
    );
    for i in 0..3 {
        let row = &rows[2 * i..2 * i + 2];
        assert_eq!(proba[i], model.predict_proba(row).unwrap());
        assert_eq!(margin[i], model.predict_margin(row).unwrap());
    }

    let mut phi = [0.0; 2];
    let mut base = 0.0;
    assert_eq!(
        unsafe { credyn_model_shap(h, rows.as_ptr(), 2, phi.as_mut_ptr(), &mut base) },
        CredynStatus::Ok
    );
    let expect = tree_shap(&model, &rows[..2]).unwrap();
    assert_eq!(phi.to_vec(), expect.values);
    assert_eq!(base, expect.base_value);
    assert!((base + phi[0] + phi[1] - margin[0]).abs() < 1e-9);

    assert_eq!(
        unsafe { credyn_model_predict_proba(h, rows.as_ptr(), 2, 3, proba.as_mut_ptr()) },
        CredynStatus::Schema
    );
    unsafe { credyn_model_free(h) };
}

#[test]
fn load_reports_missing_files_and_bad_json() {
    let mut h = ptr::null_mut();
    let path = CString::new("/nonexistent/model.json").unwrap();
    assert_eq!(unsafe { credyn_model_load(path.as_ptr(), &mut h) }, CredynStatus::Io);
    assert!(h.is_null());
    assert!(last_error().contains("/nonexistent/model.json"));
    let bad = CString::new("{\"format\":\"other\"}").unwrap();
    assert_eq!(unsafe { credyn_model_from_json(bad.as_ptr(), &mut h) }, CredynStatus::Parse);
    assert_eq!(unsafe { credyn_model_load(ptr::null(), &mut h) }, CredynStatus::NullArgument);
    unsafe { credyn_model_free(ptr::null_mut()) };
}

#[test]
fn saved_model_loads_from_disk() {
    let model = toy_model();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    model.save(&p).unwrap();
    let c = CString::new(p.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { credyn_model_load(c.as_ptr(), &mut h) }, CredynStatus::Ok);
    let mut out = [0.0];
    assert_eq!(
        unsafe { credyn_model_predict_proba(h, [1.0, 2.0].as_ptr(), 1, 2, out.as_mut_ptr()) },
        CredynStatus::Ok
    );
    assert_eq!(out[0], model.predict_proba(&[1.0, 2.0]).unwrap());
    unsafe { credyn_model_free(h) };
}

#[test]
fn metrics_and_ttest() {
    let s = [0.1, 0.4, 0.35, 0.8, 0.7, 0.2];
    let l = [0u8, 0, 1, 1, 1, 0];
    let lb: Vec<bool> = l.iter().map(|&x| x == 1).collect();
    let (mut a, mut k) = (0.0, 0.0);
    assert_eq!(unsafe { credyn_auc(s.as_ptr(), l.as_ptr(), 6, &mut a) }, CredynStatus::Ok);
    assert_eq!(unsafe { credyn_ks(s.as_ptr(), l.as_ptr(), 6, &mut k) }, CredynStatus::Ok);
    assert_eq!(a, eval::auc(&s, &lb).unwrap());
    assert_eq!(k, eval::ks(&s, &lb).unwrap());
    let one = [1u8; 6];
    assert_eq!(
        unsafe { credyn_auc(s.as_ptr(), one.as_ptr(), 6, &mut a) },
        CredynStatus::UndefinedMetric
    );

    let x = [0.30, 0.32, 0.31, 0.29];
    let y = [0.35, 0.36, 0.37, 0.33];
    let mut c = CredynComparison::default();
    assert_eq!(unsafe { credyn_paired_ttest(x.as_ptr(), y.as_ptr(), 4, &mut c) }, CredynStatus::Ok);
    let r = eval::paired_ttest(&x, &y).unwrap();
    assert_eq!(c.p_value, r.p_value);
    assert_eq!(c.significant, u8::from(r.significant));
    assert_eq!(c.relative_increment, r.relative_increment.unwrap());
}

#[test]
fn generate_writes_the_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { credyn_generate(c.as_ptr(), 7, 0.02) }, CredynStatus::Ok);
    for f in ["panel.csv", "cohort.csv", "eownet.csv", "familynet.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(unsafe { credyn_generate(c.as_ptr(), 7, 0.0) }, CredynStatus::Config);
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(credyn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/credyn.h")).unwrap();
    for f in [
        "credyn_model_load",
        "credyn_model_free",
        "credyn_model_shap",
        "credyn_paired_ttest",
        "credyn_last_error",
        "CREDYN_STATUS_OK",
        "typedef struct CredynModel CredynModel",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}
