use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use setexpand::bench::{SyntheticWorld, WorldConfig};
use setexpand::{Engine, ExpansionConfig, PromptConfig};
use setexpand_ffi::*;

const CONFIG: &str = "[expansion]\niterations = 2\npermutations = 2\nbeam = 8\ntarget_size = 10\nrerank_pool = 20\n";

struct Files {
    _dir: tempfile::TempDir,
    model: CString,
    vocab: CString,
    world: SyntheticWorld,
}

fn files() -> Files {
    let world = SyntheticWorld::build(&WorldConfig {
        classes: 3,
        members_per_class: 10,
        queries_per_class: 1,
        ..WorldConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("toy.json");
    world.lm.save(&model).unwrap();
    let vocab = dir.path().join("vocab.txt");
    std::fs::write(&vocab, world.members().join("\n")).unwrap();
    Files {
        model: cstr(model.to_str().unwrap()),
        vocab: cstr(vocab.to_str().unwrap()),
        _dir: dir,
        world,
    }
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = sx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn toy_engine(f: &Files) -> *mut SxEngine {
    let cfg = cstr(CONFIG);
    let mut engine = ptr::null_mut();
    let st = unsafe { sx_engine_new_toy(f.model.as_ptr(), f.vocab.as_ptr(), cfg.as_ptr(), &mut engine) };
    assert_eq!(st, SxStatus::Ok);
    engine
}

fn expand(engine: *const SxEngine, seeds: &[&str]) -> (SxStatus, Option<String>) {
    let owned: Vec<CString> = seeds.iter().map(|s| cstr(s)).collect();
    let ptrs: Vec<*const c_char> = owned.iter().map(|s| s.as_ptr()).collect();
    let id = cstr("q1");
    let mut out = ptr::null_mut();
    let st = unsafe { sx_engine_expand(engine, id.as_ptr(), ptrs.as_ptr(), ptrs.len(), &mut out) };
    if st != SxStatus::Ok {
        assert!(out.is_null());
        return (st, None);
    }
    let v = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { sx_string_free(out) };
    (st, Some(v))
}

#[test]
fn expansion_matches_the_library() {
    let f = files();
    let engine = toy_engine(&f);
    assert_eq!(unsafe { sx_engine_vocab_size(engine) }, 30);
    let q = &f.world.queries[0];
    let seeds: Vec<&str> = q.seeds.iter().map(String::as_str).collect();
    let (st, json) = expand(engine, &seeds);
    assert_eq!(st, SxStatus::Ok);
    assert!(sx_last_error().is_null());
    let json = json.unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["entities"].as_array().unwrap().len(), 13);

    let cfg: ExpansionConfig = setexpand::EngineConfig::from_toml_str(CONFIG).unwrap().expansion;
    let direct = Engine::from_surfaces(Box::new(f.world.lm.clone()), &f.world.members(), PromptConfig::default(), cfg)
        .unwrap()
        .expand("q1", &seeds)
        .unwrap();
    assert_eq!(json, direct.to_json(false).to_string());
    unsafe { sx_engine_free(engine) };
}

#[test]
fn engine_can_be_shared_across_threads() {
    struct Handle(*mut SxEngine);
    unsafe impl Send for Handle {}
    unsafe impl Sync for Handle {}
    let f = files();
    let h = Handle(toy_engine(&f));
    let seeds: Vec<&str> = f.world.queries[0].seeds.iter().map(String::as_str).collect();
    let results: Vec<_> = std::thread::scope(|s| {
        let hs = &h;
        let seeds = &seeds;
        (0..4).map(|_| s.spawn(move || expand(hs.0, seeds).1.unwrap())).collect::<Vec<_>>()
            .into_iter()
            .map(|t| t.join().unwrap())
            .collect()
    });
    assert!(results.windows(2).all(|w| w[0] == w[1]));
    unsafe { sx_engine_free(h.0) };
}

#[test]
fn unresolved_seeds_report_names() {
    let f = files();
    let engine = toy_engine(&f);
    let (st, _) = expand(engine, &["Nowhere", &f.world.members()[0]]);
    assert_eq!(st, SxStatus::UnresolvedSeeds);
    assert!(last_error().contains("Nowhere"));
    unsafe { sx_engine_free(engine) };
}

#[test]
fn argument_errors() {
    let f = files();
    let mut engine = ptr::null_mut();
    let st = unsafe { sx_engine_new_toy(ptr::null(), f.vocab.as_ptr(), ptr::null(), &mut engine) };
    assert_eq!(st, SxStatus::NullPointer);
    assert!(last_error().contains("model_path"));
    assert!(engine.is_null());

    let missing = cstr("/no/such/model.json");
    let st = unsafe { sx_engine_new_toy(missing.as_ptr(), f.vocab.as_ptr(), ptr::null(), &mut engine) };
    assert_eq!(st, SxStatus::Io);
    assert!(last_error().contains("/no/such/model.json"));

    let bad = cstr("[expansion]\nlambda = 3.0\n");
    let st = unsafe { sx_engine_new_toy(f.model.as_ptr(), f.vocab.as_ptr(), bad.as_ptr(), &mut engine) };
    assert_eq!(st, SxStatus::Config);

    let utf8 = [0xffu8 as c_char, 0];
    let st = unsafe { sx_engine_new_toy(utf8.as_ptr(), f.vocab.as_ptr(), ptr::null(), &mut engine) };
    assert_eq!(st, SxStatus::InvalidUtf8);

    let (st, _) = expand(ptr::null(), &["a"]);
    assert_eq!(st, SxStatus::NullPointer);
    assert_eq!(unsafe { sx_engine_vocab_size(ptr::null()) }, 0);
    unsafe {
        sx_engine_free(ptr::null_mut());
        sx_string_free(ptr::null_mut());
    }
}

#[test]
fn remote_backend_without_server_is_unavailable() {
    let f = files();
    let cfg = cstr("[backend]\nkind = \"remote\"\nserver_url = \"http://127.0.0.1:9\"\nretries = 0\ntimeout_secs = 1\n");
    let mut engine = ptr::null_mut();
    let st = unsafe { sx_engine_new(cfg.as_ptr(), f.vocab.as_ptr(), &mut engine) };
    assert_eq!(st, SxStatus::BackendUnavailable);
    assert!(engine.is_null());
}

#[test]
fn config_backend_selects_toy_model() {
    let f = files();
    let cfg = cstr(&format!("{CONFIG}[backend]\nkind = \"toy\"\ntoy_model = {:?}\n", f.model.to_str().unwrap()));
    let mut engine = ptr::null_mut();
    let st = unsafe { sx_engine_new(cfg.as_ptr(), f.vocab.as_ptr(), &mut engine) };
    assert_eq!(st, SxStatus::Ok, "{}", last_error());
    let other = toy_engine(&f);
    let seeds: Vec<&str> = f.world.queries[1].seeds.iter().map(String::as_str).collect();
    assert_eq!(expand(engine, &seeds).1, expand(other, &seeds).1);
    unsafe {
        sx_engine_free(engine);
        sx_engine_free(other);
    }
}

fn ap(ranked: &[&str], gold: &[&str], k: usize, conv: SxApConvention) -> f64 {
    let r: Vec<CString> = ranked.iter().map(|s| cstr(s)).collect();
    let g: Vec<CString> = gold.iter().map(|s| cstr(s)).collect();
    let rp: Vec<*const c_char> = r.iter().map(|s| s.as_ptr()).collect();
    let gp: Vec<*const c_char> = g.iter().map(|s| s.as_ptr()).collect();
    let mut out = f64::NAN;
    let st = unsafe { sx_average_precision_at_k(rp.as_ptr(), rp.len(), gp.as_ptr(), gp.len(), k, conv, &mut out) };
    assert_eq!(st, SxStatus::Ok);
    out
}

#[test]
fn average_precision_by_hand() {
    // hits at ranks 1 and 3: precisions 1 and 2/3
    let ranked = ["a", "x", "b", "y"];
    let gold = ["a", "b", "c", "b"];
    let hit = ap(&ranked, &gold, 4, SxApConvention::HitCount);
    assert!((hit - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    let mk = ap(&ranked, &gold, 4, SxApConvention::MinKGold);
    assert!((mk - (1.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    assert_eq!(ap(&ranked, &gold, 1, SxApConvention::HitCount), 1.0);
    assert_eq!(ap(&["x", "y"], &gold, 2, SxApConvention::HitCount), 0.0);
    let mut out = 0.0;
    let st = unsafe { sx_average_precision_at_k(ptr::null(), 2, ptr::null(), 0, 1, SxApConvention::HitCount, &mut out) };
    assert_eq!(st, SxStatus::NullPointer);
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(sx_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/setexpand.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "sx_engine_new_toy",
        "sx_engine_new",
        "sx_engine_free",
        "sx_engine_vocab_size",
        "sx_engine_expand",
        "sx_average_precision_at_k",
        "sx_last_error",
        "sx_string_free",
        "sx_version",
        "typedef struct SxEngine SxEngine",
        "SX_STATUS_UNRESOLVED_SEEDS = 6",
    ] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn c_program_compiles_against_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include "setexpand.h"
int main(void) {
    const char *ranked[] = {"a", "x", "b"};
    const char *gold[] = {"a", "b"};
    double ap = 0.0;
    SxEngine *e = NULL;
    if (sx_engine_new_toy(NULL, "v", NULL, &e) != SX_STATUS_NULL_POINTER) return 1;
    if (sx_last_error() == NULL) return 2;
    if (sx_average_precision_at_k(ranked, 3, gold, 2, 3, SX_AP_CONVENTION_HIT_COUNT, &ap) != SX_STATUS_OK) return 3;
    return (ap > 0.833 && ap < 0.834) ? 0 : 4;
}
"#,
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let status = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .status()
        .expect("a C compiler");
    assert!(status.success());

    // deps/ holds this test binary; the static library sits one level up.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libsetexpand_ffi.a");
    if !lib.exists() {
        let st = Command::new(env!("CARGO"))
            .args(["build", "-p", "setexpand-ffi", "--lib"])
            .arg("--target-dir")
            .arg(exe.parent().unwrap().parent().unwrap().parent().unwrap())
            .status()
            .unwrap();
        assert!(st.success());
    }
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(Command::new(&bin).status().unwrap().code(), Some(0));
}
