//! C ABI over the `setexpand` engine.
//!
//! Every fallible function returns an [`SxStatus`]. On failure a message is
//! kept per thread and can be read with [`sx_last_error`]. Strings handed out
//! by the library must be released with [`sx_string_free`], engines with
//! [`sx_engine_free`]. An engine may be used from several threads at once.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use setexpand::eval::average_precision_at_k;
use setexpand::{ApConvention, Engine, EngineConfig, EntityVocabulary, Error, LmBackend, PrefixTrie, ToyLm};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Config = 5,
    UnresolvedSeeds = 6,
    ContextOverflow = 7,
    BackendUnavailable = 8,
    Backend = 9,
    Internal = 10,
    Panic = 11,
}

/// How AP@K is normalized.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SxApConvention {
    /// Divide by the number of gold hits within the top K.
    HitCount = 0,
    /// Divide by `min(K, |gold|)`.
    MinKGold = 1,
}

/// Opaque engine handle.
pub struct SxEngine {
    engine: Engine,
}

struct Failure(SxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => SxStatus::Io,
            Error::InvalidConfig(_) => SxStatus::Config,
            Error::InvalidArgument(_)
            | Error::EmptyVocabulary(_)
            | Error::VocabularyLine { .. }
            | Error::EmptyCorpus
            | Error::ModelFormat(_)
            | Error::Cache(_)
            | Error::Dataset { .. } => SxStatus::InvalidArgument,
            Error::UnresolvedSeeds(_) => SxStatus::UnresolvedSeeds,
            Error::ContextOverflow { .. } => SxStatus::ContextOverflow,
            Error::BackendUnavailable(_) => SxStatus::BackendUnavailable,
            Error::Backend(_) | Error::UnknownTokenId(_) => SxStatus::Backend,
            _ => SxStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SxStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SxStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SxStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SxStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn str_array<'a>(p: *const *const c_char, n: usize, name: &str) -> Result<Vec<&'a str>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure(SxStatus::NullPointer, format!("{name} is null")));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .enumerate()
        .map(|(i, &s)| str_arg(s, &format!("{name}[{i}]")))
        .collect()
}

fn out_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(SxStatus::Internal, "output contains a nul byte".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn parse_config(toml: Option<&str>) -> Result<EngineConfig, Failure> {
    Ok(match toml {
        Some(text) => EngineConfig::from_toml_str(text)?,
        None => EngineConfig::default(),
    })
}

fn assemble(backend: Box<dyn LmBackend>, vocab_path: &str, cfg: EngineConfig) -> Result<Box<SxEngine>, Failure> {
    let vocab = EntityVocabulary::load(Path::new(vocab_path), &*backend)?;
    let trie = PrefixTrie::build(&vocab)?;
    let engine = Engine::new(backend, vocab, trie, cfg.prompt, cfg.expansion)?;
    Ok(Box::new(SxEngine { engine }))
}

/// Creates an engine over a saved toy n-gram model and a vocabulary file
/// (one entity per line).
///
/// `config_toml` is optional TOML text with `[prompt]` and `[expansion]`
/// tables. Any `[backend]` table is ignored.
///
/// # Safety
/// String arguments must be null or point to nul-terminated strings. `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sx_engine_new_toy(
    model_path: *const c_char,
    vocab_path: *const c_char,
    config_toml: *const c_char,
    out: *mut *mut SxEngine,
) -> SxStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(SxStatus::NullPointer, "out is null".into()));
        }
        let model = str_arg(model_path, "model_path")?;
        let vocab = str_arg(vocab_path, "vocab_path")?;
        let cfg = parse_config(opt_str_arg(config_toml, "config_toml")?)?;
        let lm = ToyLm::load(Path::new(model))?;
        *out = Box::into_raw(assemble(Box::new(lm), vocab, cfg)?);
        Ok(())
    })
}

/// Creates an engine whose backend is chosen by the `[backend]` table of
/// `config_toml`. `SETEXPAND_SERVER_URL` overrides `backend.server_url`.
///
/// # Safety
/// See [`sx_engine_new_toy`].
#[no_mangle]
pub unsafe extern "C" fn sx_engine_new(
    config_toml: *const c_char,
    vocab_path: *const c_char,
    out: *mut *mut SxEngine,
) -> SxStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(SxStatus::NullPointer, "out is null".into()));
        }
        let vocab = str_arg(vocab_path, "vocab_path")?;
        let mut cfg = parse_config(opt_str_arg(config_toml, "config_toml")?)?;
        cfg.apply_env();
        let backend = cfg.backend.open()?;
        *out = Box::into_raw(assemble(backend, vocab, cfg)?);
        Ok(())
    })
}

/// Releases an engine. Null is accepted.
///
/// # Safety
/// `engine` must come from one of the constructors and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sx_engine_free(engine: *mut SxEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Number of entities in the engine's vocabulary, or 0 for a null handle.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sx_engine_vocab_size(engine: *const SxEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.engine.vocab().len())
}

/// Expands `seeds` and writes the ranked result as a JSON object to
/// `*out_json`. The object has `query_id`, `class_name`, `seeds`,
/// `grown_seeds`, `iterations_run` and `entities` (each with `surface`,
/// `m1`, `m2`, `m3`, `score`).
///
/// # Safety
/// `seeds` must point to `n_seeds` nul-terminated strings. `query_id` may be
/// null. Free the output with [`sx_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sx_engine_expand(
    engine: *const SxEngine,
    query_id: *const c_char,
    seeds: *const *const c_char,
    n_seeds: usize,
    out_json: *mut *mut c_char,
) -> SxStatus {
    guard(|| {
        let engine = engine
            .as_ref()
            .ok_or_else(|| Failure(SxStatus::NullPointer, "engine is null".into()))?;
        if out_json.is_null() {
            return Err(Failure(SxStatus::NullPointer, "out_json is null".into()));
        }
        let id = opt_str_arg(query_id, "query_id")?.unwrap_or("q");
        let seeds = str_array(seeds, n_seeds, "seeds")?;
        let result = engine.engine.expand(id, &seeds)?;
        out_string(result.to_json(false).to_string(), out_json)
    })
}

/// AP@K of a ranked list against a gold set. Duplicate gold strings count
/// once.
///
/// # Safety
/// `ranked` and `gold` must point to `n_ranked` and `n_gold` nul-terminated
/// strings. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sx_average_precision_at_k(
    ranked: *const *const c_char,
    n_ranked: usize,
    gold: *const *const c_char,
    n_gold: usize,
    k: usize,
    convention: SxApConvention,
    out: *mut f64,
) -> SxStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(SxStatus::NullPointer, "out is null".into()));
        }
        let ranked = str_array(ranked, n_ranked, "ranked")?;
        let gold: HashSet<&str> = str_array(gold, n_gold, "gold")?.into_iter().collect();
        let conv = match convention {
            SxApConvention::HitCount => ApConvention::HitCount,
            SxApConvention::MinKGold => ApConvention::MinKGold,
        };
        *out = average_precision_at_k(&ranked, &gold, k, conv);
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is accepted.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
