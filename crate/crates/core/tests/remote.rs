//! Remote client against an in-process mock logits server backed by a toy LM.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

use setexpand::bench::{SyntheticWorld, WorldConfig};
use setexpand::lm::{encode_f32le, LmBackend, RemoteLm, RemoteLmConfig, ScoreRequest, TokenId, ENCODING_HEADER};
use setexpand::{Engine, Error, ExpansionConfig, PromptConfig, ToyLm};

#[derive(Default)]
struct MockOptions {
    fail_first: usize,
    no_batch: bool,
    binary: bool,
}

struct Mock {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn lm() -> ToyLm {
    ToyLm::train(
        &"They are colors : red , blue , green , teal , etc .\nred , blue and green are colors .\n".repeat(6),
        3,
        0.1,
    )
    .unwrap()
}

fn reply(code: u16, body: Value) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body.to_string())
        .with_status_code(code)
        .with_header(Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap())
}

fn logprob_body(model: &ToyLm, prefix: &[TokenId], restrict: Option<&[TokenId]>, binary: bool) -> Value {
    let d = model.next_token_logprobs(prefix).unwrap();
    let v = match restrict {
        Some(ids) => d.project(ids),
        None => d.into_vec(),
    };
    if binary {
        json!({ "logprobs_b64": encode_f32le(&v) })
    } else {
        json!({ "logprobs": v })
    }
}

fn ids(v: &Value) -> Vec<TokenId> {
    v.as_array()
        .map(|a| a.iter().map(|x| x.as_u64().unwrap() as TokenId).collect())
        .unwrap_or_default()
}

fn spawn(model: ToyLm, opts: MockOptions) -> Mock {
    let server = Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let n = counter.fetch_add(1, Ordering::SeqCst);
            if n < opts.fail_first {
                let _ = req.respond(reply(503, json!({"error": "loading"})));
                continue;
            }
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let want_binary = opts.binary
                && req
                    .headers()
                    .iter()
                    .any(|h| h.field.equiv(ENCODING_HEADER) && h.value.as_str() == "f32le-base64");
            let parsed: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
            let limit = model.context_limit();
            let resp = match req.url() {
                "/info" => reply(
                    200,
                    json!({
                        "model_id": "mock-toy",
                        "vocab_size": model.vocab_size(),
                        "context_limit": limit,
                        "delimiter_ids": model.delimiter_tokens(),
                    }),
                ),
                "/tokenize" => {
                    let text = parsed["text"].as_str().unwrap_or("");
                    if text.is_empty() {
                        reply(400, json!({"error": "empty text"}))
                    } else {
                        let t = model.tokenize(text, parsed["in_continuation"].as_bool().unwrap_or(false)).unwrap();
                        if t.len() > limit {
                            reply(413, json!({"len": t.len(), "limit": limit}))
                        } else {
                            reply(200, json!({ "token_ids": t }))
                        }
                    }
                }
                "/detokenize" => reply(200, json!({ "text": model.detokenize(&ids(&parsed["token_ids"])).unwrap() })),
                "/logprobs" => {
                    if !parsed.is_object() {
                        reply(400, json!({"error": "malformed"}))
                    } else {
                        let prefix = ids(&parsed["prefix_ids"]);
                        let restrict = parsed.get("restrict_ids").map(ids);
                        reply(200, logprob_body(&model, &prefix, restrict.as_deref(), want_binary))
                    }
                }
                "/logprobs/batch" if !opts.no_batch => {
                    let results: Vec<Value> = parsed["requests"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|r| {
                            let restrict = r.get("restrict_ids").map(ids);
                            logprob_body(&model, &ids(&r["prefix_ids"]), restrict.as_deref(), want_binary)
                        })
                        .collect();
                    reply(200, json!({ "results": results }))
                }
                _ => reply(404, json!({"error": "not found"})),
            };
            let _ = req.respond(resp);
        }
    });
    Mock {
        url: format!("http://127.0.0.1:{port}"),
        hits,
    }
}

fn connect(url: &str, binary: bool) -> RemoteLm {
    RemoteLm::connect(RemoteLmConfig {
        base_url: url.to_string(),
        retries: 2,
        retry_backoff: Duration::from_millis(5),
        binary_logprobs: binary,
        ..RemoteLmConfig::default()
    })
    .unwrap()
}

#[test]
fn info_and_tokenizer_round_trip() {
    let model = lm();
    let mock = spawn(model.clone(), MockOptions::default());
    let remote = connect(&mock.url, false);
    assert_eq!(remote.info().model_id, "mock-toy");
    assert_eq!(remote.vocab_size(), model.vocab_size());
    assert_eq!(remote.delimiter_tokens(), model.delimiter_tokens());
    for text in ["red", "blue , green", "They are colors :"] {
        let t = remote.tokenize(text, true).unwrap();
        assert_eq!(t, model.tokenize(text, true).unwrap());
        assert_eq!(remote.detokenize(&t).unwrap(), model.detokenize(&t).unwrap());
    }
}

#[test]
fn distributions_match_local_model() {
    let model = lm();
    for binary in [false, true] {
        let mock = spawn(
            model.clone(),
            MockOptions {
                binary,
                ..MockOptions::default()
            },
        );
        let remote = connect(&mock.url, binary);
        let tol = if binary { 1e-5 } else { 1e-12 };
        let prefix = model.tokenize("They are colors : red ,", false).unwrap();
        let full = remote.next_token_logprobs(&prefix).unwrap();
        let local = model.next_token_logprobs(&prefix).unwrap();
        assert!(full.logsumexp().abs() < 1e-3);
        for (a, b) in full.as_slice().iter().zip(local.as_slice()) {
            assert!((a - b).abs() < tol);
        }
        let subset: Vec<TokenId> = vec![3, 1, 7];
        let restricted = remote.restricted_logprobs(&prefix, &subset).unwrap();
        for (r, &t) in restricted.iter().zip(&subset) {
            assert_eq!(*r, full.get(t));
        }
        assert_eq!(remote.next_token_logprobs(&prefix).unwrap(), full);
    }
}

#[test]
fn batch_requests_match_singles() {
    let model = lm();
    for no_batch in [false, true] {
        let mock = spawn(
            model.clone(),
            MockOptions {
                no_batch,
                ..MockOptions::default()
            },
        );
        let remote = connect(&mock.url, false);
        let p1 = model.tokenize("red ,", false).unwrap();
        let p2 = model.tokenize("They are", false).unwrap();
        let reqs = [
            ScoreRequest { prefix: &p1, ids: &[2, 4] },
            ScoreRequest { prefix: &p2, ids: &[5] },
        ];
        let got = remote.restricted_logprobs_batch(&reqs).unwrap();
        assert_eq!(got[0], model.restricted_logprobs(&p1, &[2, 4]).unwrap());
        assert_eq!(got[1], model.restricted_logprobs(&p2, &[5]).unwrap());
    }
}

#[test]
fn retries_through_startup_503s() {
    let mock = spawn(
        lm(),
        MockOptions {
            fail_first: 2,
            ..MockOptions::default()
        },
    );
    let remote = connect(&mock.url, false);
    assert!(remote.vocab_size() > 0);
    assert!(mock.hits.load(Ordering::SeqCst) >= 3);
}

#[test]
fn persistent_503_is_unavailable() {
    let mock = spawn(
        lm(),
        MockOptions {
            fail_first: usize::MAX,
            ..MockOptions::default()
        },
    );
    let err = RemoteLm::connect(RemoteLmConfig {
        base_url: mock.url.clone(),
        retries: 1,
        retry_backoff: Duration::from_millis(1),
        ..RemoteLmConfig::default()
    })
    .unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)));
}

#[test]
fn client_side_errors() {
    let model = lm();
    let mock = spawn(model.clone(), MockOptions::default());
    let remote = connect(&mock.url, false);
    let long = vec![1; model.context_limit() + 1];
    assert!(matches!(remote.next_token_logprobs(&long), Err(Error::ContextOverflow { .. })));
    let bad = model.vocab_size() as TokenId + 5;
    assert!(matches!(remote.next_token_logprobs(&[bad]), Err(Error::UnknownTokenId(_))));
    let huge = "red ".repeat(model.context_limit() + 10);
    assert!(matches!(remote.tokenize(&huge, false), Err(Error::ContextOverflow { .. })));
}

#[test]
fn remote_expansion_equals_local() {
    let world = SyntheticWorld::build(&WorldConfig {
        classes: 3,
        members_per_class: 10,
        queries_per_class: 1,
        ..WorldConfig::default()
    })
    .unwrap();
    let mock = spawn(world.lm.clone(), MockOptions::default());
    let cfg = ExpansionConfig {
        iterations: 2,
        permutations: 2,
        beam: 8,
        target_size: 10,
        rerank_pool: 20,
        ..ExpansionConfig::default()
    };
    let q = &world.queries[0];
    let local = Engine::from_surfaces(Box::new(world.lm.clone()), &world.members(), PromptConfig::default(), cfg.clone())
        .unwrap()
        .expand(&q.id, &q.seeds)
        .unwrap();
    let remote =
        Engine::from_surfaces(Box::new(connect(&mock.url, false)), &world.members(), PromptConfig::default(), cfg)
            .unwrap()
            .expand(&q.id, &q.seeds)
            .unwrap();
    assert_eq!(local.surfaces(), remote.surfaces());
    assert_eq!(local.class_name, remote.class_name);
}
