mod common;

use std::time::Duration;

use common::{chat_reply, ScriptedServer};
use lrmt::backend::{translate, translate_batch, BackendError, CompletionBackend, HttpBackend, TranslationRequest};
use lrmt::retry::RetryPolicy;

fn request(id: &str) -> TranslationRequest {
    TranslationRequest {
        query_id: id.into(),
        system: None,
        prompt: "Translate from French to Monégasque.\nbonjour → bungiurnu\nmerci →".into(),
        stop: Some("\n".into()),
        max_tokens: 64,
    }
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 3,
        backoff_ms: vec![5, 10],
    }
}

fn backend(server: &ScriptedServer, auth: Option<&str>) -> HttpBackend {
    HttpBackend::new(
        &format!("{}/chat/completions", server.url),
        "test-model",
        auth.map(str::to_string),
        Duration::from_secs(5),
    )
}

#[test]
fn two_server_errors_then_success() {
    let server = ScriptedServer::start(vec![
        (500, "{\"error\":\"busy\"}".into()),
        (500, "{\"error\":\"busy\"}".into()),
        (200, chat_reply("mercì\nextra line")),
    ]);
    let r = translate(&request("q1"), &backend(&server, None), &fast_retry()).unwrap();
    assert_eq!(r.attempts, 3);
    assert_eq!(r.hypothesis, "mercì");
    assert_eq!(server.hits(), 3);
}

#[test]
fn retries_exhausted_reports_attempts() {
    let server = ScriptedServer::start(vec![(503, "{}".into())]);
    let e = translate(&request("q1"), &backend(&server, None), &fast_retry()).unwrap_err();
    assert!(
        matches!(
            e,
            BackendError::Service {
                status: 503,
                attempts: 3,
                ..
            }
        ),
        "{e:?}"
    );
    assert!(e.is_transport());
    assert_eq!(server.hits(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = ScriptedServer::start(vec![(400, "{\"error\":\"bad request\"}".into())]);
    let e = translate(&request("q1"), &backend(&server, None), &fast_retry()).unwrap_err();
    assert!(
        matches!(
            e,
            BackendError::Service {
                status: 400,
                attempts: 1,
                ..
            }
        ),
        "{e:?}"
    );
    assert_eq!(server.hits(), 1);
}

#[test]
fn empty_completion_is_empty_output() {
    let server = ScriptedServer::start(vec![(200, chat_reply("   \n"))]);
    let e = translate(&request("q1"), &backend(&server, None), &fast_retry()).unwrap_err();
    assert_eq!(e, BackendError::EmptyOutput);
    assert_eq!(server.hits(), 1);
}

#[test]
fn malformed_body_is_protocol_error() {
    let server = ScriptedServer::start(vec![(200, "{\"unexpected\": true}".into())]);
    let e = translate(&request("q1"), &backend(&server, None), &fast_retry()).unwrap_err();
    assert!(matches!(e, BackendError::Protocol(_)), "{e:?}");
}

#[test]
fn request_body_is_greedy_and_carries_auth() {
    let server = ScriptedServer::start(vec![(200, chat_reply("ok"))]);
    let mut req = request("q1");
    req.system = Some("Translate from French to Monégasque.".into());
    req.prompt = "bonjour → bungiurnu\nmerci →".into();
    backend(&server, Some("s3cret")).complete(&req).unwrap();
    let seen = server.seen.lock().unwrap()[0].clone();
    assert_eq!(seen.authorization.as_deref(), Some("Bearer s3cret"));
    assert_eq!(seen.body["temperature"], 0);
    assert_eq!(seen.body["top_p"], 1);
    assert_eq!(seen.body["n"], 1);
    assert_eq!(seen.body["max_tokens"], 64);
    assert_eq!(seen.body["model"], "test-model");
    assert_eq!(seen.body["stop"][0], "\n");
    let messages = seen.body["messages"].as_array().unwrap();
    assert_eq!(messages[0]["role"], "system");
    assert_eq!(messages[1]["role"], "user");
    assert_eq!(messages[1]["content"], "bonjour → bungiurnu\nmerci →");
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let b = HttpBackend::new(
        "http://127.0.0.1:9/v1/chat/completions",
        "m",
        None,
        Duration::from_secs(1),
    );
    let e = translate(&request("q1"), &b, &RetryPolicy::no_delay(2)).unwrap_err();
    assert!(matches!(e, BackendError::Transport { attempts: 2, .. }), "{e:?}");
}

#[test]
fn batch_against_server_keeps_order() {
    let server = ScriptedServer::start(vec![(200, chat_reply("same"))]);
    let reqs: Vec<_> = (0..12).map(|i| request(&format!("q{i}"))).collect();
    let out = translate_batch(&reqs, &backend(&server, None), &fast_retry(), 3).unwrap();
    let ids: Vec<_> = out.iter().map(|r| r.as_ref().unwrap().query_id.clone()).collect();
    assert_eq!(ids, reqs.iter().map(|r| r.query_id.clone()).collect::<Vec<_>>());
    assert_eq!(server.hits(), 12);
}
