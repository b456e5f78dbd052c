mod common;

use common::{json_close, transcript, GOLDEN_TRANSCRIPT};

#[tokio::test]
async fn golden_transcript() {
    let got = transcript().await;
    for step in got.as_array().unwrap() {
        if let Some(status) = step.get("status") {
            assert!(status.as_u64().unwrap() < 300, "{step}");
        }
    }
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(std::path::Path::new(GOLDEN_TRANSCRIPT).parent().unwrap()).unwrap();
        std::fs::write(GOLDEN_TRANSCRIPT, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
        return;
    }
    let want: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(GOLDEN_TRANSCRIPT).unwrap()).unwrap();
    if let Err(diff) = json_close(&got, &want, 1e-9) {
        panic!("transcript differs from golden: {diff}");
    }
}

#[tokio::test]
async fn transcript_is_deterministic() {
    assert_eq!(transcript().await, transcript().await);
}
