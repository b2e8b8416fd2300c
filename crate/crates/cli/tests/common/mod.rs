#![allow(dead_code)]

use std::path::{Path, PathBuf};

use qrag_core::engine::{build_all, EngineConfig};

pub const DOCS: [&str; 8] = [
    "ਪੰਜਾਬ ਦੀ ਧਰਤੀ ਬਹੁਤ ਉਪਜਾਊ ਹੈ ਅਤੇ ਇੱਥੇ ਕਣਕ ਉਗਾਈ ਜਾਂਦੀ ਹੈ",
    "ਗੁਰੂ ਨਾਨਕ ਦੇਵ ਜੀ ਦਾ ਜਨਮ ਤਲਵੰਡੀ ਵਿੱਚ ਹੋਇਆ ਸੀ ਜੋ ਹੁਣ ਪਾਕਿਸਤਾਨ ਵਿੱਚ ਹੈ",
    "ਅੰਮ੍ਰਿਤਸਰ ਵਿੱਚ ਹਰਿਮੰਦਰ ਸਾਹਿਬ ਸਥਿਤ ਹੈ ਜਿੱਥੇ ਲੱਖਾਂ ਲੋਕ ਆਉਂਦੇ ਹਨ",
    "ਭੰਗੜਾ ਪੰਜਾਬ ਦਾ ਇੱਕ ਪ੍ਰਸਿੱਧ ਲੋਕ ਨਾਚ ਹੈ ਜੋ ਵਿਸਾਖੀ ਤੇ ਨੱਚਿਆ ਜਾਂਦਾ ਹੈ",
    "ਲੁਧਿਆਣਾ ਸ਼ਹਿਰ ਆਪਣੇ ਕੱਪੜਾ ਉਦਯੋਗ ਲਈ ਮਸ਼ਹੂਰ ਹੈ ਅਤੇ ਇੱਥੇ ਵੱਡੀ ਮੰਡੀ ਹੈ",
    "ਸਰ੍ਹੋਂ ਦਾ ਸਾਗ ਅਤੇ ਮੱਕੀ ਦੀ ਰੋਟੀ ਪੰਜਾਬੀ ਖਾਣੇ ਦੀ ਪਛਾਣ ਹੈ ਸਰਦੀਆਂ ਵਿੱਚ",
    "ਪੰਜਾਬੀ ਭਾਸ਼ਾ ਗੁਰਮੁਖੀ ਅਤੇ ਸ਼ਾਹਮੁਖੀ ਦੋਵਾਂ ਲਿਪੀਆਂ ਵਿੱਚ ਲਿਖੀ ਜਾਂਦੀ ਹੈ",
    "ਵਿਸਾਖੀ ਦਾ ਤਿਉਹਾਰ ਫ਼ਸਲ ਦੀ ਵਾਢੀ ਦੀ ਖ਼ੁਸ਼ੀ ਵਿੱਚ ਅਪ੍ਰੈਲ ਮਹੀਨੇ ਮਨਾਇਆ ਜਾਂਦਾ ਹੈ",
];

pub fn config() -> EngineConfig {
    serde_json::from_value(serde_json::json!({
        "cleaning": {"min_tokens": 3, "chunk_size_tokens": 32, "chunk_overlap_tokens": 8},
        "embedder": {"kind": "hash_projection", "dim": 64},
        "vocab_size": 400,
        "context_budget_tokens": 64
    }))
    .unwrap()
}

pub fn write_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let mut lines: Vec<String> = DOCS
        .iter()
        .enumerate()
        .map(|(i, t)| serde_json::json!({"id": format!("d{i}"), "text": t}).to_string())
        .collect();
    lines.push("{not json".into());
    lines.push(serde_json::json!({"id": "en", "text": "an english line that fails the language filter"}).to_string());
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

pub fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config()).unwrap()).unwrap();
    path
}

pub fn build_index(dir: &Path) -> PathBuf {
    let corpus = write_corpus(dir);
    let out = dir.join("index");
    build_all(&corpus, &config(), &out).unwrap();
    out
}
