//! Browser bindings for three interactive operations: amplitude encoding
//! with fidelity, the interference curve, and BPE train-and-tokenize.
//!
//! Each operation is a plain function returning a serializable report, so
//! it can be tested natively; the `#[wasm_bindgen]` wrappers only convert
//! to JSON strings for the page.

use qrag_core::quantum::{self, amplitude_encode_slice, interference_score};
use qrag_core::semantic::{cosine, Embedding};
use qrag_core::tokenizer::{normalize, train_bpe};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct KernelReport {
    pub qubits: u32,
    pub amplitudes_a: Vec<f64>,
    pub amplitudes_b: Vec<f64>,
    pub overlap: f64,
    pub fidelity: f64,
    pub signed_fidelity: f64,
    pub cosine: f64,
}

/// Encodes both vectors as states and compares them.
pub fn kernel(a: &[f64], b: &[f64]) -> Result<KernelReport, String> {
    if a.len() != b.len() {
        return Err(format!("vectors differ in length ({} vs {})", a.len(), b.len()));
    }
    let sa = amplitude_encode_slice(a).map_err(|e| e.to_string())?;
    let sb = amplitude_encode_slice(b).map_err(|e| e.to_string())?;
    let cos = cosine(
        &Embedding::new(a.to_vec()).map_err(|e| e.to_string())?,
        &Embedding::new(b.to_vec()).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    Ok(KernelReport {
        qubits: sa.num_qubits(),
        overlap: quantum::overlap(&sa, &sb).map_err(|e| e.to_string())?,
        fidelity: quantum::fidelity(&sa, &sb).map_err(|e| e.to_string())?,
        signed_fidelity: quantum::signed_fidelity(&sa, &sb).map_err(|e| e.to_string())?,
        amplitudes_a: sa.amplitudes().to_vec(),
        amplitudes_b: sb.amplitudes().to_vec(),
        cosine: cos,
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub c: f64,
    pub interference: f64,
    /// Linear fusion of the same inputs, for contrast.
    pub weighted_sum: f64,
}

/// Interference score over `c` in [-1, 1] at fixed lexical amplitude `l`.
pub fn interference_curve(l: f64, w_semantic: f64, steps: usize) -> Result<Vec<CurvePoint>, String> {
    let w_lexical = 1.0 - w_semantic;
    let steps = steps.clamp(2, 1000);
    (0..steps)
        .map(|i| {
            let c = -1.0 + 2.0 * i as f64 / (steps - 1) as f64;
            Ok(CurvePoint {
                c,
                interference: interference_score(c, l, w_semantic, w_lexical).map_err(|e| e.to_string())?,
                weighted_sum: w_semantic * (c + 1.0) / 2.0 + w_lexical * l,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct BpeReport {
    pub vocab_size: usize,
    pub merge_count: usize,
    /// The first merges in training order.
    pub merges: Vec<(String, String)>,
    pub tokens: Vec<String>,
    pub ids: Vec<u32>,
    pub decoded: String,
    pub round_trip: bool,
}

/// Trains on `corpus` (one document per line) and tokenizes `text`.
pub fn bpe(corpus: &str, vocab_size: usize, text: &str) -> Result<BpeReport, String> {
    let lines: Vec<String> = corpus.lines().map(normalize).filter(|l| !l.is_empty()).collect();
    let model = train_bpe(&lines, vocab_size).map_err(|e| e.to_string())?;
    let seq = model.encode(text);
    let decoded = model.decode(&seq).map_err(|e| e.to_string())?;
    Ok(BpeReport {
        vocab_size: model.vocab_size(),
        merge_count: model.merges().len(),
        merges: model.merges().iter().take(50).cloned().collect(),
        round_trip: decoded == normalize(text),
        tokens: seq.surface,
        ids: seq.ids,
        decoded,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = kernel)]
pub fn kernel_js(a: &[f64], b: &[f64]) -> Result<String, JsError> {
    to_js(kernel(a, b))
}

#[wasm_bindgen(js_name = interferenceCurve)]
pub fn interference_curve_js(l: f64, w_semantic: f64, steps: usize) -> Result<String, JsError> {
    to_js(interference_curve(l, w_semantic, steps))
}

#[wasm_bindgen(js_name = bpe)]
pub fn bpe_js(corpus: &str, vocab_size: usize, text: &str) -> Result<String, JsError> {
    to_js(bpe(corpus, vocab_size, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_hand_case() {
        let r = kernel(&[1.0, 0.0], &[0.6, 0.8]).unwrap();
        assert_eq!(r.qubits, 1);
        assert!((r.fidelity - 0.36).abs() < 1e-12);
        assert!((r.cosine - 0.6).abs() < 1e-12);
        assert!((r.overlap - 0.6).abs() < 1e-12);
    }

    #[test]
    fn kernel_pads_and_rejects_mismatch() {
        let r = kernel(&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.amplitudes_a.len(), 4);
        assert!(kernel(&[1.0], &[1.0, 2.0]).is_err());
        assert!(kernel(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn curve_endpoints() {
        let pts = interference_curve(1.0, 0.5, 3).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].interference.abs() < 1e-12);
        assert!((pts[2].interference - 1.0).abs() < 1e-12);
        assert!((pts[1].c).abs() < 1e-12);
        assert!(interference_curve(0.5, 1.5, 10).is_err());
    }

    #[test]
    fn bpe_round_trip() {
        let r = bpe("ਸਤਿ ਸ੍ਰੀ ਅਕਾਲ\nਸਤਿ ਸ੍ਰੀ ਅਕਾਲ", 200, "ਸਤਿ ਅਕਾਲ").unwrap();
        assert!(r.round_trip);
        assert_eq!(r.tokens, ["ਸਤਿ</w>", "ਅਕਾਲ</w>"]);
        assert!(bpe("", 200, "x").is_err());
    }
}
