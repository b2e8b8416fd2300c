//! Quantum-inspired scoring on simulated real-amplitude states, and the
//! fusion modes that combine the sparse, dense and quantum signals.
//!
//! An embedding is amplitude-encoded into an `n`-qubit state by zero
//! padding to `2^n` and L2 normalization. The kernel between two states is
//! the fidelity `|<a|b>|^2`. Interference scoring superposes the signed
//! state overlap `c` with a normalized lexical amplitude `l` before
//! squaring:
//!
//! ```text
//! (ws*c + wl*l)^2 = ws^2 c^2 + wl^2 l^2 + 2 ws wl c l
//! ```
//!
//! The last term is constructive when `c > 0` and destructive when `c < 0`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantic::{dot, l2_norm, Embedding};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    amplitudes: Vec<f64>,
}

impl AmplitudeState {
    /// Wraps amplitudes that already form a normalized power-of-two state.
    pub fn from_amplitudes(amplitudes: Vec<f64>) -> Result<Self> {
        let n = amplitudes.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::format("amplitude state", format!("length {n} is not a power of two >= 2")));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("<state>".into()));
        }
        let total: f64 = amplitudes.iter().map(|a| a * a).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::format("amplitude state", format!("squared norm {total} != 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn num_qubits(&self) -> u32 {
        self.amplitudes.len().trailing_zeros()
    }

    /// Born-rule probabilities of each basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }
}

pub fn amplitude_encode(e: &Embedding) -> Result<AmplitudeState> {
    amplitude_encode_slice(&e.values)
}

pub fn amplitude_encode_slice(values: &[f64]) -> Result<AmplitudeState> {
    let norm = l2_norm(values);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding);
    }
    // one qubit minimum, so a single value pads to length 2
    let len = values.len().next_power_of_two().max(2);
    let mut amplitudes = vec![0.0; len];
    for (a, v) in amplitudes.iter_mut().zip(values) {
        *a = v / norm;
    }
    Ok(AmplitudeState { amplitudes })
}

/// Signed overlap `<a|b>` of two real states.
pub fn overlap(a: &AmplitudeState, b: &AmplitudeState) -> Result<f64> {
    if a.num_qubits() != b.num_qubits() {
        return Err(Error::QubitMismatch(a.num_qubits(), b.num_qubits()));
    }
    Ok(dot(&a.amplitudes, &b.amplitudes).clamp(-1.0, 1.0))
}

/// State fidelity `|<a|b>|^2`.
pub fn fidelity(a: &AmplitudeState, b: &AmplitudeState) -> Result<f64> {
    let ip = overlap(a, b)?;
    Ok((ip * ip).clamp(0.0, 1.0))
}

/// `sign(<a|b>) * <a|b>^2`, so anti-aligned states rank last.
pub fn signed_fidelity(a: &AmplitudeState, b: &AmplitudeState) -> Result<f64> {
    overlap(a, b).map(signed_square)
}

pub(crate) fn signed_square(ip: f64) -> f64 {
    ip.signum() * ip * ip
}

/// Kernel value used for ranking given a precomputed overlap.
pub fn kernel_from_overlap(ip: f64, signed: bool) -> f64 {
    if signed {
        signed_square(ip)
    } else {
        (ip * ip).clamp(0.0, 1.0)
    }
}

/// Per-query min-max normalization of lexical scores onto [0, 1].
pub fn normalize_lexical<K>(raw: &HashMap<K, f64>) -> HashMap<K, f64>
where
    K: Clone + Eq + std::hash::Hash,
{
    let (min, max) = raw
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    raw.iter()
        .map(|(k, &s)| {
            let v = if max > min { (s - min) / (max - min) } else { 1.0 };
            (k.clone(), v)
        })
        .collect()
}

fn check_weights(w_semantic: f64, w_lexical: f64) -> Result<()> {
    let ok = w_semantic >= 0.0
        && w_lexical >= 0.0
        && w_semantic.is_finite()
        && w_lexical.is_finite()
        && ((w_semantic + w_lexical) - 1.0).abs() <= WEIGHT_TOLERANCE;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidWeights(w_semantic, w_lexical))
    }
}

/// Squared superposition of the semantic overlap and the lexical amplitude.
pub fn interference_score(c: f64, l: f64, w_semantic: f64, w_lexical: f64) -> Result<f64> {
    check_weights(w_semantic, w_lexical)?;
    let amp = w_semantic * c.clamp(-1.0, 1.0) + w_lexical * l.clamp(0.0, 1.0);
    Ok((amp * amp).clamp(0.0, 1.0))
}

/// Reciprocal rank fusion over 1-based rank lists.
pub fn fuse_rrf<S: AsRef<str>>(rank_lists: &[Vec<S>], rrf_k: usize) -> HashMap<String, f64> {
    let mut out: HashMap<String, f64> = HashMap::new();
    for list in rank_lists {
        for (i, id) in list.iter().enumerate() {
            *out.entry(id.as_ref().to_string()).or_insert(0.0) += rrf_term(rrf_k, i + 1);
        }
    }
    out
}

fn rrf_term(rrf_k: usize, rank: usize) -> f64 {
    1.0 / (rrf_k + rank) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    SparseOnly,
    DenseOnly,
    Rrf,
    WeightedSum,
    FidelityRerank,
    #[default]
    QuantumInterference,
}

impl FusionMode {
    pub const ALL: [FusionMode; 6] = [
        FusionMode::SparseOnly,
        FusionMode::DenseOnly,
        FusionMode::Rrf,
        FusionMode::WeightedSum,
        FusionMode::FidelityRerank,
        FusionMode::QuantumInterference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::SparseOnly => "sparse_only",
            FusionMode::DenseOnly => "dense_only",
            FusionMode::Rrf => "rrf",
            FusionMode::WeightedSum => "weighted_sum",
            FusionMode::FidelityRerank => "fidelity_rerank",
            FusionMode::QuantumInterference => "quantum_interference",
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, FusionMode::FidelityRerank | FusionMode::QuantumInterference)
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub w_semantic: f64,
    pub w_lexical: f64,
    pub rrf_k: usize,
    pub k_sparse: usize,
    pub k_dense: usize,
    pub k_final: usize,
    pub signed_fidelity: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::QuantumInterference,
            w_semantic: 0.6,
            w_lexical: 0.4,
            rrf_k: 60,
            k_sparse: 50,
            k_dense: 50,
            k_final: 10,
            signed_fidelity: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        check_weights(self.w_semantic, self.w_lexical)?;
        if self.rrf_k == 0 || self.k_sparse == 0 || self.k_dense == 0 || self.k_final == 0 {
            return Err(Error::Config("fusion k values must be >= 1".into()));
        }
        Ok(())
    }
}

/// Every signal known about one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CandidateScore {
    pub chunk_id: String,
    /// BM25 score, present when the lexical leg retrieved the chunk.
    pub sparse_raw: Option<f64>,
    /// 1-based rank in the lexical leg.
    pub sparse_rank: Option<usize>,
    pub dense_cos: Option<f64>,
    /// 1-based rank in the dense leg.
    pub dense_rank: Option<usize>,
    pub lexical_norm: f64,
    /// Signed overlap of the query and chunk amplitude states.
    pub overlap: Option<f64>,
    pub quantum: Option<f64>,
    pub fused: f64,
}

/// Scores every candidate under `cfg.mode`, sorts by fused score
/// descending (ties by chunk id) and keeps the top `k_final`.
pub fn rank_candidates(cands: Vec<CandidateScore>, cfg: &FusionConfig) -> Result<Vec<CandidateScore>> {
    let missing = || Error::MissingScore(cfg.mode.to_string());
    let mut ranked: Vec<CandidateScore> = match cfg.mode {
        FusionMode::SparseOnly => {
            let out: Vec<_> = cands
                .into_iter()
                .filter_map(|mut c| {
                    c.fused = c.sparse_raw?;
                    Some(c)
                })
                .collect();
            if out.is_empty() {
                return Err(missing());
            }
            out
        }
        FusionMode::DenseOnly => {
            let out: Vec<_> = cands
                .into_iter()
                .filter_map(|mut c| {
                    c.fused = c.dense_cos?;
                    Some(c)
                })
                .collect();
            if out.is_empty() {
                return Err(missing());
            }
            out
        }
        FusionMode::Rrf => {
            if cands.iter().all(|c| c.sparse_rank.is_none() && c.dense_rank.is_none()) {
                return Err(missing());
            }
            cands
                .into_iter()
                .map(|mut c| {
                    // list order (sparse, dense) fixes the summation order
                    let mut s = 0.0;
                    if let Some(r) = c.sparse_rank {
                        s += rrf_term(cfg.rrf_k, r);
                    }
                    if let Some(r) = c.dense_rank {
                        s += rrf_term(cfg.rrf_k, r);
                    }
                    c.fused = s;
                    c
                })
                .collect()
        }
        FusionMode::WeightedSum => {
            check_weights(cfg.w_semantic, cfg.w_lexical)?;
            if cands.iter().all(|c| c.dense_cos.is_none() && c.sparse_raw.is_none()) {
                return Err(missing());
            }
            cands
                .into_iter()
                .map(|mut c| {
                    let dense = c.dense_cos.map_or(0.0, |cos| (cos + 1.0) / 2.0);
                    c.fused = cfg.w_semantic * dense + cfg.w_lexical * c.lexical_norm;
                    c
                })
                .collect()
        }
        FusionMode::FidelityRerank => {
            if cands.iter().all(|c| c.overlap.is_none()) {
                return Err(missing());
            }
            cands
                .into_iter()
                .filter_map(|mut c| {
                    let q = kernel_from_overlap(c.overlap?, cfg.signed_fidelity);
                    c.quantum = Some(q);
                    c.fused = q;
                    Some(c)
                })
                .collect()
        }
        FusionMode::QuantumInterference => {
            if cands.iter().all(|c| c.overlap.is_none()) {
                return Err(missing());
            }
            let mut out = Vec::with_capacity(cands.len());
            for mut c in cands {
                let Some(ip) = c.overlap else { continue };
                let q = interference_score(ip, c.lexical_norm, cfg.w_semantic, cfg.w_lexical)?;
                c.quantum = Some(q);
                c.fused = q;
                out.push(c);
            }
            out
        }
    };
    if ranked.iter().any(|c| !c.fused.is_finite()) {
        return Err(Error::format("fusion", "non-finite fused score"));
    }
    ranked.sort_by(|a, b| b.fused.total_cmp(&a.fused).then_with(|| a.chunk_id.cmp(&b.chunk_id)));
    ranked.truncate(cfg.k_final);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(v: &[f64]) -> AmplitudeState {
        amplitude_encode_slice(v).unwrap()
    }

    #[test]
    fn encode_hand_values() {
        let s = state(&[3.0, 4.0]);
        assert_eq!(s.num_qubits(), 1);
        assert_abs_diff_eq!(s.amplitudes()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1], 0.8, epsilon = 1e-15);

        let s = state(&[1.0, 1.0, 1.0]);
        assert_eq!(s.num_qubits(), 2);
        let r = 1.0 / 3f64.sqrt();
        for (a, b) in s.amplitudes().iter().zip([r, r, r, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }

        let unit = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(state(&unit).amplitudes(), &unit);
        assert!(matches!(amplitude_encode_slice(&[0.0, 0.0]), Err(Error::DegenerateEmbedding)));
    }

    #[test]
    fn fidelity_hand_values() {
        let a = state(&[1.0, 0.0]);
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &state(&[0.0, 1.0])).unwrap(), 0.0);
        let f = fidelity(&a, &state(&[0.6, 0.8])).unwrap();
        assert_abs_diff_eq!(f, 0.6 * 0.6, epsilon = 1e-12);
        assert!(matches!(
            fidelity(&a, &state(&[1.0, 0.0, 0.0])),
            Err(Error::QubitMismatch(1, 2))
        ));
    }

    #[test]
    fn global_phase() {
        let a = state(&[0.3, -0.2, 0.9, 0.1]);
        let neg = state(&[-0.3, 0.2, -0.9, -0.1]);
        assert_abs_diff_eq!(fidelity(&a, &neg).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(signed_fidelity(&a, &neg).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn lexical_normalization() {
        let m = |v: &[(&str, f64)]| v.iter().map(|(k, s)| (k.to_string(), *s)).collect::<HashMap<_, _>>();
        let out = normalize_lexical(&m(&[("a", 2.0), ("b", 4.0)]));
        assert_eq!(out["a"], 0.0);
        assert_eq!(out["b"], 1.0);
        let out = normalize_lexical(&m(&[("a", 3.0), ("b", 3.0)]));
        assert_eq!((out["a"], out["b"]), (1.0, 1.0));
        assert_eq!(normalize_lexical(&m(&[("a", 5.0)]))["a"], 1.0);
        assert!(normalize_lexical(&HashMap::<String, f64>::new()).is_empty());
    }

    #[test]
    fn interference_hand_values() {
        let s = interference_score(0.6, 0.8, 0.5, 0.5).unwrap();
        let expanded = 0.25 * 0.36 + 0.25 * 0.64 + 2.0 * 0.25 * 0.48;
        assert_abs_diff_eq!(s, expanded, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.49, epsilon = 1e-12);
        assert_eq!(interference_score(0.6, 0.8, 1.0, 0.0).unwrap(), 0.6 * 0.6);
        assert_abs_diff_eq!(interference_score(-1.0, 1.0, 0.5, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(interference_score(0.5, 0.5, 0.7, 0.7), Err(Error::InvalidWeights(..))));
        assert!(interference_score(0.5, 0.5, -0.5, 1.5).is_err());
    }

    #[test]
    fn rrf_hand_values() {
        let lists = vec![vec!["d", "x", "y"], vec!["x", "y", "d"]];
        let s = fuse_rrf(&lists, 60);
        assert_abs_diff_eq!(s["d"], 1.0 / 61.0 + 1.0 / 63.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s["d"], 0.0322657, epsilon = 1e-6);
        let single = fuse_rrf(&[vec!["only"]], 60);
        assert_eq!(single["only"], 1.0 / 61.0);
        let mirrored = fuse_rrf(&[vec!["a", "b"], vec!["b", "a"]], 60);
        assert_eq!(mirrored["a"], mirrored["b"]);
    }

    fn cand(id: &str, cos: f64, lex: f64) -> CandidateScore {
        CandidateScore {
            chunk_id: id.into(),
            sparse_raw: Some(lex * 10.0),
            dense_cos: Some(cos),
            lexical_norm: lex,
            overlap: Some(cos),
            ..Default::default()
        }
    }

    #[test]
    fn interference_ordering_matches_hand_evaluation() {
        // (0.6c + 0.4l)^2 by hand:
        // a: c=0.9 l=0.0 -> 0.54^2 = 0.2916
        // b: c=0.5 l=1.0 -> 0.70^2 = 0.4900
        // c: c=-0.2 l=1.0 -> 0.28^2 = 0.0784
        let cands = vec![cand("a", 0.9, 0.0), cand("b", 0.5, 1.0), cand("c", -0.2, 1.0)];
        let out = rank_candidates(cands, &FusionConfig::default()).unwrap();
        let ids: Vec<_> = out.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_abs_diff_eq!(out[0].fused, 0.49, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].fused, 0.2916, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2].fused, 0.0784, epsilon = 1e-12);
    }

    #[test]
    fn weighted_sum_without_lexical_is_dense_order() {
        let cands = vec![cand("a", 0.1, 1.0), cand("b", 0.7, 0.0), cand("c", 0.4, 0.5)];
        let ws = FusionConfig {
            mode: FusionMode::WeightedSum,
            w_semantic: 1.0,
            w_lexical: 0.0,
            ..Default::default()
        };
        let dense = FusionConfig {
            mode: FusionMode::DenseOnly,
            ..Default::default()
        };
        let a: Vec<_> = rank_candidates(cands.clone(), &ws).unwrap().into_iter().map(|c| c.chunk_id).collect();
        let b: Vec<_> = rank_candidates(cands, &dense).unwrap().into_iter().map(|c| c.chunk_id).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_by_chunk_id_and_truncation() {
        let cands = vec![cand("z", 0.5, 0.5), cand("a", 0.5, 0.5), cand("m", 0.5, 0.5)];
        let cfg = FusionConfig {
            k_final: 2,
            ..Default::default()
        };
        let out = rank_candidates(cands, &cfg).unwrap();
        let ids: Vec<_> = out.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, ["a", "m"]);
    }

    #[test]
    fn missing_scores() {
        let c = CandidateScore {
            chunk_id: "a".into(),
            dense_cos: Some(0.4),
            ..Default::default()
        };
        let cfg = FusionConfig {
            mode: FusionMode::SparseOnly,
            ..Default::default()
        };
        assert!(matches!(rank_candidates(vec![c.clone()], &cfg), Err(Error::MissingScore(_))));
        let cfg = FusionConfig {
            mode: FusionMode::Rrf,
            ..Default::default()
        };
        assert!(rank_candidates(vec![c], &cfg).is_err());
    }

    #[test]
    fn fidelity_mode_signed_and_unsigned() {
        let cands = vec![cand("neg", -0.9, 0.0), cand("pos", 0.5, 0.0)];
        let mut cfg = FusionConfig {
            mode: FusionMode::FidelityRerank,
            ..Default::default()
        };
        let out = rank_candidates(cands.clone(), &cfg).unwrap();
        assert_eq!(out[0].chunk_id, "pos");
        assert_abs_diff_eq!(out[1].fused, -0.81, epsilon = 1e-12);
        cfg.signed_fidelity = false;
        let out = rank_candidates(cands, &cfg).unwrap();
        assert_eq!(out[0].chunk_id, "neg");
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in FusionMode::ALL {
            assert_eq!(m.as_str().parse::<FusionMode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("bogus".parse::<FusionMode>().is_err());
    }

    proptest! {
        #[test]
        fn fidelity_bounded_symmetric(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8)) {
            prop_assume!(l2_norm(&a) > 1e-6 && l2_norm(&b) > 1e-6);
            let (sa, sb) = (state(&a), state(&b));
            let f = fidelity(&sa, &sb).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f, fidelity(&sb, &sa).unwrap());
            prop_assert!((fidelity(&sa, &sa).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn interference_bounded(c in -1.0f64..=1.0, l in 0.0f64..=1.0, w in 0.0f64..=1.0) {
            let s = interference_score(c, l, w, 1.0 - w).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(interference_score(c, l, 1.0, 0.0).unwrap(), (c * c).clamp(0.0, 1.0));
        }

        #[test]
        fn rrf_rank_improvement_never_hurts(n in 2usize..30, from in 1usize..30, to in 0usize..30, k in 1usize..100) {
            let from = from.min(n - 1);
            let to = to.min(from);
            let base: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
            let target = base[from].clone();
            let mut moved = base.clone();
            let item = moved.remove(from);
            moved.insert(to, item);
            let other = vec![format!("d{}", n - 1)];
            let before = fuse_rrf(&[base, other.clone()], k)[&target];
            let after = fuse_rrf(&[moved, other], k)[&target];
            prop_assert!(after >= before);
        }
    }
}
