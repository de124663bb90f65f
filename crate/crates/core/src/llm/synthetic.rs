//! Offline stand-in for a language model.
//!
//! Each proposal is a first-order baseline mutation rendered as edits. With
//! probability `defect_rate` a proposal is damaged in one of the ways real
//! models fail: an unknown element id, a lost destination, an invented
//! variable, a broken expression, or a truncated object.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::client::{estimate_tokens, modeled_latency, LlmClient, LlmError, LlmRequest, LlmResponse, Usage};
use super::Strategy;
use crate::baseline::{mutate_once, operators_for};
use crate::chart::{Chart, ElementKind};

pub struct SyntheticClient {
    pub defect_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
enum Defect {
    UnknownId,
    LostDest,
    InventedVariable,
    BrokenExpression,
    Truncated,
}

impl SyntheticClient {
    fn rng(&self, prompt: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(prompt.as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes) ^ self.seed)
    }

    /// Edits for one mutation of `chart` under `strategy`.
    fn mutation(chart: &Chart, strategy: &Strategy, rng: &mut ChaCha8Rng) -> Vec<Value> {
        let mut mutant = chart.clone();
        let touched: Vec<(ElementKind, String)> = match strategy {
            Strategy::Global => match mutate_once(&mut mutant, rng) {
                Ok(records) => {
                    let mut t: Vec<_> = records.into_iter().map(|r| (r.kind, r.element_id)).collect();
                    t.dedup();
                    t
                }
                Err(_) => vec![],
            },
            Strategy::Local(id) => {
                let kind = chart.element_kind(id).unwrap_or(ElementKind::State);
                // a priority swap would also edit a sibling
                let mut ops: Vec<_> = operators_for(kind).filter(|o| o.id != "T9").collect();
                ops.shuffle(rng);
                for op in ops {
                    if op.apply(&mut mutant, id, rng).is_some() {
                        break;
                    }
                }
                vec![(kind, id.clone())]
            }
        };
        touched
            .into_iter()
            .filter_map(|(kind, id)| {
                let replacement = mutant.element_json(kind, &id)?;
                Some(json!({"kind": kind, "id": id, "replacement": replacement}))
            })
            .collect()
    }

    fn damage(edits: &mut [Value], defect: Defect) {
        let Some(edit) = edits.first_mut() else { return };
        let is_transition = edit["kind"] == "transition";
        match defect {
            Defect::UnknownId => {
                let id = edit["id"].as_str().unwrap_or("X").to_string();
                edit["id"] = format!("{id}_99").into();
            }
            Defect::LostDest => edit["replacement"]["dest"] = Value::Null,
            Defect::InventedVariable if is_transition => {
                edit["replacement"]["condition"] = "GHOST_SIGNAL > 3".into();
            }
            Defect::InventedVariable => push_action(edit, "entry", "GHOST_SIGNAL = 1"),
            Defect::BrokenExpression if is_transition => {
                let cond = edit["replacement"]["condition"].as_str().unwrap_or("true").to_string();
                edit["replacement"]["condition"] = format!("{cond} && (").into();
            }
            Defect::BrokenExpression => push_action(edit, "during", "= 1"),
            Defect::Truncated => {}
        }
    }
}

fn push_action(edit: &mut Value, slot: &str, action: &str) {
    if let Some(list) = edit["replacement"][slot].as_array_mut() {
        list.push(action.into());
    }
}

impl LlmClient for SyntheticClient {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let chart = req
            .chart
            .as_ref()
            .ok_or_else(|| LlmError::BadResponse("synthetic client needs the chart alongside the prompt".into()))?;
        let mut rng = self.rng(&req.prompt);
        let mut parts = Vec::with_capacity(req.n_mutants);
        for _ in 0..req.n_mutants {
            let mut edits = Self::mutation(chart, &req.strategy, &mut rng);
            let mut truncated = false;
            if rng.random::<f64>() < self.defect_rate {
                let transition = edits.first().is_some_and(|e| e["kind"] == "transition");
                let mut options =
                    vec![Defect::UnknownId, Defect::InventedVariable, Defect::BrokenExpression, Defect::Truncated];
                if transition {
                    options.push(Defect::LostDest);
                }
                let defect = options[rng.random_range(0..options.len())];
                truncated = matches!(defect, Defect::Truncated);
                Self::damage(&mut edits, defect);
            }
            let mut text = json!({"edits": edits}).to_string();
            if truncated {
                let mut cut = text.len() / 2;
                while !text.is_char_boundary(cut) {
                    cut -= 1;
                }
                text.truncate(cut);
            }
            parts.push(text);
        }
        let text = format!("Here are the requested mutants.\n```json\n[\n{}\n]\n```\n", parts.join(",\n"));
        let usage = Usage { prompt_tokens: estimate_tokens(&req.prompt), completion_tokens: estimate_tokens(&text) };
        Ok(LlmResponse { text, usage, latency_s: modeled_latency(usage), retries: 0 })
    }
}
