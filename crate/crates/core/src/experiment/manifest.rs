//! Fine-tuning hyperparameters handed to external training tooling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelLabel {
    #[serde(rename = "LYRA-L")]
    LyraL,
    #[serde(rename = "LYRA-G")]
    LyraG,
    #[serde(rename = "LYRA-M")]
    LyraM,
    #[serde(rename = "NLLB")]
    Nllb,
}

impl ModelLabel {
    pub const ALL: [ModelLabel; 4] = [
        ModelLabel::LyraL,
        ModelLabel::LyraG,
        ModelLabel::LyraM,
        ModelLabel::Nllb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelLabel::LyraL => "LYRA-L",
            ModelLabel::LyraG => "LYRA-G",
            ModelLabel::LyraM => "LYRA-M",
            ModelLabel::Nllb => "NLLB",
        }
    }

    pub fn base_model(self) -> &'static str {
        match self {
            ModelLabel::LyraL => "Llama-3.1-8B",
            ModelLabel::LyraG => "gemma-2-9b",
            ModelLabel::LyraM => "Mistral-Nemo-Instruct-2407",
            ModelLabel::Nllb => "nllb-200-distilled-1.3B",
        }
    }
}

impl fmt::Display for ModelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelLabel {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelLabel::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                ExperimentError::Config(format!(
                    "unknown model label {s:?} (expected LYRA-L, LYRA-G, LYRA-M or NLLB)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub r: u32,
    pub lora_alpha: u32,
    pub lora_dropout: f64,
    pub bias: String,
    pub target_modules: Vec<String>,
    pub use_rslora: bool,
    pub loftq_config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub monitor: String,
    /// The validation split is not derived here; training tooling must supply it.
    pub validation_split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: u32,
    pub num_epochs: u32,
    pub early_stopping: EarlyStopping,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optim: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_scheduler_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_seq_length: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_on_completions_only: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub model_label: ModelLabel,
    pub base_model: String,
    pub architecture: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantization: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lora: Option<LoraConfig>,
    pub training: TrainingConfig,
    pub hardware: String,
}

const TARGET_MODULES: [&str; 7] = [
    "q_proj",
    "k_proj",
    "v_proj",
    "o_proj",
    "gate_proj",
    "up_proj",
    "down_proj",
];

fn early_stopping() -> EarlyStopping {
    EarlyStopping {
        monitor: "validation_loss".into(),
        validation_split: "external input (required)".into(),
    }
}

pub fn generate_training_manifest(label: ModelLabel) -> TrainingManifest {
    let hardware = "1x NVIDIA A100 40GB".to_string();
    if label == ModelLabel::Nllb {
        return TrainingManifest {
            model_label: label,
            base_model: label.base_model().into(),
            architecture: "encoder-decoder".into(),
            quantization: None,
            library: None,
            lora: None,
            training: TrainingConfig {
                learning_rate: 1e-5,
                batch_size: 32,
                num_epochs: 10,
                early_stopping: early_stopping(),
                packing: None,
                warmup_steps: None,
                optim: None,
                weight_decay: None,
                lr_scheduler_type: None,
                max_seq_length: None,
                train_on_completions_only: None,
            },
            hardware,
        };
    }
    let learning_rate = if label == ModelLabel::LyraG { 3e-5 } else { 1e-5 };
    TrainingManifest {
        model_label: label,
        base_model: label.base_model().into(),
        architecture: "decoder-only".into(),
        quantization: Some("4bit".into()),
        library: Some("unsloth".into()),
        lora: Some(LoraConfig {
            r: 16,
            lora_alpha: 16,
            lora_dropout: 0.0,
            bias: "none".into(),
            target_modules: TARGET_MODULES.iter().map(|s| s.to_string()).collect(),
            use_rslora: true,
            loftq_config: None,
        }),
        training: TrainingConfig {
            learning_rate,
            batch_size: 48,
            num_epochs: 10,
            early_stopping: early_stopping(),
            packing: Some(false),
            warmup_steps: Some(100),
            optim: Some("adamw_8bit".into()),
            weight_decay: Some(0.01),
            lr_scheduler_type: Some("cosine".into()),
            max_seq_length: Some(2048),
            train_on_completions_only: Some(true),
        },
        hardware,
    }
}
