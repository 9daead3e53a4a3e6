//! Prompt texts, stored verbatim under `prompts/` and versioned by file name.

use crate::error::{Error, Result};

pub const PROMPT_VERSION: &str = "v1";

const SCU_INSTRUCTION_V1: &str = include_str!("../../prompts/scu_instruction.v1.txt");
const SCU_ONE_SHOT_V1: &str = include_str!("../../prompts/scu_extraction.v1.txt");
const GENERATE_CNNDM_V1: &str = include_str!("../../prompts/generate_cnndm.v1.txt");
const GENERATE_XSUM_V1: &str = include_str!("../../prompts/generate_xsum.v1.txt");

/// A worked input/output pair shown to the extractor model.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ShotExample {
    pub input: String,
    pub output: String,
}

fn example_block(ex: &ShotExample) -> String {
    format!(
        "Example inputs:\n{}\nExample outputs:\n{}\n",
        ex.input.trim_end(),
        ex.output.trim_end()
    )
}

fn check_version(version: &str) -> Result<()> {
    if version == PROMPT_VERSION {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown prompt version {version:?} (available: {PROMPT_VERSION})"
        )))
    }
}

/// System prompt for SCU extraction with `shots` worked examples.
///
/// One shot is the stored prompt file unchanged. Zero shots drops the
/// example. Three shots appends the two caller-supplied examples after the
/// built-in one; the built-in prompt ships only a single example.
pub fn scu_prompt(version: &str, shots: u8, extra: &[ShotExample]) -> Result<String> {
    check_version(version)?;
    match shots {
        0 => Ok(SCU_INSTRUCTION_V1.to_string()),
        1 => Ok(SCU_ONE_SHOT_V1.to_string()),
        3 => {
            if extra.len() != 2 {
                return Err(Error::Config(format!(
                    "3-shot extraction needs 2 additional examples, got {}",
                    extra.len()
                )));
            }
            let mut p = SCU_ONE_SHOT_V1.to_string();
            for ex in extra {
                p.push_str(&example_block(ex));
            }
            Ok(p)
        }
        n => Err(Error::Config(format!("shots must be 0, 1 or 3, got {n}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationPrompt {
    Cnndm,
    Xsum,
}

impl GenerationPrompt {
    pub fn text(self, version: &str) -> Result<&'static str> {
        check_version(version)?;
        Ok(match self {
            GenerationPrompt::Cnndm => GENERATE_CNNDM_V1,
            GenerationPrompt::Xsum => GENERATE_XSUM_V1,
        }
        .trim_end())
    }
}
