//! Turns instances into the exact prompt text sent to a model.
//!
//! Output uses LF line endings and ends with exactly one newline.

use serde::{Deserialize, Serialize};

use crate::labels::OptionLetter;
use crate::taskgen::{AstroInstance, CollisionInstance, Family, Payload, TaskInstance};

pub const DEFAULT_ANSWER_INSTRUCTION: &str =
    r#"Reply with a JSON object of the form {"answer": "<LETTER>"}."#;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplateConfig {
    pub family: Family,
    pub answer_instruction: String,
}

impl PromptTemplateConfig {
    pub fn for_family(family: Family) -> Self {
        PromptTemplateConfig {
            family,
            answer_instruction: DEFAULT_ANSWER_INSTRUCTION.to_string(),
        }
    }

    pub fn with_instruction(family: Family, instruction: &str) -> Result<Self, String> {
        if !instruction.contains("\"answer\"") {
            return Err("answer instruction must mention the \"answer\" key".into());
        }
        Ok(PromptTemplateConfig {
            family,
            answer_instruction: instruction.trim().to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub char_count: usize,
    pub option_letters: Vec<OptionLetter>,
    pub option_texts: Vec<String>,
}

impl RenderedPrompt {
    fn new(sections: Vec<String>, options: Vec<String>) -> Self {
        let mut text = sections.join("\n\n");
        text.push('\n');
        RenderedPrompt {
            char_count: text.chars().count(),
            option_letters: OptionLetter::first(options.len()),
            option_texts: options,
            text,
        }
    }
}

pub fn render(task: &TaskInstance, cfg: &PromptTemplateConfig) -> RenderedPrompt {
    match &task.payload {
        Payload::Astro(a) => render_astro(a, cfg),
        Payload::Collision(c) => render_collision(c, cfg),
    }
}

fn escape_cell(cell: &str) -> String {
    cell.replace('|', "\\|")
}

fn markdown_table(columns: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..columns.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain(std::iter::once(columns[c].chars().count()))
                .max()
                .unwrap_or(0)
                .max(3)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        format!("| {} |", padded.join(" | "))
    };
    let mut out = vec![line(columns)];
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w + 2)).collect();
    out.push(format!("|{}|", rule.join("|")));
    out.extend(rows.iter().map(|r| line(r)));
    out.join("\n")
}

fn options_block(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, text)| format!("{}) {}", OptionLetter::from_position(i), text))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_astro(inst: &AstroInstance, cfg: &PromptTemplateConfig) -> RenderedPrompt {
    let columns: Vec<String> = inst.columns.iter().map(|c| escape_cell(c)).collect();
    let rows: Vec<Vec<String>> = inst
        .rows
        .iter()
        .map(|r| r.cells.iter().map(|c| escape_cell(c)).collect())
        .collect();

    let names: Vec<&str> = inst.binding.keys().map(|v| v.as_str()).collect();
    let values: Vec<&str> = inst
        .binding
        .values()
        .map(|&row| inst.target_text(row))
        .collect();
    let binding = format!(
        "Consider the following {}:\n{} = {}",
        inst.target_column,
        names.join(", "),
        values.join(", ")
    );

    let mut swaps = String::from("Consider the following swapping:");
    if !inst.swaps.is_empty() {
        swaps.push_str("\n\n");
        let lines: Vec<String> = inst.swaps.iter().map(|op| format!("- {op}")).collect();
        swaps.push_str(&lines.join("\n"));
    }

    let options = inst.option_texts();
    let sections = vec![
        markdown_table(&columns, &rows),
        binding,
        swaps,
        format!(
            "The {} with the {} = {} is",
            inst.retrieve_column, inst.target_column, inst.query_var
        ),
        "The two candidate answers are:".to_string(),
        options_block(&options),
        format!("Reply:\n{}", cfg.answer_instruction),
    ];
    RenderedPrompt::new(sections, options)
}

const COLLISION_PROBLEM: &str = "Problem:\n\
Consider a one-dimensional system in which all particles\n\
move along a single line.";

const COLLISION_RULE: &str = "Key rule:\n\
- When two particles of equal mass collide elastically,\n\
they simply exchange velocities.\n\
(This means each particle leaves the collision with the\n\
other particle's incoming velocity.)";

pub fn render_collision(inst: &CollisionInstance, cfg: &PromptTemplateConfig) -> RenderedPrompt {
    let mut initial = String::from("Initial velocities:");
    for (label, v) in &inst.velocities {
        initial.push_str(&format!("\n{label} = {v}"));
    }
    let mut order = String::from("Collisions occur in the following order:");
    for (i, (a, b)) in inst.collisions.iter().enumerate() {
        order.push_str(&format!("\n{}. {a} collides with {b}", i + 1));
    }
    let options = inst.option_texts();
    let sections = vec![
        COLLISION_PROBLEM.to_string(),
        COLLISION_RULE.to_string(),
        initial,
        order,
        format!(
            "Question:\n- What is the velocity of {}?",
            inst.query_particle
        ),
        format!("Options:\n{}", options_block(&options)),
        format!("Answer:\n{}", cfg.answer_instruction),
    ];
    RenderedPrompt::new(sections, options)
}

/// Reads the option letters back out of a rendered prompt: every line of the
/// form `X) ...` where `X` is a single capital letter.
pub fn extract_option_letters(text: &str) -> Vec<OptionLetter> {
    text.lines()
        .filter_map(|line| {
            let (head, _) = line.split_once(") ")?;
            OptionLetter::parse(head)
        })
        .collect()
}
