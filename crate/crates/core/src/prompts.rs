//! Default system prompts, one per pipeline stage, each with five examples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::llm::{PromptTemplate, Shot};

/// The full set of stage prompts. Loadable from JSON to swap wording
/// without rebuilding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub intent: PromptTemplate,
    pub analyzer: PromptTemplate,
    pub relative: PromptTemplate,
    pub correction_objects: PromptTemplate,
    pub correction: PromptTemplate,
    pub end_effector: PromptTemplate,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            intent: intent(),
            analyzer: analyzer(),
            relative: relative(),
            correction_objects: correction_objects(),
            correction: correction(),
            end_effector: end_effector(),
        }
    }
}

impl PromptSet {
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

fn shots(pairs: [(&str, &str); 5]) -> Vec<Shot> {
    pairs.into_iter().map(|(i, o)| Shot::new(i, o)).collect()
}

pub fn intent() -> PromptTemplate {
    PromptTemplate::new(
        "intent",
        "You route messages from a robot operator. The operator is choosing where a humanoid robot \
         should put one of its hands or feet, shown as a point on a camera image.\n\
         Label the message with exactly one category:\n\
         - Prediction: the operator asks for a new contact location.\n\
         - Correction: the operator wants the current point moved or adjusted.\n\
         - Confirmation: the operator accepts the current point.\n\
         Answer with a JSON object {\"category\": \"Prediction\" | \"Correction\" | \"Confirmation\"}.",
        shots([
            ("Put your left hand on the table.", r#"{"category": "Prediction"}"#),
            ("A little further up.", r#"{"category": "Correction"}"#),
            ("Yes, that is the right spot.", r#"{"category": "Confirmation"}"#),
            ("Lean on the wall next to the door.", r#"{"category": "Prediction"}"#),
            ("Shift it toward the lamp.", r#"{"category": "Correction"}"#),
        ]),
    )
    .expect("five shots")
}

pub fn analyzer() -> PromptTemplate {
    PromptTemplate::new(
        "analyzer",
        "You read contact instructions for a humanoid robot. Decide whether the requested contact is \
         ON an object (Absolute) or described by its spatial relation to one or more objects \
         (Relative), and list the object descriptions exactly as a vision model should look for them.\n\
         First explain your reasoning in chain_of_thought, then give the answer.\n\
         Answer with a JSON object {\"chain_of_thought\": string, \"objects\": [string], \
         \"position_type\": \"Absolute\" | \"Relative\"}.",
        shots([
            (
                "Put your hand on the laptop.",
                r#"{"chain_of_thought": "The contact is on the laptop itself.", "objects": ["laptop"], "position_type": "Absolute"}"#,
            ),
            (
                "Lean on the table to the right of the vase.",
                r#"{"chain_of_thought": "The contact is placed relative to the vase.", "objects": ["vase"], "position_type": "Relative"}"#,
            ),
            (
                "Place your foot between the two boxes, the red box and the blue box.",
                r#"{"chain_of_thought": "Between two objects is a relation.", "objects": ["red box", "blue box"], "position_type": "Relative"}"#,
            ),
            (
                "Use the top of the green chair for support.",
                r#"{"chain_of_thought": "The contact is on the chair.", "objects": ["green chair"], "position_type": "Absolute"}"#,
            ),
            (
                "Put your left hand just below the shelf.",
                r#"{"chain_of_thought": "Below the shelf is relative to the shelf.", "objects": ["shelf"], "position_type": "Relative"}"#,
            ),
        ]),
    )
    .expect("five shots")
}

pub fn relative() -> PromptTemplate {
    PromptTemplate::new(
        "relative",
        "You place contact points on a {width}x{height} pixel image. The origin is the top-left corner, \
         x grows to the right and y grows downward. Objects are given as \"<Object> is at [x,y] with \
         width=w and height=h\" where [x,y] is the top-left corner of the bounding box.\n\
         Work out where the instruction puts the contact. Do not compute the result yourself: give one \
         arithmetic expression per coordinate using only numbers, + - * / and parentheses.\n\
         Answer with a JSON object {\"chain_of_thought\": string, \"x\": string, \"y\": string}.",
        shots([
            (
                "Cup is at [100,150] with width=120 and height=90. Place your hand left from the cup.",
                r#"{"chain_of_thought": "Left of the cup: half a width left of its left edge, vertically centered.", "x": "100 - 120/2", "y": "150 + 90/2"}"#,
            ),
            (
                "Box is at [400,200] with width=100 and height=100. Lean above the box.",
                r#"{"chain_of_thought": "Above the box: horizontally centered, half a height above the top edge.", "x": "400 + 100/2", "y": "200 - 100/2"}"#,
            ),
            (
                "Cup is at [100,300] with width=50 and height=50. Bowl is at [300,300] with width=50 and height=50. Put your hand between the cup and the bowl.",
                r#"{"chain_of_thought": "Midpoint of the two box centers.", "x": "((100 + 50/2) + (300 + 50/2))/2", "y": "((300 + 50/2) + (300 + 50/2))/2"}"#,
            ),
            (
                "Book is at [600,400] with width=200 and height=80. Place your hand right of the book.",
                r#"{"chain_of_thought": "Right of the book: half a width right of its right edge.", "x": "600 + 200 + 200/2", "y": "400 + 80/2"}"#,
            ),
            (
                "Plate is at [500,100] with width=120 and height=40. Put your foot under the plate.",
                r#"{"chain_of_thought": "Below the plate: centered, one height below the bottom edge.", "x": "500 + 120/2", "y": "100 + 40 + 40"}"#,
            ),
        ]),
    )
    .expect("five shots")
}

pub fn correction_objects() -> PromptTemplate {
    PromptTemplate::new(
        "correction_objects",
        "You read corrections to a contact point chosen on a camera image. List the objects the \
         correction mentions, as a vision model should look for them. Many corrections mention no \
         object at all; then return an empty list.\n\
         Answer with a JSON object {\"objects\": [string]}.",
        shots([
            ("Move closer to the cup.", r#"{"objects": ["cup"]}"#),
            ("A bit to the left.", r#"{"objects": []}"#),
            ("Go halfway toward the lamp.", r#"{"objects": ["lamp"]}"#),
            ("Now twice as far as last time.", r#"{"objects": []}"#),
            ("Put it between the bottle and the red mug instead.", r#"{"objects": ["bottle", "red mug"]}"#),
        ]),
    )
    .expect("five shots")
}

pub fn correction() -> PromptTemplate {
    PromptTemplate::new(
        "correction",
        "You correct a contact point on a {width}x{height} pixel image. The origin is the top-left \
         corner, x grows to the right and y grows downward. You receive the current target, any \
         objects mentioned (\"<Object> is at [x,y] with width=w and height=h\", [x,y] being the \
         top-left corner), the previous turns of the conversation and the operator's correction.\n\
         Give the corrected target as one arithmetic expression per coordinate using only numbers, \
         + - * / and parentheses, starting from the current target values.\n\
         Answer with a JSON object {\"chain_of_thought\": string, \"x\": string, \"y\": string}.",
        shots([
            (
                "Current target is at [300,200].\nCorrection: Move the target a bit to the right.",
                r#"{"chain_of_thought": "A bit to the right is a small positive x step.", "x": "300 + 40", "y": "200"}"#,
            ),
            (
                "Current target is at [500,500].\nCorrection: Go up a lot.",
                r#"{"chain_of_thought": "Up decreases y; a lot is a large step.", "x": "500", "y": "500 - 150"}"#,
            ),
            (
                "Current target is at [300,200].\nCup is at [100,150] with width=120 and height=90.\nCorrection: Move closer to the cup.",
                r#"{"chain_of_thought": "Halfway from the target to the cup center (160,195).", "x": "(300 + 160)/2", "y": "(200 + 195)/2"}"#,
            ),
            (
                "Current target is at [340,200].\nPrevious turns:\n1. \"Put your hand on the table.\" -> [300,200]\n2. \"Move to the right.\" -> [340,200]\nCorrection: Now, move twice as much as before.",
                r#"{"chain_of_thought": "The last move was +40 in x; twice that is +80.", "x": "340 + 80", "y": "200"}"#,
            ),
            (
                "Current target is at [250,420].\nCorrection: Slightly lower and a little to the left.",
                r#"{"chain_of_thought": "Lower increases y, left decreases x, both small.", "x": "250 - 20", "y": "420 + 20"}"#,
            ),
        ]),
    )
    .expect("five shots")
}

pub fn end_effector() -> PromptTemplate {
    PromptTemplate::new(
        "end_effector",
        "You configure a humanoid robot's next contact from the operator's original instruction. \
         Choose the end-effector (LeftHand, RightHand, LeftFoot, RightFoot) and the task type: \
         SupportContact when the limb braces or leans on a surface, Reach when it goes to an object \
         to touch or grasp it. When no limb is named, use RightHand.\n\
         Answer with a JSON object {\"end_effector\": string, \"task_type\": string}.",
        shots([
            ("Lean on the table with your left hand.", r#"{"end_effector": "LeftHand", "task_type": "SupportContact"}"#),
            ("Reach for the bottle with the right hand.", r#"{"end_effector": "RightHand", "task_type": "Reach"}"#),
            ("Put your left foot on the step.", r#"{"end_effector": "LeftFoot", "task_type": "SupportContact"}"#),
            ("Use your right hand to grab the handle.", r#"{"end_effector": "RightHand", "task_type": "Reach"}"#),
            ("Place your hand on the counter.", r#"{"end_effector": "RightHand", "task_type": "SupportContact"}"#),
        ]),
    )
    .expect("five shots")
}
