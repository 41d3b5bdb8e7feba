//! Offline fixtures for the four table-top scenarios: scripted language
//! model replies, canned heatmaps and boxes, and a synthetic depth plane.
#![allow(dead_code)]

use std::sync::Arc;

use contact_core::contact::{CameraExtrinsics, EffectorPoses, MemorySink, PointCloud, ResolverSettings};
use contact_core::llm::schema::ids;
use contact_core::llm::{LlmGateway, Matcher, ScriptRule, ScriptedBackend};
use contact_core::prompts::PromptSet;
use contact_core::session::{FrameBundle, Pipeline};
use contact_core::vision::{BoundingBox, FixtureVision, Heatmap, ImageRef, VisionGateway};
use nalgebra::{Matrix3, Rotation3, Vector3};
use serde_json::json;

pub const WIDTH: u32 = 320;
pub const HEIGHT: u32 = 240;
pub const CONFIRM: &str = "That's good, go ahead";

pub struct Scenario {
    pub name: &'static str,
    pub image: &'static str,
    /// Operator messages in order; the session is told the controller
    /// finished after every emitted task.
    pub utterances: Vec<&'static str>,
    pub tasks: usize,
}

pub fn scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "(a) book and cup",
            image: "book_table",
            utterances: vec![
                "Place your right hand on top of the book",
                CONFIRM,
                "with your left hand, reach for the cup",
                CONFIRM,
            ],
            tasks: 2,
        },
        Scenario {
            name: "(b) dishwasher rack",
            image: "dishwasher",
            utterances: vec![
                "Using your right hand, lean on top of the white surface",
                CONFIRM,
                "reach for the red plate, with the left hand",
                CONFIRM,
            ],
            tasks: 2,
        },
        Scenario {
            name: "(c) mallet and nail box",
            image: "workbench",
            utterances: vec![
                "Place your right hand right from the thing with the wooden handle",
                "Move more to the right",
                CONFIRM,
                "Reach for the nail box, with your left hand",
                CONFIRM,
            ],
            tasks: 2,
        },
        Scenario {
            name: "(d) cloth and cracker box",
            image: "cloth_table",
            utterances: vec![
                "Place your right hand on the white cloth",
                "A bit more to the left",
                "Go up a little",
                "Now a little further up",
                "Slightly to the right",
                "Move down a tiny bit",
                "A touch more to the left",
                CONFIRM,
                "with the left hand, reach the cheez it box",
                CONFIRM,
            ],
            tasks: 2,
        },
    ]
}

fn intent(text: &str, category: &str) -> ScriptRule {
    ScriptRule::for_schema(ids::INTENT, Matcher::Exact(text.into()), json!({ "category": category }).to_string())
}

fn analysis(text: &str, objects: &[&str], kind: &str) -> ScriptRule {
    ScriptRule::for_schema(
        ids::ANALYSIS,
        Matcher::Exact(text.into()),
        json!({"chain_of_thought": "scripted", "objects": objects, "position_type": kind}).to_string(),
    )
}

fn coords(correction: &str, x: &str, y: &str) -> ScriptRule {
    ScriptRule::for_schema(
        ids::COORDINATES,
        Matcher::Contains(correction.into()),
        json!({"chain_of_thought": "scripted", "x": x, "y": y}).to_string(),
    )
}

fn effector(text: &str, limb: &str, task: &str) -> ScriptRule {
    ScriptRule::for_schema(
        ids::END_EFFECTOR,
        Matcher::Exact(text.into()),
        json!({"end_effector": limb, "task_type": task}).to_string(),
    )
}

pub fn script() -> Vec<ScriptRule> {
    let predictions = [
        "Place your right hand on top of the book",
        "with your left hand, reach for the cup",
        "Using your right hand, lean on top of the white surface",
        "reach for the red plate, with the left hand",
        "Place your right hand right from the thing with the wooden handle",
        "Reach for the nail box, with your left hand",
        "Place your right hand on the white cloth",
        "with the left hand, reach the cheez it box",
    ];
    let corrections = [
        "Move more to the right",
        "A bit more to the left",
        "Go up a little",
        "Now a little further up",
        "Slightly to the right",
        "Move down a tiny bit",
        "A touch more to the left",
    ];
    let mut rules: Vec<ScriptRule> = predictions.iter().map(|t| intent(t, "Prediction")).collect();
    rules.extend(corrections.iter().map(|t| intent(t, "Correction")));
    rules.push(intent(CONFIRM, "Confirmation"));
    rules.extend([
        analysis(predictions[0], &["book"], "Absolute"),
        analysis(predictions[1], &["cup"], "Absolute"),
        analysis(predictions[2], &["white surface"], "Absolute"),
        analysis(predictions[3], &["red plate"], "Absolute"),
        analysis(predictions[4], &["thing with the wooden handle"], "Relative"),
        analysis(predictions[5], &["nail box"], "Absolute"),
        analysis(predictions[6], &["white cloth"], "Absolute"),
        analysis(predictions[7], &["cheez it box"], "Absolute"),
    ]);
    rules.push(ScriptRule::for_schema(ids::OBJECTS, Matcher::Any, json!({"objects": []}).to_string()));
    rules.extend([
        // Relative placement right of the mallet box {120, 150, 80, 30}.
        coords(
            "Thing with the wooden handle is at [120,150] with width=80 and height=30. Place your right hand right",
            "120 + 80 + 20",
            "150 + 30/2",
        ),
        coords("Correction: Move more to the right", "220 + 25", "165"),
        // Cloth walk from (160, 150).
        coords("Correction: A bit more to the left", "160 - 20", "150"),
        coords("Correction: Go up a little", "140", "150 - 15"),
        coords("Correction: Now a little further up", "140", "135 - 15"),
        coords("Correction: Slightly to the right", "140 + 10", "120"),
        coords("Correction: Move down a tiny bit", "150", "120 + 5"),
        coords("Correction: A touch more to the left", "150 - 7.5", "125"),
    ]);
    rules.extend([
        effector(predictions[0], "RightHand", "SupportContact"),
        effector(predictions[1], "LeftHand", "Reach"),
        effector(predictions[2], "RightHand", "SupportContact"),
        effector(predictions[3], "LeftHand", "Reach"),
        effector(predictions[4], "RightHand", "SupportContact"),
        effector(predictions[5], "LeftHand", "Reach"),
        effector(predictions[6], "RightHand", "SupportContact"),
        effector(predictions[7], "LeftHand", "Reach"),
    ]);
    rules
}

/// Gaussian blob peaking at exactly 1.0 on `(cu, cv)`.
pub fn blob(cu: u32, cv: u32, sigma: f32) -> Heatmap {
    let values = (0..HEIGHT)
        .flat_map(|v| (0..WIDTH).map(move |u| (u, v)))
        .map(|(u, v)| {
            let d2 = (u as f32 - cu as f32).powi(2) + (v as f32 - cv as f32).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    Heatmap::new(WIDTH, HEIGHT, values).unwrap()
}

pub fn vision() -> FixtureVision {
    FixtureVision::new()
        .with_heatmap("book_table", "book", blob(110, 140, 12.0))
        .with_heatmap("book_table", "cup", blob(230, 120, 6.0))
        .with_heatmap("dishwasher", "white surface", blob(160, 60, 30.0))
        .with_heatmap("dishwasher", "red plate", blob(150, 190, 10.0))
        .with_box("workbench", "thing with the wooden handle", BoundingBox::new("", 120.0, 150.0, 80.0, 30.0, 0.71))
        .with_box("workbench", "thing with the wooden handle", BoundingBox::new("", 10.0, 10.0, 20.0, 20.0, 0.2))
        .with_heatmap("workbench", "nail box", blob(60, 180, 8.0))
        .with_heatmap("cloth_table", "white cloth", blob(160, 150, 40.0))
        .with_heatmap("cloth_table", "cheez it box", blob(280, 90, 9.0))
}

/// Pinhole back-projection of a tilted table plane, with a regular pattern
/// of depth holes.
pub fn cloud() -> PointCloud {
    let (f, cx, cy) = (300.0, WIDTH as f64 / 2.0, HEIGHT as f64 / 2.0);
    let points = (0..HEIGHT)
        .flat_map(|v| (0..WIDTH).map(move |u| (u, v)))
        .map(|(u, v)| {
            if (u * 7 + v * 3) % 11 == 0 {
                return None;
            }
            let z = 1.1 + 0.002 * v as f64;
            Some(Vector3::new((u as f64 - cx) * z / f, (v as f64 - cy) * z / f, z))
        })
        .collect();
    PointCloud::new(WIDTH, HEIGHT, points).unwrap()
}

/// Camera on the head, looking forward and pitched 35 degrees down.
pub fn extrinsics() -> CameraExtrinsics {
    // Optical axes (x right, y down, z forward) into robot axes (x forward,
    // y left, z up).
    let optical = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    let pitch = Rotation3::from_euler_angles(0.0, 35f64.to_radians(), 0.0).into_inner();
    CameraExtrinsics::new(Vector3::new(0.08, 0.0, 1.45), pitch * optical).unwrap()
}

pub fn frame(image: &str) -> FrameBundle {
    FrameBundle::new(
        ImageRef::blank(image, WIDTH, HEIGHT).unwrap(),
        cloud(),
        extrinsics(),
        EffectorPoses::default(),
    )
    .unwrap()
}

pub fn pipeline() -> (Pipeline, Arc<MemorySink>, Arc<FixtureVision>) {
    let store = Arc::new(vision());
    let sink = Arc::new(MemorySink::new());
    let llm = LlmGateway::with_builtin_schemas(Arc::new(ScriptedBackend::new(script())));
    let pipeline = Pipeline::new(
        llm,
        VisionGateway::new(store.clone(), store.clone()),
        &PromptSet::default(),
        ResolverSettings::default(),
        sink.clone(),
    )
    .unwrap();
    (pipeline, sink, store)
}
