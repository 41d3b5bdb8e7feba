//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use contact_core::bench::{random_baseline, DatasetRecord, Mask, Summary};
use contact_core::contact::{
    hermite, plan_trajectory, Acknowledgement, CameraExtrinsics, ContactError, ContactTask, EffectorPoses,
    EndEffector, PointCloud, ResolverSettings, TaskSink,
};
use contact_core::expr::{evaluate, parse, parse_bytes};
use contact_core::llm::schema::ids;
use contact_core::llm::{LlmGateway, Matcher, ScriptRule, ScriptedBackend};
use contact_core::par::Execution;
use contact_core::prediction::{PixelPoint, PositionType};
use contact_core::prompts::{self, PromptSet};
use contact_core::session::{PracticeError, PracticeTrial, PROMPT_BUDGET};
use contact_core::session::{EventKind, FrameBundle, Phase, Pipeline, Session, SessionError};
use contact_core::vision::{FixtureVision, Heatmap, ImageRef, VisionGateway};
use contact_core::Predictor;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

// ---------------------------------------------------------------------------
// Expression evaluator

/// Independent evaluator working directly on the text.
struct Oracle<'a> {
    s: &'a [u8],
    i: usize,
}

#[derive(Debug, PartialEq)]
enum OracleError {
    Syntax,
    ZeroDivisor,
}

impl Oracle<'_> {
    fn run(text: &str) -> Result<f64, OracleError> {
        let mut o = Oracle { s: text.as_bytes(), i: 0 };
        let v = o.sum()?;
        o.ws();
        if o.i != o.s.len() {
            return Err(OracleError::Syntax);
        }
        Ok(v)
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<f64, OracleError> {
        let mut acc = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let rhs = self.product()?;
            acc = if c == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<f64, OracleError> {
        let mut acc = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let rhs = self.unary()?;
            if c == b'*' {
                acc *= rhs;
            } else if rhs == 0.0 {
                return Err(OracleError::ZeroDivisor);
            } else {
                acc /= rhs;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<f64, OracleError> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Some(b'(') => {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(OracleError::Syntax);
                }
                self.i += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.i;
                while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                    self.i += 1;
                }
                std::str::from_utf8(&self.s[start..self.i])
                    .unwrap()
                    .parse()
                    .map_err(|_| OracleError::Syntax)
            }
            _ => Err(OracleError::Syntax),
        }
    }
}

fn spaces(rng: &mut ChaCha8Rng) -> &'static str {
    ["", "", "", " ", "  ", "\t", " \n"][rng.random_range(0..7)]
}

fn literal(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..6) {
        0 => "0".into(),
        1 => format!("{}", rng.random_range(0..10)),
        2 => format!("{}", rng.random_range(0..2000)),
        3 => format!("{}.{}", rng.random_range(0..500), rng.random_range(0..1000)),
        4 => format!(".{}", rng.random_range(0..100)),
        _ => format!("{}.", rng.random_range(0..100)),
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return literal(rng);
    }
    let ws = |rng: &mut ChaCha8Rng| spaces(rng);
    match rng.random_range(0..6) {
        0 => format!("-{}{}", ws(rng), random_expr(rng, depth - 1)),
        1 => format!("({}{}{})", ws(rng), random_expr(rng, depth - 1), ws(rng)),
        k => {
            let op = ["+", "-", "*", "/"][k - 2];
            let lhs = random_expr(rng, depth - 1);
            let (a, b) = (ws(rng), ws(rng));
            format!("{lhs}{a}{op}{b}{}", random_expr(rng, depth - 1))
        }
    }
}

fn expression_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut divisions = 0;
    for n in 0..10_000 {
        let text = format!("{}{}{}", spaces(&mut rng), random_expr(&mut rng, 6), spaces(&mut rng));
        let ours = parse(&text).map_err(|e| format!("#{n} {text:?} rejected: {e}"))?;
        let expected = Oracle::run(&text);
        match (evaluate(&ours), expected) {
            (Ok(a), Ok(b)) => ensure(a.to_bits() == b.to_bits(), || format!("#{n} {text:?}: {a:e} vs oracle {b:e}"))?,
            (Err(_), Err(OracleError::ZeroDivisor)) => divisions += 1,
            (ours, oracle) => return Err(format!("#{n} {text:?}: {ours:?} vs oracle {oracle:?}")),
        }
    }

    let alphabet = b"0123456789.+-*/() \t\n";
    let mut accepted = 0usize;
    let mut buf = Vec::with_capacity(64);
    for n in 0..1_000_000u32 {
        buf.clear();
        let len = rng.random_range(0..48);
        for _ in 0..len {
            buf.push(if rng.random_bool(0.8) {
                alphabet[rng.random_range(0..alphabet.len())]
            } else {
                rng.random::<u8>()
            });
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| parse_bytes(&buf).map(|ast| evaluate(&ast))));
        match outcome {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(_)) => {}
            Err(_) => return Err(format!("parse panicked on fuzz input #{n}: {buf:?}")),
        }
    }
    for deep in [300usize, 100_000] {
        for input in ["(".repeat(deep), "-".repeat(deep) + "1", format!("{}1{}", "(".repeat(deep), ")".repeat(deep))] {
            let result = catch_unwind(|| parse(&input)).map_err(|_| format!("parse panicked on nesting {deep}"))?;
            ensure(result.is_err(), || format!("nesting {deep} accepted"))?;
        }
    }
    within_time(started, Duration::from_secs(60))?;
    Ok(format!(
        "10000 expressions bit-exact ({divisions} division-by-zero agreed), 1000000 fuzz inputs ({accepted} parsed), {:.1?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// Heatmap argmax

fn scan_argmax(map: &Heatmap) -> PixelPoint {
    let mut best = (0u32, 0u32);
    let mut top = f32::NEG_INFINITY;
    for v in 0..map.height() {
        for u in 0..map.width() {
            if map.get(u, v) > top {
                top = map.get(u, v);
                best = (u, v);
            }
        }
    }
    PixelPoint::new(best.0, best.1)
}

fn argmax_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1280);
    let llm = LlmGateway::with_builtin_schemas(Arc::new(ScriptedBackend::new(Vec::new())));
    let mut ties = 0;
    for n in 0..1000 {
        let (w, h) = if n % 10 == 0 {
            (1280, 720)
        } else {
            (rng.random_range(1..=1280), rng.random_range(1..=720))
        };
        let mut map = Heatmap::zeros(w, h);
        let levels = [0.25f32, 0.5, 0.75, 1.0];
        let count = rng.random_range(1..=64);
        for _ in 0..count {
            let level = levels[rng.random_range(0..levels.len())];
            map.set(rng.random_range(0..w), rng.random_range(0..h), level);
        }
        let expected = scan_argmax(&map);
        let top = map.get(expected.u, expected.v);
        if map.values().iter().filter(|x| **x == top).count() > 1 {
            ties += 1;
        }
        let image = ImageRef::blank("scene", w, h).map_err(|e| e.to_string())?;
        let store = Arc::new(FixtureVision::new().with_heatmap("scene", "target", map));
        let vision = VisionGateway::new(store.clone(), store);
        let execution = if n % 2 == 0 { Execution::Parallel } else { Execution::Sequential };
        let predictor = Predictor::new(llm.clone(), vision, &prompts::analyzer(), prompts::relative())
            .map_err(|e| e.to_string())?
            .with_execution(execution);
        let got = predictor.predict_absolute(&image, "target").map_err(|e| format!("#{n}: {e}"))?;
        ensure(got == expected, || format!("#{n} {w}x{h}: {got:?} vs scan {expected:?}"))?;
    }
    within_time(started, Duration::from_secs(60))?;
    Ok(format!("1000 heatmaps, {ties} with tied maxima, {:.1?}", started.elapsed()))
}

// ---------------------------------------------------------------------------
// Geometry

fn random_extrinsics(rng: &mut ChaCha8Rng) -> CameraExtrinsics {
    let q = loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let norm = q.norm();
        if norm > 0.1 && norm <= 1.0 {
            break q;
        }
    };
    let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    let origin = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    CameraExtrinsics::new(origin, rotation).expect("unit quaternion gives a rotation")
}

fn random_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.1..6.0))
}

/// Brute-force nearest present cell: Chebyshev ring, then squared
/// Euclidean distance, then row, then column.
fn nearest_present(cloud: &PointCloud, p: PixelPoint, radius: u32) -> Option<PixelPoint> {
    let mut best: Option<((i64, i64, u32, u32), PixelPoint)> = None;
    for v in 0..cloud.height() {
        for u in 0..cloud.width() {
            if cloud.get(u, v).is_none() {
                continue;
            }
            let (du, dv) = (u as i64 - p.u as i64, v as i64 - p.v as i64);
            let cheb = du.abs().max(dv.abs());
            if cheb > radius as i64 {
                continue;
            }
            let key = (cheb, du * du + dv * dv, v, u);
            if best.is_none_or(|(k, _)| key < k) {
                best = Some((key, PixelPoint::new(u, v)));
            }
        }
    }
    best.map(|(_, p)| p)
}

fn geometry_suite() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for n in 0..10_000 {
        let ext = random_extrinsics(&mut rng);
        let (p, q) = (random_point(&mut rng), random_point(&mut rng));
        let (fp, fq) = (ext.camera_to_robot(p), ext.camera_to_robot(q));
        let errors = [
            ((fp - fq).norm() - (p - q).norm()).abs(),
            (ext.robot_to_camera(fp) - p).amax(),
            (fp - (ext.rotation() * p + ext.origin())).amax(),
        ];
        for e in errors {
            worst = worst.max(e);
            ensure(e <= 1e-9, || format!("extrinsics #{n}: error {e:e}"))?;
        }
    }

    let mut substituted = 0;
    let mut missing = 0;
    for n in 0..1000 {
        let (w, h) = (rng.random_range(1..=48), rng.random_range(1..=36));
        let density = rng.random_range(0.0..0.3);
        let mut cloud = PointCloud::empty(w, h);
        for v in 0..h {
            for u in 0..w {
                if rng.random_bool(density) {
                    cloud.set(u, v, Some(Vector3::new(u as f64, v as f64, 1.0 + rng.random::<f64>())));
                }
            }
        }
        for _ in 0..8 {
            let p = PixelPoint::new(rng.random_range(0..w), rng.random_range(0..h));
            let radius = rng.random_range(0..=12);
            match (cloud.pixel_to_camera(p, radius), nearest_present(&cloud, p, radius)) {
                (Ok(got), Some(src)) => {
                    ensure(got.source == src && got.point == cloud.get(src.u, src.v).unwrap(), || {
                        format!("cloud #{n} at {p:?} r={radius}: {:?} vs oracle {src:?}", got.source)
                    })?;
                    ensure(got.substituted == (src != p), || format!("cloud #{n}: substitution flag"))?;
                    substituted += got.substituted as usize;
                }
                (Err(ContactError::NoDepth { .. }), None) => missing += 1,
                (got, oracle) => return Err(format!("cloud #{n} at {p:?} r={radius}: {got:?} vs oracle {oracle:?}")),
            }
        }
    }
    Ok(format!(
        "10000 extrinsics, max error {worst:.1e}; 8000 lookups on 1000 clouds ({substituted} substituted, {missing} without depth), {:.1?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// Trajectory

fn trajectory_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (duration, rate) = (4.0, 1000.0);
    let dt = 1.0 / rate;
    let (mut worst_second, mut worst_first, mut worst_mid) = (0.0f64, 0.0f64, 0.0f64);
    for n in 0..1000 {
        let start = random_point(&mut rng);
        let target = if n == 0 { start } else { random_point(&mut rng) };
        let traj = plan_trajectory(start, target, duration, rate).map_err(|e| e.to_string())?;
        let s = &traj.samples;
        ensure(s.len() == 4001, || format!("{} samples", s.len()))?;
        ensure(s[0].position == start && s[0].t == 0.0, || format!("#{n}: start not reproduced"))?;
        ensure(s[4000].position == target && s[4000].t == duration, || format!("#{n}: target not reproduced"))?;
        ensure(s.windows(2).all(|w| w[0].t < w[1].t), || format!("#{n}: times not increasing"))?;

        let p = |k: usize| s[k].position;
        let m = s.len() - 1;
        let v0 = (p(1) * 4.0 - p(0) * 3.0 - p(2)) / (2.0 * dt);
        let v1 = (p(m) * 3.0 - p(m - 1) * 4.0 + p(m - 2)) / (2.0 * dt);
        worst_second = worst_second.max(v0.amax()).max(v1.amax());
        worst_first = worst_first.max(((p(1) - p(0)) / dt).amax());

        // Closed form over the whole segment, midpoint included.
        for k in [0, 1, 999, 2000, 2001, 3999, 4000] {
            let u = s[k].t / duration;
            let closed = start * (2.0 * u.powi(3) - 3.0 * u.powi(2) + 1.0) + target * (3.0 * u.powi(2) - 2.0 * u.powi(3));
            worst_mid = worst_mid.max((p(k) - closed).amax());
        }
        let mid = hermite(start, target, 0.5);
        worst_mid = worst_mid.max((mid - (start + target) * 0.5).amax());
    }
    ensure(worst_second < 1e-6, || format!("endpoint velocity {worst_second:e} m/s"))?;
    ensure(worst_mid <= 1e-12, || format!("closed-form deviation {worst_mid:e}"))?;
    Ok(format!(
        "1000 trajectories at 1 kHz, T=4 s: endpoints exact, endpoint velocity {worst_second:.1e} m/s (second-order difference; first-order {worst_first:.1e}), closed-form deviation {worst_mid:.1e}"
    ))
}

// ---------------------------------------------------------------------------
// Session state machine

const SM_W: u32 = 32;
const SM_H: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Letter {
    PredictOk,
    PredictFail,
    CorrectOk,
    CorrectFail,
    ConfirmOk,
    ClassifyFail,
    Finish,
}

const LETTERS: [(Letter, &str); 7] = [
    (Letter::PredictOk, "put your hand on the block"),
    (Letter::PredictFail, "put your hand on the ghost"),
    (Letter::CorrectOk, "slide into the corner"),
    (Letter::CorrectFail, "move by nothing"),
    (Letter::ConfirmOk, "go ahead"),
    (Letter::ClassifyFail, "mumble mumble"),
    (Letter::Finish, ""),
];

struct CountingSink(AtomicUsize);

impl TaskSink for CountingSink {
    fn deliver(&self, message: &str) -> Result<Acknowledgement, ContactError> {
        self.0.fetch_add(1, Ordering::Relaxed);
        Ok(Acknowledgement {
            destination: "counter".into(),
            bytes: message.len(),
        })
    }
}

fn state_machine_world() -> (Pipeline, FrameBundle, Arc<CountingSink>) {
    let class = |text: &str, c: &str| {
        ScriptRule::for_schema(ids::INTENT, Matcher::Exact(text.into()), format!(r#"{{"category": "{c}"}}"#))
    };
    let analysis = |text: &str, object: &str| {
        ScriptRule::for_schema(
            ids::ANALYSIS,
            Matcher::Exact(text.into()),
            format!(r#"{{"chain_of_thought": "", "objects": ["{object}"], "position_type": "Absolute"}}"#),
        )
    };
    let coords = |text: &str, x: &str, y: &str| {
        ScriptRule::for_schema(
            ids::COORDINATES,
            Matcher::Contains(format!("Correction: {text}")),
            format!(r#"{{"chain_of_thought": "", "x": "{x}", "y": "{y}"}}"#),
        )
    };
    let rules = vec![
        class(LETTERS[0].1, "Prediction"),
        class(LETTERS[1].1, "Prediction"),
        class(LETTERS[2].1, "Correction"),
        class(LETTERS[3].1, "Correction"),
        class(LETTERS[4].1, "Confirmation"),
        ScriptRule::for_schema(ids::INTENT, Matcher::Exact(LETTERS[5].1.into()), "not a category"),
        analysis(LETTERS[0].1, "block"),
        analysis(LETTERS[1].1, "ghost"),
        ScriptRule::for_schema(ids::OBJECTS, Matcher::Any, r#"{"objects": []}"#),
        coords(LETTERS[2].1, "0", "0"),
        coords(LETTERS[3].1, "5 / (2 - 2)", "1"),
        ScriptRule::for_schema(
            ids::END_EFFECTOR,
            Matcher::Any,
            r#"{"end_effector": "LeftHand", "task_type": "SupportContact"}"#,
        ),
    ];
    let mut map = Heatmap::zeros(SM_W, SM_H);
    map.set(25, 12, 1.0);
    let store = Arc::new(FixtureVision::new().with_heatmap("bench", "block", map));
    let sink = Arc::new(CountingSink(AtomicUsize::new(0)));
    let settings = ResolverSettings {
        sample_rate: 10.0,
        ..ResolverSettings::default()
    };
    let pipeline = Pipeline::new(
        LlmGateway::with_builtin_schemas(Arc::new(ScriptedBackend::new(rules))),
        VisionGateway::new(store.clone(), store),
        &PromptSet::default(),
        settings,
        sink.clone(),
    )
    .unwrap();
    // Columns 0..12 carry no depth, so the corner is beyond the fallback radius.
    let mut cloud = PointCloud::empty(SM_W, SM_H);
    for v in 0..SM_H {
        for u in 12..SM_W {
            cloud.set(u, v, Some(Vector3::new(u as f64 * 0.01, v as f64 * 0.01, 1.2)));
        }
    }
    let frame = FrameBundle::new(
        ImageRef::blank("bench", SM_W, SM_H).unwrap(),
        cloud,
        CameraExtrinsics::identity(),
        EffectorPoses::default(),
    )
    .unwrap();
    (pipeline, frame, sink)
}

struct Walk<'a> {
    pipeline: &'a Pipeline,
    visited: usize,
    emitted: usize,
    failures: usize,
}

impl Walk<'_> {
    fn step(&mut self, session: &Session, letter: Letter, text: &str, predicted: bool, path: &str) -> Result<(Session, bool), String> {
        let mut next = session.clone();
        let before = session.snapshot();
        self.visited += 1;
        if letter == Letter::Finish {
            match next.finish_execution() {
                Ok(()) => {
                    ensure(before.phase == Phase::Executing, || format!("{path}: finished outside Executing"))?;
                    ensure(next.phase() == Phase::AwaitingInstruction && next.current_target().is_none(), || {
                        format!("{path}: finish left {}", next.phase())
                    })?;
                }
                Err(SessionError::NotExecuting) => {
                    ensure(next.snapshot() == before, || format!("{path}: refused finish changed state"))?
                }
                Err(e) => return Err(format!("{path}: {e}")),
            }
            return Ok((next, predicted));
        }
        match next.handle_utterance(self.pipeline, text) {
            Err(SessionError::Executing) => {
                ensure(before.phase == Phase::Executing, || format!("{path}: refused outside Executing"))?;
                ensure(next.snapshot() == before, || format!("{path}: refused utterance changed state"))?;
                Ok((next, predicted))
            }
            Err(e) => Err(format!("{path}: {e}")),
            Ok(event) => {
                ensure(next.history().len() == before.history.len() + 1, || format!("{path}: history grew wrongly"))?;
                ensure(event.phase == next.phase(), || format!("{path}: event phase disagrees"))?;
                let predicted = predicted || event.kind == EventKind::PredictionSet;
                match event.kind {
                    EventKind::Failed | EventKind::RejectedNoTarget => {
                        self.failures += (event.kind == EventKind::Failed) as usize;
                        ensure(next.phase() == before.phase && next.current_target() == before.current_target, || {
                            format!("{path}: {:?} moved the session", event.kind)
                        })?;
                    }
                    EventKind::ContactTaskEmitted => {
                        self.emitted += 1;
                        ensure(predicted, || format!("{path}: task emitted without a prediction"))?;
                    }
                    EventKind::PredictionSet | EventKind::TargetCorrected => {}
                }
                if letter == Letter::ClassifyFail {
                    ensure(event.kind == EventKind::Failed && event.intent.is_none(), || {
                        format!("{path}: garbage classification gave {:?}", event.kind)
                    })?;
                }
                Ok((next, predicted))
            }
        }
    }

    fn explore(&mut self, session: &Session, predicted: bool, depth: usize, path: &str) -> Result<(), String> {
        if depth == 0 {
            return Ok(());
        }
        for (letter, text) in LETTERS {
            let path = format!("{path}{letter:?} ");
            let (next, predicted) = self.step(session, letter, text, predicted, &path)?;
            next.check_invariants().map_err(|e| format!("{path}: {e}"))?;
            ensure(next.phase() != Phase::Confirmed, || format!("{path}: left in Confirmed"))?;
            if matches!(next.phase(), Phase::Executing) {
                ensure(predicted, || format!("{path}: Executing without a prediction"))?;
            }
            self.explore(&next, predicted, depth - 1, &path)?;
        }
        Ok(())
    }
}

fn state_machine() -> Check {
    let started = Instant::now();
    let (pipeline, frame, sink) = state_machine_world();
    let mut walk = Walk {
        pipeline: &pipeline,
        visited: 0,
        emitted: 0,
        failures: 0,
    };
    walk.explore(&Session::new("walk", frame), false, 6, "")?;
    ensure(walk.emitted > 0 && walk.failures > 0, || "walk never emitted or never failed".into())?;
    ensure(sink.0.load(Ordering::Relaxed) == walk.emitted, || "sink count differs from emitted events".into())?;
    within_time(started, Duration::from_secs(10))?;
    Ok(format!(
        "{} transitions over all sequences of length <= 6 from 7 inputs ({} tasks emitted, {} failed stages), {:.1?}",
        walk.visited,
        walk.emitted,
        walk.failures,
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// End-to-end scenarios

fn run_scenario(scenario: &common::Scenario) -> Result<Vec<String>, String> {
    let (pipeline, sink, _) = common::pipeline();
    let mut session = Session::new(scenario.name, common::frame(scenario.image));
    for text in &scenario.utterances {
        let event = session.handle_utterance(&pipeline, text).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(!matches!(event.kind, EventKind::Failed | EventKind::RejectedNoTarget), || {
            format!("{text:?}: {:?} {}", event.kind, event.message)
        })?;
        session.check_invariants()?;
        if event.kind == EventKind::ContactTaskEmitted {
            session.finish_execution().map_err(|e| e.to_string())?;
        }
    }
    ensure(session.completed_tasks() == scenario.tasks, || {
        format!("{} tasks completed, expected {}", session.completed_tasks(), scenario.tasks)
    })?;
    Ok(sink.messages())
}

fn end_to_end() -> Check {
    let ext = common::extrinsics();
    let mut details = Vec::new();
    for scenario in common::scenarios() {
        let first = run_scenario(&scenario).map_err(|e| format!("{}: {e}", scenario.name))?;
        let second = run_scenario(&scenario).map_err(|e| format!("{} (rerun): {e}", scenario.name))?;
        ensure(first == second, || format!("{}: messages differ between runs", scenario.name))?;
        ensure(first.len() == scenario.tasks, || format!("{}: {} messages", scenario.name, first.len()))?;
        let mut limbs = Vec::new();
        for message in &first {
            let task = ContactTask::from_wire(message).map_err(|e| format!("{}: {e}", scenario.name))?;
            let again = task.to_wire().map_err(|e| e.to_string())?;
            ensure(&again == message, || format!("{}: wire message does not round-trip", scenario.name))?;
            ensure(ContactTask::from_wire(&again).as_ref() == Ok(&task), || format!("{}: task differs", scenario.name))?;
            let identity = (task.point_rob - (ext.rotation() * task.point_cam + ext.origin())).amax();
            ensure(identity <= 1e-9, || format!("{}: transform residual {identity:e}", scenario.name))?;
            limbs.push(task.end_effector);
        }
        ensure(limbs == [EndEffector::RightHand, EndEffector::LeftHand], || {
            format!("{}: limbs {limbs:?}", scenario.name)
        })?;
        details.push(scenario.name.split(' ').next().unwrap_or_default().to_string());
    }
    Ok(format!("scenarios {} emitted round-tripping tasks, identical across reruns", details.join(" ")))
}

// ---------------------------------------------------------------------------
// Benchmark statistics and practice mode

/// 100x100 masks whose first `rows` rows are positive.
fn records(n: usize, rows: u32) -> Vec<DatasetRecord> {
    (0..n)
        .map(|i| DatasetRecord {
            index: i,
            id: format!("synthetic-{i}"),
            image_path: Default::default(),
            prompt: "touch the marked area".into(),
            category: if i % 3 == 0 { PositionType::Relative } else { PositionType::Absolute },
            mask: Mask::from_fn(100, 100, |_, v| v < rows),
        })
        .collect()
}

/// Quartile by 1-based position h = (n - 1) p + 1 between order statistics.
fn quartile_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p + 1.0;
    let below = h.floor();
    let x = |i: f64| v[(i as usize).clamp(1, v.len()) - 1];
    x(below) + (h - below) * (x(below + 1.0) - x(below))
}

fn bench_statistics() -> Check {
    let data = records(1000, 13);
    let fraction = data[0].mask.area_fraction();
    ensure((fraction - 0.13).abs() < 1e-12, || format!("mask area {fraction}"))?;
    let report = random_baseline(&data, 1, 2024, Execution::default()).map_err(|e| e.to_string())?;
    let rate = report.per_run[0].overall;
    ensure((rate - 0.13).abs() <= 0.02, || format!("random baseline rate {rate}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for n in 0..500 {
        let values: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random::<f64>()).collect();
        let s = Summary::of(&values).unwrap();
        for (got, p) in [(s.p25, 0.25), (s.median, 0.5), (s.p75, 0.75)] {
            let want = quartile_oracle(&values, p);
            ensure((got - want).abs() <= 1e-12, || format!("sample #{n} p={p}: {got} vs oracle {want}"))?;
        }
    }
    let small = records(200, 13);
    let report = random_baseline(&small, 9, 3, Execution::default()).map_err(|e| e.to_string())?;
    let overall: Vec<f64> = report.per_run.iter().map(|r| r.overall).collect();
    let s = report.overall.ok_or("no overall summary")?;
    for (got, p) in [(s.p25, 0.25), (s.median, 0.5), (s.p75, 0.75)] {
        let want = quartile_oracle(&overall, p);
        ensure((got - want).abs() <= 1e-12, || format!("report p={p}: {got} vs oracle {want}"))?;
    }

    let mut trial = PracticeTrial::new(ImageRef::blank("practice", 200, 150).unwrap(), PixelPoint::new(100, 100))
        .map_err(|e| e.to_string())?;
    let marks = [Some(PixelPoint::new(103, 104)), None, Some(PixelPoint::new(100, 100)), Some(PixelPoint::new(0, 0))];
    let wants = [Some(5.0), None, Some(0.0), Some(100.0 * 2f64.sqrt())];
    for (k, (mark, want)) in marks.into_iter().zip(wants).enumerate() {
        let got = trial.record(mark).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("practice prompt {k}: {got:?} vs {want:?}"))?;
        ensure(trial.remaining_budget() == PROMPT_BUDGET - k - 1, || "budget did not decrease".into())?;
    }
    trial.record(Some(PixelPoint::new(99, 100))).map_err(|e| e.to_string())?;
    ensure(trial.finished(), || "trial not finished at zero budget".into())?;
    ensure(trial.record(None) == Err(PracticeError::BudgetExhausted), || "sixth prompt accepted".into())?;

    Ok(format!(
        "random baseline {rate:.3} on 1000 records with 13% masks; 500 quartile samples and 9-run report match the oracle; practice distances and {PROMPT_BUDGET}-prompt budget hold"
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 7] = [
        ("expression evaluator oracle equivalence and fuzzing", expression_oracle),
        ("absolute-branch argmax against exhaustive scan", argmax_oracle),
        ("extrinsics isometry, round-trip and depth fallback", geometry_suite),
        ("trajectory endpoints, endpoint velocity and closed form", trajectory_suite),
        ("session state machine exhaustive walk", state_machine),
        ("end-to-end offline scenarios (a)-(d)", end_to_end),
        ("benchmark statistics and practice metrics", bench_statistics),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
