//! C interface to the gesturelet detector and tracker.
//!
//! All objects are opaque and owned by the caller once created; free each with
//! its `*_free` function. Every fallible call returns a [`GlStatus`]; on
//! failure `gl_last_error()` describes the problem until the next failing call
//! on the same thread. Handles are not thread-safe, a bundle may be shared by
//! detectors on any thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use gesturelet::io::load_model;
use gesturelet::tracker::Similarity;
use gesturelet::{
    DetectorBundle, Error, OnlineDetector, SkeletonFrame, SkeletonLayout, StreamDetector, Tracker, TrackerConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    ModelMismatch = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlSimilarity {
    Iou = 0,
    Oks = 1,
}

/// One person's skeleton. `joints` holds `joint_count * dims` coordinates.
/// `confidence` may be null, meaning every joint is present; a joint with
/// confidence 0 is treated as missing.
#[repr(C)]
pub struct GlFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub joint_count: usize,
    pub dims: usize,
    pub joints: *const f64,
    pub confidence: *const f64,
}

/// A fired detection. `class_index` indexes `gl_bundle_class_name`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GlEvent {
    pub class_index: u32,
    pub recognized_class: u32,
    pub person_id: u64,
    pub start_frame: u64,
    pub end_frame: u64,
    pub score: f64,
    pub probability: f64,
}

pub struct GlBundle(Arc<DetectorBundle>);
pub struct GlDetector(OnlineDetector);
pub struct GlTracker(Tracker);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GlStatus {
    match e {
        Error::Io(_) => GlStatus::Io,
        Error::Parse { .. }
        | Error::LayoutMismatch { .. }
        | Error::MalformedHeader { .. }
        | Error::TruncatedFile { .. } => GlStatus::Parse,
        Error::ModelMismatch(_) | Error::DigestMismatch(_) | Error::VersionUnsupported(_) => GlStatus::ModelMismatch,
        _ => GlStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (GlStatus, String)>) -> GlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GlStatus::Internal
        }
    }
}

fn lib(e: Error) -> (GlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GlStatus, String) {
    (GlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn to_frame(f: *const GlFrame) -> Result<SkeletonFrame, (GlStatus, String)> {
    let f = f.as_ref().ok_or_else(|| null("frame"))?;
    if f.joints.is_null() {
        return Err(null("frame joints"));
    }
    let n = f
        .joint_count
        .checked_mul(f.dims)
        .ok_or_else(|| (GlStatus::InvalidArgument, "joint_count * dims overflows".to_string()))?;
    let joints = std::slice::from_raw_parts(f.joints, n).to_vec();
    let confidence = if f.confidence.is_null() {
        vec![1.0; f.joint_count]
    } else {
        std::slice::from_raw_parts(f.confidence, f.joint_count).to_vec()
    };
    let valid = confidence.iter().map(|&c| c > 0.0).collect();
    SkeletonFrame::new(f.frame_index, f.timestamp_s, f.dims, joints, confidence, valid).map_err(lib)
}

/// Message for the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn gl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads and verifies a model archive.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_load(path: *const c_char, out: *mut *mut GlBundle) -> GlStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (GlStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let archive = load_model(path).map_err(lib)?;
        *out = Box::into_raw(Box::new(GlBundle(Arc::new(archive.bundle))));
        Ok(())
    })
}

/// # Safety
/// `bundle` must come from `gl_bundle_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_free(bundle: *mut GlBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Number of classes the bundle scores, or 0 for a null bundle.
///
/// # Safety
/// `bundle` must be a live bundle or null.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_class_count(bundle: *const GlBundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.0.model.classes.len())
}

/// Joint count and coordinate dimension expected by the bundle's layout.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_layout(
    bundle: *const GlBundle,
    joint_count: *mut usize,
    dims: *mut usize,
) -> GlStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or_else(|| null("bundle"))?;
        if joint_count.is_null() || dims.is_null() {
            return Err(null("output"));
        }
        *joint_count = b.0.layout.joint_count();
        *dims = b.0.layout.dims;
        Ok(())
    })
}

/// Copies the nul-terminated class name into `buf`. Fails with
/// `InvalidArgument` if `capacity` is too small or `index` out of range.
///
/// # Safety
/// `buf` must have room for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_class_name(
    bundle: *const GlBundle,
    index: usize,
    buf: *mut c_char,
    capacity: usize,
) -> GlStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or_else(|| null("bundle"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let name =
            b.0.model
                .classes
                .get(index)
                .ok_or_else(|| (GlStatus::InvalidArgument, format!("class index {index} out of range")))?;
        if name.len() + 1 > capacity {
            return Err((GlStatus::InvalidArgument, format!("need {} bytes", name.len() + 1)));
        }
        std::ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Creates a detector for one person. The detector keeps its own reference to
/// the bundle, which may be freed afterwards.
///
/// # Safety
/// `bundle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_detector_new(
    bundle: *const GlBundle,
    person_id: u64,
    out: *mut *mut GlDetector,
) -> GlStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or_else(|| null("bundle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let det = OnlineDetector::spawn(b.0.clone(), person_id).map_err(lib)?;
        *out = Box::into_raw(Box::new(GlDetector(det)));
        Ok(())
    })
}

/// Feeds one frame. `*fired` is set to 1 and `*event` filled when a gesture
/// is detected, otherwise `*fired` is 0. At most one event fires per frame.
///
/// # Safety
/// All pointers must be valid; the frame arrays must hold the advertised
/// number of values.
#[no_mangle]
pub unsafe extern "C" fn gl_detector_push(
    detector: *mut GlDetector,
    frame: *const GlFrame,
    event: *mut GlEvent,
    fired: *mut i32,
) -> GlStatus {
    guard(|| {
        let d = detector.as_mut().ok_or_else(|| null("detector"))?;
        if event.is_null() || fired.is_null() {
            return Err(null("output"));
        }
        *fired = 0;
        let frame = to_frame(frame)?;
        if let Some(e) = d.0.step(&frame).map_err(lib)?.into_iter().next() {
            *event = GlEvent {
                class_index: e.class_index as u32,
                recognized_class: e.recognized_class as u32,
                person_id: e.person_id,
                start_frame: e.start_frame,
                end_frame: e.end_frame,
                score: e.score,
                probability: e.probability,
            };
            *fired = 1;
        }
        Ok(())
    })
}

/// Drops all buffered state, as after a stream discontinuity.
///
/// # Safety
/// `detector` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn gl_detector_reset(detector: *mut GlDetector) -> GlStatus {
    guard(|| {
        detector.as_mut().ok_or_else(|| null("detector"))?.0.reset();
        Ok(())
    })
}

/// # Safety
/// `detector` must come from `gl_detector_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn gl_detector_free(detector: *mut GlDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Creates a tracker with default gates for the chosen similarity.
/// `layout` is `"openpose18"` or `"ntu25"`.
///
/// # Safety
/// `layout` must be nul-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_tracker_new(
    layout: *const c_char,
    similarity: GlSimilarity,
    out: *mut *mut GlTracker,
) -> GlStatus {
    guard(|| {
        if layout.is_null() {
            return Err(null("layout"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(layout)
            .to_str()
            .map_err(|_| (GlStatus::InvalidArgument, "layout is not UTF-8".to_string()))?;
        let layout = SkeletonLayout::by_name(name).map_err(lib)?;
        let sim = match similarity {
            GlSimilarity::Iou => Similarity::Iou,
            GlSimilarity::Oks => Similarity::Oks,
        };
        let tracker = Tracker::new(TrackerConfig::with_similarity(sim), layout).map_err(lib)?;
        *out = Box::into_raw(Box::new(GlTracker(tracker)));
        Ok(())
    })
}

/// Associates `n` detections with tracks. `ids[i]` receives the track id of
/// detection `i`, or -1 when the detection has no valid joints.
///
/// # Safety
/// `frames` and `ids` must each hold `n` elements (may be null when `n` is 0).
#[no_mangle]
pub unsafe extern "C" fn gl_tracker_step(
    tracker: *mut GlTracker,
    frames: *const GlFrame,
    n: usize,
    ids: *mut i64,
) -> GlStatus {
    guard(|| {
        let t = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        if n > 0 && (frames.is_null() || ids.is_null()) {
            return Err(null("frames or ids"));
        }
        let dets = (0..n).map(|i| to_frame(frames.add(i))).collect::<Result<Vec<_>, _>>()?;
        let step = t.0.step(&dets);
        for (i, id) in step.assignments.into_iter().enumerate() {
            *ids.add(i) = id.map_or(-1, |v| v as i64);
        }
        Ok(())
    })
}

/// # Safety
/// `tracker` must come from `gl_tracker_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn gl_tracker_free(tracker: *mut GlTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}
