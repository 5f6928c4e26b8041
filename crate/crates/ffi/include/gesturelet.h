#ifndef GESTURELET_H
#define GESTURELET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  GL_STATUS_INVALID_ARGUMENT = 2,
  GL_STATUS_IO = 3,
  GL_STATUS_PARSE = 4,
  GL_STATUS_MODEL_MISMATCH = 5,
  GL_STATUS_INTERNAL = 6,
} GlStatus;

typedef enum GlSimilarity {
  GL_SIMILARITY_IOU = 0,
  GL_SIMILARITY_OKS = 1,
} GlSimilarity;

typedef struct GlBundle GlBundle;

typedef struct GlDetector GlDetector;

typedef struct GlTracker GlTracker;

// One person's skeleton. `joints` holds `joint_count * dims` coordinates.
// `confidence` may be null, meaning every joint is present; a joint with
// confidence 0 is treated as missing.
typedef struct GlFrame {
  uint64_t frame_index;
  double timestamp_s;
  uintptr_t joint_count;
  uintptr_t dims;
  const double *joints;
  const double *confidence;
} GlFrame;

// A fired detection. `class_index` indexes `gl_bundle_class_name`.
typedef struct GlEvent {
  uint32_t class_index;
  uint32_t recognized_class;
  uint64_t person_id;
  uint64_t start_frame;
  uint64_t end_frame;
  double score;
  double probability;
} GlEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *gl_last_error(void);

// Loads and verifies a model archive.
//
// # Safety
// `path` must be a nul-terminated string and `out` a writable pointer.
enum GlStatus gl_bundle_load(const char *path, struct GlBundle **out);

// # Safety
// `bundle` must come from `gl_bundle_load` or be null.
void gl_bundle_free(struct GlBundle *bundle);

// Number of classes the bundle scores, or 0 for a null bundle.
//
// # Safety
// `bundle` must be a live bundle or null.
uintptr_t gl_bundle_class_count(const struct GlBundle *bundle);

// Joint count and coordinate dimension expected by the bundle's layout.
//
// # Safety
// All pointers must be valid.
enum GlStatus gl_bundle_layout(const struct GlBundle *bundle,
                               uintptr_t *joint_count,
                               uintptr_t *dims);

// Copies the nul-terminated class name into `buf`. Fails with
// `InvalidArgument` if `capacity` is too small or `index` out of range.
//
// # Safety
// `buf` must have room for `capacity` bytes.
enum GlStatus gl_bundle_class_name(const struct GlBundle *bundle,
                                   uintptr_t index,
                                   char *buf,
                                   uintptr_t capacity);

// Creates a detector for one person. The detector keeps its own reference to
// the bundle, which may be freed afterwards.
//
// # Safety
// `bundle` must be live and `out` writable.
enum GlStatus gl_detector_new(const struct GlBundle *bundle,
                              uint64_t person_id,
                              struct GlDetector **out);

// Feeds one frame. `*fired` is set to 1 and `*event` filled when a gesture
// is detected, otherwise `*fired` is 0. At most one event fires per frame.
//
// # Safety
// All pointers must be valid; the frame arrays must hold the advertised
// number of values.
enum GlStatus gl_detector_push(struct GlDetector *detector,
                               const struct GlFrame *frame,
                               struct GlEvent *event,
                               int32_t *fired);

// Drops all buffered state, as after a stream discontinuity.
//
// # Safety
// `detector` must be live or null.
enum GlStatus gl_detector_reset(struct GlDetector *detector);

// # Safety
// `detector` must come from `gl_detector_new` or be null.
void gl_detector_free(struct GlDetector *detector);

// Creates a tracker with default gates for the chosen similarity.
// `layout` is `"openpose18"` or `"ntu25"`.
//
// # Safety
// `layout` must be nul-terminated and `out` writable.
enum GlStatus gl_tracker_new(const char *layout,
                             enum GlSimilarity similarity,
                             struct GlTracker **out);

// Associates `n` detections with tracks. `ids[i]` receives the track id of
// detection `i`, or -1 when the detection has no valid joints.
//
// # Safety
// `frames` and `ids` must each hold `n` elements (may be null when `n` is 0).
enum GlStatus gl_tracker_step(struct GlTracker *tracker,
                              const struct GlFrame *frames,
                              uintptr_t n,
                              int64_t *ids);

// # Safety
// `tracker` must come from `gl_tracker_new` or be null.
void gl_tracker_free(struct GlTracker *tracker);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GESTURELET_H */
