/* Flat C entry surface for foreign-function bindings. Buffers are contiguous
 * row-major H x W x C doubles (class innermost). */
#ifndef FUZZYSEG_C_API_H
#define FUZZYSEG_C_API_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fuzzyseg_engine fuzzyseg_engine;

/* Constraint family flags for fuzzyseg_compile. */
#define FUZZYSEG_SCRIBBLES (1u << 0)
#define FUZZYSEG_BBOX_SHALLOW (1u << 1)
#define FUZZYSEG_BBOX (1u << 2)
#define FUZZYSEG_BACKGROUND (1u << 3)
#define FUZZYSEG_NEIGHBORHOOD (1u << 4)
#define FUZZYSEG_FILL (1u << 5)
#define FUZZYSEG_BORDERS (1u << 6)
#define FUZZYSEG_CORNERS (1u << 7)

/* Builds the conjoined formula of the flagged families from annotation JSON.
 * `superpixels` (H*W indices) is required for FUZZYSEG_BORDERS and may be
 * NULL otherwise. Returns NULL on error; see fuzzyseg_last_error. */
fuzzyseg_engine* fuzzyseg_compile(const char* annotation_json, int height, int width, int classes, uint32_t flags,
                                  const int32_t* superpixels);

/* Number of doubles expected in a logits buffer (H*W*C). */
size_t fuzzyseg_engine_size(const fuzzyseg_engine* engine);

/* Semantic loss of the engine's formula and, when `grad` is not NULL, its
 * gradient (length n). Returns 0 on success, nonzero on error. Safe to call
 * concurrently on one engine. */
int fuzzyseg_loss_and_grad(const fuzzyseg_engine* engine, const double* logits, size_t n, double* loss, double* grad);

void fuzzyseg_release(fuzzyseg_engine* engine);

/* Message of the last failed call on this thread ("" if none). */
const char* fuzzyseg_last_error(void);

#ifdef __cplusplus
}
#endif

#endif
