// Copyright 2026 The nugget Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* Nugget marker runtime. Linked into every nugget binary.
 *
 * Each marker block calls __nugget_marker_hook(site, mask, warmup, start, end)
 * with its site index, the set of marker kinds it serves and the baked
 * execution-count thresholds. Counters are per site and shared by all
 * threads; a threshold fires exactly once.
 *
 * Environment:
 *   NUGGET_ROI_OUT    ROI result file, one appended line per run
 *                     "interval_id<TAB>roi_ns<TAB>status" (default ./nugget.roi)
 *   NUGGET_EVENT_OUT  optional file for event lines (default stderr)
 */
#include <stdatomic.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <time.h>
#include <unistd.h>

#define NUGGET_KIND_WARMUP 1u
#define NUGGET_KIND_START 2u
#define NUGGET_KIND_END 4u
#define NUGGET_ACTION_TIMER 0u
#define NUGGET_ACTION_ANNOUNCE 1u
#define NUGGET_FLAG_HAS_START 1u
#define NUGGET_FLAG_THREAD_SAFE 2u
#define NUGGET_MAX_SITES 8

/* Provided by the analysis runtime in co-instrumented builds. */
extern uint64_t __nugget_current_count(void) __attribute__((weak));

static atomic_uint_fast64_t nugget_site_count[NUGGET_MAX_SITES];
/* smallest pending threshold per site; 0 until the first call */
static atomic_uint_fast64_t nugget_site_next[NUGGET_MAX_SITES];
static atomic_int nugget_initialized;
static uint64_t nugget_interval;
static unsigned nugget_action;
static int nugget_thread_safe;
static uint64_t nugget_roi_begin_ns;
static atomic_int nugget_roi_open;
static FILE *nugget_events;

static uint64_t nugget_now_ns(void) {
  struct timespec ts;
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return (uint64_t)ts.tv_sec * 1000000000ull + (uint64_t)ts.tv_nsec;
}

static void nugget_event(const char *name) {
  FILE *f = nugget_events != NULL ? nugget_events : stderr;
  if (__nugget_current_count) {
    fprintf(f, "nugget: %s interval=%llu count=%llu\n", name, (unsigned long long)nugget_interval,
            (unsigned long long)__nugget_current_count());
  } else {
    fprintf(f, "nugget: %s interval=%llu\n", name, (unsigned long long)nugget_interval);
  }
  fflush(f);
}

static void nugget_write_roi(uint64_t roi_ns, const char *status) {
  const char *path = getenv("NUGGET_ROI_OUT");
  if (path == NULL || *path == '\0') path = "./nugget.roi";
  FILE *f = fopen(path, "a");
  if (f == NULL) {
    fprintf(stderr, "nugget: cannot open ROI output %s\n", path);
    _exit(1);
  }
  fprintf(f, "%llu\t%llu\t%s\n", (unsigned long long)nugget_interval, (unsigned long long)roi_ns, status);
  if (fclose(f) != 0) {
    fprintf(stderr, "nugget: cannot write ROI output %s\n", path);
    _exit(1);
  }
}

static void nugget_roi_begin(void) {
  if (nugget_action == NUGGET_ACTION_ANNOUNCE) nugget_event("ROI_BEGIN");
  nugget_roi_begin_ns = nugget_now_ns();
  atomic_store(&nugget_roi_open, 1);
}

static void nugget_roi_end(void) {
  const uint64_t end_ns = nugget_now_ns();
  if (nugget_action == NUGGET_ACTION_ANNOUNCE) nugget_event("ROI_END");
  nugget_write_roi(end_ns - nugget_roi_begin_ns, "OK");
  if (nugget_events != NULL) fflush(nugget_events);
  fflush(stdout);
  fflush(stderr);
  _exit(0);
}

static void nugget_marker_fini(void) {
  nugget_write_roi(0, "MARKER_MISSED");
  if (nugget_events != NULL) fflush(nugget_events);
  fflush(stdout);
  fflush(stderr);
  _exit(3);
}

void __nugget_marker_init(uint64_t interval_id, uint64_t action, uint64_t flags) {
  int expected = 0;
  if (!atomic_compare_exchange_strong(&nugget_initialized, &expected, 1)) return;
  nugget_interval = interval_id;
  nugget_action = (unsigned)action;
  nugget_thread_safe = (flags & NUGGET_FLAG_THREAD_SAFE) != 0;
  const char *events = getenv("NUGGET_EVENT_OUT");
  if (events != NULL && *events != '\0') nugget_events = fopen(events, "a");
  atexit(nugget_marker_fini);
  if ((flags & NUGGET_FLAG_HAS_START) == 0) nugget_roi_begin();
}

static void nugget_fire(unsigned kind) {
  switch (kind) {
    case NUGGET_KIND_WARMUP: nugget_event("WARMUP"); break;
    case NUGGET_KIND_START: nugget_roi_begin(); break;
    case NUGGET_KIND_END: nugget_roi_end(); break;
  }
}

/* Slow path: fires every kind whose threshold is n, then raises the site's
 * next threshold. Thresholds are exact and n is unique per call, so each kind
 * fires once even when threads race here. */
__attribute__((noinline, cold, preserve_most)) static void nugget_hook_slow(uint64_t site, uint64_t mask, uint64_t warmup,
                                                             uint64_t start, uint64_t end, uint64_t n) {
  const uint64_t thresholds[3] = {warmup, start, end};
  uint64_t next = UINT64_MAX;
  for (unsigned k = 0; k < 3; ++k) {
    if ((mask & (1u << k)) != 0 && thresholds[k] > n && thresholds[k] < next) next = thresholds[k];
  }
  atomic_store_explicit(&nugget_site_next[site], next, memory_order_relaxed);
  for (unsigned k = 0; k < 3; ++k) {
    if ((mask & (1u << k)) != 0 && thresholds[k] == n) nugget_fire(1u << k);
  }
}

/* preserve_most keeps the caller's registers live across the call, so a hook
 * inside a hot loop does not force spills there. The common case is one
 * increment and one compare. */
__attribute__((preserve_most)) void __nugget_marker_hook(uint64_t site, uint64_t mask, uint64_t warmup,
                                                        uint64_t start, uint64_t end) {
  uint64_t n;
  if (nugget_thread_safe) {
    n = atomic_fetch_add(&nugget_site_count[site], 1) + 1;
  } else {
    /* a locked add is a full barrier; single-threaded runs do without */
    n = atomic_load_explicit(&nugget_site_count[site], memory_order_relaxed) + 1;
    atomic_store_explicit(&nugget_site_count[site], n, memory_order_relaxed);
  }
  if (__builtin_expect(n < atomic_load_explicit(&nugget_site_next[site], memory_order_relaxed), 1)) return;
  nugget_hook_slow(site, mask, warmup, start, end, n);
}
