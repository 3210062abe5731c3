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

/* Interval-analysis runtime. Linked into the analysis-instrumented binary.
 *
 * The generator prepends the configuration macros:
 *   NUGGET_INTERVAL_SIZE  IR instructions per interval
 *   NUGGET_BLOCK_COUNT    number of blocks in the instrumented module
 *   NUGGET_THREAD_SAFE    1 to serialize hook calls across threads
 *   NUGGET_PROFILE_ENV    environment variable naming the profile output
 *
 * Environment:
 *   NUGGET_PROFILE_PATH   profile output (default ./nugget.profile); the
 *                         variable name follows NUGGET_PROFILE_ENV
 *   NUGGET_TRACE_PATH     optional block trace: "NUGTRAC1", block count (u64),
 *                         then one u32 bb_id per hook call
 */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#ifndef NUGGET_PROFILE_ENV
#define NUGGET_PROFILE_ENV "NUGGET_PROFILE_PATH"
#endif

#if NUGGET_THREAD_SAFE
#include <pthread.h>
static pthread_mutex_t nugget_lock = PTHREAD_MUTEX_INITIALIZER;
#define NUGGET_LOCK() pthread_mutex_lock(&nugget_lock)
#define NUGGET_UNLOCK() pthread_mutex_unlock(&nugget_lock)
#else
#define NUGGET_LOCK() ((void)0)
#define NUGGET_UNLOCK() ((void)0)
#endif

#define NUGGET_SLOTS (NUGGET_BLOCK_COUNT > 0 ? NUGGET_BLOCK_COUNT : 1)

static uint64_t nugget_counter;
static uint64_t nugget_interval_id;
static uint64_t nugget_boundary = NUGGET_INTERVAL_SIZE;
static uint64_t nugget_interval_start;
static uint64_t nugget_bbv[NUGGET_SLOTS];
static uint64_t nugget_cstamp[NUGGET_SLOTS];
static uint64_t nugget_touched[NUGGET_SLOTS];
static uint64_t nugget_touched_count;
static int nugget_state; /* 0 = uninitialized, 1 = recording, 2 = finished */
static FILE *nugget_profile;
static FILE *nugget_trace;

void __nugget_fini(void);

static void nugget_die(const char *what, const char *path) {
  fprintf(stderr, "nugget: %s %s\n", what, path ? path : "");
  abort();
}

static void nugget_put(FILE *f, const void *bytes, size_t n) {
  if (fwrite(bytes, 1, n, f) != n) nugget_die("write failed", NULL);
}

static void nugget_put_u64(FILE *f, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
  nugget_put(f, b, 8);
}

static void nugget_put_u32(FILE *f, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)(v >> (8 * i));
  nugget_put(f, b, 4);
}

static void nugget_init_locked(void) {
  if (nugget_state != 0) return;
  const char *path = getenv(NUGGET_PROFILE_ENV);
  if (path == NULL || *path == '\0') path = "./nugget.profile";
  nugget_profile = fopen(path, "wb");
  if (nugget_profile == NULL) nugget_die("cannot open profile", path);
  setvbuf(nugget_profile, NULL, _IOFBF, 1 << 20);
  nugget_put(nugget_profile, "NUGPROF1", 8);
  nugget_put_u64(nugget_profile, (uint64_t)NUGGET_INTERVAL_SIZE);
  nugget_put_u64(nugget_profile, (uint64_t)NUGGET_BLOCK_COUNT);

  const char *trace = getenv("NUGGET_TRACE_PATH");
  if (trace != NULL && *trace != '\0') {
    nugget_trace = fopen(trace, "wb");
    if (nugget_trace == NULL) nugget_die("cannot open trace", trace);
    setvbuf(nugget_trace, NULL, _IOFBF, 1 << 20);
    nugget_put(nugget_trace, "NUGTRAC1", 8);
    nugget_put_u64(nugget_trace, (uint64_t)NUGGET_BLOCK_COUNT);
  }
  nugget_state = 1;
  atexit(__nugget_fini);
}

static int nugget_cmp_u64(const void *a, const void *b) {
  const uint64_t x = *(const uint64_t *)a, y = *(const uint64_t *)b;
  return (x > y) - (x < y);
}

static void nugget_emit_locked(int partial) {
  FILE *f = nugget_profile;
  qsort(nugget_touched, (size_t)nugget_touched_count, sizeof(uint64_t), nugget_cmp_u64);
  nugget_put_u64(f, nugget_interval_id);
  nugget_put_u64(f, nugget_counter - nugget_interval_start);
  nugget_put_u32(f, partial ? 1u : 0u);
  nugget_put_u32(f, (uint32_t)nugget_touched_count);
  for (uint64_t i = 0; i < nugget_touched_count; ++i) {
    const uint64_t bb = nugget_touched[i];
    nugget_put_u64(f, bb);
    nugget_put_u64(f, nugget_bbv[bb]);
    nugget_put_u64(f, nugget_cstamp[bb]);
    nugget_bbv[bb] = 0;
    nugget_cstamp[bb] = 0;
  }
  nugget_touched_count = 0;
  nugget_interval_id += 1;
  nugget_interval_start = nugget_counter;
  nugget_boundary = nugget_counter + (uint64_t)NUGGET_INTERVAL_SIZE;
}

void __nugget_init(void) {
  NUGGET_LOCK();
  nugget_init_locked();
  NUGGET_UNLOCK();
}

void __nugget_bb_hook(uint64_t bb_id, uint64_t inst_count) {
  NUGGET_LOCK();
  if (nugget_state != 1) {
    if (nugget_state == 2) {
      NUGGET_UNLOCK();
      return;
    }
    nugget_init_locked();
  }
  nugget_counter += inst_count;
  if (nugget_bbv[bb_id]++ == 0) nugget_touched[nugget_touched_count++] = bb_id;
  nugget_cstamp[bb_id] = nugget_counter;
  if (nugget_trace != NULL) nugget_put_u32(nugget_trace, (uint32_t)bb_id);
  if (nugget_counter >= nugget_boundary) nugget_emit_locked(0);
  NUGGET_UNLOCK();
}

uint64_t __nugget_current_count(void) {
  NUGGET_LOCK();
  const uint64_t v = nugget_counter;
  NUGGET_UNLOCK();
  return v;
}

void __nugget_fini(void) {
  NUGGET_LOCK();
  if (nugget_state == 0) nugget_init_locked();
  if (nugget_state == 1) {
    if (nugget_touched_count > 0) nugget_emit_locked(1);
    if (fclose(nugget_profile) != 0) nugget_die("cannot close profile", NULL);
    if (nugget_trace != NULL && fclose(nugget_trace) != 0) nugget_die("cannot close trace", NULL);
    nugget_profile = NULL;
    nugget_trace = NULL;
    nugget_state = 2;
  }
  NUGGET_UNLOCK();
}
