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

#include <stdio.h>
#include <stdlib.h>

long checksum(const long *v, long n);
void fill(long *v, long n, long seed);

int main(int argc, char **argv) {
  long n = argc > 1 ? atol(argv[1]) : 4000;
  long *v = malloc(sizeof(long) * (size_t)n);
  long acc = 0;
  for (long r = 0; r < 8; ++r) {
    fill(v, n, r);
    acc += checksum(v, n);
  }
  printf("%ld\n", acc);
  free(v);
  return 0;
}
