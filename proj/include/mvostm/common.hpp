#pragma once

#include <cstdio>
#include <cstdlib>

// Always-on invariant checks. These guard latch ordering and list structure;
// a violation means the synchronization protocol is broken, so we stop hard
// rather than let a corrupted structure produce wrong answers.
#define MVOSTM_CHECK(cond, msg)                                             \
  do {                                                                      \
    if (!(cond)) {                                                          \
      std::fprintf(stderr, "mvostm check failed: %s\n  at %s:%d (%s)\n",    \
                   (msg), __FILE__, __LINE__, #cond);                       \
      std::abort();                                                         \
    }                                                                       \
  } while (0)
