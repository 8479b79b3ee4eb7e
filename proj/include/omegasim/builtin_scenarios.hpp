#pragma once

#include <string>
#include <utility>
#include <vector>

namespace omegasim::builtin {

// The shipped scenario corpus, embedded so the reproduction checks run
// from any working directory. The files under scenarios/ carry the same
// text; a test keeps them in sync.

inline constexpr const char* paper_5_1 = R"SCN(# Worked channel-timing example: 8 error classes over q=1, 1024 patterns
# over r=5, 2048-bit patterns over n=m=128.
SPACE
  dim c0 = bool
  dim c1 = bool
  dim c2 = bool
  dim c3 = bool
  dim c4 = bool
  dim c5 = bool
  dim c6 = bool
  dim c7 = bool
  dim c8 = bool
  dim c9 = bool
PLANT
  start = 0
  psi_bits = 2048
  sub 0 -> 1 out 0
  sub 1 -> 2 out 1
  sub 2 -> 3 out 2
  sub 3 -> 0 out 3
  program = 0 1 2 3
STORAGE
  patterns_fill = count 1024 width 2048 seed 7
CHANNELS
  q = 1
  r = 5
  n = 128
  m = 128
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 8
  fault 1 class 3
  map class 3 -> pattern 5
RUN
  ticks = 30
  seed = 1
)SCN";

inline constexpr const char* fig40_split = R"SCN(# Fragmentation probe: a plant of two independent halves, ready for an
# even 2-way split with replicated channels.
SPACE
  dim h0 = bool
  dim h1 = bool
  dim l0 = bool
  dim l1 = bool
PLANT
  start = 0
  psi_bits = 2048
  sub 0 -> 5 out 0
  sub 1 -> 6 out 1
  sub 2 -> 7 out 2
  sub 3 -> 4 out 3
  sub 4 -> 9 out 10
  sub 5 -> 10 out 11
  sub 6 -> 11 out 12
  sub 7 -> 8 out 13
  sub 8 -> 13 out 20
  sub 9 -> 14 out 21
  sub 10 -> 15 out 22
  sub 11 -> 12 out 23
  sub 12 -> 1 out 30
  sub 13 -> 2 out 31
  sub 14 -> 3 out 32
  sub 15 -> 0 out 33
STORAGE
  patterns_fill = count 4 width 2048 seed 11
CHANNELS
  q = 1
  r = 5
  n = 128
  m = 128
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
  fault 1 class 0
  map class 0 -> pattern 2
RUN
  ticks = 50
  seed = 2
)SCN";

inline constexpr const char* three_component = R"SCN(# Three components that must be all on or all off; transits must finish
# within one tick.
SPACE
  dim k0 = bool
  dim k1 = bool
  dim k2 = bool
LEGAL
  whitelist 000 111
  whitelist_mode = true
PLANT
  start = 7
STORAGE
  pattern 0 = 000
  pattern 1 = 111
CHANNELS
  q = 1
  r = 1
  n = 8
  m = 8
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
RUN
  ticks = 10
  seed = 4
  theta = 1
  start = 111
  goal = 000
  budgets = 3 2 1
)SCN";

inline constexpr const char* fig59_detour = R"SCN(# Slower is a lot slower: the same transition at shrinking step budgets
# takes 1 step, a 2-step detour, then a 4-step corridor crawl.
SPACE
  dim d0 = bool
  dim d1 = bool
  dim d2 = bool
  dim d3 = bool
LEGAL
  whitelist 0000 0001 0011 0111 1111
  whitelist_mode = true
PLANT
  start = 0
STORAGE
  pattern 0 = 0000
  pattern 1 = 1111
CHANNELS
  q = 1
  r = 1
  n = 8
  m = 8
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
RUN
  ticks = 10
  seed = 5
  theta = 1
  start = 0000
  goal = 1111
  budgets = 4 2 1
)SCN";

inline constexpr const char* sync_zero = R"SCN(# Synchronized plant and environment: no faults, no disturbances, and the
# realized behavior matches the declared expectations exactly.
SPACE
  dim s0 = bool
  dim s1 = bool
PLANT
  start = 0
  sub 0 -> 0 out 0
STORAGE
  pattern 0 = 00
CHANNELS
  q = 1
  r = 1
  n = 4
  m = 4
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
  expect plant = 1 0
  expect env = 1 0
  env_script = 0
RUN
  ticks = 40
  seed = 6
)SCN";

inline constexpr const char* two_mode = R"SCN(# Two-mode switch probe: greedy switching deploys mid-cycle, scheduled
# switching waits for the aligned configuration.
SPACE
  dim m0 = bool
  dim m1 = bool
  dim m2 = bool
PLANT
  start = 0
  sub 0 -> 1 out 0
  sub 1 -> 2 out 1
  sub 2 -> 3 out 2
  sub 3 -> 0 out 3
  program = 0 1 2 3
STORAGE
  pattern 0 = 000
  pattern 1 = 001
  pattern 2 = 010
  pattern 3 = 011
CHANNELS
  q = 1
  r = 2
  n = 1
  m = 1
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
  switch_policy = greedy
ENVIRONMENT
  error_classes = 2
  fault 1 class 0
  map class 0 -> pattern 3
RUN
  ticks = 12
  seed = 3
)SCN";

inline constexpr const char* erratic = R"SCN(# Oscillating excitation above the damping threshold: the system flags an
# erratic state and brings down a recovery configuration.
SPACE
  dim e0 = bool
  dim e1 = bool
PLANT
  start = 0
STORAGE
  pattern 0 = 00
  pattern 1 = 01
  pattern 2 = 10
CHANNELS
  q = 1
  r = 2
  n = 4
  m = 4
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
  fault 2 class 0
  fault 4 class 1
  fault 6 class 0
  fault 8 class 1
  fault 10 class 0
  fault 12 class 1
  map class 0 -> pattern 1
  map class 1 -> pattern 2
  recovery = 0
  erratic_window = 20
  erratic_threshold = 3
RUN
  ticks = 30
  seed = 8
)SCN";

inline constexpr const char* safety_hybrid = R"SCN(# Hybrid safety probe: plant dimensions plus environment state dimensions
# with a hybrid illegal set for the product-safety metrics.
SPACE
  dim p0 = bool
  dim p1 = bool
LEGAL
  blacklist 11
PLANT
  start = 0
  psi_bits = 64
STORAGE
  patterns_fill = count 2 width 64 seed 13
CHANNELS
  q = 1
  r = 1
  n = 16
  m = 16
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.25
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
  hybrid_dim x0 = bool
  hybrid_dim x1 = bool
  hybrid_blacklist 1111 1110
RUN
  ticks = 10
  seed = 9
)SCN";

inline constexpr const char* duplex_noise = R"SCN(# Noisy n-link with duplex repair: corrupted parity blocks are
# re-requested until the delivered configuration is exact.
SPACE
  dim w0 = bool
  dim w1 = bool
  dim w2 = bool
  dim w3 = bool
PLANT
  start = 0
  psi_bits = 2048
STORAGE
  patterns_fill = count 4 width 2048 seed 17
CHANNELS
  q = 1
  r = 2
  n = 128
  m = 128
  bit_error_rate = 0.001
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 4
  fault 1 class 2
  map class 2 -> pattern 3
RUN
  ticks = 60
  seed = 10
)SCN";

inline constexpr const char* minimal = R"SCN(# Smallest valid scenario: one dimension, one pattern, defaults applied.
SPACE
  dim only = bool
PLANT
  start = 0
STORAGE
  pattern 0 = 0
CHANNELS
  q = 1
  r = 1
  n = 1
  m = 1
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = spontaneous
ENVIRONMENT
  error_classes = 2
RUN
  ticks = 5
  seed = 0
)SCN";

inline std::vector<std::pair<std::string, std::string>> all() {
    return {
        {"paper_5_1.scn", paper_5_1},
        {"fig40_split.scn", fig40_split},
        {"three_component.scn", three_component},
        {"fig59_detour.scn", fig59_detour},
        {"sync_zero.scn", sync_zero},
        {"two_mode.scn", two_mode},
        {"erratic.scn", erratic},
        {"safety_hybrid.scn", safety_hybrid},
        {"duplex_noise.scn", duplex_noise},
        {"minimal.scn", minimal},
    };
}

} // namespace omegasim::builtin
