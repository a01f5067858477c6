#pragma once

namespace wde {

/// Grid kernels come in a plain serial form (the reference used by tests) and
/// an OpenMP form. Both produce identical values; the parallel coefficient
/// accumulation merges fixed-size chunks in order, so it is deterministic too.
enum class Exec { serial, parallel };

}  // namespace wde
