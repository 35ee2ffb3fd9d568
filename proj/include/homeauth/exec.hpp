#pragma once

namespace homeauth {

/// Selects the serial reference path or the OpenMP path of a kernel.
/// Both paths produce bit-identical results.
enum class Exec { Serial, Parallel };

}  // namespace homeauth
