#pragma once

namespace genpred {

// Selects between the serial reference loop and the OpenMP kernel. Both
// produce bitwise-identical results: parallel kernels write per-item partials
// and reduce them in index order.
enum class Execution { serial, parallel };

}  // namespace genpred
