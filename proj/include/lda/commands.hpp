#pragma once

#include <iosfwd>

#include "lda/config.hpp"

namespace lda {

// Executes the configured command: writes CSV artifacts into cfg.output and a
// short run summary to `log`. Throws the module error taxonomy on failure;
// identical (config, seed) pairs produce byte-identical artifacts for any
// thread count.
void run_command(const RunConfig& cfg, std::ostream& log);

} // namespace lda
