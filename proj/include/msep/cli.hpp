// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

namespace msep {

// Entry point behind the msep binary; exposed so tests can drive the
// exact CLI surface in-process. Returns a process exit code:
// 0 success, 1 usage, 2 I/O or file format, 3 validation, 4 numerical.
int cli_run(const std::vector<std::string>& args);

}  // namespace msep
