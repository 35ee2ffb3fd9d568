#pragma once

namespace homeauth::cli {

/// Exit codes: 0 ok, 1 usage, 2 data error, 3 internal error.
enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

int run(int argc, char** argv);

}  // namespace homeauth::cli
