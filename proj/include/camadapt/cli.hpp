#pragma once

#include <ostream>

namespace camadapt {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitIo = 3,
    kExitValidation = 4,
    kExitGradcheck = 5,
};

/// Runs one `camadapt` command line: train, classify, seg-eval, synth or
/// gradcheck. Never throws; failures map to the exit codes above.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace camadapt
