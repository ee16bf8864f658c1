#pragma once

#include <stdexcept>

namespace dynloss {

/// File-system and file-format failures. Kept distinct from std::runtime_error
/// so the CLI can map them to their own exit code.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dynloss
