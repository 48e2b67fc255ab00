#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace masn::cli {

// Process exit codes; each failure class gets its own code.
enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,    // gradcheck found a path at or above tolerance
    kUsage = 2,          // bad flags or config
    kBadFile = 3,        // format, version, truncation or shape inconsistency
    kTaskMismatch = 4,
    kIoFailure = 5,      // missing or unwritable file
    kShapeMismatch = 6,  // checkpoint and data disagree on shapes
    kDiverged = 7,       // non-finite loss or gradient
    kInternal = 10,
};

// Runs `masn <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace masn::cli
