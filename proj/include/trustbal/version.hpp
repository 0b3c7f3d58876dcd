#pragma once

namespace trustbal {

inline constexpr const char* kArtifactName = "trustbal";
inline constexpr const char* kArtifactVersion = "0.1.0";

// Pseudo-random generator identity, recorded in every output report so a
// run can be reproduced on another machine.
inline constexpr const char* kRngName = "pcg64-setseq";
inline constexpr const char* kRngVersion = "1.0";

}  // namespace trustbal
