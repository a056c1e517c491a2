#pragma once

namespace mfl {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kResultsSchemaId = "mfl-results-v1";

}  // namespace mfl
