#pragma once

#include <string>
#include <vector>

namespace smile::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;
inline constexpr int kMissingFile = 3;
inline constexpr int kInvalidConfig = 4;
inline constexpr int kBadData = 5;

/// Environment variable naming the default root for run directories.
inline constexpr const char* kRunRootEnv = "SMILE_RUN_ROOT";

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace smile::cli
