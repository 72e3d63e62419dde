#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace irtp::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 2,
    kExitNumerical = 3,
};

inline constexpr const char* kThreadsEnv = "IRT_PRECISION_THREADS";

struct RunConfig {
    std::string subcommand;
    std::filesystem::path data;
    std::filesystem::path fit;
    std::filesystem::path params;
    std::filesystem::path design;
    std::filesystem::path out;
    std::filesystem::path csv;
    std::string model = "grm";
    std::string kind = "both";
    std::string mode = "enumerate";
    std::string info = "xpd";
    double alpha = 0.05;
    int quad_points = 61;
    double quad_lo = -6.0;
    double quad_hi = 6.0;
    std::uint64_t seed = 20240601;
    std::size_t draws = 1'000'000;
    int threads = 0;  // 0: take IRT_PRECISION_THREADS, else 1
    bool verbose = false;
};

// Runs one subcommand. Exit codes: 0 success, 2 input validation error,
// 3 numerical failure. Failures write a one-line JSON object to `err`.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace irtp::cli
