#pragma once

#include <string>
#include <vector>

#include "sgl/config.hpp"

namespace sgl {

// Exit codes shared with the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPropertyFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDivergence = 3;

struct RunContext {
    ConfigFile cfg;
    std::string out_dir;
    std::uint64_t master_seed = 42;
    int workers = 1;
};

int run_kl_dynamics(const RunContext& ctx);
int run_modes_shift(const RunContext& ctx);
int run_capacity_sweep(const RunContext& ctx);
int run_bounds(const RunContext& ctx);
int run_mc_gap(const RunContext& ctx);
int run_verify(const RunContext& ctx);

int run_experiment(const std::string& kind, const RunContext& ctx);

struct PropertyResult {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
    std::string note;
};

// The registered module invariants executed by `verify`.
std::vector<PropertyResult> run_all_properties(std::uint64_t master_seed,
                                               const std::string& scratch_dir);

}  // namespace sgl
