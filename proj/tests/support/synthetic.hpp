#pragma once

// Small Elliptic-shaped datasets for tests: one transaction subgraph per time
// step, 94 local + 72 aggregated columns, and labels that depend on both the
// node's own features and its neighbourhood.

#include "amlbench/graph.hpp"

#include <cstdint>
#include <filesystem>

namespace amlbench::testing {

struct SyntheticSpec {
    int time_steps = 49;
    int nodes_per_step = 40;
    /// Extra edges per step on top of the spanning tree.
    int extra_edges_per_step = 12;
    double labelled_fraction = 0.4;
    double illicit_fraction = 0.15;
    /// Mean shift of the first informative local columns for illicit nodes.
    double signal = 1.0;
    std::uint64_t seed = 7;
};

Dataset make_synthetic(const SyntheticSpec& spec = {});

/// Writes the CSV triplet into `dir` (created if needed) and returns the paths.
EllipticPaths write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec = {});

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace amlbench::testing
