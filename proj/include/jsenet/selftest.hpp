#pragma once

// Deterministic report over a small labeled fixture, compared against a
// committed golden file produced by an independent implementation.

#include <filesystem>
#include <string>

namespace jsenet {

struct SelftestSettings {
  int num_classes = 3;
  double edge_radius = 0.02;
  double neighbor_radius = 0.03;
  double subsample_cell = 0.05;
};

// The fixture holds x, y, z, label, pred and score_0 .. score_{K-1} vertex properties.
std::string selftest_report(const std::filesystem::path& fixture, const SelftestSettings& settings = {});

}  // namespace jsenet
