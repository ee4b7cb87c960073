#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bome/core.hpp"
#include "bome/linalg.hpp"

namespace bome::problems {

/// Writes one row per sample:
///   feature_0,...,feature_{p-1},label,is_corrupted
/// Reals use 17 significant digits. `corrupted` may be empty (all zero).
inline void write_dataset_csv(const std::string& path, const Matrix& features,
                              const std::vector<double>& labels, const std::vector<bool>& corrupted) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < features.cols(); ++j) out << "feature_" << j << ',';
  out << "label,is_corrupted\n";
  char buf[32];
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < features.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", features(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", labels[i]);
    out << buf << ',' << (!corrupted.empty() && corrupted[i] ? 1 : 0) << '\n';
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace bome::problems
