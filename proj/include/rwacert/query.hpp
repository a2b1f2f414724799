#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rwacert/lp.hpp"
#include "rwacert/verifier.hpp"

// Line-oriented verification query files; see docs/query_format.md.
//
//   model nn_c.json
//   x_0 >= 0.05
//   x_0 <= 0.10
//   2 x_3 - x_4 <= 0.5
//   expected 1
namespace rwacert::query {

struct SparseConstraint {
  std::map<std::size_t, double> terms;  // variable index -> coefficient
  lp::Relation rel = lp::Relation::Le;
  double rhs = 0.0;
};

struct Query {
  std::filesystem::path model;  // resolved against the query file's directory
  std::map<std::size_t, double> lower;
  std::map<std::size_t, double> upper;
  std::vector<SparseConstraint> linear;
  std::optional<std::size_t> expected;
  std::optional<std::size_t> target;
  std::optional<std::size_t> dim;

  // Unbounded coordinates default to [0, 1], the range of a relative-frequency bin.
  verifier::InputRegion region(std::size_t dim) const;
};

// Throws Parse errors carrying the 1-based line number.
Query parse(std::string_view text, const std::filesystem::path& base_dir = {});
Query load(const std::filesystem::path& path);

// Writes a query whose box is exactly `region` (full-precision numbers).
std::string format(const verifier::InputRegion& region, const std::string& model_path,
                   std::optional<std::size_t> expected, std::optional<std::size_t> target = std::nullopt);

}  // namespace rwacert::query
