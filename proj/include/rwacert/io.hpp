#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rwacert/types.hpp"

namespace rwacert::io {

// Shortest decimal form that round-trips the double exactly ("%.17g" fallback).
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, creating
// parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Series CSV: header `k,omega_rad_s,friction_mNm`, k is the 0-based sample index.
std::string series_to_csv(const TimeSeries& series);
TimeSeries series_from_csv(std::string_view text);
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);
TimeSeries read_series_csv(const std::filesystem::path& path);

// Ground-truth sidecar: header `k,dry_true_mNm`.
std::string truth_to_csv(const std::vector<double>& dry);
std::vector<double> truth_from_csv(std::string_view text);

}  // namespace rwacert::io
