#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rwacert/error.hpp"
#include "rwacert/io.hpp"
#include "rwacert/rng.hpp"
#include "rwacert/types.hpp"

namespace rwacert {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::DegenerateDesign: return "degenerate_design";
    case ErrorKind::SolverStall: return "solver_stall";
    case ErrorKind::NonFiniteLoss: return "non_finite_loss";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// TimeSeries / Status

void TimeSeries::validate() const {
  require(omega.size() == friction.size(), ErrorKind::InvalidArgument,
          "time series channels differ in length");
  for (std::size_t k = 0; k < omega.size(); ++k) {
    if (!std::isfinite(omega[k]) || !std::isfinite(friction[k])) {
      fail(ErrorKind::InvalidArgument, "non-finite sample at k=" + std::to_string(k));
    }
  }
}

char kind_letter(AnomalyKind kind) noexcept {
  switch (kind) {
    case AnomalyKind::Nominal: return 'N';
    case AnomalyKind::A: return 'A';
    case AnomalyKind::B: return 'B';
    case AnomalyKind::C: return 'C';
    case AnomalyKind::D: return 'D';
  }
  return '?';
}

Status Status::make(AnomalyKind kind, int urgency) {
  if (kind == AnomalyKind::Nominal) {
    require(urgency == 0, ErrorKind::InvalidArgument, "nominal status must have urgency 0");
  } else {
    require(urgency >= 1 && urgency <= 3, ErrorKind::InvalidArgument,
            "anomaly urgency must be in 1..3");
  }
  return Status{kind, urgency};
}

Status Status::parse(std::string_view text) {
  if (text == "N" || text == "nominal" || text == "Nominal") return nominal();
  if (text.size() != 2) fail(ErrorKind::Parse, "bad status '" + std::string(text) + "'");
  AnomalyKind kind;
  switch (text[0]) {
    case 'A': kind = AnomalyKind::A; break;
    case 'B': kind = AnomalyKind::B; break;
    case 'C': kind = AnomalyKind::C; break;
    case 'D': kind = AnomalyKind::D; break;
    default: fail(ErrorKind::Parse, "bad status '" + std::string(text) + "'");
  }
  int urgency = text[1] - '0';
  if (urgency < 1 || urgency > 3) fail(ErrorKind::Parse, "bad status '" + std::string(text) + "'");
  return Status{kind, urgency};
}

std::string Status::str() const {
  if (kind == AnomalyKind::Nominal) return "N";
  return std::string(1, kind_letter(kind)) + std::to_string(urgency);
}

std::size_t Status::index() const noexcept {
  if (kind == AnomalyKind::Nominal) return 0;
  return 1 + 3 * (static_cast<std::size_t>(kind) - 1) + static_cast<std::size_t>(urgency - 1);
}

Status Status::from_index(std::size_t index) {
  require(index < kStatusCount, ErrorKind::InvalidArgument, "status index out of range");
  if (index == 0) return nominal();
  auto kind = static_cast<AnomalyKind>(1 + (index - 1) / 3);
  return Status{kind, static_cast<int>((index - 1) % 3) + 1};
}

// ---------------------------------------------------------------------------
// Rng

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] keeps the logarithm finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

int Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  int count = 0;
  double product = uniform01();
  while (product > limit) {
    ++count;
    product *= uniform01();
  }
  return count;
}

std::size_t Rng::index(std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = engine_();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                          std::uint64_t counter) noexcept {
  constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  return mix64(mix64(root + kGolden * (stream + 1)) + kGolden * (counter + 1));
}

// ---------------------------------------------------------------------------
// io

namespace io {

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
  }
  return std::string(buffer, end);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + path.parent_path().string());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename onto " + path.string());
}

namespace {

double parse_number(std::string_view field, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    fail(ErrorKind::Parse, "bad number '" + std::string(field) + "' on line " + std::to_string(line));
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

// Calls `row(fields, line_no)` for every data line after the expected header.
template <class RowFn>
void for_each_row(std::string_view text, std::string_view header, RowFn&& row) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!line.empty()) {
      if (!seen_header) {
        if (line != header) fail(ErrorKind::Parse, "expected CSV header '" + std::string(header) + "'");
        seen_header = true;
      } else {
        row(split_fields(line), line_no);
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (!seen_header) fail(ErrorKind::Parse, "empty CSV input");
}

}  // namespace

std::string series_to_csv(const TimeSeries& series) {
  std::string out = "k,omega_rad_s,friction_mNm\n";
  out.reserve(series.size() * 48);
  for (std::size_t k = 0; k < series.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    out += format_double(series.omega[k]);
    out += ',';
    out += format_double(series.friction[k]);
    out += '\n';
  }
  return out;
}

TimeSeries series_from_csv(std::string_view text) {
  TimeSeries series;
  for_each_row(text, "k,omega_rad_s,friction_mNm", [&](const auto& fields, std::size_t line) {
    if (fields.size() != 3) fail(ErrorKind::Parse, "expected 3 fields on line " + std::to_string(line));
    series.omega.push_back(parse_number(fields[1], line));
    series.friction.push_back(parse_number(fields[2], line));
  });
  series.validate();
  return series;
}

void write_series_csv(const std::filesystem::path& path, const TimeSeries& series) {
  write_file_atomic(path, series_to_csv(series));
}

TimeSeries read_series_csv(const std::filesystem::path& path) {
  return series_from_csv(read_file(path));
}

std::string truth_to_csv(const std::vector<double>& dry) {
  std::string out = "k,dry_true_mNm\n";
  for (std::size_t k = 0; k < dry.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    out += format_double(dry[k]);
    out += '\n';
  }
  return out;
}

std::vector<double> truth_from_csv(std::string_view text) {
  std::vector<double> dry;
  for_each_row(text, "k,dry_true_mNm", [&](const auto& fields, std::size_t line) {
    if (fields.size() != 2) fail(ErrorKind::Parse, "expected 2 fields on line " + std::to_string(line));
    dry.push_back(parse_number(fields[1], line));
  });
  return dry;
}

}  // namespace io
}  // namespace rwacert
