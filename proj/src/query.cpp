#include "rwacert/query.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "rwacert/error.hpp"
#include "rwacert/io.hpp"

namespace rwacert::query {

namespace {

class Lexer {
 public:
  Lexer(std::string_view s, std::size_t line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  bool accept(std::string_view tok) {
    skip_ws();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }
  bool at_number() {
    char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }
  double number() {
    skip_ws();
    double v = 0.0;
    auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{} || !std::isfinite(v)) error("expected a number");
    pos_ = static_cast<std::size_t>(end - s_.data());
    return v;
  }
  std::size_t index() {
    skip_ws();
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{}) error("expected a non-negative integer");
    pos_ = static_cast<std::size_t>(end - s_.data());
    return v;
  }
  std::string_view rest() {
    skip_ws();
    auto r = s_.substr(pos_);
    pos_ = s_.size();
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.remove_suffix(1);
    return r;
  }
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::Parse, "query line " + std::to_string(line_) + ": " + what + " at column " +
                               std::to_string(pos_ + 1));
  }

 private:
  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

// sum of [+|-] [coef [*]] x_i terms
std::map<std::size_t, double> parse_terms(Lexer& lx) {
  std::map<std::size_t, double> terms;
  bool first = true;
  for (;;) {
    double sign = 1.0;
    if (lx.accept("+")) sign = 1.0;
    else if (lx.accept("-")) sign = -1.0;
    else if (!first) break;
    double coef = 1.0;
    if (lx.at_number()) {
      coef = lx.number();
      lx.accept("*");
    }
    if (!lx.accept("x_")) lx.error("expected variable x_<i>");
    terms[lx.index()] += sign * coef;
    first = false;
  }
  return terms;
}

lp::Relation parse_relation(Lexer& lx) {
  if (lx.accept("<=")) return lp::Relation::Le;
  if (lx.accept(">=")) return lp::Relation::Ge;
  if (lx.accept("==") || lx.accept("=")) return lp::Relation::Eq;
  lx.error("expected <=, >= or ==");
}

}  // namespace

verifier::InputRegion Query::region(std::size_t d) const {
  require(!dim || *dim == d, ErrorKind::DimensionMismatch,
          "query dim " + std::to_string(dim.value_or(0)) + " != model input_dim " + std::to_string(d));
  verifier::InputRegion r;
  r.lower.assign(d, 0.0);
  r.upper.assign(d, 1.0);
  auto check = [d](std::size_t i) {
    require(i < d, ErrorKind::DimensionMismatch, "query references x_" + std::to_string(i) + " beyond dim " +
                                                     std::to_string(d));
  };
  for (auto [i, v] : lower) check(i), r.lower[i] = v;
  for (auto [i, v] : upper) check(i), r.upper[i] = v;
  for (const auto& c : linear) {
    std::vector<double> coeffs(d, 0.0);
    for (auto [i, v] : c.terms) check(i), coeffs[i] = v;
    r.linear.push_back({std::move(coeffs), c.rel, c.rhs});
  }
  r.validate();
  return r;
}

Query parse(std::string_view text, const std::filesystem::path& base_dir) {
  Query q;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    Lexer lx(line, line_no);
    if (lx.done()) {
      if (end == text.size()) break;
      continue;
    }

    if (lx.accept("model ")) {
      std::filesystem::path p{std::string(lx.rest())};
      if (p.empty()) lx.error("missing model path");
      q.model = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else if (lx.accept("expected ")) {
      q.expected = lx.index();
      if (*q.expected > 3) lx.error("class index must be 0..3");
    } else if (lx.accept("target ")) {
      q.target = lx.index();
      if (*q.target > 3) lx.error("class index must be 0..3");
    } else if (lx.accept("dim ")) {
      q.dim = lx.index();
    } else {
      auto terms = parse_terms(lx);
      auto rel = parse_relation(lx);
      double rhs = lx.number();
      if (!lx.done()) lx.error("trailing characters");
      bool single = terms.size() == 1 && terms.begin()->second == 1.0;
      if (single && rel != lp::Relation::Eq) {
        auto i = terms.begin()->first;
        if (rel == lp::Relation::Ge) q.lower[i] = rhs;
        else q.upper[i] = rhs;
      } else if (single) {
        q.lower[terms.begin()->first] = rhs;
        q.upper[terms.begin()->first] = rhs;
      } else {
        q.linear.push_back({std::move(terms), rel, rhs});
      }
    }
    if (end == text.size()) break;
  }
  require(!q.model.empty(), ErrorKind::Parse, "query has no 'model' line");
  require(q.expected.has_value() != q.target.has_value(), ErrorKind::Parse,
          "query needs exactly one of 'expected <k>' or 'target <k>'");
  return q;
}

Query load(const std::filesystem::path& path) { return parse(io::read_file(path), path.parent_path()); }

std::string format(const verifier::InputRegion& region, const std::string& model_path,
                   std::optional<std::size_t> expected, std::optional<std::size_t> target) {
  std::ostringstream out;
  out << "model " << model_path << "\n";
  out << "dim " << region.dim() << "\n";
  for (std::size_t i = 0; i < region.dim(); ++i) {
    out << "x_" << i << " >= " << io::format_double(region.lower[i]) << "\n";
    out << "x_" << i << " <= " << io::format_double(region.upper[i]) << "\n";
  }
  for (const auto& c : region.linear) {
    bool first = true;
    for (std::size_t i = 0; i < c.coeffs.size(); ++i) {
      if (c.coeffs[i] == 0.0) continue;
      double a = c.coeffs[i];
      if (!first) out << (a < 0 ? " - " : " + ");
      else if (a < 0) out << "-";
      out << io::format_double(std::abs(a)) << " x_" << i;
      first = false;
    }
    if (first) continue;
    out << (c.rel == lp::Relation::Le ? " <= " : c.rel == lp::Relation::Ge ? " >= " : " == ")
        << io::format_double(c.rhs) << "\n";
  }
  if (expected) out << "expected " << *expected << "\n";
  if (target) out << "target " << *target << "\n";
  return out.str();
}

}  // namespace rwacert::query
