#pragma once

// CSV formats: records (header ch1..chn, one row per sample), index series
// (`k,value`), partitions (`k,label`), headerless matrices, and spectra
// (`class,component,value`). Reals are written with 17 significant digits so
// doubles round-trip exactly.

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nsca/error.hpp"
#include "nsca/matrix.hpp"
#include "nsca/partition.hpp"
#include "nsca/record.hpp"

namespace nsca::csv {

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

[[noreturn]] inline void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::BadInput, "line " + std::to_string(line) + ": " + what);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    fail(line, "cannot parse '" + std::string(cell) + "' as a number");
  if (!std::isfinite(v)) fail(line, "non-finite value '" + std::string(cell) + "'");
  return v;
}

inline long long parse_int(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  long long v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    fail(line, "cannot parse '" + std::string(cell) + "' as an integer");
  return v;
}

/// Reads all non-empty lines; line numbers are 1-based.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    lines.emplace_back(no, line);
  }
  return lines;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadInput, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::BadInput, "cannot write '" + path + "'");
  return out;
}

}  // namespace detail

inline void write_record(std::ostream& out, const Record& r) {
  const auto& names = r.channel_names();
  for (std::size_t c = 0; c < r.channels(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (std::size_t k = 0; k < r.length(); ++k) {
    for (std::size_t c = 0; c < r.channels(); ++c) out << (c ? "," : "") << format_double(r.at(c, k));
    out << '\n';
  }
}

inline Record read_record(std::istream& in, double sample_rate_hz = 1.0) {
  const auto lines = detail::read_lines(in);
  if (lines.size() < 2) throw Error(ErrorCode::BadInput, "record CSV needs a header and at least one row");
  std::vector<std::string> names;
  for (auto cell : detail::split(lines[0].second)) names.emplace_back(detail::trim(cell));
  const std::size_t n = names.size();
  std::vector<Vector> channels(n);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = detail::split(lines[i].second);
    if (cells.size() != n)
      detail::fail(lines[i].first, "expected " + std::to_string(n) + " columns, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < n; ++c) channels[c].push_back(detail::parse_double(cells[c], lines[i].first));
  }
  Record r = Record::from_channels(channels, sample_rate_hz);
  r.set_channel_names(std::move(names));
  return r;
}

inline void write_index(std::ostream& out, const IndexSeries& idx) {
  out << "k,value\n";
  for (std::size_t k = 0; k < idx.size(); ++k) out << k << ',' << format_double(idx.values[k]) << '\n';
}

/// Index files carry no warm-up marker, so the result has valid_from = 0.
inline IndexSeries read_index(std::istream& in) {
  const auto lines = detail::read_lines(in);
  if (lines.size() < 2) throw Error(ErrorCode::BadInput, "index CSV needs a header and at least one row");
  IndexSeries idx;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = detail::split(lines[i].second);
    if (cells.size() != 2) detail::fail(lines[i].first, "expected k,value");
    if (detail::parse_int(cells[0], lines[i].first) != static_cast<long long>(i - 1))
      detail::fail(lines[i].first, "sample index out of sequence");
    idx.values.push_back(detail::parse_double(cells[1], lines[i].first));
  }
  return idx;
}

inline void write_partition(std::ostream& out, const Partition& p) {
  out << "k,label\n";
  for (std::size_t k = 0; k < p.size(); ++k) out << k << ',' << p.labels[k] << '\n';
}

/// K is inferred as max(label) + 1, at least 2.
inline Partition read_partition(std::istream& in) {
  const auto lines = detail::read_lines(in);
  if (lines.size() < 2) throw Error(ErrorCode::BadInput, "partition CSV needs a header and at least one row");
  std::vector<int> labels;
  int k_classes = 2;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = detail::split(lines[i].second);
    if (cells.size() != 2) detail::fail(lines[i].first, "expected k,label");
    if (detail::parse_int(cells[0], lines[i].first) != static_cast<long long>(i - 1))
      detail::fail(lines[i].first, "sample index out of sequence");
    const long long lab = detail::parse_int(cells[1], lines[i].first);
    if (lab < 0 || lab > 1'000'000) detail::fail(lines[i].first, "label out of range");
    labels.push_back(static_cast<int>(lab));
    k_classes = std::max(k_classes, static_cast<int>(lab) + 1);
  }
  return Partition::from_labels(std::move(labels), k_classes);
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

inline Matrix read_matrix(std::istream& in) {
  const auto lines = detail::read_lines(in);
  if (lines.empty()) throw Error(ErrorCode::BadInput, "empty matrix CSV");
  const std::size_t cols = detail::split(lines[0].second).size();
  Matrix m(lines.size(), cols);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = detail::split(lines[i].second);
    if (cells.size() != cols) detail::fail(lines[i].first, "ragged matrix row");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = detail::parse_double(cells[j], lines[i].first);
  }
  return m;
}

inline void write_spectra(std::ostream& out, const std::vector<Vector>& spectra) {
  out << "class,component,value\n";
  for (std::size_t i = 0; i < spectra.size(); ++i)
    for (std::size_t c = 0; c < spectra[i].size(); ++c) out << i << ',' << c << ',' << format_double(spectra[i][c]) << '\n';
}

// Path conveniences.

inline void save_record(const std::string& path, const Record& r) {
  auto out = detail::open_out(path);
  write_record(out, r);
}
inline Record load_record(const std::string& path, double sample_rate_hz = 1.0) {
  auto in = detail::open_in(path);
  return read_record(in, sample_rate_hz);
}
inline void save_index(const std::string& path, const IndexSeries& idx) {
  auto out = detail::open_out(path);
  write_index(out, idx);
}
inline IndexSeries load_index(const std::string& path) {
  auto in = detail::open_in(path);
  return read_index(in);
}
inline void save_partition(const std::string& path, const Partition& p) {
  auto out = detail::open_out(path);
  write_partition(out, p);
}
inline Partition load_partition(const std::string& path) {
  auto in = detail::open_in(path);
  return read_partition(in);
}
inline void save_matrix(const std::string& path, const Matrix& m) {
  auto out = detail::open_out(path);
  write_matrix(out, m);
}
inline Matrix load_matrix(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix(in);
}
inline void save_spectra(const std::string& path, const std::vector<Vector>& spectra) {
  auto out = detail::open_out(path);
  write_spectra(out, spectra);
}

}  // namespace nsca::csv
