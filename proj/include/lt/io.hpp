#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lt/errors.hpp"
#include "lt/grid.hpp"

namespace lt {

// Field dump formats.
//
// CSV: header `x1,...,xn,c1,...,ck`, one row per node, row-major with axis 1
// fastest, coordinates then component values, %.17g.
//
// Binary twin: magic "LTFD", u32 dim, u32 components, u32 per-axis sizes,
// then little-endian float64 values node-major in the same order as the CSV
// rows (k values per node, no coordinates).

struct FieldDump {
  PeriodicGrid grid;
  int components = 0;
  std::vector<double> values;  // node-major: values[i*k + c]
};

namespace detail {

template <typename At>
FieldDump pack_field(const PeriodicGrid& g, int k, At&& at) {
  FieldDump d;
  d.grid = g;
  d.components = k;
  d.values.resize(static_cast<size_t>(g.num_nodes()) * static_cast<size_t>(k));
  for (index_t i = 0; i < g.num_nodes(); ++i)
    for (int c = 0; c < k; ++c)
      d.values[static_cast<size_t>(i) * static_cast<size_t>(k) + static_cast<size_t>(c)] =
          at(c, i);
  return d;
}

}  // namespace detail

inline FieldDump pack(const ScalarField& f) {
  return detail::pack_field(f.grid(), 1, [&](int, index_t i) { return f[i]; });
}
inline FieldDump pack(const OneFormField& f) {
  return detail::pack_field(f.grid(), f.grid().dim(),
                            [&](int c, index_t i) { return f.at(c, i); });
}
inline FieldDump pack(const TwoFormField& f) {
  return detail::pack_field(f.grid(), f.num_components(),
                            [&](int c, index_t i) { return f.at(c, i); });
}

inline void write_field_csv(const std::string& path, const FieldDump& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for write: " + path);
  const int n = d.grid.dim(), k = d.components;
  for (int a = 0; a < n; ++a) out << "x" << (a + 1) << ",";
  for (int c = 0; c < k; ++c) out << "c" << (c + 1) << (c + 1 < k ? "," : "\n");
  for (index_t i = 0; i < d.grid.num_nodes(); ++i) {
    const Vec x = d.grid.position(i);
    for (int a = 0; a < n; ++a) out << format_double(x[a]) << ",";
    for (int c = 0; c < k; ++c) {
      out << format_double(
          d.values[static_cast<size_t>(i) * static_cast<size_t>(k) + static_cast<size_t>(c)]);
      out << (c + 1 < k ? "," : "\n");
    }
  }
}

inline void write_field_bin(const std::string& path, const FieldDump& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for write: " + path);
  out.write("LTFD", 4);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(d.grid.dim()));
  put_u32(static_cast<std::uint32_t>(d.components));
  for (int a = 0; a < d.grid.dim(); ++a)
    put_u32(static_cast<std::uint32_t>(d.grid.size(a)));
  static_assert(sizeof(double) == 8);
  // Doubles are written verbatim; this code targets little-endian hosts.
  out.write(reinterpret_cast<const char*>(d.values.data()),
            static_cast<std::streamsize>(d.values.size() * sizeof(double)));
}

inline FieldDump read_field_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for read: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LTFD", 4) != 0)
    throw ConfigError("bad magic in " + path);
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  const int dim = static_cast<int>(get_u32());
  const int k = static_cast<int>(get_u32());
  std::array<int, 3> sizes{1, 1, 1};
  for (int a = 0; a < dim; ++a) sizes[static_cast<size_t>(a)] = static_cast<int>(get_u32());
  FieldDump d;
  d.grid = PeriodicGrid(dim, sizes);
  d.components = k;
  d.values.resize(static_cast<size_t>(d.grid.num_nodes()) * static_cast<size_t>(k));
  in.read(reinterpret_cast<char*>(d.values.data()),
          static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated field file: " + path);
  return d;
}

inline FieldDump read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for read: " + path);
  std::string header;
  std::getline(in, header);
  int n = 0, k = 0;
  {
    std::stringstream ss(header);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty() && tok[0] == 'x') ++n;
      if (!tok.empty() && tok[0] == 'c') ++k;
    }
  }
  if (n < 2 || n > 3 || k < 1) throw ConfigError("bad CSV header in " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) row.push_back(std::strtod(tok.c_str(), nullptr));
    if (static_cast<int>(row.size()) != n + k) throw ConfigError("bad CSV row in " + path);
    rows.push_back(std::move(row));
  }
  // Recover per-axis sizes from the coordinate columns (uniform unit torus).
  std::array<int, 3> sizes{1, 1, 1};
  index_t total = static_cast<index_t>(rows.size());
  for (int a = 0; a < n; ++a) {
    double mindist = 1.0;
    for (const auto& r : rows)
      if (r[static_cast<size_t>(a)] > 0.0)
        mindist = std::min(mindist, r[static_cast<size_t>(a)]);
    sizes[static_cast<size_t>(a)] = static_cast<int>(std::lround(1.0 / mindist));
  }
  FieldDump d;
  d.grid = PeriodicGrid(n, sizes);
  if (d.grid.num_nodes() != total) throw ConfigError("CSV node count mismatch in " + path);
  d.components = k;
  d.values.resize(static_cast<size_t>(total) * static_cast<size_t>(k));
  for (index_t i = 0; i < total; ++i)
    for (int c = 0; c < k; ++c)
      d.values[static_cast<size_t>(i) * static_cast<size_t>(k) + static_cast<size_t>(c)] =
          rows[static_cast<size_t>(i)][static_cast<size_t>(n + c)];
  return d;
}

inline ScalarField to_scalar(const FieldDump& d) {
  if (d.components != 1) throw ConfigError("dump is not a scalar field");
  return ScalarField::from_values(d.grid, d.values);
}

}  // namespace lt
