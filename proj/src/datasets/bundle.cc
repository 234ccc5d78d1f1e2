/*
 * Copyright 2026 The IViDR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ividr/datasets/bundle.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "ividr/common/error.h"

namespace ividr::datasets {
namespace {

namespace fs = std::filesystem;
using numerics::Matrix;

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream create(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

void write_rows(const fs::path& path, const Matrix& m) {
  auto out = create(path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << r;
    for (std::size_t c = 0; c < m.cols(); ++c) out << '\t' << fmt_real(m(r, c));
    out << '\n';
  }
}

std::vector<std::string> tab_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

long long to_int(const std::string& s, std::size_t line_no) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line_no);
  return v;
}

double to_real(const std::string& s, std::size_t line_no) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad number '" + s + "'", line_no);
  return v;
}

// Reads `user \t v_0 ...` rows into an n_users × width matrix.
Matrix read_rows(const fs::path& path, std::size_t n_users, std::size_t width) {
  auto in = open(path);
  Matrix m(n_users, width);
  std::vector<bool> seen(n_users, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = tab_fields(line);
    if (f.size() != width + 1) throw ParseError(path.filename().string() + ": wrong field count", line_no);
    const auto u = to_int(f[0], line_no);
    if (u < 0 || static_cast<std::size_t>(u) >= n_users) throw ParseError("user id out of range", line_no);
    seen[static_cast<std::size_t>(u)] = true;
    for (std::size_t c = 0; c < width; ++c) m(static_cast<std::size_t>(u), c) = to_real(f[c + 1], line_no);
  }
  for (bool s : seen) {
    if (!s) throw ValidationError(path.filename().string() + " does not cover every user");
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> pack_bits(const Matrix& binary) {
  std::vector<std::uint8_t> bytes((binary.size() + 7) / 8, 0);
  const double* d = binary.data().data();
  for (std::size_t k = 0; k < binary.size(); ++k) {
    if (d[k] != 0.0) bytes[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  }
  return bytes;
}

Matrix unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  if (bytes.size() != (n + 7) / 8) {
    throw ValidationError("exposure.bin has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string((n + 7) / 8));
  }
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < n; ++k) {
    if (bytes[k / 8] & (1u << (k % 8))) m(k / cols, k % cols) = 1.0;
  }
  return m;
}

void write_bundle(const fs::path& dir, const InteractionDataset& data, const Matrix& exposure,
                  const Matrix* ground_truth_c, nlohmann::ordered_json meta) {
  fs::create_directories(dir);
  if (exposure.rows() != static_cast<std::size_t>(data.n_users) ||
      exposure.cols() != static_cast<std::size_t>(data.n_items)) {
    throw ShapeError("exposure shape differs from dataset dimensions");
  }
  {
    auto out = create(dir / "interactions.tsv");
    for (const auto& t : data.triples) {
      out << t.user << '\t' << t.item << '\t' << t.rating << '\t' << split_name(t.split) << '\n';
    }
  }
  {
    auto out = create(dir / "exposure.bin");
    const auto bytes = pack_bits(exposure);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  {
    auto out = create(dir / "proxies.tsv");
    for (std::size_t u = 0; u < data.proxy.size(); ++u) out << u << '\t' << data.proxy[u] << '\n';
  }
  write_rows(dir / "features.tsv", data.user_features);
  if (ground_truth_c != nullptr) write_rows(dir / "ground_truth_c.tsv", *ground_truth_c);

  meta["n_users"] = data.n_users;
  meta["n_items"] = data.n_items;
  meta["n_biased"] = data.count(SplitTag::kBiased);
  meta["n_unbiased"] = data.count(SplitTag::kUnbiased);
  meta["feature_dim"] = data.user_features.cols();
  meta["proxy_categories"] = data.n_proxy_categories;
  meta["confounder_dim"] = ground_truth_c != nullptr ? ground_truth_c->cols() : 0;
  auto out = create(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

Bundle read_bundle(const fs::path& dir) {
  Bundle b;
  {
    auto in = open(dir / "meta.json");
    try {
      b.meta = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("meta.json: ") + e.what());
    }
  }
  std::size_t n_users = 0, n_items = 0, feature_dim = 0, c_dim = 0;
  try {
    n_users = b.meta.at("n_users").get<std::size_t>();
    n_items = b.meta.at("n_items").get<std::size_t>();
    feature_dim = b.meta.at("feature_dim").get<std::size_t>();
    c_dim = b.meta.value("confounder_dim", std::size_t{0});
    b.data.n_proxy_categories = b.meta.at("proxy_categories").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("meta.json: ") + e.what());
  }
  auto& ds = b.data;
  ds.n_users = static_cast<int>(n_users);
  ds.n_items = static_cast<int>(n_items);
  ds.user_ids = IdMap::dense(n_users);
  ds.item_ids = IdMap::dense(n_items);
  {
    auto in = open(dir / "interactions.tsv");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = tab_fields(line);
      if (f.size() != 4) throw ParseError("interactions.tsv: expected 4 fields", line_no);
      auto split = parse_split(f[3]);
      if (!split) throw ParseError("interactions.tsv: unknown split '" + f[3] + "'", line_no);
      ds.triples.push_back({static_cast<int>(to_int(f[0], line_no)), static_cast<int>(to_int(f[1], line_no)),
                            static_cast<int>(to_int(f[2], line_no)), *split});
    }
  }
  {
    auto in = open(dir / "exposure.bin");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    b.exposure = unpack_bits(bytes, n_users, n_items);
  }
  {
    auto in = open(dir / "proxies.tsv");
    ds.proxy.assign(n_users, -1);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = tab_fields(line);
      if (f.size() != 2) throw ParseError("proxies.tsv: expected 2 fields", line_no);
      const auto u = to_int(f[0], line_no);
      if (u < 0 || static_cast<std::size_t>(u) >= n_users) throw ParseError("user id out of range", line_no);
      ds.proxy[static_cast<std::size_t>(u)] = static_cast<int>(to_int(f[1], line_no));
    }
    if (line_no == 0) ds.proxy.clear();
  }
  ds.user_features = feature_dim > 0 ? read_rows(dir / "features.tsv", n_users, feature_dim) : Matrix(n_users, 0);
  if (c_dim > 0 && fs::exists(dir / "ground_truth_c.tsv")) {
    b.ground_truth_c = read_rows(dir / "ground_truth_c.tsv", n_users, c_dim);
  }
  ds.validate();
  for (const auto& t : ds.triples) {
    if (t.split == SplitTag::kBiased &&
        b.exposure(static_cast<std::size_t>(t.user), static_cast<std::size_t>(t.item)) == 0.0) {
      throw ValidationError("exposure does not cover biased triple (" + std::to_string(t.user) + ", " +
                            std::to_string(t.item) + ")");
    }
  }
  return b;
}

}  // namespace ividr::datasets
