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

#include "ividr/datasets/loaders.h"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ividr/common/error.h"

namespace ividr::datasets {
namespace {

std::vector<std::string> split_fields(const std::string& line, bool tabs_only) {
  std::vector<std::string> out;
  if (tabs_only) {
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find('\t', start);
      out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  } else {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
  }
  return out;
}

bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

int parse_int(const std::string& s, std::size_t line_no) {
  int v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ParseError("not an integer: '" + s + "'", line_no);
  return v;
}

double parse_real(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError("not a number: '" + s + "'", line_no);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("not a number: '" + s + "'", line_no);
  }
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::string chomp(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Collects triples with last-wins semantics on (user, item, split).
class TripleSink {
 public:
  explicit TripleSink(InteractionDataset& ds) : ds_(ds) {}

  void add(int user, int item, int rating, SplitTag split, std::size_t line_no) {
    if (rating < 1 || rating > 5) {
      throw ValidationError("rating " + std::to_string(rating) + " outside [1, 5] (line " +
                            std::to_string(line_no) + ")");
    }
    auto key = std::make_tuple(user, item, static_cast<int>(split));
    auto [it, inserted] = seen_.try_emplace(key, ds_.triples.size());
    if (inserted) {
      ds_.triples.push_back({user, item, rating, split});
    } else {
      ds_.triples[it->second].rating = rating;
      ++ds_.duplicates_dropped;
    }
  }

 private:
  InteractionDataset& ds_;
  std::map<std::tuple<int, int, int>, std::size_t> seen_;
};

void load_dense_into(const std::filesystem::path& path, SplitTag split, InteractionDataset& ds,
                     TripleSink& sink) {
  auto in = open(path);
  std::string line;
  std::size_t line_no = 0;
  int row = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = chomp(line);
    if (blank_or_comment(line)) continue;
    auto fields = split_fields(line, false);
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, got " + std::to_string(fields.size()),
                       line_no);
    }
    const int u = ds.user_ids.intern(std::to_string(row));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const int r = parse_int(fields[c], line_no);
      if (r == 0) continue;
      const int i = ds.item_ids.intern(std::to_string(c));
      sink.add(u, i, r, split, line_no);
    }
    ++row;
  }
  // Items that nobody rated still exist in the matrix layout.
  for (std::size_t c = 0; c < width; ++c) ds.item_ids.intern(std::to_string(c));
}

void finish(InteractionDataset& ds) {
  ds.n_users = static_cast<int>(ds.user_ids.size());
  ds.n_items = static_cast<int>(ds.item_ids.size());
  ds.validate();
}

}  // namespace

InteractionDataset load_explicit(const std::filesystem::path& path, InputFormat format,
                                 SplitTag dense_split) {
  InteractionDataset ds;
  TripleSink sink(ds);
  if (format == InputFormat::kDenseMatrix) {
    load_dense_into(path, dense_split, ds, sink);
    finish(ds);
    return ds;
  }
  auto in = open(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = chomp(line);
    if (blank_or_comment(line)) continue;
    auto fields = split_fields(line, true);
    if (fields.size() != 3 && fields.size() != 4) {
      throw ParseError("expected user\\titem\\trating[\\tsplit], got " + std::to_string(fields.size()) +
                           " fields",
                       line_no);
    }
    if (fields[0].empty() || fields[1].empty()) throw ParseError("empty id", line_no);
    SplitTag split = SplitTag::kBiased;
    if (fields.size() == 4) {
      auto s = parse_split(fields[3]);
      if (!s) throw ParseError("unknown split '" + fields[3] + "'", line_no);
      split = *s;
    }
    const int rating = parse_int(fields[2], line_no);
    const int u = ds.user_ids.intern(fields[0]);
    const int i = ds.item_ids.intern(fields[1]);
    sink.add(u, i, rating, split, line_no);
  }
  finish(ds);
  return ds;
}

InteractionDataset load_coat_directory(const std::filesystem::path& dir) {
  InteractionDataset ds;
  TripleSink sink(ds);
  load_dense_into(dir / "train.ascii", SplitTag::kBiased, ds, sink);
  load_dense_into(dir / "test.ascii", SplitTag::kUnbiased, ds, sink);
  for (auto candidate : {dir / "user_item_features" / "user_features.ascii", dir / "user_features.ascii"}) {
    if (std::filesystem::exists(candidate)) {
      ds.user_features = load_dense_matrix(candidate);
      break;
    }
  }
  ds.n_users = static_cast<int>(ds.user_ids.size());
  ds.n_items = static_cast<int>(ds.item_ids.size());
  if (!ds.user_features.empty() && ds.user_features.rows() != static_cast<std::size_t>(ds.n_users)) {
    throw ValidationError("user feature file has " + std::to_string(ds.user_features.rows()) +
                          " rows for " + std::to_string(ds.n_users) + " users");
  }
  finish(ds);
  return ds;
}

numerics::Matrix load_dense_matrix(const std::filesystem::path& path) {
  auto in = open(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = chomp(line);
    if (blank_or_comment(line)) continue;
    auto fields = split_fields(line, false);
    if (width == 0) width = fields.size();
    if (fields.size() != width) throw ParseError("ragged matrix row", line_no);
    for (const auto& f : fields) data.push_back(parse_real(f, line_no));
    ++rows;
  }
  return numerics::Matrix(rows, width, std::move(data));
}

void write_triples_tsv(const InteractionDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : ds.triples) {
    out << ds.user_ids.original(t.user) << '\t' << ds.item_ids.original(t.item) << '\t' << t.rating << '\t'
        << split_name(t.split) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ividr::datasets
