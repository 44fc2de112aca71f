// Copyright 2026 The hsiseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hsiseg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hsiseg/error.hpp"

namespace hsiseg {
namespace {

double choose2(std::uint64_t k) {
  const auto x = static_cast<double>(k);
  return 0.5 * x * (x - 1.0);
}

double entropy(const std::vector<std::uint64_t>& counts, double n) {
  double h = 0.0;
  for (std::uint64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

std::size_t index_of(const std::vector<Label>& sorted, Label v) {
  return static_cast<std::size_t>(
      std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
}

}  // namespace

std::vector<std::uint64_t> ContingencyTable::row_sums() const {
  std::vector<std::uint64_t> s(rows(), 0);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) s[r] += at(r, c);
  return s;
}

std::vector<std::uint64_t> ContingencyTable::col_sums() const {
  std::vector<std::uint64_t> s(cols(), 0);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) s[c] += at(r, c);
  return s;
}

ContingencyTable contingency(std::span<const Label> a, std::span<const Label> b,
                             std::span<const std::uint8_t> include) {
  require(a.size() == b.size(), ErrorKind::kContract,
          "labelings differ in length: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  require(include.empty() || include.size() == a.size(), ErrorKind::kContract,
          "mask length does not match the labelings");
  ContingencyTable t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    t.row_labels.push_back(a[i]);
    t.col_labels.push_back(b[i]);
  }
  for (auto* v : {&t.row_labels, &t.col_labels}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  t.counts.assign(t.rows() * t.cols(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    ++t.counts[index_of(t.row_labels, a[i]) * t.cols() +
               index_of(t.col_labels, b[i])];
    ++t.n;
  }
  return t;
}

ContingencyTable contingency_excluding_background(std::span<const Label> predicted,
                                                  std::span<const Label> truth) {
  std::vector<std::uint8_t> include(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) include[i] = truth[i] != 0;
  return contingency(predicted, truth, include);
}

PairCounts pair_counts(const ContingencyTable& table) {
  std::uint64_t same_both = 0, same_a = 0, same_b = 0;
  auto c2 = [](std::uint64_t k) { return k * (k - (k > 0 ? 1 : 0)) / 2; };
  for (std::uint64_t v : table.counts) same_both += c2(v);
  for (std::uint64_t v : table.row_sums()) same_a += c2(v);
  for (std::uint64_t v : table.col_sums()) same_b += c2(v);
  PairCounts p;
  p.a = same_both;
  p.b = same_a - same_both;
  p.c = same_b - same_both;
  p.d = c2(table.n) - p.a - p.b - p.c;
  return p;
}

double nmi(const ContingencyTable& table) {
  require(table.n >= 1, ErrorKind::kUndefined, "NMI needs at least one point");
  const auto n = static_cast<double>(table.n);
  const double ha = entropy(table.row_sums(), n);
  const double hb = entropy(table.col_sums(), n);
  const double hab = entropy(table.counts, n);
  const bool a_zero = ha <= 0.0, b_zero = hb <= 0.0;
  if (a_zero && b_zero) return 1.0;
  if (a_zero || b_zero) return 0.0;
  const double mi = ha + hb - hab;
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double ars(const PairCounts& p) {
  const std::uint64_t pairs = p.total();
  require(pairs >= 1, ErrorKind::kUndefined, "ARS needs at least two points");
  const auto a = static_cast<double>(p.a), b = static_cast<double>(p.b);
  const auto c = static_cast<double>(p.c), d = static_cast<double>(p.d);
  const auto total = static_cast<double>(pairs);
  const double chance = (a + b) * (a + c) + (c + d) * (b + d);
  const double numerator = total * (a + d) - chance;
  const double denominator = total * total - chance;
  // Both labelings trivial (all one cluster or all singletons).
  if (denominator == 0.0) return (p.b == 0 && p.c == 0) ? 1.0 : 0.0;
  return numerator / denominator;
}

double adjusted_rand_contingency(const ContingencyTable& table) {
  require(table.n >= 2, ErrorKind::kUndefined, "ARS needs at least two points");
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (std::uint64_t v : table.counts) index += choose2(v);
  for (std::uint64_t v : table.row_sums()) sum_rows += choose2(v);
  for (std::uint64_t v : table.col_sums()) sum_cols += choose2(v);
  const double expected = sum_rows * sum_cols / choose2(table.n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return index == max_index ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

SupervisedScores supervised_scores(const ContingencyTable& table) {
  require(table.n > 0, ErrorKind::kContract, "empty contingency table");
  const auto n = static_cast<double>(table.n);
  const auto rows = table.row_sums();
  const auto cols = table.col_sums();
  double agree = 0.0, chance = 0.0, recall_sum = 0.0;
  for (std::size_t c = 0; c < table.cols(); ++c) {
    const Label cls = table.col_labels[c];
    const auto r = std::lower_bound(table.row_labels.begin(),
                                    table.row_labels.end(), cls);
    double hits = 0.0, predicted = 0.0;
    if (r != table.row_labels.end() && *r == cls) {
      const auto ri = static_cast<std::size_t>(r - table.row_labels.begin());
      hits = static_cast<double>(table.at(ri, c));
      predicted = static_cast<double>(rows[ri]);
    }
    agree += hits;
    chance += predicted * static_cast<double>(cols[c]);
    recall_sum += hits / static_cast<double>(cols[c]);
  }
  SupervisedScores s;
  s.oa = agree / n;
  s.aa = recall_sum / static_cast<double>(table.cols());
  const double pe = chance / (n * n);
  s.kappa = pe >= 1.0 ? (s.oa >= 1.0 ? 1.0 : 0.0) : 1.0 - (1.0 - s.oa) / (1.0 - pe);
  return s;
}

std::map<Label, Label> majority_vote_mapping(const ContingencyTable& table) {
  std::map<Label, Label> mapping;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < table.cols(); ++c)
      if (table.at(r, c) > table.at(r, best)) best = c;
    mapping[table.row_labels[r]] = table.col_labels[best];
  }
  return mapping;
}

ContingencyTable majority_vote_table(const ContingencyTable& table) {
  const auto mapping = majority_vote_mapping(table);
  ContingencyTable out;
  out.col_labels = table.col_labels;
  for (const auto& [cluster, cls] : mapping) out.row_labels.push_back(cls);
  std::sort(out.row_labels.begin(), out.row_labels.end());
  out.row_labels.erase(std::unique(out.row_labels.begin(), out.row_labels.end()),
                       out.row_labels.end());
  out.counts.assign(out.rows() * out.cols(), 0);
  out.n = table.n;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const std::size_t mapped = index_of(out.row_labels, mapping.at(table.row_labels[r]));
    for (std::size_t c = 0; c < table.cols(); ++c)
      out.counts[mapped * out.cols() + c] += table.at(r, c);
  }
  return out;
}

}  // namespace hsiseg
