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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "hsiseg/cube.hpp"

namespace hsiseg {

/// Co-occurrence counts between labelings A (rows) and B (columns). Row and
/// column label values are kept sorted so tables can be aligned by value.
struct ContingencyTable {
  std::vector<Label> row_labels;
  std::vector<Label> col_labels;
  std::vector<std::uint64_t> counts;  // row-major [rows, cols]
  std::uint64_t n = 0;

  std::size_t rows() const { return row_labels.size(); }
  std::size_t cols() const { return col_labels.size(); }
  std::uint64_t at(std::size_t r, std::size_t c) const {
    return counts[r * cols() + c];
  }
  std::vector<std::uint64_t> row_sums() const;
  std::vector<std::uint64_t> col_sums() const;
};

/// Builds the table over points where `include` is nonzero (all points
/// when `include` is empty).
ContingencyTable contingency(std::span<const Label> a, std::span<const Label> b,
                             std::span<const std::uint8_t> include = {});

/// Table over pixels whose ground-truth label is nonzero.
ContingencyTable contingency_excluding_background(
    std::span<const Label> predicted, std::span<const Label> truth);

/// Pair classification: a = same in A and B, b = same in A only,
/// c = same in B only, d = different in both.
struct PairCounts {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;
  std::uint64_t total() const { return a + b + c + d; }
};

/// Derived from sums of C(count, 2) over the table, no pair enumeration.
PairCounts pair_counts(const ContingencyTable& table);

/// Normalized mutual information with arithmetic-mean normalization.
/// Both entropies zero gives 1; exactly one zero gives 0.
double nmi(const ContingencyTable& table);

/// Adjusted rand score evaluated from pair counts. Values below zero are
/// possible and returned as computed.
double ars(const PairCounts& pairs);

/// Hubert-Arabie adjusted Rand index computed directly from the table.
/// Algebraically identical to ars(pair_counts(table)).
double adjusted_rand_contingency(const ContingencyTable& table);

struct SupervisedScores {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
};

/// Overall accuracy, average per-class recall and Cohen's kappa with rows
/// as predictions and columns as truth; classes are matched by label value.
SupervisedScores supervised_scores(const ContingencyTable& table);

/// Maps every predicted cluster to the truth class it overlaps most
/// (lowest class label on ties).
std::map<Label, Label> majority_vote_mapping(const ContingencyTable& table);

/// Applies majority_vote_mapping and re-tabulates predictions vs truth.
ContingencyTable majority_vote_table(const ContingencyTable& table);

}  // namespace hsiseg
