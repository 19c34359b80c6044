// Copyright 2026 The fvlrp Authors.
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


#include "fvlrp/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fvlrp/errors.h"
#include "fvlrp/fisher.h"
#include "fvlrp/parallel.h"

namespace fvlrp {
namespace {

constexpr std::uint64_t kOrderingStream = 0x6f72646572ULL;

double ImprovedScore(const SvmModel& svm, int class_index, std::span<const double> raw) {
  return Score(svm, Improve(raw), class_index);
}

double Mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double StandardError(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double var = ss / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

std::vector<std::size_t> RelevanceOrdering(std::span<const double> r2) {
  std::vector<std::size_t> order(r2.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r2[a] > r2[b]; });
  return order;
}

MorfTrace MorfReplace(const DescriptorSet& ds, const GmmModel& gmm, const SvmModel& svm,
                      int class_index, std::span<const std::size_t> ordering,
                      const MorfOptions& opts, Rng& rng, MorfState* state) {
  if (opts.batch < 1 || opts.steps < 1) throw RangeError("batch and steps must be >= 1");
  const std::size_t needed = std::size_t(opts.batch) * opts.steps;
  if (needed > ds.size()) {
    throw RangeError("batch * steps = " + std::to_string(needed) + " exceeds |L| = " +
                     std::to_string(ds.size()));
  }
  if (ordering.size() < needed) throw RangeError("ordering shorter than batch * steps");
  for (std::size_t i = 0; i < needed; ++i) {
    if (ordering[i] >= ds.size()) throw RangeError("ordering index out of range");
  }

  MorfTrace trace;
  trace.batch = opts.batch;
  std::vector<double> x = Aggregate(gmm, ds);
  trace.original = ImprovedScore(svm, class_index, x);
  DescriptorSet mutated;
  if (state != nullptr) mutated = ds;

  const double inv_l = 1.0 / static_cast<double>(ds.size());
  std::vector<double> gamma(gmm.num_components);
  std::vector<double> psi_old(FvLength(gmm));
  std::vector<double> psi_new(FvLength(gmm));
  std::size_t pos = 0;
  for (int step = 0; step < opts.steps; ++step) {
    for (int b = 0; b < opts.batch; ++b, ++pos) {
      const std::size_t idx = ordering[pos];
      const auto& old = ds.descriptors[idx].values;
      std::vector<double> fresh =
          opts.mode == ReplacementMode::kIdentity ? old : Sample(gmm, rng);
      EmbedDescriptorInto(gmm, old, gamma, psi_old);
      EmbedDescriptorInto(gmm, fresh, gamma, psi_new);
      for (std::size_t d = 0; d < x.size(); ++d) {
        x[d] += inv_l * psi_new[d] - inv_l * psi_old[d];
      }
      if (state != nullptr) mutated.descriptors[idx].values = std::move(fresh);
    }
    const double f = ImprovedScore(svm, class_index, x);
    trace.scores.push_back(f);
    trace.positive.push_back(f > 0.0);
  }
  if (state != nullptr) {
    state->mutated = std::move(mutated);
    state->raw_fv = x;
  }
  return trace;
}

MorfTrace MorfReplace(const DescriptorSet& ds, const GmmModel& gmm, const SvmModel& svm,
                      int class_index, const R2Map& r2, const MorfOptions& opts,
                      Rng& rng, MorfState* state) {
  if (r2.values.size() != ds.size()) throw DimError("R2 map does not match descriptors");
  const auto order = RelevanceOrdering(r2.values);
  return MorfReplace(ds, gmm, svm, class_index, order, opts, rng, state);
}

double AreaAbove(const MorfTrace& trace) {
  if (trace.scores.empty()) throw EmptyInputError("empty MoRF trace");
  double s = 0.0;
  for (double f : trace.scores) s += trace.original - f;
  return s / static_cast<double>(trace.scores.size());
}

QualityStats SignSwitchFraction(std::span<const MorfTrace> traces) {
  if (traces.empty()) throw EmptyInputError("no MoRF traces");
  QualityStats q;
  std::size_t steps = 0;
  for (const auto& t : traces) steps = std::max(steps, t.scores.size());
  q.histogram.assign(steps, 0);
  int switched = 0;
  double area = 0.0;
  for (const auto& t : traces) {
    if (!(t.original > 0.0)) {
      throw ValidationError("sign switching needs a positively predicted original");
    }
    area += AreaAbove(t);
    for (std::size_t i = 0; i < t.scores.size(); ++i) {
      if (t.scores[i] < 0.0) {
        ++q.histogram[i];
        ++switched;
        break;
      }
    }
  }
  q.area = area / static_cast<double>(traces.size());
  q.switch_fraction = static_cast<double>(switched) / static_cast<double>(traces.size());
  return q;
}

MorfReport CompareOrderings(std::span<const MorfItem> items, const GmmModel& gmm,
                            const SvmModel& svm, std::span<const OrderingSpec> orderings,
                            const CompareOptions& opts) {
  if (opts.repetitions < 1) throw RangeError("repetitions must be >= 1");
  if (orderings.empty()) throw ValidationError("no orderings to compare");

  // Keep items predicted positive, in input order.
  std::vector<double> original(items.size());
  ParallelFor(items.size(), [&](std::size_t j) {
    original[j] = ImprovedScore(svm, items[j].class_index, Aggregate(gmm, items[j].descriptors));
  });
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (original[j] > 0.0) kept.push_back(j);
  }
  if (kept.empty()) throw EmptyInputError("no positively predicted image to perturb");

  MorfReport report;
  for (std::size_t j : kept) report.image_ids.push_back(items[j].image_id);

  // Relevance orderings per (ordering, image); random ones are drawn per
  // repetition below.
  const std::size_t num_o = orderings.size();
  const std::size_t num_i = kept.size();
  const std::size_t reps = opts.repetitions;
  std::vector<std::vector<std::size_t>> lrp_order(num_o * num_i);
  ParallelFor(num_o * num_i, [&](std::size_t q) {
    const OrderingSpec& spec = orderings[q / num_i];
    if (spec.random) return;
    const MorfItem& item = items[kept[q % num_i]];
    const auto phi = Improve(Aggregate(gmm, item.descriptors));
    const R3Map r3 = RelevanceR3(svm, phi, item.class_index);
    const MappingMatrixView view(gmm, item.descriptors);
    lrp_order[q] = RelevanceOrdering(RelevanceR2(r3, view, spec.r2).values);
  });

  std::vector<MorfTrace> traces(num_o * num_i * reps);
  ParallelFor(traces.size(), [&](std::size_t t) {
    const std::size_t o = t / (num_i * reps);
    const std::size_t j = (t / reps) % num_i;
    const std::size_t r = t % reps;
    const MorfItem& item = items[kept[j]];
    const std::uint64_t image_seed = MixSeed(opts.seed, kept[j]);
    std::vector<std::size_t> order;
    if (orderings[o].random) {
      Rng perm_rng(MixSeed(MixSeed(image_seed ^ kOrderingStream, r), o));
      order = perm_rng.Permutation(item.descriptors.size());
    } else {
      order = lrp_order[o * num_i + j];
    }
    Rng rng(MixSeed(image_seed, r));
    traces[t] = MorfReplace(item.descriptors, gmm, svm, item.class_index, order, opts.morf,
                            rng);
    traces[t].ordering = orderings[o].name;
  });

  for (std::size_t o = 0; o < num_o; ++o) {
    OrderingResult res;
    res.name = orderings[o].name;
    res.traces.assign(traces.begin() + o * num_i * reps,
                      traces.begin() + (o + 1) * num_i * reps);
    res.stats = SignSwitchFraction(res.traces);
    for (std::size_t j = 0; j < num_i; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < reps; ++r) s += AreaAbove(res.traces[j * reps + r]);
      res.image_area.push_back(s / static_cast<double>(reps));
    }
    res.mean_area = Mean(res.image_area);
    res.se_area = StandardError(res.image_area);
    report.orderings.push_back(std::move(res));
  }
  return report;
}

std::string ContextModeName(ContextMode m) {
  return m == ContextMode::kPositiveOnly ? "positive" : "all";
}

ContextMode ParseContextMode(const std::string& name) {
  if (name == "positive") return ContextMode::kPositiveOnly;
  if (name == "all") return ContextMode::kAll;
  throw UsageError("unknown context mode '" + name + "' (expected positive or all)");
}

ContextRatio ComputeContextRatio(const Heatmap& h, std::span<const BoundingBox> boxes,
                                 ContextMode mode) {
  if (boxes.empty()) throw ValidationError("context ratio needs at least one box");
  for (const auto& b : boxes) ValidateBox(b, h.width, h.height);
  ContextRatio c;
  double sum_in = 0.0;
  double sum_out = 0.0;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      double v = h.at(x, y);
      if (mode == ContextMode::kPositiveOnly && v < 0.0) v = 0.0;
      const bool inside = std::any_of(boxes.begin(), boxes.end(),
                                      [&](const BoundingBox& b) { return b.Contains(x, y); });
      if (inside) {
        sum_in += v;
        ++c.in_count;
      } else {
        sum_out += v;
        ++c.out_count;
      }
    }
  }
  if (c.out_count == 0) throw UndefinedError("boxes cover the whole image");
  c.mean_in = sum_in / static_cast<double>(c.in_count);
  c.mean_out = sum_out / static_cast<double>(c.out_count);
  c.defined = c.mean_in > 0.0 && c.mean_out >= 0.0;
  c.mu = c.defined ? c.mean_out / c.mean_in : std::numeric_limits<double>::quiet_NaN();
  return c;
}

std::vector<ContextRow> ContextTable(const std::vector<std::string>& class_names,
                                     std::span<const ContextEntry> fv,
                                     std::span<const ContextEntry> nn, ContextMode mode) {
  auto fill = [&](std::span<const ContextEntry> entries, std::vector<ContextCell>& cells) {
    std::vector<ContextRatio> ratios(entries.size());
    ParallelFor(entries.size(), [&](std::size_t i) {
      ratios[i] = ComputeContextRatio(entries[i].heatmap, entries[i].boxes, mode);
    });
    std::vector<double> sums(cells.size(), 0.0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const int c = entries[i].class_index;
      if (c < 0 || c >= static_cast<int>(cells.size())) {
        throw RangeError("context entry class out of range");
      }
      cells[c].missing = false;
      if (ratios[i].defined) {
        ++cells[c].used;
        sums[c] += ratios[i].mu;
      } else {
        ++cells[c].undefined;
      }
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      cells[c].mean_mu = cells[c].used > 0 ? sums[c] / cells[c].used
                                           : std::numeric_limits<double>::quiet_NaN();
    }
  };
  std::vector<ContextCell> fv_cells(class_names.size());
  std::vector<ContextCell> nn_cells(class_names.size());
  fill(fv, fv_cells);
  fill(nn, nn_cells);
  std::vector<ContextRow> rows;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    rows.push_back({class_names[c], fv_cells[c], nn_cells[c]});
  }
  return rows;
}

double OverallMeanMu(std::span<const ContextRow> rows, bool fv_column) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    const ContextCell& c = fv_column ? r.fv : r.nn;
    if (c.used > 0) {
      s += c.mean_mu;
      ++n;
    }
  }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace fvlrp
