#pragma once

#include <cmath>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace dgstream {

/// One record per (window, epoch); stage wall times repeat the window's
/// values. auc is NaN when the window had no evaluable test slice.
struct MetricsRecord {
  std::size_t window = 0;
  std::size_t window_begin = 0;
  std::size_t window_size = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double auc = std::nan("");
  std::size_t chains = 0;
  double parallelism = 1.0;
  double wd_ms = 0.0;
  double da_ms = 0.0;
  double es_ms = 0.0;
  double pt_ms = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"schema", 1},
                     {"window", window},
                     {"begin", window_begin},
                     {"size", window_size},
                     {"epoch", epoch},
                     {"loss", loss},
                     {"chains", chains},
                     {"parallelism", parallelism},
                     {"wd_ms", wd_ms},
                     {"da_ms", da_ms},
                     {"es_ms", es_ms},
                     {"pt_ms", pt_ms}};
    if (std::isfinite(auc)) j["auc"] = auc;
    return j;
  }
};

/// Collects per-epoch records and stage intervals; optionally mirrors each
/// record to a JSON-lines stream as it arrives. Thread-safe: the pipeline
/// stages report concurrently.
class MetricsSink {
 public:
  explicit MetricsSink(std::ostream* out = nullptr) : out_(out) {}

  void record(const MetricsRecord& r) {
    std::lock_guard lock(mu_);
    records_.push_back(r);
    if (out_) *out_ << r.to_json().dump() << "\n";
  }

  /// Stage occupancy intervals (steady-clock milliseconds) for overlap
  /// accounting; stage is one of "wd", "da", "es", "pt".
  void interval(const std::string& stage, double begin_ms, double end_ms) {
    std::lock_guard lock(mu_);
    intervals_.push_back({stage, begin_ms, end_ms});
  }

  std::vector<MetricsRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  /// Mean over windows of the best per-epoch AUC; NaN if nothing evaluable.
  double mean_best_auc() const {
    std::lock_guard lock(mu_);
    return mean_best_auc_unlocked();
  }

  /// Fraction of total DA wall time that overlapped some PT interval.
  double da_overlap_fraction() const {
    std::lock_guard lock(mu_);
    return da_overlap_unlocked();
  }

  double stage_total_ms(const std::string& stage) const {
    std::lock_guard lock(mu_);
    return stage_total_unlocked(stage);
  }

  nlohmann::json summary() const {
    std::lock_guard lock(mu_);
    nlohmann::json j{{"schema", 1},
                     {"summary", true},
                     {"records", records_.size()},
                     {"da_overlap_fraction", da_overlap_unlocked()}};
    double mba = mean_best_auc_unlocked();
    if (std::isfinite(mba)) j["mean_best_auc"] = mba;
    for (const char* s : {"wd", "da", "es", "pt"}) {
      j[std::string(s) + "_total_ms"] = stage_total_unlocked(s);
    }
    return j;
  }

 private:
  struct Interval {
    std::string stage;
    double begin, end;
  };

  double mean_best_auc_unlocked() const {
    double sum = 0.0;
    std::size_t windows = 0;
    std::size_t i = 0;
    while (i < records_.size()) {
      std::size_t j = i;
      double best = std::nan("");
      while (j < records_.size() && records_[j].window == records_[i].window) {
        if (std::isfinite(records_[j].auc) && (!std::isfinite(best) || records_[j].auc > best)) {
          best = records_[j].auc;
        }
        ++j;
      }
      if (std::isfinite(best)) {
        sum += best;
        ++windows;
      }
      i = j;
    }
    return windows ? sum / static_cast<double>(windows) : std::nan("");
  }

  double da_overlap_unlocked() const {
    double da_total = 0.0, da_overlap = 0.0;
    for (const auto& d : intervals_) {
      if (d.stage != "da") continue;
      da_total += d.end - d.begin;
      for (const auto& p : intervals_) {
        if (p.stage != "pt") continue;
        double lo = std::max(d.begin, p.begin);
        double hi = std::min(d.end, p.end);
        if (hi > lo) da_overlap += hi - lo;
      }
    }
    return da_total > 0.0 ? da_overlap / da_total : 0.0;
  }

  double stage_total_unlocked(const std::string& stage) const {
    double total = 0.0;
    for (const auto& d : intervals_) {
      if (d.stage == stage) total += d.end - d.begin;
    }
    return total;
  }
  mutable std::mutex mu_;
  std::vector<MetricsRecord> records_;
  std::vector<Interval> intervals_;
  std::ostream* out_;
};

}  // namespace dgstream
