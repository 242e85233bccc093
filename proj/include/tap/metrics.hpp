#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tap/errors.hpp"

namespace tap::metrics {

class MetricsError : public Error {
 public:
  explicit MetricsError(const std::string& msg) : Error("metrics", msg) {}
};

struct NoProcessedEvents : MetricsError {
  using MetricsError::MetricsError;
};

enum class EventKind : uint8_t { Received, Processed };

struct PipelineEvent {
  EventKind kind = EventKind::Received;
  int64_t ts_ms = 0;  // monotonic
  uint64_t count = 1;
};

// Thread-safe event capture. Totals are plain atomics so the hot counters
// never contend; the event log append takes a short mutex.
class Registry {
 public:
  void record(EventKind kind, int64_t ts_ms, uint64_t count);
  void record(const PipelineEvent& e) { record(e.kind, e.ts_ms, e.count); }

  // Extended (beyond the published measurements): per-record end-to-end
  // latency samples, producer timestamp to batch completion.
  void record_latency_sample(double ms);

  uint64_t received_total() const { return received_.load(std::memory_order_relaxed); }
  uint64_t processed_total() const { return processed_.load(std::memory_order_relaxed); }

  std::vector<PipelineEvent> snapshot() const;
  std::vector<double> latency_samples() const;

 private:
  std::atomic<uint64_t> received_{0};
  std::atomic<uint64_t> processed_{0};
  mutable std::mutex mu_;
  std::vector<PipelineEvent> events_;
  std::vector<double> latency_ms_;
};

// Cumulative received/processed counts per time bin of bin_s seconds,
// starting at the earliest event timestamp.
struct Series {
  int bin_s = 10;
  int64_t t0_ms = 0;
  std::vector<uint64_t> received_cum;
  std::vector<uint64_t> processed_cum;
};

Series aggregate_series(const std::vector<PipelineEvent>& events, int bin_s);

struct ExperimentSummary {
  uint64_t tweets_processed = 0;
  double processed_time_min = 0;           // first Received to last Processed
  double latency_min = 0;                  // processed_time minus ingest window
  std::optional<double> speedup_pct;       // 100 * baseline / processed_time
};

// speedup = 100 * baseline / current; exactly 100 when equal.
double speedup_pct(double baseline_processed_time_min, double processed_time_min);

ExperimentSummary summarize(const std::vector<PipelineEvent>& events,
                            double ingest_duration_min,
                            std::optional<double> baseline_processed_time_min = std::nullopt);

// CSV exports. Events: kind,ts_ms,count. Series: bin_s,received_cum,processed_cum
// (first column is the bin start offset in seconds). Summary:
// experiment,tweets_processed,processed_time_m,latency_m,speedup_pct with '-'
// for an absent speedup.
void write_events_csv(const std::filesystem::path& path, const std::vector<PipelineEvent>& events);
void write_series_csv(const std::filesystem::path& path, const Series& series);

struct SummaryRow {
  std::string experiment;
  ExperimentSummary summary;
};

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows,
                       const std::string& incomplete_reason = "");

}  // namespace tap::metrics
