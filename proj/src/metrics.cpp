#include "tap/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

namespace tap::metrics {

void Registry::record(EventKind kind, int64_t ts_ms, uint64_t count) {
  if (kind == EventKind::Received)
    received_.fetch_add(count, std::memory_order_relaxed);
  else
    processed_.fetch_add(count, std::memory_order_relaxed);
  std::lock_guard lock(mu_);
  events_.push_back(PipelineEvent{kind, ts_ms, count});
}

void Registry::record_latency_sample(double ms) {
  std::lock_guard lock(mu_);
  latency_ms_.push_back(ms);
}

std::vector<PipelineEvent> Registry::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<double> Registry::latency_samples() const {
  std::lock_guard lock(mu_);
  return latency_ms_;
}

Series aggregate_series(const std::vector<PipelineEvent>& events, int bin_s) {
  if (bin_s < 1) throw MetricsError("bin_s must be >= 1");
  Series series;
  series.bin_s = bin_s;
  if (events.empty()) return series;

  int64_t t0 = std::numeric_limits<int64_t>::max();
  int64_t t_max = std::numeric_limits<int64_t>::min();
  for (const auto& e : events) {
    t0 = std::min(t0, e.ts_ms);
    t_max = std::max(t_max, e.ts_ms);
  }
  series.t0_ms = t0;
  const int64_t bin_ms = static_cast<int64_t>(bin_s) * 1000;
  const size_t bins = static_cast<size_t>((t_max - t0) / bin_ms) + 1;

  std::vector<uint64_t> received(bins, 0), processed(bins, 0);
  for (const auto& e : events) {
    const auto bin = static_cast<size_t>((e.ts_ms - t0) / bin_ms);
    (e.kind == EventKind::Received ? received : processed)[bin] += e.count;
  }

  series.received_cum.resize(bins);
  series.processed_cum.resize(bins);
  uint64_t r = 0, p = 0;
  for (size_t i = 0; i < bins; ++i) {
    r += received[i];
    p += processed[i];
    series.received_cum[i] = r;
    series.processed_cum[i] = p;
  }
  return series;
}

double speedup_pct(double baseline_processed_time_min, double processed_time_min) {
  return 100.0 * baseline_processed_time_min / processed_time_min;
}

ExperimentSummary summarize(const std::vector<PipelineEvent>& events,
                            double ingest_duration_min,
                            std::optional<double> baseline_processed_time_min) {
  int64_t first_received = std::numeric_limits<int64_t>::max();
  int64_t first_any = std::numeric_limits<int64_t>::max();
  int64_t last_processed = std::numeric_limits<int64_t>::min();
  uint64_t processed_count = 0;
  bool any_received = false;

  for (const auto& e : events) {
    first_any = std::min(first_any, e.ts_ms);
    if (e.kind == EventKind::Received) {
      any_received = true;
      first_received = std::min(first_received, e.ts_ms);
    } else {
      last_processed = std::max(last_processed, e.ts_ms);
      processed_count += e.count;
    }
  }
  if (processed_count == 0) throw NoProcessedEvents("no Processed events to summarize");
  const int64_t start = any_received ? first_received : first_any;

  ExperimentSummary summary;
  summary.tweets_processed = processed_count;
  summary.processed_time_min = static_cast<double>(last_processed - start) / 60000.0;
  summary.latency_min = summary.processed_time_min - ingest_duration_min;
  if (baseline_processed_time_min)
    summary.speedup_pct = speedup_pct(*baseline_processed_time_min, summary.processed_time_min);
  return summary;
}

void write_events_csv(const std::filesystem::path& path,
                      const std::vector<PipelineEvent>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MetricsError("cannot open " + path.string());
  out << "kind,ts_ms,count\n";
  for (const auto& e : events)
    out << (e.kind == EventKind::Received ? "received" : "processed") << ',' << e.ts_ms << ','
        << e.count << '\n';
  if (!out.flush()) throw MetricsError("failed writing " + path.string());
}

void write_series_csv(const std::filesystem::path& path, const Series& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MetricsError("cannot open " + path.string());
  out << "bin_s,received_cum,processed_cum\n";
  for (size_t i = 0; i < series.received_cum.size(); ++i)
    out << i * static_cast<size_t>(series.bin_s) << ',' << series.received_cum[i] << ','
        << series.processed_cum[i] << '\n';
  if (!out.flush()) throw MetricsError("failed writing " + path.string());
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows,
                       const std::string& incomplete_reason) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MetricsError("cannot open " + path.string());
  out << "experiment,tweets_processed,processed_time_m,latency_m,speedup_pct\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    out << row.experiment << ',' << row.summary.tweets_processed << ','
        << fmt(row.summary.processed_time_min) << ',' << fmt(row.summary.latency_min) << ',';
    out << (row.summary.speedup_pct ? fmt(*row.summary.speedup_pct) : std::string("-")) << '\n';
  }
  if (!incomplete_reason.empty()) out << "# incomplete: " << incomplete_reason << '\n';
  if (!out.flush()) throw MetricsError("failed writing " + path.string());
}

}  // namespace tap::metrics
