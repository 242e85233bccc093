#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "tap/broker.hpp"
#include "tap/clock.hpp"
#include "tap/dataset.hpp"
#include "tap/metrics.hpp"

namespace tap::stream {

struct SinkError : StreamError {
  using StreamError::StreamError;
};

struct SourceSpec {
  broker::Broker* broker = nullptr;
  std::string topic;
  std::string group_id = "stream";
};

// Offset ranges drained into one micro-batch: partition -> [from, to).
struct BatchInfo {
  uint64_t batch_id = 0;
  size_t record_count = 0;
  std::map<uint32_t, std::pair<uint64_t, uint64_t>> drained;
};

struct StreamStats {
  uint64_t batches = 0;
  uint64_t records_drained = 0;
  uint64_t records_processed = 0;  // sink rows written
  uint64_t max_source_lag = 0;     // records visible but undrained after a cycle
  std::vector<BatchInfo> batch_log;
};

// Micro-batch driver. Every interval it drains all new records from every
// partition into one batch, evaluates the pipeline plan on the context's
// worker pool, and writes the resulting rows to the sink. A failing sink
// write is retried once, then surfaces from stop(). stop() drains whatever
// is still in the log before returning.
template <class Out>
class StreamHandle {
 public:
  using Plan = std::function<Dataset<Out>(Dataset<broker::Record>)>;
  using Sink = std::function<void(const std::vector<Out>&)>;

  StreamHandle(std::shared_ptr<StreamContext> ctx, SourceSpec source, int interval_ms,
               Plan plan, Sink sink, metrics::Registry* registry)
      : state_(std::make_shared<State>()) {
    state_->ctx = std::move(ctx);
    state_->source = std::move(source);
    state_->interval_ms = interval_ms;
    state_->plan = std::move(plan);
    state_->sink = std::move(sink);
    state_->registry = registry;
    // Validates the topic (and resumes committed positions) before the
    // driver starts.
    const uint32_t parts = state_->source.broker->partition_count(state_->source.topic);
    state_->next_offset.assign(parts, 0);
    for (uint32_t p = 0; p < parts; ++p) {
      if (auto committed = state_->source.broker->fetch_committed(state_->source.group_id,
                                                                  state_->source.topic, p))
        state_->next_offset[p] = *committed;
    }
    state_->driver = std::thread([s = state_] { s->run(); });
  }

  StreamHandle(StreamHandle&&) noexcept = default;
  StreamHandle& operator=(StreamHandle&&) noexcept = default;
  StreamHandle(const StreamHandle&) = delete;
  StreamHandle& operator=(const StreamHandle&) = delete;

  ~StreamHandle() {
    if (state_ && state_->driver.joinable()) {
      state_->request_stop();
      state_->driver.join();
    }
  }

  // Graceful shutdown: finishes the in-flight batch, drains remaining
  // records, joins the driver, then rethrows any surfaced error.
  void stop() {
    if (!state_) return;
    state_->request_stop();
    if (state_->driver.joinable()) state_->driver.join();
    if (state_->error) std::rethrow_exception(state_->error);
  }

  StreamStats stats() const {
    std::lock_guard lock(state_->stats_mu);
    return state_->stats;
  }

 private:
  struct State {
    std::shared_ptr<StreamContext> ctx;
    SourceSpec source;
    int interval_ms = 1000;
    Plan plan;
    Sink sink;
    metrics::Registry* registry = nullptr;

    std::vector<uint64_t> next_offset;
    std::thread driver;
    std::mutex stop_mu;
    std::condition_variable stop_cv;
    bool stop_requested = false;
    std::exception_ptr error;
    mutable std::mutex stats_mu;
    StreamStats stats;
    uint64_t next_batch_id = 0;

    void request_stop() {
      {
        std::lock_guard lock(stop_mu);
        stop_requested = true;
      }
      stop_cv.notify_all();
    }

    bool wait_interval() {
      std::unique_lock lock(stop_mu);
      stop_cv.wait_for(lock, std::chrono::milliseconds(interval_ms),
                       [&] { return stop_requested; });
      return stop_requested;
    }

    void run() {
      bool stopping = false;
      while (true) {
        if (!stopping) stopping = wait_interval();
        size_t drained = 0;
        try {
          drained = run_cycle();
        } catch (...) {
          error = std::current_exception();
          return;
        }
        if (stopping && drained == 0) return;
      }
    }

    // One micro-batch: drain, evaluate, sink, commit. Returns records drained.
    size_t run_cycle() {
      std::vector<broker::Record> drained;
      BatchInfo info;
      const auto parts = static_cast<uint32_t>(next_offset.size());
      for (uint32_t p = 0; p < parts; ++p) {
        const uint64_t from = next_offset[p];
        for (;;) {
          auto chunk = source.broker->consume(source.topic, p, next_offset[p], 4096);
          if (chunk.empty()) break;
          next_offset[p] += chunk.size();
          drained.insert(drained.end(), std::make_move_iterator(chunk.begin()),
                         std::make_move_iterator(chunk.end()));
        }
        if (next_offset[p] > from) info.drained[p] = {from, next_offset[p]};
      }
      if (drained.empty()) return 0;

      info.batch_id = next_batch_id++;
      info.record_count = drained.size();

      if (registry)
        for (const auto& rec : drained)
          registry->record(metrics::EventKind::Received, rec.produce_ts, 1);
      std::vector<int64_t> produce_ts;
      if (registry) {
        produce_ts.reserve(drained.size());
        for (const auto& rec : drained) produce_ts.push_back(rec.produce_ts);
      }

      auto ds = from_records<broker::Record>(ctx, std::move(drained),
                                             ctx->worker_count());
      auto rows = plan(ds).collect();

      try {
        sink(rows);
      } catch (const std::exception& first) {
        try {
          sink(rows);  // one retry
        } catch (const std::exception& second) {
          throw SinkError(std::string("batch ") + std::to_string(info.batch_id) +
                          " failed twice: " + first.what() + "; retry: " + second.what());
        }
      }

      const int64_t done_ts = steady_ms();
      if (registry) {
        registry->record(metrics::EventKind::Processed, done_ts, rows.size());
        for (int64_t ts : produce_ts)
          registry->record_latency_sample(static_cast<double>(done_ts - ts));
      }

      for (const auto& [p, range] : info.drained)
        source.broker->commit_offset(
            {source.group_id, source.topic, p, range.second});

      uint64_t lag = 0;
      for (uint32_t p = 0; p < parts; ++p)
        lag += source.broker->partition_length(source.topic, p) - next_offset[p];

      const size_t drained_count = info.record_count;
      {
        std::lock_guard lock(stats_mu);
        stats.batches += 1;
        stats.records_drained += drained_count;
        stats.records_processed += rows.size();
        stats.max_source_lag = std::max(stats.max_source_lag, lag);
        stats.batch_log.push_back(std::move(info));
      }
      return drained_count;
    }
  };

  std::shared_ptr<State> state_;
};

template <class Out>
StreamHandle<Out> run_streaming(std::shared_ptr<StreamContext> ctx, SourceSpec source,
                                int interval_ms,
                                typename StreamHandle<Out>::Plan plan,
                                typename StreamHandle<Out>::Sink sink,
                                metrics::Registry* registry = nullptr) {
  if (interval_ms < 1) throw StreamError("batch interval must be >= 1 ms");
  return StreamHandle<Out>(std::move(ctx), std::move(source), interval_ms, std::move(plan),
                           std::move(sink), registry);
}

}  // namespace tap::stream
