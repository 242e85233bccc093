#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tap/errors.hpp"
#include "tap/thread_pool.hpp"

namespace tap::stream {

class StreamError : public Error {
 public:
  explicit StreamError(const std::string& msg) : Error("stream", msg) {}
};

struct InvalidPartitionCount : StreamError {
  using StreamError::StreamError;
};
struct EmptyDataset : StreamError {
  using StreamError::StreamError;
};

// A user function failed during materialization; carries the partition it
// failed on.
class TaskError : public StreamError {
 public:
  TaskError(const std::string& stage, size_t partition, const std::string& msg)
      : StreamError(stage + " failed on partition " + std::to_string(partition) + ": " + msg),
        partition_(partition) {}

  size_t partition() const { return partition_; }

 private:
  size_t partition_;
};

template <class T>
using Partitions = std::vector<std::vector<T>>;

// Owns the worker pool that evaluates datasets. Dataset handles keep their
// context alive via shared_ptr.
class StreamContext : public std::enable_shared_from_this<StreamContext> {
 public:
  static std::shared_ptr<StreamContext> create(size_t workers) {
    return std::shared_ptr<StreamContext>(new StreamContext(workers));
  }

  size_t worker_count() const { return pool_.size(); }
  ThreadPool& pool() { return pool_; }

 private:
  explicit StreamContext(size_t workers) : pool_(workers) {}
  ThreadPool pool_;
};

namespace detail {

// Lineage node. Transformations build nodes without evaluating anything;
// actions call materialize(). A cached node computes once and keeps the
// result.
template <class T>
class Node {
 public:
  virtual ~Node() = default;

  std::shared_ptr<const Partitions<T>> materialize(StreamContext& ctx) {
    if (!cache_enabled_.load(std::memory_order_relaxed)) return compute_shared(ctx);
    std::lock_guard lock(cache_mu_);
    if (!cached_) cached_ = compute_shared(ctx);
    return cached_;
  }

  void enable_cache() { cache_enabled_.store(true, std::memory_order_relaxed); }

 protected:
  virtual std::shared_ptr<const Partitions<T>> compute_shared(StreamContext& ctx) = 0;

 private:
  std::atomic<bool> cache_enabled_{false};
  std::mutex cache_mu_;
  std::shared_ptr<const Partitions<T>> cached_;
};

template <class T>
class SourceNode final : public Node<T> {
 public:
  explicit SourceNode(Partitions<T> parts)
      : parts_(std::make_shared<const Partitions<T>>(std::move(parts))) {}

 protected:
  std::shared_ptr<const Partitions<T>> compute_shared(StreamContext&) override { return parts_; }

 private:
  std::shared_ptr<const Partitions<T>> parts_;
};

template <class T, class U>
class MapNode final : public Node<U> {
 public:
  MapNode(std::shared_ptr<Node<T>> parent, std::function<U(const T&)> fn)
      : parent_(std::move(parent)), fn_(std::move(fn)) {}

 protected:
  std::shared_ptr<const Partitions<U>> compute_shared(StreamContext& ctx) override {
    auto src = parent_->materialize(ctx);
    auto out = std::make_shared<Partitions<U>>(src->size());
    std::vector<std::function<void()>> tasks;
    tasks.reserve(src->size());
    for (size_t i = 0; i < src->size(); ++i) {
      tasks.push_back([this, i, &src, &out] {
        const auto& in = (*src)[i];
        auto& dst = (*out)[i];
        dst.reserve(in.size());
        try {
          for (const auto& elem : in) dst.push_back(fn_(elem));
        } catch (const std::exception& e) {
          throw TaskError("map", i, e.what());
        }
      });
    }
    ctx.pool().run_all(std::move(tasks));
    return out;
  }

 private:
  std::shared_ptr<Node<T>> parent_;
  std::function<U(const T&)> fn_;
};

template <class T>
class FilterNode final : public Node<T> {
 public:
  FilterNode(std::shared_ptr<Node<T>> parent, std::function<bool(const T&)> pred)
      : parent_(std::move(parent)), pred_(std::move(pred)) {}

 protected:
  std::shared_ptr<const Partitions<T>> compute_shared(StreamContext& ctx) override {
    auto src = parent_->materialize(ctx);
    auto out = std::make_shared<Partitions<T>>(src->size());
    std::vector<std::function<void()>> tasks;
    tasks.reserve(src->size());
    for (size_t i = 0; i < src->size(); ++i) {
      tasks.push_back([this, i, &src, &out] {
        try {
          for (const auto& elem : (*src)[i])
            if (pred_(elem)) (*out)[i].push_back(elem);
        } catch (const std::exception& e) {
          throw TaskError("filter", i, e.what());
        }
      });
    }
    ctx.pool().run_all(std::move(tasks));
    return out;
  }

 private:
  std::shared_ptr<Node<T>> parent_;
  std::function<bool(const T&)> pred_;
};

// Hash-partitions keys so every occurrence of a key lands in one output
// partition, then groups within each partition. The bucket layout depends
// only on the source partitioning, not on the worker count.
template <class K, class V>
class GroupByKeyNode final : public Node<std::pair<K, std::vector<V>>> {
 public:
  using In = std::pair<K, V>;
  using Out = std::pair<K, std::vector<V>>;

  explicit GroupByKeyNode(std::shared_ptr<Node<In>> parent) : parent_(std::move(parent)) {}

 protected:
  std::shared_ptr<const Partitions<Out>> compute_shared(StreamContext& ctx) override {
    auto src = parent_->materialize(ctx);
    const size_t parts = src->size() == 0 ? 1 : src->size();

    // buckets[src_partition][out_partition]
    std::vector<Partitions<In>> buckets(src->size(), Partitions<In>(parts));
    std::vector<std::function<void()>> scatter;
    scatter.reserve(src->size());
    for (size_t i = 0; i < src->size(); ++i) {
      scatter.push_back([i, parts, &src, &buckets] {
        try {
          for (const auto& kv : (*src)[i])
            buckets[i][std::hash<K>{}(kv.first) % parts].push_back(kv);
        } catch (const std::exception& e) {
          throw TaskError("group_by_key", i, e.what());
        }
      });
    }
    ctx.pool().run_all(std::move(scatter));

    auto out = std::make_shared<Partitions<Out>>(parts);
    std::vector<std::function<void()>> gather;
    gather.reserve(parts);
    for (size_t p = 0; p < parts; ++p) {
      gather.push_back([p, &src, &buckets, &out] {
        std::unordered_map<K, size_t> slot;
        auto& dst = (*out)[p];
        for (size_t i = 0; i < src->size(); ++i) {
          for (auto& kv : buckets[i][p]) {
            auto [it, inserted] = slot.try_emplace(kv.first, dst.size());
            if (inserted) dst.emplace_back(kv.first, std::vector<V>{});
            dst[it->second].second.push_back(std::move(kv.second));
          }
        }
      });
    }
    ctx.pool().run_all(std::move(gather));
    return out;
  }

 private:
  std::shared_ptr<Node<In>> parent_;
};

}  // namespace detail

// Immutable partitioned collection with a lazy transformation plan.
// Transformations (map, filter, group_by_key) construct new datasets without
// touching elements; actions (count, reduce, take, collect) evaluate the
// plan on the context's worker pool.
template <class T>
class Dataset {
 public:
  Dataset(std::shared_ptr<StreamContext> ctx, std::shared_ptr<detail::Node<T>> node)
      : ctx_(std::move(ctx)), node_(std::move(node)) {}

  template <class F, class U = std::invoke_result_t<F, const T&>>
  Dataset<U> map(F fn) const {
    return Dataset<U>(ctx_, std::make_shared<detail::MapNode<T, U>>(
                                node_, std::function<U(const T&)>(std::move(fn))));
  }

  template <class P>
  Dataset<T> filter(P pred) const {
    return Dataset<T>(ctx_, std::make_shared<detail::FilterNode<T>>(
                                node_, std::function<bool(const T&)>(std::move(pred))));
  }

  // Marks the plan node so its first materialization is kept and reused.
  Dataset<T> cache() const {
    node_->enable_cache();
    return *this;
  }

  std::shared_ptr<const Partitions<T>> materialize() const { return node_->materialize(*ctx_); }

  std::vector<T> collect() const {
    auto parts = materialize();
    std::vector<T> out;
    size_t total = 0;
    for (const auto& p : *parts) total += p.size();
    out.reserve(total);
    for (const auto& p : *parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  }

  size_t count() const {
    auto parts = materialize();
    size_t total = 0;
    for (const auto& p : *parts) total += p.size();
    return total;
  }

  // op must be associative and commutative: partitions are folded in
  // parallel and partials combined in partition order.
  template <class Op>
  T reduce(Op op) const {
    auto parts = materialize();
    std::vector<std::optional<T>> partials(parts->size());
    std::vector<std::function<void()>> tasks;
    for (size_t i = 0; i < parts->size(); ++i) {
      if ((*parts)[i].empty()) continue;
      tasks.push_back([i, &parts, &partials, &op] {
        const auto& in = (*parts)[i];
        T acc = in.front();
        for (size_t j = 1; j < in.size(); ++j) acc = op(acc, in[j]);
        partials[i] = std::move(acc);
      });
    }
    ctx_->pool().run_all(std::move(tasks));

    std::optional<T> result;
    for (auto& partial : partials) {
      if (!partial) continue;
      result = result ? op(*result, *partial) : *partial;
    }
    if (!result) throw EmptyDataset("reduce on empty dataset");
    return *result;
  }

  // First n elements in partition order.
  std::vector<T> take(size_t n) const {
    auto parts = materialize();
    std::vector<T> out;
    out.reserve(n);
    for (const auto& p : *parts) {
      for (const auto& elem : p) {
        if (out.size() == n) return out;
        out.push_back(elem);
      }
    }
    return out;
  }

  size_t partition_count() const { return materialize()->size(); }

  const std::shared_ptr<StreamContext>& context() const { return ctx_; }
  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<StreamContext> ctx_;
  std::shared_ptr<detail::Node<T>> node_;
};

// Distributes elements round-robin across partition_count partitions.
template <class T>
Dataset<T> from_records(std::shared_ptr<StreamContext> ctx, std::vector<T> records,
                        size_t partition_count) {
  if (partition_count < 1)
    throw InvalidPartitionCount("partition count must be >= 1, got " +
                                std::to_string(partition_count));
  Partitions<T> parts(partition_count);
  for (size_t p = 0; p < partition_count; ++p)
    parts[p].reserve(records.size() / partition_count + 1);
  for (size_t i = 0; i < records.size(); ++i)
    parts[i % partition_count].push_back(std::move(records[i]));
  return Dataset<T>(std::move(ctx), std::make_shared<detail::SourceNode<T>>(std::move(parts)));
}

// One output element per distinct key; equal keys always land in the same
// output partition. Value-list order within a key is unspecified.
template <class K, class V>
Dataset<std::pair<K, std::vector<V>>> group_by_key(const Dataset<std::pair<K, V>>& ds) {
  return Dataset<std::pair<K, std::vector<V>>>(
      ds.context(), std::make_shared<detail::GroupByKeyNode<K, V>>(ds.node()));
}

}  // namespace tap::stream
