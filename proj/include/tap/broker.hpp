#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "tap/errors.hpp"

namespace tap::broker {

class BrokerError : public Error {
 public:
  explicit BrokerError(const std::string& msg) : Error("broker", msg) {}
};

struct DuplicateTopic : BrokerError {
  using BrokerError::BrokerError;
};
struct InvalidPartitionCount : BrokerError {
  using BrokerError::BrokerError;
};
struct UnknownTopic : BrokerError {
  using BrokerError::BrokerError;
};
struct UnknownPartition : BrokerError {
  using BrokerError::BrokerError;
};
struct OffsetBeyondLog : BrokerError {
  using BrokerError::BrokerError;
};
struct NonMonotonicCommit : BrokerError {
  using BrokerError::BrokerError;
};
struct IoError : BrokerError {
  using BrokerError::BrokerError;
};

// One published message. The broker assigns `offset` (dense per partition)
// and `partition`; producers never choose offsets.
struct Record {
  uint64_t offset = 0;
  uint32_t partition = 0;
  int64_t produce_ts = 0;  // monotonic ms at append time
  std::optional<std::string> key;
  std::string payload;
};

struct ConsumerPosition {
  std::string group_id;
  std::string topic;
  uint32_t partition = 0;
  uint64_t committed_offset = 0;
};

struct BrokerOptions {
  // When set, each partition is backed by an append-only segment file and
  // committed offsets are persisted; an existing directory is reloaded.
  std::optional<std::filesystem::path> data_dir;
  // fsync segment appends. Without it appends still reach the kernel before
  // the produce call returns.
  bool sync = false;
};

// Embedded publish-subscribe log. Topics hold a fixed number of partitions;
// each partition is an append-only record log with dense offsets.
//
// Partitioning: records with a key map to fnv1a64(key) % partition_count so
// equal keys always share a partition; keyless records rotate round-robin.
//
// Thread safety: produce/consume/commit may be called concurrently from any
// number of threads. Appends to one partition are serialized internally.
class Broker {
 public:
  Broker();
  explicit Broker(BrokerOptions opts);
  ~Broker();

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  void create_topic(const std::string& name, uint32_t partition_count);

  // Appends and returns (partition_index, offset). The offset equals the
  // partition length before the append.
  std::pair<uint32_t, uint64_t> produce(const std::string& topic,
                                        std::optional<std::string> key,
                                        std::string payload);

  // Returns records with offsets [from_offset, min(from_offset+max, len)),
  // in offset order. Empty when from_offset is at or past the end. Never
  // blocks.
  std::vector<Record> consume(const std::string& topic, uint32_t partition,
                              uint64_t from_offset, size_t max) const;

  // Commits are monotonic per (group, topic, partition); equal re-commits
  // are accepted, lower ones rejected.
  void commit_offset(const ConsumerPosition& pos);
  std::optional<uint64_t> fetch_committed(const std::string& group_id,
                                          const std::string& topic,
                                          uint32_t partition) const;

  bool has_topic(const std::string& topic) const;
  uint32_t partition_count(const std::string& topic) const;
  uint64_t partition_length(const std::string& topic, uint32_t partition) const;
  uint64_t total_length(const std::string& topic) const;
  std::vector<std::string> topic_names() const;

 private:
  struct Partition;
  struct Topic;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tap::broker
