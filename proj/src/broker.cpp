#include "tap/broker.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tap/bytes.hpp"
#include "tap/clock.hpp"

namespace tap::broker {

namespace fs = std::filesystem;

namespace {

constexpr uint32_t kNoKey = 0xffffffffu;

// Append-only fd wrapper. A produce is acknowledged only after write()
// returns, so acknowledged records survive a process kill.
class Appender {
 public:
  Appender() = default;

  void open(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
    if (fd_ < 0) throw IoError("open " + path.string() + ": " + std::strerror(errno));
  }

  void append(std::string_view buf, bool sync) {
    const char* p = buf.data();
    size_t left = buf.size();
    while (left > 0) {
      ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("segment append: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<size_t>(n);
    }
    if (sync && ::fsync(fd_) != 0)
      throw IoError(std::string("segment fsync: ") + std::strerror(errno));
  }

  bool is_open() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  ~Appender() { close(); }

 private:
  int fd_ = -1;
};

std::string encode_record(const std::optional<std::string>& key, const std::string& payload) {
  std::string out;
  out.reserve(payload.size() + (key ? key->size() : 0) + 8);
  bytes::put_u32(out, static_cast<uint32_t>(payload.size()));
  bytes::put_u32(out, key ? static_cast<uint32_t>(key->size()) : kNoKey);
  if (key) out.append(*key);
  out.append(payload);
  return out;
}

}  // namespace

struct Broker::Partition {
  mutable std::mutex mu;
  std::vector<Record> log;
  Appender segment;
};

struct Broker::Topic {
  std::string name;
  std::vector<std::unique_ptr<Partition>> partitions;
  std::atomic<uint64_t> round_robin{0};
};

struct Broker::Impl {
  BrokerOptions opts;
  mutable std::shared_mutex topics_mu;
  std::map<std::string, std::unique_ptr<Topic>> topics;

  mutable std::mutex commits_mu;
  // (group, topic, partition) -> offset
  std::map<std::tuple<std::string, std::string, uint32_t>, uint64_t> commits;

  fs::path topic_dir(const std::string& name) const { return *opts.data_dir / name; }
  fs::path segment_path(const std::string& name, uint32_t p) const {
    return topic_dir(name) / ("partition-" + std::to_string(p) + ".log");
  }
  fs::path offsets_path() const { return *opts.data_dir / "offsets.tsv"; }

  Topic* find(const std::string& name) {
    auto it = topics.find(name);
    return it == topics.end() ? nullptr : it->second.get();
  }
  const Topic* find(const std::string& name) const {
    auto it = topics.find(name);
    return it == topics.end() ? nullptr : it->second.get();
  }

  void load_existing();
  void load_segment(Topic& topic, uint32_t p);
  void load_offsets();
  void persist_offsets();
};

void Broker::Impl::load_segment(Topic& topic, uint32_t p) {
  const fs::path path = segment_path(topic.name, p);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();

  Partition& part = *topic.partitions[p];
  bytes::Cursor cur(data);
  const int64_t load_ts = steady_ms();
  size_t good_end = 0;
  while (cur.remaining() > 0) {
    uint32_t payload_len = 0, key_len = 0;
    std::string key, payload;
    if (!cur.get_u32(payload_len) || !cur.get_u32(key_len)) break;
    if (key_len != kNoKey && !cur.get_bytes(key, key_len)) break;
    if (!cur.get_bytes(payload, payload_len)) break;
    Record rec;
    rec.offset = part.log.size();
    rec.partition = p;
    rec.produce_ts = load_ts;
    if (key_len != kNoKey) rec.key = std::move(key);
    rec.payload = std::move(payload);
    part.log.push_back(std::move(rec));
    good_end = cur.pos;
  }
  if (good_end != data.size()) {
    std::fprintf(stderr, "broker: discarding %zu torn trailing bytes in %s\n",
                 data.size() - good_end, path.c_str());
    fs::resize_file(path, good_end);
  }
}

void Broker::Impl::load_existing() {
  if (!fs::exists(*opts.data_dir)) {
    fs::create_directories(*opts.data_dir);
    return;
  }
  for (const auto& entry : fs::directory_iterator(*opts.data_dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    uint32_t count = 0;
    while (fs::exists(segment_path(name, count))) ++count;
    if (count == 0) continue;
    auto topic = std::make_unique<Topic>();
    topic->name = name;
    for (uint32_t p = 0; p < count; ++p) topic->partitions.push_back(std::make_unique<Partition>());
    for (uint32_t p = 0; p < count; ++p) {
      load_segment(*topic, p);
      topic->partitions[p]->segment.open(segment_path(name, p));
    }
    topics.emplace(name, std::move(topic));
  }
  load_offsets();
}

void Broker::Impl::load_offsets() {
  std::ifstream in(offsets_path());
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string group, topic, partition_s, offset_s;
    if (!std::getline(ls, group, '\t') || !std::getline(ls, topic, '\t') ||
        !std::getline(ls, partition_s, '\t') || !std::getline(ls, offset_s))
      continue;
    commits[{group, topic, static_cast<uint32_t>(std::stoul(partition_s))}] =
        std::stoull(offset_s);
  }
}

void Broker::Impl::persist_offsets() {
  const fs::path tmp = offsets_path().string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("open " + tmp.string());
    for (const auto& [key, offset] : commits) {
      out << std::get<0>(key) << '\t' << std::get<1>(key) << '\t' << std::get<2>(key) << '\t'
          << offset << '\n';
    }
    out.flush();
    if (!out) throw IoError("write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, offsets_path(), ec);
  if (ec) throw IoError("rename offsets file: " + ec.message());
}

Broker::Broker() : impl_(std::make_unique<Impl>()) {}

Broker::Broker(BrokerOptions opts) : impl_(std::make_unique<Impl>()) {
  impl_->opts = std::move(opts);
  if (impl_->opts.data_dir) impl_->load_existing();
}

Broker::~Broker() = default;

void Broker::create_topic(const std::string& name, uint32_t partition_count) {
  if (name.empty()) throw BrokerError("topic name must be non-empty");
  if (partition_count < 1)
    throw InvalidPartitionCount("partition count must be >= 1, got " +
                                std::to_string(partition_count));
  std::unique_lock lock(impl_->topics_mu);
  if (impl_->find(name)) throw DuplicateTopic("topic already exists: " + name);

  auto topic = std::make_unique<Topic>();
  topic->name = name;
  for (uint32_t p = 0; p < partition_count; ++p)
    topic->partitions.push_back(std::make_unique<Partition>());
  if (impl_->opts.data_dir) {
    fs::create_directories(impl_->topic_dir(name));
    for (uint32_t p = 0; p < partition_count; ++p)
      topic->partitions[p]->segment.open(impl_->segment_path(name, p));
  }
  impl_->topics.emplace(name, std::move(topic));
}

std::pair<uint32_t, uint64_t> Broker::produce(const std::string& topic,
                                              std::optional<std::string> key,
                                              std::string payload) {
  std::shared_lock lock(impl_->topics_mu);
  Topic* t = impl_->find(topic);
  if (!t) throw UnknownTopic("unknown topic: " + topic);

  const auto n = static_cast<uint32_t>(t->partitions.size());
  const uint32_t p = key ? static_cast<uint32_t>(bytes::fnv1a64(*key) % n)
                         : static_cast<uint32_t>(t->round_robin.fetch_add(1) % n);

  Partition& part = *t->partitions[p];
  std::lock_guard part_lock(part.mu);
  if (part.segment.is_open())
    part.segment.append(encode_record(key, payload), impl_->opts.sync);

  Record rec;
  rec.offset = part.log.size();
  rec.partition = p;
  rec.produce_ts = steady_ms();
  rec.key = std::move(key);
  rec.payload = std::move(payload);
  part.log.push_back(std::move(rec));
  return {p, part.log.back().offset};
}

std::vector<Record> Broker::consume(const std::string& topic, uint32_t partition,
                                    uint64_t from_offset, size_t max) const {
  std::shared_lock lock(impl_->topics_mu);
  const Topic* t = impl_->find(topic);
  if (!t) throw UnknownTopic("unknown topic: " + topic);
  if (partition >= t->partitions.size())
    throw UnknownPartition("topic " + topic + " has no partition " + std::to_string(partition));

  const Partition& part = *t->partitions[partition];
  std::lock_guard part_lock(part.mu);
  if (from_offset >= part.log.size()) return {};
  const size_t end = std::min(part.log.size(), from_offset + max);
  return std::vector<Record>(part.log.begin() + static_cast<ptrdiff_t>(from_offset),
                             part.log.begin() + static_cast<ptrdiff_t>(end));
}

void Broker::commit_offset(const ConsumerPosition& pos) {
  const uint64_t len = partition_length(pos.topic, pos.partition);
  if (pos.committed_offset > len)
    throw OffsetBeyondLog("commit " + std::to_string(pos.committed_offset) +
                          " beyond log length " + std::to_string(len));
  std::lock_guard lock(impl_->commits_mu);
  auto key = std::make_tuple(pos.group_id, pos.topic, pos.partition);
  auto it = impl_->commits.find(key);
  if (it != impl_->commits.end() && pos.committed_offset < it->second)
    throw NonMonotonicCommit("commit " + std::to_string(pos.committed_offset) +
                             " below committed " + std::to_string(it->second));
  impl_->commits[key] = pos.committed_offset;
  if (impl_->opts.data_dir) impl_->persist_offsets();
}

std::optional<uint64_t> Broker::fetch_committed(const std::string& group_id,
                                                const std::string& topic,
                                                uint32_t partition) const {
  std::lock_guard lock(impl_->commits_mu);
  auto it = impl_->commits.find(std::make_tuple(group_id, topic, partition));
  if (it == impl_->commits.end()) return std::nullopt;
  return it->second;
}

bool Broker::has_topic(const std::string& topic) const {
  std::shared_lock lock(impl_->topics_mu);
  return impl_->find(topic) != nullptr;
}

uint32_t Broker::partition_count(const std::string& topic) const {
  std::shared_lock lock(impl_->topics_mu);
  const Topic* t = impl_->find(topic);
  if (!t) throw UnknownTopic("unknown topic: " + topic);
  return static_cast<uint32_t>(t->partitions.size());
}

uint64_t Broker::partition_length(const std::string& topic, uint32_t partition) const {
  std::shared_lock lock(impl_->topics_mu);
  const Topic* t = impl_->find(topic);
  if (!t) throw UnknownTopic("unknown topic: " + topic);
  if (partition >= t->partitions.size())
    throw UnknownPartition("topic " + topic + " has no partition " + std::to_string(partition));
  const Partition& part = *t->partitions[partition];
  std::lock_guard part_lock(part.mu);
  return part.log.size();
}

uint64_t Broker::total_length(const std::string& topic) const {
  const uint32_t n = partition_count(topic);
  uint64_t sum = 0;
  for (uint32_t p = 0; p < n; ++p) sum += partition_length(topic, p);
  return sum;
}

std::vector<std::string> Broker::topic_names() const {
  std::shared_lock lock(impl_->topics_mu);
  std::vector<std::string> names;
  names.reserve(impl_->topics.size());
  for (const auto& [name, _] : impl_->topics) names.push_back(name);
  return names;
}

}  // namespace tap::broker
