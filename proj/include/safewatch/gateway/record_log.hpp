#pragma once

#include "safewatch/gateway/codec.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace safewatch::gateway {

struct Record {
    std::uint64_t seq = 0;         // global, strictly increasing
    std::string device;
    std::uint64_t device_seq = 0;  // per device, strictly increasing
    std::string kind;              // vitals | fix | alert | ack | profile
    std::int64_t t_ms = 0;
    Json payload;

    friend bool operator==(const Record&, const Record&) = default;
};

Json to_json(const Record& r);
Record record_from_json(const Json& j);

/// Append-only JSON-lines store. Every append is flushed before it returns.
/// Without a path the log lives in memory only.
class RecordLog {
public:
    RecordLog() = default;
    /// Loads existing lines. A torn final line (crash mid-write) is dropped
    /// and truncated away; corruption anywhere else throws.
    explicit RecordLog(const std::string& path);

    RecordLog(const RecordLog&) = delete;
    RecordLog& operator=(const RecordLog&) = delete;

    /// Assigns seq and device_seq and persists. Returns the stored record.
    Record append(std::string device, std::string kind, std::int64_t t_ms, Json payload);

    std::vector<Record> all() const;
    std::vector<Record> since(std::uint64_t seq, const std::string& device = {}) const;
    std::vector<Record> device_since(const std::string& device, std::uint64_t device_seq) const;
    std::uint64_t last_seq() const;
    std::size_t size() const;

    /// Waits until a record with seq > `seq` exists, `deadline` passes or
    /// close() is called. Returns true if new records exist.
    bool wait_beyond(std::uint64_t seq, std::chrono::steady_clock::time_point deadline) const;
    void close();

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<Record> records_;
    std::map<std::string, std::uint64_t> device_seq_;
    std::ofstream out_;
    bool closed_ = false;
};

}  // namespace safewatch::gateway
