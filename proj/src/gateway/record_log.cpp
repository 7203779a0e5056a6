#include "safewatch/gateway/record_log.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace safewatch::gateway {

Json to_json(const Record& r) {
    return {{"seq", r.seq},   {"device", r.device}, {"device_seq", r.device_seq},
            {"kind", r.kind}, {"t_ms", r.t_ms},     {"payload", r.payload}};
}

Record record_from_json(const Json& j) {
    return {j.at("seq").get<std::uint64_t>(),    j.at("device").get<std::string>(),
            j.at("device_seq").get<std::uint64_t>(), j.at("kind").get<std::string>(),
            j.at("t_ms").get<std::int64_t>(),     j.at("payload")};
}

RecordLog::RecordLog(const std::string& path) {
    std::uintmax_t good_bytes = 0;
    bool torn = false;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const bool terminated = !in.eof();
            const bool last = in.peek() == std::char_traits<char>::eof();
            if (line.empty()) {
                good_bytes += 1;
                continue;
            }
            try {
                auto r = record_from_json(Json::parse(line));
                if (!records_.empty() && r.seq <= records_.back().seq) {
                    throw std::runtime_error("sequence not increasing");
                }
                auto& dseq = device_seq_[r.device];
                if (r.device_seq <= dseq) {
                    throw std::runtime_error("device sequence not increasing");
                }
                dseq = r.device_seq;
                if (!terminated) {
                    throw std::runtime_error("unterminated line");
                }
                records_.push_back(std::move(r));
                good_bytes += line.size() + 1;
            } catch (const std::exception& e) {
                if (last) {
                    torn = true;
                    break;
                }
                throw std::runtime_error(fmt::format("record log {} line {}: {}", path, lineno, e.what()));
            }
        }
    }
    if (torn) {
        std::filesystem::resize_file(path, good_bytes);
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) {
        throw std::runtime_error(fmt::format("cannot open record log '{}' for append", path));
    }
}

Record RecordLog::append(std::string device, std::string kind, std::int64_t t_ms, Json payload) {
    std::unique_lock lock(mu_);
    Record r;
    r.seq = records_.empty() ? 1 : records_.back().seq + 1;
    r.device_seq = ++device_seq_[device];
    r.device = std::move(device);
    r.kind = std::move(kind);
    r.t_ms = t_ms;
    r.payload = std::move(payload);
    if (out_.is_open()) {
        out_ << to_json(r).dump() << '\n';
        out_.flush();
        if (!out_) {
            throw std::runtime_error("record log write failed");
        }
    }
    records_.push_back(r);
    lock.unlock();
    cv_.notify_all();
    return r;
}

std::vector<Record> RecordLog::all() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::vector<Record> RecordLog::since(std::uint64_t seq, const std::string& device) const {
    std::lock_guard lock(mu_);
    std::vector<Record> out;
    auto it = std::partition_point(records_.begin(), records_.end(), [&](const Record& r) { return r.seq <= seq; });
    for (; it != records_.end(); ++it) {
        if (device.empty() || it->device == device) out.push_back(*it);
    }
    return out;
}

std::vector<Record> RecordLog::device_since(const std::string& device, std::uint64_t device_seq) const {
    std::lock_guard lock(mu_);
    std::vector<Record> out;
    for (const auto& r : records_) {
        if (r.device == device && r.device_seq > device_seq) out.push_back(r);
    }
    return out;
}

std::uint64_t RecordLog::last_seq() const {
    std::lock_guard lock(mu_);
    return records_.empty() ? 0 : records_.back().seq;
}

std::size_t RecordLog::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

bool RecordLog::wait_beyond(std::uint64_t seq, std::chrono::steady_clock::time_point deadline) const {
    std::unique_lock lock(mu_);
    cv_.wait_until(lock, deadline, [&] { return closed_ || (!records_.empty() && records_.back().seq > seq); });
    return !records_.empty() && records_.back().seq > seq;
}

void RecordLog::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

}  // namespace safewatch::gateway
