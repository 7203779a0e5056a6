#include "safewatch/sim/trace.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace safewatch::sim {

std::int64_t row_time(const Row& row) {
    return std::visit([](const auto& r) { return r.t_ms; }, row);
}

TraceError::TraceError(std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("trace line {}: {}", line, what)), line_(line) {}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string_view> words(std::string_view s, std::size_t max_parts) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size() && out.size() + 1 < max_parts) {
        while (i < s.size() && s[i] == ' ') ++i;
        if (i >= s.size()) break;
        const auto end = s.find(' ', i);
        out.push_back(s.substr(i, end == std::string_view::npos ? std::string_view::npos : end - i));
        i = end == std::string_view::npos ? s.size() : end;
    }
    while (i < s.size() && s[i] == ' ') ++i;
    if (i < s.size()) out.push_back(s.substr(i));
    return out;
}

template <class T>
T number(std::string_view text, std::size_t line) {
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw TraceError(line, fmt::format("'{}' is not a number", text));
    }
    return v;
}

}  // namespace

void write_trace(std::ostream& out, const Trace& trace) {
    const auto& h = trace.header;
    out << fmt::format("H scenario={} seed={} label={} reply={}\n", h.scenario, h.seed, h.label, h.reply);
    for (const auto& row : trace.rows) {
        std::visit(overloaded{
                       [&](const AccelRow& r) { out << fmt::format("A {} {} {} {}\n", r.t_ms, r.x, r.y, r.z); },
                       [&](const PpgRow& r) { out << fmt::format("P {} {} {}\n", r.t_ms, r.ir, r.red); },
                       [&](const NmeaRow& r) { out << fmt::format("N {} {}\n", r.t_ms, r.line); },
                       [&](const ButtonRow& r) { out << fmt::format("B {} {}\n", r.t_ms, r.button); },
                   },
                   row);
    }
}

Trace read_trace(std::istream& in) {
    Trace trace;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::int64_t last_t = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            if (line.rfind("H ", 0) != 0) throw TraceError(lineno, "first line must be the H header");
            for (auto kv : words(std::string_view(line).substr(2), 64)) {
                const auto eq = kv.find('=');
                if (eq == std::string_view::npos) throw TraceError(lineno, fmt::format("bad header field '{}'", kv));
                const auto key = kv.substr(0, eq);
                const auto value = std::string(kv.substr(eq + 1));
                if (key == "scenario") {
                    trace.header.scenario = value;
                } else if (key == "seed") {
                    trace.header.seed = number<std::uint64_t>(value, lineno);
                } else if (key == "label") {
                    if (value != "fall" && value != "adl") throw TraceError(lineno, "label must be fall or adl");
                    trace.header.label = value;
                } else if (key == "reply") {
                    if (value != "none" && value != "ok") throw TraceError(lineno, "reply must be none or ok");
                    trace.header.reply = value;
                }
            }
            have_header = true;
            continue;
        }
        if (line.size() < 3 || line[1] != ' ') throw TraceError(lineno, "malformed row");
        const char kind = line[0];
        const auto parts = words(std::string_view(line).substr(2), kind == 'N' ? 2 : 8);
        if (parts.empty()) throw TraceError(lineno, "row has no timestamp");
        const auto t = number<std::int64_t>(parts[0], lineno);
        if (t <= last_t) throw TraceError(lineno, "timestamps must strictly increase");
        last_t = t;
        auto arity = [&](std::size_t n) {
            if (parts.size() != n) throw TraceError(lineno, fmt::format("'{}' row needs {} fields", kind, n - 1));
        };
        switch (kind) {
            case 'A':
                arity(4);
                trace.rows.push_back(AccelRow{t, number<int>(parts[1], lineno), number<int>(parts[2], lineno),
                                              number<int>(parts[3], lineno)});
                break;
            case 'P':
                arity(3);
                trace.rows.push_back(
                    PpgRow{t, number<std::int64_t>(parts[1], lineno), number<std::int64_t>(parts[2], lineno)});
                break;
            case 'N':
                arity(2);
                trace.rows.push_back(NmeaRow{t, std::string(parts[1])});
                break;
            case 'B':
                arity(2);
                if (parts[1] != "A" && parts[1] != "B") throw TraceError(lineno, "button must be A or B");
                trace.rows.push_back(ButtonRow{t, parts[1][0]});
                break;
            default:
                throw TraceError(lineno, fmt::format("unknown row kind '{}'", kind));
        }
    }
    if (!have_header) throw TraceError(lineno, "empty trace");
    return trace;
}

void save_trace(const std::string& path, const Trace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
    write_trace(out, trace);
    if (!out) throw std::runtime_error(fmt::format("write to {} failed", path));
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
    return read_trace(in);
}

}  // namespace safewatch::sim
