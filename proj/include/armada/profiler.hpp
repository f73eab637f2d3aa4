#pragma once

#include "armada/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace armada {

// ---------------------------------------------------------------------------
// Timestamped component events and the derived overhead breakdown:
// engine setup / management / tear-down, runtime-system overhead and
// tear-down, data staging, and task execution time.
// ---------------------------------------------------------------------------

struct ProfileEvent {
    double timestamp = 0;
    std::string component;
    std::string name;
    std::string uid;  // optional; set for per-task markers
};

inline const std::array<const char*, 14>& profile_vocabulary() {
    static const std::array<const char*, 14> v = {
        "setup_start",        "setup_end",        "mgmt_start",    "mgmt_end",
        "teardown_start",     "teardown_end",     "rts_start",     "rts_end",
        "rts_teardown_start", "rts_teardown_end", "staging_start", "staging_end",
        "exec_start",         "exec_end"};
    return v;
}

inline bool profile_event_known(std::string_view name) {
    for (const char* v : profile_vocabulary())
        if (name == v) return true;
    return false;
}

class UnpairedMarker : public Error {
public:
    explicit UnpairedMarker(const std::string& name) : Error("UnpairedMarker", name) {}
};

// Bounded in-memory ring; callers never block beyond the enqueue. Overflow
// drops events, which invalidates the run's profile.
class Profiler {
public:
    explicit Profiler(bool enabled = true, std::size_t capacity = std::size_t(1) << 20)
        : enabled_(enabled), capacity_(capacity) {}

    void record(double timestamp, const std::string& component, const std::string& name,
                const std::string& uid = "") {
        if (!enabled_) return;
        std::lock_guard lk(mu_);
        if (!profile_event_known(name) || events_.size() >= capacity_) {
            ++dropped_;
            return;
        }
        events_.push_back({timestamp, component, name, uid});
    }

    bool enabled() const { return enabled_; }

    std::vector<ProfileEvent> events() const {
        std::lock_guard lk(mu_);
        return events_;
    }

    std::uint64_t dropped() const {
        std::lock_guard lk(mu_);
        return dropped_;
    }

    // A profile is valid only if nothing was dropped.
    bool valid() const { return dropped() == 0; }

    void write_csv(const std::string& path) const {
        if (!enabled_) return;
        std::ofstream out(path);
        if (!out) throw Error("ProfileWriteError", "cannot open " + path);
        out << "timestamp,component,event,uid\n";
        std::lock_guard lk(mu_);
        for (const auto& e : events_) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.9f", e.timestamp);
            out << buf << ',' << e.component << ',' << e.name << ',' << e.uid << '\n';
        }
    }

private:
    bool enabled_;
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::vector<ProfileEvent> events_;
    std::uint64_t dropped_ = 0;
};

// Returns the events plus warnings for rows whose event name is outside the
// vocabulary (those rows are skipped).
inline std::pair<std::vector<ProfileEvent>, std::vector<std::string>> read_profile_csv(
    std::istream& in) {
    std::vector<ProfileEvent> events;
    std::vector<std::string> warnings;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("timestamp", 0) == 0) continue;
        }
        std::array<std::string, 4> cols;
        std::size_t col = 0, start = 0;
        for (std::size_t i = 0; i <= line.size() && col < 4; ++i) {
            if (i == line.size() || line[i] == ',') {
                cols[col++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (col < 3) {
            warnings.push_back("skipping malformed row: " + line);
            continue;
        }
        if (!profile_event_known(cols[1].empty() && false ? "" : cols[2])) {
            warnings.push_back("ignoring unknown event '" + cols[2] + "'");
            continue;
        }
        events.push_back({std::stod(cols[0]), cols[1], cols[2], cols[3]});
    }
    if (first) throw Error("EmptyProfile", "profile contains no rows");
    return {events, warnings};
}

inline std::pair<std::vector<ProfileEvent>, std::vector<std::string>> read_profile_csv_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("ProfileReadError", "cannot open " + path);
    return read_profile_csv(in);
}

struct OverheadReport {
    double engine_setup = 0;
    double engine_management = 0;
    double engine_teardown = 0;
    double rts_overhead = 0;
    double rts_teardown = 0;
    double data_staging = 0;
    double task_execution = 0;  // span: first exec_start to last exec_end
    std::map<std::string, double> per_task_execution;
};

// Each metric is the sum of its start/end marker spans; markers pair up per
// (metric, component, uid) in record order. Task execution is the span from
// the first exec_start to the last exec_end across all tasks; per-task
// durations are reported separately.
inline OverheadReport compute_overheads(const std::vector<ProfileEvent>& events) {
    struct Acc {
        double sum = 0;
    };
    std::map<std::string, double> open;  // "<metric>|<component>|<uid>" -> start ts
    std::map<std::string, Acc> sums;
    std::optional<double> first_exec, last_exec;
    OverheadReport rep;

    for (const auto& e : events) {
        bool is_start = e.name.size() > 6 && e.name.rfind("_start") == e.name.size() - 6;
        bool is_end = e.name.size() > 4 && e.name.rfind("_end") == e.name.size() - 4;
        if (!is_start && !is_end) continue;
        std::string metric = e.name.substr(0, e.name.rfind('_'));
        std::string key = metric + "|" + e.component + "|" + e.uid;
        if (is_start) {
            if (open.count(key)) throw UnpairedMarker(e.name + " (" + key + ")");
            open[key] = e.timestamp;
        } else {
            auto it = open.find(key);
            if (it == open.end()) throw UnpairedMarker(e.name + " (" + key + ")");
            double span = e.timestamp - it->second;
            if (metric == "exec") {
                if (!first_exec || it->second < *first_exec) first_exec = it->second;
                if (!last_exec || e.timestamp > *last_exec) last_exec = e.timestamp;
                if (!e.uid.empty()) rep.per_task_execution[e.uid] += span;
            }
            sums[metric].sum += span;
            open.erase(it);
        }
    }
    if (!open.empty()) throw UnpairedMarker(open.begin()->first);

    rep.engine_setup = sums["setup"].sum;
    rep.engine_management = sums["mgmt"].sum;
    rep.engine_teardown = sums["teardown"].sum;
    rep.rts_overhead = sums["rts"].sum;
    rep.rts_teardown = sums["rts_teardown"].sum;
    rep.data_staging = sums["staging"].sum;
    rep.task_execution = (first_exec && last_exec) ? *last_exec - *first_exec : 0.0;
    return rep;
}

inline nlohmann::json to_json(const OverheadReport& r) {
    return nlohmann::json{{"engine_setup", r.engine_setup},
                          {"engine_management", r.engine_management},
                          {"engine_teardown", r.engine_teardown},
                          {"rts_overhead", r.rts_overhead},
                          {"rts_teardown", r.rts_teardown},
                          {"data_staging", r.data_staging},
                          {"task_execution", r.task_execution},
                          {"per_task_execution", r.per_task_execution}};
}

inline std::string format_overheads(const OverheadReport& r) {
    auto row = [](const char* label, double v) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-28s %12.4f s\n", label, v);
        return std::string(buf);
    };
    std::string out = "Overhead breakdown:\n";
    out += row("Engine Setup Overhead", r.engine_setup);
    out += row("Engine Management Overhead", r.engine_management);
    out += row("Engine Tear-Down Overhead", r.engine_teardown);
    out += row("RTS Overhead", r.rts_overhead);
    out += row("RTS Tear-Down Overhead", r.rts_teardown);
    out += row("Data Staging Time", r.data_staging);
    out += row("Task Execution Time", r.task_execution);
    return out;
}

}  // namespace armada
